// SPDX-License-Identifier: Apache-2.0

//! Density-augmented cost matrix and its semidefinite relaxation.
//!
//! Colors are embedded as three unit vectors at 120 degrees, so two
//! vertices have inner product 1 when they share a mask and -1/2 otherwise.
//! Relaxing the vectors to arbitrary unit vectors gives
//!
//! ```text
//! minimize    A • X
//! subject to  X_ii = 1,  X_ij >= -1/2 on conflict pairs,  X PSD
//! ```
//!
//! solved here with an ADMM splitting between the PSD cone and the box-like
//! constraint set.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::decomp::{Color, DecompositionGraph};

/// Symmetric cost matrix over decomposition-graph vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    pub entries: DMatrix<f64>,
    /// Vertex pairs `(i, j)`, `i < j`, joined by a conflict edge.
    pub conflicts: Vec<(usize, usize)>,
}

impl CostMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Sparse coordinate dump: header `n nnz`, then `i j value` for every
    /// non-zero entry of the upper triangle (diagonal included).
    pub fn to_sparse_text(&self) -> String {
        let n = self.n();
        let mut lines = String::new();
        let mut nnz = 0;
        for i in 0..n {
            for j in i..n {
                let v = self.entries[(i, j)];
                if v != 0.0 {
                    nnz += 1;
                    let _ = writeln!(lines, "{i} {j} {v}");
                }
            }
        }
        format!("{n} {nnz}\n{lines}")
    }
}

/// `A_ij = conflicts(i,j) - alpha * stitches(i,j) + beta * sum_k den_ki den_kj`,
/// diagonal `beta * sum_k den_ki^2`. Edge multiplicities from clustering
/// enter as counts.
pub fn assemble_cost_matrix(g: &DecompositionGraph, alpha: f64, beta: f64) -> CostMatrix {
    let n = g.vertex_count();
    let mut a = DMatrix::zeros(n, n);
    if beta != 0.0 {
        for i in 0..n {
            for j in i..n {
                let v = beta * g.vertices[i].density.dot(&g.vertices[j].density);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    for (&(i, j), &m) in &g.conflicts {
        a[(i, j)] += m as f64;
        a[(j, i)] = a[(i, j)];
    }
    for (&(i, j), &m) in &g.stitches {
        a[(i, j)] -= alpha * m as f64;
        a[(j, i)] = a[(i, j)];
    }
    CostMatrix {
        entries: a,
        conflicts: g.conflicts.keys().copied().collect(),
    }
}

/// Frobenius inner product `A • X`.
pub fn inner(a: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    a.component_mul(x).sum()
}

/// Gram matrix of a discrete coloring: 1 on equal colors, -1/2 otherwise.
pub fn coloring_matrix(colors: &[Color]) -> DMatrix<f64> {
    let n = colors.len();
    DMatrix::from_fn(n, n, |i, j| if colors[i] == colors[j] { 1.0 } else { -0.5 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpSettings {
    /// Relative primal and dual residual target.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings {
            tol: 1e-6,
            max_iter: 5000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub equality: f64,
    pub inequality: f64,
    pub psd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub x: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Certified lower bound on the relaxation's optimum, from the dual
    /// estimate carried by the ADMM multiplier.
    pub lower_bound: f64,
    /// Violations of the returned matrix (zero up to rounding after the
    /// final feasibility repair).
    pub residuals: Residuals,
}

fn project_constraints(m: &mut DMatrix<f64>, conflicts: &[(usize, usize)]) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = 1.0;
    }
    for &(i, j) in conflicts {
        let v = m[(i, j)].max(-0.5);
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    symmetrize(&mut s);
    let eig = SymmetricEigen::new(s);
    let n = m.nrows();
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    let mut w = DMatrix::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[k].sqrt();
        for r in 0..n {
            w[(r, c)] = eig.eigenvectors[(r, k)] * scale;
        }
    }
    let mut out = &w * w.transpose();
    symmetrize(&mut out);
    out
}

/// `(Z + mu I) / (1 + mu)` with `mu` the most negative eigenvalue of `Z`:
/// PSD, unit diagonal, and conflict entries stay at or above -1/2.
fn repair(z: &DMatrix<f64>, conflicts: &[(usize, usize)]) -> DMatrix<f64> {
    let n = z.nrows();
    let shift = (-min_eigenvalue_fast(z)).max(0.0);
    let mut x = if shift > 0.0 {
        (z + DMatrix::identity(n, n) * shift) / (1.0 + shift)
    } else {
        z.clone()
    };
    project_constraints(&mut x, conflicts);
    x
}

/// Dual value of the multiplier `y = rho * U`. The multiplier lies in the
/// normal cone of the constraint set, i.e. it is diagonal plus non-positive
/// entries on conflict pairs, so `A + y` is a dual slack once shifted to be
/// PSD; the shift costs `n` times the most negative eigenvalue.
fn dual_bound(a: &DMatrix<f64>, y: &DMatrix<f64>, conflicts: &[(usize, usize)]) -> f64 {
    let n = a.nrows();
    let mut value = -y.trace();
    for &(i, j) in conflicts {
        value += y[(i, j)];
    }
    let shift = (-min_eigenvalue_fast(&(a + y))).max(0.0);
    value - n as f64 * shift
}

fn min_eigenvalue_fast(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Solves the relaxation by ADMM, starting from the identity.
///
/// The iterate kept at the end satisfies the diagonal and conflict
/// constraints exactly; it is made PSD by shifting its spectrum and
/// rescaling, `(Z + mu I) / (1 + mu)`, which leaves both constraint families
/// intact. Iteration stops once the residuals are below `tol` and the
/// repaired iterate's objective is within `tol * (1 + |objective|)` of the
/// dual bound. If `max_iter` runs out the repaired iterate is returned with
/// `converged = false`.
pub fn solve_sdp(cost: &CostMatrix, settings: &SdpSettings) -> SdpSolution {
    let n = cost.n();
    if n == 0 {
        return SdpSolution {
            x: DMatrix::zeros(0, 0),
            objective: 0.0,
            iterations: 0,
            converged: true,
            lower_bound: 0.0,
            residuals: Residuals::default(),
        };
    }
    if n == 1 {
        let x = DMatrix::from_element(1, 1, 1.0);
        return SdpSolution {
            objective: cost.entries[(0, 0)],
            x,
            iterations: 0,
            converged: true,
            lower_bound: cost.entries[(0, 0)],
            residuals: Residuals::default(),
        };
    }
    let a = &cost.entries;
    let mut rho = 1.0;
    let mut z = DMatrix::<f64>::identity(n, n);
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut iterations = 0;
    let mut converged = false;
    let mut lower_bound = f64::NEG_INFINITY;
    let mut best = None;
    while iterations < settings.max_iter {
        iterations += 1;
        let x = project_psd(&(&z - &u - a / rho));
        let z_prev = z.clone();
        z = &x + &u;
        project_constraints(&mut z, &cost.conflicts);
        u += &x - &z;

        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_prev).norm();
        let primal_scale = 1.0 + x.norm().max(z.norm());
        let dual_scale = 1.0 + rho * u.norm();
        if primal <= settings.tol * primal_scale && dual <= settings.tol * dual_scale {
            let bound = dual_bound(a, &(&u * rho), &cost.conflicts);
            lower_bound = lower_bound.max(bound);
            let candidate = repair(&z, &cost.conflicts);
            let value = inner(a, &candidate);
            if value - lower_bound <= settings.tol * (1.0 + value.abs()) {
                converged = true;
                best = Some(candidate);
                break;
            }
        }
        if iterations % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    let x = best.unwrap_or_else(|| repair(&z, &cost.conflicts));
    let report = check_sdp_feasibility(&x, &cost.conflicts, settings.tol);
    if !converged {
        lower_bound = lower_bound.max(dual_bound(a, &(&u * rho), &cost.conflicts));
    }
    SdpSolution {
        objective: inner(a, &x),
        x,
        iterations,
        converged,
        lower_bound,
        residuals: Residuals {
            equality: report.max_equality_violation,
            inequality: report.max_inequality_violation,
            psd: (-report.min_eigenvalue).max(0.0),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityReport {
    pub max_equality_violation: f64,
    pub max_inequality_violation: f64,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Independent feasibility check; the spectrum comes from a plain cyclic
/// Jacobi iteration rather than the solver's eigen routine.
pub fn check_sdp_feasibility(x: &DMatrix<f64>, conflicts: &[(usize, usize)], tol: f64) -> FeasibilityReport {
    let n = x.nrows();
    let max_equality_violation = (0..n).map(|i| (x[(i, i)] - 1.0).abs()).fold(0.0, f64::max);
    let max_inequality_violation = conflicts
        .iter()
        .map(|&(i, j)| (-0.5 - x[(i, j)]).max(0.0))
        .fold(0.0, f64::max);
    let min_eigenvalue = jacobi_eigenvalues(x).first().copied().unwrap_or(0.0);
    FeasibilityReport {
        max_equality_violation,
        max_inequality_violation,
        min_eigenvalue,
        passed: max_equality_violation <= tol && max_inequality_violation <= tol && min_eigenvalue >= -tol,
    }
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect()).collect();
    let total: f64 = a.iter().flatten().map(|v| v * v).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off <= 1e-30 * total.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DensityVector;

    fn triangle() -> DecompositionGraph {
        DecompositionGraph::plain(3, [(0, 1), (1, 2), (0, 2)], [])
    }

    #[test]
    fn matrix_examples() {
        let a = assemble_cost_matrix(&triangle(), 0.1, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.entries[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
        }
        let s = assemble_cost_matrix(&DecompositionGraph::plain(2, [], [(0, 1)]), 0.1, 0.0);
        assert_eq!(s.entries[(0, 1)], -0.1);

        let den = DensityVector::from_pairs(vec![(0, 1.0)]);
        let g = DecompositionGraph::abstract_graph(vec![den.clone(), den], [], []);
        let d = assemble_cost_matrix(&g, 0.1, 0.04);
        assert_eq!(d.entries[(0, 1)], 0.04);
        assert_eq!(d.entries[(0, 0)], 0.04);
    }

    #[test]
    fn sparse_dump() {
        let s = assemble_cost_matrix(&DecompositionGraph::plain(2, [], [(0, 1)]), 0.1, 0.0);
        assert_eq!(s.to_sparse_text(), "2 1\n0 1 -0.1\n");
    }

    #[test]
    fn single_vertex() {
        let g = DecompositionGraph::abstract_graph(vec![DensityVector::from_pairs(vec![(3, 0.5)])], [], []);
        let cost = assemble_cost_matrix(&g, 0.1, 0.04);
        let sol = solve_sdp(&cost, &SdpSettings::default());
        assert_eq!(sol.x[(0, 0)], 1.0);
        assert_eq!(sol.objective, 0.04 * 0.25);
    }

    #[test]
    fn conflict_pair_binds() {
        let cost = assemble_cost_matrix(&DecompositionGraph::plain(2, [(0, 1)], []), 0.1, 0.0);
        let sol = solve_sdp(&cost, &SdpSettings::default());
        assert!(sol.converged);
        assert!((sol.x[(0, 1)] + 0.5).abs() < 1e-4);
        assert!((sol.objective + 1.0).abs() < 1e-4);
    }

    #[test]
    fn feasibility_report_examples() {
        let id = DMatrix::identity(3, 3);
        assert!(check_sdp_feasibility(&id, &[(0, 1)], 1e-6).passed);
        let mut bad = id.clone();
        bad[(0, 0)] = 0.9;
        let r = check_sdp_feasibility(&bad, &[], 1e-6);
        assert!((r.max_equality_violation - 0.1).abs() < 1e-12);
        assert!(!r.passed);
        let v = nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let rank1 = &v * v.transpose();
        let r = check_sdp_feasibility(&rank1, &[], 1e-6);
        assert!(r.min_eigenvalue.abs() < 1e-12);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let ev = jacobi_eigenvalues(&m);
        let s2 = 2f64.sqrt();
        for (got, want) in ev.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
