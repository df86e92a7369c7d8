// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use trimask::{render_layout, synth};

fn trimask(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trimask"));
    for a in args {
        cmd.arg(a);
    }
    cmd.output().expect("spawn trimask")
}

fn walkthrough(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("walkthrough.json");
    fs::write(&path, render_layout(&synth::walkthrough_layout())).unwrap();
    path
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn writes_all_artifacts() {
    let dir = TempDir::new().unwrap();
    let input = walkthrough(&dir);
    let (out, report, svg) = (dir.path().join("c.json"), dir.path().join("r.json"), dir.path().join("l.svg"));
    let o = trimask(&[&input, &"--out", &out, &"--report", &report, &"--svg", &svg, &"--oracle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let coloring = read(&out);
    assert!(coloring.contains("\"format_version\": 1"));
    assert_eq!(coloring.matches("\"feature_id\"").count(), 12);
    let report = read(&report);
    assert!(report.contains("\"conflicts\": 0"));
    assert!(report.contains("\"stitches\": 1"));
    assert!(report.contains("\"oracle_objective\""));
    assert!(!report.contains("runtime_ms"));
    assert!(read(&svg).starts_with("<svg"));
}

#[test]
fn coloring_goes_to_stdout_by_default() {
    let dir = TempDir::new().unwrap();
    let input = walkthrough(&dir);
    let o = trimask(&[&input, &"--beta", &"0"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"fragments\""));
}

#[test]
fn timings_are_opt_in() {
    let dir = TempDir::new().unwrap();
    let input = walkthrough(&dir);
    let report = dir.path().join("r.json");
    let o = trimask(&[&input, &"--out", &dir.path().join("c.json"), &"--report", &report, &"--timings"]);
    assert!(o.status.success());
    assert!(read(&report).contains("\"runtime_ms\""));
}

#[test]
fn debug_dumps() {
    let dir = TempDir::new().unwrap();
    let input = walkthrough(&dir);
    let (graph, seqs, mats) = (dir.path().join("g.txt"), dir.path().join("s.txt"), dir.path().join("m"));
    let o = trimask(&[
        &input,
        &"--out",
        &dir.path().join("c.json"),
        &"--dump-graph",
        &graph,
        &"--dump-sequences",
        &seqs,
        &"--dump-matrices",
        &mats,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&graph).starts_with("10\n"));
    assert!(read(&seqs).lines().any(|l| l == "a: 02120"));
    let m = read(&mats.join("matrix-0.txt"));
    assert!(m.starts_with("6 "));
}

#[test]
fn empty_layout_succeeds() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty.json");
    fs::write(&input, r#"{"units": "nm", "dis_m": 100, "features": []}"#).unwrap();
    let report = dir.path().join("r.json");
    let o = trimask(&[&input, &"--report", &report]);
    assert!(o.status.success());
    assert!(read(&report).contains("\"cost\": 0.0"));
}

#[test]
fn exit_codes_name_the_failing_stage() {
    let dir = TempDir::new().unwrap();
    let input = walkthrough(&dir);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"units\": \"nm\",\n  \"dis_m\": }").unwrap();
    let unwritable = dir.path().join("missing-dir").join("c.json");
    let missing = dir.path().join("nope.json");
    let cases: [(Vec<&dyn AsRef<std::ffi::OsStr>>, i32); 5] = [
        (vec![&"--no-such-flag"], 2),
        (vec![&missing], 3),
        (vec![&bad], 4),
        (vec![&input, &"--bin-overlap", &"1.5"], 5),
        (vec![&input, &"--out", &unwritable], 6),
    ];
    for (args, code) in cases {
        let o = trimask(&args);
        assert_eq!(o.status.code(), Some(code), "{}", String::from_utf8_lossy(&o.stderr));
        let stderr = String::from_utf8_lossy(&o.stderr);
        assert!(!stderr.trim().is_empty());
    }
    let o = trimask(&[&bad]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn negative_threshold_parses() {
    let dir = TempDir::new().unwrap();
    let input = walkthrough(&dir);
    let o = trimask(&[&input, &"--th-separate", &"-0.45", &"--out", &dir.path().join("c.json")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
