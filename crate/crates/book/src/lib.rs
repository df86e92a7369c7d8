// SPDX-License-Identifier: Apache-2.0

//! The guide under `book/`, compiled so its listings run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/layouts.md")]
pub mod layouts {}

#[doc = include_str!("../../../book/src/simplification.md")]
pub mod simplification {}

#[doc = include_str!("../../../book/src/stitches.md")]
pub mod stitches {}

#[doc = include_str!("../../../book/src/decomposition_graph.md")]
pub mod decomposition_graph {}

#[doc = include_str!("../../../book/src/density.md")]
pub mod density {}

#[doc = include_str!("../../../book/src/relaxation.md")]
pub mod relaxation {}

#[doc = include_str!("../../../book/src/mapping.md")]
pub mod mapping {}

#[doc = include_str!("../../../book/src/recovery.md")]
pub mod recovery {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
