//! Proper indefinite affine spheres, the Tzitzéica transformation and its
//! realisation as dressing by simple rational elements of a twisted loop
//! group.
//!
//! The crate is organised bottom-up:
//!
//! * [`loopalgebra`]: complex 3x3 arithmetic, automorphisms, lines and the cone.
//! * [`rational`]: simple rational elements, products, permutability, breathers.
//! * [`grid`]: rectangular grids, finite differences, immersion grids.
//! * [`lax_frame`]: solution fields, frame integration, scalar solutions.
//! * [`exact`]: closed-form vacuum and one-soliton oracles.
//! * [`transforms`]: classical transformation, duality, dressing.
//! * [`geometry`]: affine invariants extracted by finite differences.
//! * [`report`], [`io`], [`cli`]: reports, mesh export and the command line.
//! * [`suite`]: the acceptance criteria as named reports.

pub mod cli;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod lax_frame;
pub mod loopalgebra;
pub mod rational;
pub mod report;
pub mod suite;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{Domain, Grid, GridSpec, ImmersionGrid};
pub use lax_frame::{FrameGrid, ScalarSolution, SolutionField};
pub use loopalgebra::{Matrix3, ProjLine, Vec3, C64};
pub use rational::{Kind, LoopProduct, SimpleElement};
pub use report::{Check, VerificationReport};
