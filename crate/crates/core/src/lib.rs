//! Derivative-free ε-CoMirror method for
//! `min { f(x) : g(x) <= 0, x in X }` with `X` a box and `f`, `g` finite
//! maxima of smooth pieces available only through value oracles.
//!
//! ```
//! use comirror::{problems, solver};
//!
//! let tp1 = problems::load_problem("tp1").unwrap();
//! let result = solver::run(&tp1.spec, &solver::SolverConfig::default()).unwrap();
//! let best = result.best.unwrap();
//! assert!(best.f < -0.9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bregman;
pub mod checks;
pub mod error;
pub mod interp;
pub mod linalg;
pub mod model;
pub mod par;
pub mod poly;
pub mod problem_file;
pub mod problems;
pub mod report;
pub mod sampling;
pub mod solver;

pub use bregman::{BregmanGeometry, GeometryConfig, GeometryKind};
pub use error::{Error, Result};
pub use model::{BoxSet, MaxRepresentation, ProblemSpec, SmoothPiece};
pub use par::Execution;
pub use sampling::{SamplingKind, SamplingStrategy};
pub use solver::{run, RunResult, SolverConfig, Termination};
