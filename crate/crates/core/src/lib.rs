//! Maximum-principle based descent for integer-valued optimal control of the
//! Poisson equation on the unit square.
//!
//! The problem is to minimize `½‖y − y_d‖² + ∫ g(u)` subject to `−Δy = u`,
//! `y = 0` on the boundary, where `g` may be nonconvex and extended-valued
//! (for instance `α/2·v²` restricted to integers in `[−b, b]`). The control is
//! improved by switching it, on a cell set chosen greedily, to the pointwise
//! minimizer of the Hamiltonian `v·p + g(v)`; an Armijo-type test on the size
//! of that set globalizes the method.
//!
//! ```no_run
//! use pmp_descent::{fem::Problem, descent::{run, AlgorithmConfig}};
//!
//! let problem = Problem::reference(32)?;
//! let history = run(&problem, &AlgorithmConfig::default(), None)?;
//! println!("J = {:.3}, iterations = {}", history.final_objective(), history.iterations());
//! # Ok::<(), pmp_descent::Error>(())
//! ```

pub mod cli;
pub mod descent;
pub mod error;
pub mod fem;
pub mod integrand;
pub mod linalg;
pub mod mesh;

pub use error::{Error, Result};
