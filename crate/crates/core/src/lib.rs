#![forbid(unsafe_code)]

//! Solver and verification suite for evolution Hamilton–Jacobi equations
//! u_t + H(x, |Du|) = 0 posed on metric graphs.
//!
//! The pieces follow the optimal-control structure of the problem:
//!
//! - [`graph`]: the metric space (a graph with positive edge lengths and
//!   the geodesic metric) and its discretization lattice.
//! - [`hamiltonian`]: H(x,p), its standing assumptions, and the Legendre
//!   dual L(x,v) with the duality round-trip.
//! - [`curves`]: admissible curves (piecewise constant metric
//!   derivative), action integrals, arc-length reparametrization.
//! - [`solver`]: the value function by semi-Lagrangian dynamic
//!   programming, trajectory extraction, refinement studies, and a
//!   brute-force curve-enumeration oracle.
//! - [`verification`]: executable sub/superoptimality, metric-viscosity
//!   residuals, the comparison principle, and continuity moduli.
//! - [`scenario`] / [`cli`]: scenario files, command dispatch, CSV
//!   emission.

pub mod cli;
pub mod curves;
pub mod error;
pub mod graph;
pub mod hamiltonian;
pub mod scenario;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
