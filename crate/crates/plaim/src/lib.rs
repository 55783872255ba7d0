//! A numerical laboratory for first-order optimization on Polyak-Łojasiewicz
//! landscapes.
//!
//! The crate bundles:
//!
//! - [`objective`]: the differentiable-objective abstraction plus
//!   finite-difference verification utilities,
//! - [`testbed`]: the benchmark functions (sine-perturbed quadratics, the 2-D
//!   valley, the sine valley, a synthetic radial function, diagonal quadratics
//!   and a chained hard instance), each with known minimizer,
//! - [`geometry`]: grid estimation of the function-class constants
//!   (PL, smoothness, quadratic growth, aiming), strong-quasar-convexity
//!   sweeps, rate tables and acceleration predicates,
//! - [`optim`]: discrete algorithms (gradient descent, Heavy Ball, the
//!   two-sequence Nesterov variant, and the stochastic continuized
//!   three-sequence Nesterov) with a strong-growth noise oracle,
//! - [`flow`]: fixed-step 4th-order integration of the gradient-flow and
//!   momentum ODEs, with residual and exact-rate diagnostics,
//! - [`trajectory`]: post-hoc analysis (rate fits, envelope bounds, averaged
//!   aiming certificates, identity/inequality checkers, high-probability
//!   validation),
//! - [`experiments`]: the CSV-emitting experiment runner behind the `plaim`
//!   binary.

pub mod experiments;
pub mod flow;
pub mod geometry;
pub mod objective;
pub mod optim;
pub mod testbed;
pub mod trajectory;

mod linalg;

pub use objective::{BoxDomain, GradCheckReport, Objective, ObjectiveError, Point};
