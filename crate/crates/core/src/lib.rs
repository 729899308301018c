//! Numerical toolkit for geodesics of manifolds with linear connections.
//!
//! The crate is organised around a handful of layers:
//!
//! * [`connection`]: Christoffel evaluation, adaptive geodesic integration,
//!   exponential/logarithm maps and parallel transport.
//! * [`spaces`]: the shipped model spaces (flat, Klein hyperbolic, spheres,
//!   projective planes, flat quotients, products) and the geodesic covering
//!   maps between them.
//! * [`geodesic_space`]: canonical representatives of oriented and unoriented
//!   geodesics, and explicit charts on spaces of geodesics.
//! * [`sky`]: skies, feet, the first law of cosines and the
//!   geodesic-connectedness solver.
//! * [`lab`]: sampling testers and re-checkable witnesses for closedness,
//!   returning, regularity, pseudoconvexity and covering compatibility.
//!
//! All operations are pure functions of immutable inputs.

// `!(x > 0.0)` is how NaN-rejecting guards are written here; index loops
// mirror the tensor formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod connection;
pub mod error;
pub mod geodesic_space;
pub mod lab;
pub mod rng;
pub mod sky;
pub mod spaces;
pub mod state;

mod linalg;
mod quad;

pub use connection::{
    christoffel_at, exp_map, exp_state, geodesic_residual, integrate, integrate_span, integrate_with, log_map,
    parallel_transport, Christoffel, IntegrateOptions, Residual,
};
pub use error::{GeoError, Result};
pub use geodesic_space::{canonicalize, GeodesicClass};
pub use spaces::{make_covering, make_space, CoveringMap, Sheet, Space, SpaceSpec};
pub use state::{parse_vector, GeodesicState, Sample, StepStats, Trajectory};
