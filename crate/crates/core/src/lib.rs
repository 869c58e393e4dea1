//! Numerical calculus with general stochastic measures.
//!
//! The crate provides, on one shared Monte Carlo probability space:
//!
//! - [`prob`] — ensembles as L0 random variables, the exact empirical
//!   Ky Fan quasi-norm, boundedness and subset-inequality diagnostics;
//! - [`driver`] — simulated stochastic measures on `[0, T]` (Brownian,
//!   fractional Brownian, compensated Poisson, deterministic) evaluable on
//!   interval unions and against deterministic integrands;
//! - [`riemann`] — Riemann integrals of random functions as limits in
//!   probability of tagged-partition sums, over boxes, products and
//!   unbounded domains, plus the classical non-integrable example;
//! - [`interchange`] — residual checks for the Fubini-type interchange and
//!   integration-by-parts identities, each side computed independently;
//! - [`parabolic`] — constant-coefficient strongly elliptic operators,
//!   closed-form heat kernels, semigroup quadrature and test functions;
//! - [`spde`] — the mild solution of `dX = AX dt + f dμ`, its weak-form
//!   residual, multi-measure variants and finite-difference cross-checks.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values;
// the suggested `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod fd;
pub mod grid;
pub mod interchange;
pub mod parabolic;
pub mod prob;
pub mod riemann;
pub(crate) mod rng;
pub mod semigroup;
pub mod spde;

pub use driver::{Driver, DriverKind, IntervalUnion, PathProcess};
pub use error::{CoreError, Result};
pub use prob::{
    check_boundedness, check_subset_inequality, ky_fan, ky_fan_distance, Ensemble, KyFanValue,
    ProbSpace, SpaceId, SubsetInequalityReport, TailRow,
};
pub use fd::{crank_nicolson_1d, kernel_validation_gate, GateConfig, GateReport, ValidatedOperator};
pub use grid::{GridFunction, SpatialGrid};
pub use interchange::{
    fubini_improper_residual, fubini_residual, iterated_product_improper_residual,
    iterated_product_residual, parts_identity_residual, triangle_identity_residual, C1Fn,
    IdentityResidual, LevelResidual,
};
pub use parabolic::{
    adjoint_apply, kernel_bound_check, EllipticOperator, KernelBoundFit, TestFunction,
};
pub use riemann::{
    build_pathological_field, improper_integral, midpoint_integral, pathological_demo,
    product_integral, riemann_integral, riemann_sum, BoxDomain, ConvergenceReport, Exhaustion,
    RandomField, TagRule, Verdict,
};
pub use semigroup::{
    apply_semigroup, apply_semigroup_fn, evolved_test_function, semigroup_identity_residual,
    EvolvedTestFunction, SemigroupOp,
};
pub use spde::{
    deterministic_crosscheck, export_csv, mild_solution, multi_measure_solution, read_binary,
    uniqueness_probe, weak_residual, write_binary, CrosscheckReport, FieldSolution, ForcingTerm,
    InitialCondition, ProblemData, SolutionDump, WeakResidual,
};

/// Default Ky Fan acceptance tolerance, matched to the sampling resolution
/// of the empirical metric at 1000 paths.
pub const DEFAULT_KY_FAN_TOL: f64 = 0.02;
