//! Two-step Newton method with semilocal convergence certificates.
//!
//! The solver advances two half-steps per iteration while reusing a single
//! Jacobian factorization, which buys cubic convergence at the cost of one
//! extra residual evaluation. Whether an initial point is good enough is
//! decided before iterating: [`majorant::certify`] turns a generalized
//! Lipschitz bound on the derivative into a scalar majorizing function whose
//! smaller root bounds the whole iteration.
//!
//! Modules:
//!
//! - [`linalg`] — dense vectors/matrices, LU with partial pivoting, ∞-norms.
//! - [`majorant`] — weight models, the majorizing function and its roots,
//!   scalar two-step sequences, convergence certificates.
//! - [`solver`] — the generic two-step Newton iteration with tracing,
//!   majorization checks, and empirical order estimation.
//! - [`quadrature`] — composite 4-node Gauss–Legendre rule on [0, 1].
//! - [`riccati`] — the transport-theory Riccati instance, its
//!   block-eliminated solver, and residual verification.

pub mod linalg;
pub mod majorant;
pub mod quadrature;
pub mod riccati;
pub mod solver;

pub use linalg::{DenseMatrix, DenseVector, LinalgError, LuFactorization};
pub use majorant::{
    certify, majorizing_sequence, majorizing_sequence_default, scalar_cubic_bound_check,
    AverageLipschitzModel, BoundCheck, ConvergenceCertificate, CustomModel, MajorantError,
    MajorantFunction, MajorizingTrace, ModelConstants,
};
pub use quadrature::{composite_gl4, QuadratureError, QuadratureRule};
pub use riccati::{
    assemble_x, build_data, f_eval, instance_certificate, jacobian_blocks, res_metric,
    ricc_residual, solve_minimal, MinimalSolution, RiccatiData, RiccatiError, RiccatiSolveOptions,
    TransportParameters,
};
pub use solver::{
    check_majorization, estimate_order, two_step_newton, IterationRecord, IterationTrace,
    MajorizationReport, ProblemDefinition, SolveError, SolveOptions,
};
