//! Generic two-step Newton iteration on a user-supplied operator.
//!
//! Each outer iteration factors the Jacobian once and reuses the
//! factorization for both half-steps:
//!
//! ```text
//! y_k     = x_k − F'(x_k)⁻¹ F(x_k)
//! x_{k+1} = y_k − F'(x_k)⁻¹ F(y_k)
//! ```
//!
//! The trace records per-iteration step norms and residuals, optionally next
//! to the scalar majorant gaps when a convergence certificate is supplied,
//! so the domination inequalities can be inspected or checked after the run.
//! All norms are ∞-norms.

use std::fmt::Write as _;

use thiserror::Error;

use crate::linalg::{DenseMatrix, DenseVector, LinalgError};
use crate::majorant::ConvergenceCertificate;

/// Entries below this are considered round-off noise by [`estimate_order`].
pub const ORDER_NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("jacobian singular at iteration {iteration}")]
    SingularJacobian {
        iteration: usize,
        trace: IterationTrace,
    },
    #[error("no convergence within {max_iterations} iterations")]
    MaxIterations {
        max_iterations: usize,
        last: DenseVector,
        trace: IterationTrace,
    },
    #[error("insufficient data: need at least 3 strictly decreasing entries above {ORDER_NOISE_FLOOR:e}")]
    InsufficientData,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

/// A square nonlinear system `F(x) = 0` with an analytic Jacobian.
pub struct ProblemDefinition {
    dimension: usize,
    residual: Box<dyn Fn(&DenseVector) -> DenseVector>,
    jacobian: Box<dyn Fn(&DenseVector) -> DenseMatrix>,
    initial_point: DenseVector,
}

impl ProblemDefinition {
    pub fn new(
        dimension: usize,
        residual: impl Fn(&DenseVector) -> DenseVector + 'static,
        jacobian: impl Fn(&DenseVector) -> DenseMatrix + 'static,
        initial_point: DenseVector,
    ) -> Result<Self, SolveError> {
        if initial_point.len() != dimension {
            return Err(SolveError::InvalidOptions(format!(
                "initial point has length {}, expected {dimension}",
                initial_point.len()
            )));
        }
        Ok(Self {
            dimension,
            residual: Box::new(residual),
            jacobian: Box::new(jacobian),
            initial_point,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn initial_point(&self) -> &DenseVector {
        &self.initial_point
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop when `‖x_{k+1} − x_k‖ / max(1, ‖x_{k+1}‖) ≤ step_tolerance` ...
    pub step_tolerance: f64,
    /// ... and `‖F(x_{k+1})‖ ≤ residual_tolerance`.
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    /// When set (and the criterion holds), the trace carries the scalar
    /// majorant gaps next to the operator step norms.
    pub certificate: Option<ConvergenceCertificate>,
    /// Skip the correction half-step (plain Newton), kept as a benchmark
    /// baseline.
    pub plain_newton: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            step_tolerance: 1e-14,
            residual_tolerance: 1e-12,
            max_iterations: 100,
            certificate: None,
            plain_newton: false,
        }
    }
}

/// Scalar majorant gaps recorded next to an operator iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorantGaps {
    /// `s_k − t_k`, dominating `‖y_k − x_k‖`.
    pub s_minus_t: f64,
    /// `t_{k+1} − s_k`, dominating `‖x_{k+1} − y_k‖`.
    pub t_corr: f64,
    /// `t_{k+1} − t_k`, dominating `‖x_{k+1} − x_k‖`.
    pub t_step: f64,
    /// `t* − t_k`.
    pub t_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// `‖y_k − x_k‖∞`.
    pub step_y: f64,
    /// `‖x_{k+1} − y_k‖∞`.
    pub step_correction: f64,
    /// `‖x_{k+1} − x_k‖∞`.
    pub step_total: f64,
    /// `‖F(x_{k+1})‖∞`.
    pub residual: f64,
    pub majorant: Option<MajorantGaps>,
}

/// Per-iteration history of a solve, including the iterates themselves.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    records: Vec<IterationRecord>,
    iterates: Vec<DenseVector>,
}

impl IterationTrace {
    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    /// The iterates `x_1, x_2, …` in order (the initial point is not stored).
    pub fn iterates(&self) -> &[DenseVector] {
        &self.iterates
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV rendering with header
    /// `k,step_y,step_corr,step_total,residual[,s_minus_t,tcorr,tstep,t_gap]`.
    pub fn to_csv(&self) -> String {
        let with_majorant = self.records.iter().any(|r| r.majorant.is_some());
        let mut out = String::from("k,step_y,step_corr,step_total,residual");
        if with_majorant {
            out.push_str(",s_minus_t,tcorr,tstep,t_gap");
        }
        out.push('\n');
        for (k, r) in self.records.iter().enumerate() {
            let _ = write!(
                out,
                "{k},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.step_y, r.step_correction, r.step_total, r.residual
            );
            if with_majorant {
                match r.majorant {
                    Some(m) => {
                        let _ = write!(
                            out,
                            ",{:.16e},{:.16e},{:.16e},{:.16e}",
                            m.s_minus_t, m.t_corr, m.t_step, m.t_gap
                        );
                    }
                    None => out.push_str(",,,,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Advances the scalar recursion in lockstep with the operator iteration.
struct ScalarStepper {
    cert: ConvergenceCertificate,
    t: f64,
    saturated: bool,
}

impl ScalarStepper {
    fn new(cert: &ConvergenceCertificate) -> Option<Self> {
        if !cert.criterion_holds() {
            return None;
        }
        Some(Self {
            cert: cert.clone(),
            t: 0.0,
            saturated: false,
        })
    }

    fn advance(&mut self) -> Option<MajorantGaps> {
        if self.saturated {
            return None;
        }
        let t_star = self.cert.t_star()?;
        let h = self.cert.majorant();
        let hp = h.derivative(self.t).ok().filter(|&v| v < 0.0)?;
        let s = self.t - h.value(self.t).ok()? / hp;
        let t_next = s - h.value(s).ok()? / hp;
        if !(self.t <= s && s <= t_next && t_next <= t_star) {
            self.saturated = true;
            return None;
        }
        let gaps = MajorantGaps {
            s_minus_t: s - self.t,
            t_corr: t_next - s,
            t_step: t_next - self.t,
            t_gap: t_star - self.t,
        };
        self.t = t_next;
        Some(gaps)
    }
}

/// Runs the two-step Newton method on `problem`.
///
/// One Jacobian evaluation and one factorization per outer iteration, two
/// triangular solves. Returns the final iterate and the full trace; on
/// failure the partial trace travels inside the error.
pub fn two_step_newton(
    problem: &ProblemDefinition,
    opts: &SolveOptions,
) -> Result<(DenseVector, IterationTrace), SolveError> {
    let positive = |t: f64| t.is_finite() && t > 0.0;
    if !positive(opts.step_tolerance) || !positive(opts.residual_tolerance) {
        return Err(SolveError::InvalidOptions(
            "tolerances must be positive".to_string(),
        ));
    }
    let mut trace = IterationTrace::default();
    let mut x = problem.initial_point.clone();
    let mut fx = (problem.residual)(&x);
    if fx.inf_norm() == 0.0 {
        return Ok((x, trace));
    }
    let mut scalar = opts.certificate.as_ref().and_then(ScalarStepper::new);

    for k in 0..opts.max_iterations {
        let jac = (problem.jacobian)(&x);
        let lu = match jac.lu_factor() {
            Ok(lu) => lu,
            Err(_) => {
                return Err(SolveError::SingularJacobian {
                    iteration: k,
                    trace,
                })
            }
        };
        let newton_step = lu.solve(&fx)?;
        let y = x.sub(&newton_step)?;
        let fy = (problem.residual)(&y);
        let (x_next, fx_next) = if opts.plain_newton {
            (y.clone(), fy)
        } else {
            let correction = lu.solve(&fy)?;
            let x_next = y.sub(&correction)?;
            let fx_next = (problem.residual)(&x_next);
            (x_next, fx_next)
        };

        let step_total = x_next.sub(&x)?.inf_norm();
        let residual_norm = fx_next.inf_norm();
        trace.records.push(IterationRecord {
            step_y: newton_step.inf_norm(),
            step_correction: x_next.sub(&y)?.inf_norm(),
            step_total,
            residual: residual_norm,
            majorant: scalar.as_mut().and_then(ScalarStepper::advance),
        });
        trace.iterates.push(x_next.clone());

        let rel_step = step_total / x_next.inf_norm().max(1.0);
        x = x_next;
        fx = fx_next;
        if rel_step <= opts.step_tolerance && residual_norm <= opts.residual_tolerance {
            return Ok((x, trace));
        }
    }
    Err(SolveError::MaxIterations {
        max_iterations: opts.max_iterations,
        last: x,
        trace,
    })
}

/// One row of a majorization report: whether each step norm is dominated by
/// its scalar counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MajorizationRow {
    /// `‖y_k − x_k‖ ≤ s_k − t_k`.
    pub step_y_dominated: bool,
    /// `‖x_{k+1} − y_k‖ ≤ t_{k+1} − s_k`.
    pub correction_dominated: bool,
    /// `‖x_{k+1} − x_k‖ ≤ t_{k+1} − t_k`.
    pub total_dominated: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MajorizationReport {
    pub rows: Vec<MajorizationRow>,
}

impl MajorizationReport {
    pub fn all_hold(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.step_y_dominated && r.correction_dominated && r.total_dominated)
    }
}

/// Compares a recorded trace against the scalar majorant sequence of `cert`.
///
/// This is a reporting operation: rows from a problem that does not actually
/// satisfy the certificate's Lipschitz premise may come back false. The
/// comparison allows slack `1e-12 · max(1, t*)`.
pub fn check_majorization(
    trace: &IterationTrace,
    cert: &ConvergenceCertificate,
) -> Result<MajorizationReport, SolveError> {
    if !cert.criterion_holds() {
        return Err(SolveError::InvalidOptions(
            "certificate criterion does not hold".to_string(),
        ));
    }
    let slack = 1e-12 * cert.t_star().unwrap_or(1.0).max(1.0);
    let mut stepper = ScalarStepper::new(cert).expect("criterion checked above");
    let mut report = MajorizationReport::default();
    for record in trace.records() {
        let Some(gaps) = stepper.advance() else {
            break;
        };
        report.rows.push(MajorizationRow {
            step_y_dominated: record.step_y <= gaps.s_minus_t + slack,
            correction_dominated: record.step_correction <= gaps.t_corr + slack,
            total_dominated: record.step_total <= gaps.t_step + slack,
        });
    }
    Ok(report)
}

/// Least-squares estimate of the convergence order from an error sequence.
///
/// Fits the slope of `log e_{k+1}` against `log e_k` over the leading run of
/// strictly decreasing entries above the round-off floor. Needs at least
/// three usable entries.
pub fn estimate_order(errors: &[f64]) -> Result<f64, SolveError> {
    let mut usable = 0;
    for (i, &e) in errors.iter().enumerate() {
        if !e.is_finite() || e <= ORDER_NOISE_FLOOR {
            break;
        }
        if i > 0 && e >= errors[i - 1] {
            break;
        }
        usable = i + 1;
    }
    if usable < 3 {
        return Err(SolveError::InsufficientData);
    }
    let xs: Vec<f64> = errors[..usable - 1].iter().map(|e| e.log10()).collect();
    let ys: Vec<f64> = errors[1..usable].iter().map(|e| e.log10()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - x_mean) * (y - y_mean);
        sxx += (x - x_mean) * (x - x_mean);
    }
    Ok(sxy / sxx)
}
