//! Scalar majorant machinery for semilocal convergence certificates.
//!
//! The central object is the majorizing function
//!
//! ```text
//! h(t) = β − t + ∫₀ᵗ L(u)(t − u) du
//! ```
//!
//! built from a positive nondecreasing weight `L` and the scaled initial
//! residual `β`. Its smaller root `t*` bounds the distance from the initial
//! point to the solution, and the scalar two-step recursion on `h` dominates
//! the operator iteration step by step. A [`ConvergenceCertificate`] packages
//! the derived constants, the convergence criterion `β ≤ b`, the cubic-order
//! condition, and the cubic error coefficient.

use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

/// Default absolute tolerance on `t* − t_k` for [`majorizing_sequence`].
pub const DEFAULT_SEQUENCE_TOL: f64 = 1e-15;
/// Default iteration cap for [`majorizing_sequence`].
pub const DEFAULT_MAX_STEPS: usize = 100;

/// Relative tolerance for bisection root finding on custom models.
const BISECTION_REL_TOL: f64 = 1e-14;
/// Absolute tolerance for adaptive Simpson quadrature of custom weights.
const QUADRATURE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MajorantError {
    #[error("argument {t} outside the model domain [0, {limit})")]
    DomainExceeded { t: f64, limit: f64 },
    #[error("no root: {0}")]
    NoRoot(&'static str),
    #[error("convergence criterion violated: beta = {beta} exceeds b = {b}")]
    CriterionViolated { beta: f64, b: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A user-supplied weight function `L` with optional closed-form primitives.
///
/// When the primitives are not given they are computed by adaptive Simpson
/// quadrature. The domain is `[0, domain_end)`; pass `f64::INFINITY` for a
/// weight defined on the whole half line.
#[derive(Clone)]
pub struct CustomModel {
    l: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    primitive: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    weighted_primitive: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    domain_end: f64,
}

impl CustomModel {
    pub fn new(
        l: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain_end: f64,
    ) -> Result<Self, MajorantError> {
        if domain_end.is_nan() || domain_end <= 0.0 {
            return Err(MajorantError::InvalidParameter(format!(
                "domain end must be positive, got {domain_end}"
            )));
        }
        Ok(Self {
            l: Arc::new(l),
            primitive: None,
            weighted_primitive: None,
            domain_end,
        })
    }

    /// Supplies closed-form `∫₀ᵗ L(u) du` and `∫₀ᵗ L(u)·u du`; both must
    /// vanish at 0 and be nondecreasing.
    pub fn with_primitives(
        mut self,
        primitive: impl Fn(f64) -> f64 + Send + Sync + 'static,
        weighted_primitive: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.primitive = Some(Arc::new(primitive));
        self.weighted_primitive = Some(Arc::new(weighted_primitive));
        self
    }
}

impl std::fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomModel")
            .field("domain_end", &self.domain_end)
            .field("has_primitives", &self.primitive.is_some())
            .finish()
    }
}

/// The weight function of the generalized Lipschitz condition.
#[derive(Debug, Clone)]
pub enum AverageLipschitzModel {
    /// Constant weight `L(u) = L` (plain affine-invariant Lipschitz bound).
    ConstantL { l: f64 },
    /// `L(u) = 2γ/(1 − γu)³` on `[0, 1/γ)`, the Smale-type regularity.
    GammaType { gamma: f64 },
    /// Arbitrary positive nondecreasing weight.
    Custom(CustomModel),
}

/// Constants derived from the weight alone: `r0` where the primitive of `L`
/// reaches 1, `b` the weighted primitive at `r0`, and `r_max` the outer
/// normalization radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    pub r0: f64,
    pub b: f64,
    pub r_max: f64,
}

impl AverageLipschitzModel {
    pub fn constant(l: f64) -> Result<Self, MajorantError> {
        if !l.is_finite() || l <= 0.0 {
            return Err(MajorantError::InvalidParameter(format!(
                "constant weight must be positive and finite, got {l}"
            )));
        }
        Ok(Self::ConstantL { l })
    }

    pub fn gamma_type(gamma: f64) -> Result<Self, MajorantError> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(MajorantError::InvalidParameter(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self::GammaType { gamma })
    }

    /// The self-concordant (Nesterov–Nemirovskii) weight, i.e. the γ = 1 case.
    pub fn self_concordant() -> Self {
        Self::GammaType { gamma: 1.0 }
    }

    pub fn custom(model: CustomModel) -> Self {
        Self::Custom(model)
    }

    /// Upper end of the weight's domain (exclusive).
    pub fn domain_end(&self) -> f64 {
        match self {
            Self::ConstantL { .. } => f64::INFINITY,
            Self::GammaType { gamma } => 1.0 / gamma,
            Self::Custom(c) => c.domain_end,
        }
    }

    fn check_domain(&self, t: f64) -> Result<(), MajorantError> {
        let limit = self.domain_end();
        if !(0.0..limit).contains(&t) {
            return Err(MajorantError::DomainExceeded { t, limit });
        }
        Ok(())
    }

    /// `L(u)` inside the domain.
    pub fn weight(&self, u: f64) -> Result<f64, MajorantError> {
        self.check_domain(u)?;
        Ok(match self {
            Self::ConstantL { l } => *l,
            Self::GammaType { gamma } => {
                let w = 1.0 - gamma * u;
                2.0 * gamma / (w * w * w)
            }
            Self::Custom(c) => (c.l)(u),
        })
    }

    /// `∫₀ᵗ L(u) du`.
    pub fn primitive(&self, t: f64) -> Result<f64, MajorantError> {
        self.check_domain(t)?;
        Ok(match self {
            Self::ConstantL { l } => l * t,
            Self::GammaType { gamma } => {
                let w = 1.0 - gamma * t;
                1.0 / (w * w) - 1.0
            }
            Self::Custom(c) => match &c.primitive {
                Some(p) => p(t),
                None => adaptive_simpson(c.l.as_ref(), 0.0, t, QUADRATURE_TOL),
            },
        })
    }

    /// `∫₀ᵗ L(u)·u du`.
    pub fn weighted_primitive(&self, t: f64) -> Result<f64, MajorantError> {
        self.check_domain(t)?;
        Ok(match self {
            Self::ConstantL { l } => 0.5 * l * t * t,
            Self::GammaType { gamma } => {
                let w = 1.0 - gamma * t;
                t / (w * w) - (1.0 / w - 1.0) / gamma
            }
            Self::Custom(c) => match &c.weighted_primitive {
                Some(p) => p(t),
                None => adaptive_simpson(&|u| (c.l)(u) * u, 0.0, t, QUADRATURE_TOL),
            },
        })
    }

    /// Derives `(r0, b, r_max)`; closed forms for the built-in weights,
    /// bracketed bisection on the primitives otherwise.
    pub fn constants(&self) -> Result<ModelConstants, MajorantError> {
        match self {
            Self::ConstantL { l } => Ok(ModelConstants {
                r0: 1.0 / l,
                b: 1.0 / (2.0 * l),
                r_max: 2.0 / l,
            }),
            Self::GammaType { gamma } => Ok(ModelConstants {
                r0: (1.0 - 1.0 / std::f64::consts::SQRT_2) / gamma,
                b: (3.0 - 2.0 * std::f64::consts::SQRT_2) / gamma,
                r_max: 0.5 / gamma,
            }),
            Self::Custom(_) => {
                let r0 = find_root_increasing(
                    &|t| self.primitive(t).unwrap_or(f64::INFINITY) - 1.0,
                    0.0,
                    self.domain_end(),
                )
                .ok_or(MajorantError::NoRoot("primitive of L never reaches 1"))?;
                let b = self.weighted_primitive(r0)?;
                // g(t) = ∫₀ᵗ L(u)(t − u) du − t is -b at r0 and increases past it.
                let g = |t: f64| {
                    t * (self.primitive(t).unwrap_or(f64::INFINITY) - 1.0)
                        - self.weighted_primitive(t).unwrap_or(f64::INFINITY)
                };
                let r_max = find_root_increasing(&g, r0, self.domain_end()).ok_or(
                    MajorantError::NoRoot("normalization radius not reached inside the domain"),
                )?;
                Ok(ModelConstants { r0, b, r_max })
            }
        }
    }

    /// Short display form used in serialized certificates.
    pub fn label(&self) -> String {
        match self {
            Self::ConstantL { l } => format!("constant(L={l})"),
            Self::GammaType { gamma } => format!("gamma(gamma={gamma})"),
            Self::Custom(_) => "custom".to_string(),
        }
    }
}

/// The majorizing function `h(t) = β − t + ∫₀ᵗ L(u)(t − u) du`.
#[derive(Debug, Clone)]
pub struct MajorantFunction {
    beta: f64,
    model: AverageLipschitzModel,
}

impl MajorantFunction {
    /// Requires `β > 0`: a zero `β` means the initial point already solves
    /// the equation and there is nothing to certify.
    pub fn new(beta: f64, model: AverageLipschitzModel) -> Result<Self, MajorantError> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(MajorantError::InvalidParameter(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Ok(Self { beta, model })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn model(&self) -> &AverageLipschitzModel {
        &self.model
    }

    /// `h(t)`, using the closed form of the underlying weight when available.
    pub fn value(&self, t: f64) -> Result<f64, MajorantError> {
        match &self.model {
            AverageLipschitzModel::ConstantL { l } => {
                self.model.check_domain(t)?;
                Ok(self.beta - t + 0.5 * l * t * t)
            }
            AverageLipschitzModel::GammaType { gamma } => {
                self.model.check_domain(t)?;
                Ok(self.beta - t + gamma * t * t / (1.0 - gamma * t))
            }
            AverageLipschitzModel::Custom(_) => {
                let prim = self.model.primitive(t)?;
                let wprim = self.model.weighted_primitive(t)?;
                Ok(self.beta - t + t * prim - wprim)
            }
        }
    }

    /// `h'(t) = −1 + ∫₀ᵗ L(u) du`.
    pub fn derivative(&self, t: f64) -> Result<f64, MajorantError> {
        match &self.model {
            AverageLipschitzModel::GammaType { gamma } => {
                self.model.check_domain(t)?;
                let w = 1.0 - gamma * t;
                Ok(-2.0 + 1.0 / (w * w))
            }
            _ => Ok(-1.0 + self.model.primitive(t)?),
        }
    }

    /// `h''(t) = L(t)`.
    pub fn second_derivative(&self, t: f64) -> Result<f64, MajorantError> {
        self.model.weight(t)
    }

    /// The two roots `(t*, t**)` of `h`, defined when `0 < β ≤ b`.
    ///
    /// Closed forms for the constant and γ-type weights; bracketed bisection
    /// on `[β, r0]` and `[r0, r_max]` otherwise (`h` is strictly monotone on
    /// each bracket, so bisection cannot fail).
    pub fn solve_roots(&self) -> Result<(f64, f64), MajorantError> {
        let c = self.model.constants()?;
        if self.beta > c.b {
            return Err(MajorantError::CriterionViolated {
                beta: self.beta,
                b: c.b,
            });
        }
        // At the boundary β = b both roots coincide with r0 exactly; the
        // closed-form discriminants would only recover that up to √ε.
        if self.beta >= c.b {
            return Ok((c.r0, c.r0));
        }
        match &self.model {
            AverageLipschitzModel::ConstantL { l } => {
                let s = (1.0 - 2.0 * l * self.beta).max(0.0).sqrt();
                Ok(((1.0 - s) / l, (1.0 + s) / l))
            }
            AverageLipschitzModel::GammaType { gamma } => {
                let alpha = self.beta * gamma;
                let disc = ((1.0 + alpha) * (1.0 + alpha) - 8.0 * alpha)
                    .max(0.0)
                    .sqrt();
                Ok((
                    (1.0 + alpha - disc) / (4.0 * gamma),
                    (1.0 + alpha + disc) / (4.0 * gamma),
                ))
            }
            AverageLipschitzModel::Custom(_) => {
                let h = |t: f64| self.value(t).unwrap_or(f64::INFINITY);
                let t_star = bisect_to_rel_tol(&|t| -h(t), self.beta, c.r0);
                let t_star2 = bisect_to_rel_tol(&h, c.r0, c.r_max);
                Ok((t_star, t_star2))
            }
        }
    }
}

/// Everything the semilocal analysis derives from `(β, L)`: the constants,
/// the roots, the criterion and cubic-condition flags, and the error-bound
/// ingredients `H* = h''(t*)/h'(t*)` and `½H*²(2 − t*H*)/(2 + t*H*)`.
///
/// `H*` (and everything built on it) is undefined at the boundary `β = b`
/// where `h'(t*) = 0`; those fields are `None` there.
#[derive(Debug, Clone)]
pub struct ConvergenceCertificate {
    majorant: MajorantFunction,
    r0: f64,
    b: f64,
    r_max: f64,
    t_star: Option<f64>,
    t_star2: Option<f64>,
    criterion_holds: bool,
    cubic_holds: bool,
    h_star: Option<f64>,
    cubic_coefficient: Option<f64>,
    q: Option<f64>,
}

/// Builds the full convergence certificate for `(β, model)`.
///
/// A `β` beyond `b` is not an error: the certificate simply reports
/// `criterion_holds = false` with no roots.
pub fn certify(
    beta: f64,
    model: AverageLipschitzModel,
) -> Result<ConvergenceCertificate, MajorantError> {
    let majorant = MajorantFunction::new(beta, model)?;
    let c = majorant.model().constants()?;
    let criterion_holds = beta <= c.b;

    let mut cert = ConvergenceCertificate {
        majorant,
        r0: c.r0,
        b: c.b,
        r_max: c.r_max,
        t_star: None,
        t_star2: None,
        criterion_holds,
        cubic_holds: false,
        h_star: None,
        cubic_coefficient: None,
        q: None,
    };
    if !criterion_holds {
        return Ok(cert);
    }

    let (t_star, t_star2) = cert.majorant.solve_roots()?;
    cert.t_star = Some(t_star);
    cert.t_star2 = Some(t_star2);

    // At the boundary β = b the roots collapse onto r0 and h'(t*) vanishes.
    if beta < c.b {
        let h_star = match cert.majorant.model() {
            AverageLipschitzModel::ConstantL { l } => {
                let s = (1.0 - 2.0 * l * beta).max(0.0).sqrt();
                -l / s
            }
            AverageLipschitzModel::GammaType { gamma } => {
                let alpha = beta * gamma;
                let disc = ((1.0 + alpha) * (1.0 + alpha) - 8.0 * alpha)
                    .max(0.0)
                    .sqrt();
                let base = 3.0 - alpha + disc;
                -32.0 * gamma / (disc * base * base)
            }
            AverageLipschitzModel::Custom(_) => {
                cert.majorant.second_derivative(t_star)? / cert.majorant.derivative(t_star)?
            }
        };
        cert.h_star = Some(h_star);
        cert.cubic_holds = 2.0 + t_star * h_star > 0.0;
        if cert.cubic_holds {
            cert.cubic_coefficient =
                Some(0.5 * h_star * h_star * (2.0 - t_star * h_star) / (2.0 + t_star * h_star));
        }
        if let AverageLipschitzModel::GammaType { gamma } = cert.majorant.model() {
            let alpha = beta * gamma;
            let disc = ((1.0 + alpha) * (1.0 + alpha) - 8.0 * alpha)
                .max(0.0)
                .sqrt();
            let base = 3.0 - alpha + disc;
            let lead = disc * base * base;
            let shift = 4.0 * (1.0 + alpha - disc);
            cert.q = Some((lead + shift) / (lead - shift));
        }
    }
    Ok(cert)
}

impl ConvergenceCertificate {
    pub fn beta(&self) -> f64 {
        self.majorant.beta()
    }

    pub fn majorant(&self) -> &MajorantFunction {
        &self.majorant
    }

    pub fn model(&self) -> &AverageLipschitzModel {
        self.majorant.model()
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// The outer normalization radius `R`.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn t_star(&self) -> Option<f64> {
        self.t_star
    }

    pub fn t_star2(&self) -> Option<f64> {
        self.t_star2
    }

    pub fn criterion_holds(&self) -> bool {
        self.criterion_holds
    }

    pub fn cubic_holds(&self) -> bool {
        self.cubic_holds
    }

    pub fn h_star(&self) -> Option<f64> {
        self.h_star
    }

    pub fn cubic_coefficient(&self) -> Option<f64> {
        self.cubic_coefficient
    }

    pub fn q(&self) -> Option<f64> {
        self.q
    }

    /// Flat key-value document with the fixed field names.
    pub fn to_json(&self) -> Value {
        json!({
            "beta": self.beta(),
            "model": self.model().label(),
            "r0": self.r0,
            "b": self.b,
            "R": self.r_max,
            "t_star": self.t_star,
            "t_star2": self.t_star2,
            "criterion_holds": self.criterion_holds,
            "cubic_holds": self.cubic_holds,
            "H_star": self.h_star,
            "cubic_coefficient": self.cubic_coefficient,
            "q": self.q,
        })
    }
}

/// The scalar pairs `(t_k, s_k)` produced by the two-step recursion on `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorizingTrace {
    steps: Vec<(f64, f64)>,
    final_t: f64,
    converged: bool,
    limit: f64,
}

impl MajorizingTrace {
    /// Recorded `(t_k, s_k)` pairs, `k = 0..`.
    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    /// `t_{k+1}` for recorded step `k`.
    pub fn t_next(&self, k: usize) -> f64 {
        self.steps.get(k + 1).map_or(self.final_t, |p| p.0)
    }

    /// The last computed `t` iterate.
    pub fn final_t(&self) -> f64 {
        self.final_t
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Estimate of the limit: `t*` itself for converged traces, the last
    /// iterate otherwise.
    pub fn limit_estimate(&self) -> f64 {
        self.limit
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Runs the scalar two-step recursion
///
/// ```text
/// s_k = t_k − h(t_k)/h'(t_k),   t_{k+1} = s_k − h(s_k)/h'(t_k)
/// ```
///
/// from `t_0 = 0` until `t* − t_k < tol` or `max_k` steps.
///
/// Recorded pairs always satisfy the strict chain `t_k < s_k < t_{k+1} < t*`.
/// Near saturation the floating-point iterate may land a few ulps past the
/// computed `t*` (the two agree with the exact root only to round-off); that
/// final step is not recorded and counts as convergence. At the boundary
/// `β = b` the root is double and the recursion stalls at a distance of
/// order √ε from `t*`; such traces report `converged = false` under the
/// default tolerance.
pub fn majorizing_sequence(
    cert: &ConvergenceCertificate,
    max_k: usize,
    tol: f64,
) -> Result<MajorizingTrace, MajorantError> {
    let t_star = cert.t_star().ok_or(MajorantError::CriterionViolated {
        beta: cert.beta(),
        b: cert.b(),
    })?;
    let h = cert.majorant();
    let snap = 32.0 * f64::EPSILON * t_star.max(1.0);
    let mut steps = Vec::new();
    let mut t = 0.0_f64;
    let mut converged = false;
    for _ in 0..max_k {
        if t_star - t < tol {
            converged = true;
            break;
        }
        let hp = h.derivative(t)?;
        if hp.is_nan() || hp >= 0.0 {
            break;
        }
        let s = t - h.value(t)? / hp;
        let t_next = s - h.value(s)? / hp;
        if t < s && s < t_next {
            if t_next < t_star {
                steps.push((t, s));
                t = t_next;
                continue;
            }
            // Forward progress onto or a few ulps past the computed root:
            // the recursion saturated. Snap the final iterate just below
            // t* so the strict chain of the recorded pairs is preserved.
            if t_next - t_star <= snap {
                let clamped = t_star.next_down();
                if s < clamped {
                    steps.push((t, s));
                    t = clamped;
                }
                converged = true;
            }
        }
        break;
    }
    if t_star - t <= tol.max(8.0 * f64::EPSILON * t_star.max(1.0)) {
        converged = true;
    }
    let limit = if converged { t_star } else { t };
    Ok(MajorizingTrace {
        steps,
        final_t: t,
        converged,
        limit,
    })
}

/// Convenience wrapper with the default cap and tolerance.
pub fn majorizing_sequence_default(
    cert: &ConvergenceCertificate,
) -> Result<MajorizingTrace, MajorantError> {
    majorizing_sequence(cert, DEFAULT_MAX_STEPS, DEFAULT_SEQUENCE_TOL)
}

/// Outcome of a majorant-side inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCheck {
    Holds,
    Violated,
    /// The bound involves `H*`, which is undefined at the boundary `β = b`.
    NotApplicable,
}

/// Checks the cubic contraction of the scalar sequence:
/// `t* − t_{k+1} ≤ ½ H*² (t* − t_k)³` for every recorded step, with absolute
/// slack 1e-12.
///
/// `NotApplicable` at the boundary `β = b`, where `h'(t*) = 0` leaves `H*`
/// undefined and the bound vacuous.
pub fn scalar_cubic_bound_check(
    trace: &MajorizingTrace,
    cert: &ConvergenceCertificate,
) -> BoundCheck {
    let (Some(t_star), Some(h_star)) = (cert.t_star(), cert.h_star()) else {
        return BoundCheck::NotApplicable;
    };
    let coeff = 0.5 * h_star * h_star;
    for (k, &(t_k, _)) in trace.steps().iter().enumerate() {
        let gap = t_star - t_k;
        let next_gap = t_star - trace.t_next(k);
        if next_gap > coeff * gap * gap * gap + 1e-12 {
            return BoundCheck::Violated;
        }
    }
    BoundCheck::Holds
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn adaptive_simpson(f: &(impl Fn(f64) -> f64 + ?Sized), a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
        width / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &(impl Fn(f64) -> f64 + ?Sized),
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Finds the zero of an increasing function on `(lo, hi)` by bracket
/// expansion toward `hi` followed by bisection. `f(lo)` must be negative.
fn find_root_increasing(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let mut left = lo;
    let mut right = None;
    if hi.is_finite() {
        // Probe geometrically toward the (possibly singular) domain end.
        let mut frac = 0.5_f64;
        for _ in 0..60 {
            let t = lo + (hi - lo) * frac;
            if t <= left || t >= hi {
                break;
            }
            let ft = f(t);
            if ft >= 0.0 {
                right = Some(t);
                break;
            }
            left = t;
            frac = 0.5 * (1.0 + frac);
        }
    } else {
        let mut t = if lo > 0.0 { 2.0 * lo } else { 1.0 };
        for _ in 0..1100 {
            let ft = f(t);
            if ft >= 0.0 {
                right = Some(t);
                break;
            }
            left = t;
            t *= 2.0;
            if !t.is_finite() {
                break;
            }
        }
    }
    let right = right?;
    Some(bisect_to_rel_tol(f, left, right))
}

/// Bisection on `[lo, hi]` for a function that is ≤ 0 at `lo` and ≥ 0 at
/// `hi`, to relative width `BISECTION_REL_TOL`.
fn bisect_to_rel_tol(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= BISECTION_REL_TOL * hi.abs().max(lo.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const B_GAMMA_1: f64 = 0.1715728752538099; // 3 - 2*sqrt(2)
    const CUBIC_LIMIT_GAMMA: f64 = 0.15267789813692736; // 3 - 2^(1/3) - 4^(1/3)

    fn constant(l: f64) -> AverageLipschitzModel {
        AverageLipschitzModel::constant(l).unwrap()
    }

    fn gamma(g: f64) -> AverageLipschitzModel {
        AverageLipschitzModel::gamma_type(g).unwrap()
    }

    #[test]
    fn h_at_zero_is_beta_with_unit_slope() {
        let m = MajorantFunction::new(0.5, constant(1.0)).unwrap();
        assert_eq!(m.value(0.0).unwrap(), 0.5);
        assert_eq!(m.derivative(0.0).unwrap(), -1.0);
        let g = MajorantFunction::new(0.1, gamma(1.0)).unwrap();
        assert_eq!(g.value(0.0).unwrap(), 0.1);
        assert_eq!(g.derivative(0.0).unwrap(), -1.0);
    }

    #[test]
    fn gamma_root_is_a_zero_of_h() {
        // t* for gamma = 1, beta = 0.1 from the closed-form quadratic.
        let t_star = 0.11492189406417878;
        let m = MajorantFunction::new(0.1, gamma(1.0)).unwrap();
        assert!(m.value(t_star).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_boundary_root() {
        // L = 1, beta = 0.5 = b: h(1) = 0.5 - 1 + 0.5 = 0.
        let m = MajorantFunction::new(0.5, constant(1.0)).unwrap();
        assert_eq!(m.value(1.0).unwrap(), 0.0);
    }

    #[test]
    fn domain_is_enforced() {
        let m = MajorantFunction::new(0.1, gamma(2.0)).unwrap();
        assert!(matches!(
            m.value(0.5),
            Err(MajorantError::DomainExceeded { .. })
        ));
        assert!(matches!(
            m.value(-0.1),
            Err(MajorantError::DomainExceeded { .. })
        ));
        assert!(m.value(0.49).is_ok());
    }

    #[test]
    fn constants_closed_forms() {
        let c = constant(2.0).constants().unwrap();
        assert_eq!((c.r0, c.b, c.r_max), (0.5, 0.25, 1.0));

        let g = gamma(1.0).constants().unwrap();
        assert_abs_diff_eq!(g.r0, 0.2928932188134525, epsilon = 1e-15);
        assert_abs_diff_eq!(g.b, B_GAMMA_1, epsilon = 1e-15);
        assert_eq!(g.r_max, 0.5);
    }

    #[test]
    fn custom_constant_weight_matches_closed_forms() {
        let model =
            AverageLipschitzModel::custom(CustomModel::new(|_| 1.0, f64::INFINITY).unwrap());
        let c = model.constants().unwrap();
        assert_abs_diff_eq!(c.r0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.b, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.r_max, 2.0, epsilon = 1e-12);

        let m = MajorantFunction::new(0.25, model).unwrap();
        let reference = MajorantFunction::new(0.25, constant(1.0)).unwrap();
        for t in [0.0, 0.1, 0.29, 1.0, 1.7] {
            assert_abs_diff_eq!(
                m.value(t).unwrap(),
                reference.value(t).unwrap(),
                epsilon = 1e-12
            );
        }
        let (t1, t2) = m.solve_roots().unwrap();
        let (r1, r2) = reference.solve_roots().unwrap();
        assert_abs_diff_eq!(t1, r1, epsilon = 1e-12);
        assert_abs_diff_eq!(t2, r2, epsilon = 1e-12);
    }

    #[test]
    fn custom_without_primitives_integrates_numerically() {
        // L(u) = 2/(1-u)^3 is the self-concordant weight; compare against it.
        let model = AverageLipschitzModel::custom(
            CustomModel::new(|u: f64| 2.0 / (1.0 - u).powi(3), 1.0).unwrap(),
        );
        let reference = AverageLipschitzModel::self_concordant();
        for t in [0.05, 0.17, 0.29] {
            assert_abs_diff_eq!(
                model.primitive(t).unwrap(),
                reference.primitive(t).unwrap(),
                epsilon = 1e-10
            );
            assert_abs_diff_eq!(
                model.weighted_primitive(t).unwrap(),
                reference.weighted_primitive(t).unwrap(),
                epsilon = 1e-10
            );
        }
        let c = model.constants().unwrap();
        let r = reference.constants().unwrap();
        assert_abs_diff_eq!(c.r0, r.r0, epsilon = 1e-10);
        assert_abs_diff_eq!(c.b, r.b, epsilon = 1e-10);
        assert_abs_diff_eq!(c.r_max, r.r_max, epsilon = 1e-10);
    }

    #[test]
    fn roots_at_the_kantorovich_boundary() {
        // L*beta = 1/2 exactly: both roots collapse to 1/L.
        let m = MajorantFunction::new(1.0, constant(0.5)).unwrap();
        let (t1, t2) = m.solve_roots().unwrap();
        assert_eq!(t1, 2.0);
        assert_eq!(t2, 2.0);
    }

    #[test]
    fn roots_constant_quarter() {
        let m = MajorantFunction::new(0.25, constant(1.0)).unwrap();
        let (t1, t2) = m.solve_roots().unwrap();
        assert_abs_diff_eq!(t1, 0.2928932188134525, epsilon = 1e-15);
        assert_abs_diff_eq!(t2, 1.7071067811865475, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_roots_agree_with_bisection() {
        // Independent oracle: bisection on h over the monotone brackets.
        for (beta, model) in [
            (0.25, constant(1.0)),
            (0.45, constant(1.0)),
            (0.04, constant(3.0)),
            (0.1, gamma(1.0)),
            (0.02, gamma(4.0)),
            (0.15, gamma(1.0)),
        ] {
            let m = MajorantFunction::new(beta, model).unwrap();
            let (t1, t2) = m.solve_roots().unwrap();
            let c = m.model().constants().unwrap();
            let h = |t: f64| m.value(t).unwrap();
            let t1_bis = bisect_to_rel_tol(&|t| -h(t), m.beta(), c.r0);
            let t2_bis = bisect_to_rel_tol(&h, c.r0, c.r_max);
            assert!((t1 - t1_bis).abs() <= 1e-12 * t1.max(1.0), "beta = {beta}");
            assert!((t2 - t2_bis).abs() <= 1e-12 * t2.max(1.0), "beta = {beta}");
        }
    }

    #[test]
    fn roots_gamma_boundary_collapse() {
        // Use the b the code computes: the decimal expansion of 3 - 2*sqrt(2)
        // differs from fl(3 - 2*fl(sqrt(2))) by a couple of ulps.
        let c = gamma(1.0).constants().unwrap();
        let m = MajorantFunction::new(c.b, gamma(1.0)).unwrap();
        let (t1, t2) = m.solve_roots().unwrap();
        assert_abs_diff_eq!(t1, t2, epsilon = 1e-10);
        assert_abs_diff_eq!(t1, c.r0, epsilon = 1e-10);
        assert_abs_diff_eq!(c.b, B_GAMMA_1, epsilon = 1e-15);
    }

    #[test]
    fn roots_require_criterion() {
        let m = MajorantFunction::new(0.6, constant(1.0)).unwrap();
        assert!(matches!(
            m.solve_roots(),
            Err(MajorantError::CriterionViolated { .. })
        ));
    }

    #[test]
    fn certificate_constant_quarter() {
        let cert = certify(0.25, constant(1.0)).unwrap();
        assert!(cert.criterion_holds());
        assert!(cert.cubic_holds());
        assert_abs_diff_eq!(
            cert.h_star().unwrap(),
            -std::f64::consts::SQRT_2,
            epsilon = 1e-15
        );
        // Both the general form and the constant-weight closed form reduce to
        // the same coefficient here.
        assert_abs_diff_eq!(
            cert.cubic_coefficient().unwrap(),
            1.5224077499274828,
            epsilon = 1e-13
        );
        // Cross-check H* against the defining ratio h''(t*)/h'(t*).
        let t_star = cert.t_star().unwrap();
        let ratio = cert.majorant().second_derivative(t_star).unwrap()
            / cert.majorant().derivative(t_star).unwrap();
        assert_abs_diff_eq!(cert.h_star().unwrap(), ratio, epsilon = 1e-12);
    }

    #[test]
    fn certificate_gamma_tenth() {
        let cert = certify(0.1, gamma(1.0)).unwrap();
        assert!(cert.criterion_holds());
        assert!(cert.cubic_holds());
        assert_abs_diff_eq!(cert.t_star().unwrap(), 0.11492189406417878, epsilon = 1e-15);
        assert_abs_diff_eq!(cert.h_star().unwrap(), -3.9872628992875274, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.q().unwrap(), 1.5944102728537515, epsilon = 1e-12);
        // q is exactly the ratio (2 - t*H*)/(2 + t*H*) of the general bound.
        let t = cert.t_star().unwrap();
        let hs = cert.h_star().unwrap();
        assert_abs_diff_eq!(
            cert.q().unwrap(),
            (2.0 - t * hs) / (2.0 + t * hs),
            epsilon = 1e-12
        );
    }

    #[test]
    fn certificate_criterion_without_cubic() {
        // L*beta = 0.45 lies in (4/9, 1/2]: certified but not cubic.
        let cert = certify(0.45, constant(1.0)).unwrap();
        assert!(cert.criterion_holds());
        assert!(!cert.cubic_holds());
        assert!(cert.h_star().is_some());
        assert_eq!(cert.cubic_coefficient(), None);
    }

    #[test]
    fn certificate_criterion_fails_gracefully() {
        let cert = certify(0.2, gamma(1.0)).unwrap();
        assert!(!cert.criterion_holds());
        assert_eq!(cert.t_star(), None);
        assert_eq!(cert.t_star2(), None);
        assert_eq!(cert.h_star(), None);
        assert!(!cert.cubic_holds());
    }

    #[test]
    fn certificate_boundary_has_no_h_star() {
        let cert = certify(0.5, constant(1.0)).unwrap();
        assert!(cert.criterion_holds());
        assert!(!cert.cubic_holds());
        assert_eq!(cert.h_star(), None);
        assert_abs_diff_eq!(cert.t_star().unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.t_star2().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_must_be_positive() {
        assert!(certify(0.0, constant(1.0)).is_err());
        assert!(certify(-1.0, constant(1.0)).is_err());
        assert!(MajorantFunction::new(f64::NAN, constant(1.0)).is_err());
    }

    #[test]
    fn sequence_hand_recursion() {
        let cert = certify(0.5, constant(1.0)).unwrap();
        let trace = majorizing_sequence(&cert, 5, 1e-15).unwrap();
        let steps = trace.steps();
        assert_eq!(steps[0], (0.0, 0.5));
        assert_eq!(steps[1], (0.625, 0.8125));
        assert_eq!(steps[2].0, 0.859375);
        // The limit here is t* = 1 (beta = b boundary).
        assert!(trace.final_t() < 1.0);
    }

    #[test]
    fn sequence_monotone_to_t_star() {
        for (beta, model) in [
            (0.25, constant(1.0)),
            (0.1, gamma(1.0)),
            (0.49, constant(1.0)),
        ] {
            let cert = certify(beta, model).unwrap();
            let t_star = cert.t_star().unwrap();
            let trace = majorizing_sequence_default(&cert).unwrap();
            assert!(trace.converged(), "beta={beta} did not converge");
            assert_eq!(trace.limit_estimate(), t_star);
            for (k, &(t_k, s_k)) in trace.steps().iter().enumerate() {
                let t_next = trace.t_next(k);
                assert!(t_k < s_k && s_k < t_next && t_next < t_star);
            }
            assert!(t_star - trace.final_t() <= 1e-12 * t_star.max(1.0));
        }
    }

    #[test]
    fn sequence_at_boundary_is_monotone_with_double_root() {
        // β = b: the roots collapse, h'(t*) = 0, and the recursion can only
        // locate the double root to about √ε. It must stay monotone and
        // strictly below t* = r0 throughout.
        let gamma_b = gamma(1.0).constants().unwrap().b;
        for (beta, model) in [(0.5, constant(1.0)), (gamma_b, gamma(1.0))] {
            let cert = certify(beta, model).unwrap();
            let t_star = cert.t_star().unwrap();
            assert_eq!(t_star, cert.r0());
            let trace = majorizing_sequence_default(&cert).unwrap();
            for (k, &(t_k, s_k)) in trace.steps().iter().enumerate() {
                let t_next = trace.t_next(k);
                assert!(t_k < s_k && s_k < t_next && t_next < t_star);
            }
            assert!(t_star - trace.final_t() <= 1e-7 * t_star.max(1.0));
        }
    }

    #[test]
    fn cubic_bound_check_examples() {
        let cert = certify(0.25, constant(1.0)).unwrap();
        let trace = majorizing_sequence_default(&cert).unwrap();
        assert_eq!(scalar_cubic_bound_check(&trace, &cert), BoundCheck::Holds);

        let cert = certify(0.1, gamma(1.0)).unwrap();
        let trace = majorizing_sequence_default(&cert).unwrap();
        assert_eq!(scalar_cubic_bound_check(&trace, &cert), BoundCheck::Holds);

        // Boundary: h'(t*) = 0 makes the bound vacuous.
        let cert = certify(0.5, constant(1.0)).unwrap();
        let trace = majorizing_sequence_default(&cert).unwrap();
        assert_eq!(
            scalar_cubic_bound_check(&trace, &cert),
            BoundCheck::NotApplicable
        );
    }

    #[test]
    fn root_residuals_small() {
        for (beta, model) in [
            (0.25, constant(1.0)),
            (0.4999, constant(1.0)),
            (0.1, gamma(1.0)),
            (0.05, gamma(3.0)),
        ] {
            let cert = certify(beta, model).unwrap();
            let m = cert.majorant();
            for t in [cert.t_star().unwrap(), cert.t_star2().unwrap()] {
                assert!(
                    m.value(t).unwrap().abs() <= 1e-12 * beta.max(1.0),
                    "residual too large at beta={beta}"
                );
            }
        }
    }

    #[test]
    fn cubic_thresholds_match_closed_forms() {
        // Constant weight: cubic_holds iff L*beta < 4/9.
        for lb in [0.1, 0.3, 0.44, 0.4445, 0.46, 0.5] {
            let cert = certify(lb, constant(1.0)).unwrap();
            assert_eq!(cert.cubic_holds(), lb < 4.0 / 9.0, "L*beta = {lb}");
        }
        // Gamma type: cubic_holds iff alpha < 3 - 2^(1/3) - 4^(1/3).
        for alpha in [0.01, 0.1, 0.15, 0.1525, 0.153, 0.16, B_GAMMA_1] {
            let cert = certify(alpha, gamma(1.0)).unwrap();
            assert_eq!(
                cert.cubic_holds(),
                alpha < CUBIC_LIMIT_GAMMA,
                "alpha = {alpha}"
            );
        }
    }

    #[test]
    fn certificate_json_has_fixed_fields() {
        let cert = certify(0.25, constant(1.0)).unwrap();
        let doc = cert.to_json();
        for key in [
            "beta",
            "model",
            "r0",
            "b",
            "R",
            "t_star",
            "t_star2",
            "criterion_holds",
            "cubic_holds",
            "H_star",
            "cubic_coefficient",
            "q",
        ] {
            assert!(doc.get(key).is_some(), "missing field {key}");
        }
        assert_eq!(doc["beta"], 0.25);
        assert_eq!(doc["model"], "constant(L=1)");
        assert_eq!(doc["q"], Value::Null);
    }
}
