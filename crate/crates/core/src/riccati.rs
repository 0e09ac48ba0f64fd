//! Minimal positive solution of the transport-theory nonsymmetric algebraic
//! Riccati equation
//!
//! ```text
//! XCX − XD − AX + B = 0
//! ```
//!
//! with rank-one-plus-diagonal coefficients built from composite
//! Gauss–Legendre nodes. The solution has the form `X = T ∘ (u vᵀ)` where
//! `(u, v)` solves the 2n-dimensional fixed-point system
//!
//! ```text
//! u = u ∘ (P v) + e,    v = v ∘ (P̃ u) + e.
//! ```
//!
//! [`solve_minimal`] runs a block-eliminated two-step Newton iteration on
//! that system from `(u, v) = (0, 0)`: the block `I − G1` of the Jacobian is
//! diagonal, so each outer iteration reduces to one n×n Schur-complement
//! factorization reused by both half-steps. The rank-one structure of the
//! coefficients is never materialized in the solve path.

use std::time::Instant;

use serde_json::{json, Value};
use thiserror::Error;

use crate::linalg::{DenseMatrix, DenseVector, LinalgError, LuFactorization};
use crate::majorant::{certify, AverageLipschitzModel, ConvergenceCertificate};
use crate::quadrature::{composite_gl4, QuadratureError};

#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("invalid transport parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("Schur complement singular at iteration {iteration}")]
    SingularSchur { iteration: usize },
    #[error("no convergence within {max_iterations} iterations (last Res {last_res:e})")]
    MaxIterations {
        max_iterations: usize,
        last_res: f64,
        res_history: Vec<f64>,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Problem parameters: scattering coefficient `c`, asymmetry `alpha`, and
/// the quadrature size `n` (a positive multiple of 4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParameters {
    alpha: f64,
    c: f64,
    n: usize,
}

impl TransportParameters {
    pub fn new(alpha: f64, c: f64, n: usize) -> Result<Self, RiccatiError> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(RiccatiError::InvalidParameters(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        if c.is_nan() || c <= 0.0 || c > 1.0 {
            return Err(RiccatiError::InvalidParameters(format!(
                "c must lie in (0, 1], got {c}"
            )));
        }
        if n == 0 || !n.is_multiple_of(4) {
            return Err(RiccatiError::InvalidParameters(format!(
                "n must be a positive multiple of 4, got {n}"
            )));
        }
        Ok(Self { alpha, c, n })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The Lipschitz bound `L·β = c(1 + α)` of the induced fixed-point map.
    pub fn l_beta(&self) -> f64 {
        self.c * (1.0 + self.alpha)
    }
}

/// The assembled problem instance: node-derived vectors and the positive
/// matrices `P`, `P̃`, `T`.
///
/// The Riccati coefficients `A`, `B`, `C`, `D` are rank-one-plus-diagonal
/// combinations of these fields; they are materialized on demand (for
/// verification) and never used by the solver.
#[derive(Debug, Clone)]
pub struct RiccatiData {
    params: TransportParameters,
    delta: DenseVector,
    gamma: DenseVector,
    q: DenseVector,
    p: DenseMatrix,
    p_tilde: DenseMatrix,
    t: DenseMatrix,
}

/// Builds the instance for `params`, with nodes and weights from the
/// composite 4-point Gauss–Legendre rule.
pub fn build_data(params: &TransportParameters) -> Result<RiccatiData, RiccatiError> {
    let rule = composite_gl4(params.n)?;
    let n = params.n;
    let omega = rule.nodes();
    let weights = rule.weights();
    let cw_plus = params.c * (1.0 + params.alpha);
    let cw_minus = params.c * (1.0 - params.alpha);
    let delta = DenseVector::from_fn(n, |i| 1.0 / (omega[i] * cw_plus));
    let gamma = DenseVector::from_fn(n, |i| 1.0 / (omega[i] * cw_minus));
    let q = DenseVector::from_fn(n, |i| weights[i] / (2.0 * omega[i]));
    let p = DenseMatrix::from_fn(n, n, |i, j| q[j] / (delta[i] + gamma[j]));
    let p_tilde = DenseMatrix::from_fn(n, n, |i, j| q[j] / (gamma[i] + delta[j]));
    let t = DenseMatrix::from_fn(n, n, |i, j| 1.0 / (delta[i] + gamma[j]));
    Ok(RiccatiData {
        params: *params,
        delta,
        gamma,
        q,
        p,
        p_tilde,
        t,
    })
}

impl RiccatiData {
    pub fn params(&self) -> &TransportParameters {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn delta(&self) -> &DenseVector {
        &self.delta
    }

    pub fn gamma(&self) -> &DenseVector {
        &self.gamma
    }

    pub fn q(&self) -> &DenseVector {
        &self.q
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn p_tilde(&self) -> &DenseMatrix {
        &self.p_tilde
    }

    pub fn t(&self) -> &DenseMatrix {
        &self.t
    }

    /// `A = Δ − e qᵀ`.
    pub fn matrix_a(&self) -> DenseMatrix {
        let n = self.n();
        DenseMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { self.delta[i] } else { 0.0 };
            d - self.q[j]
        })
    }

    /// `B = e eᵀ`.
    pub fn matrix_b(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n(), self.n(), |_, _| 1.0)
    }

    /// `C = q qᵀ`.
    pub fn matrix_c(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n(), self.n(), |i, j| self.q[i] * self.q[j])
    }

    /// `D = Γ − q eᵀ`.
    pub fn matrix_d(&self) -> DenseMatrix {
        let n = self.n();
        DenseMatrix::from_fn(n, n, |i, j| {
            let g = if i == j { self.gamma[i] } else { 0.0 };
            g - self.q[i]
        })
    }
}

/// Splits a stacked `(u; v)` vector into its halves.
pub fn split_uv(x: &DenseVector, n: usize) -> Result<(DenseVector, DenseVector), LinalgError> {
    if x.len() != 2 * n {
        return Err(LinalgError::DimensionMismatch {
            expected: 2 * n,
            found: x.len(),
        });
    }
    let s = x.as_slice();
    Ok((
        DenseVector::new(s[..n].to_vec())?,
        DenseVector::new(s[n..].to_vec())?,
    ))
}

/// Stacks `(u; v)`.
pub fn join_uv(u: &DenseVector, v: &DenseVector) -> DenseVector {
    let mut entries = Vec::with_capacity(u.len() + v.len());
    entries.extend_from_slice(u.as_slice());
    entries.extend_from_slice(v.as_slice());
    DenseVector::new(entries).expect("finite halves")
}

/// The fixed-point residual, stacked as a 2n-vector:
/// top `u − u ∘ (P v) − e`, bottom `v − v ∘ (P̃ u) − e`.
pub fn f_eval(
    d: &RiccatiData,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<DenseVector, LinalgError> {
    let n = d.n();
    let e = DenseVector::ones(n);
    let top = u.sub(&u.hadamard(&d.p.matvec(v)?)?)?.sub(&e)?;
    let bottom = v.sub(&v.hadamard(&d.p_tilde.matvec(u)?)?)?.sub(&e)?;
    Ok(join_uv(&top, &bottom))
}

/// The blocks of `G(u, v)` in the Jacobian `f'(u, v) = I − G(u, v)`.
///
/// `G1` and `G2` are diagonal and stored as vectors; `H1` has columns
/// `u ∘ p_j` and `H2` has columns `v ∘ p̃_j`.
#[derive(Debug, Clone)]
pub struct JacobianBlocks {
    pub g1: DenseVector,
    pub g2: DenseVector,
    pub h1: DenseMatrix,
    pub h2: DenseMatrix,
}

impl JacobianBlocks {
    /// Applies `f'(u, v) = I − G` to a stacked direction `(du; dv)`.
    pub fn apply(&self, du: &DenseVector, dv: &DenseVector) -> Result<DenseVector, LinalgError> {
        let top = du.sub(&self.g1.hadamard(du)?)?.sub(&self.h1.matvec(dv)?)?;
        let bottom = dv.sub(&self.h2.matvec(du)?)?.sub(&self.g2.hadamard(dv)?)?;
        Ok(join_uv(&top, &bottom))
    }
}

/// Evaluates the Jacobian blocks at `(u, v)`.
pub fn jacobian_blocks(
    d: &RiccatiData,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<JacobianBlocks, LinalgError> {
    let g1 = d.p.matvec(v)?;
    let g2 = d.p_tilde.matvec(u)?;
    let h1 = d.p.scale_rows(u)?;
    let h2 = d.p_tilde.scale_rows(v)?;
    Ok(JacobianBlocks { g1, g2, h1, h2 })
}

/// Materializes the full `2n × 2n` Jacobian `I − G(u, v)` (for the generic
/// solver route; the block-eliminated solver never forms it).
pub fn full_jacobian(
    d: &RiccatiData,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<DenseMatrix, LinalgError> {
    let n = d.n();
    let blocks = jacobian_blocks(d, u, v)?;
    // Top-left I − diag(g1), top-right −H1; bottom-left −H2,
    // bottom-right I − diag(g2).
    let mut entries = vec![0.0; 4 * n * n];
    for i in 0..n {
        let row = &mut entries[i * 2 * n..(i + 1) * 2 * n];
        row[i] = 1.0 - blocks.g1[i];
        for (dst, &src) in row[n..].iter_mut().zip(blocks.h1.row(i)) {
            *dst = -src;
        }
    }
    for i in 0..n {
        let row = &mut entries[(n + i) * 2 * n..(n + i + 1) * 2 * n];
        for (dst, &src) in row[..n].iter_mut().zip(blocks.h2.row(i)) {
            *dst = -src;
        }
        row[n + i] = 1.0 - blocks.g2[i];
    }
    DenseMatrix::new(2 * n, 2 * n, entries)
}

/// The relative stopping metric:
/// `max(‖u⁺ − u‖/‖u⁺‖, ‖v⁺ − v‖/‖v⁺‖)`, falling back to the absolute step
/// norm when a denominator vanishes.
pub fn res_metric(
    u_k: &DenseVector,
    u_next: &DenseVector,
    v_k: &DenseVector,
    v_next: &DenseVector,
) -> f64 {
    fn term(prev: &DenseVector, next: &DenseVector) -> f64 {
        let step = next.sub(prev).expect("dimensions agree").inf_norm();
        let denom = next.inf_norm();
        if denom == 0.0 {
            step
        } else {
            step / denom
        }
    }
    term(u_k, u_next).max(term(v_k, v_next))
}

/// `X = T ∘ (u vᵀ)`, i.e. `X_ij = u_i v_j / (δ_i + γ_j)`.
pub fn assemble_x(
    d: &RiccatiData,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<DenseMatrix, LinalgError> {
    let n = d.n();
    if u.len() != n || v.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: u.len().max(v.len()),
        });
    }
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        let t_row = d.t.row(i);
        let ui = u[i];
        for j in 0..n {
            entries.push(ui * v[j] * t_row[j]);
        }
    }
    DenseMatrix::new(n, n, entries)
}

/// `‖XCX − XD − AX + B‖∞`, exploiting `C = q qᵀ` and `B = e eᵀ` as rank-one
/// products so no coefficient matrix is formed.
pub fn ricc_residual(d: &RiccatiData, x: &DenseMatrix) -> Result<f64, LinalgError> {
    let n = d.n();
    if x.rows() != n || x.cols() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: x.rows().max(x.cols()),
        });
    }
    // w = X q and z = Xᵀ q capture the whole rank-one interaction.
    let w = x.matvec(&d.q)?;
    let mut z = vec![0.0; n];
    for i in 0..n {
        let qi = d.q[i];
        for (zj, &xij) in z.iter_mut().zip(x.row(i)) {
            *zj += qi * xij;
        }
    }
    // Residual entry: w_i z_j − X_ij γ_j + w_i − δ_i X_ij + z_j + 1.
    let mut norm = 0.0_f64;
    for i in 0..n {
        let wi = w[i];
        let di = d.delta[i];
        let mut row_sum = 0.0;
        for ((&xij, &zj), &gj) in x.row(i).iter().zip(&z).zip(d.gamma.iter()) {
            let r = wi * zj - xij * gj + wi - di * xij + zj + 1.0;
            row_sum += r.abs();
        }
        norm = norm.max(row_sum);
    }
    Ok(norm)
}

/// The semilocal certificate of the instance: constant weight
/// `L = c(1 + α)` and `β = 1` (the scaled residual at the zero start).
pub fn instance_certificate(params: &TransportParameters) -> ConvergenceCertificate {
    let model = AverageLipschitzModel::constant(params.l_beta())
        .expect("c(1 + alpha) is positive by construction");
    certify(1.0, model).expect("beta = 1 is valid")
}

/// One iteration's shared state: the formed Jacobian blocks `G(u_k, v_k)`,
/// the diagonal `(I − G1)⁻¹` as a vector, and the LU factors of the Schur
/// complement `S = I − G2 − H2 (I − G1)⁻¹ H1`.
struct Elimination {
    blocks: JacobianBlocks,
    d1: DenseVector,
    lu: LuFactorization,
}

fn eliminate(
    d: &RiccatiData,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<Elimination, LinalgError> {
    let n = d.n();
    let blocks = jacobian_blocks(d, u, v)?;
    let mut d1 = Vec::with_capacity(n);
    for i in 0..n {
        let w = 1.0 - blocks.g1[i];
        if w.abs() <= crate::linalg::SINGULARITY_THRESHOLD {
            return Err(LinalgError::SingularMatrix {
                step: i,
                pivot: w.abs(),
                threshold: crate::linalg::SINGULARITY_THRESHOLD,
            });
        }
        d1.push(1.0 / w);
    }
    let d1 = DenseVector::new(d1)?;
    // H2 (I − G1)⁻¹ H1 with the inverse applied as a column scale of H2.
    let h2_scaled = blocks.h2.scale_cols(&d1)?;
    let mut s = h2_scaled.matmul(&blocks.h1)?.into_raw_entries();
    for (i, row) in s.chunks_exact_mut(n).enumerate() {
        for val in row.iter_mut() {
            *val = -*val;
        }
        row[i] += 1.0 - blocks.g2[i];
    }
    let lu = DenseMatrix::new(n, n, s)?.lu_factor()?;
    Ok(Elimination { blocks, d1, lu })
}

/// Block-eliminated Newton half-step (Algorithm steps 2 and 3): solves for
/// `ṽ` with the Schur complement, then recovers `ũ` through the diagonal
/// block. Also returns `P(ṽ − v)`, reused by the correction half-step.
fn newton_half(
    d: &RiccatiData,
    elim: &Elimination,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<(DenseVector, DenseVector, DenseVector), LinalgError> {
    let e = DenseVector::ones(d.n());
    // [S] ṽ = H2 (I − G1)⁻¹ [e − H1 v] + e − H2 u.
    let inner = elim.d1.hadamard(&e.sub(&elim.blocks.h1.matvec(v)?)?)?;
    let rhs = elim
        .blocks
        .h2
        .matvec(&inner)?
        .add(&e)?
        .sub(&elim.blocks.h2.matvec(u)?)?;
    let v_half = elim.lu.solve(&rhs)?;
    // ũ = (I − G1)⁻¹ [H1 (ṽ − v) + e].
    let dv = v_half.sub(v)?;
    let p_dv = d.p.matvec(&dv)?;
    let u_half = elim.d1.hadamard(&elim.blocks.h1.matvec(&dv)?.add(&e)?)?;
    Ok((u_half, v_half, p_dv))
}

/// One outer two-step Newton iteration in eliminated form.
#[derive(Debug, Clone)]
pub struct TwoStepUpdate {
    /// The Newton half-step `ũ_k` (top block of `y_k`).
    pub u_half: DenseVector,
    /// The Newton half-step `ṽ_k`.
    pub v_half: DenseVector,
    pub u_next: DenseVector,
    pub v_next: DenseVector,
}

/// Advances `(u, v)` by one full two-step Newton iteration.
///
/// The Schur complement is factored once and reused by both half-steps.
pub fn two_step_update(
    d: &RiccatiData,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<TwoStepUpdate, LinalgError> {
    let elim = eliminate(d, u, v)?;
    let (u_half, v_half, p_dv) = newton_half(d, &elim, u, v)?;
    let e = DenseVector::ones(d.n());

    // [S] v⁺ = H2 (I − G1)⁻¹ [ũ ∘ P(ṽ − v) − H1 ṽ + e] + ṽ ∘ P̃(ũ − u) − H2 ũ + e.
    let t1 = u_half.hadamard(&p_dv)?;
    let h1_vhalf = elim.blocks.h1.matvec(&v_half)?;
    let inner = elim.d1.hadamard(&t1.sub(&h1_vhalf)?.add(&e)?)?;
    let rhs = elim
        .blocks
        .h2
        .matvec(&inner)?
        .add(&v_half.hadamard(&d.p_tilde.matvec(&u_half.sub(u)?)?)?)?
        .sub(&elim.blocks.h2.matvec(&u_half)?)?
        .add(&e)?;
    let v_next = elim.lu.solve(&rhs)?;

    // u⁺ = (I − G1)⁻¹ [ũ ∘ P(ṽ − v) + e + H1 (v⁺ − ṽ)].
    let h1_corr = elim.blocks.h1.matvec(&v_next.sub(&v_half)?)?;
    let u_next = elim.d1.hadamard(&t1.add(&e)?.add(&h1_corr)?)?;

    Ok(TwoStepUpdate {
        u_half,
        v_half,
        u_next,
        v_next,
    })
}

/// One plain Newton iteration (steps 1–3 only), the degenerate baseline.
pub fn newton_update(
    d: &RiccatiData,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<(DenseVector, DenseVector), LinalgError> {
    let elim = eliminate(d, u, v)?;
    let (u_half, v_half, _) = newton_half(d, &elim, u, v)?;
    Ok((u_half, v_half))
}

#[derive(Debug, Clone)]
pub struct RiccatiSolveOptions {
    pub max_iterations: usize,
    /// Use the one-step (plain Newton) update instead of the two-step one.
    pub plain_newton: bool,
}

impl Default for RiccatiSolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            plain_newton: false,
        }
    }
}

/// A converged minimal positive solution with its run statistics.
#[derive(Debug, Clone)]
pub struct MinimalSolution {
    pub params: TransportParameters,
    pub u: DenseVector,
    pub v: DenseVector,
    pub x: DenseMatrix,
    pub iterations: usize,
    pub res_history: Vec<f64>,
    /// `‖XCX − XD − AX + B‖∞` of the reconstructed solution.
    pub riccati_residual: f64,
    /// Existence-ball radius from the instance certificate, when certified.
    pub t_star: Option<f64>,
    /// Wall time of the Newton loop only (problem build excluded).
    pub wall_time_s: f64,
}

impl MinimalSolution {
    pub fn to_json(&self) -> Value {
        json!({
            "alpha": self.params.alpha(),
            "c": self.params.c(),
            "n": self.params.n(),
            "L_beta": self.params.l_beta(),
            "iterations": self.iterations,
            "res_history": self.res_history,
            "riccati_residual": self.riccati_residual,
            "t_star": self.t_star,
            "wall_time_s": self.wall_time_s,
        })
    }
}

/// Stopping threshold `(√n / 2) · eps` with `eps = 2⁻⁵²`.
pub fn stopping_threshold(n: usize) -> f64 {
    (n as f64).sqrt() / 2.0 * f64::EPSILON
}

/// Builds the instance and runs the block-eliminated two-step Newton method
/// from `(u, v) = (0, 0)` until `Res ≤ (√n/2)·2⁻⁵²`.
pub fn solve_minimal(
    params: &TransportParameters,
    opts: &RiccatiSolveOptions,
) -> Result<MinimalSolution, RiccatiError> {
    let data = build_data(params)?;
    solve_with_data(&data, opts)
}

/// [`solve_minimal`] on an already-built instance.
pub fn solve_with_data(
    data: &RiccatiData,
    opts: &RiccatiSolveOptions,
) -> Result<MinimalSolution, RiccatiError> {
    let n = data.n();
    let threshold = stopping_threshold(n);
    let mut u = DenseVector::zeros(n);
    let mut v = DenseVector::zeros(n);
    let mut res_history = Vec::new();
    let mut iterations = None;

    let start = Instant::now();
    for k in 0..opts.max_iterations {
        let (u_next, v_next) = if opts.plain_newton {
            newton_update(data, &u, &v).map_err(|_| RiccatiError::SingularSchur { iteration: k })?
        } else {
            let update = two_step_update(data, &u, &v)
                .map_err(|_| RiccatiError::SingularSchur { iteration: k })?;
            (update.u_next, update.v_next)
        };
        let res = res_metric(&u, &u_next, &v, &v_next);
        res_history.push(res);
        u = u_next;
        v = v_next;
        if res <= threshold {
            iterations = Some(k + 1);
            break;
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    let Some(iterations) = iterations else {
        let last_res = res_history.last().copied().unwrap_or(f64::INFINITY);
        return Err(RiccatiError::MaxIterations {
            max_iterations: opts.max_iterations,
            last_res,
            res_history,
        });
    };

    let x = assemble_x(data, &u, &v)?;
    let riccati_residual = ricc_residual(data, &x)?;
    let t_star = instance_certificate(data.params()).t_star();
    Ok(MinimalSolution {
        params: *data.params(),
        u,
        v,
        x,
        iterations,
        res_history,
        riccati_residual,
        t_star,
        wall_time_s,
    })
}
