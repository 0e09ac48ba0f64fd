//! Composite 4-node Gauss–Legendre quadrature on [0, 1].
//!
//! The interval is split into `n/4` equal subintervals, each carrying the
//! 4-point rule mapped from [-1, 1]. Nodes and weights are returned in the
//! descending order `ω_1 > ω_2 > … > ω_n` so that downstream indexing matches
//! the transport-theory convention.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("invalid rule size {0}: must be a positive multiple of 4")]
    InvalidSize(usize),
}

/// Nodes and weights of a composite rule on [0, 1].
///
/// Invariants: nodes strictly decreasing inside (0, 1), weights positive,
/// weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to `f` on [0, 1].
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Degree-4 Legendre polynomial.
fn legendre4(x: f64) -> f64 {
    (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0
}

fn legendre4_deriv(x: f64) -> f64 {
    (140.0 * x.powi(3) - 60.0 * x) / 8.0
}

/// Bisection for a sign change of `f` on [lo, hi], to bracket width 1e-15.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    debug_assert!(flo * f(hi) < 0.0, "bisection bracket must change sign");
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if (flo < 0.0) == (fmid < 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The 4-point Gauss–Legendre reference rule on [-1, 1], nodes descending.
///
/// The two positive roots of the degree-4 Legendre polynomial are found by
/// bisection (brackets from its sign pattern on [0, 1]); the negative roots
/// follow by symmetry. Weights use w = 2 / ((1 - x²) P₄'(x)²).
fn reference_gl4() -> ([f64; 4], [f64; 4]) {
    let r_inner = bisect(legendre4, 0.0, 0.55);
    let r_outer = bisect(legendre4, 0.55, 1.0);
    let nodes = [r_outer, r_inner, -r_inner, -r_outer];
    let mut weights = [0.0; 4];
    for (w, &x) in weights.iter_mut().zip(&nodes) {
        let d = legendre4_deriv(x);
        *w = 2.0 / ((1.0 - x * x) * d * d);
    }
    (nodes, weights)
}

/// Builds the composite 4-node Gauss–Legendre rule with `n` total nodes.
///
/// `n` must be a positive multiple of 4; [0, 1] is divided into `n/4` equal
/// subintervals. Output is sorted descending.
pub fn composite_gl4(n: usize) -> Result<QuadratureRule, QuadratureError> {
    if n == 0 || !n.is_multiple_of(4) {
        return Err(QuadratureError::InvalidSize(n));
    }
    let (ref_nodes, ref_weights) = reference_gl4();
    let m = n / 4;
    let h = 1.0 / m as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    // Subintervals from the right so the overall ordering is descending;
    // reference nodes are already descending within each subinterval.
    for sub in (0..m).rev() {
        let a = sub as f64 * h;
        for (&xi, &w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(a + h * 0.5 * (1.0 + xi));
            weights.push(0.5 * h * w);
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Reference values from the closed-form roots of the degree-4 Legendre
    // polynomial, mapped to [0, 1].
    const NODES_N4: [f64; 4] = [
        0.9305681557970263,
        0.6699905217924281,
        0.33000947820757187,
        0.06943184420297371,
    ];
    const WEIGHTS_N4: [f64; 4] = [
        0.17392742256872692,
        0.32607257743127305,
        0.32607257743127305,
        0.17392742256872692,
    ];

    #[test]
    fn four_point_rule_matches_reference() {
        let rule = composite_gl4(4).unwrap();
        for (got, want) in rule.nodes().iter().zip(&NODES_N4) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-14);
        }
        for (got, want) in rule.weights().iter().zip(&WEIGHTS_N4) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for n in [4, 8, 64, 256] {
            let rule = composite_gl4(n).unwrap();
            let sum: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert_eq!(composite_gl4(5), Err(QuadratureError::InvalidSize(5)));
        assert_eq!(composite_gl4(0), Err(QuadratureError::InvalidSize(0)));
        assert_eq!(composite_gl4(6), Err(QuadratureError::InvalidSize(6)));
    }

    #[test]
    fn monomials_up_to_degree_seven_are_exact() {
        for n in [4, 8, 64] {
            let rule = composite_gl4(n).unwrap();
            for d in 0..=7u32 {
                let approx = rule.integrate(|x| x.powi(d as i32));
                let exact = 1.0 / f64::from(d + 1);
                assert_abs_diff_eq!(approx, exact, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn nodes_descending_distinct_and_inside_subintervals() {
        for n in [4, 8, 32] {
            let rule = composite_gl4(n).unwrap();
            let m = n / 4;
            let h = 1.0 / m as f64;
            for w in rule.nodes().windows(2) {
                assert!(w[0] > w[1]);
            }
            for (idx, &x) in rule.nodes().iter().enumerate() {
                // Node idx lives in subinterval m-1-idx/4, counted from the left.
                let sub = m - 1 - idx / 4;
                let a = sub as f64 * h;
                assert!(x > a && x < a + h);
            }
        }
    }
}
