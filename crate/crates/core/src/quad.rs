//! One-dimensional quadrature for integrands with algebraic endpoint
//! singularities and algebraic tails.
//!
//! Finite intervals use composite Gauss-Legendre of fixed order on meshes
//! graded toward the declared singular endpoints; the grading exponent is
//! chosen from the singularity exponent so that the composite rule recovers
//! its full order. Infinite tails are folded to a finite interval by the
//! substitution x -> 1/x. Accuracy is estimated by comparing m against 2m
//! cells, doubling until the requested tolerance is met.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Order of the Gauss-Legendre rule used on every cell.
pub const GL_ORDER: usize = 15;
const MAX_DOUBLINGS: usize = 30;

/// An integrand with declared algebraic behavior at the interval ends:
/// `f ~ (x-a)^{left_exponent}` near the left endpoint, and near the right
/// endpoint either `(b-x)^{right_exponent}` (finite interval) or
/// `x^{right_exponent}` (tail decay for an infinite upper limit).
pub struct SingularIntegrand<'a> {
    f: &'a dyn Fn(f64) -> f64,
    pub left_exponent: f64,
    pub right_exponent: f64,
}

impl<'a> SingularIntegrand<'a> {
    pub fn new(f: &'a dyn Fn(f64) -> f64, left_exponent: f64, right_exponent: f64) -> Self {
        SingularIntegrand { f, left_exponent, right_exponent }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed once by Newton
/// iteration on the Legendre polynomial.
pub fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn grading(exponent: f64) -> f64 {
    ((GL_ORDER as f64 + 1.0) / (1.0 + exponent)).max(1.0)
}

/// Composite rule on a half-interval graded toward `sing`; returns the
/// integral from `sing` to `other` (signed) and the integral of |f|.
fn graded_half(f: &dyn Fn(f64) -> f64, sing: f64, other: f64, g: f64, m: usize) -> (f64, f64) {
    let (xs, ws) = gauss_legendre();
    let span = other - sing;
    let mut total = 0.0;
    let mut total_abs = 0.0;
    let mut t_lo = 0.0;
    for j in 1..=m {
        let t_hi = (j as f64 / m as f64).powf(g);
        let c = 0.5 * (t_hi + t_lo);
        let h = 0.5 * (t_hi - t_lo);
        for (x, w) in xs.iter().zip(ws) {
            let t = c + h * x;
            let v = f(sing + span * t) * w * h * span;
            total += v;
            total_abs += v.abs();
        }
        t_lo = t_hi;
    }
    (total, total_abs)
}

fn accept(q_new: f64, q_old: f64, q_abs: f64, tol: f64) -> bool {
    let scale = q_new.abs().max(1e-6 * q_abs).max(1e-300);
    (q_new - q_old).abs() <= tol * scale
}

/// Integral of `f` over the finite interval (a, b), graded toward both
/// endpoints according to the declared exponents.
pub fn integrate_graded(f: &SingularIntegrand, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParams(format!("bad interval ({a}, {b})")));
    }
    if tol < 1e-14 {
        return Err(Error::InvalidParams(format!("tol {tol} below 1e-14")));
    }
    if f.left_exponent <= -1.0 || f.right_exponent <= -1.0 {
        return Err(Error::DivergentIntegrand(format!(
            "endpoint exponents ({}, {}) must exceed -1",
            f.left_exponent, f.right_exponent
        )));
    }
    // a singular endpoint away from zero cannot be approached below the
    // floating-point resolution of the endpoint itself (x - sing rounds to
    // zero there), so replace the innermost sliver by its leading-power mass
    let sliver = |sing: f64, toward: f64, e: f64| -> (f64, f64) {
        if e >= 0.0 || sing == 0.0 {
            return (sing, 0.0);
        }
        let delta = sing.abs() * 1e-10;
        if delta >= 0.25 * (toward - sing).abs() {
            return (sing, 0.0);
        }
        let x = if toward > sing { sing + delta } else { sing - delta };
        (x, f.eval(x) * delta / (1.0 + e))
    };
    let (a_eff, mass_left) = sliver(a, b, f.left_exponent);
    let (b_eff, mass_right) = sliver(b, a, f.right_exponent);

    let gl = grading(f.left_exponent);
    let gr = grading(f.right_exponent);
    let mid = 0.5 * (a_eff + b_eff);
    let eval = |m: usize| {
        let (ql, al) = graded_half(&|x| f.eval(x), a_eff, mid, gl, m);
        let (qr, ar) = graded_half(&|x| f.eval(x), b_eff, mid, gr, m);
        (ql - qr + mass_left + mass_right, al + ar)
    };
    let mut m = 8;
    let (mut q_old, _) = eval(m);
    for _ in 0..MAX_DOUBLINGS {
        m *= 2;
        let (q_new, q_abs) = eval(m);
        if accept(q_new, q_old, q_abs, tol) {
            return Ok(q_new);
        }
        q_old = q_new;
    }
    Err(Error::NonConvergence(format!(
        "graded quadrature on ({a}, {b}) stalled above tol {tol}"
    )))
}

/// Integral of `f` over (a, infinity); requires tail decay faster than 1/x.
pub fn integrate_tail(f: &SingularIntegrand, a: f64, tol: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParams(format!("tail start {a} must be positive")));
    }
    if f.right_exponent >= -1.0 {
        return Err(Error::DivergentIntegrand(format!(
            "tail exponent {} must be below -1",
            f.right_exponent
        )));
    }
    let g = |u: f64| f.eval(1.0 / u) / (u * u);
    let folded = SingularIntegrand::new(&g, -f.right_exponent - 2.0, 0.0);
    integrate_graded(&folded, 0.0, 1.0 / a, tol)
}

/// Integral of a smooth integrand peaked at the left endpoint on a scale
/// comparable to `a`, on log-spaced cells over (a, b); used for kernel
/// profiles near their singularity.
pub(crate) fn integrate_log_cells(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(0.0 < a && a < b) {
        return Err(Error::InvalidParams(format!("bad log interval ({a}, {b})")));
    }
    let decades = (b / a).log10().max(0.1);
    let eval = |per_decade: usize| {
        let cells = ((decades * per_decade as f64).ceil() as usize).max(1);
        let ratio = (b / a).powf(1.0 / cells as f64);
        let (xs, ws) = gauss_legendre();
        let mut lo = a;
        let mut total = 0.0;
        let mut total_abs = 0.0;
        for _ in 0..cells {
            let hi = lo * ratio;
            let c = 0.5 * (hi + lo);
            let h = 0.5 * (hi - lo);
            for (x, w) in xs.iter().zip(ws) {
                let v = f(c + h * x) * w * h;
                total += v;
                total_abs += v.abs();
            }
            lo = hi;
        }
        (total, total_abs)
    };
    let mut per_decade = 2;
    let (mut q_old, _) = eval(per_decade);
    for _ in 0..MAX_DOUBLINGS {
        per_decade *= 2;
        let (q_new, q_abs) = eval(per_decade);
        if accept(q_new, q_old, q_abs, tol) {
            return Ok(q_new);
        }
        q_old = q_new;
    }
    Err(Error::NonConvergence(format!(
        "log-cell quadrature on ({a}, {b}) stalled above tol {tol}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_sqrt() {
        let f = |x: f64| x.powf(-0.5);
        let si = SingularIntegrand::new(&f, -0.5, 0.0);
        let q = integrate_graded(&si, 0.0, 1.0, 1e-10).unwrap();
        assert!((q - 2.0).abs() < 1e-9, "got {q}");
    }

    #[test]
    fn constant_one() {
        let f = |_: f64| 1.0;
        let si = SingularIntegrand::new(&f, 0.0, 0.0);
        let q = integrate_graded(&si, 0.0, 1.0, 1e-12).unwrap();
        assert!((q - 1.0).abs() < 1e-13);
    }

    #[test]
    fn beta_function_value() {
        // x^{-0.3} (1-x)^{-0.6} integrates to Beta(0.7, 0.4);
        // reference value from an independent high-precision evaluation.
        let f = |x: f64| x.powf(-0.3) * (1.0 - x).powf(-0.6);
        let si = SingularIntegrand::new(&f, -0.3, -0.6);
        let q = integrate_graded(&si, 0.0, 1.0, 1e-12).unwrap();
        let reference = 3.026532290335617855;
        assert!((q - reference).abs() / reference < 1e-10, "got {q}");
    }

    #[test]
    fn tail_power_rules() {
        let f2 = |x: f64| x.powi(-2);
        let q = integrate_tail(&SingularIntegrand::new(&f2, 0.0, -2.0), 1.0, 1e-12).unwrap();
        assert!((q - 1.0).abs() < 1e-12);

        let f3 = |x: f64| x.powi(-3);
        let q = integrate_tail(&SingularIntegrand::new(&f3, 0.0, -3.0), 2.0, 1e-12).unwrap();
        assert!((q - 0.125).abs() < 1e-12);

        // decay N + ps with N = 3, p = 1.5, s = 0.5
        let e = 3.75;
        let fe = move |x: f64| x.powf(-e);
        let q = integrate_tail(&SingularIntegrand::new(&fe, 0.0, -e), 1.0, 1e-12).unwrap();
        assert!((q - 1.0 / 2.75).abs() < 1e-12);
    }

    #[test]
    fn linearity() {
        let f = |x: f64| x.powf(-0.4);
        let g = |x: f64| (1.0 - x).powf(-0.2);
        let combo = |x: f64| 2.5 * f(x) - 1.25 * g(x);
        let tol = 1e-10;
        let qf = integrate_graded(&SingularIntegrand::new(&f, -0.4, 0.0), 0.0, 1.0, tol).unwrap();
        let qg = integrate_graded(&SingularIntegrand::new(&g, 0.0, -0.2), 0.0, 1.0, tol).unwrap();
        let qc =
            integrate_graded(&SingularIntegrand::new(&combo, -0.4, -0.2), 0.0, 1.0, tol).unwrap();
        assert!((qc - (2.5 * qf - 1.25 * qg)).abs() <= 2.0 * tol * qc.abs().max(1.0));
    }

    #[test]
    fn polynomial_exactness() {
        // Degree 2*GL_ORDER - 1 is integrated exactly by a single pass.
        let f = |x: f64| x.powi(29);
        let si = SingularIntegrand::new(&f, 0.0, 0.0);
        let q = integrate_graded(&si, 0.0, 1.0, 1e-12).unwrap();
        assert!((q - 1.0 / 30.0).abs() < 1e-14);
    }

    #[test]
    fn tolerance_refinement_improves() {
        let f = |x: f64| x.powf(-0.7) * (1.0 + x).sin();
        let si = SingularIntegrand::new(&f, -0.7, 0.0);
        let fine = integrate_graded(&si, 0.0, 1.0, 1e-13).unwrap();
        let mut prev_err = f64::INFINITY;
        for tol in [1e-4, 1e-6, 1e-8, 1e-10] {
            let q = integrate_graded(&si, 0.0, 1.0, tol).unwrap();
            let err = (q - fine).abs();
            assert!(err <= prev_err + 1e-15, "tol {tol}: {err} > {prev_err}");
            prev_err = err;
        }
    }

    #[test]
    fn rejects_divergent_declarations() {
        let f = |x: f64| 1.0 / x;
        assert!(matches!(
            integrate_graded(&SingularIntegrand::new(&f, -1.0, 0.0), 0.0, 1.0, 1e-10),
            Err(Error::DivergentIntegrand(_))
        ));
        assert!(matches!(
            integrate_tail(&SingularIntegrand::new(&f, 0.0, -1.0), 1.0, 1e-10),
            Err(Error::DivergentIntegrand(_))
        ));
    }

    #[test]
    fn log_cells_matches_power_law() {
        let f = |x: f64| x.powf(-1.5);
        let q = integrate_log_cells(&f, 1e-6, 1.0, 1e-11).unwrap();
        let exact = 2.0 * (1e-6f64.powf(-0.5) - 1.0);
        assert!((q - exact).abs() / exact < 1e-10, "got {q} want {exact}");
    }
}
