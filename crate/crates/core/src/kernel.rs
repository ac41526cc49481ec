//! The angular kernel obtained by reducing the 2N-dimensional singular
//! integral to radial variables.
//!
//! `K(sigma)` is the sphere average of `|x - sigma y|^{-mu}` over unit
//! vectors; it is positive, satisfies `K(1/xi) = xi^mu K(xi)`, and diverges
//! at `sigma = 1` at the rate `|1 - sigma|^{-(mu - N + 1)}`. Evaluation
//! integrates over the polar angle with the peak at the origin resolved by
//! splitting at `|1 - sigma|`; the quadratic form under the power is computed
//! as `(1 - sigma)^2 + 4 sigma sin^2(xi/2)` to avoid cancellation near the
//! singularity.

use crate::error::{Error, Result};
use crate::quad::{integrate_graded, integrate_log_cells, SingularIntegrand};
use statrs::function::gamma::gamma;
use std::collections::HashMap;
use std::sync::Mutex;

/// Default relative tolerance for kernel values.
pub const KERNEL_TOL: f64 = 1e-10;

/// Gaps below this threshold use the extrapolated scaled form instead of
/// direct angular quadrature.
const GAP_DIRECT: f64 = 1e-7;

fn norm_const(n_dim: u32) -> f64 {
    let half = (f64::from(n_dim) - 1.0) / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma(half)
}

/// Direct angular quadrature of K at sigma = 1 +/- gap (gap > 0 required).
fn kernel_direct(n_dim: u32, mu: f64, gap: f64, above: bool, tol: f64) -> Result<f64> {
    let sigma = if above { 1.0 + gap } else { 1.0 - gap };
    let n = f64::from(n_dim);
    let integrand = move |xi: f64| {
        let half = (0.5 * xi).sin();
        xi.sin().powi(n_dim as i32 - 2) * (gap * gap + 4.0 * sigma * half * half).powf(-mu / 2.0)
    };
    let pi = std::f64::consts::PI;
    let value = if gap >= 1.0 {
        let si = SingularIntegrand::new(&integrand, n - 2.0, n - 2.0);
        integrate_graded(&si, 0.0, pi, tol)?
    } else {
        let si = SingularIntegrand::new(&integrand, n - 2.0, 0.0);
        let near = integrate_graded(&si, 0.0, gap, tol)?;
        let far = integrate_log_cells(&integrand, gap, pi, tol)?;
        near + far
    };
    Ok(norm_const(n_dim) * value)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct ScaledKey {
    n_dim: u32,
    mu_bits: u64,
    above: bool,
}

/// Linear-in-gap model of gap^{mu-N+1} K(1 +/- gap) for gap -> 0, fitted
/// once per (N, mu, side) from two directly computed values.
fn scaled_limit_coeffs(n_dim: u32, mu: f64, above: bool) -> Result<(f64, f64)> {
    static COEFFS: Mutex<Option<HashMap<ScaledKey, (f64, f64)>>> = Mutex::new(None);
    let key = ScaledKey { n_dim, mu_bits: mu.to_bits(), above };
    if let Some(map) = COEFFS.lock().unwrap().as_ref() {
        if let Some(&c) = map.get(&key) {
            return Ok(c);
        }
    }
    let a = mu - f64::from(n_dim) + 1.0;
    let g1 = GAP_DIRECT;
    let g2 = 2.0 * GAP_DIRECT;
    let s1 = g1.powf(a) * kernel_direct(n_dim, mu, g1, above, KERNEL_TOL / 10.0)?;
    let s2 = g2.powf(a) * kernel_direct(n_dim, mu, g2, above, KERNEL_TOL / 10.0)?;
    let slope = (s2 - s1) / (g2 - g1);
    let coeffs = (s1 - slope * g1, slope);
    COEFFS.lock().unwrap().get_or_insert_with(HashMap::new).insert(key, coeffs);
    Ok(coeffs)
}

/// gap^{mu-N+1} * K(1 +/- gap): bounded through the singularity, so callers
/// integrating across sigma = 1 can fold the kernel blow-up into their own
/// net exponent without overflow.
pub(crate) fn kernel_scaled(n_dim: u32, mu: f64, gap: f64, above: bool, tol: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::SingularArgument(1.0));
    }
    let a = mu - f64::from(n_dim) + 1.0;
    if gap >= GAP_DIRECT {
        Ok(gap.powf(a) * kernel_direct(n_dim, mu, gap, above, tol)?)
    } else {
        let (s0, s1) = scaled_limit_coeffs(n_dim, mu, above)?;
        Ok(s0 + s1 * gap)
    }
}

/// The angular kernel K(sigma) for the exponent mu > N - 1.
pub fn kernel_k(n_dim: u32, mu: f64, sigma: f64, tol: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParams(format!("sigma must be positive, got {sigma}")));
    }
    if sigma == 1.0 {
        return Err(Error::SingularArgument(sigma));
    }
    if !(mu > f64::from(n_dim) - 1.0) {
        return Err(Error::InvalidParams(format!("mu {mu} must exceed N - 1")));
    }
    let gap = (sigma - 1.0).abs();
    let a = mu - f64::from(n_dim) + 1.0;
    if gap >= GAP_DIRECT {
        kernel_direct(n_dim, mu, gap, sigma > 1.0, tol)
    } else {
        Ok(kernel_scaled(n_dim, mu, gap, sigma > 1.0, tol)? * gap.powf(-a))
    }
}

/// Memoized kernel evaluations for a fixed (N, mu) pair; safe for concurrent
/// reads and inserts.
pub struct KernelTable {
    pub n_dim: u32,
    pub mu: f64,
    pub tol: f64,
    cache: Mutex<HashMap<u64, f64>>,
}

impl KernelTable {
    pub fn new(n_dim: u32, mu: f64) -> Self {
        KernelTable { n_dim, mu, tol: KERNEL_TOL, cache: Mutex::new(HashMap::new()) }
    }

    pub fn eval(&self, sigma: f64) -> Result<f64> {
        let key = sigma.to_bits();
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = kernel_k(self.n_dim, self.mu, sigma, self.tol)?;
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }
}
