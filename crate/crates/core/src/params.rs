//! Problem parameters and derived critical exponents.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma;

/// Dimensional and exponent data of the problem, with derived thresholds
/// computed on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Space dimension N >= 2.
    pub n_dim: u32,
    /// Fractional order s in (0,1).
    pub s: f64,
    /// Nonlinearity exponent p in (1, N/s).
    pub p: f64,
    /// Potential strength lambda >= 0.
    pub lambda: f64,
    /// p*s, the order of the singular weight.
    pub ps: f64,
    /// Critical Sobolev exponent pN/(N-ps).
    pub p_star: f64,
    /// Exponent of the self-similar profile, -ps/(2-p); only for p != 2.
    pub gamma_ss: Option<f64>,
    /// ps/(2-p); only for p < 2.
    pub gamma_bar: Option<f64>,
    /// (N-ps)/p, the maximizing exponent of the Hardy quotient.
    pub eta_max: f64,
    /// 2N/(N+2s).
    pub p_crit_low: f64,
    /// 2N/(N+s).
    pub p_crit_mid: f64,
    /// (N(p-1)+ps)/(N+s).
    pub p2: f64,
    /// Surface area of the unit sphere in dimension N.
    pub omega_n: f64,
}

impl Params {
    pub fn new(n_dim: u32, s: f64, p: f64, lambda: f64) -> Result<Self> {
        if n_dim < 2 {
            return Err(Error::InvalidParams(format!("N must be >= 2, got {n_dim}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParams(format!("s must be in (0,1), got {s}")));
        }
        let n = f64::from(n_dim);
        if !(p > 1.0 && p < n / s) {
            return Err(Error::InvalidParams(format!(
                "p must be in (1, N/s) = (1, {}), got {p}",
                n / s
            )));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParams(format!("lambda must be >= 0, got {lambda}")));
        }
        let ps = p * s;
        Ok(Params {
            n_dim,
            s,
            p,
            lambda,
            ps,
            p_star: p * n / (n - ps),
            gamma_ss: (p != 2.0).then(|| -ps / (2.0 - p)),
            gamma_bar: (p < 2.0).then(|| ps / (2.0 - p)),
            eta_max: (n - ps) / p,
            p_crit_low: 2.0 * n / (n + 2.0 * s),
            p_crit_mid: 2.0 * n / (n + s),
            p2: (n * (p - 1.0) + ps) / (n + s),
            omega_n: sphere_area(n_dim),
        })
    }

    /// Same parameters with a different potential strength.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Params::new(self.n_dim, self.s, self.p, lambda)
    }

    pub fn n(&self) -> f64 {
        f64::from(self.n_dim)
    }

    /// Kernel exponent of the operator, N + ps.
    pub fn mu_op(&self) -> f64 {
        self.n() + self.ps
    }
}

/// Surface area of the unit sphere in R^N, 2 pi^{N/2} / Gamma(N/2).
pub fn sphere_area(n_dim: u32) -> f64 {
    let half = f64::from(n_dim) / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma(half)
}
