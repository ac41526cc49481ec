//! Variational constants of the Hardy inequality and the self-similar
//! solution data derived from them.
//!
//! The sharp constant is a weighted kernel integral over (0,1); `theta` is
//! the companion integral over (1,inf) whose value at (N-ps)/p reproduces the
//! constant and whose sublevels locate the admissible profile exponents.
//! Integrals crossing sigma = 1 are written in the gap variable with the
//! kernel blow-up folded into a single net power, so no cancellation or
//! overflow occurs at the singularity.

use crate::error::{Error, Result};
use crate::kernel::{kernel_k, kernel_scaled};
use crate::params::Params;
use crate::quad::{integrate_graded, integrate_tail, SingularIntegrand};

/// Relative tolerance for constant-level quadratures.
pub const CONST_TOL: f64 = 1e-9;

fn phi_p(t: f64, p: f64) -> f64 {
    t.abs().powf(p - 1.0) * t.signum()
}

/// The sharp Hardy constant: the weighted kernel integral over (0,1) with
/// kernel exponent N + ps.
pub fn hardy_constant(params: &Params) -> Result<f64> {
    let (n_dim, p, ps) = (params.n_dim, params.p, params.ps);
    let mu = params.mu_op();
    let e = params.eta_max;
    let a = ps + 1.0; // kernel blow-up rate mu - N + 1

    // sigma in (0, 1/2]
    let smooth = |sigma: f64| -> f64 {
        sigma.powf(ps - 1.0)
            * (1.0 - sigma.powf(e)).powf(p)
            * kernel_k(n_dim, mu, sigma, CONST_TOL / 10.0).unwrap_or(f64::NAN)
    };
    let si = SingularIntegrand::new(&smooth, ps - 1.0, 0.0);
    let low = integrate_graded(&si, 0.0, 0.5, CONST_TOL)?;

    // sigma = 1 - t, t in (0, 1/2]; |1 - sigma^e|^p K(sigma) = ratio^p t^{p-a} S(t)
    let near = |t: f64| -> f64 {
        let ratio = (-f64::exp_m1(e * f64::ln_1p(-t))) / t;
        if ratio == 0.0 {
            return 0.0;
        }
        let s = kernel_scaled(n_dim, mu, t, false, CONST_TOL / 10.0).unwrap_or(f64::NAN);
        (1.0 - t).powf(ps - 1.0) * ratio.powf(p) * t.powf(p - a) * s
    };
    let si = SingularIntegrand::new(&near, p - a + 1.0 - 1.0, 0.0);
    let high = integrate_graded(&si, 0.0, 0.5, CONST_TOL)?;
    Ok(low + high)
}

/// Tail integral over (1, inf) of the kernel against the exponent-eta
/// comparison profile; vanishes at eta = 0 and is maximized at (N - ps)/p.
pub fn theta(params: &Params, eta: f64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidParams(format!("eta must be >= 0, got {eta}")));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let (n_dim, p, ps) = (params.n_dim, params.p, params.ps);
    let n = params.n();
    let mu = params.mu_op();
    let a = ps + 1.0;
    let c = n - ps - eta * (p - 1.0);

    // sigma = 1 + t, t in (0, 1]
    let near = |t: f64| -> f64 {
        let lt = f64::ln_1p(t);
        let r1 = f64::exp_m1(eta * lt) / t;
        let r2 = f64::exp_m1(c * lt) / t;
        if r1 == 0.0 || r2 == 0.0 {
            return 0.0;
        }
        let s = kernel_scaled(n_dim, mu, t, true, CONST_TOL / 10.0).unwrap_or(f64::NAN);
        r1.powf(p - 1.0) * r2 * (1.0 + t).powf(ps - 1.0) * t.powf(p - a) * s
    };
    let si = SingularIntegrand::new(&near, p - a, 0.0);
    let near_part = integrate_graded(&si, 0.0, 1.0, CONST_TOL)?;

    // sigma in (2, inf)
    let far = |sigma: f64| -> f64 {
        let k = kernel_k(n_dim, mu, sigma, CONST_TOL / 10.0).unwrap_or(f64::NAN);
        k * (sigma.powf(eta) - 1.0).powf(p - 1.0)
            * (sigma.powf(n - 1.0 - eta * (p - 1.0)) - sigma.powf(ps - 1.0))
    };
    let tail_exp = (-1.0 - ps).max(eta * (p - 1.0) - n - 1.0);
    let si = SingularIntegrand::new(&far, 0.0, tail_exp);
    let far_part = integrate_tail(&si, 2.0, CONST_TOL)?;
    Ok(near_part + far_part)
}

/// Largest exponent for which `theta` converges (exclusive).
fn theta_domain_end(params: &Params) -> f64 {
    (params.n() - params.ps) / (params.p - 1.0)
}

fn bisect_theta(params: &Params, mut lo: f64, mut hi: f64, lambda: f64) -> Result<f64> {
    // theta(lo) - lambda and theta(hi) - lambda must have opposite signs.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = theta(params, mid)? - lambda;
        if v.abs() <= 1e-8 * lambda {
            return Ok(mid);
        }
        let at_lo = theta(params, lo)? - lambda;
        if (v > 0.0) == (at_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Err(Error::NonConvergence("bisection on theta stalled".into()))
}

/// The two exponents below and above (N - ps)/p at which theta crosses
/// lambda; requires 0 < lambda < the sharp constant.
pub fn theta_roots(params: &Params) -> Result<(f64, f64)> {
    let lambda = params.lambda;
    if !(lambda > 0.0) {
        return Err(Error::NoBracket("lambda must be positive".into()));
    }
    let cap = hardy_constant(params)?;
    if lambda >= cap {
        return Err(Error::NoBracket(format!(
            "lambda {lambda} is not below the sharp constant {cap}"
        )));
    }
    let eta_max = params.eta_max;
    let eta1 = bisect_theta(params, 0.0, eta_max, lambda)?;

    let end = theta_domain_end(params);
    let mut h = eta_max + 0.25 * (end - eta_max);
    while theta(params, h)? >= lambda {
        h = eta_max + 0.5 * (h - eta_max) + 0.5 * (end - eta_max);
        if end - h < 1e-12 * end {
            return Err(Error::NoBracket("no decaying branch crossing found".into()));
        }
    }
    let eta2 = bisect_theta(params, eta_max, h, lambda)?;
    Ok((eta1, eta2))
}

/// The self-similar balance value at the conjugate exponent ps/(2-p);
/// equals minus theta there.
pub fn psi1(params: &Params) -> Result<f64> {
    let gb = params
        .gamma_bar
        .ok_or_else(|| Error::InvalidParams("psi1 requires p < 2".into()))?;
    Ok(-theta(params, gb)?)
}

/// Two-parameter weighted tail integral; beta = 0 recovers `theta`.
pub fn upsilon(params: &Params, beta: f64, gamma: f64) -> Result<f64> {
    let (n_dim, p, ps) = (params.n_dim, params.p, params.ps);
    let n = params.n();
    if !(-ps < beta && beta < (n - ps) / 2.0) {
        return Err(Error::InvalidParams(format!(
            "beta {beta} outside (-ps, (N-ps)/2)"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    let mu = params.mu_op();
    let a = ps + 1.0;
    let c = n - 2.0 * beta - ps - gamma * (p - 1.0);

    let near = |t: f64| -> f64 {
        let lt = f64::ln_1p(t);
        let r1 = f64::exp_m1(gamma * lt) / t;
        let r2 = f64::exp_m1(c * lt) / t;
        if r1 == 0.0 || r2 == 0.0 {
            return 0.0;
        }
        let s = kernel_scaled(n_dim, mu, t, true, CONST_TOL / 10.0).unwrap_or(f64::NAN);
        r1.powf(p - 1.0) * r2 * (1.0 + t).powf(beta + ps - 1.0) * t.powf(p - a) * s
    };
    let si = SingularIntegrand::new(&near, p - a, 0.0);
    let near_part = integrate_graded(&si, 0.0, 1.0, CONST_TOL)?;

    let far = |sigma: f64| -> f64 {
        let k = kernel_k(n_dim, mu, sigma, CONST_TOL / 10.0).unwrap_or(f64::NAN);
        k * (sigma.powf(gamma) - 1.0).powf(p - 1.0)
            * (sigma.powf(n - 1.0 - beta - gamma * (p - 1.0)) - sigma.powf(beta + ps - 1.0))
    };
    let tail_exp = (-1.0 - ps - beta).max(gamma * (p - 1.0) + beta - n - 1.0);
    let si = SingularIntegrand::new(&far, 0.0, tail_exp);
    let far_part = integrate_tail(&si, 2.0, CONST_TOL)?;
    Ok(near_part + far_part)
}

/// Data of the separable solution `A (t / r^{ps})^{1/(2-p)}`.
#[derive(Debug, Clone, Copy)]
pub struct SelfSimilar {
    pub params: Params,
    /// Spatial profile exponent, -ps/(2-p).
    pub gamma: f64,
    /// Time exponent, 1/(2-p).
    pub alpha_t: f64,
    /// Amplitude balance constant 1/((2-p)(psi1 + lambda)).
    pub b_coef: f64,
    /// Profile amplitude, b_coef^{1/(p-2)}.
    pub a_amp: f64,
}

/// Builds the self-similar solution data; requires p < 2 and a potential
/// strength large enough that psi1 + lambda > 0.
pub fn selfsim_build(params: &Params) -> Result<SelfSimilar> {
    if params.p >= 2.0 {
        return Err(Error::NotSelfSimilarRegime(format!("p = {} is not below 2", params.p)));
    }
    let psi = psi1(params)?;
    let denom = psi + params.lambda;
    if denom <= 0.0 {
        return Err(Error::NotSelfSimilarRegime(format!(
            "psi1 + lambda = {denom} is not positive"
        )));
    }
    let two_minus_p = 2.0 - params.p;
    let b_coef = 1.0 / (two_minus_p * denom);
    Ok(SelfSimilar {
        params: *params,
        gamma: params.gamma_ss.expect("p != 2 checked above"),
        alpha_t: 1.0 / two_minus_p,
        b_coef,
        a_amp: b_coef.powf(1.0 / (params.p - 2.0)),
    })
}

impl SelfSimilar {
    /// Value A (t / r^{ps})^{1/(2-p)} at radius r and time t.
    pub fn value(&self, r: f64, t: f64) -> f64 {
        self.a_amp * (t / r.powf(self.params.ps)).powf(1.0 / (2.0 - self.params.p))
    }

    /// Folded principal-value integral of the operator applied to the pure
    /// power profile r^gamma, normalized so the profile amplitude is 1.
    fn profile_integral(&self) -> Result<f64> {
        let params = &self.params;
        let (n_dim, p, ps) = (params.n_dim, params.p, params.ps);
        let n = params.n();
        let mu = params.mu_op();
        let a = ps + 1.0;
        let g = self.gamma;

        // sigma = 1 + t; the two fold branches cancel to one extra power of t.
        let near = |t: f64| -> f64 {
            let lt = f64::ln_1p(t);
            let x1 = -f64::exp_m1(g * lt); // 1 - sigma^gamma > 0
            let x2 = -f64::exp_m1(-g * lt); // 1 - sigma^{-gamma} < 0
            let d = (x1 / t).powf(p - 1.0) * (1.0 + t).powf(n - 1.0)
                - (-x2 / t).powf(p - 1.0) * (1.0 + t).powf(mu - n - 1.0);
            if d == 0.0 {
                return 0.0;
            }
            let s = kernel_scaled(n_dim, mu, t, true, CONST_TOL / 10.0).unwrap_or(f64::NAN);
            d * t.powf(p - 1.0 - a) * s
        };
        let si = SingularIntegrand::new(&near, p - a, 0.0);
        let near_part = integrate_graded(&si, 0.0, 1.0, CONST_TOL)?;

        let far = |sigma: f64| -> f64 {
            let k = kernel_k(n_dim, mu, sigma, CONST_TOL / 10.0).unwrap_or(f64::NAN);
            (phi_p(1.0 - sigma.powf(g), p) * sigma.powf(n - 1.0)
                + phi_p(1.0 - sigma.powf(-g), p) * sigma.powf(mu - n - 1.0))
                * k
        };
        let tail_exp = (-1.0 - ps).max(-g * (p - 1.0) - n - 1.0);
        let si = SingularIntegrand::new(&far, 0.0, tail_exp);
        let far_part = integrate_tail(&si, 2.0, CONST_TOL)?;
        Ok(near_part + far_part)
    }

    /// Relative residual of the profile equation at radius r; zero (up to
    /// quadrature error) exactly at the built amplitude.
    pub fn residual(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidParams(format!("radius must be positive, got {r}")));
        }
        let params = &self.params;
        let i = self.profile_integral()?;
        let f = self.a_amp * r.powf(self.gamma);
        let op = self.a_amp.powf(params.p - 1.0) * r.powf(self.gamma) * i;
        let pot = params.lambda
            * self.a_amp.powf(params.p - 1.0)
            * r.powf(self.gamma * (params.p - 1.0) - params.ps);
        Ok((self.alpha_t * f + op - pot) / (self.alpha_t * f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, s: f64, p: f64, lambda: f64) -> Params {
        Params::new(n, s, p, lambda).unwrap()
    }

    // Frozen values computed by an independent high-precision evaluation.
    const LAMBDA_3_05_15: f64 = 15.710419836642872;
    const LAMBDA_3_05_16: f64 = 13.220740496225767;
    const LAMBDA_2_03_20: f64 = 4.480285032649172;
    const LAMBDA_3_05_25: f64 = 2.122796621986119;

    #[test]
    fn hardy_constant_frozen_values() {
        let l = hardy_constant(&params(3, 0.5, 1.5, 0.0)).unwrap();
        assert!((l - LAMBDA_3_05_15).abs() / LAMBDA_3_05_15 < 1e-7, "got {l}");
        let l = hardy_constant(&params(3, 0.5, 2.5, 0.0)).unwrap();
        assert!((l - LAMBDA_3_05_25).abs() / LAMBDA_3_05_25 < 1e-7, "got {l}");
        let l = hardy_constant(&params(2, 0.3, 2.0, 0.0)).unwrap();
        assert!((l - LAMBDA_2_03_20).abs() / LAMBDA_2_03_20 < 1e-7, "got {l}");
    }

    #[test]
    fn hardy_positive_across_p() {
        for p in [1.2, 1.5, 1.8] {
            let l = hardy_constant(&params(3, 0.5, p, 0.0)).unwrap();
            assert!(l.is_finite() && l > 0.0, "p {p}: {l}");
        }
    }

    #[test]
    fn theta_frozen_values() {
        let pr = params(3, 0.5, 1.5, 0.0);
        for (eta, want) in [
            (0.5, 12.783561001928494),
            (1.0, 15.152580722512358),
            (2.0, 15.286294620098868),
            (3.0, 12.266740000950783),
        ] {
            let t = theta(&pr, eta).unwrap();
            assert!((t - want).abs() / want < 1e-7, "eta {eta}: got {t} want {want}");
        }
        assert_eq!(theta(&pr, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn theta_at_eta_max_matches_hardy() {
        for (n, s, p) in [(2, 0.3, 2.0), (3, 0.5, 1.5), (3, 0.5, 2.5)] {
            let pr = params(n, s, p, 0.0);
            let l = hardy_constant(&pr).unwrap();
            let t = theta(&pr, pr.eta_max).unwrap();
            assert!((t - l).abs() / l < 1e-6, "N {n} p {p}: {t} vs {l}");
        }
    }

    #[test]
    fn theta_roots_bracket_eta_max() {
        let pr = params(3, 0.5, 1.5, LAMBDA_3_05_15 / 2.0);
        let (e1, e2) = theta_roots(&pr).unwrap();
        assert!(e1 < pr.eta_max && pr.eta_max < e2, "{e1} {e2}");
        for e in [e1, e2] {
            let t = theta(&pr, e).unwrap();
            assert!((t - pr.lambda).abs() <= 1e-8 * pr.lambda);
        }
        let (f1, f2) = theta_roots(&params(3, 0.5, 1.5, 0.999 * LAMBDA_3_05_15)).unwrap();
        assert!(f2 - f1 < e2 - e1, "roots should tighten toward eta_max");
    }

    #[test]
    fn theta_roots_reject_bad_lambda() {
        assert!(matches!(
            theta_roots(&params(3, 0.5, 1.5, 0.0)),
            Err(Error::NoBracket(_))
        ));
        assert!(matches!(
            theta_roots(&params(3, 0.5, 1.5, 2.0 * LAMBDA_3_05_15)),
            Err(Error::NoBracket(_))
        ));
    }

    #[test]
    fn psi1_signs_and_frozen_values() {
        // p above 2N/(N+s) = 12/7: nonnegative
        let v = psi1(&params(3, 0.5, 1.75, 0.0)).unwrap();
        assert!((v - 22.44078730768).abs() / 22.44078730768 < 1e-6, "got {v}");
        // p below 12/7: in (-Lambda, 0)
        let v = psi1(&params(3, 0.5, 1.6, 0.0)).unwrap();
        assert!((v + 12.338696857701741).abs() / 12.338696857701741 < 1e-6, "got {v}");
        assert!(v > -LAMBDA_3_05_16 && v < 0.0);
        let v = psi1(&params(3, 0.5, 1.55, 0.0)).unwrap();
        assert!((v + 14.251086817408092).abs() / 14.251086817408092 < 1e-6, "got {v}");
    }

    #[test]
    fn psi1_equals_minus_theta_at_gamma_bar() {
        let pr = params(3, 0.5, 1.6, 0.0);
        let v = psi1(&pr).unwrap();
        let t = theta(&pr, pr.gamma_bar.unwrap()).unwrap();
        assert_eq!(v, -t);
    }

    #[test]
    fn upsilon_reduces_to_theta_at_beta_zero() {
        let pr = params(3, 0.5, 1.5, 0.0);
        let u = upsilon(&pr, 0.0, 1.0).unwrap();
        let t = theta(&pr, 1.0).unwrap();
        assert!((u - t).abs() / t < 1e-9, "{u} vs {t}");
    }

    #[test]
    fn upsilon_positive_at_eta_max_weight() {
        let pr = params(3, 0.5, 1.5, 0.0);
        let u = upsilon(&pr, 0.2, pr.eta_max).unwrap();
        assert!(u > 0.0, "got {u}");
    }

    #[test]
    fn selfsim_arithmetic() {
        let pr = params(3, 0.5, 1.6, 2.0 * LAMBDA_3_05_16);
        let ss = selfsim_build(&pr).unwrap();
        assert!(ss.b_coef > 0.0);
        assert!((ss.b_coef - 0.17726996145675275).abs() / 0.17726996145675275 < 1e-6);
        // exponent identity gamma (p-1) - ps = gamma
        let lhs = ss.gamma * (pr.p - 1.0) - pr.ps;
        assert!((lhs - ss.gamma).abs() < 1e-12);

        let pr = params(3, 0.5, 1.5, 2.0 * LAMBDA_3_05_15);
        let ss = selfsim_build(&pr).unwrap();
        assert_eq!(ss.gamma, -1.5);
        assert_eq!(ss.alpha_t, 2.0);
        assert_eq!(ss.value(1.0, 1.0), ss.a_amp);
        let v = ss.value(1.0, 2.0) / ss.value(1.0, 1.0);
        assert!((v - 2.0f64.powf(2.0)).abs() < 1e-12);
        let v = ss.value(2.0, 1.0) / ss.value(1.0, 1.0);
        assert!((v - 2.0f64.powf(ss.gamma)).abs() < 1e-12);
    }

    #[test]
    fn selfsim_rejects_wrong_regime() {
        assert!(matches!(
            selfsim_build(&params(3, 0.5, 2.5, 10.0)),
            Err(Error::NotSelfSimilarRegime(_))
        ));
        assert!(matches!(
            selfsim_build(&params(3, 0.5, 1.6, 0.0)),
            Err(Error::NotSelfSimilarRegime(_))
        ));
    }

    #[test]
    fn selfsim_residual_vanishes_and_detects_perturbation() {
        let pr = params(3, 0.5, 1.6, 2.0 * LAMBDA_3_05_16);
        let ss = selfsim_build(&pr).unwrap();
        let r0 = ss.residual(1.0).unwrap();
        assert!(r0.abs() <= 1e-6, "residual {r0}");
        for r in [0.1, 10.0] {
            let ri = ss.residual(r).unwrap();
            assert!((ri - r0).abs() <= 1e-10, "scale dependence at r = {r}");
        }
        let mut perturbed = ss;
        perturbed.a_amp *= 1.1;
        let rp = perturbed.residual(1.0).unwrap();
        assert!(rp.abs() >= 1e-3, "perturbed residual {rp}");
    }
}
