//! Scripted experiment drivers: finite-time extinction, the truncation-level
//! blow-up dichotomy, self-similar supersolution domination, weighted norm
//! equivalence and its degenerate breakdown, the improved Hardy remainder,
//! a closed-form Gronwall envelope, and the positive steady state that rules
//! out extinction with a concave source.

use crate::constants::selfsim_build;
use crate::error::{Error, Result};
use crate::evolution::{
    evolve, DiagRow, EvolutionConfig, Observer, PotentialSpec, StopReason,
};
use crate::grid::{RadialFunction, RadialGrid};
use crate::norms::{e_alpha_seminorm, hardy_term, lq_norm, seminorm_general, SeminormDomain};
use crate::operator::{pair_with, DiscreteOperator};
use crate::params::Params;
use std::sync::Arc;

/// Least-squares line y = a + b x; returns (a, b, stderr of b).
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let se = if xs.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (a, b, se)
}

/// A smooth bump: 1 inside `inner`, cosine taper to 0 at `outer`.
pub fn bump_profile(grid: Arc<RadialGrid>, inner: f64, outer: f64) -> RadialFunction {
    RadialFunction::from_fn(grid, move |r| {
        if r <= inner {
            1.0
        } else if r >= outer {
            0.0
        } else {
            let x = (r - inner) / (outer - inner);
            0.5 * (1.0 + (std::f64::consts::PI * x).cos())
        }
    })
}

/// A battery of ten diverse radial profiles on the given grid.
pub fn profile_battery(grid: &Arc<RadialGrid>) -> Vec<RadialFunction> {
    let rr = grid.r_outer;
    let mut out = vec![
        bump_profile(grid.clone(), 0.25 * rr, 0.75 * rr),
        bump_profile(grid.clone(), 0.05 * rr, 0.3 * rr),
        bump_profile(grid.clone(), 0.5 * rr, rr),
    ];
    let hat = |c: f64, w: f64| {
        let g = grid.clone();
        RadialFunction::from_fn(g, move |r| (1.0 - ((r - c) / w).abs()).max(0.0))
    };
    out.push(hat(0.5 * rr, 0.3 * rr));
    out.push(hat(0.15 * rr, 0.1 * rr));
    out.push(hat(0.8 * rr, 0.2 * rr));
    let g = grid.clone();
    out.push(RadialFunction::from_fn(g, move |r| (-8.0 * (r / rr).powi(2)).exp() * (1.0 - r / rr)));
    let g = grid.clone();
    out.push(RadialFunction::from_fn(g, move |r| (r / rr).powf(0.3) * (1.0 - r / rr)));
    let g = grid.clone();
    out.push(RadialFunction::from_fn(g, move |r| (rr / r).powf(0.2).min(4.0) * (1.0 - r / rr)));
    let g = grid.clone();
    out.push(RadialFunction::from_fn(g, move |r| (1.0 - r / rr) * (1.0 + (6.0 * r / rr).sin().powi(2))));
    out
}

/// Outcome of a finite-time extinction run.
#[derive(Debug, Clone)]
pub struct ExtinctionReport {
    pub params: Params,
    pub detected: bool,
    pub t_ext: Option<f64>,
    pub fitted_exponent: Option<f64>,
    /// Half-width of the 95% confidence interval of the fitted exponent.
    pub exponent_ci: Option<f64>,
    pub monotone_decay: bool,
    pub rows: Vec<DiagRow>,
}

/// Evolves until the L2 norm falls below 1e-8 of its initial value, then
/// fits the decay exponent d log ||u|| / d log(T* - t) on the last decade.
pub fn run_extinction(
    params: &Params,
    u0: RadialFunction,
    config: &EvolutionConfig,
    op: &DiscreteOperator,
) -> Result<ExtinctionReport> {
    let l2_0 = lq_norm(params, &u0, 2.0)?;
    if l2_0 == 0.0 {
        return Ok(ExtinctionReport {
            params: *params,
            detected: true,
            t_ext: Some(0.0),
            fitted_exponent: None,
            exponent_ci: None,
            monotone_decay: true,
            rows: vec![],
        });
    }
    let threshold = 1e-8 * l2_0;
    let out = evolve(params, u0, config, op, &[Observer::L2Below(threshold)])?;
    let detected = out.reason == StopReason::Extinguished;
    let monotone = out
        .rows
        .windows(2)
        .all(|w| w[1].l2 <= w[0].l2 * (1.0 + 1e-10));

    // samples from the last decade of the decay, at least 8 of them
    let positive: Vec<&DiagRow> = out.rows.iter().filter(|r| r.l2 > threshold).collect();
    let (mut t_ext, mut exponent, mut ci) = (None, None, None);
    if detected && positive.len() >= 8 {
        let l2_min = positive.last().unwrap().l2;
        let mut window: Vec<&DiagRow> =
            positive.iter().copied().filter(|r| r.l2 <= 10.0 * l2_min).collect();
        if window.len() < 8 {
            window = positive[positive.len() - 8.min(positive.len())..].to_vec();
        }
        // ||u||^{2-p} decays linearly toward its zero at the extinction time
        let ts: Vec<f64> = window.iter().map(|r| r.t).collect();
        let ys: Vec<f64> = window.iter().map(|r| r.l2.powf(2.0 - params.p)).collect();
        let (a, b, _) = linear_fit(&ts, &ys);
        if b < 0.0 {
            let tstar = -a / b;
            if tstar > *ts.last().unwrap() {
                t_ext = Some(tstar);
                let xs: Vec<f64> = window.iter().map(|r| (tstar - r.t).ln()).collect();
                let ls: Vec<f64> = window.iter().map(|r| r.l2.ln()).collect();
                let (_, slope, se) = linear_fit(&xs, &ls);
                exponent = Some(slope);
                ci = Some(1.96 * se);
            }
        }
    }
    Ok(ExtinctionReport {
        params: *params,
        detected,
        t_ext,
        fitted_exponent: exponent,
        exponent_ci: ci,
        monotone_decay: monotone,
        rows: out.rows,
    })
}

/// Outcome of the truncation-level dichotomy probe.
#[derive(Debug, Clone)]
pub struct BlowupReport {
    pub n_levels: Vec<u32>,
    pub r_probe: f64,
    pub t_probe: f64,
    /// u_n at the probe point, one per level.
    pub values: Vec<f64>,
    /// Successive ratios values[k] / values[k-1].
    pub growth_ratios: Vec<f64>,
    /// Last/first value reached the complete-blow-up threshold 10^3.
    pub blew_up: bool,
    /// Successive ratio settled at <= 1.01.
    pub converged: bool,
    /// Final profile of the last level dominates c t log(eta/r) near 0.
    pub log_envelope_ok: bool,
}

/// For each truncation level n, evolves with the capped potential
/// min(n, r^{-ps}) to the probe time and records the probe value; runs are
/// stopped early if the solution exceeds a huge cap (complete blow-up).
pub fn run_blowup(
    params: &Params,
    u0: &RadialFunction,
    config: &EvolutionConfig,
    op: &DiscreteOperator,
    n_levels: &[u32],
    r_probe: f64,
    envelope_c: f64,
    envelope_eta: f64,
) -> Result<BlowupReport> {
    let t_probe = config.t_end;
    let cap = 1e12;
    let mut values = Vec::with_capacity(n_levels.len());
    let mut last_profile = None;
    for &n in n_levels {
        let mut level_config = *config;
        level_config.potential = PotentialSpec::Minimum { n };
        let out = evolve(params, u0.clone(), &level_config, op, &[Observer::MaxAbove(cap)])?;
        values.push(out.state.u.eval_at(r_probe));
        last_profile = Some(out.state.u);
    }
    let growth_ratios: Vec<f64> = values
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
        .collect();
    let blew_up = values.first().map_or(false, |&v0| {
        v0 > 0.0 && values.last().unwrap() / v0 >= 1e3
    });
    let converged = growth_ratios.last().map_or(false, |&r| r <= 1.01);
    let log_envelope_ok = last_profile.map_or(false, |u| {
        u.grid
            .nodes
            .iter()
            .zip(&u.values)
            .filter(|(&r, _)| r <= envelope_eta / 4.0)
            .all(|(&r, &v)| v >= envelope_c * t_probe * (envelope_eta / r).ln())
    });
    Ok(BlowupReport {
        n_levels: n_levels.to_vec(),
        r_probe,
        t_probe,
        values,
        growth_ratios,
        blew_up,
        converged,
        log_envelope_ok,
    })
}

/// Outcome of the self-similar domination run.
#[derive(Debug, Clone)]
pub struct SupersolutionReport {
    pub dominated: bool,
    /// Largest ratio u / V seen over nodes and sample times.
    pub worst_ratio: f64,
    /// Lq norms (initial, final) for the two monitored exponents below p2.
    pub q_norms: Vec<(f64, f64, f64)>,
    pub q_norms_bounded: bool,
}

/// Starts below the self-similar solution at offset time t0 and checks that
/// the evolution stays below (1 + 2%) of it at all later sample times.
pub fn run_selfsim_supersolution(
    params: &Params,
    config: &EvolutionConfig,
    op: &DiscreteOperator,
    t0: f64,
    cap: f64,
) -> Result<SupersolutionReport> {
    let ss = selfsim_build(params)?;
    let grid = op.grid.clone();
    let u0 = RadialFunction::from_fn(grid.clone(), |r| ss.value(r, t0).min(cap));
    let out = evolve(params, u0, config, op, &[])?;

    // check domination at every stored trajectory sample
    let mut worst: f64 = 0.0;
    let times: Vec<f64> = out.rows.iter().map(|r| r.t).collect();
    for &t in &times {
        let u_t = out.trajectory.at(t);
        for (j, &r) in grid.nodes.iter().enumerate() {
            let v = ss.value(r, t0 + t).min(cap * 10.0);
            if v > 0.0 {
                worst = worst.max(u_t[j] / v);
            }
        }
    }

    let qs = [0.5 * (params.p2 + 1.0), 0.9 * params.p2];
    let u_final = &out.state.u;
    let u_init = RadialFunction::from_fn(grid.clone(), |r| ss.value(r, t0).min(cap));
    let mut q_norms = Vec::new();
    let mut bounded = true;
    for q in qs {
        let n0 = lq_norm(params, &u_init, q)?;
        let n1 = lq_norm(params, u_final, q)?;
        bounded &= n1.is_finite() && n1 <= 10.0 * n0.max(1e-300);
        q_norms.push((q, n0, n1));
    }
    Ok(SupersolutionReport {
        dominated: worst <= 1.02,
        worst_ratio: worst,
        q_norms,
        q_norms_bounded: bounded,
    })
}

/// Ratio statistics of the weighted seminorm against its power-weight
/// substitute for one beta.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub beta: f64,
    pub alpha: f64,
    /// (weighted seminorm, substitute seminorm) per profile.
    pub pairs: Vec<(f64, f64)>,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

/// Both seminorms over a battery of profiles, per beta in the admissible
/// window (-ps, (N - ps)/2).
pub fn run_norm_equivalence(
    params: &Params,
    beta_list: &[f64],
    profiles: &[RadialFunction],
    tol: f64,
) -> Result<Vec<EquivalenceReport>> {
    let n = params.n();
    let mu = params.mu_op();
    let mut reports = Vec::with_capacity(beta_list.len());
    for &beta in beta_list {
        if !(beta > -params.ps && beta < (n - params.ps) / 2.0) {
            return Err(Error::DivergentIntegrand(format!(
                "beta = {beta} outside the equivalence window (-ps, (N - ps)/2)"
            )));
        }
        let alpha = -2.0 * beta / params.p;
        let mut pairs = Vec::with_capacity(profiles.len());
        let mut ratio_min = f64::INFINITY;
        let mut ratio_max: f64 = 0.0;
        for u in profiles {
            let a = seminorm_general(params, u, params.p, mu, beta, SeminormDomain::Full, tol)?;
            let b = e_alpha_seminorm(params, u, alpha, tol)?;
            let ratio = a / b;
            ratio_min = ratio_min.min(ratio);
            ratio_max = ratio_max.max(ratio);
            pairs.push((a, b));
        }
        reports.push(EquivalenceReport { beta, alpha, pairs, ratio_min, ratio_max });
    }
    Ok(reports)
}

/// Growth of the bump's weighted seminorm under outer truncation radii
/// 10, 100, 1000 for a degenerate weight beta <= -ps.
#[derive(Debug, Clone)]
pub struct DivergenceReport {
    pub beta: f64,
    pub radii: [f64; 3],
    pub values: [f64; 3],
    /// Every decade of truncation radius grew the value by >= 50%.
    pub diverges: bool,
}

pub fn run_degenerate_divergence(
    params: &Params,
    u: &RadialFunction,
    beta: f64,
    tol: f64,
) -> Result<DivergenceReport> {
    if !(beta <= -params.ps) {
        return Err(Error::InvalidParams(format!(
            "beta = {beta} is not in the degenerate range (<= -ps = {})",
            -params.ps
        )));
    }
    let mu = params.mu_op();
    // Truncation radii grow by decades from the profile's outer radius, so
    // the logarithmically divergent far tail dominates the fixed bulk term
    // from the first decade on.
    let l0 = u.grid.r_outer;
    let radii = [l0, 10.0 * l0, 100.0 * l0];
    let mut values = [0.0; 3];
    for (i, &l) in radii.iter().enumerate() {
        values[i] = seminorm_general(
            params,
            u,
            params.p,
            mu,
            beta,
            SeminormDomain::Truncated(l),
            tol,
        )?;
    }
    let diverges = values[1] >= 1.5 * values[0] && values[2] >= 1.5 * values[1];
    Ok(DivergenceReport { beta, radii, values, diverges })
}

/// Remainder of the Hardy inequality at the critical constant, measured
/// against lower-order seminorms on the bounded domain.
#[derive(Debug, Clone)]
pub struct ImprovedHardyReport {
    /// Per q: smallest remainder/seminorm ratio over the profiles.
    pub ratios: Vec<(f64, f64)>,
    pub all_nonnegative: bool,
}

pub fn run_improved_hardy(
    params: &Params,
    q_list: &[f64],
    profiles: &[RadialFunction],
    tol: f64,
) -> Result<ImprovedHardyReport> {
    let lambda = params.lambda;
    let mu = params.mu_op();
    let mut ratios = Vec::with_capacity(q_list.len());
    let mut all_ok = true;
    for &q in q_list {
        if !(q > 1.0 && q < params.p) {
            return Err(Error::InvalidParams(format!("q = {q} must lie in (1, p)")));
        }
        let mut worst = f64::INFINITY;
        for u in profiles {
            let energy =
                0.5 * seminorm_general(params, u, params.p, mu, 0.0, SeminormDomain::Full, tol)?;
            let remainder = energy - lambda * hardy_term(params, u, params.p)?;
            let lower = seminorm_general(
                params,
                u,
                params.p,
                params.n() + q * params.s,
                0.0,
                SeminormDomain::OmegaOmega,
                tol,
            )?;
            let rel = remainder / lower.max(1e-300);
            worst = worst.min(rel);
            all_ok &= remainder >= -0.02 * energy;
        }
        ratios.push((q, worst));
    }
    Ok(ImprovedHardyReport { ratios, all_nonnegative: all_ok })
}

/// Closed-form integral bound on the squared L2 norm along the flow.
#[derive(Debug, Clone)]
pub struct GronwallReport {
    pub holds: bool,
    /// Smallest relative slack (bound - ||u||^2) / bound over sample times.
    pub min_margin: f64,
    pub rows: Vec<DiagRow>,
}

pub fn run_global_gronwall(
    params: &Params,
    u0: RadialFunction,
    config: &EvolutionConfig,
    op: &DiscreteOperator,
) -> Result<GronwallReport> {
    let (p, ps, lambda) = (params.p, params.ps, params.lambda);
    let e = params.n() - 1.0 - 2.0 * ps / (2.0 - p);
    if e <= -1.0 {
        return Err(Error::DivergentIntegrand(format!(
            "radial weight exponent {e} not integrable: p too large for this envelope"
        )));
    }
    let rr = op.grid.r_outer;
    let weight_int = rr.powf(e + 1.0) / (e + 1.0);
    let c0 = lq_norm(params, &u0, 2.0)?.powi(2);
    // Testing the equation with u gives (1/2) d/dt of the squared L2 norm, so
    // the Young split of 2 lambda W u^p carries lambda (2-p) into the drift
    // and lambda p into the Gronwall rate.
    let c1 = lambda * (2.0 - p) * params.omega_n * weight_int;
    let alpha_hat = lambda * p;
    let bound = |t: f64| -> f64 {
        let beta_t = c0 + c1 * t;
        let integral = if alpha_hat > 0.0 {
            c0 * ((alpha_hat * t).exp() - 1.0) / alpha_hat
                + c1 * ((alpha_hat * t).exp() * (alpha_hat * t - 1.0) + 1.0)
                    / (alpha_hat * alpha_hat)
        } else {
            c0 * t + 0.5 * c1 * t * t
        };
        beta_t + integral
    };
    let out = evolve(params, u0, config, op, &[])?;
    let mut min_margin = f64::INFINITY;
    for row in &out.rows {
        let b = bound(row.t);
        min_margin = min_margin.min((b - row.l2 * row.l2) / b.max(1e-300));
    }
    Ok(GronwallReport { holds: min_margin >= 0.0, min_margin, rows: out.rows })
}

/// Growth to a positive steady state from zero data with a concave source.
#[derive(Debug, Clone)]
pub struct NoExtinctionReport {
    pub positive_everywhere: bool,
    pub l2_monotone: bool,
    /// Relative steady residual of op(w) = lambda a(r) w^{p-1} + w^q.
    pub residual: f64,
    pub rows: Vec<DiagRow>,
}

pub fn run_no_extinction(
    params: &Params,
    config: &EvolutionConfig,
    op: &DiscreteOperator,
    t_check: f64,
) -> Result<NoExtinctionReport> {
    let q = config.source_q.ok_or_else(|| {
        Error::InvalidParams("the no-extinction run needs a concave source exponent".into())
    })?;
    // the zero profile is a discrete fixed point, so lift off with the exact
    // scalar update of u' = u^q over the first step
    let kick = ((1.0 - q) * config.tau).powf(1.0 / (1.0 - q));
    let grid = op.grid.clone();
    let u0 = RadialFunction::from_fn(grid.clone(), |_| kick);
    let out = evolve(params, u0, config, op, &[])?;
    let w = &out.state.u;
    let positive = w.values.iter().all(|&v| v > 0.0)
        && out
            .trajectory
            .samples()
            .filter(|(t, _)| *t >= t_check)
            .all(|(_, u)| u.iter().all(|&v| v > 0.0));
    let monotone = out
        .rows
        .windows(2)
        .all(|pair| pair[1].l2 >= pair[0].l2 * (1.0 - 1e-8));

    let opw = op.apply(w);
    let rhs: Vec<f64> = (0..grid.m)
        .map(|j| {
            let a = config.potential.coefficient(params.ps, grid.nodes[j]);
            config.lambda * a * w.values[j].powf(params.p - 1.0) + w.values[j].powf(q)
        })
        .collect();
    let diff: Vec<f64> = opw.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).collect();
    let diff_fn = RadialFunction::new(grid.clone(), diff)?;
    let rhs_fn = RadialFunction::new(grid.clone(), rhs)?;
    let residual = lq_norm(params, &diff_fn, 2.0)? / lq_norm(params, &rhs_fn, 2.0)?.max(1e-300);
    Ok(NoExtinctionReport {
        positive_everywhere: positive,
        l2_monotone: monotone,
        residual,
        rows: out.rows,
    })
}

/// L2-in-space inner product of nodal operator values with a profile;
/// re-exported convenience for energy diagnostics in drivers.
pub fn energy_pairing(params: &Params, op: &DiscreteOperator, u: &RadialFunction) -> f64 {
    let vals = op.apply(u);
    pair_with(params, &op.grid, &vals, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::Scheme;
    use crate::grid::build_grid;

    #[test]
    fn fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (a, b, se) = linear_fit(&xs, &ys);
        assert!((a - 3.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn zero_data_is_instant_extinction() {
        let params = Params::new(3, 0.5, 1.6, 0.0).unwrap();
        let grid = build_grid(1.0, 16, 2.0).unwrap();
        let op = DiscreteOperator::new(&params, grid.clone(), 0).unwrap();
        let config = EvolutionConfig::new(&params, Scheme::Explicit, 1e-3, 0.1);
        let report =
            run_extinction(&params, RadialFunction::zero(grid), &config, &op).unwrap();
        assert!(report.detected);
        assert_eq!(report.t_ext, Some(0.0));
    }

    #[test]
    fn battery_has_ten_distinct_profiles() {
        let grid = build_grid(1.0, 32, 2.0).unwrap();
        let battery = profile_battery(&grid);
        assert_eq!(battery.len(), 10);
        for (i, u) in battery.iter().enumerate() {
            assert!(u.max_abs() > 0.0, "profile {i} vanishes");
        }
    }

    #[test]
    fn gronwall_envelope_with_zero_data_is_trivial() {
        let params = Params::new(3, 0.5, 1.3, 1.0).unwrap();
        let grid = build_grid(1.0, 16, 2.0).unwrap();
        let op = DiscreteOperator::new(&params, grid.clone(), 0).unwrap();
        let mut config = EvolutionConfig::new(&params, Scheme::SemiImplicit, 1e-3, 0.01);
        config.save_interval = 0.005;
        let report =
            run_global_gronwall(&params, RadialFunction::zero(grid), &config, &op).unwrap();
        assert!(report.holds, "margin {}", report.min_margin);
    }

    #[test]
    fn beta_zero_equivalence_is_exact() {
        let params = Params::new(3, 0.5, 1.5, 0.0).unwrap();
        let grid = build_grid(1.0, 24, 2.0).unwrap();
        let battery = &profile_battery(&grid)[..3];
        let reports = run_norm_equivalence(&params, &[0.0], battery, 1e-3).unwrap();
        assert_eq!(reports[0].ratio_min, 1.0);
        assert_eq!(reports[0].ratio_max, 1.0);
    }
}
