//! One function per CLI command: each builds its objects from the parsed
//! config, runs the experiment, writes CSV output, and prints one summary
//! line per numerical check with the tolerance it was held to.

use crate::config::RunConfig;
use anyhow::Result;
use frachardy_core::constants::{hardy_constant, selfsim_build, theta, theta_roots};
use frachardy_core::evolution::{evolve, DiagRow};
use frachardy_core::experiments::{
    bump_profile, profile_battery, run_blowup, run_degenerate_divergence, run_extinction,
    run_global_gronwall, run_improved_hardy, run_no_extinction, run_norm_equivalence,
};
use frachardy_core::grid::build_grid;
use frachardy_core::inequality::{
    check_alge4, check_picone, search_constants_alge4, search_constants_algg, verify_algg,
};
use frachardy_core::operator::DiscreteOperator;
use frachardy_core::report::{write_csv, Field};
use frachardy_core::Params;
use std::path::Path;

/// Prints a summary line for one check and folds its result into the run
/// status; returns the pass flag.
fn check(all_pass: &mut bool, name: &str, value: f64, tol: f64, pass: bool) -> bool {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("check={name} value={value:.6e} tol={tol:.1e} status={status}");
    *all_pass &= pass;
    pass
}

fn exit_code(all_pass: bool) -> i32 {
    if all_pass {
        0
    } else {
        2
    }
}

fn diag_schema() -> Vec<&'static str> {
    vec!["t", "l2", "lnu", "seminorm_p", "hardy_term", "max_u", "tau"]
}

fn diag_row(r: &DiagRow) -> Vec<Field> {
    vec![
        r.t.into(),
        r.l2.into(),
        r.lnu.into(),
        r.seminorm_p.into(),
        r.hardy_term.into(),
        r.max_u.into(),
        r.tau.into(),
    ]
}

fn critical_constant(cfg: &RunConfig) -> Result<f64> {
    let base = Params::new(cfg.n_dim, cfg.s, cfg.p, 0.0)?;
    Ok(hardy_constant(&base)?)
}

fn setup(cfg: &RunConfig) -> Result<(Params, DiscreteOperator, f64)> {
    let critical = critical_constant(cfg)?;
    let lambda = cfg.resolve_lambda(critical);
    let params = cfg.params_with(lambda)?;
    let grid = build_grid(cfg.r_outer, cfg.m, cfg.grading)?;
    let op = DiscreteOperator::new(&params, grid, cfg.op_level)?;
    Ok((params, op, critical))
}

pub fn constants(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let critical = critical_constant(cfg)?;
    let lambda = cfg.resolve_lambda(critical);
    let params = cfg.params_with(0.0)?;
    let mut all = true;

    let theta_peak = theta(&params, params.eta_max)?;
    let cross = (theta_peak - critical).abs() / critical;
    check(&mut all, "critical_cross_identity", cross, 1e-6, cross <= 1e-6);

    let lambda_roots =
        if lambda > 0.0 && lambda < critical { lambda } else { 0.5 * critical };
    let roots_params = cfg.params_with(lambda_roots)?;
    let (eta1, eta2) = theta_roots(&roots_params)?;
    let r1 = (theta(&params, eta1)? - lambda_roots).abs() / lambda_roots;
    let r2 = (theta(&params, eta2)? - lambda_roots).abs() / lambda_roots;
    check(&mut all, "root_lower", r1, 1e-8, r1 <= 1e-8 && eta1 < params.eta_max);
    check(&mut all, "root_upper", r2, 1e-8, r2 <= 1e-8 && eta2 > params.eta_max);

    // the self-similar amplitude exists for p < 2 once lambda is large enough
    let mut lambda_b = lambda;
    let b = if params.p < 2.0 {
        let try_build = |l: f64| cfg.params_with(l).ok().and_then(|q| selfsim_build(&q).ok());
        match try_build(lambda).or_else(|| {
            lambda_b = 2.0 * critical;
            try_build(lambda_b)
        }) {
            Some(ss) => ss.b_coef,
            None => f64::NAN,
        }
    } else {
        f64::NAN
    };
    if b.is_finite() {
        check(&mut all, "b_positive", b, 0.0, b > 0.0);
    }

    let rows = vec![
        vec!["Lambda".into(), critical.into(), 1e-9.into()],
        vec!["Theta_at_etamax".into(), theta_peak.into(), 1e-6.into()],
        vec!["eta1".into(), eta1.into(), 1e-8.into()],
        vec!["eta2".into(), eta2.into(), 1e-8.into()],
        vec!["B".into(), b.into(), 0.0.into()],
        vec!["lambda_used_roots".into(), lambda_roots.into(), 0.0.into()],
        vec!["lambda_used_B".into(), lambda_b.into(), 0.0.into()],
    ];
    write_csv(&out.join("constants.csv"), &["quantity", "value", "tol"], &rows)?;
    Ok(exit_code(all))
}

pub fn selfsim(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let critical = critical_constant(cfg)?;
    let lambda = cfg.resolve_lambda(critical);
    let params = cfg.params_with(lambda)?;
    let ss = selfsim_build(&params)?;
    let mut all = true;
    check(&mut all, "amplitude_positive", ss.b_coef, 0.0, ss.b_coef > 0.0);

    let mut perturbed = ss.clone();
    perturbed.a_amp *= 1.1;
    let mut rows = Vec::new();
    for r in [0.1, 1.0, 10.0] {
        let res = ss.residual(r)?.abs();
        let res_pert = perturbed.residual(r)?.abs();
        check(&mut all, &format!("residual_r_{r}"), res, 1e-6, res <= 1e-6);
        check(
            &mut all,
            &format!("perturbed_residual_r_{r}"),
            res_pert,
            1e-3,
            res_pert > 1e-3,
        );
        rows.push(vec![r.into(), res.into(), res_pert.into()]);
    }
    write_csv(
        &out.join("selfsim.csv"),
        &["r", "residual", "perturbed_residual"],
        &rows,
    )?;
    Ok(exit_code(all))
}

pub fn evolve_cmd(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let (params, op, _) = setup(cfg)?;
    let config = cfg.evolution(&params);
    let grid = op.grid.clone();
    let u0 = bump_profile(grid, 0.25 * cfg.r_outer, 0.75 * cfg.r_outer).scaled(cfg.amplitude);
    let result = evolve(&params, u0, &config, &op, &[])?;
    let rows: Vec<Vec<Field>> = result.rows.iter().map(diag_row).collect();
    write_csv(&out.join("evolve.csv"), &diag_schema(), &rows)?;
    let mut all = true;
    let finite = result.state.u.values.iter().all(|v| v.is_finite());
    check(&mut all, "final_state_finite", result.state.t, 0.0, finite);
    Ok(exit_code(all))
}

pub fn extinction(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let (params, op, _) = setup(cfg)?;
    let config = cfg.evolution(&params);
    let grid = op.grid.clone();
    let u0 = bump_profile(grid, 0.25 * cfg.r_outer, 0.75 * cfg.r_outer).scaled(cfg.amplitude);
    let report = run_extinction(&params, u0, &config, &op)?;

    let mut all = true;
    check(&mut all, "extinction_detected", report.t_ext.unwrap_or(f64::NAN), 0.0, report.detected);
    check(&mut all, "decay_monotone", 1.0, 0.0, report.monotone_decay);
    let target = 1.0 / (2.0 - params.p);
    let fitted = report.fitted_exponent.unwrap_or(f64::NAN);
    let rel = (fitted - target).abs() / target;
    check(&mut all, "exponent_fit", rel, 0.2, rel <= 0.2);

    let rows: Vec<Vec<Field>> = report.rows.iter().map(diag_row).collect();
    write_csv(&out.join("extinction.csv"), &diag_schema(), &rows)?;
    write_csv(
        &out.join("extinction_report.csv"),
        &["detected", "t_ext", "fitted_exponent", "exponent_ci", "target", "monotone"],
        &[vec![
            i64::from(report.detected).into(),
            report.t_ext.unwrap_or(f64::NAN).into(),
            fitted.into(),
            report.exponent_ci.unwrap_or(f64::NAN).into(),
            target.into(),
            i64::from(report.monotone_decay).into(),
        ]],
    )?;
    Ok(exit_code(all))
}

pub fn blowup(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let (params, op, critical) = setup(cfg)?;
    let config = cfg.evolution(&params);
    let grid = op.grid.clone();
    let r_probe = cfg.r_probe.unwrap_or(grid.nodes[0]);
    let u0 = bump_profile(grid, 0.25 * cfg.r_outer, 0.75 * cfg.r_outer).scaled(cfg.amplitude);
    let report = run_blowup(
        &params,
        &u0,
        &config,
        &op,
        &cfg.n_levels,
        r_probe,
        cfg.envelope_c,
        cfg.envelope_eta,
    )?;

    let mut all = true;
    let monotone = report.values.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-10));
    check(&mut all, "levels_monotone", 1.0, 0.0, monotone);
    let ratio = report.values.last().unwrap_or(&0.0) / report.values.first().unwrap_or(&1.0);
    if params.lambda > critical {
        check(&mut all, "complete_blowup_ratio", ratio, 1e3, report.blew_up);
    } else {
        check(
            &mut all,
            "truncation_converged",
            *report.growth_ratios.last().unwrap_or(&f64::NAN),
            1.01,
            report.converged && !report.blew_up,
        );
    }
    println!(
        "info=log_envelope_ok value={} (c={}, eta={})",
        report.log_envelope_ok, cfg.envelope_c, cfg.envelope_eta
    );

    let mut rows = Vec::new();
    for (i, &n) in report.n_levels.iter().enumerate() {
        let growth = if i == 0 { f64::NAN } else { report.growth_ratios[i - 1] };
        rows.push(vec![i64::from(n).into(), report.values[i].into(), growth.into()]);
    }
    write_csv(&out.join("blowup.csv"), &["n", "probe_value", "growth_ratio"], &rows)?;
    Ok(exit_code(all))
}

pub fn spaces(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let critical = critical_constant(cfg)?;
    let params = cfg.params_with(cfg.resolve_lambda(critical))?;
    let coarse = build_grid(cfg.r_outer, cfg.m, cfg.grading)?;
    let fine = build_grid(cfg.r_outer, cfg.m * 2, cfg.grading)?;
    let mut all = true;
    let mut rows = Vec::new();

    let tol = 1e-3;
    let reports = run_norm_equivalence(&params, &cfg.beta_list, &profile_battery(&coarse), tol)?;
    let refined = run_norm_equivalence(&params, &cfg.beta_list, &profile_battery(&fine), tol)?;
    for (a, b) in reports.iter().zip(&refined) {
        let spread = a.ratio_max / a.ratio_min;
        let spread_fine = b.ratio_max / b.ratio_min;
        let change = (spread_fine - spread).abs() / spread;
        check(
            &mut all,
            &format!("equivalence_stable_beta_{}", a.beta),
            change,
            0.1,
            spread.is_finite() && change <= 0.1,
        );
        if a.beta == 0.0 {
            let off = (a.ratio_max - 1.0).abs().max((a.ratio_min - 1.0).abs());
            check(&mut all, "beta_zero_ratio_exact", off, 0.0, off == 0.0);
        }
        for (i, (w, e)) in a.pairs.iter().enumerate() {
            rows.push(vec![
                a.beta.into(),
                (i as i64).into(),
                (*w).into(),
                (*e).into(),
                (w / e).into(),
            ]);
        }
    }
    write_csv(
        &out.join("spaces.csv"),
        &["beta", "profile", "weighted_seminorm", "substitute_seminorm", "ratio"],
        &rows,
    )?;

    // degenerate control: the seminorm of a fixed bump must keep growing as
    // the truncation radius increases
    let beta_deg = cfg.degenerate_beta.unwrap_or(-params.ps);
    let bump_grid = build_grid(4.0, cfg.m.min(100), cfg.grading)?;
    let bump = bump_profile(bump_grid, 1.0, 4.0);
    let div = run_degenerate_divergence(&params, &bump, beta_deg, tol)?;
    check(
        &mut all,
        "degenerate_divergence",
        div.values[2] / div.values[1],
        1.5,
        div.diverges,
    );
    write_csv(
        &out.join("spaces_degenerate.csv"),
        &["beta", "truncation_radius", "seminorm"],
        &div
            .radii
            .iter()
            .zip(&div.values)
            .map(|(&l, &v)| vec![beta_deg.into(), l.into(), v.into()])
            .collect::<Vec<_>>(),
    )?;

    // improved Hardy remainder at the critical coefficient
    let at_critical = cfg.params_with(critical)?;
    let hardy = run_improved_hardy(&at_critical, &cfg.q_list, &profile_battery(&coarse), tol)?;
    let worst = hardy.ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    check(&mut all, "improved_hardy_remainder", worst, -0.02, hardy.all_nonnegative);
    write_csv(
        &out.join("spaces_hardy.csv"),
        &["q", "min_remainder_ratio"],
        &hardy
            .ratios
            .iter()
            .map(|&(q, r)| vec![q.into(), r.into()])
            .collect::<Vec<_>>(),
    )?;
    Ok(exit_code(all))
}

const INEQ_SCHEMA: [&str; 9] =
    ["lemma", "p", "alpha", "C1", "C2", "samples", "violations", "worst_margin", "seed"];

pub fn inequalities(cfg: &RunConfig, out: &Path, seed: u64) -> Result<i32> {
    let p = cfg.p;
    let mut all = true;
    let mut rows = Vec::new();

    let (c1, c2) = search_constants_alge4(p, 50)?;
    let report = check_alge4(p, cfg.samples, c1, c2, seed)?;
    check(
        &mut all,
        "alge4_violations",
        report.violations as f64,
        0.0,
        report.violations == 0,
    );
    rows.push(vec![
        report.lemma.as_str().into(),
        p.into(),
        f64::NAN.into(),
        c1.into(),
        c2.into(),
        report.samples.into(),
        report.violations.into(),
        report.worst_margin.into(),
        seed.into(),
    ]);

    let constants = search_constants_algg(p, cfg.alpha, cfg.grid_size)?;
    let (violations, worst) = verify_algg(p, cfg.alpha, 10 * cfg.grid_size, constants);
    check(&mut all, "algg_violations", violations as f64, 0.0, violations == 0);
    for (lemma, a, b) in [
        ("algg_c1_c2", constants.0, constants.1),
        ("algg_c3_c4", constants.2, constants.3),
    ] {
        rows.push(vec![
            lemma.into(),
            p.into(),
            cfg.alpha.into(),
            a.into(),
            b.into(),
            (10 * cfg.grid_size as u64).into(),
            violations.into(),
            worst.into(),
            seed.into(),
        ]);
    }
    write_csv(&out.join("inequalities.csv"), &INEQ_SCHEMA, &rows)?;
    Ok(exit_code(all))
}

pub fn picone(cfg: &RunConfig, out: &Path, seed: u64) -> Result<i32> {
    let (params, op, _) = setup(cfg)?;
    let grid = op.grid.clone();
    let w_source = bump_profile(grid.clone(), 0.25 * cfg.r_outer, 0.75 * cfg.r_outer);
    let battery = profile_battery(&grid);
    let psi_list = &battery[..cfg.n_psi.min(battery.len())];
    let report = check_picone(&params, &op, &w_source, psi_list, 0.05)?;
    let mut all = true;
    check(
        &mut all,
        "picone_violations",
        report.violations as f64,
        0.05,
        report.violations == 0,
    );
    write_csv(
        &out.join("picone.csv"),
        &INEQ_SCHEMA,
        &[vec![
            report.lemma.as_str().into(),
            params.p.into(),
            f64::NAN.into(),
            report.c1.into(),
            report.c2.into(),
            report.samples.into(),
            report.violations.into(),
            report.worst_margin.into(),
            seed.into(),
        ]],
    )?;
    Ok(exit_code(all))
}

pub fn gronwall(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let (params, op, _) = setup(cfg)?;
    let config = cfg.evolution(&params);
    let grid = op.grid.clone();
    let u0 = bump_profile(grid, 0.25 * cfg.r_outer, 0.75 * cfg.r_outer).scaled(cfg.amplitude);
    let report = run_global_gronwall(&params, u0, &config, &op)?;
    let mut all = true;
    check(&mut all, "gronwall_margin", report.min_margin, 0.0, report.holds);
    let rows: Vec<Vec<Field>> = report.rows.iter().map(diag_row).collect();
    write_csv(&out.join("gronwall.csv"), &diag_schema(), &rows)?;
    Ok(exit_code(all))
}

pub fn noextinction(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let (params, op, _) = setup(cfg)?;
    let config = cfg.evolution(&params);
    let report = run_no_extinction(&params, &config, &op, cfg.t_check)?;
    let mut all = true;
    check(&mut all, "positive_everywhere", 1.0, 0.0, report.positive_everywhere);
    check(&mut all, "l2_monotone", 1.0, 0.0, report.l2_monotone);
    check(&mut all, "steady_residual", report.residual, 0.02, report.residual <= 0.02);
    let rows: Vec<Vec<Field>> = report.rows.iter().map(diag_row).collect();
    write_csv(&out.join("noextinction.csv"), &diag_schema(), &rows)?;
    Ok(exit_code(all))
}
