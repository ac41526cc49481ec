//! Brute-force verification of the algebraic inequalities behind the energy
//! estimates, empirical constant search, and the discrete Picone inequality.

use crate::error::{Error, Result};
use crate::grid::RadialFunction;
use crate::norms::{seminorm_general, SeminormDomain};
use crate::operator::{pair_with, DiscreteOperator};
use crate::params::Params;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn phi_p(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.abs().powf(p - 1.0) * t.signum()
    }
}

/// Outcome of a sampling run over one inequality family.
#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub lemma: String,
    pub p: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub samples: u64,
    pub violations: u64,
    /// Smallest normalized slack (left side minus right side) seen.
    pub worst_margin: f64,
    pub seed: u64,
}

/// Log-spaced grid on (0, 10^3] with `size` points.
fn log_grid(size: usize) -> Vec<f64> {
    (0..size)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (size - 1) as f64))
        .collect()
}

/// Empirical constants (c1, c2, c3, c4) for the three power-mean
/// inequalities, from a log grid with b normalized to 1 (all three are
/// scale-invariant). c4 is classical only for alpha >= 1.
pub fn search_constants_algg(p: f64, alpha: f64, grid_size: usize) -> Result<(f64, f64, f64, f64)> {
    if !(p >= 1.0) || !(alpha > 0.0) || grid_size < 2 {
        return Err(Error::InvalidParams(format!(
            "need p >= 1, alpha > 0, grid >= 2; got p={p}, alpha={alpha}, grid={grid_size}"
        )));
    }
    let e = (p + alpha - 1.0) / p;
    let mut c12: f64 = 1.0;
    let mut c3 = f64::INFINITY;
    let mut c4: f64 = 0.0;
    for a in log_grid(grid_size) {
        c12 = c12.max((a + 1.0).powf(alpha) / (a.powf(alpha) + 1.0));
        if a != 1.0 {
            let denom = (a.powf(e) - 1.0).abs().powf(p);
            c3 = c3.min(phi_p(a - 1.0, p) * (a.powf(alpha) - 1.0) / denom);
            c4 = c4.max((a + 1.0).powf(alpha - 1.0) * (a - 1.0).abs().powf(p) / denom);
        }
    }
    Ok((c12 * 1.05, c12 * 1.05, c3 / 1.05, c4 * 1.05))
}

/// Recounts violations of the three inequalities at the given constants on a
/// fresh (usually denser) grid; 0 means the constants are validated.
pub fn verify_algg(
    p: f64,
    alpha: f64,
    grid_size: usize,
    constants: (f64, f64, f64, f64),
) -> (u64, f64) {
    let (c1, c2, c3, c4) = constants;
    let e = (p + alpha - 1.0) / p;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for a in log_grid(grid_size) {
        let mut record = |lhs: f64, rhs: f64| {
            let scale = lhs.abs().max(rhs.abs()).max(1e-300);
            let margin = (lhs - rhs) / scale;
            worst = worst.min(margin);
            if margin < -1e-12 {
                violations += 1;
            }
        };
        record(c1 * a.powf(alpha) + c2, (a + 1.0).powf(alpha));
        if a != 1.0 {
            let denom = (a.powf(e) - 1.0).abs().powf(p);
            record(phi_p(a - 1.0, p) * (a.powf(alpha) - 1.0), c3 * denom);
            if alpha >= 1.0 {
                record(c4 * denom, (a + 1.0).powf(alpha - 1.0) * (a - 1.0).abs().powf(p));
            }
        }
    }
    (violations, worst)
}

/// Left side minus right side of the two-parameter inequality
/// phi_p(a1-a2)(a1 b1 - a2 b2) >= C1 |a1 b1^{1/p} - a2 b2^{1/p}|^p
///                              - C2 max(|a1|,|a2|)^p |b1^{1/p} - b2^{1/p}|^p,
/// normalized by the magnitude of the terms involved.
fn alge4_margin(p: f64, c1: f64, c2: f64, a1: f64, a2: f64, b1: f64, b2: f64) -> f64 {
    let lhs = phi_p(a1 - a2, p) * (a1 * b1 - a2 * b2);
    let t1 = c1 * (a1 * b1.powf(1.0 / p) - a2 * b2.powf(1.0 / p)).abs().powf(p);
    let t2 = c2 * a1.abs().max(a2.abs()).powf(p) * (b1.powf(1.0 / p) - b2.powf(1.0 / p)).abs().powf(p);
    let scale = lhs.abs().max(t1).max(t2).max(1e-300);
    (lhs - t1 + t2) / scale
}

/// Structured (a1, a2, b1, b2) families mirroring the case split of the
/// inequality's proof: normalized pairs over a delta/theta grid, sign flips,
/// mixed signs, and the degenerate edges.
fn alge4_structured(p: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    let deltas: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
    let thetas: Vec<f64> = (0..=60).map(|i| 3.0 * i as f64 / 60.0).collect();
    for &d in &deltas {
        for &th in &thetas {
            let (a1, a2, b1, b2) = (1.0, d, 1.0, th.powf(p));
            out.push((a1, a2, b1, b2));
            out.push((-a1, -a2, b1, b2));
            out.push((a1, -a2, b1, b2));
            // boundary branches of the case split in exact position
            if d > 0.0 {
                out.push((a1, d, 1.0, d)); // theta = delta^{1/p}
                out.push((a1, d, 1.0, d.powf(p))); // theta = delta
            }
        }
    }
    // degenerate edges treated explicitly
    out.push((0.0, 0.0, 1.0, 2.0));
    out.push((1.0, 1.0, 3.0, 0.5));
    out.push((2.0, -1.0, 0.0, 0.0));
    out.push((1.0, 0.5, 1.0, 1.0));
    out.push((1.0, 0.0, 0.0, 5.0));
    out.push((0.0, 1.0, 5.0, 0.0));
    out
}

/// Tests the two-parameter inequality on random tuples plus the structured
/// families; violations are reported, never thrown.
pub fn check_alge4(p: f64, samples: u64, c1: f64, c2: f64, seed: u64) -> Result<InequalityReport> {
    if !(p > 1.0 && p < 2.0) || !(c1 > 0.0 && c1 < 1.0 && c2 >= 1.0) {
        return Err(Error::InvalidParams(format!(
            "need 1 < p < 2 and 0 < C1 < 1 <= C2; got p={p}, C1={c1}, C2={c2}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0u64;
    let mut worst = f64::INFINITY;
    let mut count = 0u64;
    let mut record = |m: f64| {
        worst = worst.min(m);
        if m < -1e-12 {
            violations += 1;
        }
        count += 1;
    };
    for _ in 0..samples {
        let a1 = rng.gen_range(-10.0..10.0);
        let a2 = rng.gen_range(-10.0..10.0);
        let b1 = rng.gen_range(0.0..10.0);
        let b2 = rng.gen_range(0.0..10.0);
        record(alge4_margin(p, c1, c2, a1, a2, b1, b2));
    }
    for (a1, a2, b1, b2) in alge4_structured(p) {
        record(alge4_margin(p, c1, c2, a1, a2, b1, b2));
    }
    Ok(InequalityReport {
        lemma: "alge4".into(),
        p,
        alpha: f64::NAN,
        c1,
        c2,
        samples: count,
        violations,
        worst_margin: worst,
        seed,
    })
}

/// Picks (C1, C2) by the one-parameter recipe C1 = (1+eps)^{1-p},
/// C2 = max(1, C1 (1+1/eps)^{p-1}) at the eps maximizing C1/C2, then
/// validates by sampling; on violation C1 shrinks and C2 grows (both moves
/// weaken the claim, so the first clean sample wins).
pub fn search_constants_alge4(p: f64, grid_size: usize) -> Result<(f64, f64)> {
    if !(p > 1.0 && p < 2.0) || grid_size < 2 {
        return Err(Error::InvalidParams(format!(
            "need 1 < p < 2 and grid >= 2; got p={p}, grid={grid_size}"
        )));
    }
    let mut best = (0.0f64, 1.0f64);
    for i in 0..grid_size {
        let eps = 0.1 + (5.0 - 0.1) * i as f64 / (grid_size - 1) as f64;
        let c1 = (1.0 + eps).powf(1.0 - p);
        let c2 = 1.0f64.max(c1 * (1.0 + 1.0 / eps).powf(p - 1.0));
        if c1 / c2 > best.0 / best.1 {
            best = (c1, c2);
        }
    }
    let (mut c1, mut c2) = best;
    for _ in 0..=20 {
        let report = check_alge4(p, 20_000, c1, c2, 0x5eed)?;
        if report.violations == 0 {
            return Ok((c1, c2));
        }
        c1 *= 0.9;
        c2 *= 1.25;
    }
    Err(Error::SearchFailure(format!("no validated constants for p = {p}")))
}

/// Solves op(w) = source for a positive profile w by damped pseudo-time
/// stepping with frozen weights.
pub fn solve_for_source(
    params: &Params,
    op: &DiscreteOperator,
    source: &[f64],
    tol: f64,
) -> Result<RadialFunction> {
    let grid = op.grid.clone();
    if source.len() != grid.m || source.iter().any(|&v| v < 0.0) || !source.iter().any(|&v| v > 0.0)
    {
        return Err(Error::InvalidParams(
            "source must be a nonnegative, not identically zero node vector".into(),
        ));
    }
    let src_scale = source.iter().fold(0.0f64, |a, &v| a.max(v));
    let residual = |w: &RadialFunction| -> f64 {
        let opw = op.apply(w);
        (0..grid.m).fold(0.0f64, |a, j| a.max((opw[j] - source[j]).abs()))
    };
    let floor = 1e-14 * src_scale.max(1.0);
    // one semi-implicit step (I/tau + L_W) v = w/tau + source by direct solve
    let try_step = |w: &RadialFunction, frozen: &crate::operator::FrozenOp, tau: f64| {
        let rhs: Vec<f64> = (0..grid.m).map(|j| w.values[j] / tau + source[j]).collect();
        let v = frozen.solve_shifted(1.0 / tau, &rhs)?;
        Some(v.into_iter().map(|x| x.max(floor)).collect::<Vec<f64>>())
    };
    let mut w = RadialFunction::from_fn(grid.clone(), |_| src_scale.powf(1.0 / (params.p - 1.0)));
    let mut res = residual(&w);
    let mut tau = 1.0;
    for _ in 0..400 {
        if res <= tol * src_scale {
            return Ok(w);
        }
        let frozen = op.freeze(&w, 1e-12 * w.max_abs().max(1.0));
        let mut accepted = false;
        for _ in 0..60 {
            if let Some(v) = try_step(&w, &frozen, tau) {
                let cand = RadialFunction::new(grid.clone(), v)?;
                let cand_res = residual(&cand);
                // accept only residual-non-increasing steps; rejection
                // halves the pseudo-time step
                if cand_res.is_finite() && cand_res <= res * (1.0 + 1e-9) && cand.values != w.values {
                    w = cand;
                    res = cand_res;
                    tau *= 4.0;
                    accepted = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        if !accepted {
            // the residual floor is set by the quadrature rule's own
            // consistency error, so a stall within tolerance is a solve
            break;
        }
    }
    if res <= tol * src_scale {
        return Ok(w);
    }
    Err(Error::NonConvergence(format!(
        "pseudo-time solve for op(w) = source stalled at residual {res:.3e}"
    )))
}

/// Discrete Picone inequality: for w solving op(w) = source > 0, every test
/// profile psi satisfies
///   1/2 [psi]_p^p >= (1 - tol) * int (op(w)/w^{p-1}) |psi|^p.
pub fn check_picone(
    params: &Params,
    op: &DiscreteOperator,
    w_source: &RadialFunction,
    psi_list: &[RadialFunction],
    tol: f64,
) -> Result<InequalityReport> {
    let grid = op.grid.clone();
    let w = solve_for_source(params, op, &w_source.values, tol)?;
    let opw = op.apply(&w);
    let floor = -tol * opw.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if opw.iter().any(|&v| v < floor) {
        return Err(Error::OracleUnavailable(
            "constructed w does not satisfy op(w) >= 0 within tolerance".into(),
        ));
    }
    let p = params.p;
    let mut violations = 0u64;
    let mut worst = f64::INFINITY;
    for psi in psi_list {
        let lhs = 0.5
            * seminorm_general(params, psi, p, params.mu_op(), 0.0, SeminormDomain::Full, 1e-5)?;
        let ratio: Vec<f64> = (0..grid.m)
            .map(|j| opw[j] / w.values[j].powf(p - 1.0) * psi.values[j].abs().powf(p - 1.0))
            .collect();
        let psi_abs = RadialFunction::new(
            grid.clone(),
            psi.values.iter().map(|v| v.abs()).collect(),
        )?;
        let rhs = pair_with(params, &grid, &ratio, &psi_abs);
        let margin = (lhs - (1.0 - tol) * rhs) / lhs.abs().max(rhs.abs()).max(1e-300);
        worst = worst.min(margin);
        if margin < 0.0 {
            violations += 1;
        }
    }
    Ok(InequalityReport {
        lemma: "picone".into(),
        p,
        alpha: f64::NAN,
        c1: 1.0 - tol,
        c2: f64::NAN,
        samples: psi_list.len() as u64,
        violations,
        worst_margin: worst,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subadditivity_below_one() {
        let (c1, c2, _, _) = search_constants_algg(1.5, 0.7, 200).unwrap();
        // for alpha <= 1 the sharp constants are 1; the 5% margin stays close
        assert!(c1 <= 1.06 && c2 <= 1.06, "({c1}, {c2})");
    }

    #[test]
    fn quadratic_case_is_exact() {
        let (_, _, c3, _) = search_constants_algg(2.0, 1.0, 400).unwrap();
        // phi_2(a-b)(a-b) = (a-b)^2 exactly, so c3 sits at 1 under the margin
        assert!((c3 - 1.0 / 1.05).abs() < 1e-9, "c3 = {c3}");
    }

    #[test]
    fn denser_grid_revalidates() {
        let constants = search_constants_algg(1.5, 2.0, 300).unwrap();
        let (violations, worst) = verify_algg(1.5, 2.0, 3000, constants);
        assert_eq!(violations, 0, "worst margin {worst}");
    }

    #[test]
    fn recipe_arithmetic() {
        // eps = 1 for p = 1.5: C1 = 2^{-1/2}, C2 = max(1, C1 * 2^{1/2}) = 1
        let c1 = (1.0f64 + 1.0).powf(1.0 - 1.5);
        let c2 = 1.0f64.max(c1 * 2.0f64.powf(0.5));
        assert!((c1 - 0.7071067811865476).abs() < 1e-15);
        assert!((c2 - 1.0).abs() < 1e-12, "{c2}");
    }

    #[test]
    fn searched_constants_pass_sampling() {
        let (c1, c2) = search_constants_alge4(1.5, 50).unwrap();
        assert!(c1 < 1.0 && c2 >= 1.0);
        let report = check_alge4(1.5, 20_000, c1, c2, 7).unwrap();
        assert_eq!(report.violations, 0, "worst {}", report.worst_margin);
    }

    #[test]
    fn alge4_scale_invariance() {
        let p = 1.5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (a1, a2) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let (b1, b2) = (rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0));
            let (c, d) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
            let m1 = alge4_margin(p, 0.5, 1.5, a1, a2, b1, b2);
            let m2 = alge4_margin(p, 0.5, 1.5, c * a1, c * a2, d * b1, d * b2);
            // both sides scale by c^p d, so the normalized margin is unchanged
            assert!((m1 - m2).abs() < 1e-9, "{m1} vs {m2}");
        }
    }

    #[test]
    fn equal_a_and_equal_b_edges_hold() {
        for &(a1, a2, b1, b2) in
            &[(3.0, 3.0, 1.0, 7.0), (-2.0, -2.0, 0.5, 4.0), (1.0, 0.3, 2.0, 2.0)]
        {
            assert!(alge4_margin(1.5, 0.7, 1.0, a1, a2, b1, b2) >= -1e-12);
        }
    }
}
