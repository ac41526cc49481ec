//! Plain `key = value` run configuration with strict validation: unknown
//! keys, duplicates, and out-of-range values are rejected with line numbers.

use anyhow::{anyhow, bail, Context, Result};
use frachardy_core::evolution::{EvolutionConfig, PotentialSpec, Scheme};
use frachardy_core::Params;
use std::collections::BTreeMap;

const KNOWN_KEYS: &[&str] = &[
    // problem parameters
    "N", "s", "p", "lambda", "lambda_factor",
    // grid
    "R", "M", "g",
    // discrete operator
    "op_level",
    // evolution
    "scheme", "tau", "t_end", "potential", "n", "source_q", "safety", "eps_reg",
    "inner_tol", "inner_max_iters", "save_interval", "nu_plus_one",
    // experiment knobs
    "amplitude", "n_levels", "r_probe", "envelope_c", "envelope_eta",
    "beta_list", "degenerate_beta", "alpha", "samples", "grid_size", "q_list",
    "n_psi", "t_check",
];

/// Parsed and validated configuration; optional fields keep their defaults
/// when the key is absent.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n_dim: u32,
    pub s: f64,
    pub p: f64,
    /// Absolute coefficient, if given directly.
    pub lambda: Option<f64>,
    /// Multiple of the critical constant, resolved at runtime.
    pub lambda_factor: Option<f64>,
    pub r_outer: f64,
    pub m: usize,
    pub grading: f64,
    pub op_level: u32,
    pub scheme: Scheme,
    pub tau: f64,
    pub t_end: f64,
    pub potential_kind: String,
    pub trunc_n: u32,
    pub source_q: Option<f64>,
    pub safety: f64,
    pub eps_reg: f64,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub save_interval: Option<f64>,
    pub nu_plus_one: Option<f64>,
    pub amplitude: f64,
    pub n_levels: Vec<u32>,
    pub r_probe: Option<f64>,
    pub envelope_c: f64,
    pub envelope_eta: f64,
    pub beta_list: Vec<f64>,
    pub degenerate_beta: Option<f64>,
    pub alpha: f64,
    pub samples: u64,
    pub grid_size: usize,
    pub q_list: Vec<f64>,
    pub n_psi: usize,
    pub t_check: f64,
}

fn parse_lines(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{raw}`", idx + 1))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key `{key}`", idx + 1);
        }
        if map.insert(key.clone(), value).is_some() {
            bail!("line {}: duplicate key `{key}`", idx + 1);
        }
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e| anyhow!("key `{key}` = `{v}`: {e}")),
    }
}

fn get_opt<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|e| anyhow!("key `{key}` = `{v}`: {e}")),
    }
}

fn get_list<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: &[T],
) -> Result<Vec<T>>
where
    T: Clone,
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(default.to_vec()),
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| anyhow!("key `{key}` item `{s}`: {e}")))
            .collect(),
    }
}

/// Parses and fully validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let map = parse_lines(text)?;
    let config = RunConfig {
        n_dim: get(&map, "N", 3u32)?,
        s: get(&map, "s", 0.5)?,
        p: get(&map, "p", 1.6)?,
        lambda: get_opt(&map, "lambda")?,
        lambda_factor: get_opt(&map, "lambda_factor")?,
        r_outer: get(&map, "R", 1.0)?,
        m: get(&map, "M", 200usize)?,
        grading: get(&map, "g", 3.0)?,
        op_level: get(&map, "op_level", 1u32)?,
        scheme: match map.get("scheme").map(String::as_str) {
            None | Some("semi_implicit") => Scheme::SemiImplicit,
            Some("explicit") => Scheme::Explicit,
            Some(other) => bail!("key `scheme`: expected explicit|semi_implicit, got `{other}`"),
        },
        tau: get(&map, "tau", 1e-4)?,
        t_end: get(&map, "t_end", 1.0)?,
        potential_kind: get(&map, "potential", "exact".to_string())?,
        trunc_n: get(&map, "n", 16u32)?,
        source_q: get_opt(&map, "source_q")?,
        safety: get(&map, "safety", 0.2)?,
        eps_reg: get(&map, "eps_reg", 1e-12)?,
        inner_tol: get(&map, "inner_tol", 1e-10)?,
        inner_max_iters: get(&map, "inner_max_iters", 500usize)?,
        save_interval: get_opt(&map, "save_interval")?,
        nu_plus_one: get_opt(&map, "nu_plus_one")?,
        amplitude: get(&map, "amplitude", 1.0)?,
        n_levels: get_list(&map, "n_levels", &[4u32, 8, 16, 32, 64])?,
        r_probe: get_opt(&map, "r_probe")?,
        envelope_c: get(&map, "envelope_c", 1e-3)?,
        envelope_eta: get(&map, "envelope_eta", 0.5)?,
        beta_list: get_list(&map, "beta_list", &[-0.3, 0.0, 0.2])?,
        degenerate_beta: get_opt(&map, "degenerate_beta")?,
        alpha: get(&map, "alpha", 2.0)?,
        samples: get(&map, "samples", 100_000u64)?,
        grid_size: get(&map, "grid_size", 300usize)?,
        q_list: get_list(&map, "q_list", &[1.2, 1.4])?,
        n_psi: get(&map, "n_psi", 10usize)?,
        t_check: get(&map, "t_check", 1.0)?,
    };
    validate(&config)?;
    Ok(config)
}

fn validate(c: &RunConfig) -> Result<()> {
    // delegate the parameter ranges to the core validator
    Params::new(c.n_dim, c.s, c.p, c.lambda.unwrap_or(0.0).max(0.0))
        .map_err(|e| anyhow!("{e}"))?;
    if c.lambda.is_some() && c.lambda_factor.is_some() {
        bail!("give either `lambda` or `lambda_factor`, not both");
    }
    if let Some(f) = c.lambda_factor {
        if !(f >= 0.0) {
            bail!("lambda_factor must be >= 0, got {f}");
        }
    }
    if !(c.r_outer > 0.0) || c.m < 8 || !(c.grading >= 1.0) {
        bail!("grid needs R > 0, M >= 8, g >= 1; got R={}, M={}, g={}", c.r_outer, c.m, c.grading);
    }
    if !(c.tau > 0.0) || !(c.safety > 0.0 && c.safety < 1.0) {
        bail!("need tau > 0 and safety in (0,1); got tau={}, safety={}", c.tau, c.safety);
    }
    if !["exact", "regularized", "minimum"].contains(&c.potential_kind.as_str()) {
        bail!("potential must be exact|regularized|minimum, got `{}`", c.potential_kind);
    }
    if c.n_levels.windows(2).any(|w| w[0] >= w[1]) {
        bail!("n_levels must be strictly increasing");
    }
    Ok(())
}

impl RunConfig {
    /// Resolves the coefficient, computing the critical constant if the
    /// config gave a multiple of it.
    pub fn resolve_lambda(&self, critical: f64) -> f64 {
        match (self.lambda, self.lambda_factor) {
            (Some(l), _) => l,
            (None, Some(f)) => f * critical,
            (None, None) => 0.5 * critical,
        }
    }

    pub fn params_with(&self, lambda: f64) -> Result<Params> {
        Params::new(self.n_dim, self.s, self.p, lambda).map_err(|e| anyhow!("{e}"))
    }

    pub fn potential(&self) -> PotentialSpec {
        match self.potential_kind.as_str() {
            "regularized" => PotentialSpec::Regularized { n: self.trunc_n },
            "minimum" => PotentialSpec::Minimum { n: self.trunc_n },
            _ => PotentialSpec::Exact,
        }
    }

    pub fn evolution(&self, params: &Params) -> EvolutionConfig {
        let mut ec = EvolutionConfig::new(params, self.scheme, self.tau, self.t_end);
        ec.potential = self.potential();
        ec.source_q = self.source_q;
        ec.lambda = params.lambda;
        ec.safety = self.safety;
        ec.eps_reg = self.eps_reg;
        ec.inner_tol = self.inner_tol;
        ec.inner_max_iters = self.inner_max_iters;
        if let Some(si) = self.save_interval {
            ec.save_interval = si;
        }
        if let Some(nu) = self.nu_plus_one {
            ec.nu_plus_one = nu;
        }
        ec
    }
}

/// Reads and parses a config file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}
