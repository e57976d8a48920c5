//! Configuration-driven experiments: per-step CSV output, horizon sweeps and
//! log-log rate fits.
//!
//! Seeds: for run index j the realization uses `derive_seed(base_seed, "env", j)`
//! and the policy `derive_seed(base_seed, "policy", j)`, so every policy and
//! horizon in one config plays against the same environment randomness
//! (shorter horizons see a prefix of the longer realization).

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{sample_realization, target_distribution, EnvironmentSpec, NoiseModel};
use crate::error::{Error, Result};
use crate::policy::{default_exploration, simulate, PolicyKind};
use crate::regret::{environment_averaged_regret, regret_series, Averaging, RegretSpec};
use crate::rng::{derive_seed, SplitMix64};
use crate::simplex::{InverseTemperature, ProbDist, RewardVector};

/// Means below this are dropped from log-log fits.
pub const FIT_FLOOR: f64 = 1e-12;

/// Minimum number of horizons for a sweep and of points for a fit.
pub const MIN_FIT_POINTS: usize = 4;

/// How the mean rewards are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardSource {
    Explicit(Vec<f64>),
    /// r_i i.i.d. uniform on [0, 1) from the stream `derive_seed(seed, "rewards", 0)`.
    Uniform01 {
        seed: u64,
    },
}

impl RewardSource {
    pub fn materialize(&self, k: usize) -> Result<RewardVector> {
        match self {
            RewardSource::Explicit(v) => {
                if v.len() != k {
                    return Err(Error::InvalidConfig(format!(
                        "rewards.explicit has {} entries but k = {k}",
                        v.len()
                    )));
                }
                RewardVector::new(v.clone())
            }
            RewardSource::Uniform01 { seed } => {
                let mut rng = SplitMix64::new(derive_seed(*seed, "rewards", 0));
                RewardVector::new((0..k).map(|_| rng.next_f64()).collect())
            }
        }
    }
}

/// One policy entry. `m` defaults to ⌈36σ² ln T⌉ clamped to [1, ⌊T/k⌋]
/// per horizon; `beta` is required for `beta_ase`, `weights` for `fixed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<InverseTemperature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<ProbDist>,
}

const POLICY_KINDS: [&str; 7] = [
    "ase",
    "as",
    "beta_ase",
    "greedy_etc",
    "uniform",
    "oracle",
    "fixed",
];

impl PolicyConfig {
    pub fn new(kind: &str) -> Self {
        PolicyConfig {
            kind: kind.to_string(),
            m: None,
            beta: None,
            weights: None,
        }
    }

    fn uses_m(&self) -> bool {
        matches!(self.kind.as_str(), "ase" | "beta_ase" | "greedy_etc")
    }

    /// Label written to the `policy` column. No commas, so it never needs
    /// quoting.
    pub fn label(&self) -> String {
        let mut params = Vec::new();
        if let Some(m) = self.m {
            params.push(format!("M={m}"));
        }
        if let Some(b) = self.beta {
            params.push(format!("beta={b}"));
        }
        if params.is_empty() {
            self.kind.clone()
        } else {
            format!("{}({})", self.kind, params.join(";"))
        }
    }

    /// The concrete policy for one horizon.
    pub fn resolve(&self, k: usize, horizon: usize, sigma: f64) -> Result<PolicyKind> {
        let m = self
            .m
            .unwrap_or_else(|| default_exploration(sigma, horizon, k));
        Ok(match self.kind.as_str() {
            "ase" => PolicyKind::Ase { m },
            "as" => PolicyKind::As,
            "beta_ase" => PolicyKind::BetaAse {
                m,
                beta: self
                    .beta
                    .ok_or_else(|| Error::InvalidConfig("beta_ase requires beta".into()))?,
            },
            "greedy_etc" => PolicyKind::GreedyEtc { m },
            "uniform" => PolicyKind::Uniform,
            "oracle" => PolicyKind::Oracle,
            "fixed" => PolicyKind::Fixed(
                self.weights
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig("fixed requires weights".into()))?,
            ),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown policy kind {other:?}; expected one of {}",
                    POLICY_KINDS.join(", ")
                )))
            }
        })
    }
}

fn default_env_average_r() -> usize {
    32
}

fn default_id() -> String {
    "experiment".into()
}

/// JSON experiment description. See the README for the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub k: usize,
    pub rewards: RewardSource,
    pub noise: NoiseModel,
    pub policies: Vec<PolicyConfig>,
    pub horizons: Vec<usize>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub regrets: Vec<RegretSpec>,
    /// Inner episodes per realization for environment-averaged regrets.
    #[serde(default = "default_env_average_r")]
    pub env_average_r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates JSON text. Validation messages name the field
    /// and, when it can be found, the line it is on.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate().map_err(|e| match e {
            Error::InvalidConfig(msg) => {
                let field = msg.split([':', '[', '.']).next().unwrap_or("");
                match locate_key(text, field) {
                    Some(line) => Error::InvalidConfig(format!("line {line}: {msg}")),
                    None => Error::InvalidConfig(msg),
                }
            }
            other => other,
        })?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn environment(&self) -> Result<EnvironmentSpec> {
        EnvironmentSpec::new(self.rewards.materialize(self.k)?, self.noise)
            .map_err(|e| Error::InvalidConfig(format!("noise: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k < 2 {
            return bad(format!("k: must be >= 2, got {}", self.k));
        }
        self.rewards
            .materialize(self.k)
            .map_err(|e| Error::InvalidConfig(format!("rewards: {e}")))?;
        self.noise
            .validate()
            .map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
        if self.n_runs == 0 {
            return bad("n_runs: must be >= 1".into());
        }
        if self.env_average_r == 0 {
            return bad("env_average_r: must be >= 1".into());
        }
        if self.horizons.is_empty() {
            return bad("horizons: at least one horizon is required".into());
        }
        if let Some(t) = self.horizons.iter().find(|t| **t == 0) {
            return bad(format!("horizons: horizon must be >= 1, got {t}"));
        }
        if self.policies.is_empty() {
            return bad("policies: at least one policy is required".into());
        }
        if self.regrets.is_empty() {
            return bad("regrets: at least one regret spec is required".into());
        }
        let sigma = self.noise.sigma();
        for (i, p) in self.policies.iter().enumerate() {
            if !POLICY_KINDS.contains(&p.kind.as_str()) {
                return bad(format!(
                    "policies[{i}].kind: unknown policy {:?}; expected one of {}",
                    p.kind,
                    POLICY_KINDS.join(", ")
                ));
            }
            if p.m.is_some() && !p.uses_m() {
                return bad(format!("policies[{i}].m: not used by {}", p.kind));
            }
            if p.beta.is_some() != (p.kind == "beta_ase") {
                return bad(format!(
                    "policies[{i}].beta: required for beta_ase and only there"
                ));
            }
            if p.weights.is_some() != (p.kind == "fixed") {
                return bad(format!(
                    "policies[{i}].weights: required for fixed and only there"
                ));
            }
            if let Some(w) = &p.weights {
                if w.len() != self.k {
                    return bad(format!(
                        "policies[{i}].weights: has {} entries but k = {}",
                        w.len(),
                        self.k
                    ));
                }
            }
            if p.uses_m() || p.kind == "as" {
                for &t in &self.horizons {
                    let m = p.m.unwrap_or_else(|| default_exploration(sigma, t, self.k));
                    if m == 0 || m * self.k > t {
                        return bad(format!(
                            "policies[{i}].m: need 1 <= M <= T/k, got M = {m} for T = {t}, k = {}",
                            self.k
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

// 1-based line of the first occurrence of `"key"` in the JSON text.
fn locate_key(text: &str, key: &str) -> Option<usize> {
    if key.is_empty() {
        return None;
    }
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}

/// Formats a value with 17 significant digits; +∞ is written as `inf`.
pub fn format_float(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Fixed leading columns of the per-step CSV.
pub const ROW_COLUMNS: [&str; 10] = [
    "experiment_id",
    "policy",
    "k",
    "T",
    "M",
    "noise",
    "sigma",
    "run",
    "t",
    "fkl_start",
];

/// Header of the per-step CSV: the fixed columns then one per regret spec.
pub fn csv_header(config: &ExperimentConfig) -> String {
    let mut cols: Vec<String> = ROW_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend(config.regrets.iter().map(|s| s.to_string()));
    cols.join(",")
}

/// Execution options that do not change the output.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

fn with_pool<T: Send>(options: RunOptions, f: impl FnOnce() -> T + Send) -> Result<T> {
    match options.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[derive(Debug, Clone, Copy)]
struct WorkItem {
    policy: usize,
    horizon: usize,
    run: usize,
}

fn work_items(config: &ExperimentConfig) -> Vec<WorkItem> {
    let mut horizons = config.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    let mut items = Vec::new();
    for policy in 0..config.policies.len() {
        for &horizon in &horizons {
            for run in 0..config.n_runs {
                items.push(WorkItem {
                    policy,
                    horizon,
                    run,
                });
            }
        }
    }
    items
}

struct ItemResult {
    m: Option<usize>,
    fkl_start: usize,
    // series[spec] has one value per step.
    series: Vec<Vec<f64>>,
}

fn run_item(
    config: &ExperimentConfig,
    env: &EnvironmentSpec,
    item: WorkItem,
) -> Result<ItemResult> {
    let p = target_distribution(env);
    let kind =
        config.policies[item.policy].resolve(config.k, item.horizon, config.noise.sigma())?;
    let run = item.run as u64;
    let real = sample_realization(env, item.horizon, derive_seed(config.base_seed, "env", run))?;
    let traj = simulate(
        &kind,
        env,
        &real,
        derive_seed(config.base_seed, "policy", run),
    )?;
    let mut series = Vec::with_capacity(config.regrets.len());
    for spec in &config.regrets {
        let s = match spec.averaging {
            Averaging::PerRun => regret_series(&traj, &p, spec)?,
            Averaging::Environment => environment_averaged_regret(
                &kind,
                env,
                &real,
                &p,
                spec,
                config.env_average_r,
                derive_seed(config.base_seed, "env-average", run),
            )?,
        };
        series.push(match spec.aggregation {
            crate::regret::Aggregation::Simple => s.per_step,
            crate::regret::Aggregation::Cumulative => s.cumulative,
        });
    }
    Ok(ItemResult {
        m: kind.exploration_factor(),
        fkl_start: traj.default_fkl_start(),
        series,
    })
}

fn format_item(config: &ExperimentConfig, item: WorkItem, res: &ItemResult) -> String {
    let policy = config.policies[item.policy].label();
    let prefix = format!(
        "{},{},{},{},{},{},{},{}",
        config.id,
        policy,
        config.k,
        item.horizon,
        res.m.unwrap_or(0),
        config.noise.name(),
        format_float(config.noise.sigma()),
        item.run
    );
    let mut out = String::new();
    for t in 0..item.horizon {
        let _ = write!(out, "{prefix},{},{}", t + 1, res.fkl_start);
        for s in &res.series {
            out.push(',');
            out.push_str(&format_float(s[t]));
        }
        out.push('\n');
    }
    out
}

/// Runs every (policy, T, run) and writes the per-step CSV to `out`.
/// Rows are ordered by (policy in config order, T ascending, run, t), so the
/// bytes do not depend on the number of threads.
pub fn run<W: Write>(config: &ExperimentConfig, options: RunOptions, out: &mut W) -> Result<()> {
    config.validate()?;
    let env = config.environment()?;
    let items = work_items(config);
    writeln!(out, "{}", csv_header(config))?;
    // Batches bound memory on long horizons while keeping output order.
    let batch = config.n_runs.max(1);
    for chunk in items.chunks(batch) {
        let texts: Vec<Result<String>> = with_pool(options, || {
            chunk
                .par_iter()
                .map(|item| run_item(config, &env, *item).map(|r| format_item(config, *item, &r)))
                .collect()
        })?;
        for text in texts {
            out.write_all(text?.as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// [`run`] into a file.
pub fn run_to_path(config: &ExperimentConfig, options: RunOptions, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    run(config, options, &mut w)
}

/// Mean and standard error of the final regret for one (policy, T, spec).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub policy: String,
    pub horizon: usize,
    pub m: Option<usize>,
    pub metric: String,
    pub mean: f64,
    pub std_error: f64,
    pub runs: usize,
}

/// Least-squares fit of ln(mean regret) on ln T.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub policy: String,
    pub metric: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub horizons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// One entry per (policy, metric); `None` when fewer than
    /// [`MIN_FIT_POINTS`] usable means remain.
    pub fits: Vec<(String, String, Option<RateFit>)>,
}

impl SweepResult {
    pub fn fit(&self, policy: &str, metric: &str) -> Option<&RateFit> {
        self.fits
            .iter()
            .find(|(p, m, _)| p == policy && m == metric)
            .and_then(|(_, _, f)| f.as_ref())
    }

    pub fn point(&self, policy: &str, metric: &str, horizon: usize) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.policy == policy && p.metric == metric && p.horizon == horizon)
    }
}

/// Ordinary least squares of ln y on ln T over the points with finite
/// y ≥ [`FIT_FLOOR`]. Returns `None` with fewer than [`MIN_FIT_POINTS`].
pub fn fit_loglog(points: &[(usize, f64)]) -> Option<(f64, f64, f64, Vec<usize>)> {
    let kept: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|(_, y)| y.is_finite() && *y >= FIT_FLOOR)
        .collect();
    if kept.len() < MIN_FIT_POINTS {
        return None;
    }
    let xs: Vec<f64> = kept.iter().map(|(t, _)| (*t as f64).ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|(_, y)| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some((
        slope,
        intercept,
        r_squared,
        kept.iter().map(|(t, _)| *t).collect(),
    ))
}

fn check_grid(horizons: &[usize]) -> Result<Vec<usize>> {
    let mut grid = horizons.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidConfig(format!(
            "horizons: a sweep needs at least {MIN_FIT_POINTS} distinct horizons, got {}",
            grid.len()
        )));
    }
    let ratio = grid[1] as f64 / grid[0] as f64;
    for w in grid.windows(2) {
        let r = w[1] as f64 / w[0] as f64;
        if (r / ratio - 1.0).abs() > 0.01 {
            return Err(Error::InvalidConfig(format!(
                "horizons: a sweep needs geometric spacing, ratio {r} differs from {ratio}"
            )));
        }
    }
    Ok(grid)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every (policy, T, run), keeps the final value of each regret
/// (simple regret at T, or cumulative regret through T), and fits log-log
/// slopes of the means against T.
pub fn sweep(config: &ExperimentConfig, options: RunOptions) -> Result<SweepResult> {
    config.validate()?;
    let grid = check_grid(&config.horizons)?;
    let env = config.environment()?;
    let items = work_items(config);
    let finals: Vec<Result<(Option<usize>, Vec<f64>)>> = with_pool(options, || {
        items
            .par_iter()
            .map(|item| {
                let r = run_item(config, &env, *item)?;
                Ok((r.m, r.series.iter().map(|s| s[s.len() - 1]).collect()))
            })
            .collect()
    })?;
    let finals = finals.into_iter().collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    let mut fits = Vec::new();
    let n = config.n_runs;
    for (pi, policy) in config.policies.iter().enumerate() {
        let label = policy.label();
        for (si, spec) in config.regrets.iter().enumerate() {
            let metric = spec.to_string();
            let mut curve = Vec::new();
            for (ti, &horizon) in grid.iter().enumerate() {
                let base = (pi * grid.len() + ti) * n;
                let values: Vec<f64> = finals[base..base + n].iter().map(|(_, v)| v[si]).collect();
                let (mean, std_error) = mean_se(&values);
                curve.push((horizon, mean));
                points.push(SweepPoint {
                    policy: label.clone(),
                    horizon,
                    m: finals[base].0,
                    metric: metric.clone(),
                    mean,
                    std_error,
                    runs: n,
                });
            }
            let fit = fit_loglog(&curve).map(|(slope, intercept, r_squared, horizons)| RateFit {
                policy: label.clone(),
                metric: metric.clone(),
                slope,
                intercept,
                r_squared,
                horizons,
            });
            fits.push((label.clone(), metric, fit));
        }
    }
    Ok(SweepResult { points, fits })
}

/// Aggregate CSV: one row per (policy, T, metric).
pub fn write_sweep_points<W: Write>(
    config: &ExperimentConfig,
    res: &SweepResult,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "experiment_id,policy,T,M,metric,mean,std_error,runs")?;
    for p in &res.points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            config.id,
            p.policy,
            p.horizon,
            p.m.unwrap_or(0),
            p.metric,
            format_float(p.mean),
            format_float(p.std_error),
            p.runs
        )?;
    }
    Ok(())
}

/// Rate table CSV: one row per (policy, metric); empty fit columns when the
/// fit was skipped.
pub fn write_rate_fits<W: Write>(res: &SweepResult, out: &mut W) -> Result<()> {
    writeln!(out, "policy,metric,slope,intercept,r_squared,horizons")?;
    for (policy, metric, fit) in &res.fits {
        match fit {
            Some(f) => writeln!(
                out,
                "{policy},{metric},{},{},{},{}",
                format_float(f.slope),
                format_float(f.intercept),
                format_float(f.r_squared),
                f.horizons
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            )?,
            None => writeln!(out, "{policy},{metric},,,,")?,
        }
    }
    Ok(())
}
