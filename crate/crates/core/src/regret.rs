//! Statistical distances and regret functionals.
//!
//! A regret is named by four choices (distance, level, aggregation,
//! averaging) and written as a dotted string such as
//! `rkl.action.cumulative.per_run`. Policy-level regrets compare π̂_t with
//! the target p, action-level regrets compare the empirical action
//! distribution q_t with p.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::environment::{sample_realization, EnvironmentSpec, Realization};
use crate::error::{Error, Result};
use crate::policy::{simulate, PolicyKind, Trajectory};
use crate::rng::derive_seed;
use crate::simplex::{entropy, neumaier_sum, softmax, InverseTemperature, ProbDist, RewardVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    /// ½ Σ |q_i − p_i|.
    Tv,
    /// Reverse KL, Σ q_i log(q_i / p_i).
    Rkl,
    /// Forward KL, Σ p_i log(p_i / q_i).
    Fkl,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [DistanceKind::Tv, DistanceKind::Rkl, DistanceKind::Fkl];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Tv => "tv",
            DistanceKind::Rkl => "rkl",
            DistanceKind::Fkl => "fkl",
        }
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(DistanceKind::Tv),
            "rkl" => Ok(DistanceKind::Rkl),
            "fkl" => Ok(DistanceKind::Fkl),
            other => Err(Error::InvalidInput(format!(
                "unknown distance {other:?} (expected tv, rkl or fkl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Policy,
    Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    Simple,
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Averaging {
    PerRun,
    /// Distance applied to the average over policy randomness, with the
    /// realization held fixed.
    Environment,
}

/// One regret functional. `fkl_start` overrides the first step counted by
/// cumulative policy-level f-KL regret; `None` uses the trajectory default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegretSpec {
    pub distance: DistanceKind,
    pub level: Level,
    pub aggregation: Aggregation,
    pub averaging: Averaging,
    pub fkl_start: Option<usize>,
}

impl RegretSpec {
    pub fn new(distance: DistanceKind, level: Level, aggregation: Aggregation) -> Self {
        RegretSpec {
            distance,
            level,
            aggregation,
            averaging: Averaging::PerRun,
            fkl_start: None,
        }
    }

    pub fn environment_averaged(mut self) -> Self {
        self.averaging = Averaging::Environment;
        self
    }

    fn skips_prefix(&self) -> bool {
        self.distance == DistanceKind::Fkl
            && self.level == Level::Policy
            && self.aggregation == Aggregation::Cumulative
    }
}

impl fmt::Display for RegretSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.level {
            Level::Policy => "policy",
            Level::Action => "action",
        };
        let aggregation = match self.aggregation {
            Aggregation::Simple => "simple",
            Aggregation::Cumulative => "cumulative",
        };
        let averaging = match self.averaging {
            Averaging::PerRun => "per_run",
            Averaging::Environment => "environment",
        };
        write!(
            f,
            "{}.{level}.{aggregation}.{averaging}",
            self.distance.name()
        )?;
        if let Some(start) = self.fkl_start {
            write!(f, "@{start}")?;
        }
        Ok(())
    }
}

impl FromStr for RegretSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidInput(format!("bad regret spec {s:?}: {why}"));
        let (body, fkl_start) = match s.split_once('@') {
            Some((body, start)) => {
                let start: usize = start
                    .parse()
                    .map_err(|_| bad("fkl start after '@' must be an integer"))?;
                if start == 0 {
                    return Err(bad("fkl start must be >= 1"));
                }
                (body, Some(start))
            }
            None => (s, None),
        };
        let parts: Vec<&str> = body.split('.').collect();
        if parts.len() != 4 {
            return Err(bad("expected distance.level.aggregation.averaging"));
        }
        let distance = parts[0].parse()?;
        let level = match parts[1] {
            "policy" => Level::Policy,
            "action" => Level::Action,
            _ => return Err(bad("level must be policy or action")),
        };
        let aggregation = match parts[2] {
            "simple" => Aggregation::Simple,
            "cumulative" => Aggregation::Cumulative,
            _ => return Err(bad("aggregation must be simple or cumulative")),
        };
        let averaging = match parts[3] {
            "per_run" => Averaging::PerRun,
            "environment" => Averaging::Environment,
            _ => return Err(bad("averaging must be per_run or environment")),
        };
        Ok(RegretSpec {
            distance,
            level,
            aggregation,
            averaging,
            fkl_start,
        })
    }
}

impl Serialize for RegretSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RegretSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Per-step regret values and their running sum. Index 0 is step t = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSeries {
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Steps before this one were excluded (set to 0) from `per_step`.
    pub fkl_start: Option<usize>,
}

impl RegretSeries {
    fn from_per_step(per_step: Vec<f64>, fkl_start: Option<usize>) -> Self {
        let mut running = 0.0;
        let cumulative = per_step
            .iter()
            .map(|v| {
                running += v;
                running
            })
            .collect();
        RegretSeries {
            per_step,
            cumulative,
            fkl_start,
        }
    }

    pub fn len(&self) -> usize {
        self.per_step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step.is_empty()
    }

    /// The regret value at step `t` (1-based) for the given aggregation.
    pub fn value_at(&self, t: usize, aggregation: Aggregation) -> f64 {
        match aggregation {
            Aggregation::Simple => self.per_step[t - 1],
            Aggregation::Cumulative => self.cumulative[t - 1],
        }
    }

    /// Value at the horizon.
    pub fn last(&self, aggregation: Aggregation) -> f64 {
        self.value_at(self.len(), aggregation)
    }
}

pub(crate) fn distance_slices(kind: DistanceKind, q: &[f64], p: &[f64]) -> f64 {
    match kind {
        DistanceKind::Tv => 0.5 * neumaier_sum(q.iter().zip(p).map(|(a, b)| (a - b).abs())),
        DistanceKind::Rkl => kl(q, p),
        DistanceKind::Fkl => kl(p, q),
    }
}

// Σ a_i log(a_i / b_i) with 0·log 0 = 0; +∞ when some a_i > 0 has b_i = 0.
fn kl(a: &[f64], b: &[f64]) -> f64 {
    let mut terms = Vec::with_capacity(a.len());
    for (ai, bi) in a.iter().zip(b) {
        if *ai <= 0.0 {
            continue;
        }
        if *bi <= 0.0 {
            return f64::INFINITY;
        }
        terms.push(ai * (ai / bi).ln());
    }
    neumaier_sum(terms).max(0.0)
}

/// d(q, p) for the chosen distance. May be +∞ for the KL kinds.
pub fn distance(kind: DistanceKind, q: &ProbDist, p: &ProbDist) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(distance_slices(kind, q.weights(), p.weights()))
}

fn series_from_rows<'a, I>(
    rows: I,
    p: &ProbDist,
    spec: &RegretSpec,
    fkl_start: usize,
) -> RegretSeries
where
    I: Iterator<Item = &'a [f64]>,
{
    let skip = spec.skips_prefix();
    let per_step = rows
        .enumerate()
        .map(|(i, row)| {
            if skip && i + 1 < fkl_start {
                0.0
            } else {
                distance_slices(spec.distance, row, p.weights())
            }
        })
        .collect();
    RegretSeries::from_per_step(per_step, skip.then_some(fkl_start))
}

/// Per-run regret series of one trajectory against target `p`.
///
/// For cumulative policy-level f-KL, steps before the f-KL start contribute
/// zero so that the series stays the prefix sum of its per-step values. An
/// `Environment` averaging spec is evaluated as the single-run estimate.
pub fn regret_series(traj: &Trajectory, p: &ProbDist, spec: &RegretSpec) -> Result<RegretSeries> {
    if p.len() != traj.k {
        return Err(Error::DimensionMismatch {
            expected: traj.k,
            found: p.len(),
        });
    }
    let fkl_start = spec.fkl_start.unwrap_or_else(|| traj.default_fkl_start());
    Ok(match spec.level {
        Level::Policy => series_from_rows(
            traj.steps.iter().map(|s| s.pi_hat.weights()),
            p,
            spec,
            fkl_start,
        ),
        Level::Action => {
            let qs = traj.action_dists();
            series_from_rows(qs.iter().map(|q| q.weights()), p, spec, fkl_start)
        }
    })
}

/// Pointwise averages of π̂_t and q_t over several episodes on one realization.
#[derive(Debug, Clone)]
pub struct AveragedPerformance {
    k: usize,
    runs: usize,
    // Running mean of π̂_t; exact when every run reports the same π̂_t.
    pi_mean: Vec<f64>,
    // Σ over runs of n_{t,i}; q is formed as count / (runs · t).
    count_sums: Vec<u64>,
    q_mean: Vec<f64>,
    fkl_start: usize,
}

impl AveragedPerformance {
    fn new(k: usize, horizon: usize) -> Self {
        AveragedPerformance {
            k,
            runs: 0,
            pi_mean: vec![0.0; k * horizon],
            count_sums: vec![0; k * horizon],
            q_mean: Vec::new(),
            fkl_start: 1,
        }
    }

    fn add(&mut self, traj: &Trajectory) {
        if self.runs == 0 {
            self.fkl_start = traj.default_fkl_start();
        }
        self.runs += 1;
        let n = self.runs as f64;
        let k = self.k;
        let mut counts = vec![0u64; k];
        for (t, s) in traj.steps.iter().enumerate() {
            counts[s.action.index()] += 1;
            let row = t * k;
            for (i, w) in s.pi_hat.weights().iter().enumerate() {
                let m = &mut self.pi_mean[row + i];
                *m += (w - *m) / n;
                self.count_sums[row + i] += counts[i];
            }
        }
    }

    fn finish(mut self) -> Self {
        let k = self.k;
        let runs = self.runs as f64;
        self.q_mean = self
            .count_sums
            .iter()
            .enumerate()
            .map(|(idx, c)| *c as f64 / (runs * (idx / k + 1) as f64))
            .collect();
        self
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    /// Regret series of the averaged performance distributions.
    pub fn series(&self, p: &ProbDist, spec: &RegretSpec) -> RegretSeries {
        let fkl_start = spec.fkl_start.unwrap_or(self.fkl_start);
        let rows = match spec.level {
            Level::Policy => &self.pi_mean,
            Level::Action => &self.q_mean,
        };
        series_from_rows(rows.chunks(self.k), p, spec, fkl_start)
    }
}

/// Runs `runs` episodes of `kind` against the same realization, with policy
/// seeds `derive_seed(seed, "policy", j)`, and averages π̂_t and q_t in
/// run-index order.
pub fn average_performance(
    kind: &PolicyKind,
    env: &EnvironmentSpec,
    realization: &Realization,
    runs: usize,
    seed: u64,
) -> Result<AveragedPerformance> {
    if runs == 0 {
        return Err(Error::InvalidConfig(
            "environment averaging needs at least one run".into(),
        ));
    }
    let mut acc = AveragedPerformance::new(realization.k(), realization.horizon());
    for j in 0..runs {
        let traj = simulate(
            kind,
            env,
            realization,
            derive_seed(seed, "policy", j as u64),
        )?;
        acc.add(&traj);
    }
    Ok(acc.finish())
}

/// Environment-averaged regret d(E_{ω^π}[·], p), estimated with `runs`
/// inner episodes. Exact for deterministic policies.
pub fn environment_averaged_regret(
    kind: &PolicyKind,
    env: &EnvironmentSpec,
    realization: &Realization,
    p: &ProbDist,
    spec: &RegretSpec,
    runs: usize,
    seed: u64,
) -> Result<RegretSeries> {
    if p.len() != realization.k() {
        return Err(Error::DimensionMismatch {
            expected: realization.k(),
            found: p.len(),
        });
    }
    Ok(average_performance(kind, env, realization, runs, seed)?.series(p, spec))
}

/// Convenience: draws a realization with `env_seed` and returns its
/// environment-averaged regret.
pub fn environment_averaged_regret_fresh(
    kind: &PolicyKind,
    env: &EnvironmentSpec,
    horizon: usize,
    spec: &RegretSpec,
    runs: usize,
    env_seed: u64,
    policy_seed: u64,
) -> Result<RegretSeries> {
    let realization = sample_realization(env, horizon, env_seed)?;
    let p = crate::environment::target_distribution(env);
    environment_averaged_regret(kind, env, &realization, &p, spec, runs, policy_seed)
}

/// Bandit regret T·max_i r_i − Σ_i n_{T,i} r_i, from the true means.
pub fn mab_regret(traj: &Trajectory, r: &RewardVector) -> Result<f64> {
    if r.len() != traj.k {
        return Err(Error::DimensionMismatch {
            expected: traj.k,
            found: r.len(),
        });
    }
    let top = r.max();
    Ok(neumaier_sum(
        traj.counts()
            .iter()
            .zip(r.values())
            .map(|(n, ri)| *n as f64 * (top - ri)),
    ))
}

/// Expected instantaneous bandit regret of playing from `pi`:
/// max_i r_i − Σ_i π_i r_i.
pub fn simple_bandit_regret(pi: &ProbDist, r: &RewardVector) -> f64 {
    let top = r.max();
    neumaier_sum(
        pi.weights()
            .iter()
            .zip(r.values())
            .map(|(w, ri)| w * (top - ri)),
    )
}

/// Which member of the β-regret family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaLevel {
    /// (T/β)·d_rKL(q_T, p^β); bandit regret at β = ∞.
    Action,
    /// (1/β)·d_rKL(π̂_T, p^β); simple bandit regret of π̂_T at β = ∞.
    SimplePolicy,
    /// Σ_t (1/β)·d_rKL(π̂_t, p^β); bandit regret at β = ∞.
    Policy,
}

pub fn beta_regret(
    traj: &Trajectory,
    r: &RewardVector,
    beta: InverseTemperature,
    level: BetaLevel,
) -> Result<f64> {
    if r.len() != traj.k {
        return Err(Error::DimensionMismatch {
            expected: traj.k,
            found: r.len(),
        });
    }
    let last = traj
        .steps
        .last()
        .ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    if beta.is_infinite() {
        return match level {
            BetaLevel::Action | BetaLevel::Policy => mab_regret(traj, r),
            BetaLevel::SimplePolicy => Ok(simple_bandit_regret(&last.pi_hat, r)),
        };
    }
    let b = beta.value();
    let target = softmax(r, beta)?;
    let horizon = traj.len() as f64;
    Ok(match level {
        BetaLevel::Action => {
            let q = traj.action_dist(traj.len())?;
            horizon / b * distance(DistanceKind::Rkl, &q, &target)?
        }
        BetaLevel::SimplePolicy => distance(DistanceKind::Rkl, &last.pi_hat, &target)? / b,
        BetaLevel::Policy => {
            let mut total = Vec::with_capacity(traj.len());
            for s in &traj.steps {
                total.push(distance(DistanceKind::Rkl, &s.pi_hat, &target)? / b);
            }
            neumaier_sum(total)
        }
    })
}

/// AR^β_T − [R^MAB_T − (T/β)H(q_T) − (T/β) log p^β_*], which is identically
/// zero; returned so callers can check it numerically.
pub fn beta_regret_residual(traj: &Trajectory, r: &RewardVector, beta: f64) -> Result<f64> {
    let beta_t = InverseTemperature::new(beta)?;
    if beta_t.is_infinite() {
        return Err(Error::InvalidInput("beta must be finite".into()));
    }
    let ar = beta_regret(traj, r, beta_t, BetaLevel::Action)?;
    let q = traj.action_dist(traj.len())?;
    let p_star = softmax(r, beta_t)?.max_weight();
    let horizon = traj.len() as f64;
    let decomposition =
        mab_regret(traj, r)? - horizon / beta * entropy(&q) - horizon / beta * p_star.ln();
    Ok(ar - decomposition)
}

/// Per-step form of the same identity for one policy distribution:
/// β·SR(π) − H(π) − log p^β_* − d_rKL(π, p^β), identically zero.
pub fn policy_identity_residual(pi: &ProbDist, r: &RewardVector, beta: f64) -> Result<f64> {
    let beta_t = InverseTemperature::new(beta)?;
    if beta_t.is_infinite() {
        return Err(Error::InvalidInput("beta must be finite".into()));
    }
    let target = softmax(r, beta_t)?;
    let lhs = beta * simple_bandit_regret(pi, r) - entropy(pi) - target.max_weight().ln();
    Ok(lhs - distance(DistanceKind::Rkl, pi, &target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{target_distribution, NoiseModel};
    use crate::policy::Step;
    use crate::simplex::Arm;

    fn pd(w: &[f64]) -> ProbDist {
        ProbDist::new(w.to_vec()).unwrap()
    }

    fn manual_traj(k: usize, labels: &[usize], pis: Option<Vec<ProbDist>>) -> Trajectory {
        let steps = labels
            .iter()
            .enumerate()
            .map(|(i, l)| Step {
                pi_hat: pis
                    .as_ref()
                    .map_or_else(|| ProbDist::uniform(k).unwrap(), |v| v[i].clone()),
                action: Arm::from_label(*l, k).unwrap(),
                observation: 0.0,
            })
            .collect();
        Trajectory {
            policy_id: "manual".into(),
            policy_seed: 0,
            realization_seed: 0,
            k,
            horizon: labels.len(),
            exploration_steps: 0,
            steps,
        }
    }

    #[test]
    fn distance_examples() {
        let p = pd(&[0.2, 0.3, 0.5]);
        for kind in DistanceKind::ALL {
            assert_eq!(distance(kind, &p, &p).unwrap(), 0.0);
        }
        assert_eq!(
            distance(DistanceKind::Tv, &pd(&[1.0, 0.0]), &pd(&[0.0, 1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            distance(DistanceKind::Fkl, &pd(&[1.0, 0.0]), &pd(&[0.5, 0.5])).unwrap(),
            f64::INFINITY
        );
        // 0.5 ln 2 + 0.5 ln(2/3), direct summation at 50 digits.
        let v = distance(DistanceKind::Rkl, &pd(&[0.5, 0.5]), &pd(&[0.25, 0.75])).unwrap();
        assert!((v - 0.143_841_036_225_890_46).abs() < 1e-15);
        assert_eq!(
            distance(DistanceKind::Rkl, &pd(&[0.5, 0.5]), &pd(&[1.0, 0.0])).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            distance(DistanceKind::Rkl, &pd(&[1.0, 0.0]), &pd(&[0.5, 0.5])).unwrap(),
            2f64.ln()
        );
        assert!(matches!(
            distance(
                DistanceKind::Tv,
                &pd(&[0.5, 0.5]),
                &ProbDist::uniform(3).unwrap()
            ),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "tv.policy.simple.per_run",
            "rkl.action.cumulative.environment",
            "fkl.policy.cumulative.per_run@11",
        ] {
            let spec: RegretSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        for bad in [
            "tv.policy.simple",
            "l2.policy.simple.per_run",
            "tv.joint.simple.per_run",
            "tv.policy.simple.per_run@0",
            "tv.policy.total.per_run",
            "tv.policy.simple.global",
        ] {
            assert!(bad.parse::<RegretSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn uniform_trace_by_hand() {
        // actions 1, 1, 2 over k = 3 against the uniform target.
        let traj = manual_traj(3, &[1, 1, 2], None);
        let u = ProbDist::uniform(3).unwrap();
        let spec = RegretSpec::new(DistanceKind::Tv, Level::Policy, Aggregation::Simple);
        let s = regret_series(&traj, &u, &spec).unwrap();
        assert_eq!(s.per_step, vec![0.0; 3]);
        let spec = RegretSpec::new(DistanceKind::Tv, Level::Action, Aggregation::Cumulative);
        let s = regret_series(&traj, &u, &spec).unwrap();
        // q_1 = (1,0,0), q_2 = (1,0,0), q_3 = (2/3,1/3,0)
        let expected = [2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0];
        for (a, b) in s.per_step.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((s.last(Aggregation::Cumulative) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn fkl_action_infinite_until_all_arms_seen() {
        let traj = manual_traj(3, &[1, 2, 2, 3, 1], None);
        let u = ProbDist::uniform(3).unwrap();
        let spec = RegretSpec::new(DistanceKind::Fkl, Level::Action, Aggregation::Simple);
        let s = regret_series(&traj, &u, &spec).unwrap();
        assert!(s.per_step[..3].iter().all(|v| v.is_infinite()));
        assert!(s.per_step[3..].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn fkl_cumulative_policy_skips_prefix() {
        let k = 2;
        let pis = vec![
            ProbDist::dirac(k, Arm::from_index(1)).unwrap(),
            ProbDist::dirac(k, Arm::from_index(0)).unwrap(),
            pd(&[0.4, 0.6]),
            pd(&[0.5, 0.5]),
        ];
        let mut traj = manual_traj(k, &[2, 1, 2, 1], Some(pis));
        traj.exploration_steps = 2;
        let p = pd(&[0.5, 0.5]);
        let simple = RegretSpec::new(DistanceKind::Fkl, Level::Policy, Aggregation::Simple);
        let s = regret_series(&traj, &p, &simple).unwrap();
        assert!(s.per_step[0].is_infinite());
        let cum = RegretSpec::new(DistanceKind::Fkl, Level::Policy, Aggregation::Cumulative);
        let c = regret_series(&traj, &p, &cum).unwrap();
        assert_eq!(c.fkl_start, Some(3));
        assert_eq!(&c.per_step[..2], &[0.0, 0.0]);
        assert!(c.last(Aggregation::Cumulative).is_finite());
        let mut explicit = cum;
        explicit.fkl_start = Some(4);
        let c = regret_series(&traj, &p, &explicit).unwrap();
        assert_eq!(c.last(Aggregation::Cumulative), 0.0);
    }

    #[test]
    fn mab_regret_arithmetic() {
        let r = RewardVector::new(vec![1.0, 0.0]).unwrap();
        let traj = manual_traj(2, &[1, 2, 1, 2, 1], None);
        assert_eq!(mab_regret(&traj, &r).unwrap(), 2.0);
        let traj = manual_traj(2, &[1, 1, 1], None);
        assert_eq!(mab_regret(&traj, &r).unwrap(), 0.0);
    }

    #[test]
    fn beta_one_action_is_scaled_sar() {
        let r = RewardVector::new(vec![0.3, -0.1, 0.8]).unwrap();
        let traj = manual_traj(3, &[1, 2, 3, 3, 1, 3, 2], None);
        let p = softmax(&r, InverseTemperature::ONE).unwrap();
        let sar = regret_series(
            &traj,
            &p,
            &RegretSpec::new(DistanceKind::Rkl, Level::Action, Aggregation::Simple),
        )
        .unwrap()
        .last(Aggregation::Simple);
        let ar = beta_regret(&traj, &r, InverseTemperature::ONE, BetaLevel::Action).unwrap();
        assert!((ar - 7.0 * sar).abs() < 1e-14);
        let inf = beta_regret(&traj, &r, InverseTemperature::INFINITE, BetaLevel::Action).unwrap();
        assert_eq!(inf, mab_regret(&traj, &r).unwrap());
    }

    #[test]
    fn beta_identity_on_small_trace() {
        let r = RewardVector::new(vec![0.4, -0.3]).unwrap();
        let traj = manual_traj(2, &[1, 2, 2, 1, 1, 1, 2, 1, 1, 2], None);
        for beta in [0.5, 1.0, 2.5, 7.0] {
            assert!(beta_regret_residual(&traj, &r, beta).unwrap().abs() < 1e-10);
        }
        let pi = pd(&[0.3, 0.7]);
        assert!(policy_identity_residual(&pi, &r, 2.5).unwrap().abs() < 1e-10);
    }

    #[test]
    fn deterministic_policy_env_average_equals_per_run() {
        let env = EnvironmentSpec::new(
            RewardVector::new(vec![0.1, 0.7, 0.4]).unwrap(),
            NoiseModel::Gaussian { sigma: 1.0 },
        )
        .unwrap();
        let real = sample_realization(&env, 12, 1).unwrap();
        let p = target_distribution(&env);
        let kind = PolicyKind::Ase { m: 4 };
        for spec in [
            "tv.policy.simple.environment",
            "rkl.action.cumulative.environment",
        ] {
            let spec: RegretSpec = spec.parse().unwrap();
            let per_run =
                regret_series(&simulate(&kind, &env, &real, 5).unwrap(), &p, &spec).unwrap();
            for runs in [1, 3, 8] {
                let avg =
                    environment_averaged_regret(&kind, &env, &real, &p, &spec, runs, 99).unwrap();
                assert_eq!(avg.per_step, per_run.per_step);
            }
        }
        let spec: RegretSpec = "tv.policy.simple.environment".parse().unwrap();
        assert!(environment_averaged_regret(&kind, &env, &real, &p, &spec, 0, 0).is_err());
    }
}
