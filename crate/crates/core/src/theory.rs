//! Executable checks of the inequalities and identities the library relies
//! on: softmax perturbation bounds, the d′ facts, Pinsker sandwiches, the
//! lower-bound construction and its Monte Carlo audit, the β-regret identity
//! and the β-scaling equivalence.
//!
//! Each check produces a [`CheckReport`] whose `worst_slack` is the smallest
//! margin observed (negative means a violation).

use std::fmt;

use rayon::prelude::*;

use crate::environment::{
    lower_bound_epsilon, lower_bound_pair, minimax_lower_bound_value, sample_realization,
    target_distribution, EnvironmentSpec, NoiseModel,
};
use crate::error::{Error, Result};
use crate::policy::{default_exploration, simulate, PolicyKind, Trajectory};
use crate::regret::{
    beta_regret_residual, distance, distance_slices, regret_series, Aggregation, DistanceKind,
    Level, RegretSpec,
};
use crate::rng::{derive_seed, SplitMix64};
use crate::simplex::{softmax, InverseTemperature, ProbDist, RewardVector};

/// Slack allowed on exact inequalities evaluated in floating point.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Standard errors subtracted from a bound before comparing Monte Carlo means.
pub const MONTE_CARLO_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    pub worst_slack: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    pub fn new(
        name: impl Into<String>,
        instances: usize,
        worst_slack: f64,
        tolerance: f64,
    ) -> Self {
        CheckReport {
            name: name.into(),
            instances,
            worst_slack,
            tolerance,
            passed: worst_slack >= -tolerance,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} instances={} worst_slack={:.6e} tolerance={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.worst_slack,
            self.tolerance
        )
    }
}

type SoftmaxFn = fn(&RewardVector) -> Result<ProbDist>;

fn exact_softmax(r: &RewardVector) -> Result<ProbDist> {
    softmax(r, InverseTemperature::ONE)
}

// Wrong temperature; used as a negative control for the battery.
fn corrupted_softmax(r: &RewardVector) -> Result<ProbDist> {
    softmax(r, InverseTemperature::new(2.0)?)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn perturbation_slack(soft: SoftmaxFn, r: &RewardVector, r_prime: &RewardVector) -> Result<f64> {
    if r.len() != r_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: r.len(),
            found: r_prime.len(),
        });
    }
    let eps = max_abs_diff(r.values(), r_prime.values());
    let p = soft(r)?;
    let q = soft(r_prime)?;
    let (lo, hi) = ((-2.0 * eps).exp(), (2.0 * eps).exp());
    let mut worst = f64::INFINITY;
    for (pi, qi) in p.weights().iter().zip(q.weights()) {
        worst = worst
            .min(qi - pi * lo)
            .min(pi * hi - qi)
            .min(2.0 * eps - (pi - qi).abs());
    }
    let tv = distance(DistanceKind::Tv, &p, &q)?;
    Ok(worst.min(2.0 * eps - tv))
}

/// Softmax perturbation bounds with ε = max_i |r_i − r′_i|:
/// p_i e^{−2ε} ≤ p′_i ≤ p_i e^{2ε}, |p_i − p′_i| ≤ 2ε and d_TV(p, p′) ≤ 2ε.
pub fn softmax_perturbation_check(r: &RewardVector, r_prime: &RewardVector) -> Result<CheckReport> {
    let slack = perturbation_slack(exact_softmax, r, r_prime)?;
    Ok(CheckReport::new(
        "softmax_perturbation",
        1,
        slack,
        EXACT_TOLERANCE,
    ))
}

fn random_rewards(rng: &mut SplitMix64, k: usize, lo: f64, hi: f64) -> RewardVector {
    RewardVector::new((0..k).map(|_| rng.next_uniform(lo, hi)).collect()).expect("finite")
}

fn perturbation_battery(soft: SoftmaxFn, pairs: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = SplitMix64::new(derive_seed(seed, "perturbation", 0));
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let k = 2 + (rng.next_u64() % 9) as usize;
        let r = random_rewards(&mut rng, k, -1.0, 1.0);
        let r_prime = random_rewards(&mut rng, k, -1.0, 1.0);
        worst = worst.min(perturbation_slack(soft, &r, &r_prime)?);
    }
    Ok(CheckReport::new(
        "softmax_perturbation_random",
        pairs,
        worst,
        EXACT_TOLERANCE,
    ))
}

/// Randomized audit of the perturbation bounds on pairs with entries in
/// [−1, 1] and k drawn from 2..=10.
pub fn softmax_perturbation_audit(pairs: usize, seed: u64) -> Result<CheckReport> {
    perturbation_battery(exact_softmax, pairs, seed)
}

/// Grid step for the brute-force d′ search.
pub const DPRIME_GRID_STEP: f64 = 0.01;

fn simplex_grid(k: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    let n = (1.0 / step).round() as usize;
    match k {
        2 => Ok((0..=n)
            .map(|a| {
                let x = a as f64 / n as f64;
                vec![x, 1.0 - x]
            })
            .collect()),
        3 => {
            let mut out = Vec::new();
            for a in 0..=n {
                for b in 0..=(n - a) {
                    let x = a as f64 / n as f64;
                    let y = b as f64 / n as f64;
                    out.push(vec![x, y, ((n - a - b) as f64) / n as f64]);
                }
            }
            Ok(out)
        }
        other => Err(Error::UnsupportedDimension(other)),
    }
}

/// Brute-force minimum over a simplex grid of d(q, p) + d(q, p′).
pub fn dprime_grid_min(p: &ProbDist, p_prime: &ProbDist, kind: DistanceKind) -> Result<f64> {
    if p.len() != p_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: p_prime.len(),
        });
    }
    let grid = simplex_grid(p.len(), DPRIME_GRID_STEP)?;
    Ok(grid
        .iter()
        .map(|q| {
            distance_slices(kind, q, p.weights()) + distance_slices(kind, q, p_prime.weights())
        })
        .fold(f64::INFINITY, f64::min))
}

/// d′(p, p′) = inf_q d(q, p) + d(q, p′): equals d_TV for TV, and is at least
/// d_TV(p, p′)² for either KL. Verified by grid search for k ≤ 3.
pub fn dprime_check(p: &ProbDist, p_prime: &ProbDist, kind: DistanceKind) -> Result<CheckReport> {
    let grid_min = dprime_grid_min(p, p_prime, kind)?;
    let tv = distance(DistanceKind::Tv, p, p_prime)?;
    let (slack, name) = match kind {
        DistanceKind::Tv => {
            let resolution = (p.len() - 1) as f64 * DPRIME_GRID_STEP;
            // grid_min can only overshoot d_TV, by at most the grid resolution.
            let slack = (grid_min - tv).min(tv + resolution - grid_min);
            (slack, "dprime_tv")
        }
        DistanceKind::Rkl => (grid_min - tv * tv + 1e-9, "dprime_rkl"),
        DistanceKind::Fkl => (grid_min - tv * tv + 1e-9, "dprime_fkl"),
    };
    Ok(CheckReport::new(name, 1, slack, EXACT_TOLERANCE))
}

fn random_simplex(rng: &mut SplitMix64, k: usize) -> ProbDist {
    let e: Vec<f64> = (0..k).map(|_| -rng.next_open01().ln()).collect();
    let total: f64 = e.iter().sum();
    ProbDist::new(e.into_iter().map(|x| x / total).collect()).expect("dirichlet draw")
}

fn dprime_battery(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = SplitMix64::new(derive_seed(seed, "dprime", 0));
    let mut reports = Vec::new();
    for kind in DistanceKind::ALL {
        let mut worst = f64::INFINITY;
        let mut n = 0;
        for k in [2, 3] {
            for _ in 0..10 {
                let p = random_simplex(&mut rng, k);
                let p_prime = random_simplex(&mut rng, k);
                worst = worst.min(dprime_check(&p, &p_prime, kind)?.worst_slack);
                worst = worst.min(dprime_check(&p, &p, kind)?.worst_slack);
                n += 2;
            }
        }
        reports.push(CheckReport::new(
            format!("dprime_{}", kind.name()),
            n,
            worst,
            EXACT_TOLERANCE,
        ));
    }
    Ok(reports)
}

/// 2·tv² ≤ rkl ≤ (2/min p)·tv² and 2·tv² ≤ fkl ≤ (2/min q)·tv² on random
/// full-support pairs.
pub fn pinsker_sandwich_check(pairs: usize, seed: u64) -> CheckReport {
    let mut rng = SplitMix64::new(derive_seed(seed, "pinsker", 0));
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let k = 2 + (rng.next_u64() % 9) as usize;
        let q = random_simplex(&mut rng, k);
        let p = random_simplex(&mut rng, k);
        worst = worst.min(pinsker_slack(&q, &p));
    }
    CheckReport::new("pinsker_sandwich", pairs, worst, EXACT_TOLERANCE)
}

/// Smallest margin of the four sandwich inequalities for one pair.
pub fn pinsker_slack(q: &ProbDist, p: &ProbDist) -> f64 {
    let tv = distance_slices(DistanceKind::Tv, q.weights(), p.weights());
    let rkl = distance_slices(DistanceKind::Rkl, q.weights(), p.weights());
    let fkl = distance_slices(DistanceKind::Fkl, q.weights(), p.weights());
    let tv2 = tv * tv;
    (rkl - 2.0 * tv2)
        .min(2.0 / p.min_weight() * tv2 - rkl)
        .min(fkl - 2.0 * tv2)
        .min(2.0 / q.min_weight() * tv2 - fkl)
}

/// The two-environment construction: max_i |r_i − r′_i| = 1/√(Tk) exactly
/// and d_TV(p, p′) ≥ 2/(9√(Tk)).
pub fn lower_bound_construction_check(k: usize, horizon: usize) -> Result<CheckReport> {
    let (nu, nu_prime) = lower_bound_pair(k, horizon)?;
    let eps = lower_bound_epsilon(k, horizon);
    let gap = max_abs_diff(nu.rewards().values(), nu_prime.rewards().values());
    let gap_slack = 0.0 - (gap - eps).abs();
    let tv = distance(
        DistanceKind::Tv,
        &target_distribution(&nu),
        &target_distribution(&nu_prime),
    )?;
    let sep_slack = tv - 2.0 / (9.0 * ((horizon * k) as f64).sqrt());
    Ok(CheckReport::new(
        format!("lower_bound_pair k={k} T={horizon}"),
        1,
        gap_slack.min(sep_slack),
        0.0,
    ))
}

/// Policies exercised by the lower-bound audit. Policies that read the true
/// target of the environment they play in are not environment-agnostic and
/// are excluded; `FixedFirst` is the oracle of ν played on both ν and ν′.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditPolicy {
    Ase,
    As,
    GreedyEtc,
    BetaAse(u32),
    Uniform,
    FixedFirst,
    FixedSecond,
}

impl AuditPolicy {
    pub const ALL: [AuditPolicy; 7] = [
        AuditPolicy::Ase,
        AuditPolicy::As,
        AuditPolicy::GreedyEtc,
        AuditPolicy::BetaAse(2),
        AuditPolicy::Uniform,
        AuditPolicy::FixedFirst,
        AuditPolicy::FixedSecond,
    ];

    fn name(self) -> String {
        match self {
            AuditPolicy::Ase => "ase".into(),
            AuditPolicy::As => "as".into(),
            AuditPolicy::GreedyEtc => "greedy_etc".into(),
            AuditPolicy::BetaAse(b) => format!("beta_ase(beta={b})"),
            AuditPolicy::Uniform => "uniform".into(),
            AuditPolicy::FixedFirst => "oracle_of_nu".into(),
            AuditPolicy::FixedSecond => "oracle_of_nu_prime".into(),
        }
    }

    fn kind(
        self,
        nu: &EnvironmentSpec,
        nu_prime: &EnvironmentSpec,
        horizon: usize,
    ) -> Result<PolicyKind> {
        let m = default_exploration(1.0, horizon, nu.k());
        Ok(match self {
            AuditPolicy::Ase => PolicyKind::Ase { m },
            AuditPolicy::As => PolicyKind::As,
            AuditPolicy::GreedyEtc => PolicyKind::GreedyEtc { m },
            AuditPolicy::BetaAse(b) => PolicyKind::BetaAse {
                m,
                beta: InverseTemperature::new(f64::from(b))?,
            },
            AuditPolicy::Uniform => PolicyKind::Uniform,
            AuditPolicy::FixedFirst => PolicyKind::Fixed(target_distribution(nu)),
            AuditPolicy::FixedSecond => PolicyKind::Fixed(target_distribution(nu_prime)),
        })
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn simple_spec(kind: DistanceKind, level: Level) -> RegretSpec {
    RegretSpec::new(kind, level, Aggregation::Simple)
}

/// Monte Carlo audit of the minimax lower bound: plays `policy` `n_runs`
/// times on each environment of the lower-bound pair (fresh realizations
/// per run) and checks that the larger of the two mean simple regrets is at
/// least the bound minus three standard errors. One report per
/// (distance, level).
pub fn lower_bound_audit_all(
    k: usize,
    horizon: usize,
    policy: AuditPolicy,
    n_runs: usize,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("audit needs at least one run".into()));
    }
    let (nu, nu_prime) = lower_bound_pair(k, horizon)?;
    let kind = policy.kind(&nu, &nu_prime, horizon)?;
    let envs = [&nu, &nu_prime];
    let cases: Vec<(DistanceKind, Level)> = DistanceKind::ALL
        .iter()
        .flat_map(|d| [(*d, Level::Policy), (*d, Level::Action)])
        .collect();
    // regrets[env][case][run]
    let mut regrets = vec![vec![Vec::with_capacity(n_runs); cases.len()]; 2];
    for (e, env) in envs.iter().enumerate() {
        let p = target_distribution(env);
        for run in 0..n_runs {
            let index = (e * n_runs + run) as u64;
            let real = sample_realization(env, horizon, derive_seed(seed, "audit-env", index))?;
            let traj = simulate(&kind, env, &real, derive_seed(seed, "audit-policy", index))?;
            for (c, (d, level)) in cases.iter().enumerate() {
                let s = regret_series(&traj, &p, &simple_spec(*d, *level))?;
                regrets[e][c].push(s.last(Aggregation::Simple));
            }
        }
    }
    let mut reports = Vec::with_capacity(cases.len());
    for (c, (d, level)) in cases.iter().enumerate() {
        let bound = minimax_lower_bound_value(k, horizon, *d)?;
        let (m0, se0) = mean_and_se(&regrets[0][c]);
        let (m1, se1) = mean_and_se(&regrets[1][c]);
        let (mean, se) = if m0 >= m1 { (m0, se0) } else { (m1, se1) };
        let slack = mean - (bound - MONTE_CARLO_SIGMAS * se);
        let level = match level {
            Level::Policy => "policy",
            Level::Action => "action",
        };
        reports.push(CheckReport::new(
            format!(
                "lower_bound_audit {} {}.{level} k={k} T={horizon}",
                policy.name(),
                d.name()
            ),
            2 * n_runs,
            slack,
            0.0,
        ));
    }
    Ok(reports)
}

/// Single-(distance, level) form of [`lower_bound_audit_all`].
pub fn lower_bound_audit(
    k: usize,
    horizon: usize,
    kind: DistanceKind,
    level: Level,
    policy: AuditPolicy,
    n_runs: usize,
    seed: u64,
) -> Result<CheckReport> {
    let idx = DistanceKind::ALL
        .iter()
        .position(|d| *d == kind)
        .expect("listed")
        * 2
        + usize::from(level == Level::Action);
    Ok(lower_bound_audit_all(k, horizon, policy, n_runs, seed)?.swap_remove(idx))
}

fn random_environment(rng: &mut SplitMix64, k: usize) -> Result<EnvironmentSpec> {
    EnvironmentSpec::new(
        random_rewards(rng, k, -1.0, 1.0),
        NoiseModel::Gaussian { sigma: 1.0 },
    )
}

/// Largest |AR^β − decomposition| over random trajectories spanning
/// k ∈ {2, 10}, T ∈ {10, 10⁴} and β ∈ {0.5, 1, 7}.
pub fn beta_regret_identity_check(
    trajectories: usize,
    seed: u64,
    tolerance: f64,
) -> Result<CheckReport> {
    let mut rng = SplitMix64::new(derive_seed(seed, "beta-identity", 0));
    let mut worst = f64::INFINITY;
    let ks = [2usize, 10];
    let horizons = [10usize, 10_000];
    let betas = [0.5, 1.0, 7.0];
    for i in 0..trajectories {
        let k = ks[i % 2];
        let horizon = horizons[(i / 2) % 2];
        let beta = betas[(i / 4) % 3];
        let env = random_environment(&mut rng, k)?;
        let real = sample_realization(&env, horizon, rng.next_u64())?;
        let kind = if i % 3 == 0 {
            PolicyKind::Uniform
        } else {
            PolicyKind::As
        };
        let traj = simulate(&kind, &env, &real, rng.next_u64())?;
        let residual = beta_regret_residual(&traj, env.rewards(), beta)?;
        worst = worst.min(tolerance - residual.abs());
    }
    Ok(CheckReport::new(
        "beta_regret_identity",
        trajectories,
        worst,
        0.0,
    ))
}

fn actions_of(traj: &Trajectory) -> Vec<usize> {
    traj.steps.iter().map(|s| s.action.index()).collect()
}

/// beta_ase(M, β) against ν and ase(M) against β·ν (same realization
/// randomness and policy seed) must produce identical action sequences.
/// Slack is minus the number of mismatching episodes.
pub fn beta_equivalence_check(episodes: usize, betas: &[f64], seed: u64) -> Result<CheckReport> {
    let mut rng = SplitMix64::new(derive_seed(seed, "beta-equivalence", 0));
    let mut mismatches = 0usize;
    let mut total = 0usize;
    for &beta in betas {
        let beta_t = InverseTemperature::new(beta)?;
        for _ in 0..episodes {
            let k = 2 + (rng.next_u64() % 9) as usize;
            let horizon = 200 + (rng.next_u64() % 300) as usize;
            let m = 1 + (rng.next_u64() % 3) as usize;
            let env = random_environment(&mut rng, k)?;
            let scaled = env.scaled(beta)?;
            let real = sample_realization(&env, horizon, rng.next_u64())?;
            let scaled_real = real.scaled(beta);
            let policy_seed = rng.next_u64();
            let a = simulate(
                &PolicyKind::BetaAse { m, beta: beta_t },
                &env,
                &real,
                policy_seed,
            )?;
            let b = simulate(&PolicyKind::Ase { m }, &scaled, &scaled_real, policy_seed)?;
            if actions_of(&a) != actions_of(&b) {
                mismatches += 1;
            }
            total += 1;
        }
    }
    Ok(CheckReport::new(
        "beta_scaling_equivalence",
        total,
        0.0 - mismatches as f64,
        0.0,
    ))
}

/// SAR_T − CPR_T/T ≤ d(q_T, p) − d(mean_t π̂_t, p) for TV and r-KL on
/// random ASE/AS trajectories.
pub fn action_policy_chain_check(trajectories: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = SplitMix64::new(derive_seed(seed, "chain", 0));
    let mut worst = f64::INFINITY;
    for i in 0..trajectories {
        let k = 2 + (rng.next_u64() % 9) as usize;
        let horizon = k * 3 + (rng.next_u64() % 200) as usize;
        let env = random_environment(&mut rng, k)?;
        let p = target_distribution(&env);
        let real = sample_realization(&env, horizon, rng.next_u64())?;
        let kind = if i % 2 == 0 {
            PolicyKind::As
        } else {
            PolicyKind::Ase { m: 3 }
        };
        let traj = simulate(&kind, &env, &real, rng.next_u64())?;
        for d in [DistanceKind::Tv, DistanceKind::Rkl] {
            worst = worst.min(chain_slack(&traj, &p, d)?);
        }
    }
    Ok(CheckReport::new(
        "action_vs_policy_chain",
        trajectories,
        worst,
        EXACT_TOLERANCE,
    ))
}

/// Margin of SAR_T − CPR_T/T ≤ d(q_T, p) − d(π̄_T, p) for one trajectory.
pub fn chain_slack(traj: &Trajectory, p: &ProbDist, d: DistanceKind) -> Result<f64> {
    let horizon = traj.len();
    let sar = regret_series(
        traj,
        p,
        &RegretSpec::new(d, Level::Action, Aggregation::Simple),
    )?
    .last(Aggregation::Simple);
    let cpr = regret_series(
        traj,
        p,
        &RegretSpec::new(d, Level::Policy, Aggregation::Cumulative),
    )?
    .last(Aggregation::Cumulative);
    let pis: Vec<ProbDist> = traj.steps.iter().map(|s| s.pi_hat.clone()).collect();
    let mean_pi = ProbDist::average(&pis)?;
    let q = traj.action_dist(horizon)?;
    let lhs = sar - cpr / horizon as f64;
    let rhs = distance(d, &q, p)? - distance(d, &mean_pi, p)?;
    Ok(rhs - lhs)
}

/// Fault injected into the battery, for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Softmax,
}

#[derive(Debug, Clone, Default)]
pub struct BatteryOptions {
    /// Run no checks at all.
    pub empty: bool,
    pub fault: Option<Fault>,
    /// Runs per environment in the lower-bound audits.
    pub audit_runs: Option<usize>,
}

/// Lower-bound audit grid used by the battery.
pub const AUDIT_ARMS: [usize; 3] = [2, 5, 10];
pub const AUDIT_HORIZONS: [usize; 3] = [25, 100, 400];
pub const AUDIT_RUNS: usize = 200;

/// The full documented battery. Reports come back in a fixed order.
pub fn run_battery(seed: u64, options: &BatteryOptions) -> Result<Vec<CheckReport>> {
    if options.empty {
        return Ok(Vec::new());
    }
    let soft: SoftmaxFn = match options.fault {
        Some(Fault::Softmax) => corrupted_softmax,
        None => exact_softmax,
    };
    let mut reports = Vec::new();

    let mut fixed = vec![
        CheckReport::new(
            "softmax_perturbation_identical",
            1,
            perturbation_slack(
                soft,
                &RewardVector::new(vec![0.3, -0.2, 0.9])?,
                &RewardVector::new(vec![0.3, -0.2, 0.9])?,
            )?,
            EXACT_TOLERANCE,
        ),
        CheckReport::new(
            "softmax_perturbation_example",
            1,
            perturbation_slack(
                soft,
                &RewardVector::new(vec![0.0, 0.0])?,
                &RewardVector::new(vec![0.1, -0.1])?,
            )?,
            EXACT_TOLERANCE,
        ),
    ];
    reports.append(&mut fixed);
    reports.push(perturbation_battery(soft, 1_000, seed)?);
    reports.extend(dprime_battery(seed)?);
    reports.push(pinsker_sandwich_check(10_000, seed));
    for k in AUDIT_ARMS {
        for horizon in [25, 100, 10_000] {
            reports.push(lower_bound_construction_check(k, horizon)?);
        }
    }
    reports.push(beta_regret_identity_check(100, seed, 1e-8)?);
    reports.push(beta_equivalence_check(50, &[0.5, 2.0, 10.0], seed)?);
    reports.push(action_policy_chain_check(200, seed)?);

    let runs = options.audit_runs.unwrap_or(AUDIT_RUNS);
    let jobs: Vec<(usize, usize, AuditPolicy)> = AUDIT_ARMS
        .iter()
        .flat_map(|k| {
            AUDIT_HORIZONS
                .iter()
                .flat_map(move |t| AuditPolicy::ALL.iter().map(move |p| (*k, *t, *p)))
        })
        .collect();
    let audits: Vec<Result<Vec<CheckReport>>> = jobs
        .par_iter()
        .map(|(k, t, p)| lower_bound_audit_all(*k, *t, *p, runs, seed))
        .collect();
    for a in audits {
        reports.extend(a?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RewardVector {
        RewardVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn perturbation_identical_is_tight() {
        let r = rv(&[0.4, -1.0, 2.0]);
        let rep = softmax_perturbation_check(&r, &r).unwrap();
        assert!(rep.passed);
        assert!(rep.worst_slack.abs() < 1e-15);
    }

    #[test]
    fn perturbation_example() {
        let rep = softmax_perturbation_check(&rv(&[0.0, 0.0]), &rv(&[0.1, -0.1])).unwrap();
        assert!(rep.passed);
        // p = (0.5, 0.5), p′ = (σ(0.2), σ(−0.2)); the binding margin is
        // p′_2 − p_2 e^{−0.2}.
        let q1 = 1.0 / (1.0 + (-0.2f64).exp());
        let q2 = 1.0 - q1;
        let expected = q2 - 0.5 * (-0.2f64).exp();
        assert!(expected < 0.2 - (q1 - 0.5) && expected < 0.5 * 0.2f64.exp() - q1);
        assert!((rep.worst_slack - expected).abs() < 1e-15);
        assert!(softmax_perturbation_check(&rv(&[0.0, 0.0]), &rv(&[0.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn perturbation_random_pairs() {
        assert!(softmax_perturbation_audit(1_000, 5).unwrap().passed);
        assert!(
            !perturbation_battery(corrupted_softmax, 1_000, 5)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn dprime_examples() {
        let p = ProbDist::new(vec![0.3, 0.7]).unwrap();
        let q = ProbDist::new(vec![0.6, 0.4]).unwrap();
        let min = dprime_grid_min(&p, &q, DistanceKind::Tv).unwrap();
        assert!((min - 0.3).abs() <= 0.01);
        assert!(dprime_check(&p, &q, DistanceKind::Tv).unwrap().passed);
        for kind in DistanceKind::ALL {
            assert!(
                dprime_grid_min(&p, &p, kind).unwrap().abs() < 1e-15 || kind == DistanceKind::Fkl
            );
            assert!(dprime_check(&p, &p, kind).unwrap().passed);
        }
        let four = ProbDist::uniform(4).unwrap();
        assert!(matches!(
            dprime_check(&four, &four, DistanceKind::Tv),
            Err(Error::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn dprime_kl_random_two_arm() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..50 {
            let p = random_simplex(&mut rng, 2);
            let q = random_simplex(&mut rng, 2);
            let tv = distance(DistanceKind::Tv, &p, &q).unwrap();
            let min = dprime_grid_min(&p, &q, DistanceKind::Rkl).unwrap();
            assert!(min >= tv * tv - 1e-9);
        }
    }

    #[test]
    fn construction_grid() {
        for k in [2, 5, 10] {
            for t in [25, 100, 10_000] {
                assert!(lower_bound_construction_check(k, t).unwrap().passed);
            }
        }
    }

    #[test]
    fn oracle_of_one_environment_fails_on_the_other() {
        let reps = lower_bound_audit_all(2, 100, AuditPolicy::FixedFirst, 50, 3).unwrap();
        assert!(reps.iter().all(|r| r.passed));
        let tv_policy = &reps[0];
        assert!(tv_policy.name.contains("tv.policy"));
        // Policy-level TV regret on ν′ is exactly d_TV(p, p′) for every run.
        let (nu, nu_prime) = lower_bound_pair(2, 100).unwrap();
        let sep = distance(
            DistanceKind::Tv,
            &target_distribution(&nu),
            &target_distribution(&nu_prime),
        )
        .unwrap();
        let bound = minimax_lower_bound_value(2, 100, DistanceKind::Tv).unwrap();
        assert!((tv_policy.worst_slack - (sep - bound)).abs() < 1e-15);
    }

    #[test]
    fn uniform_action_regret_on_pair() {
        let k = 2;
        let horizon = 100;
        let (nu, nu_prime) = lower_bound_pair(k, horizon).unwrap();
        let p_prime = target_distribution(&nu_prime);
        let u = ProbDist::uniform(k).unwrap();
        let expected = distance(DistanceKind::Tv, &u, &p_prime).unwrap();
        let mut sum = 0.0;
        let runs = 400;
        for run in 0..runs {
            let real = sample_realization(&nu_prime, horizon, run).unwrap();
            let traj = simulate(&PolicyKind::Uniform, &nu_prime, &real, 1_000 + run).unwrap();
            let s = regret_series(
                &traj,
                &p_prime,
                &simple_spec(DistanceKind::Tv, Level::Policy),
            )
            .unwrap();
            assert!((s.last(Aggregation::Simple) - expected).abs() < 1e-15);
            let a = regret_series(
                &traj,
                &p_prime,
                &simple_spec(DistanceKind::Tv, Level::Action),
            )
            .unwrap();
            sum += a.last(Aggregation::Simple);
        }
        // Action-level: E|q_T,1 − p′_1| with q_T,1 ~ Bin(T, 1/2)/T stays within
        // one binomial standard deviation of the gap.
        let mean = sum / runs as f64;
        assert!((mean - expected).abs() < (0.25 / horizon as f64).sqrt());
        let _ = nu;
    }

    #[test]
    fn pinsker_and_chain_hold() {
        assert!(pinsker_sandwich_check(2_000, 1).passed);
        assert!(action_policy_chain_check(30, 1).unwrap().passed);
    }

    #[test]
    fn identity_and_equivalence_checks() {
        assert!(beta_regret_identity_check(12, 2, 1e-8).unwrap().passed);
        let rep = beta_equivalence_check(5, &[0.5, 2.0], 2).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.instances, 10);
    }

    #[test]
    fn empty_battery() {
        let reps = run_battery(
            0,
            &BatteryOptions {
                empty: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(reps.is_empty());
    }

    #[test]
    fn report_display() {
        let rep = CheckReport::new("x", 3, -0.5, 0.1);
        assert!(!rep.passed);
        assert!(rep.to_string().starts_with("FAIL x instances=3"));
    }
}
