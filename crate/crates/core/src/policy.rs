//! Sampling policies and the episode loop.
//!
//! Every policy reports π̂_t, the exact law of its next action given the
//! history, before drawing that action with inverse-CDF sampling from its own
//! SplitMix64 stream.

use std::fmt;

use crate::environment::{target_distribution, EnvironmentSpec, Realization};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::simplex::{dist_from_counts, softmax_slice, Arm, InverseTemperature, ProbDist};

/// Exploration factor M from the ASE rate guarantee: ⌈36σ² ln T⌉, clamped
/// to [1, ⌊T/k⌋].
pub fn default_exploration(sigma: f64, horizon: usize, k: usize) -> usize {
    let raw = (36.0 * sigma * sigma * (horizon as f64).ln()).ceil();
    let upper = (horizon / k).max(1);
    if raw.is_finite() && raw >= 1.0 {
        (raw as usize).clamp(1, upper)
    } else {
        1
    }
}

/// Which policy to build. `m` is the exploration factor M.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    /// Active Sampling with Exploration.
    Ase {
        m: usize,
    },
    /// ASE without exploration (M = 1).
    As,
    /// ASE acting on softmax(β·r̂).
    BetaAse {
        m: usize,
        beta: InverseTemperature,
    },
    /// β = ∞: greedy on r̂ after round-robin, ties split uniformly.
    GreedyEtc {
        m: usize,
    },
    Uniform,
    /// Samples from the true target of the environment it is built for.
    Oracle,
    /// Samples from a fixed distribution regardless of the environment.
    Fixed(ProbDist),
}

impl PolicyKind {
    pub fn id(&self) -> &'static str {
        match self {
            PolicyKind::Ase { .. } => "ase",
            PolicyKind::As => "as",
            PolicyKind::BetaAse { .. } => "beta_ase",
            PolicyKind::GreedyEtc { .. } => "greedy_etc",
            PolicyKind::Uniform => "uniform",
            PolicyKind::Oracle => "oracle",
            PolicyKind::Fixed(_) => "fixed",
        }
    }

    /// M for the ASE family, `None` otherwise.
    pub fn exploration_factor(&self) -> Option<usize> {
        match self {
            PolicyKind::Ase { m } | PolicyKind::BetaAse { m, .. } | PolicyKind::GreedyEtc { m } => {
                Some(*m)
            }
            PolicyKind::As => Some(1),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Ase { m } => write!(f, "ase(M={m})"),
            PolicyKind::BetaAse { m, beta } => write!(f, "beta_ase(M={m},beta={beta})"),
            PolicyKind::GreedyEtc { m } => write!(f, "greedy_etc(M={m})"),
            other => f.write_str(other.id()),
        }
    }
}

/// π̂_t together with the action drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStepOutput {
    pub pi_hat: ProbDist,
    pub action: Arm,
}

/// A stateful policy playing one episode.
pub trait SamplingPolicy: Send {
    fn kind(&self) -> &PolicyKind;
    fn k(&self) -> usize;
    fn horizon(&self) -> usize;
    fn seed(&self) -> u64;

    /// Number of leading steps with a forced, deterministic schedule.
    fn exploration_steps(&self) -> usize {
        0
    }

    /// Chooses a_t. Must be followed by [`SamplingPolicy::update`] before the
    /// next call.
    fn select(&mut self) -> Result<PolicyStepOutput>;

    /// Feeds back the observation for the last selected action.
    fn update(&mut self, observation: f64) -> Result<()>;
}

/// State of ASE (and its β-scaled variants) during an episode.
#[derive(Debug, Clone)]
pub struct AseState {
    kind: PolicyKind,
    k: usize,
    horizon: usize,
    m: usize,
    beta: InverseTemperature,
    t: usize,
    sums: Vec<f64>,
    compensation: Vec<f64>,
    counts: Vec<usize>,
    pending: Option<Arm>,
    seed: u64,
    rng: SplitMix64,
}

impl AseState {
    pub fn new(
        k: usize,
        horizon: usize,
        m: usize,
        beta: InverseTemperature,
        seed: u64,
    ) -> Result<Self> {
        let kind = if beta == InverseTemperature::ONE {
            PolicyKind::Ase { m }
        } else if beta.is_infinite() {
            PolicyKind::GreedyEtc { m }
        } else {
            PolicyKind::BetaAse { m, beta }
        };
        Self::with_kind(kind, k, horizon, m, beta, seed)
    }

    fn with_kind(
        kind: PolicyKind,
        k: usize,
        horizon: usize,
        m: usize,
        beta: InverseTemperature,
        seed: u64,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
        }
        if m == 0 || m.saturating_mul(k) > horizon {
            return Err(Error::InvalidConfig(format!(
                "exploration factor M = {m} outside [1, T/k] for T = {horizon}, k = {k}"
            )));
        }
        Ok(AseState {
            kind,
            k,
            horizon,
            m,
            beta,
            t: 0,
            sums: vec![0.0; k],
            compensation: vec![0.0; k],
            counts: vec![0; k],
            pending: None,
            seed,
            rng: SplitMix64::new(seed),
        })
    }

    /// Steps taken so far.
    pub fn step_count(&self) -> usize {
        self.t
    }

    pub fn exploration_factor(&self) -> usize {
        self.m
    }

    /// n_{t,i}.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// r̂_{t,i}: running mean of arm i, with 0 for arms not yet pulled.
    pub fn estimates(&self) -> Vec<f64> {
        self.sums
            .iter()
            .zip(&self.compensation)
            .zip(&self.counts)
            .map(|((s, c), n)| if *n == 0 { 0.0 } else { (s + c) / *n as f64 })
            .collect()
    }

    /// p̂_{t+1} = softmax(β·r̂_t). Available at every step, but only acted on
    /// after the exploration phase.
    pub fn estimated_distribution(&self) -> Result<ProbDist> {
        softmax_slice(&self.estimates(), self.beta)
    }

    /// One ASE step: absorbs the observation for the previous action (absent
    /// on the first step) and selects the next action.
    pub fn step(&mut self, last_observation: Option<f64>) -> Result<PolicyStepOutput> {
        match (self.t, last_observation) {
            (0, None) => {}
            (0, Some(_)) => {
                return Err(Error::InvalidInput(
                    "no observation is expected before the first step".into(),
                ))
            }
            (_, Some(x)) => self.update(x)?,
            (_, None) => {
                if self.pending.is_some() {
                    return Err(Error::InvalidInput(
                        "the previous action's observation is missing".into(),
                    ));
                }
            }
        }
        self.select()
    }

    /// Replaces the random stream and keeps the history, so the next action
    /// can be resampled from the same π̂.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = SplitMix64::new(seed);
    }

    fn add_observation(&mut self, arm: usize, x: f64) {
        // Neumaier update of the per-arm running sum.
        let s = self.sums[arm];
        let t = s + x;
        if s.abs() >= x.abs() {
            self.compensation[arm] += (s - t) + x;
        } else {
            self.compensation[arm] += (x - t) + s;
        }
        self.sums[arm] = t;
        self.counts[arm] += 1;
    }
}

impl SamplingPolicy for AseState {
    fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    fn k(&self) -> usize {
        self.k
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn exploration_steps(&self) -> usize {
        self.m * self.k
    }

    fn select(&mut self) -> Result<PolicyStepOutput> {
        if self.pending.is_some() {
            return Err(Error::InvalidInput(
                "select called twice without an update".into(),
            ));
        }
        let t = self.t + 1;
        if t > self.horizon {
            return Err(Error::HorizonExceeded {
                step: t,
                horizon: self.horizon,
            });
        }
        let out = if t <= self.m * self.k {
            // Round robin: a_t = (t mod k) + 1.
            let action = Arm::from_index(t % self.k);
            PolicyStepOutput {
                pi_hat: ProbDist::dirac(self.k, action)?,
                action,
            }
        } else {
            let pi_hat = self.estimated_distribution()?;
            let action = pi_hat.sample_with(self.rng.next_f64());
            PolicyStepOutput { pi_hat, action }
        };
        self.t = t;
        self.pending = Some(out.action);
        Ok(out)
    }

    fn update(&mut self, observation: f64) -> Result<()> {
        let arm = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidInput("update called without a selected action".into()))?;
        self.add_observation(arm.index(), observation);
        Ok(())
    }
}

/// A policy whose π̂_t never changes: uniform, oracle and fixed.
#[derive(Debug, Clone)]
pub struct StaticPolicy {
    kind: PolicyKind,
    dist: ProbDist,
    horizon: usize,
    t: usize,
    waiting: bool,
    seed: u64,
    rng: SplitMix64,
}

impl StaticPolicy {
    pub fn new(kind: PolicyKind, dist: ProbDist, horizon: usize, seed: u64) -> Self {
        StaticPolicy {
            kind,
            dist,
            horizon,
            t: 0,
            waiting: false,
            seed,
            rng: SplitMix64::new(seed),
        }
    }
}

impl SamplingPolicy for StaticPolicy {
    fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    fn k(&self) -> usize {
        self.dist.len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn select(&mut self) -> Result<PolicyStepOutput> {
        if self.waiting {
            return Err(Error::InvalidInput(
                "select called twice without an update".into(),
            ));
        }
        let t = self.t + 1;
        if t > self.horizon {
            return Err(Error::HorizonExceeded {
                step: t,
                horizon: self.horizon,
            });
        }
        self.t = t;
        self.waiting = true;
        let action = self.dist.sample_with(self.rng.next_f64());
        Ok(PolicyStepOutput {
            pi_hat: self.dist.clone(),
            action,
        })
    }

    fn update(&mut self, _observation: f64) -> Result<()> {
        if !self.waiting {
            return Err(Error::InvalidInput(
                "update called without a selected action".into(),
            ));
        }
        self.waiting = false;
        Ok(())
    }
}

/// Builds a fresh policy for `env` over `horizon` steps.
pub fn make_policy(
    kind: &PolicyKind,
    env: &EnvironmentSpec,
    horizon: usize,
    seed: u64,
) -> Result<Box<dyn SamplingPolicy>> {
    let k = env.k();
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    let policy: Box<dyn SamplingPolicy> = match kind {
        PolicyKind::Ase { m } => Box::new(AseState::with_kind(
            kind.clone(),
            k,
            horizon,
            *m,
            InverseTemperature::ONE,
            seed,
        )?),
        PolicyKind::As => Box::new(AseState::with_kind(
            kind.clone(),
            k,
            horizon,
            1,
            InverseTemperature::ONE,
            seed,
        )?),
        PolicyKind::BetaAse { m, beta } => Box::new(AseState::with_kind(
            kind.clone(),
            k,
            horizon,
            *m,
            *beta,
            seed,
        )?),
        PolicyKind::GreedyEtc { m } => Box::new(AseState::with_kind(
            kind.clone(),
            k,
            horizon,
            *m,
            InverseTemperature::INFINITE,
            seed,
        )?),
        PolicyKind::Uniform => Box::new(StaticPolicy::new(
            kind.clone(),
            ProbDist::uniform(k)?,
            horizon,
            seed,
        )),
        PolicyKind::Oracle => Box::new(StaticPolicy::new(
            kind.clone(),
            target_distribution(env),
            horizon,
            seed,
        )),
        PolicyKind::Fixed(dist) => {
            if dist.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: dist.len(),
                });
            }
            Box::new(StaticPolicy::new(kind.clone(), dist.clone(), horizon, seed))
        }
    };
    Ok(policy)
}

/// One recorded step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub pi_hat: ProbDist,
    pub action: Arm,
    pub observation: f64,
}

/// The history h_{T+1} of one episode plus the π̂_t reported along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub policy_id: String,
    pub policy_seed: u64,
    pub realization_seed: u64,
    pub k: usize,
    pub horizon: usize,
    pub exploration_steps: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> Vec<Arm> {
        self.steps.iter().map(|s| s.action).collect()
    }

    /// n_{T,i} over the whole trajectory.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for s in &self.steps {
            counts[s.action.index()] += 1;
        }
        counts
    }

    /// q_t for 1 ≤ t ≤ len.
    pub fn action_dist(&self, t: usize) -> Result<ProbDist> {
        if t == 0 {
            return Err(Error::UndefinedEmpirical);
        }
        if t > self.len() {
            return Err(Error::Index {
                what: "step",
                value: t,
                max: self.len(),
            });
        }
        let mut counts = vec![0; self.k];
        for s in &self.steps[..t] {
            counts[s.action.index()] += 1;
        }
        Ok(dist_from_counts(&counts, t))
    }

    /// q_1, …, q_T computed incrementally.
    pub fn action_dists(&self) -> Vec<ProbDist> {
        let mut counts = vec![0; self.k];
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                counts[s.action.index()] += 1;
                dist_from_counts(&counts, i + 1)
            })
            .collect()
    }

    /// Arithmetic mean of the observations at each arm; `None` for arms never
    /// pulled.
    pub fn arm_means(&self) -> Vec<Option<f64>> {
        (0..self.k)
            .map(|i| {
                let xs: Vec<f64> = self
                    .steps
                    .iter()
                    .filter(|s| s.action.index() == i)
                    .map(|s| s.observation)
                    .collect();
                if xs.is_empty() {
                    None
                } else {
                    Some(xs.iter().sum::<f64>() / xs.len() as f64)
                }
            })
            .collect()
    }

    /// First step counted by cumulative policy-level f-KL regret: Mk + 1 for
    /// the ASE family, otherwise the first step whose π̂_t has full support
    /// (len + 1 if there is none).
    pub fn default_fkl_start(&self) -> usize {
        if self.exploration_steps > 0 {
            return self.exploration_steps + 1;
        }
        self.steps
            .iter()
            .position(|s| s.pi_hat.has_full_support())
            .map_or(self.len() + 1, |i| i + 1)
    }
}

/// Plays `policy` against `realization` for the full horizon.
pub fn run_episode(
    policy: &mut dyn SamplingPolicy,
    realization: &Realization,
) -> Result<Trajectory> {
    if policy.k() != realization.k() {
        return Err(Error::InvalidConfig(format!(
            "policy has {} arms but the realization has {}",
            policy.k(),
            realization.k()
        )));
    }
    if policy.horizon() != realization.horizon() {
        return Err(Error::InvalidConfig(format!(
            "policy horizon {} does not match realization horizon {}",
            policy.horizon(),
            realization.horizon()
        )));
    }
    let horizon = realization.horizon();
    let mut steps = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let out = policy.select()?;
        let observation = realization.observe(t, out.action)?;
        policy.update(observation)?;
        steps.push(Step {
            pi_hat: out.pi_hat,
            action: out.action,
            observation,
        });
    }
    Ok(Trajectory {
        policy_id: policy.kind().id().to_string(),
        policy_seed: policy.seed(),
        realization_seed: realization.seed(),
        k: realization.k(),
        horizon,
        exploration_steps: policy.exploration_steps(),
        steps,
    })
}

/// Builds `kind` with `policy_seed` and plays one episode.
pub fn simulate(
    kind: &PolicyKind,
    env: &EnvironmentSpec,
    realization: &Realization,
    policy_seed: u64,
) -> Result<Trajectory> {
    let mut policy = make_policy(kind, env, realization.horizon(), policy_seed)?;
    run_episode(policy.as_mut(), realization)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{sample_realization, NoiseModel};
    use crate::simplex::{softmax, RewardVector};

    fn env(r: &[f64], noise: NoiseModel) -> EnvironmentSpec {
        EnvironmentSpec::new(RewardVector::new(r.to_vec()).unwrap(), noise).unwrap()
    }

    #[test]
    fn round_robin_schedule() {
        let mut s = AseState::new(3, 6, 2, InverseTemperature::ONE, 0).unwrap();
        let mut labels = Vec::new();
        let mut obs = None;
        for _ in 0..6 {
            let out = s.step(obs).unwrap();
            assert_eq!(out.pi_hat, ProbDist::dirac(3, out.action).unwrap());
            labels.push(out.action.label());
            obs = Some(0.0);
        }
        assert_eq!(labels, vec![2, 3, 1, 2, 3, 1]);
        s.update(0.0).unwrap();
        assert_eq!(s.counts(), &[2, 2, 2]);
        assert!(matches!(s.select(), Err(Error::HorizonExceeded { .. })));
    }

    #[test]
    fn symmetric_estimates_give_uniform() {
        let mut s = AseState::new(2, 5, 1, InverseTemperature::ONE, 1).unwrap();
        s.step(None).unwrap();
        s.step(Some(0.0)).unwrap();
        let out = s.step(Some(0.0)).unwrap();
        assert_eq!(out.pi_hat.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn step_checks_observation_protocol() {
        let mut s = AseState::new(2, 5, 1, InverseTemperature::ONE, 1).unwrap();
        assert!(s.step(Some(1.0)).is_err());
        s.step(None).unwrap();
        assert!(s.step(None).is_err());
    }

    #[test]
    fn noiseless_ase_matches_target_after_exploration() {
        let e = env(&[0.3, -0.2, 1.1, 0.0], NoiseModel::None);
        let p = target_distribution(&e);
        let real = sample_realization(&e, 40, 0).unwrap();
        let traj = simulate(&PolicyKind::Ase { m: 3 }, &e, &real, 9).unwrap();
        for (t, s) in traj.steps.iter().enumerate() {
            if t + 1 > 12 {
                assert_eq!(s.pi_hat, p);
            }
        }
    }

    #[test]
    fn exploration_bounds_enforced() {
        let e = env(&[0.0, 1.0], NoiseModel::None);
        assert!(make_policy(&PolicyKind::Ase { m: 0 }, &e, 10, 0).is_err());
        assert!(make_policy(&PolicyKind::Ase { m: 6 }, &e, 10, 0).is_err());
        assert!(make_policy(&PolicyKind::Ase { m: 5 }, &e, 10, 0).is_ok());
        assert!(make_policy(&PolicyKind::As, &e, 1, 0).is_err());
    }

    #[test]
    fn as_is_ase_with_one_round() {
        let e = env(&[0.2, 0.9, 0.5], NoiseModel::Gaussian { sigma: 1.0 });
        let real = sample_realization(&e, 200, 4).unwrap();
        let a = simulate(&PolicyKind::As, &e, &real, 77).unwrap();
        let b = simulate(&PolicyKind::Ase { m: 1 }, &e, &real, 77).unwrap();
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn oracle_reports_target() {
        let e = env(&[0.2, 0.9, 0.5], NoiseModel::None);
        let p = target_distribution(&e);
        let real = sample_realization(&e, 50, 4).unwrap();
        let traj = simulate(&PolicyKind::Oracle, &e, &real, 3).unwrap();
        assert!(traj.steps.iter().all(|s| s.pi_hat == p));
    }

    #[test]
    fn uniform_episode_is_reproducible() {
        let e = env(&[0.0, 1.0], NoiseModel::Gaussian { sigma: 1.0 });
        let real = sample_realization(&e, 4, 10).unwrap();
        let a = simulate(&PolicyKind::Uniform, &e, &real, 5).unwrap();
        let b = simulate(&PolicyKind::Uniform, &e, &real, 5).unwrap();
        assert_eq!(a, b);
        for (t, s) in a.steps.iter().enumerate() {
            assert_eq!(s.observation, real.observe(t + 1, s.action).unwrap());
        }
        let counts = a.counts();
        let q = a.action_dist(4).unwrap();
        for (w, c) in q.weights().iter().zip(&counts) {
            assert_eq!(*w, *c as f64 / 4.0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let e2 = env(&[0.0, 1.0], NoiseModel::None);
        let e3 = env(&[0.0, 1.0, 2.0], NoiseModel::None);
        let real = sample_realization(&e3, 10, 0).unwrap();
        let mut p = make_policy(&PolicyKind::Uniform, &e2, 10, 0).unwrap();
        assert!(matches!(
            run_episode(p.as_mut(), &real),
            Err(Error::InvalidConfig(_))
        ));
        let mut p = make_policy(&PolicyKind::Uniform, &e3, 9, 0).unwrap();
        assert!(run_episode(p.as_mut(), &real).is_err());
    }

    #[test]
    fn greedy_breaks_ties_uniformly() {
        let e = env(&[1.0, 1.0, 0.0], NoiseModel::None);
        let real = sample_realization(&e, 3 + 2_000, 0).unwrap();
        let traj = simulate(&PolicyKind::GreedyEtc { m: 1 }, &e, &real, 12).unwrap();
        let last = &traj.steps.last().unwrap().pi_hat;
        assert_eq!(last.weights(), &[0.5, 0.5, 0.0]);
        let counts = traj.counts();
        assert_eq!(counts[2], 1);
        let frac = counts[0] as f64 / 2_000.0;
        assert!((frac - 0.5).abs() < 4.0 * (0.25f64 / 2_000.0).sqrt());
    }

    #[test]
    fn estimates_skip_unpulled_arms() {
        let mut s = AseState::new(3, 10, 1, InverseTemperature::ONE, 0).unwrap();
        s.step(None).unwrap();
        s.update(2.0).unwrap();
        assert_eq!(s.estimates(), vec![0.0, 2.0, 0.0]);
        let p = s.estimated_distribution().unwrap();
        let direct = softmax(
            &RewardVector::new(vec![0.0, 2.0, 0.0]).unwrap(),
            InverseTemperature::ONE,
        )
        .unwrap();
        assert_eq!(p, direct);
    }

    #[test]
    fn default_exploration_clamps() {
        assert_eq!(default_exploration(1.0, 16_384, 10), 350);
        assert_eq!(default_exploration(1.0, 256, 10), 25);
        assert_eq!(default_exploration(1.0, 10, 10), 1);
        assert_eq!(default_exploration(0.0, 1000, 10), 1);
    }
}
