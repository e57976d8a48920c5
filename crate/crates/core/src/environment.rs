//! Environments: mean rewards plus a noise law, and pre-drawn realizations.
//!
//! A [`Realization`] is the full T×k observation matrix of one environment
//! run. Drawing it up-front lets several policies (or several policy seeds)
//! play against exactly the same environment randomness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regret::DistanceKind;
use crate::rng::SplitMix64;
use crate::simplex::{softmax, Arm, InverseTemperature, ProbDist, RewardVector};

/// Observation noise added to the mean reward of the pulled arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// i.i.d. N(0, σ²).
    Gaussian {
        sigma: f64,
    },
    /// i.i.d. uniform on [−σ, σ]; |noise| ≤ σ always.
    BoundedUniform {
        sigma: f64,
    },
    None,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Gaussian { sigma } | NoiseModel::BoundedUniform { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "noise sigma must be finite and > 0, got {sigma}"
                    )));
                }
                Ok(())
            }
            NoiseModel::None => Ok(()),
        }
    }

    /// σ, or 0 for the noiseless model.
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } | NoiseModel::BoundedUniform { sigma } => sigma,
            NoiseModel::None => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::BoundedUniform { .. } => "bounded_uniform",
            NoiseModel::None => "none",
        }
    }

    fn scaled(&self, c: f64) -> Self {
        match *self {
            NoiseModel::Gaussian { sigma } => NoiseModel::Gaussian {
                sigma: sigma * c.abs(),
            },
            NoiseModel::BoundedUniform { sigma } => NoiseModel::BoundedUniform {
                sigma: sigma * c.abs(),
            },
            NoiseModel::None => NoiseModel::None,
        }
    }
}

/// ν: one reward distribution per arm, described by its mean and noise law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvironment")]
pub struct EnvironmentSpec {
    rewards: RewardVector,
    noise: NoiseModel,
}

#[derive(Deserialize)]
struct RawEnvironment {
    rewards: RewardVector,
    noise: NoiseModel,
}

impl TryFrom<RawEnvironment> for EnvironmentSpec {
    type Error = Error;

    fn try_from(raw: RawEnvironment) -> Result<Self> {
        EnvironmentSpec::new(raw.rewards, raw.noise)
    }
}

impl EnvironmentSpec {
    pub fn new(rewards: RewardVector, noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        Ok(EnvironmentSpec { rewards, noise })
    }

    pub fn k(&self) -> usize {
        self.rewards.len()
    }

    pub fn rewards(&self) -> &RewardVector {
        &self.rewards
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// c·ν: every observation and mean reward multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        EnvironmentSpec::new(self.rewards.scaled(c)?, self.noise.scaled(c))
    }
}

/// p = softmax(r).
pub fn target_distribution(env: &EnvironmentSpec) -> ProbDist {
    // rewards are finite by construction, so softmax at β = 1 cannot fail.
    softmax(env.rewards(), InverseTemperature::ONE).expect("finite rewards")
}

/// ω^ν: the T×k matrix of observations, row t holding what each arm would
/// return at step t.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    matrix: Vec<f64>,
    horizon: usize,
    k: usize,
    seed: u64,
}

impl Realization {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row `t` (1-based).
    pub fn row(&self, t: usize) -> Result<&[f64]> {
        self.check_step(t)?;
        Ok(&self.matrix[(t - 1) * self.k..t * self.k])
    }

    /// Observation x_t when `arm` is pulled at step `t` (1-based).
    pub fn observe(&self, t: usize, arm: Arm) -> Result<f64> {
        self.check_step(t)?;
        if arm.index() >= self.k {
            return Err(Error::Index {
                what: "arm",
                value: arm.label(),
                max: self.k,
            });
        }
        Ok(self.matrix[(t - 1) * self.k + arm.index()])
    }

    /// Column means, i.e. the per-arm sample mean over the horizon.
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.k)
            .map(|i| {
                crate::simplex::neumaier_sum(self.matrix.iter().skip(i).step_by(self.k).copied())
                    / self.horizon as f64
            })
            .collect()
    }

    /// Realization of c·ν sharing this one's randomness.
    pub fn scaled(&self, c: f64) -> Realization {
        Realization {
            matrix: self.matrix.iter().map(|x| x * c).collect(),
            ..self.clone()
        }
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(Error::Index {
                what: "step",
                value: t,
                max: self.horizon,
            });
        }
        Ok(())
    }
}

/// Draws the observation matrix of `env` for `horizon` steps.
///
/// Entries are generated row by row from a single SplitMix64 stream keyed by
/// `seed`, so the first T rows do not depend on the horizon requested.
pub fn sample_realization(env: &EnvironmentSpec, horizon: usize, seed: u64) -> Result<Realization> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    let k = env.k();
    let r = env.rewards().values();
    let mut rng = SplitMix64::new(seed);
    let mut matrix = Vec::with_capacity(horizon * k);
    for _ in 0..horizon {
        for mean in r {
            let noise = match env.noise() {
                NoiseModel::Gaussian { sigma } => sigma * rng.next_gaussian(),
                NoiseModel::BoundedUniform { sigma } => rng.next_uniform(-sigma, sigma),
                NoiseModel::None => 0.0,
            };
            matrix.push(mean + noise);
        }
    }
    Ok(Realization {
        matrix,
        horizon,
        k,
        seed,
    })
}

/// ε = 1/√(Tk) used by the two-environment lower-bound construction.
pub fn lower_bound_epsilon(k: usize, horizon: usize) -> f64 {
    1.0 / ((horizon * k) as f64).sqrt()
}

/// The pair (ν, ν′) of unit-gaussian environments whose targets are hard to
/// tell apart in T steps: r_i = ε everywhere, while r′ puts 2ε on the first
/// half of the arms, 0 on the second half and, for odd k, log((e^{2ε}+1)/2)
/// on the middle arm.
pub fn lower_bound_pair(k: usize, horizon: usize) -> Result<(EnvironmentSpec, EnvironmentSpec)> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be >= 2, got {k}")));
    }
    if horizon <= 4 {
        return Err(Error::InvalidInput(format!(
            "horizon must be > 4 for the lower-bound pair, got {horizon}"
        )));
    }
    let eps = lower_bound_epsilon(k, horizon);
    let r = vec![eps; k];
    let r_prime = (1..=k)
        .map(|i| {
            let twice = 2 * i;
            if twice < k + 1 {
                2.0 * eps
            } else if twice == k + 1 {
                // log((e^{2ε} + 1) / 2)
                ((2.0 * eps).exp_m1() / 2.0).ln_1p()
            } else {
                0.0
            }
        })
        .collect();
    let noise = NoiseModel::Gaussian { sigma: 1.0 };
    Ok((
        EnvironmentSpec::new(RewardVector::new(r)?, noise)?,
        EnvironmentSpec::new(RewardVector::new(r_prime)?, noise)?,
    ))
}

/// Minimax lower bound on expected simple regret over unit-subgaussian
/// environments: 1/(126√(Tk)) for TV and 1/(567·T·k) for either KL.
pub fn minimax_lower_bound_value(k: usize, horizon: usize, kind: DistanceKind) -> Result<f64> {
    if k < 2 || horizon <= 4 {
        return Err(Error::InvalidInput(format!(
            "lower bound needs k > 1 and T > 4, got k = {k}, T = {horizon}"
        )));
    }
    let tk = (horizon * k) as f64;
    Ok(match kind {
        DistanceKind::Tv => 1.0 / (126.0 * tk.sqrt()),
        DistanceKind::Rkl | DistanceKind::Fkl => 1.0 / (567.0 * tk),
    })
}
