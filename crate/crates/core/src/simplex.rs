//! Probability vectors on the k-simplex, reward vectors and the softmax map.
//!
//! All logarithms are natural. Sums run through [`neumaier_sum`] in index
//! order so that a fixed input always produces the same bits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance on `sum(weights) == 1` for a constructed [`ProbDist`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Inputs within this distance of the simplex are renormalized; anything
/// farther is rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

/// Compensated (Neumaier) summation in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// An arm of the bandit. Stored 0-based; displayed and parsed 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arm(usize);

impl Arm {
    pub const fn from_index(index: usize) -> Self {
        Arm(index)
    }

    /// Builds an arm from its 1-based label, checking it against `k`.
    pub fn from_label(label: usize, k: usize) -> Result<Self> {
        if label == 0 || label > k {
            return Err(Error::Index {
                what: "arm",
                value: label,
                max: k,
            });
        }
        Ok(Arm(label - 1))
    }

    /// 0-based position, for indexing slices.
    pub const fn index(self) -> usize {
        self.0
    }

    /// 1-based label used by every external interface.
    pub const fn label(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// A point on the probability simplex with at least two coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbDist {
    weights: Vec<f64>,
}

impl ProbDist {
    /// Validates `weights` and renormalizes them when they are within
    /// [`RENORMALIZE_TOLERANCE`] of summing to one.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a distribution needs at least 2 arms, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "distribution weight {w} is negative or not finite"
            )));
        }
        let total = neumaier_sum(weights.iter().copied());
        if (total - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, which is not on the simplex"
            )));
        }
        if total != 1.0 {
            for w in &mut weights {
                *w /= total;
            }
        }
        Ok(ProbDist { weights })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("k must be >= 2, got {k}")));
        }
        Ok(ProbDist {
            weights: vec![1.0 / k as f64; k],
        })
    }

    /// Point mass on `arm`.
    pub fn dirac(k: usize, arm: Arm) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("k must be >= 2, got {k}")));
        }
        if arm.index() >= k {
            return Err(Error::Index {
                what: "arm",
                value: arm.label(),
                max: k,
            });
        }
        let mut weights = vec![0.0; k];
        weights[arm.index()] = 1.0;
        Ok(ProbDist { weights })
    }

    /// Pointwise average of equally weighted distributions.
    pub fn average(dists: &[ProbDist]) -> Result<Self> {
        let first = dists
            .first()
            .ok_or_else(|| Error::InvalidInput("cannot average zero distributions".into()))?;
        let k = first.len();
        let mut acc = vec![0.0; k];
        for d in dists {
            if d.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: d.len(),
                });
            }
            for (a, w) in acc.iter_mut().zip(d.weights()) {
                *a += w;
            }
        }
        let n = dists.len() as f64;
        ProbDist::new(acc.into_iter().map(|a| a / n).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, arm: Arm) -> f64 {
        self.weights[arm.index()]
    }

    pub fn has_full_support(&self) -> bool {
        self.weights.iter().all(|w| *w > 0.0)
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Inverse-CDF draw over arms 1..k for a uniform `u` in [0, 1).
    ///
    /// Never returns an arm outside the support.
    pub fn sample_with(&self, u: f64) -> Arm {
        let mut cumulative = 0.0;
        let mut last_supported = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            last_supported = i;
            cumulative += w;
            if u < cumulative {
                return Arm(i);
            }
        }
        Arm(last_supported)
    }
}

impl<'de> Deserialize<'de> for ProbDist {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let weights = Vec::<f64>::deserialize(deserializer)?;
        ProbDist::new(weights).map_err(serde::de::Error::custom)
    }
}

/// Mean rewards (unnormalized log-probabilities), one per arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RewardVector {
    values: Vec<f64>,
}

impl RewardVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a reward vector needs at least 2 arms, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "reward entry {v} is not finite"
            )));
        }
        Ok(RewardVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// r* = max_i r_i.
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        RewardVector::new(self.values.iter().map(|v| v * c).collect())
    }
}

impl<'de> Deserialize<'de> for RewardVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        RewardVector::new(values).map_err(serde::de::Error::custom)
    }
}

/// Inverse temperature β in (0, ∞]. `∞` selects the greedy limit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InverseTemperature(f64);

impl InverseTemperature {
    pub const ONE: InverseTemperature = InverseTemperature(1.0);
    pub const INFINITE: InverseTemperature = InverseTemperature(f64::INFINITY);

    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "inverse temperature must be > 0, got {beta}"
            )));
        }
        Ok(InverseTemperature(beta))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for InverseTemperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for InverseTemperature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(InverseTemperature::INFINITE),
            other => {
                let v: f64 = other.parse().map_err(|_| {
                    Error::InvalidInput(format!("bad inverse temperature {other:?}"))
                })?;
                InverseTemperature::new(v)
            }
        }
    }
}

impl Serialize for InverseTemperature {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for InverseTemperature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => InverseTemperature::new(v),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// softmax(β·r), computed with max-subtraction. At β = ∞ the mass is spread
/// evenly over the arms attaining max r.
pub fn softmax(r: &RewardVector, beta: InverseTemperature) -> Result<ProbDist> {
    softmax_slice(r.values(), beta)
}

pub(crate) fn softmax_slice(r: &[f64], beta: InverseTemperature) -> Result<ProbDist> {
    if r.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "softmax needs at least 2 arms, got {}",
            r.len()
        )));
    }
    if let Some(v) = r.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "reward entry {v} is not finite"
        )));
    }
    let top = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if beta.is_infinite() {
        let ties = r.iter().filter(|v| **v == top).count() as f64;
        let weights = r
            .iter()
            .map(|v| if *v == top { 1.0 / ties } else { 0.0 })
            .collect();
        return Ok(ProbDist { weights });
    }
    let b = beta.value();
    let shift = b * top;
    if !shift.is_finite() {
        return Err(Error::InvalidInput(format!(
            "beta * max reward overflows ({b} * {top})"
        )));
    }
    let exps: Vec<f64> = r.iter().map(|v| (b * v - shift).exp()).collect();
    let total = neumaier_sum(exps.iter().copied());
    Ok(ProbDist {
        weights: exps.into_iter().map(|e| e / total).collect(),
    })
}

/// Shannon entropy −Σ p_i log p_i with 0·log 0 = 0.
pub fn entropy(p: &ProbDist) -> f64 {
    let h = -neumaier_sum(p.weights().iter().filter(|w| **w > 0.0).map(|w| w * w.ln()));
    h.max(0.0)
}

/// q_t: the empirical distribution of `actions` over `k` arms.
pub fn empirical_action_dist(actions: &[Arm], k: usize) -> Result<ProbDist> {
    if actions.is_empty() {
        return Err(Error::UndefinedEmpirical);
    }
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be >= 2, got {k}")));
    }
    let mut counts = vec![0usize; k];
    for a in actions {
        if a.index() >= k {
            return Err(Error::Index {
                what: "arm",
                value: a.label(),
                max: k,
            });
        }
        counts[a.index()] += 1;
    }
    Ok(dist_from_counts(&counts, actions.len()))
}

/// counts/t without re-validating; callers guarantee Σ counts = t > 0.
pub(crate) fn dist_from_counts(counts: &[usize], t: usize) -> ProbDist {
    let t = t as f64;
    ProbDist {
        weights: counts.iter().map(|c| *c as f64 / t).collect(),
    }
}
