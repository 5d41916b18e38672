//! Conditional choice probabilities `P[c(s) = i | u]` for each behavior model.
//!
//! Closed forms are used where they exist (rational maximization, tables,
//! alpha-rational mixtures, multinomial logit, default nudges). General
//! additive-error random utility models are estimated by seeded Monte Carlo.
//!
//! `Logit { q }` and `RandomUtilityMc` with `GumbelIid { scale: 1/q }` describe
//! the same behavior; the former is exact, the latter a simulation of it.

use ndarray::Array2;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_distribution, check_probability, invalid, Error, Result};
use crate::scenario::ChoiceSet;

/// Default number of Monte Carlo draws per utility type.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// IID additive error distribution shared by every action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorSpec {
    /// Standard type-1 extreme value scaled by `scale` (= 1/q).
    GumbelIid { scale: f64 },
    /// Uniform on `[-delta, delta]`.
    UniformBoundedIid { delta: f64 },
    NormalIid { sigma: f64 },
}

impl ErrorSpec {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            ErrorSpec::GumbelIid { scale } => ("scale", scale),
            ErrorSpec::UniformBoundedIid { delta } => ("delta", delta),
            ErrorSpec::NormalIid { sigma } => ("sigma", sigma),
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(invalid(name, format!("{v} must be positive and finite")))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorSpec::GumbelIid { scale } => {
                let u: f64 = rng.sample(Open01);
                -scale * (-u.ln()).ln()
            }
            ErrorSpec::UniformBoundedIid { delta } => rng.random_range(-delta..=delta),
            ErrorSpec::NormalIid { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
        }
    }
}

/// A behavior model producing conditional choice probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChoiceModel {
    /// Deterministic utility maximization, ties to the lowest index.
    RationalMax,
    /// Maximizes with probability `alpha`, otherwise draws from `background`.
    AlphaRational { alpha: f64, background: Vec<f64> },
    /// Choice independent of utility.
    IndependentTable { probs: Vec<f64> },
    /// Multinomial logit with degree of rationality `q`.
    Logit { q: f64 },
    /// Non-default actions carry an as-if cost `gamma`; `base` then chooses.
    DefaultNudge {
        default_action: usize,
        gamma: f64,
        base: Box<ChoiceModel>,
    },
    /// Additive-error random utility model estimated from seeded draws.
    RandomUtilityMc {
        error: ErrorSpec,
        samples: usize,
        seed: u64,
    },
}

impl ChoiceModel {
    pub fn logit(q: f64) -> Self {
        ChoiceModel::Logit { q }
    }

    pub fn monte_carlo(error: ErrorSpec, samples: usize, seed: u64) -> Self {
        ChoiceModel::RandomUtilityMc {
            error,
            samples,
            seed,
        }
    }

    pub fn nudge(default_action: usize, gamma: f64, base: ChoiceModel) -> Self {
        ChoiceModel::DefaultNudge {
            default_action,
            gamma,
            base: Box::new(base),
        }
    }

    /// Checks parameters against an action set of size `num_actions`.
    pub fn validate(&self, num_actions: usize) -> Result<()> {
        match self {
            ChoiceModel::RationalMax => Ok(()),
            ChoiceModel::AlphaRational { alpha, background } => {
                check_probability("alpha", *alpha)?;
                check_table("background", background, num_actions)
            }
            ChoiceModel::IndependentTable { probs } => check_table("probs", probs, num_actions),
            ChoiceModel::Logit { q } => check_q(*q),
            ChoiceModel::DefaultNudge {
                default_action,
                gamma,
                base,
            } => {
                if *default_action >= num_actions {
                    return Err(Error::ActionOutOfRange {
                        index: *default_action,
                        len: num_actions,
                    });
                }
                if !(gamma.is_finite() && *gamma >= 0.0) {
                    return Err(invalid("gamma", format!("{gamma} must be >= 0")));
                }
                if matches!(**base, ChoiceModel::DefaultNudge { .. }) {
                    return Err(invalid("base", "nudges cannot be nested"));
                }
                base.validate(num_actions)
            }
            ChoiceModel::RandomUtilityMc { error, samples, .. } => {
                error.validate()?;
                if *samples == 0 {
                    return Err(invalid("samples", "must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Number of Monte Carlo draws behind the estimate, if simulated.
    pub fn mc_samples(&self) -> Option<usize> {
        match self {
            ChoiceModel::RandomUtilityMc { samples, .. } => Some(*samples),
            ChoiceModel::DefaultNudge { base, .. } => base.mc_samples(),
            _ => None,
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q >= 0.0 {
        Ok(())
    } else {
        Err(invalid("q", format!("{q} must be finite and >= 0")))
    }
}

fn check_table(name: &'static str, probs: &[f64], num_actions: usize) -> Result<()> {
    if probs.len() != num_actions {
        return Err(Error::Dimension(format!(
            "{name} has {} entries for {num_actions} actions",
            probs.len()
        )));
    }
    check_distribution(name, probs, 1e-12)
}

/// Probability vector aligned with the available actions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoiceProbabilities {
    pub available: ChoiceSet,
    pub probs: Vec<f64>,
}

impl ChoiceProbabilities {
    /// Probability of `action`; zero when it is unavailable.
    pub fn prob(&self, action: usize) -> f64 {
        self.available
            .indices()
            .iter()
            .position(|&i| i == action)
            .map_or(0.0, |k| self.probs[k])
    }

    /// Choice-probability-weighted utility `v[s, u]`.
    pub fn expected_utility(&self, utilities: &[f64]) -> f64 {
        self.available
            .indices()
            .iter()
            .zip(&self.probs)
            .map(|(&i, p)| p * utilities[i])
            .sum()
    }

    /// Variance of the utility of the chosen action.
    pub fn utility_variance(&self, utilities: &[f64]) -> f64 {
        let mean = self.expected_utility(utilities);
        self.available
            .indices()
            .iter()
            .zip(&self.probs)
            .map(|(&i, p)| p * (utilities[i] - mean).powi(2))
            .sum()
    }
}

/// Conditional choice probabilities of one utility vector under `model`.
pub fn choice_probabilities(
    utilities: &[f64],
    available: &ChoiceSet,
    model: &ChoiceModel,
) -> Result<ChoiceProbabilities> {
    choice_probabilities_stream(utilities, available, model, 0)
}

/// As [`choice_probabilities`], with Monte Carlo draws taken from the
/// sub-stream `stream` of the model's seed.
pub(crate) fn choice_probabilities_stream(
    utilities: &[f64],
    available: &ChoiceSet,
    model: &ChoiceModel,
    stream: u64,
) -> Result<ChoiceProbabilities> {
    if available.is_empty() {
        return Err(Error::EmptyChoiceSet);
    }
    available.check_within(utilities.len())?;
    if let Some(action) = utilities.iter().position(|u| !u.is_finite()) {
        return Err(Error::NonFiniteUtility { index: 0, action });
    }
    model.validate(utilities.len())?;
    let probs = probabilities_unchecked(utilities, available, model, stream);
    Ok(ChoiceProbabilities {
        available: available.clone(),
        probs,
    })
}

fn probabilities_unchecked(
    utilities: &[f64],
    available: &ChoiceSet,
    model: &ChoiceModel,
    stream: u64,
) -> Vec<f64> {
    match model {
        ChoiceModel::RationalMax => rational_probabilities(utilities, available),
        ChoiceModel::IndependentTable { probs } => table_probabilities(probs, available),
        ChoiceModel::AlphaRational { alpha, background } => {
            let rational = rational_probabilities(utilities, available);
            let table = table_probabilities(background, available);
            rational
                .iter()
                .zip(&table)
                .map(|(r, t)| alpha * r + (1.0 - alpha) * t)
                .collect()
        }
        ChoiceModel::Logit { q } => logit_probabilities(utilities, available, *q),
        ChoiceModel::DefaultNudge {
            default_action,
            gamma,
            base,
        } => {
            let perceived: Vec<f64> = utilities
                .iter()
                .enumerate()
                .map(|(i, &u)| if i == *default_action { u } else { u - gamma })
                .collect();
            probabilities_unchecked(&perceived, available, base, stream)
        }
        ChoiceModel::RandomUtilityMc {
            error,
            samples,
            seed,
        } => mc_probabilities(utilities, available, error, *samples, derive_seed(*seed, stream)),
    }
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (k, v) in values.enumerate() {
        if v > best_value {
            best = k;
            best_value = v;
        }
    }
    best
}

fn rational_probabilities(utilities: &[f64], available: &ChoiceSet) -> Vec<f64> {
    let best = argmax_lowest(available.indices().iter().map(|&i| utilities[i]));
    let mut probs = vec![0.0; available.len()];
    probs[best] = 1.0;
    probs
}

/// Table restricted to `available` and renormalized. A table with no mass on
/// the available actions falls back to uniform choice among them.
fn table_probabilities(table: &[f64], available: &ChoiceSet) -> Vec<f64> {
    let mass: f64 = available.indices().iter().map(|&i| table[i]).sum();
    if mass > 0.0 {
        available.indices().iter().map(|&i| table[i] / mass).collect()
    } else {
        vec![1.0 / available.len() as f64; available.len()]
    }
}

/// Softmax of `q * u` over `available`, computed with max subtraction.
pub fn logit_probabilities(utilities: &[f64], available: &ChoiceSet, q: f64) -> Vec<f64> {
    let scaled: Vec<f64> = available.indices().iter().map(|&i| q * utilities[i]).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// SplitMix64 finalizer applied to `seed ^ stream`-style mixing so that
/// per-type streams are independent of evaluation order.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mc_probabilities(
    utilities: &[f64],
    available: &ChoiceSet,
    error: &ErrorSpec,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; available.len()];
    for _ in 0..samples {
        // draws are taken in available-action order, matching `sample_errors`
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (k, &i) in available.indices().iter().enumerate() {
            let v = utilities[i] + error.draw(&mut rng);
            if v > best_value {
                best = k;
                best_value = v;
            }
        }
        counts[best] += 1;
    }
    counts
        .iter()
        .map(|&c| c as f64 / samples as f64)
        .collect()
}

/// Deterministic `count x actions` matrix of IID error draws.
pub fn sample_errors(spec: &ErrorSpec, count: usize, actions: usize, seed: u64) -> Result<Array2<f64>> {
    spec.validate()?;
    if count == 0 || actions == 0 {
        return Err(invalid("count", "need at least one row and one column"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    Ok(Array2::from_shape_simple_fn((count, actions), || {
        spec.draw(&mut rng)
    }))
}

/// Probability that the action with higher true utility is chosen (index 0
/// on ties) when each row of `base_errors` is scaled by `1/q`.
///
/// The same draws are reused for every `q`, so the result is exactly
/// non-decreasing in `q`.
pub fn binary_scaled_choice_prob(utilities: &[f64], base_errors: &Array2<f64>, q: f64) -> Result<f64> {
    if utilities.len() != 2 || base_errors.ncols() != 2 {
        return Err(Error::Dimension(
            "binary comparison needs exactly two actions".into(),
        ));
    }
    if base_errors.nrows() == 0 {
        return Err(Error::Dimension("no error draws".into()));
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(invalid("q", format!("{q} must be positive and finite")));
    }
    // Action 1 is chosen iff u1 + e1/q > u0 + e0/q, i.e. q (u1 - u0) > e0 - e1.
    let gap = q * (utilities[1] - utilities[0]);
    let second_chosen = base_errors
        .rows()
        .into_iter()
        .filter(|row| gap > row[0] - row[1])
        .count();
    let n = base_errors.nrows();
    let better_count = if utilities[1] > utilities[0] {
        second_chosen
    } else {
        n - second_chosen
    };
    Ok(better_count as f64 / n as f64)
}
