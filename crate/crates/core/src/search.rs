//! Exhaustive search over choice-constraining policies and logit sweeps of
//! the degree of rationality `q`, with outer envelope and crossing detection.

use rayon::prelude::*;
use serde::Serialize;

use crate::choice::ChoiceModel;
use crate::error::{invalid, Error, Result};
use crate::scenario::{ActionSet, ChoiceSet, Population};
use crate::welfare::{logit_welfare, policy_welfare};

/// Largest action set accepted for exhaustive enumeration.
pub const MAX_ENUMERATED_ACTIONS: usize = 20;

/// `|Delta|` at or below this counts as touching, not a sign.
const TOUCH_TOL: f64 = 1e-12;

/// Welfare values closer than this (relative) are ties, so the argmax does
/// not depend on summation order.
const TIE_TOL: f64 = 1e-12;

/// Index of the best value; near-ties keep the earliest index.
fn tie_broken_argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut values = values.into_iter();
    let mut best = 0;
    let mut best_value = values.next().unwrap_or(f64::NAN);
    for (k, v) in values.enumerate().map(|(k, v)| (k + 1, v)) {
        if v > best_value + TIE_TOL * best_value.abs().max(1.0) {
            best = k;
            best_value = v;
        }
    }
    best
}

/// Strictly increasing grid of non-negative `q` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    q_values: Vec<f64>,
}

impl SweepGrid {
    pub fn new(q_values: Vec<f64>) -> Result<Self> {
        if q_values.is_empty() {
            return Err(invalid("q_values", "grid is empty"));
        }
        if q_values.iter().any(|q| !q.is_finite() || *q < 0.0) {
            return Err(invalid("q_values", "values must be finite and >= 0"));
        }
        if q_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("q_values", "values must be strictly increasing"));
        }
        Ok(SweepGrid { q_values })
    }

    /// `q_min, q_min + step, ...` up to `q_max` (inclusive, up to rounding).
    pub fn range(q_min: f64, q_max: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid("q_step", format!("{step} must be positive")));
        }
        if !(q_min.is_finite() && q_max.is_finite() && q_max >= q_min) {
            return Err(invalid("q_max", "need finite q_min <= q_max"));
        }
        let n = ((q_max - q_min) / step + 1e-9).floor() as usize;
        Self::new((0..=n).map(|k| q_min + k as f64 * step).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.q_values
    }

    pub fn len(&self) -> usize {
        self.q_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_values.is_empty()
    }
}

impl Default for SweepGrid {
    /// 0 to 10 in steps of 0.05.
    fn default() -> Self {
        SweepGrid::range(0.0, 10.0, 0.05).expect("static grid is valid")
    }
}

/// All non-empty subsets, ordered by size and then lexicographically.
pub fn enumerate_choice_sets(actions: &ActionSet) -> Result<Vec<ChoiceSet>> {
    let n = actions.len();
    if n > MAX_ENUMERATED_ACTIONS {
        return Err(Error::TooManyActions(n));
    }
    let mut out = Vec::with_capacity((1usize << n) - 1);
    for k in 1..=n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            out.push(ChoiceSet::new(combo.clone())?);
            // advance to the next k-combination in lexicographic order
            let Some(pos) = (0..k).rev().find(|&p| combo[p] < n - k + p) else {
                break;
            };
            combo[pos] += 1;
            for p in pos + 1..k {
                combo[p] = combo[p - 1] + 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    /// Indices into [`SweepResult::subsets`].
    pub subset_a: usize,
    pub subset_b: usize,
    pub q_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub subsets: Vec<ChoiceSet>,
    pub grid: SweepGrid,
    /// `welfare[s][k]` is the welfare of subset `s` at `grid[k]`.
    pub welfare: Vec<Vec<f64>>,
    /// Best subset index at each grid point.
    pub envelope: Vec<usize>,
    pub crossings: Vec<Crossing>,
}

impl SweepResult {
    pub fn subset_index(&self, subset: &ChoiceSet) -> Option<usize> {
        self.subsets.iter().position(|s| s == subset)
    }

    pub fn crossings_between(&self, a: &ChoiceSet, b: &ChoiceSet) -> Vec<f64> {
        let (Some(ia), Some(ib)) = (self.subset_index(a), self.subset_index(b)) else {
            return Vec::new();
        };
        self.crossings
            .iter()
            .filter(|c| (c.subset_a, c.subset_b) == (ia, ib) || (c.subset_a, c.subset_b) == (ib, ia))
            .map(|c| c.q_star)
            .collect()
    }
}

/// Logit welfare of every non-empty subset over `grid`, with the envelope
/// and every pairwise crossing.
pub fn sweep_logit(pop: &Population, grid: &SweepGrid) -> Result<SweepResult> {
    let subsets = enumerate_choice_sets(pop.actions())?;
    let welfare: Vec<Vec<f64>> = subsets
        .par_iter()
        .map(|s| grid.values().iter().map(|&q| logit_welfare(pop, s, q)).collect())
        .collect();

    let envelope = (0..grid.len())
        .map(|k| tie_broken_argmax(welfare.iter().map(|row| row[k])))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..subsets.len())
        .flat_map(|a| (a + 1..subsets.len()).map(move |b| (a, b)))
        .collect();
    let crossings = pairs
        .par_iter()
        .flat_map_iter(|&(a, b)| {
            let deltas: Vec<f64> = welfare[a]
                .iter()
                .zip(&welfare[b])
                .map(|(wa, wb)| wa - wb)
                .collect();
            refine_all(pop, &subsets[a], &subsets[b], grid.values(), &deltas)
                .into_iter()
                .map(move |q_star| Crossing {
                    subset_a: a,
                    subset_b: b,
                    q_star,
                })
        })
        .collect();

    Ok(SweepResult {
        subsets,
        grid: grid.clone(),
        welfare,
        envelope,
        crossings,
    })
}

/// Values of `q` where the welfare ordering of two subsets reverses.
pub fn find_crossings(
    pop: &Population,
    subset_a: &ChoiceSet,
    subset_b: &ChoiceSet,
    grid: &SweepGrid,
) -> Result<Vec<f64>> {
    for s in [subset_a, subset_b] {
        if s.is_empty() {
            return Err(Error::EmptyChoiceSet);
        }
        s.check_within(pop.num_actions())?;
    }
    let deltas: Vec<f64> = grid
        .values()
        .iter()
        .map(|&q| logit_welfare(pop, subset_a, q) - logit_welfare(pop, subset_b, q))
        .collect();
    Ok(refine_all(pop, subset_a, subset_b, grid.values(), &deltas))
}

fn sign(d: f64) -> i8 {
    if d > TOUCH_TOL {
        1
    } else if d < -TOUCH_TOL {
        -1
    } else {
        0
    }
}

fn refine_all(pop: &Population, a: &ChoiceSet, b: &ChoiceSet, qs: &[f64], deltas: &[f64]) -> Vec<f64> {
    let delta = |q: f64| logit_welfare(pop, a, q) - logit_welfare(pop, b, q);
    let mut roots = Vec::new();
    // last grid point with a definite sign
    let mut last: Option<(usize, i8)> = None;
    for (k, &d) in deltas.iter().enumerate() {
        let s = sign(d);
        if s == 0 {
            continue;
        }
        if let Some((j, prev)) = last {
            if prev != s {
                roots.push(bisect(&delta, qs[j], qs[k], prev));
            }
        }
        last = Some((k, s));
    }
    roots
}

/// Bisection on a bracket whose left end has sign `lo_sign`.
fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, lo_sign: i8) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            return mid;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v > 0.0) == (lo_sign > 0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalChoiceSet {
    pub subset: ChoiceSet,
    pub welfare: f64,
}

/// Exhaustive welfare maximization over every non-empty choice set. Ties go
/// to the smaller subset, then the lexicographically smaller one.
pub fn optimize_choice_set(pop: &Population, model: &ChoiceModel) -> Result<OptimalChoiceSet> {
    let subsets = enumerate_choice_sets(pop.actions())?;
    let welfare = subsets
        .par_iter()
        .map(|s| Ok(policy_welfare(pop, s, model)?.welfare))
        .collect::<Result<Vec<f64>>>()?;
    let best = tie_broken_argmax(welfare.iter().copied());
    Ok(OptimalChoiceSet {
        subset: subsets[best].clone(),
        welfare: welfare[best],
    })
}
