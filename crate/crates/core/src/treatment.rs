//! Binary treatment choice with publicly observed covariates `x` and
//! privately observed covariates `z`.
//!
//! A planner can mandate one treatment per `x` cell, or let people choose
//! using what they know about `z`. With objectively correct predictions the
//! decentralized choice gains the value of information over the mandate.
//! When people act on subjective beliefs `pi` instead, their welfare depends
//! only on how often the belief lands on the correct side of the threshold
//! probability.
//!
//! All weak-inequality ties resolve to treatment A.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{check_probability, invalid, Error, Result};
use crate::welfare::stable_sum;

const SUM_TOL: f64 = 1e-12;

/// Welfare gaps within this are ties: the mandate and decentralized
/// welfare expansions agree only up to rounding.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Treatment {
    A,
    B,
}

impl Treatment {
    pub fn other(self) -> Treatment {
        match self {
            Treatment::A => Treatment::B,
            Treatment::B => Treatment::A,
        }
    }
}

/// Expected utilities `U_x(y, t)` for outcome `y` in {0, 1} and treatment `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeUtilities {
    pub y0_a: f64,
    pub y0_b: f64,
    pub y1_a: f64,
    pub y1_b: f64,
}

impl OutcomeUtilities {
    pub fn new(y0_a: f64, y0_b: f64, y1_a: f64, y1_b: f64) -> Result<Self> {
        let u = OutcomeUtilities {
            y0_a,
            y0_b,
            y1_a,
            y1_b,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.y0_a, self.y0_b, self.y1_a, self.y1_b]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(invalid("utilities", "outcome utilities must be finite"))
        }
    }

    pub fn get(&self, ill: bool, t: Treatment) -> f64 {
        match (ill, t) {
            (false, Treatment::A) => self.y0_a,
            (false, Treatment::B) => self.y0_b,
            (true, Treatment::A) => self.y1_a,
            (true, Treatment::B) => self.y1_b,
        }
    }

    /// A is better when healthy and B is better when ill, e.g. surveillance
    /// versus aggressive treatment.
    pub fn has_threshold_structure(&self) -> bool {
        self.y0_a > self.y0_b && self.y1_b > self.y1_a
    }

    fn eu(&self, p: f64, t: Treatment) -> f64 {
        p * self.get(true, t) + (1.0 - p) * self.get(false, t)
    }

    /// Treatment maximizing expected utility at outcome probability `p`.
    fn best_at(&self, p: f64) -> Treatment {
        if self.eu(p, Treatment::A) >= self.eu(p, Treatment::B) {
            Treatment::A
        } else {
            Treatment::B
        }
    }
}

/// `p U(1, t) + (1 - p) U(0, t)`.
pub fn expected_outcome_utility(p: f64, u: &OutcomeUtilities, t: Treatment) -> Result<f64> {
    check_probability("p", p)?;
    Ok(u.eu(p, t))
}

/// Distribution of subjective outcome probabilities `pi` across persons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BeliefModel {
    PointMass { pi: f64 },
    Uniform { lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
    Mixture { components: Vec<WeightedBelief> },
    Empirical { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedBelief {
    pub weight: f64,
    pub model: BeliefModel,
}

impl BeliefModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            BeliefModel::PointMass { pi } => check_probability("pi", *pi).map(|_| ()),
            BeliefModel::Uniform { lo, hi } => {
                check_probability("lo", *lo)?;
                check_probability("hi", *hi)?;
                if lo > hi {
                    return Err(invalid("lo", "lower bound exceeds upper bound"));
                }
                Ok(())
            }
            BeliefModel::Beta { a, b } => {
                if a.is_finite() && *a > 0.0 && b.is_finite() && *b > 0.0 {
                    Ok(())
                } else {
                    Err(invalid("beta", "shape parameters must be positive"))
                }
            }
            BeliefModel::Mixture { components } => {
                if components.is_empty() {
                    return Err(invalid("components", "mixture is empty"));
                }
                let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
                crate::error::check_distribution("mixture weights", &weights, SUM_TOL)?;
                components.iter().try_for_each(|c| c.model.validate())
            }
            BeliefModel::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(invalid("samples", "empirical beliefs need samples"));
                }
                samples
                    .iter()
                    .try_for_each(|&s| check_probability("samples", s).map(|_| ()))
            }
        }
    }

    /// `P(pi <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.mass(x, true)
    }

    /// `P(pi < x)`.
    pub fn cdf_below(&self, x: f64) -> f64 {
        self.mass(x, false)
    }

    fn mass(&self, x: f64, inclusive: bool) -> f64 {
        let below = |v: f64| if inclusive { v <= x } else { v < x };
        match self {
            BeliefModel::PointMass { pi } => f64::from(u8::from(below(*pi))),
            BeliefModel::Uniform { lo, hi } => {
                if lo == hi {
                    f64::from(u8::from(below(*lo)))
                } else {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                }
            }
            BeliefModel::Beta { a, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    Beta::new(*a, *b).map_or(f64::NAN, |d| d.cdf(x))
                }
            }
            BeliefModel::Mixture { components } => stable_sum(
                components
                    .iter()
                    .map(|c| c.weight * c.model.mass(x, inclusive)),
            ),
            BeliefModel::Empirical { samples } => {
                samples.iter().filter(|&&s| below(s)).count() as f64 / samples.len() as f64
            }
        }
    }

    /// Draws `n` beliefs, reproducibly for a given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| self.draw(&mut rng)).collect())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            BeliefModel::PointMass { pi } => *pi,
            BeliefModel::Uniform { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..*hi)
                }
            }
            BeliefModel::Beta { a, b } => {
                let d = rand_distr::Beta::new(*a, *b).expect("validated shape parameters");
                rng.sample(d)
            }
            BeliefModel::Mixture { components } => {
                let mut u: f64 = rng.random();
                for c in components {
                    if u < c.weight {
                        return c.model.draw(rng);
                    }
                    u -= c.weight;
                }
                components[components.len() - 1].model.draw(rng)
            }
            BeliefModel::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }
}

/// A privately observed covariate value within one `x` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateCell {
    pub z_label: String,
    /// `P(z | x)`.
    pub p_z_given_x: f64,
    /// `p_xz = P(y = 1 | x, z)`.
    pub p_xz: f64,
    pub belief: BeliefModel,
}

/// A publicly observed covariate value with its `z` breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XCell {
    pub x_label: String,
    /// `P(x)`.
    pub weight: f64,
    pub utilities: OutcomeUtilities,
    pub z_cells: Vec<CovariateCell>,
}

impl XCell {
    /// `p_x = sum_z P(z|x) p_xz`.
    pub fn p_x(&self) -> f64 {
        stable_sum(self.z_cells.iter().map(|z| z.p_z_given_x * z.p_xz))
    }

    /// Validates the cell; returns a warning when `p_xz` does not vary with `z`.
    pub fn validate(&self) -> Result<Option<String>> {
        self.utilities.validate()?;
        if self.z_cells.is_empty() {
            return Err(invalid("z_cells", format!("x cell `{}` has no z cells", self.x_label)));
        }
        for z in &self.z_cells {
            if !(z.p_z_given_x.is_finite() && z.p_z_given_x > 0.0 && z.p_z_given_x <= 1.0) {
                return Err(invalid(
                    "p_z_given_x",
                    format!("z cell `{}`: {} must lie in (0, 1]", z.z_label, z.p_z_given_x),
                ));
            }
            check_probability("p_xz", z.p_xz)?;
            z.belief.validate()?;
        }
        let total = stable_sum(self.z_cells.iter().map(|z| z.p_z_given_x));
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid(
                "p_z_given_x",
                format!("x cell `{}`: P(z|x) sums to {total}", self.x_label),
            ));
        }
        let first = self.z_cells[0].p_xz;
        if self.z_cells.iter().all(|z| z.p_xz == first) {
            return Ok(Some(format!(
                "x cell `{}`: p_xz does not vary with z; private information is worthless",
                self.x_label
            )));
        }
        Ok(None)
    }

    fn eu_z(&self, z: &CovariateCell, t: Treatment) -> f64 {
        self.utilities.eu(z.p_xz, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentScenario {
    pub x_cells: Vec<XCell>,
}

impl TreatmentScenario {
    /// Validates all cells and returns any non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.x_cells.is_empty() {
            return Err(invalid("x_cells", "scenario has no x cells"));
        }
        let mut warnings = Vec::new();
        for x in &self.x_cells {
            if !(x.weight.is_finite() && x.weight > 0.0) {
                return Err(invalid(
                    "weight",
                    format!("x cell `{}`: P(x) must be positive", x.x_label),
                ));
            }
            warnings.extend(x.validate()?);
        }
        let total = stable_sum(self.x_cells.iter().map(|x| x.weight));
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid("weight", format!("P(x) sums to {total}")));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MandateChoice {
    pub treatment: Treatment,
    pub welfare: f64,
    pub p_x: f64,
}

/// Best x-conditional mandate, judged at the pooled risk `p_x`.
pub fn optimal_mandate_x(cell: &XCell) -> MandateChoice {
    let p_x = cell.p_x();
    let treatment = cell.utilities.best_at(p_x);
    MandateChoice {
        treatment,
        welfare: cell.utilities.eu(p_x, treatment),
        p_x,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecentralizedChoice {
    pub welfare: f64,
    /// Optimal treatment per z cell.
    pub choices: Vec<Treatment>,
    /// Indices of z cells where A is optimal (ties included).
    pub z_a: Vec<usize>,
    /// Indices of z cells where B is strictly better.
    pub z_b: Vec<usize>,
}

/// Welfare when every `(x, z)` group picks its objectively best treatment.
pub fn optimal_decentralized_x(cell: &XCell) -> DecentralizedChoice {
    let choices: Vec<Treatment> = cell
        .z_cells
        .iter()
        .map(|z| cell.utilities.best_at(z.p_xz))
        .collect();
    let welfare = stable_sum(
        cell.z_cells
            .iter()
            .zip(&choices)
            .map(|(z, &t)| z.p_z_given_x * cell.eu_z(z, t)),
    );
    let (z_a, z_b) = (0..choices.len()).partition(|&k| choices[k] == Treatment::A);
    DecentralizedChoice {
        welfare,
        choices,
        z_a,
        z_b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueOfInformation {
    pub voi: f64,
    /// Share of persons for whom the non-mandated treatment is strictly
    /// better (`P(z in Z_B | x)` when A is mandated).
    pub p_zb: f64,
    /// Mean expected-utility gain within that share.
    pub mean_gain: f64,
}

/// Value of acting on `z` as the product of the switching share and its mean
/// gain. When the mandate is B the roles of A and B are exchanged.
pub fn value_of_information(cell: &XCell) -> ValueOfInformation {
    let mandated = optimal_mandate_x(cell).treatment;
    let other = mandated.other();
    let switchers: Vec<(f64, f64)> = cell
        .z_cells
        .iter()
        .filter_map(|z| {
            let gain = cell.eu_z(z, other) - cell.eu_z(z, mandated);
            (gain > 0.0).then_some((z.p_z_given_x, gain))
        })
        .collect();
    let p_zb = stable_sum(switchers.iter().map(|(p, _)| *p));
    let mean_gain = if p_zb > 0.0 {
        stable_sum(switchers.iter().map(|(p, g)| p * g)) / p_zb
    } else {
        0.0
    };
    ValueOfInformation {
        voi: p_zb * mean_gain,
        p_zb,
        mean_gain,
    }
}

/// Outcome probability at which A and B have equal expected utility.
pub fn threshold_probability(u: &OutcomeUtilities) -> Result<f64> {
    u.validate()?;
    if !u.has_threshold_structure() {
        return Err(Error::ThresholdStructure);
    }
    let healthy_loss = u.y0_a - u.y0_b;
    let ill_loss = u.y1_b - u.y1_a;
    Ok(healthy_loss / (healthy_loss + ill_loss))
}

/// Treatment maximizing subjective expected utility under belief `pi`.
pub fn subjective_choice(pi: f64, u: &OutcomeUtilities) -> Result<Treatment> {
    check_probability("pi", pi)?;
    u.validate()?;
    Ok(u.best_at(pi))
}

/// Probability mass of beliefs whose subjective choice is `A`, from the
/// linear subjective-utility gap `SEU_B - SEU_A = c0 + c1 pi`.
fn belief_mass_choosing_a(belief: &BeliefModel, u: &OutcomeUtilities) -> f64 {
    if let BeliefModel::Empirical { samples } = belief {
        let hits = samples
            .iter()
            .filter(|&&pi| u.best_at(pi) == Treatment::A)
            .count();
        return hits as f64 / samples.len() as f64;
    }
    if let BeliefModel::Mixture { components } = belief {
        return stable_sum(
            components
                .iter()
                .map(|c| c.weight * belief_mass_choosing_a(&c.model, u)),
        );
    }
    let c0 = u.y0_b - u.y0_a;
    let c1 = (u.y1_b - u.y1_a) - (u.y0_b - u.y0_a);
    if c1 > 0.0 {
        belief.cdf(-c0 / c1)
    } else if c1 < 0.0 {
        1.0 - belief.cdf_below(-c0 / c1)
    } else if c0 <= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `q_xz`: share of persons in `(x, z)` whose beliefs lead them to the
/// objectively optimal treatment. Equals one when both treatments are optimal.
pub fn belief_choice_prob(cell: &CovariateCell, u: &OutcomeUtilities) -> Result<f64> {
    check_probability("p_xz", cell.p_xz)?;
    cell.belief.validate()?;
    u.validate()?;
    let eu_a = u.eu(cell.p_xz, Treatment::A);
    let eu_b = u.eu(cell.p_xz, Treatment::B);
    if eu_a == eu_b {
        return Ok(1.0);
    }
    let mass_a = belief_mass_choosing_a(&cell.belief, u);
    Ok(if eu_a > eu_b { mass_a } else { 1.0 - mass_a })
}

/// `q_xz` from the sign-match rule: the belief and the objective risk fall on
/// the same side of the threshold. Requires the threshold structure.
pub fn sign_match_prob(cell: &CovariateCell, u: &OutcomeUtilities) -> Result<f64> {
    check_probability("p_xz", cell.p_xz)?;
    cell.belief.validate()?;
    let p_star = threshold_probability(u)?;
    Ok(if cell.p_xz < p_star {
        cell.belief.cdf(p_star)
    } else if cell.p_xz > p_star {
        1.0 - cell.belief.cdf(p_star)
    } else {
        1.0
    })
}

/// Welfare when a share `q_map[k]` of z cell `k` picks its optimal treatment
/// and the rest pick the other one.
pub fn bounded_rational_welfare_x(cell: &XCell, q_map: &[f64]) -> Result<f64> {
    if q_map.len() != cell.z_cells.len() {
        return Err(Error::Dimension(format!(
            "{} choice probabilities for {} z cells",
            q_map.len(),
            cell.z_cells.len()
        )));
    }
    for &q in q_map {
        check_probability("q_xz", q)?;
    }
    let decentralized = optimal_decentralized_x(cell);
    Ok(stable_sum(
        cell.z_cells
            .iter()
            .zip(&decentralized.choices)
            .zip(q_map)
            .map(|((z, &best), &q)| {
                z.p_z_given_x * (q * cell.eu_z(z, best) + (1.0 - q) * cell.eu_z(z, best.other()))
            }),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    Mandate,
    Decentralize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyComparison {
    pub recommendation: Recommendation,
    pub mandate_welfare: f64,
    pub decentralized_welfare: f64,
    pub q_map: Vec<f64>,
}

/// Mandate versus belief-driven decentralized choice for one `x` cell.
/// Ties (within rounding) favor decentralization.
pub fn compare_policies_x(cell: &XCell) -> Result<PolicyComparison> {
    let q_map = cell
        .z_cells
        .iter()
        .map(|z| belief_choice_prob(z, &cell.utilities))
        .collect::<Result<Vec<f64>>>()?;
    let mandate_welfare = optimal_mandate_x(cell).welfare;
    let decentralized_welfare = bounded_rational_welfare_x(cell, &q_map)?;
    let recommendation = if mandate_welfare > decentralized_welfare + TIE_TOL {
        Recommendation::Mandate
    } else {
        Recommendation::Decentralize
    };
    Ok(PolicyComparison {
        recommendation,
        mandate_welfare,
        decentralized_welfare,
        q_map,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XReport {
    pub x_label: String,
    pub weight: f64,
    pub mandate: MandateChoice,
    pub decentralized: DecentralizedChoice,
    pub value_of_information: ValueOfInformation,
    pub q_map: Vec<f64>,
    pub bounded_rational_welfare: f64,
    pub recommendation: Recommendation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreatmentReport {
    pub cells: Vec<XReport>,
    pub mandate_welfare: f64,
    pub rational_decentralized_welfare: f64,
    pub bounded_rational_welfare: f64,
    /// Welfare when each x cell follows its recommendation.
    pub recommended_welfare: f64,
    pub warnings: Vec<String>,
}

/// Runs the full mandate/decentralization analysis on every x cell.
pub fn analyze_treatment(scenario: &TreatmentScenario) -> Result<TreatmentReport> {
    let warnings = scenario.validate()?;
    let cells = scenario
        .x_cells
        .iter()
        .map(|x| {
            let comparison = compare_policies_x(x)?;
            Ok(XReport {
                x_label: x.x_label.clone(),
                weight: x.weight,
                mandate: optimal_mandate_x(x),
                decentralized: optimal_decentralized_x(x),
                value_of_information: value_of_information(x),
                q_map: comparison.q_map,
                bounded_rational_welfare: comparison.decentralized_welfare,
                recommendation: comparison.recommendation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = |f: &dyn Fn(&XReport) -> f64| stable_sum(cells.iter().map(|c| c.weight * f(c)));
    Ok(TreatmentReport {
        mandate_welfare: total(&|c| c.mandate.welfare),
        rational_decentralized_welfare: total(&|c| c.decentralized.welfare),
        bounded_rational_welfare: total(&|c| c.bounded_rational_welfare),
        recommended_welfare: total(&|c| match c.recommendation {
            Recommendation::Mandate => c.mandate.welfare,
            Recommendation::Decentralize => c.bounded_rational_welfare,
        }),
        cells,
        warnings,
    })
}
