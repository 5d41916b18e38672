//! Utilitarian welfare and regret of policies, mandates, closed forms for
//! special behavior models, welfare lower bounds, logit sensitivities and
//! stochastic Pareto comparison.
//!
//! Welfare is the population mean of realized utility. Regret is the gap to
//! the idealized optimum `E(u*)`, where every type picks its best action from
//! the full action set.

use rayon::prelude::*;
use serde::Serialize;

use crate::choice::{
    choice_probabilities_stream, logit_probabilities, ChoiceModel, ChoiceProbabilities,
};
use crate::error::{check_distribution, check_probability, invalid, Error, Result};
use crate::scenario::{ChoiceSet, Population};

/// Neumaier-compensated sum; the result does not depend on thread schedule.
pub(crate) fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if f64::abs(sum) >= f64::abs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `E(u*)`: mean of each type's best utility over the full action set.
pub fn idealized_optimum(pop: &Population) -> f64 {
    stable_sum(pop.types().iter().map(|t| t.weight * t.best()))
}

/// Population mean utility `E[u(i)]` of every action.
pub fn expected_utilities(pop: &Population) -> Vec<f64> {
    (0..pop.num_actions())
        .map(|i| stable_sum(pop.types().iter().map(|t| t.weight * t.utilities[i])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mandate {
    pub action: usize,
    pub welfare: f64,
    /// `E(u*) - welfare`; this is `R_m` when the whole action set is allowed.
    pub mandate_regret: f64,
}

/// Best single action to impose on everyone, chosen within `available`.
pub fn optimal_mandate(pop: &Population, available: &ChoiceSet) -> Result<Mandate> {
    if available.is_empty() {
        return Err(Error::EmptyChoiceSet);
    }
    available.check_within(pop.num_actions())?;
    let eu = expected_utilities(pop);
    let mut action = available.indices()[0];
    for &i in available.indices() {
        if eu[i] > eu[action] {
            action = i;
        }
    }
    let welfare = eu[action];
    Ok(Mandate {
        action,
        welfare,
        mandate_regret: idealized_optimum(pop) - welfare,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeEvaluation {
    pub type_index: usize,
    pub probs: ChoiceProbabilities,
    /// Conditional expected realized utility `v[s, u]`.
    pub expected_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyEvaluation {
    pub available: ChoiceSet,
    pub welfare: f64,
    pub regret: f64,
    pub idealized_optimum: f64,
    /// Monte Carlo standard error of `welfare`; zero for analytic models.
    pub std_error: f64,
    pub per_type: Vec<TypeEvaluation>,
}

/// Welfare of restricting choice to `available` with behavior `model`.
///
/// Nudge as-if costs are treated as pure mistakes; see
/// [`policy_welfare_with_share`] to make part of them welfare-relevant.
pub fn policy_welfare(
    pop: &Population,
    available: &ChoiceSet,
    model: &ChoiceModel,
) -> Result<PolicyEvaluation> {
    policy_welfare_with_share(pop, available, model, 0.0)
}

/// [`policy_welfare`] where a fraction `normative_share` of a nudge's as-if
/// cost reduces the realized utility of every non-default choice.
pub fn policy_welfare_with_share(
    pop: &Population,
    available: &ChoiceSet,
    model: &ChoiceModel,
    normative_share: f64,
) -> Result<PolicyEvaluation> {
    check_probability("normative_share", normative_share)?;
    if available.is_empty() {
        return Err(Error::EmptyChoiceSet);
    }
    available.check_within(pop.num_actions())?;
    model.validate(pop.num_actions())?;

    let penalty = match model {
        ChoiceModel::DefaultNudge {
            default_action,
            gamma,
            ..
        } => Some((*default_action, normative_share * gamma)),
        _ => None,
    };

    let per_type: Vec<TypeEvaluation> = pop
        .types()
        .par_iter()
        .enumerate()
        .map(|(j, t)| {
            let probs = choice_probabilities_stream(&t.utilities, available, model, j as u64)?;
            let expected_utility = match penalty {
                Some((default_action, cost)) => stable_sum(
                    available
                        .indices()
                        .iter()
                        .zip(&probs.probs)
                        .map(|(&i, p)| {
                            let u = t.utilities[i];
                            p * if i == default_action { u } else { u - cost }
                        }),
                ),
                None => probs.expected_utility(&t.utilities),
            };
            Ok(TypeEvaluation {
                type_index: j,
                probs,
                expected_utility,
            })
        })
        .collect::<Result<_>>()?;

    let types = pop.types();
    let welfare = stable_sum(
        per_type
            .iter()
            .map(|e| types[e.type_index].weight * e.expected_utility),
    );
    let std_error = match model.mc_samples() {
        Some(n) => stable_sum(per_type.iter().map(|e| {
            let w = types[e.type_index].weight;
            w * w * e.probs.utility_variance(&types[e.type_index].utilities) / n as f64
        }))
        .sqrt(),
        None => 0.0,
    };
    let optimum = idealized_optimum(pop);
    Ok(PolicyEvaluation {
        available: available.clone(),
        welfare,
        regret: optimum - welfare,
        idealized_optimum: optimum,
        std_error,
        per_type,
    })
}

/// Logit welfare of one choice set without per-type records.
pub fn logit_welfare(pop: &Population, available: &ChoiceSet, q: f64) -> f64 {
    stable_sum(pop.types().iter().map(|t| {
        let probs = logit_probabilities(&t.utilities, available, q);
        let v = stable_sum(
            available
                .indices()
                .iter()
                .zip(&probs)
                .map(|(&i, p)| p * t.utilities[i]),
        );
        t.weight * v
    }))
}

/// Alpha-rational welfare: `alpha E(u*) + (1 - alpha) sum_i p_i E[u(i)]`.
pub fn alpha_welfare_closed_form(pop: &Population, alpha: f64, background: &[f64]) -> Result<f64> {
    check_probability("alpha", alpha)?;
    if background.len() != pop.num_actions() {
        return Err(Error::Dimension(format!(
            "background has {} entries for {} actions",
            background.len(),
            pop.num_actions()
        )));
    }
    check_distribution("background", background, 1e-12)?;
    let eu = expected_utilities(pop);
    let random_part = stable_sum(background.iter().zip(&eu).map(|(p, e)| p * e));
    Ok(alpha * idealized_optimum(pop) + (1.0 - alpha) * random_part)
}

/// Guaranteed welfare when errors are bounded by `delta`: `E(u*) - 2 delta`.
pub fn bounded_error_welfare_bound(pop: &Population, delta: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid("delta", format!("{delta} must be positive")));
    }
    Ok(idealized_optimum(pop) - 2.0 * delta)
}

/// Welfare of completely random choice from `available`; a lower bound on
/// welfare under any IID-error random utility model.
pub fn mean_utility_bound(pop: &Population, available: &ChoiceSet) -> Result<f64> {
    if available.is_empty() {
        return Err(Error::EmptyChoiceSet);
    }
    available.check_within(pop.num_actions())?;
    let k = available.len() as f64;
    Ok(stable_sum(pop.types().iter().map(|t| {
        let mean = stable_sum(available.indices().iter().map(|&i| t.utilities[i])) / k;
        t.weight * mean
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogitSensitivities {
    pub probs: Vec<f64>,
    /// `dP_i/dq = P_i (u(i) - v)`, aligned with the available actions.
    pub prob_derivs: Vec<f64>,
    /// `dv/dq`, the variance of the chosen utility.
    pub welfare_deriv: f64,
}

/// Derivatives of logit choice probabilities and welfare with respect to `q`
/// for a single utility vector.
pub fn logit_sensitivities(
    utilities: &[f64],
    available: &ChoiceSet,
    q: f64,
) -> Result<LogitSensitivities> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(invalid("q", format!("{q} must be finite and >= 0")));
    }
    if available.is_empty() {
        return Err(Error::EmptyChoiceSet);
    }
    available.check_within(utilities.len())?;
    let probs = logit_probabilities(utilities, available, q);
    let us: Vec<f64> = available.indices().iter().map(|&i| utilities[i]).collect();
    let v = stable_sum(us.iter().zip(&probs).map(|(u, p)| u * p));
    let prob_derivs = us.iter().zip(&probs).map(|(u, p)| p * (u - v)).collect();
    // centered form of sum u^2 P - (sum u P)^2; never negative
    let welfare_deriv = stable_sum(us.iter().zip(&probs).map(|(u, p)| p * (u - v) * (u - v)));
    Ok(LogitSensitivities {
        probs,
        prob_derivs,
        welfare_deriv,
    })
}

/// Population welfare derivative `dW/dq` for logit choice from `available`.
pub fn logit_welfare_derivative(pop: &Population, available: &ChoiceSet, q: f64) -> Result<f64> {
    let terms = pop
        .types()
        .iter()
        .map(|t| Ok(t.weight * logit_sensitivities(&t.utilities, available, q)?.welfare_deriv))
        .collect::<Result<Vec<f64>>>()?;
    Ok(stable_sum(terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParetoVerdict {
    SSuperior,
    SPrimeSuperior,
    Equivalent,
    Incomparable,
}

const PARETO_TOL: f64 = 1e-12;

fn verdict_from(diffs: impl Iterator<Item = f64>) -> ParetoVerdict {
    let (mut better, mut worse) = (false, false);
    for d in diffs {
        if d > PARETO_TOL {
            better = true;
        } else if d < -PARETO_TOL {
            worse = true;
        }
    }
    match (better, worse) {
        (false, false) => ParetoVerdict::Equivalent,
        (true, false) => ParetoVerdict::SSuperior,
        (false, true) => ParetoVerdict::SPrimeSuperior,
        (true, true) => ParetoVerdict::Incomparable,
    }
}

fn check_aligned(pop: &Population, a: &[ChoiceProbabilities], b: &[ChoiceProbabilities]) -> Result<()> {
    let n = pop.types().len();
    if a.len() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "expected {n} per-type probability lists, found {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Stochastic Pareto comparison of two policies over a two-action set,
/// using the better-action choice probability of every type with strict
/// preferences. All types carry positive weight, so any strict improvement
/// counts.
pub fn stochastic_pareto_compare_binary(
    pop: &Population,
    probs_s: &[ChoiceProbabilities],
    probs_s_prime: &[ChoiceProbabilities],
) -> Result<ParetoVerdict> {
    if pop.num_actions() != 2 {
        return Err(Error::Dimension(format!(
            "binary comparison needs 2 actions, population has {}",
            pop.num_actions()
        )));
    }
    check_aligned(pop, probs_s, probs_s_prime)?;
    let diffs = pop
        .types()
        .iter()
        .zip(probs_s.iter().zip(probs_s_prime))
        .filter(|(t, _)| t.utilities[0] != t.utilities[1])
        .map(|(t, (s, sp))| {
            let better = if t.utilities[0] > t.utilities[1] { 0 } else { 1 };
            s.prob(better) - sp.prob(better)
        });
    Ok(verdict_from(diffs))
}

/// Pareto comparison for any action set by per-type conditional expected
/// utility dominance.
pub fn pareto_compare(
    pop: &Population,
    probs_s: &[ChoiceProbabilities],
    probs_s_prime: &[ChoiceProbabilities],
) -> Result<ParetoVerdict> {
    check_aligned(pop, probs_s, probs_s_prime)?;
    let diffs = pop
        .types()
        .iter()
        .zip(probs_s.iter().zip(probs_s_prime))
        .map(|(t, (s, sp))| s.expected_utility(&t.utilities) - sp.expected_utility(&t.utilities));
    Ok(verdict_from(diffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{choice_probabilities, ErrorSpec};
    use crate::scenario::{build_population, ActionSet, UtilityType};

    fn two_type() -> Population {
        build_population(
            ActionSet::new(["a", "b"]).unwrap(),
            vec![
                UtilityType::new(vec![1.0, 0.0], 0.5),
                UtilityType::new(vec![0.0, 2.0], 0.5),
            ],
        )
        .unwrap()
    }

    fn single(u: Vec<f64>) -> Population {
        let n = u.len();
        build_population(ActionSet::numbered(n).unwrap(), vec![UtilityType::new(u, 1.0)]).unwrap()
    }

    fn full(pop: &Population) -> ChoiceSet {
        pop.actions().full_set()
    }

    #[test]
    fn idealized_optimum_examples() {
        assert_eq!(idealized_optimum(&single(vec![1.0, 0.0])), 1.0);
        assert_eq!(idealized_optimum(&two_type()), 1.5);
        assert_eq!(idealized_optimum(&single(vec![3.0, 3.0, 3.0])), 3.0);
    }

    #[test]
    fn expected_utilities_examples() {
        assert_eq!(expected_utilities(&two_type()), vec![0.5, 1.0]);
        assert_eq!(expected_utilities(&single(vec![2.0, -1.0])), vec![2.0, -1.0]);
        let anti = build_population(
            ActionSet::numbered(2).unwrap(),
            vec![
                UtilityType::new(vec![1.0, -1.0], 1.0),
                UtilityType::new(vec![-1.0, 1.0], 1.0),
            ],
        )
        .unwrap();
        assert_eq!(expected_utilities(&anti), vec![0.0, 0.0]);
    }

    #[test]
    fn mandate_examples() {
        let pop = two_type();
        let m = optimal_mandate(&pop, &full(&pop)).unwrap();
        assert_eq!(m.action, 1);
        assert_eq!(m.welfare, 1.0);
        assert_eq!(m.mandate_regret, 0.5);

        let homog = single(vec![0.2, 0.9]);
        assert_eq!(optimal_mandate(&homog, &full(&homog)).unwrap().mandate_regret, 0.0);

        let tie = build_population(
            ActionSet::numbered(2).unwrap(),
            vec![
                UtilityType::new(vec![1.0, 0.0], 1.0),
                UtilityType::new(vec![0.0, 1.0], 1.0),
            ],
        )
        .unwrap();
        assert_eq!(optimal_mandate(&tie, &full(&tie)).unwrap().action, 0);
        assert_eq!(
            optimal_mandate(&tie, &ChoiceSet::singleton(1)).unwrap().action,
            1
        );
    }

    #[test]
    fn policy_welfare_examples() {
        let pop = two_type();
        let r = policy_welfare(&pop, &full(&pop), &ChoiceModel::RationalMax).unwrap();
        assert_eq!(r.welfare, idealized_optimum(&pop));
        assert_eq!(r.regret, 0.0);
        assert_eq!(r.std_error, 0.0);

        let one = single(vec![1.0, 0.0]);
        let table = ChoiceModel::IndependentTable {
            probs: vec![0.5, 0.5],
        };
        assert_eq!(policy_welfare(&one, &full(&one), &table).unwrap().welfare, 0.5);

        let alpha = ChoiceModel::AlphaRational {
            alpha: 0.5,
            background: vec![0.5, 0.5],
        };
        let w = policy_welfare(&pop, &full(&pop), &alpha).unwrap().welfare;
        assert!((w - 1.125).abs() < 1e-12);
        let closed = alpha_welfare_closed_form(&pop, 0.5, &[0.5, 0.5]).unwrap();
        assert!((closed - 1.125).abs() < 1e-12);
    }

    #[test]
    fn alpha_closed_form_endpoints() {
        let pop = two_type();
        assert_eq!(alpha_welfare_closed_form(&pop, 1.0, &[0.5, 0.5]).unwrap(), 1.5);
        assert_eq!(alpha_welfare_closed_form(&pop, 0.0, &[0.5, 0.5]).unwrap(), 0.75);
        assert!(alpha_welfare_closed_form(&pop, 1.1, &[0.5, 0.5]).is_err());
        assert!(alpha_welfare_closed_form(&pop, 0.5, &[0.5, 0.6]).is_err());
        assert!(alpha_welfare_closed_form(&pop, 0.5, &[1.0]).is_err());
    }

    #[test]
    fn nudge_normative_share() {
        let pop = single(vec![0.0, 1.0]);
        let model = ChoiceModel::nudge(0, 0.4, ChoiceModel::RationalMax);
        let mistake = policy_welfare(&pop, &full(&pop), &model).unwrap();
        assert_eq!(mistake.welfare, 1.0);
        let half = policy_welfare_with_share(&pop, &full(&pop), &model, 0.5).unwrap();
        assert!((half.welfare - 0.8).abs() < 1e-15);
        assert!(policy_welfare_with_share(&pop, &full(&pop), &model, 1.5).is_err());
    }

    #[test]
    fn bounds() {
        let pop = two_type();
        assert!((bounded_error_welfare_bound(&pop, 0.1).unwrap() - 1.3).abs() < 1e-12);
        assert!((bounded_error_welfare_bound(&pop, 1e-12).unwrap() - 1.5).abs() < 1e-11);
        assert!(bounded_error_welfare_bound(&pop, 0.0).is_err());
        assert_eq!(mean_utility_bound(&single(vec![1.0, 0.0]), &ChoiceSet::new(vec![0, 1]).unwrap()).unwrap(), 0.5);
        assert_eq!(mean_utility_bound(&pop, &full(&pop)).unwrap(), 0.75);
        let uniform = ChoiceModel::IndependentTable {
            probs: vec![0.5, 0.5],
        };
        assert_eq!(
            mean_utility_bound(&pop, &full(&pop)).unwrap(),
            policy_welfare(&pop, &full(&pop), &uniform).unwrap().welfare
        );
    }

    #[test]
    fn prop4_certifies_decentralization() {
        // E(u*) = 1.5, best mandate 1.0: any delta < 0.25 certifies decentralization
        let pop = two_type();
        let bound = bounded_error_welfare_bound(&pop, 0.2).unwrap();
        let mandate = optimal_mandate(&pop, &full(&pop)).unwrap().welfare;
        assert!(bound > mandate);
        let mc = ChoiceModel::monte_carlo(ErrorSpec::UniformBoundedIid { delta: 0.2 }, 20_000, 5);
        assert!(policy_welfare(&pop, &full(&pop), &mc).unwrap().welfare > mandate);
    }

    #[test]
    fn sensitivities_examples() {
        let set = ChoiceSet::new(vec![0, 1, 2]).unwrap();
        let s = logit_sensitivities(&[0.7, 0.7, 0.7], &set, 3.0).unwrap();
        assert!(s.welfare_deriv.abs() < 1e-15);
        let pair = ChoiceSet::new(vec![0, 1]).unwrap();
        let s = logit_sensitivities(&[0.0, 1.0], &pair, 0.0).unwrap();
        assert_eq!(s.probs, vec![0.5, 0.5]);
        assert_eq!(s.welfare_deriv, 0.25);
        assert_eq!(s.prob_derivs, vec![-0.25, 0.25]);
        assert!(logit_sensitivities(&[0.0, 1.0], &pair, -1.0).is_err());
    }

    #[test]
    fn pareto_binary_examples() {
        let pop = two_type();
        let set = full(&pop);
        let probs = |m: &ChoiceModel| -> Vec<ChoiceProbabilities> {
            pop.types()
                .iter()
                .map(|t| choice_probabilities(&t.utilities, &set, m).unwrap())
                .collect()
        };
        let rational = probs(&ChoiceModel::RationalMax);
        let uniform = probs(&ChoiceModel::logit(0.0));
        assert_eq!(
            stochastic_pareto_compare_binary(&pop, &rational, &uniform).unwrap(),
            ParetoVerdict::SSuperior
        );
        assert_eq!(
            stochastic_pareto_compare_binary(&pop, &uniform, &rational).unwrap(),
            ParetoVerdict::SPrimeSuperior
        );
        assert_eq!(
            stochastic_pareto_compare_binary(&pop, &uniform, &uniform).unwrap(),
            ParetoVerdict::Equivalent
        );
        // type 0 prefers a, type 1 prefers b; s helps type 0 and hurts type 1
        let s = vec![rational[0].clone(), uniform[1].clone()];
        let s_prime = vec![uniform[0].clone(), rational[1].clone()];
        assert_eq!(
            stochastic_pareto_compare_binary(&pop, &s, &s_prime).unwrap(),
            ParetoVerdict::Incomparable
        );
        assert_eq!(
            pareto_compare(&pop, &s, &s_prime).unwrap(),
            ParetoVerdict::Incomparable
        );
        assert!(stochastic_pareto_compare_binary(&pop, &s[..1], &s_prime).is_err());
        let three = single(vec![0.0, 1.0, 2.0]);
        assert!(stochastic_pareto_compare_binary(&three, &[], &[]).is_err());
    }

    #[test]
    fn pareto_ignores_indifferent_types() {
        let pop = build_population(
            ActionSet::numbered(2).unwrap(),
            vec![
                UtilityType::new(vec![1.0, 1.0], 1.0),
                UtilityType::new(vec![0.0, 1.0], 1.0),
            ],
        )
        .unwrap();
        let set = full(&pop);
        let s: Vec<_> = pop
            .types()
            .iter()
            .map(|t| choice_probabilities(&t.utilities, &set, &ChoiceModel::RationalMax).unwrap())
            .collect();
        // on the indifferent type s' puts all mass on action 1 instead
        let s_prime = vec![
            ChoiceProbabilities {
                available: set.clone(),
                probs: vec![0.0, 1.0],
            },
            s[1].clone(),
        ];
        assert_eq!(
            stochastic_pareto_compare_binary(&pop, &s, &s_prime).unwrap(),
            ParetoVerdict::Equivalent
        );
    }

    #[test]
    fn stable_sum_compensates() {
        let values = std::iter::once(1e16).chain(std::iter::repeat_n(1.0, 1000)).chain(std::iter::once(-1e16));
        assert_eq!(stable_sum(values), 1000.0);
    }
}
