//! Populations of utility types over a common finite action set.
//!
//! A population is a finite weighted mixture of cardinal utility vectors.
//! Continuous populations are expected to be sampled into a mixture before
//! they reach this crate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_distribution, Error, Result};

/// Ordered, non-empty list of uniquely labelled actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    labels: Vec<String>,
}

impl ActionSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyActionSet);
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::DuplicateAction(label.clone()));
            }
        }
        Ok(ActionSet { labels })
    }

    /// Actions labelled `1..=n`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// The full choice set `C`.
    pub fn full_set(&self) -> ChoiceSet {
        ChoiceSet((0..self.len()).collect())
    }
}

/// A non-empty subset of action indices, stored sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChoiceSet(Vec<usize>);

impl ChoiceSet {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyChoiceSet);
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(ChoiceSet(indices))
    }

    pub fn singleton(index: usize) -> Self {
        ChoiceSet(vec![index])
    }

    /// Fails if any member is not an index into an action set of size `len`.
    pub fn check_within(&self, len: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= len) {
            Some(&index) => Err(Error::ActionOutOfRange { index, len }),
            None => Ok(()),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Human-readable label such as `{1,2}` using the action labels.
    pub fn label(&self, actions: &ActionSet) -> String {
        let parts: Vec<&str> = self
            .0
            .iter()
            .map(|&i| actions.label(i).unwrap_or("?"))
            .collect();
        format!("{{{}}}", parts.join(","))
    }
}

impl fmt::Display for ChoiceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// One utility function `u_j(.)` with its population mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityType {
    pub utilities: Vec<f64>,
    pub weight: f64,
}

impl UtilityType {
    pub fn new(utilities: Vec<f64>, weight: f64) -> Self {
        UtilityType { utilities, weight }
    }

    /// Best attainable utility over the full action set.
    pub fn best(&self) -> f64 {
        self.utilities
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Finite weighted mixture of utility types. Weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Population {
    actions: ActionSet,
    types: Vec<UtilityType>,
}

impl Population {
    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn types(&self) -> &[UtilityType] {
        &self.types
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Same utility types with new (positive, renormalized) weights.
    pub fn reweighted(&self, weights: &[f64]) -> Result<Population> {
        if weights.len() != self.types.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} types",
                weights.len(),
                self.types.len()
            )));
        }
        let types = self
            .types
            .iter()
            .zip(weights)
            .map(|(t, &w)| UtilityType::new(t.utilities.clone(), w))
            .collect();
        build_population(self.actions.clone(), types)
    }
}

/// Validates the types and renormalizes their weights to sum to one.
pub fn build_population(actions: ActionSet, types: Vec<UtilityType>) -> Result<Population> {
    if types.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let n = actions.len();
    for (index, t) in types.iter().enumerate() {
        if t.utilities.len() != n {
            return Err(Error::LengthMismatch {
                index,
                expected: n,
                found: t.utilities.len(),
            });
        }
        if let Some(action) = t.utilities.iter().position(|u| !u.is_finite()) {
            return Err(Error::NonFiniteUtility { index, action });
        }
        if !(t.weight.is_finite() && t.weight > 0.0) {
            return Err(Error::InvalidWeight {
                index,
                weight: t.weight,
            });
        }
    }
    let total: f64 = types.iter().map(|t| t.weight).sum();
    let types = types
        .into_iter()
        .map(|t| UtilityType {
            weight: t.weight / total,
            ..t
        })
        .collect();
    Ok(Population { actions, types })
}

/// Stores and residents on a line; utility is minus squared distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotellingScenario {
    pub store_locations: Vec<f64>,
    pub person_locations: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_weights: Option<Vec<f64>>,
}

impl HotellingScenario {
    /// Stores at 0.5, 1, 1.6 and residents at -0.5, 1, 2.
    pub fn reference() -> Self {
        HotellingScenario {
            store_locations: vec![0.5, 1.0, 1.6],
            person_locations: vec![-0.5, 1.0, 2.0],
            person_weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, locs) in [
            ("store_locations", &self.store_locations),
            ("person_locations", &self.person_locations),
        ] {
            if locs.is_empty() {
                return Err(crate::error::invalid(name, "must be non-empty"));
            }
            if locs.iter().any(|x| !x.is_finite()) {
                return Err(crate::error::invalid(name, "locations must be finite"));
            }
        }
        if let Some(w) = &self.person_weights {
            if w.len() != self.person_locations.len() {
                return Err(Error::Dimension(format!(
                    "{} person weights for {} persons",
                    w.len(),
                    self.person_locations.len()
                )));
            }
            check_distribution("person_weights", w, 1e-12)?;
        }
        Ok(())
    }
}

/// One utility type per resident with `u_i = -(x_i - theta_j)^2`.
pub fn hotelling_population(scenario: &HotellingScenario) -> Result<Population> {
    scenario.validate()?;
    let actions = ActionSet::numbered(scenario.store_locations.len())?;
    let n_persons = scenario.person_locations.len();
    let types = scenario
        .person_locations
        .iter()
        .enumerate()
        .map(|(j, &theta)| {
            let utilities = scenario
                .store_locations
                .iter()
                .map(|&x| -(x - theta) * (x - theta))
                .collect();
            let weight = match &scenario.person_weights {
                Some(w) => w[j],
                None => 1.0 / n_persons as f64,
            };
            UtilityType::new(utilities, weight)
        })
        .collect();
    build_population(actions, types)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_actions() -> ActionSet {
        ActionSet::new(["a", "b"]).unwrap()
    }

    #[test]
    fn single_type_weight_renormalized() {
        let pop = build_population(two_actions(), vec![UtilityType::new(vec![1.0, 0.0], 2.0)])
            .unwrap();
        assert_eq!(pop.types()[0].weight, 1.0);
    }

    #[test]
    fn proportional_renormalization() {
        let pop = build_population(
            two_actions(),
            vec![
                UtilityType::new(vec![1.0, 0.0], 1.0),
                UtilityType::new(vec![0.0, 1.0], 3.0),
            ],
        )
        .unwrap();
        let w: Vec<f64> = pop.types().iter().map(|t| t.weight).collect();
        assert_eq!(w, vec![0.25, 0.75]);
    }

    #[test]
    fn rejects_invalid_types() {
        assert_eq!(
            build_population(two_actions(), vec![]),
            Err(Error::EmptyPopulation)
        );
        assert!(matches!(
            build_population(two_actions(), vec![UtilityType::new(vec![1.0], 1.0)]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            build_population(two_actions(), vec![UtilityType::new(vec![1.0, f64::NAN], 1.0)]),
            Err(Error::NonFiniteUtility { index: 0, action: 1 })
        ));
        assert!(matches!(
            build_population(two_actions(), vec![UtilityType::new(vec![1.0, 0.0], 0.0)]),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(matches!(
            build_population(two_actions(), vec![UtilityType::new(vec![1.0, 0.0], -1.0)]),
            Err(Error::InvalidWeight { .. })
        ));
    }

    #[test]
    fn action_set_rejects_empty_and_duplicates() {
        assert_eq!(ActionSet::new(Vec::<String>::new()), Err(Error::EmptyActionSet));
        assert_eq!(
            ActionSet::new(["a", "a"]),
            Err(Error::DuplicateAction("a".into()))
        );
    }

    #[test]
    fn hotelling_reference_utilities() {
        // Hand evaluation of -(x - theta)^2, also checked with a numpy script.
        let expected = [
            [-1.0, -2.25, -4.41],
            [-0.25, 0.0, -0.36],
            [-2.25, -1.0, -0.16],
        ];
        let pop = hotelling_population(&HotellingScenario::reference()).unwrap();
        for (t, row) in pop.types().iter().zip(expected) {
            for (u, e) in t.utilities.iter().zip(row) {
                assert!((u - e).abs() < 1e-12, "{u} vs {e}");
            }
            assert!((t.weight - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hotelling_zero_distance_and_uniform_weights() {
        let pop = hotelling_population(&HotellingScenario {
            store_locations: vec![0.7, 2.0],
            person_locations: vec![0.7, 3.0],
            person_weights: None,
        })
        .unwrap();
        assert_eq!(pop.types()[0].utilities[0], 0.0);
        assert_eq!(pop.types()[0].weight, 0.5);
        assert_eq!(pop.types()[1].weight, 0.5);
    }

    #[test]
    fn hotelling_validation() {
        let mut s = HotellingScenario::reference();
        s.person_weights = Some(vec![0.5, 0.5]);
        assert!(hotelling_population(&s).is_err());
        s.person_weights = Some(vec![0.5, 0.3, 0.1]);
        assert!(hotelling_population(&s).is_err());
        s.person_weights = None;
        s.store_locations.clear();
        assert!(hotelling_population(&s).is_err());
    }

    #[test]
    fn choice_set_normalizes() {
        let s = ChoiceSet::new(vec![2, 0, 2]).unwrap();
        assert_eq!(s.indices(), &[0, 2]);
        assert_eq!(s.to_string(), "{0,2}");
        assert_eq!(s.label(&ActionSet::numbered(3).unwrap()), "{1,3}");
        assert!(ChoiceSet::new(vec![]).is_err());
        assert!(s.check_within(2).is_err());
    }
}
