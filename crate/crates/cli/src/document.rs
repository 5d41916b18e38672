//! JSON scenario documents and their resolution into core types.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use welfare_core::{
    build_population, ActionSet, ChoiceModel, ChoiceSet, ErrorSpec, HotellingScenario, Population,
    SweepGrid, TreatmentScenario, UtilityType,
};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<PopulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hotelling: Option<HotellingScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment: Option<TreatmentScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    pub actions: Vec<String>,
    pub types: Vec<TypeSpec>,
    /// Named behavior models; commands use the first unless `--model` is given.
    pub models: Vec<NamedModel>,
    /// Policy evaluated by `evaluate`; defaults to every action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice_set: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub utilities: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedModel {
    pub name: String,
    pub model: ModelSpec,
}

/// A [`ChoiceModel`] with actions referred to by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    RationalMax,
    AlphaRational {
        alpha: f64,
        background: BTreeMap<String, f64>,
    },
    IndependentTable {
        probs: BTreeMap<String, f64>,
    },
    Logit {
        q: f64,
    },
    DefaultNudge {
        default_action: String,
        gamma: f64,
        base: Box<ModelSpec>,
    },
    RandomUtilityMc {
        error: ErrorSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Monte Carlo settings after applying command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct McOverrides {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

pub enum ScenarioKind<'a> {
    Population(&'a PopulationSection),
    Hotelling(&'a HotellingScenario),
    Treatment(&'a TreatmentScenario),
}

fn field_error(field: impl Into<String>, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {reason}", field.into()))
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<ScenarioDocument, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    parse_scenario_str(&text).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioDocument, CliError> {
    let doc: ScenarioDocument = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("parse error: {e}")))?;
    doc.validate()?;
    Ok(doc)
}

impl ScenarioDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn kind(&self) -> Result<ScenarioKind<'_>, CliError> {
        match (&self.population, &self.hotelling, &self.treatment) {
            (Some(p), None, None) => Ok(ScenarioKind::Population(p)),
            (None, Some(h), None) => Ok(ScenarioKind::Hotelling(h)),
            (None, None, Some(t)) => Ok(ScenarioKind::Treatment(t)),
            _ => Err(field_error(
                "population|hotelling|treatment",
                "exactly one scenario section is required",
            )),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field_error(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        match self.kind()? {
            ScenarioKind::Population(p) => {
                p.population()?;
                for (k, m) in p.models.iter().enumerate() {
                    p.resolve_model(&m.model, &format!("population.models[{k}].model"), McOverrides::default())?;
                }
                p.choice_set()?;
            }
            ScenarioKind::Hotelling(h) => {
                h.validate().map_err(|e| field_error("hotelling", e))?;
            }
            ScenarioKind::Treatment(t) => {
                t.validate().map_err(|e| field_error("treatment", e))?;
            }
        }
        if let Some(s) = &self.sweep {
            SweepGrid::range(s.q_min, s.q_max, s.q_step).map_err(|e| field_error("sweep", e))?;
        }
        if let Some(McSection { samples: Some(0), .. }) = self.mc {
            return Err(field_error("mc.samples", "must be positive"));
        }
        Ok(())
    }
}

impl PopulationSection {
    pub fn action_set(&self) -> Result<ActionSet, CliError> {
        ActionSet::new(self.actions.iter().cloned()).map_err(|e| field_error("population.actions", e))
    }

    pub fn population(&self) -> Result<Population, CliError> {
        let actions = self.action_set()?;
        let total: f64 = self.types.iter().map(|t| t.weight).sum();
        if self.types.is_empty() {
            return Err(field_error("population.types", "at least one type is required"));
        }
        for (k, t) in self.types.iter().enumerate() {
            if t.utilities.len() != actions.len() {
                return Err(field_error(
                    format!("population.types[{k}].utilities"),
                    format!("has {} entries for {} actions", t.utilities.len(), actions.len()),
                ));
            }
            if !(t.weight.is_finite() && t.weight >= 0.0) {
                return Err(field_error(format!("population.types[{k}].weight"), "must be finite and >= 0"));
            }
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(field_error(
                "population.types",
                format!("weights sum to {total}, expected 1"),
            ));
        }
        build_population(
            actions,
            self.types
                .iter()
                .map(|t| UtilityType::new(t.utilities.clone(), t.weight))
                .collect(),
        )
        .map_err(|e| field_error("population.types", e))
    }

    fn index(&self, label: &str, field: &str) -> Result<usize, CliError> {
        self.actions
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| field_error(field, format!("unknown action label {label:?}")))
    }

    fn distribution(&self, map: &BTreeMap<String, f64>, field: &str) -> Result<Vec<f64>, CliError> {
        let mut probs = vec![0.0; self.actions.len()];
        for (label, &p) in map {
            probs[self.index(label, field)?] = p;
        }
        Ok(probs)
    }

    pub fn choice_set(&self) -> Result<ChoiceSet, CliError> {
        match &self.choice_set {
            None => Ok(self.action_set()?.full_set()),
            Some(labels) => {
                let idx = labels
                    .iter()
                    .map(|l| self.index(l, "population.choice_set"))
                    .collect::<Result<Vec<_>, _>>()?;
                ChoiceSet::new(idx).map_err(|e| field_error("population.choice_set", e))
            }
        }
    }

    /// The model called `name`, or the first one.
    pub fn model(&self, name: Option<&str>, mc: McOverrides) -> Result<ChoiceModel, CliError> {
        let (k, named) = match name {
            None => self
                .models
                .iter()
                .enumerate()
                .next()
                .ok_or_else(|| field_error("population.models", "at least one model is required"))?,
            Some(n) => self
                .models
                .iter()
                .enumerate()
                .find(|(_, m)| m.name == n)
                .ok_or_else(|| CliError::Usage(format!("no model named {n:?}")))?,
        };
        self.resolve_model(&named.model, &format!("population.models[{k}].model"), mc)
    }

    fn resolve_model(&self, spec: &ModelSpec, field: &str, mc: McOverrides) -> Result<ChoiceModel, CliError> {
        let model = match spec {
            ModelSpec::RationalMax => ChoiceModel::RationalMax,
            ModelSpec::Logit { q } => ChoiceModel::logit(*q),
            ModelSpec::AlphaRational { alpha, background } => ChoiceModel::AlphaRational {
                alpha: *alpha,
                background: self.distribution(background, &format!("{field}.background"))?,
            },
            ModelSpec::IndependentTable { probs } => ChoiceModel::IndependentTable {
                probs: self.distribution(probs, &format!("{field}.probs"))?,
            },
            ModelSpec::DefaultNudge { default_action, gamma, base } => ChoiceModel::nudge(
                self.index(default_action, &format!("{field}.default_action"))?,
                *gamma,
                self.resolve_model(base, &format!("{field}.base"), mc)?,
            ),
            ModelSpec::RandomUtilityMc { error, samples, seed } => ChoiceModel::monte_carlo(
                *error,
                mc.samples.or(*samples).unwrap_or(welfare_core::choice::DEFAULT_MC_SAMPLES),
                mc.seed.or(*seed).unwrap_or(0),
            ),
        };
        model
            .validate(self.actions.len())
            .map_err(|e| field_error(field, e))?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POPULATION: &str = r#"{
      "schema_version": 1,
      "population": {
        "actions": ["a", "b"],
        "types": [
          {"utilities": [1.0, 0.0], "weight": 0.5},
          {"utilities": [0.0, 1.0], "weight": 0.5}
        ],
        "models": [
          {"name": "nudged", "model": {"kind": "default_nudge", "default_action": "b", "gamma": 0.3,
            "base": {"kind": "logit", "q": 2.0}}},
          {"name": "table", "model": {"kind": "independent_table", "probs": {"a": 0.25, "b": 0.75}}}
        ]
      },
      "mc": {"samples": 1000, "seed": 3}
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let doc = parse_scenario_str(POPULATION).unwrap();
        let again = parse_scenario_str(&doc.to_json()).unwrap();
        assert_eq!(doc, again);
    }

    #[test]
    fn labels_resolve_to_indices() {
        let doc = parse_scenario_str(POPULATION).unwrap();
        let p = doc.population.as_ref().unwrap();
        assert_eq!(
            p.model(None, McOverrides::default()).unwrap(),
            ChoiceModel::nudge(1, 0.3, ChoiceModel::logit(2.0))
        );
        assert_eq!(
            p.model(Some("table"), McOverrides::default()).unwrap(),
            ChoiceModel::IndependentTable { probs: vec![0.25, 0.75] }
        );
    }

    #[test]
    fn errors_name_the_field() {
        let bad = POPULATION.replace("\"b\", \"gamma\"", "\"c\", \"gamma\"");
        let err = parse_scenario_str(&bad).unwrap_err().to_string();
        assert!(err.contains("population.models[0].model.default_action"), "{err}");

        let bad = POPULATION.replace("\"weight\": 0.5}\n", "\"weight\": 0.4}\n");
        let err = parse_scenario_str(&bad).unwrap_err().to_string();
        assert!(err.contains("population.types") && err.contains("0.9"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_scenario_str("{\n  \"schema_version\": 1,\n  oops\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn rejects_unknown_version_and_multiple_kinds() {
        let err = parse_scenario_str(&POPULATION.replace("\"schema_version\": 1", "\"schema_version\": 2"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("schema_version"), "{err}");
        let both = POPULATION.replace(
            "\"mc\":",
            "\"hotelling\": {\"store_locations\": [0.0], \"person_locations\": [0.0]}, \"mc\":",
        );
        assert!(parse_scenario_str(&both).unwrap_err().to_string().contains("exactly one"));
    }
}
