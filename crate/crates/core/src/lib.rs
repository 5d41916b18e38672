//! Utilitarian welfare of policies over heterogeneous, boundedly rational
//! populations.
//!
//! The crate computes conditional choice probabilities under several behavior
//! models ([`choice`]), welfare and regret of mandates and choice sets
//! ([`welfare`]), exhaustive search over choice-constraining policies and
//! logit sweeps with reswitching detection ([`search`]), and the binary
//! treatment calculus of mandates versus decentralized choice with private
//! information ([`treatment`]).

pub mod choice;
pub mod error;
pub mod scenario;
pub mod search;
pub mod treatment;
pub mod welfare;

pub use choice::{
    binary_scaled_choice_prob, choice_probabilities, sample_errors, ChoiceModel,
    ChoiceProbabilities, ErrorSpec,
};
pub use error::{Error, Result};
pub use scenario::{
    build_population, hotelling_population, ActionSet, ChoiceSet, HotellingScenario, Population,
    UtilityType,
};
pub use search::{
    enumerate_choice_sets, find_crossings, optimize_choice_set, sweep_logit, Crossing,
    OptimalChoiceSet, SweepGrid, SweepResult,
};
pub use treatment::{
    analyze_treatment, BeliefModel, CovariateCell, OutcomeUtilities, Recommendation, Treatment,
    TreatmentReport, TreatmentScenario, XCell,
};
pub use welfare::{
    expected_utilities, idealized_optimum, optimal_mandate, policy_welfare,
    policy_welfare_with_share, Mandate, ParetoVerdict, PolicyEvaluation,
};
