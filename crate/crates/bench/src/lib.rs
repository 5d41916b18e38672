//! Workloads shared by the criterion benches.

use welfare_core::{build_population, ActionSet, Population, UtilityType};

/// Deterministic population with `types` utility vectors over `actions`
/// actions, spread by a fixed low-discrepancy sequence.
pub fn synthetic_population(actions: usize, types: usize) -> Population {
    let golden = 0.618_033_988_749_895_f64;
    let mut x = 0.5;
    let types = (0..types)
        .map(|_| {
            let utilities = (0..actions)
                .map(|_| {
                    x = (x + golden) % 1.0;
                    4.0 * x - 2.0
                })
                .collect();
            UtilityType::new(utilities, 1.0)
        })
        .collect();
    build_population(ActionSet::numbered(actions).expect("actions > 0"), types)
        .expect("synthetic population is valid")
}
