//! Benchmark fixtures shared by the criterion targets.

use crewplan_core::generate::{generate_instance, GenConfig, Injection};
use crewplan_core::harness::activities_for;
use crewplan_core::model::Instance;

/// Feasible instance of the size used for a horizon length.
pub fn feasible(hours: u32, seed: u64) -> Instance {
    generate_instance(&GenConfig { horizon_hours: hours, n_activities: activities_for(hours), seed, ..GenConfig::default() })
        .expect("valid generator config")
}

/// Same family with one overload planted.
pub fn overloaded(hours: u32, seed: u64) -> Instance {
    generate_instance(&GenConfig {
        horizon_hours: hours,
        n_activities: activities_for(hours),
        injection: Injection::Overload(1),
        seed,
        ..GenConfig::default()
    })
    .expect("valid generator config")
}
