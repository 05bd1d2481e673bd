//! Deterministic simulated cloud: the test bed the broker governs against.
//!
//! Providers are in-process state machines with optional deploy latency
//! and fault injection; scenarios are declarative JSON scripts replayed
//! through a seeded generator, so every run is reproducible bit for bit.

mod provider;
mod rng;
mod scenario;

pub use provider::{default_metric_generator, MetricGeneratorSpec, SimClock, SimProvider};
pub use rng::XorShift64Star;
pub use scenario::{
    providers_for_catalog, run_scenario, Scenario, ScenarioAction, ScenarioError, ScenarioOutcome,
    TimelineEntry,
};
