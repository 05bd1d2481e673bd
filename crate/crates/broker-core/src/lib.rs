//! Cross-cloud deployment governance broker.
//!
//! The broker takes an application model plus an owner-authored deployment
//! manifest, matches each application component against a catalog of cloud
//! products, and produces a revisioned deployment plan. In active lifecycle
//! mode it keeps governing: market events (price changes, SLA changes,
//! product withdrawals) and monitoring data flow through a single ordered
//! event loop that re-evaluates the plan and enforces moves through
//! provider adapters.
//!
//! The crate is organized along the pipeline:
//!
//! - [`model`]: the application being deployed (components and their
//!   technology requirements).
//! - [`manifest`]: the deployment governance DSL with parsing,
//!   serialization, and selector resolution.
//! - [`catalog`]: the product registry; pricing and SLA data translated
//!   into comparable normalized offers.
//! - [`decision`]: feasibility filtering, per-option ranking, plan
//!   construction, plan diffing, and redeploy triggers.
//! - [`event`]: the typed governance events that drive the loop.
//! - [`runtime`]: monitor point, enforcement point, and the governance
//!   loop connecting them, plus the line-delimited JSON event log.
//! - [`simcloud`]: deterministic simulated providers and scenario
//!   scripting used as the test bed.

pub mod catalog;
pub mod decision;
pub mod event;
pub mod manifest;
pub mod model;
pub mod runtime;
pub mod simcloud;

#[cfg(test)]
pub(crate) mod testsupport;

pub use catalog::{Catalog, CloudProduct, NormalizedOffer, PricingPlan, SlaTerms, WorkloadProfile};
pub use decision::{DeploymentPlan, GovernancePolicy, PlanDiff};
pub use event::{GovernanceEvent, GovernanceEventKind};
pub use manifest::{DeploymentManifest, DeploymentOption};
pub use model::{ApplicationModel, Component, ComponentKind};
pub use runtime::Broker;
pub use simcloud::{run_scenario, Scenario, ScenarioOutcome};
