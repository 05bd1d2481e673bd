//! Declarative scenario scripts and the tick-by-tick runner.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, ProductPatch, WorkloadProfile};
use crate::decision::GovernancePolicy;
use crate::event::{MetricId, MonitorSample, ProductId};
use crate::manifest::DeploymentManifest;
use crate::model::ApplicationModel;
use crate::runtime::{Broker, BrokerError, EventLog};

use super::provider::{default_metric_generator, SimClock, SimProvider};
use super::rng::XorShift64Star;

/// One scripted action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ScenarioAction {
    /// Patch a product; the implied market events run through governance.
    #[serde(rename_all = "camelCase")]
    CatalogUpdate { product_id: ProductId, patch: ProductPatch },
    /// Generate monitoring samples for a component from its current
    /// provider's seeded metric generator, with optional overrides.
    #[serde(rename_all = "camelCase")]
    InjectSamples {
        component_name: String,
        count: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metric: Option<MetricId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        jitter_pct: Option<f64>,
    },
    /// Arm fault injection: the provider's next `count` deploys fail.
    #[serde(rename_all = "camelCase")]
    FailDeploy { product_id: ProductId, count: u32 },
    /// Explicit replan command.
    Replan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimelineEntry {
    pub tick: u64,
    pub action: ScenarioAction,
}

/// A seeded, scripted run: `ticks` simulated ticks with actions applied at
/// their tick, ties in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub seed: u64,
    pub ticks: u64,
    #[serde(default = "default_tick_seconds")]
    pub tick_seconds: u64,
    #[serde(default)]
    pub timeline: Vec<TimelineEntry>,
}

fn default_tick_seconds() -> u64 {
    60
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("timeline must be sorted by tick")]
    UnsortedTimeline,
    #[error("timeline tick {0} is outside 1..=ticks")]
    TickOutOfRange(u64),
    #[error("tickSeconds must be positive")]
    ZeroTickSeconds,
    #[error("initial plan is infeasible: {0}")]
    InitialPlanInfeasible(String),
    #[error("scenario action references unknown product {0}")]
    UnknownProduct(ProductId),
    #[error("scenario action references unassigned component {0:?}")]
    UnknownComponent(String),
    #[error(transparent)]
    Broker(#[from] BrokerError),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.tick_seconds == 0 {
            return Err(ScenarioError::ZeroTickSeconds);
        }
        let mut last = 0;
        for entry in &self.timeline {
            if entry.tick < last {
                return Err(ScenarioError::UnsortedTimeline);
            }
            if entry.tick == 0 || entry.tick > self.ticks {
                return Err(ScenarioError::TickOutOfRange(entry.tick));
            }
            last = entry.tick;
        }
        Ok(())
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub log: EventLog,
    pub broker: Broker,
    pub providers: BTreeMap<ProductId, SimProvider>,
    pub clock: SimClock,
}

impl ScenarioOutcome {
    /// Conservation check: every application component is deployed on
    /// exactly one provider, the one the active plan assigns.
    pub fn deployment_consistent(&self) -> Result<(), String> {
        for assignment in &self.broker.plan().assignments {
            let component = assignment.component_name.as_str();
            let hosts: Vec<&ProductId> = self
                .providers
                .iter()
                .filter(|(_, p)| p.is_deployed_component(component))
                .map(|(id, _)| id)
                .collect();
            if hosts.len() != 1 {
                return Err(format!("component {component:?} deployed on {hosts:?}"));
            }
            if hosts[0] != &assignment.product_id {
                return Err(format!(
                    "component {component:?} deployed on {} but assigned to {}",
                    hosts[0], assignment.product_id
                ));
            }
        }
        Ok(())
    }

    /// Total injected deploy failures across all providers.
    pub fn injected_failures(&self) -> u64 {
        self.providers.values().map(|p| p.injected_failures()).sum()
    }
}

impl SimProvider {
    fn is_deployed_component(&self, component: &str) -> bool {
        use crate::runtime::ProviderAdapter;
        self.is_deployed(component)
    }
}

/// Builds one simulated provider per catalog product, with the default
/// metric generator derived from the product's SLA.
pub fn providers_for_catalog(catalog: &Catalog) -> BTreeMap<ProductId, SimProvider> {
    catalog
        .list_products()
        .into_iter()
        .map(|product| {
            (
                product.product_id.clone(),
                SimProvider::new(
                    product.product_id.clone(),
                    default_metric_generator(product.sla.response_time_ms_p95),
                ),
            )
        })
        .collect()
}

/// Runs a scenario tick by tick through the governance loop.
///
/// A pure function of its arguments: identical inputs (seed included)
/// produce byte-identical logs. After the scripted ticks the clock keeps
/// advancing until in-flight moves complete, so the run always ends
/// quiescent.
pub fn run_scenario(
    scenario: &Scenario,
    manifest: &DeploymentManifest,
    app: &ApplicationModel,
    policy: &GovernancePolicy,
    workload: &WorkloadProfile,
    initial_catalog: Catalog,
) -> Result<ScenarioOutcome, ScenarioError> {
    scenario.validate()?;
    let mut providers = providers_for_catalog(&initial_catalog);
    let mut rng = XorShift64Star::new(scenario.seed);
    let mut clock = SimClock::new(scenario.tick_seconds);

    let mut broker = Broker::bootstrap(
        manifest.clone(),
        app.clone(),
        policy.clone(),
        workload.clone(),
        initial_catalog,
        &mut providers,
        clock.now(),
    )
    .map_err(|err| match err {
        BrokerError::Decision(e) => ScenarioError::InitialPlanInfeasible(e.to_string()),
        other => ScenarioError::Broker(other),
    })?;

    let mut timeline = scenario.timeline.iter().peekable();
    for tick in 1..=scenario.ticks {
        clock.advance_to(tick);
        let now = clock.now();
        for provider in providers.values_mut() {
            provider.tick(tick);
        }
        broker.on_tick(&mut providers, now)?;

        while let Some(entry) = timeline.peek() {
            if entry.tick != tick {
                break;
            }
            let entry = timeline.next().expect("peeked");
            apply_action(&entry.action, &mut broker, &mut providers, &mut rng, now)?;
        }
    }

    // Let in-flight moves finish; their latency is bounded by the longest
    // provider deploy latency.
    let max_latency: u64 = providers.values().map(|p| p.deploy_latency_ticks).max().unwrap_or(0);
    let mut drained = 0;
    while !broker.in_flight().is_empty() && drained <= max_latency {
        clock.advance_to(clock.tick() + 1);
        drained += 1;
        for provider in providers.values_mut() {
            provider.tick(clock.tick());
        }
        broker.on_tick(&mut providers, clock.now())?;
    }

    Ok(ScenarioOutcome { log: broker.event_log(), broker, providers, clock })
}

fn apply_action(
    action: &ScenarioAction,
    broker: &mut Broker,
    providers: &mut BTreeMap<ProductId, SimProvider>,
    rng: &mut XorShift64Star,
    now: u64,
) -> Result<(), ScenarioError> {
    match action {
        ScenarioAction::CatalogUpdate { product_id, patch } => {
            broker.apply_catalog_update(product_id, patch, providers, now)?;
        }
        ScenarioAction::InjectSamples { component_name, count, metric, base, jitter_pct } => {
            let assignment = broker
                .plan()
                .assignment(component_name)
                .ok_or_else(|| ScenarioError::UnknownComponent(component_name.clone()))?;
            let product_id = assignment.product_id.clone();
            let provider = providers
                .get(&product_id)
                .ok_or_else(|| ScenarioError::UnknownProduct(product_id.clone()))?;
            let mut spec = provider.metric_generator.clone();
            if let Some(metric) = metric {
                spec.metric = metric.clone();
            }
            if let Some(base) = base {
                spec.base = *base;
            }
            if let Some(jitter) = jitter_pct {
                spec.jitter_pct = *jitter;
            }
            let samples: Vec<MonitorSample> = (0..*count)
                .map(|_| MonitorSample {
                    product_id: product_id.clone(),
                    component_name: component_name.clone(),
                    metric: spec.metric.clone(),
                    value: spec.sample(rng),
                    timestamp: now,
                })
                .collect();
            broker.ingest_samples(samples, providers, now)?;
        }
        ScenarioAction::FailDeploy { product_id, count } => {
            let provider = providers
                .get_mut(product_id)
                .ok_or_else(|| ScenarioError::UnknownProduct(product_id.clone()))?;
            provider.fail_next_deploys += count;
        }
        ScenarioAction::Replan => {
            broker.replan(providers, now)?;
        }
    }
    Ok(())
}
