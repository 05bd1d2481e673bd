//! Simulated providers and the discrete clock.

use std::collections::{BTreeMap, BTreeSet};

use crate::event::{MetricId, ProductId, SimTimestamp, LATENCY_METRIC};
use crate::runtime::{AdapterError, ProviderAdapter};

use super::rng::XorShift64Star;

/// Seeded distribution a provider draws monitoring samples from:
/// `base · (1 + jitterPct/100 · u)` with `u` uniform in `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGeneratorSpec {
    pub metric: MetricId,
    pub base: f64,
    pub jitter_pct: f64,
}

impl MetricGeneratorSpec {
    pub fn sample(&self, rng: &mut XorShift64Star) -> f64 {
        self.base * (1.0 + self.jitter_pct / 100.0 * rng.next_symmetric())
    }
}

/// A stand-in cloud provider: tracks deployments, models deploy latency in
/// ticks, and supports fault injection.
#[derive(Debug, Clone, PartialEq)]
pub struct SimProvider {
    pub product_id: ProductId,
    pub deploy_latency_ticks: u64,
    pub fail_next_deploys: u32,
    pub metric_generator: MetricGeneratorSpec,
    deployed: BTreeSet<String>,
    pending: BTreeMap<String, u64>,
    current_tick: u64,
    injected_failures: u64,
}

impl SimProvider {
    pub fn new(product_id: ProductId, metric_generator: MetricGeneratorSpec) -> Self {
        SimProvider {
            product_id,
            deploy_latency_ticks: 0,
            fail_next_deploys: 0,
            metric_generator,
            deployed: BTreeSet::new(),
            pending: BTreeMap::new(),
            current_tick: 0,
            injected_failures: 0,
        }
    }

    /// Advances the provider's clock, completing deployments whose latency
    /// has elapsed.
    pub fn tick(&mut self, tick: u64) {
        debug_assert!(tick >= self.current_tick, "clock never decreases");
        self.current_tick = tick;
        let ready: Vec<String> = self
            .pending
            .iter()
            .filter(|(_, ready_at)| **ready_at <= tick)
            .map(|(component, _)| component.clone())
            .collect();
        for component in ready {
            self.pending.remove(&component);
            self.deployed.insert(component);
        }
    }

    pub fn pending_components(&self) -> BTreeSet<String> {
        self.pending.keys().cloned().collect()
    }

    /// How many deploys this provider has failed through injection.
    pub fn injected_failures(&self) -> u64 {
        self.injected_failures
    }
}

impl ProviderAdapter for SimProvider {
    fn deploy(&mut self, component: &str, _params: &BTreeMap<String, String>) -> Result<(), AdapterError> {
        if self.fail_next_deploys > 0 {
            self.fail_next_deploys -= 1;
            self.injected_failures += 1;
            return Err(AdapterError::InjectedFailure);
        }
        if self.deployed.contains(component) || self.pending.contains_key(component) {
            return Err(AdapterError::AlreadyDeployed(component.to_string()));
        }
        if self.deploy_latency_ticks == 0 {
            self.deployed.insert(component.to_string());
        } else {
            self.pending
                .insert(component.to_string(), self.current_tick + self.deploy_latency_ticks);
        }
        Ok(())
    }

    fn undeploy(&mut self, component: &str) -> Result<(), AdapterError> {
        if self.deployed.remove(component) || self.pending.remove(component).is_some() {
            Ok(())
        } else {
            Err(AdapterError::NotDeployed(component.to_string()))
        }
    }

    fn restore(&mut self, component: &str) {
        self.pending.remove(component);
        self.deployed.insert(component.to_string());
    }

    fn is_deployed(&self, component: &str) -> bool {
        self.deployed.contains(component)
    }

    fn deployed_components(&self) -> BTreeSet<String> {
        self.deployed.clone()
    }
}

/// Discrete scenario clock; wall time is `tick × tick_seconds`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    current_tick: u64,
    tick_seconds: u64,
}

impl SimClock {
    pub fn new(tick_seconds: u64) -> Self {
        SimClock { current_tick: 0, tick_seconds }
    }

    pub fn advance_to(&mut self, tick: u64) {
        assert!(tick >= self.current_tick, "clock never decreases");
        self.current_tick = tick;
    }

    pub fn tick(&self) -> u64 {
        self.current_tick
    }

    pub fn tick_seconds(&self) -> u64 {
        self.tick_seconds
    }

    pub fn now(&self) -> SimTimestamp {
        self.current_tick * self.tick_seconds
    }
}

/// Default generator for a product: samples around 80% of its SLA
/// response-time bound with 10% jitter, so healthy providers stay inside
/// their SLOs.
pub fn default_metric_generator(response_time_ms_p95: f64) -> MetricGeneratorSpec {
    MetricGeneratorSpec {
        metric: MetricId::from(LATENCY_METRIC),
        base: 0.8 * response_time_ms_p95,
        jitter_pct: 10.0,
    }
}
