//! Typed governance events: the market and monitoring changes the broker
//! reacts to.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Simulated-clock instant, in seconds since scenario start.
pub type SimTimestamp = u64;

/// Identifies a product in the catalog.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductId(pub String);

impl ProductId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ProductId {
    fn from(value: &str) -> Self {
        ProductId(value.to_string())
    }
}

impl fmt::Display for ProductId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifies a priced or monitored metric (e.g. "cpu", "latency-ms").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricId(pub String);

impl MetricId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for MetricId {
    fn from(value: &str) -> Self {
        MetricId(value.to_string())
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Response-time metric monitored against the SLA's p95 bound.
pub const LATENCY_METRIC: &str = "latency-ms";

/// Pseudo-metric used in price-change events for the plan's fixed fee.
pub const FIXED_FEE_METRIC: &str = "fixed-fee-per-month";

/// One monitoring measurement attributed to a component on a product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonitorSample {
    pub product_id: ProductId,
    pub component_name: String,
    pub metric: MetricId,
    pub value: f64,
    pub timestamp: SimTimestamp,
}

/// What happened, without loop bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum GovernanceEventKind {
    #[serde(rename_all = "camelCase")]
    ProductRegistered { product_id: ProductId },
    /// A per-unit price changed; additions price up from 0 and removals
    /// price down to 0.
    #[serde(rename_all = "camelCase")]
    PriceChanged { product_id: ProductId, metric: MetricId, old: f64, new: f64 },
    #[serde(rename_all = "camelCase")]
    SlaChanged { product_id: ProductId, field: String, old: String, new: String },
    #[serde(rename_all = "camelCase")]
    ProductWithdrawn { product_id: ProductId },
    #[serde(rename_all = "camelCase")]
    TechnologyChanged { product_id: ProductId, added_tags: Vec<String>, removed_tags: Vec<String> },
    #[serde(rename_all = "camelCase")]
    MetricSamples { samples: Vec<MonitorSample> },
    #[serde(rename_all = "camelCase")]
    QosViolation {
        product_id: ProductId,
        component_name: String,
        metric: MetricId,
        observed: f64,
        bound: f64,
    },
}

impl GovernanceEventKind {
    /// The product a market event concerns, when there is exactly one.
    pub fn product_id(&self) -> Option<&ProductId> {
        match self {
            GovernanceEventKind::ProductRegistered { product_id }
            | GovernanceEventKind::PriceChanged { product_id, .. }
            | GovernanceEventKind::SlaChanged { product_id, .. }
            | GovernanceEventKind::ProductWithdrawn { product_id }
            | GovernanceEventKind::TechnologyChanged { product_id, .. }
            | GovernanceEventKind::QosViolation { product_id, .. } => Some(product_id),
            GovernanceEventKind::MetricSamples { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GovernanceEventKind::ProductRegistered { .. } => "productRegistered",
            GovernanceEventKind::PriceChanged { .. } => "priceChanged",
            GovernanceEventKind::SlaChanged { .. } => "slaChanged",
            GovernanceEventKind::ProductWithdrawn { .. } => "productWithdrawn",
            GovernanceEventKind::TechnologyChanged { .. } => "technologyChanged",
            GovernanceEventKind::MetricSamples { .. } => "metricSamples",
            GovernanceEventKind::QosViolation { .. } => "qosViolation",
        }
    }
}

/// An event stamped by the broker's event loop. `seq` is strictly
/// increasing across the broker's lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GovernanceEvent {
    pub seq: u64,
    pub timestamp: SimTimestamp,
    #[serde(flatten)]
    pub kind: GovernanceEventKind,
}
