//! Monitor point: per-component correlation windows and SLO checking.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::DeploymentPlan;
use crate::event::{GovernanceEventKind, MetricId, MonitorSample, ProductId, LATENCY_METRIC};

/// Samples retained per (component, metric) pair.
pub const CORRELATION_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("sample references component {0:?}, which has no assignment")]
    UnknownComponent(String),
}

/// The correlation between one component's observed behavior and its SLO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorrelationRecord {
    pub component_name: String,
    pub product_id: ProductId,
    pub slo_bound: f64,
    /// Nearest-rank p95 over the retained window.
    pub observed_aggregate: f64,
    pub violated: bool,
    pub window_len: usize,
}

/// Collects, aggregates, and filters monitoring samples; only SLO breaches
/// pass through to the decision point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Monitor {
    windows: BTreeMap<(String, MetricId), VecDeque<f64>>,
}

impl Monitor {
    /// Appends a batch to the correlation windows and emits one
    /// `QosViolation` per (component, metric) whose windowed p95 now
    /// exceeds its SLO bound. Non-violating batches emit nothing.
    pub fn ingest(
        &mut self,
        samples: &[MonitorSample],
        slos: &BTreeMap<String, f64>,
        plan: &DeploymentPlan,
    ) -> Result<Vec<GovernanceEventKind>, MonitorError> {
        let mut touched: Vec<(String, MetricId)> = Vec::new();
        for sample in samples {
            if plan.assignment(&sample.component_name).is_none() {
                return Err(MonitorError::UnknownComponent(sample.component_name.clone()));
            }
            let key = (sample.component_name.clone(), sample.metric.clone());
            let window = self.windows.entry(key.clone()).or_default();
            if window.len() == CORRELATION_WINDOW {
                window.pop_front();
            }
            window.push_back(sample.value);
            if !touched.contains(&key) {
                touched.push(key);
            }
        }

        let mut violations = Vec::new();
        for (component, metric) in touched {
            if metric.as_str() != LATENCY_METRIC {
                continue;
            }
            let Some(&bound) = slos.get(&component) else { continue };
            let window = &self.windows[&(component.clone(), metric.clone())];
            let p95 = nearest_rank_p95(window.iter().copied());
            if p95 > bound {
                let product_id = plan
                    .assignment(&component)
                    .expect("assignment checked during ingest")
                    .product_id
                    .clone();
                violations.push(GovernanceEventKind::QosViolation {
                    product_id,
                    component_name: component,
                    metric,
                    observed: p95,
                    bound,
                });
            }
        }
        Ok(violations)
    }

    /// Current correlation state for every monitored (component, metric).
    pub fn correlations(
        &self,
        slos: &BTreeMap<String, f64>,
        plan: &DeploymentPlan,
    ) -> Vec<CorrelationRecord> {
        self.windows
            .iter()
            .filter_map(|((component, metric), window)| {
                if metric.as_str() != LATENCY_METRIC {
                    return None;
                }
                let bound = *slos.get(component)?;
                let assignment = plan.assignment(component)?;
                let p95 = nearest_rank_p95(window.iter().copied());
                Some(CorrelationRecord {
                    component_name: component.clone(),
                    product_id: assignment.product_id.clone(),
                    slo_bound: bound,
                    observed_aggregate: p95,
                    violated: p95 > bound,
                    window_len: window.len(),
                })
            })
            .collect()
    }

    pub fn window(&self, component: &str, metric: &MetricId) -> Option<&VecDeque<f64>> {
        self.windows.get(&(component.to_string(), metric.clone()))
    }
}

/// Nearest-rank percentile: the ⌈0.95·n⌉-th smallest value.
pub fn nearest_rank_p95(values: impl Iterator<Item = f64>) -> f64 {
    let mut sorted: Vec<f64> = values.collect();
    assert!(!sorted.is_empty(), "p95 of an empty window");
    sorted.sort_by(f64::total_cmp);
    let rank = (0.95 * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}
