//! Trust-weighted QoS aggregation with a bounded retention window.

use std::collections::{BTreeMap, VecDeque};

use crate::event::{MetricId, ProductId};

use super::QosReport;

/// Reports retained per (product, metric) pair; older reports fall off.
pub const RETENTION_WINDOW: usize = 100;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QosStore {
    reports: BTreeMap<(ProductId, MetricId), VecDeque<QosReport>>,
}

impl QosStore {
    /// Retains the report and returns the updated trust-weighted mean
    /// `Σ(wᵢ·vᵢ) / Σ(wᵢ)` for its (product, metric) pair.
    pub fn ingest(&mut self, report: QosReport) -> f64 {
        let key = (report.product_id.clone(), report.metric.clone());
        let window = self.reports.entry(key).or_default();
        if window.len() == RETENTION_WINDOW {
            window.pop_front();
        }
        window.push_back(report);
        weighted_mean(window.iter()).expect("window is non-empty")
    }

    pub fn aggregate(&self, product_id: &ProductId, metric: &MetricId) -> Option<f64> {
        let window = self.reports.get(&(product_id.clone(), metric.clone()))?;
        weighted_mean(window.iter())
    }

    /// All retained reports, ordered by (product, metric) then arrival.
    pub fn retained_reports(&self) -> Vec<QosReport> {
        self.reports.values().flat_map(|w| w.iter().cloned()).collect()
    }
}

fn weighted_mean<'a>(reports: impl Iterator<Item = &'a QosReport>) -> Option<f64> {
    let mut weighted_sum = 0.0;
    let mut weight_total = 0.0;
    for report in reports {
        weighted_sum += report.trust_weight * report.value;
        weight_total += report.trust_weight;
    }
    (weight_total > 0.0).then(|| weighted_sum / weight_total)
}
