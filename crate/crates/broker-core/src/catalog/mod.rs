//! Cloud product registry.
//!
//! Products are registered manually with their pricing plan, SLA terms, and
//! technology tags. Third-party QoS reports accumulate per product and
//! metric. The registry translates all of it into [`NormalizedOffer`]s
//! (workload-specific monthly cost in the reference currency plus
//! performance, reliability, and security scores in `[0, 1]`), which is
//! what the decision point ranks.

pub mod money;
pub mod units;
mod qos;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::event::{GovernanceEventKind, MetricId, ProductId, SimTimestamp, FIXED_FEE_METRIC, LATENCY_METRIC};
use crate::manifest::CloudType;

use qos::QosStore;

/// What a product sells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceType {
    Storage,
    Compute,
    Database,
    Messaging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductStatus {
    Active,
    Withdrawn,
}

/// One metered price: so much per canonical unit of the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rate {
    pub metric: MetricId,
    pub unit: String,
    #[serde(with = "money")]
    pub price_per_unit: f64,
}

/// A product's published pricing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PricingPlan {
    /// ISO 4217 code, e.g. "EUR".
    pub currency: String,
    #[serde(with = "money")]
    pub fixed_fee_per_month: f64,
    #[serde(default)]
    pub rates: Vec<Rate>,
}

/// A product's published service-level terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SlaTerms {
    pub availability_pct: f64,
    pub response_time_ms_p95: f64,
    #[serde(default)]
    pub security_attrs: BTreeSet<String>,
}

/// A catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CloudProduct {
    pub product_id: ProductId,
    pub provider_id: String,
    pub cloud_type: CloudType,
    #[serde(default)]
    pub service_types: BTreeSet<ServiceType>,
    #[serde(default)]
    pub regions: BTreeSet<String>,
    #[serde(default)]
    pub tech_tags: BTreeSet<String>,
    pub pricing: PricingPlan,
    pub sla: SlaTerms,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub status: ProductStatus,
    /// Registry position by market volume; 1 is the largest player.
    pub market_volume_rank: u32,
    /// Interoperability standards the product implements (e.g. "OVF").
    #[serde(default)]
    pub standards: BTreeSet<String>,
}

impl CloudProduct {
    pub fn is_active(&self) -> bool {
        self.status == ProductStatus::Active
    }
}

/// A third-party measurement of a product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QosReport {
    pub product_id: ProductId,
    pub region: String,
    pub metric: MetricId,
    pub value: f64,
    pub source_id: String,
    /// How much this source is trusted, in `(0, 1]`.
    pub trust_weight: f64,
    pub timestamp: SimTimestamp,
}

/// Expected monthly resource consumption, in canonical units per metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkloadProfile {
    #[serde(default)]
    pub usage: BTreeMap<MetricId, f64>,
}

impl WorkloadProfile {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// A product translated into comparable numbers for one workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormalizedOffer {
    pub product_id: ProductId,
    /// Monthly cost in the reference currency.
    pub monthly_cost: f64,
    pub perf_score: f64,
    pub reliability_score: f64,
    pub security_score: f64,
    /// No QoS data exists for this product; the perf score is the
    /// optimistic default rather than a measurement.
    pub unmeasured: bool,
}

/// Partial product update. Only the facets that produce governance events
/// are patchable; anything else is a re-registration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProductPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pricing: Option<PricingPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla: Option<SlaTerms>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tech_tags: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ProductStatus>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("product {0} is already registered")]
    DuplicateProduct(ProductId),
    #[error("invalid {field}: {reason}")]
    ValidationError { field: String, reason: String },
    #[error("unknown product {0}")]
    UnknownProduct(ProductId),
    #[error("no fx rate for currency {0:?}")]
    MissingFxRate(String),
}

fn invalid(field: impl Into<String>, reason: impl fmt::Display) -> CatalogError {
    CatalogError::ValidationError { field: field.into(), reason: reason.to_string() }
}

/// Result of a catalog mutation: the new revision plus the governance
/// events the change implies, in (price, sla, tech, status) order.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogUpdate {
    pub revision: u64,
    pub events: Vec<GovernanceEventKind>,
}

/// Registry-wide settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogConfig {
    pub reference_currency: String,
    /// Latency at which a product scores a perfect 1.0.
    pub reference_latency_ms: f64,
    /// Security attributes counted toward the security score.
    pub recognized_security_attrs: BTreeSet<String>,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            reference_currency: "EUR".to_string(),
            reference_latency_ms: 100.0,
            recognized_security_attrs: BTreeSet::from([
                "encrypted-at-rest".to_string(),
                "daily-backup".to_string(),
            ]),
        }
    }
}

/// A product update request as stored in record files:
/// `{"productId": ..., "patch": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProductUpdateRecord {
    pub product_id: ProductId,
    pub patch: ProductPatch,
}

/// Persisted catalog document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogDocument {
    pub reference_currency: String,
    #[serde(default)]
    pub fx: BTreeMap<String, f64>,
    #[serde(default)]
    pub products: Vec<CloudProduct>,
    #[serde(default)]
    pub qos_reports: Vec<QosReport>,
}

/// The product registry. Single writer, many readers: all mutations go
/// through the broker's event loop, and decision code only ever sees
/// immutable borrows.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    config: CatalogConfig,
    fx: BTreeMap<String, f64>,
    products: BTreeMap<ProductId, CloudProduct>,
    qos: QosStore,
    revision: u64,
}

impl Catalog {
    pub fn new(config: CatalogConfig) -> Self {
        let mut fx = BTreeMap::new();
        fx.insert(config.reference_currency.clone(), 1.0);
        Catalog { config, fx, products: BTreeMap::new(), qos: QosStore::default(), revision: 0 }
    }

    pub fn config(&self) -> &CatalogConfig {
        &self.config
    }

    pub fn reference_currency(&self) -> &str {
        &self.config.reference_currency
    }

    pub fn fx(&self) -> &BTreeMap<String, f64> {
        &self.fx
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn set_fx_rate(&mut self, currency: impl Into<String>, rate_to_reference: f64) {
        self.fx.insert(currency.into(), rate_to_reference);
    }

    /// Registers a new product. Pricing units are converted to canonical
    /// units at intake. Emits a registration event for subscribers.
    pub fn register_product(&mut self, product: CloudProduct) -> Result<CatalogUpdate, CatalogError> {
        if self.products.contains_key(&product.product_id) {
            return Err(CatalogError::DuplicateProduct(product.product_id));
        }
        let mut product = product;
        validate_product(&product)?;
        normalize_pricing(&mut product.pricing);
        let event = GovernanceEventKind::ProductRegistered { product_id: product.product_id.clone() };
        self.products.insert(product.product_id.clone(), product);
        self.revision += 1;
        Ok(CatalogUpdate { revision: self.revision, events: vec![event] })
    }

    /// Applies a partial update and returns the typed events the change
    /// implies. A patch that changes nothing emits nothing.
    pub fn update_product(
        &mut self,
        product_id: &ProductId,
        patch: &ProductPatch,
    ) -> Result<CatalogUpdate, CatalogError> {
        let current = self
            .products
            .get(product_id)
            .ok_or_else(|| CatalogError::UnknownProduct(product_id.clone()))?;

        let mut updated = current.clone();
        let mut events = Vec::new();

        if let Some(pricing) = &patch.pricing {
            let mut pricing = pricing.clone();
            validate_pricing(&pricing)?;
            normalize_pricing(&mut pricing);
            if pricing.currency != current.pricing.currency {
                return Err(invalid(
                    "pricing.currency",
                    "currency changes require re-registration",
                ));
            }
            events.extend(price_events(product_id, &current.pricing, &pricing));
            updated.pricing = pricing;
        }
        if let Some(sla) = &patch.sla {
            validate_sla(sla)?;
            events.extend(sla_events(product_id, &current.sla, sla));
            updated.sla = sla.clone();
        }
        if let Some(tags) = &patch.tech_tags {
            if tags != &current.tech_tags {
                let added: Vec<String> = tags.difference(&current.tech_tags).cloned().collect();
                let removed: Vec<String> = current.tech_tags.difference(tags).cloned().collect();
                events.push(GovernanceEventKind::TechnologyChanged {
                    product_id: product_id.clone(),
                    added_tags: added,
                    removed_tags: removed,
                });
                updated.tech_tags = tags.clone();
            }
        }
        if let Some(status) = patch.status {
            if status != current.status {
                if status == ProductStatus::Active {
                    return Err(invalid("status", "withdrawn products cannot be reactivated"));
                }
                events.push(GovernanceEventKind::ProductWithdrawn { product_id: product_id.clone() });
                updated.status = status;
            }
        }

        if events.is_empty() {
            return Ok(CatalogUpdate { revision: self.revision, events });
        }
        self.products.insert(product_id.clone(), updated);
        self.revision += 1;
        Ok(CatalogUpdate { revision: self.revision, events })
    }

    pub fn product(&self, product_id: &ProductId) -> Option<&CloudProduct> {
        self.products.get(product_id)
    }

    pub fn contains(&self, product_id: &ProductId) -> bool {
        self.products.contains_key(product_id)
    }

    /// Every product (withdrawn included) in registry order: market volume
    /// rank ascending, standards count descending, product id ascending.
    pub fn list_products(&self) -> Vec<&CloudProduct> {
        let mut products: Vec<&CloudProduct> = self.products.values().collect();
        products.sort_by(|a, b| {
            a.market_volume_rank
                .cmp(&b.market_volume_rank)
                .then(b.standards.len().cmp(&a.standards.len()))
                .then(a.product_id.cmp(&b.product_id))
        });
        products
    }

    /// Candidate pool: active products only.
    pub fn active_products(&self) -> impl Iterator<Item = &CloudProduct> {
        self.products.values().filter(|p| p.is_active())
    }

    /// Folds a third-party report into the trust-weighted aggregate for
    /// its (product, metric) pair and returns the new aggregate.
    pub fn ingest_qos_report(&mut self, report: QosReport) -> Result<f64, CatalogError> {
        if !self.products.contains_key(&report.product_id) {
            return Err(CatalogError::UnknownProduct(report.product_id));
        }
        validate_qos_report(&report)?;
        Ok(self.qos.ingest(report))
    }

    /// Trust-weighted mean over the retained reports, if any exist.
    pub fn qos_aggregate(&self, product_id: &ProductId, metric: &MetricId) -> Option<f64> {
        self.qos.aggregate(product_id, metric)
    }

    /// Monthly cost of a plan in the reference currency, via this
    /// catalog's fx table.
    pub fn estimate_monthly_cost(
        &self,
        plan: &PricingPlan,
        workload: &WorkloadProfile,
    ) -> Result<f64, CatalogError> {
        estimate_monthly_cost(plan, workload, &self.fx)
    }

    /// Translates one product into comparable numbers for a workload.
    ///
    /// Performance is the reference latency divided by the product's
    /// aggregate latency, clamped to `[0, 1]`; products with no latency
    /// data score an optimistic 1.0 but are flagged unmeasured.
    /// Reliability maps the `[99%, 100%]` availability band linearly onto
    /// `[0, 1]`. Security is the recognized-attribute coverage ratio.
    pub fn normalize_offer(
        &self,
        product: &CloudProduct,
        workload: &WorkloadProfile,
    ) -> Result<NormalizedOffer, CatalogError> {
        let monthly_cost = self.estimate_monthly_cost(&product.pricing, workload)?;
        let latency = self.qos_aggregate(&product.product_id, &MetricId::from(LATENCY_METRIC));
        let (perf_score, unmeasured) = match latency {
            Some(observed) if observed > 0.0 => {
                ((self.config.reference_latency_ms / observed).clamp(0.0, 1.0), false)
            }
            Some(_) => (1.0, false),
            None => (1.0, true),
        };
        let reliability_score = (product.sla.availability_pct - 99.0).clamp(0.0, 1.0);
        let recognized = &self.config.recognized_security_attrs;
        let security_score = if recognized.is_empty() {
            1.0
        } else {
            product.sla.security_attrs.intersection(recognized).count() as f64 / recognized.len() as f64
        };
        Ok(NormalizedOffer {
            product_id: product.product_id.clone(),
            monthly_cost,
            perf_score,
            reliability_score,
            security_score,
            unmeasured,
        })
    }

    /// Rebuilds a catalog from its persisted document.
    pub fn from_document(document: CatalogDocument, config: CatalogConfig) -> Result<Self, CatalogError> {
        let mut config = config;
        config.reference_currency = document.reference_currency;
        let mut catalog = Catalog::new(config);
        for (currency, rate) in document.fx {
            if !rate.is_finite() || rate <= 0.0 {
                return Err(invalid("fx", format!("rate for {currency:?} must be positive")));
            }
            catalog.fx.insert(currency, rate);
        }
        catalog
            .fx
            .insert(catalog.config.reference_currency.clone(), 1.0);
        for product in document.products {
            catalog.register_product(product)?;
        }
        for report in document.qos_reports {
            catalog.ingest_qos_report(report)?;
        }
        catalog.revision = 0;
        Ok(catalog)
    }

    /// Serializes the registry (including retained QoS reports) back into
    /// its document form.
    pub fn to_document(&self) -> CatalogDocument {
        CatalogDocument {
            reference_currency: self.config.reference_currency.clone(),
            fx: self.fx.clone(),
            products: self.products.values().cloned().collect(),
            qos_reports: self.qos.retained_reports(),
        }
    }
}

/// `fx[plan.currency] × (fixed fee + Σ price × usage)`, with workload
/// metrics missing from the plan charged nothing (free tier assumption).
pub fn estimate_monthly_cost(
    plan: &PricingPlan,
    workload: &WorkloadProfile,
    fx: &BTreeMap<String, f64>,
) -> Result<f64, CatalogError> {
    let to_reference = fx
        .get(&plan.currency)
        .copied()
        .ok_or_else(|| CatalogError::MissingFxRate(plan.currency.clone()))?;
    let mut metered = 0.0;
    for rate in &plan.rates {
        let quantity = workload.usage.get(&rate.metric).copied().unwrap_or(0.0);
        metered += rate.price_per_unit * quantity;
    }
    for (metric, quantity) in &workload.usage {
        if *quantity > 0.0 && !plan.rates.iter().any(|r| &r.metric == metric) {
            log::warn!("workload metric {metric} has no rate in this plan; charging nothing");
        }
    }
    Ok(to_reference * (plan.fixed_fee_per_month + metered))
}

fn normalize_pricing(pricing: &mut PricingPlan) {
    for rate in &mut pricing.rates {
        if let Some((canonical, factor)) = units::normalize_unit(&rate.unit) {
            rate.unit = canonical.to_string();
            rate.price_per_unit *= factor;
        }
    }
}

fn validate_product(product: &CloudProduct) -> Result<(), CatalogError> {
    if product.product_id.as_str().is_empty() {
        return Err(invalid("productId", "must not be empty"));
    }
    if product.provider_id.is_empty() {
        return Err(invalid("providerId", "must not be empty"));
    }
    if product.market_volume_rank == 0 {
        return Err(invalid("marketVolumeRank", "must be a positive integer"));
    }
    if let Some(endpoint) = &product.endpoint {
        if Url::parse(endpoint).is_err() {
            return Err(invalid("endpoint", format!("{endpoint:?} is not an absolute URL")));
        }
    }
    validate_pricing(&product.pricing)?;
    validate_sla(&product.sla)?;
    Ok(())
}

fn validate_pricing(pricing: &PricingPlan) -> Result<(), CatalogError> {
    if pricing.currency.len() != 3 || !pricing.currency.chars().all(|c| c.is_ascii_uppercase()) {
        return Err(invalid("pricing.currency", "must be a three-letter ISO 4217 code"));
    }
    if !pricing.fixed_fee_per_month.is_finite() || pricing.fixed_fee_per_month < 0.0 {
        return Err(invalid("pricing.fixedFeePerMonth", "must be finite and non-negative"));
    }
    let mut metrics = BTreeSet::new();
    for rate in &pricing.rates {
        if !metrics.insert(&rate.metric) {
            return Err(invalid("pricing.rates", format!("duplicate metric {}", rate.metric)));
        }
        if !rate.price_per_unit.is_finite() || rate.price_per_unit < 0.0 {
            return Err(invalid(
                "pricing.rates",
                format!("price for {} must be finite and non-negative", rate.metric),
            ));
        }
        if units::normalize_unit(&rate.unit).is_none() {
            return Err(invalid("pricing.rates", format!("unknown unit {:?}", rate.unit)));
        }
    }
    Ok(())
}

fn validate_sla(sla: &SlaTerms) -> Result<(), CatalogError> {
    if !sla.availability_pct.is_finite() || !(0.0..=100.0).contains(&sla.availability_pct) {
        return Err(invalid("sla.availabilityPct", "must lie in [0, 100]"));
    }
    if !sla.response_time_ms_p95.is_finite() || sla.response_time_ms_p95 <= 0.0 {
        return Err(invalid("sla.responseTimeMsP95", "must be positive"));
    }
    Ok(())
}

fn validate_qos_report(report: &QosReport) -> Result<(), CatalogError> {
    if !report.trust_weight.is_finite() || report.trust_weight <= 0.0 || report.trust_weight > 1.0 {
        return Err(invalid("trustWeight", "must lie in (0, 1]"));
    }
    if !report.value.is_finite() {
        return Err(invalid("value", "must be finite"));
    }
    Ok(())
}

/// Per-metric price diffs, fixed fee first, then metrics in id order.
fn price_events(
    product_id: &ProductId,
    old: &PricingPlan,
    new: &PricingPlan,
) -> Vec<GovernanceEventKind> {
    let mut events = Vec::new();
    if old.fixed_fee_per_month != new.fixed_fee_per_month {
        events.push(GovernanceEventKind::PriceChanged {
            product_id: product_id.clone(),
            metric: MetricId::from(FIXED_FEE_METRIC),
            old: old.fixed_fee_per_month,
            new: new.fixed_fee_per_month,
        });
    }
    let old_rates: BTreeMap<&MetricId, f64> =
        old.rates.iter().map(|r| (&r.metric, r.price_per_unit)).collect();
    let new_rates: BTreeMap<&MetricId, f64> =
        new.rates.iter().map(|r| (&r.metric, r.price_per_unit)).collect();
    let metrics: BTreeSet<&MetricId> = old_rates.keys().chain(new_rates.keys()).copied().collect();
    for metric in metrics {
        let old_price = old_rates.get(metric).copied().unwrap_or(0.0);
        let new_price = new_rates.get(metric).copied().unwrap_or(0.0);
        if old_price != new_price {
            events.push(GovernanceEventKind::PriceChanged {
                product_id: product_id.clone(),
                metric: (*metric).clone(),
                old: old_price,
                new: new_price,
            });
        }
    }
    events
}

fn sla_events(product_id: &ProductId, old: &SlaTerms, new: &SlaTerms) -> Vec<GovernanceEventKind> {
    let mut events = Vec::new();
    let mut push = |field: &str, old: String, new: String| {
        events.push(GovernanceEventKind::SlaChanged {
            product_id: product_id.clone(),
            field: field.to_string(),
            old,
            new,
        });
    };
    if old.availability_pct != new.availability_pct {
        push("availabilityPct", old.availability_pct.to_string(), new.availability_pct.to_string());
    }
    if old.response_time_ms_p95 != new.response_time_ms_p95 {
        push(
            "responseTimeMsP95",
            old.response_time_ms_p95.to_string(),
            new.response_time_ms_p95.to_string(),
        );
    }
    if old.security_attrs != new.security_attrs {
        let join = |attrs: &BTreeSet<String>| attrs.iter().cloned().collect::<Vec<_>>().join(",");
        push("securityAttrs", join(&old.security_attrs), join(&new.security_attrs));
    }
    events
}

#[cfg(test)]
mod tests;
