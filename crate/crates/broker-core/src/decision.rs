//! The decision point.
//!
//! Filters feasible products per component, ranks them per option category
//! under the governance policy, and emits revisioned deployment plans.
//! Everything here is a pure function over immutable snapshots; only the
//! governance loop calls it in sequence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError, CloudProduct, NormalizedOffer, WorkloadProfile};
use crate::event::{GovernanceEventKind, ProductId, SimTimestamp};
use crate::manifest::{resolve_bindings, DeploymentManifest, DeploymentOption, Lifecycle, ResolveError};
use crate::model::{ApplicationModel, Component};

/// The option categories a policy can set thresholds for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum OptionCategory {
    Economy,
    BestEffort,
    PrivateCloud,
}

impl DeploymentOption {
    pub fn category(&self) -> OptionCategory {
        match self {
            DeploymentOption::Economy => OptionCategory::Economy,
            DeploymentOption::BestEffort => OptionCategory::BestEffort,
            DeploymentOption::PrivateCloud { .. } => OptionCategory::PrivateCloud,
        }
    }
}

/// Minimum normalized scores an offer must reach to stay a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QosThresholds {
    #[serde(default)]
    pub min_reliability: f64,
    #[serde(default)]
    pub min_security: f64,
    #[serde(default)]
    pub min_perf: f64,
}

impl Default for QosThresholds {
    fn default() -> Self {
        QosThresholds { min_reliability: 0.0, min_security: 0.0, min_perf: 0.0 }
    }
}

impl QosThresholds {
    pub fn accepts(&self, offer: &NormalizedOffer) -> bool {
        offer.reliability_score >= self.min_reliability
            && offer.security_score >= self.min_security
            && offer.perf_score >= self.min_perf
    }
}

/// Governance policy driving ranking and redeploy decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GovernancePolicy {
    /// Cost weight in the bestEffort score; `w_cost + w_perf = 1`.
    pub w_cost: f64,
    pub w_perf: f64,
    pub min_qos: BTreeMap<OptionCategory, QosThresholds>,
    /// Total-plan cost improvement (percent) required to redeploy.
    pub redeploy_cost_delta_pct: f64,
    /// Minimum simulated seconds between non-forced redeployments.
    pub hysteresis_window: u64,
    pub exclude_unmeasured_from_best_effort: bool,
}

impl Default for GovernancePolicy {
    fn default() -> Self {
        GovernancePolicy {
            w_cost: 0.5,
            w_perf: 0.5,
            min_qos: BTreeMap::new(),
            redeploy_cost_delta_pct: 5.0,
            hysteresis_window: 3600,
            exclude_unmeasured_from_best_effort: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("wCost ({w_cost}) and wPerf ({w_perf}) must sum to exactly 1")]
    WeightsNotNormalized { w_cost: f64, w_perf: f64 },
    #[error("redeployCostDeltaPct must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("threshold {0} must lie in [0, 1]")]
    ThresholdOutOfRange(f64),
}

impl GovernancePolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.w_cost + self.w_perf != 1.0 || !(0.0..=1.0).contains(&self.w_cost) {
            return Err(PolicyError::WeightsNotNormalized { w_cost: self.w_cost, w_perf: self.w_perf });
        }
        if !self.redeploy_cost_delta_pct.is_finite() || self.redeploy_cost_delta_pct <= 0.0 {
            return Err(PolicyError::NonPositiveDelta(self.redeploy_cost_delta_pct));
        }
        for thresholds in self.min_qos.values() {
            for value in [thresholds.min_reliability, thresholds.min_security, thresholds.min_perf] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(PolicyError::ThresholdOutOfRange(value));
                }
            }
        }
        Ok(())
    }

    pub fn thresholds(&self, category: OptionCategory) -> QosThresholds {
        self.min_qos.get(&category).copied().unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyLoadError> {
        let policy: GovernancePolicy = serde_json::from_str(text)?;
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Error)]
pub enum PolicyLoadError {
    #[error("invalid policy JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] PolicyError),
}

/// One component's placement in a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assignment {
    pub component_name: String,
    pub product_id: ProductId,
    pub config_params: BTreeMap<String, String>,
}

/// A revisioned mapping of application components to products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeploymentPlan {
    pub plan_id: String,
    pub app_id: String,
    pub revision: u64,
    pub assignments: Vec<Assignment>,
    pub created_at: SimTimestamp,
}

impl DeploymentPlan {
    pub fn assignment(&self, component_name: &str) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.component_name == component_name)
    }

    pub fn assigns_product(&self, product_id: &ProductId) -> bool {
        self.assignments.iter().any(|a| &a.product_id == product_id)
    }

    pub fn assignment_map(&self) -> BTreeMap<&str, &ProductId> {
        self.assignments.iter().map(|a| (a.component_name.as_str(), &a.product_id)).collect()
    }
}

/// One component moving between products.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanMove {
    pub component_name: String,
    pub from_product_id: Option<ProductId>,
    pub to_product_id: Option<ProductId>,
}

/// The difference between two plan revisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanDiff {
    pub moves: Vec<PlanMove>,
    pub unchanged: Vec<String>,
}

impl PlanDiff {
    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionError {
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("no feasible candidate after threshold filtering")]
    NoCandidates,
    #[error("no feasible product for component {component:?} under option {option}")]
    NoFeasibleProduct { component: String, option: DeploymentOption },
    #[error("plans belong to different applications: {0:?} vs {1:?}")]
    AppMismatch(String, String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// Whether a product can host a component under an option.
///
/// The product must be active and carry every technology tag the component
/// requires. A privateCloud option additionally pins the product to the
/// declared (endpoint, cloud type, provider) triple.
pub fn feasible(component: &Component, option: &DeploymentOption, product: &CloudProduct) -> bool {
    if !product.is_active() {
        return false;
    }
    if !component.required_tech.is_subset(&product.tech_tags) {
        return false;
    }
    match option {
        DeploymentOption::PrivateCloud { endpoint, cloud_type, provider_id } => {
            product.endpoint.as_deref() == Some(endpoint.as_str())
                && product.cloud_type == *cloud_type
                && product.provider_id == *provider_id
        }
        _ => true,
    }
}

/// Economy ranking: drop offers under the economy thresholds, then sort by
/// monthly cost ascending, performance descending, product id ascending.
pub fn rank_economy(
    candidates: &[NormalizedOffer],
    policy: &GovernancePolicy,
) -> Result<Vec<NormalizedOffer>, DecisionError> {
    let thresholds = policy.thresholds(OptionCategory::Economy);
    let mut offers: Vec<NormalizedOffer> =
        candidates.iter().filter(|o| thresholds.accepts(o)).cloned().collect();
    if offers.is_empty() {
        return Err(DecisionError::NoCandidates);
    }
    offers.sort_by(|a, b| {
        a.monthly_cost
            .total_cmp(&b.monthly_cost)
            .then(b.perf_score.total_cmp(&a.perf_score))
            .then(a.product_id.cmp(&b.product_id))
    });
    Ok(offers)
}

/// A bestEffort candidate with its composite score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoredOffer {
    #[serde(flatten)]
    pub offer: NormalizedOffer,
    pub score: f64,
}

/// BestEffort ranking: min-max normalize cost over the surviving
/// candidates and score `wCost·(1 − costNorm) + wPerf·perf`; sort by score
/// descending, cost ascending, product id ascending.
pub fn rank_best_effort(
    candidates: &[NormalizedOffer],
    policy: &GovernancePolicy,
) -> Result<Vec<ScoredOffer>, DecisionError> {
    let thresholds = policy.thresholds(OptionCategory::BestEffort);
    let survivors: Vec<&NormalizedOffer> = candidates
        .iter()
        .filter(|o| thresholds.accepts(o))
        .filter(|o| !(policy.exclude_unmeasured_from_best_effort && o.unmeasured))
        .collect();
    if survivors.is_empty() {
        return Err(DecisionError::NoCandidates);
    }
    let min_cost = survivors.iter().map(|o| o.monthly_cost).fold(f64::INFINITY, f64::min);
    let max_cost = survivors.iter().map(|o| o.monthly_cost).fold(f64::NEG_INFINITY, f64::max);
    let cost_norm = |cost: f64| {
        if max_cost > min_cost {
            (cost - min_cost) / (max_cost - min_cost)
        } else {
            0.0
        }
    };
    let mut scored: Vec<ScoredOffer> = survivors
        .into_iter()
        .map(|offer| ScoredOffer {
            score: policy.w_cost * (1.0 - cost_norm(offer.monthly_cost)) + policy.w_perf * offer.perf_score,
            offer: offer.clone(),
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.offer.monthly_cost.total_cmp(&b.offer.monthly_cost))
            .then(a.offer.product_id.cmp(&b.offer.product_id))
    });
    Ok(scored)
}

fn config_params(product: &CloudProduct) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("endpoint".to_string(), product.endpoint.clone().unwrap_or_default()),
        ("cloudType".to_string(), product.cloud_type.keyword().to_string()),
        ("providerId".to_string(), product.provider_id.clone()),
    ])
}

/// Picks the product for one component under its resolved option.
pub fn select_product<'a>(
    component: &Component,
    option: &DeploymentOption,
    catalog: &'a Catalog,
    policy: &GovernancePolicy,
    workload: &WorkloadProfile,
) -> Result<&'a CloudProduct, DecisionError> {
    let candidates: Vec<&CloudProduct> =
        catalog.active_products().filter(|p| feasible(component, option, p)).collect();
    let no_feasible = || DecisionError::NoFeasibleProduct {
        component: component.name.clone(),
        option: option.clone(),
    };
    if candidates.is_empty() {
        return Err(no_feasible());
    }
    let chosen_id = match option {
        // Pinned: the matching product, by id if several share the triple.
        DeploymentOption::PrivateCloud { .. } => candidates
            .iter()
            .map(|p| p.product_id.clone())
            .min()
            .expect("candidates is non-empty"),
        DeploymentOption::Economy => {
            let offers = normalize_all(&candidates, catalog, workload)?;
            match rank_economy(&offers, policy) {
                Ok(ranked) => ranked[0].product_id.clone(),
                Err(DecisionError::NoCandidates) => return Err(no_feasible()),
                Err(other) => return Err(other),
            }
        }
        DeploymentOption::BestEffort => {
            let offers = normalize_all(&candidates, catalog, workload)?;
            match rank_best_effort(&offers, policy) {
                Ok(ranked) => ranked[0].offer.product_id.clone(),
                Err(DecisionError::NoCandidates) => return Err(no_feasible()),
                Err(other) => return Err(other),
            }
        }
    };
    Ok(catalog.product(&chosen_id).expect("chosen product exists"))
}

fn normalize_all(
    candidates: &[&CloudProduct],
    catalog: &Catalog,
    workload: &WorkloadProfile,
) -> Result<Vec<NormalizedOffer>, DecisionError> {
    candidates
        .iter()
        .map(|p| catalog.normalize_offer(p, workload).map_err(DecisionError::from))
        .collect()
}

/// Produces the next plan revision: every component assigned to the head
/// of its option's ranking over feasible products. All or nothing: one
/// unplaceable component fails the whole decision.
pub fn decide(
    manifest: &DeploymentManifest,
    app: &ApplicationModel,
    catalog: &Catalog,
    policy: &GovernancePolicy,
    workload: &WorkloadProfile,
    previous_revision: u64,
    now: SimTimestamp,
) -> Result<DeploymentPlan, DecisionError> {
    let options = resolve_bindings(manifest, app)?;
    let mut assignments = Vec::with_capacity(app.components.len());
    for component in &app.components {
        let option = &options[&component.name];
        let product = select_product(component, option, catalog, policy, workload)?;
        assignments.push(Assignment {
            component_name: component.name.clone(),
            product_id: product.product_id.clone(),
            config_params: config_params(product),
        });
    }
    let revision = previous_revision + 1;
    Ok(DeploymentPlan {
        plan_id: format!("{}-r{}", app.app_id, revision),
        app_id: app.app_id.clone(),
        revision,
        assignments,
        created_at: now,
    })
}

/// Components whose product changed between two revisions of the same
/// application's plan, plus the ones that stayed put.
pub fn diff(old: &DeploymentPlan, new: &DeploymentPlan) -> Result<PlanDiff, DecisionError> {
    if old.app_id != new.app_id {
        return Err(DecisionError::AppMismatch(old.app_id.clone(), new.app_id.clone()));
    }
    let old_map = old.assignment_map();
    let new_map = new.assignment_map();
    let mut names: Vec<&str> = old_map.keys().chain(new_map.keys()).copied().collect();
    names.sort_unstable();
    names.dedup();

    let mut moves = Vec::new();
    let mut unchanged = Vec::new();
    for name in names {
        let from = old_map.get(name).copied();
        let to = new_map.get(name).copied();
        if from == to {
            unchanged.push(name.to_string());
        } else {
            moves.push(PlanMove {
                component_name: name.to_string(),
                from_product_id: from.cloned(),
                to_product_id: to.cloned(),
            });
        }
    }
    Ok(PlanDiff { moves, unchanged })
}

/// Total monthly cost of a plan at current catalog prices.
pub fn total_plan_cost(
    plan: &DeploymentPlan,
    catalog: &Catalog,
    workload: &WorkloadProfile,
) -> Result<f64, DecisionError> {
    let mut total = 0.0;
    for assignment in &plan.assignments {
        let product = catalog
            .product(&assignment.product_id)
            .ok_or_else(|| CatalogError::UnknownProduct(assignment.product_id.clone()))?;
        total += catalog.estimate_monthly_cost(&product.pricing, workload)?;
    }
    Ok(total)
}

/// The outcome of evaluating an event against the current plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RedeployEvaluation {
    pub redeploy: bool,
    /// A withdrawal or technology change hit an assigned product; forced
    /// moves ignore the hysteresis window.
    pub forced: bool,
    /// The trigger fired but the hysteresis window suppressed it.
    pub blocked_by_hysteresis: bool,
    /// Re-deciding found no feasible plan.
    pub infeasible: bool,
    pub reason: String,
    pub current_cost: f64,
    pub candidate_cost: f64,
    pub improvement_pct: f64,
    #[serde(skip)]
    pub candidate: Option<DeploymentPlan>,
}

/// Decides whether an event warrants redeployment.
///
/// Redeploy when re-deciding improves total monthly cost by more than the
/// policy delta, when a withdrawal or technology change hits an assigned
/// product (forced), or when a QoS violation concerns an assigned
/// component. Unless forced, triggers only fire outside the hysteresis window.
/// Passive lifecycles never redeploy.
#[allow(clippy::too_many_arguments)]
pub fn should_redeploy(
    event: &GovernanceEventKind,
    current: &DeploymentPlan,
    manifest: &DeploymentManifest,
    app: &ApplicationModel,
    catalog: &Catalog,
    policy: &GovernancePolicy,
    workload: &WorkloadProfile,
    last_redeploy_at: SimTimestamp,
    now: SimTimestamp,
) -> RedeployEvaluation {
    let mut evaluation = RedeployEvaluation {
        redeploy: false,
        forced: false,
        blocked_by_hysteresis: false,
        infeasible: false,
        reason: String::new(),
        current_cost: 0.0,
        candidate_cost: 0.0,
        improvement_pct: 0.0,
        candidate: None,
    };

    if manifest.lifecycle == Lifecycle::Passive {
        evaluation.reason = "passive lifecycle only records events".to_string();
        return evaluation;
    }

    let forced = match event {
        GovernanceEventKind::ProductWithdrawn { product_id }
        | GovernanceEventKind::TechnologyChanged { product_id, .. } => {
            current.assigns_product(product_id)
        }
        _ => false,
    };
    let qos_trigger = match event {
        GovernanceEventKind::QosViolation { product_id, component_name, .. } => current
            .assignment(component_name)
            .is_some_and(|a| &a.product_id == product_id),
        _ => false,
    };

    evaluation.forced = forced;
    evaluation.current_cost = total_plan_cost(current, catalog, workload).unwrap_or(f64::NAN);

    match decide(manifest, app, catalog, policy, workload, current.revision, current.created_at) {
        Ok(candidate) => {
            evaluation.candidate_cost =
                total_plan_cost(&candidate, catalog, workload).unwrap_or(f64::NAN);
            evaluation.improvement_pct = if evaluation.current_cost > 0.0 {
                (evaluation.current_cost - evaluation.candidate_cost) / evaluation.current_cost * 100.0
            } else {
                0.0
            };
            evaluation.candidate = Some(candidate);
        }
        Err(err) => {
            evaluation.infeasible = true;
            evaluation.reason = format!("re-decision failed: {err}");
            return evaluation;
        }
    }

    let cost_trigger = evaluation.improvement_pct > policy.redeploy_cost_delta_pct;
    let triggered = cost_trigger || forced || qos_trigger;
    let hysteresis_ok = now.saturating_sub(last_redeploy_at) >= policy.hysteresis_window;

    if !triggered {
        evaluation.reason = format!(
            "cost improvement {:.2}% does not exceed the {:.2}% threshold",
            evaluation.improvement_pct, policy.redeploy_cost_delta_pct
        );
        return evaluation;
    }
    if !forced && !hysteresis_ok {
        evaluation.blocked_by_hysteresis = true;
        evaluation.reason = format!(
            "trigger suppressed by hysteresis ({}s since last redeploy, window {}s)",
            now.saturating_sub(last_redeploy_at),
            policy.hysteresis_window
        );
        return evaluation;
    }

    evaluation.redeploy = true;
    evaluation.reason = if forced {
        format!("forced move: {} on an assigned product", event.label())
    } else if cost_trigger {
        format!(
            "cost improvement {:.2}% exceeds the {:.2}% threshold",
            evaluation.improvement_pct, policy.redeploy_cost_delta_pct
        )
    } else {
        format!("{} on an assigned component", event.label())
    };
    evaluation
}
