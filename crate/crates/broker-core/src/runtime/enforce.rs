//! Enforcement point: executes plan diffs through provider adapters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{DeploymentPlan, PlanDiff};
use crate::event::ProductId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("component {0:?} is already deployed here")]
    AlreadyDeployed(String),
    #[error("component {0:?} is not deployed here")]
    NotDeployed(String),
    #[error("injected deployment failure")]
    InjectedFailure,
}

/// What the enforcement point needs from a cloud provider.
pub trait ProviderAdapter {
    /// Starts deploying a component. Providers may finish asynchronously;
    /// `is_deployed` reports completion.
    fn deploy(&mut self, component: &str, params: &BTreeMap<String, String>)
        -> Result<(), AdapterError>;

    /// Removes a component, whether its deployment completed or is still
    /// in progress.
    fn undeploy(&mut self, component: &str) -> Result<(), AdapterError>;

    /// Reinstates a deployment this provider held moments ago. Rollback
    /// only; the contract is that reinstatement cannot fail.
    fn restore(&mut self, component: &str);

    fn is_deployed(&self, component: &str) -> bool;

    fn deployed_components(&self) -> BTreeSet<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Deploy,
    Undeploy,
    Noop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionOutcome {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionAction {
    pub component_name: String,
    pub action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_id: Option<ProductId>,
    pub outcome: ActionOutcome,
}

/// The trace of one enforcement run. `rolled_back = true` guarantees the
/// adapters and the active plan are exactly as before the call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutionReport {
    pub plan_revision: u64,
    pub actions: Vec<ExecutionAction>,
    pub rolled_back: bool,
}

/// A move whose target deployment has not completed yet; the source stays
/// up until it does.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InFlightMove {
    pub component_name: String,
    pub from_product_id: ProductId,
    pub to_product_id: ProductId,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnforceError {
    #[error("no adapter for product {0}")]
    MissingAdapter(ProductId),
}

struct ExecutedMove {
    component: String,
    from: Option<ProductId>,
    to: Option<ProductId>,
    source_undeployed: bool,
}

/// Executes a diff move by move: deploy on the target, then undeploy the
/// source (make-before-break). When a target provider completes
/// asynchronously the source undeploy is deferred and returned as an
/// in-flight move. On any failure, previously executed moves are reverted
/// in reverse order and the report says `rolled_back`.
pub fn enforce<A: ProviderAdapter>(
    diff: &PlanDiff,
    new_plan: &DeploymentPlan,
    adapters: &mut BTreeMap<ProductId, A>,
) -> Result<(ExecutionReport, Vec<InFlightMove>), EnforceError> {
    for mv in &diff.moves {
        for product in [&mv.from_product_id, &mv.to_product_id].into_iter().flatten() {
            if !adapters.contains_key(product) {
                return Err(EnforceError::MissingAdapter(product.clone()));
            }
        }
    }

    let mut actions: Vec<ExecutionAction> = diff
        .unchanged
        .iter()
        .map(|component| ExecutionAction {
            component_name: component.clone(),
            action: ActionKind::Noop,
            product_id: new_plan.assignment(component).map(|a| a.product_id.clone()),
            outcome: ActionOutcome::Ok,
        })
        .collect();

    let mut executed: Vec<ExecutedMove> = Vec::new();
    let mut in_flight: Vec<InFlightMove> = Vec::new();
    let empty_params = BTreeMap::new();

    for mv in &diff.moves {
        let component = mv.component_name.as_str();
        let params = new_plan
            .assignment(component)
            .map(|a| &a.config_params)
            .unwrap_or(&empty_params);

        if let Some(to) = &mv.to_product_id {
            let adapter = adapters.get_mut(to).expect("adapter presence checked");
            if let Err(err) = adapter.deploy(component, params) {
                log::warn!("deploy of {component} on {to} failed: {err}; rolling back");
                actions.push(ExecutionAction {
                    component_name: component.to_string(),
                    action: ActionKind::Deploy,
                    product_id: Some(to.clone()),
                    outcome: ActionOutcome::Failed,
                });
                rollback(&executed, adapters);
                return Ok((
                    ExecutionReport { plan_revision: new_plan.revision, actions, rolled_back: true },
                    Vec::new(),
                ));
            }
            actions.push(ExecutionAction {
                component_name: component.to_string(),
                action: ActionKind::Deploy,
                product_id: Some(to.clone()),
                outcome: ActionOutcome::Ok,
            });
        }

        let mut source_undeployed = false;
        if let Some(from) = &mv.from_product_id {
            let target_ready = match &mv.to_product_id {
                Some(to) => adapters.get(to).expect("checked").is_deployed(component),
                None => true,
            };
            if target_ready {
                let adapter = adapters.get_mut(from).expect("adapter presence checked");
                if let Err(err) = adapter.undeploy(component) {
                    log::warn!("undeploy of {component} on {from} failed: {err}; rolling back");
                    actions.push(ExecutionAction {
                        component_name: component.to_string(),
                        action: ActionKind::Undeploy,
                        product_id: Some(from.clone()),
                        outcome: ActionOutcome::Failed,
                    });
                    // The target deploy of this move succeeded; take it down
                    // again before unwinding the earlier moves.
                    if let Some(to) = &mv.to_product_id {
                        let _ = adapters.get_mut(to).expect("checked").undeploy(component);
                    }
                    rollback(&executed, adapters);
                    return Ok((
                        ExecutionReport {
                            plan_revision: new_plan.revision,
                            actions,
                            rolled_back: true,
                        },
                        Vec::new(),
                    ));
                }
                source_undeployed = true;
            } else {
                in_flight.push(InFlightMove {
                    component_name: component.to_string(),
                    from_product_id: from.clone(),
                    to_product_id: mv.to_product_id.clone().expect("deferred implies a target"),
                });
            }
            actions.push(ExecutionAction {
                component_name: component.to_string(),
                action: ActionKind::Undeploy,
                product_id: Some(from.clone()),
                outcome: ActionOutcome::Ok,
            });
        }

        executed.push(ExecutedMove {
            component: component.to_string(),
            from: mv.from_product_id.clone(),
            to: mv.to_product_id.clone(),
            source_undeployed,
        });
    }

    Ok((
        ExecutionReport { plan_revision: new_plan.revision, actions, rolled_back: false },
        in_flight,
    ))
}

fn rollback<A: ProviderAdapter>(executed: &[ExecutedMove], adapters: &mut BTreeMap<ProductId, A>) {
    for mv in executed.iter().rev() {
        if let Some(to) = &mv.to {
            let _ = adapters.get_mut(to).expect("adapter presence checked").undeploy(&mv.component);
        }
        if mv.source_undeployed {
            if let Some(from) = &mv.from {
                adapters.get_mut(from).expect("adapter presence checked").restore(&mv.component);
            }
        }
    }
}
