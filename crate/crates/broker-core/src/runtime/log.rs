//! Line-delimited JSON event log and its post-hoc auditor.
//!
//! Every record is `{seq, ts, kind, payload}`. Sequence numbers are
//! strictly increasing across the broker's lifetime, replays are
//! byte-exact, and the auditor can re-check feasibility of every logged
//! plan from the initial catalog plus the logged events alone.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::CloudProduct;
use crate::decision::{DeploymentPlan, RedeployEvaluation};
use crate::event::{GovernanceEvent, GovernanceEventKind, ProductId, SimTimestamp};
use crate::model::ApplicationModel;

use super::enforce::ExecutionReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Event,
    Decision,
    Plan,
    Enforce,
    Alert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRecord {
    pub seq: u64,
    pub ts: SimTimestamp,
    pub kind: RecordKind,
    pub payload: serde_json::Value,
}

/// How a decision evaluation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DecisionOutcome {
    /// A new plan revision was installed and enforced.
    Redeployed,
    /// Re-deciding produced identical assignments; the plan was kept.
    NoOp,
    /// The trigger did not warrant redeployment.
    Declined,
}

/// Payload of a `decision` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecisionRecord {
    /// Sequence number of the record that triggered this evaluation, if
    /// any (timer-driven rechecks have none).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_seq: Option<u64>,
    pub trigger: String,
    pub outcome: DecisionOutcome,
    pub evaluation: RedeployEvaluation,
}

/// Payload of an `alert` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlertRecord {
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_seq: Option<u64>,
}

/// The complete record of one broker run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub records: Vec<LogRecord>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("invalid log line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("record payload does not match its kind: {0}")]
    Payload(serde_json::Error),
}

impl EventLog {
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("log records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<EventLog, LogError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record =
                serde_json::from_str(line).map_err(|source| LogError::Parse { line: i + 1, source })?;
            records.push(record);
        }
        Ok(EventLog { records })
    }

    pub fn events(&self) -> Result<Vec<GovernanceEvent>, LogError> {
        self.records
            .iter()
            .filter(|r| r.kind == RecordKind::Event)
            .map(|r| {
                let kind: GovernanceEventKind =
                    serde_json::from_value(r.payload.clone()).map_err(LogError::Payload)?;
                Ok(GovernanceEvent { seq: r.seq, timestamp: r.ts, kind })
            })
            .collect()
    }

    pub fn plans(&self) -> Result<Vec<DeploymentPlan>, LogError> {
        self.records
            .iter()
            .filter(|r| r.kind == RecordKind::Plan)
            .map(|r| serde_json::from_value(r.payload.clone()).map_err(LogError::Payload))
            .collect()
    }

    pub fn enforcements(&self) -> Result<Vec<ExecutionReport>, LogError> {
        self.records
            .iter()
            .filter(|r| r.kind == RecordKind::Enforce)
            .map(|r| serde_json::from_value(r.payload.clone()).map_err(LogError::Payload))
            .collect()
    }

    /// Replays the log: the plan revision a reader reconstructs from the
    /// record stream.
    pub fn replayed_final_revision(&self) -> Option<u64> {
        self.records
            .iter()
            .rev()
            .find(|r| r.kind == RecordKind::Plan)
            .and_then(|r| r.payload.get("revision"))
            .and_then(|v| v.as_u64())
    }

    pub fn seqs_strictly_increase(&self) -> bool {
        self.records.windows(2).all(|w| w[0].seq < w[1].seq)
    }
}

/// A feasibility breach found by the auditor.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("seq {seq}: component {component:?} on {product}: {reason}")]
pub struct AuditViolation {
    pub seq: u64,
    pub component: String,
    pub product: ProductId,
    pub reason: String,
}

/// Re-checks every plan in the log against catalog state reconstructed
/// from the initial products plus the logged technology and withdrawal
/// events: no assignment may ever lack a required tech tag or sit on a
/// withdrawn product.
pub fn audit_feasibility(
    initial_products: &[CloudProduct],
    app: &ApplicationModel,
    log: &EventLog,
) -> Result<(), Vec<AuditViolation>> {
    #[derive(Clone)]
    struct State {
        tags: BTreeSet<String>,
        active: bool,
    }
    let mut products: BTreeMap<ProductId, State> = initial_products
        .iter()
        .map(|p| {
            (p.product_id.clone(), State { tags: p.tech_tags.clone(), active: p.is_active() })
        })
        .collect();
    let required: BTreeMap<&str, &BTreeSet<String>> =
        app.components.iter().map(|c| (c.name.as_str(), &c.required_tech)).collect();

    let mut violations = Vec::new();
    for record in &log.records {
        match record.kind {
            RecordKind::Event => {
                let Ok(kind) = serde_json::from_value::<GovernanceEventKind>(record.payload.clone())
                else {
                    continue;
                };
                match kind {
                    GovernanceEventKind::TechnologyChanged { product_id, added_tags, removed_tags } => {
                        if let Some(state) = products.get_mut(&product_id) {
                            for tag in added_tags {
                                state.tags.insert(tag);
                            }
                            for tag in &removed_tags {
                                state.tags.remove(tag);
                            }
                        }
                    }
                    GovernanceEventKind::ProductWithdrawn { product_id } => {
                        if let Some(state) = products.get_mut(&product_id) {
                            state.active = false;
                        }
                    }
                    _ => {}
                }
            }
            RecordKind::Plan => {
                let Ok(plan) = serde_json::from_value::<DeploymentPlan>(record.payload.clone()) else {
                    continue;
                };
                for assignment in &plan.assignments {
                    let product = &assignment.product_id;
                    let component = assignment.component_name.as_str();
                    let Some(state) = products.get(product) else {
                        violations.push(AuditViolation {
                            seq: record.seq,
                            component: component.to_string(),
                            product: product.clone(),
                            reason: "product unknown to the auditor".to_string(),
                        });
                        continue;
                    };
                    if !state.active {
                        violations.push(AuditViolation {
                            seq: record.seq,
                            component: component.to_string(),
                            product: product.clone(),
                            reason: "product was withdrawn".to_string(),
                        });
                    }
                    match required.get(component) {
                        Some(tech) => {
                            let missing: Vec<&String> =
                                tech.iter().filter(|t| !state.tags.contains(*t)).collect();
                            if !missing.is_empty() {
                                violations.push(AuditViolation {
                                    seq: record.seq,
                                    component: component.to_string(),
                                    product: product.clone(),
                                    reason: format!("missing required tech tags {missing:?}"),
                                });
                            }
                        }
                        None => violations.push(AuditViolation {
                            seq: record.seq,
                            component: component.to_string(),
                            product: product.clone(),
                            reason: "component not part of the application".to_string(),
                        }),
                    }
                }
            }
            _ => {}
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
