//! The governance loop: monitor point, decision point, and enforcement
//! point wired together over a single ordered event stream.
//!
//! All mutation flows through [`Broker`] methods, one event at a time;
//! every state change leaves a record in the event log. In active
//! lifecycle mode the broker re-decides on relevant change; in passive
//! mode it only records until an explicit replan command.

mod enforce;
mod log;
mod monitor;

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::catalog::{Catalog, CatalogError, ProductPatch, QosReport};
use crate::decision::{
    decide, diff, should_redeploy, DecisionError, DeploymentPlan, GovernancePolicy, PlanDiff,
    PlanMove, RedeployEvaluation,
};
use crate::event::{GovernanceEventKind, MonitorSample, ProductId, SimTimestamp};
use crate::manifest::{DeploymentManifest, Lifecycle};
use crate::model::ApplicationModel;
use crate::catalog::WorkloadProfile;

pub use enforce::{
    enforce, ActionKind, ActionOutcome, AdapterError, EnforceError, ExecutionAction,
    ExecutionReport, InFlightMove, ProviderAdapter,
};
pub use log::{
    audit_feasibility, AlertRecord, AuditViolation, DecisionOutcome, DecisionRecord, EventLog,
    LogError, LogRecord, RecordKind,
};
pub use monitor::{nearest_rank_p95, CorrelationRecord, Monitor, MonitorError, CORRELATION_WINDOW};

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Enforce(#[from] EnforceError),
    #[error("initial enforcement failed and was rolled back")]
    InitialEnforcementFailed,
}

/// The broker's live state for one governed application.
#[derive(Debug)]
pub struct Broker {
    manifest: DeploymentManifest,
    app: ApplicationModel,
    policy: GovernancePolicy,
    workload: WorkloadProfile,
    catalog: Catalog,
    monitor: Monitor,
    plan: DeploymentPlan,
    last_redeploy_at: SimTimestamp,
    /// A cost improvement was suppressed by hysteresis; re-check once the
    /// window expires.
    pending_recheck: bool,
    in_flight: Vec<InFlightMove>,
    next_seq: u64,
    records: Vec<LogRecord>,
}

impl Broker {
    /// Takes the initial deployment decision and enforces it, logging the
    /// decision, plan, and enforcement records.
    pub fn bootstrap<A: ProviderAdapter>(
        manifest: DeploymentManifest,
        app: ApplicationModel,
        policy: GovernancePolicy,
        workload: WorkloadProfile,
        catalog: Catalog,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) -> Result<Broker, BrokerError> {
        let plan = decide(&manifest, &app, &catalog, &policy, &workload, 0, now)?;
        let mut broker = Broker {
            manifest,
            app,
            policy,
            workload,
            catalog,
            monitor: Monitor::default(),
            plan: plan.clone(),
            last_redeploy_at: now,
            pending_recheck: false,
            in_flight: Vec::new(),
            next_seq: 0,
            records: Vec::new(),
        };
        broker.log_decision(
            None,
            "bootstrap",
            DecisionOutcome::Redeployed,
            RedeployEvaluation {
                redeploy: true,
                forced: false,
                blocked_by_hysteresis: false,
                infeasible: false,
                reason: "initial deployment".to_string(),
                current_cost: 0.0,
                candidate_cost: broker.total_cost(&plan),
                improvement_pct: 0.0,
                candidate: None,
            },
            now,
        );
        let initial_diff = PlanDiff {
            moves: plan
                .assignments
                .iter()
                .map(|a| PlanMove {
                    component_name: a.component_name.clone(),
                    from_product_id: None,
                    to_product_id: Some(a.product_id.clone()),
                })
                .collect(),
            unchanged: Vec::new(),
        };
        broker.log_plan(now);
        let (report, in_flight) = enforce(&initial_diff, &broker.plan, adapters)?;
        let rolled_back = report.rolled_back;
        broker.log_record(RecordKind::Enforce, serde_json::to_value(&report).expect("report"), now);
        if rolled_back {
            return Err(BrokerError::InitialEnforcementFailed);
        }
        broker.in_flight = in_flight;
        Ok(broker)
    }

    pub fn plan(&self) -> &DeploymentPlan {
        &self.plan
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn lifecycle(&self) -> Lifecycle {
        self.manifest.lifecycle
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn event_log(&self) -> EventLog {
        EventLog { records: self.records.clone() }
    }

    pub fn in_flight(&self) -> &[InFlightMove] {
        &self.in_flight
    }

    pub fn last_redeploy_at(&self) -> SimTimestamp {
        self.last_redeploy_at
    }

    /// SLO bounds per component, derived from each assigned product's SLA
    /// response-time terms.
    pub fn slo_bounds(&self) -> BTreeMap<String, f64> {
        self.plan
            .assignments
            .iter()
            .filter_map(|a| {
                let product = self.catalog.product(&a.product_id)?;
                Some((a.component_name.clone(), product.sla.response_time_ms_p95))
            })
            .collect()
    }

    /// What a fresh decision over the current catalog would produce,
    /// aligned to the active plan's revision for direct comparison.
    pub fn quiescent_plan(&self) -> Result<DeploymentPlan, DecisionError> {
        decide(
            &self.manifest,
            &self.app,
            &self.catalog,
            &self.policy,
            &self.workload,
            self.plan.revision - 1,
            self.plan.created_at,
        )
    }

    /// Applies a product patch to the catalog and runs every implied event
    /// through the governance step.
    pub fn apply_catalog_update<A: ProviderAdapter>(
        &mut self,
        product_id: &ProductId,
        patch: &ProductPatch,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) -> Result<(), BrokerError> {
        let update = self.catalog.update_product(product_id, patch)?;
        for kind in update.events {
            self.governance_step(kind, adapters, now)?;
        }
        Ok(())
    }

    /// Ingests a third-party QoS report (reference data only; no
    /// governance evaluation is triggered).
    pub fn ingest_qos_report(&mut self, report: QosReport) -> Result<f64, BrokerError> {
        Ok(self.catalog.ingest_qos_report(report)?)
    }

    /// Feeds a monitoring batch through the governance step.
    pub fn ingest_samples<A: ProviderAdapter>(
        &mut self,
        samples: Vec<MonitorSample>,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) -> Result<(), BrokerError> {
        self.governance_step(GovernanceEventKind::MetricSamples { samples }, adapters, now)
    }

    /// One turn of the loop: record the event, apply it to the monitor,
    /// and, in active mode, redeploy if the decision point says so.
    /// Violations surfaced by the monitor run through the same loop before
    /// this call returns.
    pub fn governance_step<A: ProviderAdapter>(
        &mut self,
        kind: GovernanceEventKind,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) -> Result<(), BrokerError> {
        let mut queue = VecDeque::from([kind]);
        while let Some(kind) = queue.pop_front() {
            let seq = self.log_record(
                RecordKind::Event,
                serde_json::to_value(&kind).expect("events serialize"),
                now,
            );
            if let GovernanceEventKind::MetricSamples { samples } = &kind {
                let slos = self.slo_bounds();
                let violations = self.monitor.ingest(samples, &slos, &self.plan)?;
                queue.extend(violations);
                // The batch itself is filtered out; only violations reach
                // the decision point.
                continue;
            }
            self.evaluate_event(&kind, seq, adapters, now)?;
        }
        Ok(())
    }

    /// Explicit replan command: bypasses triggers and hysteresis. This is
    /// the one path that changes a passive broker's plan.
    pub fn replan<A: ProviderAdapter>(
        &mut self,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) -> Result<(), BrokerError> {
        match decide(&self.manifest, &self.app, &self.catalog, &self.policy, &self.workload, self.plan.revision, now)
        {
            Ok(candidate) => {
                let evaluation = RedeployEvaluation {
                    redeploy: true,
                    forced: true,
                    blocked_by_hysteresis: false,
                    infeasible: false,
                    reason: "explicit replan command".to_string(),
                    current_cost: self.total_cost(&self.plan),
                    candidate_cost: self.total_cost(&candidate),
                    improvement_pct: 0.0,
                    candidate: None,
                };
                self.install(candidate, None, "replanCommand", evaluation, adapters, now)
            }
            Err(err) => {
                self.log_alert(format!("replan failed: {err}"), None, now);
                Ok(())
            }
        }
    }

    /// Clock hook: completes in-flight moves whose targets finished
    /// deploying and re-checks a hysteresis-suppressed improvement once
    /// the window has expired.
    pub fn on_tick<A: ProviderAdapter>(
        &mut self,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) -> Result<(), BrokerError> {
        self.complete_in_flight(adapters, now);

        if self.pending_recheck
            && now.saturating_sub(self.last_redeploy_at) >= self.policy.hysteresis_window
        {
            self.pending_recheck = false;
            match decide(&self.manifest, &self.app, &self.catalog, &self.policy, &self.workload, self.plan.revision, now)
            {
                Ok(candidate) => {
                    let current_cost = self.total_cost(&self.plan);
                    let candidate_cost = self.total_cost(&candidate);
                    let improvement_pct = if current_cost > 0.0 {
                        (current_cost - candidate_cost) / current_cost * 100.0
                    } else {
                        0.0
                    };
                    if improvement_pct > self.policy.redeploy_cost_delta_pct {
                        let evaluation = RedeployEvaluation {
                            redeploy: true,
                            forced: false,
                            blocked_by_hysteresis: false,
                            infeasible: false,
                            reason: format!(
                                "deferred improvement {improvement_pct:.2}% applied after hysteresis expiry"
                            ),
                            current_cost,
                            candidate_cost,
                            improvement_pct,
                            candidate: None,
                        };
                        self.install(candidate, None, "hysteresisExpiry", evaluation, adapters, now)?;
                    }
                }
                Err(err) => {
                    self.log_alert(format!("hysteresis recheck failed: {err}"), None, now);
                }
            }
        }
        Ok(())
    }

    fn evaluate_event<A: ProviderAdapter>(
        &mut self,
        kind: &GovernanceEventKind,
        trigger_seq: u64,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) -> Result<(), BrokerError> {
        if self.manifest.lifecycle == Lifecycle::Passive {
            return Ok(());
        }
        let mut evaluation = should_redeploy(
            kind,
            &self.plan,
            &self.manifest,
            &self.app,
            &self.catalog,
            &self.policy,
            &self.workload,
            self.last_redeploy_at,
            now,
        );
        if evaluation.infeasible {
            // Keep the last good plan and degrade loudly.
            self.log_alert(
                format!("re-decision after {} failed: {}", kind.label(), evaluation.reason),
                Some(trigger_seq),
                now,
            );
            return Ok(());
        }
        if evaluation.blocked_by_hysteresis {
            self.pending_recheck = true;
        }
        if !evaluation.redeploy {
            self.log_decision(Some(trigger_seq), kind.label(), DecisionOutcome::Declined, evaluation, now);
            return Ok(());
        }
        let candidate = evaluation.candidate.take().expect("redeploy implies a candidate");
        self.install(candidate, Some(trigger_seq), kind.label(), evaluation, adapters, now)
    }

    /// Installs a candidate plan: computes the diff, enforces it, and
    /// records the outcome. Identical assignments keep the current plan
    /// and revision.
    fn install<A: ProviderAdapter>(
        &mut self,
        candidate: DeploymentPlan,
        trigger_seq: Option<u64>,
        trigger: &str,
        evaluation: RedeployEvaluation,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) -> Result<(), BrokerError> {
        let plan_diff = diff(&self.plan, &candidate)?;
        if plan_diff.is_empty() {
            self.log_decision(trigger_seq, trigger, DecisionOutcome::NoOp, evaluation, now);
            return Ok(());
        }
        self.log_decision(trigger_seq, trigger, DecisionOutcome::Redeployed, evaluation, now);
        let (report, in_flight) = enforce(&plan_diff, &candidate, adapters)?;
        if report.rolled_back {
            self.log_record(RecordKind::Enforce, serde_json::to_value(&report).expect("report"), now);
            self.log_alert(
                format!("enforcement of revision {} rolled back; keeping revision {}", candidate.revision, self.plan.revision),
                trigger_seq,
                now,
            );
            return Ok(());
        }
        self.plan = candidate;
        self.in_flight.extend(in_flight);
        self.last_redeploy_at = now;
        self.pending_recheck = false;
        self.log_plan(now);
        self.log_record(RecordKind::Enforce, serde_json::to_value(&report).expect("report"), now);
        Ok(())
    }

    fn complete_in_flight<A: ProviderAdapter>(
        &mut self,
        adapters: &mut BTreeMap<ProductId, A>,
        now: SimTimestamp,
    ) {
        let mut remaining = Vec::new();
        let mut completed: Vec<ExecutionAction> = Vec::new();
        for mv in self.in_flight.drain(..) {
            let ready = adapters
                .get(&mv.to_product_id)
                .is_some_and(|a| a.is_deployed(&mv.component_name));
            if ready {
                if let Some(source) = adapters.get_mut(&mv.from_product_id) {
                    let _ = source.undeploy(&mv.component_name);
                }
                completed.push(ExecutionAction {
                    component_name: mv.component_name.clone(),
                    action: ActionKind::Undeploy,
                    product_id: Some(mv.from_product_id.clone()),
                    outcome: ActionOutcome::Ok,
                });
            } else {
                remaining.push(mv);
            }
        }
        self.in_flight = remaining;
        if !completed.is_empty() {
            let report = ExecutionReport {
                plan_revision: self.plan.revision,
                actions: completed,
                rolled_back: false,
            };
            self.log_record(RecordKind::Enforce, serde_json::to_value(&report).expect("report"), now);
        }
    }

    fn total_cost(&self, plan: &DeploymentPlan) -> f64 {
        crate::decision::total_plan_cost(plan, &self.catalog, &self.workload).unwrap_or(f64::NAN)
    }

    fn log_record(&mut self, kind: RecordKind, payload: serde_json::Value, now: SimTimestamp) -> u64 {
        self.next_seq += 1;
        let seq = self.next_seq;
        self.records.push(LogRecord { seq, ts: now, kind, payload });
        seq
    }

    fn log_decision(
        &mut self,
        trigger_seq: Option<u64>,
        trigger: &str,
        outcome: DecisionOutcome,
        evaluation: RedeployEvaluation,
        now: SimTimestamp,
    ) {
        let record = DecisionRecord {
            trigger_seq,
            trigger: trigger.to_string(),
            outcome,
            evaluation,
        };
        self.log_record(RecordKind::Decision, serde_json::to_value(&record).expect("decision"), now);
    }

    fn log_plan(&mut self, now: SimTimestamp) {
        let payload = serde_json::to_value(&self.plan).expect("plan");
        self.log_record(RecordKind::Plan, payload, now);
    }

    fn log_alert(&mut self, message: String, trigger_seq: Option<u64>, now: SimTimestamp) {
        let record = AlertRecord { message, trigger_seq };
        self.log_record(RecordKind::Alert, serde_json::to_value(&record).expect("alert"), now);
    }
}

#[cfg(test)]
mod tests;
