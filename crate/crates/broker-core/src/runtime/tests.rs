use std::collections::{BTreeMap, BTreeSet};

use crate::catalog::{Catalog, CatalogConfig, PricingPlan, ProductPatch, ProductStatus, SlaTerms};
use crate::catalog::{CloudProduct, ServiceType, WorkloadProfile};
use crate::decision::{Assignment, DeploymentPlan, GovernancePolicy, PlanDiff, PlanMove};
use crate::event::{GovernanceEventKind, MetricId, MonitorSample, ProductId, LATENCY_METRIC};
use crate::manifest::{parse_manifest, CloudType};
use crate::model::{ApplicationModel, Component, ComponentKind};
use crate::simcloud::{MetricGeneratorSpec, SimProvider};

use super::*;

fn product(id: &str, fee: f64) -> CloudProduct {
    CloudProduct {
        product_id: ProductId::from(id),
        provider_id: "acme".to_string(),
        cloud_type: CloudType::Iaas,
        service_types: BTreeSet::from([ServiceType::Compute]),
        regions: BTreeSet::new(),
        tech_tags: BTreeSet::from(["jvm".to_string()]),
        pricing: PricingPlan { currency: "EUR".to_string(), fixed_fee_per_month: fee, rates: vec![] },
        sla: SlaTerms { availability_pct: 99.9, response_time_ms_p95: 100.0, security_attrs: BTreeSet::new() },
        endpoint: None,
        status: ProductStatus::Active,
        market_volume_rank: 1,
        standards: BTreeSet::new(),
    }
}

fn sim_provider(id: &str) -> SimProvider {
    SimProvider::new(
        ProductId::from(id),
        MetricGeneratorSpec { metric: MetricId::from(LATENCY_METRIC), base: 50.0, jitter_pct: 0.0 },
    )
}

fn catalog_of(products: Vec<CloudProduct>) -> Catalog {
    let mut catalog = Catalog::new(CatalogConfig::default());
    for p in products {
        catalog.register_product(p).unwrap();
    }
    catalog
}

fn providers_of(catalog: &Catalog) -> BTreeMap<ProductId, SimProvider> {
    catalog
        .list_products()
        .into_iter()
        .map(|p| (p.product_id.clone(), sim_provider(p.product_id.as_str())))
        .collect()
}

fn mini_app() -> ApplicationModel {
    ApplicationModel::new(
        "mini",
        vec![Component {
            name: "Login".to_string(),
            kind: ComponentKind::Controllers,
            required_tech: BTreeSet::from(["jvm".to_string()]),
            environment: None,
        }],
    )
    .unwrap()
}

fn mini_broker(lifecycle: &str, products: Vec<CloudProduct>) -> (Broker, BTreeMap<ProductId, SimProvider>) {
    let manifest = parse_manifest(&format!(
        "broker {{ governance.lifecycle = {lifecycle} controllers {{ all economy }} }}"
    ))
    .unwrap();
    let catalog = catalog_of(products);
    let mut providers = providers_of(&catalog);
    let mut policy = GovernancePolicy::default();
    policy.hysteresis_window = 120;
    let broker = Broker::bootstrap(
        manifest,
        mini_app(),
        policy,
        WorkloadProfile::default(),
        catalog,
        &mut providers,
        0,
    )
    .unwrap();
    (broker, providers)
}

fn plan_of(assignments: &[(&str, &str)]) -> DeploymentPlan {
    DeploymentPlan {
        plan_id: "mini-r1".to_string(),
        app_id: "mini".to_string(),
        revision: 1,
        assignments: assignments
            .iter()
            .map(|(c, p)| Assignment {
                component_name: c.to_string(),
                product_id: ProductId::from(*p),
                config_params: BTreeMap::new(),
            })
            .collect(),
        created_at: 0,
    }
}

fn sample(component: &str, value: f64) -> MonitorSample {
    MonitorSample {
        product_id: ProductId::from("p1"),
        component_name: component.to_string(),
        metric: MetricId::from(LATENCY_METRIC),
        value,
        timestamp: 0,
    }
}

// ---------------------------------------------------------------------------
// Monitor
// ---------------------------------------------------------------------------

#[test]
fn empty_batch_emits_nothing() {
    let mut monitor = Monitor::default();
    let plan = plan_of(&[("Login", "p1")]);
    let slos = BTreeMap::from([("Login".to_string(), 100.0)]);
    let events = monitor.ingest(&[], &slos, &plan).unwrap();
    assert!(events.is_empty());
}

#[test]
fn samples_below_the_bound_are_filtered() {
    let mut monitor = Monitor::default();
    let plan = plan_of(&[("Login", "p1")]);
    let slos = BTreeMap::from([("Login".to_string(), 100.0)]);
    let batch: Vec<MonitorSample> = (0..20).map(|i| sample("Login", 50.0 + i as f64)).collect();
    let events = monitor.ingest(&batch, &slos, &plan).unwrap();
    assert!(events.is_empty());
    let window = monitor.window("Login", &MetricId::from(LATENCY_METRIC)).unwrap();
    assert_eq!(window.len(), 20);
}

#[test]
fn p95_breach_emits_exactly_one_violation_with_the_computed_p95() {
    let mut monitor = Monitor::default();
    let plan = plan_of(&[("Login", "p1")]);
    let slos = BTreeMap::from([("Login".to_string(), 100.0)]);
    // 100 distinct values 1..=100: nearest-rank p95 is the 95th value.
    let batch: Vec<MonitorSample> = (1..=100).map(|i| sample("Login", i as f64 + 6.0)).collect();
    let events = monitor.ingest(&batch, &slos, &plan).unwrap();

    // Independent oracle: sort a copy and index the nearest rank.
    let mut values: Vec<f64> = batch.iter().map(|s| s.value).collect();
    values.sort_by(f64::total_cmp);
    let rank = (0.95f64 * values.len() as f64).ceil() as usize;
    let expected_p95 = values[rank - 1];
    assert!(expected_p95 > 100.0);

    assert_eq!(events.len(), 1);
    match &events[0] {
        GovernanceEventKind::QosViolation { component_name, observed, bound, product_id, .. } => {
            assert_eq!(component_name, "Login");
            assert_eq!(*observed, expected_p95);
            assert_eq!(*bound, 100.0);
            assert_eq!(product_id.as_str(), "p1");
        }
        other => panic!("unexpected event {other:?}"),
    }
}

#[test]
fn unknown_component_is_rejected() {
    let mut monitor = Monitor::default();
    let plan = plan_of(&[("Login", "p1")]);
    let slos = BTreeMap::new();
    let err = monitor.ingest(&[sample("Ghost", 1.0)], &slos, &plan).unwrap_err();
    assert_eq!(err, MonitorError::UnknownComponent("Ghost".to_string()));
}

#[test]
fn correlation_window_is_bounded() {
    let mut monitor = Monitor::default();
    let plan = plan_of(&[("Login", "p1")]);
    let slos = BTreeMap::from([("Login".to_string(), 1e9)]);
    for value in 0..(CORRELATION_WINDOW + 50) {
        monitor.ingest(&[sample("Login", value as f64)], &slos, &plan).unwrap();
    }
    let window = monitor.window("Login", &MetricId::from(LATENCY_METRIC)).unwrap();
    assert_eq!(window.len(), CORRELATION_WINDOW);
    assert_eq!(*window.front().unwrap(), 50.0);
}

#[test]
fn nearest_rank_p95_on_small_windows() {
    assert_eq!(nearest_rank_p95([42.0].into_iter()), 42.0);
    assert_eq!(nearest_rank_p95([1.0, 2.0].into_iter()), 2.0);
    let twenty: Vec<f64> = (1..=20).map(|i| i as f64).collect();
    assert_eq!(nearest_rank_p95(twenty.into_iter()), 19.0);
}

#[test]
fn correlations_reflect_violations() {
    let mut monitor = Monitor::default();
    let plan = plan_of(&[("Login", "p1")]);
    let slos = BTreeMap::from([("Login".to_string(), 10.0)]);
    monitor.ingest(&[sample("Login", 50.0)], &slos, &plan).unwrap();
    let records = monitor.correlations(&slos, &plan);
    assert_eq!(records.len(), 1);
    assert!(records[0].violated);
    assert_eq!(records[0].observed_aggregate, 50.0);
    assert_eq!(records[0].slo_bound, 10.0);
    assert_eq!(records[0].window_len, 1);
}

// ---------------------------------------------------------------------------
// Enforcement
// ---------------------------------------------------------------------------

fn two_move_diff() -> (PlanDiff, DeploymentPlan) {
    let new_plan = plan_of(&[("a", "p3"), ("b", "p4")]);
    let diff = PlanDiff {
        moves: vec![
            PlanMove {
                component_name: "a".to_string(),
                from_product_id: Some(ProductId::from("p1")),
                to_product_id: Some(ProductId::from("p3")),
            },
            PlanMove {
                component_name: "b".to_string(),
                from_product_id: Some(ProductId::from("p2")),
                to_product_id: Some(ProductId::from("p4")),
            },
        ],
        unchanged: vec![],
    };
    (diff, new_plan)
}

fn adapters_for(ids: &[&str]) -> BTreeMap<ProductId, SimProvider> {
    ids.iter().map(|id| (ProductId::from(*id), sim_provider(id))).collect()
}

fn snapshot(adapters: &BTreeMap<ProductId, SimProvider>) -> BTreeMap<ProductId, BTreeSet<String>> {
    adapters.iter().map(|(id, a)| (id.clone(), a.deployed_components())).collect()
}

#[test]
fn empty_diff_is_all_noops() {
    let plan = plan_of(&[("a", "p1")]);
    let diff = PlanDiff { moves: vec![], unchanged: vec!["a".to_string()] };
    let mut adapters = adapters_for(&["p1"]);
    let (report, in_flight) = enforce(&diff, &plan, &mut adapters).unwrap();
    assert!(!report.rolled_back);
    assert!(in_flight.is_empty());
    assert_eq!(report.actions.len(), 1);
    assert_eq!(report.actions[0].action, ActionKind::Noop);
    assert_eq!(report.actions[0].outcome, ActionOutcome::Ok);
}

#[test]
fn successful_moves_deploy_then_undeploy() {
    let (diff, new_plan) = two_move_diff();
    let mut adapters = adapters_for(&["p1", "p2", "p3", "p4"]);
    adapters.get_mut(&ProductId::from("p1")).unwrap().restore("a");
    adapters.get_mut(&ProductId::from("p2")).unwrap().restore("b");

    let (report, in_flight) = enforce(&diff, &new_plan, &mut adapters).unwrap();
    assert!(!report.rolled_back);
    assert!(in_flight.is_empty());
    let deploys = report.actions.iter().filter(|a| a.action == ActionKind::Deploy).count();
    let undeploys = report.actions.iter().filter(|a| a.action == ActionKind::Undeploy).count();
    assert_eq!((deploys, undeploys), (2, 2));
    assert!(report.actions.iter().all(|a| a.outcome == ActionOutcome::Ok));
    assert!(adapters[&ProductId::from("p3")].is_deployed("a"));
    assert!(adapters[&ProductId::from("p4")].is_deployed("b"));
    assert!(!adapters[&ProductId::from("p1")].is_deployed("a"));
    assert!(!adapters[&ProductId::from("p2")].is_deployed("b"));
}

#[test]
fn injected_failure_rolls_back_completed_moves() {
    let (diff, new_plan) = two_move_diff();
    let mut adapters = adapters_for(&["p1", "p2", "p3", "p4"]);
    adapters.get_mut(&ProductId::from("p1")).unwrap().restore("a");
    adapters.get_mut(&ProductId::from("p2")).unwrap().restore("b");
    adapters.get_mut(&ProductId::from("p4")).unwrap().fail_next_deploys = 1;
    let before = snapshot(&adapters);

    let (report, in_flight) = enforce(&diff, &new_plan, &mut adapters).unwrap();
    assert!(report.rolled_back);
    assert!(in_flight.is_empty());
    let failed: Vec<&ExecutionAction> =
        report.actions.iter().filter(|a| a.outcome == ActionOutcome::Failed).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].component_name, "b");
    // State snapshot oracle: adapters exactly as before the call.
    assert_eq!(snapshot(&adapters), before);
}

#[test]
fn missing_adapter_fails_before_any_mutation() {
    let (diff, new_plan) = two_move_diff();
    let mut adapters = adapters_for(&["p1", "p2", "p3"]);
    adapters.get_mut(&ProductId::from("p1")).unwrap().restore("a");
    let before = snapshot(&adapters);
    let err = enforce(&diff, &new_plan, &mut adapters).unwrap_err();
    assert_eq!(err, EnforceError::MissingAdapter(ProductId::from("p4")));
    assert_eq!(snapshot(&adapters), before);
}

#[test]
fn deferred_undeploy_keeps_the_source_up_until_target_ready() {
    let new_plan = plan_of(&[("a", "p2")]);
    let diff = PlanDiff {
        moves: vec![PlanMove {
            component_name: "a".to_string(),
            from_product_id: Some(ProductId::from("p1")),
            to_product_id: Some(ProductId::from("p2")),
        }],
        unchanged: vec![],
    };
    let mut adapters = adapters_for(&["p1", "p2"]);
    adapters.get_mut(&ProductId::from("p1")).unwrap().restore("a");
    adapters.get_mut(&ProductId::from("p2")).unwrap().deploy_latency_ticks = 3;

    let (report, in_flight) = enforce(&diff, &new_plan, &mut adapters).unwrap();
    assert!(!report.rolled_back);
    assert_eq!(in_flight.len(), 1);
    // Make-before-break: the source stays deployed while the target spins up.
    assert!(adapters[&ProductId::from("p1")].is_deployed("a"));
    assert!(!adapters[&ProductId::from("p2")].is_deployed("a"));
}

// ---------------------------------------------------------------------------
// Governance loop
// ---------------------------------------------------------------------------

fn price_patch(fee: f64) -> ProductPatch {
    ProductPatch {
        pricing: Some(PricingPlan {
            currency: "EUR".to_string(),
            fixed_fee_per_month: fee,
            rates: vec![],
        }),
        ..Default::default()
    }
}

#[test]
fn passive_lifecycle_only_records() {
    let (mut broker, mut providers) =
        mini_broker("passive", vec![product("p1", 10.0), product("p2", 20.0)]);
    assert_eq!(broker.plan().revision, 1);
    let records_before = broker.records().len();

    // p2 drops far below p1: an active broker would move.
    broker
        .apply_catalog_update(&ProductId::from("p2"), &price_patch(1.0), &mut providers, 600)
        .unwrap();

    assert_eq!(broker.plan().revision, 1);
    let new_records: Vec<&LogRecord> = broker.records()[records_before..].iter().collect();
    assert_eq!(new_records.len(), 1);
    assert_eq!(new_records[0].kind, RecordKind::Event);
}

#[test]
fn passive_replan_command_still_replans() {
    let (mut broker, mut providers) =
        mini_broker("passive", vec![product("p1", 10.0), product("p2", 20.0)]);
    broker
        .apply_catalog_update(&ProductId::from("p2"), &price_patch(1.0), &mut providers, 600)
        .unwrap();
    broker.replan(&mut providers, 660).unwrap();
    assert_eq!(broker.plan().revision, 2);
    assert_eq!(broker.plan().assignment("Login").unwrap().product_id.as_str(), "p2");
}

#[test]
fn withdrawal_of_assignee_moves_only_affected_components() {
    let (mut broker, mut providers) =
        mini_broker("active", vec![product("p1", 10.0), product("p2", 20.0)]);
    assert_eq!(broker.plan().assignment("Login").unwrap().product_id.as_str(), "p1");

    let patch = ProductPatch { status: Some(ProductStatus::Withdrawn), ..Default::default() };
    broker.apply_catalog_update(&ProductId::from("p1"), &patch, &mut providers, 30).unwrap();

    // Forced move ignores the hysteresis window (only 30s elapsed).
    assert_eq!(broker.plan().revision, 2);
    assert_eq!(broker.plan().assignment("Login").unwrap().product_id.as_str(), "p2");
    assert!(providers[&ProductId::from("p2")].is_deployed("Login"));
    assert!(!providers[&ProductId::from("p1")].is_deployed("Login"));
}

#[test]
fn withdrawal_without_alternative_alerts_and_keeps_the_plan() {
    let (mut broker, mut providers) = mini_broker("active", vec![product("p1", 10.0)]);
    let patch = ProductPatch { status: Some(ProductStatus::Withdrawn), ..Default::default() };
    broker.apply_catalog_update(&ProductId::from("p1"), &patch, &mut providers, 600).unwrap();

    assert_eq!(broker.plan().revision, 1);
    assert_eq!(broker.plan().assignment("Login").unwrap().product_id.as_str(), "p1");
    let alerts: Vec<&LogRecord> =
        broker.records().iter().filter(|r| r.kind == RecordKind::Alert).collect();
    assert_eq!(alerts.len(), 1);
    // The component stays where it was; governance degraded gracefully.
    assert!(providers[&ProductId::from("p1")].is_deployed("Login"));
}

#[test]
fn hysteresis_defers_then_applies_an_improvement() {
    let (mut broker, mut providers) =
        mini_broker("active", vec![product("p1", 10.0), product("p2", 20.0)]);
    // Large improvement arrives 60s after bootstrap; window is 120s.
    broker
        .apply_catalog_update(&ProductId::from("p2"), &price_patch(1.0), &mut providers, 60)
        .unwrap();
    assert_eq!(broker.plan().revision, 1, "improvement must be deferred");

    // Window still open at 100s.
    broker.on_tick(&mut providers, 100).unwrap();
    assert_eq!(broker.plan().revision, 1);

    // Window expired: the deferred improvement is applied by the clock.
    broker.on_tick(&mut providers, 120).unwrap();
    assert_eq!(broker.plan().revision, 2);
    assert_eq!(broker.plan().assignment("Login").unwrap().product_id.as_str(), "p2");
    assert_eq!(broker.last_redeploy_at(), 120);

    // And only once.
    broker.on_tick(&mut providers, 300).unwrap();
    assert_eq!(broker.plan().revision, 2);
}

#[test]
fn noop_redecisions_keep_the_revision() {
    let (mut broker, mut providers) =
        mini_broker("active", vec![product("p1", 10.0), product("p2", 20.0)]);
    // Tag change on the assigned product forces re-decision, but the
    // ranking is unchanged: same assignments, no new revision.
    let patch = ProductPatch {
        tech_tags: Some(BTreeSet::from(["jvm".to_string(), "extra".to_string()])),
        ..Default::default()
    };
    broker.apply_catalog_update(&ProductId::from("p1"), &patch, &mut providers, 600).unwrap();
    assert_eq!(broker.plan().revision, 1);
    let decisions: Vec<DecisionRecord> = broker
        .records()
        .iter()
        .filter(|r| r.kind == RecordKind::Decision)
        .map(|r| serde_json::from_value(r.payload.clone()).unwrap())
        .collect();
    assert_eq!(decisions.last().unwrap().outcome, DecisionOutcome::NoOp);
}

#[test]
fn metric_batches_are_filtered_but_violations_redeploy_via_threshold_path() {
    let (mut broker, mut providers) =
        mini_broker("active", vec![product("p1", 10.0), product("p2", 20.0)]);
    let records_before = broker.records().len();

    // Healthy batch: recorded, no decision. SLO bound is 100ms.
    let batch: Vec<MonitorSample> = (0..30).map(|_| sample("Login", 50.0)).collect();
    broker.ingest_samples(batch, &mut providers, 600).unwrap();
    let kinds: Vec<RecordKind> =
        broker.records()[records_before..].iter().map(|r| r.kind).collect();
    assert_eq!(kinds, vec![RecordKind::Event]);

    // Violating batch: the violation event follows and is evaluated. The
    // catalog is unchanged, so re-deciding keeps the plan (noop).
    let batch: Vec<MonitorSample> = (0..100).map(|_| sample("Login", 500.0)).collect();
    broker.ingest_samples(batch, &mut providers, 700).unwrap();
    let tail: Vec<RecordKind> = broker
        .records()
        .iter()
        .skip(records_before + 1)
        .map(|r| r.kind)
        .collect();
    assert_eq!(tail, vec![RecordKind::Event, RecordKind::Event, RecordKind::Decision]);
    assert_eq!(broker.plan().revision, 1);
}

#[test]
fn quiescent_plan_matches_active_plan_after_redeploy() {
    let (mut broker, mut providers) =
        mini_broker("active", vec![product("p1", 10.0), product("p2", 20.0)]);
    broker
        .apply_catalog_update(&ProductId::from("p2"), &price_patch(1.0), &mut providers, 600)
        .unwrap();
    assert_eq!(broker.plan().revision, 2);
    let fresh = broker.quiescent_plan().unwrap();
    assert_eq!(&fresh, broker.plan());
}

// ---------------------------------------------------------------------------
// Log
// ---------------------------------------------------------------------------

#[test]
fn log_round_trips_and_seqs_increase() {
    let (mut broker, mut providers) =
        mini_broker("active", vec![product("p1", 10.0), product("p2", 20.0)]);
    broker
        .apply_catalog_update(&ProductId::from("p2"), &price_patch(1.0), &mut providers, 600)
        .unwrap();
    let log = broker.event_log();
    assert!(log.seqs_strictly_increase());

    let text = log.to_ndjson();
    let parsed = EventLog::from_ndjson(&text).unwrap();
    assert_eq!(parsed, log);
    assert_eq!(parsed.replayed_final_revision(), Some(broker.plan().revision));
}

#[test]
fn auditor_accepts_honest_logs_and_catches_tampered_plans() {
    let (mut broker, mut providers) =
        mini_broker("active", vec![product("p1", 10.0), product("p2", 20.0)]);
    broker
        .apply_catalog_update(&ProductId::from("p2"), &price_patch(1.0), &mut providers, 600)
        .unwrap();
    let app = mini_app();
    let initial = vec![product("p1", 10.0), product("p2", 20.0)];

    let mut log = broker.event_log();
    audit_feasibility(&initial, &app, &log).unwrap();

    // Tamper: point the last plan's assignment at a product that lacks jvm.
    let mut rogue = initial.clone();
    rogue[1].tech_tags = BTreeSet::from(["dotnet".to_string()]);
    let violations = audit_feasibility(&rogue, &app, &log).unwrap_err();
    assert!(!violations.is_empty());
    assert!(violations[0].reason.contains("jvm"), "{}", violations[0].reason);

    // Tamper differently: a plan referencing an unknown product.
    for record in &mut log.records {
        if record.kind == RecordKind::Plan {
            record.payload["assignments"][0]["productId"] = serde_json::json!("ghost");
        }
    }
    let violations = audit_feasibility(&initial, &app, &log).unwrap_err();
    assert!(violations.iter().any(|v| v.reason.contains("unknown")));
}
