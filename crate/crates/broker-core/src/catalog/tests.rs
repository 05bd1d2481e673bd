use proptest::prelude::*;

use super::*;

pub(crate) fn product(id: &str) -> CloudProduct {
    CloudProduct {
        product_id: ProductId::from(id),
        provider_id: "acme".to_string(),
        cloud_type: CloudType::Paas,
        service_types: BTreeSet::from([ServiceType::Compute]),
        regions: BTreeSet::from(["eu-west".to_string()]),
        tech_tags: BTreeSet::from(["jvm".to_string()]),
        pricing: PricingPlan {
            currency: "EUR".to_string(),
            fixed_fee_per_month: 0.0,
            rates: vec![Rate { metric: MetricId::from("cpu"), unit: "cpu-hour".to_string(), price_per_unit: 0.05 }],
        },
        sla: SlaTerms {
            availability_pct: 99.9,
            response_time_ms_p95: 200.0,
            security_attrs: BTreeSet::new(),
        },
        endpoint: None,
        status: ProductStatus::Active,
        market_volume_rank: 1,
        standards: BTreeSet::new(),
    }
}

fn workload(pairs: &[(&str, f64)]) -> WorkloadProfile {
    WorkloadProfile {
        usage: pairs.iter().map(|(m, q)| (MetricId::from(*m), *q)).collect(),
    }
}

fn report(id: &str, metric: &str, value: f64, trust: f64) -> QosReport {
    QosReport {
        product_id: ProductId::from(id),
        region: "eu-west".to_string(),
        metric: MetricId::from(metric),
        value,
        source_id: "probe".to_string(),
        trust_weight: trust,
        timestamp: 0,
    }
}

#[test]
fn registered_product_is_retrievable() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    let mut p = product("os-imaging-db");
    p.provider_id = "OpenStackImagingService".to_string();
    p.endpoint = Some("http://149.156.97.139:9090".to_string());
    let update = catalog.register_product(p).unwrap();
    assert_eq!(update.revision, 1);
    assert_eq!(
        update.events,
        vec![GovernanceEventKind::ProductRegistered { product_id: ProductId::from("os-imaging-db") }]
    );
    let stored = catalog.product(&ProductId::from("os-imaging-db")).unwrap();
    assert_eq!(stored.endpoint.as_deref(), Some("http://149.156.97.139:9090"));
}

#[test]
fn duplicate_registration_is_rejected() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    let err = catalog.register_product(product("p1")).unwrap_err();
    assert_eq!(err, CatalogError::DuplicateProduct(ProductId::from("p1")));
}

#[test]
fn listing_follows_registry_order() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    let mut expected: Vec<(u32, usize, String)> = Vec::new();
    for i in 0..50u32 {
        let id = format!("p{i:02}");
        let mut p = product(&id);
        p.market_volume_rank = 1 + (i * 7) % 5;
        p.standards = (0..(i % 4)).map(|s| format!("std-{s}")).collect();
        expected.push((p.market_volume_rank, p.standards.len(), id));
        catalog.register_product(p).unwrap();
    }
    // Independent sort oracle over the generated keys.
    expected.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));

    let listed = catalog.list_products();
    assert_eq!(listed.len(), 50);
    for (entry, (rank, standards, id)) in listed.iter().zip(&expected) {
        assert_eq!(entry.market_volume_rank, *rank);
        assert_eq!(entry.standards.len(), *standards);
        assert_eq!(entry.product_id.as_str(), id);
    }
}

#[test]
fn rate_increase_emits_price_changed() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    let mut pricing = catalog.product(&ProductId::from("p1")).unwrap().pricing.clone();
    pricing.rates[0].price_per_unit = 0.08;
    let update = catalog
        .update_product(&ProductId::from("p1"), &ProductPatch { pricing: Some(pricing), ..Default::default() })
        .unwrap();
    assert_eq!(
        update.events,
        vec![GovernanceEventKind::PriceChanged {
            product_id: ProductId::from("p1"),
            metric: MetricId::from("cpu"),
            old: 0.05,
            new: 0.08,
        }]
    );
}

#[test]
fn withdrawal_emits_product_withdrawn() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    let update = catalog
        .update_product(
            &ProductId::from("p1"),
            &ProductPatch { status: Some(ProductStatus::Withdrawn), ..Default::default() },
        )
        .unwrap();
    assert_eq!(
        update.events,
        vec![GovernanceEventKind::ProductWithdrawn { product_id: ProductId::from("p1") }]
    );
    assert!(catalog.active_products().next().is_none());
    assert_eq!(catalog.list_products().len(), 1);
}

#[test]
fn withdrawn_products_cannot_be_reactivated() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    let withdraw = ProductPatch { status: Some(ProductStatus::Withdrawn), ..Default::default() };
    catalog.update_product(&ProductId::from("p1"), &withdraw).unwrap();
    let reactivate = ProductPatch { status: Some(ProductStatus::Active), ..Default::default() };
    let err = catalog.update_product(&ProductId::from("p1"), &reactivate).unwrap_err();
    assert!(matches!(err, CatalogError::ValidationError { .. }), "{err:?}");
}

#[test]
fn currency_change_is_rejected() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    let mut pricing = catalog.product(&ProductId::from("p1")).unwrap().pricing.clone();
    pricing.currency = "USD".to_string();
    let err = catalog
        .update_product(&ProductId::from("p1"), &ProductPatch { pricing: Some(pricing), ..Default::default() })
        .unwrap_err();
    assert!(matches!(err, CatalogError::ValidationError { .. }), "{err:?}");
}

// Facet-change oracle: every subset of patched facets emits exactly the
// changed facets' events, in (price, sla, tech, status) order.
#[test]
fn facet_subsets_emit_events_in_canonical_order() {
    for mask in 0u8..16 {
        let change_price = mask & 1 != 0;
        let change_sla = mask & 2 != 0;
        let change_tech = mask & 4 != 0;
        let change_status = mask & 8 != 0;

        let mut catalog = Catalog::new(CatalogConfig::default());
        catalog.register_product(product("p1")).unwrap();
        let current = catalog.product(&ProductId::from("p1")).unwrap().clone();

        let mut patch = ProductPatch::default();
        if change_price {
            let mut pricing = current.pricing.clone();
            pricing.fixed_fee_per_month += 5.0;
            patch.pricing = Some(pricing);
        } else {
            // An unchanged facet inside the patch must stay silent.
            patch.pricing = Some(current.pricing.clone());
        }
        if change_sla {
            let mut sla = current.sla.clone();
            sla.availability_pct = 99.5;
            patch.sla = Some(sla);
        }
        if change_tech {
            let mut tags = current.tech_tags.clone();
            tags.insert("dotnet".to_string());
            patch.tech_tags = Some(tags);
        }
        if change_status {
            patch.status = Some(ProductStatus::Withdrawn);
        }

        let update = catalog.update_product(&ProductId::from("p1"), &patch).unwrap();
        let labels: Vec<&str> = update.events.iter().map(|e| e.label()).collect();

        let mut expected = Vec::new();
        if change_price {
            expected.push("priceChanged");
        }
        if change_sla {
            expected.push("slaChanged");
        }
        if change_tech {
            expected.push("technologyChanged");
        }
        if change_status {
            expected.push("productWithdrawn");
        }
        assert_eq!(labels, expected, "mask {mask:#06b}");
    }
}

#[test]
fn noop_patch_emits_nothing() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    let current = catalog.product(&ProductId::from("p1")).unwrap().clone();
    let patch = ProductPatch {
        pricing: Some(current.pricing.clone()),
        sla: Some(current.sla.clone()),
        tech_tags: Some(current.tech_tags.clone()),
        status: Some(current.status),
    };
    let update = catalog.update_product(&ProductId::from("p1"), &patch).unwrap();
    assert!(update.events.is_empty());
    assert_eq!(update.revision, 1);
}

#[test]
fn unknown_product_update_fails() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    let err = catalog.update_product(&ProductId::from("ghost"), &ProductPatch::default()).unwrap_err();
    assert_eq!(err, CatalogError::UnknownProduct(ProductId::from("ghost")));
}

#[test]
fn zero_usage_costs_exactly_the_converted_fixed_fee() {
    let plan = PricingPlan { currency: "EUR".to_string(), fixed_fee_per_month: 10.0, rates: vec![] };
    let fx = BTreeMap::from([("EUR".to_string(), 1.0)]);
    let cost = estimate_monthly_cost(&plan, &workload(&[]), &fx).unwrap();
    assert_eq!(cost, 10.0);
}

#[test]
fn metered_usage_adds_linearly() {
    let plan = PricingPlan {
        currency: "EUR".to_string(),
        fixed_fee_per_month: 10.0,
        rates: vec![Rate { metric: MetricId::from("cpu"), unit: "cpu-hour".to_string(), price_per_unit: 0.05 }],
    };
    let fx = BTreeMap::from([("EUR".to_string(), 1.0)]);
    let cost = estimate_monthly_cost(&plan, &workload(&[("cpu", 100.0)]), &fx).unwrap();
    assert_eq!(cost, 15.0);
}

#[test]
fn missing_fx_rate_is_an_error() {
    let plan = PricingPlan { currency: "USD".to_string(), fixed_fee_per_month: 1.0, rates: vec![] };
    let fx = BTreeMap::from([("EUR".to_string(), 1.0)]);
    let err = estimate_monthly_cost(&plan, &workload(&[]), &fx).unwrap_err();
    assert_eq!(err, CatalogError::MissingFxRate("USD".to_string()));
}

#[test]
fn intake_converts_units_to_canonical() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    let mut p = product("p1");
    p.pricing.rates = vec![
        Rate { metric: MetricId::from("memory"), unit: "gib-month".to_string(), price_per_unit: 1.073741824 },
        Rate { metric: MetricId::from("storage"), unit: "gb-hour".to_string(), price_per_unit: 0.001 },
    ];
    catalog.register_product(p).unwrap();
    let stored = catalog.product(&ProductId::from("p1")).unwrap();
    assert_eq!(stored.pricing.rates[0].unit, "gb-month");
    assert!((stored.pricing.rates[0].price_per_unit - 1.0).abs() < 1e-12);
    assert_eq!(stored.pricing.rates[1].unit, "gb-month");
    assert!((stored.pricing.rates[1].price_per_unit - 0.73).abs() < 1e-12);
}

#[test]
fn unknown_rate_unit_is_rejected() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    let mut p = product("p1");
    p.pricing.rates[0].unit = "furlongs".to_string();
    let err = catalog.register_product(p).unwrap_err();
    assert!(matches!(err, CatalogError::ValidationError { .. }), "{err:?}");
}

#[test]
fn single_report_aggregates_to_itself() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    let aggregate = catalog.ingest_qos_report(report("p1", LATENCY_METRIC, 80.0, 1.0)).unwrap();
    assert_eq!(aggregate, 80.0);
}

#[test]
fn weighted_mean_of_two_reports() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    catalog.ingest_qos_report(report("p1", LATENCY_METRIC, 100.0, 0.5)).unwrap();
    let aggregate = catalog.ingest_qos_report(report("p1", LATENCY_METRIC, 50.0, 1.0)).unwrap();
    // (0.5·100 + 1.0·50) / 1.5
    assert!((aggregate - 200.0 / 3.0).abs() < 1e-12, "{aggregate}");
}

#[test]
fn report_for_unknown_product_fails() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    let err = catalog.ingest_qos_report(report("ghost", LATENCY_METRIC, 1.0, 1.0)).unwrap_err();
    assert_eq!(err, CatalogError::UnknownProduct(ProductId::from("ghost")));
}

#[test]
fn retention_window_drops_oldest_reports() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    // One outlier followed by a full window of identical reports.
    catalog.ingest_qos_report(report("p1", LATENCY_METRIC, 1000.0, 1.0)).unwrap();
    let mut last = 0.0;
    for _ in 0..qos::RETENTION_WINDOW {
        last = catalog.ingest_qos_report(report("p1", LATENCY_METRIC, 50.0, 1.0)).unwrap();
    }
    assert_eq!(last, 50.0, "outlier should have aged out");
}

#[test]
fn boundary_product_normalizes_to_perfect_scores() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    let mut p = product("p1");
    p.pricing = PricingPlan { currency: "EUR".to_string(), fixed_fee_per_month: 0.0, rates: vec![] };
    p.sla.availability_pct = 100.0;
    p.sla.security_attrs =
        BTreeSet::from(["encrypted-at-rest".to_string(), "daily-backup".to_string()]);
    catalog.register_product(p).unwrap();
    let offer = catalog
        .normalize_offer(catalog.product(&ProductId::from("p1")).unwrap(), &workload(&[]))
        .unwrap();
    assert_eq!(offer.monthly_cost, 0.0);
    assert_eq!(offer.perf_score, 1.0);
    assert_eq!(offer.reliability_score, 1.0);
    assert_eq!(offer.security_score, 1.0);
    assert!(offer.unmeasured);
}

#[test]
fn availability_99_5_scores_half_reliability() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    let mut p = product("p1");
    p.sla.availability_pct = 99.5;
    catalog.register_product(p).unwrap();
    let offer = catalog
        .normalize_offer(catalog.product(&ProductId::from("p1")).unwrap(), &workload(&[]))
        .unwrap();
    assert_eq!(offer.reliability_score, 0.5);
}

#[test]
fn measured_latency_clears_the_unmeasured_flag() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.register_product(product("p1")).unwrap();
    catalog.ingest_qos_report(report("p1", LATENCY_METRIC, 200.0, 1.0)).unwrap();
    let offer = catalog
        .normalize_offer(catalog.product(&ProductId::from("p1")).unwrap(), &workload(&[]))
        .unwrap();
    assert!(!offer.unmeasured);
    assert_eq!(offer.perf_score, 0.5); // 100 ms reference / 200 ms observed
}

#[test]
fn document_round_trip_preserves_the_catalog() {
    let mut catalog = Catalog::new(CatalogConfig::default());
    catalog.set_fx_rate("USD", 0.9);
    let mut p = product("p1");
    p.pricing.fixed_fee_per_month = 12.5;
    catalog.register_product(p).unwrap();
    catalog.register_product(product("p2")).unwrap();
    catalog.ingest_qos_report(report("p2", LATENCY_METRIC, 80.0, 0.75)).unwrap();

    let json = serde_json::to_string_pretty(&catalog.to_document()).unwrap();
    let document: CatalogDocument = serde_json::from_str(&json).unwrap();
    let reloaded = Catalog::from_document(document, CatalogConfig::default()).unwrap();

    assert_eq!(reloaded.product(&ProductId::from("p1")), catalog.product(&ProductId::from("p1")));
    assert_eq!(
        reloaded.qos_aggregate(&ProductId::from("p2"), &MetricId::from(LATENCY_METRIC)),
        Some(80.0)
    );
    assert_eq!(reloaded.fx(), catalog.fx());
    // Money fields are strings in the document.
    assert!(json.contains("\"fixedFeePerMonth\": \"12.5\""), "{json}");
}

// ---------------------------------------------------------------------------
// Property tests
// ---------------------------------------------------------------------------

const METRIC_POOL: [&str; 5] = ["cpu", "memory", "network", "db-entries", "gpu"];

prop_compose! {
    fn plan_strategy()(
        currency in prop::sample::select(vec!["EUR", "USD", "PLN"]),
        fixed in 0.0f64..500.0,
        rates in prop::collection::btree_map(
            prop::sample::select(METRIC_POOL.to_vec()),
            0.0f64..10.0,
            0..5,
        ),
    ) -> PricingPlan {
        PricingPlan {
            currency: currency.to_string(),
            fixed_fee_per_month: fixed,
            rates: rates.into_iter().map(|(metric, price)| Rate {
                metric: MetricId::from(metric),
                unit: "cpu-hour".to_string(),
                price_per_unit: price,
            }).collect(),
        }
    }
}

prop_compose! {
    fn workload_strategy()(
        usage in prop::collection::btree_map(
            prop::sample::select(METRIC_POOL.to_vec()),
            0.0f64..1000.0,
            0..5,
        ),
    ) -> WorkloadProfile {
        WorkloadProfile { usage: usage.into_iter().map(|(m, q)| (MetricId::from(m), q)).collect() }
    }
}

fn fx_table() -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("EUR".to_string(), 1.0),
        ("USD".to_string(), 0.92),
        ("PLN".to_string(), 0.23),
    ])
}

proptest! {
    // Independent oracle: fold over the union of metrics in sorted order
    // instead of walking the plan's rate list.
    #[test]
    fn cost_matches_independent_summation(plan in plan_strategy(), w in workload_strategy()) {
        let fx = fx_table();
        let cost = estimate_monthly_cost(&plan, &w, &fx).unwrap();

        let mut metrics: BTreeSet<MetricId> = w.usage.keys().cloned().collect();
        metrics.extend(plan.rates.iter().map(|r| r.metric.clone()));
        let mut expected = 0.0;
        for metric in &metrics {
            let price = plan.rates.iter().find(|r| &r.metric == metric).map_or(0.0, |r| r.price_per_unit);
            let quantity = w.usage.get(metric).copied().unwrap_or(0.0);
            expected += price * quantity;
        }
        expected = fx[&plan.currency] * (plan.fixed_fee_per_month + expected);

        let scale = expected.abs().max(1.0);
        prop_assert!((cost - expected).abs() / scale <= 1e-9, "{cost} vs {expected}");
    }

    // fixed + a·(metered): scaling usage scales only the metered part.
    #[test]
    fn cost_is_linear_in_usage(plan in plan_strategy(), w in workload_strategy(), a in 0.0f64..8.0) {
        let fx = fx_table();
        let base = estimate_monthly_cost(&plan, &w, &fx).unwrap();
        let scaled_workload = WorkloadProfile {
            usage: w.usage.iter().map(|(m, q)| (m.clone(), q * a)).collect(),
        };
        let scaled = estimate_monthly_cost(&plan, &scaled_workload, &fx).unwrap();
        let fixed = fx[&plan.currency] * plan.fixed_fee_per_month;
        let expected = fixed + a * (base - fixed);
        prop_assert!((scaled - expected).abs() <= 1e-6 * expected.abs().max(1.0), "{scaled} vs {expected}");
    }

    #[test]
    fn cost_is_monotone_in_every_usage_coordinate(
        plan in plan_strategy(),
        w in workload_strategy(),
        bump in 0.0f64..100.0,
    ) {
        let fx = fx_table();
        let base = estimate_monthly_cost(&plan, &w, &fx).unwrap();
        for metric in w.usage.keys() {
            let mut bumped = w.clone();
            *bumped.usage.get_mut(metric).unwrap() += bump;
            let cost = estimate_monthly_cost(&plan, &bumped, &fx).unwrap();
            prop_assert!(cost >= base, "raising {metric} lowered cost: {cost} < {base}");
        }
    }

    #[test]
    fn qos_aggregate_matches_oracle_and_stays_bounded(
        values in prop::collection::vec((1.0f64..1000.0, 0.01f64..1.0), 1..40),
    ) {
        let mut catalog = Catalog::new(CatalogConfig::default());
        catalog.register_product(product("p1")).unwrap();
        let mut last = 0.0;
        for (value, trust) in &values {
            last = catalog.ingest_qos_report(report("p1", LATENCY_METRIC, *value, *trust)).unwrap();
        }
        let num: f64 = values.iter().map(|(v, w)| v * w).sum();
        let den: f64 = values.iter().map(|(_, w)| w).sum();
        let expected = num / den;
        prop_assert!((last - expected).abs() / expected.abs().max(1.0) <= 1e-9);

        let min = values.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
        let max = values.iter().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(last >= min - 1e-9 && last <= max + 1e-9, "{last} outside [{min}, {max}]");
    }

    // All four offer fields recomputed from scratch.
    #[test]
    fn normalized_offer_matches_recomputation(
        fee in 0.0f64..100.0,
        cpu_price in 0.0f64..2.0,
        cpu_usage in 0.0f64..500.0,
        availability in 98.0f64..100.0,
        latency in prop::option::of(10.0f64..500.0),
        encrypted in any::<bool>(),
    ) {
        let mut catalog = Catalog::new(CatalogConfig::default());
        let mut p = product("p1");
        p.pricing.fixed_fee_per_month = fee;
        p.pricing.rates[0].price_per_unit = cpu_price;
        p.sla.availability_pct = availability;
        if encrypted {
            p.sla.security_attrs.insert("encrypted-at-rest".to_string());
        }
        catalog.register_product(p).unwrap();
        if let Some(latency) = latency {
            catalog.ingest_qos_report(report("p1", LATENCY_METRIC, latency, 1.0)).unwrap();
        }

        let w = workload(&[("cpu", cpu_usage)]);
        let offer = catalog
            .normalize_offer(catalog.product(&ProductId::from("p1")).unwrap(), &w)
            .unwrap();

        let expected_cost = fee + cpu_price * cpu_usage;
        prop_assert!((offer.monthly_cost - expected_cost).abs() <= 1e-9 * expected_cost.max(1.0));
        let expected_perf = match latency {
            Some(l) => (100.0 / l).clamp(0.0, 1.0),
            None => 1.0,
        };
        prop_assert_eq!(offer.perf_score, expected_perf);
        prop_assert_eq!(offer.unmeasured, latency.is_none());
        let expected_reliability = ((availability - 99.0) / 1.0).clamp(0.0, 1.0);
        prop_assert!((offer.reliability_score - expected_reliability).abs() <= 1e-12);
        let expected_security = if encrypted { 0.5 } else { 0.0 };
        prop_assert_eq!(offer.security_score, expected_security);
        prop_assert!(offer.monthly_cost >= 0.0);
        for score in [offer.perf_score, offer.reliability_score, offer.security_score] {
            prop_assert!((0.0..=1.0).contains(&score));
        }
    }
}
