//! `broker`: batch interface to the cross-cloud deployment governance
//! broker. Manages the product catalog, produces dry-run plans, runs
//! simulated scenarios, and explains placement decisions.
//!
//! Structured output is JSON on stdout; diagnostics go to stderr. Exit
//! codes are a stable contract: 0 success, 2 usage or I/O, 3 validation,
//! 4 infeasible plan, 5 scenario error.

mod lock;

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use broker_core::catalog::{
    money, Catalog, CatalogConfig, CatalogDocument, CloudProduct, ProductUpdateRecord,
    WorkloadProfile,
};
use broker_core::decision::{
    decide, rank_best_effort, rank_economy, total_plan_cost, DecisionError, DeploymentPlan,
    GovernancePolicy,
};
use broker_core::event::ProductId;
use broker_core::manifest::{parse_manifest, resolve_bindings, DeploymentManifest, DeploymentOption};
use broker_core::model::ApplicationModel;
use broker_core::simcloud::{run_scenario, Scenario, ScenarioError};

const EXIT_USAGE_IO: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_SCENARIO: u8 = 5;

#[derive(Parser)]
#[command(name = "broker", version, about = "Cross-cloud deployment governance broker")]
struct Cli {
    /// Catalog document (created on first `catalog add` if missing)
    #[arg(short = 'C', long, global = true, default_value = "catalog.json")]
    catalog: PathBuf,

    /// Governance policy JSON; defaults apply when omitted
    #[arg(long, global = true)]
    policy: Option<PathBuf>,

    /// Reference currency used when creating a fresh catalog
    #[arg(long, global = true, default_value = "EUR")]
    currency: String,

    /// Default output path for simulation event logs
    #[arg(long, global = true)]
    log: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage the cloud product catalog
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Compute a deployment plan without enforcing it (dry run)
    Plan(PlanArgs),
    /// Run a scripted scenario against simulated providers
    Simulate(SimulateArgs),
    /// Show every candidate for a component and why the winner won
    Explain(ExplainArgs),
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Register a product from a JSON record file
    Add { record_file: PathBuf },
    /// List products in registry order
    List,
    /// Apply a product patch from a JSON record file
    Update { record_file: PathBuf },
}

#[derive(Args)]
struct PlanArgs {
    /// Deployment manifest (DSL text)
    #[arg(short = 'm', long)]
    manifest: PathBuf,
    /// Application model JSON
    #[arg(short = 'a', long)]
    app: PathBuf,
    /// Workload profile JSON
    #[arg(short = 'w', long)]
    workload: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario script JSON
    #[arg(short = 's', long)]
    scenario: PathBuf,
    #[arg(short = 'm', long)]
    manifest: PathBuf,
    #[arg(short = 'a', long)]
    app: PathBuf,
    #[arg(short = 'w', long)]
    workload: PathBuf,
    /// Override the scenario's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's tick count
    #[arg(long)]
    ticks: Option<u64>,
    /// Event log output path (falls back to --log)
    #[arg(short = 'o', long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    /// Deployment plan JSON (as printed by `broker plan`)
    #[arg(short = 'p', long)]
    plan: PathBuf,
    /// Component to explain
    #[arg(short = 'c', long)]
    component: String,
    #[arg(short = 'm', long)]
    manifest: PathBuf,
    #[arg(short = 'a', long)]
    app: PathBuf,
    #[arg(short = 'w', long)]
    workload: PathBuf,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Display) -> Self {
        CliError { code, message: message.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_error(context: &str, err: impl Display) -> CliError {
    CliError::new(EXIT_USAGE_IO, format!("{context}: {err}"))
}

fn validation_error(context: &str, err: impl Display) -> CliError {
    CliError::new(EXIT_VALIDATION, format!("{context}: {err}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("broker: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let _lock = lock::FileLock::acquire(&cli.catalog.with_extension("lock"))
        .map_err(|e| io_error("acquiring catalog lock", e))?;
    match &cli.command {
        Command::Catalog { action } => match action {
            CatalogAction::Add { record_file } => cmd_catalog_add(cli, record_file),
            CatalogAction::List => cmd_catalog_list(cli),
            CatalogAction::Update { record_file } => cmd_catalog_update(cli, record_file),
        },
        Command::Plan(args) => cmd_plan(cli, args),
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Explain(args) => cmd_explain(cli, args),
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_error(&format!("reading {}", path.display()), e))
}

fn load_catalog(cli: &Cli) -> CliResult<Catalog> {
    let config = CatalogConfig {
        reference_currency: cli.currency.clone(),
        ..CatalogConfig::default()
    };
    if !cli.catalog.exists() {
        return Ok(Catalog::new(config));
    }
    let text = read_file(&cli.catalog)?;
    let document: CatalogDocument = serde_json::from_str(&text)
        .map_err(|e| validation_error(&format!("parsing {}", cli.catalog.display()), e))?;
    Catalog::from_document(document, config)
        .map_err(|e| validation_error(&format!("loading {}", cli.catalog.display()), e))
}

fn save_catalog(cli: &Cli, catalog: &Catalog) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&catalog.to_document()).expect("document serializes");
    fs::write(&cli.catalog, text + "\n")
        .map_err(|e| io_error(&format!("writing {}", cli.catalog.display()), e))
}

fn load_policy(cli: &Cli) -> CliResult<GovernancePolicy> {
    match &cli.policy {
        None => Ok(GovernancePolicy::default()),
        Some(path) => {
            let text = read_file(path)?;
            GovernancePolicy::from_json(&text)
                .map_err(|e| validation_error(&format!("parsing {}", path.display()), e))
        }
    }
}

fn load_manifest(path: &Path) -> CliResult<DeploymentManifest> {
    let text = read_file(path)?;
    parse_manifest(&text).map_err(|e| validation_error(&format!("parsing {}", path.display()), e))
}

fn load_app(path: &Path) -> CliResult<ApplicationModel> {
    let text = read_file(path)?;
    ApplicationModel::from_json(&text)
        .map_err(|e| validation_error(&format!("parsing {}", path.display()), e))
}

fn load_workload(path: &Path) -> CliResult<WorkloadProfile> {
    let text = read_file(path)?;
    WorkloadProfile::from_json(&text)
        .map_err(|e| validation_error(&format!("parsing {}", path.display()), e))
}

// ---------------------------------------------------------------------------
// catalog
// ---------------------------------------------------------------------------

fn cmd_catalog_add(cli: &Cli, record_file: &Path) -> CliResult<()> {
    let text = read_file(record_file)?;
    let product: CloudProduct = serde_json::from_str(&text)
        .map_err(|e| validation_error(&format!("parsing {}", record_file.display()), e))?;
    let mut catalog = load_catalog(cli)?;
    let product_id = product.product_id.clone();
    let update = catalog
        .register_product(product)
        .map_err(|e| validation_error("registering product", e))?;
    save_catalog(cli, &catalog)?;
    println!(
        "{}",
        json!({"registered": product_id, "catalogRevision": update.revision})
    );
    Ok(())
}

fn cmd_catalog_list(cli: &Cli) -> CliResult<()> {
    let catalog = load_catalog(cli)?;
    for product in catalog.list_products() {
        let line = json!({
            "productId": product.product_id,
            "providerId": product.provider_id,
            "cloudType": product.cloud_type,
            "status": product.status,
            "marketVolumeRank": product.market_volume_rank,
            "standards": product.standards,
        });
        println!("{line}");
    }
    Ok(())
}

fn cmd_catalog_update(cli: &Cli, record_file: &Path) -> CliResult<()> {
    let text = read_file(record_file)?;
    let record: ProductUpdateRecord = serde_json::from_str(&text)
        .map_err(|e| validation_error(&format!("parsing {}", record_file.display()), e))?;
    let mut catalog = load_catalog(cli)?;
    let update = catalog
        .update_product(&record.product_id, &record.patch)
        .map_err(|e| validation_error("updating product", e))?;
    save_catalog(cli, &catalog)?;
    println!(
        "{}",
        json!({"productId": record.product_id, "catalogRevision": update.revision, "events": update.events})
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

fn cmd_plan(cli: &Cli, args: &PlanArgs) -> CliResult<()> {
    let manifest = load_manifest(&args.manifest)?;
    let app = load_app(&args.app)?;
    let workload = load_workload(&args.workload)?;
    let catalog = load_catalog(cli)?;
    let policy = load_policy(cli)?;

    let plan = decide(&manifest, &app, &catalog, &policy, &workload, 0, 0).map_err(plan_error)?;
    println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
    Ok(())
}

fn plan_error(err: DecisionError) -> CliError {
    match &err {
        DecisionError::NoFeasibleProduct { component, option } => CliError::new(
            EXIT_INFEASIBLE,
            format!("no feasible product for component {component:?} under option {option}"),
        ),
        _ => validation_error("planning", err),
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> CliResult<()> {
    let manifest = load_manifest(&args.manifest)?;
    let app = load_app(&args.app)?;
    let workload = load_workload(&args.workload)?;
    let catalog = load_catalog(cli)?;
    let policy = load_policy(cli)?;

    let text = read_file(&args.scenario)?;
    let mut scenario = Scenario::from_json(&text).map_err(scenario_error)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(ticks) = args.ticks {
        scenario.ticks = ticks;
        scenario.timeline.retain(|entry| entry.tick <= ticks);
    }

    let out_path = args
        .out
        .clone()
        .or_else(|| cli.log.clone())
        .ok_or_else(|| CliError::new(EXIT_USAGE_IO, "no log output path; pass -o or --log"))?;

    let outcome = run_scenario(&scenario, &manifest, &app, &policy, &workload, catalog)
        .map_err(scenario_error)?;
    fs::write(&out_path, outcome.log.to_ndjson())
        .map_err(|e| io_error(&format!("writing {}", out_path.display()), e))?;

    let final_plan = outcome.broker.plan();
    let total_cost = total_plan_cost(final_plan, outcome.broker.catalog(), &workload)
        .map_err(|e| validation_error("costing final plan", e))?;
    println!(
        "{}",
        json!({
            "finalRevision": final_plan.revision,
            "totalMonthlyCost": money::format_money(total_cost),
            "currency": outcome.broker.catalog().reference_currency(),
            "records": outcome.log.records.len(),
            "log": out_path,
        })
    );
    Ok(())
}

fn scenario_error(err: ScenarioError) -> CliError {
    CliError::new(EXIT_SCENARIO, err)
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

fn cmd_explain(cli: &Cli, args: &ExplainArgs) -> CliResult<()> {
    let manifest = load_manifest(&args.manifest)?;
    let app = load_app(&args.app)?;
    let workload = load_workload(&args.workload)?;
    let catalog = load_catalog(cli)?;
    let policy = load_policy(cli)?;

    let plan_text = read_file(&args.plan)?;
    let plan: DeploymentPlan = serde_json::from_str(&plan_text)
        .map_err(|e| validation_error(&format!("parsing {}", args.plan.display()), e))?;

    let component = app
        .component(&args.component)
        .ok_or_else(|| CliError::new(EXIT_USAGE_IO, format!("unknown component {:?}", args.component)))?;
    let options = resolve_bindings(&manifest, &app)
        .map_err(|e| validation_error("resolving bindings", e))?;
    let option = &options[&component.name];
    let assigned = plan.assignment(&component.name).map(|a| a.product_id.clone());

    let feasible: Vec<&CloudProduct> = catalog
        .active_products()
        .filter(|p| broker_core::decision::feasible(component, option, p))
        .collect();
    let offers: Vec<broker_core::catalog::NormalizedOffer> = feasible
        .iter()
        .map(|p| catalog.normalize_offer(p, &workload))
        .collect::<Result<_, _>>()
        .map_err(|e| validation_error("normalizing offers", e))?;

    let mut candidates = Vec::new();
    let winner;
    let reason;
    match option {
        DeploymentOption::PrivateCloud { .. } => {
            let mut ids: Vec<&ProductId> = offers.iter().map(|o| &o.product_id).collect();
            ids.sort();
            let Some(first) = ids.first() else {
                return Err(CliError::new(
                    EXIT_INFEASIBLE,
                    format!("no product matches the privateCloud pin for {:?}", component.name),
                ));
            };
            winner = (*first).clone();
            reason = "privateCloud pin".to_string();
            for offer in &offers {
                candidates.push(candidate_row(offer, None));
            }
        }
        DeploymentOption::Economy => {
            let ranked = rank_economy(&offers, &policy)
                .map_err(|e| CliError::new(EXIT_INFEASIBLE, e.to_string()))?;
            winner = ranked[0].product_id.clone();
            reason = economy_reason(&ranked);
            for offer in &ranked {
                candidates.push(candidate_row(offer, None));
            }
        }
        DeploymentOption::BestEffort => {
            let ranked = rank_best_effort(&offers, &policy)
                .map_err(|e| CliError::new(EXIT_INFEASIBLE, e.to_string()))?;
            winner = ranked[0].offer.product_id.clone();
            reason = best_effort_reason(&ranked);
            for scored in &ranked {
                candidates.push(candidate_row(&scored.offer, Some(scored.score)));
            }
        }
    }

    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "component": component.name,
            "option": option,
            "winner": winner,
            "reason": reason,
            "assignedInPlan": assigned,
            "assignmentMatchesCurrentRanking": assigned.as_ref() == Some(&winner),
            "candidates": candidates,
        }))
        .expect("explanation serializes")
    );
    Ok(())
}

fn candidate_row(offer: &broker_core::catalog::NormalizedOffer, score: Option<f64>) -> serde_json::Value {
    let mut row = json!({
        "productId": offer.product_id,
        "monthlyCost": money::format_money(offer.monthly_cost),
        "perfScore": offer.perf_score,
        "reliabilityScore": offer.reliability_score,
        "securityScore": offer.security_score,
        "unmeasured": offer.unmeasured,
    });
    if let Some(score) = score {
        row["compositeScore"] = json!(score);
    }
    row
}

fn economy_reason(ranked: &[broker_core::catalog::NormalizedOffer]) -> String {
    if ranked.len() == 1 {
        return "only feasible offer meeting thresholds".to_string();
    }
    let head = &ranked[0];
    let runner = &ranked[1];
    if head.monthly_cost < runner.monthly_cost {
        "lowest monthly cost".to_string()
    } else if head.perf_score > runner.perf_score {
        "cost tie broken by perfScore".to_string()
    } else {
        "cost and perfScore tie broken by productId".to_string()
    }
}

fn best_effort_reason(ranked: &[broker_core::decision::ScoredOffer]) -> String {
    if ranked.len() == 1 {
        return "only feasible offer meeting thresholds".to_string();
    }
    let head = &ranked[0];
    let runner = &ranked[1];
    if head.score > runner.score {
        "highest composite price/performance score".to_string()
    } else if head.offer.monthly_cost < runner.offer.monthly_cost {
        "score tie broken by monthly cost".to_string()
    } else {
        "score and cost tie broken by productId".to_string()
    }
}
