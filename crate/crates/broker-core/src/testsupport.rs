//! Pet clinic fixtures shared by unit tests, loaded from the bundled
//! fixture files so tests and the CLI exercise the same data.

use crate::catalog::{Catalog, CatalogConfig, CatalogDocument};
use crate::decision::GovernancePolicy;
use crate::manifest::{parse_manifest, DeploymentManifest};
use crate::model::ApplicationModel;
use crate::catalog::WorkloadProfile;

pub const PETCLINIC_MANIFEST: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/petclinic.manifest"));
pub const PETCLINIC_APP_JSON: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/petclinic-app.json"));
pub const CATALOG_JSON: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/catalog.json"));
pub const WORKLOAD_JSON: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/workload.json"));
pub const POLICY_JSON: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/policy.json"));

pub fn petclinic_manifest() -> DeploymentManifest {
    parse_manifest(PETCLINIC_MANIFEST).expect("fixture manifest parses")
}

pub fn petclinic_app() -> ApplicationModel {
    ApplicationModel::from_json(PETCLINIC_APP_JSON).expect("fixture app parses")
}

pub fn petclinic_catalog() -> Catalog {
    let document: CatalogDocument = serde_json::from_str(CATALOG_JSON).expect("fixture catalog parses");
    Catalog::from_document(document, CatalogConfig::default()).expect("fixture catalog loads")
}

pub fn petclinic_workload() -> WorkloadProfile {
    WorkloadProfile::from_json(WORKLOAD_JSON).expect("fixture workload parses")
}

pub fn petclinic_policy() -> GovernancePolicy {
    GovernancePolicy::from_json(POLICY_JSON).expect("fixture policy parses")
}
