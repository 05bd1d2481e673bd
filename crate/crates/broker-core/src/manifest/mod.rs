//! The cross-cloud deployment governance DSL.
//!
//! A manifest declares the governance lifecycle and binds component
//! selectors to deployment options. The concrete grammar (`#` starts a
//! line comment, whitespace is insignificant):
//!
//! ```text
//! manifest      := "broker" "{" lifecycle stmt* "}"
//! lifecycle     := "governance.lifecycle" "=" ("active" | "passive")
//! stmt          := kindBlock
//! kindBlock     := KIND "{" binding+ "}"
//! KIND          := "dataSource" | "domainClasses" | "controllers" | "views" | "services"
//! binding       := selector option
//! selector      := "all" | nameList | envSel
//! nameList      := "[" STRING ("," STRING)* "]"
//! envSel        := "environments" "[" STRING "]" "." IDENT        # dataSource only
//! option        := "economy" | "bestEffort" | privateCloud
//! privateCloud  := "privateCloud" "(" STRING "," cloudType "," STRING ")"
//! cloudType     := "iaas" | "paas" | "saas"
//! ```

mod parser;
mod serializer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::model::{ApplicationModel, Component, ComponentKind};

pub use parser::{parse_manifest, ParseError};
pub use serializer::serialize_manifest;

/// Cloud delivery models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudType {
    Iaas,
    Paas,
    Saas,
}

impl CloudType {
    pub fn keyword(&self) -> &'static str {
        match self {
            CloudType::Iaas => "iaas",
            CloudType::Paas => "paas",
            CloudType::Saas => "saas",
        }
    }

    pub fn from_keyword(word: &str) -> Option<CloudType> {
        match word {
            "iaas" => Some(CloudType::Iaas),
            "paas" => Some(CloudType::Paas),
            "saas" => Some(CloudType::Saas),
            _ => None,
        }
    }
}

impl fmt::Display for CloudType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Where a component may be placed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "option", rename_all = "camelCase")]
pub enum DeploymentOption {
    /// The cheapest offer whose quality is still acceptable.
    Economy,
    /// A compromise between price and performance.
    BestEffort,
    /// Pinned to an explicitly identified cloud.
    #[serde(rename_all = "camelCase")]
    PrivateCloud {
        endpoint: String,
        cloud_type: CloudType,
        provider_id: String,
    },
}

impl DeploymentOption {
    pub fn is_private_cloud(&self) -> bool {
        matches!(self, DeploymentOption::PrivateCloud { .. })
    }
}

impl fmt::Display for DeploymentOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeploymentOption::Economy => f.write_str("economy"),
            DeploymentOption::BestEffort => f.write_str("bestEffort"),
            DeploymentOption::PrivateCloud { endpoint, cloud_type, provider_id } => {
                write!(f, "privateCloud({endpoint:?}, {cloud_type}, {provider_id:?})")
            }
        }
    }
}

/// Which components of a kind a binding applies to.
///
/// Empty `names` means every component of the kind. An `environment`
/// qualifier restricts the match to components built for that environment
/// and is only legal on `dataSource` selectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentSelector {
    pub kind: ComponentKind,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
}

impl ComponentSelector {
    pub fn all_of(kind: ComponentKind) -> Self {
        ComponentSelector { kind, names: Vec::new(), environment: None }
    }

    pub fn named(kind: ComponentKind, names: impl IntoIterator<Item = impl Into<String>>) -> Self {
        ComponentSelector {
            kind,
            names: names.into_iter().map(Into::into).collect(),
            environment: None,
        }
    }

    pub fn environment(kind: ComponentKind, env: impl Into<String>, name: impl Into<String>) -> Self {
        ComponentSelector { kind, names: vec![name.into()], environment: Some(env.into()) }
    }

    pub fn matches(&self, component: &Component) -> bool {
        if component.kind != self.kind {
            return false;
        }
        if !self.names.is_empty() && !self.names.iter().any(|n| n == &component.name) {
            return false;
        }
        match &self.environment {
            Some(env) => component.environment.as_deref() == Some(env.as_str()),
            None => true,
        }
    }

    /// Specificity rank: named selectors beat environment-qualified
    /// kind-wide selectors, which beat plain kind-wide selectors.
    pub fn specificity(&self) -> u8 {
        let named = if self.names.is_empty() { 0 } else { 2 };
        let env = if self.environment.is_some() { 1 } else { 0 };
        named + env
    }

    /// Identity used for duplicate detection: name order is irrelevant.
    fn identity(&self) -> (ComponentKind, BTreeSet<&str>, Option<&str>) {
        (self.kind, self.names.iter().map(String::as_str).collect(), self.environment.as_deref())
    }
}

/// A selector bound to an option, with the source line for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentBinding {
    pub selector: ComponentSelector,
    pub option: DeploymentOption,
    pub source_line: u32,
}

/// Governance involvement over the application's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lifecycle {
    /// The broker redeploys autonomously on relevant change.
    Active,
    /// The broker only records; replanning happens on command.
    Passive,
}

impl Lifecycle {
    pub fn keyword(&self) -> &'static str {
        match self {
            Lifecycle::Active => "active",
            Lifecycle::Passive => "passive",
        }
    }
}

/// A parsed deployment manifest: lifecycle plus ordered bindings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeploymentManifest {
    pub lifecycle: Lifecycle,
    pub bindings: Vec<ComponentBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("two bindings share the selector at line {0}")]
    DuplicateSelector(u32),
    #[error("selector at line {line} repeats the name {name:?}")]
    DuplicateName { line: u32, name: String },
    #[error("environment qualifier at line {0} is only valid on dataSource selectors")]
    EnvironmentOutsideDataSource(u32),
    #[error("environment selector at line {0} must name exactly one component")]
    EnvironmentNameCount(u32),
    #[error("privateCloud endpoint {endpoint:?} at line {line} is not an absolute URL")]
    InvalidEndpoint { line: u32, endpoint: String },
    #[error("string {0:?} cannot be written in the manifest grammar")]
    UnserializableString(String),
    #[error("environment selector name {0:?} must be an identifier")]
    NotAnIdentifier(String),
}

impl DeploymentManifest {
    pub fn new(lifecycle: Lifecycle, bindings: Vec<ComponentBinding>) -> Result<Self, ManifestError> {
        let manifest = DeploymentManifest { lifecycle, bindings };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Checks the manifest invariants, including that every binding can be
    /// expressed in the concrete grammar (so `serialize` stays total).
    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut seen = BTreeSet::new();
        for binding in &self.bindings {
            let line = binding.source_line;
            let sel = &binding.selector;
            let mut names = BTreeSet::new();
            for name in &sel.names {
                if grammar_string_invalid(name) {
                    return Err(ManifestError::UnserializableString(name.clone()));
                }
                if !names.insert(name.as_str()) {
                    return Err(ManifestError::DuplicateName { line, name: name.clone() });
                }
            }
            if let Some(env) = &sel.environment {
                if sel.kind != ComponentKind::DataSource {
                    return Err(ManifestError::EnvironmentOutsideDataSource(line));
                }
                if sel.names.len() != 1 {
                    return Err(ManifestError::EnvironmentNameCount(line));
                }
                if grammar_string_invalid(env) {
                    return Err(ManifestError::UnserializableString(env.clone()));
                }
                if !is_identifier(&sel.names[0]) {
                    return Err(ManifestError::NotAnIdentifier(sel.names[0].clone()));
                }
            }
            if let DeploymentOption::PrivateCloud { endpoint, provider_id, .. } = &binding.option {
                if grammar_string_invalid(endpoint) || Url::parse(endpoint).is_err() {
                    return Err(ManifestError::InvalidEndpoint { line, endpoint: endpoint.clone() });
                }
                if grammar_string_invalid(provider_id) {
                    return Err(ManifestError::UnserializableString(provider_id.clone()));
                }
            }
            if !seen.insert(sel.identity()) {
                return Err(ManifestError::DuplicateSelector(line));
            }
        }
        Ok(())
    }

    /// Structural equality ignores source lines, which shift whenever a
    /// manifest is reformatted. Binding order still matters: it breaks
    /// specificity ties during resolution.
    pub fn structurally_equals(&self, other: &DeploymentManifest) -> bool {
        self.lifecycle == other.lifecycle
            && self.bindings.len() == other.bindings.len()
            && self
                .bindings
                .iter()
                .zip(&other.bindings)
                .all(|(a, b)| a.selector == b.selector && a.option == b.option)
    }

    /// The distinct options declared anywhere in the manifest.
    pub fn declared_options(&self) -> Vec<&DeploymentOption> {
        let mut out: Vec<&DeploymentOption> = Vec::new();
        for binding in &self.bindings {
            if !out.contains(&&binding.option) {
                out.push(&binding.option);
            }
        }
        out
    }
}

fn grammar_string_invalid(s: &str) -> bool {
    s.is_empty() || s.chars().any(|c| c == '"' || c.is_control())
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("selector at line {line} names unknown {kind} component {name:?}")]
    UnknownComponent { line: u32, kind: ComponentKind, name: String },
    #[error("component {0:?} matches no binding")]
    UnboundComponent(String),
}

/// Maps every application component to the option of its most specific
/// matching binding.
///
/// Specificity is `named > kind-wide-with-environment > kind-wide`;
/// remaining ties go to the earliest source line. Components matched by no
/// binding are an error rather than an implicit default.
pub fn resolve_bindings(
    manifest: &DeploymentManifest,
    app: &ApplicationModel,
) -> Result<BTreeMap<String, DeploymentOption>, ResolveError> {
    for binding in &manifest.bindings {
        let sel = &binding.selector;
        for name in &sel.names {
            let known = app
                .components_of_kind(sel.kind)
                .any(|c| &c.name == name);
            if !known {
                return Err(ResolveError::UnknownComponent {
                    line: binding.source_line,
                    kind: sel.kind,
                    name: name.clone(),
                });
            }
        }
    }

    let mut resolved = BTreeMap::new();
    for component in &app.components {
        let winner = manifest
            .bindings
            .iter()
            .filter(|b| b.selector.matches(component))
            .max_by_key(|b| (b.selector.specificity(), std::cmp::Reverse(b.source_line)))
            .ok_or_else(|| ResolveError::UnboundComponent(component.name.clone()))?;
        resolved.insert(component.name.clone(), winner.option.clone());
    }
    Ok(resolved)
}
