//! Application model: the components a deployment manifest binds.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The component kinds a web application decomposes into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ComponentKind {
    DataSource,
    DomainClasses,
    Controllers,
    Views,
    Services,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 5] = [
        ComponentKind::DataSource,
        ComponentKind::DomainClasses,
        ComponentKind::Controllers,
        ComponentKind::Views,
        ComponentKind::Services,
    ];

    /// The keyword used for this kind in the manifest DSL and in JSON.
    pub fn keyword(&self) -> &'static str {
        match self {
            ComponentKind::DataSource => "dataSource",
            ComponentKind::DomainClasses => "domainClasses",
            ComponentKind::Controllers => "controllers",
            ComponentKind::Views => "views",
            ComponentKind::Services => "services",
        }
    }

    pub fn from_keyword(word: &str) -> Option<ComponentKind> {
        ComponentKind::ALL.iter().copied().find(|k| k.keyword() == word)
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// One deployable part of the application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
    /// Technology tags the hosting product must provide (e.g. "jvm", "mysql").
    pub required_tech: BTreeSet<String>,
    /// Build environment this component belongs to, if any (e.g. "production").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
}

/// The application under governance: an id plus its components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApplicationModel {
    pub app_id: String,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("application id must not be empty")]
    EmptyAppId,
    #[error("component name must not be empty")]
    EmptyComponentName,
    #[error("component {0:?} has no required technology tags")]
    NoRequiredTech(String),
    #[error("duplicate component name {0:?}")]
    DuplicateComponentName(String),
}

impl ApplicationModel {
    pub fn new(app_id: impl Into<String>, components: Vec<Component>) -> Result<Self, ModelError> {
        let model = ApplicationModel { app_id: app_id.into(), components };
        model.validate()?;
        Ok(model)
    }

    /// Checks the model invariants. Names must be unique across the whole
    /// application because binding resolution and deployment plans key on
    /// the bare component name.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.app_id.is_empty() {
            return Err(ModelError::EmptyAppId);
        }
        let mut seen = BTreeSet::new();
        for c in &self.components {
            if c.name.is_empty() {
                return Err(ModelError::EmptyComponentName);
            }
            if c.required_tech.is_empty() {
                return Err(ModelError::NoRequiredTech(c.name.clone()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(ModelError::DuplicateComponentName(c.name.clone()));
            }
        }
        Ok(())
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn components_of_kind(&self, kind: ComponentKind) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(move |c| c.kind == kind)
    }

    /// Parses and validates a model from its JSON form.
    pub fn from_json(text: &str) -> Result<Self, ModelLoadError> {
        let model: ApplicationModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Error)]
pub enum ModelLoadError {
    #[error("invalid application model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}
