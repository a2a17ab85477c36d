//! Decomposed-project schema: the application classes of a source project
//! and its fragments (methods and fields) with the library types each one
//! mentions.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// How a fragment uses a type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeRole {
    Parameter,
    Return,
    Local,
    Field,
    Body,
}

/// One mention of a type inside a fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeUse {
    pub source_type: String,
    pub line: u32,
    pub symbol: String,
    pub role: TypeRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentKind {
    Method,
    Constructor,
    Field,
}

/// One independently translated unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fragment {
    pub id: String,
    /// Fully qualified declaring class.
    pub class: String,
    /// Source member name (`<init>` for constructors).
    pub name: String,
    pub kind: FragmentKind,
    pub file: String,
    pub start_line: u32,
    pub end_line: u32,
    pub code: String,
    /// Ids of fragments this one calls.
    #[serde(default)]
    pub callees: Vec<String>,
    #[serde(default)]
    pub types: Vec<TypeUse>,
}

/// The whole decomposed project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectFragments {
    pub project: String,
    pub application_classes: Vec<String>,
    pub fragments: Vec<Fragment>,
}

#[derive(Debug, thiserror::Error)]
pub enum FragmentsError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid fragment schema {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
}

impl ProjectFragments {
    pub fn load(path: &Path) -> Result<Self, FragmentsError> {
        let text = std::fs::read_to_string(path).map_err(|source| FragmentsError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|source| FragmentsError::Parse { path: path.display().to_string(), source })
    }

    /// Whether `type_name` (generic arguments and array suffixes ignored)
    /// is an application class.
    pub fn is_application_type(&self, type_name: &str) -> bool {
        let erased = erasure(type_name);
        self.application_classes.iter().any(|c| c == erased || c.replace('$', ".") == erased)
    }

    /// Method and constructor fragments.
    pub fn methods(&self) -> impl Iterator<Item = &Fragment> {
        self.fragments.iter().filter(|f| f.kind != FragmentKind::Field)
    }

    /// Fragment implementing `name` in `class`, if any.
    pub fn method_fragment(&self, class: &str, name: &str) -> Option<&Fragment> {
        self.methods().find(|f| f.class == class && f.name == name)
    }

    pub fn fragment(&self, id: &str) -> Option<&Fragment> {
        self.fragments.iter().find(|f| f.id == id)
    }
}

/// Type name without generic arguments or array brackets.
pub fn erasure(type_name: &str) -> &str {
    let base = type_name.split('<').next().unwrap_or(type_name);
    base.trim_end_matches("[]").trim()
}
