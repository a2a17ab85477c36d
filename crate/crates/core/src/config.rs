//! Pipeline configuration, read from TOML. Relative paths resolve against
//! the configuration file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::equality::EqualityConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid configuration {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolverMode {
    /// Committed rule table (or the built-in one); fully offline.
    #[default]
    Rules,
    /// OpenAI-compatible chat endpoint.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolverConfig {
    pub mode: ResolverMode,
    /// Rule table for `rules` mode; the built-in table when absent.
    pub rules: Option<PathBuf>,
    pub url: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: f64,
    /// Directory of `<type>.txt` documentation files used before the network.
    pub docs_dir: Option<PathBuf>,
    /// Fetch missing documentation from the online API reference.
    pub online_docs: bool,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        Self { mode: ResolverMode::Rules, rules: None, url: None, model: None, timeout_secs: 60.0, docs_dir: None, online_docs: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslatorMode {
    /// Committed translation files.
    #[default]
    Fixture,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslatorConfig {
    pub mode: TranslatorMode,
    pub url: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: f64,
}

impl Default for TranslatorConfig {
    fn default() -> Self {
        Self { mode: TranslatorMode::Fixture, url: None, model: None, timeout_secs: 120.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub name: String,
    /// Directory holding the decomposed project (`schema.json`).
    pub source_root: PathBuf,
    pub trace_dir: PathBuf,
    /// Root of the translated project's modules.
    pub translated_src_dir: PathBuf,
    /// Fixture-translator directories, searched in order.
    #[serde(default)]
    pub translations: Vec<PathBuf>,
    /// Results of the translated source tests, if they were run.
    #[serde(default)]
    pub test_results: Option<PathBuf>,
    /// Focal methods (`Class#method`) whose tests are reported as skipped.
    #[serde(default)]
    pub nondet_allowlist: Vec<String>,
}

impl ProjectConfig {
    pub fn schema_path(&self) -> PathBuf {
        self.source_root.join("schema.json")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub out_dir: PathBuf,
    #[serde(default = "default_budget")]
    pub budget: u32,
    #[serde(default = "default_test_timeout")]
    pub test_timeout_secs: f64,
    #[serde(default)]
    pub resolver: ResolverConfig,
    #[serde(default)]
    pub translator: TranslatorConfig,
    #[serde(default)]
    pub equality: EqualityConfig,
    #[serde(default)]
    pub projects: Vec<ProjectConfig>,
}

fn default_budget() -> u32 {
    crate::typeres::DEFAULT_BUDGET
}

fn default_test_timeout() -> f64 {
    10.0
}

impl Config {
    /// Reads and validates `path`; relative paths become absolute.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg: Config = toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.display().to_string(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(p) = &mut self.resolver.rules {
            fix(p);
        }
        if let Some(p) = &mut self.resolver.docs_dir {
            fix(p);
        }
        for pr in &mut self.projects {
            fix(&mut pr.source_root);
            fix(&mut pr.trace_dir);
            fix(&mut pr.translated_src_dir);
            pr.translations.iter_mut().for_each(fix);
            if let Some(p) = &mut pr.test_results {
                fix(p);
            }
        }
    }

    /// Checks values and that every input path exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.budget == 0 {
            return Err(ConfigError::Invalid("budget must be at least 1".into()));
        }
        if self.test_timeout_secs.is_nan() || self.test_timeout_secs <= 0.0 {
            return Err(ConfigError::Invalid("test_timeout_secs must be positive".into()));
        }
        self.equality.validate().map_err(ConfigError::Invalid)?;
        let mut names = std::collections::BTreeSet::new();
        for p in &self.projects {
            if !names.insert(&p.name) {
                return Err(ConfigError::Invalid(format!("duplicate project {}", p.name)));
            }
            let mut paths = vec![("source_root", &p.source_root), ("trace_dir", &p.trace_dir), ("translated_src_dir", &p.translated_src_dir)];
            paths.extend(p.translations.iter().map(|t| ("translations", t)));
            if let Some(t) = &p.test_results {
                paths.push(("test_results", t));
            }
            for (key, path) in paths {
                if !path.exists() {
                    return Err(ConfigError::Invalid(format!("project {}: {key} {} does not exist", p.name, path.display())));
                }
            }
        }
        if let Some(r) = &self.resolver.rules {
            if !r.exists() {
                return Err(ConfigError::Invalid(format!("resolver rules {} does not exist", r.display())));
            }
        }
        if self.resolver.mode == ResolverMode::Remote && self.resolver.url.is_none() {
            return Err(ConfigError::Invalid("remote resolver needs resolver.url".into()));
        }
        if self.translator.mode == TranslatorMode::Remote && self.translator.url.is_none() {
            return Err(ConfigError::Invalid("remote translator needs translator.url".into()));
        }
        Ok(())
    }

    /// Projects selected by an optional name filter.
    pub fn select(&self, name: Option<&str>) -> Result<Vec<&ProjectConfig>, ConfigError> {
        match name {
            None => Ok(self.projects.iter().collect()),
            Some(n) => match self.projects.iter().find(|p| p.name == n) {
                Some(p) => Ok(vec![p]),
                None => Err(ConfigError::Invalid(format!("no project named {n}"))),
            },
        }
    }

    pub fn ctm_dir(&self) -> PathBuf {
        self.out_dir.join("ctm")
    }

    pub fn project_dir(&self, project: &str) -> PathBuf {
        self.out_dir.join(project)
    }

    pub fn mock_test_dir(&self, project: &str) -> PathBuf {
        self.project_dir(project).join("mock_tests")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_and_rebases() {
        let d = tempfile::tempdir().unwrap();
        for sub in ["src", "traces", "py"] {
            std::fs::create_dir(d.path().join(sub)).unwrap();
        }
        let text = r#"
out_dir = "out"
[equality]
float_rel_tol = 1e-6
[[projects]]
name = "p"
source_root = "src"
trace_dir = "traces"
translated_src_dir = "py"
"#;
        let path = d.path().join("xlv.toml");
        std::fs::write(&path, text).unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.budget, 4);
        assert_eq!(cfg.out_dir, d.path().join("out"));
        assert_eq!(cfg.projects[0].trace_dir, d.path().join("traces"));
        assert_eq!(cfg.equality.float_rel_tol, 1e-6);
        assert!(cfg.select(Some("q")).is_err());
    }

    #[test]
    fn missing_paths_are_rejected() {
        let d = tempfile::tempdir().unwrap();
        let path = d.path().join("xlv.toml");
        std::fs::write(&path, "out_dir = \"o\"\n[[projects]]\nname=\"p\"\nsource_root=\"nope\"\ntrace_dir=\"nope\"\ntranslated_src_dir=\"nope\"\n")
            .unwrap();
        assert!(matches!(Config::load(&path), Err(ConfigError::Invalid(_))));
        std::fs::write(&path, "out_dir = \"o\"\nbogus = 1\n").unwrap();
        assert!(matches!(Config::load(&path), Err(ConfigError::Parse { .. })));
    }
}
