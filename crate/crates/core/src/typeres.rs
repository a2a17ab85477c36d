//! Context-aware type resolution: every library type mentioned by a
//! fragment is mapped to a target type using its documentation and the code
//! around the mention.
//!
//! Resolution of one occurrence asks a [`Resolver`] for a candidate and
//! validates it by loading its imports and evaluating the type expression in
//! a fresh interpreter; failures are fed back into the next request until the
//! attempt budget runs out. Unresolved occurrences then take the most common
//! validated mapping of the same source type from any project, and finally
//! the universal base type `object`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use xlv_runtime::parser::parse_expression;
use xlv_runtime::{Interp, RunError, Value};

use crate::fragments::{erasure, ProjectFragments};

/// Attempts per query shared by every feedback loop.
pub const DEFAULT_BUDGET: u32 = 4;

/// Universal base type of the target language.
pub const OBJECT_TYPE: &str = "object";

const PRIMITIVES: [&str; 9] = ["void", "int", "long", "short", "byte", "char", "boolean", "float", "double"];

/// Where a type is mentioned.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub file: String,
    pub line: u32,
    pub symbol: String,
}

/// One mention of a library type in a project.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TypeOccurrence {
    pub project: String,
    pub source_type: String,
    pub site: Site,
    pub fragment_id: String,
    pub context_code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Resolved,
    Global,
    FallbackObject,
}

/// A target type for one occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeMapping {
    pub target_type: String,
    pub target_imports: Vec<String>,
    pub reasoning: String,
    pub provenance: Provenance,
    pub validated: bool,
}

impl TypeMapping {
    pub fn fallback() -> Self {
        Self {
            target_type: OBJECT_TYPE.into(),
            target_imports: Vec::new(),
            reasoning: "no validated mapping found; using the universal base type".into(),
            provenance: Provenance::FallbackObject,
            validated: false,
        }
    }
}

/// Everything a resolver sees for one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolveRequest {
    pub source_type: String,
    pub doc_text: String,
    pub context_code: String,
    /// Validation errors of earlier attempts, oldest first.
    pub feedback: Vec<String>,
}

/// A resolver's proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub target_type: String,
    #[serde(default)]
    pub target_imports: Vec<String>,
    #[serde(default)]
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolverError {
    /// The endpoint could not be reached or refused the request.
    #[error("resolver transport failure: {0}")]
    Transport(String),
    /// The endpoint answered but the answer was unusable.
    #[error("unusable resolver reply: {0}")]
    Malformed(String),
}

/// A source of target-type proposals.
pub trait Resolver {
    fn resolve(&self, req: &ResolveRequest) -> Result<Candidate, ResolverError>;
}

// ---------------------------------------------------------------------------
// Occurrence collection

/// One occurrence per (site, source type) of every non-application,
/// non-primitive type mentioned by the project's fragments.
pub fn collect_types(project: &ProjectFragments) -> Vec<TypeOccurrence> {
    let mut out = BTreeSet::new();
    for f in &project.fragments {
        for t in &f.types {
            let erased = erasure(&t.source_type);
            if PRIMITIVES.contains(&erased) || project.is_application_type(&t.source_type) {
                continue;
            }
            out.insert(TypeOccurrence {
                project: project.project.clone(),
                source_type: t.source_type.clone(),
                site: Site { file: f.file.clone(), line: t.line, symbol: t.symbol.clone() },
                fragment_id: f.id.clone(),
                context_code: f.code.clone(),
            });
        }
    }
    let mut seen = BTreeSet::new();
    out.into_iter().filter(|o| seen.insert((o.site.clone(), o.source_type.clone()))).collect()
}

// ---------------------------------------------------------------------------
// Documentation

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("documentation fetch failed for {source_type}: {msg}")]
pub struct NetworkError {
    pub source_type: String,
    pub msg: String,
}

/// A documentation backend.
pub trait DocSource {
    /// `Ok(None)` when the backend has no page for the type.
    fn fetch(&self, source_type: &str) -> Result<Option<String>, NetworkError>;
    /// Whether fetching needs the network (skipped in offline mode).
    fn is_remote(&self) -> bool;
}

/// Official API documentation pages, one HTML page per class.
pub struct JavadocSource {
    pub base_url: String,
    pub timeout: Duration,
}

impl Default for JavadocSource {
    fn default() -> Self {
        Self { base_url: "https://docs.oracle.com/javase/8/docs/api/".into(), timeout: Duration::from_secs(20) }
    }
}

impl JavadocSource {
    pub fn url_for(&self, source_type: &str) -> String {
        let path = erasure(source_type).replace('.', "/").replace('$', ".");
        format!("{}/{path}.html", self.base_url.trim_end_matches('/'))
    }
}

impl DocSource for JavadocSource {
    fn fetch(&self, source_type: &str) -> Result<Option<String>, NetworkError> {
        let err = |msg: String| NetworkError { source_type: source_type.into(), msg };
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        match agent.get(&self.url_for(source_type)).call() {
            Ok(resp) => resp.into_string().map(|html| Some(html_to_text(&html))).map_err(|e| err(e.to_string())),
            Err(ureq::Error::Status(404, _)) => Ok(None),
            Err(e) => Err(err(e.to_string())),
        }
    }

    fn is_remote(&self) -> bool {
        true
    }
}

/// Local documentation tree: `<root>/<fully.qualified.Type>.txt`.
pub struct FileTreeDocs {
    pub root: PathBuf,
}

impl DocSource for FileTreeDocs {
    fn fetch(&self, source_type: &str) -> Result<Option<String>, NetworkError> {
        Ok(std::fs::read_to_string(self.root.join(format!("{}.txt", erasure(source_type)))).ok())
    }

    fn is_remote(&self) -> bool {
        false
    }
}

/// On-disk cache of fetched documentation, keyed by erased type name.
#[derive(Debug, Clone, Default)]
pub struct DocCache {
    pub dir: Option<PathBuf>,
}

impl DocCache {
    fn path(&self, source_type: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.txt", erasure(source_type))))
    }

    pub fn get(&self, source_type: &str) -> Option<String> {
        std::fs::read_to_string(self.path(source_type)?).ok()
    }

    pub fn put(&self, source_type: &str, text: &str) {
        if let Some(p) = self.path(source_type) {
            if let Some(parent) = p.parent() {
                let _ = std::fs::create_dir_all(parent);
            }
            let _ = std::fs::write(p, text);
        }
    }
}

/// Documentation text for `source_type`: cache first, then the backend.
/// Returns `""` when nothing is available; a remote backend is skipped when
/// `offline` is set, so errors surface only for a cold cache while online.
pub fn fetch_doc(source_type: &str, cache: &DocCache, source: Option<&dyn DocSource>, offline: bool) -> Result<String, NetworkError> {
    if let Some(text) = cache.get(source_type) {
        return Ok(text);
    }
    let Some(src) = source else { return Ok(String::new()) };
    if offline && src.is_remote() {
        return Ok(String::new());
    }
    match src.fetch(source_type)? {
        Some(text) => {
            cache.put(source_type, &text);
            Ok(text)
        }
        None => Ok(String::new()),
    }
}

/// Visible text of an HTML page: tags and scripts dropped, entities decoded,
/// whitespace collapsed.
pub fn html_to_text(html: &str) -> String {
    let mut out = String::new();
    let mut rest = html;
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        out.push(' ');
        let after = &rest[open..];
        let lower = after.get(..7).unwrap_or("").to_ascii_lowercase();
        let close = if lower.starts_with("<script") || lower.starts_with("<style") {
            let tag = if lower.starts_with("<script") { "</script>" } else { "</style>" };
            after.to_ascii_lowercase().find(tag).map(|i| i + tag.len())
        } else {
            after.find('>').map(|i| i + 1)
        };
        match close {
            Some(c) => rest = &after[c..],
            None => {
                rest = "";
            }
        }
    }
    out.push_str(rest);
    let decoded =
        out.replace("&lt;", "<").replace("&gt;", ">").replace("&quot;", "\"").replace("&#39;", "'").replace("&nbsp;", " ").replace("&amp;", "&");
    decoded.split_whitespace().collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Resolvers

/// One entry of a rule table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    /// Erased source type the rule applies to.
    pub source_type: String,
    /// Substring the usage context must contain; absent matches any context.
    #[serde(default)]
    pub context: Option<String>,
    pub target_type: String,
    #[serde(default)]
    pub imports: Vec<String>,
    #[serde(default)]
    pub reasoning: String,
}

/// Deterministic offline resolver: the first rule whose type and context
/// pattern match wins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTableResolver {
    pub rules: Vec<Rule>,
}

impl RuleTableResolver {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Built-in table covering common collection, stream and text types.
    pub fn builtin() -> Self {
        let r = |t: &str, ctx: Option<&str>, target: &str, imports: &[&str], why: &str| Rule {
            source_type: t.into(),
            context: ctx.map(Into::into),
            target_type: target.into(),
            imports: imports.iter().map(|s| s.to_string()).collect(),
            reasoning: why.into(),
        };
        Self {
            rules: vec![
                r(
                    "java.util.List",
                    Some("unmodifiableList"),
                    "tuple",
                    &[],
                    "the list is wrapped as unmodifiable, so an immutable sequence preserves its contract",
                ),
                r("java.util.List", Some("List.of("), "tuple", &[], "List.of builds an immutable list"),
                r("java.util.List", None, "list", &[], "a modifiable ordered sequence"),
                r("java.util.ArrayList", None, "list", &[], "a modifiable ordered sequence"),
                r("java.util.LinkedList", None, "list", &[], "a modifiable ordered sequence"),
                r("java.util.Collection", None, "list", &[], "a generic collection used as a sequence"),
                r("java.util.Map", None, "dict", &[], "dictionaries preserve insertion order"),
                r("java.util.HashMap", None, "dict", &[], "hash map"),
                r("java.util.LinkedHashMap", None, "dict", &[], "dictionaries preserve insertion order"),
                r("java.util.TreeMap", None, "dict", &[], "mapping; ordering is applied by callers"),
                r("java.util.Set", None, "set", &[], "hash set"),
                r("java.util.HashSet", None, "set", &[], "hash set"),
                r("java.util.LinkedHashSet", None, "set", &[], "hash set"),
                r("java.util.Iterator", None, "typing.Iterator", &["import typing"], "iterator protocol"),
                r("java.lang.Iterable", None, "typing.Iterable", &["import typing"], "iterable protocol"),
                r("java.lang.String", None, "str", &[], "immutable text"),
                r("java.lang.CharSequence", None, "str", &[], "immutable text"),
                r("java.lang.Character", None, "str", &[], "single-character text"),
                r("java.lang.Integer", None, "int", &[], "integer"),
                r("java.lang.Long", None, "int", &[], "integer"),
                r("java.lang.Short", None, "int", &[], "integer"),
                r("java.lang.Byte", None, "int", &[], "integer"),
                r("java.math.BigInteger", None, "int", &[], "arbitrary-precision integer"),
                r("java.lang.Double", None, "float", &[], "binary64 float"),
                r("java.lang.Float", None, "float", &[], "binary float"),
                r("java.lang.Boolean", None, "bool", &[], "boolean"),
                r("java.lang.Object", None, "object", &[], "universal base type"),
                r("java.lang.StringBuffer", None, "io.StringIO", &["import io"], "appendable text buffer"),
                r("java.lang.StringBuilder", None, "io.StringIO", &["import io"], "appendable text buffer"),
                r("java.lang.Appendable", None, "io.StringIO", &["import io"], "appendable character sink"),
                r("java.io.Writer", None, "io.StringIO", &["import io"], "character sink"),
                r("java.io.StringWriter", None, "io.StringIO", &["import io"], "character sink"),
                r("java.io.Reader", None, "io.StringIO", &["import io"], "character source"),
                r("java.nio.CharBuffer", None, "bytearray", &[], "a mutable buffer that is read and written in place"),
                r("java.io.InputStream", None, "io.BytesIO", &["import io"], "byte source"),
                r("java.io.ByteArrayInputStream", None, "io.BytesIO", &["import io"], "in-memory byte source"),
                r("java.io.OutputStream", None, "io.BytesIO", &["import io"], "byte sink"),
                r("java.io.ByteArrayOutputStream", None, "io.BytesIO", &["import io"], "in-memory byte sink"),
                r("java.time.Duration", None, "datetime.timedelta", &["import datetime"], "time span"),
                r("java.lang.IllegalArgumentException", None, "ValueError", &[], "invalid argument"),
                r("java.lang.IllegalStateException", None, "RuntimeError", &[], "invalid state"),
                r("java.lang.RuntimeException", None, "RuntimeError", &[], "unchecked failure"),
                r("java.lang.Exception", None, "Exception", &[], "base exception"),
            ],
        }
    }
}

impl Resolver for RuleTableResolver {
    fn resolve(&self, req: &ResolveRequest) -> Result<Candidate, ResolverError> {
        let erased = erasure(&req.source_type);
        self.rules
            .iter()
            .find(|r| r.source_type == erased && r.context.as_ref().is_none_or(|c| req.context_code.contains(c.as_str())))
            .map(|r| Candidate { target_type: r.target_type.clone(), target_imports: r.imports.clone(), reasoning: r.reasoning.clone() })
            .ok_or_else(|| ResolverError::Malformed(format!("no rule for {erased}")))
    }
}

/// Default request text; `{source_type}`, `{documentation}`, `{usage}` and
/// `{feedback}` are substituted.
pub const DEFAULT_PROMPT: &str = "Translate the Java type `{source_type}` into the Python type that best preserves its behaviour at this usage site.\n\n\
Documentation of the Java type:\n{documentation}\n\n\
Code that uses the type:\n```java\n{usage}\n```\n\n\
{feedback}\
Reply with a single JSON object with keys \"target_type\" (a Python type expression), \"target_imports\" (a list of Python import statements the type needs) and \"reasoning\" (one or two sentences).";

/// Fills the prompt template for one request.
pub fn render_prompt(template: &str, req: &ResolveRequest) -> String {
    let feedback = if req.feedback.is_empty() {
        String::new()
    } else {
        let lines: Vec<String> = req.feedback.iter().enumerate().map(|(i, f)| format!("Attempt {}: {f}", i + 1)).collect();
        format!("Earlier answers failed validation:\n{}\n\n", lines.join("\n"))
    };
    let doc = if req.doc_text.is_empty() { "(not available)" } else { req.doc_text.as_str() };
    template
        .replace("{source_type}", &req.source_type)
        .replace("{documentation}", doc)
        .replace("{usage}", &req.context_code)
        .replace("{feedback}", &feedback)
}

/// Chat-completions client for an OpenAI-compatible endpoint.
pub struct RemoteResolver {
    pub url: String,
    pub model: String,
    pub key: Option<String>,
    pub prompt: String,
    pub timeout: Duration,
}

impl RemoteResolver {
    /// Client for an OpenAI-compatible chat endpoint; the API key, if any,
    /// comes from `XLV_RESOLVER_KEY`.
    pub fn new(url: &str, model: &str, timeout: Duration) -> Self {
        Self { url: url.into(), model: model.into(), key: std::env::var("XLV_RESOLVER_KEY").ok(), prompt: DEFAULT_PROMPT.into(), timeout }
    }
}

/// Extracts the first `{...}` object from model output and decodes it.
pub fn parse_candidate(content: &str) -> Result<Candidate, ResolverError> {
    let start = content.find('{').ok_or_else(|| ResolverError::Malformed("no JSON object in reply".into()))?;
    let end = content.rfind('}').ok_or_else(|| ResolverError::Malformed("no JSON object in reply".into()))?;
    if end < start {
        return Err(ResolverError::Malformed("no JSON object in reply".into()));
    }
    serde_json::from_str(&content[start..=end]).map_err(|e| ResolverError::Malformed(e.to_string()))
}

impl Resolver for RemoteResolver {
    fn resolve(&self, req: &ResolveRequest) -> Result<Candidate, ResolverError> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": "You map Java types to Python types."},
                {"role": "user", "content": render_prompt(&self.prompt, req)},
            ],
        });
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut call = agent.post(&self.url);
        if let Some(k) = &self.key {
            call = call.set("Authorization", &format!("Bearer {k}"));
        }
        let reply: serde_json::Value = call
            .send_json(body)
            .map_err(|e| ResolverError::Transport(e.to_string()))?
            .into_json()
            .map_err(|e| ResolverError::Malformed(e.to_string()))?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .ok_or_else(|| ResolverError::Malformed("reply has no message content".into()))?;
        parse_candidate(content)
    }
}

// ---------------------------------------------------------------------------
// Validation and resolution

/// Checks that every import loads and the type expression evaluates to a
/// type in a fresh interpreter. The error text is fed back to the resolver.
pub fn validate_mapping(c: &Candidate) -> Result<(), String> {
    let interp = Interp::new();
    let module = interp.run_module_source("__typecheck__", "", "<typecheck>").map_err(|e| format!("internal: {e}"))?;
    for stmt in &c.target_imports {
        let name = imported_module(stmt).unwrap_or_else(|| stmt.trim().to_string());
        match interp.exec_in_module(&module, stmt) {
            Ok(()) => {}
            Err(RunError::Syntax { err, .. }) => return Err(format!("import failed: {name}: invalid statement ({err})")),
            Err(RunError::Raised(_)) => return Err(format!("import failed: {name}")),
        }
    }
    let expr = c.target_type.trim();
    if expr.is_empty() {
        return Err("target type is empty".into());
    }
    parse_expression(expr).map_err(|e| format!("target type {expr:?} does not parse: {e}"))?;
    match interp.eval_in_module(&module, expr) {
        Ok(Value::Class(_) | Value::Type(_)) => Ok(()),
        Ok(other) => Err(format!("target type {expr:?} evaluates to a {} value, not a type", other.type_name())),
        Err(e) => Err(format!("target type {expr:?} is unresolvable: {e}")),
    }
}

fn imported_module(stmt: &str) -> Option<String> {
    let s = stmt.trim();
    let rest = s.strip_prefix("from ").or_else(|| s.strip_prefix("import "))?;
    rest.split([' ', ',']).next().map(str::to_string)
}

/// Why an occurrence could not be resolved within the budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolveFailure {
    pub attempts: u32,
    pub transport_errors: u32,
    pub feedback: Vec<String>,
}

/// Queries `r` up to `budget` times, validating each candidate and feeding
/// errors back. Returns the first validated mapping.
pub fn resolve_type(occ: &TypeOccurrence, doc: &str, r: &dyn Resolver, budget: u32) -> Result<TypeMapping, ResolveFailure> {
    let mut req = ResolveRequest {
        source_type: occ.source_type.clone(),
        doc_text: doc.to_string(),
        context_code: occ.context_code.clone(),
        feedback: Vec::new(),
    };
    let mut transport_errors = 0;
    for attempt in 1..=budget.max(1) {
        let problem = match r.resolve(&req) {
            Ok(c) => match validate_mapping(&c) {
                Ok(()) => {
                    return Ok(TypeMapping {
                        target_type: c.target_type,
                        target_imports: c.target_imports,
                        reasoning: c.reasoning,
                        provenance: Provenance::Resolved,
                        validated: true,
                    })
                }
                Err(e) => e,
            },
            Err(e) => {
                if matches!(e, ResolverError::Transport(_)) {
                    transport_errors += 1;
                }
                e.to_string()
            }
        };
        req.feedback.push(problem);
        if attempt == budget.max(1) {
            break;
        }
    }
    Err(ResolveFailure { attempts: budget.max(1), transport_errors, feedback: req.feedback })
}

// ---------------------------------------------------------------------------
// Context type map

/// One resolved occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmEntry {
    pub site: Site,
    pub source_type: String,
    pub mapping: TypeMapping,
}

/// Stored map of one project, entries sorted by site then source type.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectCtm {
    pub project: String,
    pub entries: Vec<CtmEntry>,
}

impl ProjectCtm {
    fn sort(&mut self) {
        self.entries.sort_by(|a, b| (&a.site, &a.source_type).cmp(&(&b.site, &b.source_type)));
    }
}

/// Per-occurrence mappings of every project.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextTypeMap {
    pub projects: BTreeMap<String, ProjectCtm>,
}

impl ContextTypeMap {
    pub fn lookup(&self, project: &str, site: &Site, source_type: &str) -> Option<&TypeMapping> {
        self.projects.get(project)?.entries.iter().find(|e| &e.site == site && e.source_type == source_type).map(|e| &e.mapping)
    }

    pub fn lookup_occurrence(&self, occ: &TypeOccurrence) -> Option<&TypeMapping> {
        self.lookup(&occ.project, &occ.site, &occ.source_type)
    }

    /// Inserts or replaces the mapping of one occurrence.
    pub fn insert(&mut self, occ: &TypeOccurrence, mapping: TypeMapping) {
        let p = self.projects.entry(occ.project.clone()).or_insert_with(|| ProjectCtm { project: occ.project.clone(), entries: Vec::new() });
        p.entries.retain(|e| !(e.site == occ.site && e.source_type == occ.source_type));
        p.entries.push(CtmEntry { site: occ.site.clone(), source_type: occ.source_type.clone(), mapping });
        p.sort();
    }

    /// Mappings per provenance across all projects.
    pub fn provenance_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::from([("resolved", 0), ("global", 0), ("fallback_object", 0)]);
        for e in self.projects.values().flat_map(|p| &p.entries) {
            let k = match e.mapping.provenance {
                Provenance::Resolved => "resolved",
                Provenance::Global => "global",
                Provenance::FallbackObject => "fallback_object",
            };
            *out.get_mut(k).expect("all keys present") += 1;
        }
        out
    }

    /// Writes one `<project>.json` document per project into `dir`.
    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, p) in &self.projects {
            let mut text = serde_json::to_string_pretty(p).map_err(std::io::Error::other)?;
            text.push('\n');
            std::fs::write(dir.join(format!("{name}.json")), text)?;
        }
        Ok(())
    }

    /// Loads every `*.json` project document in `dir`; a missing directory
    /// yields an empty map.
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let mut ctm = Self::default();
        let Ok(rd) = std::fs::read_dir(dir) else { return Ok(ctm) };
        let mut paths: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "json")).collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p)?;
            let mut doc: ProjectCtm =
                serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", p.display())))?;
            doc.sort();
            ctm.projects.insert(doc.project.clone(), doc);
        }
        Ok(ctm)
    }
}

/// The most frequent resolver-validated target for `source_type` across all
/// projects; ties go to the lexicographically smallest target type.
pub fn resolve_globally(source_type: &str, ctm: &ContextTypeMap) -> Option<TypeMapping> {
    let mut counts: BTreeMap<&str, (usize, &TypeMapping)> = BTreeMap::new();
    for e in ctm.projects.values().flat_map(|p| &p.entries) {
        if e.source_type == source_type && e.mapping.provenance == Provenance::Resolved && e.mapping.validated {
            counts.entry(e.mapping.target_type.as_str()).or_insert((0, &e.mapping)).0 += 1;
        }
    }
    let best = counts.values().map(|(n, _)| *n).max()?;
    // BTreeMap iteration is ordered, so the first maximum is the smallest name.
    let (_, (_, m)) = counts.iter().find(|(_, (n, _))| *n == best)?;
    Some(TypeMapping {
        target_type: m.target_type.clone(),
        target_imports: m.target_imports.clone(),
        reasoning: format!("inferred from other usages: {}", m.reasoning),
        provenance: Provenance::Global,
        validated: true,
    })
}

/// Inputs shared by every occurrence of a build.
pub struct BuildOptions<'a> {
    pub budget: u32,
    pub docs: Option<&'a dyn DocSource>,
    pub cache: DocCache,
    pub offline: bool,
}

impl Default for BuildOptions<'_> {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, docs: None, cache: DocCache::default(), offline: true }
    }
}

/// Result of [`build_ctm`].
#[derive(Debug, Clone, Default)]
pub struct BuildSummary {
    pub ctm: ContextTypeMap,
    pub occurrences: usize,
    pub resolved: usize,
    pub global: usize,
    pub fallback: usize,
    /// Resolver and documentation transport failures.
    pub transport_failures: usize,
}

/// Resolves every occurrence of every project. Occurrences that fail are
/// retried globally against all validated mappings (including those found in
/// this build and in `prior`), then fall back to `object`.
pub fn build_ctm(projects: &[ProjectFragments], r: &dyn Resolver, opts: &BuildOptions, prior: ContextTypeMap) -> BuildSummary {
    let mut summary = BuildSummary { ctm: prior, ..Default::default() };
    let mut failed = Vec::new();
    for p in projects {
        summary.ctm.projects.insert(p.project.clone(), ProjectCtm { project: p.project.clone(), entries: Vec::new() });
        for occ in collect_types(p) {
            summary.occurrences += 1;
            let doc = match fetch_doc(&occ.source_type, &opts.cache, opts.docs, opts.offline) {
                Ok(d) => d,
                Err(_) => {
                    summary.transport_failures += 1;
                    String::new()
                }
            };
            match resolve_type(&occ, &doc, r, opts.budget) {
                Ok(m) => {
                    summary.resolved += 1;
                    summary.ctm.insert(&occ, m);
                }
                Err(f) => {
                    summary.transport_failures += f.transport_errors as usize;
                    failed.push(occ);
                }
            }
        }
    }
    for occ in failed {
        let m = match resolve_globally(&occ.source_type, &summary.ctm) {
            Some(m) => {
                summary.global += 1;
                m
            }
            None => {
                summary.fallback += 1;
                TypeMapping::fallback()
            }
        };
        summary.ctm.insert(&occ, m);
    }
    summary
}

#[cfg(test)]
mod tests {
    use std::cell::RefCell;

    use super::*;
    use crate::fragments::{Fragment, FragmentKind, TypeRole, TypeUse};

    fn occ(ty: &str, code: &str) -> TypeOccurrence {
        TypeOccurrence {
            project: "p".into(),
            source_type: ty.into(),
            site: Site { file: "A.java".into(), line: 1, symbol: "x".into() },
            fragment_id: "f".into(),
            context_code: code.into(),
        }
    }

    fn cand(t: &str, imports: &[&str]) -> Candidate {
        Candidate { target_type: t.into(), target_imports: imports.iter().map(|s| s.to_string()).collect(), reasoning: String::new() }
    }

    fn project(name: &str, uses: &[(&str, u32)]) -> ProjectFragments {
        ProjectFragments {
            project: name.into(),
            application_classes: vec!["app.Foo".into()],
            fragments: vec![Fragment {
                id: "app.Foo#m".into(),
                class: "app.Foo".into(),
                name: "m".into(),
                kind: FragmentKind::Method,
                file: "Foo.java".into(),
                start_line: 1,
                end_line: 9,
                code: "List<String> m() { return new ArrayList<>(); }".into(),
                callees: vec![],
                types: uses
                    .iter()
                    .map(|(t, l)| TypeUse { source_type: t.to_string(), line: *l, symbol: "m".into(), role: TypeRole::Return })
                    .collect(),
            }],
        }
    }

    #[test]
    fn collection_excludes_app_and_primitive_types() {
        let p = project("p", &[("java.util.List", 1), ("java.util.List", 4), ("app.Foo", 2), ("int", 3), ("java.util.List", 4)]);
        let occs = collect_types(&p);
        assert_eq!(occs.len(), 2);
        assert!(occs.iter().all(|o| o.source_type == "java.util.List"));
        assert!(collect_types(&project("q", &[])).is_empty());
    }

    #[test]
    fn validation() {
        assert_eq!(validate_mapping(&cand("object", &[])), Ok(()));
        assert_eq!(validate_mapping(&cand("io.StringIO", &["import io"])), Ok(()));
        assert_eq!(validate_mapping(&cand("typing.List[str]", &["import typing"])), Ok(()));
        assert_eq!(validate_mapping(&cand("List", &["from typing import List"])), Ok(()));
        let e = validate_mapping(&cand("x", &["import nosuchmodule"])).unwrap_err();
        assert!(e.starts_with("import failed: nosuchmodule"), "{e}");
        assert!(validate_mapping(&cand("io.StringIO", &[])).is_err());
        assert!(validate_mapping(&cand("42", &[])).is_err());
        assert!(validate_mapping(&cand("list[", &[])).is_err());
    }

    #[test]
    fn fig3_context_rules() {
        let r = RuleTableResolver::builtin();
        let immut = resolve_type(&occ("java.util.List", "return Collections.unmodifiableList(options);"), "", &r, 4).unwrap();
        assert_eq!(immut.target_type, "tuple");
        let mutable = resolve_type(&occ("java.util.List", "List<String> out = new ArrayList<>();"), "", &r, 4).unwrap();
        assert_eq!(mutable.target_type, "list");
        let cb = resolve_type(&occ("java.nio.CharBuffer", "CharBuffer buf = CharBuffer.allocate(8); reader.read(buf);"), "", &r, 4).unwrap();
        assert_eq!(cb.target_type, "bytearray");
    }

    struct Scripted {
        replies: Vec<Result<Candidate, ResolverError>>,
        seen: RefCell<Vec<ResolveRequest>>,
    }

    impl Resolver for Scripted {
        fn resolve(&self, req: &ResolveRequest) -> Result<Candidate, ResolverError> {
            let n = self.seen.borrow().len();
            self.seen.borrow_mut().push(req.clone());
            self.replies[n.min(self.replies.len() - 1)].clone()
        }
    }

    #[test]
    fn budget_and_feedback() {
        let bad = Scripted { replies: vec![Ok(cand("X", &["import nosuchmodule"]))], seen: RefCell::new(vec![]) };
        let f = resolve_type(&occ("java.util.Foo", ""), "", &bad, 4).unwrap_err();
        assert_eq!(f.attempts, 4);
        assert_eq!(bad.seen.borrow().len(), 4);
        assert_eq!(bad.seen.borrow()[3].feedback.len(), 3);
        assert!(bad.seen.borrow()[1].feedback[0].contains("import failed"));

        let late = Scripted { replies: vec![Err(ResolverError::Transport("down".into())), Ok(cand("list", &[]))], seen: RefCell::new(vec![]) };
        let m = resolve_type(&occ("java.util.List", ""), "", &late, 4).unwrap();
        assert_eq!(m.provenance, Provenance::Resolved);
        assert_eq!(late.seen.borrow().len(), 2);
    }

    fn entry(project: &str, line: u32, target: &str, prov: Provenance) -> (TypeOccurrence, TypeMapping) {
        let mut o = occ("java.util.Deque", "");
        o.project = project.into();
        o.site.line = line;
        (
            o,
            TypeMapping {
                target_type: target.into(),
                target_imports: vec![],
                reasoning: String::new(),
                provenance: prov,
                validated: prov != Provenance::FallbackObject,
            },
        )
    }

    #[test]
    fn global_resolution() {
        let mut ctm = ContextTypeMap::default();
        assert!(resolve_globally("java.util.Deque", &ctm).is_none());
        for (o, m) in [entry("a", 1, "list", Provenance::Resolved), entry("b", 1, "list", Provenance::Resolved)] {
            ctm.insert(&o, m);
        }
        let g = resolve_globally("java.util.Deque", &ctm).unwrap();
        assert_eq!((g.target_type.as_str(), g.provenance), ("list", Provenance::Global));
        for (o, m) in [entry("c", 1, "collections.deque", Provenance::Resolved), entry("c", 2, "collections.deque", Provenance::Resolved)] {
            ctm.insert(&o, m);
        }
        assert_eq!(resolve_globally("java.util.Deque", &ctm).unwrap().target_type, "collections.deque");
        let (o, m) = entry("d", 1, "zzz", Provenance::Global);
        ctm.insert(&o, m);
        assert_eq!(resolve_globally("java.util.Deque", &ctm).unwrap().target_type, "collections.deque");
    }

    #[test]
    fn build_falls_back_in_order() {
        let table = RuleTableResolver {
            rules: vec![Rule {
                source_type: "java.util.List".into(),
                context: None,
                target_type: "list".into(),
                imports: vec![],
                reasoning: String::new(),
            }],
        };
        let a = project("a", &[("java.util.List", 1), ("java.util.Deque", 2)]);
        let s = build_ctm(std::slice::from_ref(&a), &table, &BuildOptions::default(), ContextTypeMap::default());
        assert_eq!((s.resolved, s.global, s.fallback, s.transport_failures), (1, 0, 1, 0));
        let none = RuleTableResolver::default();
        let s2 = build_ctm(&[project("b", &[("java.util.List", 7)])], &none, &BuildOptions::default(), s.ctm.clone());
        assert_eq!((s2.resolved, s2.global, s2.fallback), (0, 1, 0));
        let again = build_ctm(&[a], &table, &BuildOptions::default(), ContextTypeMap::default());
        assert_eq!(again.ctm, s.ctm);
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s =
            build_ctm(&[project("a", &[("java.util.List", 1)])], &RuleTableResolver::builtin(), &BuildOptions::default(), ContextTypeMap::default());
        s.ctm.save(dir.path()).unwrap();
        assert_eq!(ContextTypeMap::load(dir.path()).unwrap(), s.ctm);
        let text = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
        assert!(text.contains("\"provenance\": \"resolved\""));
    }

    #[test]
    fn docs_cache_and_offline() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("java.util.List.txt"), "Interface List<E>").unwrap();
        let tree = FileTreeDocs { root: dir.path().to_path_buf() };
        let cache_dir = tempfile::tempdir().unwrap();
        let cache = DocCache { dir: Some(cache_dir.path().to_path_buf()) };
        assert_eq!(fetch_doc("java.util.List<String>", &cache, Some(&tree), true).unwrap(), "Interface List<E>");
        assert_eq!(cache.get("java.util.List").as_deref(), Some("Interface List<E>"));
        assert_eq!(fetch_doc("java.util.Nope", &cache, Some(&tree), true).unwrap(), "");
        let remote = JavadocSource { base_url: "http://127.0.0.1:9".into(), timeout: Duration::from_millis(200) };
        assert_eq!(fetch_doc("java.util.Map", &cache, Some(&remote), true).unwrap(), "");
        assert!(fetch_doc("java.util.Map", &cache, Some(&remote), false).is_err());
        assert_eq!(remote.url_for("java.util.Map$Entry"), "http://127.0.0.1:9/java/util/Map.Entry.html");
    }

    #[test]
    fn html_and_prompt() {
        assert_eq!(html_to_text("<p>A &lt;list&gt;</p><script>x()</script> of <b>items</b>"), "A <list> of items");
        let req = ResolveRequest {
            source_type: "java.util.List".into(),
            doc_text: String::new(),
            context_code: "f();".into(),
            feedback: vec!["import failed: x".into()],
        };
        let p = render_prompt(DEFAULT_PROMPT, &req);
        assert!(p.contains("java.util.List") && p.contains("f();") && p.contains("Attempt 1: import failed: x") && p.contains("(not available)"));
        assert_eq!(parse_candidate("```json\n{\"target_type\": \"list\"}\n```").unwrap().target_type, "list");
        assert!(parse_candidate("no").is_err());
    }
}
