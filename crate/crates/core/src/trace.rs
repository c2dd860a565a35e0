//! Agent trace data model, canonical JSON serialization and ingestion.
//!
//! A trace is the realized message history of one agent trial. On disk each
//! trace is one JSON document; a corpus is a directory of such documents or a
//! newline-delimited stream of them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace document at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("structural error in trace `{trace_id}`: {message}")]
    Structure { trace_id: String, message: String },
    #[error("duplicate trace_id `{0}` in corpus")]
    DuplicateId(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    /// Tool output. Providers that emit `tool` are normalized to this role.
    #[serde(alias = "tool")]
    Observation,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Observation => "observation",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

impl ToolCall {
    /// `name` followed by the JSON-encoded arguments.
    pub fn render(&self) -> String {
        format!(
            "{} {}",
            self.name,
            serde_json::to_string(&self.arguments).unwrap_or_default()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
    #[serde(default)]
    pub is_special: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub index: usize,
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_calls: Option<Vec<ToolCall>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<TokenLogprob>>,
    #[serde(default)]
    pub is_task_description: bool,
    #[serde(default)]
    pub is_iteration_limit_error: bool,
}

impl Message {
    pub fn new(index: usize, role: Role, content: impl Into<String>) -> Self {
        Self {
            index,
            role,
            content: content.into(),
            tool_calls: None,
            token_logprobs: None,
            is_task_description: false,
            is_iteration_limit_error: false,
        }
    }

    pub fn with_tool_calls(mut self, calls: Vec<ToolCall>) -> Self {
        self.tool_calls = Some(calls);
        self
    }

    pub fn tool_calls(&self) -> &[ToolCall] {
        self.tool_calls.as_deref().unwrap_or(&[])
    }

    pub fn is_assistant(&self) -> bool {
        self.role == Role::Assistant
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub trace_id: String,
    pub model: String,
    pub environment: String,
    pub scope: u32,
    pub scaffold: String,
    pub task_id: String,
    pub trial: u32,
    pub outcome_score: f64,
    pub messages: Vec<Message>,
}

impl AsRef<Trace> for Trace {
    fn as_ref(&self) -> &Trace {
        self
    }
}

impl Trace {
    pub fn message(&self, idx: usize) -> Option<&Message> {
        self.messages.get(idx).filter(|m| m.index == idx)
    }

    /// The task prompt: the first message flagged as task description.
    pub fn task_prompt(&self) -> Option<&Message> {
        self.messages.iter().find(|m| m.is_task_description)
    }

    pub fn metadata(&self) -> TraceMeta {
        TraceMeta {
            trace_id: self.trace_id.clone(),
            model: self.model.clone(),
            environment: self.environment.clone(),
            scope: self.scope,
            scaffold: self.scaffold.clone(),
            task_id: self.task_id.clone(),
            trial: self.trial,
            outcome_score: self.outcome_score,
            message_count: self.messages.len(),
        }
    }

    /// Checks every structural invariant of a well-formed trace.
    pub fn check(&self) -> Result<(), TraceError> {
        let fail = |message: String| TraceError::Structure {
            trace_id: self.trace_id.clone(),
            message,
        };
        if self.trace_id.is_empty() {
            return Err(fail("trace_id is empty".into()));
        }
        if self.messages.is_empty() {
            return Err(fail("messages is empty".into()));
        }
        if self.scope < 1 {
            return Err(fail(format!("scope must be >= 1, got {}", self.scope)));
        }
        if !(0.0..=1.0).contains(&self.outcome_score) {
            return Err(fail(format!(
                "outcome_score must lie in [0, 1], got {}",
                self.outcome_score
            )));
        }
        for (pos, m) in self.messages.iter().enumerate() {
            if m.index != pos {
                return Err(fail(format!(
                    "message indices must be consecutive from 0: position {pos} has index {}",
                    m.index
                )));
            }
            if !m.tool_calls().is_empty() && m.role != Role::Assistant {
                return Err(fail(format!(
                    "message {pos} has role {} but carries tool_calls",
                    m.role
                )));
            }
            if let Some(tokens) = &m.token_logprobs {
                if let Some(t) = tokens.iter().find(|t| t.logprob > 0.0 || t.logprob.is_nan()) {
                    return Err(fail(format!(
                        "message {pos} has token `{}` with logprob {} > 0",
                        t.token, t.logprob
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Trace metadata without the message body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub trace_id: String,
    pub model: String,
    pub environment: String,
    pub scope: u32,
    pub scaffold: String,
    pub task_id: String,
    pub trial: u32,
    pub outcome_score: f64,
    pub message_count: usize,
}

/// How the task-description message is located at ingest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum TaskDescriptionRule {
    /// Keep flags present in the document; if none is flagged, flag the
    /// first user message.
    #[default]
    FirstUser,
    /// Flag exactly these message indices, clearing any document flags.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Message contents that mark an iteration-limit error, matched exactly
    /// after trimming surrounding whitespace.
    pub iteration_limit_sentinels: Vec<String>,
    pub task_description: TaskDescriptionRule,
}

pub const DEFAULT_ITERATION_LIMIT_SENTINELS: &[&str] = &[
    "Agent stopped due to iteration limit or time limit.",
    "Maximum number of iterations reached.",
    "Error: maximum iterations exceeded",
];

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            iteration_limit_sentinels: DEFAULT_ITERATION_LIMIT_SENTINELS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            task_description: TaskDescriptionRule::FirstUser,
        }
    }
}

impl IngestOptions {
    /// Applies the ingest normalization rules in place.
    pub fn normalize(&self, trace: &mut Trace) {
        for m in &mut trace.messages {
            if self
                .iteration_limit_sentinels
                .iter()
                .any(|s| s.trim() == m.content.trim())
            {
                m.is_iteration_limit_error = true;
            }
        }
        match &self.task_description {
            TaskDescriptionRule::FirstUser => {
                if !trace.messages.iter().any(|m| m.is_task_description) {
                    if let Some(m) = trace.messages.iter_mut().find(|m| m.role == Role::User) {
                        m.is_task_description = true;
                    }
                }
            }
            TaskDescriptionRule::Explicit(indices) => {
                for m in &mut trace.messages {
                    m.is_task_description = indices.contains(&m.index);
                }
            }
        }
    }
}

/// Parses one trace document with the default ingest options.
pub fn parse_trace(serialized: &str) -> Result<Trace, TraceError> {
    parse_trace_with(serialized, &IngestOptions::default())
}

pub fn parse_trace_with(serialized: &str, opts: &IngestOptions) -> Result<Trace, TraceError> {
    let de = &mut serde_json::Deserializer::from_str(serialized);
    let mut trace: Trace = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        // serde reports a missing key against its parent; name the key itself
        let field = match missing_field_name(&message) {
            Some(name) if path == "." => name,
            Some(name) => format!("{path}.{name}"),
            None => path,
        };
        TraceError::Parse { field, message }
    })?;
    trace.check()?;
    opts.normalize(&mut trace);
    Ok(trace)
}

fn missing_field_name(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    let end = rest.find('`')?;
    Some(rest[..end].to_string())
}

/// Canonical serialization: pretty-printed JSON, one document per trace.
pub fn render(trace: &Trace) -> String {
    serde_json::to_string_pretty(trace).expect("trace serialization is infallible")
}

/// Which messages an annotation stage may label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationMode {
    /// Epistemic graph annotation: drops system prompts and iteration-limit
    /// errors; the task description stays eligible.
    Epistemic,
    /// Human marker annotation: additionally drops tool outputs and the task
    /// description.
    Marker,
}

pub fn annotatable_messages(trace: &Trace, mode: AnnotationMode) -> Vec<&Message> {
    trace
        .messages
        .iter()
        .filter(|m| m.role != Role::System && !m.is_iteration_limit_error)
        .filter(|m| match mode {
            AnnotationMode::Epistemic => true,
            AnnotationMode::Marker => m.role != Role::Observation && !m.is_task_description,
        })
        .collect()
}

pub fn assistant_turns(trace: &Trace) -> Vec<&Message> {
    trace.messages.iter().filter(|m| m.is_assistant()).collect()
}

/// Key used to index a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CorpusKey {
    pub model: String,
    pub environment: String,
    pub scope: u32,
    pub scaffold: String,
    pub task_id: String,
}

impl CorpusKey {
    pub fn of(trace: &Trace) -> Self {
        Self {
            model: trace.model.clone(),
            environment: trace.environment.clone(),
            scope: trace.scope,
            scaffold: trace.scaffold.clone(),
            task_id: trace.task_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TraceCorpus {
    traces: Vec<Arc<Trace>>,
    by_id: HashMap<String, usize>,
    by_key: BTreeMap<CorpusKey, Vec<usize>>,
}

impl TraceCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_traces(traces: impl IntoIterator<Item = Trace>) -> Result<Self, TraceError> {
        let mut corpus = Self::new();
        for t in traces {
            corpus.insert(t)?;
        }
        Ok(corpus)
    }

    pub fn insert(&mut self, trace: Trace) -> Result<(), TraceError> {
        if self.by_id.contains_key(&trace.trace_id) {
            return Err(TraceError::DuplicateId(trace.trace_id));
        }
        let pos = self.traces.len();
        self.by_id.insert(trace.trace_id.clone(), pos);
        self.by_key.entry(CorpusKey::of(&trace)).or_default().push(pos);
        self.traces.push(Arc::new(trace));
        Ok(())
    }

    pub fn get(&self, trace_id: &str) -> Option<&Arc<Trace>> {
        self.by_id.get(trace_id).map(|&i| &self.traces[i])
    }

    pub fn lookup(&self, key: &CorpusKey) -> impl Iterator<Item = &Arc<Trace>> {
        self.by_key
            .get(key)
            .into_iter()
            .flatten()
            .map(move |&i| &self.traces[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Trace>> {
        self.traces.iter()
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Loads every `*.json` file in `dir` (sorted by file name).
    pub fn load_dir(dir: &Path, opts: &IngestOptions) -> Result<Self, TraceError> {
        let io_err = |path: &Path, source| TraceError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();
        let mut corpus = Self::new();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            corpus.insert(parse_trace_with(&text, opts)?)?;
        }
        Ok(corpus)
    }

    /// Reads a newline-delimited stream of trace documents. Blank lines are
    /// skipped.
    pub fn load_ndjson<R: BufRead>(reader: R, opts: &IngestOptions) -> Result<Self, TraceError> {
        let mut corpus = Self::new();
        for line in reader.lines() {
            let line = line.map_err(|source| TraceError::Io {
                path: "<stream>".into(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            corpus.insert(parse_trace_with(&line, opts)?)?;
        }
        Ok(corpus)
    }

    /// Loads a directory, an `.ndjson`/`.jsonl` stream, or a single document.
    pub fn load_path(path: &Path, opts: &IngestOptions) -> Result<Self, TraceError> {
        if path.is_dir() {
            return Self::load_dir(path, opts);
        }
        let file = std::fs::File::open(path).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let is_stream = path
            .extension()
            .is_some_and(|ext| ext == "ndjson" || ext == "jsonl");
        if is_stream {
            Self::load_ndjson(std::io::BufReader::new(file), opts)
        } else {
            let text = std::io::read_to_string(file).map_err(|source| TraceError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Self::from_traces([parse_trace_with(&text, opts)?])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(messages: &str) -> String {
        format!(
            r#"{{"trace_id":"t1","model":"m","environment":"spectra","scope":1,
                "scaffold":"react","task_id":"task-1","trial":0,"outcome_score":1.0,
                "messages":{messages}}}"#
        )
    }

    fn roles(trace: &Trace, mode: AnnotationMode) -> Vec<Role> {
        annotatable_messages(trace, mode)
            .into_iter()
            .map(|m| m.role)
            .collect()
    }

    #[test]
    fn parses_minimal_trace() {
        let t = parse_trace(&doc(
            r#"[{"index":0,"role":"user","content":"hi"},
                {"index":1,"role":"assistant","content":"hello"}]"#,
        ))
        .unwrap();
        assert_eq!(t.messages.len(), 2);
        assert_eq!(
            t.messages.iter().map(|m| m.index).collect::<Vec<_>>(),
            vec![0, 1]
        );
        assert!(t.messages[0].is_task_description);
    }

    #[test]
    fn preserves_tool_calls_verbatim() {
        let t = parse_trace(&doc(
            r#"[{"index":0,"role":"user","content":"identify the ion"},
                {"index":1,"role":"assistant","content":"measuring",
                 "tool_calls":[{"name":"measure_pH","arguments":{"label":"S1"}}]}]"#,
        ))
        .unwrap();
        let calls = t.messages[1].tool_calls();
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].name, "measure_pH");
        assert_eq!(calls[0].arguments["label"], Value::String("S1".into()));
    }

    #[test]
    fn missing_role_names_the_field() {
        let err = parse_trace(&doc(r#"[{"index":0,"content":"x"}]"#)).unwrap_err();
        match err {
            TraceError::Parse { field, .. } => assert_eq!(field, "messages[0].role"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_type_names_the_field() {
        let err = parse_trace(&doc(r#"[{"index":"zero","role":"user","content":"x"}]"#))
            .unwrap_err();
        match err {
            TraceError::Parse { field, .. } => assert_eq!(field, "messages[0].index"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_consecutive_indices_are_structural_errors() {
        let err = parse_trace(&doc(
            r#"[{"index":0,"role":"user","content":"a"},{"index":2,"role":"assistant","content":"b"}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, TraceError::Structure { .. }));
    }

    #[test]
    fn tool_calls_only_on_assistant() {
        let err = parse_trace(&doc(
            r#"[{"index":0,"role":"user","content":"a","tool_calls":[{"name":"x","arguments":{}}]}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, TraceError::Structure { .. }));
    }

    #[test]
    fn positive_logprob_rejected() {
        let err = parse_trace(&doc(
            r#"[{"index":0,"role":"assistant","content":"a","token_logprobs":[{"token":"a","logprob":0.5}]}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, TraceError::Structure { .. }));
    }

    #[test]
    fn empty_messages_rejected() {
        assert!(matches!(
            parse_trace(&doc("[]")).unwrap_err(),
            TraceError::Structure { .. }
        ));
    }

    #[test]
    fn unknown_fields_ignored_and_tool_role_normalized() {
        let t = parse_trace(&doc(
            r#"[{"index":0,"role":"user","content":"a","extra":42},
                {"index":1,"role":"tool","content":"out"}]"#,
        ))
        .unwrap();
        assert_eq!(t.messages[1].role, Role::Observation);
    }

    #[test]
    fn iteration_limit_sentinel_detected() {
        let t = parse_trace(&doc(
            r#"[{"index":0,"role":"user","content":"a"},
                {"index":1,"role":"user","content":"  Maximum number of iterations reached.  "}]"#,
        ))
        .unwrap();
        assert!(t.messages[1].is_iteration_limit_error);
        assert!(!t.messages[1].is_task_description);
    }

    #[test]
    fn explicit_task_description_override() {
        let opts = IngestOptions {
            task_description: TaskDescriptionRule::Explicit(vec![1, 2]),
            ..Default::default()
        };
        let t = parse_trace_with(
            &doc(
                r#"[{"index":0,"role":"user","content":"a","is_task_description":true},
                    {"index":1,"role":"user","content":"b"},
                    {"index":2,"role":"user","content":"c"}]"#,
            ),
            &opts,
        )
        .unwrap();
        let flags: Vec<bool> = t.messages.iter().map(|m| m.is_task_description).collect();
        assert_eq!(flags, vec![false, true, true]);
    }

    fn four_message_trace() -> Trace {
        parse_trace(&doc(
            r#"[{"index":0,"role":"system","content":"sys"},
                {"index":1,"role":"user","content":"task"},
                {"index":2,"role":"assistant","content":"think"},
                {"index":3,"role":"observation","content":"out"}]"#,
        ))
        .unwrap()
    }

    #[test]
    fn epistemic_mode_keeps_task_description() {
        let t = four_message_trace();
        assert_eq!(
            roles(&t, AnnotationMode::Epistemic),
            vec![Role::User, Role::Assistant, Role::Observation]
        );
    }

    #[test]
    fn marker_mode_keeps_only_agent_steps() {
        let t = four_message_trace();
        assert_eq!(roles(&t, AnnotationMode::Marker), vec![Role::Assistant]);
    }

    #[test]
    fn system_only_trace_has_nothing_annotatable() {
        let t = parse_trace(&doc(r#"[{"index":0,"role":"system","content":"sys"}]"#)).unwrap();
        assert!(annotatable_messages(&t, AnnotationMode::Epistemic).is_empty());
    }

    #[test]
    fn assistant_turns_filter() {
        let t = parse_trace(&doc(
            r#"[{"index":0,"role":"user","content":"a"},
                {"index":1,"role":"assistant","content":"b"},
                {"index":2,"role":"observation","content":"c"},
                {"index":3,"role":"assistant","content":"d"}]"#,
        ))
        .unwrap();
        let turns = assistant_turns(&t);
        assert_eq!(turns.len(), 2);
        assert_eq!(turns[1].index, 3);
        let t = parse_trace(&doc(r#"[{"index":0,"role":"user","content":"a"}]"#)).unwrap();
        assert!(assistant_turns(&t).is_empty());
    }

    #[test]
    fn corpus_rejects_duplicate_ids_and_indexes_by_key() {
        let t = four_message_trace();
        let mut corpus = TraceCorpus::new();
        corpus.insert(t.clone()).unwrap();
        assert!(matches!(
            corpus.insert(t.clone()),
            Err(TraceError::DuplicateId(_))
        ));
        assert_eq!(corpus.lookup(&CorpusKey::of(&t)).count(), 1);
        assert!(corpus.get("t1").is_some());
    }

    #[test]
    fn ndjson_stream_loads() {
        let line = doc(r#"[{"index":0,"role":"user","content":"a"}]"#).replace('\n', " ");
        let second = line.replace("\"t1\"", "\"t2\"");
        let input = format!("{line}\n\n{second}\n");
        let corpus =
            TraceCorpus::load_ndjson(input.as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!(corpus.len(), 2);
    }
}
