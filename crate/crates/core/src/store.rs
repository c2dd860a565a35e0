//! Directory-backed persistence.
//!
//! ```text
//! root/
//!   index.json                      trace metadata, sorted by trace_id
//!   traces/<trace_id>.json
//!   graphs/<trace_id>.json          validated graph plus its warnings
//!   motifs/<trace_id>.json
//!   annotations/<trace_id>/<annotator>/rev-<n>.json
//! ```
//!
//! Every file is written to a temporary name and renamed into place.
//! Annotation revisions are claimed with a no-clobber hard link, so
//! concurrent writers, in-process or not, never overwrite one another.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EpistemicGraph, WarningLedger};
use crate::markers::{MarkerAnnotation, MarkerError};
use crate::motif::MotifDocument;
use crate::trace::{render, Trace, TraceMeta};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("corrupt document {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error("`{0}` is not a valid identifier (letters, digits, `.`, `_`, `-`)")]
    InvalidId(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error(transparent)]
    Invalid(#[from] MarkerError),
    #[error("revision conflict: expected {expected}, current {current}")]
    Conflict { expected: u64, current: u64 },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Graph document as persisted and served.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    #[serde(flatten)]
    pub graph: EpistemicGraph,
    #[serde(default)]
    pub warnings: WarningLedger,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFilter {
    pub model: Option<String>,
    pub environment: Option<String>,
    pub scope: Option<u32>,
    pub scaffold: Option<String>,
    pub task_id: Option<String>,
}

impl TraceFilter {
    pub fn matches(&self, m: &TraceMeta) -> bool {
        self.model.as_ref().is_none_or(|v| *v == m.model)
            && self.environment.as_ref().is_none_or(|v| *v == m.environment)
            && self.scope.is_none_or(|v| v == m.scope)
            && self.scaffold.as_ref().is_none_or(|v| *v == m.scaffold)
            && self.task_id.as_ref().is_none_or(|v| *v == m.task_id)
    }
}

/// A stored annotation revision: its number and the exact stored bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revision {
    pub revision: u64,
    pub body: String,
}

impl Revision {
    pub fn annotation(&self) -> Result<MarkerAnnotation, StoreError> {
        serde_json::from_str(&self.body).map_err(|e| StoreError::Corrupt {
            path: format!("revision {}", self.revision),
            message: e.to_string(),
        })
    }
}

type KeyLocks = Mutex<HashMap<(String, String), Arc<Mutex<()>>>>;

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    index_lock: Mutex<()>,
    key_locks: KeyLocks,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

pub fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

fn tmp_path(target: &Path) -> PathBuf {
    let n = TMP_COUNTER.fetch_add(1, Ordering::SeqCst);
    let name = target
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    target.with_file_name(format!(".{name}.tmp-{}-{n}", std::process::id()))
}

fn write_tmp(target: &Path, body: &[u8]) -> Result<PathBuf, StoreError> {
    if let Some(dir) = target.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = tmp_path(target);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(body).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    Ok(tmp)
}

/// Writes `body` to `target` by rename.
pub fn atomic_write(target: &Path, body: &[u8]) -> Result<(), StoreError> {
    let tmp = write_tmp(target, body)?;
    fs::rename(&tmp, target).map_err(io_err(target))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, StoreError> {
    match fs::read_to_string(path) {
        Ok(s) => serde_json::from_str(&s)
            .map(Some)
            .map_err(|e| StoreError::Corrupt {
                path: path.display().to_string(),
                message: e.to_string(),
            }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("document serializes")
}

fn revision_number(name: &str) -> Option<u64> {
    name.strip_prefix("rev-")?.strip_suffix(".json")?.parse().ok()
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["traces", "graphs", "motifs", "annotations"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Self {
            root,
            index_lock: Mutex::new(()),
            key_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn doc_path(&self, kind: &str, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        Ok(self.root.join(kind).join(format!("{id}.json")))
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    /// Stores traces and refreshes the index once for the batch.
    pub fn put_traces<'a>(
        &self,
        traces: impl IntoIterator<Item = &'a Trace>,
    ) -> Result<usize, StoreError> {
        let _guard = self.index_lock.lock().expect("index lock");
        let mut index: Vec<TraceMeta> = read_json(&self.index_path())?.unwrap_or_default();
        let mut n = 0;
        for t in traces {
            atomic_write(&self.doc_path("traces", &t.trace_id)?, render(t).as_bytes())?;
            index.retain(|m| m.trace_id != t.trace_id);
            index.push(t.metadata());
            n += 1;
        }
        index.sort_by(|a, b| a.trace_id.cmp(&b.trace_id));
        atomic_write(&self.index_path(), pretty(&index).as_bytes())?;
        Ok(n)
    }

    pub fn put_trace(&self, trace: &Trace) -> Result<(), StoreError> {
        self.put_traces([trace]).map(|_| ())
    }

    pub fn get_trace(&self, id: &str) -> Result<Option<Trace>, StoreError> {
        read_json(&self.doc_path("traces", id)?)
    }

    pub fn list_traces(&self, filter: &TraceFilter) -> Result<Vec<TraceMeta>, StoreError> {
        let index: Vec<TraceMeta> = read_json(&self.index_path())?.unwrap_or_default();
        Ok(index.into_iter().filter(|m| filter.matches(m)).collect())
    }

    pub fn all_traces(&self) -> Result<Vec<Trace>, StoreError> {
        self.list_traces(&TraceFilter::default())?
            .iter()
            .map(|m| {
                self.get_trace(&m.trace_id)?
                    .ok_or_else(|| StoreError::NotFound(format!("trace `{}`", m.trace_id)))
            })
            .collect()
    }

    pub fn put_graph(&self, record: &GraphRecord) -> Result<(), StoreError> {
        atomic_write(
            &self.doc_path("graphs", &record.graph.trace_id)?,
            pretty(record).as_bytes(),
        )
    }

    pub fn get_graph(&self, trace_id: &str) -> Result<Option<GraphRecord>, StoreError> {
        read_json(&self.doc_path("graphs", trace_id)?)
    }

    pub fn put_motifs(&self, doc: &MotifDocument) -> Result<(), StoreError> {
        atomic_write(&self.doc_path("motifs", &doc.trace_id)?, pretty(doc).as_bytes())
    }

    pub fn get_motifs(&self, trace_id: &str) -> Result<Option<MotifDocument>, StoreError> {
        read_json(&self.doc_path("motifs", trace_id)?)
    }

    fn ids_in(&self, kind: &str) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join(kind);
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                name.strip_suffix(".json")
                    .filter(|stem| !stem.starts_with('.'))
                    .map(str::to_string)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn graph_ids(&self) -> Result<Vec<String>, StoreError> {
        self.ids_in("graphs")
    }

    pub fn motif_ids(&self) -> Result<Vec<String>, StoreError> {
        self.ids_in("motifs")
    }

    fn annotation_dir(&self, trace_id: &str, annotator: &str) -> Result<PathBuf, StoreError> {
        check_id(trace_id)?;
        check_id(annotator)?;
        Ok(self.root.join("annotations").join(trace_id).join(annotator))
    }

    fn revisions(dir: &Path) -> Result<Vec<u64>, StoreError> {
        let entries = match fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(dir)(e)),
        };
        let mut revs: Vec<u64> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| revision_number(&e.file_name().to_string_lossy()))
            .collect();
        revs.sort_unstable();
        Ok(revs)
    }

    /// Revision numbers stored for (trace, annotator), oldest first.
    pub fn annotation_revisions(
        &self,
        trace_id: &str,
        annotator: &str,
    ) -> Result<Vec<u64>, StoreError> {
        Self::revisions(&self.annotation_dir(trace_id, annotator)?)
    }

    pub fn get_annotation_revision(
        &self,
        trace_id: &str,
        annotator: &str,
        revision: u64,
    ) -> Result<Option<Revision>, StoreError> {
        let path = self
            .annotation_dir(trace_id, annotator)?
            .join(format!("rev-{revision}.json"));
        match fs::read_to_string(&path) {
            Ok(body) => Ok(Some(Revision { revision, body })),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn get_annotation(
        &self,
        trace_id: &str,
        annotator: &str,
    ) -> Result<Option<Revision>, StoreError> {
        match self.annotation_revisions(trace_id, annotator)?.last() {
            Some(&rev) => self.get_annotation_revision(trace_id, annotator, rev),
            None => Ok(None),
        }
    }

    fn key_lock(&self, trace_id: &str, annotator: &str) -> Arc<Mutex<()>> {
        self.key_locks
            .lock()
            .expect("lock table")
            .entry((trace_id.to_string(), annotator.to_string()))
            .or_default()
            .clone()
    }

    /// Validates `annotation` against `trace` and appends it as a new
    /// revision. With `expected` set, the write only proceeds if the latest
    /// stored revision is `expected` (0 for none).
    pub fn store_annotation(
        &self,
        annotation: &MarkerAnnotation,
        trace: &Trace,
        expected: Option<u64>,
    ) -> Result<u64, StoreError> {
        annotation.validate(trace)?;
        let dir = self.annotation_dir(&annotation.trace_id, &annotation.annotator_id)?;
        let lock = self.key_lock(&annotation.trace_id, &annotation.annotator_id);
        let _guard = lock.lock().expect("annotation lock");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let body = pretty(annotation);
        let mut next = Self::revisions(&dir)?.last().copied().unwrap_or(0);
        if let Some(expected) = expected {
            if expected != next {
                return Err(StoreError::Conflict {
                    expected,
                    current: next,
                });
            }
        }
        let tmp = write_tmp(&dir.join("staged.json"), body.as_bytes())?;
        let result = loop {
            next += 1;
            let target = dir.join(format!("rev-{next}.json"));
            match fs::hard_link(&tmp, &target) {
                Ok(()) => break Ok(next),
                // another process claimed this number
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => break Err(io_err(&target)(e)),
            }
        };
        let _ = fs::remove_file(&tmp);
        result
    }

    /// Marks the latest revision submitted and stores it as a new revision.
    pub fn submit_annotation(
        &self,
        trace: &Trace,
        annotator: &str,
    ) -> Result<u64, StoreError> {
        let latest = self
            .get_annotation(&trace.trace_id, annotator)?
            .ok_or_else(|| {
                StoreError::NotFound(format!(
                    "annotation of `{}` by `{annotator}`",
                    trace.trace_id
                ))
            })?;
        let mut a = latest.annotation()?;
        a.submitted = true;
        self.store_annotation(&a, trace, Some(latest.revision))
    }

    /// Latest revision of every (trace, annotator) pair.
    pub fn latest_annotations(&self) -> Result<Vec<MarkerAnnotation>, StoreError> {
        let root = self.root.join("annotations");
        let mut out = Vec::new();
        let mut dirs: Vec<PathBuf> = Vec::new();
        for t in fs::read_dir(&root).map_err(io_err(&root))?.flatten() {
            if let Ok(inner) = fs::read_dir(t.path()) {
                dirs.extend(inner.flatten().map(|a| a.path()));
            }
        }
        dirs.sort();
        for dir in dirs {
            if let Some(rev) = Self::revisions(&dir)?.last() {
                let path = dir.join(format!("rev-{rev}.json"));
                if let Some(a) = read_json(&path)? {
                    out.push(a);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Message, Role};

    fn trace() -> Trace {
        let mut task = Message::new(0, Role::User, "task");
        task.is_task_description = true;
        Trace {
            trace_id: "tr-1".into(),
            model: "m".into(),
            environment: "e".into(),
            scope: 2,
            scaffold: "react".into(),
            task_id: "x".into(),
            trial: 0,
            outcome_score: 1.0,
            messages: vec![task, Message::new(1, Role::Assistant, "a")],
        }
    }

    #[test]
    fn trace_round_trip_and_filter() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        s.put_trace(&trace()).unwrap();
        assert_eq!(s.get_trace("tr-1").unwrap().unwrap(), trace());
        assert!(s.get_trace("nope").unwrap().is_none());
        let hit = TraceFilter {
            scope: Some(2),
            ..Default::default()
        };
        let miss = TraceFilter {
            model: Some("other".into()),
            ..Default::default()
        };
        assert_eq!(s.list_traces(&hit).unwrap().len(), 1);
        assert!(s.list_traces(&miss).unwrap().is_empty());
    }

    #[test]
    fn ids_cannot_escape_root() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        assert!(matches!(s.get_trace("../x"), Err(StoreError::InvalidId(_))));
        assert!(s.get_annotation("a", "..").is_err());
    }

    #[test]
    fn annotation_revisions_append() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        let t = trace();
        let mut a = MarkerAnnotation::new("tr-1", "ann");
        assert_eq!(s.store_annotation(&a, &t, None).unwrap(), 1);
        a.mark(1, "neutral");
        assert_eq!(s.store_annotation(&a, &t, Some(1)).unwrap(), 2);
        assert!(matches!(
            s.store_annotation(&a, &t, Some(1)),
            Err(StoreError::Conflict { expected: 1, current: 2 })
        ));
        let latest = s.get_annotation("tr-1", "ann").unwrap().unwrap();
        assert_eq!(latest.revision, 2);
        assert_eq!(latest.body, serde_json::to_string_pretty(&a).unwrap());
        assert_eq!(s.annotation_revisions("tr-1", "ann").unwrap(), vec![1, 2]);
        assert_eq!(s.submit_annotation(&t, "ann").unwrap(), 3);
        assert!(s.get_annotation("tr-1", "ann").unwrap().unwrap().annotation().unwrap().submitted);
        assert_eq!(s.latest_annotations().unwrap().len(), 1);
    }

    #[test]
    fn incomplete_submission_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        let t = trace();
        let a = MarkerAnnotation::new("tr-1", "ann");
        s.store_annotation(&a, &t, None).unwrap();
        assert!(matches!(
            s.submit_annotation(&t, "ann"),
            Err(StoreError::Invalid(MarkerError::Incomplete(_)))
        ));
    }

    #[test]
    fn concurrent_writers_get_distinct_revisions() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        let t = trace();
        std::thread::scope(|scope| {
            for _ in 0..8 {
                scope.spawn(|| {
                    let a = MarkerAnnotation::new("tr-1", "ann");
                    s.store_annotation(&a, &t, None).unwrap();
                });
            }
        });
        assert_eq!(s.annotation_revisions("tr-1", "ann").unwrap(), (1..=8).collect::<Vec<_>>());
    }
}
