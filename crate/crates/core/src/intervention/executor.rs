use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::InterventionError;
use crate::trace::{Role, ToolCall, Trace};

/// Position of a call within the sliced turns: assistant-turn ordinal and
/// call index within that turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallSite {
    pub turn: usize,
    pub call: usize,
}

/// Produces the observation for one tool call.
pub trait ToolExecutor {
    fn execute(&self, call: &ToolCall, site: CallSite) -> Result<String, InterventionError>;
}

/// Substitutes the observations recorded in the source trace. The `n`-th
/// call of a turn receives the `n`-th observation message that follows it.
#[derive(Debug, Clone)]
pub struct ReplayExecutor {
    observations: Vec<Vec<String>>,
}

impl ReplayExecutor {
    pub fn from_trace(trace: &Trace) -> Self {
        let mut observations: Vec<Vec<String>> = Vec::new();
        for m in &trace.messages {
            match m.role {
                Role::Assistant => observations.push(Vec::new()),
                Role::Observation => {
                    if let Some(last) = observations.last_mut() {
                        last.push(m.content.clone());
                    }
                }
                _ => {}
            }
        }
        Self { observations }
    }
}

impl ToolExecutor for ReplayExecutor {
    fn execute(&self, _call: &ToolCall, site: CallSite) -> Result<String, InterventionError> {
        self.observations
            .get(site.turn)
            .and_then(|turn| turn.get(site.call))
            .cloned()
            .ok_or(InterventionError::MissingObservation {
                turn: site.turn,
                call: site.call,
            })
    }
}

#[derive(Serialize)]
struct ExecuteRequest<'a> {
    tool: &'a str,
    arguments: &'a serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct ExecuteResponse {
    observation: String,
}

/// Re-executes calls against a live environment service:
/// `POST {base_url}/execute` with `{"tool", "arguments"}`, answered by
/// `{"observation"}`.
#[derive(Debug, Clone)]
pub struct HttpExecutor {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl HttpExecutor {
    pub fn new(base_url: impl Into<String>) -> Result<Self, InterventionError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| InterventionError::Domain(format!("http client: {e}")))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client,
        })
    }
}

impl ToolExecutor for HttpExecutor {
    fn execute(&self, call: &ToolCall, _site: CallSite) -> Result<String, InterventionError> {
        let fail = |message: String| InterventionError::Execution {
            tool: call.name.clone(),
            arguments: serde_json::to_string(&call.arguments).unwrap_or_default(),
            message,
        };
        let resp = self
            .client
            .post(format!("{}/execute", self.base_url))
            .json(&ExecuteRequest {
                tool: &call.name,
                arguments: &call.arguments,
            })
            .send()
            .map_err(|e| fail(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(fail(format!("status {status}: {body}")));
        }
        resp.json::<ExecuteResponse>()
            .map(|r| r.observation)
            .map_err(|e| fail(format!("bad response body: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Message;

    #[test]
    fn replay_reads_observations_positionally() {
        let call = ToolCall {
            name: "x".into(),
            arguments: Default::default(),
        };
        let mut t = crate::intervention::tests::trace_with_turns("t", 2);
        let n = t.messages.len();
        t.messages.push(Message::new(n, Role::Assistant, "no obs"));
        let r = ReplayExecutor::from_trace(&t);
        assert_eq!(r.execute(&call, CallSite { turn: 1, call: 0 }).unwrap(), "obs1");
        assert!(matches!(
            r.execute(&call, CallSite { turn: 2, call: 0 }),
            Err(InterventionError::MissingObservation { turn: 2, call: 0 })
        ));
    }

    #[test]
    fn unreachable_service_reports_call() {
        let call = ToolCall {
            name: "nmr".into(),
            arguments: Default::default(),
        };
        let ex = HttpExecutor::new("http://127.0.0.1:1").unwrap();
        match ex.execute(&call, CallSite { turn: 0, call: 0 }) {
            Err(InterventionError::Execution { tool, .. }) => assert_eq!(tool, "nmr"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
