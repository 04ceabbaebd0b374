//! Line-delimited run traces with a version header and the scenario embedded,
//! so a trace alone is enough to re-execute and diff the run.

use thiserror::Error;

use crate::model::{wall_clock, TimeMs};

pub const TRACE_VERSION: &str = "PAAS-TRACE v1";

pub fn code_version() -> String {
    format!("paas-core/{}", env!("CARGO_PKG_VERSION"))
}

/// Collects one record per observable action, in processing order.
#[derive(Debug, Default)]
pub struct TraceLog {
    lines: Vec<String>,
    events: u64,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one event line. `kind` is a short tag; `detail` is
    /// `key=value` pairs separated by spaces.
    pub fn event(&mut self, t: TimeMs, kind: &str, detail: &str) {
        self.events += 1;
        let wall = wall_clock(t);
        if detail.is_empty() {
            self.lines.push(format!("EVT {} [{}] {}", t.0, wall, kind));
        } else {
            self.lines.push(format!("EVT {} [{}] {} {}", t.0, wall, kind, detail));
        }
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Serializes the full trace: header, embedded scenario, events, footer.
    pub fn render(&self, seed: u64, scenario_toml: &str) -> String {
        let mut out = String::new();
        out.push_str(TRACE_VERSION);
        out.push('\n');
        out.push_str(&format!("CODE {}\n", code_version()));
        out.push_str(&format!("SEED {seed}\n"));
        out.push_str("SCENARIO-BEGIN\n");
        out.push_str(scenario_toml);
        if !scenario_toml.ends_with('\n') {
            out.push('\n');
        }
        out.push_str("SCENARIO-END\n");
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!("END events={}\n", self.events));
        out
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace corrupt: {0}")]
    Corrupt(String),
}

/// Parsed pieces of a serialized trace.
#[derive(Debug)]
pub struct ParsedTrace {
    pub code: String,
    pub seed: u64,
    pub scenario_toml: String,
    pub event_lines: Vec<String>,
}

pub fn parse_trace(text: &str) -> Result<ParsedTrace, TraceError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(v) if v == TRACE_VERSION => {}
        other => {
            return Err(TraceError::Corrupt(format!(
                "bad version line: {:?}",
                other.unwrap_or("<missing>")
            )))
        }
    }
    let code = lines
        .next()
        .and_then(|l| l.strip_prefix("CODE "))
        .ok_or_else(|| TraceError::Corrupt("missing CODE line".into()))?
        .to_string();
    let seed: u64 = lines
        .next()
        .and_then(|l| l.strip_prefix("SEED "))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| TraceError::Corrupt("missing or bad SEED line".into()))?;
    match lines.next() {
        Some("SCENARIO-BEGIN") => {}
        _ => return Err(TraceError::Corrupt("missing SCENARIO-BEGIN".into())),
    }
    let mut scenario_toml = String::new();
    let mut closed = false;
    for line in lines.by_ref() {
        if line == "SCENARIO-END" {
            closed = true;
            break;
        }
        scenario_toml.push_str(line);
        scenario_toml.push('\n');
    }
    if !closed {
        return Err(TraceError::Corrupt("missing SCENARIO-END".into()));
    }
    let mut event_lines = Vec::new();
    let mut saw_end = false;
    for line in lines {
        if let Some(rest) = line.strip_prefix("END ") {
            let _ = rest;
            saw_end = true;
            break;
        }
        if !line.is_empty() {
            event_lines.push(line.to_string());
        }
    }
    if !saw_end {
        return Err(TraceError::Corrupt("missing END footer".into()));
    }
    Ok(ParsedTrace {
        code,
        seed,
        scenario_toml,
        event_lines,
    })
}

/// One divergence between a recorded trace and its re-execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiff {
    pub line: usize,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug)]
pub struct ReplayReport {
    /// Set when the trace was produced by a different code version.
    pub code_version_warning: Option<String>,
    pub diffs: Vec<LineDiff>,
    pub recorded_events: usize,
    pub replayed_events: usize,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.diffs.is_empty() && self.recorded_events == self.replayed_events
    }
}

const MAX_DIFFS: usize = 20;

/// Diffs recorded event lines against a re-executed run's lines.
pub fn diff_events(recorded: &[String], replayed: &[String]) -> Vec<LineDiff> {
    let mut diffs = Vec::new();
    let n = recorded.len().max(replayed.len());
    for i in 0..n {
        if diffs.len() >= MAX_DIFFS {
            break;
        }
        let expected = recorded.get(i).cloned().unwrap_or_else(|| "<absent>".into());
        let actual = replayed.get(i).cloned().unwrap_or_else(|| "<absent>".into());
        if expected != actual {
            diffs.push(LineDiff {
                line: i + 1,
                expected,
                actual,
            });
        }
    }
    diffs
}
