//! On-disk formats: run traces (CSV and JSON), query patterns, agent weight
//! snapshots, community dumps and planted ground truth.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use igpm_core::agent::{Action, AgentError, Observation, QNetwork};
use igpm_core::clustering::CommunityAssignment;
use igpm_core::graph::Label;
use igpm_core::pattern::{make_pattern, PatternError, PatternKind, QueryPattern};
use igpm_core::pem::{Mode, RunTrace, StepRecord, TRACE_VERSION};
use serde::{Deserialize, Serialize};

use crate::generate::GroundTruth;

pub const TRACE_MAGIC: &str = "# igpm-trace v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("{0}")]
    Invalid(String),
}

impl From<io::Error> for FormatError {
    fn from(source: io::Error) -> Self {
        FormatError::Io { path: "<stream>".into(), source }
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.display().to_string(), source }
}

/// One CSV row. Field order is the column order.
#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    step: u64,
    mode: Mode,
    c: usize,
    elapsed_ns: u64,
    recomputed: usize,
    new_patterns: usize,
    total_patterns: usize,
    exact_patterns: usize,
    reward: f64,
    action: Option<Action>,
    invalidated_patterns: usize,
    work: u64,
    density: f64,
    affected_fraction: f64,
    loss: Option<f64>,
}

impl From<&StepRecord> for TraceRow {
    fn from(r: &StepRecord) -> Self {
        TraceRow {
            step: r.step,
            mode: r.mode,
            c: r.c,
            elapsed_ns: r.elapsed_ns,
            recomputed: r.recomputed,
            new_patterns: r.new_patterns,
            total_patterns: r.total_patterns,
            exact_patterns: r.exact_patterns,
            reward: r.reward,
            action: r.action,
            invalidated_patterns: r.invalidated_patterns,
            work: r.work,
            density: r.observation.density,
            affected_fraction: r.observation.affected_fraction,
            loss: r.loss,
        }
    }
}

impl From<TraceRow> for StepRecord {
    fn from(r: TraceRow) -> Self {
        StepRecord {
            step: r.step,
            mode: r.mode,
            c: r.c,
            elapsed_ns: r.elapsed_ns,
            recomputed: r.recomputed,
            new_patterns: r.new_patterns,
            invalidated_patterns: r.invalidated_patterns,
            total_patterns: r.total_patterns,
            exact_patterns: r.exact_patterns,
            reward: r.reward,
            action: r.action,
            // density and affected_fraction were clamped when first built
            observation: Observation { density: r.density, affected_fraction: r.affected_fraction },
            work: r.work,
            loss: r.loss,
        }
    }
}

/// Writes a trace as CSV. The first line is a comment carrying the format
/// version, mode and pattern name.
pub fn write_trace_csv<W: Write>(trace: &RunTrace, mut w: W) -> Result<(), FormatError> {
    writeln!(w, "{TRACE_MAGIC} mode={} pattern={}", trace.mode, trace.pattern)?;
    let mut out = csv::Writer::from_writer(w);
    for r in &trace.rows {
        out.serialize(TraceRow::from(r))?;
    }
    if trace.rows.is_empty() {
        out.write_record([
            "step",
            "mode",
            "c",
            "elapsed_ns",
            "recomputed",
            "new_patterns",
            "total_patterns",
            "exact_patterns",
            "reward",
            "action",
            "invalidated_patterns",
            "work",
            "density",
            "affected_fraction",
            "loss",
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<RunTrace, FormatError> {
    let mut reader = BufReader::new(r);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let rest = first
        .trim_end()
        .strip_prefix(TRACE_MAGIC)
        .ok_or_else(|| FormatError::Invalid(format!("missing {TRACE_MAGIC:?} header")))?;
    let mut mode = None;
    let mut pattern = String::new();
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("mode", m)) => mode = Some(m.parse::<Mode>().map_err(FormatError::Invalid)?),
            Some(("pattern", p)) => pattern = p.to_string(),
            _ => {}
        }
    }
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize::<TraceRow>() {
        rows.push(StepRecord::from(row?));
    }
    let mode = mode.or_else(|| rows.first().map(|r| r.mode)).unwrap_or_default();
    Ok(RunTrace { version: TRACE_VERSION, mode, pattern, rows })
}

pub fn save_trace_csv(trace: &RunTrace, path: &Path) -> Result<(), FormatError> {
    let f = fs::File::create(path).map_err(io_at(path))?;
    write_trace_csv(trace, io::BufWriter::new(f))
}

pub fn load_trace_csv(path: &Path) -> Result<RunTrace, FormatError> {
    read_trace_csv(fs::File::open(path).map_err(io_at(path))?)
}

pub fn save_trace_json(trace: &RunTrace, path: &Path) -> Result<(), FormatError> {
    let f = fs::File::create(path).map_err(io_at(path))?;
    serde_json::to_writer_pretty(io::BufWriter::new(f), trace)?;
    Ok(())
}

pub fn load_trace_json(path: &Path) -> Result<RunTrace, FormatError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads either trace format, picked by extension.
pub fn load_trace(path: &Path) -> Result<RunTrace, FormatError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => load_trace_json(path),
        _ => load_trace_csv(path),
    }
}

/// Copy of `trace` with wall-clock columns zeroed, for byte comparison.
pub fn strip_timing(trace: &RunTrace) -> RunTrace {
    let mut t = trace.clone();
    for r in &mut t.rows {
        r.elapsed_ns = 0;
    }
    t
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternVertex {
    id: usize,
    #[serde(default = "default_label")]
    label: String,
}

fn default_label() -> String {
    igpm_core::graph::DEFAULT_LABEL.to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternFile {
    #[serde(default)]
    name: Option<String>,
    vertices: Vec<PatternVertex>,
    edges: Vec<(usize, usize)>,
}

/// Parses `{"vertices":[{"id":0,"label":"V"}],"edges":[[0,1]]}`. Ids must
/// cover `0..n` exactly.
pub fn parse_pattern_json(text: &str, fallback_name: &str) -> Result<QueryPattern, FormatError> {
    let file: PatternFile = serde_json::from_str(text)?;
    let n = file.vertices.len();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    for v in &file.vertices {
        let slot =
            labels.get_mut(v.id).ok_or_else(|| FormatError::Invalid(format!("vertex id {} outside 0..{n}", v.id)))?;
        if slot.replace(Label::new(&v.label)).is_some() {
            return Err(FormatError::Invalid(format!("vertex id {} listed twice", v.id)));
        }
    }
    let labels = labels.into_iter().map(|l| l.expect("ids cover 0..n")).collect();
    let name = file.name.unwrap_or_else(|| fallback_name.to_string());
    Ok(QueryPattern::new(&name, labels, file.edges)?)
}

pub fn pattern_to_json(pattern: &QueryPattern) -> String {
    let file = PatternFile {
        name: Some(pattern.name.clone()),
        vertices: pattern
            .labels
            .iter()
            .enumerate()
            .map(|(id, l)| PatternVertex { id, label: l.as_str().to_string() })
            .collect(),
        edges: pattern.edges.clone(),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes")
}

/// A built-in name (`triangle`, `square`, `star5`, `k4`) or a JSON file path.
pub fn load_pattern(spec: &str) -> Result<QueryPattern, FormatError> {
    if let Ok(kind) = spec.parse::<PatternKind>() {
        return Ok(make_pattern(kind));
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pattern");
    parse_pattern_json(&text, stem)
}

pub fn save_weights(net: &QNetwork, path: &Path) -> Result<(), FormatError> {
    fs::write(path, net.to_text()).map_err(io_at(path))
}

pub fn load_weights(path: &Path) -> Result<QNetwork, FormatError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    Ok(QNetwork::from_text(&text)?)
}

/// `vertex community` lines, ascending by vertex.
pub fn write_assignment<W: Write>(a: &CommunityAssignment, mut w: W) -> io::Result<()> {
    writeln!(w, "# vertex community (modularity {})", a.modularity)?;
    for (v, c) in &a.assignment {
        writeln!(w, "{} {c}", v.0)?;
    }
    w.flush()
}

pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<(), FormatError> {
    fs::write(path, serde_json::to_string_pretty(truth)?).map_err(io_at(path))
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth, FormatError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> RunTrace {
        let row = |step: u64, action, loss| StepRecord {
            step,
            mode: Mode::Adaptive,
            c: 7,
            elapsed_ns: 1234,
            recomputed: 5,
            new_patterns: 1,
            invalidated_patterns: 0,
            total_patterns: 3,
            exact_patterns: 2,
            reward: 0.1 + step as f64,
            action,
            observation: Observation::new(1.5, 0.25),
            work: 99,
            loss,
        };
        RunTrace {
            version: TRACE_VERSION,
            mode: Mode::Adaptive,
            pattern: "triangle".into(),
            rows: vec![row(1, None, None), row(2, Some(Action::Increment), Some(0.031_25))],
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_trace_csv(&trace(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(TRACE_MAGIC));
        assert!(text.lines().nth(1).unwrap().starts_with("step,mode,c,elapsed_ns"));
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), trace());
    }

    #[test]
    fn csv_without_header_is_rejected() {
        assert!(matches!(read_trace_csv(&b"step,mode\n"[..]), Err(FormatError::Invalid(_))));
    }

    #[test]
    fn stripping_timing_zeroes_elapsed() {
        assert!(strip_timing(&trace()).rows.iter().all(|r| r.elapsed_ns == 0));
    }

    #[test]
    fn pattern_json_round_trip() {
        let p = parse_pattern_json(
            r#"{"vertices":[{"id":1,"label":"B"},{"id":0,"label":"A"},{"id":2}],"edges":[[0,1],[1,2]]}"#,
            "path",
        )
        .unwrap();
        assert_eq!(p.name, "path");
        assert_eq!(p.labels[0].as_str(), "A");
        assert_eq!(p.labels[2].as_str(), "V");
        assert_eq!(parse_pattern_json(&pattern_to_json(&p), "x").unwrap(), p);
    }

    #[test]
    fn pattern_json_errors() {
        assert!(parse_pattern_json(r#"{"vertices":[{"id":3}],"edges":[]}"#, "x").is_err());
        assert!(parse_pattern_json(r#"{"vertices":[{"id":0},{"id":0}],"edges":[[0,1]]}"#, "x").is_err());
        assert!(matches!(
            parse_pattern_json(r#"{"vertices":[{"id":0},{"id":1},{"id":2}],"edges":[[0,1]]}"#, "x"),
            Err(FormatError::Pattern(PatternError::Disconnected))
        ));
    }

    #[test]
    fn builtin_names_load() {
        assert_eq!(load_pattern("k4").unwrap().edges.len(), 6);
    }
}
