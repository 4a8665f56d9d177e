//! Timestamped edge-list ingestion.
//!
//! Input lines are `src dst timestamp [label]`, whitespace separated, with
//! `#` comment lines. Vertex ids are remapped densely in order of first
//! appearance and edges are grouped into one batch per time bucket.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use igpm_core::graph::{Label, UpdateBatch, UpdateEvent, VertexId};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Hour,
    #[default]
    Day,
    /// Every distinct timestamp is its own step.
    Raw,
}

impl Granularity {
    pub fn bucket(self, ts: i64) -> i64 {
        match self {
            Granularity::Hour => ts.div_euclid(3600),
            Granularity::Day => ts.div_euclid(86_400),
            Granularity::Raw => ts,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Hour => "hour",
            Granularity::Day => "day",
            Granularity::Raw => "raw",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hour" => Ok(Granularity::Hour),
            "day" => Ok(Granularity::Day),
            "raw" => Ok(Granularity::Raw),
            _ => Err(format!("unknown granularity {s:?} (hour, day, raw)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("too many distinct vertices for dense ids")]
    TooManyVertices,
}

/// An ingested stream.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeStream {
    pub batches: Vec<UpdateBatch>,
    /// `id_map[dense]` is the id used in the file.
    pub id_map: Vec<u64>,
    pub edge_events: usize,
    pub warnings: Vec<String>,
}

impl EdgeStream {
    pub fn vertex_count(&self) -> usize {
        self.id_map.len()
    }

    pub fn steps(&self) -> usize {
        self.batches.len()
    }

    /// Dense id of a file id.
    pub fn dense_id(&self, original: u64) -> Option<VertexId> {
        self.id_map.iter().position(|&x| x == original).map(|i| VertexId(i as u32))
    }
}

struct Record {
    src: u64,
    dst: u64,
    ts: i64,
    label: Option<String>,
}

fn parse_line(line: &str, no: usize) -> Result<Option<Record>, IngestError> {
    let t = line.trim();
    if t.is_empty() || t.starts_with('#') {
        return Ok(None);
    }
    let bad = |message: String| IngestError::Malformed { line: no, message };
    let cols: Vec<&str> = t.split_whitespace().collect();
    if !(3..=4).contains(&cols.len()) {
        return Err(bad(format!("expected `src dst timestamp [label]`, found {} fields", cols.len())));
    }
    let src = cols[0].parse::<u64>().map_err(|_| bad(format!("bad source id {:?}", cols[0])))?;
    let dst = cols[1].parse::<u64>().map_err(|_| bad(format!("bad destination id {:?}", cols[1])))?;
    let ts = cols[2].parse::<i64>().map_err(|_| bad(format!("bad timestamp {:?}", cols[2])))?;
    Ok(Some(Record { src, dst, ts, label: cols.get(3).map(|s| s.to_string()) }))
}

/// Parses an edge list from any reader.
pub fn parse_edge_stream<R: BufRead>(reader: R, granularity: Granularity) -> Result<EdgeStream, IngestError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IngestError::Io { path: "<input>".into(), source: e })?;
        if let Some(r) = parse_line(&line, i + 1)? {
            records.push(r);
        }
    }
    let mut warnings = Vec::new();
    if records.windows(2).any(|w| w[1].ts < w[0].ts) {
        warnings.push("timestamps are not monotonic; edges were sorted by timestamp".to_string());
        records.sort_by_key(|r| r.ts);
    }

    let mut dense: HashMap<u64, u32> = HashMap::new();
    let mut id_map = Vec::new();
    let mut id = |x: u64| -> Result<VertexId, IngestError> {
        if let Some(&d) = dense.get(&x) {
            return Ok(VertexId(d));
        }
        let d = u32::try_from(id_map.len()).map_err(|_| IngestError::TooManyVertices)?;
        dense.insert(x, d);
        id_map.push(x);
        Ok(VertexId(d))
    };
    let mut labels: HashMap<VertexId, String> = HashMap::new();
    let mut batches: Vec<UpdateBatch> = Vec::new();
    let mut current: Option<i64> = None;
    for r in &records {
        let bucket = granularity.bucket(r.ts);
        if current != Some(bucket) {
            current = Some(bucket);
            batches.push(UpdateBatch::new(batches.len() as u64 + 1, Vec::new()));
        }
        let (src, dst) = (id(r.src)?, id(r.dst)?);
        let events = &mut batches.last_mut().expect("pushed above").events;
        events.push(UpdateEvent::EdgeAdd { src, dst });
        if let Some(l) = &r.label {
            if labels.get(&src) != Some(l) {
                labels.insert(src, l.clone());
                events.push(UpdateEvent::VertexLabelUpdate { vertex: src, label: Label::new(l) });
            }
        }
    }
    Ok(EdgeStream { batches, id_map, edge_events: records.len(), warnings })
}

pub fn ingest_edge_stream(path: &Path, granularity: Granularity) -> Result<EdgeStream, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
    parse_edge_stream(BufReader::new(file), granularity).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::Io { path: path.display().to_string(), source },
        other => other,
    })
}
