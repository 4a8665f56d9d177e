//! Cross-mode comparison of run traces and planted-pattern recall.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use igpm_core::graph::VertexId;
use igpm_core::matcher::MatchResult;
use igpm_core::pem::{measure_window, Mode, PemError, RunTrace, WindowSummary};
use serde::{Deserialize, Serialize};

use crate::generate::GroundTruth;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("no traces to compare")]
    Empty,
    #[error("traces come from different workloads: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Window(#[from] PemError),
}

/// `baseline / other`, with `0 / 0 = 1`.
pub fn ratio(baseline: f64, other: f64) -> f64 {
    if baseline == other {
        1.0
    } else if other == 0.0 {
        f64::INFINITY
    } else {
        baseline / other
    }
}

/// Ratios of one trace against the baseline. Speedups and recompute ratios
/// are `baseline / trace`; the pattern ratio is `trace / baseline`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub speedup: f64,
    pub work_speedup: f64,
    pub recomputed_ratio: f64,
    pub pattern_ratio: f64,
}

impl Ratios {
    fn of(base: &WindowSummary, other: &WindowSummary) -> Self {
        Ratios {
            speedup: ratio(base.elapsed_ns as f64, other.elapsed_ns as f64),
            work_speedup: ratio(base.work as f64, other.work as f64),
            recomputed_ratio: ratio(base.recomputed as f64, other.recomputed as f64),
            pattern_ratio: ratio(other.total_patterns as f64, base.total_patterns as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub window: WindowSummary,
    pub ratios: Ratios,
    /// One entry per step inside the window.
    pub per_step: Vec<(u64, Ratios)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: Mode,
    pub pattern: String,
    pub from: usize,
    pub to: usize,
    pub modes: Vec<ModeReport>,
}

/// Compares traces against the first one over rows `from..=to` (1-based;
/// `None` means the whole run). Traces must share the pattern and the step
/// sequence.
pub fn compare_runs(traces: &[RunTrace], window: Option<(usize, usize)>) -> Result<Comparison, ReportError> {
    let base = traces.first().ok_or(ReportError::Empty)?;
    let steps: Vec<u64> = base.rows.iter().map(|r| r.step).collect();
    for t in &traces[1..] {
        if t.pattern != base.pattern {
            return Err(ReportError::Mismatch(format!("pattern {} vs {}", base.pattern, t.pattern)));
        }
        if t.rows.iter().map(|r| r.step).ne(steps.iter().copied()) {
            return Err(ReportError::Mismatch(format!(
                "{} has {} steps, {} has {}",
                base.mode,
                base.len(),
                t.mode,
                t.len()
            )));
        }
    }
    let (from, to) = window.unwrap_or((1, base.len()));
    let base_window = measure_window(base, from, to)?;
    let mut modes = Vec::new();
    for t in traces {
        let w = measure_window(t, from, to)?;
        let per_step = (from..=to)
            .map(|i| {
                let a = measure_window(base, i, i)?;
                let b = measure_window(t, i, i)?;
                Ok((t.rows[i - 1].step, Ratios::of(&a, &b)))
            })
            .collect::<Result<_, PemError>>()?;
        modes.push(ModeReport { mode: t.mode, ratios: Ratios::of(&base_window, &w), window: w, per_step });
    }
    Ok(Comparison { baseline: base.mode, pattern: base.pattern.clone(), from, to, modes })
}

impl Comparison {
    /// Long-format CSV: one `window` row per mode, then one row per step.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scope,step,mode,speedup,work_speedup,recomputed_ratio,pattern_ratio\n");
        let mut line = |scope: &str, step: String, mode: Mode, r: &Ratios| {
            let _ = writeln!(
                s,
                "{scope},{step},{mode},{},{},{},{}",
                r.speedup, r.work_speedup, r.recomputed_ratio, r.pattern_ratio
            );
        };
        for m in &self.modes {
            line("window", format!("{}-{}", self.from, self.to), m.mode, &m.ratios);
        }
        for m in &self.modes {
            for (step, r) in &m.per_step {
                line("step", step.to_string(), m.mode, r);
            }
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "pattern {}, rows {}..={}, ratios against {}\n{:<9} {:>14} {:>14} {:>12} {:>9} {:>9} {:>9} {:>11} {:>11}\n",
            self.pattern,
            self.from,
            self.to,
            self.baseline,
            "mode",
            "elapsed_ns",
            "work",
            "recomputed",
            "patterns",
            "speedup",
            "work_x",
            "recompute_x",
            "patterns_x",
        );
        for m in &self.modes {
            let _ = writeln!(
                s,
                "{:<9} {:>14} {:>14} {:>12} {:>9} {:>9.3} {:>9.3} {:>11.3} {:>11.3}",
                m.mode.name(),
                m.window.elapsed_ns,
                m.window.work,
                m.window.recomputed,
                m.window.total_patterns,
                m.ratios.speedup,
                m.ratios.work_speedup,
                m.ratios.recomputed_ratio,
                m.ratios.pattern_ratio,
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recall {
    pub found: usize,
    pub total: usize,
}

impl Recall {
    /// Found over total; 1 when nothing was planted.
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.found as f64 / self.total as f64
        }
    }
}

/// Planted triangles whose vertex set equals that of some exact result.
/// Result vertex ids must be the generator's ids.
pub fn planted_recall<'a>(truth: &GroundTruth, results: impl IntoIterator<Item = &'a MatchResult>) -> Recall {
    let found_sets: BTreeSet<Vec<VertexId>> = results
        .into_iter()
        .filter(|r| r.exact)
        .map(|r| {
            let mut v = r.mapping.clone();
            v.sort_unstable();
            v
        })
        .collect();
    let found = truth
        .triangles
        .iter()
        .filter(|t| {
            let mut v: Vec<VertexId> = t.vertices.iter().map(|&x| VertexId(x)).collect();
            v.sort_unstable();
            found_sets.contains(&v)
        })
        .count();
    Recall { found, total: truth.triangles.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use igpm_core::agent::Observation;
    use igpm_core::pem::{StepRecord, TRACE_VERSION};

    fn trace(mode: Mode, recomputed: &[usize]) -> RunTrace {
        RunTrace {
            version: TRACE_VERSION,
            mode,
            pattern: "triangle".into(),
            rows: recomputed
                .iter()
                .enumerate()
                .map(|(i, &r)| StepRecord {
                    step: i as u64 + 1,
                    mode,
                    c: 0,
                    elapsed_ns: 10 * r as u64,
                    recomputed: r,
                    new_patterns: 0,
                    invalidated_patterns: 0,
                    total_patterns: 2,
                    exact_patterns: 2,
                    reward: 0.0,
                    action: None,
                    observation: Observation::default(),
                    work: r as u64,
                    loss: None,
                })
                .collect(),
        }
    }

    #[test]
    fn self_comparison_is_all_ones() {
        let t = trace(Mode::Batch, &[5, 0, 7]);
        let c = compare_runs(&[t.clone(), t], None).unwrap();
        for m in &c.modes {
            for r in std::iter::once(&m.ratios).chain(m.per_step.iter().map(|p| &p.1)) {
                assert_eq!((r.speedup, r.work_speedup, r.recomputed_ratio, r.pattern_ratio), (1.0, 1.0, 1.0, 1.0));
            }
        }
        assert!(c.to_csv().lines().count() == 1 + 2 + 6);
        assert!(c.to_table().contains("batch"));
    }

    #[test]
    fn ratios_against_baseline() {
        let c = compare_runs(&[trace(Mode::Batch, &[10, 10]), trace(Mode::Naive, &[2, 3])], Some((1, 2))).unwrap();
        assert_eq!(c.modes[1].ratios.recomputed_ratio, 4.0);
        assert_eq!(c.modes[1].per_step[0].1.recomputed_ratio, 5.0);
    }

    #[test]
    fn mismatched_traces_error() {
        let mut other = trace(Mode::Naive, &[1, 2]);
        assert!(matches!(
            compare_runs(&[trace(Mode::Batch, &[1, 2, 3]), other.clone()], None),
            Err(ReportError::Mismatch(_))
        ));
        other.pattern = "square".into();
        assert!(matches!(compare_runs(&[trace(Mode::Batch, &[1, 2]), other], None), Err(ReportError::Mismatch(_))));
        assert!(matches!(compare_runs(&[], None), Err(ReportError::Empty)));
        assert!(compare_runs(&[trace(Mode::Batch, &[1])], Some((1, 2))).is_err());
    }

    #[test]
    fn recall_fraction_bounds() {
        assert_eq!(Recall { found: 0, total: 0 }.fraction(), 1.0);
        assert_eq!(Recall { found: 1, total: 4 }.fraction(), 0.25);
    }
}
