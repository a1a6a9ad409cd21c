use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datamodel::Catalog;
use crate::error::Result;

use super::{LatencyLog, Optimizer, PreparedQuery};

/// Selected-plan latency over best-candidate latency.
pub fn q_error(selected: f64, best: f64) -> f64 {
    if selected == best {
        1.0
    } else {
        selected / best.max(f64::MIN_POSITIVE)
    }
}

/// Nearest-rank percentile of ascending `sorted`, `p` in (0, 1].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = (p * sorted.len() as f64).ceil() as usize;
    sorted[k.clamp(1, sorted.len()) - 1]
}

/// One optimizer decision on one test query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySelection {
    pub query: String,
    pub selected: usize,
    /// ST.
    pub selected_latency: f64,
    /// GT: the fastest collected candidate.
    pub best_latency: f64,
    pub q: f64,
    /// Candidates strictly faster than the selected one.
    pub rank: usize,
    pub plans: usize,
    /// Seconds spent featurizing and scoring the candidates.
    pub inference_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerMetrics {
    pub name: String,
    /// Σ ST over evaluated queries.
    pub total_runtime: f64,
    pub avg_q: f64,
    pub q90: f64,
    pub q95: f64,
    /// N → fraction of queries whose selection ranks among the N fastest.
    pub top_hr: BTreeMap<usize, f64>,
    pub evaluated: usize,
    /// Queries without ground truth or without a latency for the selection.
    pub excluded: Vec<String>,
    pub max_inference_secs: f64,
    pub selections: Vec<QuerySelection>,
}

impl OptimizerMetrics {
    pub fn top(&self, n: usize) -> f64 {
        self.top_hr.get(&n).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub optimizers: Vec<OptimizerMetrics>,
}

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<&OptimizerMetrics> {
        self.optimizers.iter().find(|m| m.name == name)
    }

    pub fn to_csv(&self) -> String {
        let ns: Vec<usize> = self
            .optimizers
            .first()
            .map(|m| m.top_hr.keys().copied().collect())
            .unwrap_or_default();
        let mut out = String::from("optimizer,total_runtime,avg_q,q90,q95");
        for n in &ns {
            out.push_str(&format!(",top{n}_hr"));
        }
        out.push_str(",evaluated,excluded\n");
        for m in &self.optimizers {
            out.push_str(&format!(
                "{},{:.6},{:.4},{:.4},{:.4}",
                m.name, m.total_runtime, m.avg_q, m.q90, m.q95
            ));
            for n in &ns {
                out.push_str(&format!(",{:.4}", m.top(*n)));
            }
            out.push_str(&format!(",{},{}\n", m.evaluated, m.excluded.len()));
        }
        out
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14} {:>12} {:>8} {:>8} {:>8}  top-N hit rates",
            "optimizer", "runtime(s)", "AvgQ", "Q90", "Q95"
        )?;
        for m in &self.optimizers {
            let hr: Vec<String> = m.top_hr.iter().map(|(n, v)| format!("top{n}={v:.3}")).collect();
            writeln!(
                f,
                "{:<14} {:>12.4} {:>8.3} {:>8.3} {:>8.3}  {}",
                m.name,
                m.total_runtime,
                m.avg_q,
                m.q90,
                m.q95,
                hr.join(" ")
            )?;
        }
        Ok(())
    }
}

/// Score each optimizer on `test` against the collected latencies.
pub fn evaluate(
    optimizers: &[Optimizer],
    test: &[PreparedQuery],
    log: &LatencyLog,
    cat: &Catalog,
    top_n: &[usize],
) -> Result<MetricsReport> {
    let mut out = Vec::new();
    for opt in optimizers {
        let mut selections = Vec::new();
        let mut excluded = Vec::new();
        for pq in test {
            let lat = log.latencies(&pq.id, pq.space.len());
            let known: Vec<f64> = lat.iter().flatten().copied().collect();
            let Some(best) = known.iter().copied().reduce(f64::min) else {
                excluded.push(pq.id.clone());
                continue;
            };
            let started = Instant::now();
            let selected = opt.select(pq, cat)?;
            let inference_secs = started.elapsed().as_secs_f64();
            let Some(st) = lat[selected] else {
                excluded.push(pq.id.clone());
                continue;
            };
            selections.push(QuerySelection {
                query: pq.id.clone(),
                selected,
                selected_latency: st,
                best_latency: best,
                q: q_error(st, best),
                rank: known.iter().filter(|&&l| l < st).count(),
                plans: pq.space.len(),
                inference_secs,
            });
        }
        if !excluded.is_empty() {
            log::warn!("{}: {} queries excluded for missing ground truth", opt.name(), excluded.len());
        }
        let n = selections.len().max(1) as f64;
        let mut qs: Vec<f64> = selections.iter().map(|s| s.q).collect();
        qs.sort_by(f64::total_cmp);
        out.push(OptimizerMetrics {
            name: opt.name().to_string(),
            total_runtime: selections.iter().map(|s| s.selected_latency).sum(),
            avg_q: qs.iter().sum::<f64>() / n,
            q90: percentile(&qs, 0.9),
            q95: percentile(&qs, 0.95),
            top_hr: top_n
                .iter()
                .map(|&k| (k, selections.iter().filter(|s| s.rank < k).count() as f64 / n))
                .collect(),
            evaluated: selections.len(),
            excluded,
            max_inference_secs: selections.iter().map(|s| s.inference_secs).fold(0.0, f64::max),
            selections,
        });
    }
    Ok(MetricsReport { optimizers: out })
}
