//! Experiment orchestration: plan latency collection with runtime-based
//! pruning, training-pair construction, optimizer training and evaluation,
//! and the training-size and pruning studies.

mod metrics;
mod studies;
mod train;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cmlero::TrainConfig;
use crate::datamodel::Dataset;
use crate::engines::{execute_plan, probe_plan, transfer_cost_bytes, CostMode, CostModelConfig, GraphPhysicalPlan, LatencyBreakdown};
use crate::error::{Error, Result};
use crate::explorer::{enumerate_candidates, PlanSpace};
use crate::featurizer::raw_graph_plan;
use crate::frontend::{parse_query_file, CandidatePlan};

pub use metrics::{evaluate, percentile, q_error, MetricsReport, OptimizerMetrics, QuerySelection};
pub use studies::{
    selected_moves_fewest_bytes, study_pruning, study_training_size, PruneComparison, PruningReport, SizePoint,
};
pub use train::{
    build_pairs, build_regression_samples, plan_structures, train_cmlero, train_rlm, Corpus, Optimizer,
};

/// Probe timeout T₁ at desk scale, in seconds.
pub const DEFAULT_PROBE_TIMEOUT: f64 = 60.0;

/// Ordinal stand-ins for plans cut off during collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sentinel {
    /// The graph result would take longer than the transfer cap to ship.
    LargeQuery,
    /// The count probe exceeded T₁.
    ExtremeLargeQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub cost: CostModelConfig,
    /// T₁ in seconds.
    pub probe_timeout: f64,
    /// Seconds of graph-result transfer beyond which a plan is recorded as
    /// `LARGE_QUERY` without execution.
    pub transfer_cap: f64,
    /// Discarded runs before timing in measured mode.
    pub warmup: usize,
    /// Timed runs in measured mode; the median is kept.
    pub repeats: usize,
    /// Worker threads for synthetic-mode collection.
    pub threads: usize,
    pub cmlero: TrainConfig,
    pub rlm: TrainConfig,
    pub ts_threshold: f64,
    /// N values reported as Top-N hit rates.
    pub top_n: Vec<usize>,
    /// Relative slack of the pruning check.
    pub prune_margin_rel: f64,
    /// Absolute slack of the pruning check, seconds.
    pub prune_margin_abs: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            cost: CostModelConfig::default(),
            probe_timeout: DEFAULT_PROBE_TIMEOUT,
            transfer_cap: DEFAULT_PROBE_TIMEOUT,
            warmup: 1,
            repeats: 3,
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            cmlero: TrainConfig::default(),
            rlm: TrainConfig::default(),
            ts_threshold: 100_000.0 / 100.0,
            top_n: vec![1, 3],
            prune_margin_rel: 0.1,
            prune_margin_abs: 0.03,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        if !(self.probe_timeout > 0.0 && self.transfer_cap > 0.0) {
            return Err(Error::Config("probe_timeout and transfer_cap must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(self.ts_threshold > 0.0) {
            return Err(Error::Config("ts_threshold must be positive".into()));
        }
        if self.top_n.iter().any(|&n| n == 0) {
            return Err(Error::Config("top_n values must be positive".into()));
        }
        Ok(())
    }

    pub fn sentinel_value(&self, s: Sentinel) -> f64 {
        match s {
            Sentinel::LargeQuery => 1.5 * self.probe_timeout,
            Sentinel::ExtremeLargeQuery => 3.0 * self.probe_timeout,
        }
    }
}

/// One collected plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub query: String,
    pub plan: usize,
    pub movement: Vec<String>,
    /// Seconds, or the sentinel's ordinal value.
    pub latency: f64,
    pub sentinel: Option<Sentinel>,
    /// Present when the plan ran to completion.
    pub breakdown: Option<LatencyBreakdown>,
    pub moved_bytes: Option<u64>,
    /// Rows of the graph query result.
    pub graph_rows: Option<u64>,
    pub mode: CostMode,
    /// Engine failure; such records carry no usable latency.
    pub error: Option<String>,
}

impl LatencyRecord {
    pub fn usable(&self) -> bool {
        self.error.is_none()
    }
}

/// Line-delimited records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyLog {
    pub records: Vec<LatencyRecord>,
}

impl LatencyLog {
    /// Usable records of `query`, indexed by plan.
    pub fn for_query(&self, query: &str) -> Vec<&LatencyRecord> {
        let mut out: Vec<&LatencyRecord> = self.records.iter().filter(|r| r.query == query).collect();
        out.sort_by_key(|r| r.plan);
        out
    }

    /// Latency per plan index; `None` for failed or missing plans.
    pub fn latencies(&self, query: &str, plans: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; plans];
        for r in self.records.iter().filter(|r| r.query == query && r.usable()) {
            if r.plan < plans {
                out[r.plan] = Some(r.latency);
            }
        }
        out
    }

    pub fn queries(&self) -> Vec<String> {
        let mut q: Vec<String> = self.records.iter().map(|r| r.query.clone()).collect();
        q.sort();
        q.dedup();
        q
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for r in &self.records {
            writeln!(f, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::load(path, n + 1, e.to_string()))?);
        }
        Ok(LatencyLog { records })
    }
}

/// A parsed query with its candidate space and estimated raw graph plan.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub id: String,
    pub space: PlanSpace,
    pub estimated: GraphPhysicalPlan,
}

pub fn prepare(id: &str, text: &str, ds: &Dataset) -> Result<PreparedQuery> {
    let q = parse_query_file(text, &ds.catalog)?;
    let space = enumerate_candidates(&q, &ds.catalog)?;
    let estimated = raw_graph_plan(&q, space.raw(), &ds.catalog)?;
    Ok(PreparedQuery {
        id: id.to_string(),
        space,
        estimated,
    })
}

/// Outcome of timing one plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub latency: f64,
    pub sentinel: Option<Sentinel>,
    pub breakdown: Option<LatencyBreakdown>,
    pub moved_bytes: Option<u64>,
    pub graph_rows: Option<u64>,
    pub error: Option<String>,
}

fn sentinel(cfg: &HarnessConfig, s: Sentinel) -> Measurement {
    Measurement {
        latency: cfg.sentinel_value(s),
        sentinel: Some(s),
        breakdown: None,
        moved_bytes: None,
        graph_rows: None,
        error: None,
    }
}

fn failed(e: Error) -> Measurement {
    Measurement {
        latency: f64::NAN,
        sentinel: None,
        breakdown: None,
        moved_bytes: None,
        graph_rows: None,
        error: Some(e.to_string()),
    }
}

/// Count probe under T₁, then timed execution. In measured mode the probe
/// is followed by `warmup` discarded runs and the median of `repeats`.
pub fn measure(plan: &CandidatePlan, ds: &Dataset, cfg: &HarnessConfig) -> Measurement {
    let (rows, bytes) = match probe_plan(plan, ds, &cfg.cost, Some(cfg.probe_timeout)) {
        Ok(x) => x,
        Err(Error::Timeout) => return sentinel(cfg, Sentinel::ExtremeLargeQuery),
        Err(e) => return failed(e),
    };
    if transfer_cost_bytes(rows, bytes, &cfg.cost) > cfg.transfer_cap {
        return sentinel(cfg, Sentinel::LargeQuery);
    }
    let runs = match cfg.cost.mode {
        CostMode::Synthetic => 1,
        CostMode::Measured => cfg.warmup + cfg.repeats,
    };
    let skip = runs - cfg.repeats.min(runs);
    let mut timed = Vec::new();
    for k in 0..runs {
        match execute_plan(plan, ds, &cfg.cost, Some(cfg.probe_timeout)) {
            Ok(ex) if k >= skip => timed.push((ex.latency(), ex.breakdown, ex.moved_bytes, ex.graph_rows)),
            Ok(_) => {}
            Err(Error::Timeout) => return sentinel(cfg, Sentinel::ExtremeLargeQuery),
            Err(e) => return failed(e),
        }
    }
    timed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (latency, breakdown, moved, graph_rows) = timed[timed.len() / 2];
    Measurement {
        latency,
        sentinel: None,
        breakdown: Some(breakdown),
        moved_bytes: Some(moved),
        graph_rows: Some(graph_rows),
        error: None,
    }
}

fn collect_query(pq: &PreparedQuery, ds: &Dataset, cfg: &HarnessConfig) -> Vec<LatencyRecord> {
    pq.space
        .candidates
        .iter()
        .enumerate()
        .map(|(i, plan)| {
            let m = measure(plan, ds, cfg);
            if let Some(e) = &m.error {
                log::warn!("{} plan {i}: {e}", pq.id);
            }
            LatencyRecord {
                query: pq.id.clone(),
                plan: i,
                movement: plan.movement.iter().cloned().collect(),
                latency: m.latency,
                sentinel: m.sentinel,
                breakdown: m.breakdown,
                moved_bytes: m.moved_bytes,
                graph_rows: m.graph_rows,
                mode: cfg.cost.mode,
                error: m.error,
            }
        })
        .collect()
}

/// A record for every candidate of every query. Synthetic mode spreads
/// queries over `cfg.threads` workers; measured mode runs serially.
pub fn collect(queries: &[PreparedQuery], ds: &Dataset, cfg: &HarnessConfig) -> Result<LatencyLog> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let threads = match cfg.cost.mode {
        CostMode::Synthetic => cfg.threads.max(1).min(queries.len().max(1)),
        CostMode::Measured => 1,
    };
    let per_query: Vec<Vec<LatencyRecord>> = if threads == 1 {
        queries.iter().map(|pq| collect_query(pq, ds, cfg)).collect()
    } else {
        let chunk = queries.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = queries
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|pq| collect_query(pq, ds, cfg)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("collection worker panicked"))
                .collect()
        })
    };
    log::info!(
        "collected {} queries in {:.1}s",
        queries.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(LatencyLog {
        records: per_query.into_iter().flatten().collect(),
    })
}
