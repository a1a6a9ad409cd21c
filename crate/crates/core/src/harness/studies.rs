use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmlero::TrainConfig;
use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::explorer::pruned_variant;

use super::metrics::{evaluate, OptimizerMetrics, QuerySelection};
use super::train::{train_cmlero, train_rlm, Optimizer};
use super::{measure, HarnessConfig, LatencyLog, PreparedQuery};

/// Test metrics of both learned optimizers at one training size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub size: usize,
    pub cmlero: OptimizerMetrics,
    pub rlm: OptimizerMetrics,
}

fn with_seed(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: cfg.seed ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        ..*cfg
    }
}

/// Retrain both learned optimizers on the first `size` training queries of
/// a seeded shuffle and evaluate them on `test`, for each size.
pub fn study_training_size(
    sizes: &[usize],
    seed: u64,
    train: &[PreparedQuery],
    test: &[PreparedQuery],
    log: &LatencyLog,
    ds: &Dataset,
    cfg: &HarnessConfig,
) -> Result<Vec<SizePoint>> {
    if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > train.len()) {
        return Err(Error::Config(format!(
            "training size {bad} outside 1..={} available queries",
            train.len()
        )));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::new();
    for &size in sizes {
        let subset: Vec<PreparedQuery> = order[..size].iter().map(|&i| train[i].clone()).collect();
        let (wc, _) = train_cmlero(&subset, log, &ds.catalog, &with_seed(&cfg.cmlero, seed))?;
        let (wr, _) = train_rlm(&subset, log, &ds.catalog, &with_seed(&cfg.rlm, seed))?;
        let report = evaluate(
            &[Optimizer::Cmlero(wc), Optimizer::Rlm(wr)],
            test,
            log,
            &ds.catalog,
            &cfg.top_n,
        )?;
        let mut it = report.optimizers.into_iter();
        out.push(SizePoint {
            size,
            cmlero: it.next().unwrap(),
            rlm: it.next().unwrap(),
        });
    }
    Ok(out)
}

/// A retained table-movement plan against the pruned plan that ships the
/// same label's vertices to the relational side instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneComparison {
    pub query: String,
    pub label: String,
    pub retained_plan: usize,
    pub retained_latency: f64,
    pub pruned_latency: f64,
    /// Retained is faster or within the configured margin.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningReport {
    pub comparisons: Vec<PruneComparison>,
    pub fraction_ok: f64,
}

/// Time every vertex-movement alternative of `queries` against the
/// retained plan moving the same units.
pub fn study_pruning(queries: &[PreparedQuery], ds: &Dataset, cfg: &HarnessConfig) -> Result<PruningReport> {
    let mut comparisons = Vec::new();
    for pq in queries {
        let q = &pq.space.query;
        let parts = q.parts()?;
        let mut labels = std::collections::BTreeSet::new();
        for u in &parts.units {
            for k in parts.rg_keys(u)? {
                if let Some(l) = q.var_labels.get(&k.var) {
                    labels.insert(l.clone());
                }
            }
        }
        for label in labels {
            let pruned = pruned_variant(q, &label, &ds.catalog)?;
            let Some(retained) = pq.space.index_of(&pruned.movement) else { continue };
            let r = measure(&pq.space.candidates[retained], ds, cfg);
            let p = measure(&pruned, ds, cfg);
            if r.error.is_some() || p.error.is_some() {
                log::warn!("{} / {label}: {:?} {:?}", pq.id, r.error, p.error);
                continue;
            }
            let ok = r.latency <= p.latency * (1.0 + cfg.prune_margin_rel) || r.latency - p.latency <= cfg.prune_margin_abs;
            comparisons.push(PruneComparison {
                query: pq.id.clone(),
                label,
                retained_plan: retained,
                retained_latency: r.latency,
                pruned_latency: p.latency,
                ok,
            });
        }
    }
    let fraction_ok = comparisons.iter().filter(|c| c.ok).count() as f64 / comparisons.len().max(1) as f64;
    Ok(PruningReport {
        comparisons,
        fraction_ok,
    })
}

/// Fraction of `selections` whose plan moves the fewest bytes among its
/// query's completed candidates.
pub fn selected_moves_fewest_bytes(selections: &[QuerySelection], log: &LatencyLog) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for s in selections {
        let recs = log.for_query(&s.query);
        let Some(min) = recs.iter().filter_map(|r| r.moved_bytes).min() else { continue };
        total += 1;
        let chosen = recs.iter().find(|r| r.plan == s.selected).and_then(|r| r.moved_bytes);
        if chosen == Some(min) {
            hits += 1;
        }
    }
    hits as f64 / total.max(1) as f64
}
