use std::collections::BTreeMap;

use crate::baselines::{select_fvn, select_rlm, select_ts};
use crate::cmlero::{
    pairs_for_query, rank_and_select, train, train_regression, ModelWeights, RegressionSample, TrainConfig,
    TrainReport, TrainingPair,
};
use crate::datamodel::Catalog;
use crate::error::{Error, Result};
use crate::featurizer::{encode, featurize, plan_structure, FeatureLayout, NormBounds, PlanFeatures, PlanStructure};

use super::{LatencyLog, PreparedQuery};

/// Unencoded structures of every candidate of every query.
pub fn plan_structures(queries: &[PreparedQuery], cat: &Catalog) -> Result<Vec<Vec<PlanStructure>>> {
    queries
        .iter()
        .map(|pq| {
            pq.space
                .candidates
                .iter()
                .map(|c| plan_structure(c, &pq.space.query, &pq.estimated, cat))
                .collect()
        })
        .collect()
}

/// Encoded features of a set of queries, addressed by (query, plan).
#[derive(Debug, Clone)]
pub struct Corpus {
    pub features: Vec<PlanFeatures>,
    /// Query id → corpus index of each of its plans.
    pub index: BTreeMap<String, Vec<usize>>,
}

impl Corpus {
    pub fn build(
        queries: &[PreparedQuery],
        structures: &[Vec<PlanStructure>],
        layout: &FeatureLayout,
        norm: &NormBounds,
    ) -> Corpus {
        let mut features = Vec::new();
        let mut index = BTreeMap::new();
        for (pq, plans) in queries.iter().zip(structures) {
            let mut ids = Vec::new();
            for s in plans {
                ids.push(features.len());
                features.push(encode(s, layout, norm));
            }
            index.insert(pq.id.clone(), ids);
        }
        Corpus { features, index }
    }
}

/// Every unordered pair of usable plans per query; sentinels order above
/// measured latencies through their ordinal values and near-ties drop.
pub fn build_pairs(log: &LatencyLog, corpus: &Corpus) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for (q, ids) in &corpus.index {
        let lat = log.latencies(q, ids.len());
        let (idx, l): (Vec<usize>, Vec<f64>) = ids
            .iter()
            .zip(&lat)
            .filter_map(|(&i, l)| l.map(|l| (i, l)))
            .unzip();
        out.extend(pairs_for_query(&idx, &l));
    }
    out
}

/// Completed plans with their latency; sentinel and failed plans excluded.
pub fn build_regression_samples(log: &LatencyLog, corpus: &Corpus) -> Vec<RegressionSample> {
    let mut out = Vec::new();
    for r in &log.records {
        if !r.usable() || r.sentinel.is_some() {
            continue;
        }
        if let Some(&index) = corpus.index.get(&r.query).and_then(|ids| ids.get(r.plan)) {
            out.push(RegressionSample {
                index,
                latency: r.latency,
            });
        }
    }
    out
}

fn corpus_for(queries: &[PreparedQuery], cat: &Catalog) -> Result<(Corpus, FeatureLayout, NormBounds)> {
    let structures = plan_structures(queries, cat)?;
    let layout = FeatureLayout::from_catalog(cat);
    let norm = NormBounds::fit(structures.iter().flatten());
    let corpus = Corpus::build(queries, &structures, &layout, &norm);
    Ok((corpus, layout, norm))
}

/// Fit the pairwise comparator on the collected latencies of `queries`.
pub fn train_cmlero(
    queries: &[PreparedQuery],
    log: &LatencyLog,
    cat: &Catalog,
    cfg: &TrainConfig,
) -> Result<(ModelWeights, TrainReport)> {
    let (corpus, layout, norm) = corpus_for(queries, cat)?;
    let pairs = build_pairs(log, &corpus);
    if pairs.is_empty() {
        return Err(Error::Config("training queries yield no labelled pairs".into()));
    }
    train(&corpus.features, &pairs, layout, norm, cfg)
}

/// Fit the latency regressor on the same queries.
pub fn train_rlm(
    queries: &[PreparedQuery],
    log: &LatencyLog,
    cat: &Catalog,
    cfg: &TrainConfig,
) -> Result<(ModelWeights, TrainReport)> {
    let (corpus, layout, norm) = corpus_for(queries, cat)?;
    let samples = build_regression_samples(log, &corpus);
    if samples.is_empty() {
        return Err(Error::Config("training queries yield no completed plans".into()));
    }
    train_regression(&corpus.features, &samples, layout, norm, cfg)
}

/// A plan selector over a query's candidate space.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Cmlero(ModelWeights),
    Rlm(ModelWeights),
    /// Move units smaller than the threshold.
    Ts(f64),
    Fvn,
    /// Always the plan that moves nothing.
    Raw,
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Cmlero(_) => "CMLero",
            Optimizer::Rlm(_) => "Baseline-RLM",
            Optimizer::Ts(_) => "Baseline-TS",
            Optimizer::Fvn => "Baseline-FVN",
            Optimizer::Raw => "Raw",
        }
    }

    pub fn select(&self, pq: &PreparedQuery, cat: &Catalog) -> Result<usize> {
        let features = |w: &ModelWeights| -> Result<Vec<PlanFeatures>> {
            pq.space
                .candidates
                .iter()
                .map(|c| featurize(c, &pq.space.query, &pq.estimated, cat, &w.layout, &w.norm))
                .collect()
        };
        match self {
            Optimizer::Cmlero(w) => rank_and_select(&features(w)?, w),
            Optimizer::Rlm(w) => select_rlm(&features(w)?, w),
            Optimizer::Ts(t) => Ok(select_ts(&pq.space, *t)),
            Optimizer::Fvn => select_fvn(&pq.space, &pq.estimated),
            Optimizer::Raw => Ok(0),
        }
    }
}
