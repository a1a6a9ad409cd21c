//! Learned pairwise plan comparator: a shared plan embedding scored for
//! both plans of a pair, compared through a sigmoid, trained with SGD on
//! binary cross-entropy.

mod model;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurizer::{FeatureLayout, NormBounds, PlanFeatures};

pub use model::{sigmoid, ParamLayout, HIDDEN, GRAPH_LAYERS, TREE_LAYERS};

/// Format tag of persisted weights.
pub const WEIGHTS_VERSION: &str = "cmlero-weights/1";

/// Training objective the weights were fitted with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Pairwise comparison of two plans.
    Pairwise,
    /// Direct regression of ln(latency).
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub version: String,
    pub kind: ModelKind,
    pub layout: FeatureLayout,
    pub norm: NormBounds,
    /// ŷ above this prefers the first plan of a pair.
    pub threshold: f64,
    pub params: Vec<f64>,
}

impl ModelWeights {
    pub fn init(kind: ModelKind, layout: FeatureLayout, norm: NormBounds, seed: u64) -> Self {
        let params = ParamLayout::new(layout.width()).init(seed);
        ModelWeights {
            version: WEIGHTS_VERSION.into(),
            kind,
            layout,
            norm,
            threshold: 0.5,
            params,
        }
    }

    pub fn param_layout(&self) -> ParamLayout {
        ParamLayout::new(self.layout.width())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != WEIGHTS_VERSION {
            return Err(Error::ModelFormat(format!(
                "weights version `{}`, expected `{WEIGHTS_VERSION}`",
                self.version
            )));
        }
        let want = self.param_layout().len;
        if self.params.len() != want {
            return Err(Error::ModelFormat(format!(
                "{} parameters for input width {}, expected {want}",
                self.params.len(),
                self.layout.width()
            )));
        }
        if self.params.iter().any(|x| !x.is_finite()) {
            return Err(Error::ModelFormat("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    /// Load weights, refusing other versions and layouts other than
    /// `expected` when given.
    pub fn load(path: impl AsRef<Path>, expected: Option<&FeatureLayout>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        let w: ModelWeights = serde_json::from_str(&text)?;
        w.validate()?;
        if let Some(l) = expected {
            if *l != w.layout {
                return Err(Error::ModelFormat(format!(
                    "weights cover {} tables and {} labels, dataset has {} and {}",
                    w.layout.tables.len(),
                    w.layout.labels.len(),
                    l.tables.len(),
                    l.labels.len()
                )));
            }
        }
        Ok(w)
    }
}

/// Scalar plan embedding; lower means expected faster.
pub fn embed(f: &PlanFeatures, w: &ModelWeights) -> Result<f64> {
    let layout = w.param_layout();
    model::check_shape(&layout, &w.params, f)?;
    Ok(model::forward(&layout, &w.params, f).score)
}

/// Probability that plan `i` is faster than plan `j`.
pub fn compare(fi: &PlanFeatures, fj: &PlanFeatures, w: &ModelWeights) -> Result<f64> {
    Ok(sigmoid(embed(fj, w)? - embed(fi, w)?))
}

/// Whether the model prefers plan `i` over plan `j`.
pub fn prefers(fi: &PlanFeatures, fj: &PlanFeatures, w: &ModelWeights) -> Result<bool> {
    Ok(compare(fi, fj, w)? > w.threshold)
}

/// Index of the lowest-scoring plan; ties go to the lower index.
pub fn select_index(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Index of the plan with the lowest embedding.
pub fn rank_and_select(features: &[PlanFeatures], w: &ModelWeights) -> Result<usize> {
    let scores = features.iter().map(|f| embed(f, w)).collect::<Result<Vec<_>>>()?;
    select_index(&scores).ok_or_else(|| Error::InvalidQuery("empty plan space".into()))
}

/// Two plans of one query, referenced by index into a feature corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub i: usize,
    pub j: usize,
    /// 1 when plan `i` is faster.
    pub label: u8,
    pub latency_i: f64,
    pub latency_j: f64,
}

/// Relative latency gap below which a pair counts as a tie.
pub const TIE_MARGIN: f64 = 0.01;

pub fn is_tie(a: f64, b: f64) -> bool {
    (a - b).abs() < TIE_MARGIN * a.min(b)
}

/// Every unordered pair of one query's plans, ties dropped. `indices`
/// maps the query's plans into the corpus.
pub fn pairs_for_query(indices: &[usize], latencies: &[f64]) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for a in 0..indices.len() {
        for b in a + 1..indices.len() {
            let (la, lb) = (latencies[a], latencies[b]);
            if is_tie(la, lb) {
                continue;
            }
            out.push(TrainingPair {
                i: indices[a],
                j: indices[b],
                label: u8::from(la < lb),
                latency_i: la,
                latency_j: lb,
            });
        }
    }
    out
}

/// Plan features with a regression target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionSample {
    pub index: usize,
    pub latency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            epochs: 200,
            batch: 64,
            seed: 7,
        }
    }
}

fn bce(p: f64, label: u8) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean binary cross-entropy of `pairs` and its gradient.
pub fn pair_gradients(w: &ModelWeights, features: &[PlanFeatures], pairs: &[TrainingPair]) -> Result<(f64, Vec<f64>)> {
    let layout = w.param_layout();
    let mut used: Vec<usize> = pairs.iter().flat_map(|p| [p.i, p.j]).collect();
    used.sort_unstable();
    used.dedup();
    let mut traces = std::collections::HashMap::new();
    for &k in &used {
        let f = features
            .get(k)
            .ok_or_else(|| Error::ShapeMismatch(format!("pair references plan {k} outside the corpus")))?;
        model::check_shape(&layout, &w.params, f)?;
        traces.insert(k, model::forward(&layout, &w.params, f));
    }
    let mut dscore: std::collections::BTreeMap<usize, f64> = used.iter().map(|&k| (k, 0.0)).collect();
    let n = pairs.len().max(1) as f64;
    let mut loss = 0.0;
    for p in pairs {
        let yhat = sigmoid(traces[&p.j].score - traces[&p.i].score);
        loss += bce(yhat, p.label);
        let d = (yhat - f64::from(p.label)) / n;
        *dscore.get_mut(&p.j).unwrap() += d;
        *dscore.get_mut(&p.i).unwrap() -= d;
    }
    let mut grad = vec![0.0; layout.len];
    for (k, d) in dscore {
        if d != 0.0 {
            model::backward(&layout, &w.params, &features[k], &traces[&k], d, &mut grad);
        }
    }
    Ok((loss / n, grad))
}

/// Mean squared error of score against ln(latency) and its gradient.
pub fn regression_gradients(
    w: &ModelWeights,
    features: &[PlanFeatures],
    samples: &[RegressionSample],
) -> Result<(f64, Vec<f64>)> {
    let layout = w.param_layout();
    let n = samples.len().max(1) as f64;
    let mut grad = vec![0.0; layout.len];
    let mut loss = 0.0;
    for s in samples {
        let f = features
            .get(s.index)
            .ok_or_else(|| Error::ShapeMismatch(format!("sample references plan {} outside the corpus", s.index)))?;
        model::check_shape(&layout, &w.params, f)?;
        let t = model::forward(&layout, &w.params, f);
        let err = t.score - s.latency.max(1e-12).ln();
        loss += err * err;
        model::backward(&layout, &w.params, f, &t, 2.0 * err / n, &mut grad);
    }
    Ok((loss / n, grad))
}

/// Loss per epoch of a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
}

fn sgd<T: Copy>(
    w: &mut ModelWeights,
    items: &[T],
    cfg: &TrainConfig,
    mut step: impl FnMut(&ModelWeights, &[T]) -> Result<(f64, Vec<f64>)>,
) -> Result<TrainReport> {
    if items.is_empty() {
        return Err(Error::Config("no training examples".into()));
    }
    if cfg.batch == 0 || !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(Error::Config("batch and learning rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<T> = chunk.iter().map(|&k| items[k]).collect();
            let (loss, grad) = step(w, &batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!("epoch {epoch}: loss {loss}")));
            }
            for (p, g) in w.params.iter_mut().zip(&grad) {
                *p -= cfg.lr * g;
            }
            total += loss * batch.len() as f64;
        }
        report.epoch_loss.push(total / items.len() as f64);
        log::debug!("epoch {epoch}: loss {:.6}", total / items.len() as f64);
    }
    Ok(report)
}

/// Fit comparator weights on labelled pairs.
pub fn train(
    features: &[PlanFeatures],
    pairs: &[TrainingPair],
    layout: FeatureLayout,
    norm: NormBounds,
    cfg: &TrainConfig,
) -> Result<(ModelWeights, TrainReport)> {
    let mut w = ModelWeights::init(ModelKind::Pairwise, layout, norm, cfg.seed);
    let report = sgd(&mut w, pairs, cfg, |w, b| pair_gradients(w, features, b))?;
    Ok((w, report))
}

/// Fit a latency regressor with the same architecture.
pub fn train_regression(
    features: &[PlanFeatures],
    samples: &[RegressionSample],
    layout: FeatureLayout,
    norm: NormBounds,
    cfg: &TrainConfig,
) -> Result<(ModelWeights, TrainReport)> {
    let mut w = ModelWeights::init(ModelKind::Regression, layout, norm, cfg.seed);
    let report = sgd(&mut w, samples, cfg, |w, b| regression_gradients(w, features, b))?;
    Ok((w, report))
}
