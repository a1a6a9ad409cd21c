//! Comparator algebra, analytic gradients against finite differences, and
//! training behaviour on small synthetic tasks.

use cmgrj::cmlero::{
    compare, embed, pair_gradients, pairs_for_query, rank_and_select, regression_gradients, sigmoid, train,
    ModelKind, ModelWeights, RegressionSample, TrainConfig, TrainingPair, WEIGHTS_VERSION,
};
use cmgrj::featurizer::{FeatureLayout, NormBounds, PlanFeatures};
use cmgrj::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layout() -> FeatureLayout {
    FeatureLayout {
        tables: vec!["A".into(), "B".into()],
        labels: vec!["L".into()],
    }
}

fn weights(seed: u64) -> ModelWeights {
    ModelWeights::init(ModelKind::Pairwise, layout(), NormBounds::default(), seed)
}

/// Random binary tree (children before parents) and random graph.
fn random_features(rng: &mut ChaCha8Rng, width: usize) -> PlanFeatures {
    let mut tree_nodes = Vec::new();
    let mut tree_children = Vec::new();
    fn grow(
        rng: &mut ChaCha8Rng,
        depth: usize,
        width: usize,
        nodes: &mut Vec<Vec<f64>>,
        children: &mut Vec<(Option<usize>, Option<usize>)>,
    ) -> usize {
        let arity = if depth >= 3 { 0 } else { rng.random_range(0..=2) };
        let kids: Vec<usize> = (0..arity).map(|_| grow(rng, depth + 1, width, nodes, children)).collect();
        nodes.push((0..width).map(|_| rng.random_range(0.0..1.0)).collect());
        children.push((kids.first().copied(), kids.get(1).copied()));
        nodes.len() - 1
    }
    grow(rng, 0, width, &mut tree_nodes, &mut tree_children);
    let m = rng.random_range(1..5);
    let graph_nodes = (0..m)
        .map(|_| (0..width).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let graph_edges = (1..m).map(|k| (0, k)).collect();
    PlanFeatures {
        tree_nodes,
        tree_children,
        graph_nodes,
        graph_edges,
    }
}

#[test]
fn comparison_is_antisymmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let width = layout().width();
    for draw in 0..1000 {
        let w = weights(draw);
        let a = random_features(&mut rng, width);
        let b = random_features(&mut rng, width);
        let ab = compare(&a, &b, &w).unwrap();
        let ba = compare(&b, &a, &w).unwrap();
        assert!((ab + ba - 1.0).abs() <= 1e-12, "draw {draw}: {ab} + {ba}");
        assert!(ab > 0.0 && ab < 1.0);
        assert_eq!(compare(&a, &a, &w).unwrap(), 0.5);
    }
}

#[test]
fn closed_form_sigmoid() {
    assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
}

#[test]
fn zero_weights_score_the_bias() {
    let mut w = weights(3);
    let bias = w.param_layout().head_bias();
    w.params.iter_mut().for_each(|p| *p = 0.0);
    w.params[bias] = 0.25;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        assert_eq!(embed(&random_features(&mut rng, layout().width()), &w).unwrap(), 0.25);
    }
}

fn relabel(f: &PlanFeatures, perm: &[usize]) -> PlanFeatures {
    // perm[old] = new position
    let n = f.tree_nodes.len();
    let mut nodes = vec![Vec::new(); n];
    let mut children = vec![(None, None); n];
    for old in 0..n {
        nodes[perm[old]] = f.tree_nodes[old].clone();
        let (l, r) = f.tree_children[old];
        children[perm[old]] = (l.map(|c| perm[c]), r.map(|c| perm[c]));
    }
    let m = f.graph_nodes.len();
    let gperm: Vec<usize> = (0..m).rev().collect();
    let mut gnodes = vec![Vec::new(); m];
    for old in 0..m {
        gnodes[gperm[old]] = f.graph_nodes[old].clone();
    }
    PlanFeatures {
        tree_nodes: nodes,
        tree_children: children,
        graph_nodes: gnodes,
        graph_edges: f.graph_edges.iter().map(|&(a, b)| (gperm[b], gperm[a])).collect(),
    }
}

#[test]
fn node_storage_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = weights(9);
    for _ in 0..20 {
        let f = random_features(&mut rng, layout().width());
        let n = f.tree_nodes.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let g = relabel(&f, &perm);
        let (a, b) = (embed(&f, &w).unwrap(), embed(&g, &w).unwrap());
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn single_node_structures() {
    let w = weights(5);
    let width = layout().width();
    let f = PlanFeatures {
        tree_nodes: vec![vec![0.5; width]],
        tree_children: vec![(None, None)],
        graph_nodes: vec![vec![0.25; width]],
        graph_edges: vec![],
    };
    assert!(embed(&f, &w).unwrap().is_finite());
    let bad = PlanFeatures {
        tree_nodes: vec![vec![0.5; width + 1]],
        ..f
    };
    assert!(matches!(embed(&bad, &w), Err(Error::ShapeMismatch(_))));
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-12 {
        0.0
    } else {
        diff / scale
    }
}

fn finite_difference(
    w: &ModelWeights,
    loss: impl Fn(&ModelWeights) -> f64,
) -> Vec<f64> {
    let h = 1e-6;
    let mut w = w.clone();
    (0..w.params.len())
        .map(|k| {
            let orig = w.params[k];
            w.params[k] = orig + h;
            let up = loss(&w);
            w.params[k] = orig - h;
            let down = loss(&w);
            w.params[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[test]
fn pair_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let width = layout().width();
    for case in 0..20 {
        let w = weights(100 + case);
        let features: Vec<PlanFeatures> = (0..3).map(|_| random_features(&mut rng, width)).collect();
        let pairs = vec![
            TrainingPair {
                i: 0,
                j: 1,
                label: 1,
                latency_i: 1.0,
                latency_j: 2.0,
            },
            TrainingPair {
                i: 2,
                j: 1,
                label: 0,
                latency_i: 3.0,
                latency_j: 2.0,
            },
        ];
        let (_, analytic) = pair_gradients(&w, &features, &pairs).unwrap();
        let numeric = finite_difference(&w, |w| pair_gradients(w, &features, &pairs).unwrap().0);
        let err = rel_error(&analytic, &numeric);
        assert!(err < 1e-4, "case {case}: relative error {err}");
    }
}

#[test]
fn regression_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let width = layout().width();
    for case in 0..5 {
        let w = weights(200 + case);
        let features: Vec<PlanFeatures> = (0..2).map(|_| random_features(&mut rng, width)).collect();
        let samples = vec![
            RegressionSample { index: 0, latency: 0.5 },
            RegressionSample { index: 1, latency: 4.0 },
        ];
        let (_, analytic) = regression_gradients(&w, &features, &samples).unwrap();
        let numeric = finite_difference(&w, |w| regression_gradients(w, &features, &samples).unwrap().0);
        assert!(rel_error(&analytic, &numeric) < 1e-4);
    }
}

#[test]
fn doubling_a_batch_keeps_the_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let w = weights(1);
    let features: Vec<PlanFeatures> = (0..2).map(|_| random_features(&mut rng, layout().width())).collect();
    let p = TrainingPair {
        i: 0,
        j: 1,
        label: 1,
        latency_i: 1.0,
        latency_j: 2.0,
    };
    let (l1, g1) = pair_gradients(&w, &features, &[p]).unwrap();
    let (l2, g2) = pair_gradients(&w, &features, &[p, p]).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    assert!(rel_error(&g1, &g2) < 1e-12);
}

#[test]
fn four_plans_give_six_pairs() {
    let pairs = pairs_for_query(&[0, 1, 2, 3], &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(pairs.len(), 6);
    assert!(pairs.iter().all(|p| p.label == u8::from(p.latency_i < p.latency_j)));
    // Near-ties are dropped.
    assert_eq!(pairs_for_query(&[0, 1], &[1.0, 1.005]).len(), 0);
    assert_eq!(pairs_for_query(&[0], &[1.0]).len(), 0);
}

/// Plans whose latency is a monotone function of one feature column.
fn separable_task(rng: &mut ChaCha8Rng, plans: usize) -> (Vec<PlanFeatures>, Vec<f64>) {
    let width = layout().width();
    let mut features = Vec::new();
    let mut latencies = Vec::new();
    for _ in 0..plans {
        let mut f = random_features(rng, width);
        let x: f64 = rng.random_range(0.0..1.0);
        for v in f.tree_nodes.iter_mut().chain(f.graph_nodes.iter_mut()) {
            v[10] = x;
        }
        features.push(f);
        latencies.push(1.0 + 10.0 * x);
    }
    (features, latencies)
}

fn all_pairs(n: usize, lat: &[f64]) -> Vec<TrainingPair> {
    let idx: Vec<usize> = (0..n).collect();
    pairs_for_query(&idx, lat)
}

#[test]
fn learns_a_separable_task() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (features, lat) = separable_task(&mut rng, 60);
    let (train_f, test_f) = features.split_at(40);
    let pairs = all_pairs(40, &lat[..40]);
    let cfg = TrainConfig {
        epochs: 200,
        lr: 0.03,
        ..Default::default()
    };
    let (w, report) = train(train_f, &pairs, layout(), NormBounds::default(), &cfg).unwrap();
    assert!(report.epoch_loss.last().unwrap() < &report.epoch_loss[0]);
    let test_pairs = all_pairs(20, &lat[40..]);
    let correct = test_pairs
        .iter()
        .filter(|p| (compare(&test_f[p.i], &test_f[p.j], &w).unwrap() > 0.5) == (p.label == 1))
        .count();
    let acc = correct as f64 / test_pairs.len() as f64;
    assert!(acc > 0.95, "held-out pairwise accuracy {acc}");
}

#[test]
fn memorizes_one_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let features: Vec<PlanFeatures> = (0..2).map(|_| random_features(&mut rng, layout().width())).collect();
    let pairs = pairs_for_query(&[0, 1], &[1.0, 5.0]);
    let cfg = TrainConfig {
        epochs: 300,
        lr: 0.05,
        ..Default::default()
    };
    let (_, report) = train(&features, &pairs, layout(), NormBounds::default(), &cfg).unwrap();
    let tail = &report.epoch_loss[20..];
    assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(*tail.last().unwrap() < 0.05);
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (features, lat) = separable_task(&mut rng, 12);
    let pairs = all_pairs(12, &lat);
    let cfg = TrainConfig {
        epochs: 5,
        ..Default::default()
    };
    let (a, _) = train(&features, &pairs, layout(), NormBounds::default(), &cfg).unwrap();
    let (b, _) = train(&features, &pairs, layout(), NormBounds::default(), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn selection_ignores_a_shared_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut w = weights(8);
    let features: Vec<PlanFeatures> = (0..6).map(|_| random_features(&mut rng, layout().width())).collect();
    let pick = rank_and_select(&features, &w).unwrap();
    let bias = w.param_layout().head_bias();
    w.params[bias] += 123.0;
    assert_eq!(rank_and_select(&features, &w).unwrap(), pick);
    assert_eq!(rank_and_select(&features[..1], &w).unwrap(), 0);
}

#[test]
fn weights_round_trip_and_refuse_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    let w = weights(30);
    w.save(&path).unwrap();
    assert_eq!(ModelWeights::load(&path, Some(&layout())).unwrap(), w);
    let other = FeatureLayout {
        tables: vec!["A".into()],
        labels: vec!["L".into()],
    };
    assert!(matches!(ModelWeights::load(&path, Some(&other)), Err(Error::ModelFormat(_))));
    let mut old = w.clone();
    old.version = "cmlero-weights/0".into();
    old.save(&path).unwrap();
    assert!(matches!(ModelWeights::load(&path, None), Err(Error::ModelFormat(_))));
    assert_eq!(w.version, WEIGHTS_VERSION);
}
