//! Tree convolution over the plan tree, graph convolution over the join
//! graph, and a linear head combining the two into one score.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::featurizer::PlanFeatures;

/// Width of every hidden layer.
pub const HIDDEN: usize = 16;
pub const TREE_LAYERS: usize = 3;
pub const GRAPH_LAYERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TreeLayer {
    input: usize,
    parent: usize,
    left: usize,
    right: usize,
    bias: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct GraphLayer {
    input: usize,
    weight: usize,
    bias: usize,
}

/// Offsets of each parameter block in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub input_width: usize,
    tree: Vec<TreeLayer>,
    tree_fc: usize,
    graph: Vec<GraphLayer>,
    graph_fc: usize,
    /// Tree weight, graph weight, bias.
    head: usize,
    pub len: usize,
}

impl ParamLayout {
    pub fn new(input_width: usize) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let mut tree = Vec::new();
        for k in 0..TREE_LAYERS {
            let input = if k == 0 { input_width } else { HIDDEN };
            tree.push(TreeLayer {
                input,
                parent: take(HIDDEN * input),
                left: take(HIDDEN * input),
                right: take(HIDDEN * input),
                bias: take(HIDDEN),
            });
        }
        let tree_fc = take(HIDDEN + 1);
        let mut graph = Vec::new();
        for k in 0..GRAPH_LAYERS {
            let input = if k == 0 { input_width } else { HIDDEN };
            graph.push(GraphLayer {
                input,
                weight: take(HIDDEN * input),
                bias: take(HIDDEN),
            });
        }
        let graph_fc = take(HIDDEN + 1);
        let head = take(3);
        ParamLayout {
            input_width,
            tree,
            tree_fc,
            graph,
            graph_fc,
            head,
            len: at,
        }
    }

    /// Seeded weights uniform in ±1/√fan_in; biases start at zero.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; self.len];
        let mut fill = |p: &mut [f64], start: usize, n: usize, fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            for x in &mut p[start..start + n] {
                *x = rng.random_range(-a..=a);
            }
        };
        for l in &self.tree {
            let fan_in = 3 * l.input;
            fill(&mut p, l.parent, HIDDEN * l.input, fan_in);
            fill(&mut p, l.left, HIDDEN * l.input, fan_in);
            fill(&mut p, l.right, HIDDEN * l.input, fan_in);
        }
        fill(&mut p, self.tree_fc, HIDDEN, HIDDEN);
        for l in &self.graph {
            fill(&mut p, l.weight, HIDDEN * l.input, l.input);
        }
        fill(&mut p, self.graph_fc, HIDDEN, HIDDEN);
        fill(&mut p, self.head, 2, 2);
        p
    }

    pub fn head_bias(&self) -> usize {
        self.head + 2
    }
}

/// out += W x for W stored row-major as rows × cols.
fn matvec_add(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// out += Wᵀ y.
fn matvec_t_add(w: &[f64], cols: usize, y: &[f64], out: &mut [f64]) {
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yr;
        }
    }
}

/// g += y xᵀ.
fn outer_add(g: &mut [f64], cols: usize, y: &[f64], x: &[f64]) {
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (o, a) in row.iter_mut().zip(x) {
            *o += yr * a;
        }
    }
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

/// Element-wise max over rows with the winning row per column.
fn max_pool(h: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let mut best = h[0].clone();
    let mut arg = vec![0; best.len()];
    for (n, row) in h.iter().enumerate().skip(1) {
        for d in 0..row.len() {
            if row[d] > best[d] {
                best[d] = row[d];
                arg[d] = n;
            }
        }
    }
    (best, arg)
}

/// Symmetric-normalized adjacency with self loops, dense.
fn normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(i, j) in edges {
        if i != j {
            a[i][j] = 1.0;
            a[j][i] = 1.0;
        }
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum::<f64>()).collect();
    for i in 0..n {
        for j in 0..n {
            if a[i][j] != 0.0 {
                a[i][j] /= (deg[i] * deg[j]).sqrt();
            }
        }
    }
    a
}

/// Intermediate values of one forward pass.
pub struct Trace {
    tree_inputs: Vec<Vec<Vec<f64>>>,
    tree_pre: Vec<Vec<Vec<f64>>>,
    tree_pool: Vec<f64>,
    tree_arg: Vec<usize>,
    adjacency: Vec<Vec<f64>>,
    graph_mixed: Vec<Vec<Vec<f64>>>,
    graph_pre: Vec<Vec<Vec<f64>>>,
    graph_pool: Vec<f64>,
    graph_arg: Vec<usize>,
    pub tree_out: f64,
    pub graph_out: f64,
    pub score: f64,
}

pub fn check_shape(layout: &ParamLayout, params: &[f64], f: &PlanFeatures) -> Result<()> {
    if params.len() != layout.len {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters where {} are expected",
            params.len(),
            layout.len
        )));
    }
    if f.tree_nodes.is_empty() || f.graph_nodes.is_empty() {
        return Err(Error::ShapeMismatch("plan features need at least one node per structure".into()));
    }
    let bad = f
        .tree_nodes
        .iter()
        .chain(&f.graph_nodes)
        .any(|v| v.len() != layout.input_width);
    if bad {
        return Err(Error::ShapeMismatch(format!("feature width differs from {}", layout.input_width)));
    }
    let n = f.tree_nodes.len();
    if f.tree_children.len() != n || f.tree_children.iter().flat_map(|(l, r)| [*l, *r]).flatten().any(|c| c >= n) {
        return Err(Error::ShapeMismatch("tree child index out of range".into()));
    }
    let m = f.graph_nodes.len();
    if f.graph_edges.iter().any(|&(i, j)| i >= m || j >= m) {
        return Err(Error::ShapeMismatch("graph edge index out of range".into()));
    }
    Ok(())
}

pub fn forward(layout: &ParamLayout, p: &[f64], f: &PlanFeatures) -> Trace {
    let mut h: Vec<Vec<f64>> = f.tree_nodes.clone();
    let mut tree_inputs = Vec::with_capacity(TREE_LAYERS);
    let mut tree_pre = Vec::with_capacity(TREE_LAYERS);
    for l in &layout.tree {
        let size = HIDDEN * l.input;
        let (wp, wl, wr) = (&p[l.parent..l.parent + size], &p[l.left..l.left + size], &p[l.right..l.right + size]);
        let b = &p[l.bias..l.bias + HIDDEN];
        let z: Vec<Vec<f64>> = (0..h.len())
            .map(|n| {
                let mut z = b.to_vec();
                matvec_add(wp, l.input, &h[n], &mut z);
                let (lc, rc) = f.tree_children[n];
                if let Some(c) = lc {
                    matvec_add(wl, l.input, &h[c], &mut z);
                }
                if let Some(c) = rc {
                    matvec_add(wr, l.input, &h[c], &mut z);
                }
                z
            })
            .collect();
        let next = z.iter().map(|v| relu(v)).collect();
        tree_inputs.push(std::mem::replace(&mut h, next));
        tree_pre.push(z);
    }
    let (tree_pool, tree_arg) = max_pool(&h);
    let tw = &p[layout.tree_fc..layout.tree_fc + HIDDEN];
    let tree_out = p[layout.tree_fc + HIDDEN] + tw.iter().zip(&tree_pool).map(|(a, b)| a * b).sum::<f64>();

    let adjacency = normalized_adjacency(f.graph_nodes.len(), &f.graph_edges);
    let mut g: Vec<Vec<f64>> = f.graph_nodes.clone();
    let mut graph_mixed = Vec::with_capacity(GRAPH_LAYERS);
    let mut graph_pre = Vec::with_capacity(GRAPH_LAYERS);
    for l in &layout.graph {
        let w = &p[l.weight..l.weight + HIDDEN * l.input];
        let b = &p[l.bias..l.bias + HIDDEN];
        let mixed: Vec<Vec<f64>> = adjacency
            .iter()
            .map(|row| {
                let mut m = vec![0.0; l.input];
                for (j, &a) in row.iter().enumerate() {
                    if a != 0.0 {
                        for (o, x) in m.iter_mut().zip(&g[j]) {
                            *o += a * x;
                        }
                    }
                }
                m
            })
            .collect();
        let z: Vec<Vec<f64>> = mixed
            .iter()
            .map(|m| {
                let mut z = b.to_vec();
                matvec_add(w, l.input, m, &mut z);
                z
            })
            .collect();
        g = z.iter().map(|v| relu(v)).collect();
        graph_mixed.push(mixed);
        graph_pre.push(z);
    }
    let (graph_pool, graph_arg) = max_pool(&g);
    let gw = &p[layout.graph_fc..layout.graph_fc + HIDDEN];
    let graph_out = p[layout.graph_fc + HIDDEN] + gw.iter().zip(&graph_pool).map(|(a, b)| a * b).sum::<f64>();

    let score = p[layout.head] * tree_out + p[layout.head + 1] * graph_out + p[layout.head + 2];
    Trace {
        tree_inputs,
        tree_pre,
        tree_pool,
        tree_arg,
        adjacency,
        graph_mixed,
        graph_pre,
        graph_pool,
        graph_arg,
        tree_out,
        graph_out,
        score,
    }
}

/// Accumulate `dscore` × ∂score/∂params into `grad`.
pub fn backward(layout: &ParamLayout, p: &[f64], f: &PlanFeatures, t: &Trace, dscore: f64, grad: &mut [f64]) {
    let h0 = layout.head;
    grad[h0] += dscore * t.tree_out;
    grad[h0 + 1] += dscore * t.graph_out;
    grad[h0 + 2] += dscore;
    let dtree = dscore * p[h0];
    let dgraph = dscore * p[h0 + 1];

    // Tree branch.
    let fc = layout.tree_fc;
    for d in 0..HIDDEN {
        grad[fc + d] += dtree * t.tree_pool[d];
    }
    grad[fc + HIDDEN] += dtree;
    let n = f.tree_nodes.len();
    let mut dh = vec![vec![0.0; HIDDEN]; n];
    for d in 0..HIDDEN {
        dh[t.tree_arg[d]][d] += dtree * p[fc + d];
    }
    for (k, l) in layout.tree.iter().enumerate().rev() {
        let size = HIDDEN * l.input;
        let input = &t.tree_inputs[k];
        let mut dinput = vec![vec![0.0; l.input]; n];
        for node in 0..n {
            let dz: Vec<f64> = dh[node]
                .iter()
                .zip(&t.tree_pre[k][node])
                .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
                .collect();
            if dz.iter().all(|&x| x == 0.0) {
                continue;
            }
            for (b, g) in grad[l.bias..l.bias + HIDDEN].iter_mut().zip(&dz) {
                *b += g;
            }
            outer_add(&mut grad[l.parent..l.parent + size], l.input, &dz, &input[node]);
            if k > 0 {
                matvec_t_add(&p[l.parent..l.parent + size], l.input, &dz, &mut dinput[node]);
            }
            let (lc, rc) = f.tree_children[node];
            for (child, w) in [(lc, l.left), (rc, l.right)] {
                if let Some(c) = child {
                    outer_add(&mut grad[w..w + size], l.input, &dz, &input[c]);
                    if k > 0 {
                        matvec_t_add(&p[w..w + size], l.input, &dz, &mut dinput[c]);
                    }
                }
            }
        }
        dh = dinput;
    }

    // Graph branch.
    let fc = layout.graph_fc;
    for d in 0..HIDDEN {
        grad[fc + d] += dgraph * t.graph_pool[d];
    }
    grad[fc + HIDDEN] += dgraph;
    let m = f.graph_nodes.len();
    let mut dg = vec![vec![0.0; HIDDEN]; m];
    for d in 0..HIDDEN {
        dg[t.graph_arg[d]][d] += dgraph * p[fc + d];
    }
    for (k, l) in layout.graph.iter().enumerate().rev() {
        let size = HIDDEN * l.input;
        let w = &p[l.weight..l.weight + size];
        let mut dmixed = vec![vec![0.0; l.input]; m];
        for node in 0..m {
            let dz: Vec<f64> = dg[node]
                .iter()
                .zip(&t.graph_pre[k][node])
                .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
                .collect();
            if dz.iter().all(|&x| x == 0.0) {
                continue;
            }
            for (b, g) in grad[l.bias..l.bias + HIDDEN].iter_mut().zip(&dz) {
                *b += g;
            }
            outer_add(&mut grad[l.weight..l.weight + size], l.input, &dz, &t.graph_mixed[k][node]);
            if k > 0 {
                matvec_t_add(w, l.input, &dz, &mut dmixed[node]);
            }
        }
        if k > 0 {
            // The adjacency is symmetric, so Âᵀ dM = Â dM.
            let mut dprev = vec![vec![0.0; l.input]; m];
            for (i, row) in t.adjacency.iter().enumerate() {
                for (j, &a) in row.iter().enumerate() {
                    if a != 0.0 {
                        for (o, x) in dprev[j].iter_mut().zip(&dmixed[i]) {
                            *o += a * x;
                        }
                    }
                }
            }
            dg = dprev;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn layout_counts() {
        let l = ParamLayout::new(4);
        let want = 3 * 16 * 4 + 16 + 2 * (3 * 16 * 16 + 16) + 17 + (16 * 4 + 16) + (16 * 16 + 16) + 17 + 3;
        assert_eq!(l.len, want);
    }
}
