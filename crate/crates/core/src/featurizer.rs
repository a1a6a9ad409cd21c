//! Plan encoding for the learned models: a plan tree with moved relations
//! spliced in, plus a star-shaped join graph of the relational side.

use serde::{Deserialize, Serialize};

use crate::datamodel::Catalog;
use crate::engines::{estimated_sizes, plan_graph_query, GraphOp, GraphPhysicalPlan, GraphPlanNode};
use crate::error::{Error, Result};
use crate::frontend::{unit_relation, CandidatePlan, CmgrjQuery};

/// Operator vocabulary shared by plan trees and join graphs.
pub const NODE_TYPES: [&str; 10] = [
    "NodeByLabelScan",
    "ExpandAll",
    "VarLengthExpand",
    "Filter",
    "NodeHashJoin",
    "NodeFromRelation",
    "Produce",
    "Neo4jResult",
    "TableScan",
    "Join",
];

fn type_index(name: &str) -> usize {
    NODE_TYPES.iter().position(|t| *t == name).expect("operator in vocabulary")
}

/// Bitmap layout: every table and label of a dataset, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub tables: Vec<String>,
    pub labels: Vec<String>,
}

impl FeatureLayout {
    pub fn from_catalog(cat: &Catalog) -> Self {
        FeatureLayout {
            tables: cat.table_names(),
            labels: cat.label_names(),
        }
    }

    /// Length of an encoded node vector.
    pub fn width(&self) -> usize {
        NODE_TYPES.len() + 2 + self.tables.len() + self.labels.len()
    }
}

/// Min-max bounds of ln(cardinality) over a training corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub min_log: f64,
    pub max_log: f64,
}

impl Default for NormBounds {
    fn default() -> Self {
        NormBounds {
            min_log: 0.0,
            max_log: 1.0,
        }
    }
}

fn log_card(c: f64) -> f64 {
    c.max(1.0).ln()
}

impl NormBounds {
    /// Bounds over every known cardinality in `plans`.
    pub fn fit<'a>(plans: impl IntoIterator<Item = &'a PlanStructure>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in plans {
            for n in p.tree.iter().chain(&p.graph) {
                if let Some(c) = n.card {
                    lo = lo.min(log_card(c));
                    hi = hi.max(log_card(c));
                }
            }
        }
        if lo.is_finite() {
            NormBounds { min_log: lo, max_log: hi }
        } else {
            NormBounds::default()
        }
    }

    /// ln(card) scaled into [0, 1].
    pub fn normalize(&self, card: f64) -> f64 {
        let span = self.max_log - self.min_log;
        if span <= 0.0 {
            return 0.0;
        }
        ((log_card(card) - self.min_log) / span).clamp(0.0, 1.0)
    }
}

/// A plan node before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNode {
    pub kind: String,
    pub card: Option<f64>,
    /// Tables and labels touched by the node and its descendants.
    pub tables: Vec<String>,
    pub labels: Vec<String>,
}

/// Unencoded tree (post-order, children before parents) and join graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStructure {
    pub tree: Vec<RawNode>,
    /// (left, right) child indices per tree node.
    pub children: Vec<(Option<usize>, Option<usize>)>,
    pub graph: Vec<RawNode>,
    pub graph_edges: Vec<(usize, usize)>,
}

impl PlanStructure {
    pub fn root(&self) -> usize {
        self.tree.len() - 1
    }
}

/// Encoded plan consumed by the models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFeatures {
    pub tree_nodes: Vec<Vec<f64>>,
    pub tree_children: Vec<(Option<usize>, Option<usize>)>,
    pub graph_nodes: Vec<Vec<f64>>,
    pub graph_edges: Vec<(usize, usize)>,
}

impl PlanFeatures {
    pub fn width(&self) -> usize {
        self.tree_nodes.first().map_or(0, Vec::len)
    }
}

/// Estimated plan of the query's graph half with nothing moved.
pub fn raw_graph_plan(q: &CmgrjQuery, raw: &CandidatePlan, cat: &Catalog) -> Result<GraphPhysicalPlan> {
    if !raw.movement.is_empty() || !raw.vertex_exports.is_empty() {
        return Err(Error::IllFormed("the estimated plan must come from the raw candidate".into()));
    }
    plan_graph_query(&raw.graph_query, cat, &estimated_sizes(raw, q))
}

/// Wrap the first node in execution order that binds a `label` vertex.
fn splice(n: &mut GraphPlanNode, label: &str, join: &GraphOp, from: &GraphPlanNode) -> bool {
    for c in n.children.iter_mut() {
        if splice(c, label, join, from) {
            return true;
        }
    }
    if n.op.introduces().is_some_and(|(_, l)| l == label) {
        let inner = std::mem::replace(
            n,
            GraphPlanNode {
                op: join.clone(),
                children: Vec::new(),
                estimate: None,
            },
        );
        n.children = vec![inner, from.clone()];
        return true;
    }
    false
}

/// The estimated raw plan with a NodeHashJoin and NodeFromRelation pair
/// inserted for each moved unit.
pub fn modified_plan_tree(
    plan: &CandidatePlan,
    q: &CmgrjQuery,
    estimated: &GraphPhysicalPlan,
) -> Result<GraphPlanNode> {
    let parts = q.parts()?;
    let mut root = estimated.root.clone();
    for (i, name) in plan.movement.iter().enumerate() {
        let unit = parts.unit(name).ok_or_else(|| Error::NotJoinable(name.clone()))?;
        let keys = parts.rg_keys(unit)?;
        let label = q
            .var_labels
            .get(&keys[0].var)
            .ok_or_else(|| Error::UnresolvedAttribute(keys[0].var.clone()))?;
        let temp_label = crate::algebra::temp_label(name, i);
        let rows = q.unit(name).map_or(0.0, |u| u.estimated_rows);
        let from = GraphPlanNode {
            op: GraphOp::NodeFromRelation {
                table: unit_relation(name),
                temp_label: temp_label.clone(),
            },
            children: Vec::new(),
            estimate: Some(rows),
        };
        let join = GraphOp::NodeHashJoin { keys, temp_label };
        if !splice(&mut root, label, &join, &from) {
            return Err(Error::IllFormed(format!("label `{label}` of unit `{name}` is not in the plan")));
        }
    }
    Ok(root)
}

fn sorted_union(a: &mut Vec<String>, b: &[String]) {
    a.extend(b.iter().cloned());
    a.sort();
    a.dedup();
}

fn flatten_tree(
    n: &GraphPlanNode,
    q: &CmgrjQuery,
    nodes: &mut Vec<RawNode>,
    children: &mut Vec<(Option<usize>, Option<usize>)>,
) -> usize {
    let kids: Vec<usize> = n.children.iter().map(|c| flatten_tree(c, q, nodes, children)).collect();
    let mut tables = Vec::new();
    let mut labels = Vec::new();
    match &n.op {
        GraphOp::NodeByLabelScan { label, .. } => labels.push(label.clone()),
        GraphOp::ExpandAll { step, .. } | GraphOp::VarLengthExpand { step, .. } => labels.push(step.to_label.clone()),
        GraphOp::NodeFromRelation { table, .. } => {
            let unit = table.strip_prefix("__unit_").unwrap_or(table);
            if let Some(u) = q.unit(unit) {
                tables.extend(u.tables());
            }
        }
        _ => {}
    }
    for &k in &kids {
        sorted_union(&mut tables, &nodes[k].tables.clone());
        sorted_union(&mut labels, &nodes[k].labels.clone());
    }
    tables.sort();
    tables.dedup();
    nodes.push(RawNode {
        kind: n.op.name().to_string(),
        card: n.estimate,
        tables,
        labels,
    });
    children.push((kids.first().copied(), kids.get(1).copied()));
    nodes.len() - 1
}

/// Star join graph: the graph result in the middle, one Join per unit left
/// relational, one TableScan per member table of that unit.
fn join_graph(
    plan: &CandidatePlan,
    q: &CmgrjQuery,
    tree_root: &RawNode,
    graph_rows: Option<f64>,
    cat: &Catalog,
) -> Result<(Vec<RawNode>, Vec<(usize, usize)>)> {
    let parts = q.parts()?;
    let mut nodes = vec![RawNode {
        kind: "Neo4jResult".into(),
        card: graph_rows,
        tables: Vec::new(),
        labels: Vec::new(),
    }];
    let mut edges = Vec::new();
    let mut all_tables = tree_root.tables.clone();
    let mut all_labels = tree_root.labels.clone();
    for u in q.units.iter().filter(|u| !plan.movement.contains(&u.name)) {
        let mut labels: Vec<String> = parts
            .unit(&u.name)
            .map(|ju| parts.rg_keys(ju))
            .transpose()?
            .unwrap_or_default()
            .iter()
            .filter_map(|k| q.var_labels.get(&k.var).cloned())
            .collect();
        labels.sort();
        labels.dedup();
        let tables: Vec<String> = u.tables().into_iter().collect();
        let join = nodes.len();
        nodes.push(RawNode {
            kind: "Join".into(),
            card: Some(u.estimated_rows),
            tables: tables.clone(),
            labels: labels.clone(),
        });
        edges.push((0, join));
        for (_, t) in &u.members {
            let scan = nodes.len();
            nodes.push(RawNode {
                kind: "TableScan".into(),
                card: Some(cat.table_rowcount(t) as f64),
                tables: vec![t.clone()],
                labels: Vec::new(),
            });
            edges.push((join, scan));
        }
        sorted_union(&mut all_tables, &tables);
        sorted_union(&mut all_labels, &labels);
    }
    nodes[0].tables = all_tables;
    nodes[0].labels = all_labels;
    Ok((nodes, edges))
}

/// Unencoded structure of a candidate plan. `estimated` is the planner's
/// output for the raw candidate's graph query.
pub fn plan_structure(
    plan: &CandidatePlan,
    q: &CmgrjQuery,
    estimated: &GraphPhysicalPlan,
    cat: &Catalog,
) -> Result<PlanStructure> {
    let tree = modified_plan_tree(plan, q, estimated)?;
    let mut nodes = Vec::new();
    let mut children = Vec::new();
    let root = flatten_tree(&tree, q, &mut nodes, &mut children);
    let replanned = plan_graph_query(&plan.graph_query, cat, &estimated_sizes(plan, q))?;
    let (graph, graph_edges) = join_graph(plan, q, &nodes[root], replanned.root.estimate, cat)?;
    Ok(PlanStructure {
        tree: nodes,
        children,
        graph,
        graph_edges,
    })
}

fn encode_node(n: &RawNode, layout: &FeatureLayout, norm: &NormBounds) -> Vec<f64> {
    let mut v = vec![0.0; layout.width()];
    v[type_index(&n.kind)] = 1.0;
    let base = NODE_TYPES.len();
    match n.card {
        Some(c) => v[base] = norm.normalize(c),
        None => v[base + 1] = 1.0,
    }
    let t0 = base + 2;
    for t in &n.tables {
        if let Some(i) = layout.tables.iter().position(|x| x == t) {
            v[t0 + i] = 1.0;
        }
    }
    let l0 = t0 + layout.tables.len();
    for l in &n.labels {
        if let Some(i) = layout.labels.iter().position(|x| x == l) {
            v[l0 + i] = 1.0;
        }
    }
    v
}

pub fn encode(s: &PlanStructure, layout: &FeatureLayout, norm: &NormBounds) -> PlanFeatures {
    PlanFeatures {
        tree_nodes: s.tree.iter().map(|n| encode_node(n, layout, norm)).collect(),
        tree_children: s.children.clone(),
        graph_nodes: s.graph.iter().map(|n| encode_node(n, layout, norm)).collect(),
        graph_edges: s.graph_edges.clone(),
    }
}

pub fn featurize(
    plan: &CandidatePlan,
    q: &CmgrjQuery,
    estimated: &GraphPhysicalPlan,
    cat: &Catalog,
    layout: &FeatureLayout,
    norm: &NormBounds,
) -> Result<PlanFeatures> {
    Ok(encode(&plan_structure(plan, q, estimated, cat)?, layout, norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_max_over_log() {
        let n = NormBounds {
            min_log: 10f64.ln(),
            max_log: 1000f64.ln(),
        };
        assert_eq!(n.normalize(10.0), 0.0);
        assert!((n.normalize(1000.0) - 1.0).abs() < 1e-12);
        assert!((n.normalize(100.0) - 0.5).abs() < 1e-12);
        assert_eq!(n.normalize(1e9), 1.0);
        assert_eq!(n.normalize(0.0), 0.0);
    }

    #[test]
    fn flat_bounds_map_to_zero() {
        let n = NormBounds {
            min_log: 2.0,
            max_log: 2.0,
        };
        assert_eq!(n.normalize(100.0), 0.0);
    }
}
