//! In-memory graph engine: a greedy planner and a pipelined executor.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algebra::{reachable, AlgebraExpr, Atom, ExpandStep, GraphResolver, Operand, Predicate, ProjItem, ProjSource, RgKey};
use crate::datamodel::{Attr, AttrKind, Catalog, Cell, GraphRelation, JoinKey, PropertyGraph, Relation, Value};
use crate::error::{Error, Result};
use crate::estimate::predicate_selectivity;

use super::cost::{CostMode, CostModelConfig};
use super::Deadline;

/// Hop count assumed for unbounded variable-length expansion estimates.
const VAR_LENGTH_ESTIMATE_HOPS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GraphOp {
    NodeByLabelScan {
        var: String,
        label: String,
        filter: Predicate,
    },
    /// One hop; with `into` the target is already bound and is only checked.
    ExpandAll {
        step: ExpandStep,
        into: bool,
        filter: Predicate,
    },
    VarLengthExpand {
        step: ExpandStep,
        max_hops: Option<u32>,
        into: bool,
        filter: Predicate,
    },
    Filter {
        pred: Predicate,
    },
    /// Joins the input with its `NodeFromRelation` child on vertex properties.
    NodeHashJoin {
        keys: Vec<RgKey>,
        temp_label: String,
    },
    NodeFromRelation {
        table: String,
        temp_label: String,
    },
    Produce {
        items: Vec<ProjItem>,
    },
}

impl GraphOp {
    pub fn name(&self) -> &'static str {
        match self {
            GraphOp::NodeByLabelScan { .. } => "NodeByLabelScan",
            GraphOp::ExpandAll { .. } => "ExpandAll",
            GraphOp::VarLengthExpand { .. } => "VarLengthExpand",
            GraphOp::Filter { .. } => "Filter",
            GraphOp::NodeHashJoin { .. } => "NodeHashJoin",
            GraphOp::NodeFromRelation { .. } => "NodeFromRelation",
            GraphOp::Produce { .. } => "Produce",
        }
    }

    /// Vertex variable and label this operator newly binds, if any.
    pub fn introduces(&self) -> Option<(&str, &str)> {
        match self {
            GraphOp::NodeByLabelScan { var, label, .. } => Some((var, label)),
            GraphOp::ExpandAll { step, into: false, .. } | GraphOp::VarLengthExpand { step, into: false, .. } => {
                Some((&step.to, &step.to_label))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPlanNode {
    pub op: GraphOp,
    pub children: Vec<GraphPlanNode>,
    /// Estimated output rows; `None` when the estimator declines.
    pub estimate: Option<f64>,
}

impl GraphPlanNode {
    fn leaf(op: GraphOp, estimate: Option<f64>) -> Self {
        GraphPlanNode {
            op,
            children: Vec::new(),
            estimate,
        }
    }

    fn unary(op: GraphOp, child: GraphPlanNode, estimate: Option<f64>) -> Self {
        GraphPlanNode {
            op,
            children: vec![child],
            estimate,
        }
    }

    /// Nodes in post-order: children before parents, left before right.
    pub fn post_order(&self) -> Vec<&GraphPlanNode> {
        let mut out = Vec::new();
        fn go<'a>(n: &'a GraphPlanNode, out: &mut Vec<&'a GraphPlanNode>) {
            for c in &n.children {
                go(c, out);
            }
            out.push(n);
        }
        go(self, &mut out);
        out
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(GraphPlanNode::node_count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPhysicalPlan {
    pub root: GraphPlanNode,
}

impl GraphPhysicalPlan {
    /// Labels scanned at the leaves of the plan.
    pub fn scan_labels(&self) -> BTreeSet<String> {
        self.root
            .post_order()
            .into_iter()
            .filter_map(|n| match &n.op {
                GraphOp::NodeByLabelScan { label, .. } => Some(label.clone()),
                _ => None,
            })
            .collect()
    }

    /// Variables bound by label scans.
    pub fn scan_vars(&self) -> BTreeSet<String> {
        self.root
            .post_order()
            .into_iter()
            .filter_map(|n| match &n.op {
                GraphOp::NodeByLabelScan { var, .. } => Some(var.clone()),
                _ => None,
            })
            .collect()
    }
}

fn fmt_estimate(e: Option<f64>) -> String {
    match e {
        Some(x) => format!("{x:.1}"),
        None => "?".into(),
    }
}

fn fmt_pred(p: &Predicate) -> String {
    if p.is_true() {
        String::new()
    } else {
        format!(" where {p}")
    }
}

impl fmt::Display for GraphOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let step_text = |s: &ExpandStep| {
            let arrow = match s.dir {
                crate::datamodel::Direction::Out => format!("-[:{}]->", s.edge_type),
                crate::datamodel::Direction::In => format!("<-[:{}]-", s.edge_type),
            };
            format!("({}){arrow}({}:{})", s.from, s.to, s.to_label)
        };
        match self {
            GraphOp::NodeByLabelScan { var, label, filter } => {
                write!(f, "NodeByLabelScan({var}:{label}){}", fmt_pred(filter))
            }
            GraphOp::ExpandAll { step, into, filter } => write!(
                f,
                "{}({}){}",
                if *into { "ExpandInto" } else { "ExpandAll" },
                step_text(step),
                fmt_pred(filter)
            ),
            GraphOp::VarLengthExpand {
                step,
                max_hops,
                into,
                filter,
            } => write!(
                f,
                "VarLengthExpand({} *..{}{}){}",
                step_text(step),
                max_hops.map(|m| m.to_string()).unwrap_or_default(),
                if *into { " into" } else { "" },
                fmt_pred(filter)
            ),
            GraphOp::Filter { pred } => write!(f, "Filter({pred})"),
            GraphOp::NodeHashJoin { keys, temp_label } => {
                let ks: Vec<String> = keys.iter().map(|k| format!("{}.{}={}", k.var, k.prop, k.column)).collect();
                write!(f, "NodeHashJoin[{temp_label}]({})", ks.join(", "))
            }
            GraphOp::NodeFromRelation { table, temp_label } => write!(f, "NodeFromRelation({table} as :{temp_label})"),
            GraphOp::Produce { items } => {
                let is: Vec<String> = items
                    .iter()
                    .map(|i| match &i.source {
                        ProjSource::Prop { var, prop } => format!("{var}.{prop} AS {}", i.alias),
                        ProjSource::Attr(a) if *a == i.alias => a.clone(),
                        ProjSource::Attr(a) => format!("{a} AS {}", i.alias),
                    })
                    .collect();
                write!(f, "Produce({})", is.join(", "))
            }
        }
    }
}

impl fmt::Display for GraphPhysicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(n: &GraphPlanNode, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            writeln!(f, "{}{} est={}", "  ".repeat(depth), n.op, fmt_estimate(n.estimate))?;
            for c in &n.children {
                go(c, depth + 1, f)?;
            }
            Ok(())
        }
        go(&self.root, 0, f)
    }
}

/// A graph-side expression split into planner inputs.
struct PatternParts {
    items: Vec<ProjItem>,
    /// (relation name, keys, temp label), innermost first.
    moved: Vec<(String, Vec<RgKey>, String)>,
    atoms: Vec<Atom>,
    /// Variables in first-appearance order with their labels.
    vars: Vec<(String, String)>,
    /// (step, variable-length bound) in pattern order.
    edges: Vec<(ExpandStep, Option<Option<u32>>)>,
}

fn collect_pattern(e: &AlgebraExpr, parts: &mut PatternParts) -> Result<()> {
    let add_var = |v: &str, l: &str, parts: &mut PatternParts| {
        if !parts.vars.iter().any(|(x, _)| x == v) {
            parts.vars.push((v.to_string(), l.to_string()));
        }
    };
    match e {
        AlgebraExpr::GetVertices { var, label } => add_var(var, label, parts),
        AlgebraExpr::Expand { input, step } => {
            collect_pattern(input, parts)?;
            add_var(&step.to, &step.to_label, parts);
            parts.edges.push((step.clone(), None));
        }
        AlgebraExpr::VarExpand { input, step, max_hops } => {
            collect_pattern(input, parts)?;
            add_var(&step.to, &step.to_label, parts);
            parts.edges.push((step.clone(), Some(*max_hops)));
        }
        AlgebraExpr::GraphJoin { left, right } => {
            collect_pattern(left, parts)?;
            collect_pattern(right, parts)?;
        }
        AlgebraExpr::GraphSelect { input, pred } => {
            collect_pattern(input, parts)?;
            parts.atoms.extend(pred.atoms.iter().cloned());
        }
        other => {
            return Err(Error::IllFormed(format!(
                "{} inside a graph pattern",
                crate::algebra::head(other)
            )))
        }
    }
    Ok(())
}

fn split_graph_expr(expr: &AlgebraExpr) -> Result<PatternParts> {
    let AlgebraExpr::GraphProject { input, items } = expr else {
        return Err(Error::IllFormed("graph query must end in a projection".into()));
    };
    let mut parts = PatternParts {
        items: items.clone(),
        moved: Vec::new(),
        atoms: Vec::new(),
        vars: Vec::new(),
        edges: Vec::new(),
    };
    let mut e: &AlgebraExpr = input;
    let mut moved_rev = Vec::new();
    loop {
        match e {
            AlgebraExpr::RgJoin {
                table,
                graph,
                on,
                temp_label,
            } => {
                let AlgebraExpr::BaseRelation { name, alias: None } = &**table else {
                    return Err(Error::IllFormed(
                        "a relation joined graph-side must be materialized first".into(),
                    ));
                };
                moved_rev.push((name.clone(), on.clone(), temp_label.clone()));
                e = graph;
            }
            AlgebraExpr::GraphSelect { input, pred } => {
                parts.atoms.extend(pred.atoms.iter().cloned());
                e = input;
            }
            _ => break,
        }
    }
    moved_rev.reverse();
    parts.moved = moved_rev;
    collect_pattern(e, &mut parts)?;
    Ok(parts)
}

/// Plan a graph-side expression. `sizes` gives the row counts of relations
/// joined graph-side.
pub fn plan_graph_query(expr: &AlgebraExpr, cat: &Catalog, sizes: &BTreeMap<String, f64>) -> Result<GraphPhysicalPlan> {
    let parts = split_graph_expr(expr)?;
    if parts.vars.is_empty() {
        return Err(Error::NoAnchor);
    }
    let labels: BTreeMap<&str, &str> = parts.vars.iter().map(|(v, l)| (v.as_str(), l.as_str())).collect();
    let distinct = |o: &Operand| match o {
        Operand::Prop { var, prop } => labels.get(var.as_str()).and_then(|l| cat.property_distinct(l, prop)),
        _ => None,
    };
    let mut single: BTreeMap<String, Vec<Atom>> = BTreeMap::new();
    let mut multi: Vec<Atom> = Vec::new();
    for a in &parts.atoms {
        let vars = a.vars();
        if vars.len() == 1 && a.columns().is_empty() {
            single.entry(vars.into_iter().next().unwrap()).or_default().push(a.clone());
        } else {
            multi.push(a.clone());
        }
    }
    let var_filter = |v: &str| Predicate::new(single.get(v).cloned().unwrap_or_default());
    let var_sel = |v: &str| predicate_selectivity(&var_filter(v), &distinct);
    let var_est = |v: &str| cat.label_count(labels[v]) as f64 * var_sel(v);

    let (anchor, anchor_label) = parts
        .vars
        .iter()
        .min_by(|a, b| var_est(&a.0).total_cmp(&var_est(&b.0)))
        .map(|(v, l)| (v.clone(), l.clone()))
        .unwrap();
    let mut card = var_est(&anchor);
    let mut node = GraphPlanNode::leaf(
        GraphOp::NodeByLabelScan {
            var: anchor.clone(),
            label: anchor_label,
            filter: var_filter(&anchor),
        },
        Some(card),
    );
    let mut bound: BTreeSet<String> = BTreeSet::from([anchor]);
    let mut pending_multi = multi;
    let mut pending_moved: Vec<(String, Vec<RgKey>, String)> = parts.moved.clone();

    let mut apply_ready = |node: GraphPlanNode, card: &mut f64, bound: &BTreeSet<String>| -> GraphPlanNode {
        let mut node = node;
        let (ready, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut pending_moved)
            .into_iter()
            .partition(|(_, keys, _)| keys.iter().all(|k| bound.contains(&k.var)));
        pending_moved = rest;
        for (table, keys, temp_label) in ready {
            let rows = sizes.get(&table).copied().unwrap_or(0.0);
            let label_n = cat.label_count(labels[keys[0].var.as_str()]).max(1) as f64;
            *card *= (rows / label_n).min(1.0);
            node = GraphPlanNode {
                op: GraphOp::NodeHashJoin {
                    keys,
                    temp_label: temp_label.clone(),
                },
                children: vec![
                    node,
                    GraphPlanNode::leaf(GraphOp::NodeFromRelation { table, temp_label }, Some(rows)),
                ],
                estimate: None,
            };
        }
        let (ready, rest): (Vec<Atom>, Vec<Atom>) = std::mem::take(&mut pending_multi)
            .into_iter()
            .partition(|a| a.vars().is_subset(bound) && (a.columns().is_empty() || pending_moved.is_empty()));
        pending_multi = rest;
        if !ready.is_empty() {
            let pred = Predicate::new(ready);
            *card *= predicate_selectivity(&pred, &distinct);
            node = GraphPlanNode::unary(GraphOp::Filter { pred }, node, Some(*card));
        }
        node
    };
    node = apply_ready(node, &mut card, &bound);

    let mut edges = parts.edges.clone();
    while !edges.is_empty() {
        let Some(i) = edges
            .iter()
            .position(|(s, _)| bound.contains(&s.from) || bound.contains(&s.to))
        else {
            return Err(Error::InvalidQuery("graph pattern is not connected".into()));
        };
        let (step, var_length) = edges.remove(i);
        let step = if bound.contains(&step.from) {
            step
        } else {
            ExpandStep {
                from: step.to.clone(),
                to: step.from.clone(),
                to_label: labels[step.from.as_str()].to_string(),
                edge_type: step.edge_type.clone(),
                dir: step.dir.reverse(),
            }
        };
        let into = bound.contains(&step.to);
        let src_label = labels[step.from.as_str()];
        let dst_n = cat.label_count(&step.to_label).max(1) as f64;
        let d = cat.mean_degree(&step.edge_type, src_label);
        let fanout = match var_length {
            None => d,
            Some(max) => {
                let hops = max.unwrap_or(VAR_LENGTH_ESTIMATE_HOPS).min(VAR_LENGTH_ESTIMATE_HOPS);
                ((1..=hops).map(|k| d.powi(k as i32)).sum::<f64>()).min(dst_n)
            }
        };
        let filter = if into {
            card *= fanout / dst_n;
            Predicate::default()
        } else {
            card *= fanout * var_sel(&step.to);
            var_filter(&step.to)
        };
        let op = match var_length {
            None => GraphOp::ExpandAll {
                step: step.clone(),
                into,
                filter,
            },
            Some(max_hops) => GraphOp::VarLengthExpand {
                step: step.clone(),
                max_hops,
                into,
                filter,
            },
        };
        node = GraphPlanNode::unary(op, node, Some(card));
        bound.insert(step.to.clone());
        node = apply_ready(node, &mut card, &bound);
    }
    if let Some((t, _, _)) = pending_moved.first() {
        return Err(Error::IllFormed(format!("join keys of `{t}` name unbound variables")));
    }
    if let Some(a) = pending_multi.first() {
        return Err(Error::UnresolvedAttribute(a.to_string()));
    }
    let root = GraphPlanNode::unary(GraphOp::Produce { items: parts.items }, node, Some(card));
    Ok(GraphPhysicalPlan { root })
}

/// Measured or synthetic latency of one executor run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Execution {
    pub latency: f64,
    /// Σ unit cost × input rows, tracked in both modes.
    pub synthetic: f64,
}

struct GraphExec<'a> {
    graph: &'a PropertyGraph,
    moved: &'a BTreeMap<String, Relation>,
    cfg: &'a CostModelConfig,
    deadline: Deadline,
    /// Synthetic-latency bound; rows produced so far are charged at the
    /// cheapest per-row rate toward it.
    budget: Option<f64>,
    cost: f64,
    produced: usize,
    ticks: usize,
}

impl GraphExec<'_> {
    fn tick(&mut self, n: usize) -> Result<()> {
        self.ticks += n;
        self.produced += n;
        if let Some(b) = self.budget {
            if self.cost + self.produced as f64 * self.cfg.synthetic.cheapest() > b {
                return Err(Error::Timeout);
            }
        }
        if self.ticks >= 4096 {
            self.ticks = 0;
            if self.deadline.is_some_and(|d| Instant::now() > d) {
                return Err(Error::Timeout);
            }
        }
        Ok(())
    }

    fn passes(&self, filter: &Predicate, schema: &[Attr], row: &[Cell]) -> Result<bool> {
        if filter.is_true() {
            return Ok(true);
        }
        let r = GraphResolver::new(schema, self.graph);
        filter.eval(|op| r.resolve(op, row))
    }

    fn run(&mut self, n: &GraphPlanNode) -> Result<GraphRelation> {
        let s = self.cfg.synthetic;
        match &n.op {
            GraphOp::NodeByLabelScan { var, label, filter } => {
                let schema = vec![Attr::vertex(var.clone())];
                let vs = self.graph.vertices_with_label(label);
                self.cost += s.label_scan * vs.len() as f64;
                let mut rows = Vec::new();
                let resolver = GraphResolver::new(&schema, self.graph);
                for &v in vs {
                    self.tick(1)?;
                    let row = vec![Cell::Vertex(v)];
                    if filter.is_true() || filter.eval(|op| resolver.resolve(op, &row))? {
                        rows.push(row);
                    }
                }
                Ok(GraphRelation { schema, rows })
            }
            GraphOp::ExpandAll { step, into, filter } => {
                let input = self.run(&n.children[0])?;
                self.cost += s.expand * input.len() as f64;
                self.expand(input, step, None, *into, filter)
            }
            GraphOp::VarLengthExpand {
                step,
                max_hops,
                into,
                filter,
            } => {
                let input = self.run(&n.children[0])?;
                self.cost += s.var_expand * input.len() as f64;
                self.expand(input, step, Some(*max_hops), *into, filter)
            }
            GraphOp::Filter { pred } => {
                let mut input = self.run(&n.children[0])?;
                self.cost += s.filter * input.len() as f64;
                let mut kept = Vec::with_capacity(input.rows.len());
                for row in std::mem::take(&mut input.rows) {
                    self.tick(1)?;
                    if self.passes(pred, &input.schema, &row)? {
                        kept.push(row);
                    }
                }
                input.rows = kept;
                Ok(input)
            }
            GraphOp::NodeHashJoin { keys, temp_label } => {
                if self.graph.vertex_labels().contains(temp_label) {
                    return Err(Error::TempLabelCollision(temp_label.clone()));
                }
                let input = self.run(&n.children[0])?;
                let GraphOp::NodeFromRelation { table, .. } = &n.children.get(1).map(|c| &c.op).ok_or_else(|| {
                    Error::IllFormed("NodeHashJoin needs a NodeFromRelation child".into())
                })?
                else {
                    return Err(Error::IllFormed("NodeHashJoin needs a NodeFromRelation child".into()));
                };
                let t = self
                    .moved
                    .get(table)
                    .ok_or_else(|| Error::MissingMovedTable(table.clone()))?;
                self.cost += s.hash_build * t.len() as f64 + s.hash_probe * input.len() as f64;
                self.node_hash_join(input, t, keys)
            }
            GraphOp::NodeFromRelation { table, .. } => Err(Error::IllFormed(format!(
                "NodeFromRelation({table}) outside a NodeHashJoin"
            ))),
            GraphOp::Produce { items } => {
                let input = self.run(&n.children[0])?;
                self.cost += s.produce * input.len() as f64;
                self.produce(input, items)
            }
        }
    }

    fn expand(
        &mut self,
        input: GraphRelation,
        step: &ExpandStep,
        var_length: Option<Option<u32>>,
        into: bool,
        filter: &Predicate,
    ) -> Result<GraphRelation> {
        let from = vertex_index(&input.schema, &step.from)?;
        let to = if into {
            Some(vertex_index(&input.schema, &step.to)?)
        } else {
            None
        };
        let mut schema = input.schema.clone();
        if !into {
            schema.push(Attr::vertex(step.to.clone()));
        }
        let mut rows = Vec::new();
        let mut cache: HashMap<_, Vec<_>> = HashMap::new();
        let resolver = GraphResolver::new(&schema, self.graph);
        for row in input.rows {
            let Some(v) = row[from].as_vertex() else { continue };
            let targets: Vec<_> = match var_length {
                Some(max) => cache
                    .entry(v)
                    .or_insert_with(|| reachable(self.graph, v, step, max))
                    .clone(),
                None => self
                    .graph
                    .incident(v, step.dir)
                    .iter()
                    .filter(|&&e| self.graph.edge_has_label(e, &step.edge_type))
                    .map(|&e| self.graph.far_end(e, step.dir))
                    .filter(|&w| self.graph.has_label(w, &step.to_label))
                    .collect(),
            };
            self.tick(1 + targets.len())?;
            match to {
                Some(b) => {
                    let hits = targets.iter().filter(|&&w| row[b].as_vertex() == Some(w)).count();
                    for _ in 0..hits {
                        rows.push(row.clone());
                    }
                }
                None => {
                    for w in targets {
                        let mut r = row.clone();
                        r.push(Cell::Vertex(w));
                        if filter.is_true() || filter.eval(|op| resolver.resolve(op, &r))? {
                            rows.push(r);
                        }
                    }
                }
            }
        }
        Ok(GraphRelation { schema, rows })
    }

    fn node_hash_join(&mut self, input: GraphRelation, t: &Relation, keys: &[RgKey]) -> Result<GraphRelation> {
        let t_idx = keys
            .iter()
            .map(|k| t.column_index(&k.column).ok_or_else(|| Error::UnresolvedAttribute(k.column.clone())))
            .collect::<Result<Vec<_>>>()?;
        let p_idx = keys
            .iter()
            .map(|k| vertex_index(&input.schema, &k.var))
            .collect::<Result<Vec<_>>>()?;
        if let Some(a) = input.schema.iter().find(|a| t.column_index(&a.name).is_some()) {
            return Err(Error::IllFormed(format!("relation-graph join inputs share attribute `{}`", a.name)));
        }
        let mut index: HashMap<Vec<JoinKey>, Vec<usize>> = HashMap::new();
        for (ri, row) in t.rows.iter().enumerate() {
            if let Some(key) = t_idx.iter().map(|&i| row[i].join_key()).collect::<Option<Vec<_>>>() {
                index.entry(key).or_default().push(ri);
            }
        }
        let mut schema = input.schema.clone();
        schema.extend(t.schema.iter().map(|c| Attr::value(c.name.clone())));
        let mut rows = Vec::new();
        for prow in input.rows {
            self.tick(1)?;
            let key = keys
                .iter()
                .zip(&p_idx)
                .map(|(k, &i)| match &prow[i] {
                    Cell::Vertex(v) => self.graph.vertex_property_ref(*v, &k.prop).and_then(Value::join_key),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>();
            let Some(key) = key else { continue };
            if let Some(matches) = index.get(&key) {
                for &ri in matches {
                    let mut r = prow.clone();
                    r.extend(t.rows[ri].iter().cloned().map(Cell::Value));
                    rows.push(r);
                }
            }
        }
        Ok(GraphRelation { schema, rows })
    }

    fn produce(&mut self, input: GraphRelation, items: &[ProjItem]) -> Result<GraphRelation> {
        let mut schema = Vec::with_capacity(items.len());
        let mut getters = Vec::with_capacity(items.len());
        for item in items {
            match &item.source {
                ProjSource::Prop { var, prop } => {
                    schema.push(Attr::value(item.alias.clone()));
                    getters.push((vertex_index(&input.schema, var)?, Some(prop.as_str())));
                }
                ProjSource::Attr(a) => {
                    let i = input
                        .schema
                        .iter()
                        .position(|x| x.name == *a)
                        .ok_or_else(|| Error::UnresolvedAttribute(a.clone()))?;
                    schema.push(Attr {
                        name: item.alias.clone(),
                        kind: input.schema[i].kind,
                    });
                    getters.push((i, None));
                }
            }
        }
        let mut rows = Vec::with_capacity(input.rows.len());
        for row in &input.rows {
            self.tick(1)?;
            rows.push(
                getters
                    .iter()
                    .map(|&(i, prop)| match (prop, &row[i]) {
                        (Some(p), Cell::Vertex(v)) => {
                            Cell::Value(self.graph.vertex_property_ref(*v, p).cloned().unwrap_or(Value::Null))
                        }
                        (Some(_), _) => Cell::Value(Value::Null),
                        (None, c) => c.clone(),
                    })
                    .collect(),
            );
        }
        Ok(GraphRelation { schema, rows })
    }
}

fn vertex_index(schema: &[Attr], name: &str) -> Result<usize> {
    let i = schema
        .iter()
        .position(|a| a.name == name)
        .ok_or_else(|| Error::UnresolvedAttribute(name.to_string()))?;
    if schema[i].kind != AttrKind::Vertex {
        return Err(Error::TypeMismatch(format!("`{name}` is not a vertex attribute")));
    }
    Ok(i)
}

/// Run a graph plan. `moved` holds the relations named by its
/// `NodeFromRelation` leaves.
pub fn execute_graph(
    plan: &GraphPhysicalPlan,
    graph: &PropertyGraph,
    moved: &BTreeMap<String, Relation>,
    cfg: &CostModelConfig,
    deadline: Deadline,
) -> Result<(GraphRelation, Execution)> {
    execute_graph_within(plan, graph, moved, cfg, deadline, None)
}

/// [`execute_graph`] that also fails once the synthetic cost of the work
/// done so far exceeds `budget`.
pub(crate) fn execute_graph_within(
    plan: &GraphPhysicalPlan,
    graph: &PropertyGraph,
    moved: &BTreeMap<String, Relation>,
    cfg: &CostModelConfig,
    deadline: Deadline,
    budget: Option<f64>,
) -> Result<(GraphRelation, Execution)> {
    let start = Instant::now();
    let mut ex = GraphExec {
        graph,
        moved,
        cfg,
        deadline,
        budget,
        cost: 0.0,
        produced: 0,
        ticks: 0,
    };
    let out = ex.run(&plan.root)?;
    let wall = start.elapsed().as_secs_f64();
    let latency = match cfg.mode {
        CostMode::Measured => wall,
        CostMode::Synthetic => ex.cost,
    };
    Ok((
        out,
        Execution {
            latency,
            synthetic: ex.cost,
        },
    ))
}
