//! Reference evaluator over the algebra IR.
//!
//! Every operator is implemented directly from its definition with bag
//! semantics. Joins hash on the equality keys; everything else is a single
//! pass over the input rows.

use std::collections::{HashMap, HashSet, VecDeque};

use super::expr::{qualify, AlgebraExpr, ExpandStep, ProjSource, RgKey};
use super::predicate::{Operand, Predicate};
use crate::datamodel::{
    Attr, AttrKind, Cell, Column, GraphRelation, JoinKey, PropertyGraph, Relation, Value, VertexId,
};
use crate::error::{Error, Result};

/// Result of evaluating an expression: graph relation or plain relation,
/// depending on the root operator.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalOutput {
    Graph(GraphRelation),
    Relation(Relation),
}

impl EvalOutput {
    pub fn len(&self) -> usize {
        match self {
            EvalOutput::Graph(p) => p.len(),
            EvalOutput::Relation(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Materialize as a relation (vertex cells become their `id` property).
    pub fn into_relation(self, graph: &PropertyGraph) -> Relation {
        match self {
            EvalOutput::Graph(p) => p.materialize("result", graph),
            EvalOutput::Relation(r) => r,
        }
    }
}

pub fn evaluate(
    expr: &AlgebraExpr,
    graph: &PropertyGraph,
    tables: &std::collections::BTreeMap<String, Relation>,
) -> Result<EvalOutput> {
    let ev = Evaluator { graph, tables };
    if expr.is_graph() {
        ev.graph(expr).map(EvalOutput::Graph)
    } else {
        ev.relation(expr).map(EvalOutput::Relation)
    }
}

struct Evaluator<'a> {
    graph: &'a PropertyGraph,
    tables: &'a std::collections::BTreeMap<String, Relation>,
}

impl Evaluator<'_> {
    fn relation(&self, expr: &AlgebraExpr) -> Result<Relation> {
        use AlgebraExpr::*;
        match expr {
            BaseRelation { name, alias } => {
                let base = self.tables.get(name).ok_or_else(|| Error::UnknownTable(name.clone()))?;
                let schema = base
                    .schema
                    .iter()
                    .map(|c| Column::new(qualify(alias.as_deref(), &c.name), c.kind))
                    .collect();
                Ok(Relation {
                    name: alias.clone().unwrap_or_else(|| name.clone()),
                    schema,
                    rows: base.rows.clone(),
                })
            }
            RelSelect { input, pred } => {
                let r = self.relation(input)?;
                select_relation(r, pred)
            }
            RelProject { input, columns } => {
                let r = self.relation(input)?;
                let idx = columns
                    .iter()
                    .map(|c| col_index(&r, &c.column))
                    .collect::<Result<Vec<_>>>()?;
                let schema = columns
                    .iter()
                    .zip(&idx)
                    .map(|(c, &i)| Column::new(c.alias.clone(), r.schema[i].kind))
                    .collect();
                let rows = r
                    .rows
                    .iter()
                    .map(|row| idx.iter().map(|&i| row[i].clone()).collect())
                    .collect();
                Ok(Relation {
                    name: r.name,
                    schema,
                    rows,
                })
            }
            RelJoin { left, right, on } => {
                let l = self.relation(left)?;
                let r = self.relation(right)?;
                hash_join_relations(&l, &r, on)
            }
            GrJoin { graph, table, on } => {
                let p = self.graph(graph)?;
                let rp = p.materialize("graph_result", self.graph);
                match table {
                    None => Ok(rp),
                    Some(t) => {
                        let r = self.relation(t)?;
                        hash_join_relations(&rp, &r, on)
                    }
                }
            }
            other => Err(Error::IllFormed(format!(
                "graph operator {} where a relation is required",
                super::sexpr::head(other)
            ))),
        }
    }

    fn graph(&self, expr: &AlgebraExpr) -> Result<GraphRelation> {
        use AlgebraExpr::*;
        match expr {
            GetVertices { var, label } => {
                let mut out = GraphRelation::new(vec![Attr::vertex(var.clone())]);
                out.rows = self
                    .graph
                    .vertices_with_label(label)
                    .iter()
                    .map(|&v| vec![Cell::Vertex(v)])
                    .collect();
                Ok(out)
            }
            Expand { input, step } => {
                let p = self.graph(input)?;
                self.expand(p, step)
            }
            VarExpand { input, step, max_hops } => {
                let p = self.graph(input)?;
                self.var_expand(p, step, *max_hops)
            }
            GraphSelect { input, pred } => {
                let mut p = self.graph(input)?;
                let resolver = GraphResolver::new(&p.schema, self.graph);
                let mut kept = Vec::with_capacity(p.rows.len());
                for row in p.rows.drain(..) {
                    if pred.eval(|op| resolver.resolve(op, &row))? {
                        kept.push(row);
                    }
                }
                p.rows = kept;
                Ok(p)
            }
            GraphProject { input, items } => {
                let p = self.graph(input)?;
                let mut schema = Vec::with_capacity(items.len());
                let mut getters = Vec::with_capacity(items.len());
                for item in items {
                    match &item.source {
                        ProjSource::Prop { var, prop } => {
                            let i = vertex_index(&p.schema, var)?;
                            schema.push(Attr::value(item.alias.clone()));
                            getters.push((i, Some(prop.as_str())));
                        }
                        ProjSource::Attr(name) => {
                            let i = attr_index(&p.schema, name)?;
                            schema.push(Attr {
                                name: item.alias.clone(),
                                kind: p.schema[i].kind,
                            });
                            getters.push((i, None));
                        }
                    }
                }
                let rows = p
                    .rows
                    .iter()
                    .map(|row| {
                        getters
                            .iter()
                            .map(|&(i, prop)| match prop {
                                Some(prop) => Cell::Value(self.vertex_prop(&row[i], prop)),
                                None => row[i].clone(),
                            })
                            .collect()
                    })
                    .collect();
                Ok(GraphRelation { schema, rows })
            }
            GraphJoin { left, right } => {
                let l = self.graph(left)?;
                let r = self.graph(right)?;
                graph_natural_join(&l, &r)
            }
            RgJoin {
                table,
                graph,
                on,
                temp_label,
            } => {
                if self.graph.vertex_labels().contains(temp_label) {
                    return Err(Error::TempLabelCollision(temp_label.clone()));
                }
                let t = self.relation(table)?;
                let p = self.graph(graph)?;
                self.rg_join(&t, &p, on)
            }
            other => Err(Error::IllFormed(format!(
                "relational operator {} where a graph relation is required",
                super::sexpr::head(other)
            ))),
        }
    }

    fn vertex_prop(&self, cell: &Cell, prop: &str) -> Value {
        match cell {
            Cell::Vertex(v) => self.graph.vertex_property_ref(*v, prop).cloned().unwrap_or(Value::Null),
            _ => Value::Null,
        }
    }

    fn expand(&self, p: GraphRelation, step: &ExpandStep) -> Result<GraphRelation> {
        let from = vertex_index(&p.schema, &step.from)?;
        let bound = p.schema.iter().position(|a| a.name == step.to);
        if let Some(b) = bound {
            if p.schema[b].kind != AttrKind::Vertex {
                return Err(Error::TypeMismatch(format!("`{}` is not a vertex attribute", step.to)));
            }
        }
        let mut out = GraphRelation::new(p.schema.clone());
        if bound.is_none() {
            out.schema.push(Attr::vertex(step.to.clone()));
        }
        for row in &p.rows {
            let Some(v) = row[from].as_vertex() else { continue };
            for &e in self.graph.incident(v, step.dir) {
                if !self.graph.edge_has_label(e, &step.edge_type) {
                    continue;
                }
                let w = self.graph.far_end(e, step.dir);
                if !self.graph.has_label(w, &step.to_label) {
                    continue;
                }
                match bound {
                    Some(b) => {
                        if row[b].as_vertex() == Some(w) {
                            out.rows.push(row.clone());
                        }
                    }
                    None => {
                        let mut r = row.clone();
                        r.push(Cell::Vertex(w));
                        out.rows.push(r);
                    }
                }
            }
        }
        Ok(out)
    }

    fn var_expand(&self, p: GraphRelation, step: &ExpandStep, max_hops: Option<u32>) -> Result<GraphRelation> {
        let from = vertex_index(&p.schema, &step.from)?;
        let bound = p.schema.iter().position(|a| a.name == step.to);
        let mut out = GraphRelation::new(p.schema.clone());
        if bound.is_none() {
            out.schema.push(Attr::vertex(step.to.clone()));
        }
        let mut cache: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
        for row in &p.rows {
            let Some(v) = row[from].as_vertex() else { continue };
            let targets = cache
                .entry(v)
                .or_insert_with(|| reachable(self.graph, v, step, max_hops));
            match bound {
                Some(b) => {
                    if let Some(w) = row[b].as_vertex() {
                        if targets.binary_search(&w).is_ok() {
                            out.rows.push(row.clone());
                        }
                    }
                }
                None => {
                    for &w in targets.iter() {
                        let mut r = row.clone();
                        r.push(Cell::Vertex(w));
                        out.rows.push(r);
                    }
                }
            }
        }
        Ok(out)
    }

    fn rg_join(&self, t: &Relation, p: &GraphRelation, on: &[RgKey]) -> Result<GraphRelation> {
        let t_idx = on
            .iter()
            .map(|k| col_index(t, &k.column))
            .collect::<Result<Vec<_>>>()?;
        let p_idx = on
            .iter()
            .map(|k| vertex_index(&p.schema, &k.var))
            .collect::<Result<Vec<_>>>()?;
        if let Some(a) = p.schema.iter().find(|a| t.column_index(&a.name).is_some()) {
            return Err(Error::IllFormed(format!(
                "relation-graph join inputs share attribute `{}`",
                a.name
            )));
        }
        let mut schema: Vec<Attr> = t.schema.iter().map(|c| Attr::value(c.name.clone())).collect();
        schema.extend(p.schema.iter().cloned());

        let mut index: HashMap<Vec<JoinKey>, Vec<usize>> = HashMap::new();
        for (ri, row) in t.rows.iter().enumerate() {
            if let Some(key) = keys_of(t_idx.iter().map(|&i| &row[i])) {
                index.entry(key).or_default().push(ri);
            }
        }
        let mut rows = Vec::new();
        for prow in &p.rows {
            let values: Vec<Value> = on
                .iter()
                .zip(&p_idx)
                .map(|(k, &i)| self.vertex_prop(&prow[i], &k.prop))
                .collect();
            let Some(key) = keys_of(values.iter()) else { continue };
            if let Some(matches) = index.get(&key) {
                for &ri in matches {
                    let mut r: Vec<Cell> = t.rows[ri].iter().cloned().map(Cell::Value).collect();
                    r.extend(prow.iter().cloned());
                    rows.push(r);
                }
            }
        }
        Ok(GraphRelation { schema, rows })
    }
}

/// Vertices with `to_label` reachable from `v` over one or more `edge_type`
/// edges in `dir`, sorted and distinct.
pub(crate) fn reachable(graph: &PropertyGraph, v: VertexId, step: &ExpandStep, max_hops: Option<u32>) -> Vec<VertexId> {
    let mut seen: HashSet<VertexId> = HashSet::new();
    let mut queue = VecDeque::from([(v, 0u32)]);
    let mut hits = Vec::new();
    while let Some((u, d)) = queue.pop_front() {
        if max_hops.is_some_and(|m| d >= m) {
            continue;
        }
        for &e in graph.incident(u, step.dir) {
            if !graph.edge_has_label(e, &step.edge_type) {
                continue;
            }
            let w = graph.far_end(e, step.dir);
            if seen.insert(w) {
                if graph.has_label(w, &step.to_label) {
                    hits.push(w);
                }
                queue.push_back((w, d + 1));
            }
        }
    }
    hits.sort();
    hits
}

fn keys_of<'v>(values: impl Iterator<Item = &'v Value>) -> Option<Vec<JoinKey>> {
    values.map(Value::join_key).collect()
}

fn col_index(r: &Relation, name: &str) -> Result<usize> {
    r.column_index(name)
        .ok_or_else(|| Error::UnresolvedAttribute(name.to_string()))
}

fn attr_index(s: &[Attr], name: &str) -> Result<usize> {
    s.iter()
        .position(|a| a.name == name)
        .ok_or_else(|| Error::UnresolvedAttribute(name.to_string()))
}

fn vertex_index(s: &[Attr], name: &str) -> Result<usize> {
    let i = attr_index(s, name)?;
    if s[i].kind != AttrKind::Vertex {
        return Err(Error::TypeMismatch(format!("`{name}` is not a vertex attribute")));
    }
    Ok(i)
}

pub(crate) fn select_relation(mut r: Relation, pred: &Predicate) -> Result<Relation> {
    let cols: HashMap<String, usize> = r
        .schema
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.clone(), i))
        .collect();
    let mut kept = Vec::with_capacity(r.rows.len());
    for row in r.rows.drain(..) {
        let ok = pred.eval(|op| match op {
            Operand::Col(c) => cols
                .get(c)
                .map(|&i| row[i].clone())
                .ok_or_else(|| Error::UnresolvedAttribute(c.clone())),
            Operand::Prop { var, prop } => Err(Error::UnresolvedAttribute(format!("{var}.{prop}"))),
            _ => unreachable!("literals and builtins are evaluated by the predicate"),
        })?;
        if ok {
            kept.push(row);
        }
    }
    r.rows = kept;
    Ok(r)
}

/// Equi-join on the explicit pairs plus every column name common to both
/// sides; output schema is `l ∥ (r ∖ l)`.
pub(crate) fn hash_join_relations(l: &Relation, r: &Relation, on: &[(String, String)]) -> Result<Relation> {
    let mut lk = Vec::new();
    let mut rk = Vec::new();
    for (a, b) in on {
        lk.push(col_index(l, a)?);
        rk.push(col_index(r, b)?);
    }
    for (i, c) in l.schema.iter().enumerate() {
        if let Some(j) = r.column_index(&c.name) {
            lk.push(i);
            rk.push(j);
        }
    }
    let keep_r: Vec<usize> = (0..r.schema.len())
        .filter(|&j| l.column_index(&r.schema[j].name).is_none())
        .collect();
    let mut schema = l.schema.clone();
    schema.extend(keep_r.iter().map(|&j| r.schema[j].clone()));

    let mut index: HashMap<Vec<JoinKey>, Vec<usize>> = HashMap::new();
    for (ri, row) in r.rows.iter().enumerate() {
        if let Some(key) = keys_of(rk.iter().map(|&j| &row[j])) {
            index.entry(key).or_default().push(ri);
        }
    }
    let mut rows = Vec::new();
    for lrow in &l.rows {
        let Some(key) = keys_of(lk.iter().map(|&i| &lrow[i])) else { continue };
        if let Some(matches) = index.get(&key) {
            for &ri in matches {
                let mut out = lrow.clone();
                out.extend(keep_r.iter().map(|&j| r.rows[ri][j].clone()));
                rows.push(out);
            }
        }
    }
    Ok(Relation {
        name: format!("{}_{}", l.name, r.name),
        schema,
        rows,
    })
}

fn graph_natural_join(l: &GraphRelation, r: &GraphRelation) -> Result<GraphRelation> {
    let mut lk = Vec::new();
    let mut rk = Vec::new();
    for (i, a) in l.schema.iter().enumerate() {
        if let Some(j) = r.attr_index(&a.name) {
            if r.schema[j].kind != a.kind {
                return Err(Error::TypeMismatch(format!("join attribute `{}` differs in kind", a.name)));
            }
            lk.push(i);
            rk.push(j);
        }
    }
    let keep_r: Vec<usize> = (0..r.schema.len())
        .filter(|&j| l.attr_index(&r.schema[j].name).is_none())
        .collect();
    let mut schema = l.schema.clone();
    schema.extend(keep_r.iter().map(|&j| r.schema[j].clone()));

    let cell_key = |c: &Cell| -> Option<Cell> {
        match c {
            Cell::Value(v) => v.join_key().map(|_| Cell::Value(normalize(v))),
            other => Some(other.clone()),
        }
    };
    let mut index: HashMap<Vec<Cell>, Vec<usize>> = HashMap::new();
    for (ri, row) in r.rows.iter().enumerate() {
        if let Some(key) = rk.iter().map(|&j| cell_key(&row[j])).collect::<Option<Vec<_>>>() {
            index.entry(key).or_default().push(ri);
        }
    }
    let mut rows = Vec::new();
    for lrow in &l.rows {
        let Some(key) = lk.iter().map(|&i| cell_key(&lrow[i])).collect::<Option<Vec<_>>>() else {
            continue;
        };
        if let Some(matches) = index.get(&key) {
            for &ri in matches {
                let mut out = lrow.clone();
                out.extend(keep_r.iter().map(|&j| r.rows[ri][j].clone()));
                rows.push(out);
            }
        }
    }
    Ok(GraphRelation { schema, rows })
}

/// Integral floats compare equal to integers in joins.
fn normalize(v: &Value) -> Value {
    match v.join_key() {
        Some(JoinKey::Int(i)) => Value::Int(i),
        _ => v.clone(),
    }
}

/// Resolves predicate operands against a graph-relation row.
pub(crate) struct GraphResolver<'a> {
    index: HashMap<&'a str, usize>,
    graph: &'a PropertyGraph,
}

impl<'a> GraphResolver<'a> {
    pub(crate) fn new(schema: &'a [Attr], graph: &'a PropertyGraph) -> Self {
        GraphResolver {
            index: schema.iter().enumerate().map(|(i, a)| (a.name.as_str(), i)).collect(),
            graph,
        }
    }

    pub(crate) fn resolve(&self, op: &Operand, row: &[Cell]) -> Result<Value> {
        match op {
            Operand::Col(c) => {
                let i = *self
                    .index
                    .get(c.as_str())
                    .ok_or_else(|| Error::UnresolvedAttribute(c.clone()))?;
                match &row[i] {
                    Cell::Value(v) => Ok(v.clone()),
                    _ => Err(Error::TypeMismatch(format!("comparison on non-value attribute `{c}`"))),
                }
            }
            Operand::Prop { var, prop } => {
                let i = *self
                    .index
                    .get(var.as_str())
                    .ok_or_else(|| Error::UnresolvedAttribute(var.clone()))?;
                match &row[i] {
                    Cell::Vertex(v) => Ok(self.graph.vertex_property_ref(*v, prop).cloned().unwrap_or(Value::Null)),
                    _ => Err(Error::TypeMismatch(format!("`{var}` is not a vertex attribute"))),
                }
            }
            _ => unreachable!("literals and builtins are evaluated by the predicate"),
        }
    }
}
