//! In-memory relational engine: greedy left-deep join planning and a
//! hash-join executor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algebra::{
    hash_join_relations, head, schema_of, select_relation, AlgebraExpr, Atom, CmpOp, Operand, Predicate, ProjCol,
    TableSchemas,
};
use crate::datamodel::{Catalog, Column, Relation};
use crate::error::{Error, Result};
use crate::estimate::{join_size, predicate_selectivity};

use super::cost::{CostMode, CostModelConfig};
use super::graph::Execution;
use super::Deadline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RelOp {
    /// Scan of a stored or materialized relation; an alias qualifies every
    /// column as `alias.col`.
    TableScan {
        table: String,
        alias: Option<String>,
        filter: Predicate,
    },
    /// Equi-join on the pairs plus every common column; builds on the right.
    HashJoin { on: Vec<(String, String)> },
    Filter { pred: Predicate },
    Project { columns: Vec<ProjCol> },
}

impl RelOp {
    pub fn name(&self) -> &'static str {
        match self {
            RelOp::TableScan { .. } => "TableScan",
            RelOp::HashJoin { .. } => "HashJoin",
            RelOp::Filter { .. } => "Filter",
            RelOp::Project { .. } => "Project",
        }
    }
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelOp::TableScan { table, alias, filter } => {
                write!(f, "TableScan({table}")?;
                if let Some(a) = alias {
                    write!(f, " {a}")?;
                }
                write!(f, ")")?;
                if !filter.is_true() {
                    write!(f, " where {filter}")?;
                }
                Ok(())
            }
            RelOp::HashJoin { on } => {
                let ks: Vec<String> = on.iter().map(|(a, b)| format!("{a}={b}")).collect();
                write!(f, "HashJoin({})", ks.join(", "))
            }
            RelOp::Filter { pred } => write!(f, "Filter({pred})"),
            RelOp::Project { columns } => {
                let cs: Vec<String> = columns
                    .iter()
                    .map(|c| {
                        if c.column == c.alias {
                            c.column.clone()
                        } else {
                            format!("{} AS {}", c.column, c.alias)
                        }
                    })
                    .collect();
                write!(f, "Project({})", cs.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelPlanNode {
    pub op: RelOp,
    pub children: Vec<RelPlanNode>,
    pub estimate: Option<f64>,
}

impl RelPlanNode {
    pub fn post_order(&self) -> Vec<&RelPlanNode> {
        let mut out = Vec::new();
        fn go<'a>(n: &'a RelPlanNode, out: &mut Vec<&'a RelPlanNode>) {
            for c in &n.children {
                go(c, out);
            }
            out.push(n);
        }
        go(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelPhysicalPlan {
    pub root: RelPlanNode,
}

impl fmt::Display for RelPhysicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(n: &RelPlanNode, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let est = n.estimate.map(|x| format!("{x:.1}")).unwrap_or_else(|| "?".into());
            writeln!(f, "{}{} est={est}", "  ".repeat(depth), n.op)?;
            for c in &n.children {
                go(c, depth + 1, f)?;
            }
            Ok(())
        }
        go(&self.root, 0, f)
    }
}

/// Statistics visible to the relational planner: catalog tables plus
/// relations materialized earlier in the same plan.
pub struct RelationalStats<'a> {
    pub catalog: &'a Catalog,
    pub materialized: &'a BTreeMap<String, Relation>,
}

impl RelationalStats<'_> {
    fn rows(&self, table: &str) -> f64 {
        match self.materialized.get(table) {
            Some(r) => r.len() as f64,
            None => self.catalog.table_rowcount(table) as f64,
        }
    }

    fn distinct(&self, table: &str, column: &str) -> Option<u64> {
        if self.materialized.contains_key(table) {
            return None;
        }
        self.catalog.column_distinct(table, column)
    }
}

impl TableSchemas for RelationalStats<'_> {
    fn table_columns(&self, name: &str) -> Option<Vec<String>> {
        match self.materialized.get(name) {
            Some(r) => Some(r.column_names()),
            None => TableSchemas::table_columns(self.catalog, name),
        }
    }
}

/// Output column name to the stored (table, column) it comes from.
fn column_sources(e: &AlgebraExpr, stats: &RelationalStats) -> BTreeMap<String, (String, String)> {
    match e {
        AlgebraExpr::BaseRelation { name, alias } => stats
            .table_columns(name)
            .unwrap_or_default()
            .into_iter()
            .map(|c| {
                let out = match alias {
                    Some(a) => format!("{a}.{c}"),
                    None => c.clone(),
                };
                (out, (name.clone(), c))
            })
            .collect(),
        AlgebraExpr::RelProject { input, columns } => {
            let inner = column_sources(input, stats);
            columns
                .iter()
                .filter_map(|c| inner.get(&c.column).map(|s| (c.alias.clone(), s.clone())))
                .collect()
        }
        other => {
            let mut out = BTreeMap::new();
            for c in other.children() {
                for (k, v) in column_sources(c, stats) {
                    out.entry(k).or_insert(v);
                }
            }
            out
        }
    }
}

struct Leaf {
    node: RelPlanNode,
    columns: Vec<String>,
    rows: f64,
}

struct Planner<'a, 'b> {
    stats: &'a RelationalStats<'b>,
    sources: BTreeMap<String, (String, String)>,
}

impl Planner<'_, '_> {
    fn distinct_of(&self, column: &str) -> Option<u64> {
        self.sources
            .get(column)
            .and_then(|(t, c)| self.stats.distinct(t, c))
    }

    fn selectivity(&self, pred: &Predicate) -> f64 {
        let d = |o: &Operand| match o {
            Operand::Col(c) => self.distinct_of(c),
            _ => None,
        };
        predicate_selectivity(pred, &d)
    }

    fn flatten(&self, e: &AlgebraExpr, leaves: &mut Vec<Leaf>, pairs: &mut Vec<(String, String)>, atoms: &mut Vec<Atom>) -> Result<()> {
        match e {
            AlgebraExpr::RelJoin { left, right, on } => {
                self.flatten(left, leaves, pairs, atoms)?;
                self.flatten(right, leaves, pairs, atoms)?;
                pairs.extend(on.iter().cloned());
            }
            AlgebraExpr::RelSelect { input, pred } if !is_scan(input) => {
                self.flatten(input, leaves, pairs, atoms)?;
                atoms.extend(pred.atoms.iter().cloned());
            }
            other => leaves.push(self.leaf(other)?),
        }
        Ok(())
    }

    fn leaf(&self, e: &AlgebraExpr) -> Result<Leaf> {
        let columns: Vec<String> = schema_of(e, self.stats)?.into_iter().map(|a| a.name).collect();
        match e {
            AlgebraExpr::BaseRelation { name, alias } => {
                let rows = self.stats.rows(name);
                Ok(Leaf {
                    node: RelPlanNode {
                        op: RelOp::TableScan {
                            table: name.clone(),
                            alias: alias.clone(),
                            filter: Predicate::default(),
                        },
                        children: Vec::new(),
                        estimate: Some(rows),
                    },
                    columns,
                    rows,
                })
            }
            AlgebraExpr::RelSelect { input, pred } if is_scan(input) => {
                let mut l = self.leaf(input)?;
                if let RelOp::TableScan { filter, .. } = &mut l.node.op {
                    *filter = std::mem::take(filter).and(pred.clone());
                }
                l.rows *= self.selectivity(pred);
                l.node.estimate = Some(l.rows);
                Ok(l)
            }
            AlgebraExpr::RelProject { input, columns: cols } => {
                let inner = self.plan(input)?;
                let rows = inner.estimate.unwrap_or(0.0);
                Ok(Leaf {
                    node: RelPlanNode {
                        op: RelOp::Project { columns: cols.clone() },
                        children: vec![inner],
                        estimate: Some(rows),
                    },
                    columns,
                    rows,
                })
            }
            AlgebraExpr::RelJoin { .. } | AlgebraExpr::RelSelect { .. } => {
                let node = self.plan(e)?;
                let rows = node.estimate.unwrap_or(0.0);
                Ok(Leaf { node, columns, rows })
            }
            other => Err(Error::IllFormed(format!("{} in a relational plan", head(other)))),
        }
    }

    fn plan(&self, e: &AlgebraExpr) -> Result<RelPlanNode> {
        let mut leaves = Vec::new();
        let mut pairs = Vec::new();
        let mut atoms = Vec::new();
        self.flatten(e, &mut leaves, &mut pairs, &mut atoms)?;

        let first = (0..leaves.len())
            .min_by(|&a, &b| leaves[a].rows.total_cmp(&leaves[b].rows))
            .ok_or_else(|| Error::IllFormed("empty relational expression".into()))?;
        let Leaf {
            mut node,
            mut columns,
            mut rows,
        } = leaves.remove(first);
        self.apply_ready(&mut node, &columns, &mut rows, &mut atoms, &mut pairs);

        while !leaves.is_empty() {
            let have: BTreeSet<&str> = columns.iter().map(String::as_str).collect();
            let mut best: Option<(usize, Vec<(String, String)>, f64)> = None;
            for (i, l) in leaves.iter().enumerate() {
                let lcols: BTreeSet<&str> = l.columns.iter().map(String::as_str).collect();
                let mut on = Vec::new();
                for (a, b) in &pairs {
                    if have.contains(a.as_str()) && lcols.contains(b.as_str()) {
                        on.push((a.clone(), b.clone()));
                    } else if have.contains(b.as_str()) && lcols.contains(a.as_str()) {
                        on.push((b.clone(), a.clone()));
                    }
                }
                let common: Vec<(String, String)> = columns
                    .iter()
                    .filter(|c| lcols.contains(c.as_str()))
                    .map(|c| (c.clone(), c.clone()))
                    .collect();
                let connected = !on.is_empty() || !common.is_empty();
                let mut est = rows * l.rows;
                let mut unknown = false;
                for (a, b) in on.iter().chain(&common) {
                    match self.distinct_of(a).max(self.distinct_of(b)) {
                        Some(d) => est /= d.max(1) as f64,
                        None => unknown = true,
                    }
                }
                if unknown {
                    est = est.min(join_size(rows, l.rows, None, None));
                }
                let score = if connected { est } else { f64::INFINITY };
                let better = match &best {
                    None => true,
                    Some((_, _, s)) => score < *s,
                };
                if better {
                    best = Some((i, on, score));
                }
            }
            let (i, on, score) = best.unwrap();
            let leaf = leaves.remove(i);
            pairs.retain(|p| !on.iter().any(|(a, b)| (a == &p.0 && b == &p.1) || (a == &p.1 && b == &p.0)));
            rows = if score.is_finite() { score } else { rows * leaf.rows };
            for c in leaf.columns {
                if !columns.contains(&c) {
                    columns.push(c);
                }
            }
            node = RelPlanNode {
                op: RelOp::HashJoin { on },
                children: vec![node, leaf.node],
                estimate: Some(rows),
            };
            self.apply_ready(&mut node, &columns, &mut rows, &mut atoms, &mut pairs);
        }
        if let Some(a) = atoms.first() {
            return Err(Error::UnresolvedAttribute(a.to_string()));
        }
        if let Some((a, b)) = pairs.first() {
            return Err(Error::UnresolvedAttribute(format!("{a} = {b}")));
        }
        let want: Vec<String> = schema_of(e, self.stats)?.into_iter().map(|a| a.name).collect();
        if want != columns {
            node = RelPlanNode {
                op: RelOp::Project {
                    columns: want.into_iter().map(ProjCol::keep).collect(),
                },
                children: vec![node],
                estimate: Some(rows),
            };
        }
        Ok(node)
    }

    /// Wrap `node` in a filter holding every pending atom and join pair
    /// whose columns are all present.
    fn apply_ready(
        &self,
        node: &mut RelPlanNode,
        columns: &[String],
        rows: &mut f64,
        atoms: &mut Vec<Atom>,
        pairs: &mut Vec<(String, String)>,
    ) {
        let have: BTreeSet<String> = columns.iter().cloned().collect();
        let (mut ready, rest): (Vec<Atom>, Vec<Atom>) = std::mem::take(atoms)
            .into_iter()
            .partition(|a| a.vars().is_empty() && a.columns().is_subset(&have));
        *atoms = rest;
        let (closed, open): (Vec<_>, Vec<_>) = std::mem::take(pairs)
            .into_iter()
            .partition(|(a, b)| have.contains(a) && have.contains(b));
        *pairs = open;
        ready.extend(
            closed
                .into_iter()
                .map(|(a, b)| Atom::new(Operand::Col(a), CmpOp::Eq, Operand::Col(b))),
        );
        if ready.is_empty() {
            return;
        }
        let pred = Predicate::new(ready);
        *rows *= self.selectivity(&pred);
        let child = std::mem::replace(
            node,
            RelPlanNode {
                op: RelOp::Filter { pred: Predicate::default() },
                children: Vec::new(),
                estimate: None,
            },
        );
        *node = RelPlanNode {
            op: RelOp::Filter { pred },
            children: vec![child],
            estimate: Some(*rows),
        };
    }
}

fn is_scan(e: &AlgebraExpr) -> bool {
    match e {
        AlgebraExpr::BaseRelation { .. } => true,
        AlgebraExpr::RelSelect { input, .. } => is_scan(input),
        _ => false,
    }
}

/// Plan a relational expression. Scans resolve first against
/// `stats.materialized`, then against the catalog.
pub fn plan_relational(expr: &AlgebraExpr, stats: &RelationalStats) -> Result<RelPhysicalPlan> {
    let planner = Planner {
        stats,
        sources: column_sources(expr, stats),
    };
    Ok(RelPhysicalPlan {
        root: planner.plan(expr)?,
    })
}

struct RelExec<'a> {
    tables: &'a BTreeMap<String, Relation>,
    materialized: &'a BTreeMap<String, Relation>,
    cfg: &'a CostModelConfig,
    deadline: Deadline,
    cost: f64,
}

impl RelExec<'_> {
    fn check(&self) -> Result<()> {
        if self.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(Error::Timeout);
        }
        Ok(())
    }

    fn run(&mut self, n: &RelPlanNode) -> Result<Relation> {
        self.check()?;
        let s = self.cfg.synthetic;
        let out = match &n.op {
            RelOp::TableScan { table, alias, filter } => {
                let base = self
                    .materialized
                    .get(table)
                    .or_else(|| self.tables.get(table))
                    .ok_or_else(|| Error::UnknownTable(table.clone()))?;
                self.cost += s.table_scan * base.len() as f64;
                let schema: Vec<Column> = base
                    .schema
                    .iter()
                    .map(|c| match alias {
                        Some(a) => Column::new(format!("{a}.{}", c.name), c.kind),
                        None => c.clone(),
                    })
                    .collect();
                let r = Relation {
                    name: alias.clone().unwrap_or_else(|| table.clone()),
                    schema,
                    rows: base.rows.clone(),
                };
                if filter.is_true() {
                    r
                } else {
                    self.cost += s.filter * r.len() as f64;
                    select_relation(r, filter)?
                }
            }
            RelOp::HashJoin { on } => {
                let l = self.run(&n.children[0])?;
                let r = self.run(&n.children[1])?;
                self.cost += s.hash_build * r.len() as f64 + s.hash_probe * l.len() as f64;
                hash_join_relations(&l, &r, on)?
            }
            RelOp::Filter { pred } => {
                let r = self.run(&n.children[0])?;
                self.cost += s.filter * r.len() as f64;
                select_relation(r, pred)?
            }
            RelOp::Project { columns } => {
                let r = self.run(&n.children[0])?;
                self.cost += s.project * r.len() as f64;
                let idx = columns
                    .iter()
                    .map(|c| {
                        r.column_index(&c.column)
                            .ok_or_else(|| Error::UnresolvedAttribute(c.column.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Relation {
                    name: r.name.clone(),
                    schema: columns
                        .iter()
                        .zip(&idx)
                        .map(|(c, &i)| Column::new(c.alias.clone(), r.schema[i].kind))
                        .collect(),
                    rows: r
                        .rows
                        .iter()
                        .map(|row| idx.iter().map(|&i| row[i].clone()).collect())
                        .collect(),
                }
            }
        };
        Ok(out)
    }
}

/// Run a relational plan over stored `tables` and `materialized`
/// intermediates, naming the result `name`.
pub fn execute_relational(
    plan: &RelPhysicalPlan,
    name: &str,
    tables: &BTreeMap<String, Relation>,
    materialized: &BTreeMap<String, Relation>,
    cfg: &CostModelConfig,
    deadline: Deadline,
) -> Result<(Relation, Execution)> {
    let start = Instant::now();
    let mut ex = RelExec {
        tables,
        materialized,
        cfg,
        deadline,
        cost: 0.0,
    };
    let mut out = ex.run(&plan.root)?;
    out.name = name.to_string();
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
