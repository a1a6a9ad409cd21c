//! Equivalence-preserving rewrites of a cross-model join expression.
//!
//! Expressions produced by the query front end have the shape
//!
//! ```text
//! π( σ( X GR⋈ U1 ⋈ U2 ⋈ … ) )      X = ω(items)(pattern)
//! ```
//!
//! where each join unit `Ui` is a relational sub-expression joined to the
//! graph result on one or more (graph column, unit column) pairs. Moving a
//! unit re-parents it under a relation-graph join inside `X`; its columns
//! are carried through the graph projection so the remaining operators see
//! the same attributes.

use std::collections::{BTreeMap, BTreeSet};

use super::expr::{schema_of, temp_label, AlgebraExpr, ProjCol, ProjItem, ProjSource, RgKey, TableSchemas};
use super::predicate::Predicate;
use crate::error::{Error, Result};

/// A relational sub-expression joined to the graph result.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinUnit {
    pub name: String,
    pub expr: AlgebraExpr,
    /// (graph result column, unit column) pairs.
    pub on: Vec<(String, String)>,
}

/// The cross-model join expression split into its layers.
#[derive(Debug, Clone, PartialEq)]
pub struct CmgrjParts {
    pub projection: Option<Vec<ProjCol>>,
    pub residual: Predicate,
    pub graph_items: Vec<ProjItem>,
    pub pattern: AlgebraExpr,
    pub units: Vec<JoinUnit>,
}

/// Name of a join unit: the smallest table qualifier among its join columns,
/// or its smallest base table when the columns are unqualified.
pub fn unit_name(expr: &AlgebraExpr, on: &[(String, String)]) -> String {
    on.iter()
        .filter_map(|(_, u)| u.split_once('.').map(|(q, _)| q.to_string()))
        .min()
        .or_else(|| expr.base_tables().into_iter().next())
        .unwrap_or_default()
}

impl CmgrjParts {
    pub fn decompose(expr: &AlgebraExpr) -> Result<CmgrjParts> {
        let mut e = expr;
        let mut projection = None;
        if let AlgebraExpr::RelProject { input, columns } = e {
            projection = Some(columns.clone());
            e = input;
        }
        let mut residual = Predicate::default();
        if let AlgebraExpr::RelSelect { input, pred } = e {
            residual = pred.clone();
            e = input;
        }
        let mut units_rev = Vec::new();
        loop {
            match e {
                AlgebraExpr::RelJoin { left, right, on } => {
                    units_rev.push(JoinUnit {
                        name: unit_name(right, on),
                        expr: (**right).clone(),
                        on: on.clone(),
                    });
                    e = left;
                }
                AlgebraExpr::GrJoin { graph, table, on } => {
                    if let Some(t) = table {
                        units_rev.push(JoinUnit {
                            name: unit_name(t, on),
                            expr: (**t).clone(),
                            on: on.clone(),
                        });
                    }
                    e = graph;
                    break;
                }
                _ => {
                    return Err(Error::IllFormed(
                        "expected a graph-relation join below the relational operators".into(),
                    ))
                }
            }
        }
        let AlgebraExpr::GraphProject { input, items } = e else {
            return Err(Error::IllFormed("graph side must end in a graph projection".into()));
        };
        units_rev.reverse();
        Ok(CmgrjParts {
            projection,
            residual,
            graph_items: items.clone(),
            pattern: (**input).clone(),
            units: units_rev,
        })
    }

    pub fn unit(&self, name: &str) -> Option<&JoinUnit> {
        self.units.iter().find(|u| u.name == name)
    }

    pub fn unit_names(&self) -> Vec<String> {
        self.units.iter().map(|u| u.name.clone()).collect()
    }

    /// Property behind a graph result column, if it is a plain `var.prop`.
    pub fn source_of(&self, column: &str) -> Option<(&str, &str)> {
        self.graph_items.iter().find(|i| i.alias == column).and_then(|i| match &i.source {
            ProjSource::Prop { var, prop } => Some((var.as_str(), prop.as_str())),
            ProjSource::Attr(_) => None,
        })
    }

    /// Vertex variable → label, read from the pattern's scans and expansions.
    pub fn var_labels(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        self.pattern.walk(&mut |e| match e {
            AlgebraExpr::GetVertices { var, label } => {
                out.insert(var.clone(), label.clone());
            }
            AlgebraExpr::Expand { step, .. } | AlgebraExpr::VarExpand { step, .. } => {
                out.entry(step.to.clone()).or_insert_with(|| step.to_label.clone());
            }
            _ => {}
        });
        out
    }

    /// Relation-graph join keys for a unit.
    pub fn rg_keys(&self, unit: &JoinUnit) -> Result<Vec<RgKey>> {
        unit.on
            .iter()
            .map(|(g, u)| {
                let (var, prop) = self
                    .source_of(g)
                    .ok_or_else(|| Error::NotJoinable(unit.name.clone()))?;
                Ok(RgKey {
                    column: u.clone(),
                    var: var.to_string(),
                    prop: prop.to_string(),
                })
            })
            .collect()
    }

    /// Reassemble with the given graph side and the units that stay relational.
    pub fn assemble(&self, graph: AlgebraExpr, remaining: &[&JoinUnit]) -> AlgebraExpr {
        let mut it = remaining.iter();
        let mut e = match it.next() {
            Some(u) => graph.gr_join(Some(u.expr.clone()), u.on.clone()),
            None => graph.gr_join(None, vec![]),
        };
        for u in it {
            e = e.rel_join(u.expr.clone(), u.on.clone());
        }
        e = e.rel_select(self.residual.clone());
        if let Some(cols) = &self.projection {
            e = e.rel_project(cols.clone());
        }
        e
    }

    fn check_movement(&self, movement: &BTreeSet<String>) -> Result<()> {
        for m in movement {
            let unit = self.unit(m).ok_or_else(|| Error::NotJoinable(m.clone()))?;
            self.rg_keys(unit)?;
        }
        Ok(())
    }
}

/// Carry every column of `unit` through the graph projection.
fn passthrough(unit: &JoinUnit, tables: &dyn TableSchemas) -> Result<Vec<ProjItem>> {
    Ok(schema_of(&unit.expr, tables)?
        .into_iter()
        .map(|a| ProjItem::attr(a.name))
        .collect())
}

/// Rewrite so that the units named in `movement` join graph-side through
/// relation-graph joins; the others join relationally after a single
/// graph-relation join.
pub fn rewrite_equivalents(
    expr: &AlgebraExpr,
    movement: &BTreeSet<String>,
    tables: &dyn TableSchemas,
) -> Result<AlgebraExpr> {
    let parts = CmgrjParts::decompose(expr)?;
    parts.check_movement(movement)?;
    let mut inner = parts.pattern.clone();
    let mut items = parts.graph_items.clone();
    let mut remaining = Vec::new();
    let mut counter = 0;
    for unit in &parts.units {
        if movement.contains(&unit.name) {
            inner = AlgebraExpr::RgJoin {
                table: Box::new(unit.expr.clone()),
                graph: Box::new(inner),
                on: parts.rg_keys(unit)?,
                temp_label: temp_label(&unit.name, counter),
            };
            counter += 1;
            items.extend(passthrough(unit, tables)?);
        } else {
            remaining.push(unit);
        }
    }
    Ok(parts.assemble(inner.graph_project(items), &remaining))
}

/// Column holding the vertex identity in a vertex-movement export.
pub fn export_vid_column(unit: &str) -> String {
    format!("__vid_{unit}")
}

/// The pruned alternative that ships the vertices of `label` to the
/// relational side, joins them there with every unit keyed on a `label`
/// vertex, and ships the joined rows back to be matched by vertex id.
pub fn rewrite_vertex_movement(expr: &AlgebraExpr, label: &str, tables: &dyn TableSchemas) -> Result<AlgebraExpr> {
    let parts = CmgrjParts::decompose(expr)?;
    let labels = parts.var_labels();
    let mut inner = parts.pattern.clone();
    let mut items = parts.graph_items.clone();
    let mut remaining = Vec::new();
    let mut moved = 0;
    for unit in &parts.units {
        let keys = parts.rg_keys(unit).ok();
        let var = keys.as_ref().and_then(|ks| {
            let v = &ks.first()?.var;
            (ks.iter().all(|k| &k.var == v) && labels.get(v).map(String::as_str) == Some(label)).then(|| v.clone())
        });
        let (Some(keys), Some(var)) = (keys, var) else {
            remaining.push(unit);
            continue;
        };
        let w = format!("__v_{}", unit.name);
        let vid = export_vid_column(&unit.name);
        let mut export_items = vec![ProjItem::prop(&w, "id", &vid)];
        let mut export_on = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            let col = format!("__key{i}_{}", unit.name);
            export_items.push(ProjItem::prop(&w, &k.prop, &col));
            export_on.push((col, k.column.clone()));
        }
        let export = AlgebraExpr::get_vertices(&w, label)
            .graph_project(export_items)
            .gr_join(Some(unit.expr.clone()), export_on);
        inner = AlgebraExpr::RgJoin {
            table: Box::new(export),
            graph: Box::new(inner),
            on: vec![RgKey {
                column: vid,
                var,
                prop: "id".into(),
            }],
            temp_label: temp_label(&unit.name, moved),
        };
        moved += 1;
        items.extend(passthrough(unit, tables)?);
    }
    if moved == 0 {
        return Err(Error::NotJoinable(label.to_string()));
    }
    Ok(parts.assemble(inner.graph_project(items), &remaining))
}
