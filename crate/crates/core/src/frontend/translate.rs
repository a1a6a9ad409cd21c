//! Translation of a movement choice into engine sub-queries and transfers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::algebra::{
    rewrite_equivalents, rewrite_vertex_movement, schema_of, to_sexpr, AlgebraExpr, CmgrjParts, JoinUnit,
    TableSchemas,
};
use crate::datamodel::Catalog;
use crate::error::{Error, Result};

use super::query::{CmgrjQuery, GRAPH_RESULT};

/// Name under which a unit's pre-query result is materialized.
pub fn unit_relation(unit: &str) -> String {
    format!("__unit_{unit}")
}

/// Name of the vertex export shipped from the graph engine for a unit.
pub fn export_relation(unit: &str) -> String {
    format!("__export_{unit}")
}

/// Name of the relationally joined export shipped back graph-side.
pub fn moved_relation(unit: &str) -> String {
    format!("__moved_{unit}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MovementDirection {
    RelationalToGraph,
    GraphToRelational,
}

impl fmt::Display for MovementDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MovementDirection::RelationalToGraph => "relational->graph",
            MovementDirection::GraphToRelational => "graph->relational",
        })
    }
}

/// One batch of relations crossing between engines.
#[derive(Debug, Clone, PartialEq)]
pub struct MovementStep {
    pub direction: MovementDirection,
    pub relations: Vec<String>,
}

/// Vertex export of a pruned plan: vertices leave the graph engine, join
/// a unit relationally and return as `moved_relation(unit)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexExport {
    pub unit: String,
    /// Graph query producing `export_relation(unit)`.
    pub graph_query: AlgebraExpr,
    /// Relational query over the export and the unit.
    pub join: AlgebraExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePlan {
    /// Units joined graph-side.
    pub movement: BTreeSet<String>,
    /// (materialized name, relational expression over base tables).
    pub step1_prequeries: Vec<(String, AlgebraExpr)>,
    /// Exports that run before the main graph query; empty for plans in the
    /// candidate space.
    pub vertex_exports: Vec<VertexExport>,
    /// Graph-side expression; moved units appear as base relations.
    pub graph_query: AlgebraExpr,
    /// Joins the graph result (`neo4j`) with the units left relational.
    pub final_relational: AlgebraExpr,
    pub movement_steps: Vec<MovementStep>,
    /// The whole plan as one expression over base tables.
    pub full_expr: AlgebraExpr,
}

impl CandidatePlan {
    /// Transfers from relational to graph engine.
    pub fn to_graph_batches(&self) -> usize {
        self.movement_steps
            .iter()
            .filter(|s| s.direction == MovementDirection::RelationalToGraph)
            .count()
    }

    pub fn to_relational_batches(&self) -> usize {
        self.movement_steps
            .iter()
            .filter(|s| s.direction == MovementDirection::GraphToRelational)
            .count()
    }

    /// Human-readable listing of the plan's stages.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let moved: Vec<&str> = self.movement.iter().map(String::as_str).collect();
        out.push_str(&format!("movement: {{{}}}\n", moved.join(", ")));
        for (name, e) in &self.step1_prequeries {
            out.push_str(&format!("  prequery {name} := {}\n", to_sexpr(e)));
        }
        for x in &self.vertex_exports {
            out.push_str(&format!("  export {} := {}\n", export_relation(&x.unit), to_sexpr(&x.graph_query)));
            out.push_str(&format!("  join {} := {}\n", moved_relation(&x.unit), to_sexpr(&x.join)));
        }
        out.push_str(&format!("  graph := {}\n", to_sexpr(&self.graph_query)));
        out.push_str(&format!("  final := {}\n", to_sexpr(&self.final_relational)));
        for s in &self.movement_steps {
            out.push_str(&format!("  move {}: {}\n", s.direction, s.relations.join(", ")));
        }
        out
    }
}

/// Stored tables plus materialized intermediate relations.
pub struct PlanSchemas<'a> {
    pub catalog: &'a Catalog,
    pub extra: BTreeMap<String, Vec<String>>,
}

impl<'a> PlanSchemas<'a> {
    pub fn for_query(q: &CmgrjQuery, catalog: &'a Catalog) -> Result<PlanSchemas<'a>> {
        let mut extra = BTreeMap::new();
        for u in &q.units {
            let cols = schema_of(&u.expr, catalog)?.into_iter().map(|a| a.name).collect();
            extra.insert(unit_relation(&u.name), cols);
        }
        Ok(PlanSchemas { catalog, extra })
    }
}

impl TableSchemas for PlanSchemas<'_> {
    fn table_columns(&self, name: &str) -> Option<Vec<String>> {
        self.extra
            .get(name)
            .cloned()
            .or_else(|| TableSchemas::table_columns(self.catalog, name))
    }
}

/// The raw expression with each unit replaced by its materialized relation.
fn materialized_expr(q: &CmgrjQuery) -> Result<(CmgrjParts, AlgebraExpr)> {
    let mut parts = q.parts()?;
    for u in &mut parts.units {
        u.expr = AlgebraExpr::base(unit_relation(&u.name));
    }
    let units: Vec<&JoinUnit> = parts.units.iter().collect();
    let graph = parts.pattern.clone().graph_project(parts.graph_items.clone());
    let e = parts.assemble(graph, &units);
    Ok((parts, e))
}

fn final_relational(parts: &CmgrjParts, remaining: &[&JoinUnit]) -> AlgebraExpr {
    let mut e = AlgebraExpr::base(GRAPH_RESULT);
    for u in remaining {
        e = e.rel_join(u.expr.clone(), u.on.clone());
    }
    e = e.rel_select(parts.residual.clone());
    if let Some(cols) = &parts.projection {
        e = e.rel_project(cols.clone());
    }
    e
}

fn graph_side(rewritten: &AlgebraExpr) -> Result<AlgebraExpr> {
    let p = CmgrjParts::decompose(rewritten)?;
    Ok(p.pattern.graph_project(p.graph_items))
}

fn prequeries(q: &CmgrjQuery) -> Vec<(String, AlgebraExpr)> {
    q.units.iter().map(|u| (unit_relation(&u.name), u.expr.clone())).collect()
}

/// The plan that joins the units in `movement` graph-side and the rest
/// relationally after one graph-to-relational transfer.
pub fn translate(q: &CmgrjQuery, movement: &BTreeSet<String>, cat: &Catalog) -> Result<CandidatePlan> {
    for m in movement {
        if q.unit(m).is_none() {
            return Err(Error::NotJoinable(m.clone()));
        }
    }
    let schemas = PlanSchemas::for_query(q, cat)?;
    let (parts, materialized) = materialized_expr(q)?;
    let rewritten = rewrite_equivalents(&materialized, movement, &schemas)?;
    let remaining: Vec<&JoinUnit> = parts.units.iter().filter(|u| !movement.contains(&u.name)).collect();
    let mut movement_steps = Vec::new();
    if !movement.is_empty() {
        movement_steps.push(MovementStep {
            direction: MovementDirection::RelationalToGraph,
            relations: movement.iter().map(|m| unit_relation(m)).collect(),
        });
    }
    movement_steps.push(MovementStep {
        direction: MovementDirection::GraphToRelational,
        relations: vec![GRAPH_RESULT.to_string()],
    });
    Ok(CandidatePlan {
        movement: movement.clone(),
        step1_prequeries: prequeries(q),
        vertex_exports: Vec::new(),
        graph_query: graph_side(&rewritten)?,
        final_relational: final_relational(&parts, &remaining),
        movement_steps,
        full_expr: rewrite_equivalents(&q.raw_expr, movement, cat)?,
    })
}

/// Replace export sub-expressions under relation-graph joins by the
/// relation they materialize into.
fn replace_exports(e: &AlgebraExpr, exports: &mut Vec<VertexExport>) -> AlgebraExpr {
    match e {
        AlgebraExpr::RgJoin {
            table,
            graph,
            on,
            temp_label,
        } => {
            let graph = Box::new(replace_exports(graph, exports));
            if let AlgebraExpr::GrJoin {
                graph: export,
                table: Some(unit),
                on: export_on,
            } = &**table
            {
                let name = match &**unit {
                    AlgebraExpr::BaseRelation { name, .. } => {
                        name.strip_prefix("__unit_").unwrap_or(name).to_string()
                    }
                    other => other.base_tables().into_iter().next().unwrap_or_default(),
                };
                let join = AlgebraExpr::base(export_relation(&name)).rel_join((**unit).clone(), export_on.clone());
                exports.push(VertexExport {
                    unit: name.clone(),
                    graph_query: (**export).clone(),
                    join,
                });
                return AlgebraExpr::RgJoin {
                    table: Box::new(AlgebraExpr::base(moved_relation(&name))),
                    graph,
                    on: on.clone(),
                    temp_label: temp_label.clone(),
                };
            }
            AlgebraExpr::RgJoin {
                table: table.clone(),
                graph,
                on: on.clone(),
                temp_label: temp_label.clone(),
            }
        }
        AlgebraExpr::GraphProject { input, items } => AlgebraExpr::GraphProject {
            input: Box::new(replace_exports(input, exports)),
            items: items.clone(),
        },
        AlgebraExpr::GraphSelect { input, pred } => AlgebraExpr::GraphSelect {
            input: Box::new(replace_exports(input, exports)),
            pred: pred.clone(),
        },
        other => other.clone(),
    }
}

/// The pruned alternative that ships `label` vertices to the relational
/// engine, joins them with every unit keyed on that label, and ships the
/// result back for matching by vertex id.
pub fn translate_vertex_movement(q: &CmgrjQuery, label: &str, cat: &Catalog) -> Result<CandidatePlan> {
    let schemas = PlanSchemas::for_query(q, cat)?;
    let (parts, materialized) = materialized_expr(q)?;
    let rewritten = rewrite_vertex_movement(&materialized, label, &schemas)?;
    let mut exports = Vec::new();
    let graph_query = replace_exports(&graph_side(&rewritten)?, &mut exports);
    exports.reverse();
    let movement: BTreeSet<String> = exports.iter().map(|x| x.unit.clone()).collect();
    let remaining: Vec<&JoinUnit> = parts.units.iter().filter(|u| !movement.contains(&u.name)).collect();
    let movement_steps = vec![
        MovementStep {
            direction: MovementDirection::GraphToRelational,
            relations: exports.iter().map(|x| export_relation(&x.unit)).collect(),
        },
        MovementStep {
            direction: MovementDirection::RelationalToGraph,
            relations: exports.iter().map(|x| moved_relation(&x.unit)).collect(),
        },
        MovementStep {
            direction: MovementDirection::GraphToRelational,
            relations: vec![GRAPH_RESULT.to_string()],
        },
    ];
    Ok(CandidatePlan {
        movement,
        step1_prequeries: prequeries(q),
        vertex_exports: exports,
        graph_query,
        final_relational: final_relational(&parts, &remaining),
        movement_steps,
        full_expr: rewrite_vertex_movement(&q.raw_expr, label, cat)?,
    })
}
