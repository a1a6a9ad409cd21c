//! End-to-end execution of a candidate plan across both engines.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, Relation};
use crate::error::{Error, Result};
use crate::frontend::{export_relation, moved_relation, unit_relation, CandidatePlan, CmgrjQuery, GRAPH_RESULT};

use super::cost::{transfer_cost_bytes, CostMode, CostModelConfig};
use super::graph::{execute_graph_within, plan_graph_query, GraphPhysicalPlan};
use super::relational::{execute_relational, plan_relational, RelPhysicalPlan, RelationalStats};

/// Seconds spent in each stage of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub prequery: f64,
    pub movement: f64,
    pub graph: f64,
    pub relational: f64,
}

impl LatencyBreakdown {
    pub fn total(&self) -> f64 {
        self.prequery + self.movement + self.graph + self.relational
    }
}

#[derive(Debug, Clone)]
pub struct PlanExecution {
    pub result: Relation,
    pub breakdown: LatencyBreakdown,
    pub moved_rows: u64,
    pub moved_bytes: u64,
    /// Rows of the graph query result.
    pub graph_rows: u64,
    pub graph_plan: GraphPhysicalPlan,
    pub relational_plan: RelPhysicalPlan,
}

impl PlanExecution {
    pub fn latency(&self) -> f64 {
        self.breakdown.total()
    }
}

/// Estimated row counts of the relations a plan materializes before its
/// graph query runs.
pub fn estimated_sizes(plan: &CandidatePlan, q: &CmgrjQuery) -> BTreeMap<String, f64> {
    let mut sizes = BTreeMap::new();
    for u in &q.units {
        sizes.insert(unit_relation(&u.name), u.estimated_rows);
        sizes.insert(moved_relation(&u.name), u.estimated_rows);
    }
    for x in &plan.vertex_exports {
        if let Some(u) = q.unit(&x.unit) {
            sizes.insert(moved_relation(&x.unit), u.estimated_rows);
        }
    }
    sizes
}

/// Graph plan of a candidate using estimated sizes for moved relations.
pub fn estimate_graph_plan(plan: &CandidatePlan, q: &CmgrjQuery, dataset: &Dataset) -> Result<GraphPhysicalPlan> {
    plan_graph_query(&plan.graph_query, &dataset.catalog, &estimated_sizes(plan, q))
}

struct Run<'a> {
    dataset: &'a Dataset,
    cfg: &'a CostModelConfig,
    deadline: Option<Instant>,
    budget: Option<f64>,
    spent: f64,
    materialized: BTreeMap<String, Relation>,
}

impl Run<'_> {
    /// Charge `latency` and fail once the budget is exhausted.
    fn charge(&mut self, latency: f64) -> Result<f64> {
        self.spent += latency;
        let over_budget = self.budget.is_some_and(|b| self.spent > b);
        if over_budget || self.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(Error::Timeout);
        }
        Ok(latency)
    }

    fn relational(&mut self, expr: &crate::algebra::AlgebraExpr, name: &str) -> Result<(RelPhysicalPlan, f64)> {
        let stats = RelationalStats {
            catalog: &self.dataset.catalog,
            materialized: &self.materialized,
        };
        let plan = plan_relational(expr, &stats)?;
        let (r, ex) = execute_relational(&plan, name, &self.dataset.tables, &self.materialized, self.cfg, self.deadline)?;
        self.materialized.insert(name.to_string(), r);
        let t = self.charge(ex.latency)?;
        Ok((plan, t))
    }

    fn graph(&mut self, expr: &crate::algebra::AlgebraExpr, name: &str) -> Result<(GraphPhysicalPlan, f64)> {
        let sizes = self
            .materialized
            .iter()
            .map(|(k, v)| (k.clone(), v.len() as f64))
            .collect();
        let plan = plan_graph_query(expr, &self.dataset.catalog, &sizes)?;
        let left = self.budget.map(|b| b - self.spent);
        let (p, ex) = execute_graph_within(&plan, &self.dataset.graph, &self.materialized, self.cfg, self.deadline, left)?;
        let r = p.materialize(name, &self.dataset.graph);
        self.materialized.insert(name.to_string(), r);
        let t = self.charge(ex.latency)?;
        Ok((plan, t))
    }
}

/// Execute every stage of `plan` and account simulated transfer time.
/// `timeout` bounds the wall clock in measured mode and the accumulated
/// synthetic latency in synthetic mode, so synthetic runs time out
/// deterministically.
pub fn execute_plan(
    plan: &CandidatePlan,
    dataset: &Dataset,
    cfg: &CostModelConfig,
    timeout: Option<f64>,
) -> Result<PlanExecution> {
    let (mut run, mut breakdown, graph_plan) = run_graph_stages(plan, dataset, cfg, timeout)?;
    let graph_rows = run.materialized[GRAPH_RESULT].len() as u64;
    let (relational_plan, t) = run.relational(&plan.final_relational, "result")?;
    breakdown.relational += t;

    let mut moved_rows = 0u64;
    let mut moved_bytes = 0u64;
    for step in &plan.movement_steps {
        let mut rows = 0u64;
        let mut bytes = 0u64;
        for name in &step.relations {
            let r = run
                .materialized
                .get(name)
                .ok_or_else(|| Error::MissingMovedTable(name.clone()))?;
            rows += r.len() as u64;
            bytes += r.byte_size() as u64;
        }
        moved_rows += rows;
        moved_bytes += bytes;
        breakdown.movement += run.charge(transfer_cost_bytes(rows, bytes, cfg))?;
    }
    let result = run.materialized.remove("result").expect("final relation is materialized");
    Ok(PlanExecution {
        result,
        breakdown,
        moved_rows,
        moved_bytes,
        graph_rows,
        graph_plan,
        relational_plan,
    })
}

fn run_graph_stages<'a>(
    plan: &CandidatePlan,
    dataset: &'a Dataset,
    cfg: &'a CostModelConfig,
    timeout: Option<f64>,
) -> Result<(Run<'a>, LatencyBreakdown, GraphPhysicalPlan)> {
    cfg.validate()?;
    let mut run = Run {
        dataset,
        cfg,
        deadline: match cfg.mode {
            CostMode::Measured => timeout.map(|t| Instant::now() + Duration::from_secs_f64(t.max(0.0))),
            CostMode::Synthetic => None,
        },
        budget: match cfg.mode {
            CostMode::Measured => None,
            CostMode::Synthetic => timeout,
        },
        spent: 0.0,
        materialized: BTreeMap::new(),
    };
    let mut breakdown = LatencyBreakdown::default();
    for (name, expr) in &plan.step1_prequeries {
        breakdown.prequery += run.relational(expr, name)?.1;
    }
    for x in &plan.vertex_exports {
        breakdown.graph += run.graph(&x.graph_query, &export_relation(&x.unit))?.1;
        breakdown.relational += run.relational(&x.join, &moved_relation(&x.unit))?.1;
    }
    let (graph_plan, t) = run.graph(&plan.graph_query, GRAPH_RESULT)?;
    breakdown.graph += t;
    Ok((run, breakdown, graph_plan))
}

/// Row count and byte size of the plan's graph query result, computed
/// without the final relational query or any transfer.
pub fn probe_plan(
    plan: &CandidatePlan,
    dataset: &Dataset,
    cfg: &CostModelConfig,
    timeout: Option<f64>,
) -> Result<(u64, u64)> {
    let (run, _, _) = run_graph_stages(plan, dataset, cfg, timeout)?;
    let r = &run.materialized[GRAPH_RESULT];
    Ok((r.len() as u64, r.byte_size() as u64))
}
