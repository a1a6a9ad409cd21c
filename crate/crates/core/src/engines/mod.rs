//! Embedded graph and relational executors and the data-movement simulator.

mod cost;
mod graph;
mod pipeline;
mod relational;

use std::time::Instant;

/// Wall-clock instant after which execution fails with a timeout.
pub type Deadline = Option<Instant>;

pub use cost::{transfer_cost, transfer_cost_bytes, CostMode, CostModelConfig, SyntheticCosts};
pub use graph::{execute_graph, plan_graph_query, Execution, GraphOp, GraphPhysicalPlan, GraphPlanNode};
pub use pipeline::{estimate_graph_plan, estimated_sizes, execute_plan, probe_plan, LatencyBreakdown, PlanExecution};
pub use relational::{execute_relational, plan_relational, RelOp, RelPhysicalPlan, RelPlanNode, RelationalStats};
