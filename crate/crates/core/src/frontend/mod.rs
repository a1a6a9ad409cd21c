//! Query text to algebra, and candidate plans to engine work.

mod cypher;
mod lexer;
mod query;
mod sql;
mod translate;

pub use cypher::{parse_graph_query, GraphQueryAst, HopRange, NodePattern, PathPattern, RelPattern, ReturnItem};
pub use lexer::{tokenize, Tok, Token};
pub use query::{parse_cmgrj, parse_query_file, split_query_file, CmgrjQuery, QueryUnit, GRAPH_RESULT};
pub use sql::{parse_sql, ColRef, FromItem, SelectItem, SqlCondition, SqlOperand, SqlQueryAst};
pub use translate::{
    export_relation, moved_relation, translate, translate_vertex_movement, unit_relation, CandidatePlan,
    MovementDirection, MovementStep, PlanSchemas, VertexExport,
};
