//! Unified algebra over graph relations and relations, with a reference
//! evaluator, schema computation, equivalence rewrites and a text form.

mod eval;
mod expr;
mod predicate;
mod rewrite;
mod sexpr;

pub use eval::{evaluate, EvalOutput};
pub(crate) use eval::{hash_join_relations, reachable, select_relation, GraphResolver};
pub use expr::{
    schema_of, temp_label, AlgebraExpr, ExpandStep, ProjCol, ProjItem, ProjSource, RgKey, TableSchemas,
    TEMP_LABEL_PREFIX,
};
pub use predicate::{Atom, CmpOp, Operand, Predicate};
pub use rewrite::{export_vid_column, rewrite_equivalents, rewrite_vertex_movement, unit_name, CmgrjParts, JoinUnit};
pub use sexpr::{head, parse_sexpr, to_sexpr, to_sexpr_pretty};
