//! Core data containers: property graph, relations, graph relations and
//! catalog statistics.

mod catalog;
mod graph;
mod io;
mod relation;
mod value;

pub use catalog::{Catalog, EdgeStats, JoinablePair};
pub use graph::{Direction, EdgeId, PropertyGraph, VertexId};
pub use io::{
    load_dataset, save_dataset, Dataset, EdgeTypeSpec, JoinablePairSpec, Manifest, TableSpec, VertexLabelSpec,
    MANIFEST_FILE,
};
pub use relation::{row_bytes, Attr, AttrKind, Cell, Column, GraphRelation, Relation};
pub use value::{JoinKey, Value, ValueKind, LIST_SEPARATOR};
