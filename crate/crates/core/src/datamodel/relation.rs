use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::{EdgeId, PropertyGraph, VertexId};
use super::value::{Value, ValueKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ValueKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ValueKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

/// A named bag of tuples over atomic values.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub schema: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl Relation {
    pub fn new(name: impl Into<String>, schema: Vec<Column>) -> Self {
        Relation {
            name: name.into(),
            schema,
            rows: Vec::new(),
        }
    }

    pub fn with_rows(name: impl Into<String>, schema: Vec<Column>, rows: Vec<Vec<Value>>) -> Result<Self> {
        let mut r = Relation::new(name, schema);
        for row in rows {
            r.push(row)?;
        }
        Ok(r)
    }

    pub fn push(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.schema.len() {
            return Err(Error::ShapeMismatch(format!(
                "row of arity {} in relation `{}` of arity {}",
                row.len(),
                self.name,
                self.schema.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.schema.iter().map(|c| c.name.clone()).collect()
    }

    /// Serialized width in bytes: UTF-8 text of every value plus 8 bytes of
    /// framing per cell.
    pub fn byte_size(&self) -> usize {
        self.rows.iter().map(|r| row_bytes(r)).sum()
    }

    /// Canonical bag form: columns sorted by name, rows sorted.
    pub fn canonical(&self) -> (Vec<String>, Vec<Vec<Value>>) {
        let mut order: Vec<usize> = (0..self.schema.len()).collect();
        order.sort_by(|&a, &b| self.schema[a].name.cmp(&self.schema[b].name));
        let names = order.iter().map(|&i| self.schema[i].name.clone()).collect();
        let mut rows: Vec<Vec<Value>> = self
            .rows
            .iter()
            .map(|r| order.iter().map(|&i| r[i].clone()).collect())
            .collect();
        rows.sort();
        (names, rows)
    }

    /// Multiset equality after canonical column ordering and row sorting.
    pub fn bag_eq(&self, other: &Relation) -> bool {
        self.canonical() == other.canonical()
    }
}

pub fn row_bytes(row: &[Value]) -> usize {
    row.iter().map(|v| v.text_width() + 8).sum()
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({} rows)", self.name, self.rows.len())?;
        writeln!(f, "{}", self.column_names().join(" | "))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(f, "{}", cells.join(" | "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttrKind {
    Vertex,
    Edge,
    Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attr {
    pub name: String,
    pub kind: AttrKind,
}

impl Attr {
    pub fn vertex(name: impl Into<String>) -> Self {
        Attr {
            name: name.into(),
            kind: AttrKind::Vertex,
        }
    }

    pub fn value(name: impl Into<String>) -> Self {
        Attr {
            name: name.into(),
            kind: AttrKind::Value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    Vertex(VertexId),
    Edge(EdgeId),
    Value(Value),
}

impl Cell {
    pub fn kind(&self) -> AttrKind {
        match self {
            Cell::Vertex(_) => AttrKind::Vertex,
            Cell::Edge(_) => AttrKind::Edge,
            Cell::Value(_) => AttrKind::Value,
        }
    }

    pub fn as_vertex(&self) -> Option<VertexId> {
        match self {
            Cell::Vertex(v) => Some(*v),
            _ => None,
        }
    }
}

/// A bag of tuples whose cells may be vertices, edges, or atomic values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphRelation {
    pub schema: Vec<Attr>,
    pub rows: Vec<Vec<Cell>>,
}

impl GraphRelation {
    pub fn new(schema: Vec<Attr>) -> Self {
        GraphRelation {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.schema.len() {
            return Err(Error::ShapeMismatch(format!(
                "graph row of arity {} for schema of arity {}",
                row.len(),
                self.schema.len()
            )));
        }
        for (cell, attr) in row.iter().zip(&self.schema) {
            if cell.kind() != attr.kind {
                return Err(Error::ShapeMismatch(format!(
                    "cell of kind {:?} in column `{}` of kind {:?}",
                    cell.kind(),
                    attr.name,
                    attr.kind
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|a| a.name == name)
    }

    pub fn attr_names(&self) -> Vec<String> {
        self.schema.iter().map(|a| a.name.clone()).collect()
    }

    /// Materialize as a relation. Vertex cells become their `id` property,
    /// edge cells become null.
    pub fn materialize(&self, name: &str, graph: &PropertyGraph) -> Relation {
        let schema = self
            .schema
            .iter()
            .map(|a| Column::new(a.name.clone(), ValueKind::Any))
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        Cell::Value(v) => v.clone(),
                        Cell::Vertex(v) => graph.vertex_property_ref(*v, "id").cloned().unwrap_or(Value::Null),
                        Cell::Edge(_) => Value::Null,
                    })
                    .collect()
            })
            .collect();
        Relation {
            name: name.to_string(),
            schema,
            rows,
        }
    }

    pub fn canonical(&self) -> (Vec<String>, Vec<Vec<Cell>>) {
        let mut order: Vec<usize> = (0..self.schema.len()).collect();
        order.sort_by(|&a, &b| self.schema[a].name.cmp(&self.schema[b].name));
        let names = order.iter().map(|&i| self.schema[i].name.clone()).collect();
        let mut rows: Vec<Vec<Cell>> = self
            .rows
            .iter()
            .map(|r| order.iter().map(|&i| r[i].clone()).collect())
            .collect();
        rows.sort();
        (names, rows)
    }

    pub fn bag_eq(&self, other: &GraphRelation) -> bool {
        self.canonical() == other.canonical()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_enforced() {
        let mut r = Relation::new("t", vec![Column::new("a", ValueKind::Int)]);
        assert!(r.push(vec![Value::Int(1)]).is_ok());
        assert!(r.push(vec![Value::Int(1), Value::Int(2)]).is_err());
    }

    #[test]
    fn bag_equality_ignores_order_but_counts_duplicates() {
        let s = vec![Column::new("a", ValueKind::Int), Column::new("b", ValueKind::Int)];
        let r1 = Relation::with_rows(
            "x",
            s.clone(),
            vec![vec![1.into(), 2.into()], vec![1.into(), 2.into()], vec![3.into(), 4.into()]],
        )
        .unwrap();
        let r2 = Relation::with_rows(
            "y",
            vec![s[1].clone(), s[0].clone()],
            vec![vec![4.into(), 3.into()], vec![2.into(), 1.into()], vec![2.into(), 1.into()]],
        )
        .unwrap();
        let r3 = Relation::with_rows("z", s, vec![vec![1.into(), 2.into()], vec![3.into(), 4.into()]]).unwrap();
        assert!(r1.bag_eq(&r2));
        assert!(!r1.bag_eq(&r3));
    }

    #[test]
    fn graph_cells_must_match_kinds() {
        let mut p = GraphRelation::new(vec![Attr::vertex("v")]);
        assert!(p.push(vec![Cell::Vertex(VertexId(0))]).is_ok());
        assert!(p.push(vec![Cell::Value(Value::Int(0))]).is_err());
    }

    #[test]
    fn byte_size_counts_framing() {
        let r = Relation::with_rows(
            "t",
            vec![Column::new("a", ValueKind::Str), Column::new("b", ValueKind::Int)],
            vec![vec!["abc".into(), 12.into()]],
        )
        .unwrap();
        assert_eq!(r.byte_size(), 3 + 8 + 2 + 8);
    }
}
