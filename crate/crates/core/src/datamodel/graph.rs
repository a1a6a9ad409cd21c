//! In-memory property graph.
//!
//! Vertices and edges are addressed by dense opaque ids assigned in insertion
//! order. Adjacency lists are kept per direction so expansions never scan the
//! full edge set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::value::{Value, ValueKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Out,
    In,
}

impl Direction {
    pub fn reverse(self) -> Direction {
        match self {
            Direction::Out => Direction::In,
            Direction::In => Direction::Out,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct VertexRecord {
    labels: Vec<String>,
    props: Vec<(String, Value)>,
}

#[derive(Debug, Clone)]
struct EdgeRecord {
    src: VertexId,
    dst: VertexId,
    labels: Vec<String>,
    props: Vec<(String, Value)>,
}

/// A labeled property graph. Each vertex carries a non-empty label set and
/// a property map; each edge has a source, a target and its own labels.
#[derive(Debug, Clone, Default)]
pub struct PropertyGraph {
    vertex_vocab: BTreeSet<String>,
    edge_vocab: BTreeSet<String>,
    property_kinds: BTreeMap<String, BTreeMap<String, ValueKind>>,
    vertices: Vec<VertexRecord>,
    edges: Vec<EdgeRecord>,
    out_adj: Vec<Vec<EdgeId>>,
    in_adj: Vec<Vec<EdgeId>>,
    by_label: BTreeMap<String, Vec<VertexId>>,
}

impl PropertyGraph {
    pub fn new<I, J, S, T>(vertex_labels: I, edge_labels: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let vertex_vocab: BTreeSet<String> = vertex_labels.into_iter().map(Into::into).collect();
        let by_label = vertex_vocab.iter().map(|l| (l.clone(), Vec::new())).collect();
        PropertyGraph {
            vertex_vocab,
            edge_vocab: edge_labels.into_iter().map(Into::into).collect(),
            by_label,
            ..Default::default()
        }
    }

    pub fn vertex_labels(&self) -> &BTreeSet<String> {
        &self.vertex_vocab
    }

    pub fn edge_labels(&self) -> &BTreeSet<String> {
        &self.edge_vocab
    }

    pub fn declare_property(&mut self, label: &str, property: &str, kind: ValueKind) {
        self.property_kinds
            .entry(label.to_string())
            .or_default()
            .insert(property.to_string(), kind);
    }

    pub fn property_kind(&self, label: &str, property: &str) -> Option<ValueKind> {
        self.property_kinds.get(label)?.get(property).copied()
    }

    pub fn add_vertex<S: Into<String>>(
        &mut self,
        labels: impl IntoIterator<Item = S>,
        props: impl IntoIterator<Item = (String, Value)>,
    ) -> Result<VertexId> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::UnknownLabel("<empty label set>".into()));
        }
        for l in &labels {
            if !self.vertex_vocab.contains(l) {
                return Err(Error::UnknownLabel(l.clone()));
            }
        }
        let id = VertexId(self.vertices.len() as u64);
        for l in &labels {
            self.by_label.get_mut(l).expect("vocab checked").push(id);
        }
        let mut props: Vec<(String, Value)> = props.into_iter().filter(|(_, v)| !v.is_null()).collect();
        props.sort_by(|a, b| a.0.cmp(&b.0));
        self.vertices.push(VertexRecord { labels, props });
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        Ok(id)
    }

    pub fn add_edge(
        &mut self,
        src: VertexId,
        dst: VertexId,
        label: &str,
        props: impl IntoIterator<Item = (String, Value)>,
    ) -> Result<EdgeId> {
        self.check_vertex(src)?;
        self.check_vertex(dst)?;
        if !self.edge_vocab.contains(label) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        let id = EdgeId(self.edges.len() as u64);
        self.edges.push(EdgeRecord {
            src,
            dst,
            labels: vec![label.to_string()],
            props: props.into_iter().collect(),
        });
        self.out_adj[src.0 as usize].push(id);
        self.in_adj[dst.0 as usize].push(id);
        Ok(id)
    }

    pub fn set_vertex_property(&mut self, v: VertexId, name: &str, value: Value) -> Result<()> {
        self.check_vertex(v)?;
        let props = &mut self.vertices[v.0 as usize].props;
        match props.binary_search_by(|(k, _)| k.as_str().cmp(name)) {
            Ok(i) if value.is_null() => {
                props.remove(i);
            }
            Ok(i) => props[i].1 = value,
            Err(_) if value.is_null() => {}
            Err(i) => props.insert(i, (name.to_string(), value)),
        }
        Ok(())
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if (v.0 as usize) < self.vertices.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v.0))
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertices.len() as u64).map(VertexId)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len() as u64).map(EdgeId)
    }

    /// Property value of `v`, or `Value::Null` when unset.
    pub fn vertex_property(&self, v: VertexId, name: &str) -> Result<Value> {
        let rec = self
            .vertices
            .get(v.0 as usize)
            .ok_or(Error::UnknownVertex(v.0))?;
        Ok(lookup(&rec.props, name).cloned().unwrap_or(Value::Null))
    }

    /// Borrowing variant of [`vertex_property`](Self::vertex_property) for hot loops.
    pub fn vertex_property_ref(&self, v: VertexId, name: &str) -> Option<&Value> {
        lookup(&self.vertices.get(v.0 as usize)?.props, name)
    }

    pub fn vertex_properties(&self, v: VertexId) -> &[(String, Value)] {
        &self.vertices[v.0 as usize].props
    }

    pub fn edge_property(&self, e: EdgeId, name: &str) -> Result<Value> {
        let rec = self.edges.get(e.0 as usize).ok_or(Error::UnknownEdge(e.0))?;
        Ok(rec
            .props
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.clone())
            .unwrap_or(Value::Null))
    }

    pub fn edge_properties(&self, e: EdgeId) -> &[(String, Value)] {
        &self.edges[e.0 as usize].props
    }

    pub fn labels_of(&self, v: VertexId) -> &[String] {
        &self.vertices[v.0 as usize].labels
    }

    pub fn has_label(&self, v: VertexId, label: &str) -> bool {
        self.vertices[v.0 as usize].labels.iter().any(|l| l == label)
    }

    pub fn edge_labels_of(&self, e: EdgeId) -> &[String] {
        &self.edges[e.0 as usize].labels
    }

    pub fn edge_has_label(&self, e: EdgeId, label: &str) -> bool {
        self.edges[e.0 as usize].labels.iter().any(|l| l == label)
    }

    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        let rec = &self.edges[e.0 as usize];
        (rec.src, rec.dst)
    }

    pub fn vertices_with_label(&self, label: &str) -> &[VertexId] {
        self.by_label.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Edges incident to `v` in direction `dir` (out: `v` is the source).
    pub fn incident(&self, v: VertexId, dir: Direction) -> &[EdgeId] {
        match dir {
            Direction::Out => &self.out_adj[v.0 as usize],
            Direction::In => &self.in_adj[v.0 as usize],
        }
    }

    /// The endpoint of `e` opposite to the traversal origin.
    pub fn far_end(&self, e: EdgeId, dir: Direction) -> VertexId {
        let rec = &self.edges[e.0 as usize];
        match dir {
            Direction::Out => rec.dst,
            Direction::In => rec.src,
        }
    }

    /// Count of edges carrying `label`.
    pub fn edge_label_count(&self, label: &str) -> usize {
        self.edges.iter().filter(|e| e.labels.iter().any(|l| l == label)).count()
    }
}

fn lookup<'a>(props: &'a [(String, Value)], name: &str) -> Option<&'a Value> {
    props
        .binary_search_by(|(k, _)| k.as_str().cmp(name))
        .ok()
        .map(|i| &props[i].1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (PropertyGraph, VertexId, VertexId) {
        let mut g = PropertyGraph::new(["Person", "City"], ["LIVES_IN"]);
        let a = g
            .add_vertex(["Person"], [("name".to_string(), Value::from("A"))])
            .unwrap();
        let c = g.add_vertex(["City"], []).unwrap();
        g.add_edge(a, c, "LIVES_IN", []).unwrap();
        (g, a, c)
    }

    #[test]
    fn property_round_trip() {
        let (mut g, a, c) = tiny();
        assert_eq!(g.vertex_property(a, "name").unwrap(), Value::from("A"));
        assert!(g.vertex_property(c, "name").unwrap().is_null());
        g.set_vertex_property(c, "name", Value::from("Paris")).unwrap();
        assert_eq!(g.vertex_property(c, "name").unwrap(), Value::from("Paris"));
    }

    #[test]
    fn unknown_vertex() {
        let (g, _, _) = tiny();
        assert!(matches!(
            g.vertex_property(VertexId(99), "name"),
            Err(Error::UnknownVertex(99))
        ));
    }

    #[test]
    fn adjacency() {
        let (g, a, c) = tiny();
        let e = g.incident(a, Direction::Out)[0];
        assert_eq!(g.far_end(e, Direction::Out), c);
        assert_eq!(g.incident(c, Direction::In), &[e]);
        assert_eq!(g.endpoints(e), (a, c));
    }

    #[test]
    fn unregistered_labels_rejected() {
        let (mut g, a, c) = tiny();
        assert!(g.add_vertex(["Robot"], []).is_err());
        assert!(g.add_edge(a, c, "FLIES_TO", []).is_err());
        assert!(g.add_edge(a, VertexId(7), "LIVES_IN", []).is_err());
    }
}
