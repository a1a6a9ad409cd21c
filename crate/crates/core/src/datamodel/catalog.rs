use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::graph::PropertyGraph;
use super::io::Manifest;
use super::relation::{Column, Relation};
use crate::error::{Error, Result};

/// A declared entity match between a vertex property and a table column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinablePair {
    pub label: String,
    pub property: String,
    pub table: String,
    pub column: String,
    /// Table rows whose key equals the property of at least one vertex.
    #[serde(default)]
    pub matched_rows: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeStats {
    pub source: String,
    pub target: String,
    pub count: u64,
}

/// Statistics shared by the planners, the featurizer and the baselines.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub label_counts: BTreeMap<String, u64>,
    pub table_rowcounts: BTreeMap<String, u64>,
    /// label → property → distinct non-null values.
    pub property_index: BTreeMap<String, BTreeMap<String, u64>>,
    /// table → column → distinct non-null values.
    pub column_distinct: BTreeMap<String, BTreeMap<String, u64>>,
    pub edge_stats: BTreeMap<String, EdgeStats>,
    pub joinable_pairs: Vec<JoinablePair>,
    pub table_schemas: BTreeMap<String, Vec<Column>>,
    pub label_properties: BTreeMap<String, Vec<Column>>,
}

impl Catalog {
    /// Compute every statistic from the loaded data.
    pub fn analyze(manifest: &Manifest, graph: &PropertyGraph, tables: &BTreeMap<String, Relation>) -> Result<Catalog> {
        let mut cat = Catalog::default();
        for spec in &manifest.vertex_labels {
            let vs = graph.vertices_with_label(&spec.label);
            cat.label_counts.insert(spec.label.clone(), vs.len() as u64);
            let mut per_prop = BTreeMap::new();
            for col in &spec.properties {
                let distinct: HashSet<_> = vs
                    .iter()
                    .filter_map(|&v| graph.vertex_property_ref(v, &col.name))
                    .filter(|v| !v.is_null())
                    .collect();
                per_prop.insert(col.name.clone(), distinct.len() as u64);
            }
            cat.property_index.insert(spec.label.clone(), per_prop);
            cat.label_properties.insert(spec.label.clone(), spec.properties.clone());
        }
        for spec in &manifest.edge_types {
            cat.edge_stats.insert(
                spec.edge_type.clone(),
                EdgeStats {
                    source: spec.source.clone(),
                    target: spec.target.clone(),
                    count: graph.edge_label_count(&spec.edge_type) as u64,
                },
            );
        }
        for spec in &manifest.tables {
            let rel = tables
                .get(&spec.name)
                .ok_or_else(|| Error::UnknownTable(spec.name.clone()))?;
            cat.table_rowcounts.insert(spec.name.clone(), rel.len() as u64);
            let mut per_col = BTreeMap::new();
            for (i, col) in rel.schema.iter().enumerate() {
                let distinct: HashSet<_> = rel.rows.iter().map(|r| &r[i]).filter(|v| !v.is_null()).collect();
                per_col.insert(col.name.clone(), distinct.len() as u64);
            }
            cat.column_distinct.insert(spec.name.clone(), per_col);
            cat.table_schemas.insert(spec.name.clone(), rel.schema.clone());
        }
        for jp in &manifest.joinable_pairs {
            let rel = tables
                .get(&jp.table)
                .ok_or_else(|| Error::UnknownTable(jp.table.clone()))?;
            let ci = rel
                .column_index(&jp.column)
                .ok_or_else(|| Error::UnresolvedAttribute(format!("{}.{}", jp.table, jp.column)))?;
            if !manifest
                .vertex_labels
                .iter()
                .any(|l| l.label == jp.label && l.properties.iter().any(|p| p.name == jp.property))
            {
                return Err(Error::UnresolvedAttribute(format!("{}.{}", jp.label, jp.property)));
            }
            let keys: HashSet<_> = graph
                .vertices_with_label(&jp.label)
                .iter()
                .filter_map(|&v| graph.vertex_property_ref(v, &jp.property))
                .filter_map(|v| v.join_key())
                .collect();
            let matched = rel
                .rows
                .iter()
                .filter(|r| r[ci].join_key().is_some_and(|k| keys.contains(&k)))
                .count();
            cat.joinable_pairs.push(JoinablePair {
                label: jp.label.clone(),
                property: jp.property.clone(),
                table: jp.table.clone(),
                column: jp.column.clone(),
                matched_rows: matched as u64,
            });
        }
        Ok(cat)
    }

    pub fn label_count(&self, label: &str) -> u64 {
        self.label_counts.get(label).copied().unwrap_or(0)
    }

    pub fn table_rowcount(&self, table: &str) -> u64 {
        self.table_rowcounts.get(table).copied().unwrap_or(0)
    }

    pub fn property_distinct(&self, label: &str, property: &str) -> Option<u64> {
        self.property_index.get(label)?.get(property).copied()
    }

    pub fn column_distinct(&self, table: &str, column: &str) -> Option<u64> {
        self.column_distinct.get(table)?.get(column).copied()
    }

    pub fn joinable(&self, label: &str, property: &str, table: &str, column: &str) -> Option<&JoinablePair> {
        self.joinable_pairs
            .iter()
            .find(|p| p.label == label && p.property == property && p.table == table && p.column == column)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.label_counts.contains_key(label)
    }

    pub fn has_property(&self, label: &str, property: &str) -> bool {
        self.label_properties
            .get(label)
            .is_some_and(|ps| ps.iter().any(|c| c.name == property))
    }

    pub fn table_columns(&self, table: &str) -> Option<&[Column]> {
        self.table_schemas.get(table).map(Vec::as_slice)
    }

    /// Tables in a stable order; bitmap positions in the featurizer follow it.
    pub fn table_names(&self) -> Vec<String> {
        self.table_rowcounts.keys().cloned().collect()
    }

    pub fn label_names(&self) -> Vec<String> {
        self.label_counts.keys().cloned().collect()
    }

    /// Mean number of `edge_type` edges per vertex at the traversal origin.
    pub fn mean_degree(&self, edge_type: &str, from_label: &str) -> f64 {
        let Some(stats) = self.edge_stats.get(edge_type) else {
            return 1.0;
        };
        let n = self.label_count(from_label).max(1) as f64;
        stats.count as f64 / n
    }

    /// Check the counts against a brute-force recount of the data.
    pub fn verify(&self, graph: &PropertyGraph, tables: &BTreeMap<String, Relation>) -> Result<()> {
        for (label, &n) in &self.label_counts {
            let actual = graph.vertices().filter(|&v| graph.has_label(v, label)).count() as u64;
            if actual != n {
                return Err(Error::Config(format!("label {label}: catalog {n}, actual {actual}")));
            }
        }
        for (table, &n) in &self.table_rowcounts {
            let actual = tables.get(table).map(|r| r.len() as u64).unwrap_or(0);
            if actual != n {
                return Err(Error::Config(format!("table {table}: catalog {n}, actual {actual}")));
            }
        }
        Ok(())
    }
}
