//! Flat-file dataset layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/nodes_<Label>.csv   id, then properties
//! <dir>/edges_<Type>.csv    src, dst, then properties
//! <dir>/table_<name>.csv
//! ```
//!
//! Every file is UTF-8 with a header row. Empty cells are null.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::catalog::Catalog;
use super::graph::{PropertyGraph, VertexId};
use super::relation::{Column, Relation};
use super::value::{Value, ValueKind};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexLabelSpec {
    pub label: String,
    /// First entry must be the `id` column.
    pub properties: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTypeSpec {
    #[serde(rename = "type")]
    pub edge_type: String,
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub properties: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub name: String,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinablePairSpec {
    pub label: String,
    pub property: String,
    pub table: String,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub vertex_labels: Vec<VertexLabelSpec>,
    pub edge_types: Vec<EdgeTypeSpec>,
    pub tables: Vec<TableSpec>,
    pub joinable_pairs: Vec<JoinablePairSpec>,
}

impl Manifest {
    pub fn vertex_label(&self, label: &str) -> Option<&VertexLabelSpec> {
        self.vertex_labels.iter().find(|l| l.label == label)
    }
}

/// A loaded dataset: graph, relations, and the derived catalog.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub graph: PropertyGraph,
    pub tables: BTreeMap<String, Relation>,
    pub catalog: Catalog,
}

impl Dataset {
    /// Assemble a dataset from in-memory parts, computing the catalog.
    pub fn from_parts(manifest: Manifest, graph: PropertyGraph, tables: BTreeMap<String, Relation>) -> Result<Self> {
        let catalog = Catalog::analyze(&manifest, &graph, &tables)?;
        Ok(Dataset {
            manifest,
            graph,
            tables,
            catalog,
        })
    }
}

/// Load a dataset directory given the path to its manifest (or the directory).
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let (dir, manifest_file) = if manifest_path.is_dir() {
        (manifest_path.to_path_buf(), manifest_path.join(MANIFEST_FILE))
    } else {
        (
            manifest_path.parent().map(Path::to_path_buf).unwrap_or_default(),
            manifest_path.to_path_buf(),
        )
    };
    let text = fs::read_to_string(&manifest_file).map_err(|e| Error::io(&manifest_file, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::load(&manifest_file, e.line(), e.to_string()))?;

    let mut graph = PropertyGraph::new(
        manifest.vertex_labels.iter().map(|l| l.label.clone()),
        manifest.edge_types.iter().map(|e| e.edge_type.clone()),
    );
    let mut ext_ids: HashMap<String, HashMap<Value, VertexId>> = HashMap::new();

    for spec in &manifest.vertex_labels {
        let file = dir.join(format!("nodes_{}.csv", spec.label));
        if spec.properties.first().map(|c| c.name.as_str()) != Some("id") {
            return Err(Error::load(&manifest_file, 0, format!("label {} must declare `id` first", spec.label)));
        }
        for c in &spec.properties {
            graph.declare_property(&spec.label, &c.name, c.kind);
        }
        let ids = ext_ids.entry(spec.label.clone()).or_default();
        for (line, values) in read_rows(&file, &spec.properties)? {
            let id = values[0].clone();
            if id.is_null() {
                return Err(Error::load(&file, line, "vertex id is empty"));
            }
            let props = spec
                .properties
                .iter()
                .zip(values)
                .map(|(c, v)| (c.name.clone(), v));
            let v = graph.add_vertex([spec.label.clone()], props)?;
            if ids.insert(id.clone(), v).is_some() {
                return Err(Error::load(&file, line, format!("duplicate vertex id {id}")));
            }
        }
    }

    for spec in &manifest.edge_types {
        let file = dir.join(format!("edges_{}.csv", spec.edge_type));
        let src_kind = id_kind(&manifest, &spec.source, &manifest_file)?;
        let dst_kind = id_kind(&manifest, &spec.target, &manifest_file)?;
        let mut columns = vec![Column::new("src", src_kind), Column::new("dst", dst_kind)];
        columns.extend(spec.properties.iter().cloned());
        let empty = HashMap::new();
        let src_ids = ext_ids.get(&spec.source).unwrap_or(&empty);
        let dst_ids = ext_ids.get(&spec.target).unwrap_or(&empty);
        for (line, mut values) in read_rows(&file, &columns)? {
            let props: Vec<(String, Value)> = spec
                .properties
                .iter()
                .map(|c| c.name.clone())
                .zip(values.drain(2..))
                .collect();
            let src = *src_ids
                .get(&values[0])
                .ok_or_else(|| Error::load(&file, line, format!("dangling source {} ({})", values[0], spec.source)))?;
            let dst = *dst_ids
                .get(&values[1])
                .ok_or_else(|| Error::load(&file, line, format!("dangling target {} ({})", values[1], spec.target)))?;
            graph.add_edge(src, dst, &spec.edge_type, props)?;
        }
    }

    let mut tables = BTreeMap::new();
    for spec in &manifest.tables {
        let file = dir.join(format!("table_{}.csv", spec.name));
        let mut rel = Relation::new(spec.name.clone(), spec.columns.clone());
        for (_, values) in read_rows(&file, &spec.columns)? {
            rel.rows.push(values);
        }
        tables.insert(spec.name.clone(), rel);
    }

    Dataset::from_parts(manifest, graph, tables)
}

fn id_kind(manifest: &Manifest, label: &str, file: &Path) -> Result<ValueKind> {
    manifest
        .vertex_label(label)
        .and_then(|l| l.properties.first())
        .map(|c| c.kind)
        .ok_or_else(|| Error::load(file, 0, format!("edge endpoint label {label} is not declared")))
}

fn read_rows(file: &Path, columns: &[Column]) -> Result<Vec<(usize, Vec<Value>)>> {
    if !file.exists() {
        return Err(Error::load(file, 0, "missing file"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(file)
        .map_err(|e| Error::load(file, 0, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::load(file, 1, e.to_string()))?
        .clone();
    let expected: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::load(
            file,
            1,
            format!("header {got:?} does not match schema {expected:?}"),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::load(file, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != columns.len() {
            return Err(Error::load(
                file,
                line,
                format!("expected {} fields, found {}", columns.len(), record.len()),
            ));
        }
        let values = record
            .iter()
            .zip(columns)
            .map(|(cell, col)| col.kind.parse_cell(cell).map_err(|m| Error::load(file, line, m)))
            .collect::<Result<Vec<_>>>()?;
        out.push((line, values));
    }
    Ok(out)
}

/// Write a dataset in the flat-file layout. Vertex and edge files follow the
/// manifest's property lists.
pub fn save_dataset(dir: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_file = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&dataset.manifest)?;
    fs::write(&manifest_file, json).map_err(|e| Error::io(&manifest_file, e))?;

    let g = &dataset.graph;
    for spec in &dataset.manifest.vertex_labels {
        let file = dir.join(format!("nodes_{}.csv", spec.label));
        let mut w = writer(&file)?;
        w.write_record(spec.properties.iter().map(|c| c.name.as_str()))?;
        for &v in g.vertices_with_label(&spec.label) {
            w.write_record(spec.properties.iter().map(|c| {
                g.vertex_property_ref(v, &c.name).map(Value::to_cell).unwrap_or_default()
            }))?;
        }
        w.flush().map_err(|e| Error::io(&file, e))?;
    }
    for spec in &dataset.manifest.edge_types {
        let file = dir.join(format!("edges_{}.csv", spec.edge_type));
        let mut w = writer(&file)?;
        let mut header = vec!["src".to_string(), "dst".to_string()];
        header.extend(spec.properties.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for e in g.edges().filter(|&e| g.edge_has_label(e, &spec.edge_type)) {
            let (s, d) = g.endpoints(e);
            let mut rec = vec![
                g.vertex_property_ref(s, "id").map(Value::to_cell).unwrap_or_default(),
                g.vertex_property_ref(d, "id").map(Value::to_cell).unwrap_or_default(),
            ];
            for c in &spec.properties {
                rec.push(g.edge_property(e, &c.name)?.to_cell());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&file, e))?;
    }
    for spec in &dataset.manifest.tables {
        let file = dir.join(format!("table_{}.csv", spec.name));
        let rel = dataset
            .tables
            .get(&spec.name)
            .ok_or_else(|| Error::UnknownTable(spec.name.clone()))?;
        let mut w = writer(&file)?;
        w.write_record(rel.schema.iter().map(|c| c.name.as_str()))?;
        for row in &rel.rows {
            w.write_record(row.iter().map(Value::to_cell))?;
        }
        w.flush().map_err(|e| Error::io(&file, e))?;
    }
    Ok(())
}

fn writer(file: &PathBuf) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(file).map_err(|e| Error::load(file, 0, e.to_string()))
}
