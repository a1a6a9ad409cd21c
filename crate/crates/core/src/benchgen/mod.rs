//! Semi-synthetic social-network datasets: a labelled graph plus one
//! relational table per label whose id join with the graph yields a fixed
//! number of matches, and templated cross-model workloads over them.

mod workload;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    save_dataset, Column, Dataset, EdgeTypeSpec, JoinablePairSpec, Manifest, PropertyGraph, Relation, TableSpec, Value,
    ValueKind, VertexId, VertexLabelSpec,
};
use crate::error::{Error, Result};

pub use workload::{generate_workload, load_workload, write_workload, Split, Workload, WorkloadConfig, WorkloadQuery};

/// Node and table ids of label `i` live in `[(i+1)·ID_STRIDE, (i+2)·ID_STRIDE)`.
pub const ID_STRIDE: i64 = 1_000_000_000;
/// `attr` values are drawn from `0..ATTR_RANGE`.
pub const ATTR_RANGE: i64 = 100;
/// `score` values are drawn from `0..SCORE_RANGE`.
pub const SCORE_RANGE: i64 = 1000;
/// Number of distinct `grp` values.
pub const GROUPS: usize = 8;
/// Number of distinct `region` values of the group dimension table.
pub const REGIONS: usize = 4;
/// Dimension table keyed by `grp`.
pub const GROUP_TABLE: &str = "grp_info";

pub fn group_value(k: usize) -> String {
    format!("g{k}")
}

pub fn region_value(k: usize) -> String {
    format!("r{k}")
}

/// Relational table generated for `label`.
pub fn table_name(label: &str) -> String {
    label.to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeDistribution {
    /// Targets chosen uniformly.
    Uniform,
    /// Targets chosen with Zipf-skewed popularity.
    Zipf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableGen {
    /// S_l.
    pub rows: u64,
    /// TR_l: fraction of label vertices with a matching row.
    pub true_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelGen {
    pub label: String,
    /// N_l.
    pub nodes: u64,
    #[serde(default)]
    pub table: Option<TableGen>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeGen {
    pub edge_type: String,
    pub source: String,
    pub target: String,
    pub mean_degree: f64,
    pub distribution: DegreeDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub name: String,
    pub labels: Vec<LabelGen>,
    pub edges: Vec<EdgeGen>,
    #[serde(default = "default_zipf")]
    pub zipf_exponent: f64,
    pub seed: u64,
}

fn default_zipf() -> f64 {
    1.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleFactor {
    Sf1,
    Sf10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableProfile {
    T1,
    T2,
}

const LDBC_LABELS: [&str; 10] = [
    "Tag", "TagClass", "Comment", "Forum", "Person", "Post", "Country", "City", "Company", "University",
];
const SF1_NODES: [u64; 10] = [16_080, 71, 1_739_438, 100_827, 10_295, 1_121_226, 111, 1_343, 1_575, 6_380];
const SF10_NODES: [u64; 10] = [16_080, 71, 18_196_074, 667_545, 68_673, 8_273_491, 111, 1_343, 1_575, 6_380];
const T1_TABLES: [(u64, f64); 10] = [
    (50_000, 0.5),
    (1_000, 0.8),
    (1_000_000, 0.001),
    (500_000, 0.05),
    (50_000, 0.3),
    (1_000_000, 0.001),
    (5_000, 0.8),
    (5_000, 0.8),
    (10_000, 0.8),
    (10_000, 0.8),
];
const T2_TABLES: [(u64, f64); 10] = [
    (100_000, 0.1),
    (1_000, 0.8),
    (1_000_000, 0.0001),
    (100_000, 0.1),
    (50_000, 0.3),
    (1_000_000, 0.0001),
    (5_000, 0.5),
    (5_000, 0.5),
    (50_000, 1.0),
    (50_000, 1.0),
];

fn edge(t: &str, s: &str, d: &str, mean: f64, dist: DegreeDistribution) -> EdgeGen {
    EdgeGen {
        edge_type: t.into(),
        source: s.into(),
        target: d.into(),
        mean_degree: mean,
        distribution: dist,
    }
}

fn ldbc_edges() -> Vec<EdgeGen> {
    use DegreeDistribution::*;
    vec![
        edge("CONTAINER_OF", "Forum", "Post", 11.0, Zipf),
        edge("HAS_CREATOR", "Post", "Person", 1.0, Zipf),
        edge("COMMENT_HAS_CREATOR", "Comment", "Person", 1.0, Zipf),
        edge("REPLY_OF", "Comment", "Post", 1.0, Zipf),
        edge("HAS_TAG", "Post", "Tag", 2.0, Zipf),
        edge("HAS_MEMBER", "Forum", "Person", 3.0, Uniform),
        edge("KNOWS", "Person", "Person", 4.0, Uniform),
        edge("HAS_INTEREST", "Person", "Tag", 3.0, Uniform),
        edge("STUDY_AT", "Person", "University", 1.0, Uniform),
        edge("WORK_AT", "Person", "Company", 1.0, Uniform),
        edge("IS_LOCATED_IN", "Person", "City", 1.0, Uniform),
        edge("IS_PART_OF", "City", "Country", 1.0, Uniform),
        edge("HAS_TYPE", "Tag", "TagClass", 1.0, Uniform),
    ]
}

fn scaled(x: u64, divisor: f64) -> u64 {
    ((x as f64 / divisor).round() as u64).max(1)
}

impl GenConfig {
    /// Social-network profile with node counts and table shapes divided by
    /// `divisor` (100 for desk scale, 1 for full size).
    pub fn cm_ldbc(sf: ScaleFactor, profile: TableProfile, divisor: f64, seed: u64) -> GenConfig {
        let nodes = match sf {
            ScaleFactor::Sf1 => SF1_NODES,
            ScaleFactor::Sf10 => SF10_NODES,
        };
        let tables = match profile {
            TableProfile::T1 => T1_TABLES,
            TableProfile::T2 => T2_TABLES,
        };
        let labels = LDBC_LABELS
            .iter()
            .enumerate()
            .map(|(i, l)| LabelGen {
                label: l.to_string(),
                nodes: scaled(nodes[i], divisor),
                table: Some(TableGen {
                    rows: scaled(tables[i].0, divisor),
                    true_ratio: tables[i].1,
                }),
            })
            .collect();
        GenConfig {
            name: format!("{sf:?}-{profile:?}").to_lowercase(),
            labels,
            edges: ldbc_edges(),
            zipf_exponent: default_zipf(),
            seed,
        }
    }

    /// A few hundred nodes over the same schema; fast enough for tests.
    pub fn tiny(seed: u64) -> GenConfig {
        let spec: [(u64, u64, f64); 10] = [
            (40, 60, 0.5),
            (5, 8, 0.8),
            (300, 400, 0.05),
            (30, 80, 0.3),
            (60, 90, 0.3),
            (200, 300, 0.05),
            (4, 6, 0.8),
            (12, 20, 0.8),
            (10, 15, 0.8),
            (10, 15, 0.8),
        ];
        let labels = LDBC_LABELS
            .iter()
            .zip(spec)
            .map(|(l, (n, s, tr))| LabelGen {
                label: l.to_string(),
                nodes: n,
                table: Some(TableGen { rows: s, true_ratio: tr }),
            })
            .collect();
        let mut edges = ldbc_edges();
        for e in &mut edges {
            if e.edge_type == "CONTAINER_OF" {
                e.mean_degree = 6.0;
            }
        }
        GenConfig {
            name: "tiny".into(),
            labels,
            edges,
            zipf_exponent: default_zipf(),
            seed,
        }
    }

    fn label(&self, name: &str) -> Option<&LabelGen> {
        self.labels.iter().find(|l| l.label == name)
    }

    /// Matched rows per label table: ⌊N_l·TR_l⌋, raised to 1 when the
    /// ratio is positive but the product rounds to zero.
    pub fn true_matches(&self) -> BTreeMap<String, u64> {
        self.labels
            .iter()
            .filter_map(|l| l.table.map(|t| (l.label.clone(), matches_for(l.nodes, t.true_ratio))))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for l in &self.labels {
            if !seen.insert(&l.label) {
                return Err(Error::Config(format!("label {} listed twice", l.label)));
            }
            if l.nodes as i64 >= ID_STRIDE / 2 {
                return Err(Error::Config(format!("label {} has too many nodes", l.label)));
            }
            if let Some(t) = l.table {
                if !(0.0..=1.0).contains(&t.true_ratio) {
                    return Err(Error::Config(format!("true match ratio of {} outside [0, 1]", l.label)));
                }
                let m = matches_for(l.nodes, t.true_ratio);
                if t.rows < m {
                    return Err(Error::Config(format!(
                        "table of {} has {} rows but needs {m} true matches",
                        l.label, t.rows
                    )));
                }
                if (t.rows - m) as i64 >= ID_STRIDE / 2 {
                    return Err(Error::Config(format!("table of {} too large", l.label)));
                }
            }
        }
        let mut types = std::collections::BTreeSet::new();
        for e in &self.edges {
            if !types.insert(&e.edge_type) {
                return Err(Error::Config(format!("edge type {} listed twice", e.edge_type)));
            }
            if self.label(&e.source).is_none() || self.label(&e.target).is_none() {
                return Err(Error::Config(format!("edge type {} joins an undeclared label", e.edge_type)));
            }
            if !(e.mean_degree.is_finite() && e.mean_degree >= 0.0) {
                return Err(Error::Config(format!("mean degree of {} must be nonnegative", e.edge_type)));
            }
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent > 0.0) {
            return Err(Error::Config("zipf exponent must be positive".into()));
        }
        Ok(())
    }

    pub fn manifest(&self) -> Manifest {
        use ValueKind::*;
        let node_cols = || vec![Column::new("id", Int), Column::new("attr", Int), Column::new("grp", Str)];
        let mut tables: Vec<TableSpec> = self
            .labels
            .iter()
            .filter(|l| l.table.is_some())
            .map(|l| TableSpec {
                name: table_name(&l.label),
                columns: vec![
                    Column::new("id", Int),
                    Column::new("attr", Int),
                    Column::new("grp", Str),
                    Column::new("score", Int),
                ],
            })
            .collect();
        tables.push(TableSpec {
            name: GROUP_TABLE.into(),
            columns: vec![Column::new("grp", Str), Column::new("region", Str), Column::new("weight", Int)],
        });
        Manifest {
            name: self.name.clone(),
            vertex_labels: self
                .labels
                .iter()
                .map(|l| VertexLabelSpec {
                    label: l.label.clone(),
                    properties: node_cols(),
                })
                .collect(),
            edge_types: self
                .edges
                .iter()
                .map(|e| EdgeTypeSpec {
                    edge_type: e.edge_type.clone(),
                    source: e.source.clone(),
                    target: e.target.clone(),
                    properties: vec![],
                })
                .collect(),
            tables,
            joinable_pairs: self
                .labels
                .iter()
                .filter(|l| l.table.is_some())
                .map(|l| JoinablePairSpec {
                    label: l.label.clone(),
                    property: "id".into(),
                    table: table_name(&l.label),
                    column: "id".into(),
                })
                .collect(),
        }
    }
}

fn matches_for(nodes: u64, ratio: f64) -> u64 {
    let m = (nodes as f64 * ratio).floor() as u64;
    if m == 0 && ratio > 0.0 && nodes > 0 {
        1
    } else {
        m
    }
}

fn group(rng: &mut ChaCha8Rng) -> Value {
    Value::Str(group_value(rng.random_range(0..GROUPS)))
}

/// Build the dataset in memory.
pub fn generate_dataset(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let manifest = cfg.manifest();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut g = PropertyGraph::new(
        manifest.vertex_labels.iter().map(|l| l.label.clone()),
        manifest.edge_types.iter().map(|e| e.edge_type.clone()),
    );
    for spec in &manifest.vertex_labels {
        for c in &spec.properties {
            g.declare_property(&spec.label, &c.name, c.kind);
        }
    }

    let mut vertices: BTreeMap<String, Vec<VertexId>> = BTreeMap::new();
    let mut tables = BTreeMap::new();
    for (i, l) in cfg.labels.iter().enumerate() {
        let base = (i as i64 + 1) * ID_STRIDE;
        let mut ids = Vec::with_capacity(l.nodes as usize);
        let mut rows = Vec::new();
        for k in 0..l.nodes as i64 {
            let attr = Value::Int(rng.random_range(0..ATTR_RANGE));
            let grp = group(&mut rng);
            let props = vec![
                ("id".to_string(), Value::Int(base + k)),
                ("attr".to_string(), attr.clone()),
                ("grp".to_string(), grp.clone()),
            ];
            ids.push(g.add_vertex([l.label.as_str()], props)?);
            rows.push((base + k, attr, grp));
        }
        vertices.insert(l.label.clone(), ids);

        if let Some(t) = l.table {
            let m = matches_for(l.nodes, t.true_ratio);
            if m as f64 > (l.nodes as f64 * t.true_ratio).floor() {
                log::warn!("{}: ⌊N·TR⌋ rounds to 0, keeping one true match", l.label);
            }
            let mut out = Vec::with_capacity(t.rows as usize);
            let mut picked = sample(&mut rng, l.nodes as usize, m as usize).into_vec();
            picked.sort_unstable();
            for k in picked {
                let (id, attr, grp) = &rows[k];
                out.push(vec![
                    Value::Int(*id),
                    attr.clone(),
                    grp.clone(),
                    Value::Int(rng.random_range(0..SCORE_RANGE)),
                ]);
            }
            for k in 0..(t.rows - m) as i64 {
                out.push(vec![
                    Value::Int(base + l.nodes as i64 + k),
                    Value::Int(rng.random_range(0..ATTR_RANGE)),
                    group(&mut rng),
                    Value::Int(rng.random_range(0..SCORE_RANGE)),
                ]);
            }
            out.shuffle(&mut rng);
            let spec = manifest.tables.iter().find(|s| s.name == table_name(&l.label)).unwrap();
            tables.insert(spec.name.clone(), Relation::with_rows(spec.name.clone(), spec.columns.clone(), out)?);
        }
    }

    let dim: Vec<Vec<Value>> = (0..GROUPS)
        .map(|k| {
            vec![
                Value::Str(group_value(k)),
                Value::Str(region_value(k % REGIONS)),
                Value::Int(rng.random_range(1..100)),
            ]
        })
        .collect();
    let spec = manifest.tables.iter().find(|s| s.name == GROUP_TABLE).unwrap();
    tables.insert(GROUP_TABLE.into(), Relation::with_rows(GROUP_TABLE, spec.columns.clone(), dim)?);

    for e in &cfg.edges {
        let src = &vertices[&e.source];
        let dst = &vertices[&e.target];
        if src.is_empty() || dst.is_empty() {
            continue;
        }
        let total = (src.len() as f64 * e.mean_degree).round() as usize;
        let mut popularity: Vec<usize> = (0..dst.len()).collect();
        popularity.shuffle(&mut rng);
        let zipf = Zipf::new(dst.len() as f64, cfg.zipf_exponent)
            .map_err(|err| Error::Config(format!("zipf over {}: {err}", e.target)))?;
        for k in 0..total {
            let s = k % src.len();
            let mut d = match e.distribution {
                DegreeDistribution::Uniform => rng.random_range(0..dst.len()),
                DegreeDistribution::Zipf => popularity[zipf.sample(&mut rng) as usize - 1],
            };
            if e.source == e.target && d == s && dst.len() > 1 {
                d = (d + 1) % dst.len();
            }
            g.add_edge(src[s], dst[d], &e.edge_type, [])?;
        }
    }

    Dataset::from_parts(manifest, g, tables)
}

/// Generate and write the dataset files into `dir`.
pub fn generate_to_dir(cfg: &GenConfig, dir: impl AsRef<Path>) -> Result<Dataset> {
    let ds = generate_dataset(cfg)?;
    save_dataset(dir, &ds)?;
    Ok(ds)
}

/// Rows of `label`'s table whose id belongs to a `label` vertex, counted
/// from the dataset itself.
pub fn count_true_matches(ds: &Dataset, label: &str) -> Result<u64> {
    let table = ds
        .tables
        .get(&table_name(label))
        .ok_or_else(|| Error::UnknownTable(table_name(label)))?;
    let ids: std::collections::HashSet<i64> = ds
        .graph
        .vertices()
        .filter(|&v| ds.graph.has_label(v, label))
        .filter_map(|v| match ds.graph.vertex_property_ref(v, "id") {
            Some(Value::Int(i)) => Some(*i),
            _ => None,
        })
        .collect();
    let col = table.column_index("id").expect("generated tables carry an id column");
    Ok(table
        .rows
        .iter()
        .filter(|r| matches!(r[col], Value::Int(i) if ids.contains(&i)))
        .count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floors_and_clamps() {
        assert_eq!(matches_for(1000, 0.3), 300);
        assert_eq!(matches_for(1000, 0.0), 0);
        assert_eq!(matches_for(112, 0.001), 1);
        assert_eq!(matches_for(10, 1.0), 10);
    }

    #[test]
    fn desk_scale_person_table() {
        let cfg = GenConfig::cm_ldbc(ScaleFactor::Sf1, TableProfile::T1, 100.0, 1);
        let p = cfg.label("Person").unwrap();
        assert_eq!(p.nodes, 103);
        assert_eq!(p.table.unwrap().rows, 500);
        assert_eq!(p.table.unwrap().true_ratio, 0.3);
        assert_eq!(cfg.true_matches()["Person"], 30);
    }

    #[test]
    fn infeasible_table_rejected() {
        let mut cfg = GenConfig::tiny(0);
        cfg.labels[0].table = Some(TableGen { rows: 3, true_ratio: 1.0 });
        assert!(matches!(generate_dataset(&cfg), Err(Error::Config(_))));
        cfg.labels[0].table = Some(TableGen { rows: 300, true_ratio: 1.5 });
        assert!(matches!(generate_dataset(&cfg), Err(Error::Config(_))));
    }
}
