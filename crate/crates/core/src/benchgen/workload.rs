//! Templated cross-model query workloads: random schema walks for the graph
//! half, id joins to per-label tables with random filters for the
//! relational half.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{group_value, region_value, table_name, ATTR_RANGE, GROUPS, GROUP_TABLE, REGIONS, SCORE_RANGE};
use crate::datamodel::Dataset;
use crate::engines::{execute_plan, CostModelConfig};
use crate::error::{Error, Result};
use crate::frontend::{parse_query_file, translate};

/// File extension of generated query files.
pub const QUERY_EXTENSION: &str = "cmgrj";
/// Name of the train/test membership file inside the workload directory.
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub count: usize,
    pub seed: u64,
    pub min_hops: usize,
    pub max_hops: usize,
    /// Every `var_length_every`-th query carries a variable-length hop;
    /// 0 disables them.
    pub var_length_every: usize,
    pub max_tables: usize,
    /// Chance that a path vertex gets a property filter.
    pub graph_filter_prob: f64,
    /// Chance that a joined table gets a column filter.
    pub table_filter_prob: f64,
    /// Chance that a joined table is extended with the group dimension.
    pub dimension_prob: f64,
    /// Fraction of queries whose raw plan must return rows.
    pub min_nonempty_fraction: f64,
    /// Draws per query before an empty-result query is accepted anyway.
    pub max_attempts: usize,
    /// Synthetic-latency bound on the raw-plan check; costlier draws are
    /// rejected. Deterministic, unlike a wall-clock bound.
    pub max_check_cost: f64,
    pub train_fraction: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            count: 505,
            seed: 11,
            min_hops: 2,
            max_hops: 4,
            var_length_every: 8,
            max_tables: 4,
            graph_filter_prob: 0.3,
            table_filter_prob: 0.5,
            dimension_prob: 0.25,
            min_nonempty_fraction: 0.8,
            max_attempts: 30,
            max_check_cost: 0.25,
            train_fraction: 385.0 / 505.0,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_hops == 0 || self.min_hops > self.max_hops {
            return Err(Error::Config("hop range must satisfy 1 ≤ min ≤ max".into()));
        }
        if !(self.max_check_cost > 0.0) {
            return Err(Error::Config("max_check_cost must be positive".into()));
        }
        if self.max_tables == 0 {
            return Err(Error::Config("max_tables must be positive".into()));
        }
        for (name, p) in [
            ("graph_filter_prob", self.graph_filter_prob),
            ("table_filter_prob", self.table_filter_prob),
            ("dimension_prob", self.dimension_prob),
            ("min_nonempty_fraction", self.min_nonempty_fraction),
            ("train_fraction", self.train_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadQuery {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub queries: Vec<WorkloadQuery>,
    pub split: Split,
}

impl Workload {
    pub fn query(&self, id: &str) -> Option<&WorkloadQuery> {
        self.queries.iter().find(|q| q.id == id)
    }

    pub fn train(&self) -> Vec<&WorkloadQuery> {
        self.split.train.iter().filter_map(|id| self.query(id)).collect()
    }

    pub fn test(&self) -> Vec<&WorkloadQuery> {
        self.split.test.iter().filter_map(|id| self.query(id)).collect()
    }
}

#[derive(Debug, Clone)]
struct Hop {
    edge_type: String,
    forward: bool,
    max_hops: Option<usize>,
}

#[derive(Debug, Clone)]
struct Walk {
    labels: Vec<String>,
    hops: Vec<Hop>,
}

impl Walk {
    fn reversed(mut self) -> Walk {
        self.labels.reverse();
        self.hops.reverse();
        for h in &mut self.hops {
            h.forward = !h.forward;
        }
        self
    }
}

struct Schema {
    /// (type, source, target)
    edges: Vec<(String, String, String)>,
    tables: BTreeSet<String>,
}

impl Schema {
    fn from_dataset(ds: &Dataset) -> Schema {
        Schema {
            edges: ds
                .manifest
                .edge_types
                .iter()
                .map(|e| (e.edge_type.clone(), e.source.clone(), e.target.clone()))
                .collect(),
            tables: ds
                .manifest
                .joinable_pairs
                .iter()
                .filter(|p| p.property == "id" && p.column == "id")
                .map(|p| p.label.clone())
                .collect(),
        }
    }

    /// (hop, next label) pairs leaving `label` in either direction.
    fn steps(&self, label: &str) -> Vec<(Hop, String)> {
        let mut out = Vec::new();
        for (t, s, d) in &self.edges {
            if s == label {
                out.push((hop(t, true), d.clone()));
            }
            if d == label && s != d {
                out.push((hop(t, false), s.clone()));
            }
        }
        out
    }
}

fn hop(t: &str, forward: bool) -> Hop {
    Hop {
        edge_type: t.into(),
        forward,
        max_hops: None,
    }
}

fn random_walk(schema: &Schema, hops: usize, var_length: bool, rng: &mut ChaCha8Rng) -> Result<Walk> {
    let mut walk = if var_length {
        let loops: Vec<_> = schema.edges.iter().filter(|(_, s, d)| s == d).collect();
        let (t, l, _) = loops
            .choose(rng)
            .ok_or_else(|| Error::Config("variable-length template needs a self-loop edge type".into()))?;
        let mut h = hop(t, true);
        h.max_hops = Some(rng.random_range(2..=3));
        Walk {
            labels: vec![l.clone(), l.clone()],
            hops: vec![h],
        }
    } else {
        let starts: Vec<String> = schema.edges.iter().map(|(_, s, _)| s.clone()).collect();
        let l = starts
            .choose(rng)
            .ok_or_else(|| Error::Config("schema has no edge types".into()))?
            .clone();
        Walk {
            labels: vec![l],
            hops: vec![],
        }
    };
    while walk.hops.len() < hops {
        let here = walk.labels.last().unwrap().clone();
        let steps = schema.steps(&here);
        let Some((h, next)) = steps.choose(rng).cloned() else { break };
        walk.hops.push(h);
        walk.labels.push(next);
    }
    if walk.hops.is_empty() {
        return Err(Error::Config("schema admits no path".into()));
    }
    Ok(if rng.random_bool(0.5) { walk.reversed() } else { walk })
}

fn render(walk: &Walk, schema: &Schema, cfg: &WorkloadConfig, rng: &mut ChaCha8Rng) -> Option<String> {
    let var = |i: usize| format!("n{i}");
    let mut pattern = format!("({}:{})", var(0), walk.labels[0]);
    for (i, h) in walk.hops.iter().enumerate() {
        let len = h.max_hops.map(|m| format!("*1..{m}")).unwrap_or_default();
        let node = format!("({}:{})", var(i + 1), walk.labels[i + 1]);
        if h.forward {
            let _ = write!(pattern, "-[:{}{len}]->{node}", h.edge_type);
        } else {
            let _ = write!(pattern, "<-[:{}{len}]-{node}", h.edge_type);
        }
    }

    let mut graph_conds = Vec::new();
    for i in 0..walk.labels.len() {
        if rng.random_bool(cfg.graph_filter_prob) {
            graph_conds.push(if rng.random_bool(0.5) {
                format!("{}.attr < {}", var(i), rng.random_range(ATTR_RANGE / 5..ATTR_RANGE))
            } else {
                format!("{}.grp = '{}'", var(i), group_value(rng.random_range(0..GROUPS)))
            });
        }
    }

    let mut joinable: Vec<(usize, &String)> = Vec::new();
    for (i, l) in walk.labels.iter().enumerate() {
        if schema.tables.contains(l) && joinable.iter().all(|(_, m)| *m != l) {
            joinable.push((i, l));
        }
    }
    if joinable.is_empty() {
        return None;
    }
    joinable.shuffle(rng);
    let k = rng.random_range(1..=cfg.max_tables.min(joinable.len()));
    joinable.truncate(k);
    joinable.sort();

    let mut returns = Vec::new();
    let mut select = Vec::new();
    let mut from = vec!["neo4j g".to_string()];
    let mut conds = Vec::new();
    for (j, (i, label)) in joinable.iter().enumerate() {
        let t = format!("t{}", j + 1);
        returns.push(format!("{}.id AS k{}", var(*i), j + 1));
        from.push(format!("{} {t}", table_name(label)));
        conds.push(format!("g.k{} = {t}.id", j + 1));
        select.push(format!("{t}.score"));
        if rng.random_bool(cfg.table_filter_prob) {
            conds.push(if rng.random_bool(0.5) {
                format!("{t}.score < {}", rng.random_range(SCORE_RANGE / 10..SCORE_RANGE))
            } else {
                format!("{t}.grp = '{}'", group_value(rng.random_range(0..GROUPS)))
            });
        }
        if rng.random_bool(cfg.dimension_prob) {
            let d = format!("d{}", j + 1);
            from.push(format!("{GROUP_TABLE} {d}"));
            conds.push(format!("{t}.grp = {d}.grp"));
            conds.push(format!("{d}.region = '{}'", region_value(rng.random_range(0..REGIONS))));
            select.push(format!("{d}.region"));
        }
    }
    let extra = rng.random_range(0..walk.labels.len());
    returns.push(format!("{}.attr AS a{extra}", var(extra)));
    select.insert(0, format!("g.a{extra}"));

    let mut text = format!("MATCH {pattern}");
    if !graph_conds.is_empty() {
        let _ = write!(text, "\nWHERE {}", graph_conds.join(" AND "));
    }
    let _ = write!(
        text,
        "\nRETURN {};\nSELECT {}\nFROM {}\nWHERE {}\n",
        returns.join(", "),
        select.join(", "),
        from.join(", "),
        conds.join(" AND ")
    );
    Some(text)
}

/// `None` when the raw plan costs more than `budget` synthetic seconds.
fn raw_plan_nonempty(text: &str, ds: &Dataset, budget: f64) -> Result<Option<bool>> {
    let q = parse_query_file(text, &ds.catalog)?;
    let plan = translate(&q, &BTreeSet::new(), &ds.catalog)?;
    match execute_plan(&plan, ds, &CostModelConfig::synthetic(), Some(budget)) {
        Ok(run) => Ok(Some(!run.result.is_empty())),
        Err(Error::Timeout) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Draw `cfg.count` queries against `ds`. Every query parses; at least
/// `min_nonempty_fraction` of them return rows under the raw plan unless
/// the attempt budget runs out.
pub fn generate_workload(ds: &Dataset, cfg: &WorkloadConfig) -> Result<Workload> {
    cfg.validate()?;
    let schema = Schema::from_dataset(ds);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut queries = Vec::with_capacity(cfg.count);
    let mut nonempty = 0usize;
    for n in 0..cfg.count {
        let var_length = cfg.var_length_every > 0 && n % cfg.var_length_every == 0;
        let budget = cfg.max_attempts.max(1);
        let mut chosen = None;
        let mut completed = 0usize;
        for _ in 0..budget * 10 {
            let hops = rng.random_range(cfg.min_hops..=cfg.max_hops);
            let walk = random_walk(&schema, hops, var_length, &mut rng)?;
            let Some(text) = render(&walk, &schema, cfg, &mut rng) else { continue };
            let Some(ok) = raw_plan_nonempty(&text, ds, cfg.max_check_cost)? else { continue };
            completed += 1;
            let need = cfg.min_nonempty_fraction * (n + 1) as f64;
            let last = completed == budget;
            if ok || (nonempty as f64) >= need || last {
                if !ok && (nonempty as f64) < need {
                    log::warn!("query {n}: no nonempty draw within {budget} attempts");
                }
                nonempty += usize::from(ok);
                chosen = Some(text);
                break;
            }
        }
        let text = chosen.ok_or_else(|| Error::Config(format!("query {n}: no template finished within the check bound")))?;
        queries.push(WorkloadQuery {
            id: format!("q{n:04}"),
            text,
        });
    }

    let mut ids: Vec<String> = queries.iter().map(|q| q.id.clone()).collect();
    ids.shuffle(&mut rng);
    let n_train = (cfg.train_fraction * ids.len() as f64).round() as usize;
    let mut test = ids.split_off(n_train.min(ids.len()));
    ids.sort();
    test.sort();
    Ok(Workload {
        queries,
        split: Split { train: ids, test },
    })
}

/// Write `<dir>/<id>.cmgrj` per query and `<dir>/split.json`.
pub fn write_workload(dir: impl AsRef<Path>, w: &Workload) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for q in &w.queries {
        let p = dir.join(format!("{}.{QUERY_EXTENSION}", q.id));
        fs::write(&p, &q.text).map_err(|e| Error::io(&p, e))?;
    }
    let p = dir.join(SPLIT_FILE);
    fs::write(&p, serde_json::to_string_pretty(&w.split)?).map_err(|e| Error::io(&p, e))
}

/// Read a workload directory written by [`write_workload`].
pub fn load_workload(dir: impl AsRef<Path>) -> Result<Workload> {
    let dir = dir.as_ref();
    let mut texts = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(QUERY_EXTENSION) {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            texts.insert(id, fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?);
        }
    }
    let p = dir.join(SPLIT_FILE);
    let split: Split = if p.exists() {
        serde_json::from_str(&fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?
    } else {
        Split {
            train: texts.keys().cloned().collect(),
            test: vec![],
        }
    };
    for id in split.train.iter().chain(&split.test) {
        if !texts.contains_key(id) {
            return Err(Error::Config(format!("split lists unknown query {id}")));
        }
    }
    Ok(Workload {
        queries: texts.into_iter().map(|(id, text)| WorkloadQuery { id, text }).collect(),
        split,
    })
}
