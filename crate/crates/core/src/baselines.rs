//! Rule-based and regression-based plan selection over the same plan space.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cmlero::{rank_and_select, ModelWeights, TrainConfig};
use crate::engines::GraphPhysicalPlan;
use crate::error::{Error, Result};
use crate::explorer::PlanSpace;
use crate::featurizer::PlanFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Units with fewer estimated rows than this move graph-side.
    pub ts_threshold: f64,
    pub rlm: TrainConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            ts_threshold: 5000.0,
            rlm: TrainConfig::default(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ts_threshold > 0.0) {
            return Err(Error::Config("ts_threshold must be positive".into()));
        }
        Ok(())
    }
}

fn index_of(space: &PlanSpace, movement: &BTreeSet<String>) -> usize {
    space.index_of(movement).expect("every subset of the joinable units is a candidate")
}

/// Moves every unit whose estimated size is below `t`.
pub fn select_ts(space: &PlanSpace, t: f64) -> usize {
    let movement = space
        .query
        .units
        .iter()
        .filter(|u| u.estimated_rows < t)
        .map(|u| u.name.clone())
        .collect();
    index_of(space, &movement)
}

/// Moves every unit joined on a variable whose label is scanned by a leaf
/// of the estimated graph plan.
pub fn select_fvn(space: &PlanSpace, estimated: &GraphPhysicalPlan) -> Result<usize> {
    let scanned = estimated.scan_labels();
    let parts = space.query.parts()?;
    let mut movement = BTreeSet::new();
    for u in &parts.units {
        let keys = parts.rg_keys(u)?;
        let hit = keys
            .iter()
            .filter_map(|k| space.query.var_labels.get(&k.var))
            .any(|l| scanned.contains(l));
        if hit {
            movement.insert(u.name.clone());
        }
    }
    Ok(index_of(space, &movement))
}

/// Plan with the lowest predicted latency under regression weights.
pub fn select_rlm(features: &[PlanFeatures], w: &ModelWeights) -> Result<usize> {
    rank_and_select(features, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::enumerate_candidates;
    use crate::featurizer::raw_graph_plan;
    use crate::fixtures::{motivating_dataset, motivating_query_file};
    use crate::frontend::parse_query_file;

    #[test]
    fn motivating_baselines() {
        let ds = motivating_dataset();
        let q = parse_query_file(&motivating_query_file(), &ds.catalog).unwrap();
        let space = enumerate_candidates(&q, &ds.catalog).unwrap();
        assert_eq!(select_ts(&space, 1e-9), 0);
        assert_eq!(space.candidates[select_ts(&space, 1e9)].movement.len(), 2);
        let est = raw_graph_plan(&q, space.raw(), &ds.catalog).unwrap();
        let fvn = select_fvn(&space, &est).unwrap();
        let scanned = est.scan_labels();
        for u in &space.candidates[fvn].movement {
            let label = if u == "P" { "Post" } else { "University" };
            assert!(scanned.contains(label));
        }
    }
}
