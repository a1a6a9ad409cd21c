//! Enumeration of the candidate plans of a query.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::frontend::{translate, translate_vertex_movement, CandidatePlan, CmgrjQuery};
use crate::datamodel::Catalog;

/// Largest number of joinable units enumerated by default.
pub const DEFAULT_MAX_UNITS: usize = 12;

#[derive(Debug, Clone)]
pub struct PlanSpace {
    pub query: CmgrjQuery,
    /// Joinable unit names, sorted.
    pub joinable: Vec<String>,
    /// One plan per subset of `joinable` in binary-counter order: bit `i`
    /// of the index moves `joinable[i]`.
    pub candidates: Vec<CandidatePlan>,
}

impl PlanSpace {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// The plan that moves nothing.
    pub fn raw(&self) -> &CandidatePlan {
        &self.candidates[0]
    }

    /// Index of the candidate moving exactly `movement`.
    pub fn index_of(&self, movement: &BTreeSet<String>) -> Option<usize> {
        self.candidates.iter().position(|c| &c.movement == movement)
    }

    /// One text block per candidate.
    pub fn dump(&self) -> String {
        self.candidates
            .iter()
            .enumerate()
            .map(|(i, c)| format!("#{i} {}", c.describe()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Size of the plan space before vertex-movement pruning: each unit is
/// joined in place, moved graph-side, or joined with exported vertices.
pub fn unpruned_space_size(n: usize) -> u64 {
    3u64.pow(n as u32)
}

/// Movement subset with index `mask` over `names`.
pub fn subset_of(names: &[String], mask: usize) -> BTreeSet<String> {
    names
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, n)| n.clone())
        .collect()
}

pub fn enumerate_candidates(q: &CmgrjQuery, cat: &Catalog) -> Result<PlanSpace> {
    enumerate_candidates_capped(q, cat, DEFAULT_MAX_UNITS)
}

pub fn enumerate_candidates_capped(q: &CmgrjQuery, cat: &Catalog, max_units: usize) -> Result<PlanSpace> {
    let joinable = q.joinable_units();
    if joinable.len() > max_units {
        return Err(Error::PlanSpaceTooLarge {
            n: joinable.len(),
            cap: max_units,
        });
    }
    let candidates = (0..1usize << joinable.len())
        .map(|mask| translate(q, &subset_of(&joinable, mask), cat))
        .collect::<Result<Vec<_>>>()?;
    Ok(PlanSpace {
        query: q.clone(),
        joinable,
        candidates,
    })
}

/// The pruned alternative that exports `label` vertices for a relational
/// entity join; outside the candidate space.
pub fn pruned_variant(q: &CmgrjQuery, label: &str, cat: &Catalog) -> Result<CandidatePlan> {
    translate_vertex_movement(q, label, cat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{motivating_dataset, motivating_query_file};
    use crate::frontend::parse_query_file;

    #[test]
    fn motivating_space() {
        let ds = motivating_dataset();
        let q = parse_query_file(&motivating_query_file(), &ds.catalog).unwrap();
        let space = enumerate_candidates(&q, &ds.catalog).unwrap();
        assert_eq!(space.len(), 4);
        assert_eq!(unpruned_space_size(space.joinable.len()), 9);
        assert!(space.raw().movement.is_empty());
        assert_eq!(space.raw().to_graph_batches(), 0);
        let capped = enumerate_candidates_capped(&q, &ds.catalog, 1);
        assert!(matches!(capped, Err(Error::PlanSpaceTooLarge { n: 2, cap: 1 })));
    }
}
