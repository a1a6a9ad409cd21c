use std::collections::BTreeSet;

use cmgrj::baselines::{select_fvn, select_ts, BaselineConfig};
use cmgrj::explorer::{enumerate_candidates, PlanSpace};
use cmgrj::featurizer::raw_graph_plan;
use cmgrj::fixtures::{motivating_dataset, motivating_query_file};
use cmgrj::frontend::parse_query_file;
use proptest::prelude::*;

fn motivating_space() -> (PlanSpace, cmgrj::engines::GraphPhysicalPlan) {
    let ds = motivating_dataset();
    let q = parse_query_file(&motivating_query_file(), &ds.catalog).unwrap();
    let space = enumerate_candidates(&q, &ds.catalog).unwrap();
    let est = raw_graph_plan(&q, space.raw(), &ds.catalog).unwrap();
    (space, est)
}

fn with_sizes(sizes: [f64; 2]) -> PlanSpace {
    let (mut space, _) = motivating_space();
    for (u, s) in space.query.units.iter_mut().zip(sizes) {
        u.estimated_rows = s;
    }
    space
}

fn moved(space: &PlanSpace, i: usize) -> BTreeSet<String> {
    space.candidates[i].movement.clone()
}

#[test]
fn ts_moves_only_the_small_table() {
    let space = with_sizes([1000.0, 10_000.0]);
    let small = space.query.units[0].name.clone();
    assert_eq!(moved(&space, select_ts(&space, 5000.0)), BTreeSet::from([small]));
}

#[test]
fn ts_all_large_is_raw() {
    let space = with_sizes([1000.0, 10_000.0]);
    assert_eq!(select_ts(&space, 1000.0), 0);
    assert!(moved(&space, 0).is_empty());
}

#[test]
fn ts_threshold_must_be_positive() {
    let cfg = BaselineConfig {
        ts_threshold: 0.0,
        ..Default::default()
    };
    assert!(cfg.validate().is_err());
    assert!(BaselineConfig::default().validate().is_ok());
}

#[test]
fn fvn_motivating_anchor_moves_nothing() {
    let (space, est) = motivating_space();
    assert_eq!(est.scan_labels(), BTreeSet::from(["Forum".to_string()]));
    assert_eq!(select_fvn(&space, &est).unwrap(), 0);
}

proptest! {
    #[test]
    fn ts_monotone_in_threshold(a in 1.0f64..20_000.0, b in 1.0f64..20_000.0, t1 in 1.0f64..30_000.0, dt in 0.0f64..30_000.0) {
        let space = with_sizes([a, b]);
        let lo = moved(&space, select_ts(&space, t1));
        let hi = moved(&space, select_ts(&space, t1 + dt));
        prop_assert!(lo.is_subset(&hi));
        prop_assert!(select_ts(&space, t1) < space.len());
    }
}
