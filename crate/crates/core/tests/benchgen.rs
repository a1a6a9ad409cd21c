use std::collections::HashSet;

use cmgrj::benchgen::{
    count_true_matches, generate_dataset, generate_to_dir, generate_workload, load_workload, table_name,
    write_workload, DegreeDistribution, EdgeGen, GenConfig, LabelGen, ScaleFactor, TableGen, TableProfile,
    WorkloadConfig,
};
use cmgrj::datamodel::{load_dataset, Value};
use cmgrj::frontend::parse_query_file;

fn single_label(nodes: u64, rows: u64, ratio: f64) -> GenConfig {
    GenConfig {
        name: "one".into(),
        labels: vec![LabelGen {
            label: "Person".into(),
            nodes,
            table: Some(TableGen { rows, true_ratio: ratio }),
        }],
        edges: vec![EdgeGen {
            edge_type: "KNOWS".into(),
            source: "Person".into(),
            target: "Person".into(),
            mean_degree: 2.0,
            distribution: DegreeDistribution::Zipf,
        }],
        zipf_exponent: 1.2,
        seed: 3,
    }
}

#[test]
fn thousand_nodes_thirty_percent() {
    let ds = generate_dataset(&single_label(1000, 5000, 0.3)).unwrap();
    assert_eq!(ds.catalog.label_count("Person"), 1000);
    assert_eq!(ds.catalog.table_rowcount("person"), 5000);
    assert_eq!(count_true_matches(&ds, "Person").unwrap(), 300);
    assert_eq!(ds.graph.edge_count(), 2000);
}

#[test]
fn zero_ratio_gives_empty_join() {
    let ds = generate_dataset(&single_label(200, 50, 0.0)).unwrap();
    assert_eq!(count_true_matches(&ds, "Person").unwrap(), 0);
}

#[test]
fn tiny_ratio_clamped_to_one_match() {
    let cfg = single_label(112, 50, 0.001);
    assert_eq!(cfg.true_matches()["Person"], 1);
    let ds = generate_dataset(&cfg).unwrap();
    assert_eq!(count_true_matches(&ds, "Person").unwrap(), 1);
}

#[test]
fn every_profile_table_matches_exactly() {
    let mut cfgs = vec![GenConfig::tiny(1), GenConfig::tiny(2)];
    for (sf, t) in [(ScaleFactor::Sf1, TableProfile::T1), (ScaleFactor::Sf1, TableProfile::T2)] {
        cfgs.push(GenConfig::cm_ldbc(sf, t, 1000.0, 5));
    }
    for cfg in cfgs {
        let ds = generate_dataset(&cfg).unwrap();
        for l in &cfg.labels {
            assert_eq!(ds.catalog.label_count(&l.label), l.nodes, "{}", l.label);
            let t = l.table.unwrap();
            assert_eq!(ds.catalog.table_rowcount(&table_name(&l.label)), t.rows);
            assert_eq!(
                count_true_matches(&ds, &l.label).unwrap(),
                cfg.true_matches()[&l.label],
                "{} {}",
                cfg.name,
                l.label
            );
        }
    }
}

#[test]
fn synthetic_ids_disjoint_from_graph() {
    let ds = generate_dataset(&GenConfig::tiny(4)).unwrap();
    let graph_ids: HashSet<i64> = ds
        .graph
        .vertices()
        .filter_map(|v| match ds.graph.vertex_property_ref(v, "id") {
            Some(Value::Int(i)) => Some(*i),
            _ => None,
        })
        .collect();
    let cfg = GenConfig::tiny(4);
    let mut total = 0;
    for l in &cfg.labels {
        let t = &ds.tables[&table_name(&l.label)];
        let inside = t
            .rows
            .iter()
            .filter(|r| matches!(r[0], Value::Int(i) if graph_ids.contains(&i)))
            .count() as u64;
        assert_eq!(inside, cfg.true_matches()[&l.label]);
        let ids: HashSet<&Value> = t.rows.iter().map(|r| &r[0]).collect();
        assert_eq!(ids.len(), t.rows.len(), "table ids unique");
        total += inside;
    }
    assert!(total > 0);
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    let cfg = GenConfig::tiny(9);
    let dir = tempfile::tempdir().unwrap();
    let a = generate_to_dir(&cfg, dir.path()).unwrap();
    let b = generate_dataset(&cfg).unwrap();
    assert_eq!(a.tables, b.tables);
    assert_eq!(a.graph.edge_count(), b.graph.edge_count());
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded.tables, a.tables);
    assert_eq!(loaded.graph.vertex_count(), a.graph.vertex_count());
    assert_eq!(loaded.graph.edge_count(), a.graph.edge_count());
    let c = generate_dataset(&GenConfig::tiny(10)).unwrap();
    assert_ne!(c.tables, a.tables);
}

#[test]
fn workload_shape() {
    let ds = generate_dataset(&GenConfig::tiny(1)).unwrap();
    let cfg = WorkloadConfig {
        count: 60,
        ..Default::default()
    };
    let w = generate_workload(&ds, &cfg).unwrap();
    assert_eq!(w.queries.len(), 60);
    let mut var_length = 0;
    for q in &w.queries {
        let parsed = parse_query_file(&q.text, &ds.catalog).unwrap_or_else(|e| panic!("{}: {e}\n{}", q.id, q.text));
        let n = parsed.units.len();
        assert!((1..=4).contains(&n), "{} has {n} units", q.id);
        let hops = parsed.graph_ast.paths[0].hops.len();
        assert!((2..=4).contains(&hops), "{}", q.id);
        if parsed.graph_ast.paths[0].hops.iter().any(|h| h.0.var_length.is_some()) {
            var_length += 1;
        }
    }
    assert!(var_length * 10 >= w.queries.len(), "{var_length} variable-length queries");
    assert_eq!(w.split.train.len() + w.split.test.len(), 60);
    assert_eq!(w.split.train.len(), 46);
}

#[test]
fn workload_deterministic_and_round_trips() {
    let ds = generate_dataset(&GenConfig::tiny(1)).unwrap();
    let cfg = WorkloadConfig {
        count: 20,
        ..Default::default()
    };
    let a = generate_workload(&ds, &cfg).unwrap();
    let b = generate_workload(&ds, &cfg).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    write_workload(dir.path(), &a).unwrap();
    let loaded = load_workload(dir.path()).unwrap();
    assert_eq!(loaded, a);
    let other = generate_workload(&ds, &WorkloadConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(other.queries, a.queries);
}
