//! Query parsing and plan translation checked against nested-loop oracles
//! and the reference evaluator.

use std::collections::{BTreeMap, BTreeSet};

use cmgrj::algebra::{evaluate, AlgebraExpr, EvalOutput};
use cmgrj::datamodel::{Dataset, PropertyGraph, Relation, Value, VertexId};
use cmgrj::fixtures::{
    author_work_dataset, motivating_dataset, motivating_expr, motivating_query_file, AUTHOR_WORK_QUERY,
};
use cmgrj::frontend::{
    export_relation, moved_relation, parse_cmgrj, parse_query_file, translate, translate_vertex_movement,
    CandidatePlan, CmgrjQuery, MovementDirection, GRAPH_RESULT,
};
use cmgrj::Error;

fn eval_rel(e: &AlgebraExpr, g: &PropertyGraph, tables: &BTreeMap<String, Relation>) -> Relation {
    evaluate(e, g, tables).unwrap().into_relation(g)
}

/// Run a plan stage by stage with the reference evaluator standing in for
/// both engines.
fn run_staged(plan: &CandidatePlan, ds: &Dataset) -> Relation {
    let g = &ds.graph;
    let mut tables = ds.tables.clone();
    for (name, e) in &plan.step1_prequeries {
        let r = eval_rel(e, g, &ds.tables);
        tables.insert(name.clone(), r);
    }
    for x in &plan.vertex_exports {
        let exported = evaluate(&x.graph_query, g, &tables).unwrap();
        let EvalOutput::Graph(p) = exported else { panic!("export must be graph-side") };
        tables.insert(export_relation(&x.unit), p.materialize(&export_relation(&x.unit), g));
        let joined = eval_rel(&x.join, g, &tables);
        tables.insert(moved_relation(&x.unit), joined);
    }
    let EvalOutput::Graph(result) = evaluate(&plan.graph_query, g, &tables).unwrap() else {
        panic!("graph query must yield a graph relation")
    };
    tables.insert(GRAPH_RESULT.into(), result.materialize(GRAPH_RESULT, g));
    eval_rel(&plan.final_relational, g, &tables)
}

fn subsets(names: &[String]) -> Vec<BTreeSet<String>> {
    (0..1usize << names.len())
        .map(|mask| {
            names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, n)| n.clone())
                .collect()
        })
        .collect()
}

fn motivating() -> (Dataset, CmgrjQuery) {
    let ds = motivating_dataset();
    let q = parse_query_file(&motivating_query_file(), &ds.catalog).unwrap();
    (ds, q)
}

fn author_work() -> (Dataset, CmgrjQuery) {
    let ds = author_work_dataset();
    let q = parse_query_file(AUTHOR_WORK_QUERY, &ds.catalog).unwrap();
    (ds, q)
}

fn edge_count(g: &PropertyGraph, s: VertexId, d: VertexId, t: &str) -> usize {
    g.edges()
        .filter(|&e| g.endpoints(e) == (s, d) && g.edge_has_label(e, t))
        .count()
}

/// Nested loops over every vertex quadruple and every row triple.
fn author_work_nested_loop(ds: &Dataset) -> Vec<Vec<Value>> {
    let g = &ds.graph;
    let of = |l: &str| -> Vec<VertexId> { g.vertices().filter(|&v| g.has_label(v, l)).collect() };
    let p = |v: VertexId, k: &str| g.vertex_property(v, k).unwrap();
    let big = |v: VertexId| matches!(p(v, "works_count"), Value::Int(n) if n > 50);
    let mut out = Vec::new();
    for &a1 in &of("Author") {
        for &w1 in &of("Work") {
            for &w2 in &of("Work") {
                for &a2 in &of("Author") {
                    let mult = edge_count(g, w1, a1, "CREATED_BY")
                        * edge_count(g, w1, w2, "RELATED_TO")
                        * edge_count(g, w2, a2, "CREATED_BY");
                    if !(big(a1) && big(a2)) {
                        continue;
                    }
                    for _ in 0..mult {
                        for w in &ds.tables["publication_cited"].rows {
                            for i0 in &ds.tables["inventors"].rows {
                                for i1 in &ds.tables["inventors"].rows {
                                    let cites = i1[1].list_len().unwrap() > 2;
                                    if w[0] == p(w1, "name") && i0[0] == p(a1, "name") && i1[0] == p(a2, "name") && cites
                                    {
                                        out.push(vec![p(a2, "name"), p(a1, "name"), p(w2, "name"), p(w1, "name")]);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn motivating_query_binds_two_units() {
    let (ds, q) = motivating();
    assert_eq!(q.joinable_units(), ["P", "Un"]);
    assert_eq!(q.unit("Un").unwrap().tables(), BTreeSet::from(["Un".into(), "Ci".into(), "Co".into()]));
    assert_eq!(q.output_columns, ["g.fname", "P.hashtag"]);
    let got = eval_rel(&q.raw_expr, &ds.graph, &ds.tables);
    let want = eval_rel(&motivating_expr(), &ds.graph, &ds.tables);
    assert!(got.bag_eq(&want));
    assert_eq!(got.len(), 4);
}

#[test]
fn author_work_query_matches_nested_loops() {
    let (ds, q) = author_work();
    assert_eq!(q.joinable_units(), ["a0", "a1", "w"]);
    let got = eval_rel(&q.raw_expr, &ds.graph, &ds.tables);
    let mut rows = got.rows.clone();
    rows.sort();
    let want = author_work_nested_loop(&ds);
    assert_eq!(want.len(), 5);
    assert_eq!(rows, want);
    assert_eq!(got.column_names(), ["g.a2name", "g.a1name", "g.w2name", "g.w1name"]);
}

#[test]
fn identity_pipeline() {
    let ds = author_work_dataset();
    let q = parse_cmgrj("MATCH (a:Author) RETURN a.name", "SELECT * FROM neo4j", &ds.catalog).unwrap();
    assert!(q.units.is_empty());
    assert_eq!(q.relational_part, AlgebraExpr::base(GRAPH_RESULT));
    let r = eval_rel(&q.raw_expr, &ds.graph, &ds.tables);
    assert_eq!(r.len(), 4);
    assert_eq!(r.column_names(), ["neo4j.a_name"]);
}

#[test]
fn unparse_round_trips() {
    for (ds, q) in [motivating(), author_work()] {
        let again = parse_query_file(&q.unparse(), &ds.catalog).unwrap();
        assert_eq!(again.raw_expr, q.raw_expr);
        assert_eq!(again.unparse(), q.unparse());
    }
}

#[test]
fn validation_errors() {
    let ds = motivating_dataset();
    let cat = &ds.catalog;
    let g = "MATCH (p:Post)-[:HAS_CREATOR]->(a:Person) RETURN p.id AS pid, a.name AS aname";
    let err = |graph: &str, sql: &str| parse_cmgrj(graph, sql, cat).unwrap_err();
    assert!(matches!(err("MATCH (x:Nope) RETURN x.id", "SELECT * FROM neo4j"), Error::UnknownLabel(_)));
    assert!(matches!(err(g, "SELECT * FROM neo4j g, Missing m WHERE g.pid = m.id"), Error::UnknownTable(_)));
    assert!(matches!(err(g, "SELECT g.nope FROM neo4j g"), Error::UnresolvedAttribute(_)));
    assert!(matches!(err("MATCH (p:Post) RETURN p.nope", "SELECT * FROM neo4j"), Error::UnresolvedAttribute(_)));
    assert!(matches!(err(g, "SELECT * FROM neo4j g, Ci WHERE g.aname = Ci.city"), Error::NotJoinable(_)));
    assert!(matches!(err(g, "SELECT * FROM neo4j g, P, Ci WHERE g.pid = P.id"), Error::InvalidQuery(_)));
    assert!(matches!(err(g, "SELECT * FROM P"), Error::InvalidQuery(_)));
    assert!(matches!(
        err("MATCH (p:Post)\n  -[r:HAS_CREATOR]->(a:Person) RETURN p.id", "SELECT * FROM neo4j"),
        Error::Syntax { line: 2, column: 5, .. }
    ));
}

#[test]
fn raw_plan_prematerializes_the_university_unit() {
    let (ds, q) = motivating();
    let plan = translate(&q, &BTreeSet::new(), &ds.catalog).unwrap();
    let names: Vec<&str> = plan.step1_prequeries.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["__unit_P", "__unit_Un"]);
    let un = &plan.step1_prequeries[1].1;
    assert_eq!(un.base_tables(), BTreeSet::from(["Un".into(), "Ci".into(), "Co".into()]));
    let mut rg = 0;
    plan.graph_query.walk(&mut |e| rg += matches!(e, AlgebraExpr::RgJoin { .. }) as usize);
    assert_eq!(rg, 0);
    assert_eq!(
        plan.final_relational.base_tables(),
        BTreeSet::from([GRAPH_RESULT.into(), "__unit_P".into(), "__unit_Un".into()])
    );
    assert_eq!(plan.to_graph_batches(), 0);
    assert_eq!(plan.to_relational_batches(), 1);
}

#[test]
fn moving_p_joins_it_graph_side() {
    let (ds, q) = motivating();
    let plan = translate(&q, &BTreeSet::from(["P".to_string()]), &ds.catalog).unwrap();
    let mut moved = Vec::new();
    plan.graph_query.walk(&mut |e| {
        if let AlgebraExpr::RgJoin { table, .. } = e {
            moved.extend(table.base_tables());
        }
    });
    assert_eq!(moved, ["__unit_P"]);
    assert_eq!(
        plan.final_relational.base_tables(),
        BTreeSet::from([GRAPH_RESULT.into(), "__unit_Un".into()])
    );
    assert_eq!(plan.movement_steps[0].direction, MovementDirection::RelationalToGraph);
    assert_eq!(plan.movement_steps[0].relations, ["__unit_P"]);
    assert_eq!(plan.to_relational_batches(), 1);
}

#[test]
fn every_translation_matches_the_raw_plan() {
    for (ds, q) in [motivating(), author_work()] {
        let raw = eval_rel(&q.raw_expr, &ds.graph, &ds.tables);
        for m in subsets(&q.joinable_units()) {
            let plan = translate(&q, &m, &ds.catalog).unwrap();
            assert!(eval_rel(&plan.full_expr, &ds.graph, &ds.tables).bag_eq(&raw), "{m:?}");
            assert!(run_staged(&plan, &ds).bag_eq(&raw), "staged {m:?}");
            assert_eq!(plan.to_graph_batches(), usize::from(!m.is_empty()));
            assert_eq!(plan.to_relational_batches(), 1);
        }
    }
}

#[test]
fn vertex_movement_matches_the_raw_plan() {
    let (ds, q) = motivating();
    let raw = eval_rel(&q.raw_expr, &ds.graph, &ds.tables);
    for label in ["Post", "University"] {
        let plan = translate_vertex_movement(&q, label, &ds.catalog).unwrap();
        assert_eq!(plan.vertex_exports.len(), 1);
        assert_eq!(plan.to_relational_batches(), 2);
        assert!(eval_rel(&plan.full_expr, &ds.graph, &ds.tables).bag_eq(&raw), "{label}");
        assert!(run_staged(&plan, &ds).bag_eq(&raw), "staged {label}");
    }
    assert!(translate_vertex_movement(&q, "Forum", &ds.catalog).is_err());

    let (ds, q) = author_work();
    let raw = eval_rel(&q.raw_expr, &ds.graph, &ds.tables);
    let plan = translate_vertex_movement(&q, "Author", &ds.catalog).unwrap();
    assert_eq!(plan.movement, BTreeSet::from(["a0".into(), "a1".into()]));
    assert!(run_staged(&plan, &ds).bag_eq(&raw));
}

#[test]
fn unknown_movement_is_rejected() {
    let (ds, q) = motivating();
    let err = translate(&q, &BTreeSet::from(["Ci".to_string()]), &ds.catalog).unwrap_err();
    assert!(matches!(err, Error::NotJoinable(_)));
}

#[test]
fn variable_length_and_multi_path_patterns() {
    let ds = author_work_dataset();
    let q = parse_cmgrj(
        "MATCH (w:Work)-[:RELATED_TO*..2]->(v:Work), (v)-[:CREATED_BY]->(a:Author) RETURN w.name AS w, a.name AS a",
        "SELECT g.w, g.a, i.patent_ids FROM neo4j g, inventors i WHERE g.a = i.name",
        &ds.catalog,
    )
    .unwrap();
    let g = &ds.graph;
    let raw = eval_rel(&q.raw_expr, g, &ds.tables);
    for m in subsets(&q.joinable_units()) {
        let plan = translate(&q, &m, &ds.catalog).unwrap();
        assert!(run_staged(&plan, &ds).bag_eq(&raw));
    }
    assert!(!raw.is_empty());
}
