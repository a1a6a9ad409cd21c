//! The reference evaluator and its rewrites against brute-force nested-loop
//! evaluation over tiny instances.

use std::collections::{BTreeMap, BTreeSet};

use cmgrj::algebra::{
    evaluate, parse_sexpr, rewrite_equivalents, rewrite_vertex_movement, schema_of, to_sexpr, to_sexpr_pretty,
    AlgebraExpr, Atom, CmgrjParts, CmpOp, ExpandStep, Operand, Predicate, ProjCol, ProjItem,
};
use cmgrj::datamodel::{Column, Direction, PropertyGraph, Relation, Value, ValueKind, VertexId};
use cmgrj::fixtures::{motivating_dataset, motivating_expr, motivating_pattern};
use proptest::prelude::*;

fn sorted(mut rows: Vec<Vec<Value>>) -> Vec<Vec<Value>> {
    rows.sort();
    rows
}

fn project_cols(r: &Relation, cols: &[&str]) -> Vec<Vec<Value>> {
    let idx: Vec<usize> = cols.iter().map(|c| r.column_index(c).unwrap()).collect();
    sorted(r.rows.iter().map(|row| idx.iter().map(|&i| row[i].clone()).collect()).collect())
}

fn edge_count(g: &PropertyGraph, s: VertexId, d: VertexId, t: &str) -> usize {
    g.edges()
        .filter(|&e| g.endpoints(e) == (s, d) && g.edge_has_label(e, t))
        .count()
}

fn prop(g: &PropertyGraph, v: VertexId, p: &str) -> Value {
    g.vertex_property(v, p).unwrap()
}

/// Nested loops over every vertex quadruple and every row combination.
fn motivating_nested_loop() -> Vec<Vec<Value>> {
    let ds = motivating_dataset();
    let g = &ds.graph;
    let of = |label: &str| -> Vec<VertexId> { g.vertices().filter(|&v| g.has_label(v, label)).collect() };
    let mut x = Vec::new();
    for &f in &of("Forum") {
        for &p in &of("Post") {
            for &a in &of("Person") {
                for &u in &of("University") {
                    let mult = edge_count(g, f, p, "CONTAINER_OF")
                        * edge_count(g, p, a, "HAS_CREATOR")
                        * edge_count(g, a, u, "STUDY_AT");
                    if prop(g, u, "department") != Value::from("CS") {
                        continue;
                    }
                    for _ in 0..mult {
                        x.push((prop(g, p, "id"), prop(g, f, "name"), prop(g, u, "name")));
                    }
                }
            }
        }
    }
    let t = &ds.tables;
    let mut out = Vec::new();
    for (pid, fname, uname) in &x {
        for pr in &t["P"].rows {
            if pr[0] != *pid {
                continue;
            }
            for un in &t["Un"].rows {
                let Value::Int(rank) = un[2] else { continue };
                if un[0] != *uname || rank >= 500 {
                    continue;
                }
                for ci in &t["Ci"].rows {
                    if ci[0] != un[1] {
                        continue;
                    }
                    for co in &t["Co"].rows {
                        if co[0] == ci[1] && co[1] == Value::from("Asia") {
                            out.push(vec![fname.clone(), pr[1].clone()]);
                        }
                    }
                }
            }
        }
    }
    sorted(out)
}

fn eval_rel(e: &AlgebraExpr) -> Relation {
    let ds = motivating_dataset();
    evaluate(e, &ds.graph, &ds.tables).unwrap().into_relation(&ds.graph)
}

#[test]
fn motivating_expression_matches_nested_loops() {
    let expected = motivating_nested_loop();
    assert_eq!(expected.len(), 4);
    let got = eval_rel(&motivating_expr());
    assert_eq!(project_cols(&got, &["g.fname", "P.hashtag"]), expected);
}

#[test]
fn every_movement_subset_is_equivalent() {
    let ds = motivating_dataset();
    let raw = eval_rel(&motivating_expr());
    let units = CmgrjParts::decompose(&motivating_expr()).unwrap().unit_names();
    assert_eq!(units, ["P", "Un"]);
    for mask in 0..4u32 {
        let movement: BTreeSet<String> = units
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, u)| u.clone())
            .collect();
        let rewritten = rewrite_equivalents(&motivating_expr(), &movement, &ds.tables).unwrap();
        let got = eval_rel(&rewritten);
        assert!(got.bag_eq(&raw), "movement {movement:?}\n{}", to_sexpr_pretty(&rewritten));
    }
}

#[test]
fn full_movement_places_both_units_under_relation_graph_joins() {
    let ds = motivating_dataset();
    let movement: BTreeSet<String> = ["P", "Un"].iter().map(|s| s.to_string()).collect();
    let e = rewrite_equivalents(&motivating_expr(), &movement, &ds.tables).unwrap();
    let text = to_sexpr(&e);
    assert_eq!(text.matches("(rg-join").count(), 2);
    assert_eq!(text.matches("(gr-join").count(), 1);
    assert!(text.contains("(gr-join (graph-project (rg-join"));
}

#[test]
fn empty_movement_is_the_raw_plan() {
    let ds = motivating_dataset();
    let e = rewrite_equivalents(&motivating_expr(), &BTreeSet::new(), &ds.tables).unwrap();
    assert_eq!(e, motivating_expr());
}

#[test]
fn unknown_unit_is_not_joinable() {
    let ds = motivating_dataset();
    let movement: BTreeSet<String> = ["Ci".to_string()].into();
    assert!(rewrite_equivalents(&motivating_expr(), &movement, &ds.tables).is_err());
}

#[test]
fn vertex_movement_variant_is_equivalent() {
    let ds = motivating_dataset();
    let raw = eval_rel(&motivating_expr());
    for label in ["Post", "University"] {
        let e = rewrite_vertex_movement(&motivating_expr(), label, &ds.tables).unwrap();
        assert!(eval_rel(&e).bag_eq(&raw), "{label}");
    }
    assert!(rewrite_vertex_movement(&motivating_expr(), "Forum", &ds.tables).is_err());
}

#[test]
fn chain_schema_follows_expansion_order() {
    let ds = motivating_dataset();
    let s = schema_of(&motivating_pattern(), &ds.tables).unwrap();
    let names: Vec<&str> = s.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["n4", "n1", "n2", "n3"]);
    let out = evaluate(&motivating_pattern(), &ds.graph, &ds.tables).unwrap();
    let cmgrj::algebra::EvalOutput::Graph(p) = out else { panic!() };
    assert_eq!(p.schema, s);
}

#[test]
fn graph_relation_join_schema_appends_new_columns() {
    let ds = motivating_dataset();
    let e = motivating_pattern()
        .graph_project(vec![ProjItem::prop("n1", "id", "id"), ProjItem::prop("n4", "name", "fname")])
        .gr_join(Some(AlgebraExpr::base("P")), vec![]);
    let s = schema_of(&e, &ds.tables).unwrap();
    let names: Vec<&str> = s.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["id", "fname", "hashtag"]);
    let r = eval_rel(&e);
    assert_eq!(r.column_names(), names);
    assert_eq!(r.len(), 4);
}

#[test]
fn text_form_round_trips() {
    let ds = motivating_dataset();
    let movement: BTreeSet<String> = ["P".to_string()].into();
    for e in [
        motivating_expr(),
        rewrite_equivalents(&motivating_expr(), &movement, &ds.tables).unwrap(),
        rewrite_vertex_movement(&motivating_expr(), "Post", &ds.tables).unwrap(),
    ] {
        assert_eq!(parse_sexpr(&to_sexpr(&e)).unwrap(), e);
        assert_eq!(parse_sexpr(&to_sexpr_pretty(&e)).unwrap(), e);
    }
}

#[test]
fn evaluation_leaves_the_graph_unchanged() {
    let ds = motivating_dataset();
    let before = (ds.graph.vertex_count(), ds.graph.edge_count(), ds.graph.vertex_labels().clone());
    let movement: BTreeSet<String> = ["P".to_string(), "Un".to_string()].into();
    let e = rewrite_equivalents(&motivating_expr(), &movement, &ds.tables).unwrap();
    evaluate(&e, &ds.graph, &ds.tables).unwrap();
    assert_eq!(before, (ds.graph.vertex_count(), ds.graph.edge_count(), ds.graph.vertex_labels().clone()));
}

// Random instances: labels A → B → C, tables TA keyed on A.k and TB keyed on B.k.

#[derive(Debug, Clone)]
struct Instance {
    a: Vec<i64>,
    b: Vec<i64>,
    c: Vec<i64>,
    ab: Vec<(usize, usize)>,
    bc: Vec<(usize, usize)>,
    ta: Vec<(i64, i64)>,
    tb: Vec<(i64, i64)>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..5, 1usize..5, 1usize..4).prop_flat_map(|(na, nb, nc)| {
        (
            proptest::collection::vec(0i64..4, na),
            proptest::collection::vec(0i64..4, nb),
            proptest::collection::vec(0i64..4, nc),
            proptest::collection::vec((0..na, 0..nb), 0..8),
            proptest::collection::vec((0..nb, 0..nc), 0..8),
            proptest::collection::vec((0i64..4, 0i64..3), 0..6),
            proptest::collection::vec((0i64..4, 0i64..3), 0..6),
        )
            .prop_map(|(a, b, c, ab, bc, ta, tb)| Instance {
                a,
                b,
                c,
                ab,
                bc,
                ta,
                tb,
            })
    })
}

fn build(inst: &Instance) -> (PropertyGraph, BTreeMap<String, Relation>) {
    let mut g = PropertyGraph::new(["A", "B", "C"], ["AB", "BC"]);
    let mut ids = 0;
    let mut add = |g: &mut PropertyGraph, label: &str, ks: &[i64]| -> Vec<VertexId> {
        ks.iter()
            .map(|&k| {
                ids += 1;
                g.add_vertex([label], [("id".to_string(), Value::Int(ids)), ("k".to_string(), Value::Int(k))])
                    .unwrap()
            })
            .collect()
    };
    let va = add(&mut g, "A", &inst.a);
    let vb = add(&mut g, "B", &inst.b);
    let vc = add(&mut g, "C", &inst.c);
    for &(i, j) in &inst.ab {
        g.add_edge(va[i], vb[j], "AB", []).unwrap();
    }
    for &(i, j) in &inst.bc {
        g.add_edge(vb[i], vc[j], "BC", []).unwrap();
    }
    let schema = vec![Column::new("k", ValueKind::Int), Column::new("w", ValueKind::Int)];
    let rel = |name: &str, rows: &[(i64, i64)]| {
        Relation::with_rows(
            name,
            schema.clone(),
            rows.iter().map(|&(k, w)| vec![Value::Int(k), Value::Int(w)]).collect(),
        )
        .unwrap()
    };
    let mut t = BTreeMap::new();
    t.insert("TA".to_string(), rel("TA", &inst.ta));
    t.insert("TB".to_string(), rel("TB", &inst.tb));
    (g, t)
}

fn step(from: &str, to: &str, label: &str, edge: &str, dir: Direction) -> ExpandStep {
    ExpandStep {
        from: from.into(),
        to: to.into(),
        to_label: label.into(),
        edge_type: edge.into(),
        dir,
    }
}

fn random_query(var_len: bool, filter: Option<i64>) -> AlgebraExpr {
    let mut p = AlgebraExpr::get_vertices("x", "A").expand(step("x", "y", "B", "AB", Direction::Out));
    p = if var_len {
        p.var_expand(step("y", "z", "C", "BC", Direction::Out), None)
    } else {
        p.expand(step("y", "z", "C", "BC", Direction::Out))
    };
    if let Some(k) = filter {
        p = p.graph_select(Predicate::new(vec![Atom::new(
            Operand::prop("z", "k"),
            CmpOp::Le,
            Operand::lit(k),
        )]));
    }
    p.graph_project(vec![
        ProjItem::prop("x", "k", "g.xk"),
        ProjItem::prop("y", "k", "g.yk"),
        ProjItem::prop("z", "id", "g.zid"),
    ])
    .gr_join(Some(AlgebraExpr::base_as("TA", "TA")), vec![("g.xk".into(), "TA.k".into())])
    .rel_join(AlgebraExpr::base_as("TB", "TB"), vec![("g.yk".into(), "TB.k".into())])
    .rel_select(Predicate::new(vec![Atom::new(
        Operand::col("TA.w"),
        CmpOp::Ge,
        Operand::col("TB.w"),
    )]))
    .rel_project(vec![
        ProjCol::keep("g.zid"),
        ProjCol::keep("TA.w"),
        ProjCol::keep("TB.w"),
    ])
}

/// Nested-loop oracle for `random_query` with fixed-length hops.
fn random_oracle(g: &PropertyGraph, t: &BTreeMap<String, Relation>, filter: Option<i64>) -> Vec<Vec<Value>> {
    let of = |l: &str| -> Vec<VertexId> { g.vertices().filter(|&v| g.has_label(v, l)).collect() };
    let mut out = Vec::new();
    for &x in &of("A") {
        for &y in &of("B") {
            for &z in &of("C") {
                let mult = edge_count(g, x, y, "AB") * edge_count(g, y, z, "BC");
                if let Some(k) = filter {
                    if prop(g, z, "k") > Value::Int(k) {
                        continue;
                    }
                }
                for _ in 0..mult {
                    for ta in &t["TA"].rows {
                        for tb in &t["TB"].rows {
                            if ta[0] == prop(g, x, "k") && tb[0] == prop(g, y, "k") && ta[1] >= tb[1] {
                                out.push(vec![prop(g, z, "id"), ta[1].clone(), tb[1].clone()]);
                            }
                        }
                    }
                }
            }
        }
    }
    sorted(out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn fixed_hop_query_matches_nested_loops(inst in instance(), filter in proptest::option::of(0i64..4)) {
        let (g, t) = build(&inst);
        let e = random_query(false, filter);
        let got = evaluate(&e, &g, &t).unwrap().into_relation(&g);
        prop_assert_eq!(project_cols(&got, &["g.zid", "TA.w", "TB.w"]), random_oracle(&g, &t, filter));
    }

    #[test]
    fn rewrites_preserve_the_bag(inst in instance(), var_len in any::<bool>(), filter in proptest::option::of(0i64..4)) {
        let (g, t) = build(&inst);
        let e = random_query(var_len, filter);
        let raw = evaluate(&e, &g, &t).unwrap().into_relation(&g);
        for movement in [vec![], vec!["TA"], vec!["TB"], vec!["TA", "TB"]] {
            let m: BTreeSet<String> = movement.iter().map(|s| s.to_string()).collect();
            let r = rewrite_equivalents(&e, &m, &t).unwrap();
            let got = evaluate(&r, &g, &t).unwrap().into_relation(&g);
            prop_assert!(got.bag_eq(&raw), "movement {:?}", m);
        }
        for label in ["A", "B"] {
            let r = rewrite_vertex_movement(&e, label, &t).unwrap();
            let got = evaluate(&r, &g, &t).unwrap().into_relation(&g);
            prop_assert!(got.bag_eq(&raw), "vertex movement {}", label);
        }
    }

    #[test]
    fn relational_join_commutes_and_associates(inst in instance()) {
        let (g, mut t) = build(&inst);
        t.insert("TC".to_string(), t["TA"].clone());
        let a = || AlgebraExpr::base_as("TA", "a");
        let b = || AlgebraExpr::base_as("TB", "b");
        let c = || AlgebraExpr::base_as("TC", "c");
        let ab = a().rel_join(b(), vec![("a.k".into(), "b.k".into())]);
        let ba = b().rel_join(a(), vec![("b.k".into(), "a.k".into())]);
        let r1 = evaluate(&ab, &g, &t).unwrap().into_relation(&g);
        let r2 = evaluate(&ba, &g, &t).unwrap().into_relation(&g);
        prop_assert!(r1.bag_eq(&r2));
        let left = a()
            .rel_join(b(), vec![("a.k".into(), "b.k".into())])
            .rel_join(c(), vec![("b.w".into(), "c.w".into())]);
        let right = a().rel_join(
            b().rel_join(c(), vec![("b.w".into(), "c.w".into())]),
            vec![("a.k".into(), "b.k".into())],
        );
        let r3 = evaluate(&left, &g, &t).unwrap().into_relation(&g);
        let r4 = evaluate(&right, &g, &t).unwrap().into_relation(&g);
        prop_assert!(r3.bag_eq(&r4));
    }

    #[test]
    fn graph_join_commutes(inst in instance()) {
        let (g, t) = build(&inst);
        let l = AlgebraExpr::get_vertices("x", "A").expand(step("x", "y", "B", "AB", Direction::Out));
        let r = AlgebraExpr::get_vertices("y", "B").expand(step("y", "z", "C", "BC", Direction::Out));
        let lr = AlgebraExpr::GraphJoin { left: Box::new(l.clone()), right: Box::new(r.clone()) };
        let rl = AlgebraExpr::GraphJoin { left: Box::new(r), right: Box::new(l) };
        let cmgrj::algebra::EvalOutput::Graph(p1) = evaluate(&lr, &g, &t).unwrap() else { unreachable!() };
        let cmgrj::algebra::EvalOutput::Graph(p2) = evaluate(&rl, &g, &t).unwrap() else { unreachable!() };
        prop_assert!(p1.bag_eq(&p2));
        // ⊗ on the shared vertex equals the chained expansion.
        let chain = AlgebraExpr::get_vertices("x", "A")
            .expand(step("x", "y", "B", "AB", Direction::Out))
            .expand(step("y", "z", "C", "BC", Direction::Out));
        let cmgrj::algebra::EvalOutput::Graph(p3) = evaluate(&chain, &g, &t).unwrap() else { unreachable!() };
        prop_assert!(p1.bag_eq(&p3));
    }
}
