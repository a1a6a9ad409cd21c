//! A hand-built micro-instance of the forum / post / university workload,
//! small enough to check every result by hand.
//!
//! Graph: 2 forums, 2 posts, 2 persons, 2 universities.
//! Tables: `P` (post hashtags), `Un` (university city and rank),
//! `Ci` (city → country), `Co` (country → continent).

use std::collections::BTreeMap;

use crate::algebra::{AlgebraExpr, Atom, CmpOp, ExpandStep, Operand, Predicate, ProjCol, ProjItem};
use crate::datamodel::{
    Column, Dataset, Direction, EdgeTypeSpec, JoinablePairSpec, Manifest, PropertyGraph, Relation, TableSpec, Value,
    ValueKind, VertexLabelSpec,
};

/// Graph half of the motivating query.
pub const MOTIVATING_GRAPH_QUERY: &str = "MATCH (n4:Forum)-[:CONTAINER_OF]->(n1:Post)-[:HAS_CREATOR]->(n2:Person)\
-[:STUDY_AT]->(n3:University)
WHERE n3.department = 'CS'
RETURN n1.id AS pid, n4.name AS fname, n3.name AS uname";

/// Relational half of the motivating query.
pub const MOTIVATING_SQL_QUERY: &str = "SELECT g.fname, P.hashtag
FROM neo4j g, P, Un, Ci, Co
WHERE g.pid = P.id AND g.uname = Un.name AND Un.rank < 500
  AND Un.city = Ci.city AND Ci.country = Co.country AND Co.continent = 'Asia'";

/// Both halves in query-file form.
pub fn motivating_query_file() -> String {
    format!("{MOTIVATING_GRAPH_QUERY};\n{MOTIVATING_SQL_QUERY}\n")
}

fn col(name: &str, kind: ValueKind) -> Column {
    Column::new(name, kind)
}

fn props(pairs: &[(&str, Value)]) -> Vec<(String, Value)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn motivating_manifest() -> Manifest {
    use ValueKind::*;
    let vl = |label: &str, cols: Vec<Column>| VertexLabelSpec {
        label: label.into(),
        properties: cols,
    };
    let et = |t: &str, s: &str, d: &str| EdgeTypeSpec {
        edge_type: t.into(),
        source: s.into(),
        target: d.into(),
        properties: vec![],
    };
    let tb = |name: &str, cols: Vec<Column>| TableSpec {
        name: name.into(),
        columns: cols,
    };
    let jp = |label: &str, property: &str, table: &str, column: &str| JoinablePairSpec {
        label: label.into(),
        property: property.into(),
        table: table.into(),
        column: column.into(),
    };
    Manifest {
        name: "motivating".into(),
        vertex_labels: vec![
            vl("Forum", vec![col("id", Int), col("name", Str)]),
            vl("Post", vec![col("id", Int)]),
            vl("Person", vec![col("id", Int), col("name", Str)]),
            vl("University", vec![col("id", Int), col("name", Str), col("department", Str)]),
        ],
        edge_types: vec![
            et("CONTAINER_OF", "Forum", "Post"),
            et("HAS_CREATOR", "Post", "Person"),
            et("STUDY_AT", "Person", "University"),
        ],
        tables: vec![
            tb("P", vec![col("id", Int), col("hashtag", Str)]),
            tb("Un", vec![col("name", Str), col("city", Str), col("rank", Int)]),
            tb("Ci", vec![col("city", Str), col("country", Str)]),
            tb("Co", vec![col("country", Str), col("continent", Str)]),
        ],
        joinable_pairs: vec![jp("Post", "id", "P", "id"), jp("University", "name", "Un", "name")],
    }
}

/// The micro-instance as a loaded dataset.
pub fn motivating_dataset() -> Dataset {
    let manifest = motivating_manifest();
    let mut g = PropertyGraph::new(
        manifest.vertex_labels.iter().map(|l| l.label.clone()),
        manifest.edge_types.iter().map(|e| e.edge_type.clone()),
    );
    for spec in &manifest.vertex_labels {
        for c in &spec.properties {
            g.declare_property(&spec.label, &c.name, c.kind);
        }
    }
    let v = |g: &mut PropertyGraph, label: &str, p: &[(&str, Value)]| g.add_vertex([label], props(p)).unwrap();
    let f1 = v(&mut g, "Forum", &[("id", 1.into()), ("name", "F1".into())]);
    let f2 = v(&mut g, "Forum", &[("id", 2.into()), ("name", "F2".into())]);
    let p1 = v(&mut g, "Post", &[("id", 101.into())]);
    let p2 = v(&mut g, "Post", &[("id", 102.into())]);
    let a1 = v(&mut g, "Person", &[("id", 201.into()), ("name", "Ann".into())]);
    let a2 = v(&mut g, "Person", &[("id", 202.into()), ("name", "Bo".into())]);
    let u1 = v(
        &mut g,
        "University",
        &[("id", 301.into()), ("name", "NUS".into()), ("department", "CS".into())],
    );
    let u2 = v(
        &mut g,
        "University",
        &[("id", 302.into()), ("name", "Tsinghua".into()), ("department", "CS".into())],
    );
    for (s, d, t) in [
        (f1, p1, "CONTAINER_OF"),
        (f1, p2, "CONTAINER_OF"),
        (f2, p2, "CONTAINER_OF"),
        (p1, a1, "HAS_CREATOR"),
        (p2, a2, "HAS_CREATOR"),
        (a1, u1, "STUDY_AT"),
        (a1, u2, "STUDY_AT"),
        (a2, u2, "STUDY_AT"),
    ] {
        g.add_edge(s, d, t, []).unwrap();
    }

    let table = |spec: &TableSpec, rows: Vec<Vec<Value>>| Relation::with_rows(spec.name.clone(), spec.columns.clone(), rows).unwrap();
    let t = &manifest.tables;
    let mut tables = BTreeMap::new();
    tables.insert(
        "P".to_string(),
        table(
            &t[0],
            vec![
                vec![101.into(), "#ai|#ml".into()],
                vec![102.into(), "#db".into()],
                vec![999.into(), "#none".into()],
            ],
        ),
    );
    tables.insert(
        "Un".to_string(),
        table(
            &t[1],
            vec![
                vec!["NUS".into(), "Singapore".into(), 8.into()],
                vec!["Tsinghua".into(), "Beijing".into(), 20.into()],
                vec!["MIT".into(), "Cambridge".into(), 1.into()],
            ],
        ),
    );
    tables.insert(
        "Ci".to_string(),
        table(
            &t[2],
            vec![
                vec!["Singapore".into(), "SG".into()],
                vec!["Beijing".into(), "CN".into()],
                vec!["Cambridge".into(), "US".into()],
            ],
        ),
    );
    tables.insert(
        "Co".to_string(),
        table(
            &t[3],
            vec![
                vec!["SG".into(), "Asia".into()],
                vec!["CN".into(), "Asia".into()],
                vec!["US".into(), "North America".into()],
            ],
        ),
    );
    Dataset::from_parts(manifest, g, tables).expect("fixture is consistent")
}

fn hop(from: &str, to: &str, label: &str, edge: &str) -> ExpandStep {
    ExpandStep {
        from: from.into(),
        to: to.into(),
        to_label: label.into(),
        edge_type: edge.into(),
        dir: Direction::Out,
    }
}

/// The path pattern `p` from Forum through Post and Person to University.
pub fn motivating_pattern() -> AlgebraExpr {
    AlgebraExpr::get_vertices("n4", "Forum")
        .expand(hop("n4", "n1", "Post", "CONTAINER_OF"))
        .expand(hop("n1", "n2", "Person", "HAS_CREATOR"))
        .expand(hop("n2", "n3", "University", "STUDY_AT"))
}

fn eq(a: Operand, b: Operand) -> Atom {
    Atom::new(a, CmpOp::Eq, b)
}

fn pairs(p: &[(&str, &str)]) -> Vec<(String, String)> {
    p.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// The raw plan: graph result joined relationally with `P` and with the
/// pre-joined university unit `σ(Un) ⋈ Ci ⋈ σ(Co)`.
pub fn motivating_expr() -> AlgebraExpr {
    let x = motivating_pattern()
        .graph_select(Predicate::new(vec![eq(
            Operand::prop("n3", "department"),
            Operand::lit("CS"),
        )]))
        .graph_project(vec![
            ProjItem::prop("n1", "id", "g.pid"),
            ProjItem::prop("n4", "name", "g.fname"),
            ProjItem::prop("n3", "name", "g.uname"),
        ]);
    let un = AlgebraExpr::base_as("Un", "Un").rel_select(Predicate::new(vec![Atom::new(
        Operand::col("Un.rank"),
        CmpOp::Lt,
        Operand::lit(500),
    )]));
    let co = AlgebraExpr::base_as("Co", "Co").rel_select(Predicate::new(vec![eq(
        Operand::col("Co.continent"),
        Operand::lit("Asia"),
    )]));
    let u = un
        .rel_join(AlgebraExpr::base_as("Ci", "Ci"), pairs(&[("Un.city", "Ci.city")]))
        .rel_join(co, pairs(&[("Ci.country", "Co.country")]));
    x.gr_join(Some(AlgebraExpr::base_as("P", "P")), pairs(&[("g.pid", "P.id")]))
        .rel_join(u, pairs(&[("g.uname", "Un.name")]))
        .rel_project(vec![ProjCol::keep("g.fname"), ProjCol::keep("P.hashtag")])
}

/// Author / work collaboration query over a small patent-linked sample.
pub const AUTHOR_WORK_QUERY: &str = "MATCH (a1:Author)<-[:CREATED_BY]-(w1:Work)-[:RELATED_TO]
   ->(w2:Work)-[:CREATED_BY]->(a2:Author)
WHERE a1.works_count > 50 AND a2.works_count > 50
RETURN w2.name AS w2name, w1.name AS w1name, a1.name AS a1name, a2.name AS a2name;
SELECT g.a2name, g.a1name, g.w2name, g.w1name
FROM neo4j g,publication_cited w,inventors a0,inventors a1,
WHERE g.a1name = a0.name AND g.a2name = a1.name
  AND g.w1name = w.name AND cardinality(a1.patent_ids) > 2;
";

pub fn author_work_manifest() -> Manifest {
    use ValueKind::*;
    Manifest {
        name: "author-work".into(),
        vertex_labels: vec![
            VertexLabelSpec {
                label: "Author".into(),
                properties: vec![col("id", Int), col("name", Str), col("works_count", Int)],
            },
            VertexLabelSpec {
                label: "Work".into(),
                properties: vec![col("id", Int), col("name", Str)],
            },
        ],
        edge_types: vec![
            EdgeTypeSpec {
                edge_type: "CREATED_BY".into(),
                source: "Work".into(),
                target: "Author".into(),
                properties: vec![],
            },
            EdgeTypeSpec {
                edge_type: "RELATED_TO".into(),
                source: "Work".into(),
                target: "Work".into(),
                properties: vec![],
            },
        ],
        tables: vec![
            TableSpec {
                name: "publication_cited".into(),
                columns: vec![col("name", Str), col("patent_ids", Str)],
            },
            TableSpec {
                name: "inventors".into(),
                columns: vec![col("name", Str), col("patent_ids", Str)],
            },
        ],
        joinable_pairs: vec![
            JoinablePairSpec {
                label: "Author".into(),
                property: "name".into(),
                table: "inventors".into(),
                column: "name".into(),
            },
            JoinablePairSpec {
                label: "Work".into(),
                property: "name".into(),
                table: "publication_cited".into(),
                column: "name".into(),
            },
        ],
    }
}

/// Four authors, five works and a handful of patent links.
pub fn author_work_dataset() -> Dataset {
    let manifest = author_work_manifest();
    let mut g = PropertyGraph::new(["Author", "Work"], ["CREATED_BY", "RELATED_TO"]);
    for spec in &manifest.vertex_labels {
        for c in &spec.properties {
            g.declare_property(&spec.label, &c.name, c.kind);
        }
    }
    let authors: Vec<_> = [("Ada", 120), ("Ben", 80), ("Cy", 10), ("Di", 60)]
        .iter()
        .enumerate()
        .map(|(i, (n, w))| {
            let p = props(&[("id", (i as i64 + 1).into()), ("name", (*n).into()), ("works_count", (*w).into())]);
            g.add_vertex(["Author"], p).unwrap()
        })
        .collect();
    let works: Vec<_> = (0..5)
        .map(|i| {
            let p = props(&[("id", (100 + i as i64).into()), ("name", format!("W{i}").into())]);
            g.add_vertex(["Work"], p).unwrap()
        })
        .collect();
    for (w, a) in [(0, 0), (1, 1), (2, 2), (3, 3), (4, 0), (1, 3)] {
        g.add_edge(works[w], authors[a], "CREATED_BY", []).unwrap();
    }
    for (s, d) in [(0, 1), (1, 0), (2, 3), (4, 1), (0, 3), (3, 2)] {
        g.add_edge(works[s], works[d], "RELATED_TO", []).unwrap();
    }
    let list = Value::from;
    let t = &manifest.tables;
    let mut tables = BTreeMap::new();
    tables.insert(
        "publication_cited".to_string(),
        Relation::with_rows(
            "publication_cited",
            t[0].columns.clone(),
            vec![
                vec!["W0".into(), list("p1")],
                vec!["W1".into(), list("p2|p3")],
                vec!["W4".into(), list("p4")],
                vec!["W9".into(), list("p5")],
            ],
        )
        .unwrap(),
    );
    tables.insert(
        "inventors".to_string(),
        Relation::with_rows(
            "inventors",
            t[1].columns.clone(),
            vec![
                vec!["Ada".into(), list("p1|p2|p3")],
                vec!["Ben".into(), list("p2")],
                vec!["Di".into(), list("p3|p4|p5|p6")],
                vec!["Zed".into(), list("p7|p8|p9")],
            ],
        )
        .unwrap(),
    );
    Dataset::from_parts(manifest, g, tables).expect("fixture is consistent")
}
