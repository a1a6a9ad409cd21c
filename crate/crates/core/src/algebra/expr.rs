use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::predicate::Predicate;
use crate::datamodel::{Attr, AttrKind, Catalog, Direction, Relation};
use crate::error::{Error, Result};

/// One hop of a path pattern: from the bound vertex `from` along edges of
/// type `edge_type` in direction `dir` to a vertex `to` labelled `to_label`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExpandStep {
    pub from: String,
    pub to: String,
    pub to_label: String,
    pub edge_type: String,
    pub dir: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjSource {
    /// `var.prop`, producing a value attribute.
    Prop { var: String, prop: String },
    /// An existing attribute passed through with its kind.
    Attr(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjItem {
    pub source: ProjSource,
    pub alias: String,
}

impl ProjItem {
    pub fn prop(var: impl Into<String>, prop: impl Into<String>, alias: impl Into<String>) -> Self {
        ProjItem {
            source: ProjSource::Prop {
                var: var.into(),
                prop: prop.into(),
            },
            alias: alias.into(),
        }
    }

    pub fn attr(name: impl Into<String>) -> Self {
        let name = name.into();
        ProjItem {
            source: ProjSource::Attr(name.clone()),
            alias: name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjCol {
    pub column: String,
    pub alias: String,
}

impl ProjCol {
    pub fn new(column: impl Into<String>, alias: impl Into<String>) -> Self {
        ProjCol {
            column: column.into(),
            alias: alias.into(),
        }
    }

    pub fn keep(column: impl Into<String>) -> Self {
        let c = column.into();
        ProjCol {
            column: c.clone(),
            alias: c,
        }
    }
}

/// Match condition of a relation-graph join: the table column `column`
/// equals property `prop` of the vertex bound to `var`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RgKey {
    pub column: String,
    pub var: String,
    pub prop: String,
}

/// Tree IR over relational, graph and cross-model operators.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgebraExpr {
    /// A stored table. With an alias every column is renamed `alias.col`.
    BaseRelation { name: String, alias: Option<String> },
    RelSelect { input: Box<AlgebraExpr>, pred: Predicate },
    RelProject { input: Box<AlgebraExpr>, columns: Vec<ProjCol> },
    /// Equi-join on the listed (left, right) pairs plus every common column.
    RelJoin {
        left: Box<AlgebraExpr>,
        right: Box<AlgebraExpr>,
        on: Vec<(String, String)>,
    },
    GetVertices { var: String, label: String },
    Expand { input: Box<AlgebraExpr>, step: ExpandStep },
    /// One or more hops; at most `max_hops` when bounded.
    VarExpand {
        input: Box<AlgebraExpr>,
        step: ExpandStep,
        max_hops: Option<u32>,
    },
    GraphSelect { input: Box<AlgebraExpr>, pred: Predicate },
    GraphProject { input: Box<AlgebraExpr>, items: Vec<ProjItem> },
    GraphJoin { left: Box<AlgebraExpr>, right: Box<AlgebraExpr> },
    /// Relation-graph join: rows of `table` become vertices labelled
    /// `temp_label` and join `graph` on the key properties.
    RgJoin {
        table: Box<AlgebraExpr>,
        graph: Box<AlgebraExpr>,
        on: Vec<RgKey>,
        temp_label: String,
    },
    /// Graph-relation join: materialize `graph`, then join with `table`
    /// on (graph column, table column) pairs. Without a table this is the
    /// bare materialization.
    GrJoin {
        graph: Box<AlgebraExpr>,
        table: Option<Box<AlgebraExpr>>,
        on: Vec<(String, String)>,
    },
}

/// Reserved prefix of relation-graph join labels.
pub const TEMP_LABEL_PREFIX: &str = "__tmp_";

pub fn temp_label(table: &str, counter: usize) -> String {
    format!("{TEMP_LABEL_PREFIX}{table}_{counter}")
}

/// Source of stored table column names for schema computation.
pub trait TableSchemas {
    fn table_columns(&self, table: &str) -> Option<Vec<String>>;
}

impl TableSchemas for BTreeMap<String, Relation> {
    fn table_columns(&self, table: &str) -> Option<Vec<String>> {
        self.get(table).map(Relation::column_names)
    }
}

impl TableSchemas for Catalog {
    fn table_columns(&self, table: &str) -> Option<Vec<String>> {
        Catalog::table_columns(self, table).map(|cs| cs.iter().map(|c| c.name.clone()).collect())
    }
}

impl AlgebraExpr {
    pub fn base(name: impl Into<String>) -> Self {
        AlgebraExpr::BaseRelation {
            name: name.into(),
            alias: None,
        }
    }

    pub fn base_as(name: impl Into<String>, alias: impl Into<String>) -> Self {
        AlgebraExpr::BaseRelation {
            name: name.into(),
            alias: Some(alias.into()),
        }
    }

    pub fn get_vertices(var: impl Into<String>, label: impl Into<String>) -> Self {
        AlgebraExpr::GetVertices {
            var: var.into(),
            label: label.into(),
        }
    }

    pub fn expand(self, step: ExpandStep) -> Self {
        AlgebraExpr::Expand {
            input: Box::new(self),
            step,
        }
    }

    pub fn var_expand(self, step: ExpandStep, max_hops: Option<u32>) -> Self {
        AlgebraExpr::VarExpand {
            input: Box::new(self),
            step,
            max_hops,
        }
    }

    pub fn graph_select(self, pred: Predicate) -> Self {
        if pred.is_true() {
            return self;
        }
        AlgebraExpr::GraphSelect {
            input: Box::new(self),
            pred,
        }
    }

    pub fn graph_project(self, items: Vec<ProjItem>) -> Self {
        AlgebraExpr::GraphProject {
            input: Box::new(self),
            items,
        }
    }

    pub fn rel_select(self, pred: Predicate) -> Self {
        if pred.is_true() {
            return self;
        }
        AlgebraExpr::RelSelect {
            input: Box::new(self),
            pred,
        }
    }

    pub fn rel_project(self, columns: Vec<ProjCol>) -> Self {
        AlgebraExpr::RelProject {
            input: Box::new(self),
            columns,
        }
    }

    pub fn rel_join(self, right: AlgebraExpr, on: Vec<(String, String)>) -> Self {
        AlgebraExpr::RelJoin {
            left: Box::new(self),
            right: Box::new(right),
            on,
        }
    }

    pub fn gr_join(self, table: Option<AlgebraExpr>, on: Vec<(String, String)>) -> Self {
        AlgebraExpr::GrJoin {
            graph: Box::new(self),
            table: table.map(Box::new),
            on,
        }
    }

    /// True when the node yields a graph relation.
    pub fn is_graph(&self) -> bool {
        matches!(
            self,
            AlgebraExpr::GetVertices { .. }
                | AlgebraExpr::Expand { .. }
                | AlgebraExpr::VarExpand { .. }
                | AlgebraExpr::GraphSelect { .. }
                | AlgebraExpr::GraphProject { .. }
                | AlgebraExpr::GraphJoin { .. }
                | AlgebraExpr::RgJoin { .. }
        )
    }

    pub fn children(&self) -> Vec<&AlgebraExpr> {
        use AlgebraExpr::*;
        match self {
            BaseRelation { .. } | GetVertices { .. } => vec![],
            RelSelect { input, .. }
            | RelProject { input, .. }
            | Expand { input, .. }
            | VarExpand { input, .. }
            | GraphSelect { input, .. }
            | GraphProject { input, .. } => vec![input],
            RelJoin { left, right, .. } | GraphJoin { left, right } => vec![left, right],
            RgJoin { table, graph, .. } => vec![table, graph],
            GrJoin { graph, table, .. } => {
                let mut v: Vec<&AlgebraExpr> = vec![graph];
                if let Some(t) = table {
                    v.push(t);
                }
                v
            }
        }
    }

    /// Stored tables read anywhere in the tree.
    pub fn base_tables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let AlgebraExpr::BaseRelation { name, .. } = e {
                out.insert(name.clone());
            }
        });
        out
    }

    /// Vertex labels scanned or expanded to anywhere in the tree.
    pub fn labels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| match e {
            AlgebraExpr::GetVertices { label, .. } => {
                out.insert(label.clone());
            }
            AlgebraExpr::Expand { step, .. } | AlgebraExpr::VarExpand { step, .. } => {
                out.insert(step.to_label.clone());
            }
            _ => {}
        });
        out
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a AlgebraExpr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

/// Output schema computed bottom-up.
pub fn schema_of(expr: &AlgebraExpr, tables: &dyn TableSchemas) -> Result<Vec<Attr>> {
    use AlgebraExpr::*;
    match expr {
        BaseRelation { name, alias } => {
            let cols = tables
                .table_columns(name)
                .ok_or_else(|| Error::UnknownTable(name.clone()))?;
            Ok(cols
                .into_iter()
                .map(|c| Attr::value(qualify(alias.as_deref(), &c)))
                .collect())
        }
        RelSelect { input, pred } => {
            let s = relational_schema(input, tables)?;
            for c in pred.columns() {
                find(&s, &c)?;
            }
            if let Some(v) = pred.vars().into_iter().next() {
                return Err(Error::IllFormed(format!("property access `{v}.*` in a relational selection")));
            }
            Ok(s)
        }
        RelProject { input, columns } => {
            let s = relational_schema(input, tables)?;
            let mut out = Vec::with_capacity(columns.len());
            for c in columns {
                find(&s, &c.column)?;
                out.push(Attr::value(c.alias.clone()));
            }
            check_unique(&out)?;
            Ok(out)
        }
        RelJoin { left, right, on } => {
            let l = relational_schema(left, tables)?;
            let r = relational_schema(right, tables)?;
            for (a, b) in on {
                find(&l, a)?;
                find(&r, b)?;
            }
            Ok(concat_new(l, r))
        }
        GetVertices { var, .. } => Ok(vec![Attr::vertex(var.clone())]),
        Expand { input, step } | VarExpand { input, step, .. } => {
            let mut s = graph_schema(input, tables)?;
            let from = find(&s, &step.from)?;
            if s[from].kind != AttrKind::Vertex {
                return Err(Error::IllFormed(format!("expansion from non-vertex attribute `{}`", step.from)));
            }
            match s.iter().find(|a| a.name == step.to) {
                Some(a) if a.kind == AttrKind::Vertex => {}
                Some(_) => {
                    return Err(Error::IllFormed(format!("expansion into non-vertex attribute `{}`", step.to)));
                }
                None => s.push(Attr::vertex(step.to.clone())),
            }
            Ok(s)
        }
        GraphSelect { input, pred } => {
            let s = graph_schema(input, tables)?;
            for c in pred.columns() {
                let i = find(&s, &c)?;
                if s[i].kind != AttrKind::Value {
                    return Err(Error::TypeMismatch(format!("comparison on non-value attribute `{c}`")));
                }
            }
            for v in pred.vars() {
                vertex_attr(&s, &v)?;
            }
            Ok(s)
        }
        GraphProject { input, items } => {
            let s = graph_schema(input, tables)?;
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match &item.source {
                    ProjSource::Prop { var, .. } => {
                        vertex_attr(&s, var)?;
                        out.push(Attr::value(item.alias.clone()));
                    }
                    ProjSource::Attr(name) => {
                        let i = find(&s, name)?;
                        out.push(Attr {
                            name: item.alias.clone(),
                            kind: s[i].kind,
                        });
                    }
                }
            }
            check_unique(&out)?;
            Ok(out)
        }
        GraphJoin { left, right } => {
            let l = graph_schema(left, tables)?;
            let r = graph_schema(right, tables)?;
            for a in &r {
                if let Some(b) = l.iter().find(|b| b.name == a.name) {
                    if a.kind != b.kind {
                        return Err(Error::TypeMismatch(format!("join attribute `{}` differs in kind", a.name)));
                    }
                }
            }
            Ok(concat_new(l, r))
        }
        RgJoin { table, graph, on, .. } => {
            let t = relational_schema(table, tables)?;
            let g = graph_schema(graph, tables)?;
            for k in on {
                find(&t, &k.column)?;
                vertex_attr(&g, &k.var)?;
            }
            if let Some(a) = g.iter().find(|a| t.iter().any(|b| b.name == a.name)) {
                return Err(Error::IllFormed(format!(
                    "relation-graph join inputs share attribute `{}`",
                    a.name
                )));
            }
            Ok(concat_new(t, g))
        }
        GrJoin { graph, table, on } => {
            let g: Vec<Attr> = graph_schema(graph, tables)?
                .into_iter()
                .map(|a| Attr::value(a.name))
                .collect();
            match table {
                None => Ok(g),
                Some(t) => {
                    let r = relational_schema(t, tables)?;
                    for (a, b) in on {
                        find(&g, a)?;
                        find(&r, b)?;
                    }
                    Ok(concat_new(g, r))
                }
            }
        }
    }
}

pub(crate) fn qualify(alias: Option<&str>, column: &str) -> String {
    match alias {
        Some(a) => format!("{a}.{column}"),
        None => column.to_string(),
    }
}

fn relational_schema(e: &AlgebraExpr, tables: &dyn TableSchemas) -> Result<Vec<Attr>> {
    if e.is_graph() {
        return Err(Error::IllFormed("relational operator over a graph relation".into()));
    }
    schema_of(e, tables)
}

fn graph_schema(e: &AlgebraExpr, tables: &dyn TableSchemas) -> Result<Vec<Attr>> {
    if !e.is_graph() {
        return Err(Error::IllFormed("graph operator over a relation".into()));
    }
    schema_of(e, tables)
}

fn find(s: &[Attr], name: &str) -> Result<usize> {
    s.iter()
        .position(|a| a.name == name)
        .ok_or_else(|| Error::UnresolvedAttribute(name.to_string()))
}

fn vertex_attr(s: &[Attr], var: &str) -> Result<usize> {
    let i = find(s, var)?;
    if s[i].kind != AttrKind::Vertex {
        return Err(Error::TypeMismatch(format!("`{var}` is not a vertex attribute")));
    }
    Ok(i)
}

fn check_unique(s: &[Attr]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for a in s {
        if !seen.insert(&a.name) {
            return Err(Error::IllFormed(format!("duplicate output attribute `{}`", a.name)));
        }
    }
    Ok(())
}

/// `l ∥ (r ∖ l)` by attribute name.
fn concat_new(mut l: Vec<Attr>, r: Vec<Attr>) -> Vec<Attr> {
    for a in r {
        if !l.iter().any(|b| b.name == a.name) {
            l.push(a);
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up(from: &str, to: &str, label: &str) -> ExpandStep {
        ExpandStep {
            from: from.into(),
            to: to.into(),
            to_label: label.into(),
            edge_type: "E".into(),
            dir: Direction::Out,
        }
    }

    #[test]
    fn chain_schema_appends_in_expansion_order() {
        let p = AlgebraExpr::get_vertices("n4", "Forum")
            .expand(up("n4", "n1", "Post"))
            .expand(up("n1", "n2", "Person"))
            .expand(up("n2", "n3", "University"));
        let s = schema_of(&p, &BTreeMap::<String, Relation>::new()).unwrap();
        let names: Vec<_> = s.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["n4", "n1", "n2", "n3"]);
        assert!(s.iter().all(|a| a.kind == AttrKind::Vertex));
    }

    #[test]
    fn relational_operator_over_graph_is_ill_formed() {
        let e = AlgebraExpr::get_vertices("v", "L").rel_project(vec![ProjCol::keep("v")]);
        assert!(matches!(
            schema_of(&e, &BTreeMap::<String, Relation>::new()),
            Err(Error::IllFormed(_))
        ));
    }
}
