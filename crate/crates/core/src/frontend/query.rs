//! Binding of a parsed graph query and relational query into one
//! cross-model join expression.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{
    schema_of, unit_name, AlgebraExpr, Atom, CmgrjParts, CmpOp, ExpandStep, Operand, Predicate, ProjCol, ProjItem,
};
use crate::datamodel::Catalog;
use crate::error::{Error, Result};
use crate::estimate::{join_size, predicate_selectivity};

use super::cypher::{parse_graph_query, GraphQueryAst, NodePattern};
use super::sql::{parse_sql, ColRef, SqlOperand, SqlQueryAst};

/// Name of the pseudo-table standing for the graph query result.
pub const GRAPH_RESULT: &str = "neo4j";

/// A connected group of SQL tables joined to the graph result.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryUnit {
    pub name: String,
    /// (binding, table) pairs in join order.
    pub members: Vec<(String, String)>,
    /// Filters, joins and projection over the member tables.
    pub expr: AlgebraExpr,
    /// (graph result column, unit column) pairs.
    pub on: Vec<(String, String)>,
    pub estimated_rows: f64,
}

impl QueryUnit {
    pub fn tables(&self) -> BTreeSet<String> {
        self.members.iter().map(|(_, t)| t.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmgrjQuery {
    pub graph_ast: GraphQueryAst,
    pub sql_ast: SqlQueryAst,
    /// Binding of the graph pseudo-table in the SQL text.
    pub graph_alias: String,
    /// `ω(items)(σ(pattern))` with columns named `<graph_alias>.<return alias>`.
    pub graph_part: AlgebraExpr,
    /// Vertex variable → label.
    pub var_labels: BTreeMap<String, String>,
    /// Sorted by name.
    pub units: Vec<QueryUnit>,
    /// Conditions evaluated after every join.
    pub residual: Predicate,
    /// `None` for `SELECT *`.
    pub projection: Option<Vec<ProjCol>>,
    /// Relational half over the `neo4j` pseudo-table.
    pub relational_part: AlgebraExpr,
    /// The whole query as one expression.
    pub raw_expr: AlgebraExpr,
    pub output_columns: Vec<String>,
}

impl CmgrjQuery {
    /// Names of the units a plan may move graph-side, sorted.
    pub fn joinable_units(&self) -> Vec<String> {
        self.units.iter().map(|u| u.name.clone()).collect()
    }

    pub fn unit(&self, name: &str) -> Option<&QueryUnit> {
        self.units.iter().find(|u| u.name == name)
    }

    pub fn parts(&self) -> Result<CmgrjParts> {
        CmgrjParts::decompose(&self.raw_expr)
    }

    /// Query text that parses back to the same expression.
    pub fn unparse(&self) -> String {
        format!("{};\n{}\n", self.graph_ast, self.sql_ast)
    }
}

/// Split a query file into its graph and relational halves at the first
/// `;` outside quotes.
pub fn split_query_file(text: &str) -> Result<(&str, &str)> {
    let mut quote = None;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None => match c {
                '\'' | '"' | '`' => quote = Some(c),
                ';' => return Ok((&text[..i], &text[i + 1..])),
                _ => {}
            },
        }
    }
    Err(Error::InvalidQuery(
        "query file needs a graph query, a `;`, then a relational query".into(),
    ))
}

pub fn parse_query_file(text: &str, cat: &Catalog) -> Result<CmgrjQuery> {
    let (g, s) = split_query_file(text)?;
    parse_cmgrj(g, s, cat)
}

pub fn parse_cmgrj(graph_text: &str, sql_text: &str, cat: &Catalog) -> Result<CmgrjQuery> {
    let graph_ast = parse_graph_query(graph_text)?;
    let sql_ast = parse_sql(sql_text)?;
    bind(graph_ast, sql_ast, cat)
}

struct GraphSide {
    pattern: AlgebraExpr,
    var_labels: BTreeMap<String, String>,
}

fn bind_node(
    node: &NodePattern,
    anon: &mut usize,
    labels: &mut BTreeMap<String, String>,
    cat: &Catalog,
) -> Result<String> {
    let var = match &node.var {
        Some(v) => v.clone(),
        None => {
            *anon += 1;
            format!("__n{anon}")
        }
    };
    match (&node.label, labels.get(&var)) {
        (Some(l), Some(prev)) if l != prev => {
            return Err(Error::InvalidQuery(format!("variable `{var}` has labels `{prev}` and `{l}`")))
        }
        (Some(l), None) => {
            if !cat.has_label(l) {
                return Err(Error::UnknownLabel(l.clone()));
            }
            labels.insert(var.clone(), l.clone());
        }
        (None, None) => {
            return Err(Error::InvalidQuery(format!(
                "variable `{var}` needs a label where it first appears"
            )))
        }
        _ => {}
    }
    Ok(var)
}

fn check_prop(var: &str, prop: &str, labels: &BTreeMap<String, String>, cat: &Catalog) -> Result<()> {
    let label = labels
        .get(var)
        .ok_or_else(|| Error::UnresolvedAttribute(format!("{var}.{prop}")))?;
    if cat.has_property(label, prop) {
        Ok(())
    } else {
        Err(Error::UnresolvedAttribute(format!("{var}.{prop}")))
    }
}

fn check_operand(o: &Operand, labels: &BTreeMap<String, String>, cat: &Catalog) -> Result<()> {
    match o {
        Operand::Prop { var, prop } => check_prop(var, prop, labels, cat),
        Operand::Card(inner) => check_operand(inner, labels, cat),
        _ => Ok(()),
    }
}

fn bind_graph(ast: &GraphQueryAst, cat: &Catalog) -> Result<(GraphSide, Vec<Atom>)> {
    let mut labels = BTreeMap::new();
    let mut anon = 0;
    let mut inline = Vec::new();
    let mut pattern: Option<AlgebraExpr> = None;
    for path in &ast.paths {
        let mut in_path = BTreeSet::new();
        let start_bound = path.start.var.as_ref().is_some_and(|v| labels.contains_key(v));
        let start = bind_node(&path.start, &mut anon, &mut labels, cat)?;
        let mut connected = pattern.is_none() || start_bound;
        in_path.insert(start.clone());
        let mut prev = start.clone();
        let mut e = AlgebraExpr::get_vertices(&start, &labels[&start]);
        let mut nodes = vec![(&path.start, start.clone())];
        for (rel, node) in &path.hops {
            let was_bound = node.var.as_ref().is_some_and(|v| labels.contains_key(v));
            let var = bind_node(node, &mut anon, &mut labels, cat)?;
            if !in_path.insert(var.clone()) {
                return Err(Error::InvalidQuery(format!(
                    "variable `{var}` repeats within one path; cyclic patterns are not supported"
                )));
            }
            connected |= was_bound;
            if !cat.edge_stats.contains_key(&rel.edge_type) {
                return Err(Error::InvalidQuery(format!("unknown relationship type `{}`", rel.edge_type)));
            }
            let step = ExpandStep {
                from: prev.clone(),
                to: var.clone(),
                to_label: labels[&var].clone(),
                edge_type: rel.edge_type.clone(),
                dir: rel.dir,
            };
            e = match rel.var_length {
                None => e.expand(step),
                Some(h) => e.var_expand(step, h.max),
            };
            nodes.push((node, var.clone()));
            prev = var;
        }
        if !connected {
            return Err(Error::InvalidQuery(
                "every MATCH path must share a variable with an earlier one".into(),
            ));
        }
        for (node, var) in nodes {
            for (k, v) in &node.props {
                check_prop(&var, k, &labels, cat)?;
                inline.push(Atom::new(Operand::prop(&var, k), CmpOp::Eq, Operand::Lit(v.clone())));
            }
        }
        pattern = Some(match pattern {
            None => e,
            Some(p) => AlgebraExpr::GraphJoin {
                left: Box::new(p),
                right: Box::new(e),
            },
        });
    }
    for a in &ast.conditions {
        check_operand(&a.lhs, &labels, cat)?;
        check_operand(&a.rhs, &labels, cat)?;
    }
    for r in &ast.returns {
        check_prop(&r.var, &r.prop, &labels, cat)?;
    }
    let mut atoms = inline;
    atoms.extend(ast.conditions.iter().cloned());
    Ok((
        GraphSide {
            pattern: pattern.expect("at least one path"),
            var_labels: labels,
        },
        atoms,
    ))
}

/// What an SQL column reference resolves to.
#[derive(Debug, Clone, PartialEq)]
enum Target {
    /// Qualified graph result column and the return item behind it.
    Graph { column: String, var: String, prop: String },
    /// Binding and qualified column.
    Table { binding: String, column: String },
}

struct Scope<'a> {
    graph_alias: String,
    returns: BTreeMap<String, (String, String)>,
    bindings: BTreeMap<String, String>,
    cat: &'a Catalog,
}

impl Scope<'_> {
    fn table_has(&self, binding: &str, column: &str) -> bool {
        self.bindings
            .get(binding)
            .and_then(|t| self.cat.table_columns(t))
            .is_some_and(|cols| cols.iter().any(|c| c.name == column))
    }

    fn graph_target(&self, column: &str) -> Option<Target> {
        self.returns.get(column).map(|(var, prop)| Target::Graph {
            column: format!("{}.{column}", self.graph_alias),
            var: var.clone(),
            prop: prop.clone(),
        })
    }

    fn resolve(&self, c: &ColRef) -> Result<Target> {
        let unresolved = || Error::UnresolvedAttribute(c.to_string());
        match &c.qualifier {
            Some(q) if *q == self.graph_alias => self.graph_target(&c.column).ok_or_else(unresolved),
            Some(q) => {
                if !self.bindings.contains_key(q) {
                    return Err(unresolved());
                }
                if !self.table_has(q, &c.column) {
                    return Err(unresolved());
                }
                Ok(Target::Table {
                    binding: q.clone(),
                    column: format!("{q}.{}", c.column),
                })
            }
            None => {
                let mut hits: Vec<Target> = self.graph_target(&c.column).into_iter().collect();
                for b in self.bindings.keys() {
                    if self.table_has(b, &c.column) {
                        hits.push(Target::Table {
                            binding: b.clone(),
                            column: format!("{b}.{}", c.column),
                        });
                    }
                }
                match hits.len() {
                    1 => Ok(hits.pop().unwrap()),
                    0 => Err(unresolved()),
                    _ => Err(Error::UnresolvedAttribute(format!("{} (ambiguous)", c.column))),
                }
            }
        }
    }
}

fn target_column(t: &Target) -> &str {
    match t {
        Target::Graph { column, .. } | Target::Table { column, .. } => column,
    }
}

/// A resolved SQL operand.
struct Side {
    operand: Operand,
    target: Option<Target>,
    plain: bool,
}

fn resolve_operand(o: &SqlOperand, scope: &Scope) -> Result<Side> {
    Ok(match o {
        SqlOperand::Lit(v) => Side {
            operand: Operand::Lit(v.clone()),
            target: None,
            plain: false,
        },
        SqlOperand::Col(c) => {
            let t = scope.resolve(c)?;
            Side {
                operand: Operand::col(target_column(&t)),
                target: Some(t),
                plain: true,
            }
        }
        SqlOperand::Card(c) => {
            let t = scope.resolve(c)?;
            Side {
                operand: Operand::Card(Box::new(Operand::col(target_column(&t)))),
                target: Some(t),
                plain: false,
            }
        }
    })
}

fn binding_of(s: &Side) -> Option<&str> {
    match &s.target {
        Some(Target::Table { binding, .. }) => Some(binding),
        _ => None,
    }
}

fn is_graph(s: &Side) -> bool {
    matches!(s.target, Some(Target::Graph { .. }))
}

fn bind(graph_ast: GraphQueryAst, sql_ast: SqlQueryAst, cat: &Catalog) -> Result<CmgrjQuery> {
    let (graph, graph_atoms) = bind_graph(&graph_ast, cat)?;

    let graph_items: Vec<_> = sql_ast.from.iter().filter(|f| f.table == GRAPH_RESULT).collect();
    if graph_items.len() != 1 {
        return Err(Error::InvalidQuery(format!(
            "the relational query must read `{GRAPH_RESULT}` exactly once"
        )));
    }
    let graph_alias = graph_items[0].binding().to_string();
    let mut bindings = BTreeMap::new();
    let mut seen = BTreeSet::from([graph_alias.clone()]);
    for f in sql_ast.from.iter().filter(|f| f.table != GRAPH_RESULT) {
        if cat.table_columns(&f.table).is_none() {
            return Err(Error::UnknownTable(f.table.clone()));
        }
        if !seen.insert(f.binding().to_string()) {
            return Err(Error::InvalidQuery(format!("`{}` is bound twice in FROM", f.binding())));
        }
        bindings.insert(f.binding().to_string(), f.table.clone());
    }

    let mut returns = BTreeMap::new();
    let mut items = Vec::new();
    for r in &graph_ast.returns {
        if returns.insert(r.alias.clone(), (r.var.clone(), r.prop.clone())).is_some() {
            return Err(Error::InvalidQuery(format!("RETURN alias `{}` is used twice", r.alias)));
        }
        items.push(ProjItem::prop(&r.var, &r.prop, format!("{graph_alias}.{}", r.alias)));
    }
    let graph_part = graph
        .pattern
        .clone()
        .graph_select(Predicate::new(graph_atoms))
        .graph_project(items);

    let scope = Scope {
        graph_alias: graph_alias.clone(),
        returns,
        bindings: bindings.clone(),
        cat,
    };

    let mut base_filters: BTreeMap<String, Vec<Atom>> = BTreeMap::new();
    let mut edges: Vec<(String, String, String, String)> = Vec::new();
    let mut graph_joins: Vec<(String, String, String, String)> = Vec::new();
    let mut cross: Vec<(BTreeSet<String>, Atom)> = Vec::new();
    let mut residual = Vec::new();
    for cond in &sql_ast.conditions {
        let l = resolve_operand(&cond.lhs, &scope)?;
        let r = resolve_operand(&cond.rhs, &scope)?;
        let atom = Atom::new(l.operand.clone(), cond.op, r.operand.clone());
        let tables: BTreeSet<String> = [binding_of(&l), binding_of(&r)].into_iter().flatten().map(String::from).collect();
        let touches_graph = is_graph(&l) || is_graph(&r);
        let equi = cond.op == CmpOp::Eq && l.plain && r.plain;
        if equi && touches_graph && tables.len() == 1 {
            let (g, t) = if is_graph(&l) { (&l, &r) } else { (&r, &l) };
            let Some(Target::Graph { column: gc, var, prop }) = &g.target else { unreachable!() };
            let Some(Target::Table { binding, column }) = &t.target else { unreachable!() };
            let label = &graph.var_labels[var];
            let table = &bindings[binding];
            let col = column.split_once('.').map(|(_, c)| c).unwrap_or(column);
            if cat.joinable(label, prop, table, col).is_none() {
                return Err(Error::NotJoinable(format!("{table}.{col} with {label}.{prop}")));
            }
            graph_joins.push((gc.clone(), var.clone(), binding.clone(), column.clone()));
        } else if touches_graph || tables.is_empty() {
            residual.push(atom);
        } else if tables.len() == 1 {
            base_filters.entry(tables.into_iter().next().unwrap()).or_default().push(atom);
        } else if equi {
            let (Some(bl), Some(br)) = (binding_of(&l), binding_of(&r)) else { unreachable!() };
            edges.push((
                bl.to_string(),
                target_column(l.target.as_ref().unwrap()).to_string(),
                br.to_string(),
                target_column(r.target.as_ref().unwrap()).to_string(),
            ));
        } else {
            cross.push((tables, atom));
        }
    }

    let mut projection = None;
    let mut output_columns = Vec::new();
    let mut needed: BTreeSet<String> = BTreeSet::new();
    if let Some(sel) = &sql_ast.select {
        let mut cols = Vec::new();
        for item in sel {
            let t = scope.resolve(&item.col)?;
            let col = target_column(&t).to_string();
            let alias = item.alias.clone().unwrap_or_else(|| col.clone());
            needed.insert(col.clone());
            output_columns.push(alias.clone());
            cols.push(ProjCol::new(col, alias));
        }
        projection = Some(cols);
    }
    for a in residual.iter().chain(cross.iter().map(|(_, a)| a)) {
        needed.extend(a.columns());
    }
    for (_, _, _, c) in &graph_joins {
        needed.insert(c.clone());
    }

    // Connected components of the table join graph.
    let mut component: BTreeMap<String, usize> = bindings.keys().enumerate().map(|(i, b)| (b.clone(), i)).collect();
    loop {
        let mut changed = false;
        for (a, _, b, _) in &edges {
            let (ca, cb) = (component[a], component[b]);
            if ca != cb {
                let m = ca.min(cb);
                component.insert(a.clone(), m);
                component.insert(b.clone(), m);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (b, c) in &component {
        groups.entry(*c).or_default().push(b.clone());
    }

    let distinct = |binding: &str, col: &str| -> Option<u64> {
        let table = bindings.get(binding)?;
        let bare = col.strip_prefix(&format!("{binding}.")).unwrap_or(col);
        cat.column_distinct(table, bare)
    };
    let mut units = Vec::new();
    for members in groups.into_values() {
        let member_set: BTreeSet<String> = members.iter().cloned().collect();
        let on: Vec<(String, String)> = graph_joins
            .iter()
            .filter(|(_, _, b, _)| member_set.contains(b))
            .map(|(g, _, _, c)| (g.clone(), c.clone()))
            .collect();
        if on.is_empty() {
            return Err(Error::InvalidQuery(format!(
                "table `{}` is not joined to the graph result",
                members.join("`, `")
            )));
        }
        let mut est: BTreeMap<String, f64> = BTreeMap::new();
        let mut scans: BTreeMap<String, AlgebraExpr> = BTreeMap::new();
        for b in &members {
            let table = &bindings[b];
            let filters = Predicate::new(base_filters.remove(b).unwrap_or_default());
            let sel = predicate_selectivity(&filters, &|o| match o {
                Operand::Col(c) => distinct(b, c),
                _ => None,
            });
            est.insert(b.clone(), cat.table_rowcount(table) as f64 * sel);
            scans.insert(b.clone(), AlgebraExpr::base_as(table, b).rel_select(filters));
        }
        let by_size = |a: &&String, b: &&String| est[*a].total_cmp(&est[*b]).then_with(|| a.cmp(b));
        let first = members.iter().min_by(by_size).unwrap().clone();
        let mut joined = vec![first.clone()];
        let mut expr = scans.remove(&first).unwrap();
        let mut size = est[&first];
        while joined.len() < members.len() {
            let adjacent = |m: &String| {
                edges.iter().any(|(a, _, b, _)| {
                    (a == m && joined.contains(b)) || (b == m && joined.contains(a))
                })
            };
            let next = members
                .iter()
                .filter(|m| !joined.contains(m) && adjacent(m))
                .min_by(by_size)
                .unwrap()
                .clone();
            let mut pairs = Vec::new();
            let (mut dl, mut dr) = (None, None);
            for (a, ca, b, cb) in &edges {
                if *b == next && joined.contains(a) {
                    pairs.push((ca.clone(), cb.clone()));
                    dl = dl.or(distinct(a, ca));
                    dr = dr.or(distinct(b, cb));
                } else if *a == next && joined.contains(b) {
                    pairs.push((cb.clone(), ca.clone()));
                    dl = dl.or(distinct(b, cb));
                    dr = dr.or(distinct(a, ca));
                }
            }
            size = join_size(size, est[&next], dl, dr);
            expr = expr.rel_join(scans.remove(&next).unwrap(), pairs);
            joined.push(next);
        }
        let unit_filters: Vec<Atom> = {
            let (inside, outside): (Vec<_>, Vec<_>) =
                std::mem::take(&mut cross).into_iter().partition(|(t, _)| t.is_subset(&member_set));
            cross = outside;
            inside.into_iter().map(|(_, a)| a).collect()
        };
        let filters = Predicate::new(unit_filters);
        size *= predicate_selectivity(&filters, &|_| None);
        expr = expr.rel_select(filters);
        if sql_ast.select.is_some() {
            let schema = schema_of(&expr, cat)?;
            let keep: Vec<ProjCol> = schema
                .iter()
                .filter(|a| needed.contains(&a.name))
                .map(|a| ProjCol::keep(&a.name))
                .collect();
            expr = expr.rel_project(keep);
        }
        let name = unit_name(&expr, &on);
        let members = joined.into_iter().map(|b| {
            let t = bindings[&b].clone();
            (b, t)
        });
        units.push(QueryUnit {
            name,
            members: members.collect(),
            expr,
            on,
            estimated_rows: size,
        });
    }
    residual.extend(cross.into_iter().map(|(_, a)| a));
    units.sort_by(|a, b| a.name.cmp(&b.name));

    let residual = Predicate::new(residual);
    let mut raw = graph_part.clone().gr_join(units.first().map(|u| u.expr.clone()), units.first().map(|u| u.on.clone()).unwrap_or_default());
    let mut relational = AlgebraExpr::base(GRAPH_RESULT);
    for (i, u) in units.iter().enumerate() {
        if i > 0 {
            raw = raw.rel_join(u.expr.clone(), u.on.clone());
        }
        relational = relational.rel_join(u.expr.clone(), u.on.clone());
    }
    raw = raw.rel_select(residual.clone());
    relational = relational.rel_select(residual.clone());
    if let Some(cols) = &projection {
        raw = raw.rel_project(cols.clone());
        relational = relational.rel_project(cols.clone());
    } else {
        let graph_cols = graph_ast.returns.iter().map(|r| format!("{graph_alias}.{}", r.alias));
        output_columns = graph_cols.collect();
        for u in &units {
            output_columns.extend(schema_of(&u.expr, cat)?.into_iter().map(|a| a.name));
        }
    }

    Ok(CmgrjQuery {
        graph_ast,
        sql_ast,
        graph_alias,
        graph_part,
        var_labels: graph.var_labels,
        units,
        residual,
        projection,
        relational_part: relational,
        raw_expr: raw,
        output_columns,
    })
}
