//! Canonical s-expression text form of [`AlgebraExpr`].
//!
//! ```text
//! (gr-join
//!   (graph-project (vertices f Forum) (items (prop f name g.fname)))
//!   (base P P)
//!   (on (g.pid P.id)))
//! ```
//!
//! Names are bare atoms unless they contain whitespace, parentheses, quotes
//! or bars, in which case they are written `|like this|`. `_` stands for an
//! absent alias, table or hop bound.

use std::fmt::Write as _;

use super::expr::{AlgebraExpr, ExpandStep, ProjCol, ProjItem, ProjSource, RgKey};
use super::predicate::{Atom, CmpOp, Operand, Predicate};
use crate::datamodel::{Direction, Value};
use crate::error::{Error, Result};

/// Operator keyword of the node.
pub fn head(e: &AlgebraExpr) -> &'static str {
    use AlgebraExpr::*;
    match e {
        BaseRelation { .. } => "base",
        RelSelect { .. } => "rel-select",
        RelProject { .. } => "rel-project",
        RelJoin { .. } => "rel-join",
        GetVertices { .. } => "vertices",
        Expand { .. } => "expand",
        VarExpand { .. } => "var-expand",
        GraphSelect { .. } => "graph-select",
        GraphProject { .. } => "graph-project",
        GraphJoin { .. } => "graph-join",
        RgJoin { .. } => "rg-join",
        GrJoin { .. } => "gr-join",
    }
}

/// Render on one line.
pub fn to_sexpr(e: &AlgebraExpr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, None);
    out
}

/// Render with one operator per line, indented by depth.
pub fn to_sexpr_pretty(e: &AlgebraExpr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, Some(0));
    out
}

fn name(s: &str) -> String {
    let plain = !s.is_empty()
        && s != "_"
        && s
            .chars()
            .all(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | '"' | '|'));
    if plain {
        s.to_string()
    } else {
        format!("|{}|", s.replace('\\', "\\\\").replace('|', "\\|"))
    }
}

fn opt_name(s: Option<&str>) -> String {
    s.map(name).unwrap_or_else(|| "_".into())
}

fn value(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format!("{f:?}"),
        Value::Str(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
    }
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Col(c) => format!("(col {})", name(c)),
        Operand::Prop { var, prop } => format!("(prop {} {})", name(var), name(prop)),
        Operand::Lit(v) => format!("(lit {})", value(v)),
        Operand::Card(inner) => format!("(card {})", operand(inner)),
    }
}

fn predicate(p: &Predicate) -> String {
    let mut s = String::from("(and");
    for a in &p.atoms {
        let _ = write!(s, " ({} {} {})", a.op.symbol(), operand(&a.lhs), operand(&a.rhs));
    }
    s.push(')');
    s
}

fn dir(d: Direction) -> &'static str {
    match d {
        Direction::Out => "out",
        Direction::In => "in",
    }
}

fn step(s: &ExpandStep) -> String {
    format!(
        "{} {} {} {} {}",
        dir(s.dir),
        name(&s.from),
        name(&s.to),
        name(&s.to_label),
        name(&s.edge_type)
    )
}

fn pairs(on: &[(String, String)]) -> String {
    let mut s = String::from("(on");
    for (a, b) in on {
        let _ = write!(s, " ({} {})", name(a), name(b));
    }
    s.push(')');
    s
}

fn write_expr(out: &mut String, e: &AlgebraExpr, indent: Option<usize>) {
    use AlgebraExpr::*;
    let child_indent = indent.map(|i| i + 1);
    let sep = |out: &mut String| match child_indent {
        Some(i) => {
            out.push('\n');
            out.push_str(&"  ".repeat(i));
        }
        None => out.push(' '),
    };
    out.push('(');
    out.push_str(head(e));
    match e {
        BaseRelation { name: n, alias } => {
            let _ = write!(out, " {} {}", name(n), opt_name(alias.as_deref()));
        }
        GetVertices { var, label } => {
            let _ = write!(out, " {} {}", name(var), name(label));
        }
        RelSelect { input, pred } | GraphSelect { input, pred } => {
            sep(out);
            write_expr(out, input, child_indent);
            sep(out);
            out.push_str(&predicate(pred));
        }
        RelProject { input, columns } => {
            sep(out);
            write_expr(out, input, child_indent);
            sep(out);
            out.push_str("(cols");
            for c in columns {
                let _ = write!(out, " ({} {})", name(&c.column), name(&c.alias));
            }
            out.push(')');
        }
        RelJoin { left, right, on } => {
            sep(out);
            write_expr(out, left, child_indent);
            sep(out);
            write_expr(out, right, child_indent);
            sep(out);
            out.push_str(&pairs(on));
        }
        Expand { input, step: s } => {
            let _ = write!(out, " {}", step(s));
            sep(out);
            write_expr(out, input, child_indent);
        }
        VarExpand { input, step: s, max_hops } => {
            let hops = max_hops.map(|m| m.to_string()).unwrap_or_else(|| "_".into());
            let _ = write!(out, " {} {}", step(s), hops);
            sep(out);
            write_expr(out, input, child_indent);
        }
        GraphProject { input, items } => {
            sep(out);
            write_expr(out, input, child_indent);
            sep(out);
            out.push_str("(items");
            for it in items {
                match &it.source {
                    ProjSource::Prop { var, prop } => {
                        let _ = write!(out, " (prop {} {} {})", name(var), name(prop), name(&it.alias));
                    }
                    ProjSource::Attr(a) => {
                        let _ = write!(out, " (attr {} {})", name(a), name(&it.alias));
                    }
                }
            }
            out.push(')');
        }
        GraphJoin { left, right } => {
            sep(out);
            write_expr(out, left, child_indent);
            sep(out);
            write_expr(out, right, child_indent);
        }
        RgJoin {
            table,
            graph,
            on,
            temp_label,
        } => {
            let _ = write!(out, " {}", name(temp_label));
            sep(out);
            write_expr(out, table, child_indent);
            sep(out);
            write_expr(out, graph, child_indent);
            sep(out);
            out.push_str("(on");
            for k in on {
                let _ = write!(out, " ({} {} {})", name(&k.column), name(&k.var), name(&k.prop));
            }
            out.push(')');
        }
        GrJoin { graph, table, on } => {
            sep(out);
            write_expr(out, graph, child_indent);
            sep(out);
            match table {
                Some(t) => write_expr(out, t, child_indent),
                None => out.push('_'),
            }
            sep(out);
            out.push_str(&pairs(on));
        }
    }
    out.push(')');
}

#[derive(Debug, Clone, PartialEq)]
enum Sx {
    List(Vec<Sx>),
    Atom(String),
    Quoted(String),
    Str(String),
}

fn syntax(pos: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        line: 1,
        column: pos + 1,
        message: msg.into(),
    }
}

fn read_escaped(chars: &[char], mut i: usize, close: char) -> Result<(String, usize)> {
    let start = i;
    let mut s = String::new();
    while i < chars.len() {
        match chars[i] {
            '\\' if i + 1 < chars.len() => {
                s.push(chars[i + 1]);
                i += 2;
            }
            c if c == close => return Ok((s, i + 1)),
            c => {
                s.push(c);
                i += 1;
            }
        }
    }
    Err(syntax(start, "unterminated quoted token"))
}

fn read_sx(text: &str) -> Result<Sx> {
    let chars: Vec<char> = text.chars().collect();
    let mut stack: Vec<Vec<Sx>> = Vec::new();
    let mut done: Option<Sx> = None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let token = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => {
                stack.push(Vec::new());
                i += 1;
                continue;
            }
            ')' => {
                let list = stack.pop().ok_or_else(|| syntax(i, "unbalanced `)`"))?;
                i += 1;
                Sx::List(list)
            }
            '"' => {
                let (s, next) = read_escaped(&chars, i + 1, '"')?;
                i = next;
                Sx::Str(s)
            }
            '|' => {
                let (s, next) = read_escaped(&chars, i + 1, '|')?;
                i = next;
                Sx::Quoted(s)
            }
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '(' | ')' | '"' | '|') {
                    i += 1;
                }
                Sx::Atom(chars[start..i].iter().collect())
            }
        };
        match stack.last_mut() {
            Some(top) => top.push(token),
            None if done.is_none() => done = Some(token),
            None => return Err(syntax(i, "trailing input after expression")),
        }
    }
    if !stack.is_empty() {
        return Err(syntax(chars.len(), "unbalanced `(`"));
    }
    done.ok_or_else(|| syntax(0, "empty input"))
}

fn ill(msg: impl Into<String>) -> Error {
    Error::IllFormed(msg.into())
}

impl Sx {
    fn list(&self) -> Result<&[Sx]> {
        match self {
            Sx::List(v) => Ok(v),
            other => Err(ill(format!("expected a list, found {other:?}"))),
        }
    }

    fn name(&self) -> Result<String> {
        match self {
            Sx::Atom(a) if a != "_" => Ok(a.clone()),
            Sx::Quoted(q) => Ok(q.clone()),
            other => Err(ill(format!("expected a name, found {other:?}"))),
        }
    }

    fn opt_name(&self) -> Result<Option<String>> {
        match self {
            Sx::Atom(a) if a == "_" => Ok(None),
            other => other.name().map(Some),
        }
    }

    fn tagged(&self, tag: &str) -> Result<&[Sx]> {
        let l = self.list()?;
        match l.first() {
            Some(Sx::Atom(a)) if a == tag => Ok(&l[1..]),
            _ => Err(ill(format!("expected ({tag} …)"))),
        }
    }
}

fn arity(args: &[Sx], n: usize, what: &str) -> Result<()> {
    if args.len() != n {
        return Err(ill(format!("{what} takes {n} arguments, found {}", args.len())));
    }
    Ok(())
}

fn parse_value(sx: &Sx) -> Result<Value> {
    match sx {
        Sx::Str(s) => Ok(Value::Str(s.clone())),
        Sx::Atom(a) => match a.as_str() {
            "null" => Ok(Value::Null),
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ if a.contains(['.', 'e', 'E', 'N', 'i']) => {
                a.parse::<f64>().map(Value::Float).map_err(|_| ill(format!("bad literal {a}")))
            }
            _ => a.parse::<i64>().map(Value::Int).map_err(|_| ill(format!("bad literal {a}"))),
        },
        other => Err(ill(format!("bad literal {other:?}"))),
    }
}

fn parse_operand(sx: &Sx) -> Result<Operand> {
    let l = sx.list()?;
    let Some(Sx::Atom(tag)) = l.first() else {
        return Err(ill("operand must be tagged"));
    };
    let args = &l[1..];
    match tag.as_str() {
        "col" => {
            arity(args, 1, "col")?;
            Ok(Operand::Col(args[0].name()?))
        }
        "prop" => {
            arity(args, 2, "prop")?;
            Ok(Operand::Prop {
                var: args[0].name()?,
                prop: args[1].name()?,
            })
        }
        "lit" => {
            arity(args, 1, "lit")?;
            Ok(Operand::Lit(parse_value(&args[0])?))
        }
        "card" => {
            arity(args, 1, "card")?;
            Ok(Operand::Card(Box::new(parse_operand(&args[0])?)))
        }
        other => Err(ill(format!("unknown operand `{other}`"))),
    }
}

fn parse_predicate(sx: &Sx) -> Result<Predicate> {
    let atoms = sx
        .tagged("and")?
        .iter()
        .map(|a| {
            let l = a.list()?;
            arity(l, 3, "comparison")?;
            let Sx::Atom(sym) = &l[0] else {
                return Err(ill("comparison operator must be an atom"));
            };
            let op = CmpOp::from_symbol(sym).ok_or_else(|| ill(format!("unknown comparator {sym}")))?;
            Ok(Atom::new(parse_operand(&l[1])?, op, parse_operand(&l[2])?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Predicate::new(atoms))
}

fn parse_pairs(sx: &Sx) -> Result<Vec<(String, String)>> {
    sx.tagged("on")?
        .iter()
        .map(|p| {
            let l = p.list()?;
            arity(l, 2, "join pair")?;
            Ok((l[0].name()?, l[1].name()?))
        })
        .collect()
}

fn parse_dir(sx: &Sx) -> Result<Direction> {
    match sx {
        Sx::Atom(a) if a == "out" => Ok(Direction::Out),
        Sx::Atom(a) if a == "in" => Ok(Direction::In),
        other => Err(ill(format!("expected out|in, found {other:?}"))),
    }
}

fn parse_step(args: &[Sx]) -> Result<ExpandStep> {
    Ok(ExpandStep {
        dir: parse_dir(&args[0])?,
        from: args[1].name()?,
        to: args[2].name()?,
        to_label: args[3].name()?,
        edge_type: args[4].name()?,
    })
}

fn parse_expr(sx: &Sx) -> Result<AlgebraExpr> {
    use AlgebraExpr::*;
    let l = sx.list()?;
    let Some(Sx::Atom(tag)) = l.first() else {
        return Err(ill("expression must start with an operator keyword"));
    };
    let a = &l[1..];
    let b = |x: &Sx| parse_expr(x).map(Box::new);
    Ok(match tag.as_str() {
        "base" => {
            arity(a, 2, "base")?;
            BaseRelation {
                name: a[0].name()?,
                alias: a[1].opt_name()?,
            }
        }
        "rel-select" => {
            arity(a, 2, "rel-select")?;
            RelSelect {
                input: b(&a[0])?,
                pred: parse_predicate(&a[1])?,
            }
        }
        "graph-select" => {
            arity(a, 2, "graph-select")?;
            GraphSelect {
                input: b(&a[0])?,
                pred: parse_predicate(&a[1])?,
            }
        }
        "rel-project" => {
            arity(a, 2, "rel-project")?;
            let columns = a[1]
                .tagged("cols")?
                .iter()
                .map(|c| {
                    let l = c.list()?;
                    arity(l, 2, "column")?;
                    Ok(ProjCol::new(l[0].name()?, l[1].name()?))
                })
                .collect::<Result<Vec<_>>>()?;
            RelProject {
                input: b(&a[0])?,
                columns,
            }
        }
        "rel-join" => {
            arity(a, 3, "rel-join")?;
            RelJoin {
                left: b(&a[0])?,
                right: b(&a[1])?,
                on: parse_pairs(&a[2])?,
            }
        }
        "vertices" => {
            arity(a, 2, "vertices")?;
            GetVertices {
                var: a[0].name()?,
                label: a[1].name()?,
            }
        }
        "expand" => {
            arity(a, 6, "expand")?;
            Expand {
                step: parse_step(&a[..5])?,
                input: b(&a[5])?,
            }
        }
        "var-expand" => {
            arity(a, 7, "var-expand")?;
            let max_hops = match &a[5] {
                Sx::Atom(h) if h == "_" => None,
                Sx::Atom(h) => Some(h.parse::<u32>().map_err(|_| ill(format!("bad hop bound {h}")))?),
                other => return Err(ill(format!("bad hop bound {other:?}"))),
            };
            VarExpand {
                step: parse_step(&a[..5])?,
                max_hops,
                input: b(&a[6])?,
            }
        }
        "graph-project" => {
            arity(a, 2, "graph-project")?;
            let items = a[1]
                .tagged("items")?
                .iter()
                .map(|it| {
                    let l = it.list()?;
                    match l.first() {
                        Some(Sx::Atom(t)) if t == "prop" => {
                            arity(&l[1..], 3, "prop item")?;
                            Ok(ProjItem::prop(l[1].name()?, l[2].name()?, l[3].name()?))
                        }
                        Some(Sx::Atom(t)) if t == "attr" => {
                            arity(&l[1..], 2, "attr item")?;
                            Ok(ProjItem {
                                source: ProjSource::Attr(l[1].name()?),
                                alias: l[2].name()?,
                            })
                        }
                        _ => Err(ill("projection item must be (prop …) or (attr …)")),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            GraphProject {
                input: b(&a[0])?,
                items,
            }
        }
        "graph-join" => {
            arity(a, 2, "graph-join")?;
            GraphJoin {
                left: b(&a[0])?,
                right: b(&a[1])?,
            }
        }
        "rg-join" => {
            arity(a, 4, "rg-join")?;
            let on = a[3]
                .tagged("on")?
                .iter()
                .map(|k| {
                    let l = k.list()?;
                    arity(l, 3, "relation-graph key")?;
                    Ok(RgKey {
                        column: l[0].name()?,
                        var: l[1].name()?,
                        prop: l[2].name()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            RgJoin {
                temp_label: a[0].name()?,
                table: b(&a[1])?,
                graph: b(&a[2])?,
                on,
            }
        }
        "gr-join" => {
            arity(a, 3, "gr-join")?;
            let table = match &a[1] {
                Sx::Atom(x) if x == "_" => None,
                other => Some(b(other)?),
            };
            GrJoin {
                graph: b(&a[0])?,
                table,
                on: parse_pairs(&a[2])?,
            }
        }
        other => return Err(ill(format!("unknown operator `{other}`"))),
    })
}

pub fn parse_sexpr(text: &str) -> Result<AlgebraExpr> {
    parse_expr(&read_sx(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_round_trips_awkward_names() {
        for n in ["plain", "g.fname", "has space", "a|b", "(x)", "_", ""] {
            let e = AlgebraExpr::base_as("t", n);
            assert_eq!(parse_sexpr(&to_sexpr(&e)).unwrap(), e, "{n}");
        }
    }

    #[test]
    fn literals_keep_their_kind() {
        for v in [
            Value::Null,
            Value::Bool(true),
            Value::Int(-3),
            Value::Float(2.0),
            Value::Float(1e-7),
            Value::from("say \"hi\""),
        ] {
            let e = AlgebraExpr::base("t").rel_select(Predicate::new(vec![Atom::new(
                Operand::col("a"),
                CmpOp::Eq,
                Operand::Lit(v.clone()),
            )]));
            let back = parse_sexpr(&to_sexpr(&e)).unwrap();
            let AlgebraExpr::RelSelect { pred, .. } = back else { panic!() };
            let Operand::Lit(got) = &pred.atoms[0].rhs else { panic!() };
            assert_eq!(format!("{got:?}"), format!("{v:?}"));
        }
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(parse_sexpr("(base t").is_err());
        assert!(parse_sexpr("(base t _))").is_err());
        assert!(parse_sexpr("(frobnicate)").is_err());
        assert!(parse_sexpr("").is_err());
    }
}
