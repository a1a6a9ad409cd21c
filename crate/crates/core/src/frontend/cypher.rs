//! Parser for the supported graph-query subset.
//!
//! ```text
//! query    := MATCH path ("," path)* [WHERE cond (AND cond)*] RETURN item ("," item)* [";"]
//! path     := node (rel node)*
//! node     := "(" [var] [":" Label] ["{" prop ":" literal ("," prop ":" literal)* "}"] ")"
//! rel      := "-" "[" ":" TYPE [hops] "]" "->"  |  "<-" "[" ":" TYPE [hops] "]" "-"
//! hops     := "*" [min] [".." [max]]               (min must be 1)
//! cond     := operand cmp operand
//! operand  := var "." prop | cardinality "(" var "." prop ")" | literal
//! item     := var "." prop [AS alias]
//! ```

use std::fmt;

use crate::algebra::{Atom, CmpOp, Operand};
use crate::datamodel::{Direction, Value};
use crate::error::Result;

use super::lexer::{Cursor, Tok};

#[derive(Debug, Clone, PartialEq)]
pub struct NodePattern {
    pub var: Option<String>,
    pub label: Option<String>,
    pub props: Vec<(String, Value)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopRange {
    pub max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelPattern {
    pub edge_type: String,
    /// `Out` for `-[]->`, `In` for `<-[]-`.
    pub dir: Direction,
    pub var_length: Option<HopRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub start: NodePattern,
    pub hops: Vec<(RelPattern, NodePattern)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnItem {
    pub var: String,
    pub prop: String,
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphQueryAst {
    pub paths: Vec<PathPattern>,
    pub conditions: Vec<Atom>,
    pub returns: Vec<ReturnItem>,
}

pub fn parse_graph_query(text: &str) -> Result<GraphQueryAst> {
    let mut c = Cursor::new(text)?;
    c.expect_keyword("MATCH")?;
    let mut paths = vec![path(&mut c)?];
    while c.eat(&Tok::Comma) {
        paths.push(path(&mut c)?);
    }
    let mut conditions = Vec::new();
    if c.eat_keyword("WHERE") {
        conditions.push(condition(&mut c)?);
        while c.eat_keyword("AND") {
            conditions.push(condition(&mut c)?);
        }
        if c.is_keyword("OR") || c.is_keyword("NOT") {
            return Err(c.error("only conjunctive WHERE clauses are supported"));
        }
    }
    c.expect_keyword("RETURN")?;
    let mut returns = vec![return_item(&mut c)?];
    while c.eat(&Tok::Comma) {
        returns.push(return_item(&mut c)?);
    }
    c.eat(&Tok::Semicolon);
    if !c.at_end() {
        return Err(c.error("unexpected trailing input"));
    }
    Ok(GraphQueryAst {
        paths,
        conditions,
        returns,
    })
}

fn path(c: &mut Cursor) -> Result<PathPattern> {
    let start = node(c)?;
    let mut hops = Vec::new();
    while matches!(c.peek(), Some(Tok::Minus | Tok::Lt)) {
        let r = rel(c)?;
        let n = node(c)?;
        hops.push((r, n));
    }
    Ok(PathPattern { start, hops })
}

fn node(c: &mut Cursor) -> Result<NodePattern> {
    c.expect(&Tok::LParen, "`(` opening a node pattern")?;
    let var = match c.peek() {
        Some(Tok::Ident(_)) => Some(c.ident("variable")?),
        _ => None,
    };
    let label = if c.eat(&Tok::Colon) {
        Some(c.ident("label")?)
    } else {
        None
    };
    if c.peek() == Some(&Tok::Colon) {
        return Err(c.error("multiple labels in one node pattern are not supported"));
    }
    let mut props = Vec::new();
    if c.eat(&Tok::LBrace) {
        loop {
            let key = c.ident("property name")?;
            c.expect(&Tok::Colon, "`:` in property map")?;
            props.push((key, c.literal()?));
            if !c.eat(&Tok::Comma) {
                break;
            }
        }
        c.expect(&Tok::RBrace, "`}` closing the property map")?;
    }
    c.expect(&Tok::RParen, "`)` closing the node pattern")?;
    Ok(NodePattern { var, label, props })
}

fn rel(c: &mut Cursor) -> Result<RelPattern> {
    let incoming = c.eat(&Tok::Lt);
    c.expect(&Tok::Minus, "`-` in relationship pattern")?;
    if c.peek() != Some(&Tok::LBracket) {
        return Err(c.error("relationship patterns need `[:TYPE]`"));
    }
    c.next();
    if matches!(c.peek(), Some(Tok::Ident(_))) {
        return Err(c.error("relationship variables are not supported"));
    }
    c.expect(&Tok::Colon, "`:TYPE` in relationship pattern")?;
    let edge_type = c.ident("relationship type")?;
    let mut var_length = None;
    if c.eat(&Tok::Star) {
        let mut has_min = false;
        if let Some(Tok::Lit(Value::Int(min))) = c.peek() {
            if *min != 1 {
                return Err(c.error("variable-length patterns must start at one hop"));
            }
            c.next();
            has_min = true;
        }
        let mut max = None;
        if has_min && c.peek() != Some(&Tok::Dot) {
            max = Some(1);
        } else if c.eat(&Tok::Dot) {
            c.expect(&Tok::Dot, "`..` in hop range")?;
            if let Some(Tok::Lit(Value::Int(m))) = c.peek() {
                let m = *m;
                if m < 1 || m > u32::MAX as i64 {
                    return Err(c.error("hop bound out of range"));
                }
                c.next();
                max = Some(m as u32);
            }
        }
        var_length = Some(HopRange { max });
    }
    c.expect(&Tok::RBracket, "`]` closing the relationship pattern")?;
    c.expect(&Tok::Minus, "`-` after the relationship pattern")?;
    let outgoing = c.eat(&Tok::Gt);
    let dir = match (incoming, outgoing) {
        (false, true) => Direction::Out,
        (true, false) => Direction::In,
        (true, true) => return Err(c.error("relationship cannot point both ways")),
        (false, false) => return Err(c.error("undirected relationships are not supported")),
    };
    Ok(RelPattern {
        edge_type,
        dir,
        var_length,
    })
}

fn prop_ref(c: &mut Cursor) -> Result<(String, String)> {
    let var = c.ident("variable")?;
    c.expect(&Tok::Dot, "`.` in property access")?;
    let prop = c.ident("property name")?;
    Ok((var, prop))
}

fn operand(c: &mut Cursor) -> Result<Operand> {
    if c.starts_literal() {
        return Ok(Operand::Lit(c.literal()?));
    }
    if c.is_keyword("cardinality") && c.peek_at(1) == Some(&Tok::LParen) {
        c.next();
        c.next();
        let (var, prop) = prop_ref(c)?;
        c.expect(&Tok::RParen, "`)` closing cardinality(")?;
        return Ok(Operand::Card(Box::new(Operand::Prop { var, prop })));
    }
    let (var, prop) = prop_ref(c)?;
    Ok(Operand::Prop { var, prop })
}

fn condition(c: &mut Cursor) -> Result<Atom> {
    let lhs = operand(c)?;
    let op = c.comparator()?;
    let rhs = operand(c)?;
    Ok(Atom::new(lhs, op, rhs))
}

fn return_item(c: &mut Cursor) -> Result<ReturnItem> {
    let (var, prop) = prop_ref(c)?;
    let alias = if c.eat_keyword("AS") {
        c.ident("alias")?
    } else {
        format!("{var}_{prop}")
    };
    Ok(ReturnItem { var, prop, alias })
}

pub(crate) fn literal_text(v: &Value) -> String {
    match v {
        Value::Str(s) => format!("'{}'", s.replace('\\', "\\\\").replace('\'', "''")),
        Value::Null => "null".into(),
        Value::Float(f) => format!("{f:?}"),
        other => other.to_string(),
    }
}

fn operand_text(o: &Operand) -> String {
    match o {
        Operand::Lit(v) => literal_text(v),
        Operand::Card(inner) => format!("cardinality({})", operand_text(inner)),
        other => other.to_string(),
    }
}

pub(crate) fn atom_text(a: &Atom) -> String {
    let op = if a.op == CmpOp::Ne { "<>" } else { a.op.symbol() };
    format!("{} {} {}", operand_text(&a.lhs), op, operand_text(&a.rhs))
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        if let Some(v) = &self.var {
            write!(f, "{v}")?;
        }
        if let Some(l) = &self.label {
            write!(f, ":{l}")?;
        }
        if !self.props.is_empty() {
            let ps: Vec<String> = self
                .props
                .iter()
                .map(|(k, v)| format!("{k}: {}", literal_text(v)))
                .collect();
            write!(f, " {{{}}}", ps.join(", "))?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for RelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hops = match self.var_length {
            None => String::new(),
            Some(HopRange { max: None }) => "*".into(),
            Some(HopRange { max: Some(m) }) => format!("*1..{m}"),
        };
        match self.dir {
            Direction::Out => write!(f, "-[:{}{hops}]->", self.edge_type),
            Direction::In => write!(f, "<-[:{}{hops}]-", self.edge_type),
        }
    }
}

impl fmt::Display for GraphQueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let paths: Vec<String> = self
            .paths
            .iter()
            .map(|p| {
                let mut s = p.start.to_string();
                for (r, n) in &p.hops {
                    s.push_str(&r.to_string());
                    s.push_str(&n.to_string());
                }
                s
            })
            .collect();
        write!(f, "MATCH {}", paths.join(", "))?;
        if !self.conditions.is_empty() {
            let cs: Vec<String> = self.conditions.iter().map(atom_text).collect();
            write!(f, "\nWHERE {}", cs.join(" AND "))?;
        }
        let rs: Vec<String> = self
            .returns
            .iter()
            .map(|r| format!("{}.{} AS {}", r.var, r.prop, r.alias))
            .collect();
        write!(f, "\nRETURN {}", rs.join(", "))
    }
}
