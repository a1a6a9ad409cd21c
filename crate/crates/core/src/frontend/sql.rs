//! Parser for the supported relational-query subset.
//!
//! ```text
//! query   := SELECT ("*" | item ("," item)*) FROM table ("," table)* [","] [WHERE cond (AND cond)*] [";"]
//! item    := colref [AS alias]
//! table   := name [[AS] alias]
//! cond    := operand cmp operand
//! operand := colref | cardinality "(" colref ")" | literal
//! colref  := [qualifier "."] column
//! ```

use std::fmt;

use crate::algebra::CmpOp;
use crate::datamodel::Value;
use crate::error::Result;

use super::cypher::literal_text;
use super::lexer::{Cursor, Tok};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColRef {
    pub qualifier: Option<String>,
    pub column: String,
}

impl fmt::Display for ColRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qualifier {
            Some(q) => write!(f, "{q}.{}", self.column),
            None => f.write_str(&self.column),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SqlOperand {
    Col(ColRef),
    Card(ColRef),
    Lit(Value),
}

impl fmt::Display for SqlOperand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlOperand::Col(c) => write!(f, "{c}"),
            SqlOperand::Card(c) => write!(f, "cardinality({c})"),
            SqlOperand::Lit(v) => f.write_str(&literal_text(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqlCondition {
    pub lhs: SqlOperand,
    pub op: CmpOp,
    pub rhs: SqlOperand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub col: ColRef,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FromItem {
    pub table: String,
    pub alias: Option<String>,
}

impl FromItem {
    /// Name the table is referenced by.
    pub fn binding(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.table)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqlQueryAst {
    /// `None` for `SELECT *`.
    pub select: Option<Vec<SelectItem>>,
    pub from: Vec<FromItem>,
    pub conditions: Vec<SqlCondition>,
}

const RESERVED: [&str; 5] = ["WHERE", "AND", "FROM", "SELECT", "AS"];

pub fn parse_sql(text: &str) -> Result<SqlQueryAst> {
    let mut c = Cursor::new(text)?;
    c.expect_keyword("SELECT")?;
    let select = if c.eat(&Tok::Star) {
        None
    } else {
        let mut items = vec![select_item(&mut c)?];
        while c.eat(&Tok::Comma) {
            items.push(select_item(&mut c)?);
        }
        Some(items)
    };
    c.expect_keyword("FROM")?;
    let mut from = vec![from_item(&mut c)?];
    while c.eat(&Tok::Comma) {
        if c.is_keyword("WHERE") || c.at_end() || c.peek() == Some(&Tok::Semicolon) {
            break;
        }
        from.push(from_item(&mut c)?);
    }
    if c.is_keyword("JOIN") || c.is_keyword("INNER") || c.is_keyword("LEFT") {
        return Err(c.error("explicit JOIN syntax is not supported; list tables in FROM"));
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
    c.eat(&Tok::Semicolon);
    if !c.at_end() {
        return Err(c.error("unexpected trailing input"));
    }
    Ok(SqlQueryAst {
        select,
        from,
        conditions,
    })
}

fn col_ref(c: &mut Cursor) -> Result<ColRef> {
    let first = c.ident("column")?;
    if c.eat(&Tok::Dot) {
        let column = c.ident("column")?;
        Ok(ColRef {
            qualifier: Some(first),
            column,
        })
    } else {
        Ok(ColRef {
            qualifier: None,
            column: first,
        })
    }
}

fn select_item(c: &mut Cursor) -> Result<SelectItem> {
    let col = col_ref(c)?;
    let alias = if c.eat_keyword("AS") {
        Some(c.ident("alias")?)
    } else {
        None
    };
    Ok(SelectItem { col, alias })
}

fn from_item(c: &mut Cursor) -> Result<FromItem> {
    let table = c.ident("table name")?;
    let explicit = c.eat_keyword("AS");
    let alias = match c.peek() {
        Some(Tok::Ident(s)) if explicit || !RESERVED.iter().any(|k| s.eq_ignore_ascii_case(k)) => {
            Some(c.ident("alias")?)
        }
        _ if explicit => return Err(c.error("expected alias")),
        _ => None,
    };
    Ok(FromItem { table, alias })
}

fn operand(c: &mut Cursor) -> Result<SqlOperand> {
    if c.starts_literal() {
        return Ok(SqlOperand::Lit(c.literal()?));
    }
    if c.is_keyword("cardinality") && c.peek_at(1) == Some(&Tok::LParen) {
        c.next();
        c.next();
        let col = col_ref(c)?;
        c.expect(&Tok::RParen, "`)` closing cardinality(")?;
        return Ok(SqlOperand::Card(col));
    }
    Ok(SqlOperand::Col(col_ref(c)?))
}

fn condition(c: &mut Cursor) -> Result<SqlCondition> {
    let lhs = operand(c)?;
    let op = c.comparator()?;
    let rhs = operand(c)?;
    Ok(SqlCondition { lhs, op, rhs })
}

impl fmt::Display for SqlQueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.select {
            None => write!(f, "SELECT *")?,
            Some(items) => {
                let s: Vec<String> = items
                    .iter()
                    .map(|i| match &i.alias {
                        Some(a) => format!("{} AS {a}", i.col),
                        None => i.col.to_string(),
                    })
                    .collect();
                write!(f, "SELECT {}", s.join(", "))?;
            }
        }
        let from: Vec<String> = self
            .from
            .iter()
            .map(|t| match &t.alias {
                Some(a) => format!("{} {a}", t.table),
                None => t.table.clone(),
            })
            .collect();
        write!(f, "\nFROM {}", from.join(", "))?;
        if !self.conditions.is_empty() {
            let cs: Vec<String> = self
                .conditions
                .iter()
                .map(|c| {
                    let op = if c.op == CmpOp::Ne { "<>" } else { c.op.symbol() };
                    format!("{} {op} {}", c.lhs, c.rhs)
                })
                .collect();
            write!(f, "\nWHERE {}", cs.join("\n  AND "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_listing_with_trailing_comma() {
        let q = parse_sql(
            "SELECT g.a2name, g.a1name, g.w2name, g.w1name\n\
             FROM neo4j g,publication_cited w,inventors a0,inventors a1,\n\
             WHERE g.a1name = a0.name AND g.a2name = a1.name\n  \
             AND g.w1name = w.name AND cardinality(a1.patent_ids) > 2;",
        )
        .unwrap();
        assert_eq!(q.from.len(), 4);
        assert_eq!(q.from[3].binding(), "a1");
        assert_eq!(q.conditions.len(), 4);
        assert!(matches!(q.conditions[3].lhs, SqlOperand::Card(_)));
    }

    #[test]
    fn select_star_and_bare_tables() {
        let q = parse_sql("SELECT * FROM neo4j").unwrap();
        assert!(q.select.is_none());
        assert_eq!(q.from[0].binding(), "neo4j");
    }

    #[test]
    fn rejects_unsupported_forms() {
        assert!(parse_sql("SELECT a FROM t JOIN u").is_err());
        assert!(parse_sql("SELECT a FROM t WHERE a = 1 OR a = 2").is_err());
        assert!(parse_sql("SELECT a FROM").is_err());
    }

    #[test]
    fn display_reparses_identically() {
        let q = parse_sql("SELECT g.x AS y, t.z FROM neo4j g, tbl t WHERE g.x = t.k AND t.z >= 1.5 AND t.s <> 'a'")
            .unwrap();
        assert_eq!(parse_sql(&q.to_string()).unwrap(), q);
    }
}
