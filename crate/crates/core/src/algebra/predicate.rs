use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datamodel::Value;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        Some(match s {
            "=" => CmpOp::Eq,
            "<>" | "!=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }

    pub fn is_range(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }

    /// The operator with its operands swapped (`a < b` ⇔ `b > a`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    /// Column or attribute reference by name.
    Col(String),
    /// Property of a vertex-valued attribute.
    Prop { var: String, prop: String },
    Lit(Value),
    /// Number of elements of a list-valued column.
    Card(Box<Operand>),
}

impl Operand {
    pub fn col(name: impl Into<String>) -> Self {
        Operand::Col(name.into())
    }

    pub fn prop(var: impl Into<String>, prop: impl Into<String>) -> Self {
        Operand::Prop {
            var: var.into(),
            prop: prop.into(),
        }
    }

    pub fn lit(v: impl Into<Value>) -> Self {
        Operand::Lit(v.into())
    }

    fn collect_refs(&self, cols: &mut BTreeSet<String>, vars: &mut BTreeSet<String>) {
        match self {
            Operand::Col(c) => {
                cols.insert(c.clone());
            }
            Operand::Prop { var, .. } => {
                vars.insert(var.clone());
            }
            Operand::Lit(_) => {}
            Operand::Card(inner) => inner.collect_refs(cols, vars),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Col(c) => f.write_str(c),
            Operand::Prop { var, prop } => write!(f, "{var}.{prop}"),
            Operand::Lit(v) => write!(f, "{v}"),
            Operand::Card(inner) => write!(f, "cardinality({inner})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub lhs: Operand,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl Atom {
    pub fn new(lhs: Operand, op: CmpOp, rhs: Operand) -> Self {
        Atom { lhs, op, rhs }
    }

    /// Columns referenced by name.
    pub fn columns(&self) -> BTreeSet<String> {
        let mut cols = BTreeSet::new();
        let mut vars = BTreeSet::new();
        self.lhs.collect_refs(&mut cols, &mut vars);
        self.rhs.collect_refs(&mut cols, &mut vars);
        cols
    }

    /// Vertex variables referenced through property access.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut cols = BTreeSet::new();
        let mut vars = BTreeSet::new();
        self.lhs.collect_refs(&mut cols, &mut vars);
        self.rhs.collect_refs(&mut cols, &mut vars);
        vars
    }

    /// Evaluate with a resolver for non-literal operands.
    pub fn eval(&self, resolve: &mut impl FnMut(&Operand) -> Result<Value>) -> Result<bool> {
        let l = eval_operand(&self.lhs, resolve)?;
        let r = eval_operand(&self.rhs, resolve)?;
        Ok(match l.compare(&r)? {
            None => false,
            Some(ord) => self.op.holds(ord),
        })
    }
}

fn eval_operand(op: &Operand, resolve: &mut impl FnMut(&Operand) -> Result<Value>) -> Result<Value> {
    match op {
        Operand::Lit(v) => Ok(v.clone()),
        Operand::Card(inner) => {
            let v = eval_operand(inner, resolve)?;
            match v {
                Value::Null => Ok(Value::Null),
                other => other
                    .list_len()
                    .map(Value::Int)
                    .ok_or_else(|| Error::TypeMismatch(format!("cardinality() of non-list value {other}"))),
            }
        }
        other => resolve(other),
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// A conjunction of comparison atoms. The empty conjunction is `true`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub atoms: Vec<Atom>,
}

impl Predicate {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Predicate { atoms }
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn and(mut self, other: Predicate) -> Predicate {
        self.atoms.extend(other.atoms);
        self
    }

    pub fn eval(&self, mut resolve: impl FnMut(&Operand) -> Result<Value>) -> Result<bool> {
        for atom in &self.atoms {
            if !atom.eval(&mut resolve)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn columns(&self) -> BTreeSet<String> {
        self.atoms.iter().flat_map(Atom::columns).collect()
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.atoms.iter().flat_map(Atom::vars).collect()
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        let parts: Vec<String> = self.atoms.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" AND "))
    }
}
