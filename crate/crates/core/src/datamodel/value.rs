use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separator for list-valued string cells, e.g. `a|b|c`.
pub const LIST_SEPARATOR: char = '|';

/// An atomic property or column value. `Null` is the missing-value marker.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Int,
    Float,
    Str,
    Bool,
    /// Derived column whose kind is not tracked.
    Any,
}

impl ValueKind {
    pub fn parse_cell(self, cell: &str) -> std::result::Result<Value, String> {
        if cell.is_empty() {
            return Ok(Value::Null);
        }
        match self {
            ValueKind::Int => cell
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|e| format!("`{cell}` is not an integer: {e}")),
            ValueKind::Float => cell
                .parse::<f64>()
                .map(Value::Float)
                .map_err(|e| format!("`{cell}` is not a float: {e}")),
            ValueKind::Bool => match cell {
                "true" => Ok(Value::Bool(true)),
                "false" => Ok(Value::Bool(false)),
                _ => Err(format!("`{cell}` is not a boolean")),
            },
            ValueKind::Str => Ok(Value::Str(cell.to_string())),
            ValueKind::Any => Ok(Value::Str(cell.to_string())),
        }
    }

    pub fn admits(self, value: &Value) -> bool {
        matches!(
            (self, value),
            (_, Value::Null)
                | (ValueKind::Any, _)
                | (ValueKind::Int, Value::Int(_))
                | (ValueKind::Float, Value::Float(_))
                | (ValueKind::Float, Value::Int(_))
                | (ValueKind::Str, Value::Str(_))
                | (ValueKind::Bool, Value::Bool(_))
        )
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Int => "int",
            ValueKind::Float => "float",
            ValueKind::Str => "str",
            ValueKind::Bool => "bool",
            ValueKind::Any => "any",
        };
        f.write_str(s)
    }
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn kind(&self) -> Option<ValueKind> {
        match self {
            Value::Null => None,
            Value::Bool(_) => Some(ValueKind::Bool),
            Value::Int(_) => Some(ValueKind::Int),
            Value::Float(_) => Some(ValueKind::Float),
            Value::Str(_) => Some(ValueKind::Str),
        }
    }

    /// Comparison under predicate semantics. `Ok(None)` when either side is
    /// null (null is unequal to everything, itself included).
    pub fn compare(&self, other: &Value) -> Result<Option<Ordering>> {
        use Value::*;
        Ok(match (self, other) {
            (Null, _) | (_, Null) => None,
            (Int(a), Int(b)) => Some(a.cmp(b)),
            (Int(a), Float(b)) => (*a as f64).partial_cmp(b),
            (Float(a), Int(b)) => a.partial_cmp(&(*b as f64)),
            (Float(a), Float(b)) => a.partial_cmp(b),
            (Str(a), Str(b)) => Some(a.cmp(b)),
            (Bool(a), Bool(b)) => Some(a.cmp(b)),
            (a, b) => {
                return Err(Error::TypeMismatch(format!("{a} vs {b}")));
            }
        })
    }

    /// Key used by hash joins; `None` for null so null keys never match.
    pub fn join_key(&self) -> Option<JoinKey> {
        match self {
            Value::Null => None,
            Value::Bool(b) => Some(JoinKey::Bool(*b)),
            Value::Int(i) => Some(JoinKey::Int(*i)),
            Value::Float(f) => {
                if f.fract() == 0.0 && f.abs() < 9.0e15 {
                    Some(JoinKey::Int(*f as i64))
                } else if f.is_nan() {
                    None
                } else {
                    Some(JoinKey::Float(f.to_bits()))
                }
            }
            Value::Str(s) => Some(JoinKey::Str(s.clone())),
        }
    }

    /// Number of elements of a list-valued string cell.
    pub fn list_len(&self) -> Option<i64> {
        match self {
            Value::Str(s) if s.is_empty() => Some(0),
            Value::Str(s) => Some(s.split(LIST_SEPARATOR).filter(|p| !p.is_empty()).count() as i64),
            _ => None,
        }
    }

    /// Width of the value when serialized as UTF-8 text.
    pub fn text_width(&self) -> usize {
        match self {
            Value::Null => 0,
            Value::Str(s) => s.len(),
            other => other.to_string().len(),
        }
    }

    /// Cell text for delimited files; null is the empty string.
    pub fn to_cell(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Str(s) => s.clone(),
            other => other.to_string(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::Int(_) | Value::Float(_) => 2,
            Value::Str(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JoinKey {
    Bool(bool),
    Int(i64),
    Float(u64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => {
                if x.fract() == 0.0 && x.is_finite() {
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x}")
                }
            }
            Value::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

// Structural equality and a total order, used for bag comparison and sorting.
// Predicate semantics live in `Value::compare`.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        use Value::*;
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Bool(a), Bool(b)) => a.cmp(b),
            (Int(a), Int(b)) => a.cmp(b),
            (Int(a), Float(b)) => (*a as f64).total_cmp(b),
            (Float(a), Int(b)) => a.total_cmp(&(*b as f64)),
            (Float(a), Float(b)) => a.total_cmp(b),
            (Str(a), Str(b)) => a.cmp(b),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Null => 0u8.hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Int(i) => (*i as f64).to_bits().hash(state),
            Value::Float(x) => x.to_bits().hash(state),
            Value::Str(s) => s.hash(state),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_compares_unknown() {
        assert_eq!(Value::Null.compare(&Value::Null).unwrap(), None);
        assert_eq!(Value::Int(1).compare(&Value::Null).unwrap(), None);
        assert!(Value::Null.join_key().is_none());
    }

    #[test]
    fn numeric_cross_compare() {
        assert_eq!(
            Value::Int(2).compare(&Value::Float(2.5)).unwrap(),
            Some(Ordering::Less)
        );
        assert_eq!(Value::Float(3.0).join_key(), Value::Int(3).join_key());
    }

    #[test]
    fn string_int_mismatch_is_error() {
        assert!(Value::from("a").compare(&Value::Int(1)).is_err());
    }

    #[test]
    fn list_length() {
        assert_eq!(Value::from("a|b|c").list_len(), Some(3));
        assert_eq!(Value::from("").list_len(), Some(0));
        assert_eq!(Value::Int(3).list_len(), None);
    }

    #[test]
    fn cell_parsing() {
        assert_eq!(ValueKind::Int.parse_cell("42").unwrap(), Value::Int(42));
        assert!(ValueKind::Int.parse_cell("x").is_err());
        assert!(ValueKind::Str.parse_cell("").unwrap().is_null());
    }
}
