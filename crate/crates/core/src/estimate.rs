//! Cardinality estimation shared by the query front end and the engines.

use crate::algebra::{Atom, CmpOp, Operand, Predicate};

/// Selectivity of an unknown equality.
pub const UNKNOWN_EQ_SELECTIVITY: f64 = 0.1;
/// Selectivity of a range comparison.
pub const RANGE_SELECTIVITY: f64 = 1.0 / 3.0;

fn eq_selectivity(d: Option<u64>) -> f64 {
    match d {
        Some(d) if d > 0 => 1.0 / d as f64,
        _ => UNKNOWN_EQ_SELECTIVITY,
    }
}

/// Selectivity of one comparison; `distinct` reports the distinct-value
/// count of a plain column or property operand when known.
pub fn atom_selectivity(atom: &Atom, distinct: &dyn Fn(&Operand) -> Option<u64>) -> f64 {
    let plain = |o: &Operand| matches!(o, Operand::Col(_) | Operand::Prop { .. });
    let d = match (&atom.lhs, &atom.rhs) {
        (l, Operand::Lit(_)) if plain(l) => distinct(l),
        (Operand::Lit(_), r) if plain(r) => distinct(r),
        (l, r) if plain(l) && plain(r) => match (distinct(l), distinct(r)) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        },
        _ => None,
    };
    match atom.op {
        CmpOp::Eq => eq_selectivity(d),
        CmpOp::Ne => 1.0 - eq_selectivity(d),
        _ => RANGE_SELECTIVITY,
    }
}

/// Product of atom selectivities, treating atoms as independent.
pub fn predicate_selectivity(pred: &Predicate, distinct: &dyn Fn(&Operand) -> Option<u64>) -> f64 {
    pred.atoms.iter().map(|a| atom_selectivity(a, distinct)).product()
}

/// Equi-join size under containment: |L|·|R| / max(dL, dR).
pub fn join_size(left: f64, right: f64, dl: Option<u64>, dr: Option<u64>) -> f64 {
    let d = match (dl, dr) {
        (Some(a), Some(b)) => a.max(b) as f64,
        (Some(a), None) | (None, Some(a)) => a as f64,
        (None, None) => left.max(right),
    };
    if d <= 0.0 {
        0.0
    } else {
        left * right / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let none = |_: &Operand| None;
        let ten = |_: &Operand| Some(10);
        let eq = Atom::new(Operand::col("a"), CmpOp::Eq, Operand::lit(1));
        let lt = Atom::new(Operand::col("a"), CmpOp::Lt, Operand::lit(1));
        assert_eq!(atom_selectivity(&eq, &none), 0.1);
        assert_eq!(atom_selectivity(&eq, &ten), 0.1);
        assert_eq!(atom_selectivity(&lt, &ten), 1.0 / 3.0);
        let four = |_: &Operand| Some(4);
        assert_eq!(atom_selectivity(&eq, &four), 0.25);
        assert_eq!(join_size(100.0, 10.0, Some(10), Some(5)), 100.0);
    }
}
