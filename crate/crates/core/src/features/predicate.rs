use crate::error::{Error, Result};
use crate::telemetry::{ControlSet, ControlTable};

/// Keyboard keys considered by [`ControlPredicate::ExactlyOneKey`].
pub const MOVEMENT_KEYS: [&str; 5] = ["W", "A", "S", "D", "CTRL"];

/// Boolean condition over the set of held controls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ControlPredicate {
    Single(String),
    /// All operands held, possibly among others.
    And(Vec<String>),
    /// At least one operand held.
    Or(Vec<String>),
    /// Exactly one of W, A, S, D, CTRL held; mouse buttons are ignored.
    ExactlyOneKey,
}

impl ControlPredicate {
    pub fn single(code: &str) -> Self {
        ControlPredicate::Single(code.to_string())
    }

    pub fn and(codes: &[&str]) -> Self {
        ControlPredicate::And(codes.iter().map(|c| c.to_string()).collect())
    }

    pub fn or(codes: &[&str]) -> Self {
        ControlPredicate::Or(codes.iter().map(|c| c.to_string()).collect())
    }

    /// Evaluates against an explicit list of held codes.
    pub fn holds_for(&self, held: &[&str]) -> bool {
        let has = |c: &String| held.contains(&c.as_str());
        match self {
            ControlPredicate::Single(c) => has(c),
            ControlPredicate::And(ops) => ops.iter().all(has),
            ControlPredicate::Or(ops) => ops.iter().any(has),
            ControlPredicate::ExactlyOneKey => {
                MOVEMENT_KEYS.iter().filter(|k| held.contains(k)).count() == 1
            }
        }
    }

    pub(crate) fn compile(&self, table: &ControlTable) -> Result<Compiled> {
        let mask = |ops: &[String]| {
            ops.iter()
                .filter_map(|c| table.index_of(c))
                .fold(0u64, |m, b| m | 1 << b)
        };
        let all_known = |ops: &[String]| ops.iter().all(|c| table.index_of(c).is_some());
        Ok(match self {
            ControlPredicate::Single(c) => match table.index_of(c) {
                Some(b) => Compiled::All(1 << b),
                None => Compiled::Never,
            },
            ControlPredicate::And(ops) if ops.is_empty() => {
                return Err(Error::InvalidParams("AND needs an operand".into()))
            }
            ControlPredicate::And(ops) if !all_known(ops) => Compiled::Never,
            ControlPredicate::And(ops) => Compiled::All(mask(ops)),
            ControlPredicate::Or(ops) if ops.is_empty() => {
                return Err(Error::InvalidParams("OR needs an operand".into()))
            }
            ControlPredicate::Or(ops) => Compiled::Any(mask(ops)),
            ControlPredicate::ExactlyOneKey => {
                let keys: Vec<String> = MOVEMENT_KEYS.iter().map(|k| k.to_string()).collect();
                Compiled::ExactlyOne(mask(&keys))
            }
        })
    }
}

/// Predicate resolved against one session's control bits.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Compiled {
    Never,
    All(u64),
    Any(u64),
    ExactlyOne(u64),
}

impl Compiled {
    #[inline]
    pub(crate) fn holds(self, held: ControlSet) -> bool {
        match self {
            Compiled::Never => false,
            Compiled::All(m) => held.0 & m == m,
            Compiled::Any(m) => held.0 & m != 0,
            Compiled::ExactlyOne(m) => (held.0 & m).count_ones() == 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::Device;

    fn set(table: &ControlTable, codes: &[&str]) -> ControlSet {
        let mut s = ControlSet::EMPTY;
        for c in codes {
            s.insert(table.index_of(c).unwrap());
        }
        s
    }

    #[test]
    fn and_is_superset_match() {
        let mut table = ControlTable::default();
        table.intern("SPACE", Device::Keyboard).unwrap();
        let p = ControlPredicate::and(&["A", "CTRL", "MOUSE1"]);
        let c = p.compile(&table).unwrap();
        assert!(c.holds(set(&table, &["A", "CTRL", "MOUSE1"])));
        assert!(c.holds(set(&table, &["A", "CTRL", "MOUSE1", "W", "SPACE"])));
        assert!(!c.holds(set(&table, &["A", "CTRL"])));
        assert!(p.holds_for(&["MOUSE1", "CTRL", "A", "D"]));
    }

    #[test]
    fn or_and_exactly_one() {
        let table = ControlTable::default();
        let or = ControlPredicate::or(&["W", "S"]).compile(&table).unwrap();
        assert!(or.holds(set(&table, &["S", "A"])));
        assert!(!or.holds(set(&table, &["A", "D"])));
        let one = ControlPredicate::ExactlyOneKey.compile(&table).unwrap();
        assert!(one.holds(set(&table, &["W", "MOUSE1"])));
        assert!(!one.holds(set(&table, &["W", "A"])));
        assert!(!one.holds(set(&table, &["MOUSE1"])));
        assert!(!one.holds(ControlSet::EMPTY));
    }

    #[test]
    fn unknown_operands() {
        let table = ControlTable::default();
        let c = ControlPredicate::and(&["A", "F13"]).compile(&table).unwrap();
        assert!(!c.holds(ControlSet(u64::MAX)));
        let c = ControlPredicate::or(&["A", "F13"]).compile(&table).unwrap();
        assert!(c.holds(set(&table, &["A"])));
        assert!(ControlPredicate::And(vec![]).compile(&table).is_err());
        assert!(ControlPredicate::Or(vec![]).compile(&table).is_err());
    }
}
