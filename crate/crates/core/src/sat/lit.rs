use std::fmt;
use std::ops::Not;

use serde::{Deserialize, Serialize};

/// A propositional variable, numbered from zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(u32);

impl Var {
    pub const fn new(index: u32) -> Self {
        Var(index)
    }

    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub const fn lit(self, positive: bool) -> Lit {
        Lit(self.0 << 1 | (!positive) as u32)
    }

    #[inline]
    pub const fn pos(self) -> Lit {
        self.lit(true)
    }

    #[inline]
    pub const fn neg(self) -> Lit {
        self.lit(false)
    }
}

/// A literal: a variable together with a polarity.
///
/// Encoded as `2 * var + negated` so that a literal and its negation are adjacent
/// and a literal can index watch lists directly.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Lit(u32);

impl Lit {
    #[inline]
    pub const fn new(var: Var, positive: bool) -> Self {
        var.lit(positive)
    }

    #[inline]
    pub const fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    #[inline]
    pub const fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    #[inline]
    pub const fn code(self) -> usize {
        self.0 as usize
    }

    /// Builds a literal from its DIMACS form (`±(var + 1)`).
    ///
    /// Panics on zero.
    pub fn from_dimacs(value: i32) -> Self {
        assert!(value != 0, "0 is not a DIMACS literal");
        Var(value.unsigned_abs() - 1).lit(value > 0)
    }

    pub fn to_dimacs(self) -> i32 {
        let v = self.var().0 as i32 + 1;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    /// Truth value of this literal under a total assignment indexed by variable.
    #[inline]
    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var().index()] == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;

    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl Serialize for Lit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i32(self.to_dimacs())
    }
}

impl<'de> Deserialize<'de> for Lit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i32::deserialize(d)?;
        if v == 0 {
            return Err(serde::de::Error::custom("0 is not a literal"));
        }
        Ok(Lit::from_dimacs(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_flips_polarity_only() {
        let x = Var::new(7);
        assert_eq!(!x.pos(), x.neg());
        assert_eq!((!x.pos()).var(), x);
        assert!(x.pos().is_positive());
        assert!(!x.neg().is_positive());
    }

    #[test]
    fn dimacs_round_trip() {
        for v in [-5, -1, 1, 3, 1000] {
            assert_eq!(Lit::from_dimacs(v).to_dimacs(), v);
        }
        assert_eq!(Lit::from_dimacs(1).var(), Var::new(0));
    }
}
