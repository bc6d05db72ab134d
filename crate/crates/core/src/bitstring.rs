//! Growing bit-string identifiers.
//!
//! Ordering is the derived lexicographic order on the bit sequence, under
//! which a proper prefix precedes all of its extensions. That ordering is
//! stable under future extension of already-diverged strings, which is what
//! the probabilistic protocols rely on.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::RngCore;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn empty() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        BitString(bits.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn push_random(&mut self, rng: &mut dyn RngCore) {
        self.0.push(rng.random_bool(0.5));
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn is_proper_prefix_of(&self, other: &BitString) -> bool {
        other.0.len() > self.0.len() && self.is_prefix_of(other)
    }

    /// Prefix-equivalence: two identifiers are "the same" when one is a
    /// prefix of the other.
    pub fn prefix_related(&self, other: &BitString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        for &b in &self.0 {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = char;

    /// Parses "0"/"1" characters; "ε" or the empty string give the empty id.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ε" {
            return Ok(BitString::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(other),
            })
            .collect::<Result<Vec<bool>, char>>()
            .map(BitString)
    }
}
