//! A plain boolean slot vector.
//!
//! `Bits` is the unit every other layer speaks: threshold bit-planes, matrix
//! diagonals, level masks and the slots of a simulated ciphertext. Text form is
//! a string of `0`/`1` characters, slot 0 first.

use std::fmt;
use std::ops::{BitAnd, BitXor, Index};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Bits(vec![true; len])
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> bool) -> Self {
        Bits((0..len).map(f).collect())
    }

    /// A vector with a single set slot.
    pub fn unit(len: usize, index: usize) -> Self {
        Bits::from_fn(len, |i| i == index)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn ones_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    /// Left rotation: slot `s` of the result holds slot `(s + k) mod len`.
    pub fn rotate_left(&self, k: usize) -> Self {
        let n = self.len();
        if n == 0 {
            return self.clone();
        }
        let mut v = self.0.clone();
        v.rotate_left(k % n);
        Bits(v)
    }

    /// Cyclic extension or prefix truncation to `len` slots.
    pub fn resize_cyclic(&self, len: usize) -> Self {
        let n = self.len();
        if n == 0 {
            return Bits::zeros(len);
        }
        Bits::from_fn(len, |i| self.0[i % n])
    }

    pub fn not(&self) -> Self {
        Bits(self.0.iter().map(|b| !b).collect())
    }
}

impl From<Vec<bool>> for Bits {
    fn from(v: Vec<bool>) -> Self {
        Bits(v)
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits(iter.into_iter().collect())
    }
}

impl Index<usize> for Bits {
    type Output = bool;
    fn index(&self, i: usize) -> &bool {
        &self.0[i]
    }
}

impl BitXor for &Bits {
    type Output = Bits;
    fn bitxor(self, rhs: &Bits) -> Bits {
        assert_eq!(self.len(), rhs.len(), "slot length mismatch");
        self.iter().zip(rhs.iter()).map(|(a, b)| a ^ b).collect()
    }
}

impl BitAnd for &Bits {
    type Output = Bits;
    fn bitand(self, rhs: &Bits) -> Bits {
        assert_eq!(self.len(), rhs.len(), "slot length mismatch");
        self.iter().zip(rhs.iter()).map(|(a, b)| a & b).collect()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bit character {found:?} at position {position}")]
pub struct ParseBitsError {
    pub position: usize,
    pub found: char,
}

impl FromStr for Bits {
    type Err = ParseBitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(position, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                found => Err(ParseBitsError { position, found }),
            })
            .collect()
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_rotation_convention() {
        let v: Bits = "100".parse().unwrap();
        assert_eq!(v.rotate_left(1).to_string(), "001");
        assert_eq!(v.rotate_left(0), v);
        assert_eq!(v.rotate_left(1).rotate_left(2), v);
    }

    #[test]
    fn cyclic_extension_and_truncation() {
        let v: Bits = "10".parse().unwrap();
        assert_eq!(v.resize_cyclic(5).to_string(), "10101");
        assert_eq!(v.resize_cyclic(5).resize_cyclic(2), v);
        assert_eq!(v.resize_cyclic(2), v);
    }

    #[test]
    fn rejects_non_binary_text() {
        let err = "0120".parse::<Bits>().unwrap_err();
        assert_eq!(err.position, 2);
        assert_eq!(err.found, '2');
    }
}
