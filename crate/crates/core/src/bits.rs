//! Computational-basis labels for the data register.
//!
//! A label `b_1 b_2 ... b_N` is written most-significant first, so `|010>`
//! is subspace index 2. Bit value 0 is spin-up (the `E_+` population).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Vec<u8>);

impl Bits {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() || bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidBits(format!("{bits:?}")));
        }
        Ok(Self(bits))
    }

    /// Label of subspace `index` in a register of `len` bits.
    pub fn from_index(index: usize, len: usize) -> Self {
        assert!(len > 0 && len < usize::BITS as usize);
        assert!(index < 1 << len, "index {index} out of range for {len} bits");
        Self((0..len).map(|n| ((index >> (len - 1 - n)) & 1) as u8).collect())
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_index(0, len)
    }

    /// Every label of a `len`-bit register in index order.
    pub fn all(len: usize) -> impl Iterator<Item = Bits> {
        (0..1usize << len).map(move |i| Bits::from_index(i, len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    /// Bit `b_n`, 1-based.
    pub fn bit(&self, n: usize) -> u8 {
        self.0[n - 1]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn hamming(&self, other: &Bits) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn expect_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::BitLength { expected: n, actual: self.len() });
        }
        Ok(())
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('|').trim_end_matches('>');
        let bits = trimmed
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidBits(s.to_string())),
            })
            .collect::<Result<Vec<u8>>>()?;
        if bits.is_empty() {
            return Err(Error::InvalidBits(s.to_string()));
        }
        Ok(Self(bits))
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{self}>")
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
