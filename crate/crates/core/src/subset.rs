use serde::{Deserialize, Serialize};
use std::fmt;

/// Fixed-length bit vector over feature columns; bit `i` set means column `i`
/// is an input to the model.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSubset {
    len: usize,
    words: Vec<u64>,
}

impl FeatureSubset {
    pub fn empty(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut s = Self::empty(len);
        for &i in indices {
            s.insert(i);
        }
        s
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.insert(i);
            }
        }
        s
    }

    /// Subset whose bits are the low `len` bits of `mask`.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64, "mask subsets are limited to 64 features");
        let mut s = Self::empty(len);
        if len > 0 {
            s.words[0] = if len == 64 { mask } else { mask & ((1u64 << len) - 1) };
        }
        s
    }

    /// Number of feature columns the subset ranges over.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "feature {i} out of range for {} columns", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < self.len, "feature {i} out of range for {} columns", self.len);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn set(&mut self, i: usize, on: bool) {
        if on {
            self.insert(i)
        } else {
            self.remove(i)
        }
    }

    pub fn toggle(&mut self, i: usize) {
        let on = self.contains(i);
        self.set(i, !on);
    }

    pub fn with(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.insert(i);
        s
    }

    pub fn without(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.remove(i);
        s
    }

    /// Selected column indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.contains(i)).collect()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }
}

impl fmt::Debug for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureSubset{:?}", self.indices())
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = (0..self.len)
            .map(|i| if self.contains(i) { '1' } else { '0' })
            .collect();
        f.write_str(&bits)
    }
}
