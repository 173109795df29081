//! Subsets of the user (coordinate) index set `{1, …, m}`.
//!
//! Stored as a bit mask over zero-based indices; displayed one-based.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest user count a [`UserSet`] can address.
pub const MAX_USERS: usize = 31;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad index set: {0}")]
pub struct BadIndexSet(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserSet {
    mask: u32,
}

impl UserSet {
    /// From one-based user labels, validated against `m` users.
    pub fn from_labels(labels: &[usize], m: usize) -> Result<Self, BadIndexSet> {
        let mut mask = 0u32;
        for &k in labels {
            if k == 0 || k > m || m > MAX_USERS {
                return Err(BadIndexSet(format!("user {k} outside 1..={m}")));
            }
            mask |= 1 << (k - 1);
        }
        Ok(Self { mask })
    }

    /// From zero-based indices.
    pub fn from_indices(indices: &[usize], m: usize) -> Result<Self, BadIndexSet> {
        let labels: Vec<usize> = indices.iter().map(|i| i + 1).collect();
        Self::from_labels(&labels, m)
    }

    pub fn from_mask(mask: u32, m: usize) -> Result<Self, BadIndexSet> {
        if m > MAX_USERS || (m < 32 && mask >> m != 0) {
            return Err(BadIndexSet(format!("mask {mask:#b} has users outside 1..={m}")));
        }
        Ok(Self { mask })
    }

    pub fn full(m: usize) -> Self {
        Self { mask: if m >= 32 { u32::MAX } else { (1u32 << m) - 1 } }
    }

    pub fn empty() -> Self {
        Self { mask: 0 }
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    pub fn contains(self, index: usize) -> bool {
        index < 32 && self.mask >> index & 1 == 1
    }

    pub fn complement(self, m: usize) -> Self {
        Self { mask: Self::full(m).mask & !self.mask }
    }

    /// Zero-based indices in increasing order.
    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|&i| self.contains(i)).collect()
    }

    /// Checks the set is non-empty and inside `{1..m}`.
    pub fn check_nonempty(self, m: usize) -> Result<(), BadIndexSet> {
        if self.is_empty() {
            return Err(BadIndexSet("empty user set".into()));
        }
        if self.mask & !Self::full(m).mask != 0 {
            return Err(BadIndexSet(format!("{self} not inside 1..={m}")));
        }
        Ok(())
    }

    /// All non-empty subsets of `{1..m}` in increasing mask order.
    pub fn nonempty_subsets(m: usize) -> impl Iterator<Item = UserSet> {
        (1..=Self::full(m).mask).map(|mask| UserSet { mask })
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.indices().iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

/// Serialized as the sorted list of one-based labels.
impl Serialize for UserSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let labels: Vec<usize> = self.indices().iter().map(|i| i + 1).collect();
        labels.serialize(s)
    }
}

impl<'de> Deserialize<'de> for UserSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(d)?;
        UserSet::from_labels(&labels, MAX_USERS).map_err(serde::de::Error::custom)
    }
}
