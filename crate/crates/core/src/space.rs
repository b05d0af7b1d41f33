//! Privacy level sets and per-user level assignments.

use std::sync::Arc;

use crate::error::{Error, Result};

/// An ordered set of privacy levels users can choose from.
///
/// Levels are non-negative reals (possibly ending with `f64::INFINITY`),
/// strictly increasing, and always include the zero level at index 0.
/// The zero level means "share nothing".
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacySpace {
    levels: Vec<f64>,
}

impl PrivacySpace {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidSpace(format!(
                "need at least 2 levels, got {}",
                levels.len()
            )));
        }
        if levels[0] != 0.0 {
            return Err(Error::InvalidSpace(format!(
                "first level must be the zero level, got {}",
                levels[0]
            )));
        }
        for w in levels.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidSpace(format!(
                    "levels must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if levels.iter().any(|l| l.is_nan()) {
            return Err(Error::InvalidSpace("levels must not be NaN".into()));
        }
        if levels.len() > u8::MAX as usize + 1 {
            return Err(Error::InvalidSpace(format!(
                "at most {} levels supported, got {}",
                u8::MAX as usize + 1,
                levels.len()
            )));
        }
        Ok(Self { levels })
    }

    /// The two-level space `{0, top}`.
    pub fn binary(top: f64) -> Result<Self> {
        Self::new(vec![0.0, top])
    }

    /// The three-level space `{0, 1, 2}` of the federated model.
    pub fn three_level() -> Self {
        Self::new(vec![0.0, 1.0, 2.0]).expect("static space is valid")
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Index of the zero level. Always 0 by construction.
    pub fn zero_index(&self) -> usize {
        0
    }

    /// Index of the largest level.
    pub fn top_index(&self) -> usize {
        self.levels.len() - 1
    }

    /// Exact-match lookup of a level value.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.levels.iter().position(|&l| l == value)
    }
}

/// A length-`N` assignment of privacy levels, stored as indices into a
/// shared [`PrivacySpace`].
#[derive(Debug, Clone)]
pub struct PrivacyVector {
    space: Arc<PrivacySpace>,
    entries: Vec<u8>,
}

impl PrivacyVector {
    pub fn new(space: Arc<PrivacySpace>, entries: Vec<u8>) -> Result<Self> {
        for &e in &entries {
            if e as usize >= space.len() {
                return Err(Error::InvalidParameter(format!(
                    "level index {} out of range for a {}-level space",
                    e,
                    space.len()
                )));
            }
        }
        Ok(Self { space, entries })
    }

    /// Builds a vector from level values, which must all be members of the space.
    pub fn from_levels(space: Arc<PrivacySpace>, levels: &[f64]) -> Result<Self> {
        let entries = levels
            .iter()
            .map(|&v| {
                space
                    .index_of(v)
                    .map(|i| i as u8)
                    .ok_or(Error::UnknownLevel(v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space, entries })
    }

    /// All users at the zero level.
    pub fn zeros(space: Arc<PrivacySpace>, n: usize) -> Self {
        Self {
            space,
            entries: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn space(&self) -> &Arc<PrivacySpace> {
        &self.space
    }

    /// Level indices, one per user.
    pub fn indices(&self) -> &[u8] {
        &self.entries
    }

    /// Level values, one per user.
    pub fn levels(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|&e| self.space.level(e as usize))
            .collect()
    }

    pub fn index_of_user(&self, user: usize) -> usize {
        self.entries[user] as usize
    }

    /// Returns a copy with `user` moved to `level_index`.
    pub fn with_user_level(&self, user: usize, level_index: usize) -> Result<Self> {
        if level_index >= self.space.len() {
            return Err(Error::InvalidParameter(format!(
                "level index {} out of range",
                level_index
            )));
        }
        let mut entries = self.entries.clone();
        entries[user] = level_index as u8;
        Ok(Self {
            space: Arc::clone(&self.space),
            entries,
        })
    }

    /// The restriction `rho_S`: entries of users outside the mask are set
    /// to the zero level. Bit `i` of `mask` keeps user `i`.
    pub fn restrict_mask(&self, mask: u64) -> Self {
        let entries = restricted_indices(&self.entries, mask);
        Self {
            space: Arc::clone(&self.space),
            entries,
        }
    }
}

/// Restriction on raw index slices; bit `i` of `mask` keeps user `i`.
pub(crate) fn restricted_indices(entries: &[u8], mask: u64) -> Vec<u8> {
    entries
        .iter()
        .enumerate()
        .map(|(i, &e)| if mask >> i & 1 == 1 { e } else { 0 })
        .collect()
}
