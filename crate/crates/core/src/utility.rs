//! Coalition utility evaluators.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{PrivacySpace, PrivacyVector};

enum EvalKind {
    /// Dense table over the whole level grid, row-major with user 0 as the
    /// most significant digit. Only sensible while `|E|^N` stays small.
    Table(Vec<f64>),
    /// Arbitrary evaluator over level indices.
    Callback(Arc<dyn Fn(&[u8]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for EvalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalKind::Table(t) => f.debug_tuple("Table").field(&t.len()).finish(),
            EvalKind::Callback(_) => f.write_str("Callback"),
        }
    }
}

/// A deterministic map from privacy-level assignments to platform utility,
/// together with optional symmetry groups.
///
/// A symmetry group is a set of users such that permuting their levels
/// leaves the utility unchanged; declaring groups lets the fair-allocation
/// code collapse the `2^N` subset sums into per-group counting sums.
#[derive(Debug)]
pub struct CoalitionUtility {
    space: Arc<PrivacySpace>,
    n_users: usize,
    eval: EvalKind,
    symmetry: Option<Vec<Vec<usize>>>,
}

impl CoalitionUtility {
    /// Dense tabulated utility. `table[i]` is the value of the assignment
    /// whose mixed-radix encoding (user 0 most significant, base `|E|`) is `i`.
    pub fn tabulated(space: Arc<PrivacySpace>, n_users: usize, table: Vec<f64>) -> Result<Self> {
        let expected = space.len().checked_pow(n_users as u32).ok_or_else(|| {
            Error::InvalidUtility("level grid too large for a dense table".into())
        })?;
        if table.len() != expected {
            return Err(Error::InvalidUtility(format!(
                "table has {} entries, expected {}^{} = {}",
                table.len(),
                space.len(),
                n_users,
                expected
            )));
        }
        if let Some(bad) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidUtility(format!(
                "table contains a non-finite value {bad}"
            )));
        }
        Ok(Self {
            space,
            n_users,
            eval: EvalKind::Table(table),
            symmetry: None,
        })
    }

    /// Callback-backed utility. The closure receives one level index per
    /// user. It must be deterministic and finite at the all-zero vector.
    pub fn from_fn<F>(space: Arc<PrivacySpace>, n_users: usize, f: F) -> Result<Self>
    where
        F: Fn(&[u8]) -> f64 + Send + Sync + 'static,
    {
        let u = Self {
            space,
            n_users,
            eval: EvalKind::Callback(Arc::new(f)),
            symmetry: None,
        };
        let at_zero = u.eval_indices(&vec![0; n_users]);
        if !at_zero.is_finite() {
            return Err(Error::InvalidUtility(format!(
                "utility at the all-zero vector is {at_zero}"
            )));
        }
        Ok(u)
    }

    /// Declares symmetry groups; `groups` must partition `0..n_users`.
    pub fn with_symmetry(mut self, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; self.n_users];
        for g in &groups {
            for &i in g {
                if i >= self.n_users || seen[i] {
                    return Err(Error::InvalidUtility(format!(
                        "symmetry groups must partition the users; user {i} repeated or out of range"
                    )));
                }
                seen[i] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::InvalidUtility(
                "symmetry groups must cover every user".into(),
            ));
        }
        self.symmetry = Some(groups);
        Ok(self)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn space(&self) -> &Arc<PrivacySpace> {
        &self.space
    }

    pub fn symmetry_groups(&self) -> Option<&[Vec<usize>]> {
        self.symmetry.as_deref()
    }

    /// Evaluates the utility at a level assignment given as raw indices.
    pub fn eval_indices(&self, indices: &[u8]) -> f64 {
        debug_assert_eq!(indices.len(), self.n_users);
        match &self.eval {
            EvalKind::Table(t) => {
                let mut key = 0usize;
                for &e in indices {
                    key = key * self.space.len() + e as usize;
                }
                t[key]
            }
            EvalKind::Callback(f) => f(indices),
        }
    }

    /// Evaluates the utility at a [`PrivacyVector`], checking dimensions.
    pub fn eval(&self, rho: &PrivacyVector) -> Result<f64> {
        self.check_vector(rho)?;
        Ok(self.eval_indices(rho.indices()))
    }

    /// The platform-augmented utility `U(z, rho)`: zero whenever the
    /// platform stays out of the coalition.
    pub fn eval_with_platform(&self, z: bool, rho: &PrivacyVector) -> Result<f64> {
        if z {
            self.eval(rho)
        } else {
            self.check_vector(rho)?;
            Ok(0.0)
        }
    }

    pub(crate) fn check_vector(&self, rho: &PrivacyVector) -> Result<()> {
        if rho.len() != self.n_users {
            return Err(Error::DimensionMismatch {
                expected: self.n_users,
                got: rho.len(),
            });
        }
        if rho.space().as_ref() != self.space.as_ref() {
            return Err(Error::InvalidParameter(
                "privacy vector and utility use different privacy spaces".into(),
            ));
        }
        Ok(())
    }

    /// Spot-checks the declared symmetry groups by swapping levels of
    /// group members on `rho` and a few of its restrictions. Deterministic.
    pub fn validate_symmetry(&self, rho: &PrivacyVector) -> Result<()> {
        self.check_vector(rho)?;
        let groups = self.symmetry.as_ref().ok_or(Error::MissingSymmetry)?;
        let base = rho.indices();
        // Deterministic probe masks derived from a fixed xorshift stream.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let full: u64 = if self.n_users >= 64 {
            u64::MAX
        } else {
            (1u64 << self.n_users) - 1
        };
        let masks = [full, next() & full, next() & full, next() & full];
        for (gi, group) in groups.iter().enumerate() {
            if group.len() < 2 {
                continue;
            }
            for &mask in &masks {
                for pair in 0..group.len().min(3) {
                    let i = group[pair];
                    let j = group[(pair + 1 + (next() as usize % (group.len() - 1))) % group.len()];
                    if i == j {
                        continue;
                    }
                    let restricted = crate::space::restricted_indices(base, mask);
                    let mut swapped = restricted.clone();
                    swapped.swap(i, j);
                    let a = self.eval_indices(&restricted);
                    let b = self.eval_indices(&swapped);
                    let delta = (a - b).abs();
                    if !(delta <= 1e-9) {
                        return Err(Error::SymmetryViolation {
                            group: gi,
                            i,
                            j,
                            delta,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
