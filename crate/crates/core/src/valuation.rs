//! The two axiomatic fair allocations of coalition utility.
//!
//! Both allocations weight marginal contributions over restricted level
//! vectors `rho_S` (users outside `S` dropped to the zero level):
//!
//! * with the platform as a coalition member, the platform receives
//!   `1/(N+1) * sum_S U(z, rho_S) / C(N, |S|)` and user `i` receives
//!   `1/(N+1) * sum_{S not containing i} (U(z, rho_{S+i}) - U(z, rho_S)) / C(N, |S|+1)`;
//! * among users only, user `i` receives
//!   `alpha/N * sum_{S not containing i} (U(rho_{S+i}) - U(rho_S)) / C(N-1, |S|)`.
//!
//! Exact evaluation enumerates all `2^N` subsets. When the utility declares
//! symmetry groups, the same sums collapse to per-group subset counts with
//! binomial multiplicities, which is what [`grouped_shapley`] and the
//! equilibrium search use for larger `N`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::space::{restricted_indices, PrivacyVector};
use crate::utility::CoalitionUtility;

/// Default cap on users for exact subset enumeration.
pub const DEFAULT_EXACT_CAP: usize = 20;

/// Hard ceiling: the mask table needs `2^N` entries.
const EXACT_HARD_LIMIT: usize = 26;

/// A fair division of the total utility.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Per-user values, in user order.
    pub user_values: Vec<f64>,
    /// The platform's value; present in platform-coalition mode only.
    pub platform_value: Option<f64>,
    /// The payment fraction. Always 1 in platform-coalition mode.
    pub alpha: f64,
    /// The utility of the unrestricted profile this allocation divides.
    pub total_utility: f64,
}

impl Allocation {
    pub fn users_total(&self) -> f64 {
        self.user_values.iter().sum()
    }

    /// Residual of the efficiency axiom: in platform-coalition mode
    /// `phi_p + sum_i phi_i - U`, otherwise `sum_i phi_i - alpha * U`.
    pub fn efficiency_residual(&self) -> f64 {
        match self.platform_value {
            Some(p) => p + self.users_total() - self.total_utility,
            None => self.users_total() - self.alpha * self.total_utility,
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c * (n - k + i) as u128 / i as u128;
    }
    c as f64
}

/// Per-cardinality weights `1/(N * C(N-1, s))` of the users-only allocation.
pub(crate) fn user_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|s| 1.0 / (n as f64 * binomial(n - 1, s)))
        .collect()
}

/// Per-cardinality weights `1/((N+1) * C(N, s+1))` of the platform-coalition
/// allocation, for the user terms.
pub(crate) fn platform_mode_user_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|s| 1.0 / ((n + 1) as f64 * binomial(n, s + 1)))
        .collect()
}

/// Per-cardinality weights `1/((N+1) * C(N, s))` of the platform's own value.
pub(crate) fn platform_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|s| 1.0 / ((n + 1) as f64 * binomial(n, s)))
        .collect()
}

/// Sums a bucket of addends in a canonical order so that users with
/// identical addend multisets receive bit-identical values.
fn sorted_sum(bucket: &mut Vec<f64>) -> f64 {
    bucket.sort_by(f64::total_cmp);
    bucket.iter().sum()
}

fn check_exact_size(n: usize, cap: usize) -> Result<()> {
    if n > cap.min(EXACT_HARD_LIMIT) {
        return Err(Error::TooLargeForExact {
            n,
            cap: cap.min(EXACT_HARD_LIMIT),
        });
    }
    Ok(())
}

/// Utility of every restriction `rho_S`, indexed by the subset bit mask.
fn utilities_by_mask(u: &CoalitionUtility, entries: &[u8]) -> Vec<f64> {
    let n = entries.len();
    (0u64..1 << n)
        .map(|mask| u.eval_indices(&restricted_indices(entries, mask)))
        .collect()
}

/// Per-user values at `alpha = 1` by exact subset enumeration.
fn exact_user_values(u: &CoalitionUtility, entries: &[u8], weights: &[f64]) -> Vec<f64> {
    let n = entries.len();
    let util = utilities_by_mask(u, entries);
    let mut values = vec![0.0; n];
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n.max(1)];
    for (i, &level) in entries.iter().enumerate() {
        if level == 0 {
            continue; // restriction makes a zero-level user a null player
        }
        for b in &mut buckets {
            b.clear();
        }
        let bit = 1u64 << i;
        for mask in 0u64..1 << n {
            if mask & bit != 0 {
                continue;
            }
            buckets[mask.count_ones() as usize]
                .push(util[(mask | bit) as usize] - util[mask as usize]);
        }
        values[i] = buckets
            .iter_mut()
            .enumerate()
            .map(|(s, b)| weights[s] * sorted_sum(b))
            .sum();
    }
    values
}

/// Fair allocation with the platform as a coalition member (`z` is the
/// platform's participation flag).
pub fn shapley_with_platform(
    u: &CoalitionUtility,
    rho: &PrivacyVector,
    z: bool,
) -> Result<Allocation> {
    shapley_with_platform_capped(u, rho, z, DEFAULT_EXACT_CAP)
}

pub fn shapley_with_platform_capped(
    u: &CoalitionUtility,
    rho: &PrivacyVector,
    z: bool,
    cap: usize,
) -> Result<Allocation> {
    u.check_vector(rho)?;
    let n = u.n_users();
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one user".into()));
    }
    if !z {
        return Ok(Allocation {
            user_values: vec![0.0; n],
            platform_value: Some(0.0),
            alpha: 1.0,
            total_utility: 0.0,
        });
    }
    if check_exact_size(n, cap).is_err() {
        if u.symmetry_groups().is_some() {
            return grouped_with_platform(u, rho);
        }
        check_exact_size(n, cap)?;
    }
    let entries = rho.indices();
    let util = utilities_by_mask(u, entries);
    let vw = platform_weights(n);
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    for mask in 0u64..1 << n {
        buckets[mask.count_ones() as usize].push(util[mask as usize]);
    }
    let platform = buckets
        .iter_mut()
        .enumerate()
        .map(|(s, b)| vw[s] * sorted_sum(b))
        .sum();
    let user_values = exact_user_values(u, entries, &platform_mode_user_weights(n));
    Ok(Allocation {
        user_values,
        platform_value: Some(platform),
        alpha: 1.0,
        total_utility: util[(1u64 << n) as usize - 1],
    })
}

/// Fair allocation among users only, scaled by the payment fraction.
///
/// Beyond the exact cap this delegates to [`grouped_shapley`] when the
/// utility declares symmetry groups.
pub fn shapley_users_only(
    u: &CoalitionUtility,
    rho: &PrivacyVector,
    alpha: f64,
) -> Result<Allocation> {
    shapley_users_only_capped(u, rho, alpha, DEFAULT_EXACT_CAP)
}

pub fn shapley_users_only_capped(
    u: &CoalitionUtility,
    rho: &PrivacyVector,
    alpha: f64,
    cap: usize,
) -> Result<Allocation> {
    u.check_vector(rho)?;
    check_alpha(alpha)?;
    let n = u.n_users();
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one user".into()));
    }
    if check_exact_size(n, cap).is_err() {
        if u.symmetry_groups().is_some() {
            return grouped_shapley(u, rho, alpha);
        }
        check_exact_size(n, cap)?;
    }
    let entries = rho.indices();
    let at_one = exact_user_values(u, entries, &user_weights(n));
    Ok(Allocation {
        user_values: at_one.iter().map(|v| alpha * v).collect(),
        platform_value: None,
        alpha,
        total_utility: u.eval_indices(entries),
    })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Group-accelerated evaluation
// ---------------------------------------------------------------------------

/// Collapses the subset sums of the fair allocations into counting sums over
/// symmetry-group cells. A cell is a `(group, nonzero level)` pair; since the
/// utility is invariant under within-group level permutations, `U(rho_S)`
/// depends on `S` only through the per-cell membership counts and the number
/// of zero-level users only matters through `|S|`.
pub(crate) struct GroupedEvaluator<'a> {
    u: &'a CoalitionUtility,
    groups: Vec<Vec<usize>>,
    n_levels: usize,
    memo: std::cell::RefCell<HashMap<Vec<u16>, f64>>,
}

impl<'a> GroupedEvaluator<'a> {
    pub fn new(u: &'a CoalitionUtility) -> Result<Self> {
        let groups = u
            .symmetry_groups()
            .ok_or(Error::MissingSymmetry)?
            .to_vec();
        Ok(Self::new_with_groups(u, groups))
    }

    /// Evaluator over an explicit partition; used with singleton groups when
    /// the utility declares no symmetry.
    pub fn new_with_groups(u: &'a CoalitionUtility, groups: Vec<Vec<usize>>) -> Self {
        Self {
            u,
            n_levels: u.space().len(),
            groups,
            memo: std::cell::RefCell::new(HashMap::new()),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.groups.len() * (self.n_levels - 1)
    }

    pub fn cell_of(&self, group: usize, level: usize) -> usize {
        debug_assert!(level >= 1);
        group * (self.n_levels - 1) + level - 1
    }

    pub fn group_of_user(&self, user: usize) -> usize {
        self.groups
            .iter()
            .position(|g| g.contains(&user))
            .expect("groups partition the users")
    }

    /// Per-cell member counts of a concrete profile, plus the zero count.
    pub fn counts_of(&self, entries: &[u8]) -> (Vec<u16>, usize) {
        let mut counts = vec![0u16; self.n_cells()];
        let mut zeros = 0usize;
        for (g, members) in self.groups.iter().enumerate() {
            for &i in members {
                let level = entries[i] as usize;
                if level == 0 {
                    zeros += 1;
                } else {
                    counts[self.cell_of(g, level)] += 1;
                }
            }
        }
        (counts, zeros)
    }

    /// Utility of the profile with `counts[c]` users of cell `c` at that
    /// cell's level and everyone else at zero. Memoized; relies on the
    /// declared within-group exchangeability.
    pub fn eval_counts(&self, counts: &[u16]) -> f64 {
        if let Some(&v) = self.memo.borrow().get(counts) {
            return v;
        }
        let mut entries = vec![0u8; self.u.n_users()];
        for (g, members) in self.groups.iter().enumerate() {
            let mut cursor = 0usize;
            for level in 1..self.n_levels {
                let c = counts[self.cell_of(g, level)] as usize;
                for &i in &members[cursor..cursor + c] {
                    entries[i] = level as u8;
                }
                cursor += c;
            }
        }
        let v = self.u.eval_indices(&entries);
        self.memo.borrow_mut().insert(counts.to_vec(), v);
        v
    }

    /// Value of one user placed in `target_cell`, with the rest of the
    /// profile described by `capacities` (per-cell counts of the *other*
    /// users) and `zero_others` zero-level others. `weights[s]` is the
    /// per-cardinality weight of a size-`s` subset of the `N-1` others.
    pub fn value_of_target(
        &self,
        capacities: &[u16],
        target_cell: usize,
        zero_others: usize,
        weights: &[f64],
    ) -> f64 {
        // Weight seen by a subset holding t nonzero-level others, folding in
        // every way of adding z zero-level others.
        let nonzero_total: usize = capacities.iter().map(|&c| c as usize).sum();
        let folded: Vec<f64> = (0..=nonzero_total)
            .map(|t| {
                (0..=zero_others)
                    .map(|z| binomial(zero_others, z) * weights[z + t])
                    .sum()
            })
            .collect();

        let mut acc = 0.0;
        let mut j = vec![0u16; capacities.len()];
        loop {
            let mut mult = 1.0;
            let mut total = 0usize;
            for (&jc, &kc) in j.iter().zip(capacities) {
                mult *= binomial(kc as usize, jc as usize);
                total += jc as usize;
            }
            let without = self.eval_counts(&j);
            let mut with = j.clone();
            with[target_cell] += 1;
            let with_v = self.eval_counts(&with);
            acc += mult * folded[total] * (with_v - without);

            // next j-vector
            let mut pos = 0;
            loop {
                if pos == j.len() {
                    return acc;
                }
                if j[pos] < capacities[pos] {
                    j[pos] += 1;
                    break;
                }
                j[pos] = 0;
                pos += 1;
            }
        }
    }

    /// The platform's value term: `sum_S w(|S|) U(rho_S)` over subsets of
    /// all `N` users described by `capacities` and `zero_count`.
    pub fn platform_value(&self, capacities: &[u16], zero_count: usize, weights: &[f64]) -> f64 {
        let nonzero_total: usize = capacities.iter().map(|&c| c as usize).sum();
        let folded: Vec<f64> = (0..=nonzero_total)
            .map(|t| {
                (0..=zero_count)
                    .map(|z| binomial(zero_count, z) * weights[z + t])
                    .sum()
            })
            .collect();
        let mut acc = 0.0;
        let mut j = vec![0u16; capacities.len()];
        loop {
            let mut mult = 1.0;
            let mut total = 0usize;
            for (&jc, &kc) in j.iter().zip(capacities) {
                mult *= binomial(kc as usize, jc as usize);
                total += jc as usize;
            }
            acc += mult * folded[total] * self.eval_counts(&j);
            let mut pos = 0;
            loop {
                if pos == j.len() {
                    return acc;
                }
                if j[pos] < capacities[pos] {
                    j[pos] += 1;
                    break;
                }
                j[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// Users-only fair allocation computed through the symmetry groups instead
/// of the `2^N` subsets. Identical output to [`shapley_users_only`], with
/// cost polynomial in the per-group level counts.
pub fn grouped_shapley(
    u: &CoalitionUtility,
    rho: &PrivacyVector,
    alpha: f64,
) -> Result<Allocation> {
    u.check_vector(rho)?;
    check_alpha(alpha)?;
    u.validate_symmetry(rho)?;
    let n = u.n_users();
    let ev = GroupedEvaluator::new(u)?;
    let entries = rho.indices();
    let (counts, zeros) = ev.counts_of(entries);
    let weights = user_weights(n);

    let mut per_cell: HashMap<usize, f64> = HashMap::new();
    let mut user_values = vec![0.0; n];
    for (i, &level) in entries.iter().enumerate() {
        if level == 0 {
            continue;
        }
        let cell = ev.cell_of(ev.group_of_user(i), level as usize);
        let v = *per_cell.entry(cell).or_insert_with(|| {
            let mut capacities = counts.clone();
            capacities[cell] -= 1;
            ev.value_of_target(&capacities, cell, zeros, &weights)
        });
        user_values[i] = alpha * v;
    }
    Ok(Allocation {
        user_values,
        platform_value: None,
        alpha,
        total_utility: ev.eval_counts(&counts),
    })
}

/// Platform-coalition allocation through the symmetry groups; used when the
/// user count exceeds the exact cap.
fn grouped_with_platform(u: &CoalitionUtility, rho: &PrivacyVector) -> Result<Allocation> {
    u.validate_symmetry(rho)?;
    let n = u.n_users();
    let ev = GroupedEvaluator::new(u)?;
    let entries = rho.indices();
    let (counts, zeros) = ev.counts_of(entries);

    let platform = ev.platform_value(&counts, zeros, &platform_weights(n));
    let weights = platform_mode_user_weights(n);
    let mut per_cell: HashMap<usize, f64> = HashMap::new();
    let mut user_values = vec![0.0; n];
    for (i, &level) in entries.iter().enumerate() {
        if level == 0 {
            continue;
        }
        let cell = ev.cell_of(ev.group_of_user(i), level as usize);
        let v = *per_cell.entry(cell).or_insert_with(|| {
            let mut capacities = counts.clone();
            capacities[cell] -= 1;
            ev.value_of_target(&capacities, cell, zeros, &weights)
        });
        user_values[i] = v;
    }
    Ok(Allocation {
        user_values,
        platform_value: Some(platform),
        alpha: 1.0,
        total_utility: ev.eval_counts(&counts),
    })
}
