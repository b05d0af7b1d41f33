//! Best responses and Nash equilibria under fair payments.
//!
//! A user at level `l` receives `alpha * phi_i(l; rho_-i)` and pays their
//! sensitivity cost `c_i(l)`; equilibria are fixed points of the induced
//! best-response map. Pure equilibria are found by a tree search over
//! symmetry-group level counts; the binary symmetric game is analysed in
//! mixed strategies through the expected relative payoff `gamma(p)`, and
//! the two-player asymmetric game through its threshold table.

use crate::error::{Error, Result};
use crate::fed::UserProfile;
use crate::space::PrivacyVector;
use crate::utility::CoalitionUtility;
use crate::valuation::{
    check_alpha, shapley_users_only_capped, user_weights, GroupedEvaluator,
};

/// Absolute tolerance for payoff ties and equilibrium certificates.
pub const NE_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Count-form utilities (binary symmetric games)
// ---------------------------------------------------------------------------

/// Utility of a binary-level game with exchangeable users, as a function of
/// how many users picked the less private level.
#[derive(Debug, Clone, PartialEq)]
pub struct CountUtility {
    values: Vec<f64>,
}

impl CountUtility {
    /// `values[k]` is the utility when exactly `k` users share at the less
    /// private level; the slice length is `N + 1`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidUtility(
                "count utility needs at least one user".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidUtility(
                "count utility values must be finite".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn n_users(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Expected utility when every user independently shares with
    /// probability `1 - p`.
    pub fn expected_under_mixed(&self, p: f64) -> f64 {
        let n = self.n_users();
        (0..=n)
            .map(|k| {
                crate::valuation::binomial(n, k)
                    * (1.0 - p).powi(k as i32)
                    * p.powi((n - k) as i32)
                    * self.values[k]
            })
            .sum()
    }
}

/// Outcome of checking the monotone and diminishing-returns assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub monotone: bool,
    pub diminishing: bool,
    pub violations: Vec<String>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.diminishing
    }
}

/// Checks that `U(k)` is strictly increasing and its increments strictly
/// decreasing in the number of sharing users.
pub fn validate_assumptions(u: &CountUtility) -> AssumptionReport {
    let v = u.values();
    let mut report = AssumptionReport {
        monotone: true,
        diminishing: true,
        violations: Vec::new(),
    };
    for k in 0..v.len() - 1 {
        if !(v[k + 1] > v[k]) {
            report.monotone = false;
            report
                .violations
                .push(format!("U({}) = {} does not exceed U({}) = {}", k + 1, v[k + 1], k, v[k]));
        }
    }
    for k in 0..v.len().saturating_sub(2) {
        let d0 = v[k + 1] - v[k];
        let d1 = v[k + 2] - v[k + 1];
        if !(d1 < d0) {
            report.diminishing = false;
            report.violations.push(format!(
                "increment {} -> {} does not decrease ({} then {})",
                k,
                k + 2,
                d0,
                d1
            ));
        }
    }
    report
}

// ---------------------------------------------------------------------------
// The expected relative payoff gamma
// ---------------------------------------------------------------------------

/// Value (at `alpha = 1`) of a user at the less private level when exactly
/// `k` of the `N - 1` others also share; users at the more private level are
/// null players of the restricted game.
fn share_value_given_k_others(u: &CountUtility, k: usize) -> f64 {
    let n = u.n_users();
    let weights = user_weights(n);
    let hidden = n - 1 - k;
    let mut acc = 0.0;
    // Subsets of the others: m of the k sharers, s - m of the hidden users.
    for m in 0..=k {
        let delta = u.value(m + 1) - u.value(m);
        let mut w = 0.0;
        for s in m..=(m + hidden) {
            w += crate::valuation::binomial(k, m)
                * crate::valuation::binomial(hidden, s - m)
                * weights[s];
        }
        acc += w * delta;
    }
    acc
}

/// The expected payment gain for switching to the less private level when
/// every other user plays the more private level with probability `p`.
///
/// Rejects count utilities that fail the monotonicity assumption.
pub fn symmetric_gamma(u: &CountUtility, p: f64) -> Result<f64> {
    let report = validate_assumptions(u);
    if !report.monotone {
        return Err(Error::AssumptionViolated(report.violations.join("; ")));
    }
    Ok(symmetric_gamma_unchecked(u, p))
}

/// As [`symmetric_gamma`] without the assumption check.
pub fn symmetric_gamma_unchecked(u: &CountUtility, p: f64) -> f64 {
    let n = u.n_users();
    (0..n)
        .map(|k| {
            crate::valuation::binomial(n - 1, k)
                * (1.0 - p).powi(k as i32)
                * p.powi((n - 1 - k) as i32)
                * share_value_given_k_others(u, k)
        })
        .sum()
}

/// `gamma` together with its range, validated non-negative and
/// nondecreasing at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaProfile {
    /// `diffs[k]`: payment gap when `k` of the others share.
    diffs: Vec<f64>,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl GammaProfile {
    pub fn from_count_utility(u: &CountUtility) -> Result<Self> {
        let n = u.n_users();
        let diffs = (0..n).map(|k| share_value_given_k_others(u, k)).collect();
        Self::from_diffs(diffs)
    }

    /// Builds a profile from the per-count payment gaps directly; used by
    /// the two-player game where the gaps come from the allocation tables.
    pub fn from_diffs(diffs: Vec<f64>) -> Result<Self> {
        if diffs.is_empty() {
            return Err(Error::InvalidParameter("gamma needs at least one user".into()));
        }
        let profile = Self {
            gamma_min: 0.0,
            gamma_max: 0.0,
            diffs,
        };
        // gamma must be non-negative and nondecreasing on [0, 1].
        let mut last = f64::NEG_INFINITY;
        for i in 0..=100 {
            let g = profile.eval(i as f64 / 100.0);
            if g < -1e-12 {
                return Err(Error::AssumptionViolated(format!(
                    "gamma({}) = {g} is negative",
                    i as f64 / 100.0
                )));
            }
            if g < last - 1e-12 {
                return Err(Error::AssumptionViolated(format!(
                    "gamma decreases near p = {}",
                    i as f64 / 100.0
                )));
            }
            last = g;
        }
        let gamma_min = profile.eval(0.0);
        let gamma_max = profile.eval(1.0);
        Ok(Self {
            gamma_min,
            gamma_max,
            ..profile
        })
    }

    pub fn n_users(&self) -> usize {
        self.diffs.len()
    }

    pub fn eval(&self, p: f64) -> f64 {
        // diffs[k] is conditioned on k of the N - 1 others sharing.
        let trials = self.diffs.len() - 1;
        self.diffs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                crate::valuation::binomial(trials, k)
                    * (1.0 - p).powi(k as i32)
                    * p.powi((trials - k) as i32)
                    * d
            })
            .sum()
    }

    /// Monotone bisection for `gamma(p) = y`; `y` must lie in
    /// `[gamma_min, gamma_max]`.
    pub fn invert(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

// ---------------------------------------------------------------------------
// Symmetric mixed equilibria
// ---------------------------------------------------------------------------

/// A symmetric mixed strategy: the probability of the more private level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedSymmetricStrategy {
    pub p: f64,
}

/// Symmetric equilibrium of the binary game at a given payment fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymmetricNe {
    Point {
        strategy: MixedSymmetricStrategy,
        residual: f64,
    },
    /// Flat gamma with `c/alpha` exactly on it: every `p` is an equilibrium.
    FullInterval,
}

/// Squared one-sided deviation residual of a symmetric strategy; zero
/// exactly at the equilibria.
pub fn symmetric_ne_residual(u: &CountUtility, p: f64, c: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_probability(p)?;
    let gap = c - alpha * symmetric_gamma_unchecked(u, p);
    Ok(residual_from_gap(p, gap))
}

fn residual_from_gap(p: f64, gap: f64) -> f64 {
    let a = ((1.0 - p) * gap).max(0.0);
    let b = (-p * gap).max(0.0);
    a * a + b * b
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// The symmetric equilibrium strategy induced by the payment fraction:
/// stay private when `alpha < c/gamma_max`, share when `alpha > c/gamma_min`,
/// otherwise the indifference point `gamma^{-1}(c/alpha)`.
pub fn p_star(gamma: &GammaProfile, c: f64, alpha: f64) -> Result<SymmetricNe> {
    check_alpha(alpha)?;
    if !(c >= 0.0) {
        return Err(Error::InvalidParameter(format!("cost {c} must be >= 0")));
    }
    let flat = (gamma.gamma_max - gamma.gamma_min).abs() <= 1e-15;
    // The target gamma value an indifferent user would see.
    let target = if alpha == 0.0 { f64::INFINITY } else { c / alpha };
    if alpha == 0.0 && c == 0.0 {
        return Ok(SymmetricNe::FullInterval);
    }
    if flat && (target - gamma.gamma_max).abs() <= 1e-12 {
        return Ok(SymmetricNe::FullInterval);
    }
    let p = if target > gamma.gamma_max {
        1.0
    } else if target < gamma.gamma_min {
        0.0
    } else {
        gamma.invert(target)
    };
    let gap = c - alpha * gamma.eval(p);
    let residual = residual_from_gap(p, gap);
    Ok(SymmetricNe::Point {
        strategy: MixedSymmetricStrategy { p },
        residual,
    })
}

// ---------------------------------------------------------------------------
// Equilibrium containers
// ---------------------------------------------------------------------------

/// One equilibrium point of any of the supported kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum EquilibriumPoint {
    /// A pure profile, one level index per user.
    Pure(Vec<u8>),
    /// A symmetric mixed strategy.
    Symmetric(MixedSymmetricStrategy),
    /// Mixed strategies of the two-player game; each entry is the
    /// probability of the more private level.
    TwoPlayer { p: f64, q: f64 },
}

/// An equilibrium with its verification residual (maximum unilateral gain,
/// or squared deviation residual for mixed points).
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedEquilibrium {
    pub point: EquilibriumPoint,
    pub residual: f64,
}

/// The set of equilibria found by a search, with any verification notes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeResult {
    pub equilibria: Vec<CertifiedEquilibrium>,
    pub tolerance: f64,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// Best response
// ---------------------------------------------------------------------------

fn check_profiles(u: &CoalitionUtility, profiles: &[UserProfile]) -> Result<()> {
    if profiles.len() != u.n_users() {
        return Err(Error::DimensionMismatch {
            expected: u.n_users(),
            got: profiles.len(),
        });
    }
    for (i, p) in profiles.iter().enumerate() {
        p.check_costs(u.space().len())
            .map_err(|e| Error::InvalidParameter(format!("user {i}: {e}")))?;
    }
    Ok(())
}

/// All levels maximising `alpha * phi_user(l; rho_-i) - c_user(l)`; ties
/// within the certificate tolerance are returned together.
///
/// The entry of `rho` at `user` is ignored.
pub fn best_response(
    u: &CoalitionUtility,
    profiles: &[UserProfile],
    rho: &PrivacyVector,
    alpha: f64,
    user: usize,
) -> Result<Vec<usize>> {
    check_alpha(alpha)?;
    check_profiles(u, profiles)?;
    u.check_vector(rho)?;
    let costs = &profiles[user].c;
    let mut payoffs = Vec::with_capacity(u.space().len());
    for level in 0..u.space().len() {
        let candidate = rho.with_user_level(user, level)?;
        let phi = shapley_users_only_capped(u, &candidate, alpha, usize::MAX)?;
        payoffs.push(phi.user_values[user] - costs[level]);
    }
    let best = payoffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((0..payoffs.len())
        .filter(|&l| payoffs[l] >= best - NE_TOLERANCE)
        .collect())
}

// ---------------------------------------------------------------------------
// Pure-equilibrium tree search
// ---------------------------------------------------------------------------

/// Precomputed payments for the pure-equilibrium search.
///
/// Profiles are grouped into level-count partitions per symmetry group (all
/// members of a partition share the same utility and the same per-cell
/// payments); concrete equilibria within a partition are recovered by
/// assigning users to level slots under their best-response constraints.
pub struct NeSearch {
    groups: Vec<Vec<usize>>,
    n_users: usize,
    n_levels: usize,
    costs: Vec<Vec<f64>>,
    partitions: Vec<Partition>,
}

struct Partition {
    /// Per-group, per-level member counts, flattened `[group][level]`.
    comp: Vec<u16>,
    /// Utility of any profile in the partition.
    utility: f64,
    /// Payment at `alpha = 1` of a user in `[group][level]`; level 0 pays 0.
    pay: Vec<f64>,
    /// Payment at `alpha = 1` of a user from `[group][from]` deviating to
    /// `[to]`, with the rest of the profile unchanged.
    dev: Vec<f64>,
}

impl Partition {
    fn pay_at(&self, n_levels: usize, g: usize, l: usize) -> f64 {
        self.pay[g * n_levels + l]
    }

    fn dev_at(&self, n_levels: usize, g: usize, from: usize, to: usize) -> f64 {
        self.dev[(g * n_levels + from) * n_levels + to]
    }
}

impl NeSearch {
    pub fn new(u: &CoalitionUtility, profiles: &[UserProfile]) -> Result<Self> {
        check_profiles(u, profiles)?;
        let n = u.n_users();
        let n_levels = u.space().len();
        let groups: Vec<Vec<usize>> = match u.symmetry_groups() {
            Some(gs) => {
                // Spot-check the declared symmetry on a mixed probe profile.
                let probe = PrivacyVector::new(
                    std::sync::Arc::clone(u.space()),
                    (0..n).map(|i| (i % n_levels) as u8).collect(),
                )?;
                u.validate_symmetry(&probe)?;
                gs.to_vec()
            }
            None => (0..n).map(|i| vec![i]).collect(),
        };
        let costs: Vec<Vec<f64>> = profiles.iter().map(|p| p.c.clone()).collect();

        let ev = GroupedEvaluator::new_with_groups(u, groups.clone());
        let weights = user_weights(n);
        let mut partitions = Vec::new();
        let mut comp = vec![0u16; groups.len() * n_levels];
        enumerate_compositions(&groups, n_levels, 0, &mut comp, &mut |comp| {
            partitions.push(build_partition(&ev, comp, &groups, n_levels, &weights));
        });
        Ok(Self {
            groups,
            n_users: n,
            n_levels,
            costs,
            partitions,
        })
    }

    /// Maximum gain user `i` (a member of group `g`) can get by leaving
    /// level `l`, under partition `part` and payment fraction `alpha`.
    fn max_gain(&self, part: &Partition, g: usize, i: usize, l: usize, alpha: f64) -> f64 {
        let own = alpha * part.pay_at(self.n_levels, g, l) - self.costs[i][l];
        let mut best = f64::NEG_INFINITY;
        for to in 0..self.n_levels {
            if to == l {
                continue;
            }
            let gain = alpha * part.dev_at(self.n_levels, g, l, to) - self.costs[i][to] - own;
            best = best.max(gain);
        }
        best
    }

    /// All pure equilibria at the given payment fraction, lexicographically
    /// sorted. `strict` demands every deviation strictly lose.
    pub fn equilibria_at(&self, alpha: f64, strict: bool) -> Result<NeResult> {
        check_alpha(alpha)?;
        let mut found: Vec<(Vec<u8>, f64)> = Vec::new();
        for part in &self.partitions {
            let mut per_group: Vec<Vec<(Vec<u8>, f64)>> = Vec::with_capacity(self.groups.len());
            let mut dead = false;
            for (g, members) in self.groups.iter().enumerate() {
                let assignments = self.group_assignments(part, g, members, alpha, strict, false);
                if assignments.is_empty() {
                    dead = true;
                    break;
                }
                per_group.push(assignments);
            }
            if dead {
                continue;
            }
            // Cartesian product of per-group assignments.
            let mut stack: Vec<(Vec<u8>, f64)> = vec![(vec![0u8; self.n_users], f64::NEG_INFINITY)];
            for (g, assignments) in per_group.iter().enumerate() {
                let mut next = Vec::with_capacity(stack.len() * assignments.len());
                for (base, base_gain) in &stack {
                    for (assign, gain) in assignments {
                        let mut prof = base.clone();
                        for (slot, &i) in self.groups[g].iter().enumerate() {
                            prof[i] = assign[slot];
                        }
                        next.push((prof, base_gain.max(*gain)));
                    }
                }
                stack = next;
            }
            found.extend(stack);
        }
        found.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(NeResult {
            equilibria: found
                .into_iter()
                .map(|(prof, gain)| CertifiedEquilibrium {
                    point: EquilibriumPoint::Pure(prof),
                    residual: gain,
                })
                .collect(),
            tolerance: NE_TOLERANCE,
            notes: Vec::new(),
        })
    }

    /// The platform-best (or worst) equilibrium at `alpha`:
    /// `(profile, utility, residual)`.
    pub fn select_ne_at(
        &self,
        alpha: f64,
        strict: bool,
        pessimistic: bool,
    ) -> Result<Option<(Vec<u8>, f64, f64)>> {
        check_alpha(alpha)?;
        let mut best: Option<(Vec<u8>, f64, f64)> = None;
        for part in &self.partitions {
            let better = match &best {
                None => true,
                Some((_, u, _)) => {
                    if pessimistic {
                        part.utility < *u - 1e-15
                    } else {
                        part.utility > *u + 1e-15
                    }
                }
            };
            let tie = best
                .as_ref()
                .map(|(_, u, _)| (part.utility - u).abs() <= 1e-15)
                .unwrap_or(false);
            if !better && !tie {
                continue;
            }
            if let Some((witness, gain)) = self.partition_witness(part, alpha, strict) {
                match &best {
                    Some((w, _, _)) if tie => {
                        if witness < *w {
                            best = Some((witness, part.utility, gain));
                        }
                    }
                    _ => best = Some((witness, part.utility, gain)),
                }
            }
        }
        Ok(best)
    }

    /// Lexicographically smallest equilibrium profile within a partition,
    /// if one exists.
    fn partition_witness(&self, part: &Partition, alpha: f64, strict: bool) -> Option<(Vec<u8>, f64)> {
        let mut profile = vec![0u8; self.n_users];
        let mut worst_gain = f64::NEG_INFINITY;
        for (g, members) in self.groups.iter().enumerate() {
            let mut first = self.group_assignments(part, g, members, alpha, strict, true);
            let (assign, gain) = first.pop()?;
            for (slot, &i) in members.iter().enumerate() {
                profile[i] = assign[slot];
            }
            worst_gain = worst_gain.max(gain);
        }
        Some((profile, worst_gain))
    }

    /// Valid member-to-level assignments of one group under a partition's
    /// counts; depth-first with capacity pruning, members in index order so
    /// the first assignment found is lexicographically smallest.
    fn group_assignments(
        &self,
        part: &Partition,
        g: usize,
        members: &[usize],
        alpha: f64,
        strict: bool,
        first_only: bool,
    ) -> Vec<(Vec<u8>, f64)> {
        let mut caps: Vec<u16> = (0..self.n_levels)
            .map(|l| part.comp[g * self.n_levels + l])
            .collect();
        // Feasibility of each member at each level under best response.
        let feasible: Vec<Vec<(bool, f64)>> = members
            .iter()
            .map(|&i| {
                (0..self.n_levels)
                    .map(|l| {
                        if caps[l] == 0 {
                            return (false, f64::INFINITY);
                        }
                        let gain = self.max_gain(part, g, i, l, alpha);
                        let ok = if strict {
                            gain < -NE_TOLERANCE
                        } else {
                            gain <= NE_TOLERANCE
                        };
                        (ok, gain)
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        let mut current = vec![0u8; members.len()];
        dfs_assign(
            &feasible,
            &mut caps,
            0,
            &mut current,
            f64::NEG_INFINITY,
            first_only,
            &mut out,
        );
        out
    }

    pub fn n_partitions(&self) -> usize {
        self.partitions.len()
    }
}

fn dfs_assign(
    feasible: &[Vec<(bool, f64)>],
    caps: &mut Vec<u16>,
    member: usize,
    current: &mut Vec<u8>,
    worst_gain: f64,
    first_only: bool,
    out: &mut Vec<(Vec<u8>, f64)>,
) -> bool {
    if member == feasible.len() {
        out.push((current.clone(), worst_gain));
        return first_only;
    }
    for l in 0..caps.len() {
        if caps[l] == 0 {
            continue;
        }
        let (ok, gain) = feasible[member][l];
        if !ok {
            continue;
        }
        caps[l] -= 1;
        current[member] = l as u8;
        let done = dfs_assign(
            feasible,
            caps,
            member + 1,
            current,
            worst_gain.max(gain),
            first_only,
            out,
        );
        caps[l] += 1;
        if done {
            return true;
        }
    }
    false
}

fn enumerate_compositions(
    groups: &[Vec<usize>],
    n_levels: usize,
    g: usize,
    comp: &mut Vec<u16>,
    emit: &mut impl FnMut(&[u16]),
) {
    if g == groups.len() {
        emit(comp);
        return;
    }
    let size = groups[g].len() as u16;
    fn rec(
        comp: &mut Vec<u16>,
        base: usize,
        level: usize,
        n_levels: usize,
        remaining: u16,
        cont: &mut dyn FnMut(&mut Vec<u16>),
    ) {
        if level == n_levels - 1 {
            comp[base + level] = remaining;
            cont(comp);
            return;
        }
        for k in 0..=remaining {
            comp[base + level] = k;
            rec(comp, base, level + 1, n_levels, remaining - k, cont);
        }
    }
    let base = g * n_levels;
    rec(comp, base, 0, n_levels, size, &mut |c| {
        enumerate_compositions(groups, n_levels, g + 1, c, emit)
    });
}

fn build_partition(
    ev: &GroupedEvaluator,
    comp: &[u16],
    groups: &[Vec<usize>],
    n_levels: usize,
    weights: &[f64],
) -> Partition {
    let n_groups = groups.len();
    let counts: Vec<u16> = (0..n_groups)
        .flat_map(|g| (1..n_levels).map(move |l| comp[g * n_levels + l]))
        .collect();
    let zeros: usize = (0..n_groups).map(|g| comp[g * n_levels] as usize).sum();
    let utility = ev.eval_counts(&counts);

    let mut pay = vec![0.0; n_groups * n_levels];
    let mut dev = vec![0.0; n_groups * n_levels * n_levels];
    for g in 0..n_groups {
        for from in 0..n_levels {
            if comp[g * n_levels + from] == 0 {
                continue;
            }
            // Remove one user of (g, from) from the profile.
            let mut capacities = counts.clone();
            let mut zero_others = zeros;
            if from == 0 {
                zero_others -= 1;
            } else {
                capacities[ev.cell_of(g, from)] -= 1;
            }
            if from > 0 {
                pay[g * n_levels + from] =
                    ev.value_of_target(&capacities, ev.cell_of(g, from), zero_others, weights);
            }
            for to in 0..n_levels {
                if to == from {
                    continue;
                }
                let v = if to == 0 {
                    0.0
                } else {
                    ev.value_of_target(&capacities, ev.cell_of(g, to), zero_others, weights)
                };
                dev[(g * n_levels + from) * n_levels + to] = v;
            }
        }
    }
    Partition {
        comp: comp.to_vec(),
        utility,
        pay,
        dev,
    }
}

/// All pure (weak) Nash equilibria at the given payment fraction.
pub fn find_pure_ne(
    u: &CoalitionUtility,
    profiles: &[UserProfile],
    alpha: f64,
) -> Result<NeResult> {
    NeSearch::new(u, profiles)?.equilibria_at(alpha, false)
}

// ---------------------------------------------------------------------------
// Two-player asymmetric game
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ThresholdCase {
    /// `alpha <= c/gamma_max`: never engages.
    Below,
    /// `alpha` between the thresholds.
    Interior,
    /// `alpha > c/gamma_min`: always engages.
    Above,
}

/// The case(s) a user falls into; two cases at an exact threshold tie.
fn threshold_cases(c: f64, alpha: f64, gamma: &GammaProfile) -> Vec<ThresholdCase> {
    const TIE: f64 = 1e-12;
    let lo = c - alpha * gamma.gamma_max; // > 0: never engages
    let hi = c - alpha * gamma.gamma_min; // < 0: always engages
    let mut cases = Vec::new();
    if lo > -TIE {
        cases.push(ThresholdCase::Below);
    }
    if lo <= TIE && hi >= -TIE {
        cases.push(ThresholdCase::Interior);
    }
    if hi < TIE {
        cases.push(ThresholdCase::Above);
    }
    cases
}

/// Maximum unilateral gain of the two-player mixed profile `(p, q)`.
pub fn two_player_max_gain(
    gamma: &GammaProfile,
    c1: f64,
    c2: f64,
    alpha: f64,
    p: f64,
    q: f64,
) -> f64 {
    let d1 = c1 - alpha * gamma.eval(q);
    let d2 = c2 - alpha * gamma.eval(p);
    let g1 = ((1.0 - p) * d1).max(-p * d1).max(0.0);
    let g2 = ((1.0 - q) * d2).max(-q * d2).max(0.0);
    g1.max(g2)
}

/// Equilibria of the binary two-player game with distinct sensitivities,
/// classified by the threshold table and re-verified by best response.
/// `p` and `q` are the probabilities of the more private level for the two
/// players. At an exact threshold tie the adjacent cells' candidates are
/// merged. Candidates that fail verification are dropped and noted.
pub fn asym_two_player_ne(
    c1: f64,
    c2: f64,
    alpha: f64,
    gamma: &GammaProfile,
) -> Result<NeResult> {
    check_alpha(alpha)?;
    if !(c1 >= 0.0 && c2 >= 0.0) {
        return Err(Error::InvalidParameter(
            "sensitivities must be non-negative".into(),
        ));
    }
    let cases1 = threshold_cases(c1, alpha, gamma);
    let cases2 = threshold_cases(c2, alpha, gamma);
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for &k1 in &cases1 {
        for &k2 in &cases2 {
            use ThresholdCase::*;
            match (k1, k2) {
                (Below, Below) => candidates.push((1.0, 1.0)),
                (Interior, Below) | (Above, Below) | (Above, Interior) => {
                    candidates.push((0.0, 1.0))
                }
                (Below, Interior) | (Below, Above) | (Interior, Above) => {
                    candidates.push((1.0, 0.0))
                }
                (Above, Above) => candidates.push((0.0, 0.0)),
                (Interior, Interior) => {
                    candidates.push((1.0, 0.0));
                    candidates.push((0.0, 1.0));
                    // Interior mixed point: each user's mixing makes the
                    // *other* indifferent.
                    if alpha > 0.0 {
                        candidates.push((gamma.invert(c2 / alpha), gamma.invert(c1 / alpha)));
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    candidates.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);

    let mut result = NeResult {
        tolerance: NE_TOLERANCE,
        ..Default::default()
    };
    for (p, q) in candidates {
        let gain = two_player_max_gain(gamma, c1, c2, alpha, p, q);
        if gain <= NE_TOLERANCE {
            result.equilibria.push(CertifiedEquilibrium {
                point: EquilibriumPoint::TwoPlayer { p, q },
                residual: gain,
            });
        } else {
            result.notes.push(format!(
                "table candidate (p={p}, q={q}) failed best-response verification at \
                 c1={c1}, c2={c2}, alpha={alpha} (gain {gain:e})"
            ));
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp_example::DpExample;
    use std::sync::Arc;

    fn dp_count() -> CountUtility {
        DpExample::new(f64::INFINITY).unwrap().count_utility()
    }

    fn dp_gamma() -> GammaProfile {
        GammaProfile::from_count_utility(&dp_count()).unwrap()
    }

    fn dp_profiles(c: f64) -> Vec<UserProfile> {
        vec![
            UserProfile::new(1, 1.0, vec![0.0, c]).unwrap(),
            UserProfile::new(1, 1.0, vec![0.0, c]).unwrap(),
        ]
    }

    #[test]
    fn gamma_matches_closed_form() {
        let g = dp_gamma();
        for i in 0..=10 {
            let p = i as f64 / 10.0;
            assert!((g.eval(p) - (0.5 + p / 6.0)).abs() < 1e-15);
        }
        assert!((g.gamma_min - 0.5).abs() < 1e-15);
        assert!((g.gamma_max - 2.0 / 3.0).abs() < 1e-15);
        assert!((symmetric_gamma(&dp_count(), 0.3).unwrap() - 0.55).abs() < 1e-15);
    }

    #[test]
    fn constant_utility_has_zero_gamma() {
        let u = CountUtility::new(vec![3.0, 3.0, 3.0]).unwrap();
        assert_eq!(symmetric_gamma_unchecked(&u, 0.5), 0.0);
    }

    #[test]
    fn p_star_three_branches() {
        let g = dp_gamma();
        let c = 0.4;
        match p_star(&g, c, 0.5).unwrap() {
            SymmetricNe::Point { strategy, .. } => assert_eq!(strategy.p, 1.0),
            _ => panic!("expected a point"),
        }
        match p_star(&g, c, 0.7).unwrap() {
            SymmetricNe::Point { strategy, residual } => {
                assert!((strategy.p - 3.0 / 7.0).abs() < 1e-9);
                assert!(residual <= 1e-9);
            }
            _ => panic!("expected a point"),
        }
        match p_star(&g, c, 0.9).unwrap() {
            SymmetricNe::Point { strategy, .. } => assert_eq!(strategy.p, 0.0),
            _ => panic!("expected a point"),
        }
    }

    #[test]
    fn p_star_flat_gamma_full_interval() {
        let g = GammaProfile::from_diffs(vec![0.5, 0.5]).unwrap();
        assert_eq!(p_star(&g, 0.25, 0.5).unwrap(), SymmetricNe::FullInterval);
        match p_star(&g, 0.4, 0.5).unwrap() {
            SymmetricNe::Point { strategy, .. } => assert_eq!(strategy.p, 1.0),
            _ => panic!("expected a point"),
        }
    }

    #[test]
    fn residual_formula() {
        let u = dp_count();
        // p = 0 with alpha = 1 > 2c: consistent equilibrium.
        assert_eq!(symmetric_ne_residual(&u, 0.0, 0.4, 1.0).unwrap(), 0.0);
        // p = 1 is not an equilibrium at alpha = 1.
        let r = symmetric_ne_residual(&u, 1.0, 0.4, 1.0).unwrap();
        assert!((r - (2.0 / 3.0 - 0.4) * (2.0 / 3.0 - 0.4)).abs() < 1e-12);
    }

    #[test]
    fn assumptions_reports() {
        assert!(validate_assumptions(&dp_count()).passed());
        let linear = CountUtility::new(vec![0.0, 1.0, 2.0]).unwrap();
        let r = validate_assumptions(&linear);
        assert!(r.monotone && !r.diminishing);
        let convex = CountUtility::new(vec![0.0, 1.0, 4.0]).unwrap();
        assert!(!validate_assumptions(&convex).diminishing);
        let flat = CountUtility::new(vec![0.0, 1.0, 1.0]).unwrap();
        assert!(!validate_assumptions(&flat).monotone);
    }

    #[test]
    fn best_response_dp_example() {
        let ex = DpExample::new(f64::INFINITY).unwrap();
        let u = ex.coalition_utility();
        let profiles = dp_profiles(0.4);
        let rho =
            PrivacyVector::new(Arc::clone(u.space()), vec![0, 1]).unwrap();
        // Other user shares; sharing pays 0.5 - 0.4 > 0.
        let br = best_response(&u, &profiles, &rho, 1.0, 0).unwrap();
        assert_eq!(br, vec![1]);
        // No payment, positive cost: stay at zero.
        let br0 = best_response(&u, &profiles, &rho, 0.0, 0).unwrap();
        assert_eq!(br0, vec![0]);
    }

    #[test]
    fn find_pure_ne_dp_example() {
        let ex = DpExample::new(f64::INFINITY).unwrap();
        let u = ex.coalition_utility();
        let nes = find_pure_ne(&u, &dp_profiles(0.4), 1.0).unwrap();
        let profiles: Vec<_> = nes
            .equilibria
            .iter()
            .map(|e| match &e.point {
                EquilibriumPoint::Pure(p) => p.clone(),
                _ => panic!("pure expected"),
            })
            .collect();
        assert!(profiles.contains(&vec![1, 1]));
        for e in &nes.equilibria {
            assert!(e.residual <= NE_TOLERANCE);
        }
    }

    #[test]
    fn zero_alpha_only_zero_profile() {
        let ex = DpExample::new(f64::INFINITY).unwrap();
        let u = ex.coalition_utility();
        let nes = find_pure_ne(&u, &dp_profiles(0.4), 0.0).unwrap();
        assert_eq!(nes.equilibria.len(), 1);
        assert_eq!(
            nes.equilibria[0].point,
            EquilibriumPoint::Pure(vec![0, 0])
        );
    }

    #[test]
    fn asym_table_examples() {
        let g = dp_gamma();
        // c1 = 0.2, c2 = 0.5, alpha = 0.5: user 1 above threshold, user 2 below.
        let r = asym_two_player_ne(0.2, 0.5, 0.5, &g).unwrap();
        assert_eq!(r.equilibria.len(), 1);
        assert_eq!(
            r.equilibria[0].point,
            EquilibriumPoint::TwoPlayer { p: 0.0, q: 1.0 }
        );
        // alpha below both thresholds.
        let r = asym_two_player_ne(0.5, 0.6, 0.3, &g).unwrap();
        assert_eq!(
            r.equilibria[0].point,
            EquilibriumPoint::TwoPlayer { p: 1.0, q: 1.0 }
        );
        // alpha above both thresholds.
        let r = asym_two_player_ne(0.1, 0.2, 0.9, &g).unwrap();
        assert_eq!(
            r.equilibria[0].point,
            EquilibriumPoint::TwoPlayer { p: 0.0, q: 0.0 }
        );
        // Interior for both: three candidates, all verified.
        let r = asym_two_player_ne(0.45, 0.4, 0.75, &g).unwrap();
        assert_eq!(r.equilibria.len(), 3);
        assert!(r.notes.is_empty());
        for e in &r.equilibria {
            assert!(e.residual <= NE_TOLERANCE);
        }
    }
}
