//! Federated mean estimation over the three-level privacy space.
//!
//! User `i` holds `n_i` samples with local mean `theta_i`; `s^2` is the
//! variance between user means and `r^2` the expected within-user variance.
//! At level 2 a user hands its local estimate to the platform, at level 1
//! it only joins a securely averaged pool, at level 0 it shares nothing.
//! For each target user the platform combines the pool average and the
//! direct estimates with the error-minimising weights; the coalition
//! utility is the importance-weighted log error reduction
//! `sum_i a_i log((r^2 + 2 s^2) / EMSE_i(rho))`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{PrivacySpace, PrivacyVector};
use crate::utility::CoalitionUtility;

/// Privacy level indices of the federated space.
pub const LEVEL_NONE: usize = 0;
pub const LEVEL_FEDERATE: usize = 1;
pub const LEVEL_DIRECT: usize = 2;

/// One user: sample count, importance weight, and per-level sensitivity costs.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub n: u64,
    pub a: f64,
    /// Cost of each level, `c[0] == 0`.
    pub c: Vec<f64>,
}

impl UserProfile {
    pub fn new(n: u64, a: f64, c: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample count must be >= 1".into()));
        }
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "importance weight must be positive, got {a}"
            )));
        }
        if c.is_empty() || c[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "sensitivity table must start with c(0) = 0".into(),
            ));
        }
        if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "sensitivity costs must be finite and non-negative".into(),
            ));
        }
        Ok(Self { n, a, c })
    }

    pub(crate) fn check_costs(&self, n_levels: usize) -> Result<()> {
        if self.c.len() != n_levels {
            return Err(Error::InvalidParameter(format!(
                "sensitivity table has {} levels, expected {}",
                self.c.len(),
                n_levels
            )));
        }
        Ok(())
    }
}

/// Model parameters: the two variances and the user roster.
#[derive(Debug, Clone, PartialEq)]
pub struct FedParams {
    pub s2: f64,
    pub r2: f64,
    pub users: Vec<UserProfile>,
}

impl FedParams {
    pub fn new(s2: f64, r2: f64, users: Vec<UserProfile>) -> Result<Self> {
        if !(s2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("s2 must be >= 0, got {s2}")));
        }
        if !(r2 > 0.0) {
            return Err(Error::InvalidParameter(format!("r2 must be > 0, got {r2}")));
        }
        if users.is_empty() {
            return Err(Error::InvalidParameter("need at least one user".into()));
        }
        Ok(Self { s2, r2, users })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Baseline error with no information at all.
    pub fn no_data_error(&self) -> f64 {
        self.r2 + 2.0 * self.s2
    }

    fn check_rho(&self, rho: &[u8]) -> Result<()> {
        if rho.len() != self.users.len() {
            return Err(Error::DimensionMismatch {
                expected: self.users.len(),
                got: rho.len(),
            });
        }
        if rho.iter().any(|&l| l as usize > LEVEL_DIRECT) {
            return Err(Error::InvalidParameter(
                "federated levels are {0, 1, 2}".into(),
            ));
        }
        Ok(())
    }
}

/// Pool statistics entering the optimal weights: the harmonic-mean pool
/// size, the pool variance `V_0 = r^2/n_bar + s^2`, the per-direct-user
/// variances `V_k = r^2/n_k + s^2`, and their harmonic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub n_bar: Option<f64>,
    pub v0: Option<f64>,
    pub v_bar: Option<f64>,
    /// `(user index, V_k)` for each level-2 user.
    pub v_direct: Vec<(usize, f64)>,
}

/// Estimator weights for one target user: the federated-pool weight and one
/// weight per level-2 user. They sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    pub fed_weight: f64,
    pub direct_weights: Vec<(usize, f64)>,
}

impl WeightScheme {
    pub fn total(&self) -> f64 {
        self.fed_weight + self.direct_weights.iter().map(|(_, w)| w).sum::<f64>()
    }
}

pub fn aggregate_stats(params: &FedParams, rho: &[u8]) -> Result<AggregateStats> {
    params.check_rho(rho)?;
    let fed: Vec<usize> = (0..rho.len())
        .filter(|&j| rho[j] as usize == LEVEL_FEDERATE)
        .collect();
    let direct: Vec<usize> = (0..rho.len())
        .filter(|&j| rho[j] as usize == LEVEL_DIRECT)
        .collect();
    let n_bar = (!fed.is_empty()).then(|| {
        fed.len() as f64 / fed.iter().map(|&j| 1.0 / params.users[j].n as f64).sum::<f64>()
    });
    let v0 = n_bar.map(|nb| params.r2 / nb + params.s2);
    let v_direct: Vec<(usize, f64)> = direct
        .iter()
        .map(|&j| (j, params.r2 / params.users[j].n as f64 + params.s2))
        .collect();
    let v_bar = (!v_direct.is_empty())
        .then(|| v_direct.len() as f64 / v_direct.iter().map(|(_, v)| 1.0 / v).sum::<f64>());
    Ok(AggregateStats {
        n_bar,
        v0,
        v_bar,
        v_direct,
    })
}

/// Error-minimising weights for estimating `theta_target` under `rho`.
///
/// The closed forms split on the target's own level; an empty federated
/// pool drops the pool term and renormalises over the direct users.
pub fn optimal_weights(params: &FedParams, rho: &[u8], target: usize) -> Result<WeightScheme> {
    params.check_rho(rho)?;
    if target >= rho.len() {
        return Err(Error::InvalidParameter(format!(
            "target user {target} out of range"
        )));
    }
    if rho.iter().all(|&l| l == 0) {
        return Err(Error::DegenerateProfile);
    }
    let stats = aggregate_stats(params, rho)?;
    let s2 = params.s2;
    let n1 = rho.iter().filter(|&&l| l as usize == LEVEL_FEDERATE).count() as f64;
    let n2 = stats.v_direct.len() as f64;
    let target_level = rho[target] as usize;

    let scheme = if let (Some(v0), n1_pos) = (stats.v0, n1 > 0.0) {
        debug_assert!(n1_pos);
        // D = N1 + N2 V0 / Vbar; the N2 term vanishes with no direct users.
        let d = n1 + stats.v_bar.map_or(0.0, |vb| n2 * v0 / vb);
        match target_level {
            LEVEL_NONE => WeightScheme {
                fed_weight: n1 / d,
                direct_weights: stats
                    .v_direct
                    .iter()
                    .map(|&(j, vj)| (j, v0 / vj / d))
                    .collect(),
            },
            LEVEL_FEDERATE => WeightScheme {
                fed_weight: n1 / d + stats.v_bar.map_or(0.0, |vb| n2 / d * (s2 / vb)),
                direct_weights: stats
                    .v_direct
                    .iter()
                    .map(|&(j, vj)| (j, (v0 - s2) / (vj * d)))
                    .collect(),
            },
            _ => {
                let vi = params.r2 / params.users[target].n as f64 + s2;
                WeightScheme {
                    fed_weight: n1 / d * (1.0 - s2 / vi),
                    direct_weights: stats
                        .v_direct
                        .iter()
                        .map(|&(j, vj)| {
                            let base = v0 / vj / d;
                            if j == target {
                                (j, base + (1.0 - base) * (s2 / vi))
                            } else {
                                (j, base * (1.0 - s2 / vi))
                            }
                        })
                        .collect(),
                }
            }
        }
    } else {
        // No federated pool; only direct users carry information.
        let sum_inv: f64 = stats.v_direct.iter().map(|(_, v)| 1.0 / v).sum();
        match target_level {
            LEVEL_FEDERATE => unreachable!("a federating target implies a nonempty pool"),
            LEVEL_NONE => WeightScheme {
                fed_weight: 0.0,
                direct_weights: stats
                    .v_direct
                    .iter()
                    .map(|&(j, vj)| (j, 1.0 / vj / sum_inv))
                    .collect(),
            },
            _ => {
                let vi = params.r2 / params.users[target].n as f64 + s2;
                WeightScheme {
                    fed_weight: 0.0,
                    direct_weights: stats
                        .v_direct
                        .iter()
                        .map(|&(j, vj)| {
                            let base = 1.0 / vj / sum_inv;
                            if j == target {
                                (j, base + (1.0 - base) * (s2 / vi))
                            } else {
                                (j, base * (1.0 - s2 / vi))
                            }
                        })
                        .collect(),
                }
            }
        }
    };
    debug_assert!((scheme.total() - 1.0).abs() < 1e-9);
    Ok(scheme)
}

/// Error of an arbitrary per-source weighting `v` (one entry per user, zero
/// for non-contributors): `r^2 sum v^2/n + s^2 (sum_{j!=i} v^2 + (sum_{j!=i} v)^2)`.
pub fn error_of_v_weights(params: &FedParams, v: &[f64], target: usize) -> f64 {
    let r2 = params.r2;
    let s2 = params.s2;
    let mut noise = 0.0;
    let mut sq = 0.0;
    let mut lin = 0.0;
    for (j, &vj) in v.iter().enumerate() {
        noise += vj * vj / params.users[j].n as f64;
        if j != target {
            sq += vj * vj;
            lin += vj;
        }
    }
    r2 * noise + s2 * (sq + lin * lin)
}

/// Expands a [`WeightScheme`] into per-user source weights: direct users
/// keep their own weight, every pool member gets `fed_weight / N1`.
pub fn v_weights_of_scheme(params: &FedParams, rho: &[u8], scheme: &WeightScheme) -> Vec<f64> {
    let n1 = rho.iter().filter(|&&l| l as usize == LEVEL_FEDERATE).count();
    let mut v = vec![0.0; params.n_users()];
    if n1 > 0 {
        for j in 0..v.len() {
            if rho[j] as usize == LEVEL_FEDERATE {
                v[j] = scheme.fed_weight / n1 as f64;
            }
        }
    }
    for &(j, w) in &scheme.direct_weights {
        v[j] = w;
    }
    v
}

/// Expected mean-squared error of the platform's estimator of
/// `theta_target`. The all-zero profile is fixed to `r^2 + 2 s^2`.
pub fn emse(params: &FedParams, rho: &[u8], target: usize) -> Result<f64> {
    params.check_rho(rho)?;
    if rho.iter().all(|&l| l == 0) {
        return Ok(params.no_data_error());
    }
    let scheme = optimal_weights(params, rho, target)?;
    let v = v_weights_of_scheme(params, rho, &scheme);
    Ok(error_of_v_weights(params, &v, target))
}

/// The coalition utility: importance-weighted log error reduction, zero at
/// the all-zero profile.
pub fn fed_utility(params: &FedParams, rho: &[u8]) -> Result<f64> {
    params.check_rho(rho)?;
    let base = params.no_data_error();
    let mut acc = 0.0;
    for i in 0..params.n_users() {
        acc += params.users[i].a * (base / emse(params, rho, i)?).ln();
    }
    Ok(acc)
}

/// Wraps the model as a [`CoalitionUtility`] over `{0, 1, 2}` with users of
/// equal `(n, a)` declared exchangeable.
pub fn as_coalition_utility(params: &FedParams) -> Result<CoalitionUtility> {
    let space = Arc::new(PrivacySpace::three_level());
    let n = params.n_users();
    let mut groups: Vec<((u64, u64), Vec<usize>)> = Vec::new();
    for (i, u) in params.users.iter().enumerate() {
        let key = (u.n, u.a.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    let params = params.clone();
    CoalitionUtility::from_fn(space, n, move |idx| {
        fed_utility(&params, idx).expect("dimensions fixed by construction")
    })?
    .with_symmetry(groups.into_iter().map(|(_, members)| members).collect())
}

/// Convenience constructor for level vectors in this model's space.
pub fn fed_vector(levels: Vec<u8>) -> Result<PrivacyVector> {
    PrivacyVector::new(Arc::new(PrivacySpace::three_level()), levels)
}
