//! Independent oracles shared by the integration suites: permutation-average
//! fair values, a derivative-free weight minimiser, Monte-Carlo risk
//! simulators, and exhaustive equilibrium enumeration.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use privfair_core::fed::{self, FedParams, UserProfile};
use privfair_core::space::{PrivacySpace, PrivacyVector};
use privfair_core::utility::CoalitionUtility;
use privfair_core::valuation::shapley_users_only;

// ---------------------------------------------------------------------------
// Permutations
// ---------------------------------------------------------------------------

/// Heap's algorithm; calls `f` once per permutation of `0..n`.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn mask_table(u: &CoalitionUtility, rho: &PrivacyVector) -> Vec<f64> {
    let n = rho.len();
    (0u64..1 << n)
        .map(|mask| u.eval(&rho.restrict_mask(mask)).unwrap())
        .collect()
}

/// Users-only fair values as the average marginal contribution over all
/// `N!` orderings of the users.
pub fn users_only_permutation_oracle(
    u: &CoalitionUtility,
    rho: &PrivacyVector,
    alpha: f64,
) -> Vec<f64> {
    let n = rho.len();
    let util = mask_table(u, rho);
    let mut acc = vec![0.0; n];
    for_each_permutation(n, |perm| {
        let mut mask = 0u64;
        for &i in perm {
            let before = util[mask as usize];
            mask |= 1 << i;
            acc[i] += util[mask as usize] - before;
        }
    });
    let scale = alpha / factorial(n);
    acc.iter().map(|v| v * scale).collect()
}

/// Platform-coalition fair values as the average marginal contribution over
/// all `(N+1)!` orderings of users plus platform. Player `n` is the
/// platform; a coalition is worthless until the platform joins.
/// Returns `(platform_value, user_values)`.
pub fn with_platform_permutation_oracle(
    u: &CoalitionUtility,
    rho: &PrivacyVector,
) -> (f64, Vec<f64>) {
    let n = rho.len();
    let util = mask_table(u, rho);
    let mut acc = vec![0.0; n + 1];
    for_each_permutation(n + 1, |perm| {
        let mut mask = 0u64;
        let mut has_platform = false;
        let mut value = 0.0;
        for &i in perm {
            let before = value;
            if i == n {
                has_platform = true;
            } else {
                mask |= 1 << i;
            }
            value = if has_platform { util[mask as usize] } else { 0.0 };
            acc[i] += value - before;
        }
    });
    let scale = 1.0 / factorial(n + 1);
    (
        acc[n] * scale,
        acc[..n].iter().map(|v| v * scale).collect(),
    )
}

// ---------------------------------------------------------------------------
// Random tabulated utilities
// ---------------------------------------------------------------------------

pub struct RandomTable {
    pub u: CoalitionUtility,
    pub space: Arc<PrivacySpace>,
    pub table: Vec<f64>,
    pub n: usize,
    pub n_levels: usize,
}

/// A random dense utility over `n_levels^n`, zero at the all-zero profile.
pub fn random_table(rng: &mut ChaCha8Rng, n: usize, n_levels: usize) -> RandomTable {
    let levels: Vec<f64> = (0..n_levels).map(|i| i as f64).collect();
    let space = Arc::new(PrivacySpace::new(levels).unwrap());
    let mut table: Vec<f64> = (0..n_levels.pow(n as u32))
        .map(|_| rng.random_range(0.0..10.0))
        .collect();
    table[0] = 0.0;
    let u = CoalitionUtility::tabulated(Arc::clone(&space), n, table.clone()).unwrap();
    RandomTable {
        u,
        space,
        table,
        n,
        n_levels,
    }
}

/// Mixed-radix index of a level assignment (user 0 most significant).
pub fn table_key(indices: &[u8], n_levels: usize) -> usize {
    indices.iter().fold(0, |k, &e| k * n_levels + e as usize)
}

/// Forces users 0 and 1 to contribute symmetrically by averaging the table
/// over the swap.
pub fn symmetrize_first_pair(t: &mut RandomTable) {
    let mut idx = vec![0u8; t.n];
    loop {
        let k = table_key(&idx, t.n_levels);
        let mut swapped = idx.clone();
        swapped.swap(0, 1);
        let ks = table_key(&swapped, t.n_levels);
        let v = t.table[k.min(ks)];
        t.table[k] = v;
        t.table[ks] = v;
        if !advance(&mut idx, t.n_levels) {
            break;
        }
    }
    t.u = CoalitionUtility::tabulated(Arc::clone(&t.space), t.n, t.table.clone()).unwrap();
}

/// Makes user 0 a null player: the table ignores their coordinate.
pub fn null_first_user(t: &mut RandomTable) {
    let mut idx = vec![0u8; t.n];
    loop {
        if idx[0] != 0 {
            let mut base = idx.clone();
            base[0] = 0;
            t.table[table_key(&idx, t.n_levels)] = t.table[table_key(&base, t.n_levels)];
        }
        if !advance(&mut idx, t.n_levels) {
            break;
        }
    }
    t.u = CoalitionUtility::tabulated(Arc::clone(&t.space), t.n, t.table.clone()).unwrap();
}

pub fn advance(idx: &mut [u8], n_levels: usize) -> bool {
    for e in idx.iter_mut().rev() {
        if (*e as usize) < n_levels - 1 {
            *e += 1;
            return true;
        }
        *e = 0;
    }
    false
}

// ---------------------------------------------------------------------------
// Federated-model oracles
// ---------------------------------------------------------------------------

/// The estimator error as a plain formula in per-source weights, written
/// out independently of the library.
pub fn fed_error_formula(s2: f64, r2: f64, ns: &[u64], v: &[f64], target: usize) -> f64 {
    let mut noise = 0.0;
    let mut sq = 0.0;
    let mut lin = 0.0;
    for j in 0..v.len() {
        noise += v[j] * v[j] / ns[j] as f64;
        if j != target {
            sq += v[j] * v[j];
            lin += v[j];
        }
    }
    r2 * noise + s2 * (sq + lin * lin)
}

/// Derivative-free minimisation of the estimator error over the sum-to-one
/// weight simplex: exact pairwise quadratic line searches swept to a fixed
/// point. Parameters are the pool weight (when a pool exists) followed by
/// one weight per direct user. Returns the achieved error.
pub fn minimize_fed_error(s2: f64, r2: f64, ns: &[u64], rho: &[u8], target: usize) -> f64 {
    let fed: Vec<usize> = (0..rho.len()).filter(|&j| rho[j] == 1).collect();
    let direct: Vec<usize> = (0..rho.len()).filter(|&j| rho[j] == 2).collect();
    let dim = usize::from(!fed.is_empty()) + direct.len();
    assert!(dim > 0, "profile must carry information");

    let expand = |x: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; rho.len()];
        let mut k = 0;
        if !fed.is_empty() {
            for &j in &fed {
                v[j] = x[0] / fed.len() as f64;
            }
            k = 1;
        }
        for (slot, &j) in direct.iter().enumerate() {
            v[j] = x[k + slot];
        }
        v
    };
    let f = |x: &[f64]| fed_error_formula(s2, r2, ns, &expand(x), target);

    let mut x = vec![1.0 / dim as f64; dim];
    if dim == 1 {
        x[0] = 1.0;
        return f(&x);
    }
    let h = 1e-4;
    for _ in 0..500 {
        let mut improved = false;
        for i in 0..dim {
            for j in (i + 1)..dim {
                // Move t between coordinates i and j; the error is quadratic in t.
                let probe = |t: f64| {
                    let mut y = x.clone();
                    y[i] += t;
                    y[j] -= t;
                    f(&y)
                };
                let f0 = probe(0.0);
                let fp = probe(h);
                let fm = probe(-h);
                let curv = (fp + fm - 2.0 * f0) / (h * h);
                if curv <= 1e-18 {
                    continue;
                }
                let slope = (fp - fm) / (2.0 * h);
                let t = -slope / curv;
                if probe(t) < f0 - 1e-15 {
                    x[i] += t;
                    x[j] -= t;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    f(&x)
}

/// Monte-Carlo EMSE of the platform's estimator under Gaussian user means
/// and Gaussian local estimates. Returns `(mean, standard_error)`.
pub fn mc_emse_gaussian(
    params: &FedParams,
    rho: &[u8],
    target: usize,
    trials: usize,
    seed: u64,
) -> (f64, f64) {
    let scheme = fed::optimal_weights(params, rho, target).unwrap();
    let v = fed::v_weights_of_scheme(params, rho, &scheme);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_norm = Normal::new(0.0, 1.0).unwrap();
    let s = params.s2.sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let mut est = 0.0;
        let mut theta_target = 0.0;
        for (j, &vj) in v.iter().enumerate() {
            let needed = vj != 0.0 || j == target;
            if !needed {
                continue;
            }
            let theta = s * std_norm.sample(&mut rng);
            if j == target {
                theta_target = theta;
            }
            if vj != 0.0 {
                let se = (params.r2 / params.users[j].n as f64).sqrt();
                est += vj * (theta + se * std_norm.sample(&mut rng));
            }
        }
        let err = (est - theta_target) * (est - theta_target);
        sum += err;
        sum_sq += err * err;
    }
    let mean = sum / trials as f64;
    let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
    (mean, (var / trials as f64).sqrt())
}

/// As [`mc_emse_gaussian`] but drawing each user's raw samples from a
/// two-point distribution with matching mean and variance.
pub fn mc_emse_two_point(
    params: &FedParams,
    rho: &[u8],
    target: usize,
    trials: usize,
    seed: u64,
) -> (f64, f64) {
    let scheme = fed::optimal_weights(params, rho, target).unwrap();
    let v = fed::v_weights_of_scheme(params, rho, &scheme);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_norm = Normal::new(0.0, 1.0).unwrap();
    let s = params.s2.sqrt();
    let r = params.r2.sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let mut est = 0.0;
        let mut theta_target = 0.0;
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 && j != target {
                continue;
            }
            let theta = s * std_norm.sample(&mut rng);
            if j == target {
                theta_target = theta;
            }
            if vj != 0.0 {
                let n = params.users[j].n;
                let mut local_sum = 0.0;
                for _ in 0..n {
                    let x = if rng.random::<bool>() { theta + r } else { theta - r };
                    local_sum += x;
                }
                est += vj * (local_sum / n as f64);
            }
        }
        let err = (est - theta_target) * (est - theta_target);
        sum += err;
        sum_sq += err * err;
    }
    let mean = sum / trials as f64;
    let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
    (mean, (var / trials as f64).sqrt())
}

// ---------------------------------------------------------------------------
// DP estimation oracle
// ---------------------------------------------------------------------------

/// Simulates the linear-Laplace estimator on the two-point data model:
/// `X_i = ±1/2` with `P(X = 1/2) = p`, `p ~ Unif(0,1)`, target `mu = p - 1/2`.
/// Returns `(mean squared error, standard error)`.
pub fn mc_dp_risk(
    weights: [f64; 2],
    noise_inv_scale: f64,
    trials: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = if noise_inv_scale.is_infinite() {
        0.0
    } else {
        1.0 / noise_inv_scale
    };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let p: f64 = rng.random();
        let mu = p - 0.5;
        let mut est = 0.0;
        for w in weights {
            let x = if rng.random::<f64>() < p { 0.5 } else { -0.5 };
            est += w * x;
        }
        if scale > 0.0 {
            // Inverse-CDF Laplace draw.
            let u: f64 = rng.random::<f64>() - 0.5;
            est += -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
        let err = (est - mu) * (est - mu);
        sum += err;
        sum_sq += err * err;
    }
    let mean = sum / trials as f64;
    let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
    (mean, (var / trials as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Exhaustive equilibrium enumeration
// ---------------------------------------------------------------------------

/// Every pure weak Nash equilibrium by checking all `L^N` profiles against
/// all single-user deviations.
pub fn exhaustive_pure_ne(
    u: &CoalitionUtility,
    profiles: &[UserProfile],
    alpha: f64,
    tol: f64,
) -> Vec<Vec<u8>> {
    let n = u.n_users();
    let n_levels = u.space().len();
    let space = Arc::clone(u.space());
    let mut values: HashMap<Vec<u8>, Vec<f64>> = HashMap::new();
    let mut idx = vec![0u8; n];
    loop {
        let rho = PrivacyVector::new(Arc::clone(&space), idx.clone()).unwrap();
        values.insert(
            idx.clone(),
            shapley_users_only(u, &rho, 1.0).unwrap().user_values,
        );
        if !advance(&mut idx, n_levels) {
            break;
        }
    }
    let mut out = Vec::new();
    let mut idx = vec![0u8; n];
    loop {
        let mut is_ne = true;
        'users: for i in 0..n {
            let own = alpha * values[&idx][i] - profiles[i].c[idx[i] as usize];
            for l in 0..n_levels as u8 {
                if l == idx[i] {
                    continue;
                }
                let mut dev = idx.clone();
                dev[i] = l;
                let alt = alpha * values[&dev][i] - profiles[i].c[l as usize];
                if alt > own + tol {
                    is_ne = false;
                    break 'users;
                }
            }
        }
        if is_ne {
            out.push(idx.clone());
        }
        if !advance(&mut idx, n_levels) {
            break;
        }
    }
    out
}

/// A random federated configuration for equilibrium tests.
pub fn random_fed_params(rng: &mut ChaCha8Rng, n: usize) -> FedParams {
    let s2 = rng.random_range(0.01..50.0);
    let r2 = rng.random_range(0.1..50.0);
    let users = (0..n)
        .map(|_| {
            let n_i = rng.random_range(1..60u64);
            let c1 = rng.random_range(0.0..0.4);
            let c2 = rng.random_range(0.0..0.8);
            UserProfile::new(n_i, 1.0, vec![0.0, c1, c2]).unwrap()
        })
        .collect();
    FedParams::new(s2, r2, users).unwrap()
}
