//! The two-user differentially private mean estimation example.
//!
//! Two users hold one `{-1/2, +1/2}` sample each with common mean
//! `mu = p - 1/2`, `p ~ Unif(0,1)`. Each user either withholds their
//! sample (level 0) or releases it under `eps'`-DP. The platform runs the
//! Bayes-optimal linear estimator with Laplace noise and derives utility
//! from the achieved Bayes risk through the affine normalisation
//! `U = 2 - 24 r`, which pins `U` at 0 with no data and at 1 in the
//! noiseless two-sample limit.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::equilibrium::CountUtility;
use crate::space::PrivacySpace;
use crate::utility::CoalitionUtility;
use crate::valuation::{check_alpha, shapley_users_only, shapley_with_platform, Allocation};

/// Risk of the prior-mean estimator: `E[mu^2]` for `mu ~ Unif(-1/2, 1/2)`.
const PRIOR_RISK: f64 = 1.0 / 12.0;

// Affine normalisation constants, solved from U(0) = 0 and sup U = 1.
const NORM_SCALE: f64 = -24.0;
const NORM_OFFSET: f64 = 2.0;

/// Which of the two levels each user picked; `true` means sharing at `eps'`.
pub type SharePair = [bool; 2];

/// The example, parameterised by the nonzero privacy level `eps'`.
///
/// `eps'` may be `f64::INFINITY`; every closed form takes the limit
/// `1/eps'^2 -> 0` through ordinary float arithmetic.
#[derive(Debug, Clone, Copy)]
pub struct DpExample {
    eps_prime: f64,
}

/// Optimal linear-Laplace estimator: `A(X) = w^T X + Z` with
/// `Z ~ Laplace(1/noise_inv_scale)`. An infinite inverse scale means no
/// noise is added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub weights: [f64; 2],
    pub noise_inv_scale: f64,
}

impl EstimatorSpec {
    /// Bayes risk of this estimator under the example's prior, by direct
    /// integration of the squared error:
    /// `(w1^2 + w2^2)/6 + (w1 + w2 - 1)^2/12 + 2/eta^2`.
    pub fn bayes_risk(&self) -> f64 {
        let [w1, w2] = self.weights;
        let noise_var = if self.noise_inv_scale.is_infinite() {
            0.0
        } else {
            2.0 / (self.noise_inv_scale * self.noise_inv_scale)
        };
        (w1 * w1 + w2 * w2) / 6.0 + (w1 + w2 - 1.0) * (w1 + w2 - 1.0) / 12.0 + noise_var
    }
}

/// Bayes risks of the three distinct level pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskTable {
    pub r00: f64,
    pub r10: f64,
    pub r11: f64,
}

/// Allocation tables over the level grid, indexed `[user 1 level][user 2 level]`
/// with index 1 meaning `eps'`.
#[derive(Debug, Clone, PartialEq)]
pub struct FairTables {
    pub platform: Option<[[f64; 2]; 2]>,
    pub user1: [[f64; 2]; 2],
    pub user2: [[f64; 2]; 2],
}

/// Allocation mode selector for [`DpExample::fair_tables`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationMode {
    /// Platform as a coalition member.
    WithPlatform,
    /// Users only, scaled by the payment fraction.
    UsersOnly,
}

impl DpExample {
    pub fn new(eps_prime: f64) -> Result<Self> {
        if !(eps_prime > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps' must be positive, got {eps_prime}"
            )));
        }
        let ex = Self { eps_prime };
        // The normalisation constants must satisfy their defining conditions.
        let at_zero = NORM_OFFSET + NORM_SCALE * PRIOR_RISK;
        let at_sup = NORM_OFFSET + NORM_SCALE * (1.0 / 24.0);
        assert!(at_zero.abs() < 1e-15 && (at_sup - 1.0).abs() < 1e-15);
        Ok(ex)
    }

    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }

    fn inv_eps_sq(&self) -> f64 {
        if self.eps_prime.is_infinite() {
            0.0
        } else {
            1.0 / (self.eps_prime * self.eps_prime)
        }
    }

    /// Bayes risk of the optimal linear-Laplace estimator at a level pair.
    /// Symmetric in its arguments.
    pub fn bayes_risk(&self, shares: SharePair) -> f64 {
        let q = self.inv_eps_sq();
        match (shares[0], shares[1]) {
            (false, false) => PRIOR_RISK,
            (true, false) | (false, true) => PRIOR_RISK * (1.0 - 1.0 / (3.0 + 24.0 * q)),
            (true, true) => PRIOR_RISK * (1.0 - 1.0 / (2.0 + 6.0 * q)),
        }
    }

    pub fn risk_table(&self) -> RiskTable {
        RiskTable {
            r00: self.bayes_risk([false, false]),
            r10: self.bayes_risk([true, false]),
            r11: self.bayes_risk([true, true]),
        }
    }

    /// The optimal estimator at a level pair. With no data, it is the prior
    /// mean (zero weights, no noise). The DP constraint `eta <= eps'/w`
    /// holds with equality at the optimum for finite `eps'`.
    pub fn optimal_estimator(&self, shares: SharePair) -> EstimatorSpec {
        let q = self.inv_eps_sq();
        match (shares[0], shares[1]) {
            (false, false) => EstimatorSpec {
                weights: [0.0, 0.0],
                noise_inv_scale: f64::INFINITY,
            },
            (true, false) | (false, true) => {
                let w = 1.0 / (3.0 + 24.0 * q);
                let weights = if shares[0] { [w, 0.0] } else { [0.0, w] };
                EstimatorSpec {
                    weights,
                    noise_inv_scale: self.eps_prime / w,
                }
            }
            (true, true) => {
                let w = 1.0 / (4.0 + 12.0 * q);
                EstimatorSpec {
                    weights: [w, w],
                    noise_inv_scale: self.eps_prime / w,
                }
            }
        }
    }

    /// Normalised utility of a level pair: `U = 2 - 24 r`.
    pub fn utility(&self, shares: SharePair) -> f64 {
        NORM_OFFSET + NORM_SCALE * self.bayes_risk(shares)
    }

    /// The binary privacy space `{0, eps'}`.
    pub fn space(&self) -> PrivacySpace {
        PrivacySpace::binary(self.eps_prime).expect("eps' > 0")
    }

    /// The 2x2 tabulated coalition utility over `{0, eps'}^2`, carrying the
    /// two users as a symmetry group.
    pub fn coalition_utility(&self) -> CoalitionUtility {
        let table = vec![
            self.utility([false, false]),
            self.utility([false, true]),
            self.utility([true, false]),
            self.utility([true, true]),
        ];
        CoalitionUtility::tabulated(Arc::new(self.space()), 2, table)
            .expect("table matches the grid")
            .with_symmetry(vec![vec![0, 1]])
            .expect("one group of both users")
    }

    /// Utility as a function of how many users share at `eps'`.
    pub fn count_utility(&self) -> CountUtility {
        CountUtility::new(vec![
            self.utility([false, false]),
            self.utility([true, false]),
            self.utility([true, true]),
        ])
        .expect("three finite values")
    }

    /// Fair allocation of one concrete level pair.
    pub fn allocate(
        &self,
        shares: SharePair,
        mode: AllocationMode,
        alpha: f64,
    ) -> Result<Allocation> {
        let u = self.coalition_utility();
        let rho = crate::space::PrivacyVector::new(
            Arc::clone(u.space()),
            vec![shares[0] as u8, shares[1] as u8],
        )?;
        match mode {
            AllocationMode::WithPlatform => shapley_with_platform(&u, &rho, true),
            AllocationMode::UsersOnly => shapley_users_only(&u, &rho, alpha),
        }
    }

    /// Per-player allocation tables over the whole level grid.
    pub fn fair_tables(&self, mode: AllocationMode, alpha: f64) -> Result<FairTables> {
        if mode == AllocationMode::UsersOnly {
            check_alpha(alpha)?;
        }
        let mut platform = [[0.0; 2]; 2];
        let mut user1 = [[0.0; 2]; 2];
        let mut user2 = [[0.0; 2]; 2];
        for (i, s1) in [false, true].into_iter().enumerate() {
            for (j, s2) in [false, true].into_iter().enumerate() {
                let a = self.allocate([s1, s2], mode, alpha)?;
                user1[i][j] = a.user_values[0];
                user2[i][j] = a.user_values[1];
                if let Some(p) = a.platform_value {
                    platform[i][j] = p;
                }
            }
        }
        Ok(FairTables {
            platform: (mode == AllocationMode::WithPlatform).then_some(platform),
            user1,
            user2,
        })
    }
}
