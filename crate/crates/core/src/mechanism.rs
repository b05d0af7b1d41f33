//! The platform's incentive design: choosing the payment fraction.
//!
//! The platform keeps `(1 - alpha) U(rho)` at an equilibrium of its own
//! making, optimising jointly over `alpha` and the equilibrium reached.
//! Three solvers cover the spec'd settings: a grid search over pure
//! equilibria of an arbitrary coalition utility, the closed-regime solver
//! of the binary symmetric game, and the two-group binary game.

use rayon::prelude::*;

use crate::equilibrium::{
    asym_two_player_ne, p_star, symmetric_ne_residual, validate_assumptions, CountUtility,
    EquilibriumPoint, GammaProfile, MixedSymmetricStrategy, NeSearch, SymmetricNe,
};
use crate::error::{Error, Result};
use crate::fed::UserProfile;
use crate::space::PrivacyVector;
use crate::utility::CoalitionUtility;
use crate::valuation::{check_alpha, shapley_users_only_capped, Allocation};

/// Default grid over `[0, 1]` for the payment fraction.
pub const DEFAULT_ALPHA_POINTS: usize = 401;
/// Refinement grid for the interior regime of the symmetric solver.
pub const REGIME2_GRID_POINTS: usize = 2001;

/// An inclusive, evenly spaced grid on `[min, max] ⊆ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 grid points, got {points}"
            )));
        }
        if !(0.0 <= min && min < max && max <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "need 0 <= min < max <= 1, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max, points })
    }

    pub fn unit(points: usize) -> Result<Self> {
        Self::new(0.0, 1.0, points)
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// Equilibrium selection and strictness switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct MechanismOptions {
    /// Demand strict equilibria in the pure search.
    pub strict_ne: bool,
    /// Select the platform-worst equilibrium instead of the best.
    pub pessimistic: bool,
}

/// The three optimal-payment regimes of the symmetric binary game, ordered
/// by falling privacy sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverRegime {
    /// Sensitivity above `gamma_max`: pay nothing.
    NoIncentives,
    /// Between the thresholds: an interior mixed equilibrium.
    MixedParticipation,
    /// Sensitivity below `c_th`: the cheapest alpha with full sharing.
    FullParticipation,
}

impl SolverRegime {
    pub fn number(&self) -> u8 {
        match self {
            SolverRegime::NoIncentives => 1,
            SolverRegime::MixedParticipation => 2,
            SolverRegime::FullParticipation => 3,
        }
    }
}

impl std::fmt::Display for SolverRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverRegime::NoIncentives => "no_incentives",
            SolverRegime::MixedParticipation => "mixed_participation",
            SolverRegime::FullParticipation => "full_participation",
        };
        f.write_str(s)
    }
}

/// The regime thresholds of the symmetric game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeBoundaries {
    pub gamma_max: f64,
    pub gamma_min: f64,
    pub c_th: f64,
}

/// The platform's chosen payment fraction and the equilibrium it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismSolution {
    pub alpha_star: f64,
    pub equilibrium: EquilibriumPoint,
    /// Certificate of the selected equilibrium.
    pub residual: f64,
    /// Utility (expected utility for mixed equilibria) at the equilibrium.
    pub total_utility: f64,
    /// `(1 - alpha_star) * total_utility`.
    pub platform_net: f64,
    pub payments: Allocation,
    pub notes: Vec<String>,
}

/// Output of [`symmetric_solver`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSolution {
    pub solution: MechanismSolution,
    pub regime: SolverRegime,
    pub boundaries: RegimeBoundaries,
}

// ---------------------------------------------------------------------------
// Grid search over pure equilibria
// ---------------------------------------------------------------------------

/// Grid search of the payment fraction over the pure-equilibrium map of an
/// arbitrary coalition utility. For each `alpha` the platform-best (or
/// worst, under the pessimistic flag) equilibrium is selected; ties break
/// toward the smaller `alpha`, then the lexicographically smaller profile.
pub fn optimize_alpha_grid(
    u: &CoalitionUtility,
    profiles: &[UserProfile],
    grid: &GridSpec,
    options: MechanismOptions,
) -> Result<MechanismSolution> {
    let search = NeSearch::new(u, profiles)?;
    let alphas = grid.values();
    let per_alpha: Vec<Option<(Vec<u8>, f64, f64)>> = alphas
        .par_iter()
        .map(|&a| search.select_ne_at(a, options.strict_ne, options.pessimistic))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(f64, Vec<u8>, f64, f64)> = None; // (alpha, profile, utility, residual)
    for (&alpha, found) in alphas.iter().zip(per_alpha) {
        let Some((profile, utility, residual)) = found else {
            continue;
        };
        let net = (1.0 - alpha) * utility;
        let replace = match &best {
            None => true,
            Some((ba, bp, bu, _)) => {
                let bnet = (1.0 - ba) * bu;
                net > bnet || (net == bnet && alpha == *ba && profile < *bp)
            }
        };
        if replace {
            best = Some((alpha, profile, utility, residual));
        }
    }
    let (alpha_star, profile, utility, residual) = best.ok_or_else(|| {
        Error::InvalidParameter("no pure equilibrium found at any grid point".into())
    })?;
    let rho = PrivacyVector::new(std::sync::Arc::clone(u.space()), profile.clone())?;
    let payments = shapley_users_only_capped(u, &rho, alpha_star, usize::MAX)?;
    Ok(MechanismSolution {
        alpha_star,
        equilibrium: EquilibriumPoint::Pure(profile),
        residual,
        total_utility: utility,
        platform_net: (1.0 - alpha_star) * utility,
        payments,
        notes: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Symmetric binary game: the three-regime solver
// ---------------------------------------------------------------------------

fn expected_p(ne: &SymmetricNe, fallback: f64) -> (f64, f64) {
    match ne {
        SymmetricNe::Point { strategy, residual } => (strategy.p, *residual),
        SymmetricNe::FullInterval => (fallback, 0.0),
    }
}

/// Sensitivity threshold below which pushing every user to full sharing is
/// optimal: the largest `c` whose full-sharing payoff dominates every
/// smaller payment fraction. Grid-certified bisection.
fn compute_c_th(u: &CountUtility, gamma: &GammaProfile) -> Result<f64> {
    let n = u.n_users();
    let full = u.value(n);
    if !(full > 0.0) {
        return Err(Error::InvalidUtility(
            "full-participation utility must be positive".into(),
        ));
    }
    let holds = |c: f64| -> bool {
        let hi = (c / gamma.gamma_min).min(1.0);
        let lhs_num = 1.0 - c / gamma.gamma_min;
        for i in 0..REGIME2_GRID_POINTS {
            let alpha = hi * i as f64 / (REGIME2_GRID_POINTS - 1) as f64;
            if alpha >= 1.0 - 1e-12 {
                if lhs_num >= 0.0 {
                    continue;
                }
                return false;
            }
            let (p, _) = match p_star(gamma, c, alpha) {
                Ok(ne) => expected_p(&ne, 0.0),
                Err(_) => return false,
            };
            let margin = lhs_num / (1.0 - alpha) - u.expected_under_mixed(p) / full;
            if margin < -1e-9 {
                return false;
            }
        }
        true
    };
    let (mut lo, mut hi) = (0.0f64, gamma.gamma_max);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the symmetric binary game for the optimal payment fraction; the
/// solution falls into one of three sensitivity regimes.
pub fn symmetric_solver(u: &CountUtility, c: f64) -> Result<SymmetricSolution> {
    if !(c >= 0.0) {
        return Err(Error::InvalidParameter(format!("cost {c} must be >= 0")));
    }
    let report = validate_assumptions(u);
    if !report.passed() {
        return Err(Error::AssumptionViolated(report.violations.join("; ")));
    }
    let gamma = GammaProfile::from_count_utility(u)?;
    let c_th = compute_c_th(u, &gamma)?;
    let boundaries = RegimeBoundaries {
        gamma_max: gamma.gamma_max,
        gamma_min: gamma.gamma_min,
        c_th,
    };
    let n = u.n_users();
    let mut notes = Vec::new();

    let (regime, alpha_star, p) = if c > gamma.gamma_max {
        (SolverRegime::NoIncentives, 0.0, 1.0)
    } else if c < c_th {
        let mut alpha = if c == 0.0 { 0.0 } else { c / gamma.gamma_min };
        if alpha > 1.0 {
            alpha = 1.0;
            notes.push(
                "payment fraction capped at 1; it cannot force full participation".into(),
            );
        }
        (SolverRegime::FullParticipation, alpha, 0.0)
    } else {
        let lo = c / gamma.gamma_max;
        let hi = (c / gamma.gamma_min).min(1.0);
        let (mut best_alpha, mut best_net, mut best_p) = (lo, f64::NEG_INFINITY, 1.0);
        for i in 0..REGIME2_GRID_POINTS {
            let alpha = lo + (hi - lo) * i as f64 / (REGIME2_GRID_POINTS - 1) as f64;
            let (p, _) = expected_p(&p_star(&gamma, c, alpha)?, 0.0);
            let net = (1.0 - alpha) * u.expected_under_mixed(p);
            if net > best_net {
                best_net = net;
                best_alpha = alpha;
                best_p = p;
            }
        }
        let step = (hi - lo) / (REGIME2_GRID_POINTS - 1) as f64;
        if best_alpha > lo + step {
            notes.push(format!(
                "objective-maximising alpha {best_alpha:.6} exceeds the smallest \
                 indifference-compatible alpha {lo:.6}"
            ));
        }
        (SolverRegime::MixedParticipation, best_alpha, best_p)
    };

    let total_utility = u.expected_under_mixed(p);
    let residual = symmetric_ne_residual(u, p, c, alpha_star)?;
    let per_user = alpha_star * total_utility / n as f64;
    let solution = MechanismSolution {
        alpha_star,
        equilibrium: EquilibriumPoint::Symmetric(MixedSymmetricStrategy { p }),
        residual,
        total_utility,
        platform_net: (1.0 - alpha_star) * total_utility,
        payments: Allocation {
            user_values: vec![per_user; n],
            platform_value: None,
            alpha: alpha_star,
            total_utility,
        },
        notes,
    };
    Ok(SymmetricSolution {
        solution,
        regime,
        boundaries,
    })
}

// ---------------------------------------------------------------------------
// Two groups with distinct sensitivities
// ---------------------------------------------------------------------------

/// The binary two-player game data: the utility matrix and the two fair
/// payment matrices at `alpha = 1`, all indexed
/// `[player 1 level][player 2 level]` with index 1 the less private level.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoGroupGame {
    pub utility: [[f64; 2]; 2],
    pub phi1: [[f64; 2]; 2],
    pub phi2: [[f64; 2]; 2],
    gamma: GammaProfile,
}

impl TwoGroupGame {
    /// Validates the equal-marginal-contribution premise: both players see
    /// the same payment gap for switching, whatever the other plays.
    pub fn new(utility: [[f64; 2]; 2], phi1: [[f64; 2]; 2], phi2: [[f64; 2]; 2]) -> Result<Self> {
        if (utility[0][1] - utility[1][0]).abs() > 1e-12 {
            return Err(Error::InvalidUtility(
                "players must contribute symmetrically to the utility".into(),
            ));
        }
        // Gap for switching given the other stays private / shares.
        let gaps1 = [phi1[1][0] - phi1[0][0], phi1[1][1] - phi1[0][1]];
        let gaps2 = [phi2[0][1] - phi2[0][0], phi2[1][1] - phi2[1][0]];
        if (gaps1[0] - gaps2[0]).abs() > 1e-12 || (gaps1[1] - gaps2[1]).abs() > 1e-12 {
            return Err(Error::InvalidUtility(
                "payment matrices violate equal marginal contribution".into(),
            ));
        }
        let gamma = GammaProfile::from_diffs(vec![gaps1[0], gaps1[1]])?;
        Ok(Self {
            utility,
            phi1,
            phi2,
            gamma,
        })
    }

    pub fn gamma(&self) -> &GammaProfile {
        &self.gamma
    }

    fn mix(m: &[[f64; 2]; 2], p: f64, q: f64) -> f64 {
        let p1 = [p, 1.0 - p];
        let p2 = [q, 1.0 - q];
        (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| p1[i] * p2[j] * m[i][j])
            .sum()
    }

    pub fn expected_utility(&self, p: f64, q: f64) -> f64 {
        Self::mix(&self.utility, p, q)
    }

    pub fn expected_phi(&self, player: usize, p: f64, q: f64) -> f64 {
        match player {
            0 => Self::mix(&self.phi1, p, q),
            _ => Self::mix(&self.phi2, p, q),
        }
    }
}

/// Optimal payment fraction against two user groups with sensitivities
/// `c1` and `c2`. For each grid point the verified equilibria of the
/// two-player game are enumerated and the platform-best one kept.
pub fn two_group_mechanism(
    game: &TwoGroupGame,
    c1: f64,
    c2: f64,
    grid: &GridSpec,
) -> Result<MechanismSolution> {
    if !(c1 >= 0.0 && c2 >= 0.0) {
        return Err(Error::InvalidParameter(
            "sensitivities must be non-negative".into(),
        ));
    }
    let alphas = grid.values();
    let per_alpha: Vec<Option<(f64, f64, f64, f64)>> = alphas
        .par_iter()
        .map(|&alpha| -> Result<Option<(f64, f64, f64, f64)>> {
            check_alpha(alpha)?;
            let nes = asym_two_player_ne(c1, c2, alpha, game.gamma())?;
            let mut best: Option<(f64, f64, f64, f64)> = None; // (p, q, utility, residual)
            for e in &nes.equilibria {
                let EquilibriumPoint::TwoPlayer { p, q } = e.point else {
                    continue;
                };
                let util = game.expected_utility(p, q);
                if best.map(|(_, _, u, _)| util > u).unwrap_or(true) {
                    best = Some((p, q, util, e.residual));
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(f64, f64, f64, f64, f64)> = None; // (alpha, p, q, utility, residual)
    for (&alpha, found) in alphas.iter().zip(per_alpha) {
        let Some((p, q, utility, residual)) = found else {
            continue;
        };
        let net = (1.0 - alpha) * utility;
        let replace = match &best {
            None => true,
            Some((ba, _, _, bu, _)) => net > (1.0 - ba) * bu,
        };
        if replace {
            best = Some((alpha, p, q, utility, residual));
        }
    }
    let (alpha_star, p, q, total_utility, residual) = best.ok_or_else(|| {
        Error::InvalidParameter("no verified equilibrium found at any grid point".into())
    })?;
    Ok(MechanismSolution {
        alpha_star,
        equilibrium: EquilibriumPoint::TwoPlayer { p, q },
        residual,
        total_utility,
        platform_net: (1.0 - alpha_star) * total_utility,
        payments: Allocation {
            user_values: vec![
                alpha_star * game.expected_phi(0, p, q),
                alpha_star * game.expected_phi(1, p, q),
            ],
            platform_value: None,
            alpha: alpha_star,
            total_utility,
        },
        notes: vec![
            "platform share computed as (1 - alpha) * expected utility".into(),
        ],
    })
}
