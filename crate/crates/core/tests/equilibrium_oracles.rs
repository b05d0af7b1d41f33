//! Tree-search equilibria against exhaustive enumeration, and verification
//! of the two-player threshold table.

mod common;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{exhaustive_pure_ne, random_fed_params};
use privfair_core::dp_example::DpExample;
use privfair_core::equilibrium::{
    asym_two_player_ne, find_pure_ne, p_star, symmetric_ne_residual, two_player_max_gain,
    EquilibriumPoint, GammaProfile, NeSearch, SymmetricNe, NE_TOLERANCE,
};
use privfair_core::fed::{self, FedParams, UserProfile};

fn pure_profiles(result: &privfair_core::equilibrium::NeResult) -> Vec<Vec<u8>> {
    result
        .equilibria
        .iter()
        .map(|e| match &e.point {
            EquilibriumPoint::Pure(p) => p.clone(),
            other => panic!("expected pure equilibria, got {other:?}"),
        })
        .collect()
}

#[test]
fn tree_search_equals_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for round in 0..12 {
        let n = rng.random_range(2..=5);
        let params = random_fed_params(&mut rng, n);
        let u = fed::as_coalition_utility(&params).unwrap();
        let alpha = rng.random_range(0.0..=1.0);

        let tree = find_pure_ne(&u, &params.users, alpha).unwrap();
        let mut got = pure_profiles(&tree);
        let mut want = exhaustive_pure_ne(&u, &params.users, alpha, NE_TOLERANCE);
        got.sort();
        want.sort();
        assert_eq!(got, want, "round {round} (alpha {alpha}, n {n})");
        for e in &tree.equilibria {
            assert!(e.residual <= NE_TOLERANCE);
        }
    }
}

#[test]
fn tree_search_handles_duplicated_user_types() {
    // Many exchangeable users: the partition search must reproduce every
    // concrete assignment the exhaustive check finds.
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..6 {
        let s2 = rng.random_range(0.05..20.0);
        let r2 = rng.random_range(0.5..20.0);
        let c1 = rng.random_range(0.0..0.3);
        let c2 = rng.random_range(0.0..0.6);
        let users: Vec<UserProfile> = (0..5)
            .map(|i| {
                let n = if i < 3 { 20 } else { 45 };
                UserProfile::new(n, 1.0, vec![0.0, c1, c2]).unwrap()
            })
            .collect();
        let params = FedParams::new(s2, r2, users).unwrap();
        let u = fed::as_coalition_utility(&params).unwrap();
        let alpha = rng.random_range(0.2..=1.0);
        let mut got = pure_profiles(&find_pure_ne(&u, &params.users, alpha).unwrap());
        let mut want = exhaustive_pure_ne(&u, &params.users, alpha, NE_TOLERANCE);
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }
}

#[test]
fn relabeling_users_permutes_the_ne_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mk = |swap: bool| {
        let mut users = vec![
            UserProfile::new(30, 1.0, vec![0.0, 0.05, 0.25]).unwrap(),
            UserProfile::new(8, 1.0, vec![0.0, 0.10, 0.45]).unwrap(),
            UserProfile::new(30, 1.0, vec![0.0, 0.05, 0.25]).unwrap(),
            UserProfile::new(8, 1.0, vec![0.0, 0.02, 0.15]).unwrap(),
        ];
        if swap {
            users.swap(1, 3);
        }
        FedParams::new(4.0, 9.0, users).unwrap()
    };
    for _ in 0..4 {
        let alpha = rng.random_range(0.2..=1.0);
        let base = mk(false);
        let swapped = mk(true);
        let mut nes_base =
            pure_profiles(&find_pure_ne(&fed::as_coalition_utility(&base).unwrap(), &base.users, alpha).unwrap());
        let nes_swapped =
            pure_profiles(&find_pure_ne(&fed::as_coalition_utility(&swapped).unwrap(), &swapped.users, alpha).unwrap());
        // Applying the same relabeling to the base NE set must reproduce
        // the swapped set.
        let mut mapped: Vec<Vec<u8>> = nes_swapped
            .into_iter()
            .map(|mut p| {
                p.swap(1, 3);
                p
            })
            .collect();
        nes_base.sort();
        mapped.sort();
        assert_eq!(nes_base, mapped);
    }
}

#[test]
fn select_ne_picks_highest_utility_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..6 {
        let n = rng.random_range(2..=4);
        let params = random_fed_params(&mut rng, n);
        let u = fed::as_coalition_utility(&params).unwrap();
        let alpha = rng.random_range(0.0..=1.0);
        let search = NeSearch::new(&u, &params.users).unwrap();
        let nes = exhaustive_pure_ne(&u, &params.users, alpha, NE_TOLERANCE);
        let best = search.select_ne_at(alpha, false, false).unwrap();
        match (nes.is_empty(), best) {
            (true, None) => {}
            (false, Some((witness, utility, _))) => {
                assert!(nes.contains(&witness));
                let max_u = nes
                    .iter()
                    .map(|p| fed::fed_utility(&params, p).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((utility - max_u).abs() < 1e-12);
            }
            (empty, got) => panic!("oracle empty={empty} but search returned {got:?}"),
        }
    }
}

#[test]
fn asym_table_cells_verify_on_random_draws() {
    let ex = DpExample::new(f64::INFINITY).unwrap();
    let gamma = GammaProfile::from_count_utility(&ex.count_utility()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let mut seen_mixed = 0;
    for round in 0..300 {
        let c1 = rng.random_range(0.0..1.0);
        let c2 = rng.random_range(0.0..1.0);
        let alpha = rng.random_range(0.0..=1.0);
        let result = asym_two_player_ne(c1, c2, alpha, &gamma).unwrap();
        assert!(
            !result.equilibria.is_empty(),
            "round {round}: no verified equilibrium at c1={c1} c2={c2} alpha={alpha}"
        );
        assert!(
            result.notes.is_empty(),
            "round {round}: table candidate failed verification: {:?}",
            result.notes
        );
        for e in &result.equilibria {
            let EquilibriumPoint::TwoPlayer { p, q } = e.point else {
                panic!("two-player point expected")
            };
            let gain = two_player_max_gain(&gamma, c1, c2, alpha, p, q);
            assert!(gain <= NE_TOLERANCE);
            if p > 0.0 && p < 1.0 {
                seen_mixed += 1;
            }
        }
    }
    assert!(seen_mixed > 0, "interior cell never sampled");
}

#[test]
fn p_star_residual_certificates() {
    let ex = DpExample::new(f64::INFINITY).unwrap();
    let count = ex.count_utility();
    let gamma = GammaProfile::from_count_utility(&count).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    for _ in 0..200 {
        let c = rng.random_range(0.0..1.0);
        let alpha = rng.random_range(0.0..=1.0f64);
        match p_star(&gamma, c, alpha).unwrap() {
            SymmetricNe::Point { strategy, residual } => {
                assert!(residual <= 1e-9);
                let direct = symmetric_ne_residual(&count, strategy.p, c, alpha).unwrap();
                assert!((direct - residual).abs() < 1e-15);
            }
            SymmetricNe::FullInterval => {}
        }
    }
}

#[test]
fn gamma_monotone_for_valid_count_utilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        // Concave increasing values: increments strictly decreasing.
        let mut values = vec![0.0];
        let mut inc = rng.random_range(1.0..3.0);
        for _ in 0..n {
            values.push(values.last().unwrap() + inc);
            inc *= rng.random_range(0.3..0.95);
        }
        let u = privfair_core::equilibrium::CountUtility::new(values).unwrap();
        let gamma = GammaProfile::from_count_utility(&u).unwrap();
        assert!(gamma.gamma_min >= 0.0);
        let mut last = -1.0;
        for i in 0..=20 {
            let g = gamma.eval(i as f64 / 20.0);
            assert!(g >= last - 1e-12);
            last = g;
        }
    }
}
