// scratch calibration for figure configs (deleted before finalizing)
use privfair_core::fed::{self, FedParams, UserProfile};
use privfair_core::mechanism::{optimize_alpha_grid, GridSpec, MechanismOptions};
use privfair_core::equilibrium::{NeSearch, EquilibriumPoint};

fn params(ns: &[u64], costs: &[[f64; 3]], s2: f64, r2: f64) -> FedParams {
    let users = ns.iter().zip(costs).map(|(&n, c)| UserProfile::new(n, 1.0, c.to_vec()).unwrap()).collect();
    FedParams::new(s2, r2, users).unwrap()
}

fn main() {
    // ---- Fig 6: starred profile NE at alpha=1, s2=100, r2=1
    let ns = [100u64, 100, 10, 10, 10, 10, 10, 10, 10, 10];
    let fig6_costs: [[f64; 3]; 10] = [
        [0.0, 1.0, 9.6],   // T1
        [0.0, 1.0, 9.6],   // T1
        [0.0, 0.6, 5.0],   // T2
        [0.0, 0.6, 5.0],   // T2
        [0.0, 1.2, 7.64],  // T3
        [0.0, 0.4, 7.5],   // T4
        [0.0, 0.4, 7.5],   // T4
        [0.0, 0.7, 8.2],   // T5
        [0.0, 0.7, 8.2],   // T5
        [0.0, 1.2, 7.64],  // T3
    ];
    let p6 = params(&ns, &fig6_costs, 100.0, 1.0);
    let u6 = fed::as_coalition_utility(&p6).unwrap();
    let starred: Vec<u8> = vec![2, 1, 2, 2, 2, 1, 1, 1, 1, 0];
    let search = NeSearch::new(&u6, &p6.users).unwrap();
    let nes = search.equilibria_at(1.0, false).unwrap();
    let found = nes.equilibria.iter().any(|e| matches!(&e.point, EquilibriumPoint::Pure(p) if *p == starred));
    println!("fig6: starred profile is NE at alpha=1: {found} ({} NEs total)", nes.equilibria.len());

    // ---- Fig 7a: homogeneous s2=0.1 r2=100; want NE at alpha*: [1,1,0,...,0]
    let fig7a_costs: [[f64; 3]; 10] = [
        [0.0, 2.0, 50.0], [0.0, 2.0, 50.0],
        [0.0, 50.0, 100.0], [0.0, 50.0, 100.0], [0.0, 50.0, 100.0], [0.0, 50.0, 100.0],
        [0.0, 50.0, 100.0], [0.0, 50.0, 100.0], [0.0, 50.0, 100.0], [0.0, 50.0, 100.0],
    ];
    let p7a = params(&ns, &fig7a_costs, 0.1, 100.0);
    let u7a = fed::as_coalition_utility(&p7a).unwrap();
    let grid = GridSpec::unit(401).unwrap();
    let sol = optimize_alpha_grid(&u7a, &p7a.users, &grid, MechanismOptions::default()).unwrap();
    println!("fig7a: alpha*={:.4} net={:.4} eq={:?}", sol.alpha_star, sol.platform_net, sol.equilibrium);

    // ---- Fig 7b: heterogeneous s2=100 r2=1; want all but two @2, one @1, one @0
    let fig7b_costs: [[f64; 3]; 10] = [
        [0.0, 3.0, 4.0], [0.0, 3.0, 4.0],
        [0.0, 2.5, 3.2], [0.0, 2.5, 3.2], [0.0, 2.5, 3.2],
        [0.0, 2.5, 3.2], [0.0, 2.5, 3.2], [0.0, 2.5, 3.2],
        [0.0, 0.5, 6.0],
        [0.0, 30.0, 60.0],
    ];
    let p7b = params(&ns, &fig7b_costs, 100.0, 1.0);
    let u7b = fed::as_coalition_utility(&p7b).unwrap();
    let sol = optimize_alpha_grid(&u7b, &p7b.users, &grid, MechanismOptions::default()).unwrap();
    println!("fig7b: alpha*={:.4} net={:.4} eq={:?}", sol.alpha_star, sol.platform_net, sol.equilibrium);
}
