//! Mean-field dynamics checked against the exact few-spin Lindblad evolution.

use mpemba_core::bloch::{analytic_independent, cartesian_rhs};
use mpemba_core::integrator::integrate;
use mpemba_core::lindblad::{
    build_liouvillian, check_density, evolve_exact, mean_magnetization, product_state,
    site_magnetization, stationary_state,
};
use mpemba_core::{BlochState, Environment, IntegratorConfig, Method, SystemParams};
use nalgebra::Vector3;
use proptest::prelude::*;

fn unit_ball() -> impl Strategy<Value = Vector3<f64>> {
    (0.0..1.0f64, 0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(r, th, ph)| {
        BlochState::new(r, th, ph).unwrap().cartesian()
    })
}

fn physical_params(n: u32, env: Environment) -> impl Strategy<Value = SystemParams> {
    (0.2..3.0f64, 0.05..1.0f64, -0.95..0.95f64).prop_map(move |(t1, frac, m0)| {
        SystemParams::new(t1, frac * 2.0 * t1, n, m0, env).unwrap()
    })
}

#[test]
fn single_spin_three_way_agreement() {
    for t2 in [1.0, 2.0 / 3.0, 0.3] {
        let p = SystemParams::new(1.0, t2, 1, 0.5, Environment::Independent).unwrap();
        let lv = build_liouvillian(&p, Environment::Shared).unwrap();
        let s0 = BlochState::new(0.9, 2.2, 0.7).unwrap();
        let rho0 = product_state(&[s0.cartesian()]).unwrap();
        let cfg = IntegratorConfig::for_params(&p, Method::Rk4Fixed, 5.0).unwrap();
        let traj = integrate(&s0, &p, &cfg).unwrap();
        let picks: Vec<usize> = (0..50).map(|k| k * (traj.len() - 1) / 49).collect();
        let times: Vec<f64> = picks.iter().map(|&i| traj.times[i]).collect();
        let exact = evolve_exact(&rho0, &lv, &times).unwrap();
        for (k, &i) in picks.iter().enumerate() {
            let lind = site_magnetization(&exact[k], 0);
            let closed = analytic_independent(&s0, &p, times[k]).unwrap().cartesian();
            let numeric = traj.states[i].cartesian();
            assert!((lind - closed).norm() < 1e-8, "t={} {lind} {closed}", times[k]);
            assert!((numeric - closed).norm() < 1e-8, "t={}", times[k]);
        }
    }
}

#[test]
fn single_spin_long_time_limit() {
    let p = SystemParams::new(1.0, 0.4, 1, -0.3, Environment::Independent).unwrap();
    let lv = build_liouvillian(&p, Environment::Independent).unwrap();
    let rho0 = product_state(&[Vector3::new(0.6, -0.2, 0.7)]).unwrap();
    let late = evolve_exact(&rho0, &lv, &[60.0]).unwrap();
    let m = site_magnetization(&late[0], 0);
    assert!((m - Vector3::new(0.0, 0.0, -0.3)).norm() < 1e-12);
    let ss = site_magnetization(&stationary_state(&lv), 0);
    assert!((ss - Vector3::new(0.0, 0.0, -0.3)).norm() < 1e-10);
}

#[test]
fn independent_marginals_follow_closed_form() {
    let p = SystemParams::new(1.0, 0.5, 3, 0.4, Environment::Independent).unwrap();
    let lv = build_liouvillian(&p, Environment::Independent).unwrap();
    let sites = [
        BlochState::new(0.8, 0.3, 0.0).unwrap(),
        BlochState::new(0.5, 2.0, 1.0).unwrap(),
        BlochState::new(1.0, 1.2, 4.0).unwrap(),
    ];
    let rho0 = product_state(&sites.map(|s| s.cartesian())).unwrap();
    let times = [0.1, 0.7, 2.5];
    for (rho, &t) in evolve_exact(&rho0, &lv, &times).unwrap().iter().zip(&times) {
        for (i, s) in sites.iter().enumerate() {
            let want = analytic_independent(s, &p, t).unwrap().cartesian();
            assert!((site_magnetization(rho, i) - want).norm() < 1e-10);
        }
    }
}

#[test]
fn collective_damping_speeds_up_the_transverse_decay() {
    for n in [2, 3] {
        let shared = SystemParams::new(1.0, 1.0, n, 0.5, Environment::Shared).unwrap();
        let s0 = BlochState::new(0.5, 1.0, 0.0).unwrap();
        let rho0 = product_state(&vec![s0.cartesian(); n as usize]).unwrap();
        let t = [0.4];
        let theta = |env| {
            let lv = build_liouvillian(&shared, env).unwrap();
            let m = mean_magnetization(&evolve_exact(&rho0, &lv, &t).unwrap()[0]);
            m.x.hypot(m.y).atan2(m.z)
        };
        assert!(theta(Environment::Shared) < theta(Environment::Independent), "n={n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // For uncorrelated identical spins the exact rate of the mean
    // magnetization is the mean-field right-hand side.
    #[test]
    fn product_state_rate_matches_mean_field(
        m in unit_ball(),
        n in 1u32..=3,
        shared in any::<bool>(),
        seed in (0.2..3.0f64, 0.05..1.0f64, -0.95..0.95f64),
    ) {
        let env = if shared { Environment::Shared } else { Environment::Independent };
        let (t1, frac, m0) = seed;
        let p = SystemParams::new(t1, frac * 2.0 * t1, n, m0, env).unwrap();
        let lv = build_liouvillian(&p, env).unwrap();
        let rho = product_state(&vec![m; n as usize]).unwrap();
        let exact = mean_magnetization(&lv.apply(&rho));
        let mean_field = cartesian_rhs(&m, &p);
        let scale = 1.0 + mean_field.norm();
        prop_assert!((exact - mean_field).norm() < 1e-10 * scale, "{exact} vs {mean_field}");
    }

    #[test]
    fn exact_evolution_stays_physical(
        p in (1u32..=3, any::<bool>()).prop_flat_map(|(n, s)| {
            physical_params(n, if s { Environment::Shared } else { Environment::Independent })
        }),
        m in unit_ball(),
    ) {
        let lv = build_liouvillian(&p, p.env).unwrap();
        let rho0 = product_state(&vec![m; p.n as usize]).unwrap();
        for rho in evolve_exact(&rho0, &lv, &[0.05, 0.5, 3.0]).unwrap() {
            prop_assert!(check_density(&rho, 1e-9).is_ok());
        }
    }
}
