use std::f64::consts::PI;

use szego_core::flow::{integrate, Field, FlowConfig, MonitorOptions};
use szego_core::kronecker::{numerical_rank, recover_rational};
use szego_core::rational::{integrate_rational, mtilde1_to_fourier, rational_to_fourier, MTilde1Solution, RationalState};
use szego_core::random::{random_poles, random_residues, seeded};
use szego_core::waves::traveling_wave;
use szego_core::{FourierSymbol, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn quiet(cutoff: usize, t_end: f64) -> FlowConfig {
    FlowConfig {
        cutoff,
        t_end,
        sample_every: 500,
        monitors: MonitorOptions { hs_orders: vec![], spectrum: false, eig_count: 0, lax: false },
        ..FlowConfig::default()
    }
}

#[test]
fn coordinate_and_galerkin_flows_agree_on_two_poles() {
    let mut rng = seeded(90);
    let state = RationalState::new(random_residues(&mut rng, 2), random_poles(&mut rng, 2, 0.5, 0.2), None).unwrap();
    let cfg = quiet(96, 2.0);
    let fourier = integrate(&rational_to_fourier(&state, 96).unwrap(), &cfg, Field::Szego).unwrap();
    let coords = integrate_rational(&state, &cfg.plan()).unwrap();
    for (u, st) in fourier.states.iter().zip(&coords.states) {
        let v = rational_to_fourier(st, 96).unwrap();
        assert!(u.distance(&v) < 1e-9, "{}", u.distance(&v));
    }
}

#[test]
fn closed_form_rank_two_matches_galerkin_flow() {
    let eps = 0.1;
    let sol = MTilde1Solution::new(c(1.0, 0.0), c(eps, 0.0), c(0.0, 0.0)).unwrap();
    let u0 = mtilde1_to_fourier(c(1.0, 0.0), c(eps, 0.0), c(0.0, 0.0), 64);
    let series = integrate(&u0, &quiet(64, 5.0), Field::Szego).unwrap();
    for (t, u) in series.times.iter().zip(&series.states) {
        let (a, b, p) = sol.at(*t);
        let exact = mtilde1_to_fourier(a, b, p, 64);
        assert!(u.distance(&exact) < 1e-9, "t={t}: {}", u.distance(&exact));
    }
}

#[test]
fn traveling_wave_poles_recovered_by_recurrence() {
    let p = C64::from_polar(0.6, PI / 5.0);
    for n in 1..=4 {
        let (u, _) = traveling_wave(n, n - 1, p, c(1.0, 0.0)).unwrap();
        let k = 4 * n + 8;
        assert_eq!(numerical_rank(&u, k, 1e-10).unwrap(), n);
        let rec = recover_rational(&u.coeffs()[..2 * k], n).unwrap();
        for j in 0..n {
            let pole = p * C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
            let found = rec.model.roots.iter().map(|r| (r - pole).norm()).fold(f64::INFINITY, f64::min);
            assert!(found < 1e-10, "N={n}: pole {pole} off by {found}");
        }
    }
}

#[test]
fn symbols_round_trip_through_json() {
    let u = FourierSymbol::new(vec![c(0.1, -0.2), c(1e-300, 3.5), c(-0.7, 1.0 / 3.0)]).unwrap();
    assert_eq!(FourierSymbol::from_json(&u.to_json()).unwrap().coeffs(), u.coeffs());
    let st = RationalState::new(vec![c(0.3, 0.1)], vec![c(0.2, 0.2)], Some(c(1.0, 0.0))).unwrap();
    let back: RationalState = serde_json::from_str(&serde_json::to_string(&st).unwrap()).unwrap();
    assert_eq!(back, st);
}
