use std::f64::consts::PI;

use kf_core::cycle::{
    asymptotic_phase_at, floquet_normal_form, isostable_at, rebase_cycle, CycleConfig, FloquetNormalForm,
    IsostableMode,
};
use kf_core::flow::{find_periodic_orbit, FlowHandle, LimitCycle};
use kf_core::linalg::C64;
use kf_core::systems::{self, BundledSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(sys: &BundledSystem) -> (FlowHandle, LimitCycle, FloquetNormalForm) {
    let h = sys.handle();
    let c = find_periodic_orbit(&h, &sys.attractor_guess, sys.period_guess.unwrap()).unwrap();
    let nf = floquet_normal_form(&h, &c, &CycleConfig::default(), IsostableMode::Slowest).unwrap();
    (h, c, nf)
}

/// Points within `spread` of the orbit.
fn near_cycle(h: &FlowHandle, c: &LimitCycle, count: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let p = h.flow_to(&c.x0, rng.gen_range(0.0..c.tau)).unwrap();
            p.iter().map(|v| v + rng.gen_range(-spread..spread)).collect()
        })
        .collect()
}

#[test]
fn stuart_landau_period_and_multiplier() {
    let sys = systems::stuart_landau();
    let h = sys.handle();
    let c = find_periodic_orbit(&h, &sys.attractor_guess, 6.0).unwrap();
    assert!((c.tau - 2.0 * PI).abs() <= 1e-8 * 2.0 * PI, "tau {}", c.tau);
    let want = (-4.0 * PI).exp();
    assert_eq!(c.floquet_multipliers.len(), 1);
    assert!((c.floquet_multipliers[0] - C64::new(want, 0.0)).norm() <= 1e-6 * want);
}

#[test]
fn stuart_landau_isostable_and_phase() {
    let (_, _, nf) = setup(&systems::stuart_landau());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let r: f64 = rng.gen_range(0.5..3.0);
        let th: f64 = rng.gen_range(-PI..PI);
        let v = nf.eval(&[r * th.cos(), r * th.sin()]).unwrap();
        assert!(v.converged);
        let iso = (1.0 - r.powi(-2)) / 2.0;
        assert!((v.isostable[0] - C64::new(iso, 0.0)).norm() <= 1e-6, "r={r}: {}", v.isostable[0]);
        assert!((v.phase - C64::from_polar(1.0, th)).norm() <= 1e-6, "r={r} th={th}: {}", v.phase);
    }
}

#[test]
fn on_cycle_values() {
    let (h, c, nf) = setup(&systems::stuart_landau());
    let v = nf.eval(&c.x0).unwrap();
    assert!((v.phase - C64::new(1.0, 0.0)).norm() < 1e-9);
    assert!(v.isostable[0].norm() < 1e-9);
    let t = 1.1;
    let v = nf.eval(&h.flow_to(&c.x0, t).unwrap()).unwrap();
    assert!((v.phase - C64::from_polar(1.0, 2.0 * PI * t / c.tau)).norm() < 1e-9);
    assert_eq!(v.isostable.len(), 1);
}

fn equivariance(sys: &BundledSystem, spread: f64) {
    let (h, c, nf) = setup(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for x in near_cycle(&h, &c, 8, spread, 3) {
        let t: f64 = rng.gen_range(0.0..c.tau);
        let y = h.flow_to(&x, t).unwrap();
        let px = asymptotic_phase_at(&nf.phase, &x).unwrap().value[0];
        let py = asymptotic_phase_at(&nf.phase, &y).unwrap().value[0];
        assert!((px.norm() - 1.0).abs() <= 1e-10 && (py.norm() - 1.0).abs() <= 1e-10);
        let rot = C64::from_polar(1.0, 2.0 * PI * t / c.tau);
        assert!((py - rot * px).norm() <= 1e-6, "{}: phase {} vs {}", sys.name, py, rot * px);

        let zx = isostable_at(&nf.isostable, &x).unwrap().value;
        let zy = isostable_at(&nf.isostable, &y).unwrap().value;
        let want = nf.isostable.apply_exp(t, &zx).unwrap();
        let err = zy.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "{}: isostable decay {err}", sys.name);
    }
}

#[test]
fn stuart_landau_equivariance() {
    equivariance(&systems::stuart_landau(), 0.5);
}

#[test]
fn van_der_pol_equivariance() {
    equivariance(&systems::van_der_pol(1.0), 0.3);
}

#[test]
fn van_der_pol_floquet_mode_matches_slowest() {
    // A planar cycle has one stable multiplier, so both modes build the same
    // coordinate up to normalisation.
    let sys = systems::van_der_pol(1.0);
    let (h, c, slow) = setup(&sys);
    let full = floquet_normal_form(&h, &c, &CycleConfig::default(), IsostableMode::Floquet).unwrap();
    assert_eq!(full.isostable.m(), 1);
    assert!(c.floquet_multipliers[0].re > 0.0 && c.floquet_multipliers[0].norm() < 1.0);
    let pts = near_cycle(&h, &c, 5, 0.3, 5);
    let ratios: Vec<C64> = pts
        .iter()
        .map(|x| full.eval(x).unwrap().isostable[0] / slow.eval(x).unwrap().isostable[0])
        .collect();
    for r in &ratios {
        assert!((r - ratios[0]).norm() <= 1e-6 * ratios[0].norm());
    }
    assert!(slow.injectivity_margin(&pts).unwrap() > 0.0);
}

#[test]
fn base_point_covariance() {
    for (sys, spread) in [(systems::stuart_landau(), 0.5), (systems::van_der_pol(1.0), 0.3)] {
        let (h, c, nf) = setup(&sys);
        let s = 1.3;
        let c2 = rebase_cycle(&h, &c, s).unwrap();
        let nf2 = floquet_normal_form(&h, &c2, &CycleConfig::default(), IsostableMode::Slowest).unwrap();
        let shift = C64::from_polar(1.0, -2.0 * PI * s / c.tau);
        let mut ratio = None;
        for x in near_cycle(&h, &c, 6, spread, 9) {
            let a = nf.eval(&x).unwrap();
            let b = nf2.eval(&x).unwrap();
            assert!((b.phase - shift * a.phase).norm() <= 1e-6, "{}", sys.name);
            // psi_z changes by a constant factor; its value depends on how
            // the new base point is normalised.
            let r = b.isostable[0] / a.isostable[0];
            let r0 = *ratio.get_or_insert(r);
            assert!((r - r0).norm() <= 1e-6 * r0.norm(), "{}: {r} vs {r0}", sys.name);
        }
    }
}
