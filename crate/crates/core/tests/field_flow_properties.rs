//! Property tests for field parsing, jet arithmetic and the flow.

use std::collections::BTreeMap;

use kf_core::flow::{find_periodic_orbit, FlowHandle, Tolerances};
use kf_core::linalg::{expm, CMatrix, C64};
use kf_core::systems;
use kf_core::vfield::{field_jet, homogeneous_indices, parse_field, Jet};
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Planar polynomial field of degree 3 with the given coefficients.
fn poly_field(coeffs: &[f64]) -> String {
    let mut c = coeffs.iter();
    let comps: Vec<String> = (0..2)
        .map(|_| {
            let mut terms = Vec::new();
            for d in 1..=3 {
                for m in homogeneous_indices(2, d) {
                    terms.push(format!("({:e})*x1^{}*x2^{}", c.next().unwrap(), m[0], m[1]));
                }
            }
            terms.join(" + ")
        })
        .collect();
    format!("[{}]", comps.join(", "))
}

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        (-5.0f64..5.0).prop_map(|v| format!("{v:e}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]))
                .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
            (inner.clone(), prop::sample::select(vec!["sin", "cos", "exp", "tanh"])).prop_map(|(a, f)| format!("{f}({a})")),
            (inner.clone(), 0u32..4).prop_map(|(a, p)| format!("({a})^{p}")),
            inner.prop_map(|a| format!("-({a})")),
        ]
    })
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn first_order_jets_match_central_differences(
        coeffs in prop::collection::vec(-1.0f64..1.0, 18),
        x in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let p = parse_field(&poly_field(&coeffs), 2, &BTreeMap::new()).unwrap();
        let j = field_jet(&p, &x, 1).unwrap();
        let h = 1e-5;
        for c in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (p.eval(&xp).unwrap(), p.eval(&xm).unwrap());
            for r in 0..2 {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let jet = j.components[r].linear_coeff(c);
                prop_assert!((fd - jet).abs() <= 1e-6 * jet.abs().max(1.0), "{fd} vs {jet}");
            }
        }
    }

    #[test]
    fn lower_order_jets_are_truncations(
        coeffs in prop::collection::vec(-1.0f64..1.0, 18),
        x in prop::collection::vec(-1.0f64..1.0, 2),
        k1 in 1usize..4,
    ) {
        let poly = poly_field(&coeffs);
        let (a, b) = poly[1..poly.len() - 1].split_once(", ").unwrap();
        let src = format!("[sin({a}), exp(x2)*(x1 - x2) + tanh({b})]");
        let p = parse_field(&src, 2, &BTreeMap::new()).unwrap();
        let full = field_jet(&p, &x, 5).unwrap().truncate(k1);
        let low = field_jet(&p, &x, k1).unwrap();
        prop_assert_eq!(full, low);
    }

    #[test]
    fn pretty_print_round_trip_is_bitwise(s in expr(), pts in prop::collection::vec(-2.0f64..2.0, 200)) {
        let src = format!("[{s}, x1]");
        let p = parse_field(&src, 2, &BTreeMap::new()).unwrap();
        let q = parse_field(&p.to_string(), 2, &BTreeMap::new()).unwrap();
        for x in pts.chunks(2) {
            let (a, b) = (p.eval(x), q.eval(x));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!(a[0].to_bits() == b[0].to_bits() || (a[0].is_nan() && b[0].is_nan())),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn jet_products_commute_and_associate(
        a in prop::collection::vec(-1.0f64..1.0, 10),
        b in prop::collection::vec(-1.0f64..1.0, 10),
        c in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        let mk = |v: &[f64]| {
            let mut j = Jet::<f64>::zero(2, 3);
            j.coeffs_mut().copy_from_slice(v);
            j
        };
        let (a, b, c) = (mk(&a), mk(&b), mk(&c));
        let ab = &a * &b;
        let ba = &b * &a;
        let l = &ab * &c;
        let r = &a * &(&b * &c);
        let scale = a.max_abs() * b.max_abs() * c.max_abs() + 1e-300;
        for (u, v) in ab.coeffs().iter().zip(ba.coeffs()) {
            prop_assert!((u - v).abs() <= 1e-13 * (a.max_abs() * b.max_abs() + 1e-300));
        }
        for (u, v) in l.coeffs().iter().zip(r.coeffs()) {
            prop_assert!((u - v).abs() <= 1e-13 * 10.0 * scale);
        }
    }
}

fn flow_handles() -> Vec<(String, FlowHandle)> {
    systems::all()
        .into_iter()
        .filter(|s| s.period_guess.is_some() || s.name == "triangular" || s.name == "bernoulli")
        .map(|s| (s.name.to_string(), s.handle()))
        .collect()
}

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn flow_is_a_semigroup(
        x in prop::collection::vec(-0.5f64..0.5, 2),
        s in 0.0f64..3.0,
        t in 0.0f64..3.0,
    ) {
        for (name, h) in flow_handles() {
            let x: Vec<f64> = x[..h.dim()].to_vec();
            let a = h.flow_to(&x, s + t).unwrap();
            let b = h.flow_to(&h.flow_to(&x, t).unwrap(), s).unwrap();
            let tol = h.tolerances();
            let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 10.0 * (tol.rtol * scale + tol.atol), "{name}: {err:e}");
        }
    }

    #[test]
    fn linear_time_one_jets_are_matrix_exponentials(m in prop::collection::vec(-1.0f64..0.5, 4)) {
        let src = format!("[({:e})*x1 + ({:e})*x2, ({:e})*x1 + ({:e})*x2]", m[0], m[1], m[2], m[3]);
        let h = FlowHandle::flow(parse_field(&src, 2, &BTreeMap::new()).unwrap());
        let j = h.time_one_map_jet(&[0.0, 0.0], 3).unwrap();
        let e = expm(&CMatrix::from_fn(2, 2, |r, c| C64::new(m[2 * r + c], 0.0)), 1.0).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                prop_assert!((j.components[r].linear_coeff(c) - e[(r, c)].re).abs() <= 1e-9);
            }
            for (i, mi) in j.components[r].layout().indices().iter().enumerate() {
                if mi.iter().sum::<u32>() != 1 {
                    prop_assert!(j.components[r].coeffs()[i].abs() <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn time_one_jets_match_flow_differences() {
    for sys in [systems::bernoulli(), systems::triangular_flow(), systems::cubic_boundary(2.0, 0.1)] {
        let h = sys.handle();
        let fine = h.with_tolerances(Tolerances {
            rtol: 1e-13,
            atol: 1e-15,
            ..*h.tolerances()
        });
        let x0 = vec![0.0; h.dim()];
        let j = h.time_one_map_jet(&x0, 2).unwrap();
        let step = 1e-4;
        for c in 0..h.dim() {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[c] += step;
            xm[c] -= step;
            let (fp, fm) = (fine.flow_to(&xp, 1.0).unwrap(), fine.flow_to(&xm, 1.0).unwrap());
            for r in 0..h.dim() {
                let fd = (fp[r] - fm[r]) / (2.0 * step);
                let jet = j.components[r].linear_coeff(c);
                assert!((fd - jet).abs() <= 1e-5 * jet.abs().max(1e-3), "{}: {fd} vs {jet}", sys.name);
            }
        }
    }
}

#[test]
fn multipliers_do_not_depend_on_the_base_point() {
    for sys in [systems::stuart_landau(), systems::van_der_pol(1.0)] {
        let h = sys.handle();
        let c = find_periodic_orbit(&h, &sys.attractor_guess, sys.period_guess.unwrap()).unwrap();
        for s in [0.7, 2.9] {
            let d = c.rebased(&h, s).unwrap();
            for (a, b) in c.floquet_multipliers.iter().zip(&d.floquet_multipliers) {
                assert!((a - b).norm() <= 1e-6 * a.norm(), "{}: {a} vs {b}", sys.name);
            }
        }
    }
}
