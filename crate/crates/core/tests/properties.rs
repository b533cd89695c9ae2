//! Structural invariants checked on random inputs.

use std::f64::consts::PI;

use maxwell_bloch::averaging::averaged_rhs;
use maxwell_bloch::full::mbe_rhs;
use maxwell_bloch::harmonic::{harmonic_states, verify_stationary};
use maxwell_bloch::model::{gauge_action, Harmonic};
use maxwell_bloch::reduction::{bloch_from_south, invert_coord, lift_state, north_coord, project_state};
use maxwell_bloch::{EnvelopeState, PhysicalParams, PureState, Pumping, ReducedState};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex(bound: f64) -> impl Strategy<Value = Complex64> {
    (-bound..bound, -bound..bound).prop_map(|(re, im)| Complex64::new(re, im))
}

fn pure_state() -> impl Strategy<Value = PureState> {
    (-3.0..3.0f64, -3.0..3.0f64, complex(1.0), complex(1.0))
        .prop_filter("nonzero spinor", |(_, _, c1, c2)| c1.norm_sqr() + c2.norm_sqr() > 1e-3)
        .prop_map(|(a, b, c1, c2)| PureState::unchecked(a, b, c1, c2).normalized())
}

fn pump() -> impl Strategy<Value = Pumping> {
    (complex(2.0), complex(1.0), 1.2..3.0f64).prop_map(|(carrier, amp, freq)| {
        Pumping::new(carrier, vec![Harmonic { amplitude: amp, freq }], 1.0).unwrap()
    })
}

fn params() -> impl Strategy<Value = PhysicalParams> {
    (0.2..4.0f64, 1e-4..0.1f64).prop_map(|(r, p)| PhysicalParams::normalized(r, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vector_field_is_tangent_to_charge_level(x in pure_state(), t in 0.0..100.0f64, k in params(), e in pump()) {
        let d = mbe_rhs(&x, t, &k, &e);
        let dq = 2.0 * (x.c1.conj() * d.dc1 + x.c2.conj() * d.dc2).re;
        prop_assert!(dq.abs() < 1e-13, "d charge/dt = {dq}");
    }

    #[test]
    fn vector_field_commutes_with_gauge(x in pure_state(), theta in -PI..PI, t in 0.0..100.0f64, k in params(), e in pump()) {
        let rot = Complex64::cis(theta);
        let d = mbe_rhs(&x, t, &k, &e);
        let dg = mbe_rhs(&gauge_action(theta, &x), t, &k, &e);
        prop_assert!((dg.da - d.da).abs() < 1e-13);
        prop_assert!((dg.db - d.db).abs() < 1e-13);
        prop_assert!((dg.dc1 - rot * d.dc1).norm() < 1e-13);
        prop_assert!((dg.dc2 - rot * d.dc2).norm() < 1e-13);
    }

    #[test]
    fn projection_is_gauge_invariant(x in pure_state(), theta in -PI..PI, k in params()) {
        let y = project_state(&x, &k).unwrap();
        let yg = project_state(&gauge_action(theta, &x), &k).unwrap();
        prop_assert_eq!(y.chart, yg.chart);
        prop_assert!((y.m - yg.m).norm() < 1e-15);
        prop_assert!((y.coord - yg.coord).norm() < 1e-12 * (1.0 + y.coord.norm()));
    }

    #[test]
    fn chart_transition_is_reciprocal_conjugate(sigma in complex(5.0)) {
        prop_assume!(sigma.norm() > 1e-3);
        let q = north_coord(&bloch_from_south(sigma)).unwrap();
        let want = invert_coord(sigma);
        prop_assert!((q - want).norm() < 1e-12 * want.norm().max(1.0));
        prop_assert!((invert_coord(want) - sigma).norm() < 1e-12 * sigma.norm().max(1.0));
    }

    #[test]
    fn lift_is_a_section(m in complex(3.0), coord in complex(3.0), south in any::<bool>(), k in params()) {
        let y = if south { ReducedState::south(m, coord) } else { ReducedState::north(m, coord) };
        let x = lift_state(&y, &k);
        prop_assert!((x.charge() - 1.0).abs() < 1e-14);
        let back = project_state(&x, &k).unwrap();
        prop_assert!((back.m - y.m).norm() < 1e-14);
        prop_assert!(back.bloch_point().distance(&y.bloch_point()) < 1e-13);
    }

    #[test]
    fn averaged_field_is_rotation_covariant(
        m in complex(3.0), q in complex(3.0), ae in complex(2.0), phi in -PI..PI, k in params(),
    ) {
        let e = EnvelopeState::new(m, q);
        let lhs = averaged_rhs(&e.rotated(phi), &k, ae * Complex64::cis(phi));
        let rhs = averaged_rhs(&e, &k, ae).rotated(phi);
        let scale = 1.0 + rhs.m.norm() + rhs.q.norm();
        prop_assert!(lhs.distance(&rhs) < 1e-12 * scale);
    }

    #[test]
    fn harmonic_states_are_stationary(r in 0.1..5.0f64, ae in complex(3.0), p in 1e-4..0.1f64) {
        let k = PhysicalParams::normalized(r, p).unwrap();
        for h in harmonic_states(r, ae, k.c()).unwrap() {
            let res = verify_stationary(&h, &k, ae);
            let scale = 1.0 + h.mr.norm() + h.qr.norm() + ae.norm();
            prop_assert!(res < 1e-12 * scale * scale, "{:?} residual {res}", h.branch);
        }
    }

    #[test]
    fn time_shift_of_carrier_is_a_rotation(carrier in complex(2.0), s in -50.0..50.0f64, t in 0.0..50.0f64) {
        let k = PhysicalParams::normalized(1.0, 1e-3).unwrap();
        let e = Pumping::carrier_only(carrier);
        let shifted = e.rotated(-k.cavity_freq() * s).eval(&k, t);
        prop_assert!((shifted - e.eval(&k, t + s)).abs() < 1e-12);
    }
}
