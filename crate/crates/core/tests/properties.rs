use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use wavelab::cli::Num;
use wavelab::coeffs::CoefficientProfile;
use wavelab::modeode::{fundamental_matrix, integrate_mode, Equation, ModeState};
use wavelab::rates::{ols_fit, ClockFunction, TheoremId};

fn periodic() -> impl Strategy<Value = CoefficientProfile> {
    prop_oneof![
        (0.3..2.0f64, 0.0..0.9f64, 1.0..8.0f64).prop_map(|(b0, r, t)| CoefficientProfile::periodic_damping(b0, r * b0, t).unwrap()),
        (0.5..2.0f64, 0.0..0.5f64, 1.0..8.0f64).prop_map(|(c, r, t)| CoefficientProfile::periodic_speed(c, r * c * c, t).unwrap()),
    ]
}

fn damping() -> impl Strategy<Value = CoefficientProfile> {
    prop_oneof![
        (0.0..3.0f64).prop_map(|v| CoefficientProfile::constant(v).unwrap()),
        (0.05..3.0f64).prop_map(|m| CoefficientProfile::inverse_damping(m).unwrap()),
        (0.1..0.9f64).prop_map(|g| CoefficientProfile::power_damping(g).unwrap()),
        (0.3..1.0f64, 0.0..0.9f64).prop_map(|(b0, r)| CoefficientProfile::periodic_damping(b0, r * b0, 2.0 * PI).unwrap()),
        (0.1..0.9f64, 0.2..0.9f64).prop_map(|(m, a)| CoefficientProfile::modulated_damping(m, a).unwrap()),
    ]
}

/// Dampings bounded away from zero, for which ∫1/b is finite.
fn positive_damping() -> impl Strategy<Value = CoefficientProfile> {
    prop_oneof![
        (0.05..3.0f64).prop_map(|v| CoefficientProfile::constant(v).unwrap()),
        (0.05..3.0f64).prop_map(|m| CoefficientProfile::inverse_damping(m).unwrap()),
        (0.1..0.9f64).prop_map(|g| CoefficientProfile::power_damping(g).unwrap()),
        (0.3..1.0f64, 0.0..0.9f64).prop_map(|(b0, r)| CoefficientProfile::periodic_damping(b0, r * b0, 2.0 * PI).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn periodic_profiles_repeat(p in periodic(), t in 0.0..50.0f64) {
        let period = p.period().unwrap();
        for k in 0..=2 {
            let a = p.eval(t, k).unwrap();
            let b = p.eval(t + period, k).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn derivative_and_primitive_are_consistent(b in damping(), t in 0.5..40.0f64) {
        let h = 1e-4;
        let d = (b.eval(t + h, 0).unwrap() - b.eval(t - h, 0).unwrap()) / (2.0 * h);
        prop_assert!((d - b.eval(t, 1).unwrap()).abs() <= 1e-6 * (1.0 + d.abs()));
        let i = (b.primitive(t + h).unwrap() - b.primitive(t - h).unwrap()) / (2.0 * h);
        let v = b.value(t).unwrap();
        prop_assert!((i - v).abs() <= 1e-6 * (1.0 + v.abs()));
    }

    #[test]
    fn trajectories_are_linear_in_the_data(
        b in damping(),
        lam in 0.0..20.0f64,
        x in (-2.0..2.0f64, -2.0..2.0f64),
        y in (-2.0..2.0f64, -2.0..2.0f64),
        c in -3.0..3.0f64,
    ) {
        let p = Equation::free().with_damping(b).mode(lam);
        let times = [0.0, 1.0, 5.0, 12.0];
        let sx = ModeState::real(x.0, x.1);
        let sy = ModeState::real(y.0, y.1);
        let sum = ModeState::new(Complex64::new(x.0 + c * y.0, 0.0), Complex64::new(x.1 + c * y.1, 0.0));
        let tx = integrate_mode(&p, sx, &times, 1e-10).unwrap();
        let ty = integrate_mode(&p, sy, &times, 1e-10).unwrap();
        let ts = integrate_mode(&p, sum, &times, 1e-10).unwrap();
        for k in 0..times.len() {
            let e = ts.states[k].v - (tx.states[k].v + ty.states[k].v * c);
            prop_assert!(e.norm() <= 1e-12 * (1.0 + ts.states[k].v.norm()));
        }
    }

    #[test]
    fn abel_identity(b in damping(), lam in 0.0..30.0f64, t1 in 1.0..30.0f64) {
        let p = Equation::free().with_damping(b.clone()).mode(lam);
        let m = fundamental_matrix(&p, 0.0, t1, 1e-11).unwrap();
        let expected = (-2.0 * (b.primitive(t1).unwrap() - b.primitive(0.0).unwrap())).exp();
        // error control is relative to the largest entry, so a determinant far below
        // ‖X‖² is only resolved to tol·‖X‖²
        let scale = expected.max(1e-2 * m.norm().powi(2));
        prop_assert!((m.det() - expected).abs() <= 1e-8 * scale, "det {} vs {}", m.det(), expected);
    }

    #[test]
    fn clocks_increase(b in positive_damping(), t0 in 0.0..100.0f64, dt in 0.01..100.0f64) {
        for clock in [ClockFunction::poly(), ClockFunction::reciprocal_damping(b.clone()), ClockFunction::damping_exponential(Some(b.clone()))] {
            let l = clock.log_eval_many(&[t0, t0 + dt]).unwrap();
            prop_assert!(l[1] >= l[0] - 1e-12);
        }
    }

    #[test]
    fn least_squares_is_exact_on_lines(slope in -5.0..5.0f64, icpt in -10.0..10.0f64, n in 3usize..80) {
        let xs: Vec<f64> = (0..n).map(|k| 0.37 * k as f64 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| icpt + slope * x).collect();
        let f = ols_fit(&xs, &ys).unwrap();
        prop_assert!((f.slope - slope).abs() <= 1e-10 * (1.0 + slope.abs()));
        prop_assert!((f.intercept - icpt).abs() <= 1e-9 * (1.0 + icpt.abs()));
    }

    #[test]
    fn decimal_strings_round_trip(v in -1e12..1e12f64) {
        prop_assert_eq!(Num::parse(&format!("{v:e}")), Some(v));
        prop_assert_eq!(Num::parse(&v.to_string()), Some(v));
    }
}

#[test]
fn theorem_ids_round_trip() {
    for id in TheoremId::ALL {
        assert_eq!(TheoremId::parse(id.as_str()).unwrap(), id);
    }
    assert!(TheoremId::parse("nobody").is_err());
}

#[test]
fn pi_suffix() {
    assert_eq!(Num::parse("2pi"), Some(2.0 * PI));
    assert_eq!(Num::parse("pi"), Some(PI));
    assert_eq!(Num::parse("inf"), Some(f64::INFINITY));
    assert_eq!(Num::parse("nan"), None);
}
