//! Closed-form and independently computed references for the numerical core.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use wavelab::asymptotics::{estimate_alpha_beta, EstimatorSettings};
use wavelab::coeffs::{geometric_grid, CoefficientProfile};
use wavelab::floquet::{sample, HillProblem};
use wavelab::modeode::{fundamental_matrix, integrate_mode, Equation, ModeState};
use wavelab::rates::{predict, ols_fit, PredictionContext, TheoremId};
use wavelab::spectral::{evolve, synthesize_radial3d, FieldComponent, FrequencyGrid, GaussianData, GridSpec, SpectralData};

/// Composite Simpson on `cells` equal cells.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, cells: usize) -> f64 {
    let h = (b - a) / cells as f64;
    (0..cells)
        .map(|i| {
            let x = a + i as f64 * h;
            h / 6.0 * (f(x) + 4.0 * f(x + h / 2.0) + f(x + h))
        })
        .sum()
}

#[test]
fn free_mode_is_a_cosine() {
    let rho: f64 = 1.7;
    let times: Vec<f64> = (0..=50).map(|k| k as f64).collect();
    let tr = integrate_mode(&Equation::free().mode(rho * rho), ModeState::real(1.0, 0.0), &times, 1e-12).unwrap();
    for (s, &t) in tr.states.iter().zip(&times) {
        assert!((s.v.re - (rho * t).cos()).abs() < 1e-9, "t = {t}");
        assert!((s.v_dot.re + rho * (rho * t).sin()).abs() < 1e-9);
    }
}

#[test]
fn constant_damping_matches_the_damped_oscillator() {
    let (b, lam): (f64, f64) = (0.3, 2.0);
    let w = (lam - b * b).sqrt();
    let eq = Equation::free().with_damping(CoefficientProfile::constant(b).unwrap());
    let times: Vec<f64> = (0..=40).map(|k| 0.5 * k as f64).collect();
    let tr = integrate_mode(&eq.mode(lam), ModeState::real(1.0, 0.0), &times, 1e-12).unwrap();
    for (s, &t) in tr.states.iter().zip(&times) {
        let exact = (-b * t).exp() * ((w * t).cos() + b / w * (w * t).sin());
        assert!((s.v.re - exact).abs() < 1e-10, "t = {t}");
    }
}

#[test]
fn constant_speed_discriminant_is_a_cosine() {
    let c = 1.3;
    let p = HillProblem::new(Equation::new(CoefficientProfile::constant(c).unwrap()), Some(2.0 * PI)).unwrap();
    for lam in [0.1, 0.7, 2.3, 9.0] {
        let s = sample(&p, lam).unwrap();
        assert!((s.discriminant - 2.0 * (c * lam.sqrt() * 2.0 * PI).cos()).abs() < 1e-8);
        assert_relative_eq!(s.det_monodromy, 1.0, epsilon = 1e-9);
    }
}

#[test]
fn abel_identity_for_periodic_damping() {
    let (b0, b1, t) = (0.5, 0.3, 2.0 * PI);
    let b = CoefficientProfile::periodic_damping(b0, b1, t).unwrap();
    let m = fundamental_matrix(&Equation::free().with_damping(b).mode(1.5), 0.0, 3.0 * t, 1e-11).unwrap();
    // ∫ over whole periods only sees the mean
    assert_relative_eq!(m.det(), (-2.0 * b0 * 3.0 * t).exp(), max_relative = 1e-8);
}

/// Gaussian u(0) = exp(-r²/w²), u_t(0) = 0 in three dimensions: spherical means give
/// u(t, r) = ((r - t)φ(r - t) + (r + t)φ(r + t)) / 2r.
#[test]
fn radial_synthesis_matches_the_spherical_mean_solution() {
    let w = 1.0;
    let phi = |r: f64| (-(r * r) / (w * w)).exp();
    let grid = FrequencyGrid::new(GridSpec::Uniform { rho_max: 12.0, count: 481 }).unwrap();
    let data = SpectralData::gaussian(3, &grid, GaussianData { width: w, amp_u1: 1.0, amp_u2: 0.0 }).unwrap();
    let times = [0.0, 5.0, 20.0];
    let ev = evolve(&data, &Equation::free(), &times, 1e-12).unwrap();
    let r: Vec<f64> = (1..=300).map(|k| 0.1 * k as f64).collect();
    for (k, &t) in times.iter().enumerate() {
        let snap = synthesize_radial3d(&data, t, &ev.states_at(k), &r, FieldComponent::U).unwrap();
        for (j, &rr) in r.iter().enumerate() {
            let exact = ((rr - t) * phi(rr - t) + (rr + t) * phi(rr + t)) / (2.0 * rr);
            assert!((snap.values[j].re - exact).abs() < 1e-9, "t = {t}, r = {rr}: {} vs {exact}", snap.values[j].re);
        }
    }
}

/// At λ = 0 the monodromy is [[1, H], [0, e^{-2B_T}]] with H = ∫₀ᵀ e^{-2B}; the slow
/// mode expansion v = e^{-λαt}(1 + λp₁) with periodic p₁ gives
/// αT = κH + ∫₀ᵀ e^{-2B(s)} G(s) ds, G(s) = ∫₀ˢ e^{2B}, κ = e^{-2B_T} G(T) / (1 - e^{-2B_T}),
/// and β = H / (1 - e^{-2B_T}).
fn periodic_oracle(b0: f64, b1: f64, period: f64) -> (f64, f64) {
    let w = 2.0 * PI / period;
    let big_b = |s: f64| b0 * s + b1 / w * (w * s).sin();
    let cells = 4000;
    let h = simpson(|s| (-2.0 * big_b(s)).exp(), 0.0, period, cells);
    let g = |s: f64| simpson(|x| (2.0 * big_b(x)).exp(), 0.0, s, 1000);
    let e = (-2.0 * big_b(period)).exp();
    let kappa = e * g(period) / (1.0 - e);
    let k = simpson(|s| (-2.0 * big_b(s)).exp() * g(s), 0.0, period, 1000);
    ((kappa * h + k) / period, h / (1.0 - e))
}

#[test]
fn oracle_reduces_to_constant_damping() {
    let (a, b) = periodic_oracle(0.5, 0.0, 2.0 * PI);
    assert_relative_eq!(a, 1.0, epsilon = 1e-10);
    assert_relative_eq!(b, 1.0, epsilon = 1e-10);
}

#[test]
fn estimator_matches_the_periodic_oracle() {
    for (b0, b1) in [(0.5, 0.3), (1.0, 0.6), (0.4, -0.2)] {
        let (alpha, beta) = periodic_oracle(b0, b1, 2.0 * PI);
        let est = estimate_alpha_beta(&CoefficientProfile::periodic_damping(b0, b1, 2.0 * PI).unwrap(), EstimatorSettings::default()).unwrap();
        assert!((est.alpha_hat - alpha).abs() < 1e-6, "alpha {} vs {alpha}", est.alpha_hat);
        assert!((est.beta_hat - beta).abs() < 1e-6, "beta {} vs {beta}", est.beta_hat);
    }
}

#[test]
fn estimator_constant_damping_slow_root() {
    for c in [0.25, 0.5, 1.0, 2.0, 3.0] {
        let est = estimate_alpha_beta(&CoefficientProfile::constant(c).unwrap(), EstimatorSettings::default()).unwrap();
        assert_relative_eq!(est.alpha_hat, 1.0 / (2.0 * c), max_relative = 1e-6);
        assert_relative_eq!(est.beta_hat, 1.0 / (2.0 * c), max_relative = 1e-6);
    }
}

#[test]
fn stated_rates() {
    let ctx = PredictionContext::default();
    let free = predict(TheoremId::FreeStrichartz, 3, 1.0, f64::INFINITY, 0, 0, &ctx).unwrap();
    assert_eq!(free.exponent, 1.0);
    let damp = PredictionContext {
        damping: Some(CoefficientProfile::constant(0.5).unwrap()),
        shape: None,
    };
    assert_eq!(predict(TheoremId::Matsumura, 3, 1.0, 2.0, 0, 0, &damp).unwrap().exponent, 0.75);
    assert_eq!(predict(TheoremId::Matsumura, 3, 1.0, f64::INFINITY, 0, 0, &damp).unwrap().exponent, 1.5);
    let inv = PredictionContext {
        damping: Some(CoefficientProfile::inverse_damping(0.3).unwrap()),
        shape: None,
    };
    let e = predict(TheoremId::WirthNoneffective, 3, 2.0, 2.0, 0, 0, &inv).unwrap();
    assert_relative_eq!(2.0 * e.exponent, 0.6, epsilon = 1e-12);
    let wd = predict(TheoremId::WirthEffective, 1, 2.0, 2.0, 1, 0, &PredictionContext {
        damping: Some(CoefficientProfile::power_damping(0.5).unwrap()),
        shape: None,
    })
    .unwrap();
    assert_eq!(wd.exponent, 1.0);
}

#[test]
fn log_log_fit_recovers_a_power_law() {
    let t = geometric_grid(1.0, 1e4, 60);
    let lx: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = t.iter().map(|x| (3.0 * x.powf(-0.6)).ln()).collect();
    let f = ols_fit(&lx, &ly).unwrap();
    assert_relative_eq!(f.slope, -0.6, epsilon = 1e-12);
    assert_relative_eq!(f.intercept, 3f64.ln(), epsilon = 1e-12);
}
