use num_complex::Complex64;

use crate::asymptotics::{estimate_alpha_beta, liouville_verify, EstimatorSettings};
use crate::coeffs::CoefficientProfile;
use crate::error::Result;
use crate::floquet::{sample, HillProblem};
use crate::modeode::{fundamental_matrix, Equation, ModeState};
use crate::rates::ols_fit;
use crate::spectral::{analyze_1d, conjugate_grid, synthesize_1d, FieldComponent, SpectralData};

type Check = (&'static str, fn() -> Result<(f64, f64)>);

/// (value, threshold) pairs; a check passes when value <= threshold.
const CHECKS: &[Check] = &[
    ("constant_speed_discriminant", constant_discriminant),
    ("abel_damped_mode", abel),
    ("estimator_unit_constants", estimator),
    ("liouville_identity", liouville),
    ("fft_parseval_roundtrip", parseval),
    ("fit_exactness", fit),
];

fn constant_discriminant() -> Result<(f64, f64)> {
    let p = HillProblem::new(Equation::free(), Some(2.0 * std::f64::consts::PI))?;
    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let s = sample(&p, 0.37 * k as f64)?;
        worst = worst.max(s.excess());
    }
    Ok((worst, 1e-8))
}

fn abel() -> Result<(f64, f64)> {
    let b = CoefficientProfile::inverse_damping(0.7)?;
    let m = fundamental_matrix(&Equation::free().with_damping(b.clone()).mode(3.0), 0.0, 20.0, 1e-11)?;
    let mu = 0.7;
    let expected = 21.0f64.powf(-2.0 * mu);
    Ok(((m.det() - expected).abs() / expected, 1e-8))
}

fn estimator() -> Result<(f64, f64)> {
    let est = estimate_alpha_beta(&CoefficientProfile::constant(0.5)?, EstimatorSettings::default())?;
    Ok(((est.alpha_hat - 1.0).abs().max((est.beta_hat - 1.0).abs()), 1e-4))
}

fn liouville() -> Result<(f64, f64)> {
    let shape = CoefficientProfile::power_shape(1.0)?;
    let c = liouville_verify(&shape, 1.0, ModeState::real(1.0, 0.0), 20.0, 1e-10)?;
    Ok((c.residual, 1e-6))
}

fn parseval() -> Result<(f64, f64)> {
    let n = 256;
    let dxi = 0.1;
    let data = SpectralData::uniform_1d(n, dxi, |x| Complex64::new((-x * x).exp(), 0.3 * x * (-x * x).exp()), |_| Complex64::new(0.0, 0.0))?;
    let states: Vec<ModeState> = data.u1_hat.iter().map(|&v| ModeState::new(v, Complex64::new(0.0, 0.0))).collect();
    let x = conjugate_grid(&data)?;
    let snap = synthesize_1d(&data, 0.0, &states, &x, FieldComponent::U)?;
    let back = analyze_1d(&data, &snap)?;
    let dx = x[1] - x[0];
    let roundtrip = back
        .iter()
        .zip(&data.u1_hat)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let lhs: f64 = snap.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
    let rhs: f64 = data.u1_hat.iter().map(|v| v.norm_sqr()).sum::<f64>() * dxi / (2.0 * std::f64::consts::PI);
    Ok((roundtrip.max((lhs - rhs).abs() / rhs), 1e-12))
}

fn fit() -> Result<(f64, f64)> {
    let xs: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.75 * x).collect();
    let f = ols_fit(&xs, &ys)?;
    Ok(((f.slope + 0.75).abs().max((f.r_squared - 1.0).abs()), 1e-12))
}

/// Runs the internal checks, printing one line each; true when all pass.
pub fn selftest() -> bool {
    let mut all = true;
    for (name, f) in CHECKS {
        match f() {
            Ok((v, thr)) => {
                let pass = v <= thr;
                all &= pass;
                println!("{} {name:<30} {v:.3e} <= {thr:.0e}", if pass { "PASS" } else { "FAIL" });
            }
            Err(e) => {
                all = false;
                println!("FAIL {name:<30} error: {e}");
            }
        }
    }
    all
}
