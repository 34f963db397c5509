//! The single-mode equation v″ + 2b(t)v′ + (a²(t)λ + m²(t))v = 0.
//!
//! Every integration advances the full fundamental pair (data (1,0) and
//! (0,1) at the start time). Trajectories for given data are then a 2×2
//! product, so they are exactly linear in the data and share one step
//! sequence, which keeps them deterministic.

pub mod dopri;

use num_complex::Complex64;
use serde::Serialize;

use crate::coeffs::CoefficientProfile;
use crate::error::{Error, Result};

pub use dopri::Stats;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-4;

/// Coefficients of one mode equation.
#[derive(Debug, Clone)]
pub struct ModeParams {
    pub lambda_spec: f64,
    pub speed: CoefficientProfile,
    pub damping: Option<CoefficientProfile>,
    pub mass: Option<CoefficientProfile>,
}

impl ModeParams {
    pub fn new(lambda_spec: f64, speed: CoefficientProfile) -> Self {
        Self {
            lambda_spec,
            speed,
            damping: None,
            mass: None,
        }
    }

    pub fn with_damping(mut self, b: CoefficientProfile) -> Self {
        self.damping = Some(b);
        self
    }

    pub fn with_mass(mut self, m: CoefficientProfile) -> Self {
        self.mass = Some(m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_spec >= 0.0 && self.lambda_spec.is_finite()) {
            return Err(Error::invalid(format!("lambda_spec must be finite and >= 0, got {}", self.lambda_spec)));
        }
        Ok(())
    }

    /// Earliest time where all coefficients are defined.
    pub fn domain_start(&self) -> f64 {
        let mut t = self.speed.domain_start();
        for p in self.damping.iter().chain(self.mass.iter()) {
            t = t.max(p.domain_start());
        }
        t
    }

    fn rhs(&self, t: f64, y: &[f64; 4]) -> Result<[f64; 4]> {
        let a = self.speed.eval(t, 0)?;
        let b2 = match &self.damping {
            Some(b) => 2.0 * b.eval(t, 0)?,
            None => 0.0,
        };
        let m2 = match &self.mass {
            Some(m) => m.eval(t, 0)?.powi(2),
            None => 0.0,
        };
        let k = a * a * self.lambda_spec + m2;
        Ok([y[1], -b2 * y[1] - k * y[0], y[3], -b2 * y[3] - k * y[2]])
    }

    /// Step cap 0.1/(1 + a_max√λ), with a_max bounded over the next unit of time.
    fn step_cap(&self, t: f64) -> Result<f64> {
        let a_max = self.speed.sup_abs_on(t, t + 1.0)?;
        Ok((0.1 / (1.0 + a_max * self.lambda_spec.sqrt())).min(1.0))
    }

    /// ∫_{t0}^{t1} b.
    pub fn damping_integral(&self, t0: f64, t1: f64) -> Result<f64> {
        match &self.damping {
            Some(b) => Ok(b.integral(t1)? - b.integral(t0)?),
            None => Ok(0.0),
        }
    }
}

/// The coefficient triple shared by all modes of one problem.
#[derive(Debug, Clone)]
pub struct Equation {
    pub speed: CoefficientProfile,
    pub damping: Option<CoefficientProfile>,
    pub mass: Option<CoefficientProfile>,
}

impl Equation {
    pub fn new(speed: CoefficientProfile) -> Self {
        Self {
            speed,
            damping: None,
            mass: None,
        }
    }

    pub fn free() -> Self {
        Self::new(CoefficientProfile::constant(1.0).expect("unit speed"))
    }

    pub fn with_damping(mut self, b: CoefficientProfile) -> Self {
        self.damping = Some(b);
        self
    }

    pub fn with_mass(mut self, m: CoefficientProfile) -> Self {
        self.mass = Some(m);
        self
    }

    pub fn mode(&self, lambda_spec: f64) -> ModeParams {
        ModeParams {
            lambda_spec,
            speed: self.speed.clone(),
            damping: self.damping.clone(),
            mass: self.mass.clone(),
        }
    }
}

/// (v, v′) for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeState {
    pub v: Complex64,
    pub v_dot: Complex64,
}

impl ModeState {
    pub fn new(v: Complex64, v_dot: Complex64) -> Self {
        Self { v, v_dot }
    }

    pub fn real(v: f64, v_dot: f64) -> Self {
        Self::new(Complex64::new(v, 0.0), Complex64::new(v_dot, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.v_dot.is_finite()
    }
}

/// X(t₁; t₀), mapping (v, v′) at t₀ to t₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalMatrix {
    pub entries: [[f64; 2]; 2],
}

impl FundamentalMatrix {
    pub fn identity() -> Self {
        Self {
            entries: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn det(&self) -> f64 {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn apply(&self, s: &ModeState) -> ModeState {
        let e = &self.entries;
        ModeState {
            v: s.v * e[0][0] + s.v_dot * e[0][1],
            v_dot: s.v * e[1][0] + s.v_dot * e[1][1],
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (a, b) = (&self.entries, &other.entries);
        let mut e = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                e[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { entries: e }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Eigenvalues as complex numbers.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let tr = self.trace();
        let det = self.det();
        let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
        // Stable pairing: compute the larger-modulus root first.
        let half = 0.5 * tr;
        let big = if tr >= 0.0 {
            Complex64::new(half, 0.0) + 0.5 * disc
        } else {
            Complex64::new(half, 0.0) - 0.5 * disc
        };
        let small = if big.norm() > 0.0 { Complex64::new(det, 0.0) / big } else { Complex64::new(0.0, 0.0) };
        [big, small]
    }

    fn from_state(y: &[f64; 4], scale: i32) -> Self {
        let s = (scale as f64).exp2();
        Self {
            entries: [[y[0] * s, y[2] * s], [y[1] * s, y[3] * s]],
        }
    }
}

/// Samples of one mode at the requested times.
#[derive(Debug, Clone, Serialize)]
pub struct ModeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModeState>,
    pub tol_used: f64,
    #[serde(skip)]
    pub stats: Stats,
}

fn check_tol(tol: f64) -> Result<()> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::invalid(format!("tolerance {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]")));
    }
    Ok(())
}

fn check_times(times: &[f64], t0_min: f64) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("no output times"));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("output times must be finite and strictly increasing"));
    }
    if times[0] < t0_min {
        return Err(Error::Domain {
            t: times[0],
            reason: format!("coefficients are defined for t >= {t0_min}"),
        });
    }
    Ok(())
}

/// Fundamental matrices X(t_k; t_0) at every output time, t_0 = times[0].
pub fn fundamental_path(params: &ModeParams, times: &[f64], tol: f64) -> Result<(Vec<FundamentalMatrix>, Stats)> {
    params.validate()?;
    check_tol(tol)?;
    check_times(times, params.domain_start())?;
    let mut out = vec![FundamentalMatrix::identity(); times.len()];
    let stats = dopri::integrate(
        |t, y| params.rhs(t, y),
        |t| params.step_cap(t),
        times[0],
        [1.0, 0.0, 0.0, 1.0],
        times,
        dopri::Settings { tol, ..Default::default() },
        |i, y, s| out[i] = FundamentalMatrix::from_state(y, s),
    )?;
    Ok((out, stats))
}

/// Integrates one mode from `init` at `output_times[0]`.
pub fn integrate_mode(params: &ModeParams, init: ModeState, output_times: &[f64], tol: f64) -> Result<ModeTrajectory> {
    if !init.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }
    let (path, stats) = fundamental_path(params, output_times, tol)?;
    Ok(ModeTrajectory {
        times: output_times.to_vec(),
        states: path.iter().map(|x| x.apply(&init)).collect(),
        tol_used: tol,
        stats,
    })
}

/// X(t1; t0).
pub fn fundamental_matrix(params: &ModeParams, t0: f64, t1: f64, tol: f64) -> Result<FundamentalMatrix> {
    if !(t1 > t0) {
        return Err(Error::invalid("fundamental_matrix needs t1 > t0"));
    }
    Ok(fundamental_path(params, &[t0, t1], tol)?.0[1])
}

/// Fixed-step 5th-order integration of the fundamental pair (order studies).
pub fn fundamental_matrix_fixed(params: &ModeParams, t0: f64, t1: f64, steps: usize) -> Result<FundamentalMatrix> {
    params.validate()?;
    let y = dopri::integrate_fixed(|t, y| params.rhs(t, y), t0, t1, [1.0, 0.0, 0.0, 1.0], steps)?;
    Ok(FundamentalMatrix::from_state(&y, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyWeight {
    Plain,
    Adapted,
}

/// ½(λ|v|² + |v′|²), or ½(a²λ|v|² + |v′|²) for the adapted weight.
pub fn mode_energy(state: &ModeState, lambda_spec: f64, a_value: f64, weight: EnergyWeight) -> f64 {
    let w = match weight {
        EnergyWeight::Plain => 1.0,
        EnergyWeight::Adapted => a_value * a_value,
    };
    0.5 * (w * lambda_spec * state.v.norm_sqr() + state.v_dot.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> CoefficientProfile {
        CoefficientProfile::constant(1.0).unwrap()
    }

    #[test]
    fn harmonic_oscillator() {
        let p = ModeParams::new(4.0, unit());
        let tr = integrate_mode(&p, ModeState::real(1.0, 0.0), &[0.0, PI], 1e-10).unwrap();
        assert!((tr.states[1].v.re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn damped_zero_frequency() {
        let p = ModeParams::new(0.0, unit()).with_damping(CoefficientProfile::constant(0.5).unwrap());
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let (u1, u2) = (0.7, -1.3);
        let tr = integrate_mode(&p, ModeState::real(u1, u2), &times, 1e-11).unwrap();
        for (t, s) in times.iter().zip(&tr.states) {
            assert!((s.v.re - (u1 + u2 * (1.0 - (-t).exp()))).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_speed_closed_form_and_abel() {
        let (c, lam, t) = (1.7, 2.3, 5.0);
        let p = ModeParams::new(lam, CoefficientProfile::constant(c).unwrap());
        let x = fundamental_matrix(&p, 0.0, t, 1e-11).unwrap();
        let w = c * lam.sqrt();
        let exact = [[(w * t).cos(), (w * t).sin() / w], [-w * (w * t).sin(), (w * t).cos()]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((x.entries[i][j] - exact[i][j]).abs() < 1e-8);
            }
        }
        assert!((x.det() - 1.0).abs() < 1e-9);
        let d = ModeParams::new(1.0, unit()).with_damping(CoefficientProfile::constant(0.5).unwrap());
        let x = fundamental_matrix(&d, 0.0, 1.0, 1e-11).unwrap();
        assert!((x.det() - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn energies() {
        assert_eq!(mode_energy(&ModeState::real(1.0, 0.0), 4.0, 1.0, EnergyWeight::Plain), 2.0);
        assert_eq!(mode_energy(&ModeState::real(0.0, 3.0), 7.0, 1.0, EnergyWeight::Plain), 4.5);
        assert_eq!(mode_energy(&ModeState::real(1.0, 0.0), 1.0, 2.0, EnergyWeight::Adapted), 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        let p = ModeParams::new(1.0, unit());
        assert!(integrate_mode(&p, ModeState::real(1.0, 0.0), &[0.0, 1.0], 1e-3).is_err());
        assert!(integrate_mode(&p, ModeState::real(1.0, 0.0), &[1.0, 0.5], 1e-8).is_err());
        assert!(ModeParams::new(-1.0, unit()).validate().is_err());
    }
}
