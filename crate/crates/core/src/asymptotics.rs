//! Diffusion comparisons, the diffusion constants (α, β) and the Liouville transform.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::{invert_shape_primitive, shape_primitive, CoefficientProfile, Family};
use crate::error::{Error, Result};
use crate::modeode::{fundamental_matrix, integrate_mode, Equation, ModeParams, ModeState, ModeTrajectory};
use crate::spectral::{EnergyTrace, SpectralData, TraceKind};

/// Heat profile ŵ(t) = (û₁ + β·û₂)·exp(−α·λ·t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatSurrogate {
    pub alpha: f64,
    pub beta: f64,
}

impl HeatSurrogate {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::invalid(format!("heat surrogate needs alpha > 0, got ({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    /// Constants for 2b ≡ 1.
    pub fn unit() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }

    pub fn mode(&self, u1: Complex64, u2: Complex64, lambda_spec: f64, t: f64) -> Complex64 {
        (u1 + self.beta * u2) * (-self.alpha * lambda_spec * t).exp()
    }
}

/// ‖u − w‖_{L²}(t), optionally also subtracting e^{−t/2}·v with v a free wave.
pub fn diffusion_deficit(
    data: &SpectralData,
    damped: &[ModeTrajectory],
    surrogate: &HeatSurrogate,
    free_wave: Option<&[ModeTrajectory]>,
) -> Result<EnergyTrace> {
    if damped.len() != data.len() || free_wave.is_some_and(|f| f.len() != data.len()) {
        return Err(Error::GridMismatch("trajectory count differs from node count".into()));
    }
    let times = damped.first().map(|t| t.times.clone()).unwrap_or_default();
    if damped.iter().chain(free_wave.unwrap_or(&[])).any(|t| t.times != times) {
        return Err(Error::GridMismatch("trajectories do not share output times".into()));
    }
    let values = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut s = 0.0;
            for i in 0..data.len() {
                let l = data.nodes[i] * data.nodes[i];
                let mut d = damped[i].states[k].v - surrogate.mode(data.u1_hat[i], data.u2_hat[i], l, t);
                if let Some(f) = free_wave {
                    d -= (-0.5 * t).exp() * f[i].states[k].v;
                }
                s += data.weights[i] * d.norm_sqr();
            }
            s.sqrt()
        })
        .collect();
    EnergyTrace::new(times, values, TraceKind::Deficit)
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaBetaDiagnostics {
    pub period: f64,
    pub lambdas: Vec<f64>,
    /// −ln(μ_slow)/(λT) per ladder entry.
    pub alpha_samples: Vec<f64>,
    pub beta_samples: Vec<f64>,
    /// Richardson columns, first column being the samples.
    pub alpha_table: Vec<Vec<f64>>,
    pub beta_table: Vec<Vec<f64>>,
    /// Difference between the last two fully extrapolated entries.
    pub alpha_residual: f64,
    pub beta_residual: f64,
    pub shrinks: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaBetaEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub diagnostics: AlphaBetaDiagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct EstimatorSettings {
    pub lambda0: f64,
    /// Ladder is λ_k = 4^{−k}λ₀, k = 0..=levels.
    pub levels: usize,
    pub tol: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            lambda0: 0.05,
            levels: 6,
            tol: 1e-12,
        }
    }
}

fn richardson(samples: &[f64]) -> Vec<Vec<f64>> {
    let mut table = vec![samples.to_vec()];
    for order in 1..=2 {
        let prev = &table[order - 1];
        let f = 4f64.powi(order as i32);
        let col = prev.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
        table.push(col);
    }
    table
}

fn slow_mode(damping: &CoefficientProfile, period: f64, lambda: f64, tol: f64) -> Result<Option<(f64, f64)>> {
    let params = ModeParams::new(lambda, CoefficientProfile::constant(1.0)?).with_damping(damping.clone());
    let m = fundamental_matrix(&params, 0.0, period, tol)?;
    let [big, small] = m.eigenvalues();
    if big.im != 0.0 || (big.re - small.re).abs() < 0.1 * big.re.abs() {
        return Ok(None);
    }
    let mu = big.re;
    let e = m.entries;
    let alpha = -(mu - 1.0).ln_1p() / (lambda * period);
    // Left slow eigenvector (μ − M₂₂, M₁₂) applied to (û₁, û₂).
    let beta = e[0][1] / (mu - e[1][1]);
    Ok(Some((alpha, beta)))
}

/// Small-λ Floquet extrapolation of the diffusion constants of a periodic
/// (or constant) damping; constants use period 1.
pub fn estimate_alpha_beta(damping: &CoefficientProfile, settings: EstimatorSettings) -> Result<AlphaBetaEstimate> {
    let period = match (damping.period(), damping.is_constant()) {
        (Some(p), _) => p,
        (None, true) => 1.0,
        _ => return Err(Error::Precondition(format!("{} is not periodic", damping.name()))),
    };
    if let Family::Constant { value } = damping.family() {
        if !(*value > 0.0) {
            return Err(Error::Precondition("damping must be positive".into()));
        }
    }
    if settings.levels < 2 || !(settings.lambda0 > 0.0) {
        return Err(Error::invalid("estimator needs lambda0 > 0 and at least 2 levels"));
    }
    let mut lambda0 = settings.lambda0;
    for shrinks in 0..12 {
        let lambdas: Vec<f64> = (0..=settings.levels).map(|k| lambda0 * 4f64.powi(-(k as i32))).collect();
        let modes = lambdas
            .par_iter()
            .map(|&l| slow_mode(damping, period, l, settings.tol))
            .collect::<Result<Vec<_>>>()?;
        if modes.iter().any(|m| m.is_none()) {
            lambda0 /= 4.0;
            continue;
        }
        let (alpha_samples, beta_samples): (Vec<f64>, Vec<f64>) = modes.into_iter().flatten().unzip();
        let alpha_table = richardson(&alpha_samples);
        let beta_table = richardson(&beta_samples);
        let last = |t: &Vec<Vec<f64>>| {
            let c = &t[2];
            (c[c.len() - 1], (c[c.len() - 1] - c[c.len() - 2]).abs())
        };
        let (alpha_hat, alpha_residual) = last(&alpha_table);
        let (beta_hat, beta_residual) = last(&beta_table);
        if !(alpha_hat > 0.0) || !beta_hat.is_finite() {
            return Err(Error::Degenerate(format!("estimated alpha {alpha_hat} is not positive")));
        }
        return Ok(AlphaBetaEstimate {
            alpha_hat,
            beta_hat,
            diagnostics: AlphaBetaDiagnostics {
                period,
                lambdas,
                alpha_samples,
                beta_samples,
                alpha_table,
                beta_table,
                alpha_residual,
                beta_residual,
                shrinks,
            },
        });
    }
    Err(Error::Degenerate("slow and fast Floquet multipliers stay degenerate on the ladder".into()))
}

/// t = Λ(s) relating an increasing-speed problem to a damped one.
#[derive(Debug, Clone)]
pub struct LiouvilleMap {
    pub shape: CoefficientProfile,
}

impl LiouvilleMap {
    pub fn new(shape: CoefficientProfile) -> Result<Self> {
        shape_primitive(&shape, 0.0)?;
        Ok(Self { shape })
    }

    pub fn primitive(&self, s: f64) -> Result<f64> {
        shape_primitive(&self.shape, s)
    }

    pub fn inverse(&self, t: f64) -> Result<f64> {
        invert_shape_primitive(&self.shape, t)
    }

    /// 2b(t) = λ′(s)/λ²(s) with s = Λ⁻¹(t), defined for t ≥ Λ(0).
    pub fn damping(&self) -> Result<CoefficientProfile> {
        CoefficientProfile::liouville_damping(self.shape.clone())
    }
}

pub fn liouville_damping(shape: &CoefficientProfile) -> Result<CoefficientProfile> {
    LiouvilleMap::new(shape.clone())?.damping()
}

#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleCheck {
    pub residual: f64,
    /// Speed-problem time at the end of the horizon.
    pub s_end: f64,
    pub samples: usize,
}

/// Integrates the speed problem in s and the damped problem in t = Λ(s), and
/// returns the largest state mismatch relative to the largest state norm.
pub fn liouville_verify(
    shape: &CoefficientProfile,
    lambda_spec: f64,
    init: ModeState,
    horizon: f64,
    tol: f64,
) -> Result<LiouvilleCheck> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let map = LiouvilleMap::new(shape.clone())?;
    let t0 = map.primitive(0.0)?;
    let s_end = map.inverse(t0 + horizon)?;
    let samples = 200;
    let s_grid: Vec<f64> = (0..=samples).map(|k| s_end * k as f64 / samples as f64).collect();
    let t_grid = s_grid.iter().map(|&s| map.primitive(s)).collect::<Result<Vec<_>>>()?;
    let speed_route = integrate_mode(&Equation::new(shape.clone()).mode(lambda_spec), init, &s_grid, tol)?;
    let damped = Equation::free().with_damping(map.damping()?).mode(lambda_spec);
    let damped_route = integrate_mode(&damped, init, &t_grid, tol)?;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (k, &s) in s_grid.iter().enumerate() {
        let v = speed_route.states[k];
        let u = damped_route.states[k];
        let lam = shape.eval(s, 0)?;
        let mapped_dot = v.v_dot / lam;
        diff = diff.max(((u.v - v.v).norm_sqr() + (u.v_dot - mapped_dot).norm_sqr()).sqrt());
        scale = scale.max((u.v.norm_sqr() + u.v_dot.norm_sqr()).sqrt());
    }
    Ok(LiouvilleCheck {
        residual: if scale > 0.0 { diff / scale } else { diff },
        s_end,
        samples: samples + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_damping_constants() {
        let b = CoefficientProfile::constant(0.5).unwrap();
        let est = estimate_alpha_beta(&b, EstimatorSettings::default()).unwrap();
        assert!((est.alpha_hat - 1.0).abs() < 1e-3, "{}", est.alpha_hat);
        assert!((est.beta_hat - 1.0).abs() < 1e-3, "{}", est.beta_hat);
    }

    #[test]
    fn constant_damping_alpha() {
        for c in [0.25, 1.0, 2.0] {
            let b = CoefficientProfile::constant(c).unwrap();
            let est = estimate_alpha_beta(&b, EstimatorSettings::default()).unwrap();
            assert!((est.alpha_hat - 1.0 / (2.0 * c)).abs() < 1e-4, "{c}: {}", est.alpha_hat);
            assert!((est.beta_hat - 1.0 / (2.0 * c)).abs() < 1e-4, "{c}: {}", est.beta_hat);
        }
    }

    #[test]
    fn liouville_identity_and_power() {
        let one = CoefficientProfile::constant(1.0).unwrap();
        let r = liouville_verify(&one, 1.0, ModeState::real(1.0, 0.0), 50.0, 1e-10).unwrap();
        assert!(r.residual <= 1e-9, "{}", r.residual);
        let b = liouville_damping(&CoefficientProfile::power_shape(1.0).unwrap()).unwrap();
        let t = 1e4;
        assert!((2.0 * b.value(t).unwrap() * (1.0 + t) - 0.5).abs() <= 0.05);
        assert_eq!(liouville_damping(&one).unwrap().value(5.0).unwrap(), 0.0);
    }

    #[test]
    fn deficit_zero_frequency() {
        let data = SpectralData {
            dimension: 3,
            nodes: vec![0.0],
            weights: vec![1.0],
            u1_hat: vec![Complex64::new(0.0, 0.0)],
            u2_hat: vec![Complex64::new(1.0, 0.0)],
            signed: false,
            length_scale: 1.0,
            coarse: None,
        };
        let times = vec![0.0, 1.0, 5.0];
        let eq = Equation::free().with_damping(CoefficientProfile::constant(0.5).unwrap());
        let tr = integrate_mode(&eq.mode(0.0), ModeState::real(0.0, 1.0), &times, 1e-12).unwrap();
        let d = diffusion_deficit(&data, &[tr], &HeatSurrogate::unit(), None).unwrap();
        for (t, v) in d.times.iter().zip(&d.values) {
            assert!((v - (-t).exp()).abs() < 1e-9);
        }
    }
}
