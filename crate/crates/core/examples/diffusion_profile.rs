//! Diffusion constants (α, β) from small-λ Floquet data, and the deficit u - w against
//! the heat profile w_t = αΔw, w(0) = u1 + βu2.
//!
//!     cargo run --release --example diffusion_profile

use std::f64::consts::PI;

use wavelab::asymptotics::{diffusion_deficit, estimate_alpha_beta, EstimatorSettings, HeatSurrogate};
use wavelab::coeffs::{geometric_grid, CoefficientProfile};
use wavelab::modeode::Equation;
use wavelab::rates::{fit_power_decay, ClockFunction};
use wavelab::spectral::{evolve, l2_norm_trace, FrequencyGrid, GaussianData, GridSpec, SpectralData, TraceKind};

fn main() -> wavelab::error::Result<()> {
    let b = CoefficientProfile::periodic_damping(0.5, 0.3, 2.0 * PI)?;
    let est = estimate_alpha_beta(&b, EstimatorSettings::default())?;
    println!("α̂ = {:.8}, β̂ = {:.8}", est.alpha_hat, est.beta_hat);

    let grid = FrequencyGrid::new(GridSpec::Geometric {
        rho_min: 1e-3,
        rho_max: 8.0,
        count: 48,
        cluster: true,
    })?;
    let data = SpectralData::gaussian(3, &grid, GaussianData { width: 1.0, amp_u1: 1.0, amp_u2: 1.0 })?;
    let mut times = vec![0.0];
    times.extend(geometric_grid(1.0, 1e4, 121));
    let ev = evolve(&data, &Equation::free().with_damping(b), &times, 1e-10)?;
    let norm = l2_norm_trace(&data, &ev.trajectories, TraceKind::NormU)?;
    let clock = ClockFunction::poly();
    let du = fit_power_decay(&norm, &clock, None)?.exponent;
    for factor in [1.0, 1.2] {
        let w = HeatSurrogate::new(factor * est.alpha_hat, est.beta_hat)?;
        let deficit = diffusion_deficit(&data, &ev.trajectories, &w, None)?;
        let dd = fit_power_decay(&deficit, &clock, None)?.exponent;
        println!("α × {factor}: |u| exponent {du:.4}, |u - w| exponent {dd:.4}, gain {:.4}", dd - du);
    }
    Ok(())
}
