//! Radial synthesis of u_t in three dimensions and the t^-1 decay of its sup norm.
//!
//!     cargo run --release --example dispersive_decay

use wavelab::coeffs::geometric_grid;
use wavelab::modeode::Equation;
use wavelab::rates::ols_fit;
use wavelab::spectral::{evolve, lq_norm, synthesize_radial3d, FieldComponent, FrequencyGrid, GaussianData, GridSpec, SpectralData};

fn main() -> wavelab::error::Result<()> {
    // uniform nodes: the radial synthesis aliases beyond r = π/Δρ
    let grid = FrequencyGrid::new(GridSpec::Uniform { rho_max: 12.0, count: 481 })?;
    let data = SpectralData::gaussian(3, &grid, GaussianData { width: 1.0, amp_u1: 1.0, amp_u2: 0.0 })?;
    let mut times = vec![0.0];
    times.extend(geometric_grid(10.0, 100.0, 11));
    let ev = evolve(&data, &Equation::free(), &times, 1e-10)?;
    let (mut lt, mut ln) = (Vec::new(), Vec::new());
    for (k, &t) in times.iter().enumerate().skip(1) {
        let r: Vec<f64> = (0..=((t + 8.0) / 0.02) as usize).map(|i| 0.02 * i as f64).collect();
        let snap = synthesize_radial3d(&data, t, &ev.states_at(k), &r, FieldComponent::Ut)?;
        let sup = lq_norm(&snap, f64::INFINITY, 3)?;
        println!("t = {t:>7.2}  sup|u_t| = {sup:.6e}");
        lt.push(t.ln());
        ln.push(sup.ln());
    }
    println!("fitted exponent {:.4}", -ols_fit(&lt, &ln)?.slope);
    Ok(())
}
