//! Energies of a Gaussian wave packet through Plancherel sums over a mode ensemble.
//!
//!     cargo run --release --example energy_traces

use wavelab::coeffs::{geometric_grid, CoefficientProfile};
use wavelab::modeode::Equation;
use wavelab::spectral::{evolve, plancherel_energy, write_traces_csv, FrequencyGrid, GaussianData, GridSpec, SpectralData, TraceKind};

fn main() -> wavelab::error::Result<()> {
    let grid = FrequencyGrid::new(GridSpec::Geometric {
        rho_min: 1e-3,
        rho_max: 8.0,
        count: 48,
        cluster: true,
    })?;
    let data = SpectralData::gaussian(3, &grid, GaussianData { width: 1.0, amp_u1: 1.0, amp_u2: 0.0 })?;
    let mut times = vec![0.0];
    times.extend(geometric_grid(1.0, 1e3, 31));

    let speed = CoefficientProfile::log_sine(2.0, 1.0)?;
    let ev = evolve(&data, &Equation::new(speed.clone()), &times, 1e-10)?;
    let plain = plancherel_energy(&data, &ev.trajectories, Some(&speed), TraceKind::Plain)?;
    let adapted = plancherel_energy(&data, &ev.trajectories, Some(&speed), TraceKind::Adapted)?;
    for (k, t) in times.iter().enumerate().step_by(5) {
        println!("t = {t:>8.2}  E = {:.6}  E_a = {:.6}", plain.values[k], adapted.values[k]);
    }
    let path = std::env::temp_dir().join("wavelab_energy.csv");
    write_traces_csv(&path, &[&plain, &adapted])?;
    println!("wrote {}", path.display());
    Ok(())
}
