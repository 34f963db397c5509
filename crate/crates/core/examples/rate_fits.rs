//! Predicted decay exponents, log-log fits in the matching clock, and the scattering limit.
//!
//!     cargo run --release --example rate_fits

use wavelab::coeffs::{geometric_grid, CoefficientProfile};
use wavelab::modeode::Equation;
use wavelab::rates::{predict, scattering_limit, verify, ClockFunction, PredictionContext, TheoremId};
use wavelab::spectral::{evolve, plancherel_energy, FrequencyGrid, GaussianData, GridSpec, SpectralData, TraceKind};

fn main() -> wavelab::error::Result<()> {
    let b = CoefficientProfile::inverse_damping(0.3)?;
    let grid = FrequencyGrid::new(GridSpec::Geometric {
        rho_min: 1e-3,
        rho_max: 8.0,
        count: 48,
        cluster: true,
    })?;
    let data = SpectralData::gaussian(3, &grid, GaussianData { width: 1.0, amp_u1: 1.0, amp_u2: 0.0 })?;
    let mut times = vec![0.0];
    times.extend(geometric_grid(1.0, 1e4, 121));
    let ev = evolve(&data, &Equation::free().with_damping(b.clone()), &times, 1e-10)?;
    let energy = plancherel_energy(&data, &ev.trajectories, None, TraceKind::Plain)?;

    let ctx = PredictionContext {
        damping: Some(b.clone()),
        shape: None,
    };
    let pred = predict(TheoremId::WirthNoneffective, 3, 2.0, 2.0, 0, 0, &ctx)?;
    let rec = verify(&energy, &pred, 0.05, None)?;
    println!(
        "{}: predicted {:.4}, fitted {:.4} on [{}, {}], r² {:.5}, pass {}",
        rec.theorem_id.as_str(),
        rec.predicted,
        rec.fitted,
        rec.window.0,
        rec.window.1,
        rec.r2,
        rec.pass
    );
    let s = scattering_limit(&energy, &ClockFunction::damping_exponential(Some(b)))?;
    println!("β²E → {:.5} (variation {:.2e} over the last decade)", s.limit_estimate, s.relative_variation);
    Ok(())
}
