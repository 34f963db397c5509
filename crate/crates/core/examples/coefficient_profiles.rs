//! Coefficient families, their derivatives, and the condition checkers.
//!
//!     cargo run --example coefficient_profiles

use wavelab::coeffs::{classify_dissipation, geometric_grid, stabilisation_measure, CoefficientProfile};

fn main() -> wavelab::error::Result<()> {
    let a = CoefficientProfile::log_sine(2.0, 1.0)?;
    println!("{:>10} {:>12} {:>12} {:>12}", "t", "a", "a'", "a''");
    for t in [0.0, 1.0, 10.0, 100.0, 1000.0] {
        println!("{t:>10} {:>12.6} {:>12.3e} {:>12.3e}", a.eval(t, 0)?, a.eval(t, 1)?, a.eval(t, 2)?);
    }

    let grid = geometric_grid(1.0, 1e4, 161);
    for b in [
        CoefficientProfile::inverse_damping(0.3)?,
        CoefficientProfile::inverse_damping(2.0)?,
        CoefficientProfile::power_damping(0.5)?,
    ] {
        let (class, rep) = classify_dissipation(&b, &grid)?;
        println!("{:<16} t·b(1e4) = {:>8.3}  -> {class:?}", b.name(), rep.samples.last().unwrap());
    }

    let sp = CoefficientProfile::sine_power(2.0, 1.0, 0.5)?;
    let rep = stabilisation_measure(&sp, 2.0, None, &grid)?;
    println!("stabilisation exponent of {}: {:.4}", sp.name(), rep.fitted_exponent.unwrap_or(f64::NAN));
    Ok(())
}
