//! Instability intervals of Hill's equation v'' + λ a(t)² v = 0 and the growth they cause.
//!
//!     cargo run --example floquet_chart

use std::f64::consts::PI;

use wavelab::coeffs::CoefficientProfile;
use wavelab::floquet::{instability_intervals, yagdjian_demo, HillProblem};
use wavelab::modeode::Equation;

fn main() -> wavelab::error::Result<()> {
    let a = CoefficientProfile::periodic_speed(1.0, 0.4, 2.0 * PI)?;
    let problem = HillProblem::new(Equation::new(a), None)?;
    let scan = instability_intervals(&problem, 5.0, 400)?;
    for iv in &scan.intervals {
        println!(
            "λ in [{:.5}, {:.5}]  peak ν = {:.5} at λ = {:.5}",
            iv.lower, iv.upper, iv.max_growth_rate, iv.peak_lambda
        );
    }
    let first = &scan.intervals[0];
    let demo = yagdjian_demo(&problem, first, 40.0 * PI, 32)?;
    println!(
        "energy growth rate {:.5} vs 2ν = {:.5}; log E/log t at 40π = {:.3}",
        demo.fitted_rate, demo.predicted_rate, demo.log_ratio
    );
    Ok(())
}
