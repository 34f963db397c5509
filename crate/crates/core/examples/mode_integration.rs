//! One Fourier mode of a damped wave equation, and the Abel identity det X(t) = exp(-2∫b).
//!
//!     cargo run --example mode_integration

use wavelab::coeffs::CoefficientProfile;
use wavelab::modeode::{fundamental_matrix, integrate_mode, Equation, ModeState};

fn main() -> wavelab::error::Result<()> {
    let b = CoefficientProfile::inverse_damping(0.3)?;
    let eq = Equation::free().with_damping(b.clone());
    let lambda = 4.0;
    let times: Vec<f64> = (0..=10).map(|k| 10.0 * k as f64).collect();
    let tr = integrate_mode(&eq.mode(lambda), ModeState::real(1.0, 0.0), &times, 1e-10)?;
    println!("{:>6} {:>14} {:>14}", "t", "v", "v'");
    for (t, s) in tr.times.iter().zip(&tr.states) {
        println!("{t:>6} {:>14.6e} {:>14.6e}", s.v.re, s.v_dot.re);
    }
    println!("{} accepted steps, {} rejected", tr.stats.accepted, tr.stats.rejected);

    let x = fundamental_matrix(&eq.mode(lambda), 0.0, 100.0, 1e-11)?;
    let expected = (-2.0 * (b.primitive(100.0)? - b.primitive(0.0)?)).exp();
    println!("det X(100) = {:.12e}, exp(-2∫b) = {expected:.12e}", x.det());
    Ok(())
}
