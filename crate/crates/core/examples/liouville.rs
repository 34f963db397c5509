//! The Liouville change of time turning speed λ(s) into damping b(t).
//!
//!     cargo run --example liouville

use wavelab::asymptotics::{liouville_damping, liouville_verify};
use wavelab::coeffs::CoefficientProfile;
use wavelab::modeode::ModeState;

fn main() -> wavelab::error::Result<()> {
    let shape = CoefficientProfile::power_shape(1.0)?;
    let b = liouville_damping(&shape)?;
    for t in [1.0, 10.0, 100.0, 1e4] {
        println!("t = {t:>8}  2b(t)(1+t) = {:.6}", 2.0 * b.value(t)? * (1.0 + t));
    }
    for tol in [1e-6, 1e-8, 1e-10] {
        let c = liouville_verify(&shape, 1.0, ModeState::real(1.0, 0.0), 100.0, tol)?;
        println!("tol {tol:e}: two-route residual {:.3e} (s_end = {:.4})", c.residual, c.s_end);
    }
    Ok(())
}
