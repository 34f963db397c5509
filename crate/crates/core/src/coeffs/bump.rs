//! The smooth bump ψ(s) = κ·exp(−1/(s(1−s))) on (0, 1), normalized to ∫ψ = 1/2.

use crate::error::Result;
use crate::quad;

/// Normalization so that ∫₀¹ ψ = 1/2. Frozen from a 30-digit quadrature of
/// ∫₀¹ exp(−1/(s(1−s))) ds = 0.00702985840660965623924…; the test suite
/// re-derives it independently.
pub const KAPPA: f64 = 71.125_187_888_5;

/// Highest derivative order with a closed-form expression.
pub const MAX_ORDER: usize = 4;

// e^{-700} is already below f64 resolution for any product we form.
const EXPONENT_CUTOFF: f64 = -700.0;

/// Value and derivatives ψ^{(0..=k)}(s) for k ≤ 4. Zero outside (0, 1).
pub fn derivatives(s: f64) -> [f64; MAX_ORDER + 1] {
    let mut out = [0.0; MAX_ORDER + 1];
    if !(s > 0.0 && s < 1.0) {
        return out;
    }
    let r = 1.0 - s;
    let g = -1.0 / s - 1.0 / r;
    if g < EXPONENT_CUTOFF {
        return out;
    }
    let psi = KAPPA * g.exp();
    // g^{(j)} = −(−1)^j j! s^{−j−1} − j! (1−s)^{−j−1}
    let mut gd = [0.0; MAX_ORDER + 1];
    let mut fact = 1.0;
    for (j, slot) in gd.iter_mut().enumerate().skip(1) {
        fact *= j as f64;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *slot = -sign * fact * s.powi(-(j as i32) - 1) - fact * r.powi(-(j as i32) - 1);
    }
    let (g1, g2, g3, g4) = (gd[1], gd[2], gd[3], gd[4]);
    out[0] = psi;
    out[1] = psi * g1;
    out[2] = psi * (g1 * g1 + g2);
    out[3] = psi * (g1 * g1 * g1 + 3.0 * g1 * g2 + g3);
    out[4] = psi * (g1.powi(4) + 6.0 * g1 * g1 * g2 + 3.0 * g2 * g2 + 4.0 * g1 * g3 + g4);
    out
}

pub fn value(s: f64) -> f64 {
    derivatives(s)[0]
}

/// Partial integral ∫₀^s ψ, with the exact value 1/2 for s ≥ 1.
pub fn partial_integral(s: f64) -> Result<f64> {
    if s <= 0.0 {
        return Ok(0.0);
    }
    if s >= 1.0 {
        return Ok(0.5);
    }
    // Symmetry ψ(s) = ψ(1−s) keeps the quadrature on the short side.
    if s > 0.5 {
        return Ok(0.5 - quad::integrate(value, 0.0, 1.0 - s, 1e-14)?.value);
    }
    Ok(quad::integrate(value, 0.0, s, 1e-14)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_oracle() {
        // Independent route: composite Simpson on a fine grid of the bare bump.
        let n = 20_000;
        let h = 1.0 / n as f64;
        let bare = |s: f64| if s <= 0.0 || s >= 1.0 { 0.0 } else { (-1.0 / (s * (1.0 - s))).exp() };
        let mut acc = bare(0.0) + bare(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * bare(i as f64 * h);
        }
        let integral = acc * h / 3.0;
        let kappa = 0.5 / integral;
        assert!((kappa - KAPPA).abs() / KAPPA < 1e-11, "{kappa}");
        assert!((partial_integral(0.999_999).unwrap() - 0.5).abs() < 1e-12);
        assert!((partial_integral(0.5).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for &s in &[0.2, 0.35, 0.5, 0.71, 0.83] {
            let d = derivatives(s);
            for k in 0..MAX_ORDER {
                let fd = (derivatives(s + h)[k] - derivatives(s - h)[k]) / (2.0 * h);
                let scale = d[k + 1].abs().max(1.0);
                assert!((fd - d[k + 1]).abs() / scale < 1e-5, "s={s} k={k}: {fd} vs {}", d[k + 1]);
            }
        }
    }

    #[test]
    fn vanishes_outside_support() {
        assert_eq!(derivatives(0.0), [0.0; 5]);
        assert_eq!(derivatives(1.0), [0.0; 5]);
        assert_eq!(derivatives(-0.3), [0.0; 5]);
        assert_eq!(value(1e-4), 0.0);
    }
}
