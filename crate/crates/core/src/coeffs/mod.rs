//! Coefficient families with analytic derivatives, plus condition checkers.

pub mod bump;
mod conditions;
mod profile;

pub use conditions::{
    check_shape_admissibility, check_symbol_class, classify_dissipation, stabilisation_measure, ConditionId,
    ConditionReport, DissipationClass, SymbolWeight, Verdict,
};
pub use profile::{invert_shape_primitive, shape_primitive, CoefficientProfile, Family, PRIMITIVE_TOL};

/// A geometric grid of `n` points from `t0` to `t1` (both > 0).
pub fn geometric_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    assert!(t0 > 0.0 && t1 > t0 && n >= 2);
    let r = (t1 / t0).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| t0 * (r * i as f64).exp()).collect();
    g[n - 1] = t1;
    g
}
