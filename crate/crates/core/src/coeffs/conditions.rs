use std::collections::BTreeMap;

use serde::Serialize;

use super::profile::{shape_primitive, CoefficientProfile, Family, PRIMITIVE_TOL};
use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionId {
    SymbolClass,
    Stabilisation,
    DissipationClass,
    ShapeAdmissibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationClass {
    NonEffective,
    Effective,
    OverDamping,
    Inconclusive,
}

/// Weight functions for symbol-type derivative bounds.
#[derive(Debug, Clone)]
pub enum SymbolWeight {
    /// (1 + t)^{−k}
    InvT,
    /// (1 + t)^{−1−k}, the damping form.
    InvTDamping,
    /// λ(t)(λ(t)/Λ(t))^k
    ShapeRatio(CoefficientProfile),
    /// λ(t)Ξ(t)^{−k} with Ξ(t) = (1 + t)^p; λ ≡ 1 without a shape.
    Xi { power: f64, shape: Option<CoefficientProfile> },
}

impl SymbolWeight {
    fn weight(&self, t: f64, k: usize) -> Result<f64> {
        let k = k as i32;
        Ok(match self {
            SymbolWeight::InvT => (1.0 + t).powi(-k),
            SymbolWeight::InvTDamping => (1.0 + t).powi(-1 - k),
            SymbolWeight::ShapeRatio(shape) => {
                let l = shape.eval(t, 0)?;
                l * (l / shape_primitive(shape, t)?).powi(k)
            }
            SymbolWeight::Xi { power, shape } => {
                let l = match shape {
                    Some(s) => s.eval(t, 0)?,
                    None => 1.0,
                };
                l * (1.0 + t).powf(-power * k as f64)
            }
        })
    }
}

/// Outcome of a condition check on a finite grid.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    pub grid: Vec<f64>,
    /// Observed minimal constant per derivative order.
    pub constants: BTreeMap<usize, f64>,
    /// Where each supremum was attained.
    pub sup_location: BTreeMap<usize, f64>,
    pub fitted_exponent: Option<f64>,
    pub verdict: Verdict,
    /// The sampled quantity behind the verdict (S(t), t·b(t), ...), one per grid point.
    pub samples: Vec<f64>,
    pub note: String,
}

impl ConditionReport {
    fn new(condition_id: ConditionId, grid: &[f64]) -> Self {
        Self {
            condition_id,
            grid: grid.to_vec(),
            constants: BTreeMap::new(),
            sup_location: BTreeMap::new(),
            fitted_exponent: None,
            verdict: Verdict::Inconclusive,
            samples: Vec::new(),
            note: String::new(),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) || grid[0] < 0.0 {
        return Err(Error::invalid("grid must be strictly increasing, non-negative, len >= 2"));
    }
    Ok(())
}

/// Grid indices with t in the last decade [t_end/10, t_end].
fn last_decade(grid: &[f64]) -> Vec<usize> {
    let end = *grid.last().unwrap();
    (0..grid.len()).filter(|&i| grid[i] >= end / 10.0).collect()
}

/// Ordinary least-squares slope of ys against xs.
pub(crate) fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Observed constants C_k = sup |f^{(k)}| / weight_k over the grid.
///
/// Satisfied iff every constant is finite and the running supremum has
/// settled before the last decade; a supremum still growing there is
/// reported as inconclusive.
pub fn check_symbol_class(
    profile: &CoefficientProfile,
    weight: &SymbolWeight,
    k_max: usize,
    grid: &[f64],
) -> Result<ConditionReport> {
    check_grid(grid)?;
    if k_max > profile.max_derivative_order() {
        return Err(Error::OrderExceeded {
            order: k_max,
            max: profile.max_derivative_order(),
        });
    }
    let mut report = ConditionReport::new(ConditionId::SymbolClass, grid);
    let decade_start = grid.last().unwrap() / 10.0;
    let mut finite = true;
    let mut settled = true;
    for k in 1..=k_max {
        let mut sup = 0.0f64;
        let mut at = grid[0];
        let mut sup_before = 0.0f64;
        for &t in grid {
            let r = (profile.eval(t, k)? / weight.weight(t, k)?).abs();
            if !r.is_finite() {
                finite = false;
            }
            if r > sup || r.is_nan() {
                sup = r;
                at = t;
            }
            if t < decade_start {
                sup_before = sup;
            }
        }
        if sup > 1.05 * sup_before && sup > 1e-14 {
            settled = false;
        }
        report.constants.insert(k, sup);
        report.sup_location.insert(k, at);
    }
    report.verdict = if !finite {
        Verdict::Violated
    } else if settled {
        Verdict::Satisfied
    } else {
        Verdict::Inconclusive
    };
    if !settled {
        report.note = "supremum still growing in the last decade".into();
    }
    Ok(report)
}

/// S(t) = ∫₀ᵗ λ(s)|f(s) − limit| ds with the growth exponent fitted on the last decade.
pub fn stabilisation_measure(
    profile: &CoefficientProfile,
    limit: f64,
    shape: Option<&CoefficientProfile>,
    grid: &[f64],
) -> Result<ConditionReport> {
    check_grid(grid)?;
    let mut report = ConditionReport::new(ConditionId::Stabilisation, grid);
    let integrand = |s: f64| {
        let l = shape.map_or(1.0, |sh| sh.eval(s, 0).unwrap_or(f64::NAN));
        l * (profile.eval(s, 0).unwrap_or(f64::NAN) - limit).abs()
    };
    let start = profile.domain_start();
    let head = quad::integrate(integrand, start, grid[0].max(start), PRIMITIVE_TOL)?.value;
    let tol = PRIMITIVE_TOL / grid.len() as f64;
    let cum = quad::cumulative(integrand, grid, tol.max(1e-14))?;
    report.samples = cum.iter().map(|c| head + c).collect();
    if report.samples.iter().all(|&s| s == 0.0) {
        report.fitted_exponent = Some(f64::NEG_INFINITY);
        report.verdict = Verdict::Satisfied;
        report.note = "S vanishes identically".into();
        return Ok(report);
    }
    let idx: Vec<usize> = last_decade(grid).into_iter().filter(|&i| report.samples[i] > 0.0).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| grid[i].ln_1p()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| report.samples[i].ln()).collect();
    let (q_hat, _) = ols_slope(&xs, &ys).ok_or_else(|| Error::Degenerate("stabilisation regression window".into()))?;
    report.fitted_exponent = Some(q_hat);
    report.verdict = if q_hat < 0.9 {
        Verdict::Satisfied
    } else if q_hat > 0.95 {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    Ok(report)
}

/// Classifies damping from the tail envelope of t·b(t).
pub fn classify_dissipation(b: &CoefficientProfile, grid: &[f64]) -> Result<(DissipationClass, ConditionReport)> {
    check_grid(grid)?;
    let end = *grid.last().unwrap();
    if grid[0] <= 0.0 || end / grid[0] < 1e3 {
        return Err(Error::Precondition("dissipation grid must span at least three decades".into()));
    }
    let mut report = ConditionReport::new(ConditionId::DissipationClass, grid);
    report.samples = grid.iter().map(|&t| b.eval(t, 0).map(|v| t * v)).collect::<Result<_>>()?;
    let max_in = |lo: f64, hi: f64| {
        grid.iter()
            .zip(&report.samples)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let tail = max_in(end / 10.0, end);
    let previous = max_in(end / 100.0, end / 10.0);
    let growth = if previous > 0.0 { tail / previous } else { f64::INFINITY };
    report.constants.insert(0, tail);
    report.fitted_exponent = Some(growth.log10());
    let class = if tail <= 0.0 || growth > 1.5 {
        if tail <= 0.0 {
            DissipationClass::NonEffective
        } else {
            DissipationClass::Effective
        }
    } else if growth < 1.1 {
        if tail < 0.5 {
            DissipationClass::NonEffective
        } else if tail > 1.0 {
            DissipationClass::OverDamping
        } else {
            DissipationClass::Inconclusive
        }
    } else {
        DissipationClass::Inconclusive
    };
    report.verdict = if class == DissipationClass::Inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Satisfied
    };
    report.note = format!("tail max of t*b(t) = {tail:.6}, decade growth ratio = {growth:.4}");
    Ok((class, report))
}

/// Samples λ′Λ/λ² and reports its observed range [c, C].
pub fn check_shape_admissibility(shape: &CoefficientProfile, grid: &[f64]) -> Result<ConditionReport> {
    check_grid(grid)?;
    if !matches!(shape.family(), Family::PowerShape { .. } | Family::Constant { .. }) {
        return Err(Error::invalid("shape admissibility needs a shape profile"));
    }
    let mut report = ConditionReport::new(ConditionId::ShapeAdmissibility, grid);
    report.samples = grid
        .iter()
        .map(|&t| {
            let l = shape.eval(t, 0)?;
            Ok(shape.eval(t, 1)? * shape_primitive(shape, t)? / (l * l))
        })
        .collect::<Result<_>>()?;
    let lo = report.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = report.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    report.constants.insert(0, lo);
    report.constants.insert(1, hi);
    report.verdict = if lo > 0.0 && hi.is_finite() {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    };
    report.note = format!("lambda' Lambda / lambda^2 in [{lo:.6}, {hi:.6}]");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::geometric_grid;

    #[test]
    fn constant_symbol_constants_vanish() {
        let c = CoefficientProfile::constant(2.0).unwrap();
        let grid = geometric_grid(1.0, 1e3, 50);
        let r = check_symbol_class(&c, &SymbolWeight::InvT, 3, &grid).unwrap();
        assert!(r.constants.values().all(|&v| v == 0.0));
        assert_eq!(r.verdict, Verdict::Satisfied);
    }

    #[test]
    fn log_sine_is_symbol_class() {
        let a = CoefficientProfile::log_sine(2.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=20_000).map(|i| i as f64 * 0.5).collect();
        let r = check_symbol_class(&a, &SymbolWeight::InvT, 1, &grid).unwrap();
        // Dense-grid oracle for sup (1+t)/(e+t)|cos(log(e+t))|.
        let oracle = grid
            .iter()
            .map(|&t| ((1.0 + t) / (std::f64::consts::E + t) * (std::f64::consts::E + t).ln().cos()).abs())
            .fold(0.0, f64::max);
        assert!((r.constants[&1] - oracle).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Satisfied);
    }

    #[test]
    fn sine_power_second_order_keeps_growing() {
        let a = CoefficientProfile::sine_power(2.0, 1.0, 0.5).unwrap();
        let grid = geometric_grid(1.0, 1e4, 4000);
        let r = check_symbol_class(&a, &SymbolWeight::InvT, 2, &grid).unwrap();
        assert!(r.constants[&2] > 10.0);
        assert_ne!(r.verdict, Verdict::Satisfied);
    }

    #[test]
    fn constant_stabilisation_is_zero() {
        let c = CoefficientProfile::constant(2.0).unwrap();
        let r = stabilisation_measure(&c, 2.0, None, &geometric_grid(1.0, 1e3, 40)).unwrap();
        assert_eq!(r.fitted_exponent, Some(f64::NEG_INFINITY));
        assert_eq!(r.verdict, Verdict::Satisfied);
    }

    #[test]
    fn dissipation_classes() {
        let grid = geometric_grid(1.0, 1e4, 200);
        let cls = |b: CoefficientProfile| classify_dissipation(&b, &grid).unwrap().0;
        assert_eq!(cls(CoefficientProfile::inverse_damping(0.3).unwrap()), DissipationClass::NonEffective);
        assert_eq!(cls(CoefficientProfile::power_damping(0.5).unwrap()), DissipationClass::Effective);
        assert_eq!(cls(CoefficientProfile::inverse_damping(2.0).unwrap()), DissipationClass::OverDamping);
        assert!(classify_dissipation(&CoefficientProfile::inverse_damping(0.3).unwrap(), &geometric_grid(1.0, 10.0, 20)).is_err());
    }

    #[test]
    fn power_shape_is_admissible() {
        let s = CoefficientProfile::power_shape(1.0).unwrap();
        let r = check_shape_admissibility(&s, &geometric_grid(1.0, 1e4, 100)).unwrap();
        assert_eq!(r.verdict, Verdict::Satisfied);
        // λ′Λ/λ² → ℓ/(ℓ+1)
        assert!((r.samples.last().unwrap() - 0.5).abs() < 1e-3);
    }
}
