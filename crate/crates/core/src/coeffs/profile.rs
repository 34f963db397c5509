use std::f64::consts::{E, PI};

use super::bump;
use crate::error::{Error, Result};
use crate::quad;

/// Absolute tolerance used whenever a primitive has no closed form.
pub const PRIMITIVE_TOL: f64 = 1e-10;

/// The coefficient families. Parameters live in the variants.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// c
    Constant { value: f64 },
    /// c0 + c1·sin(log(e + t))
    LogSine { c0: f64, c1: f64 },
    /// c0 + c1·sin(t^α)
    SinePower { c0: f64, c1: f64, alpha: f64 },
    /// 1 + Σ_{j=1}^{J} η_j ψ((t − t_j)/δ_j), t_j = 2^j, δ_j = 2^{jq}, η_j = 2^{j(q−p)}
    BumpSum { p: f64, q: f64, count: usize },
    /// λ(t) = (1 + t)^ℓ
    PowerShape { ell: f64 },
    /// b(t) = μ/(1 + t)
    InverseDamping { mu: f64 },
    /// b(t) = (1 + t)^{−γ}
    PowerDamping { gamma: f64 },
    /// b(t) = b0 + b1·cos(2πt/T)
    PeriodicDamping { b0: f64, b1: f64, period: f64 },
    /// 2b(t) = μ(t)(1 + sin(t^α)), μ(t) = μ0/(1 + t)
    ModulatedDamping { mu0: f64, alpha: f64 },
    /// a(t)² = c0² + ε·cos(2πt/T)
    PeriodicSpeed { c0: f64, eps: f64, period: f64 },
    /// 2b(t) = λ′(s)/λ(s)² with Λ(s) = t; defined for t ≥ Λ(0).
    LiouvilleDamping { shape: Box<CoefficientProfile> },
}

/// A coefficient function with analytic derivatives and primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    family: Family,
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(msg))
    }
}

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// ∏_{i<k} (e − i)
fn falling(e: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (e - i as f64))
}

/// k-th derivative of (1 + t)^e.
fn power_derivative(t: f64, e: f64, k: usize) -> f64 {
    let f = falling(e, k);
    if f == 0.0 {
        0.0
    } else {
        f * (1.0 + t).powf(e - k as f64)
    }
}

/// Derivatives 0..=4 of sin(t^α).
fn sine_power_derivatives(t: f64, alpha: f64, kmax: usize) -> Result<[f64; 5]> {
    let mut g = [0.0; 5];
    for (j, slot) in g.iter_mut().enumerate().take(kmax + 1) {
        let f = falling(alpha, j);
        *slot = if f == 0.0 { 0.0 } else { f * t.powf(alpha - j as f64) };
        if !slot.is_finite() {
            return Err(Error::Domain {
                t,
                reason: format!("derivative of order {j} of t^{alpha} is singular"),
            });
        }
    }
    let (s, c) = g[0].sin_cos();
    let (g1, g2, g3, g4) = (g[1], g[2], g[3], g[4]);
    Ok([
        s,
        c * g1,
        -s * g1 * g1 + c * g2,
        -c * g1.powi(3) - 3.0 * s * g1 * g2 + c * g3,
        s * g1.powi(4) - 6.0 * c * g1 * g1 * g2 - 3.0 * s * g2 * g2 - 4.0 * s * g1 * g3 + c * g4,
    ])
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl CoefficientProfile {
    fn build(family: Family) -> Result<Self> {
        use Family::*;
        match &family {
            Constant { value } => check(value.is_finite(), "constant must be finite")?,
            LogSine { c0, c1 } => {
                check(all_finite(&[*c0, *c1]), "log-sine parameters must be finite")?;
                check(*c0 > c1.abs(), "log-sine requires c0 > |c1| for positivity")?;
            }
            SinePower { c0, c1, alpha } => {
                check(all_finite(&[*c0, *c1, *alpha]), "sine-power parameters must be finite")?;
                check(*c0 > c1.abs(), "sine-power requires c0 > |c1| for positivity")?;
                check(*alpha > 0.0, "sine-power requires alpha > 0")?;
            }
            BumpSum { p, q, count } => {
                check(all_finite(&[*p, *q]), "bump-sum parameters must be finite")?;
                check((0.0..1.0).contains(q), "bump-sum requires q in [0, 1)")?;
                check(*p >= *q, "bump-sum requires p >= q so that eta_j <= 1")?;
                check(*count >= 1 && *count <= 60, "bump-sum count must be in 1..=60")?;
            }
            PowerShape { ell } => check(ell.is_finite() && *ell > -1.0, "power shape requires ell > -1")?,
            InverseDamping { mu } => check(mu.is_finite() && *mu >= 0.0, "inverse damping requires mu >= 0")?,
            PowerDamping { gamma } => {
                check(gamma.is_finite() && *gamma > -1.0 && *gamma < 1.0, "power damping requires gamma in (-1, 1)")?
            }
            PeriodicDamping { b0, b1, period } => {
                check(all_finite(&[*b0, *b1, *period]), "periodic damping parameters must be finite")?;
                check(*b0 > b1.abs(), "periodic damping requires b0 > |b1|")?;
                check(*period > 0.0, "period must be positive")?;
            }
            ModulatedDamping { mu0, alpha } => {
                check(all_finite(&[*mu0, *alpha]), "modulated damping parameters must be finite")?;
                check(*mu0 >= 0.0 && *alpha > 0.0, "modulated damping requires mu0 >= 0, alpha > 0")?;
            }
            PeriodicSpeed { c0, eps, period } => {
                check(all_finite(&[*c0, *eps, *period]), "periodic speed parameters must be finite")?;
                check(c0 * c0 > eps.abs(), "periodic speed requires c0^2 > |eps|")?;
                check(*period > 0.0, "period must be positive")?;
            }
            LiouvilleDamping { shape } => check(
                matches!(shape.family, PowerShape { .. } | Constant { .. }),
                "Liouville damping needs a power or constant shape",
            )?,
        }
        Ok(Self { family })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::build(Family::Constant { value })
    }
    pub fn log_sine(c0: f64, c1: f64) -> Result<Self> {
        Self::build(Family::LogSine { c0, c1 })
    }
    pub fn sine_power(c0: f64, c1: f64, alpha: f64) -> Result<Self> {
        Self::build(Family::SinePower { c0, c1, alpha })
    }
    pub fn bump_sum(p: f64, q: f64, count: usize) -> Result<Self> {
        Self::build(Family::BumpSum { p, q, count })
    }
    pub fn power_shape(ell: f64) -> Result<Self> {
        Self::build(Family::PowerShape { ell })
    }
    pub fn inverse_damping(mu: f64) -> Result<Self> {
        Self::build(Family::InverseDamping { mu })
    }
    pub fn power_damping(gamma: f64) -> Result<Self> {
        Self::build(Family::PowerDamping { gamma })
    }
    pub fn periodic_damping(b0: f64, b1: f64, period: f64) -> Result<Self> {
        Self::build(Family::PeriodicDamping { b0, b1, period })
    }
    pub fn modulated_damping(mu0: f64, alpha: f64) -> Result<Self> {
        Self::build(Family::ModulatedDamping { mu0, alpha })
    }
    pub fn periodic_speed(c0: f64, eps: f64, period: f64) -> Result<Self> {
        Self::build(Family::PeriodicSpeed { c0, eps, period })
    }
    pub fn liouville_damping(shape: CoefficientProfile) -> Result<Self> {
        Self::build(Family::LiouvilleDamping { shape: Box::new(shape) })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Short machine-readable family name.
    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Constant { .. } => "constant",
            Family::LogSine { .. } => "log_sine",
            Family::SinePower { .. } => "sine_power",
            Family::BumpSum { .. } => "bump_sum",
            Family::PowerShape { .. } => "power_shape",
            Family::InverseDamping { .. } => "inverse_damping",
            Family::PowerDamping { .. } => "power_damping",
            Family::PeriodicDamping { .. } => "periodic_damping",
            Family::ModulatedDamping { .. } => "modulated_damping",
            Family::PeriodicSpeed { .. } => "periodic_speed",
            Family::LiouvilleDamping { .. } => "liouville_damping",
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.family {
            Family::PeriodicDamping { period, .. } | Family::PeriodicSpeed { period, .. } => Some(period),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, Family::Constant { .. })
    }

    pub fn max_derivative_order(&self) -> usize {
        match self.family {
            Family::Constant { .. }
            | Family::LogSine { .. }
            | Family::PowerShape { .. }
            | Family::InverseDamping { .. }
            | Family::PowerDamping { .. }
            | Family::PeriodicDamping { .. } => 8,
            Family::SinePower { .. }
            | Family::BumpSum { .. }
            | Family::ModulatedDamping { .. }
            | Family::PeriodicSpeed { .. } => 4,
            Family::LiouvilleDamping { .. } => 1,
        }
    }

    /// Left end of the evaluation domain (0 except for Liouville-derived damping).
    pub fn domain_start(&self) -> f64 {
        match &self.family {
            Family::LiouvilleDamping { shape } => shape_primitive(shape, 0.0).unwrap_or(1.0),
            _ => 0.0,
        }
    }

    /// k-th derivative at t, by analytic differentiation.
    pub fn eval(&self, t: f64, k: usize) -> Result<f64> {
        let max = self.max_derivative_order();
        if k > max {
            return Err(Error::OrderExceeded { order: k, max });
        }
        if !(t >= self.domain_start()) || !t.is_finite() {
            return Err(Error::Domain {
                t,
                reason: format!("{} is defined for t >= {}", self.name(), self.domain_start()),
            });
        }
        use Family::*;
        let v = match &self.family {
            Constant { value } => {
                if k == 0 {
                    *value
                } else {
                    0.0
                }
            }
            LogSine { c0, c1 } => {
                let y = E + t;
                let u = y.ln();
                let (s, c) = u.sin_cos();
                if k == 0 {
                    c0 + c1 * s
                } else {
                    // d/dy [y^{-j}(P sin u + Q cos u)] = y^{-j-1}((−jP − Q) sin u + (P − jQ) cos u)
                    let (mut p, mut q) = (1.0, 0.0);
                    for j in 0..k {
                        let jf = j as f64;
                        let np = -jf * p - q;
                        let nq = p - jf * q;
                        p = np;
                        q = nq;
                    }
                    c1 * y.powi(-(k as i32)) * (p * s + q * c)
                }
            }
            SinePower { c0, c1, alpha } => {
                let d = sine_power_derivatives(t, *alpha, k)?;
                if k == 0 {
                    c0 + c1 * d[0]
                } else {
                    c1 * d[k]
                }
            }
            BumpSum { p, q, count } => {
                let mut acc = if k == 0 { 1.0 } else { 0.0 };
                for j in 1..=*count {
                    let (tj, dj, eta) = bump_params(*p, *q, j);
                    if t <= tj || t >= tj + dj {
                        continue;
                    }
                    let s = (t - tj) / dj;
                    acc += eta * dj.powi(-(k as i32)) * bump::derivatives(s)[k];
                }
                acc
            }
            PowerShape { ell } => power_derivative(t, *ell, k),
            InverseDamping { mu } => mu * power_derivative(t, -1.0, k),
            PowerDamping { gamma } => power_derivative(t, -gamma, k),
            PeriodicDamping { b0, b1, period } => {
                let w = 2.0 * PI / period;
                let base = b1 * w.powi(k as i32) * (w * t + k as f64 * PI / 2.0).cos();
                if k == 0 {
                    b0 + base
                } else {
                    base
                }
            }
            ModulatedDamping { mu0, alpha } => {
                let s = sine_power_derivatives(t, *alpha, k)?;
                let mut acc = 0.0;
                for j in 0..=k {
                    let inner = if j == 0 { 1.0 + s[0] } else { s[j] };
                    acc += binomial(k, j) * power_derivative(t, -1.0, k - j) * inner;
                }
                0.5 * mu0 * acc
            }
            PeriodicSpeed { c0, eps, period } => periodic_speed_derivatives(t, *c0, *eps, *period)[k],
            LiouvilleDamping { shape } => {
                let s = invert_shape_primitive(shape, t)?;
                let l0 = shape.eval(s, 0)?;
                let l1 = shape.eval(s, 1)?;
                if k == 0 {
                    0.5 * l1 / (l0 * l0)
                } else {
                    let l2 = shape.eval(s, 2)?;
                    0.5 * (l2 / (l0 * l0) - 2.0 * l1 * l1 / (l0 * l0 * l0)) / l0
                }
            }
        };
        Ok(v)
    }

    /// Value at t; shorthand for `eval(t, 0)`.
    pub fn value(&self, t: f64) -> Result<f64> {
        self.eval(t, 0)
    }

    /// Λ(t) = 1 + ∫₀ᵗ λ for the shape family; ∫ from the domain start otherwise.
    pub fn primitive(&self, t: f64) -> Result<f64> {
        match self.family {
            Family::PowerShape { .. } => shape_primitive(self, t),
            _ => self.integral(t),
        }
    }

    /// Plain integral ∫_{domain start}^t of the coefficient.
    pub fn integral(&self, t: f64) -> Result<f64> {
        let t0 = self.domain_start();
        if !(t >= t0) {
            return Err(Error::Domain {
                t,
                reason: format!("primitive of {} starts at {}", self.name(), t0),
            });
        }
        use Family::*;
        let v = match &self.family {
            Constant { value } => value * t,
            LogSine { c0, c1 } => {
                let anti = |y: f64| {
                    let (s, c) = y.ln().sin_cos();
                    0.5 * y * (s - c)
                };
                c0 * t + c1 * (anti(E + t) - anti(E))
            }
            SinePower { c0, c1, alpha } => {
                let a = *alpha;
                c0 * t + c1 * quad::integrate(|s: f64| s.powf(a).sin(), 0.0, t, PRIMITIVE_TOL)?.value
            }
            BumpSum { p, q, count } => {
                let mut acc = t;
                for j in 1..=*count {
                    let (tj, dj, eta) = bump_params(*p, *q, j);
                    if t <= tj {
                        break;
                    }
                    acc += eta * dj * bump::partial_integral((t - tj) / dj)?;
                }
                acc
            }
            PowerShape { ell } => {
                let e = ell + 1.0;
                ((1.0 + t).powf(e) - 1.0) / e
            }
            InverseDamping { mu } => mu * t.ln_1p(),
            PowerDamping { gamma } => {
                let e = 1.0 - gamma;
                ((1.0 + t).powf(e) - 1.0) / e
            }
            PeriodicDamping { b0, b1, period } => {
                let w = 2.0 * PI / period;
                b0 * t + b1 * (w * t).sin() / w
            }
            ModulatedDamping { mu0, alpha } => {
                let a = *alpha;
                let osc = quad::integrate(|s: f64| s.powf(a).sin() / (1.0 + s), 0.0, t, PRIMITIVE_TOL)?.value;
                0.5 * mu0 * (t.ln_1p() + osc)
            }
            PeriodicSpeed { .. } => quad::integrate(|s| self.eval(s, 0).unwrap_or(f64::NAN), 0.0, t, PRIMITIVE_TOL)?.value,
            LiouvilleDamping { shape } => {
                // ∫ b dt = ½ ∫ λ′/λ ds
                let s = invert_shape_primitive(shape, t)?;
                0.5 * (shape.eval(s, 0)? / shape.eval(0.0, 0)?).ln()
            }
        };
        Ok(v)
    }

    /// An upper bound for |f| on [t0, t1], used by the oscillation step guard.
    pub fn sup_abs_on(&self, t0: f64, t1: f64) -> Result<f64> {
        use Family::*;
        let v = match &self.family {
            Constant { value } => value.abs(),
            LogSine { c0, c1 } | SinePower { c0, c1, .. } => c0.abs() + c1.abs(),
            BumpSum { p, q, count } => {
                let peak = bump::KAPPA * (-4.0f64).exp();
                let eta_max = (1..=*count).map(|j| bump_params(*p, *q, j).2).fold(0.0, f64::max);
                1.0 + eta_max * peak
            }
            PeriodicDamping { b0, b1, .. } => b0.abs() + b1.abs(),
            PeriodicSpeed { c0, eps, .. } => (c0 * c0 + eps.abs()).sqrt(),
            ModulatedDamping { mu0, .. } => mu0 / (1.0 + t0.max(0.0)),
            // Monotone families: the endpoints bound the range.
            PowerShape { .. } | InverseDamping { .. } | PowerDamping { .. } | LiouvilleDamping { .. } => {
                self.eval(t0, 0)?.abs().max(self.eval(t1, 0)?.abs())
            }
        };
        Ok(v)
    }
}

/// (t_j, δ_j, η_j) for the j-th bump.
pub(crate) fn bump_params(p: f64, q: f64, j: usize) -> (f64, f64, f64) {
    let jf = j as f64;
    (2f64.powf(jf), 2f64.powf(jf * q), 2f64.powf(jf * (q - p)))
}

fn periodic_speed_derivatives(t: f64, c0: f64, eps: f64, period: f64) -> [f64; 5] {
    let w = 2.0 * PI / period;
    let big_a: [f64; 5] =
        std::array::from_fn(|k| (if k == 0 { c0 * c0 } else { 0.0 }) + eps * w.powi(k as i32) * (w * t + k as f64 * PI / 2.0).cos());
    // Differentiate a² = A repeatedly.
    let a0 = big_a[0].sqrt();
    let a1 = big_a[1] / (2.0 * a0);
    let a2 = (0.5 * big_a[2] - a1 * a1) / a0;
    let a3 = (0.5 * big_a[3] - 3.0 * a1 * a2) / a0;
    let a4 = (0.5 * big_a[4] - 3.0 * a2 * a2 - 4.0 * a1 * a3) / a0;
    [a0, a1, a2, a3, a4]
}

/// Λ(t) = 1 + ∫₀ᵗ λ for a shape profile.
pub fn shape_primitive(shape: &CoefficientProfile, t: f64) -> Result<f64> {
    match shape.family {
        Family::PowerShape { .. } | Family::Constant { .. } => Ok(1.0 + shape.integral(t)?),
        _ => Err(Error::invalid(format!("{} is not a shape profile", shape.name()))),
    }
}

/// Solves Λ(s) = t for s ≥ 0 by bracketed Newton iteration.
pub fn invert_shape_primitive(shape: &CoefficientProfile, t: f64) -> Result<f64> {
    let big_lambda = |s: f64| shape_primitive(shape, s);
    let start = big_lambda(0.0)?;
    if !(t >= start) {
        return Err(Error::BracketFailure {
            t,
            reason: format!("t is below Λ(0) = {start}"),
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while big_lambda(hi)? < t {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 1100 || !hi.is_finite() {
            return Err(Error::BracketFailure {
                t,
                reason: "shape primitive does not reach t".into(),
            });
        }
    }
    let tol = 1e-12 * (1.0 + t);
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = big_lambda(s)? - t;
        if f.abs() <= tol {
            return Ok(s);
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let slope = shape.eval(s, 0)?;
        let newton = s - f / slope;
        s = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            return Ok(s);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn trivial_values() {
        let c = CoefficientProfile::constant(2.0).unwrap();
        assert_eq!(c.eval(5.0, 0).unwrap(), 2.0);
        assert_eq!(c.eval(5.0, 1).unwrap(), 0.0);
        let p = CoefficientProfile::power_shape(1.0).unwrap();
        assert_eq!(p.eval(3.0, 0).unwrap(), 4.0);
        assert_eq!(p.eval(3.0, 1).unwrap(), 1.0);
        let s = CoefficientProfile::sine_power(2.0, 1.0, 0.5).unwrap();
        assert!(close(s.eval(PI * PI, 0).unwrap(), 2.0, 1e-15));
    }

    #[test]
    fn bump_sum_is_one_between_bumps() {
        let b = CoefficientProfile::bump_sum(0.7, 0.4, 8).unwrap();
        // bump 3 covers [8, 8 + 2^1.2 ≈ 10.30]; bump 4 starts at 16
        for &t in &[0.5, 1.0, 11.0, 15.9, 40.0, 1000.0] {
            assert_eq!(b.eval(t, 0).unwrap(), 1.0, "t={t}");
        }
        assert!(b.eval(9.0, 0).unwrap() > 1.0);
    }

    #[test]
    fn primitives() {
        let p = CoefficientProfile::power_shape(1.0).unwrap();
        assert!(close(p.primitive(1.0).unwrap(), 2.5, 1e-15));
        let d = CoefficientProfile::inverse_damping(0.3).unwrap();
        assert!(close(d.primitive(E - 1.0).unwrap(), 0.3, 1e-15));
        // One full bump: η_j δ_j / 2
        let b = CoefficientProfile::bump_sum(0.7, 0.4, 3).unwrap();
        let (t3, d3, e3) = bump_params(0.7, 0.4, 3);
        let before = b.primitive(t3).unwrap() - t3;
        let after = b.primitive(t3 + d3).unwrap() - (t3 + d3);
        assert!(close(after - before, 0.5 * e3 * d3, 1e-12));
    }

    #[test]
    fn errors() {
        let d = CoefficientProfile::bump_sum(0.7, 0.4, 3).unwrap();
        assert!(matches!(d.eval(1.0, 5), Err(Error::OrderExceeded { order: 5, max: 4 })));
        assert!(matches!(d.eval(-1.0, 0), Err(Error::Domain { .. })));
        assert!(CoefficientProfile::log_sine(1.0, 2.0).is_err());
        assert!(CoefficientProfile::power_damping(1.0).is_err());
        let s = CoefficientProfile::sine_power(2.0, 1.0, 0.5).unwrap();
        assert!(matches!(s.eval(0.0, 1), Err(Error::Domain { .. })));
    }

    #[test]
    fn liouville_damping_closed_form() {
        // λ = 1 + s: Λ(s) = ((1+s)² + 1)/2, so 2b(t) = 1/(2t − 1).
        let b = CoefficientProfile::liouville_damping(CoefficientProfile::power_shape(1.0).unwrap()).unwrap();
        assert_eq!(b.domain_start(), 1.0);
        for &t in &[1.0, 2.0, 17.5, 1e4] {
            let exact = 0.5 / (2.0 * t - 1.0);
            assert!(close(b.eval(t, 0).unwrap(), exact, 1e-11), "t={t}");
            let d_exact = -1.0 / (2.0 * t - 1.0).powi(2);
            assert!(close(b.eval(t, 1).unwrap(), d_exact, 1e-10));
        }
        // ∫_1^t b = ¼ ln(2t − 1)
        assert!(close(b.integral(20.0).unwrap(), 0.25 * 39f64.ln(), 1e-11));
        let unit = CoefficientProfile::liouville_damping(CoefficientProfile::constant(1.0).unwrap()).unwrap();
        assert_eq!(unit.eval(42.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_shape_accuracy() {
        let shape = CoefficientProfile::power_shape(1.5).unwrap();
        for &t in &[1.0, 1.5, 10.0, 1e3, 1e6] {
            let s = invert_shape_primitive(&shape, t).unwrap();
            assert!((shape_primitive(&shape, s).unwrap() - t).abs() <= 1e-10 * (1.0 + t));
        }
        assert!(matches!(invert_shape_primitive(&shape, 0.5), Err(Error::BracketFailure { .. })));
    }
}
