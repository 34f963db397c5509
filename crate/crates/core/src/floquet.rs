//! Hill problems: monodromy, discriminant scans, instability intervals, growth demo.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::CoefficientProfile;
use crate::error::{Error, Result};
use crate::modeode::{fundamental_matrix, Equation, FundamentalMatrix, DEFAULT_TOL};
use crate::rates::ols_fit;
use crate::spectral::{evolve, plancherel_energy, EnergyTrace, SpectralData, TraceKind};

/// Normalized discriminant above which a sample counts as unstable.
pub const INSTABILITY_EPS: f64 = 1e-8;

/// A periodic mode equation.
#[derive(Debug, Clone)]
pub struct HillProblem {
    pub equation: Equation,
    pub period: f64,
    pub tol: f64,
}

impl HillProblem {
    /// Builds a Hill problem; the period is taken from the periodic profiles, or
    /// from `period` when all coefficients are constant.
    pub fn new(equation: Equation, period: Option<f64>) -> Result<Self> {
        let profiles = std::iter::once(&equation.speed)
            .chain(equation.damping.iter())
            .chain(equation.mass.iter());
        let mut found: Option<f64> = None;
        for p in profiles {
            match p.period() {
                Some(t) => match found {
                    Some(f) if (f - t).abs() > 1e-12 * f => {
                        return Err(Error::Precondition(format!("profiles have different periods {f} and {t}")))
                    }
                    _ => found = Some(t),
                },
                None if p.is_constant() => {}
                None => return Err(Error::Precondition(format!("{} is not periodic", p.name()))),
            }
        }
        let period = match (found, period) {
            (Some(f), Some(p)) if (f - p).abs() > 1e-12 * f => {
                return Err(Error::Precondition(format!("given period {p} differs from profile period {f}")))
            }
            (Some(f), _) => f,
            (None, Some(p)) if p > 0.0 => p,
            _ => return Err(Error::Precondition("constant coefficients need an explicit period".into())),
        };
        Ok(Self {
            equation,
            period,
            tol: DEFAULT_TOL,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn is_damped(&self) -> bool {
        self.equation.damping.is_some()
    }

    pub fn is_constant(&self) -> bool {
        self.equation.speed.is_constant()
            && self.equation.damping.as_ref().is_none_or(|p| p.is_constant())
            && self.equation.mass.as_ref().is_none_or(|p| p.is_constant())
    }
}

/// Period monodromy X(T; 0).
pub fn monodromy(problem: &HillProblem, lambda_spec: f64) -> Result<FundamentalMatrix> {
    if !(lambda_spec >= 0.0) {
        return Err(Error::invalid("lambda_spec must be >= 0"));
    }
    fundamental_matrix(&problem.equation.mode(lambda_spec), 0.0, problem.period, problem.tol)
}

/// ν = log(spectral radius)/T from trace and determinant.
pub fn growth_rate_from(discriminant: f64, det: f64, period: f64) -> f64 {
    if (det - 1.0).abs() <= 1e-8 && discriminant.abs() <= 2.0 {
        return 0.0;
    }
    spectral_radius(discriminant, det).ln() / period
}

fn spectral_radius(tr: f64, det: f64) -> f64 {
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 {
        det.abs().sqrt()
    } else {
        0.5 * (tr.abs() + disc.sqrt())
    }
}

/// |Δ|/√det − 2: positive iff the spectral radius exceeds √det.
pub fn normalized_discriminant(discriminant: f64, det: f64) -> f64 {
    discriminant.abs() / det.sqrt() - 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscriminantSample {
    pub lambda_spec: f64,
    pub discriminant: f64,
    pub det_monodromy: f64,
    pub growth_rate: f64,
}

impl DiscriminantSample {
    pub fn excess(&self) -> f64 {
        normalized_discriminant(self.discriminant, self.det_monodromy)
    }

    pub fn unstable(&self) -> bool {
        self.excess() > INSTABILITY_EPS
    }
}

pub fn sample(problem: &HillProblem, lambda_spec: f64) -> Result<DiscriminantSample> {
    let m = monodromy(problem, lambda_spec)?;
    let (d, det) = (m.trace(), m.det());
    let growth_rate = if problem.is_damped() {
        spectral_radius(d, det).ln() / problem.period
    } else {
        growth_rate_from(d, det, problem.period)
    };
    Ok(DiscriminantSample {
        lambda_spec,
        discriminant: d,
        det_monodromy: det,
        growth_rate,
    })
}

/// Floquet growth rate at λ; exactly 0 inside stability bands of damping-free problems.
pub fn growth_rate_at(problem: &HillProblem, lambda_spec: f64) -> Result<f64> {
    Ok(sample(problem, lambda_spec)?.growth_rate)
}

/// Δ(λ) on the uniform grid λ_i = i·λ_max/N, i = 1..N (parallel, ordered).
pub fn discriminant_scan(problem: &HillProblem, lambda_max: f64, scan_points: usize) -> Result<Vec<DiscriminantSample>> {
    if !(lambda_max > 0.0) || scan_points < 1 {
        return Err(Error::invalid("scan needs lambda_max > 0 and at least one point"));
    }
    (1..=scan_points)
        .into_par_iter()
        .map(|i| sample(problem, lambda_max * i as f64 / scan_points as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityInterval {
    pub lower: f64,
    pub upper: f64,
    pub max_growth_rate: f64,
    /// λ where the peak rate was found.
    pub peak_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalScan {
    pub intervals: Vec<InstabilityInterval>,
    /// True when the last interval may continue past λ_max.
    pub truncated: bool,
    pub samples: Vec<DiscriminantSample>,
}

/// Bisection on the normalized discriminant between a stable and an unstable λ.
fn refine_edge(problem: &HillProblem, mut stable: f64, mut unstable: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (stable + unstable);
        if (unstable - stable).abs() <= 1e-15 * mid.abs().max(1e-300) || mid == stable || mid == unstable {
            break;
        }
        let s = sample(problem, mid)?;
        if s.excess().abs() <= 1e-12 {
            return Ok(mid);
        }
        if s.excess() > 0.0 {
            unstable = mid;
        } else {
            stable = mid;
        }
    }
    Ok(0.5 * (stable + unstable))
}

/// Golden-section search for the peak growth rate on [lo, hi].
fn peak_rate(problem: &HillProblem, lo: f64, hi: f64, guess: (f64, f64)) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let f = |x: f64| sample(problem, x).map(|s| s.growth_rate);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if (b - a) <= 1e-10 * b.abs().max(1e-12) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let (x, v) = if fc > fd { (c, fc) } else { (d, fd) };
    // The rate need not be unimodal; never report less than the scan saw.
    Ok(if v >= guess.1 { (x, v) } else { guess })
}

/// Scans (0, λ_max] and refines every maximal run of unstable samples.
pub fn instability_intervals(problem: &HillProblem, lambda_max: f64, scan_points: usize) -> Result<IntervalScan> {
    if scan_points < 100 {
        return Err(Error::invalid("instability scans need at least 100 points"));
    }
    let samples = discriminant_scan(problem, lambda_max, scan_points)?;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, s) in samples.iter().enumerate() {
        match (s.unstable(), start) {
            (true, None) => start = Some(i),
            (false, Some(j)) => {
                runs.push((j, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    let truncated = start.is_some();
    if let Some(j) = start {
        runs.push((j, samples.len() - 1));
        log::warn!("instability interval may be truncated at lambda_max = {lambda_max}");
    }
    let refined: Vec<Result<InstabilityInterval>> = runs
        .par_iter()
        .map(|&(i, j)| {
            let lower = if i == 0 {
                // Damped problems can be unstable down to λ = 0.
                let s0 = sample(problem, 0.0)?;
                if s0.excess() > 0.0 {
                    0.0
                } else {
                    refine_edge(problem, 0.0, samples[0].lambda_spec)?
                }
            } else {
                refine_edge(problem, samples[i - 1].lambda_spec, samples[i].lambda_spec)?
            };
            let upper = if j + 1 < samples.len() {
                refine_edge(problem, samples[j + 1].lambda_spec, samples[j].lambda_spec)?
            } else {
                samples[j].lambda_spec
            };
            let best = samples[i..=j]
                .iter()
                .fold((samples[i].lambda_spec, f64::NEG_INFINITY), |acc, s| {
                    if s.growth_rate > acc.1 {
                        (s.lambda_spec, s.growth_rate)
                    } else {
                        acc
                    }
                });
            let (peak_lambda, max_growth_rate) = peak_rate(problem, lower, upper, best)?;
            Ok(InstabilityInterval {
                lower,
                upper,
                max_growth_rate,
                peak_lambda,
            })
        })
        .collect();
    Ok(IntervalScan {
        intervals: refined.into_iter().collect::<Result<_>>()?,
        truncated,
        samples,
    })
}

/// Writes a scan as CSV: lambda, discriminant, det, growth_rate.
pub fn write_scan_csv(path: &Path, samples: &[DiscriminantSample]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "lambda,discriminant,det,growth_rate")?;
    for s in samples {
        writeln!(out, "{:e},{:e},{:e},{:e}", s.lambda_spec, s.discriminant, s.det_monodromy, s.growth_rate)?;
    }
    out.flush()?;
    Ok(())
}

/// Outcome of the exponential-growth construction.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthDemo {
    pub trace: EnergyTrace,
    /// Fitted d log E/dt over the last half of the horizon.
    pub fitted_rate: f64,
    /// 2ν of the interval.
    pub predicted_rate: f64,
    pub relative_error: f64,
    /// log E(T)/log T at the horizon.
    pub log_ratio: f64,
    pub r_squared: f64,
}

/// Energy of data whose spectral weight is a bump in λ centred in the
/// interval with half its width; E(0) is normalized to 1.
pub fn yagdjian_demo(
    problem: &HillProblem,
    interval: &InstabilityInterval,
    horizon: f64,
    n_modes: usize,
) -> Result<GrowthDemo> {
    if !(interval.max_growth_rate > 0.0) {
        return Err(Error::Precondition("interval has no positive growth rate".into()));
    }
    if horizon < 10.0 * problem.period {
        return Err(Error::Precondition("horizon shorter than ten periods".into()));
    }
    if n_modes < 8 {
        return Err(Error::invalid("growth demo needs at least 8 modes"));
    }
    let centre = 0.5 * (interval.lower + interval.upper);
    let half = 0.25 * (interval.upper - interval.lower);
    let (lo, hi) = (centre - half, centre + half);
    // Midpoint rule in λ on the bump support; weights carry the bump.
    let h = (hi - lo) / n_modes as f64;
    let lambdas: Vec<f64> = (0..n_modes).map(|i| lo + (i as f64 + 0.5) * h).collect();
    let bump: Vec<f64> = lambdas
        .iter()
        .map(|&l| crate::coeffs::bump::value((l - lo) / (hi - lo)))
        .collect();
    let nodes: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
    let raw = SpectralData {
        dimension: 1,
        weights: bump.iter().map(|b| b * h).collect(),
        u1_hat: nodes.iter().map(|_| Complex64::new(1.0, 0.0)).collect(),
        u2_hat: nodes.iter().map(|_| Complex64::new(0.0, 0.0)).collect(),
        nodes,
        signed: false,
        length_scale: 1.0,
        coarse: None,
    };
    // Sample on whole periods so the Floquet modulation does not bias the fit.
    let per = (horizon / problem.period).floor() as usize;
    let sub = 8;
    let times: Vec<f64> = (0..=per * sub).map(|k| k as f64 * problem.period / sub as f64).collect();
    let ev = evolve(&raw, &problem.equation, &times, problem.tol)?;
    let mut trace = plancherel_energy(&raw, &ev.trajectories, None, TraceKind::Plain)?;
    let e0 = trace.values[0];
    trace.values.iter_mut().for_each(|v| *v /= e0);
    let t_end = *times.last().unwrap();
    let (ts, vs): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&trace.values)
        .enumerate()
        .filter(|(k, (t, _))| *k % sub == 0 && **t >= 0.5 * t_end)
        .map(|(_, (t, v))| (*t, v.ln()))
        .unzip();
    let fit = ols_fit(&ts, &vs)?;
    let predicted = 2.0 * interval.max_growth_rate;
    let e_end = *trace.values.last().unwrap();
    Ok(GrowthDemo {
        fitted_rate: fit.slope,
        predicted_rate: predicted,
        relative_error: (fit.slope - predicted).abs() / predicted,
        log_ratio: e_end.ln() / t_end.ln(),
        r_squared: fit.r_squared,
        trace,
    })
}

/// True when the speed is periodic and not constant.
pub fn is_nonconstant_periodic(p: &CoefficientProfile) -> bool {
    p.period().is_some() && !p.is_constant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mathieu() -> HillProblem {
        HillProblem::new(Equation::new(CoefficientProfile::periodic_speed(1.0, 0.4, 2.0 * PI).unwrap()), None).unwrap()
    }

    #[test]
    fn constant_speed_discriminant() {
        let c = 1.3;
        let p = HillProblem::new(Equation::new(CoefficientProfile::constant(c).unwrap()), Some(2.0)).unwrap();
        for &l in &[0.0, 0.3, 2.0, 7.5] {
            let m = monodromy(&p, l).unwrap();
            assert!((m.trace() - 2.0 * (c * f64::sqrt(l) * 2.0).cos()).abs() < 1e-8);
        }
        let m0 = monodromy(&p, 0.0).unwrap();
        assert!((m0.entries[0][1] - 2.0).abs() < 1e-10 && m0.entries[1][0].abs() < 1e-12);
        assert!(instability_intervals(&p, 5.0, 200).unwrap().intervals.is_empty());
    }

    #[test]
    fn quadratic_formula_rate() {
        assert!((growth_rate_from(2.5, 1.0, 3.0) - 2f64.ln() / 3.0).abs() < 1e-15);
        assert_eq!(growth_rate_from(1.9, 1.0, 3.0), 0.0);
    }

    #[test]
    fn first_tongue_is_found() {
        let p = mathieu();
        let s = sample(&p, 0.25).unwrap();
        assert!(s.discriminant.abs() > 2.0);
        let scan = instability_intervals(&p, 1.5, 150).unwrap();
        let first = scan.intervals[0];
        assert!(first.lower < 0.25 && first.upper > 0.25);
        for edge in [first.lower, first.upper] {
            let s = sample(&p, edge).unwrap();
            assert!((s.discriminant.abs() - 2.0).abs() <= 1e-8, "{edge}: {}", s.discriminant);
        }
    }

    #[test]
    fn rate_matches_iterated_monodromy() {
        let p = mathieu();
        let m = monodromy(&p, 0.25).unwrap();
        let nu = growth_rate_at(&p, 0.25).unwrap();
        let slopes: Vec<f64> = (1..=20).map(|n| n as f64 * p.period).collect();
        let mut x = FundamentalMatrix::identity();
        let logs: Vec<f64> = (1..=20)
            .map(|_| {
                x = m.mul(&x);
                x.norm().ln()
            })
            .collect();
        let fit = ols_fit(&slopes, &logs).unwrap();
        assert!((fit.slope - nu).abs() < 0.01 * nu, "{} vs {nu}", fit.slope);
    }

    #[test]
    fn demo_preconditions() {
        let p = HillProblem::new(Equation::new(CoefficientProfile::constant(1.0).unwrap()), Some(1.0)).unwrap();
        let iv = InstabilityInterval {
            lower: 0.1,
            upper: 0.2,
            max_growth_rate: 0.0,
            peak_lambda: 0.15,
        };
        assert!(matches!(yagdjian_demo(&p, &iv, 100.0, 16), Err(Error::Precondition(_))));
    }
}
