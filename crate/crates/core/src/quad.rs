//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (i, (&x, &w)) in XGK[..7].iter().zip(WGK[..7].iter()).enumerate() {
        let dx = h * x;
        let s = f(c - dx) + f(c + dx);
        kronrod += w * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate drops below the tolerance. The bisection order only depends on
/// the integrand values, so results are reproducible bit for bit.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid(format!("non-finite quadrature bounds [{a}, {b}]")));
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut pieces: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    let mut total_err = e;
    while total_err > abs_tol {
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence {
                a,
                b,
                achieved: total_err,
                requested: abs_tol,
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = pieces[idx];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::QuadratureNonConvergence {
                a,
                b,
                achieved: total_err,
                requested: abs_tol,
            });
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        pieces[idx] = (lo, mid, v1, e1);
        pieces.push((mid, hi, v2, e2));
        // Re-summing avoids drift from repeated subtraction.
        total_err = pieces.iter().map(|p| p.3).sum();
    }
    let value = pieces.iter().map(|p| p.2).sum();
    Ok(QuadResult { value, error: total_err })
}

/// Cumulative integrals `∫_{grid[0]}^{grid[i]} f` for an increasing grid.
pub fn cumulative<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64], abs_tol: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    if let Some(&first) = grid.first() {
        out.push(0.0);
        let mut prev = first;
        for &t in &grid[1..] {
            if t < prev {
                return Err(Error::invalid("cumulative quadrature grid must be increasing"));
            }
            acc += integrate(&mut f, prev, t, abs_tol)?.value;
            out.push(acc);
            prev = t;
        }
    }
    Ok(out)
}

/// Gauss–Legendre nodes and weights on `[a, b]` (Newton iteration on P_n).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        // Ascending order.
        x[n - 1 - i] = mid + half * z;
        w[n - 1 - i] = 2.0 * half / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-12).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn kinked_integrand_converges() {
        // ∫_0^{10π} |sin x| dx = 20
        let r = integrate(|x: f64| x.sin().abs(), 0.0, 10.0 * std::f64::consts::PI, 1e-11).unwrap();
        assert!((r.value - 20.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn cumulative_matches_closed_form() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let c = cumulative(|x: f64| x.exp(), &grid, 1e-12).unwrap();
        for (t, v) in grid.iter().zip(&c) {
            assert!((v - (t.exp() - 1.0)).abs() < 1e-9 * t.exp());
        }
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(6, 0.0, 2.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(11)).sum();
        assert!((s - 2f64.powi(12) / 12.0).abs() < 1e-10);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
