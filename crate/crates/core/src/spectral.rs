//! Mode ensembles: frequency grids, Plancherel energies, spatial synthesis, L^q norms.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::coeffs::CoefficientProfile;
use crate::error::{Error, Result};
use crate::modeode::{fundamental_path, mode_energy, EnergyWeight, Equation, ModeState, ModeTrajectory, Stats};
use crate::quad::gauss_legendre;

/// Points of the low-frequency Gauss–Legendre cluster on [0, ρ_min].
pub const CLUSTER_POINTS: usize = 8;

/// c_n = |S^{n−1}|/(2π)^n.
pub fn plancherel_constant(n: usize) -> f64 {
    match n {
        1 => 1.0 / PI,
        2 => 1.0 / (2.0 * PI),
        3 => 1.0 / (2.0 * PI * PI),
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridSpec {
    /// Trapezoid in log ρ on [rho_min, rho_max], optionally with a cluster on [0, rho_min].
    Geometric {
        rho_min: f64,
        rho_max: f64,
        count: usize,
        cluster: bool,
    },
    /// Trapezoid on [0, rho_max].
    Uniform { rho_max: f64, count: usize },
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GridSpec::Geometric {
                rho_min, rho_max, count, ..
            } => {
                if !(rho_min > 0.0 && rho_max > rho_min && rho_max.is_finite() && count >= 2) {
                    return Err(Error::config("frequency_grid", "need 0 < min < max and count >= 2"));
                }
            }
            GridSpec::Uniform { rho_max, count } => {
                if !(rho_max > 0.0 && rho_max.is_finite() && count >= 2) {
                    return Err(Error::config("frequency_grid", "need max > 0 and count >= 2"));
                }
            }
        }
        Ok(())
    }

    /// The same grid with twice the density (2N − 1 nodes, containing the original).
    pub fn doubled(&self) -> Self {
        match *self {
            GridSpec::Geometric {
                rho_min,
                rho_max,
                count,
                cluster,
            } => GridSpec::Geometric {
                rho_min,
                rho_max,
                count: 2 * count - 1,
                cluster,
            },
            GridSpec::Uniform { rho_max, count } => GridSpec::Uniform {
                rho_max,
                count: 2 * count - 1,
            },
        }
    }

    fn main_count(&self) -> usize {
        match *self {
            GridSpec::Geometric { count, .. } | GridSpec::Uniform { count, .. } => count,
        }
    }
}

/// Node positions and plain dρ quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub spec: GridSpec,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let (mut nodes, mut weights) = (Vec::new(), Vec::new());
        match spec {
            GridSpec::Geometric {
                rho_min,
                rho_max,
                count,
                cluster,
            } => {
                if cluster {
                    let (x, w) = gauss_legendre(CLUSTER_POINTS, 0.0, rho_min);
                    nodes.extend(x);
                    weights.extend(w);
                }
                let h = (rho_max / rho_min).ln() / (count - 1) as f64;
                for i in 0..count {
                    let rho = if i == count - 1 { rho_max } else { rho_min * (h * i as f64).exp() };
                    let end = if i == 0 || i == count - 1 { 0.5 } else { 1.0 };
                    nodes.push(rho);
                    weights.push(end * h * rho);
                }
            }
            GridSpec::Uniform { rho_max, count } => {
                let h = rho_max / (count - 1) as f64;
                for i in 0..count {
                    let end = if i == 0 || i == count - 1 { 0.5 } else { 1.0 };
                    nodes.push(h * i as f64);
                    weights.push(end * h);
                }
            }
        }
        Ok(Self { spec, nodes, weights })
    }

    /// Indices of the undoubled grid inside this one, when this grid is a doubling.
    fn embedded_indices(&self, coarse: &GridSpec) -> Vec<usize> {
        let offset = self.nodes.len() - self.spec.main_count();
        let mut idx: Vec<usize> = (0..offset).collect();
        idx.extend((0..coarse.main_count()).map(|i| offset + 2 * i));
        idx
    }
}

/// Gaussian data u_j(x) = A_j exp(−|x − x0|²/σ²), shared width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianData {
    pub width: f64,
    pub amp_u1: f64,
    pub amp_u2: f64,
}

impl GaussianData {
    /// Fourier transform of the unit Gaussian of this width in n dimensions.
    pub fn hat(&self, n: usize, rho: f64) -> f64 {
        let s2 = self.width * self.width;
        (PI * s2).powf(n as f64 / 2.0) * (-s2 * rho * rho / 4.0).exp()
    }

    /// Spatial profile of the unit Gaussian.
    pub fn profile(&self, r: f64) -> f64 {
        (-(r * r) / (self.width * self.width)).exp()
    }
}

/// Discretized radial (or 1-D signed) spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub dimension: usize,
    /// ρ_i ≥ 0 (radial), or signed ξ_i for uniform 1-D data.
    pub nodes: Vec<f64>,
    /// Quadrature weights including c_n ρ^{n−1} (radial) or Δξ/(2π) (1-D).
    pub weights: Vec<f64>,
    pub u1_hat: Vec<Complex64>,
    pub u2_hat: Vec<Complex64>,
    /// Set for signed uniform 1-D data (FFT synthesis available).
    pub signed: bool,
    /// Characteristic spatial scale, used to size synthesis grids.
    pub length_scale: f64,
    /// Undoubled sub-grid: node indices and their weights.
    pub coarse: Option<(Vec<usize>, Vec<f64>)>,
}

impl SpectralData {
    /// Radial Gaussian data on a frequency grid.
    pub fn gaussian(dimension: usize, grid: &FrequencyGrid, g: GaussianData) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::config("dimension", "must be 1, 2 or 3"));
        }
        if !(g.width > 0.0 && g.width.is_finite()) {
            return Err(Error::config("data.width", "must be positive"));
        }
        let c = plancherel_constant(dimension);
        let weights: Vec<f64> = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .map(|(&r, &w)| w * c * r.powi(dimension as i32 - 1))
            .collect();
        let hat: Vec<f64> = grid.nodes.iter().map(|&r| g.hat(dimension, r)).collect();
        Ok(Self {
            dimension,
            nodes: grid.nodes.clone(),
            weights,
            u1_hat: hat.iter().map(|h| Complex64::new(g.amp_u1 * h, 0.0)).collect(),
            u2_hat: hat.iter().map(|h| Complex64::new(g.amp_u2 * h, 0.0)).collect(),
            signed: false,
            length_scale: g.width,
            coarse: None,
        })
    }

    /// Gaussian data on the doubled grid, remembering the embedded original grid.
    pub fn gaussian_with_doubling(dimension: usize, spec: GridSpec, g: GaussianData) -> Result<Self> {
        let fine = FrequencyGrid::new(spec.doubled())?;
        let coarse_grid = FrequencyGrid::new(spec)?;
        let mut data = Self::gaussian(dimension, &fine, g)?;
        let idx = fine.embedded_indices(&spec);
        let c = plancherel_constant(dimension);
        let w = idx
            .iter()
            .zip(&coarse_grid.weights)
            .map(|(&i, &q)| q * c * fine.nodes[i].powi(dimension as i32 - 1))
            .collect();
        data.coarse = Some((idx, w));
        Ok(data)
    }

    /// Signed uniform 1-D grid ξ_k = (k − N/2)Δξ with arbitrary amplitudes.
    pub fn uniform_1d(n: usize, dxi: f64, u1: impl Fn(f64) -> Complex64, u2: impl Fn(f64) -> Complex64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) || !(dxi > 0.0) {
            return Err(Error::invalid("uniform 1-D grid needs even N >= 2 and dxi > 0"));
        }
        let nodes: Vec<f64> = (0..n).map(|k| (k as f64 - (n / 2) as f64) * dxi).collect();
        Ok(Self {
            dimension: 1,
            weights: vec![dxi / (2.0 * PI); n],
            u1_hat: nodes.iter().map(|&x| u1(x)).collect(),
            u2_hat: nodes.iter().map(|&x| u2(x)).collect(),
            nodes,
            signed: true,
            length_scale: 2.0 * PI / (n as f64 * dxi),
            coarse: None,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The undoubled data set, when this data carries one.
    pub fn coarse_subset(&self) -> Option<(SpectralData, Vec<usize>)> {
        let (idx, w) = self.coarse.as_ref()?;
        let pick = |v: &Vec<Complex64>| idx.iter().map(|&i| v[i]).collect();
        Some((
            SpectralData {
                dimension: self.dimension,
                nodes: idx.iter().map(|&i| self.nodes[i]).collect(),
                weights: w.clone(),
                u1_hat: pick(&self.u1_hat),
                u2_hat: pick(&self.u2_hat),
                signed: self.signed,
                length_scale: self.length_scale,
                coarse: None,
            },
            idx.clone(),
        ))
    }

    pub fn initial_state(&self, i: usize) -> ModeState {
        ModeState::new(self.u1_hat[i], self.u2_hat[i])
    }
}

/// Trajectories of all nodes on shared output times.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub trajectories: Vec<ModeTrajectory>,
    pub stats: Stats,
}

impl Evolution {
    /// Restriction to a subset of nodes.
    pub fn subset(&self, idx: &[usize]) -> Evolution {
        Evolution {
            times: self.times.clone(),
            trajectories: idx.iter().map(|&i| self.trajectories[i].clone()).collect(),
            stats: self.stats,
        }
    }

    /// States of all nodes at output index k.
    pub fn states_at(&self, k: usize) -> Vec<ModeState> {
        self.trajectories.iter().map(|tr| tr.states[k]).collect()
    }
}

/// Integrates every node of `data` (in parallel, results in node order). The data are
/// prescribed at `times[0]`.
pub fn evolve(data: &SpectralData, equation: &Equation, times: &[f64], tol: f64) -> Result<Evolution> {
    // Modes only depend on λ = ρ², so ±ξ share one integration.
    let mut lambdas: Vec<f64> = data.nodes.iter().map(|x| x * x).collect();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lambdas.dedup();
    let paths = lambdas
        .par_iter()
        .map(|&l| fundamental_path(&equation.mode(l), times, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut stats = Stats::default();
    for (_, s) in &paths {
        stats.accepted += s.accepted;
        stats.rejected += s.rejected;
        stats.evaluations += s.evaluations;
    }
    let trajectories = (0..data.len())
        .map(|i| {
            let l = data.nodes[i] * data.nodes[i];
            let j = lambdas.binary_search_by(|x| x.partial_cmp(&l).unwrap()).expect("lambda present");
            let init = data.initial_state(i);
            ModeTrajectory {
                times: times.to_vec(),
                states: paths[j].0.iter().map(|x| x.apply(&init)).collect(),
                tol_used: tol,
                stats: paths[j].1,
            }
        })
        .collect();
    Ok(Evolution {
        times: times.to_vec(),
        trajectories,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// ½∫|∇u|² + |u_t|²
    Plain,
    /// ½∫|a∇u|² + |u_t|²
    Adapted,
    /// Adapted energy divided by a(t).
    Weighted,
    /// ‖u‖_{L²}
    NormU,
    /// ‖∇u‖_{L²}
    NormGrad,
    /// ‖u_t‖_{L²}
    NormUt,
    /// ‖u_t‖_{L^∞}
    SupUt,
    /// ‖u‖_{L^∞}
    SupU,
    /// ‖u‖_{L^q}, q < ∞
    LqU,
    /// ‖u_t‖_{L^q}, q < ∞
    LqUt,
    /// ‖u − w‖_{L²}
    Deficit,
}

impl TraceKind {
    /// True for quadratic quantities (energies), false for norms.
    pub fn is_energy(&self) -> bool {
        matches!(self, TraceKind::Plain | TraceKind::Adapted | TraceKind::Weighted)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TraceKind::Plain => "energy",
            TraceKind::Adapted => "adapted_energy",
            TraceKind::Weighted => "weighted_energy",
            TraceKind::NormU => "norm_u_l2",
            TraceKind::NormGrad => "norm_grad_l2",
            TraceKind::NormUt => "norm_ut_l2",
            TraceKind::SupUt => "norm_ut_linf",
            TraceKind::SupU => "norm_u_linf",
            TraceKind::LqU => "norm_u_lq",
            TraceKind::LqUt => "norm_ut_lq",
            TraceKind::Deficit => "deficit_l2",
        }
    }
}

/// A sampled non-negative quantity over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: TraceKind,
}

impl EnergyTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>, kind: TraceKind) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::GridMismatch("trace times and values differ in length".into()));
        }
        Ok(Self { times, values, kind })
    }

    /// Restriction to t in [lo, hi].
    pub fn window(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, v)| (*t, *v))
            .unzip()
    }

    /// Value at time t by linear interpolation.
    pub fn at(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&s| s < t);
        if i == self.times.len() {
            return None;
        }
        if self.times[i] == t || i == 0 {
            return (self.times[i] == t).then_some(self.values[i]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let s = (t - t0) / (t1 - t0);
        Some(self.values[i - 1] * (1.0 - s) + self.values[i] * s)
    }

    /// max_k |a_k − b_k| / |a_k| against another trace on the same times.
    pub fn max_relative_difference(&self, other: &EnergyTrace) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::GridMismatch("traces sampled at different times".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| if *a == 0.0 && *b == 0.0 { 0.0 } else { (a - b).abs() / a.abs() })
            .fold(0.0, f64::max))
    }
}

fn check_trajectories(data: &SpectralData, trajectories: &[ModeTrajectory]) -> Result<()> {
    if trajectories.len() != data.len() {
        return Err(Error::GridMismatch(format!(
            "{} trajectories for {} nodes",
            trajectories.len(),
            data.len()
        )));
    }
    if let Some(first) = trajectories.first() {
        if trajectories.iter().any(|t| t.times != first.times) {
            return Err(Error::GridMismatch("trajectories do not share output times".into()));
        }
    }
    Ok(())
}

/// E(t_k) = Σ_i w_i·e(state_{i,k}).
pub fn plancherel_energy(
    data: &SpectralData,
    trajectories: &[ModeTrajectory],
    speed: Option<&CoefficientProfile>,
    kind: TraceKind,
) -> Result<EnergyTrace> {
    check_trajectories(data, trajectories)?;
    if !kind.is_energy() {
        return Err(Error::invalid("plancherel_energy needs an energy kind"));
    }
    let times = trajectories.first().map(|t| t.times.clone()).unwrap_or_default();
    let mut values = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let a = match (kind, speed) {
            (TraceKind::Plain, _) | (_, None) => 1.0,
            (_, Some(s)) => s.eval(t, 0)?,
        };
        let weight = if kind == TraceKind::Plain { EnergyWeight::Plain } else { EnergyWeight::Adapted };
        let mut e = 0.0;
        for (i, tr) in trajectories.iter().enumerate() {
            e += data.weights[i] * mode_energy(&tr.states[k], data.nodes[i] * data.nodes[i], a, weight);
        }
        if kind == TraceKind::Weighted {
            e /= a;
        }
        values.push(e);
    }
    EnergyTrace::new(times, values, kind)
}

/// L² norms of u, ∇u or u_t by Plancherel.
pub fn l2_norm_trace(data: &SpectralData, trajectories: &[ModeTrajectory], kind: TraceKind) -> Result<EnergyTrace> {
    check_trajectories(data, trajectories)?;
    let times = trajectories.first().map(|t| t.times.clone()).unwrap_or_default();
    let values = (0..times.len())
        .map(|k| {
            let s: f64 = trajectories
                .iter()
                .enumerate()
                .map(|(i, tr)| {
                    let st = &tr.states[k];
                    let q = match kind {
                        TraceKind::NormU => st.v.norm_sqr(),
                        TraceKind::NormGrad => data.nodes[i] * data.nodes[i] * st.v.norm_sqr(),
                        TraceKind::NormUt => st.v_dot.norm_sqr(),
                        _ => f64::NAN,
                    };
                    data.weights[i] * q
                })
                .sum();
            s.sqrt()
        })
        .collect::<Vec<f64>>();
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("l2_norm_trace supports NormU, NormGrad, NormUt"));
    }
    EnergyTrace::new(times, values, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldComponent {
    U,
    Ut,
}

/// Field samples on a uniform spatial grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub dimension: usize,
    pub component: FieldComponent,
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
}

fn uniform_spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::GridMismatch("spatial grid needs at least two points".into()));
    }
    let h = grid[1] - grid[0];
    let ok = h > 0.0 && grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(grid[0].abs() * 1e-3));
    if !ok {
        return Err(Error::GridMismatch("spatial grid must be uniform and increasing".into()));
    }
    Ok(h)
}

/// The x-grid conjugate to a signed uniform ξ-grid: Δx·Δξ = 2π/N.
pub fn conjugate_grid(data: &SpectralData) -> Result<Vec<f64>> {
    if !data.signed {
        return Err(Error::GridMismatch("conjugate grid needs signed uniform 1-D data".into()));
    }
    let n = data.len();
    let dxi = data.nodes[1] - data.nodes[0];
    let dx = 2.0 * PI / (n as f64 * dxi);
    Ok((0..n).map(|j| (j as f64 - (n / 2) as f64) * dx).collect())
}

fn select(states: &[ModeState], component: FieldComponent) -> Vec<Complex64> {
    states
        .iter()
        .map(|s| match component {
            FieldComponent::U => s.v,
            FieldComponent::Ut => s.v_dot,
        })
        .collect()
}

/// Inverse discrete Fourier synthesis on the conjugate x-grid.
pub fn synthesize_1d(
    data: &SpectralData,
    t: f64,
    states: &[ModeState],
    x_grid: &[f64],
    component: FieldComponent,
) -> Result<FieldSnapshot> {
    let expected = conjugate_grid(data)?;
    if states.len() != data.len() || x_grid.len() != expected.len() {
        return Err(Error::GridMismatch("x-grid or state count does not match the ξ-grid".into()));
    }
    let dx = expected[1] - expected[0];
    if x_grid.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-9 * dx) {
        return Err(Error::GridMismatch("x-grid is not conjugate to the ξ-grid".into()));
    }
    let n = data.len();
    let half = n / 2;
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut buf: Vec<Complex64> = select(states, component)
        .iter()
        .enumerate()
        .map(|(k, v)| v * sign(k))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let dxi = data.nodes[1] - data.nodes[0];
    let c = dxi / (2.0 * PI);
    let values = buf.iter().enumerate().map(|(j, v)| v * (c * sign(j + half))).collect();
    Ok(FieldSnapshot {
        t,
        dimension: 1,
        component,
        grid: x_grid.to_vec(),
        values,
    })
}

/// Forward transform of a 1-D snapshot back onto the ξ-grid of `data`.
pub fn analyze_1d(data: &SpectralData, snapshot: &FieldSnapshot) -> Result<Vec<Complex64>> {
    let expected = conjugate_grid(data)?;
    if snapshot.grid.len() != expected.len() {
        return Err(Error::GridMismatch("snapshot grid does not match the ξ-grid".into()));
    }
    let n = data.len();
    let half = n / 2;
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut buf: Vec<Complex64> = snapshot.values.iter().enumerate().map(|(j, v)| v * sign(j)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dx = expected[1] - expected[0];
    Ok(buf.iter().enumerate().map(|(k, v)| v * (dx * sign(k + half))).collect())
}

/// u(r) = Σ_i w_i sinc(rρ_i) û_i for radial 3-D data; r = 0 uses the limit Σ w_i û_i.
pub fn synthesize_radial3d(
    data: &SpectralData,
    t: f64,
    states: &[ModeState],
    r_grid: &[f64],
    component: FieldComponent,
) -> Result<FieldSnapshot> {
    if data.dimension != 3 || data.signed {
        return Err(Error::GridMismatch("radial synthesis needs n = 3 radial data".into()));
    }
    if states.len() != data.len() {
        return Err(Error::GridMismatch("state count does not match the node count".into()));
    }
    uniform_spacing(r_grid)?;
    let r_max = r_grid.iter().cloned().fold(0.0, f64::max);
    let spacing = data.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if r_max * spacing > PI {
        log::warn!("radial synthesis under-resolved: max(r)·max(Δρ) = {:.3} > π", r_max * spacing);
    }
    let amp = select(states, component);
    let values = r_grid
        .iter()
        .map(|&r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..data.len() {
                let x = r * data.nodes[i];
                let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                acc += amp[i] * (data.weights[i] * sinc);
            }
            acc
        })
        .collect();
    Ok(FieldSnapshot {
        t,
        dimension: 3,
        component,
        grid: r_grid.to_vec(),
        values,
    })
}

/// ‖f‖_{L^q} by the trapezoid rule (with 4πr² for radial 3-D); q = ∞ gives the max.
pub fn lq_norm(snapshot: &FieldSnapshot, q: f64, dimension: usize) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::invalid("q must be in [1, ∞]"));
    }
    let h = uniform_spacing(&snapshot.grid)?;
    let abs: Vec<f64> = snapshot.values.iter().map(|v| v.norm()).collect();
    let peak = abs.iter().cloned().fold(0.0, f64::max);
    let edge = abs.last().cloned().unwrap_or(0.0).max(if dimension == 1 { abs[0] } else { 0.0 });
    if peak > 0.0 && edge > 1e-10 * peak {
        log::warn!("lq_norm: field tail {:.2e} of peak at the grid edge; support may be truncated", edge / peak);
    }
    if q.is_infinite() {
        return Ok(peak);
    }
    let n = abs.len();
    let mut acc = 0.0;
    for (i, (&a, &x)) in abs.iter().zip(&snapshot.grid).enumerate() {
        let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let measure = match dimension {
            1 => 1.0,
            3 => 4.0 * PI * x * x,
            _ => return Err(Error::invalid("lq_norm supports dimensions 1 and 3")),
        };
        acc += end * measure * a.powf(q);
    }
    Ok((acc * h).powf(1.0 / q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataComponent {
    U1,
    U2,
}

/// ‖⟨D⟩^{r_p} u_j‖_{L^p} for p ∈ {1, 2}.
pub fn data_norm(data: &SpectralData, r_p: f64, p: u32, which: DataComponent) -> Result<f64> {
    let hat = match which {
        DataComponent::U1 => &data.u1_hat,
        DataComponent::U2 => &data.u2_hat,
    };
    let mult = |i: usize| (1.0 + data.nodes[i] * data.nodes[i]).powf(r_p / 2.0);
    match p {
        2 => Ok((0..data.len())
            .map(|i| data.weights[i] * (mult(i) * hat[i]).norm_sqr())
            .sum::<f64>()
            .sqrt()),
        1 => {
            let states: Vec<ModeState> = (0..data.len())
                .map(|i| ModeState::new(hat[i] * mult(i), Complex64::new(0.0, 0.0)))
                .collect();
            let snap = if data.signed {
                let x = conjugate_grid(data)?;
                synthesize_1d(data, 0.0, &states, &x, FieldComponent::U)?
            } else if data.dimension == 3 {
                let r_max = 12.0 * data.length_scale;
                let spacing = data.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                let n = ((r_max / (0.02 * data.length_scale)).ceil() as usize).max(200);
                if r_max * spacing > PI {
                    return Err(Error::GridMismatch("frequency grid too coarse for an r-space L^1 norm".into()));
                }
                let r: Vec<f64> = (0..=n).map(|i| r_max * i as f64 / n as f64).collect();
                synthesize_radial3d(data, 0.0, &states, &r, FieldComponent::U)?
            } else {
                return Err(Error::invalid("L^1 data norms need signed 1-D or radial 3-D data"));
            };
            lq_norm(&snap, 1.0, data.dimension)
        }
        _ => Err(Error::invalid("data_norm supports p = 1 and p = 2")),
    }
}

/// Writes traces sharing one time axis as CSV: t, then one column per trace.
pub fn write_traces_csv(path: &Path, traces: &[&EnergyTrace]) -> Result<()> {
    let Some(first) = traces.first() else {
        return Err(Error::invalid("no traces to write"));
    };
    if traces.iter().any(|t| t.times != first.times) {
        return Err(Error::GridMismatch("traces in one CSV must share times".into()));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<&str> = traces.iter().map(|t| t.kind.label()).collect();
    writeln!(out, "t,{}", header.join(","))?;
    for (k, t) in first.times.iter().enumerate() {
        write!(out, "{t:e}")?;
        for tr in traces {
            write!(out, ",{:e}", tr.values[k])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a snapshot as CSV: x_or_r, re, im.
pub fn write_snapshot_csv(path: &Path, snap: &FieldSnapshot) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{},re,im", if snap.dimension == 1 { "x" } else { "r" })?;
    for (x, v) in snap.grid.iter().zip(&snap.values) {
        writeln!(out, "{x:e},{:e},{:e}", v.re, v.im)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modeode::integrate_mode;

    #[test]
    fn single_node_energy() {
        let data = SpectralData {
            dimension: 1,
            nodes: vec![2.0],
            weights: vec![1.0],
            u1_hat: vec![Complex64::new(1.0, 0.0)],
            u2_hat: vec![Complex64::new(0.0, 0.0)],
            signed: false,
            length_scale: 1.0,
            coarse: None,
        };
        let times: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ev = evolve(&data, &Equation::free(), &times, 1e-11).unwrap();
        let e = plancherel_energy(&data, &ev.trajectories, None, TraceKind::Plain).unwrap();
        assert!(e.values.iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn geometric_grid_integrates_gaussian_moment() {
        let grid = FrequencyGrid::new(GridSpec::Geometric {
            rho_min: 1e-3,
            rho_max: 8.0,
            count: 256,
            cluster: true,
        })
        .unwrap();
        // ∫₀^∞ ρ² e^{−ρ²} dρ = √π/4
        let s: f64 = grid.nodes.iter().zip(&grid.weights).map(|(r, w)| w * r * r * (-r * r).exp()).sum();
        assert!((s - PI.sqrt() / 4.0).abs() < 1e-9, "{s}");
    }

    #[test]
    fn doubling_embeds_the_original_grid() {
        let spec = GridSpec::Geometric {
            rho_min: 1e-2,
            rho_max: 4.0,
            count: 16,
            cluster: true,
        };
        let g = GaussianData {
            width: 1.0,
            amp_u1: 1.0,
            amp_u2: 0.0,
        };
        let fine = SpectralData::gaussian_with_doubling(3, spec, g).unwrap();
        let (coarse, _) = fine.coarse_subset().unwrap();
        let direct = SpectralData::gaussian(3, &FrequencyGrid::new(spec).unwrap(), g).unwrap();
        for (a, b) in coarse.nodes.iter().zip(&direct.nodes) {
            assert!((a - b).abs() <= 1e-14 * b);
        }
        for (a, b) in coarse.weights.iter().zip(&direct.weights) {
            assert!((a - b).abs() <= 1e-14 * b);
        }
    }

    #[test]
    fn radial_gaussian_pair() {
        let grid = FrequencyGrid::new(GridSpec::Uniform { rho_max: 14.0, count: 701 }).unwrap();
        let g = GaussianData {
            width: 1.0,
            amp_u1: 1.0,
            amp_u2: 0.0,
        };
        let data = SpectralData::gaussian(3, &grid, g).unwrap();
        let states: Vec<ModeState> = (0..data.len()).map(|i| data.initial_state(i)).collect();
        let r: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
        let snap = synthesize_radial3d(&data, 0.0, &states, &r, FieldComponent::U).unwrap();
        for (x, v) in r.iter().zip(&snap.values) {
            assert!((v.re - (-x * x).exp()).abs() < 1e-6, "r={x}");
        }
    }

    #[test]
    fn fft_roundtrip_and_gaussian_pair() {
        let n = 256;
        let dxi = 0.1;
        let g = GaussianData {
            width: 1.0,
            amp_u1: 1.0,
            amp_u2: 0.0,
        };
        let data = SpectralData::uniform_1d(n, dxi, |x| Complex64::new(g.hat(1, x), 0.0), |_| Complex64::new(0.0, 0.0)).unwrap();
        let x = conjugate_grid(&data).unwrap();
        let states: Vec<ModeState> = (0..n).map(|i| data.initial_state(i)).collect();
        let snap = synthesize_1d(&data, 0.0, &states, &x, FieldComponent::U).unwrap();
        for (xi, v) in x.iter().zip(&snap.values) {
            assert!((v.re - (-xi * xi).exp()).abs() < 1e-8);
            assert!(v.im.abs() < 1e-10);
        }
        let back = analyze_1d(&data, &snap).unwrap();
        for (a, b) in back.iter().zip(&data.u1_hat) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn lq_norm_examples() {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let snap = FieldSnapshot {
            t: 0.0,
            dimension: 1,
            component: FieldComponent::U,
            values: vec![Complex64::new(1.0, 0.0); grid.len()],
            grid,
        };
        assert!((lq_norm(&snap, 2.0, 1).unwrap() - 1.0).abs() < 1e-12);
        let grid: Vec<f64> = (0..=4000).map(|i| -10.0 + i as f64 * 0.005).collect();
        let gauss = FieldSnapshot {
            values: grid.iter().map(|x| Complex64::new((-x * x).exp(), 0.0)).collect(),
            grid,
            ..snap
        };
        assert!((lq_norm(&gauss, 2.0, 1).unwrap() - (PI / 2.0).powf(0.25)).abs() < 1e-10);
        assert!((lq_norm(&gauss, f64::INFINITY, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn data_norms() {
        let data = SpectralData {
            dimension: 1,
            nodes: vec![0.0],
            weights: vec![1.0],
            u1_hat: vec![Complex64::new(1.0, 0.0)],
            u2_hat: vec![Complex64::new(0.0, 0.0)],
            signed: false,
            length_scale: 1.0,
            coarse: None,
        };
        assert_eq!(data_norm(&data, 0.0, 2, DataComponent::U1).unwrap(), 1.0);
        let grid = FrequencyGrid::new(GridSpec::Uniform { rho_max: 14.0, count: 1401 }).unwrap();
        let g = GaussianData {
            width: 1.0,
            amp_u1: 1.0,
            amp_u2: 0.0,
        };
        let d3 = SpectralData::gaussian(3, &grid, g).unwrap();
        // ‖e^{−r²}‖_{L²(R³)} = (π/2)^{3/4}
        assert!((data_norm(&d3, 0.0, 2, DataComponent::U1).unwrap() - (PI / 2.0).powf(0.75)).abs() < 1e-8);
        // ‖e^{−r²}‖_{L¹(R³)} = π^{3/2}
        assert!((data_norm(&d3, 0.0, 1, DataComponent::U1).unwrap() - PI.powf(1.5)).abs() < 1e-5);
    }

    #[test]
    fn plancherel_rejects_mismatch() {
        let data = SpectralData {
            dimension: 1,
            nodes: vec![1.0, 2.0],
            weights: vec![1.0, 1.0],
            u1_hat: vec![Complex64::new(1.0, 0.0); 2],
            u2_hat: vec![Complex64::new(0.0, 0.0); 2],
            signed: false,
            length_scale: 1.0,
            coarse: None,
        };
        let p = Equation::free().mode(1.0);
        let tr = integrate_mode(&p, ModeState::real(1.0, 0.0), &[0.0, 1.0], 1e-10).unwrap();
        assert!(matches!(
            plancherel_energy(&data, &[tr], None, TraceKind::Plain),
            Err(Error::GridMismatch(_))
        ));
    }
}
