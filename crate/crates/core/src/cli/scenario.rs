//! Scenario files: TOML schema, number parsing and validation.

use std::f64::consts::PI;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coeffs::{geometric_grid, CoefficientProfile, Family};
use crate::error::{Error, Result};
use crate::floquet::HillProblem;
use crate::modeode::{Equation, MAX_TOL, MIN_TOL};
use crate::rates::{predict, PredictionContext, TheoremId};
use crate::spectral::{GaussianData, GridSpec, TraceKind};

/// A real read from a TOML number or a decimal string ("1e-3", "inf", "2pi").
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Num {
    pub fn parse(s: &str) -> Option<f64> {
        let s = s.trim();
        if let Some(head) = s.strip_suffix("pi") {
            let head = head.trim().trim_end_matches('*');
            let m = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
            return Some(m * PI);
        }
        s.parse::<f64>().ok().filter(|v| !v.is_nan())
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a decimal string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Num, E> {
                Num::parse(v)
                    .map(Num)
                    .ok_or_else(|| E::custom(format!("'{v}' is not a decimal number")))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant { value: Num },
    LogSine { c0: Num, c1: Num },
    SinePower { c0: Num, c1: Num, alpha: Num },
    BumpSum { p: Num, q: Num, count: usize },
    PowerShape { ell: Num },
    InverseDamping { mu: Num },
    PowerDamping { gamma: Num },
    PeriodicDamping { b0: Num, b1: Num, period: Num },
    ModulatedDamping { mu0: Num, alpha: Num },
    PeriodicSpeed { c0: Num, eps: Num, period: Num },
    /// Damping obtained from a shape by the Liouville transform.
    LiouvilleDamping { shape: Box<CoefficientSpec> },
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<CoefficientProfile> {
        use CoefficientSpec::*;
        match self {
            Constant { value } => CoefficientProfile::constant(value.0),
            LogSine { c0, c1 } => CoefficientProfile::log_sine(c0.0, c1.0),
            SinePower { c0, c1, alpha } => CoefficientProfile::sine_power(c0.0, c1.0, alpha.0),
            BumpSum { p, q, count } => CoefficientProfile::bump_sum(p.0, q.0, *count),
            PowerShape { ell } => CoefficientProfile::power_shape(ell.0),
            InverseDamping { mu } => CoefficientProfile::inverse_damping(mu.0),
            PowerDamping { gamma } => CoefficientProfile::power_damping(gamma.0),
            PeriodicDamping { b0, b1, period } => CoefficientProfile::periodic_damping(b0.0, b1.0, period.0),
            ModulatedDamping { mu0, alpha } => CoefficientProfile::modulated_damping(mu0.0, alpha.0),
            PeriodicSpeed { c0, eps, period } => CoefficientProfile::periodic_speed(c0.0, eps.0, period.0),
            LiouvilleDamping { shape } => CoefficientProfile::liouville_damping(shape.build()?),
        }
    }
}

fn default_speed() -> CoefficientSpec {
    CoefficientSpec::Constant { value: Num(1.0) }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSpec {
    #[serde(default = "default_speed")]
    pub speed: CoefficientSpec,
    #[serde(default)]
    pub damping: Option<CoefficientSpec>,
    #[serde(default)]
    pub mass: Option<CoefficientSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default = "gaussian")]
    pub family: String,
    pub width: Num,
    pub u1: Num,
    pub u2: Num,
}

fn gaussian() -> String {
    "gaussian".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Geometric,
    Uniform,
}

fn geometric() -> Spacing {
    Spacing::Geometric
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGridSpec {
    #[serde(default = "geometric")]
    pub spacing: Spacing,
    #[serde(default)]
    pub min: Option<Num>,
    pub max: Num,
    pub count: usize,
    #[serde(default = "yes")]
    pub clustering: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSpec {
    pub t_max: Num,
    pub samples: usize,
    #[serde(default = "geometric")]
    pub spacing: Spacing,
    /// First positive output time of a geometric grid.
    #[serde(default)]
    pub t_first: Option<Num>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionMode {
    /// α = β = 1 (2b ≡ 1)
    Nishihara,
    /// α̂, β̂ from the small-λ Floquet extrapolation
    Estimated,
    /// α, β given in the scenario
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldQuantity {
    U,
    Ut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Speed,
    Damping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    InvT,
    InvTDamping,
    ShapeRatio,
    Xi,
}

fn num(v: f64) -> Num {
    Num(v)
}
fn n_one() -> Num {
    num(1.0)
}
fn n_hundred() -> Num {
    num(100.0)
}
fn n_1e4() -> Num {
    num(1e4)
}
fn n_two() -> Num {
    num(2.0)
}
fn scan_points() -> usize {
    400
}
fn growth_modes() -> usize {
    32
}
fn plain() -> Vec<TraceKind> {
    vec![TraceKind::Plain]
}
fn plain_kind() -> TraceKind {
    TraceKind::Plain
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisSpec {
    Energy {
        #[serde(default = "plain")]
        quantities: Vec<TraceKind>,
        /// Bound on max |E(t)/E(0) − 1| for the first energy quantity.
        #[serde(default)]
        conservation_tol: Option<Num>,
        /// Report lim β²E and check its convergence.
        #[serde(default)]
        scattering: bool,
    },
    Dispersive {
        p: Num,
        q: Num,
        quantity: FieldQuantity,
        /// Radial step of the synthesis grid, in units of the data width.
        #[serde(default)]
        r_step: Option<Num>,
    },
    Floquet {
        lambda_max: Num,
        /// Period for constant coefficients.
        #[serde(default)]
        period: Option<Num>,
        #[serde(default = "scan_points")]
        scan_points: usize,
        #[serde(default)]
        growth_demo: bool,
        #[serde(default)]
        horizon: Option<Num>,
        #[serde(default = "growth_modes")]
        modes: usize,
        /// |fitted − 2ν|/2ν bound for the growth demo.
        #[serde(default)]
        rate_tolerance: Option<Num>,
        /// Lower bound on log E(T)/log T for the growth demo.
        #[serde(default)]
        log_ratio_min: Option<Num>,
        /// Upper bound on max(|Δ| − 2) over the scan.
        #[serde(default)]
        discriminant_bound: Option<Num>,
        #[serde(default)]
        min_intervals: Option<usize>,
    },
    Diffusion {
        mode: DiffusionMode,
        #[serde(default)]
        alpha: Option<Num>,
        #[serde(default)]
        beta: Option<Num>,
        /// Subtract e^{−t/2}·(free wave) as well.
        #[serde(default)]
        free_wave: bool,
        /// Factor applied to α for the control run.
        #[serde(default)]
        perturb_alpha: Option<Num>,
        #[serde(default)]
        min_gain: Option<Num>,
        #[serde(default)]
        max_perturbed_gain: Option<Num>,
        #[serde(default)]
        window: Option<[Num; 2]>,
    },
    /// Small-λ estimate of (α, β) for the scenario damping.
    DiffusionConstants {
        #[serde(default)]
        expected_alpha: Option<Num>,
        #[serde(default)]
        expected_beta: Option<Num>,
        #[serde(default)]
        tolerance: Option<Num>,
        #[serde(default)]
        levels: Option<usize>,
    },
    Liouville {
        #[serde(default = "n_one")]
        lambda_spec: Num,
        #[serde(default = "n_hundred")]
        horizon: Num,
        #[serde(default)]
        tol: Option<Num>,
        #[serde(default = "n_1e4")]
        check_time: Num,
        #[serde(default)]
        limit_tolerance: Option<Num>,
        #[serde(default)]
        residual_bound: Option<Num>,
    },
    Classify {
        #[serde(default = "n_1e4")]
        t_max: Num,
        #[serde(default)]
        expect: Option<String>,
    },
    Symbol {
        weight: WeightSpec,
        #[serde(default = "n_two")]
        power: Num,
        max_order: usize,
        #[serde(default = "speed_target")]
        target: Target,
        #[serde(default = "n_1e4")]
        t_max: Num,
    },
    Stabilisation {
        limit: Num,
        #[serde(default = "n_1e4")]
        t_max: Num,
        #[serde(default)]
        expected: Option<Num>,
        #[serde(default)]
        tolerance: Option<Num>,
        #[serde(default)]
        max_exponent: Option<Num>,
    },
    Invariants {
        #[serde(default)]
        abel: bool,
        #[serde(default)]
        parseval: bool,
        #[serde(default)]
        doubling: bool,
        #[serde(default)]
        abel_tol: Option<Num>,
        #[serde(default)]
        parseval_tol: Option<Num>,
        #[serde(default)]
        doubling_tol: Option<Num>,
    },
}

fn speed_target() -> Target {
    Target::Speed
}

impl AnalysisSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisSpec::Energy { .. } => "energy",
            AnalysisSpec::Dispersive { .. } => "dispersive",
            AnalysisSpec::Floquet { .. } => "floquet",
            AnalysisSpec::Diffusion { .. } => "diffusion",
            AnalysisSpec::DiffusionConstants { .. } => "diffusion_constants",
            AnalysisSpec::Liouville { .. } => "liouville",
            AnalysisSpec::Classify { .. } => "classify",
            AnalysisSpec::Symbol { .. } => "symbol",
            AnalysisSpec::Stabilisation { .. } => "stabilisation",
            AnalysisSpec::Invariants { .. } => "invariants",
        }
    }

    fn needs_evolution(&self) -> bool {
        match self {
            AnalysisSpec::Energy { .. } | AnalysisSpec::Dispersive { .. } | AnalysisSpec::Diffusion { .. } => true,
            AnalysisSpec::Invariants { parseval, doubling, .. } => *parseval || *doubling,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub theorem_id: TheoremId,
    pub tolerance: Num,
    #[serde(default = "plain_kind")]
    pub quantity: TraceKind,
    #[serde(default = "n_two")]
    pub p: Num,
    #[serde(default = "n_two")]
    pub q: Num,
    #[serde(default)]
    pub k: u32,
    #[serde(default)]
    pub alpha: u32,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub window: Option<[Num; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub dimension: usize,
    #[serde(default)]
    pub tol: Option<Num>,
    pub equation: EquationSpec,
    #[serde(default)]
    pub data: Option<DataSpec>,
    #[serde(default)]
    pub frequency_grid: Option<FrequencyGridSpec>,
    #[serde(default)]
    pub time_grid: Option<TimeGridSpec>,
    #[serde(default)]
    pub analyses: Vec<AnalysisSpec>,
    #[serde(default)]
    pub verify: Vec<VerifySpec>,
}

/// A scenario with every profile built and every cross-field constraint checked.
#[derive(Debug, Clone)]
pub struct Validated {
    pub scenario: Scenario,
    pub equation: Equation,
    pub tol: f64,
    pub data: Option<GaussianData>,
    pub grid: Option<GridSpec>,
    pub times: Vec<f64>,
    pub needs_evolution: bool,
    pub doubling: bool,
}

fn field(name: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::config(name, other.to_string()),
    }
}

fn cfg(name: &str, msg: impl Into<String>) -> Error {
    Error::config(name, msg)
}

pub fn parse(text: &str) -> Result<Scenario> {
    toml::from_str(text).map_err(|e| {
        let span = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        Error::Config {
            field: if span > 0 { format!("line {span}") } else { "scenario".into() },
            message: e.message().to_string(),
        }
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Scenario {
    pub fn validate(self, tol_override: Option<f64>) -> Result<Validated> {
        let s = self;
        if s.name.trim().is_empty() {
            return Err(cfg("name", "must not be empty"));
        }
        if !(1..=3).contains(&s.dimension) {
            return Err(cfg("dimension", "must be 1, 2 or 3"));
        }
        let tol = tol_override.or(s.tol.map(|t| t.0)).unwrap_or(crate::modeode::DEFAULT_TOL);
        if !(MIN_TOL..=MAX_TOL).contains(&tol) {
            return Err(cfg(
                if tol_override.is_some() { "--tol-override" } else { "tol" },
                format!("{tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]"),
            ));
        }
        let speed = s.equation.speed.build().map_err(|e| field("equation.speed", e))?;
        if matches!(speed.family(), Family::InverseDamping { .. } | Family::PowerDamping { .. } | Family::PeriodicDamping { .. } | Family::ModulatedDamping { .. } | Family::LiouvilleDamping { .. }) {
            return Err(cfg("equation.speed", format!("{} is a damping family", speed.name())));
        }
        let mut equation = Equation::new(speed.clone());
        let damping = match &s.equation.damping {
            Some(d) => Some(d.build().map_err(|e| field("equation.damping", e))?),
            None => None,
        };
        if let Some(b) = &damping {
            equation = equation.with_damping(b.clone());
        }
        if let Some(m) = &s.equation.mass {
            equation = equation.with_mass(m.build().map_err(|e| field("equation.mass", e))?);
        }
        let domain_start = damping.as_ref().map(|b| b.domain_start()).unwrap_or(0.0);
        if domain_start > 0.0 && !matches!(speed.family(), Family::Constant { .. }) {
            return Err(cfg("equation.damping", "Liouville-derived damping needs a constant speed"));
        }

        let needs_evolution = s.analyses.iter().any(|a| a.needs_evolution()) || !s.verify.is_empty();
        let doubling = s
            .analyses
            .iter()
            .any(|a| matches!(a, AnalysisSpec::Invariants { doubling: true, .. }));
        let data = match &s.data {
            Some(d) => {
                if d.family != "gaussian" {
                    return Err(cfg("data.family", format!("unsupported family '{}'", d.family)));
                }
                if !(d.width.0 > 0.0 && d.width.0.is_finite()) {
                    return Err(cfg("data.width", "must be positive"));
                }
                if !(d.u1.0.is_finite() && d.u2.0.is_finite()) || (d.u1.0 == 0.0 && d.u2.0 == 0.0) {
                    return Err(cfg("data", "u1, u2 amplitudes must be finite and not both zero"));
                }
                Some(GaussianData {
                    width: d.width.0,
                    amp_u1: d.u1.0,
                    amp_u2: d.u2.0,
                })
            }
            None if needs_evolution => return Err(cfg("data", "required by the requested analyses")),
            None => None,
        };
        let grid = match &s.frequency_grid {
            Some(g) => {
                let spec = match g.spacing {
                    Spacing::Geometric => GridSpec::Geometric {
                        rho_min: g.min.ok_or_else(|| cfg("frequency_grid.min", "required for geometric spacing"))?.0,
                        rho_max: g.max.0,
                        count: g.count,
                        cluster: g.clustering,
                    },
                    Spacing::Uniform => GridSpec::Uniform {
                        rho_max: g.max.0,
                        count: g.count,
                    },
                };
                spec.validate()?;
                Some(spec)
            }
            None if needs_evolution => return Err(cfg("frequency_grid", "required by the requested analyses")),
            None => None,
        };
        let times = match &s.time_grid {
            Some(tg) => build_times(tg, domain_start)?,
            None if needs_evolution => return Err(cfg("time_grid", "required by the requested analyses")),
            None => Vec::new(),
        };
        if !s.verify.is_empty() {
            let first = times.iter().cloned().find(|&t| t > domain_start).unwrap_or(f64::INFINITY) - domain_start;
            let t_max = times.last().cloned().unwrap_or(0.0) - domain_start;
            if !(t_max >= 100.0 * first * (1.0 - 1e-12)) {
                return Err(cfg("time_grid", "rate fits need t_max >= 100x the first output time"));
            }
        }

        let mut available: Vec<TraceKind> = Vec::new();
        for (i, a) in s.analyses.iter().enumerate() {
            let at = |f: &str| format!("analyses[{i}].{f}");
            match a {
                AnalysisSpec::Energy {
                    quantities,
                    scattering,
                    ..
                } => {
                    if quantities.is_empty() {
                        return Err(cfg(&at("quantities"), "must not be empty"));
                    }
                    if let Some(q) = quantities.iter().find(|q| {
                        !matches!(
                            q,
                            TraceKind::Plain
                                | TraceKind::Adapted
                                | TraceKind::Weighted
                                | TraceKind::NormU
                                | TraceKind::NormGrad
                                | TraceKind::NormUt
                        )
                    }) {
                        return Err(cfg(&at("quantities"), format!("{} is not an energy or L2 quantity", q.label())));
                    }
                    if *scattering && !quantities[0].is_energy() {
                        return Err(cfg(&at("scattering"), "needs an energy as the first quantity"));
                    }
                    available.extend(quantities.iter().copied());
                }
                AnalysisSpec::Dispersive { p, q, quantity, .. } => {
                    if s.dimension != 3 {
                        return Err(cfg(&at("kind"), "dispersive synthesis needs dimension = 3"));
                    }
                    if !(q.0 >= 1.0) || !(p.0 >= 1.0) {
                        return Err(cfg(&at("q"), "p and q must be >= 1"));
                    }
                    let Some(GridSpec::Uniform { rho_max, count }) = grid else {
                        return Err(cfg("frequency_grid.spacing", "dispersive synthesis needs a uniform grid"));
                    };
                    let width = data.map(|d| d.width).unwrap_or(1.0);
                    let r_max = times.last().cloned().unwrap_or(0.0) + 8.0 * width;
                    let drho = rho_max / (count - 1) as f64;
                    if r_max * drho >= PI {
                        return Err(cfg(
                            "frequency_grid.count",
                            format!("max(r)·Δρ = {:.3} must stay below π for synthesis up to t_max", r_max * drho),
                        ));
                    }
                    available.push(match (quantity, q.0.is_infinite()) {
                        (FieldQuantity::U, true) => TraceKind::SupU,
                        (FieldQuantity::Ut, true) => TraceKind::SupUt,
                        (FieldQuantity::U, false) => TraceKind::LqU,
                        (FieldQuantity::Ut, false) => TraceKind::LqUt,
                    });
                }
                AnalysisSpec::Floquet {
                    lambda_max,
                    period,
                    scan_points,
                    growth_demo,
                    horizon,
                    ..
                } => {
                    let hp = HillProblem::new(equation.clone(), period.map(|p| p.0)).map_err(|e| field(&at("kind"), e))?;
                    if !(lambda_max.0 > 0.0) || *scan_points < 100 {
                        return Err(cfg(&at("lambda_max"), "need lambda_max > 0 and scan_points >= 100"));
                    }
                    if *growth_demo && horizon.map(|h| h.0 < 10.0 * hp.period).unwrap_or(true) {
                        return Err(cfg(&at("horizon"), "growth demo needs a horizon of at least ten periods"));
                    }
                }
                AnalysisSpec::Diffusion {
                    mode,
                    alpha,
                    free_wave,
                    ..
                } => {
                    let Some(b) = &damping else {
                        return Err(cfg("equation.damping", format!("{} requires damping", at("kind"))));
                    };
                    match mode {
                        DiffusionMode::Nishihara => {
                            if !matches!(b.family(), Family::Constant { value } if *value == 0.5) {
                                return Err(cfg("equation.damping", "nishihara mode needs constant damping b = 1/2"));
                            }
                        }
                        DiffusionMode::Estimated => {
                            if b.period().is_none() && !b.is_constant() {
                                return Err(cfg("equation.damping", "estimated diffusion constants need periodic damping"));
                            }
                        }
                        DiffusionMode::Given => {
                            if !alpha.map(|a| a.0 > 0.0).unwrap_or(false) {
                                return Err(cfg(&at("alpha"), "given mode needs alpha > 0"));
                            }
                        }
                    }
                    if *free_wave && (s.dimension != 3 || *mode != DiffusionMode::Nishihara) {
                        return Err(cfg(&at("free_wave"), "the free-wave term is defined for n = 3, 2b = 1"));
                    }
                    available.extend([TraceKind::NormU, TraceKind::Deficit]);
                }
                AnalysisSpec::DiffusionConstants { levels, .. } => {
                    let Some(b) = &damping else {
                        return Err(cfg("equation.damping", format!("{} requires damping", at("kind"))));
                    };
                    if b.period().is_none() && !b.is_constant() {
                        return Err(cfg("equation.damping", "diffusion constants need periodic or constant damping"));
                    }
                    if levels.is_some_and(|l| !(2..=12).contains(&l)) {
                        return Err(cfg(&at("levels"), "must be in 2..=12"));
                    }
                }
                AnalysisSpec::Liouville { horizon, .. } => {
                    if !matches!(speed.family(), Family::PowerShape { .. } | Family::Constant { .. }) {
                        return Err(cfg("equation.speed", "liouville analysis needs a power or constant shape"));
                    }
                    if !(horizon.0 > 0.0) {
                        return Err(cfg(&at("horizon"), "must be positive"));
                    }
                }
                AnalysisSpec::Classify { t_max, .. } => {
                    if damping.is_none() {
                        return Err(cfg("equation.damping", format!("{} requires damping", at("kind"))));
                    }
                    if !(t_max.0 >= 1e3) {
                        return Err(cfg(&at("t_max"), "classification needs t_max >= 1e3"));
                    }
                }
                AnalysisSpec::Symbol { target, weight, .. } => {
                    if *target == Target::Damping && damping.is_none() {
                        return Err(cfg("equation.damping", format!("{} targets the damping", at("target"))));
                    }
                    if *weight == WeightSpec::ShapeRatio && !matches!(speed.family(), Family::PowerShape { .. }) {
                        return Err(cfg(&at("weight"), "shape_ratio needs a power_shape speed"));
                    }
                }
                AnalysisSpec::Stabilisation { limit, t_max, .. } => {
                    if !(limit.0 > 0.0) || !(t_max.0 > 10.0) {
                        return Err(cfg(&at("limit"), "need limit > 0 and t_max > 10"));
                    }
                }
                AnalysisSpec::Invariants { parseval, doubling, .. } => {
                    if *parseval && s.dimension != 3 {
                        return Err(cfg(&at("parseval"), "the Parseval check uses radial synthesis (n = 3)"));
                    }
                    if *doubling && !matches!(grid, Some(GridSpec::Uniform { .. })) && s.analyses.iter().any(|a| matches!(a, AnalysisSpec::Dispersive { .. })) {
                        return Err(cfg(&at("doubling"), "doubling with dispersive synthesis needs a uniform grid"));
                    }
                }
            }
        }

        let ctx = PredictionContext {
            damping: damping.clone(),
            shape: matches!(speed.family(), Family::PowerShape { .. }).then(|| speed.clone()),
        };
        for (i, v) in s.verify.iter().enumerate() {
            let at = |f: &str| format!("verify[{i}].{f}");
            if !available.contains(&v.quantity) {
                return Err(cfg(&at("quantity"), format!("no analysis produces {}", v.quantity.label())));
            }
            if !(v.tolerance.0 > 0.0) {
                return Err(cfg(&at("tolerance"), "must be positive"));
            }
            let needs_damping = matches!(
                v.theorem_id,
                TheoremId::WirthNoneffective
                    | TheoremId::HirosawaNakazawa
                    | TheoremId::WirthEffective
                    | TheoremId::WirthPeriodic
                    | TheoremId::Matsumura
                    | TheoremId::NishiharaDiffusion
                    | TheoremId::WirthDiffusion
            );
            if needs_damping && damping.is_none() {
                return Err(cfg("equation.damping", format!("{} requires damping", v.theorem_id.as_str())));
            }
            if v.theorem_id == TheoremId::FreeStrichartz && (damping.is_some() || !speed.is_constant()) {
                return Err(cfg(&at("theorem_id"), "free_strichartz needs constant speed and no damping"));
            }
            if v.theorem_id == TheoremId::WirthPeriodic && damping.as_ref().and_then(|b| b.period()).is_none() {
                return Err(cfg(&at("theorem_id"), "wirth_periodic needs periodic damping"));
            }
            if v.theorem_id == TheoremId::ReissigYagdjian && ctx.shape.is_none() {
                return Err(cfg(&at("theorem_id"), "reissig_yagdjian needs a power_shape speed"));
            }
            predict(v.theorem_id, v.n.unwrap_or(s.dimension), v.p.0, v.q.0, v.k, v.alpha, &ctx).map_err(|e| field(&at("theorem_id"), e))?;
            if let Some([lo, hi]) = v.window {
                if !(lo.0 > 0.0 && hi.0 > lo.0) {
                    return Err(cfg(&at("window"), "need 0 < lo < hi"));
                }
            }
        }

        Ok(Validated {
            equation,
            tol,
            data,
            grid,
            times,
            needs_evolution,
            doubling,
            scenario: s,
        })
    }
}

fn build_times(tg: &TimeGridSpec, offset: f64) -> Result<Vec<f64>> {
    let t_max = tg.t_max.0;
    if !(t_max > 0.0 && t_max.is_finite()) || tg.samples < 2 {
        return Err(cfg("time_grid", "need t_max > 0 and samples >= 2"));
    }
    let mut t = vec![0.0];
    match tg.spacing {
        Spacing::Geometric => {
            let first = tg.t_first.map(|v| v.0).unwrap_or(1.0);
            if !(first > 0.0 && first < t_max) {
                return Err(cfg("time_grid.t_first", "need 0 < t_first < t_max"));
            }
            t.extend(geometric_grid(first, t_max, tg.samples));
        }
        Spacing::Uniform => t.extend((1..=tg.samples).map(|k| t_max * k as f64 / tg.samples as f64)),
    }
    Ok(t.into_iter().map(|v| v + offset).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_from_strings() {
        assert_eq!(Num::parse("1e-3"), Some(1e-3));
        assert_eq!(Num::parse("inf"), Some(f64::INFINITY));
        assert_eq!(Num::parse("2pi"), Some(2.0 * PI));
        assert_eq!(Num::parse("pi"), Some(PI));
        assert_eq!(Num::parse("nan"), None);
        assert_eq!(Num::parse("1,5"), None);
    }

    #[test]
    fn diffusion_without_damping_names_field() {
        let text = r#"
            name = "x"
            dimension = 3
            [equation]
            speed = { family = "constant", value = "1" }
            [data]
            width = "1"
            u1 = "1"
            u2 = "0"
            [frequency_grid]
            min = "1e-3"
            max = "8"
            count = 16
            [time_grid]
            t_max = "100"
            samples = 20
            [[analyses]]
            kind = "diffusion"
            mode = "nishihara"
        "#;
        let err = parse(text).unwrap().validate(None).unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "equation.damping"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let err = parse("name = \"x\"\ndimension = \"three\"\n").unwrap_err();
        assert!(err.to_string().contains("line 2") || err.to_string().contains("dimension"), "{err}");
    }
}
