//! Bundled scenarios and the theorem-to-check matrix.

use super::scenario::{self, Scenario};
use crate::error::{Error, Result};
use crate::rates::TheoremId;

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../scenarios/", $name, ".toml")))),*]
    };
}

/// (name, TOML text) of every bundled scenario.
pub const BUNDLED: &[(&str, &str)] = bundle!(
    "free_conservation",
    "free_dispersive",
    "yagdjian_growth",
    "borg_constant_speed",
    "hill_weak_modulation",
    "logsine_two_sided",
    "stabilisation_sine_power",
    "stabilisation_bump_sum",
    "noneffective_mu03",
    "overdamping_mu2",
    "modulated_noneffective",
    "effective_power_damping",
    "matsumura_unit_damping",
    "diffusion_nishihara",
    "diffusion_periodic",
    "diffusion_constants",
    "liouville_power_shape",
    "infrastructure_invariants",
);

pub fn find(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn parse_bundled(name: &str) -> Result<Scenario> {
    scenario::parse(find(name).ok_or_else(|| Error::Unknown(name.to_string()))?)
}

pub struct TheoremInfo {
    pub id: TheoremId,
    pub setting: &'static str,
    pub statement: &'static str,
    pub clock: &'static str,
    pub exponent: &'static str,
}

pub fn theorem(id: TheoremId) -> TheoremInfo {
    use TheoremId::*;
    let (setting, statement, clock, exponent) = match id {
        FreeStrichartz => (
            "a = 1, b = 0",
            "energy is conserved; L^p-L^q decay of (grad u, u_t) for conjugate 1 <= p <= 2",
            "1 + t",
            "(n-1)/2 (1/p - 1/q)",
        ),
        ReissigSmith => (
            "bounded speed with symbol-type derivative control, b = 0",
            "two-sided energy bound C1 E(0) <= E(t) <= C2 E(0) and the free L^p-L^q rate",
            "1 + t",
            "(n-1)/2 (1/p - 1/q)",
        ),
        ReissigYagdjian => (
            "increasing speed a = lambda(t) with admissible shape",
            "free rate in the shape clock, with an extra factor sqrt(lambda(t))",
            "Lambda(t) = 1 + int_0^t lambda",
            "(n-1)/2 (1/p - 1/q), times sqrt(lambda(t))",
        ),
        WirthNoneffective => (
            "non-effective damping, limsup t b(t) < 1/2",
            "solutions behave like free waves divided by beta(t) = exp int b; beta^2 E(t) tends to a non-zero limit",
            "1 + t (with 1/beta folded in for b = mu/(1+t))",
            "(n-1)/2 (1/p - 1/q) + mu",
        ),
        HirosawaNakazawa => (
            "over-damping, e.g. b = mu/(1+t) with mu > 1",
            "t²E(t) → 0 (t^2 E(t) -> 0): the energy decay saturates at exponent 2, which cannot be improved. Checked as t^2 E(1e4) < 0.5 t^2 E(1e2).",
            "1 + t",
            "2 for the energy (strict)",
        ),
        WirthEffective => (
            "effective damping, t b(t) -> infinity",
            "parabolic decay of u, grad u, u_t",
            "1 + int_0^t ds/b(s)",
            "n/2 (1/p - 1/q) + k + |alpha|/2",
        ),
        WirthPeriodic => (
            "periodic, a.e. positive damping",
            "parabolic decay as for constant damping",
            "1 + t",
            "n/2 (1/p - 1/q) + k + |alpha|/2",
        ),
        Matsumura => (
            "constant damping, L^1 and L^2 data",
            "heat-like decay of (1 + t)^{-(|alpha|/2 + k + n/4)} in L^2 and n/2 in place of n/4 in L^infinity",
            "1 + t",
            "|alpha|/2 + k + n/2 (1/p - 1/q), p = 1",
        ),
        NishiharaDiffusion => (
            "2b = 1, n = 3",
            "u - w - e^{-t/2} v decays one order faster than u, with w the heat solution of data u1 + u2 and v a free wave",
            "1 + t",
            "3/2 (1/p - 1/q) + 1",
        ),
        WirthDiffusion => (
            "periodic damping",
            "u - w with w_t = alpha Laplace w, w(0) = u1 + beta u2 gains one order of decay in L^2",
            "1 + t",
            "1 (L^2 deficit, L^2 data)",
        ),
    };
    TheoremInfo {
        id,
        setting,
        statement,
        clock,
        exponent,
    }
}

/// Bundled scenarios whose verify list names `id`.
pub fn scenarios_checking(id: TheoremId) -> Vec<&'static str> {
    BUNDLED
        .iter()
        .filter(|(_, text)| {
            scenario::parse(text)
                .map(|s| s.verify.iter().any(|v| v.theorem_id == id))
                .unwrap_or(false)
        })
        .map(|(n, _)| *n)
        .collect()
}

pub fn describe(id: &str) -> Result<String> {
    let id = TheoremId::parse(id)?;
    let info = theorem(id);
    let scen = scenarios_checking(id);
    let mut s = format!(
        "{}\n  setting:   {}\n  statement: {}\n  clock:     {}\n  exponent:  {}\n",
        id.as_str(),
        info.setting,
        info.statement,
        info.clock,
        info.exponent
    );
    if id == TheoremId::HirosawaNakazawa {
        s.push_str("  example:   over-damping b = 2/(1+t) (scenario overdamping_mu2)\n");
    }
    s.push_str(&format!(
        "  checked by: {}\n",
        if scen.is_empty() { "(no bundled scenario)".to_string() } else { scen.join(", ") }
    ));
    Ok(s)
}

pub fn list() -> String {
    let mut s = String::new();
    for (name, text) in BUNDLED {
        let desc = scenario::parse(text).map(|sc| sc.description).unwrap_or_default();
        s.push_str(&format!("{name:<28} {desc}\n"));
    }
    s.push_str("\ntheorem checks:\n");
    for id in TheoremId::ALL {
        let scen = scenarios_checking(id);
        s.push_str(&format!(
            "  {:<22} {}\n",
            id.as_str(),
            if scen.is_empty() { "-".to_string() } else { scen.join(", ") }
        ));
    }
    s
}
