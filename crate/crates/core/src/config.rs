//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments run to end of line
//! N = 3
//! R_max = 30
//! M = 3000
//! p = 5.5
//! q = 6.5
//! eps = 0.5
//! mu1 = 5.5
//! V_profile = gaussian
//! V_amplitude = -1
//! g_profile = gaussian
//! g_amplitude = 0.01
//! ```
//!
//! Optional keys: `V_width`, `g_width` (default 1), `boundary`
//! (`harmonic_exterior` or `dirichlet`), `exponent_t` (default `N`),
//! `exponent_s` (default 2). Unknown and repeated keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{sobolev_constant, GridFunction, OuterBoundary, ProblemSpec, RadialGrid};
use crate::nonlinearity::DoublePowerParams;

const REQUIRED: [&str; 11] = [
    "N",
    "R_max",
    "M",
    "p",
    "q",
    "eps",
    "mu1",
    "V_profile",
    "V_amplitude",
    "g_profile",
    "g_amplitude",
];

const OPTIONAL: [&str; 5] = ["V_width", "g_width", "boundary", "exponent_t", "exponent_s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `a exp(-(r/w)²)`
    Gaussian,
    /// `a exp(1 - 1/(1 - (r/w)²))` for `r < w`, zero beyond.
    CompactBump,
    /// `a (1 + (r/w)²)^{-2}`
    PowerTail,
}

impl FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "compact_bump" => Ok(Self::CompactBump),
            "power_tail" => Ok(Self::PowerTail),
            other => Err(format!(
                "unknown profile `{other}` (expected gaussian, compact_bump or power_tail)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Profile {
    pub kind: ProfileKind,
    pub amplitude: f64,
    pub width: f64,
}

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        let x = r / self.width;
        let shape = match self.kind {
            ProfileKind::Gaussian => (-x * x).exp(),
            ProfileKind::CompactBump => {
                if x < 1.0 {
                    (1.0 - 1.0 / (1.0 - x * x)).exp()
                } else {
                    0.0
                }
            }
            ProfileKind::PowerTail => (1.0 + x * x).powi(-2),
        };
        self.amplitude * shape
    }

    pub fn sample(&self, grid: &Arc<RadialGrid>) -> GridFunction {
        GridFunction::from_fn(grid, |r| self.eval(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub dim: usize,
    pub r_max: f64,
    pub nodes: usize,
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub mu1: f64,
    pub potential: Profile,
    pub forcing: Profile,
    pub boundary: OuterBoundary,
    pub exponent_t: f64,
    pub exponent_s: f64,
}

fn parse_value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = map
        .get(key)
        .ok_or_else(|| Error::config(key, "missing required key"))?;
    raw.parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))
}

fn parse_or<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if map.contains_key(key) {
        parse_value(map, key)
    } else {
        Ok(default)
    }
}

fn positive(key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {value}")))
    }
}

fn finite(key: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(key, format!("must be finite, got {value}")))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::config(key, "given more than once"));
            }
        }
        if let Some(missing) = REQUIRED.iter().find(|k| !map.contains_key(**k)) {
            return Err(Error::config(*missing, "missing required key"));
        }

        let dim: usize = parse_value(&map, "N")?;
        let boundary = match map.get("boundary").map(String::as_str) {
            None | Some("harmonic_exterior") => OuterBoundary::HarmonicExterior,
            Some("dirichlet") => OuterBoundary::Dirichlet,
            Some(other) => {
                return Err(Error::config(
                    "boundary",
                    format!("unknown boundary `{other}` (expected harmonic_exterior or dirichlet)"),
                ))
            }
        };
        let profile = |prefix: &str| -> Result<Profile> {
            let kind_key = format!("{prefix}_profile");
            let amp_key = format!("{prefix}_amplitude");
            let width_key = format!("{prefix}_width");
            Ok(Profile {
                kind: parse_value(&map, &kind_key)?,
                amplitude: finite(&amp_key, parse_value(&map, &amp_key)?)?,
                width: positive(&width_key, parse_or(&map, &width_key, 1.0)?)?,
            })
        };
        Ok(Self {
            dim,
            r_max: positive("R_max", parse_value(&map, "R_max")?)?,
            nodes: parse_value(&map, "M")?,
            p: parse_value(&map, "p")?,
            q: parse_value(&map, "q")?,
            eps: parse_value(&map, "eps")?,
            mu1: parse_value(&map, "mu1")?,
            potential: profile("V")?,
            forcing: profile("g")?,
            boundary,
            exponent_t: parse_or(&map, "exponent_t", dim as f64)?,
            exponent_s: parse_or(&map, "exponent_s", 2.0)?,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> Result<DoublePowerParams> {
        DoublePowerParams::new(self.dim, self.p, self.q, self.eps, self.mu1).map_err(|e| match e {
            Error::InvalidParams(msg) => Error::config("N, p, q, eps, mu1", msg),
            other => other,
        })
    }

    /// The configured grid with `refine` times as many nodes.
    pub fn grid(&self, refine: usize) -> Result<Arc<RadialGrid>> {
        if refine == 0 {
            return Err(Error::config("grid-refine", "must be at least 1"));
        }
        RadialGrid::with_boundary(self.dim, self.r_max, self.nodes * refine, self.boundary).map_err(
            |e| match e {
                Error::InvalidGrid(msg) => Error::config("N, R_max, M", msg),
                other => other,
            },
        )
    }

    /// Builds and validates the problem, reporting invariant violations by key.
    pub fn build_spec(&self, refine: usize) -> Result<ProblemSpec> {
        let params = self.params()?;
        let grid = self.grid(refine)?;
        if self.potential.amplitude > 0.0 {
            return Err(Error::config(
                "V_amplitude",
                format!(
                    "invariant V ≤ 0 violated: amplitude {} makes V positive",
                    self.potential.amplitude
                ),
            ));
        }
        let potential = self.potential.sample(&grid);
        let n = self.dim as f64;
        let norm = potential.lp_norm(n / 2.0);
        let s = sobolev_constant(self.dim);
        if !(norm < s) {
            return Err(Error::config(
                "V_amplitude",
                format!("condition ‖V‖_{{L^{{N/2}}}} < S violated: ‖V‖_{{N/2}} = {norm} ≥ S = {s}"),
            ));
        }
        let forcing = self.forcing.sample(&grid);
        ProblemSpec::new(params, potential, forcing, self.exponent_t, self.exponent_s).map_err(
            |e| match e {
                Error::InvalidProblem(msg) if msg.contains("exponent t") => {
                    Error::config("exponent_t", msg)
                }
                Error::InvalidProblem(msg) if msg.contains("exponent s") => {
                    Error::config("exponent_s", msg)
                }
                other => other,
            },
        )
    }
}
