//! Experiment drivers shared by the command line and the acceptance suite.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fibering::fiber_profile;
use crate::grid::ProblemSpec;
use crate::solver::{
    homogeneous_ground_state, plus_bound_constant, solve_minus_from, solve_plus, SolveReport,
    SolverOptions,
};

/// Both solutions together with the homogeneous ground states `ū` (same `V`)
/// and `ω` (`V ≡ 0`).
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub plus: SolveReport,
    pub minus: SolveReport,
    pub ground_v: SolveReport,
    pub ground_free: SolveReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Levels {
    pub m0: f64,
    pub m_v: f64,
    pub m_g: f64,
    pub m_1g: f64,
    /// `0 < m_V < m₀`.
    pub ground_ordering: bool,
    /// `m_g < 0 < m_{1,g}`.
    pub branch_ordering: bool,
    /// `m_{1,g} < m_g + m₀`.
    pub below_splitting: bool,
    pub bound_constant: f64,
    pub forcing_norm: f64,
    pub plus_norm: f64,
    /// `M ‖g‖_{2N/(N+2)}`.
    pub plus_norm_bound: f64,
}

impl PairOutcome {
    pub fn levels(&self, spec: &ProblemSpec) -> Levels {
        let (m0, m_v) = (self.ground_free.energy, self.ground_v.energy);
        let (m_g, m_1g) = (self.plus.energy, self.minus.energy);
        let bound_constant = plus_bound_constant(spec);
        let forcing_norm = spec.forcing_norm();
        Levels {
            m0,
            m_v,
            m_g,
            m_1g,
            ground_ordering: 0.0 < m_v && m_v < m0,
            branch_ordering: m_g < 0.0 && 0.0 < m_1g,
            below_splitting: m_1g < m_g + m0,
            bound_constant,
            forcing_norm,
            plus_norm: self.plus.v_norm,
            plus_norm_bound: bound_constant * forcing_norm,
        }
    }
}

pub fn run_pair(spec: &ProblemSpec, opts: &SolverOptions) -> Result<PairOutcome> {
    spec.require_negative_potential()?;
    let ground_free = homogeneous_ground_state(&spec.free(), opts)?;
    let ground_v = homogeneous_ground_state(&spec.homogeneous(), opts)?;
    let plus = solve_plus(spec, opts)?;
    let minus = solve_minus_from(spec, &ground_v.solution, opts)?;
    Ok(PairOutcome {
        plus,
        minus,
        ground_v,
        ground_free,
    })
}

/// `λ = 2⁰, 2⁻¹, …, 2⁻¹⁰`.
pub fn default_lambdas() -> Vec<f64> {
    (0..=10).map(|k| 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub lambda: f64,
    /// `m_{λg}`.
    pub m_plus: Option<f64>,
    /// `m_{1,λg}`.
    pub m_minus: Option<f64>,
    pub u_plus_norm: Option<f64>,
    pub u_minus_norm: Option<f64>,
    pub residual_plus: Option<f64>,
    pub residual_minus: Option<f64>,
    /// Fibering margin `φ₀'(T) - λ∫gu` along the minus solution.
    pub margin: Option<f64>,
    /// `M λ ‖g‖_{2N/(N+2)}`.
    pub plus_bound: f64,
    /// `|m_{1,λg} - m_V|`.
    pub gap: Option<f64>,
    /// `m_{1,λg} < m_{λg} + m₀`.
    pub below_splitting: Option<bool>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub m_v: f64,
    pub m0: f64,
    pub bound_constant: f64,
    pub forcing_norm: f64,
    pub residual_target: f64,
    pub records: Vec<SweepRecord>,
}

fn sweep_row(
    spec: &ProblemSpec,
    lambda: f64,
    ground: &SolveReport,
    m0: f64,
    bound: f64,
    opts: &SolverOptions,
) -> SweepRecord {
    let mut row = SweepRecord {
        lambda,
        m_plus: None,
        m_minus: None,
        u_plus_norm: None,
        u_minus_norm: None,
        residual_plus: None,
        residual_minus: None,
        margin: None,
        plus_bound: bound * lambda,
        gap: None,
        below_splitting: None,
        status: String::new(),
    };
    let mut problems = Vec::new();
    let scaled = spec.scaled_forcing(lambda);
    if lambda == 0.0 {
        row.m_plus = Some(0.0);
        row.u_plus_norm = Some(0.0);
        row.residual_plus = Some(0.0);
    } else {
        match solve_plus(&scaled, opts) {
            Ok(r) => {
                row.m_plus = Some(r.energy);
                row.u_plus_norm = Some(r.v_norm);
                row.residual_plus = Some(r.residual);
            }
            Err(e) => problems.push(format!("plus: {e}")),
        }
    }
    let minus = if lambda == 0.0 {
        Ok(ground.clone())
    } else {
        solve_minus_from(&scaled, &ground.solution, opts)
    };
    match minus {
        Ok(r) => {
            row.m_minus = Some(r.energy);
            row.u_minus_norm = Some(r.v_norm);
            row.residual_minus = Some(r.residual);
            row.gap = Some((r.energy - ground.energy).abs());
            match fiber_profile(&r.solution, &scaled) {
                Ok(p) => row.margin = Some(p.margin),
                Err(e) => problems.push(format!("margin: {e}")),
            }
            if let Some(mp) = row.m_plus {
                row.below_splitting = Some(r.energy < mp + m0);
            }
        }
        Err(e) => problems.push(format!("minus: {e}")),
    }
    let target = opts.residual_target(&scaled);
    for (name, res) in [("plus", row.residual_plus), ("minus", row.residual_minus)] {
        if let Some(r) = res {
            if r > target {
                problems.push(format!("{name} residual {r:e} above {target:e}"));
            }
        }
    }
    row.status = if problems.is_empty() {
        "ok".into()
    } else {
        problems.join("; ")
    };
    row
}

/// Solves both branches for every `λ g`, in parallel, rows sorted by decreasing `λ`.
/// A `λ = 0` row is always present; it carries `m_V`.
pub fn run_sweep(spec: &ProblemSpec, lambdas: &[f64], opts: &SolverOptions) -> Result<SweepOutput> {
    spec.require_negative_potential()?;
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidProblem(format!(
            "sweep factors must be finite and nonnegative, got {bad}"
        )));
    }
    let ground = homogeneous_ground_state(&spec.homogeneous(), opts)?;
    let m0 = homogeneous_ground_state(&spec.free(), opts)?.energy;
    let bound_constant = plus_bound_constant(spec);
    let forcing_norm = spec.forcing_norm();
    let bound = bound_constant * forcing_norm;

    let mut all: Vec<f64> = lambdas.to_vec();
    if !all.contains(&0.0) {
        all.push(0.0);
    }
    all.sort_by(|a, b| b.total_cmp(a));
    all.dedup();
    let records: Vec<SweepRecord> = all
        .par_iter()
        .map(|&lambda| sweep_row(spec, lambda, &ground, m0, bound, opts))
        .collect();
    Ok(SweepOutput {
        m_v: ground.energy,
        m0,
        bound_constant,
        forcing_norm,
        residual_target: opts.residual_target(spec),
        records,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub const SWEEP_HEADER: &str = "lambda,m_plus,m_minus,u_plus_norm,u_minus_norm,residual_plus,residual_minus,margin,plus_bound,gap,below_splitting,status";

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{:e},{},{},{},{},{},{},{},{:e},{},{},\"{}\"",
            r.lambda,
            cell(r.m_plus),
            cell(r.m_minus),
            cell(r.u_plus_norm),
            cell(r.u_minus_norm),
            cell(r.residual_plus),
            cell(r.residual_minus),
            cell(r.margin),
            r.plus_bound,
            cell(r.gap),
            r.below_splitting.map(|b| b.to_string()).unwrap_or_default(),
            r.status.replace('"', "'"),
        )?;
    }
    Ok(())
}

impl SweepRecord {
    /// All numeric fields, for finiteness checks.
    pub fn numbers(&self) -> Vec<f64> {
        [
            Some(self.lambda),
            self.m_plus,
            self.m_minus,
            self.u_plus_norm,
            self.u_minus_norm,
            self.residual_plus,
            self.residual_minus,
            self.margin,
            Some(self.plus_bound),
            self.gap,
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}
