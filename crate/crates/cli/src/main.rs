use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use nehari_core::fibering::{fiber_profile, sample_fiber};
use nehari_core::harness::{default_lambdas, run_pair, run_sweep, write_sweep_csv};
use nehari_core::nonlinearity::{default_hypothesis_grid, verify_hypotheses};
use nehari_core::orlicz::{dual_norm, orlicz_norm_bounds};
use nehari_core::solver::{homogeneous_ground_state, uniqueness_probe};
use nehari_core::{Config, GridFunction, ProblemSpec, SolveReport, SolverOptions};

#[derive(Parser)]
#[command(name = "nehari", version, about = "Two-solution radial solver for -Δu + V u = f'(u) + g")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Multiply the configured node count M by this factor.
    #[arg(long, default_value_t = 1)]
    grid_refine: usize,
    /// Seed for randomized probes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for both branches and write reports, profiles and levels.
    Solve(Common),
    /// Scale g by each λ and record both levels.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scale factors; defaults to 1, 1/2, …, 2^-10.
        #[arg(long)]
        lambda_list: Option<String>,
    },
    /// Sample the fibering map along the homogeneous ground state.
    Fiber(Common),
    /// Sum-space norm bounds of the computed solutions.
    Orlicz(Common),
    /// Check the structural hypotheses on the nonlinearity.
    VerifyF(Common),
}

fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        bail!("non-finite value {v} in {what}");
    }
    Ok(())
}

/// Rejects any non-finite number, then writes pretty JSON.
fn write_json(path: &Path, value: &Value) -> Result<()> {
    fn walk(v: &Value) -> bool {
        match v {
            Value::Number(n) => n.as_f64().map_or(true, f64::is_finite),
            Value::Array(a) => a.iter().all(walk),
            Value::Object(o) => o.values().all(walk),
            _ => true,
        }
    }
    if !walk(value) {
        bail!("non-finite number in {}", path.display());
    }
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_profile(path: &Path, u: &GridFunction) -> Result<()> {
    ensure_finite(&path.display().to_string(), u.values())?;
    let mut out = BufWriter::new(File::create(path)?);
    u.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn report_json(r: &SolveReport) -> Result<Value> {
    let s = r.summary();
    ensure_finite(
        "solve report",
        &[s.energy, s.residual, s.nehari_defect, s.second_variation_along_ray, s.mass_escape, s.v_norm],
    )?;
    Ok(serde_json::to_value(s)?)
}

fn prepare(common: &Common) -> Result<(Config, ProblemSpec)> {
    let config = Config::from_path(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    let spec = config.build_spec(common.grid_refine)?;
    spec.require_negative_potential()?;
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    Ok((config, spec))
}

fn solve(common: &Common) -> Result<()> {
    let (_, spec) = prepare(common)?;
    let opts = SolverOptions::default();
    let start = Instant::now();
    let pair = run_pair(&spec, &opts)?;
    let levels = pair.levels(&spec);
    let probe = uniqueness_probe(&spec, 10, common.seed, &opts)?;
    eprintln!("solved in {:.2?}", start.elapsed());
    ensure_finite(
        "levels",
        &[levels.m0, levels.m_v, levels.m_g, levels.m_1g, levels.bound_constant, levels.forcing_norm, levels.plus_norm_bound],
    )?;
    ensure_finite("uniqueness probe", &probe.energies)?;
    ensure_finite("uniqueness probe", &[probe.max_deviation, probe.reference_energy])?;

    let out = &common.out;
    write_json(&out.join("plus_report.json"), &report_json(&pair.plus)?)?;
    write_json(&out.join("minus_report.json"), &report_json(&pair.minus)?)?;
    write_profile(&out.join("plus_profile.csv"), &pair.plus.solution)?;
    write_profile(&out.join("minus_profile.csv"), &pair.minus.solution)?;
    write_json(&out.join("levels.json"), &serde_json::to_value(levels)?)?;
    write_json(&out.join("uniqueness.json"), &serde_json::to_value(&probe)?)?;

    let target = opts.residual_target(&spec);
    let mut failures = Vec::new();
    if !levels.branch_ordering {
        failures.push(format!("energies m_g = {} and m_1g = {} do not straddle 0", levels.m_g, levels.m_1g));
    }
    if !levels.ground_ordering {
        failures.push(format!("0 < m_V < m0 fails (m_V = {}, m0 = {})", levels.m_v, levels.m0));
    }
    if !levels.below_splitting {
        failures.push("m_1g < m_g + m0 fails".into());
    }
    for r in [&pair.plus, &pair.minus] {
        if r.residual > target {
            failures.push(format!("{:?} residual {:e} above {:e}", r.branch, r.residual, target));
        }
    }
    if spec.has_nonnegative_forcing() {
        for r in [&pair.plus, &pair.minus] {
            if r.solution.min_value() < -1e-8 {
                failures.push(format!("{:?} solution takes negative values", r.branch));
            }
        }
    }
    if !failures.is_empty() {
        bail!("invariant check failed: {}", failures.join("; "));
    }
    println!("m_g = {:.10e}  m_1g = {:.10e}", levels.m_g, levels.m_1g);
    Ok(())
}

fn parse_lambdas(list: Option<&str>) -> Result<Vec<f64>> {
    let Some(list) = list else {
        return Ok(default_lambdas());
    };
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad entry `{s}` in --lambda-list"))
        })
        .collect()
}

fn sweep(common: &Common, lambda_list: Option<&str>) -> Result<()> {
    let lambdas = parse_lambdas(lambda_list)?;
    let (config, spec) = prepare(common)?;
    let start = Instant::now();
    let sweep = run_sweep(&spec, &lambdas, &SolverOptions::default())?;
    eprintln!("swept {} rows in {:.2?}", sweep.records.len(), start.elapsed());
    for r in &sweep.records {
        ensure_finite("sweep row", &r.numbers())?;
    }
    let mut out = BufWriter::new(File::create(common.out.join("sweep.csv"))?);
    write_sweep_csv(&sweep.records, &mut out)?;
    out.flush()?;
    let meta = json!({
        "config": config,
        "grid_refine": common.grid_refine,
        "m_v": sweep.m_v,
        "m0": sweep.m0,
        "bound_constant": sweep.bound_constant,
        "forcing_norm": sweep.forcing_norm,
        "residual_target": sweep.residual_target,
        "rows": sweep.records.len(),
        "failed_rows": sweep.records.iter().filter(|r| r.status != "ok").count(),
    });
    write_json(&common.out.join("sweep_meta.json"), &meta)?;
    Ok(())
}

fn fiber(common: &Common) -> Result<()> {
    let (_, spec) = prepare(common)?;
    let ground = homogeneous_ground_state(&spec.homogeneous(), &SolverOptions::default())?;
    let u = &ground.solution;
    let profile = fiber_profile(u, &spec)?;
    let roots: Vec<f64> = [profile.t0, profile.t1, profile.t2].into_iter().flatten().collect();
    ensure_finite("fibering profile", &roots)?;
    ensure_finite(
        "fibering profile",
        &[profile.direction_norm, profile.g_pairing, profile.t_manifold, profile.margin],
    )?;
    let t_end = 1.25 * profile.t0.unwrap_or(2.0 * profile.t_manifold);
    let n = 400;
    let ts: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
    let samples = sample_fiber(u, &spec, &ts)?;
    let mut out = BufWriter::new(File::create(common.out.join("fiber.csv"))?);
    writeln!(out, "t,phi,dphi")?;
    for (t, phi, dphi) in samples {
        ensure_finite("fiber sample", &[t, phi, dphi])?;
        writeln!(out, "{t},{phi},{dphi}")?;
    }
    out.flush()?;
    let mut value = serde_json::to_value(profile)?;
    value["direction"] = json!("homogeneous_ground_state");
    write_json(&common.out.join("fiber_profile.json"), &value)?;
    Ok(())
}

fn orlicz(common: &Common) -> Result<()> {
    let (_, spec) = prepare(common)?;
    let pair = run_pair(&spec, &SolverOptions::default())?;
    let (p, q) = (spec.params.p, spec.params.q);
    let value = json!({
        "p": p,
        "q": q,
        "plus": orlicz_norm_bounds(&pair.plus.solution, p, q)?,
        "minus": orlicz_norm_bounds(&pair.minus.solution, p, q)?,
        "ground_v": orlicz_norm_bounds(&pair.ground_v.solution, p, q)?,
        "forcing_dual_norm": dual_norm(spec.forcing(), p, q),
    });
    write_json(&common.out.join("orlicz.json"), &value)
}

fn verify_f(common: &Common) -> Result<bool> {
    let config = Config::from_path(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    let params = config.params()?;
    fs::create_dir_all(&common.out)?;
    let report = verify_hypotheses(&params, &default_hypothesis_grid())?;
    write_json(&common.out.join("hypotheses.json"), &serde_json::to_value(&report)?)?;
    println!(
        "{} ({} failures on {} points)",
        if report.passed { "passed" } else { "FAILED" },
        report.failures.len(),
        report.checked_points
    );
    Ok(report.passed)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve(c) => solve(c),
        Command::Sweep {
            common,
            lambda_list,
        } => sweep(common, lambda_list.as_deref()),
        Command::Fiber(c) => fiber(c),
        Command::Orlicz(c) => orlicz(c),
        Command::VerifyF(c) => {
            if !verify_f(c)? {
                std::process::exit(1);
            }
            Ok(())
        }
    }
}
