//! The two solutions: the small minimizer on the plus branch and the
//! mountain-pass-level minimizer on the minus branch, plus the homogeneous
//! ground states used as reference levels.
//!
//! The minus branch is reached by descent on the reduced functional
//! `w ↦ E(t1(w) w)`, stepping along the Sobolev gradient
//! `d = (-Δ_h + V)⁻¹ E'(u)` and re-projecting after every step. Near the
//! solution a Newton polish on the full equation brings the node-wise residual
//! to the requested tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fibering::FiberMap;
use crate::grid::{energy_gradient, v_norm_sq, GridFunction, ProblemSpec};
use crate::tridiag::{Ldlt, SymTridiag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Node-wise residual target, multiplied by `1 + max|g|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative size `‖d‖_V / ‖u‖_V` of the descent direction below which
    /// Newton is attempted.
    pub newton_switch: f64,
    pub max_newton: usize,
    /// Radius for [`mass_escape_diagnostic`]; `None` means `R_max / 2`.
    pub escape_radius: Option<f64>,
    /// Descent aborts once the escaped fraction exceeds this.
    pub escape_limit: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100_000,
            newton_switch: 1e-3,
            max_newton: 40,
            escape_radius: None,
            escape_limit: 0.5,
        }
    }
}

impl SolverOptions {
    pub fn residual_target(&self, spec: &ProblemSpec) -> f64 {
        self.tolerance * (1.0 + spec.forcing().max_abs())
    }

    fn radius(&self, spec: &ProblemSpec) -> f64 {
        self.escape_radius.unwrap_or(0.5 * spec.grid().r_max())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionBranch {
    Plus,
    Minus,
    Homogeneous,
}

impl SolutionBranch {
    fn name(self) -> &'static str {
        match self {
            SolutionBranch::Plus => "plus",
            SolutionBranch::Minus => "minus",
            SolutionBranch::Homogeneous => "homogeneous",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GridFunction,
    pub energy: f64,
    pub branch: SolutionBranch,
    /// Max-norm of the energy gradient.
    pub residual: f64,
    /// `|⟨E'(u), u⟩|`.
    pub nehari_defect: f64,
    /// `φ''(1)` for the ray through the solution.
    pub second_variation_along_ray: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub mass_escape: f64,
    /// `‖u‖_V`.
    pub v_norm: f64,
    /// Reduced-functional values at accepted descent steps (empty for plus).
    pub descent_history: Vec<f64>,
}

/// JSON view of a [`SolveReport`] without the profile.
#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub branch: SolutionBranch,
    pub energy: f64,
    pub residual: f64,
    pub nehari_defect: f64,
    pub second_variation_along_ray: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub mass_escape: f64,
    pub v_norm: f64,
    pub min_value: f64,
    pub max_value: f64,
}

impl SolveReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            branch: self.branch,
            energy: self.energy,
            residual: self.residual,
            nehari_defect: self.nehari_defect,
            second_variation_along_ray: self.second_variation_along_ray,
            iterations: self.iterations,
            newton_steps: self.newton_steps,
            mass_escape: self.mass_escape,
            v_norm: self.v_norm,
            min_value: self.solution.min_value(),
            max_value: self.solution.max_value(),
        }
    }
}

/// Fraction of `∫|∇u|²` carried by faces beyond `rho`, the exterior tail included.
pub fn mass_escape_diagnostic(u: &GridFunction, rho: f64) -> f64 {
    let grid = u.grid();
    let (a, h) = (grid.faces(), grid.h());
    let x = u.values();
    let m = x.len();
    let (mut inside, mut outside) = (0.0, 0.0);
    for j in 1..m {
        let e = a[j] * (x[j] - x[j - 1]).powi(2) / h;
        if j as f64 * h > rho {
            outside += e;
        } else {
            inside += e;
        }
    }
    outside += grid.boundary_coeff() * x[m - 1] * x[m - 1];
    let total = inside + outside;
    if total > 0.0 {
        outside / total
    } else {
        0.0
    }
}

/// One step of the plus-branch iteration, `(-Δ_h + V)⁻¹ (f'(u) + g)`.
pub fn fixed_point_step(u: &GridFunction, spec: &ProblemSpec) -> Result<GridFunction> {
    let lin = spec.operator().factor(true)?;
    Ok(apply_fixed_point(&lin, u, spec))
}

fn apply_fixed_point(lin: &Ldlt, u: &GridFunction, spec: &ProblemSpec) -> GridFunction {
    let params = &spec.params;
    let rhs: Vec<f64> = u
        .values()
        .iter()
        .zip(spec.forcing().values())
        .zip(u.grid().weights())
        .map(|((x, g), w)| (params.value_and_slope(*x).1 + g) * w)
        .collect();
    GridFunction::from_vec_unchecked(u.grid().clone(), lin.solve(&rhs))
}

/// `W(-Δ_h + V - f''(u))`, the Jacobian of the weighted residual.
fn jacobian(u: &GridFunction, spec: &ProblemSpec) -> SymTridiag {
    let mut op = spec.operator();
    for ((d, x), w) in op.diag.iter_mut().zip(u.values()).zip(u.grid().weights()) {
        *d -= w * spec.params.derivatives(*x)[2];
    }
    op
}

/// Sobolev gradient `L⁻¹ W ∇E` and its squared `‖·‖_V` norm.
fn sobolev_gradient(lin: &Ldlt, grad: &GridFunction) -> (GridFunction, f64) {
    let rhs: Vec<f64> = grad
        .values()
        .iter()
        .zip(grad.grid().weights())
        .map(|(g, w)| g * w)
        .collect();
    let d = GridFunction::from_vec_unchecked(grad.grid().clone(), lin.solve(&rhs));
    let norm_sq = grad.inner(&d);
    (d, norm_sq)
}

/// Damped Newton on the full equation, with one extra step once `target` is
/// met. `None` if the residual stalls above `target`.
fn newton_polish(
    start: &GridFunction,
    spec: &ProblemSpec,
    target: f64,
    max_steps: usize,
) -> Option<(GridFunction, usize)> {
    let mut u = start.clone();
    let mut grad = energy_gradient(&u, spec);
    let mut res = grad.max_abs();
    let mut met = false;
    for k in 0..max_steps {
        if res <= target {
            if met {
                return Some((u, k));
            }
            met = true;
        }
        let rhs: Vec<f64> = grad
            .values()
            .iter()
            .zip(u.grid().weights())
            .map(|(g, w)| -g * w)
            .collect();
        let delta = jacobian(&u, spec).factor(false).ok()?.solve(&rhs);
        let delta = GridFunction::from_vec_unchecked(u.grid().clone(), delta);
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1.0 / 64.0 {
            let cand = u.axpy(step, &delta);
            let cand_grad = energy_gradient(&cand, spec);
            let r = cand_grad.max_abs();
            if r.is_finite() && r < res {
                u = cand;
                grad = cand_grad;
                res = r;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return (res <= target).then_some((u, k));
        }
    }
    (res <= target).then_some((u, max_steps))
}

struct Classified {
    energy: f64,
    defect: f64,
    second: f64,
    v_norm: f64,
}

fn classify(u: &GridFunction, spec: &ProblemSpec) -> Result<Classified> {
    let map = FiberMap::new(u, spec)?;
    let [e, d1, d2, _] = map.eval(1.0);
    Ok(Classified {
        energy: e,
        defect: d1.abs(),
        second: d2,
        v_norm: map.norm_sq().sqrt(),
    })
}

fn branch_violation(branch: SolutionBranch, c: &Classified, u: &GridFunction, check_sign: bool) -> Option<String> {
    let on_branch = match branch {
        SolutionBranch::Plus => c.energy < 0.0 && c.second > 0.0,
        SolutionBranch::Minus | SolutionBranch::Homogeneous => c.energy > 0.0 && c.second < 0.0,
    };
    if !on_branch {
        return Some(format!(
            "energy {:e}, second variation along ray {:e}",
            c.energy, c.second
        ));
    }
    if check_sign && u.min_value() < -1e-8 {
        return Some(format!("negative values down to {:e}", u.min_value()));
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn finish(
    solution: GridFunction,
    spec: &ProblemSpec,
    branch: SolutionBranch,
    c: Classified,
    iterations: usize,
    newton_steps: usize,
    opts: &SolverOptions,
    descent_history: Vec<f64>,
) -> SolveReport {
    let residual = energy_gradient(&solution, spec).max_abs();
    let mass_escape = mass_escape_diagnostic(&solution, opts.radius(spec));
    SolveReport {
        solution,
        energy: c.energy,
        branch,
        residual,
        nehari_defect: c.defect,
        second_variation_along_ray: c.second,
        iterations,
        newton_steps,
        mass_escape,
        v_norm: c.v_norm,
        descent_history,
    }
}

/// Rescales `u` to its minus-branch root and returns the energy there.
fn project_minus(u: &GridFunction, spec: &ProblemSpec) -> Result<(GridFunction, f64)> {
    let map = FiberMap::new(u, spec)?;
    let t = map.minus_root()?;
    let e = map.eval(t)[0];
    Ok((u.scaled(t), e))
}

fn reduced_descent(
    start: &GridFunction,
    spec: &ProblemSpec,
    branch: SolutionBranch,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if start.max_abs() == 0.0 {
        return Err(Error::Collapse);
    }
    let target = opts.residual_target(spec);
    let lin = spec.operator().factor(true)?;
    let nonnegative = spec.has_nonnegative_forcing();
    let rho = opts.radius(spec);
    let start = if nonnegative { start.map(f64::abs) } else { start.clone() };
    let (mut u, mut e) = project_minus(&start, spec)?;
    let mut history = vec![e];
    let mut switch = opts.newton_switch;
    let mut iterations = 0;
    loop {
        let grad = energy_gradient(&u, spec);
        let residual = grad.max_abs();
        let (d, dn_sq) = sobolev_gradient(&lin, &grad);
        let un_sq = v_norm_sq(&u, spec)?;
        if !(un_sq > 1e-24) {
            return Err(Error::Collapse);
        }
        let close = dn_sq.sqrt() <= switch * un_sq.sqrt();
        if residual <= target || close {
            if let Some((sol, steps)) = newton_polish(&u, spec, target, opts.max_newton) {
                let c = classify(&sol, spec)?;
                if branch_violation(branch, &c, &sol, nonnegative).is_none() {
                    return Ok(finish(sol, spec, branch, c, iterations, steps, opts, history));
                }
            }
            switch *= 0.1;
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual,
            });
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-12 {
            let mut cand = u.axpy(-alpha, &d);
            if nonnegative && cand.min_value() < 0.0 {
                cand = cand.map(f64::abs);
            }
            match project_minus(&cand, spec) {
                Ok((c, ec)) if ec < e => {
                    accepted = Some((c, ec));
                    break;
                }
                Ok(_) | Err(Error::BranchAbsent(_)) | Err(Error::BracketNotFound(_)) => {
                    alpha *= 0.5
                }
                Err(other) => return Err(other),
            }
        }
        iterations += 1;
        match accepted {
            Some((c, ec)) => {
                u = c;
                e = ec;
                history.push(e);
            }
            None => {
                // Descent has stalled at rounding level; only Newton can improve further.
                if let Some((sol, steps)) = newton_polish(&u, spec, target, opts.max_newton) {
                    let c = classify(&sol, spec)?;
                    if let Some(detail) = branch_violation(branch, &c, &sol, nonnegative) {
                        return Err(Error::WrongBranch {
                            expected: branch.name(),
                            detail,
                        });
                    }
                    return Ok(finish(sol, spec, branch, c, iterations, steps, opts, history));
                }
                return Err(Error::NonConvergence {
                    iterations,
                    residual,
                });
            }
        }
        let escaped = mass_escape_diagnostic(&u, rho);
        if escaped > opts.escape_limit {
            return Err(Error::MassEscape(escaped));
        }
    }
}

/// Positive, `1/r`-decaying starting direction for the homogeneous problem.
pub fn default_start(spec: &ProblemSpec) -> GridFunction {
    GridFunction::from_fn(spec.grid(), |r| (1.0 + r * r / 3.0).powf(-0.5))
}

/// Ground state of the problem with `g ≡ 0` (`ω` when `V ≡ 0`, `ū` otherwise).
pub fn homogeneous_ground_state(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    homogeneous_ground_state_from(spec, &default_start(spec), opts)
}

pub fn homogeneous_ground_state_from(
    spec: &ProblemSpec,
    start: &GridFunction,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if spec.forcing().max_abs() != 0.0 {
        return Err(Error::InvalidProblem(
            "homogeneous ground state needs g ≡ 0".into(),
        ));
    }
    reduced_descent(start, spec, SolutionBranch::Homogeneous, opts)
}

/// Minus-branch solution started from the homogeneous ground state with the same `V`.
pub fn solve_minus(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    let ground = homogeneous_ground_state(&spec.homogeneous(), opts)?;
    solve_minus_from(spec, &ground.solution, opts)
}

pub fn solve_minus_from(
    spec: &ProblemSpec,
    start: &GridFunction,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let branch = if spec.forcing().max_abs() == 0.0 {
        SolutionBranch::Homogeneous
    } else {
        SolutionBranch::Minus
    };
    reduced_descent(start, spec, branch, opts)
}

/// Plus-branch solution by the fixed-point iteration started at zero.
pub fn solve_plus(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    solve_plus_from(spec, &GridFunction::zeros(spec.grid()), opts)
}

pub fn solve_plus_from(
    spec: &ProblemSpec,
    start: &GridFunction,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if spec.forcing().max_abs() == 0.0 {
        return Err(Error::InvalidProblem(
            "the plus branch needs g ≢ 0 (u ≡ 0 solves the homogeneous problem)".into(),
        ));
    }
    let target = opts.residual_target(spec);
    let lin = spec.operator().factor(true)?;
    let nonnegative = spec.has_nonnegative_forcing();
    let mut u = start.clone();
    let mut theta = 1.0;
    let mut prev_step = f64::INFINITY;
    let mut iterations = 0;
    let mut residual = energy_gradient(&u, spec).max_abs();
    // The map contracts strongly near small solutions, so iterate past the
    // residual target until the update itself reaches rounding level.
    let mut settled = false;
    while residual > target || !settled {
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual,
            });
        }
        let next = apply_fixed_point(&lin, &u, spec);
        let diff = next.axpy(-1.0, &u);
        let step = diff.max_abs();
        if !step.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                residual,
            });
        }
        if step > prev_step {
            theta *= 0.5;
            if theta < 1e-6 {
                return Err(Error::NonConvergence {
                    iterations,
                    residual,
                });
            }
        }
        prev_step = step;
        u = u.axpy(theta, &diff);
        iterations += 1;
        residual = energy_gradient(&u, spec).max_abs();
        settled = step <= 1e-13 * (1.0 + u.max_abs()) || (residual <= target && iterations >= 200);
        if step <= 1e-6 * (1.0 + u.max_abs()) && residual > target {
            if let Some((sol, steps)) = newton_polish(&u, spec, target, opts.max_newton) {
                let c = classify(&sol, spec)?;
                if let Some(detail) = branch_violation(SolutionBranch::Plus, &c, &sol, nonnegative) {
                    return Err(Error::WrongBranch {
                        expected: "plus",
                        detail,
                    });
                }
                return Ok(finish(sol, spec, SolutionBranch::Plus, c, iterations, steps, opts, Vec::new()));
            }
        }
    }
    let c = classify(&u, spec)?;
    if let Some(detail) = branch_violation(SolutionBranch::Plus, &c, &u, nonnegative) {
        return Err(Error::WrongBranch {
            expected: "plus",
            detail,
        });
    }
    Ok(finish(u, spec, SolutionBranch::Plus, c, iterations, 0, opts, Vec::new()))
}

/// Distance `‖u - v‖_V`.
pub fn v_distance(u: &GridFunction, v: &GridFunction, spec: &ProblemSpec) -> Result<f64> {
    Ok(v_norm_sq(&u.axpy(-1.0, v), spec)?.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessProbe {
    pub starts: usize,
    pub seed: u64,
    pub reference_energy: f64,
    pub energies: Vec<f64>,
    /// `max_i ‖u_i - u_ref‖_V` over the random starts.
    pub max_deviation: f64,
}

/// Runs the plus-branch iteration from `starts` random positive bumps of
/// amplitude at most `0.2` and compares against the run from zero.
pub fn uniqueness_probe(
    spec: &ProblemSpec,
    starts: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<UniquenessProbe> {
    let reference = solve_plus(spec, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut energies = Vec::with_capacity(starts);
    let mut max_deviation: f64 = 0.0;
    for _ in 0..starts {
        let amp: f64 = rng.gen_range(0.01..=0.2);
        let centre: f64 = rng.gen_range(0.0..5.0);
        let width: f64 = rng.gen_range(0.5..3.0);
        let start = GridFunction::from_fn(spec.grid(), |r| {
            amp * (-((r - centre) / width).powi(2)).exp()
        });
        let run = solve_plus_from(spec, &start, opts)?;
        max_deviation = max_deviation.max(v_distance(&run.solution, &reference.solution, spec)?);
        energies.push(run.energy);
    }
    Ok(UniquenessProbe {
        starts,
        seed,
        reference_energy: reference.energy,
        energies,
        max_deviation,
    })
}

/// `M = (1 - 1/μ₁) / (½ - 1/μ₁) · (S - ‖V‖_{N/2})^{-1/2}`, so that a plus-branch
/// solution obeys `‖u‖_V ≤ M ‖g‖_{2N/(N+2)}`.
pub fn plus_bound_constant(spec: &ProblemSpec) -> f64 {
    let inv = 1.0 / spec.params.mu1;
    let embed = 1.0 / (spec.sobolev_constant() - spec.potential_norm()).sqrt();
    (1.0 - inv) / (0.5 - inv) * embed
}
