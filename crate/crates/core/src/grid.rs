//! Radial discretization of `D^{1,2}(ℝᴺ)`.
//!
//! Nodes sit at cell midpoints `r_i = (i + ½) h`, `i = 0..M`, with midpoint
//! quadrature weights `w_i = |S^{N-1}| r_i^{N-1} h`. Derivatives live on the
//! faces `ρ_j = j h` between consecutive nodes, so the Dirichlet form
//!
//! ```text
//! ‖u‖² = Σ_j |S^{N-1}| ρ_j^{N-1} (u_j - u_{j-1})² / h + b u_{M-1}²
//! ```
//!
//! has the exact discrete integration-by-parts identity
//! `⟨-Δ_h u, v⟩_w = ⟨u, v⟩_{D}`. The origin face has zero area (radial
//! symmetry). The outer coefficient `b` closes the domain, see [`OuterBoundary`].

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::nonlinearity::DoublePowerParams;
use crate::tridiag::SymTridiag;

/// How the truncated radial interval is closed at `R_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OuterBoundary {
    /// `u(R_max) = 0`.
    Dirichlet,
    /// Beyond the last node `u` continues as the decaying harmonic `c r^{2-N}`,
    /// whose exterior Dirichlet energy `|S^{N-1}| (N-2) r^{N-2} u²` is added
    /// exactly. `D^{1,2}` functions decay like `r^{2-N}`, so this removes the
    /// `O(1/R_max)` truncation error a Dirichlet cut would introduce.
    #[default]
    HarmonicExterior,
}

/// Surface area of the unit sphere `S^{N-1}`.
pub fn sphere_area(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * std::f64::consts::PI.powf(n / 2.0) / gamma(n / 2.0)
}

/// Volume of the ball of radius `r` in `ℝᴺ`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    sphere_area(dim) * r.powi(dim as i32) / dim as f64
}

/// The sharp Sobolev constant `S = inf ‖∇u‖²₂ / ‖u‖²_{2*}` in closed form.
pub fn sobolev_constant(dim: usize) -> f64 {
    let n = dim as f64;
    std::f64::consts::PI * n * (n - 2.0) * (gamma(n / 2.0) / gamma(n)).powf(2.0 / n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `|S^{N-1}| (j h)^{N-1}` for `j = 0..=M`.
    faces: Vec<f64>,
    boundary: OuterBoundary,
    boundary_coeff: f64,
}

impl RadialGrid {
    pub fn new(dim: usize, r_max: f64, m: usize) -> Result<Arc<Self>> {
        Self::with_boundary(dim, r_max, m, OuterBoundary::default())
    }

    pub fn with_boundary(
        dim: usize,
        r_max: f64,
        m: usize,
        boundary: OuterBoundary,
    ) -> Result<Arc<Self>> {
        if dim < 3 {
            return Err(Error::InvalidGrid(format!("dimension {dim} < 3")));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("R_max = {r_max} must be positive")));
        }
        if m < 4 {
            return Err(Error::InvalidGrid(format!("M = {m} must be at least 4")));
        }
        let h = r_max / m as f64;
        let area = sphere_area(dim);
        let pow = (dim - 1) as i32;
        let nodes: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
        let weights = nodes.iter().map(|r| area * r.powi(pow) * h).collect();
        let faces: Vec<f64> = (0..=m).map(|j| area * (j as f64 * h).powi(pow)).collect();
        let boundary_coeff = match boundary {
            OuterBoundary::Dirichlet => 2.0 * faces[m] / h,
            OuterBoundary::HarmonicExterior => {
                area * (dim as f64 - 2.0) * nodes[m - 1].powi(dim as i32 - 2)
            }
        };
        Ok(Arc::new(Self {
            dim,
            r_max,
            h,
            nodes,
            weights,
            faces,
            boundary,
            boundary_coeff,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }
    pub fn boundary(&self) -> OuterBoundary {
        self.boundary
    }
    pub fn boundary_coeff(&self) -> f64 {
        self.boundary_coeff
    }

    /// Same truncation and boundary with `factor` times as many nodes.
    pub fn refined(&self, factor: usize) -> Result<Arc<Self>> {
        Self::with_boundary(self.dim, self.r_max, self.len() * factor, self.boundary)
    }

    /// Stiffness matrix of the Dirichlet form (weights already folded in).
    pub fn stiffness(&self) -> SymTridiag {
        let m = self.len();
        let a = &self.faces;
        let diag = (0..m)
            .map(|i| {
                let outer = if i + 1 < m {
                    a[i + 1] / self.h
                } else {
                    self.boundary_coeff
                };
                a[i] / self.h + outer
            })
            .collect();
        let off = (0..m - 1).map(|i| -a[i + 1] / self.h).collect();
        SymTridiag::new(diag, off)
    }
}

/// A radial function sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &GridFunction) -> Self {
        debug_assert!(self.same_grid(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Self::from_vec_unchecked(self.grid.clone(), values)
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// Quadrature inner product `Σ w_i u_i v_i`.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        debug_assert!(self.same_grid(other));
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn lp_norm(&self, exponent: f64) -> f64 {
        self.lp_norm_where(exponent, |_| true)
    }

    /// `L^p` norm restricted to nodes whose value satisfies `keep`.
    pub fn lp_norm_where(&self, exponent: f64, keep: impl Fn(f64) -> bool) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.weights())
            .filter(|(v, _)| keep(**v))
            .map(|(v, w)| v.abs().powf(exponent) * w)
            .sum();
        s.powf(1.0 / exponent)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,value")?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(out, "{r},{v}")?;
        }
        Ok(())
    }

    /// Reads a `r,value` CSV written by [`GridFunction::write_csv`] and rebuilds its grid.
    pub fn read_csv<R: BufRead>(input: R, dim: usize, boundary: OuterBoundary) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty profile CSV".into()))??;
        if header.trim() != "r,value" {
            return Err(Error::Parse(format!("unexpected header `{}`", header.trim())));
        }
        let mut rs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad row at line {}", lineno + 2)))
            };
            rs.push(parse(it.next())?);
            vs.push(parse(it.next())?);
        }
        if rs.len() < 4 {
            return Err(Error::Parse("profile CSV needs at least 4 rows".into()));
        }
        let h = 2.0 * rs[0];
        let m = rs.len();
        let grid = RadialGrid::with_boundary(dim, h * m as f64, m, boundary)?;
        for (i, (a, b)) in grid.nodes().iter().zip(&rs).enumerate() {
            if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(Error::Parse(format!("node {i} at r = {b}, expected {a}")));
            }
        }
        Self::new(grid, vs)
    }
}

/// Dimension, nonlinearity, potential `V ≤ 0` and forcing `g` on a common grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub params: DoublePowerParams,
    potential: GridFunction,
    forcing: GridFunction,
    /// Integrability exponent of `V`, `t > N/2`.
    pub exponent_t: f64,
    /// Integrability exponent of `g`, `s > 2N/(N+2)`.
    pub exponent_s: f64,
    potential_norm: f64,
}

impl ProblemSpec {
    /// Validates `V ≤ 0`, `‖V‖_{N/2} < S`, the exponents, and positive definiteness of
    /// the discrete operator `-Δ_h + V`. A potential that vanishes identically is
    /// accepted here; see [`ProblemSpec::require_negative_potential`].
    pub fn new(
        params: DoublePowerParams,
        potential: GridFunction,
        forcing: GridFunction,
        exponent_t: f64,
        exponent_s: f64,
    ) -> Result<Self> {
        params.validate()?;
        let grid = potential.grid().clone();
        if !potential.same_grid(&forcing) {
            return Err(Error::InvalidProblem("V and g live on different grids".into()));
        }
        if grid.dim() != params.dim {
            return Err(Error::InvalidProblem(format!(
                "grid dimension {} differs from N = {}",
                grid.dim(),
                params.dim
            )));
        }
        let n = params.dim as f64;
        if let Some(i) = potential.values().iter().position(|&v| v > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "invariant V ≤ 0 violated: V(r = {}) = {}",
                grid.nodes()[i],
                potential.values()[i]
            )));
        }
        if !(exponent_t > n / 2.0) {
            return Err(Error::InvalidProblem(format!(
                "integrability exponent t = {exponent_t} must exceed N/2 = {}",
                n / 2.0
            )));
        }
        if !(exponent_s > 2.0 * n / (n + 2.0)) {
            return Err(Error::InvalidProblem(format!(
                "integrability exponent s = {exponent_s} must exceed 2N/(N+2) = {}",
                2.0 * n / (n + 2.0)
            )));
        }
        let potential_norm = potential.lp_norm(n / 2.0);
        let s = sobolev_constant(params.dim);
        if !(potential_norm < s) {
            return Err(Error::InvalidProblem(format!(
                "‖V‖_{{L^{{N/2}}}} = {potential_norm} must be below the Sobolev constant S = {s}"
            )));
        }
        let spec = Self {
            params,
            potential,
            forcing,
            exponent_t,
            exponent_s,
            potential_norm,
        };
        spec.operator().factor(true)?;
        Ok(spec)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.potential.grid()
    }
    pub fn potential(&self) -> &GridFunction {
        &self.potential
    }
    pub fn forcing(&self) -> &GridFunction {
        &self.forcing
    }

    /// `‖V‖_{L^{N/2}}`.
    pub fn potential_norm(&self) -> f64 {
        self.potential_norm
    }

    pub fn sobolev_constant(&self) -> f64 {
        sobolev_constant(self.params.dim)
    }

    pub fn has_negative_potential(&self) -> bool {
        self.potential.values().iter().any(|&v| v < 0.0)
    }

    pub fn require_negative_potential(&self) -> Result<()> {
        if self.has_negative_potential() {
            Ok(())
        } else {
            Err(Error::InvalidProblem(
                "V must be negative on a set of positive measure".into(),
            ))
        }
    }

    pub fn has_nonnegative_forcing(&self) -> bool {
        self.forcing.values().iter().all(|&g| g >= 0.0)
    }

    pub fn with_forcing(&self, forcing: GridFunction) -> Result<Self> {
        Self::new(
            self.params,
            self.potential.clone(),
            forcing,
            self.exponent_t,
            self.exponent_s,
        )
    }

    /// The same problem with `g` replaced by `λ g`.
    pub fn scaled_forcing(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.forcing = self.forcing.scaled(lambda);
        out
    }

    /// `g ≡ 0`.
    pub fn homogeneous(&self) -> Self {
        self.scaled_forcing(0.0)
    }

    /// `V ≡ 0`, `g ≡ 0`.
    pub fn free(&self) -> Self {
        let mut out = self.homogeneous();
        out.potential = GridFunction::zeros(self.grid());
        out.potential_norm = 0.0;
        out
    }

    /// `W(-Δ_h + V)` as a symmetric tridiagonal matrix.
    pub fn operator(&self) -> SymTridiag {
        let mut op = self.grid().stiffness();
        for ((d, v), w) in op
            .diag
            .iter_mut()
            .zip(self.potential.values())
            .zip(self.grid().weights())
        {
            *d += w * v;
        }
        op
    }

    /// Norm equivalence constant `1 - ‖V‖_{N/2} / S`.
    pub fn equivalence_constant(&self) -> f64 {
        1.0 - self.potential_norm / self.sobolev_constant()
    }

    /// `L^{2N/(N+2)}` norm of `g`.
    pub fn forcing_norm(&self) -> f64 {
        let n = self.params.dim as f64;
        self.forcing.lp_norm(2.0 * n / (n + 2.0))
    }
}

/// Symmetric Dirichlet form `∫ u' v'` including the outer boundary term.
pub fn dirichlet_form(u: &GridFunction, v: &GridFunction) -> f64 {
    let grid = u.grid();
    let (a, h) = (grid.faces(), grid.h());
    let (x, y) = (u.values(), v.values());
    let m = x.len();
    let mut sum = 0.0;
    for j in 1..m {
        sum += a[j] * (x[j] - x[j - 1]) * (y[j] - y[j - 1]) / h;
    }
    sum + grid.boundary_coeff() * x[m - 1] * y[m - 1]
}

/// `‖u‖² = ∫ |∇u|²`.
pub fn d12_norm_sq(u: &GridFunction) -> f64 {
    dirichlet_form(u, u)
}

/// `∫ V u²`.
pub fn potential_term(u: &GridFunction, spec: &ProblemSpec) -> f64 {
    u.values()
        .iter()
        .zip(spec.potential().values())
        .zip(u.grid().weights())
        .map(|((x, v), w)| v * x * x * w)
        .sum()
}

/// `‖u‖²_V = ∫ |∇u|² + ∫ V u²`, erroring if it is not positive for `u ≠ 0`.
pub fn v_norm_sq(u: &GridFunction, spec: &ProblemSpec) -> Result<f64> {
    let value = d12_norm_sq(u) + potential_term(u, spec);
    if value <= 0.0 && u.max_abs() > 0.0 {
        return Err(Error::InvalidProblem(format!(
            "‖u‖²_V = {value} is not positive for a nonzero u"
        )));
    }
    Ok(value)
}

/// `½‖u‖²_V - ∫ f(u) - ∫ g u`.
pub fn energy(u: &GridFunction, spec: &ProblemSpec) -> f64 {
    let quad = d12_norm_sq(u) + potential_term(u, spec);
    let params = &spec.params;
    let rest: f64 = u
        .values()
        .iter()
        .zip(spec.forcing().values())
        .zip(u.grid().weights())
        .map(|((x, g), w)| (params.value_and_slope(*x).0 + g * x) * w)
        .sum();
    0.5 * quad - rest
}

/// `(-Δ_h + V) u`, node-wise.
pub fn apply_linear(u: &GridFunction, spec: &ProblemSpec) -> GridFunction {
    let ku = spec.operator().apply(u.values());
    let values = ku
        .iter()
        .zip(u.grid().weights())
        .map(|(k, w)| k / w)
        .collect();
    GridFunction::from_vec_unchecked(u.grid().clone(), values)
}

/// `-Δ_h u` alone.
pub fn laplacian(u: &GridFunction) -> GridFunction {
    let ku = u.grid().stiffness().apply(u.values());
    let values = ku
        .iter()
        .zip(u.grid().weights())
        .map(|(k, w)| k / w)
        .collect();
    GridFunction::from_vec_unchecked(u.grid().clone(), values)
}

/// Riesz representative of `E'(u)` in the quadrature inner product:
/// `-Δ_h u + V u - f'(u) - g`.
pub fn energy_gradient(u: &GridFunction, spec: &ProblemSpec) -> GridFunction {
    let lin = apply_linear(u, spec);
    let params = &spec.params;
    let values = lin
        .values()
        .iter()
        .zip(u.values())
        .zip(spec.forcing().values())
        .map(|((l, x), g)| l - params.value_and_slope(*x).1 - g)
        .collect();
    GridFunction::from_vec_unchecked(u.grid().clone(), values)
}

/// Max-norm of [`energy_gradient`].
pub fn pde_residual(u: &GridFunction, spec: &ProblemSpec) -> f64 {
    energy_gradient(u, spec).max_abs()
}

/// Solves `(-Δ_h + V) u = rhs`.
pub fn invert_linear(rhs: &GridFunction, spec: &ProblemSpec) -> Result<GridFunction> {
    let b: Vec<f64> = rhs
        .values()
        .iter()
        .zip(rhs.grid().weights())
        .map(|(r, w)| r * w)
        .collect();
    let x = spec.operator().factor(true)?.solve(&b);
    Ok(GridFunction::from_vec_unchecked(rhs.grid().clone(), x))
}

/// Rayleigh quotient `‖∇U‖² / ‖U‖²_{2*}` of the Aubin–Talenti profile
/// `U(r) = (λ² + r²)^{-(N-2)/2}` on the grid.
pub fn sobolev_quotient(grid: &Arc<RadialGrid>, scale: f64) -> f64 {
    let n = grid.dim() as f64;
    let profile = GridFunction::from_fn(grid, |r| (scale * scale + r * r).powf(-(n - 2.0) / 2.0));
    let crit = 2.0 * n / (n - 2.0);
    d12_norm_sq(&profile) / profile.lp_norm(crit).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weights_cover_the_ball() {
        for dim in 3..6 {
            let g = RadialGrid::new(dim, 30.0, 3000).unwrap();
            let total: f64 = g.weights().iter().sum();
            let exact = ball_volume(dim, 30.0);
            assert!((total / exact - 1.0).abs() < 1e-3);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]) && g.nodes()[0] > 0.0);
        }
    }

    #[test]
    fn sobolev_constant_three_dimensions() {
        // S_3 = 3 (π/2)^{4/3}
        let expected = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
        assert!((sobolev_constant(3) - expected).abs() < 1e-12);
    }

    #[test]
    fn aubin_talenti_quotient_matches_closed_form() {
        let grid = RadialGrid::new(3, 30.0, 6000).unwrap();
        let quotient = sobolev_quotient(&grid, 1.0);
        let s = sobolev_constant(3);
        assert!(quotient >= s * (1.0 - 1e-4));
        assert!((quotient / s - 1.0).abs() < 2e-3, "{quotient} vs {s}");
    }

    #[test]
    fn gaussian_dirichlet_energy() {
        // ∫|∇e^{-r²}|² over ℝ³ = 16π ∫ r⁴ e^{-2r²} dr = 16π · 3√π / (32√2) … via Γ(5/2)/(2·2^{5/2}).
        let exact = 16.0 * PI * gamma(2.5) / (2.0 * 2f64.powf(2.5));
        let coarse = RadialGrid::new(3, 12.0, 600).unwrap();
        let fine = coarse.refined(2).unwrap();
        let e1 = d12_norm_sq(&GridFunction::from_fn(&coarse, |r| (-r * r).exp()));
        let e2 = d12_norm_sq(&GridFunction::from_fn(&fine, |r| (-r * r).exp()));
        assert!((e2 - exact).abs() < 1e-4 * exact);
        let ratio = (e1 - exact).abs() / (e2 - exact).abs();
        assert!((3.0..5.0).contains(&ratio), "Richardson ratio {ratio}");
    }

    #[test]
    fn discrete_integration_by_parts() {
        let grid = RadialGrid::new(3, 10.0, 400).unwrap();
        let u = GridFunction::from_fn(&grid, |r| (1.0 + r).recip() * (0.3 * r).cos());
        let v = GridFunction::from_fn(&grid, |r| (-0.2 * r * r).exp() + 0.1 * r.sin());
        let lhs = laplacian(&u).inner(&v);
        let rhs = dirichlet_form(&u, &v);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn csv_round_trip() {
        let grid = RadialGrid::new(3, 5.0, 50).unwrap();
        let u = GridFunction::from_fn(&grid, |r| (-r).exp());
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(&buf[..], 3, OuterBoundary::HarmonicExterior).unwrap();
        assert_eq!(back.values(), u.values());
        assert!(GridFunction::read_csv(&b"x,y\n"[..], 3, OuterBoundary::Dirichlet).is_err());
    }
}
