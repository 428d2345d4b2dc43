#![allow(dead_code)]

use std::sync::Arc;

use nehari_core::grid::{GridFunction, ProblemSpec, RadialGrid};
use nehari_core::{Config, DoublePowerParams};
use rand::Rng;

pub const DEFAULT_CONFIG: &str = include_str!("../../../../configs/default.conf");

pub fn default_config() -> Config {
    Config::parse(DEFAULT_CONFIG).unwrap()
}

/// The default experiment with `refine` times the configured node count.
pub fn default_spec(refine: usize) -> ProblemSpec {
    default_config().build_spec(refine).unwrap()
}

/// `V = -e^{-r²}`, `g = g_amp e^{-r²}` on `[0, r_max]` with `m` nodes.
pub fn small_spec(r_max: f64, m: usize, g_amp: f64) -> ProblemSpec {
    let grid = RadialGrid::new(3, r_max, m).unwrap();
    let v = GridFunction::from_fn(&grid, |r| -(-r * r).exp());
    let g = GridFunction::from_fn(&grid, |r| g_amp * (-r * r).exp());
    ProblemSpec::new(DoublePowerParams::default_3d(), v, g, 3.0, 2.0).unwrap()
}

/// Sum of `k` Gaussian bumps with amplitudes in `amp`, centres in `[0, spread]`.
pub fn random_bumps<R: Rng>(
    rng: &mut R,
    grid: &Arc<RadialGrid>,
    k: usize,
    amp: (f64, f64),
    spread: f64,
) -> GridFunction {
    let bumps: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| {
            (
                rng.gen_range(amp.0..amp.1),
                rng.gen_range(0.0..spread),
                rng.gen_range(0.5..3.0),
            )
        })
        .collect();
    GridFunction::from_fn(grid, |r| {
        bumps
            .iter()
            .map(|(a, c, w)| a * (-((r - c) / w).powi(2)).exp())
            .sum()
    })
}

/// `f'(s)` from the quotient rule, independent of the library's factored form.
pub fn oracle_fprime(p: f64, q: f64, s: f64) -> f64 {
    let a = s.abs();
    if a == 0.0 {
        return 0.0;
    }
    let gamma = a.powf(q - p);
    let v = a.powf(q - 1.0) * (q + p * gamma) / ((1.0 + gamma) * (1.0 + gamma));
    v.copysign(s)
}

/// `‖u‖²_V` summed directly from the face differences.
pub fn oracle_v_norm_sq(u: &GridFunction, spec: &ProblemSpec) -> f64 {
    let grid = u.grid();
    let x = u.values();
    let mut sum = 0.0;
    for j in 1..x.len() {
        sum += grid.faces()[j] * (x[j] - x[j - 1]).powi(2) / grid.h();
    }
    sum += grid.boundary_coeff() * x[x.len() - 1].powi(2);
    for ((xi, vi), wi) in x.iter().zip(spec.potential().values()).zip(grid.weights()) {
        sum += vi * xi * xi * wi;
    }
    sum
}
