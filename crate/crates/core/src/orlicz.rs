//! Norm estimates in the sum space `L^p + L^q` and its dual `L^{p'} ∩ L^{q'}`.
//!
//! The infimum over decompositions `v = v₁ + v₂` of `‖v₁‖_p + ‖v₂‖_q` is not
//! computed. We report the level-set sandwich built from `Γ_v = {|v| > 1}` and
//! the best decomposition within the clamp family `v₂ = clamp(v, -θ, θ)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrliczBounds {
    /// `max(‖v‖_{L^q(Γᶜ)} - 1, ‖v‖_{L^p(Γ)} / (1 + |Γ|^{1/τ}))`, clamped at 0.
    pub lower: f64,
    /// `max(‖v‖_{L^q(Γᶜ)}, ‖v‖_{L^p(Γ)})`.
    pub upper: f64,
    /// `min_θ ‖clamp(v,θ)‖_q + ‖v - clamp(v,θ)‖_p`: a feasible decomposition,
    /// hence a genuine upper bound on the sum norm.
    pub tightened_upper: f64,
    /// The clamp level attaining `tightened_upper`.
    pub best_threshold: f64,
    /// `|Γ_v|`.
    pub gamma_measure: f64,
    /// `τ = pq / (q - p)`.
    pub tau: f64,
}

/// Number of clamp levels tried between `1e-3 max|v|` and `max|v|`.
pub const CLAMP_LEVELS: usize = 64;

/// Quadrature measure of `{|v| > threshold}`.
pub fn gamma_measure(v: &GridFunction, threshold: f64) -> f64 {
    v.values()
        .iter()
        .zip(v.grid().weights())
        .filter(|(x, _)| x.abs() > threshold)
        .map(|(_, w)| w)
        .sum()
}

fn clamp_split(v: &GridFunction, theta: f64, p: f64, q: f64) -> f64 {
    let (mut sp, mut sq) = (0.0, 0.0);
    for (x, w) in v.values().iter().zip(v.grid().weights()) {
        let a = x.abs();
        let low = a.min(theta);
        sq += low.powf(q) * w;
        if a > theta {
            sp += (a - theta).powf(p) * w;
        }
    }
    sq.powf(1.0 / q) + sp.powf(1.0 / p)
}

pub fn orlicz_norm_bounds(v: &GridFunction, p: f64, q: f64) -> Result<OrliczBounds> {
    if !(2.0 < p && p < q && q.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "need 2 < p < q for L^p + L^q, got p = {p}, q = {q}"
        )));
    }
    let tau = p * q / (q - p);
    let measure = gamma_measure(v, 1.0);
    let outside = v.lp_norm_where(q, |x| x.abs() <= 1.0);
    let inside = v.lp_norm_where(p, |x| x.abs() > 1.0);
    let lower = (outside - 1.0)
        .max(inside / (1.0 + measure.powf(1.0 / tau)))
        .max(0.0);
    let upper = outside.max(inside);

    let top = v.max_abs();
    let (mut tightened, mut best_threshold) = (0.0, 0.0);
    if top > 0.0 {
        tightened = f64::INFINITY;
        let ratio = 1e-3f64;
        for k in 0..CLAMP_LEVELS {
            let theta = top * ratio.powf(1.0 - k as f64 / (CLAMP_LEVELS - 1) as f64);
            let value = clamp_split(v, theta, p, q);
            if value < tightened {
                tightened = value;
                best_threshold = theta;
            }
        }
    }
    Ok(OrliczBounds {
        lower,
        upper,
        tightened_upper: tightened,
        best_threshold,
        gamma_measure: measure,
        tau,
    })
}

/// `max(‖φ‖_{p'}, ‖φ‖_{q'})`, the norm of `L^{p'} ∩ L^{q'}`.
pub fn dual_norm(phi: &GridFunction, p: f64, q: f64) -> f64 {
    let pc = p / (p - 1.0);
    let qc = q / (q - 1.0);
    phi.lp_norm(pc).max(phi.lp_norm(qc))
}
