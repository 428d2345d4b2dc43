//! The double-power nonlinearity `f(s) = |s|^q / (1 + |s|^(q-p))` and a
//! grid-sweep verifier for the structural hypotheses the existence theory
//! places on `f`.
//!
//! All derivatives are evaluated in factored form. With `γ = s^(q-p)`,
//! `σ = 1/(1+γ)` and `ρ = γ/(1+γ)` (both in `[0, 1]`), one has for `s > 0`
//!
//! ```text
//! f        = s^q σ = s^p ρ
//! f' s    = f · (q σ + p ρ)
//! f'' s²  = f · (q(q-1) σ + p(2q-p-1) ρ - 2(q-p) ρ (q σ + p ρ))
//! f''' s³ = f · (A + B ρ + C ρ² + D ρ³)
//! ```
//!
//! so no difference of large terms is ever formed, and `s → 0` or `s → ∞`
//! never overflows for the exponents of interest.

use serde::Serialize;

use crate::error::{Error, Result};

/// Exponents and constants of the double-power nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublePowerParams {
    /// Spatial dimension `N ≥ 3`.
    pub dim: usize,
    /// Growth exponent at infinity, `2 < p < 2*`.
    pub p: f64,
    /// Growth exponent at the origin, `q > 2*`.
    pub q: f64,
    /// Lower-bound constant in the growth hypothesis.
    pub c0: f64,
    /// Upper-bound constant on `|f''|`.
    pub c2: f64,
    /// Superquadraticity constant `μ₁ > 2`.
    pub mu1: f64,
    /// `ε > 0`; the convexity constant is `μ₂ = 1 + ε`.
    pub eps: f64,
}

impl DoublePowerParams {
    /// Builds a parameter set and fits `c0`, `c2` on the default verification grid.
    pub fn new(dim: usize, p: f64, q: f64, eps: f64, mu1: f64) -> Result<Self> {
        let mut params = Self {
            dim,
            p,
            q,
            c0: 1.0,
            c2: 1.0,
            mu1,
            eps,
        };
        params.validate()?;
        let fit = fit_constants(&params, &default_hypothesis_grid());
        // c0 enters a strict inequality for |s| <= 1, so back off from the extremal value.
        params.c0 = fit.c0_max * (1.0 - 1e-3);
        params.c2 = fit.c2_min * (1.0 + 1e-3);
        Ok(params)
    }

    pub fn with_constants(
        dim: usize,
        p: f64,
        q: f64,
        c0: f64,
        c2: f64,
        mu1: f64,
        eps: f64,
    ) -> Result<Self> {
        let params = Self {
            dim,
            p,
            q,
            c0,
            c2,
            mu1,
            eps,
        };
        params.validate()?;
        if !(c0 > 0.0 && c2 > 0.0 && c0.is_finite() && c2.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "c0 = {c0} and c2 = {c2} must be positive and finite"
            )));
        }
        Ok(params)
    }

    /// `N = 3, p = 5.5, q = 6.5, ε = 0.5, μ₁ = p`.
    pub fn default_3d() -> Self {
        Self::new(3, 5.5, 6.5, 0.5, 5.5).expect("default parameters are admissible")
    }

    pub fn critical_exponent(&self) -> f64 {
        let n = self.dim as f64;
        2.0 * n / (n - 2.0)
    }

    pub fn mu2(&self) -> f64 {
        1.0 + self.eps
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.dim < 3 {
            return bad(format!("dimension N = {} must be at least 3", self.dim));
        }
        let crit = self.critical_exponent();
        let (p, q) = (self.p, self.q);
        if !(p.is_finite() && q.is_finite() && self.eps.is_finite() && self.mu1.is_finite()) {
            return bad("exponents and constants must be finite".into());
        }
        if !(2.0 < p && p < crit && crit < q) {
            return bad(format!("need 2 < p < 2* < q, got p = {p}, 2* = {crit}, q = {q}"));
        }
        if q <= 3.0 {
            return bad(format!("q = {q} must exceed 3 so that f''' vanishes at 0"));
        }
        if self.eps <= 0.0 {
            return bad(format!("eps = {} must be positive", self.eps));
        }
        if self.mu1 <= 2.0 {
            return bad(format!("mu1 = {} must exceed 2", self.mu1));
        }
        Ok(())
    }

    /// `f^{(order)}(s)` for `order` in `0..=3`.
    pub fn eval(&self, s: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::InvalidOrder(order));
        }
        Ok(self.derivatives(s)[order])
    }

    /// `[f, f', f'', f''']` at `s`. Odd orders are odd functions, even orders even.
    #[inline]
    pub fn derivatives(&self, s: f64) -> [f64; 4] {
        let a = s.abs();
        if a == 0.0 {
            return [0.0; 4];
        }
        let (p, q) = (self.p, self.q);
        let (sigma, rho, lead) = if a <= 1.0 {
            let gamma = a.powf(q - p);
            let sigma = 1.0 / (1.0 + gamma);
            (sigma, gamma * sigma, a.powf(q - 3.0) * sigma)
        } else {
            let inv_gamma = a.powf(p - q);
            let rho = 1.0 / (1.0 + inv_gamma);
            (inv_gamma * rho, rho, a.powf(p - 3.0) * rho)
        };
        // lead = f / s^3
        let first = q * sigma + p * rho;
        let second =
            q * (q - 1.0) * sigma + p * (2.0 * q - p - 1.0) * rho - 2.0 * (q - p) * rho * first;
        let [ca, cb, cc, cd] = coefficients(p, q);
        let third = ca + rho * (cb + rho * (cc + rho * cd));

        let f3 = lead * third;
        let f2 = lead * a * second;
        let f1 = lead * a * a * first;
        let f0 = lead * a * a * a;
        if s < 0.0 {
            [f0, -f1, f2, -f3]
        } else {
            [f0, f1, f2, f3]
        }
    }

    /// `(f, f')` only; used on hot paths where higher orders are not needed.
    #[inline]
    pub fn value_and_slope(&self, s: f64) -> (f64, f64) {
        let a = s.abs();
        if a == 0.0 {
            return (0.0, 0.0);
        }
        let (p, q) = (self.p, self.q);
        let (sigma, rho, f) = if a <= 1.0 {
            let gamma = a.powf(q - p);
            let sigma = 1.0 / (1.0 + gamma);
            (sigma, gamma * sigma, a.powf(q) * sigma)
        } else {
            let inv_gamma = a.powf(p - q);
            let rho = 1.0 / (1.0 + inv_gamma);
            (inv_gamma * rho, rho, a.powf(p) * rho)
        };
        let slope = f / a * (q * sigma + p * rho);
        (f, if s < 0.0 { -slope } else { slope })
    }
}

/// `(A, B, C, D)` of the decomposition of `f''' s³`.
pub fn coefficients(p: f64, q: f64) -> [f64; 4] {
    let a = q * (q - 2.0) * (q - 1.0);
    let b = (p - q) * (2.0 + 3.0 * p + p * p - 9.0 * q - 5.0 * p * q + 7.0 * q * q);
    let c = 6.0 * (p - q).powi(2) * (2.0 * q - p - 1.0);
    let d = 6.0 * (p - q).powi(3);
    [a, b, c, d]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `lim_{s→0⁺} f'''(s)/s^(q-3) = A`.
    pub limit_at_zero: f64,
    /// `lim_{s→∞} f'''(s)/s^(p-3) = A + B + C + D`, which must equal `p(p-1)(p-2)`.
    pub limit_at_infinity: f64,
}

pub fn appendix_coefficients(params: &DoublePowerParams) -> Result<AppendixCoefficients> {
    params.validate()?;
    Ok(raw_appendix_coefficients(params.p, params.q))
}

/// Same as [`appendix_coefficients`] without parameter validation; allows degenerate `p = q`.
pub fn raw_appendix_coefficients(p: f64, q: f64) -> AppendixCoefficients {
    let [a, b, c, d] = coefficients(p, q);
    AppendixCoefficients {
        a,
        b,
        c,
        d,
        limit_at_zero: a,
        limit_at_infinity: a + b + c + d,
    }
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// 10³ log-spaced points on `[1e-6, 1e6]`.
pub fn default_hypothesis_grid() -> Vec<f64> {
    log_grid(1e-6, 1e6, 1000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisId {
    /// `c0 |s|^p ≤ f(s)` for `|s| ≥ 1`.
    GrowthLarge,
    /// `c0 |s|^q < f(s)` for `|s| ≤ 1`.
    GrowthSmall,
    /// `|f''(s)| ≤ c2 |s|^(p-2)` for `|s| ≥ 1`.
    CurvatureLarge,
    /// `|f''(s)| ≤ c2 |s|^(q-2)` for `|s| ≤ 1`.
    CurvatureSmall,
    /// `0 < μ₁ f(s) ≤ f'(s) s`.
    Superquadratic,
    /// `μ₂ f'(s) s < f''(s) s²`.
    Convexity,
    /// `f'''(s) s³ > 0`.
    ThirdOrder,
    /// Positivity of the quadratic in `γ = s^(q-p)` equivalent to the convexity bound.
    GammaQuadratic,
    /// `q - 2 - ε > 0`.
    CondQ,
    /// `p - 2 - ε > 0`.
    CondP,
    /// `2q - p - 2 - ε > 0`.
    CondMixedQ,
    /// `2p - q - 2 - ε > 0`.
    CondMixedP,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisFailure {
    /// Grid point; `None` for the parameter-only conditions.
    pub s: Option<f64>,
    pub id: HypothesisId,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub checked_points: usize,
    pub failures: Vec<HypothesisFailure>,
    pub coefficients: AppendixCoefficients,
    /// Minimum over the grid of `(rhs - lhs) / max(|lhs|, |rhs|)` per hypothesis.
    pub margins: Vec<(HypothesisId, f64)>,
    /// Largest `c0` compatible with the growth bounds on the grid.
    pub c0_max: f64,
    /// Smallest `c2` compatible with the curvature bounds on the grid.
    pub c2_min: f64,
    /// Smallest `c3` with `|f'''| ≤ c3 |s|^(p-3)` (resp. `q-3`) on the grid.
    pub c3_min: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FittedConstants {
    pub c0_max: f64,
    pub c2_min: f64,
    pub c3_min: f64,
}

pub fn fit_constants(params: &DoublePowerParams, s_grid: &[f64]) -> FittedConstants {
    let (p, q) = (params.p, params.q);
    let mut c0_max = f64::INFINITY;
    let mut c2_min = 0.0_f64;
    let mut c3_min = 0.0_f64;
    for &s in s_grid {
        let [f0, _, f2, f3] = params.derivatives(s);
        let exps: &[f64] = if s > 1.0 {
            &[p]
        } else if s < 1.0 {
            &[q]
        } else {
            &[p, q]
        };
        for &e in exps {
            c0_max = c0_max.min(f0 / s.powf(e));
            c2_min = c2_min.max(f2.abs() / s.powf(e - 2.0));
            c3_min = c3_min.max(f3.abs() / s.powf(e - 3.0));
        }
    }
    FittedConstants {
        c0_max,
        c2_min,
        c3_min,
    }
}

/// Positivity of `q(q-2-ε) + [p(2q-p-2-ε) + q(2p-q-2-ε)] γ + p(p-2-ε) γ²`.
pub fn gamma_quadratic(p: f64, q: f64, eps: f64, gamma: f64) -> f64 {
    let c0 = q * (q - 2.0 - eps);
    let c1 = p * (2.0 * q - p - 2.0 - eps) + q * (2.0 * p - q - 2.0 - eps);
    let c2 = p * (p - 2.0 - eps);
    c0 + gamma * (c1 + gamma * c2)
}

struct Tally {
    margins: Vec<(HypothesisId, f64)>,
    failures: Vec<HypothesisFailure>,
}

impl Tally {
    fn check(&mut self, s: Option<f64>, id: HypothesisId, lhs: f64, rhs: f64, strict: bool) {
        let scale = lhs.abs().max(rhs.abs());
        let margin = if scale > 0.0 { (rhs - lhs) / scale } else { 0.0 };
        match self.margins.iter_mut().find(|(k, _)| *k == id) {
            Some((_, m)) => *m = m.min(margin),
            None => self.margins.push((id, margin)),
        }
        let ok = if strict { lhs < rhs } else { lhs <= rhs };
        if !ok || !margin.is_finite() {
            self.failures.push(HypothesisFailure { s, id, lhs, rhs });
        }
    }
}

/// Pointwise sweep of every hypothesis on `s_grid`.
///
/// Inequality failures are reported in the returned value; an `Err` is only
/// produced for invalid parameters or a grid that does not cover
/// `[1e-6, 1e6]` with at least 10³ points.
pub fn verify_hypotheses(params: &DoublePowerParams, s_grid: &[f64]) -> Result<HypothesisReport> {
    params.validate()?;
    if s_grid.len() < 1000 {
        return Err(Error::InvalidParams(format!(
            "verification grid needs at least 1000 points, got {}",
            s_grid.len()
        )));
    }
    let lo = s_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s_grid.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0 && lo <= 1e-6 * (1.0 + 1e-9) && hi >= 1e6 * (1.0 - 1e-9)) {
        return Err(Error::InvalidParams(format!(
            "verification grid must span [1e-6, 1e6] with positive points, got [{lo}, {hi}]"
        )));
    }

    let (p, q, eps) = (params.p, params.q, params.eps);
    let mut tally = Tally {
        margins: Vec::new(),
        failures: Vec::new(),
    };
    use HypothesisId::*;
    tally.check(None, CondQ, 0.0, q - 2.0 - eps, true);
    tally.check(None, CondP, 0.0, p - 2.0 - eps, true);
    tally.check(None, CondMixedQ, 0.0, 2.0 * q - p - 2.0 - eps, true);
    tally.check(None, CondMixedP, 0.0, 2.0 * p - q - 2.0 - eps, true);

    for &s in s_grid {
        let [f0, f1, f2, f3] = params.derivatives(s);
        let at = Some(s);
        if s >= 1.0 {
            tally.check(at, GrowthLarge, params.c0 * s.powf(p), f0, false);
            tally.check(at, CurvatureLarge, f2.abs(), params.c2 * s.powf(p - 2.0), false);
        }
        if s <= 1.0 {
            tally.check(at, GrowthSmall, params.c0 * s.powf(q), f0, true);
            tally.check(at, CurvatureSmall, f2.abs(), params.c2 * s.powf(q - 2.0), false);
        }
        tally.check(at, Superquadratic, 0.0, params.mu1 * f0, true);
        tally.check(at, Superquadratic, params.mu1 * f0, f1 * s, false);
        tally.check(at, Convexity, params.mu2() * f1 * s, f2 * s * s, true);
        tally.check(at, ThirdOrder, 0.0, f3 * s * s * s, true);
        let gamma = s.powf(q - p);
        tally.check(at, GammaQuadratic, 0.0, gamma_quadratic(p, q, eps, gamma), true);
    }

    let fit = fit_constants(params, s_grid);
    let passed = tally.failures.is_empty();
    Ok(HypothesisReport {
        checked_points: s_grid.len(),
        failures: tally.failures,
        coefficients: raw_appendix_coefficients(p, q),
        margins: tally.margins,
        c0_max: fit.c0_max,
        c2_min: fit.c2_min,
        c3_min: fit.c3_min,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> DoublePowerParams {
        DoublePowerParams::default_3d()
    }

    #[test]
    fn values_at_zero_one_two() {
        let pr = params();
        for k in 0..4 {
            assert_eq!(pr.eval(0.0, k).unwrap(), 0.0);
        }
        assert_eq!(pr.eval(1.0, 0).unwrap(), 0.5);
        let expected = 2f64.powf(6.5) / 3.0;
        assert!((pr.eval(2.0, 0).unwrap() - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn invalid_order_rejected() {
        assert!(matches!(params().eval(1.0, 4), Err(Error::InvalidOrder(4))));
    }

    #[test]
    fn closed_forms_match_expanded_coefficients() {
        // f' and f'' as written out in expanded form, s > 0.
        let pr = params();
        let (p, q) = (pr.p, pr.q);
        for &s in &[0.01f64, 0.3, 1.0, 1.7, 25.0] {
            let g: f64 = s.powf(q - p);
            let d1 = (q * s.powf(q - 1.0) + p * s.powf(2.0 * q - p - 1.0)) / (1.0 + g).powi(2);
            let d2 = s.powf(q - 2.0) / (1.0 + g).powi(2)
                * (q * (q - 1.0) + p * (2.0 * q - p - 1.0) * g
                    - 2.0 * (q - p) * (q + p * g) * g / (1.0 + g));
            let d3 = 6.0 * (p - q).powi(3) * s.powf(4.0 * q - 3.0 * p - 3.0) / (1.0 + g).powi(4)
                - 6.0 * (1.0 + p - 2.0 * q) * (p - q).powi(2) * s.powf(3.0 * q - 2.0 * p - 3.0)
                    / (1.0 + g).powi(3)
                + (2.0 * p + 3.0 * p * p + p.powi(3) - 2.0 * q - 12.0 * p * q - 6.0 * p * p * q
                    + 9.0 * q * q
                    + 12.0 * p * q * q
                    - 7.0 * q.powi(3))
                    * s.powf(2.0 * q - p - 3.0)
                    / (1.0 + g).powi(2)
                + q * (2.0 - 3.0 * q + q * q) * s.powf(q - 3.0) / (1.0 + g);
            let [_, f1, f2, f3] = pr.derivatives(s);
            assert!((f1 - d1).abs() <= 1e-12 * d1.abs(), "f' at {s}");
            assert!((f2 - d2).abs() <= 1e-12 * d2.abs(), "f'' at {s}");
            assert!((f3 - d3).abs() <= 1e-10 * d3.abs(), "f''' at {s}");
        }
    }

    #[test]
    fn coefficients_of_default_family() {
        let c = raw_appendix_coefficients(5.5, 6.5);
        assert!((c.a - 160.875).abs() < 1e-12);
        assert!((c.limit_at_infinity - 86.625).abs() <= 1e-12 * 86.625);
    }

    #[test]
    fn degenerate_equal_exponents_collapse() {
        let c = raw_appendix_coefficients(6.0, 6.0);
        assert_eq!((c.b, c.c, c.d), (0.0, 0.0, 0.0));
        assert_eq!(c.a, 6.0 * 4.0 * 5.0);
    }

    #[test]
    fn default_family_passes() {
        let pr = DoublePowerParams::new(3, 5.5, 6.5, 0.5, 5.5).unwrap();
        let rep = verify_hypotheses(&pr, &default_hypothesis_grid()).unwrap();
        assert!(rep.passed, "{:?}", rep.failures.first());
        assert!(rep.margins.iter().all(|(_, m)| *m > 0.0), "{:?}", rep.margins);
    }

    #[test]
    fn wide_exponent_gap_fails() {
        let pr = DoublePowerParams::new(3, 3.0, 20.0, 0.5, 3.0).unwrap();
        let rep = verify_hypotheses(&pr, &default_hypothesis_grid()).unwrap();
        assert!(!rep.passed);
        assert!(rep
            .failures
            .iter()
            .any(|f| f.s.is_some() && f.id == HypothesisId::Convexity));
        assert!(rep.failures.iter().any(|f| f.id == HypothesisId::CondMixedP));
    }

    #[test]
    fn mu1_bound_at_one() {
        // μ₁ f(1) ≤ f'(1) forces μ₁ ≤ (p+q)/2.
        let pr = params();
        let [f0, f1, _, _] = pr.derivatives(1.0);
        assert!((f1 - (pr.p + pr.q) / 4.0).abs() < 1e-14);
        assert!(((pr.p + pr.q) / 2.0 * f0 - f1).abs() < 1e-14);
    }

    #[test]
    fn short_grid_is_an_error() {
        assert!(verify_hypotheses(&params(), &log_grid(1e-6, 1e6, 100)).is_err());
        assert!(verify_hypotheses(&params(), &log_grid(1e-3, 1e6, 2000)).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(DoublePowerParams::new(3, 6.5, 7.0, 0.5, 3.0).is_err());
        assert!(DoublePowerParams::new(3, 5.5, 5.9, 0.5, 3.0).is_err());
        assert!(DoublePowerParams::new(2, 5.5, 6.5, 0.5, 3.0).is_err());
        assert!(DoublePowerParams::new(3, 5.5, 6.5, 0.0, 3.0).is_err());
        assert!(DoublePowerParams::new(3, 5.5, 6.5, 0.5, 2.0).is_err());
        // N = 8: 2* = 8/3 < 3, so q in (2*, 3] must be refused.
        assert!(DoublePowerParams::new(8, 2.5, 2.9, 0.1, 2.2).is_err());
    }

    #[test]
    fn asymptotic_powers() {
        let pr = params();
        let big = pr.eval(1e3, 0).unwrap() / 1e3f64.powf(pr.p);
        let small = pr.eval(1e-3, 0).unwrap() / 1e-3f64.powf(pr.q);
        assert!((big - 1.0).abs() < 0.01);
        assert!((small - 1.0).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn derivatives_match_central_differences(ls in -3.0f64..3.0) {
            let pr = params();
            let s = 10f64.powf(ls);
            let h = 1e-5 * s;
            for k in 1..4 {
                let fd = (pr.eval(s + h, k - 1).unwrap() - pr.eval(s - h, k - 1).unwrap()) / (2.0 * h);
                let exact = pr.eval(s, k).unwrap();
                prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                    "order {} at s={}: fd {} exact {}", k, s, fd, exact);
            }
        }

        #[test]
        fn parity_is_exact(s in -50.0f64..50.0) {
            let pr = params();
            for k in 0..4 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert_eq!(pr.eval(-s, k).unwrap(), sign * pr.eval(s, k).unwrap());
            }
        }

        #[test]
        fn positivity(ls in -6.0f64..6.0) {
            let pr = params();
            let s = 10f64.powf(ls);
            let [f0, f1, f2, f3] = pr.derivatives(s);
            prop_assert!(f0 > 0.0 && f1 * s > 0.0 && f2 * s * s > 0.0 && f3 * s.powi(3) > 0.0);
        }

        #[test]
        fn fast_path_agrees(s in -40.0f64..40.0) {
            let pr = params();
            let d = pr.derivatives(s);
            let (f, df) = pr.value_and_slope(s);
            prop_assert!((f - d[0]).abs() <= 1e-14 * d[0].abs().max(1e-300));
            prop_assert!((df - d[1]).abs() <= 1e-14 * d[1].abs().max(1e-300));
        }
    }
}
