//! The fibering map `φ(t) = E(t u)` along a ray and the Nehari roots on it.
//!
//! For fixed `u ≠ 0` write `φ₀` for the map with `g = 0`. Since `f''' s³ > 0`,
//! `φ'''` is negative for `t > 0`, so `φ₀'` is strictly concave with a unique
//! maximum at `T` (where `φ₀''(T) = 0`, i.e. `T u` lies on the manifold
//! `‖w‖²_V = ∫ f''(w) w²`). Every critical point of `φ_g = φ₀ - t ∫gu` is a
//! root of the concave function `φ_g'`, which has at most two positive roots
//! and none when `∫ g u ≥ φ₀'(T)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{v_norm_sq, GridFunction, ProblemSpec};
use crate::nonlinearity::DoublePowerParams;
use crate::roots::safeguarded_newton;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingCase {
    NegativePairing,
    ZeroPairing,
    PositivePairingTwoRoots,
    PositivePairingNoRoots,
}

impl PairingCase {
    /// Number of positive critical points of `φ_g`.
    pub fn root_count(self) -> usize {
        match self {
            PairingCase::NegativePairing | PairingCase::ZeroPairing => 1,
            PairingCase::PositivePairingTwoRoots => 2,
            PairingCase::PositivePairingNoRoots => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Local minimum of the fibering map, `φ'' > 0`.
    Plus,
    /// Maximum of the fibering map, `φ'' < 0`.
    Minus,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberingProfile {
    /// `‖u‖_V`.
    pub direction_norm: f64,
    /// `∫ g u`.
    pub g_pairing: f64,
    /// Root of `φ₀'` (the homogeneous Nehari time).
    pub t0: Option<f64>,
    /// Maximizer of `φ₀'`.
    pub t_manifold: f64,
    /// Maximum point of `φ_g` (minus branch).
    pub t1: Option<f64>,
    /// Local minimum point of `φ_g` (plus branch).
    pub t2: Option<f64>,
    /// `φ₀'(T) - ∫ g u`.
    pub margin: f64,
    pub case: PairingCase,
}

impl FiberingProfile {
    pub fn root(&self, branch: Branch) -> Option<f64> {
        match branch {
            Branch::Plus => self.t2,
            Branch::Minus => self.t1,
        }
    }
}

/// Relative size below which `∫ g u` counts as zero, measured against `∫ |g u|`.
pub const ZERO_PAIRING_TOL: f64 = 1e-13;

/// Precomputed restriction of the energy to the ray through `u`.
#[derive(Debug, Clone)]
pub struct FiberMap<'a> {
    params: &'a DoublePowerParams,
    values: &'a [f64],
    weights: &'a [f64],
    norm_sq: f64,
    pairing: f64,
    pairing_scale: f64,
}

impl<'a> FiberMap<'a> {
    pub fn new(u: &'a GridFunction, spec: &'a ProblemSpec) -> Result<Self> {
        let norm_sq = v_norm_sq(u, spec)?;
        let mut pairing = 0.0;
        let mut pairing_scale = 0.0;
        for ((x, g), w) in u
            .values()
            .iter()
            .zip(spec.forcing().values())
            .zip(u.grid().weights())
        {
            pairing += g * x * w;
            pairing_scale += (g * x * w).abs();
        }
        Ok(Self {
            params: &spec.params,
            values: u.values(),
            weights: u.grid().weights(),
            norm_sq,
            pairing,
            pairing_scale,
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn pairing(&self) -> f64 {
        self.pairing
    }

    /// `[φ₀(t), φ₀'(t), φ₀''(t), φ₀'''(t)]` (no forcing term).
    pub fn homogeneous(&self, t: f64) -> [f64; 4] {
        let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
        for (&x, &w) in self.values.iter().zip(self.weights) {
            if x == 0.0 {
                continue;
            }
            let [f0, f1, f2, f3] = self.params.derivatives(t * x);
            s0 += f0 * w;
            s1 += f1 * x * w;
            s2 += f2 * x * x * w;
            s3 += f3 * x * x * x * w;
        }
        let n = self.norm_sq;
        [0.5 * t * t * n - s0, t * n - s1, n - s2, -s3]
    }

    /// `[φ_g(t), φ_g'(t), φ_g''(t), φ_g'''(t)]`.
    pub fn eval(&self, t: f64) -> [f64; 4] {
        let [a, b, c, d] = self.homogeneous(t);
        [a - t * self.pairing, b - self.pairing, c, d]
    }

    /// `φ_g^{(order)}(t)`.
    pub fn phi(&self, t: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::InvalidOrder(order));
        }
        Ok(self.eval(t)[order])
    }

    /// The unique `T > 0` with `φ₀''(T) = 0`.
    pub fn t_manifold(&self) -> Result<f64> {
        let top = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(self.norm_sq > 0.0) || top == 0.0 {
            return Err(Error::BracketNotFound("T (zero direction)"));
        }
        let mut hi = 1.0 / top;
        let mut tries = 0;
        while self.homogeneous(hi)[2] >= 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 200 || !hi.is_finite() {
                return Err(Error::BracketNotFound("T"));
            }
        }
        let ftol = 1e-13 * self.norm_sq;
        safeguarded_newton(
            |t| {
                let d = self.homogeneous(t);
                (d[2], d[3])
            },
            0.0,
            hi,
            ftol,
            "T",
        )
    }

    /// Smallest doubling of `2 t_start` at which `slope` is negative.
    fn upper_bracket(&self, t_start: f64, slope: impl Fn(f64) -> f64) -> Result<f64> {
        let mut hi = 2.0 * t_start;
        for _ in 0..200 {
            if slope(hi) < 0.0 {
                return Ok(hi);
            }
            hi *= 2.0;
        }
        Err(Error::BracketNotFound("upper root"))
    }

    fn root_tol(&self) -> f64 {
        1e-12 * self.norm_sq.max(1.0)
    }

    fn slope_root(&self, lo: f64, hi: f64, pairing: f64, what: &'static str) -> Result<f64> {
        let tol = self.root_tol();
        safeguarded_newton(
            |t| {
                let d = self.homogeneous(t);
                (d[1] - pairing, d[2])
            },
            lo,
            hi,
            tol,
            what,
        )
    }

    /// `t1` alone, for directions already close to the minus branch.
    ///
    /// Right of the root, `φ_g'` is negative, decreasing and concave, so Newton
    /// from there decreases monotonically onto `t1` without overshoot. Falls back
    /// to [`FiberMap::profile`] if an iterate crosses into `φ_g'' ≥ 0`.
    pub fn minus_root(&self) -> Result<f64> {
        let tol = self.root_tol();
        let mut t = 1.0;
        let mut d = self.eval(t);
        let mut tries = 0;
        while !(d[1] < 0.0 && d[2] < 0.0) {
            if d[1].abs() <= tol && d[2] < 0.0 {
                return Ok(t);
            }
            t *= 2.0;
            d = self.eval(t);
            tries += 1;
            if tries > 200 || !d[1].is_finite() {
                return Err(Error::BracketNotFound("t1"));
            }
        }
        for _ in 0..100 {
            if d[1].abs() <= tol {
                return Ok(t);
            }
            if d[2] >= 0.0 {
                break;
            }
            let next = t - d[1] / d[2];
            if !(next > 0.0) {
                break;
            }
            if next >= t {
                return Ok(t);
            }
            t = next;
            d = self.eval(t);
        }
        self.profile()?.t1.ok_or(Error::BranchAbsent("minus"))
    }

    pub fn profile(&self) -> Result<FiberingProfile> {
        let t_manifold = self.t_manifold()?;
        let peak = self.homogeneous(t_manifold)[1];
        let pairing = self.pairing;
        let margin = peak - pairing;

        let upper0 = self.upper_bracket(t_manifold, |t| self.homogeneous(t)[1])?;
        let t0 = self.slope_root(t_manifold, upper0, 0.0, "t0")?;

        let zero = pairing.abs() <= ZERO_PAIRING_TOL * self.pairing_scale;
        let (case, t1, t2) = if zero {
            (PairingCase::ZeroPairing, Some(t0), None)
        } else if pairing < 0.0 {
            let upper = self.upper_bracket(t0, |t| self.homogeneous(t)[1] - pairing)?;
            let t1 = self.slope_root(t0, upper, pairing, "t1")?;
            (PairingCase::NegativePairing, Some(t1), None)
        } else if margin > 0.0 {
            let t2 = self.slope_root(0.0, t_manifold, pairing, "t2")?;
            let t1 = self.slope_root(t_manifold, t0, pairing, "t1")?;
            (PairingCase::PositivePairingTwoRoots, Some(t1), Some(t2))
        } else {
            (PairingCase::PositivePairingNoRoots, None, None)
        };

        Ok(FiberingProfile {
            direction_norm: self.norm_sq.sqrt(),
            g_pairing: pairing,
            t0: Some(t0),
            t_manifold,
            t1,
            t2,
            margin,
            case,
        })
    }
}

/// `φ_g^{(order)}(t)` for the ray through `u`.
pub fn phi(u: &GridFunction, spec: &ProblemSpec, t: f64, order: usize) -> Result<f64> {
    FiberMap::new(u, spec)?.phi(t, order)
}

/// The unique `T > 0` with `T u` on the manifold `‖w‖²_V = ∫ f''(w) w²`.
pub fn find_t(u: &GridFunction, spec: &ProblemSpec) -> Result<f64> {
    FiberMap::new(u, spec)?.t_manifold()
}

pub fn fiber_profile(u: &GridFunction, spec: &ProblemSpec) -> Result<FiberingProfile> {
    FiberMap::new(u, spec)?.profile()
}

/// Rescales `u` onto the requested Nehari branch.
pub fn project_nehari(u: &GridFunction, spec: &ProblemSpec, branch: Branch) -> Result<GridFunction> {
    let profile = fiber_profile(u, spec)?;
    let t = profile
        .root(branch)
        .ok_or(Error::BranchAbsent(branch.name()))?;
    Ok(u.scaled(t))
}

/// `(t, φ(t), φ'(t))` samples for plotting.
pub fn sample_fiber(
    u: &GridFunction,
    spec: &ProblemSpec,
    ts: &[f64],
) -> Result<Vec<(f64, f64, f64)>> {
    let map = FiberMap::new(u, spec)?;
    Ok(ts
        .iter()
        .map(|&t| {
            let d = map.eval(t);
            (t, d[0], d[1])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{energy, RadialGrid};

    fn setup(g_amp: f64) -> (ProblemSpec, GridFunction) {
        let grid = RadialGrid::new(3, 20.0, 800).unwrap();
        let v = GridFunction::from_fn(&grid, |r| -(-r * r).exp());
        let g = GridFunction::from_fn(&grid, |r| g_amp * (-r * r / 4.0).exp());
        let spec = ProblemSpec::new(DoublePowerParams::default_3d(), v, g, 3.0, 2.0).unwrap();
        let u = GridFunction::from_fn(&grid, |r| 0.7 * (-r * r / 2.0).exp());
        (spec, u)
    }

    #[test]
    fn phi_vanishes_at_origin_and_matches_energy() {
        let (spec, u) = setup(0.01);
        assert_eq!(phi(&u, &spec, 0.0, 0).unwrap(), 0.0);
        let e = energy(&u, &spec);
        assert!((phi(&u, &spec, 1.0, 0).unwrap() - e).abs() < 1e-13 * e.abs().max(1.0));
    }

    #[test]
    fn third_derivative_negative() {
        let (spec, u) = setup(0.01);
        for k in 0..20 {
            let t = 10f64.powf(-3.0 + 0.3 * k as f64);
            assert!(phi(&u, &spec, t, 3).unwrap() < 0.0);
        }
    }

    #[test]
    fn orders_are_consistent() {
        let (spec, u) = setup(0.02);
        let map = FiberMap::new(&u, &spec).unwrap();
        for &t in &[0.3, 1.0, 2.5, 4.0] {
            let h = 1e-5 * t;
            for k in 0..3 {
                let fd = (map.phi(t + h, k).unwrap() - map.phi(t - h, k).unwrap()) / (2.0 * h);
                let exact = map.phi(t, k + 1).unwrap();
                assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "k={k} t={t}");
            }
        }
    }

    #[test]
    fn t_scales_inversely() {
        let (spec, u) = setup(0.0);
        let t = find_t(&u, &spec).unwrap();
        let t3 = find_t(&u.scaled(3.0), &spec).unwrap();
        assert!((t3 * 3.0 - t).abs() < 1e-12 * t);
        let map = FiberMap::new(&u, &spec).unwrap();
        let g = map.homogeneous(t)[2] * t * t;
        assert!(g.abs() <= 1e-10 * map.norm_sq() * t * t);
    }

    #[test]
    fn zero_forcing_has_t1_equal_t0() {
        let (spec, u) = setup(0.0);
        let prof = fiber_profile(&u, &spec).unwrap();
        assert_eq!(prof.case, PairingCase::ZeroPairing);
        assert_eq!(prof.t1, prof.t0);
        assert!(prof.t2.is_none());
    }

    #[test]
    fn small_positive_forcing_orders_roots() {
        let (spec, u) = setup(0.01);
        let prof = fiber_profile(&u, &spec).unwrap();
        assert_eq!(prof.case, PairingCase::PositivePairingTwoRoots);
        let (t1, t2, t0) = (prof.t1.unwrap(), prof.t2.unwrap(), prof.t0.unwrap());
        assert!(0.0 < t2 && t2 < prof.t_manifold && prof.t_manifold < t1 && t1 < t0);
        let map = FiberMap::new(&u, &spec).unwrap();
        assert!(map.eval(t1)[2] < 0.0 && map.eval(t2)[2] > 0.0);
    }

    #[test]
    fn large_forcing_has_no_roots() {
        let (spec, u) = setup(50.0);
        let prof = fiber_profile(&u, &spec).unwrap();
        assert_eq!(prof.case, PairingCase::PositivePairingNoRoots);
        assert!(prof.margin <= 0.0);
        assert!(matches!(
            project_nehari(&u, &spec, Branch::Minus),
            Err(Error::BranchAbsent("minus"))
        ));
    }

    #[test]
    fn negative_forcing_pushes_t1_past_t0() {
        let (spec, u) = setup(-0.05);
        let prof = fiber_profile(&u, &spec).unwrap();
        assert_eq!(prof.case, PairingCase::NegativePairing);
        assert!(prof.t1.unwrap() > prof.t0.unwrap());
    }

    #[test]
    fn projection_is_idempotent_and_signs_energy() {
        let (spec, u) = setup(0.01);
        let minus = project_nehari(&u, &spec, Branch::Minus).unwrap();
        let again = fiber_profile(&minus, &spec).unwrap();
        assert!((again.t1.unwrap() - 1.0).abs() < 1e-10);
        let plus = project_nehari(&u, &spec, Branch::Plus).unwrap();
        assert!((fiber_profile(&plus, &spec).unwrap().t2.unwrap() - 1.0).abs() < 1e-10);
        assert!(energy(&minus, &spec) > 0.0);
        assert!(energy(&plus, &spec) < 0.0);
    }
}
