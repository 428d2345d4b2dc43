mod common;

use nehari_core::config::{Profile, ProfileKind};
use nehari_core::fibering::phi;
use nehari_core::grid::{
    apply_linear, d12_norm_sq, dirichlet_form, energy, energy_gradient, invert_linear, laplacian,
    v_norm_sq, GridFunction, ProblemSpec, RadialGrid,
};
use nehari_core::DoublePowerParams;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{default_spec, random_bumps, small_spec};

#[test]
fn v_norm_trivial_cases() {
    let spec = small_spec(20.0, 400, 0.0);
    let z = GridFunction::zeros(spec.grid());
    assert_eq!(v_norm_sq(&z, &spec).unwrap(), 0.0);
    let u = GridFunction::from_fn(spec.grid(), |r| (-r).exp());
    let free = spec.free();
    assert_eq!(v_norm_sq(&u, &free).unwrap(), d12_norm_sq(&u));
}

#[test]
fn norm_equivalence_on_random_functions() {
    let spec = default_spec(1);
    let c = spec.equivalence_constant();
    assert!(c > 0.0 && c < 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let u = random_bumps(&mut rng, spec.grid(), 3, (-1.0, 1.0), 6.0);
        let full = d12_norm_sq(&u);
        let with_v = v_norm_sq(&u, &spec).unwrap();
        assert!(c * full < with_v && with_v < full, "{c} {full} {with_v}");
    }
}

#[test]
fn energy_examples() {
    let spec = default_spec(1);
    let z = GridFunction::zeros(spec.grid());
    assert_eq!(energy(&z, &spec), 0.0);
    let free = spec.free();
    let w = GridFunction::from_fn(spec.grid(), |r| (-r * r).exp());
    assert!(energy(&w.scaled(1e3), &free) < 0.0);
    let e = energy(&w, &spec);
    assert!((phi(&w, &spec, 1.0, 0).unwrap() - e).abs() <= 1e-14 * e.abs());
    assert_eq!(energy_gradient(&z, &spec.homogeneous()).max_abs(), 0.0);
}

#[test]
fn inverse_round_trip() {
    let spec = default_spec(1);
    let z = GridFunction::zeros(spec.grid());
    assert_eq!(invert_linear(&z, &spec).unwrap().max_abs(), 0.0);
    let u = GridFunction::from_fn(spec.grid(), |r| (1.0 + r * r).powf(-0.5) * (0.5 * r).cos());
    let back = invert_linear(&apply_linear(&u, &spec), &spec).unwrap();
    let err = back.axpy(-1.0, &u).max_abs() / u.max_abs();
    assert!(err < 1e-10, "{err}");
}

/// `-Δu = ρ` in ℝ³ solved by `u(r) = (1/r)∫₀ʳ ρ s² ds + ∫ᵣ^∞ ρ s ds`, integrated by Simpson's rule.
fn newtonian_potential(rho: impl Fn(f64) -> f64, r: f64) -> f64 {
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let inner = simpson(&|s| rho(s) * s * s, 0.0, r, 2000) / r;
    let outer = simpson(&|s| rho(s) * s, r, 12.0, 4000);
    inner + outer
}

#[test]
fn inverse_matches_newtonian_potential() {
    let grid = RadialGrid::new(3, 30.0, 3000).unwrap();
    let zero = GridFunction::zeros(&grid);
    let spec = ProblemSpec::new(DoublePowerParams::default_3d(), zero.clone(), zero, 3.0, 2.0).unwrap();
    let rho = |r: f64| (-r * r).exp();
    let u = invert_linear(&GridFunction::from_fn(&grid, rho), &spec).unwrap();
    let peak = newtonian_potential(rho, grid.nodes()[0]);
    for (i, (&r, &x)) in grid.nodes().iter().zip(u.values()).enumerate() {
        if i % 97 == 0 {
            let exact = newtonian_potential(rho, r);
            assert!((x - exact).abs() < 1e-4 * peak, "r = {r}: {x} vs {exact}");
        }
    }
}

#[test]
fn lp_norms_converge_quadratically() {
    let norm = |profile: &Profile, m: usize| {
        let grid = RadialGrid::new(3, 5.0, m).unwrap();
        profile.sample(&grid).lp_norm(5.5)
    };
    // Flat at both ends of its support, so the midpoint rule does better than h².
    let bump = Profile {
        kind: ProfileKind::CompactBump,
        amplitude: 1.0,
        width: 3.0,
    };
    let exact = norm(&bump, 6400);
    for m in [200, 400, 800] {
        let h = 5.0 / m as f64;
        assert!((norm(&bump, m) - exact).abs() <= h * h * exact, "M = {m}");
    }
    // Cut off at r = 5 with nonzero slope: the plain second-order rate shows.
    let tail = Profile {
        kind: ProfileKind::PowerTail,
        amplitude: 1.0,
        width: 3.0,
    };
    let (a, b, c) = (norm(&tail, 200), norm(&tail, 400), norm(&tail, 800));
    let ratio = (a - b).abs() / (b - c).abs();
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_by_parts_is_exact(
        a in prop::collection::vec(-2.0f64..2.0, 4),
        b in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let grid = RadialGrid::new(3, 10.0, 300).unwrap();
        let u = GridFunction::from_fn(&grid, |r| a[0] * (-(r - a[1]).powi(2)).exp() + a[2] * (a[3] * r).sin() / (1.0 + r));
        let v = GridFunction::from_fn(&grid, |r| b[0] * (-(r - b[1]).powi(2) / 4.0).exp() + b[2] * (b[3] * r).cos() / (1.0 + r * r));
        let lhs = laplacian(&u).inner(&v);
        let rhs = dirichlet_form(&u, &v);
        let scale = d12_norm_sq(&u).sqrt() * d12_norm_sq(&v).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
    }
}
