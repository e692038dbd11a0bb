mod common;

use proptest::prelude::*;
use roughstruct_core::grid_paths::{generate_path, PathKind, SampledPath, TimeGrid};
use roughstruct_core::modelled_distributions::{Nonlinearity, Restricted, ScalarFn, VectorField};
use roughstruct_core::rde_solver::{solve_rde, IntegralRoute, SolverConfig};
use roughstruct_core::rough_core::{lift_piecewise_smooth, LiftMode, RoughPath};
use roughstruct_core::wavelets::WaveletBasis;
use roughstruct_core::Error;

fn lift(w: &SampledPath) -> RoughPath {
    lift_piecewise_smooth(w, &LiftMode::Linear, 0.45).unwrap()
}

fn tanh_field() -> VectorField {
    VectorField::Componentwise {
        d: 1,
        n: 1,
        g: ScalarFn::Tanh,
    }
}

fn sup_gap(a: &SampledPath, b: &SampledPath) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn fixed_point_gap(f: &dyn Nonlinearity, y: &SampledPath, yp: &SampledPath) -> f64 {
    let mut out = vec![0.0; yp.dim()];
    let mut worst = 0.0f64;
    for k in 0..y.grid().len() {
        f.eval(y.value(k), &mut out);
        for (a, b) in out.iter().zip(yp.value(k)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solver_invariants_on_rough_drivers(seed in 0u64..1000, xi in -2.0f64..2.0) {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let w = generate_path(&PathKind::Fbm { hurst: 0.45, seed }, grid, 1).unwrap();
        let rp = lift(&w);
        let f = tanh_field();
        let cfg = SolverConfig::default();
        let (sol, diag) = solve_rde(&[xi], &f, &rp, &cfg).unwrap();
        prop_assert!(diag.windows.iter().all(|r| r.ratio < 1.0));
        prop_assert!(fixed_point_gap(&f, &sol.y, &sol.y_prime) <= 2.0 * cfg.fixed_point_tol);
        prop_assert!(diag.residual <= 10.0 * cfg.fixed_point_tol);
        for r in &diag.windows {
            let (lo, hi) = r.working_box[0];
            let k0 = grid.index_of(r.t0).unwrap();
            let k1 = grid.index_of(r.t1).unwrap();
            for k in k0..=k1 {
                let y = sol.y.get(k, 0);
                prop_assert!(lo <= y && y <= hi);
            }
        }

        let halves = SolverConfig { window_level: 1, ..SolverConfig::default() };
        let (split, diag2) = solve_rde(&[xi], &f, &rp, &halves).unwrap();
        prop_assert!(diag2.windows.len() >= 2);
        prop_assert!(sup_gap(&sol.y, &split.y) <= 10.0 * cfg.fixed_point_tol);
    }
}

#[test]
fn wavelet_route_matches_riemann_route() {
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let w = SampledPath::from_fn(grid, 1, |t, r| r[0] = t).unwrap();
    let rp = lift(&w);
    let f = VectorField::identity();
    let (riemann, _) = solve_rde(&[1.0], &f, &rp, &SolverConfig::default()).unwrap();
    let cfg = SolverConfig {
        route: IntegralRoute::Wavelet {
            basis: WaveletBasis::standard(),
            levels_below: 2,
        },
        ..SolverConfig::default()
    };
    let (wavelet, _) = solve_rde(&[1.0], &f, &rp, &cfg).unwrap();
    let end = wavelet.y.get(1024, 0);
    assert!((end - std::f64::consts::E).abs() < 1e-3, "y(1) = {end}");
    assert!(sup_gap(&riemann.y, &wavelet.y) < 1e-3);
}

#[test]
fn mollified_drivers_converge() {
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let base = |t: f64| (2.0 * std::f64::consts::PI * t).sin() + t;
    let w = SampledPath::from_fn(grid, 1, |t, r| r[0] = base(t)).unwrap();
    let f = tanh_field();
    let cfg = SolverConfig::default();
    let (reference, _) = solve_rde(&[0.5], &f, &lift(&w), &cfg).unwrap();
    let h = grid.step();
    let mut gaps = Vec::new();
    for radius in [64usize, 16, 4] {
        // moving average over [t - radius h, t + radius h], clamped to [0, 1]
        let smooth = SampledPath::from_fn(grid, 1, |t, r| {
            let mut acc = 0.0;
            for i in 0..=2 * radius {
                let u = (t + (i as f64 - radius as f64) * h).clamp(0.0, 1.0);
                acc += base(u);
            }
            r[0] = acc / (2 * radius + 1) as f64;
        })
        .unwrap();
        let (sol, _) = solve_rde(&[0.5], &f, &lift(&smooth), &cfg).unwrap();
        gaps.push(sup_gap(&sol.y, &reference.y));
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn restricted_field_reports_box_violation() {
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let w = SampledPath::from_fn(grid, 1, |t, r| r[0] = t).unwrap();
    let f = Restricted {
        inner: Box::new(VectorField::identity()),
        lo: vec![0.0],
        hi: vec![2.0],
    };
    let err = solve_rde(&[1.0], &f, &lift(&w), &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::WorkingBoxExceeded), "{err}");
    let wide = Restricted {
        inner: Box::new(VectorField::identity()),
        lo: vec![-100.0],
        hi: vec![100.0],
    };
    assert!(solve_rde(&[1.0], &wide, &lift(&w), &SolverConfig::default()).is_ok());
}

#[test]
fn rotation_keeps_unit_circle() {
    let grid = TimeGrid::new(2.0, 10).unwrap();
    let w = generate_path(&PathKind::SinCos, grid, 1).unwrap();
    let (sol, _) = solve_rde(
        &[1.0, 0.0],
        &VectorField::rotation(),
        &lift(&w),
        &SolverConfig::default(),
    )
    .unwrap();
    for k in 0..grid.len() {
        let angle = w.get(k, 0) - w.get(0, 0);
        assert!((sol.y.get(k, 0) - angle.cos()).abs() < 1e-3);
        assert!((sol.y.get(k, 1) - angle.sin()).abs() < 1e-3);
    }
}
