mod common;

use proptest::prelude::*;
use roughstruct_core::grid_paths::{
    evaluate_test_function, generate_path, holder_seminorm, holder_seminorm_with, PairScan,
    PathKind, Profile, SampledPath, TestFunction, TimeGrid,
};
use roughstruct_core::reconstruction::wavelet_lift;
use roughstruct_core::rough_core::{
    chen_defect, chen_extend, lift_piecewise_smooth, LiftMode, RoughPath,
};
use roughstruct_core::wavelets::WaveletBasis;

fn fbm(level: u32, dim: usize, hurst: f64, seed: u64) -> SampledPath {
    generate_path(
        &PathKind::Fbm { hurst, seed },
        TimeGrid::new(1.0, level).unwrap(),
        dim,
    )
    .unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, h: f64) -> f64 {
    let n = (((b - a) / h).round() as usize).max(2) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn holder_seminorm_bounds_every_increment(seed in 0u64..1000, alpha in 0.2f64..0.6, dim in 1usize..3) {
        let w = fbm(6, dim, 0.45, seed);
        let norm = holder_seminorm(&w, alpha).unwrap();
        let grid = *w.grid();
        for s in 0..grid.len() {
            for t in s + 1..grid.len() {
                let inc = w.increment(s, t);
                let size = inc.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dt = grid.node(t) - grid.node(s);
                prop_assert!(norm * dt.powf(alpha) >= size * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn test_function_mass_is_scale_free(s in 0.0f64..1.0, lambda in 0.05f64..1.0) {
        let tf = TestFunction::new(Profile::Bump, s, lambda).unwrap();
        let mass = simpson(|t| evaluate_test_function(&tf, t), s - lambda, s + lambda, lambda / 64.0);
        let reference = 0.443_993_816_168_079_4;
        prop_assert!((mass - reference).abs() <= 1e-6 * reference, "mass {mass}");
    }

    #[test]
    fn chen_extend_is_additive(seed in 0u64..1000, a in 0usize..64, b in 0usize..64, c in 0usize..64) {
        let mut idx = [a, b, c];
        idx.sort_unstable();
        prop_assume!(idx[0] < idx[1] && idx[1] < idx[2]);
        let [s, u, t] = idx;
        let w = fbm(6, 2, 0.4, seed);
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.35).unwrap();
        let whole = chen_extend(rp.second(), &w, s, t).unwrap();
        let left = chen_extend(rp.second(), &w, s, u).unwrap();
        let right = chen_extend(rp.second(), &w, u, t).unwrap();
        let (p, q) = (w.increment(s, u), w.increment(u, t));
        for i in 0..2 {
            for j in 0..2 {
                let k = i * 2 + j;
                let rebuilt = left[k] + right[k] + p[i] * q[j];
                prop_assert!((whole[k] - rebuilt).abs() <= 1e-12 * (1.0 + whole[k].abs()));
            }
        }
    }

    #[test]
    fn linear_lift_satisfies_chen(seed in 0u64..1000, dim in 1usize..4) {
        let w = fbm(7, dim, 0.4, seed);
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.35).unwrap();
        prop_assert!(chen_defect(&rp) <= 1e-10);
    }

    #[test]
    fn scalar_lift_is_half_square(seed in 0u64..1000) {
        let w = fbm(6, 1, 0.4, seed);
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.35).unwrap();
        let n = w.grid().intervals();
        for s in (0..n).step_by(5) {
            for t in s + 1..=n {
                let x = rp.second_order(s, t).unwrap()[0];
                let inc = w.get(t, 0) - w.get(s, 0);
                prop_assert!((x - 0.5 * inc * inc).abs() <= 1e-13 * (1.0 + inc * inc));
            }
        }
    }

    #[test]
    fn perturbation_keeps_chen(seed in 0u64..1000, amp in -2.0f64..2.0) {
        let w = fbm(6, 2, 0.4, seed);
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.35).unwrap();
        let grid = *w.grid();
        let bump = |k: usize| {
            let u = 4.0 * (grid.node(k) - 0.5);
            if u.abs() < 1.0 { amp * (-1.0 / (1.0 - u * u)).exp() } else { 0.0 }
        };
        let shifted = RoughPath::from_blocks(w.clone(), 0.35, |s, t, out| {
            let x = rp.second_order(s, t).unwrap();
            let df = bump(t) - bump(s);
            for (o, v) in out.iter_mut().zip(x) {
                *o = v;
            }
            out[1] += df;
            out[2] -= df;
        })
        .unwrap();
        prop_assert!(chen_defect(&shifted) <= 1e-10);
    }
}

#[test]
fn holder_seminorm_grows_under_refinement() {
    let coarse = generate_path(&PathKind::SinCos, TimeGrid::new(1.0, 6).unwrap(), 2).unwrap();
    let fine = generate_path(&PathKind::SinCos, TimeGrid::new(1.0, 7).unwrap(), 2).unwrap();
    for alpha in [0.3, 0.5, 0.9] {
        let a = holder_seminorm_with(&coarse, alpha, PairScan::Exhaustive).unwrap();
        let b = holder_seminorm_with(&fine, alpha, PairScan::Exhaustive).unwrap();
        assert!(a <= b + 1e-15, "alpha {alpha}: {a} > {b}");
    }
}

#[test]
fn half_hurst_increments_decorrelate() {
    let grid = TimeGrid::new(1.0, 5).unwrap();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for seed in 0..200 {
        let w = generate_path(&PathKind::Fbm { hurst: 0.5, seed }, grid, 1).unwrap();
        let x = w.get(8, 0) - w.get(0, 0);
        let y = w.get(32, 0) - w.get(16, 0);
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    let corr = sxy / (sxx * syy).sqrt();
    assert!(corr.abs() < 0.1, "correlation {corr}");
}

#[test]
fn wavelet_lift_chen_defect_is_small() {
    let basis = WaveletBasis::standard();
    for seed in [3, 4] {
        let w = fbm(10, 2, 0.45, seed);
        let rp = wavelet_lift(&w, 0.4, &basis, 8).unwrap();
        let sup = w.sup_norm();
        assert!(chen_defect(&rp) <= 1e-8 * (1.0 + sup * sup));
    }
}
