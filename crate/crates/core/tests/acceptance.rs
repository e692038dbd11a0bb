//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and runtime budgets are pinned below.

mod common;

use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use roughstruct_core::grid_paths::{generate_path, PairScan, PathKind, SampledPath, TimeGrid};
use roughstruct_core::integration::{convergence_order_fit, rough_integral_sum, young_integral};
use roughstruct_core::modelled_distributions::{
    compose, controlled_norm, md_norm, md_seminorm, multiply_by_wdot, to_modelled, ControlledPath,
    ModelledDistribution, ScalarFn, VectorField,
};
use roughstruct_core::rde_solver::{solve_rde, SolverConfig};
use roughstruct_core::reconstruction::{
    certificate_by_scale, lift_continuity_gap, reconstruct, reconstruction_certificate,
    three_point_profile, wavelet_lift, wavelet_rough_integral,
};
use roughstruct_core::regularity_structure::{
    gamma_apply, Model, ModelSpaceVector, MultiIndex, ProbeBattery, StructureGroupElement, Symbol,
};
use roughstruct_core::rough_core::{chen_defect, lift_piecewise_smooth, AnalyticForm, LiftMode};
use roughstruct_core::wavelets::WaveletBasis;

const CHEN_TOL: f64 = 1e-10;
const CHEN_BUDGET: Duration = Duration::from_secs(5);
const AREA_TOL: f64 = 5e-3;
const AREA_BUDGET: Duration = Duration::from_secs(30);
const SCALAR_LIFT_TOL: f64 = 1e-3;
const THREE_POINT_ALPHA: f64 = 0.4;
const THREE_POINT_BUDGET: Duration = Duration::from_secs(10);
const ROUTE_TOL: f64 = 1e-3;
const RECONSTRUCTION_FACTOR: f64 = 3.0;
const EXP_TOL: f64 = 1e-3;
const EXP_BUDGET: Duration = Duration::from_secs(10);
const LIPSCHITZ_FACTOR: f64 = 2.0;
const CONTINUITY_FACTOR: f64 = 3.0;
const YOUNG_TOL: f64 = 1e-3;
const GROUP_TOL: f64 = 1e-14;

type Outcome = Result<String, String>;

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    if elapsed < budget {
        Ok(())
    } else {
        Err(format!("runtime {elapsed:?} over budget {budget:?}"))
    }
}

fn chen_exactness() -> Outcome {
    let start = Instant::now();
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let w = generate_path(&PathKind::Fbm { hurst: 0.4, seed }, grid, 2).unwrap();
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.35).unwrap();
        worst = worst.max(chen_defect(&rp));
    }
    let elapsed = start.elapsed();
    within(elapsed, CHEN_BUDGET)?;
    let msg = format!("max defect {worst:.3e} over 20 paths in {elapsed:.2?}");
    if worst <= CHEN_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn levy_area() -> Outcome {
    let start = Instant::now();
    let basis = WaveletBasis::standard();
    let w = common::sin_cos(FRAC_PI_2, 12);
    let end = w.grid().intervals();
    let mut errors = Vec::new();
    for top in [6, 8, 10] {
        let rp = wavelet_lift(&w, 0.45, &basis, top).map_err(|e| e.to_string())?;
        let x = rp.second_order(0, end).unwrap();
        errors.push((x[1] + FRAC_PI_4).abs());
    }
    let elapsed = start.elapsed();
    within(elapsed, AREA_BUDGET)?;
    let msg = format!(
        "errors at J=6,8,10: {:.3e}, {:.3e}, {:.3e} in {elapsed:.2?}",
        errors[0], errors[1], errors[2]
    );
    if errors[0] > errors[1] && errors[1] > errors[2] && errors[2] <= AREA_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn scalar_lift() -> Outcome {
    let basis = WaveletBasis::standard();
    let grid = TimeGrid::new(1.0, 12).unwrap();
    let w = SampledPath::from_fn(grid, 1, |t, r| {
        r[0] = (2.0 * std::f64::consts::PI * t).sin() + t * t
    })
    .unwrap();
    let rp = wavelet_lift(&w, 0.45, &basis, 10).map_err(|e| e.to_string())?;
    let sup = w.sup_norm();
    let mut worst = 0.0f64;
    let mut check = |s: usize, t: usize| {
        let x = rp.second_order(s, t).unwrap()[0];
        let inc = w.get(t, 0) - w.get(s, 0);
        worst = worst.max((x - 0.5 * inc * inc).abs());
    };
    PairScan::Dyadic.for_each(grid.intervals(), &mut check);
    // every pair of the level-8 subgrid
    for a in (0..grid.len()).step_by(16) {
        for b in (a + 16..grid.len()).step_by(16) {
            check(a, b);
        }
    }
    let bound = SCALAR_LIFT_TOL * (1.0 + sup * sup);
    let msg = format!("max |X - W^2/2| = {worst:.3e}, bound {bound:.3e}");
    if worst <= bound {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn three_point_slope() -> Outcome {
    let start = Instant::now();
    let basis = WaveletBasis::standard();
    let w = common::sin_cos(1.0, 12);
    let rp = lift_piecewise_smooth(
        &w,
        &LiftMode::Analytic(AnalyticForm::SinCos),
        THREE_POINT_ALPHA,
    )
    .unwrap();
    let cp = common::product_integrand(&w);
    let out = wavelet_rough_integral(&cp, &rp, &basis, 10).map_err(|e| e.to_string())?;
    let profile =
        three_point_profile(&out.integral, &cp, &rp, 4, out.margin).map_err(|e| e.to_string())?;
    let fit = convergence_order_fit(&profile).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(elapsed, THREE_POINT_BUDGET)?;
    let needed = 3.0 * THREE_POINT_ALPHA - 0.1;
    let msg = format!(
        "slope {:.3} (R^2 {:.3}) over lengths T/2..T/16, need {needed:.2}; {elapsed:.2?}",
        fit.slope, fit.r_squared
    );
    if fit.slope >= needed {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn route_agreement() -> Outcome {
    let basis = WaveletBasis::standard();
    let w = common::sin_cos(FRAC_PI_2, 12);
    let rp = lift_piecewise_smooth(&w, &LiftMode::Analytic(AnalyticForm::SinCos), 0.45).unwrap();
    let cp = ControlledPath::component_of(&w, 0).unwrap();
    let end = w.grid().intervals();
    let wavelet = wavelet_rough_integral(&cp, &rp, &basis, 10).map_err(|e| e.to_string())?;
    let riemann = rough_integral_sum(&cp, &rp, 0, end, 12).map_err(|e| e.to_string())?;
    let a = wavelet.integral.value(end);
    let diff = a
        .iter()
        .zip(&riemann)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = riemann.iter().map(|y| y * y).sum::<f64>().sqrt();
    let rel = diff / norm;
    let msg = format!("relative gap {rel:.3e} (wavelet {a:?}, riemann {riemann:?})");
    if rel <= ROUTE_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn reconstruction_bound() -> Outcome {
    let basis = WaveletBasis::standard();
    let alpha = 0.4;
    let w = common::sin_cos(1.0, 12);
    let rp = lift_piecewise_smooth(&w, &LiftMode::Analytic(AnalyticForm::SinCos), alpha).unwrap();
    let cp = common::product_integrand(&w);
    let f = multiply_by_wdot(&to_modelled(&cp, alpha)).map_err(|e| e.to_string())?;
    let model = Model::rough(&rp);
    let rec = reconstruct(&f, &model, &basis, 10).map_err(|e| e.to_string())?;
    let cert = reconstruction_certificate(&rec, &f, &model, &ProbeBattery::standard(w.grid()))
        .map_err(|e| e.to_string())?;
    let by_scale = certificate_by_scale(&cert);
    let coarse = by_scale[0].1;
    let worst = by_scale.iter().map(|p| p.1).fold(0.0, f64::max);
    let list: Vec<String> = by_scale
        .iter()
        .map(|(l, c)| format!("{l}:{c:.2e}"))
        .collect();
    let msg = format!(
        "gamma {:.2}, C(lambda) = [{}], max/C(1/2) = {:.3}",
        f.gamma(),
        list.join(", "),
        worst / coarse
    );
    if f.gamma() > 0.0 && worst <= RECONSTRUCTION_FACTOR * coarse {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn exponential_rde() -> Outcome {
    let start = Instant::now();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let w = SampledPath::from_fn(grid, 1, |t, r| r[0] = t).unwrap();
    let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.45).unwrap();
    let (sol, diag) = solve_rde(
        &[1.0],
        &VectorField::identity(),
        &rp,
        &SolverConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(elapsed, EXP_BUDGET)?;
    let y1 = sol.y.get(grid.intervals(), 0);
    let ratio = diag.windows.iter().map(|w| w.ratio).fold(0.0, f64::max);
    let msg = format!(
        "y(1) = {y1:.9}, error {:.3e}, {} window(s), max ratio {ratio:.5}; {elapsed:.2?}",
        (y1 - E).abs(),
        diag.windows.len()
    );
    if (y1 - E).abs() <= EXP_TOL && ratio < 1.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn norm_equivalence() -> Outcome {
    let alpha = 0.4;
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let mut worst_low = f64::INFINITY;
    let mut worst_high = 0.0f64;
    for seed in 0..20u64 {
        let w = generate_path(
            &PathKind::Fbm {
                hurst: 0.45,
                seed: 100 + seed,
            },
            grid,
            2,
        )
        .unwrap();
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, alpha).unwrap();
        let cp = common::random_controlled(&w, 2, seed);
        let md =
            md_seminorm(&to_modelled(&cp, alpha), &Model::rough(&rp)).map_err(|e| e.to_string())?;
        let (a, b) = controlled_norm(&cp, &w, alpha).map_err(|e| e.to_string())?;
        let controlled = a + b;
        if !(md <= controlled && controlled <= 2.0 * md) {
            return Err(format!("seed {seed}: |Y| = {md}, |(y, y')| = {controlled}"));
        }
        worst_low = worst_low.min(controlled / md);
        worst_high = worst_high.max(controlled / md);
    }
    Ok(format!(
        "|(y,y')| / |Y| in [{worst_low:.3}, {worst_high:.3}] over 20 paths"
    ))
}

fn composition_lipschitz() -> Outcome {
    let alpha = 0.4;
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let w = generate_path(
        &PathKind::Fbm {
            hurst: 0.45,
            seed: 7,
        },
        grid,
        1,
    )
    .unwrap();
    let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, alpha).unwrap();
    let model = Model::rough(&rp);
    let sin = VectorField::Componentwise {
        d: 1,
        n: 1,
        g: ScalarFn::Sin,
    };
    let base = common::random_controlled(&w, 1, 1);
    let scale_to_ball = |cp: &ControlledPath, radius: f64| -> ModelledDistribution {
        let y = to_modelled(cp, alpha);
        let norm = md_norm(&y, &model).unwrap();
        let k = radius / norm;
        let scaled = ControlledPath::new(
            SampledPath::new(
                *cp.grid(),
                cp.dim(),
                cp.y.values().iter().map(|v| v * k).collect(),
            )
            .unwrap(),
            SampledPath::new(
                *cp.grid(),
                cp.y_prime.dim(),
                cp.y_prime.values().iter().map(|v| v * k).collect(),
            )
            .unwrap(),
            1,
        )
        .unwrap();
        to_modelled(&scaled, alpha)
    };
    let y = scale_to_ball(&base, 0.25);
    let fy = compose(&sin, &y).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let dir = scale_to_ball(&common::random_controlled(&w, 1, 1000 + seed), 0.05);
        let mut values = Vec::new();
        for k in 0..grid.len() {
            let mut v = y.at(k, 0).clone();
            v.axpy(1.0, dir.at(k, 0));
            values.push(v);
        }
        let ytilde = ModelledDistribution::new(grid, alpha, 2.0 * alpha, 1, 1, values).unwrap();
        let fyt = compose(&sin, &ytilde).map_err(|e| e.to_string())?;
        let num = md_norm(&fy.difference(&fyt).unwrap(), &model).unwrap();
        let den = md_norm(&y.difference(&ytilde).unwrap(), &model).unwrap();
        ratios.push(num / den);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let msg = format!("ratios in [{lo:.4}, {hi:.4}], spread {:.3}", hi / lo);
    if hi <= LIPSCHITZ_FACTOR * lo {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn lift_continuity() -> Outcome {
    let basis = WaveletBasis::standard();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let w = generate_path(
        &PathKind::Fbm {
            hurst: 0.45,
            seed: 11,
        },
        grid,
        2,
    )
    .unwrap();
    let bump = |t: f64| {
        let u = 4.0 * (t - 0.5);
        if u.abs() < 1.0 {
            (-1.0 / (1.0 - u * u)).exp()
        } else {
            0.0
        }
    };
    let mut ratios = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let v = SampledPath::from_fn(grid, 2, |t, r| {
            r[0] = eps * bump(t);
            r[1] = -eps * bump(t);
        })
        .unwrap();
        let shifted = SampledPath::new(
            grid,
            2,
            w.values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
        ratios.push(lift_continuity_gap(&w, &shifted, 0.4, &basis, 8).map_err(|e| e.to_string())?);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let msg = format!(
        "ratios {:.4}, {:.4}, {:.4}; spread {:.3}",
        ratios[0],
        ratios[1],
        ratios[2],
        hi / lo
    );
    if hi <= CONTINUITY_FACTOR * lo {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn young_oracle() -> Outcome {
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let y = SampledPath::from_fn(grid, 1, |t, r| r[0] = t).unwrap();
    let w = SampledPath::from_fn(grid, 1, |t, r| r[0] = t * t).unwrap();
    let out = young_integral(&y, &w, 0, grid.intervals(), (1.0, 1.0)).map_err(|e| e.to_string())?;
    let err = (out.value[0] - 2.0 / 3.0).abs();
    let msg = format!("value {:.9}, error {err:.3e}", out.value[0]);
    if err <= YOUNG_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn group_law() -> Outcome {
    let mut rng = common::rng(12);
    let n = 3;
    let mut symbols = vec![Symbol::One];
    for i in 0..n {
        symbols.push(Symbol::W(i));
        symbols.push(Symbol::Wdot(i));
        for j in 0..n {
            symbols.push(Symbol::WWdot(i, j));
        }
    }
    for k in 0..=3 {
        symbols.push(Symbol::x(MultiIndex::single(k)));
    }
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let h: Vec<f64> = (0..n)
            .map(|_| common::uniform(&mut rng, -1.0, 1.0))
            .collect();
        let g: Vec<f64> = (0..n)
            .map(|_| common::uniform(&mut rng, -1.0, 1.0))
            .collect();
        let (a, b) = (StructureGroupElement::new(h), StructureGroupElement::new(g));
        let ab = a.compose(&b).unwrap();
        for &s in &symbols {
            let unit = ModelSpaceVector::unit(s);
            let two_step = gamma_apply(&a, &gamma_apply(&b, &unit).unwrap()).unwrap();
            let one_step = gamma_apply(&ab, &unit).unwrap();
            let mut diff = two_step.clone();
            diff.axpy(-1.0, &one_step);
            for (_, c) in diff.iter() {
                worst = worst.max(c.abs());
            }
        }
    }
    let msg = format!(
        "max coefficient error {worst:.3e} over 1000 pairs, {} symbols",
        symbols.len()
    );
    if worst <= GROUP_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("chen exactness", chen_exactness),
        ("trigonometric area", levy_area),
        ("scalar lift", scalar_lift),
        ("three-point slope", three_point_slope),
        ("route agreement", route_agreement),
        ("reconstruction bound", reconstruction_bound),
        ("exponential rde", exponential_rde),
        ("norm equivalence", norm_equivalence),
        ("composition lipschitz", composition_lipschitz),
        ("lift continuity", lift_continuity),
        ("young oracle", young_oracle),
        ("group law", group_law),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
