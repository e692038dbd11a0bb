//! Picard iteration for `Y = xi 1 + L(F(Y))` on dyadic windows, and the
//! a posteriori residual of the resulting controlled path.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_paths::{euclidean, SampledPath};
use crate::integration::{contract_driver, rough_integral_path};
use crate::modelled_distributions::{
    compose, from_modelled, multiply_by_wdot_contracted, to_modelled, ControlledPath,
    ModelledDistribution, Nonlinearity,
};
use crate::reconstruction::reconstruct;
use crate::regularity_structure::{Model, ModelSpaceVector, Symbol};
use crate::rough_core::RoughPath;
use crate::wavelets::WaveletBasis;

/// How `int F(y) dW` is computed inside a Picard step.
#[derive(Debug, Clone)]
pub enum IntegralRoute {
    /// Compensated Riemann sums on the finest mesh.
    Riemann,
    /// Antiderivative of the wavelet reconstruction, truncated `levels_below`
    /// levels under the window's grid level (at least 2).
    Wavelet {
        basis: WaveletBasis,
        levels_below: u32,
    },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    /// First window is `T / 2^window_level`.
    pub window_level: u32,
    pub max_picard_iters: usize,
    pub fixed_point_tol: f64,
    pub route: IntegralRoute,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            beta: 0.45,
            window_level: 0,
            max_picard_iters: 60,
            fixed_point_tol: 1e-10,
            route: IntegralRoute::Riemann,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 / 3.0 && self.alpha < self.beta && self.beta <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "need 1/3 < alpha < beta <= 1/2, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        if !(self.fixed_point_tol > 0.0) || self.max_picard_iters == 0 {
            return Err(Error::InvalidParameter(
                "tolerance and iteration cap must be positive".into(),
            ));
        }
        if let IntegralRoute::Wavelet { levels_below, .. } = self.route {
            if levels_below < 2 {
                return Err(Error::InvalidParameter(
                    "wavelet route needs levels_below >= 2".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Report for one accepted window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub t0: f64,
    pub t1: f64,
    pub iters: usize,
    /// Largest ratio of successive Picard differences; 0 when the first
    /// difference was already below tolerance.
    pub ratio: f64,
    /// `[min y - 2 span, max y + 2 span]` per component.
    pub working_box: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub windows: Vec<WindowReport>,
    /// Number of times a window was halved after failing to contract.
    pub halvings: usize,
    pub residual: f64,
}

fn check_problem(xi: &[f64], f: &dyn Nonlinearity, rp: &RoughPath) -> Result<()> {
    let (d, n) = (xi.len(), rp.dim());
    if f.input_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: f.input_dim(),
            found: d,
        });
    }
    if f.output_dim() != d * n {
        return Err(Error::DimensionMismatch {
            expected: d * n,
            found: f.output_dim(),
        });
    }
    if f.smoothness() < 3 {
        return Err(Error::MissingDerivatives {
            available: f.smoothness(),
            needed: 3,
        });
    }
    Ok(())
}

fn check_domain(f: &dyn Nonlinearity, y: &SampledPath) -> Result<()> {
    if let Some((lo, hi)) = f.domain() {
        for k in 0..y.grid().len() {
            for (a, v) in y.value(k).iter().enumerate() {
                if *v < lo[a] || *v > hi[a] {
                    return Err(Error::WorkingBoxExceeded);
                }
            }
        }
    }
    Ok(())
}

/// `int_0^t F(y) dW` for the integrand `F(Y)` (components `a * n + j`).
fn integrate(
    fy: &ModelledDistribution,
    rp: &RoughPath,
    route: &IntegralRoute,
) -> Result<SampledPath> {
    let n = rp.dim();
    let d = fy.dim() / n;
    let grid = *rp.grid();
    match route {
        IntegralRoute::Riemann => {
            let cp = from_modelled(fy)?;
            let full = rough_integral_path(&cp, rp, grid.level())?;
            let mut values = Vec::with_capacity(grid.len() * d);
            for k in 0..grid.len() {
                values.extend(contract_driver(full.value(k), n));
            }
            SampledPath::new(grid, d, values)
        }
        IntegralRoute::Wavelet {
            basis,
            levels_below,
        } => {
            let top = grid
                .level()
                .checked_sub(*levels_below)
                .ok_or(Error::UnresolvableLevel {
                    level: 0,
                    grid_level: grid.level(),
                })?;
            let product = multiply_by_wdot_contracted(fy)?;
            Ok(reconstruct(&product, &Model::rough(rp), basis, top)?.antiderivative)
        }
    }
}

/// `N(Y) = xi 1 + L(F(Y))` with
/// `L(F(Y))(t) = (int_0^t F(y) dW) 1 + F(y_t) W`.
pub fn picard_step(
    y: &ModelledDistribution,
    xi: &[f64],
    f: &dyn Nonlinearity,
    rp: &RoughPath,
    cfg: &SolverConfig,
) -> Result<ModelledDistribution> {
    check_problem(xi, f, rp)?;
    if y.grid() != rp.grid() {
        return Err(Error::GridMismatch);
    }
    check_domain(f, &from_modelled(y)?.y)?;
    let fy = compose(f, y)?;
    let integral = integrate(&fy, rp, &cfg.route)?;
    let (d, n) = (xi.len(), rp.dim());
    let grid = *rp.grid();
    let mut values = Vec::with_capacity(grid.len() * d);
    for k in 0..grid.len() {
        for a in 0..d {
            let mut v = ModelSpaceVector::new();
            v.add_term(Symbol::One, xi[a] + integral.get(k, a));
            for j in 0..n {
                v.add_term(Symbol::W(j), fy.at(k, a * n + j).coeff(Symbol::One));
            }
            values.push(v);
        }
    }
    ModelledDistribution::new(grid, cfg.alpha, 2.0 * cfg.alpha, d, n, values)
}

/// `Y_0 = xi 1 + F(xi) W` on the grid of `rp`.
fn initial_iterate(xi: &[f64], f: &dyn Nonlinearity, rp: &RoughPath) -> Result<ControlledPath> {
    let (d, n) = (xi.len(), rp.dim());
    let grid = *rp.grid();
    let mut fx = vec![0.0; d * n];
    f.eval(xi, &mut fx);
    let y = SampledPath::from_fn(grid, d, |_, r| r.copy_from_slice(xi))?;
    let yp = SampledPath::from_fn(grid, d * n, |_, r| r.copy_from_slice(&fx))?;
    ControlledPath::new(y, yp, n)
}

/// Largest row sum of `|DF|` over the nodes of `y`.
fn lipschitz_estimate(f: &dyn Nonlinearity, y: &SampledPath) -> f64 {
    let (d, m) = (f.input_dim(), f.output_dim());
    let mut jac = vec![0.0; m * d];
    let mut best = 0.0f64;
    for k in 0..y.grid().len() {
        f.jacobian(y.value(k), &mut jac);
        for b in 0..m {
            best = best.max(jac[b * d..(b + 1) * d].iter().map(|v| libm::fabs(*v)).sum());
        }
    }
    best
}

fn sup_difference(a: &SampledPath, b: &SampledPath) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| libm::fabs(x - y))
        .fold(0.0, f64::max)
}

fn working_box(y: &SampledPath) -> Vec<(f64, f64)> {
    (0..y.dim())
        .map(|a| {
            let c = y.component(a);
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            (lo - 2.0 * span, hi + 2.0 * span)
        })
        .collect()
}

enum WindowOutcome {
    Accepted(ControlledPath, usize, f64),
    NotContracting(f64),
}

/// Picard iteration on one window. Differences are measured in
/// `sup |dy| + omega sup |dy'|` with `omega = 1 / (2 max(1, L))`: `y'` lags
/// `y` by one iterate, so the plain sup-norm ratio of the first two steps
/// cannot drop below one.
fn solve_window(
    xi: &[f64],
    f: &dyn Nonlinearity,
    rp: &RoughPath,
    cfg: &SolverConfig,
) -> Result<WindowOutcome> {
    let mut current = initial_iterate(xi, f, rp)?;
    let omega = 0.5 / lipschitz_estimate(f, &current.y).max(1.0);
    let mut previous_norm: Option<f64> = None;
    let mut worst = 0.0f64;
    for iter in 1..=cfg.max_picard_iters {
        let next = from_modelled(&picard_step(
            &to_modelled(&current, cfg.alpha),
            xi,
            f,
            rp,
            cfg,
        )?)?;
        let dy = sup_difference(&next.y, &current.y);
        let dyp = sup_difference(&next.y_prime, &current.y_prime);
        if !(dy.is_finite() && dyp.is_finite()) {
            return Ok(WindowOutcome::NotContracting(f64::INFINITY));
        }
        current = next;
        if dy.max(dyp) < cfg.fixed_point_tol {
            return Ok(WindowOutcome::Accepted(current, iter, worst));
        }
        let norm = dy + omega * dyp;
        if let Some(p) = previous_norm {
            let ratio = norm / p;
            worst = worst.max(ratio);
            if ratio >= 1.0 {
                return Ok(WindowOutcome::NotContracting(ratio));
            }
        }
        previous_norm = Some(norm);
    }
    Ok(WindowOutcome::NotContracting(worst))
}

/// Solves `dy = F(y) dW`, `y_0 = xi` window by window; a window that fails to
/// contract is halved until it would be shorter than one grid interval.
pub fn solve_rde(
    xi: &[f64],
    f: &dyn Nonlinearity,
    rp: &RoughPath,
    cfg: &SolverConfig,
) -> Result<(ControlledPath, SolveDiagnostics)> {
    cfg.validate()?;
    check_problem(xi, f, rp)?;
    let grid = *rp.grid();
    let (d, n) = (xi.len(), rp.dim());
    let total = grid.intervals();
    let mut level = cfg.window_level.min(grid.level());
    let mut y = vec![0.0; grid.len() * d];
    let mut yp = vec![0.0; grid.len() * d * n];
    let mut start = xi.to_vec();
    let mut m0 = 0usize;
    let mut windows = Vec::new();
    let mut halvings = 0;
    while m0 < total {
        let width = total >> level;
        let sub = rp.window(m0, m0 + width)?;
        match solve_window(&start, f, &sub, cfg)? {
            WindowOutcome::Accepted(sol, iters, ratio) => {
                for k in 0..=width {
                    y[(m0 + k) * d..(m0 + k + 1) * d].copy_from_slice(sol.y.value(k));
                    yp[(m0 + k) * d * n..(m0 + k + 1) * d * n]
                        .copy_from_slice(sol.y_prime.value(k));
                }
                start = sol.y.value(width).to_vec();
                windows.push(WindowReport {
                    t0: grid.node(m0),
                    t1: grid.node(m0 + width),
                    iters,
                    ratio,
                    working_box: working_box(&sol.y),
                });
                m0 += width;
            }
            WindowOutcome::NotContracting(ratio) => {
                if width == 1 {
                    return Err(Error::NonContraction(ratio));
                }
                level += 1;
                halvings += 1;
            }
        }
    }
    let sol = ControlledPath::new(
        SampledPath::new(grid, d, y)?,
        SampledPath::new(grid, d * n, yp)?,
        n,
    )?;
    let residual = solution_residual(&sol, xi, f, rp)?;
    Ok((
        sol,
        SolveDiagnostics {
            windows,
            halvings,
            residual,
        },
    ))
}

/// `sup_t |y_t - xi - int_0^t F(y) dW|`, the integral by compensated Riemann
/// sums on the finest mesh with Gubinelli derivative `DF(y) y'`.
pub fn solution_residual(
    sol: &ControlledPath,
    xi: &[f64],
    f: &dyn Nonlinearity,
    rp: &RoughPath,
) -> Result<f64> {
    check_problem(xi, f, rp)?;
    if sol.dim() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            found: sol.dim(),
        });
    }
    let fy = compose(f, &to_modelled(sol, rp.alpha()))?;
    let integral = integrate(&fy, rp, &IntegralRoute::Riemann)?;
    let mut worst = 0.0f64;
    let mut diff = vec![0.0; xi.len()];
    for k in 0..sol.grid().len() {
        for (a, v) in diff.iter_mut().enumerate() {
            *v = sol.y.get(k, a) - xi[a] - integral.get(k, a);
        }
        worst = worst.max(euclidean(&diff));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{generate_path, PathKind, TimeGrid};
    use crate::modelled_distributions::VectorField;
    use crate::rough_core::{lift_piecewise_smooth, LiftMode};

    fn linear_driver(level: u32) -> RoughPath {
        let grid = TimeGrid::new(1.0, level).unwrap();
        let w = SampledPath::from_fn(grid, 1, |t, r| r[0] = t).unwrap();
        lift_piecewise_smooth(&w, &LiftMode::Linear, 0.45).unwrap()
    }

    #[test]
    fn exponential() {
        let rp = linear_driver(10);
        let (sol, diag) = solve_rde(
            &[1.0],
            &VectorField::identity(),
            &rp,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((sol.y.get(1024, 0) - core::f64::consts::E).abs() < 1e-3);
        assert!(diag.windows.iter().all(|w| w.ratio < 1.0));
        assert!(diag.residual < 1e-9);
    }

    #[test]
    fn zero_field_is_constant() {
        let rp = linear_driver(6);
        let zero = VectorField::Constant {
            d: 1,
            n: 1,
            value: vec![0.0],
        };
        let (sol, diag) = solve_rde(&[0.3], &zero, &rp, &SolverConfig::default()).unwrap();
        assert!(sol.y.values().iter().all(|v| *v == 0.3));
        assert_eq!(diag.windows[0].iters, 1);
    }

    #[test]
    fn rotation() {
        let rp = linear_driver(10);
        let (sol, _) = solve_rde(
            &[1.0, 0.0],
            &VectorField::rotation(),
            &rp,
            &SolverConfig::default(),
        )
        .unwrap();
        for k in [256, 700, 1024] {
            let t = rp.grid().node(k);
            assert!((sol.y.get(k, 0) - libm::cos(t)).abs() < 1e-3);
            assert!((sol.y.get(k, 1) - libm::sin(t)).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_field_solution_and_residual() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let w = generate_path(
            &PathKind::Fbm {
                hurst: 0.45,
                seed: 2,
            },
            grid,
            1,
        )
        .unwrap();
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.4).unwrap();
        let c = VectorField::Constant {
            d: 1,
            n: 1,
            value: vec![0.7],
        };
        let (sol, diag) = solve_rde(&[0.2], &c, &rp, &SolverConfig::default()).unwrap();
        for k in 0..grid.len() {
            assert!((sol.y.get(k, 0) - 0.2 - 0.7 * (w.get(k, 0) - w.get(0, 0))).abs() < 1e-12);
            assert!((sol.y_prime.get(k, 0) - 0.7).abs() < 1e-15);
        }
        assert!(diag.residual <= 1e-12);
        let mut bad = sol.clone();
        bad.y.value_mut(100)[0] += 0.1;
        assert!(solution_residual(&bad, &[0.2], &c, &rp).unwrap() >= 0.05);
    }

    #[test]
    fn rejects_bad_exponents() {
        let rp = linear_driver(4);
        let cfg = SolverConfig {
            alpha: 0.45,
            beta: 0.4,
            ..SolverConfig::default()
        };
        assert!(solve_rde(&[1.0], &VectorField::identity(), &rp, &cfg).is_err());
    }
}
