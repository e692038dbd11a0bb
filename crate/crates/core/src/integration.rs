//! Young integrals, compensated Riemann sums for rough integrals, and
//! log-log convergence fits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_paths::SampledPath;
use crate::modelled_distributions::ControlledPath;
use crate::rough_core::RoughPath;

/// Left-point sum and whether the supplied exponents allow Young theory.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungIntegral {
    /// Component `a * n + j` is `int_s^t y^a dW^j`.
    pub value: Vec<f64>,
    /// `alpha_y + alpha_w > 1`.
    pub admissible: bool,
}

/// `sum_u y_u W_{u,u+1}` over the grid intervals between nodes `s` and `t`.
pub fn young_integral(
    y: &SampledPath,
    w: &SampledPath,
    s: usize,
    t: usize,
    exponents: (f64, f64),
) -> Result<YoungIntegral> {
    y.same_grid(w)?;
    check_nodes(y, s, t)?;
    let (d, n) = (y.dim(), w.dim());
    let mut value = vec![0.0; d * n];
    for u in s..t {
        let (yu, w0, w1) = (y.value(u), w.value(u), w.value(u + 1));
        for a in 0..d {
            for j in 0..n {
                value[a * n + j] += yu[a] * (w1[j] - w0[j]);
            }
        }
    }
    Ok(YoungIntegral {
        value,
        admissible: exponents.0 + exponents.1 > 1.0,
    })
}

fn check_nodes(p: &SampledPath, s: usize, t: usize) -> Result<()> {
    if s > t || t > p.grid().intervals() {
        return Err(Error::NodeOrder { s, t });
    }
    Ok(())
}

fn check_driver(cp: &ControlledPath, rp: &RoughPath) -> Result<()> {
    if cp.grid() != rp.grid() {
        return Err(Error::GridMismatch);
    }
    if cp.driver_dim() != rp.dim() {
        return Err(Error::DimensionMismatch {
            expected: rp.dim(),
            found: cp.driver_dim(),
        });
    }
    Ok(())
}

fn mesh_stride(rp: &RoughPath, mesh_level: u32) -> Result<usize> {
    let grid = rp.grid();
    if mesh_level > grid.level() {
        return Err(Error::MeshTooFine {
            mesh: mesh_level,
            grid: grid.level(),
        });
    }
    Ok(1usize << (grid.level() - mesh_level))
}

/// `y_u W_{u,v} + y'_u X_{u,v}`, added into `out` (shape `d x n`).
fn add_local(
    cp: &ControlledPath,
    rp: &RoughPath,
    u: usize,
    v: usize,
    x: &mut [f64],
    out: &mut [f64],
) {
    let (d, n) = (cp.dim(), cp.driver_dim());
    rp.second_order_into(u, v, x);
    let w = rp.path();
    let (y, yp) = (cp.y.value(u), cp.y_prime.value(u));
    let (wu, wv) = (w.value(u), w.value(v));
    for a in 0..d {
        for j in 0..n {
            let mut acc = y[a] * (wv[j] - wu[j]);
            for i in 0..n {
                acc += yp[a * n + i] * x[i * n + j];
            }
            out[a * n + j] += acc;
        }
    }
}

/// Compensated sum `sum y_u W_{u,v} + y'_u X_{u,v}` over the partition of
/// `[s, t]` by the dyadic mesh at `mesh_level` (plus `s` and `t`).
pub fn rough_integral_sum(
    cp: &ControlledPath,
    rp: &RoughPath,
    s: usize,
    t: usize,
    mesh_level: u32,
) -> Result<Vec<f64>> {
    check_driver(cp, rp)?;
    check_nodes(rp.path(), s, t)?;
    let stride = mesh_stride(rp, mesh_level)?;
    let n = rp.dim();
    let mut out = vec![0.0; cp.dim() * n];
    let mut x = vec![0.0; n * n];
    let mut u = s;
    while u < t {
        let v = ((u / stride + 1) * stride).min(t);
        add_local(cp, rp, u, v, &mut x, &mut out);
        u = v;
    }
    Ok(out)
}

/// `t -> int_0^t y dW` at every node, each value the compensated sum over the
/// mesh at `mesh_level` with a final partial interval.
pub fn rough_integral_path(
    cp: &ControlledPath,
    rp: &RoughPath,
    mesh_level: u32,
) -> Result<SampledPath> {
    check_driver(cp, rp)?;
    let stride = mesh_stride(rp, mesh_level)?;
    let grid = *rp.grid();
    let q = cp.dim() * rp.dim();
    let mut x = vec![0.0; rp.dim() * rp.dim()];
    let mut values = vec![0.0; grid.len() * q];
    let mut full = vec![0.0; q];
    for k in 1..grid.len() {
        let anchor = ((k - 1) / stride) * stride;
        if anchor > 0 && (k - 1) % stride == 0 {
            // a whole mesh interval just closed at `anchor`
            add_local(cp, rp, anchor - stride, anchor, &mut x, &mut full);
        }
        let row = &mut values[k * q..(k + 1) * q];
        row.copy_from_slice(&full);
        add_local(cp, rp, anchor, k, &mut x, row);
    }
    SampledPath::new(grid, q, values)
}

/// `sum_j v[(a n + j) n + j]`: contracts an integral of a `(d n)`-valued
/// integrand against the matching driver components.
pub fn contract_driver(v: &[f64], n: usize) -> Vec<f64> {
    let d = v.len() / (n * n);
    (0..d)
        .map(|a| (0..n).map(|j| v[(a * n + j) * n + j]).sum())
        .collect()
}

/// Least-squares fit of `log |error|` against `log scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceFit {
    /// `+inf` when every error is zero.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Slope of `log |error|` vs `log scale` over `(scale, error)` samples.
/// Needs at least four samples spanning two octaves; zero errors are
/// dropped before fitting.
pub fn convergence_order_fit(samples: &[(f64, f64)]) -> Result<ConvergenceFit> {
    check_span(samples)?;
    if samples.iter().all(|&(_, e)| e == 0.0) {
        return Ok(ConvergenceFit {
            slope: f64::INFINITY,
            intercept: 0.0,
            r_squared: 1.0,
            samples: samples.len(),
        });
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, e)| e != 0.0)
        .map(|&(h, e)| (libm::log(h), libm::log(libm::fabs(e))))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "{} nonzero errors",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples("all scales equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(ConvergenceFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        samples: pts.len(),
    })
}

fn check_span(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 4 {
        return Err(Error::InsufficientSamples(format!(
            "{} samples, need 4",
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|&(h, e)| !(h > 0.0 && h.is_finite() && e.is_finite()))
    {
        return Err(Error::InsufficientSamples(
            "scales must be positive and errors finite".into(),
        ));
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if hi < 4.0 * lo {
        return Err(Error::InsufficientSamples(
            "scales span less than two octaves".into(),
        ));
    }
    Ok(())
}

/// Cauchy differences `(mesh, |S_m - S_{m+1}|)` of the compensated sums over
/// `[s, t]` for mesh levels `levels.0..levels.1`, Euclidean over components.
pub fn refinement_study(
    cp: &ControlledPath,
    rp: &RoughPath,
    s: usize,
    t: usize,
    levels: (u32, u32),
) -> Result<Vec<(f64, f64)>> {
    let horizon = rp.grid().horizon();
    let sums = (levels.0..=levels.1)
        .map(|m| rough_integral_sum(cp, rp, s, t, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(sums
        .windows(2)
        .enumerate()
        .map(|(i, p)| {
            let mesh = libm::ldexp(horizon, -((levels.0 + i as u32) as i32));
            let diff: f64 = p[0].iter().zip(&p[1]).map(|(a, b)| (a - b) * (a - b)).sum();
            (mesh, libm::sqrt(diff))
        })
        .collect())
}

/// Fit after discarding the two coarsest scales.
pub fn fit_excluding_coarsest(samples: &[(f64, f64)]) -> Result<ConvergenceFit> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    convergence_order_fit(sorted.get(2..).unwrap_or(&[]))
}
