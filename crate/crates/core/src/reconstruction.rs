//! Reconstruction of modelled distributions by wavelet partial sums, the
//! wavelet route to the rough integral, and the wavelet rough-path lift.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_paths::{euclidean, holder_seminorm_with, PairScan, SampledPath, TimeGrid};
use crate::modelled_distributions::{
    multiply_by_wdot, to_modelled, ControlledPath, ModelledDistribution,
};
use crate::par;
use crate::regularity_structure::{
    gamma_apply, pi_pair, Model, ModelSpaceVector, ProbeBattery, Symbol,
};
use crate::rough_core::{check_alpha, rough_path_distance, RoughPath, EXHAUSTIVE_ROUGH_LEVEL};
use crate::wavelets::{
    analysis, analysis_range, antiderivative, minimal_base_level, BasisKind, CoefficientBand,
    CoefficientTable, Distribution, DyadicFrame, StieltjesMeasure, WaveletBasis,
};

/// Output of [`reconstruct`]: one coefficient table and one antiderivative
/// component per component of the modelled distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub tables: Vec<CoefficientTable>,
    /// `z` with `z(0) = 0` and `dz = R f`, sampled on the grid.
    pub antiderivative: SampledPath,
    /// `(l, J)`: base level and top wavelet level.
    pub levels: (u32, u32),
}

impl Reconstruction {
    /// Component `a` of `R f` as a measure on the grid.
    pub fn measure(&self, a: usize) -> Result<StieltjesMeasure> {
        StieltjesMeasure::from_component(&self.antiderivative, a)
    }
}

/// One line of a reconstruction error certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateEntry {
    pub lambda: f64,
    pub s: f64,
    /// `max |(R f - Pi_s f(s))(eta_s^lambda)| / lambda^gamma` over profiles
    /// and components.
    pub ratio: f64,
}

/// Largest certificate ratio at each scale, in the order scales first appear.
pub fn certificate_by_scale(entries: &[CertificateEntry]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for e in entries {
        match out.iter_mut().find(|(l, _)| *l == e.lambda) {
            Some(slot) => slot.1 = slot.1.max(e.ratio),
            None => out.push((e.lambda, e.ratio)),
        }
    }
    out
}

fn check_reconstructible(
    f: &ModelledDistribution,
    model: &Model<'_>,
    basis: &WaveletBasis,
    top: u32,
) -> Result<u32> {
    if model.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    let lowest = model.lowest_homogeneity();
    if f.gamma() <= lowest {
        return Err(Error::GammaTooLow {
            gamma: f.gamma(),
            lowest,
        });
    }
    if basis.regularity() <= libm::fabs(lowest) {
        return Err(Error::InsufficientRegularity {
            regularity: basis.regularity(),
            needed: libm::fabs(lowest),
        });
    }
    let grid_level = f.grid().level();
    if top + 2 > grid_level {
        return Err(Error::UnresolvableLevel {
            level: top,
            grid_level,
        });
    }
    let l = minimal_base_level(basis);
    if l > top {
        return Err(Error::InvalidParameter(format!(
            "top level {top} below base level {l}"
        )));
    }
    Ok(l)
}

/// Jet of component `a` at `x = k T / 2^level`: the value at the node when
/// `x` lies in `[0, T]`, otherwise the nearest endpoint jet re-expanded at `x`.
fn jet_at(
    f: &ModelledDistribution,
    model: &Model<'_>,
    level: u32,
    k: i64,
    a: usize,
) -> Result<ModelSpaceVector> {
    let grid = f.grid();
    let top = 1i64 << level;
    let stride = 1i64 << (grid.level() - level);
    let x = grid.horizon() * k as f64 / top as f64;
    if k < 0 {
        gamma_apply(&model.gamma(x, 0.0), f.at(0, a))
    } else if k > top {
        gamma_apply(&model.gamma(x, grid.horizon()), f.at(grid.intervals(), a))
    } else {
        Ok(f.at((k * stride) as usize, a).clone())
    }
}

/// `R^{J+1} f = sum_k Pi_{x_k} f(x_k)(phi^{J+1}_k) phi^{J+1}_k`, decomposed
/// into scaling coefficients at the smallest admissible base level and
/// wavelet coefficients up to level `J`.
///
/// The base point `x_k = (k + o) T / 2^{J+1}` is the dyadic point nearest the
/// barycentre of `phi^{J+1}_k` (`o` is [`WaveletBasis::anchor_offset`]). Any
/// point of the support gives the same limit, but for `gamma <= 0` the
/// first-order truncation bias is proportional to the distance between the
/// base point and the barycentre.
pub fn reconstruct(
    f: &ModelledDistribution,
    model: &Model<'_>,
    basis: &WaveletBasis,
    top: u32,
) -> Result<Reconstruction> {
    let l = check_reconstructible(f, model, basis, top)?;
    let grid = *f.grid();
    let frame = DyadicFrame::new(basis, grid.horizon())?;
    let fine_level = top + 1;
    let (lo, hi) = analysis_range(basis, l, top);
    let offset = basis.anchor_offset();
    let mut tables = Vec::with_capacity(f.dim());
    let mut z = vec![0.0; grid.len() * f.dim()];
    for a in 0..f.dim() {
        let coeffs = par::map_range(0, (hi - lo + 1) as usize, |i| {
            let k = lo + i as i64;
            let anchor = k + offset;
            let jet = jet_at(f, model, fine_level, anchor, a)?;
            let x = grid.horizon() * anchor as f64 / (1u64 << fine_level) as f64;
            pi_pair(
                model,
                x,
                &jet,
                &frame.function(BasisKind::Scaling, fine_level, k),
            )
        });
        let values = coeffs.into_iter().collect::<Result<Vec<f64>>>()?;
        let fine = CoefficientBand {
            level: fine_level,
            first: lo,
            values,
        };
        let table = analysis(basis, &fine, l, grid.horizon())?;
        let za = antiderivative(&table, basis, &grid)?;
        for (m, v) in za.into_iter().enumerate() {
            z[m * f.dim() + a] = v;
        }
        tables.push(table);
    }
    Ok(Reconstruction {
        tables,
        antiderivative: SampledPath::new(grid, f.dim(), z)?,
        levels: (l, top),
    })
}

/// Error certificate of a reconstruction over a probe battery whose base
/// points are grid nodes.
///
/// Probes whose support sticks out of `[0, T]` are skipped: measure symbols
/// vanish outside the horizon, and the truncated series smears that jump over
/// a layer of width `O(2^-J)` that such probes would pick up.
pub fn reconstruction_certificate(
    rec: &Reconstruction,
    f: &ModelledDistribution,
    model: &Model<'_>,
    battery: &ProbeBattery,
) -> Result<Vec<CertificateEntry>> {
    let grid = f.grid();
    let measures = (0..f.dim())
        .map(|a| rec.measure(a))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for &lambda in &battery.scales {
        for &s in &battery.base_points {
            if s - lambda < 0.0 || s + lambda > grid.horizon() {
                continue;
            }
            let k = grid.index_of(s).ok_or_else(|| {
                Error::InvalidParameter(format!("base point {s} is not a grid node"))
            })?;
            let mut ratio = 0.0f64;
            for &profile in &battery.profiles {
                let tf = crate::grid_paths::TestFunction::new(profile, s, lambda)?;
                for (a, m) in measures.iter().enumerate() {
                    let global = m.pair(&tf);
                    let local = pi_pair(model, s, f.at(k, a), &tf)?;
                    ratio = ratio.max(libm::fabs(global - local) / libm::pow(lambda, f.gamma()));
                }
            }
            out.push(CertificateEntry { lambda, s, ratio });
        }
    }
    Ok(out)
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

/// `I^{a j}_{s,t} - y^a_s W^j_{s,t} - sum_i y'^{a i}_s X^{i j}_{s,t}` for an
/// integral `I` of shape `d x n`.
pub fn three_point_defect(
    integral: &SampledPath,
    cp: &ControlledPath,
    rp: &RoughPath,
    s: usize,
    t: usize,
) -> Result<Vec<f64>> {
    check_driver(cp, rp)?;
    let (d, n) = (cp.dim(), cp.driver_dim());
    if integral.dim() != d * n {
        return Err(Error::DimensionMismatch {
            expected: d * n,
            found: integral.dim(),
        });
    }
    let x = rp.second_order(s, t)?;
    let w = rp.path();
    let (y, yp) = (cp.y.value(s), cp.y_prime.value(s));
    let mut out = vec![0.0; d * n];
    for a in 0..d {
        for j in 0..n {
            let mut v = integral.get(t, a * n + j) - integral.get(s, a * n + j);
            v -= y[a] * (w.get(t, j) - w.get(s, j));
            for i in 0..n {
                v -= yp[a * n + i] * x[i * n + j];
            }
            out[a * n + j] = v;
        }
    }
    Ok(out)
}

/// Number of grid intervals at each end of the horizon where a reconstruction
/// truncated at level `top` feels the jump of measure symbols at the boundary.
pub fn boundary_layer(basis: &WaveletBasis, grid: &TimeGrid, top: u32) -> usize {
    let fine = top + 1;
    let per_cell = if grid.level() >= fine {
        1usize << (grid.level() - fine)
    } else {
        1
    };
    (basis.taps() - 1) * per_cell
}

/// Largest three-point defect among intervals of length `2^-m T`, for
/// `m = 1..=levels`, started at (up to 256) evenly spaced nodes and kept at
/// least `margin` intervals away from both ends of the horizon.
pub fn three_point_profile(
    integral: &SampledPath,
    cp: &ControlledPath,
    rp: &RoughPath,
    levels: u32,
    margin: usize,
) -> Result<Vec<(f64, f64)>> {
    let grid = *rp.grid();
    let levels = levels.min(grid.level());
    let step = (grid.intervals() >> EXHAUSTIVE_ROUGH_LEVEL.min(grid.level())).max(1);
    let end = grid.intervals().saturating_sub(margin);
    let mut out = Vec::with_capacity(levels as usize);
    for m in 1..=levels {
        let w = grid.intervals() >> m;
        let mut best = 0.0f64;
        let mut p = margin;
        while p + w <= end {
            best = best.max(euclidean(&three_point_defect(integral, cp, rp, p, p + w)?));
            p += step.min(w);
        }
        out.push((grid.node(w), best));
    }
    Ok(out)
}

/// Wavelet-route rough integral and its three-point certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletIntegral {
    /// `I^{a j}(t) = int_0^t y^a dW^j`, component `a * n + j`.
    pub integral: SampledPath,
    pub levels: (u32, u32),
    /// Intervals at each end excluded from the certificate, see
    /// [`boundary_layer`].
    pub margin: usize,
    /// `max |I_{s,t} - y_s W_{s,t} - y'_s X_{s,t}| / |t-s|^{3 alpha}` over
    /// node pairs outside the boundary layers (exhaustive up to grid level 8,
    /// dyadic above).
    pub certificate: f64,
}

/// `I = int_0^. y dW` as the antiderivative of `R(Y * Wdot)`.
pub fn wavelet_rough_integral(
    cp: &ControlledPath,
    rp: &RoughPath,
    basis: &WaveletBasis,
    top: u32,
) -> Result<WaveletIntegral> {
    check_driver(cp, rp)?;
    let alpha = rp.alpha();
    let f = multiply_by_wdot(&to_modelled(cp, alpha))?;
    let model = Model::rough(rp);
    let rec = reconstruct(&f, &model, basis, top)?;
    let integral = rec.antiderivative;
    let grid = *rp.grid();
    let scan = PairScan::for_level(grid.level(), EXHAUSTIVE_ROUGH_LEVEL);
    let margin = boundary_layer(basis, &grid, top);
    let mut certificate = 0.0f64;
    let mut err = None;
    scan.for_each(grid.intervals(), |s, t| {
        if s < margin || t + margin > grid.intervals() {
            return;
        }
        match three_point_defect(&integral, cp, rp, s, t) {
            Ok(v) => {
                let dt = grid.node(t) - grid.node(s);
                certificate = certificate.max(euclidean(&v) / libm::pow(dt, 3.0 * alpha));
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(WaveletIntegral {
        integral,
        levels: rec.levels,
        margin,
        certificate,
    })
}

/// Rough-path lift of `w` from the reconstruction of `W^i_s Wdot^j`:
/// `X^{ij}_{s,t} = z^{ij}_{s,t} - W^i_s W^j_{s,t}`.
pub fn wavelet_lift(
    w: &SampledPath,
    alpha: f64,
    basis: &WaveletBasis,
    top: u32,
) -> Result<RoughPath> {
    check_alpha(alpha)?;
    let grid: TimeGrid = *w.grid();
    let n = w.dim();
    let mut values = Vec::with_capacity(grid.len() * n * n);
    for k in 0..grid.len() {
        for i in 0..n {
            for j in 0..n {
                values.push(ModelSpaceVector::from_terms([(
                    Symbol::Wdot(j),
                    w.get(k, i),
                )]));
            }
        }
    }
    let f = ModelledDistribution::new(grid, alpha, 2.0 * alpha - 1.0, n * n, n, values)?;
    let model = Model::first_order(w, alpha);
    let z = reconstruct(&f, &model, basis, top)?.antiderivative;
    RoughPath::from_blocks(w.clone(), alpha, |s, t, out| {
        let (ws, wt) = (w.value(s), w.value(t));
        let (zs, zt) = (z.value(s), z.value(t));
        for i in 0..n {
            for j in 0..n {
                let q = i * n + j;
                out[q] = zt[q] - zs[q] - ws[i] * (wt[j] - ws[j]);
            }
        }
    })
}

/// `(||W - V||_alpha + ||X - Y||_{2 alpha}) / ||W - V||_alpha` for the wavelet
/// lifts of `w` and `v`.
pub fn lift_continuity_gap(
    w: &SampledPath,
    v: &SampledPath,
    alpha: f64,
    basis: &WaveletBasis,
    top: u32,
) -> Result<f64> {
    w.same_grid(v)?;
    if w.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: v.dim(),
        });
    }
    if w.values() == v.values() {
        return Err(Error::IdenticalPaths);
    }
    let a = wavelet_lift(w, alpha, basis, top)?;
    let b = wavelet_lift(v, alpha, basis, top)?;
    let (first, second) = rough_path_distance(&a, &b)?;
    let diff = SampledPath::new(
        *w.grid(),
        w.dim(),
        w.values()
            .iter()
            .zip(v.values())
            .map(|(x, y)| x - y)
            .collect(),
    )?;
    let scan = PairScan::for_level(w.grid().level(), EXHAUSTIVE_ROUGH_LEVEL);
    let denom = holder_seminorm_with(&diff, alpha, scan)?;
    debug_assert!((denom - first).abs() <= 1e-9 * denom.max(1.0));
    if denom == 0.0 {
        return Err(Error::IdenticalPaths);
    }
    Ok((first + second) / denom)
}
