//! Compactly supported Daubechies wavelets: dyadic cascade tables, pairings
//! with distributions, the discrete wavelet transform and antiderivatives
//! assembled from wavelet coefficients.
//!
//! Scaling functions are shifted by an integer so their support is roughly
//! centered at the origin; for the default eight-tap filter the support of
//! the unit-scale scaling function and wavelet is `[-3, 4]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_paths::{SampledPath, TestFn, TimeGrid};
use crate::linalg;
use crate::par;

/// Table resolution used by [`WaveletBasis::standard`].
pub const DEFAULT_TABLE_LEVEL: u32 = 10;

/// Scaling function or mother wavelet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Scaling,
    Wavelet,
}

#[derive(Debug, Clone)]
struct DyadicTable {
    level: u32,
    phi: Vec<f64>,
    psi: Vec<f64>,
    phi_cum: Vec<f64>,
    psi_cum: Vec<f64>,
}

/// Orthonormal Daubechies family with `taps` filter coefficients.
#[derive(Debug, Clone)]
pub struct WaveletBasis {
    h: Vec<f64>,
    shift: i64,
    regularity: f64,
    table: Option<DyadicTable>,
}

fn daubechies_filter(taps: usize) -> Option<(Vec<f64>, f64)> {
    let s2 = libm::sqrt(2.0);
    match taps {
        4 => {
            let r3 = libm::sqrt(3.0);
            let d = 4.0 * s2;
            Some((
                vec![
                    (1.0 + r3) / d,
                    (3.0 + r3) / d,
                    (3.0 - r3) / d,
                    (1.0 - r3) / d,
                ],
                0.550,
            ))
        }
        6 => {
            let r10 = libm::sqrt(10.0);
            let q = libm::sqrt(5.0 + 2.0 * r10);
            let d = 16.0 * s2;
            Some((
                vec![
                    (1.0 + r10 + q) / d,
                    (5.0 + r10 + 3.0 * q) / d,
                    (10.0 - 2.0 * r10 + 2.0 * q) / d,
                    (10.0 - 2.0 * r10 - 2.0 * q) / d,
                    (5.0 + r10 - 3.0 * q) / d,
                    (1.0 + r10 - q) / d,
                ],
                1.088,
            ))
        }
        8 => Some((
            vec![
                0.230_377_813_308_896_500_863_291_183_044_070_85,
                0.714_846_570_552_915_647_089_921_955_273_992_6,
                0.630_880_767_929_858_907_881_716_338_300_615_2,
                -0.027_983_769_416_859_854_266_570_107_411_523_18,
                -0.187_034_811_719_093_084_079_570_672_789_081_4,
                0.030_841_381_835_560_763_606_034_522_553_985_58,
                0.032_883_011_666_885_199_654_882_503_513_822_58,
                -0.010_597_401_785_069_032_193_215_905_076_583_9,
            ],
            1.618,
        )),
        _ => None,
    }
}

impl WaveletBasis {
    /// Daubechies filter with 4, 6 or 8 taps; the cascade table is not built.
    pub fn daubechies(taps: usize) -> Result<Self> {
        let (h, regularity) = daubechies_filter(taps).ok_or_else(|| {
            Error::InvalidParameter(format!("unsupported Daubechies filter length {taps}"))
        })?;
        let shift = ((taps - 1) / 2) as i64;
        Ok(Self {
            h,
            shift,
            regularity,
            table: None,
        })
    }

    /// Eight-tap Daubechies basis with a table at [`DEFAULT_TABLE_LEVEL`].
    pub fn standard() -> Self {
        Self::daubechies(8)
            .and_then(|b| b.with_table(DEFAULT_TABLE_LEVEL))
            .expect("eight-tap filter is built in")
    }

    /// Builds the cascade table at resolution `2^-level`.
    pub fn with_table(mut self, level: u32) -> Result<Self> {
        if !(1..=16).contains(&level) {
            return Err(Error::LevelOutOfRange { level, max: 16 });
        }
        self.table = Some(build_table(&self.h, level)?);
        Ok(self)
    }

    pub fn taps(&self) -> usize {
        self.h.len()
    }

    pub fn filter(&self) -> &[f64] {
        &self.h
    }

    /// High-pass filter `g_n = (-1)^n h_{N-1-n}`.
    pub fn high_pass(&self) -> Vec<f64> {
        let n = self.h.len();
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    self.h[n - 1 - i]
                } else {
                    -self.h[n - 1 - i]
                }
            })
            .collect()
    }

    /// Integer shift applied to the textbook support `[0, N - 1]`.
    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// Unit-scale support `[-shift, N - 1 - shift]`.
    pub fn support(&self) -> (i64, i64) {
        (-self.shift, self.h.len() as i64 - 1 - self.shift)
    }

    /// Support radius `c`: the support lies in `[-c, c]`.
    pub fn support_radius(&self) -> i64 {
        let (a, b) = self.support();
        a.abs().max(b)
    }

    /// Hölder exponent of the scaling function.
    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    /// `int x phi(x) dx` of the shifted scaling function, from the refinement
    /// relation `M1 = sum_n n h_n / sqrt 2`.
    pub fn first_moment(&self) -> f64 {
        let m: f64 = self.h.iter().enumerate().map(|(n, v)| n as f64 * v).sum();
        m / core::f64::consts::SQRT_2 - self.shift as f64
    }

    /// Integer nearest to [`WaveletBasis::first_moment`]: `phi_k` is anchored
    /// at the dyadic point `k + anchor_offset` closest to its barycentre.
    pub fn anchor_offset(&self) -> i64 {
        libm::round(self.first_moment()) as i64
    }

    /// Number of vanishing moments of the wavelet.
    pub fn vanishing_moments(&self) -> usize {
        self.h.len() / 2
    }

    pub fn table_level(&self) -> Option<u32> {
        self.table.as_ref().map(|t| t.level)
    }

    fn table(&self) -> Result<&DyadicTable> {
        self.table.as_ref().ok_or(Error::TableNotBuilt)
    }

    /// Index set `I_j = [-c, 2^j + c]` of level-`j` functions that can meet
    /// `[0, T]`.
    pub fn index_range(&self, j: u32) -> (i64, i64) {
        let c = self.support_radius();
        (-c, (1i64 << j) + c)
    }

    /// Unit-scale value at `x`, linear between table nodes.
    pub fn unit_value(&self, kind: BasisKind, x: f64) -> Result<f64> {
        let t = self.table()?;
        Ok(t.lookup(kind, x + self.shift as f64))
    }

    /// `int_{-inf}^x` of the unit-scale function (exact for the interpolant).
    pub fn unit_cumulative(&self, kind: BasisKind, x: f64) -> Result<f64> {
        let t = self.table()?;
        Ok(t.cumulative(kind, x + self.shift as f64))
    }

    /// Scaling and wavelet coefficients at level `j` from scaling
    /// coefficients at level `j + 1`: `c^j_k = sum_m h_{m+s} c^{j+1}_{2k+m}`.
    fn split(&self, fine: &CoefficientBand, range: (i64, i64), kind: BasisKind) -> CoefficientBand {
        let taps = match kind {
            BasisKind::Scaling => self.h.clone(),
            BasisKind::Wavelet => self.high_pass(),
        };
        let s = self.shift;
        let values = (range.0..=range.1)
            .map(|k| {
                taps.iter()
                    .enumerate()
                    .map(|(n, h)| h * fine.get(2 * k + n as i64 - s))
                    .sum()
            })
            .collect();
        CoefficientBand {
            level: fine.level - 1,
            first: range.0,
            values,
        }
    }

    fn expand(&self, range: (i64, i64)) -> (i64, i64) {
        let (a, b) = self.support();
        (2 * range.0 + a, 2 * range.1 + b)
    }
}

impl DyadicTable {
    fn lookup(&self, kind: BasisKind, y: f64) -> f64 {
        let v = match kind {
            BasisKind::Scaling => &self.phi,
            BasisKind::Wavelet => &self.psi,
        };
        let p = y * (1u64 << self.level) as f64;
        let last = v.len() - 1;
        if !(p > 0.0 && p < last as f64) {
            return 0.0;
        }
        let i = p as usize;
        let w = p - i as f64;
        v[i] + w * (v[i + 1] - v[i])
    }

    fn cumulative(&self, kind: BasisKind, y: f64) -> f64 {
        let (v, c) = match kind {
            BasisKind::Scaling => (&self.phi, &self.phi_cum),
            BasisKind::Wavelet => (&self.psi, &self.psi_cum),
        };
        let h = 1.0 / (1u64 << self.level) as f64;
        let p = y * (1u64 << self.level) as f64;
        let last = v.len() - 1;
        if p <= 0.0 {
            return 0.0;
        }
        if p >= last as f64 {
            return c[last];
        }
        let i = p as usize;
        let w = p - i as f64;
        c[i] + h * w * (v[i] + 0.5 * w * (v[i + 1] - v[i]))
    }
}

fn build_table(h: &[f64], level: u32) -> Result<DyadicTable> {
    let n = h.len();
    let s2 = libm::sqrt(2.0);
    // integer values: eigenvector of sqrt(2) h_{2i-j} for eigenvalue 1, unit sum
    let m = n - 2;
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let idx = 2 * (i as i64 + 1) - (j as i64 + 1);
            let v = if (0..n as i64).contains(&idx) {
                s2 * h[idx as usize]
            } else {
                0.0
            };
            a[i * m + j] = v - if i == j { 1.0 } else { 0.0 };
        }
    }
    let mut rhs = vec![0.0; m];
    for j in 0..m {
        a[(m - 1) * m + j] = 1.0;
    }
    rhs[m - 1] = 1.0;
    let ints = linalg::solve(m, a, rhs)
        .ok_or_else(|| Error::InvalidParameter("cascade eigenproblem is singular".into()))?;

    let scale = 1usize << level;
    let len = (n - 1) * scale + 1;
    let mut phi = vec![0.0; len];
    for (i, v) in ints.iter().enumerate() {
        phi[(i + 1) * scale] = *v;
    }
    let refine = |phi: &[f64], idx: usize, filter: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (k, c) in filter.iter().enumerate() {
            let q = 2 * idx as i64 - (k * scale) as i64;
            if q >= 0 && (q as usize) < len {
                acc += c * phi[q as usize];
            }
        }
        s2 * acc
    };
    for p in 1..=level {
        let step = 1usize << (level - p);
        let mut idx = step;
        while idx < len {
            phi[idx] = refine(&phi, idx, h);
            idx += 2 * step;
        }
    }
    let g: Vec<f64> = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                h[n - 1 - i]
            } else {
                -h[n - 1 - i]
            }
        })
        .collect();
    let psi: Vec<f64> = (0..len).map(|idx| refine(&phi, idx, &g)).collect();
    let dx = 1.0 / scale as f64;
    let cum = |v: &[f64]| {
        let mut c = vec![0.0; v.len()];
        for i in 1..v.len() {
            c[i] = c[i - 1] + 0.5 * dx * (v[i - 1] + v[i]);
        }
        c
    };
    Ok(DyadicTable {
        level,
        phi_cum: cum(&phi),
        psi_cum: cum(&psi),
        phi,
        psi,
    })
}

/// `2^{j/2} eta(2^j t - k)` on the unit horizon, `eta` the scaling function or
/// wavelet.
pub fn cascade_evaluate(
    basis: &WaveletBasis,
    kind: BasisKind,
    j: u32,
    k: i64,
    t: f64,
) -> Result<f64> {
    DyadicFrame::new(basis, 1.0)?.function(kind, j, k).value(t)
}

/// Basis functions on `[0, T]`: `T^{-1/2} 2^{j/2} eta(2^j t / T - k)`, which
/// stay orthonormal in `L^2(dt)` and put dyadic points on grid nodes.
#[derive(Debug, Clone, Copy)]
pub struct DyadicFrame<'a> {
    basis: &'a WaveletBasis,
    horizon: f64,
}

impl<'a> DyadicFrame<'a> {
    pub fn new(basis: &'a WaveletBasis, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        basis.table()?;
        Ok(Self { basis, horizon })
    }

    pub fn basis(&self) -> &'a WaveletBasis {
        self.basis
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn function(&self, kind: BasisKind, level: u32, shift: i64) -> BasisFunction<'a> {
        BasisFunction {
            frame: *self,
            kind,
            level,
            shift,
        }
    }
}

/// One member of a [`DyadicFrame`].
#[derive(Debug, Clone, Copy)]
pub struct BasisFunction<'a> {
    frame: DyadicFrame<'a>,
    pub kind: BasisKind,
    pub level: u32,
    pub shift: i64,
}

impl BasisFunction<'_> {
    fn dilation(&self) -> f64 {
        (1u64 << self.level) as f64 / self.frame.horizon
    }

    fn amplitude(&self) -> f64 {
        libm::sqrt(self.dilation())
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let x = self.dilation() * t - self.shift as f64;
        Ok(self.amplitude() * self.frame.basis.unit_value(self.kind, x)?)
    }

    /// `int_0^t` of the function.
    pub fn integral_from_zero(&self, t: f64) -> f64 {
        let b = self.frame.basis;
        let c = |t: f64| {
            b.unit_cumulative(self.kind, self.dilation() * t - self.shift as f64)
                .unwrap_or(0.0)
        };
        (c(t) - c(0.0)) / self.amplitude()
    }
}

impl TestFn for BasisFunction<'_> {
    fn support(&self) -> (f64, f64) {
        let (a, b) = self.frame.basis.support();
        let d = self.dilation();
        ((a + self.shift) as f64 / d, (b + self.shift) as f64 / d)
    }

    fn eval(&self, t: f64) -> f64 {
        self.value(t).unwrap_or(0.0)
    }

    fn cells(&self) -> usize {
        let level = self.frame.basis.table_level().unwrap_or(0);
        (self.frame.basis.taps() - 1) << level
    }
}

/// A distribution on the line that can be paired with test functions.
pub trait Distribution: Sync {
    fn pair(&self, f: &dyn TestFn) -> f64;
    /// Grid the distribution is sampled on, if any.
    fn resolution(&self) -> Option<TimeGrid>;
}

/// The measure `dZ` of a sampled integrator `Z`, paired by midpoint
/// Riemann-Stieltjes sums over grid intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesMeasure {
    grid: TimeGrid,
    integrator: Vec<f64>,
}

impl StieltjesMeasure {
    pub fn new(grid: TimeGrid, integrator: Vec<f64>) -> Result<Self> {
        if integrator.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: integrator.len(),
            });
        }
        Ok(Self { grid, integrator })
    }

    /// `dX^i` for component `i` of a path.
    pub fn from_component(path: &SampledPath, i: usize) -> Result<Self> {
        if i >= path.dim() {
            return Err(Error::DimensionMismatch {
                expected: path.dim(),
                found: i + 1,
            });
        }
        Self::new(*path.grid(), path.component(i))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn integrator(&self) -> &[f64] {
        &self.integrator
    }
}

/// Grid intervals `m` whose closure meets `[a, b]`.
pub(crate) fn intervals_meeting(grid: &TimeGrid, a: f64, b: f64) -> core::ops::Range<usize> {
    let h = grid.step();
    let n = grid.intervals() as f64;
    let lo = libm::floor(a / h).clamp(0.0, n) as usize;
    let hi = libm::ceil(b / h).clamp(0.0, n) as usize;
    lo..hi
}

impl Distribution for StieltjesMeasure {
    fn pair(&self, f: &dyn TestFn) -> f64 {
        let (a, b) = f.support();
        let h = self.grid.step();
        intervals_meeting(&self.grid, a, b)
            .map(|m| {
                let dz = self.integrator[m + 1] - self.integrator[m];
                if dz == 0.0 {
                    0.0
                } else {
                    f.eval((m as f64 + 0.5) * h) * dz
                }
            })
            .sum()
    }

    fn resolution(&self) -> Option<TimeGrid> {
        Some(self.grid)
    }
}

/// `weight * delta_at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub at: f64,
    pub weight: f64,
}

impl Distribution for PointMass {
    fn pair(&self, f: &dyn TestFn) -> f64 {
        self.weight * f.eval(self.at)
    }

    fn resolution(&self) -> Option<TimeGrid> {
        None
    }
}

/// Coefficients of one level, indexed `first..first + values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBand {
    pub level: u32,
    pub first: i64,
    pub values: Vec<f64>,
}

impl CoefficientBand {
    pub fn get(&self, k: i64) -> f64 {
        let i = k - self.first;
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    pub fn last(&self) -> i64 {
        self.first + self.values.len() as i64 - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.first + i as i64, *v))
    }
}

/// Scaling coefficients at the base level plus wavelet coefficients for
/// every level from the base level to the top level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub horizon: f64,
    pub scaling: CoefficientBand,
    pub wavelet: Vec<CoefficientBand>,
}

impl CoefficientTable {
    pub fn base_level(&self) -> u32 {
        self.scaling.level
    }

    pub fn top_level(&self) -> u32 {
        self.wavelet.last().map_or(self.scaling.level, |b| b.level)
    }
}

fn check_levels(basis: &WaveletBasis, l: u32, top: u32) -> Result<()> {
    if l > top {
        return Err(Error::InvalidParameter(format!(
            "base level {l} exceeds top level {top}"
        )));
    }
    if basis.support_radius() > (1i64 << l.min(62)) {
        return Err(Error::BaseLevelTooCoarse(l));
    }
    Ok(())
}

/// Pairs `xi` with the scaling functions at level `l` and the wavelets at
/// levels `l..=top`, over the index sets `I_j`.
pub fn wavelet_coefficients(
    xi: &dyn Distribution,
    frame: &DyadicFrame<'_>,
    l: u32,
    top: u32,
) -> Result<CoefficientTable> {
    check_levels(frame.basis, l, top)?;
    if let Some(g) = xi.resolution() {
        if top + 1 > g.level() {
            return Err(Error::UnresolvableLevel {
                level: top,
                grid_level: g.level(),
            });
        }
    }
    let band = |kind: BasisKind, j: u32| {
        let (a, b) = frame.basis.index_range(j);
        let values = par::map_range(0, (b - a + 1) as usize, |i| {
            xi.pair(&frame.function(kind, j, a + i as i64))
        });
        CoefficientBand {
            level: j,
            first: a,
            values,
        }
    };
    Ok(CoefficientTable {
        horizon: frame.horizon,
        scaling: band(BasisKind::Scaling, l),
        wavelet: (l..=top).map(|j| band(BasisKind::Wavelet, j)).collect(),
    })
}

/// Index range of level-`top + 1` scaling coefficients that determines every
/// coefficient of the table with base level `l` exactly.
pub fn analysis_range(basis: &WaveletBasis, l: u32, top: u32) -> (i64, i64) {
    let mut need = basis.index_range(l);
    for j in l..=top {
        let i = basis.index_range(j);
        let u = (need.0.min(i.0), need.1.max(i.1));
        need = basis.expand(u);
    }
    need
}

/// Forward transform from scaling coefficients at level `top + 1` down to
/// base level `l`.
pub fn analysis(
    basis: &WaveletBasis,
    fine: &CoefficientBand,
    l: u32,
    horizon: f64,
) -> Result<CoefficientTable> {
    if fine.level == 0 {
        return Err(Error::InvalidParameter(
            "fine level must be positive".into(),
        ));
    }
    let top = fine.level - 1;
    check_levels(basis, l, top)?;
    // ranges of scaling coefficients needed at each level, base first
    let mut ranges = Vec::new();
    let mut need = basis.index_range(l);
    for j in l..=top {
        ranges.push(need);
        let i = basis.index_range(j);
        need = basis.expand((need.0.min(i.0), need.1.max(i.1)));
    }
    let mut wavelet = Vec::new();
    let mut current = fine.clone();
    for j in (l..=top).rev() {
        wavelet.push(basis.split(&current, basis.index_range(j), BasisKind::Wavelet));
        current = basis.split(&current, ranges[(j - l) as usize], BasisKind::Scaling);
    }
    wavelet.reverse();
    Ok(CoefficientTable {
        horizon,
        scaling: current,
        wavelet,
    })
}

/// `z(t) = sum_k a_k int_0^t phi^l_k + sum_j sum_k b^j_k int_0^t psi^j_k` at
/// every node of `grid`.
pub fn antiderivative(
    table: &CoefficientTable,
    basis: &WaveletBasis,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    let frame = DyadicFrame::new(basis, table.horizon)?;
    let mut z = vec![0.0; grid.len()];
    accumulate_band(&frame, BasisKind::Scaling, &table.scaling, grid, &mut z)?;
    for band in &table.wavelet {
        accumulate_band(&frame, BasisKind::Wavelet, band, grid, &mut z)?;
    }
    Ok(z)
}

fn accumulate_band(
    frame: &DyadicFrame<'_>,
    kind: BasisKind,
    band: &CoefficientBand,
    grid: &TimeGrid,
    z: &mut [f64],
) -> Result<()> {
    let basis = frame.basis;
    let (lo, hi) = basis.support();
    let dilation = (1u64 << band.level) as f64 / frame.horizon;
    let amp = 1.0 / libm::sqrt(dilation);
    let mass = basis.unit_cumulative(kind, hi as f64)?;
    // prefix[i] = sum of the first i coefficients
    let mut prefix = vec![0.0; band.values.len() + 1];
    for (i, v) in band.values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let cum_at = |t: f64| -> f64 {
        let x = dilation * t;
        // functions with k <= x - hi are fully to the left of t
        let k_full = libm::floor(x - hi as f64) as i64;
        let k_top = libm::ceil(x - lo as f64) as i64;
        let full_end = (k_full - band.first + 1).clamp(0, band.values.len() as i64) as usize;
        let mut acc = mass * prefix[full_end];
        for k in (k_full + 1).max(band.first)..=k_top.min(band.last()) {
            let c = band.get(k);
            if c != 0.0 {
                acc += c * basis.unit_cumulative(kind, x - k as f64).unwrap_or(0.0);
            }
        }
        amp * acc
    };
    let base = cum_at(0.0);
    for (m, zm) in z.iter_mut().enumerate() {
        *zm += cum_at(grid.node(m)) - base;
    }
    Ok(())
}

/// Antiderivative of `xi` from its coefficients at base level `l` through
/// level `top`, on the grid of `xi`.
pub fn antiderivative_from_distribution(
    xi: &StieltjesMeasure,
    basis: &WaveletBasis,
    l: u32,
    top: u32,
) -> Result<SampledPath> {
    let frame = DyadicFrame::new(basis, xi.grid.horizon())?;
    let table = wavelet_coefficients(xi, &frame, l, top)?;
    let z = antiderivative(&table, basis, &xi.grid)?;
    SampledPath::new(xi.grid, 1, z)
}

/// Smallest base level with `c 2^-l <= 1`.
pub fn minimal_base_level(basis: &WaveletBasis) -> u32 {
    let c = basis.support_radius() as u64;
    let mut l = 0;
    while (1u64 << l) < c {
        l += 1;
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{generate_path, PathKind};

    fn basis() -> WaveletBasis {
        WaveletBasis::standard()
    }

    #[test]
    fn filter_identities() {
        for taps in [4, 6, 8] {
            let b = WaveletBasis::daubechies(taps).unwrap();
            let h = b.filter();
            let s: f64 = h.iter().sum();
            assert!(
                (s - libm::sqrt(2.0)).abs() < 1e-14,
                "taps {taps}: {}",
                s - libm::sqrt(2.0)
            );
            for shift in 0..taps / 2 {
                let d: f64 = (0..taps - 2 * shift).map(|n| h[n] * h[n + 2 * shift]).sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!(
                    (d - want).abs() < 1e-14,
                    "taps {taps} shift {shift}: {}",
                    d - want
                );
            }
        }
        assert!(WaveletBasis::daubechies(5).is_err());
    }

    #[test]
    fn table_required() {
        let b = WaveletBasis::daubechies(6).unwrap();
        assert_eq!(
            cascade_evaluate(&b, BasisKind::Scaling, 0, 0, 0.0),
            Err(Error::TableNotBuilt)
        );
    }

    #[test]
    fn partition_of_unity_on_table() {
        let b = basis();
        for &x in &[0.0, 0.125, 0.3, 0.77] {
            let s: f64 = (-4..=4)
                .map(|k| b.unit_value(BasisKind::Scaling, x - k as f64).unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-10, "x = {x}: {s}");
        }
    }

    #[test]
    fn table_moments() {
        let b = basis();
        let (lo, hi) = b.support();
        assert!((b.unit_cumulative(BasisKind::Scaling, hi as f64).unwrap() - 1.0).abs() < 1e-10);
        assert!(
            b.unit_cumulative(BasisKind::Wavelet, hi as f64)
                .unwrap()
                .abs()
                < 1e-10
        );
        // first moment of psi by the trapezoid rule on the table
        let n = ((hi - lo) as usize) << 10;
        let h = 1.0 / 1024.0;
        let m1: f64 = (0..=n)
            .map(|i| {
                let x = lo as f64 + i as f64 * h;
                x * b.unit_value(BasisKind::Wavelet, x).unwrap() * h
            })
            .sum();
        assert!(m1.abs() < 1e-8);
    }

    #[test]
    fn orthonormal_on_table() {
        let b = basis();
        let (lo, hi) = b.support();
        let h = 1.0 / 1024.0;
        let ip = |k1: BasisKind, s1: i64, k2: BasisKind, s2: i64| -> f64 {
            let n = ((hi - lo + 8) as usize) << 10;
            (0..=n)
                .map(|i| {
                    let x = (lo - 4) as f64 + i as f64 * h;
                    b.unit_value(k1, x - s1 as f64).unwrap()
                        * b.unit_value(k2, x - s2 as f64).unwrap()
                        * h
                })
                .sum()
        };
        use BasisKind::*;
        assert!((ip(Scaling, 0, Scaling, 0) - 1.0).abs() < 1e-4);
        assert!((ip(Wavelet, 0, Wavelet, 0) - 1.0).abs() < 1e-4);
        assert!(ip(Scaling, 0, Scaling, 1).abs() < 1e-4);
        assert!(ip(Scaling, 0, Wavelet, 0).abs() < 1e-4);
        assert!(ip(Wavelet, 0, Wavelet, 2).abs() < 1e-4);
    }

    #[test]
    fn refinement_holds_at_table_nodes() {
        let b = basis();
        let h = b.filter();
        let s = b.shift();
        for &x in &[-1.5, -0.25, 0.5, 1.0, 2.375] {
            let lhs = b.unit_value(BasisKind::Scaling, x).unwrap();
            let rhs: f64 = (0..h.len())
                .map(|n| {
                    h[n] * b
                        .unit_value(BasisKind::Scaling, 2.0 * x - (n as i64 - s) as f64)
                        .unwrap()
                })
                .sum::<f64>()
                * libm::sqrt(2.0);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_coefficients_are_point_values() {
        let b = basis();
        let frame = DyadicFrame::new(&b, 1.0).unwrap();
        let t0 = 0.375;
        let t = wavelet_coefficients(
            &PointMass {
                at: t0,
                weight: 1.0,
            },
            &frame,
            2,
            3,
        )
        .unwrap();
        for (k, v) in t.scaling.iter() {
            let want = cascade_evaluate(&b, BasisKind::Scaling, 2, k, t0).unwrap();
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_measure_has_zero_coefficients() {
        let b = basis();
        let g = TimeGrid::new(1.0, 8).unwrap();
        let xi = StieltjesMeasure::new(g, vec![0.0; g.len()]).unwrap();
        let frame = DyadicFrame::new(&b, 1.0).unwrap();
        let t = wavelet_coefficients(&xi, &frame, 2, 5).unwrap();
        assert!(t.scaling.values.iter().all(|v| *v == 0.0));
        assert!(t.wavelet.iter().all(|b| b.values.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn level_checks() {
        let b = basis();
        let g = TimeGrid::new(1.0, 8).unwrap();
        let xi = StieltjesMeasure::new(g, vec![0.0; g.len()]).unwrap();
        let frame = DyadicFrame::new(&b, 1.0).unwrap();
        assert!(matches!(
            wavelet_coefficients(&xi, &frame, 2, 8),
            Err(Error::UnresolvableLevel { .. })
        ));
        assert!(matches!(
            wavelet_coefficients(&xi, &frame, 1, 5),
            Err(Error::BaseLevelTooCoarse(1))
        ));
        assert_eq!(minimal_base_level(&b), 2);
    }

    #[test]
    fn antiderivative_of_dt_is_t() {
        let b = basis();
        let g = TimeGrid::new(1.0, 12).unwrap();
        let w = generate_path(&PathKind::Polynomial(vec![vec![0.0, 1.0]]), g, 1).unwrap();
        let xi = StieltjesMeasure::from_component(&w, 0).unwrap();
        let z = antiderivative_from_distribution(&xi, &b, 2, 10).unwrap();
        for k in 0..g.len() {
            assert!(
                (z.get(k, 0) - g.node(k)).abs() < 1e-4,
                "node {k}: {}",
                z.get(k, 0) - g.node(k)
            );
        }
    }

    #[test]
    fn analysis_matches_direct_pairing() {
        let b = basis();
        let g = TimeGrid::new(1.0, 11).unwrap();
        let w = generate_path(&PathKind::SinCos, g, 1).unwrap();
        let xi = StieltjesMeasure::from_component(&w, 0).unwrap();
        let frame = DyadicFrame::new(&b, 1.0).unwrap();
        let direct = wavelet_coefficients(&xi, &frame, 2, 6).unwrap();
        let (a, z) = analysis_range(&b, 2, 6);
        let fine = CoefficientBand {
            level: 7,
            first: a,
            values: (a..=z)
                .map(|k| xi.pair(&frame.function(BasisKind::Scaling, 7, k)))
                .collect(),
        };
        let dwt = analysis(&b, &fine, 2, 1.0).unwrap();
        for (x, y) in direct.scaling.values.iter().zip(&dwt.scaling.values) {
            assert!((x - y).abs() < 1e-6);
        }
        for (bx, by) in direct.wavelet.iter().zip(&dwt.wavelet) {
            assert_eq!(bx.first, by.first);
            for (x, y) in bx.values.iter().zip(&by.values) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn first_moment_matches_quadrature() {
        let b = basis();
        let (lo, hi) = b.support();
        let cells = 70_000;
        let dx = (hi - lo) as f64 / cells as f64;
        let m: f64 = (0..cells)
            .map(|i| {
                let x = lo as f64 + (i as f64 + 0.5) * dx;
                x * b.unit_value(BasisKind::Scaling, x).unwrap() * dx
            })
            .sum();
        assert!((m - b.first_moment()).abs() < 1e-5);
        assert_eq!(b.anchor_offset(), -2);
    }
}
