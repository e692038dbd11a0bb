//! Dyadic time grids, sampled paths, Hölder seminorms, localized test
//! functions and path generators.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::PackedCholesky;

/// Finest admissible grid level.
pub const MAX_LEVEL: u32 = 24;

/// Grid levels up to this value use the exhaustive pair scan in
/// [`holder_seminorm`]; above it only dyadic pairs are visited.
pub const EXHAUSTIVE_HOLDER_LEVEL: u32 = 12;

/// Uniform dyadic grid `{k T / 2^J : k = 0..=2^J}` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    level: u32,
}

impl TimeGrid {
    pub fn new(horizon: f64, level: u32) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        if level > MAX_LEVEL {
            return Err(Error::LevelOutOfRange {
                level,
                max: MAX_LEVEL,
            });
        }
        Ok(Self { horizon, level })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of intervals, `2^J`.
    pub fn intervals(&self) -> usize {
        1usize << self.level
    }

    /// Number of nodes, `2^J + 1`.
    pub fn len(&self) -> usize {
        self.intervals() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals() as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.intervals() {
            self.horizon
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Index of the node equal to `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.step();
        let k = libm::round(x);
        if k < 0.0 || k > self.intervals() as f64 {
            return None;
        }
        if libm::fabs(x - k) <= 1e-9 {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Grid of the sub-window `[m0, m0 + 2^p]`, re-based at time zero.
    pub fn window(&self, m0: usize, m1: usize) -> Result<Self> {
        let width = m1
            .checked_sub(m0)
            .ok_or(Error::NodeOrder { s: m0, t: m1 })?;
        if m1 > self.intervals() || !width.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "window [{m0}, {m1}] is not a dyadic block of the grid"
            )));
        }
        let p = width.trailing_zeros();
        TimeGrid::new(width as f64 * self.step(), p)
    }

    /// Node-index stride of the level-`m` subgrid.
    pub fn stride(&self, m: u32) -> Result<usize> {
        if m > self.level {
            return Err(Error::MeshTooFine {
                mesh: m,
                grid: self.level,
            });
        }
        Ok(1usize << (self.level - m))
    }
}

/// Values of an `R^n`-valued path at every node of a grid, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "path dimension must be positive".into(),
            ));
        }
        let expected = grid.len() * dim;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("path values must be finite".into()));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![0.0; grid.len() * dim],
        }
    }

    pub fn from_fn<F: FnMut(f64, &mut [f64])>(
        grid: TimeGrid,
        dim: usize,
        mut f: F,
    ) -> Result<Self> {
        let mut values = vec![0.0; grid.len() * dim];
        for (k, row) in values.chunks_mut(dim).enumerate() {
            f(grid.node(k), row);
        }
        Self::new(grid, dim, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn value_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.dim + i]
    }

    /// `X_t - X_s` for node indices `s`, `t`.
    pub fn increment(&self, s: usize, t: usize) -> Vec<f64> {
        let a = self.value(s);
        let b = self.value(t);
        b.iter().zip(a).map(|(b, a)| b - a).collect()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(i)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    /// Linear interpolation between nodes, constant outside `[0, T]`.
    pub fn value_at(&self, t: f64, out: &mut [f64]) {
        let n = self.grid.intervals();
        let x = t / self.grid.step();
        if x <= 0.0 {
            out.copy_from_slice(self.value(0));
            return;
        }
        if x >= n as f64 {
            out.copy_from_slice(self.value(n));
            return;
        }
        let k = (x as usize).min(n - 1);
        let w = x - k as f64;
        let a = self.value(k);
        let b = self.value(k + 1);
        for i in 0..self.dim {
            out[i] = a[i] + w * (b[i] - a[i]);
        }
    }

    /// Scalar version of [`SampledPath::value_at`] for one component.
    pub fn component_at(&self, i: usize, t: f64) -> f64 {
        let n = self.grid.intervals();
        let x = t / self.grid.step();
        if x <= 0.0 {
            return self.get(0, i);
        }
        if x >= n as f64 {
            return self.get(n, i);
        }
        let k = (x as usize).min(n - 1);
        let w = x - k as f64;
        let a = self.get(k, i);
        a + w * (self.get(k + 1, i) - a)
    }

    /// Largest Euclidean norm over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.dim)
            .map(euclidean)
            .fold(0.0, f64::max)
    }

    /// Restriction to the dyadic block `[m0, m1]`, re-based at time zero.
    pub fn window(&self, m0: usize, m1: usize) -> Result<Self> {
        let grid = self.grid.window(m0, m1)?;
        let values = self.values[m0 * self.dim..(m1 + 1) * self.dim].to_vec();
        Ok(Self {
            grid,
            dim: self.dim,
            values,
        })
    }

    pub fn same_grid(&self, other: &SampledPath) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

pub(crate) fn euclidean(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

pub(crate) fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| libm::fabs(*x)).sum()
}

/// Which node pairs a seminorm scan visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairScan {
    /// Every pair `s < t`; `O(N^2)`.
    Exhaustive,
    /// Pairs at distance `2^m` steps for every `m`, starting at every node.
    Dyadic,
}

impl PairScan {
    /// Exhaustive up to `threshold`, dyadic above it.
    pub fn for_level(level: u32, threshold: u32) -> Self {
        if level <= threshold {
            PairScan::Exhaustive
        } else {
            PairScan::Dyadic
        }
    }

    /// Calls `f(s, t)` for every visited pair of node indices of a grid with
    /// `intervals` intervals.
    pub fn for_each<F: FnMut(usize, usize)>(self, intervals: usize, mut f: F) {
        match self {
            PairScan::Exhaustive => {
                for s in 0..intervals {
                    for t in s + 1..=intervals {
                        f(s, t);
                    }
                }
            }
            PairScan::Dyadic => {
                let mut width = 1;
                while width <= intervals {
                    for s in 0..=intervals - width {
                        f(s, s + width);
                    }
                    width *= 2;
                }
            }
        }
    }
}

/// Grid Hölder seminorm `max |X_t - X_s| / |t - s|^alpha` (Euclidean norm).
///
/// Exhaustive for grid levels up to [`EXHAUSTIVE_HOLDER_LEVEL`], dyadic pairs
/// above.
pub fn holder_seminorm(path: &SampledPath, alpha: f64) -> Result<f64> {
    let scan = PairScan::for_level(path.grid.level(), EXHAUSTIVE_HOLDER_LEVEL);
    holder_seminorm_with(path, alpha, scan)
}

pub fn holder_seminorm_with(path: &SampledPath, alpha: f64, scan: PairScan) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidExponent {
            name: "alpha",
            value: alpha,
        });
    }
    let grid = path.grid;
    let d = path.dim;
    let mut best = 0.0f64;
    let mut buf = vec![0.0; d];
    scan.for_each(grid.intervals(), |s, t| {
        let a = path.value(s);
        let b = path.value(t);
        for i in 0..d {
            buf[i] = b[i] - a[i];
        }
        let q = euclidean(&buf) / libm::pow(grid.node(t) - grid.node(s), alpha);
        if q > best {
            best = q;
        }
    });
    Ok(best)
}

/// Profile `eta` of a localized test function, supported in `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
pub enum Profile {
    /// `exp(-1 / (1 - u^2))`; its `C^1_b` norm is about 1.16631, so divide
    /// by that constant to land in the unit ball of `C^1`.
    Bump,
    /// The bump scaled to unit mass (mass of the raw bump is about 0.443994).
    UnitBump,
    /// `u * exp(-1 / (1 - u^2))`, odd with zero mass.
    OddBump,
    /// Any profile supported in `[-1, 1]`.
    Custom(fn(f64) -> f64),
}

/// Integral of the raw bump over `[-1, 1]`.
pub const BUMP_MASS: f64 = 0.443_993_816_168_079_3;

/// `C^1_b` norm of the raw bump, `sup|eta| + sup|eta'|`.
pub const BUMP_C1_NORM: f64 = 1.166_309_193_003_519;

fn bump(u: f64) -> f64 {
    let q = 1.0 - u * u;
    if q <= 0.0 {
        0.0
    } else {
        libm::exp(-1.0 / q)
    }
}

impl Profile {
    pub fn eval(&self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        match self {
            Profile::Bump => bump(u),
            Profile::UnitBump => bump(u) / BUMP_MASS,
            Profile::OddBump => u * bump(u),
            Profile::Custom(f) => f(u),
        }
    }
}

/// `eta_s^lambda(t) = lambda^{-1} eta((t - s) / lambda)`.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub profile: Profile,
    pub center: f64,
    pub scale: f64,
}

impl TestFunction {
    pub fn new(profile: Profile, center: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::InvalidExponent {
                name: "scale",
                value: scale,
            });
        }
        Ok(Self {
            profile,
            center,
            scale,
        })
    }
}

/// A compactly supported function paired against distributions.
///
/// Pairings with function-valued symbols use the midpoint rule on
/// [`TestFn::cells`] equal cells spanning [`TestFn::support`].
pub trait TestFn: Sync {
    fn support(&self) -> (f64, f64);
    fn eval(&self, t: f64) -> f64;
    fn cells(&self) -> usize;
}

impl TestFn for TestFunction {
    fn support(&self) -> (f64, f64) {
        (self.center - self.scale, self.center + self.scale)
    }

    fn eval(&self, t: f64) -> f64 {
        self.profile.eval((t - self.center) / self.scale) / self.scale
    }

    fn cells(&self) -> usize {
        256
    }
}

pub fn evaluate_test_function(tf: &TestFunction, t: f64) -> f64 {
    tf.eval(t)
}

/// Path families understood by [`generate_path`].
#[derive(Debug, Clone, PartialEq)]
pub enum PathKind {
    /// Component `i` is `sin t` for even `i` and `cos t` for odd `i`.
    SinCos,
    /// Ascending coefficients per component; a single list is shared by all
    /// components.
    Polynomial(Vec<Vec<f64>>),
    /// Linear interpolation of `(time, value)` knots, constant outside them.
    PiecewiseLinear(Vec<(f64, Vec<f64>)>),
    /// Independent fractional Brownian components started at zero.
    Fbm { hurst: f64, seed: u64 },
}

pub(crate) fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

pub fn generate_path(kind: &PathKind, grid: TimeGrid, dim: usize) -> Result<SampledPath> {
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "path dimension must be positive".into(),
        ));
    }
    match kind {
        PathKind::SinCos => SampledPath::from_fn(grid, dim, |t, row| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = if i % 2 == 0 {
                    libm::sin(t)
                } else {
                    libm::cos(t)
                };
            }
        }),
        PathKind::Polynomial(coeffs) => {
            let coeffs = broadcast(coeffs, dim)?;
            SampledPath::from_fn(grid, dim, |t, row| {
                for (v, c) in row.iter_mut().zip(&coeffs) {
                    *v = poly_eval(c, t);
                }
            })
        }
        PathKind::PiecewiseLinear(knots) => {
            if knots.is_empty() {
                return Err(Error::InvalidParameter(
                    "piecewise-linear path needs knots".into(),
                ));
            }
            for w in knots.windows(2) {
                if !(w[1].0 > w[0].0) {
                    return Err(Error::InvalidParameter("knot times must increase".into()));
                }
            }
            for (_, v) in knots {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: v.len(),
                    });
                }
            }
            SampledPath::from_fn(grid, dim, |t, row| interpolate_knots(knots, t, row))
        }
        PathKind::Fbm { hurst, seed } => FbmSampler::new(grid, *hurst)?.sample(dim, *seed),
    }
}

fn broadcast(coeffs: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    match coeffs.len() {
        1 => Ok(vec![coeffs[0].clone(); dim]),
        n if n == dim => Ok(coeffs.to_vec()),
        n => Err(Error::DimensionMismatch {
            expected: dim,
            found: n,
        }),
    }
}

fn interpolate_knots(knots: &[(f64, Vec<f64>)], t: f64, out: &mut [f64]) {
    let first = &knots[0];
    let last = &knots[knots.len() - 1];
    if t <= first.0 {
        out.copy_from_slice(&first.1);
        return;
    }
    if t >= last.0 {
        out.copy_from_slice(&last.1);
        return;
    }
    let j = knots.partition_point(|k| k.0 <= t);
    let (t0, a) = (&knots[j - 1].0, &knots[j - 1].1);
    let (t1, b) = (&knots[j].0, &knots[j].1);
    let w = (t - t0) / (t1 - t0);
    for i in 0..out.len() {
        out[i] = a[i] + w * (b[i] - a[i]);
    }
}

/// Exact fractional Brownian sampler on a grid: Cholesky factor of the
/// covariance `(s^{2H} + t^{2H} - |t - s|^{2H}) / 2` over the nonzero nodes.
///
/// The factor is computed once; each call to [`FbmSampler::sample`] costs one
/// triangular matrix-vector product per component.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: f64,
    factor: PackedCholesky,
}

impl FbmSampler {
    pub fn new(grid: TimeGrid, hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::InvalidExponent {
                name: "hurst",
                value: hurst,
            });
        }
        let n = grid.intervals();
        let h2 = 2.0 * hurst;
        let times: Vec<f64> = (1..=n).map(|k| grid.node(k)).collect();
        let pw: Vec<f64> = times.iter().map(|t| libm::pow(*t, h2)).collect();
        let lag: Vec<f64> = (0..n)
            .map(|k| libm::pow(k as f64 * grid.step(), h2))
            .collect();
        let factor = PackedCholesky::factor(n, |i, j| 0.5 * (pw[i] + pw[j] - lag[i - j]))
            .map_err(Error::NotPositiveDefinite)?;
        Ok(Self {
            grid,
            hurst,
            factor,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Independent components driven by a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, dim: usize, seed: u64) -> Result<SampledPath> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.grid.intervals();
        let mut values = vec![0.0; self.grid.len() * dim];
        let mut z = vec![0.0; n];
        let mut x = vec![0.0; n];
        for i in 0..dim {
            for zk in z.iter_mut() {
                *zk = StandardNormal.sample(&mut rng);
            }
            self.factor.lower_mul(&z, &mut x);
            for (k, xk) in x.iter().enumerate() {
                values[(k + 1) * dim + i] = *xk;
            }
        }
        SampledPath::new(self.grid, dim, values).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}
