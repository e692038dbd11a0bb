//! Second-order processes, rough paths, Chen's relation and piecewise-smooth
//! lifts.
//!
//! A [`SecondOrderProcess`] stores one `n x n` tensor per finest grid interval
//! and, once built, a pyramid of tensors for every aligned dyadic block.
//! Queries on arbitrary node pairs split the pair into maximal aligned blocks
//! and glue them with Chen's relation
//! `X_{s,t} = X_{s,u} + X_{u,t} + W_{s,u} (x) W_{u,t}`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_paths::{euclidean, poly_eval, PairScan, SampledPath, TimeGrid};
use crate::par;

/// Grid levels up to this value use exhaustive scans for Chen defects and
/// rough-path seminorms.
pub const EXHAUSTIVE_ROUGH_LEVEL: u32 = 8;

/// Second-order increments of an `R^n`-valued path.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderProcess {
    grid: TimeGrid,
    dim: usize,
    finest: Vec<f64>,
    // pyramid[m] holds the 2^m blocks of level m, for m < grid level
    pyramid: Vec<Vec<f64>>,
}

impl SecondOrderProcess {
    /// Finest-interval tensors, interval-major, each row-major `n x n`.
    pub fn new(grid: TimeGrid, dim: usize, finest: Vec<f64>) -> Result<Self> {
        let expected = grid.intervals() * dim * dim;
        if finest.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: finest.len(),
            });
        }
        if finest.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "second-order values must be finite".into(),
            ));
        }
        Ok(Self {
            grid,
            dim,
            finest,
            pyramid: Vec::new(),
        })
    }

    /// Finest tensors plus stored coarse blocks: `pyramid[m]` holds the `2^m`
    /// blocks of level `m < grid level`, block-major.
    pub fn with_pyramid(
        grid: TimeGrid,
        dim: usize,
        finest: Vec<f64>,
        pyramid: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut out = Self::new(grid, dim, finest)?;
        if pyramid.len() != grid.level() as usize {
            return Err(Error::DimensionMismatch {
                expected: grid.level() as usize,
                found: pyramid.len(),
            });
        }
        for (m, blocks) in pyramid.iter().enumerate() {
            let expected = (1usize << m) * dim * dim;
            if blocks.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: blocks.len(),
                });
            }
            if blocks.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "second-order values must be finite".into(),
                ));
            }
        }
        out.pyramid = pyramid;
        Ok(out)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored coarse blocks; empty until built.
    pub fn pyramid(&self) -> &[Vec<f64>] {
        &self.pyramid
    }

    /// Tensor of finest interval `k`, i.e. `[t_k, t_{k+1}]`.
    pub fn interval(&self, k: usize) -> &[f64] {
        let q = self.dim * self.dim;
        &self.finest[k * q..(k + 1) * q]
    }

    pub fn intervals(&self) -> &[f64] {
        &self.finest
    }

    /// Adds `delta` to entry `(i, j)` of interval `k`. Cached coarse blocks are
    /// left untouched, so the process stops satisfying Chen's relation until
    /// [`SecondOrderProcess::rebuild_pyramid`] is called.
    pub fn perturb(&mut self, k: usize, i: usize, j: usize, delta: f64) {
        let d = self.dim;
        self.finest[k * d * d + i * d + j] += delta;
    }

    pub fn has_pyramid(&self) -> bool {
        !self.pyramid.is_empty() || self.grid.level() == 0
    }

    /// Fills every coarse dyadic block from the finest tensors by Chen's
    /// relation.
    pub fn rebuild_pyramid(&mut self, w: &SampledPath) -> Result<()> {
        check_pair(w, self)?;
        let level = self.grid.level();
        let q = self.dim * self.dim;
        let mut pyramid: Vec<Vec<f64>> = vec![Vec::new(); level as usize];
        let mut below = self.finest.clone();
        for m in (0..level).rev() {
            let blocks = 1usize << m;
            let width = 1usize << (level - m);
            let mut cur = vec![0.0; blocks * q];
            for b in 0..blocks {
                let s = b * width;
                let u = s + width / 2;
                let t = s + width;
                let out = &mut cur[b * q..(b + 1) * q];
                out.copy_from_slice(&below[2 * b * q..(2 * b + 1) * q]);
                for (o, v) in out.iter_mut().zip(&below[(2 * b + 1) * q..(2 * b + 2) * q]) {
                    *o += v;
                }
                add_outer(
                    out,
                    w.value(s),
                    w.value(u),
                    w.value(u),
                    w.value(t),
                    self.dim,
                );
            }
            pyramid[m as usize] = cur.clone();
            below = cur;
        }
        self.pyramid = pyramid;
        Ok(())
    }

    fn block(&self, m: u32, b: usize) -> &[f64] {
        let q = self.dim * self.dim;
        if m == self.grid.level() {
            &self.finest[b * q..(b + 1) * q]
        } else {
            &self.pyramid[m as usize][b * q..(b + 1) * q]
        }
    }
}

/// `out += (b - a) (x) (d - c)`.
fn add_outer(out: &mut [f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64], n: usize) {
    for i in 0..n {
        let x = b[i] - a[i];
        if x == 0.0 {
            continue;
        }
        for j in 0..n {
            out[i * n + j] += x * (d[j] - c[j]);
        }
    }
}

fn check_pair(w: &SampledPath, x: &SecondOrderProcess) -> Result<()> {
    if w.grid() != &x.grid {
        return Err(Error::GridMismatch);
    }
    if w.dim() != x.dim {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: x.dim,
        });
    }
    Ok(())
}

fn check_nodes(grid: &TimeGrid, s: usize, t: usize) -> Result<()> {
    if s >= t || t > grid.intervals() {
        return Err(Error::NodeOrder { s, t });
    }
    Ok(())
}

/// `X_{s,t}` folded left to right from the finest tensors.
pub fn chen_extend(
    proc: &SecondOrderProcess,
    w: &SampledPath,
    s: usize,
    t: usize,
) -> Result<Vec<f64>> {
    check_pair(w, proc)?;
    check_nodes(&proc.grid, s, t)?;
    let n = proc.dim;
    let mut acc = vec![0.0; n * n];
    for m in s..t {
        for (a, v) in acc.iter_mut().zip(proc.interval(m)) {
            *a += v;
        }
        add_outer(
            &mut acc,
            w.value(s),
            w.value(m),
            w.value(m),
            w.value(m + 1),
            n,
        );
    }
    Ok(acc)
}

/// A path together with its second-order process and Hölder exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPath {
    path: SampledPath,
    second: SecondOrderProcess,
    alpha: f64,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 / 3.0 && alpha <= 0.5) {
        return Err(Error::InvalidExponent {
            name: "alpha",
            value: alpha,
        });
    }
    Ok(())
}

impl RoughPath {
    /// Builds the dyadic pyramid from the finest tensors when it is missing.
    pub fn new(path: SampledPath, mut second: SecondOrderProcess, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_pair(&path, &second)?;
        if !second.has_pyramid() {
            second.rebuild_pyramid(&path)?;
        }
        Ok(Self {
            path,
            second,
            alpha,
        })
    }

    /// Fills the finest interval and every dyadic block independently from
    /// `f(s, t, out)`, which writes `X_{s,t}` for node indices `s < t`.
    pub fn from_blocks<F>(path: SampledPath, alpha: f64, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, &mut [f64]) + Sync + Send,
    {
        check_alpha(alpha)?;
        let grid = *path.grid();
        let level = grid.level();
        let n = path.dim();
        let q = n * n;
        let fill = |m: u32| -> Vec<f64> {
            let width = 1usize << (level - m);
            let rows = par::map_range(0, 1usize << m, |b| {
                let mut out = vec![0.0; q];
                f(b * width, (b + 1) * width, &mut out);
                out
            });
            rows.concat()
        };
        let finest = fill(level);
        let pyramid = (0..level).map(fill).collect();
        let second = SecondOrderProcess {
            grid,
            dim: n,
            finest,
            pyramid,
        };
        Ok(Self {
            path,
            second,
            alpha,
        })
    }

    pub fn path(&self) -> &SampledPath {
        &self.path
    }

    pub fn second(&self) -> &SecondOrderProcess {
        &self.second
    }

    pub fn second_mut(&mut self) -> &mut SecondOrderProcess {
        &mut self.second
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &TimeGrid {
        self.path.grid()
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    /// `X_{s,t}` assembled from maximal aligned dyadic blocks.
    pub fn second_order(&self, s: usize, t: usize) -> Result<Vec<f64>> {
        check_nodes(self.grid(), s, t)?;
        let mut out = vec![0.0; self.dim() * self.dim()];
        self.second_order_into(s, t, &mut out);
        Ok(out)
    }

    pub(crate) fn second_order_into(&self, s: usize, t: usize, out: &mut [f64]) {
        let n = self.dim();
        let level = self.grid().level();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut p = s;
        while p < t {
            let mut m = level;
            // grow the block while it stays aligned and inside [p, t]
            while m > 0 {
                let width = 1usize << (level - m + 1);
                if p % width == 0 && p + width <= t {
                    m -= 1;
                } else {
                    break;
                }
            }
            let width = 1usize << (level - m);
            let block = self.second.block(m, p / width);
            for (o, v) in out.iter_mut().zip(block) {
                *o += v;
            }
            add_outer(
                out,
                self.path.value(s),
                self.path.value(p),
                self.path.value(p),
                self.path.value(p + width),
                n,
            );
            p += width;
        }
    }

    /// Restriction to the dyadic block `[m0, m1]`, re-based at time zero.
    pub fn window(&self, m0: usize, m1: usize) -> Result<Self> {
        let path = self.path.window(m0, m1)?;
        let grid = *path.grid();
        let q = self.dim() * self.dim();
        let finest = self.second.finest[m0 * q..m1 * q].to_vec();
        let sub_level = grid.level();
        let level = self.grid().level();
        let pyramid = (0..sub_level)
            .map(|m| {
                let parent = m + level - sub_level;
                let width = m1 - m0;
                let first = m0 / (width >> m);
                let count = 1usize << m;
                if parent == level {
                    self.second.finest[first * q..(first + count) * q].to_vec()
                } else {
                    self.second.pyramid[parent as usize][first * q..(first + count) * q].to_vec()
                }
            })
            .collect();
        let second = SecondOrderProcess {
            grid,
            dim: self.dim(),
            finest,
            pyramid,
        };
        Ok(Self {
            path,
            second,
            alpha: self.alpha,
        })
    }
}

fn frobenius(v: &[f64]) -> f64 {
    euclidean(v)
}

/// Largest Chen defect `|X_{s,t} - X_{s,u} - X_{u,t} - W_{s,u} (x) W_{u,t}|`
/// (Frobenius) over node triples.
///
/// All triples are visited up to grid level [`EXHAUSTIVE_ROUGH_LEVEL`]; above
/// it, every triple of the level-8 subgrid plus the aligned triples
/// `(p, p + 2^m, p + 2^{m+1})` on finer scales.
pub fn chen_defect(rp: &RoughPath) -> f64 {
    let grid = rp.grid();
    let level = grid.level();
    let n = rp.dim();
    let q = n * n;
    let coarse = level.min(EXHAUSTIVE_ROUGH_LEVEL);
    let stride = 1usize << (level - coarse);
    let nodes = (1usize << coarse) + 1;
    // pair table on the coarse subgrid
    let table: Vec<Vec<f64>> = par::map_range(0, nodes, |a| {
        let mut row = vec![0.0; nodes * q];
        for b in a + 1..nodes {
            rp.second_order_into(a * stride, b * stride, &mut row[b * q..(b + 1) * q]);
        }
        row
    });
    let defect =
        |xst: &[f64], xsu: &[f64], xut: &[f64], s: usize, u: usize, t: usize, buf: &mut [f64]| {
            for k in 0..q {
                buf[k] = xst[k] - xsu[k] - xut[k];
            }
            let (ws, wu, wt) = (rp.path.value(s), rp.path.value(u), rp.path.value(t));
            for i in 0..n {
                for j in 0..n {
                    buf[i * n + j] -= (wu[i] - ws[i]) * (wt[j] - wu[j]);
                }
            }
            frobenius(buf)
        };
    let rows = par::map_range(0, nodes, |a| {
        let mut buf = vec![0.0; q];
        let mut best = 0.0f64;
        for c in a + 2..nodes {
            let xst = &table[a][c * q..(c + 1) * q];
            for b in a + 1..c {
                let xsu = &table[a][b * q..(b + 1) * q];
                let xut = &table[b][c * q..(c + 1) * q];
                best = best.max(defect(
                    xst,
                    xsu,
                    xut,
                    a * stride,
                    b * stride,
                    c * stride,
                    &mut buf,
                ));
            }
        }
        best
    });
    let mut best = rows.into_iter().fold(0.0, f64::max);
    if stride > 1 {
        let mut buf = vec![0.0; q];
        let (mut xst, mut xsu, mut xut) = (vec![0.0; q], vec![0.0; q], vec![0.0; q]);
        let mut width = 1;
        while width < stride {
            let mut p = 0;
            while p + 2 * width <= grid.intervals() {
                rp.second_order_into(p, p + 2 * width, &mut xst);
                rp.second_order_into(p, p + width, &mut xsu);
                rp.second_order_into(p + width, p + 2 * width, &mut xut);
                best = best.max(defect(
                    &xst,
                    &xsu,
                    &xut,
                    p,
                    p + width,
                    p + 2 * width,
                    &mut buf,
                ));
                p += width;
            }
            width *= 2;
        }
    }
    best
}

/// `(||W||_alpha, ||X||_{2 alpha})`, Euclidean and Frobenius norms over node
/// pairs (exhaustive up to [`EXHAUSTIVE_ROUGH_LEVEL`], dyadic above).
pub fn rough_path_seminorm(rp: &RoughPath) -> (f64, f64) {
    let grid = *rp.grid();
    let n = rp.dim();
    let scan = PairScan::for_level(grid.level(), EXHAUSTIVE_ROUGH_LEVEL);
    let mut first = 0.0f64;
    let mut second = 0.0f64;
    let mut buf = vec![0.0; n * n];
    let mut inc = vec![0.0; n];
    scan.for_each(grid.intervals(), |s, t| {
        let dt = grid.node(t) - grid.node(s);
        let (a, b) = (rp.path.value(s), rp.path.value(t));
        for i in 0..n {
            inc[i] = b[i] - a[i];
        }
        first = first.max(euclidean(&inc) / libm::pow(dt, rp.alpha));
        rp.second_order_into(s, t, &mut buf);
        second = second.max(frobenius(&buf) / libm::pow(dt, 2.0 * rp.alpha));
    });
    (first, second)
}

/// `(||W - V||_alpha, ||X - Y||_{2 alpha})` for two rough paths on one grid,
/// over the same pairs as [`rough_path_seminorm`].
pub fn rough_path_distance(a: &RoughPath, b: &RoughPath) -> Result<(f64, f64)> {
    a.path.same_grid(&b.path)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let grid = *a.grid();
    let n = a.dim();
    let alpha = a.alpha;
    let scan = PairScan::for_level(grid.level(), EXHAUSTIVE_ROUGH_LEVEL);
    let (mut first, mut second) = (0.0f64, 0.0f64);
    let (mut xa, mut xb) = (vec![0.0; n * n], vec![0.0; n * n]);
    let mut inc = vec![0.0; n];
    scan.for_each(grid.intervals(), |s, t| {
        let dt = grid.node(t) - grid.node(s);
        for i in 0..n {
            inc[i] = (a.path.get(t, i) - a.path.get(s, i)) - (b.path.get(t, i) - b.path.get(s, i));
        }
        first = first.max(euclidean(&inc) / libm::pow(dt, alpha));
        a.second_order_into(s, t, &mut xa);
        b.second_order_into(s, t, &mut xb);
        for (x, y) in xa.iter_mut().zip(&xb) {
            *x -= y;
        }
        second = second.max(frobenius(&xa) / libm::pow(dt, 2.0 * alpha));
    });
    Ok((first, second))
}

/// Closed-form paths whose iterated integrals are known exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticForm {
    /// Component `i` is `sin t` for even `i`, `cos t` for odd `i`.
    SinCos,
    /// Ascending coefficients per component (one list is shared).
    Polynomial(Vec<Vec<f64>>),
}

/// How [`lift_piecewise_smooth`] builds the second level.
#[derive(Debug, Clone, PartialEq)]
pub enum LiftMode {
    /// `X = (1/2) dW (x) dW` on every finest interval.
    Linear,
    /// Exact iterated integrals of a closed-form path.
    Analytic(AnalyticForm),
}

impl AnalyticForm {
    fn component(&self, i: usize, t: f64) -> f64 {
        match self {
            AnalyticForm::SinCos => {
                if i % 2 == 0 {
                    libm::sin(t)
                } else {
                    libm::cos(t)
                }
            }
            AnalyticForm::Polynomial(c) => poly_eval(&c[if c.len() == 1 { 0 } else { i }], t),
        }
    }

    fn name(&self) -> String {
        match self {
            AnalyticForm::SinCos => "sin_cos".into(),
            AnalyticForm::Polynomial(_) => "polynomial".into(),
        }
    }

    /// Antiderivative of `x_i x_j'` at `t`.
    fn primitive(&self, i: usize, j: usize, t: f64) -> f64 {
        match self {
            AnalyticForm::SinCos => {
                let (s, c) = (libm::sin(t), libm::cos(t));
                match (i % 2, j % 2) {
                    (0, 0) => 0.5 * s * s,
                    (0, _) => -(0.5 * t - 0.5 * s * c),
                    (_, 0) => 0.5 * t + 0.5 * s * c,
                    _ => 0.5 * c * c,
                }
            }
            AnalyticForm::Polynomial(c) => {
                let pick = |k: usize| &c[if c.len() == 1 { 0 } else { k }];
                let (p, q) = (pick(i), pick(j));
                // x_i x_j' has coefficients sum_{a + b - 1 = e} p_a b q_b
                let mut prod = vec![0.0; p.len() + q.len()];
                for (a, pa) in p.iter().enumerate() {
                    for (b, qb) in q.iter().enumerate().skip(1) {
                        prod[a + b - 1] += pa * b as f64 * qb;
                    }
                }
                let anti: Vec<f64> = core::iter::once(0.0)
                    .chain(prod.iter().enumerate().map(|(e, v)| v / (e + 1) as f64))
                    .collect();
                poly_eval(&anti, t)
            }
        }
    }

    fn check(&self, w: &SampledPath) -> Result<()> {
        if let AnalyticForm::Polynomial(c) = self {
            if c.len() != 1 && c.len() != w.dim() {
                return Err(Error::DimensionMismatch {
                    expected: w.dim(),
                    found: c.len(),
                });
            }
        }
        for k in 0..w.grid().len() {
            let t = w.grid().node(k);
            for i in 0..w.dim() {
                let want = self.component(i, t);
                if libm::fabs(w.get(k, i) - want) > 1e-9 * (1.0 + libm::fabs(want)) {
                    return Err(Error::UnknownAnalyticForm(self.name()));
                }
            }
        }
        Ok(())
    }
}

/// Lifts a sampled path to a rough path.
pub fn lift_piecewise_smooth(w: &SampledPath, mode: &LiftMode, alpha: f64) -> Result<RoughPath> {
    check_alpha(alpha)?;
    let n = w.dim();
    match mode {
        LiftMode::Linear => {
            let grid = *w.grid();
            let mut finest = vec![0.0; grid.intervals() * n * n];
            for (k, out) in finest.chunks_mut(n * n).enumerate() {
                let (a, b) = (w.value(k), w.value(k + 1));
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = 0.5 * (b[i] - a[i]) * (b[j] - a[j]);
                    }
                }
            }
            RoughPath::new(w.clone(), SecondOrderProcess::new(grid, n, finest)?, alpha)
        }
        LiftMode::Analytic(form) => {
            form.check(w)?;
            let grid = *w.grid();
            RoughPath::from_blocks(w.clone(), alpha, |s, t, out| {
                let (a, b) = (grid.node(s), grid.node(t));
                let (ws, wt) = (w.value(s), w.value(t));
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = form.primitive(i, j, b)
                            - form.primitive(i, j, a)
                            - ws[i] * (wt[j] - ws[j]);
                    }
                }
            })
        }
    }
}

/// Relative size of a Chen defect, `defect / (1 + ||W||_inf^2)`.
pub fn relative_chen_defect(rp: &RoughPath) -> f64 {
    let sup = rp.path.sup_norm();
    chen_defect(rp) / (1.0 + sup * sup)
}

/// Describes why a rough path fails validation, if it does.
pub fn validate_chen(rp: &RoughPath, tolerance: f64) -> Result<f64> {
    let rel = relative_chen_defect(rp);
    if rel > tolerance {
        return Err(Error::InvalidParameter(format!(
            "Chen defect {rel:e} exceeds tolerance {tolerance:e}"
        )));
    }
    Ok(rel)
}
