//! Controlled paths, modelled distributions, their seminorms, products with
//! the noise symbol and composition with smooth nonlinearities.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid_paths::{l1, PairScan, SampledPath, TimeGrid};
use crate::regularity_structure::{gamma_apply, Model, ModelSpaceVector, MultiIndex, Symbol};
use crate::rough_core::EXHAUSTIVE_ROUGH_LEVEL;

/// A path `y` in `R^d` with Gubinelli derivative `y'` in `R^{d x n}` (stored
/// row-major, index `a * n + i`) relative to an `n`-dimensional driver.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPath {
    pub y: SampledPath,
    pub y_prime: SampledPath,
    driver_dim: usize,
}

impl ControlledPath {
    pub fn new(y: SampledPath, y_prime: SampledPath, driver_dim: usize) -> Result<Self> {
        y.same_grid(&y_prime)?;
        let expected = y.dim() * driver_dim;
        if y_prime.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: y_prime.dim(),
            });
        }
        Ok(Self {
            y,
            y_prime,
            driver_dim,
        })
    }

    /// `y = W^i`, `y' = e_i`.
    pub fn component_of(w: &SampledPath, i: usize) -> Result<Self> {
        if i >= w.dim() {
            return Err(Error::DimensionMismatch {
                expected: w.dim(),
                found: i + 1,
            });
        }
        let y = SampledPath::new(*w.grid(), 1, w.component(i))?;
        let n = w.dim();
        let yp = SampledPath::from_fn(*w.grid(), n, |_, row| {
            row.iter_mut()
                .enumerate()
                .for_each(|(j, v)| *v = if j == i { 1.0 } else { 0.0 })
        })?;
        Self::new(y, yp, n)
    }

    pub fn grid(&self) -> &TimeGrid {
        self.y.grid()
    }

    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    pub fn driver_dim(&self) -> usize {
        self.driver_dim
    }

    fn check_driver(&self, w: &SampledPath) -> Result<()> {
        self.y.same_grid(w)?;
        if w.dim() != self.driver_dim {
            return Err(Error::DimensionMismatch {
                expected: self.driver_dim,
                found: w.dim(),
            });
        }
        Ok(())
    }

    /// `R^y_{s,t} = y_{s,t} - y'_s W_{s,t}`.
    pub fn remainder(&self, w: &SampledPath, s: usize, t: usize) -> Vec<f64> {
        let (d, n) = (self.dim(), self.driver_dim);
        let yp = self.y_prime.value(s);
        let (ws, wt) = (w.value(s), w.value(t));
        (0..d)
            .map(|a| {
                let lin: f64 = (0..n).map(|i| yp[a * n + i] * (wt[i] - ws[i])).sum();
                self.y.get(t, a) - self.y.get(s, a) - lin
            })
            .collect()
    }
}

/// `(||y'||_alpha, ||R^y||_{2 alpha})` with `l1` norms over node pairs
/// (exhaustive up to grid level 8, dyadic above).
pub fn controlled_norm(cp: &ControlledPath, w: &SampledPath, alpha: f64) -> Result<(f64, f64)> {
    cp.check_driver(w)?;
    let grid = *cp.grid();
    let scan = PairScan::for_level(grid.level(), EXHAUSTIVE_ROUGH_LEVEL);
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut inc = vec![0.0; cp.y_prime.dim()];
    scan.for_each(grid.intervals(), |s, t| {
        let dt = grid.node(t) - grid.node(s);
        let (p, q) = (cp.y_prime.value(s), cp.y_prime.value(t));
        for k in 0..inc.len() {
            inc[k] = q[k] - p[k];
        }
        a = a.max(l1(&inc) / libm::pow(dt, alpha));
        b = b.max(l1(&cp.remainder(w, s, t)) / libm::pow(dt, 2.0 * alpha));
    });
    Ok((a, b))
}

/// A function from grid nodes to `dim` copies of the model space.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelledDistribution {
    grid: TimeGrid,
    alpha: f64,
    gamma: f64,
    dim: usize,
    driver_dim: usize,
    values: Vec<ModelSpaceVector>,
}

impl ModelledDistribution {
    /// `values` is node-major: entry `k * dim + a` is component `a` at node `k`.
    pub fn new(
        grid: TimeGrid,
        alpha: f64,
        gamma: f64,
        dim: usize,
        driver_dim: usize,
        values: Vec<ModelSpaceVector>,
    ) -> Result<Self> {
        let expected = grid.len() * dim;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self {
            grid,
            alpha,
            gamma,
            dim,
            driver_dim,
            values,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn driver_dim(&self) -> usize {
        self.driver_dim
    }

    pub fn at(&self, k: usize, a: usize) -> &ModelSpaceVector {
        &self.values[k * self.dim + a]
    }

    pub fn node(&self, k: usize) -> &[ModelSpaceVector] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// `self - other`, keeping this distribution's `gamma`.
    pub fn difference(&self, other: &ModelledDistribution) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let mut v = a.clone();
                v.axpy(-1.0, b);
                v
            })
            .collect();
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    fn symbols_ok(&self, allowed: impl Fn(Symbol) -> bool) -> Result<()> {
        for v in &self.values {
            for (s, c) in v.iter() {
                if c != 0.0 && !allowed(s) {
                    return Err(Error::NotControlled(format!("symbol {s} in support")));
                }
            }
        }
        Ok(())
    }
}

/// `Y(t) = y_t 1 + y'_t W`, with `gamma = 2 alpha`.
pub fn to_modelled(cp: &ControlledPath, alpha: f64) -> ModelledDistribution {
    let (d, n) = (cp.dim(), cp.driver_dim);
    let grid = *cp.grid();
    let mut values = Vec::with_capacity(grid.len() * d);
    for k in 0..grid.len() {
        let yp = cp.y_prime.value(k);
        for a in 0..d {
            let mut v = ModelSpaceVector::new();
            v.add_term(Symbol::One, cp.y.get(k, a));
            for i in 0..n {
                v.add_term(Symbol::W(i), yp[a * n + i]);
            }
            values.push(v);
        }
    }
    ModelledDistribution {
        grid,
        alpha,
        gamma: 2.0 * alpha,
        dim: d,
        driver_dim: n,
        values,
    }
}

/// Inverse of [`to_modelled`].
pub fn from_modelled(f: &ModelledDistribution) -> Result<ControlledPath> {
    let n = f.driver_dim;
    f.symbols_ok(|s| matches!(s, Symbol::One) || matches!(s, Symbol::W(i) if i < n))?;
    let d = f.dim;
    let mut y = Vec::with_capacity(f.grid.len() * d);
    let mut yp = Vec::with_capacity(f.grid.len() * d * n);
    for k in 0..f.grid.len() {
        for a in 0..d {
            y.push(f.at(k, a).coeff(Symbol::One));
        }
        for a in 0..d {
            for i in 0..n {
                yp.push(f.at(k, a).coeff(Symbol::W(i)));
            }
        }
    }
    ControlledPath::new(
        SampledPath::new(f.grid, d, y)?,
        SampledPath::new(f.grid, d * n, yp)?,
        n,
    )
}

/// `sup_{s<t} sup_{beta < gamma} |f(t) - Gamma_{t,s} f(s)|_beta / |t-s|^{gamma-beta}`
/// with `l1` norms summed over components.
pub fn md_seminorm(f: &ModelledDistribution, model: &Model<'_>) -> Result<f64> {
    if model.grid() != &f.grid {
        return Err(Error::GridMismatch);
    }
    let alpha = model.alpha();
    let scan = PairScan::for_level(f.grid.level(), EXHAUSTIVE_ROUGH_LEVEL);
    let mut best = 0.0f64;
    let mut err = None;
    scan.for_each(f.grid.intervals(), |s, t| {
        if err.is_some() {
            return;
        }
        let g = model.gamma_nodes(t, s);
        let dt = f.grid.node(t) - f.grid.node(s);
        let mut diffs = Vec::with_capacity(f.dim);
        for a in 0..f.dim {
            match gamma_apply(&g, f.at(s, a)) {
                Ok(moved) => {
                    let mut d = f.at(t, a).clone();
                    d.axpy(-1.0, &moved);
                    diffs.push(d);
                }
                Err(e) => {
                    err = Some(e);
                    return;
                }
            }
        }
        let mut levels: Vec<f64> = diffs.iter().flat_map(|d| d.levels(alpha)).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        for beta in levels {
            if beta < f.gamma {
                let norm: f64 = diffs.iter().map(|d| d.norm_at(beta, alpha)).sum();
                best = best.max(norm / libm::pow(dt, f.gamma - beta));
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// `max_beta |f(0)|_beta + ||f||_gamma`.
pub fn md_norm(f: &ModelledDistribution, model: &Model<'_>) -> Result<f64> {
    let alpha = model.alpha();
    let start = f.node(0);
    let mut levels: Vec<f64> = start.iter().flat_map(|v| v.levels(alpha)).collect();
    levels.sort_by(f64::total_cmp);
    let head = levels
        .iter()
        .map(|&b| start.iter().map(|v| v.norm_at(b, alpha)).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(head + md_seminorm(f, model)?)
}

/// Product table of the structure; pairs not listed multiply to zero.
pub fn symbol_product(a: Symbol, b: Symbol) -> Option<Symbol> {
    match (a, b) {
        (Symbol::One, x) | (x, Symbol::One) => Some(x),
        (Symbol::W(i), Symbol::Wdot(j)) | (Symbol::Wdot(j), Symbol::W(i)) => {
            Some(Symbol::WWdot(i, j))
        }
        (Symbol::X(k), Symbol::X(m)) => {
            let mut e = [0u8; 4];
            for v in 0..4 {
                e[v] = k.0[v].checked_add(m.0[v])?;
            }
            Some(Symbol::x(MultiIndex(e)))
        }
        _ => None,
    }
}

fn times_wdot(v: &ModelSpaceVector, j: usize) -> ModelSpaceVector {
    let mut out = ModelSpaceVector::new();
    for (s, c) in v.iter() {
        if let Some(p) = symbol_product(s, Symbol::Wdot(j)) {
            out.add_term(p, c);
        }
    }
    out
}

/// `Y * Wdot` componentwise: component `a * n + j` is `Y^a Wdot^j`, so
/// `y^a Wdot^j + sum_i y'^{a i} WWdot^{i j}`. Regularity drops by `1 - alpha`.
pub fn multiply_by_wdot(f: &ModelledDistribution) -> Result<ModelledDistribution> {
    let n = f.driver_dim;
    f.symbols_ok(|s| matches!(s, Symbol::One | Symbol::W(_)))?;
    let mut values = Vec::with_capacity(f.values.len() * n);
    for v in &f.values {
        for j in 0..n {
            values.push(times_wdot(v, j));
        }
    }
    Ok(ModelledDistribution {
        grid: f.grid,
        alpha: f.alpha,
        gamma: f.gamma + f.alpha - 1.0,
        dim: f.dim * n,
        driver_dim: n,
        values,
    })
}

/// Contracted product for integrands valued in `R^{d x n}`: component `a` is
/// `sum_j F^{a j} Wdot^j`, the integrand of `int F(y) dW`.
pub fn multiply_by_wdot_contracted(f: &ModelledDistribution) -> Result<ModelledDistribution> {
    let n = f.driver_dim;
    if f.dim % n != 0 {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.dim,
        });
    }
    f.symbols_ok(|s| matches!(s, Symbol::One | Symbol::W(_)))?;
    let d = f.dim / n;
    let mut values = Vec::with_capacity(f.grid.len() * d);
    for k in 0..f.grid.len() {
        for a in 0..d {
            let mut out = ModelSpaceVector::new();
            for j in 0..n {
                out.axpy(1.0, &times_wdot(f.at(k, a * n + j), j));
            }
            values.push(out);
        }
    }
    Ok(ModelledDistribution {
        grid: f.grid,
        alpha: f.alpha,
        gamma: f.gamma + f.alpha - 1.0,
        dim: d,
        driver_dim: n,
        values,
    })
}

/// A smooth map `F: R^d -> R^m`.
pub trait Nonlinearity: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Number of bounded continuous derivatives available.
    fn smoothness(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]);
    /// `out[b * d + a] = dF^b / dy^a`.
    fn jacobian(&self, y: &[f64], out: &mut [f64]);
    /// Box `(lo, hi)` on which `F` may be evaluated; `None` for all of `R^d`.
    fn domain(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

/// Scalar profiles used by [`VectorField::Componentwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarFn {
    Identity,
    Sin,
    Cos,
    Tanh,
}

impl ScalarFn {
    fn value(self, x: f64) -> f64 {
        match self {
            ScalarFn::Identity => x,
            ScalarFn::Sin => libm::sin(x),
            ScalarFn::Cos => libm::cos(x),
            ScalarFn::Tanh => libm::tanh(x),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            ScalarFn::Identity => 1.0,
            ScalarFn::Sin => libm::cos(x),
            ScalarFn::Cos => -libm::sin(x),
            ScalarFn::Tanh => {
                let t = libm::tanh(x);
                1.0 - t * t
            }
        }
    }
}

/// Built-in vector fields `F: R^d -> R^{d x n}` (output index `a * n + j`).
#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    /// `F^{a j}(y) = sum_b A[(a j), b] y^b`, `A` row-major `(d n) x d`.
    Linear {
        d: usize,
        n: usize,
        matrix: Vec<f64>,
    },
    /// `F^{a j}(y) = g(y^a)` for every `j`.
    Componentwise { d: usize, n: usize, g: ScalarFn },
    /// Constant `F`.
    Constant { d: usize, n: usize, value: Vec<f64> },
}

impl VectorField {
    /// `F(y) = y` for a scalar equation driven by a scalar path.
    pub fn identity() -> Self {
        VectorField::Linear {
            d: 1,
            n: 1,
            matrix: vec![1.0],
        }
    }

    /// `F(y) = J y` with `J` the quarter turn, driven by a scalar path.
    pub fn rotation() -> Self {
        VectorField::Linear {
            d: 2,
            n: 1,
            matrix: vec![0.0, -1.0, 1.0, 0.0],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            VectorField::Linear { d, n, .. }
            | VectorField::Componentwise { d, n, .. }
            | VectorField::Constant { d, n, .. } => (*d, *n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d, n) = self.shape();
        let (expected, found) = match self {
            VectorField::Linear { matrix, .. } => (d * n * d, matrix.len()),
            VectorField::Constant { value, .. } => (d * n, value.len()),
            VectorField::Componentwise { .. } => (0, 0),
        };
        if expected != found || d == 0 || n == 0 {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }
}

impl Nonlinearity for VectorField {
    fn input_dim(&self) -> usize {
        self.shape().0
    }

    fn output_dim(&self) -> usize {
        let (d, n) = self.shape();
        d * n
    }

    fn smoothness(&self) -> usize {
        usize::MAX
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let (d, n) = self.shape();
        match self {
            VectorField::Linear { matrix, .. } => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = (0..d).map(|b| matrix[r * d + b] * y[b]).sum();
                }
            }
            VectorField::Componentwise { g, .. } => {
                for a in 0..d {
                    let v = g.value(y[a]);
                    out[a * n..(a + 1) * n].iter_mut().for_each(|o| *o = v);
                }
            }
            VectorField::Constant { value, .. } => out.copy_from_slice(value),
        }
    }

    fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        let (d, n) = self.shape();
        match self {
            VectorField::Linear { matrix, .. } => out.copy_from_slice(matrix),
            VectorField::Componentwise { g, .. } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for a in 0..d {
                    let v = g.derivative(y[a]);
                    for j in 0..n {
                        out[(a * n + j) * d + a] = v;
                    }
                }
            }
            VectorField::Constant { .. } => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }
}

/// Restricts a nonlinearity to a box.
pub struct Restricted {
    pub inner: Box<dyn Nonlinearity>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Nonlinearity for Restricted {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn smoothness(&self) -> usize {
        self.inner.smoothness()
    }
    fn eval(&self, y: &[f64], out: &mut [f64]) {
        self.inner.eval(y, out)
    }
    fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        self.inner.jacobian(y, out)
    }
    fn domain(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((self.lo.clone(), self.hi.clone()))
    }
}

/// `F(Y) = F(y) 1 + F'(y) y' W`.
pub fn compose(f_map: &dyn Nonlinearity, f: &ModelledDistribution) -> Result<ModelledDistribution> {
    if f_map.smoothness() < 2 {
        return Err(Error::MissingDerivatives {
            available: f_map.smoothness(),
            needed: 2,
        });
    }
    let cp = from_modelled(f)?;
    let (d, n) = (cp.dim(), cp.driver_dim);
    if f_map.input_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: f_map.input_dim(),
            found: d,
        });
    }
    let m = f_map.output_dim();
    let mut fy = vec![0.0; m];
    let mut jac = vec![0.0; m * d];
    let mut values = Vec::with_capacity(f.grid.len() * m);
    for k in 0..f.grid.len() {
        let y = cp.y.value(k);
        let yp = cp.y_prime.value(k);
        f_map.eval(y, &mut fy);
        f_map.jacobian(y, &mut jac);
        for b in 0..m {
            let mut v = ModelSpaceVector::new();
            v.add_term(Symbol::One, fy[b]);
            for i in 0..n {
                let c: f64 = (0..d).map(|a| jac[b * d + a] * yp[a * n + i]).sum();
                v.add_term(Symbol::W(i), c);
            }
            values.push(v);
        }
    }
    Ok(ModelledDistribution {
        grid: f.grid,
        alpha: f.alpha,
        gamma: f.gamma,
        dim: m,
        driver_dim: n,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{generate_path, PathKind};
    use crate::rough_core::{lift_piecewise_smooth, LiftMode};

    fn setup() -> (SampledPath, ControlledPath) {
        let grid = TimeGrid::new(1.0, 6).unwrap();
        let w = generate_path(
            &PathKind::Fbm {
                hurst: 0.45,
                seed: 5,
            },
            grid,
            1,
        )
        .unwrap();
        let y = SampledPath::from_fn(grid, 1, |t, r| r[0] = libm::sin(3.0 * t)).unwrap();
        let yp = SampledPath::from_fn(grid, 1, |t, r| r[0] = libm::cos(2.0 * t)).unwrap();
        (w, ControlledPath::new(y, yp, 1).unwrap())
    }

    #[test]
    fn round_trip() {
        let (_, cp) = setup();
        let back = from_modelled(&to_modelled(&cp, 0.4)).unwrap();
        assert_eq!(back, cp);
    }

    #[test]
    fn seminorm_is_max_of_controlled_norms() {
        let (w, cp) = setup();
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.4).unwrap();
        let m = Model::rough(&rp);
        let s = md_seminorm(&to_modelled(&cp, 0.4), &m).unwrap();
        let (a, b) = controlled_norm(&cp, &w, 0.4).unwrap();
        assert!((s - a.max(b)).abs() <= 1e-12 * s);
    }

    #[test]
    fn product_table() {
        assert_eq!(
            symbol_product(Symbol::One, Symbol::Wdot(1)),
            Some(Symbol::Wdot(1))
        );
        assert_eq!(
            symbol_product(Symbol::W(0), Symbol::Wdot(1)),
            Some(Symbol::WWdot(0, 1))
        );
        assert_eq!(symbol_product(Symbol::Wdot(0), Symbol::Wdot(1)), None);
        assert_eq!(symbol_product(Symbol::W(0), Symbol::W(0)), None);
    }

    #[test]
    fn wdot_product_of_one_is_wdot() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let values = vec![ModelSpaceVector::unit(Symbol::One); grid.len()];
        let f = ModelledDistribution::new(grid, 0.4, 0.8, 1, 1, values).unwrap();
        let p = multiply_by_wdot(&f).unwrap();
        assert_eq!(p.at(2, 0), &ModelSpaceVector::unit(Symbol::Wdot(0)));
        assert!((p.gamma() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn product_rejects_noise_inputs() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let values = vec![ModelSpaceVector::unit(Symbol::Wdot(0)); grid.len()];
        let f = ModelledDistribution::new(grid, 0.4, 0.8, 1, 1, values).unwrap();
        assert!(matches!(multiply_by_wdot(&f), Err(Error::NotControlled(_))));
        assert!(matches!(from_modelled(&f), Err(Error::NotControlled(_))));
    }

    #[test]
    fn compose_with_identity_is_identity() {
        let (_, cp) = setup();
        let y = to_modelled(&cp, 0.4);
        let id = VectorField::identity();
        assert_eq!(compose(&id, &y).unwrap(), y);
    }

    #[test]
    fn compose_sin_chain_rule() {
        let (_, cp) = setup();
        let y = to_modelled(&cp, 0.4);
        let f = VectorField::Componentwise {
            d: 1,
            n: 1,
            g: ScalarFn::Sin,
        };
        let out = compose(&f, &y).unwrap();
        for k in [0, 13, 64] {
            let (yv, ypv) = (cp.y.get(k, 0), cp.y_prime.get(k, 0));
            assert_eq!(out.at(k, 0).coeff(Symbol::One), libm::sin(yv));
            assert_eq!(out.at(k, 0).coeff(Symbol::W(0)), libm::cos(yv) * ypv);
        }
    }

    #[test]
    fn vector_field_shapes() {
        assert!(VectorField::rotation().validate().is_ok());
        let bad = VectorField::Linear {
            d: 2,
            n: 1,
            matrix: vec![1.0],
        };
        assert!(bad.validate().is_err());
    }
}
