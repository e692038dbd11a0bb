//! Symbols of the rough-path and polynomial regularity structures, the
//! structure group acting by translation, and the models `(Pi, Gamma)` that
//! realize symbols as distributions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::grid_paths::{PairScan, Profile, SampledPath, TestFn, TestFunction, TimeGrid};
use crate::rough_core::{RoughPath, SecondOrderProcess};
use crate::wavelets::intervals_meeting;

/// Exponents of a polynomial monomial in up to four variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(pub [u8; 4]);

impl MultiIndex {
    pub fn single(k: u8) -> Self {
        MultiIndex([k, 0, 0, 0])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&k| k as u32).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }
}

/// Basis symbols. Indices refer to components of the driving path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    One,
    W(usize),
    Wdot(usize),
    WWdot(usize, usize),
    X(MultiIndex),
}

impl Symbol {
    /// Monomial `X^k`, normalized so that `X^0` is [`Symbol::One`].
    pub fn x(k: MultiIndex) -> Self {
        if k.is_zero() {
            Symbol::One
        } else {
            Symbol::X(k)
        }
    }

    /// Homogeneity for path regularity `alpha`.
    pub fn homogeneity(&self, alpha: f64) -> f64 {
        match self {
            Symbol::One => 0.0,
            Symbol::W(_) => alpha,
            Symbol::Wdot(_) => alpha - 1.0,
            Symbol::WWdot(..) => 2.0 * alpha - 1.0,
            Symbol::X(k) => k.degree() as f64,
        }
    }

    fn max_index(&self) -> Option<usize> {
        match self {
            Symbol::One | Symbol::Wdot(_) => None,
            Symbol::W(i) => Some(*i),
            Symbol::WWdot(i, _) => Some(*i),
            Symbol::X(k) => k.0.iter().rposition(|&e| e > 0),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::One => write!(f, "1"),
            Symbol::W(i) => write!(f, "W{i}"),
            Symbol::Wdot(i) => write!(f, "Wdot{i}"),
            Symbol::WWdot(i, j) => write!(f, "WWdot{i}{j}"),
            Symbol::X(k) => write!(f, "X{:?}", k.0),
        }
    }
}

/// Finite linear combination of symbols.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelSpaceVector {
    terms: BTreeMap<Symbol, f64>,
}

/// Two homogeneities closer than this are the same level.
const LEVEL_EPS: f64 = 1e-12;

impl ModelSpaceVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = (Symbol, f64)>>(terms: I) -> Self {
        let mut v = Self::new();
        for (s, c) in terms {
            v.add_term(s, c);
        }
        v
    }

    pub fn unit(s: Symbol) -> Self {
        Self::from_terms([(s, 1.0)])
    }

    pub fn add_term(&mut self, s: Symbol, c: f64) {
        *self.terms.entry(s).or_insert(0.0) += c;
    }

    pub fn coeff(&self, s: Symbol) -> f64 {
        self.terms.get(&s).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Symbol, f64)> + '_ {
        self.terms.iter().map(|(s, c)| (*s, *c))
    }

    pub fn is_empty(&self) -> bool {
        self.terms.values().all(|c| *c == 0.0)
    }

    /// `self + c * other`.
    pub fn axpy(&mut self, c: f64, other: &ModelSpaceVector) {
        for (s, v) in other.iter() {
            self.add_term(s, c * v);
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(s, v)| (*s, c * v)).collect(),
        }
    }

    /// `l1` norm of the coefficients at homogeneity `beta`.
    pub fn norm_at(&self, beta: f64, alpha: f64) -> f64 {
        self.iter()
            .filter(|(s, _)| libm::fabs(s.homogeneity(alpha) - beta) < LEVEL_EPS)
            .map(|(_, c)| libm::fabs(c))
            .sum()
    }

    /// Homogeneities of the symbols present, ascending and deduplicated.
    pub fn levels(&self, alpha: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self.terms.keys().map(|s| s.homogeneity(alpha)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| libm::fabs(*a - *b) < LEVEL_EPS);
        v
    }
}

/// Translation `Gamma_h` of the structure group.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureGroupElement {
    pub h: Vec<f64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl StructureGroupElement {
    pub fn new(h: Vec<f64>) -> Self {
        Self { h }
    }

    pub fn identity(dim: usize) -> Self {
        Self { h: vec![0.0; dim] }
    }

    /// `Gamma_h Gamma_h' = Gamma_{h + h'}`.
    pub fn compose(&self, other: &StructureGroupElement) -> Result<Self> {
        if self.h.len() != other.h.len() {
            return Err(Error::DimensionMismatch {
                expected: self.h.len(),
                found: other.h.len(),
            });
        }
        Ok(Self {
            h: self.h.iter().zip(&other.h).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        Self {
            h: self.h.iter().map(|a| -a).collect(),
        }
    }

    fn apply_symbol(&self, s: Symbol, c: f64, out: &mut ModelSpaceVector) -> Result<()> {
        if let Some(i) = s.max_index() {
            if i >= self.h.len() {
                return Err(Error::GroupDimension {
                    group: self.h.len(),
                    index: i,
                });
            }
        }
        match s {
            Symbol::One | Symbol::Wdot(_) => out.add_term(s, c),
            Symbol::W(i) => {
                out.add_term(s, c);
                out.add_term(Symbol::One, c * self.h[i]);
            }
            Symbol::WWdot(i, j) => {
                out.add_term(s, c);
                out.add_term(Symbol::Wdot(j), c * self.h[i]);
            }
            Symbol::X(k) => {
                // prod_i (X_i + h_i)^{k_i}, expanded term by term
                let mut terms: Vec<(MultiIndex, f64)> = vec![(MultiIndex::default(), c)];
                for (var, &e) in k.0.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let mut next = Vec::new();
                    for (m, coef) in &terms {
                        for p in 0..=e {
                            let mut mm = *m;
                            mm.0[var] = p;
                            let w = binomial(e as u32, p as u32)
                                * libm::pow(self.h[var], (e - p) as f64);
                            next.push((mm, coef * w));
                        }
                    }
                    terms = next;
                }
                for (m, coef) in terms {
                    out.add_term(Symbol::x(m), coef);
                }
            }
        }
        Ok(())
    }
}

/// Applies `Gamma_h` to a model-space vector.
pub fn gamma_apply(g: &StructureGroupElement, v: &ModelSpaceVector) -> Result<ModelSpaceVector> {
    let mut out = ModelSpaceVector::new();
    for (s, c) in v.iter() {
        g.apply_symbol(s, c, &mut out)?;
    }
    Ok(out)
}

/// A model: the canonical rough-path model (optionally without second-order
/// symbols) or the polynomial model in time.
#[derive(Debug, Clone, Copy)]
pub enum Model<'a> {
    /// `Pi_s 1 = 1`, `Pi_s W^i = W^i_{s,.}`, `Pi_s Wdot^i = dW^i`,
    /// `Pi_s WWdot^{ij} = d_u X^{ij}_{s,u}`; `Gamma_{s,t} = Gamma_{W_{t,s}}`.
    Rough {
        path: &'a SampledPath,
        second: Option<&'a SecondOrderProcess>,
        alpha: f64,
    },
    /// `Pi_s X^k = (. - s)^k`; `Gamma_{s,t} = Gamma_{s - t}`.
    Polynomial { grid: TimeGrid },
}

impl<'a> Model<'a> {
    pub fn rough(rp: &'a RoughPath) -> Self {
        Model::Rough {
            path: rp.path(),
            second: Some(rp.second()),
            alpha: rp.alpha(),
        }
    }

    /// Model on `{1, W, Wdot}` only, with no second-order process.
    pub fn first_order(path: &'a SampledPath, alpha: f64) -> Self {
        Model::Rough {
            path,
            second: None,
            alpha,
        }
    }

    pub fn polynomial(grid: TimeGrid) -> Self {
        Model::Polynomial { grid }
    }

    pub fn grid(&self) -> &TimeGrid {
        match self {
            Model::Rough { path, .. } => path.grid(),
            Model::Polynomial { grid } => grid,
        }
    }

    /// Regularity used to grade symbols (1 for the polynomial model, where
    /// only monomials occur).
    pub fn alpha(&self) -> f64 {
        match self {
            Model::Rough { alpha, .. } => *alpha,
            Model::Polynomial { .. } => 1.0,
        }
    }

    pub fn driver_dim(&self) -> usize {
        match self {
            Model::Rough { path, .. } => path.dim(),
            Model::Polynomial { .. } => 1,
        }
    }

    /// Lowest homogeneity of the structure.
    pub fn lowest_homogeneity(&self) -> f64 {
        match self {
            Model::Rough { alpha, .. } => alpha - 1.0,
            Model::Polynomial { .. } => 0.0,
        }
    }

    pub fn homogeneity(&self, s: Symbol) -> f64 {
        s.homogeneity(self.alpha())
    }

    /// Basis symbols of homogeneity below `gamma`.
    pub fn symbols_below(&self, gamma: f64) -> Vec<Symbol> {
        let mut out = Vec::new();
        match self {
            Model::Rough {
                path,
                second,
                alpha,
            } => {
                let n = path.dim();
                out.push(Symbol::One);
                for i in 0..n {
                    out.push(Symbol::W(i));
                    out.push(Symbol::Wdot(i));
                }
                if second.is_some() {
                    for i in 0..n {
                        for j in 0..n {
                            out.push(Symbol::WWdot(i, j));
                        }
                    }
                }
                out.retain(|s| s.homogeneity(*alpha) < gamma);
            }
            Model::Polynomial { .. } => {
                let mut k = 0u8;
                while (k as f64) < gamma && k < u8::MAX {
                    out.push(Symbol::x(MultiIndex::single(k)));
                    k += 1;
                }
            }
        }
        out
    }

    fn check_symbol(&self, s: Symbol) -> Result<()> {
        let ok = match (self, s) {
            (Model::Rough { path, .. }, Symbol::W(i) | Symbol::Wdot(i)) => i < path.dim(),
            (Model::Rough { path, second, .. }, Symbol::WWdot(i, j)) => {
                if second.is_none() {
                    return Err(Error::MissingSecondOrder);
                }
                i < path.dim() && j < path.dim()
            }
            (Model::Rough { .. }, Symbol::One) => true,
            (Model::Polynomial { .. }, Symbol::One) => true,
            (Model::Polynomial { .. }, Symbol::X(k)) => k.0[1..].iter().all(|&e| e == 0),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedSymbol(format!("{s}")))
        }
    }

    /// `Gamma_{s,t}`, mapping expansions based at `t` to expansions based at
    /// `s`.
    pub fn gamma(&self, s: f64, t: f64) -> StructureGroupElement {
        match self {
            Model::Rough { path, .. } => {
                let n = path.dim();
                let h = (0..n)
                    .map(|i| path.component_at(i, s) - path.component_at(i, t))
                    .collect();
                StructureGroupElement::new(h)
            }
            Model::Polynomial { .. } => StructureGroupElement::new(vec![s - t]),
        }
    }

    /// `Gamma_{s,t}` between node indices.
    pub fn gamma_nodes(&self, s: usize, t: usize) -> StructureGroupElement {
        match self {
            Model::Rough { path, .. } => {
                let (a, b) = (path.value(s), path.value(t));
                StructureGroupElement::new(a.iter().zip(b).map(|(a, b)| a - b).collect())
            }
            Model::Polynomial { grid } => {
                StructureGroupElement::new(vec![grid.node(s) - grid.node(t)])
            }
        }
    }
}

/// `(Pi_s v)(f)`.
///
/// Function-valued symbols (`1`, `W`, `X`) are integrated by the midpoint rule
/// on the cells of `f` over the whole line, with the path held constant
/// outside `[0, T]`. Measure-valued symbols are midpoint Riemann-Stieltjes
/// sums over grid intervals, so they vanish outside `[0, T]`.
pub fn pi_pair(model: &Model<'_>, s: f64, v: &ModelSpaceVector, f: &dyn TestFn) -> Result<f64> {
    let mut functions: Vec<(Symbol, f64)> = Vec::new();
    let mut measures: Vec<(Symbol, f64)> = Vec::new();
    for (sym, c) in v.iter() {
        model.check_symbol(sym)?;
        if c == 0.0 {
            continue;
        }
        match sym {
            Symbol::Wdot(_) | Symbol::WWdot(..) => measures.push((sym, c)),
            _ => functions.push((sym, c)),
        }
    }
    let (a, b) = f.support();
    let mut total = 0.0;
    if !functions.is_empty() {
        let cells = f.cells().max(1);
        let dx = (b - a) / cells as f64;
        let base: Vec<f64> = match model {
            Model::Rough { path, .. } => (0..path.dim()).map(|i| path.component_at(i, s)).collect(),
            Model::Polynomial { .. } => Vec::new(),
        };
        let mut acc = 0.0;
        for c in 0..cells {
            let x = a + (c as f64 + 0.5) * dx;
            let fx = f.eval(x);
            if fx == 0.0 {
                continue;
            }
            let mut g = 0.0;
            for (sym, coef) in &functions {
                g += coef
                    * match (model, sym) {
                        (_, Symbol::One) => 1.0,
                        (Model::Rough { path, .. }, Symbol::W(i)) => {
                            path.component_at(*i, x) - base[*i]
                        }
                        (_, Symbol::X(k)) => libm::pow(x - s, k.0[0] as f64),
                        _ => 0.0,
                    };
            }
            acc += fx * g;
        }
        total += acc * dx;
    }
    if !measures.is_empty() {
        if let Model::Rough { path, second, .. } = model {
            let grid = path.grid();
            let h = grid.step();
            let n = path.dim();
            let base: Vec<f64> = (0..n).map(|i| path.component_at(i, s)).collect();
            let mut acc = 0.0;
            for m in intervals_meeting(grid, a, b) {
                let fx = f.eval((m as f64 + 0.5) * h);
                if fx == 0.0 {
                    continue;
                }
                let (w0, w1) = (path.value(m), path.value(m + 1));
                let mut g = 0.0;
                for (sym, coef) in &measures {
                    g += coef
                        * match sym {
                            Symbol::Wdot(j) => w1[*j] - w0[*j],
                            Symbol::WWdot(i, j) => {
                                let x = second.expect("checked above").interval(m);
                                x[i * n + j] + (w0[*i] - base[*i]) * (w1[*j] - w0[*j])
                            }
                            _ => 0.0,
                        };
                }
                acc += fx * g;
            }
            total += acc;
        }
    }
    Ok(total)
}

/// Probe family for empirical model and reconstruction bounds.
#[derive(Debug, Clone)]
pub struct ProbeBattery {
    pub scales: Vec<f64>,
    pub base_points: Vec<f64>,
    pub profiles: Vec<Profile>,
}

impl ProbeBattery {
    /// Scales `2^-1..2^-6`, base points on the level-4 subgrid (or the whole
    /// grid if coarser), even and odd bumps.
    pub fn standard(grid: &TimeGrid) -> Self {
        let level = grid.level().min(4);
        let n = 1usize << level;
        Self {
            scales: (1..=6).map(|k| libm::ldexp(1.0, -k)).collect(),
            base_points: (0..=n)
                .map(|k| grid.horizon() * k as f64 / n as f64)
                .collect(),
            profiles: vec![Profile::Bump, Profile::OddBump],
        }
    }

    pub fn probes(&self) -> impl Iterator<Item = TestFunction> + '_ {
        self.scales.iter().flat_map(move |&lambda| {
            self.base_points.iter().flat_map(move |&s| {
                self.profiles.iter().map(move |&p| TestFunction {
                    profile: p,
                    center: s,
                    scale: lambda,
                })
            })
        })
    }
}

/// Empirical `||Pi||` and `||Gamma||` on a probe battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelBounds {
    /// `max |Pi_s tau (eta_s^lambda)| / lambda^{|tau|}`.
    pub pi: f64,
    /// `max |Gamma_{s,t} tau|_beta / |t - s|^{|tau| - beta}`.
    pub gamma: f64,
}

/// Largest Gamma quotient for one symbol over node pairs.
pub fn gamma_quotient(model: &Model<'_>, tau: Symbol, scan: PairScan) -> Result<f64> {
    model.check_symbol(tau)?;
    let alpha = model.alpha();
    let grid = *model.grid();
    let top = tau.homogeneity(alpha);
    let unit = ModelSpaceVector::unit(tau);
    let mut best = 0.0f64;
    let mut err = None;
    scan.for_each(grid.intervals(), |s, t| {
        match gamma_apply(&model.gamma_nodes(s, t), &unit) {
            Ok(v) => {
                let dt = grid.node(t) - grid.node(s);
                for beta in v.levels(alpha) {
                    if beta < top - LEVEL_EPS {
                        best = best.max(v.norm_at(beta, alpha) / libm::pow(dt, top - beta));
                    }
                }
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

pub fn model_bound_estimate(
    model: &Model<'_>,
    gamma: f64,
    battery: &ProbeBattery,
) -> Result<ModelBounds> {
    let alpha = model.alpha();
    let symbols = model.symbols_below(gamma);
    let mut pi = 0.0f64;
    for tf in battery.probes() {
        for &tau in &symbols {
            let v = pi_pair(model, tf.center, &ModelSpaceVector::unit(tau), &tf)?;
            pi = pi.max(libm::fabs(v) / libm::pow(tf.scale, tau.homogeneity(alpha)));
        }
    }
    let mut g = 0.0f64;
    let pts = &battery.base_points;
    for (a, &s) in pts.iter().enumerate() {
        for &t in &pts[a + 1..] {
            let el = model.gamma(s, t);
            let dt = libm::fabs(t - s);
            for &tau in &symbols {
                let top = tau.homogeneity(alpha);
                let v = gamma_apply(&el, &ModelSpaceVector::unit(tau))?;
                for beta in v.levels(alpha) {
                    if beta < top - LEVEL_EPS {
                        g = g.max(v.norm_at(beta, alpha) / libm::pow(dt, top - beta));
                    }
                }
            }
        }
    }
    Ok(ModelBounds { pi, gamma: g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{generate_path, holder_seminorm, PathKind};
    use crate::rough_core::{lift_piecewise_smooth, LiftMode};

    #[test]
    fn translation_rules() {
        let g = StructureGroupElement::new(vec![0.5, -2.0]);
        let v = gamma_apply(&g, &ModelSpaceVector::unit(Symbol::W(1))).unwrap();
        assert_eq!(v.coeff(Symbol::W(1)), 1.0);
        assert_eq!(v.coeff(Symbol::One), -2.0);
        let v = gamma_apply(&g, &ModelSpaceVector::unit(Symbol::WWdot(0, 1))).unwrap();
        assert_eq!(v.coeff(Symbol::Wdot(1)), 0.5);
        let v = gamma_apply(&g, &ModelSpaceVector::unit(Symbol::Wdot(0))).unwrap();
        assert_eq!(v, ModelSpaceVector::unit(Symbol::Wdot(0)));
        assert!(gamma_apply(&g, &ModelSpaceVector::unit(Symbol::W(2))).is_err());
    }

    #[test]
    fn polynomial_translation() {
        let g = StructureGroupElement::new(vec![2.0]);
        let v = gamma_apply(
            &g,
            &ModelSpaceVector::unit(Symbol::x(MultiIndex::single(3))),
        )
        .unwrap();
        // (X + 2)^3 = X^3 + 6X^2 + 12X + 8
        assert_eq!(v.coeff(Symbol::x(MultiIndex::single(3))), 1.0);
        assert_eq!(v.coeff(Symbol::x(MultiIndex::single(2))), 6.0);
        assert_eq!(v.coeff(Symbol::x(MultiIndex::single(1))), 12.0);
        assert_eq!(v.coeff(Symbol::One), 8.0);
    }

    #[test]
    fn one_pairs_to_mass() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let w = generate_path(&PathKind::SinCos, grid, 2).unwrap();
        let m = Model::first_order(&w, 0.4);
        let tf = TestFunction::new(Profile::UnitBump, 0.5, 0.25).unwrap();
        let v = pi_pair(&m, 0.5, &ModelSpaceVector::unit(Symbol::One), &tf).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wwdot_needs_second_order() {
        let grid = TimeGrid::new(1.0, 6).unwrap();
        let w = generate_path(&PathKind::SinCos, grid, 2).unwrap();
        let m = Model::first_order(&w, 0.4);
        let tf = TestFunction::new(Profile::Bump, 0.5, 0.25).unwrap();
        let r = pi_pair(&m, 0.5, &ModelSpaceVector::unit(Symbol::WWdot(0, 1)), &tf);
        assert_eq!(r, Err(Error::MissingSecondOrder));
    }

    #[test]
    fn pi_is_consistent_with_gamma() {
        // Pi_s Gamma_{s,t} tau = Pi_t tau
        let grid = TimeGrid::new(1.0, 9).unwrap();
        let w = generate_path(
            &PathKind::Fbm {
                hurst: 0.45,
                seed: 2,
            },
            grid,
            2,
        )
        .unwrap();
        let rp = lift_piecewise_smooth(&w, &LiftMode::Linear, 0.45).unwrap();
        let m = Model::rough(&rp);
        let tf = TestFunction::new(Profile::Bump, 0.4, 0.2).unwrap();
        let (s, t) = (grid.node(100), grid.node(300));
        for tau in m.symbols_below(1.0) {
            let lhs = pi_pair(&m, t, &ModelSpaceVector::unit(tau), &tf).unwrap();
            let moved = gamma_apply(&m.gamma(s, t), &ModelSpaceVector::unit(tau)).unwrap();
            let rhs = pi_pair(&m, s, &moved, &tf).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{tau}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn gamma_quotient_is_holder_norm() {
        let grid = TimeGrid::new(1.0, 7).unwrap();
        let w = generate_path(
            &PathKind::Fbm {
                hurst: 0.4,
                seed: 11,
            },
            grid,
            1,
        )
        .unwrap();
        let m = Model::first_order(&w, 0.4);
        let q = gamma_quotient(&m, Symbol::W(0), PairScan::Exhaustive).unwrap();
        let h = holder_seminorm(&w, 0.4).unwrap();
        assert!((q - h).abs() <= 1e-12 * h);
    }

    #[test]
    fn polynomial_model_bounds_are_finite() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let m = Model::polynomial(grid);
        let b = model_bound_estimate(&m, 3.0, &ProbeBattery::standard(&grid)).unwrap();
        assert!(b.pi.is_finite() && b.gamma.is_finite());
        assert!(b.pi > 0.0);
    }
}
