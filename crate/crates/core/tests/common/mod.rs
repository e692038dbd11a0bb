#![allow(dead_code)]

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughstruct_core::grid_paths::{generate_path, PathKind, SampledPath, TimeGrid};
use roughstruct_core::modelled_distributions::ControlledPath;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

/// `(sin t, cos t)` on `[0, T]`.
pub fn sin_cos(horizon: f64, level: u32) -> SampledPath {
    generate_path(&PathKind::SinCos, TimeGrid::new(horizon, level).unwrap(), 2).unwrap()
}

/// `y = W^1 W^2`, `y' = (W^2, W^1)`.
pub fn product_integrand(w: &SampledPath) -> ControlledPath {
    let grid = *w.grid();
    let mut y = SampledPath::zeros(grid, 1);
    let mut yp = SampledPath::zeros(grid, 2);
    for k in 0..grid.len() {
        let (a, b) = (w.get(k, 0), w.get(k, 1));
        y.value_mut(k)[0] = a * b;
        yp.value_mut(k).copy_from_slice(&[b, a]);
    }
    ControlledPath::new(y, yp, 2).unwrap()
}

/// `y = g(W)` for `g(x) = sum_i a_i sin(b_i x_i + c_i)` per output
/// component, with `y'` its gradient along `W`.
pub fn random_controlled(w: &SampledPath, d: usize, seed: u64) -> ControlledPath {
    let n = w.dim();
    let mut r = rng(seed);
    let coef: Vec<(f64, f64, f64)> = (0..d * n)
        .map(|_| {
            (
                uniform(&mut r, -1.0, 1.0),
                uniform(&mut r, 0.5, 3.0),
                uniform(&mut r, 0.0, 6.3),
            )
        })
        .collect();
    let grid = *w.grid();
    let mut y = SampledPath::zeros(grid, d);
    let mut yp = SampledPath::zeros(grid, d * n);
    for k in 0..grid.len() {
        for a in 0..d {
            let mut v = 0.0;
            for i in 0..n {
                let (p, q, s) = coef[a * n + i];
                let x = w.get(k, i);
                v += p * (q * x + s).sin();
                yp.value_mut(k)[a * n + i] = p * q * (q * x + s).cos();
            }
            y.value_mut(k)[a] = v;
        }
    }
    ControlledPath::new(y, yp, n).unwrap()
}
