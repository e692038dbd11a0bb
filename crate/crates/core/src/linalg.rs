//! Small dense kernels: packed Cholesky and Gaussian elimination.

use alloc::vec;
use alloc::vec::Vec;

/// Lower Cholesky factor stored row by row (row `i` holds `i + 1` entries).
#[derive(Debug, Clone)]
pub(crate) struct PackedCholesky {
    n: usize,
    data: Vec<f64>,
}

fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl PackedCholesky {
    /// Factors the symmetric matrix whose lower entries are `a(i, j)`, `j <= i`.
    /// Returns the failing row when a pivot is not positive.
    pub(crate) fn factor<F: Fn(usize, usize) -> f64>(n: usize, a: F) -> Result<Self, usize> {
        let mut data = vec![0.0; row_start(n)];
        for i in 0..n {
            let ri = row_start(i);
            for j in 0..=i {
                let rj = row_start(j);
                let (head, tail) = data.split_at(ri);
                let dot = if j == i {
                    dot(&tail[..j], &tail[..j])
                } else {
                    dot(&head[rj..rj + j], &tail[..j])
                };
                let v = a(i, j) - dot;
                if i == j {
                    if !(v > 0.0) {
                        return Err(i);
                    }
                    data[ri + i] = libm::sqrt(v);
                } else {
                    data[ri + j] = v / data[rj + j];
                }
            }
        }
        Ok(Self { n, data })
    }

    /// `out = L z`.
    pub(crate) fn lower_mul(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let r = row_start(i);
            out[i] = dot(&self.data[r..r + i + 1], &z[..i + 1]);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop vectorizes
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Solves `m x = rhs` (row-major `n x n`) by partial pivoting.
pub(crate) fn solve(n: usize, mut m: Vec<f64>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    for c in 0..n {
        let p = (c..n)
            .max_by(|&a, &b| libm::fabs(m[a * n + c]).total_cmp(&libm::fabs(m[b * n + c])))?;
        if libm::fabs(m[p * n + c]) < 1e-300 {
            return None;
        }
        if p != c {
            for k in 0..n {
                m.swap(p * n + k, c * n + k);
            }
            rhs.swap(p, c);
        }
        for r in c + 1..n {
            let f = m[r * n + c] / m[c * n + c];
            if f != 0.0 {
                for k in c..n {
                    m[r * n + k] -= f * m[c * n + k];
                }
                rhs[r] -= f * rhs[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r * n + k] * x[k]).sum();
        x[r] = (rhs[r] - s) / m[r * n + r];
    }
    Some(x)
}
