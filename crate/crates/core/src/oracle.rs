//! Brute-force references. Quadratic or worse; keep inputs small.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::fft_core::Direction;
use crate::layout::{GlobalGrid, SlabShape};

fn root(num: usize, den: usize, sign: f64) -> Complex64 {
    // Reduce before converting so large products keep full precision.
    Complex64::from_polar(1.0, sign * 2.0 * PI * (num % den) as f64 / den as f64)
}

fn sign(direction: Direction) -> f64 {
    match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    }
}

/// Direct-summation DFT of any length, unnormalized in both directions.
pub fn dft1d_naive(x: &[Complex64], direction: Direction) -> Vec<Complex64> {
    let n = x.len();
    let s = sign(direction);
    (0..n)
        .map(|k| x.iter().enumerate().map(|(j, v)| v * root(j * k, n, s)).sum())
        .collect()
}

/// Global r2c transform of a row-major real field by direct triple
/// summation, truncated to `n2/2 + 1` bins on the last axis.
pub fn dft3d_r2c_naive(grid: &GlobalGrid, f: &[f64]) -> Vec<Complex64> {
    assert_eq!(f.len(), grid.real_len(), "field does not match grid");
    let (n0, n1, n2, n2c) = (grid.n0, grid.n1, grid.n2, grid.n2c());
    let mut out = Vec::with_capacity(grid.spectral_len());
    for a in 0..n0 {
        for b in 0..n1 {
            for c in 0..n2c {
                let mut acc = Complex64::default();
                for i in 0..n0 {
                    let wi = root(a * i, n0, -1.0);
                    for j in 0..n1 {
                        let wij = wi * root(b * j, n1, -1.0);
                        let row = &f[(i * n1 + j) * n2..(i * n1 + j + 1) * n2];
                        for (k, v) in row.iter().enumerate() {
                            acc += wij * root(c * k, n2, -1.0) * v;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Same result as [`dft3d_r2c_naive`], computed as a direct-summation DFT
/// along each axis in turn. `O(N·(n0 + n1 + n2))` instead of `O(N²)`, for
/// grids where the triple sum is too slow.
pub fn dft3d_r2c_separable(grid: &GlobalGrid, f: &[f64]) -> Vec<Complex64> {
    assert_eq!(f.len(), grid.real_len(), "field does not match grid");
    let (n0, n1, n2, n2c) = (grid.n0, grid.n1, grid.n2, grid.n2c());
    let mut stage = vec![Complex64::default(); n0 * n1 * n2c];
    for (row, out) in f.chunks_exact(n2).zip(stage.chunks_exact_mut(n2c)) {
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = row.iter().enumerate().map(|(k, v)| root(c * k, n2, -1.0) * v).sum();
        }
    }
    let mut line = Vec::new();
    for (n, stride, outer, inner) in [(n1, n2c, n0, n2c), (n0, n1 * n2c, 1, n1 * n2c)] {
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * stride + i;
                line.clear();
                line.extend((0..n).map(|t| stage[base + t * stride]));
                for (t, v) in dft1d_naive(&line, Direction::Forward).into_iter().enumerate() {
                    stage[base + t * stride] = v;
                }
            }
        }
    }
    stage
}

/// Expected post-exchange logical view of every rank, in `(j, r, k)` order,
/// for a global `n0 × n1 × n2c` array: rank `q` owns `global(r, q·n1/p + j, k)`.
pub fn global_exchange_reference(
    global: &[Complex64],
    n0: usize,
    n1: usize,
    n2c: usize,
    p: usize,
) -> Vec<Vec<Complex64>> {
    assert_eq!(global.len(), n0 * n1 * n2c, "array does not match extents");
    assert!(p > 0 && n1.is_multiple_of(p), "p must divide n1");
    let m1 = n1 / p;
    (0..p)
        .map(|q| {
            let mut view = Vec::with_capacity(m1 * n0 * n2c);
            for j in 0..m1 {
                for r in 0..n0 {
                    let start = (r * n1 + q * m1 + j) * n2c;
                    view.extend_from_slice(&global[start..start + n2c]);
                }
            }
            view
        })
        .collect()
}

/// [`global_exchange_reference`] with extents taken from a slab shape.
pub fn exchange_reference_for(shape: &SlabShape, global: &[Complex64]) -> Vec<Vec<Complex64>> {
    global_exchange_reference(global, shape.n0, shape.n1, shape.n2c, shape.p)
}

/// Expands an `n0 × n1 × n2c` half spectrum to the full `n0 × n1 × n2`
/// spectrum using Hermitian symmetry.
pub fn expand_hermitian(grid: &GlobalGrid, half: &[Complex64]) -> Vec<Complex64> {
    let (n0, n1, n2, n2c) = (grid.n0, grid.n1, grid.n2, grid.n2c());
    assert_eq!(half.len(), grid.spectral_len(), "half spectrum does not match grid");
    let mut full = vec![Complex64::default(); grid.real_len()];
    for a in 0..n0 {
        for b in 0..n1 {
            for c in 0..n2 {
                full[(a * n1 + b) * n2 + c] = if c < n2c {
                    half[(a * n1 + b) * n2c + c]
                } else {
                    let (ma, mb, mc) = ((n0 - a) % n0, (n1 - b) % n1, n2 - c);
                    half[(ma * n1 + mb) * n2c + mc].conj()
                };
            }
        }
    }
    full
}
