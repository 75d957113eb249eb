//! Conversions between complex n-vectors and their real 2n-dimensional form, plus rank helpers.
//!
//! Real coordinates are interleaved: `(Re z₁, Im z₁, Re z₂, Im z₂, …)`.

use nalgebra::{DMatrix, DVector};

use crate::C64;

pub fn to_real(v: &[C64]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|z| [z.re, z.im]))
}

pub fn from_real(v: &DVector<f64>) -> Vec<C64> {
    v.as_slice()
        .chunks_exact(2)
        .map(|c| C64::new(c[0], c[1]))
        .collect()
}

pub fn from_real_slice(v: &[f64]) -> Vec<C64> {
    v.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Hermitian inner product `⟨a, b⟩ = Σ conj(a_k) b_k`.
pub fn herm(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Real 2n×2n matrix of the complex n×n matrix `m`.
pub fn realify(m: &DMatrix<C64>) -> DMatrix<f64> {
    let n = m.nrows();
    let k = m.ncols();
    DMatrix::from_fn(2 * n, 2 * k, |r, c| {
        let z = m[(r / 2, c / 2)];
        match (r % 2, c % 2) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Complex-linear part `(A − J A J)/2` of a real-linear map on ℂⁿ, returned as an n×n complex matrix.
pub fn complex_linear_part(a: &DMatrix<f64>) -> DMatrix<C64> {
    let n = a.nrows() / 2;
    DMatrix::from_fn(n, n, |j, k| {
        let (p, q, r, s) = (
            a[(2 * j, 2 * k)],
            a[(2 * j, 2 * k + 1)],
            a[(2 * j + 1, 2 * k)],
            a[(2 * j + 1, 2 * k + 1)],
        );
        C64::new(0.5 * (p + s), 0.5 * (r - q))
    })
}

/// Numerical rank with tolerance relative to the largest singular value.
pub fn rank(m: &DMatrix<f64>, tol_rel: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol_rel * smax).count()
}

/// Concatenates column blocks horizontally.
pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        out.view_mut((0, c0), (b.nrows(), b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    out
}
