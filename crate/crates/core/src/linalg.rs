//! Small dense linear-algebra helpers shared by the filters and estimators.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Relative eigenvalue tolerance for the PSD tests: `λ_min ≥ −PSD_RTOL · λ_max`.
pub const PSD_RTOL: f64 = 1e-10;

/// Average a square matrix with its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Number of unique entries of an `n × n` symmetric matrix.
pub fn vech_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(row, col)` (with `row ≥ col`) inside `vech` of an `n × n` matrix.
///
/// The lower triangle is stacked column by column.
pub fn vech_index(n: usize, row: usize, col: usize) -> usize {
    let (r, c) = if row >= col { (row, col) } else { (col, row) };
    // columns 0..c contribute n, n-1, ..., n-c+1 entries
    c * n - c * c.saturating_sub(1) / 2 + (r - c)
}

/// Half-vectorization: column-wise stack of the lower triangle.
pub fn vech(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(vech_len(n));
    for c in 0..n {
        for r in c..n {
            out.push(m[(r, c)]);
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`vech`], producing a symmetric matrix.
pub fn unvech(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), vech_len(n), "vech length does not match dimension");
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for c in 0..n {
        for r in c..n {
            m[(r, c)] = v[k];
            m[(c, r)] = v[k];
            k += 1;
        }
    }
    m
}

/// `(row, col)` pairs in `vech` order.
pub fn vech_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(vech_len(n));
    for c in 0..n {
        for r in c..n {
            pairs.push((r, c));
        }
    }
    pairs
}

/// Extremal eigenvalues `(min, max)` of a symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Outcome of a PSD test: `Err((min_eig, max_eig))` when the test fails.
pub fn check_psd(m: &DMatrix<f64>) -> Result<(), (f64, f64)> {
    let n = m.nrows();
    if n == 0 || m.iter().all(|v| *v == 0.0) {
        return Ok(());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err((f64::NAN, f64::NAN));
    }
    // Cholesky of m + τ·d_max·I succeeding implies λ_min > −τ·d_max ≥ −τ·λ_max.
    let d_max = (0..n).map(|i| m[(i, i)]).fold(0.0_f64, f64::max);
    if d_max > 0.0 {
        let mut shifted = symmetrize(m);
        for i in 0..n {
            shifted[(i, i)] += PSD_RTOL * d_max;
        }
        if Cholesky::new(shifted).is_some() {
            return Ok(());
        }
    }
    let (min, max) = eigen_extremes(m);
    if min >= -PSD_RTOL * max.abs().max(0.0) {
        Ok(())
    } else {
        Err((min, max))
    }
}

/// Symmetric PSD square root via eigendecomposition; roundoff-negative eigenvalues clip to zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let scaled = v * DMatrix::from_diagonal(&roots);
    symmetrize(&(scaled * v.transpose()))
}

/// Lower-triangular factor `L` with `L Lᵀ = m`, falling back to an eigen-based factor
/// when `m` is only semi-definite.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    match Cholesky::new(symmetrize(m)) {
        Some(ch) => ch.l(),
        None => {
            let eig = SymmetricEigen::new(symmetrize(m));
            let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            eig.eigenvectors * DMatrix::from_diagonal(&roots)
        }
    }
}
