//! The normalized product `W`, its Hermitian embedding and the eigen routines.
//!
//! Real inputs take an `f64` path throughout (gemm and symmetric QR through
//! nalgebra); complex products are assembled from four real products so the
//! large multiplications always hit the blocked kernel.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::ensemble::EntryMatrixSet;
use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue or singular value counts as zero.
pub const ZERO_THRESHOLD: f64 = 1e-8;

/// `W = (X(1)/√p_1)···(X(m)/√p_m)`, shape `n × p_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductMatrix {
    values: DMatrix<Complex64>,
}

impl ProductMatrix {
    pub fn from_matrix(values: DMatrix<Complex64>) -> Self {
        Self { values }
    }

    pub fn from_real(values: DMatrix<f64>) -> Self {
        Self { values: values.map(|x| Complex64::new(x, 0.0)) }
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.values.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// `V̂ = [[0, W], [W*, 0]]`, Hermitian of order `n + p_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitizedMatrix {
    values: DMatrix<Complex64>,
}

impl HermitizedMatrix {
    /// Wraps a matrix after checking that it is exactly Hermitian.
    pub fn from_matrix(values: DMatrix<Complex64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::invalid("Hermitian matrix must be square"));
        }
        if values != values.adjoint() {
            return Err(Error::invalid("matrix is not Hermitian"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn order(&self) -> usize {
        self.values.nrows()
    }
}

/// A singular triple `W v = s u` with unit `u`, `v`.
#[derive(Clone, Debug)]
pub struct SingularTriplet {
    pub value: f64,
    pub left: DVector<Complex64>,
    pub right: DVector<Complex64>,
}

fn is_real(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|x| x.im == 0.0)
}

fn check_finite(m: &DMatrix<Complex64>) -> Result<()> {
    if m.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

fn real_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|x| x.re)
}

fn imag_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|x| x.im)
}

fn assemble(re: &DMatrix<f64>, im: &DMatrix<f64>) -> DMatrix<Complex64> {
    re.zip_map(im, Complex64::new)
}

/// Complex product from four real products.
fn complex_matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ai) = (real_part(a), imag_part(a));
    let (br, bi) = (real_part(b), imag_part(b));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    assemble(&re, &im)
}

/// Multiplies the normalized chain left to right.
pub fn build_product(set: &EntryMatrixSet) -> Result<ProductMatrix> {
    let profile = set.profile();
    let raw = set.raw();
    for pair in raw.windows(2) {
        if pair[0].ncols() != pair[1].nrows() {
            return Err(Error::invalid(format!(
                "chain shapes {:?} and {:?} are not compatible",
                pair[0].shape(),
                pair[1].shape()
            )));
        }
    }
    let scale = |nu: usize| 1.0 / (profile.p(nu) as f64).sqrt();
    if set.is_real() {
        let mut acc = real_part(&raw[0]) * scale(1);
        for (i, mat) in raw.iter().enumerate().skip(1) {
            acc = (acc * real_part(mat)) * scale(i + 1);
        }
        Ok(ProductMatrix::from_real(acc))
    } else {
        let mut acc = raw[0].map(|x| x * scale(1));
        for (i, mat) in raw.iter().enumerate().skip(1) {
            acc = complex_matmul(&acc, mat).map(|x| x * scale(i + 1));
        }
        Ok(ProductMatrix::from_matrix(acc))
    }
}

fn hermitian_eigenvalues_unsorted(h: &DMatrix<Complex64>) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    if is_real(h) {
        real_part(h).symmetric_eigenvalues().iter().copied().collect()
    } else {
        h.symmetric_eigenvalues().iter().copied().collect()
    }
}

/// The `n` singular values of `W`, descending.
///
/// Computed by bidiagonalization and implicit-shift QR, so small singular
/// values keep absolute accuracy `O(ε ‖W‖)` (the Gram route only gives
/// `O(√ε ‖W‖)` there). When `W` has more rows than columns the list is
/// padded with zeros so it always has one entry per row.
pub fn singular_values(w: &ProductMatrix) -> Result<Vec<f64>> {
    check_finite(w.values())?;
    let n = w.n();
    if w.values().is_empty() {
        return Ok(vec![0.0; n]);
    }
    let mut vals: Vec<f64> = if is_real(w.values()) {
        real_part(w.values()).singular_values().iter().copied().collect()
    } else {
        w.values().clone().singular_values().iter().copied().collect()
    };
    vals.resize(n, 0.0);
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Singular triples from the Gram eigen-decomposition, descending.
///
/// `right = W* u / s`; for `s = 0` the right vector is left at zero.
pub fn singular_triplets(w: &ProductMatrix) -> Result<Vec<SingularTriplet>> {
    check_finite(w.values())?;
    let values = w.values();
    let mut gram = values * values.adjoint();
    // symmetrize away round-off so the eigen routine sees an exact Hermitian input
    gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(gram);
    let mut triplets: Vec<SingularTriplet> = (0..values.nrows())
        .map(|i| {
            let s = eig.eigenvalues[i].max(0.0).sqrt();
            let left = eig.eigenvectors.column(i).into_owned();
            let right = if s > 0.0 {
                values.adjoint() * &left / Complex64::new(s, 0.0)
            } else {
                DVector::zeros(values.ncols())
            };
            SingularTriplet { value: s, left, right }
        })
        .collect();
    triplets.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(triplets)
}

/// Assembles `V̂` directly in block form; `J` is never materialized.
pub fn hermitize(w: &ProductMatrix) -> HermitizedMatrix {
    let (n, p) = (w.n(), w.cols());
    let mut h = DMatrix::<Complex64>::zeros(n + p, n + p);
    h.view_mut((0, n), (n, p)).copy_from(w.values());
    h.view_mut((n, 0), (p, n)).copy_from(&w.values().adjoint());
    HermitizedMatrix { values: h }
}

/// Full real spectrum of a Hermitian matrix, ascending.
pub fn eigenvalues_hermitian(h: &HermitizedMatrix) -> Result<Vec<f64>> {
    check_finite(h.values())?;
    let mut vals = hermitian_eigenvalues_unsorted(h.values());
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Eigenpairs of a Hermitian matrix, ascending by eigenvalue.
pub fn eigen_hermitian(h: &HermitizedMatrix) -> Result<Vec<(f64, DVector<Complex64>)>> {
    check_finite(h.values())?;
    let eig = SymmetricEigen::new(h.values().clone());
    let mut pairs: Vec<(f64, DVector<Complex64>)> = (0..h.order())
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

/// Spectrum of `V̂` reconstructed from the singular values of `W`:
/// `{±s_i} ∪ {0 with multiplicity p_m − n}`, ascending.
pub fn hermitized_spectrum(svals: &[f64], p_m: usize) -> Result<Vec<f64>> {
    let n = svals.len();
    if p_m < n {
        return Err(Error::invalid(format!("p_m = {p_m} is smaller than n = {n}")));
    }
    if svals.iter().any(|&s| !(s >= 0.0)) {
        return Err(Error::invalid("singular values must be nonnegative"));
    }
    let mut out = Vec::with_capacity(n + p_m);
    out.extend(svals.iter().map(|&s| -s));
    out.extend(std::iter::repeat_n(0.0, p_m - n));
    out.extend(svals.iter().copied());
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Dumps a complex matrix as coordinate text: a header line, a
/// `rows cols entries` line, then one `row col re im` line per entry (1-based).
pub fn write_matrix_market<W: Write>(out: &mut W, m: &DMatrix<Complex64>) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.len())?;
    for j in 0..m.nrows() {
        for k in 0..m.ncols() {
            let x = m[(j, k)];
            writeln!(out, "{} {} {:e} {:e}", j + 1, k + 1, x.re, x.im)?;
        }
    }
    Ok(())
}
