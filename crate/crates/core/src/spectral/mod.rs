//! Dense real linear algebra: matrices, complex spectra, singular values,
//! linear solves and polynomial evaluation over spectra.

mod eigen;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reciprocal condition number below which a linear system counts as singular.
pub const RCOND_FLOOR: f64 = 1e-14;

/// Dense row-major real matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty shape {rows}x{cols}")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        Ok(RealMatrix { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        RealMatrix::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty shape");
        RealMatrix { rows, cols, entries: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m.entries[i * n + i] = x;
        }
        m
    }

    /// Assembles `[[a, b], [c, d]]` from four compatible blocks.
    pub fn from_blocks(a: &RealMatrix, b: &RealMatrix, c: &RealMatrix, d: &RealMatrix) -> Result<Self> {
        if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
            return Err(Error::Dimension("incompatible block shapes".into()));
        }
        let rows = a.rows + c.rows;
        let cols = a.cols + b.cols;
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = match (i < a.rows, j < a.cols) {
                    (true, true) => a.get(i, j),
                    (true, false) => b.get(i, j - a.cols),
                    (false, true) => c.get(i - a.rows, j),
                    (false, false) => d.get(i - a.rows, j - a.cols),
                };
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &RealMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(l);
                let dst = &mut out.entries[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ x` without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} rows",
                x.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &RealMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &RealMatrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("shape mismatch".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(&a, &b)| f(a, b)).collect();
        Ok(RealMatrix { rows: self.rows, cols: self.cols, entries })
    }

    pub fn scale(&self, s: f64) -> Self {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetric_part(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Dimension("symmetric part of a non-square matrix".into()));
        }
        Ok(self.add(&self.transpose())?.scale(0.5))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn determinant(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Dimension("determinant of a non-square matrix".into()));
        }
        Ok(self.to_na().determinant())
    }

    pub(crate) fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    pub(crate) fn from_na(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }
}

/// Multiset of complex eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    eigenvalues: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(eigenvalues: Vec<Complex64>) -> Self {
        ComplexSpectrum { eigenvalues }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min_re(&self) -> f64 {
        self.fold_min(|z| z.re)
    }

    pub fn min_abs(&self) -> f64 {
        self.fold_min(|z| z.norm())
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min Re(1/λ)`; infinite when some eigenvalue is zero.
    pub fn min_re_inv(&self) -> f64 {
        self.fold_min(|z| if z.norm_sqr() == 0.0 { f64::INFINITY } else { z.inv().re })
    }

    fn fold_min(&self, f: impl Fn(&Complex64) -> f64) -> f64 {
        self.eigenvalues.iter().map(f).fold(f64::INFINITY, f64::min)
    }

    /// Drops eigenvalues with `|λ| ≤ rel_tol · max|λ|`.
    pub fn without_near_zero(&self, rel_tol: f64) -> Self {
        let cut = rel_tol * self.max_abs().max(0.0);
        Self::new(self.eigenvalues.iter().copied().filter(|z| z.norm() > cut).collect())
    }

    /// Eigenvalues sorted by real part then imaginary part.
    pub fn sorted(&self) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    /// True when every eigenvalue can be paired with a conjugate within `tol`.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        let mut used = vec![false; self.len()];
        for i in 0..self.len() {
            if used[i] {
                continue;
            }
            let z = self.eigenvalues[i];
            if z.im.abs() <= tol {
                used[i] = true;
                continue;
            }
            let partner = (0..self.len())
                .filter(|&j| j != i && !used[j])
                .min_by(|&a, &b| {
                    let da = (self.eigenvalues[a] - z.conj()).norm();
                    let db = (self.eigenvalues[b] - z.conj()).norm();
                    da.total_cmp(&db)
                });
            match partner {
                Some(j) if (self.eigenvalues[j] - z.conj()).norm() <= tol => {
                    used[i] = true;
                    used[j] = true;
                }
                _ => return false,
            }
        }
        true
    }
}

/// All eigenvalues of a square real matrix, with algebraic multiplicity.
pub fn eigenvalues(m: &RealMatrix) -> Result<ComplexSpectrum> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("eigenvalues of a {}x{} matrix", m.rows, m.cols)));
    }
    Ok(ComplexSpectrum::new(eigen::real_eigenvalues(m.rows, &m.entries)?))
}

/// Singular values in descending order.
pub fn singular_values(m: &RealMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.to_na().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &RealMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension("symmetric eigenvalues of a non-square matrix".into()));
    }
    let sym = m.symmetric_part()?;
    let mut e: Vec<f64> = sym.to_na().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// LU factorization kept for repeated solves with the same matrix.
#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    rcond: f64,
}

impl LuFactor {
    pub fn new(m: &RealMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("LU of a non-square matrix".into()));
        }
        let a = m.to_na();
        let lu = a.clone().lu();
        let rcond = match lu.try_inverse() {
            Some(inv) => {
                let n1 = one_norm(&a);
                let ni = one_norm(&inv);
                if n1 == 0.0 || !ni.is_finite() {
                    0.0
                } else {
                    1.0 / (n1 * ni)
                }
            }
            None => 0.0,
        };
        if !(rcond >= RCOND_FLOOR) {
            return Err(Error::Singular { rcond });
        }
        Ok(LuFactor { lu, n: m.rows, rcond })
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!("rhs of length {} for order {}", b.len(), self.n)));
        }
        let x = self
            .lu
            .solve(&DVector::from_column_slice(b))
            .ok_or(Error::Singular { rcond: self.rcond })?;
        Ok(x.iter().copied().collect())
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Solves `m x = b` for square nonsingular `m`.
pub fn solve_linear(m: &RealMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuFactor::new(m)?.solve(b)
}

/// Moore-Penrose pseudo-inverse; singular values below `rel_tol · σ_max` are treated as zero.
pub fn pseudo_inverse(m: &RealMatrix, rel_tol: f64) -> Result<RealMatrix> {
    let svd = m.to_na().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let p = svd
        .pseudo_inverse(rel_tol * smax)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(RealMatrix::from_na(&p))
}

/// Horner evaluation of `Σ c_j z^j` with ascending coefficients.
pub fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// `P(s)` elementwise, multiplicities preserved.
pub fn spectral_map(s: &ComplexSpectrum, coeffs: &[f64]) -> ComplexSpectrum {
    ComplexSpectrum::new(s.eigenvalues.iter().map(|&z| poly_eval(coeffs, z)).collect())
}

/// Matrix polynomial `Σ c_j M^j` with ascending coefficients.
pub fn matrix_poly(m: &RealMatrix, coeffs: &[f64]) -> Result<RealMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension("matrix polynomial of a non-square matrix".into()));
    }
    let n = m.rows;
    let mut acc = RealMatrix::zeros(n, n);
    for &c in coeffs.iter().rev() {
        acc = acc.matmul(m)?.add(&RealMatrix::identity(n).scale(c))?;
    }
    Ok(acc)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a + s·b`.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}
