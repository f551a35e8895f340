//! Dense real linear algebra: Pfaffians, determinants and the symmetric
//! tridiagonal eigensolver behind Gaussian quadrature.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default absolute tolerance when checking `a[i][j] = -a[j][i]`.
pub const ANTISYM_TOL: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!("vector of length {} against {} columns", v.len(), self.cols)));
        }
        Ok((0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum()).collect())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| if x.abs() > acc { x.abs() } else { acc })
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Square antisymmetric matrix. The diagonal is stored as exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct AntisymMatrix<T> {
    inner: DenseMatrix<T>,
}

impl<T: Scalar> AntisymMatrix<T> {
    /// Validates antisymmetry with the default tolerance [`ANTISYM_TOL`].
    pub fn new(m: DenseMatrix<T>) -> Result<Self> {
        Self::with_tolerance(m, T::of(ANTISYM_TOL))
    }

    /// Validates antisymmetry within `tol`, then zeroes the diagonal and
    /// replaces each pair by its antisymmetric part.
    pub fn with_tolerance(mut m: DenseMatrix<T>, tol: T) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare { rows: m.rows, cols: m.cols });
        }
        let n = m.rows;
        for i in 0..n {
            for j in i..n {
                let defect = (m[(i, j)] + m[(j, i)]).abs();
                if !(defect <= tol) {
                    return Err(Error::NotAntisymmetric { i, j, defect: defect.to_f64().unwrap_or(f64::NAN) });
                }
                let half = (m[(i, j)] - m[(j, i)]) / T::of(2.0);
                m[(i, j)] = half;
                m[(j, i)] = -half;
            }
        }
        Ok(Self { inner: m })
    }

    /// Builds an exactly antisymmetric matrix from its strict upper triangle.
    pub fn from_upper(dim: usize, mut upper: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = DenseMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i + 1..dim {
                let v = upper(i, j);
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        Self { inner: m }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.rows
    }

    pub fn as_dense(&self) -> &DenseMatrix<T> {
        &self.inner
    }

    pub fn into_dense(self) -> DenseMatrix<T> {
        self.inner
    }

    /// Congruence `Bᵀ A B`, which stays antisymmetric.
    pub fn congruence(&self, b: &DenseMatrix<T>) -> Result<Self> {
        let m = b.transpose().matmul(&self.inner)?.matmul(b)?;
        Ok(Self::from_upper(m.rows, |i, j| (m[(i, j)] - m[(j, i)]) / T::of(2.0)))
    }
}

/// Pfaffian by skew-symmetric Gaussian elimination (Parlett–Reid) with
/// largest-magnitude pivoting. `Pf` of the empty matrix is 1.
pub fn pfaffian<T: Scalar>(a: &AntisymMatrix<T>) -> Result<T> {
    let n = a.dim();
    if n % 2 == 1 {
        return Err(Error::OddPfaffian(n));
    }
    let mut w = a.inner.data.clone();
    Ok(pfaffian_in_place(&mut w, n))
}

/// Pfaffian of an `n×n` row-major antisymmetric buffer, destroying it.
/// The caller guarantees antisymmetry and even `n`.
pub(crate) fn pfaffian_in_place<T: Scalar>(w: &mut [T], n: usize) -> T {
    debug_assert_eq!(w.len(), n * n);
    debug_assert!(n.is_multiple_of(2));
    let mut pf = T::one();
    let mut k = 0;
    while k + 1 < n {
        // partner pivot: largest |a[k][j]| over j > k
        let mut p = k + 1;
        let mut best = w[k * n + k + 1].abs();
        for j in k + 2..n {
            let v = w[k * n + j].abs();
            if v > best {
                best = v;
                p = j;
            }
        }
        if best < T::pivot_floor() {
            return T::zero();
        }
        if p != k + 1 {
            swap_sym(w, n, k + 1, p);
            pf = -pf;
        }
        let piv = w[k * n + k + 1];
        pf *= piv;
        // a[i][j] += tau_j a[k+1][i] - tau_i a[k+1][j], tau_i = a[k][i] / a[k][k+1]
        let kp = k + 1;
        let tau: Vec<T> = (kp + 1..n).map(|i| w[k * n + i] / piv).collect();
        for (ii, i) in (kp + 1..n).enumerate() {
            let ti = tau[ii];
            let a_ki = w[kp * n + i];
            for (jj, j) in (i + 1..n).enumerate() {
                let tj = tau[ii + 1 + jj];
                let upd = tj * a_ki - ti * w[kp * n + j];
                let v = w[i * n + j] + upd;
                w[i * n + j] = v;
                w[j * n + i] = -v;
            }
        }
        k += 2;
    }
    pf
}

fn swap_sym<T: Copy>(w: &mut [T], n: usize, a: usize, b: usize) {
    for c in 0..n {
        w.swap(a * n + c, b * n + c);
    }
    for r in 0..n {
        w.swap(r * n + a, r * n + b);
    }
}

/// Determinant by LU elimination with partial pivoting.
pub fn determinant<T: Scalar>(a: &DenseMatrix<T>) -> Result<T> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows, cols: a.cols });
    }
    let n = a.rows;
    let mut w = a.data.clone();
    Ok(determinant_in_place(&mut w, n))
}

pub(crate) fn determinant_in_place<T: Scalar>(w: &mut [T], n: usize) -> T {
    let mut det = T::one();
    for k in 0..n {
        let mut p = k;
        let mut best = w[k * n + k].abs();
        for i in k + 1..n {
            let v = w[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < T::pivot_floor() {
            return T::zero();
        }
        if p != k {
            for c in 0..n {
                w.swap(k * n + c, p * n + c);
            }
            det = -det;
        }
        let piv = w[k * n + k];
        det *= piv;
        for i in k + 1..n {
            let f = w[i * n + k] / piv;
            if f == T::zero() {
                continue;
            }
            for c in k + 1..n {
                let v = w[k * n + c];
                w[i * n + c] -= f * v;
            }
        }
    }
    det
}

/// Solves `A x = b` by partial-pivot elimination.
pub fn solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows, cols: a.cols });
    }
    let n = a.rows;
    if b.len() != n {
        return Err(Error::Shape("right-hand side length".into()));
    }
    let mut w = a.data.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if w[i * n + k].abs() > w[p * n + k].abs() {
                p = i;
            }
        }
        if w[p * n + k].abs() < T::pivot_floor() {
            return Err(Error::Shape("singular system".into()));
        }
        if p != k {
            for c in 0..n {
                w.swap(k * n + c, p * n + c);
            }
            x.swap(k, p);
        }
        let piv = w[k * n + k];
        for i in k + 1..n {
            let f = w[i * n + k] / piv;
            for c in k..n {
                let v = w[k * n + c];
                w[i * n + c] -= f * v;
            }
            let xk = x[k];
            x[i] -= f * xk;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in k + 1..n {
            s -= w[k * n + c] * x[c];
        }
        x[k] = s / w[k * n + k];
    }
    Ok(x)
}

/// Eigenvalues of the symmetric tridiagonal matrix with the given diagonal
/// and off-diagonal, together with the first component of each normalized
/// eigenvector. Implicit QL with Wilkinson shifts; output sorted ascending.
pub fn tridiag_eigen<T: Scalar>(diag: &[T], offdiag: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let n = diag.len();
    if n == 0 {
        if offdiag.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        return Err(Error::Shape("empty diagonal with off-diagonal entries".into()));
    }
    if offdiag.len() + 1 != n {
        return Err(Error::Shape(format!("off-diagonal length {} for diagonal length {n}", offdiag.len())));
    }
    let mut d = diag.to_vec();
    let mut e: Vec<T> = offdiag.to_vec();
    e.push(T::zero());
    let mut z = vec![T::zero(); n];
    z[0] = T::one();
    let two = T::of(2.0);
    let eps = T::epsilon();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                return Err(Error::Shape("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    Ok((idx.iter().map(|&i| d[i]).collect(), idx.iter().map(|&i| z[i]).collect()))
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// Returns `(diag, offdiag)`.
pub fn tridiagonalize<T: Scalar>(a: &DenseMatrix<T>) -> Result<(Vec<T>, Vec<T>)> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows, cols: a.cols });
    }
    let n = a.rows;
    let mut w = a.clone();
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let norm = (k + 1..n).map(|i| w[(i, k)] * w[(i, k)]).sum::<T>().sqrt();
        if norm == T::zero() {
            offdiag.push(T::zero());
            continue;
        }
        let x0 = w[(k + 1, k)];
        let alpha = if x0 > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k + 1..n).map(|i| w[(i, k)]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if vn == T::zero() {
            offdiag.push(x0);
            continue;
        }
        for x in v.iter_mut() {
            *x /= vn;
        }
        // p = 2 A v on the trailing block, w = p - (vᵀp) v
        let m = n - k - 1;
        let two = T::of(2.0);
        let mut p = vec![T::zero(); m];
        for (ii, pi) in p.iter_mut().enumerate() {
            let mut s = T::zero();
            for (jj, &vj) in v.iter().enumerate() {
                s += w[(k + 1 + ii, k + 1 + jj)] * vj;
            }
            *pi = two * s;
        }
        let kk: T = v.iter().zip(&p).map(|(&a, &b)| a * b).sum();
        let wv: Vec<T> = p.iter().zip(&v).map(|(&pi, &vi)| pi - kk * vi).collect();
        for ii in 0..m {
            for jj in 0..m {
                let upd = v[ii] * wv[jj] + wv[ii] * v[jj];
                w[(k + 1 + ii, k + 1 + jj)] -= upd;
            }
        }
        offdiag.push(alpha);
    }
    let diag = (0..n).map(|i| w[(i, i)]).collect();
    Ok((diag, offdiag))
}

/// All eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    let (d, e) = tridiagonalize(a)?;
    Ok(tridiag_eigen(&d, &e)?.0)
}
