//! Dense square matrices and cyclic Jacobi eigensolvers.
//!
//! Everything here is generic over the floating-point type. The physics
//! modules use the `f64` instantiations exported at the crate root.

use num_complex::Complex;
use num_traits::Float;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy> Mat<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Mat { n, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Mat { n, data: rows.iter().flatten().copied().collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.n, |i, j| self[(j, i)])
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Float> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Mat { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn tmatmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for k in 0..n {
            for i in 0..n {
                let a = self[(k, i)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)).collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }

    pub fn max_abs_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn scale(&self, s: T) -> Self {
        Mat { n: self.n, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Mat { n: self.n, data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect() }
    }
}

/// Dense complex square matrix.
pub type CMat<T> = Mat<Complex<T>>;

impl<T: Float> Mat<Complex<T>> {
    pub fn czeros(n: usize) -> Self {
        Mat { n, data: vec![Complex::new(T::zero(), T::zero()); n * n] }
    }

    pub fn cidentity(n: usize) -> Self {
        Mat::from_fn(n, |i, j| Complex::new(if i == j { T::one() } else { T::zero() }, T::zero()))
    }

    pub fn from_real(m: &Mat<T>) -> Self {
        Mat::from_fn(m.n, |i, j| Complex::new(m[(i, j)], T::zero()))
    }

    pub fn adjoint(&self) -> Self {
        Mat::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn cmatmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Mat::czeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn cmatvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    pub fn cfrobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt()
    }
}

/// Eigenpairs of a real symmetric matrix: ascending values, vectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
    pub sweeps: usize,
}

/// Eigenpairs of a complex Hermitian matrix: ascending values, vectors as columns.
#[derive(Debug, Clone)]
pub struct HermEigen<T> {
    pub values: Vec<T>,
    pub vectors: CMat<T>,
    pub sweeps: usize,
}

pub const MAX_SWEEPS: usize = 64;

fn off_diagonal_sq<T: Float>(a: &Mat<T>) -> T {
    let n = a.dim();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s = s + a[(i, j)] * a[(i, j)];
            }
        }
    }
    s
}

/// Rotation (c, s) zeroing the (p, q) element of a symmetric 2×2 block.
fn jacobi_rotation<T: Float>(app: T, aqq: T, apq: T) -> (T, T) {
    let two = T::one() + T::one();
    let theta = (aqq - app) / (two * apq);
    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
    let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = T::one() / (t * t + T::one()).sqrt();
    (c, t * c)
}

/// Cyclic Jacobi on a real symmetric matrix. Columns of `v` accumulate the
/// rotations, so passing a non-identity `v` yields `v · eigenvectors(a)`.
fn jacobi_real_in_place<T: Float>(a: &mut Mat<T>, v: &mut Mat<T>) -> Result<usize> {
    let n = a.dim();
    let norm = a.frobenius_norm();
    if norm == T::zero() {
        return Ok(0);
    }
    let eps = T::epsilon();
    for sweep in 0..MAX_SWEEPS {
        let off = off_diagonal_sq(a);
        if off.sqrt() <= eps * norm {
            return Ok(sweep);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() < eps * eps * (app.abs() + aqq.abs()) {
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    continue;
                }
                let (c, s) = jacobi_rotation(app, aqq, apq);
                for k in 0..n {
                    let x = a[(k, p)];
                    let y = a[(k, q)];
                    a[(k, p)] = c * x - s * y;
                    a[(k, q)] = s * x + c * y;
                }
                for k in 0..n {
                    let x = a[(p, k)];
                    let y = a[(q, k)];
                    a[(p, k)] = c * x - s * y;
                    a[(q, k)] = s * x + c * y;
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    let x = v[(k, p)];
                    let y = v[(k, q)];
                    v[(k, p)] = c * x - s * y;
                    v[(k, q)] = s * x + c * y;
                }
            }
        }
    }
    Err(Error::EigenConvergence { sweeps: MAX_SWEEPS })
}

fn sort_and_fix_real<T: Float>(a: &Mat<T>, v: &Mat<T>, sweeps: usize) -> SymEigen<T> {
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::from_fn(n, |i, j| v[(i, order[j])]);
    for j in 0..n {
        let mut best = 0;
        for i in 1..n {
            if vectors[(i, j)].abs() > vectors[(best, j)].abs() {
                best = i;
            }
        }
        if vectors[(best, j)] < T::zero() {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
    SymEigen { values, vectors, sweeps }
}

/// Modified Gram-Schmidt on the columns of `m`.
fn orthonormalize<T: Float>(m: &Mat<T>) -> Mat<T> {
    let n = m.dim();
    let mut q = m.clone();
    for j in 0..n {
        for k in 0..j {
            let dot = (0..n).fold(T::zero(), |acc, i| acc + q[(i, k)] * q[(i, j)]);
            for i in 0..n {
                q[(i, j)] = q[(i, j)] - dot * q[(i, k)];
            }
        }
        let norm = (0..n).fold(T::zero(), |acc, i| acc + q[(i, j)] * q[(i, j)]).sqrt();
        for i in 0..n {
            q[(i, j)] = q[(i, j)] / norm;
        }
    }
    q
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Each eigenvector's largest-magnitude component is made positive.
pub fn sym_eigen<T: Float>(h: &Mat<T>) -> Result<SymEigen<T>> {
    let mut a = h.clone();
    let mut v = Mat::identity(h.dim());
    let sweeps = jacobi_real_in_place(&mut a, &mut v)?;
    Ok(sort_and_fix_real(&a, &v, sweeps))
}

/// Same contract as [`sym_eigen`], starting from an orthogonal guess whose
/// columns approximately diagonalize `h`. Converges in one or two sweeps when
/// the guess comes from a nearby matrix.
pub fn sym_eigen_warm<T: Float>(h: &Mat<T>, guess: &Mat<T>) -> Result<SymEigen<T>> {
    // Chained warm starts lose orthogonality one rounding error at a time.
    let guess = &orthonormalize(guess);
    let mut a = guess.tmatmul(&h.matmul(guess));
    let n = a.dim();
    for i in 0..n {
        for j in 0..i {
            let m = (a[(i, j)] + a[(j, i)]) / (T::one() + T::one());
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = guess.clone();
    let sweeps = jacobi_real_in_place(&mut a, &mut v)?;
    Ok(sort_and_fix_real(&a, &v, sweeps))
}

/// Eigendecomposition of a complex Hermitian matrix by complex Jacobi
/// rotations. Each eigenvector's largest-magnitude component is made real and
/// positive.
pub fn herm_eigen<T: Float>(h: &CMat<T>) -> Result<HermEigen<T>> {
    let n = h.dim();
    let zero = Complex::new(T::zero(), T::zero());
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] = Complex::new(a[(i, i)].re, T::zero());
    }
    let mut v = CMat::cidentity(n);
    let norm = a.cfrobenius_norm();
    let eps = T::epsilon();
    let mut sweeps_done = None;
    if norm == T::zero() {
        sweeps_done = Some(0);
    }
    let mut sweep = 0;
    while sweeps_done.is_none() {
        if sweep >= MAX_SWEEPS {
            return Err(Error::EigenConvergence { sweeps: MAX_SWEEPS });
        }
        let mut off = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off + a[(i, j)].norm_sqr();
                }
            }
        }
        if off.sqrt() <= eps * norm {
            sweeps_done = Some(sweep);
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                let babs = b.norm();
                if babs <= T::min_positive_value() {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if babs < eps * eps * (app.abs() + aqq.abs()) {
                    a[(p, q)] = zero;
                    a[(q, p)] = zero;
                    continue;
                }
                let u = b / babs;
                let (c, s) = jacobi_rotation(app, aqq, babs);
                let cc = Complex::new(c, T::zero());
                let sc = Complex::new(s, T::zero());
                let uc = u.conj();
                for k in 0..n {
                    let x = a[(k, p)];
                    let y = a[(k, q)] * uc;
                    a[(k, p)] = cc * x - sc * y;
                    a[(k, q)] = sc * x + cc * y;
                }
                for k in 0..n {
                    let x = a[(p, k)];
                    let y = a[(q, k)] * u;
                    a[(p, k)] = cc * x - sc * y;
                    a[(q, k)] = sc * x + cc * y;
                }
                a[(p, q)] = zero;
                a[(q, p)] = zero;
                a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
                a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());
                for k in 0..n {
                    let x = v[(k, p)];
                    let y = v[(k, q)] * uc;
                    v[(k, p)] = cc * x - sc * y;
                    v[(k, q)] = sc * x + cc * y;
                }
            }
        }
        sweep += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMat::from_fn(n, |i, j| v[(i, order[j])]);
    for j in 0..n {
        let mut best = 0;
        for i in 1..n {
            if vectors[(i, j)].norm() > vectors[(best, j)].norm() {
                best = i;
            }
        }
        let m = vectors[(best, j)];
        if m.norm() > T::zero() {
            let phase = m.conj() / m.norm();
            for i in 0..n {
                vectors[(i, j)] = vectors[(i, j)] * phase;
            }
            vectors[(best, j)] = Complex::new(vectors[(best, j)].re, T::zero());
        }
    }
    Ok(HermEigen { values, vectors, sweeps: sweeps_done.unwrap_or(0) })
}

/// Solves `a x = b` for small dense systems by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot vanishes.
pub fn solve<T: Float>(a: &Mat<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.dim();
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[(r, col)].abs() > m[(piv, col)].abs() {
                piv = r;
            }
        }
        if m[(piv, col)].abs() <= T::min_positive_value() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(piv, k)];
                m[(piv, k)] = tmp;
            }
            x.swap(col, piv);
        }
        for r in (col + 1)..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                m[(r, k)] = m[(r, k)] - f * m[(col, k)];
            }
            x[r] = x[r] - f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in (col + 1)..n {
            s = s - m[(col, k)] * x[k];
        }
        x[col] = s / m[(col, col)];
    }
    Some(x)
}
