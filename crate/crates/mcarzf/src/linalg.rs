//! Dense complex linear algebra helpers.
//!
//! Matrices are column-major `nalgebra` matrices. Products go through the
//! `matrixmultiply` kernels, which are much faster than the generic
//! `nalgebra` loops for complex scalars.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Operand transform for [`gemm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    /// Use the matrix as is.
    N,
    /// Use the conjugate transpose.
    H,
}

fn op_dims(m: &CMat, op: Op) -> (usize, usize) {
    match op {
        Op::N => (m.nrows(), m.ncols()),
        Op::H => (m.ncols(), m.nrows()),
    }
}

/// `y <- a x` for a column-major `a`, written as column sweeps so the inner
/// loop is a contiguous complex axpy.
pub fn matvec(a: &CMat, x: &[C64], y: &mut [C64]) {
    let (m, n) = a.shape();
    assert!(x.len() == n && y.len() == m, "matvec dimensions");
    y.fill(ZERO);
    let data = a.as_slice();
    for (c, &xc) in x.iter().enumerate() {
        let col = &data[c * m..(c + 1) * m];
        for (yi, &ai) in y.iter_mut().zip(col) {
            *yi += ai * xc;
        }
    }
}

/// `c <- alpha * op(a) * op(b) + beta * c`.
pub fn gemm(alpha: C64, a: &CMat, opa: Op, b: &CMat, opb: Op, beta: C64, c: &mut CMat) {
    let (m, k) = op_dims(a, opa);
    let (kb, n) = op_dims(b, opb);
    assert_eq!(k, kb, "gemm inner dimension");
    assert_eq!((c.nrows(), c.ncols()), (m, n), "gemm output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        *c *= beta;
        return;
    }
    // matrixmultiply has no conjugation flag, so conjugate into a scratch copy.
    let ac;
    let (pa, rsa, csa) = match opa {
        Op::N => (a.as_ptr(), 1, a.nrows() as isize),
        Op::H => {
            ac = a.map(|z| z.conj());
            (ac.as_ptr(), a.nrows() as isize, 1)
        }
    };
    let bc;
    let (pb, rsb, csb) = match opb {
        Op::N => (b.as_ptr(), 1, b.nrows() as isize),
        Op::H => {
            bc = b.map(|z| z.conj());
            (bc.as_ptr(), b.nrows() as isize, 1)
        }
    };
    let ldc = c.nrows() as isize;
    // SAFETY: Complex64 is repr(C) with layout [re, im]; all pointers cover
    // the full matrices described by the given dimensions and strides.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            pa as *const [f64; 2],
            rsa,
            csa,
            pb as *const [f64; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            ldc,
        );
    }
}

/// `op(a) * op(b)` into a fresh matrix.
pub fn mul(a: &CMat, opa: Op, b: &CMat, opb: Op) -> CMat {
    let (m, _) = op_dims(a, opa);
    let (_, n) = op_dims(b, opb);
    let mut c = CMat::zeros(m, n);
    gemm(ONE, a, opa, b, opb, ZERO, &mut c);
    c
}

/// Real `c <- alpha * a * b + beta * c` on explicit strides.
///
/// `a` is `m x k` with strides `sa = (row, col)`, `b` is `k x n` with
/// strides `sb`, and `c` is `m x n` with strides `sc`.
#[allow(clippy::too_many_arguments)]
pub fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    sa: (usize, usize),
    b: &[f64],
    sb: (usize, usize),
    beta: f64,
    c: &mut [f64],
    sc: (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, cl: usize, s: (usize, usize)| (r.max(1) - 1) * s.0 + (cl.max(1) - 1) * s.1;
    assert!(k == 0 || last(m, k, sa) < a.len(), "dgemm: a out of bounds");
    assert!(k == 0 || last(k, n, sb) < b.len(), "dgemm: b out of bounds");
    assert!(last(m, n, sc) < c.len(), "dgemm: c out of bounds");
    // SAFETY: every addressed element lies inside the checked slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            beta,
            c.as_mut_ptr(),
            sc.0 as isize,
            sc.1 as isize,
        );
    }
}

/// `a b^T` for row-major blocks: `a` holds `m` rows and `b` holds `n` rows,
/// all of length `k`.
pub fn rows_dot(a: &[f64], m: usize, b: &[f64], n: usize, k: usize) -> RMat {
    let mut c = RMat::zeros(m, n);
    dgemm(m, k, n, 1.0, a, (k, 1), b, (1, k), 0.0, c.as_mut_slice(), (1, m));
    c
}

/// Complex matrix from its interleaved column-major data.
pub fn from_interleaved(n: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), 2 * n * n);
    CMat::from_iterator(n, n, data.chunks_exact(2).map(|c| C64::new(c[0], c[1])))
}

/// Interleaved data of `i * conj(m)`, so that `as_real(c) . swapped(m)` is
/// `Im sum_ij c_ij conj(m_ij)`.
pub fn swapped(m: &CMat) -> Vec<f64> {
    m.iter().flat_map(|z| [-z.im, z.re]).collect()
}

/// Interleaved `[re, im, re, im, ...]` view of a complex matrix.
pub fn as_real(m: &CMat) -> &[f64] {
    let s = m.as_slice();
    // SAFETY: Complex64 is repr(C) { re: f64, im: f64 }.
    unsafe { std::slice::from_raw_parts(s.as_ptr() as *const f64, 2 * s.len()) }
}

/// `Re tr(a b)` when `b` is Hermitian (exact for both Hermitian).
pub fn tr_herm(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    as_real(a).iter().zip(as_real(b)).map(|(x, y)| x * y).sum()
}

/// `tr(a b)` when `b` is Hermitian.
pub fn tr_mul_herm(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// `tr(a b)` for general square matrices.
pub fn tr_mul(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut s = ZERO;
    for j in 0..n {
        for i in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Replace `m` by `(m + m^H) / 2`.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in j + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Relative Hermitian residual `||m - m^H||_F / ||m||_F`.
pub fn hermitian_residual(m: &CMat) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky(m: CMat, context: &'static str) -> Result<Cholesky<C64, Dyn>> {
    Cholesky::new(m).ok_or(Error::Singular(context))
}

/// Inverse of a Hermitian positive definite matrix, Hermitian by construction.
pub fn herm_inverse(m: CMat, context: &'static str) -> Result<CMat> {
    let mut inv = cholesky(m, context)?.inverse();
    hermitize(&mut inv);
    Ok(inv)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn herm_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Hermitian PSD square root with negative eigenvalues clipped to zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let eig = SymmetricEigen::new(m.clone());
    let u = eig.eigenvectors;
    let mut us = u.clone();
    for (j, &ev) in eig.eigenvalues.iter().enumerate() {
        let s = ev.max(0.0).sqrt();
        us.column_mut(j).scale_mut(s);
    }
    let mut r = mul(&us, Op::N, &u, Op::H);
    hermitize(&mut r);
    r
}

/// Largest eigenvalue modulus of a real square matrix.
pub fn spectral_radius(m: &RMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Draw a standard circularly-symmetric complex Gaussian sample.
pub fn cn01<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    use rand_distr::{Distribution, StandardNormal};
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
