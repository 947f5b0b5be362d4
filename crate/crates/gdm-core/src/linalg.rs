//! Dense Hermitian linear algebra on top of the system BLAS/LAPACK.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

pub type C64 = Complex64;
pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

extern "C" {
    fn zheevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        lrwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );

    fn dsyev_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );

    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        b: *const Complex64,
        ldb: *const i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: *const i32,
    );
}

/// Eigendecomposition of a Hermitian matrix; works on the Hermitian part
/// (A + A†)/2 so roundoff skew in the input cannot leak in.
///
/// Returns ascending eigenvalues and a matrix whose column j is the j-th
/// eigenvector.
pub fn eigh(a: &CMat) -> Result<(Array1<f64>, CMat)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(CoreError::InvalidInput(format!(
            "eigh needs a square nonempty matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }

    // Column-major copy of the Hermitian part.
    let mut buf: Vec<Complex64> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            buf.push(0.5 * (a[(i, j)] + a[(j, i)].conj()));
        }
    }

    let ni = n as i32;
    let mut w = vec![0.0_f64; n];
    let lwork = (2 * n + n * n) as i32;
    let lrwork = (1 + 5 * n + 2 * n * n) as i32;
    let liwork = (3 + 5 * n) as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0_f64; lrwork as usize];
    let mut iwork = vec![0_i32; liwork as usize];
    let mut info = 0_i32;

    unsafe {
        zheevd_(
            b"V".as_ptr(),
            b"L".as_ptr(),
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(CoreError::Convergence(format!(
            "zheevd failed with info={info} on a {n}x{n} matrix"
        )));
    }

    let mut vectors = CMat::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            vectors[(i, j)] = buf[j * n + i];
        }
    }
    Ok((Array1::from(w), vectors))
}

/// Eigendecomposition of a real symmetric matrix (symmetric part is used).
pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(CoreError::InvalidInput(format!(
            "eigh_real needs a square nonempty matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }

    let mut buf: Vec<f64> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            buf.push(0.5 * (a[(i, j)] + a[(j, i)]));
        }
    }

    let ni = n as i32;
    let mut w = vec![0.0_f64; n];
    let lwork = (3 * n * n + 6 * n + 1) as i32;
    let mut work = vec![0.0_f64; lwork as usize];
    let mut info = 0_i32;

    unsafe {
        dsyev_(
            b"V".as_ptr(),
            b"L".as_ptr(),
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(CoreError::Convergence(format!(
            "dsyev failed with info={info} on a {n}x{n} matrix"
        )));
    }

    let mut vectors = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            vectors[(i, j)] = buf[j * n + i];
        }
    }
    Ok((Array1::from(w), vectors))
}

/// C = A · B for row-major operands, via one zgemm call.
///
/// A row-major m x k matrix is the column-major transpose; computing
/// Bᵀ·Aᵀ = Cᵀ in column-major lands C back in row-major order.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    let (m, k) = a.dim();
    let (k2, n) = b.dim();
    assert_eq!(k, k2, "matmul dimension mismatch: {k} vs {k2}");

    let a_s = a.as_standard_layout();
    let b_s = b.as_standard_layout();
    let mut c = vec![Complex64::new(0.0, 0.0); m * n];
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let (mi, ni, ki) = (m as i32, n as i32, k as i32);

    unsafe {
        zgemm_(
            b"N".as_ptr(),
            b"N".as_ptr(),
            &ni,
            &mi,
            &ki,
            &one,
            b_s.as_ptr(),
            &ni,
            a_s.as_ptr(),
            &ki,
            &zero,
            c.as_mut_ptr(),
            &ni,
        );
    }
    CMat::from_shape_vec((m, n), c).expect("zgemm output shape")
}

pub fn adjoint(a: &CMat) -> CMat {
    let (m, n) = a.dim();
    let mut out = CMat::zeros((n, m));
    for i in 0..m {
        for j in 0..n {
            out[(j, i)] = a[(i, j)].conj();
        }
    }
    out
}

/// U A U† in two products.
pub fn conjugate(u: &CMat, a: &CMat) -> CMat {
    matmul(&matmul(u, a), &adjoint(u))
}

pub fn identity(n: usize) -> CMat {
    CMat::eye(n)
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diag().sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// max |(A − A†)_ij|
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

/// max |(U†U − I)_ij|
pub fn unitary_deviation(u: &CMat) -> f64 {
    let p = matmul(&adjoint(u), u);
    let n = p.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            dev = dev.max((p[(i, j)] - target).norm());
        }
    }
    dev
}

/// exp(-i t H) for Hermitian H, through the eigendecomposition.
pub fn expm_unitary(h: &CMat, t: f64) -> Result<CMat> {
    let (w, v) = eigh(h)?;
    Ok(unitary_from_eigen(&w, &v, t))
}

/// exp(-i t H) from a precomputed eigendecomposition of H.
pub fn unitary_from_eigen(w: &Array1<f64>, v: &CMat, t: f64) -> CMat {
    let n = v.nrows();
    // V · diag(e^{-i t w}) absorbed column-wise, then · V†.
    let mut scaled = v.clone();
    for (j, &wj) in w.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -t * wj);
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    matmul(&scaled, &adjoint(v))
}

pub fn matvec(a: &CMat, x: &CVec) -> CVec {
    let (m, n) = a.dim();
    assert_eq!(n, x.len(), "matvec dimension mismatch");
    let mut out = CVec::zeros(m);
    for i in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += a[(i, j)] * x[j];
        }
        out[i] = acc;
    }
    out
}

pub fn dot(x: &CVec, y: &CVec) -> Complex64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}
