//! Thin safe wrappers over the system LAPACK (provided by OpenBLAS).
//!
//! Everything here works on column-major buffers, LAPACK's native layout;
//! callers assemble accordingly.

use std::os::raw::c_char;

use crate::error::{Error, Result};

extern "C" {
    fn dlange_(
        norm: *const c_char,
        m: *const i32,
        n: *const i32,
        a: *const f64,
        lda: *const i32,
        work: *mut f64,
    ) -> f64;
    fn dgetrf_(
        m: *const i32,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        ipiv: *mut i32,
        info: *mut i32,
    );
    fn dgecon_(
        norm: *const c_char,
        n: *const i32,
        a: *const f64,
        lda: *const i32,
        anorm: *const f64,
        rcond: *mut f64,
        work: *mut f64,
        iwork: *mut i32,
        info: *mut i32,
    );
    fn dgetrs_(
        trans: *const c_char,
        n: *const i32,
        nrhs: *const i32,
        a: *const f64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );
    fn dsyev_(
        jobz: *const c_char,
        uplo: *const c_char,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn dgeev_(
        jobvl: *const c_char,
        jobvr: *const c_char,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        wr: *mut f64,
        wi: *mut f64,
        vl: *mut f64,
        ldvl: *const i32,
        vr: *mut f64,
        ldvr: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
}

/// Solve `A X = B` in place (`a` and `b` column-major; `b` is overwritten by
/// the solution). Returns the reciprocal condition estimate of `A` in the
/// 1-norm. Fails with [`Error::SingularSystem`] on an exactly singular
/// factorisation or an rcond at roundoff level.
pub fn solve_with_rcond(n: usize, nrhs: usize, a: &mut [f64], b: &mut [f64]) -> Result<f64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * nrhs);
    let ni = n as i32;
    let one = b'1' as c_char;
    let anorm = unsafe { dlange_(&one, &ni, &ni, a.as_ptr(), &ni, std::ptr::null_mut()) };

    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe { dgetrf_(&ni, &ni, a.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info) };
    if info != 0 {
        return Err(Error::SingularSystem { rcond: 0.0 });
    }

    let mut rcond = 0.0f64;
    let mut work = vec![0.0f64; 4 * n];
    let mut iwork = vec![0i32; n];
    unsafe {
        dgecon_(
            &one,
            &ni,
            a.as_ptr(),
            &ni,
            &anorm,
            &mut rcond,
            work.as_mut_ptr(),
            iwork.as_mut_ptr(),
            &mut info,
        )
    };
    if info != 0 || !(rcond > f64::EPSILON) {
        return Err(Error::SingularSystem { rcond });
    }

    let no_trans = b'N' as c_char;
    let nrhsi = nrhs as i32;
    unsafe {
        dgetrs_(
            &no_trans,
            &ni,
            &nrhsi,
            a.as_ptr(),
            &ni,
            ipiv.as_ptr(),
            b.as_mut_ptr(),
            &ni,
            &mut info,
        )
    };
    if info != 0 {
        return Err(Error::SingularSystem { rcond });
    }
    Ok(rcond)
}

/// Eigenvalues of a symmetric matrix (ascending). `a` is column-major and
/// clobbered.
pub fn sym_eigenvalues(n: usize, a: &mut [f64]) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    let ni = n as i32;
    let jobz = b'N' as c_char;
    let uplo = b'U' as c_char;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let mut query = [0.0f64];
    let neg1 = -1i32;
    unsafe {
        dsyev_(
            &jobz,
            &uplo,
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            query.as_mut_ptr(),
            &neg1,
            &mut info,
        )
    };
    if info != 0 {
        return Err(Error::NonFinite("eigenvalue workspace query"));
    }
    let lwork = query[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dsyev_(
            &jobz,
            &uplo,
            &ni,
            a.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        )
    };
    if info != 0 {
        return Err(Error::NonFinite("symmetric eigenvalue computation"));
    }
    Ok(w)
}

/// Eigenvalues of a symmetric `ndarray` matrix (ascending).
pub fn sym_eigenvalues_arr(m: &ndarray::Array2<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    // symmetric, so row/column-major ambiguity is harmless
    let mut buf: Vec<f64> = m.iter().copied().collect();
    sym_eigenvalues(n, &mut buf)
}

/// Spectral radius of a general square matrix (largest |eigenvalue|).
pub fn spectral_radius(m: &ndarray::Array2<f64>) -> Result<f64> {
    let n = m.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    // dgeev reads column-major: feed the transpose (same spectrum)
    let mut a: Vec<f64> = m.iter().copied().collect();
    let ni = n as i32;
    let jobn = b'N' as c_char;
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let mut info = 0i32;
    let lwork = (4 * n).max(8) as i32;
    let mut work = vec![0.0f64; lwork as usize];
    unsafe {
        dgeev_(
            &jobn,
            &jobn,
            &ni,
            a.as_mut_ptr(),
            &ni,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &ni,
            std::ptr::null_mut(),
            &ni,
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        )
    };
    if info != 0 {
        return Err(Error::NonFinite("eigenvalue computation"));
    }
    Ok(wr
        .iter()
        .zip(&wi)
        .map(|(re, im)| (re * re + im * im).sqrt())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // A = [[2,1],[1,3]] (col-major), b = [3, 5] -> x = [0.8, 1.4]
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![3.0, 5.0];
        let rcond = solve_with_rcond(2, 1, &mut a, &mut b).unwrap();
        assert!((b[0] - 0.8).abs() < 1e-14 && (b[1] - 1.4).abs() < 1e-14);
        assert!(rcond > 0.1);
    }

    #[test]
    fn reports_singularity() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 1.0];
        assert!(matches!(
            solve_with_rcond(2, 1, &mut a, &mut b),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn eigenvalues_of_diag() {
        let mut a = vec![3.0, 0.0, 0.0, 1.0];
        let w = sym_eigenvalues(2, &mut a).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_radius_handles_complex_pairs() {
        // rotation matrix scaled by 0.7: eigenvalues 0.7 e^{+-i}
        let m = ndarray::arr2(&[
            [0.7 * 0.5f64.cos(), -0.7 * 0.5f64.sin()],
            [0.7 * 0.5f64.sin(), 0.7 * 0.5f64.cos()],
        ]);
        let r = spectral_radius(&m).unwrap();
        assert!((r - 0.7).abs() < 1e-12, "{r}");
    }
}
