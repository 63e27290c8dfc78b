//! Small dense helpers shared by the recursive solvers.
//!
//! The order recursions work on contiguous `[f64]` blocks of shape d-by-d
//! (row-major) to keep the inner loops allocation-free; public types convert
//! to `ndarray` at the boundary.

use ndarray::Array2;

/// c += a * b, all d-by-d row-major blocks.
#[inline]
pub fn mul_acc(c: &mut [f64], a: &[f64], b: &[f64], d: usize) {
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                c[i * d + j] += aik * b[k * d + j];
            }
        }
    }
}

/// c += a * b^T.
#[inline]
pub fn mul_bt_acc(c: &mut [f64], a: &[f64], b: &[f64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[j * d + k];
            }
            c[i * d + j] += s;
        }
    }
}

/// c -= a * b^T.
#[inline]
pub fn mul_bt_sub(c: &mut [f64], a: &[f64], b: &[f64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[j * d + k];
            }
            c[i * d + j] -= s;
        }
    }
}

/// c -= a * b.
#[inline]
pub fn mul_sub(c: &mut [f64], a: &[f64], b: &[f64], d: usize) {
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                c[i * d + j] -= aik * b[k * d + j];
            }
        }
    }
}

/// out = a * b, overwriting.
#[inline]
pub fn mul_to(out: &mut [f64], a: &[f64], b: &[f64], d: usize) {
    out.fill(0.0);
    mul_acc(out, a, b, d);
}

/// Invert a d-by-d row-major block by Gauss-Jordan with partial pivoting.
/// Returns `false` (leaving `out` unspecified) when a pivot degenerates.
pub fn invert_to(out: &mut [f64], a: &[f64], d: usize, work: &mut [f64]) -> bool {
    debug_assert_eq!(out.len(), d * d);
    debug_assert_eq!(work.len(), d * d);
    work.copy_from_slice(a);
    out.fill(0.0);
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
    let scale = a.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for col in 0..d {
        let mut piv = col;
        let mut best = work[col * d + col].abs();
        for r in (col + 1)..d {
            let v = work[r * d + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > scale * 1e-13) {
            return false;
        }
        if piv != col {
            for j in 0..d {
                work.swap(col * d + j, piv * d + j);
                out.swap(col * d + j, piv * d + j);
            }
        }
        let inv_p = 1.0 / work[col * d + col];
        for j in 0..d {
            work[col * d + j] *= inv_p;
            out[col * d + j] *= inv_p;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let f = work[r * d + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..d {
                work[r * d + j] -= f * work[col * d + j];
                out[r * d + j] -= f * out[col * d + j];
            }
        }
    }
    true
}

pub fn to_array(block: &[f64], d: usize) -> Array2<f64> {
    Array2::from_shape_vec((d, d), block.to_vec()).expect("block shape")
}

/// Spectral radius of an entrywise-nonnegative matrix by power iteration
/// (Perron-Frobenius; deterministic all-ones start).
pub fn nonneg_spectral_radius(m: &Array2<f64>, iters: usize) -> f64 {
    let d = m.nrows();
    if d == 1 {
        return m[(0, 0)].abs();
    }
    let mut v = vec![1.0f64; d];
    let mut radius = 0.0;
    for _ in 0..iters {
        let mut w = vec![0.0f64; d];
        for i in 0..d {
            for j in 0..d {
                w[i] += m[(i, j)] * v[j];
            }
        }
        let norm = w.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if norm == 0.0 {
            return 0.0;
        }
        radius = norm;
        for x in &mut w {
            *x /= norm;
        }
        v = w;
    }
    radius
}

/// Largest absolute entry.
pub fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}
