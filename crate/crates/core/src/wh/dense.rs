//! Dense reference path: assemble the block Yule-Walker normal equations as
//! one `pd x pd` linear system and hand it to LAPACK. `O(p^3 d^3)` — the
//! baseline the Toeplitz-aware paths are benchmarked against.

use ndarray::Array2;

use crate::error::Result;
use crate::grids::KernelGrid;
use crate::lapack::solve_with_rcond;

use super::DiscretisedWh;

/// Solve `sum_{k=1}^p A_k G_{j-k} = -G_j` by a general dense solve and
/// extract the kernel. Returns the reciprocal condition estimate alongside.
///
/// Transposing turns the unknown-on-the-left system into the standard form
/// `S W = B` with blocks `S[j][k] = G_{k-j}` and `W[k] = A_k^T`.
pub fn solve_direct_with_diagnostics(problem: &DiscretisedWh) -> Result<(KernelGrid, f64)> {
    let d = problem.dim();
    let p = problem.order();
    let dd = d * d;
    let n = p * d;
    let g = problem.bin_covariances();
    let gblk = |k: usize| &g[k * dd..(k + 1) * dd];

    // column-major assembly for LAPACK
    let mut sys = vec![0.0f64; n * n];
    for j in 0..p {
        for k in 0..p {
            // block S[j][k] = G_{k-j}; negative index means transpose
            let (blk, transpose) =
                if k >= j { (gblk(k - j), false) } else { (gblk(j - k), true) };
            for r in 0..d {
                for c in 0..d {
                    let val = if transpose { blk[c * d + r] } else { blk[r * d + c] };
                    let row = j * d + r;
                    let col = k * d + c;
                    sys[row + col * n] = val;
                }
            }
        }
    }
    let mut rhs = vec![0.0f64; n * d];
    for j in 0..p {
        let blk = gblk(j + 1);
        for r in 0..d {
            for c in 0..d {
                // B[j] = -G_{j+1}^T
                rhs[(j * d + r) + c * n] = -blk[c * d + r];
            }
        }
    }

    let rcond = solve_with_rcond(n, d, &mut sys, &mut rhs)?;

    // W[k] = A_{k+1}^T; kernel K_k = -A_{k+1}/dt
    let dt = problem.delta();
    let values: Vec<Array2<f64>> = (0..p)
        .map(|k| Array2::from_shape_fn((d, d), |(i, j)| -rhs[(k * d + j) + i * n] / dt))
        .collect();
    let grid = crate::grids::LagGrid::new(dt, p).expect("order validated");
    let supports = Array2::from_elem((d, d), grid.span());
    Ok((KernelGrid::new(grid, values, supports)?, rcond))
}
