//! Whittle recursions: multivariate Durbin-Levinson for the block-Toeplitz
//! Yule-Walker systems, `O(p^2 d^3)`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grids::KernelGrid;
use crate::linalg::{invert_to, mul_acc, mul_bt_acc, mul_sub, mul_to, to_array};

use super::{DiscretisedWh, PartialCorrelations};

/// Order-`p` forward/backward autoregression coefficients with their error
/// covariance paths and the reflection (partial-correlation) sequence.
#[derive(Debug, Clone)]
pub struct WhittleSolution {
    dim: usize,
    delta: f64,
    /// forward coefficients `A_{p,1..p}` (`A_{p,0} = I` implicit)
    pub forward: Vec<Array2<f64>>,
    /// backward coefficients `A*_{p,1..p}`
    pub backward: Vec<Array2<f64>>,
    /// forward error covariances `V_0..V_p` (bin-count units)
    pub error_covs: Vec<Array2<f64>>,
    /// backward error covariances `V*_0..V*_p`
    pub backward_error_covs: Vec<Array2<f64>>,
    /// partial correlations `Gamma_k = -A_{k,k}`, `k = 1..p`
    pub gammas: Vec<Array2<f64>>,
}

impl WhittleSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn order(&self) -> usize {
        self.forward.len()
    }

    /// Prediction kernel on the midpoint grid: `K((k+1/2)dt) = -A_{p,k+1}/dt`.
    pub fn kernel(&self, problem: &DiscretisedWh) -> KernelGrid {
        debug_assert_eq!(problem.order(), self.order());
        let dt = self.delta;
        let values: Vec<Array2<f64>> =
            self.forward.iter().map(|a| a.mapv(|x| -x / dt)).collect();
        let grid = crate::grids::LagGrid::new(dt, self.order()).expect("valid by construction");
        let supports = Array2::from_elem((self.dim, self.dim), grid.span());
        KernelGrid::new(grid, values, supports).expect("finite values")
    }

    /// Final forward error covariance `V_p`.
    pub fn one_step_error(&self) -> &Array2<f64> {
        self.error_covs.last().expect("at least order 0")
    }
}

impl PartialCorrelations for WhittleSolution {
    fn gamma_sequence(&self) -> Vec<Array2<f64>> {
        self.gammas.clone()
    }
}

/// Run the recursions up to the problem order.
///
/// Fails with [`Error::SingularErrorMatrix`] (carrying the failing order)
/// when either error covariance stops being invertible; no regularisation
/// is applied unless the problem requested the ridge.
pub fn solve_whittle(problem: &DiscretisedWh) -> Result<WhittleSolution> {
    let d = problem.dim();
    let p = problem.order();
    let dd = d * d;
    let g = problem.bin_covariances();
    let gblk = |k: usize| &g[k * dd..(k + 1) * dd];

    let mut a = vec![0.0f64; p * dd];
    let mut astar = vec![0.0f64; p * dd];
    let mut a_next = vec![0.0f64; p * dd];
    let mut astar_next = vec![0.0f64; p * dd];
    let mut v = gblk(0).to_vec();
    let mut vstar = gblk(0).to_vec();

    let mut delta = vec![0.0f64; dd];
    let mut delta_star = vec![0.0f64; dd];
    let mut v_inv = vec![0.0f64; dd];
    let mut vstar_inv = vec![0.0f64; dd];
    let mut work = vec![0.0f64; dd];
    let mut a_new = vec![0.0f64; dd];
    let mut astar_new = vec![0.0f64; dd];
    let mut factor = vec![0.0f64; dd];
    let mut tmp = vec![0.0f64; dd];

    let mut v_path = vec![to_array(&v, d)];
    let mut vstar_path = vec![to_array(&vstar, d)];
    let mut gammas = Vec::with_capacity(p);

    for n in 0..p {
        if !invert_to(&mut vstar_inv, &vstar, d, &mut work) {
            return Err(Error::SingularErrorMatrix { order: n });
        }
        if !invert_to(&mut v_inv, &v, d, &mut work) {
            return Err(Error::SingularErrorMatrix { order: n });
        }

        // Delta_n = G_{n+1} + sum_{k=1}^n A_{n,k} G_{n+1-k}
        delta.copy_from_slice(gblk(n + 1));
        for k in 1..=n {
            mul_acc(&mut delta, &a[(k - 1) * dd..k * dd], gblk(n + 1 - k), d);
        }
        // Delta*_n = G_{n+1}^T + sum_{k=1}^n A*_{n,k} G_{n+1-k}^T
        for i in 0..d {
            for j in 0..d {
                delta_star[i * d + j] = gblk(n + 1)[j * d + i];
            }
        }
        for k in 1..=n {
            mul_bt_acc(&mut delta_star, &astar[(k - 1) * dd..k * dd], gblk(n + 1 - k), d);
        }

        // reflection blocks
        mul_to(&mut a_new, &delta, &vstar_inv, d);
        for x in a_new.iter_mut() {
            *x = -*x;
        }
        mul_to(&mut astar_new, &delta_star, &v_inv, d);
        for x in astar_new.iter_mut() {
            *x = -*x;
        }

        // row updates
        for k in 1..=n {
            let dst = &mut a_next[(k - 1) * dd..k * dd];
            dst.copy_from_slice(&a[(k - 1) * dd..k * dd]);
            mul_acc(dst, &a_new, &astar[(n - k) * dd..(n - k + 1) * dd], d);
            let dst = &mut astar_next[(k - 1) * dd..k * dd];
            dst.copy_from_slice(&astar[(k - 1) * dd..k * dd]);
            mul_acc(dst, &astar_new, &a[(n - k) * dd..(n - k + 1) * dd], d);
        }
        a_next[n * dd..(n + 1) * dd].copy_from_slice(&a_new);
        astar_next[n * dd..(n + 1) * dd].copy_from_slice(&astar_new);
        std::mem::swap(&mut a, &mut a_next);
        std::mem::swap(&mut astar, &mut astar_next);

        // V_{n+1} = (I - A_new A*_new) V_n ; V*_{n+1} = (I - A*_new A_new) V*_n
        factor.fill(0.0);
        for i in 0..d {
            factor[i * d + i] = 1.0;
        }
        mul_sub(&mut factor, &a_new, &astar_new, d);
        mul_to(&mut tmp, &factor, &v, d);
        v.copy_from_slice(&tmp);

        factor.fill(0.0);
        for i in 0..d {
            factor[i * d + i] = 1.0;
        }
        mul_sub(&mut factor, &astar_new, &a_new, d);
        mul_to(&mut tmp, &factor, &vstar, d);
        vstar.copy_from_slice(&tmp);

        v_path.push(to_array(&v, d));
        vstar_path.push(to_array(&vstar, d));
        gammas.push(to_array(&a_new, d).mapv(|x| -x));
    }

    Ok(WhittleSolution {
        dim: d,
        delta: problem.delta(),
        forward: (0..p).map(|k| to_array(&a[k * dd..(k + 1) * dd], d)).collect(),
        backward: (0..p).map(|k| to_array(&astar[k * dd..(k + 1) * dd], d)).collect(),
        error_covs: v_path,
        backward_error_covs: vstar_path,
        gammas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{CovarianceGrid, LagGrid};
    use crate::lapack::sym_eigenvalues_arr;
    use crate::wh::synthetic_stationary_covariance;
    use crate::wh::{solve_direct, symmetrise, yule_walker_residual};

    /// AR(1) bin covariances `G_k = phi^|k|` via rates 0.4 and density
    /// values (0.6, 0.36, 0.216) at unit step.
    fn ar1_problem(p: usize) -> DiscretisedWh {
        let grid = LagGrid::new(1.0, p).unwrap();
        let phi = 0.6f64;
        let values: Vec<Array2<f64>> =
            (0..p).map(|k| Array2::from_elem((1, 1), phi.powi(k as i32 + 1))).collect();
        let cov = CovarianceGrid::new(grid, vec![1.0 - phi], values).unwrap();
        DiscretisedWh::new(cov, p).unwrap()
    }

    #[test]
    fn ar1_recovers_exact_coefficients() {
        // brute-force solutions of the 1x1/2x2/3x3 Yule-Walker systems for
        // G_k = 0.6^|k|: A_{1,1} = -0.6, higher orders vanish,
        // V_1 = V_2 = V_3 = 1 - 0.36 = 0.64
        let sol = solve_whittle(&ar1_problem(3)).unwrap();
        assert!((sol.forward[0][(0, 0)] + 0.6).abs() < 1e-12);
        assert!(sol.forward[1][(0, 0)].abs() < 1e-12);
        assert!(sol.forward[2][(0, 0)].abs() < 1e-12);
        assert!((sol.error_covs[0][(0, 0)] - 1.0).abs() < 1e-12);
        for k in 1..=3 {
            assert!((sol.error_covs[k][(0, 0)] - 0.64).abs() < 1e-12, "order {k}");
        }
        // partial correlations: Gamma_1 = phi, Gamma_k = 0 beyond
        assert!((sol.gammas[0][(0, 0)] - 0.6).abs() < 1e-12);
        assert!(sol.gammas[1][(0, 0)].abs() < 1e-12);
        assert!(sol.gammas[2][(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn white_noise_gives_zero_coefficients() {
        let grid = LagGrid::new(1.0, 4).unwrap();
        let values = vec![Array2::zeros((1, 1)); 4];
        let cov = CovarianceGrid::new(grid, vec![1.0], values).unwrap();
        let sol = solve_whittle(&DiscretisedWh::new(cov, 4).unwrap()).unwrap();
        for k in 0..4 {
            assert_eq!(sol.forward[k][(0, 0)], 0.0);
            assert_eq!(sol.gammas[k][(0, 0)], 0.0);
        }
        for v in &sol.error_covs {
            assert!((v[(0, 0)] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_dense_yule_walker_solve_d2() {
        let cov = synthetic_stationary_covariance(2, 6, 42);
        let problem = DiscretisedWh::new(cov, 6).unwrap();
        let rec = solve_whittle(&problem).unwrap().kernel(&problem);
        let dense = solve_direct(&problem).unwrap();
        for k in 0..6 {
            for i in 0..2 {
                for j in 0..2 {
                    let diff = (rec.values[k][(i, j)] - dense.values[k][(i, j)]).abs();
                    assert!(diff < 1e-8, "k {k} ({i},{j}): {diff}");
                }
            }
        }
    }

    #[test]
    fn residual_of_recursion_solution_is_tiny() {
        let cov = synthetic_stationary_covariance(2, 12, 7);
        let problem = DiscretisedWh::new(cov, 12).unwrap();
        let sol = solve_whittle(&problem).unwrap();
        let res = yule_walker_residual(&problem, &sol.kernel(&problem));
        assert!(res < 1e-8, "residual {res}");
    }

    #[test]
    fn error_covariances_are_monotone_in_loewner_order() {
        let cov = synthetic_stationary_covariance(2, 20, 11);
        let problem = DiscretisedWh::new(cov, 20).unwrap();
        let sol = solve_whittle(&problem).unwrap();
        for n in 1..sol.error_covs.len() {
            let diff = symmetrise(&(&sol.error_covs[n - 1] - &sol.error_covs[n]));
            let eigs = sym_eigenvalues_arr(&diff).unwrap();
            assert!(eigs[0] >= -1e-10, "order {n}: min eig {}", eigs[0]);
        }
    }

    /// Rank-one lag-zero block: rates (0.5, 0.5) and density chosen so
    /// `G_0 = [[1, 1], [1, 1]]`.
    fn rank_deficient_problem() -> DiscretisedWh {
        let grid = LagGrid::new(1.0, 2).unwrap();
        let v0 = ndarray::arr2(&[[0.5, 1.0], [1.0, 0.5]]);
        let values = vec![v0, Array2::zeros((2, 2))];
        let cov = CovarianceGrid::new(grid, vec![0.5, 0.5], values).unwrap();
        DiscretisedWh::new(cov, 2).unwrap()
    }

    #[test]
    fn singular_input_reports_failing_order() {
        match solve_whittle(&rank_deficient_problem()) {
            Err(Error::SingularErrorMatrix { order: 0 }) => {}
            other => panic!("expected SingularErrorMatrix at order 0, got {other:?}"),
        }
    }

    #[test]
    fn ridge_rescues_singular_lag_zero() {
        let problem = rank_deficient_problem().with_ridge(true);
        assert!(solve_whittle(&problem).is_ok());
    }
}
