//! Uniform lag grids and matrix functions sampled on them.
//!
//! All grids sample at midpoints `(k + 1/2) * delta`, `k = 0..p`. Midpoint
//! sampling keeps the covariance density away from the lag-zero atom
//! `diag(lambda_bar)`, which is carried separately and never folded into the
//! sampled values.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform lag grid: `p` midpoints `(k + 1/2) * delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagGrid {
    delta: f64,
    len: usize,
}

impl LagGrid {
    pub fn new(delta: f64, len: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        if len == 0 {
            return Err(Error::InvalidParameter("grid length must be >= 1".into()));
        }
        Ok(Self { delta, len })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Midpoint of bin `k`.
    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.delta
    }

    /// Total span `p * delta`.
    pub fn span(&self) -> f64 {
        self.len as f64 * self.delta
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|k| self.midpoint(k))
    }
}

/// A d-by-d matrix function sampled on a lag grid, with per-entry support
/// bounds `H[i][j]` (seconds). Entry `values[k]` approximates the function at
/// lag `(k + 1/2) * delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub grid: LagGrid,
    pub values: Vec<Array2<f64>>,
    pub supports: Array2<f64>,
}

impl KernelGrid {
    pub fn new(grid: LagGrid, values: Vec<Array2<f64>>, supports: Array2<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid of length {}",
                values.len(),
                grid.len()
            )));
        }
        let d = supports.nrows();
        if supports.ncols() != d {
            return Err(Error::InvalidParameter("supports must be square".into()));
        }
        for v in &values {
            if v.nrows() != d || v.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.nrows() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("kernel grid values"));
            }
        }
        let span = grid.span();
        if supports.iter().any(|&h| h > span + 1e-12 * span) {
            return Err(Error::InvalidParameter(format!(
                "kernel support exceeds grid span {span}"
            )));
        }
        Ok(Self { grid, values, supports })
    }

    pub fn dim(&self) -> usize {
        self.supports.nrows()
    }

    /// Piecewise-constant lookup: the value of bin `floor(t/delta)`, zero
    /// outside `[0, span)`.
    pub fn value_at(&self, t: f64) -> Array2<f64> {
        let d = self.dim();
        if t < 0.0 || t >= self.grid.span() {
            return Array2::zeros((d, d));
        }
        let k = ((t / self.grid.delta()) as usize).min(self.grid.len() - 1);
        self.values[k].clone()
    }

    /// Quadrature of the sampled function: `sum_k values[k] * delta`, the
    /// branching matrix when this grid holds a Hawkes kernel.
    pub fn integral(&self) -> Array2<f64> {
        let d = self.dim();
        let mut acc = Array2::zeros((d, d));
        for v in &self.values {
            acc += v;
        }
        acc * self.grid.delta()
    }

    /// Entrywise supremum norm over the grid.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let blob = GridJson::from_kernel(self);
        std::fs::write(path, serde_json::to_vec_pretty(&blob)?)?;
        Ok(())
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let blob: GridJson = serde_json::from_slice(&std::fs::read(path)?)?;
        blob.into_kernel()
    }
}

/// Sampled covariance density of a stationary d-variate process together
/// with the mean-rate vector.
///
/// Orientation: `values[k][(i, j)]` is the covariance density between a
/// mark-`i` event and a mark-`j` event occurring `(k + 1/2) * delta` LATER
/// (earlier mark indexes the row). Negative lags follow from the convention
/// `C(-tau) = C(tau)^T`. The lag-zero atom `diag(mean_rates)` is implicit and
/// never part of `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGrid {
    pub grid: LagGrid,
    pub mean_rates: Vec<f64>,
    pub values: Vec<Array2<f64>>,
}

impl CovarianceGrid {
    pub fn new(grid: LagGrid, mean_rates: Vec<f64>, values: Vec<Array2<f64>>) -> Result<Self> {
        let d = mean_rates.len();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        for (i, &r) in mean_rates.iter().enumerate() {
            if !(r > 0.0) {
                return Err(Error::NonPositiveRate { index: i, value: r });
            }
        }
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid of length {}",
                values.len(),
                grid.len()
            )));
        }
        for v in &values {
            if v.nrows() != d || v.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.nrows() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("covariance grid values"));
            }
        }
        Ok(Self { grid, mean_rates, values })
    }

    pub fn dim(&self) -> usize {
        self.mean_rates.len()
    }

    /// Solver-facing orientation at grid index `k`: `M(tau) = C(tau)^T`, the
    /// matrix whose row indexes the later coordinate.
    pub fn solver_value(&self, k: usize) -> Array2<f64> {
        self.values[k].t().to_owned()
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let blob = GridJson::from_covariance(self);
        std::fs::write(path, serde_json::to_vec_pretty(&blob)?)?;
        Ok(())
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let blob: GridJson = serde_json::from_slice(&std::fs::read(path)?)?;
        blob.into_covariance()
    }
}

/// Shared on-disk representation of kernel and covariance grids.
#[derive(Debug, Serialize, Deserialize)]
struct GridJson {
    delta: f64,
    p: usize,
    d: usize,
    /// Row-major d*d entries per lag bin.
    values: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_rates: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    supports: Option<Vec<f64>>,
}

impl GridJson {
    fn pack(values: &[Array2<f64>]) -> Vec<Vec<f64>> {
        values.iter().map(|v| v.iter().copied().collect()).collect()
    }

    fn unpack(raw: &[Vec<f64>], d: usize) -> Result<Vec<Array2<f64>>> {
        raw.iter()
            .map(|flat| {
                Array2::from_shape_vec((d, d), flat.clone())
                    .map_err(|e| Error::InvalidParameter(format!("bad matrix shape: {e}")))
            })
            .collect()
    }

    fn from_kernel(k: &KernelGrid) -> Self {
        Self {
            delta: k.grid.delta(),
            p: k.grid.len(),
            d: k.dim(),
            values: Self::pack(&k.values),
            mean_rates: None,
            supports: Some(k.supports.iter().copied().collect()),
        }
    }

    fn from_covariance(c: &CovarianceGrid) -> Self {
        Self {
            delta: c.grid.delta(),
            p: c.grid.len(),
            d: c.dim(),
            values: Self::pack(&c.values),
            mean_rates: Some(c.mean_rates.clone()),
            supports: None,
        }
    }

    fn into_kernel(self) -> Result<KernelGrid> {
        let grid = LagGrid::new(self.delta, self.p)?;
        let values = Self::unpack(&self.values, self.d)?;
        let supports = match self.supports {
            Some(flat) => Array2::from_shape_vec((self.d, self.d), flat)
                .map_err(|e| Error::InvalidParameter(format!("bad supports shape: {e}")))?,
            None => Array2::from_elem((self.d, self.d), grid.span()),
        };
        KernelGrid::new(grid, values, supports)
    }

    fn into_covariance(self) -> Result<CovarianceGrid> {
        let grid = LagGrid::new(self.delta, self.p)?;
        let values = Self::unpack(&self.values, self.d)?;
        let rates = self
            .mean_rates
            .ok_or_else(|| Error::InvalidParameter("covariance JSON lacks mean_rates".into()))?;
        CovarianceGrid::new(grid, rates, values)
    }
}
