//! Closed-form kernel specifications and sampling onto lag grids.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{KernelGrid, LagGrid};

/// A nonnegative scalar kernel on `[0, inf)` with compact support,
/// evaluable pointwise and with a closed-form integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarKernel {
    Zero,
    /// `amplitude * exp(-decay * t)` on `[0, support)`, zero beyond.
    Exponential { amplitude: f64, decay: f64, support: f64 },
    /// `height` on `[0, support)`, zero beyond.
    Indicator { height: f64, support: f64 },
    Sum(Vec<ScalarKernel>),
    Scaled { factor: f64, inner: Box<ScalarKernel> },
}

impl ScalarKernel {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { amplitude, decay, support } => {
                if t >= 0.0 && t < *support {
                    amplitude * (-decay * t).exp()
                } else {
                    0.0
                }
            }
            Self::Indicator { height, support } => {
                if t >= 0.0 && t < *support {
                    *height
                } else {
                    0.0
                }
            }
            Self::Sum(parts) => parts.iter().map(|k| k.eval(t)).sum(),
            Self::Scaled { factor, inner } => factor * inner.eval(t),
        }
    }

    /// Upper bound of the support (zero beyond).
    pub fn support(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { support, .. } | Self::Indicator { support, .. } => *support,
            Self::Sum(parts) => parts.iter().map(|k| k.support()).fold(0.0, f64::max),
            Self::Scaled { inner, .. } => inner.support(),
        }
    }

    /// Closed-form integral over `[0, inf)`.
    pub fn integral(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Exponential { amplitude, decay, support } => {
                if *decay == 0.0 {
                    amplitude * support
                } else {
                    amplitude / decay * (1.0 - (-decay * support).exp())
                }
            }
            Self::Indicator { height, support } => height * support,
            Self::Sum(parts) => parts.iter().map(|k| k.integral()).sum(),
            Self::Scaled { factor, inner } => factor * inner.integral(),
        }
    }

    /// A non-increasing majorant: `envelope(t) >= sup_{u >= t} eval(u)`.
    /// Used as the dominating rate in thinning, so it must never
    /// underestimate.
    pub fn envelope(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            // both closed forms are non-increasing on their support
            Self::Exponential { .. } | Self::Indicator { .. } => self.eval(t.max(0.0)),
            Self::Sum(parts) => parts.iter().map(|k| k.envelope(t)).sum(),
            Self::Scaled { factor, inner } => factor * inner.envelope(t),
        }
    }

    pub fn sup(&self) -> f64 {
        self.envelope(0.0)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Exponential { amplitude, decay, support } => {
                if *amplitude < 0.0 || !amplitude.is_finite() {
                    return Err(Error::InvalidParameter("amplitude must be >= 0".into()));
                }
                if !decay.is_finite() || !support.is_finite() || *support < 0.0 {
                    return Err(Error::InvalidParameter("bad decay/support".into()));
                }
                Ok(())
            }
            Self::Indicator { height, support } => {
                if *height < 0.0 || !height.is_finite() || *support < 0.0 {
                    return Err(Error::InvalidParameter("bad indicator kernel".into()));
                }
                Ok(())
            }
            Self::Sum(parts) => parts.iter().try_for_each(|k| k.validate()),
            Self::Scaled { factor, inner } => {
                if *factor < 0.0 || !factor.is_finite() {
                    return Err(Error::InvalidParameter("scale factor must be >= 0".into()));
                }
                inner.validate()
            }
        }
    }
}

/// A d-by-d matrix of scalar kernels, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixKernel {
    dim: usize,
    entries: Vec<ScalarKernel>,
}

impl MatrixKernel {
    pub fn new(dim: usize, entries: Vec<ScalarKernel>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::InvalidParameter(format!(
                "need {dim}x{dim} entries, got {}",
                entries.len()
            )));
        }
        entries.iter().try_for_each(|k| k.validate())?;
        Ok(Self { dim, entries })
    }

    pub fn scalar(kernel: ScalarKernel) -> Result<Self> {
        Self::new(1, vec![kernel])
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: vec![ScalarKernel::Zero; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarKernel {
        &self.entries[i * self.dim + j]
    }

    pub fn eval(&self, t: f64) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.entry(i, j).eval(t))
    }

    pub fn supports(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.entry(i, j).support())
    }

    pub fn max_support(&self) -> f64 {
        self.entries.iter().map(|k| k.support()).fold(0.0, f64::max)
    }

    /// Matrix of entrywise integrals; for a Hawkes kernel this is the
    /// branching matrix whose spectral radius decides stability.
    pub fn integral(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.entry(i, j).integral())
    }

    /// Non-increasing majorant of each entry at elapsed time `t`.
    pub fn envelope(&self, t: f64) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.entry(i, j).envelope(t))
    }

    /// Sum over two specs, entrywise.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| ScalarKernel::Sum(vec![a.clone(), b.clone()]))
            .collect();
        Self::new(self.dim, entries)
    }
}

/// Sample a closed-form kernel spec onto a lag grid: `values[k]` is the
/// matrix at the bin midpoint, and the per-entry supports are copied from
/// the spec. The grid must cover the support.
pub fn sample_kernel(spec: &MatrixKernel, grid: LagGrid) -> Result<KernelGrid> {
    if spec.max_support() > grid.span() + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "kernel support {} exceeds grid span {}",
            spec.max_support(),
            grid.span()
        )));
    }
    let values = grid.midpoints().map(|t| spec.eval(t)).collect();
    KernelGrid::new(grid, values, spec.supports())
}
