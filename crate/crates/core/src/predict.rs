//! Assembling and scoring best linear unbiased predictors.
//!
//! A predictor carries either the autoregressive form (a kernel weighting
//! past EVENTS) or the moving-average form (innovation weights applied to
//! binned residuals `N(bin) - lambda_hat * dt` fed back recursively). The
//! intercept makes it unbiased: for the AR form
//!
//! ```text
//! intercept_i = rate_i - sum_j (int K)_ij rate_j
//! ```
//!
//! with the kernel integral taken by the same quadrature the solvers use;
//! for the MA form the innovations are centred, so the intercept is the
//! mean rate itself.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventStream;
use crate::grids::KernelGrid;
use crate::innovations::InnovationsSolution;

#[derive(Debug, Clone)]
pub enum PredictorForm {
    Ar(KernelGrid),
    Ma(InnovationsSolution),
}

#[derive(Debug, Clone)]
pub struct Predictor {
    form: PredictorForm,
    intercept: Vec<f64>,
    mean_rates: Vec<f64>,
}

/// Build the unbiased AR-form predictor from a kernel and mean rates.
pub fn assemble_predictor(kernel: KernelGrid, mean_rates: Vec<f64>) -> Result<Predictor> {
    let d = kernel.dim();
    if mean_rates.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: mean_rates.len() });
    }
    for (i, &r) in mean_rates.iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::NonPositiveRate { index: i, value: r });
        }
    }
    let g = kernel.integral();
    let intercept: Vec<f64> = (0..d)
        .map(|i| mean_rates[i] - (0..d).map(|j| g[(i, j)] * mean_rates[j]).sum::<f64>())
        .collect();
    Ok(Predictor { form: PredictorForm::Ar(kernel), intercept, mean_rates })
}

impl Predictor {
    /// AR-form predictor with an explicitly supplied intercept, for the
    /// case where the generative baseline is known exactly.
    pub fn from_parts(
        kernel: KernelGrid,
        mean_rates: Vec<f64>,
        intercept: Vec<f64>,
    ) -> Result<Self> {
        let d = kernel.dim();
        if mean_rates.len() != d || intercept.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: intercept.len() });
        }
        Ok(Self { form: PredictorForm::Ar(kernel), intercept, mean_rates })
    }

    /// MA-form predictor; innovations are centred so the intercept is the
    /// mean rate vector.
    pub fn moving_average(solution: InnovationsSolution, mean_rates: Vec<f64>) -> Result<Self> {
        let d = solution.dim();
        if mean_rates.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mean_rates.len() });
        }
        for (i, &r) in mean_rates.iter().enumerate() {
            if !(r > 0.0) {
                return Err(Error::NonPositiveRate { index: i, value: r });
            }
        }
        Ok(Self { form: PredictorForm::Ma(solution), intercept: mean_rates.clone(), mean_rates })
    }

    pub fn dim(&self) -> usize {
        self.mean_rates.len()
    }

    pub fn intercept(&self) -> &[f64] {
        &self.intercept
    }

    pub fn mean_rates(&self) -> &[f64] {
        &self.mean_rates
    }

    pub fn form(&self) -> &PredictorForm {
        &self.form
    }

    /// Left edge of the usable evaluation window: past the declared kernel
    /// support for the AR form (cold-start region), zero for the MA form.
    pub fn eval_window_start(&self) -> f64 {
        match &self.form {
            PredictorForm::Ar(k) => k.supports.iter().fold(0.0f64, |a, &h| a.max(h)),
            PredictorForm::Ma(_) => 0.0,
        }
    }

    /// Predicted intensity at each requested time (strictly causal: events
    /// at exactly `t` do not contribute). Times must be ascending and lie
    /// in `(eval_window_start, T]`.
    pub fn intensity(&self, stream: &EventStream, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        if stream.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: stream.dim() });
        }
        let lo = self.eval_window_start();
        let hi = stream.horizon();
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter("evaluation times must be ascending".into()));
            }
        }
        for &t in times {
            if !(t > lo && t <= hi) {
                return Err(Error::GridOutOfRange { time: t, lo, hi });
            }
        }
        match &self.form {
            PredictorForm::Ar(kernel) => Ok(self.intensity_ar(kernel, stream, times)),
            PredictorForm::Ma(sol) => Ok(self.intensity_ma(sol, stream, times)),
        }
    }

    fn intensity_ar(
        &self,
        kernel: &KernelGrid,
        stream: &EventStream,
        times: &[f64],
    ) -> Vec<Vec<f64>> {
        let span = kernel.grid.span();
        let delta = kernel.grid.delta();
        let bins = kernel.grid.len();
        let ev_times = stream.times();
        let ev_marks = stream.marks();
        let mut start = 0usize;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            while start < ev_times.len() && t - ev_times[start] >= span {
                start += 1;
            }
            let mut lam = self.intercept.clone();
            for idx in start..ev_times.len() {
                let u = ev_times[idx];
                if u >= t {
                    break;
                }
                let k = (((t - u) / delta) as usize).min(bins - 1);
                let block = &kernel.values[k];
                let mark = ev_marks[idx];
                for (a, l) in lam.iter_mut().enumerate() {
                    *l += block[(a, mark)];
                }
            }
            out.push(lam);
        }
        out
    }

    fn intensity_ma(
        &self,
        sol: &InnovationsSolution,
        stream: &EventStream,
        times: &[f64],
    ) -> Vec<Vec<f64>> {
        let d = self.dim();
        let dt = sol.delta();
        let last_bin = times.last().map(|&t| (t / dt) as usize).unwrap_or(0);
        let counts = stream.bin_counts(dt).expect("dt > 0");
        // residual recursion over bins 0..=last_bin
        let mut lam_bins: Vec<Vec<f64>> = Vec::with_capacity(last_bin + 1);
        let mut resid: Vec<Vec<f64>> = Vec::with_capacity(last_bin + 1);
        for b in 0..=last_bin {
            let rows = sol.steps();
            let row_t = b.min(rows);
            let mut lam = self.mean_rates.clone();
            if row_t > 0 {
                let row = &sol.rows[row_t - 1];
                for j in 1..=row_t {
                    let eps = &resid[b - j];
                    let theta = &row[j - 1];
                    for (a, l) in lam.iter_mut().enumerate() {
                        for c in 0..d {
                            *l += theta[(a, c)] * eps[c] / dt;
                        }
                    }
                }
            }
            let mut eps = vec![0.0f64; d];
            if b < counts.len() {
                for c in 0..d {
                    eps[c] = counts[b][c] as f64 - lam[c] * dt;
                }
            }
            resid.push(eps);
            lam_bins.push(lam);
        }
        times.iter().map(|&t| lam_bins[((t / dt) as usize).min(last_bin)].clone()).collect()
    }
}

/// Bin-start evaluation times for a horizon: the first full bin after
/// `start_after`, then every `delta_eval` while the bin fits in the window.
pub fn evaluation_times(horizon: f64, delta_eval: f64, start_after: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut b = (start_after / delta_eval).floor() as i64 + 1;
    if b < 0 {
        b = 0;
    }
    loop {
        let t = b as f64 * delta_eval;
        if t + delta_eval > horizon {
            break;
        }
        if t > start_after {
            out.push(t);
        }
        b += 1;
    }
    out
}

/// Per-coordinate scores aggregated over streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinateScore {
    /// mean over streams of the time-averaged predicted intensity
    pub mean_intensity: f64,
    pub mean_intensity_se: f64,
    /// mean over streams of (time-averaged prediction - observed rate)
    pub bias: f64,
    pub bias_se: f64,
    /// MSE of `lambda_hat * delta_eval` against bin counts, per bin
    pub count_mse_per_bin: f64,
    pub count_mse_per_bin_se: f64,
    /// the same, divided by `delta_eval`
    pub count_mse_per_time: f64,
    /// MSE against the true intensity when a trace is supplied
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_intensity_mse: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport {
    pub delta_eval: f64,
    pub n_streams: usize,
    /// evaluation starts strictly after this time
    pub start_after: f64,
    pub per_coordinate: Vec<CoordinateScore>,
}

impl ScoreReport {
    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// Score a predictor against event streams on an evaluation grid of width
/// `delta_eval`. Optional `traces` supply the true intensity per stream at
/// exactly the evaluation times (see [`evaluation_times`]).
pub fn evaluate_predictor(
    pred: &Predictor,
    streams: &[EventStream],
    delta_eval: f64,
    traces: Option<&[Vec<Vec<f64>>]>,
) -> Result<ScoreReport> {
    if streams.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(delta_eval > 0.0) {
        return Err(Error::InvalidParameter(format!("delta_eval {delta_eval} must be > 0")));
    }
    if let Some(tr) = traces {
        if tr.len() != streams.len() {
            return Err(Error::DimensionMismatch { expected: streams.len(), got: tr.len() });
        }
    }
    let d = pred.dim();
    let start_after = pred.eval_window_start();
    let r = streams.len();

    // per-stream statistics
    let mut avg_lambda = vec![vec![0.0f64; r]; d];
    let mut bias = vec![vec![0.0f64; r]; d];
    let mut mse_bin = vec![vec![0.0f64; r]; d];
    let mut mse_true = vec![vec![0.0f64; r]; d];
    let have_traces = traces.is_some();

    for (s, stream) in streams.iter().enumerate() {
        let times = evaluation_times(stream.horizon(), delta_eval, start_after);
        if times.is_empty() {
            return Err(Error::InvalidParameter(
                "no full evaluation bins inside the stream window".into(),
            ));
        }
        let lam = pred.intensity(stream, &times)?;
        if let Some(tr) = traces {
            if tr[s].len() != times.len() {
                return Err(Error::DimensionMismatch {
                    expected: times.len(),
                    got: tr[s].len(),
                });
            }
        }
        // observed counts per evaluation bin
        let mut counts = vec![vec![0u64; d]; times.len()];
        {
            let mut idx = 0usize;
            for (&t0, row) in times.iter().zip(counts.iter_mut()) {
                while idx < stream.len() && stream.times()[idx] < t0 {
                    idx += 1;
                }
                let mut j = idx;
                while j < stream.len() && stream.times()[j] < t0 + delta_eval {
                    row[stream.marks()[j]] += 1;
                    j += 1;
                }
            }
        }
        let nb = times.len() as f64;
        for a in 0..d {
            let mean_lam: f64 = lam.iter().map(|v| v[a]).sum::<f64>() / nb;
            let obs_rate: f64 =
                counts.iter().map(|c| c[a] as f64).sum::<f64>() / (nb * delta_eval);
            avg_lambda[a][s] = mean_lam;
            bias[a][s] = mean_lam - obs_rate;
            mse_bin[a][s] = lam
                .iter()
                .zip(&counts)
                .map(|(v, c)| {
                    let e = v[a] * delta_eval - c[a] as f64;
                    e * e
                })
                .sum::<f64>()
                / nb;
            if let Some(tr) = traces {
                mse_true[a][s] = lam
                    .iter()
                    .zip(&tr[s])
                    .map(|(v, w)| (v[a] - w[a]) * (v[a] - w[a]))
                    .sum::<f64>()
                    / nb;
            }
        }
    }

    let mean_se = |xs: &[f64]| -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return (mean, 0.0);
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };

    let per_coordinate = (0..d)
        .map(|a| {
            let (mi, mi_se) = mean_se(&avg_lambda[a]);
            let (b, b_se) = mean_se(&bias[a]);
            let (m, m_se) = mean_se(&mse_bin[a]);
            let tm = if have_traces { Some(mean_se(&mse_true[a]).0) } else { None };
            CoordinateScore {
                mean_intensity: mi,
                mean_intensity_se: mi_se,
                bias: b,
                bias_se: b_se,
                count_mse_per_bin: m,
                count_mse_per_bin_se: m_se,
                count_mse_per_time: m / delta_eval,
                true_intensity_mse: tm,
            }
        })
        .collect();

    Ok(ScoreReport { delta_eval, n_streams: r, start_after, per_coordinate })
}

/// Per-time CSV export `t,coordinate,lambda_hat[,lambda_true]`.
pub fn write_intensity_csv<P: AsRef<Path>>(
    path: P,
    times: &[f64],
    lambda_hat: &[Vec<f64>],
    lambda_true: Option<&[Vec<f64>]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if lambda_true.is_some() {
        w.write_record(["t", "coordinate", "lambda_hat", "lambda_true"])?;
    } else {
        w.write_record(["t", "coordinate", "lambda_hat"])?;
    }
    for (i, &t) in times.iter().enumerate() {
        for a in 0..lambda_hat[i].len() {
            match lambda_true {
                Some(tr) => w.write_record(&[
                    format!("{t}"),
                    format!("{a}"),
                    format!("{}", lambda_hat[i][a]),
                    format!("{}", tr[i][a]),
                ])?,
                None => w.write_record(&[
                    format!("{t}"),
                    format!("{a}"),
                    format!("{}", lambda_hat[i][a]),
                ])?,
            }
        }
    }
    w.flush()?;
    Ok(())
}
