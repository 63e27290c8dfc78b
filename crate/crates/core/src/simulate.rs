//! Reproducible simulation of Poisson, Hawkes and Neyman-Scott streams.
//!
//! All generators are driven by ChaCha (8 rounds), a counter-based stream
//! cipher RNG with a fixed published algorithm, seeded from a single `u64`,
//! so identical seeds give bit-identical streams on every platform.
//!
//! Hawkes paths use Ogata-style thinning. The dominating rate is the
//! baseline plus, for every event still inside the kernel window, a
//! non-increasing majorant of its kernel column; the majorant cannot grow
//! between candidates, which keeps the thinning exact for grid kernels that
//! are not monotone. Stationarity is approximated by simulating on
//! `[-T_burn, T)` with `T_burn = 10 x max kernel support` and discarding the
//! burn-in.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::events::EventStream;
use crate::grids::KernelGrid;
use crate::kernels::MatrixKernel;
use crate::linalg::nonneg_spectral_radius;

/// Excitation kernel for a Hawkes model: a closed-form spec or a sampled
/// grid (evaluated by piecewise-constant lookup).
#[derive(Debug, Clone)]
pub enum HawkesKernel {
    Spec(MatrixKernel),
    Grid(KernelGrid),
}

impl HawkesKernel {
    pub fn dim(&self) -> usize {
        match self {
            Self::Spec(s) => s.dim(),
            Self::Grid(g) => g.dim(),
        }
    }

    pub fn max_support(&self) -> f64 {
        match self {
            Self::Spec(s) => s.max_support(),
            Self::Grid(g) => g.supports.iter().fold(0.0f64, |a, &h| a.max(h)),
        }
    }

    /// Branching matrix (entrywise integral of the kernel).
    pub fn branching(&self) -> Array2<f64> {
        match self {
            Self::Spec(s) => s.integral(),
            Self::Grid(g) => g.integral(),
        }
    }
}

/// Parameters of a multivariate Hawkes process: intensity
/// `lambda(t) = eta + sum_j int K_{.j}(t - s) N_j(ds)`, where column `j` of
/// `K` is the excitation caused by mark-`j` events.
#[derive(Debug, Clone)]
pub struct HawkesParams {
    pub baseline: Vec<f64>,
    pub kernel: HawkesKernel,
}

impl HawkesParams {
    pub fn new(baseline: Vec<f64>, kernel: HawkesKernel) -> Result<Self> {
        if baseline.len() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: baseline.len(),
            });
        }
        for (i, &b) in baseline.iter().enumerate() {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::NegativeRate { index: i, value: b });
            }
        }
        if !kernel.max_support().is_finite() {
            return Err(Error::InvalidParameter(
                "simulation requires a kernel with finite support".into(),
            ));
        }
        Ok(Self { baseline, kernel })
    }

    /// Spectral radius of the branching matrix; must be `< 1` for the
    /// process to be stable.
    pub fn branching_radius(&self) -> f64 {
        nonneg_spectral_radius(&self.kernel.branching(), 500)
    }

    /// Stationary mean rates `(I - int K)^{-1} eta`, via the Neumann series
    /// (valid in the stable regime).
    pub fn stationary_rates(&self) -> Result<Vec<f64>> {
        let radius = self.branching_radius();
        if radius >= 1.0 {
            return Err(Error::UnstableKernel { radius });
        }
        let d = self.baseline.len();
        let g = self.kernel.branching();
        let mut lam = self.baseline.clone();
        loop {
            let mut next = self.baseline.clone();
            for i in 0..d {
                for j in 0..d {
                    next[i] += g[(i, j)] * lam[j];
                }
            }
            let diff: f64 = next
                .iter()
                .zip(&lam)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            lam = next;
            if diff < 1e-14 {
                return Ok(lam);
            }
        }
    }
}

/// Parameters of a Neyman-Scott (Poisson cluster) process. A latent parent
/// of coordinate `i` at time `s` spawns, independently in each coordinate
/// `j`, an inhomogeneous Poisson cluster with intensity `shot[i][j](t - s)`
/// (parent coordinate indexes the ROW). Only the children are observed.
#[derive(Debug, Clone)]
pub struct NeymanScottParams {
    pub latent_rates: Vec<f64>,
    pub shot: MatrixKernel,
}

impl NeymanScottParams {
    pub fn new(latent_rates: Vec<f64>, shot: MatrixKernel) -> Result<Self> {
        if latent_rates.len() != shot.dim() {
            return Err(Error::DimensionMismatch {
                expected: shot.dim(),
                got: latent_rates.len(),
            });
        }
        for (i, &r) in latent_rates.iter().enumerate() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::NonPositiveRate { index: i, value: r });
            }
        }
        if !shot.max_support().is_finite() {
            return Err(Error::InvalidParameter("shot kernel must have finite support".into()));
        }
        Ok(Self { latent_rates, shot })
    }

    /// Mean rates of the observed process: `lambda_j = sum_i nu_i int shot[i][j]`.
    pub fn observed_rates(&self) -> Vec<f64> {
        let d = self.latent_rates.len();
        let mut lam = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                lam[j] += self.latent_rates[i] * self.shot.entry(i, j).integral();
            }
        }
        lam
    }
}

/// Simulated Neyman-Scott sample with the latent parent stream retained.
#[derive(Debug, Clone)]
pub struct NeymanScottSample {
    pub observed: EventStream,
    pub latent: EventStream,
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn exp_gap<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Homogeneous Poisson stream on `[0, T)` with the given per-coordinate
/// rates. Identical seeds produce identical streams.
pub fn simulate_poisson(rates: &[f64], horizon: f64, seed: u64) -> Result<EventStream> {
    for (i, &r) in rates.iter().enumerate() {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::NegativeRate { index: i, value: r });
        }
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidWindow(format!("T must be > 0, got {horizon}")));
    }
    let d = rates.len();
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    let total: f64 = rates.iter().sum();
    let mut times = Vec::new();
    let mut marks = Vec::new();
    if total > 0.0 {
        let mut rng = rng_for(seed);
        let mut t = 0.0f64;
        loop {
            t += exp_gap(&mut rng, total);
            if t >= horizon {
                break;
            }
            let pick: f64 = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut mark = d - 1;
            for (j, &r) in rates.iter().enumerate() {
                acc += r;
                if pick < acc {
                    mark = j;
                    break;
                }
            }
            times.push(t);
            marks.push(mark);
        }
    }
    EventStream::validate(times, marks, horizon, d)
}

/// Flat piecewise-constant view of a kernel used inside the thinning loop:
/// `values` at midpoint lookups and a non-increasing envelope.
struct KernelEval {
    d: usize,
    delta: f64,
    bins: usize,
    /// bins * d * d, row-major per bin
    values: Vec<f64>,
    /// suffix max per entry: a valid majorant of any later value
    envelope: Vec<f64>,
    support: f64,
}

impl KernelEval {
    fn build(kernel: &HawkesKernel, resolution: f64) -> Self {
        let d = kernel.dim();
        let support = kernel.max_support();
        match kernel {
            HawkesKernel::Grid(g) => {
                let bins = g.grid.len();
                let delta = g.grid.delta();
                let mut values = vec![0.0; bins * d * d];
                for (k, v) in g.values.iter().enumerate() {
                    for i in 0..d {
                        for j in 0..d {
                            values[(k * d + i) * d + j] = v[(i, j)];
                        }
                    }
                }
                let envelope = suffix_max(&values, bins, d);
                Self { d, delta, bins, values, envelope, support }
            }
            HawkesKernel::Spec(_) => {
                // Closed-form kernels are evaluated exactly; the envelope is
                // tabulated only to prune and bound (spec envelopes are
                // already non-increasing).
                let bins = if support > 0.0 {
                    ((support / resolution).ceil() as usize).max(1)
                } else {
                    0
                };
                Self {
                    d,
                    delta: resolution,
                    bins,
                    values: Vec::new(),
                    envelope: Vec::new(),
                    support,
                }
            }
        }
    }

    #[inline]
    fn add_value(&self, spec: Option<&MatrixKernel>, dt: f64, mark: usize, out: &mut [f64]) {
        if dt < 0.0 || dt >= self.support {
            return;
        }
        match spec {
            Some(s) => {
                for a in 0..self.d {
                    out[a] += s.entry(a, mark).eval(dt);
                }
            }
            None => {
                let k = ((dt / self.delta) as usize).min(self.bins - 1);
                for a in 0..self.d {
                    out[a] += self.values[(k * self.d + a) * self.d + mark];
                }
            }
        }
    }

    #[inline]
    fn envelope_colsum(&self, spec: Option<&MatrixKernel>, dt: f64, mark: usize) -> f64 {
        if dt < 0.0 || dt >= self.support {
            return 0.0;
        }
        match spec {
            Some(s) => (0..self.d).map(|a| s.entry(a, mark).envelope(dt)).sum(),
            None => {
                let k = ((dt / self.delta) as usize).min(self.bins - 1);
                (0..self.d)
                    .map(|a| self.envelope[(k * self.d + a) * self.d + mark])
                    .sum()
            }
        }
    }
}

fn suffix_max(values: &[f64], bins: usize, d: usize) -> Vec<f64> {
    let mut env = values.to_vec();
    for k in (0..bins.saturating_sub(1)).rev() {
        for e in 0..d * d {
            let here = k * d * d + e;
            let next = (k + 1) * d * d + e;
            if env[next] > env[here] {
                env[here] = env[next];
            }
        }
    }
    env
}

/// Multivariate Hawkes stream on `[0, T)` by thinning, with burn-in
/// discarded. Fails with [`Error::UnstableKernel`] (carrying the computed
/// spectral radius) when the branching matrix has radius `>= 1`.
pub fn simulate_hawkes(params: &HawkesParams, horizon: f64, seed: u64) -> Result<EventStream> {
    simulate_hawkes_inner(params, horizon, seed).map(|(s, _)| s)
}

/// As [`simulate_hawkes`], additionally recording the true conditional
/// intensity at the requested times (computed from the full pre-burn-in
/// history). Trace times must lie in `[0, T)`.
pub fn simulate_hawkes_traced(
    params: &HawkesParams,
    horizon: f64,
    seed: u64,
    trace_times: &[f64],
) -> Result<(EventStream, Vec<Vec<f64>>)> {
    let (stream, all_events) = simulate_hawkes_inner(params, horizon, seed)?;
    let eval = KernelEval::build(&params.kernel, 1e-3);
    let spec = match &params.kernel {
        HawkesKernel::Spec(s) => Some(s),
        HawkesKernel::Grid(_) => None,
    };
    let mut trace = Vec::with_capacity(trace_times.len());
    for &t in trace_times {
        if !(0.0..horizon).contains(&t) {
            return Err(Error::GridOutOfRange { time: t, lo: 0.0, hi: horizon });
        }
        let mut lam = params.baseline.clone();
        for &(u, mark) in &all_events {
            if u >= t {
                break;
            }
            eval.add_value(spec, t - u, mark, &mut lam);
        }
        trace.push(lam);
    }
    Ok((stream, trace))
}

fn simulate_hawkes_inner(
    params: &HawkesParams,
    horizon: f64,
    seed: u64,
) -> Result<(EventStream, Vec<(f64, usize)>)> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidWindow(format!("T must be > 0, got {horizon}")));
    }
    let radius = params.branching_radius();
    if radius >= 1.0 {
        return Err(Error::UnstableKernel { radius });
    }
    let d = params.baseline.len();
    let support = params.kernel.max_support();
    let t_burn = 10.0 * support;
    let window = t_burn + horizon;
    let eta_total: f64 = params.baseline.iter().sum();
    let eval = KernelEval::build(&params.kernel, 1e-3);
    let spec = match &params.kernel {
        HawkesKernel::Spec(s) => Some(s),
        HawkesKernel::Grid(_) => None,
    };

    let mut rng = rng_for(seed);
    // internal clock runs on [0, window); events stored pre-shift
    let mut events: Vec<(f64, usize)> = Vec::new();
    let mut active = 0usize; // first event still inside the kernel window
    let mut t = 0.0f64;
    let mut lam = vec![0.0f64; d];

    if eta_total > 0.0 || support > 0.0 {
        loop {
            while active < events.len() && t - events[active].0 >= support {
                active += 1;
            }
            let mut dom = eta_total;
            for &(u, mark) in &events[active..] {
                dom += eval.envelope_colsum(spec, t - u, mark);
            }
            if dom <= 0.0 {
                break;
            }
            let t_cand = t + exp_gap(&mut rng, dom);
            if t_cand >= window {
                break;
            }
            lam.copy_from_slice(&params.baseline);
            for &(u, mark) in &events[active..] {
                if u < t_cand {
                    eval.add_value(spec, t_cand - u, mark, &mut lam);
                }
            }
            let total: f64 = lam.iter().sum();
            let pick = rng.gen::<f64>() * dom;
            if pick < total {
                let mut acc = 0.0;
                let mut mark = d - 1;
                for (j, &l) in lam.iter().enumerate() {
                    acc += l;
                    if pick < acc {
                        mark = j;
                        break;
                    }
                }
                events.push((t_cand, mark));
            }
            t = t_cand;
        }
    }

    // shift out the burn-in; keep the full history for trace computation
    let shifted: Vec<(f64, usize)> =
        events.iter().map(|&(u, m)| (u - t_burn, m)).collect();
    let mut times = Vec::new();
    let mut marks = Vec::new();
    for &(u, m) in &shifted {
        if (0.0..horizon).contains(&u) {
            times.push(u);
            marks.push(m);
        }
    }
    let stream = EventStream::validate(times, marks, horizon, d)?;
    Ok((stream, shifted))
}

/// Neyman-Scott cluster stream on `[0, T)`; only the children are returned.
pub fn simulate_neyman_scott(
    params: &NeymanScottParams,
    horizon: f64,
    seed: u64,
) -> Result<EventStream> {
    simulate_neyman_scott_parts(params, horizon, seed).map(|s| s.observed)
}

/// As [`simulate_neyman_scott`], additionally returning the latent parent
/// stream (clipped to `[0, T)`) for diagnostics.
pub fn simulate_neyman_scott_parts(
    params: &NeymanScottParams,
    horizon: f64,
    seed: u64,
) -> Result<NeymanScottSample> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidWindow(format!("T must be > 0, got {horizon}")));
    }
    let d = params.latent_rates.len();
    // parents earlier than the support cannot contribute children in [0, T)
    let lead = params.shot.max_support();
    let window = lead + horizon;
    let mut rng = rng_for(seed);

    // latent parents, jointly over coordinates, in time order
    let total: f64 = params.latent_rates.iter().sum();
    let mut parents: Vec<(f64, usize)> = Vec::new();
    let mut t = 0.0f64;
    loop {
        t += exp_gap(&mut rng, total);
        if t >= window {
            break;
        }
        let pick: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut mark = d - 1;
        for (j, &r) in params.latent_rates.iter().enumerate() {
            acc += r;
            if pick < acc {
                mark = j;
                break;
            }
        }
        parents.push((t - lead, mark));
    }

    // children: per parent, per target coordinate, thinning against the sup
    let mut children: Vec<(f64, usize)> = Vec::new();
    for &(s, i) in &parents {
        for j in 0..d {
            let entry = params.shot.entry(i, j);
            let sup = entry.sup();
            if sup <= 0.0 {
                continue;
            }
            let sup_t = entry.support();
            let mut u = 0.0f64;
            loop {
                u += exp_gap(&mut rng, sup);
                if u >= sup_t {
                    break;
                }
                if rng.gen::<f64>() * sup < entry.eval(u) {
                    let ct = s + u;
                    if (0.0..horizon).contains(&ct) {
                        children.push((ct, j));
                    }
                }
            }
        }
    }
    children.sort_by(|a, b| a.0.total_cmp(&b.0));

    let observed = EventStream::validate(
        children.iter().map(|&(t, _)| t).collect(),
        children.iter().map(|&(_, m)| m).collect(),
        horizon,
        d,
    )?;
    let mut lt = Vec::new();
    let mut lm = Vec::new();
    for &(s, i) in &parents {
        if (0.0..horizon).contains(&s) {
            lt.push(s);
            lm.push(i);
        }
    }
    let latent = EventStream::validate(lt, lm, horizon, d)?;
    Ok(NeymanScottSample { observed, latent })
}
