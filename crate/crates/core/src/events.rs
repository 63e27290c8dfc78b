//! Event streams: sorted, marked event times on a finite observation window.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A realisation of a d-variate simple point process on `[0, T)`.
///
/// Times are strictly increasing, marks are dense integers in `0..d`. The
/// window is half-open: an event at exactly `t == T` is rejected. Instances
/// are immutable after construction and cheap to share.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    times: Vec<f64>,
    marks: Vec<usize>,
    horizon: f64,
    dim: usize,
}

/// Sidecar metadata stored next to the CSV event file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamMeta {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub d: usize,
}

impl EventStream {
    /// Validate raw data and build a stream.
    ///
    /// Errors: [`Error::NonIncreasingTimes`] on a duplicate or out-of-order
    /// time, [`Error::MarkOutOfRange`], [`Error::TimeOutOfWindow`] (window is
    /// `[0, T)`, so `t == T` is rejected).
    pub fn validate(times: Vec<f64>, marks: Vec<usize>, horizon: f64, dim: usize) -> Result<Self> {
        if !(horizon > 0.0) || horizon.is_nan() {
            return Err(Error::InvalidWindow(format!("T must be > 0, got {horizon}")));
        }
        if dim == 0 {
            return Err(Error::InvalidWindow("d must be >= 1".into()));
        }
        if times.len() != marks.len() {
            return Err(Error::InvalidWindow(format!(
                "{} times vs {} marks",
                times.len(),
                marks.len()
            )));
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 || t >= horizon {
                return Err(Error::TimeOutOfWindow { index: i, time: t, horizon });
            }
            if i > 0 && t <= times[i - 1] {
                return Err(Error::NonIncreasingTimes { index: i });
            }
        }
        for (i, &m) in marks.iter().enumerate() {
            if m >= dim {
                return Err(Error::MarkOutOfRange { index: i, mark: m as i64, dim });
            }
        }
        Ok(Self { times, marks, horizon, dim })
    }

    /// Re-anchor raw data recorded on a window `[t0, t1)` to `[0, t1 - t0)`.
    pub fn validate_with_origin(
        times: Vec<f64>,
        marks: Vec<usize>,
        t0: f64,
        t1: f64,
        dim: usize,
    ) -> Result<Self> {
        let shifted = times.into_iter().map(|t| t - t0).collect();
        Self::validate(shifted, marks, t1 - t0, dim)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn marks(&self) -> &[usize] {
        &self.marks
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Events as `(time, mark)` pairs in time order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.times.iter().copied().zip(self.marks.iter().copied())
    }

    /// Number of events per mark.
    pub fn counts_per_mark(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.dim];
        for &m in &self.marks {
            counts[m] += 1;
        }
        counts
    }

    /// Bin counts on a regular grid of width `delta`: entry `(b, j)` is the
    /// number of mark-`j` events with time in `[b*delta, (b+1)*delta)`. The
    /// matrix has `ceil(T/delta)` rows.
    pub fn bin_counts(&self, delta: f64) -> Result<Vec<Vec<u64>>> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        let nbins = (self.horizon / delta).ceil() as usize;
        let mut out = vec![vec![0u64; self.dim]; nbins.max(1)];
        if self.horizon <= delta && nbins == 0 {
            return Ok(out);
        }
        for (&t, &m) in self.times.iter().zip(&self.marks) {
            let b = ((t / delta) as usize).min(nbins - 1);
            out[b][m] += 1;
        }
        Ok(out)
    }

    /// Write the stream as `time,mark` CSV plus a JSON sidecar with the
    /// window metadata. `path` is the CSV path; the sidecar replaces the
    /// extension with `.meta.json`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["time", "mark"])?;
        for (t, m) in self.iter() {
            w.write_record(&[format!("{t}"), format!("{m}")])?;
        }
        w.flush()?;
        let meta = StreamMeta { horizon: self.horizon, d: self.dim };
        let sidecar = sidecar_path(path);
        std::fs::write(sidecar, serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    /// Read a stream written by [`EventStream::write_csv`].
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let meta: StreamMeta =
            serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
        let mut r = csv::Reader::from_path(path)?;
        let mut times = Vec::new();
        let mut marks = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let t: f64 = rec
                .get(0)
                .ok_or_else(|| Error::InvalidParameter("missing time column".into()))?
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("bad time: {e}")))?;
            let m: usize = rec
                .get(1)
                .ok_or_else(|| Error::InvalidParameter("missing mark column".into()))?
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("bad mark: {e}")))?;
            times.push(t);
            marks.push(m);
        }
        Self::validate(times, marks, meta.horizon, meta.d)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension("meta.json");
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_sorted_stream() {
        let s = EventStream::validate(vec![0.5, 1.2], vec![0, 1], 2.0, 2).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn rejects_duplicate_times() {
        let err = EventStream::validate(vec![1.0, 1.0], vec![0, 0], 2.0, 1).unwrap_err();
        assert!(matches!(err, Error::NonIncreasingTimes { index: 1 }));
    }

    #[test]
    fn rejects_mark_out_of_range() {
        let err = EventStream::validate(vec![0.5], vec![3], 2.0, 2).unwrap_err();
        assert!(matches!(err, Error::MarkOutOfRange { mark: 3, .. }));
    }

    #[test]
    fn rejects_event_at_horizon() {
        // window is half-open
        let err = EventStream::validate(vec![2.0], vec![0], 2.0, 1).unwrap_err();
        assert!(matches!(err, Error::TimeOutOfWindow { .. }));
    }

    #[test]
    fn validate_is_idempotent() {
        let s = EventStream::validate(vec![0.5, 1.2, 1.9], vec![0, 1, 0], 2.0, 2).unwrap();
        let s2 =
            EventStream::validate(s.times().to_vec(), s.marks().to_vec(), s.horizon(), s.dim())
                .unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn bin_counts_empty_stream() {
        let s = EventStream::validate(vec![], vec![], 1.0, 2).unwrap();
        let b = s.bin_counts(0.5).unwrap();
        assert_eq!(b, vec![vec![0, 0], vec![0, 0]]);
    }

    #[test]
    fn bin_counts_single_event() {
        let s = EventStream::validate(vec![0.3], vec![0], 1.0, 2).unwrap();
        let b = s.bin_counts(0.5).unwrap();
        assert_eq!(b[0], vec![1, 0]);
        assert_eq!(b[1], vec![0, 0]);
    }

    #[test]
    fn bin_counts_totals_match_event_count() {
        let times: Vec<f64> = (0..37).map(|i| 0.07 + i as f64 * 0.26).collect();
        let horizon = 10.0;
        let marks: Vec<usize> = (0..37).map(|i| i % 3).collect();
        let s = EventStream::validate(times, marks, horizon, 3).unwrap();
        for delta in [0.3, 0.5, 1.0, 7.0, 20.0] {
            let b = s.bin_counts(delta).unwrap();
            let total: u64 = b.iter().flatten().sum();
            assert_eq!(total as usize, s.len(), "delta {delta}");
            // column sums equal per-mark counts
            let per_mark = s.counts_per_mark();
            for j in 0..3 {
                let col: u64 = b.iter().map(|row| row[j]).sum();
                assert_eq!(col as usize, per_mark[j]);
            }
        }
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = EventStream::validate(vec![0.125, 1.75], vec![1, 0], 3.5, 2).unwrap();
        s.write_csv(&path).unwrap();
        let back = EventStream::read_csv(&path).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn origin_reanchoring() {
        let s = EventStream::validate_with_origin(vec![10.5, 11.25], vec![0, 0], 10.0, 12.0, 1)
            .unwrap();
        assert_eq!(s.times(), &[0.5, 1.25]);
        assert_eq!(s.horizon(), 2.0);
    }
}
