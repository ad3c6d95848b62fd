//! Stationary/moving segmentation of acceleration magnitude streams and the
//! cut of the WiFi stream into stationary segments.
//!
//! A sliding window runs over the magnitude series; each window is labelled
//! moving when its statistic (energy or sample variance) exceeds a threshold.
//! Consecutive same-label windows merge into alternating intervals whose
//! parity encodes the label: the interval starting at boundary `i` is
//! stationary for even `i`, moving for odd `i`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AccelObservation, WifiDataset, WifiObservation};

/// Default minimum duration of a usable stationary segment (10 s).
pub const DEFAULT_MIN_SEGMENT_MS: i64 = 10_000;

/// Statistic computed over one acceleration window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStatistic {
    /// Mean of squared mean-removed magnitudes (biased variance). Removing
    /// the window mean discards the gravity offset, so quiet windows score
    /// near zero regardless of orientation.
    Energy,
    /// Unbiased sample variance of the magnitudes.
    Variance,
}

/// Sliding-window configuration for motion classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub window_ms: i64,
    pub hop_ms: i64,
    pub statistic: WindowStatistic,
    /// Decision threshold in the statistic's units, (m/s²)².
    pub threshold: f64,
    /// Permit an empty acceleration series, treating the WiFi span as one
    /// stationary segment.
    pub assume_stationary_when_no_accel: bool,
}

impl Default for WindowConfig {
    fn default() -> WindowConfig {
        WindowConfig {
            window_ms: 2000,
            hop_ms: 1000,
            statistic: WindowStatistic::Energy,
            threshold: 0.5,
            assume_stationary_when_no_accel: false,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop_ms <= 0 || self.hop_ms > self.window_ms {
            return Err(Error::Config(format!(
                "window hop must satisfy 0 < hop ≤ window_len, got hop {} window {}",
                self.hop_ms, self.window_ms
            )));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::Config(format!(
                "motion threshold must be ≥ 0, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Alternating segmentation of time into stationary and moving intervals.
///
/// The interval `[boundaries[i], boundaries[i+1])` is stationary when `i` is
/// even and moving when `i` is odd. Boundaries are non-decreasing; a
/// zero-length stationary prefix appears when the series starts in motion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotionSegmentation {
    pub boundaries: Vec<i64>,
    /// Number of windows that inherited their label because they held fewer
    /// than three samples (sensor gaps); recorded so runs over gappy data are
    /// distinguishable in output metadata.
    pub inherited_windows: usize,
}

impl MotionSegmentation {
    /// Intervals as `(start, end, is_stationary)` triples.
    pub fn intervals(&self) -> impl Iterator<Item = (i64, i64, bool)> + '_ {
        self.boundaries
            .windows(2)
            .enumerate()
            .map(|(i, pair)| (pair[0], pair[1], i % 2 == 0))
    }

    pub fn stationary_intervals(&self) -> Vec<(i64, i64)> {
        self.intervals()
            .filter(|&(_, _, stat)| stat)
            .map(|(a, b, _)| (a, b))
            .collect()
    }
}

/// A maximal run of WiFi observations inside one stationary interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WifiSegment {
    pub segment_id: usize,
    pub device: String,
    /// Inclusive start of the interval, ms.
    pub start_ms: i64,
    /// Exclusive end of the interval, ms.
    pub end_ms: i64,
    pub observations: Vec<WifiObservation>,
}

/// Compute the statistic of one window of magnitude samples.
pub fn window_statistic(samples: &[f64], statistic: WindowStatistic) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Validation(
            "window statistic of an empty sample list".into(),
        ));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sum_sq: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    Ok(match statistic {
        WindowStatistic::Energy => sum_sq / n,
        WindowStatistic::Variance => {
            if samples.len() < 2 {
                0.0
            } else {
                sum_sq / (n - 1.0)
            }
        }
    })
}

/// Segment an acceleration series into alternating stationary/moving
/// intervals.
///
/// `wifi_span` supplies the fallback interval `(first, last)` used when the
/// series is empty and the config permits assuming a stationary device.
///
/// Windows advance by `hop_ms` from the first sample; a window is moving iff
/// its statistic strictly exceeds the threshold, and windows with fewer than
/// three samples inherit the previous window's label (stationary initially).
/// A stationary→moving transition is placed at the first moving window's
/// start plus `window_ms − hop_ms` (motion begins near the end of the first
/// window that flags it); a moving→stationary transition at the first
/// stationary window's start. The outermost boundaries are the first and
/// last sample timestamps.
pub fn segment_motion(
    accel: &[AccelObservation],
    wifi_span: Option<(i64, i64)>,
    cfg: &WindowConfig,
) -> Result<MotionSegmentation> {
    cfg.validate()?;
    if accel.is_empty() {
        if cfg.assume_stationary_when_no_accel {
            let (start, end) = wifi_span.ok_or_else(|| {
                Error::Validation(
                    "no acceleration data and no WiFi span to fall back on".into(),
                )
            })?;
            return Ok(MotionSegmentation {
                boundaries: vec![start, end],
                inherited_windows: 0,
            });
        }
        return Err(Error::Validation(
            "empty acceleration series (set assume_stationary_when_no_accel to treat the \
             WiFi span as stationary)"
                .into(),
        ));
    }
    if accel.windows(2).any(|w| w[0].timestamp_ms > w[1].timestamp_ms) {
        return Err(Error::Validation(
            "acceleration series is not sorted by timestamp".into(),
        ));
    }
    if accel.windows(2).any(|w| w[0].device != w[1].device) {
        return Err(Error::Validation(
            "acceleration series spans multiple devices; restrict to one first".into(),
        ));
    }

    let t_first = accel[0].timestamp_ms;
    let t_last = accel[accel.len() - 1].timestamp_ms;

    // Label every window; a window covers [start, start + window_ms).
    let mut labels: Vec<bool> = Vec::new(); // true = moving
    let mut inherited = 0usize;
    let mut lo = 0usize; // first sample index with timestamp ≥ window start
    let mut window_start = t_first;
    while window_start <= t_last {
        while lo < accel.len() && accel[lo].timestamp_ms < window_start {
            lo += 1;
        }
        let mut hi = lo;
        while hi < accel.len() && accel[hi].timestamp_ms < window_start + cfg.window_ms {
            hi += 1;
        }
        let label = if hi - lo < 3 {
            inherited += 1;
            labels.last().copied().unwrap_or(false)
        } else {
            let magnitudes: Vec<f64> = accel[lo..hi].iter().map(|a| a.magnitude).collect();
            window_statistic(&magnitudes, cfg.statistic)? > cfg.threshold
        };
        labels.push(label);
        window_start += cfg.hop_ms;
    }

    let mut boundaries = vec![t_first];
    if labels[0] {
        boundaries.push(t_first); // zero-length stationary prefix
    }
    for (k, pair) in labels.windows(2).enumerate() {
        let (prev, next) = (pair[0], pair[1]);
        if prev == next {
            continue;
        }
        let next_start = t_first + (k as i64 + 1) * cfg.hop_ms;
        let boundary = if next {
            // stationary → moving: motion entered during the first moving
            // window, i.e. after the part already covered by the previous one.
            next_start + (cfg.window_ms - cfg.hop_ms)
        } else {
            // moving → stationary: quiet from this window's start on.
            next_start
        };
        boundaries.push(boundary.clamp(t_first, t_last));
    }
    boundaries.push(t_last);
    Ok(MotionSegmentation {
        boundaries,
        inherited_windows: inherited,
    })
}

/// Cut the (single-device) WiFi stream along the stationary intervals of the
/// segmentation, keeping intervals of at least `min_duration_ms` that contain
/// at least one observation. Observations are assigned by
/// `start ≤ t < end`.
pub fn extract_stationary_segments(
    ds: &WifiDataset,
    seg: &MotionSegmentation,
    min_duration_ms: i64,
) -> Vec<WifiSegment> {
    let mut out = Vec::new();
    for (start, end, _) in seg.intervals().filter(|&(_, _, stat)| stat) {
        if end - start < min_duration_ms {
            continue;
        }
        let observations: Vec<WifiObservation> = ds
            .observations()
            .iter()
            .filter(|o| o.timestamp_ms >= start && o.timestamp_ms < end)
            .cloned()
            .collect();
        if observations.is_empty() {
            continue;
        }
        let device = observations[0].device.clone();
        out.push(WifiSegment {
            segment_id: out.len(),
            device,
            start_ms: start,
            end_ms: end,
            observations,
        });
    }
    out
}

/// Serialize segments as CSV `segment_id,device,start_ms,end_ms,n_observations`.
pub fn write_segments_csv<W: Write>(segments: &[WifiSegment], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["segment_id", "device", "start_ms", "end_ms", "n_observations"])?;
    for seg in segments {
        wtr.write_record([
            seg.segment_id.to_string(),
            seg.device.clone(),
            seg.start_ms.to_string(),
            seg.end_ms.to_string(),
            seg.observations.len().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read segments back from CSV `segment_id,device,start_ms,end_ms,n_observations`.
///
/// The observation list is left empty — the CSV stores only interval
/// metadata. Use [`populate_segment_observations`] to refill it from a
/// dataset; the stored count is informational (the dataset at hand may
/// have been augmented or filtered since the segments were cut).
pub fn read_segments_csv<R: std::io::Read>(reader: R) -> Result<Vec<WifiSegment>> {
    #[derive(serde::Deserialize)]
    struct Row {
        segment_id: usize,
        device: String,
        start_ms: i64,
        end_ms: i64,
        #[allow(dead_code)]
        n_observations: usize,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        if row.end_ms <= row.start_ms {
            return Err(Error::parse(i + 2, "segment end must exceed start"));
        }
        out.push(WifiSegment {
            segment_id: row.segment_id,
            device: row.device,
            start_ms: row.start_ms,
            end_ms: row.end_ms,
            observations: Vec::new(),
        });
    }
    Ok(out)
}

/// Refill segment observation lists from `ds` using the same membership
/// rule as [`extract_stationary_segments`]: the segment's device and
/// `start ≤ t < end`.
pub fn populate_segment_observations(ds: &WifiDataset, segments: &mut [WifiSegment]) {
    for seg in segments {
        seg.observations = ds
            .observations()
            .iter()
            .filter(|o| {
                o.device == seg.device && o.timestamp_ms >= seg.start_ms && o.timestamp_ms < seg.end_ms
            })
            .cloned()
            .collect();
    }
}

/// Serialize segmentation boundaries as CSV `index,timestamp_ms,parity`,
/// where parity names the label of the interval starting at the boundary.
pub fn write_boundaries_csv<W: Write>(seg: &MotionSegmentation, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["index", "timestamp_ms", "parity"])?;
    for (i, t) in seg.boundaries.iter().enumerate() {
        let parity = if i % 2 == 0 { "stationary" } else { "moving" };
        wtr.write_record([i.to_string(), t.to_string(), parity.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
