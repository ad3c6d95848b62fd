//! Evaluation of distance configurations: thresholded same/different-location
//! classification (ROC, AUC), correlation of computed distances with
//! floor-plan distances, and synthetic scene generation for end-to-end
//! verification.
//!
//! Orientation: the positive class is "different locations" — a pair fires
//! positive when its distance is at least the threshold. Keeping this fixed
//! matters; a flipped orientation silently mirrors every ROC curve.

pub mod scene;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::motionseg::WifiSegment;

/// Ground truth for one segment: a location label and optionally floor-plan
/// coordinates in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub segment_id: usize,
    pub label: String,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

impl LabeledSegment {
    pub fn position(&self) -> Option<(f64, f64)> {
        match (self.x, self.y) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        }
    }
}

/// Pooling granularity for building fingerprints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One fingerprint per stationary segment (default).
    PerSegment,
    /// Merge all segments sharing a label into one pooled segment.
    PerLabel,
}

/// Heaviside classification of a distance: 1 ("different locations") iff
/// `d ≥ τ`, with Θ(0) = 1.
pub fn classify_pair(d: f64, tau: f64) -> u8 {
    u8::from(d >= tau)
}

/// One operating point of the ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve over all distinct distance thresholds, from (0, 0) down to
/// (1, 1) as the threshold falls, with the Mann–Whitney AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Area under the curve by the trapezoidal rule over the swept points;
    /// must agree with the rank-based `auc` to high precision.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * 0.5 * (w[0].tpr + w[1].tpr))
            .sum()
    }
}

/// Build the ROC curve for same-location vs different-location distances.
///
/// The threshold sweeps a +∞ sentinel plus every distinct observed distance
/// in descending order; the AUC is the Mann–Whitney statistic (probability
/// that a random different-location pair out-distances a random
/// same-location pair, ties counted ½).
pub fn roc_auc(same_distances: &[f64], diff_distances: &[f64]) -> Result<RocCurve> {
    if same_distances.is_empty() {
        return Err(Error::Validation(
            "no same-location distances to evaluate".into(),
        ));
    }
    if diff_distances.is_empty() {
        return Err(Error::Validation(
            "no different-location distances to evaluate".into(),
        ));
    }
    let mut thresholds: Vec<f64> = same_distances
        .iter()
        .chain(diff_distances)
        .copied()
        .collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    thresholds.insert(0, f64::INFINITY);

    let n_same = same_distances.len() as f64;
    let n_diff = diff_distances.len() as f64;
    let points = thresholds
        .iter()
        .map(|&tau| {
            let fp = same_distances.iter().filter(|&&d| d >= tau).count() as f64;
            let tp = diff_distances.iter().filter(|&&d| d >= tau).count() as f64;
            RocPoint {
                threshold: tau,
                fpr: fp / n_same,
                tpr: tp / n_diff,
            }
        })
        .collect();

    let mut credit = 0.0;
    for &d in diff_distances {
        for &s in same_distances {
            if d > s {
                credit += 1.0;
            } else if d == s {
                credit += 0.5;
            }
        }
    }
    Ok(RocCurve {
        points,
        auc: credit / (n_same * n_diff),
    })
}

/// Partition the matrix's upper-triangle distances by label equality into
/// (same-location, different-location) lists.
pub fn label_pairs(
    matrix: &DistanceMatrix,
    labels: &[LabeledSegment],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let by_id: BTreeMap<usize, &str> = labels
        .iter()
        .map(|l| (l.segment_id, l.label.as_str()))
        .collect();
    let missing: Vec<usize> = matrix
        .segment_ids
        .iter()
        .copied()
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "segments without labels: {missing:?}"
        )));
    }
    let mut same = Vec::new();
    let mut diff = Vec::new();
    for (i, j, d) in matrix.upper_triangle() {
        let li = by_id[&matrix.segment_ids[i]];
        let lj = by_id[&matrix.segment_ids[j]];
        if li == lj {
            same.push(d);
        } else {
            diff.push(d);
        }
    }
    Ok((same, diff))
}

/// Correlation of computed distances with floor-plan distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson: f64,
    pub spearman: f64,
    pub kendall_tau: f64,
    pub n_pairs: usize,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numeric(
            "correlation undefined: one side has zero variance".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Average ranks (1-based), ties receiving the mean of their rank span.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Kendall's tau-b: concordant minus discordant pairs, tie-corrected.
fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = xs[i] - xs[j];
            let dy = ys[i] - ys[j];
            if dx * dy > 0.0 {
                concordant += 1;
            } else if dx * dy < 0.0 {
                discordant += 1;
            }
            // Ties on either side enter through the denominator correction.
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - ties_pair_count(xs)) * (n0 - ties_pair_count(ys))).sqrt();
    if denom == 0.0 {
        return Err(Error::Numeric(
            "kendall tau undefined: one side is constant".into(),
        ));
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// Number of tied pairs Σ t·(t−1)/2 over tie groups.
fn ties_pair_count(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * (t - 1.0) / 2.0;
        i = j + 1;
    }
    total
}

/// Correlate the matrix's distances with Euclidean floor-plan distances over
/// all pairs of positioned segments: Pearson on raw values, Spearman as
/// Pearson of average ranks, Kendall as tau-b.
pub fn correlations(
    matrix: &DistanceMatrix,
    labels: &[LabeledSegment],
) -> Result<CorrelationReport> {
    let positions: BTreeMap<usize, (f64, f64)> = labels
        .iter()
        .filter_map(|l| l.position().map(|p| (l.segment_id, p)))
        .collect();
    let positioned: Vec<usize> = matrix
        .segment_ids
        .iter()
        .enumerate()
        .filter(|(_, id)| positions.contains_key(id))
        .map(|(i, _)| i)
        .collect();
    if positioned.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 positioned segments, got {}",
            positioned.len()
        )));
    }
    let mut computed = Vec::new();
    let mut floorplan = Vec::new();
    for (a, &i) in positioned.iter().enumerate() {
        for &j in &positioned[a + 1..] {
            let (xi, yi) = positions[&matrix.segment_ids[i]];
            let (xj, yj) = positions[&matrix.segment_ids[j]];
            computed.push(matrix.get(i, j));
            floorplan.push(((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt());
        }
    }
    let spearman = pearson(&average_ranks(&computed), &average_ranks(&floorplan))?;
    Ok(CorrelationReport {
        pearson: pearson(&computed, &floorplan)?,
        spearman,
        kendall_tau: kendall_tau_b(&computed, &floorplan)?,
        n_pairs: computed.len(),
    })
}

/// Merge all segments sharing a label into one pooled segment per label
/// (the "one fingerprint per room-day" evaluation mode). Returns pooled
/// segments with fresh ordinal ids and matching labels; positions average
/// over the group.
pub fn pool_segments_by_label(
    segments: &[WifiSegment],
    labels: &[LabeledSegment],
) -> Result<(Vec<WifiSegment>, Vec<LabeledSegment>)> {
    let by_id: BTreeMap<usize, &LabeledSegment> =
        labels.iter().map(|l| (l.segment_id, l)).collect();
    let missing: Vec<usize> = segments
        .iter()
        .map(|s| s.segment_id)
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "segments without labels: {missing:?}"
        )));
    }
    let label_order: BTreeSet<&str> = segments
        .iter()
        .map(|s| by_id[&s.segment_id].label.as_str())
        .collect();
    let mut pooled_segments = Vec::new();
    let mut pooled_labels = Vec::new();
    for (ordinal, label) in label_order.into_iter().enumerate() {
        let group: Vec<&WifiSegment> = segments
            .iter()
            .filter(|s| by_id[&s.segment_id].label == label)
            .collect();
        let mut observations: Vec<_> = group
            .iter()
            .flat_map(|s| s.observations.iter().cloned())
            .collect();
        observations.sort_by(|a, b| {
            (a.timestamp_ms, &a.bssid).cmp(&(b.timestamp_ms, &b.bssid))
        });
        let positions: Vec<(f64, f64)> = group
            .iter()
            .filter_map(|s| by_id[&s.segment_id].position())
            .collect();
        let (x, y) = if positions.is_empty() {
            (None, None)
        } else {
            let n = positions.len() as f64;
            (
                Some(positions.iter().map(|p| p.0).sum::<f64>() / n),
                Some(positions.iter().map(|p| p.1).sum::<f64>() / n),
            )
        };
        pooled_segments.push(WifiSegment {
            segment_id: ordinal,
            device: group[0].device.clone(),
            start_ms: group.iter().map(|s| s.start_ms).min().unwrap(),
            end_ms: group.iter().map(|s| s.end_ms).max().unwrap(),
            observations,
        });
        pooled_labels.push(LabeledSegment {
            segment_id: ordinal,
            label: label.to_string(),
            x,
            y,
        });
    }
    Ok((pooled_segments, pooled_labels))
}

/// CSV `threshold,fpr,tpr`, one row per operating point.
pub fn write_roc_csv<W: Write>(curve: &RocCurve, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["threshold", "fpr", "tpr"])?;
    for p in &curve.points {
        wtr.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// CSV `segment_id,label,x,y` with empty cells for missing coordinates.
pub fn write_labels_csv<W: Write>(labels: &[LabeledSegment], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["segment_id", "label", "x", "y"])?;
    for l in labels {
        wtr.write_record([
            l.segment_id.to_string(),
            l.label.clone(),
            l.x.map(|v| v.to_string()).unwrap_or_default(),
            l.y.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read labels written by [`write_labels_csv`].
pub fn read_labels_csv<R: std::io::Read>(reader: R) -> Result<Vec<LabeledSegment>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.deserialize::<LabeledSegment>() {
        let l = record?;
        if l.label.is_empty() {
            return Err(Error::Validation(format!(
                "segment {} has an empty label",
                l.segment_id
            )));
        }
        for v in [l.x, l.y].into_iter().flatten() {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "segment {} has a non-finite position",
                    l.segment_id
                )));
            }
        }
        out.push(l);
    }
    Ok(out)
}
