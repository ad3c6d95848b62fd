//! Per-AP univariate RSSI likelihood estimation and segment fingerprints.
//!
//! Each stationary WiFi segment is summarized, per access point, by one of
//! three interchangeable likelihood representations: a normalized histogram
//! (PMF) with optional Laplace smoothing, a fitted Normal, or a Gaussian
//! kernel density estimate. The per-AP likelihoods of a segment form its
//! fingerprint; the joint distribution factorizes over APs under conditional
//! independence, so downstream distances aggregate per-AP contributions.
//!
//! Invisible APs (in the universe but unseen in the segment) concentrate
//! their probability mass at −100 dBm in every representation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::motionseg::WifiSegment;
use crate::{RSSI_MAX, RSSI_MIN, RSSI_SUPPORT};

/// Variance floor for fitted Normals, dBm². Unbiased variance is undefined
/// for single samples and zero variance breaks density-based measures.
pub const SIGMA_MIN_SQ: f64 = 1.0;

/// Default Gaussian-kernel bandwidth, dBm.
pub const DEFAULT_BANDWIDTH: f64 = 2.0;

/// Default Laplace smoothing constant per support point.
pub const DEFAULT_LAPLACE_EPSILON: f64 = 1e-6;

/// Estimator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Pmf,
    Normal,
    Kde,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] =
        [EstimatorKind::Pmf, EstimatorKind::Normal, EstimatorKind::Kde];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Pmf => "pmf",
            EstimatorKind::Normal => "normal",
            EstimatorKind::Kde => "kde",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<EstimatorKind> {
        match s.to_lowercase().as_str() {
            "pmf" | "histogram" => Ok(EstimatorKind::Pmf),
            "normal" | "gaussian" => Ok(EstimatorKind::Normal),
            "kde" => Ok(EstimatorKind::Kde),
            other => Err(Error::Config(format!(
                "unknown estimator `{other}` (expected pmf, normal or kde)"
            ))),
        }
    }
}

/// Options shared by the estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorOptions {
    /// Laplace smoothing constant per support point for PMFs; 0 disables.
    pub laplace_epsilon: f64,
    /// Gaussian kernel bandwidth for KDE, dBm.
    pub bandwidth: f64,
    /// Model invisible APs: give universe APs unseen in the segment the
    /// −100-concentrated likelihood instead of omitting them.
    pub model_invisibility: bool,
}

impl Default for EstimatorOptions {
    fn default() -> EstimatorOptions {
        EstimatorOptions {
            laplace_epsilon: DEFAULT_LAPLACE_EPSILON,
            bandwidth: DEFAULT_BANDWIDTH,
            model_invisibility: true,
        }
    }
}

/// The distribution payload of a univariate likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum LikelihoodModel {
    /// Sparse map RSSI → probability over the integer support.
    Pmf {
        #[serde(with = "pmf_probs_serde")]
        probs: BTreeMap<i16, f64>,
    },
    Normal { mu: f64, sigma2: f64 },
    Kde { samples: Vec<f64>, bandwidth: f64 },
}

/// JSON object keys are strings; spell the integer RSSI keys out explicitly
/// so the map survives serde's internally-tagged buffering.
mod pmf_probs_serde {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        probs: &BTreeMap<i16, f64>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(probs.len()))?;
        for (rssi, p) in probs {
            map.serialize_entry(&rssi.to_string(), p)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<i16, f64>, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(deserializer)?;
        raw.into_iter()
            .map(|(key, p)| {
                key.parse::<i16>()
                    .map(|rssi| (rssi, p))
                    .map_err(|_| D::Error::custom(format!("bad RSSI key `{key}`")))
            })
            .collect()
    }
}

/// One access point's estimated RSSI distribution within a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateLikelihood {
    #[serde(flatten)]
    pub model: LikelihoodModel,
    /// Number of underlying RSSI samples (0 for an invisible AP).
    pub source_count: usize,
}

/// Standard normal density.
fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via the error function.
fn big_phi(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

impl UnivariateLikelihood {
    /// Expectation: exact PMF expectation, Normal μ, KDE sample mean (the
    /// symmetric kernel does not shift the mean).
    pub fn mean(&self) -> f64 {
        match &self.model {
            LikelihoodModel::Pmf { probs } => {
                probs.iter().map(|(&r, &p)| f64::from(r) * p).sum()
            }
            LikelihoodModel::Normal { mu, .. } => *mu,
            LikelihoodModel::Kde { samples, .. } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
        }
    }

    /// Continuous density at `x`; for a PMF this is the point mass when `x`
    /// is (numerically) an integer support point, 0 otherwise — grid
    /// evaluation maps masses to cells instead of calling this.
    pub fn density_at(&self, x: f64) -> f64 {
        match &self.model {
            LikelihoodModel::Pmf { probs } => {
                let nearest = x.round();
                if (x - nearest).abs() < 1e-9 {
                    probs.get(&(nearest as i16)).copied().unwrap_or(0.0)
                } else {
                    0.0
                }
            }
            LikelihoodModel::Normal { mu, sigma2 } => {
                let sigma = sigma2.sqrt();
                phi((x - mu) / sigma) / sigma
            }
            LikelihoodModel::Kde { samples, bandwidth } => {
                samples.iter().map(|&s| phi((x - s) / bandwidth)).sum::<f64>()
                    / (samples.len() as f64 * bandwidth)
            }
        }
    }

    /// Closed-form CDF `P(X ≤ x)`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        match &self.model {
            LikelihoodModel::Pmf { probs } => probs
                .iter()
                .filter(|(&r, _)| f64::from(r) <= x + 1e-12)
                .map(|(_, &p)| p)
                .sum(),
            LikelihoodModel::Normal { mu, sigma2 } => big_phi((x - mu) / sigma2.sqrt()),
            LikelihoodModel::Kde { samples, bandwidth } => {
                samples.iter().map(|&s| big_phi((x - s) / bandwidth)).sum::<f64>()
                    / samples.len() as f64
            }
        }
    }

    /// Check structural invariants (used when loading fingerprints from disk).
    pub fn validate(&self) -> Result<()> {
        match &self.model {
            LikelihoodModel::Pmf { probs } => {
                let mut sum = 0.0;
                for (&r, &p) in probs {
                    if r < RSSI_MIN || r > RSSI_MAX {
                        return Err(Error::Validation(format!(
                            "PMF support point {r} outside [{RSSI_MIN}, {RSSI_MAX}]"
                        )));
                    }
                    if !(p >= 0.0) {
                        return Err(Error::Validation(format!(
                            "negative PMF probability {p} at {r}"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Validation(format!(
                        "PMF sums to {sum}, expected 1 ± 1e-9"
                    )));
                }
            }
            LikelihoodModel::Normal { sigma2, .. } => {
                if !(*sigma2 >= SIGMA_MIN_SQ) {
                    return Err(Error::Validation(format!(
                        "Normal variance {sigma2} below floor {SIGMA_MIN_SQ}"
                    )));
                }
            }
            LikelihoodModel::Kde { samples, bandwidth } => {
                if samples.is_empty() {
                    return Err(Error::Validation("KDE with no samples".into()));
                }
                if !(*bandwidth > 0.0) {
                    return Err(Error::Validation(format!(
                        "KDE bandwidth {bandwidth} must be > 0"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Normalized histogram over the integer support `[−100, −10]`, optionally
/// Laplace-smoothed: each of the 91 support points gains `laplace_epsilon`
/// and the result is renormalized. An empty value list is the invisible-AP
/// case and puts all mass at −100 (before smoothing).
pub fn estimate_pmf(values: &[i16], laplace_epsilon: f64) -> Result<UnivariateLikelihood> {
    if !(laplace_epsilon >= 0.0) {
        return Err(Error::Config(format!(
            "laplace_epsilon must be ≥ 0, got {laplace_epsilon}"
        )));
    }
    for &v in values {
        if v < RSSI_MIN || v > RSSI_MAX {
            return Err(Error::Validation(format!(
                "rssi value {v} outside [{RSSI_MIN}, {RSSI_MAX}]"
            )));
        }
    }
    let mut probs: BTreeMap<i16, f64> = BTreeMap::new();
    if values.is_empty() {
        probs.insert(RSSI_MIN, 1.0);
    } else {
        let weight = 1.0 / values.len() as f64;
        for &v in values {
            *probs.entry(v).or_insert(0.0) += weight;
        }
    }
    if laplace_epsilon > 0.0 {
        let z = 1.0 + laplace_epsilon * RSSI_SUPPORT as f64;
        let mut smoothed = BTreeMap::new();
        for r in RSSI_MIN..=RSSI_MAX {
            let p = probs.get(&r).copied().unwrap_or(0.0);
            smoothed.insert(r, (p + laplace_epsilon) / z);
        }
        probs = smoothed;
    }
    Ok(UnivariateLikelihood {
        model: LikelihoodModel::Pmf { probs },
        source_count: values.len(),
    })
}

/// Fit a Normal by sample mean and unbiased sample variance, floored at
/// [`SIGMA_MIN_SQ`]. Empty input is the invisible-AP case: `N(−100, 1)`.
pub fn estimate_normal(values: &[i16]) -> UnivariateLikelihood {
    let (mu, sigma2) = match values.len() {
        0 => (f64::from(RSSI_MIN), SIGMA_MIN_SQ),
        1 => (f64::from(values[0]), SIGMA_MIN_SQ),
        n => {
            let nf = n as f64;
            let mean = values.iter().map(|&v| f64::from(v)).sum::<f64>() / nf;
            let ss = values
                .iter()
                .map(|&v| (f64::from(v) - mean).powi(2))
                .sum::<f64>();
            (mean, (ss / (nf - 1.0)).max(SIGMA_MIN_SQ))
        }
    };
    UnivariateLikelihood {
        model: LikelihoodModel::Normal { mu, sigma2 },
        source_count: values.len(),
    }
}

/// Gaussian kernel density estimate: density at `x` is
/// `(1/(n·h)) Σ φ((x − x_i)/h)`. Empty input is the invisible-AP case and
/// becomes a single pseudo-sample at −100.
pub fn estimate_kde(values: &[i16], bandwidth: f64) -> Result<UnivariateLikelihood> {
    if !(bandwidth > 0.0) {
        return Err(Error::Config(format!(
            "KDE bandwidth must be > 0, got {bandwidth}"
        )));
    }
    let samples: Vec<f64> = if values.is_empty() {
        vec![f64::from(RSSI_MIN)]
    } else {
        values.iter().map(|&v| f64::from(v)).collect()
    };
    Ok(UnivariateLikelihood {
        model: LikelihoodModel::Kde { samples, bandwidth },
        source_count: values.len(),
    })
}

/// Estimate with the selected method; the invisible-AP case is the empty
/// value list in every method.
pub fn estimate(
    values: &[i16],
    method: EstimatorKind,
    opts: &EstimatorOptions,
) -> Result<UnivariateLikelihood> {
    match method {
        EstimatorKind::Pmf => estimate_pmf(values, opts.laplace_epsilon),
        EstimatorKind::Normal => Ok(estimate_normal(values)),
        EstimatorKind::Kde => estimate_kde(values, opts.bandwidth),
    }
}

/// The likelihood assigned to an AP with no observations.
pub fn invisibility_likelihood(
    method: EstimatorKind,
    opts: &EstimatorOptions,
) -> UnivariateLikelihood {
    estimate(&[], method, opts).expect("empty input is valid for every estimator")
}

/// Uniform evaluation grid for quadrature over the RSSI axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for EvaluationGrid {
    /// Covers the RSSI support plus kernel tails at the default bandwidth;
    /// 200 cells keep distance quadrature cheap.
    fn default() -> EvaluationGrid {
        EvaluationGrid {
            lo: -105.0,
            hi: -5.0,
            step: 0.5,
        }
    }
}

impl EvaluationGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return Err(Error::Config(format!(
                "grid lo {} must be below hi {}",
                self.lo, self.hi
            )));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config(format!("grid step {} must be > 0", self.step)));
        }
        let cells = (self.hi - self.lo) / self.step;
        if (cells - cells.round()).abs() > 1e-9 || cells.round() < 1.0 {
            return Err(Error::Config(format!(
                "grid span {}..{} is not an integer number of cells of step {}",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        ((self.hi - self.lo) / self.step).round() as usize
    }

    /// Cell midpoints `lo + (i + ½)·step`.
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_cells())
            .map(|i| self.lo + (i as f64 + 0.5) * self.step)
            .collect()
    }

    /// Cell right edges `lo + (i + 1)·step`.
    pub fn right_edges(&self) -> Vec<f64> {
        (0..self.n_cells())
            .map(|i| self.lo + (i as f64 + 1.0) * self.step)
            .collect()
    }

    /// True when the grid covers the full RSSI support.
    pub fn covers_support(&self) -> bool {
        self.lo <= f64::from(RSSI_MIN) && self.hi >= f64::from(RSSI_MAX)
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        let idx = ((x - self.lo) / self.step).floor();
        (idx.max(0.0) as usize).min(self.n_cells() - 1)
    }
}

/// Grid evaluation of a likelihood: density at cell midpoints, CDF at cell
/// right edges, and the probability mass lying outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEvaluation {
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Mass outside `[lo, hi]`; nonzero when the grid fails to cover the
    /// distribution's effective support. Callers should surface it as a
    /// warning.
    pub tail_mass: f64,
}

/// Sample a likelihood on the grid. PMF masses map into their containing
/// cell as `mass/step`; Normal/KDE use closed-form densities and CDFs.
pub fn evaluate_on_grid(l: &UnivariateLikelihood, g: &EvaluationGrid) -> Result<GridEvaluation> {
    g.validate()?;
    let n = g.n_cells();
    let (pdf, cdf) = match &l.model {
        LikelihoodModel::Pmf { probs } => {
            let mut pdf = vec![0.0; n];
            for (&r, &p) in probs {
                let x = f64::from(r);
                if x >= g.lo && x < g.hi {
                    pdf[g.cell_of(x)] += p / g.step;
                }
            }
            let cdf = g.right_edges().iter().map(|&e| l.cdf_at(e)).collect();
            (pdf, cdf)
        }
        LikelihoodModel::Normal { .. } | LikelihoodModel::Kde { .. } => {
            let pdf = g.midpoints().iter().map(|&x| l.density_at(x)).collect();
            let cdf = g.right_edges().iter().map(|&e| l.cdf_at(e)).collect();
            (pdf, cdf)
        }
    };
    let tail_mass: f64 = l.cdf_at(g.lo) + (1.0 - l.cdf_at(g.hi));
    Ok(GridEvaluation {
        pdf,
        cdf,
        tail_mass: tail_mass.max(0.0),
    })
}

/// The factorized likelihood fingerprint of one stationary segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFingerprint {
    pub segment_id: usize,
    pub method: EstimatorKind,
    pub invisibility_modeled: bool,
    pub options: EstimatorOptions,
    pub per_ap: BTreeMap<String, UnivariateLikelihood>,
}

impl SegmentFingerprint {
    /// True when both fingerprints were built with the same estimator and
    /// options, i.e. their distances are meaningful.
    pub fn compatible_with(&self, other: &SegmentFingerprint) -> bool {
        self.method == other.method
            && self.invisibility_modeled == other.invisibility_modeled
            && self.options == other.options
    }
}

/// Build the fingerprint of a segment: one likelihood per observed AP, plus
/// (when invisibility is modeled) the −100-concentrated likelihood for every
/// universe AP the segment never saw.
pub fn fingerprint_segment(
    seg: &WifiSegment,
    universe: &std::collections::BTreeSet<String>,
    method: EstimatorKind,
    opts: &EstimatorOptions,
) -> Result<SegmentFingerprint> {
    let mut values_by_ap: BTreeMap<&str, Vec<i16>> = BTreeMap::new();
    for obs in &seg.observations {
        values_by_ap.entry(&obs.bssid).or_default().push(obs.rssi);
    }
    let mut per_ap = BTreeMap::new();
    for (ap, values) in &values_by_ap {
        per_ap.insert(ap.to_string(), estimate(values, method, opts)?);
    }
    if opts.model_invisibility {
        for ap in universe {
            if !per_ap.contains_key(ap) {
                per_ap.insert(ap.clone(), invisibility_likelihood(method, opts));
            }
        }
    }
    Ok(SegmentFingerprint {
        segment_id: seg.segment_id,
        method,
        invisibility_modeled: opts.model_invisibility,
        options: opts.clone(),
        per_ap,
    })
}

/// Write fingerprints as JSONL, one segment object per line.
pub fn write_fingerprints_jsonl<W: Write>(
    fingerprints: &[SegmentFingerprint],
    mut writer: W,
) -> Result<()> {
    for fp in fingerprints {
        serde_json::to_writer(&mut writer, fp)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Read and validate fingerprints written by [`write_fingerprints_jsonl`].
pub fn read_fingerprints_jsonl<R: BufRead>(reader: R) -> Result<Vec<SegmentFingerprint>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fp: SegmentFingerprint =
            serde_json::from_str(&line).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        for l in fp.per_ap.values() {
            l.validate()?;
        }
        out.push(fp);
    }
    Ok(out)
}
