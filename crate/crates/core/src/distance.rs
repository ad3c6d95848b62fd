//! Statistical distances between univariate RSSI likelihoods, their
//! aggregation into segment distances, and pairwise distance matrices.
//!
//! Nine measures are supported. PMF pairs are evaluated by exact summation
//! over the integer support; Normal/KDE pairs by quadrature on a shared
//! evaluation grid (trapezoidal rule for density integrals, closed-form
//! CDFs for the cumulative measures). Natural logarithms throughout.
//!
//! Per-AP distances combine into a segment distance through the ℓ-norm
//! `d_ℓ = (Σ_k d_k^ℓ)^{1/ℓ}` with ℓ ∈ {1, 2}. The KL divergence is excluded
//! from aggregation for its asymmetry, the Bhattacharyya coefficient because
//! it is a similarity.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{
    invisibility_likelihood, EstimatorKind, EstimatorOptions, EvaluationGrid, LikelihoodModel,
    SegmentFingerprint, UnivariateLikelihood,
};
use crate::{RSSI_MIN, RSSI_SUPPORT};

/// Distance (or similarity) measure between probability distributions.
///
/// Serialized under the same short names the CLI and CSV artifacts use;
/// the spelled-out variant names are accepted as input aliases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureTag {
    #[serde(rename = "kl", alias = "kl_divergence")]
    KlDivergence,
    #[serde(rename = "symkl", alias = "symmetrized_kl")]
    SymmetrizedKl,
    #[serde(rename = "jsd", alias = "jensen_shannon")]
    JensenShannon,
    #[serde(rename = "bc", alias = "bhattacharyya_coefficient")]
    BhattacharyyaCoefficient,
    #[serde(rename = "bhatt", alias = "bhattacharyya_distance")]
    BhattacharyyaDistance,
    #[serde(rename = "hellinger")]
    Hellinger,
    #[serde(rename = "ks", alias = "kolmogorov_smirnov")]
    KolmogorovSmirnov,
    #[serde(rename = "emd", alias = "earth_movers")]
    EarthMovers,
    #[serde(rename = "mad", alias = "mean_abs_diff")]
    MeanAbsDiff,
}

impl MeasureTag {
    pub const ALL: [MeasureTag; 9] = [
        MeasureTag::KlDivergence,
        MeasureTag::SymmetrizedKl,
        MeasureTag::JensenShannon,
        MeasureTag::BhattacharyyaCoefficient,
        MeasureTag::BhattacharyyaDistance,
        MeasureTag::Hellinger,
        MeasureTag::KolmogorovSmirnov,
        MeasureTag::EarthMovers,
        MeasureTag::MeanAbsDiff,
    ];

    /// The measures eligible for per-AP aggregation: symmetric distances.
    pub const AGGREGATABLE: [MeasureTag; 7] = [
        MeasureTag::SymmetrizedKl,
        MeasureTag::JensenShannon,
        MeasureTag::BhattacharyyaDistance,
        MeasureTag::Hellinger,
        MeasureTag::KolmogorovSmirnov,
        MeasureTag::EarthMovers,
        MeasureTag::MeanAbsDiff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureTag::KlDivergence => "kl",
            MeasureTag::SymmetrizedKl => "symkl",
            MeasureTag::JensenShannon => "jsd",
            MeasureTag::BhattacharyyaCoefficient => "bc",
            MeasureTag::BhattacharyyaDistance => "bhatt",
            MeasureTag::Hellinger => "hellinger",
            MeasureTag::KolmogorovSmirnov => "ks",
            MeasureTag::EarthMovers => "emd",
            MeasureTag::MeanAbsDiff => "mad",
        }
    }

    /// d(p, q) = d(q, p)? False only for the plain KL divergence.
    pub fn is_symmetric(self) -> bool {
        self != MeasureTag::KlDivergence
    }

    /// Higher-is-closer similarity rather than a distance.
    pub fn is_similarity(self) -> bool {
        self == MeasureTag::BhattacharyyaCoefficient
    }

    pub fn is_aggregatable(self) -> bool {
        Self::AGGREGATABLE.contains(&self)
    }

    /// Measures whose definition divides by or logs the densities, requiring
    /// strictly positive mass on the whole support for PMF inputs (Laplace
    /// smoothing).
    pub fn requires_positive_density(self) -> bool {
        matches!(
            self,
            MeasureTag::KlDivergence
                | MeasureTag::SymmetrizedKl
                | MeasureTag::JensenShannon
                | MeasureTag::BhattacharyyaCoefficient
                | MeasureTag::BhattacharyyaDistance
        )
    }
}

impl fmt::Display for MeasureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<MeasureTag> {
        match s.to_lowercase().as_str() {
            "kl" | "kl_divergence" => Ok(MeasureTag::KlDivergence),
            "symkl" | "symmetrized_kl" => Ok(MeasureTag::SymmetrizedKl),
            "jsd" | "jensen_shannon" => Ok(MeasureTag::JensenShannon),
            "bc" | "bhattacharyya_coefficient" => Ok(MeasureTag::BhattacharyyaCoefficient),
            "bhatt" | "bhattacharyya_distance" => Ok(MeasureTag::BhattacharyyaDistance),
            "hellinger" => Ok(MeasureTag::Hellinger),
            "ks" | "kolmogorov_smirnov" => Ok(MeasureTag::KolmogorovSmirnov),
            "emd" | "earth_movers" => Ok(MeasureTag::EarthMovers),
            "mad" | "mean_abs_diff" => Ok(MeasureTag::MeanAbsDiff),
            other => Err(Error::Config(format!("unknown measure `{other}`"))),
        }
    }
}

/// ℓ-norm used to aggregate per-AP distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationNorm {
    L1,
    L2,
}

impl AggregationNorm {
    pub const ALL: [AggregationNorm; 2] = [AggregationNorm::L1, AggregationNorm::L2];

    pub fn as_str(self) -> &'static str {
        match self {
            AggregationNorm::L1 => "l1",
            AggregationNorm::L2 => "l2",
        }
    }

    /// `(Σ d^ℓ)^{1/ℓ}` over per-AP distances.
    pub fn aggregate<I: IntoIterator<Item = f64>>(self, distances: I) -> f64 {
        match self {
            AggregationNorm::L1 => distances.into_iter().sum(),
            AggregationNorm::L2 => distances
                .into_iter()
                .map(|d| d * d)
                .sum::<f64>()
                .sqrt(),
        }
    }
}

impl fmt::Display for AggregationNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<AggregationNorm> {
        match s.to_lowercase().as_str() {
            "l1" | "1" => Ok(AggregationNorm::L1),
            "l2" | "2" => Ok(AggregationNorm::L2),
            other => Err(Error::Config(format!("unknown norm `{other}` (l1 or l2)"))),
        }
    }
}

/// Numeric guard rails for the distance computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceParams {
    /// Value returned by the Bhattacharyya distance when the coefficient
    /// underflows to 0 (non-overlapping supports); also a ceiling on the
    /// distance so matrices stay finite for embedding.
    pub bhatt_cap: f64,
    /// Floor applied to denominator/argument densities in KL-family
    /// integrands; Gaussian tails underflow even though mathematically
    /// positive.
    pub density_floor: f64,
}

impl Default for DistanceParams {
    fn default() -> DistanceParams {
        DistanceParams {
            bhatt_cap: 50.0,
            density_floor: 1e-300,
        }
    }
}

/// A likelihood preprocessed for repeated distance evaluations.
///
/// PMFs keep a dense probability vector over the 91-point support plus its
/// running CDF; Normal/KDE keep closed-form densities and CDFs sampled on
/// the grid edges and renormalized over the grid. Pairs must share the
/// representation class: a histogram against a continuous density has no
/// common quadrature and is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    source: UnivariateLikelihood,
    kind: PreparedKind,
    mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum PreparedKind {
    Discrete {
        /// probs[i] = P(RSSI = −100 + i), dense over the support.
        probs: Vec<f64>,
        cdf: Vec<f64>,
        strictly_positive: bool,
    },
    Continuous {
        /// Density at the n+1 grid edges.
        edge_pdf: Vec<f64>,
        /// CDF at the n+1 grid edges.
        edge_cdf: Vec<f64>,
        step: f64,
    },
}

/// Preprocess a likelihood for distance evaluation on the given grid.
pub fn prepare(l: &UnivariateLikelihood, g: &EvaluationGrid) -> Result<Prepared> {
    g.validate()?;
    let kind = match &l.model {
        LikelihoodModel::Pmf { probs } => {
            let mut dense = vec![0.0; RSSI_SUPPORT];
            for (&r, &p) in probs {
                dense[(r - RSSI_MIN) as usize] = p;
            }
            let mut cdf = Vec::with_capacity(RSSI_SUPPORT);
            let mut acc = 0.0;
            for &p in &dense {
                acc += p;
                cdf.push(acc);
            }
            let strictly_positive = dense.iter().all(|&p| p > 0.0);
            PreparedKind::Discrete {
                probs: dense,
                cdf,
                strictly_positive,
            }
        }
        LikelihoodModel::Normal { .. } | LikelihoodModel::Kde { .. } => {
            let n = g.n_cells();
            let mut edge_pdf = Vec::with_capacity(n + 1);
            let mut edge_cdf = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let x = g.lo + i as f64 * g.step;
                edge_pdf.push(l.density_at(x));
                edge_cdf.push(l.cdf_at(x));
            }
            // Renormalize the grid restriction into a proper distribution:
            // the density by its own quadrature mass, the CDF to its
            // conditional form. Otherwise tail mass clipped at the grid
            // edges skews every mass-sensitive measure — most visibly
            // −ln BC > 0 between a likelihood and itself.
            let weights = trapezoid_weights(edge_pdf.len(), g.step);
            let mass: f64 = edge_pdf.iter().zip(&weights).map(|(p, w)| p * w).sum();
            let span = edge_cdf[n] - edge_cdf[0];
            if mass <= 0.0 || span <= 0.0 {
                return Err(Error::Numeric(
                    "likelihood carries no probability mass on the evaluation grid".into(),
                ));
            }
            let cdf_lo = edge_cdf[0];
            for p in &mut edge_pdf {
                *p /= mass;
            }
            for c in &mut edge_cdf {
                *c = ((*c - cdf_lo) / span).clamp(0.0, 1.0);
            }
            PreparedKind::Continuous {
                edge_pdf,
                edge_cdf,
                step: g.step,
            }
        }
    };
    Ok(Prepared {
        source: l.clone(),
        kind,
        mean: l.mean(),
    })
}

impl Prepared {
    fn check_positive_for(&self, m: MeasureTag) -> Result<()> {
        if let PreparedKind::Discrete {
            strictly_positive, ..
        } = &self.kind
        {
            if m.requires_positive_density() && !strictly_positive {
                return Err(Error::Config(format!(
                    "measure `{m}` needs strictly positive histogram mass; \
                     apply Laplace smoothing (laplace_epsilon > 0)"
                )));
            }
        }
        Ok(())
    }
}

/// KL divergence Σ/∫ p·ln(p/q) with the 0·ln 0 = 0 convention; terms with
/// p below the floor are skipped and q is floored.
fn kl_term_sum(p: &[f64], q: &[f64], weights: Option<&[f64]>, params: &DistanceParams) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.len() {
        let pi = p[i];
        if pi < params.density_floor {
            continue;
        }
        let qi = q[i].max(params.density_floor);
        let w = weights.map_or(1.0, |w| w[i]);
        acc += w * pi * (pi.ln() - qi.ln());
    }
    acc
}

/// Trapezoid weights: step·(½, 1, …, 1, ½).
fn trapezoid_weights(n_edges: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; n_edges];
    w[0] = 0.5 * step;
    w[n_edges - 1] = 0.5 * step;
    w
}

struct PairView<'a> {
    p: &'a [f64],
    q: &'a [f64],
    p_cdf: &'a [f64],
    q_cdf: &'a [f64],
    /// Quadrature weights per point (None for the exact discrete route,
    /// where masses already integrate).
    weights: Option<Vec<f64>>,
    /// Spacing between consecutive CDF points for the EMD integral.
    cdf_spacing: f64,
}

fn pair_view<'a>(a: &'a Prepared, b: &'a Prepared) -> Result<PairView<'a>> {
    match (&a.kind, &b.kind) {
        (
            PreparedKind::Discrete { probs: p, cdf: pc, .. },
            PreparedKind::Discrete { probs: q, cdf: qc, .. },
        ) => Ok(PairView {
            p,
            q,
            p_cdf: pc,
            q_cdf: qc,
            weights: None,
            cdf_spacing: 1.0,
        }),
        (
            PreparedKind::Continuous { edge_pdf: p, edge_cdf: pc, step },
            PreparedKind::Continuous { edge_pdf: q, edge_cdf: qc, .. },
        ) => Ok(PairView {
            p,
            q,
            p_cdf: pc,
            q_cdf: qc,
            weights: Some(trapezoid_weights(p.len(), *step)),
            cdf_spacing: *step,
        }),
        _ => Err(Error::Config(
            "cannot mix a histogram likelihood with a continuous one; \
             build both fingerprints with the same estimator"
                .into(),
        )),
    }
}

/// Bhattacharyya coefficient Σ/∫ √(p·q), clamped into [0, 1].
fn bhattacharyya_coefficient(view: &PairView<'_>) -> f64 {
    let mut acc = 0.0;
    for i in 0..view.p.len() {
        let w = view.weights.as_ref().map_or(1.0, |w| w[i]);
        acc += w * (view.p[i] * view.q[i]).sqrt();
    }
    acc.clamp(0.0, 1.0)
}

/// Distance between two prepared likelihoods; the flag reports whether the
/// Bhattacharyya cap was applied. Prefer this over [`univariate_distance`]
/// when evaluating many pairs: preparation happens once per likelihood.
pub fn distance_prepared(
    a: &Prepared,
    b: &Prepared,
    m: MeasureTag,
    params: &DistanceParams,
) -> Result<(f64, bool)> {
    a.check_positive_for(m)?;
    b.check_positive_for(m)?;
    let view = pair_view(a, b)?;
    let w = view.weights.as_deref();
    let mut capped = false;
    let value = match m {
        MeasureTag::KlDivergence => kl_term_sum(view.p, view.q, w, params),
        MeasureTag::SymmetrizedKl => {
            kl_term_sum(view.p, view.q, w, params) + kl_term_sum(view.q, view.p, w, params)
        }
        MeasureTag::JensenShannon => {
            let mid: Vec<f64> = view
                .p
                .iter()
                .zip(view.q)
                .map(|(&pi, &qi)| 0.5 * (pi + qi))
                .collect();
            0.5 * kl_term_sum(view.p, &mid, w, params)
                + 0.5 * kl_term_sum(view.q, &mid, w, params)
        }
        MeasureTag::BhattacharyyaCoefficient => bhattacharyya_coefficient(&view),
        MeasureTag::BhattacharyyaDistance => {
            let bc = bhattacharyya_coefficient(&view);
            if bc <= 0.0 {
                capped = true;
                params.bhatt_cap
            } else {
                let d = -bc.ln();
                if d > params.bhatt_cap {
                    capped = true;
                    params.bhatt_cap
                } else {
                    d
                }
            }
        }
        MeasureTag::Hellinger => {
            // √(1 − BC) in its numerically stable form ½·Σ w·(√p − √q)²,
            // which is exactly 0 on identical inputs instead of inheriting
            // the ~1e−16 error of BC ≈ 1 amplified by the square root.
            let mut h2 = 0.0;
            for i in 0..view.p.len() {
                let wi = view.weights.as_ref().map_or(1.0, |w| w[i]);
                h2 += 0.5 * wi * (view.p[i].sqrt() - view.q[i].sqrt()).powi(2);
            }
            h2.min(1.0).sqrt()
        }
        MeasureTag::KolmogorovSmirnov => view
            .p_cdf
            .iter()
            .zip(view.q_cdf)
            .map(|(&pa, &qa)| (pa - qa).abs())
            .fold(0.0, f64::max),
        MeasureTag::EarthMovers => {
            // ∫|P − Q| dx between the CDFs: exact for the unit-spaced
            // discrete support, trapezoidal over grid edges otherwise.
            let diffs: Vec<f64> = view
                .p_cdf
                .iter()
                .zip(view.q_cdf)
                .map(|(&pa, &qa)| (pa - qa).abs())
                .collect();
            match view.weights {
                None => diffs[..diffs.len() - 1].iter().sum::<f64>() * view.cdf_spacing,
                Some(_) => {
                    let w = trapezoid_weights(diffs.len(), view.cdf_spacing);
                    diffs.iter().zip(&w).map(|(d, wi)| d * wi).sum()
                }
            }
        }
        MeasureTag::MeanAbsDiff => (a.mean - b.mean).abs(),
    };
    Ok((value.max(0.0), capped))
}

/// Distance between two univariate likelihoods under the given measure,
/// with default numeric parameters.
pub fn univariate_distance(
    p: &UnivariateLikelihood,
    q: &UnivariateLikelihood,
    m: MeasureTag,
    g: &EvaluationGrid,
) -> Result<f64> {
    univariate_distance_with(p, q, m, g, &DistanceParams::default())
}

pub fn univariate_distance_with(
    p: &UnivariateLikelihood,
    q: &UnivariateLikelihood,
    m: MeasureTag,
    g: &EvaluationGrid,
    params: &DistanceParams,
) -> Result<f64> {
    let pa = prepare(p, g)?;
    let pb = prepare(q, g)?;
    Ok(distance_prepared(&pa, &pb, m, params)?.0)
}

/// A fingerprint with every per-AP likelihood preprocessed, plus the
/// invisibility likelihood for APs present only on the other side.
struct PreparedFingerprint<'a> {
    per_ap: std::collections::BTreeMap<&'a str, Prepared>,
}

fn prepare_fingerprint<'a>(
    fp: &'a SegmentFingerprint,
    g: &EvaluationGrid,
) -> Result<PreparedFingerprint<'a>> {
    let mut per_ap = std::collections::BTreeMap::new();
    for (ap, l) in &fp.per_ap {
        per_ap.insert(ap.as_str(), prepare(l, g)?);
    }
    Ok(PreparedFingerprint { per_ap })
}

fn check_aggregatable(m: MeasureTag) -> Result<()> {
    if !m.is_aggregatable() {
        let why = if m.is_similarity() {
            "it is a similarity, not a distance"
        } else {
            "it is asymmetric"
        };
        return Err(Error::Config(format!(
            "measure `{m}` cannot be aggregated over APs: {why}"
        )));
    }
    Ok(())
}

fn segment_distance_prepared(
    a: &PreparedFingerprint<'_>,
    b: &PreparedFingerprint<'_>,
    invisibility: &Prepared,
    m: MeasureTag,
    norm: AggregationNorm,
    params: &DistanceParams,
) -> Result<(f64, usize)> {
    let aps: BTreeSet<&str> = a.per_ap.keys().chain(b.per_ap.keys()).copied().collect();
    let mut per_ap = Vec::with_capacity(aps.len());
    let mut cap_hits = 0;
    for ap in aps {
        let pa = a.per_ap.get(ap).unwrap_or(invisibility);
        let pb = b.per_ap.get(ap).unwrap_or(invisibility);
        // Equal likelihoods (including APs invisible on both sides)
        // contribute exactly 0 and are skipped.
        if pa.source == pb.source {
            continue;
        }
        let (d, capped) = distance_prepared(pa, pb, m, params)?;
        if capped {
            cap_hits += 1;
        }
        per_ap.push(d);
    }
    Ok((norm.aggregate(per_ap), cap_hits))
}

/// Segment distance: the ℓ-norm aggregation of per-AP univariate distances
/// over the union of APs. APs present on one side only are paired against
/// the invisibility likelihood; APs with identical likelihoods on both sides
/// (in particular, invisible on both) contribute 0.
pub fn segment_distance(
    a: &SegmentFingerprint,
    b: &SegmentFingerprint,
    m: MeasureTag,
    norm: AggregationNorm,
    g: &EvaluationGrid,
) -> Result<f64> {
    segment_distance_with(a, b, m, norm, g, &DistanceParams::default())
}

pub fn segment_distance_with(
    a: &SegmentFingerprint,
    b: &SegmentFingerprint,
    m: MeasureTag,
    norm: AggregationNorm,
    g: &EvaluationGrid,
    params: &DistanceParams,
) -> Result<f64> {
    check_aggregatable(m)?;
    if !a.compatible_with(b) {
        return Err(Error::Config(
            "fingerprints were built with different estimators or options".into(),
        ));
    }
    let pa = prepare_fingerprint(a, g)?;
    let pb = prepare_fingerprint(b, g)?;
    let invis = prepare(&invisibility_likelihood(a.method, &a.options), g)?;
    Ok(segment_distance_prepared(&pa, &pb, &invis, m, norm, params)?.0)
}

/// How the matrix was produced, recorded alongside the values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetadata {
    pub measure: MeasureTag,
    pub norm: AggregationNorm,
    pub estimator: Option<EstimatorKind>,
    pub options: Option<EstimatorOptions>,
    pub grid: EvaluationGrid,
    pub params: DistanceParams,
    /// Number of univariate evaluations that hit the Bhattacharyya cap.
    pub bhatt_cap_hits: usize,
}

/// Symmetric pairwise segment-distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub segment_ids: Vec<usize>,
    /// Row-major n×n values.
    pub values: Vec<f64>,
    pub metadata: MatrixMetadata,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    /// Upper-triangle entries (i < j) with their index pair.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.values.len() != n * n {
            return Err(Error::Validation(format!(
                "matrix has {} values for {} segments",
                self.values.len(),
                n
            )));
        }
        for i in 0..n {
            if self.get(i, i) != 0.0 {
                return Err(Error::Validation(format!(
                    "diagonal entry ({i},{i}) is {} instead of 0",
                    self.get(i, i)
                )));
            }
            for j in 0..n {
                let v = self.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!(
                        "entry ({i},{j}) = {v} is not a finite non-negative value"
                    )));
                }
                if (v - self.get(j, i)).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "asymmetry at ({i},{j}): {v} vs {}",
                        self.get(j, i)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Compute the full pairwise distance matrix over the fingerprints. The
/// upper triangle is evaluated (in parallel) and mirrored, so the matrix is
/// exactly symmetric and deterministic regardless of worker count.
pub fn pairwise_matrix(
    fps: &[SegmentFingerprint],
    m: MeasureTag,
    norm: AggregationNorm,
    g: &EvaluationGrid,
    params: &DistanceParams,
) -> Result<DistanceMatrix> {
    check_aggregatable(m)?;
    if fps.len() < 2 {
        return Err(Error::Validation(format!(
            "pairwise matrix needs at least 2 fingerprints, got {}",
            fps.len()
        )));
    }
    for fp in &fps[1..] {
        if !fps[0].compatible_with(fp) {
            return Err(Error::Config(
                "fingerprints were built with different estimators or options".into(),
            ));
        }
    }
    let prepared: Vec<PreparedFingerprint<'_>> = fps
        .iter()
        .map(|fp| prepare_fingerprint(fp, g))
        .collect::<Result<_>>()?;
    let invis = prepare(&invisibility_likelihood(fps[0].method, &fps[0].options), g)?;

    let n = fps.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let computed: Vec<(f64, usize)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            segment_distance_prepared(&prepared[i], &prepared[j], &invis, m, norm, params)
        })
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; n * n];
    let mut cap_hits = 0;
    for (&(i, j), &(d, hits)) in pairs.iter().zip(&computed) {
        values[i * n + j] = d;
        values[j * n + i] = d;
        cap_hits += hits;
    }
    let matrix = DistanceMatrix {
        segment_ids: fps.iter().map(|fp| fp.segment_id).collect(),
        values,
        metadata: MatrixMetadata {
            measure: m,
            norm,
            estimator: Some(fps[0].method),
            options: Some(fps[0].options.clone()),
            grid: *g,
            params: *params,
            bhatt_cap_hits: cap_hits,
        },
    };
    matrix.validate()?;
    Ok(matrix)
}

/// Square CSV with a header row and leading column of segment ids.
pub fn write_matrix_csv<W: Write>(m: &DistanceMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["segment_id".to_string()];
    header.extend(m.segment_ids.iter().map(|id| id.to_string()));
    wtr.write_record(&header)?;
    for (i, id) in m.segment_ids.iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend((0..m.n()).map(|j| m.get(i, j).to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct MatrixSidecar {
    segment_ids: Vec<usize>,
    metadata: MatrixMetadata,
}

/// Compact binary form: little-endian f64 values, row-major, with a JSON
/// sidecar carrying segment ids and metadata.
pub fn write_matrix_binary<W1: Write, W2: Write>(
    m: &DistanceMatrix,
    mut data: W1,
    sidecar: W2,
) -> Result<()> {
    for v in &m.values {
        data.write_all(&v.to_le_bytes())?;
    }
    serde_json::to_writer_pretty(
        sidecar,
        &MatrixSidecar {
            segment_ids: m.segment_ids.clone(),
            metadata: m.metadata.clone(),
        },
    )?;
    Ok(())
}

/// Read a matrix written by [`write_matrix_binary`], validating shape and
/// invariants.
pub fn read_matrix_binary<R1: Read, R2: Read>(mut data: R1, sidecar: R2) -> Result<DistanceMatrix> {
    let side: MatrixSidecar = serde_json::from_reader(sidecar)?;
    let n = side.segment_ids.len();
    let mut bytes = Vec::new();
    data.read_to_end(&mut bytes)?;
    if bytes.len() != n * n * 8 {
        return Err(Error::Validation(format!(
            "matrix data holds {} bytes, expected {} for n = {n}",
            bytes.len(),
            n * n * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let matrix = DistanceMatrix {
        segment_ids: side.segment_ids,
        values,
        metadata: side.metadata,
    };
    matrix.validate()?;
    Ok(matrix)
}
