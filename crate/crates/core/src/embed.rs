//! Classical (Torgerson) multidimensional scaling: lay out segments in the
//! plane so that Euclidean distances between points approximate the entries
//! of a distance matrix. Deterministic — no iterative initialization.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::eval::LabeledSegment;

/// Eigenvalue magnitudes below this (relative to the largest) count as zero.
const EIGEN_TOL: f64 = 1e-10;

/// A low-dimensional layout of segments recovered from their distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub segment_ids: Vec<usize>,
    /// One coordinate row per segment, `dim` columns, axes ordered by
    /// decreasing eigenvalue.
    pub coords: Vec<Vec<f64>>,
    /// The top `dim` eigenvalues of the double-centered matrix, sorted
    /// descending, as computed (negatives are zeroed only for coordinates).
    pub eigenvalues: Vec<f64>,
    /// Kruskal stress-1 between input and embedded distances (diagnostic).
    pub stress: f64,
    /// Reduced rank, negative eigenvalues and similar diagnostics.
    pub warnings: Vec<String>,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    /// Euclidean distance between embedded points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.coords[i]
            .iter()
            .zip(&self.coords[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Embed a distance matrix in `dim` dimensions via the Torgerson procedure:
/// square the distances, double-center (`B = −½·J·D²·J`), eigendecompose,
/// and scale the top eigenvectors by the square roots of their eigenvalues.
///
/// Coordinates are canonicalized for reproducibility: centered at the
/// origin, axes in decreasing-eigenvalue order (so the first principal axis
/// is x), and each axis's sign fixed so its first nonzero coordinate is
/// positive.
///
/// Negative eigenvalues among the top `dim` are zeroed for coordinates;
/// negative eigenvalues anywhere in the spectrum mean the input is not
/// Euclidean-realizable and are surfaced as a warning, as is an embedding
/// with fewer than `dim` positive axes.
pub fn classical_mds(m: &DistanceMatrix, dim: usize) -> Result<Embedding> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be ≥ 1".into()));
    }
    m.validate()?;
    let n = m.n();
    if n < dim + 1 {
        return Err(Error::Validation(format!(
            "need at least {} segments for a {dim}-D embedding, got {n}",
            dim + 1
        )));
    }

    // Double-centered squared distances without forming J explicitly:
    // b_ij = −½·(d²_ij − rowmean_i − colmean_j + grandmean).
    let sq = |i: usize, j: usize| m.get(i, j).powi(2);
    let mut row_mean = vec![0.0; n];
    for i in 0..n {
        row_mean[i] = (0..n).map(|j| sq(i, j)).sum::<f64>() / n as f64;
    }
    let grand_mean = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq(i, j) - row_mean[i] - row_mean[j] + grand_mean)
    });

    let eigen: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::try_new(b, EIGEN_TOL, 0)
        .ok_or_else(|| Error::Numeric("eigendecomposition did not converge".into()))?;

    // Sort eigenpairs by decreasing eigenvalue.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted: Vec<f64> = order.iter().map(|&k| eigen.eigenvalues[k]).collect();

    let scale = sorted[0].abs().max(1.0);
    let positive = sorted.iter().filter(|&&l| l > EIGEN_TOL * scale).count();
    let negative: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&l| l < -EIGEN_TOL * scale)
        .collect();

    let mut warnings = Vec::new();
    if positive < dim {
        warnings.push(format!(
            "reduced-rank embedding: only {positive} of {dim} axes carry positive variance"
        ));
    }
    if !negative.is_empty() {
        warnings.push(format!(
            "input is not Euclidean-realizable: {} negative eigenvalue(s), most negative {:e}",
            negative.len(),
            negative.last().unwrap()
        ));
    }

    let mut coords = vec![vec![0.0; dim]; n];
    for (axis, &k) in order.iter().take(dim).enumerate() {
        let lambda = eigen.eigenvalues[k].max(0.0);
        let factor = lambda.sqrt();
        for i in 0..n {
            coords[i][axis] = eigen.eigenvectors[(i, k)] * factor;
        }
    }

    // Canonicalize. The axes are already the principal axes in decreasing
    // eigenvalue order; center each (eigenvectors with λ ≈ 0 need not be
    // orthogonal to 1) and fix each axis's sign.
    for axis in 0..dim {
        let mean = coords.iter().map(|row| row[axis]).sum::<f64>() / n as f64;
        for row in coords.iter_mut() {
            row[axis] -= mean;
        }
        let lead = coords.iter().map(|row| row[axis]).find(|v| v.abs() > 1e-12);
        if let Some(v) = lead {
            if v < 0.0 {
                for row in coords.iter_mut() {
                    row[axis] = -row[axis];
                }
            }
        }
    }

    let mut embedding = Embedding {
        segment_ids: m.segment_ids.clone(),
        coords,
        eigenvalues: sorted[..dim].to_vec(),
        stress: 0.0,
        warnings,
    };
    embedding.stress = kruskal_stress(m, &embedding);
    Ok(embedding)
}

/// Kruskal stress-1 normalized by the input distances:
/// `√(Σ_{i<j} (δ_ij − d_ij)² / Σ_{i<j} δ_ij²)`; 0 when all inputs are zero.
fn kruskal_stress(m: &DistanceMatrix, e: &Embedding) -> f64 {
    let n = m.n();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let input = m.get(i, j);
            num += (input - e.distance(i, j)).powi(2);
            den += input * input;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

fn label_index(labels: Option<&[LabeledSegment]>) -> BTreeMap<usize, &str> {
    labels
        .unwrap_or_default()
        .iter()
        .map(|l| (l.segment_id, l.label.as_str()))
        .collect()
}

/// Write a 2-D embedding as CSV `segment_id,x,y[,label]`; the label column
/// appears only when labels are supplied.
pub fn write_embedding_csv<W: Write>(
    e: &Embedding,
    labels: Option<&[LabeledSegment]>,
    writer: W,
) -> Result<()> {
    if e.dim() != 2 {
        return Err(Error::Config(format!(
            "embedding CSV is 2-D, got {} axes",
            e.dim()
        )));
    }
    let by_id = label_index(labels);
    let mut wtr = csv::Writer::from_writer(writer);
    if labels.is_some() {
        wtr.write_record(["segment_id", "x", "y", "label"])?;
    } else {
        wtr.write_record(["segment_id", "x", "y"])?;
    }
    for (i, id) in e.segment_ids.iter().enumerate() {
        let mut row = vec![
            id.to_string(),
            e.coords[i][0].to_string(),
            e.coords[i][1].to_string(),
        ];
        if labels.is_some() {
            row.push(by_id.get(id).copied().unwrap_or("").to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

const SVG_PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// Render a 2-D embedding as a minimal SVG scatter plot with label-keyed
/// colors and a legend. Presentation only.
pub fn write_embedding_svg<W: Write>(
    e: &Embedding,
    labels: Option<&[LabeledSegment]>,
    mut writer: W,
) -> Result<()> {
    if e.dim() != 2 {
        return Err(Error::Config(format!(
            "embedding plot is 2-D, got {} axes",
            e.dim()
        )));
    }
    let by_id = label_index(labels);
    let mut palette: BTreeMap<&str, &str> = BTreeMap::new();
    for label in by_id.values() {
        let next = SVG_PALETTE[palette.len() % SVG_PALETTE.len()];
        palette.entry(label).or_insert(next);
    }

    let (width, height, margin) = (640.0, 480.0, 40.0);
    let min = |axis: usize| {
        e.coords
            .iter()
            .map(|row| row[axis])
            .fold(f64::INFINITY, f64::min)
    };
    let max = |axis: usize| {
        e.coords
            .iter()
            .map(|row| row[axis])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (x0, x1, y0, y1) = (min(0), max(0), min(1), max(1));
    let span_x = (x1 - x0).max(1e-9);
    let span_y = (y1 - y0).max(1e-9);
    let px = |x: f64| margin + (x - x0) / span_x * (width - 2.0 * margin);
    // SVG y grows downward; flip so larger y plots higher.
    let py = |y: f64| height - margin - (y - y0) / span_y * (height - 2.0 * margin);

    writeln!(
        writer,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    )?;
    writeln!(
        writer,
        "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    )?;
    for (i, id) in e.segment_ids.iter().enumerate() {
        let fill = by_id
            .get(id)
            .and_then(|label| palette.get(label).copied())
            .unwrap_or("#808080");
        writeln!(
            writer,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{fill}\"><title>segment {id}</title></circle>",
            px(e.coords[i][0]),
            py(e.coords[i][1]),
        )?;
    }
    for (row, (label, color)) in palette.iter().enumerate() {
        let y = margin / 2.0 + row as f64 * 16.0;
        writeln!(
            writer,
            "  <rect x=\"8\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
            y - 9.0
        )?;
        writeln!(
            writer,
            "  <text x=\"22\" y=\"{y:.2}\" font-size=\"12\" font-family=\"sans-serif\">{label}</text>"
        )?;
    }
    writeln!(writer, "</svg>")?;
    Ok(())
}
