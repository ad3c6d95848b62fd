//! Command bodies. Stages hand off through files in the run directory:
//! each command first honors an explicit input flag, then a previously
//! written artifact of the same config, and otherwise derives the upstream
//! result in memory — from the configured input files, or from the
//! synthetic scene when no WiFi input is configured.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use topomap::distance::{pairwise_matrix, read_matrix_binary, write_matrix_binary, write_matrix_csv};
use topomap::embed::{classical_mds, write_embedding_csv, write_embedding_svg};
use topomap::error::{Error, Result};
use topomap::eval::scene::generate_synthetic_scene;
use topomap::eval::{correlations, label_pairs, read_labels_csv, roc_auc, write_labels_csv, write_roc_csv};
use topomap::ingest::{
    read_accel_file, read_wifi_file, write_accel_csv, write_wifi_csv, Blacklist,
};
use topomap::likelihood::{
    fingerprint_segment, read_fingerprints_jsonl, write_fingerprints_jsonl,
};
use topomap::motionseg::{
    extract_stationary_segments, populate_segment_observations, read_segments_csv,
    segment_motion, write_boundaries_csv, write_segments_csv,
};
use topomap::{
    AccelObservation, CorrelationReport, DistanceMatrix, EstimatorKind, EstimatorOptions,
    LabeledSegment, SegmentFingerprint, WifiDataset, WifiSegment,
};

use crate::artifacts::{write_atomic, RunContext};

/// Input data after blacklist filtering and device restriction.
pub struct DataSource {
    pub wifi: WifiDataset,
    pub accel: Vec<AccelObservation>,
    pub labels: Option<Vec<LabeledSegment>>,
}

/// Lazily loaded data source: commands fed entirely from artifact files
/// never touch the raw inputs.
#[derive(Default)]
pub struct SourceCache {
    loaded: Option<DataSource>,
}

impl SourceCache {
    fn get(&mut self, ctx: &mut RunContext) -> Result<&DataSource> {
        if self.loaded.is_none() {
            self.loaded = Some(load_source(ctx)?);
        }
        Ok(self.loaded.as_ref().expect("just loaded"))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(BufReader::new(file))
}

fn load_source(ctx: &mut RunContext) -> Result<DataSource> {
    if let Some(wifi_path) = ctx.cfg.wifi.clone() {
        let mut wifi = read_wifi_file(&wifi_path)?;
        if let Some(bl_path) = &ctx.cfg.blacklist {
            wifi = wifi.filter_mobile_aps(&Blacklist::from_path(bl_path)?);
        }
        if let Some(device) = &ctx.cfg.device {
            if !wifi.has_device(device) {
                return Err(Error::Validation(format!(
                    "device `{device}` does not appear in {}",
                    wifi_path.display()
                )));
            }
            wifi = wifi.restrict_device(device);
        } else {
            let devices = wifi.devices();
            if devices.len() > 1 {
                let names: Vec<String> = devices.into_iter().collect();
                return Err(Error::Validation(format!(
                    "{} holds {} devices ({}); pick one with --device",
                    wifi_path.display(),
                    names.len(),
                    names.join(", ")
                )));
            }
        }
        let accel = match &ctx.cfg.accel {
            Some(path) => {
                let all = read_accel_file(path)?;
                match &ctx.cfg.device {
                    Some(device) => all.into_iter().filter(|o| &o.device == device).collect(),
                    None => all,
                }
            }
            None => Vec::new(),
        };
        let labels = match &ctx.cfg.labels {
            Some(path) => Some(read_labels_csv(open(path)?)?),
            None => None,
        };
        Ok(DataSource { wifi, accel, labels })
    } else {
        let mut scene_cfg = ctx.cfg.scene.clone();
        scene_cfg.seed = ctx.cfg.seed;
        let scene = generate_synthetic_scene(&scene_cfg)?;
        ctx.warnings.extend(scene.warnings);
        Ok(DataSource {
            wifi: scene.dataset,
            accel: scene.accel,
            labels: Some(scene.labels),
        })
    }
}

/// Segment interval rows with empty observation lists; callers refill them
/// against whichever dataset variant (raw or invisibility-augmented) the
/// stage operates on.
fn obtain_segments(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    explicit: Option<&Path>,
) -> Result<Vec<WifiSegment>> {
    if let Some(path) = explicit {
        return read_segments_csv(open(path)?);
    }
    let default = ctx.path("segments.csv");
    if default.exists() {
        return read_segments_csv(open(&default)?);
    }
    let src = cache.get(ctx)?;
    let seg = segment_motion(&src.accel, src.wifi.time_span(), &ctx.cfg.window)?;
    let mut segments = extract_stationary_segments(&src.wifi, &seg, ctx.cfg.min_segment_ms);
    for s in &mut segments {
        s.observations.clear();
    }
    Ok(segments)
}

/// The dataset a fingerprinting stage sees: augmented with −100 dBm
/// invisibility rows when the invisibility option is on.
fn fingerprint_dataset(wifi: &WifiDataset, options: &EstimatorOptions, scan_epsilon_ms: i64) -> WifiDataset {
    if options.model_invisibility {
        wifi.augment_ap_invisibility(scan_epsilon_ms)
    } else {
        wifi.clone()
    }
}

fn fingerprint_all(
    segments: &[WifiSegment],
    ds: &WifiDataset,
    kind: EstimatorKind,
    options: &EstimatorOptions,
) -> Result<Vec<SegmentFingerprint>> {
    segments
        .iter()
        .map(|seg| {
            if seg.observations.is_empty() {
                return Err(Error::Validation(format!(
                    "segment {} has no observations in the WiFi input; \
                     check that the segments file matches the data",
                    seg.segment_id
                )));
            }
            fingerprint_segment(seg, ds.ap_universe(), kind, options)
        })
        .collect()
}

fn build_fingerprints(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    segments_flag: Option<&Path>,
) -> Result<Vec<SegmentFingerprint>> {
    let mut segments = obtain_segments(ctx, cache, segments_flag)?;
    if segments.is_empty() {
        return Err(Error::Validation(
            "no stationary segments to fingerprint".into(),
        ));
    }
    let wifi = &cache.get(ctx)?.wifi;
    let ds = fingerprint_dataset(wifi, &ctx.cfg.options, ctx.cfg.scan_epsilon_ms);
    populate_segment_observations(&ds, &mut segments);
    fingerprint_all(&segments, &ds, ctx.cfg.estimator, &ctx.cfg.options)
}

fn obtain_fingerprints(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    explicit: Option<&Path>,
) -> Result<Vec<SegmentFingerprint>> {
    if let Some(path) = explicit {
        return read_fingerprints_jsonl(open(path)?);
    }
    let default = ctx.path("fingerprints.jsonl");
    if default.exists() {
        return read_fingerprints_jsonl(open(&default)?);
    }
    build_fingerprints(ctx, cache, None)
}

fn sidecar_of(data_path: &Path) -> PathBuf {
    data_path.with_extension("meta.json")
}

fn obtain_matrix(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    explicit: Option<&Path>,
) -> Result<DistanceMatrix> {
    if let Some(path) = explicit {
        return read_matrix_binary(open(path)?, open(&sidecar_of(path))?);
    }
    let data = ctx.path("distances.bin");
    let sidecar = ctx.path("distances.meta.json");
    if data.exists() && sidecar.exists() {
        return read_matrix_binary(open(&data)?, open(&sidecar)?);
    }
    let fps = obtain_fingerprints(ctx, cache, None)?;
    pairwise_matrix(&fps, ctx.cfg.measure, ctx.cfg.norm, &ctx.cfg.grid, &ctx.cfg.params)
}

/// Ground-truth labels: the configured file, then a `labels.csv` written by
/// `simulate` under the same config, then the synthetic scene itself.
fn resolve_labels(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    required: bool,
) -> Result<Option<Vec<LabeledSegment>>> {
    if let Some(path) = ctx.cfg.labels.clone() {
        return Ok(Some(read_labels_csv(open(&path)?)?));
    }
    let default = ctx.path("labels.csv");
    if default.exists() {
        return Ok(Some(read_labels_csv(open(&default)?)?));
    }
    if ctx.cfg.wifi.is_none() {
        return Ok(cache.get(ctx)?.labels.clone());
    }
    if required {
        return Err(Error::Config(
            "ground-truth labels are required: pass --labels or configure `labels`".into(),
        ));
    }
    Ok(None)
}

pub fn segment(ctx: &mut RunContext, cache: &mut SourceCache) -> Result<()> {
    let (seg, segments) = ctx.time("segment", |ctx| {
        let src = cache.get(ctx)?;
        let seg = segment_motion(&src.accel, src.wifi.time_span(), &ctx.cfg.window)?;
        let segments = extract_stationary_segments(&src.wifi, &seg, ctx.cfg.min_segment_ms);
        Ok((seg, segments))
    })?;
    if segments.is_empty() {
        ctx.warnings
            .push("no stationary segment met the minimum duration".into());
    }
    ctx.write_artifact("boundaries.csv", |w| write_boundaries_csv(&seg, w))?;
    ctx.write_artifact("segments.csv", |w| write_segments_csv(&segments, w))?;
    Ok(())
}

pub fn fingerprint(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    segments_flag: Option<&Path>,
) -> Result<()> {
    let fps = ctx.time("fingerprints", |ctx| {
        build_fingerprints(ctx, cache, segments_flag)
    })?;
    ctx.write_artifact("fingerprints.jsonl", |w| write_fingerprints_jsonl(&fps, w))
}

pub fn distances(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    fingerprints_flag: Option<&Path>,
) -> Result<()> {
    let fps = ctx.time("fingerprints", |ctx| {
        obtain_fingerprints(ctx, cache, fingerprints_flag)
    })?;
    let matrix = ctx.time("matrix", |ctx| {
        pairwise_matrix(&fps, ctx.cfg.measure, ctx.cfg.norm, &ctx.cfg.grid, &ctx.cfg.params)
    })?;
    ctx.write_artifact("distances.csv", |w| write_matrix_csv(&matrix, w))?;
    ctx.write_artifact_pair("distances.bin", "distances.meta.json", |data, sidecar| {
        write_matrix_binary(&matrix, data, sidecar)
    })
}

/// How many labelled, positioned segments the matrix actually contains;
/// floor-plan correlations need at least two.
fn positioned_in(matrix: &DistanceMatrix, labels: &[LabeledSegment]) -> usize {
    let ids: BTreeSet<usize> = matrix.segment_ids.iter().copied().collect();
    labels
        .iter()
        .filter(|l| l.position().is_some() && ids.contains(&l.segment_id))
        .count()
}

pub fn evaluate(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    matrix_flag: Option<&Path>,
) -> Result<()> {
    let matrix = ctx.time("matrix", |ctx| obtain_matrix(ctx, cache, matrix_flag))?;
    let labels = resolve_labels(ctx, cache, true)?.expect("labels required");
    let (roc, corr, n_same, n_diff) = ctx.time("evaluate", |ctx| {
        let (same, diff) = label_pairs(&matrix, &labels)?;
        let roc = roc_auc(&same, &diff)?;
        let corr = if positioned_in(&matrix, &labels) >= 2 {
            Some(correlations(&matrix, &labels)?)
        } else {
            ctx.warnings.push(
                "fewer than 2 positioned segments; floor-plan correlations skipped".into(),
            );
            None
        };
        Ok((roc, corr, same.len(), diff.len()))
    })?;

    #[derive(Serialize)]
    struct Report<'a> {
        config_hash: &'a str,
        n_segments: usize,
        n_same_pairs: usize,
        n_diff_pairs: usize,
        auc: f64,
        correlations: Option<&'a CorrelationReport>,
    }
    let report = Report {
        config_hash: &ctx.hash,
        n_segments: matrix.n(),
        n_same_pairs: n_same,
        n_diff_pairs: n_diff,
        auc: roc.auc,
        correlations: corr.as_ref(),
    };
    let body = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    ctx.write_artifact("roc.csv", |w| write_roc_csv(&roc, w))?;
    ctx.write_artifact("report.json", move |w| {
        writeln!(w, "{body}")?;
        Ok(())
    })
}

pub fn embed(
    ctx: &mut RunContext,
    cache: &mut SourceCache,
    matrix_flag: Option<&Path>,
) -> Result<()> {
    let matrix = ctx.time("matrix", |ctx| obtain_matrix(ctx, cache, matrix_flag))?;
    let embedding = ctx.time("embed", |_| classical_mds(&matrix, 2))?;
    ctx.warnings.extend(embedding.warnings.iter().cloned());
    let labels = resolve_labels(ctx, cache, false)?;
    ctx.write_artifact("embedding.csv", |w| {
        write_embedding_csv(&embedding, labels.as_deref(), w)
    })?;
    ctx.write_artifact("embedding.svg", |w| {
        write_embedding_svg(&embedding, labels.as_deref(), w)
    })
}

pub fn simulate(ctx: &mut RunContext) -> Result<()> {
    let scene = ctx.time("scene", |ctx| {
        let mut scene_cfg = ctx.cfg.scene.clone();
        scene_cfg.seed = ctx.cfg.seed;
        generate_synthetic_scene(&scene_cfg)
    })?;
    ctx.warnings.extend(scene.warnings.iter().cloned());
    ctx.write_artifact("wifi.csv", |w| write_wifi_csv(&scene.dataset, w))?;
    ctx.write_artifact("accel.csv", |w| write_accel_csv(&scene.accel, w))?;
    // Named apart from the pipeline's own segments.csv: these intervals are
    // the generator's ground truth, not a segmentation result.
    ctx.write_artifact("segments-truth.csv", |w| write_segments_csv(&scene.segments, w))?;
    ctx.write_artifact("labels.csv", |w| write_labels_csv(&scene.labels, w))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Combo {
    estimator: EstimatorKind,
    measure: topomap::MeasureTag,
    norm: topomap::AggregationNorm,
    invisibility: bool,
}

#[derive(Serialize, Deserialize, PartialEq, Clone)]
struct ComboKey {
    estimator: String,
    measure: String,
    norm: String,
    invisibility: bool,
}

impl Combo {
    fn key(&self) -> ComboKey {
        ComboKey {
            estimator: self.estimator.as_str().into(),
            measure: self.measure.as_str().into(),
            norm: self.norm.as_str().into(),
            invisibility: self.invisibility,
        }
    }

    fn row_prefix(&self) -> String {
        format!(
            "{},{},{},{}",
            self.estimator.as_str(),
            self.measure.as_str(),
            self.norm.as_str(),
            self.invisibility
        )
    }

    /// Fingerprint-set index: one per (estimator, invisibility).
    fn fp_index(&self) -> usize {
        let e = EstimatorKind::ALL
            .iter()
            .position(|k| *k == self.estimator)
            .expect("known estimator");
        e * 2 + usize::from(self.invisibility)
    }
}

/// The full comparison grid: 3 estimators × 7 symmetric measures ×
/// 2 norms × 2 invisibility settings = 84 combinations, in fixed order.
fn sweep_combos() -> Vec<Combo> {
    let mut combos = Vec::with_capacity(84);
    for estimator in EstimatorKind::ALL {
        for measure in topomap::MeasureTag::AGGREGATABLE {
            for norm in topomap::AggregationNorm::ALL {
                for invisibility in [false, true] {
                    combos.push(Combo {
                        estimator,
                        measure,
                        norm,
                        invisibility,
                    });
                }
            }
        }
    }
    combos
}

#[derive(Serialize, Deserialize)]
struct SweepProgress {
    config_hash: String,
    total: usize,
    completed: Vec<ComboKey>,
}

const SWEEP_HEADER: &str = "estimator,measure,norm,invisibility,auc,pearson,spearman,kendall";

/// Rows already computed by an interrupted run of the same config: the
/// completed-combinations marker must match a prefix of the combo order and
/// the CSV must contain exactly those rows.
fn resume_rows(ctx: &RunContext, combos: &[Combo]) -> Result<Vec<String>> {
    let marker_path = ctx.path("sweep.progress.json");
    let csv_path = ctx.path("sweep.csv");
    if !marker_path.exists() || !csv_path.exists() {
        return Ok(Vec::new());
    }
    let progress: SweepProgress = match serde_json::from_reader(open(&marker_path)?) {
        Ok(p) => p,
        Err(_) => return Ok(Vec::new()),
    };
    if progress.config_hash != ctx.hash
        || progress.total != combos.len()
        || progress.completed.len() > combos.len()
    {
        return Ok(Vec::new());
    }
    let prefix_matches = progress
        .completed
        .iter()
        .zip(combos)
        .all(|(key, combo)| *key == combo.key());
    if !prefix_matches {
        return Ok(Vec::new());
    }
    let mut lines = Vec::new();
    for line in open(&csv_path)?.lines() {
        lines.push(line?);
    }
    if lines.first().map(String::as_str) != Some(SWEEP_HEADER)
        || lines.len() < progress.completed.len() + 1
    {
        return Ok(Vec::new());
    }
    let rows: Vec<String> = lines[1..=progress.completed.len()].to_vec();
    let consistent = rows
        .iter()
        .zip(combos)
        .all(|(row, combo)| row.starts_with(&format!("{},", combo.row_prefix())));
    if !consistent {
        return Ok(Vec::new());
    }
    Ok(rows)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_sweep_marker(
    path: &Path,
    hash: &str,
    total: usize,
    completed: &[Combo],
) -> Result<()> {
    let progress = SweepProgress {
        config_hash: hash.to_string(),
        total,
        completed: completed.iter().map(Combo::key).collect(),
    };
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &progress)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn sweep(ctx: &mut RunContext, cache: &mut SourceCache) -> Result<()> {
    let combos = sweep_combos();

    let segments = ctx.time("segments", |ctx| obtain_segments(ctx, cache, None))?;
    if segments.is_empty() {
        return Err(Error::Validation("no stationary segments to sweep over".into()));
    }
    let labels = resolve_labels(ctx, cache, true)?.expect("labels required");

    // Six fingerprint sets (estimator × invisibility), shared by all
    // measure/norm cells.
    let fp_sets: Vec<Vec<SegmentFingerprint>> = ctx.time("fingerprints", |ctx| {
        let wifi = cache.get(ctx)?.wifi.clone();
        let ds_aug = wifi.augment_ap_invisibility(ctx.cfg.scan_epsilon_ms);
        let mut segs_plain = segments.clone();
        populate_segment_observations(&wifi, &mut segs_plain);
        let mut segs_aug = segments.clone();
        populate_segment_observations(&ds_aug, &mut segs_aug);
        let mut sets = Vec::with_capacity(6);
        for kind in EstimatorKind::ALL {
            for invisibility in [false, true] {
                let options = EstimatorOptions {
                    model_invisibility: invisibility,
                    ..ctx.cfg.options.clone()
                };
                let (segs, ds) = if invisibility {
                    (&segs_aug, &ds_aug)
                } else {
                    (&segs_plain, &wifi)
                };
                sets.push(fingerprint_all(segs, ds, kind, &options)?);
            }
        }
        Ok(sets)
    })?;

    let csv_path = ctx.path("sweep.csv");
    let marker_path = ctx.path("sweep.progress.json");
    let hash = ctx.hash.clone();

    let mut rows = resume_rows(ctx, &combos)?;
    let resumed = rows.len();

    // Re-establish a clean prefix file, then append each completed row and
    // refresh the marker so an interrupted sweep resumes where it stopped.
    write_atomic(&csv_path, |w| {
        writeln!(w, "{SWEEP_HEADER}")?;
        for row in &rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    })?;
    write_sweep_marker(&marker_path, &hash, combos.len(), &combos[..resumed])?;

    ctx.time("sweep", |ctx| {
        let mut appender =
            BufWriter::new(std::fs::OpenOptions::new().append(true).open(&csv_path)?);
        for (i, combo) in combos.iter().enumerate().skip(resumed) {
            let matrix = pairwise_matrix(
                &fp_sets[combo.fp_index()],
                combo.measure,
                combo.norm,
                &ctx.cfg.grid,
                &ctx.cfg.params,
            )?;
            let (same, diff) = label_pairs(&matrix, &labels)?;
            let auc = roc_auc(&same, &diff)?.auc;
            let corr = if positioned_in(&matrix, &labels) >= 2 {
                Some(correlations(&matrix, &labels)?)
            } else {
                None
            };
            let row = format!(
                "{},{},{},{},{}",
                combo.row_prefix(),
                auc,
                fmt_opt(corr.as_ref().map(|c| c.pearson)),
                fmt_opt(corr.as_ref().map(|c| c.spearman)),
                fmt_opt(corr.as_ref().map(|c| c.kendall_tau)),
            );
            writeln!(appender, "{row}")?;
            appender.flush()?;
            rows.push(row);
            write_sweep_marker(&marker_path, &hash, combos.len(), &combos[..=i])?;
        }
        Ok(())
    })?;

    // Final atomic rewrite: same bytes, placed in one rename.
    ctx.write_artifact("sweep.csv", |w| {
        writeln!(w, "{SWEEP_HEADER}")?;
        for row in &rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    })
}
