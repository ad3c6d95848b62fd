//! Pipeline configuration: one JSON file, every scalar also settable on the
//! command line (command line wins), hashed into a short id that names the
//! run directory and is echoed by every manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use topomap::distance::DistanceParams;
use topomap::error::{Error, Result};
use topomap::motionseg::DEFAULT_MIN_SEGMENT_MS;
use topomap::{
    AggregationNorm, EstimatorKind, EstimatorOptions, EvaluationGrid, MeasureTag,
    SyntheticSceneConfig, WindowConfig,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TOPOMAP_OUT_DIR";

/// Scan-grouping tolerance when inserting −100 dBm invisibility rows.
pub const DEFAULT_SCAN_EPSILON_MS: i64 = 1000;

/// Everything a pipeline run needs, for all stages. Partial config files are
/// fine: missing fields take these defaults, unknown fields are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// WiFi observations (CSV or JSONL). Absent: commands fall back to the
    /// synthetic scene below.
    pub wifi: Option<PathBuf>,
    /// Acceleration magnitudes (CSV or JSONL).
    pub accel: Option<PathBuf>,
    /// SSID blacklist file, one `prefix:`/`suffix:` rule per line.
    pub blacklist: Option<PathBuf>,
    /// Ground-truth labels CSV `segment_id,label,x,y`.
    pub labels: Option<PathBuf>,
    /// Keep only this device; required when the input holds several.
    pub device: Option<String>,
    pub window: WindowConfig,
    /// Minimum stationary-segment duration kept by extraction, ms.
    pub min_segment_ms: i64,
    pub scan_epsilon_ms: i64,
    pub estimator: EstimatorKind,
    pub options: EstimatorOptions,
    pub measure: MeasureTag,
    pub norm: AggregationNorm,
    pub grid: EvaluationGrid,
    pub params: DistanceParams,
    /// Seed for the synthetic scene; overrides `scene.seed`.
    pub seed: u64,
    pub scene: SyntheticSceneConfig,
    pub out_dir: PathBuf,
    /// Worker threads for pairwise-matrix work; absent = all cores.
    /// Excluded from the config hash — it cannot change artifact content.
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            wifi: None,
            accel: None,
            blacklist: None,
            labels: None,
            device: None,
            window: WindowConfig::default(),
            min_segment_ms: DEFAULT_MIN_SEGMENT_MS,
            scan_epsilon_ms: DEFAULT_SCAN_EPSILON_MS,
            estimator: EstimatorKind::Kde,
            options: EstimatorOptions::default(),
            measure: MeasureTag::EarthMovers,
            norm: AggregationNorm::L2,
            grid: EvaluationGrid::default(),
            params: DistanceParams::default(),
            seed: 42,
            scene: SyntheticSceneConfig::default(),
            out_dir: default_out_dir(),
            jobs: None,
        }
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("topomap-out"))
}

/// Load a config file, or the defaults when no file is given. File problems
/// are usage errors: the config names the run, it is not pipeline data.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
}

/// First 12 hex digits of the SHA-256 of the canonical (sorted-key) JSON
/// form of the config, with `jobs` removed.
pub fn config_hash(cfg: &PipelineConfig) -> String {
    let mut value = serde_json::to_value(cfg).expect("config serializes");
    if let serde_json::Value::Object(map) = &mut value {
        map.remove("jobs");
    }
    let mut hasher = Sha256::new();
    hasher.update(value.to_string().as_bytes());
    let digest = hasher.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct OverrideFlags {
    /// WiFi observations file (CSV or JSONL)
    #[arg(long, global = true, value_name = "FILE")]
    pub wifi: Option<PathBuf>,
    /// Acceleration file (CSV or JSONL)
    #[arg(long, global = true, value_name = "FILE")]
    pub accel: Option<PathBuf>,
    /// SSID blacklist file
    #[arg(long, global = true, value_name = "FILE")]
    pub blacklist: Option<PathBuf>,
    /// Ground-truth labels CSV
    #[arg(long, global = true, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Device to restrict the input to
    #[arg(long, global = true)]
    pub device: Option<String>,
    /// Motion window length, ms
    #[arg(long, global = true, value_name = "MS")]
    pub window_ms: Option<i64>,
    /// Motion window hop, ms
    #[arg(long, global = true, value_name = "MS")]
    pub hop_ms: Option<i64>,
    /// Motion window statistic: energy | variance
    #[arg(long, global = true, value_parser = parse_statistic)]
    pub statistic: Option<topomap::WindowStatistic>,
    /// Moving/stationary decision threshold, (m/s²)²
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Treat a missing acceleration stream as one stationary span
    #[arg(long, global = true)]
    pub assume_stationary: Option<bool>,
    /// Minimum stationary-segment duration, ms
    #[arg(long, global = true, value_name = "MS")]
    pub min_segment_ms: Option<i64>,
    /// Scan-grouping tolerance for invisibility rows, ms
    #[arg(long, global = true, value_name = "MS")]
    pub scan_epsilon_ms: Option<i64>,
    /// Likelihood estimator: pmf | normal | kde
    #[arg(long, global = true, value_parser = parse_estimator)]
    pub estimator: Option<EstimatorKind>,
    /// KDE bandwidth, dBm
    #[arg(long, global = true)]
    pub bandwidth: Option<f64>,
    /// Laplace smoothing constant for PMFs
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Model invisible APs with the −100 dBm likelihood: true | false
    #[arg(long, global = true)]
    pub invisibility: Option<bool>,
    /// Distance measure: kl | symkl | jsd | bc | bhatt | hellinger | ks | emd | mad
    #[arg(long, global = true, value_parser = parse_measure)]
    pub measure: Option<MeasureTag>,
    /// Per-AP aggregation norm: l1 | l2
    #[arg(long, global = true, value_parser = parse_norm)]
    pub norm: Option<AggregationNorm>,
    /// Evaluation grid lower edge, dBm
    #[arg(long, global = true)]
    pub grid_lo: Option<f64>,
    /// Evaluation grid upper edge, dBm
    #[arg(long, global = true)]
    pub grid_hi: Option<f64>,
    /// Evaluation grid step, dBm
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,
    /// Cap on the Bhattacharyya distance for vanishing overlap
    #[arg(long, global = true)]
    pub bhatt_cap: Option<f64>,
    /// Density floor guarding the divergence logarithms
    #[arg(long, global = true)]
    pub density_floor: Option<f64>,
    /// Seed for the synthetic scene
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: $TOPOMAP_OUT_DIR or ./topomap-out)
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (0 or absent = all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

impl OverrideFlags {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = &self.wifi {
            cfg.wifi = Some(v.clone());
        }
        if let Some(v) = &self.accel {
            cfg.accel = Some(v.clone());
        }
        if let Some(v) = &self.blacklist {
            cfg.blacklist = Some(v.clone());
        }
        if let Some(v) = &self.labels {
            cfg.labels = Some(v.clone());
        }
        if let Some(v) = &self.device {
            cfg.device = Some(v.clone());
        }
        if let Some(v) = self.window_ms {
            cfg.window.window_ms = v;
        }
        if let Some(v) = self.hop_ms {
            cfg.window.hop_ms = v;
        }
        if let Some(v) = self.statistic {
            cfg.window.statistic = v;
        }
        if let Some(v) = self.threshold {
            cfg.window.threshold = v;
        }
        if let Some(v) = self.assume_stationary {
            cfg.window.assume_stationary_when_no_accel = v;
        }
        if let Some(v) = self.min_segment_ms {
            cfg.min_segment_ms = v;
        }
        if let Some(v) = self.scan_epsilon_ms {
            cfg.scan_epsilon_ms = v;
        }
        if let Some(v) = self.estimator {
            cfg.estimator = v;
        }
        if let Some(v) = self.bandwidth {
            cfg.options.bandwidth = v;
        }
        if let Some(v) = self.epsilon {
            cfg.options.laplace_epsilon = v;
        }
        if let Some(v) = self.invisibility {
            cfg.options.model_invisibility = v;
        }
        if let Some(v) = self.measure {
            cfg.measure = v;
        }
        if let Some(v) = self.norm {
            cfg.norm = v;
        }
        if let Some(v) = self.grid_lo {
            cfg.grid.lo = v;
        }
        if let Some(v) = self.grid_hi {
            cfg.grid.hi = v;
        }
        if let Some(v) = self.grid_step {
            cfg.grid.step = v;
        }
        if let Some(v) = self.bhatt_cap {
            cfg.params.bhatt_cap = v;
        }
        if let Some(v) = self.density_floor {
            cfg.params.density_floor = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.jobs {
            cfg.jobs = Some(v);
        }
    }
}

fn parse_estimator(s: &str) -> std::result::Result<EstimatorKind, String> {
    EstimatorKind::ALL
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown estimator `{s}` (expected pmf, normal or kde)"))
}

fn parse_measure(s: &str) -> std::result::Result<MeasureTag, String> {
    // Accepts the spelled-out aliases too, like the config file does.
    s.parse::<MeasureTag>().map_err(|_| {
        let all: Vec<&str> = MeasureTag::ALL.iter().map(|m| m.as_str()).collect();
        format!("unknown measure `{s}` (expected one of {})", all.join(", "))
    })
}

fn parse_norm(s: &str) -> std::result::Result<AggregationNorm, String> {
    AggregationNorm::ALL
        .into_iter()
        .find(|n| n.as_str() == s)
        .ok_or_else(|| format!("unknown norm `{s}` (expected l1 or l2)"))
}

fn parse_statistic(s: &str) -> std::result::Result<topomap::WindowStatistic, String> {
    match s {
        "energy" => Ok(topomap::WindowStatistic::Energy),
        "variance" => Ok(topomap::WindowStatistic::Variance),
        _ => Err(format!("unknown statistic `{s}` (expected energy or variance)")),
    }
}
