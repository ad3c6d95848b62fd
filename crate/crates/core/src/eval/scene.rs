//! Seeded synthetic indoor scenes: a rectangular area with fixed APs, a
//! device dwelling at labeled locations, log-distance path loss with
//! Gaussian shadowing, and a matching acceleration stream (quiet while
//! dwelling, noisy while walking) so the whole pipeline — motion
//! segmentation included — can run end to end on known ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::LabeledSegment;
use crate::ingest::{AccelObservation, WifiDataset, WifiObservation};
use crate::motionseg::WifiSegment;
use crate::{RSSI_MAX, RSSI_MIN};

/// Scan interval; real scans take about three seconds.
const SCAN_PERIOD_MS: i64 = 3000;
/// Lead-in before the first scan of a dwell, so recovered segment
/// boundaries a hop off still contain every scan.
const SCAN_LEAD_IN_MS: i64 = 1500;
/// Accelerometer sampling period (25 Hz).
const ACCEL_PERIOD_MS: i64 = 40;
/// Walking time between dwells.
const WALK_MS: i64 = 15_000;
/// Gravity baseline for the magnitude signal, m/s².
const GRAVITY: f64 = 9.81;
/// Peak-to-baseline swing of the synthetic walking signal, m/s².
const WALK_SWING: f64 = 3.0;

/// Configuration of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSceneConfig {
    /// Area (width, height) in meters.
    pub area: (f64, f64),
    pub n_aps: usize,
    /// Explicit AP positions; derived from `n_aps` (corners, center, then a
    /// ring) when absent.
    pub ap_positions: Option<Vec<(f64, f64)>>,
    /// Path-loss exponent γ.
    pub path_loss_exponent: f64,
    /// Received power at 1 m, dBm.
    pub ref_power_dbm: f64,
    /// Shadowing standard deviation, dB.
    pub shadowing_sigma_db: f64,
    /// Readings below this level become dropouts (AP not seen), dBm.
    pub visibility_threshold_dbm: f64,
    /// Dwell locations; a centered grid when absent.
    pub locations: Option<Vec<(f64, f64)>>,
    pub samples_per_segment: usize,
    pub segments_per_location: usize,
    pub seed: u64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> SyntheticSceneConfig {
        SyntheticSceneConfig {
            area: (20.0, 20.0),
            n_aps: 5,
            ap_positions: None,
            path_loss_exponent: 2.5,
            ref_power_dbm: -40.0,
            shadowing_sigma_db: 4.0,
            visibility_threshold_dbm: -95.0,
            locations: None,
            samples_per_segment: 20,
            segments_per_location: 3,
            seed: 0,
        }
    }
}

impl SyntheticSceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.area.0 <= 0.0 || self.area.1 <= 0.0 {
            return Err(Error::Config("scene area must be positive".into()));
        }
        if self.n_aps == 0 {
            return Err(Error::Config("scene needs at least one AP".into()));
        }
        if let Some(aps) = &self.ap_positions {
            if aps.len() != self.n_aps {
                return Err(Error::Config(format!(
                    "n_aps = {} but {} positions given",
                    self.n_aps,
                    aps.len()
                )));
            }
        }
        if self.samples_per_segment == 0 || self.segments_per_location == 0 {
            return Err(Error::Config(
                "samples_per_segment and segments_per_location must be ≥ 1".into(),
            ));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::Config("shadowing sigma must be ≥ 0".into()));
        }
        Ok(())
    }

    /// AP positions: explicit list, or corners → center → ring for derived
    /// layouts.
    pub fn resolved_ap_positions(&self) -> Vec<(f64, f64)> {
        if let Some(aps) = &self.ap_positions {
            return aps.clone();
        }
        let (w, h) = self.area;
        let mut out = vec![
            (0.0, 0.0),
            (w, 0.0),
            (0.0, h),
            (w, h),
            (w / 2.0, h / 2.0),
        ];
        let extra = self.n_aps.saturating_sub(5);
        for k in 0..extra {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / extra as f64;
            let r = w.min(h) / 3.0;
            out.push((w / 2.0 + r * angle.cos(), h / 2.0 + r * angle.sin()));
        }
        out.truncate(self.n_aps);
        out
    }

    /// Dwell locations: explicit list, or a centered 4×3 grid.
    pub fn resolved_locations(&self) -> Vec<(f64, f64)> {
        if let Some(locations) = &self.locations {
            return locations.clone();
        }
        // Two rows of six flanking the central AP: every location sits on a
        // strong power gradient toward at least two transmitters, which keeps
        // the RSSI-distance / physical-distance relationship close to linear.
        // A denser grid through the middle would park locations in the flat
        // region between the corner and center APs and blur that relationship.
        let (w, h) = self.area;
        let cols = 6;
        let mut out = Vec::with_capacity(cols * 2);
        for row_frac in [0.25, 0.75] {
            for col in 0..cols {
                out.push((
                    w * (0.05 + 0.9 * col as f64 / (cols - 1) as f64),
                    h * row_frac,
                ));
            }
        }
        out
    }
}

/// Mean received power at `distance_m` under the log-distance model
/// `P(d) = P₀ − 10·γ·log₁₀(d / 1 m)`; distances inside 1 m clamp to 1 m.
pub fn log_distance_rssi(ref_power_dbm: f64, path_loss_exponent: f64, distance_m: f64) -> f64 {
    ref_power_dbm - 10.0 * path_loss_exponent * distance_m.max(1.0).log10()
}

/// A generated scene: the observation streams plus the ground truth the
/// pipeline is supposed to recover.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub dataset: WifiDataset,
    pub accel: Vec<AccelObservation>,
    /// Ground-truth stationary segments (ids match `labels`).
    pub segments: Vec<WifiSegment>,
    pub labels: Vec<LabeledSegment>,
    /// Locations where no AP was ever visible, and similar anomalies.
    pub warnings: Vec<String>,
}

/// Generate a scene: the device dwells `segments_per_location` times at each
/// location (quiet accelerometer, periodic scans) and walks between dwells
/// (noisy accelerometer, no scans). Fully deterministic for a given seed.
pub fn generate_synthetic_scene(cfg: &SyntheticSceneConfig) -> Result<SyntheticScene> {
    cfg.validate()?;
    let aps = cfg.resolved_ap_positions();
    let locations = cfg.resolved_locations();
    let device = "sim".to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shadowing = if cfg.shadowing_sigma_db > 0.0 {
        Some(Normal::new(0.0, cfg.shadowing_sigma_db).map_err(|e| {
            Error::Config(format!("bad shadowing sigma: {e}"))
        })?)
    } else {
        None
    };

    let dwell_ms = SCAN_LEAD_IN_MS + cfg.samples_per_segment as i64 * SCAN_PERIOD_MS;
    let mut wifi = Vec::new();
    let mut accel = Vec::new();
    let mut segments = Vec::new();
    let mut labels = Vec::new();
    let mut visible_at_location = vec![false; locations.len()];
    let mut t = 0i64;
    let mut segment_id = 0usize;

    // Visit order: all segments of location 0, then location 1, … — the
    // ordering is part of the deterministic contract.
    for (loc_idx, &(lx, ly)) in locations.iter().enumerate() {
        for _ in 0..cfg.segments_per_location {
            let start = t;
            let end = start + dwell_ms;
            let mut seg_obs = Vec::new();
            for k in 0..cfg.samples_per_segment {
                let scan_t = start + SCAN_LEAD_IN_MS + k as i64 * SCAN_PERIOD_MS;
                for (ap_idx, &(ax, ay)) in aps.iter().enumerate() {
                    let d = ((lx - ax).powi(2) + (ly - ay).powi(2)).sqrt();
                    let mean = log_distance_rssi(cfg.ref_power_dbm, cfg.path_loss_exponent, d);
                    let noise = shadowing.map_or(0.0, |n| n.sample(&mut rng));
                    let rssi = (mean + noise).round();
                    if rssi < cfg.visibility_threshold_dbm {
                        continue; // dropout: the AP is not seen in this scan
                    }
                    let rssi = rssi.clamp(f64::from(RSSI_MIN), f64::from(RSSI_MAX)) as i16;
                    visible_at_location[loc_idx] = true;
                    seg_obs.push(WifiObservation {
                        timestamp_ms: scan_t,
                        device: device.clone(),
                        bssid: format!("ap{ap_idx:02}"),
                        ssid: Some(format!("net{ap_idx:02}")),
                        rssi,
                    });
                }
            }
            // Quiet accelerometer during the dwell.
            let mut at = start;
            while at < end {
                accel.push(AccelObservation {
                    timestamp_ms: at,
                    device: device.clone(),
                    magnitude: GRAVITY,
                });
                at += ACCEL_PERIOD_MS;
            }
            wifi.extend(seg_obs.iter().cloned());
            segments.push(WifiSegment {
                segment_id,
                device: device.clone(),
                start_ms: start,
                end_ms: end,
                observations: seg_obs,
            });
            labels.push(LabeledSegment {
                segment_id,
                label: format!("loc{loc_idx:02}"),
                x: Some(lx),
                y: Some(ly),
            });
            segment_id += 1;
            t = end;

            // Walk to the next dwell (omitted after the very last one).
            let is_last = loc_idx == locations.len() - 1
                && segment_id == locations.len() * cfg.segments_per_location;
            if !is_last {
                let walk_end = t + WALK_MS;
                let mut step = 0i64;
                while t < walk_end {
                    let swing = if step % 2 == 0 { WALK_SWING } else { -WALK_SWING };
                    accel.push(AccelObservation {
                        timestamp_ms: t,
                        device: device.clone(),
                        magnitude: GRAVITY + swing,
                    });
                    t += ACCEL_PERIOD_MS;
                    step += 1;
                }
            }
        }
    }

    let mut warnings = Vec::new();
    let dark: Vec<String> = visible_at_location
        .iter()
        .enumerate()
        .filter(|(_, v)| !**v)
        .map(|(i, _)| format!("loc{i:02}"))
        .collect();
    if !dark.is_empty() {
        warnings.push(format!(
            "no AP visible at location(s) {}; lower the visibility threshold or move APs",
            dark.join(", ")
        ));
    }

    Ok(SyntheticScene {
        dataset: WifiDataset::from_observations(wifi)?,
        accel,
        segments,
        labels,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_distance_example() {
        assert_eq!(log_distance_rssi(-40.0, 2.0, 10.0), -60.0);
        assert_eq!(log_distance_rssi(-40.0, 2.0, 1.0), -40.0);
        // Inside 1 m clamps to the reference distance.
        assert_eq!(log_distance_rssi(-40.0, 2.0, 0.2), -40.0);
    }

    #[test]
    fn default_scene_shape() {
        let cfg = SyntheticSceneConfig::default();
        let scene = generate_synthetic_scene(&cfg).unwrap();
        assert_eq!(scene.segments.len(), 36); // 12 locations × 3 segments
        assert_eq!(scene.labels.len(), 36);
        assert!(scene.warnings.is_empty());
        assert_eq!(cfg.resolved_ap_positions().len(), 5);
        assert_eq!(cfg.resolved_locations().len(), 12);
        // Every segment contains scans and lies inside its interval.
        for seg in &scene.segments {
            assert!(!seg.observations.is_empty());
            for obs in &seg.observations {
                assert!(obs.timestamp_ms >= seg.start_ms && obs.timestamp_ms < seg.end_ms);
            }
        }
        // All RSSI within bounds and above the visibility threshold.
        for obs in scene.dataset.observations() {
            assert!(obs.rssi >= RSSI_MIN && obs.rssi <= RSSI_MAX);
            assert!(f64::from(obs.rssi) >= cfg.visibility_threshold_dbm);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticSceneConfig { seed: 42, ..SyntheticSceneConfig::default() };
        let a = generate_synthetic_scene(&cfg).unwrap();
        let b = generate_synthetic_scene(&cfg).unwrap();
        assert_eq!(a, b);

        let other = generate_synthetic_scene(&SyntheticSceneConfig {
            seed: 43,
            ..SyntheticSceneConfig::default()
        })
        .unwrap();
        assert_ne!(a.dataset, other.dataset);
    }

    #[test]
    fn zero_shadowing_makes_scans_identical() {
        let cfg = SyntheticSceneConfig {
            shadowing_sigma_db: 0.0,
            ..SyntheticSceneConfig::default()
        };
        let scene = generate_synthetic_scene(&cfg).unwrap();
        for seg in &scene.segments {
            // Group by AP: every scan of this segment reports the same value.
            let mut by_ap: std::collections::BTreeMap<&str, Vec<i16>> = Default::default();
            for obs in &seg.observations {
                by_ap.entry(&obs.bssid).or_default().push(obs.rssi);
            }
            for (ap, values) in by_ap {
                assert!(
                    values.windows(2).all(|w| w[0] == w[1]),
                    "AP {ap} varies without noise: {values:?}"
                );
            }
        }
    }

    #[test]
    fn same_location_segments_differ_only_by_noise() {
        let cfg = SyntheticSceneConfig::default();
        let scene = generate_synthetic_scene(&cfg).unwrap();
        // Segments 0 and 1 share a location: same APs visible (modulo rare
        // dropouts), similar per-AP levels.
        fn aps(seg: &WifiSegment) -> std::collections::BTreeSet<&str> {
            seg.observations.iter().map(|o| o.bssid.as_str()).collect()
        }
        assert_eq!(scene.labels[0].label, scene.labels[1].label);
        let a = aps(&scene.segments[0]);
        let b = aps(&scene.segments[1]);
        assert!(!a.is_disjoint(&b));
    }

    #[test]
    fn dark_locations_are_reported() {
        let cfg = SyntheticSceneConfig {
            ref_power_dbm: -95.0, // even at 1 m nothing clears the threshold
            shadowing_sigma_db: 0.0,
            locations: Some(vec![(10.0, 10.0)]),
            ap_positions: Some(vec![(0.0, 0.0)]),
            n_aps: 1,
            ..SyntheticSceneConfig::default()
        };
        let scene = generate_synthetic_scene(&cfg).unwrap();
        assert_eq!(scene.warnings.len(), 1);
        assert!(scene.warnings[0].contains("loc00"));
        assert!(scene.dataset.is_empty());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = SyntheticSceneConfig::default();
        cfg.n_aps = 0;
        assert!(generate_synthetic_scene(&cfg).is_err());

        let mut cfg = SyntheticSceneConfig::default();
        cfg.ap_positions = Some(vec![(0.0, 0.0)]); // n_aps still 5
        assert!(generate_synthetic_scene(&cfg).is_err());

        let mut cfg = SyntheticSceneConfig::default();
        cfg.area = (0.0, 10.0);
        assert!(generate_synthetic_scene(&cfg).is_err());
    }

    #[test]
    fn accel_stream_alternates_quiet_and_noisy() {
        let cfg = SyntheticSceneConfig {
            locations: Some(vec![(5.0, 5.0), (15.0, 15.0)]),
            segments_per_location: 1,
            ..SyntheticSceneConfig::default()
        };
        let scene = generate_synthetic_scene(&cfg).unwrap();
        let quiet: Vec<&AccelObservation> = scene
            .accel
            .iter()
            .filter(|a| a.magnitude == GRAVITY)
            .collect();
        let noisy: Vec<&AccelObservation> = scene
            .accel
            .iter()
            .filter(|a| a.magnitude != GRAVITY)
            .collect();
        assert!(!quiet.is_empty());
        assert!(!noisy.is_empty());
        // Noisy samples lie strictly between the two dwells.
        let first_end = scene.segments[0].end_ms;
        let second_start = scene.segments[1].start_ms;
        for obs in noisy {
            assert!(obs.timestamp_ms >= first_end && obs.timestamp_ms < second_start);
        }
    }
}
