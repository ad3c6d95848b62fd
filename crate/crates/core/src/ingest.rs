//! Parsing, validation, filtering and augmentation of raw WiFi and
//! acceleration observation streams.
//!
//! Raw traces arrive as CSV or JSONL files with one record per row, carrying
//! the field names documented on [`WifiObservation`] and [`AccelObservation`].
//! Parsed datasets are immutable values; every transformation returns a new
//! dataset and recomputes the AP universe.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{RSSI_MAX, RSSI_MIN};

/// Input record encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

impl RecordFormat {
    /// Infer the format from a file extension (`.jsonl`/`.ndjson` vs CSV).
    pub fn from_path(path: &Path) -> RecordFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => RecordFormat::Jsonl,
            _ => RecordFormat::Csv,
        }
    }
}

/// One received-signal-strength reading of an access point by a device.
///
/// CSV header: `timestamp_ms,device,bssid,ssid,rssi`. The `ssid` field may be
/// empty; anonymized traces omit it. `rssi` is integer dBm in
/// `[-100, -10]`, with −100 reserved for invisibility pseudo-observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WifiObservation {
    pub timestamp_ms: i64,
    pub device: String,
    pub bssid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssid: Option<String>,
    pub rssi: i16,
}

/// One acceleration magnitude sample (Euclidean norm of the raw vector).
///
/// CSV header: `timestamp_ms,device,ax,ay,az` or `timestamp_ms,device,magnitude`;
/// units m/s².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelObservation {
    pub timestamp_ms: i64,
    pub device: String,
    pub magnitude: f64,
}

/// SSID blacklist for mobile access points (phone hotspots, cars).
///
/// Matching is case-insensitive and runs against prefixes and suffixes of the
/// SSID. An empty blacklist filters nothing; observations without an SSID
/// always pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Blacklist {
    prefixes: Vec<String>,
    suffixes: Vec<String>,
}

impl Blacklist {
    pub fn new(prefixes: Vec<String>, suffixes: Vec<String>) -> Blacklist {
        Blacklist {
            prefixes: prefixes.into_iter().map(|p| p.to_lowercase()).collect(),
            suffixes: suffixes.into_iter().map(|s| s.to_lowercase()).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty() && self.suffixes.is_empty()
    }

    /// True when the SSID matches any prefix or suffix rule.
    pub fn matches(&self, ssid: &str) -> bool {
        let lower = ssid.to_lowercase();
        self.prefixes.iter().any(|p| lower.starts_with(p.as_str()))
            || self.suffixes.iter().any(|s| lower.ends_with(s.as_str()))
    }

    /// Parse a rules file: one rule per line, `prefix:<s>` or `suffix:<s>`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Blacklist> {
        let mut prefixes = Vec::new();
        let mut suffixes = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("prefix:") {
                prefixes.push(rest.to_string());
            } else if let Some(rest) = trimmed.strip_prefix("suffix:") {
                suffixes.push(rest.to_string());
            } else {
                return Err(Error::parse(
                    idx + 1,
                    format!("expected `prefix:<s>` or `suffix:<s>`, got `{trimmed}`"),
                ));
            }
        }
        Ok(Blacklist::new(prefixes, suffixes))
    }

    pub fn from_path(path: &Path) -> Result<Blacklist> {
        let file = std::fs::File::open(path)?;
        Blacklist::from_reader(std::io::BufReader::new(file))
    }
}

/// A validated, time-ordered WiFi observation set together with its AP
/// universe (the distinct BSSIDs present in the observations).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WifiDataset {
    observations: Vec<WifiObservation>,
    ap_universe: BTreeSet<String>,
}

impl WifiDataset {
    /// Build a dataset from raw observations: validates RSSI ranges and
    /// duplicate scan entries, sorts by `(timestamp, device, bssid)` and
    /// collapses exact duplicates.
    pub fn from_observations(mut observations: Vec<WifiObservation>) -> Result<WifiDataset> {
        for obs in &observations {
            validate_rssi(obs.rssi)?;
        }
        observations.sort_by(|a, b| {
            (a.timestamp_ms, &a.device, &a.bssid).cmp(&(b.timestamp_ms, &b.device, &b.bssid))
        });
        // Adjacent after sorting: detect conflicting duplicates, drop equal ones.
        let mut deduped: Vec<WifiObservation> = Vec::with_capacity(observations.len());
        for obs in observations {
            if let Some(prev) = deduped.last() {
                if prev.timestamp_ms == obs.timestamp_ms
                    && prev.device == obs.device
                    && prev.bssid == obs.bssid
                {
                    if prev.rssi != obs.rssi {
                        return Err(Error::Validation(format!(
                            "conflicting RSSI values {} and {} for ({}, {}, {})",
                            prev.rssi, obs.rssi, obs.timestamp_ms, obs.device, obs.bssid
                        )));
                    }
                    continue;
                }
            }
            deduped.push(obs);
        }
        let ap_universe = deduped.iter().map(|o| o.bssid.clone()).collect();
        Ok(WifiDataset {
            observations: deduped,
            ap_universe,
        })
    }

    pub fn observations(&self) -> &[WifiObservation] {
        &self.observations
    }

    pub fn ap_universe(&self) -> &BTreeSet<String> {
        &self.ap_universe
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Distinct device identifiers present in the dataset.
    pub fn devices(&self) -> BTreeSet<String> {
        self.observations
            .iter()
            .map(|o| o.device.clone())
            .collect()
    }

    pub fn has_device(&self, device: &str) -> bool {
        self.observations.iter().any(|o| o.device == device)
    }

    /// Timestamp span `(first, last)` of the observations, if any.
    pub fn time_span(&self) -> Option<(i64, i64)> {
        match (self.observations.first(), self.observations.last()) {
            (Some(first), Some(last)) => Some((first.timestamp_ms, last.timestamp_ms)),
            _ => None,
        }
    }

    /// Remove every observation whose SSID matches the blacklist and
    /// recompute the AP universe. Observations without an SSID are kept.
    pub fn filter_mobile_aps(&self, blacklist: &Blacklist) -> WifiDataset {
        if blacklist.is_empty() {
            return self.clone();
        }
        let kept: Vec<WifiObservation> = self
            .observations
            .iter()
            .filter(|o| match &o.ssid {
                Some(ssid) => !blacklist.matches(ssid),
                None => true,
            })
            .cloned()
            .collect();
        let ap_universe = kept.iter().map(|o| o.bssid.clone()).collect();
        WifiDataset {
            observations: kept,
            ap_universe,
        }
    }

    /// Keep only observations of the given device and recompute the universe.
    /// An unknown device yields an empty dataset; callers can distinguish the
    /// case through [`WifiDataset::has_device`].
    pub fn restrict_device(&self, device: &str) -> WifiDataset {
        let kept: Vec<WifiObservation> = self
            .observations
            .iter()
            .filter(|o| o.device == device)
            .cloned()
            .collect();
        let ap_universe = kept.iter().map(|o| o.bssid.clone()).collect();
        WifiDataset {
            observations: kept,
            ap_universe,
        }
    }

    /// Add `−100` pseudo-observations for every AP of the universe that is
    /// missing from a scan, so that AP invisibility carries probability mass
    /// in the estimated likelihoods.
    ///
    /// Observations of one device whose timestamps lie within
    /// `scan_epsilon_ms` of the first timestamp of a scan group are treated
    /// as one scan; pseudo-observations are stamped with the group's first
    /// timestamp. Pre-existing observations are never altered.
    pub fn augment_ap_invisibility(&self, scan_epsilon_ms: i64) -> WifiDataset {
        let mut augmented = self.observations.clone();
        for device in self.devices() {
            // Scan groups over this device's distinct timestamps.
            let mut timestamps: Vec<i64> = self
                .observations
                .iter()
                .filter(|o| o.device == device)
                .map(|o| o.timestamp_ms)
                .collect();
            timestamps.sort_unstable();
            timestamps.dedup();

            let mut idx = 0;
            while idx < timestamps.len() {
                let scan_start = timestamps[idx];
                let mut end = idx;
                while end + 1 < timestamps.len()
                    && timestamps[end + 1] - scan_start <= scan_epsilon_ms
                {
                    end += 1;
                }
                let seen: BTreeSet<&str> = self
                    .observations
                    .iter()
                    .filter(|o| {
                        o.device == device
                            && o.timestamp_ms >= scan_start
                            && o.timestamp_ms <= timestamps[end]
                    })
                    .map(|o| o.bssid.as_str())
                    .collect();
                for ap in &self.ap_universe {
                    if !seen.contains(ap.as_str()) {
                        augmented.push(WifiObservation {
                            timestamp_ms: scan_start,
                            device: device.clone(),
                            bssid: ap.clone(),
                            ssid: None,
                            rssi: RSSI_MIN,
                        });
                    }
                }
                idx = end + 1;
            }
        }
        augmented.sort_by(|a, b| {
            (a.timestamp_ms, &a.device, &a.bssid).cmp(&(b.timestamp_ms, &b.device, &b.bssid))
        });
        WifiDataset {
            observations: augmented,
            ap_universe: self.ap_universe.clone(),
        }
    }
}

fn validate_rssi(rssi: i16) -> Result<()> {
    if rssi < RSSI_MIN || rssi > RSSI_MAX {
        return Err(Error::Validation(format!(
            "rssi {rssi} outside [{RSSI_MIN}, {RSSI_MAX}]"
        )));
    }
    Ok(())
}

/// Parse a WiFi record stream into a validated, time-sorted dataset.
pub fn parse_wifi_records<R: BufRead>(reader: R, format: RecordFormat) -> Result<WifiDataset> {
    let observations = match format {
        RecordFormat::Csv => parse_wifi_csv(reader)?,
        RecordFormat::Jsonl => parse_wifi_jsonl(reader)?,
    };
    WifiDataset::from_observations(observations)
}

fn parse_wifi_csv<R: BufRead>(reader: R) -> Result<Vec<WifiObservation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.deserialize::<WifiObservation>() {
        let obs = record?;
        validate_rssi(obs.rssi)?;
        out.push(obs);
    }
    Ok(out)
}

fn parse_wifi_jsonl<R: BufRead>(reader: R) -> Result<Vec<WifiObservation>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let obs: WifiObservation = serde_json::from_str(&line)
            .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        out.push(obs);
    }
    Ok(out)
}

/// One raw acceleration record; rows carry either the `(ax, ay, az)` vector
/// or a precomputed `magnitude` (which wins when both are present).
#[derive(Deserialize)]
struct AccelRow {
    timestamp_ms: i64,
    device: String,
    #[serde(default)]
    ax: Option<f64>,
    #[serde(default)]
    ay: Option<f64>,
    #[serde(default)]
    az: Option<f64>,
    #[serde(default)]
    magnitude: Option<f64>,
}

impl AccelRow {
    fn into_observation(self, line: usize) -> Result<AccelObservation> {
        let magnitude = match (self.magnitude, self.ax, self.ay, self.az) {
            (Some(m), ..) => {
                if m < 0.0 {
                    return Err(Error::parse(
                        line,
                        format!("negative acceleration magnitude {m}"),
                    ));
                }
                m
            }
            (None, Some(ax), Some(ay), Some(az)) => (ax * ax + ay * ay + az * az).sqrt(),
            _ => {
                return Err(Error::parse(
                    line,
                    "need either magnitude or all of ax, ay, az".to_string(),
                ))
            }
        };
        Ok(AccelObservation {
            timestamp_ms: self.timestamp_ms,
            device: self.device,
            magnitude,
        })
    }
}

/// Parse an acceleration record stream; rows carry either the raw
/// `(ax, ay, az)` vector or the precomputed magnitude. Output is sorted by
/// `(timestamp, device)`.
pub fn parse_accel_records<R: BufRead>(
    reader: R,
    format: RecordFormat,
) -> Result<Vec<AccelObservation>> {
    let mut out = match format {
        RecordFormat::Csv => parse_accel_csv(reader)?,
        RecordFormat::Jsonl => parse_accel_jsonl(reader)?,
    };
    out.sort_by(|a, b| (a.timestamp_ms, &a.device).cmp(&(b.timestamp_ms, &b.device)));
    Ok(out)
}

fn parse_accel_csv<R: BufRead>(reader: R) -> Result<Vec<AccelObservation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.deserialize::<AccelRow>() {
        let row = record?;
        let line = out.len() + 2; // header occupies line 1
        out.push(row.into_observation(line)?);
    }
    Ok(out)
}

fn parse_accel_jsonl<R: BufRead>(reader: R) -> Result<Vec<AccelObservation>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_text = line?;
        if line_text.trim().is_empty() {
            continue;
        }
        let row: AccelRow = serde_json::from_str(&line_text)
            .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        out.push(row.into_observation(idx + 1)?);
    }
    Ok(out)
}

/// Write the dataset in the canonical WiFi CSV format.
pub fn write_wifi_csv<W: Write>(dataset: &WifiDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["timestamp_ms", "device", "bssid", "ssid", "rssi"])?;
    for obs in dataset.observations() {
        wtr.write_record([
            obs.timestamp_ms.to_string(),
            obs.device.clone(),
            obs.bssid.clone(),
            obs.ssid.clone().unwrap_or_default(),
            obs.rssi.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Write the dataset as JSONL, one observation object per line.
pub fn write_wifi_jsonl<W: Write>(dataset: &WifiDataset, mut writer: W) -> Result<()> {
    for obs in dataset.observations() {
        serde_json::to_writer(&mut writer, obs)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Write acceleration observations in the magnitude CSV form.
pub fn write_accel_csv<W: Write>(observations: &[AccelObservation], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["timestamp_ms", "device", "magnitude"])?;
    for obs in observations {
        wtr.write_record([
            obs.timestamp_ms.to_string(),
            obs.device.clone(),
            obs.magnitude.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read a WiFi file, inferring CSV vs JSONL from the extension.
pub fn read_wifi_file(path: &Path) -> Result<WifiDataset> {
    let file = std::fs::File::open(path)?;
    parse_wifi_records(std::io::BufReader::new(file), RecordFormat::from_path(path))
}

/// Read an acceleration file, inferring CSV vs JSONL from the extension.
pub fn read_accel_file(path: &Path) -> Result<Vec<AccelObservation>> {
    let file = std::fs::File::open(path)?;
    parse_accel_records(std::io::BufReader::new(file), RecordFormat::from_path(path))
}
