//! Run directory management: artifacts land in `<out_dir>/run-<hash>/` so
//! every artifact path names the config hash that produced it, re-runs of
//! the same config overwrite their own files, and different configs never
//! collide. All writes go through a temp file plus rename.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use topomap::error::{Error, Result};

use crate::config::{config_hash, PipelineConfig};

pub struct RunContext {
    pub cfg: PipelineConfig,
    pub hash: String,
    pub dir: PathBuf,
    started_wall_ms: u128,
    started: Instant,
    timings: Vec<(String, f64)>,
    artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunContext {
    pub fn new(cfg: PipelineConfig) -> Result<RunContext> {
        let hash = config_hash(&cfg);
        let dir = cfg.out_dir.join(format!("run-{hash}"));
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunContext {
            cfg,
            hash,
            dir,
            started_wall_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            started: Instant::now(),
            timings: Vec::new(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Record how long a stage took.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f(self);
        self.timings.push((stage.to_string(), t0.elapsed().as_secs_f64()));
        out
    }

    /// Write one artifact atomically and register it for the manifest.
    pub fn write_artifact(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        write_atomic(&self.path(name), write)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Write two artifacts produced by one serializer (data + sidecar)
    /// atomically, renaming only after both are complete.
    pub fn write_artifact_pair(
        &mut self,
        name1: &str,
        name2: &str,
        write: impl FnOnce(&mut BufWriter<File>, &mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let (path1, path2) = (self.path(name1), self.path(name2));
        let (tmp1, tmp2) = (tmp_path(&path1), tmp_path(&path2));
        {
            let mut w1 = BufWriter::new(File::create(&tmp1)?);
            let mut w2 = BufWriter::new(File::create(&tmp2)?);
            write(&mut w1, &mut w2)?;
            w1.flush()?;
            w2.flush()?;
        }
        fs::rename(&tmp1, &path1)?;
        fs::rename(&tmp2, &path2)?;
        self.artifacts.push(name1.to_string());
        self.artifacts.push(name2.to_string());
        Ok(())
    }

    /// Write the run manifest and report warnings on stderr.
    pub fn finish(self, command: &str) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            config_hash: &'a str,
            config: &'a PipelineConfig,
            versions: Versions,
            started_unix_ms: u128,
            elapsed_s: f64,
            timings_s: Vec<Timing<'a>>,
            artifacts: &'a [String],
            warnings: &'a [String],
        }
        #[derive(Serialize)]
        struct Versions {
            topomap: &'static str,
            cli: &'static str,
        }
        #[derive(Serialize)]
        struct Timing<'a> {
            stage: &'a str,
            seconds: f64,
        }

        let manifest = Manifest {
            command,
            config_hash: &self.hash,
            config: &self.cfg,
            versions: Versions {
                topomap: topomap::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            started_unix_ms: self.started_wall_ms,
            elapsed_s: self.started.elapsed().as_secs_f64(),
            timings_s: self
                .timings
                .iter()
                .map(|(stage, seconds)| Timing {
                    stage,
                    seconds: *seconds,
                })
                .collect(),
            artifacts: &self.artifacts,
            warnings: &self.warnings,
        };
        write_atomic(&self.path(&format!("run_manifest.{command}.json")), |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)?;
            Ok(())
        })?;
        for warning in &self.warnings {
            eprintln!("warning: {warning}");
        }
        Ok(())
    }
}

/// Write a file through `<path>.tmp` + rename so readers never observe a
/// partial artifact.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = tmp_path(path);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".into());
    name.push_str(".tmp");
    path.with_file_name(name)
}
