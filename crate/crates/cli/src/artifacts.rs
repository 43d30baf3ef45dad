//! Output directory layout and the JSON artifacts passed between stages.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rompc::pipeline::{CertArtifact, ControllerArtifact, PipelineConfig, RomArtifact};
use rompc::sim::{MonteCarloSummary, ViolationReport};
use rompc::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn rom_dir(&self) -> PathBuf {
        self.root.join("rom")
    }

    pub fn rom(&self) -> PathBuf {
        self.root.join("rom.json")
    }

    pub fn synthesis(&self) -> PathBuf {
        self.root.join("synthesis.json")
    }

    pub fn certificate(&self) -> PathBuf {
        self.root.join("certificate.json")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn audit(&self) -> PathBuf {
        self.root.join("audit.json")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.md")
    }

    pub fn timings(&self) -> PathBuf {
        self.root.join("timings.json")
    }

    pub fn error(&self) -> PathBuf {
        self.root.join("error.json")
    }
}

/// An artifact together with the configuration that produced it.
#[derive(Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config: PipelineConfig,
    pub artifact: T,
}

#[derive(Serialize, Deserialize)]
pub struct SynthesisFile {
    pub certified: CertArtifact,
    pub controller: ControllerArtifact,
}

#[derive(Serialize, Deserialize)]
pub struct RunAudit {
    pub seed: u64,
    pub report: ViolationReport,
}

#[derive(Serialize, Deserialize)]
pub struct AuditFile {
    pub summary: MonteCarloSummary,
    pub logged_seeds: Vec<u64>,
    pub runs: Vec<RunAudit>,
}

pub type RomFile = Stamped<RomArtifact>;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::InvalidArgument(format!(
            "cannot read {} ({e}); run `rompc {stage}` first",
            path.display()
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Fails when `old` was produced with settings that `new` changes.
pub fn check_fresh(old: &PipelineConfig, new: &PipelineConfig, stage: &str, path: &Path, full: bool) -> Result<()> {
    let (a, b) = (&old.synthesis, &new.synthesis);
    let reduction_same = old.system == new.system
        && old.tolerances == new.tolerances
        && a.order == b.order
        && a.allow_unstable == b.allow_unstable;
    let synthesis_same = reduction_same && old.sets == new.sets && a == b;
    if (full && !synthesis_same) || !reduction_same {
        return Err(Error::InvalidArgument(format!(
            "{} was produced with different settings; rerun `rompc {stage}`",
            path.display()
        )));
    }
    Ok(())
}

pub fn record_timing(layout: &Layout, stage: &str, seconds: f64) -> Result<()> {
    let path = layout.timings();
    let mut t: BTreeMap<String, f64> = match fs::read_to_string(&path) {
        Ok(s) => serde_json::from_str(&s).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    t.insert(stage.to_string(), seconds);
    write_json(&path, &t)
}

pub fn read_timings(layout: &Layout) -> BTreeMap<String, f64> {
    fs::read_to_string(layout.timings())
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or_default()
}
