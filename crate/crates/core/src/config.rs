//! Benchmark run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::RuleConfig;
use crate::engine::MatcherConfig;
use crate::error::{Error, Result};
use crate::ingest::DatasetManifest;
use crate::metrics::DiagnosticsPlan;
use crate::pairgen::{PairMode, SplitPlan};
use crate::truth::NalConfig;

/// Which evaluation modes a run covers. `Both` runs within and across and
/// adds their mean as a combined row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    Within,
    Across,
    Combined,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<PairMode> {
        match self {
            ModeSelection::Within => vec![PairMode::Within],
            ModeSelection::Across => vec![PairMode::Across],
            ModeSelection::Combined => vec![PairMode::Combined],
            ModeSelection::Both => vec![PairMode::Within, PairMode::Across],
        }
    }
}

impl FromStr for ModeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "within" => Ok(ModeSelection::Within),
            "across" => Ok(ModeSelection::Across),
            "combined" => Ok(ModeSelection::Combined),
            "both" => Ok(ModeSelection::Both),
            other => Err(Error::Config(format!("unknown mode `{other}` (expected within, across, combined or both)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatcherKind {
    Nars,
    Baseline,
}

impl fmt::Display for MatcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatcherKind::Nars => "nars",
            MatcherKind::Baseline => "baseline",
        })
    }
}

impl FromStr for MatcherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nars" => Ok(MatcherKind::Nars),
            "baseline" => Ok(MatcherKind::Baseline),
            other => Err(Error::Config(format!("unknown matcher `{other}` (expected nars or baseline)"))),
        }
    }
}

/// A manifest given by path or written inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ManifestSource {
    Path(PathBuf),
    Inline(DatasetManifest),
}

impl ManifestSource {
    pub fn resolve(&self) -> Result<DatasetManifest> {
        match self {
            ManifestSource::Path(p) => DatasetManifest::load(p),
            ManifestSource::Inline(m) => Ok(m.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<ManifestSource>,
    pub mode: ModeSelection,
    pub matcher: MatcherKind,
    pub nars: MatcherConfig,
    pub rules: RuleConfig,
    pub split: SplitPlan,
    pub diagnostics: DiagnosticsPlan,
    pub nal: NalConfig,
    /// Fixed decision threshold; calibrated per run when absent.
    pub threshold: Option<f64>,
    /// Keep whole labeled persons until about this many rows remain.
    pub subsample_rows: Option<usize>,
    /// Also write every scored evaluation pair.
    pub write_scores: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            mode: ModeSelection::Both,
            matcher: MatcherKind::Nars,
            nars: MatcherConfig::default(),
            rules: RuleConfig::default(),
            split: SplitPlan::default(),
            diagnostics: DiagnosticsPlan::default(),
            nal: NalConfig::default(),
            threshold: None,
            subsample_rows: None,
            write_scores: false,
            out: PathBuf::from("results"),
        }
    }
}

impl RunConfig {
    /// Reads a JSON config. Relative manifest paths resolve against the
    /// file's directory; `out` stays relative to the working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.manifest = cfg.manifest.map(|m| match m {
            ManifestSource::Path(p) if p.is_relative() => ManifestSource::Path(base.join(p)),
            ManifestSource::Inline(d) => ManifestSource::Inline(d.resolve(base)),
            other => other,
        });
        Ok(cfg)
    }

    /// The split plan with the wave adjacency default filled in for the
    /// chosen matcher.
    pub fn effective_split(&self) -> SplitPlan {
        let mut plan = self.split.clone();
        plan.adjacent_waves = Some(plan.adjacent_waves.unwrap_or(self.matcher == MatcherKind::Baseline));
        plan
    }

    /// Checks every section and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |r: Result<()>| {
            if let Err(e) = r {
                problems.push(match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                });
            }
        };
        check(self.nal.validate());
        check(self.split.validate());
        check(self.diagnostics.validate());
        match self.matcher {
            MatcherKind::Nars => check(self.nars.validate()),
            MatcherKind::Baseline => check(self.rules.validate()),
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                problems.push(format!("threshold must lie in [0, 1], got {t}"));
            }
        }
        if self.subsample_rows == Some(0) {
            problems.push("subsample_rows must be positive".into());
        }
        if self.manifest.is_none() {
            problems.push("no dataset manifest given".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}
