//! Experiment configuration: a TOML file naming one experiment, the geometry, and
//! optional overrides of its mode set, neck lengths and seeds.
//!
//! ```toml
//! experiment = "decay_scan"
//! output_dir = "results"
//! s_grid = [10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
//! modes = [[1, 0], [3, 0], [1, 1]]
//! seeds = [1]
//!
//! [geometry]
//! R0 = 4.0
//! p = 1
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryConfig;
use crate::radial_ode::ModeIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    DecayScan,
    RatioBound,
    VcylConvergence,
    GreenIdentity,
    HnDecay,
    StretchIdentity,
    TraceVariation,
    AbRates,
    VMatrix,
    Assumptions,
    OracleConvergence,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 11] = [
        ExperimentName::DecayScan,
        ExperimentName::RatioBound,
        ExperimentName::VcylConvergence,
        ExperimentName::GreenIdentity,
        ExperimentName::HnDecay,
        ExperimentName::StretchIdentity,
        ExperimentName::TraceVariation,
        ExperimentName::AbRates,
        ExperimentName::VMatrix,
        ExperimentName::Assumptions,
        ExperimentName::OracleConvergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::DecayScan => "decay_scan",
            ExperimentName::RatioBound => "ratio_bound",
            ExperimentName::VcylConvergence => "vcyl_convergence",
            ExperimentName::GreenIdentity => "green_identity",
            ExperimentName::HnDecay => "hn_decay",
            ExperimentName::StretchIdentity => "stretch_identity",
            ExperimentName::TraceVariation => "trace_variation",
            ExperimentName::AbRates => "ab_rates",
            ExperimentName::VMatrix => "v_matrix",
            ExperimentName::Assumptions => "assumptions",
            ExperimentName::OracleConvergence => "oracle_convergence",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ExperimentName::DecayScan => "slope of log|u_nm| in the neck length against -sqrt(n^2/16 + m^2)",
            ExperimentName::RatioBound => "I_nm(R0) e^{alpha s} / I_nm(R0 + s) stays in (0, 2]",
            ExperimentName::VcylConvergence => "e^{ns/4} u_n0 approaches C_n v^cyl_n0",
            ExperimentName::GreenIdentity => "Poisson maps recover the (n, 0) coefficient of test functions",
            ExperimentName::HnDecay => "correction term of the Poisson map decays on the stretch support",
            ExperimentName::StretchIdentity => "length derivative of u_n0 against its Poisson-map expression",
            ExperimentName::TraceVariation => "first variation of u_n0 under radial metric changes",
            ExperimentName::AbRates => "decay of A and convergence of B for the corrected family",
            ExperimentName::VMatrix => "response matrix, normalized basis and bordered system",
            ExperimentName::Assumptions => "bounded, corrected and non-degenerate source family over s",
            ExperimentName::OracleConvergence => "mode solver against the 2D finite-difference oracle",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.as_str()).collect();
            Error::Config(format!("unknown experiment '{s}'; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default)]
    pub geometry: GeometryConfig,
    /// `[n, m]` pairs; the experiment default when absent.
    #[serde(default)]
    pub modes: Option<Vec<[i32; 2]>>,
    #[serde(default)]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Largest `|m|` kept in `A` and `B`.
    #[serde(default)]
    pub m_max: Option<i32>,
    /// Not echoed into summaries, so moving the output leaves them unchanged.
    #[serde(default = "default_output", skip_serializing)]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentName) -> Self {
        ExperimentConfig {
            experiment,
            geometry: GeometryConfig::default(),
            modes: None,
            s_grid: None,
            seeds: None,
            m_max: None,
            output_dir: default_output(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.s_grid {
            if s.is_empty() {
                return Err(Error::Config("s_grid is empty".into()));
            }
            if let Some(w) = s.windows(2).find(|w| !(w[1] > w[0])) {
                return Err(Error::Config(format!("s_grid must be strictly increasing: {} then {}", w[0], w[1])));
            }
            if let Some(bad) = s.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Config(format!("s_grid entries must be positive, got {bad}")));
            }
        }
        if let Some(modes) = &self.modes {
            if modes.is_empty() {
                return Err(Error::Config("modes is empty".into()));
            }
            for &[n, m] in modes {
                ModeIndex::new(n, m).map_err(|e| Error::Config(format!("mode [{n}, {m}]: {e}")))?;
            }
        }
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                return Err(Error::Config("seeds is empty".into()));
            }
        }
        if let Some(m) = self.m_max {
            if !(0..=16).contains(&m) {
                return Err(Error::Config(format!("m_max must lie in [0, 16], got {m}")));
            }
        }
        crate::geometry::build_geometry(&self.geometry).map_err(|e| Error::Config(format!("geometry: {e}")))?;
        Ok(())
    }

    pub fn mode_indices(&self) -> Option<Vec<ModeIndex>> {
        self.modes.as_ref().map(|v| v.iter().map(|&[n, m]| ModeIndex { n, m }).collect())
    }
}
