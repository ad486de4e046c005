//! Experiment configuration: per-command defaults, an optional JSON file, and
//! command-line overrides, in increasing order of precedence.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::BlochVector;
use crate::error::{Error, Result};
use crate::master::RateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Unravel,
    Choi,
    Identity,
    Param,
    Convergence,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unravel => "unravel",
            Self::Choi => "choi",
            Self::Identity => "identity",
            Self::Param => "param",
            Self::Convergence => "convergence",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// Which SSE produces the trajectories of `unravel` and `convergence`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Single-noise qubit SSE for signed Pauli rates.
    Noncp,
    /// General diffusive SSE with `H = 0`, `Lₖ = √cₖ σₖ`, `u = I₃`.
    General,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub rates: Option<[f64; 3]>,
    pub initial: Option<[f64; 3]>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub trajectories: Option<usize>,
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub model: Option<ModelKind>,
    pub noise_dim: Option<usize>,
    pub channels: Option<usize>,
    pub rk4_dts: Option<Vec<f64>>,
    pub rk4_horizon: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields of `over` replace those of `self`.
    pub fn merge(self, over: FileConfig) -> Self {
        Self {
            rates: over.rates.or(self.rates),
            initial: over.initial.or(self.initial),
            t_final: over.t_final.or(self.t_final),
            dt: over.dt.or(self.dt),
            trajectories: over.trajectories.or(self.trajectories),
            seed: over.seed.or(self.seed),
            grid_points: over.grid_points.or(self.grid_points),
            times: over.times.or(self.times),
            model: over.model.or(self.model),
            noise_dim: over.noise_dim.or(self.noise_dim),
            channels: over.channels.or(self.channels),
            rk4_dts: over.rk4_dts.or(self.rk4_dts),
            rk4_horizon: over.rk4_horizon.or(self.rk4_horizon),
            output: over.output.or(self.output),
            format: over.format.or(self.format),
            threads: over.threads.or(self.threads),
        }
    }
}

/// Fully resolved parameters. The serialized form is echoed in every report;
/// `output`, `format` and `threads` are left out because they never affect
/// the data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub rates: [f64; 3],
    /// Bloch vector of the initial pure state.
    pub initial: [f64; 3],
    pub t_final: f64,
    pub dt: f64,
    /// Trajectories (`unravel`, `convergence`), sampled states (`identity`,
    /// and the positivity sweep of `choi`) or random cases (`param`).
    pub trajectories: usize,
    pub seed: u64,
    pub grid_points: usize,
    /// Explicit evaluation times for `choi`; empty means the uniform grid.
    pub times: Vec<f64>,
    pub model: ModelKind,
    /// `N` for `param`.
    pub noise_dim: usize,
    /// `n` for `param`.
    pub channels: usize,
    /// RK4 step sizes for the master-equation order check of `convergence`.
    pub rk4_dts: Vec<f64>,
    pub rk4_horizon: f64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
    #[serde(skip)]
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        let base = Self {
            command,
            rates: RateVector::NON_CP.0,
            initial: BlochVector::NORTH.0,
            t_final: 0.25,
            dt: 1e-3,
            trajectories: 20_000,
            seed: 42,
            grid_points: 32,
            times: Vec::new(),
            model: ModelKind::Noncp,
            noise_dim: 4,
            channels: 2,
            rk4_dts: vec![0.1, 0.05, 0.025],
            rk4_horizon: 1.0,
            output: None,
            format: Format::Json,
            threads: 0,
        };
        match command {
            Command::Unravel => base,
            Command::Choi => Self {
                t_final: 1.0,
                grid_points: 20,
                trajectories: 10_000,
                seed: 11,
                ..base
            },
            Command::Identity => Self {
                trajectories: 10_000,
                seed: 7,
                ..base
            },
            Command::Param => Self {
                t_final: 0.1,
                trajectories: 100,
                seed: 3,
                ..base
            },
            Command::Convergence => Self { dt: 5e-4, ..base },
        }
    }

    /// Applies `file` on top of the command defaults and validates.
    pub fn resolve(command: Command, file: FileConfig) -> Result<Self> {
        let d = Self::defaults(command);
        let cfg = Self {
            command,
            rates: file.rates.unwrap_or(d.rates),
            initial: file.initial.unwrap_or(d.initial),
            t_final: file.t_final.unwrap_or(d.t_final),
            dt: file.dt.unwrap_or(d.dt),
            trajectories: file.trajectories.unwrap_or(d.trajectories),
            seed: file.seed.unwrap_or(d.seed),
            grid_points: file.grid_points.unwrap_or(d.grid_points),
            times: file.times.unwrap_or(d.times),
            model: file.model.unwrap_or(d.model),
            noise_dim: file.noise_dim.unwrap_or(d.noise_dim),
            channels: file.channels.unwrap_or(d.channels),
            rk4_dts: file.rk4_dts.unwrap_or(d.rk4_dts),
            rk4_horizon: file.rk4_horizon.unwrap_or(d.rk4_horizon),
            output: file.output.or(d.output),
            format: file.format.unwrap_or(d.format),
            threads: file.threads.unwrap_or(d.threads),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.rates.iter().any(|c| !c.is_finite()) {
            return bad(format!("rates must be finite, got {:?}", self.rates));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return bad(format!("t_final must be >= 0, got {}", self.t_final));
        }
        if self.trajectories == 0 {
            return bad("trajectories must be >= 1".into());
        }
        if self.grid_points == 0 {
            return bad("grid_points must be >= 1".into());
        }
        let r = BlochVector(self.initial).norm();
        if !r.is_finite() || (r - 1.0).abs() > 1e-9 {
            return bad(format!(
                "initial must be a unit Bloch vector (pure state), got norm {r}"
            ));
        }
        if self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return bad("times must be finite and >= 0".into());
        }
        if self.times.windows(2).any(|w| w[0] > w[1]) {
            return bad("times must be ascending".into());
        }
        if !(1..=4).contains(&self.channels) {
            return bad(format!("channels must be in 1..=4, got {}", self.channels));
        }
        if self.noise_dim < self.channels {
            return bad(format!(
                "noise_dim ({}) must be >= channels ({})",
                self.noise_dim, self.channels
            ));
        }
        if self.rk4_dts.len() < 2 || self.rk4_dts.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return bad("rk4_dts needs at least two positive step sizes".into());
        }
        if !(self.rk4_horizon > 0.0) || !self.rk4_horizon.is_finite() {
            return bad(format!("rk4_horizon must be > 0, got {}", self.rk4_horizon));
        }
        Ok(())
    }

    pub fn rate_vector(&self) -> RateVector {
        RateVector(self.rates)
    }

    pub fn initial_bloch(&self) -> BlochVector {
        let n = BlochVector(self.initial);
        let r = n.norm();
        BlochVector(n.0.map(|x| x / r))
    }
}
