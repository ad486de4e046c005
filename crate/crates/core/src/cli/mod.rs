//! Command-line front end.
//!
//! Exit codes: 0 when the verdict is PASS (or carries no pass/fail
//! semantics), 1 on FAIL, 2 on usage, configuration or runtime errors.

mod commands;
mod config;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_choi, cmd_convergence, cmd_identity, cmd_param, cmd_unravel, execute, identity_sample,
    log_log_slope,
};
pub use config::{Command, ExperimentConfig, FileConfig, Format, ModelKind};
pub use report::{summary_path, Cell, RunReport, Software, Summary, Verdict};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "sse-unravel", version, about = "Diffusive SSE unravelings of qubit master equations")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Ensemble average of the SSE against the master equation.
    Unravel(Flags),
    /// Complete positivity of the evolution map over a time grid.
    Choi(Flags),
    /// The ψ⊥ operator identity over random pure states.
    Identity(Flags),
    /// Noise-parameterization round trips and orthogonal redundancy.
    Param(Flags),
    /// Weak-order study of the SSE and RK4 order of the master integrator.
    Convergence(Flags),
}

#[derive(Debug, Default, clap::Args)]
struct Flags {
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c3: Option<f64>,
    /// Initial pure state: `x,y,z` Bloch vector or one of 0, 1, +, -, +i, -i.
    #[arg(long, value_parser = parse_initial, allow_hyphen_values = true)]
    initial: Option<[f64; 3]>,
    #[arg(long, allow_negative_numbers = true)]
    t_final: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Comma-separated evaluation times (`choi`).
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Number of real noises `N` (`param`).
    #[arg(long)]
    noise_dim: Option<usize>,
    /// Number of Lindblad channels `n` (`param`).
    #[arg(long)]
    channels: Option<usize>,
    /// Comma-separated RK4 step sizes (`convergence`).
    #[arg(long, value_delimiter = ',')]
    rk4_dts: Option<Vec<f64>>,
    #[arg(long)]
    rk4_horizon: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads: 0 = automatic, 1 = sequential. Never changes results.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_initial(s: &str) -> std::result::Result<[f64; 3], String> {
    let named = match s {
        "0" => Some([0.0, 0.0, 1.0]),
        "1" => Some([0.0, 0.0, -1.0]),
        "+" => Some([1.0, 0.0, 0.0]),
        "-" => Some([-1.0, 0.0, 0.0]),
        "+i" => Some([0.0, 1.0, 0.0]),
        "-i" => Some([0.0, -1.0, 0.0]),
        _ => None,
    };
    if let Some(n) = named {
        return Ok(n);
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("expected x,y,z or a named state: {e}"))?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected 3 components, got {}", p.len()))
}

impl Flags {
    fn into_config(self, command: Command) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let mut rates = file
            .rates
            .unwrap_or(ExperimentConfig::defaults(command).rates);
        for (slot, flag) in rates.iter_mut().zip([self.c1, self.c2, self.c3]) {
            if let Some(c) = flag {
                *slot = c;
            }
        }
        let flags = FileConfig {
            rates: Some(rates),
            initial: self.initial,
            t_final: self.t_final,
            dt: self.dt,
            trajectories: self.trajectories,
            seed: self.seed,
            grid_points: self.grid_points,
            times: self.times,
            model: self.model,
            noise_dim: self.noise_dim,
            channels: self.channels,
            rk4_dts: self.rk4_dts,
            rk4_horizon: self.rk4_horizon,
            output: self.output,
            format: self.format,
            threads: self.threads,
        };
        ExperimentConfig::resolve(command, file.merge(flags))
    }
}

/// Parses `args` (including the program name), runs the command, writes the
/// report and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (command, flags) = match cli.command {
        Sub::Unravel(f) => (Command::Unravel, f),
        Sub::Choi(f) => (Command::Choi, f),
        Sub::Identity(f) => (Command::Identity, f),
        Sub::Param(f) => (Command::Param, f),
        Sub::Convergence(f) => (Command::Convergence, f),
    };
    let outcome = flags.into_config(command).and_then(|cfg| {
        let report = execute(&cfg)?;
        report.write(cfg.format, cfg.output.as_deref())?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            let s = &report.summary;
            eprintln!("{command}: {} ({})", s.verdict.as_str(), s.reason);
            s.verdict.exit_code()
        }
        Err(e) => {
            eprintln!("{command}: error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state_syntax() {
        assert_eq!(parse_initial("+i").unwrap(), [0.0, 1.0, 0.0]);
        assert_eq!(parse_initial("0.6, 0, -0.8").unwrap(), [0.6, 0.0, -0.8]);
        assert!(parse_initial("1,2").is_err());
        assert!(parse_initial("up").is_err());
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from(["sse-unravel", "choi", "--c3", "-2", "--times", "0.1,0.2"]).unwrap();
        let Sub::Choi(f) = cli.command else { panic!() };
        let cfg = f.into_config(Command::Choi).unwrap();
        assert_eq!(cfg.rates, [1.0, 1.0, -2.0]);
        assert_eq!(cfg.times, vec![0.1, 0.2]);
        assert_eq!(cfg.t_final, 1.0);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["sse-unravel", "bogus"]), 2);
        assert_eq!(run(["sse-unravel", "unravel", "--dt", "-1"]), 2);
        assert_eq!(run(["sse-unravel", "unravel", "--trajectories", "0"]), 2);
    }
}
