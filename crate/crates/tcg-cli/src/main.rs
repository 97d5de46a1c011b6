use anyhow::Result;
use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use tcg_cli::{parse_scheme, CommandOutput, RunConfig};

/// Qutrit-level simulator and verification suite for transition-composite
/// conditional gates.
#[derive(Parser)]
#[command(name = "tcg", version, about)]
struct Cli {
    /// Random seed for every sampling step
    #[arg(long, global = true, env = "TCG_SEED", default_value_t = 7)]
    seed: u64,

    /// Measurement shots per sampling step (omit for exact statistics)
    #[arg(long, global = true, env = "TCG_SHOTS")]
    shots: Option<u64>,

    /// Enable the device noise model (decoherence and leakage)
    #[arg(long, global = true, env = "TCG_NOISE")]
    noise: bool,

    /// TOML device parameter table (defaults to the built-in table)
    #[arg(long, global = true, env = "TCG_DEVICE_CONFIG")]
    device_config: Option<String>,

    /// Write output to this file instead of stdout
    #[arg(long, global = true, env = "TCG_OUT")]
    out: Option<PathBuf>,

    /// Gate scheme for preparation circuits: cz, cu, spcu, or tcg
    #[arg(long, global = true, env = "TCG_SCHEME", default_value = "cu", value_parser = parse_scheme_arg)]
    scheme: tcg_core::circuit::Scheme,

    /// Expand composite gates into pulse-level operations before
    /// scheduling and counting
    #[arg(long, global = true, env = "TCG_EXPAND_COMPOSITES")]
    expand_composites: bool,

    #[command(subcommand)]
    command: Command,
}

fn parse_scheme_arg(s: &str) -> Result<tcg_core::circuit::Scheme, String> {
    parse_scheme(s).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Recompose every gate family and check it against its closed form
    Verify {
        /// Swap the pulse convention (negative control; must fail)
        #[arg(long)]
        flip_convention: bool,
    },
    /// Gate-count and depth table for preparation circuits (CSV)
    DepthTable {
        /// Smallest register size
        #[arg(long, default_value_t = 3)]
        m_min: usize,
        /// Largest register size
        #[arg(long, default_value_t = 10)]
        m_max: usize,
    },
    /// Prepare a GHZ or W state and report fidelity (CSV)
    Prepare {
        /// State family: ghz or w
        #[arg(long)]
        family: String,
        /// Register size
        #[arg(long, default_value_t = 3)]
        m: usize,
        /// Family parameter: tau for ghz, lambda for w
        #[arg(long, default_value_t = 0.0)]
        param: f64,
        /// Sweep the family parameter over this many points
        #[arg(long)]
        sweep_points: Option<usize>,
    },
    /// Simulate the four-qudit comparator and report its truth-table
    /// fidelity and gate-count reductions (JSON)
    Comparator,
    /// Process tomography of the conditional rotation (JSON)
    Qpt {
        #[arg(long, default_value_t = std::f64::consts::PI)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
    },
    /// Closed-loop calibration of the conditional rotation (CSV)
    Feedback {
        #[arg(long, default_value_t = std::f64::consts::PI)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        /// Hidden rotation-angle offset to calibrate away
        #[arg(long, default_value_t = 0.1)]
        dtheta: f64,
        /// Hidden pulse-phase offset to calibrate away
        #[arg(long, default_value_t = 0.0)]
        dphi: f64,
        #[arg(long, default_value_t = 10)]
        max_iter: usize,
        #[arg(long, default_value_t = 0.999)]
        threshold: f64,
    },
    /// Population scans of the conditional rotation (CSV)
    Scan {
        /// Scan kind: rotation, phase, or echo
        #[arg(long, default_value = "rotation")]
        kind: String,
        #[arg(long, default_value_t = 33)]
        points: usize,
        /// Phase offset folded into the scanned pulse phase
        #[arg(long, default_value_t = 0.0)]
        phi0: f64,
    },
    /// Recovered-population decoherence comparison of two-qudit
    /// sequences (CSV)
    Decohere,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = RunConfig {
        seed: cli.seed,
        shots: cli.shots,
        noise: cli.noise,
        device_config: cli.device_config.clone(),
        scheme: cli.scheme,
        expand_composites: cli.expand_composites,
    };
    let CommandOutput { body, ok } = match &cli.command {
        Command::Verify { flip_convention } => tcg_cli::cmd_verify(*flip_convention)?,
        Command::DepthTable { m_min, m_max } => tcg_cli::cmd_depth_table(&cfg, *m_min, *m_max)?,
        Command::Prepare {
            family,
            m,
            param,
            sweep_points,
        } => tcg_cli::cmd_prepare(&cfg, family, *m, *param, *sweep_points)?,
        Command::Comparator => tcg_cli::cmd_comparator(&cfg)?,
        Command::Qpt { theta, phi } => tcg_cli::cmd_qpt(&cfg, *theta, *phi)?,
        Command::Feedback {
            theta,
            phi,
            dtheta,
            dphi,
            max_iter,
            threshold,
        } => tcg_cli::cmd_feedback(&cfg, *theta, *phi, *dtheta, *dphi, *max_iter, *threshold)?,
        Command::Scan { kind, points, phi0 } => tcg_cli::cmd_scan(&cfg, kind, *points, *phi0)?,
        Command::Decohere => tcg_cli::cmd_decohere(&cfg)?,
    };
    match &cli.out {
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
        }
        Some(path) => {
            std::fs::write(path, body.as_bytes())?;
        }
    }
    if !ok {
        std::process::exit(1);
    }
    Ok(())
}
