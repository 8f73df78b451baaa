use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use triod_flow::cli;

/// Curvature flow of planar triods with misorientation-dependent tension.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation described by a JSON config file.
    Simulate { config: PathBuf },
    /// Smallest Rayleigh quotient of the weighted three-segment network.
    Rayleigh {
        /// a,b,c
        #[arg(long, value_parser = parse_list::<3>, allow_hyphen_values = true)]
        lengths: [f64; 3],
        /// a,b,c
        #[arg(long, value_parser = parse_list::<3>, allow_hyphen_values = true)]
        weights: [f64; 3],
        /// Elements per segment.
        #[arg(long, default_value_t = 400)]
        nodes: usize,
    },
    /// Fermat point and spokes of the Steiner triod for three endpoints.
    Steiner {
        /// x1,y1,x2,y2,x3,y3
        #[arg(long, value_parser = parse_list::<6>, allow_hyphen_values = true)]
        endpoints: [f64; 6],
    },
    /// Run a grid of simulations concurrently (worker cap: TRIOD_FLOW_THREADS).
    Sweep { config: PathBuf },
}

fn parse_list<const K: usize>(s: &str) -> Result<[f64; K], String> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let n = values.len();
    values.try_into().map_err(|_| format!("expected {K} comma-separated numbers, got {n}"))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let code = match args.command {
        Command::Simulate { config } => cli::cmd_simulate(&config),
        Command::Rayleigh { lengths, weights, nodes } => cli::cmd_rayleigh(lengths, weights, nodes),
        Command::Steiner { endpoints: e } => cli::cmd_steiner([[e[0], e[1]], [e[2], e[3]], [e[4], e[5]]]),
        Command::Sweep { config } => cli::cmd_sweep(&config),
    };
    ExitCode::from(code as u8)
}
