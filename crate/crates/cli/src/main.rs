use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use savmac_cli::{converge, fmt_num, parse_dt_list, roots_study, run, CliError, RunConfig};

/// SAV-MAC solver for 2D incompressible Navier-Stokes on the unit square.
#[derive(Parser, Debug)]
#[command(name = "savmac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation; writes trace.csv and errors.csv
    Run(Common),
    /// Refinement study on 2^level grids with dt = h; writes converge.csv
    Converge {
        #[command(flatten)]
        common: Common,
        /// comma separated levels
        #[arg(long, default_value = "4,5,6,7", value_delimiter = ',')]
        levels: Vec<u32>,
    },
    /// Unforced decay for a list of time steps; writes one trace per dt
    Roots {
        #[command(flatten)]
        common: Common,
        /// comma separated time steps, fractions allowed (1/64)
        #[arg(long, default_value = "1/32,1/64,1/128,1/256")]
        dts: String,
        /// keep nx x ny fixed instead of setting nx = ny = 1/dt
        #[arg(long = "fixed_grid")]
        fixed_grid: bool,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    example: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    ny: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "t_final")]
    t_final: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    verbosity: Option<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("config: cannot read {}: {e}", p.display())))?,
            ),
            None => None,
        };
        let flags: Vec<(String, String)> = [
            ("example", &self.example),
            ("nx", &self.nx),
            ("ny", &self.ny),
            ("dt", &self.dt),
            ("t_final", &self.t_final),
            ("nu", &self.nu),
            ("delta", &self.delta),
            ("kappa", &self.kappa),
            ("output", &self.output),
            ("verbosity", &self.verbosity),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect();
        RunConfig::from_sources(text.as_deref(), &flags)
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(common) => {
            let cfg = common.config()?;
            let out = run(&cfg)?;
            println!("{} steps written to {}", out.trace.len(), cfg.output.display());
            if let Some(e) = out.errors {
                for (name, v) in e.named() {
                    println!("{name:>12} {}", fmt_num(v));
                }
            }
        }
        Command::Converge { common, levels } => {
            let cfg = common.config()?;
            let table = converge(&cfg, &levels)?;
            for row in &table.rows {
                println!("nx={:>5} e_u={} e_p={}", row.nx, fmt_num(row.errors.e_u_inf2), fmt_num(row.errors.e_p_22));
            }
        }
        Command::Roots { common, dts, fixed_grid } => {
            let cfg = common.config()?;
            let dts = parse_dt_list(&dts)?;
            for s in roots_study(&cfg, &dts, !fixed_grid)? {
                println!(
                    "dt={} max|S-1|={} max|rejected|={}",
                    fmt_num(s.dt),
                    fmt_num(s.max_deviation),
                    fmt_num(s.max_rejected_tail)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
