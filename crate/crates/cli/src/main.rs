use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use compmdp::families::{DiLevel, Family, FzMode, GenConfig};
use compmdp::ops::{self, CliError, FlattenFormat, SolveOpts};

#[derive(Parser)]
#[command(name = "compmdp", version, about = "Compositional model checker for diagrams of open MDPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a diagram or component file for one entrance/exit pair
    Solve {
        file: PathBuf,
        /// Entrance port; defaults to the diagram's solve line
        #[arg(long)]
        entrance: Option<usize>,
        /// Exit port; defaults to the diagram's solve line
        #[arg(long)]
        exit: Option<usize>,
        /// Abort if any single component exceeds this many schedulers
        #[arg(long)]
        max_schedulers: Option<u64>,
        /// Keep dominated elements instead of pruning fronts
        #[arg(long)]
        no_prune: bool,
        /// Average the reported wall time over five runs
        #[arg(long)]
        bench: bool,
        /// Write evaluation statistics as JSON
        #[arg(long, value_name = "PATH")]
        stats: Option<PathBuf>,
        /// Write the witness scheduler, one "position action" line each
        #[arg(long, value_name = "PATH")]
        scheduler_out: Option<PathBuf>,
    },
    /// Parse and validate an input file, reporting diagram shape
    Check {
        file: PathBuf,
        /// Also certify almost-sure exit under every scheduler (flattens)
        #[arg(long)]
        termination: bool,
    },
    /// Generate a seeded benchmark family into a directory
    Gen {
        #[arg(value_enum)]
        family: Family,
        /// Family shape as comma-separated counts
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Diagram-interface level: how many aliases per component
        #[arg(long, value_enum, default_value = "high")]
        di: DiLevel,
        /// Freeze mode for the packets family
        #[arg(long, value_enum, default_value = "none")]
        fz: FzMode,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(short, long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Flatten a diagram into one monolithic model file
    Flatten {
        file: PathBuf,
        #[arg(short, long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "native")]
        format: FlattenFormat,
    },
    /// Run the built-in axiom and oracle checks
    Selftest {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Random instances per check
        #[arg(long, default_value_t = 25)]
        instances: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.cmd {
        Cmd::Solve { file, entrance, exit, max_schedulers, no_prune, bench, stats, scheduler_out } => {
            let opts = SolveOpts { entrance, exit, max_schedulers, no_prune, bench };
            let out = ops::cmd_solve(&file, &opts)?;
            println!("{}", ops::format_solution(out.p, out.r));
            if bench {
                println!("bench: averaged over {} runs, wall time {:.6}s", out.runs, out.stats.wall_time);
            }
            if let Some(path) = stats {
                std::fs::write(&path, ops::stats_json(&out.stats))
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            }
            if let Some(path) = scheduler_out {
                std::fs::write(&path, ops::scheduler_lines(&out.scheduler))
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { file, termination } => {
            let report = ops::cmd_check(&file, termination)?;
            for line in &report.lines {
                println!("{line}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Gen { family, sizes, di, fz, seed, out } => {
            let seed = ops::env_seed()?.unwrap_or(seed);
            let cfg = GenConfig { family, sizes, di, fz, seed };
            for path in ops::cmd_gen(&cfg, &out)? {
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Flatten { file, out, format } => {
            ops::cmd_flatten(&file, format, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Selftest { seed, instances } => {
            let seed = ops::env_seed()?.unwrap_or(seed);
            let outcome = ops::cmd_selftest(seed, instances);
            for line in &outcome.lines {
                println!("{line}");
            }
            Ok(if outcome.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
