use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gne_cli::builtins;
use gne_cli::runner::{compare_to_oracle, exit_code_for, gain_check, run, ModeName, Overrides};
use gne_cli::Scenario;
use nalgebra::DVector;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "gne", version, about = "Barrier-based GNE seeking for networks of passive agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate scenarios and write trajectory.csv, summary.txt and SVG plots.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory. With several scenarios each gets a subdirectory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Scenarios run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the dynamics against the penalized-equilibrium oracle.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated reference replacing the oracle point.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Parse and validate scenarios without running them.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// List the built-in scenarios.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FullInfo,
    PartialInfo,
    Distributed,
}

#[derive(Args)]
struct Common {
    /// Built-in name or path to a scenario file. Repeatable for `run`.
    #[arg(long, required = true)]
    scenario: Vec<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            rho: self.rho,
            mode: self.mode.map(|m| match m {
                ModeArg::FullInfo => ModeName::FullInfo,
                ModeArg::PartialInfo => ModeName::PartialInfo,
                ModeArg::Distributed => ModeName::Distributed,
            }),
            epsilon: self.epsilon,
            k: self.k,
            t_final: self.t_final,
            dt: self.dt,
            seed: self.seed,
        }
    }

    fn scenarios(&self) -> anyhow::Result<Vec<Scenario>> {
        let ov = self.overrides();
        self.scenario
            .iter()
            .map(|s| {
                let mut scn = Scenario::read(s).with_context(|| format!("loading {s}"))?;
                ov.apply(&mut scn)?;
                scn.validate().with_context(|| format!("validating {s}"))?;
                Ok(scn)
            })
            .collect()
    }
}

fn run_one(scn: &Scenario, dir: &Path) -> i32 {
    match run(scn, dir) {
        Ok(outcome) => {
            println!("[{}] {} -> {}", scn.name, outcome.status.name(), dir.display());
            for key in ["final_output", "distance_to_reference", "min_margin", "final_consensus_err", "error"] {
                if let Some(v) = outcome.summary.get(key) {
                    println!("  {key}={v}");
                }
            }
            outcome.status.exit_code()
        }
        Err(e) => {
            eprintln!("[{}] error: {e:#}", scn.name);
            exit_code_for(&e)
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::List => {
            for (name, about, _) in builtins::ALL {
                println!("{name:10} {about}");
            }
            Ok(0)
        }
        Command::Validate { common } => {
            for scn in common.scenarios()? {
                let built = scn.build()?;
                print!(
                    "{}: ok ({} players, {} constraints, mode {}, mu_est {:.4}",
                    scn.name,
                    scn.n_players(),
                    built.constraints.n_constraints(),
                    scn.mode.name(),
                    built.mu_est
                );
                if let Some((theta2, l2, ok)) = gain_check(&scn, &built)? {
                    print!(", lambda2 {l2:.4}, theta2_est {theta2:.4}, gain condition {ok}");
                }
                if let Some(k) = scn.distributed_gain(&built)? {
                    print!(", k {k}");
                }
                println!(")");
            }
            Ok(0)
        }
        Command::Run { common, out, jobs } => {
            let scenarios = common.scenarios()?;
            let dirs: Vec<PathBuf> = if scenarios.len() == 1 {
                vec![out.clone()]
            } else {
                scenarios.iter().enumerate().map(|(i, s)| out.join(format!("{:02}-{}", i + 1, s.name))).collect()
            };
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
            let codes: Vec<i32> =
                pool.install(|| scenarios.par_iter().zip(&dirs).map(|(s, d)| run_one(s, d)).collect());
            Ok(codes.into_iter().max().unwrap_or(0))
        }
        Command::Compare { common, reference } => {
            let reference = reference
                .map(|r| {
                    r.split(',')
                        .map(|v| v.trim().parse::<f64>().with_context(|| format!("invalid reference entry {v:?}")))
                        .collect::<anyhow::Result<Vec<_>>>()
                        .map(DVector::from_vec)
                })
                .transpose()?;
            let mut worst = 0;
            for scn in common.scenarios()? {
                match compare_to_oracle(&scn, reference.as_ref()) {
                    Ok(report) => {
                        print!("{}", report.summary());
                        worst = worst.max(report.status().exit_code());
                    }
                    Err(e) => {
                        eprintln!("[{}] error: {e:#}", scn.name);
                        worst = worst.max(exit_code_for(&e));
                    }
                }
            }
            Ok(worst)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
