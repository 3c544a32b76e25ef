use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ordered_async::experiment::{
    cmd_report, cmd_run, cmd_sweep, cmd_validate, exit_code, CommandOutcome, ExperimentConfig,
    Mutation, SummaryReport,
};

#[derive(Parser)]
#[command(version, about = "Asynchronous SGD under data-dependent delays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every listed method for every seed and write per-step traces.
    Run { config: PathBuf },
    /// Run the full hyperparameter grid and write the robustness report.
    Sweep { config: PathBuf },
    /// Run the invariant suite at small scale.
    Validate {
        #[arg(long, value_enum, default_value_t = MutationArg::None)]
        mutate: MutationArg,
    },
    /// Rebuild robustness.csv and summary.json from an existing runs.csv.
    Report {
        dir: PathBuf,
        /// Config whose report checks should be evaluated.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    None,
    OrderedWeight,
    Thresholds,
}

impl From<MutationArg> for Mutation {
    fn from(m: MutationArg) -> Self {
        match m {
            MutationArg::None => Mutation::None,
            MutationArg::OrderedWeight => Mutation::OrderedWeight,
            MutationArg::Thresholds => Mutation::Thresholds,
        }
    }
}

fn print_summary(summary: &SummaryReport) -> bool {
    for m in &summary.methods {
        match &m.best {
            Some(best) => {
                print!(
                    "{:<18} best {} = {:.6e} (eta {:?}, {} ok / {} failed), robustness ratio {:.3}",
                    m.method, m.metric, best.mean, best.eta, best.ok_runs, best.failed_runs, m.robustness_ratio
                );
                match best.mean_macro_f1 {
                    Some(f1) => println!(", macro F1 {f1:.4}"),
                    None => println!(),
                }
            }
            None => println!("{:<18} no grid point finished on every seed", m.method),
        }
    }
    let mut ok = true;
    for c in &summary.checks {
        println!("{} {:?} value={:.4}", if c.passed { "PASS" } else { "FAIL" }, c.check, c.value);
        ok &= c.passed;
    }
    ok
}

fn finish_outcome(outcome: CommandOutcome) -> ExitCode {
    println!("wrote {}", outcome.output_dir.display());
    let checks_ok = print_summary(&outcome.summary);
    if !outcome.fully_failed.is_empty() {
        eprintln!("every seed failed for grid points {:?}", outcome.fully_failed);
        return ExitCode::from(exit_code::CONFIG_ERROR as u8);
    }
    if checks_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(exit_code::ACCEPTANCE_FAILURE as u8)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => ExperimentConfig::load(&config)
            .and_then(|c| cmd_run(&c))
            .map(finish_outcome),
        Command::Sweep { config } => ExperimentConfig::load(&config)
            .and_then(|c| cmd_sweep(&c))
            .map(finish_outcome),
        Command::Validate { mutate } => cmd_validate(mutate.into()).map(|results| {
            let failed: Vec<&str> = results
                .iter()
                .filter(|r| !r.passed)
                .map(|r| r.name.as_str())
                .collect();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed invariants: {}", failed.join(", "));
                ExitCode::from(exit_code::ACCEPTANCE_FAILURE as u8)
            }
        }),
        Command::Report { dir, config } => config
            .map(ExperimentConfig::load)
            .transpose()
            .and_then(|c| cmd_report(&dir, c.as_ref()))
            .map(|summary| {
                if print_summary(&summary) {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(exit_code::ACCEPTANCE_FAILURE as u8)
                }
            }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit_code::CONFIG_ERROR as u8)
    })
}
