use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use auv_hmappo::error::HarnessError;
use auv_hmappo::harness::{
    cmd_compare, cmd_eval, cmd_resume, cmd_smoke, cmd_sweep_epsilon, cmd_train, experiment_dir, load_config,
    CliOverrides, ExperimentSpec, Profile, COMPARE_AXES, OUT_ENV,
};
use auv_hmappo::hmappo::{Delegation, EvalSummary};

#[derive(Parser)]
#[command(name = "auv-hmappo", version, about = "Covert multi-AUV detection: simulator and hierarchical MAPPO trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file with optional [world], [train] and [experiment] tables.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output root (default: $AUV_HMAPPO_OUT, else ./runs).
    #[arg(long, global = true, value_name = "DIR", env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Training episodes for train/sweep-epsilon/smoke, evaluation episodes for eval/compare.
    #[arg(long, global = true, value_name = "N")]
    episodes: Option<usize>,
    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,
    /// Print a progress line every N episodes (0 = quiet).
    #[arg(long, global = true, value_name = "N")]
    progress: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    HMappo,
    FlatMappo,
    Random,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed; writes config snapshot, metrics and checkpoints.
    Train {
        /// Continue the run stored in this directory instead of starting fresh.
        #[arg(long, value_name = "DIR")]
        resume: Option<PathBuf>,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "h-mappo")]
        policy: PolicyArg,
        /// Also write per-slice trajectory traces.
        #[arg(long)]
        trace: bool,
    },
    /// Train and evaluate across the covertness budgets of the experiment.
    SweepEpsilon {
        /// Load existing checkpoints instead of training.
        #[arg(long)]
        eval_only: bool,
    },
    /// H-MAPPO versus flat MAPPO and random delegation on paired seeds.
    Compare {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Tiny end-to-end run through every command.
    Smoke,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn spec_for(common: &Common, episodes_train: bool, smoke: bool) -> Result<ExperimentSpec, HarnessError> {
    let mut overrides = CliOverrides {
        profile: common.profile.map(|p| match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }),
        seed: common.seed,
        out: common.out.clone(),
        ..Default::default()
    };
    if episodes_train {
        overrides.episodes = common.episodes;
    } else {
        overrides.eval_episodes = common.episodes;
    }
    if smoke {
        overrides.episodes = Some(common.episodes.unwrap_or(2));
        overrides.eval_episodes = Some(2);
    }
    let mut spec = load_config(common.config.as_deref(), &overrides)?;
    spec.progress_every = common.progress.unwrap_or(if smoke { 0 } else { spec.progress_every.max(10) });
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let common = &cli.common;
    match cli.command {
        Command::Train { resume: Some(dir) } => {
            let progress = common.progress.unwrap_or(10);
            let run = cmd_resume(&dir, common.episodes, progress)?;
            report_train(&[run]);
        }
        Command::Train { resume: None } => {
            let spec = spec_for(common, true, false)?;
            let runs = cmd_train(&spec)?;
            report_train(&runs);
        }
        Command::Eval {
            checkpoint,
            policy,
            trace,
        } => {
            let spec = spec_for(common, false, false)?;
            let delegations = match policy {
                PolicyArg::HMappo => vec![Delegation::Learned],
                PolicyArg::FlatMappo => vec![Delegation::All],
                PolicyArg::Random => vec![Delegation::Random],
                PolicyArg::All => vec![Delegation::Learned, Delegation::All, Delegation::Random],
            };
            let out = experiment_dir(&spec).join("eval");
            let summaries = cmd_eval(&spec, &checkpoint, &delegations, trace, &out)?;
            print_summaries(&summaries);
            println!("wrote {}", out.display());
        }
        Command::SweepEpsilon { eval_only } => {
            let spec = spec_for(common, true, false)?;
            let rows = cmd_sweep_epsilon(&spec, eval_only)?;
            println!("{:>8} {:>12} {:>12} {:>8}", "epsilon", "eta", "mean_kl", "covert");
            for r in &rows {
                println!(
                    "{:>8} {:>12.6} {:>12.6} {:>8.3}",
                    r.epsilon, r.efficiency_mean, r.kl_mean, r.covert_fraction
                );
            }
            println!("wrote {}", experiment_dir(&spec).join("sweep").join("sweep.csv").display());
        }
        Command::Compare { checkpoint } => {
            let spec = spec_for(common, false, false)?;
            let (rows, summaries) = cmd_compare(&spec, &checkpoint)?;
            print_summaries(&summaries);
            println!("{:<12} {}", "normalized", COMPARE_AXES.join("  "));
            for chunk in rows.chunks(COMPARE_AXES.len()) {
                let cells: Vec<String> = chunk.iter().map(|r| format!("{:.3}", r.normalized)).collect();
                println!("{:<12} {}", chunk[0].policy, cells.join("  "));
            }
            println!("wrote {}", experiment_dir(&spec).join("compare").display());
        }
        Command::Smoke => {
            let spec = spec_for(common, true, true)?;
            let report = cmd_smoke(&spec)?;
            println!(
                "smoke ok: {} episodes, {} comparison cells, run dir {}",
                report.episodes,
                report.compare.len(),
                report.dir.display()
            );
        }
    }
    Ok(())
}

fn report_train(runs: &[auv_hmappo::harness::TrainRun]) {
    for run in runs {
        println!("seed {}: {} episodes -> {}", run.seed, run.history.len(), run.dir.display());
        if let Some(c) = run.convergence {
            println!(
                "  high reward {:.3} -> {:.3} (band {:.1}%), low reward {:.3} -> {:.3} (band {:.1}%)",
                c.high.first_decile,
                c.high.final_decile,
                100.0 * c.high.final_band,
                c.low.first_decile,
                c.low.final_decile,
                100.0 * c.low.final_band
            );
        }
    }
}

fn print_summaries(summaries: &[EvalSummary]) {
    println!(
        "{:<12} {:>9} {:>10} {:>10} {:>8} {:>10}",
        "policy", "episodes", "eta", "coop_eff", "covert", "complete"
    );
    for s in summaries {
        println!(
            "{:<12} {:>9} {:>10.6} {:>10.6} {:>8.3} {:>10.3}",
            s.delegation.name(),
            s.episodes,
            s.efficiency.mean,
            s.cooperation_efficiency.mean,
            s.pooled_covert_fraction,
            s.completion_ratio.mean
        );
    }
}
