use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentSpec;
use super::report::{convergence, Convergence};
use crate::envsim::{write_trace_csv, WorldConfig};
use crate::error::HarnessError;
use crate::hmappo::{
    evaluate, write_eval_csv, Checkpoint, Delegation, EpisodeMetrics, EvalOptions, EvalSummary, Level, Policies,
    TrainConfig, Trainer,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn create_file(path: &Path) -> Result<File, HarnessError> {
    File::create(path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Per-run metadata stored next to the config snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub version: String,
    pub command: String,
    pub profile: String,
    pub seed: u64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct UpdateRow {
    episode: usize,
    level: &'static str,
    samples: usize,
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    clip_fraction: f64,
    approx_kl: f64,
    buffer_len_after: usize,
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub seed: u64,
    pub dir: PathBuf,
    /// Every episode of the run, including those before a resume.
    pub history: Vec<EpisodeMetrics>,
    pub policies: Policies,
    pub convergence: Option<Convergence>,
}

impl TrainRun {
    pub fn checkpoint_path(&self) -> PathBuf {
        self.dir.join(CHECKPOINT_FILE)
    }
}

pub fn experiment_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.out_dir.join(&spec.name)
}

pub fn seed_dir(parent: &Path, seed: u64) -> PathBuf {
    parent.join(format!("seed-{seed}"))
}

/// Trains one run per seed in sibling directories under `<out>/<name>/`.
pub fn cmd_train(spec: &ExperimentSpec) -> Result<Vec<TrainRun>, HarnessError> {
    let root = experiment_dir(spec);
    spec.seeds
        .iter()
        .map(|&seed| train_into(spec, &spec.world, spec.train_for_seed(seed), &seed_dir(&root, seed), "train"))
        .collect()
}

fn train_into(
    spec: &ExperimentSpec,
    world: &WorldConfig,
    cfg: TrainConfig,
    dir: &Path,
    command: &str,
) -> Result<TrainRun, HarnessError> {
    create_dir(dir)?;
    let mut snap_spec = spec.clone();
    snap_spec.world = world.clone();
    let snapshot = snap_spec.snapshot_toml(cfg.seed)?;
    let snap_path = dir.join("config.toml");
    fs::write(&snap_path, snapshot).map_err(io_err(&snap_path))?;
    write_json(
        &dir.join("run.json"),
        &RunInfo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            profile: spec.profile.name().to_string(),
            seed: cfg.seed,
            episodes: cfg.episodes,
        },
    )?;
    let trainer = Trainer::new(world.clone(), cfg)?;
    run_trainer(trainer, dir, Vec::new(), spec.progress_every)
}

/// Continues a run from `<dir>/checkpoint.json` up to `episodes` in total
/// (the checkpoint's own target when `None`). Metrics rows written after the
/// checkpoint are dropped so numbering continues without gaps.
pub fn cmd_resume(dir: &Path, episodes: Option<usize>, progress_every: usize) -> Result<TrainRun, HarnessError> {
    let path = dir.join(CHECKPOINT_FILE);
    if !path.is_file() {
        return Err(HarnessError::MissingCheckpoint(path.display().to_string()));
    }
    let ckpt = Checkpoint::load(&path)?;
    let done = ckpt.episodes_done;
    let metrics_path = dir.join(METRICS_FILE);
    let mut history = read_metrics(&metrics_path)?;
    history.retain(|m| m.episode < done);
    if history.len() != done {
        return Err(HarnessError::Usage(format!(
            "{} holds {} rows before episode {done}; cannot resume",
            metrics_path.display(),
            history.len()
        )));
    }
    let mut trainer = Trainer::from_checkpoint(ckpt)?;
    if let Some(n) = episodes {
        trainer.set_episodes(n);
    }
    run_trainer(trainer, dir, history, progress_every)
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeMetrics>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

fn run_trainer(
    mut trainer: Trainer,
    dir: &Path,
    mut history: Vec<EpisodeMetrics>,
    progress_every: usize,
) -> Result<TrainRun, HarnessError> {
    let metrics_path = dir.join(METRICS_FILE);
    let ckpt_dir = dir.join("checkpoints");
    create_dir(&ckpt_dir)?;
    let mut metrics = csv::Writer::from_writer(create_file(&metrics_path)?);
    for m in &history {
        metrics.serialize(m).map_err(csv_err(&metrics_path))?;
    }
    let every = trainer.config().checkpoint_every;
    let target = trainer.config().episodes;
    let seed = trainer.config().seed;
    let mut failure: Option<HarnessError> = None;
    trainer.train_with(|t, m| {
        let step = (|| {
            metrics.serialize(m).map_err(csv_err(&metrics_path))?;
            metrics.flush().map_err(io_err(&metrics_path))?;
            let done = t.episodes_done();
            if every > 0 && done % every == 0 {
                let path = ckpt_dir.join(format!("episode-{done:06}.json"));
                t.checkpoint().save(&path).map_err(io_err(&path))?;
            }
            if progress_every > 0 && (done % progress_every == 0 || done == target) {
                eprintln!(
                    "[seed {seed}] episode {done}/{target}  high {:.3}  low {:.3}  eta {:.5}  covert {:.3}",
                    m.high_reward_avg, m.low_reward_avg, m.efficiency, m.covert_fraction
                );
            }
            Ok::<(), HarnessError>(())
        })();
        history.push(m.clone());
        if let Err(e) = step {
            failure = Some(e);
            // Stop the loop; the harness error is reported below.
            return Err(crate::error::TrainError::Checkpoint("aborted by the output writer".into()));
        }
        Ok(())
    })
    .or_else(|e| match failure.take() {
        Some(h) => Err(h),
        None => Err(e.into()),
    })?;
    metrics.flush().map_err(io_err(&metrics_path))?;
    let final_path = dir.join(CHECKPOINT_FILE);
    trainer.checkpoint().save(&final_path).map_err(io_err(&final_path))?;
    let updates: Vec<UpdateRow> = trainer
        .updates()
        .iter()
        .map(|u| UpdateRow {
            episode: u.episode,
            level: match u.level {
                Level::Central => "central",
                Level::Auv => "auv",
            },
            samples: u.stats.samples,
            policy_loss: u.stats.policy_loss,
            value_loss: u.stats.value_loss,
            entropy: u.stats.entropy,
            clip_fraction: u.stats.clip_fraction,
            approx_kl: u.stats.approx_kl,
            buffer_len_after: u.buffer_len_after,
        })
        .collect();
    write_rows(&dir.join("updates.csv"), &updates)?;
    Ok(TrainRun {
        seed,
        dir: dir.to_path_buf(),
        convergence: convergence(&history),
        history,
        policies: trainer.policies(),
    })
}

/// Loads a checkpoint from a file or from a run directory.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, HarnessError> {
    let file = if path.is_dir() { path.join(CHECKPOINT_FILE) } else { path.to_path_buf() };
    if !file.is_file() {
        return Err(HarnessError::MissingCheckpoint(file.display().to_string()));
    }
    Ok(Checkpoint::load(&file)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SummaryRow {
    policy: &'static str,
    episodes: usize,
    efficiency_mean: f64,
    efficiency_std: f64,
    cooperation_efficiency_mean: f64,
    cooperation_efficiency_std: f64,
    coverage_mean: f64,
    task_delay_mean: f64,
    covert_fraction_mean: f64,
    covert_fraction_std: f64,
    pooled_covert_fraction: f64,
    completion_ratio_mean: f64,
    mean_kl_mean: f64,
    mean_kl_std: f64,
}

impl From<&EvalSummary> for SummaryRow {
    fn from(s: &EvalSummary) -> Self {
        Self {
            policy: s.delegation.name(),
            episodes: s.episodes,
            efficiency_mean: s.efficiency.mean,
            efficiency_std: s.efficiency.std,
            cooperation_efficiency_mean: s.cooperation_efficiency.mean,
            cooperation_efficiency_std: s.cooperation_efficiency.std,
            coverage_mean: s.coverage.mean,
            task_delay_mean: s.task_delay.mean,
            covert_fraction_mean: s.covert_fraction.mean,
            covert_fraction_std: s.covert_fraction.std,
            pooled_covert_fraction: s.pooled_covert_fraction,
            completion_ratio_mean: s.completion_ratio.mean,
            mean_kl_mean: s.mean_kl.mean,
            mean_kl_std: s.mean_kl.std,
        }
    }
}

/// Evaluates a checkpoint under each delegation rule in its own world.
/// Writes `eval-<policy>.csv` per rule, `summary.csv`, and optionally
/// `trace-<policy>.csv` into `out`.
pub fn cmd_eval(
    spec: &ExperimentSpec,
    checkpoint: &Path,
    delegations: &[Delegation],
    trace: bool,
    out: &Path,
) -> Result<Vec<EvalSummary>, HarnessError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let policies = ckpt.policies();
    create_dir(out)?;
    let mut summaries = Vec::with_capacity(delegations.len());
    for &d in delegations {
        let opts = EvalOptions {
            episodes: spec.eval_episodes,
            seed: spec.eval_seed,
            delegation: d,
            record_trace: trace,
        };
        let (summary, records) = evaluate(&policies, &ckpt.world, &opts)?;
        let path = out.join(format!("eval-{}.csv", d.name()));
        write_eval_csv(create_file(&path)?, &summary.records).map_err(csv_err(&path))?;
        if trace {
            let path = out.join(format!("trace-{}.csv", d.name()));
            write_trace_csv(create_file(&path)?, &records).map_err(csv_err(&path))?;
        }
        summaries.push(summary);
    }
    let rows: Vec<SummaryRow> = summaries.iter().map(SummaryRow::from).collect();
    write_rows(&out.join("summary.csv"), &rows)?;
    Ok(summaries)
}

/// One line of the covertness-budget sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub kl_budget: f64,
    pub episodes: usize,
    pub efficiency_mean: f64,
    pub efficiency_std: f64,
    pub kl_mean: f64,
    pub kl_std: f64,
    /// Covert share of all communicating slices.
    pub covert_fraction: f64,
    pub team_size_mean: f64,
}

/// Trains (or, with `eval_only`, loads) one model per ε and seed, evaluates
/// each with the learned delegation and writes `sweep.csv`.
pub fn cmd_sweep_epsilon(spec: &ExperimentSpec, eval_only: bool) -> Result<Vec<SweepRow>, HarnessError> {
    if spec.epsilons.len() < 2 {
        return Err(HarnessError::Usage("sweep-epsilon needs at least two epsilon values".into()));
    }
    let root = experiment_dir(spec).join("sweep");
    create_dir(&root)?;
    let mut rows = Vec::with_capacity(spec.epsilons.len());
    for &eps in &spec.epsilons {
        let mut world = spec.world.clone();
        world.covertness.epsilon_c = eps;
        world.validate()?;
        let mut records = Vec::new();
        let (mut comm, mut covert) = (0usize, 0usize);
        for &seed in &spec.seeds {
            let dir = seed_dir(&root.join(format!("eps-{eps}")), seed);
            let policies = if eval_only {
                load_checkpoint(&dir)?.policies()
            } else {
                train_into(spec, &world, spec.train_for_seed(seed), &dir, "sweep-epsilon")?.policies
            };
            let opts = EvalOptions {
                episodes: spec.eval_episodes,
                seed: spec.eval_seed,
                delegation: Delegation::Learned,
                record_trace: false,
            };
            let (summary, _) = evaluate(&policies, &world, &opts)?;
            let path = dir.join("eval-h-mappo.csv");
            create_dir(&dir)?;
            write_eval_csv(create_file(&path)?, &summary.records).map_err(csv_err(&path))?;
            comm += summary.records.iter().map(|r| r.communicating_slices).sum::<usize>();
            covert += summary.records.iter().map(|r| r.covert_slices).sum::<usize>();
            records.extend(summary.records);
        }
        let stat = |f: fn(&crate::hmappo::EvalEpisode) -> f64| {
            crate::hmappo::Stat::of(&records.iter().map(f).collect::<Vec<_>>())
        };
        let eff = stat(|r| r.efficiency);
        let kl = stat(|r| r.mean_kl);
        rows.push(SweepRow {
            epsilon: eps,
            kl_budget: world.covertness.kl_budget(),
            episodes: records.len(),
            efficiency_mean: eff.mean,
            efficiency_std: eff.std,
            kl_mean: kl.mean,
            kl_std: kl.std,
            covert_fraction: if comm == 0 { 1.0 } else { covert as f64 / comm as f64 },
            team_size_mean: stat(|r| r.team_size).mean,
        });
        if spec.progress_every > 0 {
            let r = rows.last().expect("just pushed");
            eprintln!(
                "[sweep] eps {eps}: eta {:.5} kl {:.5} covert {:.3}",
                r.efficiency_mean, r.kl_mean, r.covert_fraction
            );
        }
    }
    write_rows(&root.join("sweep.csv"), &rows)?;
    Ok(rows)
}

pub const COMPARE_AXES: [&str; 4] = [
    "cooperation_efficiency",
    "task_completion_ratio",
    "covertness",
    "task_efficiency",
];

/// One cell of the policy-by-axis comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub policy: String,
    pub axis: String,
    pub value: f64,
    /// Min-max normalized across the compared policies (1 = best).
    pub normalized: f64,
}

pub fn axis_values(s: &EvalSummary) -> [f64; 4] {
    [
        s.cooperation_efficiency.mean,
        s.completion_ratio.mean,
        s.pooled_covert_fraction,
        s.efficiency.mean,
    ]
}

/// Min-max normalization of one axis; a constant axis maps to 1.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 1.0 })
        .collect()
}

pub fn compare_rows(summaries: &[EvalSummary]) -> Vec<CompareRow> {
    let values: Vec<[f64; 4]> = summaries.iter().map(axis_values).collect();
    let mut rows = Vec::with_capacity(summaries.len() * 4);
    let normalized: Vec<Vec<f64>> = (0..4)
        .map(|a| min_max(&values.iter().map(|v| v[a]).collect::<Vec<_>>()))
        .collect();
    for (p, s) in summaries.iter().enumerate() {
        for (a, axis) in COMPARE_AXES.iter().enumerate() {
            rows.push(CompareRow {
                policy: s.delegation.name().to_string(),
                axis: axis.to_string(),
                value: values[p][a],
                normalized: normalized[a][p],
            });
        }
    }
    rows
}

/// H-MAPPO against flat MAPPO and random delegation on paired seeds.
/// Writes `compare.csv` (3 policies x 4 axes) and `summary.csv`.
pub fn cmd_compare(
    spec: &ExperimentSpec,
    checkpoint: &Path,
) -> Result<(Vec<CompareRow>, Vec<EvalSummary>), HarnessError> {
    let out = experiment_dir(spec).join("compare");
    let summaries = cmd_eval(
        spec,
        checkpoint,
        &[Delegation::Learned, Delegation::All, Delegation::Random],
        false,
        &out,
    )?;
    let rows = compare_rows(&summaries);
    write_rows(&out.join("compare.csv"), &rows)?;
    Ok((rows, summaries))
}

#[derive(Debug, Clone)]
pub struct SmokeReport {
    pub dir: PathBuf,
    pub episodes: usize,
    pub compare: Vec<CompareRow>,
}

/// End-to-end pass over a shrunken world: train, resume-free checkpoint,
/// evaluation with traces and the comparison table.
pub fn cmd_smoke(spec: &ExperimentSpec) -> Result<SmokeReport, HarnessError> {
    let mut spec = spec.clone();
    spec.name = format!("{}-smoke", spec.name);
    spec.world.high_horizon = spec.world.high_horizon.min(2);
    spec.world.low_horizon = spec.world.low_horizon.min(20);
    spec.train.batch_auv = spec.train.batch_auv.min(64);
    spec.train.batch_central = spec.train.batch_central.min(2);
    spec.seeds.truncate(1);
    let run = cmd_train(&spec)?.remove(0);
    let ckpt = run.checkpoint_path();
    cmd_eval(&spec, &ckpt, &[Delegation::Learned], true, &run.dir.join("eval"))?;
    let (compare, _) = cmd_compare(&spec, &ckpt)?;
    Ok(SmokeReport {
        dir: run.dir,
        episodes: run.history.len(),
        compare,
    })
}
