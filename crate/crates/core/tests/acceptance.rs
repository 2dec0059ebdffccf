//! Exit-gate checks. Each test prints one `PASS`/`FAIL` line (straight to
//! stderr, so it shows up even when output is captured) and then asserts.
//!
//! The training-based checks share four desk-profile runs at seed 7, one per
//! covertness budget; the ε = 0.05 run doubles as the default desk run.
//! Checks run one at a time so the runtime limits are measured unloaded.

mod common;

use std::io::Write;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use auv_hmappo::acoustics::{eavesdropper_snr, kl_divergence, noise_power, path_loss, AcousticParams};
use auv_hmappo::envsim::{Env, TraceRecord, WorldConfig};
use auv_hmappo::harness::{axis_values, curve_trend, COMPARE_AXES};
use auv_hmappo::hmappo::{
    compute_gae, evaluate, train, Delegation, EvalOptions, EvalSummary, TrainConfig, TrainOutput,
};
use auv_hmappo::mission::{mobility_energy, EnergyParams};
use auv_hmappo::ocean::Vec3;

use common::*;

const SEED: u64 = 7;
const EPSILONS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];
const EVAL_EPISODES: usize = 200;
const EVAL_SEED: u64 = 1;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: usize, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2} {verdict}  {title}: {detail}");
}

struct BudgetRun {
    epsilon: f64,
    world: WorldConfig,
    trained: TrainOutput,
    learned: EvalSummary,
    trace: Vec<TraceRecord>,
    seconds: f64,
}

fn budget_runs() -> &'static [BudgetRun] {
    static RUNS: OnceLock<Vec<BudgetRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        EPSILONS
            .iter()
            .map(|&epsilon| {
                let t = Instant::now();
                let mut world = WorldConfig::default();
                world.covertness.epsilon_c = epsilon;
                let cfg = TrainConfig {
                    seed: SEED,
                    ..TrainConfig::desk()
                };
                let trained = train(world.clone(), cfg).unwrap();
                let opts = EvalOptions {
                    episodes: EVAL_EPISODES,
                    seed: EVAL_SEED,
                    delegation: Delegation::Learned,
                    record_trace: true,
                };
                let (learned, trace) = evaluate(&trained.policies, &world, &opts).unwrap();
                BudgetRun {
                    epsilon,
                    world,
                    trained,
                    learned,
                    trace,
                    seconds: t.elapsed().as_secs_f64(),
                }
            })
            .collect()
    })
}

fn default_run() -> &'static BudgetRun {
    budget_runs().iter().find(|r| r.epsilon == 0.05).unwrap()
}

#[test]
fn criterion_01_physics_oracles() {
    let _serial = serial();
    let t = Instant::now();
    let p = AcousticParams::default();
    let mut worst: f64 = 0.0;
    let mut rel = |a: f64, b: f64| worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));

    rel(path_loss(100.0, &p).unwrap(), 1210.0512904091932574);
    rel(path_loss(37.5, &p).unwrap(), 246.65976804869904348);
    for (f, total) in [
        (1.0, 1245906.8500518703798),
        (10.0, 40643.747057820914919),
        (30.0, 5038.1119053311164606),
        (100.0, 784.08963023032602878),
    ] {
        let q = AcousticParams {
            frequency_khz: f,
            ..AcousticParams::default()
        };
        rel(noise_power(&q), total * q.bandwidth_hz * 10f64.powf(q.noise_offset_db / 10.0));
    }
    let (powers, dists) = ([0.5, 2.0, 0.1], [40.0, 10.0, 90.0]);
    let n = noise_power(&p);
    let oracle: f64 = (0..3).map(|i| powers[i] / path_loss(dists[i], &p).unwrap() / n).sum();
    rel(eavesdropper_snr(&[true; 3], &powers, &dists, &p).unwrap(), oracle);
    let kl0 = kl_divergence(0.0).unwrap();
    rel(kl_divergence(0.1).unwrap(), 0.0022005444476169754765);
    rel(kl_divergence(1.0).unwrap(), 0.096573590279972654709);
    let e = mobility_energy(&Vec3::new(1.0, 2.0, 0.5), &Vec3::new(0.5, 1.5, 0.5), 2.0, &EnergyParams::default());
    rel(e.horizontal, 1204.1048741529305076);
    rel(e.vertical, 981.0);
    rel(e.drag, 373.94944511257133299);

    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && kl0 == 0.0 && secs < 1.0;
    report(1, "physics oracles", pass, &format!("worst rel err {worst:.2e}, KL(0) = {kl0}, {secs:.3} s"));
    assert!(pass);
}

#[test]
fn criterion_02_gradients() {
    let _serial = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let worst = gradient_sweep(&mut rng, 20);
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-4 && secs < 30.0;
    report(2, "gradient correctness", pass, &format!("worst rel err {worst:.2e} over 20 instances per shape, {secs:.1} s"));
    assert!(pass);
}

#[test]
fn criterion_03_gae_closed_forms() {
    let _serial = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let len = 1 + (normal_vec(&mut rng, 1, 1.0)[0].abs() * 10.0) as usize;
        let rewards = normal_vec(&mut rng, len, 1.0);
        let values = normal_vec(&mut rng, len, 1.0);
        let dones: Vec<bool> = normal_vec(&mut rng, len, 1.0).iter().map(|x| *x > 1.0).collect();
        let boot = normal_vec(&mut rng, 1, 1.0)[0];
        let (a0, _) = compute_gae(&rewards, &values, &dones, boot, 0.97, 0.0).unwrap();
        let (a1, _) = compute_gae(&rewards, &values, &dones, boot, 0.97, 1.0).unwrap();
        for (got, want) in a0
            .iter()
            .zip(td_errors(&rewards, &values, &dones, boot, 0.97))
            .chain(a1.iter().zip(mc_advantages(&rewards, &values, &dones, boot, 0.97)))
        {
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    let (a, _) = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[false, false], 0.0, 0.99, 0.95).unwrap();
    worst = worst.max((a[0] - 1.9405).abs()).max((a[1] - 1.0).abs());
    let pass = worst <= 1e-12;
    report(3, "GAE closed forms", pass, &format!("worst deviation {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_04_bandit() {
    let _serial = serial();
    let results: Vec<_> = [1, 2, 3].iter().map(|&s| bandit_updates_to_threshold(s, 500)).collect();
    let pass = results.iter().all(|(u, _)| u.is_some());
    let detail: Vec<String> = results
        .iter()
        .zip(1..)
        .map(|((u, p), s)| match u {
            Some(u) => format!("seed {s}: {u} updates"),
            None => format!("seed {s}: p = {p:.3} after 500"),
        })
        .collect();
    report(4, "bandit sanity", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_05_cli_determinism() {
    let _serial = serial();
    let tmp = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = tmp.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_auv-hmappo"))
            .args(["train", "--seed", "7", "--episodes", "20", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("hmappo").join("seed-7").join("metrics.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
    let pass = a == b && rows == 20;
    report(5, "determinism", pass, &format!("{rows} metric rows, identical bytes: {}", a == b));
    assert!(pass);
}

#[test]
fn criterion_06_convergence_trend() {
    let _serial = serial();
    let run = default_run();
    let h = &run.trained.history;
    let high = curve_trend(&h.iter().map(|m| m.high_reward_avg).collect::<Vec<_>>()).unwrap();
    let low = curve_trend(&h.iter().map(|m| m.low_reward_avg).collect::<Vec<_>>()).unwrap();
    let pass = high.improved() && low.improved() && high.final_band < 0.15 && low.final_band < 0.15;
    report(
        6,
        "convergence trend",
        pass,
        &format!(
            "{} episodes; high {:.3} -> {:.3} (band {:.1}%), low {:.4} -> {:.4} (band {:.1}%); {:.0} s",
            h.len(),
            high.first_decile,
            high.final_decile,
            100.0 * high.final_band,
            low.first_decile,
            low.final_decile,
            100.0 * low.final_band,
            run.seconds
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_covertness_sweep() {
    let _serial = serial();
    let runs = budget_runs();
    // adjacent pairs may dip by at most one pooled evaluation std
    let tolerance = |a: f64, b: f64| ((a * a + b * b) / 2.0).sqrt();
    let mut pass = true;
    let mut cells = Vec::new();
    for w in runs.windows(2) {
        let (a, b) = (&w[0].learned, &w[1].learned);
        let kl_ok = b.mean_kl.mean >= a.mean_kl.mean - tolerance(a.mean_kl.std, b.mean_kl.std);
        let eta_ok = b.efficiency.mean >= a.efficiency.mean - tolerance(a.efficiency.std, b.efficiency.std);
        pass &= kl_ok && eta_ok;
        cells.push(format!("{}->{}: kl {kl_ok} eta {eta_ok}", w[0].epsilon, w[1].epsilon));
    }
    let points: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "eps {} kl {:.2e}±{:.1e} eta {:.2e}±{:.1e}",
                r.epsilon, r.learned.mean_kl.mean, r.learned.mean_kl.std, r.learned.efficiency.mean, r.learned.efficiency.std
            )
        })
        .collect();
    report(7, "covertness sweep trend", pass, &format!("{}; {}", points.join(" | "), cells.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_08_constraint_satisfaction() {
    let _serial = serial();
    let run = default_run();
    let frac = run.learned.pooled_covert_fraction;
    let pass = frac >= 0.9;
    report(
        8,
        "constraint satisfaction",
        pass,
        &format!(
            "{:.1}% of communicating slices within KL <= 0.005 over {} episodes",
            100.0 * frac,
            run.learned.episodes
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_baseline_dominance() {
    let _serial = serial();
    let run = default_run();
    let opts = EvalOptions {
        episodes: EVAL_EPISODES,
        seed: EVAL_SEED,
        delegation: Delegation::Random,
        record_trace: false,
    };
    let (random, _) = evaluate(&run.trained.policies, &run.world, &opts).unwrap();
    let (l, r) = (axis_values(&run.learned), axis_values(&random));
    let mut pass = true;
    let mut cells = Vec::new();
    for (i, axis) in COMPARE_AXES.iter().enumerate() {
        // cooperation efficiency and covertness need a 10% margin
        let need = if i == 0 || i == 2 { 1.1 } else { 1.0 };
        let ok = l[i] >= need * r[i];
        pass &= ok;
        cells.push(format!("{axis} {:.4e} vs {:.4e} ({})", l[i], r[i], if ok { "ok" } else { "short" }));
    }
    report(9, "baseline dominance", pass, &cells.join(", "));
    assert!(pass);
}

#[test]
fn criterion_10_bookkeeping() {
    let _serial = serial();
    // energy ledger over random play
    let mut env = Env::new(WorldConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut ledger_err: f64 = 0.0;
    for seed in 0..3 {
        random_episode(&mut env, seed, &mut rng);
        for l in env.energy_ledger() {
            ledger_err = ledger_err.max(((l.initial - l.consumed) - l.current).abs() / l.initial);
        }
    }

    // covert flags of the trained evaluation traces
    let mut mismatches = 0usize;
    let mut records = 0usize;
    let mut pooled_ok = true;
    for run in budget_runs() {
        mismatches += run.trace.iter().filter(|r| r.covert != recompute_covert(r, &run.world)).count();
        records += run.trace.len();
        let comm: Vec<&TraceRecord> = run.trace.iter().filter(|r| r.auvs.iter().any(|a| a.power > 0.0)).collect();
        let covert = comm.iter().filter(|r| r.covert).count();
        let from_trace = if comm.is_empty() { 1.0 } else { covert as f64 / comm.len() as f64 };
        pooled_ok &= from_trace == run.learned.pooled_covert_fraction;
    }

    let updates: Vec<_> = budget_runs().iter().flat_map(|r| r.trained.checkpoint.updates.iter()).collect();
    let dirty = updates.iter().filter(|u| u.buffer_len_after != 0).count();

    let pass = ledger_err <= 1e-9 && mismatches == 0 && records > 0 && pooled_ok && dirty == 0 && !updates.is_empty();
    report(
        10,
        "bookkeeping invariants",
        pass,
        &format!(
            "ledger err {ledger_err:.1e}; {mismatches}/{records} covert-flag mismatches; pooled fraction from traces matches: {pooled_ok}; {dirty}/{} updates left data buffered",
            updates.len()
        ),
    );
    assert!(pass);
}
