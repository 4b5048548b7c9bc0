//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Criteria 5 to 8 share a desk-scale training run (2e4 records, m = 32,
//! M = 64, 20 epochs), trained twice under different thread counts. Expect
//! roughly half an hour on a single core.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use magseq::compare::{compare, ComparisonSummary};
use magseq::filter::{baseline_error_curve, build_model, joint_gaussian_oracle, smooth_signal};
use magseq::nn::{backward, checkpoint_bytes, forward_loss, Sample};
use magseq::rng::{stream, Domain};
use magseq::sim::{generate_dataset, sample_ou_path, simulate_record};
use magseq::train::{train_with_progress, TrainConfig, TrainReport};
use magseq::{PhysicsParams, Seq2SeqModel};
use rand::Rng;

const FILTER_TOL: f64 = 1e-8;
const GRAD_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const OU_PATHS: usize = 100_000;
const OU_LAG: usize = 50;
const BASELINE_RECORDS: usize = 10_000;
const EDGE_BAND: (f64, f64) = (2.0, 6.0);
const FLATNESS_MAX: f64 = 1.3;
const TRAIN_RECORDS: usize = 20_000;
const TEST_RECORDS: usize = 2_000;
const RATIO_MAX: f64 = 2.0;
const LOSS_DROP_MIN: f64 = 5.0;
const FINAL_CHANGE_MAX: f64 = 0.01;
const MONOTONE_SHARE: f64 = 0.8;

const TRAIN_SEED: u64 = 1;
const TEST_SEED: u64 = 2;

type Pairs = Vec<(Vec<f64>, Vec<f64>)>;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed<F: FnOnce() -> (bool, String)>(
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    f: F,
) -> Outcome {
    let start = Instant::now();
    let (mut pass, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            pass = false;
            detail.push_str(&format!("; over budget {:.0?}", b));
        }
    }
    let o = Outcome {
        id,
        name,
        pass,
        detail,
        elapsed,
    };
    report(&o);
    o
}

fn report(o: &Outcome) {
    println!(
        "[{}] {}. {} ({:.1?}): {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.elapsed,
        o.detail
    );
}

fn filter_exactness() -> (bool, String) {
    let params = PhysicsParams {
        n_steps: 8,
        ..PhysicsParams::reference()
    };
    let model = build_model(&params).unwrap();
    let mut worst = 0.0f64;
    let records = 20;
    for i in 0..records {
        let rec = simulate_record(&params, &mut stream(101, Domain::Record, i)).unwrap();
        let (_, s) = smooth_signal(&model, &rec.signal).unwrap();
        let oracle = joint_gaussian_oracle(&model, &rec.signal).unwrap();
        for k in 0..params.n_steps {
            worst = worst
                .max((s.b_means()[k] - oracle.b_mean[k]).abs())
                .max((s.b_vars()[k] - oracle.b_var[k]).abs());
        }
    }
    (
        worst < FILTER_TOL,
        format!("{records} records, max |smoother - oracle| = {worst:.2e} (< {FILTER_TOL:e})"),
    )
}

fn gradient_problem(seed: u64) -> (Seq2SeqModel, Pairs) {
    let mut rng = stream(seed, Domain::Init, 7);
    let mut model = Seq2SeqModel::init(3, &mut rng);
    for block in model.blocks_mut() {
        for v in block.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let data = (0..2)
        .map(|_| {
            let s = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
            (s, t)
        })
        .collect();
    (model, data)
}

fn batch_loss(model: &Seq2SeqModel, data: &Pairs) -> f64 {
    let batch: Vec<Sample> = data.iter().map(|(s, t)| (s.as_slice(), t.as_slice())).collect();
    forward_loss(model, &batch).unwrap().0
}

fn perturbed(model: &Seq2SeqModel, index: usize, delta: f64) -> Seq2SeqModel {
    let mut m = model.clone();
    *m.blocks_mut()
        .into_iter()
        .flat_map(|b| b.iter_mut())
        .nth(index)
        .unwrap() += delta;
    m
}

fn gradient_exactness() -> (bool, String) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in [1, 2, 3] {
        let (model, data) = gradient_problem(seed);
        let batch: Vec<Sample> = data.iter().map(|(s, t)| (s.as_slice(), t.as_slice())).collect();
        let (_, cache) = forward_loss(&model, &batch).unwrap();
        let grads = backward(&model, &cache);
        let analytic: Vec<f64> = grads.blocks().iter().flat_map(|b| b.to_vec()).collect();
        for (i, g) in analytic.iter().enumerate() {
            let numeric = (batch_loss(&perturbed(&model, i, FD_STEP), &data)
                - batch_loss(&perturbed(&model, i, -FD_STEP), &data))
                / (2.0 * FD_STEP);
            let rel = (g - numeric).abs() / (g.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (
        worst < GRAD_TOL,
        format!("{checked} parameters over 3 seeds, max relative error {worst:.2e} (< {GRAD_TOL:e})"),
    )
}

/// Pools every time step (variance) and every lag pair (autocorrelation)
/// within a path; standard errors come from the spread across independent paths.
fn ou_statistics() -> (bool, String) {
    let params = PhysicsParams::reference();
    let target_var = params.stationary_variance();
    let n_steps = params.n_steps;
    let per_path: Vec<(f64, f64, f64)> = (0..OU_PATHS as u64)
        .map(|i| {
            let b = sample_ou_path(&params, &mut stream(202, Domain::Record, i)).unwrap();
            let var = b.iter().map(|x| x * x).sum::<f64>() / n_steps as f64;
            let pairs = n_steps - OU_LAG;
            let cross = (0..pairs).map(|k| b[k] * b[k + OU_LAG]).sum::<f64>() / pairs as f64;
            let head = b[..pairs].iter().map(|x| x * x).sum::<f64>() / pairs as f64;
            (var, cross, head)
        })
        .collect();
    let n = OU_PATHS as f64;
    let mean = |f: &dyn Fn(&(f64, f64, f64)) -> f64| per_path.iter().map(f).sum::<f64>() / n;
    let sd = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / n;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };

    let var = mean(&|p| p.0);
    let se_var = sd(&per_path.iter().map(|p| p.0).collect::<Vec<_>>()) / n.sqrt();
    let (cross, head) = (mean(&|p| p.1), mean(&|p| p.2));
    let rho = cross / head;
    let lin: Vec<f64> = per_path.iter().map(|p| (p.1 - rho * p.2) / head).collect();
    let se_rho = sd(&lin) / n.sqrt();
    let target_rho = (-params.gamma_b * OU_LAG as f64 * params.tau).exp();

    let z_var = (var - target_var) / se_var;
    let z_rho = (rho - target_rho) / se_rho;
    (
        z_var.abs() < 3.0 && z_rho.abs() < 3.0,
        format!(
            "variance {var:.5} vs {target_var} ({z_var:+.2} se), \
             lag-0.5 ms autocorrelation {rho:.5} vs {target_rho:.5} ({z_rho:+.2} se)"
        ),
    )
}

fn edge_effect() -> (bool, String) {
    let params = PhysicsParams::reference();
    let test = generate_dataset(&params, BASELINE_RECORDS, 303).unwrap();
    let curves = baseline_error_curve(&params, &test).unwrap();
    let (start, end) = curves.smoothed.edge_ratios();
    let flat = curves.smoothed.mid_flatness();
    let in_band = |r: f64| (EDGE_BAND.0..=EDGE_BAND.1).contains(&r);
    (
        in_band(start) && in_band(end) && flat < FLATNESS_MAX,
        format!(
            "edge/mid {start:.3} at t=0, {end:.3} at t=T (band [{}, {}]), mid max/min {flat:.3} (< {FLATNESS_MAX})",
            EDGE_BAND.0, EDGE_BAND.1
        ),
    )
}

struct DeskRun {
    report: TrainReport,
    checkpoint: Vec<u8>,
    summary: ComparisonSummary,
    summary_csv: Vec<u8>,
    compare_csv: Vec<u8>,
}

fn desk_run(threads: usize, train: &magseq::Dataset, test: &magseq::Dataset) -> DeskRun {
    let cfg = TrainConfig::desk_scale();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        let start = Instant::now();
        let (model, report) = train_with_progress(train, &cfg, |epoch, loss| {
            eprintln!(
                "  [{threads} thread(s)] epoch {:>2}/{} loss {loss:.6e} ({:.0?})",
                epoch + 1,
                cfg.epochs,
                start.elapsed()
            );
        })
        .expect("desk training failed");
        let cmp = compare(&model, test).expect("comparison failed");
        let summary = cmp.summary();
        let mut summary_csv = Vec::new();
        summary.write_csv(&mut summary_csv).unwrap();
        let mut compare_csv = Vec::new();
        cmp.write_csv(&mut compare_csv).unwrap();
        DeskRun {
            report,
            checkpoint: checkpoint_bytes(&model),
            summary,
            summary_csv,
            compare_csv,
        }
    })
}

fn main() -> ExitCode {
    let mut outcomes = vec![
        timed(
            1,
            "filter exactness",
            Some(Duration::from_secs(5)),
            filter_exactness,
        ),
        timed(
            2,
            "gradient exactness",
            Some(Duration::from_secs(30)),
            gradient_exactness,
        ),
        timed(3, "OU statistics", Some(Duration::from_secs(30)), ou_statistics),
        timed(4, "edge effect", Some(Duration::from_secs(120)), edge_effect),
    ];

    let params = PhysicsParams::reference();
    let train = generate_dataset(&params, TRAIN_RECORDS, TRAIN_SEED).unwrap();
    let test = generate_dataset(&params, TEST_RECORDS, TEST_SEED).unwrap();
    let start = Instant::now();
    let first = desk_run(1, &train, &test);
    let first_time = start.elapsed();
    let s = &first.summary;

    let mut push = |o: Outcome| {
        report(&o);
        outcomes.push(o);
    };

    let lower = 1.0 - 3.0 * s.ratio_standard_error;
    push(Outcome {
        id: 5,
        name: "RNN competitiveness",
        pass: s.ratio_rnn_to_smoother <= RATIO_MAX && s.ratio_rnn_to_smoother >= lower,
        detail: format!(
            "mid error RNN {:.5}, smoother {:.5}, ratio {:.3} +- {:.3} (need [{lower:.3}, {RATIO_MAX}])",
            s.mid_rnn, s.mid_smoothed, s.ratio_rnn_to_smoother, s.ratio_standard_error
        ),
        elapsed: first_time,
    });
    push(Outcome {
        id: 6,
        name: "loss vs error ordering",
        pass: s.teacher_mse <= s.autoregressive_mse,
        detail: format!(
            "teacher-forced MSE {:.5} <= autoregressive error {:.5}",
            s.teacher_mse, s.autoregressive_mse
        ),
        elapsed: Duration::ZERO,
    });
    let losses = &first.report.epoch_losses;
    let drop = losses[0] / losses[losses.len() - 1];
    let change = first.report.final_relative_change().unwrap_or(f64::INFINITY);
    push(Outcome {
        id: 7,
        name: "training progress",
        pass: drop >= LOSS_DROP_MIN && change < FINAL_CHANGE_MAX,
        detail: format!(
            "epoch loss {:.5} -> {:.5}, drop {drop:.2}x (need >= {LOSS_DROP_MIN}x), \
             last change {:.2}% (need < {}%)",
            losses[0],
            losses[losses.len() - 1],
            100.0 * change,
            100.0 * FINAL_CHANGE_MAX
        ),
        elapsed: Duration::ZERO,
    });

    let pairs = losses.len() - 1;
    let non_increasing = losses.windows(2).filter(|w| w[1] <= w[0]).count();
    let share = non_increasing as f64 / pairs as f64;
    println!(
        "[{}] invariant: epoch loss non-increasing in {non_increasing}/{pairs} epoch pairs ({:.0}%, need >= 80%)",
        if share >= MONOTONE_SHARE { "PASS" } else { "FAIL" },
        100.0 * share
    );
    let monotone_ok = share >= MONOTONE_SHARE;

    let start = Instant::now();
    let second = desk_run(4, &train, &test);
    let same_ckpt = first.checkpoint == second.checkpoint;
    let same_summary = first.summary_csv == second.summary_csv && first.compare_csv == second.compare_csv;
    push(Outcome {
        id: 8,
        name: "determinism",
        pass: same_ckpt && same_summary,
        detail: format!(
            "1 vs 4 threads: checkpoint {}, summary CSVs {} (sha256 {})",
            if same_ckpt { "identical" } else { "DIFFERENT" },
            if same_summary { "identical" } else { "DIFFERENT" },
            second.report.checksum
        ),
        elapsed: start.elapsed(),
    });

    println!("\nsummary of the desk run:\n{}", first.summary.table());
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed {failed:?}")
        }
    );
    if failed.is_empty() && monotone_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
