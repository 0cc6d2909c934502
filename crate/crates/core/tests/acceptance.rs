//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Lines go straight to the stderr handle so they show up even when the test
//! harness captures output.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ecfm::annotator::{find_threshold, pseudo_label};
use ecfm::characterizer::{
    CredibilityModel, LinearModel, TextCnnConfig, TextCnnModel, Vocabulary,
};
use ecfm::eval::{self, auc_roc, RunReport, SweepTable};
use ecfm::kalman::{self, EventCredState, KalmanParams};
use ecfm::pipeline::{self, Mode, PipelineConfig};
use ecfm::selector::{schedule_count, select_top, EntropyScore, SelectorOrder};
use ecfm::synthgen::{self, SynthConfig};
use ecfm::{Dataset, Label};

fn verdict(n: u32, name: &str, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let ok = pass && elapsed <= limit;
    let line = format!(
        "criterion {n:>2} {:<4} {name}: {detail} [{:.1}s, limit {}s]\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
    assert!(elapsed <= limit, "criterion {n} ({name}) exceeded {}s", limit.as_secs());
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

// ---- Kalman -------------------------------------------------------------

#[test]
fn criterion_01_kalman_first_step() {
    let start = Instant::now();
    let params = KalmanParams::default();
    let state = EventCredState::initial(0, &params);
    let out = kalman::step(&state, 0.9, &params).unwrap();
    let pass = (out.gain - 0.75).abs() < 1e-12
        && (out.state.c_hat - 0.8).abs() < 1e-12
        && (out.state.p_hat - 0.0075).abs() < 1e-12;
    let detail = format!(
        "K={} C={} P={}",
        out.gain, out.state.c_hat, out.state.p_hat
    );
    verdict(1, "kalman first step", pass, start.elapsed(), secs(1), &detail);
}

#[test]
fn criterion_02_kalman_steady_state() {
    let start = Instant::now();
    let params = KalmanParams::default();
    let mut state = EventCredState::initial(0, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // independent Riccati recursion on the covariance alone
    let mut p = params.p0;
    let mut worst_oracle_gap: f64 = 0.0;
    let mut gain = 0.0;
    for _ in 0..40 {
        let z: f64 = rng.gen();
        let out = kalman::step(&state, z, &params).unwrap();
        let p_minus = p + params.q;
        let k = p_minus / (p_minus + params.r);
        p = (1.0 - k) * p_minus;
        worst_oracle_gap = worst_oracle_gap.max((out.gain - k).abs());
        gain = out.gain;
        state = out.state;
    }
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let pass = (gain - 0.6180339887).abs() < 1e-6 && (gain - golden).abs() < 1e-6 && worst_oracle_gap < 1e-12;
    let detail = format!("K_40={gain:.12}, max gap to reference recursion {worst_oracle_gap:.1e}");
    verdict(2, "kalman steady state", pass, start.elapsed(), secs(1), &detail);
}

#[test]
fn criterion_03_kalman_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let params = KalmanParams {
            q: rng.gen_range(1e-4..0.1),
            r: rng.gen_range(1e-4..0.1),
            b: 1.0,
            p0: rng.gen_range(1e-4..0.1),
            c0: rng.gen(),
        };
        let mut state = EventCredState::initial(0, &params);
        let (mut c, mut p) = (params.c0, params.p0);
        for _ in 0..rng.gen_range(1..60) {
            let z: f64 = rng.gen();
            // straight-line predict / gain / correct
            let c_minus = c;
            let p_minus = p + params.q;
            let k = p_minus * params.b / (params.b * p_minus * params.b + params.r);
            c = c_minus + k * (z - params.b * c_minus);
            p = (1.0 - k * params.b) * p_minus;

            let out = kalman::step(&state, z, &params).unwrap();
            state = out.state;
            worst = worst
                .max((state.c_hat - c).abs())
                .max((state.p_hat - p).abs())
                .max((out.gain - k).abs());
        }
    }
    let detail = format!("1000 trajectories, max deviation {worst:.1e}");
    verdict(3, "kalman oracle equivalence", worst < 1e-12, start.elapsed(), secs(10), &detail);
}

// ---- Gradient checks ------------------------------------------------------

const STEP: f64 = 1e-5;
const KINK: f64 = 1e-6;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn tiny_cnn(rng: &mut ChaCha8Rng) -> (TextCnnModel, Vec<usize>) {
    let vocab_size = rng.gen_range(2..=20);
    let words: Vec<String> = (1..vocab_size).map(|i| format!("t{i}")).collect();
    let mut windows: Vec<usize> = (2..=5).filter(|_| rng.gen_bool(0.5)).collect();
    if windows.is_empty() {
        windows.push(2);
    }
    let config = TextCnnConfig {
        embedding_dim: rng.gen_range(1..=4),
        windows,
        filters_per_window: rng.gen_range(1..=2),
        hidden: vec![rng.gen_range(2..=5)],
        embedding_init: 1.0,
    };
    let mut model = TextCnnModel::new(config, Vocabulary::build(&[words]), rng).unwrap();
    let mut params = model.parameters();
    for p in params.iter_mut() {
        *p += rng.gen_range(-0.2..0.2);
    }
    model.set_parameters(&params).unwrap();
    let len = rng.gen_range(model.config.max_window()..=9);
    let ids = (0..len).map(|_| rng.gen_range(0..vocab_size)).collect();
    (model, ids)
}

/// Checks every coordinate; returns (worst relative error, coordinates checked).
fn check_cnn(model: &TextCnnModel, ids: &Vec<usize>, y: f64) -> (f64, usize) {
    let mut grad = model.zero_gradient();
    model.accumulate_gradient(ids, y, 1.0, &mut grad);
    let analytic = model.flatten_gradient(&grad);
    let base = model.parameters();
    let pattern = model.forward(ids).activation_pattern();
    let mut probe = model.clone();
    let mut eval_at = |i: usize, delta: f64| {
        let mut p = base.clone();
        p[i] += delta;
        probe.set_parameters(&p).unwrap();
        let trace = probe.forward(ids);
        let [fake, real] = trace.logits();
        let q = 1.0 / (1.0 + (fake - real).exp());
        let loss = -(y * q.ln() + (1.0 - y) * (1.0 - q).ln());
        (loss, trace.activation_pattern() == pattern)
    };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (i, &a) in analytic.iter().enumerate() {
        let (up, same_up) = eval_at(i, STEP);
        let (down, same_down) = eval_at(i, -STEP);
        if !(same_up && same_down) {
            continue;
        }
        worst = worst.max(rel_err(a, (up - down) / (2.0 * STEP)));
        checked += 1;
    }
    (worst, checked)
}

fn check_linear(rng: &mut ChaCha8Rng) -> f64 {
    let dims = rng.gen_range(1..=12);
    let mut model = LinearModel::zeros(dims).unwrap();
    let params: Vec<f64> = (0..=dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
    model.set_parameters(&params).unwrap();
    let mut features: Vec<(usize, f64)> = Vec::new();
    for slot in 0..dims {
        if rng.gen_bool(0.6) {
            features.push((slot, rng.gen_range(1..4) as f64));
        }
    }
    if features.is_empty() {
        features.push((0, 1.0));
    }
    let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
    let mut grad = model.zero_gradient();
    model.accumulate_gradient(&features, y, 1.0, &mut grad);
    let analytic = model.flatten_gradient(&grad);
    let loss = |p: &[f64]| {
        let z = p[dims] + features.iter().map(|&(s, v)| p[s] * v).sum::<f64>();
        let q = 1.0 / (1.0 + (-z).exp());
        -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
    };
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut up = params.clone();
        up[i] += STEP;
        let mut down = params.clone();
        down[i] -= STEP;
        worst = worst.max(rel_err(a, (loss(&up) - loss(&down)) / (2.0 * STEP)));
    }
    worst
}

#[test]
fn criterion_04_gradient_checks() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cnn_worst: f64 = 0.0;
    let mut cnn_instances = 0;
    let mut skipped = 0;
    let mut coords = 0;
    while cnn_instances < 50 {
        let (model, ids) = tiny_cnn(&mut rng);
        if model.forward(&ids).kink_margin() < KINK {
            skipped += 1;
            continue;
        }
        let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let (worst, checked) = check_cnn(&model, &ids, y);
        cnn_worst = cnn_worst.max(worst);
        coords += checked;
        cnn_instances += 1;
    }
    let lin_worst = (0..50).map(|_| check_linear(&mut rng)).fold(0.0, f64::max);
    let pass = cnn_worst < 1e-4 && lin_worst < 1e-4;
    let detail = format!(
        "text-cnn 50 instances / {coords} coordinates, max rel err {cnn_worst:.1e} ({skipped} near-kink instances redrawn); linear 50 instances, max rel err {lin_worst:.1e}"
    );
    verdict(4, "gradient checks", pass, start.elapsed(), secs(60), &detail);
}

// ---- Threshold, AUC, selector --------------------------------------------

/// Every candidate scored by a full pass, smallest maximizer kept.
fn brute_threshold(data: &[(f64, Label)]) -> (f64, f64) {
    let mut values: Vec<f64> = data.iter().map(|d| d.0).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut candidates = vec![values[0] - 1.0];
    for w in values.windows(2) {
        candidates.push((w[0] + w[1]) / 2.0);
    }
    candidates.push(values[values.len() - 1] + 1.0);
    let mut best = (f64::INFINITY, -1.0);
    for &dt in &candidates {
        let correct = data
            .iter()
            .filter(|(ce, label)| (if *ce >= dt { Label::Real } else { Label::Fake }) == *label)
            .count();
        let acc = correct as f64 / data.len() as f64;
        if acc > best.1 || (acc == best.1 && dt < best.0) {
            best = (dt, acc);
        }
    }
    best
}

#[test]
fn criterion_05_threshold_search() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=50);
        let grid = rng.gen_range(2..20) as f64;
        let data: Vec<(f64, Label)> = (0..n)
            .map(|_| {
                let ce = (rng.gen_range(0.0..1.0f64) * grid).round() / grid;
                (ce, if rng.gen_bool(0.5) { Label::Real } else { Label::Fake })
            })
            .collect();
        let found = find_threshold(&data).unwrap();
        let (dt, acc) = brute_threshold(&data);
        if found.dt != dt || found.achieved_accuracy != acc {
            mismatches += 1;
        }
    }
    let boundary = pseudo_label(0.5, 0.5) == Label::Real
        && pseudo_label(0.5 - 1e-15, 0.5) == Label::Fake;
    let detail = format!("200 random sets, {mismatches} mismatches, boundary rule holds: {boundary}");
    verdict(5, "threshold search", mismatches == 0 && boundary, start.elapsed(), secs(5), &detail);
}

fn brute_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, a) in labels.iter().enumerate() {
        for (j, b) in labels.iter().enumerate() {
            if *a == Label::Fake && *b == Label::Real {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

#[test]
fn criterion_06_auc() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.gen_range(2..=200);
        let levels = rng.gen_range(2..50);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let mut labels: Vec<Label> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { Label::Fake } else { Label::Real })
            .collect();
        labels[0] = Label::Fake;
        labels[1] = Label::Real;
        if auc_roc(&scores, &labels).unwrap() != brute_auc(&scores, &labels) {
            mismatches += 1;
        }
    }
    let detail = format!("500 random instances with ties, {mismatches} mismatches");
    verdict(6, "auc-roc", mismatches == 0, start.elapsed(), secs(10), &detail);
}

#[test]
fn criterion_07_selector() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.gen_range(0..120);
        let t = rng.gen_range(1..70);
        let levels = rng.gen_range(1..10);
        let scores: Vec<EntropyScore> = (0..n)
            .map(|i| {
                let p = rng.gen_range(0..=levels) as f64 / (levels + 1) as f64;
                let label = if rng.gen_bool(0.5) { Label::Real } else { Label::Fake };
                EntropyScore::new(format!("n{:03}", rng.gen_range(0..1000) * 1000 + i), p, label)
            })
            .collect();
        // full sort, then prefix
        let k = ((n * (2 * t).min(100)) as f64 / 100.0).ceil() as usize;
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| b.h.partial_cmp(&a.h).unwrap().then(a.id.cmp(&b.id)));
        let expected: Vec<(String, Label)> = sorted
            .into_iter()
            .take(k.min(n))
            .map(|s| (s.id, s.pseudo_label))
            .collect();
        if select_top(&scores, t, SelectorOrder::Largest).unwrap() != expected {
            mismatches += 1;
        }
    }
    let schedule_ok = (1..=5000).all(|n| schedule_count(1, n).unwrap() == (0.02 * n as f64).ceil() as usize)
        && (50..200).all(|t| schedule_count(t, 777).unwrap() == 777);
    let detail = format!("500 random instances, {mismatches} mismatches, schedule rule holds: {schedule_ok}");
    verdict(7, "selector", mismatches == 0 && schedule_ok, start.elapsed(), secs(5), &detail);
}

// ---- End-to-end on the synthetic corpus -----------------------------------

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const CORPUS_SEED: u64 = 2024;

fn corpus() -> &'static Dataset {
    static CORPUS: OnceLock<Dataset> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let config = SynthConfig {
            events: 200,
            news_per_event: 20,
            purity: 1.0,
            labeled_frac: 0.1,
            balance: 0.5,
            seed: CORPUS_SEED,
            ..Default::default()
        };
        synthgen::generate(&config).unwrap()
    })
}

fn config(mode: Mode, seed: u64) -> PipelineConfig {
    PipelineConfig {
        alpha: 0.6,
        mode,
        seed,
        ..Default::default()
    }
}

struct Comparison {
    ecfm: Vec<RunReport>,
    minus: Vec<RunReport>,
    elapsed: Duration,
}

fn comparison() -> &'static Comparison {
    static RUNS: OnceLock<Comparison> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let dataset = corpus();
        let run_all = |mode| {
            SEEDS
                .iter()
                .map(|&s| pipeline::run(&config(mode, s), dataset).unwrap())
                .collect::<Vec<_>>()
        };
        let ecfm = run_all(Mode::Ecfm);
        let minus = run_all(Mode::EcfmMinus);
        Comparison { ecfm, minus, elapsed: start.elapsed() }
    })
}

fn mean_accuracy(reports: &[RunReport]) -> f64 {
    reports.iter().map(|r| r.accuracy).sum::<f64>() / reports.len() as f64
}

#[test]
fn criterion_08_ecfm_beats_ablation() {
    let runs = comparison();
    let ecfm = mean_accuracy(&runs.ecfm);
    let minus = mean_accuracy(&runs.minus);
    let pass = ecfm >= minus && ecfm >= 0.90;
    let detail = format!(
        "mean accuracy over 5 seeds: ECFM {ecfm:.4}, ECFM- {minus:.4}, delta {:+.4}",
        ecfm - minus
    );
    verdict(8, "ECFM >= ECFM- and >= 0.90", pass, runs.elapsed, secs(600), &detail);
}

#[test]
fn criterion_09_alpha_extreme() {
    let start = Instant::now();
    let grid = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let base = config(Mode::Ecfm, SEEDS[0]);
    let table: SweepTable = eval::sweep_alpha(&grid, SEEDS.len(), &base, corpus(), 0).unwrap();
    let best = table.best().unwrap();
    let low = table.row(0.1).unwrap();
    let pass = low.accuracy <= best.accuracy;
    let curve: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{:.1}:{:.4}", r.alpha, r.accuracy))
        .collect();
    let detail = format!(
        "alpha 0.1 mean {:.4} vs best alpha {:.1} mean {:.4} ({})",
        low.accuracy,
        best.alpha,
        best.accuracy,
        curve.join(" ")
    );
    verdict(9, "alpha = 0.1 not above grid best", pass, start.elapsed(), secs(45 * 60), &detail);
}

fn range(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

#[test]
fn criterion_10_pseudo_label_stabilization() {
    let runs = comparison();
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for report in &runs.ecfm {
        let pf: Vec<f64> = report.epoch_logs.iter().map(|l| l.positive_fraction).collect();
        let (first, last) = (&pf[..10], &pf[pf.len() - 10..]);
        let bounded = last.iter().all(|v| (0.25..=0.75).contains(v));
        let settled = range(last) <= range(first);
        if !(bounded && settled) {
            failures.push(report.seed);
        }
        summary.push(format!(
            "seed {}: last {:.3}..{:.3}, range first {:.3} last {:.3}",
            report.seed,
            last.iter().copied().fold(f64::INFINITY, f64::min),
            last.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            range(first),
            range(last)
        ));
    }
    let detail = format!("{}; failing seeds {:?}", summary.join("; "), failures);
    verdict(10, "pseudo-label stabilization", failures.is_empty(), runs.elapsed, secs(600), &detail);
}

#[test]
fn criterion_11_determinism() {
    let runs = comparison();
    let start = Instant::now();
    let dataset = corpus();
    let mut differing = Vec::new();
    for (mode, reports) in [(Mode::Ecfm, &runs.ecfm), (Mode::EcfmMinus, &runs.minus)] {
        for report in reports {
            let again = pipeline::run(&config(mode, report.seed), dataset).unwrap();
            let a = report.without_timing().to_json().unwrap();
            let b = again.without_timing().to_json().unwrap();
            if a.as_bytes() != b.as_bytes() {
                differing.push(format!("{mode}/{}", report.seed));
            }
        }
    }
    let detail = format!("10 reruns, {} byte-different reports {:?}", differing.len(), differing);
    verdict(11, "determinism", differing.is_empty(), start.elapsed(), secs(600), &detail);
}
