use ecfm::pipeline::{self, Mode, Pipeline, PipelineConfig};
use ecfm::synthgen::{self, SynthConfig};

fn separable() -> ecfm::Dataset {
    // one signal token per class, pure events
    let config = SynthConfig {
        events: 40,
        news_per_event: 10,
        labeled_frac: 0.2,
        purity: 1.0,
        signal_vocab: 1,
        shared_vocab: 30,
        seed: 11,
        ..Default::default()
    };
    synthgen::generate(&config).unwrap()
}

#[test]
fn separable_corpus_is_solved() {
    let dataset = separable();
    let report = pipeline::run(&PipelineConfig { seed: 1, ..Default::default() }, &dataset).unwrap();
    assert_eq!(report.epoch_logs.len(), 50);
    assert_eq!(report.accuracy, 1.0, "{:?}", report.metrics());
}

#[test]
fn minus_and_full_fusion_pseudo_label_alike() {
    let dataset = separable();
    let minus = PipelineConfig { mode: Mode::EcfmMinus, updates: 10, seed: 4, ..Default::default() };
    let alpha_one = PipelineConfig { alpha: 1.0, use_kalman: false, updates: 10, seed: 4, ..Default::default() };
    let a = pipeline::run(&minus, &dataset).unwrap();
    let b = pipeline::run(&alpha_one, &dataset).unwrap();
    assert_eq!(a.epoch_logs, b.epoch_logs);
}

#[test]
fn selection_follows_schedule() {
    let dataset = separable();
    let pool = dataset.unlabeled().len();
    let mut run = Pipeline::new(PipelineConfig { updates: 60, seed: 2, ..Default::default() }, &dataset).unwrap();
    for t in 1..=60 {
        let log = run.step().unwrap();
        let expected = (pool * (2 * t).min(100)).div_ceil(100);
        assert_eq!(log.t, t);
        assert_eq!(log.selected_count, expected);
        assert!((0.0..=1.0).contains(&log.positive_fraction));
    }
}
