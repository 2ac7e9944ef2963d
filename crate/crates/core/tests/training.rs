use lgmml::data::{synth_gaussian, synth_gaussian_split, SynthConfig};
use lgmml::experiment::evaluate;
use lgmml::metrics::Gain;
use lgmml::warp::{fit_basis_metrics, train_with_report, TrainConfig};
use lgmml::Dataset;

/// Class of the query whose relevant documents contain `point`.
fn owning_class(ds: &Dataset, point: &[f64]) -> Option<u64> {
    ds.queries.iter().find_map(|q| {
        q.positives
            .iter()
            .any(|&i| q.documents[i].features == point)
            .then_some(q.qid)
    })
}

#[test]
fn two_basis_metrics_anchor_in_distinct_classes() {
    let mut distinct = 0;
    let seeds = 50;
    for seed in 0..seeds {
        let ds = synth_gaussian(&SynthConfig {
            num_classes: 2,
            points_per_class: 40,
            dim: 5,
            center_spread: 20.0,
            seed,
            mixed_query: false,
            normalize: false,
        })
        .unwrap();
        let cfg = TrainConfig {
            m: 2,
            seed,
            ..TrainConfig::default()
        };
        let locals = fit_basis_metrics(&ds.queries, &cfg).unwrap();
        let a = owning_class(&ds, &locals[0].anchor).expect("anchor is a relevant document");
        let b = owning_class(&ds, &locals[1].anchor).expect("anchor is a relevant document");
        if a != b {
            distinct += 1;
        }
    }
    let rate = distinct as f64 / seeds as f64;
    assert!(rate >= 0.9, "distinct-class rate {rate}");
}

#[test]
fn sampled_loss_decreases_on_synthetic_classes() {
    let ds = synth_gaussian(&SynthConfig {
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        iters: 10_000,
        seed: 4,
        ..TrainConfig::default()
    };
    let (model, report) = train_with_report(&ds.queries, &cfg).unwrap();
    let head = report.head_loss(0.1);
    let tail = report.tail_loss(0.1);
    assert!(tail <= head, "tail {tail} > head {head}");
    assert!(model.phi.values().flatten().all(|&v| v >= 0.0));
}

#[test]
fn trained_model_beats_a_single_metric_on_held_out_points() {
    let (train, test) = synth_gaussian_split(
        &SynthConfig {
            seed: 2,
            ..SynthConfig::default()
        },
        0.3,
    )
    .unwrap();
    let map = |m: usize| {
        let cfg = TrainConfig {
            m,
            seed: 3,
            ..TrainConfig::default()
        };
        let (model, _) = train_with_report(&train.queries, &cfg).unwrap();
        evaluate(&model, &test, &[10], Gain::Exponential)
            .unwrap()
            .map
    };
    let one = map(1);
    let ten = map(10);
    assert!(ten > one, "MAP m=10 {ten} <= m=1 {one}");
}
