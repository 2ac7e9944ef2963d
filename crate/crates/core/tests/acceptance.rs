//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line for its
//! criterion; run with `cargo test -p lgmml --test acceptance -- --nocapture`
//! to see them.

use std::io::Cursor;
use std::time::Instant;

use lgmml::data::{
    column_norms, normalize_l2_per_dimension, parse_letor, synth_gaussian_split, write_letor,
    SynthConfig,
};
use lgmml::experiment::sweep;
use lgmml::gmml::{gmml_fit, GmmlConfig, PairSet};
use lgmml::metrics::{average_precision, dcg_at_k, ndcg_at_k, Gain};
use lgmml::model::{score, CandidateSet, Document, Hyper, LocalMetric, RankingModel};
use lgmml::persist::model_to_string;
use lgmml::spd::{geometric_mean_riccati, SpdMatrix};
use lgmml::warp::{
    rank_weight, sample_violator, sgd_step, signed_phi_gradient, train, violator_count, TrainConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name} ({detail})");
}

/// Random SPD matrix `Q diag(λ) Qᵀ` with log-spaced eigenvalues and the
/// given condition number.
fn random_spd(rng: &mut impl Rng, dim: usize, cond: f64) -> SpdMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() - 0.5);
    let q = g.qr().q();
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let eig: Vec<f64> = (0..dim)
        .map(|i| {
            let t = if dim == 1 {
                0.0
            } else {
                i as f64 / (dim - 1) as f64
            };
            scale * cond.powf(t)
        })
        .collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(eig));
    SpdMatrix::from_matrix(&q * d * q.transpose()).unwrap()
}

fn random_spd_upto(rng: &mut impl Rng, dim: usize, max_log10_cond: f64) -> SpdMatrix {
    let cond = 10f64.powf(rng.random_range(0.0..max_log10_cond));
    random_spd(rng, dim, cond)
}

fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn criterion_1_riccati_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let started = Instant::now();
    let mut worst = 0.0f64;
    let dims = [2, 5, 20];
    for case in 0..100 {
        let dim = dims[case % dims.len()];
        let cond_s = 10f64.powf(rng.random_range(0.0..6.0));
        let cond_d = 10f64.powf(rng.random_range(0.0..6.0));
        let s = random_spd(&mut rng, dim, cond_s);
        let d = random_spd(&mut rng, dim, cond_d);
        let m = geometric_mean_riccati(&s, &d).unwrap();
        let msm = m.as_matrix() * s.as_matrix() * m.as_matrix();
        worst = worst.max(rel_frob(&msm, d.as_matrix()));
    }
    let secs = started.elapsed().as_secs_f64();
    let ok = worst <= 1e-8 && secs < 10.0;
    report(
        1,
        "Riccati residual",
        ok,
        &format!("worst residual {worst:.3e}, {secs:.2}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_diagonal_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let dim = rng.random_range(1..8);
        let lambda = rng.random_range(0.1..3.0);
        // Axis-aligned differences keep both scatter matrices diagonal.
        let mut sim_vecs = Vec::new();
        let mut dis_vecs = Vec::new();
        let mut s_diag = vec![lambda; dim];
        let mut d_diag = vec![lambda; dim];
        for (vecs, diag) in [(&mut sim_vecs, &mut s_diag), (&mut dis_vecs, &mut d_diag)] {
            for _ in 0..rng.random_range(0..10) {
                let axis = rng.random_range(0..dim);
                let c: f64 = rng.random_range(-3.0..3.0);
                let mut v = vec![0.0; dim];
                v[axis] = c;
                diag[axis] += c * c;
                vecs.push(v);
            }
        }
        let zero = vec![0.0; dim];
        let sim: PairSet = sim_vecs.iter().map(|v| (&v[..], &zero[..])).collect();
        let dis: PairSet = dis_vecs.iter().map(|v| (&v[..], &zero[..])).collect();
        let m = gmml_fit(&sim, &dis, dim, &GmmlConfig { lambda }).unwrap();
        for i in 0..dim {
            for j in 0..dim {
                let expected = if i == j {
                    (d_diag[i] / s_diag[i]).sqrt()
                } else {
                    0.0
                };
                worst = worst.max((m.as_matrix()[(i, j)] - expected).abs());
            }
        }
    }
    let ok = worst <= 1e-10;
    report(
        2,
        "diagonal GMML oracle",
        ok,
        &format!("max abs error {worst:.3e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_gmml_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_scale = 0.0f64;
    let mut worst_dual = 0.0f64;
    for _ in 0..50 {
        let dim = rng.random_range(2..10);
        let s = random_spd_upto(&mut rng, dim, 3.0);
        let d = random_spd_upto(&mut rng, dim, 3.0);
        let m = geometric_mean_riccati(&s, &d).unwrap();
        for alpha in [1e-3, 1.0, 1e3] {
            let sa = SpdMatrix::from_matrix(s.as_matrix() * alpha).unwrap();
            let da = SpdMatrix::from_matrix(d.as_matrix() * alpha).unwrap();
            let ma = geometric_mean_riccati(&sa, &da).unwrap();
            worst_scale = worst_scale.max((ma.as_matrix() - m.as_matrix()).amax());
        }
    }
    for _ in 0..50 {
        let dim = rng.random_range(2..10);
        let s = random_spd_upto(&mut rng, dim, 3.0);
        let d = random_spd_upto(&mut rng, dim, 3.0);
        let m = geometric_mean_riccati(&s, &d).unwrap();
        let dual = geometric_mean_riccati(&d, &s).unwrap();
        let inv = m.as_matrix().clone().try_inverse().unwrap();
        worst_dual = worst_dual.max((dual.as_matrix() - inv).amax());
    }
    let ok = worst_scale <= 1e-8 && worst_dual <= 1e-8;
    report(
        3,
        "scale invariance and inversion duality",
        ok,
        &format!("scale {worst_scale:.3e}, duality {worst_dual:.3e}"),
    );
    assert!(ok);
}

fn random_model(rng: &mut impl Rng, m: usize, dim: usize) -> RankingModel {
    let locals = (0..m)
        .map(|_| {
            let g = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() - 0.5);
            let a = &g * g.transpose() + DMatrix::identity(dim, dim) * 0.2;
            let anchor = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            LocalMetric::new(anchor, SpdMatrix::from_matrix(a).unwrap()).unwrap()
        })
        .collect();
    RankingModel::new(locals, vec![1.0; m], Hyper::default()).unwrap()
}

#[test]
fn criterion_4_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_grad = 0.0f64;
    let mut worst_step = 0.0f64;
    for _ in 0..200 {
        let m = rng.random_range(1..6);
        let dim = rng.random_range(1..6);
        let model = random_model(&mut rng, m, dim);
        let phi: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..10.0)).collect();
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();

        // ∂f/∂φ_r against central differences of the scorer.
        let g = signed_phi_gradient(&p, &model).unwrap();
        let fd = |point: &[f64], r: usize| {
            let h = 1e-4 * phi[r].max(1.0);
            let mut up = phi.clone();
            let mut down = phi.clone();
            up[r] += h;
            down[r] -= h;
            (score(point, &up, &model).unwrap() - score(point, &down, &model).unwrap()) / (2.0 * h)
        };
        for (r, gr) in g.iter().enumerate() {
            let rel = (fd(&p, r) - gr).abs() / gr.abs();
            worst_grad = worst_grad.max(rel);
        }

        // sgd_step direction against central differences of the triple's hinge term.
        let neg: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let cs = CandidateSet::new(
            1,
            vec![
                Document::new(1, p.clone(), 1),
                Document::new(1, neg.clone(), 0),
            ],
        );
        let zeta = 1e3; // every pair violates
        let sample = lgmml::TripleSample {
            qid: 1,
            positive_index: 0,
            negative_index: 1,
            draws: 1,
        };
        let mu = 1e-6;
        let stepped = sgd_step(&phi, &sample, &cs, &model, mu, zeta).unwrap();
        let weight = rank_weight(1);
        for r in 0..m {
            let hinge_grad = weight * (fd(&neg, r) - fd(&p, r));
            let expected = phi[r] - mu * hinge_grad;
            let step = stepped[r] - phi[r];
            let expected_step = expected - phi[r];
            if expected_step.abs() < 1e-300 {
                continue;
            }
            worst_step = worst_step.max((step - expected_step).abs() / expected_step.abs());
        }
    }
    let ok = worst_grad <= 1e-5 && worst_step <= 1e-5;
    report(
        4,
        "signed phi gradient vs finite differences",
        ok,
        &format!("gradient rel err {worst_grad:.3e}, step rel err {worst_step:.3e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_5_warp_estimator() {
    // One anchor at 0 with the identity metric: score(x) = −x·e^{−x}.
    // The positive sits at 0.5; violators near the anchor, the rest in [0.6, 0.9].
    let model = RankingModel::new(
        vec![LocalMetric::new(vec![0.0], SpdMatrix::identity(1)).unwrap()],
        vec![1.0],
        Hyper::default(),
    )
    .unwrap();
    let mut all_ok = true;
    let mut details = Vec::new();
    for (seed, v) in [(5u64, 5usize), (20, 20), (50, 50)] {
        let mut docs = vec![Document::new(1, vec![0.5], 1)];
        for i in 0..100 {
            let x = if i < v {
                0.001 * (i + 1) as f64
            } else {
                0.6 + 0.3 * (i - v) as f64 / 100.0
            };
            docs.push(Document::new(1, vec![x], 0));
        }
        let cs = CandidateSet::new(1, docs);
        assert_eq!(cs.negatives.len(), 100);
        assert_eq!(violator_count(&cs, 0, &[1.0], &model).unwrap(), v);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trials = 10_000;
        let mut sum_rank = 0.0;
        let mut sum_draws = 0.0;
        let mut certified = true;
        let f_pos = score(&[0.5], &[1.0], &model).unwrap();
        for _ in 0..trials {
            let s = sample_violator(&cs, 0, &[1.0], &model, 0.0, Some(1_000_000), &mut rng)
                .unwrap()
                .expect("violators exist");
            let f_neg = score(&cs.documents[s.negative_index].features, &[1.0], &model).unwrap();
            certified &= f_neg > f_pos;
            sum_rank += s.rank_estimate(100) as f64;
            sum_draws += s.draws as f64;
        }
        let mean_rank = sum_rank / trials as f64;
        let from_mean_draws = 100.0 / (sum_draws / trials as f64);
        let ok = certified && (mean_rank - v as f64).abs() <= 0.15 * v as f64;
        all_ok &= ok;
        details.push(format!(
            "v={v}: mean floor(|D-|/N)={mean_rank:.2}, |D-|/mean N={from_mean_draws:.2}, certified={certified}"
        ));
    }
    report(
        5,
        "WARP rank estimator within 15%",
        all_ok,
        &details.join("; "),
    );
    assert!(all_ok, "{}", details.join("\n"));
}

#[test]
fn criterion_6_metric_count_sweep() {
    let started = Instant::now();
    let synth = SynthConfig {
        num_classes: 10,
        points_per_class: 100,
        dim: 20,
        center_spread: 10.0,
        seed: 1,
        mixed_query: true,
        normalize: true,
    };
    let (train_ds, test_ds) = synth_gaussian_split(&synth, 0.3).unwrap();
    let cfg = TrainConfig {
        iters: 10_000,
        seed: 7,
        threads: 1,
        ..TrainConfig::default()
    };
    let ms = [1, 2, 5, 10, 20, 50];
    let rows = sweep(&train_ds, &test_ds, &ms, &cfg, &[10], Gain::Exponential).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let map_at = |m: usize| rows.iter().find(|r| r.m == m).unwrap().map;
    let best = rows
        .iter()
        .fold(&rows[0], |b, r| if r.map > b.map { r } else { b });
    let improves = map_at(10) > map_at(1);
    let peak_ok = (5..=20).contains(&best.m);
    let time_ok = secs <= 300.0;
    let table = rows
        .iter()
        .map(|r| format!("m={} MAP={:.4}", r.m, r.map))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        6,
        "metric-count sweep on Synthetic-10",
        improves && peak_ok && time_ok,
        &format!(
            "{table}; MAP(10)>MAP(1): {improves}; argmax m={} in [5,20]: {peak_ok}; {secs:.1}s",
            best.m
        ),
    );
    assert!(improves, "MAP at m=10 does not exceed MAP at m=1: {table}");
    assert!(time_ok, "sweep took {secs:.1}s");
    assert!(peak_ok, "argmax m={} outside [5, 20]: {table}", best.m);
}

#[test]
fn criterion_7_ranking_metric_oracle() {
    let mut ok = true;
    let dcg = 7.0 + 3.0 / 3f64.log2() + 1.0 / 5f64.log2();
    let idcg = 7.0 + 3.0 / 3f64.log2() + 1.0 / 4f64.log2();
    ok &= (dcg_at_k(&[3, 2, 0, 1], 4).unwrap() - dcg).abs() <= 1e-9;
    let ndcg = ndcg_at_k(&[3, 2, 0, 1], 4).unwrap();
    ok &= (ndcg - dcg / idcg).abs() <= 1e-9;
    ok &= (ndcg - 0.99261).abs() <= 1e-5;
    ok &= (average_precision(&[1, 0, 1]).unwrap() - 0.833_333_333_333).abs() <= 1e-9;
    ok &= (average_precision(&[0, 0, 1]).unwrap() - 1.0 / 3.0).abs() <= 1e-9;
    ok &= dcg_at_k(&[1], 1).unwrap() == 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut property_failures = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let k = rng.random_range(1..50);
        let v = ndcg_at_k(&labels, k).unwrap();
        if !(0.0..=1.0).contains(&v) {
            property_failures += 1;
        }
        let mut sorted = labels.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        if sorted[0] > 0 && (ndcg_at_k(&sorted, k).unwrap() - 1.0).abs() > 1e-12 {
            property_failures += 1;
        }
        // Swap monotonicity.
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let (lo, hi) = (i.min(j), i.max(j));
        let mut swapped = labels.clone();
        if swapped[hi] > swapped[lo] {
            swapped.swap(lo, hi);
        }
        if dcg_at_k(&swapped, k).unwrap() + 1e-12 < dcg_at_k(&labels, k).unwrap() {
            property_failures += 1;
        }
        // Trailing zeros leave AP unchanged.
        let mut padded = labels.clone();
        padded.extend(std::iter::repeat_n(0, rng.random_range(1..10)));
        if average_precision(&padded).unwrap() != average_precision(&labels).unwrap() {
            property_failures += 1;
        }
    }
    ok &= property_failures == 0;
    report(
        7,
        "NDCG/MAP oracle and properties",
        ok,
        &format!("NDCG@4 {ndcg:.5}, property failures {property_failures}"),
    );
    assert!(ok);
}

#[test]
fn criterion_8_nonnegativity_and_determinism() {
    let synth = SynthConfig {
        num_classes: 5,
        points_per_class: 40,
        dim: 6,
        seed: 3,
        ..SynthConfig::default()
    };
    let (train_ds, _) = synth_gaussian_split(&synth, 0.25).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (seed, mu, zeta) in [(1u64, 0.5, 0.5), (2, 5.0, 1.0), (3, 0.05, 0.01)] {
        let cfg = TrainConfig {
            m: 6,
            iters: 3000,
            mu,
            zeta,
            seed,
            threads: 1,
            ..TrainConfig::default()
        };
        let a = train(&train_ds.queries, &cfg).unwrap();
        let b = train(&train_ds.queries, &cfg).unwrap();
        let nonneg = a
            .phi
            .values()
            .chain(std::iter::once(&a.phi_default))
            .flatten()
            .all(|&v| v >= 0.0);
        let bytes_a = model_to_string(&a).unwrap();
        let bytes_b = model_to_string(&b).unwrap();
        let same = bytes_a.as_bytes() == bytes_b.as_bytes();
        let zeros = a.phi.values().flatten().filter(|&&v| v == 0.0).count();
        ok &= nonneg && same;
        detail.push(format!(
            "seed {seed}: nonneg={nonneg} identical={same} zeroed={zeros}"
        ));
    }
    report(
        8,
        "non-negative phi and byte-identical models",
        ok,
        &detail.join("; "),
    );
    assert!(ok);
}

fn generated_letor(rng: &mut impl Rng, lines: usize) -> String {
    let mut out = String::new();
    let mut qid = 1u64;
    for i in 0..lines {
        if rng.random_range(0..10) == 0 {
            qid += rng.random_range(1..5);
        }
        let label = rng.random_range(0..5);
        out.push_str(&format!("{label} qid:{qid}"));
        for fid in 1..=40 {
            if rng.random_range(0..3) == 0 {
                let v: f64 = rng.random_range(-5.0..5.0);
                out.push_str(&format!(" {fid}:{v}"));
            }
        }
        if i % 3 == 0 {
            out.push_str(&format!(" # docid=D{i} extra:tokens 7:9"));
        }
        out.push('\n');
        if i % 50 == 0 {
            out.push_str("# a full-line comment\n");
        }
    }
    out
}

#[test]
fn criterion_9_data_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let text = generated_letor(&mut rng, 1000);
    let first = parse_letor(Cursor::new(&text)).unwrap();
    let mut buf = Vec::new();
    write_letor(&first, &mut buf).unwrap();
    let second = parse_letor(Cursor::new(&buf)).unwrap();
    let identical = first == second && first.num_documents() == 1000;

    // Independent check of the sparse expansion on the generated text.
    let mut expansion_ok = true;
    let mut docs = first.documents();
    for line in text.lines() {
        let content = line.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let _ = docs.next();
        let mut dense = vec![0.0; first.dim];
        for tok in content.split_whitespace().skip(2) {
            let (f, v) = tok.split_once(':').unwrap();
            dense[f.parse::<usize>().unwrap() - 1] = v.parse().unwrap();
        }
        let label: u32 = content.split_whitespace().next().unwrap().parse().unwrap();
        let qid: u64 = content.split_whitespace().nth(1).unwrap()[4..]
            .parse()
            .unwrap();
        expansion_ok &= first
            .queries
            .iter()
            .find(|q| q.qid == qid)
            .is_some_and(|q| {
                q.documents
                    .iter()
                    .any(|d| d.features == dense && d.label == label)
            });
    }

    let once = normalize_l2_per_dimension(&first);
    let twice = normalize_l2_per_dimension(&once);
    let mut idem = 0.0f64;
    for (a, b) in once.documents().zip(twice.documents()) {
        for (x, y) in a.features.iter().zip(&b.features) {
            idem = idem.max((x - y).abs());
        }
    }
    let unit = column_norms(&once)
        .iter()
        .all(|n| *n == 0.0 || (n - 1.0).abs() <= 1e-9);
    let ok = identical && expansion_ok && idem <= 1e-9 && unit;
    report(
        9,
        "LETOR round trip and normalization idempotence",
        ok,
        &format!("round trip {identical}, expansion {expansion_ok}, idempotence {idem:.3e}"),
    );
    assert!(ok);
}
