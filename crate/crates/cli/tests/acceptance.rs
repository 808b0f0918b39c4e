//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcn::data::{synth_generate, Dataset, Sample, SynthConfig, Triplet};
use tcn::eval::{
    few_shot_recall, few_shot_split, median_rank, recall_at_k, retrieval_rank, topk_triplets,
    Averaging, FrequencyBaseline, Predictor, TripletScorer,
};
use tcn::gradcheck::random_gradcheck;
use tcn::model::{init_params, Variant};
use tcn::training::{train, TrainConfig};
use tcn::tucker::{compression_ratio, hosvd, tucker_compose, Ranks, TuckerTriple};
use tcn::{Matrix, Tensor3};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

fn compression_table() -> Outcome {
    let rows = [
        ((100, 100, 70), Ranks(27, 26, 17), 0.026),
        ((100, 100, 70), Ranks(12, 10, 10), 0.006),
        ((100, 100, 70), Ranks(6, 4, 6), 0.002),
        ((200, 200, 100), Ranks(94, 73, 33), 0.066),
        ((200, 200, 100), Ranks(55, 36, 14), 0.012),
        ((200, 200, 100), Ranks(23, 16, 5), 0.003),
    ];
    let worst = rows
        .iter()
        .map(|&(dims, r, published)| (compression_ratio(dims, r) - published).abs())
        .fold(0.0, f64::max);
    check(worst <= 0.001, format!("max |ratio - published| = {worst:.5}"))
}

// ---------------------------------------------------------------- 2

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

/// `S ×1 A ×2 B ×3 C` by direct summation.
fn naive_compose(core: &Tensor3, a: &Matrix, b: &Matrix, c: &Matrix) -> Tensor3 {
    let (r1, r2, r3) = core.dims();
    let (n1, n2, n3) = (a.rows(), b.rows(), c.rows());
    let mut t1 = vec![0.0; n1 * r2 * r3];
    for i in 0..n1 {
        for q in 0..r2 {
            for s in 0..r3 {
                t1[(i * r2 + q) * r3 + s] = (0..r1).map(|p| a.get(i, p) * core.get(p, q, s)).sum();
            }
        }
    }
    let mut t2 = vec![0.0; n1 * n2 * r3];
    for i in 0..n1 {
        for j in 0..n2 {
            for s in 0..r3 {
                t2[(i * n2 + j) * r3 + s] = (0..r2).map(|q| b.get(j, q) * t1[(i * r2 + q) * r3 + s]).sum();
            }
        }
    }
    Tensor3::from_fn((n1, n2, n3), |i, j, k| {
        (0..r3).map(|s| c.get(k, s) * t2[(i * n2 + j) * r3 + s]).sum()
    })
}

fn orthonormality_defect(m: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for p in 0..m.cols() {
        for q in 0..m.cols() {
            let dot: f64 = (0..m.rows()).map(|i| m.get(i, p) * m.get(i, q)).sum();
            let want = if p == q { 1.0 } else { 0.0 };
            worst = worst.max((dot - want).abs());
        }
    }
    worst
}

fn hosvd_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_margin = f64::NEG_INFINITY;
    let mut worst_orth = 0.0f64;
    let mut runs = 0;
    for _ in 0..100 {
        let dims = (rng.random_range(3..=40), rng.random_range(3..=40), rng.random_range(3..=30));
        let planted = Ranks(
            rng.random_range(1..=dims.0.min(5)),
            rng.random_range(1..=dims.1.min(5)),
            rng.random_range(1..=dims.2.min(5)),
        );
        let core = Tensor3::from_fn(planted.as_dims(), |_, _, _| normal(&mut rng));
        let f = TuckerTriple::new(
            Matrix::from_fn(dims.0, planted.0, |_, _| normal(&mut rng)),
            Matrix::from_fn(dims.1, planted.1, |_, _| normal(&mut rng)),
            Matrix::from_fn(dims.2, planted.2, |_, _| normal(&mut rng)),
        )
        .map_err(|e| e.to_string())?;
        let clean = tucker_compose(&core, &f).map_err(|e| e.to_string())?;
        let noise = Tensor3::from_fn(dims, |_, _, _| normal(&mut rng));
        let sigma = rng.random_range(0.0..0.05) * clean.frobenius_norm() / noise.frobenius_norm();
        let mut t = clean;
        t.axpy(sigma, &noise).map_err(|e| e.to_string())?;
        let norm = t.frobenius_norm();
        for eps in [0.02, 0.05, 0.10] {
            let m = hosvd(&t, eps).map_err(|e| e.to_string())?;
            let rec = naive_compose(&m.core, &m.factors.a, &m.factors.b, &m.factors.c);
            let err: f64 = t
                .data()
                .iter()
                .zip(rec.data())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
                / norm;
            worst_margin = worst_margin.max(err - eps);
            for fm in [&m.factors.a, &m.factors.b, &m.factors.c] {
                worst_orth = worst_orth.max(orthonormality_defect(fm));
            }
            runs += 1;
        }
    }
    check(
        worst_margin <= 0.0 && worst_orth <= 1e-9,
        format!("{runs} decompositions, max(error - eps) = {worst_margin:.3e}, max orthonormality defect = {worst_orth:.2e}"),
    )
}

// ---------------------------------------------------------------- 3

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for variant in [Variant::TuckerCore, Variant::Cp, Variant::Abc] {
        for seed in 0..5 {
            for (n, m, d, r) in [(6, 5, 10, Ranks(3, 3, 3)), (4, 3, 7, Ranks(2, 3, 1))] {
                let report = random_gradcheck(n, m, d, r, variant, seed).map_err(|e| e.to_string())?;
                worst = worst.max(report.max_relative_error);
                count += 1;
            }
        }
    }
    check(worst < 1e-4, format!("{count} checks, max relative error = {worst:.3e}"))
}

// ---------------------------------------------------------------- 4

fn scoring_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut entries = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for variant in [Variant::TuckerCore, Variant::Cp, Variant::Abc] {
        let small = if variant == Variant::Cp { Ranks(3, 3, 3) } else { Ranks(3, 2, 3) };
        let p = init_params(5, 4, small, 6, variant, 1, None).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let full = p.forward(&x).map_err(|e| e.to_string())?;
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..4 {
                    let s = p
                        .triplet_score(&x, Triplet::from_tensor_index(i, j, k))
                        .map_err(|e| e.to_string())?;
                    worst = worst.max((s - full.get(i, j, k)).abs());
                    entries += 1;
                }
            }
        }

        let ranks = if variant == Variant::Cp { Ranks(8, 8, 8) } else { Ranks(6, 5, 4) };
        let p = init_params(50, 30, ranks, 12, variant, 2, None).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let full = p.forward(&x).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let (i, j, k) = (rng.random_range(0..50), rng.random_range(0..50), rng.random_range(0..30));
            let s = p
                .triplet_score(&x, Triplet::from_tensor_index(i, j, k))
                .map_err(|e| e.to_string())?;
            worst = worst.max((s - full.get(i, j, k)).abs());
            entries += 1;
        }
    }
    check(worst <= 1e-10, format!("{entries} entries, max |score - forward| = {worst:.2e}"))
}

// ---------------------------------------------------------------- 5, 6

fn reference_schedule() -> TrainConfig {
    TrainConfig {
        epochs: 40,
        batch_size: 16,
        lr0: 2e-3,
        lr_halving_period: 10,
        threads: Some(1),
        ..TrainConfig::default()
    }
}

fn learnability() -> Outcome {
    let cfg = SynthConfig::default();
    let (train_set, test_set, _) = synth_generate(&cfg).map_err(|e| e.to_string())?;
    let (model, _) = train(&train_set, &reference_schedule()).map_err(|e| e.to_string())?;
    let k = 20;
    let chance = k as f64 / (cfg.n_objects * cfg.n_objects * cfg.n_predicates) as f64;
    let r = recall_at_k(&model, &test_set.samples, k, Averaging::Macro).map_err(|e| e.to_string())?;
    check(
        r.value >= 10.0 * chance,
        format!("Recall@20 = {:.4}, threshold 10 x chance = {:.4}", r.value, 10.0 * chance),
    )
}

fn zero_shot() -> Outcome {
    let cfg = SynthConfig {
        holdout: 10,
        ..SynthConfig::default()
    };
    let (train_set, test_set, truth) = synth_generate(&cfg).map_err(|e| e.to_string())?;
    let (model, _) = train(&train_set, &reference_schedule()).map_err(|e| e.to_string())?;
    let split = few_shot_split(&train_set, &test_set, 0).map_err(|e| e.to_string())?;
    if !truth.holdout.iter().all(|t| split.triplets.contains(t)) {
        return Err("held-out triplets missing from the 0-shot split".into());
    }
    let tcn = few_shot_recall(&model, &test_set.samples, &split, 100, Averaging::Macro)
        .map_err(|e| e.to_string())?;
    let baseline = FrequencyBaseline::fit(&train_set);
    let base = few_shot_recall(&baseline, &test_set.samples, &split, 100, Averaging::Macro)
        .map_err(|e| e.to_string())?;
    check(
        tcn.value > 0.0 && tcn.value > base.value,
        format!(
            "0-shot R@100 = {:.4} over {} triplet types, frequency baseline = {:.4}",
            tcn.value,
            split.triplets.len(),
            base.value
        ),
    )
}

// ---------------------------------------------------------------- 7

/// One score tensor per image, selected by the image's first feature.
struct Table(Vec<Tensor3>);

impl Predictor for Table {
    fn top_k(&self, features: &[f64], k: usize) -> tcn::Result<Vec<Triplet>> {
        topk_triplets(&self.0[features[0] as usize], k)
    }
    fn label_space(&self) -> usize {
        self.0[0].len()
    }
}

impl TripletScorer for Table {
    fn score(&self, features: &[f64], t: Triplet) -> tcn::Result<f64> {
        let (i, j, k) = t.tensor_index();
        Ok(self.0[features[0] as usize].get(i, j, k))
    }
}

fn random_triplet(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Triplet {
    Triplet::new(rng.random_range(0..n), rng.random_range(0..m), rng.random_range(0..n))
}

fn random_images(rng: &mut ChaCha8Rng, count: usize, n: usize, m: usize, max_gt: usize) -> Vec<Sample> {
    (0..count)
        .map(|i| Sample {
            id: format!("i{i}"),
            features: vec![i as f64],
            triplets: (0..rng.random_range(0..=max_gt)).map(|_| random_triplet(rng, n, m)).collect(),
        })
        .collect()
}

fn coarse_table(rng: &mut ChaCha8Rng, count: usize, dims: (usize, usize, usize)) -> Table {
    Table((0..count).map(|_| Tensor3::from_fn(dims, |_, _, _| rng.random_range(0..5) as f64)).collect())
}

/// Entries of `t` that beat `(i, j, k)` under (score desc, row-major asc).
fn entries_ahead(t: &Tensor3, at: (usize, usize, usize)) -> usize {
    let (n1, n2, n3) = t.dims();
    let s = t.get(at.0, at.1, at.2);
    let lin = (at.0 * n2 + at.1) * n3 + at.2;
    let mut ahead = 0;
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                let v = t.get(i, j, k);
                if v > s || (v == s && (i * n2 + j) * n3 + k < lin) {
                    ahead += 1;
                }
            }
        }
    }
    ahead
}

fn brute_recall(table: &Table, images: &[Sample], k: usize, micro: bool) -> Option<f64> {
    let (mut hits, mut total, mut per_image) = (0usize, 0usize, Vec::new());
    for s in images {
        let gt: BTreeSet<Triplet> = s.triplets.iter().copied().collect();
        if gt.is_empty() {
            continue;
        }
        let t = &table.0[s.features[0] as usize];
        let h = gt.iter().filter(|g| entries_ahead(t, g.tensor_index()) < k).count();
        hits += h;
        total += gt.len();
        per_image.push(h as f64 / gt.len() as f64);
    }
    if per_image.is_empty() {
        None
    } else if micro {
        Some(hits as f64 / total as f64)
    } else {
        Some(per_image.iter().sum::<f64>() / per_image.len() as f64)
    }
}

fn brute_first_hit(scores: &[f64], correct: &[bool]) -> Option<usize> {
    (0..scores.len())
        .filter(|&c| correct[c])
        .map(|c| {
            1 + (0..scores.len())
                .filter(|&i| scores[i] > scores[c] || (scores[i] == scores[c] && i < c))
                .count()
        })
        .min()
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 200;
    let mut failures = Vec::new();

    for trial in 0..trials {
        let (n, m) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let dims = (n, n, m);
        let count = rng.random_range(1..=6);
        let images = random_images(&mut rng, count, n, m, 4);
        let table = coarse_table(&mut rng, images.len(), dims);
        let k = rng.random_range(1..=n * n * m);
        for micro in [false, true] {
            let avg = if micro { Averaging::Micro } else { Averaging::Macro };
            let got = recall_at_k(&table, &images, k, avg).ok().map(|r| r.value);
            let want = brute_recall(&table, &images, k, micro);
            let agree = match (got, want) {
                (Some(g), Some(w)) => (g - w).abs() < 1e-12,
                (None, None) => true,
                _ => false,
            };
            if !agree {
                failures.push(format!("recall trial {trial}: {got:?} vs {want:?}"));
            }
        }
    }

    for trial in 0..trials {
        let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let mut train_set = Dataset::new(n, m, 1).map_err(|e| e.to_string())?;
        let mut test_set = Dataset::new(n, m, 1).map_err(|e| e.to_string())?;
        let count = rng.random_range(0..=12);
        for s in random_images(&mut rng, count, n, m, 3) {
            train_set.push(s).map_err(|e| e.to_string())?;
        }
        let count = rng.random_range(1..=5);
        for s in random_images(&mut rng, count, n, m, 3) {
            test_set.push(s).map_err(|e| e.to_string())?;
        }
        let mut train_counts: BTreeMap<Triplet, usize> = BTreeMap::new();
        for s in &train_set.samples {
            let distinct: BTreeSet<Triplet> = s.triplets.iter().copied().collect();
            for t in distinct {
                *train_counts.entry(t).or_default() += 1;
            }
        }
        let in_test: BTreeSet<Triplet> = test_set.samples.iter().flat_map(|s| s.triplets.iter().copied()).collect();
        let mut previous: Option<BTreeSet<Triplet>> = None;
        for shots in [0, 1, 5] {
            let got = few_shot_split(&train_set, &test_set, shots).map_err(|e| e.to_string())?.triplets;
            let want: BTreeSet<Triplet> = in_test
                .iter()
                .copied()
                .filter(|t| train_counts.get(t).copied().unwrap_or(0) <= shots)
                .collect();
            if got != want {
                failures.push(format!("split trial {trial}, m={shots}"));
            }
            if let Some(prev) = &previous {
                if !prev.is_subset(&got) {
                    failures.push(format!("nesting trial {trial}, m={shots}"));
                }
            }
            previous = Some(got);
        }
    }

    for trial in 0..trials {
        let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let count = rng.random_range(1..=8);
        let images = random_images(&mut rng, count, n, m, 3);
        let table = coarse_table(&mut rng, images.len(), (n, n, m));
        let queries: Vec<Triplet> = (0..rng.random_range(1..=6)).map(|_| random_triplet(&mut rng, n, m)).collect();
        let mut oracle_ranks = Vec::new();
        for &q in &queries {
            let (i, j, k) = q.tensor_index();
            let scores: Vec<f64> = table.0.iter().map(|t| t.get(i, j, k)).collect();
            let correct: Vec<bool> = images.iter().map(|s| s.triplets.contains(&q)).collect();
            let want = brute_first_hit(&scores, &correct);
            let got = retrieval_rank(&table, &images, q).map_err(|e| e.to_string())?;
            let ok = match (&got, want) {
                (Some(o), Some(w)) => {
                    let sorted = o.order.windows(2).all(|p| {
                        let (a, b) = (scores[p[0]], scores[p[1]]);
                        a > b || (a == b && p[0] < p[1])
                    });
                    o.first_hit_rank == w && sorted && o.order.len() == images.len()
                }
                (None, None) => true,
                _ => false,
            };
            if !ok {
                failures.push(format!("retrieval trial {trial}"));
            }
            oracle_ranks.extend(want);
        }
        let got = median_rank(&table, &images, &queries);
        if oracle_ranks.is_empty() {
            if got.is_ok() {
                failures.push(format!("median trial {trial}: expected an error"));
            }
        } else {
            oracle_ranks.sort_unstable();
            let len = oracle_ranks.len();
            let want = if len % 2 == 1 {
                oracle_ranks[len / 2] as f64
            } else {
                (oracle_ranks[len / 2 - 1] + oracle_ranks[len / 2]) as f64 / 2.0
            };
            match got {
                Ok(mr) if mr.median == want && mr.skipped == queries.len() - len => {}
                other => failures.push(format!("median trial {trial}: {other:?} vs {want}")),
            }
        }
    }

    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{trials} randomized trials each for recall, splits, retrieval and median rank")
        } else {
            format!("{} mismatches, first: {}", failures.len(), failures[0])
        },
    )
}

// ---------------------------------------------------------------- 8

fn tcn(args: &[&str], threads: usize) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tcn"))
        .args(["--seed", "11", "--threads", &threads.to_string()])
        .args(args)
        .env_remove("TCN_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("tcn {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    std::fs::write(p("synth.json"), r#"{"n_train": 200, "n_test": 60, "holdout": 5}"#).map_err(|e| e.to_string())?;
    tcn(&["synth", "--config", &p("synth.json"), "--out", &p("data")], 1)?;
    let (train_file, test_file) = (p("data/train.jsonl"), p("data/test.jsonl"));

    let mut checkpoints = Vec::new();
    let mut reports = Vec::new();
    for (run, threads) in [(0, 1), (1, 1), (2, 8), (3, 8)] {
        let ckpt = p(&format!("run{run}.tcn"));
        tcn(&["train", "--data", &train_file, "--out", &ckpt, "--epochs", "8"], threads)?;
        checkpoints.push(std::fs::read(&ckpt).map_err(|e| e.to_string())?);
        reports.push(tcn(
            &[
                "eval", "--data", &test_file, "--model", &ckpt, "--train", &train_file,
                "--shots", "0,1,5", "--queries", "top:50", "--json",
            ],
            threads,
        )?);
    }
    let logs_match = {
        let strip = |run: usize| -> Result<String, String> {
            let text = std::fs::read_to_string(p(&format!("run{run}.tcn.log"))).map_err(|e| e.to_string())?;
            Ok(text.lines().skip(1).collect::<Vec<_>>().join("\n"))
        };
        strip(0)? == strip(2)?
    };
    let same_ckpt = checkpoints.iter().all(|c| c == &checkpoints[0]);
    let same_report = reports.iter().all(|r| r == &reports[0]);
    check(
        same_ckpt && same_report && logs_match && !reports[0].is_empty(),
        format!(
            "4 runs at --threads 1/8: checkpoints identical = {same_ckpt}, reports identical = {same_report}, logs identical = {logs_match}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "compression table", Some(Duration::from_secs(1)), compression_table),
        (2, "HOSVD error bound", Some(Duration::from_secs(30)), hosvd_contract),
        (3, "gradient check", Some(Duration::from_secs(10)), gradients),
        (4, "scoring oracle", Some(Duration::from_secs(5)), scoring_oracle),
        (5, "end-to-end learnability", Some(Duration::from_secs(180)), learnability),
        (6, "zero-shot capability", Some(Duration::from_secs(180)), zero_shot),
        (7, "metric oracles", Some(Duration::from_secs(10)), metric_oracles),
        (8, "determinism across threads", None, determinism),
    ];
    let filter: Option<u32> = std::env::var("TCN_ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, limit, f) in criteria {
        if filter.is_some_and(|only| only != id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (mut pass, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let mut timing = format!("{:.2}s", elapsed.as_secs_f64());
        if let Some(limit) = limit {
            timing.push_str(&format!(" of {}s", limit.as_secs()));
            if elapsed > limit {
                pass = false;
            }
        }
        println!(
            "criterion {id} [{name}]: {} ({detail}; {timing})",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} of {ran} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all {ran} criteria passed");
}
