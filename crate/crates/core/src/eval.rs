//! Recall@K, m-shot splits and relation-based image retrieval.
//!
//! Ties are always broken deterministically: triplets by ascending
//! row-major index, images by ascending position in the dataset.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Sample, Triplet};
use crate::error::{Result, TcnError};
use crate::model::TcnParams;
use crate::tensor::Tensor3;

/// Anything that can rank all triplets for an image.
pub trait Predictor: Sync {
    /// The `k` most confident triplets, best first.
    fn top_k(&self, features: &[f64], k: usize) -> Result<Vec<Triplet>>;

    /// Number of candidate triplets (`n·n·m`).
    fn label_space(&self) -> usize;
}

/// Anything that can score a given triplet for an image.
pub trait TripletScorer: Sync {
    fn score(&self, features: &[f64], triplet: Triplet) -> Result<f64>;

    /// Scores several triplets for one image.
    fn score_many(&self, features: &[f64], triplets: &[Triplet]) -> Result<Vec<f64>> {
        triplets.iter().map(|&t| self.score(features, t)).collect()
    }
}

impl Predictor for TcnParams {
    fn top_k(&self, features: &[f64], k: usize) -> Result<Vec<Triplet>> {
        topk_triplets(&self.forward(features)?, k)
    }

    fn label_space(&self) -> usize {
        self.n_objects * self.n_objects * self.n_predicates
    }
}

impl TripletScorer for TcnParams {
    fn score(&self, features: &[f64], triplet: Triplet) -> Result<f64> {
        self.triplet_score(features, triplet)
    }

    /// Predicts the image representation once and reuses it for every query.
    fn score_many(&self, features: &[f64], triplets: &[Triplet]) -> Result<Vec<f64>> {
        for t in triplets {
            t.check_bounds(self.n_objects, self.n_predicates)?;
        }
        let prepared = self.prepare(features)?;
        Ok(triplets
            .iter()
            .map(|t| {
                let (i, j, k) = t.tensor_index();
                prepared.score(i, j, k)
            })
            .collect())
    }
}

/// The `k` highest-scoring triplets, descending, ties by row-major index.
pub fn topk_triplets(scores: &Tensor3, k: usize) -> Result<Vec<Triplet>> {
    let total = scores.len();
    if k == 0 || k > total {
        return Err(TcnError::Argument(format!(
            "k must lie in 1..={total}, got {k}"
        )));
    }
    let d = scores.data();
    let cmp = |a: &usize, b: &usize| d[*b].total_cmp(&d[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..total).collect();
    if k < total {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    Ok(idx
        .into_iter()
        .map(|lin| {
            let (i, j, kk) = scores.unravel(lin);
            Triplet::from_tensor_index(i, j, kk)
        })
        .collect())
}

/// How per-image hits are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Averaging {
    /// Mean over images of the per-image recall.
    #[default]
    Macro,
    /// Total hits over total ground-truth triplets.
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recall {
    pub value: f64,
    /// Images that contributed.
    pub images: usize,
    /// Images without any (relevant) ground truth.
    pub skipped: usize,
}

fn recall_filtered(
    model: &dyn Predictor,
    samples: &[Sample],
    k: usize,
    averaging: Averaging,
    restrict: Option<&BTreeSet<Triplet>>,
) -> Result<Recall> {
    let k = k.min(model.label_space());
    let per_image: Vec<Option<(usize, usize)>> = samples
        .par_iter()
        .map(|s| -> Result<Option<(usize, usize)>> {
            let mut gt = s.distinct_triplets();
            if let Some(keep) = restrict {
                gt.retain(|t| keep.contains(t));
            }
            if gt.is_empty() {
                return Ok(None);
            }
            let top = model.top_k(&s.features, k)?;
            let hits = top.iter().filter(|t| gt.contains(t)).count();
            Ok(Some((hits, gt.len())))
        })
        .collect::<Result<_>>()?;
    let skipped = per_image.iter().filter(|r| r.is_none()).count();
    let counted: Vec<(usize, usize)> = per_image.into_iter().flatten().collect();
    if counted.is_empty() {
        return Err(TcnError::Evaluation(
            "no image carries ground-truth triplets to evaluate".into(),
        ));
    }
    if skipped > 0 && restrict.is_none() {
        warn!("{skipped} images without ground truth excluded from recall");
    }
    let value = match averaging {
        Averaging::Macro => {
            counted.iter().map(|&(h, g)| h as f64 / g as f64).sum::<f64>() / counted.len() as f64
        }
        Averaging::Micro => {
            let hits: usize = counted.iter().map(|c| c.0).sum();
            let gt: usize = counted.iter().map(|c| c.1).sum();
            hits as f64 / gt as f64
        }
    };
    Ok(Recall {
        value,
        images: counted.len(),
        skipped,
    })
}

/// Fraction of each image's ground-truth triplets found in its top `k`,
/// averaged over images. `k` beyond the label space means "all".
pub fn recall_at_k(model: &dyn Predictor, samples: &[Sample], k: usize, averaging: Averaging) -> Result<Recall> {
    recall_filtered(model, samples, k, averaging, None)
}

/// Triplets present in test annotations that occur at most `max_train_count`
/// times in training.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSplit {
    pub max_train_count: usize,
    pub triplets: BTreeSet<Triplet>,
}

pub fn few_shot_split(train: &Dataset, test: &Dataset, max_train_count: usize) -> Result<ShotSplit> {
    if (train.n_objects, train.n_predicates) != (test.n_objects, test.n_predicates) {
        return Err(TcnError::Argument(
            "train and test vocabularies differ".into(),
        ));
    }
    let train_counts = train.triplet_counts();
    let triplets = test
        .triplet_counts()
        .into_keys()
        .filter(|t| train_counts.get(t).copied().unwrap_or(0) <= max_train_count)
        .collect();
    Ok(ShotSplit {
        max_train_count,
        triplets,
    })
}

/// Recall@K counting only ground truth inside the split; images with no
/// split triplet are left out.
pub fn few_shot_recall(
    model: &dyn Predictor,
    test: &[Sample],
    split: &ShotSplit,
    k: usize,
    averaging: Averaging,
) -> Result<Recall> {
    if split.triplets.is_empty() {
        return Err(TcnError::Evaluation(format!(
            "{}-shot split is empty",
            split.max_train_count
        )));
    }
    recall_filtered(model, test, k, averaging, Some(&split.triplets))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalOutcome {
    /// Image positions, best first.
    pub order: Vec<usize>,
    /// One-based rank of the first image annotated with the query.
    pub first_hit_rank: usize,
}

/// Ranks `images` by their score for `query`. Returns `None` when no image
/// is annotated with the query.
pub fn retrieval_rank(
    scorer: &dyn TripletScorer,
    images: &[Sample],
    query: Triplet,
) -> Result<Option<RetrievalOutcome>> {
    if !images.iter().any(|s| s.triplets.contains(&query)) {
        return Ok(None);
    }
    let scores: Vec<f64> = images
        .par_iter()
        .map(|s| scorer.score(&s.features, query))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let first_hit_rank = order
        .iter()
        .position(|&i| images[i].triplets.contains(&query))
        .expect("some image is annotated")
        + 1;
    Ok(Some(RetrievalOutcome {
        order,
        first_hit_rank,
    }))
}

/// Median of `values`; the mean of the middle two for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianRank {
    pub median: f64,
    pub evaluated: usize,
    pub skipped: usize,
    /// First-hit rank of every evaluated query, in query order.
    pub ranks: Vec<usize>,
}

/// Median over queries of the first-hit retrieval rank. Queries that match
/// no image are skipped and counted.
///
/// Each image's representation is predicted once and reused for all
/// queries.
pub fn median_rank(
    scorer: &dyn TripletScorer,
    images: &[Sample],
    queries: &[Triplet],
) -> Result<MedianRank> {
    let scores: Vec<Vec<f64>> = images
        .par_iter()
        .map(|s| scorer.score_many(&s.features, queries))
        .collect::<Result<_>>()?;
    let annotated: Vec<BTreeSet<Triplet>> = images.iter().map(|s| s.distinct_triplets()).collect();
    let mut ranks = Vec::new();
    let mut skipped = 0;
    for (q, query) in queries.iter().enumerate() {
        // Best-placed correct image under (score desc, position asc).
        let best = (0..images.len())
            .filter(|&i| annotated[i].contains(query))
            .min_by(|&a, &b| scores[b][q].total_cmp(&scores[a][q]).then(a.cmp(&b)));
        let Some(best) = best else {
            skipped += 1;
            continue;
        };
        let s_best = scores[best][q];
        let ahead = (0..images.len())
            .filter(|&i| {
                let s = scores[i][q];
                s > s_best || (s == s_best && i < best)
            })
            .count();
        ranks.push(ahead + 1);
    }
    if skipped > 0 {
        warn!("{skipped} retrieval queries match no image and were skipped");
    }
    let as_f64: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
    let median = median(&as_f64).ok_or_else(|| {
        TcnError::Evaluation("no retrieval query matches any image".into())
    })?;
    Ok(MedianRank {
        median,
        evaluated: ranks.len(),
        skipped,
        ranks,
    })
}

/// The `q` most frequent training triplets, ties by row-major index.
pub fn frequent_queries(train: &Dataset, q: usize) -> Result<Vec<Triplet>> {
    if q == 0 {
        return Err(TcnError::Argument("query count must be positive".into()));
    }
    let mut counted: Vec<(Triplet, usize)> = train.triplet_counts().into_iter().collect();
    counted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if counted.len() < q {
        warn!(
            "only {} distinct training triplets available for {q} queries",
            counted.len()
        );
    }
    Ok(counted.into_iter().take(q).map(|(t, _)| t).collect())
}

/// Rank-free baseline that predicts training-seen triplets by frequency and
/// can never predict an unseen one.
#[derive(Debug, Clone)]
pub struct FrequencyBaseline {
    ranked: Vec<Triplet>,
    label_space: usize,
}

impl FrequencyBaseline {
    pub fn fit(train: &Dataset) -> Self {
        let ranked = frequent_queries(train, usize::MAX).unwrap_or_default();
        Self {
            ranked,
            label_space: train.n_objects * train.n_objects * train.n_predicates,
        }
    }
}

impl Predictor for FrequencyBaseline {
    fn top_k(&self, _features: &[f64], k: usize) -> Result<Vec<Triplet>> {
        Ok(self.ranked.iter().take(k).copied().collect())
    }

    fn label_space(&self) -> usize {
        self.label_space
    }
}

/// Evaluation summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub recall_at: BTreeMap<usize, f64>,
    /// `m → (R@50, R@100)` on the m-shot split.
    pub per_shot: BTreeMap<usize, (f64, f64)>,
    pub retrieval_median_rank: Option<f64>,
    pub skipped_queries: usize,
}

impl EvalReport {
    /// Flat `key = value` pairs: `recall@K`, `shotM_r@50`, `shotM_r@100`,
    /// `median_rank`, `skipped_queries`.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (k, v) in &self.recall_at {
            out.push((format!("recall@{k}"), v.to_string()));
        }
        for (m, (r50, r100)) in &self.per_shot {
            out.push((format!("shot{m}_r@50"), r50.to_string()));
            out.push((format!("shot{m}_r@100"), r100.to_string()));
        }
        if let Some(mr) = self.retrieval_median_rank {
            out.push(("median_rank".into(), mr.to_string()));
            out.push(("skipped_queries".into(), self.skipped_queries.to_string()));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.recall_at {
            map.insert(format!("recall@{k}"), (*v).into());
        }
        for (m, (r50, r100)) in &self.per_shot {
            map.insert(format!("shot{m}_r@50"), (*r50).into());
            map.insert(format!("shot{m}_r@100"), (*r100).into());
        }
        if let Some(mr) = self.retrieval_median_rank {
            map.insert("median_rank".into(), mr.into());
            map.insert("skipped_queries".into(), self.skipped_queries.into());
        }
        serde_json::Value::Object(map)
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (key, value) in self.key_values() {
            writeln!(f, "{key:<16} {value}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Predictor backed by one fixed score tensor per image, keyed by the
    /// first feature value.
    struct Table {
        tensors: Vec<Tensor3>,
    }

    impl Predictor for Table {
        fn top_k(&self, features: &[f64], k: usize) -> Result<Vec<Triplet>> {
            topk_triplets(&self.tensors[features[0] as usize], k)
        }
        fn label_space(&self) -> usize {
            self.tensors[0].len()
        }
    }

    impl TripletScorer for Table {
        fn score(&self, features: &[f64], t: Triplet) -> Result<f64> {
            let (i, j, k) = t.tensor_index();
            Ok(self.tensors[features[0] as usize].get(i, j, k))
        }
    }

    fn image(idx: usize, triplets: Vec<Triplet>) -> Sample {
        Sample {
            id: format!("img{idx}"),
            features: vec![idx as f64],
            triplets,
        }
    }

    #[test]
    fn topk_examples() {
        let mut one_hot = Tensor3::zeros((3, 3, 2));
        one_hot.set(2, 0, 1, 1.0);
        assert_eq!(topk_triplets(&one_hot, 1).unwrap(), vec![Triplet::from_tensor_index(2, 0, 1)]);

        let flat = Tensor3::zeros((2, 2, 2));
        let top = topk_triplets(&flat, 3).unwrap();
        let expected: Vec<Triplet> = (0..3)
            .map(|lin| {
                let (i, j, k) = flat.unravel(lin);
                Triplet::from_tensor_index(i, j, k)
            })
            .collect();
        assert_eq!(top, expected);
        assert!(topk_triplets(&flat, 0).is_err());
        assert!(topk_triplets(&flat, 9).is_err());
    }

    #[test]
    fn topk_matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            // Coarse values force ties.
            let t = Tensor3::from_fn((4, 4, 3), |_, _, _| rng.random_range(0..6) as f64);
            let mut all: Vec<usize> = (0..t.len()).collect();
            all.sort_by(|&a, &b| t.data()[b].partial_cmp(&t.data()[a]).unwrap().then(a.cmp(&b)));
            let oracle: Vec<Triplet> = all[..10]
                .iter()
                .map(|&l| {
                    let (i, j, k) = t.unravel(l);
                    Triplet::from_tensor_index(i, j, k)
                })
                .collect();
            assert_eq!(topk_triplets(&t, 10).unwrap(), oracle);
        }
    }

    #[test]
    fn recall_examples() {
        // 2x2x2 space, image 0 has 4 GT triples of which 2 are in its top 2.
        let mut scores = Tensor3::zeros((2, 2, 2));
        scores.data_mut().copy_from_slice(&[8.0, 7.0, 1.0, 2.0, 6.0, 5.0, 4.0, 3.0]);
        let table = Table { tensors: vec![scores] };
        let gt: Vec<Triplet> = [0usize, 1, 2, 3]
            .iter()
            .map(|&l| {
                let (i, j, k) = table.tensors[0].unravel(l);
                Triplet::from_tensor_index(i, j, k)
            })
            .collect();
        let samples = vec![image(0, gt)];
        let r = recall_at_k(&table, &samples, 2, Averaging::Macro).unwrap();
        assert_eq!(r.value, 0.5);
        assert_eq!(recall_at_k(&table, &samples, 8, Averaging::Macro).unwrap().value, 1.0);
        assert_eq!(recall_at_k(&table, &samples, 1000, Averaging::Macro).unwrap().value, 1.0);
    }

    #[test]
    fn images_without_ground_truth_are_skipped() {
        let table = Table {
            tensors: vec![Tensor3::zeros((2, 2, 1)), Tensor3::zeros((2, 2, 1))],
        };
        let samples = vec![image(0, vec![Triplet::new(0, 0, 0)]), image(1, vec![])];
        let r = recall_at_k(&table, &samples, 1, Averaging::Macro).unwrap();
        assert_eq!((r.value, r.images, r.skipped), (1.0, 1, 1));
        assert!(recall_at_k(&table, &samples[1..], 1, Averaging::Macro).is_err());
    }

    #[test]
    fn micro_and_macro_differ_as_expected() {
        let mut a = Tensor3::zeros((2, 2, 1));
        a.data_mut().copy_from_slice(&[4.0, 3.0, 2.0, 1.0]);
        let table = Table { tensors: vec![a.clone(), a] };
        let t = |l: usize| {
            let (i, j, k) = (l / 2, l % 2, 0);
            Triplet::from_tensor_index(i, j, k)
        };
        // Image 0: 1 GT hit of 1. Image 1: 1 hit of 3 at k=1.
        let samples = vec![image(0, vec![t(0)]), image(1, vec![t(0), t(2), t(3)])];
        let macro_r = recall_at_k(&table, &samples, 1, Averaging::Macro).unwrap().value;
        let micro_r = recall_at_k(&table, &samples, 1, Averaging::Micro).unwrap().value;
        assert!((macro_r - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((micro_r - 0.5).abs() < 1e-15);
    }

    fn vocab_dataset(lists: Vec<Vec<Triplet>>) -> Dataset {
        let mut ds = Dataset::new(3, 2, 1).unwrap();
        for (i, l) in lists.into_iter().enumerate() {
            ds.push(image(i, l)).unwrap();
        }
        ds
    }

    #[test]
    fn few_shot_split_examples() {
        let unseen = Triplet::new(0, 0, 1);
        let thrice = Triplet::new(1, 1, 2);
        let train = vocab_dataset(vec![vec![thrice], vec![thrice], vec![thrice]]);
        let test = vocab_dataset(vec![vec![unseen, thrice]]);
        let zero = few_shot_split(&train, &test, 0).unwrap();
        let one = few_shot_split(&train, &test, 1).unwrap();
        let five = few_shot_split(&train, &test, 5).unwrap();
        assert!(zero.triplets.contains(&unseen) && !zero.triplets.contains(&thrice));
        assert!(!one.triplets.contains(&thrice));
        assert!(five.triplets.contains(&thrice));
        assert!(zero.triplets.is_subset(&one.triplets) && one.triplets.is_subset(&five.triplets));
    }

    #[test]
    fn few_shot_recall_examples() {
        let mut s = Tensor3::zeros((2, 2, 1));
        s.data_mut().copy_from_slice(&[4.0, 3.0, 2.0, 1.0]);
        let table = Table { tensors: vec![s] };
        let t = |l: usize| Triplet::from_tensor_index(l / 2, l % 2, 0);
        let samples = vec![image(0, vec![t(0), t(3)])];
        let all = ShotSplit {
            max_train_count: 0,
            triplets: (0..4).map(t).collect(),
        };
        assert_eq!(
            few_shot_recall(&table, &samples, &all, 2, Averaging::Macro).unwrap().value,
            recall_at_k(&table, &samples, 2, Averaging::Macro).unwrap().value
        );
        // Split holds only the lowest-scored triplet.
        let low = ShotSplit {
            max_train_count: 0,
            triplets: [t(3)].into_iter().collect(),
        };
        assert_eq!(few_shot_recall(&table, &samples, &low, 2, Averaging::Macro).unwrap().value, 0.0);
        assert_eq!(few_shot_recall(&table, &samples, &low, 4, Averaging::Macro).unwrap().value, 1.0);
        let empty = ShotSplit {
            max_train_count: 5,
            triplets: BTreeSet::new(),
        };
        match few_shot_recall(&table, &samples, &empty, 2, Averaging::Macro) {
            Err(TcnError::Evaluation(msg)) => assert!(msg.contains("5-shot")),
            other => panic!("{other:?}"),
        }
    }

    fn retrieval_table(scores: &[f64]) -> Table {
        Table {
            tensors: scores
                .iter()
                .map(|&s| Tensor3::new((1, 1, 1), vec![s]).unwrap())
                .collect(),
        }
    }

    #[test]
    fn retrieval_examples() {
        let q = Triplet::new(0, 0, 0);
        let table = retrieval_table(&[0.1, 0.9, 0.3]);
        let imgs = vec![image(0, vec![]), image(1, vec![q]), image(2, vec![])];
        let r = retrieval_rank(&table, &imgs, q).unwrap().unwrap();
        assert_eq!(r.first_hit_rank, 1);
        assert_eq!(r.order, vec![1, 2, 0]);

        let table = retrieval_table(&[7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let imgs: Vec<Sample> = (0..7).map(|i| image(i, if i == 6 { vec![q] } else { vec![] })).collect();
        assert_eq!(retrieval_rank(&table, &imgs, q).unwrap().unwrap().first_hit_rank, 7);

        let none: Vec<Sample> = (0..3).map(|i| image(i, vec![])).collect();
        assert!(retrieval_rank(&table, &none, q).unwrap().is_none());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[1.0, 1.0, 1.0]), Some(1.0));
        assert_eq!(median(&[100.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(median(&[2.0, 4.0]), Some(3.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn median_rank_skips_and_errors() {
        let q = Triplet::new(0, 0, 0);
        let table = retrieval_table(&[0.5, 0.2]);
        let imgs = vec![image(0, vec![]), image(1, vec![q])];
        let mr = median_rank(&table, &imgs, &[q, Triplet::new(0, 0, 0)]).unwrap();
        assert_eq!(mr.median, 2.0);
        let empty = vec![image(0, vec![]), image(1, vec![])];
        assert!(matches!(median_rank(&table, &empty, &[q]), Err(TcnError::Evaluation(_))));
    }

    #[test]
    fn frequent_query_examples() {
        let a = Triplet::new(0, 0, 0);
        let b = Triplet::new(1, 0, 0);
        let c = Triplet::new(2, 1, 2);
        let mut lists = vec![vec![a]; 5];
        lists.extend(vec![vec![b]; 3]);
        lists.push(vec![c]);
        let train = vocab_dataset(lists);
        assert_eq!(frequent_queries(&train, 2).unwrap(), vec![a, b]);
        assert_eq!(frequent_queries(&train, 10).unwrap(), vec![a, b, c]);

        // Equal counts: row-major order decides, regardless of insertion.
        let tied = vocab_dataset(vec![vec![c], vec![b], vec![a]]);
        assert_eq!(frequent_queries(&tied, 3).unwrap(), vec![a, b, c]);
    }

    #[test]
    fn frequency_baseline_never_predicts_unseen() {
        let seen = Triplet::new(0, 0, 0);
        let unseen = Triplet::new(1, 1, 1);
        let train = vocab_dataset(vec![vec![seen]]);
        let base = FrequencyBaseline::fit(&train);
        let test = vec![image(0, vec![unseen])];
        let split = ShotSplit {
            max_train_count: 0,
            triplets: [unseen].into_iter().collect(),
        };
        let k = base.label_space();
        assert_eq!(few_shot_recall(&base, &test, &split, k, Averaging::Macro).unwrap().value, 0.0);
    }

    #[test]
    fn report_keys() {
        let mut report = EvalReport::default();
        report.recall_at.insert(20, 0.25);
        report.per_shot.insert(0, (0.1, 0.2));
        report.retrieval_median_rank = Some(3.5);
        report.skipped_queries = 2;
        let keys: Vec<String> = report.key_values().into_iter().map(|(k, _)| k).collect();
        assert_eq!(
            keys,
            ["recall@20", "shot0_r@50", "shot0_r@100", "median_rank", "skipped_queries"]
        );
        let json = report.to_json();
        assert_eq!(json["median_rank"], 3.5);
        assert_eq!(json["skipped_queries"], 2);
    }
}
