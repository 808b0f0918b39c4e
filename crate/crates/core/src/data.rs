//! Datasets of `(features, triplets)` samples, relation-tensor
//! construction, a planted-model synthetic generator and binary
//! checkpoints.
//!
//! Files list triplets as `(subject, predicate, object)`. Tensors index them
//! as `(subject, object, predicate)`; [`Triplet::tensor_index`] is the only
//! place that permutation happens.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TcnError};
use crate::matrix::Matrix;
use crate::model::{fuse_features, TcnParams, Variant};
use crate::tensor::Tensor3;
use crate::tucker::{tucker_compose, Ranks, TuckerTriple};

/// A `⟨subject, predicate, object⟩` relationship.
///
/// Ordering follows the row-major linear index of the relation tensor:
/// subject, then object, then predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: usize,
    pub object: usize,
    pub predicate: usize,
}

impl Triplet {
    pub fn new(subject: usize, predicate: usize, object: usize) -> Self {
        Self {
            subject,
            object,
            predicate,
        }
    }

    /// `(i, j, k)` position in an `n × n × m` relation tensor.
    pub fn tensor_index(&self) -> (usize, usize, usize) {
        (self.subject, self.object, self.predicate)
    }

    pub fn from_tensor_index(i: usize, j: usize, k: usize) -> Self {
        Self::new(i, k, j)
    }

    pub fn linear_index(&self, n_objects: usize, n_predicates: usize) -> usize {
        (self.subject * n_objects + self.object) * n_predicates + self.predicate
    }

    pub fn check_bounds(&self, n_objects: usize, n_predicates: usize) -> Result<()> {
        if self.subject >= n_objects || self.object >= n_objects {
            return Err(TcnError::Argument(format!(
                "object index out of range in {self} (n_objects = {n_objects})"
            )));
        }
        if self.predicate >= n_predicates {
            return Err(TcnError::Argument(format!(
                "predicate index out of range in {self} (n_predicates = {n_predicates})"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Triplet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<{},{},{}>", self.subject, self.predicate, self.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
    pub triplets: Vec<Triplet>,
}

impl Sample {
    /// Annotated triplets with duplicates removed, in tensor order.
    pub fn distinct_triplets(&self) -> BTreeSet<Triplet> {
        self.triplets.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_objects: usize,
    pub n_predicates: usize,
    pub feature_dim: usize,
    pub split: Option<Split>,
    pub samples: Vec<Sample>,
}

/// Per-split summary in the shape of the usual dataset statistics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub images: usize,
    pub relationships_per_image: f64,
    pub distinct_triplets: usize,
    pub n_objects: usize,
    pub n_predicates: usize,
}

impl Dataset {
    pub fn new(n_objects: usize, n_predicates: usize, feature_dim: usize) -> Result<Self> {
        if n_objects == 0 || n_predicates == 0 || feature_dim == 0 {
            return Err(TcnError::Argument(
                "n_objects, n_predicates and feature_dim must be at least 1".into(),
            ));
        }
        Ok(Self {
            n_objects,
            n_predicates,
            feature_dim,
            split: None,
            samples: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn tensor_dims(&self) -> (usize, usize, usize) {
        (self.n_objects, self.n_objects, self.n_predicates)
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        self.check_sample(&sample)?;
        self.samples.push(sample);
        Ok(())
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.features.len() != self.feature_dim {
            return Err(TcnError::Argument(format!(
                "sample {:?}: feature length {} does not match feature_dim {}",
                s.id,
                s.features.len(),
                self.feature_dim
            )));
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(TcnError::Argument(format!(
                "sample {:?}: non-finite feature value",
                s.id
            )));
        }
        for t in &s.triplets {
            t.check_bounds(self.n_objects, self.n_predicates)
                .map_err(|e| TcnError::Argument(format!("sample {:?}: {e}", s.id)))?;
        }
        Ok(())
    }

    /// Number of images annotated with each triplet.
    pub fn triplet_counts(&self) -> BTreeMap<Triplet, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            for t in s.distinct_triplets() {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn stats(&self) -> DatasetStats {
        let total: usize = self.samples.iter().map(|s| s.distinct_triplets().len()).sum();
        DatasetStats {
            images: self.samples.len(),
            relationships_per_image: if self.samples.is_empty() {
                0.0
            } else {
                total as f64 / self.samples.len() as f64
            },
            distinct_triplets: self.triplet_counts().len(),
            n_objects: self.n_objects,
            n_predicates: self.n_predicates,
        }
    }
}

/// Binary relation tensor of a sample; repeated triplets collapse to 1.
pub fn to_tensor(sample: &Sample, n_objects: usize, n_predicates: usize) -> Result<Tensor3> {
    let mut t = Tensor3::zeros((n_objects, n_objects, n_predicates));
    for triplet in &sample.triplets {
        triplet.check_bounds(n_objects, n_predicates)?;
        let (i, j, k) = triplet.tensor_index();
        t.set(i, j, k, 1.0);
    }
    Ok(t)
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    n_objects: usize,
    n_predicates: usize,
    feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FeatureField {
    Flat(Vec<f64>),
    Blocks(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
struct SampleLine {
    id: String,
    features: FeatureField,
    triplets: Vec<[usize; 3]>,
}

#[derive(Serialize)]
struct SampleLineOut<'a> {
    id: &'a str,
    features: &'a [f64],
    triplets: Vec<[usize; 3]>,
}

/// Reads a JSON-lines dataset: a header object followed by one sample per
/// line. `features` may be a flat array or a list of blocks, which are
/// concatenated in order.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let fail = |line: usize, message: String| TcnError::Ingestion {
        path: display.clone(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => return Err(fail(1, "missing header line".into())),
            Some((i, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| fail(i + 1, format!("invalid header: {e}")))?;
            }
        }
    };
    let mut ds = Dataset::new(header.n_objects, header.n_predicates, header.feature_dim)
        .map_err(|e| fail(1, e.to_string()))?;
    ds.split = header.split;

    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SampleLine =
            serde_json::from_str(&line).map_err(|e| fail(lineno, format!("invalid sample: {e}")))?;
        let features = match parsed.features {
            FeatureField::Flat(v) => v,
            FeatureField::Blocks(blocks) => fuse_features(&blocks)
                .map_err(|e| fail(lineno, format!("field features: {e}")))?
                .into_inner(),
        };
        if features.len() != ds.feature_dim {
            return Err(fail(
                lineno,
                format!(
                    "field features: length {} does not match feature_dim {}",
                    features.len(),
                    ds.feature_dim
                ),
            ));
        }
        let mut triplets = Vec::with_capacity(parsed.triplets.len());
        for (pos, [s, p, o]) in parsed.triplets.into_iter().enumerate() {
            let t = Triplet::new(s, p, o);
            t.check_bounds(ds.n_objects, ds.n_predicates)
                .map_err(|e| fail(lineno, format!("field triplets[{pos}]: {e}")))?;
            triplets.push(t);
        }
        ds.push(Sample {
            id: parsed.id,
            features,
            triplets,
        })
        .map_err(|e| fail(lineno, e.to_string()))?;
    }
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = Header {
        n_objects: ds.n_objects,
        n_predicates: ds.n_predicates,
        feature_dim: ds.feature_dim,
        split: ds.split,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for s in &ds.samples {
        let line = SampleLineOut {
            id: &s.id,
            features: &s.features,
            triplets: s
                .triplets
                .iter()
                .map(|t| [t.subject, t.predicate, t.object])
                .collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&line).expect("sample serializes"))?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters of the planted low-rank generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_objects: usize,
    pub n_predicates: usize,
    pub feature_dim: usize,
    pub true_ranks: Ranks,
    pub n_train: usize,
    pub n_test: usize,
    /// Positives per image.
    pub positives: usize,
    /// Probability that a positive is replaced by a uniformly drawn triplet.
    pub noise_rate: f64,
    /// Triplet types seen in test images that are removed from training.
    pub holdout: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_objects: 20,
            n_predicates: 10,
            feature_dim: 32,
            true_ranks: Ranks(4, 4, 3),
            n_train: 500,
            n_test: 200,
            positives: 5,
            noise_rate: 0.0,
            holdout: 0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(TcnError::Config("feature_dim must be positive".into()));
        }
        self.true_ranks
            .validate_against((self.n_objects, self.n_objects, self.n_predicates))
            .map_err(|e| TcnError::Config(e.to_string()))?;
        let total = self.n_objects * self.n_objects * self.n_predicates;
        if self.positives == 0 || self.positives > total {
            return Err(TcnError::Config(format!(
                "positives per image must lie in 1..={total}"
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(TcnError::Config("noise_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Ground truth behind a synthetic dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub factors: TuckerTriple,
    /// Linear map from features to the flattened core.
    pub core_map: Matrix,
    /// Zero-shot triplets scrubbed from training, in tensor order.
    pub holdout: Vec<Triplet>,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal) * scale)
}

/// Linear indices of the `k` largest entries, ties by ascending index.
fn top_indices(t: &Tensor3, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..t.len()).collect();
    let d = t.data();
    idx.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Draws train and test sets from a planted Tucker model.
///
/// Features are standard normal; each image's logits are
/// `tucker_compose(fold(M·x), A*, B*, C*)` and its top `positives` entries
/// become annotations. Each positive is swapped for a uniform random triplet
/// with probability `noise_rate`. Finally `holdout` triplet types drawn from
/// the test annotations are deleted from every training image.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Dataset, Dataset, PlantedTruth)> {
    cfg.validate()?;
    let (n, m, d) = (cfg.n_objects, cfg.n_predicates, cfg.feature_dim);
    let Ranks(r1, r2, r3) = cfg.true_ranks;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let factors = TuckerTriple::new(
        normal_matrix(&mut rng, n, r1, 1.0 / (r1 as f64).sqrt()),
        normal_matrix(&mut rng, n, r2, 1.0 / (r2 as f64).sqrt()),
        normal_matrix(&mut rng, m, r3, 1.0 / (r3 as f64).sqrt()),
    )?;
    let core_map = normal_matrix(&mut rng, r1 * r2 * r3, d, 1.0 / (d as f64).sqrt());
    let total = n * n * m;

    let draw = |split: Split, count: usize, rng: &mut ChaCha8Rng| -> Result<Dataset> {
        let mut ds = Dataset::new(n, m, d)?;
        ds.split = Some(split);
        let prefix = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        for idx in 0..count {
            let features: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let core = Tensor3::new(cfg.true_ranks.as_dims(), core_map.matvec(&features)?)?;
            let logits = tucker_compose(&core, &factors)?;
            let mut chosen = top_indices(&logits, cfg.positives);
            for slot in 0..chosen.len() {
                if cfg.noise_rate > 0.0 && rng.random::<f64>() < cfg.noise_rate {
                    loop {
                        let candidate = rng.random_range(0..total);
                        if !chosen.contains(&candidate) {
                            chosen[slot] = candidate;
                            break;
                        }
                        if chosen.len() == total {
                            break;
                        }
                    }
                }
            }
            let triplets = chosen
                .into_iter()
                .map(|lin| {
                    let (i, j, k) = logits.unravel(lin);
                    Triplet::from_tensor_index(i, j, k)
                })
                .collect();
            ds.push(Sample {
                id: format!("{prefix}-{idx:05}"),
                features,
                triplets,
            })?;
        }
        Ok(ds)
    };
    let mut train = draw(Split::Train, cfg.n_train, &mut rng)?;
    let test = draw(Split::Test, cfg.n_test, &mut rng)?;

    let candidates: Vec<Triplet> = test.triplet_counts().into_keys().collect();
    if cfg.holdout > candidates.len() {
        return Err(TcnError::Generation(format!(
            "requested {} held-out triplets but test annotations only contain {}",
            cfg.holdout,
            candidates.len()
        )));
    }
    let mut holdout: Vec<Triplet> = candidates
        .choose_multiple(&mut rng, cfg.holdout)
        .copied()
        .collect();
    holdout.sort();
    if !holdout.is_empty() {
        let scrub: BTreeSet<Triplet> = holdout.iter().copied().collect();
        for s in &mut train.samples {
            s.triplets.retain(|t| !scrub.contains(t));
        }
    }
    Ok((
        train,
        test,
        PlantedTruth {
            factors,
            core_map,
            holdout,
        },
    ))
}

const CHECKPOINT_MAGIC: &[u8; 3] = b"TCN";
const CHECKPOINT_VERSION: u8 = b'1';
const HEADER_WORDS: usize = 7;

/// Writes a checkpoint: magic `TCN1`, seven little-endian `u32`s
/// `(variant, n, m, d, r1, r2, r3)`, then little-endian `f64` arrays
/// `W, b` followed by `A, B, C` (Tucker, code 0), nothing (CP, code 1,
/// ranks `(R,R,R)`) or the shared core `S` (ABC, code 2).
pub fn save_checkpoint(p: &TcnParams, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&checkpoint_bytes(p)?)?;
    w.flush()?;
    Ok(())
}

pub fn checkpoint_bytes(p: &TcnParams) -> Result<Vec<u8>> {
    p.validate()?;
    let mut out = Vec::with_capacity(4 + 4 * HEADER_WORDS + 8 * p.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    let Ranks(r1, r2, r3) = p.ranks;
    for word in [
        p.variant.code() as usize,
        p.n_objects,
        p.n_predicates,
        p.feature_dim,
        r1,
        r2,
        r3,
    ] {
        let word = u32::try_from(word)
            .map_err(|_| TcnError::Persistence(format!("header value {word} exceeds u32")))?;
        out.extend_from_slice(&word.to_le_bytes());
    }
    for array in p.arrays() {
        for v in array {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TcnParams> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    checkpoint_from_bytes(&bytes)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<TcnParams> {
    if bytes.len() < 4 || &bytes[..3] != CHECKPOINT_MAGIC {
        return Err(TcnError::Persistence("bad magic, not a TCN checkpoint".into()));
    }
    if bytes[3] != CHECKPOINT_VERSION {
        return Err(TcnError::Persistence(format!(
            "unsupported checkpoint version {:?}",
            bytes[3] as char
        )));
    }
    let header_end = 4 + 4 * HEADER_WORDS;
    if bytes.len() < header_end {
        return Err(TcnError::Persistence("truncated header".into()));
    }
    let word = |i: usize| {
        let o = 4 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
    };
    let variant = Variant::from_code(word(0) as u32)
        .ok_or_else(|| TcnError::Persistence(format!("unknown variant code {}", word(0))))?;
    let (n, m, d) = (word(1), word(2), word(3));
    let ranks = Ranks(word(4), word(5), word(6));

    // Shapes come from a zero-initialized model of the same header.
    let mut params = crate::model::init_params(n, m, ranks, d, variant, 0, None)
        .map_err(|e| TcnError::Persistence(format!("invalid header: {e}")))?;
    let expected: usize = params.parameter_count();
    let body = &bytes[header_end..];
    if body.len() != expected * 8 {
        return Err(TcnError::Persistence(format!(
            "expected {} bytes of parameters, found {}",
            expected * 8,
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for array in params.arrays_mut() {
        for slot in array.iter_mut() {
            let v = values.next().unwrap();
            if !v.is_finite() {
                return Err(TcnError::Persistence("non-finite parameter value".into()));
            }
            *slot = v;
        }
    }
    Ok(params)
}
