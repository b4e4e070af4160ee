//! Skip-gram negative-sampling trainer and embedding persistence.
//!
//! The trainer consumes directed `(center, context)` token-id pairs; a
//! two-token pair sentence `l*r w` expands to the two directed pairs
//! `(l*r, w)` and `(w, l*r)`, so pair tokens and plain words are trained
//! simultaneously in one parameter space.
//!
//! With one worker the trainer is bit-reproducible for a fixed seed.
//! With several workers all of them update the shared matrices without
//! locks (the usual tolerated data race of this model family); that mode
//! guarantees memory safety and finite parameters, not reproducibility.

use std::cell::Cell;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::corpus::{MinimalContext, Token, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("negative-sampling table size {table_size} is smaller than the vocabulary ({vocab})")]
    TableTooSmall { table_size: usize, vocab: usize },
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenIdOutOfRange { id: u32, vocab: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training pairs left after vocabulary filtering")]
    EmptyTrainingSet,
    #[error("{path}:1: malformed header, expected \"N D\"")]
    MalformedHeader { path: String },
    #[error("{path}:{line}: expected {expected} vector fields, got {got}")]
    WrongFieldCount {
        path: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{path}:{line}: non-numeric vector field {field:?}")]
    NonNumericField {
        path: String,
        line: usize,
        field: String,
    },
    #[error("{path}:{line}: duplicate token {token:?}")]
    DuplicateToken {
        path: String,
        line: usize,
        token: String,
    },
    #[error("{path}: expected {expected} rows, got {got}")]
    RowCountMismatch {
        path: String,
        expected: usize,
        got: usize,
    },
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("dimension mismatch: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> EmbedError {
    EmbedError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Trainer hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub initial_lr: f64,
    /// Floor of the linear learning-rate decay.
    pub min_lr: f64,
    pub seed: u64,
    /// Exponent applied to counts in the negative-sampling distribution.
    pub unigram_power: f64,
    pub table_size: usize,
    /// Context window; 1 suffices for two-token pair sentences.
    pub window: usize,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 200,
            epochs: 5,
            negatives: 5,
            initial_lr: 0.025,
            min_lr: 0.025 * 1e-4,
            seed: 1,
            unigram_power: 0.75,
            table_size: 10_000_000,
            window: 1,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let fail = |msg: &str| Err(EmbedError::InvalidConfig(msg.to_owned()));
        if self.dim < 1 {
            return fail("dim must be >= 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be >= 1");
        }
        if self.negatives < 1 {
            return fail("negatives must be >= 1");
        }
        if !(self.initial_lr > 0.0) {
            return fail("initial_lr must be positive");
        }
        if !(self.min_lr > 0.0) || self.min_lr >= self.initial_lr {
            return fail("min_lr must be positive and below initial_lr");
        }
        if !(self.unigram_power > 0.0) {
            return fail("unigram_power must be positive");
        }
        if self.window < 1 {
            return fail("window must be >= 1");
        }
        if self.workers < 1 {
            return fail("workers must be >= 1");
        }
        Ok(())
    }
}

/// Numerically stable `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Exact logistic function.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Two parameter matrices over a shared vocabulary. The published
/// embedding of a token is its row of the input matrix; output rows
/// exist only as the negative-sampling context side.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
}

/// Which rows [`EmbeddingStore::save`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveFilter {
    All,
    /// Keep only tokens that are canonical encoded minimal contexts,
    /// discarding the word rows trained alongside them.
    EncodedMcOnly,
}

impl EmbeddingStore {
    /// Fresh store: input rows i.i.d. uniform on `[-0.5/dim, 0.5/dim]`,
    /// output rows zero. Deterministic for a fixed seed.
    pub fn init(vocab: Vocabulary, dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if vocab.is_empty() {
            return Err(EmbedError::EmptyVocabulary);
        }
        if dim < 1 {
            return Err(EmbedError::InvalidConfig("dim must be >= 1".to_owned()));
        }
        let n = vocab.len();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let input = (0..n * dim)
            .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
            .collect();
        Ok(EmbeddingStore {
            vocab,
            dim,
            input,
            output: vec![0.0; n * dim],
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_row(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.input[i..i + self.dim]
    }

    pub fn output_row(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.output[i..i + self.dim]
    }

    pub fn input_row_mut(&mut self, id: u32) -> &mut [f64] {
        let i = id as usize * self.dim;
        &mut self.input[i..i + self.dim]
    }

    pub fn output_row_mut(&mut self, id: u32) -> &mut [f64] {
        let i = id as usize * self.dim;
        &mut self.output[i..i + self.dim]
    }

    /// Published embedding lookup by token text.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.id(token).map(|id| self.input_row(id))
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(self.output.iter()).all(|v| v.is_finite())
    }

    fn check_id(&self, id: u32) -> Result<(), EmbedError> {
        if (id as usize) < self.vocab.len() {
            Ok(())
        } else {
            Err(EmbedError::TokenIdOutOfRange {
                id,
                vocab: self.vocab.len(),
            })
        }
    }

    /// One SGD step on a positive `(center, context)` pair plus sampled
    /// negatives. Returns the negative log-likelihood of the sample
    /// before the update.
    ///
    /// The gradient for the center vector is accumulated from the
    /// pre-update output vectors and applied once at the end.
    pub fn sgns_update(
        &mut self,
        center: u32,
        context: u32,
        negatives: &[u32],
        lr: f64,
    ) -> Result<f64, EmbedError> {
        let mut acc = vec![0.0; self.dim];
        self.sgns_update_with(center, context, negatives, lr, &mut acc)
    }

    pub(crate) fn sgns_update_with(
        &mut self,
        center: u32,
        context: u32,
        negatives: &[u32],
        lr: f64,
        acc: &mut [f64],
    ) -> Result<f64, EmbedError> {
        self.check_id(center)?;
        self.check_id(context)?;
        for &n in negatives {
            self.check_id(n)?;
        }
        let dim = self.dim;
        let input = Cell::from_mut(self.input.as_mut_slice()).as_slice_of_cells();
        let output = Cell::from_mut(self.output.as_mut_slice()).as_slice_of_cells();
        Ok(sgns_step(
            input, output, dim, center, context, negatives, lr, acc,
        ))
    }

    /// Writes the vocabulary and input matrix as text: a `N D` header,
    /// then one `token v1 .. vD` line per kept row. Values carry 17
    /// significant digits, enough to reproduce every `f64` bit-exactly.
    /// Returns the number of rows written.
    pub fn save(&self, path: &Path, filter: SaveFilter) -> Result<usize, EmbedError> {
        let keep: Vec<u32> = (0..self.vocab.len() as u32)
            .filter(|&id| match filter {
                SaveFilter::All => true,
                SaveFilter::EncodedMcOnly => {
                    MinimalContext::is_encoded(self.vocab.token(id).as_str())
                }
            })
            .collect();
        let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        writeln!(out, "{} {}", keep.len(), self.dim).map_err(|e| io_err(path, e))?;
        let rows = keep.len();
        for id in keep {
            write!(out, "{}", self.vocab.token(id)).map_err(|e| io_err(path, e))?;
            for v in self.input_row(id) {
                write!(out, " {v:.16e}").map_err(|e| io_err(path, e))?;
            }
            writeln!(out).map_err(|e| io_err(path, e))?;
        }
        out.flush().map_err(|e| io_err(path, e))?;
        Ok(rows)
    }

    /// Reads a file written by [`EmbeddingStore::save`] (or any external
    /// embedding file in the same text format; the dimension comes from
    /// the header). Counts are unknown for loaded files and set to 1;
    /// output rows are zero.
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let p = || path.display().to_string();
        let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
        let mut lines = reader.lines().enumerate();

        let Some((_, header)) = lines.next() else {
            return Err(EmbedError::MalformedHeader { path: p() });
        };
        let header = header.map_err(|e| io_err(path, e))?;
        let mut fields = header.split_whitespace();
        let (Some(n), Some(d), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(EmbedError::MalformedHeader { path: p() });
        };
        let (Ok(n), Ok(dim)) = (n.parse::<usize>(), d.parse::<usize>()) else {
            return Err(EmbedError::MalformedHeader { path: p() });
        };
        if dim == 0 {
            return Err(EmbedError::MalformedHeader { path: p() });
        }
        if n == 0 {
            return Err(EmbedError::EmptyVocabulary);
        }

        let mut entries: Vec<(Token, u64)> = Vec::with_capacity(n);
        let mut input = Vec::with_capacity(n * dim);
        let mut seen = std::collections::HashSet::with_capacity(n);
        let mut rows = 0usize;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if rows == n {
                return Err(EmbedError::RowCountMismatch {
                    path: p(),
                    expected: n,
                    got: rows + 1,
                });
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a first field");
            let values: Vec<&str> = fields.collect();
            if values.len() != dim {
                return Err(EmbedError::WrongFieldCount {
                    path: p(),
                    line: lineno,
                    expected: dim,
                    got: values.len(),
                });
            }
            if !seen.insert(token.to_owned()) {
                return Err(EmbedError::DuplicateToken {
                    path: p(),
                    line: lineno,
                    token: token.to_owned(),
                });
            }
            for v in values {
                input.push(v.parse::<f64>().map_err(|_| EmbedError::NonNumericField {
                    path: p(),
                    line: lineno,
                    field: v.to_owned(),
                })?);
            }
            entries.push((Token::new_unchecked(token.to_owned()), 1));
            rows += 1;
        }
        if rows != n {
            return Err(EmbedError::RowCountMismatch {
                path: p(),
                expected: n,
                got: rows,
            });
        }
        let vocab = Vocabulary::from_entries(entries).expect("duplicates already rejected");
        Ok(EmbeddingStore {
            vocab,
            dim,
            input,
            output: vec![0.0; n * dim],
        })
    }
}

/// Parameter storage the update step can run against: plain memory for
/// the deterministic single-worker path, relaxed atomics for lock-free
/// multi-worker training.
trait ParamSlice {
    fn get(&self, i: usize) -> f64;
    fn add(&self, i: usize, delta: f64);
}

impl ParamSlice for [Cell<f64>] {
    fn get(&self, i: usize) -> f64 {
        self[i].get()
    }

    fn add(&self, i: usize, delta: f64) {
        self[i].set(self[i].get() + delta);
    }
}

impl ParamSlice for [AtomicU64] {
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self[i].load(Ordering::Relaxed))
    }

    fn add(&self, i: usize, delta: f64) {
        // Racy read-modify-write, matching the usual lock-free trainer.
        let v = f64::from_bits(self[i].load(Ordering::Relaxed));
        self[i].store((v + delta).to_bits(), Ordering::Relaxed);
    }
}

#[allow(clippy::too_many_arguments)]
fn sgns_step<P: ParamSlice + ?Sized>(
    input: &P,
    output: &P,
    dim: usize,
    center: u32,
    context: u32,
    negatives: &[u32],
    lr: f64,
    acc: &mut [f64],
) -> f64 {
    let ci = center as usize * dim;
    acc.fill(0.0);
    let mut loss = 0.0;
    let targets =
        std::iter::once((context, true)).chain(negatives.iter().map(|&id| (id, false)));
    for (target, positive) in targets {
        let ti = target as usize * dim;
        let mut dot = 0.0;
        for d in 0..dim {
            dot += input.get(ci + d) * output.get(ti + d);
        }
        let (sample_loss, coeff) = if positive {
            (softplus(-dot), 1.0 - sigmoid(dot))
        } else {
            (softplus(dot), -sigmoid(dot))
        };
        loss += sample_loss;
        let g = lr * coeff;
        for d in 0..dim {
            let u = output.get(ti + d);
            acc[d] += g * u;
            output.add(ti + d, g * input.get(ci + d));
        }
    }
    for d in 0..dim {
        input.add(ci + d, acc[d]);
    }
    loss
}

/// Sampling table for the `count^power` unigram distribution.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    slots: Vec<u32>,
}

impl NegativeTable {
    /// Cumulative-threshold fill: walk ids in vocabulary order and move
    /// to the next id once `filled / table_size` reaches the cumulative
    /// probability mass. Slot counts stay within one slot of the exact
    /// proportional share.
    pub fn build(vocab: &Vocabulary, power: f64, table_size: usize) -> Result<Self, EmbedError> {
        if vocab.is_empty() {
            return Err(EmbedError::EmptyVocabulary);
        }
        if table_size < vocab.len() {
            return Err(EmbedError::TableTooSmall {
                table_size,
                vocab: vocab.len(),
            });
        }
        let total: f64 = (0..vocab.len() as u32)
            .map(|id| (vocab.count(id) as f64).powf(power))
            .sum();
        let mut slots = Vec::with_capacity(table_size);
        let mut cumulative = 0.0;
        for id in 0..vocab.len() as u32 {
            cumulative += (vocab.count(id) as f64).powf(power) / total;
            while (slots.len() as f64) / (table_size as f64) < cumulative
                && slots.len() < table_size
            {
                slots.push(id);
            }
        }
        // Guard against the cumulative sum falling short of 1.0.
        while slots.len() < table_size {
            slots.push(vocab.len() as u32 - 1);
        }
        Ok(NegativeTable { slots })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot_count(&self, id: u32) -> usize {
        self.slots.iter().filter(|&&s| s == id).count()
    }

    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        self.slots[rng.random_range(0..self.slots.len())]
    }
}

/// Loss bookkeeping returned by [`train`].
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub pairs: usize,
    pub total_updates: u64,
    pub epoch_mean_loss: Vec<f64>,
}

/// Expands sentences into directed `(center, context)` id pairs.
///
/// Out-of-vocabulary tokens are removed before windowing, as usual for
/// this trainer family. Every co-occurrence within the window yields
/// both directions, so a two-token sentence with window >= 1 yields
/// exactly two directed pairs.
pub fn directed_pairs<I>(sentences: I, vocab: &Vocabulary, window: usize) -> Vec<(u32, u32)>
where
    I: IntoIterator<Item = Vec<Token>>,
{
    let mut pairs = Vec::new();
    let mut ids: Vec<u32> = Vec::new();
    for sentence in sentences {
        ids.clear();
        ids.extend(sentence.iter().filter_map(|t| vocab.id(t.as_str())));
        for i in 0..ids.len() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(ids.len() - 1);
            for j in lo..=hi {
                if j != i {
                    pairs.push((ids[i], ids[j]));
                }
            }
        }
    }
    pairs
}

/// Trains embeddings over directed pairs.
///
/// The learning rate decays linearly from `initial_lr` to `min_lr` over
/// `epochs * pairs.len()` updates. Each update draws `negatives`
/// samples from the unigram table, redrawing any sample equal to the
/// positive context.
pub fn train(
    vocab: Vocabulary,
    pairs: &[(u32, u32)],
    config: &TrainConfig,
) -> Result<(EmbeddingStore, TrainReport), EmbedError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(EmbedError::EmptyTrainingSet);
    }
    let n = vocab.len();
    for &(a, b) in pairs {
        for id in [a, b] {
            if id as usize >= n {
                return Err(EmbedError::TokenIdOutOfRange { id, vocab: n });
            }
        }
    }
    if config.table_size < n {
        return Err(EmbedError::TableTooSmall {
            table_size: config.table_size,
            vocab: n,
        });
    }

    let mut store = EmbeddingStore::init(vocab, config.dim, config.seed)?;
    let table = NegativeTable::build(&store.vocab, config.unigram_power, config.table_size)?;
    let total_updates = (config.epochs * pairs.len()) as u64;

    let epoch_mean_loss = if config.workers == 1 {
        train_single(&mut store, &table, pairs, config, total_updates)
    } else {
        train_hogwild(&mut store, &table, pairs, config, total_updates)
    };

    Ok((
        store,
        TrainReport {
            pairs: pairs.len(),
            total_updates,
            epoch_mean_loss,
        },
    ))
}

fn lr_at(t: u64, total: u64, config: &TrainConfig) -> f64 {
    let frac = t as f64 / total as f64;
    (config.initial_lr - (config.initial_lr - config.min_lr) * frac).max(config.min_lr)
}

fn draw_negatives(
    table: &NegativeTable,
    rng: &mut ChaCha20Rng,
    context: u32,
    count: usize,
    out: &mut Vec<u32>,
) {
    out.clear();
    for _ in 0..count {
        // A sample equal to the positive context is redrawn; bail out if
        // the table is degenerate (single-token vocabulary).
        for attempt in 0..1000 {
            let id = table.sample(rng);
            if id != context {
                out.push(id);
                break;
            }
            if attempt == 999 {
                break;
            }
        }
    }
}

fn train_single(
    store: &mut EmbeddingStore,
    table: &NegativeTable,
    pairs: &[(u32, u32)],
    config: &TrainConfig,
    total_updates: u64,
) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut acc = vec![0.0; config.dim];
    let mut negatives = Vec::with_capacity(config.negatives);
    let mut epoch_mean_loss = Vec::with_capacity(config.epochs);
    let mut t = 0u64;
    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        for &(center, context) in pairs {
            let lr = lr_at(t, total_updates, config);
            draw_negatives(table, &mut rng, context, config.negatives, &mut negatives);
            loss_sum += store
                .sgns_update_with(center, context, &negatives, lr, &mut acc)
                .expect("ids validated before training");
            t += 1;
        }
        epoch_mean_loss.push(loss_sum / pairs.len() as f64);
    }
    epoch_mean_loss
}

fn train_hogwild(
    store: &mut EmbeddingStore,
    table: &NegativeTable,
    pairs: &[(u32, u32)],
    config: &TrainConfig,
    total_updates: u64,
) -> Vec<f64> {
    let dim = config.dim;
    let input: Vec<AtomicU64> = store.input.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let output: Vec<AtomicU64> = store.output.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let progress = AtomicU64::new(0);

    let workers = config.workers.min(pairs.len());
    let chunk_len = pairs.len().div_ceil(workers);
    let mut per_worker: Vec<Vec<f64>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = pairs
            .chunks(chunk_len)
            .enumerate()
            .map(|(w, chunk)| {
                let (input, output, progress, table) = (&input, &output, &progress, &table);
                scope.spawn(move || {
                    let mut rng =
                        ChaCha20Rng::seed_from_u64(config.seed.wrapping_add(1 + w as u64));
                    let mut acc = vec![0.0; dim];
                    let mut negatives = Vec::with_capacity(config.negatives);
                    let mut lr = config.initial_lr;
                    let mut sums = Vec::with_capacity(config.epochs);
                    for _ in 0..config.epochs {
                        let mut loss_sum = 0.0;
                        for &(center, context) in chunk {
                            let done = progress.fetch_add(1, Ordering::Relaxed);
                            if done % 256 == 0 {
                                lr = lr_at(done, total_updates, config);
                            }
                            draw_negatives(
                                table,
                                &mut rng,
                                context,
                                config.negatives,
                                &mut negatives,
                            );
                            loss_sum += sgns_step(
                                input.as_slice(),
                                output.as_slice(),
                                dim,
                                center,
                                context,
                                &negatives,
                                lr,
                                &mut acc,
                            );
                        }
                        sums.push(loss_sum);
                    }
                    sums
                })
            })
            .collect();
        per_worker = handles.into_iter().map(|h| h.join().unwrap()).collect();
    });

    for (dst, src) in store.input.iter_mut().zip(&input) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }
    for (dst, src) in store.output.iter_mut().zip(&output) {
        *dst = f64::from_bits(src.load(Ordering::Relaxed));
    }

    (0..config.epochs)
        .map(|e| per_worker.iter().map(|s| s[e]).sum::<f64>() / pairs.len() as f64)
        .collect()
}

/// Cosine similarity of two equal-length nonzero vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
