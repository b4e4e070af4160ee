//! The three feature representations compared for markable
//! classification: MC embedding lookup, concatenated word embeddings of
//! the enclosing words, and their bag-of-words one-hot concatenation.

use thiserror::Error;

use crate::coref::MarkableExample;
use crate::corpus::{build_vocab, Vocabulary};
use crate::embed::EmbeddingStore;

#[derive(Debug, Error)]
pub enum FeatsError {
    #[error("MC {0:?} not in embedding vocabulary")]
    McNotInVocabulary(String),
    #[error("word {0:?} not in embedding vocabulary")]
    OovWord(String),
}

/// Dense or sparse feature vector. Sparse entries hold strictly
/// increasing indices below `dim`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureVector {
    Dense { values: Vec<f64> },
    Sparse { dim: usize, entries: Vec<(usize, f64)> },
}

impl FeatureVector {
    pub fn dense(values: Vec<f64>) -> Self {
        FeatureVector::Dense { values }
    }

    pub fn sparse(dim: usize, entries: Vec<(usize, f64)>) -> Self {
        assert!(
            entries.windows(2).all(|w| w[0].0 < w[1].0),
            "sparse indices must be strictly increasing"
        );
        assert!(entries.iter().all(|&(i, _)| i < dim));
        FeatureVector::Sparse { dim, entries }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureVector::Dense { values } => values.len(),
            FeatureVector::Sparse { dim, .. } => *dim,
        }
    }

    pub fn nonzeros(&self) -> usize {
        match self {
            FeatureVector::Dense { values } => values.iter().filter(|&&v| v != 0.0).count(),
            FeatureVector::Sparse { entries, .. } => entries.len(),
        }
    }

    /// Dot product against a dense weight slice of the same dimension.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        match self {
            FeatureVector::Dense { values } => {
                values.iter().zip(weights).map(|(x, w)| x * w).sum()
            }
            FeatureVector::Sparse { entries, .. } => {
                entries.iter().map(|&(i, v)| v * weights[i]).sum()
            }
        }
    }

    /// `weights += coef * self`.
    pub fn add_scaled_to(&self, coef: f64, weights: &mut [f64]) {
        match self {
            FeatureVector::Dense { values } => {
                for (w, x) in weights.iter_mut().zip(values) {
                    *w += coef * x;
                }
            }
            FeatureVector::Sparse { entries, .. } => {
                for &(i, v) in entries {
                    weights[i] += coef * v;
                }
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        match self {
            FeatureVector::Dense { values } => values.iter().map(|v| v * v).sum(),
            FeatureVector::Sparse { entries, .. } => entries.iter().map(|&(_, v)| v * v).sum(),
        }
    }

    /// Dot product between two feature vectors of equal dimension.
    pub fn dot_fv(&self, other: &FeatureVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        match (self, other) {
            (FeatureVector::Dense { values }, _) => other.dot(values),
            (_, FeatureVector::Dense { values }) => self.dot(values),
            (
                FeatureVector::Sparse { entries: a, .. },
                FeatureVector::Sparse { entries: b, .. },
            ) => {
                let (mut i, mut j, mut sum) = (0, 0, 0.0);
                while i < a.len() && j < b.len() {
                    match a[i].0.cmp(&b[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            sum += a[i].1 * b[j].1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                sum
            }
        }
    }
}

/// How the concatenation representation treats out-of-vocabulary words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// OOV words contribute a zero subvector.
    #[default]
    Zero,
    /// OOV words are an error.
    Strict,
}

/// The MC representation: the input vector of the encoded context.
pub fn mc_feature(
    ex: &MarkableExample,
    mc_store: &EmbeddingStore,
) -> Result<FeatureVector, FeatsError> {
    let encoded = ex.encoded_context();
    let row = mc_store
        .vector(encoded.as_str())
        .ok_or_else(|| FeatsError::McNotInVocabulary(encoded.as_str().to_owned()))?;
    Ok(FeatureVector::dense(row.to_vec()))
}

/// The concatenation representation: `[vec(left); vec(right)]`, with
/// `2 * dim` columns regardless of the store dimension.
pub fn concat_feature(
    ex: &MarkableExample,
    word_store: &EmbeddingStore,
    oov: OovPolicy,
) -> Result<FeatureVector, FeatsError> {
    let dim = word_store.dim();
    let mut values = vec![0.0; 2 * dim];
    for (slot, token) in [(0, &ex.left), (1, &ex.right)] {
        match (word_store.vector(token.as_str()), oov) {
            (Some(row), _) => values[slot * dim..(slot + 1) * dim].copy_from_slice(row),
            (None, OovPolicy::Zero) => {}
            (None, OovPolicy::Strict) => {
                return Err(FeatsError::OovWord(token.as_str().to_owned()))
            }
        }
    }
    Ok(FeatureVector::dense(values))
}

/// The bag-of-words representation: two one-hot blocks of size `V`,
/// indexing the left word in the first block and the right word in the
/// second. Unknown words leave their block empty.
pub fn bow_feature(ex: &MarkableExample, word_vocab: &Vocabulary) -> FeatureVector {
    let v = word_vocab.len();
    let mut entries = Vec::with_capacity(2);
    if let Some(id) = word_vocab.id(ex.left.as_str()) {
        entries.push((id as usize, 1.0));
    }
    if let Some(id) = word_vocab.id(ex.right.as_str()) {
        entries.push((v + id as usize, 1.0));
    }
    FeatureVector::sparse(2 * v, entries)
}

/// Vocabulary of enclosing words seen in a training set; this is the
/// `V` of the bag-of-words representation.
pub fn enclosing_word_vocab(examples: &[MarkableExample]) -> Vocabulary {
    build_vocab(
        examples
            .iter()
            .flat_map(|ex| [ex.left.clone(), ex.right.clone()]),
        1,
    )
}
