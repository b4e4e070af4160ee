//! Featurization resources shared by `fit` and `eval`.

use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;

use mcembed_core::coref::MarkableExample;
use mcembed_core::corpus::Vocabulary;
use mcembed_core::embed::EmbeddingStore;
use mcembed_core::feats::{bow_feature, concat_feature, mc_feature, FeatureVector, OovPolicy};

/// The three compared representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Repr {
    /// Embedding of the encoded minimal context.
    Mc,
    /// Concatenated word embeddings of the enclosing words.
    Concat,
    /// Two one-hot blocks over the enclosing-word vocabulary.
    Bow,
}

impl Repr {
    pub fn as_str(&self) -> &'static str {
        match self {
            Repr::Mc => "mc",
            Repr::Concat => "concat",
            Repr::Bow => "bow",
        }
    }

    pub fn parse_name(name: &str) -> Result<Repr> {
        match name {
            "mc" => Ok(Repr::Mc),
            "concat" => Ok(Repr::Concat),
            "bow" => Ok(Repr::Bow),
            other => anyhow::bail!("unknown representation {other:?} (use mc, concat or bow)"),
        }
    }
}

/// Loaded lookup state needed to featurize examples for one
/// representation.
pub enum Resources {
    Mc(EmbeddingStore),
    Concat(EmbeddingStore, OovPolicy),
    Bow(Vocabulary),
}

impl Resources {
    /// `resource` is an embedding file for `mc`/`concat` and a
    /// vocabulary file for `bow`.
    pub fn load(repr: Repr, resource: &Path, oov: OovPolicy) -> Result<Self> {
        match repr {
            Repr::Mc => Ok(Resources::Mc(
                EmbeddingStore::load(resource).context("loading MC embeddings")?,
            )),
            Repr::Concat => Ok(Resources::Concat(
                EmbeddingStore::load(resource).context("loading word embeddings")?,
                oov,
            )),
            Repr::Bow => Ok(Resources::Bow(
                Vocabulary::load(resource).context("loading bag-of-words vocabulary")?,
            )),
        }
    }

    pub fn featurize(&self, examples: &[MarkableExample]) -> Result<Vec<FeatureVector>> {
        examples
            .iter()
            .map(|ex| match self {
                Resources::Mc(store) => mc_feature(ex, store).map_err(Into::into),
                Resources::Concat(store, oov) => concat_feature(ex, store, *oov).map_err(Into::into),
                Resources::Bow(vocab) => Ok(bow_feature(ex, vocab)),
            })
            .collect()
    }
}
