//! Embedding learning for discontinuous two-word contexts ("minimal
//! contexts") and the markable animacy-classification pipeline built on
//! top of them.
//!
//! A minimal context (MC) is an ordered pair of words enclosing a gap,
//! written as a single token such as `helped*to`. The crate covers the
//! whole pipeline:
//!
//! * [`corpus`] — tokenization, vocabulary construction, and the corpus
//!   reformatting that turns every gapped word pair into a two-token
//!   training sentence;
//! * [`embed`] — a skip-gram negative-sampling trainer over those pairs
//!   (and over plain text for baseline word vectors), plus the text
//!   embedding-file format;
//! * [`coref`] — a coreference-column parser, pronoun-trigger chain
//!   labeling, markable extraction, and the train/test split;
//! * [`feats`] — the three feature representations compared by the
//!   toolkit (MC embedding, word-embedding concatenation, bag of words);
//! * [`clf`] — a class-weighted linear hinge-loss classifier trained by
//!   dual coordinate descent;
//! * [`eval`] — accuracy, exact McNemar comparison, and a synthetic
//!   benchmark generator.

pub mod clf;
pub mod coref;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod feats;

pub use clf::{ClassWeights, FitConfig, LinearModel};
pub use coref::{AnimacyLabel, Chain, MarkableExample, Mention};
pub use corpus::{GapConfig, MinimalContext, Token, Vocabulary};
pub use embed::{EmbeddingStore, TrainConfig};
pub use feats::FeatureVector;
