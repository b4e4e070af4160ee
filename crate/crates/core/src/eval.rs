//! Accuracy, paired significance testing, and the synthetic benchmark.
//!
//! The synthetic benchmark generates a corpus where each minimal
//! context type selects animate or inanimate filler nouns. Classifier
//! test MC types are disjoint from classifier training types while all
//! types appear in the embedding corpus, so it isolates exactly the
//! generalization the MC representation is meant to provide: a
//! bag-of-words model sees only unknown enclosing words at test time,
//! an embedding of the unseen context still carries its class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::coref::{AnimacyLabel, MarkableExample};
use crate::corpus::Token;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction/gold length mismatch: {preds} vs {golds}")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("cannot evaluate an empty prediction set")]
    Empty,
    #[error("infeasible synthetic config: {0}")]
    InfeasibleConfig(String),
    #[error("comparison needs at least one system")]
    NoSystems,
}

/// Accuracy with per-class breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub n: usize,
    pub animate_correct: usize,
    pub animate_total: usize,
    pub inanimate_correct: usize,
    pub inanimate_total: usize,
}

pub fn accuracy(preds: &[AnimacyLabel], golds: &[AnimacyLabel]) -> Result<EvalReport, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut report = EvalReport {
        accuracy: 0.0,
        n: preds.len(),
        animate_correct: 0,
        animate_total: 0,
        inanimate_correct: 0,
        inanimate_total: 0,
    };
    for (p, g) in preds.iter().zip(golds) {
        let correct = p == g;
        match g {
            AnimacyLabel::Animate => {
                report.animate_total += 1;
                report.animate_correct += correct as usize;
            }
            AnimacyLabel::Inanimate => {
                report.inanimate_total += 1;
                report.inanimate_correct += correct as usize;
            }
        }
    }
    report.accuracy =
        (report.animate_correct + report.inanimate_correct) as f64 / report.n as f64;
    Ok(report)
}

/// Exact two-sided McNemar test on the discordant pairs of two
/// prediction vectors sharing one gold standard.
///
/// With `n01` items only system A gets right and `n10` items only
/// system B gets right, the p-value is the two-sided binomial tail
/// `min(1, 2 * sum_{k <= min(n01,n10)} C(N,k) / 2^N)` for
/// `N = n01 + n10`; no discordant pairs give p = 1.
pub fn mcnemar(
    preds_a: &[AnimacyLabel],
    preds_b: &[AnimacyLabel],
    golds: &[AnimacyLabel],
) -> Result<f64, EvalError> {
    if preds_a.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds_a.len(),
            golds: golds.len(),
        });
    }
    if preds_b.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds_b.len(),
            golds: golds.len(),
        });
    }
    let mut n01 = 0u64;
    let mut n10 = 0u64;
    for ((a, b), g) in preds_a.iter().zip(preds_b).zip(golds) {
        match (a == g, b == g) {
            (true, false) => n01 += 1,
            (false, true) => n10 += 1,
            _ => {}
        }
    }
    Ok(binomial_two_sided(n01.min(n10), n01 + n10))
}

/// `min(1, 2 * P[Binom(n, 1/2) <= k])` via the term recurrence
/// `C(n, k+1) = C(n, k) * (n-k) / (k+1)`. Large `n` switches to log
/// space where `0.5^n` would underflow; the result is clamped to the
/// smallest positive value so p stays in (0, 1].
fn binomial_two_sided(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let p = if n <= 700 {
        let mut term = 0.5f64.powi(n as i32);
        let mut tail = term;
        for i in 0..k {
            term *= (n - i) as f64 / (i + 1) as f64;
            tail += term;
        }
        2.0 * tail
    } else {
        let mut ln_term = -(n as f64) * std::f64::consts::LN_2;
        let mut ln_tail = ln_term;
        for i in 0..k {
            ln_term += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
            let (hi, lo) = if ln_tail >= ln_term {
                (ln_tail, ln_term)
            } else {
                (ln_term, ln_tail)
            };
            ln_tail = hi + (lo - hi).exp().ln_1p();
        }
        2.0 * ln_tail.exp()
    };
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Synthetic benchmark configuration. The defaults are the standard
/// desk-scale benchmark used by the acceptance suite.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_animate_mcs: usize,
    pub n_inanimate_mcs: usize,
    pub n_neutral_mcs: usize,
    pub nouns_per_class: usize,
    pub sentences: usize,
    /// Probability that a sentence draws its noun from the opposite
    /// pool; must stay below 0.5 so the signal dominates.
    pub noise: f64,
    /// Selective MC types per class held out for the classifier test
    /// split. They still occur in the corpus.
    pub test_mcs_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_animate_mcs: 40,
            n_inanimate_mcs: 40,
            n_neutral_mcs: 20,
            nouns_per_class: 30,
            sentences: 200_000,
            noise: 0.1,
            test_mcs_per_class: 10,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |msg: String| Err(EvalError::InfeasibleConfig(msg));
        if !(0.0..0.5).contains(&self.noise) {
            return fail(format!("noise {} outside [0, 0.5)", self.noise));
        }
        if self.nouns_per_class == 0 {
            return fail("nouns_per_class must be >= 1".to_owned());
        }
        if self.sentences == 0 {
            return fail("sentences must be >= 1".to_owned());
        }
        if self.test_mcs_per_class == 0 {
            return fail("test_mcs_per_class must be >= 1".to_owned());
        }
        for (name, count) in [
            ("animate", self.n_animate_mcs),
            ("inanimate", self.n_inanimate_mcs),
        ] {
            if self.test_mcs_per_class >= count {
                return fail(format!(
                    "test split of {} needs more than the {count} {name} MC types",
                    self.test_mcs_per_class
                ));
            }
        }
        Ok(())
    }
}

/// A generated benchmark: raw corpus lines plus gold examples already
/// split by MC type.
#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub corpus_lines: Vec<String>,
    pub train: Vec<MarkableExample>,
    pub test: Vec<MarkableExample>,
}

#[derive(Clone, Copy, PartialEq)]
enum McClass {
    Animate,
    Inanimate,
    Neutral,
}

/// Generates the benchmark. Deterministic for a fixed seed.
///
/// Every sentence is `L_i noun R_i` for a uniformly drawn MC type; the
/// noun comes from the type's class pool with probability `1 - noise`
/// (neutral types draw from both pools evenly). The gold label of an
/// example is the class of its MC type, not of the sampled noun.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<SyntheticBenchmark, EvalError> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    struct McType {
        left: Token,
        right: Token,
        class: McClass,
        held_out: bool,
    }

    let mut types = Vec::new();
    for (class, prefix, count) in [
        (McClass::Animate, "a", cfg.n_animate_mcs),
        (McClass::Inanimate, "i", cfg.n_inanimate_mcs),
        (McClass::Neutral, "n", cfg.n_neutral_mcs),
    ] {
        let mut held = vec![false; count];
        if class != McClass::Neutral {
            let mut idx: Vec<usize> = (0..count).collect();
            idx.shuffle(&mut rng);
            for &i in idx.iter().take(cfg.test_mcs_per_class) {
                held[i] = true;
            }
        }
        for i in 0..count {
            types.push(McType {
                left: Token::new_unchecked(format!("{prefix}l{i}")),
                right: Token::new_unchecked(format!("{prefix}r{i}")),
                class,
                held_out: held[i],
            });
        }
    }

    let animate_nouns: Vec<Token> = (0..cfg.nouns_per_class)
        .map(|i| Token::new_unchecked(format!("an{i}")))
        .collect();
    let inanimate_nouns: Vec<Token> = (0..cfg.nouns_per_class)
        .map(|i| Token::new_unchecked(format!("in{i}")))
        .collect();

    let mut corpus_lines = Vec::with_capacity(cfg.sentences);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for _ in 0..cfg.sentences {
        let ty = &types[rng.random_range(0..types.len())];
        let pool = match ty.class {
            McClass::Animate => {
                if rng.random::<f64>() < cfg.noise {
                    &inanimate_nouns
                } else {
                    &animate_nouns
                }
            }
            McClass::Inanimate => {
                if rng.random::<f64>() < cfg.noise {
                    &animate_nouns
                } else {
                    &inanimate_nouns
                }
            }
            McClass::Neutral => {
                if rng.random::<f64>() < 0.5 {
                    &animate_nouns
                } else {
                    &inanimate_nouns
                }
            }
        };
        let noun = &pool[rng.random_range(0..pool.len())];
        corpus_lines.push(format!("{} {} {}", ty.left, noun, ty.right));

        let label = match ty.class {
            McClass::Animate => AnimacyLabel::Animate,
            McClass::Inanimate => AnimacyLabel::Inanimate,
            McClass::Neutral => continue,
        };
        let example = MarkableExample {
            label,
            left: ty.left.clone(),
            right: ty.right.clone(),
            surface: noun.as_str().to_owned(),
        };
        if ty.held_out {
            test.push(example);
        } else {
            train.push(example);
        }
    }

    Ok(SyntheticBenchmark {
        corpus_lines,
        train,
        test,
    })
}

/// One evaluated system inside a [`Comparison`].
#[derive(Debug, Clone)]
pub struct SystemEval {
    pub name: String,
    pub report: EvalReport,
    /// p-values against the reference systems (None against itself).
    pub p_vs_refs: Vec<Option<f64>>,
    /// Significance marks earned against the references.
    pub marks: String,
}

/// Pairwise comparison of systems on one shared test set. The first
/// (up to) two systems act as references; any system scoring
/// significantly below a reference earns its mark (`*` for the first,
/// `†` for the second).
#[derive(Debug, Clone)]
pub struct Comparison {
    pub systems: Vec<SystemEval>,
    pub alpha: f64,
}

const REF_MARKS: [char; 2] = ['*', '†'];

pub fn compare_systems(
    names: &[String],
    predictions: &[Vec<AnimacyLabel>],
    golds: &[AnimacyLabel],
    alpha: f64,
) -> Result<Comparison, EvalError> {
    if names.is_empty() || names.len() != predictions.len() {
        return Err(EvalError::NoSystems);
    }
    let reports: Vec<EvalReport> = predictions
        .iter()
        .map(|preds| accuracy(preds, golds))
        .collect::<Result<_, _>>()?;
    let n_refs = names.len().min(2);

    let mut systems = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let mut p_vs_refs = Vec::with_capacity(n_refs);
        let mut marks = String::new();
        for r in 0..n_refs {
            if r == i {
                p_vs_refs.push(None);
                continue;
            }
            let p = mcnemar(&predictions[r], &predictions[i], golds)?;
            if reports[i].accuracy < reports[r].accuracy && p < alpha {
                marks.push(REF_MARKS[r]);
            }
            p_vs_refs.push(Some(p));
        }
        systems.push(SystemEval {
            name: name.clone(),
            report: reports[i].clone(),
            p_vs_refs,
            marks,
        });
    }
    Ok(Comparison { systems, alpha })
}

impl Comparison {
    /// Plain-text accuracy table with significance marks.
    pub fn format_table(&self) -> String {
        let width = self
            .systems
            .iter()
            .map(|s| s.name.len())
            .max()
            .unwrap_or(0)
            .max("representation".len());
        let mut out = String::new();
        out.push_str(&format!("{:<width$}  accuracy\n", "representation"));
        for sys in &self.systems {
            out.push_str(&format!(
                "{:<width$}  {:.3}{}\n",
                sys.name, sys.report.accuracy, sys.marks
            ));
        }
        let refs: Vec<&str> = self
            .systems
            .iter()
            .take(REF_MARKS.len())
            .map(|s| s.name.as_str())
            .collect();
        for (mark, name) in REF_MARKS.iter().zip(&refs) {
            out.push_str(&format!(
                "{mark} significantly below {name} (exact McNemar, alpha = {})\n",
                self.alpha
            ));
        }
        out
    }

    /// Machine-readable TSV: one row per system.
    pub fn to_tsv(&self) -> String {
        let n_refs = self.systems.len().min(2);
        let mut out = String::from("system\taccuracy\tcorrect\tn\tmarks");
        for r in 0..n_refs {
            out.push_str(&format!("\tp_vs_{}", self.systems[r].name));
        }
        out.push('\n');
        for sys in &self.systems {
            let correct = sys.report.animate_correct + sys.report.inanimate_correct;
            out.push_str(&format!(
                "{}\t{:.6}\t{}\t{}\t{}",
                sys.name,
                sys.report.accuracy,
                correct,
                sys.report.n,
                if sys.marks.is_empty() { "-" } else { &sys.marks }
            ));
            for r in 0..n_refs {
                match sys.p_vs_refs.get(r).copied().flatten() {
                    Some(p) => out.push_str(&format!("\t{p:.6e}")),
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }
}
