//! Tokenization, vocabulary construction, and corpus reformatting.
//!
//! The reformatting scheme turns every gapped pair of words into a
//! two-token sentence: the pair is written as a single token
//! `left*right` followed by one of the words from the gap. A trigram
//! `a b c` with gap width 2 therefore becomes the line `a*c b`.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

/// Errors produced while building or reading corpus artifacts.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty token")]
    EmptyToken,
    #[error("token {0:?} contains whitespace")]
    WhitespaceInToken(String),
    #[error("{path}:{line}: expected exactly two tokens per pair line, got {got}")]
    MalformedPairLine {
        path: String,
        line: usize,
        got: usize,
    },
    #[error("{path}:{line}: malformed vocabulary line")]
    MalformedVocabLine { path: String, line: usize },
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("invalid gap config: k_min={k_min}, k_max={k_max}")]
    InvalidGapConfig { k_min: usize, k_max: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A single corpus token: nonempty and free of whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Validates and wraps a token string.
    pub fn new(text: impl Into<String>) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.is_empty() {
            return Err(CorpusError::EmptyToken);
        }
        if text.chars().any(char::is_whitespace) {
            return Err(CorpusError::WhitespaceInToken(text));
        }
        Ok(Token(text))
    }

    /// Wraps a string already known to satisfy the token invariants.
    pub(crate) fn new_unchecked(text: String) -> Self {
        debug_assert!(!text.is_empty() && !text.chars().any(char::is_whitespace));
        Token(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Splits a line on Unicode whitespace. No other normalization is applied.
pub fn tokenize_line(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .map(|w| Token::new_unchecked(w.to_owned()))
        .collect()
}

/// An ordered pair of words enclosing a gap, e.g. `helped … to`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MinimalContext {
    pub left: Token,
    pub right: Token,
}

impl MinimalContext {
    pub fn new(left: Token, right: Token) -> Self {
        MinimalContext { left, right }
    }

    /// Encodes the pair as a single token `left*right`.
    ///
    /// Literal `*` and `\` inside either word are escaped as `\*` and
    /// `\\`, so the first unescaped `*` is always the separator and
    /// [`MinimalContext::decode`] is an exact inverse.
    pub fn encode(&self) -> Token {
        let mut out = String::with_capacity(self.left.as_str().len() + self.right.as_str().len() + 1);
        escape_into(&mut out, self.left.as_str());
        out.push('*');
        escape_into(&mut out, self.right.as_str());
        Token::new_unchecked(out)
    }

    /// Decodes a token produced by [`MinimalContext::encode`].
    ///
    /// Returns `None` for anything that is not a canonical encoding:
    /// no unescaped separator, more than one, a dangling escape, an
    /// escape of a character that never needs escaping, or an empty
    /// side.
    pub fn decode(text: &str) -> Option<MinimalContext> {
        let mut left = String::new();
        let mut right = String::new();
        let mut side = &mut left;
        let mut seen_sep = false;
        let mut chars = text.chars();
        while let Some(ch) = chars.next() {
            match ch {
                '\\' => match chars.next() {
                    Some(esc @ ('*' | '\\')) => side.push(esc),
                    _ => return None,
                },
                '*' => {
                    if seen_sep {
                        return None;
                    }
                    seen_sep = true;
                    side = &mut right;
                }
                c => side.push(c),
            }
        }
        if !seen_sep || left.is_empty() || right.is_empty() {
            return None;
        }
        // Whitespace can only appear here if the input was not a Token.
        Some(MinimalContext {
            left: Token::new(left).ok()?,
            right: Token::new(right).ok()?,
        })
    }

    /// True if `text` is a canonical encoded minimal context.
    pub fn is_encoded(text: &str) -> bool {
        Self::decode(text).is_some()
    }
}

fn escape_into(buf: &mut String, part: &str) {
    for ch in part.chars() {
        match ch {
            '*' => buf.push_str("\\*"),
            '\\' => buf.push_str("\\\\"),
            c => buf.push(c),
        }
    }
}

/// Range of gap widths to extract, measured as the positional distance
/// between the two enclosing words. `k = 2` means one word in the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapConfig {
    k_min: usize,
    k_max: usize,
}

impl GapConfig {
    pub fn new(k_min: usize, k_max: usize) -> Result<Self, CorpusError> {
        if k_min < 2 || k_max < k_min {
            return Err(CorpusError::InvalidGapConfig { k_min, k_max });
        }
        Ok(GapConfig { k_min, k_max })
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }
}

/// One gapped pair: the enclosing words plus one word from the gap.
/// Borrowed so that a sentence can be expanded without allocating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapPair<'a> {
    pub left: &'a Token,
    pub right: &'a Token,
    pub inner: &'a Token,
}

impl GapPair<'_> {
    pub fn to_context(&self) -> MinimalContext {
        MinimalContext::new(self.left.clone(), self.right.clone())
    }
}

/// Emits every (enclosing pair, inner word) combination of a sentence.
///
/// For each position pair `(i, j)` with `j - i = k` in the configured
/// range, one pair is emitted per inner position `m` with `i < m < j`.
/// Emission order is increasing `i`, then increasing `k`, then
/// increasing `m`. Pairs never cross the sentence boundary.
pub fn emit_gap_pairs<'a>(
    sentence: &'a [Token],
    gaps: &GapConfig,
) -> impl Iterator<Item = GapPair<'a>> + 'a {
    let len = sentence.len();
    let (k_min, k_max) = (gaps.k_min, gaps.k_max);
    (0..len).flat_map(move |i| {
        (k_min..=k_max)
            .take_while(move |k| i + k < len)
            .flat_map(move |k| {
                let j = i + k;
                (i + 1..j).map(move |m| GapPair {
                    left: &sentence[i],
                    right: &sentence[j],
                    inner: &sentence[m],
                })
            })
    })
}

/// A frozen token↔id map with occurrence counts.
///
/// IDs are dense (`0..len`). When built by [`build_vocab`], entries are
/// ordered by decreasing count with lexicographic tie-breaking, which
/// makes construction deterministic.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    entries: Vec<(Token, u64)>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from an explicit entry order (used when the
    /// order is dictated by an external file).
    pub fn from_entries(entries: Vec<(Token, u64)>) -> Result<Self, CorpusError> {
        let mut ids = HashMap::with_capacity(entries.len());
        for (i, (token, _)) in entries.iter().enumerate() {
            if ids.insert(token.as_str().to_owned(), i as u32).is_some() {
                return Err(CorpusError::DuplicateToken(token.as_str().to_owned()));
            }
        }
        Ok(Vocabulary { entries, ids })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn token(&self, id: u32) -> &Token {
        &self.entries[id as usize].0
    }

    pub fn count(&self, id: u32) -> u64 {
        self.entries[id as usize].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, u64)> {
        self.entries.iter().map(|(t, c)| (t, *c))
    }

    /// Writes `token count` lines in id order.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        for (token, count) in &self.entries {
            writeln!(out, "{token} {count}").map_err(|e| io_err(path, e))?;
        }
        out.flush().map_err(|e| io_err(path, e))
    }

    /// Reads a file written by [`Vocabulary::save`], preserving order.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
        let mut entries = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(tok), Some(count), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(CorpusError::MalformedVocabLine {
                    path: path.display().to_string(),
                    line: lineno + 1,
                });
            };
            let count: u64 = count
                .parse()
                .map_err(|_| CorpusError::MalformedVocabLine {
                    path: path.display().to_string(),
                    line: lineno + 1,
                })?;
            entries.push((Token::new_unchecked(tok.to_owned()), count));
        }
        Vocabulary::from_entries(entries)
    }
}

/// Counts a token stream and freezes it into a [`Vocabulary`].
///
/// Tokens occurring fewer than `min_count` times are dropped. IDs are
/// assigned in order of decreasing count, ties broken lexicographically,
/// so identical streams always yield identical vocabularies.
pub fn build_vocab(tokens: impl IntoIterator<Item = Token>, min_count: u64) -> Vocabulary {
    let mut counts: HashMap<Token, u64> = HashMap::new();
    for token in tokens {
        *counts.entry(token).or_insert(0) += 1;
    }
    from_counts(counts, min_count)
}

/// Same pruning and ordering rules as [`build_vocab`], starting from
/// pre-aggregated counts (useful for sharded counting).
pub fn from_counts(counts: HashMap<Token, u64>, min_count: u64) -> Vocabulary {
    let mut entries: Vec<(Token, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_entries(entries).expect("counted tokens are unique")
}

/// Streams a one-sentence-per-line corpus into the two-token pair
/// format, returning the number of pairs written.
pub fn reformat_corpus(
    input: &Path,
    output: &Path,
    gaps: &GapConfig,
) -> Result<u64, CorpusError> {
    let reader = BufReader::new(File::open(input).map_err(|e| io_err(input, e))?);
    let mut writer = BufWriter::new(File::create(output).map_err(|e| io_err(output, e))?);
    let mut written = 0u64;
    for line in reader.lines() {
        let line = line.map_err(|e| io_err(input, e))?;
        let sentence = tokenize_line(&line);
        for pair in emit_gap_pairs(&sentence, gaps) {
            let mc = MinimalContext::new(pair.left.clone(), pair.right.clone()).encode();
            writeln!(writer, "{mc} {}", pair.inner).map_err(|e| io_err(output, e))?;
            written += 1;
        }
    }
    writer.flush().map_err(|e| io_err(output, e))?;
    Ok(written)
}

/// Reads a pair-corpus file back into (mc-or-word, word) token pairs.
/// Every line must hold exactly two tokens.
pub fn read_pair_corpus(path: &Path) -> Result<Vec<(Token, Token)>, CorpusError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let tokens = tokenize_line(&line);
        if tokens.len() != 2 {
            return Err(CorpusError::MalformedPairLine {
                path: path.display().to_string(),
                line: lineno + 1,
                got: tokens.len(),
            });
        }
        let mut it = tokens.into_iter();
        pairs.push((it.next().unwrap(), it.next().unwrap()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token::new(*w).unwrap()).collect()
    }

    fn mc(left: &str, right: &str) -> MinimalContext {
        MinimalContext::new(Token::new(left).unwrap(), Token::new(right).unwrap())
    }

    #[test]
    fn tokenize_splits_on_whitespace() {
        let words: Vec<String> = tokenize_line("this tea helped me")
            .into_iter()
            .map(|t| t.as_str().to_owned())
            .collect();
        assert_eq!(words, ["this", "tea", "helped", "me"]);
        assert!(tokenize_line("").is_empty());
        let words: Vec<String> = tokenize_line("  a \t b ")
            .into_iter()
            .map(|t| t.as_str().to_owned())
            .collect();
        assert_eq!(words, ["a", "b"]);
    }

    #[test]
    fn token_rejects_empty_and_whitespace() {
        assert!(matches!(Token::new(""), Err(CorpusError::EmptyToken)));
        assert!(matches!(
            Token::new("a b"),
            Err(CorpusError::WhitespaceInToken(_))
        ));
    }

    #[test]
    fn encode_plain_pair() {
        assert_eq!(mc("helped", "to").encode().as_str(), "helped*to");
    }

    #[test]
    fn encode_escapes_stars_and_backslashes() {
        assert_eq!(mc("a*b", "c").encode().as_str(), "a\\*b*c");
        assert_eq!(mc("a\\b", "c").encode().as_str(), "a\\\\b*c");
    }

    #[test]
    fn decode_inverts_encode() {
        for (l, r) in [
            ("helped", "to"),
            ("a*b", "c"),
            ("a", "b*c"),
            ("\\", "*"),
            ("**", "\\\\"),
            ("x\\*y", "z"),
        ] {
            let original = mc(l, r);
            let decoded = MinimalContext::decode(original.encode().as_str()).unwrap();
            assert_eq!(decoded, original);
        }
    }

    #[test]
    fn decode_rejects_non_canonical() {
        for bad in ["plainword", "*x", "x*", "a*b*c", "a\\b*c", "a*b\\", "*", ""] {
            assert!(MinimalContext::decode(bad).is_none(), "{bad:?}");
        }
    }

    #[test]
    fn gap_pairs_trigram() {
        let s = toks(&["a", "b", "c"]);
        let g = GapConfig::new(2, 2).unwrap();
        let got: Vec<_> = emit_gap_pairs(&s, &g)
            .map(|p| (p.left.as_str(), p.right.as_str(), p.inner.as_str()))
            .collect();
        assert_eq!(got, [("a", "c", "b")]);
    }

    #[test]
    fn gap_pairs_fourgram_order() {
        let s = toks(&["a", "b", "c", "d"]);
        let g = GapConfig::new(2, 3).unwrap();
        let got: Vec<_> = emit_gap_pairs(&s, &g)
            .map(|p| (p.left.as_str(), p.right.as_str(), p.inner.as_str()))
            .collect();
        assert_eq!(
            got,
            [
                ("a", "c", "b"),
                ("a", "d", "b"),
                ("a", "d", "c"),
                ("b", "d", "c"),
            ]
        );
    }

    #[test]
    fn gap_pairs_short_sentence_is_empty() {
        let g = GapConfig::new(2, 5).unwrap();
        assert_eq!(emit_gap_pairs(&toks(&["a", "b"]), &g).count(), 0);
        assert_eq!(emit_gap_pairs(&[], &g).count(), 0);
    }

    #[test]
    fn gap_pair_count_matches_formula() {
        // For k in [2,3]: (n-2) + 2*max(0, n-3).
        let g = GapConfig::new(2, 3).unwrap();
        for n in 0..=12usize {
            let s: Vec<Token> = (0..n)
                .map(|i| Token::new(format!("w{i}")).unwrap())
                .collect();
            let expect = n.saturating_sub(2) + 2 * n.saturating_sub(3);
            assert_eq!(emit_gap_pairs(&s, &g).count(), expect, "n={n}");
        }
        let s: Vec<Token> = (0..6).map(|i| Token::new(format!("w{i}")).unwrap()).collect();
        assert_eq!(emit_gap_pairs(&s, &g).count(), 10);
    }

    #[test]
    fn gap_config_validation() {
        assert!(GapConfig::new(1, 2).is_err());
        assert!(GapConfig::new(3, 2).is_err());
        assert!(GapConfig::new(2, 2).is_ok());
    }

    #[test]
    fn vocab_orders_by_count_then_token() {
        let v = build_vocab(toks(&["a", "a", "b"]), 1);
        let entries: Vec<_> = v.iter().map(|(t, c)| (t.as_str().to_owned(), c)).collect();
        assert_eq!(entries, [("a".to_owned(), 2), ("b".to_owned(), 1)]);
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));
    }

    #[test]
    fn vocab_prunes_below_min_count() {
        let v = build_vocab(toks(&["a", "a", "b"]), 2);
        assert_eq!(v.len(), 1);
        assert_eq!(v.token(0).as_str(), "a");
        assert!(v.id("b").is_none());
    }

    #[test]
    fn vocab_breaks_ties_lexicographically() {
        let v = build_vocab(toks(&["b", "a"]), 1);
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));
    }

    #[test]
    fn vocab_empty_stream() {
        let v = build_vocab(Vec::new(), 1);
        assert!(v.is_empty());
    }

    #[test]
    fn vocab_rejects_duplicates() {
        let entries = vec![
            (Token::new("a").unwrap(), 2),
            (Token::new("a").unwrap(), 1),
        ];
        assert!(matches!(
            Vocabulary::from_entries(entries),
            Err(CorpusError::DuplicateToken(_))
        ));
    }

    #[test]
    fn reformat_and_reread_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus.txt");
        let pairs = dir.path().join("pairs.txt");
        std::fs::write(&corpus, "a b c d\nx y\nq r s\n").unwrap();
        let g = GapConfig::new(2, 3).unwrap();
        let n = reformat_corpus(&corpus, &pairs, &g).unwrap();
        assert_eq!(n, 5);

        let read_back = read_pair_corpus(&pairs).unwrap();
        let mut expect = Vec::new();
        for line in ["a b c d", "x y", "q r s"] {
            let s = tokenize_line(line);
            for p in emit_gap_pairs(&s, &g) {
                expect.push((p.to_context().encode(), p.inner.clone()));
            }
        }
        assert_eq!(read_back, expect);
    }

    #[test]
    fn pair_corpus_rejects_wrong_arity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.txt");
        std::fs::write(&path, "a*c b\none\n").unwrap();
        match read_pair_corpus(&path) {
            Err(CorpusError::MalformedPairLine { line, got, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(got, 1);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }
}
