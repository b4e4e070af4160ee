//! Coreference-annotated document parsing, animacy chain labeling, and
//! markable extraction.
//!
//! The parser consumes the usual column format: one token per row,
//! `#begin document` / `#end document` delimiters, a blank line after
//! each sentence, and a coreference column holding `-` or `|`-joined
//! bracket tags `(id`, `id)`, `(id)`. Only the word column and the
//! coreference column are read.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::corpus::{MinimalContext, Token, Vocabulary};

#[derive(Debug, Error)]
pub enum CorefError {
    #[error("{path}:{line}: token row outside of a document")]
    RowOutsideDocument { path: String, line: usize },
    #[error("{path}:{line}: row has {got} columns, need at least {need}")]
    TooFewColumns {
        path: String,
        line: usize,
        need: usize,
        got: usize,
    },
    #[error("{path}:{line}: malformed coreference tag {tag:?}")]
    MalformedTag {
        path: String,
        line: usize,
        tag: String,
    },
    #[error("{path}:{line}: closing bracket for chain {id} without an open bracket")]
    CloseWithoutOpen { path: String, line: usize, id: u32 },
    #[error("{path}:{line}: chain {id} still open at sentence end")]
    OpenAtSentenceEnd { path: String, line: usize, id: u32 },
    #[error("{path}:{line}: chain {id} still open at document end")]
    OpenAtDocumentEnd { path: String, line: usize, id: u32 },
    #[error("{path}: missing #end document")]
    MissingEndDocument { path: String },
    #[error("{path}:{line}: {msg}")]
    MalformedTsv {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("not enough {class} examples for the test split: need {need}, have {have}")]
    TestSplitShortfall {
        class: &'static str,
        need: usize,
        have: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> CorefError {
    CorefError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One mention span, inclusive on both ends, within a single sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Mention {
    pub doc_id: String,
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    pub surface: Vec<Token>,
}

/// All mentions of one entity within a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub chain_id: String,
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnimacyLabel {
    Animate,
    Inanimate,
}

impl AnimacyLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnimacyLabel::Animate => "animate",
            AnimacyLabel::Inanimate => "inanimate",
        }
    }
}

/// Labeling outcome for a chain under the pronoun-trigger rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainLabel {
    Animate,
    Inanimate,
    /// No trigger pronoun among the mentions.
    Unlabeled,
    /// Both trigger sets fire; such chains are excluded entirely.
    Conflicted,
}

/// One labeled instance: the words enclosing a markable plus the
/// markable surface itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkableExample {
    pub label: AnimacyLabel,
    pub left: Token,
    pub right: Token,
    /// Markable tokens joined by underscores.
    pub surface: String,
}

impl MarkableExample {
    pub fn context(&self) -> MinimalContext {
        MinimalContext::new(self.left.clone(), self.right.clone())
    }

    /// Encoded `left*right` form, as found in an embedding vocabulary.
    pub fn encoded_context(&self) -> Token {
        self.context().encode()
    }
}

/// A parsed document: sentences plus its coreference chains. Chains are
/// ordered by raw id, mentions by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Vec<Token>>,
    pub chains: Vec<Chain>,
}

/// Column layout of the input rows.
#[derive(Debug, Clone, Copy)]
pub struct ConllConfig {
    pub word_col: usize,
    /// `None` selects the last column, the usual position.
    pub coref_col: Option<usize>,
}

impl Default for ConllConfig {
    fn default() -> Self {
        ConllConfig {
            word_col: 3,
            coref_col: None,
        }
    }
}

enum CorefTag {
    Open(u32),
    Close(u32),
    Singleton(u32),
}

fn parse_tags(field: &str, path: &str, line: usize) -> Result<Vec<CorefTag>, CorefError> {
    if field == "-" || field == "_" {
        return Ok(Vec::new());
    }
    let malformed = |tag: &str| CorefError::MalformedTag {
        path: path.to_owned(),
        line,
        tag: tag.to_owned(),
    };
    field
        .split('|')
        .map(|tag| {
            let open = tag.starts_with('(');
            let close = tag.ends_with(')');
            let digits = tag
                .trim_start_matches('(')
                .trim_end_matches(')');
            let id: u32 = digits.parse().map_err(|_| malformed(tag))?;
            match (open, close) {
                (true, true) => Ok(CorefTag::Singleton(id)),
                (true, false) => Ok(CorefTag::Open(id)),
                (false, true) => Ok(CorefTag::Close(id)),
                (false, false) => Err(malformed(tag)),
            }
        })
        .collect()
}

/// Parses every document in a reader. `path` is used for diagnostics
/// only.
pub fn parse_conll(
    reader: impl BufRead,
    cfg: &ConllConfig,
    path: &str,
) -> Result<Vec<Document>, CorefError> {
    struct DocState {
        doc_id: String,
        sentences: Vec<Vec<Token>>,
        current: Vec<Token>,
        // Open brackets per chain id: (sentence_index, start, line).
        open: HashMap<u32, Vec<(usize, usize, usize)>>,
        mentions: HashMap<u32, Vec<Mention>>,
    }

    let mut documents = Vec::new();
    let mut state: Option<DocState> = None;

    let end_sentence = |state: &mut DocState, line: usize| -> Result<(), CorefError> {
        if state.current.is_empty() {
            return Ok(());
        }
        if let Some((&id, _)) = state.open.iter().find(|(_, stack)| !stack.is_empty()) {
            return Err(CorefError::OpenAtSentenceEnd {
                path: path.to_owned(),
                line,
                id,
            });
        }
        state.sentences.push(std::mem::take(&mut state.current));
        Ok(())
    };

    let mut lineno = 0usize;
    for line in reader.lines() {
        lineno += 1;
        let line = line.map_err(|e| io_err(Path::new(path), e))?;
        let trimmed = line.trim();

        if let Some(rest) = trimmed.strip_prefix("#begin document") {
            let doc_id = rest.trim().to_owned();
            state = Some(DocState {
                doc_id: if doc_id.is_empty() {
                    format!("doc{}", documents.len())
                } else {
                    doc_id
                },
                sentences: Vec::new(),
                current: Vec::new(),
                open: HashMap::new(),
                mentions: HashMap::new(),
            });
            continue;
        }

        if trimmed == "#end document" {
            let mut st = state.take().ok_or(CorefError::RowOutsideDocument {
                path: path.to_owned(),
                line: lineno,
            })?;
            end_sentence(&mut st, lineno)?;
            if let Some((&id, stack)) = st.open.iter().find(|(_, stack)| !stack.is_empty()) {
                return Err(CorefError::OpenAtDocumentEnd {
                    path: path.to_owned(),
                    line: stack.last().unwrap().2,
                    id,
                });
            }
            let mut ids: Vec<u32> = st.mentions.keys().copied().collect();
            ids.sort_unstable();
            let ordinal = documents.len();
            let chains = ids
                .into_iter()
                .map(|id| {
                    let mut mentions = st.mentions.remove(&id).unwrap();
                    mentions.sort();
                    Chain {
                        chain_id: format!("{ordinal}:{id}"),
                        mentions,
                    }
                })
                .collect();
            documents.push(Document {
                doc_id: st.doc_id,
                sentences: st.sentences,
                chains,
            });
            continue;
        }

        if trimmed.is_empty() {
            if let Some(st) = state.as_mut() {
                end_sentence(st, lineno)?;
            }
            continue;
        }

        if trimmed.starts_with('#') {
            // Other comment lines are ignored.
            continue;
        }

        let st = state.as_mut().ok_or(CorefError::RowOutsideDocument {
            path: path.to_owned(),
            line: lineno,
        })?;
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        let coref_col = cfg.coref_col.unwrap_or(cols.len().saturating_sub(1));
        let need = cfg.word_col.max(coref_col) + 1;
        if cols.len() < need {
            return Err(CorefError::TooFewColumns {
                path: path.to_owned(),
                line: lineno,
                need,
                got: cols.len(),
            });
        }
        let word = Token::new(cols[cfg.word_col]).map_err(|_| CorefError::MalformedTag {
            path: path.to_owned(),
            line: lineno,
            tag: cols[cfg.word_col].to_owned(),
        })?;
        let tok_idx = st.current.len();
        let sent_idx = st.sentences.len();
        st.current.push(word);

        for tag in parse_tags(cols[coref_col], path, lineno)? {
            match tag {
                CorefTag::Open(id) => {
                    st.open.entry(id).or_default().push((sent_idx, tok_idx, lineno));
                }
                CorefTag::Close(id) => {
                    let (m_sent, m_start, _) = st
                        .open
                        .get_mut(&id)
                        .and_then(Vec::pop)
                        .ok_or(CorefError::CloseWithoutOpen {
                            path: path.to_owned(),
                            line: lineno,
                            id,
                        })?;
                    debug_assert_eq!(m_sent, sent_idx);
                    st.mentions.entry(id).or_default().push(Mention {
                        doc_id: st.doc_id.clone(),
                        sentence_index: m_sent,
                        start: m_start,
                        end: tok_idx,
                        surface: st.current[m_start..=tok_idx].to_vec(),
                    });
                }
                CorefTag::Singleton(id) => {
                    st.mentions.entry(id).or_default().push(Mention {
                        doc_id: st.doc_id.clone(),
                        sentence_index: sent_idx,
                        start: tok_idx,
                        end: tok_idx,
                        surface: vec![st.current[tok_idx].clone()],
                    });
                }
            }
        }
    }

    if state.is_some() {
        return Err(CorefError::MissingEndDocument {
            path: path.to_owned(),
        });
    }
    Ok(documents)
}

/// Parses a file on disk.
pub fn parse_conll_file(path: &Path, cfg: &ConllConfig) -> Result<Vec<Document>, CorefError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    parse_conll(reader, cfg, &path.display().to_string())
}

/// Renders a document back into two-column rows (`word coref-tag`).
///
/// Within one cell, closing tags come before opening tags so that the
/// LIFO matching of [`parse_conll`] reconstructs the same spans; a span
/// opening at a given token is emitted before any same-id span opening
/// there that ends earlier.
pub fn render_conll(doc: &Document) -> String {
    // (sentence, start, end, numeric id) for every mention.
    let mut spans: Vec<(usize, usize, usize, u32)> = Vec::new();
    for (idx, chain) in doc.chains.iter().enumerate() {
        for m in &chain.mentions {
            spans.push((m.sentence_index, m.start, m.end, idx as u32));
        }
    }

    let mut out = String::new();
    writeln!(out, "#begin document {}", doc.doc_id).unwrap();
    for (s, sentence) in doc.sentences.iter().enumerate() {
        for (t, word) in sentence.iter().enumerate() {
            let mut tags: Vec<String> = Vec::new();
            // Closes first: spans that started strictly earlier.
            let mut closes: Vec<_> = spans
                .iter()
                .filter(|&&(ms, start, end, _)| ms == s && end == t && start < t)
                .collect();
            closes.sort_by_key(|&&(_, start, _, id)| (std::cmp::Reverse(start), id));
            tags.extend(closes.iter().map(|&&(_, _, _, id)| format!("{id})")));
            // Singletons.
            for &&(_, _, _, id) in spans
                .iter()
                .filter(|&&(ms, start, end, _)| ms == s && start == t && end == t)
                .collect::<Vec<_>>()
                .iter()
            {
                tags.push(format!("({id})"));
            }
            // Opens, longest span first so inner spans close first.
            let mut opens: Vec<_> = spans
                .iter()
                .filter(|&&(ms, start, end, _)| ms == s && start == t && end > t)
                .collect();
            opens.sort_by_key(|&&(_, _, end, id)| (std::cmp::Reverse(end), id));
            tags.extend(opens.iter().map(|&&(_, _, _, id)| format!("({id}")));

            let cell = if tags.is_empty() {
                "-".to_owned()
            } else {
                tags.join("|")
            };
            writeln!(out, "{word} {cell}").unwrap();
        }
        out.push('\n');
    }
    out.push_str("#end document\n");
    out
}

const ANIMATE_TRIGGERS: [&str; 5] = ["she", "her", "he", "him", "his"];
const INANIMATE_TRIGGERS: [&str; 2] = ["it", "its"];

/// Labels a chain by its trigger pronouns. Matching is on the full
/// mention surface, case-insensitively, so only single-word mentions
/// can fire.
pub fn label_chain(chain: &Chain) -> ChainLabel {
    let mut animate = false;
    let mut inanimate = false;
    for mention in &chain.mentions {
        if mention.surface.len() != 1 {
            continue;
        }
        let word = mention.surface[0].as_str().to_lowercase();
        if ANIMATE_TRIGGERS.contains(&word.as_str()) {
            animate = true;
        }
        if INANIMATE_TRIGGERS.contains(&word.as_str()) {
            inanimate = true;
        }
    }
    match (animate, inanimate) {
        (true, true) => ChainLabel::Conflicted,
        (true, false) => ChainLabel::Animate,
        (false, true) => ChainLabel::Inanimate,
        (false, false) => ChainLabel::Unlabeled,
    }
}

/// Extracts one example per mention of every animate or inanimate
/// chain. The enclosing words are the tokens adjacent to the whole
/// mention span; mentions touching a sentence boundary are skipped.
pub fn extract_examples(documents: &[Document]) -> Vec<MarkableExample> {
    let mut examples = Vec::new();
    for doc in documents {
        for chain in &doc.chains {
            let label = match label_chain(chain) {
                ChainLabel::Animate => AnimacyLabel::Animate,
                ChainLabel::Inanimate => AnimacyLabel::Inanimate,
                ChainLabel::Unlabeled | ChainLabel::Conflicted => continue,
            };
            for mention in &chain.mentions {
                let sentence = &doc.sentences[mention.sentence_index];
                if mention.start == 0 || mention.end + 1 >= sentence.len() {
                    continue;
                }
                let surface: Vec<&str> =
                    mention.surface.iter().map(Token::as_str).collect();
                examples.push(MarkableExample {
                    label,
                    left: sentence[mention.start - 1].clone(),
                    right: sentence[mention.end + 1].clone(),
                    surface: surface.join("_"),
                });
            }
        }
    }
    examples
}

/// Split parameters for [`build_dataset`].
#[derive(Debug, Clone, Copy)]
pub struct SplitConfig {
    pub test_per_class: usize,
    pub seed: u64,
}

/// Filters examples to those whose encoded context has an embedding,
/// then reserves a balanced test set by seeded shuffle. The remainder
/// (possibly unbalanced) is the training set.
pub fn build_dataset(
    examples: Vec<MarkableExample>,
    mc_vocab: &Vocabulary,
    split: &SplitConfig,
) -> Result<(Vec<MarkableExample>, Vec<MarkableExample>), CorefError> {
    let mut filtered: Vec<MarkableExample> = examples
        .into_iter()
        .filter(|ex| mc_vocab.contains(ex.encoded_context().as_str()))
        .collect();

    let mut rng = ChaCha20Rng::seed_from_u64(split.seed);
    filtered.shuffle(&mut rng);

    for (class, label) in [
        ("animate", AnimacyLabel::Animate),
        ("inanimate", AnimacyLabel::Inanimate),
    ] {
        let have = filtered.iter().filter(|ex| ex.label == label).count();
        if have < split.test_per_class {
            return Err(CorefError::TestSplitShortfall {
                class,
                need: split.test_per_class,
                have,
            });
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut animate_left = split.test_per_class;
    let mut inanimate_left = split.test_per_class;
    for ex in filtered {
        let quota = match ex.label {
            AnimacyLabel::Animate => &mut animate_left,
            AnimacyLabel::Inanimate => &mut inanimate_left,
        };
        if *quota > 0 {
            *quota -= 1;
            test.push(ex);
        } else {
            train.push(ex);
        }
    }
    Ok((train, test))
}

/// Writes examples as TSV rows:
/// `label  left  right  encoded_mc  surface`.
pub fn write_markables_tsv(path: &Path, examples: &[MarkableExample]) -> Result<(), CorefError> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for ex in examples {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            ex.label.as_str(),
            ex.left,
            ex.right,
            ex.encoded_context(),
            ex.surface
        )
        .map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads a file written by [`write_markables_tsv`].
pub fn read_markables_tsv(path: &Path) -> Result<Vec<MarkableExample>, CorefError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut examples = Vec::new();
    let malformed = |line: usize, msg: &str| CorefError::MalformedTsv {
        path: path.display().to_string(),
        line,
        msg: msg.to_owned(),
    };
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(malformed(lineno, &format!("expected 5 columns, got {}", cols.len())));
        }
        let label = match cols[0] {
            "animate" => AnimacyLabel::Animate,
            "inanimate" => AnimacyLabel::Inanimate,
            other => return Err(malformed(lineno, &format!("unknown label {other:?}"))),
        };
        let left = Token::new(cols[1]).map_err(|_| malformed(lineno, "bad left token"))?;
        let right = Token::new(cols[2]).map_err(|_| malformed(lineno, "bad right token"))?;
        let ex = MarkableExample {
            label,
            left,
            right,
            surface: cols[4].to_owned(),
        };
        if ex.encoded_context().as_str() != cols[3] {
            return Err(malformed(lineno, "encoded context does not match left/right"));
        }
        examples.push(ex);
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use std::io::Cursor;

    fn doc(body: &str) -> Vec<Document> {
        let text = format!("#begin document test\n{body}\n#end document\n");
        parse_conll(Cursor::new(text), &ConllConfig { word_col: 0, coref_col: Some(1) }, "mem")
            .unwrap()
    }

    fn spans(docs: &[Document]) -> Vec<(String, Vec<(usize, usize, usize)>)> {
        docs[0]
            .chains
            .iter()
            .map(|c| {
                (
                    c.chain_id.clone(),
                    c.mentions
                        .iter()
                        .map(|m| (m.sentence_index, m.start, m.end))
                        .collect(),
                )
            })
            .collect()
    }

    #[test]
    fn parses_multi_token_mention() {
        let docs = doc("the (0\nold -\nman 0)");
        assert_eq!(spans(&docs), vec![("0:0".to_owned(), vec![(0, 0, 2)])]);
        assert_eq!(docs[0].chains[0].mentions[0].surface.len(), 3);
    }

    #[test]
    fn parses_singleton() {
        let docs = doc("it (3)");
        assert_eq!(spans(&docs), vec![("0:3".to_owned(), vec![(0, 0, 0)])]);
    }

    #[test]
    fn nested_same_id_spans_match_lifo() {
        // Tags [(0, (0), 0)]: chain 0 gets mentions (1..1) and (0..2).
        let docs = doc("a (0\nb (0)\nc 0)");
        assert_eq!(
            spans(&docs),
            vec![("0:0".to_owned(), vec![(0, 0, 2), (0, 1, 1)])]
        );
    }

    #[test]
    fn crossing_spans_across_chains() {
        let docs = doc("a (0\nb (1\nc 0)\nd 1)");
        assert_eq!(
            spans(&docs),
            vec![
                ("0:0".to_owned(), vec![(0, 0, 2)]),
                ("0:1".to_owned(), vec![(0, 1, 3)]),
            ]
        );
    }

    #[test]
    fn close_without_open_is_an_error() {
        let text = "#begin document x\nword 0)\n#end document\n";
        let err = parse_conll(
            Cursor::new(text),
            &ConllConfig { word_col: 0, coref_col: Some(1) },
            "mem",
        )
        .unwrap_err();
        assert!(matches!(err, CorefError::CloseWithoutOpen { line: 2, id: 0, .. }));
    }

    #[test]
    fn open_at_document_end_is_an_error() {
        let text = "#begin document x\nword (4\n\n#end document\n";
        let err = parse_conll(
            Cursor::new(text),
            &ConllConfig { word_col: 0, coref_col: Some(1) },
            "mem",
        )
        .unwrap_err();
        assert!(matches!(err, CorefError::OpenAtSentenceEnd { id: 4, .. }));
    }

    #[test]
    fn render_parse_round_trip() {
        let docs = doc("a (0\nb (0)|(1\nc 0)\nd 1)\n\ne (2)\nf -");
        let rendered = render_conll(&docs[0]);
        let reparsed = parse_conll(
            Cursor::new(rendered),
            &ConllConfig { word_col: 0, coref_col: Some(1) },
            "mem",
        )
        .unwrap();
        assert_eq!(reparsed[0].sentences, docs[0].sentences);
        // Chain ids are renumbered by render; compare mention groups.
        let lhs: Vec<Vec<Mention>> =
            docs[0].chains.iter().map(|c| c.mentions.clone()).collect();
        let rhs: Vec<Vec<Mention>> =
            reparsed[0].chains.iter().map(|c| c.mentions.clone()).collect();
        assert_eq!(lhs, rhs);
    }

    fn chain_of(words: &[&str]) -> Chain {
        Chain {
            chain_id: "t".to_owned(),
            mentions: words
                .iter()
                .map(|w| Mention {
                    doc_id: "d".to_owned(),
                    sentence_index: 0,
                    start: 0,
                    end: 0,
                    surface: w.split(' ').map(|t| Token::new(t).unwrap()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn labels_follow_trigger_sets() {
        assert_eq!(label_chain(&chain_of(&["she", "the doctor"])), ChainLabel::Animate);
        assert_eq!(label_chain(&chain_of(&["it"])), ChainLabel::Inanimate);
        assert_eq!(label_chain(&chain_of(&["the car", "this"])), ChainLabel::Unlabeled);
        assert_eq!(label_chain(&chain_of(&["he", "it"])), ChainLabel::Conflicted);
        // Case-insensitive; "It" fires, "ITS." (not a bare token) cannot occur.
        assert_eq!(label_chain(&chain_of(&["It"])), ChainLabel::Inanimate);
    }

    #[test]
    fn extracts_enclosing_words() {
        let text = "he -\nhelped -\nXiulan (7)\nto -\nfind -\na -\nflat -\n\nshe (7)";
        let docs = doc(text);
        let examples = extract_examples(&docs);
        assert_eq!(examples.len(), 1);
        let ex = &examples[0];
        assert_eq!(ex.label, AnimacyLabel::Animate);
        assert_eq!(ex.left.as_str(), "helped");
        assert_eq!(ex.right.as_str(), "to");
        assert_eq!(ex.encoded_context().as_str(), "helped*to");
        assert_eq!(ex.surface, "Xiulan");
    }

    #[test]
    fn boundary_mentions_are_skipped() {
        // Mention at token 0 and mention ending at the last token.
        let docs = doc("him (1)\nsaw -\nit (1)");
        assert!(extract_examples(&docs).is_empty());
    }

    #[test]
    fn conflicted_chains_contribute_nothing() {
        let docs = doc("a -\nhe (1)\nb -\n\nc -\nit (1)\nd -");
        assert!(extract_examples(&docs).is_empty());
    }

    #[test]
    fn multi_word_mention_uses_span_adjacent_words() {
        // Mention spans tokens 1..3 of [a b c d e] -> context (a, e).
        let docs = doc("a -\nb (2\nc -\nd 2)\ne -\n\nshe (2)\nx -\ny -");
        let examples = extract_examples(&docs);
        assert_eq!(examples.len(), 1);
        assert_eq!(examples[0].left.as_str(), "a");
        assert_eq!(examples[0].right.as_str(), "e");
        assert_eq!(examples[0].surface, "b_c_d");
    }

    fn synthetic_examples(n_animate: usize, n_inanimate: usize) -> Vec<MarkableExample> {
        let mut out = Vec::new();
        for i in 0..n_animate.max(n_inanimate) {
            for (count, label) in [(n_animate, AnimacyLabel::Animate), (n_inanimate, AnimacyLabel::Inanimate)] {
                if i < count {
                    out.push(MarkableExample {
                        label,
                        left: Token::new(format!("l{i}")).unwrap(),
                        right: Token::new(format!("r{i}")).unwrap(),
                        surface: format!("m{i}"),
                    });
                }
            }
        }
        out
    }

    fn vocab_for(examples: &[MarkableExample]) -> Vocabulary {
        build_vocab(examples.iter().map(|e| e.encoded_context()), 1)
    }

    #[test]
    fn split_is_balanced_and_partitions() {
        let examples = synthetic_examples(10, 10);
        let vocab = vocab_for(&examples);
        let split = SplitConfig { test_per_class: 2, seed: 9 };
        let (train, test) = build_dataset(examples.clone(), &vocab, &split).unwrap();
        assert_eq!(test.len(), 4);
        assert_eq!(train.len(), 16);
        let animate = test.iter().filter(|e| e.label == AnimacyLabel::Animate).count();
        assert_eq!(animate, 2);
        let mut all: Vec<_> = train.iter().chain(test.iter()).map(|e| e.surface.clone()).collect();
        all.sort();
        let mut expect: Vec<_> = examples.iter().map(|e| e.surface.clone()).collect();
        expect.sort();
        assert_eq!(all, expect);
    }

    #[test]
    fn split_is_deterministic() {
        let examples = synthetic_examples(8, 8);
        let vocab = vocab_for(&examples);
        let split = SplitConfig { test_per_class: 3, seed: 4 };
        let a = build_dataset(examples.clone(), &vocab, &split).unwrap();
        let b = build_dataset(examples, &vocab, &split).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_reports_shortfall() {
        let examples = synthetic_examples(5, 1);
        let vocab = vocab_for(&examples);
        let split = SplitConfig { test_per_class: 2, seed: 1 };
        match build_dataset(examples, &vocab, &split) {
            Err(CorefError::TestSplitShortfall { class, need, have }) => {
                assert_eq!((class, need, have), ("inanimate", 2, 1));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn split_filters_to_embedded_contexts() {
        let examples = synthetic_examples(6, 6);
        // Vocabulary missing l0*r0: those two examples must vanish.
        let vocab = build_vocab(
            examples
                .iter()
                .filter(|e| e.left.as_str() != "l0")
                .map(|e| e.encoded_context()),
            1,
        );
        let split = SplitConfig { test_per_class: 1, seed: 2 };
        let (train, test) = build_dataset(examples, &vocab, &split).unwrap();
        assert_eq!(train.len() + test.len(), 10);
        assert!(train
            .iter()
            .chain(test.iter())
            .all(|e| e.left.as_str() != "l0"));
    }

    #[test]
    fn markables_tsv_round_trip() {
        let examples = synthetic_examples(3, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("markables.tsv");
        write_markables_tsv(&path, &examples).unwrap();
        assert_eq!(read_markables_tsv(&path).unwrap(), examples);
    }
}
