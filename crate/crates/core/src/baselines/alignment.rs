use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::tokenize::{tokenize, Token};
use crate::backends::PhraseTable;
use crate::contextual::ngram_f1;
use crate::corpus::{slice, LabeledSentence, Method, ProjectedDatapoint, ProjectionRecord, Provenance, Span};
use crate::projection::{ProjectionError, RunContext};

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("line {line}: malformed alignment pair {pair:?}")]
    Malformed { line: usize, pair: String },
    #[error("line {line}: pair {src}-{tgt} out of bounds ({src_len} source, {tgt_len} target tokens)")]
    OutOfBounds {
        line: usize,
        src: usize,
        tgt: usize,
        src_len: usize,
        tgt_len: usize,
    },
    #[error("alignment file has {found} lines, expected {expected}")]
    LineCount { expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Word alignment between a sentence and its translation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentSet {
    pub src_tokens: Vec<Token>,
    pub tgt_tokens: Vec<Token>,
    /// (source token index, target token index)
    pub links: BTreeSet<(usize, usize)>,
}

impl AlignmentSet {
    pub fn new(
        src_tokens: Vec<Token>,
        tgt_tokens: Vec<Token>,
        links: BTreeSet<(usize, usize)>,
    ) -> Result<Self, String> {
        if let Some((i, j)) = links
            .iter()
            .find(|(i, j)| *i >= src_tokens.len() || *j >= tgt_tokens.len())
        {
            return Err(format!(
                "link {i}-{j} out of bounds ({} source, {} target tokens)",
                src_tokens.len(),
                tgt_tokens.len()
            ));
        }
        Ok(Self {
            src_tokens,
            tgt_tokens,
            links,
        })
    }

    /// Renders the links as a Pharaoh line.
    pub fn to_pharaoh(&self) -> String {
        self.links
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Parses one Pharaoh line (`i-j` pairs separated by whitespace) and checks
/// bounds. `line` is the 1-based line number used in errors.
pub fn parse_pharaoh_line(
    text: &str,
    line: usize,
    src_len: usize,
    tgt_len: usize,
) -> Result<BTreeSet<(usize, usize)>, AlignmentError> {
    let mut links = BTreeSet::new();
    for pair in text.split_whitespace() {
        let malformed = || AlignmentError::Malformed {
            line,
            pair: pair.to_string(),
        };
        let (a, b) = pair.split_once('-').ok_or_else(malformed)?;
        let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(a) || !all_digits(b) {
            return Err(malformed());
        }
        let src: usize = a.parse().map_err(|_| malformed())?;
        let tgt: usize = b.parse().map_err(|_| malformed())?;
        if src >= src_len || tgt >= tgt_len {
            return Err(AlignmentError::OutOfBounds {
                line,
                src,
                tgt,
                src_len,
                tgt_len,
            });
        }
        links.insert((src, tgt));
    }
    Ok(links)
}

/// Reads a Pharaoh file with one line per `(source, target)` text pair.
pub fn load_alignments(
    path: impl AsRef<Path>,
    pairs: &[(&str, &str)],
    src_lang: &str,
    tgt_lang: &str,
) -> Result<Vec<AlignmentSet>, AlignmentError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| AlignmentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let lines: Vec<&str> = raw.lines().collect();
    if lines.len() != pairs.len() {
        return Err(AlignmentError::LineCount {
            expected: pairs.len(),
            found: lines.len(),
        });
    }
    lines
        .iter()
        .zip(pairs)
        .enumerate()
        .map(|(n, (line, (src, tgt)))| {
            let src_tokens = tokenize(src, src_lang);
            let tgt_tokens = tokenize(tgt, tgt_lang);
            let links = parse_pharaoh_line(line, n + 1, src_tokens.len(), tgt_tokens.len())?;
            Ok(AlignmentSet {
                src_tokens,
                tgt_tokens,
                links,
            })
        })
        .collect()
}

fn fold(s: &str) -> String {
    s.to_lowercase()
}

/// Greedy one-to-one aligner: each source token, left to right, links to the
/// first unused target token that the lexicon maps it to, that equals it up
/// to case, or whose bigram F1 with it is at least 0.8.
pub fn lexical_align(
    src_text: &str,
    tgt_text: &str,
    src_lang: &str,
    tgt_lang: &str,
    lexicon: &PhraseTable,
) -> AlignmentSet {
    let src_tokens = tokenize(src_text, src_lang);
    let tgt_tokens = tokenize(tgt_text, tgt_lang);
    let mut used = vec![false; tgt_tokens.len()];
    let mut links = BTreeSet::new();
    for (i, s) in src_tokens.iter().enumerate() {
        let translation = lexicon.get(&s.surface);
        let hit = tgt_tokens.iter().enumerate().find(|(j, t)| {
            !used[*j]
                && (translation == Some(t.surface.as_str())
                    || fold(&s.surface) == fold(&t.surface)
                    || ngram_f1(&s.surface, &t.surface, 2) >= 0.8)
        });
        if let Some((j, _)) = hit {
            used[j] = true;
            links.insert((i, j));
        }
    }
    AlignmentSet {
        src_tokens,
        tgt_tokens,
        links,
    }
}

fn same_tokens(a: &[Token], b: &[Token]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y)
}

/// Alignment projection: each label maps to the contiguous target range from
/// the first to the last target token aligned with any of its source tokens.
pub fn project_alignment(
    sentence: &LabeledSentence,
    target_text: &str,
    alignment: &AlignmentSet,
    translator_id: &str,
    run: &RunContext,
) -> Result<ProjectedDatapoint, ProjectionError> {
    let sent_id = sentence.sent_id.as_str();
    if !same_tokens(&alignment.src_tokens, &tokenize(&sentence.text, &sentence.language)) {
        return Err(ProjectionError::invalid(
            sent_id,
            "alignment source tokens do not match the sentence",
        ));
    }
    if !same_tokens(&alignment.tgt_tokens, &tokenize(target_text, &run.target_language)) {
        return Err(ProjectionError::invalid(
            sent_id,
            "alignment target tokens do not match the translation",
        ));
    }
    if let Some((i, j)) = alignment
        .links
        .iter()
        .find(|(i, j)| *i >= alignment.src_tokens.len() || *j >= alignment.tgt_tokens.len())
    {
        return Err(ProjectionError::invalid(sent_id, format!("link {i}-{j} out of bounds")));
    }

    let mut records = Vec::new();
    for label in sentence.labels_in_span_order() {
        let record = ProjectionRecord::new(label, Method::Align);
        let sources: BTreeSet<usize> = alignment
            .src_tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.span.overlaps(&label.span))
            .map(|(i, _)| i)
            .collect();
        let targets: BTreeSet<usize> = alignment
            .links
            .iter()
            .filter(|(i, _)| sources.contains(i))
            .map(|(_, j)| *j)
            .collect();
        let record = match (targets.first(), targets.last()) {
            (Some(&first), Some(&last)) => {
                let span = Span::new(
                    alignment.tgt_tokens[first].span.start(),
                    alignment.tgt_tokens[last].span.end(),
                )
                .expect("token spans are non-empty");
                let candidate = slice(target_text, span)
                    .expect("token spans lie in the text")
                    .to_string();
                let record = record.matched(candidate, span);
                if last - first + 1 > targets.len() {
                    record.note(format!(
                        "merged {} aligned tokens across a range of {}",
                        targets.len(),
                        last - first + 1
                    ))
                } else {
                    record
                }
            }
            _ => record.unmatched(None).note("no aligned target tokens"),
        };
        records.push(record);
    }

    let provenance = Provenance {
        method: Method::Align,
        translator_id: translator_id.to_string(),
        contextual_model_id: None,
        config_hash: run.config_hash.clone(),
        settings: Default::default(),
    };
    Ok(ProjectedDatapoint::assemble(
        sentence,
        &run.target_language,
        target_text.to_string(),
        records,
        provenance,
    ))
}
