use std::collections::{BTreeMap, HashMap};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backends::Translator;
use crate::contextual::{find_label_span, MatchingPolicy};
use crate::corpus::{nfc, LabeledSentence, Method, ProjectedDatapoint, ProjectionRecord, Provenance, Span};
use crate::projection::{ProjectionError, RunContext};

const INDEX: &str = "{i}";

/// Opening and closing marker templates; `{i}` stands for the marker index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerScheme {
    pub open: String,
    pub close: String,
}

impl Default for MarkerScheme {
    fn default() -> Self {
        Self {
            open: "[{i}]".into(),
            close: "[/{i}]".into(),
        }
    }
}

impl MarkerScheme {
    pub fn new(open: impl Into<String>, close: impl Into<String>) -> Result<Self, String> {
        let scheme = Self {
            open: open.into(),
            close: close.into(),
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, template) in [("open", &self.open), ("close", &self.close)] {
            if template.matches(INDEX).count() != 1 {
                return Err(format!(
                    "{name} marker template {template:?} must contain {INDEX} exactly once"
                ));
            }
            if template.chars().any(|c| c.is_whitespace() || c.is_ascii_digit()) {
                return Err(format!(
                    "{name} marker template {template:?} may not contain whitespace or digits"
                ));
            }
            if template == INDEX {
                return Err(format!("{name} marker template needs literal text around {INDEX}"));
            }
        }
        if self.open == self.close {
            return Err("open and close marker templates must differ".into());
        }
        Ok(())
    }

    pub fn open_marker(&self, index: usize) -> String {
        self.open.replace(INDEX, &index.to_string())
    }

    pub fn close_marker(&self, index: usize) -> String {
        self.close.replace(INDEX, &index.to_string())
    }

    /// Token pattern that tolerates one optional space between template elements.
    fn pattern(template: &str) -> String {
        let (before, after) = template.split_once(INDEX).expect("validated template");
        let mut parts: Vec<String> = before.chars().map(|c| regex::escape(&c.to_string())).collect();
        parts.push("([0-9]+)".into());
        parts.extend(after.chars().map(|c| regex::escape(&c.to_string())));
        parts.join(" ?")
    }

    fn regex(&self) -> Regex {
        // close first so that a close template sharing a prefix with open wins
        let pattern = format!("(?:{})|(?:{})", Self::pattern(&self.close), Self::pattern(&self.open));
        Regex::new(&pattern).expect("escaped marker pattern")
    }
}

/// One marked copy of the sentence. Regions marked in one variant never overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedVariant {
    pub text: String,
    /// label_id to marker index; labels with identical spans share an index.
    pub marker_map: BTreeMap<String, usize>,
    /// Label ids handled by this variant.
    pub group: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSentence {
    pub variants: Vec<MarkedVariant>,
}

impl MarkedSentence {
    /// Text of the first variant.
    pub fn text(&self) -> &str {
        &self.variants[0].text
    }

    pub fn marker_map(&self) -> &BTreeMap<String, usize> {
        &self.variants[0].marker_map
    }

    pub fn groups(&self) -> Vec<Vec<String>> {
        self.variants.iter().map(|v| v.group.clone()).collect()
    }
}

/// Wraps each distinct label span in numbered markers. Overlapping spans are
/// distributed first-fit over as many variants as needed.
pub fn insert_markers(sentence: &LabeledSentence, scheme: &MarkerScheme) -> MarkedSentence {
    let labels = sentence.labels_in_span_order();
    let mut spans: Vec<Span> = labels.iter().map(|l| l.span).collect();
    spans.dedup();

    let mut groups: Vec<Vec<Span>> = Vec::new();
    for span in spans {
        match groups.iter_mut().find(|g| g.iter().all(|s| !s.overlaps(&span))) {
            Some(group) => group.push(span),
            None => groups.push(vec![span]),
        }
    }
    if groups.is_empty() {
        groups.push(Vec::new());
    }

    let chars: Vec<char> = sentence.text.chars().collect();
    let variants = groups
        .into_iter()
        .map(|group| {
            let mut text = String::with_capacity(sentence.text.len() + group.len() * 8);
            let mut cursor = 0;
            for (index, span) in group.iter().enumerate() {
                text.extend(&chars[cursor..span.start()]);
                text.push_str(&scheme.open_marker(index));
                text.extend(&chars[span.start()..span.end()]);
                text.push_str(&scheme.close_marker(index));
                cursor = span.end();
            }
            text.extend(&chars[cursor..]);
            let index_of: HashMap<Span, usize> = group.iter().enumerate().map(|(i, s)| (*s, i)).collect();
            let members: Vec<(String, usize)> = labels
                .iter()
                .filter_map(|l| index_of.get(&l.span).map(|&i| (l.label_id.clone(), i)))
                .collect();
            MarkedVariant {
                text,
                group: members.iter().map(|(id, _)| id.clone()).collect(),
                marker_map: members.into_iter().collect(),
            }
        })
        .collect();
    MarkedSentence { variants }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Extraction {
    pub clean_text: String,
    /// Marker index to the enclosed text and its span in `clean_text`.
    pub found: BTreeMap<usize, (String, Span)>,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct MarkerToken {
    index: Option<usize>,
    close: bool,
    start: usize,
    end: usize,
}

fn scan(regex: &Regex, text: &str) -> Vec<MarkerToken> {
    let mut char_at = vec![0usize; text.len() + 1];
    let mut count = 0;
    for (byte, c) in text.char_indices() {
        char_at[byte] = count;
        count += 1;
        for slot in &mut char_at[byte + 1..byte + c.len_utf8()] {
            *slot = count;
        }
    }
    char_at[text.len()] = count;
    regex
        .captures_iter(text)
        .map(|caps| {
            let whole = caps.get(0).expect("match");
            let (digits, close) = match caps.get(1) {
                Some(m) => (m.as_str(), true),
                None => (caps.get(2).expect("one branch matched").as_str(), false),
            };
            MarkerToken {
                index: digits.parse().ok(),
                close,
                start: char_at[whole.start()],
                end: char_at[whole.end()],
            }
        })
        .collect()
}

/// Strips every marker token from `translated` and recovers the text enclosed
/// by each well-formed pair whose index is in `expected`.
///
/// A pair counts only when index `i` has exactly one opening and one closing
/// token, in that order, not crossing another pair. Enclosed text is trimmed
/// of surrounding whitespace; if nothing is left the index is absent.
pub fn extract_markers(translated: &str, expected: &[usize], scheme: &MarkerScheme) -> Extraction {
    let regex = scheme.regex();
    let chars: Vec<char> = translated.chars().collect();
    let tokens = scan(&regex, translated);
    let mut problems = Vec::new();

    let mut keep = vec![true; chars.len()];
    for token in &tokens {
        keep[token.start..token.end].iter_mut().for_each(|k| *k = false);
    }
    // removing tokens can splice a new one together, e.g. "[[0]0]"
    loop {
        let positions: Vec<usize> = (0..chars.len()).filter(|&i| keep[i]).collect();
        let current: String = positions.iter().map(|&i| chars[i]).collect();
        let residual = scan(&regex, &current);
        if residual.is_empty() {
            break;
        }
        problems.push(format!("{} marker token(s) formed after stripping", residual.len()));
        for token in residual {
            for &i in &positions[token.start..token.end] {
                keep[i] = false;
            }
        }
    }
    let mut clean_before = vec![0usize; chars.len() + 1];
    for i in 0..chars.len() {
        clean_before[i + 1] = clean_before[i] + usize::from(keep[i]);
    }
    let clean_text: String = chars.iter().zip(&keep).filter(|(_, k)| **k).map(|(c, _)| c).collect();

    let mut pairs: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &index in expected {
        let opens: Vec<&MarkerToken> = tokens.iter().filter(|t| t.index == Some(index) && !t.close).collect();
        let closes: Vec<&MarkerToken> = tokens.iter().filter(|t| t.index == Some(index) && t.close).collect();
        match (opens.as_slice(), closes.as_slice()) {
            ([open], [close]) if open.end <= close.start => {
                pairs.insert(index, (open.end, close.start));
            }
            ([open], [close]) if close.end <= open.start => {
                problems.push(format!("marker {index}: closing token precedes opening token"));
            }
            ([], []) => problems.push(format!("marker {index}: missing")),
            _ => problems.push(format!(
                "marker {index}: {} opening and {} closing token(s)",
                opens.len(),
                closes.len()
            )),
        }
    }
    let crossing: Vec<usize> = pairs
        .iter()
        .filter(|(i, (a_start, a_end))| {
            pairs.iter().any(|(j, (b_start, b_end))| {
                *i != j
                    && ((a_start < b_start && b_start < a_end && a_end < b_end)
                        || (b_start < a_start && a_start < b_end && b_end < a_end))
            })
        })
        .map(|(i, _)| *i)
        .collect();
    for index in crossing {
        problems.push(format!("marker {index}: crosses another marker pair"));
        pairs.remove(&index);
    }

    let clean_chars: Vec<char> = clean_text.chars().collect();
    let mut found = BTreeMap::new();
    for (index, (inner_start, inner_end)) in pairs {
        let mut start = clean_before[inner_start];
        let mut end = clean_before[inner_end];
        while start < end && clean_chars[start].is_whitespace() {
            start += 1;
        }
        while end > start && clean_chars[end - 1].is_whitespace() {
            end -= 1;
        }
        match Span::new(start, end) {
            Ok(span) => {
                found.insert(index, (clean_chars[start..end].iter().collect(), span));
            }
            Err(_) => problems.push(format!("marker {index}: encloses no text")),
        }
    }
    Extraction {
        clean_text,
        found,
        problems,
    }
}

/// Marker-based projection: translate the marked sentence, then read the
/// labels back from the marker positions.
pub fn project_marker(
    sentence: &LabeledSentence,
    translator: &dyn Translator,
    scheme: &MarkerScheme,
    run: &RunContext,
) -> Result<ProjectedDatapoint, ProjectionError> {
    let sent_id = sentence.sent_id.as_str();
    let (src, tgt) = (sentence.language.as_str(), run.target_language.as_str());
    let marked = insert_markers(sentence, scheme);

    let mut extractions = Vec::with_capacity(marked.variants.len());
    for variant in &marked.variants {
        let translated = translator
            .translate(&variant.text, src, tgt)
            .map_err(ProjectionError::backend(sent_id, None))?;
        let mut expected: Vec<usize> = variant.marker_map.values().copied().collect();
        expected.sort_unstable();
        expected.dedup();
        extractions.push(extract_markers(&nfc(&translated), &expected, scheme));
    }
    let target_text = extractions[0].clean_text.clone();

    let policy = MatchingPolicy::default();
    let mut taken: Vec<Span> = extractions[0].found.values().map(|(_, s)| *s).collect();
    let mut records = Vec::new();
    for label in sentence.labels_in_span_order() {
        let (v, index) = marked
            .variants
            .iter()
            .enumerate()
            .find_map(|(v, variant)| variant.marker_map.get(&label.label_id).map(|&i| (v, i)))
            .expect("every label is marked in some variant");
        let record = ProjectionRecord::new(label, Method::Marker);
        let record = match extractions[v].found.get(&index) {
            None => {
                let problems = extractions[v]
                    .problems
                    .iter()
                    .filter(|p| p.starts_with(&format!("marker {index}:")))
                    .cloned()
                    .collect::<Vec<_>>();
                let mut record = record.unmatched(None);
                record.diagnostics = if problems.is_empty() {
                    vec![format!("marker {index} not recovered")]
                } else {
                    problems
                };
                record
            }
            Some((text, span)) if v == 0 => record.matched(text.clone(), *span),
            Some((text, _)) => match find_label_span(text, &target_text, &taken, &policy) {
                Some(span) => {
                    taken.push(span);
                    record
                        .matched(text.clone(), span)
                        .note(format!("located from marked variant {v}"))
                }
                None => record.unmatched(Some(text.clone())).note(format!(
                    "text from marked variant {v} does not occur in the target text"
                )),
            },
        };
        records.push(record);
    }

    let settings = [
        ("marker_open", serde_json::json!(scheme.open)),
        ("marker_close", serde_json::json!(scheme.close)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let provenance = Provenance {
        method: Method::Marker,
        translator_id: translator.backend_id().to_string(),
        contextual_model_id: None,
        config_hash: run.config_hash.clone(),
        settings,
    };
    Ok(ProjectedDatapoint::assemble(
        sentence,
        tgt,
        target_text,
        records,
        provenance,
    ))
}
