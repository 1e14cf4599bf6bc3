//! Faithfulness metrics, translate-train filtering and blinded A/B export.

mod ab;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ab::{
    export_ab, read_annotations, read_sealed, save_annotations, save_sealed, score_ab, AbAnnotation, AbScore, AbSealed,
    Verdict,
};

use crate::corpus::{Corpus, Method, ProjectedDatapoint, UNDETERMINED_LANGUAGE};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("no projected datapoints; rate is undefined")]
    Empty,
    #[error("runs cover different source corpora: {0}")]
    CorpusMismatch(String),
    #[error("requested {requested} A/B pairs but only {available} labels have candidates in both runs")]
    NotEnoughPairs { requested: usize, available: usize },
    #[error("pair {0:?} has no verdict")]
    MissingVerdict(String),
    #[error("pair ids differ between verdicts and sealed assignment: {0}")]
    PairMismatch(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `100 * part / whole` rounded half-up to one decimal place.
pub fn percentage(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        return 0.0;
    }
    let (part, whole) = (part as u128, whole as u128);
    let tenths = (2000 * part + whole) / (2 * whole);
    tenths as f64 / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub datapoint_rate: f64,
    pub label_rate: f64,
    pub total_datapoints: usize,
    pub faithful_datapoints: usize,
    pub total_labels: usize,
    pub faithful_labels: usize,
}

impl RateSummary {
    fn from_counts(
        total_datapoints: usize,
        faithful_datapoints: usize,
        total_labels: usize,
        faithful_labels: usize,
    ) -> Self {
        Self {
            datapoint_rate: percentage(faithful_datapoints, total_datapoints),
            // no labels at all is vacuously faithful
            label_rate: if total_labels == 0 {
                100.0
            } else {
                percentage(faithful_labels, total_labels)
            },
            total_datapoints,
            faithful_datapoints,
            total_labels,
            faithful_labels,
        }
    }

    fn of<'a>(datapoints: impl Iterator<Item = &'a ProjectedDatapoint>) -> Self {
        let (mut total, mut faithful, mut labels, mut faithful_labels) = (0, 0, 0, 0);
        for dp in datapoints {
            total += 1;
            faithful += usize::from(dp.datapoint_faithful);
            labels += dp.records.len();
            faithful_labels += dp.records.iter().filter(|r| r.faithful).count();
        }
        Self::from_counts(total, faithful, labels, faithful_labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub note: String,
    #[serde(flatten)]
    pub overall: RateSummary,
    pub per_method: BTreeMap<Method, RateSummary>,
}

const VACUOUS_NOTE: &str = "datapoints without labels count as faithful";

impl FaithfulnessReport {
    pub fn datapoint_rate(&self) -> f64 {
        self.overall.datapoint_rate
    }

    pub fn label_rate(&self) -> f64 {
        self.overall.label_rate
    }

    /// Plain-text table with one row per method and a total row.
    pub fn to_table(&self) -> String {
        let header = [
            "method",
            "datapoints",
            "faithful",
            "rate %",
            "labels",
            "faithful",
            "rate %",
        ];
        let row = |name: &str, s: &RateSummary| {
            [
                name.to_string(),
                s.total_datapoints.to_string(),
                s.faithful_datapoints.to_string(),
                format!("{:.1}", s.datapoint_rate),
                s.total_labels.to_string(),
                s.faithful_labels.to_string(),
                format!("{:.1}", s.label_rate),
            ]
        };
        let mut rows: Vec<[String; 7]> = vec![header.map(str::to_string)];
        rows.extend(self.per_method.iter().map(|(m, s)| row(m.as_str(), s)));
        rows.push(row("total", &self.overall));
        let widths: Vec<usize> = (0..7)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!("# {}\n", self.note);
        for r in &rows {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  "));
        }
        out
    }
}

/// Share of datapoints (and of labels) whose projections all occur in the
/// translated sentence.
pub fn faithfulness_rate(projected: &[ProjectedDatapoint]) -> Result<FaithfulnessReport, EvaluationError> {
    if projected.is_empty() {
        return Err(EvaluationError::Empty);
    }
    let mut by_method: BTreeMap<Method, Vec<&ProjectedDatapoint>> = BTreeMap::new();
    for dp in projected {
        by_method.entry(dp.provenance.method).or_default().push(dp);
    }
    Ok(FaithfulnessReport {
        note: VACUOUS_NOTE.to_string(),
        overall: RateSummary::of(projected.iter()),
        per_method: by_method
            .into_iter()
            .map(|(m, dps)| (m, RateSummary::of(dps.into_iter())))
            .collect(),
    })
}

/// Keeps only fully faithful datapoints, as target-language training sentences.
pub fn filter_translate_train(projected: &[ProjectedDatapoint]) -> Corpus {
    let language = projected
        .first()
        .map(|dp| dp.language.clone())
        .unwrap_or_else(|| UNDETERMINED_LANGUAGE.to_string());
    let sentences = projected
        .iter()
        .filter(|dp| dp.datapoint_faithful)
        .map(ProjectedDatapoint::to_labeled_sentence)
        .collect();
    Corpus::new(language, sentences)
}


#[cfg(test)]
mod tests {
    use super::fixtures::projected;
    use super::*;

    #[test]
    fn percentage_rounds_half_up() {
        assert_eq!(percentage(27, 100), 27.0);
        assert_eq!(percentage(1, 2), 50.0);
        assert_eq!(percentage(1, 3), 33.3);
        assert_eq!(percentage(2, 3), 66.7);
        // 6.25 -> 6.3, 12.5 stays
        assert_eq!(percentage(1, 16), 6.3);
        assert_eq!(percentage(1, 8), 12.5);
        assert_eq!(percentage(1, 2000), 0.1);
        assert_eq!(percentage(1, 2001), 0.0);
    }

    #[test]
    fn twenty_seven_of_hundred() {
        let dps: Vec<_> = (0..100)
            .map(|i| projected(&format!("s{i:03}"), Method::Marker, i < 27))
            .collect();
        let report = faithfulness_rate(&dps).unwrap();
        assert_eq!(report.datapoint_rate(), 27.0);
        assert_eq!(report.overall.total_labels, 200);
        assert_eq!(report.label_rate(), 63.5);
        assert_eq!(report.per_method[&Method::Marker], report.overall);
    }

    #[test]
    fn half_and_vacuous() {
        let dps = vec![projected("a", Method::Clap, true), projected("b", Method::Clap, false)];
        assert_eq!(faithfulness_rate(&dps).unwrap().datapoint_rate(), 50.0);

        let mut empty = projected("c", Method::Clap, true);
        empty.records.clear();
        empty.events.clear();
        let report = faithfulness_rate(&[empty]).unwrap();
        assert_eq!(report.datapoint_rate(), 100.0);
        assert_eq!(report.label_rate(), 100.0);
        assert!(matches!(faithfulness_rate(&[]), Err(EvaluationError::Empty)));
    }

    #[test]
    fn per_method_breakdown_and_table() {
        let dps = vec![projected("a", Method::Clap, true), projected("b", Method::Align, false)];
        let report = faithfulness_rate(&dps).unwrap();
        assert_eq!(report.per_method[&Method::Clap].datapoint_rate, 100.0);
        assert_eq!(report.per_method[&Method::Align].datapoint_rate, 0.0);
        let table = report.to_table();
        assert!(table.contains("total"));
        assert_eq!(table.lines().count(), 5);
    }

    #[test]
    fn filter_keeps_faithful_only() {
        let dps: Vec<_> = (0..10)
            .map(|i| projected(&format!("s{i}"), Method::Clap, i < 7))
            .collect();
        let corpus = filter_translate_train(&dps);
        assert_eq!(corpus.len(), 7);
        assert_eq!(corpus.language, "fr");
        for s in &corpus.sentences {
            s.validate(None).unwrap();
        }
        let none: Vec<_> = (0..3)
            .map(|i| projected(&format!("s{i}"), Method::Clap, false))
            .collect();
        assert!(filter_translate_train(&none).is_empty());
    }
}
