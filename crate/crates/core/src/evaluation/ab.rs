use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{percentage, EvaluationError};
use crate::corpus::ProjectedDatapoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    A,
    B,
    #[serde(rename = "tie")]
    Tie,
}

/// One blinded comparison as shown to an annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbAnnotation {
    pub pair_id: String,
    pub source_label: String,
    pub side_a: String,
    pub side_b: String,
    pub verdict: Option<Verdict>,
}

/// Which system produced each side of a pair. `run_a` names the system of
/// the first run given to the export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbSealed {
    pub pair_id: String,
    pub a: String,
    pub b: String,
    pub run_a: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbScore {
    pub system_a: String,
    pub system_b: String,
    pub pairs: usize,
    pub wins_a: usize,
    pub ties: usize,
    pub wins_b: usize,
    pub win_a: f64,
    pub tie: f64,
    pub win_b: f64,
}

impl AbScore {
    pub fn to_table(&self) -> String {
        let w = "system 1 win".len();
        format!(
            "{:<w$}  {:>6}\n{:<w$}  {:>6.1}\n{:<w$}  {:>6.1}\n{:<w$}  {:>6.1}\n# {} = system 1, {} = system 2, {} pairs\n",
            "outcome", "%", "system 1 win", self.win_a, "tie", self.tie, "system 2 win", self.win_b,
            self.system_a, self.system_b, self.pairs,
        )
    }
}

type SentenceKey = (String, String);

fn index(run: &[ProjectedDatapoint]) -> BTreeMap<SentenceKey, &ProjectedDatapoint> {
    run.iter()
        .map(|dp| ((dp.doc_id.clone(), dp.sent_id.clone()), dp))
        .collect()
}

fn label_set(dp: &ProjectedDatapoint) -> BTreeSet<(&str, &str)> {
    dp.records
        .iter()
        .map(|r| (r.label_id.as_str(), r.source_surface.as_str()))
        .collect()
}

fn system_names(run_a: &[ProjectedDatapoint], run_b: &[ProjectedDatapoint]) -> (String, String) {
    let name = |run: &[ProjectedDatapoint]| {
        run.first()
            .map(|dp| dp.provenance.method.to_string())
            .unwrap_or_else(|| "unknown".into())
    };
    let (a, b) = (name(run_a), name(run_b));
    if a == b {
        (format!("{a}#1"), format!("{b}#2"))
    } else {
        (a, b)
    }
}

/// Samples `n` labels that received a candidate in both runs and lays them
/// out as blinded pairs. Side order is drawn per pair from `seed`.
pub fn export_ab(
    run_a: &[ProjectedDatapoint],
    run_b: &[ProjectedDatapoint],
    n: usize,
    seed: u64,
) -> Result<(Vec<AbAnnotation>, Vec<AbSealed>), EvaluationError> {
    let (index_a, index_b) = (index(run_a), index(run_b));
    if index_a.len() != run_a.len() || index_b.len() != run_b.len() {
        return Err(EvaluationError::CorpusMismatch(
            "duplicate (doc_id, sent_id) within a run".into(),
        ));
    }
    if let Some(key) = index_a.keys().find(|k| !index_b.contains_key(*k)) {
        return Err(EvaluationError::CorpusMismatch(format!(
            "sentence {key:?} only in the first run"
        )));
    }
    if let Some(key) = index_b.keys().find(|k| !index_a.contains_key(*k)) {
        return Err(EvaluationError::CorpusMismatch(format!(
            "sentence {key:?} only in the second run"
        )));
    }

    let mut candidates: Vec<(String, String, String)> = Vec::new();
    for (key, dp_a) in &index_a {
        let dp_b = index_b[key];
        if label_set(dp_a) != label_set(dp_b) {
            return Err(EvaluationError::CorpusMismatch(format!(
                "labels of sentence {key:?} differ"
            )));
        }
        let by_id: BTreeMap<&str, _> = dp_b.records.iter().map(|r| (r.label_id.as_str(), r)).collect();
        let mut records: Vec<_> = dp_a.records.iter().collect();
        records.sort_by(|x, y| x.label_id.cmp(&y.label_id));
        for ra in records {
            let rb = by_id[ra.label_id.as_str()];
            if let (Some(ca), Some(cb)) = (&ra.candidate, &rb.candidate) {
                candidates.push((ra.source_surface.clone(), ca.clone(), cb.clone()));
            }
        }
    }
    if candidates.len() < n {
        return Err(EvaluationError::NotEnoughPairs {
            requested: n,
            available: candidates.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, candidates.len(), n).into_vec();
    chosen.sort_unstable();
    let (name_a, name_b) = system_names(run_a, run_b);
    let width = n.to_string().len().max(4);
    let mut annotations = Vec::with_capacity(n);
    let mut sealed = Vec::with_capacity(n);
    for (k, i) in chosen.into_iter().enumerate() {
        let (label, ca, cb) = &candidates[i];
        let pair_id = format!("p{:0width$}", k + 1);
        let swap = rng.random_bool(0.5);
        let (side_a, side_b, a, b) = if swap {
            (cb, ca, &name_b, &name_a)
        } else {
            (ca, cb, &name_a, &name_b)
        };
        annotations.push(AbAnnotation {
            pair_id: pair_id.clone(),
            source_label: label.clone(),
            side_a: side_a.clone(),
            side_b: side_b.clone(),
            verdict: None,
        });
        sealed.push(AbSealed {
            pair_id,
            a: a.clone(),
            b: b.clone(),
            run_a: name_a.clone(),
        });
    }
    Ok((annotations, sealed))
}

/// Unblinds annotated pairs and tallies wins for the two systems.
pub fn score_ab(verdicts: &[AbAnnotation], sealed: &[AbSealed]) -> Result<AbScore, EvaluationError> {
    let assignment: BTreeMap<&str, &AbSealed> = sealed.iter().map(|s| (s.pair_id.as_str(), s)).collect();
    let judged: BTreeMap<&str, &AbAnnotation> = verdicts.iter().map(|v| (v.pair_id.as_str(), v)).collect();
    if assignment.len() != sealed.len() || judged.len() != verdicts.len() {
        return Err(EvaluationError::PairMismatch("duplicate pair_id".into()));
    }
    if let Some(id) = judged.keys().find(|id| !assignment.contains_key(*id)) {
        return Err(EvaluationError::PairMismatch(format!(
            "{id:?} has no sealed assignment"
        )));
    }
    if let Some(id) = assignment.keys().find(|id| !judged.contains_key(*id)) {
        return Err(EvaluationError::PairMismatch(format!(
            "{id:?} is missing from the verdicts"
        )));
    }
    let first = sealed
        .first()
        .ok_or_else(|| EvaluationError::PairMismatch("no pairs".into()))?;
    let run_a = first.run_a.clone();
    let run_b = if first.a == run_a {
        first.b.clone()
    } else {
        first.a.clone()
    };

    let (mut wins_a, mut ties, mut wins_b) = (0, 0, 0);
    for (id, annotation) in &judged {
        let pair = assignment[id];
        if pair.run_a != run_a || ![&pair.a, &pair.b].contains(&&run_a) {
            return Err(EvaluationError::PairMismatch(format!(
                "{id:?} names inconsistent systems"
            )));
        }
        let verdict = annotation
            .verdict
            .ok_or_else(|| EvaluationError::MissingVerdict(id.to_string()))?;
        let winner = match verdict {
            Verdict::Tie => {
                ties += 1;
                continue;
            }
            Verdict::A => &pair.a,
            Verdict::B => &pair.b,
        };
        if *winner == run_a {
            wins_a += 1;
        } else {
            wins_b += 1;
        }
    }
    let pairs = judged.len();
    Ok(AbScore {
        system_a: run_a,
        system_b: run_b,
        pairs,
        wins_a,
        ties,
        wins_b,
        win_a: percentage(wins_a, pairs),
        tie: percentage(ties, pairs),
        win_b: percentage(wins_b, pairs),
    })
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> EvaluationError + '_ {
    move |source| EvaluationError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn save_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), EvaluationError> {
    let mut writer = BufWriter::new(File::create(path).map_err(io_error(path))?);
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|e| io_error(path)(e.into()))?;
        writer.write_all(b"\n").map_err(io_error(path))?;
    }
    writer.flush().map_err(io_error(path))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvaluationError> {
    let reader = BufReader::new(File::open(path).map_err(io_error(path))?);
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_error(path))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| EvaluationError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(items)
}

pub fn save_annotations(items: &[AbAnnotation], path: impl AsRef<Path>) -> Result<(), EvaluationError> {
    save_jsonl(items, path.as_ref())
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AbAnnotation>, EvaluationError> {
    read_jsonl(path.as_ref())
}

pub fn save_sealed(items: &[AbSealed], path: impl AsRef<Path>) -> Result<(), EvaluationError> {
    save_jsonl(items, path.as_ref())
}

pub fn read_sealed(path: impl AsRef<Path>) -> Result<Vec<AbSealed>, EvaluationError> {
    read_jsonl(path.as_ref())
}
