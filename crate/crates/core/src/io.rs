//! Line-delimited record formats shared by the CLI commands.
//!
//! Batch records:      `{"id", "subj", "rel", "obj", "probs": [...]}`
//! Prediction records: `{"id", "subj", "obj", "probs": [...]}` plus an
//!                     optional `"predicted"` (kept by repaired outputs;
//!                     argmax otherwise)
//! Instance records:   `{"id", "subj", "rel", "obj", "features": [...]}`
//! History records:    `{"epoch", "L_O", "L_C", "lambda", "violations"}`
//!
//! Relations travel as names and are resolved against the vocabulary on
//! load. Prediction records carry no gold relation, so the predicted
//! relation doubles as the gold label slot (it only matters for
//! no-relation gating).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infer::{PredItem, PredictionSet};
use crate::kb::{RelationVocabulary, Triple};
use crate::loss::{Batch, Instance, ProbVec};
use crate::synth::LabeledInstance;
use crate::train::EpochStats;

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchRecord {
    pub id: String,
    pub subj: String,
    pub rel: String,
    pub obj: String,
    pub probs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub subj: String,
    pub obj: String,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub subj: String,
    pub rel: String,
    pub obj: String,
    pub features: Vec<f64>,
}

fn jsonl_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    Ok(records)
}

fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let mut out = String::new();
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Json {
            path: path.display().to_string(),
            source: e,
        })?;
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a batch file into a validated [`Batch`].
pub fn load_batch(path: &Path, vocab: &RelationVocabulary) -> Result<Batch> {
    let records: Vec<BatchRecord> = jsonl_records(path)?;
    let instances = records
        .into_iter()
        .map(|r| {
            Ok(Instance {
                gold: Triple::new(r.subj, vocab.resolve(&r.rel)?, r.obj),
                probs: ProbVec::new(r.probs)?,
                id: r.id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Batch::new(instances)
}

pub fn save_batch(batch: &Batch, vocab: &RelationVocabulary, path: &Path) -> Result<()> {
    let records: Vec<BatchRecord> = batch
        .instances()
        .iter()
        .map(|inst| BatchRecord {
            id: inst.id.clone(),
            subj: inst.gold.subj.clone(),
            rel: vocab.name(inst.gold.rel).unwrap_or("?").to_string(),
            obj: inst.gold.obj.clone(),
            probs: inst.probs.to_vec(),
        })
        .collect();
    write_jsonl(&records, path)
}

/// Loads predictions; the `predicted` field is honored when present
/// (repaired files), otherwise argmax is used.
pub fn load_predictions(path: &Path, vocab: &RelationVocabulary) -> Result<PredictionSet> {
    let records: Vec<PredictionRecord> = jsonl_records(path)?;
    let items = records
        .into_iter()
        .map(|r| {
            let probs = ProbVec::new(r.probs)?;
            if probs.len() != vocab.len() {
                return Err(Error::DimensionMismatch {
                    expected: vocab.len(),
                    got: probs.len(),
                });
            }
            let predicted = match r.predicted {
                Some(name) => vocab.resolve(&name)?,
                None => probs.argmax(),
            };
            Ok(PredItem {
                gold: Triple::new(r.subj, predicted, r.obj),
                id: r.id,
                probs,
                predicted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictionSet { items })
}

pub fn save_predictions(
    preds: &PredictionSet,
    vocab: &RelationVocabulary,
    path: &Path,
) -> Result<()> {
    let records: Vec<PredictionRecord> = preds
        .items
        .iter()
        .map(|item| PredictionRecord {
            id: item.id.clone(),
            subj: item.gold.subj.clone(),
            obj: item.gold.obj.clone(),
            probs: item.probs.to_vec(),
            predicted: Some(vocab.name(item.predicted).unwrap_or("?").to_string()),
        })
        .collect();
    write_jsonl(&records, path)
}

/// Loads labeled instances (ids are positional and dropped).
pub fn load_instances(path: &Path, vocab: &RelationVocabulary) -> Result<Vec<LabeledInstance>> {
    let records: Vec<InstanceRecord> = jsonl_records(path)?;
    records
        .into_iter()
        .map(|r| {
            Ok(LabeledInstance {
                gold: Triple::new(r.subj, vocab.resolve(&r.rel)?, r.obj),
                features: r.features,
            })
        })
        .collect()
}

pub fn save_instances(
    instances: &[LabeledInstance],
    vocab: &RelationVocabulary,
    path: &Path,
) -> Result<()> {
    let records: Vec<InstanceRecord> = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| InstanceRecord {
            id: format!("i{i:05}"),
            subj: inst.gold.subj.clone(),
            rel: vocab.name(inst.gold.rel).unwrap_or("?").to_string(),
            obj: inst.gold.obj.clone(),
            features: inst.features.clone(),
        })
        .collect();
    write_jsonl(&records, path)
}

pub fn save_history(history: &[EpochStats], path: &Path) -> Result<()> {
    write_jsonl(history, path)
}
