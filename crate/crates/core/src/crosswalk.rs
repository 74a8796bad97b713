//! The prediction engine: runs the configured matcher(s) per source column,
//! copies the winning entry's tier path, and lets a ground-truth classifier
//! override the engine when it is more confident.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hasher;
use std::io::Write;

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{nearest_entries_with, EmbeddingModel};
use crate::error::{Error, Result};
use crate::ingest::canonical_name;
use crate::lev::match_column_with;
use crate::model::{
    Alternate, ColumnMeta, Confidence, CrosswalkResult, EntryId, GroundTruthRecord, MetaFields,
    Method, SourceSchema, StandardSchema, TierPath, DEFAULT_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Levenshtein,
    Embedding,
    Hybrid,
}

impl Mode {
    pub fn needs_model(self) -> bool {
        !matches!(self, Mode::Levenshtein)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "levenshtein" | "lev" => Ok(Mode::Levenshtein),
            "embedding" => Ok(Mode::Embedding),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Strategy {
    pub mode: Mode,
    pub threshold: u32,
    pub k: usize,
    pub use_meta_fields: MetaFields,
    /// Report below-threshold columns as unmatched instead of best effort.
    pub strict: bool,
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy {
            mode: Mode::Levenshtein,
            threshold: DEFAULT_THRESHOLD,
            k: 5,
            use_meta_fields: MetaFields::new(),
            strict: false,
        }
    }
}

impl Strategy {
    pub fn with_mode(mode: Mode) -> Self {
        Strategy {
            mode,
            ..Default::default()
        }
    }

    pub fn check(&self, model: Option<&EmbeddingModel>) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidStrategy("k must be at least 1".into()));
        }
        if self.mode.needs_model() && model.is_none() {
            return Err(Error::InvalidStrategy(format!(
                "mode {:?} requires an embedding model",
                self.mode
            )));
        }
        Ok(())
    }
}

/// Maps a cosine in [-1, 1] onto the 0..=100 score scale.
pub fn cosine_to_score(cos: f64) -> f64 {
    (100.0 * (cos + 1.0) / 2.0).round().clamp(0.0, 100.0)
}

fn embedding_column(
    query: &ColumnMeta,
    schema: &StandardSchema,
    model: &EmbeddingModel,
    strategy: &Strategy,
) -> CrosswalkResult {
    let ranked = nearest_entries_with(query, model, schema, strategy.k, &strategy.use_meta_fields);
    let Some((best, cos)) = ranked.first() else {
        return CrosswalkResult::unmatched(&query.name);
    };
    let score = cosine_to_score(*cos);
    let confidence = Confidence::for_score(score, strategy.threshold);
    if confidence == Confidence::Unmatched {
        return CrosswalkResult::unmatched(&query.name);
    }
    CrosswalkResult {
        source_column: query.name.clone(),
        matched_entry_id: Some(best.clone()),
        predicted_path: path_of(schema, best),
        score,
        method: Method::Embedding,
        confidence,
        alternates: ranked[1..]
            .iter()
            .map(|(id, cos)| Alternate {
                entry_id: id.clone(),
                score: cosine_to_score(*cos),
            })
            .collect(),
    }
}

fn path_of(schema: &StandardSchema, id: &EntryId) -> TierPath {
    schema
        .entry(id)
        .map(|e| e.path.clone())
        .unwrap_or_default()
}

/// Result of the configured matchers alone, before the classifier.
fn engine_column(
    query: &ColumnMeta,
    schema: &StandardSchema,
    model: Option<&EmbeddingModel>,
    strategy: &Strategy,
) -> CrosswalkResult {
    let lev = || {
        match_column_with(
            query,
            schema,
            strategy.threshold,
            strategy.k,
            &strategy.use_meta_fields,
        )
    };
    match (strategy.mode, model) {
        (Mode::Levenshtein, _) | (_, None) => lev(),
        (Mode::Embedding, Some(m)) => embedding_column(query, schema, m, strategy),
        (Mode::Hybrid, Some(m)) => {
            let emb = embedding_column(query, schema, m, strategy);
            if emb.matched_entry_id.is_some() && emb.score > f64::from(strategy.threshold) {
                return emb;
            }
            let lev = lev();
            if lev.score > emb.score {
                lev
            } else {
                emb
            }
        }
    }
}

fn apply_classifier(
    engine: CrosswalkResult,
    query: &ColumnMeta,
    schema: &StandardSchema,
    clf: &Classifier,
    strategy: &Strategy,
) -> CrosswalkResult {
    let Some((id, cos)) = classify(query, clf) else {
        return engine;
    };
    let score = (100.0 * cos).round().clamp(0.0, 100.0);
    if score <= engine.score || schema.entry(&id).is_none() {
        return engine;
    }
    let mut alternates: Vec<Alternate> = engine
        .matched_entry_id
        .iter()
        .map(|e| Alternate {
            entry_id: e.clone(),
            score: engine.score,
        })
        .chain(engine.alternates)
        .filter(|a| a.entry_id != id)
        .collect();
    alternates.truncate(strategy.k.saturating_sub(1));
    CrosswalkResult {
        source_column: query.name.clone(),
        predicted_path: path_of(schema, &id),
        matched_entry_id: Some(id),
        score,
        method: Method::Classifier,
        confidence: Confidence::for_score(score, strategy.threshold),
        alternates,
    }
}

/// Demotes a below-threshold match to unmatched, keeping it as the first alternate.
fn enforce_strict(result: CrosswalkResult) -> CrosswalkResult {
    if result.confidence != Confidence::Weak {
        return result;
    }
    let mut out = CrosswalkResult::unmatched(&result.source_column);
    out.alternates = result
        .matched_entry_id
        .map(|id| Alternate {
            entry_id: id,
            score: result.score,
        })
        .into_iter()
        .chain(result.alternates)
        .collect();
    out
}

pub fn crosswalk_column(
    query: &ColumnMeta,
    schema: &StandardSchema,
    model: Option<&EmbeddingModel>,
    clf: Option<&Classifier>,
    strategy: &Strategy,
) -> Result<CrosswalkResult> {
    strategy.check(model)?;
    let mut result = engine_column(query, schema, model, strategy);
    if let Some(clf) = clf {
        result = apply_classifier(result, query, schema, clf, strategy);
    }
    if strategy.strict {
        result = enforce_strict(result);
    }
    Ok(result)
}

/// One result per source column, in input order. Columns are matched
/// independently and may be processed in parallel.
pub fn crosswalk_schema(
    source: &SourceSchema,
    schema: &StandardSchema,
    model: Option<&EmbeddingModel>,
    clf: Option<&Classifier>,
    strategy: &Strategy,
) -> Result<Vec<CrosswalkResult>> {
    strategy.check(model)?;
    source
        .columns
        .par_iter()
        .map(|c| crosswalk_column(c, schema, model, clf, strategy))
        .collect()
}

/// The matched entry's stored path; empty for unmatched results.
pub fn infer_ontology(result: &CrosswalkResult, schema: &StandardSchema) -> TierPath {
    result
        .matched_entry_id
        .as_ref()
        .map(|id| path_of(schema, id))
        .unwrap_or_default()
}

pub const FEATURE_DIM: usize = 4096;

/// L2-normalized hashed character-trigram counts of the normalized name,
/// padded with one space on each side.
pub fn trigram_features(raw: &str) -> Vec<f32> {
    let mut v = vec![0.0f32; FEATURE_DIM];
    let canonical = canonical_name(raw);
    if canonical.is_empty() {
        return v;
    }
    let chars: Vec<char> = format!(" {canonical} ").chars().collect();
    for w in chars.windows(3) {
        let mut h = FnvHasher::default();
        let tri: String = w.iter().collect();
        h.write(tri.as_bytes());
        v[(h.finish() % FEATURE_DIM as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum()
}

/// Nearest-centroid classifier over steward decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    centroids: BTreeMap<EntryId, Vec<f32>>,
    n_records: usize,
}

impl Classifier {
    pub fn centroids(&self) -> &BTreeMap<EntryId, Vec<f32>> {
        &self.centroids
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }
}

pub fn train_classifier(
    records: &[GroundTruthRecord],
    schema: &StandardSchema,
) -> Result<Classifier> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut by_text: HashMap<String, &GroundTruthRecord> = HashMap::new();
    for r in records {
        if schema.entry(&r.decided_entry_id).is_none() {
            return Err(Error::UnknownEntry(r.decided_entry_id.to_string()));
        }
        let text = canonical_name(&r.source_column);
        if let Some(prev) = by_text.get(&text) {
            if prev.decided_entry_id != r.decided_entry_id {
                return Err(Error::ConflictingGroundTruth(format!(
                    "{:?} ({}) -> {} vs {:?} ({}) -> {}",
                    prev.source_column,
                    prev.dataset_id,
                    prev.decided_entry_id,
                    r.source_column,
                    r.dataset_id,
                    r.decided_entry_id
                )));
            }
        } else {
            by_text.insert(text, r);
        }
    }

    let mut sums: BTreeMap<EntryId, (Vec<f32>, usize)> = BTreeMap::new();
    for r in records {
        let features = trigram_features(&r.source_column);
        if features.iter().all(|x| *x == 0.0) {
            continue;
        }
        let (sum, n) = sums
            .entry(r.decided_entry_id.clone())
            .or_insert_with(|| (vec![0.0; FEATURE_DIM], 0));
        sum.iter_mut().zip(&features).for_each(|(s, f)| *s += f);
        *n += 1;
    }
    let centroids = sums
        .into_iter()
        .map(|(id, (sum, n))| {
            let mean: Vec<f32> = sum.iter().map(|s| s / n as f32).collect();
            let norm = mean.iter().map(|x| x * x).sum::<f32>().sqrt();
            (id, mean.into_iter().map(|x| x / norm).collect())
        })
        .collect();
    Ok(Classifier {
        centroids,
        n_records: records.len(),
    })
}

/// Nearest centroid by cosine; lower entry id wins ties.
pub fn classify(query: &ColumnMeta, clf: &Classifier) -> Option<(EntryId, f64)> {
    const TIE_EPS: f64 = 1e-9;
    let features = trigram_features(&query.name);
    if features.iter().all(|x| *x == 0.0) {
        return None;
    }
    let mut best: Option<(&EntryId, f64)> = None;
    for (id, centroid) in &clf.centroids {
        let cos = dot64(&features, centroid);
        if best.is_none_or(|(_, b)| cos > b + TIE_EPS) {
            best = Some((id, cos));
        }
    }
    best.map(|(id, cos)| (id.clone(), cos.min(1.0)))
}

/// One row of the mapping table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRow {
    pub source_column: String,
    pub matched_name: String,
    pub matched_id: String,
    pub path: String,
    pub score: f64,
    pub method: Method,
    pub confidence: Confidence,
}

pub fn mapping_rows(results: &[CrosswalkResult], schema: &StandardSchema) -> Vec<MappingRow> {
    results
        .iter()
        .map(|r| {
            let entry = r.matched_entry_id.as_ref().and_then(|id| schema.entry(id));
            MappingRow {
                source_column: r.source_column.clone(),
                matched_name: entry.map(|e| e.meta.name.clone()).unwrap_or_default(),
                matched_id: r
                    .matched_entry_id
                    .as_ref()
                    .map(|id| id.to_string())
                    .unwrap_or_default(),
                path: r.predicted_path.joined(),
                score: r.score,
                method: r.method,
                confidence: r.confidence,
            }
        })
        .collect()
}

pub fn write_mapping_csv(rows: &[MappingRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(|e| Error::Parse {
            row: 0,
            column: "mapping".into(),
            message: e.to_string(),
        })?;
    }
    out.flush()
        .map_err(|e| Error::io("mapping table", e))
}

pub fn write_mapping_json(rows: &[MappingRow], mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n").map_err(|e| Error::io("mapping table", e))
}
