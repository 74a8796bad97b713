//! Synthetic benchmark generation and accuracy reporting.
//!
//! A benchmark is a set of source schemas whose column names are perturbed
//! copies of sampled standard-schema entry names, plus the truth map from each
//! generated column name back to the entry it came from.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crosswalk::{crosswalk_schema, Strategy};
use crate::embedding::{train, EmbeddingModel, Hyperparams};
use crate::error::{Error, Result};
use crate::fixture::synthetic_standard_schema;
use crate::ingest::{canonical_name, normalize_name};
use crate::model::{ColumnMeta, CrosswalkResult, EntryId, SourceSchema, StandardSchema};
use crate::textify::textify_schema;

pub type TruthMap = BTreeMap<String, EntryId>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationSpec {
    /// Probability of one random single-character edit.
    pub typo_rate: f64,
    /// Probability of truncating one token of 5+ chars to its first 3 or 4.
    pub abbreviation_rate: f64,
    /// Probability of shuffling token order.
    pub reorder_rate: f64,
    /// Token replacements, applied to every matching token.
    pub synonyms: BTreeMap<String, String>,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            typo_rate: 0.0,
            abbreviation_rate: 0.0,
            reorder_rate: 0.0,
            synonyms: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn check(&self) -> Result<()> {
        for (name, rate) in [
            ("typo_rate", self.typo_rate),
            ("abbreviation_rate", self.abbreviation_rate),
            ("reorder_rate", self.reorder_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidPerturbation(format!("{name} {rate} outside [0,1]")));
            }
        }
        Ok(())
    }
}

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
const MAX_RETRIES: usize = 16;

fn random_letter(rng: &mut ChaCha8Rng) -> char {
    char::from(ALPHABET[rng.random_range(0..ALPHABET.len())])
}

/// One insertion, deletion or substitution inside a token, so the joined
/// string moves exactly one edit away.
fn typo(tokens: &mut [String], rng: &mut ChaCha8Rng) {
    let t = rng.random_range(0..tokens.len());
    let mut chars: Vec<char> = tokens[t].chars().collect();
    let op = if chars.len() < 2 {
        rng.random_range(0..2)
    } else {
        rng.random_range(0..3)
    };
    match op {
        0 => {
            let at = rng.random_range(0..chars.len());
            let old = chars[at];
            let mut c = random_letter(rng);
            while c == old {
                c = random_letter(rng);
            }
            chars[at] = c;
        }
        1 => {
            let at = rng.random_range(0..=chars.len());
            chars.insert(at, random_letter(rng));
        }
        _ => {
            let at = rng.random_range(0..chars.len());
            chars.remove(at);
        }
    }
    tokens[t] = chars.into_iter().collect();
}

fn abbreviate(tokens: &mut [String], rng: &mut ChaCha8Rng) {
    let long: Vec<usize> = (0..tokens.len())
        .filter(|&i| tokens[i].chars().count() >= 5)
        .collect();
    if long.is_empty() {
        return;
    }
    let t = long[rng.random_range(0..long.len())];
    let keep = rng.random_range(3..=4);
    tokens[t] = tokens[t].chars().take(keep).collect();
}

fn reorder(tokens: &mut [String], rng: &mut ChaCha8Rng) {
    if tokens.windows(2).all(|w| w[0] == w[1]) {
        return;
    }
    let original = tokens.to_vec();
    tokens.shuffle(rng);
    if tokens == original.as_slice() {
        tokens.rotate_left(1);
    }
}

/// The perturbed form of `name`, or `name` itself when no perturbation fires.
fn perturb(name: &str, spec: &PerturbationSpec, rng: &mut ChaCha8Rng) -> String {
    let mut tokens = normalize_name(name).into_tokens();
    let mut changed = false;
    for t in tokens.iter_mut() {
        if let Some(s) = spec.synonyms.get(t.as_str()) {
            *t = s.clone();
            changed = true;
        }
    }
    tokens.retain(|t| !t.is_empty());
    if tokens.is_empty() {
        return name.to_string();
    }
    if rng.random_bool(spec.abbreviation_rate) {
        abbreviate(&mut tokens, rng);
        changed = true;
    }
    if rng.random_bool(spec.reorder_rate) {
        reorder(&mut tokens, rng);
        changed = true;
    }
    if rng.random_bool(spec.typo_rate) {
        typo(&mut tokens, rng);
        changed = true;
    }
    if changed {
        tokens.join(" ")
    } else {
        name.to_string()
    }
}

/// `n_sources` source schemas of up to `columns_per_source` columns each,
/// sampled without replacement per source from `base`.
///
/// A perturbed name that collides with another entry's name, or with a
/// generated column already attributed to a different entry, is redrawn; after
/// repeated collisions the entry's own name is used.
pub fn generate_benchmark(
    base: &StandardSchema,
    spec: &PerturbationSpec,
    n_sources: usize,
    columns_per_source: usize,
) -> Result<(Vec<SourceSchema>, TruthMap)> {
    if base.is_empty() {
        return Err(Error::EmptyBase);
    }
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base_names: BTreeMap<String, &EntryId> = base
        .entries
        .iter()
        .map(|e| (canonical_name(&e.meta.name), &e.id))
        .collect();
    let mut truth = TruthMap::new();
    let mut sources = Vec::with_capacity(n_sources);

    for s in 0..n_sources {
        let amount = columns_per_source.min(base.len());
        let picks = index::sample(&mut rng, base.len(), amount);
        let mut columns = Vec::with_capacity(amount);
        for i in picks {
            let entry = &base.entries[i];
            let clashes = |name: &str, truth: &TruthMap| {
                let canon = canonical_name(name);
                canon.is_empty()
                    || base_names.get(&canon).is_some_and(|id| **id != entry.id)
                    || truth.get(name).is_some_and(|id| *id != entry.id)
            };
            let mut name = entry.meta.name.clone();
            for _ in 0..MAX_RETRIES {
                let candidate = perturb(&entry.meta.name, spec, &mut rng);
                if !clashes(&candidate, &truth) {
                    name = candidate;
                    break;
                }
            }
            truth.insert(name.clone(), entry.id.clone());
            columns.push(ColumnMeta::named(name));
        }
        sources.push(SourceSchema {
            dataset_id: format!("bench-{}", s + 1),
            columns,
        });
    }
    Ok((sources, truth))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub source_column: String,
    pub predicted: Option<EntryId>,
    pub truth: EntryId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_queries: usize,
    pub top1_accuracy: f64,
    pub topk_accuracy: f64,
    pub ontology_path_accuracy: f64,
    pub per_method: BTreeMap<String, usize>,
    pub per_confidence: BTreeMap<String, usize>,
    /// Every query whose top-1 prediction was wrong.
    pub confusion: Vec<ConfusionRow>,
}

/// `predicted` counts as `truth` when the ids match or both entries share a
/// normalized name and tier path.
fn same_entry(predicted: &EntryId, truth: &EntryId, schema: &StandardSchema) -> bool {
    if predicted == truth {
        return true;
    }
    match (schema.entry(predicted), schema.entry(truth)) {
        (Some(p), Some(t)) => {
            p.path == t.path && normalize_name(&p.meta.name) == normalize_name(&t.meta.name)
        }
        _ => false,
    }
}

fn ratio(hits: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

pub fn evaluate(
    predictions: &[CrosswalkResult],
    truth: &TruthMap,
    schema: &StandardSchema,
) -> Result<EvalReport> {
    let mut top1 = 0;
    let mut topk = 0;
    let mut path_hits = 0;
    let mut per_method = BTreeMap::new();
    let mut per_confidence = BTreeMap::new();
    let mut confusion = Vec::new();

    for p in predictions {
        let t = truth
            .get(&p.source_column)
            .ok_or_else(|| Error::MissingTruth(p.source_column.clone()))?;
        *per_method.entry(p.method.as_str().to_string()).or_insert(0) += 1;
        *per_confidence.entry(p.confidence.as_str().to_string()).or_insert(0) += 1;

        let hit = p.matched_entry_id.as_ref().is_some_and(|m| same_entry(m, t, schema));
        if hit {
            top1 += 1;
        } else {
            confusion.push(ConfusionRow {
                source_column: p.source_column.clone(),
                predicted: p.matched_entry_id.clone(),
                truth: t.clone(),
            });
        }
        if hit || p.alternates.iter().any(|a| same_entry(&a.entry_id, t, schema)) {
            topk += 1;
        }
        let truth_path = schema.entry(t).map(|e| &e.path);
        if p.matched_entry_id.is_some() && truth_path == Some(&p.predicted_path) {
            path_hits += 1;
        }
    }

    let n = predictions.len();
    Ok(EvalReport {
        n_queries: n,
        top1_accuracy: ratio(top1, n),
        topk_accuracy: ratio(topk, n),
        ontology_path_accuracy: ratio(path_hits, n),
        per_method,
        per_confidence,
        confusion,
    })
}

impl EvalReport {
    /// Plain-text summary followed by a source / predicted / truth table of misses.
    pub fn render_table(&self, schema: &StandardSchema) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "queries                 {}", self.n_queries);
        let _ = writeln!(out, "top-1 accuracy          {:.3}", self.top1_accuracy);
        let _ = writeln!(out, "top-k accuracy          {:.3}", self.topk_accuracy);
        let _ = writeln!(out, "ontology path accuracy  {:.3}", self.ontology_path_accuracy);
        for (m, c) in &self.per_method {
            let _ = writeln!(out, "method {m:<17}{c}");
        }
        for (m, c) in &self.per_confidence {
            let _ = writeln!(out, "confidence {m:<13}{c}");
        }
        if self.confusion.is_empty() {
            return out;
        }

        let describe = |id: &EntryId| match schema.entry(id) {
            Some(e) => format!("{} [{}]", e.meta.name, e.path.joined()),
            None => id.to_string(),
        };
        let rows: Vec<[String; 3]> = self
            .confusion
            .iter()
            .map(|c| {
                [
                    c.source_column.clone(),
                    c.predicted.as_ref().map_or_else(|| "-".to_string(), describe),
                    describe(&c.truth),
                ]
            })
            .collect();
        let header = ["source", "predicted", "truth"];
        let mut widths = header.map(str::len);
        for r in &rows {
            for (w, cell) in widths.iter_mut().zip(r) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let _ = writeln!(out);
        let line = |cells: [&str; 3]| {
            format!(
                "{:<w0$}  {:<w1$}  {}",
                cells[0],
                cells[1],
                cells[2],
                w0 = widths[0],
                w1 = widths[1]
            )
        };
        let _ = writeln!(out, "{}", line(header).trim_end());
        for r in &rows {
            let _ = writeln!(out, "{}", line([&r[0], &r[1], &r[2]]).trim_end());
        }
        out
    }
}

/// Everything needed to reproduce one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub base_entries: usize,
    pub base_seed: u64,
    pub n_sources: usize,
    pub columns_per_source: usize,
    pub perturbation: PerturbationSpec,
    pub strategy: Strategy,
    pub hyper: Hyperparams,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            base_entries: 300,
            base_seed: 1,
            n_sources: 5,
            columns_per_source: 100,
            perturbation: PerturbationSpec {
                typo_rate: 0.3,
                abbreviation_rate: 0.2,
                reorder_rate: 0.2,
                synonyms: BTreeMap::new(),
                seed: 1,
            },
            strategy: Strategy::default(),
            hyper: Hyperparams::default(),
        }
    }
}

pub struct BenchmarkRun {
    pub base: StandardSchema,
    pub model: Option<EmbeddingModel>,
    pub predictions: Vec<CrosswalkResult>,
    pub report: EvalReport,
}

/// Generates the base schema and benchmark, trains a model when the mode
/// needs one, crosswalks every source and evaluates.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkRun> {
    let base = synthetic_standard_schema(config.base_entries, config.base_seed);
    run_benchmark_on(base, config)
}

/// [`run_benchmark`] over a given base schema; `base_entries` and
/// `base_seed` are ignored.
pub fn run_benchmark_on(base: StandardSchema, config: &BenchmarkConfig) -> Result<BenchmarkRun> {
    let (sources, truth) = generate_benchmark(
        &base,
        &config.perturbation,
        config.n_sources,
        config.columns_per_source,
    )?;
    let model = if config.strategy.mode.needs_model() {
        Some(train(&textify_schema(&base), &config.hyper)?)
    } else {
        None
    };
    let per_source: Vec<Vec<CrosswalkResult>> = sources
        .par_iter()
        .map(|s| crosswalk_schema(s, &base, model.as_ref(), None, &config.strategy))
        .collect::<Result<_>>()?;
    let predictions: Vec<CrosswalkResult> = per_source.into_iter().flatten().collect();
    let report = evaluate(&predictions, &truth, &base)?;
    Ok(BenchmarkRun {
        base,
        model,
        predictions,
        report,
    })
}
