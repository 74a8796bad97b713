//! Token embeddings trained on the textified standard schema, and
//! nearest-record retrieval against it.
//!
//! Training is skip-gram with negative sampling over whole sentences: every
//! ordered pair of distinct tokens in a sentence is a positive example, so a
//! row's name, tiers and terms all pull toward each other. The model has two
//! matrices, `input` (the vectors we keep) and `output` (context vectors).
//! All randomness comes from a ChaCha stream seeded by [`Hyperparams::seed`],
//! and training is single-threaded, so a given corpus and seed always produce
//! bit-identical vectors.
//!
//! Entries are represented by the mean input vector of their sentence's
//! tokens; queries are embedded the same way and ranked by cosine.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lev::levenshtein;
use crate::model::{ColumnMeta, EntryId, MetaFields, StandardSchema};
use crate::textify::{cell_token, query_tokens, split_token, Corpus, Sentence, NAME_PREFIX};

pub const MAGIC: &[u8; 6] = b"MHARM1";
const TRAILER: &[u8; 4] = b"HYPR";
const LOGIT_CLAMP: f32 = 30.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub dim: usize,
    pub epochs: usize,
    /// Starting rate; decays linearly to `min_learning_rate` over training.
    pub learning_rate: f32,
    pub min_learning_rate: f32,
    /// Noise samples per positive pair.
    pub negatives: usize,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: 64,
            epochs: 200,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            negatives: 5,
            min_count: 1,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparams(m.to_string()));
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.min_learning_rate.is_finite() && self.min_learning_rate >= 0.0) {
            return bad("minimum learning rate must be non-negative");
        }
        Ok(())
    }
}

/// Tokens in first-appearance order with their corpus counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            tokens,
            counts,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.get(token).map(|i| self.counts[i])
    }
}

pub fn build_vocab(corpus: &[Sentence], min_count: usize) -> Result<Vocab> {
    if corpus.iter().all(Sentence::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for token in corpus.iter().flat_map(|s| s.tokens()) {
        let c = counts.entry(token).or_insert(0);
        if *c == 0 {
            order.push(token);
        }
        *c += 1;
    }
    let (tokens, counts): (Vec<String>, Vec<u64>) = order
        .into_iter()
        .map(|t| (t, counts[t]))
        .filter(|&(_, c)| c >= min_count as u64)
        .map(|(t, c)| (t.to_string(), c))
        .unzip();
    Ok(Vocab::from_parts(tokens, counts))
}

/// Unigram noise distribution with counts raised to 0.75.
struct NoiseSampler {
    cumulative: Vec<f64>,
}

impl NoiseSampler {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseSampler { cumulative }
    }

    /// Probability of drawing token `i`.
    fn probability(&self, i: usize) -> f64 {
        let total = *self.cumulative.last().expect("non-empty vocab");
        let below = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - below) / total
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocab");
        let x = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

fn sigmoid(x: f32) -> f32 {
    let x = x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    hyper: Hyperparams,
    vocab: Vocab,
    /// `vocab.len() x dim`, row-major.
    input: Vec<f32>,
    output: Vec<f32>,
    entry_ids: Vec<EntryId>,
    entry_index: HashMap<EntryId, usize>,
    /// `entry_ids.len() x dim`, row-major.
    entry_vectors: Vec<f32>,
    loss_trace: Vec<f64>,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.hyper.dim
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Training objective at the end of each epoch, per positive pair.
    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.vocab.get(token).map(|i| self.row(&self.input, i))
    }

    pub fn output_vector(&self, token: &str) -> Option<&[f32]> {
        self.vocab.get(token).map(|i| self.row(&self.output, i))
    }

    pub fn entry_ids(&self) -> &[EntryId] {
        &self.entry_ids
    }

    pub fn entry_vector(&self, id: &EntryId) -> Option<&[f32]> {
        self.entry_index
            .get(id)
            .map(|&i| self.row(&self.entry_vectors, i))
    }

    fn row<'a>(&self, m: &'a [f32], i: usize) -> &'a [f32] {
        let d = self.hyper.dim;
        &m[i * d..(i + 1) * d]
    }

    fn mean_of(&self, indices: impl Iterator<Item = usize>) -> Option<Vec<f32>> {
        let d = self.hyper.dim;
        let mut sum = vec![0.0f32; d];
        let mut n = 0usize;
        for i in indices {
            for (s, v) in sum.iter_mut().zip(self.row(&self.input, i)) {
                *s += v;
            }
            n += 1;
        }
        (n > 0).then(|| sum.into_iter().map(|s| s / n as f32).collect())
    }
}

/// Ordered `(center, context)` index pairs for one encoded sentence.
fn sentence_pairs(sentence: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    sentence.iter().flat_map(move |&c| {
        sentence
            .iter()
            .filter(move |&&o| o != c)
            .map(move |&o| (c, o))
    })
}

fn log_sigmoid(x: f32) -> f64 {
    f64::from(sigmoid(x).max(f32::MIN_POSITIVE)).ln()
}

/// Mean SGNS loss per positive pair with the noise term taken in expectation
/// over the noise distribution, matching the sampler's skip of the context
/// token. Deterministic, so the trace tracks convergence without the jitter
/// of the sampled per-step losses.
fn objective(
    input: &[f32],
    output: &[f32],
    dim: usize,
    encoded: &[Vec<usize>],
    noise: &NoiseSampler,
    negatives: usize,
) -> f64 {
    let n = output.len() / dim;
    fn row(m: &[f32], i: usize, dim: usize) -> &[f32] {
        &m[i * dim..(i + 1) * dim]
    }
    let probs: Vec<f64> = (0..n).map(|i| noise.probability(i)).collect();
    // per center: its noise losses against every token and their expectation
    let mut cache: HashMap<usize, (Vec<f64>, f64)> = HashMap::new();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for sentence in encoded {
        for (center, context) in sentence_pairs(sentence) {
            let h = row(input, center, dim);
            let (noise_loss, expected) = cache.entry(center).or_insert_with(|| {
                let losses: Vec<f64> = (0..n).map(|t| -log_sigmoid(-dot(h, row(output, t, dim)))).collect();
                let expected = losses.iter().zip(&probs).map(|(l, p)| l * p).sum();
                (losses, expected)
            });
            let negative = *expected - probs[context] * noise_loss[context];
            total += -log_sigmoid(dot(h, row(output, context, dim))) + negatives as f64 * negative;
            pairs += 1;
        }
    }
    total / pairs as f64
}

pub fn train(corpus: &Corpus, hyper: &Hyperparams) -> Result<EmbeddingModel> {
    hyper.check()?;
    let vocab = build_vocab(&corpus.sentences, hyper.min_count)?;
    if vocab.len() < 2 {
        return Err(Error::NothingToContrast(vocab.len()));
    }
    let encoded: Vec<Vec<usize>> = corpus
        .sentences
        .iter()
        .map(|s| s.tokens().iter().filter_map(|t| vocab.get(t)).collect())
        .collect();
    let pairs_per_epoch: usize = encoded.iter().map(|s| sentence_pairs(s).count()).sum();
    if pairs_per_epoch == 0 {
        return Err(Error::NothingToContrast(vocab.len()));
    }

    let dim = hyper.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let bound = 0.5 / dim as f32;
    let mut input: Vec<f32> = (0..vocab.len() * dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    let mut output = vec![0.0f32; vocab.len() * dim];
    let noise = NoiseSampler::new(&vocab.counts);

    let total_steps = (hyper.epochs * pairs_per_epoch) as f64;
    let lr_span = f64::from(hyper.learning_rate - hyper.min_learning_rate);
    let mut step = 0usize;
    let mut hidden = vec![0.0f32; dim];
    let mut grad = vec![0.0f32; dim];
    let mut loss_trace = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        for sentence in &encoded {
            for (center, context) in sentence_pairs(sentence) {
                let lr = (f64::from(hyper.learning_rate) - lr_span * step as f64 / total_steps)
                    as f32;
                step += 1;

                hidden.copy_from_slice(&input[center * dim..(center + 1) * dim]);
                grad.fill(0.0);

                let mut update = |target: usize, label: f32| {
                    let out = &mut output[target * dim..(target + 1) * dim];
                    let p = sigmoid(dot(&hidden, out));
                    let g = (label - p) * lr;
                    for ((gr, o), h) in grad.iter_mut().zip(out.iter_mut()).zip(&hidden) {
                        *gr += g * *o;
                        *o += g * h;
                    }
                };

                update(context, 1.0);
                for _ in 0..hyper.negatives {
                    let negative = noise.sample(&mut rng);
                    if negative == context {
                        continue;
                    }
                    update(negative, 0.0);
                }

                for (v, g) in input[center * dim..(center + 1) * dim].iter_mut().zip(&grad) {
                    *v += g;
                }
            }
        }
        loss_trace.push(objective(&input, &output, dim, &encoded, &noise, hyper.negatives));
    }

    let mut model = EmbeddingModel {
        hyper: hyper.clone(),
        vocab,
        input,
        output,
        entry_ids: Vec::new(),
        entry_index: HashMap::new(),
        entry_vectors: Vec::new(),
        loss_trace,
    };
    let mut entry_vectors = Vec::with_capacity(encoded.len() * dim);
    for sentence in &encoded {
        let v = model
            .mean_of(sentence.iter().copied())
            .unwrap_or_else(|| vec![0.0; dim]);
        entry_vectors.extend(v);
    }
    model.entry_vectors = entry_vectors;
    model.entry_ids = corpus.entry_ids.clone();
    model.entry_index = index_of(&model.entry_ids);
    Ok(model)
}

fn index_of(ids: &[EntryId]) -> HashMap<EntryId, usize> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect()
}

/// Mean input vector of the in-vocabulary tokens; `None` when none are known.
pub fn entity_vector<S: AsRef<str>>(tokens: &[S], model: &EmbeddingModel) -> Option<Vec<f32>> {
    model.mean_of(tokens.iter().filter_map(|t| model.vocab.get(t.as_ref())))
}

/// Vocabulary token whose body is within edit distance 1 of `body`, if
/// exactly one such token exists.
fn unique_near_token<'m>(body: &str, model: &'m EmbeddingModel) -> Option<&'m str> {
    let len = body.chars().count();
    let mut found = None;
    for token in model.vocab.tokens() {
        let Some((_, candidate)) = split_token(token) else {
            continue;
        };
        if candidate.chars().count().abs_diff(len) > 1 || levenshtein(body, candidate) > 1 {
            continue;
        }
        if found.is_some() {
            return None;
        }
        found = Some(token.as_str());
    }
    found
}

/// Query tokens mapped onto the vocabulary. Tokens are used as-is when any of
/// them is known; otherwise each token's body is matched against vocabulary
/// bodies with the distance-1 rule.
pub fn resolve_tokens(tokens: &[String], model: &EmbeddingModel) -> Vec<String> {
    let known: Vec<String> = tokens
        .iter()
        .filter(|t| model.vocab.get(t).is_some())
        .cloned()
        .collect();
    if !known.is_empty() {
        return known;
    }
    tokens
        .iter()
        .filter_map(|t| {
            let body = split_token(t).map_or(t.as_str(), |(_, b)| b);
            unique_near_token(body, model).map(str::to_string)
        })
        .collect()
}

/// Query vector over resolved tokens. A `name:` token naming schema entries
/// stands for the mean of those entries' vectors; any other token for its
/// input vector. The result is the mean of these per-token vectors.
///
/// Expanding names to their records keeps an exact name from drifting to a
/// sibling record: names sharing every context token train to nearly
/// parallel vectors.
pub fn query_vector(
    tokens: &[String],
    model: &EmbeddingModel,
    schema: &StandardSchema,
) -> Option<Vec<f32>> {
    let d = model.dim();
    let mut sum = vec![0.0f32; d];
    let mut n = 0usize;
    for token in tokens {
        let records: Vec<&[f32]> = match split_token(token) {
            Some((NAME_PREFIX, _)) => schema
                .entries
                .iter()
                .filter(|e| cell_token(NAME_PREFIX, &e.meta.name).as_deref() == Some(token))
                .filter_map(|e| model.entry_vector(&e.id))
                .collect(),
            _ => Vec::new(),
        };
        let v = if records.is_empty() {
            match model.vector(token) {
                Some(v) => v.to_vec(),
                None => continue,
            }
        } else {
            let mut m = vec![0.0f32; d];
            for r in &records {
                for (a, b) in m.iter_mut().zip(*r) {
                    *a += b / records.len() as f32;
                }
            }
            m
        };
        for (a, b) in sum.iter_mut().zip(v) {
            *a += b;
        }
        n += 1;
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f32).collect())
}

pub fn nearest_entries(
    query: &ColumnMeta,
    model: &EmbeddingModel,
    schema: &StandardSchema,
    k: usize,
) -> Vec<(EntryId, f64)> {
    nearest_entries_with(query, model, schema, k, &MetaFields::new())
}

/// Top-`k` schema entries by cosine to the query vector, ties broken by
/// entry id. Empty when the query cannot be placed in the vocabulary.
pub fn nearest_entries_with(
    query: &ColumnMeta,
    model: &EmbeddingModel,
    schema: &StandardSchema,
    k: usize,
    fields: &MetaFields,
) -> Vec<(EntryId, f64)> {
    let tokens = resolve_tokens(&query_tokens(query, fields), model);
    let Some(q) = query_vector(&tokens, model, schema) else {
        return Vec::new();
    };
    let mut ranked: Vec<(EntryId, f64)> = schema
        .entries
        .iter()
        .filter_map(|e| model.entry_vector(&e.id).map(|v| (e.id.clone(), cosine(&q, v))))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v).map_err(|_| std::io::Error::other("value exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len())?;
    w.write_all(s.as_bytes())
}

fn put_f32s(w: &mut impl Write, values: &[f32]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes the binary model file.
///
/// Layout, little-endian: magic `MHARM1`; `u32` dim; `u32` vocab size; each
/// token as `u32` byte length + UTF-8; input vectors as row-major `f32`;
/// `u32` entry count; each entry as length-prefixed id + `dim` `f32`s. A
/// trailer tagged `HYPR` then holds the hyperparameters, token counts, output
/// vectors and loss trace so that a reload is exact.
pub fn write_model(model: &EmbeddingModel, w: &mut impl Write) -> std::io::Result<()> {
    let h = &model.hyper;
    w.write_all(MAGIC)?;
    put_u32(w, h.dim)?;
    put_u32(w, model.vocab.len())?;
    for t in model.vocab.tokens() {
        put_str(w, t)?;
    }
    put_f32s(w, &model.input)?;
    put_u32(w, model.entry_ids.len())?;
    for (i, id) in model.entry_ids.iter().enumerate() {
        put_str(w, id.as_str())?;
        put_f32s(w, model.row(&model.entry_vectors, i))?;
    }

    w.write_all(TRAILER)?;
    put_u32(w, h.epochs)?;
    w.write_all(&h.learning_rate.to_le_bytes())?;
    w.write_all(&h.min_learning_rate.to_le_bytes())?;
    put_u32(w, h.negatives)?;
    put_u32(w, h.min_count)?;
    w.write_all(&h.seed.to_le_bytes())?;
    for c in model.vocab.counts() {
        w.write_all(&c.to_le_bytes())?;
    }
    put_f32s(w, &model.output)?;
    put_u32(w, model.loss_trace.len())?;
    for l in &model.loss_trace {
        w.write_all(&l.to_le_bytes())?;
    }
    Ok(())
}

struct ByteReader<R> {
    inner: R,
}

impl<R: Read> ByteReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::ModelFormat(format!("truncated file: {e}")))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()?;
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::ModelFormat(format!("truncated string: {e}")))?;
        String::from_utf8(buf).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        (0..n).map(|_| self.f32()).collect()
    }
}

pub fn read_model(r: &mut impl Read) -> Result<EmbeddingModel> {
    let mut r = ByteReader { inner: r };
    if &r.bytes::<6>()? != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let dim = r.u32()?;
    if dim < 2 {
        return Err(Error::ModelFormat(format!("dim {dim}")));
    }
    let vocab_len = r.u32()?;
    let tokens = (0..vocab_len)
        .map(|_| r.string())
        .collect::<Result<Vec<_>>>()?;
    let input = r.f32s(vocab_len * dim)?;
    let n_entries = r.u32()?;
    let mut entry_ids = Vec::with_capacity(n_entries);
    let mut entry_vectors = Vec::with_capacity(n_entries * dim);
    for _ in 0..n_entries {
        entry_ids.push(EntryId(r.string()?));
        entry_vectors.extend(r.f32s(dim)?);
    }

    if &r.bytes::<4>()? != TRAILER {
        return Err(Error::ModelFormat("missing trailer".into()));
    }
    let hyper = Hyperparams {
        dim,
        epochs: r.u32()?,
        learning_rate: r.f32()?,
        min_learning_rate: r.f32()?,
        negatives: r.u32()?,
        min_count: r.u32()?,
        seed: r.u64()?,
    };
    let counts = (0..vocab_len)
        .map(|_| r.u64())
        .collect::<Result<Vec<_>>>()?;
    let output = r.f32s(vocab_len * dim)?;
    let n_loss = r.u32()?;
    let loss_trace = (0..n_loss).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;

    let entry_index = index_of(&entry_ids);
    if entry_index.len() != entry_ids.len() {
        return Err(Error::ModelFormat("duplicate entry id".into()));
    }
    Ok(EmbeddingModel {
        hyper,
        vocab: Vocab::from_parts(tokens, counts),
        input,
        output,
        entry_ids,
        entry_index,
        entry_vectors,
        loss_trace,
    })
}

pub fn save_model(model: &EmbeddingModel, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_model(model, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &std::path::Path) -> Result<EmbeddingModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(&mut std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(tokens: &[&str]) -> Sentence {
        Sentence(tokens.iter().map(|t| t.to_string()).collect())
    }

    fn corpus(sentences: Vec<Sentence>) -> Corpus {
        let entry_ids = (0..sentences.len())
            .map(|i| EntryId::from_ordinal(i + 1))
            .collect();
        Corpus {
            sentences,
            entry_ids,
        }
    }

    #[test]
    fn vocab_counts_and_threshold() {
        let c = [sentence(&["a", "b"]), sentence(&["a"])];
        let v = build_vocab(&c, 1).unwrap();
        assert_eq!(v.tokens(), ["a", "b"]);
        assert_eq!(v.counts(), [2, 1]);
        let v = build_vocab(&c, 2).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        assert!(matches!(build_vocab(&[], 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn single_token_vocab_rejected() {
        let c = corpus(vec![sentence(&["a"]), sentence(&["a"])]);
        assert!(matches!(
            train(&c, &Hyperparams::default()),
            Err(Error::NothingToContrast(1))
        ));
    }

    #[test]
    fn bad_hyperparams_rejected() {
        let c = corpus(vec![sentence(&["a", "b"])]);
        for h in [
            Hyperparams { dim: 1, ..Default::default() },
            Hyperparams { epochs: 0, ..Default::default() },
            Hyperparams { negatives: 0, ..Default::default() },
        ] {
            assert!(matches!(train(&c, &h), Err(Error::InvalidHyperparams(_))));
        }
    }

    fn toy_model() -> EmbeddingModel {
        let c = corpus(vec![
            sentence(&["name:straw", "t1:plastics", "t2:soft_plastics"]),
            sentence(&["name:plates", "t1:metal"]),
        ]);
        train(
            &c,
            &Hyperparams {
                dim: 8,
                epochs: 20,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn training_is_deterministic() {
        assert_eq!(toy_model(), toy_model());
    }

    #[test]
    fn trained_model_shape() {
        let m = toy_model();
        assert!(m.input.iter().all(|v| v.is_finite()));
        assert_eq!(m.loss_trace().len(), 20);
        assert_eq!(m.entry_ids().len(), 2);
    }

    #[test]
    fn entity_vector_means() {
        let m = toy_model();
        let one = entity_vector(&["name:straw"], &m).unwrap();
        assert_eq!(one, m.vector("name:straw").unwrap());
        assert!(entity_vector(&["nope"], &m).is_none());

        let a = m.vector("name:straw").unwrap();
        let b = m.vector("t1:metal").unwrap();
        let avg = entity_vector(&["name:straw", "t1:metal", "oov"], &m).unwrap();
        for i in 0..m.dim() {
            assert_eq!(avg[i], (a[i] + b[i]) / 2.0);
        }
    }

    #[test]
    fn entity_vector_dim2_hand_arithmetic() {
        let model = EmbeddingModel {
            hyper: Hyperparams { dim: 2, ..Default::default() },
            vocab: Vocab::from_parts(vec!["a".into(), "b".into()], vec![1, 1]),
            input: vec![1.0, 2.0, 3.0, -4.0],
            output: vec![0.0; 4],
            entry_ids: vec![],
            entry_index: HashMap::new(),
            entry_vectors: vec![],
            loss_trace: vec![],
        };
        assert_eq!(entity_vector(&["a", "b"], &model).unwrap(), vec![2.0, -1.0]);
    }

    #[test]
    fn cosine_bounds() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]) - 1.0).abs() < 1e-12);
        assert!((cosine(&[1.0, 0.0], &[-1.0, 0.0]) + 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn spelling_fallback() {
        let m = toy_model();
        assert_eq!(
            resolve_tokens(&["name:strw".to_string()], &m),
            ["name:straw"]
        );
        // distance 2: no adoption
        assert!(resolve_tokens(&["name:stw".to_string()], &m).is_empty());
        // tier body reachable too
        assert_eq!(resolve_tokens(&["name:metal".to_string()], &m), ["t1:metal"]);
    }

    #[test]
    fn ambiguous_fallback_rejected() {
        let c = corpus(vec![sentence(&["name:cat", "t1:x"]), sentence(&["name:cut", "t1:y"])]);
        let m = train(&c, &Hyperparams { dim: 4, epochs: 2, ..Default::default() }).unwrap();
        assert!(resolve_tokens(&["name:cbt".to_string()], &m).is_empty());
    }

    #[test]
    fn persistence_round_trip() {
        let m = toy_model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(&buf[..6], MAGIC);
        let back = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_model(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn corrupt_model_rejected() {
        let m = toy_model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_model(&mut buf.as_slice()), Err(Error::ModelFormat(_))));
        buf[0] = b'M';
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_model(&mut buf.as_slice()), Err(Error::ModelFormat(_))));
    }
}
