//! Edit-distance entity resolution: 0..=100 similarity, strict
//! qualified-match threshold, and a block-key tie-break cascade.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::ingest::normalize_name;
use crate::model::{
    Alternate, ColumnMeta, Confidence, CrosswalkResult, EntryId, MetaFields, Method,
    StandardSchema,
};

/// Minimum number of single-character insertions, deletions and
/// substitutions turning `a` into `b`, counted over `char`s.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }

    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `round(100 * (1 - d / max(len a, len b)))`, half away from zero; 100 when
/// both strings are empty.
pub fn similarity_score(a: &str, b: &str) -> u32 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 100;
    }
    let same = (longest - levenshtein(a, b)) as u64;
    let longest = longest as u64;
    // Exact integer rounding of 100 * same / longest.
    ((200 * same + longest) / (2 * longest)) as u32
}

/// First character of each token, sorted and concatenated.
pub fn block_key<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut firsts: Vec<char> = tokens
        .iter()
        .filter_map(|t| t.as_ref().chars().next())
        .collect();
    firsts.sort_unstable();
    firsts.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchCandidate {
    pub entry_id: EntryId,
    pub score: u32,
    pub block_key: String,
}

/// Normalized tokens of the name, followed by those of each enabled field.
pub fn comparison_tokens(meta: &ColumnMeta, fields: &MetaFields) -> Vec<String> {
    let mut tokens = normalize_name(&meta.name).into_tokens();
    for field in fields {
        for value in field.values(meta) {
            tokens.extend(normalize_name(value).into_tokens());
        }
    }
    tokens
}

fn common_prefix(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

struct Scored {
    candidate: MatchCandidate,
    same_block: bool,
    prefix: usize,
}

fn cascade(a: &Scored, b: &Scored) -> Ordering {
    b.candidate
        .score
        .cmp(&a.candidate.score)
        .then_with(|| b.same_block.cmp(&a.same_block))
        .then_with(|| b.prefix.cmp(&a.prefix))
        .then_with(|| a.candidate.entry_id.cmp(&b.candidate.entry_id))
}

/// Every entry scored against `query`, best first under the tie-break
/// cascade: score, then matching block key, then longest common prefix, then
/// lowest entry id.
pub fn rank_candidates(
    query: &ColumnMeta,
    schema: &StandardSchema,
    fields: &MetaFields,
) -> Vec<MatchCandidate> {
    let query_tokens = comparison_tokens(query, fields);
    let query_key = block_key(&query_tokens);
    let query_str = query_tokens.join(" ");

    let mut scored: Vec<Scored> = schema
        .entries
        .par_iter()
        .map(|entry| {
            let tokens = comparison_tokens(&entry.meta, fields);
            let key = block_key(&tokens);
            let text = tokens.join(" ");
            Scored {
                same_block: key == query_key,
                prefix: common_prefix(&text, &query_str),
                candidate: MatchCandidate {
                    entry_id: entry.id.clone(),
                    score: similarity_score(&query_str, &text),
                    block_key: key,
                },
            }
        })
        .collect();
    scored.sort_by(cascade);
    scored.into_iter().map(|s| s.candidate).collect()
}

pub fn match_column(
    query: &ColumnMeta,
    schema: &StandardSchema,
    threshold: u32,
    k: usize,
) -> CrosswalkResult {
    match_column_with(query, schema, threshold, k, &MetaFields::new())
}

pub fn match_column_with(
    query: &ColumnMeta,
    schema: &StandardSchema,
    threshold: u32,
    k: usize,
    fields: &MetaFields,
) -> CrosswalkResult {
    let ranked = rank_candidates(query, schema, fields);
    let Some(best) = ranked.first() else {
        return CrosswalkResult::unmatched(&query.name);
    };
    let score = f64::from(best.score);
    let confidence = Confidence::for_score(score, threshold);
    if confidence == Confidence::Unmatched {
        return CrosswalkResult::unmatched(&query.name);
    }
    let entry = schema.entry(&best.entry_id).expect("ranked from schema");
    CrosswalkResult {
        source_column: query.name.clone(),
        matched_entry_id: Some(best.entry_id.clone()),
        predicted_path: entry.path.clone(),
        score,
        method: Method::Levenshtein,
        confidence,
        alternates: ranked
            .iter()
            .skip(1)
            .take(k.saturating_sub(1))
            .map(|c| Alternate {
                entry_id: c.entry_id.clone(),
                score: f64::from(c.score),
            })
            .collect(),
    }
}
