//! Turns standard-schema rows into token sentences for embedding training.
//!
//! Each cell becomes one token of the form `prefix:body`, where the prefix
//! names the column (`name`, `t1`..`t8`, `term`) and the body is the cell's
//! normalized words joined by `_`. Keeping each cell whole means a tier label
//! such as "soft plastics" is a single vocabulary unit.

use std::fmt;

use crate::ingest::normalize_name;
use crate::model::{ColumnMeta, EntryId, MetaField, MetaFields, StandardEntry, StandardSchema};

pub const NAME_PREFIX: &str = "name";
pub const TERM_PREFIX: &str = "term";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence(pub Vec<String>);

impl Sentence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// A textified schema: one sentence per entry plus the position -> entry map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub entry_ids: Vec<EntryId>,
}

/// `prefix:body` for one cell, or `None` when the cell normalizes to nothing.
pub fn cell_token(prefix: &str, value: &str) -> Option<String> {
    let body = normalize_name(value).join("_");
    (!body.is_empty()).then(|| format!("{prefix}:{body}"))
}

/// Splits a token into `(prefix, body)`.
pub fn split_token(token: &str) -> Option<(&str, &str)> {
    token.split_once(':')
}

pub fn is_valid_token(token: &str) -> bool {
    let Some((prefix, body)) = split_token(token) else {
        return false;
    };
    let prefix_ok = prefix == NAME_PREFIX
        || prefix == TERM_PREFIX
        || prefix
            .strip_prefix('t')
            .and_then(|d| d.parse::<usize>().ok())
            .is_some_and(|d| (1..=8).contains(&d) && prefix.len() == 2);
    prefix_ok
        && !body.is_empty()
        && body
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn term_tokens(meta: &ColumnMeta) -> impl Iterator<Item = String> + '_ {
    meta.business_terms
        .iter()
        .chain(&meta.glossary_terms)
        .filter_map(|t| cell_token(TERM_PREFIX, t))
}

pub fn textify_entry(entry: &StandardEntry) -> Sentence {
    let mut tokens: Vec<String> = cell_token(NAME_PREFIX, &entry.meta.name).into_iter().collect();
    for (i, tier) in entry.path.tiers().iter().enumerate() {
        tokens.extend(cell_token(&format!("t{}", i + 1), tier));
    }
    tokens.extend(term_tokens(&entry.meta));
    Sentence(tokens)
}

pub fn textify_schema(schema: &StandardSchema) -> Corpus {
    Corpus {
        sentences: schema.entries.iter().map(textify_entry).collect(),
        entry_ids: schema.entries.iter().map(|e| e.id.clone()).collect(),
    }
}

/// Tokens for a query column: its `name:` token, plus `term:` tokens when
/// business or glossary terms are enabled.
pub fn query_tokens(meta: &ColumnMeta, fields: &MetaFields) -> Vec<String> {
    let mut tokens: Vec<String> = cell_token(NAME_PREFIX, &meta.name).into_iter().collect();
    if fields.contains(&MetaField::BusinessTerms) {
        tokens.extend(meta.business_terms.iter().filter_map(|t| cell_token(TERM_PREFIX, t)));
    }
    if fields.contains(&MetaField::GlossaryTerms) {
        tokens.extend(meta.glossary_terms.iter().filter_map(|t| cell_token(TERM_PREFIX, t)));
    }
    tokens
}

/// One sentence per line, tokens separated by single spaces, LF endings.
pub fn dump_corpus(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TierPath;

    fn entry(id: &str, name: &str, path: &[&str]) -> StandardEntry {
        StandardEntry {
            id: id.into(),
            meta: ColumnMeta::named(name),
            path: TierPath::new(path.iter().copied()).unwrap(),
        }
    }

    #[test]
    fn entry_sentences() {
        assert_eq!(
            textify_entry(&entry("e1", "Used Plates", &["Metal"])).0,
            ["name:used_plates", "t1:metal"]
        );
        assert_eq!(
            textify_entry(&entry("e2", "straw", &["plastics", "soft plastics"])).0,
            ["name:straw", "t1:plastics", "t2:soft_plastics"]
        );
        assert_eq!(textify_entry(&entry("e3", "x", &[])).0, ["name:x"]);
    }

    #[test]
    fn terms_become_tokens() {
        let mut e = entry("e1", "bag", &["plastics"]);
        e.meta.business_terms = vec!["Single Use".into()];
        e.meta.glossary_terms = vec!["carrier".into()];
        assert_eq!(
            textify_entry(&e).0,
            ["name:bag", "t1:plastics", "term:single_use", "term:carrier"]
        );
    }

    #[test]
    fn schema_is_bijective_and_grammatical() {
        let schema = StandardSchema {
            name: "s".into(),
            normalized: true,
            entries: vec![
                entry("e1", "plates", &["Metal"]),
                entry("e2", "straw", &["plastics", "soft plastics"]),
                entry("e3", "metal", &["Metal"]),
            ],
        };
        let corpus = textify_schema(&schema);
        assert_eq!(corpus.sentences.len(), 3);
        assert_eq!(corpus.entry_ids, ["e1", "e2", "e3"].map(EntryId::from));
        for s in &corpus.sentences {
            assert!(s.tokens().iter().all(|t| is_valid_token(t)), "{s}");
        }
        // same text "metal" as name and tier stays distinct
        assert!(corpus.sentences[2].tokens().contains(&"name:metal".to_string()));
        assert!(corpus.sentences[2].tokens().contains(&"t1:metal".to_string()));
        for i in 0..3 {
            for j in i + 1..3 {
                assert_ne!(corpus.sentences[i], corpus.sentences[j]);
            }
        }
        assert!(textify_schema(&StandardSchema {
            name: "e".into(),
            normalized: true,
            entries: vec![]
        })
        .sentences
        .is_empty());
    }

    #[test]
    fn token_grammar() {
        assert!(is_valid_token("t8:a_b"));
        assert!(!is_valid_token("t9:a"));
        assert!(!is_valid_token("t10:a"));
        assert!(!is_valid_token("name:"));
        assert!(!is_valid_token("name:A"));
        assert!(!is_valid_token("other:a"));
    }

    #[test]
    fn dump_format() {
        let s = vec![
            Sentence(vec!["name:a".into(), "t1:b".into()]),
            Sentence(vec!["name:c".into()]),
        ];
        assert_eq!(dump_corpus(&s), "name:a t1:b\nname:c\n");
    }
}
