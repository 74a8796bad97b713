//! Shared domain types for standard schemas, source schemas, crosswalk
//! results and steward decisions.
//!
//! Everything here is plain data. Construction is cheap and unchecked except
//! for [`TierPath`], whose invariants are enforced by its constructor;
//! [`validate_schema`] reports everything else.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::normalize_name;

/// Maximum number of tiers in an ontology path.
pub const MAX_TIER_DEPTH: usize = 8;

/// Default qualified-match threshold on the 0..=100 scale.
pub const DEFAULT_THRESHOLD: u32 = 70;

/// Stable identifier of a standard-schema entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntryId(pub String);

impl EntryId {
    /// Id assigned at ingest to the entry that appeared `ordinal`-th (1-based).
    pub fn from_ordinal(ordinal: usize) -> Self {
        EntryId(format!("e{ordinal:04}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntryId {
    fn from(s: &str) -> Self {
        EntryId(s.to_string())
    }
}

/// Descriptive metadata for one column.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    #[serde(default)]
    pub verbose_name: Option<String>,
    #[serde(default)]
    pub business_terms: Vec<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub glossary_terms: Vec<String>,
    #[serde(default)]
    pub dictionary_entry: Option<String>,
}

impl ColumnMeta {
    pub fn named(name: impl Into<String>) -> Self {
        ColumnMeta {
            name: name.into(),
            ..Default::default()
        }
    }
}

/// Ontology tiers, coarsest first. An empty path means no ontology is assigned.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TierPath(Vec<String>);

impl TierPath {
    pub fn new<I, S>(tiers: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tiers: Vec<String> = tiers.into_iter().map(Into::into).collect();
        if tiers.len() > MAX_TIER_DEPTH {
            return Err(Error::InvalidPath(format!(
                "depth {} exceeds {MAX_TIER_DEPTH}",
                tiers.len()
            )));
        }
        if let Some(i) = tiers.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::InvalidPath(format!("tier {} is empty", i + 1)));
        }
        if let Some(w) = tiers.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidPath(format!(
                "adjacent tiers repeat {:?}",
                w[0]
            )));
        }
        Ok(TierPath(tiers))
    }

    pub fn empty() -> Self {
        TierPath(Vec::new())
    }

    pub fn tiers(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<&str> {
        self.0.last().map(String::as_str)
    }

    /// `|`-joined rendering used by the mapping table.
    pub fn joined(&self) -> String {
        self.0.join("|")
    }
}

impl TryFrom<Vec<String>> for TierPath {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        TierPath::new(v)
    }
}

impl From<TierPath> for Vec<String> {
    fn from(p: TierPath) -> Self {
        p.0
    }
}

impl fmt::Display for TierPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" > "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardEntry {
    pub id: EntryId,
    pub meta: ColumnMeta,
    pub path: TierPath,
}

/// The target ontology that source columns are crosswalked onto.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardSchema {
    pub name: String,
    #[serde(default)]
    pub normalized: bool,
    pub entries: Vec<StandardEntry>,
}

impl StandardSchema {
    pub fn entry(&self, id: &EntryId) -> Option<&StandardEntry> {
        self.entries.iter().find(|e| &e.id == id)
    }

    pub fn index(&self) -> HashMap<&EntryId, &StandardEntry> {
        self.entries.iter().map(|e| (&e.id, e)).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One of the optional descriptive fields of [`ColumnMeta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaField {
    VerboseName,
    BusinessTerms,
    Description,
    GlossaryTerms,
    DictionaryEntry,
}

impl MetaField {
    pub const ALL: [MetaField; 5] = [
        MetaField::VerboseName,
        MetaField::BusinessTerms,
        MetaField::Description,
        MetaField::GlossaryTerms,
        MetaField::DictionaryEntry,
    ];

    /// Text values this field contributes for `meta`.
    pub fn values(self, meta: &ColumnMeta) -> Vec<&str> {
        match self {
            MetaField::VerboseName => meta.verbose_name.as_deref().into_iter().collect(),
            MetaField::Description => meta.description.as_deref().into_iter().collect(),
            MetaField::DictionaryEntry => meta.dictionary_entry.as_deref().into_iter().collect(),
            MetaField::BusinessTerms => meta.business_terms.iter().map(String::as_str).collect(),
            MetaField::GlossaryTerms => meta.glossary_terms.iter().map(String::as_str).collect(),
        }
    }
}

impl std::str::FromStr for MetaField {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown meta field {s:?}"))
    }
}

/// Which optional fields join the name in comparison strings. Empty by default.
pub type MetaFields = std::collections::BTreeSet<MetaField>;

/// Column metadata of a newly ingested dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSchema {
    pub dataset_id: String,
    pub columns: Vec<ColumnMeta>,
}

impl SourceSchema {
    pub fn check(&self) -> Result<()> {
        if self.dataset_id.trim().is_empty() {
            return Err(Error::Parse {
                row: 0,
                column: "dataset_id".into(),
                message: "dataset_id is empty".into(),
            });
        }
        if self.columns.is_empty() {
            return Err(Error::NoColumns);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Levenshtein,
    Embedding,
    Classifier,
    None,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Levenshtein => "levenshtein",
            Method::Embedding => "embedding",
            Method::Classifier => "classifier",
            Method::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Qualified,
    Weak,
    Unmatched,
}

impl Confidence {
    /// Band for a matched candidate. Qualification is strict: the score must
    /// lie above the threshold.
    pub fn for_score(score: f64, threshold: u32) -> Self {
        if score > f64::from(threshold) {
            Confidence::Qualified
        } else if score > 0.0 {
            Confidence::Weak
        } else {
            Confidence::Unmatched
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::Qualified => "qualified",
            Confidence::Weak => "weak",
            Confidence::Unmatched => "unmatched",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternate {
    pub entry_id: EntryId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosswalkResult {
    pub source_column: String,
    pub matched_entry_id: Option<EntryId>,
    pub predicted_path: TierPath,
    pub score: f64,
    pub method: Method,
    pub confidence: Confidence,
    pub alternates: Vec<Alternate>,
}

impl CrosswalkResult {
    pub fn unmatched(source_column: impl Into<String>) -> Self {
        CrosswalkResult {
            source_column: source_column.into(),
            matched_entry_id: None,
            predicted_path: TierPath::empty(),
            score: 0.0,
            method: Method::None,
            confidence: Confidence::Unmatched,
            alternates: Vec::new(),
        }
    }

    /// Broken invariants of this result under `threshold`; empty when sound.
    pub fn violations(&self, threshold: u32) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=100.0).contains(&self.score) {
            out.push(format!("score {} outside [0,100]", self.score));
        }
        let matched = self.matched_entry_id.is_some();
        let none = self.method == Method::None;
        let unmatched = self.confidence == Confidence::Unmatched;
        if matched == none || none != unmatched {
            out.push("method/match/confidence disagree".into());
        }
        if matched && (self.confidence == Confidence::Qualified) != (self.score > f64::from(threshold))
        {
            out.push(format!(
                "confidence {} inconsistent with score {} at threshold {threshold}",
                self.confidence.as_str(),
                self.score
            ));
        }
        if self.alternates.windows(2).any(|w| w[0].score < w[1].score) {
            out.push("alternates not sorted by score".into());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accepted,
    Overridden,
}

/// One steward decision, the training unit of the feedback classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub source_column: String,
    pub dataset_id: String,
    pub decided_entry_id: EntryId,
    pub decided_path: TierPath,
    pub decision: Decision,
    pub engine_suggestion: Option<EntryId>,
    pub timestamp: i64,
}

/// Reports every broken invariant of `schema`. Never fails.
pub fn validate_schema(schema: &StandardSchema) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen_ids = HashSet::new();
    for entry in &schema.entries {
        let id = &entry.id;
        if id.0.trim().is_empty() {
            out.push("empty id".to_string());
        } else if !seen_ids.insert(id) {
            out.push(format!("duplicate id {id}"));
        }
        if entry.meta.name.trim().is_empty() {
            out.push(format!("empty name in entry {id}"));
        }
        for (field, list) in [
            ("business term", &entry.meta.business_terms),
            ("glossary term", &entry.meta.glossary_terms),
        ] {
            if list.iter().any(|t| t.trim().is_empty()) {
                out.push(format!("empty {field} in entry {id}"));
            }
            let mut seen = HashSet::new();
            if list.iter().any(|t| !seen.insert(t)) {
                out.push(format!("duplicate {field} in entry {id}"));
            }
        }
    }
    if schema.normalized {
        let mut first: HashMap<(Vec<String>, &TierPath), &EntryId> = HashMap::new();
        for entry in &schema.entries {
            let key = (normalize_name(&entry.meta.name).into_tokens(), &entry.path);
            if let Some(prev) = first.get(&key) {
                out.push(format!(
                    "duplicate name and path in entries {prev} and {}",
                    entry.id
                ));
            } else {
                first.insert(key, &entry.id);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, name: &str, path: &[&str]) -> StandardEntry {
        StandardEntry {
            id: id.into(),
            meta: ColumnMeta::named(name),
            path: TierPath::new(path.iter().copied()).unwrap(),
        }
    }

    fn schema(entries: Vec<StandardEntry>) -> StandardSchema {
        StandardSchema {
            name: "t".into(),
            normalized: false,
            entries,
        }
    }

    #[test]
    fn duplicate_id_reported() {
        let s = schema(vec![entry("e1", "a", &[]), entry("e1", "b", &[])]);
        assert_eq!(validate_schema(&s), vec!["duplicate id e1"]);
    }

    #[test]
    fn well_formed_schema_is_clean() {
        let s = schema(vec![
            entry("e1", "plates", &["Metal"]),
            entry("e2", "straw", &["plastics", "soft plastics"]),
            entry("e3", "bottle", &["plastics", "hard plastics"]),
        ]);
        assert!(validate_schema(&s).is_empty());
    }

    #[test]
    fn empty_name_reported() {
        let s = schema(vec![entry("e1", "a", &[]), entry("e2", "  ", &[])]);
        assert_eq!(validate_schema(&s), vec!["empty name in entry e2"]);
    }

    #[test]
    fn term_lists_checked() {
        let mut e = entry("e1", "a", &[]);
        e.meta.business_terms = vec!["x".into(), "x".into(), "".into()];
        let v = validate_schema(&schema(vec![e]));
        assert!(v.contains(&"empty business term in entry e1".to_string()));
        assert!(v.contains(&"duplicate business term in entry e1".to_string()));
    }

    #[test]
    fn normalized_schema_rejects_duplicates() {
        let mut s = schema(vec![
            entry("e1", "Plastic Bag", &["plastics"]),
            entry("e2", "plastic_bag", &["plastics"]),
        ]);
        assert!(validate_schema(&s).is_empty());
        s.normalized = true;
        assert_eq!(
            validate_schema(&s),
            vec!["duplicate name and path in entries e1 and e2"]
        );
    }

    #[test]
    fn tier_path_invariants() {
        assert!(TierPath::new(["a", "a"]).is_err());
        assert!(TierPath::new(["a", ""]).is_err());
        assert!(TierPath::new(vec!["x"; 9]).is_err());
        assert!(TierPath::new(["a", "b", "a"]).is_ok());
        assert!(TierPath::new(Vec::<String>::new()).unwrap().is_empty());
        let bad: std::result::Result<TierPath, _> = serde_json::from_str(r#"["a","a"]"#);
        assert!(bad.is_err());
    }

    #[test]
    fn confidence_threshold_is_strict() {
        assert_eq!(Confidence::for_score(70.0, 70), Confidence::Weak);
        assert_eq!(Confidence::for_score(71.0, 70), Confidence::Qualified);
        assert_eq!(Confidence::for_score(0.0, 70), Confidence::Unmatched);
    }

    #[test]
    fn ordinal_ids_sort_numerically() {
        assert_eq!(EntryId::from_ordinal(7).as_str(), "e0007");
        assert!(EntryId::from_ordinal(9) < EntryId::from_ordinal(10));
    }
}
