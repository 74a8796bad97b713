//! Loading standard and source schemas from CSV/JSON, column-name
//! normalization, and standard-schema refinement.
//!
//! CSV layout: UTF-8, header row, mandatory `name` column; optional
//! `verbose_name`, `description`, `dictionary_entry`, `business_terms` and
//! `glossary_terms` (both `;`-joined) and tier columns `T1`, `T2`, ... in
//! ascending order. JSON: an array of objects with the same field names and a
//! `path` string array in place of the tier columns. A standard schema may
//! also be given as the canonical document written by [`to_canonical_json`].

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{
    ColumnMeta, EntryId, SourceSchema, StandardEntry, StandardSchema, TierPath, MAX_TIER_DEPTH,
};

/// A normalized column name: lowercase ASCII alphanumeric tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.join(sep)
    }
}

/// Splits on whitespace, `_`, `-`, `.` and lower-to-upper camelCase
/// boundaries, lowercases, and strips everything outside `[a-z0-9]`.
pub fn normalize_name(raw: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;

    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        if !current.is_empty() {
            tokens.push(std::mem::take(current));
        }
    };

    for c in raw.chars() {
        if c.is_whitespace() || matches!(c, '_' | '-' | '.') {
            flush(&mut current, &mut tokens);
            prev = None;
            continue;
        }
        if c.is_uppercase() && prev.is_some_and(char::is_lowercase) {
            flush(&mut current, &mut tokens);
        }
        for l in c.to_lowercase() {
            if l.is_ascii_alphanumeric() {
                current.push(l);
            }
        }
        prev = Some(c);
    }
    flush(&mut current, &mut tokens);
    TokenSeq(tokens)
}

/// Canonical comparison form of a raw name: normalized tokens joined by single spaces.
pub fn canonical_name(raw: &str) -> String {
    normalize_name(raw).join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(text)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("schema")
        .to_string()
}

pub fn load_standard_schema(path: &Path, format: Format) -> Result<StandardSchema> {
    let text = read_file(path)?;
    let name = file_stem(path);
    match format {
        Format::Csv => parse_standard_csv(&text, &name),
        Format::Json => parse_standard_json(&text, &name),
    }
}

pub fn load_source_schema(path: &Path, format: Format) -> Result<SourceSchema> {
    let text = read_file(path)?;
    let dataset_id = file_stem(path);
    match format {
        Format::Csv => parse_source_csv(&text, &dataset_id),
        Format::Json => parse_source_json(&text, &dataset_id),
    }
}

/// Treats the header row of a raw dataset export as the source columns.
/// Data rows are never read.
pub fn load_source_from_dataset_header(path: &Path) -> Result<SourceSchema> {
    let text = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(&e, "header"))?;
    let columns: Vec<ColumnMeta> = headers
        .iter()
        .filter(|h| !h.trim().is_empty())
        .map(|h| ColumnMeta::named(h.trim()))
        .collect();
    let schema = SourceSchema {
        dataset_id: file_stem(path),
        columns,
    };
    schema.check()?;
    Ok(schema)
}

fn csv_error(e: &csv::Error, column: &str) -> Error {
    let row = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or_default();
    Error::Parse {
        row,
        column: column.to_string(),
        message: e.to_string(),
    }
}

struct CsvLayout {
    name: usize,
    verbose_name: Option<usize>,
    description: Option<usize>,
    dictionary_entry: Option<usize>,
    business_terms: Option<usize>,
    glossary_terms: Option<usize>,
    tiers: Vec<usize>,
}

impl CsvLayout {
    fn from_headers(headers: &csv::StringRecord) -> Result<Self> {
        let find = |want: &str| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(want))
        };
        let name = find("name").ok_or(Error::MissingNameColumn)?;

        let mut tiers = Vec::new();
        for (col, h) in headers.iter().enumerate() {
            let h = h.trim();
            let Some(level) = h
                .strip_prefix(['T', 't'])
                .and_then(|d| d.parse::<usize>().ok())
            else {
                continue;
            };
            if level != tiers.len() + 1 {
                return Err(Error::Parse {
                    row: 1,
                    column: h.to_string(),
                    message: format!("expected tier column T{}", tiers.len() + 1),
                });
            }
            if level > MAX_TIER_DEPTH {
                return Err(Error::Parse {
                    row: 1,
                    column: h.to_string(),
                    message: format!("at most {MAX_TIER_DEPTH} tier columns"),
                });
            }
            tiers.push(col);
        }

        Ok(CsvLayout {
            name,
            verbose_name: find("verbose_name"),
            description: find("description"),
            dictionary_entry: find("dictionary_entry"),
            business_terms: find("business_terms"),
            glossary_terms: find("glossary_terms"),
            tiers,
        })
    }

    fn column(&self, row: usize, record: &csv::StringRecord) -> Result<ColumnMeta> {
        let cell = |idx: Option<usize>| idx.and_then(|i| record.get(i)).map(str::trim);
        let text = |idx| cell(idx).filter(|s| !s.is_empty()).map(str::to_string);
        let name = cell(Some(self.name)).unwrap_or_default();
        if name.is_empty() {
            return Err(Error::Parse {
                row,
                column: "name".into(),
                message: "empty name".into(),
            });
        }
        Ok(ColumnMeta {
            name: name.to_string(),
            verbose_name: text(self.verbose_name),
            business_terms: split_terms(cell(self.business_terms).unwrap_or_default()),
            description: text(self.description),
            glossary_terms: split_terms(cell(self.glossary_terms).unwrap_or_default()),
            dictionary_entry: text(self.dictionary_entry),
        })
    }

    fn path(&self, row: usize, record: &csv::StringRecord) -> Result<TierPath> {
        let tiers: Vec<&str> = self
            .tiers
            .iter()
            .map(|&i| record.get(i).unwrap_or("").trim())
            .take_while(|t| !t.is_empty())
            .collect();
        TierPath::new(tiers.iter().copied()).map_err(|e| Error::Parse {
            row,
            column: "T1".into(),
            message: e.to_string(),
        })
    }
}

fn split_terms(cell: &str) -> Vec<String> {
    dedup_terms(cell.split(';').map(str::to_string).collect())
}

fn dedup_terms(terms: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    terms
        .into_iter()
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty() && seen.insert(t.clone()))
        .collect()
}

fn clean_meta(mut meta: ColumnMeta) -> ColumnMeta {
    meta.name = meta.name.trim().to_string();
    meta.business_terms = dedup_terms(meta.business_terms);
    meta.glossary_terms = dedup_terms(meta.glossary_terms);
    meta
}

fn csv_rows(text: &str) -> Result<(CsvLayout, Vec<(usize, csv::StringRecord)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(&e, "header"))?.clone();
    let layout = CsvLayout::from_headers(&headers)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, "record"))?;
        let row = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        rows.push((row, record));
    }
    Ok((layout, rows))
}

pub fn parse_standard_csv(text: &str, schema_name: &str) -> Result<StandardSchema> {
    let (layout, rows) = csv_rows(text)?;
    let entries = rows
        .iter()
        .enumerate()
        .map(|(i, (row, record))| {
            Ok(StandardEntry {
                id: EntryId::from_ordinal(i + 1),
                meta: layout.column(*row, record)?,
                path: layout.path(*row, record)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StandardSchema {
        name: schema_name.to_string(),
        normalized: false,
        entries,
    })
}

pub fn parse_source_csv(text: &str, dataset_id: &str) -> Result<SourceSchema> {
    let (layout, rows) = csv_rows(text)?;
    let columns = rows
        .iter()
        .map(|(row, record)| layout.column(*row, record))
        .collect::<Result<Vec<_>>>()?;
    let schema = SourceSchema {
        dataset_id: dataset_id.to_string(),
        columns,
    };
    schema.check()?;
    Ok(schema)
}

#[derive(Deserialize)]
struct FlatRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(flatten)]
    meta: ColumnMeta,
    #[serde(default)]
    path: Option<TierPath>,
}

fn json_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    let inner = e.into_inner();
    Error::Parse {
        row: inner.line(),
        column: path,
        message: inner.to_string(),
    }
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(json_error)
}

pub fn parse_standard_json(text: &str, schema_name: &str) -> Result<StandardSchema> {
    let value: serde_json::Value = from_json(text)?;
    if value.is_object() {
        let mut schema: StandardSchema = from_json(text)?;
        for e in &mut schema.entries {
            e.meta = clean_meta(std::mem::take(&mut e.meta));
        }
        return Ok(schema);
    }
    let items: Vec<serde_json::Value> = serde_json::from_value(value)?;
    let mut entries = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let record: FlatRecord = serde_path_to_error::deserialize(item).map_err(|e| {
            let path = e.path().to_string();
            Error::Parse {
                row: i + 1,
                column: path,
                message: e.into_inner().to_string(),
            }
        })?;
        if record.meta.name.trim().is_empty() {
            return Err(Error::Parse {
                row: i + 1,
                column: "name".into(),
                message: "empty name".into(),
            });
        }
        entries.push(StandardEntry {
            id: record
                .id
                .map(EntryId)
                .unwrap_or_else(|| EntryId::from_ordinal(i + 1)),
            meta: clean_meta(record.meta),
            path: record.path.unwrap_or_default(),
        });
    }
    Ok(StandardSchema {
        name: schema_name.to_string(),
        normalized: false,
        entries,
    })
}

pub fn parse_source_json(text: &str, dataset_id: &str) -> Result<SourceSchema> {
    let value: serde_json::Value = from_json(text)?;
    let schema = if value.is_object() {
        from_json::<SourceSchema>(text)?
    } else {
        let columns: Vec<ColumnMeta> = from_json(text)?;
        SourceSchema {
            dataset_id: dataset_id.to_string(),
            columns,
        }
    };
    let schema = SourceSchema {
        dataset_id: schema.dataset_id,
        columns: schema.columns.into_iter().map(clean_meta).collect(),
    };
    if let Some(i) = schema.columns.iter().position(|c| c.name.is_empty()) {
        return Err(Error::Parse {
            row: i + 1,
            column: "name".into(),
            message: "empty name".into(),
        });
    }
    schema.check()?;
    Ok(schema)
}

/// What [`refine_schema_with_report`] dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RefineReport {
    /// Entries whose name normalizes to nothing.
    pub erroneous: Vec<EntryId>,
    /// `(removed, kept)` pairs of duplicate entries.
    pub duplicates: Vec<(EntryId, EntryId)>,
}

pub fn refine_schema(schema: &StandardSchema) -> StandardSchema {
    refine_schema_with_report(schema).0
}

/// Drops entries with an empty normalized name and, among entries sharing
/// both normalized tokens and tier path, keeps only the first.
pub fn refine_schema_with_report(schema: &StandardSchema) -> (StandardSchema, RefineReport) {
    let mut report = RefineReport::default();
    let mut kept: std::collections::HashMap<(TokenSeq, &TierPath), &EntryId> =
        std::collections::HashMap::new();
    let mut entries = Vec::with_capacity(schema.entries.len());
    for entry in &schema.entries {
        let tokens = normalize_name(&entry.meta.name);
        if tokens.is_empty() {
            report.erroneous.push(entry.id.clone());
            continue;
        }
        match kept.entry((tokens, &entry.path)) {
            std::collections::hash_map::Entry::Occupied(o) => {
                report
                    .duplicates
                    .push((entry.id.clone(), (*o.get()).clone()));
            }
            std::collections::hash_map::Entry::Vacant(v) => {
                v.insert(&entry.id);
                entries.push(entry.clone());
            }
        }
    }
    let refined = StandardSchema {
        name: schema.name.clone(),
        normalized: true,
        entries,
    };
    (refined, report)
}

/// Pretty-printed canonical JSON document with a trailing newline.
pub fn to_canonical_json(schema: &StandardSchema) -> String {
    let mut s = serde_json::to_string_pretty(schema).expect("schema serializes");
    s.push('\n');
    s
}
