//! Metadata crosswalk engine.
//!
//! Maps the columns of heterogeneous source schemas onto a standard schema
//! and infers each column's ontology tier path. Two matchers are available:
//! edit-distance scoring ([`lev`]) and nearest-record retrieval over
//! embeddings trained on the textified standard schema ([`textify`],
//! [`embedding`]). [`crosswalk`] combines them with a classifier trained on
//! steward decisions, which the [`review`] service collects.

pub mod crosswalk;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod ingest;
pub mod lev;
pub mod model;
pub mod review;
pub mod server;
pub mod textify;

pub use error::{Error, Result};
pub use model::{
    ColumnMeta, Confidence, CrosswalkResult, EntryId, GroundTruthRecord, Method, SourceSchema,
    StandardEntry, StandardSchema, TierPath,
};
