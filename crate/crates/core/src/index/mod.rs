//! Series documents, the query language, and the in-process search index.
//!
//! Matching rules, all case-insensitive:
//!
//! * A bare term matches a token of any free-text field or a whole keyword value.
//! * A phrase matches a whole keyword value, or consecutive tokens of a free-text value.
//! * `field:pattern` matches whole values or tokens of that field with `*`/`?`
//!   wildcards; numbers and dates also match by value (`StudyDate:20200131`).
//!   Quoting the pattern turns wildcards off.
//! * Ranges compare numbers numerically, dates chronologically and everything else
//!   by lowercased text.

mod document;
mod engine;
mod facets;
mod query;
mod wildcard;

pub use document::{
    format_number, merge_documents, merge_instance, parse_date, to_document, to_document_at, tokenize,
    FieldValue, SeriesDocument, RESERVED_FIELDS,
};
pub use engine::{
    sort_documents, Hit, Index, ReplayReport, SearchResults, Snapshot, SortKey, SortSpec, UpsertOutcome,
    MAX_PAGE_SIZE,
};
pub use facets::{export_csv, Bucket, FacetDistribution, FieldFacet};
pub use query::{parse_query, QueryAst, QueryParseError};
pub use wildcard::Wildcard;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("object has no SeriesInstanceUID")]
    MissingSeriesUid,
    #[error("instance belongs to series {found}, not {expected}")]
    SeriesUidMismatch { expected: String, found: String },
    #[error("unknown series {0}")]
    UnknownSeries(String),
    #[error("field `{0}` is not in the distribution")]
    FieldNotInDistribution(String),
    #[error("page size {0} exceeds the maximum of 1000")]
    PageTooLarge(usize),
    #[error("index journal: {0}")]
    Journal(String),
}

impl IndexError {
    pub fn code(&self) -> &'static str {
        match self {
            IndexError::MissingSeriesUid => "missing_series_uid",
            IndexError::SeriesUidMismatch { .. } => "series_uid_mismatch",
            IndexError::UnknownSeries(_) => "unknown_series",
            IndexError::FieldNotInDistribution(_) => "field_not_in_distribution",
            IndexError::PageTooLarge(_) => "page_too_large",
            IndexError::Journal(_) => "storage_error",
        }
    }
}

impl From<std::io::Error> for IndexError {
    fn from(e: std::io::Error) -> Self {
        IndexError::Journal(e.to_string())
    }
}
