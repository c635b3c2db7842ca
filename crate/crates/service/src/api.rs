//! Query-string level operations shared by the HTTP handlers and the CLI.

use curator_core::index::{export_csv, parse_query, FacetDistribution, Index, SeriesDocument, SortSpec};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const DEFAULT_PAGE: usize = 20;

/// One page of search results with the full documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPage {
    pub total: usize,
    pub from: usize,
    pub size: usize,
    pub hits: Vec<SeriesDocument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn search(index: &Index, q: &str, from: usize, size: usize, sort: Option<&str>) -> Result<SearchPage, ApiError> {
    let ast = parse_query(q)?;
    let sort = sort.and_then(SortSpec::parse);
    let snap = index.snapshot();
    let res = snap.search(&ast, from, size, sort.as_ref())?;
    Ok(SearchPage {
        total: res.total,
        from: res.from,
        size: res.size,
        hits: res
            .hits
            .iter()
            .filter_map(|h| snap.get(&h.series_uid))
            .map(|d| SeriesDocument::clone(&d))
            .collect(),
        warnings: res.warnings,
    })
}

pub fn aggregate(index: &Index, q: &str, fields: &[String]) -> Result<FacetDistribution, ApiError> {
    if fields.is_empty() {
        return Err(ApiError::bad_request("at least one field is required"));
    }
    let ast = parse_query(q)?;
    Ok(index.aggregate(&ast, fields))
}

pub fn aggregate_csv(index: &Index, q: &str, field: &str) -> Result<Vec<u8>, ApiError> {
    let dist = aggregate(index, q, &[field.to_string()])?;
    Ok(export_csv(&dist, field)?)
}

/// Splits a comma-separated field list, dropping blanks.
pub fn field_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|f| !f.is_empty()).map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub value: String,
    pub count: usize,
}

pub fn autocomplete(index: &Index, field: &str, prefix: &str, limit: usize) -> Vec<Completion> {
    index
        .autocomplete(field, prefix, limit)
        .into_iter()
        .map(|(value, count)| Completion { value, count })
        .collect()
}
