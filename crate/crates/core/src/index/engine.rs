use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::ops::Bound;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use chrono::NaiveDate;
use im::{OrdMap, OrdSet};
use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use super::document::{format_number, parse_date, tokenize, FieldValue, SeriesDocument};
use super::facets::{Bucket, FacetDistribution, FieldFacet};
use super::query::QueryAst;
use super::wildcard::Wildcard;
use super::IndexError;
use crate::journal;

pub const MAX_PAGE_SIZE: usize = 1000;
const EXACT_NUMBER_BUCKETS: usize = 50;
const NUMBER_BINS: usize = 10;

type Postings<K> = OrdMap<K, OrdSet<u32>>;

#[derive(Clone, Default)]
struct FieldIndex {
    docs: OrdSet<u32>,
    /// Lowercased whole values of keyword, name and text fields.
    values: Postings<String>,
    /// Tokens of text and name fields.
    tokens: Postings<String>,
    numbers: Postings<OrderedFloat<f64>>,
    dates: Postings<NaiveDate>,
    /// Stored display values, case preserved, for autocomplete.
    exact: Postings<String>,
}

/// Immutable view of the index; readers keep one for as long as they need.
#[derive(Clone, Default)]
pub struct Snapshot {
    docs: OrdMap<u32, Arc<SeriesDocument>>,
    ids: OrdMap<String, u32>,
    next_id: u32,
    fields: OrdMap<String, FieldIndex>,
    /// Free-search postings: text tokens and lowercased keyword values.
    terms: Postings<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsertOutcome {
    Created,
    Updated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub series_uid: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResults {
    pub total: usize,
    pub hits: Vec<Hit>,
    pub from: usize,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Sort order for results: a field name, `-` prefixed for descending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortSpec {
    pub field: String,
    pub descending: bool,
}

impl SortSpec {
    pub fn parse(s: &str) -> Option<SortSpec> {
        let s = s.trim();
        let (field, descending) = match s.strip_prefix('-') {
            Some(f) => (f, true),
            None => (s.strip_prefix('+').unwrap_or(s), false),
        };
        (!field.is_empty()).then(|| SortSpec {
            field: field.to_string(),
            descending,
        })
    }
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Eq, Ord)]
pub enum SortKey {
    Number(OrderedFloat<f64>),
    Date(NaiveDate),
    Text(String, String),
}

impl SortKey {
    /// Key from the first stored value of a field.
    pub fn of(value: &FieldValue) -> Option<SortKey> {
        Some(match value {
            FieldValue::Numbers(v) => SortKey::Number(OrderedFloat(*v.first()?)),
            FieldValue::Dates(v) => SortKey::Date(*v.first()?),
            FieldValue::Keywords(v) | FieldValue::Text(v) | FieldValue::Name(v) => {
                let s = v.first()?;
                SortKey::Text(s.to_lowercase(), s.clone())
            }
        })
    }
}

struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: u32) -> Bits {
        Bits(vec![0; (n as usize).div_ceil(64)])
    }
    fn insert(&mut self, i: u32) {
        self.0[i as usize / 64] |= 1 << (i % 64);
    }
    fn from_set(n: u32, set: &OrdSet<u32>) -> Bits {
        let mut b = Bits::empty(n);
        set.iter().for_each(|&i| b.insert(i));
        b
    }
    fn union_with(&mut self, other: &Bits) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a |= b);
    }
    fn intersect_with(&mut self, other: &Bits) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a &= b);
    }
    fn subtract(&mut self, other: &Bits) {
        self.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a &= !b);
    }
    fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            (0..64).filter(move |b| word & (1u64 << b) != 0).map(move |b| (w * 64 + b) as u32)
        })
    }
}

fn add_posting<K: Ord + Clone>(map: &mut Postings<K>, key: K, id: u32) {
    let mut set = map.get(&key).cloned().unwrap_or_default();
    set.insert(id);
    map.insert(key, set);
}

fn remove_posting<K: Ord + Clone>(map: &mut Postings<K>, key: &K, id: u32) {
    if let Some(set) = map.get(key) {
        let mut set = set.clone();
        set.remove(&id);
        if set.is_empty() {
            map.remove(key);
        } else {
            map.insert(key.clone(), set);
        }
    }
}

/// Every posting key a document contributes, grouped by structure.
#[derive(Default)]
struct DocKeys {
    fields: BTreeMap<String, FieldKeys>,
    terms: BTreeSet<String>,
}

#[derive(Default)]
struct FieldKeys {
    values: BTreeSet<String>,
    tokens: BTreeSet<String>,
    numbers: BTreeSet<OrderedFloat<f64>>,
    dates: BTreeSet<NaiveDate>,
    exact: BTreeSet<String>,
}

fn doc_keys(doc: &SeriesDocument) -> DocKeys {
    let mut out = DocKeys::default();
    for (name, value) in doc.all_fields() {
        let free = SeriesDocument::is_free_search_field(&name);
        let fk = out.fields.entry(name).or_default();
        match &value {
            FieldValue::Numbers(v) => fk.numbers.extend(v.iter().map(|n| OrderedFloat(*n))),
            FieldValue::Dates(v) => {
                fk.dates.extend(v.iter().copied());
                fk.exact.extend(value.display_values());
            }
            _ => {
                fk.exact.extend(value.display_values());
                fk.values.extend(value.display_values().iter().map(|s| s.to_lowercase()));
            }
        }
        for t in value.text_values() {
            fk.tokens.extend(tokenize(t));
        }
        if free {
            for t in value.text_values() {
                out.terms.extend(tokenize(t));
            }
            out.terms.extend(value.keyword_values().iter().map(|s| s.to_lowercase()));
        }
    }
    out
}

fn contains_phrase(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Whether the text values contain the phrase's tokens contiguously.
fn text_has_phrase(values: &[String], phrase: &[String]) -> bool {
    values.iter().any(|v| contains_phrase(&tokenize(v), phrase))
}

fn wildcard_scan(map: &Postings<String>, pattern: &str, out: &mut Bits) {
    let w = Wildcard::new(pattern);
    if !w.has_wildcards() {
        if let Some(set) = map.get(pattern) {
            set.iter().for_each(|&i| out.insert(i));
        }
        return;
    }
    let prefix = w.literal_prefix().to_string();
    for (key, set) in map.range(prefix.clone()..) {
        if !key.starts_with(&prefix) {
            break;
        }
        if w.matches(key) {
            set.iter().for_each(|&i| out.insert(i));
        }
    }
}

fn range_scan<K: Ord + Clone>(map: &Postings<K>, lo: Option<&K>, hi: Option<&K>, lo_inc: bool, hi_inc: bool, out: &mut Bits) {
    let start = match lo {
        None => Bound::Unbounded,
        Some(k) if lo_inc => Bound::Included(k.clone()),
        Some(k) => Bound::Excluded(k.clone()),
    };
    for (key, set) in map.range((start, Bound::Unbounded)) {
        if let Some(h) = hi {
            match key.cmp(h) {
                Ordering::Greater => break,
                Ordering::Equal if !hi_inc => break,
                _ => {}
            }
        }
        set.iter().for_each(|&i| out.insert(i));
    }
}

/// Parses an optional range bound; `Err` means the bound does not apply to this kind.
fn bound<T>(b: &Option<String>, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>, ()> {
    match b {
        None => Ok(None),
        Some(s) => parse(s).map(Some).ok_or(()),
    }
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, series_uid: &str) -> Option<Arc<SeriesDocument>> {
        self.ids.get(series_uid).and_then(|id| self.docs.get(id)).cloned()
    }

    /// All documents in series UID order.
    pub fn documents(&self) -> impl Iterator<Item = &Arc<SeriesDocument>> + '_ {
        self.ids.values().filter_map(|id| self.docs.get(id))
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.fields.keys().map(|k| k.as_str())
    }

    pub fn has_field(&self, name: &str) -> bool {
        self.fields.contains_key(name)
    }

    fn live(&self) -> Bits {
        let mut b = Bits::empty(self.next_id);
        self.docs.keys().for_each(|&i| b.insert(i));
        b
    }

    fn insert_doc(&mut self, doc: SeriesDocument) -> UpsertOutcome {
        let (id, outcome) = match self.ids.get(&doc.series_uid) {
            Some(&id) => {
                let old = self.docs.get(&id).cloned().expect("id without document");
                self.unindex(id, &old);
                (id, UpsertOutcome::Updated)
            }
            None => {
                let id = self.next_id;
                self.next_id += 1;
                self.ids.insert(doc.series_uid.clone(), id);
                (id, UpsertOutcome::Created)
            }
        };
        let keys = doc_keys(&doc);
        for (name, fk) in keys.fields {
            let mut fi = self.fields.get(&name).cloned().unwrap_or_default();
            fi.docs.insert(id);
            fk.values.into_iter().for_each(|k| add_posting(&mut fi.values, k, id));
            fk.tokens.into_iter().for_each(|k| add_posting(&mut fi.tokens, k, id));
            fk.numbers.into_iter().for_each(|k| add_posting(&mut fi.numbers, k, id));
            fk.dates.into_iter().for_each(|k| add_posting(&mut fi.dates, k, id));
            fk.exact.into_iter().for_each(|k| add_posting(&mut fi.exact, k, id));
            self.fields.insert(name, fi);
        }
        keys.terms.into_iter().for_each(|k| add_posting(&mut self.terms, k, id));
        self.docs.insert(id, Arc::new(doc));
        outcome
    }

    fn unindex(&mut self, id: u32, doc: &SeriesDocument) {
        let keys = doc_keys(doc);
        for (name, fk) in keys.fields {
            let Some(fi) = self.fields.get(&name) else { continue };
            let mut fi = fi.clone();
            fi.docs.remove(&id);
            fk.values.iter().for_each(|k| remove_posting(&mut fi.values, k, id));
            fk.tokens.iter().for_each(|k| remove_posting(&mut fi.tokens, k, id));
            fk.numbers.iter().for_each(|k| remove_posting(&mut fi.numbers, k, id));
            fk.dates.iter().for_each(|k| remove_posting(&mut fi.dates, k, id));
            fk.exact.iter().for_each(|k| remove_posting(&mut fi.exact, k, id));
            // a field stays known once seen, even with no documents left
            self.fields.insert(name, fi);
        }
        keys.terms.iter().for_each(|k| remove_posting(&mut self.terms, k, id));
    }

    fn eval(&self, ast: &QueryAst, warnings: &mut Vec<String>) -> Bits {
        let n = self.next_id;
        match ast {
            QueryAst::MatchAll => self.live(),
            QueryAst::Term(p) => {
                let mut out = Bits::empty(n);
                wildcard_scan(&self.terms, &p.to_lowercase(), &mut out);
                out
            }
            QueryAst::Phrase(text) => {
                let lower = text.to_lowercase();
                let mut out = Bits::empty(n);
                let phrase = tokenize(text);
                if phrase.len() == 1 && phrase[0] == lower {
                    if let Some(set) = self.terms.get(&lower) {
                        set.iter().for_each(|&i| out.insert(i));
                    }
                    return out;
                }
                for &id in self.terms.get(&lower).into_iter().flatten() {
                    let doc = &self.docs[&id];
                    let hit = doc.all_fields().iter().any(|(name, v)| {
                        SeriesDocument::is_free_search_field(name)
                            && v.keyword_values().iter().any(|k| k.to_lowercase() == lower)
                    });
                    if hit {
                        out.insert(id);
                    }
                }
                for id in self.phrase_candidates(&self.terms, &phrase).iter() {
                    let doc = &self.docs[&id];
                    let hit = doc.all_fields().iter().any(|(name, v)| {
                        SeriesDocument::is_free_search_field(name) && text_has_phrase(v.text_values(), &phrase)
                    });
                    if hit {
                        out.insert(id);
                    }
                }
                out
            }
            QueryAst::FieldMatch { field, pattern, quoted } => {
                let mut out = Bits::empty(n);
                let Some(fi) = self.fields.get(field) else {
                    warnings.push(format!("unknown field `{field}`"));
                    return out;
                };
                let lower = pattern.to_lowercase();
                if *quoted {
                    if let Some(set) = fi.values.get(&lower) {
                        set.iter().for_each(|&i| out.insert(i));
                    }
                    let phrase = tokenize(pattern);
                    for id in self.phrase_candidates(&fi.tokens, &phrase).iter() {
                        if let Some(v) = self.docs[&id].field(field) {
                            if text_has_phrase(v.text_values(), &phrase) {
                                out.insert(id);
                            }
                        }
                    }
                } else {
                    wildcard_scan(&fi.values, &lower, &mut out);
                    wildcard_scan(&fi.tokens, &lower, &mut out);
                }
                let literal = |display: &str| {
                    if *quoted {
                        display == lower
                    } else {
                        Wildcard::new(&lower).matches(display)
                    }
                };
                let number = pattern.trim().parse::<f64>().ok();
                for (key, set) in fi.numbers.iter() {
                    if number == Some(key.0) || literal(&format_number(key.0)) {
                        set.iter().for_each(|&i| out.insert(i));
                    }
                }
                let date = parse_date(pattern);
                for (key, set) in fi.dates.iter() {
                    if date == Some(*key) || literal(&key.format("%Y-%m-%d").to_string()) {
                        set.iter().for_each(|&i| out.insert(i));
                    }
                }
                out
            }
            QueryAst::Range {
                field,
                lo,
                hi,
                lo_inclusive,
                hi_inclusive,
            } => {
                let mut out = Bits::empty(n);
                let Some(fi) = self.fields.get(field) else {
                    warnings.push(format!("unknown field `{field}`"));
                    return out;
                };
                let (li, hi_inc) = (*lo_inclusive, *hi_inclusive);
                let num = |s: &str| s.trim().parse::<f64>().ok().filter(|f| f.is_finite()).map(OrderedFloat);
                if let (Ok(l), Ok(h)) = (bound(lo, num), bound(hi, num)) {
                    range_scan(&fi.numbers, l.as_ref(), h.as_ref(), li, hi_inc, &mut out);
                }
                if let (Ok(l), Ok(h)) = (bound(lo, parse_date), bound(hi, parse_date)) {
                    range_scan(&fi.dates, l.as_ref(), h.as_ref(), li, hi_inc, &mut out);
                }
                let text = |s: &str| Some(s.to_lowercase());
                if let (Ok(l), Ok(h)) = (bound(lo, text), bound(hi, text)) {
                    range_scan(&fi.values, l.as_ref(), h.as_ref(), li, hi_inc, &mut out);
                }
                out
            }
            QueryAst::Not(inner) => {
                let mut all = self.live();
                all.subtract(&self.eval(inner, warnings));
                all
            }
            QueryAst::And(items) => {
                let mut acc = self.live();
                for item in items {
                    acc.intersect_with(&self.eval(item, warnings));
                }
                acc
            }
            QueryAst::Or(items) => {
                let mut acc = Bits::empty(n);
                for item in items {
                    acc.union_with(&self.eval(item, warnings));
                }
                acc
            }
        }
    }

    /// Documents holding every token of the phrase, before the adjacency check.
    fn phrase_candidates(&self, postings: &Postings<String>, phrase: &[String]) -> Bits {
        let mut acc = Bits::empty(self.next_id);
        let Some((first, rest)) = phrase.split_first() else {
            return acc;
        };
        let Some(set) = postings.get(first) else {
            return acc;
        };
        acc = Bits::from_set(self.next_id, set);
        for tok in rest {
            match postings.get(tok) {
                Some(set) => acc.intersect_with(&Bits::from_set(self.next_id, set)),
                None => return Bits::empty(self.next_id),
            }
        }
        acc
    }

    /// Matching documents in result order; warnings note unknown fields.
    pub fn matching(&self, ast: &QueryAst, sort: Option<&SortSpec>) -> (Vec<Arc<SeriesDocument>>, Vec<String>) {
        let mut warnings = Vec::new();
        let bits = self.eval(ast, &mut warnings);
        let mut docs: Vec<Arc<SeriesDocument>> = bits.iter().filter_map(|id| self.docs.get(&id).cloned()).collect();
        sort_documents(&mut docs, sort);
        warnings.dedup();
        (docs, warnings)
    }

    pub fn search(
        &self,
        ast: &QueryAst,
        from: usize,
        size: usize,
        sort: Option<&SortSpec>,
    ) -> Result<SearchResults, IndexError> {
        if size > MAX_PAGE_SIZE {
            return Err(IndexError::PageTooLarge(size));
        }
        let (docs, warnings) = self.matching(ast, sort);
        Ok(SearchResults {
            total: docs.len(),
            hits: docs
                .iter()
                .skip(from)
                .take(size)
                .map(|d| Hit {
                    series_uid: d.series_uid.clone(),
                    score: 1.0,
                })
                .collect(),
            from,
            size,
            warnings,
        })
    }

    pub fn autocomplete(&self, field: &str, prefix: &str, limit: usize) -> Vec<(String, usize)> {
        let Some(fi) = self.fields.get(field) else {
            return Vec::new();
        };
        let prefix = prefix.to_lowercase();
        let mut out: Vec<(String, usize)> = fi
            .exact
            .iter()
            .map(|(v, set)| (v.clone(), set.len()))
            .chain(fi.numbers.iter().map(|(n, set)| (format_number(n.0), set.len())))
            .filter(|(v, _)| v.to_lowercase().starts_with(&prefix))
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out.truncate(limit);
        out
    }

    pub fn aggregate(&self, ast: &QueryAst, fields: &[String]) -> FacetDistribution {
        let (docs, _) = self.matching(ast, None);
        let facets = fields
            .iter()
            .map(|field| {
                let numeric = self
                    .fields
                    .get(field)
                    .is_some_and(|fi| !fi.numbers.is_empty() && fi.exact.is_empty());
                if numeric {
                    number_facet(field, &docs)
                } else {
                    keyword_facet(field, &docs)
                }
            })
            .collect();
        FacetDistribution {
            total: docs.len(),
            facets,
        }
    }
}

/// Orders by the sort field (missing last) then series UID, or by newest ingest first.
pub fn sort_documents(docs: &mut [Arc<SeriesDocument>], sort: Option<&SortSpec>) {
    match sort {
        None => docs.sort_by(|a, b| {
            Reverse(a.ingest_time)
                .cmp(&Reverse(b.ingest_time))
                .then_with(|| a.series_uid.cmp(&b.series_uid))
        }),
        Some(spec) => {
            let mut keyed: Vec<(Option<SortKey>, Arc<SeriesDocument>)> = docs
                .iter()
                .map(|d| (d.field(&spec.field).and_then(|v| SortKey::of(&v)), d.clone()))
                .collect();
            keyed.sort_by(|(ka, a), (kb, b)| {
                let primary = match (ka, kb) {
                    (Some(x), Some(y)) if spec.descending => y.cmp(x),
                    (Some(x), Some(y)) => x.cmp(y),
                    (Some(_), None) => Ordering::Less,
                    (None, Some(_)) => Ordering::Greater,
                    (None, None) => Ordering::Equal,
                };
                primary.then_with(|| a.series_uid.cmp(&b.series_uid))
            });
            for (slot, (_, d)) in docs.iter_mut().zip(keyed) {
                *slot = d;
            }
        }
    }
}

fn keyword_facet(field: &str, docs: &[Arc<SeriesDocument>]) -> FieldFacet {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut missing = 0;
    for d in docs {
        match d.field(field) {
            Some(v) => {
                let distinct: BTreeSet<String> = v.display_values().into_iter().collect();
                distinct.into_iter().for_each(|s| *counts.entry(s).or_default() += 1);
            }
            None => missing += 1,
        }
    }
    let mut buckets: Vec<Bucket> = counts.into_iter().map(|(value, count)| Bucket { value, count }).collect();
    buckets.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
    FieldFacet {
        field: field.to_string(),
        buckets,
        missing_count: missing,
    }
}

fn number_facet(field: &str, docs: &[Arc<SeriesDocument>]) -> FieldFacet {
    let mut per_doc: Vec<BTreeSet<OrderedFloat<f64>>> = Vec::new();
    let mut missing = 0;
    for d in docs {
        match d.field(field) {
            Some(FieldValue::Numbers(v)) => per_doc.push(v.iter().map(|n| OrderedFloat(*n)).collect()),
            _ => missing += 1,
        }
    }
    let distinct: BTreeSet<OrderedFloat<f64>> = per_doc.iter().flatten().copied().collect();
    let mut keyed: Vec<(OrderedFloat<f64>, String, usize)> = if distinct.len() <= EXACT_NUMBER_BUCKETS {
        let mut counts: BTreeMap<OrderedFloat<f64>, usize> = BTreeMap::new();
        per_doc.iter().flatten().for_each(|n| *counts.entry(*n).or_default() += 1);
        counts.into_iter().map(|(n, c)| (n, format_number(n.0), c)).collect()
    } else {
        let lo = distinct.first().unwrap().0;
        let hi = distinct.last().unwrap().0;
        let width = (hi - lo) / NUMBER_BINS as f64;
        let mut counts = [0usize; NUMBER_BINS];
        for set in &per_doc {
            let bins: BTreeSet<usize> = set
                .iter()
                .map(|n| (((n.0 - lo) / width).floor() as usize).min(NUMBER_BINS - 1))
                .collect();
            bins.into_iter().for_each(|b| counts[b] += 1);
        }
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| {
                let a = lo + width * i as f64;
                let b = lo + width * (i + 1) as f64;
                (OrderedFloat(a), format!("[{}..{})", format_number(a), format_number(b)), c)
            })
            .collect()
    };
    keyed.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
    FieldFacet {
        field: field.to_string(),
        buckets: keyed
            .into_iter()
            .map(|(_, value, count)| Bucket { value, count })
            .collect(),
        missing_count: missing,
    }
}

struct Writer {
    journal: Option<(PathBuf, File)>,
    lines: usize,
}

/// Series document index with lock-free snapshot reads and a single writer.
pub struct Index {
    current: ArcSwap<Snapshot>,
    writer: Mutex<Writer>,
}

impl Default for Index {
    fn default() -> Self {
        Index::in_memory()
    }
}

/// What replaying a journal found.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub lines: usize,
    pub documents: usize,
    pub skipped_lines: usize,
    pub torn_bytes: u64,
}

impl Index {
    pub fn in_memory() -> Self {
        Index {
            current: ArcSwap::from_pointee(Snapshot::default()),
            writer: Mutex::new(Writer {
                journal: None,
                lines: 0,
            }),
        }
    }

    /// Opens (or creates) a journal-backed index, replaying it last-write-wins.
    pub fn open(path: &Path) -> Result<(Self, ReplayReport), IndexError> {
        let read = journal::read_lines(path)?;
        let mut latest: BTreeMap<String, SeriesDocument> = BTreeMap::new();
        let mut report = ReplayReport {
            lines: read.lines.len(),
            torn_bytes: read.torn_bytes,
            ..Default::default()
        };
        for line in &read.lines {
            match serde_json::from_str::<SeriesDocument>(line) {
                Ok(doc) if !doc.series_uid.is_empty() => {
                    latest.insert(doc.series_uid.clone(), doc);
                }
                _ => report.skipped_lines += 1,
            }
        }
        if report.skipped_lines > 0 || report.torn_bytes > 0 {
            tracing::warn!(
                skipped = report.skipped_lines,
                torn_bytes = report.torn_bytes,
                "index journal had damaged lines"
            );
        }
        let mut snap = Snapshot::default();
        report.documents = latest.len();
        for doc in latest.into_values() {
            snap.insert_doc(doc);
        }
        let file = journal::open_append(path, read.valid_len)?;
        let index = Index {
            current: ArcSwap::from_pointee(snap),
            writer: Mutex::new(Writer {
                journal: Some((path.to_path_buf(), file)),
                lines: read.lines.len(),
            }),
        };
        if report.lines > 2 * report.documents + 64 {
            index.compact()?;
        }
        Ok((index, report))
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.load_full()
    }

    pub fn len(&self) -> usize {
        self.current.load().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, series_uid: &str) -> Option<Arc<SeriesDocument>> {
        self.current.load().get(series_uid)
    }

    pub fn upsert(&self, doc: SeriesDocument) -> Result<UpsertOutcome, IndexError> {
        Ok(self.upsert_many(vec![doc])?[0])
    }

    /// Applies several documents as one visible step.
    pub fn upsert_many(&self, docs: Vec<SeriesDocument>) -> Result<Vec<UpsertOutcome>, IndexError> {
        for d in &docs {
            if d.series_uid.is_empty() {
                return Err(IndexError::MissingSeriesUid);
            }
        }
        let mut w = self.writer.lock().unwrap();
        let mut snap = Snapshot::clone(&self.current.load());
        let lines: Vec<String> = docs
            .iter()
            .map(|d| serde_json::to_string(d).expect("documents serialize"))
            .collect();
        let outcomes = docs.into_iter().map(|d| snap.insert_doc(d)).collect();
        if let Some((_, file)) = w.journal.as_mut() {
            journal::append(file, &lines, false)?;
        }
        w.lines += lines.len();
        self.current.store(Arc::new(snap));
        Ok(outcomes)
    }

    /// Edits one document in place; returns the version before the edit.
    pub fn modify<F>(&self, series_uid: &str, edit: F) -> Result<SeriesDocument, IndexError>
    where
        F: FnOnce(&mut SeriesDocument),
    {
        let mut w = self.writer.lock().unwrap();
        let mut snap = Snapshot::clone(&self.current.load());
        let before = snap
            .get(series_uid)
            .ok_or_else(|| IndexError::UnknownSeries(series_uid.to_string()))?;
        let mut doc = SeriesDocument::clone(&before);
        edit(&mut doc);
        doc.series_uid = series_uid.to_string();
        if doc != *before {
            let line = serde_json::to_string(&doc).expect("documents serialize");
            snap.insert_doc(doc);
            if let Some((_, file)) = w.journal.as_mut() {
                journal::append(file, &[line], false)?;
            }
            w.lines += 1;
            self.current.store(Arc::new(snap));
        }
        Ok(SeriesDocument::clone(&before))
    }

    /// Replaces a series' curation tags (deduplicated, sorted); returns the previous tags.
    pub fn set_tags(&self, series_uid: &str, tags: &[String]) -> Result<Vec<String>, IndexError> {
        let mut tags = tags.to_vec();
        tags.sort();
        tags.dedup();
        self.modify(series_uid, |d| d.tags = tags).map(|prev| prev.tags)
    }

    pub fn search(
        &self,
        ast: &QueryAst,
        from: usize,
        size: usize,
        sort: Option<&SortSpec>,
    ) -> Result<SearchResults, IndexError> {
        self.snapshot().search(ast, from, size, sort)
    }

    pub fn autocomplete(&self, field: &str, prefix: &str, limit: usize) -> Vec<(String, usize)> {
        self.snapshot().autocomplete(field, prefix, limit)
    }

    pub fn aggregate(&self, ast: &QueryAst, fields: &[String]) -> FacetDistribution {
        self.snapshot().aggregate(ast, fields)
    }

    /// Rewrites the journal to hold one line per current document.
    pub fn compact(&self) -> Result<(), IndexError> {
        let mut w = self.writer.lock().unwrap();
        let Some((path, _)) = w.journal.as_ref() else {
            return Ok(());
        };
        let path = path.clone();
        let snap = self.current.load_full();
        let mut buf = String::new();
        for d in snap.documents() {
            buf.push_str(&serde_json::to_string(d.as_ref()).expect("documents serialize"));
            buf.push('\n');
        }
        journal::write_atomic(&path, buf.as_bytes())?;
        let file = journal::open_append(&path, buf.len() as u64)?;
        w.journal = Some((path, file));
        w.lines = snap.len();
        Ok(())
    }
}
