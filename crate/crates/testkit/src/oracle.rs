//! Slow, direct reference implementations used to check the real ones.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use curator_core::index::{format_number, parse_date, tokenize, FieldValue, QueryAst, SeriesDocument, SortSpec};

/// Recursive glob match: `*` any run, `?` one character.
pub fn glob(pattern: &[char], text: &[char]) -> bool {
    match (pattern.first(), text.first()) {
        (None, None) => true,
        (Some('*'), _) => glob(&pattern[1..], text) || (!text.is_empty() && glob(pattern, &text[1..])),
        (Some('?'), Some(_)) => glob(&pattern[1..], &text[1..]),
        (Some(p), Some(t)) if p == t => glob(&pattern[1..], &text[1..]),
        _ => false,
    }
}

fn glob_str(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    glob(&p, &t)
}

fn keyword_like(v: &FieldValue) -> Vec<String> {
    match v {
        FieldValue::Keywords(v) | FieldValue::Name(v) => v.clone(),
        _ => Vec::new(),
    }
}

fn text_like(v: &FieldValue) -> Vec<String> {
    match v {
        FieldValue::Text(v) | FieldValue::Name(v) => v.clone(),
        _ => Vec::new(),
    }
}

fn whole_values(v: &FieldValue) -> Vec<String> {
    match v {
        FieldValue::Keywords(v) | FieldValue::Text(v) | FieldValue::Name(v) => v.iter().map(|s| s.to_lowercase()).collect(),
        _ => Vec::new(),
    }
}

fn has_run(hay: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > hay.len() {
        return false;
    }
    (0..=hay.len() - needle.len()).any(|i| hay[i..i + needle.len()] == *needle)
}

fn free_fields(doc: &SeriesDocument) -> Vec<(String, FieldValue)> {
    doc.all_fields()
        .into_iter()
        .filter(|(n, _)| !matches!(n.as_str(), "has_pixel_data" | "referenced_series" | "instance_count"))
        .collect()
}

fn in_range<T: PartialOrd>(x: &T, lo: Option<&T>, hi: Option<&T>, lo_inc: bool, hi_inc: bool) -> bool {
    let above = match lo {
        None => true,
        Some(l) => {
            if lo_inc {
                x >= l
            } else {
                x > l
            }
        }
    };
    let below = match hi {
        None => true,
        Some(h) => {
            if hi_inc {
                x <= h
            } else {
                x < h
            }
        }
    };
    above && below
}

fn parse_bound<T>(b: &Option<String>, f: impl Fn(&str) -> Option<T>) -> Option<Option<T>> {
    match b {
        None => Some(None),
        Some(s) => f(s).map(Some),
    }
}

/// Direct evaluation of a query against one document.
pub fn matches(doc: &SeriesDocument, q: &QueryAst) -> bool {
    match q {
        QueryAst::MatchAll => true,
        QueryAst::Term(p) => {
            let p = p.to_lowercase();
            free_fields(doc).iter().any(|(_, v)| {
                keyword_like(v).iter().any(|k| glob_str(&p, &k.to_lowercase()))
                    || text_like(v).iter().flat_map(|t| tokenize(t)).any(|t| glob_str(&p, &t))
            })
        }
        QueryAst::Phrase(text) => {
            let lower = text.to_lowercase();
            let toks = tokenize(text);
            free_fields(doc).iter().any(|(_, v)| {
                keyword_like(v).iter().any(|k| k.to_lowercase() == lower)
                    || text_like(v).iter().any(|t| has_run(&tokenize(t), &toks))
            })
        }
        QueryAst::FieldMatch { field, pattern, quoted } => {
            let Some(v) = doc.field(field) else { return false };
            let lower = pattern.to_lowercase();
            let literal = |s: &str| if *quoted { s == lower } else { glob_str(&lower, s) };
            let textual = if *quoted {
                whole_values(&v).iter().any(|w| *w == lower)
                    || text_like(&v).iter().any(|t| has_run(&tokenize(t), &tokenize(pattern)))
            } else {
                whole_values(&v).iter().any(|w| glob_str(&lower, w))
                    || text_like(&v).iter().flat_map(|t| tokenize(t)).any(|t| glob_str(&lower, &t))
            };
            let numeric = match &v {
                FieldValue::Numbers(ns) => {
                    let target = pattern.trim().parse::<f64>().ok();
                    ns.iter().any(|n| Some(*n) == target || literal(&format_number(*n)))
                }
                _ => false,
            };
            let dated = match &v {
                FieldValue::Dates(ds) => {
                    let target = parse_date(pattern);
                    ds.iter().any(|d| Some(*d) == target || literal(&d.format("%Y-%m-%d").to_string()))
                }
                _ => false,
            };
            textual || numeric || dated
        }
        QueryAst::Range {
            field,
            lo,
            hi,
            lo_inclusive,
            hi_inclusive,
        } => {
            let Some(v) = doc.field(field) else { return false };
            let (li, hi_) = (*lo_inclusive, *hi_inclusive);
            match &v {
                FieldValue::Numbers(ns) => {
                    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|f| f.is_finite());
                    match (parse_bound(lo, num), parse_bound(hi, num)) {
                        (Some(l), Some(h)) => ns.iter().any(|n| in_range(n, l.as_ref(), h.as_ref(), li, hi_)),
                        _ => false,
                    }
                }
                FieldValue::Dates(ds) => match (parse_bound(lo, parse_date), parse_bound(hi, parse_date)) {
                    (Some(l), Some(h)) => ds.iter().any(|d| in_range(d, l.as_ref(), h.as_ref(), li, hi_)),
                    _ => false,
                },
                _ => {
                    let l = lo.as_ref().map(|s| s.to_lowercase());
                    let h = hi.as_ref().map(|s| s.to_lowercase());
                    whole_values(&v).iter().any(|w| in_range(w, l.as_ref(), h.as_ref(), li, hi_))
                }
            }
        }
        QueryAst::Not(inner) => !matches(doc, inner),
        QueryAst::And(items) => items.iter().all(|i| matches(doc, i)),
        QueryAst::Or(items) => items.iter().any(|i| matches(doc, i)),
    }
}

/// Uids of matching documents, as a set.
pub fn search(docs: &[SeriesDocument], q: &QueryAst) -> BTreeSet<String> {
    docs.iter().filter(|d| matches(d, q)).map(|d| d.series_uid.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, PartialOrd)]
enum Key {
    Number(f64),
    Date(NaiveDate),
    Text(String, String),
}

fn sort_key(doc: &SeriesDocument, field: &str) -> Option<Key> {
    Some(match doc.field(field)? {
        FieldValue::Numbers(v) => Key::Number(*v.first()?),
        FieldValue::Dates(v) => Key::Date(*v.first()?),
        FieldValue::Keywords(v) | FieldValue::Text(v) | FieldValue::Name(v) => {
            let s = v.first()?.clone();
            Key::Text(s.to_lowercase(), s)
        }
    })
}

/// Whether `a` may precede `b` in a result list.
pub fn ordered(a: &SeriesDocument, b: &SeriesDocument, sort: Option<&SortSpec>) -> bool {
    let primary = match sort {
        None => b.ingest_time.cmp(&a.ingest_time),
        Some(spec) => match (sort_key(a, &spec.field), sort_key(b, &spec.field)) {
            (Some(x), Some(y)) => {
                let o = x.partial_cmp(&y).unwrap_or(Ordering::Equal);
                if spec.descending {
                    o.reverse()
                } else {
                    o
                }
            }
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        },
    };
    primary.then_with(|| a.series_uid.cmp(&b.series_uid)) != Ordering::Greater
}

/// Keyword-style facet: value → number of documents holding it.
pub fn value_counts(docs: &[&SeriesDocument], field: &str) -> (BTreeMap<String, usize>, usize) {
    let mut counts = BTreeMap::new();
    let mut missing = 0;
    for d in docs {
        match d.field(field) {
            None => missing += 1,
            Some(v) => {
                let shown: BTreeSet<String> = match v {
                    FieldValue::Keywords(v) | FieldValue::Text(v) | FieldValue::Name(v) => v.into_iter().collect(),
                    FieldValue::Dates(v) => v.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect(),
                    FieldValue::Numbers(v) => v.iter().map(|n| format_number(*n)).collect(),
                };
                for s in shown {
                    *counts.entry(s).or_insert(0) += 1;
                }
            }
        }
    }
    (counts, missing)
}

/// Numeric facet over ten equal-width bins between the extreme values.
///
/// Returns `(bin index, count)` for non-empty bins.
pub fn binned_counts(docs: &[&SeriesDocument], field: &str) -> Vec<(usize, usize)> {
    let per_doc: Vec<Vec<f64>> = docs
        .iter()
        .filter_map(|d| match d.field(field) {
            Some(FieldValue::Numbers(v)) => Some(v),
            _ => None,
        })
        .collect();
    let all: Vec<f64> = per_doc.iter().flatten().copied().collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = [0usize; 10];
    for v in &per_doc {
        let mut seen = [false; 10];
        for &x in v {
            let mut b = 0;
            while b < 9 && x >= lo + (hi - lo) / 10.0 * (b + 1) as f64 {
                b += 1;
            }
            seen[b] = true;
        }
        for (b, s) in seen.iter().enumerate() {
            if *s {
                counts[b] += 1;
            }
        }
    }
    counts.iter().enumerate().filter(|(_, c)| **c > 0).map(|(b, c)| (b, *c)).collect()
}

/// Case-insensitive prefix completion over every stored value: (value, documents), most frequent first.
pub fn autocomplete(docs: &[SeriesDocument], field: &str, prefix: &str, limit: usize) -> Vec<(String, usize)> {
    let refs: Vec<&SeriesDocument> = docs.iter().collect();
    let (counts, _) = value_counts(&refs, field);
    let prefix = prefix.to_lowercase();
    let mut v: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(k, _)| k.to_lowercase().starts_with(&prefix))
        .collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(limit);
    v
}

/// Bit `i` of a DICOM bit-packed buffer, read one byte and shift at a time.
pub fn naive_bit(bytes: &[u8], i: usize) -> bool {
    let byte = bytes[i / 8];
    let mut b = byte;
    for _ in 0..(i % 8) {
        b /= 2;
    }
    b % 2 == 1
}

fn on_segment(p: (i64, i64), a: (i64, i64), b: (i64, i64)) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    cross == 0 && p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Even-odd point-in-polygon by ray casting; points on an edge count as inside.
pub fn point_in_polygon(p: (i64, i64), poly: &[(i64, i64)]) -> bool {
    let n = poly.len();
    if n == 0 {
        return false;
    }
    for i in 0..n {
        if on_segment(p, poly[i], poly[(i + 1) % n]) {
            return true;
        }
    }
    let mut inside = false;
    let (px, py) = (p.0 as f64, p.1 as f64);
    for i in 0..n {
        let (x1, y1) = (poly[i].0 as f64, poly[i].1 as f64);
        let (x2, y2) = (poly[(i + 1) % n].0 as f64, poly[(i + 1) % n].1 as f64);
        if (y1 > py) != (y2 > py) {
            let x = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
            if px < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

/// DICOM linear VOI function on doubled integers, exact.
///
/// `v2`, `c2` are twice the pixel value and window center; `w` the width (>= 2).
/// Output is rounded half up and clamped to 0..=255.
pub fn window_exact(v2: i64, c2: i64, w: i64) -> u8 {
    let (v2, c2, w) = (v2 as i128, c2 as i128, w as i128);
    // y = ((v - c + 1/2) / (w - 1) + 1/2) * 255 = (v2 - c2 + w) * 255 / (2 (w - 1))
    let lower = 2 * (c2 - 1) - (w - 1) * 2;
    let upper = 2 * (c2 - 1) + (w - 1) * 2;
    if 2 * v2 <= lower {
        return 0;
    }
    if 2 * v2 > upper {
        return 255;
    }
    let num = (v2 - c2 + w) * 255;
    let den = 2 * (w - 1);
    floor_div(2 * num + den, 2 * den).clamp(0, 255) as u8
}
