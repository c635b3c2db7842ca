//! Random series documents and queries over a shared vocabulary.

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use curator_core::index::{FieldValue, QueryAst, SeriesDocument};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub const MODALITIES: &[&str] = &["CT", "MR", "PT", "SEG", "CR"];
pub const MANUFACTURERS: &[&str] = &["SIEMENS", "GE MEDICAL SYSTEMS", "Philips", "Canon Medical"];
pub const KERNELS: &[&str] = &["B30f", "B70f", "FC13", "STANDARD", "I26f\\3"];
pub const WORDS: &[&str] = &[
    "chest", "abdomen", "contrast", "lung", "liver", "axial", "thin", "thick", "arterial", "venous",
    "phase", "low", "dose", "head", "routine", "follow", "up", "screening", "pelvis", "spine",
];
pub const TAGS: &[&str] = &["qc:pass", "qc:fail", "reviewed", "needs review", "exclude"];
pub const STRUCTURES: &[&str] = &["liver", "spleen", "lower lung lobe", "aorta", "kidney_left"];
pub const BODY_PARTS: &[&str] = &["chest", "abdomen", "head", "pelvis"];
pub const NAMES: &[&str] = &["Doe^Jane", "Doe^John", "Müller^Jörg", "Smith^Anna^B", "O'Neil^Pat"];
pub const THICKNESSES: &[f64] = &[0.5, 0.625, 1.0, 1.25, 2.5, 3.0, 5.0];

/// Fields the generator populates, with whether they are numeric, date, or text-like.
pub const FIELDS: &[(&str, FieldKind)] = &[
    ("Modality", FieldKind::Keyword),
    ("Manufacturer", FieldKind::Keyword),
    ("ConvolutionKernel", FieldKind::Keyword),
    ("SeriesDescription", FieldKind::Text),
    ("PatientName", FieldKind::Name),
    ("StudyDate", FieldKind::Date),
    ("SliceThickness", FieldKind::Number),
    ("SeriesNumber", FieldKind::Number),
    ("tags", FieldKind::Keyword),
    ("anatomical_structures", FieldKind::Keyword),
    ("body_part", FieldKind::Keyword),
    ("instance_count", FieldKind::Number),
    ("has_pixel_data", FieldKind::Keyword),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Keyword,
    Text,
    Name,
    Date,
    Number,
}

fn subset<'a>(rng: &mut impl Rng, from: &[&'a str], max: usize) -> Vec<&'a str> {
    let n = rng.gen_range(0..=max.min(from.len()));
    let mut v: Vec<&str> = from.choose_multiple(rng, n).copied().collect();
    v.sort();
    v
}

fn random_date(rng: &mut impl Rng) -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + Duration::days(rng.gen_range(0..3650))
}

pub fn random_document(rng: &mut impl Rng, i: usize) -> SeriesDocument {
    // Coarse timestamps so ingest-time ties are common and the uid tiebreak gets exercised.
    let t = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + Duration::minutes(rng.gen_range(0..200));
    let mut d = SeriesDocument::new(format!("1.2.826.0.1.3680043.{}.{}", rng.gen_range(1..9), i), t);
    let modality = *MODALITIES.choose(rng).unwrap();
    d.modality = modality.to_string();
    d.fields.insert("Modality".into(), FieldValue::Keywords(vec![modality.into()]));
    if rng.gen_bool(0.9) {
        d.fields.insert(
            "Manufacturer".into(),
            FieldValue::Keywords(vec![MANUFACTURERS.choose(rng).unwrap().to_string()]),
        );
    }
    let kernels = subset(rng, KERNELS, 2);
    if !kernels.is_empty() {
        d.fields.insert(
            "ConvolutionKernel".into(),
            FieldValue::Keywords(kernels.iter().map(|s| s.to_string()).collect()),
        );
    }
    if rng.gen_bool(0.85) {
        let n = rng.gen_range(1..=5);
        let words: Vec<String> = (0..n)
            .map(|_| {
                let w = *WORDS.choose(rng).unwrap();
                match rng.gen_range(0..4) {
                    0 => w.to_uppercase(),
                    1 => format!("{w}/"),
                    _ => w.to_string(),
                }
            })
            .collect();
        d.fields.insert("SeriesDescription".into(), FieldValue::Text(vec![words.join(" ")]));
    }
    if rng.gen_bool(0.8) {
        d.fields.insert("PatientName".into(), FieldValue::Name(vec![NAMES.choose(rng).unwrap().to_string()]));
    }
    if rng.gen_bool(0.9) {
        let mut dates = vec![random_date(rng)];
        if rng.gen_bool(0.1) {
            dates.push(random_date(rng));
        }
        d.fields.insert("StudyDate".into(), FieldValue::Dates(dates));
    }
    if rng.gen_bool(0.85) {
        d.fields.insert(
            "SliceThickness".into(),
            FieldValue::Numbers(vec![*THICKNESSES.choose(rng).unwrap()]),
        );
    }
    if rng.gen_bool(0.9) {
        d.fields.insert("SeriesNumber".into(), FieldValue::Numbers(vec![rng.gen_range(1..600) as f64]));
    }
    d.tags = subset(rng, TAGS, 2).iter().map(|s| s.to_string()).collect();
    d.anatomical_structures = subset(rng, STRUCTURES, 3).iter().map(|s| s.to_string()).collect();
    d.body_part = rng.gen_bool(0.5).then(|| BODY_PARTS.choose(rng).unwrap().to_string());
    d.instance_count = rng.gen_range(1..400);
    d.has_pixel_data = modality != "SEG" || rng.gen_bool(0.1);
    d
}

pub fn random_corpus(seed: u64, n: usize) -> Vec<SeriesDocument> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|i| random_document(&mut rng, i)).collect()
}

fn wildcard(rng: &mut impl Rng, word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    match rng.gen_range(0..5) {
        0 if chars.len() > 2 => {
            let cut = rng.gen_range(1..chars.len());
            format!("{}*", chars[..cut].iter().collect::<String>())
        }
        1 if chars.len() > 1 => {
            let at = rng.gen_range(0..chars.len());
            chars.iter().enumerate().map(|(i, &c)| if i == at { '?' } else { c }).collect()
        }
        2 if chars.len() > 2 => format!("*{}", chars[chars.len() / 2..].iter().collect::<String>()),
        _ => word.to_string(),
    }
}

fn random_case(rng: &mut impl Rng, s: &str) -> String {
    match rng.gen_range(0..3) {
        0 => s.to_uppercase(),
        1 => s.to_lowercase(),
        _ => s.to_string(),
    }
}

/// A word safe to print bare: alphanumerics, `.`, and wildcards.
fn bare(s: &str) -> bool {
    !s.is_empty()
        && s != "*"
        && s.chars().all(|c| c.is_alphanumeric() || matches!(c, '.' | '*' | '?'))
        && !matches!(s, "AND" | "OR" | "NOT" | "TO")
}

fn value_for(rng: &mut impl Rng, field: &str, kind: FieldKind) -> String {
    match (field, kind) {
        ("Modality", _) => MODALITIES.choose(rng).unwrap().to_string(),
        ("Manufacturer", _) => MANUFACTURERS.choose(rng).unwrap().to_string(),
        ("ConvolutionKernel", _) => KERNELS.choose(rng).unwrap().to_string(),
        ("tags", _) => TAGS.choose(rng).unwrap().to_string(),
        ("anatomical_structures", _) => STRUCTURES.choose(rng).unwrap().to_string(),
        ("body_part", _) => BODY_PARTS.choose(rng).unwrap().to_string(),
        ("has_pixel_data", _) => ["true", "false"].choose(rng).unwrap().to_string(),
        ("PatientName", _) => {
            let n = *NAMES.choose(rng).unwrap();
            if rng.gen_bool(0.5) {
                n.split('^').next().unwrap().to_string()
            } else {
                n.to_string()
            }
        }
        (_, FieldKind::Text) => WORDS.choose(rng).unwrap().to_string(),
        (_, FieldKind::Date) => {
            let d = random_date(rng);
            if rng.gen_bool(0.5) {
                d.format("%Y%m%d").to_string()
            } else {
                d.format("%Y-%m-%d").to_string()
            }
        }
        ("SliceThickness", _) => THICKNESSES.choose(rng).unwrap().to_string(),
        (_, _) => rng.gen_range(1..600).to_string(),
    }
}

fn leaf(rng: &mut impl Rng) -> QueryAst {
    let (field, kind) = *FIELDS.choose(rng).unwrap();
    let field = if rng.gen_bool(0.03) { "NoSuchField" } else { field };
    match rng.gen_range(0..10) {
        0 | 1 => {
            let w = match rng.gen_range(0..3) {
                0 => WORDS.choose(rng).unwrap().to_string(),
                1 => MODALITIES.choose(rng).unwrap().to_string(),
                _ => KERNELS[..4].choose(rng).unwrap().to_string(),
            };
            let w2 = wildcard(rng, &w);
            let t = random_case(rng, &w2);
            if bare(&t) {
                QueryAst::Term(t)
            } else {
                QueryAst::Term(w)
            }
        }
        2 => {
            let p = match rng.gen_range(0..3) {
                0 => format!("{} {}", WORDS.choose(rng).unwrap(), WORDS.choose(rng).unwrap()),
                1 => STRUCTURES.choose(rng).unwrap().to_string(),
                _ => MANUFACTURERS.choose(rng).unwrap().to_string(),
            };
            QueryAst::Phrase(random_case(rng, &p))
        }
        3..=5 => {
            let v = value_for(rng, field, kind);
            let w = wildcard(rng, &v);
            if bare(&w) {
                QueryAst::field(field, &random_case(rng, &w))
            } else {
                QueryAst::exact(field, &random_case(rng, &v))
            }
        }
        6 => {
            let v = value_for(rng, field, kind);
            QueryAst::exact(field, &random_case(rng, &v))
        }
        7 | 8 => {
            let mut a = value_for(rng, field, kind);
            let mut b = value_for(rng, field, kind);
            if kind == FieldKind::Number {
                if a.parse::<f64>().unwrap_or(0.0) > b.parse::<f64>().unwrap_or(0.0) {
                    std::mem::swap(&mut a, &mut b);
                }
            } else if a.to_lowercase() > b.to_lowercase() {
                std::mem::swap(&mut a, &mut b);
            }
            let (lo, hi) = match rng.gen_range(0..6) {
                0 => (None, Some(b)),
                1 => (Some(a), None),
                _ => (Some(a), Some(b)),
            };
            QueryAst::Range {
                field: field.to_string(),
                lo,
                hi,
                lo_inclusive: rng.gen_bool(0.7),
                hi_inclusive: rng.gen_bool(0.7),
            }
        }
        _ => {
            if rng.gen_bool(0.2) {
                QueryAst::MatchAll
            } else {
                let v = value_for(rng, field, kind);
                QueryAst::field(field, &random_case(rng, &v).replace(' ', "?"))
            }
        }
    }
}

/// A random query of bounded depth.
pub fn random_query(rng: &mut impl Rng, depth: u32) -> QueryAst {
    if depth == 0 || rng.gen_bool(0.35) {
        return leaf(rng);
    }
    match rng.gen_range(0..5) {
        0 => QueryAst::Not(Box::new(random_query(rng, depth - 1))),
        1 | 2 => QueryAst::And((0..rng.gen_range(2..=3)).map(|_| random_query(rng, depth - 1)).collect()),
        _ => QueryAst::Or((0..rng.gen_range(2..=3)).map(|_| random_query(rng, depth - 1)).collect()),
    }
}

pub fn random_queries(seed: u64, n: usize) -> Vec<QueryAst> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| random_query(&mut rng, 3)).collect()
}
