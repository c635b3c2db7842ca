use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::dicom::dictionary::lookup_tag;
use crate::dicom::vr::ValueKind;
use crate::dicom::{parse_rtstruct, parse_seg, DicomObject, Value, Vr};

use super::IndexError;

/// Curation fields that DICOM keywords may not shadow.
pub const RESERVED_FIELDS: &[&str] = &[
    "series_uid",
    "tags",
    "anatomical_structures",
    "body_part",
    "instance_count",
    "has_pixel_data",
    "referenced_series",
];

/// Per-instance attributes that legitimately differ within a series; merging
/// keeps the first value without flagging a conflict.
const INSTANCE_LEVEL: &[&str] = &[
    "SOPInstanceUID",
    "InstanceNumber",
    "ImagePositionPatient",
    "SliceLocation",
    "AcquisitionNumber",
    "AcquisitionTime",
    "AcquisitionDateTime",
    "ContentTime",
    "InstanceCreationTime",
    "WindowCenter",
    "WindowWidth",
    "LargestImagePixelValue",
    "SmallestImagePixelValue",
];

/// Typed values of one searchable field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldValue {
    Keywords(Vec<String>),
    Text(Vec<String>),
    /// Person names: matched both as whole keyword values and as text tokens.
    Name(Vec<String>),
    Dates(Vec<NaiveDate>),
    Numbers(Vec<f64>),
}

impl FieldValue {
    pub fn len(&self) -> usize {
        match self {
            FieldValue::Keywords(v) | FieldValue::Text(v) | FieldValue::Name(v) => v.len(),
            FieldValue::Dates(v) => v.len(),
            FieldValue::Numbers(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values compared as whole keywords (original case).
    pub fn keyword_values(&self) -> &[String] {
        match self {
            FieldValue::Keywords(v) | FieldValue::Name(v) => v,
            _ => &[],
        }
    }

    /// Values split into search tokens.
    pub fn text_values(&self) -> &[String] {
        match self {
            FieldValue::Text(v) | FieldValue::Name(v) => v,
            _ => &[],
        }
    }

    /// Display strings: what facets and autocomplete show.
    pub fn display_values(&self) -> Vec<String> {
        match self {
            FieldValue::Keywords(v) | FieldValue::Text(v) | FieldValue::Name(v) => v.clone(),
            FieldValue::Dates(v) => v.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect(),
            FieldValue::Numbers(v) => v.iter().map(|n| format_number(*n)).collect(),
        }
    }
}

/// Shortest round-trip text for a number, with `-0` folded to `0`.
pub fn format_number(n: f64) -> String {
    if n == 0.0 {
        "0".to_string()
    } else {
        n.to_string()
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Accepts DICOM `YYYYMMDD` and ISO `YYYY-MM-DD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit()) {
        NaiveDate::parse_from_str(s, "%Y%m%d").ok()
    } else {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
    }
}

/// Flattened, searchable metadata for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDocument {
    pub series_uid: String,
    #[serde(default)]
    pub study_uid: String,
    #[serde(default)]
    pub patient_id: String,
    #[serde(default)]
    pub modality: String,
    pub fields: BTreeMap<String, FieldValue>,
    pub instance_count: u64,
    pub has_pixel_data: bool,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub anatomical_structures: Vec<String>,
    #[serde(default)]
    pub body_part: Option<String>,
    /// Series an attached SEG or RTSTRUCT points at.
    #[serde(default)]
    pub referenced_series: Vec<String>,
    #[serde(default)]
    pub sop_instance_uids: BTreeSet<String>,
    pub ingest_time: DateTime<Utc>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub field_conflicts: Vec<String>,
}

impl SeriesDocument {
    pub fn new(series_uid: impl Into<String>, ingest_time: DateTime<Utc>) -> Self {
        SeriesDocument {
            series_uid: series_uid.into(),
            study_uid: String::new(),
            patient_id: String::new(),
            modality: String::new(),
            fields: BTreeMap::new(),
            instance_count: 0,
            has_pixel_data: false,
            tags: Vec::new(),
            anatomical_structures: Vec::new(),
            body_part: None,
            referenced_series: Vec::new(),
            sop_instance_uids: BTreeSet::new(),
            ingest_time,
            warnings: Vec::new(),
            field_conflicts: Vec::new(),
        }
    }

    /// Looks up a field by name, including the curation fields.
    pub fn field(&self, name: &str) -> Option<FieldValue> {
        let v = match name {
            "series_uid" => FieldValue::Keywords(vec![self.series_uid.clone()]),
            "tags" => FieldValue::Keywords(self.tags.clone()),
            "anatomical_structures" => FieldValue::Keywords(self.anatomical_structures.clone()),
            "body_part" => FieldValue::Keywords(self.body_part.iter().cloned().collect()),
            "instance_count" => FieldValue::Numbers(vec![self.instance_count as f64]),
            "has_pixel_data" => FieldValue::Keywords(vec![self.has_pixel_data.to_string()]),
            "referenced_series" => FieldValue::Keywords(self.referenced_series.clone()),
            _ => self.fields.get(name)?.clone(),
        };
        (!v.is_empty()).then_some(v)
    }

    /// Every non-empty field with its name, curation fields included.
    pub fn all_fields(&self) -> Vec<(String, FieldValue)> {
        let mut out: Vec<(String, FieldValue)> = RESERVED_FIELDS
            .iter()
            .filter_map(|n| self.field(n).map(|v| (n.to_string(), v)))
            .collect();
        out.extend(
            self.fields
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(k, v)| (k.clone(), v.clone())),
        );
        out
    }

    /// Whether bare terms and phrases look at this field.
    pub fn is_free_search_field(name: &str) -> bool {
        !matches!(name, "has_pixel_data" | "referenced_series" | "instance_count")
    }
}

/// Maps a DICOM keyword onto a field name, renaming collisions with curation fields.
fn field_name(keyword: &str) -> String {
    if RESERVED_FIELDS.contains(&keyword) {
        format!("{keyword}_dicom")
    } else {
        keyword.to_string()
    }
}

/// Builds the searchable document for the series an instance belongs to.
pub fn to_document(obj: &DicomObject) -> Result<SeriesDocument, IndexError> {
    to_document_at(obj, Utc::now())
}

pub fn to_document_at(obj: &DicomObject, ingest_time: DateTime<Utc>) -> Result<SeriesDocument, IndexError> {
    let series_uid = obj.series_uid().ok_or(IndexError::MissingSeriesUid)?;
    let mut doc = SeriesDocument::new(series_uid, ingest_time);
    doc.instance_count = 1;
    doc.has_pixel_data = obj.pixel_data.is_some();
    if let Some(sop) = obj.sop_instance_uid() {
        doc.sop_instance_uids.insert(sop.to_string());
    }

    for el in &obj.elements {
        if el.tag.is_private() || el.tag == crate::dicom::tags::PIXEL_DATA {
            continue;
        }
        let info = lookup_tag(el.tag);
        let name = field_name(&info.keyword);
        let value = match &el.value {
            Value::Sequence(items) => {
                doc.fields.insert(
                    format!("{name}_count"),
                    FieldValue::Numbers(vec![items.len() as f64]),
                );
                continue;
            }
            Value::Bytes(_) => continue,
            Value::Ints(v) if el.vr.kind() != ValueKind::AttributeTag => {
                FieldValue::Numbers(v.iter().map(|&i| i as f64).collect())
            }
            Value::Ints(_) => continue,
            Value::Floats(v) => FieldValue::Numbers(v.iter().copied().filter(|f| f.is_finite()).collect()),
            Value::Strings(v) => {
                let values: Vec<&str> = v.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
                match el.vr {
                    Vr::DA => {
                        let mut dates = Vec::new();
                        for s in values {
                            match parse_date(s) {
                                Some(d) => dates.push(d),
                                None => doc.warnings.push(format!("{name}: invalid date {s:?}")),
                            }
                        }
                        FieldValue::Dates(dates)
                    }
                    Vr::DS | Vr::IS | Vr::FD | Vr::FL | Vr::SL | Vr::SS | Vr::UL | Vr::US => {
                        let mut nums = Vec::new();
                        for s in values {
                            match s.parse::<f64>() {
                                Ok(n) if n.is_finite() => nums.push(n),
                                _ => doc.warnings.push(format!("{name}: invalid number {s:?}")),
                            }
                        }
                        FieldValue::Numbers(nums)
                    }
                    Vr::LT | Vr::ST | Vr::UT => FieldValue::Text(values.iter().map(|s| s.to_string()).collect()),
                    Vr::PN => FieldValue::Name(values.iter().map(|s| s.to_string()).collect()),
                    _ => FieldValue::Keywords(values.iter().map(|s| s.to_string()).collect()),
                }
            }
        };
        if !value.is_empty() {
            doc.fields.insert(name, value);
        }
    }

    let key = |k: &str| doc.fields.get(k).and_then(|v| v.keyword_values().first().cloned());
    doc.study_uid = key("StudyInstanceUID").unwrap_or_default();
    doc.patient_id = key("PatientID").unwrap_or_default();
    doc.modality = key("Modality").unwrap_or_default();

    doc.referenced_series = match obj.modality() {
        Some("SEG") => parse_seg(obj).map(|s| s.referenced_series).unwrap_or_default(),
        Some("RTSTRUCT") => parse_rtstruct(obj).map(|s| s.referenced_series).unwrap_or_default(),
        _ => Vec::new(),
    };
    doc.referenced_series.sort();
    doc.referenced_series.dedup();
    Ok(doc)
}

/// Folds another instance of the same series into its document.
///
/// A SOP Instance UID already counted leaves the document unchanged.
pub fn merge_instance(doc: &SeriesDocument, obj: &DicomObject) -> Result<SeriesDocument, IndexError> {
    let incoming = to_document_at(obj, doc.ingest_time)?;
    merge_documents(doc, &incoming)
}

/// Merges two partial documents of one series; `base` wins scalar conflicts.
pub fn merge_documents(base: &SeriesDocument, other: &SeriesDocument) -> Result<SeriesDocument, IndexError> {
    if base.series_uid != other.series_uid {
        return Err(IndexError::SeriesUidMismatch {
            expected: base.series_uid.clone(),
            found: other.series_uid.clone(),
        });
    }
    if !other.sop_instance_uids.is_empty() && other.sop_instance_uids.is_subset(&base.sop_instance_uids) {
        return Ok(base.clone());
    }
    let mut doc = base.clone();
    let fresh = other.sop_instance_uids.difference(&base.sop_instance_uids).count() as u64;
    doc.instance_count += if other.sop_instance_uids.is_empty() {
        other.instance_count
    } else {
        fresh
    };
    doc.sop_instance_uids.extend(other.sop_instance_uids.iter().cloned());
    doc.has_pixel_data |= other.has_pixel_data;
    let mut conflicts: BTreeSet<String> = doc.field_conflicts.iter().cloned().collect();

    for (name, value) in &other.fields {
        match doc.fields.get_mut(name) {
            None => {
                doc.fields.insert(name.clone(), value.clone());
            }
            Some(existing) if existing == value => {}
            Some(FieldValue::Keywords(have)) if matches!(value, FieldValue::Keywords(_)) => {
                let FieldValue::Keywords(new) = value else { unreachable!() };
                if have.len() == 1 && new.len() == 1 {
                    if !INSTANCE_LEVEL.contains(&name.as_str()) {
                        conflicts.insert(name.clone());
                    }
                } else {
                    for v in new {
                        if !have.contains(v) {
                            have.push(v.clone());
                        }
                    }
                }
            }
            Some(_) => {
                if !INSTANCE_LEVEL.contains(&name.as_str()) && !name.ends_with("_count") {
                    conflicts.insert(name.clone());
                }
            }
        }
    }
    doc.field_conflicts = conflicts.into_iter().collect();
    for w in &other.warnings {
        if !doc.warnings.contains(w) {
            doc.warnings.push(w.clone());
        }
    }
    for r in &other.referenced_series {
        if !doc.referenced_series.contains(r) {
            doc.referenced_series.push(r.clone());
        }
    }
    doc.referenced_series.sort();
    if doc.study_uid.is_empty() {
        doc.study_uid = other.study_uid.clone();
    }
    if doc.patient_id.is_empty() {
        doc.patient_id = other.patient_id.clone();
    }
    if doc.modality.is_empty() {
        doc.modality = other.modality.clone();
    }
    Ok(doc)
}
