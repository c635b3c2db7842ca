//! RT Structure Set contours.

use std::collections::BTreeMap;

use super::element::{DataElement, Elements, Item, Value};
use super::object::{DicomObject, TransferSyntax};
use super::seg::format_ds;
use super::tag::tags;
use super::uid::derived_uid;
use super::Vr;

pub const RT_STRUCTURE_SET_STORAGE: &str = "1.2.840.10008.5.1.4.1.1.481.3";

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub referenced_sop_uid: Option<String>,
    pub geometric_type: String,
    /// Patient-space points in mm.
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub number: i64,
    pub name: String,
    pub color: Option<[u8; 3]>,
    pub contours: Vec<Contour>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourSet {
    pub rois: Vec<Roi>,
    pub referenced_series: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RtStructError {
    #[error("object is not an RT structure set (modality {0:?})")]
    NotAnRtStruct(Option<String>),
    #[error("ROI {roi}: malformed contour data: {reason}")]
    MalformedContourData { roi: i64, reason: String },
}

impl RtStructError {
    pub fn code(&self) -> &'static str {
        match self {
            RtStructError::NotAnRtStruct(_) => "not_an_rtstruct",
            RtStructError::MalformedContourData { .. } => "malformed_contour_data",
        }
    }
}

fn contour_points(item: &Item, roi: i64) -> Result<Vec<[f64; 3]>, RtStructError> {
    let bad = |reason: String| RtStructError::MalformedContourData { roi, reason };
    let values: Vec<f64> = match item.get(tags::CONTOUR_DATA).map(|e| &e.value) {
        None => Vec::new(),
        Some(Value::Strings(tokens)) => tokens
            .iter()
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("non-numeric token {t:?}")))
            })
            .collect::<Result<_, _>>()?,
        Some(Value::Floats(v)) => v.clone(),
        Some(_) => return Err(bad("unexpected value encoding".into())),
    };
    if values.len() % 3 != 0 {
        return Err(bad(format!("{} values is not a multiple of 3", values.len())));
    }
    Ok(values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Reads ROI names, colors and contours from an RT Structure Set.
pub fn parse_rtstruct(obj: &DicomObject) -> Result<ContourSet, RtStructError> {
    match obj.modality() {
        Some("RTSTRUCT") => {}
        other => return Err(RtStructError::NotAnRtStruct(other.map(str::to_string))),
    }

    let mut names: BTreeMap<i64, String> = BTreeMap::new();
    for item in obj.items(tags::STRUCTURE_SET_ROI_SEQUENCE) {
        if let Some(n) = item.int(tags::ROI_NUMBER) {
            names.insert(n, item.string(tags::ROI_NAME).unwrap_or_default().to_string());
        }
    }

    let mut rois: BTreeMap<i64, Roi> = BTreeMap::new();
    for item in obj.items(tags::ROI_CONTOUR_SEQUENCE) {
        let Some(number) = item.int(tags::REFERENCED_ROI_NUMBER) else {
            continue;
        };
        let color = item.numbers(tags::ROI_DISPLAY_COLOR).and_then(|c| {
            (c.len() == 3).then(|| [c[0], c[1], c[2]].map(|v| v.clamp(0.0, 255.0) as u8))
        });
        let mut contours = Vec::new();
        for c in item.items(tags::CONTOUR_SEQUENCE) {
            let geometric_type = c
                .string(tags::CONTOUR_GEOMETRIC_TYPE)
                .unwrap_or("CLOSED_PLANAR")
                .to_string();
            let points = contour_points(c, number)?;
            if geometric_type == "CLOSED_PLANAR" && points.len() < 3 {
                return Err(RtStructError::MalformedContourData {
                    roi: number,
                    reason: format!("closed planar contour with {} points", points.len()),
                });
            }
            let referenced_sop_uid = c
                .items(tags::CONTOUR_IMAGE_SEQUENCE)
                .first()
                .and_then(|i| i.string(tags::REFERENCED_SOP_INSTANCE_UID))
                .map(str::to_string);
            contours.push(Contour {
                referenced_sop_uid,
                geometric_type,
                points,
            });
        }
        let name = names
            .get(&number)
            .filter(|n| !n.is_empty())
            .cloned()
            .unwrap_or_else(|| format!("ROI_{number}"));
        let roi = rois.entry(number).or_insert_with(|| Roi {
            number,
            name,
            color,
            contours: Vec::new(),
        });
        roi.contours.extend(contours);
    }
    for (number, name) in names {
        rois.entry(number).or_insert_with(|| Roi {
            number,
            name: if name.is_empty() {
                format!("ROI_{number}")
            } else {
                name
            },
            color: None,
            contours: Vec::new(),
        });
    }

    let mut referenced_series = Vec::new();
    for frame in obj.items(tags::REFERENCED_FRAME_OF_REFERENCE_SEQUENCE) {
        for study in frame.items(tags::RT_REFERENCED_STUDY_SEQUENCE) {
            for series in study.items(tags::RT_REFERENCED_SERIES_SEQUENCE) {
                if let Some(uid) = series.string(tags::SERIES_INSTANCE_UID) {
                    if !referenced_series.iter().any(|s| s == uid) {
                        referenced_series.push(uid.to_string());
                    }
                }
            }
        }
    }

    Ok(ContourSet {
        rois: rois.into_values().collect(),
        referenced_series,
    })
}

/// Builds an RT Structure Set referencing `source`'s series.
pub fn build_rtstruct(source: &DicomObject, contours: &ContourSet, uid_seed: &str) -> DicomObject {
    let mut obj = DicomObject::new(TransferSyntax::ExplicitVrLittleEndian);
    let sop_uid = derived_uid(uid_seed, &["rtstruct", "sop"]);
    obj.put(DataElement::new(tags::FILE_META_GROUP_LENGTH, Vr::UL, Value::Ints(vec![0])));
    obj.put(DataElement::string(tags::MEDIA_STORAGE_SOP_CLASS_UID, Vr::UI, RT_STRUCTURE_SET_STORAGE));
    obj.put(DataElement::string(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, &sop_uid));
    obj.put(DataElement::string(
        tags::TRANSFER_SYNTAX_UID,
        Vr::UI,
        TransferSyntax::ExplicitVrLittleEndian.uid(),
    ));
    for tag in [tags::PATIENT_NAME, tags::PATIENT_ID, tags::STUDY_INSTANCE_UID] {
        if let Some(el) = source.get(tag) {
            obj.put(el.clone());
        }
    }
    obj.put(DataElement::string(tags::SOP_CLASS_UID, Vr::UI, RT_STRUCTURE_SET_STORAGE));
    obj.put(DataElement::string(tags::SOP_INSTANCE_UID, Vr::UI, &sop_uid));
    obj.put(DataElement::string(tags::MODALITY, Vr::CS, "RTSTRUCT"));
    obj.put(DataElement::string(
        tags::SERIES_INSTANCE_UID,
        Vr::UI,
        &derived_uid(uid_seed, &["rtstruct", "series"]),
    ));
    obj.put(DataElement::string(tags::INSTANCE_NUMBER, Vr::IS, "1"));
    obj.put(DataElement::string(super::Tag::new(0x3006, 0x0002), Vr::SH, "CURATOR"));

    let series = source.series_uid().unwrap_or_default();
    obj.put(DataElement::sequence(
        tags::REFERENCED_FRAME_OF_REFERENCE_SEQUENCE,
        vec![Item::new(vec![DataElement::sequence(
            tags::RT_REFERENCED_STUDY_SEQUENCE,
            vec![Item::new(vec![DataElement::sequence(
                tags::RT_REFERENCED_SERIES_SEQUENCE,
                vec![Item::new(vec![DataElement::string(
                    tags::SERIES_INSTANCE_UID,
                    Vr::UI,
                    series,
                )])],
            )])],
        )])],
    ));

    obj.put(DataElement::sequence(
        tags::STRUCTURE_SET_ROI_SEQUENCE,
        contours
            .rois
            .iter()
            .map(|r| {
                Item::new(vec![
                    DataElement::string(tags::ROI_NUMBER, Vr::IS, &r.number.to_string()),
                    DataElement::string(tags::ROI_NAME, Vr::LO, &r.name),
                ])
            })
            .collect(),
    ));
    obj.put(DataElement::sequence(
        tags::ROI_CONTOUR_SEQUENCE,
        contours
            .rois
            .iter()
            .map(|r| {
                let mut els = vec![
                    DataElement::string(tags::REFERENCED_ROI_NUMBER, Vr::IS, &r.number.to_string()),
                    DataElement::sequence(
                        tags::CONTOUR_SEQUENCE,
                        r.contours.iter().map(contour_item).collect(),
                    ),
                ];
                if let Some(c) = r.color {
                    els.push(DataElement::strings(
                        tags::ROI_DISPLAY_COLOR,
                        Vr::IS,
                        &[&c[0].to_string(), &c[1].to_string(), &c[2].to_string()],
                    ));
                }
                Item::new(els)
            })
            .collect(),
    ));
    obj
}

fn contour_item(c: &Contour) -> Item {
    let data: Vec<String> = c.points.iter().flatten().map(|&v| format_ds(v)).collect();
    let mut els = vec![
        DataElement::string(tags::CONTOUR_GEOMETRIC_TYPE, Vr::CS, &c.geometric_type),
        DataElement::string(tags::NUMBER_OF_CONTOUR_POINTS, Vr::IS, &c.points.len().to_string()),
        DataElement::new(tags::CONTOUR_DATA, Vr::DS, Value::Strings(data)),
    ];
    if let Some(uid) = &c.referenced_sop_uid {
        els.push(DataElement::sequence(
            tags::CONTOUR_IMAGE_SEQUENCE,
            vec![Item::new(vec![DataElement::string(
                tags::REFERENCED_SOP_INSTANCE_UID,
                Vr::UI,
                uid,
            )])],
        ));
    }
    Item::new(els)
}
