//! Binary DICOM-SEG masks.

use super::element::{DataElement, Elements, Item, Value};
use super::object::{DicomObject, PixelData, TransferSyntax};
use super::tag::tags;
use super::uid::derived_uid;
use super::Vr;

pub const SEGMENTATION_STORAGE: &str = "1.2.840.10008.5.1.4.1.1.66.4";

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub rows: usize,
    pub columns: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn empty(rows: usize, columns: usize) -> Self {
        Mask {
            rows,
            columns,
            bits: vec![false; rows * columns],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.columns + col]
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.bits[row * self.columns + col] = on;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFrame {
    /// SOP Instance UID of the source image; empty when the frame has no source reference.
    pub referenced_sop_uid: String,
    /// ImagePositionPatient of the frame, when given.
    pub position: Option<[f64; 3]>,
    pub mask: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub number: u32,
    pub label: String,
    pub frames: Vec<SegmentFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMasks {
    pub rows: usize,
    pub columns: usize,
    pub segments: Vec<Segment>,
    /// Series UIDs named in the Referenced Series Sequence.
    pub referenced_series: Vec<String>,
    /// Every source SOP Instance UID the segmentation points at.
    pub referenced_instances: Vec<String>,
}

impl SegmentationMasks {
    /// Sum of mask areas per referenced source instance.
    pub fn area_by_instance(&self) -> std::collections::BTreeMap<&str, usize> {
        let mut out = std::collections::BTreeMap::new();
        for seg in &self.segments {
            for f in &seg.frames {
                *out.entry(f.referenced_sop_uid.as_str()).or_default() += f.mask.area();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegError {
    #[error("object is not a segmentation (modality {0:?})")]
    NotASegmentation(Option<String>),
    #[error("unsupported segmentation type {0}")]
    UnsupportedSegmentationType(String),
    #[error("frame {frame}: {reason}")]
    MissingFrameMapping { frame: usize, reason: String },
    #[error("segmentation pixel data: {0}")]
    BadPixelData(String),
}

impl SegError {
    pub fn code(&self) -> &'static str {
        match self {
            SegError::NotASegmentation(_) => "not_a_segmentation",
            SegError::UnsupportedSegmentationType(_) => "unsupported_segmentation_type",
            SegError::MissingFrameMapping { .. } => "missing_frame_mapping",
            SegError::BadPixelData(_) => "bad_pixel_data",
        }
    }
}

/// Unpacks `count` bits, least significant bit first within each byte.
pub fn unpack_bits(bytes: &[u8], count: usize) -> Vec<bool> {
    let count = count.min(bytes.len() * 8);
    (0..count).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

/// Inverse of [`unpack_bits`]; the final byte is zero-filled.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

fn first_item(items: &[Item]) -> Option<&Item> {
    items.first()
}

fn source_sop_uid(group: &Item) -> Option<String> {
    let deriv = first_item(group.items(tags::DERIVATION_IMAGE_SEQUENCE))?;
    let source = first_item(deriv.items(tags::SOURCE_IMAGE_SEQUENCE))?;
    source
        .string(tags::REFERENCED_SOP_INSTANCE_UID)
        .map(str::to_string)
}

fn segment_number(group: &Item) -> Option<i64> {
    first_item(group.items(tags::SEGMENT_IDENTIFICATION_SEQUENCE))?
        .int(tags::REFERENCED_SEGMENT_NUMBER)
}

fn plane_position(group: &Item) -> Option<[f64; 3]> {
    let p = first_item(group.items(tags::PLANE_POSITION_SEQUENCE))?
        .numbers(tags::IMAGE_POSITION_PATIENT)?;
    (p.len() == 3).then(|| [p[0], p[1], p[2]])
}

/// Extracts binary segment masks from a DICOM-SEG object.
pub fn parse_seg(obj: &DicomObject) -> Result<SegmentationMasks, SegError> {
    match obj.modality() {
        Some("SEG") => {}
        other => return Err(SegError::NotASegmentation(other.map(str::to_string))),
    }
    let seg_type = obj.string(tags::SEGMENTATION_TYPE).unwrap_or("BINARY");
    if seg_type != "BINARY" {
        return Err(SegError::UnsupportedSegmentationType(seg_type.to_string()));
    }
    let desc = obj
        .pixel_descriptor()
        .ok_or_else(|| SegError::BadPixelData("missing Rows/Columns".into()))?;
    if desc.bits_allocated != 1 {
        return Err(SegError::UnsupportedSegmentationType(format!(
            "BINARY with BitsAllocated {}",
            desc.bits_allocated
        )));
    }
    let px = obj
        .pixel_data
        .as_ref()
        .ok_or_else(|| SegError::BadPixelData("no pixel data".into()))?;
    let per_frame = desc.rows * desc.columns;
    let frames = desc.frames;
    if px.bytes.len() * 8 < per_frame * frames {
        return Err(SegError::BadPixelData(format!(
            "{} bytes for {frames} frames of {per_frame} pixels",
            px.bytes.len()
        )));
    }
    let bits = unpack_bits(&px.bytes, per_frame * frames);

    let mut segments: Vec<Segment> = Vec::new();
    for item in obj.items(tags::SEGMENT_SEQUENCE) {
        let Some(number) = item.int(tags::SEGMENT_NUMBER).filter(|&n| n > 0) else {
            continue;
        };
        if segments.iter().any(|s| s.number == number as u32) {
            continue;
        }
        segments.push(Segment {
            number: number as u32,
            label: item.string(tags::SEGMENT_LABEL).unwrap_or("").to_string(),
            frames: Vec::new(),
        });
    }

    let shared = first_item(obj.items(tags::SHARED_FUNCTIONAL_GROUPS_SEQUENCE));
    let per_frame_groups = obj.items(tags::PER_FRAME_FUNCTIONAL_GROUPS_SEQUENCE);
    if per_frame_groups.len() < frames && !(frames == 1 && shared.is_some()) {
        return Err(SegError::MissingFrameMapping {
            frame: per_frame_groups.len(),
            reason: format!(
                "{} per-frame functional groups for {frames} frames",
                per_frame_groups.len()
            ),
        });
    }

    let mut instances = Vec::new();
    for f in 0..frames {
        let group = per_frame_groups.get(f);
        let number = group
            .and_then(segment_number)
            .or_else(|| shared.and_then(segment_number))
            .ok_or_else(|| SegError::MissingFrameMapping {
                frame: f,
                reason: "no referenced segment number".into(),
            })?;
        let sop = group
            .and_then(source_sop_uid)
            .or_else(|| shared.and_then(source_sop_uid))
            .unwrap_or_default();
        let position = group.and_then(plane_position);
        let Some(segment) = segments.iter_mut().find(|s| s.number as i64 == number) else {
            return Err(SegError::MissingFrameMapping {
                frame: f,
                reason: format!("segment {number} not in Segment Sequence"),
            });
        };
        if !sop.is_empty() && !instances.contains(&sop) {
            instances.push(sop.clone());
        }
        segment.frames.push(SegmentFrame {
            referenced_sop_uid: sop,
            position,
            mask: Mask {
                rows: desc.rows,
                columns: desc.columns,
                bits: bits[f * per_frame..(f + 1) * per_frame].to_vec(),
            },
        });
    }
    segments.sort_by_key(|s| s.number);

    let mut referenced_series = Vec::new();
    for item in obj.items(tags::REFERENCED_SERIES_SEQUENCE) {
        if let Some(uid) = item.string(tags::SERIES_INSTANCE_UID) {
            referenced_series.push(uid.to_string());
        }
        for inst in item.items(tags::REFERENCED_INSTANCE_SEQUENCE) {
            if let Some(uid) = inst.string(tags::REFERENCED_SOP_INSTANCE_UID) {
                if !instances.iter().any(|i| i == uid) {
                    instances.push(uid.to_string());
                }
            }
        }
    }

    Ok(SegmentationMasks {
        rows: desc.rows,
        columns: desc.columns,
        segments,
        referenced_series,
        referenced_instances: instances,
    })
}

/// Source image a segmentation frame is derived from.
#[derive(Debug, Clone)]
pub struct SourceRef<'a> {
    pub sop_class_uid: &'a str,
    pub sop_instance_uid: &'a str,
}

/// Builds a BINARY DICOM-SEG object from masks.
///
/// All UIDs derive from `uid_seed`. Patient/study attributes are copied from
/// `source` so the segmentation lands in the same study.
pub fn build_seg(source: &DicomObject, masks: &SegmentationMasks, uid_seed: &str) -> DicomObject {
    let mut obj = DicomObject::new(TransferSyntax::ExplicitVrLittleEndian);
    let sop_uid = derived_uid(uid_seed, &["seg", "sop"]);
    let series_uid = derived_uid(uid_seed, &["seg", "series"]);

    obj.put(DataElement::new(tags::FILE_META_GROUP_LENGTH, Vr::UL, Value::Ints(vec![0])));
    obj.put(DataElement::new(tags::FILE_META_VERSION, Vr::OB, Value::Bytes(vec![0, 1])));
    obj.put(DataElement::string(tags::MEDIA_STORAGE_SOP_CLASS_UID, Vr::UI, SEGMENTATION_STORAGE));
    obj.put(DataElement::string(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, &sop_uid));
    obj.put(DataElement::string(
        tags::TRANSFER_SYNTAX_UID,
        Vr::UI,
        TransferSyntax::ExplicitVrLittleEndian.uid(),
    ));

    for tag in [
        tags::PATIENT_NAME,
        tags::PATIENT_ID,
        tags::STUDY_INSTANCE_UID,
        tags::STUDY_DATE,
        tags::FRAME_OF_REFERENCE_UID,
    ] {
        if let Some(el) = source.get(tag) {
            obj.put(el.clone());
        }
    }
    obj.put(DataElement::string(tags::SOP_CLASS_UID, Vr::UI, SEGMENTATION_STORAGE));
    obj.put(DataElement::string(tags::SOP_INSTANCE_UID, Vr::UI, &sop_uid));
    obj.put(DataElement::string(tags::MODALITY, Vr::CS, "SEG"));
    obj.put(DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, &series_uid));
    obj.put(DataElement::string(tags::SERIES_NUMBER, Vr::IS, "300"));
    obj.put(DataElement::string(tags::INSTANCE_NUMBER, Vr::IS, "1"));
    obj.put(DataElement::string(tags::SEGMENTATION_TYPE, Vr::CS, "BINARY"));
    obj.put(DataElement::string(tags::PHOTOMETRIC_INTERPRETATION, Vr::CS, "MONOCHROME2"));
    obj.put(DataElement::ints(tags::SAMPLES_PER_PIXEL, Vr::US, &[1]));
    obj.put(DataElement::ints(tags::ROWS, Vr::US, &[masks.rows as i64]));
    obj.put(DataElement::ints(tags::COLUMNS, Vr::US, &[masks.columns as i64]));
    obj.put(DataElement::ints(tags::BITS_ALLOCATED, Vr::US, &[1]));
    obj.put(DataElement::ints(tags::BITS_STORED, Vr::US, &[1]));
    obj.put(DataElement::ints(tags::HIGH_BIT, Vr::US, &[0]));
    obj.put(DataElement::ints(tags::PIXEL_REPRESENTATION, Vr::US, &[0]));

    let segment_items = masks
        .segments
        .iter()
        .map(|s| {
            Item::new(vec![
                DataElement::ints(tags::SEGMENT_NUMBER, Vr::US, &[s.number as i64]),
                DataElement::string(tags::SEGMENT_LABEL, Vr::LO, &s.label),
                DataElement::string(super::Tag::new(0x0062, 0x0008), Vr::CS, "AUTOMATIC"),
            ])
        })
        .collect();
    obj.put(DataElement::sequence(tags::SEGMENT_SEQUENCE, segment_items));

    let mut bits = Vec::new();
    let mut groups = Vec::new();
    let mut sop_uids: Vec<&str> = Vec::new();
    for seg in &masks.segments {
        for frame in &seg.frames {
            bits.extend_from_slice(&frame.mask.bits);
            let mut group = vec![DataElement::sequence(
                tags::SEGMENT_IDENTIFICATION_SEQUENCE,
                vec![Item::new(vec![DataElement::ints(
                    tags::REFERENCED_SEGMENT_NUMBER,
                    Vr::US,
                    &[seg.number as i64],
                )])],
            )];
            if !frame.referenced_sop_uid.is_empty() {
                if !sop_uids.contains(&frame.referenced_sop_uid.as_str()) {
                    sop_uids.push(&frame.referenced_sop_uid);
                }
                group.push(DataElement::sequence(
                    tags::DERIVATION_IMAGE_SEQUENCE,
                    vec![Item::new(vec![DataElement::sequence(
                        tags::SOURCE_IMAGE_SEQUENCE,
                        vec![Item::new(vec![DataElement::string(
                            tags::REFERENCED_SOP_INSTANCE_UID,
                            Vr::UI,
                            &frame.referenced_sop_uid,
                        )])],
                    )])],
                ));
            }
            if let Some(p) = frame.position {
                group.push(DataElement::sequence(
                    tags::PLANE_POSITION_SEQUENCE,
                    vec![Item::new(vec![DataElement::strings(
                        tags::IMAGE_POSITION_PATIENT,
                        Vr::DS,
                        &[&format_ds(p[0]), &format_ds(p[1]), &format_ds(p[2])],
                    )])],
                ));
            }
            groups.push(Item::new(group));
        }
    }
    obj.put(DataElement::string(
        tags::NUMBER_OF_FRAMES,
        Vr::IS,
        &groups.len().max(1).to_string(),
    ));
    obj.put(DataElement::sequence(tags::PER_FRAME_FUNCTIONAL_GROUPS_SEQUENCE, groups));

    let source_series = source.series_uid().unwrap_or_default();
    let class = source.string(tags::SOP_CLASS_UID).unwrap_or_default();
    let instance_items = sop_uids
        .iter()
        .map(|uid| {
            Item::new(vec![
                DataElement::string(tags::REFERENCED_SOP_CLASS_UID, Vr::UI, class),
                DataElement::string(tags::REFERENCED_SOP_INSTANCE_UID, Vr::UI, uid),
            ])
        })
        .collect();
    obj.put(DataElement::sequence(
        tags::REFERENCED_SERIES_SEQUENCE,
        vec![Item::new(vec![
            DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, source_series),
            DataElement::sequence(tags::REFERENCED_INSTANCE_SEQUENCE, instance_items),
        ])],
    ));

    let mut packed = pack_bits(&bits);
    if packed.len() % 2 == 1 {
        packed.push(0);
    }
    obj.pixel_data = Some(PixelData {
        vr: Vr::OB,
        bytes: packed,
    });
    obj
}

/// Formats a decimal string value within the 16-character DS limit.
pub fn format_ds(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 16 {
        return plain;
    }
    for precision in (0..=10).rev() {
        let s = format!("{v:.precision$e}");
        if s.len() <= 16 {
            return s;
        }
    }
    format!("{v:.0e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_bit(bytes: &[u8], i: usize) -> bool {
        // Oracle: test the bit with a mask built by repeated doubling.
        let mut mask = 1u8;
        for _ in 0..(i % 8) {
            mask = mask.wrapping_mul(2);
        }
        bytes[i / 8] & mask != 0
    }

    #[test]
    fn unpack_single_byte() {
        let bits = unpack_bits(&[0xB1], 8);
        let oracle: Vec<bool> = (0..8).map(|i| naive_bit(&[0xB1], i)).collect();
        assert_eq!(bits, oracle);
        let as_int: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
        assert_eq!(as_int, vec![1, 0, 0, 0, 1, 1, 0, 1]);
    }

    #[test]
    fn format_ds_stays_short() {
        assert_eq!(format_ds(1.0), "1");
        assert_eq!(format_ds(-1024.0), "-1024");
        let s = format_ds(0.015259021896696422);
        assert!(s.len() <= 16, "{s}");
        assert!((s.parse::<f64>().unwrap() - 0.015259021896696422).abs() < 1e-9);
    }

    fn seg_fixture(seg_type: &str, labels: &[&str]) -> DicomObject {
        let mut src = DicomObject::new(TransferSyntax::ExplicitVrLittleEndian);
        src.put(DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, "1.2.3"));
        let masks = SegmentationMasks {
            rows: 2,
            columns: 4,
            segments: labels
                .iter()
                .enumerate()
                .map(|(i, l)| Segment {
                    number: i as u32 + 1,
                    label: l.to_string(),
                    frames: vec![SegmentFrame {
                        referenced_sop_uid: format!("1.2.3.{i}"),
                        position: Some([0.0, 0.0, i as f64]),
                        mask: Mask {
                            rows: 2,
                            columns: 4,
                            bits: unpack_bits(&[0xB1 ^ i as u8], 8),
                        },
                    }],
                })
                .collect(),
            referenced_series: vec!["1.2.3".into()],
            referenced_instances: (0..labels.len()).map(|i| format!("1.2.3.{i}")).collect(),
        };
        let mut obj = build_seg(&src, &masks, "seed");
        obj.put(DataElement::string(tags::SEGMENTATION_TYPE, Vr::CS, seg_type));
        obj
    }

    #[test]
    fn build_then_parse() {
        let obj = seg_fixture("BINARY", &["Liver", "Spleen"]);
        let masks = parse_seg(&obj).unwrap();
        assert_eq!(masks.segments.len(), 2);
        assert_eq!(masks.segments[0].number, 1);
        assert_eq!(masks.segments[0].label, "Liver");
        assert_eq!(masks.segments[1].label, "Spleen");
        let m = &masks.segments[0].frames[0].mask;
        let as_int: Vec<u8> = m.bits.iter().map(|&b| b as u8).collect();
        assert_eq!(as_int, vec![1, 0, 0, 0, 1, 1, 0, 1]);
        assert_eq!(masks.segments[1].frames[0].referenced_sop_uid, "1.2.3.1");
        assert_eq!(masks.segments[1].frames[0].position, Some([0.0, 0.0, 1.0]));
        assert_eq!(masks.referenced_series, vec!["1.2.3".to_string()]);
    }

    #[test]
    fn survives_file_round_trip() {
        let obj = seg_fixture("BINARY", &["Liver"]);
        let bytes = crate::dicom::write_file(&obj).unwrap();
        let back = crate::dicom::parse_file(&bytes).unwrap();
        assert_eq!(parse_seg(&back).unwrap(), parse_seg(&obj).unwrap());
    }

    #[test]
    fn rejects_fractional_and_non_seg() {
        let obj = seg_fixture("FRACTIONAL", &["Liver"]);
        assert!(matches!(
            parse_seg(&obj),
            Err(SegError::UnsupportedSegmentationType(t)) if t == "FRACTIONAL"
        ));
        let mut ct = DicomObject::new(TransferSyntax::ExplicitVrLittleEndian);
        ct.put(DataElement::string(tags::MODALITY, Vr::CS, "CT"));
        assert!(matches!(parse_seg(&ct), Err(SegError::NotASegmentation(_))));
    }

    #[test]
    fn missing_per_frame_groups() {
        let mut obj = seg_fixture("BINARY", &["Liver", "Spleen"]);
        obj.put(DataElement::sequence(tags::PER_FRAME_FUNCTIONAL_GROUPS_SEQUENCE, vec![]));
        assert!(matches!(
            parse_seg(&obj),
            Err(SegError::MissingFrameMapping { .. })
        ));
    }

    proptest! {
        #[test]
        fn unpack_repack_identity(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let bits = unpack_bits(&bytes, bytes.len() * 8);
            prop_assert_eq!(bits.len(), bytes.len() * 8);
            prop_assert_eq!(pack_bits(&bits), bytes.clone());
            for (i, &b) in bits.iter().enumerate() {
                prop_assert_eq!(b, naive_bit(&bytes, i));
            }
        }

        #[test]
        fn unpack_truncates(bytes in proptest::collection::vec(any::<u8>(), 1..50), cut in 0usize..400) {
            let n = cut.min(bytes.len() * 8);
            prop_assert_eq!(unpack_bits(&bytes, cut).len(), n);
        }
    }
}
