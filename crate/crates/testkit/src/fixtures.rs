//! Synthetic DICOM instances, series, segmentations and NIfTI volumes.

use std::path::{Path, PathBuf};

use curator_core::dicom::{
    build_rtstruct, build_seg, derived_uid, tags, write_file, Contour, ContourSet, DataElement, DicomObject, Elements,
    Item, Mask, PixelData, Roi, Segment, SegmentFrame, SegmentationMasks, Tag, TransferSyntax, Value, Vr,
    WriteOptions,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub const CT_IMAGE_STORAGE: &str = "1.2.840.10008.5.1.4.1.1.2";
pub const MR_IMAGE_STORAGE: &str = "1.2.840.10008.5.1.4.1.1.4";
pub const PET_IMAGE_STORAGE: &str = "1.2.840.10008.5.1.4.1.1.128";
pub const SECONDARY_CAPTURE: &str = "1.2.840.10008.5.1.4.1.1.7";

pub fn sop_class_for(modality: &str) -> &'static str {
    match modality {
        "CT" => CT_IMAGE_STORAGE,
        "MR" => MR_IMAGE_STORAGE,
        "PT" => PET_IMAGE_STORAGE,
        _ => SECONDARY_CAPTURE,
    }
}

/// Fills the file meta group from the dataset's SOP class/instance and transfer syntax.
pub fn add_meta(obj: &mut DicomObject) {
    let class = obj.string(tags::SOP_CLASS_UID).unwrap_or(SECONDARY_CAPTURE).to_string();
    let inst = obj.string(tags::SOP_INSTANCE_UID).unwrap_or("2.25.0").to_string();
    obj.put(DataElement::new(tags::FILE_META_GROUP_LENGTH, Vr::UL, Value::Ints(vec![0])));
    obj.put(DataElement::new(tags::FILE_META_VERSION, Vr::OB, Value::Bytes(vec![0, 1])));
    obj.put(DataElement::string(tags::MEDIA_STORAGE_SOP_CLASS_UID, Vr::UI, &class));
    obj.put(DataElement::string(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, &inst));
    obj.put(DataElement::string(tags::TRANSFER_SYNTAX_UID, Vr::UI, obj.transfer_syntax.uid()));
    obj.put(DataElement::string(tags::IMPLEMENTATION_CLASS_UID, Vr::UI, "2.25.4242"));
}

/// Shape and header values of one synthetic image series.
#[derive(Debug, Clone)]
pub struct SeriesSpec {
    pub series_uid: String,
    pub study_uid: String,
    pub patient_id: String,
    pub patient_name: String,
    pub modality: String,
    pub manufacturer: String,
    pub kernel: Option<String>,
    pub body_part: Option<String>,
    pub description: String,
    pub study_date: String,
    pub rows: usize,
    pub columns: usize,
    pub instances: usize,
    /// Pixel spacing and slice distance, mm.
    pub spacing: f64,
    pub transfer_syntax: TransferSyntax,
}

impl SeriesSpec {
    pub fn new(seed: &str, modality: &str) -> Self {
        SeriesSpec {
            series_uid: derived_uid(seed, &["series"]),
            study_uid: derived_uid(seed, &["study"]),
            patient_id: format!("PAT-{}", &derived_uid(seed, &["patient"])[5..11]),
            patient_name: "Doe^Jane".into(),
            modality: modality.into(),
            manufacturer: "SIEMENS".into(),
            kernel: (modality == "CT").then(|| "B30f".to_string()),
            body_part: None,
            description: format!("{modality} synthetic"),
            study_date: "20240105".into(),
            rows: 16,
            columns: 16,
            instances: 5,
            spacing: 1.0,
            transfer_syntax: TransferSyntax::ExplicitVrLittleEndian,
        }
    }
}

fn ds(v: f64) -> String {
    curator_core::dicom::seg::format_ds(v)
}

/// Image instances with a bright disc in the middle, one per slice.
pub fn series(spec: &SeriesSpec) -> Vec<DicomObject> {
    (0..spec.instances).map(|i| instance(spec, i)).collect()
}

pub fn instance(spec: &SeriesSpec, i: usize) -> DicomObject {
    let mut o = DicomObject::new(spec.transfer_syntax);
    let sop = derived_uid(&spec.series_uid, &["sop", &i.to_string()]);
    let class = sop_class_for(&spec.modality);
    o.put(DataElement::string(tags::SOP_CLASS_UID, Vr::UI, class));
    o.put(DataElement::string(tags::SOP_INSTANCE_UID, Vr::UI, &sop));
    o.put(DataElement::strings(tags::IMAGE_TYPE, Vr::CS, &["ORIGINAL", "PRIMARY", "AXIAL"]));
    o.put(DataElement::string(tags::STUDY_DATE, Vr::DA, &spec.study_date));
    o.put(DataElement::string(tags::MODALITY, Vr::CS, &spec.modality));
    o.put(DataElement::string(tags::MANUFACTURER, Vr::LO, &spec.manufacturer));
    o.put(DataElement::string(tags::SERIES_DESCRIPTION, Vr::LO, &spec.description));
    o.put(DataElement::string(tags::PATIENT_NAME, Vr::PN, &spec.patient_name));
    o.put(DataElement::string(tags::PATIENT_ID, Vr::LO, &spec.patient_id));
    if let Some(bp) = &spec.body_part {
        o.put(DataElement::string(tags::BODY_PART_EXAMINED, Vr::CS, bp));
    }
    o.put(DataElement::string(tags::SLICE_THICKNESS, Vr::DS, &ds(spec.spacing)));
    if let Some(k) = &spec.kernel {
        o.put(DataElement::string(tags::CONVOLUTION_KERNEL, Vr::SH, k));
    }
    o.put(DataElement::string(tags::STUDY_INSTANCE_UID, Vr::UI, &spec.study_uid));
    o.put(DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, &spec.series_uid));
    o.put(DataElement::string(tags::SERIES_NUMBER, Vr::IS, "1"));
    o.put(DataElement::string(tags::INSTANCE_NUMBER, Vr::IS, &(i + 1).to_string()));
    let (x0, y0) = (-(spec.columns as f64) * spec.spacing / 2.0, -(spec.rows as f64) * spec.spacing / 2.0);
    let z = i as f64 * spec.spacing;
    o.put(DataElement::strings(
        tags::IMAGE_POSITION_PATIENT,
        Vr::DS,
        &[&ds(x0), &ds(y0), &ds(z)],
    ));
    o.put(DataElement::strings(
        tags::IMAGE_ORIENTATION_PATIENT,
        Vr::DS,
        &["1", "0", "0", "0", "1", "0"],
    ));
    o.put(DataElement::string(
        tags::FRAME_OF_REFERENCE_UID,
        Vr::UI,
        &derived_uid(&spec.study_uid, &["frame-of-reference"]),
    ));
    o.put(DataElement::ints(tags::SAMPLES_PER_PIXEL, Vr::US, &[1]));
    o.put(DataElement::string(tags::PHOTOMETRIC_INTERPRETATION, Vr::CS, "MONOCHROME2"));
    o.put(DataElement::ints(tags::ROWS, Vr::US, &[spec.rows as i64]));
    o.put(DataElement::ints(tags::COLUMNS, Vr::US, &[spec.columns as i64]));
    o.put(DataElement::strings(tags::PIXEL_SPACING, Vr::DS, &[&ds(spec.spacing), &ds(spec.spacing)]));
    o.put(DataElement::ints(tags::BITS_ALLOCATED, Vr::US, &[16]));
    o.put(DataElement::ints(tags::BITS_STORED, Vr::US, &[16]));
    o.put(DataElement::ints(tags::HIGH_BIT, Vr::US, &[15]));
    let signed = spec.modality == "CT";
    o.put(DataElement::ints(tags::PIXEL_REPRESENTATION, Vr::US, &[signed as i64]));
    if signed {
        o.put(DataElement::string(tags::WINDOW_CENTER, Vr::DS, "40"));
        o.put(DataElement::string(tags::WINDOW_WIDTH, Vr::DS, "400"));
    }
    let (background, fg) = if signed { (-1000i32, 60 + 10 * i as i32) } else { (0, 800 + 10 * i as i32) };
    let (cy, cx) = (spec.rows as f64 / 2.0, spec.columns as f64 / 2.0);
    let radius = spec.rows.min(spec.columns) as f64 / 3.0;
    let mut bytes = Vec::with_capacity(spec.rows * spec.columns * 2);
    for r in 0..spec.rows {
        for c in 0..spec.columns {
            let d = ((r as f64 + 0.5 - cy).powi(2) + (c as f64 + 0.5 - cx).powi(2)).sqrt();
            let v = if d <= radius { fg } else { background };
            bytes.extend_from_slice(&(v as i16).to_le_bytes());
        }
    }
    o.pixel_data = Some(PixelData { vr: Vr::OW, bytes });
    add_meta(&mut o);
    o
}

/// A BINARY SEG over `images` with one rectangular segment per label, on the middle slices.
pub fn seg_for(images: &[DicomObject], labels: &[&str]) -> DicomObject {
    let first = &images[0];
    let rows = first.int(tags::ROWS).unwrap_or(0) as usize;
    let columns = first.int(tags::COLUMNS).unwrap_or(0) as usize;
    let series_uid = first.series_uid().unwrap_or_default().to_string();
    let mid = (images.len() - 1) / 2;
    let lo = mid.saturating_sub(1);
    let hi = (mid + 1).min(images.len() - 1);
    let mut refs = Vec::new();
    let segments = labels
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let frames = (lo..=hi)
                .map(|s| {
                    let mut mask = Mask::empty(rows, columns);
                    let grow = if s == mid { 1 } else { 0 };
                    let r0 = (rows / 4 + k).min(rows - 1);
                    let c0 = (columns / 4 + k).min(columns - 1);
                    for r in r0..(rows / 2 + k + grow).min(rows) {
                        for c in c0..(columns / 2 + k + grow).min(columns) {
                            mask.set(r, c, true);
                        }
                    }
                    let sop = images[s].sop_instance_uid().unwrap_or_default().to_string();
                    refs.push(sop.clone());
                    SegmentFrame {
                        referenced_sop_uid: sop,
                        position: None,
                        mask,
                    }
                })
                .collect();
            Segment {
                number: k as u32 + 1,
                label: label.to_string(),
                frames,
            }
        })
        .collect();
    refs.sort();
    refs.dedup();
    let masks = SegmentationMasks {
        rows,
        columns,
        segments,
        referenced_series: vec![series_uid.clone()],
        referenced_instances: refs,
    };
    build_seg(first, &masks, &format!("{series_uid}/seg/{}", labels.join(",")))
}

/// An RTSTRUCT with one closed planar contour per ROI on the middle slice.
///
/// ROI vertices are given in pixel (column, row) coordinates of that slice.
pub fn rtstruct_for(images: &[DicomObject], rois: &[(&str, Vec<(f64, f64)>)]) -> DicomObject {
    let mid = &images[(images.len() - 1) / 2];
    let ipp = mid.numbers(tags::IMAGE_POSITION_PATIENT).unwrap_or_else(|| vec![0.0; 3]);
    let sp = mid.numbers(tags::PIXEL_SPACING).unwrap_or_else(|| vec![1.0, 1.0]);
    let series_uid = mid.series_uid().unwrap_or_default().to_string();
    let set = ContourSet {
        rois: rois
            .iter()
            .enumerate()
            .map(|(k, (name, pts))| Roi {
                number: k as i64 + 1,
                name: name.to_string(),
                color: None,
                contours: vec![Contour {
                    referenced_sop_uid: mid.sop_instance_uid().map(str::to_string),
                    geometric_type: "CLOSED_PLANAR".into(),
                    points: pts
                        .iter()
                        .map(|&(c, r)| [ipp[0] + c * sp[1], ipp[1] + r * sp[0], ipp[2]])
                        .collect(),
                }],
            })
            .collect(),
        referenced_series: vec![series_uid.clone()],
    };
    build_rtstruct(mid, &set, &format!("{series_uid}/rtstruct"))
}

/// Writes each object as `<dir>/<n>.dcm` and returns the paths.
pub fn write_objects(dir: &Path, objs: &[DicomObject]) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    objs.iter()
        .enumerate()
        .map(|(i, o)| {
            let p = dir.join(format!("{i:04}.dcm"));
            std::fs::write(&p, write_file(o).unwrap()).unwrap();
            p
        })
        .collect()
}

/// A synthetic corpus: `n_series` series of `per_series` instances, modalities assigned round-robin.
pub fn corpus(seed: &str, n_series: usize, per_series: usize, modalities: &[&str]) -> Vec<Vec<DicomObject>> {
    (0..n_series)
        .map(|i| {
            let mut spec = SeriesSpec::new(&format!("{seed}/{i}"), modalities[i % modalities.len()]);
            spec.instances = per_series;
            spec.study_uid = derived_uid(seed, &["study", &(i / 2).to_string()]);
            spec.patient_id = format!("PAT{:03}", i / 2);
            spec.description = format!("{} series {i}", spec.modality);
            spec.body_part = Some(["CHEST", "ABDOMEN", "HEAD"][i % 3].to_string());
            series(&spec)
        })
        .collect()
}

const TEXTS: &[&str] = &["ROUTINE", "Thorax^Abdomen", "follow up", "Ä-Ö-Ü", "x", ""];

fn random_text(rng: &mut impl Rng, latin1: bool) -> String {
    let mut s = TEXTS.choose(rng).unwrap().to_string();
    if !latin1 {
        s = s.replace(['Ä', 'Ö', 'Ü'], "A");
    }
    s
}

fn random_date(rng: &mut impl Rng) -> String {
    format!("{:04}{:02}{:02}", rng.gen_range(1990..2030), rng.gen_range(1..=12), rng.gen_range(1..=28))
}

fn random_ds(rng: &mut impl Rng) -> String {
    ds(rng.gen_range(-5000..5000) as f64 / 8.0)
}

/// A random Part-10 object exercising most VR families, nested sequences and multi-frame pixel data.
///
/// Returns the object and the write options to serialize it with.
pub fn random_fixture(rng: &mut impl Rng, ts: TransferSyntax, n: usize) -> (DicomObject, WriteOptions) {
    let mut o = DicomObject::new(ts);
    let seed = format!("fixture/{n}");
    let latin1 = rng.gen_bool(0.3);
    if latin1 {
        o.put(DataElement::string(tags::SPECIFIC_CHARACTER_SET, Vr::CS, "ISO_IR 100"));
    }
    let modality = *["CT", "MR", "PT", "OT"].choose(rng).unwrap();
    o.put(DataElement::string(tags::SOP_CLASS_UID, Vr::UI, sop_class_for(modality)));
    o.put(DataElement::string(tags::SOP_INSTANCE_UID, Vr::UI, &derived_uid(&seed, &["sop"])));
    o.put(DataElement::strings(
        tags::IMAGE_TYPE,
        Vr::CS,
        &["ORIGINAL", "PRIMARY", ["AXIAL", "LOCALIZER"].choose(rng).unwrap()],
    ));
    o.put(DataElement::string(tags::STUDY_DATE, Vr::DA, &random_date(rng)));
    o.put(DataElement::string(Tag::new(0x0008, 0x0030), Vr::TM, "101530.25"));
    o.put(DataElement::string(tags::MODALITY, Vr::CS, modality));
    o.put(DataElement::string(tags::MANUFACTURER, Vr::LO, &random_text(rng, latin1)));
    o.put(DataElement::string(
        Tag::new(0x0008, 0x0081),
        Vr::ST,
        &format!("{} Street 1", random_text(rng, latin1)),
    ));
    let name = if latin1 { "Müller^Jörg" } else { "Doe^John^Q" };
    o.put(DataElement::string(tags::PATIENT_NAME, Vr::PN, name));
    o.put(DataElement::string(tags::PATIENT_ID, Vr::LO, &format!("P{n:04}")));
    o.put(DataElement::string(Tag::new(0x0010, 0x1010), Vr::AS, "045Y"));
    if rng.gen_bool(0.5) {
        o.put(DataElement::string(Tag::new(0x0010, 0x4000), Vr::LT, "line one\r\nline two"));
    }
    o.put(DataElement::string(tags::SLICE_THICKNESS, Vr::DS, &random_ds(rng)));
    o.put(DataElement::strings(
        tags::CONVOLUTION_KERNEL,
        Vr::SH,
        &["B30f", ["I26f", "3", "FC13"].choose(rng).unwrap()],
    ));
    o.put(DataElement::new(
        Tag::new(0x0018, 0x9345),
        Vr::FD,
        Value::Floats(vec![rng.gen_range(0..10_000) as f64 / 16.0]),
    ));
    o.put(DataElement::string(tags::STUDY_INSTANCE_UID, Vr::UI, &derived_uid(&seed, &["study"])));
    o.put(DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, &derived_uid(&seed, &["series"])));
    o.put(DataElement::string(tags::SERIES_NUMBER, Vr::IS, &rng.gen_range(1..999).to_string()));
    o.put(DataElement::string(tags::INSTANCE_NUMBER, Vr::IS, &rng.gen_range(1..999).to_string()));
    o.put(DataElement::strings(
        tags::IMAGE_POSITION_PATIENT,
        Vr::DS,
        &[&random_ds(rng), &random_ds(rng), &random_ds(rng)],
    ));
    o.put(DataElement::new(
        Tag::new(0x0020, 0x9057),
        Vr::UL,
        Value::Ints(vec![rng.gen_range(0..100_000)]),
    ));
    if rng.gen_bool(0.5) {
        o.put(DataElement::string(Tag::new(0x0020, 0x4000), Vr::LT, &random_text(rng, latin1)));
    }

    // Referenced series → referenced instances: two levels of nesting.
    let series_items = (0..rng.gen_range(0..3))
        .map(|s| {
            let inst_items = (0..rng.gen_range(0..3))
                .map(|k| {
                    Item::new(vec![
                        DataElement::string(tags::REFERENCED_SOP_CLASS_UID, Vr::UI, CT_IMAGE_STORAGE),
                        DataElement::string(
                            tags::REFERENCED_SOP_INSTANCE_UID,
                            Vr::UI,
                            &derived_uid(&seed, &["ref", &s.to_string(), &k.to_string()]),
                        ),
                    ])
                })
                .collect();
            Item::new(vec![
                DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, &derived_uid(&seed, &["refseries", &s.to_string()])),
                DataElement::sequence(tags::REFERENCED_INSTANCE_SEQUENCE, inst_items),
            ])
        })
        .collect();
    o.put(DataElement::sequence(tags::REFERENCED_SERIES_SEQUENCE, series_items));

    let frames = rng.gen_range(1..=4usize);
    let rows = rng.gen_range(1..=8usize);
    let cols = rng.gen_range(1..=8usize);
    let bits = *[8usize, 16].choose(rng).unwrap();
    o.put(DataElement::ints(tags::SAMPLES_PER_PIXEL, Vr::US, &[1]));
    o.put(DataElement::string(tags::PHOTOMETRIC_INTERPRETATION, Vr::CS, "MONOCHROME2"));
    if frames > 1 {
        o.put(DataElement::string(tags::NUMBER_OF_FRAMES, Vr::IS, &frames.to_string()));
        // Frame Increment Pointer → Frame Time
        o.put(DataElement::new(Tag::new(0x0028, 0x0009), Vr::AT, Value::Ints(vec![0x0018_1063])));
        o.put(DataElement::string(Tag::new(0x0018, 0x1063), Vr::DS, "33.3"));
    }
    o.put(DataElement::ints(tags::ROWS, Vr::US, &[rows as i64]));
    o.put(DataElement::ints(tags::COLUMNS, Vr::US, &[cols as i64]));
    o.put(DataElement::strings(tags::PIXEL_SPACING, Vr::DS, &["0.5", "0.5"]));
    o.put(DataElement::ints(tags::BITS_ALLOCATED, Vr::US, &[bits as i64]));
    o.put(DataElement::ints(tags::BITS_STORED, Vr::US, &[bits as i64]));
    o.put(DataElement::ints(tags::HIGH_BIT, Vr::US, &[bits as i64 - 1]));
    o.put(DataElement::ints(tags::PIXEL_REPRESENTATION, Vr::US, &[0]));
    o.put(DataElement::string(tags::WINDOW_CENTER, Vr::DS, &random_ds(rng)));
    o.put(DataElement::string(tags::WINDOW_WIDTH, Vr::DS, "400"));
    o.put(DataElement::string(tags::RESCALE_INTERCEPT, Vr::DS, "-1024"));
    o.put(DataElement::string(tags::RESCALE_SLOPE, Vr::DS, "1"));
    let mut len = frames * rows * cols * bits / 8;
    len += len % 2;
    let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
    o.pixel_data = Some(PixelData {
        vr: if bits == 8 { Vr::OB } else { Vr::OW },
        bytes,
    });
    add_meta(&mut o);
    let opts = WriteOptions {
        undefined_length_sequences: rng.gen_bool(0.5),
    };
    (o, opts)
}

/// A single-file NIfTI-1 volume.
pub fn nifti_bytes(dims: [i16; 3], datatype: i16, pixdim: [f32; 3], data: &[u8]) -> Vec<u8> {
    let mut h = vec![0u8; 352];
    h[0..4].copy_from_slice(&348i32.to_le_bytes());
    let dim = [3i16, dims[0], dims[1], dims[2], 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        h[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
    }
    let bitpix: i16 = match datatype {
        2 => 8,
        4 => 16,
        _ => 32,
    };
    h[70..72].copy_from_slice(&datatype.to_le_bytes());
    h[72..74].copy_from_slice(&bitpix.to_le_bytes());
    let pd = [1.0f32, pixdim[0], pixdim[1], pixdim[2], 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pd.iter().enumerate() {
        h[76 + 4 * i..80 + 4 * i].copy_from_slice(&p.to_le_bytes());
    }
    h[108..112].copy_from_slice(&352f32.to_le_bytes());
    h[112..116].copy_from_slice(&1f32.to_le_bytes());
    h[344..348].copy_from_slice(b"n+1\0");
    h.extend_from_slice(data);
    h
}
