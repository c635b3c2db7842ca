//! NIfTI-1 single-file import. Only geometry carries over; the format has no
//! clinical metadata to map.

use super::element::{DataElement, Value};
use super::object::{DicomObject, PixelData, TransferSyntax};
use super::pixels::encode_stored;
use super::seg::format_ds;
use super::tag::tags;
use super::uid::derived_uid;
use super::Vr;

const HEADER_SIZE: i32 = 348;
const MIN_FILE: usize = 352;
const SECONDARY_CAPTURE: &str = "1.2.840.10008.5.1.4.1.1.7";

pub const DT_UINT8: i16 = 2;
pub const DT_INT16: i16 = 4;
pub const DT_FLOAT32: i16 = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NiftiError {
    #[error("not a single-file NIfTI-1 image: {0}")]
    NotNifti(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("unsupported dimensions: {0}")]
    UnsupportedDims(String),
    #[error("voxel data truncated: {expected} bytes expected, {actual} present")]
    TruncatedData { expected: usize, actual: usize },
}

impl NiftiError {
    pub fn code(&self) -> &'static str {
        match self {
            NiftiError::NotNifti(_) => "not_nifti",
            NiftiError::UnsupportedDatatype(_) => "unsupported_datatype",
            NiftiError::UnsupportedDims(_) => "unsupported_dims",
            NiftiError::TruncatedData { .. } => "truncated_data",
        }
    }
}

struct Header {
    dims: [usize; 3],
    datatype: i16,
    pixdim: [f64; 3],
    vox_offset: usize,
    scl_slope: f64,
    scl_inter: f64,
}

fn i16_at(b: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([b[at], b[at + 1]])
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn read_header(bytes: &[u8]) -> Result<Header, NiftiError> {
    if bytes.len() < MIN_FILE {
        return Err(NiftiError::NotNifti(format!("{} bytes is shorter than a header", bytes.len())));
    }
    let sizeof_hdr = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if sizeof_hdr != HEADER_SIZE {
        return Err(NiftiError::NotNifti(format!("sizeof_hdr {sizeof_hdr}")));
    }
    if &bytes[344..348] != b"n+1\0" {
        return Err(NiftiError::NotNifti(format!("magic {:?}", &bytes[344..348])));
    }
    let ndim = i16_at(bytes, 40);
    if !(2..=3).contains(&ndim) {
        return Err(NiftiError::UnsupportedDims(format!("dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for (i, d) in dims.iter_mut().enumerate().take(ndim as usize) {
        let v = i16_at(bytes, 42 + 2 * i);
        if v < 1 {
            return Err(NiftiError::UnsupportedDims(format!("dim[{}] = {v}", i + 1)));
        }
        *d = v as usize;
    }
    let datatype = i16_at(bytes, 70);
    if !matches!(datatype, DT_UINT8 | DT_INT16 | DT_FLOAT32) {
        return Err(NiftiError::UnsupportedDatatype(datatype));
    }
    let mut pixdim = [1.0f64; 3];
    for (i, p) in pixdim.iter_mut().enumerate() {
        let v = f32_at(bytes, 80 + 4 * i) as f64;
        if v.is_finite() && v > 0.0 {
            *p = v;
        }
    }
    let vox = f32_at(bytes, 108);
    let vox_offset = if vox.is_finite() && vox >= MIN_FILE as f32 {
        vox as usize
    } else {
        MIN_FILE
    };
    let slope = f32_at(bytes, 112) as f64;
    let inter = f32_at(bytes, 116) as f64;
    let (scl_slope, scl_inter) = if slope.is_finite() && slope != 0.0 {
        (slope, if inter.is_finite() { inter } else { 0.0 })
    } else {
        (1.0, 0.0)
    };
    Ok(Header {
        dims,
        datatype,
        pixdim,
        vox_offset,
        scl_slope,
        scl_inter,
    })
}

/// Converts a single-file NIfTI-1 volume into one DICOM object per slice.
///
/// Every UID derives from `uid_seed` and the slice index, so identical inputs
/// give identical output.
pub fn nifti_to_dicom(bytes: &[u8], uid_seed: &str) -> Result<Vec<DicomObject>, NiftiError> {
    let h = read_header(bytes)?;
    let [nx, ny, nz] = h.dims;
    if nx > u16::MAX as usize || ny > u16::MAX as usize {
        return Err(NiftiError::UnsupportedDims(format!("{nx}x{ny} exceeds 65535")));
    }
    let width = match h.datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        _ => 4,
    };
    let voxels = nx * ny * nz;
    let expected = voxels * width;
    let data = bytes.get(h.vox_offset..h.vox_offset + expected).ok_or(NiftiError::TruncatedData {
        expected,
        actual: bytes.len().saturating_sub(h.vox_offset),
    })?;

    // Stored integers plus the rescale that maps them back to physical values.
    let (stored, bits, signed, slope, intercept): (Vec<i32>, u16, bool, f64, f64) = match h.datatype {
        DT_UINT8 => (data.iter().map(|&b| b as i32).collect(), 8, false, h.scl_slope, h.scl_inter),
        DT_INT16 => (
            data.chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as i32)
                .collect(),
            16,
            true,
            h.scl_slope,
            h.scl_inter,
        ),
        _ => {
            let physical: Vec<f64> = data
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64 * h.scl_slope + h.scl_inter)
                .map(|v| if v.is_finite() { v } else { 0.0 })
                .collect();
            let min = physical.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = physical.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = max - min;
            let slope = if span > 0.0 { span / 65535.0 } else { 1.0 };
            let q = physical
                .iter()
                .map(|v| (((v - min) / slope).round()).clamp(0.0, 65535.0) as i32)
                .collect();
            (q, 16, false, slope, min)
        }
    };

    let study_uid = derived_uid(uid_seed, &["nifti", "study"]);
    let series_uid = derived_uid(uid_seed, &["nifti", "series"]);
    let frame_uid = derived_uid(uid_seed, &["nifti", "frame-of-reference"]);
    let slice_len = nx * ny;
    let rescale = slope != 1.0 || intercept != 0.0;

    let mut out = Vec::with_capacity(nz);
    for z in 0..nz {
        let sop_uid = derived_uid(uid_seed, &["nifti", "sop", &z.to_string()]);
        let mut obj = DicomObject::new(TransferSyntax::ExplicitVrLittleEndian);
        obj.put(DataElement::new(tags::FILE_META_GROUP_LENGTH, Vr::UL, Value::Ints(vec![0])));
        obj.put(DataElement::new(tags::FILE_META_VERSION, Vr::OB, Value::Bytes(vec![0, 1])));
        obj.put(DataElement::string(tags::MEDIA_STORAGE_SOP_CLASS_UID, Vr::UI, SECONDARY_CAPTURE));
        obj.put(DataElement::string(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, &sop_uid));
        obj.put(DataElement::string(
            tags::TRANSFER_SYNTAX_UID,
            Vr::UI,
            TransferSyntax::ExplicitVrLittleEndian.uid(),
        ));
        obj.put(DataElement::string(tags::SOP_CLASS_UID, Vr::UI, SECONDARY_CAPTURE));
        obj.put(DataElement::string(tags::SOP_INSTANCE_UID, Vr::UI, &sop_uid));
        obj.put(DataElement::string(tags::MODALITY, Vr::CS, "OT"));
        obj.put(DataElement::string(tags::PATIENT_NAME, Vr::PN, "NIFTI_IMPORT"));
        obj.put(DataElement::string(tags::STUDY_INSTANCE_UID, Vr::UI, &study_uid));
        obj.put(DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, &series_uid));
        obj.put(DataElement::string(tags::FRAME_OF_REFERENCE_UID, Vr::UI, &frame_uid));
        obj.put(DataElement::string(tags::INSTANCE_NUMBER, Vr::IS, &(z + 1).to_string()));
        obj.put(DataElement::strings(
            tags::IMAGE_POSITION_PATIENT,
            Vr::DS,
            &["0", "0", &format_ds(z as f64 * h.pixdim[2])],
        ));
        obj.put(DataElement::strings(
            tags::IMAGE_ORIENTATION_PATIENT,
            Vr::DS,
            &["1", "0", "0", "0", "1", "0"],
        ));
        if nz > 1 {
            obj.put(DataElement::string(tags::SLICE_THICKNESS, Vr::DS, &format_ds(h.pixdim[2])));
        }
        obj.put(DataElement::ints(tags::SAMPLES_PER_PIXEL, Vr::US, &[1]));
        obj.put(DataElement::string(tags::PHOTOMETRIC_INTERPRETATION, Vr::CS, "MONOCHROME2"));
        obj.put(DataElement::ints(tags::ROWS, Vr::US, &[ny as i64]));
        obj.put(DataElement::ints(tags::COLUMNS, Vr::US, &[nx as i64]));
        obj.put(DataElement::strings(
            tags::PIXEL_SPACING,
            Vr::DS,
            &[&format_ds(h.pixdim[1]), &format_ds(h.pixdim[0])],
        ));
        obj.put(DataElement::ints(tags::BITS_ALLOCATED, Vr::US, &[bits as i64]));
        obj.put(DataElement::ints(tags::BITS_STORED, Vr::US, &[bits as i64]));
        obj.put(DataElement::ints(tags::HIGH_BIT, Vr::US, &[bits as i64 - 1]));
        obj.put(DataElement::ints(tags::PIXEL_REPRESENTATION, Vr::US, &[signed as i64]));
        if rescale {
            obj.put(DataElement::string(tags::RESCALE_INTERCEPT, Vr::DS, &format_ds(intercept)));
            obj.put(DataElement::string(tags::RESCALE_SLOPE, Vr::DS, &format_ds(slope)));
        }
        let mut px = encode_stored(&stored[z * slice_len..(z + 1) * slice_len], bits);
        if px.len() % 2 == 1 {
            px.push(0);
        }
        obj.pixel_data = Some(PixelData {
            vr: if bits == 8 { Vr::OB } else { Vr::OW },
            bytes: px,
        });
        out.push(obj);
    }
    Ok(out)
}
