use super::element::Elements;
use super::object::DicomObject;
use super::tag::tags;

/// One decoded frame in modality units (rescale applied).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFrame {
    pub rows: usize,
    pub columns: usize,
    pub values: Vec<i32>,
}

impl PixelFrame {
    pub fn min_max(&self) -> Option<(i32, i32)> {
        let min = *self.values.iter().min()?;
        let max = *self.values.iter().max()?;
        Some((min, max))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PixelError {
    #[error("object has no pixel data")]
    NoPixelData,
    #[error("frame {index} out of range ({frames} frames)")]
    FrameOutOfRange { index: usize, frames: usize },
    #[error("unsupported pixel format: {0}")]
    UnsupportedPixelFormat(String),
    #[error("pixel data holds {actual} bytes, {expected} required")]
    PayloadTooShort { expected: usize, actual: usize },
}

impl PixelError {
    pub fn code(&self) -> &'static str {
        match self {
            PixelError::NoPixelData => "no_pixel_data",
            PixelError::FrameOutOfRange { .. } => "frame_out_of_range",
            PixelError::UnsupportedPixelFormat(_) => "unsupported_pixel_format",
            PixelError::PayloadTooShort { .. } => "payload_too_short",
        }
    }
}

/// Decodes one frame of 8/16-bit single-sample pixel data.
///
/// Stored values are masked to BitsStored and sign-extended when
/// PixelRepresentation is 1, then mapped through
/// `stored * RescaleSlope + RescaleIntercept` (defaults 1 and 0) and rounded.
pub fn decode_pixels(obj: &DicomObject, frame_index: usize) -> Result<PixelFrame, PixelError> {
    let px = obj.pixel_data.as_ref().ok_or(PixelError::NoPixelData)?;
    let desc = obj
        .pixel_descriptor()
        .ok_or_else(|| PixelError::UnsupportedPixelFormat("missing Rows/Columns".into()))?;
    if desc.samples_per_pixel != 1 {
        return Err(PixelError::UnsupportedPixelFormat(format!(
            "samples per pixel {}",
            desc.samples_per_pixel
        )));
    }
    if !matches!(desc.bits_allocated, 8 | 16) {
        return Err(PixelError::UnsupportedPixelFormat(format!(
            "bits allocated {}",
            desc.bits_allocated
        )));
    }
    if frame_index >= desc.frames {
        return Err(PixelError::FrameOutOfRange {
            index: frame_index,
            frames: desc.frames,
        });
    }
    let bytes_per = desc.bits_allocated as usize / 8;
    let frame_len = desc.rows * desc.columns * bytes_per;
    let start = frame_index * frame_len;
    let Some(raw) = px.bytes.get(start..start + frame_len) else {
        return Err(PixelError::PayloadTooShort {
            expected: desc.expected_len(),
            actual: px.bytes.len(),
        });
    };

    let bits_stored = obj
        .int(tags::BITS_STORED)
        .filter(|&b| b > 0 && b <= desc.bits_allocated as i64)
        .unwrap_or(desc.bits_allocated as i64) as u32;
    let slope = obj.number(tags::RESCALE_SLOPE).unwrap_or(1.0);
    let intercept = obj.number(tags::RESCALE_INTERCEPT).unwrap_or(0.0);
    let identity = slope == 1.0 && intercept == 0.0;

    let values = raw
        .chunks_exact(bytes_per)
        .map(|c| {
            let word = match bytes_per {
                1 => c[0] as u32,
                _ => u16::from_le_bytes([c[0], c[1]]) as u32,
            };
            let stored = extend(word, bits_stored, desc.signed);
            if identity {
                stored
            } else {
                let v = (stored as f64 * slope + intercept).round();
                v.clamp(i32::MIN as f64, i32::MAX as f64) as i32
            }
        })
        .collect();
    Ok(PixelFrame {
        rows: desc.rows,
        columns: desc.columns,
        values,
    })
}

fn extend(word: u32, bits: u32, signed: bool) -> i32 {
    let mask = if bits >= 32 { u32::MAX } else { (1u32 << bits) - 1 };
    let v = word & mask;
    if signed && bits < 32 && v & (1 << (bits - 1)) != 0 {
        (v | !mask) as i32
    } else {
        v as i32
    }
}

/// Packs stored values as little-endian 8- or 16-bit words.
pub fn encode_stored(values: &[i32], bits_allocated: u16) -> Vec<u8> {
    match bits_allocated {
        8 => values.iter().map(|&v| v as u8).collect(),
        _ => values.iter().flat_map(|&v| (v as u16).to_le_bytes()).collect(),
    }
}
