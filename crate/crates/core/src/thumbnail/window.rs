use serde::{Deserialize, Serialize};

use crate::dicom::{tags, DicomObject, Elements, PixelFrame};

use super::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub center: f64,
    /// Must exceed 1.
    pub width: f64,
}

/// DICOM linear VOI function mapped onto 0..=255.
pub fn window_value(v: f64, center: f64, width: f64) -> u8 {
    // ((v - (c - 0.5)) / (w - 1) + 0.5) * 255, with a single rounding step
    let y = (2.0 * (v - center) + width) * 255.0 / (2.0 * (width - 1.0));
    y.round().clamp(0.0, 255.0) as u8
}

pub fn window_to_gray(frame: &PixelFrame, w: WindowSpec, monochrome1: bool) -> GrayImage {
    let pixels = frame
        .values
        .iter()
        .map(|&v| {
            let g = window_value(v as f64, w.center, w.width);
            if monochrome1 {
                255 - g
            } else {
                g
            }
        })
        .collect();
    GrayImage {
        rows: frame.rows,
        columns: frame.columns,
        pixels,
    }
}

/// First header window with width above 1, else the frame's full range.
pub fn default_window(obj: &DicomObject, frame: &PixelFrame) -> WindowSpec {
    if let (Some(center), Some(width)) = (obj.number(tags::WINDOW_CENTER), obj.number(tags::WINDOW_WIDTH)) {
        if width > 1.0 && center.is_finite() && width.is_finite() {
            return WindowSpec { center, width };
        }
    }
    let (min, max) = frame.min_max().unwrap_or((0, 0));
    let (min, max) = (min as f64, max as f64);
    WindowSpec {
        center: (min + max) / 2.0,
        width: (max - min).max(2.0),
    }
}
