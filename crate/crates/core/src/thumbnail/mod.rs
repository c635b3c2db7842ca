//! Gallery thumbnails: windowed slices, segmentation overlays and placeholder cards.

mod font;
mod raster;
mod window;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dicom::{decode_pixels, parse_rtstruct, parse_seg, DicomObject, Mask, Photometric};

pub use raster::{fill_polygon, rasterize_contours, SliceGeometry};
pub use window::{default_window, window_to_gray, window_value, WindowSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ThumbnailError {
    #[error("no instance with renderable pixel data")]
    NoRenderableInstance,
    #[error("mask is {mask_rows}x{mask_columns}, image is {rows}x{columns}")]
    DimensionMismatch {
        rows: usize,
        columns: usize,
        mask_rows: usize,
        mask_columns: usize,
    },
    #[error("only axial slices (orientation 1\\0\\0\\0\\1\\0) can be rasterized")]
    UnsupportedOrientation,
    #[error("invalid thumbnail configuration: {0}")]
    InvalidConfig(String),
}

/// Colorblind-safe defaults, after Paul Tol's muted scheme.
pub const DEFAULT_PALETTE: [[u8; 3]; 10] = [
    [204, 102, 119],
    [51, 34, 136],
    [221, 204, 119],
    [17, 119, 51],
    [136, 204, 238],
    [136, 34, 85],
    [68, 170, 153],
    [153, 153, 51],
    [170, 68, 153],
    [230, 159, 0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThumbnailConfig {
    pub edge: u32,
    pub overlay_alpha: f64,
    pub palette: Vec<[u8; 3]>,
    pub background: [u8; 3],
    /// Fixed window instead of the header/min-max default.
    pub window: Option<WindowSpec>,
}

impl Default for ThumbnailConfig {
    fn default() -> Self {
        ThumbnailConfig {
            edge: 128,
            overlay_alpha: 0.5,
            palette: DEFAULT_PALETTE.to_vec(),
            background: [0, 0, 0],
            window: None,
        }
    }
}

impl ThumbnailConfig {
    pub fn with_edge(edge: u32) -> Self {
        ThumbnailConfig {
            edge,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ThumbnailError> {
        if !(32..=512).contains(&self.edge) {
            return Err(ThumbnailError::InvalidConfig(format!("edge {} outside 32..=512", self.edge)));
        }
        if !(0.0..=1.0).contains(&self.overlay_alpha) {
            return Err(ThumbnailError::InvalidConfig(format!("alpha {}", self.overlay_alpha)));
        }
        if self.palette.is_empty() {
            return Err(ThumbnailError::InvalidConfig("empty palette".into()));
        }
        if let Some(w) = self.window {
            if w.width <= 1.0 {
                return Err(ThumbnailError::InvalidConfig(format!("window width {}", w.width)));
            }
        }
        Ok(())
    }

    /// Short stable hash of every setting that affects output bytes.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "v1;edge={};alpha={};bg={:?};palette={:?};window={:?}",
            self.edge, self.overlay_alpha, self.background, self.palette, self.window
        ));
        h.finalize()[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `<cache_dir>/<first two uid chars>/<uid>_<config hash>.png`
pub fn cache_path(cache_dir: &Path, series_uid: &str, cfg: &ThumbnailConfig) -> PathBuf {
    let shard: String = series_uid.chars().take(2).collect();
    cache_dir.join(shard).join(format!("{series_uid}_{}.png", cfg.hash()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub columns: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub rows: usize,
    pub columns: usize,
    /// Row-major RGB triples.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(rows: usize, columns: usize, color: [u8; 3]) -> Self {
        RgbImage {
            rows,
            columns,
            data: color.repeat(rows * columns),
        }
    }

    pub fn from_gray(g: &GrayImage) -> Self {
        RgbImage {
            rows: g.rows,
            columns: g.columns,
            data: g.pixels.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.columns + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, row: usize, col: usize, c: [u8; 3]) {
        let i = (row * self.columns + col) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }
}

/// One segment or ROI to draw over a slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayLayer {
    pub number: u32,
    /// Overrides the palette colour (RTSTRUCT ROI Display Color).
    pub color: Option<[u8; 3]>,
    pub mask: Mask,
}

/// Blends layers over the gray image in ascending segment number.
pub fn render_overlay(base: &GrayImage, layers: &[OverlayLayer], cfg: &ThumbnailConfig) -> Result<RgbImage, ThumbnailError> {
    let mut out = RgbImage::from_gray(base);
    let mut order: Vec<&OverlayLayer> = layers.iter().collect();
    order.sort_by_key(|l| l.number);
    let a = cfg.overlay_alpha;
    for layer in order {
        if layer.mask.rows != base.rows || layer.mask.columns != base.columns {
            return Err(ThumbnailError::DimensionMismatch {
                rows: base.rows,
                columns: base.columns,
                mask_rows: layer.mask.rows,
                mask_columns: layer.mask.columns,
            });
        }
        let k = layer.number.max(1) as usize;
        let color = layer.color.unwrap_or(cfg.palette[(k - 1) % cfg.palette.len()]);
        for (i, &on) in layer.mask.bits.iter().enumerate() {
            if on {
                let g = base.pixels[i] as f64;
                let px = [0, 1, 2].map(|c| ((1.0 - a) * g + a * color[c] as f64).round() as u8);
                out.put(i / base.columns, i % base.columns, px);
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour scale to fit inside `edge`x`edge`, centred on the background.
pub fn fit_letterbox(img: &RgbImage, edge: usize, background: [u8; 3]) -> RgbImage {
    let mut out = RgbImage::filled(edge, edge, background);
    if img.rows == 0 || img.columns == 0 {
        return out;
    }
    let longest = img.rows.max(img.columns);
    let w = ((img.columns * edge + longest / 2) / longest).clamp(1, edge);
    let h = ((img.rows * edge + longest / 2) / longest).clamp(1, edge);
    let (ox, oy) = ((edge - w) / 2, (edge - h) / 2);
    for y in 0..h {
        let sy = ((2 * y + 1) * img.rows / (2 * h)).min(img.rows - 1);
        for x in 0..w {
            let sx = ((2 * x + 1) * img.columns / (2 * w)).min(img.columns - 1);
            out.put(oy + y, ox + x, img.pixel(sy, sx));
        }
    }
    out
}

/// 8-bit RGB PNG, non-interlaced, fixed filter and compression.
pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, img.columns as u32, img.rows as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Default);
        enc.set_filter(png::FilterType::Sub);
        enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
        let mut w = enc.write_header().expect("writing to a Vec cannot fail");
        w.write_image_data(&img.data).expect("image data matches header");
    }
    buf
}

/// A card with a short label, for series without renderable pixels.
pub fn placeholder(label: &str, cfg: &ThumbnailConfig) -> RgbImage {
    let edge = cfg.edge as usize;
    let mut img = RgbImage::filled(edge, edge, cfg.background);
    let border = if cfg.background.iter().map(|&c| c as u32).sum::<u32>() > 384 {
        [96, 96, 96]
    } else {
        [64, 64, 64]
    };
    for i in 0..edge {
        img.put(0, i, border);
        img.put(edge - 1, i, border);
        img.put(i, 0, border);
        img.put(i, edge - 1, border);
    }
    let label = if label.is_empty() { "?" } else { label };
    let label: String = label.chars().take(12).collect();
    let width = font::text_width(&label);
    let scale = ((edge * 3 / 4) / width.max(1)).min(edge / (2 * font::GLYPH_HEIGHT)).max(1);
    let (tw, th) = (width * scale, font::GLYPH_HEIGHT * scale);
    let ox = edge.saturating_sub(tw) / 2;
    let oy = edge.saturating_sub(th) / 2;
    let ink = if border == [96, 96, 96] { [32, 32, 32] } else { [208, 208, 208] };
    font::draw_text(&label, scale, |x, y| {
        if ox + x < edge && oy + y < edge {
            img.put(oy + y, ox + x, ink);
        }
    });
    img
}

/// Image instances in display order: InstanceNumber (missing last), then SOP Instance UID.
pub fn display_order(instances: &[DicomObject]) -> Vec<&DicomObject> {
    let mut v: Vec<&DicomObject> = instances.iter().filter(|o| o.pixel_data.is_some()).collect();
    v.sort_by(|a, b| {
        let ka = a.instance_number().unwrap_or(i64::MAX);
        let kb = b.instance_number().unwrap_or(i64::MAX);
        ka.cmp(&kb).then_with(|| a.sop_instance_uid().cmp(&b.sop_instance_uid()))
    });
    v
}

/// The lower-median instance and its middle frame.
pub fn select_slice(instances: &[DicomObject]) -> Result<(&DicomObject, usize), ThumbnailError> {
    let ordered = display_order(instances);
    if ordered.is_empty() {
        return Err(ThumbnailError::NoRenderableInstance);
    }
    let inst = ordered[(ordered.len() - 1) / 2];
    Ok((inst, (inst.number_of_frames() - 1) / 2))
}

/// Every (instance, frame) pair in display order, for the slice scroller.
pub fn slice_list(instances: &[DicomObject]) -> Vec<(&DicomObject, usize)> {
    display_order(instances)
        .into_iter()
        .flat_map(|o| (0..o.number_of_frames()).map(move |f| (o, f)))
        .collect()
}

enum Overlay {
    Seg(crate::dicom::SegmentationMasks),
    Contours(crate::dicom::ContourSet),
}

fn overlays(related: &[DicomObject]) -> Vec<Overlay> {
    related
        .iter()
        .filter_map(|o| match o.modality() {
            Some("SEG") => parse_seg(o).ok().map(Overlay::Seg),
            Some("RTSTRUCT") => parse_rtstruct(o).ok().map(Overlay::Contours),
            _ => None,
        })
        .collect()
}

fn layers_for(inst: &DicomObject, overlays: &[Overlay]) -> Vec<OverlayLayer> {
    let sop = inst.sop_instance_uid().unwrap_or_default();
    let mut out = Vec::new();
    for ov in overlays {
        match ov {
            Overlay::Seg(seg) => {
                for s in &seg.segments {
                    let mut mask = Mask::empty(seg.rows, seg.columns);
                    let mut any = false;
                    for f in s.frames.iter().filter(|f| f.referenced_sop_uid == sop) {
                        for (m, b) in mask.bits.iter_mut().zip(&f.mask.bits) {
                            *m |= *b;
                        }
                        any = true;
                    }
                    if any {
                        out.push(OverlayLayer {
                            number: s.number,
                            color: None,
                            mask,
                        });
                    }
                }
            }
            Overlay::Contours(cs) => {
                if let Some(geom) = SliceGeometry::from_object(inst) {
                    out.extend(rasterize_contours(cs, &geom).unwrap_or_default());
                }
            }
        }
    }
    out
}

fn layer_area(layers: &[OverlayLayer]) -> usize {
    layers.iter().map(|l| l.mask.area()).sum()
}

fn render(inst: &DicomObject, frame: usize, layers: &[OverlayLayer], cfg: &ThumbnailConfig) -> RgbImage {
    let modality = inst.modality().unwrap_or("");
    let pixels = match decode_pixels(inst, frame) {
        Ok(p) => p,
        Err(e) => {
            tracing::debug!(error = %e, "thumbnail decode failed");
            return placeholder(&format!("ERR {modality}"), cfg);
        }
    };
    let w = cfg.window.unwrap_or_else(|| default_window(inst, &pixels));
    let mono1 = inst.pixel_descriptor().is_some_and(|d| d.photometric == Photometric::Monochrome1);
    let gray = window_to_gray(&pixels, w, mono1);
    let rgb = render_overlay(&gray, layers, cfg).unwrap_or_else(|e| {
        tracing::debug!(error = %e, "overlay skipped");
        RgbImage::from_gray(&gray)
    });
    fit_letterbox(&rgb, cfg.edge as usize, cfg.background)
}

/// PNG thumbnail for a series. Never fails: unrenderable input yields a placeholder card.
///
/// `related` may hold SEG or RTSTRUCT objects referencing the series; the slice
/// with the most overlay area is then shown instead of the median one.
pub fn make_thumbnail(instances: &[DicomObject], related: &[DicomObject], cfg: &ThumbnailConfig) -> Vec<u8> {
    encode_png(&thumbnail_image(instances, related, cfg))
}

pub fn thumbnail_image(instances: &[DicomObject], related: &[DicomObject], cfg: &ThumbnailConfig) -> RgbImage {
    let modality = instances.iter().find_map(|o| o.modality()).unwrap_or("");
    let Ok((median, frame)) = select_slice(instances) else {
        return placeholder(modality, cfg);
    };
    let overlays = overlays(related);
    if overlays.is_empty() {
        return render(median, frame, &[], cfg);
    }
    let mut best: Option<(&DicomObject, Vec<OverlayLayer>)> = None;
    for inst in display_order(instances) {
        let layers = layers_for(inst, &overlays);
        let area = layer_area(&layers);
        if area > 0 && best.as_ref().is_none_or(|(_, b)| area > layer_area(b)) {
            best = Some((inst, layers));
        }
    }
    match best {
        Some((inst, layers)) => render(inst, (inst.number_of_frames() - 1) / 2, &layers, cfg),
        None => render(median, frame, &[], cfg),
    }
}

/// One slice of the scroller, overlays included; `None` past the last slice.
pub fn render_slice(instances: &[DicomObject], related: &[DicomObject], index: usize, cfg: &ThumbnailConfig) -> Option<Vec<u8>> {
    let slices = slice_list(instances);
    let &(inst, frame) = slices.get(index)?;
    let layers = layers_for(inst, &overlays(related));
    Some(encode_png(&render(inst, frame, &layers, cfg)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{tags, DataElement, PixelData, TransferSyntax, Vr};

    fn image(instance: Option<i64>, sop: &str, frames: usize) -> DicomObject {
        let mut o = DicomObject::new(TransferSyntax::ExplicitVrLittleEndian);
        o.put(DataElement::string(tags::SOP_INSTANCE_UID, Vr::UI, sop));
        o.put(DataElement::string(tags::MODALITY, Vr::CS, "CT"));
        if let Some(n) = instance {
            o.put(DataElement::string(tags::INSTANCE_NUMBER, Vr::IS, &n.to_string()));
        }
        o.put(DataElement::ints(tags::ROWS, Vr::US, &[2]));
        o.put(DataElement::ints(tags::COLUMNS, Vr::US, &[2]));
        o.put(DataElement::ints(tags::BITS_ALLOCATED, Vr::US, &[8]));
        if frames > 1 {
            o.put(DataElement::string(tags::NUMBER_OF_FRAMES, Vr::IS, &frames.to_string()));
        }
        o.pixel_data = Some(PixelData {
            vr: Vr::OB,
            bytes: vec![0; 4 * frames],
        });
        o
    }

    #[test]
    fn median_selection() {
        let five: Vec<DicomObject> = [3, 1, 5, 2, 4].iter().map(|&n| image(Some(n), &format!("s{n}"), 1)).collect();
        assert_eq!(select_slice(&five).unwrap().0.instance_number(), Some(3));
        let four: Vec<DicomObject> = [4, 2, 1, 3].iter().map(|&n| image(Some(n), &format!("s{n}"), 1)).collect();
        assert_eq!(select_slice(&four).unwrap().0.instance_number(), Some(2));
        let multi = vec![image(None, "m", 7)];
        assert_eq!(select_slice(&multi).unwrap().1, 3);
        let missing = vec![image(None, "b", 1), image(None, "a", 1), image(Some(1), "z", 1)];
        let order: Vec<_> = display_order(&missing).iter().map(|o| o.sop_instance_uid().unwrap()).collect();
        assert_eq!(order, vec!["z", "a", "b"]);
        assert_eq!(select_slice(&[]), Err(ThumbnailError::NoRenderableInstance));
    }

    #[test]
    fn blend_formula() {
        let base = GrayImage {
            rows: 1,
            columns: 2,
            pixels: vec![100, 100],
        };
        let mut mask = Mask::empty(1, 2);
        mask.set(0, 0, true);
        let cfg = ThumbnailConfig {
            palette: vec![[255, 0, 0]],
            ..Default::default()
        };
        let out = render_overlay(&base, &[OverlayLayer { number: 1, color: None, mask }], &cfg).unwrap();
        assert_eq!(out.pixel(0, 0), [178, 50, 50]);
        assert_eq!(out.pixel(0, 1), [100, 100, 100]);
    }

    #[test]
    fn later_segments_draw_on_top_and_alpha_extremes() {
        let base = GrayImage {
            rows: 1,
            columns: 1,
            pixels: vec![10],
        };
        let mut m = Mask::empty(1, 1);
        m.set(0, 0, true);
        let layers = vec![
            OverlayLayer { number: 2, color: None, mask: m.clone() },
            OverlayLayer { number: 1, color: None, mask: m.clone() },
        ];
        let opaque = ThumbnailConfig {
            overlay_alpha: 1.0,
            ..Default::default()
        };
        assert_eq!(render_overlay(&base, &layers, &opaque).unwrap().pixel(0, 0), DEFAULT_PALETTE[1]);
        let clear = ThumbnailConfig {
            overlay_alpha: 0.0,
            ..Default::default()
        };
        assert_eq!(
            render_overlay(&base, &layers, &clear).unwrap(),
            RgbImage::from_gray(&base)
        );
        let wrong = OverlayLayer {
            number: 1,
            color: None,
            mask: Mask::empty(2, 2),
        };
        assert!(matches!(
            render_overlay(&base, &[wrong], &clear),
            Err(ThumbnailError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn letterbox_keeps_aspect() {
        let img = RgbImage::filled(2, 4, [255, 255, 255]);
        let out = fit_letterbox(&img, 32, [0, 0, 0]);
        assert_eq!((out.rows, out.columns), (32, 32));
        assert_eq!(out.pixel(0, 0), [0, 0, 0]);
        assert_eq!(out.pixel(16, 16), [255, 255, 255]);
        assert_eq!(out.pixel(7, 16), [0, 0, 0]);
        assert_eq!(out.pixel(8, 16), [255, 255, 255]);
    }

    #[test]
    fn png_round_trip_and_placeholder() {
        let cfg = ThumbnailConfig::default();
        let png = make_thumbnail(&[], &[], &cfg);
        let decoder = png::Decoder::new(png.as_slice());
        let reader = decoder.read_info().unwrap();
        assert_eq!((reader.info().width, reader.info().height), (128, 128));
        assert_eq!(reader.info().color_type, png::ColorType::Rgb);
        assert_eq!(make_thumbnail(&[], &[], &cfg), png);
        let card = placeholder("SR", &cfg);
        assert!(card.data.chunks(3).any(|p| p == [208, 208, 208]));
    }

    #[test]
    fn config_validation_and_cache_path() {
        assert!(ThumbnailConfig::with_edge(16).validate().is_err());
        assert!(ThumbnailConfig::with_edge(128).validate().is_ok());
        let a = ThumbnailConfig::default();
        let b = ThumbnailConfig::with_edge(64);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ThumbnailConfig::default().hash());
        let p = cache_path(Path::new("/c"), "1.2.3", &a);
        assert_eq!(p, PathBuf::from(format!("/c/1./1.2.3_{}.png", a.hash())));
    }
}
