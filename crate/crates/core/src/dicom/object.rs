use super::element::{DataElement, Elements};
use super::tag::tags;
use super::Vr;

pub const EXPLICIT_VR_LE_UID: &str = "1.2.840.10008.1.2.1";
pub const IMPLICIT_VR_LE_UID: &str = "1.2.840.10008.1.2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransferSyntax {
    ExplicitVrLittleEndian,
    ImplicitVrLittleEndian,
}

impl TransferSyntax {
    pub fn from_uid(uid: &str) -> Option<Self> {
        match uid.trim_end_matches(['\0', ' ']) {
            EXPLICIT_VR_LE_UID => Some(TransferSyntax::ExplicitVrLittleEndian),
            IMPLICIT_VR_LE_UID => Some(TransferSyntax::ImplicitVrLittleEndian),
            _ => None,
        }
    }

    pub fn uid(self) -> &'static str {
        match self {
            TransferSyntax::ExplicitVrLittleEndian => EXPLICIT_VR_LE_UID,
            TransferSyntax::ImplicitVrLittleEndian => IMPLICIT_VR_LE_UID,
        }
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, TransferSyntax::ExplicitVrLittleEndian)
    }
}

/// Raw (undecoded) content of the Pixel Data element.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelData {
    pub vr: Vr,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photometric {
    Monochrome1,
    Monochrome2,
    Rgb,
    PaletteColor,
    Other,
}

impl Photometric {
    pub fn from_code(code: &str) -> Self {
        match code {
            "MONOCHROME1" => Photometric::Monochrome1,
            "MONOCHROME2" => Photometric::Monochrome2,
            "RGB" => Photometric::Rgb,
            "PALETTE COLOR" => Photometric::PaletteColor,
            _ => Photometric::Other,
        }
    }
}

/// Geometry and encoding of the pixel payload, read from the image pixel module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelDescriptor {
    pub rows: usize,
    pub columns: usize,
    pub bits_allocated: u16,
    pub samples_per_pixel: u16,
    pub frames: usize,
    pub photometric: Photometric,
    pub signed: bool,
}

impl PixelDescriptor {
    pub fn frame_bits(&self) -> usize {
        self.rows * self.columns * self.bits_allocated as usize * self.samples_per_pixel as usize
    }

    /// Bytes needed for all frames: `ceil(rows*columns*bits*samples*frames / 8)`.
    pub fn expected_len(&self) -> usize {
        (self.frame_bits() * self.frames).div_ceil(8)
    }
}

/// A parsed DICOM Part-10 file.
#[derive(Debug, Clone, PartialEq)]
pub struct DicomObject {
    /// File meta information (group 0002).
    pub meta: Vec<DataElement>,
    /// Dataset elements, strictly ascending by tag. Pixel Data is held separately.
    pub elements: Vec<DataElement>,
    pub transfer_syntax: TransferSyntax,
    pub pixel_data: Option<PixelData>,
    /// Set when the declared character set could not be transcoded faithfully.
    pub charset_unverified: bool,
    /// Non-fatal issues found while parsing.
    pub warnings: Vec<String>,
}

impl Elements for DicomObject {
    fn elements(&self) -> &[DataElement] {
        &self.elements
    }
}

impl DicomObject {
    pub fn new(transfer_syntax: TransferSyntax) -> Self {
        DicomObject {
            meta: Vec::new(),
            elements: Vec::new(),
            transfer_syntax,
            pixel_data: None,
            charset_unverified: false,
            warnings: Vec::new(),
        }
    }

    /// Inserts or replaces an element, keeping the list sorted.
    pub fn put(&mut self, element: DataElement) {
        let list = if element.tag.is_meta() {
            &mut self.meta
        } else {
            &mut self.elements
        };
        match list.binary_search_by_key(&element.tag, |e| e.tag) {
            Ok(i) => list[i] = element,
            Err(i) => list.insert(i, element),
        }
    }

    pub fn modality(&self) -> Option<&str> {
        self.string(tags::MODALITY)
    }

    pub fn series_uid(&self) -> Option<&str> {
        self.string(tags::SERIES_INSTANCE_UID)
    }

    pub fn sop_instance_uid(&self) -> Option<&str> {
        self.string(tags::SOP_INSTANCE_UID)
            .or_else(|| self.meta.string(tags::MEDIA_STORAGE_SOP_INSTANCE_UID))
    }

    pub fn instance_number(&self) -> Option<i64> {
        self.int(tags::INSTANCE_NUMBER)
    }

    pub fn number_of_frames(&self) -> usize {
        self.int(tags::NUMBER_OF_FRAMES)
            .filter(|&n| n > 0)
            .map(|n| n as usize)
            .unwrap_or(1)
    }

    /// Pixel descriptor, if the image pixel module is present.
    pub fn pixel_descriptor(&self) -> Option<PixelDescriptor> {
        let rows = self.int(tags::ROWS)?;
        let columns = self.int(tags::COLUMNS)?;
        Some(PixelDescriptor {
            rows: rows.max(0) as usize,
            columns: columns.max(0) as usize,
            bits_allocated: self.int(tags::BITS_ALLOCATED).unwrap_or(16) as u16,
            samples_per_pixel: self.int(tags::SAMPLES_PER_PIXEL).unwrap_or(1) as u16,
            frames: self.number_of_frames(),
            photometric: Photometric::from_code(
                self.string(tags::PHOTOMETRIC_INTERPRETATION)
                    .unwrap_or("MONOCHROME2"),
            ),
            signed: self.int(tags::PIXEL_REPRESENTATION) == Some(1),
        })
    }
}
