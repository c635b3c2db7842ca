//! DICOM Part-10 reading, writing and the derived-object formats.

pub mod dictionary;
pub mod element;
pub mod nifti;
pub mod object;
pub mod pixels;
pub mod read;
pub mod rtstruct;
pub mod seg;
pub mod tag;
pub mod uid;
pub mod vr;
pub mod write;

pub use dictionary::{lookup_tag, TagInfo};
pub use element::{DataElement, Elements, Item, Value};
pub use nifti::{nifti_to_dicom, NiftiError};
pub use object::{DicomObject, PixelData, PixelDescriptor, Photometric, TransferSyntax};
pub use pixels::{decode_pixels, PixelError, PixelFrame};
pub use read::{parse_file, ParseError};
pub use rtstruct::{build_rtstruct, parse_rtstruct, Contour, ContourSet, Roi, RtStructError};
pub use seg::{build_seg, pack_bits, parse_seg, unpack_bits, Mask, Segment, SegmentFrame, SegmentationMasks, SegError};
pub use tag::{tags, Tag};
pub use uid::{derived_uid, random_uid};
pub use vr::Vr;
pub use write::{write_file, write_file_with, WriteError, WriteOptions};
