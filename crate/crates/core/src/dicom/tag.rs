use std::fmt;
use std::str::FromStr;

/// A DICOM attribute tag, ordered by (group, element).
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag {
    pub group: u16,
    pub element: u16,
}

impl Tag {
    pub const fn new(group: u16, element: u16) -> Self {
        Tag { group, element }
    }

    pub const fn from_u32(value: u32) -> Self {
        Tag::new((value >> 16) as u16, value as u16)
    }

    pub const fn to_u32(self) -> u32 {
        ((self.group as u32) << 16) | self.element as u32
    }

    /// Odd groups carry vendor-private attributes.
    pub const fn is_private(self) -> bool {
        self.group % 2 == 1
    }

    pub const fn is_meta(self) -> bool {
        self.group == 0x0002
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.group, self.element)
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid tag literal `{0}`")]
pub struct TagParseError(pub String);

impl FromStr for Tag {
    type Err = TagParseError;

    /// Accepts `(GGGG,EEEE)`, `GGGG,EEEE` and `GGGGEEEE`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TagParseError(s.to_string());
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let (g, e) = match trimmed.split_once(',') {
            Some(parts) => parts,
            None if trimmed.len() == 8 => trimmed.split_at(4),
            None => return Err(err()),
        };
        if g.len() != 4 || e.len() != 4 {
            return Err(err());
        }
        let group = u16::from_str_radix(g, 16).map_err(|_| err())?;
        let element = u16::from_str_radix(e, 16).map_err(|_| err())?;
        Ok(Tag::new(group, element))
    }
}

/// Tags referenced by name throughout the crate.
pub mod tags {
    use super::Tag;

    pub const FILE_META_GROUP_LENGTH: Tag = Tag::new(0x0002, 0x0000);
    pub const FILE_META_VERSION: Tag = Tag::new(0x0002, 0x0001);
    pub const MEDIA_STORAGE_SOP_CLASS_UID: Tag = Tag::new(0x0002, 0x0002);
    pub const MEDIA_STORAGE_SOP_INSTANCE_UID: Tag = Tag::new(0x0002, 0x0003);
    pub const TRANSFER_SYNTAX_UID: Tag = Tag::new(0x0002, 0x0010);
    pub const IMPLEMENTATION_CLASS_UID: Tag = Tag::new(0x0002, 0x0012);

    pub const SPECIFIC_CHARACTER_SET: Tag = Tag::new(0x0008, 0x0005);
    pub const IMAGE_TYPE: Tag = Tag::new(0x0008, 0x0008);
    pub const SOP_CLASS_UID: Tag = Tag::new(0x0008, 0x0016);
    pub const SOP_INSTANCE_UID: Tag = Tag::new(0x0008, 0x0018);
    pub const STUDY_DATE: Tag = Tag::new(0x0008, 0x0020);
    pub const SERIES_DATE: Tag = Tag::new(0x0008, 0x0021);
    pub const MODALITY: Tag = Tag::new(0x0008, 0x0060);
    pub const MANUFACTURER: Tag = Tag::new(0x0008, 0x0070);
    pub const STUDY_DESCRIPTION: Tag = Tag::new(0x0008, 0x1030);
    pub const SERIES_DESCRIPTION: Tag = Tag::new(0x0008, 0x103E);
    pub const REFERENCED_SERIES_SEQUENCE: Tag = Tag::new(0x0008, 0x1115);
    pub const REFERENCED_INSTANCE_SEQUENCE: Tag = Tag::new(0x0008, 0x114A);
    pub const REFERENCED_SOP_CLASS_UID: Tag = Tag::new(0x0008, 0x1150);
    pub const REFERENCED_SOP_INSTANCE_UID: Tag = Tag::new(0x0008, 0x1155);
    pub const DERIVATION_IMAGE_SEQUENCE: Tag = Tag::new(0x0008, 0x9124);
    pub const SOURCE_IMAGE_SEQUENCE: Tag = Tag::new(0x0008, 0x2112);

    pub const PATIENT_NAME: Tag = Tag::new(0x0010, 0x0010);
    pub const PATIENT_ID: Tag = Tag::new(0x0010, 0x0020);

    pub const BODY_PART_EXAMINED: Tag = Tag::new(0x0018, 0x0015);
    pub const SLICE_THICKNESS: Tag = Tag::new(0x0018, 0x0050);
    pub const CONVOLUTION_KERNEL: Tag = Tag::new(0x0018, 0x1210);

    pub const STUDY_INSTANCE_UID: Tag = Tag::new(0x0020, 0x000D);
    pub const SERIES_INSTANCE_UID: Tag = Tag::new(0x0020, 0x000E);
    pub const SERIES_NUMBER: Tag = Tag::new(0x0020, 0x0011);
    pub const INSTANCE_NUMBER: Tag = Tag::new(0x0020, 0x0013);
    pub const IMAGE_POSITION_PATIENT: Tag = Tag::new(0x0020, 0x0032);
    pub const IMAGE_ORIENTATION_PATIENT: Tag = Tag::new(0x0020, 0x0037);
    pub const FRAME_OF_REFERENCE_UID: Tag = Tag::new(0x0020, 0x0052);
    pub const PLANE_POSITION_SEQUENCE: Tag = Tag::new(0x0020, 0x9113);

    pub const SAMPLES_PER_PIXEL: Tag = Tag::new(0x0028, 0x0002);
    pub const PHOTOMETRIC_INTERPRETATION: Tag = Tag::new(0x0028, 0x0004);
    pub const NUMBER_OF_FRAMES: Tag = Tag::new(0x0028, 0x0008);
    pub const ROWS: Tag = Tag::new(0x0028, 0x0010);
    pub const COLUMNS: Tag = Tag::new(0x0028, 0x0011);
    pub const PIXEL_SPACING: Tag = Tag::new(0x0028, 0x0030);
    pub const BITS_ALLOCATED: Tag = Tag::new(0x0028, 0x0100);
    pub const BITS_STORED: Tag = Tag::new(0x0028, 0x0101);
    pub const HIGH_BIT: Tag = Tag::new(0x0028, 0x0102);
    pub const PIXEL_REPRESENTATION: Tag = Tag::new(0x0028, 0x0103);
    pub const WINDOW_CENTER: Tag = Tag::new(0x0028, 0x1050);
    pub const WINDOW_WIDTH: Tag = Tag::new(0x0028, 0x1051);
    pub const RESCALE_INTERCEPT: Tag = Tag::new(0x0028, 0x1052);
    pub const RESCALE_SLOPE: Tag = Tag::new(0x0028, 0x1053);

    pub const SEGMENTATION_TYPE: Tag = Tag::new(0x0062, 0x0001);
    pub const SEGMENT_SEQUENCE: Tag = Tag::new(0x0062, 0x0002);
    pub const SEGMENT_NUMBER: Tag = Tag::new(0x0062, 0x0004);
    pub const SEGMENT_LABEL: Tag = Tag::new(0x0062, 0x0005);
    pub const SEGMENT_IDENTIFICATION_SEQUENCE: Tag = Tag::new(0x0062, 0x000A);
    pub const REFERENCED_SEGMENT_NUMBER: Tag = Tag::new(0x0062, 0x000B);
    pub const SHARED_FUNCTIONAL_GROUPS_SEQUENCE: Tag = Tag::new(0x5200, 0x9229);
    pub const PER_FRAME_FUNCTIONAL_GROUPS_SEQUENCE: Tag = Tag::new(0x5200, 0x9230);

    pub const REFERENCED_FRAME_OF_REFERENCE_SEQUENCE: Tag = Tag::new(0x3006, 0x0010);
    pub const RT_REFERENCED_STUDY_SEQUENCE: Tag = Tag::new(0x3006, 0x0012);
    pub const RT_REFERENCED_SERIES_SEQUENCE: Tag = Tag::new(0x3006, 0x0014);
    pub const CONTOUR_IMAGE_SEQUENCE: Tag = Tag::new(0x3006, 0x0016);
    pub const STRUCTURE_SET_ROI_SEQUENCE: Tag = Tag::new(0x3006, 0x0020);
    pub const ROI_NUMBER: Tag = Tag::new(0x3006, 0x0022);
    pub const ROI_NAME: Tag = Tag::new(0x3006, 0x0026);
    pub const ROI_DISPLAY_COLOR: Tag = Tag::new(0x3006, 0x002A);
    pub const ROI_CONTOUR_SEQUENCE: Tag = Tag::new(0x3006, 0x0039);
    pub const CONTOUR_SEQUENCE: Tag = Tag::new(0x3006, 0x0040);
    pub const CONTOUR_GEOMETRIC_TYPE: Tag = Tag::new(0x3006, 0x0042);
    pub const NUMBER_OF_CONTOUR_POINTS: Tag = Tag::new(0x3006, 0x0046);
    pub const CONTOUR_DATA: Tag = Tag::new(0x3006, 0x0050);
    pub const REFERENCED_ROI_NUMBER: Tag = Tag::new(0x3006, 0x0084);

    pub const PIXEL_DATA: Tag = Tag::new(0x7FE0, 0x0010);

    pub const ITEM: Tag = Tag::new(0xFFFE, 0xE000);
    pub const ITEM_DELIMITATION: Tag = Tag::new(0xFFFE, 0xE00D);
    pub const SEQUENCE_DELIMITATION: Tag = Tag::new(0xFFFE, 0xE0DD);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_form() {
        assert_eq!(Tag::new(0x0008, 0x0060).to_string(), "(0008,0060)");
        assert_eq!(Tag::new(0x7fe0, 0x10).to_string(), "(7FE0,0010)");
    }

    #[test]
    fn parses_common_spellings() {
        let t = Tag::new(0x0020, 0x000D);
        assert_eq!("(0020,000D)".parse::<Tag>().unwrap(), t);
        assert_eq!("0020,000d".parse::<Tag>().unwrap(), t);
        assert_eq!("0020000D".parse::<Tag>().unwrap(), t);
        assert!("(20,D)".parse::<Tag>().is_err());
    }

    #[test]
    fn ordering_is_group_then_element() {
        let mut v = vec![
            Tag::new(0x0010, 0x0010),
            Tag::new(0x0008, 0x0060),
            Tag::new(0x0008, 0x0005),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                Tag::new(0x0008, 0x0005),
                Tag::new(0x0008, 0x0060),
                Tag::new(0x0010, 0x0010)
            ]
        );
        assert_eq!(Tag::from_u32(0x7FE0_0010), tags::PIXEL_DATA);
        assert!(Tag::new(0x0009, 0x0010).is_private());
    }
}
