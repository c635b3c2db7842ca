//! Part-10 reader for the two uncompressed little-endian transfer syntaxes.

use super::dictionary::dictionary_vr;
use super::element::{DataElement, Elements, Item, Value};
use super::object::{DicomObject, PixelData, TransferSyntax};
use super::tag::tags;
use super::vr::ValueKind;
use super::{Tag, Vr};

const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;
const PREAMBLE_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("input is empty")]
    EmptyInput,
    #[error("no DICM preamble and no recognizable group 0002/0008 element at offset 0")]
    MalformedPreamble,
    #[error("element {tag} at offset {offset} declares {declared} bytes but only {available} remain")]
    TruncatedElement {
        offset: usize,
        tag: Tag,
        declared: u64,
        available: usize,
    },
    #[error("unsupported transfer syntax {uid}")]
    UnsupportedTransferSyntax {
        uid: String,
        /// Whatever metadata could be read ahead of the pixel data.
        partial: Box<DicomObject>,
    },
    #[error("malformed data at offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
}

impl ParseError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::EmptyInput => "empty_input",
            ParseError::MalformedPreamble => "malformed_preamble",
            ParseError::TruncatedElement { .. } => "truncated_element",
            ParseError::UnsupportedTransferSyntax { .. } => "unsupported_transfer_syntax",
            ParseError::Malformed { .. } => "malformed",
        }
    }
}

type Result<T> = std::result::Result<T, ParseError>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Charset {
    Utf8,
    Latin1,
    Unverified,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    explicit: bool,
    charset: Charset,
    charset_unverified: bool,
    /// Stop at Pixel Data instead of capturing it (metadata-only mode).
    stop_at_pixels: bool,
    pixel_data: Option<PixelData>,
    warnings: Vec<String>,
    depth: usize,
}

/// Parses a DICOM Part-10 file.
///
/// Pixel Data is captured raw. Files without the 128-byte preamble are accepted
/// only when they start directly with a group 0002 or 0008 element.
pub fn parse_file(bytes: &[u8]) -> Result<DicomObject> {
    if bytes.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let has_magic = bytes.len() >= PREAMBLE_LEN + 4 && &bytes[PREAMBLE_LEN..PREAMBLE_LEN + 4] == b"DICM";
    let start = if has_magic {
        PREAMBLE_LEN + 4
    } else {
        if !plausible_headerless_start(bytes) {
            return Err(ParseError::MalformedPreamble);
        }
        0
    };

    let mut reader = Reader {
        buf: bytes,
        pos: start,
        explicit: true,
        charset: Charset::Utf8,
        charset_unverified: false,
        stop_at_pixels: false,
        pixel_data: None,
        warnings: Vec::new(),
        depth: 0,
    };

    let mut warnings = Vec::new();
    if !has_magic {
        warnings.push("missing preamble; parsed headerless".to_string());
    }

    // File meta is explicit VR LE by definition, but headerless files may be implicit.
    reader.explicit = has_magic || looks_explicit(bytes, start);
    let meta = reader.read_meta().map_err(|e| match e {
        ParseError::TruncatedElement { .. } | ParseError::Malformed { .. } if !has_magic => {
            ParseError::MalformedPreamble
        }
        other => other,
    })?;

    let declared = meta.string(tags::TRANSFER_SYNTAX_UID).map(str::to_string);
    let syntax = match declared.as_deref() {
        Some(uid) => match TransferSyntax::from_uid(uid) {
            Some(ts) => ts,
            None => {
                return Err(unsupported(reader, meta, uid.to_string(), warnings));
            }
        },
        None => {
            warnings.push("no transfer syntax in file meta; detected from data".to_string());
            if looks_explicit(bytes, reader.pos) {
                TransferSyntax::ExplicitVrLittleEndian
            } else {
                TransferSyntax::ImplicitVrLittleEndian
            }
        }
    };
    reader.explicit = syntax.is_explicit();

    let end = bytes.len();
    let elements = match reader.read_elements(Some(end)) {
        Ok(els) => els,
        Err(e) if !has_magic && meta.is_empty() && reader_never_progressed(&e, start) => {
            return Err(ParseError::MalformedPreamble)
        }
        Err(e) => return Err(e),
    };
    warnings.append(&mut reader.warnings);

    Ok(DicomObject {
        meta,
        elements,
        transfer_syntax: syntax,
        pixel_data: reader.pixel_data,
        charset_unverified: reader.charset_unverified,
        warnings,
    })
}

fn reader_never_progressed(e: &ParseError, start: usize) -> bool {
    match e {
        ParseError::TruncatedElement { offset, .. } | ParseError::Malformed { offset, .. } => {
            *offset == start
        }
        _ => false,
    }
}

/// Metadata-only parse for syntaxes whose dataset we can't decode fully.
fn unsupported(mut reader: Reader<'_>, meta: Vec<DataElement>, uid: String, mut warnings: Vec<String>) -> ParseError {
    reader.explicit = true;
    reader.stop_at_pixels = true;
    let end = reader.buf.len();
    let elements = match reader.read_elements_partial(end) {
        Ok(els) => els,
        Err(els) => {
            warnings.push("dataset parse stopped early".to_string());
            els
        }
    };
    warnings.append(&mut reader.warnings);
    ParseError::UnsupportedTransferSyntax {
        uid,
        partial: Box::new(DicomObject {
            meta,
            elements,
            transfer_syntax: TransferSyntax::ExplicitVrLittleEndian,
            pixel_data: None,
            charset_unverified: reader.charset_unverified,
            warnings,
        }),
    }
}

fn plausible_headerless_start(bytes: &[u8]) -> bool {
    if bytes.len() < 8 {
        return false;
    }
    let group = u16::from_le_bytes([bytes[0], bytes[1]]);
    matches!(group, 0x0002 | 0x0008)
}

fn looks_explicit(bytes: &[u8], pos: usize) -> bool {
    bytes
        .get(pos + 4..pos + 6)
        .map(|vr| Vr([vr[0], vr[1]]).is_known())
        .unwrap_or(false)
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len().saturating_sub(self.pos)
    }

    fn u16_at(&self, at: usize) -> u16 {
        u16::from_le_bytes([self.buf[at], self.buf[at + 1]])
    }

    fn u32_at(&self, at: usize) -> u32 {
        u32::from_le_bytes(self.buf[at..at + 4].try_into().unwrap())
    }

    fn peek_tag(&self) -> Option<Tag> {
        (self.remaining() >= 4).then(|| Tag::new(self.u16_at(self.pos), self.u16_at(self.pos + 2)))
    }

    fn truncated(&self, offset: usize, tag: Tag, declared: u64) -> ParseError {
        ParseError::TruncatedElement {
            offset,
            tag,
            declared,
            available: self.buf.len().saturating_sub(offset),
        }
    }

    fn malformed(&self, offset: usize, reason: impl Into<String>) -> ParseError {
        ParseError::Malformed {
            offset,
            reason: reason.into(),
        }
    }

    fn read_meta(&mut self) -> Result<Vec<DataElement>> {
        let mut meta = Vec::new();
        while let Some(tag) = self.peek_tag() {
            if tag.group != 0x0002 {
                break;
            }
            if let Some(el) = self.read_element(self.buf.len())? {
                meta.push(el);
            }
        }
        Ok(self.finish_list(meta))
    }

    /// Reads elements until `end`, or until an item delimiter when `end` is `None`.
    fn read_elements(&mut self, end: Option<usize>) -> Result<Vec<DataElement>> {
        let mut out = Vec::new();
        loop {
            let limit = end.unwrap_or(self.buf.len());
            if self.pos >= limit {
                if end.is_none() {
                    return Err(self.malformed(self.pos, "missing item delimiter"));
                }
                break;
            }
            if self.pos + 4 > limit {
                return Err(self.malformed(self.pos, "trailing bytes too short for a tag"));
            }
            let tag = self.peek_tag().unwrap();
            if tag == tags::ITEM_DELIMITATION {
                self.pos += 8.min(self.remaining());
                if end.is_none() {
                    break;
                }
                self.warnings
                    .push(format!("stray item delimiter at offset {}", self.pos - 8));
                continue;
            }
            if self.depth == 0 && tag == tags::PIXEL_DATA && self.stop_at_pixels {
                break;
            }
            if let Some(el) = self.read_element(limit)? {
                out.push(el);
            }
        }
        Ok(self.finish_list(out))
    }

    /// Like `read_elements` but returns what was read so far on failure.
    fn read_elements_partial(&mut self, end: usize) -> std::result::Result<Vec<DataElement>, Vec<DataElement>> {
        let mut out = Vec::new();
        while self.pos < end {
            let Some(tag) = self.peek_tag() else { break };
            if tag == tags::PIXEL_DATA {
                break;
            }
            match self.read_element(end) {
                Ok(Some(el)) => out.push(el),
                Ok(None) => {}
                Err(_) => return Err(self.finish_list(out)),
            }
        }
        Ok(self.finish_list(out))
    }

    fn finish_list(&mut self, mut list: Vec<DataElement>) -> Vec<DataElement> {
        if list.windows(2).all(|w| w[0].tag < w[1].tag) {
            return list;
        }
        list.sort_by_key(|e| e.tag);
        let before = list.len();
        list.dedup_by_key(|e| e.tag);
        if list.len() != before {
            self.warnings
                .push(format!("{} duplicate element(s) dropped", before - list.len()));
        }
        list
    }

    /// Reads one element. Returns `None` when the element was the top-level Pixel Data.
    fn read_element(&mut self, limit: usize) -> Result<Option<DataElement>> {
        let offset = self.pos;
        if self.remaining() < 8 {
            let tag = self.peek_tag().unwrap_or(Tag::new(0, 0));
            return Err(self.truncated(offset, tag, 8));
        }
        let tag = Tag::new(self.u16_at(offset), self.u16_at(offset + 2));
        let (vr, len) = if self.explicit {
            let vr = Vr([self.buf[offset + 4], self.buf[offset + 5]]);
            if vr.has_long_length() {
                if self.remaining() < 12 {
                    return Err(self.truncated(offset, tag, 12));
                }
                self.pos += 12;
                (vr, self.u32_at(offset + 8))
            } else {
                self.pos += 8;
                (vr, self.u16_at(offset + 6) as u32)
            }
        } else {
            self.pos += 8;
            (implicit_vr(tag), self.u32_at(offset + 4))
        };

        if len == UNDEFINED_LENGTH {
            if self.depth == 0 && tag == tags::PIXEL_DATA {
                return Err(self.malformed(offset, "encapsulated pixel data is not supported"));
            }
            if !(vr == Vr::SQ || vr == Vr::UN || !self.explicit) {
                return Err(self.malformed(offset, format!("undefined length on {tag} with VR {vr}")));
            }
            // Undefined-length UN holds an implicit VR little endian sequence.
            let saved = self.explicit;
            if vr == Vr::UN {
                self.explicit = false;
            }
            let items = self.read_sequence(None);
            self.explicit = saved;
            return Ok(Some(DataElement::new(tag, Vr::SQ, Value::Sequence(items?))));
        }

        let len = len as usize;
        if self.pos + len > limit {
            return Err(ParseError::TruncatedElement {
                offset,
                tag,
                declared: len as u64,
                available: limit.saturating_sub(self.pos),
            });
        }
        let value_start = self.pos;

        if self.depth == 0 && tag == tags::PIXEL_DATA {
            self.pixel_data = Some(PixelData {
                vr,
                bytes: self.buf[value_start..value_start + len].to_vec(),
            });
            self.pos += len;
            return Ok(None);
        }

        if vr == Vr::SQ {
            let items = self.read_sequence(Some(value_start + len))?;
            self.pos = value_start + len;
            return Ok(Some(DataElement::new(tag, vr, Value::Sequence(items))));
        }

        let raw = &self.buf[value_start..value_start + len];
        self.pos += len;
        let value = self.decode_value(tag, vr, raw);
        if tag == tags::SPECIFIC_CHARACTER_SET && self.depth == 0 {
            self.set_charset(&value);
        }
        Ok(Some(DataElement::new(tag, vr, value)))
    }

    fn read_sequence(&mut self, end: Option<usize>) -> Result<Vec<Item>> {
        self.depth += 1;
        let result = self.read_items(end);
        self.depth -= 1;
        result
    }

    fn read_items(&mut self, end: Option<usize>) -> Result<Vec<Item>> {
        let mut items = Vec::new();
        loop {
            match end {
                Some(e) if self.pos >= e => break,
                None if self.remaining() == 0 => {
                    return Err(self.malformed(self.pos, "missing sequence delimiter"))
                }
                _ => {}
            }
            let offset = self.pos;
            if self.remaining() < 8 {
                return Err(self.truncated(offset, self.peek_tag().unwrap_or(Tag::new(0, 0)), 8));
            }
            let tag = Tag::new(self.u16_at(offset), self.u16_at(offset + 2));
            let len = self.u32_at(offset + 4);
            self.pos += 8;
            match tag {
                tags::ITEM if len == UNDEFINED_LENGTH => {
                    items.push(Item {
                        elements: self.read_elements(None)?,
                    });
                }
                tags::ITEM => {
                    let item_end = self.pos + len as usize;
                    if item_end > end.unwrap_or(self.buf.len()) {
                        return Err(ParseError::TruncatedElement {
                            offset,
                            tag,
                            declared: len as u64,
                            available: end.unwrap_or(self.buf.len()).saturating_sub(self.pos),
                        });
                    }
                    let elements = self.read_elements(Some(item_end))?;
                    self.pos = item_end;
                    items.push(Item { elements });
                }
                tags::SEQUENCE_DELIMITATION => {
                    if end.is_some() {
                        self.warnings
                            .push(format!("sequence delimiter inside defined-length sequence at {offset}"));
                    }
                    break;
                }
                other => {
                    return Err(self.malformed(offset, format!("expected item tag, found {other}")));
                }
            }
        }
        Ok(items)
    }

    fn set_charset(&mut self, value: &Value) {
        let terms: Vec<&str> = value
            .strings()
            .map(|v| v.iter().map(|s| s.trim()).collect())
            .unwrap_or_default();
        self.charset = match terms.as_slice() {
            [] | [""] | ["ISO_IR 6"] | ["ISO_IR 192"] => Charset::Utf8,
            ["ISO_IR 100"] => Charset::Latin1,
            _ => {
                self.charset_unverified = true;
                Charset::Unverified
            }
        };
    }

    fn decode_text(&mut self, raw: &[u8]) -> String {
        match self.charset {
            Charset::Latin1 => raw.iter().map(|&b| b as char).collect(),
            Charset::Utf8 => match std::str::from_utf8(raw) {
                Ok(s) => s.to_string(),
                Err(_) => {
                    self.charset_unverified = true;
                    String::from_utf8_lossy(raw).into_owned()
                }
            },
            Charset::Unverified => String::from_utf8_lossy(raw).into_owned(),
        }
    }

    fn decode_value(&mut self, tag: Tag, vr: Vr, raw: &[u8]) -> Value {
        match vr.kind() {
            ValueKind::MultiString | ValueKind::SingleString => {
                let text = self.decode_text(raw);
                let trimmed = text.trim_end_matches([' ', '\0']);
                if trimmed.is_empty() {
                    Value::Strings(Vec::new())
                } else if vr.kind() == ValueKind::SingleString {
                    Value::Strings(vec![trimmed.to_string()])
                } else {
                    Value::Strings(trimmed.split('\\').map(str::to_string).collect())
                }
            }
            ValueKind::Int { width, signed } => {
                if raw.len() % width != 0 {
                    self.warnings
                        .push(format!("{tag}: length {} not a multiple of {width}", raw.len()));
                    return Value::Bytes(raw.to_vec());
                }
                Value::Ints(raw.chunks_exact(width).map(|c| read_int(c, signed)).collect())
            }
            ValueKind::Float { width } => {
                if raw.len() % width != 0 {
                    self.warnings
                        .push(format!("{tag}: length {} not a multiple of {width}", raw.len()));
                    return Value::Bytes(raw.to_vec());
                }
                Value::Floats(
                    raw.chunks_exact(width)
                        .map(|c| match width {
                            4 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
                            _ => f64::from_le_bytes(c.try_into().unwrap()),
                        })
                        .collect(),
                )
            }
            ValueKind::AttributeTag => {
                if raw.len() % 4 != 0 {
                    return Value::Bytes(raw.to_vec());
                }
                Value::Ints(
                    raw.chunks_exact(4)
                        .map(|c| {
                            let g = u16::from_le_bytes([c[0], c[1]]) as i64;
                            let e = u16::from_le_bytes([c[2], c[3]]) as i64;
                            (g << 16) | e
                        })
                        .collect(),
                )
            }
            ValueKind::Bytes | ValueKind::Sequence => Value::Bytes(raw.to_vec()),
        }
    }
}

fn read_int(c: &[u8], signed: bool) -> i64 {
    match (c.len(), signed) {
        (2, false) => u16::from_le_bytes([c[0], c[1]]) as i64,
        (2, true) => i16::from_le_bytes([c[0], c[1]]) as i64,
        (4, false) => u32::from_le_bytes(c.try_into().unwrap()) as i64,
        (4, true) => i32::from_le_bytes(c.try_into().unwrap()) as i64,
        // UV values above i64::MAX wrap; the writer restores the same bits.
        (8, _) => i64::from_le_bytes(c.try_into().unwrap()),
        _ => unreachable!("integer widths are 2, 4 or 8"),
    }
}

fn implicit_vr(tag: Tag) -> Vr {
    if tag.element == 0x0000 {
        return Vr::UL;
    }
    if tag.is_private() {
        return Vr::UN;
    }
    dictionary_vr(tag).unwrap_or(Vr::UN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preamble() -> Vec<u8> {
        let mut v = vec![0u8; 128];
        v.extend_from_slice(b"DICM");
        v
    }

    fn explicit_meta() -> Vec<u8> {
        // (0002,0010) UI "1.2.840.10008.1.2.1\0"
        let uid = b"1.2.840.10008.1.2.1\0";
        let mut v = vec![0x02, 0x00, 0x10, 0x00, b'U', b'I'];
        v.extend_from_slice(&(uid.len() as u16).to_le_bytes());
        v.extend_from_slice(uid);
        v
    }

    #[test]
    fn minimal_file_has_no_elements() {
        let obj = parse_file(&preamble()).unwrap();
        assert!(obj.elements.is_empty());
        assert!(obj.meta.is_empty());
        assert!(obj.pixel_data.is_none());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = vec![0xAB; 200];
        bytes[128..132].copy_from_slice(b"DICX");
        assert_eq!(parse_file(&bytes), Err(ParseError::MalformedPreamble));
        assert_eq!(parse_file(&[0u8; 4]), Err(ParseError::MalformedPreamble));
        assert_eq!(parse_file(&[]), Err(ParseError::EmptyInput));
    }

    #[test]
    fn hand_assembled_explicit_element() {
        let mut bytes = preamble();
        bytes.extend(explicit_meta());
        bytes.extend_from_slice(&[0x08, 0x00, 0x60, 0x00, 0x43, 0x53, 0x02, 0x00, 0x43, 0x54]);
        let obj = parse_file(&bytes).unwrap();
        assert_eq!(obj.transfer_syntax, TransferSyntax::ExplicitVrLittleEndian);
        assert_eq!(
            obj.elements,
            vec![DataElement::string(Tag::new(0x0008, 0x0060), Vr::CS, "CT")]
        );
    }

    #[test]
    fn truncated_element_reports_offset() {
        let mut bytes = preamble();
        bytes.extend(explicit_meta());
        let offset = bytes.len();
        // declares 10 bytes, provides 2
        bytes.extend_from_slice(&[0x08, 0x00, 0x60, 0x00, b'C', b'S', 0x0A, 0x00, b'C', b'T']);
        match parse_file(&bytes) {
            Err(ParseError::TruncatedElement {
                offset: o,
                tag,
                declared,
                available,
            }) => {
                assert_eq!(o, offset);
                assert_eq!(tag, tags::MODALITY);
                assert_eq!(declared, 10);
                assert_eq!(available, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn headerless_implicit_dataset() {
        // (0008,0060) implicit: tag, u32 len, value
        let bytes = [0x08, 0x00, 0x60, 0x00, 0x02, 0x00, 0x00, 0x00, b'M', b'R'];
        let obj = parse_file(&bytes).unwrap();
        assert_eq!(obj.transfer_syntax, TransferSyntax::ImplicitVrLittleEndian);
        assert_eq!(obj.modality(), Some("MR"));
        assert!(!obj.warnings.is_empty());
    }

    #[test]
    fn headerless_wrong_group_rejected() {
        let bytes = [0x10, 0x00, 0x10, 0x00, 0x02, 0x00, 0x00, 0x00, b'A', b' '];
        assert_eq!(parse_file(&bytes), Err(ParseError::MalformedPreamble));
    }

    #[test]
    fn unsupported_syntax_returns_partial_metadata() {
        let mut bytes = preamble();
        let uid = b"1.2.840.10008.1.2.4.50";
        bytes.extend_from_slice(&[0x02, 0x00, 0x10, 0x00, b'U', b'I']);
        bytes.extend_from_slice(&(uid.len() as u16).to_le_bytes());
        bytes.extend_from_slice(uid);
        bytes.extend_from_slice(&[0x08, 0x00, 0x60, 0x00, 0x43, 0x53, 0x02, 0x00, 0x43, 0x54]);
        // encapsulated pixel data header
        bytes.extend_from_slice(&[0xE0, 0x7F, 0x10, 0x00, b'O', b'B', 0, 0, 0xFF, 0xFF, 0xFF, 0xFF]);
        match parse_file(&bytes) {
            Err(ParseError::UnsupportedTransferSyntax { uid, partial }) => {
                assert_eq!(uid, "1.2.840.10008.1.2.4.50");
                assert_eq!(partial.modality(), Some("CT"));
                assert!(partial.pixel_data.is_none());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn latin1_is_transcoded() {
        let mut bytes = preamble();
        bytes.extend(explicit_meta());
        bytes.extend_from_slice(&[0x08, 0x00, 0x05, 0x00, b'C', b'S', 10, 0]);
        bytes.extend_from_slice(b"ISO_IR 100");
        bytes.extend_from_slice(&[0x10, 0x00, 0x10, 0x00, b'P', b'N', 6, 0]);
        bytes.extend_from_slice(&[b'M', 0xFC, b'l', b'l', b'e', b'r']);
        let obj = parse_file(&bytes).unwrap();
        assert_eq!(obj.string(tags::PATIENT_NAME), Some("Müller"));
        assert!(!obj.charset_unverified);
    }

    #[test]
    fn unknown_charset_is_flagged() {
        let mut bytes = preamble();
        bytes.extend(explicit_meta());
        bytes.extend_from_slice(&[0x08, 0x00, 0x05, 0x00, b'C', b'S', 10, 0]);
        bytes.extend_from_slice(b"ISO_IR 144");
        let obj = parse_file(&bytes).unwrap();
        assert!(obj.charset_unverified);
    }

    #[test]
    fn undefined_length_sequence_with_items() {
        let mut bytes = preamble();
        bytes.extend(explicit_meta());
        // (0008,1115) SQ undefined
        bytes.extend_from_slice(&[0x08, 0x00, 0x15, 0x11, b'S', b'Q', 0, 0, 0xFF, 0xFF, 0xFF, 0xFF]);
        // item undefined
        bytes.extend_from_slice(&[0xFE, 0xFF, 0x00, 0xE0, 0xFF, 0xFF, 0xFF, 0xFF]);
        bytes.extend_from_slice(&[0x20, 0x00, 0x0E, 0x00, b'U', b'I', 4, 0, b'1', b'.', b'2', 0]);
        bytes.extend_from_slice(&[0xFE, 0xFF, 0x0D, 0xE0, 0, 0, 0, 0]);
        // item defined, empty
        bytes.extend_from_slice(&[0xFE, 0xFF, 0x00, 0xE0, 0, 0, 0, 0]);
        bytes.extend_from_slice(&[0xFE, 0xFF, 0xDD, 0xE0, 0, 0, 0, 0]);
        bytes.extend_from_slice(&[0x08, 0x00, 0x60, 0x00, 0x43, 0x53, 0x02, 0x00, 0x43, 0x54]);
        let obj = parse_file(&bytes).unwrap();
        assert!(obj.elements.windows(2).all(|w| w[0].tag < w[1].tag));
        let items = obj.items(tags::REFERENCED_SERIES_SEQUENCE);
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].string(tags::SERIES_INSTANCE_UID), Some("1.2"));
        assert!(items[1].elements.is_empty());
        assert_eq!(obj.modality(), Some("CT"));
    }

    #[test]
    fn pixel_data_is_captured_raw() {
        let mut bytes = preamble();
        bytes.extend(explicit_meta());
        bytes.extend_from_slice(&[0xE0, 0x7F, 0x10, 0x00, b'O', b'W', 0, 0, 4, 0, 0, 0, 1, 2, 3, 4]);
        let obj = parse_file(&bytes).unwrap();
        assert_eq!(obj.pixel_data.unwrap().bytes, vec![1, 2, 3, 4]);
        assert!(obj.elements.is_empty());
    }
}
