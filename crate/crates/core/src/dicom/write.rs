//! Part-10 writer. Emits the preamble, file meta, and the dataset in the
//! object's own transfer syntax.

use super::dictionary::dictionary_vr;
use super::element::{DataElement, Elements, Item, Value};
use super::object::DicomObject;
use super::tag::tags;
use super::vr::ValueKind;
use super::{Tag, Vr};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WriteError {
    #[error("{tag}: value of {len} bytes does not fit a 16-bit length field for VR {vr}")]
    ValueTooLong { tag: Tag, vr: Vr, len: usize },
    #[error("{tag}: value variant does not match VR {vr}")]
    ValueMismatch { tag: Tag, vr: Vr },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Encode sequences and items with undefined length plus delimiters.
    pub undefined_length_sequences: bool,
}

#[derive(Clone, Copy)]
enum Charset {
    Utf8,
    Latin1,
}

struct Writer {
    explicit: bool,
    charset: Charset,
    opts: WriteOptions,
}

pub fn write_file(obj: &DicomObject) -> Result<Vec<u8>, WriteError> {
    write_file_with(obj, WriteOptions::default())
}

pub fn write_file_with(obj: &DicomObject, opts: WriteOptions) -> Result<Vec<u8>, WriteError> {
    let mut out = vec![0u8; 128];
    out.extend_from_slice(b"DICM");

    let meta_writer = Writer {
        explicit: true,
        charset: Charset::Utf8,
        opts,
    };
    let mut meta_body = Vec::new();
    for el in &obj.meta {
        if el.tag == tags::FILE_META_GROUP_LENGTH {
            continue;
        }
        if el.tag == tags::TRANSFER_SYNTAX_UID {
            let ts = DataElement::string(el.tag, el.vr, obj.transfer_syntax.uid());
            meta_writer.element(&mut meta_body, &ts)?;
        } else {
            meta_writer.element(&mut meta_body, el)?;
        }
    }
    if let Some(gl) = obj.meta.iter().find(|e| e.tag == tags::FILE_META_GROUP_LENGTH) {
        let gl = DataElement::new(gl.tag, Vr::UL, Value::Ints(vec![meta_body.len() as i64]));
        meta_writer.element(&mut out, &gl)?;
    }
    out.extend(meta_body);

    let charset = match obj.strings(tags::SPECIFIC_CHARACTER_SET) {
        Some([cs]) if cs.trim() == "ISO_IR 100" => Charset::Latin1,
        _ => Charset::Utf8,
    };
    let writer = Writer {
        explicit: obj.transfer_syntax.is_explicit(),
        charset,
        opts,
    };
    let mut pixel_written = obj.pixel_data.is_none();
    for el in &obj.elements {
        if !pixel_written && el.tag > tags::PIXEL_DATA {
            writer.pixel_data(&mut out, obj)?;
            pixel_written = true;
        }
        writer.element(&mut out, el)?;
    }
    if !pixel_written {
        writer.pixel_data(&mut out, obj)?;
    }
    Ok(out)
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tag(out: &mut Vec<u8>, tag: Tag) {
    put_u16(out, tag.group);
    put_u16(out, tag.element);
}

impl Writer {
    fn pixel_data(&self, out: &mut Vec<u8>, obj: &DicomObject) -> Result<(), WriteError> {
        let px = obj.pixel_data.as_ref().expect("caller checked");
        let el = DataElement::new(tags::PIXEL_DATA, px.vr, Value::Bytes(px.bytes.clone()));
        self.element(out, &el)
    }

    fn header(&self, out: &mut Vec<u8>, tag: Tag, vr: Vr, len: u32) -> Result<(), WriteError> {
        put_tag(out, tag);
        if self.explicit {
            out.extend_from_slice(&vr.0);
            if vr.has_long_length() {
                put_u16(out, 0);
                put_u32(out, len);
            } else {
                if len > u16::MAX as u32 {
                    return Err(WriteError::ValueTooLong {
                        tag,
                        vr,
                        len: len as usize,
                    });
                }
                put_u16(out, len as u16);
            }
        } else {
            put_u32(out, len);
        }
        Ok(())
    }

    fn element(&self, out: &mut Vec<u8>, el: &DataElement) -> Result<(), WriteError> {
        if let Value::Sequence(items) = &el.value {
            return self.sequence(out, el.tag, items);
        }
        let bytes = self.encode(el)?;
        self.header(out, el.tag, el.vr, bytes.len() as u32)?;
        out.extend(bytes);
        Ok(())
    }

    fn sequence(&self, out: &mut Vec<u8>, tag: Tag, items: &[Item]) -> Result<(), WriteError> {
        // In implicit VR a non-dictionary sequence is only recognizable with undefined length.
        let undefined = self.opts.undefined_length_sequences
            || (!self.explicit && dictionary_vr(tag) != Some(Vr::SQ));
        if undefined {
            self.header(out, tag, Vr::SQ, u32::MAX)?;
            for item in items {
                put_tag(out, tags::ITEM);
                put_u32(out, u32::MAX);
                for el in item.elements() {
                    self.element(out, el)?;
                }
                put_tag(out, tags::ITEM_DELIMITATION);
                put_u32(out, 0);
            }
            put_tag(out, tags::SEQUENCE_DELIMITATION);
            put_u32(out, 0);
        } else {
            let mut body = Vec::new();
            for item in items {
                let mut item_body = Vec::new();
                for el in item.elements() {
                    self.element(&mut item_body, el)?;
                }
                put_tag(&mut body, tags::ITEM);
                put_u32(&mut body, item_body.len() as u32);
                body.extend(item_body);
            }
            self.header(out, tag, Vr::SQ, body.len() as u32)?;
            out.extend(body);
        }
        Ok(())
    }

    fn encode_text(&self, s: &str) -> Vec<u8> {
        match self.charset {
            Charset::Utf8 => s.as_bytes().to_vec(),
            Charset::Latin1 => s
                .chars()
                .map(|c| u8::try_from(u32::from(c)).unwrap_or(b'?'))
                .collect(),
        }
    }

    fn encode(&self, el: &DataElement) -> Result<Vec<u8>, WriteError> {
        let mismatch = || WriteError::ValueMismatch {
            tag: el.tag,
            vr: el.vr,
        };
        let mut bytes = match (&el.value, el.vr.kind()) {
            (Value::Bytes(b), _) => b.clone(),
            (Value::Strings(v), ValueKind::MultiString | ValueKind::SingleString) => {
                self.encode_text(&v.join("\\"))
            }
            (Value::Ints(v), ValueKind::Int { width, .. }) => {
                let mut b = Vec::with_capacity(v.len() * width);
                for &i in v {
                    match width {
                        2 => b.extend_from_slice(&(i as u16).to_le_bytes()),
                        4 => b.extend_from_slice(&(i as u32).to_le_bytes()),
                        _ => b.extend_from_slice(&i.to_le_bytes()),
                    }
                }
                b
            }
            (Value::Ints(v), ValueKind::AttributeTag) => {
                let mut b = Vec::with_capacity(v.len() * 4);
                for &i in v {
                    put_u16(&mut b, (i >> 16) as u16);
                    put_u16(&mut b, i as u16);
                }
                b
            }
            (Value::Floats(v), ValueKind::Float { width }) => {
                let mut b = Vec::with_capacity(v.len() * width);
                for &f in v {
                    match width {
                        4 => b.extend_from_slice(&(f as f32).to_le_bytes()),
                        _ => b.extend_from_slice(&f.to_le_bytes()),
                    }
                }
                b
            }
            _ => return Err(mismatch()),
        };
        if bytes.len() % 2 == 1 {
            bytes.push(el.vr.padding());
        }
        Ok(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::object::{PixelData, TransferSyntax};
    use crate::dicom::parse_file;

    fn sample(ts: TransferSyntax) -> DicomObject {
        let mut obj = DicomObject::new(ts);
        obj.put(DataElement::ints(tags::FILE_META_GROUP_LENGTH, Vr::UL, &[0]));
        obj.put(DataElement::string(tags::TRANSFER_SYNTAX_UID, Vr::UI, ts.uid()));
        obj.put(DataElement::string(tags::MODALITY, Vr::CS, "CT"));
        obj.put(DataElement::strings(tags::IMAGE_TYPE, Vr::CS, &["ORIGINAL", "PRIMARY", "AXIAL"]));
        obj.put(DataElement::string(tags::SERIES_INSTANCE_UID, Vr::UI, "1.2.3"));
        obj.put(DataElement::ints(tags::ROWS, Vr::US, &[2]));
        obj.put(DataElement::sequence(
            tags::REFERENCED_SERIES_SEQUENCE,
            vec![Item::new(vec![DataElement::string(
                tags::SERIES_INSTANCE_UID,
                Vr::UI,
                "9.8.7",
            )])],
        ));
        obj.pixel_data = Some(PixelData {
            vr: Vr::OW,
            bytes: vec![1, 2, 3, 4],
        });
        obj
    }

    #[test]
    fn round_trips_both_syntaxes() {
        for ts in [
            TransferSyntax::ExplicitVrLittleEndian,
            TransferSyntax::ImplicitVrLittleEndian,
        ] {
            for undefined in [false, true] {
                let obj = sample(ts);
                let bytes = write_file_with(
                    &obj,
                    WriteOptions {
                        undefined_length_sequences: undefined,
                    },
                )
                .unwrap();
                let mut back = parse_file(&bytes).unwrap();
                // group length is recomputed on write
                back.meta[0].value = Value::Ints(vec![0]);
                assert_eq!(back, obj, "{ts:?} undefined={undefined}");
            }
        }
    }

    #[test]
    fn group_length_counts_meta_bytes() {
        let obj = sample(TransferSyntax::ExplicitVrLittleEndian);
        let bytes = write_file(&obj).unwrap();
        let back = parse_file(&bytes).unwrap();
        let gl = back.meta.int(tags::FILE_META_GROUP_LENGTH).unwrap() as usize;
        // preamble(132) + group length element(12)
        let meta_end = 132 + 12 + gl;
        assert_eq!(&bytes[meta_end..meta_end + 2], &[0x08, 0x00]);
    }

    #[test]
    fn long_short_value_is_rejected() {
        let mut obj = DicomObject::new(TransferSyntax::ExplicitVrLittleEndian);
        obj.put(DataElement::string(tags::STUDY_DESCRIPTION, Vr::LO, &"x".repeat(70_000)));
        assert!(matches!(write_file(&obj), Err(WriteError::ValueTooLong { .. })));
    }
}
