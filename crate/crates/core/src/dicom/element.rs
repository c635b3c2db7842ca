use super::{Tag, Vr};

/// Decoded payload of a data element.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// Text values, trailing padding removed, split on `\` where the VR allows it.
    Strings(Vec<String>),
    /// Binary integers (US, SS, UL, SL, UV, SV) and attribute tags (AT, as `group << 16 | element`).
    Ints(Vec<i64>),
    Floats(Vec<f64>),
    Bytes(Vec<u8>),
    Sequence(Vec<Item>),
}

impl Value {
    /// Value multiplicity. Byte payloads count as a single value when non-empty.
    pub fn multiplicity(&self) -> usize {
        match self {
            Value::Strings(v) => v.len(),
            Value::Ints(v) => v.len(),
            Value::Floats(v) => v.len(),
            Value::Bytes(b) => usize::from(!b.is_empty()),
            Value::Sequence(items) => items.len(),
        }
    }

    pub fn strings(&self) -> Option<&[String]> {
        match self {
            Value::Strings(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataElement {
    pub tag: Tag,
    pub vr: Vr,
    pub value: Value,
}

impl DataElement {
    pub fn new(tag: Tag, vr: Vr, value: Value) -> Self {
        DataElement { tag, vr, value }
    }

    pub fn strings(tag: Tag, vr: Vr, values: &[&str]) -> Self {
        DataElement::new(
            tag,
            vr,
            Value::Strings(values.iter().map(|s| s.to_string()).collect()),
        )
    }

    /// A single value; the empty string gives a zero-length element.
    pub fn string(tag: Tag, vr: Vr, value: &str) -> Self {
        if value.is_empty() {
            return DataElement::strings(tag, vr, &[]);
        }
        DataElement::strings(tag, vr, &[value])
    }

    pub fn ints(tag: Tag, vr: Vr, values: &[i64]) -> Self {
        DataElement::new(tag, vr, Value::Ints(values.to_vec()))
    }

    pub fn sequence(tag: Tag, items: Vec<Item>) -> Self {
        DataElement::new(tag, Vr::SQ, Value::Sequence(items))
    }
}

/// One item of a sequence: a nested, tag-sorted element list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Item {
    pub elements: Vec<DataElement>,
}

impl Item {
    pub fn new(mut elements: Vec<DataElement>) -> Self {
        elements.sort_by_key(|e| e.tag);
        Item { elements }
    }
}

/// Read accessors shared by datasets and sequence items.
pub trait Elements {
    /// Elements sorted by tag.
    fn elements(&self) -> &[DataElement];

    fn get(&self, tag: Tag) -> Option<&DataElement> {
        let els = self.elements();
        els.binary_search_by_key(&tag, |e| e.tag)
            .ok()
            .map(|i| &els[i])
    }

    fn strings(&self, tag: Tag) -> Option<&[String]> {
        self.get(tag).and_then(|e| e.value.strings())
    }

    /// First text value, if non-empty.
    fn string(&self, tag: Tag) -> Option<&str> {
        self.strings(tag)
            .and_then(|v| v.first())
            .map(|s| s.as_str())
            .filter(|s| !s.is_empty())
    }

    /// Numeric values, whether stored as binary numbers or as DS/IS text.
    fn numbers(&self, tag: Tag) -> Option<Vec<f64>> {
        match &self.get(tag)?.value {
            Value::Ints(v) => Some(v.iter().map(|&i| i as f64).collect()),
            Value::Floats(v) => Some(v.clone()),
            Value::Strings(v) => v.iter().map(|s| s.trim().parse::<f64>().ok()).collect(),
            _ => None,
        }
    }

    fn number(&self, tag: Tag) -> Option<f64> {
        self.numbers(tag).and_then(|v| v.first().copied())
    }

    fn int(&self, tag: Tag) -> Option<i64> {
        match &self.get(tag)?.value {
            Value::Ints(v) => v.first().copied(),
            Value::Strings(v) => v.first()?.trim().parse().ok(),
            Value::Floats(v) => v.first().map(|f| *f as i64),
            _ => None,
        }
    }

    fn items(&self, tag: Tag) -> &[Item] {
        match self.get(tag).map(|e| &e.value) {
            Some(Value::Sequence(items)) => items,
            _ => &[],
        }
    }
}

impl Elements for Item {
    fn elements(&self) -> &[DataElement] {
        &self.elements
    }
}

impl Elements for [DataElement] {
    fn elements(&self) -> &[DataElement] {
        self
    }
}
