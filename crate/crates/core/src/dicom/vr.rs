use std::fmt;

/// Two-letter value representation code.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vr(pub [u8; 2]);

macro_rules! vrs {
    ($($name:ident),* $(,)?) => {
        impl Vr {
            $(pub const $name: Vr = Vr(*stringify!($name).as_bytes().first_chunk::<2>().unwrap());)*

            const KNOWN: &'static [Vr] = &[$(Vr::$name),*];
        }
    };
}

vrs!(
    AE, AS, AT, CS, DA, DS, DT, FD, FL, IS, LO, LT, OB, OD, OF, OL, OV, OW, PN, SH, SL, SQ, SS, ST,
    SV, TM, UC, UI, UL, UN, UR, US, UT, UV,
);

/// How the payload of an element with a given VR is decoded.
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum ValueKind {
    /// Backslash-separated text values.
    MultiString,
    /// Text that is always single-valued (backslash is a literal).
    SingleString,
    Int { width: usize, signed: bool },
    Float { width: usize },
    AttributeTag,
    Bytes,
    Sequence,
}

impl Vr {
    pub fn from_bytes(bytes: [u8; 2]) -> Vr {
        Vr(bytes)
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).unwrap_or("??")
    }

    pub fn is_known(&self) -> bool {
        Self::KNOWN.contains(self)
    }

    /// In explicit VR encoding these VRs use a 2-byte reserved field followed by a 4-byte length.
    pub fn has_long_length(&self) -> bool {
        matches!(
            *self,
            Vr::OB
                | Vr::OD
                | Vr::OF
                | Vr::OL
                | Vr::OV
                | Vr::OW
                | Vr::SQ
                | Vr::UC
                | Vr::UN
                | Vr::UR
                | Vr::UT
                | Vr::SV
                | Vr::UV
        )
    }

    pub fn kind(&self) -> ValueKind {
        match *self {
            Vr::AE | Vr::AS | Vr::CS | Vr::DA | Vr::DS | Vr::DT | Vr::IS | Vr::LO | Vr::PN
            | Vr::SH | Vr::TM | Vr::UC | Vr::UI => ValueKind::MultiString,
            Vr::LT | Vr::ST | Vr::UT | Vr::UR => ValueKind::SingleString,
            Vr::US => ValueKind::Int { width: 2, signed: false },
            Vr::SS => ValueKind::Int { width: 2, signed: true },
            Vr::UL => ValueKind::Int { width: 4, signed: false },
            Vr::SL => ValueKind::Int { width: 4, signed: true },
            Vr::UV => ValueKind::Int { width: 8, signed: false },
            Vr::SV => ValueKind::Int { width: 8, signed: true },
            Vr::FL => ValueKind::Float { width: 4 },
            Vr::FD => ValueKind::Float { width: 8 },
            Vr::AT => ValueKind::AttributeTag,
            Vr::SQ => ValueKind::Sequence,
            _ => ValueKind::Bytes,
        }
    }

    pub fn is_string(&self) -> bool {
        matches!(self.kind(), ValueKind::MultiString | ValueKind::SingleString)
    }

    /// Padding byte used to reach an even value length.
    pub fn padding(&self) -> u8 {
        match *self {
            Vr::UI => 0,
            v if v.is_string() => b' ',
            _ => 0,
        }
    }
}

impl fmt::Display for Vr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Vr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vr({})", self.as_str())
    }
}
