use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The four text genres.
///
/// Integer codes are fixed: 0 alternative scientific, 1 scientific,
/// 2 vernacular, 3 disinformative. Manifests store the code; reports and
/// score maps use [`ClassLabel::name`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    AlternativeScientific,
    Scientific,
    Vernacular,
    Disinformative,
}

impl ClassLabel {
    /// All labels in code order.
    pub const ALL: [ClassLabel; 4] = [
        ClassLabel::AlternativeScientific,
        ClassLabel::Scientific,
        ClassLabel::Vernacular,
        ClassLabel::Disinformative,
    ];

    pub fn code(self) -> u8 {
        match self {
            ClassLabel::AlternativeScientific => 0,
            ClassLabel::Scientific => 1,
            ClassLabel::Vernacular => 2,
            ClassLabel::Disinformative => 3,
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            0 => Ok(ClassLabel::AlternativeScientific),
            1 => Ok(ClassLabel::Scientific),
            2 => Ok(ClassLabel::Vernacular),
            3 => Ok(ClassLabel::Disinformative),
            other => Err(Error::invalid(format!("invalid label {other}"))),
        }
    }

    /// Position in [`ClassLabel::ALL`]; equal to the code.
    pub fn index(self) -> usize {
        self.code() as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::AlternativeScientific => "alternative",
            ClassLabel::Scientific => "scientific",
            ClassLabel::Vernacular => "vernacular",
            ClassLabel::Disinformative => "disinformative",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alternative" | "alternative-scientific" | "alternative_scientific" | "alt" | "0" => {
                Ok(ClassLabel::AlternativeScientific)
            }
            "scientific" | "sci" | "1" => Ok(ClassLabel::Scientific),
            "vernacular" | "vern" | "2" => Ok(ClassLabel::Vernacular),
            "disinformative" | "disinformation" | "dis" | "3" => Ok(ClassLabel::Disinformative),
            _ => Err(Error::invalid(format!("invalid label {s:?}"))),
        }
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let code = i64::deserialize(deserializer)?;
        ClassLabel::from_code(code).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for label-keyed maps, written with label names as keys.
pub mod by_name {
    use super::*;

    pub fn serialize<T, S>(map: &BTreeMap<ClassLabel, T>, serializer: S) -> std::result::Result<S::Ok, S::Error>
    where
        T: Serialize,
        S: Serializer,
    {
        use serde::ser::SerializeMap;
        let mut out = serializer.serialize_map(Some(map.len()))?;
        for (label, value) in map {
            out.serialize_entry(label.name(), value)?;
        }
        out.end()
    }

    pub fn deserialize<'de, T, D>(deserializer: D) -> std::result::Result<BTreeMap<ClassLabel, T>, D::Error>
    where
        T: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        let raw = BTreeMap::<String, T>::deserialize(deserializer)?;
        raw.into_iter()
            .map(|(k, v)| k.parse::<ClassLabel>().map(|l| (l, v)).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for a label written as its name.
pub mod as_name {
    use super::*;

    pub fn serialize<S: Serializer>(label: &ClassLabel, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(label.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<ClassLabel, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
