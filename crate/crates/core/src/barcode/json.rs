//! On-disk barcode layout:
//!
//! ```json
//! {"essential":{"birth":b},
//!  "segments":[{"birth":b,"death":d,"minimum_id":i}],
//!  "meta":{"field":"...","seed":0,"path_config":{...}}}
//! ```
//!
//! Infinite values are written as the string `"inf"`.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Barcode, Segment, SkippedPair};
use crate::error::Result;
use crate::pathopt::PathConfig;

pub(crate) mod extended_f64 {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got \"{t}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssentialRecord {
    #[serde(with = "extended_f64")]
    pub birth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    #[serde(with = "extended_f64")]
    pub birth: f64,
    #[serde(with = "extended_f64")]
    pub death: f64,
    pub minimum_id: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BarcodeMeta {
    pub field: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_config: Option<PathConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_pairs: Vec<SkippedPair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub duplicates: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarcodeFile {
    pub essential: EssentialRecord,
    pub segments: Vec<SegmentRecord>,
    #[serde(default)]
    pub meta: BarcodeMeta,
}

impl BarcodeFile {
    pub fn from_barcode(barcode: &Barcode, meta: BarcodeMeta) -> Self {
        Self {
            essential: EssentialRecord { birth: barcode.essential().birth },
            segments: barcode
                .segments()
                .iter()
                .map(|s| SegmentRecord { birth: s.birth, death: s.death, minimum_id: s.minimum_id })
                .collect(),
            meta,
        }
    }

    /// Validates and converts; the essential segment takes the id of the
    /// lowest unused minimum id.
    pub fn to_barcode(&self) -> Result<Barcode> {
        let used: Vec<usize> = self.segments.iter().map(|s| s.minimum_id).collect();
        let essential_id = (0..).find(|i| !used.contains(i)).unwrap_or(0);
        Barcode::new(
            Segment { birth: self.essential.birth, death: f64::INFINITY, minimum_id: essential_id },
            self.segments
                .iter()
                .map(|s| Segment { birth: s.birth, death: s.death, minimum_id: s.minimum_id })
                .collect(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
