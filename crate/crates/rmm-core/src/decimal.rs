//! Serde helpers encoding `f64` fields as decimal strings.
//!
//! Rust's `Display` for `f64` emits the shortest decimal string that parses
//! back to the same bits, so snapshots and reports stay bit-stable across
//! platforms and serializer versions.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn to_string(v: f64) -> String {
    format!("{v}")
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_string(*v))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let raw = String::deserialize(d)?;
    raw.parse::<f64>()
        .map_err(|_| de::Error::custom(format!("invalid decimal string {raw:?}")))
}

/// Same encoding for vectors of reals (used by invariant traces).
pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&super::to_string(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.into_iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| de::Error::custom(format!("invalid decimal string {s:?}")))
            })
            .collect()
    }
}
