//! Serde helpers for quantities that may carry the `+inf` sentinel.
//!
//! JSON has no infinity literal, so an unbounded bandwidth is written as the
//! string `"inf"`. Finite values round-trip as plain numbers.

use serde::{de, Deserialize, Deserializer, Serializer};

pub const INF_TOKEN: &str = "inf";

pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    if value.is_infinite() && value.is_sign_positive() {
        serializer.serialize_str(INF_TOKEN)
    } else {
        serializer.serialize_f64(*value)
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }
    match Repr::deserialize(deserializer)? {
        Repr::Num(v) => Ok(v),
        Repr::Str(s) if s == INF_TOKEN => Ok(f64::INFINITY),
        Repr::Str(s) => Err(de::Error::custom(format!(
            "expected a number or \"{INF_TOKEN}\", found \"{s}\""
        ))),
    }
}
