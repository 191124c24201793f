//! Amounts travel through JSON as decimal strings so browser clients never
//! round them through a 53-bit float.

use alloc::string::String;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serializer};

use crate::Amount;

pub fn serialize<S: Serializer>(v: &Amount, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Amount, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Str(String),
        Num(u64),
    }
    match Repr::deserialize(d)? {
        Repr::Str(s) => Amount::from_str(&s).map_err(serde::de::Error::custom),
        Repr::Num(n) => Ok(n as Amount),
    }
}
