use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

/// SHA-256 output, rendered as 0x-prefixed lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    /// Hash of `domain || bytes`. Domains keep tx, state and key hashes apart.
    pub fn tagged(domain: &[u8], bytes: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(domain);
        h.update(bytes);
        Digest(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0x")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expected 0x-prefixed hex of {0} bytes")]
pub struct HexLengthError(pub usize);

pub(crate) fn parse_prefixed_hex<const N: usize>(s: &str) -> Result<[u8; N], HexLengthError> {
    let body = s.strip_prefix("0x").unwrap_or(s);
    let mut out = [0u8; N];
    hex::decode_to_slice(body, &mut out).map_err(|_| HexLengthError(N))?;
    Ok(out)
}

impl FromStr for Digest {
    type Err = HexLengthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefixed_hex(s).map(Digest)
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::string::String>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
