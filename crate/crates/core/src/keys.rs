//! Ed25519 key pairs. Signing is deterministic (RFC 8032), so the same key
//! and message always give the same signature bytes.

use core::fmt;
use core::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::address::Address;
use crate::digest::{parse_prefixed_hex, Digest, HexLengthError};

const SEED_DOMAIN: &[u8] = b"anka/keypair-seed/v1";

#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn from_secret_bytes(secret: [u8; 32]) -> Self {
        KeyPair { signing: SigningKey::from_bytes(&secret) }
    }

    /// Reproducible key pair for tests and scenarios.
    pub fn from_seed(seed: u64) -> Self {
        Self::from_secret_bytes(Digest::tagged(SEED_DOMAIN, &seed.to_be_bytes()).0)
    }

    /// Reproducible key pair derived from a human-readable label, used for
    /// named scenario actors and the dev faucet.
    pub fn from_label(label: &str) -> Self {
        let mut buf = alloc::vec::Vec::with_capacity(label.len() + 1);
        buf.push(b':');
        buf.extend_from_slice(label.as_bytes());
        Self::from_secret_bytes(Digest::tagged(SEED_DOMAIN, &buf).0)
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn address(&self) -> Address {
        Address::from_public_key(&self.public_key())
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.signing.sign(msg).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public_key", &self.public_key()).finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn verify(&self, msg: &[u8], sig: &Signature) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
        key.verify(msg, &sig).is_ok()
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0x")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({self})")
    }
}

impl FromStr for PublicKey {
    type Err = HexLengthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefixed_hex(s).map(PublicKey)
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::string::String>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Signature(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        f.write_str("..)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::RngCore;
    use rand_chacha::rand_core::SeedableRng;
    use std::collections::HashSet;

    #[test]
    fn same_seed_same_key() {
        assert_eq!(KeyPair::from_seed(42).public_key(), KeyPair::from_seed(42).public_key());
    }

    #[test]
    fn distinct_seeds_distinct_addresses() {
        assert_ne!(KeyPair::from_seed(42).address(), KeyPair::from_seed(43).address());
        assert_ne!(KeyPair::from_label("alice").address(), KeyPair::from_label("bob").address());
    }

    #[test]
    fn sign_verify_round_trip() {
        let kp = KeyPair::from_seed(42);
        let msg = b"list 500 Wh at 24V";
        let sig = kp.sign(msg);
        assert!(kp.public_key().verify(msg, &sig));
        let mut flipped = *msg;
        flipped[0] ^= 1;
        assert!(!kp.public_key().verify(&flipped, &sig));
        assert!(!KeyPair::from_seed(43).public_key().verify(msg, &sig));
    }

    #[test]
    fn secret_round_trip() {
        let kp = KeyPair::from_seed(7);
        let again = KeyPair::from_secret_bytes(kp.secret_bytes());
        assert_eq!(kp.address(), again.address());
    }

    #[test]
    fn ten_thousand_generated_addresses_do_not_collide() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2024);
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let mut secret = [0u8; 32];
            rng.fill_bytes(&mut secret);
            assert!(seen.insert(KeyPair::from_secret_bytes(secret).address()));
        }
    }

    proptest! {
        #[test]
        fn any_single_bit_flip_breaks_signature(
            payload in proptest::collection::vec(any::<u8>(), 1..128),
            bit in any::<usize>(),
            seed in any::<u64>(),
        ) {
            let kp = KeyPair::from_seed(seed);
            let sig = kp.sign(&payload);
            prop_assert!(kp.public_key().verify(&payload, &sig));
            let mut mutated = payload.clone();
            let bit = bit % (mutated.len() * 8);
            mutated[bit / 8] ^= 1 << (bit % 8);
            prop_assert!(!kp.public_key().verify(&mutated, &sig));
        }
    }
}
