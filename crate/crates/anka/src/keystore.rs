//! Plaintext JSON keystores. Test networks only: keys are not encrypted.

use std::fs;
use std::path::Path;

use anka_core::{Address, KeyPair, PublicKey};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum KeystoreError {
    #[error("keystore {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("keystore {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("keystore {0}: key material does not match the recorded address")]
    Mismatch(String),
    #[error("keystore {0}: malformed key hex")]
    BadKey(String),
    #[error("keystore {0} already exists")]
    Exists(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keystore {
    pub address: Address,
    pub public_key_hex: String,
    pub private_key_hex: String,
    pub created_at: DateTime<Utc>,
}

/// Fresh key pair. With a seed the result is reproducible; without one the
/// secret comes from the OS RNG.
pub fn generate_keypair(seed: Option<u64>) -> KeyPair {
    match seed {
        Some(s) => KeyPair::from_seed(s),
        None => KeyPair::from_secret_bytes(rand::random()),
    }
}

impl Keystore {
    pub fn from_keypair(keys: &KeyPair) -> Self {
        Keystore {
            address: keys.address(),
            public_key_hex: keys.public_key().to_string(),
            private_key_hex: hex::encode(keys.secret_bytes()),
            created_at: Utc::now(),
        }
    }

    pub fn keypair(&self, path_hint: &str) -> Result<KeyPair, KeystoreError> {
        let mut secret = [0u8; 32];
        hex::decode_to_slice(self.private_key_hex.trim_start_matches("0x"), &mut secret)
            .map_err(|_| KeystoreError::BadKey(path_hint.to_string()))?;
        let keys = KeyPair::from_secret_bytes(secret);
        let public: PublicKey =
            self.public_key_hex.parse().map_err(|_| KeystoreError::BadKey(path_hint.to_string()))?;
        if keys.public_key() != public || keys.address() != self.address {
            return Err(KeystoreError::Mismatch(path_hint.to_string()));
        }
        Ok(keys)
    }

    pub fn load(path: &Path) -> Result<Self, KeystoreError> {
        let p = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| KeystoreError::Io { path: p.clone(), source })?;
        serde_json::from_str(&text).map_err(|source| KeystoreError::Json { path: p, source })
    }

    pub fn load_keypair(path: &Path) -> Result<KeyPair, KeystoreError> {
        Self::load(path)?.keypair(&path.display().to_string())
    }

    pub fn save(&self, path: &Path, overwrite: bool) -> Result<(), KeystoreError> {
        let p = path.display().to_string();
        if !overwrite && path.exists() {
            return Err(KeystoreError::Exists(p));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| KeystoreError::Io { path: p.clone(), source })?;
        }
        let json = serde_json::to_string_pretty(self).expect("keystore serializes");
        fs::write(path, json + "\n").map_err(|source| KeystoreError::Io { path: p, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.json");
        let keys = generate_keypair(Some(42));
        Keystore::from_keypair(&keys).save(&path, false).unwrap();
        assert!(matches!(Keystore::from_keypair(&keys).save(&path, false), Err(KeystoreError::Exists(_))));
        let loaded = Keystore::load_keypair(&path).unwrap();
        assert_eq!(loaded.address(), keys.address());

        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        for field in ["address", "public_key_hex", "private_key_hex", "created_at"] {
            assert!(json.get(field).is_some(), "{field}");
        }
    }

    #[test]
    fn detects_mismatched_address() {
        let mut ks = Keystore::from_keypair(&generate_keypair(Some(1)));
        ks.address = generate_keypair(Some(2)).address();
        assert!(matches!(ks.keypair("k"), Err(KeystoreError::Mismatch(_))));
    }

    #[test]
    fn unseeded_keys_differ() {
        assert_ne!(generate_keypair(None).address(), generate_keypair(None).address());
    }
}
