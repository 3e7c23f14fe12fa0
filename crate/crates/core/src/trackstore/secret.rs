//! Password and API-key hashing.

use base64::engine::general_purpose::{STANDARD_NO_PAD, URL_SAFE_NO_PAD};
use base64::Engine;
use hmac::Hmac;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

pub const PASSWORD_ALGORITHM: &str = "pbkdf2-sha256";
pub const DEFAULT_PBKDF2_ITERATIONS: u32 = 600_000;

/// Stored form of a password; the parameters travel with each record so
/// the iteration count can change without invalidating old hashes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasswordHash {
    pub algorithm: String,
    pub iterations: u32,
    pub salt: String,
    pub hash: String,
}

fn random_bytes<const N: usize>() -> [u8; N] {
    let mut b = [0u8; N];
    rand::rng().fill_bytes(&mut b);
    b
}

fn pbkdf2(password: &str, salt: &[u8], iterations: u32) -> [u8; 32] {
    let mut out = [0u8; 32];
    pbkdf2::pbkdf2::<Hmac<Sha256>>(password.as_bytes(), salt, iterations, &mut out)
        .expect("HMAC accepts any key length");
    out
}

impl PasswordHash {
    pub fn new(password: &str, iterations: u32) -> Self {
        let salt = random_bytes::<16>();
        let hash = pbkdf2(password, &salt, iterations.max(1));
        Self {
            algorithm: PASSWORD_ALGORITHM.to_string(),
            iterations: iterations.max(1),
            salt: STANDARD_NO_PAD.encode(salt),
            hash: STANDARD_NO_PAD.encode(hash),
        }
    }

    /// Constant-time check of `password` against this record. Records with
    /// an unknown algorithm or undecodable fields never verify.
    pub fn verify(&self, password: &str) -> bool {
        let (Ok(salt), Ok(expected)) = (STANDARD_NO_PAD.decode(&self.salt), STANDARD_NO_PAD.decode(&self.hash)) else {
            return false;
        };
        let known = self.algorithm == PASSWORD_ALGORITHM;
        let actual = pbkdf2(password, &salt, self.iterations.max(1));
        bool::from(actual.as_slice().ct_eq(&expected)) && known
    }
}

/// Salted SHA-256 of a camera API key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyHash {
    pub salt: String,
    pub hash: String,
}

fn sha256_salted(salt: &[u8], key: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(key.as_bytes());
    h.finalize().into()
}

impl KeyHash {
    pub fn new(key: &str) -> Self {
        let salt = random_bytes::<16>();
        Self { salt: STANDARD_NO_PAD.encode(salt), hash: STANDARD_NO_PAD.encode(sha256_salted(&salt, key)) }
    }

    pub fn verify(&self, key: &str) -> bool {
        let (Ok(salt), Ok(expected)) = (STANDARD_NO_PAD.decode(&self.salt), STANDARD_NO_PAD.decode(&self.hash)) else {
            return false;
        };
        bool::from(sha256_salted(&salt, key).as_slice().ct_eq(&expected))
    }
}

/// Random URL-safe token carrying `bytes` bytes of entropy.
pub fn random_token(bytes: usize) -> String {
    let mut b = vec![0u8; bytes];
    rand::rng().fill_bytes(&mut b);
    URL_SAFE_NO_PAD.encode(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn password_round_trip() {
        let h = PasswordHash::new("hunter2xx", 1000);
        assert!(h.verify("hunter2xx"));
        assert!(!h.verify("hunter2xy"));
        assert_eq!(h.iterations, 1000);
        assert!(!h.hash.contains("hunter2xx"));
    }

    #[test]
    fn salts_differ() {
        let a = PasswordHash::new("same-password", 10);
        let b = PasswordHash::new("same-password", 10);
        assert_ne!(a.salt, b.salt);
        assert_ne!(a.hash, b.hash);
    }

    #[test]
    fn known_pbkdf2_vector() {
        // RFC 7914 section 11, PBKDF2-HMAC-SHA256("passwd", "salt", 1, 64), first 32 bytes
        let out = pbkdf2("passwd", b"salt", 1);
        let hex: String = out.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, "55ac046e56e3089fec1691c22544b605f94185216dde0465e68b9d57c20dacbc");
    }

    #[test]
    fn unknown_algorithm_never_verifies() {
        let mut h = PasswordHash::new("pw-12345678", 5);
        h.algorithm = "md5".into();
        assert!(!h.verify("pw-12345678"));
    }

    #[test]
    fn key_hash() {
        let k = random_token(32);
        let h = KeyHash::new(&k);
        assert!(h.verify(&k));
        assert!(!h.verify("nope"));
        assert_eq!(random_token(16).len(), 22);
    }
}
