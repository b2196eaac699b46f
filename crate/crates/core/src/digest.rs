//! SHA-256 helpers shared by every stage that binds outputs to inputs.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of raw bytes.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Digest of the canonical JSON serialization of a value.
///
/// Struct fields serialize in declaration order and maps used in digested
/// types are `BTreeMap`s, so the encoding is stable.
pub fn json_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("digested types always serialize");
    sha256_hex(bytes)
}

/// First `n` hex characters of a digest, for labels.
pub fn short(digest: &str, n: usize) -> &str {
    &digest[..n.min(digest.len())]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn short_clamps() {
        assert_eq!(short("abcd", 8), "abcd");
        assert_eq!(short("abcdef", 2), "ab");
    }
}
