//! Content hashes for configs and artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the compact JSON form of `value`. Struct fields serialize in
/// declaration order, so the result is stable for a given type.
pub fn json_hash<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable value"))
}

/// Leading characters of a hash, for file names and log lines.
pub fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}
