use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Stable hex digest of a value's JSON serialization. Struct fields
/// serialize in declaration order and maps are ordered, so equal values
/// always hash equal.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest[..16].iter().map(|b| format!("{b:02x}")).collect())
}
