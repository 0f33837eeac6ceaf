//! Content-derived identifiers.

use sha2::{Digest, Sha256};

/// `prefix-` followed by the first 16 hex digits of SHA-256(content).
pub fn content_id(prefix: &str, content: &str) -> String {
    let digest = Sha256::digest(content.as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{prefix}-{hex}")
}
