//! Capability tokens for participant URLs and opaque ids.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use rand::rngs::OsRng;
use rand::RngCore;

/// Random bytes behind a participant token (256 bits).
pub const TOKEN_BYTES: usize = 32;
/// Random bytes behind session and media ids.
pub const ID_BYTES: usize = 16;

fn random_string(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    OsRng.fill_bytes(&mut buf);
    URL_SAFE_NO_PAD.encode(buf)
}

/// URL-safe participant token.
pub fn participant_token() -> String {
    random_string(TOKEN_BYTES)
}

pub fn opaque_id() -> String {
    random_string(ID_BYTES)
}

/// True if `s` could have come from this module; anything else is rejected
/// before a lookup.
pub fn is_well_formed(s: &str) -> bool {
    (s.len() == encoded_len(TOKEN_BYTES) || s.len() == encoded_len(ID_BYTES))
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn encoded_len(bytes: usize) -> usize {
    (bytes * 8).div_ceil(6)
}
