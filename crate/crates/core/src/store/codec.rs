//! Page codecs. `Lightweight` is DEFLATE (level 1); a page that does not
//! shrink is stored as is, which the reader detects from the expected length.

use miniz_oxide::deflate::compress_to_vec;
use miniz_oxide::inflate::decompress_to_vec_with_limit;
use serde::{Deserialize, Serialize};

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodecKind {
    Uncompressed,
    Lightweight,
}

impl CodecKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            CodecKind::Uncompressed => 0,
            CodecKind::Lightweight => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(CodecKind::Uncompressed),
            1 => Some(CodecKind::Lightweight),
            _ => None,
        }
    }
}

const DEFLATE_LEVEL: u8 = 1;

/// Worst-case bytes the codec adds to its input.
pub const FRAME_OVERHEAD: usize = 0;

pub fn compress_page(payload: &[u8], codec: CodecKind) -> Vec<u8> {
    match codec {
        CodecKind::Uncompressed => payload.to_vec(),
        CodecKind::Lightweight => {
            let packed = compress_to_vec(payload, DEFLATE_LEVEL);
            if packed.len() < payload.len() {
                packed
            } else {
                payload.to_vec()
            }
        }
    }
}

pub fn decompress_page(
    payload: &[u8],
    codec: CodecKind,
    expected_len: usize,
) -> Result<Vec<u8>, StoreError> {
    let out = match codec {
        CodecKind::Uncompressed => payload.to_vec(),
        CodecKind::Lightweight if payload.len() == expected_len => payload.to_vec(),
        CodecKind::Lightweight => decompress_to_vec_with_limit(payload, expected_len)
            .map_err(|e| StoreError::Codec(format!("inflate failed: {:?}", e.status)))?,
    };
    if out.len() != expected_len {
        return Err(StoreError::Codec(format!(
            "decompressed {} bytes, header says {expected_len}",
            out.len()
        )));
    }
    Ok(out)
}
