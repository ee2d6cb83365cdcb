//! Static order-0 Huffman coder used as the always-available baseline.
//!
//! Layout: varint count of distinct bytes, then `(byte, code length)` pairs in
//! byte order, then the MSB-first Huffman bit stream. The original length is
//! carried by the caller.

use alloc::vec::Vec;

use thiserror::Error;

use crate::bits::{read_varint, write_varint, BitError, BitReader, BitWriter};
use crate::huffman::{CanonicalCode, HuffmanError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("baseline stream header is malformed")]
    BadHeader,
    #[error(transparent)]
    Huffman(#[from] HuffmanError),
    #[error(transparent)]
    Bits(#[from] BitError),
}

pub fn compress(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    if data.is_empty() {
        write_varint(&mut out, 0);
        return out;
    }
    let mut counts = [0u64; 256];
    for &b in data {
        counts[b as usize] += 1;
    }
    let weights: Vec<(u32, u64)> = (0..256u32)
        .filter(|&b| counts[b as usize] > 0)
        .map(|b| (b, counts[b as usize]))
        .collect();
    let code = CanonicalCode::from_weights(&weights).expect("non-empty weights");
    write_varint(&mut out, code.len() as u64);
    for (s, l) in code.lengths() {
        out.push(s as u8);
        out.push(l);
    }
    let mut bits = BitWriter::new();
    for &b in data {
        code.encode(b as u32, &mut bits);
    }
    out.extend_from_slice(bits.as_bytes());
    out
}

pub fn decompress(input: &[u8], original_len: usize) -> Result<Vec<u8>, BaselineError> {
    let (n, mut pos) = read_varint(input)?;
    if n == 0 {
        return if original_len == 0 {
            Ok(Vec::new())
        } else {
            Err(BaselineError::BadHeader)
        };
    }
    if n > 256 || input.len() < pos + 2 * n as usize {
        return Err(BaselineError::BadHeader);
    }
    let lengths: Vec<(u32, u8)> = input[pos..pos + 2 * n as usize]
        .chunks_exact(2)
        .map(|c| (c[0] as u32, c[1]))
        .collect();
    pos += 2 * n as usize;
    let code = CanonicalCode::from_lengths(&lengths)?;
    let mut reader = BitReader::new(&input[pos..]);
    let mut out = Vec::with_capacity(original_len);
    for _ in 0..original_len {
        out.push(code.decode(&mut reader)? as u8);
    }
    Ok(out)
}
