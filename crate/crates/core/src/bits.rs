//! MSB-first bit streams and LEB128 varints.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BitError {
    #[error("bit stream ended early")]
    Truncated,
    #[error("varint overflows 64 bits")]
    VarintOverflow,
}

/// Append-only bit buffer. Bits fill each byte from the most significant end.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_bit(&mut self, bit: bool) {
        let offset = (self.bit_len % 8) as u32;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> offset;
        }
        self.bit_len += 1;
    }

    /// Writes the low `len` bits of `code`, most significant first.
    pub fn push_bits(&mut self, code: u64, len: u32) {
        debug_assert!(len <= 64);
        for i in (0..len).rev() {
            self.push_bit((code >> i) & 1 == 1);
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bitstring(self) -> BitString {
        BitString {
            bytes: self.bytes,
            bit_len: self.bit_len,
        }
    }
}

/// A finished bit sequence; the tail of the last byte is zero padding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitString {
    pub bytes: Vec<u8>,
    pub bit_len: u64,
}

impl BitString {
    pub fn reader(&self) -> BitReader<'_> {
        BitReader::with_len(&self.bytes, self.bit_len)
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    bit_len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self::with_len(bytes, bytes.len() as u64 * 8)
    }

    pub fn with_len(bytes: &'a [u8], bit_len: u64) -> Self {
        let bit_len = bit_len.min(bytes.len() as u64 * 8);
        Self {
            bytes,
            bit_len,
            pos: 0,
        }
    }

    pub fn read_bit(&mut self) -> Result<bool, BitError> {
        if self.pos >= self.bit_len {
            return Err(BitError::Truncated);
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = (byte >> (7 - (self.pos % 8))) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, len: u32) -> Result<u64, BitError> {
        let mut value = 0u64;
        for _ in 0..len {
            value = (value << 1) | self.read_bit()? as u64;
        }
        Ok(value)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.bit_len - self.pos
    }
}

pub fn write_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Decodes a varint from the front of `input`, returning the value and the
/// number of bytes consumed.
pub fn read_varint(input: &[u8]) -> Result<(u64, usize), BitError> {
    let mut value = 0u64;
    for (i, &byte) in input.iter().enumerate() {
        let shift = 7 * i as u32;
        if shift >= 64 || (shift == 63 && byte & 0x7e != 0) {
            return Err(BitError::VarintOverflow);
        }
        value |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok((value, i + 1));
        }
    }
    Err(BitError::Truncated)
}
