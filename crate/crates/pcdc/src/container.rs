//! Container file layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "PCDC"
//! version  1 byte   currently 1
//! method   1 byte   method id (see `MethodId`)
//! digest   8 bytes  leading bytes of SHA-256 over the canonical method config
//! length   varint   original byte count
//! payload  rest     method-specific stream
//! ```

use pcdc_core::bits::{read_varint, write_varint};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PCDC";
pub const VERSION: u8 = 1;
pub const DIGEST_LEN: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("not a container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    Version(u8),
    #[error("container header is truncated")]
    Truncated,
    #[error("unknown method id {0}")]
    UnknownMethod(u8),
    #[error("method {found} in container, but {expected} was requested")]
    MethodMismatch { expected: MethodId, found: MethodId },
    #[error("config digest mismatch: container was written with different method parameters")]
    DigestMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    Ac = 1,
    Ngram = 2,
    Trc = 3,
    Ttc = 4,
    Huffman0 = 5,
    External = 6,
}

impl MethodId {
    pub fn from_byte(b: u8) -> Result<Self, ContainerError> {
        Ok(match b {
            1 => MethodId::Ac,
            2 => MethodId::Ngram,
            3 => MethodId::Trc,
            4 => MethodId::Ttc,
            5 => MethodId::Huffman0,
            6 => MethodId::External,
            other => return Err(ContainerError::UnknownMethod(other)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Ac => "ac",
            MethodId::Ngram => "ngram",
            MethodId::Trc => "trc",
            MethodId::Ttc => "ttc",
            MethodId::Huffman0 => "huffman0",
            MethodId::External => "external",
        }
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub method: MethodId,
    pub digest: [u8; DIGEST_LEN],
    pub original_len: u64,
    pub payload: Vec<u8>,
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 24);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.method as u8);
        out.extend_from_slice(&self.digest);
        write_varint(&mut out, self.original_len);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn header_len(&self) -> usize {
        self.to_bytes().len() - self.payload.len()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, ContainerError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let fixed = 4 + 2 + DIGEST_LEN;
        if bytes.len() < fixed {
            return Err(ContainerError::Truncated);
        }
        if bytes[4] != VERSION {
            return Err(ContainerError::Version(bytes[4]));
        }
        let method = MethodId::from_byte(bytes[5])?;
        let mut digest = [0u8; DIGEST_LEN];
        digest.copy_from_slice(&bytes[6..fixed]);
        let (original_len, used) = read_varint(&bytes[fixed..]).map_err(|_| ContainerError::Truncated)?;
        Ok(Self {
            method,
            digest,
            original_len,
            payload: bytes[fixed + used..].to_vec(),
        })
    }

    /// Fails unless the container was written by `method` with a config
    /// hashing to `digest`.
    pub fn check(&self, method: MethodId, digest: &[u8; DIGEST_LEN]) -> Result<(), ContainerError> {
        if self.method != method {
            return Err(ContainerError::MethodMismatch {
                expected: method,
                found: self.method,
            });
        }
        if &self.digest != digest {
            return Err(ContainerError::DigestMismatch);
        }
        Ok(())
    }
}
