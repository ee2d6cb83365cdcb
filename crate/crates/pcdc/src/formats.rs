//! On-disk formats other than the container: vocabulary JSON, byte-mapping
//! CSV and the binary matrix file.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pcdc_core::quant::Matrix;
use pcdc_core::tokenizers::{classify, ByteMapping, Provenance, Utf8Class, Vocabulary};
use sha2::{Digest, Sha256};

/// Vocabulary JSON: a single object mapping token strings to integer ids.
/// Byte-fallback tokens are spelled `<0xHH>` with two uppercase hex digits.
pub fn parse_vocab_json(text: &str) -> Result<Vocabulary> {
    let map: BTreeMap<String, u32> = serde_json::from_str(text).context("vocabulary must be a JSON object of token -> id")?;
    Ok(Vocabulary::from_entries(map)?)
}

pub fn load_vocab(path: &Path) -> Result<(Vocabulary, [u8; 32])> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading vocabulary {}", path.display()))?;
    let vocab = parse_vocab_json(&text)?;
    Ok((vocab, vocab_digest(&text)?))
}

/// Hash of the vocabulary's canonical form (entries sorted by token), so
/// formatting differences in the file do not change it.
pub fn vocab_digest(text: &str) -> Result<[u8; 32]> {
    let map: BTreeMap<String, u32> = serde_json::from_str(text)?;
    let mut h = Sha256::new();
    for (token, id) in &map {
        h.update((token.len() as u64).to_le_bytes());
        h.update(token.as_bytes());
        h.update(id.to_le_bytes());
    }
    Ok(h.finalize().into())
}

fn class_name(c: Utf8Class) -> &'static str {
    match c {
        Utf8Class::Ascii => "ascii",
        Utf8Class::Continuation => "continuation",
        Utf8Class::Lead2 => "lead2",
        Utf8Class::Lead3 => "lead3",
        Utf8Class::Lead4 => "lead4",
        Utf8Class::Invalid => "invalid",
    }
}

/// One row per byte: `byte,token_id,provenance,utf8_class`.
pub fn write_mapping_csv<W: Write>(mapping: &ByteMapping, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["byte", "token_id", "provenance", "utf8_class"])?;
    for b in 0..=255u8 {
        let prov = match mapping.provenance(b) {
            Provenance::Direct => "direct",
            Provenance::Interpolated => "interpolated",
        };
        w.write_record([format!("0x{b:02X}"), mapping.token(b).to_string(), prov.into(), class_name(classify(b)).into()])?;
    }
    w.flush()?;
    Ok(())
}

const MATRIX_MAGIC: &[u8; 4] = b"PCMX";
const MATRIX_VERSION: u8 = 1;

/// Matrix file: `"PCMX"`, version byte, rows and cols as u32 LE, then
/// `rows * cols` f64 LE values in row-major order.
pub fn matrix_to_bytes(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + m.data().len() * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    out.push(MATRIX_VERSION);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn matrix_from_bytes(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 13 || &bytes[..4] != MATRIX_MAGIC {
        bail!("not a matrix file");
    }
    if bytes[4] != MATRIX_VERSION {
        bail!("unsupported matrix file version {}", bytes[4]);
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into()?) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into()?) as usize;
    let body = &bytes[13..];
    if Some(body.len()) != rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) {
        bail!("matrix file holds {} value bytes, header says {rows} x {cols}", body.len());
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Matrix::from_vec(rows, cols, data)?)
}
