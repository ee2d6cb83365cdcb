//! Compression methods exposed by the CLI and the bench harness, and their
//! mapping onto container payloads.

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use pcdc_core::baseline;
use pcdc_core::bits::{read_varint, write_varint};
use pcdc_core::codecs::{ac_decode, ac_encode, trc_decode, trc_encode, ttc_decode, ttc_encode};
use pcdc_core::predictor::{ContextModel, ContextModelConfig, Predictor};
use pcdc_core::tokenizers::{
    detokenize_as_byte_tokens, detokenize_as_int, detokenize_as_text, tokenize_as_byte_tokens, tokenize_as_int,
    tokenize_as_text, ByteMapping, Vocabulary,
};
use pcdc_core::NGramModel;
use sha2::{Digest, Sha256};

use crate::container::{Container, MethodId, DIGEST_LEN};
use crate::external::{ExternalPredictor, ExternalPredictorSpec};

pub const DEFAULT_CAPACITY: usize = 1 << 18;

/// How bytes become tokens for the token-level methods.
#[derive(Clone)]
pub enum ByteStrategy {
    AsInt,
    AsByteTokens { mapping: Box<ByteMapping>, vocab_digest: [u8; 32] },
    AsText { vocab: Arc<Vocabulary>, vocab_digest: [u8; 32] },
}

impl std::fmt::Debug for ByteStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl ByteStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            ByteStrategy::AsInt => "int",
            ByteStrategy::AsByteTokens { .. } => "byte-tokens",
            ByteStrategy::AsText { .. } => "text",
        }
    }

    pub fn from_vocab(name: &str, vocab: Arc<Vocabulary>, vocab_digest: [u8; 32]) -> Result<Self> {
        Ok(match name {
            "int" => ByteStrategy::AsInt,
            "byte-tokens" => ByteStrategy::AsByteTokens {
                mapping: Box::new(ByteMapping::build(&vocab)?),
                vocab_digest,
            },
            "text" => ByteStrategy::AsText { vocab, vocab_digest },
            other => bail!("unknown byte strategy {other:?} (expected int, byte-tokens or text)"),
        })
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            ByteStrategy::AsInt => 256,
            ByteStrategy::AsByteTokens { mapping, .. } => mapping.alphabet_size(),
            ByteStrategy::AsText { vocab, .. } => vocab.size(),
        }
    }

    pub fn tokenize(&self, bytes: &[u8]) -> Result<Vec<u32>> {
        Ok(match self {
            ByteStrategy::AsInt => tokenize_as_int(bytes),
            ByteStrategy::AsByteTokens { mapping, .. } => tokenize_as_byte_tokens(bytes, mapping),
            ByteStrategy::AsText { vocab, .. } => tokenize_as_text(bytes, vocab)?,
        })
    }

    pub fn detokenize(&self, tokens: &[u32]) -> Result<Vec<u8>> {
        Ok(match self {
            ByteStrategy::AsInt => detokenize_as_int(tokens)?,
            ByteStrategy::AsByteTokens { mapping, .. } => detokenize_as_byte_tokens(tokens, mapping)?,
            ByteStrategy::AsText { vocab, .. } => detokenize_as_text(tokens, vocab)?,
        })
    }

    /// Only text tokenization changes the token count, so only it stores one.
    fn stores_count(&self) -> bool {
        matches!(self, ByteStrategy::AsText { .. })
    }

    fn canonical(&self) -> String {
        match self {
            ByteStrategy::AsInt => "int".into(),
            ByteStrategy::AsByteTokens { vocab_digest, .. } => format!("byte-tokens:{}", hex(vocab_digest)),
            ByteStrategy::AsText { vocab_digest, .. } => format!("text:{}", hex(vocab_digest)),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Which codec drives the context model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenCodec {
    Arithmetic,
    Rank,
    PrefixCode,
}

impl TokenCodec {
    fn id(self) -> MethodId {
        match self {
            TokenCodec::Arithmetic => MethodId::Ac,
            TokenCodec::Rank => MethodId::Trc,
            TokenCodec::PrefixCode => MethodId::Ttc,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Method {
    /// Adaptive order-k context model under one of the token codecs.
    Context {
        codec: TokenCodec,
        order: usize,
        capacity: usize,
        strategy: ByteStrategy,
    },
    Ngram { model: Arc<NGramModel>, model_digest: [u8; 32], model_bytes: u64 },
    Huffman0,
    External(ExternalPredictorSpec),
}

/// Result of compressing one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compressed {
    pub container: Container,
    /// Bytes charged to the model in the adjusted rate.
    pub model_bytes: u64,
}

impl Method {
    pub fn context(codec: TokenCodec, order: usize, strategy: ByteStrategy) -> Self {
        Method::Context {
            codec,
            order,
            capacity: DEFAULT_CAPACITY,
            strategy,
        }
    }

    pub fn ngram(model_file: &[u8]) -> Result<Self> {
        let model = NGramModel::deserialize(model_file).context("loading n-gram model")?;
        Ok(Method::Ngram {
            model: Arc::new(model),
            model_digest: Sha256::digest(model_file).into(),
            model_bytes: model_file.len() as u64,
        })
    }

    pub fn id(&self) -> MethodId {
        match self {
            Method::Context { codec, .. } => codec.id(),
            Method::Ngram { .. } => MethodId::Ngram,
            Method::Huffman0 => MethodId::Huffman0,
            Method::External(_) => MethodId::External,
        }
    }

    /// Human-readable label used in reports.
    pub fn label(&self) -> String {
        match self {
            Method::Context { codec, order, strategy, .. } => {
                format!("{}-o{}/{}", codec.id().name(), order, strategy.name())
            }
            Method::Ngram { .. } => "ngram".into(),
            Method::Huffman0 => "huffman0".into(),
            Method::External(spec) => format!("external/a{}", spec.alphabet_size),
        }
    }

    /// Canonical parameter string; its hash goes into the container.
    pub fn canonical_config(&self) -> String {
        match self {
            Method::Context {
                codec,
                order,
                capacity,
                strategy,
            } => format!(
                "{};order={};capacity={};blend=0;strategy={}",
                codec.id().name(),
                order,
                capacity,
                strategy.canonical()
            ),
            Method::Ngram { model_digest, .. } => format!("ngram;model={}", hex(model_digest)),
            Method::Huffman0 => "huffman0".into(),
            // The endpoint is deliberately excluded: the same model may be
            // served from different places.
            Method::External(spec) => format!(
                "external;alphabet={};model_bytes={};protocol={}",
                spec.alphabet_size,
                spec.model_bytes,
                crate::external::PROTOCOL_VERSION
            ),
        }
    }

    pub fn digest(&self) -> [u8; DIGEST_LEN] {
        let full = Sha256::digest(self.canonical_config().as_bytes());
        full[..DIGEST_LEN].try_into().expect("digest prefix")
    }

    pub fn compress(&self, data: &[u8]) -> Result<Compressed> {
        let (payload, model_bytes) = match self {
            // An empty input has nothing to code, whatever the method.
            _ if data.is_empty() => (Vec::new(), 0),
            Method::Context {
                codec,
                order,
                capacity,
                strategy,
            } => {
                let tokens = strategy.tokenize(data)?;
                let mut model = ContextModel::new(ContextModelConfig::new(*order, strategy.alphabet_size()).with_capacity(*capacity))?;
                let mut payload = Vec::new();
                if strategy.stores_count() {
                    write_varint(&mut payload, tokens.len() as u64);
                }
                match codec {
                    TokenCodec::Arithmetic => payload.extend(ac_encode(&mut model, &tokens)?),
                    TokenCodec::Rank => payload.extend(trc_encode(&mut model, &tokens)?),
                    TokenCodec::PrefixCode => payload.extend(ttc_encode(&mut model, &tokens)?.bytes),
                }
                (payload, model.model_size_bytes())
            }
            Method::Ngram { model, model_bytes, .. } => (model.compress(data).bytes, *model_bytes),
            Method::Huffman0 => (baseline::compress(data), 0),
            Method::External(spec) => {
                let client = ExternalPredictor::connect(spec)?;
                let tokens = tokenize_as_int(data);
                (ac_encode(client, &tokens)?, spec.model_bytes)
            }
        };
        Ok(Compressed {
            container: Container {
                method: self.id(),
                digest: self.digest(),
                original_len: data.len() as u64,
                payload,
            },
            model_bytes,
        })
    }

    pub fn decompress(&self, container: &Container) -> Result<Vec<u8>> {
        container.check(self.id(), &self.digest())?;
        let len = usize::try_from(container.original_len).map_err(|_| anyhow!("original length does not fit in memory"))?;
        let payload = &container.payload[..];
        if len == 0 {
            if !payload.is_empty() {
                bail!("empty original with a non-empty payload");
            }
            return Ok(Vec::new());
        }
        let out = match self {
            Method::Context {
                codec,
                order,
                capacity,
                strategy,
            } => {
                let (count, body) = if strategy.stores_count() {
                    let (n, used) = read_varint(payload)?;
                    (usize::try_from(n)?, &payload[used..])
                } else {
                    (len, payload)
                };
                let model = ContextModel::new(ContextModelConfig::new(*order, strategy.alphabet_size()).with_capacity(*capacity))?;
                let tokens = match codec {
                    TokenCodec::Arithmetic => ac_decode(model, body, count)?,
                    TokenCodec::Rank => trc_decode(model, body, count)?,
                    TokenCodec::PrefixCode => ttc_decode(model, body, count)?,
                };
                strategy.detokenize(&tokens)?
            }
            Method::Ngram { model, .. } => model.decompress(payload, len)?,
            Method::Huffman0 => baseline::decompress(payload, len)?,
            Method::External(spec) => {
                let client = ExternalPredictor::connect(spec)?;
                detokenize_as_int(&ac_decode(client, payload, len)?)?
            }
        };
        if out.len() != len {
            bail!("decoded {} bytes but the container records {len}", out.len());
        }
        Ok(out)
    }
}
