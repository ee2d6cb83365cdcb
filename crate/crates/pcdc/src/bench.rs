//! Benchmark plans: every corpus crossed with every method, run on a bounded
//! worker pool, plus trend checks over the resulting rates.
//!
//! Plan file (JSON; relative paths resolve against the plan's directory):
//!
//! ```text
//! { "version": 1, "seed": 1, "workers": 4, "verify": true,
//!   "vocab": "fixtures/vocab/fixture_vocab.json",
//!   "output": "bench-out/report",
//!   "corpora": [ { "id": "english", "label": "language", "path": "..." },
//!                { "id": "synthetic", "label": "language",
//!                  "generate": { "kind": "english", "bytes": 65536 } } ],
//!   "methods": [ { "kind": "ac", "order": [0, 1, 3], "strategy": "int" },
//!                { "kind": "quant", "quantizer": ["gptq", "hqq"], "bits": [16, 8, 4, 3, 2] },
//!                { "kind": "huffman0" } ] }
//! ```
//!
//! Array values of `order`, `strategy`, `bits`, `quantizer`, `capacity` and
//! `rows` expand into one method per element (cartesian product).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use pcdc_core::quant::eval::{quantized_predictor_eval, EvalConfig, Quantizer, StaticContextModel};
use pcdc_core::quant::{GptqConfig, HqqConfig, QuantConfig};
use pcdc_core::tokenizers::Vocabulary;
use pcdc_core::{CompressionReport, NGramModel};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;

use crate::external::{ExternalPredictorSpec, Transport};
use crate::fixtures;
use crate::formats::load_vocab;
use crate::method::{ByteStrategy, Method, TokenCodec, DEFAULT_CAPACITY};
use crate::report::{BenchReport, Row, Status, Trend};

const EXPANDABLE: &[&str] = &["order", "strategy", "bits", "quantizer", "capacity", "rows"];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    #[serde(default = "one")]
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    #[serde(default = "yes")]
    pub verify: bool,
    pub vocab: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub corpora: Vec<CorpusSpec>,
    pub methods: Vec<Value>,
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub path: Option<PathBuf>,
    pub generate: Option<Generate>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    pub kind: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodSpec {
    Ac(ContextSpec),
    Trc(ContextSpec),
    Ttc(ContextSpec),
    Huffman0,
    Ngram {
        /// Corpus to train on, or a prebuilt model file.
        train: Option<PathBuf>,
        model: Option<PathBuf>,
    },
    Quant {
        quantizer: String,
        bits: u8,
        #[serde(default = "two")]
        order: usize,
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_group")]
        group_size: usize,
        #[serde(default = "default_samples")]
        calibration_samples: usize,
    },
    /// A host compressor run as `command < input > output`.
    System { name: String, command: Vec<String> },
    External {
        endpoint: String,
        #[serde(default = "default_alphabet")]
        alphabet_size: usize,
        #[serde(default)]
        model_bytes: u64,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec {
    pub order: usize,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    pub capacity: Option<usize>,
}

fn two() -> usize {
    2
}
fn default_rows() -> usize {
    1024
}
fn default_group() -> usize {
    64
}
fn default_samples() -> usize {
    2048
}
fn default_alphabet() -> usize {
    256
}
fn default_timeout() -> u64 {
    10_000
}
fn default_strategy() -> String {
    "int".into()
}

/// Expands array-valued fields into the cartesian product of methods.
pub fn expand_methods(methods: &[Value]) -> Result<Vec<MethodSpec>> {
    let mut out = Vec::new();
    for m in methods {
        let obj = m.as_object().ok_or_else(|| anyhow!("method entries must be objects"))?;
        let mut variants = vec![serde_json::Map::new()];
        for (k, v) in obj {
            match v {
                Value::Array(items) if EXPANDABLE.contains(&k.as_str()) => {
                    if items.is_empty() {
                        bail!("method field {k:?} is an empty list");
                    }
                    variants = variants
                        .into_iter()
                        .flat_map(|base| {
                            items.iter().map(move |item| {
                                let mut m = base.clone();
                                m.insert(k.clone(), item.clone());
                                m
                            })
                        })
                        .collect();
                }
                _ => variants.iter_mut().for_each(|m| {
                    m.insert(k.clone(), v.clone());
                }),
            }
        }
        for v in variants {
            let spec: MethodSpec = serde_json::from_value(Value::Object(v.clone()))
                .with_context(|| format!("invalid method {}", Value::Object(v)))?;
            out.push(spec);
        }
    }
    Ok(out)
}

struct Corpus {
    id: String,
    label: String,
    data: Arc<Vec<u8>>,
}

/// What a cell measured, for grouping into trends.
#[derive(Debug, Clone, PartialEq)]
enum CellKey {
    Context { codec: &'static str, order: usize, strategy: String },
    Quant { quantizer: String, bits: u8, order: usize, rows: usize },
    Other,
}

struct Shared {
    base: PathBuf,
    vocab: Option<(Arc<Vocabulary>, [u8; 32])>,
    verify: bool,
}

impl Shared {
    fn strategy(&self, name: &str) -> Result<ByteStrategy> {
        if name == "int" {
            return Ok(ByteStrategy::AsInt);
        }
        let (v, d) = self
            .vocab
            .as_ref()
            .ok_or_else(|| anyhow!("strategy {name:?} needs a \"vocab\" in the plan"))?;
        ByteStrategy::from_vocab(name, v.clone(), *d)
    }

    fn path(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }
}

fn key_of(spec: &MethodSpec) -> CellKey {
    match spec {
        MethodSpec::Ac(c) | MethodSpec::Trc(c) | MethodSpec::Ttc(c) => CellKey::Context {
            codec: match spec {
                MethodSpec::Ac(_) => "ac",
                MethodSpec::Trc(_) => "trc",
                _ => "ttc",
            },
            order: c.order,
            strategy: c.strategy.clone(),
        },
        MethodSpec::Quant {
            quantizer, bits, order, rows, ..
        } => CellKey::Quant {
            quantizer: quantizer.clone(),
            bits: *bits,
            order: *order,
            rows: *rows,
        },
        _ => CellKey::Other,
    }
}

fn report_for(corpus: &Corpus, method: &Method, verify: bool) -> Result<CompressionReport> {
    let c = method.compress(&corpus.data)?;
    if verify {
        let back = method.decompress(&c.container)?;
        if back != *corpus.data {
            bail!("roundtrip mismatch");
        }
    }
    Ok(CompressionReport::new(
        &corpus.id,
        method.label(),
        corpus.data.len() as u64,
        c.container.payload.len() as u64,
        c.model_bytes,
    )?)
}

fn run_system(corpus: &Corpus, name: &str, command: &[String]) -> Result<CompressionReport> {
    let (prog, args) = command.split_first().ok_or_else(|| anyhow!("empty system command"))?;
    let mut child = Command::new(prog)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .with_context(|| format!("spawning {prog}"))?;
    let mut stdin = child.stdin.take().expect("piped");
    let data = corpus.data.clone();
    let feeder = std::thread::spawn(move || stdin.write_all(&data));
    let out = child.wait_with_output()?;
    feeder.join().map_err(|_| anyhow!("input thread panicked"))??;
    if !out.status.success() {
        bail!("{prog} exited with {}", out.status);
    }
    Ok(CompressionReport::new(
        &corpus.id,
        format!("system:{name}"),
        corpus.data.len() as u64,
        out.stdout.len() as u64,
        0,
    )?)
}

fn run_cell(corpus: &Corpus, spec: &MethodSpec, shared: &Shared) -> Result<CompressionReport> {
    let context = |codec, c: &ContextSpec| -> Result<Method> {
        Ok(Method::Context {
            codec,
            order: c.order,
            capacity: c.capacity.unwrap_or(DEFAULT_CAPACITY),
            strategy: shared.strategy(&c.strategy)?,
        })
    };
    let method = match spec {
        MethodSpec::Ac(c) => context(TokenCodec::Arithmetic, c)?,
        MethodSpec::Trc(c) => context(TokenCodec::Rank, c)?,
        MethodSpec::Ttc(c) => context(TokenCodec::PrefixCode, c)?,
        MethodSpec::Huffman0 => Method::Huffman0,
        MethodSpec::Ngram { train, model } => {
            let file = match (train, model) {
                (Some(t), None) => {
                    let corpus = std::fs::read(shared.path(t)).with_context(|| format!("reading {}", t.display()))?;
                    NGramModel::build(&corpus).serialize()
                }
                (None, Some(m)) => std::fs::read(shared.path(m)).with_context(|| format!("reading {}", m.display()))?,
                _ => bail!("ngram needs exactly one of \"train\" or \"model\""),
            };
            Method::ngram(&file)?
        }
        MethodSpec::Quant {
            quantizer,
            bits,
            order,
            rows,
            group_size,
            calibration_samples,
        } => {
            let quantizer = match quantizer.as_str() {
                "rtn" => Quantizer::Rtn,
                "gptq" => Quantizer::Gptq(GptqConfig::default()),
                "hqq" => Quantizer::Hqq(HqqConfig::default()),
                other => bail!("unknown quantizer {other:?}"),
            };
            let model = StaticContextModel::train(&corpus.data, *order, *rows)?;
            let cfg = EvalConfig {
                quantizer,
                grid: QuantConfig::new(*bits).with_group_size(*group_size),
                calibration_samples: *calibration_samples,
            };
            return Ok(quantized_predictor_eval(&model, &cfg, &corpus.data, &corpus.id)?);
        }
        MethodSpec::System { name, command } => return run_system(corpus, name, command),
        MethodSpec::External {
            endpoint,
            alphabet_size,
            model_bytes,
            timeout_ms,
        } => Method::External(ExternalPredictorSpec {
            transport: Transport::parse(endpoint).map_err(|e| anyhow!(e))?,
            alphabet_size: *alphabet_size,
            timeout_ms: *timeout_ms,
            model_bytes: *model_bytes,
        }),
    };
    report_for(corpus, &method, shared.verify)
}

fn load_corpus(spec: &CorpusSpec, base: &Path, seed: u64) -> Result<Corpus> {
    let data = match (&spec.path, &spec.generate) {
        (Some(p), None) => std::fs::read(base.join(p)).with_context(|| format!("reading corpus {}", p.display()))?,
        (None, Some(g)) => match g.kind.as_str() {
            "english" => fixtures::english_like(seed, g.bytes),
            "code" => fixtures::code_like(seed, g.bytes),
            other => bail!("unknown generator {other:?}"),
        },
        _ => bail!("corpus {:?} needs exactly one of \"path\" or \"generate\"", spec.id),
    };
    Ok(Corpus {
        id: spec.id.clone(),
        label: spec.label.clone(),
        data: Arc::new(data),
    })
}

/// Reads a plan; relative paths inside it are resolved against its directory.
pub fn load_plan(path: &Path) -> Result<(BenchPlan, PathBuf)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading plan {}", path.display()))?;
    let plan: BenchPlan = serde_json::from_str(&text).context("parsing bench plan")?;
    if plan.version != 1 {
        bail!("unsupported plan version {}", plan.version);
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((plan, base))
}

pub fn run_plan(plan: &BenchPlan, base: &Path) -> Result<BenchReport> {
    let methods = expand_methods(&plan.methods)?;
    let corpora: Vec<Corpus> = plan
        .corpora
        .iter()
        .map(|c| load_corpus(c, base, plan.seed))
        .collect::<Result<_>>()?;
    let vocab = match &plan.vocab {
        Some(p) => {
            let (v, d) = load_vocab(&base.join(p))?;
            Some((Arc::new(v), d))
        }
        None => None,
    };
    let shared = Shared {
        base: base.to_path_buf(),
        vocab,
        verify: plan.verify,
    };
    let cells: Vec<(usize, usize)> = (0..corpora.len())
        .flat_map(|c| (0..methods.len()).map(move |m| (c, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.unwrap_or(0))
        .build()?;
    let outcomes: Vec<Result<CompressionReport>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(c, m)| run_cell(&corpora[c], &methods[m], &shared))
            .collect()
    });
    let mut rows = Vec::with_capacity(cells.len());
    let mut keyed = Vec::new();
    for (&(c, m), outcome) in cells.iter().zip(outcomes) {
        let corpus = &corpora[c];
        let row = match outcome {
            Ok(report) => {
                let binary = std::str::from_utf8(&corpus.data).is_err();
                keyed.push((corpus.id.clone(), binary, key_of(&methods[m]), report.gamma_r));
                Row {
                    corpus: corpus.id.clone(),
                    label: corpus.label.clone(),
                    method: report.method.clone(),
                    status: Status::Ok,
                    error: None,
                    report: Some(report),
                }
            }
            Err(e) => Row {
                corpus: corpus.id.clone(),
                label: corpus.label.clone(),
                method: method_name(&methods[m]),
                status: Status::Error,
                error: Some(format!("{e:#}")),
                report: None,
            },
        };
        rows.push(row);
    }
    Ok(BenchReport::new(plan.seed, rows, trends(&keyed)))
}

fn method_name(spec: &MethodSpec) -> String {
    match spec {
        MethodSpec::Ac(c) => format!("ac-o{}/{}", c.order, c.strategy),
        MethodSpec::Trc(c) => format!("trc-o{}/{}", c.order, c.strategy),
        MethodSpec::Ttc(c) => format!("ttc-o{}/{}", c.order, c.strategy),
        MethodSpec::Huffman0 => "huffman0".into(),
        MethodSpec::Ngram { .. } => "ngram".into(),
        MethodSpec::Quant { quantizer, bits, order, .. } => format!("static-o{order}/{quantizer}-{bits}bit"),
        MethodSpec::System { name, .. } => format!("system:{name}"),
        MethodSpec::External { alphabet_size, .. } => format!("external/a{alphabet_size}"),
    }
}

const STRATEGY_ORDER: [&str; 3] = ["int", "byte-tokens", "text"];

/// Context-length (text corpora): rates strictly decrease with order.
/// Quantization: rates never decrease as bits shrink. Byte strategy (binary
/// corpora, i.e. not valid UTF-8): int <= byte-tokens <= text.
fn trends(cells: &[(String, bool, CellKey, f64)]) -> Vec<Trend> {
    let mut context: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    let mut quant: BTreeMap<String, Vec<(u8, f64)>> = BTreeMap::new();
    let mut strategy: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for (corpus, binary, key, g) in cells {
        match key {
            CellKey::Context { codec, order, strategy: s } => {
                if !binary {
                    context.entry(format!("{corpus} {codec} {s}")).or_default().push((*order, *g));
                }
                if let Some(i) = STRATEGY_ORDER.iter().position(|x| x == s).filter(|_| *binary) {
                    strategy.entry(format!("{corpus} {codec} o{order}")).or_default().push((i, *g));
                }
            }
            CellKey::Quant {
                quantizer, bits, order, rows,
            } => quant
                .entry(format!("{corpus} {quantizer} o{order} r{rows}"))
                .or_default()
                .push((*bits, *g)),
            CellKey::Other => {}
        }
    }
    let mut out = Vec::new();
    for (group, mut pts) in context {
        pts.sort_by_key(|p| p.0);
        pts.dedup_by_key(|p| p.0);
        if pts.len() >= 2 {
            let holds = pts.windows(2).all(|w| w[1].1 < w[0].1);
            out.push(Trend {
                kind: "context-length".into(),
                group,
                points: pts.iter().map(|(o, g)| (o.to_string(), *g)).collect(),
                holds,
            });
        }
    }
    for (group, mut pts) in quant {
        pts.sort_by_key(|p| std::cmp::Reverse(p.0));
        pts.dedup_by_key(|p| p.0);
        if pts.len() >= 2 {
            let holds = pts.windows(2).all(|w| w[1].1 >= w[0].1);
            out.push(Trend {
                kind: "quantization".into(),
                group,
                points: pts.iter().map(|(b, g)| (format!("{b}bit"), *g)).collect(),
                holds,
            });
        }
    }
    for (group, mut pts) in strategy {
        pts.sort_by_key(|p| p.0);
        pts.dedup_by_key(|p| p.0);
        if pts.len() >= 2 {
            let holds = pts.windows(2).all(|w| w[0].1 <= w[1].1);
            out.push(Trend {
                kind: "byte-strategy".into(),
                group,
                points: pts.iter().map(|(i, g)| (STRATEGY_ORDER[*i].to_string(), *g)).collect(),
                holds,
            });
        }
    }
    out
}
