//! `pcdc` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, corrupt input, digest
//! mismatch, predictor errors), 2 usage errors, 3 a bench trend was violated
//! under `--strict`.

use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pcdc::bench::{load_plan, run_plan};
use pcdc::container::Container;
use pcdc::external::{serve_stub, serve_stub_tcp, ExternalPredictorSpec, StubMode, Transport};
use pcdc::fixtures;
use pcdc::formats::{load_vocab, matrix_from_bytes, matrix_to_bytes, write_mapping_csv};
use pcdc::method::{ByteStrategy, Method, TokenCodec};
use pcdc_core::quant::eval::{quantized_predictor_eval, EvalConfig, Quantizer, StaticContextModel};
use pcdc_core::quant::{
    gptq_quantize, hqq::hqq_quantize_traced, layer_objective, lp_loss, rtn_quantize, GptqConfig, HqqConfig, Matrix,
    QuantConfig,
};
use pcdc_core::tokenizers::ByteMapping;
use pcdc_core::{raw_rate, CompressionReport, NGramModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "pcdc", version, about = "Predictor-driven lossless compression toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compress a file into a container.
    Compress {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Restore a container; the method flags must match those used to compress.
    Decompress {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Run a bench plan and write CSV and JSON reports.
    Bench {
        plan: PathBuf,
        /// Output path prefix; `.csv` and `.json` are appended.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Exit with status 3 if any trend check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Build an n-gram model from one or more corpus files.
    TrainNgram {
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Also report the raw rate on this file.
        #[arg(long)]
        held_out: Option<PathBuf>,
    },
    /// Quantize a matrix (or a trained context model) and report the errors.
    QuantizeDemo(QuantArgs),
    /// Dump the byte-to-token mapping of a vocabulary as CSV.
    ByteMap {
        vocab: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the synthetic corpora and fixture vocabulary.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        /// Also write the 1, 5 and 10 MiB n-gram training corpora.
        #[arg(long)]
        large: bool,
    },
    /// Serve a canned predictor over stdio or TCP (for testing clients).
    StubPredictor {
        #[arg(long, value_enum, default_value = "uniform")]
        mode: StubKind,
        /// Message whose next token the oracle mode predicts.
        #[arg(long)]
        message: Option<PathBuf>,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
        /// Listen on this address instead of stdio; prints the bound address.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StubKind {
    Uniform,
    Oracle,
    WrongLength,
    Silent,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodKind {
    Ac,
    Trc,
    Ttc,
    Ngram,
    Huffman0,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyKind {
    Int,
    ByteTokens,
    Text,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value = "ac")]
    method: MethodKind,
    /// Context-model order for ac, trc and ttc.
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Hash slots per context order (power of two).
    #[arg(long, default_value_t = pcdc::method::DEFAULT_CAPACITY)]
    capacity: usize,
    #[arg(long, value_enum, default_value = "int")]
    strategy: StrategyKind,
    /// Vocabulary JSON for the byte-tokens and text strategies.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// n-gram model file (from train-ngram).
    #[arg(long)]
    model: Option<PathBuf>,
    /// External predictor endpoint: tcp:HOST:PORT or "cmd:PROGRAM ARGS".
    #[arg(long)]
    predictor: Option<String>,
    #[arg(long, default_value_t = 256)]
    alphabet: usize,
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    /// Declared size of the external model, for the adjusted rate.
    #[arg(long, default_value_t = 0)]
    model_bytes: u64,
}

impl MethodArgs {
    fn build(&self) -> Result<Method> {
        let codec = match self.method {
            MethodKind::Ac => TokenCodec::Arithmetic,
            MethodKind::Trc => TokenCodec::Rank,
            MethodKind::Ttc => TokenCodec::PrefixCode,
            MethodKind::Huffman0 => return Ok(Method::Huffman0),
            MethodKind::Ngram => {
                let path = self.model.as_ref().context("--method ngram needs --model")?;
                return Method::ngram(&std::fs::read(path).with_context(|| format!("reading {}", path.display()))?);
            }
            MethodKind::External => {
                let endpoint = self.predictor.as_ref().context("--method external needs --predictor")?;
                return Ok(Method::External(ExternalPredictorSpec {
                    transport: Transport::parse(endpoint).map_err(anyhow::Error::msg)?,
                    alphabet_size: self.alphabet,
                    timeout_ms: self.timeout_ms,
                    model_bytes: self.model_bytes,
                }));
            }
        };
        let strategy = match self.strategy {
            StrategyKind::Int => ByteStrategy::AsInt,
            StrategyKind::ByteTokens | StrategyKind::Text => {
                let path = self.vocab.as_ref().context("this strategy needs --vocab")?;
                let (v, d) = load_vocab(path)?;
                let name = if matches!(self.strategy, StrategyKind::Text) { "text" } else { "byte-tokens" };
                ByteStrategy::from_vocab(name, Arc::new(v), d)?
            }
        };
        Ok(Method::Context {
            codec,
            order: self.order,
            capacity: self.capacity,
            strategy,
        })
    }
}

#[derive(Args)]
struct QuantArgs {
    /// Matrix file to quantize; a seeded Gaussian matrix is used otherwise.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Calibration inputs (cols x samples) for GPTQ; random if absent.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    rows: usize,
    #[arg(long, default_value_t = 64)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![8u8, 4, 3, 2])]
    bits: Vec<u8>,
    #[arg(long, default_value_t = 64)]
    group_size: usize,
    /// Instead of a matrix, train an order-k table on this corpus and report
    /// compression rates for each bit width.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 1024)]
    table_rows: usize,
    /// Write the generated matrix here (matrix file format).
    #[arg(long)]
    save_matrix: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Writes through a temporary file in the destination directory, so a failed
/// run never leaves a partial output behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn quantize_demo(a: &QuantArgs) -> Result<serde_json::Value> {
    if let Some(corpus) = &a.corpus {
        let data = read(corpus)?;
        let model = StaticContextModel::train(&data, a.order, a.table_rows)?;
        let mut rows: Vec<CompressionReport> = Vec::new();
        for q in [
            Quantizer::Rtn,
            Quantizer::Gptq(GptqConfig::default()),
            Quantizer::Hqq(HqqConfig::default()),
        ] {
            for &bits in std::iter::once(&16u8).chain(&a.bits) {
                let cfg = EvalConfig {
                    quantizer: q,
                    grid: QuantConfig::new(bits).with_group_size(a.group_size),
                    calibration_samples: 2048,
                };
                rows.push(quantized_predictor_eval(&model, &cfg, &data, &corpus.display().to_string())?);
            }
        }
        return Ok(json!({ "schema": "pcdc-quant-eval", "version": 1, "reports": rows }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let w = match &a.matrix {
        Some(p) => matrix_from_bytes(&read(p)?)?,
        None => Matrix::from_fn(a.rows, a.cols, |_, _| gaussian(&mut rng)),
    };
    if let Some(p) = &a.save_matrix {
        write_atomic(p, &matrix_to_bytes(&w))?;
    }
    let x = match &a.calibration {
        Some(p) => matrix_from_bytes(&read(p)?)?,
        None => Matrix::from_fn(w.cols(), 4 * w.cols(), |_, _| gaussian(&mut rng)),
    };
    let hqq = HqqConfig::default();
    let mut results = Vec::new();
    for &bits in &a.bits {
        let cfg = QuantConfig::new(bits).with_group_size(a.group_size);
        let rtn = rtn_quantize(&w, &cfg)?;
        let gptq = gptq_quantize(&w, &x, &cfg, &GptqConfig::default())?;
        let (hq, trace) = hqq_quantize_traced(&w, &cfg, &hqq)?;
        let entry = |q: &pcdc_core::QuantizedMatrix| -> Result<serde_json::Value> {
            let dq = q.dequantize();
            Ok(json!({
                "frobenius_error": dq.sub(&w)?.frobenius_sq().sqrt(),
                "layer_objective": layer_objective(&w, &dq, &x)?,
                "lp_loss": lp_loss(&w, &dq, hqq.p)?,
                "storage_bytes": q.storage_bytes(),
            }))
        };
        results.push(json!({
            "bits": bits,
            "group_size": a.group_size,
            "rtn": entry(&rtn)?,
            "gptq": entry(&gptq)?,
            "hqq": entry(&hq)?,
            "hqq_objective_trace": trace.objective,
        }));
    }
    Ok(json!({
        "schema": "pcdc-quant-demo",
        "version": 1,
        "rows": w.rows(),
        "cols": w.cols(),
        "full_precision_bytes": 2 * w.rows() * w.cols(),
        "results": results,
    }))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Cmd::Compress { input, output, method } => {
            let data = read(&input)?;
            let m = method.build()?;
            let c = m.compress(&data)?;
            let bytes = c.container.to_bytes();
            write_atomic(&output, &bytes)?;
            match raw_rate(bytes.len() as u64, data.len() as u64) {
                Ok(g) => {
                    let report = CompressionReport::new(input.display().to_string(), m.label(), data.len() as u64, bytes.len() as u64, c.model_bytes)?;
                    println!(
                        "{}: {} -> {} bytes, gamma_r {g:.4}, gamma_a {:.4}",
                        m.label(),
                        data.len(),
                        bytes.len(),
                        report.gamma_a
                    );
                }
                Err(_) => println!("{}: empty input -> {} bytes, gamma_r undefined", m.label(), bytes.len()),
            }
        }
        Cmd::Decompress { input, output, method } => {
            let container = Container::parse(&read(&input)?)?;
            let data = method.build()?.decompress(&container)?;
            write_atomic(&output, &data)?;
            println!("restored {} bytes", data.len());
        }
        Cmd::Bench {
            plan,
            out,
            workers,
            strict,
        } => {
            let (mut p, base) = load_plan(&plan)?;
            if workers.is_some() {
                p.workers = workers;
            }
            let report = run_plan(&p, &base)?;
            let prefix = out
                .or_else(|| p.output.as_ref().map(|o| base.join(o)))
                .unwrap_or_else(|| PathBuf::from("bench-report"));
            if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let json_path = prefix.with_extension("json");
            let csv_path = prefix.with_extension("csv");
            write_atomic(&json_path, report.to_json()?.as_bytes())?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            write_atomic(&csv_path, &csv)?;
            print!("{}", report.table());
            println!("wrote {} and {}", csv_path.display(), json_path.display());
            if strict && report.trends.iter().any(|t| !t.holds) {
                return Ok(ExitCode::from(3));
            }
        }
        Cmd::TrainNgram {
            corpus,
            output,
            held_out,
        } => {
            let docs: Vec<Vec<u8>> = corpus.iter().map(|p| read(p)).collect::<Result<_>>()?;
            let refs: Vec<&[u8]> = docs.iter().map(Vec::as_slice).collect();
            let model = NGramModel::build_from(&refs);
            let bytes = model.serialize();
            write_atomic(&output, &bytes)?;
            println!(
                "vocabulary {} words, serialized_size_bytes {}",
                model.vocab_size(),
                model.serialized_size_bytes()
            );
            if let Some(h) = held_out {
                let text = read(&h)?;
                let bits = model.compress(&text);
                let g = raw_rate(bits.bytes.len() as u64, text.len() as u64)?;
                println!("held-out {}: {} -> {} bytes, gamma_r {g:.4}", h.display(), text.len(), bits.bytes.len());
            }
        }
        Cmd::QuantizeDemo(args) => {
            let value = quantize_demo(&args)?;
            let text = serde_json::to_string_pretty(&value)? + "\n";
            match &args.output {
                Some(p) => write_atomic(p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Cmd::ByteMap { vocab, output } => {
            let (v, _) = load_vocab(&vocab)?;
            let mapping = ByteMapping::build(&v)?;
            let mut csv = Vec::new();
            write_mapping_csv(&mapping, &mut csv)?;
            match &output {
                Some(p) => write_atomic(p, &csv)?,
                None => std::io::stdout().write_all(&csv)?,
            }
            let interpolated = (0..=255u8)
                .filter(|&b| mapping.provenance(b) == pcdc_core::tokenizers::Provenance::Interpolated)
                .count();
            eprintln!(
                "injective: {}, direct: {}, interpolated: {interpolated}",
                mapping.is_injective(),
                256 - interpolated
            );
            if !mapping.is_injective() {
                bail!("mapping is not injective");
            }
        }
        Cmd::Fixtures { out, large } => {
            std::fs::create_dir_all(&out)?;
            let english = fixtures::english_like(fixtures::ENGLISH_SEED, 1 << 20);
            let files: Vec<(&str, Vec<u8>)> = vec![
                ("english_1m.txt", english),
                ("code_256k.txt", fixtures::code_like(fixtures::CODE_SEED, 256 << 10)),
                ("non_ascii.txt", fixtures::NON_ASCII_SAMPLE.as_bytes().to_vec()),
                ("pdf_prose.txt", fixtures::english_like(fixtures::PDF_PROSE_SEED, 400_000)),
                ("fixture_vocab.json", fixtures::fixture_vocab_json().into_bytes()),
            ];
            for (name, bytes) in files {
                write_atomic(&out.join(name), &bytes)?;
                println!("wrote {} ({} bytes)", out.join(name).display(), bytes.len());
            }
            if large {
                let train = fixtures::english_like(fixtures::NGRAM_TRAIN_SEED, 10 << 20);
                for mb in [1usize, 5, 10] {
                    let name = out.join(format!("ngram_train_{mb}m.txt"));
                    write_atomic(&name, &train[..mb << 20])?;
                    println!("wrote {}", name.display());
                }
                let held = out.join("ngram_held_out_1m.txt");
                write_atomic(&held, &fixtures::english_like(fixtures::NGRAM_HELD_OUT_SEED, 1 << 20))?;
                println!("wrote {}", held.display());
            }
        }
        Cmd::StubPredictor {
            mode,
            message,
            confidence,
            listen,
        } => {
            let mode = match mode {
                StubKind::Uniform => StubMode::Uniform,
                StubKind::WrongLength => StubMode::WrongLength,
                StubKind::Silent => StubMode::Silent,
                StubKind::Oracle => {
                    let path = message.context("--mode oracle needs --message")?;
                    StubMode::Oracle {
                        message: read(&path)?.into_iter().map(u32::from).collect(),
                        confidence,
                    }
                }
            };
            match listen {
                Some(addr) => {
                    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                    println!("listening on {}", listener.local_addr()?);
                    std::io::stdout().flush()?;
                    serve_stub_tcp(listener, mode)?;
                }
                None => serve_stub(std::io::stdin().lock(), std::io::stdout().lock(), &mode)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
