//! Client for next-token predictors running in another process.
//!
//! Wire format: every message is a 4-byte big-endian length followed by that
//! many bytes of UTF-8 JSON. The client opens with
//! `{"version":1,"alphabet_size":N}` and the server must echo the same
//! values. After that each request is `{"ctx":[ids...]}` carrying the full
//! history, answered by `{"p":[floats...]}` with exactly `N` entries summing
//! to 1 within 1e-4. One request is in flight at a time.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use pcdc_core::coder::Distribution;
use pcdc_core::predictor::{quantize_probabilities, PredictError, Predictor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
/// Upper bound on a single message, to fail fast on garbage length prefixes.
pub const MAX_FRAME: usize = 64 << 20;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("i/o error talking to predictor: {0}")]
    Io(#[from] std::io::Error),
    #[error("predictor did not answer within {0} ms")]
    Timeout(u64),
    #[error("predictor closed the connection")]
    Closed,
    #[error("malformed predictor message: {0}")]
    Malformed(String),
    #[error("handshake mismatch: asked for {asked:?}, predictor answered {answered:?}")]
    Handshake { asked: Handshake, answered: Handshake },
    #[error("frame of {0} bytes exceeds the limit")]
    Oversized(usize),
}

impl From<TransportError> for PredictError {
    fn from(e: TransportError) -> Self {
        PredictError::Transport(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub version: u32,
    pub alphabet_size: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Request<'a> {
    ctx: std::borrow::Cow<'a, [u32]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Response {
    p: Vec<f64>,
}

pub fn write_frame<W: Write>(out: &mut W, json: &[u8]) -> std::io::Result<()> {
    out.write_all(&(json.len() as u32).to_be_bytes())?;
    out.write_all(json)?;
    out.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(input: &mut R) -> Result<Option<Vec<u8>>, TransportError> {
    let mut len = [0u8; 4];
    match input.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(TransportError::Oversized(len));
    }
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    Ok(Some(buf))
}

/// Where the predictor lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    /// Spawn a program and talk over its stdin/stdout.
    Stdio { program: String, args: Vec<String> },
    Tcp(String),
}

impl Transport {
    /// Parses `tcp:HOST:PORT` or `cmd:PROGRAM [ARGS...]` (whitespace split).
    pub fn parse(s: &str) -> Result<Self, String> {
        if let Some(addr) = s.strip_prefix("tcp:") {
            return Ok(Transport::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("cmd:") {
            let mut parts = cmd.split_whitespace().map(String::from);
            let program = parts.next().ok_or("empty predictor command")?;
            return Ok(Transport::Stdio {
                program,
                args: parts.collect(),
            });
        }
        Err(format!("predictor endpoint must start with tcp: or cmd:, got {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalPredictorSpec {
    pub transport: Transport,
    pub alphabet_size: usize,
    pub timeout_ms: u64,
    /// Declared weight size, charged in the adjusted rate.
    pub model_bytes: u64,
}

/// [`Predictor`] backed by a remote process.
pub struct ExternalPredictor {
    writer: Box<dyn Write + Send>,
    frames: Receiver<Result<Option<Vec<u8>>, TransportError>>,
    child: Option<Child>,
    alphabet: usize,
    timeout: Duration,
    model_bytes: u64,
}

impl ExternalPredictor {
    pub fn connect(spec: &ExternalPredictorSpec) -> Result<Self, TransportError> {
        let (writer, reader, child): (Box<dyn Write + Send>, Box<dyn Read + Send>, Option<Child>) = match &spec.transport {
            Transport::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true)?;
                (Box::new(stream.try_clone()?), Box::new(stream), None)
            }
            Transport::Stdio { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                (Box::new(stdin), Box::new(stdout), Some(child))
            }
        };
        // Reads happen on a helper thread so every wait can time out,
        // whatever the transport.
        let (tx, frames) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let frame = read_frame(&mut reader);
                let done = !matches!(frame, Ok(Some(_)));
                if tx.send(frame).is_err() || done {
                    break;
                }
            }
        });
        let mut client = Self {
            writer,
            frames,
            child,
            alphabet: spec.alphabet_size,
            timeout: Duration::from_millis(spec.timeout_ms),
            model_bytes: spec.model_bytes,
        };
        let asked = Handshake {
            version: PROTOCOL_VERSION,
            alphabet_size: spec.alphabet_size,
        };
        let answered: Handshake = client.call(&asked)?;
        if answered != asked {
            return Err(TransportError::Handshake { asked, answered });
        }
        Ok(client)
    }

    fn call<Q: Serialize, A: for<'de> Deserialize<'de>>(&mut self, request: &Q) -> Result<A, TransportError> {
        let json = serde_json::to_vec(request).map_err(|e| TransportError::Malformed(e.to_string()))?;
        write_frame(&mut self.writer, &json)?;
        let frame = match self.frames.recv_timeout(self.timeout) {
            Ok(frame) => frame?.ok_or(TransportError::Closed)?,
            Err(RecvTimeoutError::Timeout) => return Err(TransportError::Timeout(self.timeout.as_millis() as u64)),
            Err(RecvTimeoutError::Disconnected) => return Err(TransportError::Closed),
        };
        serde_json::from_slice(&frame).map_err(|e| TransportError::Malformed(e.to_string()))
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Predictor for ExternalPredictor {
    fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    fn next_distribution(&mut self, context: &[u32]) -> Result<Distribution, PredictError> {
        let response: Response = self.call(&Request { ctx: context.into() })?;
        if response.p.len() != self.alphabet {
            return Err(PredictError::WrongLength {
                expected: self.alphabet,
                got: response.p.len(),
            });
        }
        quantize_probabilities(&response.p)
    }

    fn update(&mut self, _: &[u32], _: u32) -> Result<(), PredictError> {
        // The server sees the full history with every request.
        Ok(())
    }

    fn model_size_bytes(&self) -> u64 {
        self.model_bytes
    }
}

/// Canned behaviours for the bundled test predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum StubMode {
    Uniform,
    /// Puts probability `confidence` on the token that really comes next in
    /// `message` and spreads the rest evenly.
    Oracle { message: Vec<u32>, confidence: f64 },
    /// Answers with one probability too few.
    WrongLength,
    /// Never answers a prediction request.
    Silent,
}

fn stub_answer(mode: &StubMode, alphabet: usize, ctx: &[u32]) -> Option<Vec<f64>> {
    match mode {
        StubMode::Uniform => Some(vec![1.0 / alphabet as f64; alphabet]),
        StubMode::Oracle { message, confidence } => {
            let rest = if alphabet > 1 { (1.0 - confidence) / (alphabet - 1) as f64 } else { 0.0 };
            let mut p = vec![rest; alphabet];
            match message.get(ctx.len()) {
                Some(&t) if (t as usize) < alphabet => p[t as usize] = if alphabet > 1 { *confidence } else { 1.0 },
                _ => p.fill(1.0 / alphabet as f64),
            }
            Some(p)
        }
        StubMode::WrongLength => Some(vec![1.0 / (alphabet - 1).max(1) as f64; alphabet - 1]),
        StubMode::Silent => None,
    }
}

/// Serves one client session on the given streams until it disconnects.
pub fn serve_stub<R: Read, W: Write>(input: R, mut output: W, mode: &StubMode) -> Result<(), TransportError> {
    let mut input = BufReader::new(input);
    let Some(hello) = read_frame(&mut input)? else {
        return Ok(());
    };
    let hello: Handshake = serde_json::from_slice(&hello).map_err(|e| TransportError::Malformed(e.to_string()))?;
    write_frame(&mut output, &serde_json::to_vec(&hello).expect("serializable"))?;
    while let Some(frame) = read_frame(&mut input)? {
        let req: Request = serde_json::from_slice(&frame).map_err(|e| TransportError::Malformed(e.to_string()))?;
        match stub_answer(mode, hello.alphabet_size, &req.ctx) {
            Some(p) => write_frame(&mut output, &serde_json::to_vec(&Response { p }).expect("serializable"))?,
            None => {
                // Hold the connection open without answering.
                let _ = input.fill_buf();
                std::thread::sleep(Duration::from_secs(3600));
            }
        }
    }
    Ok(())
}

/// Accepts connections on `listener` forever, one session per thread.
pub fn serve_stub_tcp(listener: TcpListener, mode: StubMode) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let mode = mode.clone();
        std::thread::spawn(move || {
            let _ = stream.set_nodelay(true);
            if let Ok(reader) = stream.try_clone() {
                let _ = serve_stub(reader, stream, &mode);
            }
        });
    }
    Ok(())
}
