//! Line-delimited JSON protocol for out-of-process token-probability
//! providers.
//!
//! ```text
//! {"op":"hello"}                                   -> {"name":..,"vocab_size":..}
//! {"op":"score","text":..,"mode":"ar"|"mlm","mask_stop_words":bool}
//!                                                  -> {"per_token_logprobs":[..],"n":..}
//! malformed or unsupported                         -> {"error":..}
//! ```

use std::io::{self, BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::{ScoreMode, ScoreOptions, ScoredSequence, StatementScorer};

/// Environment variable holding the per-request timeout in milliseconds.
pub const TIMEOUT_ENV: &str = "KGQA_PROVIDER_TIMEOUT_MS";
const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Serialize)]
struct HelloRequest {
    op: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub op: String,
    pub text: String,
    pub mode: ScoreMode,
    #[serde(default)]
    pub mask_stop_words: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct HelloResponse {
    name: String,
    vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub per_token_logprobs: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Serialize)]
struct ErrorResponse {
    error: String,
}

fn timeout_from_env() -> Duration {
    let ms = std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_TIMEOUT_MS);
    Duration::from_millis(ms)
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    timeout: Duration,
}

impl Connection {
    fn round_trip(&mut self, request: &str) -> Result<Value> {
        let send = |w: &mut Box<dyn Write + Send>| -> io::Result<()> {
            w.write_all(request.as_bytes())?;
            w.write_all(b"\n")?;
            w.flush()
        };
        send(&mut self.writer).map_err(|e| Error::Provider(format!("write failed: {e}")))?;
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Provider(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Provider(format!("no response within {:?}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::Provider("provider closed the connection".into()))
            }
        };
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::Provider(format!("malformed response {line:?}: {e}")))?;
        if let Some(msg) = value.get("error") {
            let msg = msg.as_str().map_or_else(|| msg.to_string(), str::to_string);
            return Err(Error::Provider(msg));
        }
        Ok(value)
    }
}

/// Client side of the protocol. One request is in flight at a time.
pub struct ExternalProvider {
    name: String,
    vocab_size: usize,
    conn: Mutex<Connection>,
    child: Option<Child>,
}

impl ExternalProvider {
    /// Run `command` through `sh -c` and talk to it over stdin/stdout.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Provider(format!("cannot start {command:?}: {e}")))?;
        let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut provider = Self::connect(stdout, stdin)?;
        provider.child = Some(child);
        Ok(provider)
    }

    /// Handshake over an arbitrary byte stream pair (e.g. a socket).
    pub fn connect<R, W>(reader: R, writer: W) -> Result<Self>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut conn = Connection {
            writer: Box::new(writer),
            lines: rx,
            timeout: timeout_from_env(),
        };
        let hello = serde_json::to_string(&HelloRequest { op: "hello" }).unwrap();
        let value = conn.round_trip(&hello)?;
        let hello: HelloResponse = serde_json::from_value(value)
            .map_err(|e| Error::Provider(format!("bad handshake: {e}")))?;
        Ok(ExternalProvider {
            name: hello.name,
            vocab_size: hello.vocab_size,
            conn: Mutex::new(conn),
            child: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn request(&self, text: &str, mode: ScoreMode, mask_stop_words: bool) -> Result<ScoreResponse> {
        let req = ScoreRequest {
            op: "score".into(),
            text: text.to_string(),
            mode,
            mask_stop_words,
        };
        let line = serde_json::to_string(&req).unwrap();
        let value = self
            .conn
            .lock()
            .map_err(|_| Error::Provider("connection poisoned".into()))?
            .round_trip(&line)?;
        let resp: ScoreResponse = serde_json::from_value(value)
            .map_err(|e| Error::Provider(format!("bad score response: {e}")))?;
        if resp.n != resp.per_token_logprobs.len() {
            return Err(Error::Provider(format!(
                "n = {} but {} log-probabilities returned",
                resp.n,
                resp.per_token_logprobs.len()
            )));
        }
        if resp.n == 0 {
            return Err(Error::Provider("no scored positions".into()));
        }
        if resp.per_token_logprobs.iter().any(|l| !l.is_finite()) {
            return Err(Error::Provider("non-finite log-probability".into()));
        }
        Ok(resp)
    }
}

impl StatementScorer for ExternalProvider {
    fn score_text(&self, text: &str, opts: &ScoreOptions) -> Result<ScoredSequence> {
        let resp = self.request(text, opts.mode, opts.mask_stop_words)?;
        Ok(ScoredSequence::from_logprobs(Vec::new(), resp.per_token_logprobs))
    }
}

impl Drop for ExternalProvider {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn handle_line(line: &str, scorer: &dyn StatementScorer, name: &str, vocab_size: usize) -> String {
    let error = |msg: String| serde_json::to_string(&ErrorResponse { error: msg }).unwrap();
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return error(format!("malformed request: {e}")),
    };
    match value.get("op").and_then(Value::as_str) {
        Some("hello") => serde_json::to_string(&HelloResponse {
            name: name.to_string(),
            vocab_size,
        })
        .unwrap(),
        Some("score") => {
            let req: ScoreRequest = match serde_json::from_value(value) {
                Ok(r) => r,
                Err(e) => return error(format!("malformed score request: {e}")),
            };
            let opts = ScoreOptions {
                mask_stop_words: req.mask_stop_words,
                ..ScoreOptions::new(req.mode)
            };
            match scorer.score_text(&req.text, &opts) {
                Ok(s) => serde_json::to_string(&ScoreResponse {
                    n: s.per_token_logprobs.len(),
                    per_token_logprobs: s.per_token_logprobs,
                })
                .unwrap(),
                Err(e) => error(e.to_string()),
            }
        }
        Some(op) => error(format!("unsupported op {op:?}")),
        None => error("request has no op".into()),
    }
}

/// Serve the protocol until end of stream: one response line per request
/// line, in order.
pub fn serve<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    scorer: &dyn StatementScorer,
    name: &str,
    vocab_size: usize,
) -> io::Result<()> {
    for line in reader.lines() {
        let response = handle_line(&line?, scorer, name, vocab_size);
        writer.write_all(response.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}
