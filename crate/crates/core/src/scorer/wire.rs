//! JSON-over-HTTP scorer protocol.
//!
//! ```text
//! GET  /v1/vocab       -> VocabResponse
//! POST /v1/logprobs    LogprobsRequest   -> LogprobsResponse
//! POST /v1/detokenize  DetokenizeRequest -> DetokenizeResponse
//! POST /v1/health      -> HealthResponse
//! ```
//!
//! Malformed requests get HTTP 400 with an [`ErrorResponse`]. Log-probabilities
//! of `-inf` are encoded as `null`.
//!
//! [`WireServer`] serves any in-process [`Scorer`] over this protocol. It is a
//! small blocking server meant for conformance tests and local replay.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use super::{LogProbRow, ReservedIds, Scorer, ScorerError, ScorerVocab, TokenId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: TokenId,
    pub piece: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabResponse {
    pub entries: Vec<VocabEntry>,
    pub bos_id: TokenId,
    pub eos_id: TokenId,
    pub sep_id: TokenId,
    pub x_id: TokenId,
    pub y_id: TokenId,
    pub z_id: TokenId,
}

impl From<ScorerVocab> for VocabResponse {
    fn from(vocab: ScorerVocab) -> Self {
        let entries = vocab
            .pieces()
            .iter()
            .enumerate()
            .map(|(id, piece)| VocabEntry { id: id as TokenId, piece: piece.clone() })
            .collect();
        Self {
            entries,
            bos_id: vocab.bos_id,
            eos_id: vocab.eos_id,
            sep_id: vocab.sep_id,
            x_id: vocab.x_id,
            y_id: vocab.y_id,
            z_id: vocab.z_id,
        }
    }
}

impl TryFrom<VocabResponse> for ScorerVocab {
    type Error = ScorerError;

    fn try_from(resp: VocabResponse) -> Result<Self, Self::Error> {
        let mut entries = resp.entries;
        entries.sort_by_key(|e| e.id);
        for (expected, entry) in entries.iter().enumerate() {
            if entry.id as usize != expected {
                return Err(ScorerError::InvalidVocab("token ids are not contiguous from 0".into()));
            }
        }
        let reserved = ReservedIds {
            bos: resp.bos_id,
            eos: resp.eos_id,
            sep: resp.sep_id,
            x: resp.x_id,
            y: resp.y_id,
            z: resp.z_id,
        };
        ScorerVocab::new(entries.into_iter().map(|e| e.piece).collect(), reserved)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobsRequest {
    pub condition: String,
    pub prefixes: Vec<Vec<TokenId>>,
    /// Ask for only the `m` most likely tokens per row plus a residual bucket.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate_top: Option<usize>,
}

/// A row on the wire: either dense over the whole vocabulary, or truncated to
/// `(id, logprob)` pairs plus the log-mass of everything omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireRow {
    Dense(Vec<Option<f64>>),
    Truncated { top: Vec<(TokenId, f64)>, residual: Option<f64> },
}

fn finite_or_null(v: f64) -> Option<f64> {
    (v != f64::NEG_INFINITY).then_some(v)
}

impl WireRow {
    pub fn dense(row: &LogProbRow) -> Self {
        WireRow::Dense(row.values.iter().copied().map(finite_or_null).collect())
    }

    /// Keep the `m` most likely tokens (ties by id) and fold the rest into the
    /// residual.
    pub fn truncated(row: &LogProbRow, m: usize) -> Self {
        let mut order: Vec<usize> = (0..row.values.len())
            .filter(|&i| row.values[i] != f64::NEG_INFINITY)
            .collect();
        order.sort_by(|&a, &b| row.values[b].total_cmp(&row.values[a]).then(a.cmp(&b)));
        let (kept, dropped) = order.split_at(m.min(order.len()));
        let mut rest: Vec<f64> = dropped.iter().map(|&i| row.values[i]).collect();
        rest.push(row.residual);
        WireRow::Truncated {
            top: kept.iter().map(|&i| (i as TokenId, row.values[i])).collect(),
            residual: finite_or_null(crate::logspace::logsumexp(&rest)),
        }
    }

    pub fn into_row(self, vocab_size: usize) -> Result<LogProbRow, ScorerError> {
        match self {
            WireRow::Dense(values) => {
                if values.len() != vocab_size {
                    return Err(ScorerError::Protocol(format!(
                        "row has {} entries, vocabulary has {vocab_size}",
                        values.len()
                    )));
                }
                Ok(LogProbRow::new(values.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect()))
            }
            WireRow::Truncated { top, residual } => {
                let mut values = vec![f64::NEG_INFINITY; vocab_size];
                for (id, lp) in top {
                    let slot = values
                        .get_mut(id as usize)
                        .ok_or_else(|| ScorerError::Protocol(format!("row references unknown id {id}")))?;
                    *slot = lp;
                }
                Ok(LogProbRow { values, residual: residual.unwrap_or(f64::NEG_INFINITY) })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobsResponse {
    pub rows: Vec<WireRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeRequest {
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
}

/// Blocking HTTP server exposing a [`Scorer`] over the wire protocol.
/// Stops when dropped.
pub struct WireServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl WireServer {
    /// Bind to `addr` (use port 0 for an ephemeral port) and start serving.
    pub fn start(scorer: Arc<dyn Scorer>, model_name: &str, addr: &str) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let model_name = model_name.to_string();
        let stop_flag = Arc::clone(&stop);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let scorer = Arc::clone(&scorer);
                let model_name = model_name.clone();
                std::thread::spawn(move || {
                    let _ = handle_connection(stream, scorer.as_ref(), &model_name);
                });
            }
        });
        Ok(Self { addr, stop, handle: Some(handle) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for WireServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

struct HttpResponse {
    status: u16,
    body: String,
}

impl HttpResponse {
    fn json<T: Serialize>(status: u16, value: &T) -> Self {
        Self { status, body: serde_json::to_string(value).expect("wire types serialize") }
    }

    fn error(status: u16, message: impl Into<String>) -> Self {
        Self::json(status, &ErrorResponse { error: message.into() })
    }
}

fn handle_connection(stream: TcpStream, scorer: &dyn Scorer, model_name: &str) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();

    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let response = route(&method, &path, &body, scorer, model_name);
    let reason = match response.status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        _ => "Internal Server Error",
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response.status,
        response.body.len(),
        response.body
    )?;
    stream.flush()
}

fn route(method: &str, path: &str, body: &[u8], scorer: &dyn Scorer, model_name: &str) -> HttpResponse {
    match (method, path) {
        ("GET", "/v1/vocab") => HttpResponse::json(200, &VocabResponse::from(scorer.vocab().clone())),
        ("GET" | "POST", "/v1/health") => HttpResponse::json(
            200,
            &HealthResponse { status: "ok".into(), model: model_name.into() },
        ),
        ("POST", "/v1/logprobs") => {
            let req: LogprobsRequest = match serde_json::from_slice(body) {
                Ok(req) => req,
                Err(e) => return HttpResponse::error(400, format!("malformed request: {e}")),
            };
            let prefixes: Vec<&[TokenId]> = req.prefixes.iter().map(Vec::as_slice).collect();
            match scorer.next_token_logprobs(&req.condition, &prefixes) {
                Ok(rows) => {
                    let rows = rows
                        .iter()
                        .map(|row| match req.truncate_top {
                            Some(m) => WireRow::truncated(row, m),
                            None => WireRow::dense(row),
                        })
                        .collect();
                    HttpResponse::json(200, &LogprobsResponse { rows })
                }
                Err(e) => HttpResponse::error(400, e.to_string()),
            }
        }
        ("POST", "/v1/detokenize") => {
            let req: DetokenizeRequest = match serde_json::from_slice(body) {
                Ok(req) => req,
                Err(e) => return HttpResponse::error(400, format!("malformed request: {e}")),
            };
            match scorer.detokenize(&req.tokens) {
                Ok(text) => HttpResponse::json(200, &DetokenizeResponse { text }),
                Err(e) => HttpResponse::error(400, e.to_string()),
            }
        }
        _ => HttpResponse::error(404, format!("no route for {method} {path}")),
    }
}
