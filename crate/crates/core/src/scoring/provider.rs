use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One answer to be scored token by token.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreRequest<'a> {
    pub question_id: u64,
    pub answer_id: u64,
    pub question: &'a str,
    pub tokens: &'a [String],
}

/// Source of raw per-token content scores (pre-logistic).
///
/// Implementations must return exactly one score per token and be
/// deterministic for fixed inputs.
pub trait TokenScoreProvider: Send + Sync {
    fn token_scores(&self, req: &ScoreRequest<'_>) -> Result<Vec<f64>>;

    /// Whether calls may run concurrently. Serial providers are driven from
    /// one thread.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Gives every token the same raw score (zero by default, i.e. probability 1/2).
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantProvider {
    pub value: f64,
}

impl TokenScoreProvider for ConstantProvider {
    fn token_scores(&self, req: &ScoreRequest<'_>) -> Result<Vec<f64>> {
        Ok(vec![self.value; req.tokens.len()])
    }
}

/// Precomputed scores, one JSON line per answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScoreRecord {
    pub question_id: u64,
    pub answer_id: u64,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct FileProvider {
    scores: HashMap<(u64, u64), Vec<f64>>,
}

impl FileProvider {
    pub fn from_records(records: Vec<TokenScoreRecord>) -> Self {
        Self {
            scores: records
                .into_iter()
                .map(|r| ((r.question_id, r.answer_id), r.scores))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_records(crate::jsonl::load(path)?))
    }
}

impl TokenScoreProvider for FileProvider {
    fn token_scores(&self, req: &ScoreRequest<'_>) -> Result<Vec<f64>> {
        self.scores
            .get(&(req.question_id, req.answer_id))
            .cloned()
            .ok_or_else(|| {
                Error::Contract(format!(
                    "no precomputed scores for question {} answer {}",
                    req.question_id, req.answer_id
                ))
            })
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

/// Talks to an external scorer over a line protocol: one JSON request
/// `{question_id, answer_id, question, tokens}` per line out, one
/// `{"scores": [...]}` line back.
pub struct LineProtocolProvider {
    io: Mutex<(Box<dyn BufRead + Send>, Box<dyn Write + Send>)>,
    child: Option<Mutex<Child>>,
}

impl LineProtocolProvider {
    pub fn new(reader: Box<dyn BufRead + Send>, writer: Box<dyn Write + Send>) -> Self {
        Self {
            io: Mutex::new((reader, writer)),
            child: None,
        }
    }

    /// Spawns `program args...` and speaks the protocol over its stdio.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Config(format!("cannot start scorer {program:?}: {e}")))?;
        let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
        let stdout: ChildStdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            io: Mutex::new((Box::new(BufReader::new(stdout)), Box::new(stdin))),
            child: Some(Mutex::new(child)),
        })
    }
}

impl Drop for LineProtocolProvider {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            if let Ok(mut c) = child.lock() {
                let _ = c.kill();
                let _ = c.wait();
            }
        }
    }
}

impl TokenScoreProvider for LineProtocolProvider {
    fn token_scores(&self, req: &ScoreRequest<'_>) -> Result<Vec<f64>> {
        let mut guard = self
            .io
            .lock()
            .map_err(|_| Error::Contract("scorer connection poisoned".into()))?;
        let (reader, writer) = &mut *guard;
        serde_json::to_writer(&mut *writer, req)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Contract("scorer closed the connection".into()));
        }
        let resp: ScoreResponse =
            serde_json::from_str(line.trim()).map_err(|e| Error::Contract(format!("bad scorer response: {e}")))?;
        Ok(resp.scores)
    }

    fn concurrent(&self) -> bool {
        false
    }
}
