//! Out-of-process embedding backends.
//!
//! The request is one JSON document on the child's stdin:
//!
//! ```json
//! {"method": "umap", "params": {...}, "seed": 0,
//!  "data": {"rows": n, "cols": d, "values": [...]}}
//! ```
//!
//! Large inputs carry `"path": "<csv file>"` instead of `"values"`. The
//! child answers on stdout with `{"coordinates": [[x, y], ...]}` or
//! `{"error": "..."}`; a nonzero exit status always means failure.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Inputs with more values than this go through a temporary CSV file.
pub const INLINE_VALUE_LIMIT: usize = 1_000_000;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl BackendCommand {
    pub fn new(program: impl Into<String>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
        }
    }

    /// Splits a command line on whitespace: program then arguments.
    pub fn parse(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        Some(Self {
            program: parts.next()?,
            args: parts.collect(),
        })
    }
}

/// Backend executables by method name (`umap` serves `external:umap`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRegistry {
    pub backends: BTreeMap<String, BackendCommand>,
    pub timeout: Duration,
    pub inline_limit: usize,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self {
            backends: BTreeMap::new(),
            timeout: DEFAULT_TIMEOUT,
            inline_limit: INLINE_VALUE_LIMIT,
        }
    }
}

impl BackendRegistry {
    pub fn register(&mut self, name: impl Into<String>, command: BackendCommand) {
        self.backends.insert(name.into(), command);
    }

    pub fn get(&self, name: &str) -> Option<&BackendCommand> {
        self.backends.get(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.backends
            .keys()
            .map(|k| format!("external:{k}"))
            .collect()
    }
}

#[derive(Deserialize)]
struct Response {
    coordinates: Option<Vec<Vec<f64>>>,
    error: Option<String>,
}

/// Builds the wire request. `path` replaces inline values when given.
pub fn build_request(
    method: &str,
    params: &BTreeMap<String, Value>,
    seed: u64,
    matrix: &DataMatrix,
    path: Option<&str>,
) -> Value {
    let mut data = serde_json::Map::new();
    data.insert("rows".into(), json!(matrix.rows()));
    data.insert("cols".into(), json!(matrix.cols()));
    match path {
        Some(p) => data.insert("path".into(), json!(p)),
        None => data.insert("values".into(), json!(matrix.values())),
    };
    json!({
        "method": method,
        "params": params,
        "seed": seed,
        "data": data,
    })
}

/// Runs `command` on `matrix` and validates an `n × 2` finite answer.
pub fn run_backend(
    name: &str,
    command: &BackendCommand,
    params: &BTreeMap<String, Value>,
    seed: u64,
    matrix: &DataMatrix,
    registry: &BackendRegistry,
) -> Result<DataMatrix> {
    let fail = |message: String, stderr: String| Error::Backend {
        backend: name.to_string(),
        message,
        stderr,
    };

    // keeps the temp file alive until the child is done
    let mut _spill = None;
    let request = if matrix.values().len() > registry.inline_limit {
        let mut file = tempfile::Builder::new()
            .prefix("vizrefine-")
            .suffix(".csv")
            .tempfile()?;
        let header: Vec<String> = (0..matrix.cols()).map(|j| format!("f{j}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        matrix
            .without_labels()
            .write_csv(file.as_file_mut(), &header)?;
        let path = file.path().to_string_lossy().into_owned();
        _spill = Some(file);
        build_request(name, params, seed, matrix, Some(&path))
    } else {
        build_request(name, params, seed, matrix, None)
    };
    let payload = serde_json::to_vec(&request)?;

    let mut child = Command::new(&command.program)
        .args(&command.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| {
            fail(
                format!("cannot start `{}`: {e}", command.program),
                String::new(),
            )
        })?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = thread::spawn(move || {
        // A child that exits without reading its input surfaces as a
        // broken pipe here; its exit status carries the real error.
        let _ = stdin.write_all(&payload);
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });
    let mut stderr = child.stderr.take().expect("piped stderr");
    let err_reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });

    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= registry.timeout {
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            let _ = out_reader.join();
            let stderr = err_reader.join().unwrap_or_default();
            return Err(fail(
                format!("timed out after {:?}", registry.timeout),
                stderr,
            ));
        }
        thread::sleep(Duration::from_millis(5));
    };
    let _ = writer.join();
    let out = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();

    let response: Option<Response> = serde_json::from_slice(&out).ok();
    if !status.success() {
        let detail = response
            .and_then(|r| r.error)
            .map_or_else(String::new, |e| format!(": {e}"));
        return Err(fail(format!("exited with {status}{detail}"), stderr));
    }
    let response = response.ok_or_else(|| {
        fail(
            format!(
                "malformed response: {}",
                String::from_utf8_lossy(&out)
                    .chars()
                    .take(200)
                    .collect::<String>()
            ),
            stderr.clone(),
        )
    })?;
    if let Some(e) = response.error {
        return Err(fail(e, stderr));
    }
    let coords = response.coordinates.ok_or_else(|| {
        fail(
            "response has neither `coordinates` nor `error`".into(),
            stderr.clone(),
        )
    })?;
    if coords.len() != matrix.rows() {
        return Err(fail(
            format!("expected {} rows, got {}", matrix.rows(), coords.len()),
            stderr,
        ));
    }
    let mut values = Vec::with_capacity(coords.len() * 2);
    for (i, row) in coords.iter().enumerate() {
        if row.len() != 2 {
            return Err(fail(
                format!("row {i} has {} coordinates, expected 2", row.len()),
                stderr,
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(fail(format!("row {i} is not finite"), stderr));
        }
        values.extend_from_slice(row);
    }
    DataMatrix::new(matrix.rows(), 2, values)
}
