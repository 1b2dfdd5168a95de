//! Adapter for models that run in a child process.
//!
//! Each request is a CSV block written to the child's stdin: one header line
//! with the feature names, one line per row, then an empty line. The child
//! answers on stdout with exactly one line per row: a single decimal value
//! for regressors, or comma-separated class probabilities for classifiers.
//! Classifiers first send one line of comma-separated class labels per
//! response.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::model::{BlackBoxModel, ModelOutput};

/// Stderr kept for diagnostics, in bytes.
const STDERR_TAIL: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalOutput {
    Scalar,
    Probabilities,
}

struct Worker {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    stderr: Arc<Mutex<String>>,
    drain: Option<JoinHandle<()>>,
}

impl Worker {
    fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| adapter(format!("cannot start '{command}': {e}"), String::new()))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut err_pipe = child.stderr.take().expect("piped stderr");
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        let drain = std::thread::spawn(move || {
            let mut buf = [0u8; 1024];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap();
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
                if s.len() > STDERR_TAIL {
                    let mut cut = s.len() - STDERR_TAIL;
                    while !s.is_char_boundary(cut) {
                        cut += 1;
                    }
                    s.drain(..cut);
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            stdout,
            stderr,
            drain: Some(drain),
        })
    }

    fn diagnostics(&mut self) -> String {
        // Give a dying child a moment to flush stderr.
        if let Ok(None) = self.child.try_wait() {
            std::thread::sleep(std::time::Duration::from_millis(20));
        }
        let status = match self.child.try_wait() {
            Ok(Some(s)) => format!("exit status {s}; "),
            _ => String::new(),
        };
        format!("{status}{}", self.stderr.lock().unwrap())
    }

    fn fail(&mut self, message: impl Into<String>) -> Error {
        adapter(message, self.diagnostics())
    }

    fn request(&mut self, x: &FeatureMatrix, kind: ExternalOutput) -> Result<ModelOutput> {
        let mut payload = String::with_capacity(x.n_rows() * x.n_features() * 8);
        payload.push_str(&x.feature_names().join(","));
        payload.push('\n');
        for row in x.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    payload.push(',');
                }
                payload.push_str(&v.to_string());
            }
            payload.push('\n');
        }
        payload.push('\n');

        let mut stdin = self.stdin.take().ok_or_else(|| adapter("child stdin closed", String::new()))?;
        // Write and read concurrently so neither pipe can fill up and stall.
        let (write_result, stdin, read_result) = std::thread::scope(|scope| {
            let writer = scope.spawn(move || {
                let r = stdin.write_all(payload.as_bytes()).and_then(|_| stdin.flush());
                (r, stdin)
            });
            let read = read_response(&mut self.stdout, x.n_rows(), kind);
            let (w, stdin) = writer.join().expect("writer thread panicked");
            (w, stdin, read)
        });
        self.stdin = Some(stdin);
        if let Err(e) = write_result {
            return Err(self.fail(format!("cannot write request: {e}")));
        }
        read_result.map_err(|msg| self.fail(msg))
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved child exit on its own.
        self.stdin.take();
        let deadline = std::time::Instant::now() + std::time::Duration::from_millis(500);
        while matches!(self.child.try_wait(), Ok(None)) && std::time::Instant::now() < deadline {
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
        // A grandchild may still hold stderr open, so the drain thread is
        // left to finish by itself.
        self.drain.take();
    }
}

fn adapter(message: impl Into<String>, diagnostics: String) -> Error {
    Error::Adapter {
        message: message.into(),
        diagnostics,
    }
}

fn read_line(reader: &mut impl BufRead, what: &str) -> std::result::Result<String, String> {
    let mut line = String::new();
    match reader.read_line(&mut line) {
        Ok(0) => Err(format!("child closed its output while {what}")),
        Ok(_) => Ok(line.trim_end_matches(['\n', '\r']).to_owned()),
        Err(e) => Err(format!("cannot read child output while {what}: {e}")),
    }
}

fn parse_fields(line: &str, row: usize) -> std::result::Result<Vec<f64>, String> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| format!("malformed response line {row}: '{line}'"))
        })
        .collect()
}

fn read_response(
    reader: &mut impl BufRead,
    n: usize,
    kind: ExternalOutput,
) -> std::result::Result<ModelOutput, String> {
    match kind {
        ExternalOutput::Scalar => {
            let mut values = Vec::with_capacity(n);
            for i in 0..n {
                let line = read_line(reader, &format!("reading row {i} of {n}"))?;
                let fields = parse_fields(&line, i)?;
                if fields.len() != 1 {
                    return Err(format!("expected one value on response line {i}, got '{line}'"));
                }
                values.push(fields[0]);
            }
            ModelOutput::scalars(values).map_err(|e| e.to_string())
        }
        ExternalOutput::Probabilities => {
            let header = read_line(reader, "reading class labels")?;
            let classes: Arc<[String]> = header.split(',').map(|s| s.trim().to_owned()).collect();
            let mut values = Vec::with_capacity(n * classes.len());
            for i in 0..n {
                let line = read_line(reader, &format!("reading row {i} of {n}"))?;
                let fields = parse_fields(&line, i)?;
                if fields.len() != classes.len() {
                    return Err(format!(
                        "response line {i} has {} fields for {} classes",
                        fields.len(),
                        classes.len()
                    ));
                }
                values.extend(fields);
            }
            ModelOutput::probabilities(classes, values).map_err(|e| e.to_string())
        }
    }
}

/// A model served by a child process speaking the line protocol above.
///
/// Without `concurrent_safe`, one child handles every request in turn. With
/// it, concurrent callers each borrow a child from a pool that grows on
/// demand.
pub struct ExternalModel {
    command: String,
    kind: ExternalOutput,
    concurrent_safe: bool,
    idle: Mutex<Vec<Worker>>,
    serial: Mutex<()>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("command", &self.command)
            .field("kind", &self.kind)
            .field("concurrent_safe", &self.concurrent_safe)
            .finish_non_exhaustive()
    }
}

impl ExternalModel {
    /// Starts one child eagerly so a broken command fails here rather than
    /// in the middle of an explanation.
    pub fn new(command: impl Into<String>, kind: ExternalOutput, concurrent_safe: bool) -> Result<Self> {
        let command = command.into();
        let worker = Worker::spawn(&command)?;
        Ok(Self {
            command,
            kind,
            concurrent_safe,
            idle: Mutex::new(vec![worker]),
            serial: Mutex::new(()),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn checkout(&self) -> Result<Worker> {
        if let Some(w) = self.idle.lock().unwrap().pop() {
            return Ok(w);
        }
        Worker::spawn(&self.command)
    }
}

impl BlackBoxModel for ExternalModel {
    fn predict(&self, x: &FeatureMatrix) -> Result<ModelOutput> {
        let _turn = if self.concurrent_safe {
            None
        } else {
            Some(self.serial.lock().unwrap_or_else(|e| e.into_inner()))
        };
        let mut worker = self.checkout()?;
        let out = worker.request(x, self.kind)?;
        // Failed workers are dropped (and killed); healthy ones go back.
        self.idle.lock().unwrap().push(worker);
        Ok(out)
    }

    fn concurrent_safe(&self) -> bool {
        self.concurrent_safe
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalar_and_probability_responses() {
        let mut r = "1.5\n-2\n".as_bytes();
        assert_eq!(
            read_response(&mut r, 2, ExternalOutput::Scalar).unwrap(),
            ModelOutput::Scalars(vec![1.5, -2.0])
        );
        let mut r = "a,b\n0.25,0.75\n1,0\n".as_bytes();
        let out = read_response(&mut r, 2, ExternalOutput::Probabilities).unwrap();
        assert_eq!(out.classes().unwrap(), &["a", "b"]);
        assert_eq!(out.probability_row(1).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn rejects_malformed_responses() {
        assert!(read_response(&mut "x\n".as_bytes(), 1, ExternalOutput::Scalar).is_err());
        assert!(read_response(&mut "1,2\n".as_bytes(), 1, ExternalOutput::Scalar).is_err());
        assert!(read_response(&mut "1\n".as_bytes(), 2, ExternalOutput::Scalar).is_err());
        assert!(read_response(&mut "a,b\n0.5\n".as_bytes(), 1, ExternalOutput::Probabilities).is_err());
        assert!(read_response(&mut "a,b\n0.5,0.4\n".as_bytes(), 1, ExternalOutput::Probabilities).is_err());
    }
}
