//! Client for out-of-process classifiers.
//!
//! Framing: the client writes one JSON object per line,
//! `{"id":"<id>","text":"<text>"}`, then an empty line ending the batch.
//! The classifier answers with one line per request,
//! `{"id":"<id>","label":"benign"|"malicious","score":<float>}`, in any
//! order, then an empty line. Lines end with `\n`; a trailing `\r` is
//! ignored.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::labeling::Label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExternalEndpoint {
    Tcp {
        addr: String,
    },
    Command {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    pub score: f64,
}

#[derive(Serialize)]
struct Request<'a> {
    id: &'a str,
    text: &'a str,
}

fn protocol(msg: impl Into<String>) -> ClassifyError {
    ClassifyError::ProtocolError(msg.into())
}

fn spawn_reader(r: impl Read + Send + 'static) -> mpsc::Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(r).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

fn exchange(
    texts: &[(String, String)],
    mut writer: impl Write,
    lines: &mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
) -> Result<Vec<Prediction>, ClassifyError> {
    let mut payload = Vec::new();
    for (id, text) in texts {
        serde_json::to_writer(&mut payload, &Request { id, text }).map_err(|e| protocol(e.to_string()))?;
        payload.push(b'\n');
    }
    payload.push(b'\n');
    writer
        .write_all(&payload)
        .map_err(|e| protocol(format!("sending batch: {e}")))?;
    writer.flush().map_err(|e| protocol(format!("sending batch: {e}")))?;

    let mut pending: HashMap<&str, usize> = texts.iter().enumerate().map(|(i, (id, _))| (id.as_str(), i)).collect();
    if pending.len() != texts.len() {
        return Err(protocol("duplicate request id"));
    }
    let mut out: Vec<Option<Prediction>> = vec![None; texts.len()];
    let deadline = Instant::now() + timeout;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        let line = match lines.recv_timeout(left) {
            Ok(Ok(l)) => l,
            Ok(Err(e)) => return Err(protocol(format!("reading response: {e}"))),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                return Err(ClassifyError::Timeout {
                    missing: pending.len(),
                    after: timeout,
                })
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(protocol("classifier closed the stream before ending the batch"))
            }
        };
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            break;
        }
        let p: Prediction =
            serde_json::from_str(line).map_err(|e| protocol(format!("bad response line {line:?}: {e}")))?;
        let slot = pending
            .remove(p.id.as_str())
            .ok_or_else(|| protocol(format!("unexpected or repeated id `{}`", p.id)))?;
        out[slot] = Some(p);
    }
    if !pending.is_empty() {
        let mut ids: Vec<&str> = pending.into_keys().collect();
        ids.sort_unstable();
        return Err(protocol(format!(
            "batch ended without responses for {}",
            ids.join(", ")
        )));
    }
    Ok(out.into_iter().map(|p| p.expect("every id answered")).collect())
}

/// Classify `(id, text)` pairs; predictions come back in request order.
pub fn classify_external(
    texts: &[(String, String)],
    endpoint: &ExternalEndpoint,
    timeout: Duration,
) -> Result<Vec<Prediction>, ClassifyError> {
    match endpoint {
        ExternalEndpoint::Tcp { addr } => {
            let stream = TcpStream::connect(addr).map_err(|e| protocol(format!("connecting to {addr}: {e}")))?;
            let reader = stream.try_clone().map_err(|e| protocol(e.to_string()))?;
            let lines = spawn_reader(reader);
            let result = exchange(texts, &stream, &lines, timeout);
            let _ = stream.shutdown(Shutdown::Both);
            result
        }
        ExternalEndpoint::Command { program, args } => {
            let mut child = Command::new(program)
                .args(args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| protocol(format!("starting {program}: {e}")))?;
            let lines = spawn_reader(child.stdout.take().expect("stdout is piped"));
            let stdin = child.stdin.take().expect("stdin is piped");
            let result = exchange(texts, stdin, &lines, timeout);
            let _ = child.kill();
            let _ = child.wait();
            result
        }
    }
}

#[cfg(test)]
mod tests {
    use std::net::TcpListener;

    use super::*;

    /// Answers each request line with `reply(id)`, then ends the batch.
    fn stub(reply: impl Fn(&str) -> Option<String> + Send + 'static, terminate: bool) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut w = stream.try_clone().unwrap();
            for line in BufReader::new(stream).lines() {
                let line = line.unwrap();
                if line.is_empty() {
                    if terminate {
                        w.write_all(b"\n").unwrap();
                    }
                    break;
                }
                let v: serde_json::Value = serde_json::from_str(&line).unwrap();
                if let Some(r) = reply(v["id"].as_str().unwrap()) {
                    w.write_all(r.as_bytes()).unwrap();
                    w.write_all(b"\n").unwrap();
                }
            }
            std::thread::sleep(Duration::from_millis(500));
        });
        addr
    }

    fn batch() -> Vec<(String, String)> {
        vec![("a".into(), "send sms".into()), ("b".into(), "camera".into())]
    }

    #[test]
    fn all_benign_stub() {
        let addr = stub(
            |id| Some(format!(r#"{{"id":"{id}","label":"benign","score":0.1}}"#)),
            true,
        );
        let out = classify_external(&batch(), &ExternalEndpoint::Tcp { addr }, Duration::from_secs(5)).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|p| p.label == Label::Benign));
        assert_eq!(out[1].id, "b");
    }

    #[test]
    fn unknown_id() {
        let addr = stub(|_| Some(r#"{"id":"zzz","label":"benign","score":0.1}"#.into()), true);
        assert!(matches!(
            classify_external(&batch(), &ExternalEndpoint::Tcp { addr }, Duration::from_secs(5)),
            Err(ClassifyError::ProtocolError(_))
        ));
    }

    #[test]
    fn silent_classifier_times_out() {
        let addr = stub(|_| None, false);
        assert!(matches!(
            classify_external(&batch(), &ExternalEndpoint::Tcp { addr }, Duration::from_millis(100)),
            Err(ClassifyError::Timeout { missing: 2, .. })
        ));
    }

    #[cfg(unix)]
    #[test]
    fn command_stub() {
        let endpoint = ExternalEndpoint::Command {
            program: "sed".into(),
            args: vec![
                "-u".into(),
                "-E".into(),
                r#"s/^\{"id":("[^"]*").*$/{"id":\1,"label":"malicious","score":0.9}/"#.into(),
            ],
        };
        let out = classify_external(&batch(), &endpoint, Duration::from_secs(5)).unwrap();
        assert!(out.iter().all(|p| p.label == Label::Malicious));
    }
}
