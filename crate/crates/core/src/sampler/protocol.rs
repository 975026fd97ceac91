//! Newline-delimited JSON messages exchanged with a remote sampler.
//!
//! ```text
//! request:  {"id": "r1", "qubo": {"num_vars": n, "offset": r, "terms": [[i, j, c], ...]}, "num_reads": k}
//! response: {"id": "r1", "samples": [{"bits": [0, 1, ...], "energy": e, "count": m}, ...]}
//! error:    {"id": "r1", "error": "message"}
//! ```
//!
//! A line that cannot be parsed as a request gets an error with `"id": null`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{SampleSet, SamplerError};
use crate::qubo::{Qubo, WireQubo};

fn default_num_reads() -> usize {
    super::anneal::DEFAULT_NUM_READS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub qubo: WireQubo,
    #[serde(default = "default_num_reads")]
    pub num_reads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSample {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Samples { id: String, samples: Vec<WireSample> },
    Error { id: Option<String>, error: String },
}

impl Response {
    pub fn id(&self) -> Option<&str> {
        match self {
            Response::Samples { id, .. } => Some(id),
            Response::Error { id, .. } => id.as_deref(),
        }
    }

    pub fn from_set(id: String, set: &SampleSet<f64>) -> Self {
        let samples = set
            .iter()
            .map(|s| WireSample {
                bits: s.bits.clone(),
                energy: s.energy,
                count: s.count,
            })
            .collect();
        Response::Samples { id, samples }
    }
}

/// Answers one request line. `handle` receives the decoded QUBO and the
/// requested read count.
pub fn respond<F>(line: &str, handle: &mut F) -> Response
where
    F: FnMut(&Qubo<f64>, usize) -> Result<SampleSet<f64>, SamplerError>,
{
    let request: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            // Salvage the id when the line is valid JSON with a string id.
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string));
            return Response::Error {
                id,
                error: format!("malformed request: {e}"),
            };
        }
    };
    let qubo = match Qubo::from_wire(&request.qubo) {
        Ok(q) => q,
        Err(e) => {
            return Response::Error {
                id: Some(request.id),
                error: format!("invalid qubo: {e}"),
            }
        }
    };
    match handle(&qubo, request.num_reads) {
        Ok(set) => Response::from_set(request.id, &set),
        Err(e) => Response::Error {
            id: Some(request.id),
            error: e.to_string(),
        },
    }
}

/// Serves requests line by line until end of input, flushing after every
/// response. Blank lines are skipped. Returns the number of responses sent.
pub fn serve<R, W, F>(reader: R, mut writer: W, mut handle: F) -> io::Result<usize>
where
    R: BufRead,
    W: Write,
    F: FnMut(&Qubo<f64>, usize) -> Result<SampleSet<f64>, SamplerError>,
{
    let mut sent = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = respond(&line, &mut handle);
        serde_json::to_writer(&mut writer, &response)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        sent += 1;
    }
    Ok(sent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample_exact;

    fn exact(q: &Qubo<f64>, _: usize) -> Result<SampleSet<f64>, SamplerError> {
        sample_exact(q)
    }

    #[test]
    fn malformed_line_gets_null_id() {
        let r = respond("{not json", &mut exact);
        assert!(matches!(r, Response::Error { id: None, .. }));
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.starts_with(r#"{"id":null,"error":"#), "{text}");
    }

    #[test]
    fn missing_qubo_keeps_id() {
        let r = respond(r#"{"id": "x"}"#, &mut exact);
        assert_eq!(r.id(), Some("x"));
        assert!(matches!(r, Response::Error { .. }));
    }

    #[test]
    fn request_round_trip() {
        let line = r#"{"id":"a","qubo":{"num_vars":1,"offset":0.0,"terms":[[0,0,-1.0]]},"num_reads":5}"#;
        match respond(line, &mut exact) {
            Response::Samples { id, samples } => {
                assert_eq!(id, "a");
                assert_eq!(samples[0].bits, vec![1]);
                assert_eq!(samples[0].energy, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn serve_answers_each_line() {
        let input = concat!(
            r#"{"id":"1","qubo":{"num_vars":1,"offset":0.0,"terms":[]}}"#,
            "\n\ngarbage\n"
        );
        let mut out = Vec::new();
        assert_eq!(serve(input.as_bytes(), &mut out, exact).unwrap(), 2);
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains(r#""id":"1""#));
        assert!(lines[1].contains(r#""id":null"#));
    }
}
