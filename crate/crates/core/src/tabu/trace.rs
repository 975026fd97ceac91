use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Move,
    NewBest,
    Reroute,
    Intensify,
    Diversify,
}

/// One trace line. `cost`/`excess` describe the incumbent, except for
/// `new_best` where they describe the new global best. Wall time is only
/// recorded when requested, so that traces of equal runs are byte-identical
/// by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub iteration: u64,
    pub event: EventKind,
    pub cost: f64,
    pub excess: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler_calls: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallbacks: Option<usize>,
}

impl TraceEvent {
    pub fn new(iteration: u64, event: EventKind, cost: f64, excess: u64) -> Self {
        Self {
            iteration,
            event,
            cost,
            excess,
            elapsed_ms: None,
            kind: None,
            input_cost: None,
            sampler_calls: None,
            replaced: None,
            fallbacks: None,
        }
    }
}

pub fn write_trace<W: Write>(events: &[TraceEvent], mut out: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_trace<R: BufRead>(input: R) -> io::Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(io::Error::from)?);
    }
    Ok(events)
}

/// Global-best costs in order of discovery.
pub fn best_cost_sequence(events: &[TraceEvent]) -> Vec<f64> {
    events
        .iter()
        .filter(|e| e.event == EventKind::NewBest)
        .map(|e| e.cost)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optional_fields_are_omitted() {
        let e = TraceEvent::new(3, EventKind::NewBest, 12.5, 0);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"iteration":3,"event":"new_best","cost":12.5,"excess":0}"#);
    }

    #[test]
    fn round_trip() {
        let mut e = TraceEvent::new(1, EventKind::Reroute, 10.0, 0);
        e.sampler_calls = Some(4);
        e.input_cost = Some(11.0);
        let mut buf = Vec::new();
        write_trace(&[e.clone()], &mut buf).unwrap();
        assert_eq!(read_trace(&buf[..]).unwrap(), vec![e]);
    }
}
