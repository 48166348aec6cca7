//! Per-query attack traces and their JSON-lines encoding.
//!
//! The first line holds `{"header": {...}}`; every following line is one
//! [`TraceRecord`].

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    /// Hex digest of the experiment configuration; empty outside experiments.
    pub config_hash: String,
    pub seed: u64,
    pub attack: String,
    pub generator: String,
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based oracle query index.
    pub query_index: usize,
    /// Distance along the current direction that was probed.
    pub delta_probe: f64,
    /// `+1` adversarial, `-1` benign.
    pub decision: i8,
    /// Smallest verified boundary distance after this query.
    pub best_distance: f64,
    /// Wall-clock milliseconds since the attack started.
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
}

impl AttackTrace {
    pub fn new(header: TraceHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `best_distance` of the last record with `query_index <= budget`.
    pub fn best_at(&self, budget: usize) -> Option<f64> {
        let idx = self.records.partition_point(|r| r.query_index <= budget);
        idx.checked_sub(1).map(|i| self.records[i].best_distance)
    }

    /// Checks the trace invariants: indices run 1, 2, 3, ...; decisions are
    /// ±1; best distance and wall clock never decrease.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.query_index != i + 1 {
                return Err(Error::InvalidTrace(format!(
                    "record {i} has query index {} (expected {})",
                    r.query_index,
                    i + 1
                )));
            }
            if r.decision != 1 && r.decision != -1 {
                return Err(Error::InvalidTrace(format!("record {i} has decision {}", r.decision)));
            }
        }
        for (i, w) in self.records.windows(2).enumerate() {
            if w[1].best_distance > w[0].best_distance {
                return Err(Error::InvalidTrace(format!(
                    "best distance increases at query {}",
                    i + 2
                )));
            }
            if w[1].elapsed_ms < w[0].elapsed_ms {
                return Err(Error::InvalidTrace(format!("wall clock decreases at query {}", i + 2)));
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = HeaderLine {
            header: self.header.clone(),
        };
        serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses and validates a trace.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::InvalidTrace("empty trace file".into()))??;
        let header: HeaderLine = serde_json::from_str(&first)
            .map_err(|e| Error::InvalidTrace(format!("bad header line: {e}")))?;
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: TraceRecord = serde_json::from_str(&line)
                .map_err(|e| Error::InvalidTrace(format!("line {}: {e}", n + 2)))?;
            records.push(r);
        }
        let trace = AttackTrace {
            header: header.header,
            records,
        };
        trace.validate()?;
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header() -> TraceHeader {
        TraceHeader {
            config_hash: "abc".into(),
            seed: 4,
            attack: "bo".into(),
            generator: "perlin".into(),
            budget: 10,
        }
    }

    fn rec(i: usize, best: f64, t: f64) -> TraceRecord {
        TraceRecord {
            query_index: i,
            delta_probe: 0.5,
            decision: if i.is_multiple_of(2) { 1 } else { -1 },
            best_distance: best,
            elapsed_ms: t,
        }
    }

    #[test]
    fn validation_catches_each_violation() {
        let mut t = AttackTrace::new(header());
        t.records = vec![rec(1, 3.0, 0.0), rec(2, 2.0, 1.0)];
        t.validate().unwrap();

        let mut bad = t.clone();
        bad.records[1].best_distance = 4.0;
        assert!(bad.validate().is_err());
        let mut bad = t.clone();
        bad.records[1].query_index = 3;
        assert!(bad.validate().is_err());
        let mut bad = t.clone();
        bad.records[1].elapsed_ms = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = t;
        bad.records[0].decision = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reader_rejects_increasing_best() {
        let text = "{\"header\":{\"config_hash\":\"\",\"seed\":1,\"attack\":\"bo\",\"generator\":\"perlin\",\"budget\":2}}\n\
            {\"query_index\":1,\"delta_probe\":0.1,\"decision\":-1,\"best_distance\":1.0,\"elapsed_ms\":0.0}\n\
            {\"query_index\":2,\"delta_probe\":0.2,\"decision\":1,\"best_distance\":2.0,\"elapsed_ms\":0.1}\n";
        assert!(matches!(AttackTrace::read_jsonl(text.as_bytes()), Err(Error::InvalidTrace(_))));
    }

    #[test]
    fn best_at_prefix() {
        let mut t = AttackTrace::new(header());
        t.records = vec![rec(1, 5.0, 0.0), rec(2, 5.0, 0.0), rec(3, 1.0, 0.0)];
        assert_eq!(t.best_at(0), None);
        assert_eq!(t.best_at(2), Some(5.0));
        assert_eq!(t.best_at(3), Some(1.0));
        assert_eq!(t.best_at(300), Some(1.0));
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(steps in proptest::collection::vec((0.0f64..1.0, 0.0f64..5.0, any::<bool>()), 0..40)) {
            let mut t = AttackTrace::new(header());
            let (mut best, mut clock) = (10.0, 0.0);
            for (i, (drop, dt, adv)) in steps.into_iter().enumerate() {
                best -= drop;
                clock += dt;
                t.records.push(TraceRecord {
                    query_index: i + 1,
                    delta_probe: drop * 3.0,
                    decision: if adv { 1 } else { -1 },
                    best_distance: best,
                    elapsed_ms: clock,
                });
            }
            let mut buf = Vec::new();
            t.write_jsonl(&mut buf).unwrap();
            prop_assert_eq!(AttackTrace::read_jsonl(buf.as_slice()).unwrap(), t);
        }
    }
}
