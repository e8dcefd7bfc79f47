use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::event::EventKind;

/// One processed event with the post-event per-node utilization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub timestamp: f64,
    pub kind: EventKind,
    pub payload: u64,
    pub gpu_util: Vec<f64>,
    pub cpu_util: Vec<f64>,
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
