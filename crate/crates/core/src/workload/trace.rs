use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Cluster, Request};

use super::{rows_to_requests, AiWorkloadConfig, WorkloadError};

/// One inference call: arrival offset in seconds and token counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub timestamp: f64,
    pub prompt_tokens: f64,
    pub output_tokens: f64,
}

const TIMESTAMP: &[&str] = &["timestamp", "time", "arrival"];
const PROMPT: &[&str] = &["prompt_tokens", "contexttokens", "context_tokens", "input_tokens"];
const OUTPUT: &[&str] = &["output_tokens", "generatedtokens", "generated_tokens"];

fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Seconds from a plain number or a `YYYY-MM-DD HH:MM:SS[.frac]` stamp.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (date, time) = s.split_once([' ', 'T'])?;
    let time = time.trim_end_matches('Z');
    let mut d = date.split('-').map(|p| p.parse::<i64>().ok());
    let (y, mo, da) = (d.next()??, d.next()??, d.next()??);
    let mut t = time.split(':');
    let h: f64 = t.next()?.parse().ok()?;
    let mi: f64 = t.next()?.parse().ok()?;
    let sec: f64 = t.next()?.parse().ok()?;
    if !(1..=12).contains(&mo) || !(1..=31).contains(&da) {
        return None;
    }
    Some(days_from_civil(y, mo, da) as f64 * 86_400.0 + h * 3600.0 + mi * 60.0 + sec)
}

fn column(headers: &csv::StringRecord, names: &[&str], label: &'static str) -> Result<usize, WorkloadError> {
    headers
        .iter()
        .position(|h| names.contains(&h.trim().to_ascii_lowercase().as_str()))
        .ok_or(WorkloadError::MissingColumn(label))
}

/// Reads trace rows, re-based so the earliest arrival is at zero and sorted
/// by arrival. Malformed rows are skipped with a warning. A zero-byte input
/// is an error; a header without rows yields no rows.
pub fn read_trace_rows(reader: impl Read) -> Result<Vec<TraceRow>, WorkloadError> {
    let mut raw = Vec::new();
    BufReader::new(reader).read_to_end(&mut raw)?;
    if raw.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(WorkloadError::EmptyTrace);
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(raw.as_slice());
    let headers = rdr.headers()?.clone();
    let ti = column(&headers, TIMESTAMP, "timestamp")?;
    let pi = column(&headers, PROMPT, "prompt_tokens")?;
    let oi = column(&headers, OUTPUT, "output_tokens")?;
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for (line, rec) in rdr.records().enumerate() {
        let parsed = rec.ok().and_then(|rec| {
            let t = parse_timestamp(rec.get(ti)?)?;
            let p: f64 = rec.get(pi)?.parse().ok()?;
            let o: f64 = rec.get(oi)?.parse().ok()?;
            (p.is_finite() && o.is_finite() && p >= 0.0 && o >= 0.0)
                .then_some(TraceRow { timestamp: t, prompt_tokens: p, output_tokens: o })
        });
        match parsed {
            Some(r) => rows.push(r),
            None => {
                skipped += 1;
                warn!("skipping malformed trace row {}", line + 2);
            }
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} malformed trace rows");
    }
    let t0 = rows.iter().map(|r| r.timestamp).fold(f64::INFINITY, f64::min);
    for r in &mut rows {
        r.timestamp -= t0;
    }
    rows.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(rows)
}

/// Loads a CSV trace and maps it to AI requests at native timestamps.
pub fn ingest_trace(
    path: &Path,
    cluster: &Cluster,
    cfg: &AiWorkloadConfig,
    seed: u64,
) -> Result<Vec<Request>, WorkloadError> {
    let rows = read_trace_rows(std::fs::File::open(path)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows_to_requests(&rows, cluster, cfg, &mut rng)
}

/// One request per line.
pub fn write_requests(mut w: impl Write, requests: &[Request]) -> std::io::Result<()> {
    for r in requests {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_requests(r: impl Read) -> Result<Vec<Request>, WorkloadError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| WorkloadError::Json { line: i + 1, source })?);
    }
    Ok(out)
}
