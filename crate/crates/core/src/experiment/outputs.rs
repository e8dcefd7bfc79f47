use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::sim::write_trace;

use super::runner::{AblationRow, EpochSample, RunArtifacts, SweepRow};
use super::ExperimentError;

/// Writes `metrics.json`, plus `events.jsonl` and `prompts.jsonl` when the run was traced.
pub fn write_run_outputs(dir: &Path, run: &RunArtifacts) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut metrics = serde_json::to_vec_pretty(&run.report)?;
    metrics.push(b'\n');
    fs::write(dir.join("metrics.json"), metrics)?;
    if !run.outcome.trace.is_empty() {
        write_trace(&run.outcome.trace, BufWriter::new(File::create(dir.join("events.jsonl"))?))?;
    }
    if !run.exchanges.is_empty() {
        let mut w = BufWriter::new(File::create(dir.join("prompts.jsonl"))?);
        for x in &run.exchanges {
            let line = serde_json::json!({
                "epoch": x.epoch,
                "prompt": x.prompt,
                "reply": x.reply,
                "degraded": x.degraded,
            });
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn write_sweep_csv(w: impl Write, rows: &[SweepRow]) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv(r: impl Read) -> Result<Vec<SweepRow>, ExperimentError> {
    Ok(csv::Reader::from_reader(r).deserialize().collect::<Result<_, _>>()?)
}

pub fn write_ablation_csv(w: impl Write, rows: &[AblationRow]) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ablation_csv(r: impl Read) -> Result<Vec<AblationRow>, ExperimentError> {
    Ok(csv::Reader::from_reader(r).deserialize().collect::<Result<_, _>>()?)
}

pub fn write_epoch_samples(mut w: impl Write, samples: &[EpochSample]) -> Result<(), ExperimentError> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_epoch_samples(r: impl Read) -> Result<Vec<EpochSample>, ExperimentError> {
    let mut out = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
