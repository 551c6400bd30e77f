//! Metrics CSVs, run manifest and trajectory logs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::env::{ControlInput, EnvState, N_OTHERS};
use crate::error::{Error, Result};

/// Writes `rows` as CSV with a header taken from the row type's field order.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            let joined: Vec<String> = items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            out.push((prefix.to_owned(), joined.join(",")));
        }
        Value::Null => out.push((prefix.to_owned(), "none".into())),
        Value::String(s) => out.push((prefix.to_owned(), s.clone())),
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}

/// `key = value` lines for every leaf of a serializable value, keys dotted by
/// nesting and sorted.
pub fn manifest_lines<T: Serialize>(value: &T) -> Result<Vec<(String, String)>> {
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    flatten("", &v, &mut out);
    out.sort();
    Ok(out)
}

pub fn write_manifest<T: Serialize>(path: &Path, value: &T, extra: &[(&str, String)]) -> Result<()> {
    let mut lines = manifest_lines(value)?;
    lines.extend(extra.iter().map(|(k, v)| ((*k).to_owned(), v.clone())));
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in lines {
        if k.contains('\n') || v.contains('\n') {
            return Err(Error::config(k, "manifest values must be single-line"));
        }
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Per-frame trajectory rows for external rendering.
pub struct TrajectoryWriter {
    w: csv::Writer<File>,
}

impl TrajectoryWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = ["episode", "frame", "t", "ego_x", "ego_v", "ego_lane", "a", "l_p", "choice", "outcome"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for i in 1..=N_OTHERS {
            header.extend([format!("veh{i}_x"), format!("veh{i}_v"), format!("veh{i}_lane")]);
        }
        w.write_record(&header)?;
        Ok(Self { w })
    }

    /// One row for `state`. `input` and `choice` are the control applied from
    /// it, absent on the final frame.
    pub fn frame(&mut self, episode: usize, state: &EnvState, input: Option<ControlInput>, choice: Option<usize>) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut rec = vec![
            episode.to_string(),
            state.frame.to_string(),
            state.t.to_string(),
            state.ego.x.to_string(),
            state.ego.v.to_string(),
            state.ego.lane.id().to_string(),
            opt(input.map(|c| c.a)),
            opt(input.map(|c| c.l_p)),
            choice.map_or(String::new(), |c| c.to_string()),
            state.outcome.as_str().to_owned(),
        ];
        for o in &state.others {
            rec.extend([o.x.to_string(), o.v.to_string(), o.lane.id().to_string()]);
        }
        self.w.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}
