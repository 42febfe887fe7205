//! Text serialization of measures and flows.
//!
//! A measure file starts with the line `dim,theta` and then holds one row
//! `w,x1,...,xd` per atom. A flow is a directory of measure files plus
//! `index.csv` with one `t,filename` row per grid time. Numbers are written
//! with 17 significant digits so files round-trip exactly.

use super::{EmpiricalMeasure, MeasureFlow};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const FLOW_INDEX: &str = "index.csv";

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn measure_to_string(mu: &EmpiricalMeasure, theta: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{},{}", mu.dim(), fmt_num(theta));
    for (x, w) in mu.iter() {
        s.push_str(&fmt_num(w));
        for v in x {
            s.push(',');
            s.push_str(&fmt_num(*v));
        }
        s.push('\n');
    }
    s
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("line {line}: `{field}`: {e}")))
}

/// Returns the measure and the θ recorded in its header.
pub fn measure_from_str(text: &str) -> Result<(EmpiricalMeasure, f64)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty measure file".into()))?;
    let mut parts = header.split(',');
    let dim: usize = parts
        .next()
        .unwrap_or("")
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("line 1: dim: {e}")))?;
    let theta = parse_f64(
        parts
            .next()
            .ok_or_else(|| Error::Parse("line 1: missing theta".into()))?,
        1,
    )?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, found {}",
                i + 1,
                dim + 1,
                fields.len()
            )));
        }
        weights.push(parse_f64(fields[0], i + 1)?);
        for f in &fields[1..] {
            atoms.push(parse_f64(f, i + 1)?);
        }
    }
    Ok((EmpiricalMeasure::new(dim, atoms, weights)?, theta))
}

pub fn write_measure(path: &Path, mu: &EmpiricalMeasure, theta: f64) -> Result<()> {
    fs::write(path, measure_to_string(mu, theta))?;
    Ok(())
}

pub fn read_measure(path: &Path) -> Result<(EmpiricalMeasure, f64)> {
    measure_from_str(&fs::read_to_string(path)?)
}

/// Writes `measure_00000.csv`, ... and `index.csv` into `dir`.
pub fn write_flow(dir: &Path, flow: &MeasureFlow, theta: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut index = String::new();
    for (k, (t, mu)) in flow.times().iter().zip(flow.measures()).enumerate() {
        let name = format!("measure_{k:05}.csv");
        write_measure(&dir.join(&name), mu, theta)?;
        let _ = writeln!(index, "{},{name}", fmt_num(*t));
    }
    fs::write(dir.join(FLOW_INDEX), index)?;
    Ok(())
}

pub fn read_flow(dir: &Path) -> Result<(MeasureFlow, f64)> {
    let index = fs::read_to_string(dir.join(FLOW_INDEX))?;
    let mut times = Vec::new();
    let mut measures = Vec::new();
    let mut theta = f64::NAN;
    for (i, line) in index.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (t, name) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("index line {}: expected t,filename", i + 1)))?;
        times.push(parse_f64(t, i + 1)?);
        let (mu, th) = read_measure(&dir.join(name.trim()))?;
        theta = th;
        measures.push(mu);
    }
    Ok((MeasureFlow::new(times, measures)?, theta))
}
