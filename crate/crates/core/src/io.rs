//! JSON and CSV file formats.
//!
//! Models, clusterings and segment lists are JSON. Weight and target
//! sequences are CSV with one header row and one row per frame; the header
//! names are `w0..w{m-1}` for weights and `x1,y1,z1,x2,...` for meshes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::model::BlendshapeModel;

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<BlendshapeModel> {
    read_json(path)
}

pub fn read_clustering(path: impl AsRef<Path>) -> Result<Clustering> {
    read_json(path)
}

/// A JSON list of vertex index lists.
pub fn read_segments(path: impl AsRef<Path>) -> Result<Vec<Vec<usize>>> {
    read_json(path)
}

pub fn weight_header(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("w{i}")).collect()
}

pub fn mesh_header(n: usize) -> Vec<String> {
    (1..=n)
        .flat_map(|l| [format!("x{l}"), format!("y{l}"), format!("z{l}")])
        .collect()
}

/// Writes `rows` under `header`; every row must match the header width.
pub fn write_matrix_csv<W: Write>(out: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (t, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::Frame {
                index: t,
                source: Box::new(Error::DimensionMismatch {
                    what: "csv row",
                    expected: header.len(),
                    got: row.len(),
                }),
            });
        }
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headed numeric CSV; returns the header and the rows.
pub fn read_matrix_csv<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (t, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Frame {
                    index: t,
                    source: Box::new(Error::InvalidArgument(format!("bad number {s:?}: {e}"))),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_weights(path: impl AsRef<Path>, weights: &[Vec<f64>]) -> Result<()> {
    let m = weights.first().map_or(0, Vec::len);
    write_matrix_csv(BufWriter::new(File::create(path)?), &weight_header(m), weights)
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    Ok(read_matrix_csv(BufReader::new(File::open(path)?))?.1)
}

pub fn write_targets(path: impl AsRef<Path>, targets: &[Vec<f64>]) -> Result<()> {
    let n = targets.first().map_or(0, |t| t.len() / 3);
    write_matrix_csv(BufWriter::new(File::create(path)?), &mesh_header(n), targets)
}

pub fn read_targets(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    read_weights(path)
}

/// One row of the per-frame results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub method: String,
    pub rmse: f64,
    pub cardinality: usize,
    pub time_ms: f64,
    pub iters: usize,
    pub converged: bool,
}

pub fn write_frame_records<W: Write>(out: W, records: &[FrameRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["frame", "method", "rmse", "cardinality", "time_ms", "iters", "converged"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frame_records<R: Read>(input: R) -> Result<Vec<FrameRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}
