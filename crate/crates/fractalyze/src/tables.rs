//! CSV output and the `vertex_id,value` sampled-function format.
//!
//! Vertex ids follow the vertex table: `V_0` first, then the new vertices of
//! each level in lexicographic order of their first `(word, corner)` pair.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use fractalyze_core::spectral::{SobolevScale, SpectrumLadder};
use fractalyze_core::{VertexTable, Word};

use crate::error::{AppError, AppResult};
use crate::num::fmt12;

fn csv_err(e: csv::Error) -> AppError {
    AppError::Format(format!("csv: {e}"))
}

pub fn write_vertex_function<W: Write>(out: W, values: &[f64]) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vertex_id", "value"]).map_err(csv_err)?;
    for (id, v) in values.iter().enumerate() {
        w.write_record([id.to_string(), fmt12(*v)]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| AppError::Format(e.to_string()))
}

/// Reads a sampled function; every id in `0..len` must occur exactly once.
pub fn read_vertex_function<R: Read>(input: R, len: usize) -> AppResult<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.len() != 2 || &headers[0] != "vertex_id" || &headers[1] != "value" {
        return Err(AppError::Format("sampled function needs the header `vertex_id,value`".into()));
    }
    let mut values = vec![None; len];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| AppError::Format(format!("row {}: {what}", line + 2));
        let id: usize = rec[0].trim().parse().map_err(|_| bad("vertex_id is not an integer"))?;
        let v: f64 = rec[1].trim().parse().map_err(|_| bad("value is not a number"))?;
        let slot = values.get_mut(id).ok_or_else(|| bad(&format!("vertex_id {id} is not below {len}")))?;
        if slot.replace(v).is_some() {
            return Err(bad(&format!("vertex_id {id} repeats")));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(id, v)| v.ok_or_else(|| AppError::Format(format!("vertex_id {id} is missing"))))
        .collect()
}

/// `l,re,im,dim,sigma_critical`, one row per eigenvalue with conjugates listed.
pub fn write_ladder<W: Write>(out: W, ladder: &SpectrumLadder, scale: &SobolevScale) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["l", "re", "im", "dim", "sigma_critical"]).map_err(csv_err)?;
    for (l, cls) in ladder.classes.iter().enumerate() {
        let sigma = fmt12(scale.critical(cls.magnitude));
        for z in cls.eigenvalues() {
            w.write_record([l.to_string(), fmt12(z.re), fmt12(z.im), cls.dim().to_string(), sigma.clone()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| AppError::Format(e.to_string()))
}

/// `vertex_id,level,word,corner` with the first cell reaching each vertex.
pub fn write_vertex_table<W: Write>(out: W, table: &VertexTable) -> AppResult<()> {
    let n = table.n_letters();
    let mut first = vec![None; table.len()];
    for k in 0..=table.level() {
        for c in 0..table.n_cells(k) {
            for (a, &v) in table.cell(k, c).iter().enumerate() {
                if first[v].is_none() {
                    first[v] = Some((k, c, a));
                }
            }
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vertex_id", "level", "word", "corner"]).map_err(csv_err)?;
    for (id, f) in first.iter().enumerate() {
        let (k, c, a) = f.expect("every vertex lies in a cell");
        let word = Word::from_index(c, k, n).to_string();
        w.write_record([id.to_string(), k.to_string(), word, (a + 1).to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| AppError::Format(e.to_string()))
}

pub fn write_matrix<W: Write>(out: W, m: &DMatrix<f64>) -> AppResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in 0..m.nrows() {
        w.write_record(m.row(r).iter().map(|&x| fmt12(x))).map_err(csv_err)?;
    }
    w.flush().map_err(|e| AppError::Format(e.to_string()))
}
