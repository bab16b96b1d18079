use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use super::{RaggedSequenceSet, SequenceBatch};
use crate::error::{Error, Result};

/// Reads a long-format sequence file.
///
/// Header `seq_id,step,c0,...,c{d-1}`; one row per time step. Empty cells
/// are missing values and come back as NaN.
pub fn load_sequences_csv(path: impl AsRef<Path>) -> Result<RaggedSequenceSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_sequences_csv(BufReader::new(file))
}

pub fn parse_sequences_csv<R: Read>(reader: R) -> Result<RaggedSequenceSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.len() < 3 || &header[0] != "seq_id" || &header[1] != "step" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `seq_id,step,c0,...`".into(),
        });
    }
    for (c, name) in header.iter().skip(2).enumerate() {
        if name != format!("c{c}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column `c{c}`, found `{name}`"),
            });
        }
    }
    let dim = header.len() - 2;

    let mut groups: BTreeMap<u64, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != dim + 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} channels, found {}", dim, rec.len().saturating_sub(2)),
            });
        }
        let int = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!("{what} `{s}` is not a non-negative integer"),
            })
        };
        let id = int(&rec[0], "seq_id")?;
        let step = int(&rec[1], "step")?;
        let mut values = Vec::with_capacity(dim);
        for cell in rec.iter().skip(2) {
            if cell.is_empty() {
                values.push(f64::NAN);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{cell}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("`{cell}` is not finite"),
                    });
                }
                values.push(v);
            }
        }
        if groups.entry(id).or_default().insert(step, values).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate step {step} for seq_id {id}"),
            });
        }
    }
    if groups.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let seqs = groups
        .into_values()
        .map(|steps| {
            let len = steps.len();
            let flat: Vec<f64> = steps.into_values().flatten().collect();
            Array2::from_shape_vec((len, dim), flat).expect("row widths checked")
        })
        .collect();
    RaggedSequenceSet::new(seqs)
}

/// Writes a batch in the long format read by [`load_sequences_csv`].
pub fn write_sequences_csv(batch: &SequenceBatch, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("seq_id,step");
    for c in 0..batch.dim() {
        let _ = write!(out, ",c{c}");
    }
    out.push('\n');
    for i in 0..batch.n() {
        for (t, row) in batch.sequence(i).rows().into_iter().enumerate() {
            let _ = write!(out, "{i},{t}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    write_string(path.as_ref(), &out)
}

/// Headerless rows of comma-separated decimals.
///
/// Uses the shortest representation that parses back to the same `f64`,
/// so a written matrix reloads bit for bit.
pub fn format_matrix_csv(m: ArrayView2<'_, f64>) -> String {
    let mut out = String::with_capacity(m.len() * 12);
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(m: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    write_string(path.as_ref(), &format_matrix_csv(m))
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(BufReader::new(file))
}

pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut flat = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {c} columns, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for cell in rec.iter() {
            flat.push(cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{cell}` is not a number"),
            })?);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, cols), flat).expect("row widths checked"))
}

fn write_string(path: &Path, s: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
