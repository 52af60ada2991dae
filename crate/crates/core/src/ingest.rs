//! LIBSVM text ingestion and label handling.
//!
//! Each non-blank line is `label idx:val idx:val ...` with 1-based, strictly
//! increasing feature indices. Explicit zeros are dropped on read.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::error::{DwdError, Result};
use crate::sparse::SparseColMatrix;

/// Parses a LIBSVM stream into a `d × n` matrix (one column per sample) and
/// the raw labels, verbatim.
///
/// `d` is the largest feature index seen unless `nrows` forces it; forcing a
/// value smaller than an index present in the data is an error.
pub fn parse_libsvm<R: BufRead>(reader: R, nrows: Option<usize>) -> Result<(SparseColMatrix, Vec<f64>)> {
    let mut labels = Vec::new();
    let mut col_ptr = vec![0usize];
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line.as_str(),
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok.parse().map_err(|_| DwdError::Parse {
            line: lineno,
            msg: format!("label {label_tok:?} is not a number"),
        })?;
        if !label.is_finite() {
            return Err(DwdError::Parse {
                line: lineno,
                msg: format!("label {label_tok:?} is not finite"),
            });
        }
        labels.push(label);

        let mut prev: usize = 0;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| DwdError::Parse {
                line: lineno,
                msg: format!("expected idx:val, found {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| DwdError::Parse {
                line: lineno,
                msg: format!("feature index {idx_s:?} is not a positive integer"),
            })?;
            if idx < 1 {
                return Err(DwdError::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if idx <= prev {
                return Err(DwdError::Parse {
                    line: lineno,
                    msg: format!("feature index {idx} does not increase (previous {prev})"),
                });
            }
            prev = idx;
            let val: f64 = val_s.parse().map_err(|_| DwdError::Parse {
                line: lineno,
                msg: format!("value {val_s:?} is not a number"),
            })?;
            if !val.is_finite() {
                return Err(DwdError::Parse {
                    line: lineno,
                    msg: format!("value {val_s:?} is not finite"),
                });
            }
            max_index = max_index.max(idx);
            if val != 0.0 {
                row_idx.push(idx - 1);
                values.push(val);
            }
        }
        col_ptr.push(row_idx.len());
    }

    if labels.is_empty() {
        return Err(DwdError::invalid("dataset contains no samples"));
    }
    let d = match nrows {
        Some(d) if d < max_index => {
            return Err(DwdError::invalid(format!(
                "feature index {max_index} exceeds the requested dimension {d}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    let n = labels.len();
    let x = SparseColMatrix::new(d, n, col_ptr, row_idx, values)?;
    Ok((x, labels))
}

/// Opens a dataset file, transparently decompressing `.gz` files.
pub fn open_dataset(path: impl AsRef<Path>) -> Result<Box<dyn BufRead>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let is_gz = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let inner: Box<dyn Read> = if is_gz {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(inner)))
}

pub fn read_libsvm_path(path: impl AsRef<Path>, nrows: Option<usize>) -> Result<(SparseColMatrix, Vec<f64>)> {
    parse_libsvm(open_dataset(path)?, nrows)
}

/// Writes the canonical LIBSVM form: labels and values in shortest
/// round-trip decimal, one sample per line.
pub fn write_libsvm<W: Write>(mut out: W, x: &SparseColMatrix, labels: &[f64]) -> Result<()> {
    if labels.len() != x.ncols() {
        return Err(DwdError::invalid(format!(
            "{} labels for {} samples",
            labels.len(),
            x.ncols()
        )));
    }
    for (j, label) in labels.iter().enumerate() {
        write!(out, "{label}")?;
        let (rows, vals) = x.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            write!(out, " {}:{}", i + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Mapping from the two raw label values to `{−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelMap {
    pub negative: f64,
    pub positive: f64,
}

impl LabelMap {
    /// Raw label for a predicted sign; nonpositive maps to the negative class.
    pub fn to_raw(&self, sign: f64) -> f64 {
        if sign > 0.0 {
            self.positive
        } else {
            self.negative
        }
    }

    pub fn to_signed(&self, raw: f64) -> Option<f64> {
        if raw == self.positive {
            Some(1.0)
        } else if raw == self.negative {
            Some(-1.0)
        } else {
            None
        }
    }
}

/// Maps exactly two distinct raw labels onto `{−1, +1}`; the numerically
/// larger one becomes `+1`.
pub fn binarize_labels(raw: &[f64]) -> Result<(LabelMap, Vec<f64>)> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in raw {
        if !distinct.contains(&v) {
            distinct.push(v);
            if distinct.len() > 2 {
                break;
            }
        }
    }
    if distinct.len() != 2 {
        return Err(DwdError::invalid(format!(
            "binary classification needs exactly two distinct labels, found {}{}",
            distinct.len(),
            if distinct.len() > 2 { "+" } else { "" }
        )));
    }
    let (lo, hi) = if distinct[0] < distinct[1] {
        (distinct[0], distinct[1])
    } else {
        (distinct[1], distinct[0])
    };
    let map = LabelMap {
        negative: lo,
        positive: hi,
    };
    let y = raw.iter().map(|&v| if v == hi { 1.0 } else { -1.0 }).collect();
    Ok((map, y))
}

/// `Z = X diag(y)`.
pub fn build_z(x: &SparseColMatrix, y: &[f64]) -> Result<SparseColMatrix> {
    if y.len() != x.ncols() {
        return Err(DwdError::invalid(format!(
            "label vector has length {}, matrix has {} columns",
            y.len(),
            x.ncols()
        )));
    }
    Ok(x.scale_columns(y))
}
