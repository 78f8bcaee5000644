//! Dataset files: little-endian float64 with an 8-byte magic and a shape
//! header (`u64` rank, then `u64` extents), plus a plain CSV form.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CefError, Result};
use crate::linalg::Tensor;

pub const DATASET_MAGIC: &[u8; 8] = b"CEFDATA\0";

pub fn write_dataset<W: Write>(t: &Tensor, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(t.shape().len() as u64).to_le_bytes())?;
    for s in t.shape() {
        w.write_all(&(*s as u64).to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| CefError::Format("truncated dataset header".into()))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_dataset<R: Read>(r: R) -> Result<Tensor> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| CefError::Format("missing dataset magic".into()))?;
    if &magic != DATASET_MAGIC {
        return Err(CefError::Format("not a dataset file (bad magic)".into()));
    }
    let rank = read_u64(&mut r)? as usize;
    if rank > 8 {
        return Err(CefError::Format(format!("implausible rank {rank}")));
    }
    let shape = (0..rank).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let n: usize = shape.iter().product();
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() != 8 * n {
        return Err(CefError::Format(format!("payload has {} bytes, shape {shape:?} needs {}", buf.len(), 8 * n)));
    }
    let data = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Tensor::new(shape, data)
}

/// One row per sample with an `x0,x1,…` header.
pub fn write_dataset_csv<W: Write>(t: &Tensor, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    let cols = t.cols();
    let header: Vec<String> = (0..cols).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    if !t.is_empty() {
        for i in 0..t.rows() {
            let row: Vec<String> = t.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_dataset_csv`]. A header line is skipped if
/// it does not parse as numbers.
pub fn read_dataset_csv<R: Read>(r: R) -> Result<Tensor> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if lineno == 0 => continue,
            Err(e) => return Err(CefError::Format(format!("line {}: {e}", lineno + 1))),
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() {
        return Ok(Tensor::zeros(vec![0, 0]));
    }
    Tensor::from_rows(&rows, cols)
}

/// Picks the format from the file extension (`.csv` → CSV, otherwise binary).
pub fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn binary_roundtrip(rows in 1usize..6, cols in 1usize..5, seed in any::<u64>()) {
            let t = crate::data::sample_gaussian_dataset(cols, rows, seed);
            let mut buf = Vec::new();
            write_dataset(&t, &mut buf).unwrap();
            prop_assert_eq!(read_dataset(&buf[..]).unwrap(), t.clone());
            let mut csv = Vec::new();
            write_dataset_csv(&t, &mut csv).unwrap();
            prop_assert_eq!(read_dataset_csv(&csv[..]).unwrap(), t);
        }
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(read_dataset(&b"NOTADATA\0\0\0\0\0\0\0\0"[..]), Err(CefError::Format(_))));
    }
}
