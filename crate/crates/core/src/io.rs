//! File formats: the `VTF1` binary tensor format and the line-oriented
//! multi-index text format used for active sets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

const MAGIC: &[u8; 4] = b"VTF1";

pub fn write_vtf<W: Write>(t: &Tensor, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    let d = u32::try_from(t.ndim()).map_err(|_| Error::Format("too many axes".into()))?;
    w.write_all(&d.to_le_bytes())?;
    for &n in t.shape() {
        let n = u32::try_from(n).map_err(|_| Error::Format(format!("extent {n} exceeds u32")))?;
        w.write_all(&n.to_le_bytes())?;
    }
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated {what}: {e}")))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_vtf<R: Read>(mut r: R) -> Result<Tensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"VTF1\"")));
    }
    let d = read_u32(&mut r, "axis count")? as usize;
    if d > 64 {
        return Err(Error::Format(format!("implausible axis count {d}")));
    }
    let mut shape = Vec::with_capacity(d);
    for _ in 0..d {
        shape.push(read_u32(&mut r, "extent")? as usize);
    }
    if shape.contains(&0) {
        return Err(Error::Format(format!("zero extent in shape {shape:?}")));
    }
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &x| acc.checked_mul(x))
        .ok_or_else(|| Error::Format(format!("shape {shape:?} overflows")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::Format(format!("expected {} data bytes, found {}", n * 8, bytes.len())));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("tensor contains non-finite values".into()));
    }
    debug_assert_eq!(numel(&shape), data.len());
    Tensor::new(shape, data)
}

pub fn save_vtf(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    write_vtf(t, BufWriter::new(File::create(path)?))
}

pub fn load_vtf(path: impl AsRef<Path>) -> Result<Tensor> {
    read_vtf(BufReader::new(File::open(path)?))
}

/// Writes one 1-based multi-index per line, coordinates separated by spaces.
pub fn write_indices<W: Write>(indices: &[Vec<usize>], mut w: W) -> Result<()> {
    for idx in indices {
        let line: Vec<String> = idx.iter().map(|j| j.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format of [`write_indices`]; blank lines and `#` comments are skipped.
pub fn read_indices<R: Read>(r: R) -> Result<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let idx = body
            .split_whitespace()
            .map(|tok| match tok.parse::<usize>() {
                Ok(0) | Err(_) => Err(Error::Format(format!(
                    "line {}: '{tok}' is not a positive integer",
                    lineno + 1
                ))),
                Ok(v) => Ok(v),
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = out.first() {
            if first.len() != idx.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} coordinates, found {}",
                    lineno + 1,
                    first.len(),
                    idx.len()
                )));
            }
        }
        out.push(idx);
    }
    Ok(out)
}
