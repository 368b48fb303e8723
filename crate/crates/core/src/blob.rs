//! Binary tensor blobs: an 8-byte magic, a little-endian `u32` rank, one
//! `u64` per extent and the row-major `f64` payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"KDMPSTEN";

pub fn write_tensor<T: Scalar, W: Write>(t: &Tensor<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(t.rank() as u32).to_le_bytes())?;
    for &e in t.shape() {
        w.write_all(&(e as u64).to_le_bytes())?;
    }
    for &x in t.data() {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    Ok(())
}

/// Reads a blob and attaches the given leg names.
pub fn read_tensor<T: Scalar, R: Read, S: AsRef<str>>(mut r: R, legs: &[S]) -> Result<Tensor<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad tensor magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4) as usize;
    if rank != legs.len() {
        return Err(Error::Format(format!(
            "blob has rank {rank}, expected {}",
            legs.len()
        )));
    }
    let mut b8 = [0u8; 8];
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        r.read_exact(&mut b8)?;
        shape.push(u64::from_le_bytes(b8) as usize);
    }
    let len: usize = shape.iter().product();
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut b8)?;
        data.push(T::of(f64::from_le_bytes(b8)));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after tensor payload".into()));
    }
    Tensor::new(legs, &shape, data)
}

pub fn save_tensor<T: Scalar>(t: &Tensor<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(t, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor<T: Scalar, S: AsRef<str>>(path: &Path, legs: &[S]) -> Result<Tensor<T>> {
    read_tensor(BufReader::new(File::open(path)?), legs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_in_memory() {
        let t = Tensor::new(&["a", "b"], &[2, 3], vec![1.0, -2.0, 3.5, 0.0, 1e-300, 7.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&t, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 16 + 48);
        let back: Tensor = read_tensor(buf.as_slice(), &["a", "b"]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"NOTATENSxxxx".to_vec();
        let r: Result<Tensor> = read_tensor(buf.as_slice(), &["a"]);
        assert!(matches!(r, Err(Error::Format(_))));
    }
}
