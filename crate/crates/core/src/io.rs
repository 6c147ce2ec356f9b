//! Binary tensor files.
//!
//! Layout, little-endian, no padding:
//!
//! | bytes        | content                         |
//! |--------------|---------------------------------|
//! | 4            | magic `CTEN`                    |
//! | 1            | version `0x01`                  |
//! | 4            | rank (`u32`)                    |
//! | 4 × rank     | dims (`u32` each)               |
//! | 4 × product  | values (`f32`, row-major)       |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"CTEN";
pub const VERSION: u8 = 0x01;

/// Size of the header for a tensor of the given rank.
pub fn header_len(rank: usize) -> usize {
    MAGIC.len() + 1 + 4 + 4 * rank
}

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    let rank = u32::try_from(t.dims().len()).map_err(|_| Error::Format("rank does not fit in u32".into()))?;
    let mut buf = Vec::with_capacity(header_len(t.dims().len()) + 4 * t.data().len());
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&rank.to_le_bytes());
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} does not fit in u32")))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, expected CTEN".into()));
    }
    let version = cur.take(1)?[0];
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rank = cur.u32()? as usize;
    // every dim needs four bytes, so a rank beyond the remaining length is truncated or bogus
    if rank == 0 || rank > cur.remaining() / 4 {
        return Err(Error::Format(format!("invalid rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(cur.u32()? as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4).map(|_| n))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    if count == 0 {
        return Err(Error::Format(format!("zero-sized dimension in {dims:?}")));
    }
    if cur.remaining() != count * 4 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, dims {dims:?} need {}",
            cur.remaining(),
            count * 4
        )));
    }
    let data = cur.bytes[cur.pos..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let buf = encode_tensor(t)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_tensor(&fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format("truncated header".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.cten");
        let t = crate::tensor::gen_tensor(&[3, 3], 5).unwrap();
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(
            t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(back.dims(), &[3, 3]);
    }

    #[test]
    fn one_by_one_file_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.cten");
        let t = Tensor::new(vec![1, 1], vec![0.0]).unwrap();
        write_tensor(&path, &t).unwrap();
        // 4 magic + 1 version + 4 rank + 2 * 4 dims + 4 payload
        assert_eq!(fs::metadata(&path).unwrap().len(), 21);
        assert_eq!(header_len(2) + 4, 21);
    }

    #[test]
    fn bad_magic() {
        let mut buf = encode_tensor(&Tensor::new(vec![1], vec![1.0]).unwrap()).unwrap();
        buf[0] = b'X';
        assert!(matches!(decode_tensor(&buf), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload() {
        let buf = encode_tensor(&Tensor::new(vec![2], vec![1.0, 2.0]).unwrap()).unwrap();
        assert!(matches!(decode_tensor(&buf[..buf.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode_tensor(&buf[..3]), Err(Error::Format(_))));
    }

    #[test]
    fn overflowing_dims() {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.extend_from_slice(&3u32.to_le_bytes());
        for _ in 0..3 {
            buf.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(decode_tensor(&buf), Err(Error::Format(_))));
    }

    #[test]
    fn huge_rank() {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode_tensor(&buf), Err(Error::Format(_))));
    }
}
