//! Portable binary field format.
//!
//! Layout (all little-endian):
//!
//! ```text
//! 0..12   magic  b"NLSGS-FIELD\0"
//! 12..16  u32    format version (1)
//!         u64    dim
//!         u64    n, once per axis
//!         f64    L, once per axis
//!         f64    values, n^dim of them, row-major (x₁, x₂)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{NlsError, Result};
use crate::grid::{Field, Grid, GridSpec};

pub const MAGIC: &[u8; 12] = b"NLSGS-FIELD\0";
pub const VERSION: u32 = 1;

pub fn encode(u: &Field) -> Vec<u8> {
    let g = u.grid();
    let dim = g.dim();
    let mut out = Vec::with_capacity(16 + 8 + 16 * dim + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    for _ in 0..dim {
        out.extend_from_slice(&(g.n() as u64).to_le_bytes());
    }
    for axis in 0..dim {
        out.extend_from_slice(&g.box_length(axis).to_le_bytes());
    }
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        if end > self.bytes.len() {
            return Err(NlsError::InvalidField(format!(
                "truncated field data at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Header of an encoded field: dimension, points per axis and box lengths.
pub fn decode_header(bytes: &[u8]) -> Result<(usize, Vec<usize>, Vec<f64>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(12)? != MAGIC {
        return Err(NlsError::InvalidField("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(NlsError::InvalidField(format!(
            "unsupported format version {version}"
        )));
    }
    let dim = r.u64()? as usize;
    if dim == 0 || dim > 3 {
        return Err(NlsError::InvalidField(format!("bad dimension {dim}")));
    }
    let ns = (0..dim)
        .map(|_| r.u64().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let ls = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    Ok((dim, ns, ls))
}

/// Decodes a field, building its grid with the given lattice period.
pub fn decode(bytes: &[u8], period: f64) -> Result<Field> {
    let (dim, ns, ls) = decode_header(bytes)?;
    if ns.iter().any(|&n| n != ns[0]) {
        return Err(NlsError::InvalidField(
            "axes with different point counts are not supported".into(),
        ));
    }
    let grid = Grid::new(GridSpec {
        dim,
        box_length: ls,
        n: ns[0],
        period,
    })?;
    decode_on(bytes, &grid)
}

/// Decodes a field onto an existing grid, which must match the header.
pub fn decode_on(bytes: &[u8], grid: &Grid) -> Result<Field> {
    let (dim, ns, ls) = decode_header(bytes)?;
    let spec = grid.spec();
    let same = dim == spec.dim
        && ns.iter().all(|&n| n == spec.n)
        && ls
            .iter()
            .zip(&spec.box_length)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs());
    if !same {
        return Err(NlsError::GridMismatch);
    }
    let header = 16 + 8 + 16 * dim;
    let body = &bytes[header..];
    if body.len() != 8 * grid.len() {
        return Err(NlsError::InvalidField(format!(
            "expected {} value bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(grid, values)
}

pub fn write_field(path: &Path, u: &Field) -> Result<()> {
    fs::write(path, encode(u))?;
    Ok(())
}

pub fn read_field(path: &Path, grid: &Grid) -> Result<Field> {
    let bytes = fs::read(path)?;
    decode_on(&bytes, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let g = Grid::new(GridSpec::new(2, 4.0, 16, 1.0)).unwrap();
        let u = Field::constant(&g, 1.5);
        let bytes = encode(&u);
        assert_eq!(&bytes[..12], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), 4.0);
        assert_eq!(bytes.len(), 16 + 8 + 32 + 8 * 256);
    }

    #[test]
    fn rejects_corruption() {
        let g = Grid::new(GridSpec::new(1, 4.0, 16, 1.0)).unwrap();
        let mut bytes = encode(&Field::constant(&g, 2.0));
        assert!(decode(&bytes[..40], 1.0).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes, 1.0).is_err());
        let other = Grid::new(GridSpec::new(1, 8.0, 16, 1.0)).unwrap();
        let bytes = encode(&Field::constant(&g, 2.0));
        assert_eq!(decode_on(&bytes, &other), Err(NlsError::GridMismatch));
    }

    proptest! {
        #[test]
        fn roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 32)) {
            let g = Grid::new(GridSpec::new(1, 8.0, 32, 2.0)).unwrap();
            let u = Field::new(&g, values).unwrap();
            let back = decode(&encode(&u), 2.0).unwrap();
            prop_assert_eq!(back, u);
        }
    }
}
