//! CSTF binary tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "CSTF"
//! version u8       1
//! dtype   u8       0 = 32-bit float
//! ndim    u8
//! dims    ndim x u32
//! payload prod(dims) x 4 bytes, row-major f32
//! ```
//!
//! Round-trips are bit-exact: values are moved as raw IEEE-754 bit patterns.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"CSTF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Error)]
pub enum CstfError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:02x?}, expected \"CSTF\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("payload length {actual} bytes does not match dims {dims:?} ({expected} bytes)")]
    PayloadSizeMismatch {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("tensor dimension {0} exceeds u32 range")]
    DimOverflow(usize),
}

/// An owned f32 tensor with explicit shape, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CstfTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl CstfTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(
            dims.iter().product::<usize>(),
            data.len(),
            "dims {:?} do not match data length {}",
            dims,
            data.len()
        );
        Self { dims, data }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

pub fn write<W: Write>(mut w: W, tensor: &CstfTensor) -> Result<(), CstfError> {
    w.write_all(&MAGIC)?;
    w.write_all(&[VERSION, DTYPE_F32, tensor.dims.len() as u8])?;
    for &d in &tensor.dims {
        let d = u32::try_from(d).map_err(|_| CstfError::DimOverflow(d))?;
        w.write_all(&d.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(tensor.data.len() * 4);
    for &v in &tensor.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read<R: Read>(mut r: R) -> Result<CstfTensor, CstfError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(CstfError::BadMagic(magic));
    }
    let mut head = [0u8; 3];
    r.read_exact(&mut head)?;
    let [version, dtype, ndim] = head;
    if version != VERSION {
        return Err(CstfError::UnsupportedVersion(version));
    }
    if dtype != DTYPE_F32 {
        return Err(CstfError::UnsupportedDtype(dtype));
    }
    let mut dims = Vec::with_capacity(ndim as usize);
    for _ in 0..ndim {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        dims.push(u32::from_le_bytes(b) as usize);
    }
    let numel: usize = dims.iter().product();
    let mut payload = vec![0u8; numel * 4];
    if let Err(e) = r.read_exact(&mut payload) {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            // Report how much was actually there.
            return Err(CstfError::PayloadSizeMismatch {
                dims,
                expected: numel * 4,
                actual: 0,
            });
        }
        return Err(e.into());
    }
    // A well-formed file ends exactly at the payload boundary.
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CstfError::PayloadSizeMismatch {
            dims,
            expected: numel * 4,
            actual: numel * 4 + 1,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(CstfTensor { dims, data })
}

pub fn write_file<P: AsRef<Path>>(path: P, tensor: &CstfTensor) -> Result<(), CstfError> {
    let f = File::create(path)?;
    write(BufWriter::new(f), tensor)
}

pub fn read_file<P: AsRef<Path>>(path: P) -> Result<CstfTensor, CstfError> {
    let f = File::open(path)?;
    read(BufReader::new(f))
}
