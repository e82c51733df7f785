//! Real-valued feature tensors and the FMT1 binary container.
//!
//! FMT1 layout, little-endian throughout, no padding:
//!
//! | offset        | size        | content                         |
//! |---------------|-------------|---------------------------------|
//! | 0             | 4           | magic `FMT1`                    |
//! | 4             | 1           | version, must be 1              |
//! | 5             | 1           | dtype, 1 = f32                  |
//! | 6             | 1           | number of dimensions `d`        |
//! | 7             | 4·d         | dimension sizes, u32 each       |
//! | 7 + 4·d       | 4·∏dims     | row-major f32 payload           |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::FeatureMatrix;

pub const FMT1_MAGIC: [u8; 4] = *b"FMT1";
pub const FMT1_VERSION: u8 = 1;
pub const FMT1_DTYPE_F32: u8 = 1;
const HEADER_LEN: usize = 7;

/// Row-major tensor whose last dimension is the channel axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} needs {count} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channels(&self) -> usize {
        self.shape[self.shape.len() - 1]
    }

    /// Product of all but the last dimension.
    pub fn n_samples(&self) -> usize {
        self.data.len() / self.channels()
    }

    pub fn to_feature_matrix(&self) -> Result<FeatureMatrix> {
        let data = self.data.iter().map(|&v| f64::from(v)).collect();
        FeatureMatrix::new(data, self.n_samples(), self.channels())
    }

    pub fn to_fmt1(&self) -> Result<Vec<u8>> {
        let ndims = u8::try_from(self.shape.len()).map_err(|_| {
            Error::InvalidShape(format!("FMT1 holds at most 255 dimensions, got {}", self.shape.len()))
        })?;
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.shape.len() + 4 * self.data.len());
        out.extend_from_slice(&FMT1_MAGIC);
        out.extend_from_slice(&[FMT1_VERSION, FMT1_DTYPE_F32, ndims]);
        for &d in &self.shape {
            let d = u32::try_from(d)
                .map_err(|_| Error::InvalidShape(format!("dimension {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_fmt1(bytes: &[u8]) -> Result<Self> {
        let fail = |offset: usize, reason: String| Error::Format { offset, reason };
        if bytes.len() < HEADER_LEN {
            return Err(fail(
                bytes.len(),
                format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
            ));
        }
        if bytes[..4] != FMT1_MAGIC {
            return Err(fail(0, format!("bad magic {:?}", &bytes[..4])));
        }
        if bytes[4] != FMT1_VERSION {
            return Err(fail(4, format!("unsupported version {}", bytes[4])));
        }
        if bytes[5] != FMT1_DTYPE_F32 {
            return Err(fail(5, format!("unsupported dtype {}", bytes[5])));
        }
        let ndims = bytes[6] as usize;
        if ndims == 0 {
            return Err(fail(6, "zero dimensions".into()));
        }
        let dims_end = HEADER_LEN + 4 * ndims;
        if bytes.len() < dims_end {
            return Err(fail(bytes.len(), format!("truncated dimensions, expected {ndims}")));
        }
        let mut shape = Vec::with_capacity(ndims);
        let mut count: usize = 1;
        for (i, chunk) in bytes[HEADER_LEN..dims_end].chunks_exact(4).enumerate() {
            let offset = HEADER_LEN + 4 * i;
            let d = u32::from_le_bytes(chunk.try_into().unwrap()) as usize;
            if d == 0 {
                return Err(fail(offset, format!("dimension {i} is zero")));
            }
            count = count
                .checked_mul(d)
                .ok_or_else(|| fail(offset, "element count overflows".into()))?;
            shape.push(d);
        }
        let payload = &bytes[dims_end..];
        let expected = count
            .checked_mul(4)
            .ok_or_else(|| fail(dims_end, "payload size overflows".into()))?;
        if payload.len() != expected {
            let offset = dims_end + payload.len().min(expected);
            return Err(fail(
                offset,
                format!("payload is {} bytes, shape {shape:?} needs {expected}", payload.len()),
            ));
        }
        let mut data = Vec::with_capacity(count);
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(fail(dims_end + 4 * i, format!("non-finite value {v}")));
            }
            data.push(v);
        }
        Self::new(shape, data)
    }

    pub fn read_fmt1(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_fmt1(&fs::read(path)?)
    }

    pub fn write_fmt1(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_fmt1()?;
        fs::write(path, bytes).map_err(|e| Error::OutputWrite {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}
