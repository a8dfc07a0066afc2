//! Array file I/O.
//!
//! The interchange format is NPY (versions 1.0 through 3.0 are read, 1.0 is
//! written) holding little-endian `float32` or `float64` data. Feature files
//! are 2-D; image batches are 4-D `(n, h, w, c)`. Headerless comma-separated
//! text is accepted as a fallback for 2-D feature files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

const MAGIC: &[u8] = b"\x93NUMPY";

/// Element type used when writing NPY files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NpyDtype {
    F32,
    #[default]
    F64,
}

impl NpyDtype {
    fn descr(self) -> &'static str {
        match self {
            NpyDtype::F32 => "<f4",
            NpyDtype::F64 => "<f8",
        }
    }

    fn width(self) -> usize {
        match self {
            NpyDtype::F32 => 4,
            NpyDtype::F64 => 8,
        }
    }
}

/// A dense array in row-major order, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads an NPY file, or a CSV file when the NPY magic is absent.
pub fn read_array(path: &Path) -> Result<Array> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(MAGIC) {
        parse_npy(path, &bytes)
    } else {
        parse_csv(path, &bytes)
    }
}

fn parse_npy(path: &Path, bytes: &[u8]) -> Result<Array> {
    if bytes.len() < 10 {
        return Err(format_err(path, "truncated preamble"));
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(format_err(path, "truncated preamble"));
            }
            let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
            (len as usize, 12)
        }
        v => return Err(format_err(path, format!("unsupported NPY version {v}"))),
    };
    let data_start = header_start + header_len;
    let header = bytes
        .get(header_start..data_start)
        .ok_or_else(|| format_err(path, "truncated header"))?;
    let header =
        std::str::from_utf8(header).map_err(|_| format_err(path, "header is not text"))?;
    let header = NpyHeader::parse(header).map_err(|r| format_err(path, r))?;

    let count: usize = header.shape.iter().product();
    let payload = &bytes[data_start..];
    if payload.len() != count * header.dtype.width() {
        return Err(format_err(
            path,
            format!(
                "payload has {} bytes, shape {:?} needs {}",
                payload.len(),
                header.shape,
                count * header.dtype.width()
            ),
        ));
    }
    let mut data: Vec<f64> = match header.dtype {
        NpyDtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        NpyDtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect(),
    };
    if header.fortran_order && header.shape.len() > 1 {
        data = fortran_to_c(&header.shape, &data);
    }
    Ok(Array {
        shape: header.shape,
        data,
    })
}

fn fortran_to_c(shape: &[usize], data: &[f64]) -> Vec<f64> {
    let rank = shape.len();
    let mut out = vec![0.0; data.len()];
    let mut idx = vec![0usize; rank];
    for v in out.iter_mut() {
        // idx walks C order; compute the Fortran offset.
        let mut off = 0;
        let mut stride = 1;
        for (a, &s) in idx.iter().zip(shape) {
            off += a * stride;
            stride *= s;
        }
        *v = data[off];
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    out
}

struct NpyHeader {
    dtype: NpyDtype,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl NpyHeader {
    fn parse(header: &str) -> std::result::Result<Self, String> {
        let value_after = |key: &str| -> std::result::Result<&str, String> {
            let pat = format!("'{key}':");
            let at = header
                .find(&pat)
                .ok_or_else(|| format!("header lacks '{key}'"))?;
            Ok(header[at + pat.len()..].trim_start())
        };

        let descr = value_after("descr")?;
        let descr = descr
            .strip_prefix('\'')
            .and_then(|s| s.split('\'').next())
            .ok_or("unquoted descr")?;
        let dtype = match descr {
            "<f8" | "=f8" => NpyDtype::F64,
            "<f4" | "=f4" => NpyDtype::F32,
            other => return Err(format!("unsupported dtype {other:?}")),
        };

        let fortran = value_after("fortran_order")?;
        let fortran_order = if fortran.starts_with("True") {
            true
        } else if fortran.starts_with("False") {
            false
        } else {
            return Err("bad fortran_order".into());
        };

        let shape = value_after("shape")?;
        let inner = shape
            .strip_prefix('(')
            .and_then(|s| s.split(')').next())
            .ok_or("bad shape tuple")?;
        let shape = inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| format!("bad dimension {s:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;

        Ok(Self {
            dtype,
            fortran_order,
            shape,
        })
    }
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Array> {
    let text = std::str::from_utf8(bytes).map_err(|_| format_err(path, "not NPY or CSV text"))?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v = field.trim().parse::<f64>().map_err(|_| {
                format_err(path, format!("line {}: bad number {field:?}", lineno + 1))
            })?;
            data.push(v);
        }
        let w = data.len() - before;
        match width {
            None => width = Some(w),
            Some(prev) if prev != w => {
                return Err(format_err(
                    path,
                    format!("line {}: {w} fields, expected {prev}", lineno + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| format_err(path, "empty file"))?;
    Ok(Array {
        shape: vec![rows, width],
        data,
    })
}

/// Writes a row-major array as NPY v1.0.
pub fn write_npy(path: &Path, shape: &[usize], data: &[f64], dtype: NpyDtype) -> Result<()> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let shape_str = match shape {
        [one] => format!("({one},)"),
        dims => format!(
            "({})",
            dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    );
    // Pad so the payload starts on a 64-byte boundary; the header ends in '\n'.
    let unpadded = MAGIC.len() + 4 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let header_len =
        u16::try_from(header.len()).map_err(|_| format_err(path, "header too long"))?;

    let mut buf = Vec::with_capacity(MAGIC.len() + 4 + header.len() + data.len() * dtype.width());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&[1, 0]);
    buf.extend_from_slice(&header_len.to_le_bytes());
    buf.extend_from_slice(header.as_bytes());
    match dtype {
        NpyDtype::F64 => data
            .iter()
            .for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
        NpyDtype::F32 => data
            .iter()
            .for_each(|v| buf.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(&buf).map_err(io_err(path))
}

/// Loads a 2-D feature file (NPY, or CSV fallback).
pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let arr = read_array(path)?;
    if arr.shape.len() != 2 {
        return Err(Error::Rank {
            expected: 2,
            found: arr.shape.len(),
        });
    }
    FeatureMatrix::from_row_slice(arr.shape[0], arr.shape[1], &arr.data)
}

/// Saves features as a float64 NPY file; loading it back is bit-exact.
pub fn save_features(m: &FeatureMatrix, path: &Path) -> Result<()> {
    save_features_as(m, path, NpyDtype::F64)
}

pub fn save_features_as(m: &FeatureMatrix, path: &Path, dtype: NpyDtype) -> Result<()> {
    write_npy(
        path,
        &[m.n_samples(), m.dim()],
        &m.to_row_major(),
        dtype,
    )
}
