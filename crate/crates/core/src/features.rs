use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An `n × d` matrix of feature vectors, one row per sample.
///
/// Storage is nalgebra's column-major layout, so each feature column is a
/// contiguous slice. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::TooFewSamples {
                n: data.nrows(),
                min: 1,
            });
        }
        let n = data.nrows();
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos % n,
                col: pos / n,
            });
        }
        Ok(Self { data })
    }

    /// Builds a matrix from `n * d` values laid out row by row.
    pub fn from_row_slice(n: usize, d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, d, values))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut flat = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_row_slice(rows.len(), d, &flat)
    }

    /// Stacks matrices of equal width on top of each other.
    pub fn vstack(parts: &[&FeatureMatrix]) -> Result<Self> {
        let d = parts.first().map_or(0, |p| p.dim());
        for p in parts {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.dim(),
                });
            }
        }
        let n: usize = parts.iter().map(|p| p.n_samples()).sum();
        let mut out = DMatrix::zeros(n, d);
        let mut r0 = 0;
        for p in parts {
            out.rows_mut(r0, p.n_samples()).copy_from(&p.data);
            r0 += p.n_samples();
        }
        Self::new(out)
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n_samples();
        &self.data.as_slice()[j * n..(j + 1) * n]
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.data.row(r).iter().copied().collect()
    }

    /// Entries in row-major (C) order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.data.transpose().as_slice().to_vec()
    }

    pub fn column_means(&self) -> DVector<f64> {
        let n = self.n_samples() as f64;
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|j| self.column(j).iter().sum::<f64>() / n),
        )
    }

    /// Rows with `offset` subtracted from every row.
    pub(crate) fn centered(&self, offset: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.data.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let m = offset[j];
            col.iter_mut().for_each(|v| *v -= m);
        }
        out
    }
}
