use crate::{Error, Mat, Result};

/// Dense sample matrix, one row per sample, stored row-major.
///
/// Always holds at least one sample of dimension at least one, with every
/// entry finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Vec<f64>,
    len: usize,
    dim: usize,
}

impl SampleSet {
    /// Builds a sample set from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, len: usize, dim: usize) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(Error::input(format!(
                "sample set must be non-empty (got {len} samples of dimension {dim})"
            )));
        }
        if data.len() != len * dim {
            return Err(Error::input(format!(
                "buffer of length {} cannot hold {len} samples of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite entry at sample {}, coordinate {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { data, len, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::input(format!(
                "sample {i} has dimension {} but sample 0 has dimension {dim}",
                r.len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_flat(data, rows.len(), dim)
    }

    /// Converts a column-major matrix (rows are samples).
    pub fn from_mat(m: &Mat<f64>) -> Result<Self> {
        let (len, dim) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(len * dim);
        for i in 0..len {
            for j in 0..dim {
                data.push(m[(i, j)]);
            }
        }
        Self::from_flat(data, len, dim)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// New set holding the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len {
                return Err(Error::input(format!(
                    "row index {i} out of range for {} samples",
                    self.len
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat(data, indices.len(), self.dim)
    }

    /// Splits each row at column `at` into a left and a right block.
    pub fn split_columns(&self, at: usize) -> Result<(Self, Self)> {
        if at == 0 || at >= self.dim {
            return Err(Error::input(format!(
                "split index {at} must lie in 1..{}",
                self.dim
            )));
        }
        let mut left = Vec::with_capacity(self.len * at);
        let mut right = Vec::with_capacity(self.len * (self.dim - at));
        for r in self.rows() {
            left.extend_from_slice(&r[..at]);
            right.extend_from_slice(&r[at..]);
        }
        Ok((
            Self::from_flat(left, self.len, at)?,
            Self::from_flat(right, self.len, self.dim - at)?,
        ))
    }

    /// Concatenates two sets column-wise: row i is `left[i] ++ right[i]`.
    pub fn hstack(left: &Self, right: &Self) -> Result<Self> {
        if left.len != right.len {
            return Err(Error::input(format!(
                "cannot stack {} samples beside {}",
                left.len, right.len
            )));
        }
        let dim = left.dim + right.dim;
        let mut data = Vec::with_capacity(left.len * dim);
        for (a, b) in left.rows().zip(right.rows()) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Self::from_flat(data, left.len, dim)
    }
}
