use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Compressed sparse row storage for a weight matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Csr {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Weights {
    /// Row-major, `rows * cols` entries.
    Dense(Vec<f64>),
    /// Only structurally present entries are stored.
    Sparse(Csr),
}

/// One affine map `x -> W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    weights: Weights,
    bias: Vec<f64>,
}

impl Layer {
    pub fn dense(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return invalid(format!(
                "dense layer {rows}x{cols} needs {} weights, got {}",
                rows * cols,
                weights.len()
            ));
        }
        if bias.len() != rows {
            return invalid(format!("layer with {rows} rows got {} biases", bias.len()));
        }
        Ok(Layer { rows, cols, weights: Weights::Dense(weights), bias })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer { rows, cols, weights: Weights::Dense(vec![0.0; rows * cols]), bias: vec![0.0; rows] }
    }

    /// Builds a sparse layer from `(row, col, value)` triplets. Duplicates are
    /// summed; every listed position is kept even if its value is zero.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if bias.len() != rows {
            return invalid(format!("layer with {rows} rows got {} biases", bias.len()));
        }
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return invalid(format!("entry ({r}, {c}) outside a {rows}x{cols} layer"));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Layer { rows, cols, weights: Weights::Sparse(Csr { row_ptr, col_idx, values }), bias })
    }

    pub(crate) fn from_parts(rows: usize, cols: usize, weights: Weights, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != rows {
            return invalid(format!("layer with {rows} rows got {} biases", bias.len()));
        }
        match &weights {
            Weights::Dense(w) if w.len() != rows * cols => {
                return invalid(format!("dense layer {rows}x{cols} has {} weights", w.len()))
            }
            Weights::Sparse(csr) => {
                let ok = csr.row_ptr.len() == rows + 1
                    && csr.row_ptr.first() == Some(&0)
                    && csr.row_ptr.windows(2).all(|w| w[0] <= w[1])
                    && *csr.row_ptr.last().unwrap() == csr.values.len()
                    && csr.col_idx.len() == csr.values.len()
                    && csr.col_idx.iter().all(|&c| c < cols);
                if !ok {
                    return invalid("malformed sparse layer");
                }
            }
            _ => {}
        }
        Ok(Layer { rows, cols, weights, bias })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.weights, Weights::Dense(_))
    }

    /// Stored weight values in storage order (row-major for dense layers).
    pub fn values(&self) -> &[f64] {
        match &self.weights {
            Weights::Dense(w) => w,
            Weights::Sparse(csr) => &csr.values,
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        match &mut self.weights {
            Weights::Dense(w) => w,
            Weights::Sparse(csr) => &mut csr.values,
        }
    }

    /// Number of stored matrix entries.
    pub fn entry_count(&self) -> usize {
        self.values().len()
    }

    /// Stored entries plus biases.
    pub fn parameter_count(&self) -> usize {
        self.entry_count() + self.rows
    }

    /// Visits stored entries as `(row, col, storage index, value)`.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, usize, f64)) {
        match &self.weights {
            Weights::Dense(w) => {
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        let k = r * self.cols + c;
                        f(r, c, k, w[k]);
                    }
                }
            }
            Weights::Sparse(csr) => {
                for r in 0..self.rows {
                    for k in csr.row_ptr[r]..csr.row_ptr[r + 1] {
                        f(r, csr.col_idx[k], k, csr.values[k]);
                    }
                }
            }
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.entry_count());
        self.for_each_entry(|r, c, _, v| out.push((r, c, v)));
        out
    }

    /// `out = W x + b`.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        match &self.weights {
            Weights::Dense(w) => {
                for (r, o) in out.iter_mut().enumerate() {
                    let row = &w[r * self.cols..(r + 1) * self.cols];
                    let mut acc = 0.0;
                    for (a, b) in row.iter().zip(x) {
                        acc += a * b;
                    }
                    *o = acc + self.bias[r];
                }
            }
            Weights::Sparse(csr) => {
                for (r, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for k in csr.row_ptr[r]..csr.row_ptr[r + 1] {
                        acc += csr.values[k] * x[csr.col_idx[k]];
                    }
                    *o = acc + self.bias[r];
                }
            }
        }
    }

    /// `out = W^T g` (no bias).
    pub fn apply_transpose(&self, g: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match &self.weights {
            Weights::Dense(w) => {
                for (r, &gr) in g.iter().enumerate() {
                    if gr == 0.0 {
                        continue;
                    }
                    let row = &w[r * self.cols..(r + 1) * self.cols];
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a * gr;
                    }
                }
            }
            Weights::Sparse(csr) => {
                for (r, &gr) in g.iter().enumerate() {
                    for k in csr.row_ptr[r]..csr.row_ptr[r + 1] {
                        out[csr.col_idx[k]] += csr.values[k] * gr;
                    }
                }
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().chain(&self.bias).fold(0.0, |m, v| m.max(v.abs()))
    }
}
