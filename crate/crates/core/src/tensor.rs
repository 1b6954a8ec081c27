//! Dense row-major tensors of `f64` with 1-based public multi-indices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Number of entries of a tensor with the given shape (1 for the empty shape).
pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Maps a 1-based multi-index to a 0-based flat offset.
pub fn multi_to_flat(shape: &[usize], idx: &[usize]) -> Result<usize> {
    if idx.len() != shape.len() {
        return Err(Error::Index(format!(
            "multi-index of length {} for tensor of order {}",
            idx.len(),
            shape.len()
        )));
    }
    let mut flat = 0;
    for (axis, (&j, &n)) in idx.iter().zip(shape).enumerate() {
        if j == 0 || j > n {
            return Err(Error::Index(format!("index {j} out of range 1..={n} on axis {axis}")));
        }
        flat = flat * n + (j - 1);
    }
    Ok(flat)
}

/// Maps a 0-based flat offset to a 1-based multi-index.
pub fn flat_to_multi(shape: &[usize], flat: usize) -> Result<Vec<usize>> {
    let total = numel(shape);
    if flat >= total {
        return Err(Error::Index(format!("flat offset {flat} out of range for {total} entries")));
    }
    let mut idx = vec![0; shape.len()];
    let mut rem = flat;
    for axis in (0..shape.len()).rev() {
        idx[axis] = rem % shape[axis] + 1;
        rem /= shape[axis];
    }
    Ok(idx)
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if let Some(axis) = shape.iter().position(|&n| n == 0) {
        return Err(Error::Shape(format!("extent on axis {axis} must be positive")));
    }
    Ok(())
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape)?;
        let n = numel(&shape);
        if data.len() != n {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        Ok(Self { shape: shape.to_vec(), data: vec![0.0; numel(shape)] })
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        check_shape(shape)?;
        Ok(Self { shape: shape.to_vec(), data: vec![value; numel(shape)] })
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: Vec::new(), data: vec![value] }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    /// Builds a tensor from a closure of the 1-based multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        check_shape(shape)?;
        let n = numel(shape);
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![1; shape.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for axis in (0..shape.len()).rev() {
                if idx[axis] < shape[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = 1;
            }
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[multi_to_flat(&self.shape, idx)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let flat = multi_to_flat(&self.shape, idx)?;
        self.data[flat] = value;
        Ok(())
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn mean_sq(&self) -> f64 {
        self.frobenius_sq() / self.len() as f64
    }

    pub fn inner_product(&self, other: &Tensor) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.axpy(1.0, other)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Tensor {
        let mut t = self.clone();
        t.scale(alpha);
        t
    }

    /// Outer product; the result has order `self.ndim() + other.ndim()`.
    pub fn outer_product(&self, other: &Tensor) -> Tensor {
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        let mut data = Vec::with_capacity(self.len() * other.len());
        for &a in &self.data {
            data.extend(other.data.iter().map(|b| a * b));
        }
        Tensor { shape, data }
    }

    /// Outer product of vectors.
    pub fn outer(vectors: &[&[f64]]) -> Result<Tensor> {
        let mut t = Tensor::scalar(1.0);
        for v in vectors {
            t = t.outer_product(&Tensor::from_vec(v.to_vec())?);
        }
        Ok(t)
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.ndim() {
            return Err(Error::Index(format!(
                "axis {axis} out of range for tensor of order {}",
                self.ndim()
            )));
        }
        Ok(())
    }

    /// Applies a linear map to every line along `axis`.
    ///
    /// `f(input_line, output_line)` receives a line of length `shape[axis]`
    /// and must fill an output line of length `out_len`.
    pub fn map_lines(
        &self,
        axis: usize,
        out_len: usize,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Tensor> {
        self.check_axis(axis)?;
        if out_len == 0 {
            return Err(Error::Shape(format!("empty output extent on axis {axis}")));
        }
        let n = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let mut shape = self.shape.clone();
        shape[axis] = out_len;
        let mut data = vec![0.0; outer * out_len * inner];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; out_len];
        for o in 0..outer {
            let src = o * n * inner;
            let dst = o * out_len * inner;
            if inner == 1 {
                f(&self.data[src..src + n], &mut data[dst..dst + out_len]);
                continue;
            }
            for i in 0..inner {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = self.data[src + j * inner + i];
                }
                out.iter_mut().for_each(|x| *x = 0.0);
                f(&line, &mut out);
                for (j, &v) in out.iter().enumerate() {
                    data[dst + j * inner + i] = v;
                }
            }
        }
        Ok(Tensor { shape, data })
    }

    /// Contracts `axis` against `v`, removing that axis.
    pub fn contract_axis(&self, axis: usize, v: &[f64]) -> Result<Tensor> {
        self.check_axis(axis)?;
        if v.len() != self.shape[axis] {
            return Err(Error::Shape(format!(
                "contraction vector of length {} on axis {axis} of extent {}",
                v.len(),
                self.shape[axis]
            )));
        }
        let t = self.map_lines(axis, 1, |x, out| {
            out[0] = x.iter().zip(v).map(|(a, b)| a * b).sum();
        })?;
        let mut shape = t.shape.clone();
        shape.remove(axis);
        Ok(Tensor { shape, data: t.data })
    }

    /// Inserts a new axis at position `axis` carrying the vector `v`.
    pub fn expand_axis(&self, axis: usize, v: &[f64]) -> Result<Tensor> {
        if axis > self.ndim() {
            return Err(Error::Index(format!("cannot insert axis {axis} into order {}", self.ndim())));
        }
        let mut shape = self.shape.clone();
        shape.insert(axis, 1);
        let t = Tensor { shape, data: self.data.clone() };
        t.map_lines(axis, v.len(), |x, out| {
            for (o, vi) in out.iter_mut().zip(v) {
                *o = x[0] * vi;
            }
        })
    }

    /// Permutes axes: axis `a` of the result is axis `perm[a]` of `self`.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Tensor> {
        let d = self.ndim();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Invalid(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides = strides(&self.shape);
        let mut idx = vec![0usize; d];
        let mut data = Vec::with_capacity(self.len());
        for _ in 0..self.len() {
            let off: usize = (0..d).map(|a| idx[a] * src_strides[perm[a]]).sum();
            data.push(self.data[off]);
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(Tensor { shape, data })
    }
}
