//! Scaled axis differences, total (mixed) differences, their adjoints and the
//! Vitali total variation.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Signed stencil `(-1)^l C(k, l)` for `l = 0..=k`.
pub fn stencil(k: usize) -> Vec<f64> {
    (0..=k)
        .map(|l| if l % 2 == 0 { binomial(k, l) } else { -binomial(k, l) })
        .collect()
}

fn check_order(shape: &[usize], axis: usize, k: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::Index(format!("axis {axis} out of range for order {}", shape.len())));
    }
    if k == 0 {
        return Err(Error::Invalid("difference order k must be at least 1".into()));
    }
    if k >= shape[axis] {
        return Err(Error::Order { k, extent: shape[axis], axis });
    }
    Ok(())
}

/// One-dimensional `n^{k-1}`-scaled k-th difference: output length `n - k`.
///
/// Computed as `k` successive first differences.
pub fn diff_1d(x: &[f64], k: usize, out: &mut [f64]) {
    let n = x.len();
    let scale = (n as f64).powi(k as i32 - 1);
    let mut buf = x.to_vec();
    for r in 1..=k {
        for i in (r..n).rev() {
            buf[i] -= buf[i - 1];
        }
    }
    for (o, y) in out.iter_mut().enumerate() {
        *y = scale * buf[o + k];
    }
}

/// Adjoint of [`diff_1d`]: input length `n - k`, output length `n`.
pub fn diff_1d_adjoint(b: &[f64], k: usize, out: &mut [f64]) {
    let n = out.len();
    let c = stencil(k);
    let scale = (n as f64).powi(k as i32 - 1);
    out.iter_mut().for_each(|x| *x = 0.0);
    for (o, &bo) in b.iter().enumerate() {
        let top = o + k;
        for (l, cl) in c.iter().enumerate() {
            out[top - l] += scale * cl * bo;
        }
    }
}

/// `D_i^k f` along a single axis (0-based axis).
pub fn axis_diff(f: &Tensor, axis: usize, k: usize) -> Result<Tensor> {
    check_order(f.shape(), axis, k)?;
    let n = f.shape()[axis];
    f.map_lines(axis, n - k, |x, out| diff_1d(x, k, out))
}

/// Adjoint of [`axis_diff`]; `n` is the original extent of the axis.
pub fn axis_diff_adjoint(b: &Tensor, axis: usize, k: usize, n: usize) -> Result<Tensor> {
    if axis >= b.ndim() || b.shape()[axis] + k != n {
        return Err(Error::Shape(format!(
            "adjoint input shape {:?} incompatible with extent {n} and k = {k} on axis {axis}",
            b.shape()
        )));
    }
    b.map_lines(axis, n, |x, out| diff_1d_adjoint(x, k, out))
}

/// Normalization of the margin difference operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginNormalization {
    /// Extra factor `n_M^{k-1}` on proper margins, where `n_M` is the product of
    /// the margin extents.
    #[default]
    Literal,
    /// No extra factor: the margin operator is the total difference of the
    /// flattened margin.
    Consistent,
}

/// A difference operator acting on the listed axes with an overall prefactor.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSpec {
    pub k: usize,
    pub axes: Vec<usize>,
    pub prefactor: f64,
}

impl DiffSpec {
    /// The total difference `D^k` on a tensor of order `d`.
    pub fn total(d: usize, k: usize) -> Self {
        Self { k, axes: (0..d).collect(), prefactor: 1.0 }
    }

    /// The margin operator `D_M^k` for a tensor of the given shape.
    pub fn margin(shape: &[usize], k: usize, axes: &[usize], norm: MarginNormalization) -> Result<Self> {
        let mut axes = axes.to_vec();
        axes.sort_unstable();
        axes.dedup();
        if let Some(&a) = axes.iter().find(|&&a| a >= shape.len()) {
            return Err(Error::Index(format!("axis {a} out of range for order {}", shape.len())));
        }
        Ok(Self { k, prefactor: margin_prefactor(shape, k, &axes, norm), axes })
    }

    pub fn output_shape(&self, shape: &[usize]) -> Result<Vec<usize>> {
        let mut out = shape.to_vec();
        for &a in &self.axes {
            check_order(shape, a, self.k)?;
            out[a] -= self.k;
        }
        Ok(out)
    }

    pub fn apply(&self, f: &Tensor) -> Result<Tensor> {
        self.output_shape(f.shape())?;
        let mut t = f.clone();
        for &a in &self.axes {
            t = axis_diff(&t, a, self.k)?;
        }
        if self.prefactor != 1.0 {
            t.scale(self.prefactor);
        }
        Ok(t)
    }

    /// Adjoint: maps a tensor of the output shape back to `shape`.
    pub fn adjoint(&self, b: &Tensor, shape: &[usize]) -> Result<Tensor> {
        let expected = self.output_shape(shape)?;
        if b.shape() != expected.as_slice() {
            return Err(Error::Shape(format!(
                "adjoint input shape {:?}, expected {expected:?}",
                b.shape()
            )));
        }
        let mut t = b.clone();
        for &a in self.axes.iter().rev() {
            t = axis_diff_adjoint(&t, a, self.k, shape[a])?;
        }
        if self.prefactor != 1.0 {
            t.scale(self.prefactor);
        }
        Ok(t)
    }
}

/// Prefactor of `D_M^k` relative to the plain product of axis differences.
pub fn margin_prefactor(shape: &[usize], k: usize, axes: &[usize], norm: MarginNormalization) -> f64 {
    if norm == MarginNormalization::Consistent || axes.len() == shape.len() {
        return 1.0;
    }
    let n_m: f64 = axes.iter().map(|&a| shape[a] as f64).product();
    n_m.powi(k as i32 - 1)
}

/// `D^k f` on all axes.
pub fn total_diff(f: &Tensor, k: usize) -> Result<Tensor> {
    DiffSpec::total(f.ndim(), k).apply(f)
}

/// Adjoint of [`total_diff`] for a tensor of the given original shape.
pub fn total_diff_adjoint(b: &Tensor, k: usize, shape: &[usize]) -> Result<Tensor> {
    DiffSpec::total(shape.len(), k).adjoint(b, shape)
}

/// Vitali total variation `||D^k f||_1`.
pub fn vitali_tv(f: &Tensor, k: usize) -> Result<f64> {
    Ok(total_diff(f, k)?.l1_norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squares_first_difference() {
        let f = Tensor::from_vec(vec![1.0, 4.0, 9.0, 16.0]).unwrap();
        assert_eq!(total_diff(&f, 1).unwrap().data(), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn second_difference_scaled() {
        let f = Tensor::from_vec(vec![1.0, 4.0, 9.0, 16.0]).unwrap();
        assert_eq!(total_diff(&f, 2).unwrap().data(), &[8.0, 8.0]);
    }

    #[test]
    fn adjoint_small_example() {
        let b = Tensor::from_vec(vec![1.0, 0.0]).unwrap();
        assert_eq!(total_diff_adjoint(&b, 1, &[3]).unwrap().data(), &[-1.0, 1.0, 0.0]);
    }

    #[test]
    fn order_too_large() {
        let f = Tensor::zeros(&[4, 6]).unwrap();
        assert!(matches!(total_diff(&f, 4), Err(Error::Order { axis: 0, .. })));
        assert!(axis_diff(&f, 1, 5).is_ok());
        assert!(axis_diff(&f, 1, 6).is_err());
    }

    #[test]
    fn quadrant_has_unit_tv() {
        let f = Tensor::from_fn(&[8, 8], |i| if i[0] >= 5 && i[1] >= 5 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(vitali_tv(&f, 1).unwrap(), 1.0);
    }

    #[test]
    fn margin_prefactor_literal() {
        let spec = DiffSpec::margin(&[4, 5], 2, &[1], MarginNormalization::Literal).unwrap();
        assert_eq!(spec.prefactor, 5.0);
        let spec = DiffSpec::margin(&[4, 5], 2, &[0, 1], MarginNormalization::Literal).unwrap();
        assert_eq!(spec.prefactor, 1.0);
        let spec = DiffSpec::margin(&[4, 5], 2, &[1], MarginNormalization::Consistent).unwrap();
        assert_eq!(spec.prefactor, 1.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(stencil(3), vec![1.0, -3.0, 3.0, -1.0]);
    }
}
