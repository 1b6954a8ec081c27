//! ANOVA decomposition into orthogonal margins `M(M, h)` and flattening of
//! margin components to lower-dimensional tensors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dictionary::dictionary;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Identifies the margin `M(M, h)`: `axes` is the set `M` (0-based, sorted)
/// and `h` holds one null-space direction in `1..=k` per axis outside `M`,
/// in increasing axis order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MarginKey {
    pub axes: Vec<usize>,
    pub h: Vec<usize>,
}

impl MarginKey {
    pub fn new(d: usize, k: usize, axes: Vec<usize>, h: Vec<usize>) -> Result<Self> {
        let mut sorted = axes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != axes || axes.iter().any(|&a| a >= d) {
            return Err(Error::Invalid(format!("margin axes {axes:?} must be sorted, distinct and < {d}")));
        }
        if h.len() != d - axes.len() || h.iter().any(|&x| x == 0 || x > k) {
            return Err(Error::Invalid(format!(
                "margin directions {h:?} must have length {} with values in 1..={k}",
                d - axes.len()
            )));
        }
        Ok(Self { axes, h })
    }

    /// The margin key for `M = [d]`.
    pub fn full(d: usize) -> Self {
        Self { axes: (0..d).collect(), h: Vec::new() }
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.axes.binary_search(&axis).is_ok()
    }

    /// Axes outside `M` paired with their null-space directions.
    pub fn outside(&self, d: usize) -> Vec<(usize, usize)> {
        (0..d).filter(|a| !self.contains(*a)).zip(self.h.iter().copied()).collect()
    }

    pub fn margin_shape(&self, shape: &[usize]) -> Vec<usize> {
        self.axes.iter().map(|&a| shape[a]).collect()
    }
}

impl fmt::Display for MarginKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axes: Vec<String> = self.axes.iter().map(|a| (a + 1).to_string()).collect();
        let h: Vec<String> = self.h.iter().map(|x| x.to_string()).collect();
        write!(f, "M={{{}}};h=({})", axes.join(","), h.join(","))
    }
}

/// All `(k + 1)^d` margin keys, ordered by `|M|` then lexicographically.
pub fn all_margin_keys(d: usize, k: usize) -> Vec<MarginKey> {
    let mut keys = Vec::new();
    for mask in 0u32..(1 << d) {
        let axes: Vec<usize> = (0..d).filter(|a| mask & (1 << a) != 0).collect();
        let free = d - axes.len();
        let count = k.pow(free as u32);
        for code in 0..count {
            let mut c = code;
            let mut h = vec![0; free];
            for slot in h.iter_mut().rev() {
                *slot = c % k + 1;
                c /= k;
            }
            keys.push(MarginKey { axes: axes.clone(), h });
        }
    }
    keys.sort_by(|a, b| a.axes.len().cmp(&b.axes.len()).then_with(|| a.cmp(b)));
    keys
}

/// `dim M(M, h) = prod_{i in M} (n_i - k)`.
pub fn margin_dimension(shape: &[usize], k: usize, key: &MarginKey) -> usize {
    key.axes.iter().map(|&a| shape[a] - k).product()
}

fn check_key(shape: &[usize], k: usize, key: &MarginKey) -> Result<()> {
    MarginKey::new(shape.len(), k, key.axes.clone(), key.h.clone()).map(|_| ())
}

/// Orthogonal projection of `f` onto `M(M, h)`.
pub fn project_margin(f: &Tensor, k: usize, key: &MarginKey) -> Result<Tensor> {
    let shape = f.shape().to_vec();
    check_key(&shape, k, key)?;
    let outside = key.outside(shape.len());
    let mut t = f.clone();
    for (axis, &n) in shape.iter().enumerate() {
        let dict = dictionary(n, k).map_err(|e| relabel(e, axis))?;
        if key.contains(axis) {
            t = t.map_lines(axis, n, |x, out| {
                out.copy_from_slice(x);
                dict.antiproject(out);
            })?;
        } else {
            let h = outside.iter().find(|(a, _)| *a == axis).map(|(_, h)| *h).expect("axis outside M");
            let q = dict.null_vector(h);
            t = t.map_lines(axis, n, |x, out| {
                let c: f64 = x.iter().zip(q).map(|(a, b)| a * b).sum();
                out.iter_mut().zip(q).for_each(|(o, qi)| *o = c * qi);
            })?;
        }
    }
    Ok(t)
}

fn relabel(e: Error, axis: usize) -> Error {
    match e {
        Error::Order { k, extent, .. } => Error::Order { k, extent, axis },
        other => other,
    }
}

/// Decomposes `f` into its `(k + 1)^d` orthogonal margin components.
pub fn anova_decompose(f: &Tensor, k: usize) -> Result<Vec<(MarginKey, Tensor)>> {
    all_margin_keys(f.ndim(), k)
        .into_iter()
        .map(|key| project_margin(f, k, &key).map(|t| (key, t)))
        .collect()
}

/// Flattens a component of `M(M, h)` to the `|M|`-dimensional tensor `f-bar`
/// with `f = f-bar x phi~_{h_i}` over the axes outside `M`.
pub fn margin_flatten(component: &Tensor, k: usize, key: &MarginKey) -> Result<Tensor> {
    let shape = component.shape().to_vec();
    let bar = contract_margin(component, k, key)?;
    let back = margin_expand(&bar, &shape, k, key)?;
    let resid = back.sub(component)?.frobenius_sq().sqrt();
    let norm = component.frobenius_sq().sqrt();
    if resid > 1e-8 * norm {
        return Err(Error::Domain(format!(
            "tensor is not in margin {key}: residual {resid:.3e} vs norm {norm:.3e}"
        )));
    }
    Ok(bar)
}

/// `P_{M,h} f` flattened to `|M|` dimensions, without the membership check.
pub fn contract_margin(f: &Tensor, k: usize, key: &MarginKey) -> Result<Tensor> {
    let shape = f.shape().to_vec();
    check_key(&shape, k, key)?;
    let mut bar = f.clone();
    for &(axis, h) in key.outside(shape.len()).iter().rev() {
        let dict = dictionary(shape[axis], k).map_err(|e| relabel(e, axis))?;
        let s = (shape[axis] as f64).sqrt();
        let v: Vec<f64> = dict.null_vector(h).iter().map(|q| q / s).collect();
        bar = bar.contract_axis(axis, &v)?;
    }
    for (pos, &axis) in key.axes.iter().enumerate() {
        let dict = dictionary(shape[axis], k).map_err(|e| relabel(e, axis))?;
        bar = bar.map_lines(pos, shape[axis], |x, out| {
            out.copy_from_slice(x);
            dict.antiproject(out);
        })?;
    }
    Ok(bar)
}

/// Inverse of [`margin_flatten`]: `f-bar x phi~_{h_i}` over axes outside `M`.
pub fn margin_expand(bar: &Tensor, shape: &[usize], k: usize, key: &MarginKey) -> Result<Tensor> {
    check_key(shape, k, key)?;
    if bar.shape() != key.margin_shape(shape).as_slice() {
        return Err(Error::Shape(format!(
            "flattened margin has shape {:?}, expected {:?}",
            bar.shape(),
            key.margin_shape(shape)
        )));
    }
    let mut t = bar.clone();
    for (axis, h) in key.outside(shape.len()) {
        let dict = dictionary(shape[axis], k).map_err(|e| relabel(e, axis))?;
        let s = (shape[axis] as f64).sqrt();
        let v: Vec<f64> = dict.null_vector(h).iter().map(|q| q * s).collect();
        t = t.expand_axis(axis, &v)?;
    }
    Ok(t)
}
