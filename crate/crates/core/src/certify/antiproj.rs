//! Exact antiprojections `||(I - P_S~) phi~_j|| / sqrt(n)` of product atoms onto
//! the span of the atoms indexed by an enlarged active set.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dictionary::ProductDictionary;
use crate::error::{Error, Result};
use crate::grid::for_each_in_box;
use crate::tensor::{multi_to_flat, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Antiprojection {
    pub value: f64,
    /// The Gram matrix needed a ridge to be factorized.
    pub regularized: bool,
}

/// Projection onto the atoms of a fixed index set, reused across many atoms.
pub struct Antiprojector {
    dict: ProductDictionary,
    reduced: Vec<usize>,
    set: Vec<Vec<usize>>,
    // axis_gram[i][a * len + b] = <phi~_{a+k+1}, phi~_{b+k+1}> on axis i
    axis_gram: Vec<Vec<f64>>,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    regularized: bool,
}

impl Antiprojector {
    /// `set` holds 1-based multi-indices in `prod_i [k+1 : n_i]`.
    pub fn new(shape: &[usize], k: usize, set: &[Vec<usize>]) -> Result<Self> {
        let dict = ProductDictionary::new(shape, k)?;
        let reduced = dict.reduced_shape();
        for idx in set {
            check_index(shape, k, idx)?;
        }
        let axis_gram: Vec<Vec<f64>> = (0..shape.len())
            .map(|axis| {
                let d = dict.axis(axis);
                let len = shape[axis] - k;
                let cols: Vec<Vec<f64>> = (k + 1..=shape[axis]).map(|j| d.tilde_column(j)).collect();
                let mut g = vec![0.0; len * len];
                for a in 0..len {
                    for b in a..len {
                        let v: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
                        g[a * len + b] = v;
                        g[b * len + a] = v;
                    }
                }
                g
            })
            .collect();
        let m = set.len();
        let mut this = Self { dict, reduced, set: set.to_vec(), axis_gram, chol: None, regularized: false };
        if m > 0 {
            let gram = DMatrix::from_fn(m, m, |a, b| this.atom_inner(&this.set[a], &this.set[b]));
            this.chol = match gram.clone().cholesky() {
                Some(c) => Some(c),
                None => {
                    let ridge = 1e-12 * gram.trace();
                    this.regularized = true;
                    let shifted = gram + DMatrix::identity(m, m) * ridge;
                    Some(shifted.cholesky().ok_or_else(|| {
                        Error::Numerical("Gram matrix of the active atoms is not positive definite".into())
                    })?)
                }
            };
        }
        Ok(this)
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn set(&self) -> &[Vec<usize>] {
        &self.set
    }

    /// `<phi~_a, phi~_b>` for 1-based multi-indices in the reduced box.
    fn atom_inner(&self, a: &[usize], b: &[usize]) -> f64 {
        let k = self.dict.k();
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(axis, (&x, &y))| self.axis_gram[axis][(x - k - 1) * self.reduced[axis] + (y - k - 1)])
            .product()
    }

    /// `||(I - P) phi~_idx||^2 / n`, with the residual formed explicitly.
    pub fn residual_sq(&self, idx: &[usize]) -> Result<f64> {
        let k = self.dict.k();
        check_index(self.dict.shape(), k, idx)?;
        let shifted: Vec<usize> = idx.iter().map(|&j| j - k).collect();
        let mut coef = Tensor::zeros(&self.reduced)?;
        coef.data_mut()[multi_to_flat(&self.reduced, &shifted)?] = 1.0;
        if let Some(chol) = &self.chol {
            let c = DVector::from_iterator(self.set.len(), self.set.iter().map(|a| self.atom_inner(a, idx)));
            let x = chol.solve(&c);
            for (a, xa) in self.set.iter().zip(x.iter()) {
                let pos: Vec<usize> = a.iter().map(|&j| j - k).collect();
                coef.data_mut()[multi_to_flat(&self.reduced, &pos)?] -= xa;
            }
        }
        let r = self.dict.synthesize(&coef)?;
        Ok(r.frobenius_sq() / self.dict.n() as f64)
    }

    pub fn value(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.residual_sq(idx)?.sqrt())
    }

    /// Largest antiprojection over all atoms of the reduced box, with its index.
    pub fn max_value(&self) -> Result<(f64, Vec<usize>)> {
        let k = self.dict.k();
        let bounds: Vec<(usize, usize)> = self.dict.shape().iter().map(|&n| (k + 1, n)).collect();
        let mut all = Vec::new();
        for_each_in_box(&bounds, |idx| all.push(idx.to_vec()));
        let values: Vec<(f64, Vec<usize>)> = all
            .into_par_iter()
            .map(|idx| self.value(&idx).map(|v| (v, idx)))
            .collect::<Result<_>>()?;
        Ok(values
            .into_iter()
            .fold((0.0, Vec::new()), |best, cur| if cur.0 > best.0 { cur } else { best }))
    }
}

fn check_index(shape: &[usize], k: usize, idx: &[usize]) -> Result<()> {
    if idx.len() != shape.len() || idx.iter().zip(shape).any(|(&j, &n)| j <= k || j > n) {
        return Err(Error::Index(format!("index {idx:?} outside the reduced box for shape {shape:?}, k={k}")));
    }
    Ok(())
}

/// Exact antiprojection of the atom `idx` onto the atoms indexed by `set`.
pub fn antiprojection_exact(shape: &[usize], k: usize, set: &[Vec<usize>], idx: &[usize]) -> Result<Antiprojection> {
    let p = Antiprojector::new(shape, k, set)?;
    Ok(Antiprojection { value: p.value(idx)?, regularized: p.regularized() })
}
