//! Original and partially orthonormalized dictionaries, per axis and as
//! product dictionaries.
//!
//! Columns of the partially orthonormalized dictionary `phi~` are never stored
//! densely. For `j > k` each column is the projection onto the complement of
//! the polynomial null space of a truncated polynomial; the truncated
//! polynomial is taken supported to the right of `j` or, equivalently modulo
//! the null space, to the left of `j`, whichever side is shorter. This keeps
//! the projection free of cancellation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::diff::binomial;
use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

#[derive(Debug)]
pub struct Dictionary1D {
    n: usize,
    k: usize,
    null: Vec<Vec<f64>>,
    split: usize,
    scale: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Generalized binomial coefficient `C(x, r)` for a signed integer `x`.
fn gbinom(x: i64, r: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..r {
        c = c * (x - i as i64) as f64 / (i + 1) as f64;
    }
    c
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Invalid("order k must be at least 1".into()));
    }
    if k >= n {
        return Err(Error::Order { k, extent: n, axis: 0 });
    }
    Ok(())
}

impl Dictionary1D {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        check_nk(n, k)?;
        let null = match gram_polynomials(n, k) {
            Some(null) => null,
            None => orthonormal_polynomials(n, k)?,
        };
        let mut dict = Self { n, k, null, split: k + (n - k) / 2, scale: (n as f64).powi(1 - k as i32) };
        for h in 1..=k {
            let reference = phi_column_closed(n, h, h);
            if dot(&dict.null[h - 1], &reference) < 0.0 {
                dict.null[h - 1].iter_mut().for_each(|x| *x = -*x);
            }
        }
        Ok(dict)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn reduced_len(&self) -> usize {
        self.n - self.k
    }

    /// Unit-norm null-space direction `h` (1-based), equal to `phi~_h / sqrt(n)`.
    pub fn null_vector(&self, h: usize) -> &[f64] {
        &self.null[h - 1]
    }

    pub fn null_coefficients(&self, x: &[f64]) -> Vec<f64> {
        self.null.iter().map(|q| dot(q, x)).collect()
    }

    /// Removes the null-space component of `x` in place.
    pub fn antiproject(&self, x: &mut [f64]) {
        for q in &self.null {
            let c = dot(q, x);
            x.iter_mut().zip(q).for_each(|(xi, qi)| *xi -= c * qi);
        }
    }

    /// Column `j` (1-based) of the original dictionary of order `k`.
    pub fn phi_column(&self, j: usize) -> Vec<f64> {
        phi_column_closed(self.n, self.k, j)
    }

    /// Column `j` (1-based) of the partially orthonormalized dictionary.
    pub fn tilde_column(&self, j: usize) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        assert!((1..=n).contains(&j), "column {j} out of range 1..={n}");
        if j <= k {
            let s = (n as f64).sqrt();
            return self.null[j - 1].iter().map(|x| x * s).collect();
        }
        let mut col = vec![0.0; n];
        if j <= self.split {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            for (jp, c) in col.iter_mut().enumerate().take(j - 1) {
                *c = sign * self.scale * binomial(j - (jp + 1) - 1, k - 1);
            }
        } else {
            for (jp, c) in col.iter_mut().enumerate().skip(j - 1) {
                *c = self.scale * binomial(jp + 1 - j + k - 1, k - 1);
            }
        }
        self.antiproject(&mut col);
        col
    }

    /// `out = sum_{j > k} b_{j-k} phi~_j`, with `b` of length `n - k`.
    pub fn synthesize(&self, b: &[f64], out: &mut [f64]) {
        let (n, k) = (self.n, self.k);
        debug_assert_eq!(b.len(), n - k);
        let mut left = vec![0.0; n];
        out.iter_mut().for_each(|x| *x = 0.0);
        for (o, &bo) in b.iter().enumerate() {
            let j = o + k + 1;
            if j <= self.split {
                left[j - 1] = bo;
            } else {
                out[j - 1] = bo;
            }
        }
        for _ in 0..k {
            let mut acc = 0.0;
            for x in out.iter_mut() {
                acc += *x;
                *x = acc;
            }
            let mut acc = 0.0;
            for x in left.iter_mut().rev() {
                let v = *x;
                *x = acc;
                acc += v;
            }
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (o, l) in out.iter_mut().zip(&left) {
            *o = self.scale * (*o + sign * l);
        }
        self.antiproject(out);
    }

    /// Adjoint of [`Self::synthesize`]: `out_{j-k} = <phi~_j, r>` for `j > k`.
    pub fn analyze(&self, r: &[f64], out: &mut [f64]) {
        let (n, k) = (self.n, self.k);
        debug_assert_eq!(r.len(), n);
        let mut right = r.to_vec();
        self.antiproject(&mut right);
        let mut left = right.clone();
        for _ in 0..k {
            let mut acc = 0.0;
            for x in right.iter_mut().rev() {
                acc += *x;
                *x = acc;
            }
            let mut acc = 0.0;
            for x in left.iter_mut() {
                let v = *x;
                *x = acc;
                acc += v;
            }
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (o, y) in out.iter_mut().enumerate() {
            let j = o + k + 1;
            *y = if j <= self.split {
                self.scale * sign * left[j - 1]
            } else {
                self.scale * right[j - 1]
            };
        }
    }

    /// Largest eigenvalue of `S^T S` where `S` is the synthesis map.
    pub fn synthesis_norm_sq(&self) -> f64 {
        let m = self.reduced_len();
        let mut v: Vec<f64> = (0..m).map(|i| 1.0 + (i as f64 * 0.618).sin() * 0.1).collect();
        let mut full = vec![0.0; self.n];
        let mut w = vec![0.0; m];
        let mut lambda = 0.0;
        for _ in 0..200 {
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            self.synthesize(&v, &mut full);
            self.analyze(&full, &mut w);
            let next = dot(&v, &w);
            std::mem::swap(&mut v, &mut w);
            if (next - lambda).abs() <= 1e-10 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda
    }
}

/// Unit-norm discrete orthogonal polynomials of degree `< k` on `1..=n`,
/// evaluated in exact integer arithmetic. `None` on overflow.
fn gram_polynomials(n: usize, k: usize) -> Option<Vec<Vec<f64>>> {
    let ints = gram_polynomials_int(n, k)?;
    let mut out = Vec::with_capacity(k);
    for g in ints {
        let s = g.iter().try_fold(0i128, |acc, &v| acc.checked_add(v.checked_mul(v)?))?;
        let norm = (s as f64).sqrt();
        out.push(g.iter().map(|&v| v as f64 / norm).collect());
    }
    Some(out)
}

/// Integer-valued discrete orthogonal polynomials of degree `< k` on `1..=n`
/// from the three-term recurrence in `u = 2x - (n - 1)`. `None` on overflow.
pub(crate) fn gram_polynomials_int(n: usize, k: usize) -> Option<Vec<Vec<i128>>> {
    let nn = (n as i128).checked_mul(n as i128)?;
    let u: Vec<i128> = (0..n as i128).map(|x| 2 * x - (n as i128 - 1)).collect();
    let mut prev: Vec<i128> = vec![0; n];
    let mut cur: Vec<i128> = vec![1; n];
    let mut out = Vec::with_capacity(k);
    for m in 0..k {
        out.push(cur.clone());
        if m + 1 == k {
            break;
        }
        let m = m as i128;
        let (a, b) = if m == 0 {
            (1, 0)
        } else if m == 1 {
            (3, nn - 1)
        } else {
            (4 * m * m - 1, (m * m).checked_mul(nn - m * m)?.checked_mul(4 * (m - 1) * (m - 1) - 1)?)
        };
        let mut next = vec![0i128; n];
        for i in 0..n {
            let t = a.checked_mul(u[i])?.checked_mul(cur[i])?;
            next[i] = t.checked_sub(b.checked_mul(prev[i])?)?;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    Some(out)
}

/// Gram-Schmidt with reorthogonalization on monomials of a centered coordinate.
fn orthonormal_polynomials(n: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    let mut null: Vec<Vec<f64>> = Vec::with_capacity(k);
    let denom = (n as f64 - 1.0).max(1.0);
    for h in 0..k {
        let mut v: Vec<f64> = (0..n)
            .map(|j| ((2.0 * j as f64 - (n as f64 - 1.0)) / denom).powi(h as i32))
            .collect();
        for _ in 0..2 {
            for q in &null {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical(format!("degenerate polynomial basis for n = {n}, k = {k}")));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        null.push(v);
    }
    Ok(null)
}

/// Column `j` of the original dictionary of order `k` in closed form:
/// `n^{-(k'-1)} C(j' - j + k' - 1, k' - 1) 1{j' >= j}` with `k' = min(j, k)`.
pub fn phi_column_closed(n: usize, k: usize, j: usize) -> Vec<f64> {
    let kk = j.min(k);
    let scale = (n as f64).powi(1 - kk as i32);
    (1..=n)
        .map(|jp| if jp >= j { scale * gbinom((jp + kk - 1 - j) as i64, kk - 1) } else { 0.0 })
        .collect()
}

/// All columns of the original dictionary built by the defining recursion.
pub fn build_phi(n: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    check_nk(n, k)?;
    let nf = n as f64;
    let mut orders: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k);
    let first: Vec<Vec<f64>> = (1..=n)
        .map(|j| (1..=n).map(|jp| if jp >= j { 1.0 } else { 0.0 }).collect())
        .collect();
    orders.push(first);
    for m in 2..=k {
        let prev = &orders[m - 2];
        let mut cols = vec![vec![0.0; n]; n];
        let mut tail = vec![0.0; n];
        for j in (m..=n).rev() {
            tail.iter_mut().zip(&prev[j - 1]).for_each(|(t, p)| *t += p / nf);
            cols[j - 1] = tail.clone();
        }
        for (j, col) in cols.iter_mut().enumerate().take(m - 1) {
            *col = orders[j][j].clone();
        }
        orders.push(cols);
    }
    Ok(orders.pop().expect("k >= 1"))
}

/// All columns of the partially orthonormalized dictionary.
pub fn build_tilde_phi(n: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    let dict = dictionary(n, k)?;
    Ok((1..=n).map(|j| dict.tilde_column(j)).collect())
}

type Cache = Mutex<HashMap<(usize, usize), Arc<Dictionary1D>>>;

/// Cached per-axis dictionary for `(n, k)`.
pub fn dictionary(n: usize, k: usize) -> Result<Arc<Dictionary1D>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(d) = cache.lock().expect("dictionary cache poisoned").get(&(n, k)) {
        return Ok(d.clone());
    }
    let d = Arc::new(Dictionary1D::new(n, k)?);
    cache.lock().expect("dictionary cache poisoned").insert((n, k), d.clone());
    Ok(d)
}

/// Product dictionary over a d-dimensional shape.
#[derive(Debug, Clone)]
pub struct ProductDictionary {
    shape: Vec<usize>,
    k: usize,
    dicts: Vec<Arc<Dictionary1D>>,
}

impl ProductDictionary {
    pub fn new(shape: &[usize], k: usize) -> Result<Self> {
        let mut dicts = Vec::with_capacity(shape.len());
        for (axis, &n) in shape.iter().enumerate() {
            dicts.push(dictionary(n, k).map_err(|e| match e {
                Error::Order { k, extent, .. } => Error::Order { k, extent, axis },
                other => other,
            })?);
        }
        Ok(Self { shape: shape.to_vec(), k, dicts })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        numel(&self.shape)
    }

    pub fn axis(&self, axis: usize) -> &Dictionary1D {
        &self.dicts[axis]
    }

    /// Shape of the coefficient tensor, `(n_i - k)_i`.
    pub fn reduced_shape(&self) -> Vec<usize> {
        self.shape.iter().map(|n| n - self.k).collect()
    }

    fn expect_shape(&self, t: &Tensor, shape: &[usize]) -> Result<()> {
        if t.shape() != shape {
            return Err(Error::Shape(format!("expected shape {shape:?}, got {:?}", t.shape())));
        }
        Ok(())
    }

    /// `sum_j b_j phi~_j` over the reduced index set.
    pub fn synthesize(&self, b: &Tensor) -> Result<Tensor> {
        self.expect_shape(b, &self.reduced_shape())?;
        let mut t = b.clone();
        for (axis, d) in self.dicts.iter().enumerate() {
            t = t.map_lines(axis, d.n(), |x, out| d.synthesize(x, out))?;
        }
        Ok(t)
    }

    /// `(<phi~_j, r>)_j` over the reduced index set.
    pub fn analyze(&self, r: &Tensor) -> Result<Tensor> {
        self.expect_shape(r, &self.shape)?;
        let mut t = r.clone();
        for (axis, d) in self.dicts.iter().enumerate() {
            t = t.map_lines(axis, d.reduced_len(), |x, out| d.analyze(x, out))?;
        }
        Ok(t)
    }

    /// Orthogonal projection onto the complement of the null space of `D^k`.
    pub fn project(&self, y: &Tensor) -> Result<Tensor> {
        self.expect_shape(y, &self.shape)?;
        let mut t = y.clone();
        for (axis, d) in self.dicts.iter().enumerate() {
            t = t.map_lines(axis, d.n(), |x, out| {
                out.copy_from_slice(x);
                d.antiproject(out);
            })?;
        }
        Ok(t)
    }

    /// Per-axis columns of the product atom with 1-based multi-index `idx`.
    pub fn atom_factors(&self, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
        if idx.len() != self.shape.len() || idx.iter().zip(&self.shape).any(|(&j, &n)| j == 0 || j > n) {
            return Err(Error::Index(format!("atom index {idx:?} out of range for {:?}", self.shape)));
        }
        Ok(idx.iter().zip(&self.dicts).map(|(&j, d)| d.tilde_column(j)).collect())
    }

    /// Product atom `phi~_{j_1} x ... x phi~_{j_d}`.
    pub fn atom(&self, idx: &[usize]) -> Result<Tensor> {
        let factors = self.atom_factors(idx)?;
        let refs: Vec<&[f64]> = factors.iter().map(|v| v.as_slice()).collect();
        Tensor::outer(&refs)
    }

    /// Largest eigenvalue of `X^T X` for the synthesis map `X`.
    pub fn synthesis_norm_sq(&self) -> f64 {
        self.dicts.iter().map(|d| d.synthesis_norm_sq()).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::total_diff;

    #[test]
    fn second_order_column_example() {
        let phi = build_phi(4, 2).unwrap();
        assert_eq!(phi[2], vec![0.0, 0.0, 0.25, 0.5]);
        assert_eq!(phi_column_closed(4, 2, 3), vec![0.0, 0.0, 0.25, 0.5]);
    }

    #[test]
    fn recursion_matches_closed_form() {
        for k in 1..=4 {
            let phi = build_phi(32, k).unwrap();
            for j in 1..=32 {
                let closed = phi_column_closed(32, k, j);
                for (a, b) in phi[j - 1].iter().zip(&closed) {
                    assert!((a - b).abs() <= 1e-12, "k={k} j={j}");
                }
            }
        }
    }

    #[test]
    fn tilde_identity_1d() {
        for k in 1..=4 {
            for n in [k + 1, 8, 17, 64] {
                let d = Dictionary1D::new(n, k).unwrap();
                for j in 1..=n {
                    let col = Tensor::from_vec(d.tilde_column(j)).unwrap();
                    let dc = total_diff(&col, k).unwrap();
                    for (o, v) in dc.data().iter().enumerate() {
                        let want = if j > k && o + k + 1 == j { 1.0 } else { 0.0 };
                        assert!((v - want).abs() < 1e-9, "n={n} k={k} j={j} o={o} v={v}");
                    }
                }
            }
        }
    }

    #[test]
    fn null_columns_have_norm_n() {
        let d = Dictionary1D::new(20, 3).unwrap();
        for j in 1..=3 {
            let c = d.tilde_column(j);
            assert!((dot(&c, &c) - 20.0).abs() < 1e-10);
        }
    }

    #[test]
    fn synthesize_matches_columns() {
        let d = Dictionary1D::new(13, 3).unwrap();
        let b: Vec<f64> = (0..10).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut out = vec![0.0; 13];
        d.synthesize(&b, &mut out);
        let mut want = vec![0.0; 13];
        for (o, &bo) in b.iter().enumerate() {
            for (w, c) in want.iter_mut().zip(d.tilde_column(o + 4)) {
                *w += bo * c;
            }
        }
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let r: Vec<f64> = (0..13).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut an = vec![0.0; 10];
        d.analyze(&r, &mut an);
        for (o, a) in an.iter().enumerate() {
            assert!((a - dot(&d.tilde_column(o + 4), &r)).abs() < 1e-12);
        }
    }

    #[test]
    fn cache_returns_same_instance() {
        let a = dictionary(10, 2).unwrap();
        let b = dictionary(10, 2).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert!(dictionary(3, 3).is_err());
    }
}
