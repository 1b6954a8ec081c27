//! Dictionary identity `D^k phi~_j = 1{j}` evaluated in double-double
//! arithmetic.
//!
//! In binary64 the scaled difference operator amplifies the rounding of an
//! atom by up to `prod_i 2^k n_i^{k-1}`, so the identity can only be
//! resolved to `1e-9` with a wider format. Columns are rebuilt from the
//! integer Gram polynomials and truncated binomials, differenced in
//! double-double, and compared against the binary64 columns of the
//! production dictionary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::dictionary::{gram_polynomials_int, Dictionary1D, ProductDictionary};
use crate::error::{Error, Result};
use crate::grid::for_each_in_box;

fn binom_i128(x: i128, r: usize) -> i128 {
    let mut c: i128 = 1;
    for i in 0..r as i128 {
        c = c * (x - i) / (i + 1);
    }
    c
}

fn overflow(n: usize, k: usize) -> Error {
    Error::Numerical(format!("integer overflow building extended columns for n = {n}, k = {k}"))
}

/// All columns `phi~_1 .. phi~_n` of the order-`k` dictionary on `1..=n` in double-double.
pub fn tilde_columns_dd(n: usize, k: usize) -> Result<Vec<Vec<TwoFloat>>> {
    Dictionary1D::new(n, k)?;
    let ints = gram_polynomials_int(n, k).ok_or_else(|| overflow(n, k))?;
    let norms: Vec<i128> = ints
        .iter()
        .map(|g| g.iter().try_fold(0i128, |a, &v| a.checked_add(v.checked_mul(v)?)))
        .collect::<Option<_>>()
        .ok_or_else(|| overflow(n, k))?;
    let mut cols = Vec::with_capacity(n);
    for (h, (g, &nsq)) in ints.iter().zip(&norms).enumerate() {
        let h = h + 1;
        let orient: i128 = (h..=n).map(|jp| g[jp - 1] * binom_i128(jp as i128 - 1, h - 1)).sum();
        let factor = (TwoFloat::from(n as i128) / TwoFloat::from(nsq)).sqrt();
        let factor = if orient < 0 { -factor } else { factor };
        cols.push(g.iter().map(|&v| factor * TwoFloat::from(v)).collect());
    }
    let scale = TwoFloat::from((n as i128).pow(k as u32 - 1));
    for j in k + 1..=n {
        let b: Vec<i128> = (1..=n)
            .map(|jp| if jp >= j { binom_i128((jp - j + k - 1) as i128, k - 1) } else { 0 })
            .collect();
        let mut col: Vec<TwoFloat> = b.iter().map(|&v| TwoFloat::from(v)).collect();
        for (g, &nsq) in ints.iter().zip(&norms) {
            let ip = g
                .iter()
                .zip(&b)
                .try_fold(0i128, |a, (&x, &y)| a.checked_add(x.checked_mul(y)?))
                .ok_or_else(|| overflow(n, k))?;
            let c = TwoFloat::from(ip) / TwoFloat::from(nsq);
            for (x, &gv) in col.iter_mut().zip(g) {
                *x -= c * TwoFloat::from(gv);
            }
        }
        cols.push(col.into_iter().map(|x| x / scale).collect());
    }
    Ok(cols)
}

/// Unscaled `D^k` in double-double on a row-major tensor.
fn total_diff_dd(mut data: Vec<TwoFloat>, shape: &[usize], k: usize) -> Vec<TwoFloat> {
    let mut cur = shape.to_vec();
    for axis in 0..shape.len() {
        let n = cur[axis];
        let inner: usize = cur[axis + 1..].iter().product();
        let m = n - k;
        let mut out = Vec::with_capacity(data.len() / n * m);
        for block in data.chunks_exact_mut(n * inner) {
            for r in 1..=k {
                for t in (r..n).rev() {
                    let (lo, hi) = block.split_at_mut(t * inner);
                    for (x, &y) in hi[..inner].iter_mut().zip(&lo[(t - 1) * inner..]) {
                        *x -= y;
                    }
                }
            }
            out.extend_from_slice(&block[k * inner..]);
        }
        data = out;
        cur[axis] = m;
    }
    data
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `max |D^k phi~_j - 1{j}|` over all atoms, in double-double.
    pub identity_error: f64,
    /// `max |phi~_j - phi~_j^{f64}|` over all axes and columns of the production dictionary.
    pub column_deviation: f64,
}

/// Identity check over every atom of the product dictionary on `shape`.
pub fn dictionary_identity_extended(shape: &[usize], k: usize) -> Result<IdentityCheck> {
    let dict = ProductDictionary::new(shape, k)?;
    let mut cols = Vec::with_capacity(shape.len());
    let mut column_deviation: f64 = 0.0;
    for (axis, &n) in shape.iter().enumerate() {
        let c = tilde_columns_dd(n, k)?;
        for (j, col) in c.iter().enumerate() {
            let f = dict.axis(axis).tilde_column(j + 1);
            for (a, b) in col.iter().zip(&f) {
                column_deviation = column_deviation.max((*a - *b).hi().abs());
            }
        }
        cols.push(c);
    }
    let bounds: Vec<(usize, usize)> = shape.iter().map(|&n| (1, n)).collect();
    let mut all = Vec::new();
    for_each_in_box(&bounds, |idx| all.push(idx.to_vec()));
    let reduced = dict.reduced_shape();
    let errors: Vec<f64> = all
        .par_iter()
        .map(|idx| {
            let mut atom = vec![TwoFloat::from(1.0)];
            for (axis, &j) in idx.iter().enumerate() {
                let col = &cols[axis][j - 1];
                atom = atom.iter().flat_map(|&a| col.iter().map(move |&c| a * c)).collect();
            }
            let b = total_diff_dd(atom, shape, k);
            let scale: f64 = shape.iter().map(|&n| (n as f64).powi(k as i32 - 1)).product();
            let target = idx
                .iter()
                .zip(&reduced)
                .try_fold(0usize, |f, (&j, &m)| (j > k).then(|| f * m + (j - k - 1)));
            b.iter()
                .enumerate()
                .map(|(f, &v)| {
                    let t = if Some(f) == target { 1.0 } else { 0.0 };
                    ((v.hi() * scale - t) + v.lo() * scale).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(IdentityCheck { identity_error: errors.into_iter().fold(0.0, f64::max), column_deviation })
}
