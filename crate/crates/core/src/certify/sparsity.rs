//! Effective sparsity: the upper bound `n ||(D^k)' w||^2` from an interpolating
//! tensor and a multi-start subgradient lower estimate of the supremum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::{total_diff, total_diff_adjoint};
use crate::error::{Error, Result};
use crate::tensor::{multi_to_flat, Tensor};

/// `n ||(D^k)' w||^2` for `w` on the reduced shape `prod_i (n_i - k)`.
pub fn effective_sparsity_upper(w: &Tensor, k: usize, shape: &[usize]) -> Result<f64> {
    let g = total_diff_adjoint(w, k, shape)?;
    let n: usize = shape.iter().product();
    Ok(n as f64 * g.frobenius_sq())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub iterations: usize,
    pub restarts: usize,
    /// Step at iteration `t` is `step * sqrt(n) / sqrt(t)` along the normalized subgradient.
    pub step: f64,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { iterations: 2000, restarts: 20, step: 0.5, seed: 0 }
    }
}

struct Objective<'a> {
    shape: &'a [usize],
    k: usize,
    /// Flat reduced positions of the jumps and their signs.
    support: Vec<(usize, f64)>,
    /// `1 - v` off the support, zero on it.
    penalty: Vec<f64>,
}

impl Objective<'_> {
    /// Objective value and a supergradient in coefficient space.
    fn eval(&self, f: &Tensor) -> Result<(f64, Tensor)> {
        let b = total_diff(f, self.k)?;
        let mut g = Tensor::zeros(b.shape())?;
        let mut value = 0.0;
        let gd = g.data_mut();
        for (j, (&bj, &p)) in b.data().iter().zip(&self.penalty).enumerate() {
            if p != 0.0 {
                value -= p * bj.abs();
                gd[j] = if bj > 0.0 { -p } else if bj < 0.0 { p } else { 0.0 };
            }
        }
        for &(j, q) in &self.support {
            value += q * b.data()[j];
            gd[j] = q;
        }
        Ok((value, g))
    }

    fn ascend(&self, start: Tensor, opts: &OracleOptions) -> Result<f64> {
        let n = start.len() as f64;
        let radius = n.sqrt();
        let mut f = start;
        let mut best = f64::NEG_INFINITY;
        for t in 1..=opts.iterations {
            let (value, g) = self.eval(&f)?;
            best = best.max(value);
            let grad = total_diff_adjoint(&g, self.k, self.shape)?;
            let norm = grad.frobenius_sq().sqrt();
            if norm == 0.0 {
                break;
            }
            f.axpy(opts.step * radius / ((t as f64).sqrt() * norm), &grad)?;
            let fnorm = f.frobenius_sq().sqrt();
            if fnorm > radius {
                f.scale(radius / fnorm);
            }
        }
        let (value, _) = self.eval(&f)?;
        Ok(best.max(value))
    }
}

/// Lower estimate of the effective sparsity `Gamma^2` for jumps `jumps` (1-based
/// indices in `prod_i [k+1 : n_i]`) with signs `signs` and noise weights `v` on the
/// reduced shape. Returns the square of the best value found, floored at 0.
pub fn effective_sparsity_oracle(
    shape: &[usize],
    k: usize,
    jumps: &[Vec<usize>],
    signs: &[f64],
    v: &Tensor,
    opts: &OracleOptions,
) -> Result<f64> {
    let reduced: Vec<usize> = shape.iter().map(|&n| n.saturating_sub(k)).collect();
    if v.shape() != reduced.as_slice() {
        return Err(Error::Shape(format!("weights of shape {:?}, expected {reduced:?}", v.shape())));
    }
    if jumps.len() != signs.len() {
        return Err(Error::Invalid("one sign per jump is required".into()));
    }
    if opts.restarts == 0 || opts.iterations == 0 {
        return Err(Error::Invalid("the oracle needs at least one restart and one iteration".into()));
    }
    let mut penalty: Vec<f64> = v.data().iter().map(|&x| 1.0 - x).collect();
    let mut support = Vec::with_capacity(jumps.len());
    for (t, &q) in jumps.iter().zip(signs) {
        let pos: Vec<usize> = t.iter().map(|&j| j.wrapping_sub(k)).collect();
        let flat = multi_to_flat(&reduced, &pos)?;
        penalty[flat] = 0.0;
        support.push((flat, q));
    }
    if support.is_empty() {
        return Ok(0.0);
    }
    let obj = Objective { shape, k, support, penalty };
    let base = signs[0];
    let values: Vec<f64> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
            let g = Tensor::from_fn(&reduced, |_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                base * z
            })?;
            let mut start = total_diff_adjoint(&g, k, shape)?;
            let norm = start.frobenius_sq().sqrt();
            if norm > 0.0 {
                start.scale((start.len() as f64).sqrt() / norm);
            }
            obj.ascend(start, opts)
        })
        .collect::<Result<_>>()?;
    let best = values.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(best.max(0.0).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::interp::{build_interpolating_tensor, interp_polys};
    use crate::certify::weights::{noise_weights, WeightForm};
    use crate::grid::{ActiveSet, BoxRule};

    fn quick() -> OracleOptions {
        OracleOptions { iterations: 400, restarts: 6, ..Default::default() }
    }

    #[test]
    fn zero_w_gives_zero() {
        let w = Tensor::zeros(&[7, 7]).unwrap();
        assert_eq!(effective_sparsity_upper(&w, 1, &[8, 8]).unwrap(), 0.0);
    }

    #[test]
    fn empty_support_gives_zero() {
        let v = Tensor::zeros(&[15]).unwrap();
        assert_eq!(effective_sparsity_oracle(&[16], 1, &[], &[], &v, &quick()).unwrap(), 0.0);
    }

    #[test]
    fn centered_jump_upper_scaling() {
        let n = 64;
        let s = ActiveSet::new(&[n], 1, vec![vec![33]], BoxRule::Standard).unwrap();
        let t = s.tessellate().unwrap();
        let polys = interp_polys(1).unwrap();
        let b = noise_weights(&t, polys.c_floor(), WeightForm::Linear).unwrap();
        let it = build_interpolating_tensor(&t, &[1.0], &polys, &b).unwrap();
        let upper = effective_sparsity_upper(&it.w, 1, &[n]).unwrap();
        let cell = &t.cells()[0];
        let reference = n as f64 / cell.d_minus(0) as f64 + n as f64 / cell.d_plus(0, 1) as f64;
        assert!(upper <= 8.0 * reference && upper >= reference / 8.0, "{upper} vs {reference}");
    }

    #[test]
    fn oracle_below_upper_and_sign_symmetric() {
        let n = 16;
        let s = ActiveSet::new(&[n], 1, vec![vec![9]], BoxRule::Standard).unwrap();
        let t = s.tessellate().unwrap();
        let polys = interp_polys(1).unwrap();
        let b = noise_weights(&t, polys.c_floor(), WeightForm::Linear).unwrap();
        let it = build_interpolating_tensor(&t, &[1.0], &polys, &b).unwrap();
        let upper = effective_sparsity_upper(&it.w, 1, &[n]).unwrap();
        let plus = effective_sparsity_oracle(&[n], 1, &[vec![9]], &[1.0], &b.v, &quick()).unwrap();
        let minus = effective_sparsity_oracle(&[n], 1, &[vec![9]], &[-1.0], &b.v, &quick()).unwrap();
        assert!(plus > 0.0 && plus <= upper + 1e-6, "{plus} vs {upper}");
        assert!((plus - minus).abs() <= 1e-9 * plus.max(1.0), "{plus} vs {minus}");
    }

    #[test]
    fn oracle_is_deterministic() {
        let v = Tensor::zeros(&[9, 9]).unwrap();
        let a = effective_sparsity_oracle(&[10, 10], 1, &[vec![5, 6]], &[1.0], &v, &quick()).unwrap();
        let b = effective_sparsity_oracle(&[10, 10], 1, &[vec![5, 6]], &[1.0], &v, &quick()).unwrap();
        assert_eq!(a, b);
    }
}
