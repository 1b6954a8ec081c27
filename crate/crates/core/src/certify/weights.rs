//! Antiprojection bounds `v~`, the inverse scaling factor `gamma~` and the
//! noise weights `v` of a hyperrectangular tessellation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{for_each_in_box, AxisRegion, Cell, Tessellation};
use crate::tensor::Tensor;

/// How the per-axis terms `v_{i,m} = x^{(2k-1)/2}` enter the noise weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightForm {
    /// `v = (1/d) sum_i v_{i,m} / C`.
    #[default]
    Linear,
    /// `v = (1/d) sum_i sqrt(v_{i,m}) / C`.
    Sqrt,
}

/// Squared per-axis bound `((distance to the block) / n_i)^{2k-1}`.
fn tilde_term(region: AxisRegion, n: usize, k: usize) -> f64 {
    (region.distance() as f64 / n as f64).powi(2 * k as i32 - 1)
}

/// `v_{i,m}(j) = (dist / d^{+-})^{(2k-1)/2}`.
fn weight_term(region: AxisRegion, k: usize) -> f64 {
    region.fraction().powf((2 * k - 1) as f64 / 2.0)
}

fn cell_tilde(cell: &Cell, shape: &[usize], k: usize, idx: &[usize]) -> f64 {
    idx.iter().enumerate().map(|(i, &j)| tilde_term(cell.region(i, j, k), shape[i], k)).sum::<f64>().sqrt()
}

fn cell_weight(cell: &Cell, k: usize, c: f64, form: WeightForm, idx: &[usize]) -> f64 {
    let d = idx.len() as f64;
    let sum: f64 = idx
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let t = weight_term(cell.region(i, j, k), k);
            match form {
                WeightForm::Linear => t,
                WeightForm::Sqrt => t.sqrt(),
            }
        })
        .sum();
    sum / (d * c)
}

/// Bound on the antiprojection of the atom `idx`: the smallest per-cell bound
/// over the cells containing `idx`.
pub fn antiprojection_bound(tess: &Tessellation, idx: &[usize]) -> Result<f64> {
    let cells = tess.cells_containing(idx);
    if cells.is_empty() || idx.len() != tess.shape().len() {
        return Err(Error::Domain(format!("index {idx:?} is not covered by the tessellation")));
    }
    Ok(cells
        .iter()
        .map(|&m| cell_tilde(&tess.cells()[m], tess.shape(), tess.k(), idx))
        .fold(f64::INFINITY, f64::min))
}

/// `gamma~ = C d sqrt(sum_i (d_{i,max} / n_i)^{2k-1})`.
pub fn gamma_tilde(tess: &Tessellation, c: f64) -> f64 {
    let k = tess.k();
    let d = tess.shape().len();
    let s: f64 = (0..d).map(|i| (tess.d_max(i) as f64 / tess.shape()[i] as f64).powi(2 * k as i32 - 1)).sum();
    c * d as f64 * s.sqrt()
}

#[derive(Debug, Clone)]
pub struct NoiseWeightBundle {
    pub c: f64,
    pub form: WeightForm,
    pub gamma_tilde: f64,
    /// Antiprojection bound on the reduced shape (smallest over containing cells).
    pub tilde_v: Tensor,
    /// Noise weights on the reduced shape (largest over containing cells).
    pub v: Tensor,
    /// `max_m max_{j in R_m} (v~_m(j) - v_m(j) gamma~)`; non-positive when dominance holds.
    pub worst_dominance_gap: f64,
}

impl NoiseWeightBundle {
    pub fn dominance_holds(&self) -> bool {
        self.worst_dominance_gap <= 1e-12
    }
}

pub fn noise_weights(tess: &Tessellation, c: f64, form: WeightForm) -> Result<NoiseWeightBundle> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::Invalid(format!("the noise-weight constant must be at least 1, got {c}")));
    }
    let shape = tess.shape();
    let k = tess.k();
    let reduced: Vec<usize> = shape.iter().map(|&n| n - k).collect();
    let gamma = gamma_tilde(tess, c);
    let mut tilde_v = Tensor::zeros(&reduced)?;
    let mut v = Tensor::zeros(&reduced)?;
    let mut worst = f64::NEG_INFINITY;
    let mut uncovered = None;
    let bounds: Vec<(usize, usize)> = shape.iter().map(|&n| (k + 1, n)).collect();
    let mut flat = 0;
    for_each_in_box(&bounds, |idx| {
        let mut tv = f64::INFINITY;
        let mut wv = f64::NEG_INFINITY;
        for cell in tess.cells().iter().filter(|cell| cell.contains(idx)) {
            let a = cell_tilde(cell, shape, k, idx);
            let b = cell_weight(cell, k, c, form, idx);
            worst = worst.max(a - b * gamma);
            tv = tv.min(a);
            wv = wv.max(b);
        }
        if wv == f64::NEG_INFINITY {
            uncovered.get_or_insert_with(|| idx.to_vec());
        } else {
            tilde_v.data_mut()[flat] = tv;
            v.data_mut()[flat] = wv;
        }
        flat += 1;
    });
    if let Some(idx) = uncovered {
        return Err(Error::Domain(format!("index {idx:?} is not covered by the tessellation")));
    }
    Ok(NoiseWeightBundle { c, form, gamma_tilde: gamma, tilde_v, v, worst_dominance_gap: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{regular_grid, ActiveSet, BoxRule};

    #[test]
    fn bound_formula_example() {
        let s = ActiveSet::new(&[32], 1, vec![vec![17]], BoxRule::Standard).unwrap();
        let t = s.tessellate().unwrap();
        let b = antiprojection_bound(&t, &[13]).unwrap();
        assert!((b - (4.0f64 / 32.0).sqrt()).abs() < 1e-15);
        assert_eq!(antiprojection_bound(&t, &[17]).unwrap(), 0.0);
    }

    #[test]
    fn bound_vanishes_on_blocks() {
        let t = regular_grid(&[24, 24], 3, 2, BoxRule::Standard).unwrap().tessellate().unwrap();
        for cell in t.cells() {
            let block: Vec<(usize, usize)> = cell.jump.iter().map(|&x| (x, x + 2)).collect();
            for_each_in_box(&block, |idx| assert_eq!(antiprojection_bound(&t, idx).unwrap(), 0.0));
        }
    }

    #[test]
    fn single_jump_gamma() {
        for k in 1..=3 {
            let n = 41;
            let s = regular_grid(&[n], k, 1, BoxRule::Standard).unwrap();
            let t = s.tessellate().unwrap();
            let dmax = t.d_max(0) as f64;
            let want = 2.0 * (dmax / n as f64).powf((2 * k - 1) as f64 / 2.0);
            assert!((gamma_tilde(&t, 2.0) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn weights_zero_on_blocks_and_dominate() {
        let t = regular_grid(&[20, 18], 2, 2, BoxRule::Standard).unwrap().tessellate().unwrap();
        for form in [WeightForm::Linear, WeightForm::Sqrt] {
            let b = noise_weights(&t, 1.5, form).unwrap();
            assert!(b.dominance_holds(), "{form:?}: {}", b.worst_dominance_gap);
            assert!(b.v.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
            for cell in t.cells() {
                let idx: Vec<usize> = cell.jump.iter().map(|&x| x - 2).collect();
                assert_eq!(b.v.get(&idx).unwrap(), 0.0);
            }
        }
        assert!(noise_weights(&t, 0.5, WeightForm::Linear).is_err());
    }
}
