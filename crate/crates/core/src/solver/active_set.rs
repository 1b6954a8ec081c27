//! Sign-constrained active-set (feature-sign) solver.
//!
//! Works on the scaled objective `1/2 ||y - X b||^2 + c ||b||_1` with
//! `c = lambda n`. Each step solves the equality-constrained least-squares
//! problem on the active set through a thin QR factorization of the active
//! atoms, followed by an exact line search over sign changes.

use std::collections::{HashMap, HashSet};

use super::qr::IncrementalQr;
use super::{FitResult, Problem};
use crate::error::Result;
use crate::tensor::{flat_to_multi, Tensor};

struct AtomCache<'a> {
    problem: &'a Problem,
    reduced: Vec<usize>,
    columns: HashMap<(usize, usize), Vec<f64>>,
}

impl<'a> AtomCache<'a> {
    fn atom(&mut self, flat: usize) -> Vec<f64> {
        let k = self.problem.dict.k();
        let idx = flat_to_multi(&self.reduced, flat).expect("reduced index in range");
        let mut out = vec![1.0];
        for (axis, &o) in idx.iter().enumerate() {
            let j = o + k;
            let col = self
                .columns
                .entry((axis, j))
                .or_insert_with(|| self.problem.dict.axis(axis).tilde_column(j));
            let mut next = Vec::with_capacity(out.len() * col.len());
            for &a in &out {
                next.extend(col.iter().map(|c| a * c));
            }
            out = next;
        }
        out
    }
}

struct State {
    active: Vec<usize>,
    beta: Vec<f64>,
    theta: Vec<f64>,
    qr: IncrementalQr,
}

impl State {
    fn remove_zeros(&mut self) {
        let mut i = 0;
        while i < self.active.len() {
            if self.beta[i] == 0.0 {
                self.active.remove(i);
                self.beta.remove(i);
                self.theta.remove(i);
                self.qr.remove(i);
            } else {
                i += 1;
            }
        }
    }

    fn scatter(&self, shape: &[usize]) -> Result<Tensor> {
        let mut t = Tensor::zeros(shape)?;
        for (&a, &b) in self.active.iter().zip(&self.beta) {
            t.data_mut()[a] = b;
        }
        Ok(t)
    }
}

/// One feature-sign step: minimize over the active set with fixed signs and
/// line-search back along sign changes. Returns `false` if nothing moved.
fn feature_sign_step(problem: &Problem, reduced: &[usize], state: &mut State, y: &[f64], c: f64) -> Result<bool> {
    let m = state.active.len();
    if m == 0 {
        return Ok(false);
    }
    let qty = state.qr.qt(y);
    let z = state.qr.solve_rt(&state.theta);
    let rhs: Vec<f64> = qty.iter().zip(&z).map(|(a, b)| a - c * b).collect();
    let mut target = state.qr.solve_r(&rhs);
    // corrected seminormal equations: refine with exact residuals of X_A^T X_A x = X_A^T y - c theta
    for _ in 0..2 {
        let mut b = Tensor::zeros(reduced)?;
        for (&a, &t) in state.active.iter().zip(&target) {
            b.data_mut()[a] = t;
        }
        let mut r = problem.dict.synthesize(&b)?;
        r.data_mut().iter_mut().zip(y).for_each(|(ri, yi)| *ri = yi - *ri);
        let g = problem.dict.analyze(&r)?;
        let s: Vec<f64> = state.active.iter().zip(&state.theta).map(|(&a, &th)| g.data()[a] - c * th).collect();
        let delta = state.qr.solve_r(&state.qr.solve_rt(&s));
        target.iter_mut().zip(&delta).for_each(|(t, d)| *t += d);
    }
    let r_cur = state.qr.r_mul(&state.beta);
    let r_new = state.qr.r_mul(&target);
    let value = |t: f64| -> f64 {
        let quad: f64 = (0..m)
            .map(|i| {
                let e = qty[i] - ((1.0 - t) * r_cur[i] + t * r_new[i]);
                e * e
            })
            .sum();
        let l1: f64 = (0..m).map(|i| ((1.0 - t) * state.beta[i] + t * target[i]).abs()).sum();
        0.5 * quad + c * l1
    };
    let mut candidates: Vec<(f64, Option<usize>)> = vec![(1.0, None)];
    for (i, (&b0, &b1)) in state.beta.iter().zip(target.iter()).enumerate() {
        if b0 != 0.0 && b0.signum() != b1.signum() && b0 != b1 {
            let t = b0 / (b0 - b1);
            if t > 0.0 && t < 1.0 {
                candidates.push((t, Some(i)));
            }
        }
    }
    let start = value(0.0);
    let (t_best, hit, v_best) = candidates
        .iter()
        .map(|&(t, i)| (t, i, value(t)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least one candidate");
    let moved = v_best < start || state.beta.contains(&0.0);
    for (b, &g) in state.beta.iter_mut().zip(target.iter()) {
        *b = (1.0 - t_best) * *b + t_best * g;
    }
    if let Some(i) = hit {
        state.beta[i] = 0.0;
    }
    for i in 0..m {
        if state.beta[i] != 0.0 {
            state.theta[i] = state.beta[i].signum();
        }
    }
    state.remove_zeros();
    Ok(moved)
}

pub(super) fn solve(problem: &Problem, warm: Tensor, tol: f64, max_iter: usize) -> Result<FitResult> {
    let reduced = problem.dict.reduced_shape();
    let n = problem.n;
    let c = problem.lambda * n;
    // scaled tolerance: gradient of the scaled objective is (n/2) times the original one
    let tol_s = tol * n / 2.0;
    let y = problem.y.data().to_vec();
    let mut cache = AtomCache { problem, reduced: reduced.clone(), columns: HashMap::new() };
    let mut state = State { active: Vec::new(), beta: Vec::new(), theta: Vec::new(), qr: IncrementalQr::new() };
    let mut excluded: HashSet<usize> = HashSet::new();
    for (flat, &b) in warm.data().iter().enumerate() {
        if b != 0.0 {
            let atom = cache.atom(flat);
            if state.qr.push(&atom) {
                state.active.push(flat);
                state.beta.push(b);
                state.theta.push(b.signum());
            }
        }
    }
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let beta = state.scatter(&reduced)?;
        let mut grad = problem.gradient(&beta)?;
        grad.scale(n / 2.0);
        let g = grad.data();
        let nz_viol = state
            .active
            .iter()
            .zip(&state.theta)
            .map(|(&a, &th)| (g[a] + c * th).abs())
            .fold(0.0, f64::max);
        let in_active: HashSet<usize> = state.active.iter().copied().collect();
        let mut violators: Vec<(usize, f64)> = g
            .iter()
            .enumerate()
            .filter(|(j, gj)| gj.abs() > c + tol_s && !in_active.contains(j) && !excluded.contains(j))
            .map(|(j, gj)| (j, gj.abs()))
            .collect();
        trace.push(problem.objective(&beta)?);
        if nz_viol <= tol_s && violators.is_empty() {
            break;
        }
        if nz_viol <= tol_s {
            violators.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let batch = (state.active.len() / 2).max(1);
            let mut added = 0;
            for &(j, _) in &violators {
                if added == batch {
                    break;
                }
                let atom = cache.atom(j);
                if state.qr.push(&atom) {
                    state.active.push(j);
                    state.beta.push(0.0);
                    state.theta.push(-g[j].signum());
                    added += 1;
                } else {
                    excluded.insert(j);
                }
            }
            if added == 0 {
                continue;
            }
        }
        if !feature_sign_step(problem, &reduced, &mut state, &y, c)? && nz_viol > tol_s {
            break;
        }
    }
    let beta = state.scatter(&reduced)?;
    problem.finish(beta, iterations, tol, trace)
}
