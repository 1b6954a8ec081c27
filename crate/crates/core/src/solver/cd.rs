//! Cyclic coordinate descent on materialized atoms.

use super::qr::dot;
use super::{FitResult, Problem};
use crate::error::Result;
use crate::tensor::{flat_to_multi, Tensor};

pub(super) fn solve(problem: &Problem, warm: Tensor, tol: f64, max_iter: usize) -> Result<FitResult> {
    let reduced = problem.dict.reduced_shape();
    let k = problem.dict.k();
    let c = problem.lambda * problem.n;
    let atoms: Vec<Vec<f64>> = (0..warm.len())
        .map(|flat| {
            let idx: Vec<usize> = flat_to_multi(&reduced, flat)
                .expect("reduced index in range")
                .iter()
                .map(|o| o + k)
                .collect();
            problem.dict.atom(&idx).map(|t| t.into_data())
        })
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = atoms.iter().map(|a| dot(a, a)).collect();
    let mut beta = warm;
    let mut resid = problem.y.sub(&problem.dict.synthesize(&beta)?)?.into_data();
    let mut trace = vec![problem.objective(&beta)?];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for (j, atom) in atoms.iter().enumerate() {
            let old = beta.data()[j];
            let rho = dot(atom, &resid) + norms[j] * old;
            let new = if rho > c {
                (rho - c) / norms[j]
            } else if rho < -c {
                (rho + c) / norms[j]
            } else {
                0.0
            };
            if new != old {
                let delta = new - old;
                resid.iter_mut().zip(atom).for_each(|(r, a)| *r -= delta * a);
                beta.data_mut()[j] = new;
            }
        }
        let sq: f64 = resid.iter().map(|r| r * r).sum();
        trace.push(sq / problem.n + 2.0 * problem.lambda * beta.l1_norm());
        if problem.kkt(&beta)? <= tol {
            break;
        }
    }
    problem.finish(beta, iterations, tol, trace)
}
