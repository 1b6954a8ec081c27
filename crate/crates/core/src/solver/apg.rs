//! Accelerated proximal gradient with function-value restart.

use super::{FitResult, Problem};
use crate::error::Result;
use crate::tensor::Tensor;

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub(super) fn solve(problem: &Problem, warm: Tensor, tol: f64, max_iter: usize) -> Result<FitResult> {
    let lipschitz = 2.0 * problem.dict.synthesis_norm_sq() / problem.n * 1.02;
    let step = 1.0 / lipschitz;
    let thresh = 2.0 * problem.lambda * step;
    let mut x = warm;
    let mut z = x.clone();
    let mut t = 1.0_f64;
    let mut f_prev = problem.objective(&x)?;
    let mut trace = vec![f_prev];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let g = problem.gradient(&z)?;
        let mut x_new = z.clone();
        for (xi, gi) in x_new.data_mut().iter_mut().zip(g.data()) {
            *xi = soft(*xi - step * gi, thresh);
        }
        let f_new = problem.objective(&x_new)?;
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if f_new > f_prev {
            t = 1.0;
            z = x.clone();
            continue;
        }
        let momentum = (t - 1.0) / t_new;
        z = x_new.clone();
        for ((zi, xn), xo) in z.data_mut().iter_mut().zip(x_new.data()).zip(x.data()) {
            *zi = xn + momentum * (xn - xo);
        }
        x = x_new;
        t = t_new;
        f_prev = f_new;
        trace.push(f_new);
        if iterations % 25 == 0 && problem.kkt(&x)? <= tol {
            break;
        }
    }
    problem.finish(x, iterations, tol, trace)
}
