//! Ground-truth signals: piecewise products of per-axis polynomials on
//! hyperrectangles, canonical sparse-jump signals, sawtooth profiles and
//! orthant-constant tensors.

use serde::{Deserialize, Serialize};

use crate::dictionary::phi_column_closed;
use crate::diff::total_diff;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A hyperrectangle `prod_i [lower_i, upper_i]` (1-based, inclusive) carrying
/// `prod_i p_i(j_i / n_i)` with `p_i(x) = sum_r coeffs[i][r] x^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub coeffs: Vec<Vec<f64>>,
}

impl Piece {
    fn overlaps(&self, other: &Piece) -> bool {
        self.lower.iter().zip(&self.upper).zip(other.lower.iter().zip(&other.upper)).all(|((a0, a1), (b0, b1))| a0 <= b1 && b0 <= a1)
    }

    fn contains(&self, idx: &[usize]) -> bool {
        idx.iter().zip(self.lower.iter().zip(&self.upper)).all(|(j, (lo, hi))| lo <= j && j <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SignalSpec {
    /// Non-overlapping pieces; entries outside every piece are zero.
    Pieces { pieces: Vec<Piece> },
    /// `amplitude * sum_t (-1)^{t+1} prod_i phi^k_{tau_t}` with `s0` evenly spaced
    /// positions `tau_t` on the diagonal, so that `D^k f` has exactly `s0` nonzeros.
    Jumps { s0: usize, amplitude: f64 },
    /// `amplitude * frac(teeth (j - 1) / n)` on a single axis.
    Sawtooth { teeth: usize, amplitude: f64 },
    /// Constant on each of the `2^d` orthants split at `n_i / 2`; axis 0 is the
    /// most significant bit of the orthant index.
    Quadrants { values: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Signal {
    pub tensor: Tensor,
    /// `TV_k(f) = ||D^k f||_1`.
    pub tv: f64,
    /// Entries of `D^k f` above `1e-9 max(1, max |D^k f|)` in absolute value.
    pub support: usize,
}

fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Diagonal jump positions in `[k+1, n]` for each axis.
fn jump_positions(n: usize, k: usize, s0: usize) -> Result<Vec<usize>> {
    let span = n - k;
    if s0 > span {
        return Err(Error::Invalid(format!("{s0} jumps do not fit into {span} admissible positions")));
    }
    Ok((1..=s0).map(|t| k + 1 + (t * span) / (s0 + 1)).collect())
}

pub fn generate_signal(spec: &SignalSpec, shape: &[usize], k: usize) -> Result<Signal> {
    let d = shape.len();
    if d == 0 {
        return Err(Error::Shape("signals need at least one axis".into()));
    }
    if k == 0 {
        return Err(Error::Invalid("order k must be at least 1".into()));
    }
    if let Some((axis, &n)) = shape.iter().enumerate().find(|(_, &n)| n <= k) {
        return Err(Error::Order { k, extent: n, axis });
    }
    let tensor = match spec {
        SignalSpec::Pieces { pieces } => {
            for p in pieces {
                if p.lower.len() != d || p.upper.len() != d || p.coeffs.len() != d {
                    return Err(Error::Shape(format!("piece {p:?} does not match {d} axes")));
                }
                if p.lower.iter().zip(&p.upper).zip(shape).any(|((&lo, &hi), &n)| lo == 0 || lo > hi || hi > n) {
                    return Err(Error::Index(format!("piece bounds {:?}..{:?} outside {shape:?}", p.lower, p.upper)));
                }
                if p.coeffs.iter().any(|c| c.len() > k) {
                    return Err(Error::Invalid(format!("piece polynomials must have degree at most {}", k - 1)));
                }
            }
            for (a, p) in pieces.iter().enumerate() {
                if let Some(b) = pieces[a + 1..].iter().position(|q| p.overlaps(q)) {
                    return Err(Error::Invalid(format!("pieces {a} and {} overlap", a + 1 + b)));
                }
            }
            Tensor::from_fn(shape, |idx| {
                pieces.iter().find(|p| p.contains(idx)).map_or(0.0, |p| {
                    p.coeffs.iter().zip(idx).zip(shape).map(|((c, &j), &n)| eval_poly(c, j as f64 / n as f64)).product()
                })
            })?
        }
        SignalSpec::Jumps { s0, amplitude } => {
            let positions: Vec<Vec<usize>> = shape.iter().map(|&n| jump_positions(n, k, *s0)).collect::<Result<_>>()?;
            let mut f = Tensor::zeros(shape)?;
            for t in 0..*s0 {
                let cols: Vec<Vec<f64>> = shape.iter().zip(&positions).map(|(&n, p)| phi_column_closed(n, k, p[t])).collect();
                let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                f.axpy(sign * amplitude, &Tensor::outer(&refs)?)?;
            }
            f
        }
        SignalSpec::Sawtooth { teeth, amplitude } => {
            if d != 1 {
                return Err(Error::Shape("the sawtooth signal is one-dimensional".into()));
            }
            if *teeth == 0 {
                return Err(Error::Invalid("a sawtooth needs at least one tooth".into()));
            }
            let n = shape[0] as f64;
            Tensor::from_fn(shape, |idx| amplitude * (*teeth as f64 * (idx[0] - 1) as f64 / n).fract())?
        }
        SignalSpec::Quadrants { values } => {
            if values.len() != 1 << d {
                return Err(Error::Invalid(format!("{d} axes need {} orthant values, got {}", 1 << d, values.len())));
            }
            Tensor::from_fn(shape, |idx| {
                let orthant = idx.iter().zip(shape).fold(0usize, |acc, (&j, &n)| (acc << 1) | usize::from(2 * j > n));
                values[orthant]
            })?
        }
    };
    let diff = total_diff(&tensor, k)?;
    let threshold = 1e-9 * diff.max_abs().max(1.0);
    let support = diff.data().iter().filter(|v| v.abs() > threshold).count();
    if let SignalSpec::Jumps { s0, amplitude } = spec {
        if *amplitude != 0.0 && support != *s0 {
            return Err(Error::Numerical(format!("jump signal has {support} nonzero differences, expected {s0}")));
        }
    }
    Ok(Signal { tv: diff.l1_norm(), tensor, support })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_piece_has_zero_tv() {
        let spec = SignalSpec::Pieces {
            pieces: vec![Piece { lower: vec![1, 1], upper: vec![6, 5], coeffs: vec![vec![2.0], vec![1.5]] }],
        };
        let s = generate_signal(&spec, &[6, 5], 1).unwrap();
        assert!(s.tensor.data().iter().all(|&v| v == 3.0));
        assert_eq!(s.tv, 0.0);
        assert_eq!(s.support, 0);
    }

    #[test]
    fn two_pieces_one_jump() {
        let n = 16;
        let spec = SignalSpec::Pieces {
            pieces: vec![
                Piece { lower: vec![1], upper: vec![n / 2], coeffs: vec![vec![0.0]] },
                Piece { lower: vec![n / 2 + 1], upper: vec![n], coeffs: vec![vec![1.0]] },
            ],
        };
        let s = generate_signal(&spec, &[n], 1).unwrap();
        assert_eq!(s.support, 1);
        assert_eq!(s.tv, 1.0);
    }

    #[test]
    fn overlapping_pieces_rejected() {
        let spec = SignalSpec::Pieces {
            pieces: vec![
                Piece { lower: vec![1], upper: vec![5], coeffs: vec![vec![1.0]] },
                Piece { lower: vec![5], upper: vec![8], coeffs: vec![vec![2.0]] },
            ],
        };
        assert!(matches!(generate_signal(&spec, &[8], 1), Err(Error::Invalid(_))));
    }

    #[test]
    fn jumps_have_exact_support() {
        for (shape, k, s0) in [(vec![64], 1, 2), (vec![64], 3, 5), (vec![20, 24], 2, 3), (vec![10, 9, 11], 1, 4)] {
            let s = generate_signal(&SignalSpec::Jumps { s0, amplitude: 1.0 }, &shape, k).unwrap();
            assert_eq!(s.support, s0, "{shape:?} k={k}");
        }
        assert!(generate_signal(&SignalSpec::Jumps { s0: 9, amplitude: 1.0 }, &[10], 2).is_err());
    }

    #[test]
    fn quadrant_linear_pieces_concentrate_at_the_cross() {
        let (n, k) = (16usize, 2usize);
        let h = n / 2;
        let lin = [[0.3, -1.2], [1.1, 0.4], [-0.7, 0.9], [0.5, 2.0]];
        let mut pieces = Vec::new();
        for (q, (lo0, hi0, lo1, hi1)) in [(1, h, 1, h), (1, h, h + 1, n), (h + 1, n, 1, h), (h + 1, n, h + 1, n)].into_iter().enumerate() {
            pieces.push(Piece { lower: vec![lo0, lo1], upper: vec![hi0, hi1], coeffs: vec![lin[q].to_vec(), vec![1.0, lin[3 - q][1]]] });
        }
        let s = generate_signal(&SignalSpec::Pieces { pieces }, &[n, n], k).unwrap();
        let diff = total_diff(&s.tensor, k).unwrap();
        let reduced = [n - k, n - k];
        for (flat, &v) in diff.data().iter().enumerate() {
            if v.abs() > 1e-9 {
                let idx = crate::tensor::flat_to_multi(&reduced, flat).unwrap();
                let j: Vec<usize> = idx.iter().map(|&r| r + k).collect();
                assert!(j.iter().all(|&x| (h..=h + 2).contains(&x)), "nonzero at {j:?}");
            }
        }
        assert!(s.support > 0);
    }

    #[test]
    fn sawtooth_and_quadrants() {
        let s = generate_signal(&SignalSpec::Sawtooth { teeth: 4, amplitude: 1.0 }, &[64], 1).unwrap();
        assert!((s.tv - (4.0 * 15.0 / 16.0 + 3.0 * 15.0 / 16.0)).abs() < 1e-12, "{}", s.tv);
        let q = generate_signal(&SignalSpec::Quadrants { values: vec![0.0, 1.0, 2.0, 4.0] }, &[4, 4], 1).unwrap();
        assert_eq!(q.tensor.get(&[1, 4]).unwrap(), 1.0);
        assert_eq!(q.tensor.get(&[3, 1]).unwrap(), 2.0);
        assert_eq!(q.support, 1);
    }
}
