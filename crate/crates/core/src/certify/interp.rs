//! Piecewise interpolating polynomials `omega` and `w` on `[0, 1]`, their
//! construction by derivative matching, and the interpolating tensor built
//! from them on a tessellation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certify::weights::NoiseWeightBundle;
use crate::error::{Error, Result};
use crate::grid::{for_each_in_box, AxisRegion, Tessellation};
use crate::tensor::Tensor;

/// One polynomial-like piece of a piecewise function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Piece {
    /// `1 - a x^p`.
    OneMinusPower { a: f64, p: f64 },
    /// `sum_j coeffs[j] u^j` with `u = shift - x` if `reflect`, else `x - shift`.
    Poly { shift: f64, reflect: bool, coeffs: Vec<f64> },
    /// `1 - inner(1 - x)`.
    Mirror(Box<Piece>),
}

fn falling(p: f64, r: usize) -> f64 {
    (0..r).map(|i| p - i as f64).product()
}

impl Piece {
    /// `r`-th derivative at `x`.
    pub fn deriv(&self, x: f64, r: usize) -> f64 {
        match self {
            Piece::OneMinusPower { a, p } => {
                if r == 0 {
                    1.0 - a * x.powf(*p)
                } else {
                    -a * falling(*p, r) * x.powf(p - r as f64)
                }
            }
            Piece::Poly { shift, reflect, coeffs } => {
                let (u, s): (f64, f64) = if *reflect { (shift - x, -1.0) } else { (x - shift, 1.0) };
                let mut acc = 0.0;
                for (j, &c) in coeffs.iter().enumerate().skip(r).rev() {
                    acc = acc * u + c * falling(j as f64, r);
                }
                acc * s.powi(r as i32)
            }
            Piece::Mirror(inner) => {
                if r == 0 {
                    1.0 - inner.deriv(1.0 - x, 0)
                } else {
                    -(-1.0f64).powi(r as i32) * inner.deriv(1.0 - x, r)
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.deriv(x, 0)
    }

    /// Free parameters in a canonical order, used to compare two constructions.
    fn parameters(&self) -> Vec<f64> {
        match self {
            Piece::OneMinusPower { a, .. } => vec![*a],
            Piece::Poly { coeffs, .. } => coeffs.clone(),
            Piece::Mirror(inner) => inner.parameters(),
        }
    }

    fn same_form(&self, other: &Piece) -> bool {
        match (self, other) {
            (Piece::OneMinusPower { p, .. }, Piece::OneMinusPower { p: q, .. }) => p == q,
            (Piece::Poly { shift, reflect, .. }, Piece::Poly { shift: s, reflect: r, .. }) => {
                shift == s && reflect == r
            }
            (Piece::Mirror(a), Piece::Mirror(b)) => a.same_form(b),
            _ => false,
        }
    }
}

/// Piecewise function on `[0, 1]`; `pieces[i]` lives on `[knots[i], knots[i+1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    pub knots: Vec<f64>,
    pub pieces: Vec<Piece>,
}

impl PiecewiseFn {
    pub fn new(knots: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if knots.len() != pieces.len() + 1
            || knots.first() != Some(&0.0)
            || knots.last() != Some(&1.0)
            || knots.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Invalid("knots must increase from 0 to 1, one more than pieces".into()));
        }
        Ok(Self { knots, pieces })
    }

    fn piece_index(&self, x: f64) -> usize {
        let last = self.pieces.len() - 1;
        (0..last).find(|&i| x <= self.knots[i + 1]).unwrap_or(last)
    }

    /// Value at `x`, clamped into `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// Largest jump of derivatives `0..order` across the interior knots.
    pub fn continuity_defect(&self, order: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.pieces.len() {
            let x = self.knots[i];
            for r in 0..order {
                let gap = (self.pieces[i - 1].deriv(x, r) - self.pieces[i].deriv(x, r)).abs();
                worst = worst.max(gap);
            }
        }
        worst
    }

    /// Largest increase between consecutive points of an equispaced grid with `points` points.
    pub fn monotonicity_defect(&self, points: usize) -> f64 {
        let xs: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
        let mut worst = f64::NEG_INFINITY;
        let mut prev = self.eval(0.0);
        for &x in &xs[1..] {
            let cur = self.eval(x);
            worst = worst.max(cur - prev);
            prev = cur;
        }
        worst
    }

    /// Largest absolute difference of the free parameters; `None` if the pieces differ in form.
    pub fn coefficient_distance(&self, other: &PiecewiseFn) -> Option<f64> {
        if self.pieces.len() != other.pieces.len() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.pieces.iter().zip(&other.pieces) {
            if !a.same_form(b) {
                return None;
            }
            let (pa, pb) = (a.parameters(), b.parameters());
            for i in 0..pa.len().max(pb.len()) {
                let x = pa.get(i).copied().unwrap_or(0.0);
                let y = pb.get(i).copied().unwrap_or(0.0);
                worst = worst.max((x - y).abs());
            }
        }
        Some(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolySource {
    Printed,
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpPolys {
    pub k: usize,
    pub source: PolySource,
    pub omega: PiecewiseFn,
    pub w: PiecewiseFn,
    /// Constant entering the floor `C >= k^{(2k-1)/2} / a0`.
    pub a0: f64,
}

impl InterpPolys {
    /// `k^{(2k-1)/2} / a0`.
    pub fn c_floor(&self) -> f64 {
        let k = self.k as f64;
        k.powf((2.0 * k - 1.0) / 2.0) / self.a0
    }

    /// Leading coefficient of the first piece of `omega`.
    pub fn omega_leading(&self) -> f64 {
        match &self.omega.pieces[0] {
            Piece::OneMinusPower { a, .. } => *a,
            _ => f64::NAN,
        }
    }

    pub fn check(&self, grid_points: usize) -> PolyCheck {
        let ends = |f: &PiecewiseFn| (f.eval(0.0) - 1.0).abs().max(f.eval(1.0).abs());
        PolyCheck {
            endpoint_defect: ends(&self.omega).max(ends(&self.w)),
            omega_continuity: self.omega.continuity_defect(self.k),
            w_continuity: self.w.continuity_defect(self.k),
            omega_monotonicity: self.omega.monotonicity_defect(grid_points),
            w_monotonicity: self.w.monotonicity_defect(grid_points),
        }
    }
}

/// Diagnostics of a pair `(omega, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyCheck {
    /// `max(|f(0) - 1|, |f(1)|)` over both functions.
    pub endpoint_defect: f64,
    pub omega_continuity: f64,
    pub w_continuity: f64,
    /// Largest increase on the grid; non-positive for a nonincreasing function.
    pub omega_monotonicity: f64,
    pub w_monotonicity: f64,
}

impl PolyCheck {
    pub fn monotone(&self, tol: f64) -> bool {
        self.omega_monotonicity <= tol && self.w_monotonicity <= tol
    }

    pub fn continuity(&self) -> f64 {
        self.omega_continuity.max(self.w_continuity)
    }
}

/// Constants of the floor `C >= k^{(2k-1)/2} / a0` for `k = 1..4`.
pub fn a0_constant(k: usize) -> Option<f64> {
    match k {
        1 => Some(1.0),
        2 => Some(8.0 * 2f64.sqrt() / 7.0),
        3 => Some(144.0 * 3f64.sqrt() / 76.0),
        4 => Some(10.10),
        _ => None,
    }
}

fn equispaced(n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { 1.0 } else { i as f64 / n as f64 }).collect()
}

fn poly(shift: f64, reflect: bool, coeffs: &[f64]) -> Piece {
    Piece::Poly { shift, reflect, coeffs: coeffs.to_vec() }
}

fn omp(a: f64, p: f64) -> Piece {
    Piece::OneMinusPower { a, p }
}

/// Assembles `w` from its half on `[0, 1/2]`, the last piece being the center
/// piece that is symmetric about `1/2`.
fn symmetric_w(half: Vec<Piece>) -> Result<PiecewiseFn> {
    let n = half.len();
    let mut pieces = half.clone();
    pieces.push(half[n - 1].clone());
    for p in half[..n - 1].iter().rev() {
        pieces.push(Piece::Mirror(Box::new(p.clone())));
    }
    PiecewiseFn::new(equispaced(2 * n), pieces)
}

/// The explicit pieces for `k = 1..4`, with the printed precision.
pub fn printed_polys(k: usize) -> Result<InterpPolys> {
    let (omega, w) = match k {
        1 => (
            PiecewiseFn::new(vec![0.0, 1.0], vec![omp(1.0, 0.5)])?,
            PiecewiseFn::new(vec![0.0, 1.0], vec![omp(1.0, 1.0)])?,
        ),
        2 => (
            PiecewiseFn::new(
                equispaced(2),
                vec![omp(8.0 * 2f64.sqrt() / 7.0, 1.5), poly(1.0, true, &[0.0, 0.0, 12.0 / 7.0])],
            )?,
            symmetric_w(vec![omp(8.0 / 3.0, 2.0), poly(0.5, true, &[0.5, 4.0 / 3.0])])?,
        ),
        3 => (
            PiecewiseFn::new(
                equispaced(3),
                vec![
                    omp(144.0 * 3f64.sqrt() / 76.0, 2.5),
                    poly(0.0, false, &[145.0 / 228.0, 255.0 / 76.0, -45.0 / 4.0, 585.0 / 76.0]),
                    poly(1.0, true, &[0.0, 0.0, 0.0, 315.0 / 76.0]),
                ],
            )?,
            symmetric_w(vec![omp(16.0 / 3.0, 3.0), poly(0.5, true, &[0.5, 2.0, 0.0, -16.0 / 3.0])])?,
        ),
        4 => (
            PiecewiseFn::new(
                equispaced(4),
                vec![
                    omp(7.29, 3.5),
                    poly(0.0, false, &[1.12, -2.01, 12.26, -35.36, 27.39]),
                    poly(0.0, false, &[-2.43, 26.44, -73.08, 78.43, -29.51]),
                    poly(1.0, true, &[0.0, 0.0, 0.0, 0.0, 10.10]),
                ],
            )?,
            symmetric_w(vec![
                omp(16.2, 4.0),
                poly(0.0, false, &[1.03, -0.8, 7.2, -28.8, 27.0]),
                poly(0.5, true, &[0.5, 2.2, 0.0, -7.2]),
            ])?,
        ),
        _ => return Err(Error::Invalid(format!("explicit pieces exist for k = 1..4, got {k}"))),
    };
    Ok(InterpPolys { k, source: PolySource::Printed, omega, w, a0: a0_constant(k).expect("k <= 4") })
}

/// A piece with unknown coefficients, used to set up the matching system.
enum Template {
    /// `1 - a x^p`, one unknown `a`.
    Power { p: f64 },
    /// `constant + sum_{j in degrees} c_j u^j`.
    Poly { shift: f64, reflect: bool, constant: f64, degrees: Vec<usize> },
}

impl Template {
    fn unknowns(&self) -> usize {
        match self {
            Template::Power { .. } => 1,
            Template::Poly { degrees, .. } => degrees.len(),
        }
    }

    /// `r`-th derivative at `x` as `constant + sum coef * unknown`.
    fn linear_form(&self, x: f64, r: usize) -> (f64, Vec<f64>) {
        match self {
            Template::Power { p } => {
                let c = if r == 0 { 1.0 } else { 0.0 };
                (c, vec![-falling(*p, r) * x.powf(p - r as f64)])
            }
            Template::Poly { shift, reflect, constant, degrees } => {
                let (u, s): (f64, f64) = if *reflect { (shift - x, -1.0) } else { (x - shift, 1.0) };
                let c = if r == 0 { *constant } else { 0.0 };
                let coefs = degrees
                    .iter()
                    .map(|&j| if j < r { 0.0 } else { falling(j as f64, r) * u.powi((j - r) as i32) * s.powi(r as i32) })
                    .collect();
                (c, coefs)
            }
        }
    }

    fn instantiate(&self, values: &[f64]) -> Piece {
        match self {
            Template::Power { p } => omp(values[0], *p),
            Template::Poly { shift, reflect, constant, degrees } => {
                let len = degrees.iter().copied().max().unwrap_or(0) + 1;
                let mut coeffs = vec![0.0; len];
                coeffs[0] = *constant;
                for (&j, &v) in degrees.iter().zip(values) {
                    coeffs[j] += v;
                }
                poly(*shift, *reflect, &coeffs)
            }
        }
    }
}

/// Solves for the unknowns so that derivatives `0..order` agree at every interior knot.
fn match_derivatives(templates: &[Template], knots: &[f64], order: usize) -> Result<Vec<Piece>> {
    let offsets: Vec<usize> = templates
        .iter()
        .scan(0, |acc, t| {
            let o = *acc;
            *acc += t.unknowns();
            Some(o)
        })
        .collect();
    let total: usize = templates.iter().map(Template::unknowns).sum();
    let rows = (templates.len() - 1) * order;
    if rows != total {
        return Err(Error::Numerical(format!("matching system has {rows} equations and {total} unknowns")));
    }
    let mut a = DMatrix::zeros(rows, total);
    let mut b = DVector::zeros(rows);
    let mut row = 0;
    for i in 1..templates.len() {
        let x = knots[i];
        for r in 0..order {
            let (cl, fl) = templates[i - 1].linear_form(x, r);
            let (cr, fr) = templates[i].linear_form(x, r);
            for (c, v) in fl.iter().enumerate() {
                a[(row, offsets[i - 1] + c)] += v;
            }
            for (c, v) in fr.iter().enumerate() {
                a[(row, offsets[i] + c)] -= v;
            }
            b[row] = cr - cl;
            row += 1;
        }
    }
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("derivative-matching system is singular".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("derivative-matching system is singular".into()));
    }
    Ok(templates
        .iter()
        .zip(&offsets)
        .map(|(t, &o)| t.instantiate(&sol.as_slice()[o..o + t.unknowns()]))
        .collect())
}

/// Builds `omega` and `w` for any `k >= 1` by derivative matching.
pub fn matched_polys(k: usize) -> Result<InterpPolys> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if k == 1 {
        let mut p = printed_polys(1)?;
        p.source = PolySource::Matched;
        return Ok(p);
    }
    let mut om = vec![Template::Power { p: (2 * k - 1) as f64 / 2.0 }];
    for _ in 1..k - 1 {
        om.push(Template::Poly { shift: 0.0, reflect: false, constant: 0.0, degrees: (0..=k).collect() });
    }
    om.push(Template::Poly { shift: 1.0, reflect: true, constant: 0.0, degrees: vec![k] });
    let om_knots = equispaced(k);
    let omega = PiecewiseFn::new(om_knots.clone(), match_derivatives(&om, &om_knots, k)?)?;

    let half = k / 2 + 1;
    let mut wt = vec![Template::Power { p: k as f64 }];
    for _ in 1..half - 1 {
        wt.push(Template::Poly { shift: 0.0, reflect: false, constant: 0.0, degrees: (0..=k).collect() });
    }
    wt.push(Template::Poly { shift: 0.5, reflect: true, constant: 0.5, degrees: (1..=k).step_by(2).collect() });
    let w_knots: Vec<f64> = (0..=half).map(|i| i as f64 / (2 * half) as f64).collect();
    let w = symmetric_w(match_derivatives(&wt, &w_knots, k)?)?;

    let leading = match &omega.pieces[0] {
        Piece::OneMinusPower { a, .. } => *a,
        _ => unreachable!("first template is a power"),
    };
    Ok(InterpPolys { k, source: PolySource::Matched, omega, w, a0: a0_constant(k).unwrap_or(leading) })
}

/// The pieces used for certification: printed ones for `k <= 3`, matched ones otherwise.
pub fn interp_polys(k: usize) -> Result<InterpPolys> {
    if (1..=3).contains(&k) {
        printed_polys(k)
    } else {
        matched_polys(k)
    }
}

/// Outcome of checking the two defining conditions of an interpolating tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpValidity {
    /// `max |w - q_{t_m}|` over the enlarged jump blocks.
    pub block_defect: f64,
    /// `max (|w| - (1 - v))` off the enlarged blocks; non-positive when valid.
    pub worst_excess: f64,
    /// Largest disagreement between cells sharing a boundary point.
    pub overlap_defect: f64,
    /// Up to 16 offending 1-based indices.
    pub offending: Vec<Vec<usize>>,
}

impl InterpValidity {
    pub fn holds(&self) -> bool {
        self.block_defect <= 1e-12 && self.worst_excess <= 1e-12 && self.overlap_defect <= 1e-12
    }
}

#[derive(Debug, Clone)]
pub struct InterpolatingTensor {
    /// Values on the reduced shape `prod_i (n_i - k)`.
    pub w: Tensor,
    pub validity: InterpValidity,
}

fn axis_factors(region: AxisRegion, polys: &InterpPolys) -> (f64, f64) {
    match region {
        AxisRegion::Block => (1.0, 1.0),
        r => {
            let x = r.fraction();
            (polys.omega.eval(x), polys.w.eval(x))
        }
    }
}

fn cell_value(tess: &Tessellation, m: usize, polys: &InterpPolys, idx: &[usize]) -> f64 {
    let cell = &tess.cells()[m];
    let k = tess.k();
    let d = idx.len();
    let factors: Vec<(f64, f64)> =
        idx.iter().enumerate().map(|(i, &j)| axis_factors(cell.region(i, j, k), polys)).collect();
    let mut sum = 0.0;
    for i in 0..d {
        let mut prod = factors[i].0;
        for (l, f) in factors.iter().enumerate() {
            if l != i {
                prod *= f.1;
            }
        }
        sum += prod;
    }
    sum / d as f64
}

/// Builds `w(q) = q_{t_m} (1/d) sum_i omega_i prod_{l != i} w_l` on every cell and
/// checks it against the noise weights of `bundle`.
pub fn build_interpolating_tensor(
    tess: &Tessellation,
    signs: &[f64],
    polys: &InterpPolys,
    bundle: &NoiseWeightBundle,
) -> Result<InterpolatingTensor> {
    let cells = tess.cells();
    if signs.len() != cells.len() || signs.iter().any(|&q| q != 1.0 && q != -1.0) {
        return Err(Error::Invalid(format!("expected {} signs in {{-1, +1}}", cells.len())));
    }
    if polys.k != tess.k() {
        return Err(Error::Invalid(format!("polynomials of order {} on a tessellation of order {}", polys.k, tess.k())));
    }
    let k = tess.k();
    let shape = tess.shape();
    let reduced: Vec<usize> = shape.iter().map(|&n| n - k).collect();
    if bundle.v.shape() != reduced.as_slice() {
        return Err(Error::Shape("noise weights do not match the tessellation".into()));
    }
    let mut w = Tensor::zeros(&reduced)?;
    let mut block_defect: f64 = 0.0;
    let mut worst = f64::NEG_INFINITY;
    let mut overlap: f64 = 0.0;
    let mut offending = Vec::new();
    let mut uncovered = None;
    let mut flat = 0;
    let bounds: Vec<(usize, usize)> = shape.iter().map(|&n| (k + 1, n)).collect();
    for_each_in_box(&bounds, |idx| {
        let mut value = None;
        let mut in_block = None;
        for (m, cell) in cells.iter().enumerate() {
            if !cell.contains(idx) {
                continue;
            }
            let val = signs[m] * cell_value(tess, m, polys, idx);
            match value {
                None => value = Some(val),
                Some(v0) => overlap = overlap.max((val - v0).abs()),
            }
            if idx.iter().zip(&cell.jump).all(|(&j, &t)| t <= j && j < t + k) {
                in_block = Some(signs[m]);
            }
        }
        let Some(val) = value else {
            uncovered.get_or_insert_with(|| idx.to_vec());
            flat += 1;
            return;
        };
        w.data_mut()[flat] = val;
        let bad = match in_block {
            Some(q) => {
                let defect = (val - q).abs();
                block_defect = block_defect.max(defect);
                defect > 1e-12
            }
            None => {
                let excess = val.abs() - (1.0 - bundle.v.data()[flat]);
                worst = worst.max(excess);
                excess > 1e-12
            }
        };
        if bad && offending.len() < 16 {
            offending.push(idx.to_vec());
        }
        flat += 1;
    });
    if let Some(idx) = uncovered {
        return Err(Error::Domain(format!("index {idx:?} is not covered by the tessellation")));
    }
    Ok(InterpolatingTensor {
        w,
        validity: InterpValidity { block_defect, worst_excess: worst, overlap_defect: overlap, offending },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::weights::{noise_weights, WeightForm};
    use crate::grid::{regular_grid, ActiveSet, BoxRule};

    #[test]
    fn k1_pieces() {
        let p = printed_polys(1).unwrap();
        for x in [0.0, 0.09, 0.25, 0.7, 1.0] {
            assert!((p.omega.eval(x) - (1.0 - f64::sqrt(x))).abs() < 1e-15);
            assert!((p.w.eval(x) - (1.0 - x)).abs() < 1e-15);
        }
    }

    #[test]
    fn k2_continuity_value() {
        let p = printed_polys(2).unwrap();
        let left = p.omega.pieces[0].eval(0.5);
        let right = p.omega.pieces[1].eval(0.5);
        assert!((left - 3.0 / 7.0).abs() < 1e-15);
        assert!((right - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn printed_pieces_are_smooth_and_monotone() {
        for k in 1..=3 {
            let c = printed_polys(k).unwrap().check(10_001);
            assert!(c.endpoint_defect == 0.0, "k={k}: {c:?}");
            assert!(c.continuity() <= 1e-9, "k={k}: {c:?}");
            assert!(c.monotone(1e-12), "k={k}: {c:?}");
        }
    }

    #[test]
    fn matched_reproduces_printed() {
        for k in 1..=3 {
            let m = matched_polys(k).unwrap();
            let p = printed_polys(k).unwrap();
            assert!(m.omega.coefficient_distance(&p.omega).unwrap() < 1e-9, "k={k}");
            assert!(m.w.coefficient_distance(&p.w).unwrap() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn matched_k4_near_printed() {
        let m = matched_polys(4).unwrap();
        let p = printed_polys(4).unwrap();
        assert!(m.omega.coefficient_distance(&p.omega).unwrap() < 1e-2);
        assert!(m.w.coefficient_distance(&p.w).unwrap() < 1e-2);
        let c = m.check(10_001);
        assert!(c.continuity() < 1e-9 && c.monotone(1e-12), "{c:?}");
        assert!((m.omega_leading() - 7.29).abs() < 5e-3);
    }

    #[test]
    fn matched_general_k_is_smooth() {
        for k in 2..=6 {
            let c = matched_polys(k).unwrap().check(2001);
            assert!(c.endpoint_defect < 1e-9 && c.continuity() < 1e-7, "k={k}: {c:?}");
        }
    }

    #[test]
    fn mirror_derivatives() {
        let inner = poly(0.0, false, &[0.3, -0.2, 0.5, 0.7]);
        let m = Piece::Mirror(Box::new(inner.clone()));
        let h = 1e-5;
        for r in 1..3 {
            let x = 0.37;
            let num = (m.deriv(x + h, r - 1) - m.deriv(x - h, r - 1)) / (2.0 * h);
            assert!((num - m.deriv(x, r)).abs() < 1e-6);
        }
    }

    #[test]
    fn one_jump_profile() {
        let s = ActiveSet::new(&[33], 1, vec![vec![17]], BoxRule::Standard).unwrap();
        let t = s.tessellate().unwrap();
        let polys = printed_polys(1).unwrap();
        let b = noise_weights(&t, polys.c_floor(), WeightForm::Linear).unwrap();
        let it = build_interpolating_tensor(&t, &[1.0], &polys, &b).unwrap();
        assert!(it.validity.holds(), "{:?}", it.validity);
        let cell = &t.cells()[0];
        for j in cell.lo[0]..=cell.hi[0] {
            let want = match cell.region(0, j, 1) {
                AxisRegion::Block => 1.0,
                r => 1.0 - r.fraction().sqrt(),
            };
            assert!((it.w.get(&[j - 1]).unwrap() - want).abs() < 1e-15);
        }
        let neg = build_interpolating_tensor(&t, &[-1.0], &polys, &b).unwrap();
        for (a, b) in it.w.data().iter().zip(neg.w.data()) {
            assert_eq!(*a, -b);
        }
    }

    #[test]
    fn regular_grid_validity() {
        for (shape, k, s) in [(vec![24, 24], 1, 3), (vec![30, 26], 2, 2), (vec![32], 3, 3), (vec![12, 12, 12], 1, 2)] {
            let t = regular_grid(&shape, k, s, BoxRule::Standard).unwrap().tessellate().unwrap();
            let polys = interp_polys(k).unwrap();
            let b = noise_weights(&t, polys.c_floor(), WeightForm::Linear).unwrap();
            let signs: Vec<f64> = (0..t.cells().len()).map(|m| if m % 3 == 1 { -1.0 } else { 1.0 }).collect();
            let it = build_interpolating_tensor(&t, &signs, &polys, &b).unwrap();
            assert!(it.validity.holds(), "{shape:?} k={k}: {:?}", it.validity);
        }
    }
}
