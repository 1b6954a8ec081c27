//! Scaling checks: normalized discrete differences of power profiles, and the
//! decay of the largest antiprojection on mesh grids and regular grids.

use serde::{Deserialize, Serialize};

use crate::certify::antiproj::Antiprojector;
use crate::diff::diff_1d;
use crate::error::{Error, Result};
use crate::grid::{mesh_grid, regular_grid, BoxRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerKind {
    /// `q_j = (j/d)^{(2k-1)/2}`.
    HalfPower,
    /// `p_j = (j/d)^k`.
    FullPower,
}

/// `n^{-2k+2} ||D^k x||^2`, the squared norm of the unscaled `k`-th differences of the profile on `j = 0..d_len`.
pub fn discrete_diff_scaling(kind: PowerKind, k: usize, d_len: usize) -> Result<f64> {
    if k == 0 || d_len < 2 * k {
        return Err(Error::Invalid(format!("need k >= 1 and d >= 2k, got k={k}, d={d_len}")));
    }
    let e = match kind {
        PowerKind::HalfPower => (2 * k - 1) as f64 / 2.0,
        PowerKind::FullPower => k as f64,
    };
    let x: Vec<f64> = (0..=d_len).map(|j| (j as f64 / d_len as f64).powf(e)).collect();
    let mut out = vec![0.0; x.len() - k];
    diff_1d(&x, k, &mut out);
    let scale = (x.len() as f64).powi(2 * k as i32 - 2);
    Ok(out.iter().map(|v| v * v).sum::<f64>() / scale)
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// `1.96` standard errors.
    pub half_width: f64,
    pub points: usize,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Invalid("a slope fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("log-log fits need positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let std_error = if lx.len() > 2 {
        let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit { slope, intercept, std_error, half_width: 1.96 * std_error, points: lx.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    /// `delta` for mesh grids, jumps per axis for regular grids.
    pub parameter: usize,
    /// Number of jumps `s`.
    pub s: usize,
    /// Largest antiprojection over all atoms.
    pub gamma: f64,
    pub regularized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaScaling {
    pub points: Vec<GammaPoint>,
    /// Fit of `ln gamma` against `ln s`.
    pub fit: SlopeFit,
}

fn gamma_for(shape: &[usize], k: usize, enlarged: &[Vec<usize>]) -> Result<(f64, bool)> {
    let p = Antiprojector::new(shape, k, enlarged)?;
    Ok((p.max_value()?.0, p.regularized()))
}

fn finish(points: Vec<GammaPoint>) -> Result<GammaScaling> {
    let xs: Vec<f64> = points.iter().map(|p| p.s as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.gamma).collect();
    let fit = fit_loglog(&xs, &ys)?;
    Ok(GammaScaling { points, fit })
}

/// Largest exact antiprojection on enlarged mesh grids, fitted against `s`.
pub fn mesh_gamma_scaling(shape: &[usize], k: usize, deltas: &[usize]) -> Result<GammaScaling> {
    let mut points = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mesh = mesh_grid(shape, k, delta)?;
        let (gamma, regularized) = gamma_for(shape, k, &mesh.enlarged)?;
        points.push(GammaPoint { parameter: delta, s: mesh.len(), gamma, regularized });
    }
    finish(points)
}

/// Largest exact antiprojection on enlarged regular grids, fitted against `s`.
pub fn regular_gamma_scaling(shape: &[usize], k: usize, per_axis: &[usize]) -> Result<GammaScaling> {
    let mut points = Vec::with_capacity(per_axis.len());
    for &m in per_axis {
        let grid = regular_grid(shape, k, m, BoxRule::Standard)?;
        let (gamma, regularized) = gamma_for(shape, k, &grid.enlarge())?;
        points.push(GammaPoint { parameter: m, s: grid.len(), gamma, regularized });
    }
    finish(points)
}

/// Expected exponent `-(2k-1) / (2 H(d))` on mesh grids.
pub fn mesh_exponent(k: usize, d: usize) -> f64 {
    -((2 * k - 1) as f64) / (2.0 * crate::grid::harmonic(d))
}

/// Expected exponent `-(2k-1) / (2d)` on regular grids.
pub fn regular_exponent(k: usize, d: usize) -> f64 {
    -((2 * k - 1) as f64) / (2.0 * d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_power_k1_is_one_over_d() {
        for d in [2, 7, 64, 1000] {
            let v = discrete_diff_scaling(PowerKind::FullPower, 1, d).unwrap();
            assert!((v - 1.0 / d as f64).abs() < 1e-14);
        }
        assert!(discrete_diff_scaling(PowerKind::FullPower, 3, 5).is_err());
    }

    #[test]
    fn full_power_slope() {
        for k in 1..=4 {
            let ds: Vec<usize> = (5..=12).map(|e| 1usize << e).collect();
            let ys: Vec<f64> = ds.iter().map(|&d| discrete_diff_scaling(PowerKind::FullPower, k, d).unwrap()).collect();
            let xs: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
            let fit = fit_loglog(&xs, &ys).unwrap();
            assert!((fit.slope + (2 * k - 1) as f64).abs() < 0.2, "k={k}: {}", fit.slope);
        }
    }

    #[test]
    fn half_power_carries_a_log() {
        let a = discrete_diff_scaling(PowerKind::HalfPower, 1, 1024).unwrap();
        let b = discrete_diff_scaling(PowerKind::HalfPower, 1, 2048).unwrap();
        let e = std::f64::consts::E;
        let want = ((e * 1024.0).ln() / 1024.0) / ((e * 2048.0).ln() / 2048.0);
        assert!(((a / b) / want - 1.0).abs() < 0.15, "{} vs {want}", a / b);
    }

    #[test]
    fn exact_line_fit() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        let f = fit_loglog(&xs, &ys).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.std_error < 1e-10);
    }

    #[test]
    fn one_dimensional_mesh_slope() {
        let r = mesh_gamma_scaling(&[256], 1, &[2, 4, 8, 16]).unwrap();
        assert!((r.fit.slope - mesh_exponent(1, 1)).abs() < 0.1, "{:?}", r);
    }
}
