//! The certification suite and its CSV report.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::antiproj::Antiprojector;
use crate::certify::extended::dictionary_identity_extended;
use crate::certify::interp::{build_interpolating_tensor, interp_polys, matched_polys, printed_polys};
use crate::certify::scaling::{discrete_diff_scaling, fit_loglog, PowerKind};
use crate::certify::sparsity::{effective_sparsity_oracle, effective_sparsity_upper, OracleOptions};
use crate::certify::weights::{antiprojection_bound, noise_weights, WeightForm};
use crate::dictionary::ProductDictionary;
use crate::diff::total_diff;
use crate::error::{Error, Result};
use crate::grid::{admissible_box, for_each_in_box, regular_grid, ActiveSet, BoxRule, Tessellation};

/// One line of the report: the check passes when `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check_name: String,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn le(check_name: &str, params: String, lhs: f64, rhs: f64) -> Self {
        Self { check_name: check_name.into(), params, lhs, rhs, pass: lhs <= rhs }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<CheckRow>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Header `check_name,params,lhs,rhs,pass`; params use `;` between fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "check_name,params,lhs,rhs,pass")?;
        for r in &self.rows {
            writeln!(w, "{},{},{:e},{:e},{}", r.check_name, r.params, r.lhs, r.rhs, r.pass)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    /// Random instances for the antiprojection sandwich and the sparsity sandwich.
    pub instances: usize,
    pub oracle: OracleOptions,
}

impl SuiteConfig {
    pub fn new(k: usize, d: usize, n: usize, seed: u64) -> Self {
        Self { k, d, n, seed, instances: 10, oracle: OracleOptions { seed, ..Default::default() } }
    }
}

/// Draws `s` jumps uniformly from the standard admissible box until they admit a tessellation.
pub fn random_active_set<R: Rng>(shape: &[usize], k: usize, s: usize, rng: &mut R) -> Result<(ActiveSet, Tessellation)> {
    let bounds = admissible_box(shape, k, BoxRule::Standard)
        .ok_or_else(|| Error::Domain(format!("admissible box is empty for shape {shape:?}, k={k}")))?;
    for _ in 0..1000 {
        let jumps: Vec<Vec<usize>> =
            (0..s).map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()).collect();
        let set = ActiveSet::new(shape, k, jumps, BoxRule::Standard)?;
        if let Ok(t) = set.tessellate() {
            return Ok((set, t));
        }
    }
    Err(Error::Domain(format!("no tessellable set of {s} jumps found for shape {shape:?}, k={k}")))
}

/// Largest entry of `|D^k phi~_j - e_j|` over all atoms, with `e_j = 0` for
/// nullspace atoms, evaluated in binary64. Rounding is amplified by up to
/// `prod_i 2^k n_i^{k-1}`; see [`identity_amplification`].
pub fn dictionary_identity_error_binary64(shape: &[usize], k: usize) -> Result<f64> {
    let dict = ProductDictionary::new(shape, k)?;
    let bounds: Vec<(usize, usize)> = shape.iter().map(|&n| (1, n)).collect();
    let mut all = Vec::new();
    for_each_in_box(&bounds, |idx| all.push(idx.to_vec()));
    let reduced = dict.reduced_shape();
    let errs: Vec<f64> = all
        .par_iter()
        .map(|idx| {
            let b = total_diff(&dict.atom(idx)?, k)?;
            let target = if idx.iter().all(|&j| j > k) {
                let pos: Vec<usize> = idx.iter().map(|&j| j - k).collect();
                Some(crate::tensor::multi_to_flat(&reduced, &pos)?)
            } else {
                None
            };
            Ok(b.data()
                .iter()
                .enumerate()
                .map(|(f, &v)| (v - if Some(f) == target { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// `prod_i 2^k n_i^{k-1}`, the gain of the scaled difference operator in the max norm.
pub fn identity_amplification(shape: &[usize], k: usize) -> f64 {
    shape.iter().map(|&n| 2f64.powi(k as i32) * (n as f64).powi(k as i32 - 1)).product()
}

/// `max(exact - bound)` over `instances` random active sets and atoms.
pub fn antiprojection_sandwich(shape: &[usize], k: usize, instances: usize, seed: u64) -> Result<(f64, usize)> {
    let reduced: Vec<(usize, usize)> = shape.iter().map(|&n| (k + 1, n)).collect();
    let results: Vec<(f64, bool)> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let s = rng.random_range(1..=3);
            let (set, tess) = random_active_set(shape, k, s, &mut rng)?;
            let idx: Vec<usize> = reduced.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
            let exact = Antiprojector::new(shape, k, &set.enlarge())?.value(&idx)?;
            let bound = antiprojection_bound(&tess, &idx)?;
            Ok((exact - bound, exact > bound + 1e-10))
        })
        .collect::<Result<_>>()?;
    let worst = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    Ok((worst, results.iter().filter(|r| r.1).count()))
}

fn random_signs(count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..count).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// Runs the certification checks for one `(k, d, n)` configuration.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Report> {
    let SuiteConfig { k, d, n, seed, instances, .. } = *cfg;
    if k == 0 || d == 0 || n <= k + 2 {
        return Err(Error::Invalid(format!("need k >= 1, d >= 1 and n > k + 2, got k={k}, d={d}, n={n}")));
    }
    let shape = vec![n; d];
    let params = format!("k={k};d={d};n={n}");
    let mut report = Report::default();

    let identity = dictionary_identity_extended(&shape, k)?;
    report.rows.push(CheckRow::le("dictionary_identity", params.clone(), identity.identity_error, 1e-9));
    report.rows.push(CheckRow::le("dictionary_columns_binary64", params.clone(), identity.column_deviation, 1e-12));

    let (gap, violations) = antiprojection_sandwich(&shape, k, instances, seed)?;
    report.rows.push(CheckRow::le(
        "antiprojection_sandwich",
        format!("{params};instances={instances};violations={violations}"),
        gap,
        1e-10,
    ));

    let polys = interp_polys(k)?;
    let check = polys.check(10_001);
    report.rows.push(CheckRow::le("interp_endpoints", format!("k={k}"), check.endpoint_defect, 0.0));
    report.rows.push(CheckRow::le("interp_continuity", format!("k={k}"), check.continuity(), 1e-9));
    report.rows.push(CheckRow::le(
        "interp_monotone",
        format!("k={k}"),
        check.omega_monotonicity.max(check.w_monotonicity),
        1e-12,
    ));
    if k <= 4 {
        let m = matched_polys(k)?;
        let p = printed_polys(k)?;
        let dist = m
            .omega
            .coefficient_distance(&p.omega)
            .zip(m.w.coefficient_distance(&p.w))
            .map(|(a, b)| a.max(b))
            .unwrap_or(f64::INFINITY);
        report.rows.push(CheckRow::le("interp_matched_vs_printed", format!("k={k}"), dist, if k <= 3 { 1e-9 } else { 1e-2 }));
    }

    let c = polys.c_floor().max(1.0);
    let grid = regular_grid(&shape, k, 2, BoxRule::Standard)?;
    let tess = grid.tessellate()?;
    let bundle = noise_weights(&tess, c, WeightForm::Linear)?;
    let gparams = format!("{params};s_per_axis=2;C={c:.6}");
    report.rows.push(CheckRow::le("noise_weight_dominance", gparams.clone(), bundle.worst_dominance_gap, 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_block: f64 = 0.0;
    let mut worst_sandwich = f64::NEG_INFINITY;
    for i in 0..instances {
        let signs = random_signs(tess.cells().len(), &mut rng);
        let it = build_interpolating_tensor(&tess, &signs, &polys, &bundle)?;
        worst_excess = worst_excess.max(it.validity.worst_excess);
        worst_block = worst_block.max(it.validity.block_defect.max(it.validity.overlap_defect));
        let upper = effective_sparsity_upper(&it.w, k, &shape)?;
        let opts = OracleOptions { seed: cfg.oracle.seed.wrapping_add(1000 * i as u64), ..cfg.oracle };
        let oracle = effective_sparsity_oracle(&shape, k, grid.jumps(), &signs, &bundle.v, &opts)?;
        worst_sandwich = worst_sandwich.max(oracle - upper);
    }
    report.rows.push(CheckRow::le("interp_tensor_blocks", gparams.clone(), worst_block, 1e-12));
    report.rows.push(CheckRow::le("interp_tensor_bound", gparams.clone(), worst_excess, 1e-12));
    if worst_excess > 1e-12 {
        let alt = noise_weights(&tess, c, WeightForm::Sqrt)?;
        let signs = vec![1.0; tess.cells().len()];
        let it = build_interpolating_tensor(&tess, &signs, &polys, &alt)?;
        report.rows.push(CheckRow::le("interp_tensor_bound_sqrt_form", gparams.clone(), it.validity.worst_excess, 1e-12));
    }
    report.rows.push(CheckRow::le(
        "effective_sparsity_sandwich",
        format!("{gparams};instances={instances}"),
        worst_sandwich,
        1e-6,
    ));

    let ds: Vec<usize> = (5..=12).map(|e| 1usize << e).collect();
    let ys = ds.iter().map(|&m| discrete_diff_scaling(PowerKind::FullPower, k, m)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ds.iter().map(|&m| m as f64).collect();
    let fit = fit_loglog(&xs, &ys)?;
    report.rows.push(CheckRow::le(
        "diff_scaling_slope",
        format!("k={k};slope={:.4};target={}", fit.slope, -((2 * k - 1) as f64)),
        (fit.slope + (2 * k - 1) as f64).abs(),
        0.2,
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_small() {
        let mut cfg = SuiteConfig::new(2, 2, 14, 7);
        cfg.instances = 3;
        cfg.oracle.iterations = 200;
        cfg.oracle.restarts = 4;
        let r = run_suite(&cfg).unwrap();
        assert!(r.all_pass(), "{:#?}", r.failures().collect::<Vec<_>>());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("check_name,params,lhs,rhs,pass\n"));
        assert_eq!(text.lines().count(), r.rows.len() + 1);
    }

    #[test]
    fn binary64_identity_within_rounding_gain() {
        for (shape, k) in [(vec![8, 8], 3), (vec![16], 4), (vec![24, 24], 3), (vec![6, 7, 5], 2)] {
            let e = dictionary_identity_error_binary64(&shape, k).unwrap();
            assert!(e <= 4.0 * f64::EPSILON * identity_amplification(&shape, k), "{shape:?} k={k}: {e}");
        }
        assert!(dictionary_identity_error_binary64(&[16], 4).unwrap() < 1e-10);
    }

    #[test]
    fn random_sets_tessellate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (_, t) = random_active_set(&[16, 20], 2, 3, &mut rng).unwrap();
            t.validate().unwrap();
        }
    }
}
