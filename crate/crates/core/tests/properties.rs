use proptest::prelude::*;

use vitali_tf::anova::{anova_decompose, margin_dimension};
use vitali_tf::diff::{total_diff, total_diff_adjoint, vitali_tv};
use vitali_tf::dictionary::ProductDictionary;
use vitali_tf::grid::{mesh_grid, regular_grid, BoxRule};
use vitali_tf::harness::{generate_signal, SignalSpec};
use vitali_tf::io::{read_indices, read_vtf, write_indices, write_vtf};
use vitali_tf::solver::{fit_margin, kkt_residual, lambda_max, objective, FitConfig, SolverKind};
use vitali_tf::tensor::{flat_to_multi, multi_to_flat, Tensor};

/// Shape with `1..=max_d` axes, each of extent in `k+2..=k+max_extra`, and `k` in `1..=max_k`.
fn shape_and_order(max_d: usize, max_k: usize, max_extra: usize) -> impl Strategy<Value = (Vec<usize>, usize)> {
    (1..=max_d, 1..=max_k).prop_flat_map(move |(d, k)| (prop::collection::vec(k + 2..=k + max_extra, d), Just(k)))
}

fn tensor_for(shape: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-10.0f64..10.0, n).prop_map(move |data| Tensor::new(shape.clone(), data).unwrap())
}

fn case(max_d: usize, max_k: usize, max_extra: usize) -> impl Strategy<Value = (Tensor, usize)> {
    shape_and_order(max_d, max_k, max_extra).prop_flat_map(|(shape, k)| (tensor_for(shape), Just(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flat_index_round_trip(shape in prop::collection::vec(1usize..6, 1..4), pick in 0usize..10_000) {
        let n: usize = shape.iter().product();
        let flat = pick % n;
        let idx = flat_to_multi(&shape, flat).unwrap();
        prop_assert!(idx.iter().zip(&shape).all(|(&j, &m)| (1..=m).contains(&j)));
        prop_assert_eq!(multi_to_flat(&shape, &idx).unwrap(), flat);
    }

    #[test]
    fn difference_operator_is_adjoint((f, k) in case(3, 3, 4), seed in any::<u64>()) {
        let df = total_diff(&f, k).unwrap();
        let b = Tensor::from_fn(df.shape(), |idx| {
            let h = idx.iter().fold(seed, |acc, &j| acc.wrapping_mul(6364136223846793005).wrapping_add(j as u64));
            (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }).unwrap();
        let lhs = df.inner_product(&b).unwrap();
        let rhs = f.inner_product(&total_diff_adjoint(&b, k, f.shape()).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn differences_invert_synthesis((shape, k) in shape_and_order(2, 2, 6), seed in any::<u64>()) {
        let dict = ProductDictionary::new(&shape, k).unwrap();
        let reduced = dict.reduced_shape();
        let b = Tensor::from_fn(&reduced, |idx| ((idx.iter().sum::<usize>() as u64 ^ seed) % 7) as f64 - 3.0).unwrap();
        let back = total_diff(&dict.synthesize(&b).unwrap(), k).unwrap();
        prop_assert!(back.sub(&b).unwrap().max_abs() <= 1e-8 * (1.0 + b.max_abs()));
    }

    #[test]
    fn projection_is_idempotent_and_kills_polynomials((f, k) in case(3, 2, 4)) {
        let dict = ProductDictionary::new(f.shape(), k).unwrap();
        let p = dict.project(&f).unwrap();
        let pp = dict.project(&p).unwrap();
        prop_assert!(pp.sub(&p).unwrap().max_abs() <= 1e-9 * (1.0 + f.max_abs()));
        prop_assert!(vitali_tv(&f.sub(&p).unwrap(), k).unwrap() <= 1e-7 * (1.0 + f.max_abs()) * f.len() as f64);
    }

    #[test]
    fn anova_components_are_orthogonal_and_complete((f, k) in case(3, 3, 3)) {
        let parts = anova_decompose(&f, k).unwrap();
        let norm = f.frobenius_sq().max(1.0);
        let mut sum = Tensor::zeros(f.shape()).unwrap();
        for (i, (_, a)) in parts.iter().enumerate() {
            sum.add_assign(a).unwrap();
            for (_, b) in &parts[i + 1..] {
                prop_assert!(a.inner_product(b).unwrap().abs() <= 1e-9 * norm);
            }
        }
        prop_assert!(sum.sub(&f).unwrap().max_abs() <= 1e-9 * (1.0 + f.max_abs()));
        let dims: usize = parts.iter().map(|(key, _)| margin_dimension(f.shape(), k, key)).sum();
        prop_assert_eq!(dims, f.len());
    }

    #[test]
    fn solvers_satisfy_kkt_and_agree((f, k) in case(2, 2, 8), frac in 0.05f64..0.8) {
        let lmax = lambda_max(&f, k).unwrap();
        prop_assume!(lmax > 1e-9);
        let lambda = frac * lmax;
        let mut objectives = Vec::new();
        for solver in [SolverKind::ActiveSet, SolverKind::AcceleratedProximalGradient, SolverKind::CoordinateDescent] {
            let fit = match fit_margin(&f, k, &FitConfig::new(lambda).with_solver(solver)) {
                Ok(fit) => fit,
                Err(vitali_tf::error::Error::Convergence { partial, .. }) => *partial,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert!(kkt_residual(&f, k, lambda, &fit.coefficients).unwrap() <= 1e-6);
            objectives.push(objective(&f, k, lambda, &fit.coefficients).unwrap());
        }
        let best = objectives.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(objectives.iter().all(|o| o - best <= 1e-6 * (1.0 + best)), "{objectives:?}");
    }

    #[test]
    fn penalty_above_lambda_max_gives_zero((f, k) in case(3, 2, 5), factor in 1.0f64..4.0) {
        let lmax = lambda_max(&f, k).unwrap();
        prop_assume!(lmax > 0.0);
        let fit = fit_margin(&f, k, &FitConfig::new(factor * lmax)).unwrap();
        prop_assert_eq!(fit.support_size(), 0);
        prop_assert!(fit.fitted.max_abs() == 0.0);
    }

    #[test]
    fn vtf_round_trip(f in case(3, 1, 5).prop_map(|c| c.0)) {
        let mut buf = Vec::new();
        write_vtf(&f, &mut buf).unwrap();
        prop_assert_eq!(buf.len(), 8 + 4 * f.ndim() + 8 * f.len());
        let g = read_vtf(buf.as_slice()).unwrap();
        prop_assert_eq!(g, f);
    }

    #[test]
    fn truncated_vtf_is_rejected(f in case(2, 1, 4).prop_map(|c| c.0), cut in 1usize..8) {
        let mut buf = Vec::new();
        write_vtf(&f, &mut buf).unwrap();
        buf.truncate(buf.len() - cut);
        prop_assert!(read_vtf(buf.as_slice()).is_err());
    }

    #[test]
    fn regular_grids_round_trip_as_text((shape, k) in shape_and_order(3, 2, 12), per_axis in 1usize..3) {
        if let Ok(grid) = regular_grid(&shape, k, per_axis, BoxRule::Standard) {
            let mut buf = Vec::new();
            write_indices(grid.jumps(), &mut buf).unwrap();
            prop_assert_eq!(read_indices(buf.as_slice()).unwrap(), grid.jumps().to_vec());
            let enlarged = grid.enlarge();
            prop_assert!(enlarged.len() <= grid.len() * k.pow(shape.len() as u32));
            prop_assert!(grid.jumps().iter().all(|j| enlarged.contains(j)));
            for j in &enlarged {
                prop_assert!(j.iter().zip(&shape).all(|(&i, &n)| i > k && i <= n));
            }
        }
    }

    #[test]
    fn jump_signals_have_the_requested_support(n in 24usize..64, k in 1usize..3, s0 in 1usize..4, d in 1usize..3) {
        let spec = SignalSpec::Jumps { s0, amplitude: 1.5 };
        let sig = generate_signal(&spec, &vec![n; d], k).unwrap();
        prop_assert_eq!(sig.support, s0);
        prop_assert!((vitali_tv(&sig.tensor, k).unwrap() - sig.tv).abs() <= 1e-9 * (1.0 + sig.tv));
    }
}

#[test]
fn mesh_grids_grow_with_delta() {
    let sizes: Vec<usize> = (2..=5).map(|delta| mesh_grid(&[64, 64], 1, delta).unwrap().len()).collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{sizes:?}");
}
