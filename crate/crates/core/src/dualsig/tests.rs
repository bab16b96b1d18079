use ndarray::{array, Array2, Axis};
use proptest::prelude::*;

use super::*;
use crate::seqcore::{gen_brownian, SeedStream};
use crate::statickern::{gram, StaticKernelKind};

fn lin() -> StaticKernelSpec {
    StaticKernelSpec::linear(1.0)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn close_levels(a: &LevelValues, b: &LevelValues, tol: f64) -> bool {
    // relative to the level's scale; exactly-zero levels must agree absolutely
    a.0.len() == b.0.len() && a.0.iter().zip(&b.0).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1e-12))
}

#[test]
fn hand_example_levels() {
    let x = array![[0.0], [1.0], [3.0]];
    let y = array![[0.0], [2.0]];
    let cfg = KernelConfig::new(lin(), 2);
    let v = sig_kernel_bruteforce(x.view(), y.view(), &cfg).unwrap();
    assert_eq!(v.0, vec![1.0, 6.0, 0.0]);
    let v2 = sig_kernel_bruteforce(x.view(), y.view(), &cfg.with_order(Order::Finite(2))).unwrap();
    assert!((v2[2] - 9.0).abs() < 1e-12);
    let dp = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
    assert_eq!(dp.0, vec![1.0, 6.0, 0.0]);
    let dp2 = sig_kernel_dp(x.view(), y.view(), &cfg.with_order(Order::Finite(2))).unwrap();
    assert!((dp2[2] - 9.0).abs() < 1e-12);
}

#[test]
fn constant_sequences_give_unit_level_zero_only() {
    let x = Array2::from_elem((4, 2), 0.7);
    let y = Array2::from_elem((3, 2), -1.0);
    for p in [Order::Finite(1), Order::Finite(2), Order::Infinite] {
        let cfg = KernelConfig::new(StaticKernelSpec::rbf(1.0), 3).with_order(p);
        let want = LevelValues(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(sig_kernel_bruteforce(x.view(), y.view(), &cfg).unwrap(), want);
        assert_eq!(sig_kernel_dp(x.view(), y.view(), &cfg).unwrap(), want);
        assert_eq!(sig_pde_kernel(x.view(), y.view(), &cfg).unwrap(), 1.0);
    }
}

#[test]
fn order_resolution() {
    assert_eq!(Order::Finite(7).resolve(3), 3);
    assert_eq!(Order::Infinite.resolve(4), 4);
    assert_eq!(Order::Finite(2).resolve(0), 1);
    assert_eq!("inf".parse::<Order>().unwrap(), Order::Infinite);
    assert!("0".parse::<Order>().is_err());
}

fn random_seq(seed: u64, len: usize, d: usize) -> Array2<f64> {
    gen_brownian(1, len, d, &SeedStream::new(seed)).unwrap().sequence(0).to_owned()
}

#[test]
fn dp_matches_bruteforce_on_random_cases() {
    for case in 0..50u64 {
        let lx = 2 + (case % 4) as usize;
        let ly = 2 + ((case / 4) % 4) as usize;
        let d = 1 + (case % 3) as usize;
        let m = 1 + (case % 3) as usize;
        let p = 1 + (case / 2 % 2) as usize;
        let spec = if case % 2 == 0 { lin() } else { StaticKernelSpec::rbf(0.7) };
        let cfg = KernelConfig::new(spec, m).with_order(Order::Finite(p));
        let x = random_seq(case, lx, d) * 2.0;
        let y = random_seq(1000 + case, ly, d) * 2.0;
        let bf = sig_kernel_bruteforce(x.view(), y.view(), &cfg).unwrap();
        let dp = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
        assert!(close_levels(&dp, &bf, 1e-10), "case {case}: {dp:?} vs {bf:?}");
    }
}

#[test]
fn dp_matches_bruteforce_at_high_order() {
    let x = random_seq(1, 4, 2);
    let y = random_seq(2, 5, 2);
    for p in [Order::Finite(3), Order::Infinite] {
        let cfg = KernelConfig::new(StaticKernelSpec::rbf(0.5), 4).with_order(p);
        let bf = sig_kernel_bruteforce(x.view(), y.view(), &cfg).unwrap();
        let dp = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
        assert!(close_levels(&dp, &bf, 1e-10), "{dp:?} vs {bf:?}");
    }
}

#[test]
fn level_one_telescopes() {
    let kinds = [
        lin(),
        StaticKernelSpec::polynomial(2, 1.0, 0.5),
        StaticKernelSpec::rbf(1.3),
        StaticKernelSpec::stationary(StaticKernelKind::Matern32, 0.8),
        StaticKernelSpec::rational_quadratic(1.0, 2.0),
    ];
    for (t, spec) in kinds.into_iter().enumerate() {
        let x = random_seq(t as u64, 6, 3);
        let y = random_seq(50 + t as u64, 4, 3);
        let k = |a: usize, b: usize| spec.eval_unchecked(x.row(a), y.row(b));
        let tele = k(5, 3) - k(5, 0) - k(0, 3) + k(0, 0);
        let v = sig_kernel_dp(x.view(), y.view(), &KernelConfig::new(spec, 1)).unwrap();
        assert!((v[1] - tele).abs() < 1e-12, "{spec:?}");
    }
}

#[test]
fn no_difference_level_one_sums_all_pairs() {
    let x = random_seq(3, 4, 2);
    let y = random_seq(4, 3, 2);
    let want: f64 = x.dot(&y.t()).sum();
    let cfg = KernelConfig::new(lin(), 1).with_difference(false);
    let v = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
    assert!((v[1] - want).abs() < 1e-12);
    let bf = sig_kernel_bruteforce(x.view(), y.view(), &cfg.with_difference(false)).unwrap();
    assert!((bf[1] - want).abs() < 1e-12);
}

#[test]
fn duplicated_points_do_not_change_levels() {
    let x = random_seq(5, 5, 2);
    let y = random_seq(6, 4, 2);
    let mut rows: Vec<_> = x.outer_iter().map(|r| r.to_owned()).collect();
    rows.insert(2, rows[2].clone());
    rows.insert(4, rows[4].clone());
    let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
    let xd = ndarray::stack(Axis(0), &views).unwrap();
    for p in [Order::Finite(1), Order::Finite(2)] {
        let cfg = KernelConfig::new(StaticKernelSpec::rbf(1.0), 3).with_order(p);
        let a = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
        let b = sig_kernel_dp(xd.view(), y.view(), &cfg).unwrap();
        assert!(close_levels(&b, &a, 1e-10), "{a:?} vs {b:?}");
    }
}

#[test]
fn pde_single_step() {
    let x = array![[0.0], [1.0]];
    let cfg = KernelConfig::new(lin(), 0);
    assert_eq!(sig_pde_kernel(x.view(), x.view(), &cfg).unwrap(), 2.0);
}

fn upsample_segment(a: f64, r: u32) -> Array2<f64> {
    let n = (1usize << r) + 1;
    Array2::from_shape_fn((n, 1), |(i, _)| a * i as f64 / (n - 1) as f64)
}

#[test]
fn pde_converges_at_second_order() {
    // Σ z^m / (m!)² at z = 1
    let mut exact = 0.0;
    let mut term = 1.0;
    for m in 1..40 {
        exact += term;
        term /= (m * m) as f64;
    }
    let cfg = KernelConfig::new(lin(), 0);
    let errs: Vec<f64> = (0..=8)
        .map(|r| {
            let x = upsample_segment(1.0, r);
            (sig_pde_kernel(x.view(), x.view(), &cfg).unwrap() - exact).abs()
        })
        .collect();
    for w in errs.windows(2).skip(1) {
        let ratio = w[0] / w[1];
        assert!((3.0..=6.0).contains(&ratio), "{errs:?}");
    }
    assert!(errs[8] < 1e-4);
}

#[test]
fn pde_memory_is_linear() {
    let cfg = KernelConfig::new(StaticKernelSpec::rbf(1.0), 0);
    let peak = |l: usize| {
        let x = random_seq(1, l, 2);
        sig_pde_kernel_with_cost(x.view(), x.view(), &cfg).unwrap().1.peak_bytes
    };
    let (a, b) = (peak(100), peak(200));
    assert!((b as f64) < 2.1 * a as f64, "{a} -> {b}");
    let dp = |l: usize| {
        let x = random_seq(1, l, 2);
        sig_kernel_dp_with_cost(x.view(), x.view(), &KernelConfig::new(StaticKernelSpec::rbf(1.0), 2)).unwrap().1.peak_bytes
    };
    assert!(dp(200) as f64 > 3.5 * dp(100) as f64);
}

fn batch(n: usize, len: usize, d: usize, seed: u64) -> SequenceBatch {
    gen_brownian(n, len, d, &SeedStream::new(seed)).unwrap()
}

#[test]
fn normalized_diagonals_are_one() {
    let x = batch(5, 8, 2, 1);
    for (norm, alg) in [
        (Normalization::Levelwise, Algorithm::Dp),
        (Normalization::Global, Algorithm::Dp),
        (Normalization::Global, Algorithm::Pde),
    ] {
        let cfg = KernelConfig::new(StaticKernelSpec::rbf(1.0), 3).with_normalization(norm);
        let k = sig_kernel_gram(&x, None, &cfg, alg).unwrap();
        for i in 0..5 {
            assert!((k[[i, i]] - 1.0).abs() < 1e-10, "{norm:?} {alg:?}");
        }
        let kxy = sig_kernel_gram(&x, Some(&x), &cfg, alg).unwrap();
        for (a, b) in k.iter().zip(kxy.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn levelwise_zero_levels_contribute_zero() {
    let x = SequenceBatch::new(ndarray::Array3::from_elem((1, 3, 2), 1.0)).unwrap();
    let cfg = KernelConfig::new(StaticKernelSpec::rbf(1.0), 3).with_normalization(Normalization::Levelwise);
    let k = sig_kernel_gram(&x, None, &cfg, Algorithm::Dp).unwrap();
    assert!((k[[0, 0]] - 0.25).abs() < 1e-15);
}

#[test]
fn levelwise_pde_is_rejected() {
    let x = batch(2, 4, 1, 0);
    let cfg = KernelConfig::new(lin(), 2).with_normalization(Normalization::Levelwise);
    assert!(matches!(sig_kernel_gram(&x, None, &cfg, Algorithm::Pde), Err(Error::Incompatible(_))));
}

#[test]
fn global_rejects_nonpositive_self_kernel() {
    // k(u, v) = uv - 1 without differencing: level 1 of k(x, x) is -4
    let x = SequenceBatch::from_sequences(&[array![[1.0], [-1.0]]]).unwrap();
    let cfg = KernelConfig::new(StaticKernelSpec::polynomial(1, -1.0, 1.0), 1)
        .with_difference(false)
        .with_normalization(Normalization::Global);
    let r = sig_kernel_gram(&x, None, &cfg, Algorithm::Dp);
    assert!(matches!(r, Err(Error::Numeric(_))), "{r:?}");
}

#[test]
fn gram_is_symmetric_and_matches_bruteforce() {
    let x = batch(4, 4, 2, 7);
    let cfg = KernelConfig::new(StaticKernelSpec::rbf(1.0), 3).with_order(Order::Finite(2));
    let a = sig_kernel_gram(&x, None, &cfg, Algorithm::Dp).unwrap();
    let b = sig_kernel_gram(&x, None, &cfg, Algorithm::Bruteforce).unwrap();
    for (u, v) in a.iter().zip(b.iter()) {
        assert!(rel_err(*u, *v) < 1e-10);
    }
    for i in 0..4 {
        for j in 0..4 {
            assert!((a[[i, j]] - a[[j, i]]).abs() < 1e-12);
        }
    }
}

fn min_eig(k: &Array2<f64>) -> f64 {
    let n = k.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| k[[i, j]]);
    m.symmetric_eigen().eigenvalues.min()
}

#[test]
fn normalized_grams_are_psd() {
    let x = batch(10, 20, 3, 11);
    // the explicit pde scheme needs increments small relative to the bandwidth
    for (norm, alg, bw) in [
        (Normalization::Levelwise, Algorithm::Dp, 0.5),
        (Normalization::Global, Algorithm::Dp, 0.5),
        (Normalization::Global, Algorithm::Pde, 1.0),
    ] {
        let cfg = KernelConfig::new(StaticKernelSpec::rbf(bw), 4).with_normalization(norm);
        let k = sig_kernel_gram(&x, None, &cfg, alg).unwrap();
        assert!(min_eig(&k) >= -1e-8);
    }
}

#[test]
fn from_static_grams_reduces_to_shared_kernel() {
    let x = random_seq(1, 4, 2);
    let y = random_seq(2, 5, 2);
    let spec = StaticKernelSpec::rbf(1.0);
    let g = gram(&spec, x.view(), Some(y.view())).unwrap();
    let cfg = KernelConfig::new(spec, 3).with_order(Order::Finite(2));
    let a = sig_kernel_dp_from_static_grams(&[g.clone(), g.clone(), g.clone()], Order::Finite(2), true).unwrap();
    let b = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
    assert!(close_levels(&a, &b, 1e-14));
    let c = sig_kernel_bruteforce_from_static_grams(&[g.clone(), g.clone(), g], Order::Finite(2), true).unwrap();
    assert!(close_levels(&a, &c, 1e-10));
}

#[test]
fn from_static_grams_distinct_levels() {
    let x = random_seq(3, 4, 2);
    let y = random_seq(4, 4, 2);
    let grams: Vec<Array2<f64>> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&b| gram(&StaticKernelSpec::rbf(b), x.view(), Some(y.view())).unwrap())
        .collect();
    for p in [Order::Finite(1), Order::Finite(2), Order::Infinite] {
        let a = sig_kernel_dp_from_static_grams(&grams, p, true).unwrap();
        let b = sig_kernel_bruteforce_from_static_grams(&grams, p, true).unwrap();
        assert!(close_levels(&a, &b, 1e-10), "{a:?} vs {b:?}");
    }
}

#[test]
fn mismatched_dims_error() {
    let x = random_seq(1, 3, 2);
    let y = random_seq(2, 3, 3);
    assert!(matches!(
        sig_kernel_dp(x.view(), y.view(), &KernelConfig::default()),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn non_finite_input_errors() {
    let mut x = random_seq(1, 3, 2);
    x[[1, 0]] = f64::NAN;
    let cfg = KernelConfig::default();
    assert!(matches!(sig_kernel_dp(x.view(), x.view(), &cfg), Err(Error::NonFinite(_))));
    assert!(matches!(sig_pde_kernel(x.view(), x.view(), &cfg), Err(Error::NonFinite(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_dp_equals_bruteforce(
        xs in proptest::collection::vec(-2.0f64..2.0, 2..=10),
        ys in proptest::collection::vec(-2.0f64..2.0, 2..=10),
        m in 1usize..=3,
        p in 1usize..=2,
        rbf in any::<bool>(),
    ) {
        let x = Array2::from_shape_vec((xs.len() / 2, 2), xs[..xs.len() / 2 * 2].to_vec()).unwrap();
        let y = Array2::from_shape_vec((ys.len() / 2, 2), ys[..ys.len() / 2 * 2].to_vec()).unwrap();
        let spec = if rbf { StaticKernelSpec::rbf(1.0) } else { lin() };
        let cfg = KernelConfig::new(spec, m).with_order(Order::Finite(p));
        let bf = sig_kernel_bruteforce(x.view(), y.view(), &cfg).unwrap();
        let dp = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
        for (a, b) in dp.0.iter().zip(&bf.0) {
            let scale = b.abs().max(1e-9);
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{:?} vs {:?}", dp, bf);
        }
    }
}
