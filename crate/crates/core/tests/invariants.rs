use ndarray::{concatenate, s, Array2, Axis};
use proptest::prelude::*;
use sigkern::dualsig::{sig_kernel_bruteforce, sig_kernel_dp, sig_kernel_gram, Algorithm, KernelConfig, Normalization, Order};
use sigkern::metrics::mape;
use sigkern::preprocess::{tabulate, Augmentor, AugmentorOptions};
use sigkern::primalsig::{fit_sig_features, normalize_levels, transform_sig_features, SigFeatureConfig, SigVariant};
use sigkern::seqcore::{gen_brownian, RaggedSequenceSet, SeedStream};
use sigkern::statickern::StaticKernelSpec;

fn seq(max_len: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    (2..=max_len).prop_flat_map(move |l| {
        prop::collection::vec(-2.0..2.0f64, l * d).prop_map(move |v| Array2::from_shape_vec((l, d), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duplicating_a_point_leaves_levels_unchanged(x in seq(5, 2), y in seq(5, 2), at in 0usize..4, p in 1usize..=2) {
        let at = at.min(x.nrows() - 1);
        let dup = concatenate![Axis(0), x.slice(s![..=at, ..]), x.slice(s![at.., ..])];
        let cfg = KernelConfig::new(StaticKernelSpec::rbf(1.0), 3).with_order(Order::Finite(p));
        let a = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
        let b = sig_kernel_dp(dup.view(), y.view(), &cfg).unwrap();
        for m in 0..=3 {
            prop_assert!((a[m] - b[m]).abs() <= 1e-10 * (1.0 + a[m].abs()));
        }
    }

    #[test]
    fn dp_is_symmetric_and_matches_bruteforce(x in seq(4, 2), y in seq(4, 2)) {
        let cfg = KernelConfig::new(StaticKernelSpec::linear(1.0), 2).with_order(Order::Finite(2));
        let xy = sig_kernel_dp(x.view(), y.view(), &cfg).unwrap();
        let yx = sig_kernel_dp(y.view(), x.view(), &cfg).unwrap();
        let bf = sig_kernel_bruteforce(x.view(), y.view(), &cfg).unwrap();
        for m in 0..=2 {
            prop_assert!((xy[m] - yx[m]).abs() <= 1e-10 * (1.0 + xy[m].abs()));
            prop_assert!((xy[m] - bf[m]).abs() <= 1e-10 * (1.0 + bf[m].abs()));
        }
    }
}

#[test]
fn ragged_batch_to_features_pipeline() {
    let seeds = SeedStream::new(21);
    let x = gen_brownian(6, 30, 2, &seeds.child("data")).unwrap();
    let ragged = RaggedSequenceSet::new((0..6).map(|i| x.sequence(i).slice(s![..20 + i, ..]).to_owned()).collect()).unwrap();
    let batch = tabulate(&ragged, Some(24)).unwrap();
    assert_eq!((batch.n(), batch.len(), batch.dim()), (6, 24, 2));

    let opts = AugmentorOptions { add_time: true, basepoint: true, normalize: true, ..Default::default() };
    let aug = Augmentor::fit(opts, &batch).unwrap().transform(&batch).unwrap();
    assert_eq!((aug.len(), aug.dim()), (25, 3));

    let cfg = SigFeatureConfig::new(SigVariant::Ts, 512, 3, 1.0);
    let state = fit_sig_features(&cfg, &aug, &seeds.child("features")).unwrap();
    let f = normalize_levels(&transform_sig_features(&state, &aug).unwrap());
    let exact = sig_kernel_gram(&aug, None, &KernelConfig::new(StaticKernelSpec::rbf(1.0), 3).with_normalization(Normalization::Levelwise), Algorithm::Dp).unwrap();
    let err = mape(exact.view(), f.dot(&f.t()).view()).unwrap();
    assert!(err < 0.2, "mape {err}");
}
