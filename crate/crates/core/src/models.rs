//! Ridge classifiers on precomputed Gram matrices or feature matrices.
//!
//! Targets are one-hot encodings centered by their training mean; scores
//! add the mean back and predictions take the per-row argmax. With
//! `K = F Fᵀ` the kernel and feature modes give the same scores.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seqcore::SeedStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RidgeMode {
    Kernel,
    Feature,
}

/// Training data for [`fit_ridge`]: an `N × N` Gram matrix or an `N × F`
/// feature matrix.
#[derive(Clone, Copy, Debug)]
pub enum RidgeInput<'a> {
    Kernel(ArrayView2<'a, f64>),
    Features(ArrayView2<'a, f64>),
}

impl RidgeInput<'_> {
    fn n_rows(&self) -> usize {
        match self {
            RidgeInput::Kernel(k) => k.nrows(),
            RidgeInput::Features(f) => f.nrows(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeModel {
    mode: RidgeMode,
    classes: Vec<usize>,
    lambda: f64,
    /// `N × C` dual coefficients or `F × C` weights.
    coef: Array2<f64>,
    target_mean: Vec<f64>,
}

fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn centered_targets(labels: &[usize], classes: &[usize]) -> (DMatrix<f64>, Vec<f64>) {
    let n = labels.len();
    let mut y = DMatrix::from_fn(n, classes.len(), |i, c| if labels[i] == classes[c] { 1.0 } else { 0.0 });
    let mean: Vec<f64> = (0..classes.len()).map(|c| y.column(c).sum() / n as f64).collect();
    for c in 0..classes.len() {
        for i in 0..n {
            y[(i, c)] -= mean[c];
        }
    }
    (y, mean)
}

fn solve_spd(mut a: DMatrix<f64>, lambda: f64, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = a.cholesky().ok_or_else(|| {
        Error::Numeric(format!(
            "ridge system is not positive definite at lambda = {lambda}; use a larger lambda (lambda > 0)"
        ))
    })?;
    Ok(chol.solve(b))
}

/// Fits a one-vs-rest ridge classifier with regularization `lambda ≥ 0`.
pub fn fit_ridge(input: RidgeInput<'_>, labels: &[usize], lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    let n = input.n_rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if n == 0 {
        return Err(Error::invalid("no training rows"));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let (y, target_mean) = centered_targets(labels, &classes);
    let (mode, coef) = match input {
        RidgeInput::Kernel(k) => {
            if k.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: k.ncols() });
            }
            (RidgeMode::Kernel, solve_spd(to_dmatrix(k), lambda, &y)?)
        }
        RidgeInput::Features(f) => {
            let f = to_dmatrix(f);
            let ft = f.transpose();
            (RidgeMode::Feature, solve_spd(&ft * &f, lambda, &(&ft * &y))?)
        }
    };
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("ridge solve produced non-finite coefficients at lambda = {lambda}; use lambda > 0")));
    }
    let coef = Array2::from_shape_fn((coef.nrows(), coef.ncols()), |(i, j)| coef[(i, j)]);
    Ok(RidgeModel {
        mode,
        classes,
        lambda,
        coef,
        target_mean,
    })
}

impl RidgeModel {
    pub fn mode(&self) -> RidgeMode {
        self.mode
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Per-class scores. `test` is the `N_test × N_train` kernel block in
    /// kernel mode and the `N_test × F` feature matrix in feature mode.
    pub fn decision_scores(&self, test: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if test.ncols() != self.coef.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.coef.nrows(),
                got: test.ncols(),
            });
        }
        let mut s = test.dot(&self.coef);
        for mut row in s.rows_mut() {
            row.iter_mut().zip(&self.target_mean).for_each(|(v, m)| *v += m);
        }
        Ok(s)
    }

    pub fn predict(&self, test: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let s = self.decision_scores(test)?;
        Ok(s.rows()
            .into_iter()
            .map(|r| {
                // first maximum wins
                let mut best = 0;
                for c in 1..r.len() {
                    if r[c] > r[best] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Stratified fold index (`0..folds`) for each sample.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: &SeedStream) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut assign = vec![0; labels.len()];
    for (ci, &c) in classes.iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.len() < folds {
            return Err(Error::Stratification(format!(
                "class {c} has {} samples, fewer than the {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut seed.child("folds").index(ci).rng());
        for (pos, i) in idx.into_iter().enumerate() {
            assign[i] = pos % folds;
        }
    }
    Ok(assign)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    /// Mean validation accuracy per candidate.
    pub mean_accuracies: Vec<f64>,
    /// Validation accuracy per candidate and fold.
    pub fold_accuracies: Vec<Vec<f64>>,
}

fn take(a: ArrayView2<'_, f64>, rows: &[usize], cols: Option<&[usize]>) -> Array2<f64> {
    match cols {
        Some(cols) => Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| a[[rows[i], cols[j]]]),
        None => Array2::from_shape_fn((rows.len(), a.ncols()), |(i, j)| a[[rows[i], j]]),
    }
}

/// Grid search over `lambdas` by stratified `folds`-fold cross-validation
/// on precomputed data. Ties go to the larger lambda.
pub fn grid_cv(lambdas: &[f64], folds: usize, input: RidgeInput<'_>, labels: &[usize], seed: &SeedStream) -> Result<CvResult> {
    if lambdas.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    if labels.len() != input.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: input.n_rows(),
            got: labels.len(),
        });
    }
    let assign = stratified_folds(labels, folds, seed)?;
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let tr: Vec<usize> = (0..labels.len()).filter(|&i| assign[i] != f).collect();
            let va: Vec<usize> = (0..labels.len()).filter(|&i| assign[i] == f).collect();
            let ytr: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
            let yva: Vec<usize> = va.iter().map(|&i| labels[i]).collect();
            let (train, test) = match input {
                RidgeInput::Kernel(k) => (take(k, &tr, Some(&tr)), take(k, &va, Some(&tr))),
                RidgeInput::Features(x) => (take(x, &tr, None), take(x, &va, None)),
            };
            lambdas
                .iter()
                .map(|&lam| {
                    let ti = match input {
                        RidgeInput::Kernel(_) => RidgeInput::Kernel(train.view()),
                        RidgeInput::Features(_) => RidgeInput::Features(train.view()),
                    };
                    let model = fit_ridge(ti, &ytr, lam)?;
                    Ok(accuracy(&model.predict(test.view())?, &yva))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let fold_accuracies: Vec<Vec<f64>> = (0..lambdas.len()).map(|c| per_fold.iter().map(|f| f[c]).collect()).collect();
    let mean_accuracies: Vec<f64> = fold_accuracies.iter().map(|a| a.iter().sum::<f64>() / folds as f64).collect();
    let mut best = 0;
    for c in 1..lambdas.len() {
        let (mc, mb) = (mean_accuracies[c], mean_accuracies[best]);
        if mc > mb || (mc == mb && lambdas[c] > lambdas[best]) {
            best = c;
        }
    }
    Ok(CvResult {
        best_lambda: lambdas[best],
        mean_accuracies,
        fold_accuracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn separable() -> (Array2<f64>, Vec<usize>) {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| if i < 10 { -1.0 - i as f64 * 0.1 } else { 1.0 + i as f64 * 0.1 });
        let y = (0..20).map(|i| usize::from(i >= 10)).collect();
        (x, y)
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = separable();
        let m = fit_ridge(RidgeInput::Features(x.view()), &y, 1e-6).unwrap();
        assert_eq!(accuracy(&m.predict(x.view()).unwrap(), &y), 1.0);
        let k = x.dot(&x.t());
        let mk = fit_ridge(RidgeInput::Kernel(k.view()), &y, 1e-6).unwrap();
        assert_eq!(accuracy(&mk.predict(k.view()).unwrap(), &y), 1.0);
    }

    #[test]
    fn heavy_shrinkage_gives_class_means() {
        let x = array![[1.0], [2.0], [3.0], [-1.0], [0.5]];
        let y = vec![0, 0, 0, 1, 1];
        let m = fit_ridge(RidgeInput::Features(x.view()), &y, 1e9).unwrap();
        let s = m.decision_scores(x.view()).unwrap();
        for row in s.rows() {
            assert!((row[0] - 0.6).abs() < 1e-6 && (row[1] - 0.4).abs() < 1e-6);
        }
        assert!(m.predict(x.view()).unwrap().iter().all(|&c| c == 0));
    }

    #[test]
    fn identity_kernel_returns_centered_targets() {
        let k = Array2::eye(4);
        let y = vec![0, 1, 1, 2];
        let m = fit_ridge(RidgeInput::Kernel(k.view()), &y, 0.0).unwrap();
        let want = array![[0.75, -0.5, -0.25], [-0.25, 0.5, -0.25], [-0.25, 0.5, -0.25], [-0.25, -0.5, 0.75]];
        for (a, b) in m.coef.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_system_at_zero_lambda() {
        let k = Array2::from_elem((3, 3), 1.0);
        match fit_ridge(RidgeInput::Kernel(k.view()), &[0, 1, 0], 0.0) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("lambda > 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kernel_and_feature_modes_agree() {
        let seed = SeedStream::new(3);
        let mut rng = seed.rng();
        use rand::Rng;
        let f = Array2::from_shape_fn((15, 6), |_| rng.random_range(-1.0..1.0));
        let test = Array2::from_shape_fn((5, 6), |_| rng.random_range(-1.0..1.0));
        let y: Vec<usize> = (0..15).map(|i| i % 3).collect();
        let k = f.dot(&f.t());
        let mk = fit_ridge(RidgeInput::Kernel(k.view()), &y, 0.1).unwrap();
        let mf = fit_ridge(RidgeInput::Features(f.view()), &y, 0.1).unwrap();
        let sk = mk.decision_scores(test.dot(&f.t()).view()).unwrap();
        let sf = mf.decision_scores(test.view()).unwrap();
        for (a, b) in sk.iter().zip(sf.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let y: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let a = stratified_folds(&y, 5, &SeedStream::new(1)).unwrap();
        assert_eq!(a, stratified_folds(&y, 5, &SeedStream::new(1)).unwrap());
        assert_ne!(a, stratified_folds(&y, 5, &SeedStream::new(2)).unwrap());
        for f in 0..5 {
            for c in 0..2 {
                assert_eq!((0..30).filter(|&i| a[i] == f && y[i] == c).count(), 3);
            }
        }
        let sparse = vec![0, 0, 0, 0, 1];
        assert!(matches!(stratified_folds(&sparse, 2, &SeedStream::new(0)), Err(Error::Stratification(_))));
    }

    #[test]
    fn grid_cv_selection() {
        // unbalanced, so heavy shrinkage predicts the majority class everywhere
        let x = Array2::from_shape_fn((20, 1), |(i, _)| if i < 12 { -1.0 - i as f64 * 0.1 } else { 1.0 + i as f64 * 0.1 });
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 12)).collect();
        let one = grid_cv(&[0.3], 4, RidgeInput::Features(x.view()), &y, &SeedStream::new(0)).unwrap();
        assert_eq!(one.best_lambda, 0.3);
        let k = x.dot(&x.t());
        let r = grid_cv(&[1e-6, 1e6], 4, RidgeInput::Kernel(k.view()), &y, &SeedStream::new(0)).unwrap();
        assert_eq!(r.best_lambda, 1e-6);
        assert_eq!(r.fold_accuracies.len(), 2);
        assert_eq!(r.fold_accuracies[0].len(), 4);
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        let (x, y) = separable();
        let r = grid_cv(&[1e-3, 1e-2], 4, RidgeInput::Features(x.view()), &y, &SeedStream::new(0)).unwrap();
        assert_eq!(r.mean_accuracies[0], r.mean_accuracies[1]);
        assert_eq!(r.best_lambda, 1e-2);
    }
}
