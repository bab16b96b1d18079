//! Approximation error between Gram matrices.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Mean absolute percentage error `|approx/exact − 1|` over ordered pairs
/// `i ≠ j`.
pub fn mape(exact: ArrayView2<'_, f64>, approx: ArrayView2<'_, f64>) -> Result<f64> {
    let n = exact.nrows();
    if exact.ncols() != n || approx.dim() != exact.dim() {
        return Err(Error::invalid(format!(
            "mape needs equal square matrices, got {:?} and {:?}",
            exact.dim(),
            approx.dim()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("mape needs at least 2 rows"));
    }
    let zeros: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && exact[[i, j]] == 0.0)
        .collect();
    if !zeros.is_empty() {
        let shown: Vec<String> = zeros.iter().take(10).map(|(i, j)| format!("({i}, {j})")).collect();
        return Err(Error::Numeric(format!(
            "zero exact entries at {}{}",
            shown.join(", "),
            if zeros.len() > 10 { format!(" and {} more", zeros.len() - 10) } else { String::new() }
        )));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += (approx[[i, j]] / exact[[i, j]] - 1.0).abs();
            }
        }
    }
    Ok(s / (n * (n - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn examples() {
        let k = array![[1.0, 2.0], [2.0, 5.0]];
        assert_eq!(mape(k.view(), k.view()).unwrap(), 0.0);
        assert_eq!(mape(k.view(), (&k * 4.0).view()).unwrap(), 3.0);
        let a = array![[9.0, 3.0], [3.0, 9.0]];
        assert_eq!(mape(k.view(), a.view()).unwrap(), 0.5);
    }

    #[test]
    fn zero_denominator_lists_pairs() {
        let k = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
        match mape(k.view(), k.view()) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("(0, 1)") && msg.contains("(1, 0)")),
            other => panic!("{other:?}"),
        }
    }
}
