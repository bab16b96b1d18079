//! Radix-2 FFT and circular convolution.

use num_complex::Complex64;

use crate::cost::Cost;
use crate::error::{Error, Result};

/// In-place iterative radix-2 transform. `buf.len()` must be a power of two.
/// `inverse` applies the conjugate transform and the `1/n` scaling.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool, cost: &mut Cost) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "radix-2 FFT needs a power-of-two length");
    if n == 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let theta = sign * std::f64::consts::TAU / len as f64;
        let twiddles: Vec<Complex64> = (0..half).map(|k| Complex64::from_polar(1.0, theta * k as f64)).collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        cost.add_flops(4 * half * (n / len));
        len *= 2;
    }
    if inverse {
        let s = 1.0 / n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
        cost.add_flops(n);
    }
}

/// `(u ⋆ v)_k = Σ_j u_j v_{(k - j) mod Q}` by the double sum.
pub fn circular_convolve_direct(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_lengths(u, v)?;
    let mut out = vec![0.0; u.len()];
    convolve_direct_into(u, v, &mut out, &mut Cost::default());
    Ok(out)
}

/// Circular convolution through the frequency domain. Requires a
/// power-of-two length.
pub fn circular_convolve_fft(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_lengths(u, v)?;
    if !u.len().is_power_of_two() {
        return Err(Error::invalid(format!("FFT path needs a power-of-two length, got {}", u.len())));
    }
    let mut out = vec![0.0; u.len()];
    convolve_fft_into(u, v, &mut out, &mut Cost::default());
    Ok(out)
}

/// Circular convolution, using the FFT when `Q` is a power of two and the
/// direct sum otherwise.
pub fn circular_convolve(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_lengths(u, v)?;
    let mut out = vec![0.0; u.len()];
    convolve_into(u, v, &mut out, true, &mut Cost::default());
    Ok(out)
}

pub(crate) fn convolve_into(u: &[f64], v: &[f64], out: &mut [f64], allow_fft: bool, cost: &mut Cost) {
    // below this size the direct sum is cheaper than two forward transforms
    if allow_fft && u.len().is_power_of_two() && u.len() >= 16 {
        convolve_fft_into(u, v, out, cost);
    } else {
        convolve_direct_into(u, v, out, cost);
    }
}

fn convolve_direct_into(u: &[f64], v: &[f64], out: &mut [f64], cost: &mut Cost) {
    let q = u.len();
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..=k {
            acc += u[j] * v[k - j];
        }
        for j in k + 1..q {
            acc += u[j] * v[q + k - j];
        }
        *o = acc;
    }
    cost.add_flops(q * q);
}

fn convolve_fft_into(u: &[f64], v: &[f64], out: &mut [f64], cost: &mut Cost) {
    let mut a: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut b: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut a, false, cost);
    fft_in_place(&mut b, false, cost);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    cost.add_flops(4 * a.len());
    fft_in_place(&mut a, true, cost);
    for (o, x) in out.iter_mut().zip(&a) {
        *o = x.re;
    }
}

fn check_lengths(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    if u.is_empty() {
        return Err(Error::invalid("cannot convolve empty vectors"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::SeedStream;
    use rand::Rng;

    #[test]
    fn delta_identity() {
        let v = [0.5, -2.0, 7.0];
        assert_eq!(circular_convolve(&[1.0, 0.0, 0.0], &v).unwrap(), v.to_vec());
    }

    #[test]
    fn hand_value() {
        assert_eq!(circular_convolve_direct(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![11.0, 10.0]);
        let f = circular_convolve_fft(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert!((f[0] - 11.0).abs() < 1e-12 && (f[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn fft_matches_direct() {
        let mut rng = SeedStream::new(3).rng();
        let u: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = circular_convolve_direct(&u, &v).unwrap();
        let b = circular_convolve_fft(&u, &v).unwrap();
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn fft_round_trip() {
        let orig: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, -(i as f64) / 2.0)).collect();
        let mut buf = orig.clone();
        let mut c = Cost::default();
        fft_in_place(&mut buf, false, &mut c);
        fft_in_place(&mut buf, true, &mut c);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(circular_convolve(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn non_power_of_two_falls_back() {
        let u = [1.0, 2.0, 3.0];
        let v = [0.0, 1.0, 0.0];
        assert_eq!(circular_convolve(&u, &v).unwrap(), vec![3.0, 1.0, 2.0]);
        assert!(circular_convolve_fft(&u, &v).is_err());
    }
}
