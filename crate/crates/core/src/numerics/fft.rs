//! Radix-2 FFT, real-input helpers and an arbitrary-length DFT (Bluestein).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid_arg, Result};

/// Precomputed twiddles and bit-reversal table for one power-of-two length.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid_arg(format!("FFT length {n} is not a power of two")));
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(theta.cos(), theta.sin())
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, `X_k = sum_t x_t e^{-2 pi i k t / n}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// In-place inverse transform including the `1/n` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(buf.len(), n, "buffer length must match plan length");
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let mut w = self.twiddles[j * step];
                    if inverse {
                        w = w.conj();
                    }
                    let u = buf[start + j];
                    let v = buf[start + j + half] * w;
                    buf[start + j] = u + v;
                    buf[start + j + half] = u - v;
                }
            }
            len <<= 1;
        }
    }
}

/// Smallest power of two that is `>= n` (and at least 1).
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Real FFT of `signal` zero-padded to `n`; returns bins `0..=n/2`.
pub fn rfft(signal: &[f64], n: usize) -> Result<Vec<Complex64>> {
    if signal.len() > n {
        return Err(invalid_arg(format!("signal length {} exceeds FFT length {n}", signal.len())));
    }
    let plan = FftPlan::new(n)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (b, &x) in buf.iter_mut().zip(signal) {
        b.re = x;
    }
    plan.forward(&mut buf);
    buf.truncate(n / 2 + 1);
    Ok(buf)
}

/// Inverse of [`rfft`]: takes bins `0..=n/2` and returns `n` real samples.
pub fn irfft(spectrum: &[Complex64], n: usize) -> Result<Vec<f64>> {
    let plan = FftPlan::new(n)?;
    if spectrum.len() != n / 2 + 1 {
        return Err(invalid_arg(format!(
            "expected {} half-spectrum bins for n = {n}, got {}",
            n / 2 + 1,
            spectrum.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..spectrum.len()].copy_from_slice(spectrum);
    for k in n / 2 + 1..n {
        buf[k] = spectrum[n - k].conj();
    }
    plan.inverse(&mut buf);
    Ok(buf.into_iter().map(|z| z.re).collect())
}

/// Exact `N`-point DFT of a real signal for any `N`.
///
/// Powers of two go straight through the radix-2 kernel; other lengths use
/// Bluestein's chirp-z identity on a padded power-of-two convolution.
pub fn dft(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut data: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    if n.is_power_of_two() {
        FftPlan::new(n).expect("power of two").forward(&mut data);
        return data;
    }
    bluestein(&data)
}

fn bluestein(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let m = next_pow2(2 * n - 1);
    let plan = FftPlan::new(m).expect("power of two");
    // k^2 mod 2n keeps the chirp angle small and exact.
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
            let theta = -PI * k2 / n as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; m];
    for k in 0..n {
        a[k] = x[k] * chirp[k];
    }
    let mut b = vec![zero; m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    plan.forward(&mut a);
    plan.forward(&mut b);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi;
    }
    plan.inverse(&mut a);
    (0..n).map(|k| a[k] * chirp[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                    let th = -2.0 * PI * (k * t % n) as f64 / n as f64;
                    acc + Complex64::new(th.cos(), th.sin()) * v
                })
            })
            .collect()
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let s = rfft(&[1.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(s.len(), 3);
        for z in s {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_is_dc_only() {
        let s = rfft(&[1.0; 4], 4).unwrap();
        let want = [4.0, 0.0, 0.0];
        for (z, w) in s.iter().zip(want) {
            assert!((z - Complex64::new(w, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(rfft(&[1.0, 2.0], 6).is_err());
        assert!(rfft(&[1.0; 5], 4).is_err());
        assert!(FftPlan::new(0).is_err());
    }

    #[test]
    fn round_trip_length_64() {
        let mut rng = crate::rng::RngStream::new(11).rng();
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = irfft(&rfft(&x, 64).unwrap(), 64).unwrap();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "round-trip error {err}");
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = crate::rng::RngStream::new(3).rng();
        let x: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = rfft(&x, 32).unwrap();
        let slow = naive_dft(&x);
        for k in 0..=16 {
            assert!((fast[k] - slow[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn bluestein_matches_naive_dft() {
        let mut rng = crate::rng::RngStream::new(5).rng();
        for n in [1usize, 3, 5, 12, 100, 257] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = dft(&x);
            let slow = naive_dft(&x);
            for k in 0..n {
                assert!((fast[k] - slow[k]).norm() < 1e-9, "n={n} k={k}");
            }
        }
    }
}
