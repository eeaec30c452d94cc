//! Discrete Fourier transforms.
//!
//! [`dft_oracle`] is the literal O(N^2) sum and serves as the reference for
//! [`fft`], which is backed by `rustfft` plans cached per thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// `X(k) = sum_n x(n) * exp(-j*2*pi*k*n/N)`, evaluated term by term.
pub fn dft_oracle(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| {
                    // Reduce k*i mod N before scaling so the angle stays small.
                    let angle = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect()
}

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// In-place forward transform of every consecutive `len`-sized chunk of `buf`.
pub(crate) fn fft_chunks_in_place(buf: &mut [Complex64], len: usize) {
    if len == 0 || buf.is_empty() {
        return;
    }
    plan(len, false).process(buf);
}

pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::Size("fft of an empty vector".into()));
    }
    let mut out = x.to_vec();
    plan(x.len(), false).process(&mut out);
    Ok(out)
}

/// Inverse transform normalised by `1/N`, so `ifft(fft(x)) == x`.
pub fn ifft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::Size("ifft of an empty vector".into()));
    }
    let mut out = x.to_vec();
    plan(x.len(), true).process(&mut out);
    let scale = 1.0 / x.len() as f64;
    out.iter_mut().for_each(|z| *z *= scale);
    Ok(out)
}

/// Swaps halves so the zero-frequency bin moves to index `len / 2`.
pub fn fftshift<T: Copy>(x: &mut [T]) {
    let half = x.len() / 2;
    x.rotate_right(half);
}

/// Symmetric Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs(x: &[Complex64]) -> f64 {
        x.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn impulse_transforms_to_ones() {
        let mut x = vec![c(0.0, 0.0); 9];
        x[0] = c(1.0, 0.0);
        for v in dft_oracle(&x) {
            assert!((v - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn complex_exponential_hits_one_bin() {
        let n = 16;
        let m = 5;
        let x: Vec<_> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (m * i) as f64 / n as f64))
            .collect();
        let spec = dft_oracle(&x);
        for (k, v) in spec.iter().enumerate() {
            let want = if k == m { n as f64 } else { 0.0 };
            assert!((v - c(want, 0.0)).norm() <= 1e-12 * n as f64, "bin {k}: {v}");
        }
    }

    #[test]
    fn dc_vector() {
        let spec = dft_oracle(&[c(1.0, 0.0); 4]);
        let want = [4.0, 0.0, 0.0, 0.0];
        for (v, w) in spec.iter().zip(want) {
            assert!((v - c(w, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn empty_input_is_size_error() {
        assert!(matches!(fft(&[]), Err(Error::Size(_))));
        assert!(matches!(ifft(&[]), Err(Error::Size(_))));
    }

    #[test]
    fn shift_centres_dc() {
        let mut x = [0, 1, 2, 3, 4, 5, 6, 7];
        fftshift(&mut x);
        assert_eq!(x, [4, 5, 6, 7, 0, 1, 2, 3]);
        assert_eq!(x[4], 0);
    }

    #[test]
    fn hann_endpoints_and_peak() {
        let w = hann(5);
        assert_eq!(w[0], 0.0);
        assert!((w[2] - 1.0).abs() < 1e-15);
        assert!(w[4].abs() < 1e-15);
        assert_eq!(hann(1), vec![1.0]);
    }

    fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b)), len)
    }

    fn lengths() -> impl Strategy<Value = usize> {
        prop_oneof![1usize..=16, Just(112usize), Just(128), Just(256)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn fft_matches_oracle(x in lengths().prop_flat_map(complex_vec)) {
            let fast = fft(&x).unwrap();
            let slow = dft_oracle(&x);
            let tol = 1e-9 * max_abs(&x).max(f64::MIN_POSITIVE) * x.len() as f64;
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).norm() <= tol);
            }
        }

        #[test]
        fn inverse_round_trip(x in lengths().prop_flat_map(complex_vec)) {
            let back = ifft(&fft(&x).unwrap()).unwrap();
            let tol = 1e-9 * max_abs(&x).max(1e-300);
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).norm() <= tol);
            }
        }

        #[test]
        fn linearity(
            (x, y) in lengths().prop_flat_map(|n| (complex_vec(n), complex_vec(n))),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let mix: Vec<_> = x.iter().zip(&y).map(|(p, q)| p * a + q * b).collect();
            let lhs = fft(&mix).unwrap();
            let fx = fft(&x).unwrap();
            let fy = fft(&y).unwrap();
            let scale = (max_abs(&x) + max_abs(&y)).max(1e-300) * x.len() as f64;
            for i in 0..lhs.len() {
                let rhs = fx[i] * a + fy[i] * b;
                prop_assert!((lhs[i] - rhs).norm() <= 1e-9 * scale);
            }
        }
    }
}
