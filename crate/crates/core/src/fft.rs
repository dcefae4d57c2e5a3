//! Iterative radix-2 FFT on complex samples.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Smallest power of two that is at least `len` (and at least 1).
pub fn next_pow2(len: usize) -> usize {
    len.max(1).next_power_of_two()
}

/// In-place forward DFT, `X[k] = sum_j x[j] exp(-2 pi i j k / N)`.
///
/// # Panics
/// If the length is not a power of two.
pub fn fft_in_place(data: &mut [Complex64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
    if n < 2 {
        return;
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    // Twiddles are computed directly rather than by repeated multiplication so
    // rounding does not accumulate along a stage.
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect();

    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let stride = n / size;
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let even = data[start + k];
                let odd = data[start + k + half] * w;
                data[start + k] = even + odd;
                data[start + k + half] = even - odd;
            }
        }
        size *= 2;
    }
}

/// Forward DFT of a real sequence zero-padded to `len` (a power of two).
pub fn fft_real_padded(samples: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (slot, &s) in buf.iter_mut().zip(samples) {
        slot.re = s;
    }
    fft_in_place(&mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let x: Vec<Complex64> = (0..64)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos()))
            .collect();
        let mut fast = x.clone();
        fft_in_place(&mut fast);
        for (a, b) in fast.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn trivial_lengths() {
        let mut one = vec![Complex64::new(3.0, -1.0)];
        fft_in_place(&mut one);
        assert_eq!(one[0], Complex64::new(3.0, -1.0));
        assert_eq!(next_pow2(0), 1);
        assert_eq!(next_pow2(5), 8);
        assert_eq!(next_pow2(8), 8);
    }

    #[test]
    #[should_panic]
    fn rejects_non_power_of_two() {
        fft_in_place(&mut [Complex64::new(0.0, 0.0); 6]);
    }

    proptest::proptest! {
        #[test]
        fn real_input_has_conjugate_symmetric_magnitudes(
            x in proptest::collection::vec(-1.0f64..1.0, 1..300)
        ) {
            let n = next_pow2(x.len());
            let spec = fft_real_padded(&x, n);
            for k in 1..n {
                let d = (spec[k].norm() - spec[n - k].norm()).abs();
                proptest::prop_assert!(d <= 1e-9 * (1.0 + spec[k].norm()));
            }
        }
    }
}
