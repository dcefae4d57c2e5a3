//! Magnitude spectra, harmonic peak picking and the amplitude spectral vector.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::constants::{HARMONIC_WINDOW, LOWEST_FUNDAMENTAL_HZ};
use crate::error::{Error, Result};
use crate::fft::{fft_real_padded, next_pow2};

/// Analysis window applied before the transform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rect,
    Hann,
}

impl Window {
    fn weight(self, k: usize, len: usize) -> f64 {
        match self {
            Window::Rect => 1.0,
            Window::Hann if len < 2 => 1.0,
            Window::Hann => 0.5 * (1.0 - (2.0 * PI * k as f64 / (len - 1) as f64).cos()),
        }
    }
}

/// One-sided magnitude spectrum (bins `0..=N/2`) of a zero-padded signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub sample_rate: f64,
    pub fft_len: usize,
    /// Raw DFT moduli.
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.fft_len as f64
    }

    pub fn bin_freq(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width()
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        (0..self.magnitudes.len()).map(|k| self.bin_freq(k)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes.iter().copied().fold(0.0, f64::max)
    }

    /// Magnitudes scaled so the largest equals one.
    pub fn normalized(&self) -> Vec<f64> {
        let peak = self.max_magnitude();
        if peak == 0.0 {
            return self.magnitudes.clone();
        }
        self.magnitudes.iter().map(|m| m / peak).collect()
    }

    fn is_local_max(&self, k: usize) -> bool {
        let m = &self.magnitudes;
        k > 0 && k + 1 < m.len() && m[k] > m[k - 1] && m[k] >= m[k + 1]
    }

    /// Largest local maximum whose bin frequency lies in `[lo, hi]`.
    fn largest_local_max(&self, lo: f64, hi: f64) -> Option<usize> {
        let width = self.bin_width();
        let first = ((lo / width).ceil().max(1.0)) as usize;
        let last = ((hi / width).floor() as usize).min(self.magnitudes.len().saturating_sub(2));
        (first..=last)
            .filter(|&k| self.is_local_max(k))
            .max_by(|&a, &b| self.magnitudes[a].total_cmp(&self.magnitudes[b]))
    }

    fn nearest_local_max(&self, target: f64) -> Option<usize> {
        (1..self.magnitudes.len())
            .filter(|&k| self.is_local_max(k))
            .min_by(|&a, &b| {
                (self.bin_freq(a) - target)
                    .abs()
                    .total_cmp(&(self.bin_freq(b) - target).abs())
            })
    }

    /// Peak location (fractional bin) and height from a parabola through
    /// the bin and its two neighbours.
    fn interpolate(&self, k: usize) -> (f64, f64) {
        let m = &self.magnitudes;
        let (left, mid, right) = (m[k - 1], m[k], m[k + 1]);
        let curvature = left - 2.0 * mid + right;
        if curvature >= 0.0 {
            return (k as f64, mid);
        }
        let offset = 0.5 * (left - right) / curvature;
        (k as f64 + offset, mid - 0.25 * (left - right) * offset)
    }
}

/// Harmonic partial located in a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialPeak {
    /// Harmonic number, starting at 1 for the fundamental.
    pub index: usize,
    /// Frequency in Hz.
    pub frequency: f64,
    /// Magnitude relative to the largest spectral magnitude.
    pub amplitude: f64,
}

/// Signed partial amplitudes and angular frequencies, DC term first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralVector {
    pub n: usize,
    /// Frequencies in Hz, `nu[0] = 0`.
    pub nu: Vec<f64>,
    /// Amplitudes `d[0..=n]`; `d[0]` may be negative.
    pub d: Vec<f64>,
    /// Angular frequencies in rad/s.
    pub omega: Vec<f64>,
    /// Sum of all amplitudes over the fundamental's amplitude.
    pub rho_sum: f64,
}

impl SpectralVector {
    /// Builds a vector from frequencies (Hz, DC included) and amplitudes.
    pub fn from_parts(nu: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if nu.len() != d.len() || d.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "spectral vector needs matching frequency/amplitude lists with at least two entries (got {} and {})",
                nu.len(),
                d.len()
            )));
        }
        let omega = nu.iter().map(|f| 2.0 * PI * f).collect();
        let rho_sum = d.iter().sum::<f64>() / d[1];
        let sv = Self {
            n: d.len() - 1,
            nu,
            d,
            omega,
            rho_sum,
        };
        sv.validate()?;
        Ok(sv)
    }

    /// Checks the structural invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.d.len() != n + 1 || self.nu.len() != n + 1 || self.omega.len() != n + 1 {
            return Err(Error::InvalidInput(format!(
                "spectral vector lists must have n + 1 = {} entries",
                n + 1
            )));
        }
        if self.omega[0] != 0.0 {
            return Err(Error::InvalidInput("the first frequency must be 0".into()));
        }
        if self.omega[1..].iter().any(|&w| !(w > 0.0)) || self.omega[1..].windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "partial frequencies must be positive and strictly increasing".into(),
            ));
        }
        if self.d[1..].iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidInput("partial amplitudes must be positive".into()));
        }
        if !(self.rho_sum > 0.0) {
            return Err(Error::InvalidInput(format!(
                "amplitude sum ratio {} is not positive",
                self.rho_sum
            )));
        }
        Ok(())
    }

    /// `d[i] / d[1]`.
    pub fn ratio(&self, i: usize) -> f64 {
        self.d[i] / self.d[1]
    }

    pub fn fundamental_hz(&self) -> f64 {
        self.nu[1]
    }
}

/// Options for [`analyze`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub partials: usize,
    pub window: Window,
    pub fundamental_hint: Option<f64>,
    /// When set, partials below this relative amplitude are dropped, along
    /// with every higher partial.
    pub min_amplitude: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            partials: crate::constants::DEFAULT_PARTIALS,
            window: Window::Rect,
            fundamental_hint: None,
            min_amplitude: None,
        }
    }
}

/// Magnitude spectrum of the buffer, zero-padded to a power of two.
pub fn magnitude_spectrum(buffer: &AudioBuffer, window: Window) -> Result<Spectrum> {
    if buffer.is_empty() {
        return Err(Error::InvalidInput("cannot take the spectrum of an empty buffer".into()));
    }
    let len = buffer.len();
    let weighted: Vec<f64> = buffer
        .samples
        .iter()
        .enumerate()
        .map(|(k, &s)| s * window.weight(k, len))
        .collect();
    let fft_len = next_pow2(len);
    let bins = fft_real_padded(&weighted, fft_len);
    Ok(Spectrum {
        sample_rate: f64::from(buffer.sample_rate),
        fft_len,
        magnitudes: bins[..=fft_len / 2].iter().map(|c| c.norm()).collect(),
    })
}

/// Locates the fundamental and the next `n - 1` harmonic partials.
pub fn detect_partial_peaks(
    spectrum: &Spectrum,
    n: usize,
    fundamental_hint: Option<f64>,
) -> Result<Vec<PartialPeak>> {
    if n == 0 {
        return Err(Error::InvalidInput("at least one partial is required".into()));
    }
    let scale = spectrum.max_magnitude();
    if scale == 0.0 {
        return Err(Error::MissingPartial { index: 1 });
    }
    let peak_at = |index: usize, bin: usize| {
        let (pos, height) = spectrum.interpolate(bin);
        PartialPeak {
            index,
            frequency: pos * spectrum.bin_width(),
            amplitude: height / scale,
        }
    };

    let fundamental_bin = match fundamental_hint {
        Some(hint) => spectrum
            .largest_local_max(hint * (1.0 - HARMONIC_WINDOW), hint * (1.0 + HARMONIC_WINDOW))
            .or_else(|| spectrum.nearest_local_max(hint)),
        None => spectrum.largest_local_max(LOWEST_FUNDAMENTAL_HZ, spectrum.nyquist() / n as f64),
    }
    .ok_or(Error::MissingPartial { index: 1 })?;
    let fundamental = peak_at(1, fundamental_bin);

    let mut peaks = vec![fundamental];
    for index in 2..=n {
        let centre = index as f64 * fundamental.frequency;
        let bin = spectrum
            .largest_local_max(centre * (1.0 - HARMONIC_WINDOW), centre * (1.0 + HARMONIC_WINDOW))
            .ok_or(Error::MissingPartial { index })?;
        peaks.push(peak_at(index, bin));
    }
    Ok(peaks)
}

/// DC amplitude that keeps the partial sum's envelope one-sided.
///
/// The minimum of `sum_i d_i cos(2 pi i f1 t)` over one fundamental period
/// is bracketed on a grid and then narrowed by golden-section search. The
/// partials are taken at exact multiples of the fundamental so the sum is
/// periodic over the searched interval.
pub fn compute_d0(peaks: &[PartialPeak]) -> f64 {
    const GRID: usize = 8192;
    /// Search stops once the bracket is this fraction of a period.
    const RELATIVE_TOL: f64 = 1e-12;

    let Some(first) = peaks.first() else {
        return 0.0;
    };
    let fundamental = first.frequency / first.index as f64;
    let period = 1.0 / fundamental;
    let sum = |t: f64| -> f64 {
        peaks
            .iter()
            .map(|p| p.amplitude * (2.0 * PI * p.index as f64 * fundamental * t).cos())
            .sum()
    };

    let step = period / GRID as f64;
    let best = (0..GRID)
        .map(|k| k as f64 * step)
        .min_by(|&a, &b| sum(a).total_cmp(&sum(b)))
        .unwrap_or(0.0);

    let (mut lo, mut hi) = (best - step, best + step);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (sum(x1), sum(x2));
    while hi - lo > RELATIVE_TOL * period {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = sum(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = sum(x2);
        }
    }
    let minimum = sum(0.5 * (lo + hi)).min(sum(best));

    let total: f64 = peaks.iter().map(|p| p.amplitude).sum();
    -0.5 * (total + minimum)
}

/// Assembles the spectral vector with `d0` as the DC amplitude.
pub fn build_spectral_vector(peaks: &[PartialPeak], d0: f64) -> Result<SpectralVector> {
    let mut nu = vec![0.0];
    let mut d = vec![d0];
    for p in peaks {
        nu.push(p.frequency);
        d.push(p.amplitude);
    }
    SpectralVector::from_parts(nu, d)
}

/// Magnitude of the discrete-time Fourier transform of `samples` at `freq` Hz.
pub(crate) fn dtft_magnitude(samples: &[f64], sample_rate: f64, freq: f64) -> f64 {
    let step = Complex64::from_polar(1.0, -2.0 * PI * freq / sample_rate);
    let mut phasor = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &x) in samples.iter().enumerate() {
        acc += phasor * x;
        phasor *= step;
        // Renormalize now and then so rounding does not shrink the phasor.
        if k % 1024 == 1023 {
            phasor /= phasor.norm();
        }
    }
    acc.norm()
}

/// Moves each peak to the maximum of the continuous spectrum within one bin
/// of its interpolated location.
///
/// Parabolic interpolation misjudges the height of a peak that falls between
/// bins by up to a few percent; the continuous transform does not.
fn refine_peaks(buffer: &AudioBuffer, window: Window, spectrum: &Spectrum, peaks: &mut [PartialPeak]) {
    const FREQ_TOL_BINS: f64 = 1e-4;
    let len = buffer.len();
    let weighted: Vec<f64> = buffer
        .samples
        .iter()
        .enumerate()
        .map(|(k, &s)| s * window.weight(k, len))
        .collect();
    let rate = spectrum.sample_rate;
    let width = spectrum.bin_width();
    let scale = spectrum.max_magnitude();
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for peak in peaks.iter_mut() {
        let f = |x: f64| -dtft_magnitude(&weighted, rate, x);
        let (mut lo, mut hi) = (peak.frequency - width, peak.frequency + width);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        while hi - lo > FREQ_TOL_BINS * width {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = f(x2);
            }
        }
        let frequency = 0.5 * (lo + hi);
        peak.frequency = frequency;
        peak.amplitude = -f(frequency) / scale;
    }
}

/// Result of the analysis stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub spectrum: Spectrum,
    pub peaks: Vec<PartialPeak>,
    pub spectral: SpectralVector,
}

/// Spectrum, peaks and spectral vector of a recorded note.
pub fn analyze(buffer: &AudioBuffer, config: &AnalysisConfig) -> Result<Analysis> {
    let spectrum = magnitude_spectrum(buffer, config.window)?;
    let mut peaks = detect_partial_peaks(&spectrum, config.partials, config.fundamental_hint)?;
    refine_peaks(buffer, config.window, &spectrum, &mut peaks);
    if let Some(floor) = config.min_amplitude {
        if let Some(cut) = peaks.iter().position(|p| p.amplitude < floor) {
            peaks.truncate(cut.max(1));
        }
    }
    let spectral = build_spectral_vector(&peaks, compute_d0(&peaks))?;
    Ok(Analysis {
        spectrum,
        peaks,
        spectral,
    })
}
