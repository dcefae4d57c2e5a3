//! Additive resynthesis and spectral checks on the synthesized sound.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::constants::{HEARING_THRESHOLD, LOWEST_FUNDAMENTAL_HZ};
use crate::envelope::upper_envelope;
use crate::error::{Error, Result};
use crate::fft::{fft_in_place, next_pow2};
use crate::spectral::{analyze, AnalysisConfig, SpectralVector};

/// Synthesized note and the gain applied to keep it inside `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub buffer: AudioBuffer,
    /// 1 unless the raw sum exceeded unit magnitude.
    pub gain: f64,
}

/// `sum_i (d_i / d_1) r_1(t) cos(omega_i t + phase_i)` sampled at `sample_rate`.
///
/// `phases` defaults to zero for every oscillator.
pub fn synthesize(
    r1: &[f64],
    spectral: &SpectralVector,
    phases: Option<&[f64]>,
    sample_rate: u32,
) -> Result<Synthesis> {
    let count = spectral.d.len();
    if let Some(p) = phases {
        if p.len() != count {
            return Err(Error::InvalidInput(format!(
                "{} phases given for {count} oscillators",
                p.len()
            )));
        }
    }
    let dt = 1.0 / f64::from(sample_rate);
    let weights: Vec<f64> = (0..count).map(|i| spectral.ratio(i)).collect();
    let mut samples: Vec<f64> = r1
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let t = k as f64 * dt;
            (0..count)
                .map(|i| {
                    let phase = phases.map_or(0.0, |p| p[i]);
                    weights[i] * (spectral.omega[i] * t + phase).cos()
                })
                .sum::<f64>()
                * r
        })
        .collect();

    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let gain = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    if gain != 1.0 {
        samples.iter_mut().for_each(|s| *s *= gain);
    }
    Ok(Synthesis {
        buffer: AudioBuffer::new(samples, sample_rate)?,
        gain,
    })
}

/// Trapezoidal integral of a uniformly sampled series.
pub fn trapezoid(series: &[f64], dt: f64) -> f64 {
    match series {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dt * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Predicted location and height of one spectral peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPeak {
    pub frequency: f64,
    pub magnitude: f64,
}

/// Peak heights `(d_i / 2 d_1) * integral of r_1`, one per oscillator.
pub fn estimated_peaks(r1: &[f64], spectral: &SpectralVector, dt: f64) -> Vec<EstimatedPeak> {
    let area = trapezoid(r1, dt);
    spectral
        .nu
        .iter()
        .enumerate()
        .map(|(i, &frequency)| EstimatedPeak {
            frequency,
            magnitude: 0.5 * spectral.ratio(i) * area,
        })
        .collect()
}

/// Continuous-time Fourier transform `integral f(t) exp(i shift t) exp(-i w t) dt`
/// approximated on the DFT grid of length `len`.
///
/// With `shift = 0` this is the transform of the series itself; a nonzero
/// shift evaluates the transform at `w - shift`.
pub fn shifted_transform(series: &[f64], dt: f64, shift: f64, len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (k, (slot, &v)) in buf.iter_mut().zip(series).enumerate() {
        *slot = Complex64::from_polar(v * dt, shift * k as f64 * dt);
    }
    fft_in_place(&mut buf);
    buf
}

/// Worst deviation from the single-partial prediction inside one band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDeviation {
    pub partial: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Outcome of [`verify_modulation_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationReport {
    pub bands: Vec<BandDeviation>,
    pub pass: bool,
    pub bound: f64,
    pub warning: Option<String>,
}

/// Compares the spectrum of `signal` with half the shifted transform of each
/// partial's amplitude inside that partial's band.
///
/// `amplitudes[k]` is the amplitude series of oscillator `k` on the same
/// scale as the signal samples; oscillator phases are taken to be zero.
pub fn verify_modulation_bound(
    signal: &AudioBuffer,
    amplitudes: &[Vec<f64>],
    spectral: &SpectralVector,
) -> Result<ModulationReport> {
    let count = spectral.d.len();
    if amplitudes.len() != count {
        return Err(Error::InvalidInput(format!(
            "{} amplitude series given for {count} oscillators",
            amplitudes.len()
        )));
    }
    if signal.is_empty() {
        return Err(Error::InvalidInput("cannot check an empty signal".into()));
    }
    let fundamental = spectral.fundamental_hz();
    let warning = (fundamental < LOWEST_FUNDAMENTAL_HZ).then(|| {
        format!("fundamental {fundamental} Hz is below {LOWEST_FUNDAMENTAL_HZ} Hz; the bound is not guaranteed")
    });

    let dt = signal.dt();
    let len = next_pow2(signal.len());
    let bin_hz = f64::from(signal.sample_rate) / len as f64;
    let spectrum = shifted_transform(&signal.samples, dt, 0.0, len);

    let mut bands = Vec::with_capacity(count.saturating_sub(1));
    for (k, series) in amplitudes.iter().enumerate().skip(1) {
        let low_hz = (k as f64 - 0.5) * fundamental;
        let high_hz = (k as f64 + 0.5) * fundamental;
        let first = (low_hz / bin_hz).floor() as usize + 1;
        let last = ((high_hz / bin_hz).ceil() as usize).min(len / 2 + 1);
        let model = shifted_transform(series, dt, spectral.omega[k], len);
        let max_deviation = (first..last)
            .filter(|&j| {
                let f = j as f64 * bin_hz;
                f > low_hz && f < high_hz
            })
            .map(|j| (spectrum[j] - 0.5 * model[j]).norm())
            .fold(0.0, f64::max);
        bands.push(BandDeviation {
            partial: k,
            low_hz,
            high_hz,
            max_deviation,
            pass: max_deviation < HEARING_THRESHOLD,
        });
    }
    Ok(ModulationReport {
        pass: bands.iter().all(|b| b.pass),
        bands,
        bound: HEARING_THRESHOLD,
        warning,
    })
}

/// Peak amplitude of each detected partial relative to the fundamental.
pub fn partial_ratio_report(buffer: &AudioBuffer, n: usize) -> Result<Vec<f64>> {
    let config = AnalysisConfig {
        partials: n,
        ..AnalysisConfig::default()
    };
    let peaks = analyze(buffer, &config)?.peaks;
    let fundamental = peaks[0].amplitude;
    Ok(peaks.iter().map(|p| p.amplitude / fundamental).collect())
}

/// Peak separation, in samples, used to follow the envelope of a tone.
pub fn envelope_gap(sample_rate: u32, fundamental_hz: f64) -> usize {
    ((f64::from(sample_rate) / fundamental_hz).round() as usize).max(2)
}

/// Largest pointwise gap between the upper envelopes of two signals over
/// their common duration, with both envelopes followed at the same spacing.
pub fn envelope_max_error(a: &AudioBuffer, b: &AudioBuffer, min_gap: usize) -> Result<f64> {
    let ea = upper_envelope(a, min_gap)?;
    let eb = upper_envelope(b, min_gap)?;
    let samples = a.len().min(b.len());
    let dt = a.dt();
    Ok((0..samples)
        .map(|k| {
            let t = k as f64 * dt;
            (ea.eval(t) - eb.eval(t)).abs()
        })
        .fold(0.0, f64::max))
}

/// Largest gap between the upper envelope of `signal` and a reference
/// series sampled on the same grid.
pub fn envelope_error_against(signal: &AudioBuffer, reference: &[f64], min_gap: usize) -> Result<f64> {
    let env = upper_envelope(signal, min_gap)?;
    let dt = signal.dt();
    Ok(reference
        .iter()
        .enumerate()
        .map(|(k, &r)| (env.eval(k as f64 * dt) - r).abs())
        .fold(0.0, f64::max))
}

/// Angular frequency of DFT bin `j` for a grid of `len` points at `sample_rate`.
pub fn bin_angular_frequency(j: usize, len: usize, sample_rate: u32) -> f64 {
    2.0 * PI * j as f64 * f64::from(sample_rate) / len as f64
}
