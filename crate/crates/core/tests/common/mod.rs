//! Printed piano and violin data shared by the integration tests, plus
//! helpers that turn a printed model into ground-truth audio.
#![allow(dead_code)]

use tonebif::controller::ControllerModel;
use tonebif::dynamics::{integrate_scalar, AmplitudeParams};
use tonebif::envelope::{EnvelopeCurve, SegmentKind, SegmentPlan};
use tonebif::schedule::MuSchedule;
use tonebif::spectral::{build_spectral_vector, compute_d0, PartialPeak, SpectralVector};
use tonebif::synthesis::{synthesize, Synthesis};

pub const RATE: u32 = 44_100;

/// A note as printed: peaks, constants, segmentation and schedule.
pub struct PrintedNote {
    pub name: &'static str,
    pub frequencies: [f64; 6],
    pub amplitudes: [f64; 6],
    /// DC term used for the model (`None` computes it from the peaks).
    pub d0: Option<f64>,
    pub params: AmplitudeParams,
    pub rho0: f64,
    pub borders: Vec<f64>,
    pub labels: Vec<SegmentKind>,
    pub breaking_points: Vec<Vec<f64>>,
    /// One `mu` per constant stretch, in time order.
    pub mus: Vec<f64>,
    /// Partial ratios measured on the printed resynthesis.
    pub simulated_ratios: [f64; 6],
}

pub fn piano() -> PrintedNote {
    use SegmentKind::*;
    PrintedNote {
        name: "piano",
        frequencies: [274.4, 548.9, 823.3, 1100.0, 1376.6, 1655.5],
        amplitudes: [0.1069, 0.0923, 0.0604, 0.0411, 0.0559, 0.0412],
        d0: None,
        params: AmplitudeParams::new(-1.0, 0.0, 1.0),
        rho0: 0.001,
        borders: vec![0.0, 0.084, 0.112, 0.16, 0.293, 3.5],
        labels: vec![Delay, Attack, Decay, Sustain, Release],
        breaking_points: vec![vec![], vec![0.0865, 0.089, 0.0991], vec![], vec![], vec![0.467, 0.6785]],
        mus: vec![-1.0, 1902.0, 498.0, 220.0, 14.0, -9.5, 0.28, -4.5, -3.2, -0.8],
        simulated_ratios: [1.0, 0.8619, 0.566, 0.376, 0.514, 0.375],
    }
}

pub fn violin() -> PrintedNote {
    use SegmentKind::*;
    PrintedNote {
        name: "violin",
        frequencies: [277.6, 555.2, 832.8, 1110.0, 1387.6, 1665.2],
        amplitudes: [0.3746, 0.1356, 0.0421, 0.0192, 0.0119, 0.0309],
        d0: Some(-0.1438),
        params: AmplitudeParams::new(1.0, -2.15, 23.0),
        rho0: 0.01,
        borders: vec![0.0, 0.345, 0.5717, 2.107, 2.5],
        labels: vec![Delay, Attack, Sustain, Release],
        breaking_points: vec![vec![], vec![0.392], vec![], vec![2.22]],
        mus: vec![-0.1, 3.36, 0.11, -0.072, -0.165, -0.6],
        simulated_ratios: [1.0, 0.362, 0.1121, 0.0513, 0.0314, 0.0813],
    }
}

impl PrintedNote {
    pub fn peaks(&self) -> Vec<PartialPeak> {
        self.frequencies
            .iter()
            .zip(&self.amplitudes)
            .enumerate()
            .map(|(i, (&frequency, &amplitude))| PartialPeak {
                index: i + 1,
                frequency,
                amplitude,
            })
            .collect()
    }

    pub fn spectral(&self) -> SpectralVector {
        let peaks = self.peaks();
        let d0 = self.d0.unwrap_or_else(|| compute_d0(&peaks));
        build_spectral_vector(&peaks, d0).unwrap()
    }

    pub fn plan(&self) -> SegmentPlan {
        SegmentPlan::with_breaking_points(self.borders.clone(), self.labels.clone(), self.breaking_points.clone())
            .unwrap()
    }

    /// Switch times: every border and breaking point except the last border.
    pub fn switch_times(&self) -> Vec<f64> {
        let mut times = Vec::new();
        for (j, points) in self.breaking_points.iter().enumerate() {
            times.push(self.borders[j]);
            times.extend(points);
        }
        times
    }

    pub fn schedule(&self) -> MuSchedule {
        let pairs: Vec<(f64, f64)> = self.switch_times().into_iter().zip(self.mus.iter().copied()).collect();
        MuSchedule::from_pairs(&pairs).unwrap()
    }

    pub fn duration(&self) -> f64 {
        *self.borders.last().unwrap()
    }

    pub fn model(&self) -> ControllerModel {
        ControllerModel::assemble(self.spectral(), self.params, self.schedule(), self.plan(), self.rho0)
    }

    /// Scalar amplitude of the printed model at the audio rate.
    pub fn rho(&self) -> Vec<f64> {
        integrate_scalar(self.rho0, &self.schedule(), &self.params, self.duration(), 1.0 / f64::from(RATE))
            .unwrap()
            .values
    }

    /// The amplitude itself, used as a noise-free envelope.
    pub fn envelope(&self) -> EnvelopeCurve {
        EnvelopeCurve::from_samples(&self.rho(), f64::from(RATE)).unwrap()
    }

    /// Audio synthesized from the printed model, standing in for the recording.
    pub fn recording(&self) -> Synthesis {
        let spectral = self.spectral();
        let r1: Vec<f64> = self.rho().iter().map(|r| r / spectral.rho_sum).collect();
        synthesize(&r1, &spectral, None, RATE).unwrap()
    }
}
