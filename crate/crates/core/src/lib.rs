//! Tone coloring with a bifurcation-controlled oscillator system.
//!
//! A recorded note is reduced to a spectral vector (partial frequencies and
//! amplitudes) and a temporal envelope. A scalar amplitude equation
//! `rho' = alpha rho (mu + a rho^2 + b rho^4)` is then driven by a piecewise
//! constant schedule `mu(t)` so that `rho` tracks the envelope, and the note
//! is rebuilt as a sum of oscillators whose radii are fixed multiples of
//! `rho`. Switches of `mu` across transition values are reported as
//! pitchfork and double saddle-node bifurcations of invariant tori.
//!
//! The stages, in pipeline order:
//!
//! * [`audio_io`] reads and writes WAV files.
//! * [`spectral`] finds partial peaks and builds the [`SpectralVector`].
//! * [`envelope`] follows the upper envelope and segments it.
//! * [`controller`] fits constants and the `mu` schedule.
//! * [`dynamics`] integrates the scalar and full systems.
//! * [`bifurcation`] classifies what the schedule does to the equilibria.
//! * [`synthesis`] rebuilds audio and checks it spectrally.
//! * [`artifacts`] and [`cli`] connect the stages through files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod audio_io;
pub mod bifurcation;
pub mod cli;
pub mod constants;
pub mod controller;
pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod fft;
pub mod schedule;
pub mod spectral;
pub mod spline;
pub mod synthesis;

pub use audio_io::{read_wav, write_wav, AudioBuffer};
pub use controller::{build_model, ControllerModel, FitConfig, FitReport};
pub use dynamics::{AmplitudeParams, Trajectory};
pub use envelope::{EnvelopeCurve, SegmentKind, SegmentPlan};
pub use error::{Error, Result};
pub use schedule::{MuSchedule, MuStep};
pub use spectral::{analyze, AnalysisConfig, SpectralVector};
