//! Fixed numerical budgets shared by several stages.

/// Normalized amplitude below which a difference is treated as inaudible.
pub const HEARING_THRESHOLD: f64 = 7.0 / 127.0;

/// Lowest fundamental (A0) for which the per-band spectral bound applies.
pub const LOWEST_FUNDAMENTAL_HZ: f64 = 27.5;

/// Relative half-width of the search window around each harmonic.
pub const HARMONIC_WINDOW: f64 = 0.03;

/// Default number of partials kept by the analysis.
pub const DEFAULT_PARTIALS: usize = 6;

/// Per-subinterval tracking tolerance used while placing breaking points.
pub const FIT_TOLERANCE: f64 = 0.05;

/// Magnitude beyond which an integration is declared to have escaped.
pub const BLOW_UP_GUARD: f64 = 1.0e6;

/// Derivative magnitude below which an equilibrium is called degenerate.
pub const DEGENERATE_SLOPE: f64 = 1.0e-8;

/// Sample rate used when synthesizing from a model without an input file.
pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
