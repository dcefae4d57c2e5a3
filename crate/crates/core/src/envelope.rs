//! Upper temporal envelope and its segmentation into note phases.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};
use crate::spline::NaturalSpline;

/// Bisection tolerance, in seconds, when inverting the envelope.
pub const INVERSE_TOL: f64 = 1e-6;

/// Upper envelope `gamma(t)`: a natural spline through amplitude maxima,
/// clamped at zero and held constant outside its knots.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCurve {
    spline: NaturalSpline,
    start: f64,
    end: f64,
    sample_rate: f64,
}

impl EnvelopeCurve {
    /// Envelope through explicit knots, defined on `[start, end]`.
    pub fn from_knots(
        times: Vec<f64>,
        values: Vec<f64>,
        span: (f64, f64),
        sample_rate: f64,
    ) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("envelope values must be finite".into()));
        }
        if !(span.1 > span.0) || !(sample_rate > 0.0) {
            return Err(Error::InvalidInput("envelope span and sample rate must be positive".into()));
        }
        let spline = NaturalSpline::new(times, values.into_iter().map(|v| v.max(0.0)).collect())?;
        Ok(Self {
            spline,
            start: span.0,
            end: span.1,
            sample_rate,
        })
    }

    /// Envelope through one knot per sample of a uniformly sampled curve.
    pub fn from_samples(values: &[f64], sample_rate: f64) -> Result<Self> {
        let dt = 1.0 / sample_rate;
        let times = (0..values.len()).map(|k| k as f64 * dt).collect();
        let end = (values.len().max(2) - 1) as f64 * dt;
        Self::from_knots(times, values.to_vec(), (0.0, end), sample_rate)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.spline.eval(t).max(0.0)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if self.spline.eval(t) < 0.0 {
            0.0
        } else {
            self.spline.derivative(t)
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn knot_times(&self) -> &[f64] {
        self.spline.knots()
    }

    pub fn knot_values(&self) -> &[f64] {
        self.spline.values()
    }

    /// Largest envelope value over a uniform grid of `[start, end]`.
    pub fn peak(&self) -> f64 {
        let max_knot = self.knot_values().iter().copied().fold(0.0, f64::max);
        self.grid(self.start, self.end, 0.5e-3)
            .map(|t| self.eval(t))
            .fold(max_knot, f64::max)
    }

    /// Uniform grid over `[lo, hi]` with at most `step` spacing.
    pub(crate) fn grid(&self, lo: f64, hi: f64, step: f64) -> impl Iterator<Item = f64> {
        let count = (((hi - lo) / step).ceil() as usize).max(1);
        let h = (hi - lo) / count as f64;
        (0..=count).map(move |k| lo + k as f64 * h)
    }

    /// First time in `[lo, hi]` where the envelope reaches `value`, refined by
    /// bisection to [`INVERSE_TOL`]. Returns `None` when there is no crossing.
    pub fn inverse(&self, value: f64, lo: f64, hi: f64) -> Option<f64> {
        let f = |t: f64| self.eval(t) - value;
        let f_lo = f(lo);
        if f_lo == 0.0 {
            return Some(lo);
        }
        let knots = self.knot_times();
        let first = knots.partition_point(|&k| k <= lo);
        let mut prev = lo;
        let mut prev_val = f_lo;
        let candidates = knots[first..].iter().copied().take_while(|&k| k < hi).chain([hi]);
        for t in candidates {
            let val = f(t);
            if val == 0.0 {
                return Some(t);
            }
            if (val > 0.0) != (prev_val > 0.0) {
                let (mut a, mut b) = (prev, t);
                while b - a > INVERSE_TOL {
                    let mid = 0.5 * (a + b);
                    if (f(mid) > 0.0) == (prev_val > 0.0) {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                return Some(0.5 * (a + b));
            }
            prev = t;
            prev_val = val;
        }
        None
    }

    /// Largest `|gamma'|` on a grid over `[lo, hi]`.
    pub(crate) fn max_abs_slope(&self, lo: f64, hi: f64) -> f64 {
        self.grid(lo, hi, SLOPE_GRID)
            .map(|t| self.derivative(t).abs())
            .fold(0.0, f64::max)
    }
}

const SLOPE_GRID: f64 = 0.5e-3;

/// Upper envelope from local maxima of `|x|` separated by at least `min_gap` samples.
pub fn upper_envelope(buffer: &AudioBuffer, min_gap: usize) -> Result<EnvelopeCurve> {
    if min_gap < 2 {
        return Err(Error::InvalidInput("peak separation must be at least 2 samples".into()));
    }
    if buffer.len() <= 2 * min_gap {
        return Err(Error::InvalidInput(format!(
            "buffer of {} samples is too short for peak separation {min_gap}",
            buffer.len()
        )));
    }
    let mag: Vec<f64> = buffer.samples.iter().map(|s| s.abs()).collect();
    let mut candidates: Vec<usize> = (1..mag.len() - 1)
        .filter(|&i| mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
        .collect();
    candidates.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));

    let mut kept = BTreeSet::new();
    for i in candidates {
        let lo = i.saturating_sub(min_gap - 1);
        if kept.range(lo..i + min_gap).next().is_none() {
            kept.insert(i);
        }
    }
    if kept.len() < 2 {
        return Err(Error::DegenerateEnvelope);
    }

    let dt = buffer.dt();
    let times = kept.iter().map(|&i| i as f64 * dt).collect();
    let values = kept.iter().map(|&i| mag[i]).collect();
    EnvelopeCurve::from_knots(
        times,
        values,
        (0.0, (buffer.len() - 1) as f64 * dt),
        f64::from(buffer.sample_rate),
    )
}

/// Sign of the envelope slope over a piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Flat,
}

/// Maximal interval on which the slope keeps one sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonePiece {
    pub start: f64,
    pub end: f64,
    pub direction: Direction,
}

/// Splits the envelope into maximal monotone pieces.
///
/// Slope sign changes are located exactly from the quadratic derivative of
/// each spline segment. Flat stretches join the piece before them.
pub fn monotonic_pieces(gamma: &EnvelopeCurve) -> Vec<MonotonePiece> {
    let (lo, hi) = (gamma.start, gamma.end);
    let spline = &gamma.spline;
    let scale = gamma.knot_values().iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let slope_eps = 1e-12 * scale / (hi - lo);

    let mut cuts: Vec<f64> = vec![lo];
    let (klo, khi) = spline.domain();
    for i in 0..spline.segment_count() {
        let x0 = spline.knots()[i];
        let x1 = spline.knots()[i + 1];
        if x1 <= lo || x0 >= hi {
            continue;
        }
        let [_, c1, c2, c3] = spline.segment(i);
        for u in quadratic_roots(3.0 * c3, 2.0 * c2, c1) {
            let t = x0 + u;
            if t > x0 && t < x1 && t > lo && t < hi {
                cuts.push(t);
            }
        }
        for t in [x0, x1] {
            if t > lo && t < hi {
                cuts.push(t);
            }
        }
        // Where the spline dips below zero the clamped envelope is flat, so
        // its zero crossings are cuts too. Between consecutive critical
        // points the cubic is monotone and a sign change brackets one root.
        let mut marks: Vec<f64> = quadratic_roots(3.0 * c3, 2.0 * c2, c1)
            .into_iter()
            .map(|u| x0 + u)
            .filter(|&t| t > x0 && t < x1)
            .collect();
        marks.push(x0);
        marks.push(x1);
        marks.sort_by(f64::total_cmp);
        for w in marks.windows(2) {
            if let Some(t) = bisect_root(|t| spline.eval(t), w[0], w[1]) {
                if t > lo && t < hi {
                    cuts.push(t);
                }
            }
        }
    }
    for t in [klo, khi] {
        if t > lo && t < hi {
            cuts.push(t);
        }
    }
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut pieces: Vec<MonotonePiece> = Vec::new();
    let mut current: Option<MonotonePiece> = None;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let slope = gamma.derivative(mid);
        let dir = if slope > slope_eps {
            Direction::Up
        } else if slope < -slope_eps {
            Direction::Down
        } else {
            Direction::Flat
        };
        match current.as_mut() {
            None => {
                current = Some(MonotonePiece {
                    start: w[0],
                    end: w[1],
                    direction: dir,
                })
            }
            Some(piece) => {
                if dir == Direction::Flat || dir == piece.direction {
                    piece.end = w[1];
                } else if piece.direction == Direction::Flat {
                    piece.direction = dir;
                    piece.end = w[1];
                } else {
                    pieces.push(*piece);
                    current = Some(MonotonePiece {
                        start: w[0],
                        end: w[1],
                        direction: dir,
                    });
                }
            }
        }
    }
    pieces.extend(current);
    pieces
}

/// Root of a monotone `f` on `[lo, hi]` when its endpoint values differ in sign.
fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0 || f_lo > 0.0 && f_hi < 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Real roots of `a u^2 + b u + c`.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Phase of a note over one border interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Delay,
    Attack,
    Hold,
    Decay,
    Sustain,
    Release,
}

/// Border times, one label per interval, and interior breaking points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub borders: Vec<f64>,
    pub labels: Vec<SegmentKind>,
    pub breaking_points: Vec<Vec<f64>>,
}

impl SegmentPlan {
    /// Plan without breaking points.
    pub fn new(borders: Vec<f64>, labels: Vec<SegmentKind>) -> Result<Self> {
        let breaking_points = vec![Vec::new(); labels.len()];
        Self::with_breaking_points(borders, labels, breaking_points)
    }

    pub fn with_breaking_points(
        borders: Vec<f64>,
        labels: Vec<SegmentKind>,
        breaking_points: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let plan = Self {
            borders,
            labels,
            breaking_points,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.borders.len() < 2 || self.labels.len() + 1 != self.borders.len() {
            return Err(Error::InvalidInput(
                "a plan needs one label per interval between at least two borders".into(),
            ));
        }
        if self.breaking_points.len() != self.labels.len() {
            return Err(Error::InvalidInput("one breaking-point list per interval expected".into()));
        }
        if self.borders.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("borders must be strictly increasing".into()));
        }
        for (j, points) in self.breaking_points.iter().enumerate() {
            let (lo, hi) = (self.borders[j], self.borders[j + 1]);
            let mut prev = lo;
            for &t in points {
                if !(t > prev && t < hi) {
                    return Err(Error::InvalidInput(format!(
                        "breaking point {t} is not strictly inside ({lo}, {hi}) in increasing order"
                    )));
                }
                prev = t;
            }
        }
        Ok(())
    }

    pub fn interval_count(&self) -> usize {
        self.labels.len()
    }

    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.borders[j], self.borders[j + 1])
    }

    pub fn duration(&self) -> f64 {
        self.borders[self.borders.len() - 1] - self.borders[0]
    }

    /// Intervals carrying `kind`.
    pub fn intervals_of(&self, kind: SegmentKind) -> impl Iterator<Item = usize> + '_ {
        (0..self.labels.len()).filter(move |&j| self.labels[j] == kind)
    }
}

/// Tunables of [`segment_envelope`].
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    /// Level below which the opening stretch counts as delay.
    pub threshold: f64,
    /// Fraction of the attack's steepest slope below which a stretch is steady.
    pub steady_slope_ratio: f64,
    /// Pieces changing the level by less than this fraction of the peak are
    /// absorbed by their neighbours.
    pub ripple_fraction: f64,
    /// Shortest delay or steady stretch that is kept as its own interval, in seconds.
    pub min_duration: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            threshold: crate::constants::HEARING_THRESHOLD,
            steady_slope_ratio: 0.1,
            ripple_fraction: 0.01,
            min_duration: 0.02,
        }
    }
}

/// Segments the envelope with the default configuration and the given threshold.
pub fn segment_envelope(gamma: &EnvelopeCurve, threshold: f64) -> Result<SegmentPlan> {
    segment_envelope_with(
        gamma,
        &SegmentationConfig {
            threshold,
            ..SegmentationConfig::default()
        },
    )
}

/// Labels delay, attack, decay, sustain (or hold) and release intervals.
///
/// The delay ends at the lowest point of the envelope before it first
/// reaches the threshold; everything before that point is inaudible.
pub fn segment_envelope_with(gamma: &EnvelopeCurve, config: &SegmentationConfig) -> Result<SegmentPlan> {
    let (t0, t_end) = (gamma.start(), gamma.end());
    let onset = gamma
        .inverse(config.threshold, t0, t_end)
        .ok_or(Error::SilentSignal {
            threshold: config.threshold,
        })?;
    // The attack starts from the quietest point before the threshold is
    // reached, so it covers the whole rise rather than only its audible part.
    let step = 1.0 / gamma.sample_rate();
    let rise_start = gamma
        .grid(t0, onset, step)
        .fold((t0, f64::INFINITY), |best, t| {
            let v = gamma.eval(t);
            if v <= best.1 {
                (t, v)
            } else {
                best
            }
        })
        .0;
    let has_delay = rise_start - t0 >= config.min_duration.min(0.25 * (t_end - t0));
    let body_start = if has_delay { rise_start } else { t0 };

    let pieces = merge_ripples(gamma, clip_pieces(&monotonic_pieces(gamma), body_start), config);

    let mut segments: Vec<(f64, f64, SegmentKind)> = Vec::new();
    if has_delay {
        segments.push((t0, rise_start, SegmentKind::Delay));
    }

    let attack = pieces.first().filter(|p| p.direction == Direction::Up).copied();
    let reference_slope = match attack {
        Some(p) => gamma.max_abs_slope(p.start, p.end),
        None => gamma.max_abs_slope(body_start, t_end),
    };
    let steady = config.steady_slope_ratio * reference_slope;
    let ends_quiet = gamma.eval(t_end) < config.threshold;

    for (k, piece) in pieces.iter().enumerate() {
        let is_last = k + 1 == pieces.len();
        let is_attack = k == 0 && attack.is_some();
        let fast_kind = match (is_attack, piece.direction) {
            (true, _) => SegmentKind::Attack,
            (false, Direction::Down) if is_last && ends_quiet => SegmentKind::Release,
            (false, Direction::Down) => SegmentKind::Decay,
            (false, _) => SegmentKind::Attack,
        };
        let slow_kind = if is_last && ends_quiet && piece.direction == Direction::Down {
            SegmentKind::Release
        } else if gamma.max_abs_slope(piece.start, piece.end) <= 1e-12 * gamma.peak().max(1e-300) {
            SegmentKind::Hold
        } else {
            SegmentKind::Sustain
        };

        let split = steady_tail_start(gamma, piece, steady, config.min_duration);
        match split {
            Some(ts) if ts <= piece.start => segments.push((piece.start, piece.end, slow_kind)),
            Some(ts) => {
                segments.push((piece.start, ts, fast_kind));
                segments.push((ts, piece.end, slow_kind));
            }
            None => segments.push((piece.start, piece.end, fast_kind)),
        }
    }

    // Merge neighbours that ended up with the same label.
    let mut merged: Vec<(f64, f64, SegmentKind)> = Vec::new();
    for seg in segments {
        match merged.last_mut() {
            Some(last) if last.2 == seg.2 => last.1 = seg.1,
            _ => merged.push(seg),
        }
    }

    let mut borders: Vec<f64> = merged.iter().map(|s| s.0).collect();
    borders.push(t_end);
    SegmentPlan::new(borders, merged.into_iter().map(|s| s.2).collect())
}

/// Drops everything before `from`, trimming the piece that straddles it.
fn clip_pieces(pieces: &[MonotonePiece], from: f64) -> Vec<MonotonePiece> {
    pieces
        .iter()
        .filter(|p| p.end > from)
        .map(|p| MonotonePiece {
            start: p.start.max(from),
            ..*p
        })
        .collect()
}

/// Absorbs pieces whose level change is negligible.
fn merge_ripples(
    gamma: &EnvelopeCurve,
    pieces: Vec<MonotonePiece>,
    config: &SegmentationConfig,
) -> Vec<MonotonePiece> {
    let min_change = config.ripple_fraction * gamma.peak();
    let mut out: Vec<MonotonePiece> = Vec::new();
    for piece in pieces {
        let change = (gamma.eval(piece.end) - gamma.eval(piece.start)).abs();
        match out.last_mut() {
            Some(last) if change < min_change || last.direction == piece.direction => {
                last.end = piece.end;
            }
            _ => out.push(piece),
        }
    }
    // A leading ripple is folded into what follows it.
    if out.len() > 1 {
        let first = out[0];
        if (gamma.eval(first.end) - gamma.eval(first.start)).abs() < min_change {
            out.remove(0);
            out[0].start = first.start;
        }
    }
    // Re-join pieces that became adjacent with the same direction.
    let mut joined: Vec<MonotonePiece> = Vec::new();
    for piece in out {
        match joined.last_mut() {
            Some(last) if last.direction == piece.direction => last.end = piece.end,
            _ => joined.push(piece),
        }
    }
    joined
}

/// Start of the trailing stretch of `piece` whose slope stays below `steady`,
/// if that stretch lasts at least `min_duration`.
fn steady_tail_start(
    gamma: &EnvelopeCurve,
    piece: &MonotonePiece,
    steady: f64,
    min_duration: f64,
) -> Option<f64> {
    let grid: Vec<f64> = gamma.grid(piece.start, piece.end, SLOPE_GRID).collect();
    let last_fast = grid.iter().rposition(|&t| gamma.derivative(t).abs() >= steady);
    let start = match last_fast {
        None => piece.start,
        Some(k) if k + 1 < grid.len() => grid[k + 1],
        Some(_) => return None,
    };
    (piece.end - start >= min_duration.min(piece.end - piece.start)).then_some(start)
}
