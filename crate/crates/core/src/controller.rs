//! Fitting the amplitude equation to an envelope with a piecewise-constant `mu`.

use serde::{Deserialize, Serialize};

use crate::constants::{FIT_TOLERANCE, HEARING_THRESHOLD};
use crate::dynamics::{integrate_constant, AmplitudeParams};
use crate::envelope::{EnvelopeCurve, SegmentKind, SegmentPlan};
use crate::error::{Error, Result};
pub use crate::schedule::{MuSchedule, MuStep};
use crate::spectral::SpectralVector;

/// Fitted oscillator system for one note.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerModel {
    pub spectral: SpectralVector,
    pub params: AmplitudeParams,
    pub schedule: MuSchedule,
    pub plan: SegmentPlan,
    /// Initial value of the scalar amplitude.
    pub rho0: f64,
    /// Initial Cartesian state, one entry per oscillator.
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

impl ControllerModel {
    /// Builds a model whose initial state lies on the leaf of `spectral`:
    /// `x0[i] = (d_i / d_1) * rho0 / rho_sum` and `y0 = 0`.
    pub fn assemble(
        spectral: SpectralVector,
        params: AmplitudeParams,
        schedule: MuSchedule,
        plan: SegmentPlan,
        rho0: f64,
    ) -> Self {
        let first = rho0 / spectral.rho_sum;
        let x0 = (0..=spectral.n).map(|i| spectral.ratio(i) * first).collect();
        let y0 = vec![0.0; spectral.n + 1];
        Self {
            spectral,
            params,
            schedule,
            plan,
            rho0,
            x0,
            y0,
        }
    }

    pub fn n(&self) -> usize {
        self.spectral.n
    }

    /// Time of the last border.
    pub fn duration(&self) -> f64 {
        self.plan.borders[self.plan.borders.len() - 1]
    }

    /// Checks cross-field consistency, e.g. after loading from disk.
    pub fn validate(&self) -> Result<()> {
        self.spectral.validate()?;
        self.plan.validate()?;
        let count = self.spectral.n + 1;
        if self.x0.len() != count || self.y0.len() != count {
            return Err(Error::InvalidInput(format!(
                "initial state must have {count} entries per coordinate"
            )));
        }
        let p = self.params;
        if ![p.a, p.b, p.alpha, self.rho0].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("model constants must be finite".into()));
        }
        Ok(())
    }
}

/// `(alpha, a, b) = (1, -1, 0)`, used when the sustain has a single steady level.
pub fn default_constants() -> AmplitudeParams {
    AmplitudeParams::new(-1.0, 0.0, 1.0)
}

/// Bounds on the delay-interval parameter and initial amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBounds {
    /// `mu0` must not exceed this.
    pub mu0_max: f64,
    /// `rho(0)` must not exceed this.
    pub rho0_max: f64,
}

/// Delay bounds that keep the origin attracting and the start amplitude small.
pub fn delay_init(b: f64) -> DelayBounds {
    if b == 0.0 {
        DelayBounds {
            mu0_max: -1.0,
            rho0_max: 0.01,
        }
    } else {
        DelayBounds {
            mu0_max: -(1.0 / (4.0 * b)).abs(),
            rho0_max: 0.01f64.min((2.0 * b).abs().powf(-0.5)),
        }
    }
}

/// `mu` for which the amplitude equation at `rho` has slope `target_slope`.
pub fn tune_mu(rho: f64, target_slope: f64, params: &AmplitudeParams) -> Result<f64> {
    if rho == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    if params.alpha == 0.0 {
        return Err(Error::InvalidInput("alpha must be nonzero to match a slope".into()));
    }
    let sq = rho * rho;
    Ok(target_slope / (params.alpha * rho) - params.a * sq - params.b * sq * sq)
}

/// Right-sided slope of the envelope at `t`, looking no further than `limit`.
///
/// Uses the three-point one-sided difference of `ln(gamma)` scaled by
/// `gamma(t)`, which is exact for exponential growth and decay. The step is
/// `window` or a quarter of the remaining interval, whichever is shorter,
/// rounded to whole samples.
pub fn onset_slope(gamma: &EnvelopeCurve, t: f64, limit: f64, window: f64) -> f64 {
    let dt = 1.0 / gamma.sample_rate();
    let span = window.min(0.25 * (limit - t)).max(dt);
    let h = (span / dt).floor().max(1.0) * dt;
    let (g0, g1, g2) = (gamma.eval(t), gamma.eval(t + h), gamma.eval(t + 2.0 * h));
    const FLOOR: f64 = 1e-12;
    if g0 > FLOOR && g1 > FLOOR && g2 > FLOOR {
        g0 * (-3.0 * g0.ln() + 4.0 * g1.ln() - g2.ln()) / (2.0 * h)
    } else {
        (-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * h)
    }
}

/// Constants fitted to a sustain that moves between two steady levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SustainFit {
    pub params: AmplitudeParams,
    /// `mu` on the sustain interval.
    pub mu: f64,
    /// Unstable and stable steady levels the sustain moves between.
    pub levels: (f64, f64),
    /// Envelope level and time at which the slopes were matched for `alpha`.
    pub match_level: f64,
    pub match_time: f64,
}

/// Fits `(a, b, mu, alpha)` so that the sustain's start (offset by `epsilon`)
/// and end are the two positive equilibria, and the slopes agree halfway.
pub fn fit_sustain_constants(
    gamma: &EnvelopeCurve,
    interval: (f64, f64),
    epsilon: f64,
) -> Result<SustainFit> {
    let (ts, te) = interval;
    if !(epsilon > 0.0 && epsilon <= 0.05) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} outside (0, 0.05]")));
    }
    let (start, end) = (gamma.eval(ts), gamma.eval(te));
    let a = if end > start { 1.0 } else { -1.0 };
    // The unstable level sits just beyond the start, away from the end.
    let s1 = start - a * epsilon;
    let s2 = end;
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(Error::InfeasibleFit(format!(
            "steady levels {s1} and {s2} must be positive"
        )));
    }

    let (mu, b) = solve_steady_levels(a, s1, s2)?;

    let level = 0.5 * (s1 + s2);
    let match_time = gamma.inverse(level, ts, te).ok_or_else(|| {
        Error::InfeasibleFit(format!("envelope never reaches {level} on [{ts}, {te}]"))
    })?;
    let shape = AmplitudeParams::new(a, b, 1.0);
    let unit_rate = shape.rate(mu, level);
    let alpha = gamma.derivative(match_time) / unit_rate;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InfeasibleFit(format!("slope matching gives alpha = {alpha}")));
    }
    Ok(SustainFit {
        params: AmplitudeParams::new(a, b, alpha),
        mu,
        levels: (s1, s2),
        match_level: level,
        match_time,
    })
}

/// `(mu, b)` making `s1` and `s2` both roots of `mu + a s^2 + b s^4`.
pub fn solve_steady_levels(a: f64, s1: f64, s2: f64) -> Result<(f64, f64)> {
    let (q1, q2) = (s1.powi(4), s2.powi(4));
    let det = q2 - q1;
    if det.abs() <= 1e-12 * q1.max(q2) {
        return Err(Error::SingularSustain { level: s2 });
    }
    let (r1, r2) = (-a * s1 * s1, -a * s2 * s2);
    let mu = (r1 * q2 - r2 * q1) / det;
    let b = (r2 - r1) / det;
    if a * b >= 0.0 {
        return Err(Error::InfeasibleFit(format!("a = {a} and b = {b} have the same sign")));
    }
    Ok((mu, b))
}

/// Whether the envelope moves between two distinct plateaus on `interval`:
/// the level changes audibly and the slope near both ends is small compared
/// with the steepest slope in the middle.
///
/// The ends are excluded from the peak so a kink at a border (where `mu`
/// switches) does not count as the transition.
pub fn has_two_steady_states(gamma: &EnvelopeCurve, interval: (f64, f64)) -> bool {
    let (ts, te) = interval;
    if (gamma.eval(te) - gamma.eval(ts)).abs() < HEARING_THRESHOLD {
        return false;
    }
    let len = te - ts;
    let edge = 0.1 * len;
    let mean_slope = |lo: f64, hi: f64| {
        let pts: Vec<f64> = gamma.grid(lo, hi, len / 1000.0).collect();
        pts.iter().map(|&t| gamma.derivative(t).abs()).sum::<f64>() / pts.len() as f64
    };
    let peak = gamma.max_abs_slope(ts + edge, te - edge);
    peak > 0.0 && mean_slope(ts, ts + edge).max(mean_slope(te - edge, te)) <= peak / 3.0
}

/// How the fitter chooses the model constants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SustainMode {
    /// Decide from the envelope shape.
    #[default]
    Auto,
    /// Always use the default constants.
    Single,
    /// Always fit constants on the first sustain interval.
    TwoSteadyStates,
}

/// Tunables of [`build_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Offset of the unstable sustain level from the envelope.
    pub epsilon: f64,
    /// Largest tracking error accepted on a subinterval.
    pub tolerance: f64,
    pub max_breaking_points: usize,
    /// Longest step used by [`onset_slope`], in seconds.
    pub slope_window: f64,
    pub sustain: SustainMode,
    /// Overrides the rule-based initial amplitude.
    pub rho0: Option<f64>,
    /// Overrides the rule-based delay parameter.
    pub mu0: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.03,
            tolerance: FIT_TOLERANCE,
            max_breaking_points: 64,
            slope_window: 0.5e-3,
            sustain: SustainMode::Auto,
            rho0: None,
            mu0: None,
        }
    }
}

/// Breaking points and parameters found on one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub breaking_points: Vec<f64>,
    /// One value per subinterval.
    pub mus: Vec<f64>,
    /// Amplitude at the interval's right end.
    pub end_rho: f64,
    /// Largest `|rho - gamma|` on the interval's sample grid.
    pub max_error: f64,
}

/// Sample grid of the envelope.
struct Grid<'a> {
    gamma: &'a EnvelopeCurve,
    dt: f64,
}

impl<'a> Grid<'a> {
    fn new(gamma: &'a EnvelopeCurve) -> Self {
        Self {
            gamma,
            dt: 1.0 / gamma.sample_rate(),
        }
    }

    fn index(&self, t: f64) -> usize {
        (t / self.dt).round().max(0.0) as usize
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Simulates from sample `from` to `to` at constant `mu`; returns the
    /// trajectory and its running maximum tracking error.
    fn run(
        &self,
        rho: f64,
        mu: f64,
        params: &AmplitudeParams,
        from: usize,
        to: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let path = integrate_constant(rho, mu, params, to - from, self.dt, self.time(from))?;
        let mut worst = 0.0f64;
        let running = path
            .iter()
            .enumerate()
            .map(|(k, r)| {
                worst = worst.max((r - self.gamma.eval(self.time(from + k))).abs());
                worst
            })
            .collect();
        Ok((path, running))
    }

    /// Amplitude at sample `to` when starting from `rho` at sample `from`, or
    /// `None` when the run escapes.
    fn reach(&self, rho: f64, mu: f64, params: &AmplitudeParams, from: usize, to: usize) -> Option<f64> {
        integrate_constant(rho, mu, params, to - from, self.dt, self.time(from))
            .ok()
            .and_then(|p| p.last().copied())
    }

    /// Constant `mu` that carries `rho` from sample `from` onto the envelope
    /// at sample `to`, with the end amplitude and the tracking error. `None`
    /// if the envelope level is unreachable or the error leaves tolerance.
    fn recover(
        &self,
        rho: f64,
        from: usize,
        to: usize,
        params: &AmplitudeParams,
        tolerance: f64,
    ) -> Option<(usize, f64, f64, f64)> {
        const MAX_EXPANSIONS: usize = 64;
        const MAX_BISECTIONS: usize = 100;
        let target = self.gamma.eval(self.time(to));
        if to <= from || !(target > 0.0) || rho <= 0.0 {
            return None;
        }
        // The end amplitude grows with `alpha * mu`; an escape counts as overshoot.
        let sign = params.alpha.signum();
        let excess = |mu: f64| {
            self.reach(rho, mu, params, from, to)
                .map_or(f64::INFINITY, |r| sign * (r - target))
        };

        let slope = (target - rho) / (self.time(to) - self.time(from));
        let guess = tune_mu(rho, slope, params).ok()?;
        let (mut lo, mut hi) = (guess, guess);
        let mut width_mu = guess.abs().max(1.0);
        let mut expansions = 0;
        while excess(lo) > 0.0 {
            lo -= sign * width_mu;
            width_mu *= 2.0;
            expansions += 1;
            if expansions > MAX_EXPANSIONS {
                return None;
            }
        }
        while excess(hi) < 0.0 {
            hi += sign * width_mu;
            width_mu *= 2.0;
            expansions += 1;
            if expansions > MAX_EXPANSIONS {
                return None;
            }
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if (hi - lo).abs() <= 1e-10 * mid.abs().max(1.0) {
                break;
            }
            if excess(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        let (path, running) = self.run(rho, mu, params, from, to).ok()?;
        let last = to - from;
        (running[last] < tolerance).then(|| (to, mu, path[last], running[last]))
    }
}

/// Splits `interval` at breaking points until each subinterval, driven by the
/// slope-matched `mu` of its left end, tracks the envelope within tolerance.
///
/// Candidate points are the envelope levels `(gamma(prev) + gamma(end)) / 2^m`
/// lying strictly between the two ends, tried from the farthest one inward.
/// If none qualifies, the cut goes to the latest point where the trajectory
/// crosses the envelope. Failing that, the subinterval ends at the last
/// sample still within tolerance (or a halving of it, down to one slope
/// window) and uses the `mu` that lands the trajectory back on the envelope
/// there. As a last resort the cut is the last sample within tolerance.
pub fn refine_breaking_points(
    gamma: &EnvelopeCurve,
    interval: (f64, f64),
    params: &AmplitudeParams,
    rho_start: f64,
    config: &FitConfig,
) -> Result<Refinement> {
    let grid = Grid::new(gamma);
    let (start, end) = (grid.index(interval.0), grid.index(interval.1));
    let failure = || Error::RefinementFailed {
        start: interval.0,
        end: interval.1,
        cap: config.max_breaking_points,
    };
    if end <= start {
        return Err(Error::InvalidInput(format!(
            "interval [{}, {}] is shorter than one sample",
            interval.0, interval.1
        )));
    }

    let t_end = grid.time(end);
    let mut out = Refinement {
        breaking_points: Vec::new(),
        mus: Vec::new(),
        end_rho: rho_start,
        max_error: 0.0,
    };
    let mut prev = start;
    let mut rho = rho_start;
    loop {
        let t_prev = grid.time(prev);
        let slope = onset_slope(gamma, t_prev, t_end, config.slope_window);
        let mu = tune_mu(rho, slope, params)?;
        let (path, running) = grid.run(rho, mu, params, prev, end)?;
        let span = end - prev;
        log::debug!(
            "refine from t = {t_prev}: rho = {rho}, slope = {slope}, mu = {mu}, error at end = {}",
            running[span]
        );

        if running[span] < config.tolerance {
            out.mus.push(mu);
            out.end_rho = path[span];
            out.max_error = out.max_error.max(running[span]);
            return Ok(out);
        }
        if out.breaking_points.len() >= config.max_breaking_points {
            return Err(failure());
        }

        let first_bad = running
            .iter()
            .position(|&e| e >= config.tolerance)
            .unwrap_or(span);
        let gap = |k: usize| path[k] - gamma.eval(grid.time(prev + k));
        let planned = level_candidates(gamma, t_prev, t_end)
            .into_iter()
            .map(|t| grid.index(t))
            .find(|&k| k > prev && k < end && running[k - prev] < config.tolerance)
            .or_else(|| {
                (2..first_bad)
                    .rev()
                    .find(|&k| gap(k - 1) * gap(k) <= 0.0)
                    .map(|k| prev + k)
            });
        let step = match planned {
            Some(cut) => Some((cut, mu, path[cut - prev], running[cut - prev])),
            None => {
                let shortest = ((config.slope_window / grid.dt).round() as usize).max(2);
                std::iter::successors(Some(first_bad.saturating_sub(1)), |w| Some(w / 2))
                    .take_while(|&w| w >= shortest)
                    .find_map(|w| grid.recover(rho, prev, prev + w, params, config.tolerance))
            }
        }
        .or_else(|| {
            (first_bad > 1).then(|| {
                let k = first_bad - 1;
                (prev + k, mu, path[k], running[k])
            })
        });
        let (cut, mu, rho_cut, error) = step.ok_or_else(failure)?;

        out.breaking_points.push(grid.time(cut));
        out.mus.push(mu);
        out.max_error = out.max_error.max(error);
        rho = rho_cut;
        prev = cut;
    }
}

/// Times where the envelope reaches `(gamma(lo) + gamma(hi)) / 2^m`, ordered
/// from the farthest from `lo` to the nearest.
fn level_candidates(gamma: &EnvelopeCurve, lo: f64, hi: f64) -> Vec<f64> {
    const MAX_HALVINGS: i32 = 30;
    let (g_lo, g_hi) = (gamma.eval(lo), gamma.eval(hi));
    let (below, above) = (g_lo.min(g_hi), g_lo.max(g_hi));
    let mut times: Vec<f64> = (0..=MAX_HALVINGS)
        .map(|m| (g_lo + g_hi) / 2f64.powi(m))
        .filter(|&level| level > below && level < above)
        .filter_map(|level| gamma.inverse(level, lo, hi))
        .collect();
    times.sort_by(|a, b| b.total_cmp(a));
    times.dedup();
    times
}

/// Per-interval outcome of [`build_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalFit {
    pub label: SegmentKind,
    pub start: f64,
    pub end: f64,
    pub breaking_points: Vec<f64>,
    pub mus: Vec<f64>,
    pub max_error: f64,
}

/// Diagnostics accompanying a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub intervals: Vec<IntervalFit>,
    pub sustain_fit: Option<SustainFit>,
    /// Largest `|rho - gamma|` over the whole note.
    pub max_error: f64,
}

impl FitReport {
    /// `mu` values in schedule order.
    pub fn segment_mus(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|i| i.mus.iter().copied()).collect()
    }
}

/// Fits constants, schedule and initial state so the scalar amplitude tracks
/// the envelope over the plan.
///
/// Intervals that already carry breaking points keep them; the others are
/// refined. The sustain interval of a two-level note uses its fitted `mu`
/// and a leading delay uses the delay rule.
pub fn build_model(
    spectral: &SpectralVector,
    gamma: &EnvelopeCurve,
    plan: &SegmentPlan,
    config: &FitConfig,
) -> Result<(ControllerModel, FitReport)> {
    plan.validate()?;
    if plan.borders[0] != 0.0 {
        return Err(Error::InvalidInput("the plan must start at t = 0".into()));
    }
    let grid = Grid::new(gamma);

    let sustain = plan.intervals_of(SegmentKind::Sustain).next();
    let two_levels = match (config.sustain, sustain) {
        (SustainMode::Single, _) | (_, None) => false,
        (SustainMode::TwoSteadyStates, Some(_)) => true,
        (SustainMode::Auto, Some(j)) => has_two_steady_states(gamma, plan.interval(j)),
    };
    let sustain_fit = match (two_levels, sustain) {
        (true, Some(j)) => Some(fit_sustain_constants(gamma, plan.interval(j), config.epsilon)?),
        _ => None,
    };
    let params = sustain_fit.map_or_else(default_constants, |f| f.params);

    let starts_with_delay = plan.labels[0] == SegmentKind::Delay;
    let bounds = delay_init(params.b);
    let rho0 = config.rho0.unwrap_or_else(|| {
        let start = gamma.eval(plan.borders[0]).max(1e-3);
        if starts_with_delay {
            start.min(bounds.rho0_max)
        } else {
            start
        }
    });
    if !(rho0 > 0.0) {
        return Err(Error::InfeasibleFit(format!("initial amplitude {rho0} must be positive")));
    }

    let mut rho = rho0;
    let mut intervals = Vec::with_capacity(plan.interval_count());
    let mut steps = Vec::new();
    for j in 0..plan.interval_count() {
        let (lo, hi) = plan.interval(j);
        let label = plan.labels[j];
        let (lo_k, hi_k) = (grid.index(lo), grid.index(hi));
        if hi_k <= lo_k {
            return Err(Error::InvalidInput(format!(
                "interval [{lo}, {hi}] is shorter than one sample"
            )));
        }

        let fixed_mu = if j == 0 && starts_with_delay {
            Some(config.mu0.unwrap_or_else(|| delay_mu(gamma, plan, rho0, &params, config, bounds)))
        } else {
            sustain_fit.filter(|_| Some(j) == sustain).map(|f| f.mu)
        };

        let fit = match fixed_mu {
            Some(mu) => {
                let (path, running) = grid.run(rho, mu, &params, lo_k, hi_k)?;
                Refinement {
                    breaking_points: Vec::new(),
                    mus: vec![mu],
                    end_rho: path[hi_k - lo_k],
                    max_error: running[hi_k - lo_k],
                }
            }
            None if !plan.breaking_points[j].is_empty() => {
                fit_given_points(gamma, &grid, (lo, hi), &plan.breaking_points[j], &params, rho, config)?
            }
            None => refine_breaking_points(gamma, (lo, hi), &params, rho, config)?,
        };

        let mut switch_times = vec![grid.time(lo_k)];
        switch_times.extend(fit.breaking_points.iter().copied());
        for (&t, &mu) in switch_times.iter().zip(&fit.mus) {
            steps.push(MuStep { t, mu });
        }
        rho = fit.end_rho;
        intervals.push(IntervalFit {
            label,
            start: lo,
            end: hi,
            breaking_points: fit.breaking_points,
            mus: fit.mus,
            max_error: fit.max_error,
        });
    }

    let schedule = MuSchedule::new(steps)?;
    let fitted_plan = SegmentPlan::with_breaking_points(
        plan.borders.clone(),
        plan.labels.clone(),
        intervals.iter().map(|i| i.breaking_points.clone()).collect(),
    )?;
    let report = FitReport {
        max_error: intervals.iter().map(|i| i.max_error).fold(0.0, f64::max),
        intervals,
        sustain_fit,
    };
    let model = ControllerModel::assemble(spectral.clone(), params, schedule, fitted_plan, rho0);
    Ok((model, report))
}

/// Delay parameter: the slope-matched value at the note start when it keeps
/// the origin attracting and is within ten times the bound, else the bound.
fn delay_mu(
    gamma: &EnvelopeCurve,
    plan: &SegmentPlan,
    rho0: f64,
    params: &AmplitudeParams,
    config: &FitConfig,
    bounds: DelayBounds,
) -> f64 {
    let (lo, hi) = plan.interval(0);
    let slope = onset_slope(gamma, lo, hi, config.slope_window);
    match tune_mu(rho0, slope, params) {
        Ok(mu) if mu < 0.0 && mu >= 10.0 * bounds.mu0_max => mu,
        _ => bounds.mu0_max,
    }
}

/// Slope-matched `mu` on each subinterval delimited by known breaking points.
fn fit_given_points(
    gamma: &EnvelopeCurve,
    grid: &Grid,
    interval: (f64, f64),
    points: &[f64],
    params: &AmplitudeParams,
    rho_start: f64,
    config: &FitConfig,
) -> Result<Refinement> {
    let mut cuts: Vec<usize> = vec![grid.index(interval.0)];
    cuts.extend(points.iter().map(|&t| grid.index(t)));
    cuts.push(grid.index(interval.1));
    if cuts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!(
            "breaking points in [{}, {}] are closer than one sample",
            interval.0, interval.1
        )));
    }
    let mut out = Refinement {
        breaking_points: cuts[1..cuts.len() - 1].iter().map(|&k| grid.time(k)).collect(),
        mus: Vec::new(),
        end_rho: rho_start,
        max_error: 0.0,
    };
    let mut rho = rho_start;
    for w in cuts.windows(2) {
        let slope = onset_slope(gamma, grid.time(w[0]), grid.time(w[1]), config.slope_window);
        let mu = tune_mu(rho, slope, params)?;
        let (path, running) = grid.run(rho, mu, params, w[0], w[1])?;
        rho = path[w[1] - w[0]];
        out.mus.push(mu);
        out.max_error = out.max_error.max(running[w[1] - w[0]]);
    }
    out.end_rho = rho;
    Ok(out)
}
