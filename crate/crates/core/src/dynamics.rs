//! Integration of the amplitude equation and of the full oscillator system.

use serde::{Deserialize, Serialize};

use crate::constants::BLOW_UP_GUARD;
use crate::controller::ControllerModel;
use crate::error::{Error, Result};
use crate::schedule::{GridSchedule, MuSchedule};
use crate::spectral::SpectralVector;

/// Constants of `rho' = alpha * rho * (mu + a rho^2 + b rho^4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl AmplitudeParams {
    pub fn new(a: f64, b: f64, alpha: f64) -> Self {
        Self { a, b, alpha }
    }

    /// `mu + a rho^2 + b rho^4`.
    pub fn growth(&self, mu: f64, rho: f64) -> f64 {
        let sq = rho * rho;
        mu + sq * (self.a + self.b * sq)
    }

    /// Right-hand side of the amplitude equation.
    pub fn rate(&self, mu: f64, rho: f64) -> f64 {
        self.alpha * rho * self.growth(mu, rho)
    }

    /// One classical fourth-order Runge-Kutta step at fixed `mu`.
    pub fn rk4_step(&self, mu: f64, rho: f64, dt: f64) -> f64 {
        let k1 = self.rate(mu, rho);
        let k2 = self.rate(mu, rho + 0.5 * dt * k1);
        let k3 = self.rate(mu, rho + 0.5 * dt * k2);
        let k4 = self.rate(mu, rho + dt * k3);
        rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }
}

/// Uniformly sampled scalar series starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl ScalarSeries {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Sample nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = ((t / self.dt).round().max(0.0) as usize).min(self.values.len() - 1);
        self.values[k]
    }
}

fn check_bounded(value: f64, time: f64) -> Result<()> {
    if value.is_finite() && value.abs() <= BLOW_UP_GUARD {
        Ok(())
    } else {
        Err(Error::BlowUp { time })
    }
}

/// `steps` RK4 steps at constant `mu`; the result includes the start value.
pub fn integrate_constant(
    rho0: f64,
    mu: f64,
    params: &AmplitudeParams,
    steps: usize,
    dt: f64,
    t_offset: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut rho = rho0;
    out.push(rho);
    for k in 0..steps {
        rho = params.rk4_step(mu, rho, dt);
        check_bounded(rho, t_offset + (k + 1) as f64 * dt)?;
        out.push(rho);
    }
    Ok(out)
}

/// Integrates the amplitude equation over `[0, t_end]` on a grid of spacing `dt`.
///
/// Switch times are snapped to the grid and `mu` is held fixed within each step.
pub fn integrate_scalar(
    rho0: f64,
    schedule: &MuSchedule,
    params: &AmplitudeParams,
    t_end: f64,
    dt: f64,
) -> Result<ScalarSeries> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput("time step and span must be positive".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let mut mu_at = GridSchedule::new(schedule, dt);
    let mut values = Vec::with_capacity(steps + 1);
    let mut rho = rho0;
    check_bounded(rho, 0.0)?;
    values.push(rho);
    for k in 0..steps {
        rho = params.rk4_step(mu_at.at(k), rho, dt);
        check_bounded(rho, (k + 1) as f64 * dt)?;
        values.push(rho);
    }
    Ok(ScalarSeries { dt, values })
}

/// Time at which the cubic (`a = -1`, `b = 0`) solution leaves every bounded set.
///
/// The value may be negative, in which case the escape lies in the past.
pub fn escape_time(r0: f64, mu: f64, alpha: f64) -> Option<f64> {
    let sq = r0 * r0;
    if alpha == 0.0 || sq == 0.0 {
        return None;
    }
    if mu == 0.0 {
        return Some(-1.0 / (2.0 * alpha * sq));
    }
    if sq <= mu {
        return None;
    }
    Some(-(sq / (sq - mu)).ln() / (2.0 * mu * alpha))
}

/// Exact solution of `r' = alpha r (mu - r^2)` with `r(0) = r0`.
pub fn closed_form_cubic(r0: f64, mu: f64, alpha: f64, t: f64) -> Result<f64> {
    let escape = escape_time(r0, mu, alpha);
    if let Some(te) = escape {
        let beyond = (te > 0.0 && t >= te) || (te < 0.0 && t <= te);
        if beyond {
            return Err(Error::Domain {
                time: t,
                escape_time: escape,
            });
        }
    }
    let sq = r0 * r0;
    let magnitude_sq = if mu == 0.0 {
        sq / (1.0 + 2.0 * alpha * sq * t)
    } else {
        let denom = (mu - sq) * (-2.0 * mu * alpha * t).exp() + sq;
        mu * sq / denom
    };
    if !(magnitude_sq >= 0.0) || !magnitude_sq.is_finite() {
        return Err(Error::Domain {
            time: t,
            escape_time: escape,
        });
    }
    Ok(r0.signum() * magnitude_sq.sqrt())
}

/// Cartesian trajectory of all oscillators on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub omega: Vec<f64>,
    pub theta0: Vec<f64>,
    /// `x[i][k]`: oscillator `i` at sample `k`.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn oscillators(&self) -> usize {
        self.x.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Radial amplitude `|(x_i, y_i)|` at sample `k`.
    pub fn radius(&self, i: usize, k: usize) -> f64 {
        self.x[i][k].hypot(self.y[i][k])
    }

    /// Phase of oscillator `i`, affine in time.
    pub fn phase(&self, i: usize, k: usize) -> f64 {
        self.theta0[i] + self.omega[i] * self.time(k)
    }

    /// Radial amplitude series of oscillator `i`.
    pub fn radii(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.radius(i, k)).collect()
    }
}

/// Integrates all `2(n + 1)` coordinates of the oscillator system.
///
/// The rotation is removed by working in the frame that turns with each
/// oscillator's frequency; there the vector field is purely radial and is
/// advanced with RK4, then rotated back with the exact phase `omega_i t`.
pub fn integrate_full(model: &ControllerModel, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput("time step and span must be positive".into()));
    }
    let spectral = &model.spectral;
    let p = model.params;
    let scale_sq = spectral.rho_sum * spectral.rho_sum;
    let count = spectral.n + 1;
    let steps = (t_end / dt).round() as usize;

    // Rotating-frame state; equals the Cartesian state at t = 0.
    let mut u = model.x0.clone();
    let mut v = model.y0.clone();
    let field = |mu: f64, u1: f64, v1: f64| {
        let q = scale_sq * (u1 * u1 + v1 * v1);
        p.alpha * (mu + q * (p.a + p.b * q))
    };

    let mut x = vec![Vec::with_capacity(steps + 1); count];
    let mut y = vec![Vec::with_capacity(steps + 1); count];
    let emit = |x: &mut [Vec<f64>], y: &mut [Vec<f64>], u: &[f64], v: &[f64], t: f64| {
        for i in 0..count {
            let (s, c) = (spectral.omega[i] * t).sin_cos();
            x[i].push(c * u[i] - s * v[i]);
            y[i].push(s * u[i] + c * v[i]);
        }
    };
    emit(&mut x, &mut y, &u, &v, 0.0);

    let mut mu_at = GridSchedule::new(&model.schedule, dt);
    let mut ku = vec![[0.0; 4]; count];
    let mut kv = vec![[0.0; 4]; count];
    for k in 0..steps {
        let mu = mu_at.at(k);
        let mut stage_u = u.clone();
        let mut stage_v = v.clone();
        for stage in 0..4 {
            let f = field(mu, stage_u[1], stage_v[1]);
            for i in 0..count {
                ku[i][stage] = f * stage_u[i];
                kv[i][stage] = f * stage_v[i];
            }
            if stage < 3 {
                let h = if stage == 2 { dt } else { 0.5 * dt };
                for i in 0..count {
                    stage_u[i] = u[i] + h * ku[i][stage];
                    stage_v[i] = v[i] + h * kv[i][stage];
                }
            }
        }
        for i in 0..count {
            let [a, b, c, d] = ku[i];
            u[i] += dt / 6.0 * (a + 2.0 * b + 2.0 * c + d);
            let [a, b, c, d] = kv[i];
            v[i] += dt / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        }
        let t = (k + 1) as f64 * dt;
        check_bounded(u[1].hypot(v[1]) * spectral.rho_sum, t)?;
        emit(&mut x, &mut y, &u, &v, t);
    }

    let theta0 = model
        .x0
        .iter()
        .zip(&model.y0)
        .map(|(&x0, &y0)| y0.atan2(x0))
        .collect();
    Ok(Trajectory {
        dt,
        omega: spectral.omega.clone(),
        theta0,
        x,
        y,
    })
}

/// Signed amplitudes of every partial, `r_i = (d_i / d_1) r_1`, indexed `[i][k]`.
pub fn reconstruct_amplitudes(r1: &[f64], spectral: &SpectralVector) -> Vec<Vec<f64>> {
    (0..=spectral.n)
        .map(|i| {
            let ratio = spectral.ratio(i);
            r1.iter().map(|r| ratio * r).collect()
        })
        .collect()
}

/// Radial growth factor `exp(int_0^t f)` along a computed trajectory.
///
/// Each step uses the `mu` that was in force while integrating it.
pub fn compute_xi(trajectory: &Trajectory, model: &ControllerModel) -> Vec<f64> {
    let p = model.params;
    let scale_sq = model.spectral.rho_sum * model.spectral.rho_sum;
    let field = |mu: f64, k: usize| {
        let q = scale_sq * trajectory.radius(1, k).powi(2);
        p.alpha * (mu + q * (p.a + p.b * q))
    };
    let mut mu_at = GridSchedule::new(&model.schedule, trajectory.dt);
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(trajectory.len());
    out.push(1.0);
    for k in 0..trajectory.len().saturating_sub(1) {
        let mu = mu_at.at(k);
        integral += 0.5 * trajectory.dt * (field(mu, k) + field(mu, k + 1));
        out.push(integral.exp());
    }
    out
}

/// Departure of a trajectory from the leaf fixed by the spectral vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafResidual {
    /// `max |c_j r_i - c_i r_j|` over all pairs and samples.
    pub absolute: f64,
    /// `absolute` over `max |c_i r_j|`.
    pub relative: f64,
}

impl LeafResidual {
    pub const ON_LEAF: f64 = 1e-6;

    pub fn on_leaf(&self) -> bool {
        self.relative < Self::ON_LEAF
    }
}

/// Largest violation of the amplitude ratios `r_i / r_j = |c_i| / |c_j|`.
pub fn leaf_residual(trajectory: &Trajectory, spectral: &SpectralVector) -> LeafResidual {
    let c: Vec<f64> = spectral.d.iter().map(|d| d.abs()).collect();
    let count = c.len().min(trajectory.oscillators());
    let c_max = c.iter().copied().fold(0.0, f64::max);
    let mut absolute: f64 = 0.0;
    let mut r_max: f64 = 0.0;
    let mut r = vec![0.0; count];
    for k in 0..trajectory.len() {
        for (i, slot) in r.iter_mut().enumerate() {
            *slot = trajectory.radius(i, k);
            r_max = r_max.max(*slot);
        }
        for i in 0..count {
            for j in i + 1..count {
                absolute = absolute.max((c[j] * r[i] - c[i] * r[j]).abs());
            }
        }
    }
    let scale = c_max * r_max;
    LeafResidual {
        absolute,
        relative: if scale > 0.0 { absolute / scale } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerModel;
    use crate::envelope::{SegmentKind, SegmentPlan};

    fn cubic() -> AmplitudeParams {
        AmplitudeParams::new(-1.0, 0.0, 1.0)
    }

    fn toy_model(params: AmplitudeParams, schedule: MuSchedule, rho0: f64) -> ControllerModel {
        let spectral = SpectralVector::from_parts(
            vec![0.0, 110.0, 220.0, 330.0],
            vec![-0.2, 1.0, 0.5, 0.25],
        )
        .unwrap();
        let plan = SegmentPlan::new(vec![0.0, 1.0], vec![SegmentKind::Sustain]).unwrap();
        ControllerModel::assemble(spectral, params, schedule, plan, rho0)
    }

    #[test]
    fn logistic_solution_approaches_one() {
        let s = integrate_scalar(0.5, &MuSchedule::constant(1.0), &cubic(), 5.0, 1e-3).unwrap();
        let last = *s.values.last().unwrap();
        assert!((last - 0.99995).abs() < 1e-4, "{last}");
        let exact = closed_form_cubic(0.5, 1.0, 1.0, 5.0).unwrap();
        assert!((last - exact).abs() < 1e-9);
    }

    #[test]
    fn negative_mu_decays_monotonically() {
        let s = integrate_scalar(0.3, &MuSchedule::constant(-0.5), &cubic(), 3.0, 1e-3).unwrap();
        assert!(s.values.windows(2).all(|w| w[1] < w[0]));
        assert!(s.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn blow_up_reports_time() {
        let params = AmplitudeParams::new(1.0, 0.0, 1.0);
        let err = integrate_scalar(1.0, &MuSchedule::constant(0.0), &params, 2.0, 1e-4).unwrap_err();
        match err {
            // Exact escape at t = 1/(2 alpha r0^2) = 0.5.
            Error::BlowUp { time } => assert!((time - 0.5).abs() < 1e-3, "{time}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closed_form_examples() {
        let r = closed_form_cubic(0.5, 1.0, 1.0, 1.0).unwrap();
        let want = (0.25 / (0.75 * (-2f64).exp() + 0.25)).sqrt();
        assert!((r - want).abs() < 1e-15);
        assert!((r - 0.8434).abs() < 1e-4);
        for t in [0.0, 0.3, 10.0] {
            assert!((closed_form_cubic(0.7f64.sqrt(), 0.7, 2.0, t).unwrap() - 0.7f64.sqrt()).abs() < 1e-14);
        }
        let neg = closed_form_cubic(-0.5, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(neg, -r);
        let zero_mu = closed_form_cubic(0.5, 0.0, 1.0, 2.0).unwrap();
        assert!((zero_mu - 0.5 / (1.0 + 2.0 * 0.25 * 2.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn escape_interval_for_negative_alpha() {
        // 0 < mu < r0^2 with alpha < 0: the solution exists until
        // |(alpha / 2 mu) ln(r0^2 / (r0^2 - mu))| and no further.
        let (r0, mu, alpha) = (1.0, 0.25, -1.0);
        let te = escape_time(r0, mu, alpha).unwrap();
        let magnitude = ((alpha / (2.0 * mu)) * (r0 * r0 / (r0 * r0 - mu)).ln()).abs();
        assert!((te - magnitude).abs() < 1e-14);
        assert!(te > 0.0);
        assert!(closed_form_cubic(r0, mu, alpha, 0.99 * te).is_ok());
        match closed_form_cubic(r0, mu, alpha, 1.01 * te) {
            Err(Error::Domain { escape_time, .. }) => assert_eq!(escape_time, Some(te)),
            other => panic!("{other:?}"),
        }
        let params = AmplitudeParams::new(-1.0, 0.0, alpha);
        let near = integrate_scalar(r0, &MuSchedule::constant(mu), &params, 0.9 * te, 1e-5).unwrap();
        let exact = closed_form_cubic(r0, mu, alpha, near.time(near.values.len() - 1)).unwrap();
        assert!((near.values.last().unwrap() - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn pure_rotation_conserves_radii() {
        let model = toy_model(AmplitudeParams::new(-1.0, 0.0, 0.0), MuSchedule::constant(3.0), 0.4);
        let traj = integrate_full(&model, 0.2, 1.0 / 44_100.0).unwrap();
        for i in 0..traj.oscillators() {
            let r0 = traj.radius(i, 0);
            for k in 0..traj.len() {
                assert!((traj.radius(i, k) - r0).abs() < 1e-8);
            }
        }
        let xi = compute_xi(&traj, &model);
        assert!(xi.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn constant_field_gives_exponential_xi() {
        // With a = b = 0 the field is alpha * mu everywhere.
        let params = AmplitudeParams::new(0.0, 0.0, 2.0);
        let model = toy_model(params, MuSchedule::constant(-0.75), 0.3);
        let traj = integrate_full(&model, 0.5, 1e-3).unwrap();
        let xi = compute_xi(&traj, &model);
        for (k, &v) in xi.iter().enumerate() {
            let want = (-1.5 * traj.time(k)).exp();
            assert!((v - want).abs() < 1e-8 * want);
        }
    }

    #[test]
    fn full_system_matches_scalar_and_stays_on_leaf() {
        let schedule = MuSchedule::from_pairs(&[(0.0, 2.0), (0.1, -0.5), (0.2, 0.3)]).unwrap();
        let model = toy_model(AmplitudeParams::new(-1.0, 0.0, 5.0), schedule.clone(), 0.05);
        let dt = 1.0 / 44_100.0;
        let traj = integrate_full(&model, 0.3, dt).unwrap();
        let scalar = integrate_scalar(0.05, &schedule, &model.params, 0.3, dt).unwrap();
        let s = model.spectral.rho_sum;
        for k in 0..traj.len() {
            let want = scalar.values[k] / s;
            assert!((traj.radius(1, k) - want).abs() <= 1e-9 * want);
        }
        assert!(leaf_residual(&traj, &model.spectral).on_leaf());
        let xi = compute_xi(&traj, &model);
        for k in (0..traj.len()).step_by(97) {
            let ratio = traj.radius(2, k) / traj.radius(2, 0);
            assert!((xi[k] - ratio).abs() < 1e-5 * ratio);
        }
    }

    #[test]
    fn phases_are_affine() {
        let model = toy_model(cubic(), MuSchedule::constant(0.2), 0.1);
        let traj = integrate_full(&model, 0.01, 1e-4).unwrap();
        for i in 0..traj.oscillators() {
            for k in [0, 17, 100] {
                let d = traj.phase(i, k) - traj.theta0[i] - traj.omega[i] * traj.time(k);
                assert!(d.abs() < 1e-12);
            }
        }
        // The DC oscillator starts on the negative axis.
        assert!((traj.theta0[0] - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn perturbed_start_is_flagged_off_leaf() {
        let mut model = toy_model(cubic(), MuSchedule::constant(0.2), 0.1);
        model.x0[2] *= 1.1;
        let traj = integrate_full(&model, 0.01, 1e-4).unwrap();
        let res = leaf_residual(&traj, &model.spectral);
        assert!(!res.on_leaf());
        assert!(res.relative > 0.01 && res.relative < 0.2, "{res:?}");
    }

    #[test]
    fn single_oscillator_has_zero_residual() {
        let traj = Trajectory {
            dt: 1.0,
            omega: vec![0.0],
            theta0: vec![0.0],
            x: vec![vec![1.0, 2.0]],
            y: vec![vec![0.0, 0.0]],
        };
        let sv = SpectralVector {
            n: 0,
            nu: vec![0.0],
            d: vec![1.0],
            omega: vec![0.0],
            rho_sum: 1.0,
        };
        assert_eq!(leaf_residual(&traj, &sv).absolute, 0.0);
    }

    #[test]
    fn reconstruction_scales_with_amplitude_ratios() {
        let sv = SpectralVector::from_parts(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]).unwrap();
        let rows = reconstruct_amplitudes(&[0.1, 0.2], &sv);
        assert!(rows.iter().all(|r| r == &vec![0.1, 0.2]));

        let base = SpectralVector::from_parts(vec![0.0, 1.0, 2.0], vec![-0.1, 0.4, 0.3]).unwrap();
        let scaled = SpectralVector::from_parts(vec![0.0, 1.0, 2.0], vec![-0.3, 1.2, 0.9]).unwrap();
        let a = reconstruct_amplitudes(&[0.5], &base);
        let b = reconstruct_amplitudes(&[0.5], &scaled);
        for (ra, rb) in a.iter().zip(&b) {
            assert!((ra[0] - rb[0]).abs() < 1e-15);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn amplitude_is_monotone_and_positive_per_segment(
            rho0 in 0.01f64..2.0,
            mus in proptest::collection::vec(-3.0f64..3.0, 1..5),
            a in proptest::sample::select(vec![-1.0, 1.0]),
            b in -2.0f64..0.0,
            alpha in 0.1f64..5.0,
        ) {
            let pairs: Vec<(f64, f64)> = mus.iter().enumerate().map(|(j, &m)| (j as f64 * 0.25, m)).collect();
            let schedule = MuSchedule::from_pairs(&pairs).unwrap();
            let params = AmplitudeParams::new(a, b, alpha);
            let dt = 1e-3;
            let Ok(series) = integrate_scalar(rho0, &schedule, &params, pairs.len() as f64 * 0.25, dt) else {
                return Ok(());
            };
            proptest::prop_assert!(series.values.iter().all(|&v| v > 0.0));
            for (j, _) in pairs.iter().enumerate() {
                let lo = j * 250;
                let hi = (lo + 250).min(series.values.len() - 1);
                let seg = &series.values[lo..=hi];
                let up = seg.windows(2).all(|w| w[1] >= w[0] - 1e-9);
                let down = seg.windows(2).all(|w| w[1] <= w[0] + 1e-9);
                proptest::prop_assert!(up || down);
            }
        }
    }
}
