//! Equilibria of the amplitude equation and the qualitative changes a
//! `mu` schedule drives through them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::constants::DEGENERATE_SLOPE;
use crate::dynamics::AmplitudeParams;
use crate::schedule::MuSchedule;
use crate::spectral::SpectralVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Degenerate,
}

impl Stability {
    fn from_slope(slope: f64) -> Self {
        if slope.abs() < DEGENERATE_SLOPE {
            Stability::Degenerate
        } else if slope < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }

    fn word(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub rho: f64,
    pub stability: Stability,
}

/// Nonnegative equilibria in increasing order; the origin comes first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub roots: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn origin(&self) -> Equilibrium {
        self.roots[0]
    }

    pub fn positive(&self) -> &[Equilibrium] {
        &self.roots[1..]
    }
}

/// Equilibria of `rho' = alpha rho (mu + a rho^2 + b rho^4)` with `rho >= 0`.
pub fn equilibria(mu: f64, params: &AmplitudeParams) -> EquilibriumSet {
    let AmplitudeParams { a, b, alpha } = *params;
    let mut squares: Vec<f64> = Vec::new();
    if b != 0.0 {
        let disc = a * a - 4.0 * b * mu;
        let scale = (a * a).max((4.0 * b * mu).abs()).max(f64::MIN_POSITIVE);
        if disc.abs() <= 1e-14 * scale {
            squares.push(-a / (2.0 * b));
        } else if disc > 0.0 {
            let q = -0.5 * (a + a.signum() * disc.sqrt());
            squares.push(q / b);
            if q != 0.0 {
                squares.push(mu / q);
            }
        }
    } else if a != 0.0 {
        squares.push(-mu / a);
    }

    let mut roots = vec![Equilibrium {
        rho: 0.0,
        stability: Stability::from_slope(alpha * mu),
    }];
    let mut positive: Vec<f64> = squares
        .into_iter()
        .filter(|u| *u > 0.0 && u.is_finite())
        .map(|u| polish(u.sqrt(), mu, a, b))
        .collect();
    positive.sort_by(f64::total_cmp);
    positive.dedup();
    roots.extend(positive.into_iter().map(|rho| {
        let sq = rho * rho;
        // d/drho [alpha rho h(rho)] = alpha rho h'(rho) where h(rho) = 0.
        let slope = alpha * sq * (2.0 * a + 4.0 * b * sq);
        Equilibrium {
            rho,
            stability: Stability::from_slope(slope),
        }
    }));
    EquilibriumSet { roots }
}

/// Newton steps on `mu + a rho^2 + b rho^4` to remove rounding from the closed form.
fn polish(mut rho: f64, mu: f64, a: f64, b: f64) -> f64 {
    for _ in 0..3 {
        let sq = rho * rho;
        let h = mu + sq * (a + b * sq);
        let dh = rho * (2.0 * a + 4.0 * b * sq);
        if dh.abs() < 1e-12 {
            break;
        }
        let next = rho - h / dh;
        if !(next > 0.0) {
            break;
        }
        rho = next;
    }
    rho
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PitchforkKind {
    Supercritical,
    Subcritical,
    Degenerate,
}

impl PitchforkKind {
    /// Direction set by the lowest-order nonzero nonlinear coefficient.
    pub fn of(params: &AmplitudeParams) -> Self {
        let lead = if params.a != 0.0 { params.a } else { params.b };
        if lead < 0.0 {
            PitchforkKind::Supercritical
        } else if lead > 0.0 {
            PitchforkKind::Subcritical
        } else {
            PitchforkKind::Degenerate
        }
    }
}

/// Parameter value and amplitude where the positive branches fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub mu: f64,
    pub rho: f64,
}

/// Parameter values at which the equilibrium structure changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionVarieties {
    pub pitchfork_mu: f64,
    pub pitchfork_kind: PitchforkKind,
    pub double_saddle_node: Option<Fold>,
}

/// Transition varieties of `mu + a rho^(2p) + b rho^(2q)` for `q > p >= 1`.
pub fn transition_varieties(a: f64, b: f64, p: u32, q: u32) -> TransitionVarieties {
    let pitchfork_kind = PitchforkKind::of(&AmplitudeParams::new(a, b, 1.0));
    let double_saddle_node = (a * b < 0.0 && q > p).then(|| {
        let (pf, qf) = (f64::from(p), f64::from(q));
        let base = -pf * a / (qf * b);
        Fold {
            mu: -a * base.powf(pf / (qf - pf)) * ((qf - pf) / qf),
            rho: base.powf(1.0 / (2.0 * (qf - pf))),
        }
    });
    TransitionVarieties {
        pitchfork_mu: 0.0,
        pitchfork_kind,
        double_saddle_node,
    }
}

/// Fold point of the quartic family used throughout the pipeline.
pub fn fold_point(params: &AmplitudeParams) -> Option<Fold> {
    transition_varieties(params.a, params.b, 1, 2).double_saddle_node
}

/// Invariant torus attached to a positive scalar equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Torus {
    /// Scalar amplitude of the equilibrium.
    pub rho: f64,
    /// Radius of every oscillator's circle.
    pub radii: Vec<f64>,
    /// Number of oscillators with nonzero frequency.
    pub dimension: usize,
    pub stability: Stability,
}

/// One torus per positive equilibrium at `mu`.
pub fn torus_inventory(mu: f64, params: &AmplitudeParams, spectral: &SpectralVector) -> Vec<Torus> {
    let dimension = spectral.omega.iter().filter(|&&w| w != 0.0).count();
    let first = spectral.d[1];
    equilibria(mu, params)
        .positive()
        .iter()
        .map(|eq| {
            let r1 = eq.rho / spectral.rho_sum;
            Torus {
                rho: eq.rho,
                radii: spectral.d.iter().map(|c| c.abs() / first * r1).collect(),
                dimension,
                stability: eq.stability,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    SupercriticalPitchfork,
    SubcriticalPitchfork,
    DegeneratePitchfork,
    DoubleSaddleNode,
}

impl EventKind {
    pub fn describe(self) -> &'static str {
        match self {
            EventKind::SupercriticalPitchfork => "supercritical pitchfork",
            EventKind::SubcriticalPitchfork => "subcritical pitchfork",
            EventKind::DegeneratePitchfork => "degenerate pitchfork",
            EventKind::DoubleSaddleNode => "double saddle-node",
        }
    }
}

/// Qualitative change at a schedule switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub time: f64,
    pub kind: EventKind,
    pub mu_before: f64,
    pub mu_after: f64,
    pub tori_before: usize,
    pub tori_after: usize,
    /// Radii of each torus after the switch; empty without a spectral vector.
    pub torus_radii: Vec<Vec<f64>>,
}

/// Whether moving from `before` to `after` crosses `value`, counting a
/// landing exactly on it but not a departure from it.
pub fn crosses(before: f64, after: f64, value: f64) -> bool {
    (before < value && value <= after) || (after <= value && value < before)
}

/// Events at every switch of the schedule, in time order.
pub fn classify_events(
    schedule: &MuSchedule,
    params: &AmplitudeParams,
    spectral: Option<&SpectralVector>,
) -> Vec<BifurcationEvent> {
    let varieties = transition_varieties(params.a, params.b, 1, 2);
    let pitchfork = match varieties.pitchfork_kind {
        PitchforkKind::Supercritical => EventKind::SupercriticalPitchfork,
        PitchforkKind::Subcritical => EventKind::SubcriticalPitchfork,
        PitchforkKind::Degenerate => EventKind::DegeneratePitchfork,
    };
    let mut marks = vec![(varieties.pitchfork_mu, pitchfork)];
    if let Some(fold) = varieties.double_saddle_node {
        marks.push((fold.mu, EventKind::DoubleSaddleNode));
    }

    let count = |mu: f64| equilibria(mu, params).positive().len();
    let mut events = Vec::new();
    for (time, before, after) in schedule.switches() {
        let mut hits: Vec<(f64, EventKind)> = marks
            .iter()
            .copied()
            .filter(|&(v, _)| crosses(before, after, v))
            .collect();
        hits.sort_by(|x, y| (x.0 - before).abs().total_cmp(&(y.0 - before).abs()));
        for (_, kind) in hits {
            events.push(BifurcationEvent {
                time,
                kind,
                mu_before: before,
                mu_after: after,
                tori_before: count(before),
                tori_after: count(after),
                torus_radii: spectral
                    .map(|sv| torus_inventory(after, params, sv).into_iter().map(|t| t.radii).collect())
                    .unwrap_or_default(),
            });
        }
    }
    events
}

/// Up-crossing of zero followed by a down-crossing of the fold value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisCycle {
    pub t_up: f64,
    pub t_down: f64,
    pub fold_mu: f64,
}

/// Finds a complete hysteresis cycle; only possible when `a > 0 > b`.
pub fn detect_hysteresis(schedule: &MuSchedule, a: f64, b: f64) -> Option<HysteresisCycle> {
    if !(a > 0.0 && b < 0.0) {
        return None;
    }
    let fold = transition_varieties(a, b, 1, 2).double_saddle_node?;
    let mut switches = schedule.switches();
    let (t_up, ..) = switches.by_ref().find(|&(_, before, after)| after > before && crosses(before, after, 0.0))?;
    let (t_down, ..) = switches.find(|&(_, before, after)| after < before && crosses(before, after, fold.mu))?;
    Some(HysteresisCycle {
        t_up,
        t_down,
        fold_mu: fold.mu,
    })
}

/// Equilibrium picture on one constant-`mu` stretch of the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalInventory {
    pub start: f64,
    pub end: f64,
    pub mu: f64,
    pub origin: Stability,
    pub tori: Vec<Torus>,
}

/// Inventory of every schedule step up to `t_end`.
pub fn schedule_inventories(
    schedule: &MuSchedule,
    params: &AmplitudeParams,
    spectral: &SpectralVector,
    t_end: f64,
) -> Vec<IntervalInventory> {
    let steps = schedule.steps();
    steps
        .iter()
        .enumerate()
        .map(|(k, step)| IntervalInventory {
            start: step.t,
            end: steps.get(k + 1).map_or(t_end, |s| s.t),
            mu: step.mu,
            origin: equilibria(step.mu, params).origin().stability,
            tori: torus_inventory(step.mu, params, spectral),
        })
        .collect()
}

/// Machine-readable bifurcation summary of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub events: Vec<BifurcationEvent>,
    pub inventories: Vec<IntervalInventory>,
    pub hysteresis: HysteresisSummary,
    pub varieties: TransitionVarieties,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisSummary {
    pub found: bool,
    pub t_up: Option<f64>,
    pub t_down: Option<f64>,
}

impl From<Option<HysteresisCycle>> for HysteresisSummary {
    fn from(cycle: Option<HysteresisCycle>) -> Self {
        Self {
            found: cycle.is_some(),
            t_up: cycle.map(|c| c.t_up),
            t_down: cycle.map(|c| c.t_down),
        }
    }
}

/// Events, per-step inventories and hysteresis for a schedule.
pub fn analyze_schedule(
    schedule: &MuSchedule,
    params: &AmplitudeParams,
    spectral: &SpectralVector,
    t_end: f64,
) -> BifurcationReport {
    BifurcationReport {
        events: classify_events(schedule, params, Some(spectral)),
        inventories: schedule_inventories(schedule, params, spectral, t_end),
        hysteresis: detect_hysteresis(schedule, params.a, params.b).into(),
        varieties: transition_varieties(params.a, params.b, 1, 2),
    }
}

fn count_word(n: usize) -> String {
    match n {
        1 => "one".into(),
        2 => "two".into(),
        3 => "three".into(),
        4 => "four".into(),
        _ => n.to_string(),
    }
}

fn describe_tori(tori: &[Torus]) -> String {
    match tori {
        [] => "no hypertorus".into(),
        [only] => format!("one {} T{}", only.stability.word(), only.dimension),
        [inner, outer] => format!(
            "two T{} (inner {}, outer {})",
            outer.dimension,
            inner.stability.word(),
            outer.stability.word()
        ),
        many => format!(
            "{} T{} ({})",
            count_word(many.len()),
            many[0].dimension,
            many.iter().map(|t| t.stability.word()).collect::<Vec<_>>().join(", ")
        ),
    }
}

/// Plain-text account of the schedule: one line per stretch and per event.
pub fn narrate(events: &[BifurcationEvent], inventories: &[IntervalInventory]) -> String {
    if events.is_empty() {
        return "no qualitative change\n".into();
    }
    let mut out = String::new();
    let mut pending = events.iter().peekable();
    for inv in inventories {
        while let Some(ev) = pending.next_if(|e| e.time <= inv.start) {
            let _ = writeln!(
                out,
                "t = {:.4} s: {} (mu {} -> {}), tori {} -> {}",
                ev.time,
                ev.kind.describe(),
                ev.mu_before,
                ev.mu_after,
                ev.tori_before,
                ev.tori_after
            );
        }
        let _ = writeln!(
            out,
            "[{:.4}, {:.4}] mu = {}: {}, origin {}",
            inv.start,
            inv.end,
            inv.mu,
            describe_tori(&inv.tori),
            inv.origin.word()
        );
    }
    for ev in pending {
        let _ = writeln!(out, "t = {:.4} s: {}", ev.time, ev.kind.describe());
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::Just;

    use super::*;

    fn params(a: f64, b: f64) -> AmplitudeParams {
        AmplitudeParams::new(a, b, 1.0)
    }

    fn toy_spectral() -> SpectralVector {
        SpectralVector::from_parts(
            vec![0.0, 100.0, 200.0, 300.0],
            vec![-0.2, 1.0, 0.5, 0.25],
        )
        .unwrap()
    }

    /// Number of positive roots of `mu + a u + b u^2` in `u`, from sign
    /// changes on a dense grid up to a Cauchy bound.
    fn brute_force_count(mu: f64, a: f64, b: f64) -> usize {
        let bound = if b != 0.0 {
            1.0 + a.abs().max(mu.abs()) / b.abs()
        } else if a != 0.0 {
            2.0 * (mu / a).abs() + 1.0
        } else {
            return 0;
        };
        let steps = 200_000;
        let h = |u: f64| mu + u * (a + b * u);
        let mut count = 0;
        let mut prev = h(0.0);
        for k in 1..=steps {
            let cur = h(bound * k as f64 / steps as f64);
            if (prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0) {
                count += 1;
            }
            if cur != 0.0 {
                prev = cur;
            }
        }
        count
    }

    #[test]
    fn two_level_example() {
        let set = equilibria(-0.072, &AmplitudeParams::new(1.0, -2.15, 23.0));
        let pos = set.positive();
        assert_eq!(pos.len(), 2);
        assert!((pos[0].rho - 0.2984).abs() < 1e-4, "{pos:?}");
        assert!((pos[1].rho - 0.6133).abs() < 1e-4);
        assert_eq!(pos[0].stability, Stability::Unstable);
        assert_eq!(pos[1].stability, Stability::Stable);
        assert_eq!(set.origin().stability, Stability::Stable);
    }

    #[test]
    fn cubic_examples() {
        let set = equilibria(1.0, &params(-1.0, 0.0));
        assert_eq!(set.roots.len(), 2);
        assert_eq!(set.origin().stability, Stability::Unstable);
        assert!((set.positive()[0].rho - 1.0).abs() < 1e-15);
        assert_eq!(set.positive()[0].stability, Stability::Stable);

        let none = equilibria(-1.0, &params(-1.0, 0.0));
        assert_eq!(none.roots.len(), 1);
        assert_eq!(none.origin().stability, Stability::Stable);
    }

    #[test]
    fn degenerate_origin_at_zero_mu() {
        assert_eq!(equilibria(0.0, &params(-1.0, 0.0)).origin().stability, Stability::Degenerate);
    }

    #[test]
    fn negative_alpha_flips_stability() {
        let set = equilibria(1.0, &AmplitudeParams::new(-1.0, 0.0, -2.0));
        assert_eq!(set.origin().stability, Stability::Stable);
        assert_eq!(set.positive()[0].stability, Stability::Unstable);
    }

    #[test]
    fn fold_of_the_quartic() {
        let v = transition_varieties(1.0, -2.15, 1, 2);
        let fold = v.double_saddle_node.unwrap();
        assert!((fold.mu + 0.11628).abs() < 1e-5);
        assert!((fold.rho - 0.48224).abs() < 1e-5);
        assert!((fold.mu - 1.0 / (4.0 * -2.15)).abs() < 1e-15);
        assert_eq!(v.pitchfork_kind, PitchforkKind::Subcritical);

        let mirror = transition_varieties(-1.0, 2.15, 1, 2).double_saddle_node.unwrap();
        assert!((mirror.mu - 0.11628).abs() < 1e-5);

        let cubic = transition_varieties(-1.0, 0.0, 1, 2);
        assert_eq!(cubic.pitchfork_kind, PitchforkKind::Supercritical);
        assert!(cubic.double_saddle_node.is_none());
        assert!(transition_varieties(1.0, 2.0, 1, 2).double_saddle_node.is_none());
    }

    #[test]
    fn general_exponents_place_the_fold_on_a_double_root() {
        // mu + a r^2p + b r^2q and its r-derivative vanish together at the fold.
        for (a, b, p, q) in [(1.0, -0.7, 1, 3), (-2.0, 0.5, 2, 3), (0.3, -1.1, 1, 2)] {
            let fold = transition_varieties(a, b, p, q).double_saddle_node.unwrap();
            let h = fold.mu + a * fold.rho.powi(2 * p as i32) + b * fold.rho.powi(2 * q as i32);
            let dh = 2.0 * p as f64 * a * fold.rho.powi(2 * p as i32 - 1)
                + 2.0 * q as f64 * b * fold.rho.powi(2 * q as i32 - 1);
            assert!(h.abs() < 1e-12 && dh.abs() < 1e-12, "{a} {b} {p} {q}");
        }
    }

    #[test]
    fn root_count_table_for_subcritical_quartic() {
        let p = params(1.0, -2.15);
        let fold = fold_point(&p).unwrap().mu;
        for k in 0..400 {
            let mu = -0.5 + k as f64 * 0.0025 + 1e-7;
            let n = equilibria(mu, &p).positive().len();
            let expected = if mu < fold {
                0
            } else if mu < 0.0 {
                2
            } else {
                1
            };
            assert_eq!(n, expected, "mu = {mu}");
        }
    }

    #[test]
    fn origin_stability_flips_through_zero() {
        let p = params(-1.0, 0.0);
        assert_eq!(equilibria(-1e-3, &p).origin().stability, Stability::Stable);
        assert_eq!(equilibria(1e-3, &p).origin().stability, Stability::Unstable);
    }

    #[test]
    fn crossing_convention_is_half_open() {
        assert!(crosses(-1.0, 0.0, 0.0));
        assert!(!crosses(0.0, 1.0, 0.0));
        assert!(crosses(1.0, 0.0, 0.0));
        assert!(!crosses(0.0, -1.0, 0.0));
        assert!(!crosses(1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_schedule_has_no_events() {
        let events = classify_events(&MuSchedule::constant(0.5), &params(-1.0, 0.0), None);
        assert!(events.is_empty());
        assert_eq!(narrate(&events, &[]), "no qualitative change\n");
    }

    #[test]
    fn both_varieties_in_one_switch_follow_crossing_order() {
        let p = params(1.0, -2.15);
        let s = MuSchedule::from_pairs(&[(0.0, 1.0), (1.0, -1.0), (2.0, 1.0)]).unwrap();
        let kinds: Vec<EventKind> = classify_events(&s, &p, None).iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::SubcriticalPitchfork,
                EventKind::DoubleSaddleNode,
                EventKind::DoubleSaddleNode,
                EventKind::SubcriticalPitchfork
            ]
        );
    }

    #[test]
    fn events_carry_torus_counts_and_radii() {
        let sv = toy_spectral();
        let s = MuSchedule::from_pairs(&[(0.0, -1.0), (0.5, 4.0)]).unwrap();
        let ev = &classify_events(&s, &params(-1.0, 0.0), Some(&sv))[0];
        assert_eq!((ev.tori_before, ev.tori_after), (0, 1));
        let radii = &ev.torus_radii[0];
        let r1 = 2.0 / sv.rho_sum;
        assert!((radii[1] - r1).abs() < 1e-12);
        assert!((radii[0] - 0.2 * r1).abs() < 1e-12);
    }

    #[test]
    fn hysteresis_needs_full_cycle() {
        let up_only = MuSchedule::from_pairs(&[(0.0, -0.05), (1.0, 1.0), (2.0, -0.05)]).unwrap();
        assert!(detect_hysteresis(&up_only, 1.0, -2.15).is_none());
        let full = MuSchedule::from_pairs(&[(0.0, -0.05), (1.0, 1.0), (2.0, -0.5)]).unwrap();
        let c = detect_hysteresis(&full, 1.0, -2.15).unwrap();
        assert_eq!((c.t_up, c.t_down), (1.0, 2.0));
        assert!(detect_hysteresis(&full, -1.0, 0.0).is_none());
    }

    #[test]
    fn torus_inventory_counts() {
        let sv = toy_spectral();
        let two = torus_inventory(-0.072, &AmplitudeParams::new(1.0, -2.15, 23.0), &sv);
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].dimension, 3);
        assert_eq!(two[0].stability, Stability::Unstable);
        assert_eq!(two[1].stability, Stability::Stable);
        assert!((two[0].radii[1] - two[0].rho / sv.rho_sum).abs() < 1e-15);
        assert!(torus_inventory(-2.0, &params(-1.0, 0.0), &sv).is_empty());
        let one = torus_inventory(0.28, &params(-1.0, 0.0), &sv);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].stability, Stability::Stable);
    }

    #[test]
    fn narrative_lines() {
        let sv = toy_spectral();
        let p = AmplitudeParams::new(1.0, -2.15, 23.0);
        let s = MuSchedule::from_pairs(&[(0.0, -0.1), (0.3, 3.0)]).unwrap();
        let report = analyze_schedule(&s, &p, &sv, 1.0);
        let text = narrate(&report.events, &report.inventories);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3, "{text}");
        assert!(lines[0].contains("two T3 (inner unstable, outer stable), origin stable"), "{text}");
        assert!(lines[1].contains("subcritical pitchfork"));
        assert!(lines[2].contains("one stable T3, origin unstable"));
    }

    #[test]
    fn switch_into_origin_basin_changes_the_limit() {
        use crate::dynamics::integrate_scalar;
        // Sitting on the outer branch, a switch below the fold sends the
        // amplitude to the origin; a switch that stays above it does not.
        let p = AmplitudeParams::new(1.0, -2.15, 23.0);
        let start = equilibria(-0.072, &p).positive()[1].rho;
        let run = |mu_after: f64| {
            let s = MuSchedule::from_pairs(&[(0.0, -0.072), (1.0, mu_after)]).unwrap();
            *integrate_scalar(start, &s, &p, 20.0, 1e-3).unwrap().values.last().unwrap()
        };
        let events = |mu_after: f64| {
            let s = MuSchedule::from_pairs(&[(0.0, -0.072), (1.0, mu_after)]).unwrap();
            classify_events(&s, &p, None).len()
        };
        assert!(run(-0.165) < 1e-3);
        assert_eq!(events(-0.165), 1);
        assert!(run(-0.1) > 0.3);
        assert_eq!(events(-0.1), 0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(300))]
        #[test]
        fn closed_form_roots_match_brute_force(
            mu in -2.0f64..2.0,
            a in -3.0f64..3.0,
            b in proptest::prop_oneof![Just(0.0), -3.0f64..3.0],
        ) {
            let p = params(a, b);
            let set = equilibria(mu, &p);
            for eq in set.positive() {
                let sq = eq.rho * eq.rho;
                proptest::prop_assert!((eq.rho * (mu + a * sq + b * sq * sq)).abs() < 1e-10);
            }
            proptest::prop_assert_eq!(set.positive().len(), brute_force_count(mu, a, b));
        }

        #[test]
        fn events_match_dense_path_scan(
            mus in proptest::collection::vec(-1.0f64..1.0, 2..6),
        ) {
            let p = params(1.0, -2.15);
            let pairs: Vec<(f64, f64)> = mus.iter().enumerate().map(|(k, &m)| (k as f64, m)).collect();
            let s = MuSchedule::from_pairs(&pairs).unwrap();
            let events = classify_events(&s, &p, None);
            let mut scanned = 0;
            for w in mus.windows(2) {
                // Count changes in the positive-root count and origin
                // stability along a dense path between the two values.
                let steps = 4000;
                let state = |mu: f64| {
                    let set = equilibria(mu, &p);
                    (set.positive().len(), set.origin().stability == Stability::Stable)
                };
                let mut prev = state(w[0]);
                for k in 1..=steps {
                    let mu = w[0] + (w[1] - w[0]) * k as f64 / steps as f64;
                    let cur = state(mu);
                    if cur != prev {
                        scanned += 1;
                    }
                    prev = cur;
                }
            }
            proptest::prop_assert_eq!(events.len(), scanned);
        }
    }
}
