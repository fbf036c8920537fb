//! Epoch decomposition, Farey sequences and regime labels.
//!
//! All amplitudes are measured in the first state variable relative to the
//! fold-to-fold width `W` of the system. Swings of at least `lao * W` are large
//! excursions, swings of at most `sao * W` are small oscillations and anything
//! in between is attached to the surrounding SAO epoch with a flag.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::geometry_report;
use crate::integrate::{EventKind, Trajectory};
use crate::model::{
    hh_rates, koper_to_normal_form, HHParams, KoperParams, NormalFormParams, State3, System, VectorField,
};
use crate::roots::all_roots;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Minimum LAO swing, as a fraction of the fold width.
    pub lao: f64,
    /// Maximum SAO swing, as a fraction of the fold width.
    pub sao: f64,
    /// Swings below `noise * W` are discarded.
    pub noise: f64,
    /// Dwell requires speed below `dwell_speed * delta`.
    pub dwell_speed: f64,
    /// and distance to `M2` below this radius.
    pub dwell_radius: f64,
    /// Minimum dwell per epoch, in units of `1 / delta`.
    pub dwell_time: f64,
    /// Terminal speed for convergence.
    pub steady_speed: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            lao: 0.75,
            sao: 0.25,
            noise: 1e-6,
            dwell_speed: 5.0,
            dwell_radius: 0.1,
            dwell_time: 0.1,
            steady_speed: 1e-8,
        }
    }
}

impl Thresholds {
    /// Scales the LAO and SAO cutoffs by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            lao: (self.lao * factor).min(1.0),
            sao: self.sao * factor,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FrameModel {
    Normal(NormalFormParams),
    Koper(KoperParams, NormalFormParams),
    KoperSymmetric(KoperParams),
    Hh(HHParams),
}

/// Fold positions and the slow manifold of a system, in its own coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub lower_fold: f64,
    pub upper_fold: f64,
    pub delta: f64,
    model: FrameModel,
}

impl Frame {
    pub fn for_system(sys: &System) -> Result<Frame> {
        let delta = sys.delta();
        Ok(match sys {
            System::NormalForm(p) => {
                let g = geometry_report(p)?;
                Frame {
                    lower_fold: g.fold_line_minus.x,
                    upper_fold: g.fold_line_plus.x,
                    delta,
                    model: FrameModel::Normal(p.clone()),
                }
            }
            System::Koper(kp) => Frame {
                lower_fold: -1.0,
                upper_fold: 1.0,
                delta,
                model: FrameModel::Koper(*kp, koper_to_normal_form(kp)?),
            },
            System::KoperSymmetric(kp) => Frame {
                lower_fold: -1.0,
                upper_fold: 1.0,
                delta,
                model: FrameModel::KoperSymmetric(*kp),
            },
            System::HodgkinHuxley(hp) => {
                let (lo, hi) = hh_fold_reference(hp)?;
                Frame {
                    lower_fold: lo,
                    upper_fold: hi,
                    delta,
                    model: FrameModel::Hh(*hp),
                }
            }
        })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower_fold + self.upper_fold)
    }

    pub fn width(&self) -> f64 {
        self.upper_fold - self.lower_fold
    }

    pub fn side_of(&self, x: f64) -> Position {
        if x >= self.midpoint() {
            Position::Above
        } else {
            Position::Below
        }
    }

    /// Distance to the outer attracting branches of `M2` and the speed, both
    /// in the frame where the slow manifold is explicit.
    fn dwell_metrics(&self, s: &State3) -> (f64, f64) {
        let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        match &self.model {
            FrameModel::Normal(p) => {
                let d = (s.z - p.g_of(s.x)).abs();
                (d, norm(p.rhs(*s).unwrap_or([f64::INFINITY; 3])))
            }
            FrameModel::Koper(kp, p) => {
                let n = kp.to_normal_state(*s);
                ((n.z - p.g_of(n.x)).abs(), norm(p.rhs(n).unwrap_or([f64::INFINITY; 3])))
            }
            FrameModel::KoperSymmetric(kp) => {
                // M2: y = x^3 - 3x, z = 2(y + lambda) - k x
                let y = s.x.powi(3) - 3.0 * s.x;
                let z = 2.0 * (y + kp.lambda) - kp.k * s.x;
                let v = System::KoperSymmetric(*kp).eval(&s.to_array());
                ((s.z - z).abs(), norm(v))
            }
            FrameModel::Hh(hp) => {
                let n = hh_rates::n_inf(crate::model::HH_MV_PER_UNIT * s.x);
                let v = System::HodgkinHuxley(*hp).eval(&s.to_array());
                ((s.y - n).abs(), norm(v))
            }
        }
    }
}

/// `v` of the two points where the slow manifold of the HH reduction
/// crosses the fold lines of the fast nullcline surface.
pub fn hh_fold_reference(hp: &HHParams) -> Result<(f64, f64)> {
    let h_on_m2 = |v: f64| {
        let vm = crate::model::HH_MV_PER_UNIT * v;
        let m = hh_rates::m_inf(vm);
        let n = hh_rates::n_inf(vm);
        let h = (hp.i_bar() - hp.g_k * (v - hp.e_k) * n.powi(4) - hp.g_l * (v - hp.e_l)) / ((v - hp.e_na) * m * m * m);
        (n, h)
    };
    let g = |v: f64| {
        let (n, h) = h_on_m2(v);
        hp.fast_function_dv(v, n, h)
    };
    let roots = all_roots(g, -0.9, 0.4, 2600, 1e-13);
    match roots.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::NoBranchDecomposition),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationEvent {
    pub t: f64,
    pub kind: EventKind,
    pub x: f64,
    /// Largest adjacent swing.
    pub amplitude: f64,
    pub side: Position,
}

/// Extrema of the first state variable with swings below the noise floor
/// removed. Uses the integrator's events when present, otherwise the samples
/// (refined by a parabola through the three neighbouring points).
pub fn detect_events(traj: &Trajectory, frame: &Frame, th: &Thresholds) -> Vec<OscillationEvent> {
    let raw: Vec<(f64, EventKind, f64)> = if traj.extrema().next().is_some() {
        let t0 = traj.t.first().copied().unwrap_or(f64::NEG_INFINITY);
        traj.extrema()
            .filter(|e| e.t >= t0)
            .map(|e| (e.t, e.kind, e.state.x))
            .collect()
    } else {
        sample_extrema(traj)
    };
    let floor = th.noise * frame.width();
    let mut kept: Vec<(f64, EventKind, f64)> = Vec::new();
    for e in raw {
        match kept.last_mut() {
            None => kept.push(e),
            Some(last) if last.1 == e.1 => {
                let more = match e.1 {
                    EventKind::Max => e.2 > last.2,
                    _ => e.2 < last.2,
                };
                if more {
                    *last = e;
                }
            }
            Some(last) => {
                if (e.2 - last.2).abs() >= floor {
                    kept.push(e);
                }
            }
        }
    }
    (0..kept.len())
        .map(|i| {
            let prev = if i > 0 { (kept[i].2 - kept[i - 1].2).abs() } else { 0.0 };
            let next = if i + 1 < kept.len() {
                (kept[i + 1].2 - kept[i].2).abs()
            } else {
                0.0
            };
            OscillationEvent {
                t: kept[i].0,
                kind: kept[i].1,
                x: kept[i].2,
                amplitude: prev.max(next),
                side: frame.side_of(kept[i].2),
            }
        })
        .collect()
}

fn sample_extrema(traj: &Trajectory) -> Vec<(f64, EventKind, f64)> {
    let x: Vec<f64> = traj.states.iter().map(|s| s.x).collect();
    let mut out = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
        let kind = if b > a && b >= c {
            EventKind::Max
        } else if b < a && b <= c {
            EventKind::Min
        } else {
            continue;
        };
        let (t0, t1, t2) = (traj.t[i - 1], traj.t[i], traj.t[i + 1]);
        // vertex of the interpolating parabola
        let d1 = (b - a) / (t1 - t0);
        let d2 = (c - b) / (t2 - t1);
        let curv = (d2 - d1) / (t2 - t0);
        let (t, v) = if curv != 0.0 {
            let tv = (0.5 * (t0 + t1) - d1 / (2.0 * curv)).clamp(t0, t2);
            (tv, a + d1 * (tv - t0) + curv * (tv - t0) * (tv - t1))
        } else {
            (t1, b)
        };
        out.push((t, kind, v));
    }
    out
}

/// A Farey block `L^s` (above) or `L_s` (below).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FareySegment {
    pub lao: u32,
    pub sao: u32,
    pub position: Position,
}

impl fmt::Display for FareySegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = match self.position {
            Position::Above => '^',
            Position::Below => '_',
        };
        write!(f, "{}{}{}", self.lao, mark, self.sao)
    }
}

impl FromStr for FareySegment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad Farey segment '{s}'"));
        let (i, position) = s
            .char_indices()
            .find_map(|(i, c)| match c {
                '^' => Some((i, Position::Above)),
                '_' => Some((i, Position::Below)),
                _ => None,
            })
            .ok_or_else(bad)?;
        let lao = s[..i].parse().map_err(|_| bad())?;
        let rest = s[i + 1..].trim_start_matches('{').trim_end_matches('}');
        let sao = rest.parse().map_err(|_| bad())?;
        Ok(FareySegment { lao, sao, position })
    }
}

/// Renders segments separated by spaces. A sequence without SAOs collapses
/// to `{L^0}`.
pub fn farey_string(segments: &[FareySegment]) -> String {
    if !segments.is_empty() && segments.iter().all(|s| s.sao == 0) {
        return "{L^0}".to_string();
    }
    segments.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
}

/// Inverse of [`farey_string`]. The collapsed form `{L^0}` carries no counts
/// and parses to an empty list.
pub fn parse_farey(s: &str) -> Result<Vec<FareySegment>> {
    let s = s.trim();
    if s == "{L^0}" {
        return Ok(Vec::new());
    }
    s.split_whitespace().map(str::parse).collect()
}

/// Slow-dynamics epoch between two large swings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub t_start: f64,
    pub t_end: f64,
    pub position: Position,
    pub sao: u32,
    pub ambiguous: bool,
    /// Time spent close to `M2` at slow speed.
    pub dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochSplit {
    pub epochs: Vec<Epoch>,
    pub segments: Vec<FareySegment>,
    /// Number of large swings (two per full excursion).
    pub lao_swings: usize,
    pub ambiguity_flags: Vec<String>,
}

fn dwell_between(traj: &Trajectory, frame: &Frame, th: &Thresholds, a: f64, b: f64) -> f64 {
    let i0 = traj.t.partition_point(|&t| t < a);
    let i1 = traj.t.partition_point(|&t| t <= b);
    let mut total = 0.0;
    for i in i0.max(1)..i1 {
        let s = &traj.states[i];
        let (d, v) = frame.dwell_metrics(s);
        if d < th.dwell_radius && v < th.dwell_speed * frame.delta {
            total += traj.t[i] - traj.t[i - 1];
        }
    }
    total
}

/// Groups swings into large excursions and SAO epochs and compresses them
/// into Farey segments. Incomplete blocks at either end are dropped.
pub fn split_epochs(events: &[OscillationEvent], traj: &Trajectory, frame: &Frame, th: &Thresholds) -> EpochSplit {
    let w = frame.width();
    let mut out = EpochSplit::default();
    // indices of large swings (between events i and i+1)
    let mut large = Vec::new();
    for i in 0..events.len().saturating_sub(1) {
        let a = (events[i + 1].x - events[i].x).abs();
        let crosses = events[i].side != events[i + 1].side;
        if a >= th.lao * w && crosses {
            large.push(i);
        }
    }
    out.lao_swings = large.len();
    for pair in large.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let up = events[i + 1].x > events[i].x;
        let position = if up { Position::Above } else { Position::Below };
        let mut small = 0u32;
        let mut ambiguous = false;
        for k in (i + 1)..j {
            let a = (events[k + 1].x - events[k].x).abs();
            small += 1;
            if a > th.sao * w {
                ambiguous = true;
                out.ambiguity_flags.push(format!(
                    "swing of {:.3} W at t = {:.3} between thresholds",
                    a / w,
                    events[k].t
                ));
            }
        }
        let (t_start, t_end) = (events[i + 1].t, events[j].t);
        out.epochs.push(Epoch {
            t_start,
            t_end,
            position,
            sao: small / 2,
            ambiguous,
            dwell: dwell_between(traj, frame, th, t_start, t_end),
        });
    }
    // Farey blocks: each block closes on an epoch with SAOs
    let mut swings = 0u32;
    let mut started = false;
    for e in &out.epochs {
        swings += 1;
        if e.sao > 0 {
            if started {
                out.segments.push(FareySegment {
                    lao: swings.div_ceil(2),
                    sao: e.sao,
                    position: e.position,
                });
            }
            started = true;
            swings = 0;
        }
    }
    if out.segments.is_empty() && !out.epochs.iter().any(|e| e.sao > 0) && out.lao_swings >= 2 {
        out.segments.push(FareySegment {
            lao: (out.lao_swings / 2) as u32,
            sao: 0,
            position: Position::Above,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    SteadyState,
    MmoSingleAbove,
    MmoSingleBelow,
    MmoDouble,
    RelaxationTwoScale,
    RelaxationThreeScale,
    Exotic,
}

impl RegimeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::SteadyState => "SteadyState",
            RegimeLabel::MmoSingleAbove => "MmoSingleAbove",
            RegimeLabel::MmoSingleBelow => "MmoSingleBelow",
            RegimeLabel::MmoDouble => "MmoDouble",
            RegimeLabel::RelaxationTwoScale => "RelaxationTwoScale",
            RegimeLabel::RelaxationThreeScale => "RelaxationThreeScale",
            RegimeLabel::Exotic => "Exotic",
        }
    }

    pub fn is_single(self) -> bool {
        matches!(self, RegimeLabel::MmoSingleAbove | RegimeLabel::MmoSingleBelow)
    }

    pub fn is_relaxation(self) -> bool {
        matches!(
            self,
            RegimeLabel::RelaxationTwoScale | RegimeLabel::RelaxationThreeScale
        )
    }

    /// Label under the odd symmetry of the Koper model.
    pub fn mirrored(self) -> Self {
        match self {
            RegimeLabel::MmoSingleAbove => RegimeLabel::MmoSingleBelow,
            RegimeLabel::MmoSingleBelow => RegimeLabel::MmoSingleAbove,
            other => other,
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use RegimeLabel::*;
        [
            SteadyState,
            MmoSingleAbove,
            MmoSingleBelow,
            MmoDouble,
            RelaxationTwoScale,
            RelaxationThreeScale,
            Exotic,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
        .ok_or_else(|| Error::Parse(format!("unknown regime '{s}'")))
    }
}

/// Sup-norm speed at the last sample: from the vector field if known, else
/// by a backward difference.
pub fn terminal_speed(traj: &Trajectory, sys: Option<&System>) -> f64 {
    let n = traj.len();
    if n == 0 {
        return f64::INFINITY;
    }
    match sys {
        Some(sys) => sys
            .eval(&traj.states[n - 1].to_array())
            .iter()
            .fold(0.0, |m: f64, v| m.max(v.abs())),
        None if n >= 2 => {
            let (a, b) = (traj.states[n - 2], traj.states[n - 1]);
            a.sup_distance(&b) / (traj.t[n - 1] - traj.t[n - 2])
        }
        None => f64::INFINITY,
    }
}

/// Regime from an epoch split.
///
/// A side counts as slow if it has SAOs or if at least half of its epochs
/// dwell near `M2`. SAOs on one side with slow dwell on the other is the
/// degenerate double-epoch case and labelled `MmoDouble`.
pub fn classify_regime(
    split: &EpochSplit,
    events: &[OscillationEvent],
    frame: &Frame,
    th: &Thresholds,
    speed: f64,
) -> RegimeLabel {
    if speed <= th.steady_speed {
        return RegimeLabel::SteadyState;
    }
    if split.lao_swings < 2 {
        return small_oscillation_label(events);
    }
    let min_dwell = th.dwell_time / frame.delta;
    let side = |p: Position| {
        let es: Vec<_> = split.epochs.iter().filter(|e| e.position == p).collect();
        let sao = es.iter().any(|e| e.sao > 0);
        let dwell = !es.is_empty() && 2 * es.iter().filter(|e| e.dwell >= min_dwell).count() >= es.len();
        (sao, sao || dwell)
    };
    let (sao_a, slow_a) = side(Position::Above);
    let (sao_b, slow_b) = side(Position::Below);
    match (sao_a, sao_b) {
        (false, false) if slow_a && slow_b => RegimeLabel::RelaxationThreeScale,
        (false, false) => RegimeLabel::RelaxationTwoScale,
        (true, true) if split.segments.iter().any(|s| s.lao > 1) => RegimeLabel::Exotic,
        (true, true) => RegimeLabel::MmoDouble,
        (true, false) if slow_b => RegimeLabel::MmoDouble,
        (true, false) => RegimeLabel::MmoSingleAbove,
        (false, true) if slow_a => RegimeLabel::MmoDouble,
        (false, true) => RegimeLabel::MmoSingleBelow,
    }
}

/// Without large excursions: a decaying ring-down is a steady state, a
/// sustained small oscillation an SAO-only epoch on its side.
fn small_oscillation_label(events: &[OscillationEvent]) -> RegimeLabel {
    if events.len() < 6 {
        return RegimeLabel::SteadyState;
    }
    let swing = |i: usize| (events[i + 1].x - events[i].x).abs();
    let n = events.len() - 1;
    let first = swing(0).max(swing(1));
    let last = swing(n - 1).max(swing(n - 2));
    if last < 0.5 * first {
        return RegimeLabel::SteadyState;
    }
    match events[n].side {
        Position::Above => RegimeLabel::MmoSingleAbove,
        Position::Below => RegimeLabel::MmoSingleBelow,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub regime: RegimeLabel,
    pub farey: String,
    pub segments: Vec<FareySegment>,
    pub ambiguity_flags: Vec<String>,
    pub epochs: Vec<Epoch>,
    pub lao_swings: usize,
    pub events: usize,
    pub terminal_speed: f64,
}

/// Full pipeline on a transient-stripped trajectory.
pub fn analyse(traj: &Trajectory, frame: &Frame, th: &Thresholds, sys: Option<&System>) -> Analysis {
    let events = detect_events(traj, frame, th);
    let split = split_epochs(&events, traj, frame, th);
    let speed = terminal_speed(traj, sys);
    let regime = classify_regime(&split, &events, frame, th, speed);
    let mut flags = split.ambiguity_flags.clone();
    if regime == RegimeLabel::SteadyState && speed > th.steady_speed {
        flags.push(format!(
            "no oscillations but terminal speed {speed:.2e} above threshold"
        ));
    }
    let segments = if regime == RegimeLabel::SteadyState {
        Vec::new()
    } else {
        split.segments.clone()
    };
    Analysis {
        regime,
        farey: farey_string(&segments),
        segments,
        ambiguity_flags: flags,
        epochs: split.epochs,
        lao_swings: split.lao_swings,
        events: events.len(),
        terminal_speed: speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{Event, IntegratorStats};
    use proptest::prelude::*;

    fn bare_frame() -> Frame {
        let p = koper_to_normal_form(&KoperParams::new(-4.5, 1.5, 0.01, 0.01)).unwrap();
        Frame::for_system(&System::NormalForm(p)).unwrap()
    }

    fn sampled(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> Trajectory {
        let t: Vec<f64> = (0..n).map(|i| t_end * i as f64 / n as f64).collect();
        Trajectory {
            states: t.iter().map(|&t| State3::new(f(t), 0.0, 0.0)).collect(),
            steps: vec![0.0; n],
            t,
            events: Vec::<Event>::new(),
            stats: IntegratorStats::default(),
            labels: ["x".into(), "y".into(), "z".into()],
        }
    }

    #[test]
    fn sine_has_four_extrema() {
        let tr = sampled(f64::sin, 4.0 * std::f64::consts::PI, 4000);
        let ev = detect_events(&tr, &bare_frame(), &Thresholds::default());
        assert_eq!(ev.len(), 4);
        assert!((ev[0].t - std::f64::consts::FRAC_PI_2).abs() < 1e-5);
    }

    #[test]
    fn monotone_has_none() {
        let tr = sampled(|t| (-t).exp(), 10.0, 1000);
        assert!(detect_events(&tr, &bare_frame(), &Thresholds::default()).is_empty());
    }

    #[test]
    fn synthetic_mmo_pattern() {
        // folds at 0 and 2: LAOs between -0.5 and 2.5, SAOs of size 0.1 below
        let frame = bare_frame();
        let period = 10.0;
        let f = |t: f64| {
            let ph = t % period;
            if ph < 2.0 {
                1.0 - 1.5 * (std::f64::consts::PI * ph).cos()
            } else {
                -0.5 + 0.05 * (1.0 - (std::f64::consts::PI * (ph - 2.0)).cos())
            }
        };
        let tr = sampled(f, 60.0, 60000);
        let th = Thresholds::default();
        let ev = detect_events(&tr, &frame, &th);
        let split = split_epochs(&ev, &tr, &frame, &th);
        assert!(!split.segments.is_empty());
        for s in &split.segments {
            assert_eq!(s.position, Position::Below);
            assert_eq!(s.lao, 1);
            assert_eq!(s.sao, 4, "{split:?}");
        }
    }

    #[test]
    fn render_examples() {
        let s = [
            FareySegment {
                lao: 1,
                sao: 3,
                position: Position::Above,
            },
            FareySegment {
                lao: 1,
                sao: 2,
                position: Position::Below,
            },
        ];
        assert_eq!(farey_string(&s), "1^3 1_2");
        let r = [FareySegment {
            lao: 4,
            sao: 0,
            position: Position::Above,
        }];
        assert_eq!(farey_string(&r), "{L^0}");
        assert_eq!(
            parse_farey("2_{5} 1^3").unwrap()[0],
            FareySegment {
                lao: 2,
                sao: 5,
                position: Position::Below
            }
        );
        assert!(parse_farey("2x3").is_err());
    }

    #[test]
    fn label_round_trip_and_mirror() {
        for l in ["SteadyState", "MmoDouble", "MmoSingleAbove", "Exotic"] {
            assert_eq!(l.parse::<RegimeLabel>().unwrap().as_str(), l);
        }
        assert_eq!(RegimeLabel::MmoSingleAbove.mirrored(), RegimeLabel::MmoSingleBelow);
        assert_eq!(RegimeLabel::MmoDouble.mirrored(), RegimeLabel::MmoDouble);
    }

    #[test]
    fn hh_fold_reference_brackets_rest() {
        let (lo, hi) = hh_fold_reference(&HHParams::default()).unwrap();
        assert!(-0.6 < lo && lo < hi && hi < 0.0, "{lo} {hi}");
    }

    proptest! {
        #[test]
        fn farey_round_trip(v in proptest::collection::vec((0u32..20, 1u32..30, any::<bool>()), 1..8)) {
            let segs: Vec<_> = v.into_iter().map(|(l, s, up)| FareySegment {
                lao: l,
                sao: s,
                position: if up { Position::Above } else { Position::Below },
            }).collect();
            prop_assert_eq!(parse_farey(&farey_string(&segs)).unwrap(), segs);
        }
    }
}
