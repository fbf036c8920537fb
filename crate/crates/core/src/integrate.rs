//! Adaptive integration of the three-timescale systems.
//!
//! The workhorse is the Dormand–Prince 5(4) pair with PI step control and its
//! quartic dense output. If the explicit step collapses onto `min_step` for
//! 20 consecutive attempts, or stays pinned at its stability bound for 15
//! accepted steps, the integrator switches to a two-stage L-stable
//! Rosenbrock scheme using the analytic Jacobian. It switches back once the
//! implicit steps are limited by accuracy rather than stiffness.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IntegrationFailure, Result};
use crate::model::{State3, System, VectorField};
use crate::roots::brent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Record every `stride`-th accepted step (the final state is always kept).
    pub stride: usize,
    /// States before this time are not recorded; events still are.
    pub record_from: f64,
    /// Planes `x = c` whose crossings are reported as events.
    pub sections: Vec<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            min_step: 1e-12,
            max_steps: 20_000_000,
            stride: 1,
            record_from: f64::NEG_INFINITY,
            sections: Vec::new(),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            return Err(Error::InvalidParameter("need 0 < min_step <= max_step".into()));
        }
        if self.stride == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParameter("stride and max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Local maximum of the first state variable.
    Max,
    /// Local minimum of the first state variable.
    Min,
    /// Crossing of a section `x = c` with `x` increasing.
    Up,
    /// Crossing of a section `x = c` with `x` decreasing.
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub state: State3,
    /// Index into `sections` for crossings.
    pub section: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub implicit_steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<State3>,
    /// Size of the step that produced each recorded state (0 for the initial one).
    pub steps: Vec<f64>,
    pub events: Vec<Event>,
    pub stats: IntegratorStats,
    pub labels: [String; 3],
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => (0.0, 0.0),
        }
    }

    pub fn last_state(&self) -> Option<State3> {
        self.states.last().copied()
    }

    pub fn extrema(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Max | EventKind::Min))
    }
}

type V3 = [f64; 3];

#[inline]
fn axpy(y: &V3, h: f64, terms: &[(f64, &V3)]) -> V3 {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..3 {
            out[i] += h * c * k[i];
        }
    }
    out
}

// Dormand–Prince tableau; the systems are autonomous so the nodes are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Interpolant over one accepted step.
#[derive(Debug, Clone, Copy)]
enum Dense {
    /// Dormand–Prince continuous extension.
    Quartic { r: [V3; 5] },
    /// Cubic Hermite from end values and slopes.
    Hermite { y0: V3, y1: V3, f0: V3, f1: V3 },
}

#[derive(Debug, Clone, Copy)]
struct StepSegment {
    t0: f64,
    h: f64,
    dense: Dense,
}

impl StepSegment {
    fn eval(&self, t: f64) -> V3 {
        let th = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        match &self.dense {
            Dense::Quartic { r } => {
                let mut out = [0.0; 3];
                for i in 0..3 {
                    out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
                }
                out
            }
            Dense::Hermite { y0, y1, f0, f1 } => {
                let h = self.h;
                let h00 = (1.0 + 2.0 * th) * th1 * th1;
                let h10 = th * th1 * th1;
                let h01 = th * th * (3.0 - 2.0 * th);
                let h11 = -th * th * th1;
                let mut out = [0.0; 3];
                for i in 0..3 {
                    out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
                }
                out
            }
        }
    }
}

fn error_norm(y0: &V3, y1: &V3, err: &V3, cfg: &IntegratorConfig) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        s += (err[i] / sc).powi(2);
    }
    (s / 3.0).sqrt()
}

fn finite(v: &V3) -> bool {
    v.iter().all(|x| x.is_finite())
}

struct Integrator<'a> {
    sys: &'a System,
    cfg: &'a IntegratorConfig,
    stats: IntegratorStats,
}

impl Integrator<'_> {
    fn f(&mut self, y: &V3) -> V3 {
        self.stats.evaluations += 1;
        self.sys.eval(y)
    }

    /// One Dormand–Prince attempt. Returns `(y1, f1, err, dense, h rho)` where
    /// `rho` estimates the dominant eigenvalue modulus along the step.
    fn dp_step(&mut self, y: &V3, k1: &V3, h: f64) -> (V3, V3, f64, Dense, f64) {
        let k2 = self.f(&axpy(y, h, &[(A21, k1)]));
        let k3 = self.f(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
        let k4 = self.f(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = self.f(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let y6 = axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let k6 = self.f(&y6);
        let y1 = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = self.f(&y1);
        let e = axpy(
            &[0.0; 3],
            h,
            &[(E1, k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );
        let err = if finite(&y1) && finite(&k7) {
            error_norm(y, &y1, &e, self.cfg)
        } else {
            f64::INFINITY
        };
        let mut r = [[0.0; 3]; 5];
        for i in 0..3 {
            let dy = y1[i] - y[i];
            let bsp = h * k1[i] - dy;
            r[0][i] = y[i];
            r[1][i] = dy;
            r[2][i] = bsp;
            r[3][i] = dy - h * k7[i] - bsp;
            r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..3 {
            num += (k7[i] - k6[i]).powi(2);
            den += (y1[i] - y6[i]).powi(2);
        }
        let hrho = if den > 0.0 { h * (num / den).sqrt() } else { 0.0 };
        (y1, k7, err, Dense::Quartic { r }, hrho)
    }

    /// One ROS2 attempt. Returns `(y1, f1, err)`.
    fn ros2_step(&mut self, y: &V3, f0: &V3, h: f64) -> Option<(V3, V3, f64)> {
        const GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
        let j = Matrix3::from_fn(|r, c| self.sys.jacobian(y)[r][c]);
        let w = Matrix3::identity() - j * (GAMMA * h);
        let lu = w.lu();
        let k1 = lu.solve(&Vector3::from(*f0))?;
        let k1a = [k1[0], k1[1], k1[2]];
        let f1 = self.f(&axpy(y, h, &[(1.0, &k1a)]));
        let rhs = Vector3::from(f1) - k1 * 2.0;
        let k2 = lu.solve(&rhs)?;
        let k2a = [k2[0], k2[1], k2[2]];
        let y1 = axpy(y, h, &[(1.5, &k1a), (0.5, &k2a)]);
        let e = axpy(&[0.0; 3], h, &[(0.5, &k1a), (0.5, &k2a)]);
        let fy1 = self.f(&y1);
        let err = if finite(&y1) && finite(&fy1) {
            error_norm(y, &y1, &e, self.cfg)
        } else {
            f64::INFINITY
        };
        Some((y1, fy1, err))
    }
}

fn initial_step(sys: &System, y: &V3, f0: &V3, cfg: &IntegratorConfig) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..3 {
        let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / 3.0).sqrt(), (d1 / 3.0).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let f1 = sys.eval(&y1);
    let mut d2 = 0.0;
    for i in 0..3 {
        let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs();
        d2 += ((f1[i] - f0[i]) / sc).powi(2);
    }
    let d2 = (d2 / 3.0).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step).max(cfg.min_step)
}

#[allow(clippy::too_many_arguments)]
fn locate_events(
    seg: &StepSegment,
    f0: &V3,
    f1: &V3,
    y0: &V3,
    y1: &V3,
    sys: &System,
    cfg: &IntegratorConfig,
    out: &mut Vec<Event>,
) {
    let t1 = seg.t0 + seg.h;
    let mut found: Vec<Event> = Vec::new();
    if f0[0] != 0.0 && f1[0] != 0.0 && f0[0].signum() != f1[0].signum() {
        let g = |t: f64| sys.eval(&seg.eval(t))[0];
        let t = brent(g, seg.t0, t1, 1e-12).unwrap_or(0.5 * (seg.t0 + t1));
        let kind = if f0[0] > 0.0 { EventKind::Max } else { EventKind::Min };
        found.push(Event {
            t,
            kind,
            state: State3::from_array(seg.eval(t)),
            section: None,
        });
    } else if f1[0] == 0.0 && f0[0] != 0.0 {
        let kind = if f0[0] > 0.0 { EventKind::Max } else { EventKind::Min };
        found.push(Event {
            t: t1,
            kind,
            state: State3::from_array(*y1),
            section: None,
        });
    }
    for (idx, &c) in cfg.sections.iter().enumerate() {
        let (a, b) = (y0[0] - c, y1[0] - c);
        if a != 0.0 && b.signum() != a.signum() {
            let t = brent(|t: f64| seg.eval(t)[0] - c, seg.t0, t1, 1e-12).unwrap_or(t1);
            let kind = if a < 0.0 { EventKind::Up } else { EventKind::Down };
            found.push(Event {
                t,
                kind,
                state: State3::from_array(seg.eval(t)),
                section: Some(idx),
            });
        }
    }
    found.sort_by(|a, b| a.t.total_cmp(&b.t));
    out.extend(found);
}

/// Integrates `sys` from `s0` over `t_span`.
pub fn integrate(sys: &System, s0: State3, t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory> {
    sys.validate_for_simulation()?;
    cfg.validate()?;
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::InvalidParameter("t_span must be increasing".into()));
    }
    let mut y = s0.checked()?.to_array();
    let labels = sys.state_labels().map(String::from);
    let mut traj = Trajectory {
        labels,
        ..Default::default()
    };
    let mut it = Integrator {
        sys,
        cfg,
        stats: IntegratorStats::default(),
    };
    let fail = |reason, t, y: V3| Error::Integration {
        reason,
        t,
        last: State3::from_array(y),
    };

    let mut f0 = it.f(&y);
    if !finite(&f0) {
        return Err(fail(IntegrationFailure::NonFinite, t0, y));
    }
    if t0 >= cfg.record_from {
        traj.t.push(t0);
        traj.states.push(State3::from_array(y));
        traj.steps.push(0.0);
    }
    let mut t = t0;
    let mut h = initial_step(sys, &y, &f0, cfg);
    let mut facold: f64 = 1e-4;
    let mut implicit = false;
    let mut floor_hits = 0usize;
    let mut stiff = 0usize;
    let mut calm = 0usize;
    let mut since_record = 0usize;
    let mut last_h = 0.0;
    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;

    while t < t_end {
        if it.stats.accepted + it.stats.rejected >= cfg.max_steps {
            return Err(fail(IntegrationFailure::MaxSteps, t, y));
        }
        let mut step = h.min(cfg.max_step).max(cfg.min_step);
        let last = t + step >= t_end;
        if last {
            step = t_end - t;
        }
        let (y1, f1, err, dense, hrho) = if implicit {
            match it.ros2_step(&y, &f0, step) {
                Some((y1, f1, err)) => (y1, f1, err, Dense::Hermite { y0: y, y1, f0, f1 }, 0.0),
                None => (
                    y,
                    f0,
                    f64::INFINITY,
                    Dense::Hermite {
                        y0: y,
                        y1: y,
                        f0,
                        f1: f0,
                    },
                    0.0,
                ),
            }
        } else {
            it.dp_step(&y, &f0, step)
        };

        if err <= 1.0 {
            let seg = StepSegment { t0: t, h: step, dense };
            locate_events(&seg, &f0, &f1, &y, &y1, sys, cfg, &mut traj.events);
            t = if last { t_end } else { t + step };
            y = y1;
            f0 = f1;
            last_h = step;
            it.stats.accepted += 1;
            if implicit {
                it.stats.implicit_steps += 1;
            }
            since_record += 1;
            if t >= cfg.record_from && (since_record >= cfg.stride || t >= t_end) {
                traj.t.push(t);
                traj.states.push(State3::from_array(y));
                traj.steps.push(step);
                since_record = 0;
            }
            let fac = if implicit {
                (err.max(1e-10)).powf(-0.5) * SAFE
            } else {
                let fac11 = err.max(1e-10).powf(0.2 - BETA * 0.75);
                let fac = (fac11 / facold.powf(BETA)) / SAFE;
                facold = err.max(1e-4);
                1.0 / fac
            };
            h = step * fac.clamp(0.2, 10.0);
            floor_hits = 0;
            // switch on sustained stability-limited explicit steps and back
            // once the implicit step is accuracy-limited below the explicit
            // stability bound
            if implicit {
                let rho = spectral_radius(&sys.jacobian(&y));
                if h * rho < DP_STABILITY {
                    calm += 1;
                    if calm >= 5 {
                        implicit = false;
                        calm = 0;
                        stiff = 0;
                        facold = 1e-4;
                    }
                } else {
                    calm = 0;
                }
            } else if hrho > DP_STABILITY {
                stiff += 1;
                calm = 0;
                if stiff >= 15 {
                    implicit = true;
                    stiff = 0;
                }
            } else {
                calm += 1;
                if calm >= 6 {
                    stiff = 0;
                }
            }
        } else {
            it.stats.rejected += 1;
            let fac = if implicit {
                SAFE * err.powf(-0.5)
            } else {
                SAFE * err.powf(-0.2)
            };
            let fac = if fac.is_finite() { fac.clamp(0.1, 1.0) } else { 0.1 };
            h = step * fac;
        }
        if !finite(&y) {
            return Err(fail(IntegrationFailure::NonFinite, t, y));
        }
        if h < cfg.min_step {
            floor_hits += 1;
            if floor_hits >= 20 {
                if implicit {
                    return Err(fail(IntegrationFailure::StepSizeUnderflow, t, y));
                }
                implicit = true;
                floor_hits = 0;
            }
        }
    }
    // make sure the final state is recorded
    if traj.t.last().copied() != Some(t) && t >= cfg.record_from {
        traj.t.push(t);
        traj.states.push(State3::from_array(y));
        traj.steps.push(last_h);
    }
    traj.stats = it.stats;
    Ok(traj)
}

const DP_STABILITY: f64 = 3.25;

fn spectral_radius(j: &[[f64; 3]; 3]) -> f64 {
    eigenvalues3(j).iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// Default starting point: `(-1, F(-1), 0.1)` in normal-form coordinates,
/// mapped to the coordinates of the given system.
pub fn default_initial_state(sys: &System) -> State3 {
    match sys {
        System::NormalForm(p) => State3::new(-1.0, p.cubic().eval(-1.0), 0.1),
        System::Koper(kp) => {
            let f = |x: f64| 3.0 / kp.k.abs() * x * x - x * x * x / kp.k.abs();
            kp.from_normal_state(State3::new(-1.0, f(-1.0), 0.1))
        }
        System::KoperSymmetric(_) => State3::new(-2.0, -2.0, 0.1),
        System::HodgkinHuxley(_) => State3::new(-0.65, 0.3, 0.6),
    }
}

/// Default horizon `50 / delta`.
pub fn default_horizon(sys: &System) -> f64 {
    50.0 / sys.delta()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub location: State3,
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
    pub residual: f64,
    pub iterations: usize,
}

fn sup(v: &V3) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Eigenvalues of a real 3x3 matrix, sorted by real part (descending).
pub fn eigenvalues3(m: &[[f64; 3]; 3]) -> [Complex64; 3] {
    let a = Matrix3::from_fn(|r, c| m[r][c]);
    let ev = a.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    out
}

/// Damped Newton iteration for `rhs = 0` from `guess`.
pub fn find_equilibrium(sys: &System, guess: State3) -> Result<EquilibriumReport> {
    const TOL: f64 = 1e-12;
    let mut x = guess.checked()?.to_array();
    let mut f = sys.eval(&x);
    let mut r = sup(&f);
    let mut iterations = 0;
    while iterations < 200 && !(r <= TOL) {
        iterations += 1;
        let j = Matrix3::from_fn(|a, b| sys.jacobian(&x)[a][b]);
        let Some(dx) = j.lu().solve(&(-Vector3::from(f))) else {
            return Err(Error::NewtonDiverged { residual: r });
        };
        let mut lam = 1.0;
        loop {
            let trial = [x[0] + lam * dx[0], x[1] + lam * dx[1], x[2] + lam * dx[2]];
            let ft = sys.eval(&trial);
            let rt = sup(&ft);
            if rt.is_finite() && (rt < r || lam < 1e-6) {
                x = trial;
                f = ft;
                r = rt;
                break;
            }
            lam *= 0.5;
            if lam < 1e-10 {
                return Err(Error::NewtonDiverged { residual: r });
            }
        }
        if !r.is_finite() {
            return Err(Error::NewtonDiverged { residual: r });
        }
    }
    if !(r <= TOL) {
        return Err(Error::NewtonDiverged { residual: r });
    }
    let eigenvalues = eigenvalues3(&sys.jacobian(&x));
    let lead = eigenvalues[0].re;
    let scale = eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1e-300);
    let stability = if lead.abs() <= 1e-10 * scale {
        Stability::Marginal
    } else if lead < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    Ok(EquilibriumReport {
        location: State3::from_array(x),
        eigenvalues,
        stability,
        residual: r,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strip {
    Fraction(f64),
    Time(f64),
}

impl Default for Strip {
    fn default() -> Self {
        Strip::Fraction(0.3)
    }
}

/// Drops the initial part of a trajectory (by fraction of its span or
/// absolute duration).
pub fn transient_strip(traj: &Trajectory, strip: Strip) -> Result<Trajectory> {
    let (a, b) = traj.span();
    let cut = match strip {
        Strip::Fraction(f) if f <= 0.0 => return Ok(traj.clone()),
        Strip::Time(d) if d <= 0.0 => return Ok(traj.clone()),
        Strip::Fraction(f) if f >= 1.0 => return Err(Error::EmptyTail),
        Strip::Fraction(f) => a + f * (b - a),
        Strip::Time(d) => a + d,
    };
    let i = traj.t.partition_point(|&t| t < cut);
    if traj.len() - i < 2 {
        return Err(Error::EmptyTail);
    }
    Ok(Trajectory {
        t: traj.t[i..].to_vec(),
        states: traj.states[i..].to_vec(),
        steps: traj.steps[i..].to_vec(),
        events: traj.events.iter().filter(|e| e.t >= cut).copied().collect(),
        stats: traj.stats,
        labels: traj.labels.clone(),
    })
}

/// Writes `t, <labels>, step` rows.
pub fn write_csv<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let [a, b, c] = &traj.labels;
    let header = |s: &String, d: &'static str| if s.is_empty() { d.to_string() } else { s.clone() };
    wr.write_record([
        "t".to_string(),
        header(a, "x"),
        header(b, "y"),
        header(c, "z"),
        "step".to_string(),
    ])
    .map_err(io)?;
    for ((t, s), h) in traj.t.iter().zip(&traj.states).zip(&traj.steps) {
        wr.write_record([t, &s.x, &s.y, &s.z, h].map(|v| format!("{v:e}")))
            .map_err(io)?;
    }
    wr.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Reads a trajectory written by [`write_csv`]. The `step` column is optional.
pub fn read_csv<R: Read>(r: R) -> Result<Trajectory> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.len() < 4 || &headers[0] != "t" {
        return Err(Error::Parse("expected columns t, x, y, z[, step]".into()));
    }
    let mut traj = Trajectory {
        labels: [headers[1].to_string(), headers[2].to_string(), headers[3].to_string()],
        ..Default::default()
    };
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("row {}: missing column {i}", line + 2)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
        };
        let t = num(0)?;
        if let Some(&prev) = traj.t.last() {
            if !(t > prev) {
                return Err(Error::Parse(format!("row {}: time not increasing", line + 2)));
            }
        }
        let s = State3::new(num(1)?, num(2)?, num(3)?);
        if !(s.is_finite() && t.is_finite()) {
            return Err(Error::Parse(format!("row {}: non-finite value", line + 2)));
        }
        traj.t.push(t);
        traj.states.push(s);
        traj.steps.push(if rec.len() > 4 { num(4)? } else { 0.0 });
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{koper_to_normal_form, KoperParams, NormalFormParams, PhiSpec};

    fn koper(k: f64, lambda: f64) -> System {
        System::Koper(KoperParams::new(k, lambda, 0.01, 0.01))
    }

    fn harmonic() -> System {
        // eps x' = -y + f2 x^2 + f3 x^3 is not linear, so build a near-linear normal form instead
        System::NormalForm(NormalFormParams {
            f2: 1e-9,
            f3: -1e-9,
            alpha: 1.0,
            beta: 0.0,
            mu: 0.0,
            eps: 1.0,
            delta: 1e-300,
            phi: PhiSpec::zero(),
        })
    }

    #[test]
    fn oscillator_accuracy_and_extrema() {
        // x' = -y, y' = x: x = cos t
        let sys = harmonic();
        let tr = integrate(
            &sys,
            State3::new(1.0, 0.0, 0.0),
            (0.0, 4.0 * std::f64::consts::PI - 0.1),
            &Default::default(),
        )
        .unwrap();
        let s = tr.last_state().unwrap();
        assert!(
            (s.x - (0.1f64).cos()).abs() < 1e-6 && (s.y + (0.1f64).sin()).abs() < 1e-6,
            "{s}"
        );
        let ext: Vec<_> = tr.extrema().collect();
        // minima at pi, 3 pi and a maximum at 2 pi
        assert_eq!(ext.len(), 3, "{ext:?}");
        assert!((ext[0].t - std::f64::consts::PI).abs() < 1e-8);
        assert_eq!(ext[0].kind, EventKind::Min);
        assert!((ext[1].t - 2.0 * std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn time_strictly_increasing_and_finite() {
        let tr = integrate(
            &koper(-4.4, 1.5),
            default_initial_state(&koper(-4.4, 1.5)),
            (0.0, 300.0),
            &Default::default(),
        )
        .unwrap();
        assert!(tr.t.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.states.iter().all(|s| s.is_finite()));
        assert_eq!(tr.t.len(), tr.steps.len());
    }

    #[test]
    fn sections_are_reported() {
        let sys = harmonic();
        let cfg = IntegratorConfig {
            sections: vec![0.5],
            ..Default::default()
        };
        let tr = integrate(
            &sys,
            State3::new(1.0, 0.0, 0.0),
            (0.0, 2.0 * std::f64::consts::PI),
            &cfg,
        )
        .unwrap();
        let cr: Vec<_> = tr.events.iter().filter(|e| e.section == Some(0)).collect();
        assert_eq!(cr.len(), 2);
        assert_eq!(cr[0].kind, EventKind::Down);
        assert!((cr[0].t - std::f64::consts::FRAC_PI_3).abs() < 1e-8);
    }

    #[test]
    fn steady_state_at_fig11a() {
        let sys = koper(-2.2, 1.5);
        let tr = integrate(
            &sys,
            default_initial_state(&sys),
            (0.0, default_horizon(&sys)),
            &Default::default(),
        )
        .unwrap();
        let last = tr.last_state().unwrap();
        let v = sys.rhs(last).unwrap();
        let speed = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(speed <= 1e-8, "terminal speed {speed}");
        let eq = find_equilibrium(&sys, last).unwrap();
        assert_eq!(eq.stability, Stability::Stable);
        assert!(eq.location.sup_distance(&last) < 1e-6);
    }

    #[test]
    fn equilibrium_stays_put() {
        let p = koper_to_normal_form(&KoperParams::new(-4.0, 0.0, 0.01, 0.01))
            .unwrap()
            .with_phi(PhiSpec::zero())
            .with_mu(0.0);
        let sys = System::NormalForm(p);
        let tr = integrate(&sys, State3::default(), (0.0, 100.0), &Default::default()).unwrap();
        assert_eq!(tr.last_state().unwrap(), State3::default());
    }

    #[test]
    fn origin_equilibrium_for_normal_form() {
        let p = koper_to_normal_form(&KoperParams::new(-4.4, 0.0, 0.01, 0.01))
            .unwrap()
            .with_mu(0.0);
        let eq = find_equilibrium(&System::NormalForm(p), State3::new(0.1, 0.05, -0.1)).unwrap();
        assert!(eq.location.sup_distance(&State3::default()) < 1e-12);
        assert!(eq.residual <= 1e-12);
    }

    #[test]
    fn hopf_locus_equilibrium() {
        let k = -4.4;
        let sys = System::Koper(KoperParams::new(k, -(2.0 + k), 0.01, 0.01));
        let eq = find_equilibrium(&sys, State3::new(-1.0, 0.0, 0.0)).unwrap();
        let crit = eq
            .eigenvalues
            .iter()
            .filter(|e| e.im != 0.0)
            .map(|e| e.re.abs())
            .fold(f64::INFINITY, f64::min);
        // O(eps) compared with the fast eigenvalue of size 1/eps
        assert!(crit < 1.0, "{:?}", eq.eigenvalues);
    }

    #[test]
    fn newton_failure_reports_residual() {
        // HH voltage far outside the physiological range with a singular Jacobian direction
        let e = find_equilibrium(&harmonic(), State3::new(1.0, 1.0, 1.0));
        // z' = 0 identically, so any z is an equilibrium and Newton faces a singular matrix
        assert!(matches!(e, Err(Error::NewtonDiverged { .. })));
    }

    #[test]
    fn self_convergence() {
        let sys = koper(-4.4, 1.5);
        let s0 = default_initial_state(&sys);
        let a = integrate(&sys, s0, (0.0, 200.0), &Default::default()).unwrap();
        let cfg = IntegratorConfig {
            rel_tol: 5e-9,
            abs_tol: 5e-11,
            ..Default::default()
        };
        let b = integrate(&sys, s0, (0.0, 200.0), &cfg).unwrap();
        let d = a.last_state().unwrap().sup_distance(&b.last_state().unwrap());
        assert!(d <= 10.0 * 1e-8 * 50.0, "{d}");
    }

    #[test]
    fn implicit_fallback_on_step_floor() {
        // the explicit stability bound sits far below min_step, so the floor trigger fires
        let mut p = koper_to_normal_form(&KoperParams::new(-4.4, 1.5, 0.01, 0.01)).unwrap();
        p.eps = 1e-5;
        let sys = System::NormalForm(p);
        let cfg = IntegratorConfig {
            min_step: 1e-3,
            rel_tol: 1e-4,
            abs_tol: 1e-6,
            ..Default::default()
        };
        // stops short of the fold, where the jump is far shorter than min_step
        let tr = integrate(&sys, default_initial_state(&sys), (0.0, 0.5), &cfg).unwrap();
        assert!(tr.stats.implicit_steps > 0);
        assert!(tr.states.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn stiffness_detection_switches_and_stays_accurate() {
        let mut p = koper_to_normal_form(&KoperParams::new(-4.4, 1.5, 0.01, 0.01)).unwrap();
        p.eps = 1e-5;
        let sys = System::NormalForm(p);
        let s0 = default_initial_state(&sys);
        let a = integrate(&sys, s0, (0.0, 5.0), &Default::default()).unwrap();
        assert!(a.stats.implicit_steps > 0);
        let cfg = IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let b = integrate(&sys, s0, (0.0, 5.0), &cfg).unwrap();
        let d = a.last_state().unwrap().sup_distance(&b.last_state().unwrap());
        assert!(d < 1e-5, "{d}");
    }

    #[test]
    fn max_steps_flagged_with_last_state() {
        let sys = koper(-4.4, 1.5);
        let cfg = IntegratorConfig {
            max_steps: 50,
            ..Default::default()
        };
        match integrate(&sys, default_initial_state(&sys), (0.0, 1000.0), &cfg) {
            Err(Error::Integration {
                reason: IntegrationFailure::MaxSteps,
                last,
                t,
            }) => {
                assert!(last.is_finite() && t > 0.0)
            }
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn strip_cases() {
        let sys = harmonic();
        let tr = integrate(&sys, State3::new(1.0, 0.0, 0.0), (0.0, 10.0), &Default::default()).unwrap();
        assert_eq!(transient_strip(&tr, Strip::Fraction(0.0)).unwrap(), tr);
        assert_eq!(
            transient_strip(&tr, Strip::Fraction(1.0)).unwrap_err(),
            Error::EmptyTail
        );
        let s = transient_strip(&tr, Strip::default()).unwrap();
        assert!(s.t[0] >= 3.0 && s.t[0] < 3.5);
        assert_eq!(s.span().1, 10.0);
    }

    #[test]
    fn csv_round_trip() {
        let sys = koper(-4.4, 1.5);
        let tr = integrate(&sys, default_initial_state(&sys), (0.0, 5.0), &Default::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,z,step\n"));
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.t, tr.t);
        assert_eq!(back.states, tr.states);
    }

    #[test]
    fn deterministic() {
        let sys = koper(-3.6, 1.5);
        let s0 = default_initial_state(&sys);
        let a = integrate(&sys, s0, (0.0, 100.0), &Default::default()).unwrap();
        let b = integrate(&sys, s0, (0.0, 100.0), &Default::default()).unwrap();
        assert_eq!(a, b);
    }
}
