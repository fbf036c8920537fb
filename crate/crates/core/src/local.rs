//! Local asymptotics near the fold lines: eigenvalues along `M2`, the
//! delayed-Hopf point, degenerate nodes, the canard plane and the entry–exit map.
//!
//! Everything is computed near `q-`. Objects near `q+` come from the same
//! code applied to the reflected system (see [`NormalFormParams::reflected`]).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{m2_fold_points, CubicG, Side};
use crate::model::{KoperParams, NormalFormParams, State3};
use crate::quad;
use crate::roots::brent;

/// Eigenvalues of the fast-intermediate linearisation along `M2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub nu1: Complex64,
    pub nu2: Complex64,
    pub trace: f64,
    pub det: f64,
}

impl EigenPair {
    pub fn is_focal(&self) -> bool {
        self.nu1.im != 0.0
    }
}

#[inline]
fn trace_at(p: &NormalFormParams, x: f64) -> f64 {
    p.beta * p.eps + p.cubic().deriv(x)
}

#[inline]
fn det_at(p: &NormalFormParams, x: f64) -> f64 {
    p.eps * (p.alpha + p.beta * p.cubic().deriv(x))
}

#[inline]
fn disc_at(p: &NormalFormParams, x: f64) -> f64 {
    let t = trace_at(p, x);
    t * t - 4.0 * det_at(p, x)
}

/// `nu_{1,2} = (T ± sqrt(T^2 - 4 det)) / 2` with the principal square root,
/// so `nu1` is the `+` branch everywhere. Its real part is continuous in `x`.
pub fn jacobian_eigenvalues(p: &NormalFormParams, x: f64) -> EigenPair {
    let t = trace_at(p, x);
    let d = det_at(p, x);
    let disc = t * t - 4.0 * d;
    let sq = Complex64::new(disc, 0.0).sqrt();
    EigenPair {
        nu1: (Complex64::new(t, 0.0) + sq) / 2.0,
        nu2: (Complex64::new(t, 0.0) - sq) / 2.0,
        trace: t,
        det: d,
    }
}

#[inline]
fn re_nu1(p: &NormalFormParams, x: f64) -> f64 {
    let t = trace_at(p, x);
    let disc = t * t - 4.0 * det_at(p, x);
    if disc > 0.0 {
        0.5 * (t + disc.sqrt())
    } else {
        0.5 * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkMode {
    Asymptotic,
    Numeric,
}

/// Open interval; `None` ends are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Interval {
    pub fn width(&self) -> f64 {
        match (self.lo, self.hi) {
            (Some(a), Some(b)) => b - a,
            _ => f64::INFINITY,
        }
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo.is_none_or(|a| z > a) && self.hi.is_none_or(|b| z < b)
    }
}

/// Landmarks on one attracting outer branch of `M2`.
///
/// Coordinates are reported in the frame of the given system. On the plus
/// side the slow flow runs towards decreasing `z`, so the intervals appear
/// mirrored: `i_nod` is unbounded above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLandmarks {
    pub side: Side,
    pub mode: LandmarkMode,
    pub x_dh: f64,
    pub y_dh: f64,
    pub z_dh: f64,
    pub x_dn_minus: f64,
    pub z_dn_minus: f64,
    pub x_dn_plus: f64,
    pub z_dn_plus: f64,
    pub z_cn: f64,
    pub i_nod: Interval,
    pub i_spir: Interval,
    pub i_can: Interval,
}

/// Coefficient `c` in `z_CN = z_DH + c eps`.
pub fn canard_coefficient(p: &NormalFormParams) -> f64 {
    let (f2, f3, a, b) = (p.f2, p.f3, p.alpha, p.beta);
    a * b * (5.0 * f2 - 3.0 * (1.0 - a * f3)) / (4.0 * (1.0 + f2) * f2)
}

struct MinusSide {
    x_dh: f64,
    y_dh: f64,
    z_dh: f64,
    x_dn: [f64; 2],
    z_dn: [f64; 2],
    z_cn: f64,
}

fn asymptotic_minus(p: &NormalFormParams) -> MinusSide {
    let (f2, a, b, e) = (p.f2, p.alpha, p.beta, p.eps);
    let x_dh = -b / (2.0 * f2) * e;
    let z_dh = -a * b / (2.0 * f2) * e;
    let s = a.max(0.0).sqrt() / f2 * e.sqrt();
    let x_dn = [-(s + b / (2.0 * f2) * e), s + b / (2.0 * f2) * e];
    let zs = a.max(0.0).powf(1.5) / f2 * e.sqrt();
    let z_dn = [-zs + a * b / f2 * 1.5 * e, zs + a * b / f2 * 0.5 * e];
    MinusSide {
        x_dh,
        y_dh: b * b / (4.0 * f2) * e * e,
        z_dh,
        x_dn,
        z_dn,
        z_cn: z_dh + canard_coefficient(p) * e,
    }
}

/// Root of the trace on `[0, 4 x_DH(asymptotic)]`.
pub fn numeric_x_dh(p: &NormalFormParams) -> Result<f64> {
    let guess = -p.beta / (2.0 * p.f2) * p.eps;
    if guess == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = if guess > 0.0 {
        (0.0, 4.0 * guess)
    } else {
        (4.0 * guess, 0.0)
    };
    brent(|x| trace_at(p, x), a, b, 1e-16)
        .map_err(|e| Error::Bracketing(format!("Hopf point: trace has no sign change on [{a}, {b}] ({e})")))
}

fn numeric_minus(p: &NormalFormParams) -> Result<MinusSide> {
    let asym = asymptotic_minus(p);
    let g = CubicG::of(p);
    let f = p.cubic();
    let x_dh = numeric_x_dh(p)?;
    let s = (p.alpha.max(0.0) * p.eps).sqrt() / p.f2;
    if s == 0.0 {
        return Err(Error::Bracketing("degenerate nodes need alpha, eps > 0".into()));
    }
    let dn_lo = brent(|x| disc_at(p, x), x_dh - 4.0 * s, x_dh, 1e-15)
        .map_err(|e| Error::Bracketing(format!("lower degenerate node: {e}")))?;
    let dn_hi = brent(|x| disc_at(p, x), x_dh, x_dh + 4.0 * s, 1e-15)
        .map_err(|e| Error::Bracketing(format!("upper degenerate node: {e}")))?;
    let z_dh = g.eval(x_dh);
    Ok(MinusSide {
        x_dh,
        y_dh: f.eval(x_dh),
        z_dh,
        x_dn: [dn_lo, dn_hi],
        z_dn: [g.eval(dn_lo), g.eval(dn_hi)],
        z_cn: z_dh + (asym.z_cn - asym.z_dh),
    })
}

fn minus_side(p: &NormalFormParams, mode: LandmarkMode) -> Result<MinusSide> {
    if !(p.eps > 0.0) {
        return Err(Error::InvalidParameter("landmarks need eps > 0".into()));
    }
    match mode {
        LandmarkMode::Asymptotic => Ok(asymptotic_minus(p)),
        LandmarkMode::Numeric => numeric_minus(p),
    }
}

fn open(lo: f64, hi: f64) -> Interval {
    Interval {
        lo: Some(lo.min(hi)),
        hi: Some(lo.max(hi)),
    }
}

/// Hopf point, degenerate nodes, canard plane and regime intervals on the
/// attracting branch through `q-` (`side = Minus`) or `q+` (`side = Plus`).
pub fn landmarks(p: &NormalFormParams, side: Side, mode: LandmarkMode) -> Result<LocalLandmarks> {
    match side {
        Side::Minus => {
            let m = minus_side(p, mode)?;
            Ok(LocalLandmarks {
                side,
                mode,
                x_dh: m.x_dh,
                y_dh: m.y_dh,
                z_dh: m.z_dh,
                x_dn_minus: m.x_dn[0],
                z_dn_minus: m.z_dn[0],
                x_dn_plus: m.x_dn[1],
                z_dn_plus: m.z_dn[1],
                z_cn: m.z_cn,
                i_nod: Interval {
                    lo: None,
                    hi: Some(m.z_dn[0]),
                },
                i_spir: open(m.z_dn[0], m.z_dh),
                i_can: open(m.z_dh, m.z_cn),
            })
        }
        Side::Plus => {
            let r = p.reflected();
            let m = minus_side(&r.params, mode)?;
            let mut y_dh = r.y_l - m.y_dh;
            if mode == LandmarkMode::Numeric {
                y_dh = p.cubic().eval(r.map_x(m.x_dh));
            }
            let zdn0 = r.map_z(m.z_dn[0]);
            let zdh = r.map_z(m.z_dh);
            Ok(LocalLandmarks {
                side,
                mode,
                x_dh: r.map_x(m.x_dh),
                y_dh,
                z_dh: zdh,
                x_dn_minus: r.map_x(m.x_dn[0]),
                z_dn_minus: zdn0,
                x_dn_plus: r.map_x(m.x_dn[1]),
                z_dn_plus: r.map_z(m.z_dn[1]),
                z_cn: r.map_z(m.z_cn),
                i_nod: Interval {
                    lo: Some(zdn0),
                    hi: None,
                },
                i_spir: open(zdn0, zdh),
                i_can: open(zdh, r.map_z(m.z_cn)),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HopfCriticality {
    Supercritical,
    Subcritical,
    Degenerate,
}

/// Sign of `f2 - (3/5)(1 - alpha f3)`.
pub fn hopf_criticality(p: &NormalFormParams) -> HopfCriticality {
    let r = 0.6 * (1.0 - p.alpha * p.f3);
    let d = p.f2 - r;
    if d.abs() <= 1e-12 * p.f2.abs().max(r.abs()).max(1.0) {
        HopfCriticality::Degenerate
    } else if d < 0.0 {
        HopfCriticality::Supercritical
    } else {
        HopfCriticality::Subcritical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShOrder {
    Singular,
    EpsCorrected,
}

/// Slow-parameter value of the singular Hopf bifurcation near `q-` or `q+`.
pub fn mu_sh(p: &NormalFormParams, side: Side, order: ShOrder) -> Result<f64> {
    match side {
        Side::Minus => {
            let at = match order {
                ShOrder::Singular => State3::default(),
                ShOrder::EpsCorrected => {
                    let m = asymptotic_minus(p);
                    State3::new(m.x_dh, m.y_dh, m.z_dh)
                }
            };
            Ok(-p.phi.eval(at.x, at.y, at.z))
        }
        Side::Plus => {
            let r = p.reflected();
            Ok(-mu_sh(&r.params, Side::Minus, order)?)
        }
    }
}

/// Koper singular-Hopf curves to first order in `eps_hat`.
pub fn lambda_sh(kp: &KoperParams, side: Side) -> f64 {
    let minus = -(2.0 + kp.k) + kp.k.abs() / 3.0 * kp.eps_hat;
    match side {
        Side::Minus => minus,
        Side::Plus => -minus,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenBranch {
    /// `nu1`, the `+` root: weak on the attracting side, strong on the repelling side.
    Nu1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryExitResult {
    pub x_in: f64,
    pub x_out: f64,
    pub residual: f64,
    pub branch: EigenBranch,
}

const ENTRY_EXIT_CELLS: usize = 4096;

/// Balances accumulated contraction against expansion along `M2`:
/// finds `x_out` past the Hopf point with
/// `∫_{x_in}^{x_out} Re nu1(x) / (mu + phi(x, F(x), G(x))) dx = 0`.
pub fn entry_exit(p: &NormalFormParams, x_in: f64, side: Side) -> Result<EntryExitResult> {
    match side {
        Side::Minus => entry_exit_minus(p, x_in),
        Side::Plus => {
            let r = p.reflected();
            let res = entry_exit_minus(&r.params, r.map_x(x_in))?;
            Ok(EntryExitResult {
                x_in,
                x_out: r.map_x(res.x_out),
                ..res
            })
        }
    }
}

fn entry_exit_minus(p: &NormalFormParams, x_in: f64) -> Result<EntryExitResult> {
    let x_dh = numeric_x_dh(p)?;
    if (x_in - x_dh).abs() <= 1e-15 * x_dh.abs().max(1.0) {
        return Ok(EntryExitResult {
            x_in,
            x_out: x_dh,
            residual: 0.0,
            branch: EigenBranch::Nu1,
        });
    }
    if x_in > x_dh {
        return Err(Error::InvalidParameter(format!(
            "entry point {x_in} lies past the Hopf point {x_dh}"
        )));
    }
    // the domain ends at the fold of M2 bounding the branch, or at L+ if there is none
    let x_max = p.cubic().x_max();
    let edge = match m2_fold_points(p)? {
        fp if fp.count >= 1 && fp.points[0].x > x_dh => fp.points[0].x,
        _ => x_max,
    };
    let slow = |x: f64| p.slow_flow_on_m2(x);
    let integrand = |x: f64| re_nu1(p, x) / slow(x);

    let h = (edge - x_in) / ENTRY_EXIT_CELLS as f64;
    let mut acc = 0.0;
    let mut a = x_in;
    let mut sa = slow(a);
    if sa == 0.0 {
        return Err(Error::SlowFlowVanishes { at: a });
    }
    for i in 1..=ENTRY_EXIT_CELLS {
        let b = if i == ENTRY_EXIT_CELLS {
            edge
        } else {
            x_in + h * i as f64
        };
        let sb = slow(b);
        if sb == 0.0 || sb.signum() != sa.signum() {
            let at = brent(slow, a, b, 1e-14).unwrap_or(b);
            return Err(Error::SlowFlowVanishes { at });
        }
        let piece = quad::integrate(integrand, a, b, 1e-12, 1e-16)?.value;
        let next = acc + piece;
        if b > x_dh && next.signum() != acc.signum() && acc != 0.0 {
            let base = acc;
            let f = |x: f64| {
                base + quad::integrate(integrand, a, x, 1e-13, 1e-17)
                    .map(|q| q.value)
                    .unwrap_or(f64::NAN)
            };
            let x_out = brent(f, a.max(x_dh), b, 1e-14)?;
            let residual = quad::integrate(integrand, x_in, x_out, 1e-13, 1e-17)?.value.abs();
            return Ok(EntryExitResult {
                x_in,
                x_out,
                residual,
                branch: EigenBranch::Nu1,
            });
        }
        acc = next;
        a = b;
        sa = sb;
    }
    Err(Error::NoBalancedExit)
}

/// Exit estimate for sector-type passages: `z_CN` of the given side.
pub fn sector_exit(p: &NormalFormParams, side: Side) -> Result<f64> {
    Ok(landmarks(p, side, LandmarkMode::Asymptotic)?.z_cn)
}
