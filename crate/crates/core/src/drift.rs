//! Slow drift along the attracting sheets of `M1`, the MMO/relaxation
//! boundary `mu_r` and the count of large excursions between SAO epochs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{classify_relative_config, ConfigKind, CubicF, Side};
use crate::model::{KoperParams, NormalFormParams};
use crate::quad;
use crate::roots::brent;

/// Characteristic abscissae of the cubic used by the drift integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEndpoints {
    pub x_max: f64,
    pub x_star_max: f64,
    pub x_0: f64,
}

impl DriftEndpoints {
    pub fn of(f: &CubicF) -> Self {
        DriftEndpoints {
            x_max: f.x_max(),
            x_star_max: f.x_star_max(),
            x_0: f.x_zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftValue {
    pub value: f64,
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub mu: f64,
    pub error: f64,
}

const PRESCAN_POINTS: usize = 4096;
const DRIFT_REL_TOL: f64 = 1e-10;

/// The drift integrand split as `w(s) * (mu + phi(s, F(s), z0))`.
///
/// At `z0 = 0` the common factor `s` of `F'(s)` and `alpha s + beta F(s)` is
/// cancelled, which removes the removable singularity at the origin.
fn weight(p: &NormalFormParams, z0: f64) -> impl Fn(f64) -> (f64, f64) + '_ {
    let (f2, f3, a, b) = (p.f2, p.f3, p.alpha, p.beta);
    move |s: f64| {
        if z0 == 0.0 {
            (2.0 * f2 + 3.0 * f3 * s, a + b * f2 * s + b * f3 * s * s)
        } else {
            let f = s * s * (f2 + f3 * s);
            (s * (2.0 * f2 + 3.0 * f3 * s), a * s + b * f - z0)
        }
    }
}

fn prescan(p: &NormalFormParams, x0: f64, x1: f64, z0: f64) -> Result<()> {
    let w = weight(p, z0);
    let h = (x1 - x0) / PRESCAN_POINTS as f64;
    let mut prev = w(x0).1;
    for i in 0..=PRESCAN_POINTS {
        let s = if i == PRESCAN_POINTS { x1 } else { x0 + h * i as f64 };
        let d = w(s).1;
        if d == 0.0 || !d.is_finite() || d.signum() != prev.signum() {
            return Err(Error::DriftIntegrandPole { at: s });
        }
        prev = d;
    }
    Ok(())
}

fn integrate_split(p: &NormalFormParams, x0: f64, x1: f64, z0: f64, mu: f64) -> Result<(f64, f64)> {
    let w = weight(p, z0);
    let phi = &p.phi;
    let cubic = p.cubic();
    let q = quad::integrate(
        |s| {
            let (n, d) = w(s);
            n * (mu + phi.eval(s, cubic.eval(s), z0)) / d
        },
        x0,
        x1,
        DRIFT_REL_TOL * 0.1,
        1e-15,
    )?;
    Ok((q.value, q.error))
}

/// `G(x0, x1; z0; mu) = ∫_{x0}^{x1} F'(s) (mu + phi(s, F(s), z0)) / (alpha s + beta F(s) - z0) ds`
/// at the parameter `mu` stored in `p`.
pub fn g_drift(p: &NormalFormParams, x0: f64, x1: f64, z0: f64) -> Result<DriftValue> {
    g_drift_at(p, x0, x1, z0, p.mu)
}

/// As [`g_drift`] with an explicit `mu`.
pub fn g_drift_at(p: &NormalFormParams, x0: f64, x1: f64, z0: f64, mu: f64) -> Result<DriftValue> {
    if x0 == x1 {
        return Ok(DriftValue {
            value: 0.0,
            x0,
            x1,
            z0,
            mu,
            error: 0.0,
        });
    }
    prescan(p, x0, x1, z0)?;
    let (value, error) = integrate_split(p, x0, x1, z0, mu)?;
    Ok(DriftValue {
        value,
        x0,
        x1,
        z0,
        mu,
        error,
    })
}

/// Leading-order graph of the strong manifold through the origin:
/// `z(x) = delta * G(0, x; 0; mu)`.
pub fn strong_manifold_graph(p: &NormalFormParams, x: f64) -> Result<f64> {
    Ok(p.delta * g_drift(p, 0.0, x, 0.0)?.value)
}

/// `∫ F'/(alpha s + beta F)` and `∫ F' phi(s, F, 0)/(alpha s + beta F)` over
/// both return segments, i.e. the denominator and minus the numerator of the
/// closed form for `mu_r`.
fn return_integrals(p: &NormalFormParams) -> Result<(f64, f64)> {
    let e = DriftEndpoints::of(&p.cubic());
    let zero_mu = p.with_phi(crate::model::PhiSpec::zero());
    let d1 = g_drift_at(&zero_mu, e.x_0, e.x_max, 0.0, 1.0)?.value;
    let d2 = g_drift_at(&zero_mu, e.x_star_max, 0.0, 0.0, 1.0)?.value;
    let n1 = g_drift_at(p, e.x_0, e.x_max, 0.0, 0.0)?.value;
    let n2 = g_drift_at(p, e.x_star_max, 0.0, 0.0, 0.0)?.value;
    Ok((d1 + d2, n1 + n2))
}

/// Net drift `G(x0, x_max; 0; mu) + G(x*_max, 0; 0; mu)` accumulated over one
/// large excursion.
pub fn return_drift(p: &NormalFormParams, mu: f64) -> Result<f64> {
    let e = DriftEndpoints::of(&p.cubic());
    Ok(g_drift_at(p, e.x_0, e.x_max, 0.0, mu)?.value + g_drift_at(p, e.x_star_max, 0.0, 0.0, mu)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuR {
    /// Ratio of integrals.
    pub value: f64,
    /// Root of the balance condition found by Brent's method.
    pub root: f64,
    /// Net return drift at `value`.
    pub residual: f64,
}

fn require_remote(p: &NormalFormParams) -> Result<()> {
    match classify_relative_config(p)?.kind {
        ConfigKind::Remote => Ok(()),
        _ => Err(Error::NotRemote),
    }
}

/// Balance value `mu_r` associated with `q-`: the return drift vanishes.
pub fn mu_r_minus(p: &NormalFormParams) -> Result<MuR> {
    p.validate()?;
    require_remote(p)?;
    let (den, num) = return_integrals(p)?;
    let value = -num / den;
    // the drift is affine in mu for every phi, so a bracket around the ratio suffices
    let f = |mu: f64| return_drift(p, mu).unwrap_or(f64::NAN);
    let mut h = 1e-3 * value.abs().max(1.0);
    let mut root = None;
    for _ in 0..40 {
        if let Ok(r) = brent(f, value - h, value + h, 1e-15) {
            root = Some(r);
            break;
        }
        h *= 4.0;
    }
    let root = root.ok_or_else(|| Error::Bracketing("mu_r: balance condition has no root".into()))?;
    Ok(MuR {
        value,
        root,
        residual: return_drift(p, value)?,
    })
}

/// `mu_r` for either side; the plus side comes from the reflected system.
pub fn mu_r(p: &NormalFormParams, side: Side) -> Result<MuR> {
    match side {
        Side::Minus => mu_r_minus(p),
        Side::Plus => {
            let m = mu_r_minus(&p.reflected().params)?;
            Ok(MuR {
                value: -m.value,
                root: -m.root,
                residual: -m.residual,
            })
        }
    }
}

/// Koper value of `lambda` at which `mu(k, lambda) = mu_r`, in the double singular limit.
pub fn lambda_r(kp: &KoperParams, side: Side) -> Result<f64> {
    if !(kp.k < -4.0) {
        return Err(Error::NotRemote);
    }
    let kp0 = KoperParams {
        eps_hat: 0.0,
        delta: 0.0,
        ..*kp
    };
    let p = crate::model::koper_to_normal_form(&kp0)?;
    let minus = mu_r_minus(&p)?.value * kp.k - kp.k - 2.0;
    Ok(match side {
        Side::Minus => minus,
        Side::Plus => -minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "count")]
pub enum LaoCount {
    Count(u64),
    Relaxation,
}

/// Number of large excursions between two passages near `q-`.
pub fn lao_count(p: &NormalFormParams, z_in: f64, z_out: f64) -> Result<LaoCount> {
    if !(z_out > 0.0) {
        return Err(Error::InvalidParameter("z_out must be positive".into()));
    }
    if z_in < 0.0 {
        return Ok(LaoCount::Count(1));
    }
    if z_in >= z_out {
        return Ok(LaoCount::Relaxation);
    }
    require_remote(p)?;
    let step = p.delta * return_drift(p, p.mu)?;
    if !(step < 0.0) {
        return Ok(LaoCount::Relaxation);
    }
    Ok(LaoCount::Count(1 + (z_out / step.abs()).floor() as u64))
}
