//! Vector fields of the three-timescale families and the parameter maps
//! between them.
//!
//! All right-hand sides are written in the intermediate time `t`, i.e. the
//! fast component is returned as `f / eps` and the slow one as `delta * h`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CubicF;

/// A point in the three-dimensional phase space, `(x, y, z)` or `(v, n, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn checked(self) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFiniteState)
        }
    }

    pub fn sup_distance(&self, other: &State3) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl fmt::Display for State3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Affine slow-flow function `phi(x, y, z) = c0 + cx x + cy y + cz z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePhi {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
}

impl AffinePhi {
    pub const fn new(c0: f64, cx: f64, cy: f64, cz: f64) -> Self {
        Self { c0, cx, cy, cz }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        self.c0 + self.cx * x + self.cy * y + self.cz * z
    }
}

type PhiFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// The slow-flow function `phi`.
///
/// The affine form covers every built-in family. `Custom` accepts an
/// arbitrary smooth function; its gradient is taken by central differences.
#[derive(Clone)]
pub enum PhiSpec {
    Affine(AffinePhi),
    Custom(Arc<PhiFn>),
}

impl PhiSpec {
    pub const fn affine(c0: f64, cx: f64, cy: f64, cz: f64) -> Self {
        PhiSpec::Affine(AffinePhi::new(c0, cx, cy, cz))
    }

    /// `phi = -y - z`, the Koper realisation.
    pub const fn koper() -> Self {
        Self::affine(0.0, 0.0, -1.0, -1.0)
    }

    /// `phi = 0` (constant slow flow `mu`).
    pub const fn zero() -> Self {
        Self::affine(0.0, 0.0, 0.0, 0.0)
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        PhiSpec::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        match self {
            PhiSpec::Affine(a) => a.eval(x, y, z),
            PhiSpec::Custom(f) => f(x, y, z),
        }
    }

    pub fn gradient(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        match self {
            PhiSpec::Affine(a) => [a.cx, a.cy, a.cz],
            PhiSpec::Custom(f) => {
                let d = |v: f64| 1e-6 * v.abs().max(1.0);
                let (hx, hy, hz) = (d(x), d(y), d(z));
                [
                    (f(x + hx, y, z) - f(x - hx, y, z)) / (2.0 * hx),
                    (f(x, y + hy, z) - f(x, y - hy, z)) / (2.0 * hy),
                    (f(x, y, z + hz) - f(x, y, z - hz)) / (2.0 * hz),
                ]
            }
        }
    }

    pub fn as_affine(&self) -> Option<&AffinePhi> {
        match self {
            PhiSpec::Affine(a) => Some(a),
            PhiSpec::Custom(_) => None,
        }
    }

    /// True when `phi` is identically zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, PhiSpec::Affine(a) if a.c0 == 0.0 && a.cx == 0.0 && a.cy == 0.0 && a.cz == 0.0)
    }
}

impl fmt::Debug for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::Affine(a) => f.debug_tuple("Affine").field(a).finish(),
            PhiSpec::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

impl PartialEq for PhiSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (PhiSpec::Affine(a), PhiSpec::Affine(b)) => a == b,
            (PhiSpec::Custom(a), PhiSpec::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Serialize for PhiSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PhiSpec::Affine(a) => a.serialize(s),
            PhiSpec::Custom(_) => s.serialize_str("custom"),
        }
    }
}

impl<'de> Deserialize<'de> for PhiSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        AffinePhi::deserialize(d).map(PhiSpec::Affine)
    }
}

/// Parameters of the three-timescale normal form
///
/// ```text
/// eps x' = -y + f2 x^2 + f3 x^3
///     y' = alpha x + beta y - z
///     z' = delta (mu + phi(x, y, z))
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormParams {
    pub f2: f64,
    pub f3: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub eps: f64,
    pub delta: f64,
    pub phi: PhiSpec,
}

impl NormalFormParams {
    /// Checks the standing sign convention `f2 > 0 > f3` and nonnegative
    /// timescale ratios. Zero `eps`/`delta` is accepted here because the
    /// limit-geometry operations use it.
    pub fn validate(&self) -> Result<()> {
        let all = [self.f2, self.f3, self.alpha, self.beta, self.mu, self.eps, self.delta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        if self.f3 == 0.0 {
            return Err(Error::DegenerateCubic);
        }
        if self.f2 <= 0.0 {
            return Err(Error::InvalidParameter("f2 must be positive".into()));
        }
        if self.f3 > 0.0 {
            return Err(Error::InvalidParameter("f3 must be negative".into()));
        }
        if self.eps < 0.0 || self.delta < 0.0 {
            return Err(Error::InvalidParameter("eps and delta must be nonnegative".into()));
        }
        Ok(())
    }

    /// As [`validate`](Self::validate), additionally requiring `eps, delta > 0`.
    pub fn validate_for_simulation(&self) -> Result<()> {
        self.validate()?;
        if self.eps <= 0.0 || self.delta <= 0.0 {
            return Err(Error::InvalidParameter(
                "eps and delta must be strictly positive for simulation".into(),
            ));
        }
        Ok(())
    }

    pub fn cubic(&self) -> CubicF {
        CubicF::new(self.f2, self.f3)
    }

    /// `G(x) = alpha x + beta F(x)`.
    #[inline]
    pub fn g_of(&self, x: f64) -> f64 {
        self.alpha * x + self.beta * self.cubic().eval(x)
    }

    /// Slow flow `mu + phi` evaluated on the supercritical manifold at abscissa `x`.
    #[inline]
    pub fn slow_flow_on_m2(&self, x: f64) -> f64 {
        let f = self.cubic();
        self.mu + self.phi.eval(x, f.eval(x), self.g_of(x))
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }

    pub fn with_phi(&self, phi: PhiSpec) -> Self {
        Self { phi, ..self.clone() }
    }

    /// Point reflection through the centre of the cubic that exchanges the
    /// two fold lines.
    ///
    /// With `x_max = -2 f2 / (3 f3)`, `y_L = F(x_max)` and `z_q = G(x_max)`, the
    /// map `(x, y, z) -> (x_max - x, y_L - y, z_q - z)` carries the system onto
    /// one with identical `f2, f3, alpha, beta, eps, delta`, slow parameter
    /// `-mu` and `phi'(X, Y, Z) = -phi(x_max - X, y_L - Y, z_q - Z)`. Objects
    /// near the upper fold are computed as lower-fold objects of the image.
    pub fn reflected(&self) -> Reflection {
        let f = self.cubic();
        let x_max = f.x_max();
        let y_l = f.eval(x_max);
        let z_q = self.g_of(x_max);
        let phi = match &self.phi {
            PhiSpec::Affine(a) => PhiSpec::affine(-(a.c0 + a.cx * x_max + a.cy * y_l + a.cz * z_q), a.cx, a.cy, a.cz),
            PhiSpec::Custom(g) => {
                let g = Arc::clone(g);
                PhiSpec::custom(move |x, y, z| -g(x_max - x, y_l - y, z_q - z))
            }
        };
        Reflection {
            params: NormalFormParams {
                mu: -self.mu,
                phi,
                ..self.clone()
            },
            x_max,
            y_l,
            z_q,
        }
    }

    /// Right-hand side in intermediate time.
    pub fn rhs(&self, s: State3) -> Result<[f64; 3]> {
        s.checked()?;
        Ok(self.eval_rhs(&s.to_array()))
    }

    #[inline]
    fn eval_rhs(&self, s: &[f64; 3]) -> [f64; 3] {
        let [x, y, z] = *s;
        let fx = -y + x * x * (self.f2 + self.f3 * x);
        [
            fx / self.eps,
            self.alpha * x + self.beta * y - z,
            self.delta * (self.mu + self.phi.eval(x, y, z)),
        ]
    }

    fn eval_jacobian(&self, s: &[f64; 3]) -> [[f64; 3]; 3] {
        let [x, y, z] = *s;
        let dphi = self.phi.gradient(x, y, z);
        [
            [self.cubic().deriv(x) / self.eps, -1.0 / self.eps, 0.0],
            [self.alpha, self.beta, -1.0],
            [self.delta * dphi[0], self.delta * dphi[1], self.delta * dphi[2]],
        ]
    }
}

/// The image of a normal form under [`NormalFormParams::reflected`].
#[derive(Debug, Clone)]
pub struct Reflection {
    pub params: NormalFormParams,
    pub x_max: f64,
    pub y_l: f64,
    pub z_q: f64,
}

impl Reflection {
    /// Maps a point between the original and the reflected frame (the map is an involution).
    pub fn map(&self, s: State3) -> State3 {
        State3::new(self.x_max - s.x, self.y_l - s.y, self.z_q - s.z)
    }

    pub fn map_x(&self, x: f64) -> f64 {
        self.x_max - x
    }

    pub fn map_z(&self, z: f64) -> f64 {
        self.z_q - z
    }
}

/// Koper model parameters
///
/// ```text
/// eps_hat x' = k y + 3x - x^3 - lambda
///         y' = x - 2y + z
///         z' = delta (y - z)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KoperParams {
    pub k: f64,
    pub lambda: f64,
    pub eps_hat: f64,
    pub delta: f64,
}

impl KoperParams {
    pub const fn new(k: f64, lambda: f64, eps_hat: f64, delta: f64) -> Self {
        Self {
            k,
            lambda,
            eps_hat,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        if self.k >= 0.0 {
            return Err(Error::KoperRequiresNegativeK);
        }
        if !(self.eps_hat >= 0.0 && self.delta >= 0.0) {
            return Err(Error::InvalidParameter("eps and delta must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn with_k(self, k: f64) -> Self {
        Self { k, ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    /// Koper vector field in its original coordinates.
    pub fn rhs(&self, s: State3) -> Result<[f64; 3]> {
        s.checked()?;
        Ok(self.eval_rhs(&s.to_array()))
    }

    #[inline]
    fn eval_rhs(&self, s: &[f64; 3]) -> [f64; 3] {
        let [x, y, z] = *s;
        [
            (self.k * y + 3.0 * x - x * x * x - self.lambda) / self.eps_hat,
            x - 2.0 * y + z,
            self.delta * (y - z),
        ]
    }

    fn eval_jacobian(&self, s: &[f64; 3]) -> [[f64; 3]; 3] {
        let x = s[0];
        [
            [(3.0 - 3.0 * x * x) / self.eps_hat, self.k / self.eps_hat, 0.0],
            [1.0, -2.0, 1.0],
            [0.0, self.delta, -self.delta],
        ]
    }

    /// The symmetric variant
    ///
    /// ```text
    /// eps_hat x' = y - x^3 + 3x
    ///         y' = k x - 2 (y + lambda) + z
    ///         z' = delta (lambda + y - z)
    /// ```
    ///
    /// which is invariant under `(x, y, z, lambda) -> -(x, y, z, lambda)`.
    pub fn symmetric_rhs(&self, s: State3) -> Result<[f64; 3]> {
        s.checked()?;
        Ok(self.eval_symmetric(&s.to_array()))
    }

    #[inline]
    fn eval_symmetric(&self, s: &[f64; 3]) -> [f64; 3] {
        let [x, y, z] = *s;
        [
            (y - x * x * x + 3.0 * x) / self.eps_hat,
            self.k * x - 2.0 * (y + self.lambda) + z,
            self.delta * (self.lambda + y - z),
        ]
    }

    fn eval_symmetric_jacobian(&self, s: &[f64; 3]) -> [[f64; 3]; 3] {
        let x = s[0];
        [
            [(3.0 - 3.0 * x * x) / self.eps_hat, 1.0 / self.eps_hat, 0.0],
            [self.k, -2.0, 1.0],
            [0.0, self.delta, -self.delta],
        ]
    }

    /// Affine change of variables carrying Koper states to normal-form states:
    /// `X = x + 1`, `Y = y - (2 + lambda)/k`, `Z = 1 + 2 (2 + lambda)/k - z`.
    pub fn to_normal_state(&self, s: State3) -> State3 {
        let c = (2.0 + self.lambda) / self.k;
        State3::new(s.x + 1.0, s.y - c, 1.0 + 2.0 * c - s.z)
    }

    pub fn from_normal_state(&self, s: State3) -> State3 {
        let c = (2.0 + self.lambda) / self.k;
        State3::new(s.x - 1.0, s.y + c, 1.0 + 2.0 * c - s.z)
    }

    /// Maps a Koper tangent vector to the normal-form frame.
    pub fn to_normal_vector(v: [f64; 3]) -> [f64; 3] {
        [v[0], v[1], -v[2]]
    }
}

/// Maps Koper parameters onto the normal form.
pub fn koper_to_normal_form(kp: &KoperParams) -> Result<NormalFormParams> {
    kp.validate()?;
    let ak = kp.k.abs();
    Ok(NormalFormParams {
        f2: 3.0 / ak,
        f3: -1.0 / ak,
        alpha: 1.0,
        beta: -2.0,
        mu: (kp.k + kp.lambda + 2.0) / kp.k,
        eps: kp.eps_hat / ak,
        delta: kp.delta,
        phi: PhiSpec::koper(),
    })
}

/// Free functions mirroring the operation names.
pub fn normal_form_rhs(p: &NormalFormParams, s: State3) -> Result<[f64; 3]> {
    p.rhs(s)
}

pub fn koper_rhs(kp: &KoperParams, s: State3) -> Result<[f64; 3]> {
    kp.rhs(s)
}

pub fn hh_rhs(hp: &HHParams, s: State3) -> Result<[f64; 3]> {
    hp.rhs(s)
}

/// Hodgkin–Huxley gating kinetics, voltage in mV.
pub mod hh_rates {
    /// Half-width of the series branch around the removable singularities (mV).
    pub const SERIES_HALF_WIDTH: f64 = 1e-4;

    /// `u / (1 - e^{-u})` and its derivative.
    fn exprel(u: f64) -> (f64, f64) {
        if u.abs() < SERIES_HALF_WIDTH / 10.0 {
            (1.0 + u / 2.0 + u * u / 12.0, 0.5 + u / 6.0)
        } else {
            let em = (-u).exp();
            let den = 1.0 - em;
            let val = u / den;
            let der = (den - u * em) / (den * den);
            (val, der)
        }
    }

    pub fn alpha_m(v: f64) -> f64 {
        exprel((v + 40.0) / 10.0).0
    }
    pub fn beta_m(v: f64) -> f64 {
        4.0 * (-(v + 65.0) / 18.0).exp()
    }
    pub fn alpha_h(v: f64) -> f64 {
        0.07 * (-(v + 65.0) / 20.0).exp()
    }
    pub fn beta_h(v: f64) -> f64 {
        1.0 / (1.0 + (-(v + 35.0) / 10.0).exp())
    }
    pub fn alpha_n(v: f64) -> f64 {
        0.1 * exprel((v + 55.0) / 10.0).0
    }
    pub fn beta_n(v: f64) -> f64 {
        0.25 * (-(v + 65.0) / 80.0).exp()
    }

    pub fn d_alpha_m(v: f64) -> f64 {
        exprel((v + 40.0) / 10.0).1 / 10.0
    }
    pub fn d_beta_m(v: f64) -> f64 {
        -beta_m(v) / 18.0
    }
    pub fn d_alpha_h(v: f64) -> f64 {
        -alpha_h(v) / 20.0
    }
    pub fn d_beta_h(v: f64) -> f64 {
        let b = beta_h(v);
        b * (1.0 - b) / 10.0
    }
    pub fn d_alpha_n(v: f64) -> f64 {
        0.1 * exprel((v + 55.0) / 10.0).1 / 10.0
    }
    pub fn d_beta_n(v: f64) -> f64 {
        -beta_n(v) / 80.0
    }

    /// `alpha / (alpha + beta)`.
    pub fn steady(a: f64, b: f64) -> f64 {
        a / (a + b)
    }

    /// `1 / (alpha + beta)`.
    pub fn time_constant(a: f64, b: f64) -> f64 {
        1.0 / (a + b)
    }

    pub fn m_inf(v: f64) -> f64 {
        steady(alpha_m(v), beta_m(v))
    }
    pub fn n_inf(v: f64) -> f64 {
        steady(alpha_n(v), beta_n(v))
    }
    pub fn h_inf(v: f64) -> f64 {
        steady(alpha_h(v), beta_h(v))
    }

    pub fn d_m_inf(v: f64) -> f64 {
        let (a, b) = (alpha_m(v), beta_m(v));
        (d_alpha_m(v) * b - a * d_beta_m(v)) / ((a + b) * (a + b))
    }
}

/// Reduced Hodgkin–Huxley model with `v` fast, `n` intermediate and `h` slow.
///
/// Voltages are in units of `k_v = 100 mV`; the rate functions are evaluated
/// at `100 v` mV and time is in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HHParams {
    /// Applied current, uA/cm^2.
    pub current: f64,
    pub tau_h: f64,
    pub tau_n: f64,
    pub eps: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub e_l: f64,
    /// `g_Na k_v = 120 * 100`; the scaled current is `current / k_scale`.
    pub k_scale: f64,
}

impl Default for HHParams {
    fn default() -> Self {
        Self {
            current: 23.0,
            tau_h: 45.0,
            tau_n: 1.0,
            eps: 0.0073,
            g_k: 0.3,
            g_l: 0.0025,
            e_na: 0.5,
            e_k: -0.77,
            e_l: -0.544,
            k_scale: 120.0 * 100.0,
        }
    }
}

/// Millivolts per dimensionless voltage unit.
pub const HH_MV_PER_UNIT: f64 = 100.0;

impl HHParams {
    pub fn with_current(self, current: f64) -> Self {
        Self { current, ..self }
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.tau_h
    }

    pub fn i_bar(&self) -> f64 {
        self.current / self.k_scale
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_h > 0.0 && self.tau_n > 0.0 && self.eps > 0.0) {
            return Err(Error::InvalidParameter("tau_h, tau_n and eps must be positive".into()));
        }
        if !(self.g_k > 0.0 && self.g_l > 0.0 && self.k_scale > 0.0) {
            return Err(Error::InvalidParameter("conductances must be positive".into()));
        }
        Ok(())
    }

    /// Fast nullcline function `V(v, n, h)` (the numerator of `v'`).
    pub fn fast_function(&self, v: f64, n: f64, h: f64) -> f64 {
        let m = hh_rates::m_inf(HH_MV_PER_UNIT * v);
        self.i_bar()
            - (v - self.e_na) * m * m * m * h
            - self.g_k * (v - self.e_k) * n.powi(4)
            - self.g_l * (v - self.e_l)
    }

    /// `dV/dv` at fixed `n, h`.
    pub fn fast_function_dv(&self, v: f64, n: f64, h: f64) -> f64 {
        let vm = HH_MV_PER_UNIT * v;
        let m = hh_rates::m_inf(vm);
        let dm = hh_rates::d_m_inf(vm) * HH_MV_PER_UNIT;
        -m * m * m * h - (v - self.e_na) * 3.0 * m * m * dm * h - self.g_k * n.powi(4) - self.g_l
    }

    pub fn rhs(&self, s: State3) -> Result<[f64; 3]> {
        s.checked()?;
        Ok(self.eval_rhs(&s.to_array()))
    }

    #[inline]
    fn eval_rhs(&self, s: &[f64; 3]) -> [f64; 3] {
        use hh_rates::*;
        let [v, n, h] = *s;
        let vm = HH_MV_PER_UNIT * v;
        let (an, bn) = (alpha_n(vm), beta_n(vm));
        let (ah, bh) = (alpha_h(vm), beta_h(vm));
        [
            self.fast_function(v, n, h) / self.eps,
            (an - (an + bn) * n) / self.tau_n,
            (ah - (ah + bh) * h) / self.tau_h,
        ]
    }

    fn eval_jacobian(&self, s: &[f64; 3]) -> [[f64; 3]; 3] {
        use hh_rates::*;
        let [v, n, h] = *s;
        let vm = HH_MV_PER_UNIT * v;
        let m = m_inf(vm);
        let k = HH_MV_PER_UNIT;
        let dn_dv = (d_alpha_n(vm) - (d_alpha_n(vm) + d_beta_n(vm)) * n) * k / self.tau_n;
        let dh_dv = (d_alpha_h(vm) - (d_alpha_h(vm) + d_beta_h(vm)) * h) * k / self.tau_h;
        [
            [
                self.fast_function_dv(v, n, h) / self.eps,
                -4.0 * self.g_k * (v - self.e_k) * n.powi(3) / self.eps,
                -(v - self.e_na) * m * m * m / self.eps,
            ],
            [dn_dv, -(alpha_n(vm) + beta_n(vm)) / self.tau_n, 0.0],
            [dh_dv, 0.0, -(alpha_h(vm) + beta_h(vm)) / self.tau_h],
        ]
    }
}

/// A vector field with an analytic Jacobian.
pub trait VectorField {
    fn eval(&self, s: &[f64; 3]) -> [f64; 3];
    fn jacobian(&self, s: &[f64; 3]) -> [[f64; 3]; 3];
}

/// One of the built-in three-timescale families.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    NormalForm(NormalFormParams),
    Koper(KoperParams),
    KoperSymmetric(KoperParams),
    HodgkinHuxley(HHParams),
}

impl System {
    pub fn rhs(&self, s: State3) -> Result<[f64; 3]> {
        s.checked()?;
        let out = self.eval(&s.to_array());
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonFiniteState)
        }
    }

    pub fn validate_for_simulation(&self) -> Result<()> {
        match self {
            System::NormalForm(p) => p.validate_for_simulation(),
            System::Koper(kp) | System::KoperSymmetric(kp) => {
                kp.validate()?;
                if kp.eps_hat <= 0.0 || kp.delta <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "eps and delta must be strictly positive for simulation".into(),
                    ));
                }
                Ok(())
            }
            System::HodgkinHuxley(hp) => hp.validate(),
        }
    }

    /// Timescale ratio of the slow variable.
    pub fn delta(&self) -> f64 {
        match self {
            System::NormalForm(p) => p.delta,
            System::Koper(kp) | System::KoperSymmetric(kp) => kp.delta,
            System::HodgkinHuxley(hp) => hp.delta(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            System::NormalForm(_) => "normal",
            System::Koper(_) => "koper",
            System::KoperSymmetric(_) => "koper-symmetric",
            System::HodgkinHuxley(_) => "hh",
        }
    }

    /// Column names of the state variables.
    pub fn state_labels(&self) -> [&'static str; 3] {
        match self {
            System::HodgkinHuxley(_) => ["v", "n", "h"],
            _ => ["x", "y", "z"],
        }
    }
}

impl VectorField for System {
    #[inline]
    fn eval(&self, s: &[f64; 3]) -> [f64; 3] {
        match self {
            System::NormalForm(p) => p.eval_rhs(s),
            System::Koper(kp) => kp.eval_rhs(s),
            System::KoperSymmetric(kp) => kp.eval_symmetric(s),
            System::HodgkinHuxley(hp) => hp.eval_rhs(s),
        }
    }

    fn jacobian(&self, s: &[f64; 3]) -> [[f64; 3]; 3] {
        match self {
            System::NormalForm(p) => p.eval_jacobian(s),
            System::Koper(kp) => kp.eval_jacobian(s),
            System::KoperSymmetric(kp) => kp.eval_symmetric_jacobian(s),
            System::HodgkinHuxley(hp) => hp.eval_jacobian(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn demo() -> NormalFormParams {
        NormalFormParams {
            f2: 0.75,
            f3: -0.25,
            alpha: 1.0,
            beta: -2.0,
            mu: 0.0,
            eps: 1.0,
            delta: 1.0,
            phi: PhiSpec::koper(),
        }
    }

    #[test]
    fn origin_is_equilibrium_at_zero_mu() {
        assert_eq!(demo().rhs(State3::default()).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_evaluated_rhs() {
        let r = demo().rhs(State3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(r[0], 0.5);
        assert_eq!(r[1], 1.0);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn non_finite_state_rejected() {
        let e = demo().rhs(State3::new(f64::NAN, 0.0, 0.0)).unwrap_err();
        assert_eq!(e, Error::NonFiniteState);
        assert_eq!(e.to_string(), "non-finite state");
    }

    #[test]
    fn koper_map_values() {
        let p = koper_to_normal_form(&KoperParams::new(-4.0, 0.0, 0.01, 0.01)).unwrap();
        assert_eq!(p.f2, 0.75);
        assert_eq!(p.f3, -0.25);
        assert_eq!(p.eps, 0.0025);
        assert_eq!(p.mu, 0.5);
        assert_eq!(p.phi, PhiSpec::koper());

        let p = koper_to_normal_form(&KoperParams::new(-2.0, 0.0, 0.01, 0.01)).unwrap();
        assert_eq!(p.mu, 0.0);

        let p = koper_to_normal_form(&KoperParams::new(-4.5, 1.5, 0.01, 0.01)).unwrap();
        assert_relative_eq!(p.mu, 2.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn koper_map_rejects_nonnegative_k() {
        let e = koper_to_normal_form(&KoperParams::new(0.0, 0.0, 0.01, 0.01)).unwrap_err();
        assert_eq!(e.to_string(), "Koper requires k < 0");
    }

    #[test]
    fn koper_rhs_examples() {
        let kp = KoperParams::new(-4.5, 0.0, 0.01, 0.01);
        assert_eq!(kp.rhs(State3::default()).unwrap(), [0.0, 0.0, 0.0]);
        let kp = KoperParams::new(-4.5, 1.5, 0.01, 0.01);
        let r = kp.rhs(State3::default()).unwrap();
        assert_relative_eq!(r[0] * kp.eps_hat, -1.5);
    }

    #[test]
    fn hh_rate_values() {
        assert_relative_eq!(hh_rates::alpha_h(-65.0), 0.07);
        assert_relative_eq!(hh_rates::alpha_m(-40.0), 1.0);
        assert_relative_eq!(hh_rates::alpha_n(-55.0), 0.1);
        // continuity across the series branch
        for d in [1e-3, 1e-5, 1e-7] {
            assert_relative_eq!(hh_rates::alpha_m(-40.0 + d), 1.0 + d / 20.0, epsilon = 1e-9);
            assert_relative_eq!(hh_rates::alpha_n(-55.0 - d), 0.1 - d / 200.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn hh_rates_positive_on_grid() {
        use hh_rates::*;
        let fns: [fn(f64) -> f64; 6] = [alpha_m, beta_m, alpha_h, beta_h, alpha_n, beta_n];
        let mut v = -100.0;
        while v <= 60.0 {
            for f in fns {
                let r = f(v);
                assert!(r.is_finite() && r > 0.0, "rate at {v} = {r}");
            }
            v += 0.005;
        }
        for v in [-40.0, -55.0] {
            for f in fns {
                assert!(f(v).is_finite() && f(v) > 0.0);
            }
        }
    }

    #[test]
    fn hh_jacobian_matches_finite_differences() {
        let hp = HHParams::default();
        let s = [-0.6, 0.35, 0.5];
        let j = System::HodgkinHuxley(hp).jacobian(&s);
        let sys = System::HodgkinHuxley(hp);
        for c in 0..3 {
            let mut sp = s;
            let mut sm = s;
            let h = 1e-6;
            sp[c] += h;
            sm[c] -= h;
            let fp = sys.eval(&sp);
            let fm = sys.eval(&sm);
            for r in 0..3 {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert_relative_eq!(j[r][c], fd, epsilon = 1e-5, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn custom_phi_gradient() {
        let phi = PhiSpec::custom(|x, y, z| x * x - y + 2.0 * z);
        let g = phi.gradient(1.5, 0.0, 0.0);
        assert_relative_eq!(g[0], 3.0, epsilon = 1e-6);
        assert_relative_eq!(g[1], -1.0, epsilon = 1e-6);
        assert_relative_eq!(g[2], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn reflection_is_involution_and_conjugates_flow() {
        let p = koper_to_normal_form(&KoperParams::new(-4.5, 1.5, 0.01, 0.01)).unwrap();
        let r = p.reflected();
        let s = State3::new(0.3, -0.2, 0.7);
        let back = r.map(r.map(s));
        assert_relative_eq!(back.x, s.x, epsilon = 1e-15);
        let f = p.rhs(s).unwrap();
        let g = r.params.rhs(r.map(s)).unwrap();
        for i in 0..3 {
            assert_relative_eq!(g[i], -f[i], epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn koper_matches_normal_form_under_affine_map(
            k in -8.0f64..-0.5, lambda in -3.0f64..3.0,
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
        ) {
            let kp = KoperParams::new(k, lambda, 0.01, 0.02);
            let p = koper_to_normal_form(&kp).unwrap();
            let s = State3::new(x, y, z);
            let expected = KoperParams::to_normal_vector(kp.rhs(s).unwrap());
            let got = p.rhs(kp.to_normal_state(s)).unwrap();
            for i in 0..3 {
                let scale = expected[i].abs().max(1.0);
                prop_assert!((got[i] - expected[i]).abs() <= 1e-12 * scale * 100.0,
                    "component {} got {} expected {}", i, got[i], expected[i]);
            }
        }

        #[test]
        fn koper_is_odd_under_lambda_flip(
            k in -8.0f64..-0.5, lambda in -3.0f64..3.0,
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
        ) {
            let kp = KoperParams::new(k, lambda, 0.01, 0.02);
            let km = kp.with_lambda(-lambda);
            let s = State3::new(x, y, z);
            let m = State3::new(-x, -y, -z);
            let a = kp.rhs(s).unwrap();
            let b = km.rhs(m).unwrap();
            let c = kp.symmetric_rhs(s).unwrap();
            let d = km.symmetric_rhs(m).unwrap();
            for i in 0..3 {
                prop_assert!((a[i] + b[i]).abs() <= 1e-9 * a[i].abs().max(1.0));
                prop_assert!((c[i] + d[i]).abs() <= 1e-9 * c[i].abs().max(1.0));
            }
        }
    }
}
