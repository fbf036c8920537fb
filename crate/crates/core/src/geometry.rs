//! Singular geometry of the normal form in the double limit `eps = delta = 0`.
//!
//! `M1` is the cubic surface `y = F(x)`, `M2 ⊂ M1` is the curve `z = G(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NormalFormParams, State3};
use crate::roots::brent;

/// Which fold: the one through the origin (`Minus`) or the one at `x_max` (`Plus`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Minus => "minus",
            Side::Plus => "plus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "minus" | "-" | "lower" => Ok(Side::Minus),
            "plus" | "+" | "upper" => Ok(Side::Plus),
            other => Err(Error::Parse(format!("unknown side '{other}'"))),
        }
    }
}

/// `F(x) = f2 x^2 + f3 x^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicF {
    pub f2: f64,
    pub f3: f64,
}

impl CubicF {
    pub const fn new(f2: f64, f3: f64) -> Self {
        Self { f2, f3 }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        x * x * (self.f2 + self.f3 * x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        x * (2.0 * self.f2 + 3.0 * self.f3 * x)
    }

    #[inline]
    pub fn second_deriv(&self, x: f64) -> f64 {
        2.0 * self.f2 + 6.0 * self.f3 * x
    }

    /// Nonzero critical point, `-2 f2 / (3 f3)`.
    pub fn x_max(&self) -> f64 {
        -2.0 * self.f2 / (3.0 * self.f3)
    }

    /// The other preimage of `F(x_max)`, `f2 / (3 f3)`.
    pub fn x_star_max(&self) -> f64 {
        self.f2 / (3.0 * self.f3)
    }

    /// Nonzero root, `-f2 / f3`.
    pub fn x_zero(&self) -> f64 {
        -self.f2 / self.f3
    }
}

/// `G(x) = alpha x + beta F(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicG {
    pub alpha: f64,
    pub beta: f64,
    pub f: CubicF,
}

impl CubicG {
    pub fn of(p: &NormalFormParams) -> Self {
        Self {
            alpha: p.alpha,
            beta: p.beta,
            f: p.cubic(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.alpha * x + self.beta * self.f.eval(x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.alpha + self.beta * self.f.deriv(x)
    }

    /// Sign of the cubic coefficient `beta f3` (zero when `beta = 0`).
    fn leading_sign(&self) -> f64 {
        let c = self.beta * self.f.f3;
        if c == 0.0 {
            0.0
        } else {
            c.signum()
        }
    }
}

/// A folded singularity `q-` or `q+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldedSingularity {
    pub location: State3,
    pub which: Side,
}

/// A fold line of `M1`, parallel to the `z`-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldLine {
    pub x: f64,
    pub y: f64,
}

/// Fold points of `M2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M2FoldPoints {
    pub count: u8,
    pub points: Vec<State3>,
    pub discriminant: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn check_cubic(p: &NormalFormParams) -> Result<()> {
    if p.f3 == 0.0 {
        return Err(Error::DegenerateCubic);
    }
    Ok(())
}

/// Fold lines `L-` at the origin and `L+` at `(x_max, F(x_max))`.
pub fn fold_lines(p: &NormalFormParams) -> Result<(FoldLine, FoldLine)> {
    check_cubic(p)?;
    let f = p.cubic();
    let x = f.x_max();
    Ok((
        FoldLine { x: 0.0, y: 0.0 },
        FoldLine {
            x,
            y: 4.0 * p.f2.powi(3) / (27.0 * p.f3 * p.f3),
        },
    ))
}

/// Folded singularities `q-` (the origin) and `q+ = (x_max, F(x_max), G(x_max))`.
pub fn folded_singularities(p: &NormalFormParams) -> Result<(FoldedSingularity, FoldedSingularity)> {
    check_cubic(p)?;
    let f = p.cubic();
    let g = CubicG::of(p);
    let x = f.x_max();
    Ok((
        FoldedSingularity {
            location: State3::default(),
            which: Side::Minus,
        },
        FoldedSingularity {
            location: State3::new(x, f.eval(x), g.eval(x)),
            which: Side::Plus,
        },
    ))
}

/// Relative band inside which the discriminant counts as zero.
const DISCRIMINANT_BAND: f64 = 1e-12;

/// Points of `M2` where `G'(x) = 0`.
pub fn m2_fold_points(p: &NormalFormParams) -> Result<M2FoldPoints> {
    check_cubic(p)?;
    let (f2, f3, a, b) = (p.f2, p.f3, p.alpha, p.beta);
    let disc = b * b * f2 * f2 - 3.0 * a * b * f3;
    if b == 0.0 {
        return Ok(M2FoldPoints {
            count: 0,
            points: Vec::new(),
            discriminant: disc,
            note: Some("no fold points (beta=0)".into()),
        });
    }
    let f = p.cubic();
    let g = CubicG::of(p);
    let on_m2 = |x: f64| State3::new(x, f.eval(x), g.eval(x));
    let scale = (b * b * f2 * f2)
        .abs()
        .max((3.0 * a * b * f3).abs())
        .max(f64::MIN_POSITIVE);
    let denom = 3.0 * b * f3;
    if disc.abs() <= DISCRIMINANT_BAND * scale {
        let x = -b * f2 / denom;
        return Ok(M2FoldPoints {
            count: 1,
            points: vec![on_m2(x)],
            discriminant: 0.0,
            note: None,
        });
    }
    if disc < 0.0 {
        return Ok(M2FoldPoints {
            count: 0,
            points: Vec::new(),
            discriminant: disc,
            note: None,
        });
    }
    let sq = disc.sqrt();
    let mut xs = [(-b * f2 + sq) / denom, (-b * f2 - sq) / denom];
    xs.sort_by(|u, v| u.total_cmp(v));
    Ok(M2FoldPoints {
        count: 2,
        points: xs.iter().map(|&x| on_m2(x)).collect(),
        discriminant: disc,
        note: None,
    })
}

/// Stability of a normally hyperbolic piece of `M1` or `M2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attracting,
    Repelling,
}

/// Stability of the three branches of `M2` cut at the fold points, in order of increasing `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchStability {
    pub lower: Stability,
    pub middle: Stability,
    pub upper: Stability,
}

pub fn branch_stability(p: &NormalFormParams) -> Result<BranchStability> {
    let fp = m2_fold_points(p)?;
    if fp.count < 2 {
        return Err(Error::NoBranchDecomposition);
    }
    use Stability::*;
    Ok(if p.beta < 0.0 {
        BranchStability {
            lower: Attracting,
            middle: Repelling,
            upper: Attracting,
        }
    } else {
        BranchStability {
            lower: Repelling,
            middle: Attracting,
            upper: Repelling,
        }
    })
}

/// Where the fold points of `M2` sit relative to the sheets of `M1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoldPointSide {
    BothOnSr,
    OnSaMinusPlus,
    OnFoldLines,
}

pub fn fold_point_side(p: &NormalFormParams) -> Result<FoldPointSide> {
    let fp = m2_fold_points(p)?;
    if fp.count < 2 {
        return Err(Error::NoBranchDecomposition);
    }
    let ab = p.alpha * p.beta;
    Ok(if p.alpha == 0.0 {
        FoldPointSide::OnFoldLines
    } else if ab < 0.0 {
        FoldPointSide::BothOnSr
    } else {
        FoldPointSide::OnSaMinusPlus
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigKind {
    Remote,
    Aligned,
    Connected,
}

/// A closed `z`-interval; infinite ends are serialised as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZRange {
    #[serde(with = "finite_or_null")]
    pub lo: f64,
    #[serde(with = "finite_or_null")]
    pub hi: f64,
}

impl ZRange {
    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Relative position of `q-` and `q+`, with the witnesses of the plane test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeConfig {
    pub kind: ConfigKind,
    pub z_q_minus: f64,
    pub z_q_plus: f64,
    /// `alpha/beta - 2 f2^2 / (9 f3)`, absent when `beta = 0`.
    pub slope_gap: Option<f64>,
    /// `z`-range of the outer branch `x < min(x_p-, 0)` of `M2`.
    pub lower_branch_z: Option<ZRange>,
    /// `z`-range of the outer branch `x > max(x_p+, x_max)` of `M2`.
    pub upper_branch_z: Option<ZRange>,
    /// Whether the normal plane through `q-` meets the upper outer branch.
    pub plane_minus_meets_upper: Option<bool>,
    /// Whether the normal plane through `q+` meets the lower outer branch.
    pub plane_plus_meets_lower: Option<bool>,
}

/// Absolute alignment band for `|z_q- - z_q+|`.
pub fn alignment_tolerance(z_q_plus: f64) -> f64 {
    1e-9 * z_q_plus.abs().max(1.0)
}

/// Remote/aligned/connected by the algebraic criterion, with the plane
/// witnesses computed independently from the branch `z`-ranges.
pub fn classify_relative_config(p: &NormalFormParams) -> Result<RelativeConfig> {
    check_cubic(p)?;
    if p.alpha == 0.0 && p.beta == 0.0 {
        return Err(Error::DegenerateIntermediateFlow);
    }
    let (qm, qp) = folded_singularities(p)?;
    let zm = qm.location.z;
    let zp = qp.location.z;
    let aligned = (zm - zp).abs() <= alignment_tolerance(zp);
    let slope_gap = (p.beta != 0.0).then(|| p.alpha / p.beta - 2.0 * p.f2 * p.f2 / (9.0 * p.f3));

    let kind = if aligned {
        ConfigKind::Aligned
    } else if p.beta == 0.0 {
        ConfigKind::Remote
    } else if p.alpha * p.beta >= 0.0 || slope_gap.unwrap() > 0.0 {
        ConfigKind::Connected
    } else {
        ConfigKind::Remote
    };

    let (lower_branch_z, upper_branch_z) = match outer_branch_ranges(p)? {
        Some((l, u)) => (Some(l), Some(u)),
        None => (None, None),
    };
    Ok(RelativeConfig {
        kind,
        z_q_minus: zm,
        z_q_plus: zp,
        slope_gap,
        lower_branch_z,
        upper_branch_z,
        plane_minus_meets_upper: upper_branch_z.map(|r| r.contains(zm)),
        plane_plus_meets_lower: lower_branch_z.map(|r| r.contains(zp)),
    })
}

/// `z`-ranges of the two outer `M2` branches, restricted to the attracting
/// sheets of `M1` (`x < 0` below, `x > x_max` above), when the fold points
/// split `M2` in three.
pub fn outer_branch_ranges(p: &NormalFormParams) -> Result<Option<(ZRange, ZRange)>> {
    let fp = m2_fold_points(p)?;
    if fp.count < 2 {
        return Ok(None);
    }
    let g = CubicG::of(p);
    let s = g.leading_sign();
    let xl = fp.points[0].x.min(0.0);
    let xu = fp.points[1].x.max(p.cubic().x_max());
    let (zl, zu) = (g.eval(xl), g.eval(xu));
    // G -> s*inf as x -> +inf and -s*inf as x -> -inf; each outer branch is monotone.
    let lower = if s > 0.0 {
        ZRange {
            lo: f64::NEG_INFINITY,
            hi: zl,
        }
    } else {
        ZRange {
            lo: zl,
            hi: f64::INFINITY,
        }
    };
    let upper = if s > 0.0 {
        ZRange {
            lo: zu,
            hi: f64::INFINITY,
        }
    } else {
        ZRange {
            lo: f64::NEG_INFINITY,
            hi: zu,
        }
    };
    Ok(Some((lower, upper)))
}

/// The plane test on its own: aligned planes, else connected iff each plane
/// meets the opposite outer branch.
pub fn plane_test(p: &NormalFormParams) -> Result<Option<ConfigKind>> {
    let rc = classify_relative_config(p)?;
    if (rc.z_q_minus - rc.z_q_plus).abs() <= alignment_tolerance(rc.z_q_plus) {
        return Ok(Some(ConfigKind::Aligned));
    }
    Ok(match (rc.plane_minus_meets_upper, rc.plane_plus_meets_lower) {
        (Some(a), Some(b)) => Some(if a && b {
            ConfigKind::Connected
        } else {
            ConfigKind::Remote
        }),
        _ => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Fast,
    Intermediate,
    Slow,
}

/// One piece of a singular cycle, sampled as a polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSegment {
    pub scale: Scale,
    pub start: State3,
    pub end: State3,
    pub points: Vec<State3>,
}

pub const DEFAULT_SEGMENT_POINTS: usize = 200;

/// The singular cycle through the plane `z = z_level` (remote case) or the
/// unique cycle (aligned and connected cases, where `z_level` is ignored).
pub fn singular_cycle(p: &NormalFormParams, z_level: f64) -> Result<Vec<CycleSegment>> {
    singular_cycle_sampled(p, z_level, DEFAULT_SEGMENT_POINTS)
}

pub fn singular_cycle_sampled(p: &NormalFormParams, z_level: f64, n: usize) -> Result<Vec<CycleSegment>> {
    if !(p.alpha > 0.0 && p.beta < 0.0) {
        return Err(Error::InvalidParameter(
            "singular cycles need alpha > 0 and beta < 0".into(),
        ));
    }
    let n = n.max(2);
    let rc = classify_relative_config(p)?;
    let f = p.cubic();
    let g = CubicG::of(p);
    let (x_max, x_star, x0) = (f.x_max(), f.x_star_max(), f.x_zero());
    let y_l = f.eval(x_max);

    let fast = |y: f64, z: f64, xa: f64, xb: f64| sample(Scale::Fast, n, xa, xb, |x| State3::new(x, y, z));
    let inter = |z: f64, xa: f64, xb: f64| sample(Scale::Intermediate, n, xa, xb, |x| State3::new(x, f.eval(x), z));
    let slow = |xa: f64, xb: f64| sample(Scale::Slow, n, xa, xb, |x| State3::new(x, f.eval(x), g.eval(x)));

    match rc.kind {
        ConfigKind::Remote | ConfigKind::Aligned => {
            let z = if rc.kind == ConfigKind::Aligned {
                rc.z_q_minus
            } else {
                let (lo, hi) = (rc.z_q_minus.min(rc.z_q_plus), rc.z_q_minus.max(rc.z_q_plus));
                if !(lo <= z_level && z_level <= hi) {
                    return Err(Error::NoSingularCycle);
                }
                z_level
            };
            Ok(vec![
                fast(0.0, z, 0.0, x0),
                inter(z, x0, x_max),
                fast(y_l, z, x_max, x_star),
                inter(z, x_star, 0.0),
            ])
        }
        ConfigKind::Connected => {
            let fp = m2_fold_points(p)?;
            if fp.count < 2 {
                return Err(Error::NoBranchDecomposition);
            }
            let (xp_lo, xp_hi) = (fp.points[0].x, fp.points[1].x);
            // landing points on the outer M2 branches
            let x_up = brent(
                |x| g.eval(x) - rc.z_q_minus,
                xp_hi,
                x0.max(xp_hi) + 10.0 * x0.abs().max(1.0),
                1e-14,
            )?;
            let x_dn = brent(
                |x| g.eval(x) - rc.z_q_plus,
                x_star.min(xp_lo) - 10.0 * x0.abs().max(1.0),
                xp_lo,
                1e-14,
            )?;
            Ok(vec![
                fast(0.0, rc.z_q_minus, 0.0, x0),
                inter(rc.z_q_minus, x0, x_up),
                slow(x_up, x_max),
                fast(y_l, rc.z_q_plus, x_max, x_star),
                inter(rc.z_q_plus, x_star, x_dn),
                slow(x_dn, 0.0),
            ])
        }
    }
}

fn sample<P: Fn(f64) -> State3>(scale: Scale, n: usize, xa: f64, xb: f64, at: P) -> CycleSegment {
    let points: Vec<State3> = (0..n).map(|i| at(xa + (xb - xa) * i as f64 / (n - 1) as f64)).collect();
    CycleSegment {
        scale,
        start: points[0],
        end: points[n - 1],
        points,
    }
}

/// Sheets of `M1` split at the fold lines, by `x`-interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M1Branches {
    /// `S^{a-}`: `x < 0`.
    pub attracting_lower: (Option<f64>, f64),
    /// `S^r`: `0 < x < x_max`.
    pub repelling: (f64, f64),
    /// `S^{a+}`: `x > x_max`.
    pub attracting_upper: (f64, Option<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M2Branch {
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub stability: Stability,
}

/// Everything the singular limit says about one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub fold_line_minus: FoldLine,
    pub fold_line_plus: FoldLine,
    pub q_minus: FoldedSingularity,
    pub q_plus: FoldedSingularity,
    pub m2_fold_points: M2FoldPoints,
    pub m1_branches: M1Branches,
    pub m2_branches: Option<Vec<M2Branch>>,
    pub fold_point_side: Option<FoldPointSide>,
    pub relative_config: RelativeConfig,
}

impl GeometryReport {
    /// Midpoint between the two fold lines in `x`.
    pub fn fold_midpoint(&self) -> f64 {
        0.5 * (self.fold_line_minus.x + self.fold_line_plus.x)
    }

    /// Fold-to-fold `x`-width.
    pub fn fold_width(&self) -> f64 {
        (self.fold_line_plus.x - self.fold_line_minus.x).abs()
    }
}

pub fn geometry_report(p: &NormalFormParams) -> Result<GeometryReport> {
    let (lm, lp) = fold_lines(p)?;
    let (qm, qp) = folded_singularities(p)?;
    let fp = m2_fold_points(p)?;
    let m2_branches = branch_stability(p).ok().map(|b| {
        vec![
            M2Branch {
                x_lo: None,
                x_hi: Some(fp.points[0].x),
                stability: b.lower,
            },
            M2Branch {
                x_lo: Some(fp.points[0].x),
                x_hi: Some(fp.points[1].x),
                stability: b.middle,
            },
            M2Branch {
                x_lo: Some(fp.points[1].x),
                x_hi: None,
                stability: b.upper,
            },
        ]
    });
    Ok(GeometryReport {
        fold_line_minus: lm,
        fold_line_plus: lp,
        q_minus: qm,
        q_plus: qp,
        m1_branches: M1Branches {
            attracting_lower: (None, 0.0),
            repelling: (0.0, lp.x),
            attracting_upper: (lp.x, None),
        },
        m2_branches,
        fold_point_side: fold_point_side(p).ok(),
        relative_config: classify_relative_config(p)?,
        m2_fold_points: fp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{koper_to_normal_form, KoperParams, PhiSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn koper(k: f64) -> NormalFormParams {
        koper_to_normal_form(&KoperParams::new(k, 0.0, 0.01, 0.01)).unwrap()
    }

    fn generic(f2: f64, f3: f64, alpha: f64, beta: f64) -> NormalFormParams {
        NormalFormParams {
            f2,
            f3,
            alpha,
            beta,
            mu: 0.0,
            eps: 0.01,
            delta: 0.01,
            phi: PhiSpec::koper(),
        }
    }

    #[test]
    fn cubic_invariants() {
        let f = CubicF::new(0.75, -0.25);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.deriv(0.0), 0.0);
        assert_eq!(f.deriv(f.x_max()), 0.0);
        assert_relative_eq!(f.eval(f.x_star_max()), f.eval(f.x_max()), epsilon = 1e-14);
        assert_eq!(f.eval(f.x_zero()), 0.0);
    }

    #[test]
    fn koper_fold_lines() {
        let (lm, lp) = fold_lines(&koper(-4.0)).unwrap();
        assert_eq!((lm.x, lm.y), (0.0, 0.0));
        assert_relative_eq!(lp.x, 2.0, epsilon = 1e-15);
        assert_relative_eq!(lp.y, 1.0, epsilon = 1e-15);
        let (_, lp) = fold_lines(&koper(-6.0)).unwrap();
        assert_relative_eq!(lp.y, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_cubic() {
        let mut p = koper(-4.0);
        p.f3 = 0.0;
        assert_eq!(fold_lines(&p).unwrap_err().to_string(), "degenerate cubic");
    }

    #[test]
    fn koper_folded_singularity() {
        for k in [-3.0, -4.0, -4.5, -7.0] {
            let (qm, qp) = folded_singularities(&koper(k)).unwrap();
            assert_eq!(qm.location, State3::default());
            let ak = -k;
            assert_relative_eq!(qp.location.x, 2.0, epsilon = 1e-14);
            assert_relative_eq!(qp.location.y, 4.0 / ak, epsilon = 1e-14);
            assert_relative_eq!(qp.location.z, 2.0 - 8.0 / ak, epsilon = 1e-14);
        }
    }

    #[test]
    fn koper_m2_folds() {
        let fp = m2_fold_points(&koper(-4.5)).unwrap();
        assert_eq!(fp.count, 2);
        assert_relative_eq!(fp.points[0].x, 0.5, epsilon = 1e-12);
        assert_relative_eq!(fp.points[1].x, 1.5, epsilon = 1e-12);
        let fp = m2_fold_points(&koper(-6.0)).unwrap();
        assert_eq!(fp.count, 1);
        assert_eq!(fp.discriminant, 0.0);
        assert_relative_eq!(fp.points[0].x, 1.0, epsilon = 1e-12);
        assert_eq!(m2_fold_points(&koper(-7.0)).unwrap().count, 0);
    }

    #[test]
    fn branch_labels() {
        let b = branch_stability(&koper(-4.5)).unwrap();
        assert_eq!(b.lower, Stability::Attracting);
        assert_eq!(b.middle, Stability::Repelling);
        let b = branch_stability(&generic(0.75, -0.25, -1.0, 2.0)).unwrap();
        assert_eq!(b.lower, Stability::Repelling);
        assert_eq!(b.middle, Stability::Attracting);
        let e = branch_stability(&generic(0.75, -0.25, 1.0, 0.0)).unwrap_err();
        assert_eq!(e.to_string(), "no branch decomposition");
    }

    #[test]
    fn fold_point_sides() {
        assert_eq!(fold_point_side(&koper(-4.5)).unwrap(), FoldPointSide::BothOnSr);
        assert_eq!(
            fold_point_side(&generic(0.75, -0.25, 0.0, -2.0)).unwrap(),
            FoldPointSide::OnFoldLines
        );
        assert_eq!(
            fold_point_side(&generic(0.75, -0.25, 1.0, 1.0)).unwrap(),
            FoldPointSide::OnSaMinusPlus
        );
    }

    #[test]
    fn fold_points_lie_on_fold_lines_when_alpha_zero() {
        let fp = m2_fold_points(&generic(0.75, -0.25, 0.0, -2.0)).unwrap();
        assert_relative_eq!(fp.points[0].x, 0.0, epsilon = 1e-14);
        assert_relative_eq!(fp.points[1].x, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn koper_trichotomy() {
        assert_eq!(classify_relative_config(&koper(-4.5)).unwrap().kind, ConfigKind::Remote);
        assert_eq!(
            classify_relative_config(&koper(-4.0)).unwrap().kind,
            ConfigKind::Aligned
        );
        assert_eq!(
            classify_relative_config(&koper(-3.6)).unwrap().kind,
            ConfigKind::Connected
        );
        let e = classify_relative_config(&generic(0.75, -0.25, 0.0, 0.0)).unwrap_err();
        assert_eq!(e.to_string(), "degenerate intermediate flow");
        assert_eq!(
            classify_relative_config(&generic(0.75, -0.25, 1.0, 0.0)).unwrap().kind,
            ConfigKind::Remote
        );
    }

    #[test]
    fn cycles() {
        let c = singular_cycle(&koper(-4.0), 0.0).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|s| s.scale != Scale::Slow));
        assert!(c.iter().all(|s| s.points.iter().all(|q| q.z == 0.0)));

        let c = singular_cycle(&koper(-4.5), 0.1).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c[0].start.z, 0.1);
        assert_eq!(c[0].points.len(), DEFAULT_SEGMENT_POINTS);
        assert_eq!(
            singular_cycle(&koper(-4.5), 0.3).unwrap_err().to_string(),
            "no singular cycle at this level"
        );

        let c = singular_cycle(&koper(-3.6), 123.0).unwrap();
        assert_eq!(c.iter().filter(|s| s.scale == Scale::Slow).count(), 2);
        // closed loop
        for w in c.windows(2) {
            assert!(w[0].end.sup_distance(&w[1].start) < 1e-12);
        }
        assert!(c.last().unwrap().end.sup_distance(&c[0].start) < 1e-12);
    }

    proptest! {
        #[test]
        fn fold_points_satisfy_definition(
            f2 in 0.1f64..3.0, f3 in -3.0f64..-0.1, alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
        ) {
            let p = generic(f2, f3, alpha, beta);
            let fp = m2_fold_points(&p).unwrap();
            let g = CubicG::of(&p);
            for q in &fp.points {
                let scale = alpha.abs().max(beta.abs() * (1.0 + q.x.abs()).powi(2) * (f2 + f3.abs()));
                prop_assert!((alpha + 2.0 * beta * f2 * q.x + 3.0 * beta * f3 * q.x * q.x).abs() <= 1e-10 * scale.max(1.0));
                prop_assert!((q.z - g.eval(q.x)).abs() <= 1e-12 * q.z.abs().max(1.0));
                prop_assert!((q.y - p.cubic().eval(q.x)).abs() <= 1e-12 * q.y.abs().max(1.0));
            }
            let expected = if beta == 0.0 || fp.discriminant < 0.0 { 0 } else if fp.discriminant == 0.0 { 1 } else { 2 };
            prop_assert_eq!(fp.count, expected);
        }

        #[test]
        fn algebraic_and_plane_tests_agree(
            f2 in 0.1f64..3.0, f3 in -3.0f64..-0.1, alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
        ) {
            let p = generic(f2, f3, alpha, beta);
            if let Some(kind) = plane_test(&p).unwrap() {
                prop_assert_eq!(kind, classify_relative_config(&p).unwrap().kind);
            }
        }

        #[test]
        fn koper_kind_by_k(k in -8.0f64..-0.05) {
            let kind = classify_relative_config(&koper(k)).unwrap().kind;
            let expected = if (k + 4.0).abs() < 1e-12 { ConfigKind::Aligned }
                else if k < -4.0 { ConfigKind::Remote } else { ConfigKind::Connected };
            prop_assert_eq!(kind, expected);
        }
    }
}
