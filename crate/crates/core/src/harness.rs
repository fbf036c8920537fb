//! Parameter sweeps, boundary tables and plain-text configuration.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{analyse, Analysis, Frame, RegimeLabel, Thresholds};
use crate::drift::lambda_r;
use crate::error::{Error, Result};
use crate::geometry::{classify_relative_config, ConfigKind, Side};
use crate::integrate::{
    default_horizon, default_initial_state, integrate, transient_strip, IntegratorConfig, Strip, Trajectory,
};
use crate::local::lambda_sh;
use crate::model::{koper_to_normal_form, HHParams, KoperParams, State3, System};
use crate::roots::bisect;

/// `key = value` settings read from a file. Blank lines and lines starting
/// with `#` are ignored; keys are case-sensitive and `-` is read as `_`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            let key = k.trim().replace('-', "_");
            if key.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", n + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::parse(&fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&key.replace('-', "_")).map(String::as_str)
    }

    /// Parsed value of `key`, if present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad value for {key}: {v:?}"))),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.replace('-', "_"), value.into());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

/// Integrates `sys` from its default state (or `s0`) up to `t_end`
/// (default `50 / delta`).
pub fn run_system(sys: &System, s0: Option<State3>, t_end: Option<f64>, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let s0 = s0.unwrap_or_else(|| default_initial_state(sys));
    let t_end = t_end.unwrap_or_else(|| default_horizon(sys));
    integrate(sys, s0, (0.0, t_end), cfg)
}

/// Simulates `sys`, drops the transient and classifies the tail.
pub fn simulate_and_classify(
    sys: &System,
    s0: Option<State3>,
    cfg: &IntegratorConfig,
    th: &Thresholds,
) -> Result<Analysis> {
    let traj = run_system(sys, s0, None, cfg)?;
    classify_trajectory(sys, &traj, th)
}

/// Classifies an existing trajectory of `sys` after stripping the transient.
pub fn classify_trajectory(sys: &System, traj: &Trajectory, th: &Thresholds) -> Result<Analysis> {
    let tail = transient_strip(traj, Strip::default())?;
    let frame = Frame::for_system(sys)?;
    Ok(analyse(&tail, &frame, th, Some(sys)))
}

/// Rectangular `(k, lambda)` grid for the Koper model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub eps_hat: f64,
    pub delta: f64,
    pub integrator: IntegratorConfig,
    pub thresholds: Thresholds,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            k_min: -5.5,
            k_max: -2.5,
            k_step: 0.25,
            lambda_min: -3.0,
            lambda_max: 3.0,
            lambda_step: 0.5,
            eps_hat: 0.01,
            delta: 0.01,
            integrator: IntegratorConfig::default(),
            thresholds: Thresholds::default(),
        }
    }
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.k_min,
            self.k_max,
            self.lambda_min,
            self.lambda_max,
            self.eps_hat,
            self.delta,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite grid bound".into()));
        }
        if !(self.k_step > 0.0 && self.lambda_step > 0.0) {
            return Err(Error::InvalidParameter("grid steps must be positive".into()));
        }
        if self.k_min > self.k_max || self.lambda_min > self.lambda_max {
            return Err(Error::InvalidParameter("empty grid range".into()));
        }
        if self.k_max >= 0.0 {
            return Err(Error::KoperRequiresNegativeK);
        }
        if !(self.eps_hat > 0.0 && self.delta > 0.0) {
            return Err(Error::InvalidParameter("eps and delta must be positive".into()));
        }
        self.integrator.validate()
    }

    pub fn k_values(&self) -> Vec<f64> {
        axis(self.k_min, self.k_max, self.k_step)
    }

    pub fn lambda_values(&self) -> Vec<f64> {
        axis(self.lambda_min, self.lambda_max, self.lambda_step)
    }

    /// Grid points in row-major order (`k` outer, `lambda` inner).
    pub fn points(&self) -> Vec<(f64, f64)> {
        let ls = self.lambda_values();
        self.k_values()
            .into_iter()
            .flat_map(|k| ls.iter().map(move |&l| (k, l)))
            .collect()
    }
}

/// Outcome at one grid point. `regime` is absent when the pipeline failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub k: f64,
    pub lambda: f64,
    pub regime: Option<RegimeLabel>,
    pub farey: String,
    pub runtime: f64,
    pub error: Option<String>,
}

/// Analytic boundaries sampled at the grid's `k` values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Overlays {
    pub k: Vec<f64>,
    pub lambda_sh_minus: Vec<f64>,
    pub lambda_sh_plus: Vec<f64>,
    pub lambda_r_minus: Vec<Option<f64>>,
    pub lambda_r_plus: Vec<Option<f64>>,
    /// `k` at which `q-` and `q+` are aligned.
    pub geometry_divider: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<PointResult>,
    pub overlays: Overlays,
    /// Midpoint between the largest `k` with a single-epoch label and the
    /// smallest `k` with a double-epoch label, when both occur.
    pub empirical_divider: Option<f64>,
    pub divider_offset: Option<f64>,
}

fn classify_point(kp: KoperParams, cfg: &IntegratorConfig, th: &Thresholds) -> PointResult {
    let start = Instant::now();
    let out = simulate_and_classify(&System::Koper(kp), None, cfg, th);
    let runtime = start.elapsed().as_secs_f64();
    match out {
        Ok(a) => PointResult {
            k: kp.k,
            lambda: kp.lambda,
            regime: Some(a.regime),
            farey: a.farey,
            runtime,
            error: None,
        },
        Err(e) => PointResult {
            k: kp.k,
            lambda: kp.lambda,
            regime: None,
            farey: String::new(),
            runtime,
            error: Some(e.to_string()),
        },
    }
}

/// `k` where the folded singularities are aligned, searched on `[lo, hi]`.
pub fn geometry_divider(eps_hat: f64, lo: f64, hi: f64) -> Option<f64> {
    let gap = |k: f64| {
        let p = koper_to_normal_form(&KoperParams::new(k, 0.0, eps_hat, 0.0)).ok()?;
        let rc = classify_relative_config(&p).ok()?;
        Some(match rc.kind {
            ConfigKind::Remote => -1.0,
            ConfigKind::Aligned => 0.0,
            ConfigKind::Connected => 1.0,
        })
    };
    let (a, b) = (gap(lo)?, gap(hi)?);
    if a == 0.0 {
        return Some(lo);
    }
    if b == 0.0 {
        return Some(hi);
    }
    if a == b {
        return None;
    }
    bisect(|k| gap(k).unwrap_or(f64::NAN), lo, hi, 1e-12).ok()
}

/// Boundary curves at the given `k` values.
pub fn overlays(ks: &[f64], eps_hat: f64) -> Overlays {
    let mut o = Overlays {
        k: ks.to_vec(),
        ..Overlays::default()
    };
    for &k in ks {
        let kp = KoperParams::new(k, 0.0, eps_hat, 0.0);
        o.lambda_sh_minus.push(lambda_sh(&kp, Side::Minus));
        o.lambda_sh_plus.push(lambda_sh(&kp, Side::Plus));
        o.lambda_r_minus.push(lambda_r(&kp, Side::Minus).ok());
        o.lambda_r_plus.push(lambda_r(&kp, Side::Plus).ok());
    }
    let (lo, hi) = ks
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &k| (a.min(k), b.max(k)));
    if lo < hi {
        o.geometry_divider = geometry_divider(eps_hat, lo, hi);
    }
    o
}

fn empirical_divider(points: &[PointResult]) -> Option<f64> {
    let single = points
        .iter()
        .filter(|p| p.regime.is_some_and(RegimeLabel::is_single))
        .map(|p| p.k)
        .fold(f64::NEG_INFINITY, f64::max);
    let double = points
        .iter()
        .filter(|p| p.regime == Some(RegimeLabel::MmoDouble))
        .map(|p| p.k)
        .fold(f64::INFINITY, f64::min);
    (single.is_finite() && double.is_finite()).then_some(0.5 * (single + double))
}

/// Simulates and classifies every grid point in parallel. Failures are
/// recorded per point and never abort the sweep.
pub fn sweep_koper(grid: &GridSpec) -> Result<SweepResult> {
    grid.validate()?;
    let points: Vec<PointResult> = grid
        .points()
        .into_par_iter()
        .map(|(k, l)| {
            classify_point(
                KoperParams::new(k, l, grid.eps_hat, grid.delta),
                &grid.integrator,
                &grid.thresholds,
            )
        })
        .collect();
    let divider = empirical_divider(&points);
    Ok(SweepResult {
        overlays: overlays(&grid.k_values(), grid.eps_hat),
        empirical_divider: divider,
        divider_offset: divider.map(|d| d + 4.0),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HHPoint {
    pub current: f64,
    pub regime: Option<RegimeLabel>,
    pub farey: String,
    pub runtime: f64,
    pub error: Option<String>,
}

/// One classified run per applied current.
pub fn sweep_hh(currents: &[f64], hp: &HHParams, cfg: &IntegratorConfig, th: &Thresholds) -> Vec<HHPoint> {
    currents
        .par_iter()
        .map(|&current| {
            let start = Instant::now();
            let sys = System::HodgkinHuxley(hp.with_current(current));
            let out = simulate_and_classify(&sys, None, cfg, th);
            let runtime = start.elapsed().as_secs_f64();
            match out {
                Ok(a) => HHPoint {
                    current,
                    regime: Some(a.regime),
                    farey: a.farey,
                    runtime,
                    error: None,
                },
                Err(e) => HHPoint {
                    current,
                    regime: None,
                    farey: String::new(),
                    runtime,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Companion path of the overlay JSON: `diagram.csv` -> `diagram.overlays.json`.
pub fn overlay_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("overlays.json")
}

/// Writes the diagram CSV (`k,lambda,regime,farey`) to `w`. Failed points
/// have an empty regime.
pub fn write_diagram_csv<W: Write>(res: &SweepResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    out.write_record(["k", "lambda", "regime", "farey"]).map_err(io)?;
    for p in &res.points {
        let regime = p.regime.map(|r| r.as_str()).unwrap_or("");
        out.write_record([
            p.k.to_string(),
            p.lambda.to_string(),
            regime.to_string(),
            p.farey.clone(),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the diagram CSV to `path` and the overlays to the companion JSON.
pub fn emit_diagram(res: &SweepResult, path: &Path) -> Result<PathBuf> {
    write_diagram_csv(res, fs::File::create(path)?)?;
    let json = overlay_path(path);
    #[derive(Serialize)]
    struct Companion<'a> {
        overlays: &'a Overlays,
        empirical_divider: Option<f64>,
        divider_offset: Option<f64>,
    }
    let body = Companion {
        overlays: &res.overlays,
        empirical_divider: res.empirical_divider,
        divider_offset: res.divider_offset,
    };
    fs::write(
        &json,
        serde_json::to_string_pretty(&body).map_err(|e| Error::Io(e.to_string()))?,
    )?;
    Ok(json)
}

/// One row of the boundary table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub k: f64,
    pub lambda_sh_minus: f64,
    pub lambda_sh_plus: f64,
    pub lambda_r_minus: Option<f64>,
    pub lambda_r_plus: Option<f64>,
}

pub fn boundary_table(ks: &[f64], eps_hat: f64) -> Vec<BoundaryRow> {
    let o = overlays(ks, eps_hat);
    (0..ks.len())
        .map(|i| BoundaryRow {
            k: ks[i],
            lambda_sh_minus: o.lambda_sh_minus[i],
            lambda_sh_plus: o.lambda_sh_plus[i],
            lambda_r_minus: o.lambda_r_minus[i],
            lambda_r_plus: o.lambda_r_plus[i],
        })
        .collect()
}

/// Boundary CSV; undefined `lambda_r` values are written as empty cells.
pub fn write_boundaries_csv<W: Write>(rows: &[BoundaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    out.write_record([
        "k",
        "lambda_sh_minus",
        "lambda_sh_plus",
        "lambda_r_minus",
        "lambda_r_plus",
    ])
    .map_err(io)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.k.to_string(),
            r.lambda_sh_minus.to_string(),
            r.lambda_sh_plus.to_string(),
            opt(r.lambda_r_minus),
            opt(r.lambda_r_plus),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// `k` values from `lo` to `hi` inclusive.
pub fn k_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || lo > hi {
        return Err(Error::InvalidParameter("need lo <= hi and a positive step".into()));
    }
    Ok(axis(lo, hi, step))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let c = Config::parse("# comment\nk = -4.5\n\nlambda=1.5 # trailing\neps-hat = 0.01\n").unwrap();
        assert_eq!(c.parsed::<f64>("k").unwrap(), Some(-4.5));
        assert_eq!(c.parsed::<f64>("lambda").unwrap(), Some(1.5));
        assert_eq!(c.parsed::<f64>("eps_hat").unwrap(), Some(0.01));
        assert_eq!(c.parsed::<f64>("delta").unwrap(), None);
        assert!(c.parsed::<f64>("k").is_ok());
        assert!(Config::parse("nonsense").is_err());
        let bad = Config::parse("k = abc").unwrap();
        assert!(bad.parsed::<f64>("k").is_err());
    }

    #[test]
    fn grid_axes() {
        let g = GridSpec::default();
        assert_eq!(g.k_values().len(), 13);
        assert_eq!(g.lambda_values().len(), 13);
        assert_eq!(g.points().len(), 169);
        assert!(GridSpec {
            k_step: 0.0,
            ..g.clone()
        }
        .validate()
        .is_err());
        assert!(GridSpec {
            k_min: -2.0,
            k_max: -3.0,
            ..g.clone()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn divider_is_minus_four() {
        let d = geometry_divider(0.01, -5.0, -3.0).unwrap();
        assert!((d + 4.0).abs() < 1e-8, "{d}");
    }

    #[test]
    fn boundary_rows() {
        let rows = boundary_table(&[-3.0, -4.5], 0.01);
        assert!(rows[0].lambda_r_minus.is_none());
        assert!(rows[1].lambda_r_minus.is_some());
        let mut buf = Vec::new();
        write_boundaries_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "k,lambda_sh_minus,lambda_sh_plus,lambda_r_minus,lambda_r_plus"
        );
        assert!(lines[1].ends_with(",,"));
    }
}
