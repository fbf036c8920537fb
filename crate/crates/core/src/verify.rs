//! The acceptance suite: ten numbered checks against known results, each
//! reporting pass/fail with the measured values.

use std::fmt::Write as _;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{detect_events, Analysis, FareySegment, Frame, Position, RegimeLabel, Thresholds};
use crate::drift::{g_drift, lambda_r, lao_count, DriftEndpoints, LaoCount};
use crate::error::{Error, Result};
use crate::geometry::{classify_relative_config, m2_fold_points, ConfigKind, CubicG, Side};
use crate::harness::{classify_trajectory, run_system, simulate_and_classify, sweep_hh};
use crate::integrate::{integrate, transient_strip, EventKind, IntegratorConfig, Strip, Trajectory};
use crate::local::{canard_coefficient, entry_exit, lambda_sh, numeric_x_dh};
use crate::model::{koper_to_normal_form, HHParams, KoperParams, NormalFormParams, PhiSpec, State3, System};
use crate::quad::simpson;
use crate::roots::brent;

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    /// Mismatches that are logged without failing the check.
    pub notes: Vec<String>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

/// Identifier, title and time budget (seconds) of each check.
pub const CRITERIA: [(u8, &str, f64); 10] = [
    (1, "geometry trichotomy", 1.0),
    (2, "M2 fold points", 1.0),
    (3, "landmark asymptotics", 5.0),
    (4, "entry-exit", 120.0),
    (5, "regime reproduction", 300.0),
    (6, "Farey patterns", 300.0),
    (7, "boundary curves", 600.0),
    (8, "LAO-count scaling", 600.0),
    (9, "HH transitions", 600.0),
    (10, "oracle equivalence", 120.0),
];

struct Outcome {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome {
            passed,
            detail,
            notes: Vec::new(),
        }
    }
}

/// Runs check `id` (1 to 10).
pub fn run_criterion(id: u8) -> Result<CriterionReport> {
    let &(_, title, budget) = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .ok_or_else(|| Error::InvalidParameter(format!("no acceptance criterion {id}")))?;
    let start = Instant::now();
    let out = match id {
        1 => c1_trichotomy(),
        2 => c2_fold_points(),
        3 => c3_landmarks(),
        4 => c4_entry_exit(),
        5 => c5_regimes(),
        6 => c6_farey(),
        7 => c7_boundaries(),
        8 => c8_lao_scaling(),
        9 => c9_hh(),
        _ => c10_oracles(),
    };
    let seconds = start.elapsed().as_secs_f64();
    let out = out.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
    let in_time = seconds <= budget;
    let mut detail = out.detail;
    if !in_time {
        let _ = write!(detail, "; over time budget ({seconds:.1} s > {budget} s)");
    }
    Ok(CriterionReport {
        id,
        title: title.to_string(),
        passed: out.passed && in_time,
        detail,
        notes: out.notes,
        seconds,
        budget_seconds: budget,
    })
}

/// Runs every check in order.
pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA.iter().map(|c| run_criterion(c.0).expect("known id")).collect()
}

/// One line per check: `[PASS] 1 geometry trichotomy (0.01 s): ...`.
pub fn report_line(r: &CriterionReport) -> String {
    let mut s = format!(
        "[{}] {:>2} {} ({:.2} s): {}",
        if r.passed { "PASS" } else { "FAIL" },
        r.id,
        r.title,
        r.seconds,
        r.detail
    );
    for n in &r.notes {
        let _ = write!(s, "\n        note: {n}");
    }
    s
}

pub fn render_table(reports: &[CriterionReport]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&report_line(r));
        s.push('\n');
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    let _ = writeln!(s, "{passed}/{} criteria passed", reports.len());
    s
}

fn koper(k: f64, lambda: f64, eps_hat: f64, delta: f64) -> KoperParams {
    KoperParams::new(k, lambda, eps_hat, delta)
}

fn nf(kp: &KoperParams) -> Result<NormalFormParams> {
    koper_to_normal_form(kp)
}

fn classify_koper(kp: KoperParams, s0: Option<State3>, th: &Thresholds) -> Result<Analysis> {
    simulate_and_classify(&System::Koper(kp), s0, &IntegratorConfig::default(), th)
}

fn c1_trichotomy() -> Result<Outcome> {
    let mut bad = Vec::new();
    let mut ks: Vec<f64> = (0..=10).map(|j| -3.9 - 0.05 * j as f64).collect();
    ks.extend([-4.1, -4.5, -5.0]);
    let mut checked = 0;
    for &k in &ks {
        if (k + 4.0).abs() < 1e-9 {
            continue;
        }
        let want = if k > -4.0 {
            ConfigKind::Connected
        } else {
            ConfigKind::Remote
        };
        let got = classify_relative_config(&nf(&koper(k, 0.0, 0.01, 0.01))?)?.kind;
        checked += 1;
        if got != want {
            bad.push(format!("k={k}: {got:?}"));
        }
    }
    let rc = classify_relative_config(&nf(&koper(-4.0, 0.0, 0.01, 0.01))?)?;
    let gap = (rc.z_q_minus - rc.z_q_plus).abs();
    let aligned = rc.kind == ConfigKind::Aligned && gap <= 1e-9;
    if !aligned {
        bad.push(format!("k=-4: {:?} with |z_q- - z_q+| = {gap:e}", rc.kind));
    }
    Ok(Outcome::new(
        bad.is_empty(),
        format!(
            "{checked} k values classified, k=-4 aligned with gap {gap:.1e}{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!("; wrong: {}", bad.join(", "))
            }
        ),
    ))
}

fn c2_fold_points() -> Result<Outcome> {
    let mut ok = true;
    let mut counts = Vec::new();
    for (k, want) in [(-4.5, 2u8), (-5.9, 2), (-6.0, 1), (-7.0, 0)] {
        let fp = m2_fold_points(&nf(&koper(k, 0.0, 0.01, 0.01))?)?;
        ok &= fp.count == want;
        counts.push(fp.count.to_string());
    }
    let fp = m2_fold_points(&nf(&koper(-4.5, 0.0, 0.01, 0.01))?)?;
    let xs: Vec<f64> = fp.points.iter().map(|p| p.x).collect();
    let x_err = if xs.len() == 2 {
        (xs[0] - 0.5).abs().max((xs[1] - 1.5).abs())
    } else {
        f64::INFINITY
    };
    let disc = m2_fold_points(&nf(&koper(-6.0, 0.0, 0.01, 0.01))?)?.discriminant;
    ok &= x_err <= 1e-12 && disc.abs() <= 1e-12;
    Ok(Outcome::new(
        ok,
        format!(
            "counts {{{}}}, x error at k=-4.5 {x_err:.1e}, discriminant at k=-6 {disc:.1e}",
            counts.join(",")
        ),
    ))
}

fn c3_landmarks() -> Result<Outcome> {
    let err = |eh: f64| -> Result<f64> {
        let p = nf(&koper(-4.5, 1.5, eh, 0.01))?;
        let asym = -p.beta / (2.0 * p.f2) * p.eps;
        Ok((numeric_x_dh(&p)? - asym).abs())
    };
    let (e1, e2) = (err(0.01)?, err(0.005)?);
    let ratio = e1 / e2;
    let p = nf(&koper(-4.0, 0.0, 0.01, 0.01))?;
    let c = (canard_coefficient(&p) * p.eps).abs();
    let ok = (3.0..=5.0).contains(&ratio) && c <= 1e-3 * p.eps;
    Ok(Outcome::new(
        ok,
        format!(
            "x_DH error ratio {ratio:.3} ({e1:.2e} / {e2:.2e}); |z_CN - z_DH| at k=-4 is {c:.1e} (limit {:.1e})",
            1e-3 * p.eps
        ),
    ))
}

/// Inverse of `G` on the lower attracting branch of `M2`.
fn lower_branch_x(p: &NormalFormParams, z: f64) -> Option<f64> {
    let g = CubicG::of(p);
    let fp = m2_fold_points(p).ok()?;
    let hi = if fp.count >= 1 { fp.points[0].x } else { return None };
    let lo = (0..60).map(|i| -(2f64.powi(i))).find(|&x| g.eval(x) < z)?;
    brent(|x| g.eval(x) - z, lo, hi, 1e-13).ok()
}

fn c4_entry_exit() -> Result<Outcome> {
    // literal relation with phi = 0
    let kp = koper(-4.4, 1.5, 0.01, 0.01);
    let p0 = nf(&kp)?.with_phi(PhiSpec::zero());
    let x_dh = numeric_x_dh(&p0)?;
    let mut dev_literal: f64 = 0.0;
    let mut dev_mirror: f64 = 0.0;
    for i in 1..=10 {
        let x_in = -0.04 * f64::from(i);
        let r = entry_exit(&p0, x_in, Side::Minus)?;
        dev_literal = dev_literal.max((r.x_out - (x_dh - x_in)).abs());
        dev_mirror = dev_mirror.max((r.x_out - (2.0 * x_dh - x_in)).abs());
    }
    let literal_ok = dev_literal <= 1e-6;

    // simulated delayed-Hopf passages
    let p = nf(&kp)?;
    let sys = System::Koper(kp);
    let traj = run_system(&sys, None, None, &IntegratorConfig::default())?;
    let tail = transient_strip(&traj, Strip::default())?;
    let frame = Frame::for_system(&sys)?;
    let th = Thresholds::default();
    let events = detect_events(&tail, &frame, &th);
    let w = frame.width();
    let at = |t: f64| {
        let i = tail.t.partition_point(|&s| s < t).min(tail.len() - 1);
        kp.to_normal_state(tail.states[i])
    };
    let tol = 3.0 * p.eps.sqrt();
    let mut worst: f64 = 0.0;
    let mut passages = 0;
    let mut failures = 0;
    let large = |i: usize| events[i + 1].x - events[i].x;
    for i in 0..events.len().saturating_sub(1) {
        if large(i) > -th.lao * w {
            continue;
        }
        let Some(j) = (i + 1..events.len() - 1).find(|&j| large(j) >= th.lao * w) else {
            break;
        };
        let (land, exit) = (at(events[i + 1].t), at(events[j].t));
        let pred = lower_branch_x(&p, land.z).and_then(|x| entry_exit(&p, x, Side::Minus).ok());
        let seen = lower_branch_x(&p, exit.z);
        passages += 1;
        match (pred, seen) {
            (Some(r), Some(x)) => worst = worst.max((r.x_out - x).abs()),
            _ => failures += 1,
        }
    }
    let sim_ok = passages > 0 && failures == 0 && worst <= tol;
    Ok(Outcome::new(
        literal_ok && sim_ok,
        format!(
            "phi=0: max |x_out - (x_DH - x_in)| = {dev_literal:.3e} (limit 1e-6), max |x_out - (2 x_DH - x_in)| = {dev_mirror:.3e}; \
             simulated exits: {passages} passages, worst deviation {worst:.3e} (limit {tol:.3e}), {failures} unresolved"
        ),
    ))
}

fn jitters(n: usize, radius: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let v: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if r > 1e-3 && r <= 1.0 {
                break [radius * v[0] / r, radius * v[1] / r, radius * v[2] / r];
            }
        })
        .collect()
}

fn c5_regimes() -> Result<Outcome> {
    type Check = fn(RegimeLabel) -> bool;
    let cases: [(f64, &str, Check); 4] = [
        (-2.2, "SteadyState", |r| r == RegimeLabel::SteadyState),
        (-3.6, "MmoDouble", |r| r == RegimeLabel::MmoDouble),
        (-4.4, "single-epoch MMO", RegimeLabel::is_single),
        (-5.4, "RelaxationTwoScale", |r| r == RegimeLabel::RelaxationTwoScale),
    ];
    let th = Thresholds::default();
    let offsets = jitters(10, 0.05, 0x5eed);
    let results: Vec<Result<(RegimeLabel, Vec<RegimeLabel>)>> = cases
        .par_iter()
        .map(|&(k, _, _)| {
            let kp = koper(k, 1.5, 0.01, 0.01);
            let sys = System::Koper(kp);
            let traj = run_system(&sys, None, None, &IntegratorConfig::default())?;
            let base = classify_trajectory(&sys, &traj, &th)?.regime;
            let mut others = Vec::new();
            for f in [0.8, 1.2] {
                others.push(classify_trajectory(&sys, &traj, &th.scaled(f))?.regime);
            }
            let s0 = crate::integrate::default_initial_state(&sys);
            let jittered: Vec<Result<RegimeLabel>> = offsets
                .par_iter()
                .map(|d| {
                    let s = State3::new(s0.x + d[0], s0.y + d[1], s0.z + d[2]);
                    Ok(classify_koper(kp, Some(s), &th)?.regime)
                })
                .collect();
            for j in jittered {
                others.push(j?);
            }
            Ok((base, others))
        })
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for ((k, want, check), res) in cases.iter().zip(results) {
        let (base, others) = res?;
        let unstable = others.iter().filter(|&&o| o != base).count();
        let good = check(base) && unstable == 0;
        ok &= good;
        parts.push(format!(
            "k={k}: {base} (want {want}, {unstable}/{} perturbed runs differ)",
            others.len()
        ));
    }
    Ok(Outcome::new(ok, parts.join("; ")))
}

fn alternating(segs: &[FareySegment]) -> bool {
    segs.len() >= 2
        && segs.windows(2).all(|w| w[0].position != w[1].position)
        && segs.iter().all(|s| s.lao == 1 && s.sao >= 1)
}

fn c6_farey() -> Result<Outcome> {
    let cases = [(-4.5, -2.0), (-4.5, 2.0), (-4.0, 0.0), (-4.5, 0.0)];
    let th = Thresholds::default();
    let res: Vec<Result<Analysis>> = cases
        .par_iter()
        .map(|&(k, l)| classify_koper(koper(k, l, 0.01, 0.01), None, &th))
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (&(k, l), a)) in cases.iter().zip(res).enumerate() {
        let a = a?;
        let segs = &a.segments;
        let all_on = |pos: Position| !segs.is_empty() && segs.iter().all(|s| s.position == pos && s.sao >= 1);
        let good = match i {
            0 => all_on(Position::Above),
            1 => all_on(Position::Below),
            2 => alternating(segs),
            _ => a.farey == "{L^0}",
        };
        ok &= good;
        let shown: String = a.farey.split(' ').take(4).collect::<Vec<_>>().join(" ");
        let more = if a.segments.len() > 4 { " ..." } else { "" };
        parts.push(format!("({k},{l}): {} [{shown}{more}]", a.regime));
    }
    Ok(Outcome::new(ok, parts.join("; ")))
}

/// Bisects on `[lo, hi]` for a label change; `lo` must satisfy `pred` and `hi` not.
fn bisect_label<F: Fn(f64) -> Result<bool>>(pred: F, mut lo: f64, mut hi: f64, steps: usize) -> Result<Option<f64>> {
    if !pred(lo)? || pred(hi)? {
        return Ok(None);
    }
    for _ in 0..steps {
        let m = 0.5 * (lo + hi);
        if pred(m)? {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

fn c7_boundaries() -> Result<Outcome> {
    let (eh, d) = (0.01, 0.01);
    let th = Thresholds::default();
    let label = |k: f64, l: f64| -> Result<RegimeLabel> { Ok(classify_koper(koper(k, l, eh, d), None, &th)?.regime) };

    let sh = lambda_sh(&koper(-4.4, 0.0, eh, d), Side::Minus);
    let onset = bisect_label(
        |l| Ok(label(-4.4, l)? != RegimeLabel::SteadyState),
        sh - 0.5,
        sh + 0.5,
        8,
    )?;
    let tol_on = 5.0 * eh + 5.0 * d;

    let lr = lambda_r(&koper(-4.5, 0.0, eh, d), Side::Minus)?;
    let transition = bisect_label(|l| Ok(label(-4.5, l)?.is_relaxation()), 0.0, 1.5, 8)?;
    let tol_r = 5.0 * d;

    let on_ok = onset.is_some_and(|x| (x - sh).abs() <= tol_on);
    let r_ok = transition.is_some_and(|x| (x - lr).abs() <= tol_r);
    let show = |v: Option<f64>| v.map_or("no bracket".to_string(), |v| format!("{v:.4}"));
    Ok(Outcome::new(
        on_ok && r_ok,
        format!(
            "onset at k=-4.4: {} vs lambda_SH- {sh:.4} (limit {tol_on}); relaxation transition at k=-4.5: {} vs lambda_r- {lr:.4} (limit {tol_r})",
            show(onset),
            show(transition)
        ),
    ))
}

struct RunLengths {
    measured: Vec<u64>,
    predicted: Vec<Option<u64>>,
}

fn lao_runs(delta: f64) -> Result<RunLengths> {
    let kp = koper(-4.5, 1.5, 0.01, delta);
    let p = nf(&kp)?;
    let sys = System::Koper(kp);
    let traj = run_system(&sys, None, None, &IntegratorConfig::default())?;
    let tail = transient_strip(&traj, Strip::default())?;
    let a = classify_trajectory(&sys, &traj, &Thresholds::default())?;
    let at = |t: f64| {
        let i = tail.t.partition_point(|&s| s < t).min(tail.len() - 1);
        kp.to_normal_state(tail.states[i])
    };
    let sao: Vec<usize> = (0..a.epochs.len()).filter(|&i| a.epochs[i].sao > 0).collect();
    let mut out = RunLengths {
        measured: Vec::new(),
        predicted: Vec::new(),
    };
    for w in sao.windows(2) {
        let e = &a.epochs[w[0]];
        let (z_in, z_out) = (at(e.t_start).z, at(e.t_end).z);
        out.measured.push(((w[1] - w[0]) as u64).div_ceil(2));
        out.predicted.push(match lao_count(&p, z_in, z_out) {
            Ok(LaoCount::Count(n)) => Some(n),
            _ => None,
        });
    }
    Ok(out)
}

fn c8_lao_scaling() -> Result<Outcome> {
    let runs: Vec<Result<RunLengths>> = [0.01, 0.001].par_iter().map(|&d| lao_runs(d)).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut means = Vec::new();
    for (d, r) in [0.01, 0.001].iter().zip(runs) {
        let r = r?;
        let n = r.measured.len();
        let matched = r
            .measured
            .iter()
            .zip(&r.predicted)
            .filter(|(m, p)| p.is_some_and(|p| p.abs_diff(**m) <= 1))
            .count();
        let mean = r.measured.iter().sum::<u64>() as f64 / n.max(1) as f64;
        means.push(mean);
        ok &= n > 0 && matched == n;
        let pred: Vec<String> = r
            .predicted
            .iter()
            .take(4)
            .map(|p| p.map_or("relax".into(), |p| p.to_string()))
            .collect();
        let meas: Vec<String> = r.measured.iter().take(4).map(u64::to_string).collect();
        parts.push(format!(
            "delta={d}: {matched}/{n} blocks within 1 (measured {} .. predicted {} ..), mean run {mean:.2}",
            meas.join(","),
            pred.join(",")
        ));
    }
    let grows = means[1] > means[0];
    parts.push(format!("run-length grows as delta shrinks: {grows}"));
    Ok(Outcome::new(ok && grows, parts.join("; ")))
}

fn c9_hh() -> Result<Outcome> {
    let currents = [23.0, 25.6, 26.25, 27.0];
    let hp = HHParams {
        eps: 0.0073,
        tau_h: 45.0,
        ..HHParams::default()
    };
    let pts = sweep_hh(&currents, &hp, &IntegratorConfig::default(), &Thresholds::default());
    let mut ok = true;
    let mut notes = Vec::new();
    let mut parts = Vec::new();
    for pt in &pts {
        let Some(r) = pt.regime else {
            ok = false;
            parts.push(format!(
                "I={}: error {}",
                pt.current,
                pt.error.clone().unwrap_or_default()
            ));
            continue;
        };
        let c = pt.current;
        let good = if c == 23.0 {
            r == RegimeLabel::MmoDouble
        } else if c == 26.25 {
            r.is_single()
        } else if c == 27.0 {
            r.is_relaxation()
        } else {
            if !matches!(r, RegimeLabel::Exotic | RegimeLabel::MmoDouble) {
                notes.push(format!("I=25.6 labelled {r}, expected Exotic or MmoDouble"));
            }
            true
        };
        ok &= good;
        parts.push(format!(
            "I={}: {r}{}",
            pt.current,
            if good { "" } else { " (mismatch)" }
        ));
    }
    Ok(Outcome {
        passed: ok,
        detail: parts.join("; "),
        notes,
    })
}

fn drift_oracle(p: &NormalFormParams, x0: f64, x1: f64, z0: f64) -> f64 {
    let f = p.cubic();
    simpson(
        |s| {
            // removable 0/0 at the origin when z0 = 0
            let s = if s == 0.0 { 1e-300 } else { s };
            let y = f.eval(s);
            f.deriv(s) * (p.mu + p.phi.eval(s, y, z0)) / (p.alpha * s + p.beta * y - z0)
        },
        x0,
        x1,
        1_000_000,
    )
}

fn mirror_gap(kp: KoperParams) -> Result<(f64, f64)> {
    let sys = System::KoperSymmetric(kp);
    let settle = run_system(&sys, None, Some(0.5 / kp.delta), &IntegratorConfig::default())?;
    let s1 = settle.last_state().ok_or(Error::EmptyTail)?;
    let probe_cfg = IntegratorConfig {
        sections: vec![0.0],
        ..IntegratorConfig::default()
    };
    let probe = integrate(&sys, s1, (0.0, 5.0 / kp.delta), &probe_cfg)?;
    let ups: Vec<f64> = probe
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Up)
        .map(|e| e.t)
        .collect();
    if ups.len() < 2 {
        return Err(Error::InvalidParameter("no periodic orbit to compare over".into()));
    }
    let period = ups[1] - ups[0];
    let cfg = IntegratorConfig::default();
    let a: Trajectory = integrate(&sys, s1, (0.0, period), &cfg)?;
    let mirrored = System::KoperSymmetric(kp.with_lambda(-kp.lambda));
    let b: Trajectory = integrate(&mirrored, State3::new(-s1.x, -s1.y, -s1.z), (0.0, period), &cfg)?;
    if a.t != b.t {
        return Err(Error::InvalidParameter("mirrored runs took different steps".into()));
    }
    let gap = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(u, v)| (u.x + v.x).abs().max((u.y + v.y).abs()).max((u.z + v.z).abs()))
        .fold(0.0, f64::max);
    Ok((gap, period))
}

fn c10_oracles() -> Result<Outcome> {
    let mut rng = StdRng::seed_from_u64(0x0d1f7);
    let mut segments = Vec::new();
    while segments.len() < 20 {
        let k = rng.random_range(-7.0..-4.2);
        let l = rng.random_range(-1.5..1.5);
        let p = nf(&koper(k, l, 0.01, 0.01))?;
        let e = DriftEndpoints::of(&p.cubic());
        let (lo, hi, z0) = match rng.random_range(0..3) {
            0 => (e.x_star_max, 0.0, 0.0),
            1 => (e.x_max, e.x_0, 0.0),
            _ => (e.x_star_max, 0.0, rng.random_range(0.01..0.3)),
        };
        let (mut x0, mut x1) = (rng.random_range(lo..hi), rng.random_range(lo..hi));
        if rng.random_bool(0.5) {
            std::mem::swap(&mut x0, &mut x1);
        }
        if (x1 - x0).abs() < 1e-3 {
            continue;
        }
        segments.push((p, x0, x1, z0));
    }
    let errs: Vec<Result<f64>> = segments
        .par_iter()
        .map(|(p, x0, x1, z0)| {
            let g = g_drift(p, *x0, *x1, *z0)?.value;
            let o = drift_oracle(p, *x0, *x1, *z0);
            Ok((g - o).abs() / o.abs().max(1.0))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for e in errs {
        worst = worst.max(e?);
    }
    let (gap, period) = mirror_gap(koper(-4.0, 0.5, 0.01, 0.01))?;
    Ok(Outcome::new(
        worst <= 1e-8 && gap <= 1e-6,
        format!("drift vs Simpson: worst scaled error {worst:.2e} over 20 segments; mirror sup-norm {gap:.1e} over period {period:.3}"),
    ))
}
