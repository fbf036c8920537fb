use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mmo_core::classify::{analyse, FareySegment, Frame, RegimeLabel, Thresholds};
use mmo_core::geometry::{geometry_report, Side};
use mmo_core::harness::{
    boundary_table, classify_trajectory, emit_diagram, k_grid, run_system, sweep_hh, sweep_koper, write_boundaries_csv,
    Config, GridSpec,
};
use mmo_core::integrate::{read_csv, write_csv, IntegratorConfig};
use mmo_core::local::{landmarks, LandmarkMode, LocalLandmarks};
use mmo_core::model::{koper_to_normal_form, HHParams, KoperParams, NormalFormParams, PhiSpec, State3, System};
use mmo_core::verify::{render_table, run_criterion, CRITERIA};

#[derive(Parser)]
#[command(
    name = "mmo-scope",
    version,
    about = "Geometry, simulation and classification of three-timescale oscillators"
)]
struct Cli {
    /// Plain-text `key = value` file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Singular geometry of one parameter point, as JSON.
    Geometry(ModelArgs),
    /// Asymptotic and numeric local landmarks side by side.
    Landmarks(LandmarkArgs),
    /// Singular-Hopf and MMO/relaxation boundaries of the Koper model, as CSV.
    Boundaries(BoundaryArgs),
    /// Integrates a system and writes the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Classifies a trajectory CSV.
    Classify(ClassifyArgs),
    /// Sweeps the Koper (k, lambda) plane.
    Sweep(SweepArgs),
    /// Scans the applied current of the Hodgkin-Huxley model.
    Hh(HhArgs),
    /// Runs the acceptance criteria.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemKind {
    Normal,
    Koper,
    KoperSymmetric,
    Hh,
}

impl FromStr for SystemKind {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        <SystemKind as ValueEnum>::from_str(s, true).map_err(|e| anyhow::anyhow!(e))
    }
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Model family (default koper).
    #[arg(long, value_enum)]
    system: Option<SystemKind>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Koper fast timescale ratio.
    #[arg(long)]
    eps_hat: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    f2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    f3: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Normal-form fast timescale ratio.
    #[arg(long)]
    eps: Option<f64>,
    /// Affine slow-flow coefficients `c0,cx,cy,cz`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Applied current of the HH model (uA/cm^2).
    #[arg(long, allow_hyphen_values = true)]
    current: Option<f64>,
    #[arg(long)]
    tau_h: Option<f64>,
    #[arg(long)]
    tau_n: Option<f64>,
    /// Fast timescale ratio of the HH model.
    #[arg(long)]
    hh_eps: Option<f64>,
}

#[derive(Args)]
struct LandmarkArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_side, default_value = "minus")]
    side: Side,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long, allow_hyphen_values = true)]
    k_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k_max: Option<f64>,
    #[arg(long)]
    k_step: Option<f64>,
    #[arg(long)]
    eps_hat: Option<f64>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// End time (default 50 / delta).
    #[arg(long)]
    t_end: Option<f64>,
    /// Initial state `x,y,z` (default depends on the system).
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    /// Keep every n-th step.
    #[arg(long)]
    stride: Option<usize>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Trajectory CSV as written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Classify the whole trajectory instead of dropping the first 30%.
    #[arg(long)]
    keep_transient: bool,
    /// Scale the LAO and SAO thresholds.
    #[arg(long)]
    threshold_scale: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    k_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k_max: Option<f64>,
    #[arg(long)]
    k_step: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_step: Option<f64>,
    #[arg(long)]
    eps_hat: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Diagram CSV; overlays go to the companion `.overlays.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HhArgs {
    /// Comma-separated applied currents.
    #[arg(long, allow_hyphen_values = true)]
    currents: Option<String>,
    #[arg(long)]
    tau_h: Option<f64>,
    #[arg(long)]
    hh_eps: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated criterion numbers (all when absent).
    #[arg(long)]
    only: Option<String>,
    /// Print the reports as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn parse_side(s: &str) -> Result<Side, String> {
    Side::parse(s).map_err(|e| e.to_string())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v:?}")))
        .collect()
}

/// Settings merged from the config file and the flags.
struct Settings(Config);

impl Settings {
    fn new(cli_config: Option<&Path>) -> Result<Settings> {
        Ok(Settings(match cli_config {
            Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => Config::default(),
        }))
    }

    fn put<T: ToString>(&mut self, key: &str, v: &Option<T>) {
        if let Some(v) = v {
            self.0.set(key, v.to_string());
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        Ok(self.0.parsed(key)?)
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key)
    }

    fn model(&mut self, m: &ModelArgs) {
        self.put("system", &m.system);
        for (key, v) in [
            ("k", m.k),
            ("lambda", m.lambda),
            ("eps_hat", m.eps_hat),
            ("delta", m.delta),
            ("f2", m.f2),
            ("f3", m.f3),
            ("alpha", m.alpha),
            ("beta", m.beta),
            ("mu", m.mu),
            ("eps", m.eps),
            ("current", m.current),
            ("tau_h", m.tau_h),
            ("tau_n", m.tau_n),
            ("hh_eps", m.hh_eps),
        ] {
            self.put(key, &v);
        }
        self.put("phi", &m.phi);
    }

    fn solver(&mut self, s: &SolverArgs) -> Result<IntegratorConfig> {
        self.put("rtol", &s.rtol);
        self.put("atol", &s.atol);
        self.put("max_steps", &s.max_steps);
        let d = IntegratorConfig::default();
        let cfg = IntegratorConfig {
            rel_tol: self.or("rtol", d.rel_tol)?,
            abs_tol: self.or("atol", d.abs_tol)?,
            max_steps: self.or("max_steps", d.max_steps)?,
            stride: self.or("stride", d.stride)?,
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn koper(&self) -> Result<KoperParams> {
        Ok(KoperParams::new(
            self.or("k", -4.5)?,
            self.or("lambda", 1.5)?,
            self.or("eps_hat", 0.01)?,
            self.or("delta", 0.01)?,
        ))
    }

    fn hh(&self) -> Result<HHParams> {
        let d = HHParams::default();
        Ok(HHParams {
            current: self.or("current", d.current)?,
            tau_h: self.or("tau_h", d.tau_h)?,
            tau_n: self.or("tau_n", d.tau_n)?,
            eps: self.or("hh_eps", d.eps)?,
            ..d
        })
    }

    fn normal(&self) -> Result<NormalFormParams> {
        let phi = match self.str("phi") {
            None => PhiSpec::koper(),
            Some(s) => match parse_list(s)?.as_slice() {
                &[c0, cx, cy, cz] => PhiSpec::affine(c0, cx, cy, cz),
                _ => bail!("phi needs four coefficients c0,cx,cy,cz"),
            },
        };
        let p = NormalFormParams {
            f2: self.or("f2", 0.75)?,
            f3: self.or("f3", -0.25)?,
            alpha: self.or("alpha", 1.0)?,
            beta: self.or("beta", -2.0)?,
            mu: self.or("mu", 0.5)?,
            eps: self.or("eps", 0.0025)?,
            delta: self.or("delta", 0.01)?,
            phi,
        };
        p.validate()?;
        Ok(p)
    }

    fn system_kind(&self) -> Result<SystemKind> {
        self.get("system").map(|s| s.unwrap_or(SystemKind::Koper))
    }

    fn system(&self) -> Result<System> {
        Ok(match self.system_kind()? {
            SystemKind::Normal => System::NormalForm(self.normal()?),
            SystemKind::Koper => System::Koper(self.koper()?),
            SystemKind::KoperSymmetric => System::KoperSymmetric(self.koper()?),
            SystemKind::Hh => System::HodgkinHuxley(self.hh()?),
        })
    }

    /// Normal-form parameters of a normal-form or Koper point.
    fn normal_form(&self) -> Result<NormalFormParams> {
        match self.system_kind()? {
            SystemKind::Normal => self.normal(),
            SystemKind::Koper => Ok(koper_to_normal_form(&self.koper()?)?),
            other => bail!("{other} has no normal-form geometry"),
        }
    }
}

fn write_out(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file =
                io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
            f(&mut file)?;
            file.flush()?;
        }
        None => {
            let mut buf = Vec::new();
            f(&mut buf)?;
            emit(&String::from_utf8_lossy(&buf))?;
        }
    }
    Ok(())
}

/// Writes `text` to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn print_json(v: &impl Serialize) -> Result<()> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"))
}

#[derive(Serialize)]
struct LandmarkOutput<'a> {
    side: Side,
    asymptotic: &'a LocalLandmarks,
    numeric: &'a LocalLandmarks,
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    regime: RegimeLabel,
    farey: &'a str,
    segments: &'a [FareySegment],
    ambiguity_flags: &'a [String],
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    points: usize,
    failed: usize,
    diagram: &'a Path,
    overlays: &'a Path,
    empirical_divider: Option<f64>,
    divider_offset: Option<f64>,
}

fn landmark_table(a: &LocalLandmarks, n: &LocalLandmarks) -> String {
    let rows = [
        ("x_dh", a.x_dh, n.x_dh),
        ("y_dh", a.y_dh, n.y_dh),
        ("z_dh", a.z_dh, n.z_dh),
        ("x_dn_minus", a.x_dn_minus, n.x_dn_minus),
        ("z_dn_minus", a.z_dn_minus, n.z_dn_minus),
        ("x_dn_plus", a.x_dn_plus, n.x_dn_plus),
        ("z_dn_plus", a.z_dn_plus, n.z_dn_plus),
        ("z_cn", a.z_cn, n.z_cn),
    ];
    let mut s = format!("{:<12} {:>22} {:>22}\n", "landmark", "asymptotic", "numeric");
    for (name, x, y) in rows {
        s.push_str(&format!("{name:<12} {x:>22.15e} {y:>22.15e}\n"));
    }
    s
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut st = Settings::new(cli.config.as_deref())?;
    match cli.command {
        Command::Geometry(m) => {
            st.model(&m);
            print_json(&geometry_report(&st.normal_form()?)?)?;
        }
        Command::Landmarks(a) => {
            st.model(&a.model);
            let p = st.normal_form()?;
            let asym = landmarks(&p, a.side, LandmarkMode::Asymptotic)?;
            let num = landmarks(&p, a.side, LandmarkMode::Numeric)?;
            match a.format {
                Format::Json => print_json(&LandmarkOutput {
                    side: a.side,
                    asymptotic: &asym,
                    numeric: &num,
                })?,
                Format::Table => emit(&landmark_table(&asym, &num))?,
            }
        }
        Command::Boundaries(b) => {
            st.put("k_min", &b.k_min);
            st.put("k_max", &b.k_max);
            st.put("k_step", &b.k_step);
            st.put("eps_hat", &b.eps_hat);
            let ks = k_grid(st.or("k_min", -8.0)?, st.or("k_max", -2.5)?, st.or("k_step", 0.1)?)?;
            let rows = boundary_table(&ks, st.or("eps_hat", 0.01)?);
            write_out(b.out.as_deref(), |w| Ok(write_boundaries_csv(&rows, w)?))?;
        }
        Command::Simulate(s) => {
            st.model(&s.model);
            st.put("t_end", &s.t_end);
            st.put("initial", &s.initial);
            st.put("stride", &s.stride);
            let cfg = st.solver(&s.solver)?;
            let sys = st.system()?;
            let s0 = match st.str("initial") {
                None => None,
                Some(v) => match parse_list(v)?.as_slice() {
                    &[x, y, z] => Some(State3::new(x, y, z)),
                    _ => bail!("initial state needs three values x,y,z"),
                },
            };
            let traj = run_system(&sys, s0, st.get("t_end")?, &cfg)?;
            write_out(s.out.as_deref(), |w| Ok(write_csv(&traj, w)?))?;
            eprintln!(
                "{} steps accepted, {} rejected, {} implicit",
                traj.stats.accepted, traj.stats.rejected, traj.stats.implicit_steps
            );
        }
        Command::Classify(c) => {
            st.model(&c.model);
            st.put("threshold_scale", &c.threshold_scale);
            let sys = st.system()?;
            let file = fs::File::open(&c.input).with_context(|| format!("opening {}", c.input.display()))?;
            let traj = read_csv(io::BufReader::new(file))?;
            let th = Thresholds::default().scaled(st.or("threshold_scale", 1.0)?);
            let a = if c.keep_transient {
                analyse(&traj, &Frame::for_system(&sys)?, &th, Some(&sys))
            } else {
                classify_trajectory(&sys, &traj, &th)?
            };
            print_json(&ClassifyOutput {
                regime: a.regime,
                farey: &a.farey,
                segments: &a.segments,
                ambiguity_flags: &a.ambiguity_flags,
            })?;
        }
        Command::Sweep(s) => {
            for (key, v) in [
                ("k_min", s.k_min),
                ("k_max", s.k_max),
                ("k_step", s.k_step),
                ("lambda_min", s.lambda_min),
                ("lambda_max", s.lambda_max),
                ("lambda_step", s.lambda_step),
                ("eps_hat", s.eps_hat),
                ("delta", s.delta),
            ] {
                st.put(key, &v);
            }
            let d = GridSpec::default();
            let grid = GridSpec {
                k_min: st.or("k_min", d.k_min)?,
                k_max: st.or("k_max", d.k_max)?,
                k_step: st.or("k_step", d.k_step)?,
                lambda_min: st.or("lambda_min", d.lambda_min)?,
                lambda_max: st.or("lambda_max", d.lambda_max)?,
                lambda_step: st.or("lambda_step", d.lambda_step)?,
                eps_hat: st.or("eps_hat", d.eps_hat)?,
                delta: st.or("delta", d.delta)?,
                integrator: st.solver(&s.solver)?,
                thresholds: d.thresholds,
            };
            let res = sweep_koper(&grid)?;
            let overlay = emit_diagram(&res, &s.out)?;
            let failed = res.points.iter().filter(|p| p.error.is_some()).count();
            print_json(&SweepSummary {
                points: res.points.len(),
                failed,
                diagram: &s.out,
                overlays: &overlay,
                empirical_divider: res.empirical_divider,
                divider_offset: res.divider_offset,
            })?;
        }
        Command::Hh(h) => {
            st.put("currents", &h.currents);
            st.put("tau_h", &h.tau_h);
            st.put("hh_eps", &h.hh_eps);
            let cfg = st.solver(&h.solver)?;
            let currents = parse_list(st.str("currents").unwrap_or("23,25.6,26.25,27"))?;
            let pts = sweep_hh(&currents, &st.hh()?, &cfg, &Thresholds::default());
            print_json(&pts)?;
        }
        Command::Verify(v) => {
            let ids: Vec<u8> = match &v.only {
                None => CRITERIA.iter().map(|c| c.0).collect(),
                Some(s) => s
                    .split(',')
                    .map(|x| x.trim().parse::<u8>().with_context(|| format!("bad criterion {x:?}")))
                    .collect::<Result<_>>()?,
            };
            let reports = ids.iter().map(|&id| run_criterion(id)).collect::<Result<Vec<_>, _>>()?;
            if v.json {
                print_json(&reports)?;
            } else {
                emit(&render_table(&reports))?;
            }
            if reports.iter().any(|r| !r.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
