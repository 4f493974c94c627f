//! Command-line front end. Structured reports go to standard output as JSON,
//! bulk tables as CSV; diagnostics go to standard error.
//!
//! Exit codes: 0 success, 1 analysis failure, 2 usage or configuration error.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::conditions::{check_conditions, cycle_report, scan_regions, Grid};
use crate::error::Error;
use crate::integrate::{integrate_em, integrate_rk4, Trajectory};
use crate::model::{lift, Harmonic, Omega, Params, PhaseState};
use crate::observables::{
    detect_switches, frequency_series, order_parameter_series, order_parameters, transition_scaling, ScalingSetup,
    HIGH, LOW,
};
use crate::region::{potential_map, verify_connection, ConnectionOptions};
use crate::spectral::{cycle_labels, equilibrium_point, spectrum_report, EquilibriumLabel, Source};

/// Failure of a CLI invocation, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Analysis(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Analysis(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParam { .. }
            | Error::UnsupportedPreset(_)
            | Error::LengthMismatch { .. }
            | Error::ReductionUnavailable
            | Error::UnsupportedN(_)
            | Error::OutOfDomainAngles
            | Error::EmptyGrid
            | Error::WindowTooShort(_)
            | Error::InvalidLabel(_) => CliError::Usage(msg),
            _ => CliError::Analysis(msg),
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses radians, accepting `pi`, `pi/2`, `2pi`, `3*pi/4` and plain numbers.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let Some(idx) = t.find("pi") else {
        return Err(format!("not an angle: `{s}`"));
    };
    let (head, tail) = (t[..idx].trim_end_matches('*').trim(), t[idx + 2..].trim());
    let coef = match head {
        "" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| format!("not an angle: `{s}`"))?,
    };
    let den = match tail {
        "" => 1.0,
        d => d
            .strip_prefix('/')
            .and_then(|x| x.trim().parse::<f64>().ok())
            .filter(|x| *x != 0.0)
            .ok_or_else(|| format!("not an angle: `{s}`"))?,
    };
    Ok(coef * PI / den)
}

fn de_angle<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Str(s) => parse_angle(&s).map_err(serde::de::Error::custom),
    }
}

fn default_alpha2() -> f64 {
    PI / 2.0
}
fn default_alpha4() -> f64 {
    PI
}
fn default_a2() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_stride() -> usize {
    1
}
fn default_jitter() -> f64 {
    0.01
}

/// Starting point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Initial {
    /// A labelled equilibrium plus independent uniform jitter in `[−j, j]`.
    Label {
        label: String,
        #[serde(default = "default_jitter")]
        jitter: f64,
    },
    /// Explicit phases in flat oscillator order.
    Phases { phases: Vec<f64> },
}

/// Output file names, resolved against the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "Outputs::default_trajectory")]
    pub trajectory: String,
    #[serde(default = "Outputs::default_observables")]
    pub observables: String,
    #[serde(default)]
    pub unwrapped: Option<String>,
    #[serde(default)]
    pub events: Option<String>,
}

impl Outputs {
    fn default_trajectory() -> String {
        "trajectory.csv".into()
    }
    fn default_observables() -> String {
        "observables.csv".into()
    }
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            trajectory: Self::default_trajectory(),
            observables: Self::default_observables(),
            unwrapped: None,
            events: None,
        }
    }
}

/// A simulation configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_alpha2", deserialize_with = "de_angle")]
    pub alpha2: f64,
    #[serde(default = "default_alpha4", deserialize_with = "de_angle")]
    pub alpha4: f64,
    pub r: f64,
    #[serde(default = "default_a2")]
    pub a2: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default)]
    pub omega: Omega,
    #[serde(default)]
    pub delta_sym: f64,
    #[serde(default)]
    pub delta_asym: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub harmonics: Option<Vec<Harmonic>>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: Option<Initial>,
    #[serde(default)]
    pub outputs: Option<Outputs>,
}

impl RunConfig {
    pub fn params(&self) -> Params {
        Params {
            m: self.m,
            n: self.n,
            alpha2: self.alpha2,
            alpha4: self.alpha4,
            r: self.r,
            a2: self.a2,
            k: self.k,
            omega: self.omega,
            delta_sym: self.delta_sym,
            delta_asym: self.delta_asym,
            eta: self.eta,
            harmonics: self.harmonics.clone(),
        }
    }

    fn validate(&self) -> crate::Result<()> {
        self.params().validate()?;
        crate::integrate::Schedule::new(self.dt, self.t_end, self.stride)?;
        match &self.initial {
            Some(Initial::Label { label, jitter }) => {
                let l: EquilibriumLabel = label.parse()?;
                if l.len() != self.m {
                    return Err(Error::InvalidParam {
                        key: "initial.label",
                        reason: format!("length {} differs from M = {}", l.len(), self.m),
                    });
                }
                if !(jitter.is_finite() && *jitter >= 0.0) {
                    return Err(Error::InvalidParam {
                        key: "initial.jitter",
                        reason: "must be non-negative".into(),
                    });
                }
            }
            Some(Initial::Phases { phases }) => {
                if phases.len() != self.m * self.n {
                    return Err(Error::InvalidParam {
                        key: "initial.phases",
                        reason: format!("expected {} phases, got {}", self.m * self.n, phases.len()),
                    });
                }
            }
            None => {}
        }
        Ok(())
    }

    /// Initial phases. Jitter is drawn from ChaCha8 seeded with `seed` on
    /// stream 1, so it never overlaps the noise stream of the integrator.
    pub fn initial_state(&self) -> crate::Result<PhaseState> {
        let default = Initial::Label {
            label: std::iter::once('D').chain(std::iter::repeat('S').take(self.m - 1)).collect(),
            jitter: default_jitter(),
        };
        match self.initial.as_ref().unwrap_or(&default) {
            Initial::Phases { phases } => Ok(PhaseState::new(phases.clone())),
            Initial::Label { label, jitter } => {
                let l: EquilibriumLabel = label.parse()?;
                let base = lift(&equilibrium_point(&l, self.n), self.n).into_vec();
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(1);
                Ok(PhaseState::new(
                    base.into_iter()
                        .map(|t| if *jitter > 0.0 { t + rng.gen_range(-jitter..=*jitter) } else { t })
                        .collect(),
                ))
            }
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Usage(format!("config: {}", e.inner()))
        } else {
            CliError::Usage(format!("config key `{path}`: {}", e.inner()))
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text)
}

/// Formats a float with 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_line(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let fields: Vec<String> = fields.into_iter().collect();
    out.push_str(&fields.join(","));
    out.push('\n');
}

pub fn trajectory_csv(traj: &Trajectory, unwrapped: bool) -> String {
    let (m, n) = (traj.params.m, traj.params.n);
    let mut out = String::new();
    let header = std::iter::once("t".to_string())
        .chain((1..=m).flat_map(|s| (1..=n).map(move |k| format!("theta_{s}_{k}"))));
    csv_line(&mut out, header);
    for (i, t) in traj.times.iter().enumerate() {
        let row: &[f64] = if unwrapped { &traj.unwrapped[i] } else { traj.states[i].as_slice() };
        csv_line(&mut out, std::iter::once(fmt_f(*t)).chain(row.iter().map(|v| fmt_f(*v))));
    }
    out
}

pub fn observables_csv(traj: &Trajectory) -> String {
    let m = traj.params.m;
    let (r, args) = order_parameter_series(traj);
    let freq = frequency_series(traj);
    let mut out = String::new();
    let header = std::iter::once("t".to_string())
        .chain((1..=m).map(|s| format!("R_{s}")))
        .chain((1..=m).map(|s| format!("arg_{s}")))
        .chain((1..=m).map(|s| format!("f_{s}")));
    csv_line(&mut out, header);
    for i in 0..traj.len() {
        let row = std::iter::once(fmt_f(traj.times[i]))
            .chain(r[i].iter().map(|v| fmt_f(*v)))
            .chain(args[i].iter().map(|v| fmt_f(*v)))
            .chain(freq[i].iter().map(|v| fmt_f(*v)));
        csv_line(&mut out, row);
    }
    out
}

pub fn events_csv(events: &[crate::observables::SwitchingEvent]) -> String {
    let mut out = String::from("idx,population,t_enter,t_exit,duration\n");
    for (i, e) in events.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            e.population,
            fmt_f(e.t_enter),
            fmt_f(e.t_exit),
            fmt_f(e.duration)
        );
    }
    out
}

/// Runs the configured simulation: Euler–Maruyama when `eta > 0`, RK4 otherwise.
pub fn simulate(cfg: &RunConfig) -> CliResult<Trajectory> {
    let params = cfg.params();
    let theta0 = cfg.initial_state()?;
    let traj = if params.eta > 0.0 {
        integrate_em(&theta0, &params, cfg.dt, cfg.t_end, cfg.stride, cfg.seed)?
    } else {
        integrate_rk4(&theta0, &params, cfg.dt, cfg.t_end, cfg.stride)?
    };
    Ok(traj)
}

#[derive(Debug, Parser)]
#[command(name = "hetsync", version, about = "Heteroclinic switching in networks of phase oscillator populations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of populations.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Oscillators per population.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "pi/2", value_parser = parse_angle, allow_hyphen_values = true)]
    pub alpha2: f64,
    #[arg(long, default_value = "pi", value_parser = parse_angle, allow_hyphen_values = true)]
    pub alpha4: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub r: f64,
    #[arg(long = "k", default_value_t = 0.0, allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long, default_value_t = 1.0)]
    pub a2: f64,
}

impl ModelArgs {
    fn params(&self) -> Params {
        let mut p = Params::new(self.m, self.n)
            .with_angles(self.alpha2, self.alpha4)
            .with_rk(self.r, self.k);
        p.a2 = self.a2;
        p
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Reduced,
    Full,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a configured network and write trajectory and observable CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Linear stability of a labelled equilibrium as JSON.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        label: String,
        #[arg(long, value_enum, default_value = "reduced")]
        source: SourceArg,
    },
    /// Existence and dissipativity conditions as JSON.
    Conditions {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Condition flags over a grid, as CSV. Axes are `lo:hi:count` or comma lists.
    Scan {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "pi/2")]
        alpha2: String,
        #[arg(long, default_value = "pi", value_parser = parse_angle)]
        alpha4: f64,
        #[arg(long)]
        r: String,
        #[arg(long = "k")]
        k: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chain report plus numerical evidence for each connection of the cycle.
    VerifyCycle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1e3)]
        tmax: f64,
    },
    /// V, Q, R and V̇ over the canonical invariant region, as CSV.
    PotentialMap {
        #[arg(long, default_value_t = 400)]
        grid: usize,
        #[arg(long, default_value_t = 0.01)]
        r: f64,
        #[arg(long = "k", default_value_t = 0.16)]
        k: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Desynchronization episodes from a trajectory CSV.
    Switches {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, default_value_t = LOW)]
        low: f64,
        #[arg(long, default_value_t = HIGH)]
        high: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean residence time per noise level, as CSV.
    Scaling {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',', required = true)]
        eta: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        repetitions: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Analysis(format!("stdout: {e}"))),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn parse_axis(spec: &str, angles: bool) -> CliResult<Vec<f64>> {
    let num = |s: &str| -> CliResult<f64> {
        if angles {
            parse_angle(s).map_err(CliError::Usage)
        } else {
            s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("not a number: `{s}`")))
        }
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [lo, hi, count] => {
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad grid count in `{spec}`")))?;
            Ok(Grid::linspace(num(lo)?, num(hi)?, count))
        }
        [_] => spec.split(',').map(num).collect(),
        _ => Err(CliError::Usage(format!("bad axis `{spec}` (use lo:hi:count or a comma list)"))),
    }
}

/// Reads a trajectory CSV written by `simulate`.
pub fn read_trajectory_csv(text: &str) -> CliResult<(usize, usize, Vec<f64>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Usage("empty trajectory file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let last = cols.last().copied().unwrap_or("");
    let dims: Vec<usize> = last
        .strip_prefix("theta_")
        .map(|s| s.split('_').filter_map(|x| x.parse().ok()).collect())
        .unwrap_or_default();
    let (m, n) = match (cols.first(), dims.as_slice()) {
        (Some(&"t"), [m, n]) if cols.len() == 1 + m * n => (*m, *n),
        _ => return Err(CliError::Usage("trajectory header must be `t,theta_1_1,...,theta_M_N`".into())),
    };
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("trajectory line {}: not numeric", i + 2)))?;
        if vals.len() != 1 + m * n {
            return Err(CliError::Usage(format!("trajectory line {}: expected {} fields", i + 2, 1 + m * n)));
        }
        times.push(vals[0]);
        rows.push(vals[1..].to_vec());
    }
    Ok((m, n, times, rows))
}

#[derive(Serialize)]
struct EdgeResult {
    from: String,
    to: String,
    ok: bool,
    /// Arrival plus, where it applies, a monotone potential along every path.
    certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    evidence: Option<crate::region::ConnectionEvidence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct CycleOutput {
    chain: crate::conditions::ChainReport,
    connections: Vec<EdgeResult>,
}

fn cycle_edges(n: usize) -> Vec<(EquilibriumLabel, EquilibriumLabel)> {
    let labels = cycle_labels(3);
    let all: Vec<_> = (0..labels.len())
        .map(|i| (labels[i].clone(), labels[(i + 1) % labels.len()].clone()))
        .collect();
    if n == 2 {
        all
    } else {
        all.into_iter().take(2).collect()
    }
}

/// Executes one parsed command.
pub fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate { config, out_dir } => {
            let cfg = read_config(&config)?;
            let traj = simulate(&cfg)?;
            let outs = cfg.outputs.clone().unwrap_or_default();
            fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
            let path = |name: &str| out_dir.join(name);
            emit(Some(&path(&outs.trajectory)), &trajectory_csv(&traj, false))?;
            emit(Some(&path(&outs.observables)), &observables_csv(&traj))?;
            if let Some(u) = &outs.unwrapped {
                emit(Some(&path(u)), &trajectory_csv(&traj, true))?;
            }
            if let Some(ev) = &outs.events {
                let (r, _) = order_parameter_series(&traj);
                let events = detect_switches(&traj.times, &r, LOW, HIGH)?;
                emit(Some(&path(ev)), &events_csv(&events))?;
            }
            Ok(())
        }
        Command::Spectrum { model, label, source } => {
            let label: EquilibriumLabel = label.parse()?;
            let source = match source {
                SourceArg::Reduced => Source::Reduced,
                SourceArg::Full => Source::Full,
            };
            let report = spectrum_report(&label, &model.params(), source)?;
            emit(None, &to_json(&report))
        }
        Command::Conditions { model } => emit(None, &to_json(&check_conditions(&model.params())?)),
        Command::Scan {
            n,
            alpha2,
            alpha4,
            r,
            k,
            out,
        } => {
            let grid = Grid {
                alpha2: parse_axis(&alpha2, true)?,
                r: parse_axis(&r, false)?,
                k: parse_axis(&k, false)?,
            };
            let rows = scan_regions(&grid, alpha4, n)?;
            let b = |c: bool| if c { "1" } else { "0" }.to_string();
            let mut text = String::from("alpha2,r,K,c_omega,c_lambda,c_nu,c_psi,window\n");
            for row in rows {
                let rep = &row.report;
                csv_line(
                    &mut text,
                    [
                        fmt_f(row.alpha2),
                        fmt_f(row.r),
                        fmt_f(row.k),
                        b(rep.c_omega.holds),
                        b(rep.c_lambda.holds),
                        b(rep.c_nu.holds),
                        rep.c_psi.map(|c| b(c.holds)).unwrap_or_default(),
                        b(rep.window.holds),
                    ],
                );
            }
            emit(out.as_deref(), &text)
        }
        Command::VerifyCycle { model, tol, tmax } => {
            let params = model.params();
            let chain = cycle_report(&params)?;
            let opts = ConnectionOptions {
                tol,
                t_max: tmax,
                ..Default::default()
            };
            let mut connections = Vec::new();
            let mut failures = Vec::new();
            for (from, to) in cycle_edges(params.n) {
                let res = verify_connection(&from, &to, &params, &opts);
                let (ok, evidence, error) = match res {
                    Ok(ev) => (true, Some(ev), None),
                    Err(e) => {
                        failures.push(format!("{from}->{to}: {e}"));
                        (false, None, Some(e.to_string()))
                    }
                };
                connections.push(EdgeResult {
                    from: from.to_string(),
                    to: to.to_string(),
                    ok,
                    certified: evidence.as_ref().is_some_and(|e| e.certified()),
                    evidence,
                    error,
                });
            }
            emit(None, &to_json(&CycleOutput { chain, connections }))?;
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Analysis(format!("connection check failed: {}", failures.join("; "))))
            }
        }
        Command::PotentialMap { grid, r, k, out } => {
            let params = Params::new(3, 3).with_rk(r, k);
            let rows = potential_map(grid, &params)?;
            let mut text = String::from("psi1,psi2,V,Q,R,vdot_DpS,vdot_pDS\n");
            for p in rows {
                csv_line(
                    &mut text,
                    [
                        fmt_f(p.psi1),
                        fmt_f(p.psi2),
                        fmt_f(p.v),
                        fmt_f(p.q),
                        p.r.map(fmt_f).unwrap_or_default(),
                        fmt_f(p.vdot_dps),
                        fmt_f(p.vdot_pds),
                    ],
                );
            }
            emit(out.as_deref(), &text)
        }
        Command::Switches {
            trajectory,
            low,
            high,
            out,
        } => {
            let text = fs::read_to_string(&trajectory).map_err(|e| io_err(&trajectory, e))?;
            let (_, n, times, rows) = read_trajectory_csv(&text)?;
            let r: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|th| order_parameters(&PhaseState::new(th), n).into_iter().map(|(r, _)| r).collect())
                .collect();
            let events = detect_switches(&times, &r, low, high)?;
            emit(out.as_deref(), &events_csv(&events))
        }
        Command::Scaling {
            config,
            eta,
            repetitions,
            out,
        } => {
            let cfg = read_config(&config)?;
            if repetitions == 0 {
                return Err(CliError::Usage("--repetitions must be at least 1".into()));
            }
            let setup = ScalingSetup {
                theta0: cfg.initial_state()?,
                dt: cfg.dt,
                t_end: cfg.t_end,
                stride: cfg.stride,
                repetitions,
                seed_base: cfg.seed,
            };
            let report = transition_scaling(&cfg.params(), &eta, &setup)?;
            let mut text = String::from("eta,events,mean_residence\n");
            for row in &report.rows {
                let _ = writeln!(text, "{},{},{}", fmt_f(row.eta), row.events, fmt_f(row.mean_residence));
            }
            eprintln!(
                "fit: mean = {:.6} + {:.6}*ln(1/eta), R^2 = {:.6}, monotone = {}",
                report.intercept, report.slope, report.r_squared, report.monotone
            );
            emit(out.as_deref(), &text)
        }
    }
}

/// Caps the rayon pool from `HETSYNC_THREADS` (0 or unset: automatic).
fn configure_threads() {
    if let Some(n) = std::env::var("HETSYNC_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
