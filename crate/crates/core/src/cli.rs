//! Run configuration, artifact export and the subcommand implementations
//! behind the `elastic-obstacle` binary.
//!
//! Every floating-point number written to CSV uses `{:.16e}` (17
//! significant digits), so reruns of a configuration produce identical
//! bytes.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diagnostics::{check_flow, Verdict};
use crate::elastica::{
    c0, h_star, h_star_clamped, rect_curvature, rect_point, rect_quarter_period,
    symmetric_stationary,
};
use crate::energy::d1;
use crate::error::{Error, Result};
use crate::grid::{interpolate, node, GridFunction, ObstacleSpec};
use crate::scheme::{
    run, FailureKind, FlowResult, Horizon, InnerMethod, InnerSettings, RunStatus, SchemeParams,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

pub const LEDGER_FILE: &str = "ledger.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FLOW_FILE: &str = "flow.json";

/// Solver failures map to 3, everything else to 2.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } | Error::CapViolation { .. } => EXIT_SOLVER,
        _ => EXIT_VALIDATION,
    }
}

/// `{"error": kind, "message": text}` on one line.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({ "error": err.kind(), "message": err.to_string() }).to_string()
}

/// `T` as written in a configuration: a positive number or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum HorizonSpec {
    #[default]
    Auto,
    Fixed(f64),
}

impl From<HorizonSpec> for Horizon {
    fn from(h: HorizonSpec) -> Self {
        match h {
            HorizonSpec::Auto => Horizon::Auto,
            HorizonSpec::Fixed(t) => Horizon::Fixed(t),
        }
    }
}

impl FromStr for HorizonSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(HorizonSpec::Auto);
        }
        s.parse::<f64>()
            .map(HorizonSpec::Fixed)
            .map_err(|_| Error::Config(format!("T must be a number or \"auto\", got {s:?}")))
    }
}

impl fmt::Display for HorizonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizonSpec::Auto => f.write_str("auto"),
            HorizonSpec::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl Serialize for HorizonSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HorizonSpec::Auto => s.serialize_str("auto"),
            HorizonSpec::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for HorizonSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(t) => Ok(HorizonSpec::Fixed(t)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// The initial datum `u0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    /// `amplitude · sin(mode·πx)`.
    Sine {
        amplitude: f64,
        #[serde(default = "default_mode")]
        mode: u32,
    },
    /// Piecewise-linear interpolation of `(x, u)` pairs.
    Table { table: Vec<(f64, f64)> },
    /// The symmetric stationary profile of the given height.
    Stationary { height: f64 },
}

fn default_mode() -> u32 {
    1
}

impl InitialDatum {
    pub fn sample(&self, m: usize) -> Result<GridFunction> {
        match self {
            InitialDatum::Sine { amplitude, mode } => {
                let k = *mode as f64 * std::f64::consts::PI;
                GridFunction::from_fn(m, |x| amplitude * (k * x).sin())
            }
            InitialDatum::Table { table } => {
                if table.len() < 2 || table.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Config("u0 table needs increasing abscissae".into()));
                }
                let values = (0..=m).map(|j| interpolate(table, node(j, m))).collect();
                GridFunction::new(values)
            }
            InitialDatum::Stationary { height } => symmetric_stationary(*height, m),
        }
    }
}

fn default_inner_tol() -> f64 {
    InnerSettings::default().tol
}

fn default_inner_max_iter() -> usize {
    InnerSettings::default().max_iter
}

fn default_stride() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub lambda: f64,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "T", default)]
    pub horizon: HorizonSpec,
    pub obstacle: ObstacleSpec,
    pub u0: InitialDatum,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_inner_max_iter")]
    pub inner_max_iter: usize,
    #[serde(default)]
    pub inner_method: InnerMethod,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Command-line values that replace configuration fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub horizon: Option<HorizonSpec>,
    pub obstacle_height: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = o.lambda {
            self.lambda = v;
        }
        if let Some(v) = o.m {
            self.m = v;
        }
        if let Some(v) = o.n {
            self.n = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(h) = o.obstacle_height {
            match &mut self.obstacle {
                ObstacleSpec::SymmetricCone { height, .. } => *height = h,
                ObstacleSpec::Sampled { .. } => {
                    return Err(Error::Config(
                        "--obstacle-height applies to cone obstacles only".into(),
                    ))
                }
            }
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        Ok(())
    }

    /// Checks the configuration and builds the datum and scheme parameters.
    pub fn prepare(&self) -> Result<(GridFunction, SchemeParams)> {
        self.obstacle.validate()?;
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be at least 1".into()));
        }
        if self.m < 4 {
            return Err(Error::Resolution { m: self.m, min: 4 });
        }
        let u0 = self.u0.sample(self.m)?;
        let psi = self.obstacle.sample(self.m);
        if let Some(j) = (1..self.m).find(|&j| u0.values()[j] < psi[j]) {
            return Err(Error::Infeasible(format!(
                "u0 lies below the obstacle at x = {}",
                node(j, self.m)
            )));
        }
        let inner = InnerSettings {
            tol: self.inner_tol,
            max_iter: self.inner_max_iter,
            method: self.inner_method,
        };
        let params = SchemeParams::new(&u0, self.lambda, self.n, self.horizon.into(), inner)?;
        Ok((u0, params))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub params: SchemeParams,
    pub config: RunConfig,
    pub status: RunStatus,
    pub wall_time_seconds: f64,
    pub ledger_rows: usize,
    pub snapshots: Vec<String>,
}

/// Outcome of [`cmd_run`]: the flow and the exit status it maps to.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub result: FlowResult,
    pub manifest: Manifest,
    pub exit_code: i32,
}

fn e16(v: f64) -> String {
    format!("{v:.16e}")
}

/// Ledger CSV for steps `1 … n`.
pub fn ledger_csv(result: &FlowResult) -> Result<String> {
    let mut out = String::from(
        "i,t,bending,length,energy,penalty,dissipation_cumsum,sup_du,active_count,mu_total\n",
    );
    let mut cumsum = 0.0;
    for step in &result.steps[1..] {
        cumsum += 2.0 * step.penalty_value;
        let sup_du = d1(&step.u)?.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            step.index,
            e16(result.time(step.index)),
            e16(step.energy.bending),
            e16(step.energy.length),
            e16(step.energy.penalized),
            e16(step.penalty_value),
            e16(cumsum),
            e16(sup_du),
            step.active_set.len(),
            e16(step.multipliers.total),
        ));
    }
    Ok(out)
}

/// Profile CSV `x,u,psi,mu_atom` of step `i`.
pub fn snapshot_csv(result: &FlowResult, i: usize) -> String {
    let step = &result.steps[i];
    let m = result.params.m;
    let mut out = String::from("x,u,psi,mu_atom\n");
    for j in 0..=m {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e16(node(j, m)),
            e16(step.u.values()[j]),
            e16(result.psi[j]),
            e16(step.multipliers.atoms[j])
        ));
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Runs a configuration and writes `ledger.csv`, `snapshot_XXXXXX.csv`
/// (step 0, every `snapshot_stride`-th step and the last step),
/// `manifest.json` and `flow.json` into the output directory.
///
/// Validation problems are returned as errors; a run that stops early
/// still writes its artifacts and reports exit code 3.
pub fn cmd_run(config: &RunConfig) -> Result<RunReport> {
    let (u0, params) = config.prepare()?;
    let start = Instant::now();
    let result = run(&u0, &config.obstacle, &params)?;
    let wall = start.elapsed().as_secs_f64();

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write_file(&dir.join(LEDGER_FILE), &ledger_csv(&result)?)?;
    let last = result.steps.len() - 1;
    let mut snapshots = Vec::new();
    for i in (0..=last).filter(|i| i % config.snapshot_stride == 0 || *i == last) {
        let name = format!("snapshot_{i:06}.csv");
        write_file(&dir.join(&name), &snapshot_csv(&result, i))?;
        snapshots.push(name);
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        params: params.clone(),
        config: config.clone(),
        status: result.status.clone(),
        wall_time_seconds: wall,
        ledger_rows: last,
        snapshots,
    };
    write_file(
        &dir.join(MANIFEST_FILE),
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    write_file(&dir.join(FLOW_FILE), &serde_json::to_string(&result)?)?;

    let exit_code = match &result.status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::Failed {
            kind: FailureKind::Other,
            ..
        } => EXIT_VALIDATION,
        RunStatus::Failed { .. } => EXIT_SOLVER,
    };
    Ok(RunReport {
        result,
        manifest,
        exit_code,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub c0: f64,
    pub h_star: f64,
    pub h_star_clamped: f64,
}

pub fn cmd_thresholds() -> Thresholds {
    Thresholds {
        c0: c0(),
        h_star: h_star(),
        h_star_clamped: h_star_clamped(),
    }
}

/// Writes the stationary profile as CSV `x,u`.
pub fn cmd_stationary(h: f64, m: usize, out: &mut impl Write) -> Result<()> {
    let u = symmetric_stationary(h, m)?;
    writeln!(out, "x,u")?;
    for (j, v) in u.values().iter().enumerate() {
        writeln!(out, "{},{}", e16(node(j, m)), e16(*v))?;
    }
    Ok(())
}

/// Default arc length for `elastica`: the full arch `2K(1/√2)`.
pub fn full_arch_length() -> f64 {
    2.0 * rect_quarter_period()
}

/// Writes `samples` points of the rectangular elastica (closed form) as CSV
/// `s,k,theta,x,y`.
pub fn cmd_elastica(s_max: f64, samples: usize, out: &mut impl Write) -> Result<()> {
    let full = full_arch_length();
    if !(s_max > 0.0 && s_max <= full * (1.0 + 1e-14)) {
        return Err(Error::Domain(format!(
            "s_max = {s_max} outside (0, 2K(1/sqrt 2)]"
        )));
    }
    if samples < 2 {
        return Err(Error::Domain("elastica needs at least two samples".into()));
    }
    writeln!(out, "s,k,theta,x,y")?;
    for i in 0..samples {
        let s = s_max * i as f64 / (samples - 1) as f64;
        let p = rect_point(s)?;
        writeln!(
            out,
            "{},{},{},{},{}",
            e16(s),
            e16(rect_curvature(s)),
            e16(p.theta),
            e16(p.x),
            e16(p.y)
        )?;
    }
    Ok(())
}

/// Loads `flow.json` from a run directory (or the file itself).
pub fn load_flow(bundle: &Path) -> Result<FlowResult> {
    let path = if bundle.is_dir() {
        bundle.join(FLOW_FILE)
    } else {
        bundle.to_path_buf()
    };
    let text =
        fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Verdict for a run bundle and the exit code it maps to.
pub fn cmd_check(bundle: &Path) -> Result<(Verdict, i32)> {
    let verdict = check_flow(&load_flow(bundle)?)?;
    let code = if verdict.passed { EXIT_OK } else { EXIT_CHECK };
    Ok((verdict, code))
}
