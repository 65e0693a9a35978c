//! Commands behind the `entrap` binary: validate, run, check-pe and sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use entrap_core::engine::{self, Certificates, PeCheck, Summary};
use entrap_core::estimation::PeStatus;
use entrap_core::scenario::{Prepared, Scenario};
use entrap_core::Error;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_PARSE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Mandatory checks failed.
    Validation(String),
    Parse(Error),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Parse(_) => EXIT_PARSE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Parse(e) | CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } => CliError::Parse(e),
            other => CliError::Runtime(other),
        }
    }
}

/// Command-line replacements for scenario values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    /// Sample period, s.
    pub sample_every: Option<f64>,
    pub smooth_sgn: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(dt) = self.dt {
            s.integrator.dt = dt;
        }
        if let Some(h) = self.horizon {
            s.integrator.horizon = h;
        }
        if let Some(p) = self.sample_every {
            s.integrator.sample_period = p;
        }
        if let Some(eps) = self.smooth_sgn {
            s.smooth_sgn = Some(eps);
        }
    }
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Scenario, CliError> {
    let mut s = Scenario::from_path(path).map_err(|e| match e {
        Error::Io(m) => CliError::Runtime(Error::Io(format!("{}: {m}", path.display()))),
        other => CliError::from(other),
    })?;
    overrides.apply(&mut s);
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub scenario: String,
    pub certificates: Certificates,
}

impl ValidateReport {
    pub fn passes(&self) -> bool {
        self.certificates.mandatory_pass
    }

    /// One line per check with its margin.
    pub fn render(&self) -> String {
        let c = &self.certificates;
        let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut out = String::new();
        let a = &c.assumption;
        let _ = writeln!(
            out,
            "stress       {}  equilibrium residual {:.3e} (tol {:.0e}), lambda_min(L_ff) {:.5}, L_fl nonzero {}",
            mark(a.passes),
            a.equilibrium_residual,
            a.equilibrium_tolerance,
            a.lambda_min_ff,
            a.fl_nonzero
        );
        let g = &c.gains;
        let _ = writeln!(out, "gain k_p     {}", mark(g.kp_ok));
        let _ = writeln!(
            out,
            "gain k_v     {}  threshold 1/lambda_min(L_ff) = {:.4}, margin {:.4}",
            mark(g.kv_ok),
            g.kv_threshold,
            g.kv_margin
        );
        let _ = writeln!(
            out,
            "gain k_delta {}  threshold delta_bar + sup|v_f*'| = {:.4} (bound used {:.4}, generator bound {:.4}, sampled {:.4}), margin {:.4}",
            mark(g.k_delta_ok),
            g.k_delta_threshold,
            c.sup_vdot_f_used,
            c.sup_vdot_f_bound,
            c.desired.sup_vdot_f,
            g.k_delta_margin
        );
        let d = &c.definiteness;
        match (&c.stability, &c.stability_error) {
            (Some(s), _) => {
                let _ = writeln!(
                    out,
                    "stability    PASS  decay rate {:.4e} 1/s, envelope coefficient {:.4}",
                    s.decay_rate, s.envelope_coeff
                );
            }
            (None, err) => {
                let _ = writeln!(
                    out,
                    "stability    FAIL  lambda_min(P) {:.4e}, lambda_min(Q) {:.4e}{}",
                    d.lambda_min_p,
                    d.lambda_min_q,
                    err.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
                );
            }
        }
        match (&c.avoidance, &c.avoidance_error) {
            (Some(av), _) => {
                let _ = writeln!(
                    out,
                    "avoidance    {} (advisory)  lhs {:.4} vs rhs {:.4}, c_e {:.4}, min desired gap {:.4}",
                    mark(av.passes),
                    av.lhs,
                    av.rhs,
                    av.c_e,
                    av.min_desired_gap
                );
            }
            (None, err) => {
                let _ = writeln!(
                    out,
                    "avoidance    n/a (advisory)  {}, min desired gap {:.4}",
                    err.as_deref().unwrap_or("not evaluated"),
                    c.desired.min_desired_gap
                );
            }
        }
        let _ = writeln!(out, "overall      {}", if self.passes() { "PASS" } else { "FAIL" });
        out
    }
}

fn certify(scenario: &Scenario) -> Result<(Prepared, Certificates), CliError> {
    let prepared = scenario.prepare()?;
    let certificates = engine::certify(
        &prepared.simulation,
        &prepared.run,
        prepared.accel_bound,
        prepared.clearance,
        prepared.sample_period,
    )?;
    Ok((prepared, certificates))
}

pub fn cmd_validate(path: &Path, overrides: &Overrides) -> Result<ValidateReport, CliError> {
    let scenario = load(path, overrides)?;
    let (_, certificates) = certify(&scenario)?;
    Ok(ValidateReport {
        scenario: scenario.name.clone(),
        certificates,
    })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trace: PathBuf,
    pub summary_path: PathBuf,
    pub certificates_path: PathBuf,
    pub summary: Summary,
    pub certificates: Certificates,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    scenario: &'a str,
    #[serde(flatten)]
    summary: &'a Summary,
}

/// Runs a scenario and writes `trace.csv`, `summary.json` and
/// `certificates.json` into `out_dir`. Refuses when mandatory checks fail
/// unless `force` is set.
pub fn cmd_run(path: &Path, out_dir: &Path, overrides: &Overrides, force: bool) -> Result<RunReport, CliError> {
    let scenario = load(path, overrides)?;
    let (prepared, certificates) = certify(&scenario)?;
    if !certificates.mandatory_pass && !force {
        return Err(CliError::Validation(format!(
            "{}: mandatory checks fail; rerun with --force to simulate anyway",
            scenario.name
        )));
    }
    let output = engine::run(&prepared.simulation, &prepared.run)?;
    fs::create_dir_all(out_dir).map_err(Error::from)?;
    let trace = out_dir.join("trace.csv");
    let summary_path = out_dir.join("summary.json");
    let certificates_path = out_dir.join("certificates.json");
    let file = fs::File::create(&trace).map_err(Error::from)?;
    output.trace.write_csv(std::io::BufWriter::new(file))?;
    write_json(
        &summary_path,
        &SummaryFile {
            scenario: &scenario.name,
            summary: &output.summary,
        },
    )?;
    write_json(&certificates_path, &certificates)?;
    Ok(RunReport {
        trace,
        summary_path,
        certificates_path,
        summary: output.summary,
        certificates,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(Error::Io(e.to_string())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Runtime(Error::from(e)))
}

pub fn cmd_check_pe(path: &Path, overrides: &Overrides) -> Result<PeCheck, CliError> {
    let scenario = load(path, overrides)?;
    let prepared = scenario.prepare()?;
    Ok(engine::check_pe(
        &prepared.simulation,
        scenario.integrator.horizon,
        scenario.integrator.dt,
        &scenario.pe,
    )?)
}

pub fn render_pe(check: &PeCheck) -> String {
    let mut out = String::new();
    let label = |s: PeStatus| match s {
        PeStatus::Satisfied => "satisfied",
        PeStatus::NotSatisfied => "not satisfied",
        PeStatus::Indeterminate => "indeterminate",
    };
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    let _ = writeln!(out, "relative-velocity directions:");
    for r in &check.leader {
        let _ = writeln!(
            out,
            "  {:<6} {:<14} min integral {:>10}  margin {:>10}",
            r.edge,
            label(r.verdict),
            fmt(r.min_integral),
            fmt(r.margin)
        );
    }
    let _ = writeln!(out, "bearings along desired trajectories:");
    for r in &check.estimator {
        let _ = writeln!(
            out,
            "  {:<6} {:<14} min integral {:>10}  margin {:>10}",
            r.edge,
            label(r.verdict),
            fmt(r.min_integral),
            fmt(r.margin)
        );
    }
    out
}

/// Runs several scenarios in parallel, each into `out_dir/<file stem>`.
pub fn cmd_sweep(
    paths: &[PathBuf],
    out_dir: &Path,
    overrides: &Overrides,
    force: bool,
) -> Vec<(PathBuf, Result<RunReport, CliError>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| {
                let stem = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "scenario".into());
                let dir = out_dir.join(stem);
                scope.spawn(move || (p.clone(), cmd_run(p, &dir, overrides, force)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}
