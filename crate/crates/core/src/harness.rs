//! Run configuration, per-epsilon pipelines, sweeps and feasibility checks.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::antisym::{hydrodynamic_error, solve_stable, solve_metastable, IterationTrace, SolverConfig};
use crate::asym::{solve_off_center, AsymConfig};
use crate::error::{invalid, Error, Result};
use crate::grid::{fmt17, Profile, DEFAULT_POINT_CAP};
use crate::instanton::{compute_instanton, instanton_threshold, Instanton, InstantonOptions};
use crate::kernel::{build_kernel_shape, KernelShape};
use crate::meso::MesoState;
use crate::spectral::{max_eig, SpectralOptions};
use crate::stefan::{breakdown_length, maximal_length, solve_metastable_stefan, solve_stefan};
use crate::thermo::ThermoParams;

pub const SWEEP_HEADER: &str = "eps,mode,hydro_m,hydro_h,lam_gap_ratio,I_eps,eps_x_eps,iters";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Antisym,
    Metastable,
    Asym,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Antisym => "antisym",
            Mode::Metastable => "metastable",
            Mode::Asym => "asym",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "antisym" | "stable" => Ok(Mode::Antisym),
            "metastable" => Ok(Mode::Metastable),
            "asym" => Ok(Mode::Asym),
            _ => Err(Error::Parse(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub beta: f64,
    pub j: f64,
    pub x0: f64,
    pub ell: f64,
    pub eps_list: Vec<f64>,
    pub spacing: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub spectral_tol: f64,
    pub kernel: KernelShape,
    pub n0: usize,
    pub point_cap: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Antisym,
            beta: 2.0,
            j: -0.02,
            x0: 0.0,
            ell: 1.0,
            eps_list: vec![0.1, 0.05, 0.025],
            spacing: 0.05,
            inner_tol: 1e-12,
            outer_tol: 1e-10,
            spectral_tol: 1e-15,
            kernel: KernelShape::CosSquared,
            n0: 2,
            point_cap: DEFAULT_POINT_CAP,
            output: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("bad value for {key}: {v:?}")))
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment, unset keys keep defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "mode" => self.mode = v.parse()?,
            "beta" => self.beta = parse_num(key, v)?,
            "j" => self.j = parse_num(key, v)?,
            "x0" => self.x0 = parse_num(key, v)?,
            "ell" => self.ell = parse_num(key, v)?,
            "eps" | "eps_list" => {
                self.eps_list = v
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_>>()?
            }
            "spacing" => self.spacing = parse_num(key, v)?,
            "inner_tol" => self.inner_tol = parse_num(key, v)?,
            "outer_tol" => self.outer_tol = parse_num(key, v)?,
            "spectral_tol" => self.spectral_tol = parse_num(key, v)?,
            "kernel" => self.kernel = KernelShape::parse(v)?,
            "n0" => self.n0 = parse_num(key, v)?,
            "point_cap" => self.point_cap = parse_num(key, v)?,
            "output" => self.output = (!v.is_empty()).then(|| PathBuf::from(v)),
            _ => return Err(Error::Parse(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Shape checks that need no computation.
    pub fn check(&self) -> Result<()> {
        if !(self.beta > 1.0) {
            return Err(invalid(format!("beta must exceed 1, got {}", self.beta)));
        }
        if !self.j.is_finite() || !self.x0.is_finite() || !(self.ell > 0.0) {
            return Err(invalid("j and x0 must be finite and ell positive"));
        }
        if self.eps_list.is_empty() {
            return Err(invalid("eps list is empty"));
        }
        for w in self.eps_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(invalid("eps list must be strictly decreasing"));
            }
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(invalid("every eps must lie in (0,1)"));
        }
        for (name, t) in [("inner_tol", self.inner_tol), ("outer_tol", self.outer_tol), ("spectral_tol", self.spectral_tol)] {
            if !(t > 0.0) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        match self.mode {
            Mode::Asym if self.x0 == 0.0 || self.x0.abs() >= 1.0 => Err(invalid("asym mode needs 0 < |x0| < 1")),
            Mode::Metastable if self.j <= 0.0 => Err(invalid("metastable mode needs j > 0")),
            _ => Ok(()),
        }
    }

    pub fn solver(&self) -> SolverConfig {
        let mut s = SolverConfig {
            spacing: self.spacing,
            kernel_shape: self.kernel,
            n0: self.n0,
            tol: self.outer_tol,
            ..SolverConfig::default()
        };
        s.inner.tol = self.inner_tol;
        s
    }

    pub fn spectral(&self) -> SpectralOptions {
        SpectralOptions {
            tol: self.spectral_tol,
            ..SpectralOptions::default()
        }
    }

    pub fn asym(&self) -> AsymConfig {
        AsymConfig {
            solver: self.solver(),
            spectral: self.spectral(),
            ..AsymConfig::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub mode: Mode,
    pub hydro_m: Option<f64>,
    pub hydro_h: Option<f64>,
    pub one_minus_lambda_over_eps: Option<f64>,
    pub c_instanton: Option<f64>,
    /// `((1 - lambda) / eps) / C`.
    pub lam_gap_ratio: Option<f64>,
    pub i_eps: Option<f64>,
    pub eps_x_eps: Option<f64>,
    pub iters: Option<usize>,
    /// Seconds; kept out of every file so reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(eps: f64, mode: Mode, err: &Error, wall_time: f64) -> Self {
        Self {
            eps,
            mode,
            hydro_m: None,
            hydro_h: None,
            one_minus_lambda_over_eps: None,
            c_instanton: None,
            lam_gap_ratio: None,
            i_eps: None,
            eps_x_eps: None,
            iters: None,
            wall_time,
            error: Some(err.code().to_string()),
        }
    }

    pub fn csv_line(&self) -> String {
        let f = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        let iters = match (&self.error, self.iters) {
            (Some(code), _) => format!("error:{code}"),
            (None, Some(k)) => k.to_string(),
            (None, None) => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt17(self.eps),
            self.mode.as_str(),
            f(self.hydro_m),
            f(self.hydro_h),
            f(self.lam_gap_ratio),
            f(self.i_eps),
            f(self.eps_x_eps),
            iters
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.csv_line());
        }
        s
    }
}

/// Everything one solve produces.
pub struct RunArtifacts {
    pub row: SweepRow,
    pub summary: Value,
    pub state: MesoState,
    pub trace: IterationTrace,
    /// Extra named profiles written next to the state.
    pub extra: Vec<(&'static str, Profile)>,
}

/// `|j| <m'> / <m'^2>` from the front quadratures.
pub fn instanton_constant(inst: &Instanton, j: f64) -> f64 {
    j.abs() * inst.mean / inst.norm_sq
}

struct Spectral {
    gap: Option<f64>,
    c: f64,
    lambda: Option<f64>,
    lambda2: Option<f64>,
}

fn spectral_summary(state: &MesoState, inst: &Instanton, cfg: &RunConfig, eps: f64) -> Spectral {
    let c = instanton_constant(inst, cfg.j);
    match max_eig(state, &cfg.spectral()) {
        Ok(s) => Spectral {
            gap: Some((1.0 - s.lambda) / eps),
            c,
            lambda: Some(s.lambda),
            lambda2: Some(s.lambda2),
        },
        Err(_) => Spectral { gap: None, c, lambda: None, lambda2: None },
    }
}

/// Runs the configured pipeline at one epsilon.
pub fn run_single(cfg: &RunConfig, eps: f64) -> Result<RunArtifacts> {
    let t = Instant::now();
    let params = ThermoParams::new(cfg.beta)?;
    match cfg.mode {
        Mode::Antisym | Mode::Metastable => {
            let sol = if cfg.mode == Mode::Antisym {
                solve_stable(&params, eps, cfg.j, cfg.ell, &cfg.solver())?
            } else {
                solve_metastable(&params, eps, cfg.j, cfg.ell, &cfg.solver())?
            };
            let stefan = if cfg.mode == Mode::Antisym {
                solve_stefan(&params, cfg.j, 0.0, cfg.ell, 3)?
            } else {
                solve_metastable_stefan(&params, cfg.j, cfg.ell, 3, true)?
            };
            let hydro = hydrodynamic_error(&sol.state, &stefan, eps * sol.seed.xi_eps)?;
            let sp = spectral_summary(&sol.state, &sol.setup.instanton, cfg, eps);
            let iters = sol.trace.increments.len();
            let summary = json!({
                "mode": cfg.mode,
                "beta": cfg.beta,
                "eps": eps,
                "j": cfg.j,
                "ell": cfg.ell,
                "iterations": iters,
                "monotone": sol.monotone,
                "I_eps": sol.i_eps,
                "hydro_error": hydro,
                "self_consistency": sol.self_consistency,
                "residual": sol.state.residual_norm,
                "lambda": sp.lambda,
                "lambda2": sp.lambda2,
                "one_minus_lambda_over_eps": sp.gap,
                "c_instanton": sp.c,
                "xi_eps": sol.seed.xi_eps,
                "instanton_threshold": sol.seed.threshold,
                "n0": sol.seed.n0,
                "odd_decay": sol.seed.odd_decay,
            });
            Ok(RunArtifacts {
                row: SweepRow {
                    eps,
                    mode: cfg.mode,
                    hydro_m: Some(hydro.m),
                    hydro_h: Some(hydro.h),
                    one_minus_lambda_over_eps: sp.gap,
                    c_instanton: Some(sp.c),
                    lam_gap_ratio: sp.gap.map(|g| g / sp.c),
                    i_eps: sol.i_eps,
                    eps_x_eps: None,
                    iters: Some(iters),
                    wall_time: t.elapsed().as_secs_f64(),
                    error: None,
                },
                summary,
                state: sol.state,
                trace: sol.trace,
                extra: Vec::new(),
            })
        }
        Mode::Asym => {
            let sol = solve_off_center(&params, eps, cfg.j, cfg.x0, &cfg.asym())?;
            let stefan = solve_stefan(&params, cfg.j, cfg.x0, 1.0, 3)?;
            let window = eps * sol.problem.extended_solve.seed.xi_eps;
            let hydro = hydrodynamic_error(&sol.state, &stefan, window)?;
            let sp = spectral_summary(&sol.state, &sol.problem.extended_solve.setup.instanton, cfg, eps);
            let iters = sol.trace.increments.len();
            let summary = json!({
                "mode": cfg.mode,
                "beta": cfg.beta,
                "eps": eps,
                "j": cfg.j,
                "x0": cfg.x0,
                "iterations": iters,
                "x_eps": sol.interface_position,
                "eps_x_eps": sol.eps_x_eps(),
                "m_zero": sol.m_zero,
                "hydro_error": hydro,
                "G_report": sol.final_report,
                "seed_G_report": sol.seed_report,
                "weighted_increments": sol.weighted_increments,
                "a_plus": sol.problem.norm.a_plus,
                "a_minus": sol.problem.norm.a_minus,
                "r_eps_sup": sol.problem.r_eps.sup_norm(),
                "seed_residual": sol.problem.seed_residual,
                "residual": sol.state.residual_norm,
                "eigenvector_shift": sol.eigenvector_shift,
                "lambda": sp.lambda,
                "lambda2": sp.lambda2,
                "one_minus_lambda_over_eps": sp.gap,
                "c_instanton": sp.c,
                "mirrored": sol.mirrored,
            });
            let extra = vec![("u_star", sol.problem.u_star.clone()), ("r_eps", sol.problem.r_eps.clone())];
            Ok(RunArtifacts {
                row: SweepRow {
                    eps,
                    mode: cfg.mode,
                    hydro_m: Some(hydro.m),
                    hydro_h: Some(hydro.h),
                    one_minus_lambda_over_eps: sp.gap,
                    c_instanton: Some(sp.c),
                    lam_gap_ratio: sp.gap.map(|g| g / sp.c),
                    i_eps: None,
                    eps_x_eps: Some(sol.eps_x_eps()),
                    iters: Some(iters),
                    wall_time: t.elapsed().as_secs_f64(),
                    error: None,
                },
                summary,
                state: sol.state,
                trace: sol.trace,
                extra,
            })
        }
    }
}

pub fn write_state_csv<W: Write>(state: &MesoState, mut w: W) -> Result<()> {
    writeln!(w, "x,h,m")?;
    for i in 0..state.grid.n {
        writeln!(w, "{},{},{}", fmt17(state.grid.x(i)), fmt17(state.h.values[i]), fmt17(state.m.values[i]))?;
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &IterationTrace, mut w: W) -> Result<()> {
    writeln!(w, "k,increment,ratio,residual")?;
    for (k, inc) in trace.increments.iter().enumerate() {
        let ratio = if k == 0 { String::new() } else { fmt17(trace.contraction_ratios[k - 1]) };
        writeln!(w, "{k},{},{ratio},{}", fmt17(*inc), fmt17(trace.residuals[k]))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes `state.csv`, `trace.csv`, `summary.json` and any extra profiles into `dir`.
pub fn write_artifacts(dir: &Path, art: &RunArtifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_state_csv(&art.state, create(&dir.join("state.csv"))?)?;
    write_trace_csv(&art.trace, create(&dir.join("trace.csv"))?)?;
    for (name, p) in &art.extra {
        p.write_csv(create(&dir.join(format!("{name}.csv")))?)?;
    }
    let mut s = serde_json::to_string_pretty(&art.summary).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    fs::write(dir.join("summary.json"), s)?;
    Ok(())
}

pub fn run_dir_name(mode: Mode, eps: f64) -> String {
    format!("{}_eps{}", mode.as_str(), eps)
}

/// Runs every epsilon concurrently; failures become rows, not aborts.
/// With an output directory set, each run gets its own subdirectory and
/// `sweep.csv` is written once all runs are done.
pub fn run(cfg: &RunConfig) -> Result<SweepReport> {
    cfg.check()?;
    let rows: Vec<SweepRow> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let t = Instant::now();
            let outcome = run_single(cfg, eps).and_then(|art| {
                if let Some(out) = &cfg.output {
                    write_artifacts(&out.join(run_dir_name(cfg.mode, eps)), &art)?;
                }
                Ok(art.row)
            });
            outcome.unwrap_or_else(|e| SweepRow::failed(eps, cfg.mode, &e, t.elapsed().as_secs_f64()))
        })
        .collect();
    let report = SweepReport { rows };
    if let Some(out) = &cfg.output {
        fs::create_dir_all(out)?;
        fs::write(out.join("sweep.csv"), report.to_csv())?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FindingKind {
    Config,
    Infeasible,
    Grid,
    Note,
}

#[derive(Clone, Debug, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

fn finding(kind: FindingKind, message: impl Into<String>) -> Finding {
    Finding { kind, message: message.into() }
}

/// Feasibility and size checks; never fails, everything is reported.
pub fn validate(cfg: &RunConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    if let Err(e) = cfg.check() {
        out.push(finding(FindingKind::Config, e.to_string()));
    }
    let params = match ThermoParams::new(cfg.beta) {
        Ok(p) => p,
        Err(e) => {
            out.push(finding(FindingKind::Config, e.to_string()));
            return out;
        }
    };
    if cfg.j == 0.0 {
        out.push(finding(
            FindingKind::Note,
            "j = 0 is the zero-current case: h = 0 and m solves the critical-point equation; use inner_solve with h = 0",
        ));
        return out;
    }
    let reach = match cfg.mode {
        Mode::Asym => 1.0 + cfg.x0.abs(),
        _ => cfg.ell,
    };
    match maximal_length(&params, cfg.j) {
        Ok(ell_j) if reach >= ell_j => out.push(finding(
            FindingKind::Infeasible,
            format!("no stationary profile: needed length {reach} is not below the maximal length {ell_j}"),
        )),
        Ok(ell_j) => out.push(finding(FindingKind::Note, format!("maximal length {ell_j}, needed {reach}"))),
        Err(e) => out.push(finding(FindingKind::Config, e.to_string())),
    }
    if cfg.mode == Mode::Metastable && cfg.j > 0.0 {
        if let Ok(b) = breakdown_length(&params, cfg.j) {
            if cfg.ell >= b {
                out.push(finding(
                    FindingKind::Infeasible,
                    format!("metastable profile leaves the metastable band at length {b}, requested {}", cfg.ell),
                ));
            }
        }
    }
    if cfg.mode == Mode::Asym {
        out.push(finding(FindingKind::Note, "asym mode uses the domain [-1, 1]; ell is ignored"));
    }
    let front = build_kernel_shape(cfg.kernel, cfg.spacing)
        .and_then(|k| compute_instanton(&params, &k, 20.0, InstantonOptions::default()));
    for &eps in &cfg.eps_list {
        let length = 2.0 * reach / eps;
        let needed = (length / cfg.spacing).ceil() as usize + 1;
        if needed > cfg.point_cap {
            out.push(finding(FindingKind::Grid, format!("eps {eps}: grid needs {needed} points, cap is {}", cfg.point_cap)));
        }
        if let Ok(inst) = &front {
            if let Ok(t) = instanton_threshold(inst, eps) {
                let xi = t + 2.0 * cfg.n0 as f64;
                let room = 0.5 * reach / eps;
                if xi >= room {
                    out.push(finding(
                        FindingKind::Grid,
                        format!("eps {eps}: matching point {xi:.3} does not fit in half the domain ({room:.3}); lower n0 or eps"),
                    ));
                }
            }
        }
    }
    out
}

/// Process exit code for a list of findings.
pub fn findings_exit_code(findings: &[Finding]) -> i32 {
    if findings.iter().any(|f| f.kind == FindingKind::Config) {
        2
    } else if findings.iter().any(|f| f.kind == FindingKind::Infeasible) {
        3
    } else {
        0
    }
}
