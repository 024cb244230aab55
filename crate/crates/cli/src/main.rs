//! `stefan`: command line driver for the stationary current-carrying profiles.

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use stefan_core::grid::{fmt17, read_csv_columns, Grid, Profile};
use stefan_core::harness::{
    findings_exit_code, run, run_single, validate, write_artifacts, Mode, RunConfig,
};
use stefan_core::instanton::{compute_instanton, instanton_threshold, InstantonOptions};
use stefan_core::kernel::{build_kernel_shape, KernelShape};
use stefan_core::meso::MesoState;
use stefan_core::spectral::{max_eig, SpectralOptions};
use stefan_core::stefan::{breakdown_length, maximal_length, solve_metastable_stefan, solve_stefan};
use stefan_core::thermo::{self, ThermoParams};
use stefan_core::{Error, Result};

#[derive(Parser)]
#[command(name = "stefan", version, about = "Stationary nonlocal profiles driven by a current, and their Stefan limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Antisym,
    Metastable,
}

#[derive(Subcommand)]
enum Command {
    /// Bulk thermodynamics at one inverse temperature, optionally at a field.
    Thermo {
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        h: Option<f64>,
        /// Writes phi, a_beta (in m) and the pressure (in h) on 201 rows.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Front profile connecting the two phases.
    Instanton {
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 20.0)]
        halfwidth: f64,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
        #[arg(long, default_value = "cos2")]
        kernel: String,
        /// Threshold reported for this eps.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Macroscopic profile on [-ell, ell] with the jump at x0.
    Stefan {
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        j: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 1.0)]
        ell: f64,
        #[arg(long, default_value_t = 201)]
        n: usize,
        /// Metastable branch (needs j > 0 and x0 = 0).
        #[arg(long)]
        metastable: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Odd mesoscopic profile, stable or metastable.
    Solve {
        #[arg(long, value_enum, default_value = "antisym")]
        mode: ModeArg,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        j: f64,
        #[arg(long, default_value_t = 1.0)]
        ell: f64,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
        #[arg(long, default_value_t = 2)]
        n0: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mesoscopic profile with the interface at eps^-1 x0.
    SolveAsym {
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        j: f64,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
        #[arg(long, default_value_t = 2)]
        n0: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Principal eigenpair of the linearization at a saved state (x,h,m CSV).
    Spectrum {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        j: f64,
        #[arg(long, default_value = "cos2")]
        kernel: String,
        /// Writes the eigenvector here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a config file over its eps list.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reports feasibility of a config without solving.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn thermo_cmd(beta: f64, h: Option<f64>) -> Result<Value> {
    let p = ThermoParams::new(beta)?;
    let mut v = json!({
        "beta": beta,
        "m_beta": p.m_beta,
        "m_star": p.m_star,
        "chi_at_m_beta": thermo::chi(&p, p.m_beta),
        "d_beta_at_m_beta": thermo::d_beta(&p, p.m_beta).value,
        "phi_at_m_beta": thermo::phi(&p, p.m_beta),
    });
    if let Some(h) = h {
        v["h"] = json!(h);
        v["pressure"] = json!(thermo::pressure(&p, h));
        v["mean_field_root"] = json!(thermo::mean_field_root(&p, h)?.value);
    }
    if let Ok(ell) = maximal_length(&p, -1.0) {
        v["maximal_length_times_abs_j"] = json!(ell);
    }
    if let Ok(b) = breakdown_length(&p, 1.0) {
        v["breakdown_length_times_j"] = json!(b);
    }
    Ok(v)
}

fn thermo_table(beta: f64, path: &Path) -> Result<()> {
    let p = ThermoParams::new(beta)?;
    let mut w = writer(path)?;
    writeln!(w, "m,phi,a_beta,h,pressure")?;
    for k in 0..201 {
        let t = -1.0 + k as f64 / 100.0;
        let m = 0.999 * t;
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt17(m),
            fmt17(thermo::phi(&p, m)),
            fmt17(thermo::a_beta(&p, m)),
            fmt17(t),
            fmt17(thermo::pressure(&p, t))
        )?;
    }
    Ok(())
}

fn writer(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn instanton_cmd(beta: f64, halfwidth: f64, spacing: f64, kernel: &str, eps: Option<f64>, out: Option<&Path>) -> Result<Value> {
    let p = ThermoParams::new(beta)?;
    let k = build_kernel_shape(KernelShape::parse(kernel)?, spacing)?;
    let inst = compute_instanton(&p, &k, halfwidth, InstantonOptions::default())?;
    let mut v = serde_json::to_value(inst.summary()).map_err(|e| Error::Parse(e.to_string()))?;
    v["residual"] = json!(inst.residual(&p, &k)?);
    if let Some(e) = eps {
        v["instanton_threshold"] = json!(instanton_threshold(&inst, e)?);
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        inst.profile.write_csv(writer(&dir.join("instanton.csv"))?)?;
        inst.derivative.write_csv(writer(&dir.join("derivative.csv"))?)?;
        fs::write(dir.join("summary.json"), format!("{}\n", serde_json::to_string_pretty(&v).unwrap_or_default()))?;
    }
    Ok(v)
}

/// Writes the profile and returns `{ell_j, feasible}`; an infeasible
/// request still reports the computed length.
fn stefan_cmd(beta: f64, j: f64, x0: f64, ell: f64, n: usize, metastable: bool, out: Option<&Path>) -> Result<(Value, i32)> {
    let p = ThermoParams::new(beta)?;
    let solved = if metastable {
        if x0 != 0.0 {
            return Err(Error::InvalidParameter("metastable profiles are only built with x0 = 0".into()));
        }
        solve_metastable_stefan(&p, j, ell, n, true)
    } else {
        solve_stefan(&p, j, x0, ell, n)
    };
    let sol = match solved {
        Ok(s) => s,
        Err(e @ (Error::Infeasible { .. } | Error::MetastableBreakdown { .. })) => {
            let ell_j = match e {
                Error::Infeasible { ell_j, .. } => ell_j,
                Error::MetastableBreakdown { breakdown, .. } => breakdown,
                _ => unreachable!(),
            };
            eprintln!("error: {e}");
            return Ok((json!({ "ell_j": ell_j, "feasible": false }), e.exit_code()));
        }
        Err(e) => return Err(e),
    };
    match out {
        Some(path) => sol.write_csv(writer(path)?)?,
        None => sol.write_csv(io::stdout().lock())?,
    }
    Ok((json!({ "ell_j": sol.ell_j, "feasible": true }), 0))
}

fn config_for(beta: f64, eps: f64, j: f64, spacing: f64, n0: usize) -> RunConfig {
    RunConfig {
        beta,
        j,
        eps_list: vec![eps],
        spacing,
        n0,
        ..RunConfig::default()
    }
}

fn spectrum_cmd(state: &Path, beta: f64, eps: f64, j: f64, kernel: &str, out: Option<&Path>) -> Result<Value> {
    let p = ThermoParams::new(beta)?;
    let cols = read_csv_columns(BufReader::new(fs::File::open(state)?), &["x", "h", "m"])?;
    let (x, h, m) = (&cols[0], &cols[1], &cols[2]);
    if x.len() < 3 {
        return Err(Error::Parse("state file needs at least three rows".into()));
    }
    let n = x.len();
    let grid = Grid {
        epsilon: eps,
        left: -x[0] * eps,
        right: x[n - 1] * eps,
        spacing: (x[n - 1] - x[0]) / (n - 1) as f64,
        n,
    };
    let k = build_kernel_shape(KernelShape::parse(kernel)?, grid.spacing)?;
    let st = MesoState::new(&p, &k, Profile::new(grid, h.clone())?, Profile::new(grid, m.clone())?)?;
    let sp = max_eig(&st, &SpectralOptions::default())?;
    let c = compute_instanton(&p, &k, 20.0, InstantonOptions::default())
        .ok()
        .map(|inst| j.abs() * inst.mean / inst.norm_sq);
    let v = json!({
        "lambda": sp.lambda,
        "lambda2": sp.lambda2,
        "gap": sp.lambda - sp.lambda2,
        "C_check": {
            "one_minus_lambda_over_eps": (1.0 - sp.lambda) / eps,
            "C_instanton": c,
        },
        "iterations": sp.iterations,
        "state_residual": st.residual_norm,
    });
    if let Some(path) = out {
        sp.u.write_csv(writer(path)?)?;
    }
    Ok(v)
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Thermo { beta, h, table } => {
            print_json(&thermo_cmd(beta, h)?)?;
            if let Some(path) = table {
                thermo_table(beta, &path)?;
            }
        }
        Command::Instanton { beta, halfwidth, spacing, kernel, eps, out } => {
            print_json(&instanton_cmd(beta, halfwidth, spacing, &kernel, eps, out.as_deref())?)?
        }
        Command::Stefan { beta, j, x0, ell, n, metastable, out } => {
            let (v, code) = stefan_cmd(beta, j, x0, ell, n, metastable, out.as_deref())?;
            if out.is_some() || code != 0 {
                print_json(&v)?;
            }
            return Ok(code);
        }
        Command::Solve { mode, beta, eps, j, ell, spacing, n0, out } => {
            let mut cfg = config_for(beta, eps, j, spacing, n0);
            cfg.ell = ell;
            cfg.mode = match mode {
                ModeArg::Antisym => Mode::Antisym,
                ModeArg::Metastable => Mode::Metastable,
            };
            cfg.check()?;
            let art = run_single(&cfg, eps)?;
            write_artifacts(&out, &art)?;
            print_json(&art.summary)?;
        }
        Command::SolveAsym { beta, eps, j, x0, spacing, n0, out } => {
            let mut cfg = config_for(beta, eps, j, spacing, n0);
            cfg.mode = Mode::Asym;
            cfg.x0 = x0;
            cfg.check()?;
            let art = run_single(&cfg, eps)?;
            write_artifacts(&out, &art)?;
            print_json(&art.summary)?;
        }
        Command::Spectrum { state, beta, eps, j, kernel, out } => {
            print_json(&spectrum_cmd(&state, beta, eps, j, &kernel, out.as_deref())?)?
        }
        Command::Sweep { config, out } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if out.is_some() {
                cfg.output = out;
            }
            let report = run(&cfg)?;
            print!("{}", report.to_csv());
        }
        Command::Validate { config } => {
            let text = fs::read_to_string(&config)?;
            let mut cfg = RunConfig::default();
            let mut findings = Vec::new();
            for line in text.lines() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let applied = line
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key = value: {line:?}")))
                    .and_then(|(k, v)| cfg.set(k.trim(), v.trim()));
                if let Err(e) = applied {
                    findings.push(json!({ "kind": "config", "message": e.to_string() }));
                }
            }
            let found = validate(&cfg);
            let mut code = findings_exit_code(&found);
            if !findings.is_empty() {
                code = 2;
            }
            findings.extend(found.iter().map(|f| serde_json::to_value(f).unwrap_or(Value::Null)));
            print_json(&Value::Array(findings))?;
            return Ok(code);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
