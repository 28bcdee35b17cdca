//! The `homog` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use homog_core::tensor;
use homog_core::upscale::{equivalence_check, periodic_reference_tensor};
use homog_core::{CgOptions, Method};

use crate::bench::{bench_csv, bench_text, run_bench};
use crate::config::{parse_list, parse_r_list, Settings, SweepConfig};
use crate::error::{CliError, Result};
use crate::fit::fit_slope;
use crate::plot::emit_plot;
use crate::record::{fmt_float, write_csv, write_csv_file, SweepRecord};
use crate::sweep::{compute_point, run_sweep};

/// Default error window for the slope summary printed after a sweep.
pub const SLOPE_WINDOW: (f64, f64) = (1e-8, 1e-1);

#[derive(Debug, Parser)]
#[command(name = "homog", version, about = "Numerical homogenization by parabolic cell problems")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One upscaling run at a single R.
    Upscale(Common),
    /// Convergence sweep over R, written as CSV.
    Sweep(Common),
    /// Periodic cell reference tensor.
    Reference(Common),
    /// Elliptic/parabolic equivalence diagnostic.
    Equivalence(Common),
    /// Smallest R (and its cost) reaching each tolerance.
    Bench(Common),
    /// SVG log-log plot of a sweep CSV.
    Plot {
        /// Sweep CSV to plot.
        csv: PathBuf,
        /// Output SVG (default: the CSV path with an .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Options shared by the computing subcommands. Every option can also be
/// given as `key = value` in the `--config` file; flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// gloria, constant[:c], sine[:mean,amp], checkerboard[:c1,c2], lognormal[:modes,sigma,corr_len].
    #[arg(long)]
    pub coef: Option<String>,
    /// Comma list of parabolic, elliptic_standard, elliptic_regularized, periodic_reference.
    #[arg(long)]
    pub method: Option<String>,
    /// Box sizes: start:stop:step or a comma list.
    #[arg(long = "R", visible_alias = "r")]
    pub r: Option<String>,
    /// Oversampling ratio L/R.
    #[arg(long)]
    pub ko: Option<String>,
    /// Comma list of filter orders.
    #[arg(long)]
    pub q: Option<String>,
    /// Grid intervals per unit length.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    /// adaptive or fixed.
    #[arg(long)]
    pub time_mode: Option<String>,
    /// Fixed number of time steps (implies fixed mode).
    #[arg(long)]
    pub nt: Option<String>,
    /// Local error tolerance for adaptive stepping.
    #[arg(long)]
    pub tol_t: Option<String>,
    /// Regularization time for elliptic_regularized.
    #[arg(long)]
    pub t_reg: Option<String>,
    /// periodic or largest_R.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output file.
    #[arg(long)]
    pub out: Option<String>,
    /// bench: comma list of target tolerances.
    #[arg(long)]
    pub tols: Option<String>,
    /// equivalence: final time of the long evolution.
    #[arg(long)]
    pub t_long: Option<String>,
}

impl Common {
    pub fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        let flags = [
            ("coef", &self.coef),
            ("method", &self.method),
            ("r", &self.r),
            ("ko", &self.ko),
            ("q", &self.q),
            ("n", &self.n),
            ("dim", &self.dim),
            ("time_mode", &self.time_mode),
            ("nt", &self.nt),
            ("tol_t", &self.tol_t),
            ("t_reg", &self.t_reg),
            ("reference", &self.reference),
            ("seed", &self.seed),
            ("out", &self.out),
            ("tols", &self.tols),
            ("t_long", &self.t_long),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        Ok(s)
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = init_threads(n) {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    }
    let mut stdout = std::io::stdout().lock();
    match run(&cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot set thread count: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_n: usize) -> Result<()> {
    Ok(())
}

pub fn run<W: Write>(cmd: &Command, out: &mut W) -> Result<()> {
    match cmd {
        Command::Upscale(c) => upscale(&c.settings()?, out),
        Command::Sweep(c) => sweep(&c.settings()?, out),
        Command::Reference(c) => reference(&c.settings()?, out),
        Command::Equivalence(c) => equivalence(&c.settings()?, out),
        Command::Bench(c) => bench(&c.settings()?, out),
        Command::Plot { csv, out: svg } => {
            let svg = svg.clone().unwrap_or_else(|| csv.with_extension("svg"));
            emit_plot(csv, &svg)?;
            writeln!(out, "wrote {}", svg.display())?;
            Ok(())
        }
    }
}

fn single_r(s: &Settings, default: f64) -> Result<f64> {
    match s.get("r") {
        None => Ok(default),
        Some(v) => match parse_r_list(v)?.as_slice() {
            [r] => Ok(*r),
            _ => Err(CliError::Config(format!("this command takes a single R, got '{v}'"))),
        },
    }
}

fn upscale<W: Write>(s: &Settings, out: &mut W) -> Result<()> {
    let cfg = SweepConfig::from_settings(s)?;
    let r = single_r(s, 6.0)?;
    let method = match cfg.methods.as_slice() {
        [m] => *m,
        _ => return Err(CliError::Config("upscale takes a single method".into())),
    };
    let field = cfg.coef.build(cfg.seed, r)?;
    let results = compute_point(&cfg, &field, method, r)?;
    let reference = if cfg.coef.is_periodic() {
        Some(periodic_reference_tensor(&field, cfg.dim, cfg.n_per_cell, &CgOptions::default())?.a0)
    } else {
        None
    };
    let mut notes = vec![format!("coef={} alpha={} beta={}", cfg.coef, field.alpha, field.beta)];
    let mut records = Vec::new();
    if let Some(first) = results.first() {
        notes.extend(first.warnings.iter().map(|w| format!("warning: {w}")));
    }
    for res in &results {
        let err = reference.map_or(f64::NAN, |a| tensor::frobenius(&tensor::sub(&res.a0, &a), cfg.dim));
        records.push(SweepRecord::from_result(res, err, cfg.seed));
    }
    if let Some(a) = reference {
        notes.push(format!("err_fro is measured against the periodic reference {a:?}"));
    }
    emit_records(&cfg, &records, &notes, out)
}

fn emit_records<W: Write>(cfg: &SweepConfig, records: &[SweepRecord], notes: &[String], out: &mut W) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            write_csv_file(path, records, notes)?;
            writeln!(out, "wrote {} rows to {}", records.len(), path.display())?;
            Ok(())
        }
        None => write_csv(out, records, notes),
    }
}

fn sweep<W: Write>(s: &Settings, out: &mut W) -> Result<()> {
    let cfg = SweepConfig::from_settings(s)?;
    let res = run_sweep(&cfg)?;
    let failures = res.records.iter().filter(|r| r.err_fro.is_nan()).count();
    match &cfg.out {
        Some(path) => writeln!(out, "wrote {} rows to {}", res.records.len(), path.display())?,
        None => write_csv(&mut *out, &res.records, &res.notes)?,
    }
    let mut groups: Vec<(Method, u32)> = res.records.iter().map(|r| (r.method, r.q)).collect();
    groups.dedup();
    for (m, q) in groups {
        if m == Method::PeriodicReference {
            continue;
        }
        let (lo, hi) = SLOPE_WINDOW;
        match fit_slope(&res.records, m, q, lo, hi) {
            Ok(slope) => writeln!(out, "# slope {m} q={q}: {slope:.3}")?,
            Err(e) => writeln!(out, "# slope {m} q={q}: {e}")?,
        }
    }
    if failures > 0 {
        writeln!(out, "# {failures} point(s) failed; see the error notes")?;
    }
    Ok(())
}

fn reference<W: Write>(s: &Settings, out: &mut W) -> Result<()> {
    let coef = s.coef()?;
    if !coef.is_periodic() {
        return Err(CliError::Config(format!("reference needs a periodic coefficient, got {coef}")));
    }
    let dim = s.dim()?;
    let field = coef.build(s.seed()?, 1.0)?;
    let res = periodic_reference_tensor(&field, dim, s.n_per_cell()?, &CgOptions::default())?;
    writeln!(out, "coef = {coef}")?;
    for i in 0..dim {
        let row: Vec<String> = (0..dim).map(|j| fmt_float(res.a0[i][j])).collect();
        writeln!(out, "a0[{}] = {}", i + 1, row.join(" "))?;
    }
    writeln!(out, "h = {}", res.h)?;
    writeln!(out, "dofs = {}", res.dofs)?;
    writeln!(out, "matvecs = {}", res.matvecs)?;
    writeln!(out, "walltime_ms = {:.1}", res.walltime_ms)?;
    Ok(())
}

/// CG settings for the equivalence diagnostic; the solver error has to sit
/// well below the quantities being compared.
pub fn equivalence_cg() -> CgOptions {
    CgOptions {
        tol: 1e-12,
        ..CgOptions::default()
    }
}

fn equivalence<W: Write>(s: &Settings, out: &mut W) -> Result<()> {
    let coef = s.coef()?;
    let r = single_r(s, 4.0)?;
    let t_long: f64 = s.parsed("t_long")?.unwrap_or(4.0);
    if !(t_long > 0.0) {
        return Err(CliError::Config(format!("t_long must be positive, got {t_long}")));
    }
    let field = coef.build(s.seed()?, r)?;
    let rep = equivalence_check(&field, s.dim()?, r, s.n_per_cell()?, t_long, &s.time_options()?, &equivalence_cg())?;
    writeln!(out, "r1 = {}", fmt_float(rep.r1))?;
    writeln!(out, "r2 = {}", fmt_float(rep.r2))?;
    writeln!(out, "decay_ratio = {}", fmt_float(rep.decay_ratio))?;
    writeln!(out, "steps = {}", rep.steps)?;
    writeln!(out, "matvecs = {}", rep.matvecs)?;
    Ok(())
}

fn bench<W: Write>(s: &Settings, out: &mut W) -> Result<()> {
    let out_path = s.out();
    let mut cfg = SweepConfig::from_settings(s)?;
    // the bench output is the cost table, not the sweep CSV
    cfg.out = None;
    let tols = parse_list::<f64>(s.get("tols").unwrap_or("1e-2,1e-3,1e-4"), "tolerance")?;
    let (_, rows) = run_bench(&cfg, &tols)?;
    write!(out, "{}", bench_text(&rows))?;
    if let Some(path) = out_path {
        std::fs::write(&path, bench_csv(&rows))
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}
