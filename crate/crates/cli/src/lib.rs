//! Batch runner: configuration, simulation drivers and CSV output.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use savmac::fields::write_dump;
use savmac::mms::{
    example3_initial, forcing_half, sample_velocity, HalfLevel, ConvergenceTable, ErrorAccumulator, Example1, Example2,
    ManufacturedSolution,
};
use savmac::sav::{energy_audit, EnergyAudit};
use savmac::{ErrorNorms, SavParams, SavStepper, StaggeredGrid, StepDiagnostics, VelocityField};

pub const TRACE_HEADER: &str = "step,t,Q,S_root_a,S_root_b,S_chosen,energy_residual,div_max";
pub const ERRORS_HEADER: &str = "norm,value";

/// Which test case to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleKind {
    One,
    Two,
    /// unforced decay, no exact solution
    Three,
    /// the trigonometric solution of example 2 with the convective term off
    CustomStokes,
}

impl FromStr for ExampleKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            "3" => Ok(Self::Three),
            "custom-stokes" => Ok(Self::CustomStokes),
            other => Err(CliError::Usage(format!(
                "example: expected 1, 2, 3 or custom-stokes, got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::One => "1",
            Self::Two => "2",
            Self::Three => "3",
            Self::CustomStokes => "custom-stokes",
        })
    }
}

impl ExampleKind {
    fn solution(self) -> Option<Box<dyn ManufacturedSolution>> {
        match self {
            Self::One => Some(Box::new(Example1::new())),
            Self::Two | Self::CustomStokes => Some(Box::new(Example2)),
            Self::Three => None,
        }
    }

    fn convection(self) -> bool {
        self != Self::CustomStokes
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(savmac::Error),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Numerical(_) | Self::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Numerical(e) => write!(f, "numerical failure: {e}"),
            Self::Io(e) => write!(f, "i/o failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<savmac::Error> for CliError {
    fn from(e: savmac::Error) -> Self {
        Self::Numerical(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

pub const CONFIG_KEYS: [&str; 10] =
    ["example", "nx", "ny", "dt", "t_final", "nu", "delta", "kappa", "output", "verbosity"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub example: ExampleKind,
    pub nx: usize,
    pub ny: usize,
    /// `None` means `dt = h`
    pub dt: Option<f64>,
    pub t_final: f64,
    pub nu: f64,
    pub delta: f64,
    pub kappa: f64,
    pub output: PathBuf,
    pub verbosity: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            example: ExampleKind::One,
            nx: 16,
            ny: 16,
            dt: None,
            t_final: 1.0,
            nu: 1.0,
            delta: 0.1,
            kappa: 0.1,
            output: PathBuf::from("out"),
            verbosity: 0,
        }
    }
}

fn positive_f64(key: &str, v: &str) -> Result<f64, CliError> {
    match v.trim().parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(CliError::Usage(format!("{key}: expected a positive number, got '{v}'"))),
    }
}

fn grid_size(key: &str, v: &str) -> Result<usize, CliError> {
    match v.trim().parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(CliError::Usage(format!("{key}: expected an integer >= 2, got '{v}'"))),
    }
}

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "example" => self.example = value.parse()?,
            "nx" => self.nx = grid_size(key, value)?,
            "ny" => self.ny = grid_size(key, value)?,
            "dt" => self.dt = Some(positive_f64(key, value)?),
            "t_final" => self.t_final = positive_f64(key, value)?,
            "nu" => self.nu = positive_f64(key, value)?,
            "delta" => self.delta = positive_f64(key, value)?,
            "kappa" => {
                let k = positive_f64(key, value)?;
                if k >= 1.0 {
                    return Err(CliError::Usage(format!("kappa: must be below 1, got '{value}'")));
                }
                self.kappa = k;
            }
            "output" => {
                if value.trim().is_empty() {
                    return Err(CliError::Usage("output: empty path".into()));
                }
                self.output = PathBuf::from(value.trim());
            }
            "verbosity" => {
                self.verbosity = value
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("verbosity: expected a non-negative integer, got '{value}'")))?
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown key '{other}' (allowed: {})",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Defaults, then `file_text` (key=value lines, `#` comments), then
    /// `flags` in order.
    pub fn from_sources(file_text: Option<&str>, flags: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(text) = file_text {
            for (key, value) in parse_key_values(text)? {
                cfg.set(&key, &value)?;
            }
        }
        for (key, value) in flags {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<StaggeredGrid, CliError> {
        StaggeredGrid::new(0.0, 1.0, 0.0, 1.0, self.nx, self.ny).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or(1.0 / self.nx as f64)
    }

    pub fn params(&self) -> Result<SavParams, CliError> {
        SavParams::new(self.time_step(), self.t_final, self.nu, self.delta, self.kappa)
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("line {}: expected key=value, got '{raw}'", lineno + 1)));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub q0: f64,
    pub trace: Vec<StepDiagnostics>,
    pub errors: Option<ErrorNorms>,
    pub final_velocity: VelocityField,
    pub final_pressure: Option<savmac::CenterField>,
    /// largest `div_max / max|U|` over all steps
    pub max_relative_divergence: f64,
}

impl RunOutput {
    pub fn audit(&self) -> Result<EnergyAudit, savmac::Error> {
        energy_audit(self.q0, &self.trace, false)
    }
}

/// Runs one simulation in memory.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let ms = cfg.example.solution();
    let convection = cfg.example.convection();
    let mut stepper = SavStepper::new(&grid, params)?;
    if !convection {
        stepper = stepper.without_convection();
    }
    let u0 = match &ms {
        Some(ms) => sample_velocity(ms.as_ref(), &grid, 0.0),
        None => example3_initial(&grid),
    };
    // the stepper asks for f at t^{n+1/2}; we use the endpoint average
    let forcing = |t: f64| match &ms {
        Some(ms) => forcing_half(ms.as_ref(), &grid, params.nu, convection, t - 0.5 * params.dt, params.dt, HalfLevel::Average),
        None => VelocityField::zeros(&grid),
    };

    let mut acc = ms
        .as_ref()
        .map(|ms| ErrorAccumulator::new(ms.as_ref(), &grid, params.dt, params.delta));
    let mut trace = Vec::with_capacity(params.steps());
    let mut q0 = f64::NAN;
    let mut max_rel_div: f64 = 0.0;
    let verbose = cfg.verbosity >= 1;
    let last = stepper.run(&u0, forcing, |state, diag| {
        if let Some(acc) = acc.as_mut() {
            acc.observe_state(state.n, &state.u, state.q)?;
            if let Some(p) = &state.p_half {
                acc.observe_pressure(state.n - 1, p)?;
            }
        }
        match diag {
            None => q0 = state.q,
            Some(d) => {
                let scale = state.u.max_abs();
                if scale > 0.0 {
                    max_rel_div = max_rel_div.max(d.div_max / scale);
                }
                if verbose {
                    eprintln!("step {:>6} t={:.6} Q={:.10} S={:.10}", d.step, d.t, d.q, d.chosen);
                }
                trace.push(*d);
            }
        }
        Ok(())
    });
    let last = last.map_err(|e| {
        if let savmac::Error::Audit { .. } | savmac::Error::KappaViolation { .. } | savmac::Error::NoRealRoot { .. } = e {
            eprintln!("step {} failed", trace.len() + 1);
        }
        CliError::Numerical(e)
    })?;
    Ok(RunOutput {
        q0,
        trace,
        errors: acc.map(ErrorAccumulator::finish),
        final_velocity: last.u,
        final_pressure: last.p_half,
        max_relative_divergence: max_rel_div,
    })
}

/// Number formatting shared by all CSV files: 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn write_trace_csv(trace: &[StepDiagnostics], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for d in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.step,
            fmt_num(d.t),
            fmt_num(d.q),
            fmt_num(d.roots[0]),
            fmt_num(d.roots[1]),
            fmt_num(d.chosen),
            fmt_num(d.energy_residual),
            fmt_num(d.div_max)
        )?;
    }
    Ok(())
}

pub fn write_errors_csv(errors: &ErrorNorms, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{ERRORS_HEADER}")?;
    for (name, v) in errors.named() {
        writeln!(out, "{name},{}", fmt_num(v))?;
    }
    Ok(())
}

pub fn converge_header() -> String {
    let mut h = String::from("level,nx");
    for name in ErrorNorms::NAMES {
        h.push_str(&format!(",error_{name},rate_{name}"));
    }
    h
}

/// One row per level; the coarsest row has empty rate cells.
pub fn write_converge_csv(table: &ConvergenceTable, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{}", converge_header())?;
    for row in &table.rows {
        let mut line = format!("{},{}", row.level, row.nx);
        for (c, e) in row.errors.values().iter().enumerate() {
            let r = row.rates.map(|r| fmt_num(r[c])).unwrap_or_default();
            line.push_str(&format!(",{},{r}", fmt_num(*e)));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> io::Result<io::BufWriter<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(io::BufWriter::new(fs::File::create(dir.join(name))?))
}

/// Runs and writes `trace.csv` (always) and `errors.csv` (when an exact
/// solution exists). Verbosity 2 also dumps the final fields.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let out = simulate(cfg)?;
    let mut w = create(&cfg.output, "trace.csv")?;
    write_trace_csv(&out.trace, &mut w)?;
    w.flush()?;
    let errors_path = cfg.output.join("errors.csv");
    match &out.errors {
        Some(e) => {
            let mut w = create(&cfg.output, "errors.csv")?;
            write_errors_csv(e, &mut w)?;
            w.flush()?;
        }
        None if errors_path.exists() => fs::remove_file(errors_path)?,
        None => {}
    }
    if cfg.verbosity >= 2 {
        for (name, f) in [("u1.txt", &out.final_velocity.u1), ("u2.txt", &out.final_velocity.u2)] {
            let mut w = create(&cfg.output, name)?;
            write_dump(f, &mut w)?;
            w.flush()?;
        }
        if let Some(p) = &out.final_pressure {
            let mut w = create(&cfg.output, "p.txt")?;
            write_dump(p, &mut w)?;
            w.flush()?;
        }
    }
    Ok(out)
}

/// Refinement study on `nx = ny = 2^level` with `dt = h`. Levels run on
/// separate threads.
pub fn converge_table(cfg: &RunConfig, levels: &[u32]) -> Result<ConvergenceTable, CliError> {
    if levels.is_empty() {
        return Err(CliError::Usage("converge: no levels given".into()));
    }
    if cfg.example == ExampleKind::Three {
        return Err(CliError::Usage("example: 3 has no exact solution to converge against".into()));
    }
    for &l in levels {
        if !(1..=12).contains(&l) {
            return Err(CliError::Usage(format!("levels: level {l} outside 1..=12")));
        }
    }
    let results: Vec<Result<(u32, usize, ErrorNorms), CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&level| {
                s.spawn(move || {
                    let n = 1usize << level;
                    let level_cfg = RunConfig {
                        nx: n,
                        ny: n,
                        dt: Some(1.0 / n as f64),
                        ..cfg.clone()
                    };
                    let out = simulate(&level_cfg)?;
                    Ok((level, n, out.errors.expect("exact solution present")))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("level thread panicked")).collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ConvergenceTable::from_levels(&rows))
}

/// [`converge_table`] plus `converge.csv`.
pub fn converge(cfg: &RunConfig, levels: &[u32]) -> Result<ConvergenceTable, CliError> {
    let table = converge_table(cfg, levels)?;
    let mut w = create(&cfg.output, "converge.csv")?;
    write_converge_csv(&table, &mut w)?;
    w.flush()?;
    Ok(table)
}

/// Root behaviour of one unforced run.
#[derive(Debug, Clone, PartialEq)]
pub struct RootsSummary {
    pub dt: f64,
    pub max_deviation: f64,
    /// largest `|rejected root|` after the first `skip` steps
    pub max_rejected_tail: f64,
    pub trace: Vec<StepDiagnostics>,
    pub q0: f64,
}

pub const ROOTS_HEADER: &str = "dt,steps,max_abs_S_minus_1,max_abs_rejected_tail";

/// Steps at the start of a roots run excluded from the rejected-root bound.
pub const ROOTS_SKIP: usize = 3;

/// Unforced example 3 for each `dt`; writes `trace_dt<i>.csv` per entry and
/// a `roots.csv` summary. With `joint_refinement` the grid follows the time
/// step (`nx = ny = round(1/dt)`), otherwise `cfg.nx x cfg.ny` is used.
pub fn roots_study(cfg: &RunConfig, dts: &[f64], joint_refinement: bool) -> Result<Vec<RootsSummary>, CliError> {
    if dts.is_empty() {
        return Err(CliError::Usage("dt list: at least one time step is required".into()));
    }
    for &dt in dts {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CliError::Usage(format!("dt list: expected positive numbers, got {dt}")));
        }
    }
    let mut summaries = Vec::with_capacity(dts.len());
    let mut index = create(&cfg.output, "roots.csv")?;
    writeln!(index, "{ROOTS_HEADER}")?;
    for (i, &dt) in dts.iter().enumerate() {
        let mut run_cfg = RunConfig {
            example: ExampleKind::Three,
            dt: Some(dt),
            ..cfg.clone()
        };
        if joint_refinement {
            let n = (1.0 / dt).round() as usize;
            if n < 2 {
                return Err(CliError::Usage(format!("dt list: {dt} is too coarse to set the grid from")));
            }
            run_cfg.nx = n;
            run_cfg.ny = n;
        }
        let out = simulate(&run_cfg)?;
        let mut w = create(&cfg.output, &format!("trace_dt{i}.csv"))?;
        write_trace_csv(&out.trace, &mut w)?;
        w.flush()?;
        let summary = summarize_roots(dt, out.q0, out.trace);
        writeln!(
            index,
            "{},{},{},{}",
            fmt_num(dt),
            summary.trace.len(),
            fmt_num(summary.max_deviation),
            fmt_num(summary.max_rejected_tail)
        )?;
        summaries.push(summary);
    }
    index.flush()?;
    Ok(summaries)
}

pub fn summarize_roots(dt: f64, q0: f64, trace: Vec<StepDiagnostics>) -> RootsSummary {
    let max_deviation = trace.iter().map(|d| (d.chosen - 1.0).abs()).fold(0.0, f64::max);
    let max_rejected_tail = trace
        .iter()
        .skip(ROOTS_SKIP)
        .map(|d| d.rejected().abs())
        .fold(0.0, f64::max);
    RootsSummary {
        dt,
        max_deviation,
        max_rejected_tail,
        trace,
        q0,
    }
}

/// Parses a comma separated list of time steps; `1/64` style fractions are
/// accepted.
pub fn parse_dt_list(text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v = match item.split_once('/') {
            Some((a, b)) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()).map(|(a, b)| a / b),
            None => item.parse::<f64>().ok(),
        };
        match v {
            Some(v) if v > 0.0 && v.is_finite() => out.push(v),
            _ => return Err(CliError::Usage(format!("dt list: cannot parse '{item}'"))),
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("dt list: at least one time step is required".into()));
    }
    Ok(out)
}
