//! Command-line front end: `polshift <command> --config run.toml`.
//!
//! Every command reads a [`RunConfig`], writes CSV tables (and SVG charts
//! with `--plots`) into the output directory, and maps failures to exit
//! codes: 0 success, 1 failed physics check, 2 configuration error, 3 I/O
//! error.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use crate::compensation::{compensate, separability_residual};
use crate::error::Error;
use crate::hardware::{plan_cells_limited, required_slew, residual_fidelity};
use crate::reshape::three_step;
use crate::spectra::{eval_phi, FrequencyGrid, GridAxis, Path, QDotParams, SpectralAmplitude};
use crate::state::{concurrence, fidelity_phi_plus, reduce_polarization, TwoPhotonState};
use crate::time_domain::{apply_ramp, PhaseRamp, TemporalState};

pub use config::RunConfig;
use config::{PathName, SpectrumSpec, SweepParameter};
use output::{line_chart, Series, Table};

/// Compensated states must reach at least this Φ⁺ fidelity.
pub const COMPENSATED_FIDELITY_FLOOR: f64 = 1.0 - 1e-6;
/// Frequency-shift and time-ramp pictures must agree to this fidelity.
pub const EQUIVALENCE_FLOOR: f64 = 1.0 - 1e-6;

#[derive(Debug, Parser)]
#[command(name = "polshift", version, about = "Frequency-shift compensation of cascade photon pairs")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    pub plots: bool,
    /// Grid points per axis (power of two).
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    /// Grid span in units of Gamma.
    #[arg(long, global = true)]
    pub grid_span_gammas: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Marginal and joint spectra of both decay paths.
    Spectra,
    /// Fidelity and concurrence before and after compensation over a sweep.
    FidelitySweep,
    /// Pockels cell drive plans and residual fidelity versus ramp window.
    HardwarePlan,
    /// Frequency-shift versus time-ramp compensation.
    Equivalence,
    /// Shift, warp and phase-flatten one spectrum onto another.
    Reshape,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Check(String),
    Compute(Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Compute(Error::Parameter(_)) => 2,
            CliError::Compute(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Compute(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "I/O error on {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

/// Resolved settings for one invocation.
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub plots: bool,
    pub written: Vec<PathBuf>,
}

impl Context {
    pub fn new(mut config: RunConfig, args: &Args) -> Result<Self, CliError> {
        if let Some(n) = args.grid_n {
            config.grid.n = n;
        }
        if let Some(span) = args.grid_span_gammas {
            config.grid.span_gammas = span;
        }
        config.validate().map_err(CliError::Config)?;
        let out_dir = args.out.clone().unwrap_or_else(|| config.output.dir.clone());
        Ok(Self {
            config,
            out_dir,
            plots: args.plots,
            written: Vec::new(),
        })
    }

    fn prepare_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|source| CliError::Io {
            path: self.out_dir.clone(),
            source,
        })
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        table.write(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }

    fn chart(&mut self, name: &str, svg: String) -> Result<(), CliError> {
        if !self.plots {
            return Ok(());
        }
        let path = self.out_dir.join(name);
        fs::write(&path, svg).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }
}

/// Parse arguments, run, report, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&args) {
        Ok(ctx) => {
            for p in &ctx.written {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("polshift: {e}");
            e.exit_code()
        }
    }
}

pub fn run(args: &Args) -> Result<Context, CliError> {
    let path = args
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let config = RunConfig::load(path).map_err(CliError::Config)?;
    let mut ctx = Context::new(config, args)?;
    ctx.prepare_dir()?;
    match args.command {
        Command::Spectra => cmd_spectra(&mut ctx)?,
        Command::FidelitySweep => cmd_fidelity_sweep(&mut ctx)?,
        Command::HardwarePlan => cmd_hardware_plan(&mut ctx)?,
        Command::Equivalence => cmd_equivalence(&mut ctx)?,
        Command::Reshape => cmd_reshape(&mut ctx)?,
    }
    Ok(ctx)
}

fn warn_narrow(a: &SpectralAmplitude, what: &str) {
    if a.narrow_grid {
        eprintln!("polshift: warning: grid does not cover ±5Γ around the {what} lines");
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
        .0
}

pub fn cmd_spectra(ctx: &mut Context) -> Result<(), CliError> {
    let params = ctx.config.qdot_params()?;
    let grid = ctx.config.frequency_grid(&params)?;
    let raw_h = eval_phi(Path::H, &grid, &params)?;
    let raw_v = eval_phi(Path::V, &grid, &params)?;
    warn_narrow(&raw_h, "H");
    warn_narrow(&raw_v, "V");
    let (norm_h, norm_v) = (raw_h.norm_sqr(), raw_v.norm_sqr());
    let h = raw_h.normalize()?;
    drop(raw_h);
    let v = raw_v.normalize()?;
    drop(raw_v);

    let mut peaks = Vec::new();
    for (name, amp) in [("H", &h), ("V", &v)] {
        let m1 = amp.marginal(GridAxis::One);
        let m2 = amp.marginal(GridAxis::Two);
        let mut t = Table::new(&["index", "omega1", "marginal1", "omega2", "marginal2"]);
        for j in 0..grid.n {
            t.push(vec![j.into(), grid.omega1(j).into(), m1[j].into(), grid.omega2(j).into(), m2[j].into()]);
        }
        ctx.table(&format!("marginal_{name}.csv"), &t)?;
        peaks.push((grid.omega1(argmax(m1.as_slice().unwrap())), grid.omega2(argmax(m2.as_slice().unwrap()))));
    }

    // Joint magnitude over the central region, thinned to ≤ ~200 nodes per axis.
    let half = ((10.0 * params.gamma + params.splitting_rate()) / grid.step()).ceil() as usize;
    let half = half.min(grid.n / 2 - 1);
    let stride = (2 * half).div_ceil(200).max(1);
    let nodes: Vec<usize> = (grid.n / 2 - half..=grid.n / 2 + half).step_by(stride).collect();
    for (name, amp) in [("H", &h), ("V", &v)] {
        let mut t = Table::new(&["omega1", "omega2", "abs_phi"]);
        for &i in &nodes {
            for &j in &nodes {
                t.push(vec![grid.omega1(i).into(), grid.omega2(j).into(), amp.values[[i, j]].norm().into()]);
            }
        }
        ctx.table(&format!("magnitude_{name}.csv"), &t)?;
    }

    let mut s = Table::new(&["quantity", "value"]);
    s.push(vec!["splitting_rate".into(), params.splitting_rate().into()]);
    s.push(vec!["grid_step".into(), grid.step().into()]);
    s.push(vec!["norm_raw_H".into(), norm_h.into()]);
    s.push(vec!["norm_raw_V".into(), norm_v.into()]);
    s.push(vec!["peak1_H".into(), peaks[0].0.into()]);
    s.push(vec!["peak1_V".into(), peaks[1].0.into()]);
    s.push(vec!["peak2_H".into(), peaks[0].1.into()]);
    s.push(vec!["peak2_V".into(), peaks[1].1.into()]);
    s.push(vec!["peak2_separation".into(), (peaks[0].1 - peaks[1].1).into()]);
    s.push(vec!["overlap_abs".into(), h.overlap(&v)?.norm().into()]);
    ctx.table("spectra_summary.csv", &s)?;

    if ctx.plots {
        let window = |axis: GridAxis| -> Vec<Series> {
            [("H", &h), ("V", &v)]
                .iter()
                .map(|(name, amp)| {
                    let m = amp.marginal(axis);
                    Series {
                        label: format!("{name} path"),
                        points: (grid.n / 2 - half..=grid.n / 2 + half)
                            .map(|j| (grid.offset(j), m[j]))
                            .collect(),
                    }
                })
                .collect()
        };
        let c1 = line_chart("Photon 1 marginal", "ω1 − center (rad/ns)", "density (ns)", &window(GridAxis::One));
        ctx.chart("marginal_photon1.svg", c1)?;
        let c2 = line_chart("Photon 2 marginal", "ω2 − center (rad/ns)", "density (ns)", &window(GridAxis::Two));
        ctx.chart("marginal_photon2.svg", c2)?;
    }
    Ok(())
}

pub struct SweepRow {
    pub parameter: f64,
    pub uncompensated_fidelity: f64,
    pub uncompensated_concurrence: f64,
    pub compensated_fidelity: f64,
    pub residual: f64,
}

/// One sweep point. The grid span is snapped so that S/ħ is a whole number
/// of steps and the compensation is an exact translation.
pub fn sweep_point(params: &QDotParams, span_gammas: f64, n: usize) -> crate::Result<SweepRow> {
    let grid = FrequencyGrid::with_exact_splitting(params, span_gammas, n)?;
    let state = TwoPhotonState::cascade(&grid, params)?;
    let rho = reduce_polarization(&state)?;
    let (f0, c0) = (fidelity_phi_plus(&rho), concurrence(&rho)?);
    let fixed = compensate(&state, params)?.state;
    drop(state);
    let rho1 = reduce_polarization(&fixed)?;
    Ok(SweepRow {
        parameter: 0.0,
        uncompensated_fidelity: f0,
        uncompensated_concurrence: c0,
        compensated_fidelity: fidelity_phi_plus(&rho1),
        residual: separability_residual(&fixed).residual,
    })
}

pub fn cmd_fidelity_sweep(ctx: &mut Context) -> Result<(), CliError> {
    let sweep = ctx
        .config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("fidelity-sweep needs a [sweep] section".into()))?;
    let base = ctx.config.qdot_params()?;
    let mut rows = Vec::new();
    for value in sweep.values() {
        let params = match sweep.parameter {
            SweepParameter::S => base.with_splitting(value),
            SweepParameter::Gamma => QDotParams::new(base.omega0, base.omega_h2, base.splitting, value)?,
        };
        let mut row = sweep_point(&params, ctx.config.grid.span_gammas, ctx.config.grid.n)?;
        row.parameter = value;
        rows.push(row);
    }

    let mut t = Table::new(&[
        "parameter",
        "uncompensated_fidelity",
        "uncompensated_concurrence",
        "compensated_fidelity",
        "residual",
    ]);
    for r in &rows {
        t.push(vec![
            r.parameter.into(),
            r.uncompensated_fidelity.into(),
            r.uncompensated_concurrence.into(),
            r.compensated_fidelity.into(),
            r.residual.into(),
        ]);
    }
    ctx.table("fidelity_sweep.csv", &t)?;

    let label = sweep.parameter.label();
    let unit = match sweep.parameter {
        SweepParameter::S => "μeV",
        SweepParameter::Gamma => "1/ns",
    };
    let series = |name: &str, f: fn(&SweepRow) -> f64| Series {
        label: name.into(),
        points: rows.iter().map(|r| (r.parameter, f(r))).collect(),
    };
    let chart = line_chart(
        "Fidelity to Φ⁺",
        &format!("{label} ({unit})"),
        "fidelity / concurrence",
        &[
            series("uncompensated F", |r| r.uncompensated_fidelity),
            series("uncompensated C", |r| r.uncompensated_concurrence),
            series("compensated F", |r| r.compensated_fidelity),
        ],
    );
    ctx.chart("fidelity_sweep.svg", chart)?;

    if let Some(bad) = rows.iter().find(|r| r.compensated_fidelity < COMPENSATED_FIDELITY_FLOOR) {
        return Err(CliError::Check(format!(
            "compensated fidelity {} at {label} = {} is below {COMPENSATED_FIDELITY_FLOOR}",
            bad.compensated_fidelity, bad.parameter
        )));
    }
    Ok(())
}

pub fn cmd_hardware_plan(ctx: &mut Context) -> Result<(), CliError> {
    let catalog = ctx
        .config
        .catalog()?
        .ok_or_else(|| CliError::Config("cell catalog is empty".into()))?;
    let params = ctx.config.qdot_params()?;
    let hw = ctx.config.hardware.clone();

    let mut t = Table::new(&[
        "cell",
        "alpha",
        "max_slew",
        "max_voltage",
        "placeholder_limits",
        "required_slew",
        "feasible",
        "n_cells",
        "per_cell_slew",
        "peak_voltage",
        "binding_constraint",
    ]);
    for cell in &catalog {
        if cell.placeholder_limits {
            eprintln!("polshift: note: driver limits of '{}' are placeholders", cell.name);
        }
        let slew = required_slew(params.splitting, cell.alpha)?;
        let head: Vec<output::Cell> = vec![
            cell.name.as_str().into(),
            cell.alpha.into(),
            cell.max_slew.into(),
            cell.max_voltage.into(),
            cell.placeholder_limits.into(),
            slew.into(),
        ];
        let tail: Vec<output::Cell> = match plan_cells_limited(params.splitting, cell, hw.window, hw.max_cells) {
            Ok(plan) => vec![
                true.into(),
                plan.n_cells.into(),
                plan.per_cell_slew.into(),
                plan.peak_voltage.into(),
                "".into(),
            ],
            Err(Error::Infeasible {
                constraint,
                required_cells,
                ..
            }) => vec![false.into(), required_cells.into(), "".into(), "".into(), constraint.to_string().into()],
            Err(e) => return Err(e.into()),
        };
        t.push(head.into_iter().chain(tail).collect());
    }
    ctx.table("hardware_plan.csv", &t)?;

    let mut curve = Table::new(&["window", "residual_fidelity"]);
    let stop = hw.curve_stop_gammas / params.gamma;
    let mut points = Vec::new();
    for k in 0..hw.curve_points {
        let w = stop * k as f64 / (hw.curve_points - 1) as f64;
        let f = residual_fidelity(params.splitting, params.gamma, w)?;
        curve.push(vec![w.into(), f.into()]);
        points.push((w, f));
    }
    ctx.table("residual_fidelity.csv", &curve)?;
    let chart = line_chart(
        "Fidelity with a finite ramp window",
        "window (ns)",
        "fidelity to Φ⁺",
        &[Series {
            label: format!("S = {} μeV", params.splitting),
            points,
        }],
    );
    ctx.chart("residual_fidelity.svg", chart)?;
    Ok(())
}

pub struct Equivalence {
    pub fidelity_between: f64,
    pub frequency_fidelity: f64,
    pub time_fidelity: f64,
    pub uncompensated_fidelity: f64,
}

/// Compensate once by the spectral shift `U(−S, S)` and once by full-window
/// phase ramps in the time picture, and compare.
pub fn equivalence(params: &QDotParams, grid: &FrequencyGrid) -> crate::Result<Equivalence> {
    let state = TwoPhotonState::cascade(grid, params)?;
    let uncompensated_fidelity = fidelity_phi_plus(&reduce_polarization(&state)?);
    let by_shift = compensate(&state, params)?.state;
    let temporal = TemporalState::from_frequency(&state);
    drop(state);
    let ramp = PhaseRamp::canonical_full(params, &temporal.v.grid)?;
    let by_ramp = apply_ramp(&temporal, &ramp).to_frequency()?;
    drop(temporal);
    Ok(Equivalence {
        fidelity_between: by_shift.fidelity(&by_ramp)?,
        frequency_fidelity: fidelity_phi_plus(&reduce_polarization(&by_shift)?),
        time_fidelity: fidelity_phi_plus(&reduce_polarization(&by_ramp)?),
        uncompensated_fidelity,
    })
}

pub fn cmd_equivalence(ctx: &mut Context) -> Result<(), CliError> {
    let params = ctx.config.qdot_params()?;
    let grid = ctx.config.frequency_grid(&params)?;
    let eq = equivalence(&params, &grid)?;
    let mut t = Table::new(&["quantity", "value"]);
    t.push(vec!["fidelity_between_pictures".into(), eq.fidelity_between.into()]);
    t.push(vec!["fidelity_phi_plus_frequency_shift".into(), eq.frequency_fidelity.into()]);
    t.push(vec!["fidelity_phi_plus_time_ramp".into(), eq.time_fidelity.into()]);
    t.push(vec!["fidelity_phi_plus_uncompensated".into(), eq.uncompensated_fidelity.into()]);
    ctx.table("equivalence.csv", &t)?;
    if eq.fidelity_between < EQUIVALENCE_FLOOR {
        return Err(CliError::Check(format!(
            "pictures disagree: fidelity {} below {EQUIVALENCE_FLOOR}",
            eq.fidelity_between
        )));
    }
    Ok(())
}

/// Build a configured spectrum on `grid`. Offsets are relative to the
/// configured dot's H-path line centers.
pub fn build_spectrum(spec: &SpectrumSpec, base: &QDotParams, grid: &FrequencyGrid) -> crate::Result<SpectralAmplitude> {
    match *spec {
        SpectrumSpec::Cascade {
            path,
            gamma,
            offset1,
            offset2,
        } => {
            let params = QDotParams::new(
                base.omega0 + offset1 + offset2,
                base.omega_h2 + offset2,
                base.splitting,
                gamma.unwrap_or(base.gamma),
            )?;
            let path = match path {
                PathName::H => Path::H,
                PathName::V => Path::V,
            };
            eval_phi(path, grid, &params)?.normalize()
        }
        SpectrumSpec::Gaussian {
            offset1,
            offset2,
            sigma1,
            sigma2,
            slope1,
            slope2,
        } => {
            let (c1, c2) = (base.omega_h1() + offset1, base.omega_h2 + offset2);
            let g = |c: f64, sigma: f64, slope: f64| {
                move |w: f64| {
                    let x = w - c;
                    Complex64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), slope * x)
                }
            };
            SpectralAmplitude::separable(*grid, g(c1, sigma1, slope1), g(c2, sigma2, slope2))?.normalize()
        }
    }
}

pub fn cmd_reshape(ctx: &mut Context) -> Result<(), CliError> {
    let spec = ctx
        .config
        .reshape
        .clone()
        .ok_or_else(|| CliError::Config("reshape needs a [reshape] section with a and b".into()))?;
    let base = ctx.config.qdot_params()?;
    let grid = ctx.config.frequency_grid(&base)?;
    let a = build_spectrum(&spec.a, &base, &grid)?;
    let b = build_spectrum(&spec.b, &base, &grid)?;
    let out = three_step(&a, &b)?;
    drop((a, b));
    let report = &out.report;

    let mut t = Table::new(&["stage", "overlap_re", "overlap_im", "overlap_abs", "applied", "norm_before"]);
    for s in &report.stages {
        t.push(vec![
            s.stage.name().into(),
            s.overlap.re.into(),
            s.overlap.im.into(),
            s.overlap.norm().into(),
            s.applied.into(),
            s.norm_before.into(),
        ]);
    }
    ctx.table("reshape_report.csv", &t)?;

    let mut s = Table::new(&["quantity", "value"]);
    s.push(vec!["shift_delta1_ueV".into(), report.shift.shift.delta1.into()]);
    s.push(vec!["shift_delta2_ueV".into(), report.shift.shift.delta2.into()]);
    s.push(vec!["shift_objective".into(), report.shift.objective.into()]);
    s.push(vec!["warp1_mean_displacement".into(), report.warps.warp1.mean_displacement().into()]);
    s.push(vec!["warp2_mean_displacement".into(), report.warps.warp2.mean_displacement().into()]);
    s.push(vec!["warp_regularized".into(), report.warps.regularized.into()]);
    s.push(vec!["phase_separability".into(), report.phases.separability.into()]);
    s.push(vec!["phase_separable".into(), report.phases.separable.into()]);
    s.push(vec!["phase_iterations".into(), report.phases.iterations.into()]);
    ctx.table("reshape_summary.csv", &s)?;

    let (w1, w2) = (report.warps.warp1.table(), report.warps.warp2.table());
    let mut wt = Table::new(&["index", "omega1", "warp1", "omega2", "warp2"]);
    for j in 0..grid.n {
        wt.push(vec![j.into(), w1[j].0.into(), w1[j].1.into(), w2[j].0.into(), w2[j].1.into()]);
    }
    ctx.table("reshape_warps.csv", &wt)?;

    let p = &report.phases.profiles;
    let mut pt = Table::new(&["index", "omega1", "phase1", "omega2", "phase2"]);
    for j in 0..grid.n {
        pt.push(vec![
            j.into(),
            grid.omega1(j).into(),
            p.phase1[j].into(),
            grid.omega2(j).into(),
            p.phase2[j].into(),
        ]);
    }
    ctx.table("reshape_phases.csv", &pt)?;

    if ctx.plots {
        let displacement = |w: &[(f64, f64)], axis: GridAxis| Series {
            label: format!("photon {}", axis.index() + 1),
            points: w.iter().map(|&(x, y)| (x - grid.center(axis), y - x)).collect(),
        };
        let chart = line_chart(
            "Warp displacement",
            "ω − center (rad/ns)",
            "ω′ − ω (rad/ns)",
            &[displacement(&w1, GridAxis::One), displacement(&w2, GridAxis::Two)],
        );
        ctx.chart("reshape_warps.svg", chart)?;
        let stages = Series {
            label: "|overlap|".into(),
            points: report.magnitudes().iter().enumerate().map(|(i, &m)| (i as f64, m)).collect(),
        };
        ctx.chart(
            "reshape_overlap.svg",
            line_chart("Overlap after each stage", "stage (initial, shift, warp, phase)", "|⟨a|b⟩|", &[stages]),
        )?;
    }

    if !report.is_monotone() {
        return Err(CliError::Check(format!("overlap decreased across stages: {:?}", report.magnitudes())));
    }
    Ok(())
}
