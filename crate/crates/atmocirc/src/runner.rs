//! End-to-end drivers behind the CLI: materialize a configuration into grid,
//! parameters, initial state and forcing; run it while writing snapshots,
//! diagnostics and a manifest; and re-check an existing output directory.

use crate::config::{ConfigError, ForcingSpec, InitialSpec, ParamSpec, RunConfig};
use crate::diagnostics::{
    self, standard_bank, DiagnosticsRecord, Trajectory, TrajectoryDiagnostics,
};
use crate::fields::{Grid, ScalarField, State};
use crate::output::{self, DirLock, DiagnosticsWriter, OutputError};
use crate::params::{heat_source_scale, humidity_source_scale, DimensionlessParams};
use crate::pressure;
use crate::stepper::{Forcing, StepError, Stepper, CFL_LIMIT};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("solver failure: {0}")]
    Step(String),
    #[error("run aborted: non-finite {field} at t = {time} (step {step}); partial outputs flushed to {dir}")]
    NanAbort {
        field: &'static str,
        time: f64,
        step: u64,
        dir: PathBuf,
    },
}

impl RunError {
    /// Process exit code: 1 for configuration/solver errors, 2 for the NaN
    /// abort path.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::NanAbort { .. } => 2,
            _ => 1,
        }
    }
}

fn config_err(field: &str, message: impl Into<String>) -> RunError {
    RunError::Config(ConfigError::Validation {
        field: field.into(),
        message: message.into(),
    })
}

/// A configuration materialized into solver inputs.
pub struct Prepared {
    pub grid: Grid,
    pub params: DimensionlessParams,
    pub state: State,
    pub forcing: Forcing,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Build grid, dimensionless parameters, initial state and forcing fields.
/// File references are resolved relative to `base_dir` and must match the
/// configured grid. With a `[physical]` block the forcing amplitudes are
/// dimensional sources and are scaled to nondimensional form here; with a
/// `[dimensionless]` block they are used as given.
pub fn prepare(config: &RunConfig, base_dir: &Path) -> Result<Prepared, RunError> {
    config.validate()?;
    let grid = config.grid()?;
    let params = config.dimensionless()?;

    let mut state = match &config.initial {
        InitialSpec::Zero => State::zeros(grid),
        InitialSpec::SingleMode {
            kx,
            m,
            amp_t,
            amp_q,
            amp_u,
        } => {
            let kx = *kx as f64;
            let mf = *m as f64;
            let mut s = State::zeros(grid);
            s.temperature = ScalarField::from_fn(grid, true, |x1, x2| {
                amp_t * (kx * x1).cos() * (mf * PI * x2).sin()
            });
            s.humidity = ScalarField::from_fn(grid, true, |x1, x2| {
                amp_q * (kx * x1).cos() * (mf * PI * x2).sin()
            });
            // velocity from ψ = amp_u·cos(kx·x₁)sin²(mπx₂)
            s.u1 = ScalarField::from_fn(grid, true, |x1, x2| {
                amp_u * (kx * x1).cos() * mf * PI * (2.0 * mf * PI * x2).sin()
            });
            s.u2 = ScalarField::from_fn(grid, true, |x1, x2| {
                amp_u * kx * (kx * x1).sin() * (mf * PI * x2).sin().powi(2)
            });
            s
        }
        InitialSpec::File(path) => {
            let path = resolve(base_dir, path);
            let s = output::read_snapshot(&path)?;
            if s.grid() != grid {
                return Err(config_err(
                    "initial.path",
                    format!(
                        "{} is on a {}x{} grid, run wants {}x{}",
                        path.display(),
                        s.grid().n1(),
                        s.grid().n2(),
                        grid.n1(),
                        grid.n2()
                    ),
                ));
            }
            s
        }
    };
    state.time = 0.0;
    // restore the state invariants: solenoidal velocity, mean-zero pressure
    let has_velocity = state.u1.max_abs() > 0.0 || state.u2.max_abs() > 0.0;
    if has_velocity {
        let proj = pressure::project(&state.u1, &state.u2, 1.0, 1.0)
            .map_err(|e| RunError::Step(e.to_string()))?;
        state.u1 = proj.u1;
        state.u2 = proj.u2;
    }
    state.pressure.remove_mean();

    let mut forcing = match &config.forcing {
        ForcingSpec::Zero => Forcing::zero(grid),
        ForcingSpec::Constant { q0, g0 } => Forcing::constant(grid, *q0, *g0),
        ForcingSpec::SingleMode { kx, m, q0, g0 } => {
            let kx = *kx as f64;
            let mf = *m as f64;
            Forcing {
                heat: ScalarField::from_fn(grid, false, |x1, x2| {
                    q0 * (kx * x1).cos() * (mf * PI * x2).sin()
                }),
                moisture: ScalarField::from_fn(grid, false, |x1, x2| {
                    g0 * (kx * x1).cos() * (mf * PI * x2).sin()
                }),
            }
        }
        ForcingSpec::File(path) => {
            let path = resolve(base_dir, path);
            let (heat, moisture) = output::read_forcing(&path)?;
            if heat.grid() != grid {
                return Err(config_err(
                    "forcing.path",
                    format!("{} does not match the run grid", path.display()),
                ));
            }
            Forcing { heat, moisture }
        }
    };
    if let ParamSpec::Physical {
        params: physical,
        humidity_scaling,
    } = &config.param_spec
    {
        let q_scale = heat_source_scale(physical).map_err(ConfigError::from)?;
        let g_scale =
            humidity_source_scale(physical, *humidity_scaling).map_err(ConfigError::from)?;
        forcing.heat.scale(q_scale);
        forcing.moisture.scale(g_scale);
    }

    Ok(Prepared {
        grid,
        params,
        state,
        forcing,
    })
}

fn manifest_text(config: &RunConfig, prepared: &Prepared, threads: usize) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "atmocirc {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "threads = {threads}");
    let d = prepared.params;
    let _ = writeln!(
        m,
        "derived: Pr = {}, Le = {}, R = {}, R_tilde = {}, sigma0p = {}, sigma1p = {}, omega = {}",
        d.pr, d.le, d.r, d.r_tilde, d.sigma0p, d.sigma1p, d.omega
    );
    let _ = writeln!(
        m,
        "grid: {} x {} nodes, dx1 = {}, dx2 = {}",
        prepared.grid.n1(),
        prepared.grid.n2(),
        prepared.grid.dx1(),
        prepared.grid.dx2()
    );
    let steps = (config.step.t_end / config.step.dt).round() as u64;
    let _ = writeln!(
        m,
        "steps = {steps}, snapshot every {} steps",
        config.step.snapshot_interval
    );
    let _ = writeln!(m, "seed = {}", config.seed);
    m.push_str("\n# configuration echo\n");
    m.push_str(&config.render());
    m
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: u64,
    pub snapshots: u64,
    pub cfl_violations: u64,
    pub out_dir: PathBuf,
}

/// Parse ATMOCIRC_THREADS (the cap on internal parallelism). The compute
/// kernels are single-threaded, so any cap ≥ 1 is honored trivially; the
/// value is validated and echoed to the manifest.
pub fn thread_cap() -> Result<usize, RunError> {
    match std::env::var("ATMOCIRC_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(config_err(
                "ATMOCIRC_THREADS",
                format!("must be a positive integer, got `{v}`"),
            )),
        },
    }
}

/// Run a configuration end to end, writing `manifest.txt`, periodic
/// `snap_XXXXXX.csv` files and `diagnostics.csv` into the output directory.
pub fn run(
    config: &RunConfig,
    base_dir: &Path,
    out_override: Option<&Path>,
) -> Result<RunSummary, RunError> {
    let threads = thread_cap()?;
    let out_dir = out_override
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.as_ref().map(|p| resolve(base_dir, p)))
        .ok_or_else(|| {
            config_err(
                "output.dir",
                "no output directory: set [output] dir or pass --out",
            )
        })?;
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        RunError::Output(OutputError::Io {
            path: out_dir.clone(),
            source: e,
        })
    })?;
    let _lock = DirLock::acquire(&out_dir)?;

    let prepared = prepare(config, base_dir)?;
    output::write_manifest(
        &out_dir.join("manifest.txt"),
        &manifest_text(config, &prepared, threads),
    )?;

    let bank = standard_bank(prepared.grid);
    let names: Vec<String> = bank.iter().map(|v| v.name.clone()).collect();
    let mut diag_writer = DiagnosticsWriter::create(&out_dir.join("diagnostics.csv"), &names)?;
    let mut diag = TrajectoryDiagnostics::new(bank, prepared.forcing.clone(), prepared.params);

    let mut state = prepared.state;
    let mut stepper = Stepper::with_forcing(
        prepared.grid,
        prepared.params,
        config.step,
        prepared.forcing.clone(),
    )
    .map_err(|e| RunError::Step(e.to_string()))?;

    let total_steps = (config.step.t_end / config.step.dt).round() as u64;
    let interval = config.step.snapshot_interval as u64;

    output::write_snapshot(&out_dir.join(output::snapshot_name(0)), &state)?;
    diag_writer.append(&diag.observe(&state))?;
    let mut snapshots = 1u64;
    let mut cfl_violations = 0u64;

    for step in 1..=total_steps {
        match stepper.advance(&mut state) {
            Ok(info) => {
                if info.cfl_exceeded {
                    cfl_violations += 1;
                    if cfl_violations == 1 {
                        eprintln!(
                            "warning: advective CFL {:.3} exceeded {CFL_LIMIT} at step {step} (t = {})",
                            info.cfl, state.time
                        );
                    }
                }
            }
            Err(StepError::NonFinite { field, time, step }) => {
                diag_writer.flush()?;
                let dump = format!(
                    "non-finite {field} detected\nstep = {step}\ntime = {time}\n\
                     the last written snapshot and diagnostics rows are valid\n"
                );
                output::write_manifest(&out_dir.join("nan_dump.txt"), &dump)?;
                return Err(RunError::NanAbort {
                    field,
                    time,
                    step,
                    dir: out_dir,
                });
            }
            Err(other) => {
                diag_writer.flush()?;
                return Err(RunError::Step(other.to_string()));
            }
        }
        if step.is_multiple_of(interval) || step == total_steps {
            output::write_snapshot(&out_dir.join(output::snapshot_name(step)), &state)?;
            diag_writer.append(&diag.observe(&state))?;
            snapshots += 1;
        }
    }
    diag_writer.flush()?;
    if cfl_violations > 0 {
        eprintln!("warning: {cfl_violations} steps exceeded the advective CFL limit");
    }
    Ok(RunSummary {
        steps: total_steps,
        snapshots,
        cfl_violations,
        out_dir,
    })
}

/// Outcome of re-checking a finished run directory.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub snapshots: usize,
    pub passed: bool,
    pub lines: Vec<String>,
}

impl CheckReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

/// Reload the snapshots of an existing output directory and re-run the
/// trajectory diagnostics on them: constraint levels, energy-cancellation
/// terms, the growth inequality and the weak residuals.
pub fn check_trajectory(config: &RunConfig, dir: &Path, base_dir: &Path) -> Result<CheckReport, RunError> {
    let prepared = prepare(config, base_dir)?;
    let snaps = output::list_snapshots(dir)?;
    if snaps.is_empty() {
        return Err(config_err(
            "check-trajectory",
            format!("no snapshots found in {}", dir.display()),
        ));
    }
    let mut traj = Trajectory::default();
    for (step, path) in &snaps {
        let mut s = output::read_snapshot(path)?;
        if s.grid() != prepared.grid {
            return Err(config_err(
                "check-trajectory",
                format!("{} does not match the configured grid", path.display()),
            ));
        }
        s.time = *step as f64 * config.step.dt;
        traj.push(s);
    }

    let mut lines = Vec::new();
    let mut passed = true;
    let mut check = |label: String, ok: bool, lines: &mut Vec<String>| {
        if !ok {
            passed = false;
        }
        lines.push(format!("{} {}", if ok { "ok  " } else { "FAIL" }, label));
    };

    let mut records: Vec<DiagnosticsRecord> = Vec::with_capacity(traj.len());
    let bank = standard_bank(prepared.grid);
    let mut stream =
        TrajectoryDiagnostics::new(bank.clone(), prepared.forcing.clone(), prepared.params);
    for s in &traj.states {
        records.push(stream.observe(s));
    }

    let worst_div = records
        .iter()
        .map(|r| r.divergence_inf)
        .fold(0.0f64, f64::max);
    check(
        format!("divergence_inf <= 1e-8 (worst {worst_div:.3e})"),
        worst_div <= 1e-8,
        &mut lines,
    );

    let mut walls_zero = true;
    for s in &traj.states {
        for f in s.components() {
            let g = f.grid();
            for i in 0..g.n1() {
                if f.get(i, 0) != 0.0 || f.get(i, g.n2() - 1) != 0.0 {
                    walls_zero = false;
                }
            }
        }
    }
    check("Dirichlet wall rows exactly zero".into(), walls_zero, &mut lines);

    let mut worst_cancel = 0.0f64;
    for r in &records {
        let scale = 1.0 + r.energy + r.dissipation;
        worst_cancel = worst_cancel
            .max((r.budget.advection_total.abs() + r.budget.pressure_work.abs()) / scale);
    }
    check(
        format!("advection/pressure cancellation <= 1e-8 (worst {worst_cancel:.3e})"),
        worst_cancel <= 1e-8,
        &mut lines,
    );

    let a1_ok = records.iter().all(|r| r.a1.satisfied);
    let worst_margin = records
        .iter()
        .map(|r| r.a1.margin)
        .fold(f64::INFINITY, f64::min);
    check(
        format!("growth inequality satisfied at every snapshot (min margin {worst_margin:.3e})"),
        a1_ok,
        &mut lines,
    );

    let mut worst_residual = 0.0f64;
    for (idx, v) in bank.iter().enumerate() {
        let _ = idx;
        let r = diagnostics::weak_residual(&traj, v, &prepared.forcing, &prepared.params)
            .map_err(|e| config_err("check-trajectory", e.to_string()))?;
        let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst_residual = worst_residual.max(worst);
    }
    check(
        format!("weak residuals finite (max |r| = {worst_residual:.3e})"),
        worst_residual.is_finite(),
        &mut lines,
    );

    Ok(CheckReport {
        snapshots: traj.len(),
        passed,
        lines,
    })
}

/// Text report for the `nondim` subcommand; requires a physical block.
pub fn nondim_report(config: &RunConfig) -> Result<String, RunError> {
    match &config.param_spec {
        ParamSpec::Dimensionless(_) => Err(config_err(
            "nondim",
            "configuration already carries a [dimensionless] block",
        )),
        ParamSpec::Physical { .. } => {
            let d = config.dimensionless()?;
            let mut out = String::new();
            let _ = writeln!(out, "Pr      = {}", d.pr);
            let _ = writeln!(out, "Le      = {}", d.le);
            let _ = writeln!(out, "R       = {}", d.r);
            let _ = writeln!(out, "R_tilde = {}", d.r_tilde);
            let _ = writeln!(out, "sigma0p = {}", d.sigma0p);
            let _ = writeln!(out, "sigma1p = {}", d.sigma1p);
            let _ = writeln!(out, "omega   = {}", d.omega);
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn heat_decay_config(dir: &Path) -> RunConfig {
        let text = format!(
            "\
[dimensionless]
Pr = 1
Le = 1

[grid]
n1 = 8
n2 = 17

[stepping]
dt = 1e-3
t_end = 0.02
snapshot_interval = 5

[initial]
kind = single_mode
kx = 0
m = 1
amp_T = 1.0

[output]
dir = {}
seed = 1
",
            dir.display()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn zero_run_produces_zero_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("zero");
        let text = format!(
            "\
[dimensionless]
Pr = 1
Le = 1

[grid]
n1 = 8
n2 = 9

[stepping]
dt = 1e-3
t_end = 0.01
snapshot_interval = 2

[output]
dir = {}
",
            out.display()
        );
        let config = parse_config(&text).unwrap();
        let summary = run(&config, tmp.path(), None).unwrap();
        assert_eq!(summary.steps, 10);
        assert!(out.join("manifest.txt").exists());
        assert!(out.join("diagnostics.csv").exists());
        let snaps = output::list_snapshots(&out).unwrap();
        assert_eq!(snaps.len(), 6); // steps 0,2,4,6,8,10
        for (_, path) in &snaps {
            let s = output::read_snapshot(path).unwrap();
            assert_eq!(s.temperature.max_abs(), 0.0);
            assert_eq!(s.u1.max_abs(), 0.0);
        }
        // lock released after the run
        assert!(!out.join("LOCK").exists());
    }

    #[test]
    fn run_then_check_trajectory_passes() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("decay");
        let config = heat_decay_config(&out);
        run(&config, tmp.path(), None).unwrap();
        let report = check_trajectory(&config, &out, tmp.path()).unwrap();
        assert!(report.passed, "{}", report.render());
        assert_eq!(report.snapshots, 5);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let out_a = tmp.path().join("a");
        let out_b = tmp.path().join("b");
        let config = heat_decay_config(&out_a);
        run(&config, tmp.path(), None).unwrap();
        run(&config, tmp.path(), Some(&out_b)).unwrap();
        for name in ["snap_000000.csv", "snap_000020.csv", "diagnostics.csv"] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn missing_output_dir_is_a_config_error() {
        let text = "\
[dimensionless]
Pr = 1
Le = 1

[grid]
n1 = 8
n2 = 9

[stepping]
dt = 1e-3
t_end = 0.01
";
        let config = parse_config(text).unwrap();
        let err = run(&config, Path::new("."), None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn nan_abort_reports_exit_code_two_and_flushes() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("blowup");
        let text = format!(
            "\
[dimensionless]
Pr = 1
Le = 1
R = 1e9

[grid]
n1 = 8
n2 = 9

[stepping]
dt = 5.0
t_end = 100.0
snapshot_interval = 1

[initial]
kind = single_mode
kx = 1
m = 1
amp_T = 1.0

[output]
dir = {}
",
            out.display()
        );
        let config = parse_config(&text).unwrap();
        let err = run(&config, tmp.path(), None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(out.join("nan_dump.txt").exists());
        assert!(out.join("diagnostics.csv").exists());
        assert!(!out.join("LOCK").exists(), "lock must be released on abort");
    }

    #[test]
    fn file_initial_condition_round_trips_through_prepare() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("first");
        let config = heat_decay_config(&out);
        run(&config, tmp.path(), None).unwrap();

        let restart_text = format!(
            "\
[dimensionless]
Pr = 1
Le = 1

[grid]
n1 = 8
n2 = 17

[stepping]
dt = 1e-3
t_end = 0.01

[initial]
kind = file
path = {}
",
            out.join("snap_000020.csv").display()
        );
        let restart = parse_config(&restart_text).unwrap();
        let prepared = prepare(&restart, tmp.path()).unwrap();
        let original = output::read_snapshot(&out.join("snap_000020.csv")).unwrap();
        assert_eq!(
            prepared.state.temperature.values(),
            original.temperature.values()
        );
    }

    #[test]
    fn file_initial_condition_grid_mismatch_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("first");
        let config = heat_decay_config(&out);
        run(&config, tmp.path(), None).unwrap();
        let restart_text = format!(
            "\
[dimensionless]
Pr = 1
Le = 1

[grid]
n1 = 16
n2 = 17

[stepping]
dt = 1e-3
t_end = 0.01

[initial]
kind = file
path = {}
",
            out.join("snap_000000.csv").display()
        );
        let restart = parse_config(&restart_text).unwrap();
        assert!(prepare(&restart, tmp.path()).is_err());
    }

    #[test]
    fn physical_forcing_is_scaled_at_load() {
        // h = 2, κ_T = 0.5, ΔT = 4 → Q scale = 4/(4·0.5) = 2.
        let text = "\
[physical]
nu = 0.5
kappa_T = 0.5
kappa_q = 0.5
alpha_T = 1e-3
alpha_q = 0
g = 10
h = 2
T_bottom = 294
T_top = 290
q_bottom = 0.5
q_top = 0.25

[grid]
n1 = 8
n2 = 9

[stepping]
dt = 1e-4
t_end = 0.001

[forcing]
kind = constant
Q0 = 1.0
G0 = 1.0
";
        let config = parse_config(text).unwrap();
        let prepared = prepare(&config, Path::new(".")).unwrap();
        assert!((prepared.forcing.heat.get(3, 3) - 2.0).abs() < 1e-12);
        assert!((prepared.forcing.moisture.get(3, 3) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nondim_subcommand_requires_physical_block() {
        let tmp = tempfile::tempdir().unwrap();
        let config = heat_decay_config(&tmp.path().join("x"));
        assert!(nondim_report(&config).is_err());
    }
}
