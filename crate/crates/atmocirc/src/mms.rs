//! Manufactured-solution convergence harness.
//!
//! The manufactured fields are built from the streamfunction
//! ψ = sin(x₁)sin²(πx₂)cos(t), so the velocity is analytically solenoidal
//! and every field satisfies the wall and periodicity conditions:
//!
//! ```text
//! u₁ = π sin(x₁) sin(2πx₂) cos(t)      u₂ = −cos(x₁) sin²(πx₂) cos(t)
//! T  = sin(x₁) sin(πx₂) cos(t)         q  = cos(x₁) sin(πx₂) cos(t)
//! ```
//!
//! with the manufactured pressure identically zero. Substituting these into
//! the governing equations yields exact residual forcings for each equation;
//! the momentum residuals go into an auxiliary momentum source that exists
//! only here. Spatial orders are fitted against the analytic fields on a
//! grid ladder with dt ∝ dx₂² (temporal error subdominant); temporal orders
//! are fitted on a fixed grid against a small-dt reference run of the same
//! discretization, which isolates the time integrator from the spatial
//! truncation floor.

use crate::fields::{Grid, ScalarField, State};
use crate::params::DimensionlessParams;
use crate::pressure;
use crate::stepper::{SourceTerms, StepConfig, Stepper, Tendency};
use std::f64::consts::PI;
use std::fmt;

/// The analytic fields and every partial the residual forcings need.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedSolution {
    pub amplitude: f64,
}

impl ManufacturedSolution {
    pub fn new(amplitude: f64) -> Self {
        ManufacturedSolution { amplitude }
    }

    pub fn u1(&self, x1: f64, x2: f64, t: f64) -> f64 {
        self.amplitude * PI * x1.sin() * (2.0 * PI * x2).sin() * t.cos()
    }

    pub fn u2(&self, x1: f64, x2: f64, t: f64) -> f64 {
        -self.amplitude * x1.cos() * (PI * x2).sin().powi(2) * t.cos()
    }

    pub fn temperature(&self, x1: f64, x2: f64, t: f64) -> f64 {
        self.amplitude * x1.sin() * (PI * x2).sin() * t.cos()
    }

    pub fn humidity(&self, x1: f64, x2: f64, t: f64) -> f64 {
        self.amplitude * x1.cos() * (PI * x2).sin() * t.cos()
    }

    /// Momentum residual (F₁, F₂): what must be added to the horizontal and
    /// vertical momentum equations for the manufactured fields to solve them
    /// (with the symmetric friction/rotation matrix and zero pressure).
    pub fn momentum_source(
        &self,
        p: &DimensionlessParams,
        x1: f64,
        x2: f64,
        t: f64,
    ) -> (f64, f64) {
        let a = self.amplitude;
        let (s1, c1) = x1.sin_cos();
        let sp = (PI * x2).sin();
        let s2p = (2.0 * PI * x2).sin();
        let c2p = (2.0 * PI * x2).cos();
        let (st, ct) = t.sin_cos();

        let u1 = a * PI * s1 * s2p * ct;
        let u2 = -a * c1 * sp * sp * ct;
        let temp = a * s1 * sp * ct;
        let hum = a * c1 * sp * ct;

        let du1_dt = -a * PI * s1 * s2p * st;
        let du2_dt = a * c1 * sp * sp * st;

        let d1u1 = a * PI * c1 * s2p * ct;
        let d2u1 = 2.0 * a * PI * PI * s1 * c2p * ct;
        let d1u2 = a * s1 * sp * sp * ct;
        let d2u2 = -a * PI * c1 * s2p * ct;

        let lap_u1 = -(1.0 + 4.0 * PI * PI) * u1;
        let lap_u2 = -u2 - 2.0 * a * PI * PI * c1 * c2p * ct;

        let adv_u1 = u1 * d1u1 + u2 * d2u1;
        let adv_u2 = u1 * d1u2 + u2 * d2u2;

        let f1 = du1_dt + adv_u1 - p.pr * lap_u1 + p.pr * (p.sigma0p * u1 + p.omega * u2);
        let f2 = du2_dt + adv_u2 - p.pr * lap_u2
            + p.pr * (p.omega * u1 + p.sigma1p * u2)
            - p.pr * (p.r * temp - p.r_tilde * hum);
        (f1, f2)
    }

    /// Heat-equation residual Q.
    pub fn heat_source(&self, _p: &DimensionlessParams, x1: f64, x2: f64, t: f64) -> f64 {
        let a = self.amplitude;
        let (s1, c1) = x1.sin_cos();
        let sp = (PI * x2).sin();
        let cp = (PI * x2).cos();
        let s2p = (2.0 * PI * x2).sin();
        let (st, ct) = t.sin_cos();

        let u1 = a * PI * s1 * s2p * ct;
        let u2 = -a * c1 * sp * sp * ct;
        let temp = a * s1 * sp * ct;

        let dt_dt = -a * s1 * sp * st;
        let d1t = a * c1 * sp * ct;
        let d2t = a * PI * s1 * cp * ct;
        let lap_t = -(1.0 + PI * PI) * temp;

        dt_dt + u1 * d1t + u2 * d2t - lap_t - u2
    }

    /// Humidity-equation residual G.
    pub fn moisture_source(&self, p: &DimensionlessParams, x1: f64, x2: f64, t: f64) -> f64 {
        let a = self.amplitude;
        let (s1, c1) = x1.sin_cos();
        let sp = (PI * x2).sin();
        let cp = (PI * x2).cos();
        let s2p = (2.0 * PI * x2).sin();
        let (st, ct) = t.sin_cos();

        let u1 = a * PI * s1 * s2p * ct;
        let u2 = -a * c1 * sp * sp * ct;
        let hum = a * c1 * sp * ct;

        let dq_dt = -a * c1 * sp * st;
        let d1q = -a * s1 * sp * ct;
        let d2q = a * PI * c1 * cp * ct;
        let lap_q = -(1.0 + PI * PI) * hum;

        dq_dt + u1 * d1q + u2 * d2q - p.le * lap_q - u2
    }

    /// Sample the manufactured state at time t (pressure zero), projected
    /// onto the discretely divergence-free subspace so it satisfies the
    /// solver's state invariants.
    pub fn sample_state(&self, grid: Grid, t: f64) -> State {
        let mut s = State::zeros(grid);
        s.u1 = ScalarField::from_fn(grid, true, |x1, x2| self.u1(x1, x2, t));
        s.u2 = ScalarField::from_fn(grid, true, |x1, x2| self.u2(x1, x2, t));
        s.temperature = ScalarField::from_fn(grid, true, |x1, x2| self.temperature(x1, x2, t));
        s.humidity = ScalarField::from_fn(grid, true, |x1, x2| self.humidity(x1, x2, t));
        s.time = t;
        let proj = pressure::project(&s.u1, &s.u2, 1.0, 1.0).expect("projection of smooth sample");
        s.u1 = proj.u1;
        s.u2 = proj.u2;
        s
    }
}

/// Time-dependent sources driving the stepper toward the manufactured
/// trajectory.
pub struct MmsSources {
    pub solution: ManufacturedSolution,
    pub params: DimensionlessParams,
}

impl SourceTerms for MmsSources {
    fn accumulate(&self, t: f64, tendency: &mut Tendency) {
        let grid = tendency.u1.grid();
        for j in 0..grid.n2() {
            for i in 0..grid.n1() {
                let (x1, x2) = (grid.x1(i), grid.x2(j));
                let (f1, f2) = self.solution.momentum_source(&self.params, x1, x2, t);
                let node = grid.idx(i, j);
                tendency.u1.values_mut()[node] += f1;
                tendency.u2.values_mut()[node] += f2;
                tendency.temperature.values_mut()[node] +=
                    self.solution.heat_source(&self.params, x1, x2, t);
                tendency.humidity.values_mut()[node] +=
                    self.solution.moisture_source(&self.params, x1, x2, t);
            }
        }
    }
}

/// Per-field quadruple: L² errors of the prognostic fields, also reused to
/// hold fitted orders.
#[derive(Debug, Clone, Copy)]
pub struct FieldQuad {
    pub u1: f64,
    pub u2: f64,
    pub temperature: f64,
    pub humidity: f64,
}

impl FieldQuad {
    pub fn min(&self) -> f64 {
        self.u1.min(self.u2).min(self.temperature).min(self.humidity)
    }
}

impl fmt::Display for FieldQuad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "u1 {:9.3e}  u2 {:9.3e}  T {:9.3e}  q {:9.3e}",
            self.u1, self.u2, self.temperature, self.humidity
        )
    }
}

#[derive(Debug, Clone)]
pub struct SpatialLevel {
    pub n1: usize,
    pub n2: usize,
    pub dt: f64,
    pub errors: FieldQuad,
}

#[derive(Debug, Clone)]
pub struct TemporalLevel {
    pub dt: f64,
    pub errors: FieldQuad,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub spatial: Vec<SpatialLevel>,
    pub spatial_orders: FieldQuad,
    pub temporal: Vec<TemporalLevel>,
    pub temporal_orders: FieldQuad,
}

impl ConvergenceReport {
    pub fn min_order(&self) -> f64 {
        self.spatial_orders.min().min(self.temporal_orders.min())
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.min_order() >= threshold
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "spatial study (L2 errors vs analytic fields):")?;
        for level in &self.spatial {
            writeln!(
                f,
                "  {:>3}x{:<3} dt={:.3e}  {}",
                level.n1, level.n2, level.dt, level.errors
            )?;
        }
        writeln!(f, "  fitted spatial orders:  {}", self.spatial_orders)?;
        writeln!(f, "temporal study (L2 errors vs reference run):")?;
        for level in &self.temporal {
            writeln!(f, "  dt={:.3e}  {}", level.dt, level.errors)?;
        }
        writeln!(f, "  fitted temporal orders: {}", self.temporal_orders)?;
        Ok(())
    }
}

/// Harness configuration; the defaults are the grid/dt ladders used by the
/// acceptance suite.
#[derive(Debug, Clone)]
pub struct MmsConfig {
    pub grids: Vec<(usize, usize)>,
    pub t_end: f64,
    /// dt = dt_factor · dx₂² in the spatial study.
    pub dt_factor: f64,
    pub temporal_grid: (usize, usize),
    pub temporal_dts: Vec<f64>,
    pub temporal_ref_dt: f64,
    pub amplitude: f64,
    pub params: DimensionlessParams,
}

impl Default for MmsConfig {
    fn default() -> Self {
        MmsConfig {
            grids: vec![(16, 17), (32, 33), (64, 65)],
            t_end: 0.25,
            dt_factor: 0.5,
            temporal_grid: (32, 33),
            temporal_dts: vec![4e-3, 2e-3, 1e-3],
            temporal_ref_dt: 1.25e-4,
            amplitude: 1.0,
            params: DimensionlessParams {
                pr: 0.7,
                le: 1.3,
                r: 1.0,
                r_tilde: 1.0,
                sigma0p: 0.3,
                sigma1p: 0.2,
                omega: 0.1,
            },
        }
    }
}

fn l2_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    let mut diff = a.clone();
    diff.axpy(-1.0, b).expect("same grid");
    diff.inner(&diff).expect("same grid").sqrt()
}

fn state_errors(state: &State, exact: &State) -> FieldQuad {
    FieldQuad {
        u1: l2_diff(&state.u1, &exact.u1),
        u2: l2_diff(&state.u2, &exact.u2),
        temperature: l2_diff(&state.temperature, &exact.temperature),
        humidity: l2_diff(&state.humidity, &exact.humidity),
    }
}

/// Least-squares slope of ln(err) against ln(scale).
fn fit_order(scales: &[f64], errors: &[f64]) -> f64 {
    let n = scales.len() as f64;
    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn fit_orders(scales: &[f64], errs: &[FieldQuad]) -> FieldQuad {
    let per = |pick: fn(&FieldQuad) -> f64| {
        let es: Vec<f64> = errs.iter().map(pick).collect();
        fit_order(scales, &es)
    };
    FieldQuad {
        u1: per(|e| e.u1),
        u2: per(|e| e.u2),
        temperature: per(|e| e.temperature),
        humidity: per(|e| e.humidity),
    }
}

fn run_to(grid: Grid, dt: f64, t_end: f64, template: &StepConfig, mms: &MmsConfig) -> State {
    let steps = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let cfg = StepConfig {
        dt,
        t_end,
        ..*template
    };
    let solution = ManufacturedSolution::new(mms.amplitude);
    let sources = MmsSources {
        solution,
        params: mms.params,
    };
    let mut stepper =
        Stepper::new(grid, mms.params, cfg, Box::new(sources)).expect("valid harness config");
    let mut state = solution.sample_state(grid, 0.0);
    for _ in 0..steps {
        stepper
            .advance(&mut state)
            .expect("manufactured run stays finite");
    }
    state
}

/// Run the spatial and temporal ladders and fit convergence orders.
pub fn verify_mms(mms: &MmsConfig) -> ConvergenceReport {
    let template = StepConfig::default();
    let solution = ManufacturedSolution::new(mms.amplitude);

    let mut spatial = Vec::new();
    let mut spatial_scales = Vec::new();
    let mut spatial_errs = Vec::new();
    for &(n1, n2) in &mms.grids {
        let grid = Grid::new(n1, n2).expect("harness grid");
        let dx2 = grid.dx2();
        let dt = mms.dt_factor * dx2 * dx2;
        let state = run_to(grid, dt, mms.t_end, &template, mms);
        let exact = solution.sample_state(grid, state.time);
        let errors = state_errors(&state, &exact);
        spatial.push(SpatialLevel { n1, n2, dt, errors });
        spatial_scales.push(dx2);
        spatial_errs.push(errors);
    }
    let spatial_orders = fit_orders(&spatial_scales, &spatial_errs);

    let (tn1, tn2) = mms.temporal_grid;
    let tgrid = Grid::new(tn1, tn2).expect("harness grid");
    let reference = run_to(tgrid, mms.temporal_ref_dt, mms.t_end, &template, mms);
    let mut temporal = Vec::new();
    let mut temporal_errs = Vec::new();
    for &dt in &mms.temporal_dts {
        let state = run_to(tgrid, dt, mms.t_end, &template, mms);
        let errors = state_errors(&state, &reference);
        temporal.push(TemporalLevel { dt, errors });
        temporal_errs.push(errors);
    }
    let temporal_orders = fit_orders(&mms.temporal_dts, &temporal_errs);

    ConvergenceReport {
        spatial,
        spatial_orders,
        temporal,
        temporal_orders,
    }
}
