//! IMEX time integration of the coupled system.
//!
//! Per step: (i) the advection, friction/rotation, buoyancy and source terms
//! are advanced explicitly (second-order Adams–Bashforth after a forward
//! Euler startup step); (ii) diffusion is advanced implicitly per field with
//! θ = ½ (Crank–Nicolson) or θ = 1 (backward Euler), each Fourier mode in x₁
//! reducing to a tridiagonal solve in x₂ with the Dirichlet wall rows pinned;
//! (iii) the velocity is projected back onto the discretely divergence-free
//! subspace, carrying the pressure incrementally (the predictor sees the old
//! pressure gradient, the projection adds its increment).
//!
//! The friction/rotation coupling and the vertical-velocity sources in the
//! temperature and humidity equations stay explicit: folding the 2×2 and
//! cross-field couplings into the implicit solve would break the per-field
//! tridiagonal structure, and those coefficients are O(1) under the
//! advective CFL limit anyway. The CFL number is monitored and reported, not
//! enforced.

use crate::fft;
use crate::fields::{Grid, ScalarField, State};
use crate::operators::{self, OperatorConfig};
use crate::params::DimensionlessParams;
use crate::pressure::{self, PressureError};
use rustfft::num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("invalid step configuration: {0}")]
    InvalidConfig(String),
    #[error("implicit or projection solve broke down: {0}")]
    SolverBreakdown(#[from] PressureError),
    #[error("non-finite value in {field} at t = {time} after step {step}")]
    NonFinite {
        field: &'static str,
        time: f64,
        step: u64,
    },
}

/// Implicit treatment of the diffusion terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionScheme {
    BackwardEuler,
    #[default]
    CrankNicolson,
}

impl DiffusionScheme {
    fn theta(self) -> f64 {
        match self {
            DiffusionScheme::BackwardEuler => 1.0,
            DiffusionScheme::CrankNicolson => 0.5,
        }
    }
}

/// Explicit scheme for advection and coupling terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExplicitScheme {
    Euler,
    #[default]
    Ab2,
}

/// Sign convention of the off-diagonal (rotation) entries in the
/// friction/rotation matrix. `Paper` is the symmetric matrix
/// [[σ₀′, ω], [ω, σ₁′]]; `Antisymmetric` flips the sign of the ω term in the
/// vertical momentum equation, which is the usual Coriolis structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoriolisSign {
    #[default]
    Paper,
    Antisymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    pub diffusion_scheme: DiffusionScheme,
    pub explicit_scheme: ExplicitScheme,
    /// Steps between snapshots/diagnostics records in driver loops.
    pub snapshot_interval: usize,
    pub coriolis_sign: CoriolisSign,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt: 1e-3,
            t_end: 1.0,
            diffusion_scheme: DiffusionScheme::default(),
            explicit_scheme: ExplicitScheme::default(),
            snapshot_interval: 10,
            coriolis_sign: CoriolisSign::default(),
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(StepError::InvalidConfig(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if !self.t_end.is_finite() || self.t_end < 0.0 {
            return Err(StepError::InvalidConfig(format!(
                "t_end must be nonnegative and finite, got {}",
                self.t_end
            )));
        }
        if self.snapshot_interval == 0 {
            return Err(StepError::InvalidConfig(
                "snapshot_interval must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Time-independent heat and moisture sources (the Q and G fields).
#[derive(Debug, Clone)]
pub struct Forcing {
    pub heat: ScalarField,
    pub moisture: ScalarField,
}

impl Forcing {
    pub fn zero(grid: Grid) -> Self {
        Forcing {
            heat: ScalarField::zeros(grid, false),
            moisture: ScalarField::zeros(grid, false),
        }
    }

    pub fn constant(grid: Grid, q0: f64, g0: f64) -> Self {
        Forcing {
            heat: ScalarField::from_fn(grid, false, |_, _| q0),
            moisture: ScalarField::from_fn(grid, false, |_, _| g0),
        }
    }
}

/// Explicit tendencies for the four prognostic fields.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub temperature: ScalarField,
    pub humidity: ScalarField,
}

impl Tendency {
    pub fn zeros(grid: Grid) -> Self {
        Tendency {
            u1: ScalarField::zeros(grid, false),
            u2: ScalarField::zeros(grid, false),
            temperature: ScalarField::zeros(grid, false),
            humidity: ScalarField::zeros(grid, false),
        }
    }
}

/// Source terms evaluated at a given time and accumulated into the explicit
/// tendency. The static [`Forcing`] ignores the time argument; verification
/// harnesses provide time-dependent sources, including the auxiliary
/// momentum source that only they need.
pub trait SourceTerms {
    fn accumulate(&self, t: f64, tendency: &mut Tendency);
}

impl SourceTerms for Forcing {
    fn accumulate(&self, _t: f64, tendency: &mut Tendency) {
        tendency
            .temperature
            .axpy(1.0, &self.heat)
            .expect("forcing grid matches state grid");
        tendency
            .humidity
            .axpy(1.0, &self.moisture)
            .expect("forcing grid matches state grid");
    }
}

/// The explicit right-hand side, excluding diffusion (implicit) and pressure
/// (projection): advection of every field in skew form, friction/rotation on
/// the velocity, buoyancy Pr(R·T − R̃·q) on the vertical component only, and
/// the background-gradient source u₂ in the temperature and humidity
/// equations. Sources Q and G are *not* included here; see [`rhs_explicit`].
pub fn explicit_tendency(
    state: &State,
    params: &DimensionlessParams,
    op_cfg: &OperatorConfig,
    coriolis: CoriolisSign,
) -> Tendency {
    let grid = state.grid();
    let u1 = &state.u1;
    let u2 = &state.u2;
    let pr = params.pr;
    let omega_lower = match coriolis {
        CoriolisSign::Paper => params.omega,
        CoriolisSign::Antisymmetric => -params.omega,
    };

    let mut out = Tendency::zeros(grid);
    for (target, field) in [
        (&mut out.u1, u1),
        (&mut out.u2, u2),
        (&mut out.temperature, &state.temperature),
        (&mut out.humidity, &state.humidity),
    ] {
        let adv = operators::advect(op_cfg, u1, u2, field);
        target.axpy(-1.0, &adv).expect("same grid");
    }

    let n = grid.len();
    for node in 0..n {
        let v1 = u1.values()[node];
        let v2 = u2.values()[node];
        let t = state.temperature.values()[node];
        let q = state.humidity.values()[node];
        out.u1.values_mut()[node] -= pr * (params.sigma0p * v1 + params.omega * v2);
        out.u2.values_mut()[node] -=
            pr * (omega_lower * v1 + params.sigma1p * v2) - pr * (params.r * t - params.r_tilde * q);
        out.temperature.values_mut()[node] += v2;
        out.humidity.values_mut()[node] += v2;
    }
    out
}

/// Explicit tendencies including the static sources Q and G.
pub fn rhs_explicit(state: &State, forcing: &Forcing, params: &DimensionlessParams) -> Tendency {
    let mut tend = explicit_tendency(
        state,
        params,
        &OperatorConfig::default(),
        CoriolisSign::default(),
    );
    forcing.accumulate(state.time, &mut tend);
    tend
}

/// Advective CFL number dt·max(|u₁|/dx₁ + |u₂|/dx₂). Values above 0.5 are
/// flagged by the stepper.
pub fn cfl_number(state: &State, dt: f64) -> f64 {
    let grid = state.grid();
    let mut worst: f64 = 0.0;
    for (v1, v2) in state.u1.values().iter().zip(state.u2.values()) {
        worst = worst.max(v1.abs() / grid.dx1() + v2.abs() / grid.dx2());
    }
    dt * worst
}

/// Per-step report: monitoring only, never an abort condition.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub cfl: f64,
    pub cfl_exceeded: bool,
}

pub const CFL_LIMIT: f64 = 0.5;

/// Solve (I − α(∂₁₁ + ∂₂₂))f = rhs with Dirichlet walls, per Fourier mode.
/// The x₁ symbol matches the operators-module convention (sawtooth mode
/// projected out). α ≥ 0 keeps every tridiagonal system strictly diagonally
/// dominant, so the solve cannot break down for a positive time step.
fn solve_helmholtz(rhs: &ScalarField, alpha: f64) -> Result<ScalarField, StepError> {
    debug_assert!(alpha >= 0.0);
    let grid = rhs.grid();
    let n1 = grid.n1();
    let n2 = grid.n2();
    let h2 = grid.dx2() * grid.dx2();
    let mut spec = fft::forward_rows(rhs.values(), n1);

    let mut diag = vec![0.0; n2];
    let mut lower = vec![0.0; n2];
    let mut upper = vec![0.0; n2];
    let mut re = vec![0.0; n2];
    let mut im = vec![0.0; n2];
    for k in 0..=n1 / 2 {
        let k_sq = -fft::d2_symbol(k, n1);
        for j in 0..n2 {
            if j == 0 || j == n2 - 1 {
                lower[j] = 0.0;
                diag[j] = 1.0;
                upper[j] = 0.0;
            } else {
                lower[j] = -alpha / h2;
                diag[j] = 1.0 + alpha * k_sq + 2.0 * alpha / h2;
                upper[j] = -alpha / h2;
            }
        }
        for j in 0..n2 {
            let c = spec[j * n1 + k];
            re[j] = c.re;
            im[j] = c.im;
        }
        re[0] = 0.0;
        re[n2 - 1] = 0.0;
        im[0] = 0.0;
        im[n2 - 1] = 0.0;
        tridiagonal(&lower, &diag, &upper, &mut re)?;
        tridiagonal(&lower, &diag, &upper, &mut im)?;
        for j in 0..n2 {
            spec[j * n1 + k] = Complex64::new(re[j], im[j]);
        }
    }
    fft::enforce_real_symmetry(&mut spec, n1);
    let mut out = ScalarField::from_values(grid, false, fft::inverse_rows(spec, n1))
        .expect("solver buffer matches grid");
    out.zero_walls();
    Ok(out)
}

fn tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
) -> Result<(), StepError> {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() < f64::MIN_POSITIVE {
        return Err(StepError::SolverBreakdown(PressureError::SingularMode));
    }
    c_prime[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c_prime[i - 1];
        if pivot.abs() < f64::MIN_POSITIVE {
            return Err(StepError::SolverBreakdown(PressureError::SingularMode));
        }
        c_prime[i] = upper[i] / pivot;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
    Ok(())
}

/// Owns the integration state that outlives a single step: the scheme
/// configuration, the source-term evaluator and the previous explicit
/// tendency for the Adams–Bashforth extrapolation.
pub struct Stepper {
    grid: Grid,
    params: DimensionlessParams,
    cfg: StepConfig,
    op_cfg: OperatorConfig,
    sources: Box<dyn SourceTerms>,
    prev_tendency: Option<Tendency>,
    steps_taken: u64,
}

impl Stepper {
    pub fn new(
        grid: Grid,
        params: DimensionlessParams,
        cfg: StepConfig,
        sources: Box<dyn SourceTerms>,
    ) -> Result<Self, StepError> {
        cfg.validate()?;
        params
            .validate()
            .map_err(|e| StepError::InvalidConfig(e.to_string()))?;
        Ok(Stepper {
            grid,
            params,
            cfg,
            op_cfg: OperatorConfig::default(),
            sources,
            prev_tendency: None,
            steps_taken: 0,
        })
    }

    /// Stepper driven by static Q/G forcing.
    pub fn with_forcing(
        grid: Grid,
        params: DimensionlessParams,
        cfg: StepConfig,
        forcing: Forcing,
    ) -> Result<Self, StepError> {
        Self::new(grid, params, cfg, Box::new(forcing))
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn params(&self) -> &DimensionlessParams {
        &self.params
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// Advance the state by one dt. On success the state satisfies the
    /// invariants: exact-zero Dirichlet rows, discrete divergence at solver
    /// tolerance, mean-zero pressure, all values finite.
    pub fn advance(&mut self, state: &mut State) -> Result<StepInfo, StepError> {
        let dt = self.cfg.dt;
        let pr = self.params.pr;
        let theta = self.cfg.diffusion_scheme.theta();

        let mut tendency =
            explicit_tendency(state, &self.params, &self.op_cfg, self.cfg.coriolis_sign);
        self.sources.accumulate(state.time, &mut tendency);

        let use_ab2 =
            self.cfg.explicit_scheme == ExplicitScheme::Ab2 && self.prev_tendency.is_some();
        let (b_now, b_prev) = if use_ab2 { (1.5, -0.5) } else { (1.0, 0.0) };

        // Old pressure gradient for the incremental projection, with wall
        // rows masked so Dirichlet rows stay prescribed.
        let (mut gp1, mut gp2) = operators::gradient(&self.op_cfg, &state.pressure);
        gp1.zero_walls();
        gp2.zero_walls();

        let nu = [pr, pr, 1.0, self.params.le];
        let prev = self.prev_tendency.take();
        let mut new_fields: Vec<ScalarField> = Vec::with_capacity(4);
        {
            let fields = [
                (&state.u1, &tendency.u1),
                (&state.u2, &tendency.u2),
                (&state.temperature, &tendency.temperature),
                (&state.humidity, &tendency.humidity),
            ];
            let prev_fields = prev
                .as_ref()
                .map(|p| [&p.u1, &p.u2, &p.temperature, &p.humidity]);
            for (c, (field, tend)) in fields.into_iter().enumerate() {
                let mut rhs = field.clone();
                rhs.axpy(dt * b_now, tend).expect("same grid");
                if let Some(ref pf) = prev_fields {
                    rhs.axpy(dt * b_prev, pf[c]).expect("same grid");
                }
                if theta < 1.0 {
                    let lap = operators::laplacian(&self.op_cfg, field);
                    rhs.axpy((1.0 - theta) * dt * nu[c], &lap)
                        .expect("same grid");
                }
                match c {
                    0 => rhs.axpy(-dt * pr, &gp1).expect("same grid"),
                    1 => rhs.axpy(-dt * pr, &gp2).expect("same grid"),
                    _ => {}
                }
                rhs.zero_walls();
                new_fields.push(solve_helmholtz(&rhs, theta * dt * nu[c])?);
            }
        }
        let humidity = new_fields.pop().expect("four fields");
        let temperature = new_fields.pop().expect("four fields");
        let u2_star = new_fields.pop().expect("four fields");
        let u1_star = new_fields.pop().expect("four fields");

        let projection = pressure::project(&u1_star, &u2_star, dt, pr)?;
        state.u1 = projection.u1;
        state.u2 = projection.u2;
        state.temperature = temperature;
        state.humidity = humidity;
        state
            .pressure
            .axpy(1.0, &projection.p_increment)
            .expect("same grid");
        state.pressure.remove_mean();
        state.time += dt;
        self.steps_taken += 1;
        self.prev_tendency = Some(tendency);

        for (name, field) in [
            ("u1", &state.u1),
            ("u2", &state.u2),
            ("T", &state.temperature),
            ("q", &state.humidity),
            ("p", &state.pressure),
        ] {
            if !field.all_finite() {
                return Err(StepError::NonFinite {
                    field: name,
                    time: state.time,
                    step: self.steps_taken,
                });
            }
        }

        let cfl = cfl_number(state, dt);
        Ok(StepInfo {
            cfl,
            cfl_exceeded: cfl > CFL_LIMIT,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{apply_dirichlet, inner_product_h};
    use crate::operators::OperatorConfig;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n1: usize, n2: usize) -> Grid {
        Grid::new(n1, n2).unwrap()
    }

    fn energy(s: &State) -> f64 {
        0.5 * inner_product_h(s, s).unwrap()
    }

    fn quiet_params() -> DimensionlessParams {
        DimensionlessParams::uncoupled()
    }

    fn relative_divergence(s: &State) -> f64 {
        let cfg = OperatorConfig::default();
        let div = operators::divergence(&cfg, &s.u1, &s.u2);
        div.max_abs() / (1.0 + s.u1.max_abs().max(s.u2.max_abs()))
    }

    #[test]
    fn zero_state_is_an_equilibrium() {
        let g = grid(8, 9);
        let cfg = StepConfig {
            dt: 1e-2,
            ..StepConfig::default()
        };
        let mut stepper = Stepper::with_forcing(g, quiet_params(), cfg, Forcing::zero(g)).unwrap();
        let mut s = State::zeros(g);
        for _ in 0..10 {
            stepper.advance(&mut s).unwrap();
        }
        assert_eq!(s.u1.max_abs(), 0.0);
        assert_eq!(s.u2.max_abs(), 0.0);
        assert_eq!(s.temperature.max_abs(), 0.0);
        assert_eq!(s.humidity.max_abs(), 0.0);
        assert_eq!(s.pressure.max_abs(), 0.0);
        assert_relative_eq!(s.time, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn rhs_explicit_zero_state_is_zero_plus_sources() {
        let g = grid(8, 9);
        let s = State::zeros(g);
        let f = Forcing::constant(g, 0.25, -0.5);
        let tend = rhs_explicit(&s, &f, &quiet_params());
        assert_eq!(tend.u1.max_abs(), 0.0);
        assert_eq!(tend.u2.max_abs(), 0.0);
        assert_eq!(tend.temperature.get(3, 4), 0.25);
        assert_eq!(tend.humidity.get(3, 4), -0.5);
    }

    #[test]
    fn rhs_explicit_buoyancy_only() {
        // u = 0, T = 1 interior, q = 0, R = 2, Pr = 3 → u₂ tendency = 6
        // in the interior; T tendency = Q.
        let g = grid(8, 9);
        let mut s = State::zeros(g);
        s.temperature = apply_dirichlet(ScalarField::from_fn(g, false, |_, _| 1.0));
        let params = DimensionlessParams {
            pr: 3.0,
            r: 2.0,
            ..DimensionlessParams::uncoupled()
        };
        let tend = rhs_explicit(&s, &Forcing::zero(g), &params);
        for j in 1..8 {
            for i in 0..8 {
                assert_relative_eq!(tend.u2.get(i, j), 6.0, epsilon = 1e-12);
            }
        }
        assert_eq!(tend.u1.max_abs(), 0.0);
        assert_eq!(tend.temperature.max_abs(), 0.0);
    }

    #[test]
    fn rhs_explicit_buoyancy_cancels_for_matched_fields() {
        // T = q with R = R̃: Pr(RT − R̃q) ≡ 0.
        let g = grid(8, 9);
        let mut s = State::zeros(g);
        let f = ScalarField::from_fn(g, true, |x1, x2| x1.cos() * (PI * x2).sin());
        s.temperature = f.clone();
        s.humidity = f;
        let params = DimensionlessParams {
            r: 7.0,
            r_tilde: 7.0,
            ..DimensionlessParams::uncoupled()
        };
        let tend = rhs_explicit(&s, &Forcing::zero(g), &params);
        assert!(tend.u2.max_abs() < 1e-13);
    }

    #[test]
    fn coriolis_sign_switch_flips_the_lower_coupling() {
        let g = grid(8, 9);
        let mut s = State::zeros(g);
        s.u1 = apply_dirichlet(ScalarField::from_fn(g, false, |_, x2| (PI * x2).sin()));
        let params = DimensionlessParams {
            omega: 2.0,
            ..DimensionlessParams::uncoupled()
        };
        let op = OperatorConfig::default();
        let paper = explicit_tendency(&s, &params, &op, CoriolisSign::Paper);
        let anti = explicit_tendency(&s, &params, &op, CoriolisSign::Antisymmetric);
        // with u₂ = 0 only the u₂ equation sees the ω u₁ term
        for node in 0..g.len() {
            assert_relative_eq!(
                paper.u2.values()[node],
                -anti.u2.values()[node],
                epsilon = 1e-13
            );
        }
        assert_eq!(paper.u1.values(), anti.u1.values());
    }

    #[test]
    fn heat_mode_decays_at_the_analytic_rate() {
        // R = R̃ = 0, u = 0, T₀ = sin(πx₂) → T(t) = e^{−π²t} sin(πx₂).
        let g = grid(16, 33);
        let cfg = StepConfig {
            dt: 1e-4,
            t_end: 0.1,
            ..StepConfig::default()
        };
        let mut stepper = Stepper::with_forcing(g, quiet_params(), cfg, Forcing::zero(g)).unwrap();
        let mut s = State::zeros(g);
        s.temperature = ScalarField::from_fn(g, true, |_, x2| (PI * x2).sin());
        let steps = (0.1f64 / 1e-4).round() as usize;
        for _ in 0..steps {
            stepper.advance(&mut s).unwrap();
        }
        let decay = (-PI * PI * s.time).exp();
        let mut worst: f64 = 0.0;
        for j in 0..33 {
            for i in 0..16 {
                let exact = decay * (PI * g.x2(j)).sin();
                worst = worst.max((s.temperature.get(i, j) - exact).abs());
            }
        }
        assert!(worst <= 1e-3, "max error {worst}");
        assert_eq!(s.u1.max_abs(), 0.0);
        assert_eq!(s.u2.max_abs(), 0.0);
    }

    #[test]
    fn dirichlet_rows_and_divergence_hold_during_convection() {
        let g = grid(16, 17);
        let params = DimensionlessParams {
            r: 100.0,
            r_tilde: 20.0,
            le: 0.7,
            ..DimensionlessParams::uncoupled()
        };
        let cfg = StepConfig {
            dt: 1e-3,
            ..StepConfig::default()
        };
        let mut stepper =
            Stepper::with_forcing(g, params, cfg, Forcing::constant(g, 0.3, 0.1)).unwrap();
        let mut s = State::zeros(g);
        s.temperature = ScalarField::from_fn(g, true, |x1, x2| 0.3 * x1.cos() * (PI * x2).sin());
        for _ in 0..50 {
            stepper.advance(&mut s).unwrap();
            for i in 0..16 {
                for j in [0usize, 16] {
                    assert_eq!(s.u1.get(i, j), 0.0);
                    assert_eq!(s.u2.get(i, j), 0.0);
                    assert_eq!(s.temperature.get(i, j), 0.0);
                    assert_eq!(s.humidity.get(i, j), 0.0);
                }
            }
            assert!(relative_divergence(&s) <= 1e-8);
        }
        assert!(s.u1.max_abs() > 0.0, "convection never started");
    }

    #[test]
    fn unforced_energy_is_nonincreasing_with_backward_euler() {
        let g = grid(16, 17);
        let cfg = StepConfig {
            dt: 2e-3,
            diffusion_scheme: DiffusionScheme::BackwardEuler,
            ..StepConfig::default()
        };
        let mut stepper = Stepper::with_forcing(g, quiet_params(), cfg, Forcing::zero(g)).unwrap();
        let mut s = State::zeros(g);
        s.u1 = apply_dirichlet(ScalarField::from_fn(g, false, |x1, x2| {
            0.5 * x1.sin() * (PI * x2).sin()
        }));
        s.u2 = apply_dirichlet(ScalarField::from_fn(g, false, |x1, x2| {
            0.5 * x1.cos() * (PI * x2).sin().powi(2)
        }));
        s.temperature =
            ScalarField::from_fn(g, true, |x1, x2| 0.7 * (2.0 * x1).cos() * (PI * x2).sin());
        s.humidity =
            ScalarField::from_fn(g, true, |x1, x2| -0.4 * x1.sin() * (2.0 * PI * x2).sin());
        let mut prev = energy(&s);
        for _ in 0..200 {
            stepper.advance(&mut s).unwrap();
            let e = energy(&s);
            assert!(
                e <= prev * (1.0 + 1e-12) + 1e-15,
                "energy grew: {prev} -> {e}"
            );
            prev = e;
        }
    }

    #[test]
    fn indefinite_rotation_growth_is_bounded_by_its_quadratic_form() {
        // σ₀′σ₁′ < ω²: the friction matrix is indefinite, so monotone decay
        // is not guaranteed; the energy increment must still be bounded by
        // the actual −Pr σu·u contribution.
        let g = grid(16, 17);
        let params = DimensionlessParams {
            omega: 0.8,
            ..DimensionlessParams::uncoupled()
        };
        let cfg = StepConfig {
            dt: 1e-3,
            diffusion_scheme: DiffusionScheme::BackwardEuler,
            ..StepConfig::default()
        };
        let dt = cfg.dt;
        let mut stepper = Stepper::with_forcing(g, params, cfg, Forcing::zero(g)).unwrap();
        let mut s = State::zeros(g);
        s.u1 = apply_dirichlet(ScalarField::from_fn(g, false, |x1, x2| {
            0.5 * x1.sin() * (PI * x2).sin()
        }));
        s.u2 = apply_dirichlet(ScalarField::from_fn(g, false, |x1, x2| {
            -0.5 * x1.cos() * (PI * x2).sin().powi(2)
        }));
        let mut prev = energy(&s);
        for _ in 0..100 {
            let sigma_form = {
                // −Pr ∫ σu·u with σ = [[0, ω], [ω, 0]]
                let mut cross = s.u1.clone();
                let c = cross.values_mut();
                for (v, w) in c.iter_mut().zip(s.u2.values()) {
                    *v *= w;
                }
                -params.pr * 2.0 * params.omega * cross.integral()
            };
            stepper.advance(&mut s).unwrap();
            let e = energy(&s);
            let bound = prev + dt * sigma_form.max(0.0) + 1e-12 * (1.0 + prev);
            assert!(e <= bound, "energy {e} exceeded bound {bound}");
            prev = e;
        }
    }

    #[test]
    fn steps_are_deterministic() {
        let g = grid(16, 17);
        let params = DimensionlessParams {
            r: 40.0,
            ..DimensionlessParams::uncoupled()
        };
        let run = || {
            let cfg = StepConfig {
                dt: 1e-3,
                ..StepConfig::default()
            };
            let mut stepper =
                Stepper::with_forcing(g, params, cfg, Forcing::constant(g, 0.1, 0.0)).unwrap();
            let mut s = State::zeros(g);
            s.temperature =
                ScalarField::from_fn(g, true, |x1, x2| 0.2 * x1.cos() * (PI * x2).sin());
            for _ in 0..25 {
                stepper.advance(&mut s).unwrap();
            }
            s
        };
        let a = run();
        let b = run();
        assert_eq!(a.u1.values(), b.u1.values());
        assert_eq!(a.u2.values(), b.u2.values());
        assert_eq!(a.temperature.values(), b.temperature.values());
        assert_eq!(a.humidity.values(), b.humidity.values());
        assert_eq!(a.pressure.values(), b.pressure.values());
    }

    #[test]
    fn blowup_is_reported_not_propagated_as_nans() {
        let g = grid(8, 9);
        let params = DimensionlessParams {
            r: 1e8,
            ..DimensionlessParams::uncoupled()
        };
        let cfg = StepConfig {
            dt: 10.0,
            ..StepConfig::default()
        };
        let mut stepper = Stepper::with_forcing(g, params, cfg, Forcing::zero(g)).unwrap();
        let mut s = State::zeros(g);
        s.temperature = ScalarField::from_fn(g, true, |x1, x2| x1.cos() * (PI * x2).sin());
        let mut saw_error = false;
        for _ in 0..50 {
            match stepper.advance(&mut s) {
                Ok(_) => {}
                Err(StepError::NonFinite { field, time, step }) => {
                    assert!(step >= 1);
                    assert!(time > 0.0);
                    assert!(!field.is_empty());
                    saw_error = true;
                    break;
                }
                Err(other) => panic!("unexpected error {other}"),
            }
        }
        assert!(saw_error, "expected the NaN guard to fire");
    }

    #[test]
    fn cfl_number_matches_uniform_transport() {
        let g = grid(8, 9);
        let mut s = State::zeros(g);
        s.u1 = ScalarField::from_fn(g, false, |_, _| 2.0);
        let cfl = cfl_number(&s, 0.1);
        assert_relative_eq!(cfl, 0.1 * 2.0 / g.dx1(), epsilon = 1e-12);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad_dt = StepConfig {
            dt: 0.0,
            ..StepConfig::default()
        };
        assert!(bad_dt.validate().is_err());
        let bad_interval = StepConfig {
            snapshot_interval: 0,
            ..StepConfig::default()
        };
        assert!(bad_interval.validate().is_err());
    }
}
