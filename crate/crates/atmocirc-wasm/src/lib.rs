//! Browser bindings for the convection solver: an interactive simulation
//! with per-field rendering, live energy diagnostics, and the
//! dimensionless-group calculator. All exports are plain data (numbers,
//! byte/float buffers), so the page needs no framework — a canvas and a few
//! sliders drive everything.
//!
//! The `try_*` methods carry the logic with `String` errors and are what the
//! native tests exercise; the `#[wasm_bindgen]` wrappers only translate
//! errors to `JsValue`, which exists at runtime on wasm alone.

use atmocirc::diagnostics::{divergence_inf_relative, energy_identity};
use atmocirc::fields::{h1_seminorm_sq, inner_product_h, Grid, ScalarField, State};
use atmocirc::params::{nondimensionalize, DimensionlessParams, PhysicalParams};
use atmocirc::pressure;
use atmocirc::stepper::{Forcing, StepConfig, Stepper};
use std::f64::consts::PI;
use wasm_bindgen::prelude::*;

/// Map a signed value to a blue–white–red diverging color.
fn diverging_rgba(value: f64, scale: f64) -> [u8; 4] {
    let x = if scale > 0.0 {
        (value / scale).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let (r, g, b) = if x >= 0.0 {
        // white -> red
        (255.0, 255.0 - 205.0 * x, 255.0 - 225.0 * x)
    } else {
        // white -> blue
        (255.0 + 225.0 * x, 255.0 + 165.0 * x, 255.0)
    };
    [r as u8, g as u8, b as u8, 255]
}

/// Simulation parameters as the page hands them over.
#[derive(Debug, Clone, Copy)]
pub struct DemoSettings {
    pub n1: usize,
    pub n2: usize,
    pub params: DimensionlessParams,
    pub dt: f64,
    pub q0: f64,
    pub g0: f64,
    pub amplitude: f64,
}

/// An owned simulation: state, stepper and forcing on a fixed grid.
#[wasm_bindgen]
pub struct Simulation {
    stepper: Stepper,
    state: State,
    forcing: Forcing,
    params: DimensionlessParams,
    cfl: f64,
}

impl Simulation {
    /// Build a fresh simulation. The initial condition is a single
    /// temperature/humidity roll of the given amplitude plus a weak second
    /// harmonic so asymmetric dynamics can develop.
    pub fn try_new(settings: DemoSettings) -> Result<Simulation, String> {
        let grid = Grid::new(settings.n1, settings.n2).map_err(|e| e.to_string())?;
        let params = settings.params;
        let cfg = StepConfig {
            dt: settings.dt,
            t_end: f64::MAX,
            ..StepConfig::default()
        };
        let forcing = Forcing::constant(grid, settings.q0, settings.g0);
        let stepper = Stepper::with_forcing(grid, params, cfg, forcing.clone())
            .map_err(|e| e.to_string())?;

        let amplitude = settings.amplitude;
        let mut state = State::zeros(grid);
        state.temperature = ScalarField::from_fn(grid, true, |x1, x2| {
            amplitude * (x1.cos() + 0.3 * (2.0 * x1 + 0.7).sin()) * (PI * x2).sin()
        });
        state.humidity = ScalarField::from_fn(grid, true, |x1, x2| {
            0.5 * amplitude * (x1 + 1.1).cos() * (PI * x2).sin()
        });
        state.u1 = ScalarField::from_fn(grid, true, |x1, x2| {
            0.2 * amplitude * x1.cos() * PI * (2.0 * PI * x2).sin()
        });
        state.u2 = ScalarField::from_fn(grid, true, |x1, x2| {
            0.2 * amplitude * x1.sin() * (PI * x2).sin().powi(2)
        });
        let proj =
            pressure::project(&state.u1, &state.u2, 1.0, 1.0).map_err(|e| e.to_string())?;
        state.u1 = proj.u1;
        state.u2 = proj.u2;

        Ok(Simulation {
            stepper,
            state,
            forcing,
            params,
            cfl: 0.0,
        })
    }

    pub fn try_step(&mut self, n: u32) -> Result<f64, String> {
        for _ in 0..n {
            let info = self
                .stepper
                .advance(&mut self.state)
                .map_err(|e| e.to_string())?;
            self.cfl = info.cfl;
        }
        Ok(self.state.time)
    }

    pub fn try_field_rgba(&self, which: &str) -> Result<Vec<u8>, String> {
        let grid = self.state.grid();
        let n = grid.len();
        let mut values = Vec::with_capacity(n);
        match which {
            "T" => values.extend_from_slice(self.state.temperature.values()),
            "q" => values.extend_from_slice(self.state.humidity.values()),
            "p" => values.extend_from_slice(self.state.pressure.values()),
            "speed" => {
                for (a, b) in self.state.u1.values().iter().zip(self.state.u2.values()) {
                    values.push(a.hypot(*b));
                }
            }
            other => return Err(format!("unknown field `{other}`")),
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut rgba = Vec::with_capacity(4 * n);
        for v in values {
            rgba.extend_from_slice(&diverging_rgba(v, scale));
        }
        Ok(rgba)
    }

    fn diagnostics_vec(&self) -> Vec<f64> {
        let e = 0.5 * inner_product_h(&self.state, &self.state).expect("same grid");
        let d = h1_seminorm_sq(&self.state).expect("same grid");
        let budget = energy_identity(&self.state, &self.forcing, &self.params);
        let cert = atmocirc::diagnostics::check_a1(&budget, e, d, &self.params, &self.forcing);
        vec![
            self.state.time,
            e,
            d,
            divergence_inf_relative(&self.state),
            budget.advection_total,
            budget.pressure_work,
            cert.margin,
        ]
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n1: usize,
        n2: usize,
        pr: f64,
        le: f64,
        r: f64,
        r_tilde: f64,
        sigma0p: f64,
        sigma1p: f64,
        omega: f64,
        dt: f64,
        q0: f64,
        g0: f64,
        amplitude: f64,
    ) -> Result<Simulation, JsValue> {
        Simulation::try_new(DemoSettings {
            n1,
            n2,
            params: DimensionlessParams {
                pr,
                le,
                r,
                r_tilde,
                sigma0p,
                sigma1p,
                omega,
            },
            dt,
            q0,
            g0,
            amplitude,
        })
        .map_err(|e| JsValue::from_str(&e))
    }

    /// Advance `n` steps; returns the simulated time. A diverged run
    /// surfaces as an exception so the page can offer a reset.
    pub fn step(&mut self, n: u32) -> Result<f64, JsValue> {
        self.try_step(n).map_err(|e| JsValue::from_str(&e))
    }

    pub fn width(&self) -> usize {
        self.state.grid().n1()
    }

    pub fn height(&self) -> usize {
        self.state.grid().n2()
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Advective CFL number of the last step. Above 0.5 the page should
    /// suggest a smaller dt.
    pub fn cfl(&self) -> f64 {
        self.cfl
    }

    /// RGBA pixels (row j = 0 at the bottom wall; the page flips the canvas)
    /// for one of "T", "q", "speed", "p".
    pub fn field_rgba(&self, which: &str) -> Result<Vec<u8>, JsValue> {
        self.try_field_rgba(which).map_err(|e| JsValue::from_str(&e))
    }

    /// Live diagnostics: [time, E, D, div_inf, advection_total,
    /// pressure_work, A1 margin].
    pub fn diagnostics(&self) -> Vec<f64> {
        self.diagnostics_vec()
    }

    /// Maximum velocity magnitude, for the page's suggested-dt hint.
    pub fn max_speed(&self) -> f64 {
        self.state
            .u1
            .values()
            .iter()
            .zip(self.state.u2.values())
            .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
    }
}

/// Dimensionless groups from dimensional constants:
/// [Pr, Le, R, R̃, σ₀′, σ₁′, ω].
#[allow(clippy::too_many_arguments)]
pub fn try_dimensionless_groups(
    nu: f64,
    kappa_t: f64,
    kappa_q: f64,
    alpha_t: f64,
    alpha_q: f64,
    g: f64,
    h: f64,
    omega: f64,
    sigma0: f64,
    sigma1: f64,
    t_bottom: f64,
    t_top: f64,
    q_bottom: f64,
    q_top: f64,
) -> Result<Vec<f64>, String> {
    let p = PhysicalParams {
        nu,
        kappa_t,
        kappa_q,
        alpha_t,
        alpha_q,
        g,
        h,
        omega,
        sigma0,
        sigma1,
        t_bottom,
        t_top,
        q_bottom,
        q_top,
    };
    let d = nondimensionalize(&p).map_err(|e| e.to_string())?;
    Ok(vec![
        d.pr, d.le, d.r, d.r_tilde, d.sigma0p, d.sigma1p, d.omega,
    ])
}

/// wasm-facing wrapper of [`try_dimensionless_groups`].
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn dimensionless_groups(
    nu: f64,
    kappa_t: f64,
    kappa_q: f64,
    alpha_t: f64,
    alpha_q: f64,
    g: f64,
    h: f64,
    omega: f64,
    sigma0: f64,
    sigma1: f64,
    t_bottom: f64,
    t_top: f64,
    q_bottom: f64,
    q_top: f64,
) -> Result<Vec<f64>, JsValue> {
    try_dimensionless_groups(
        nu, kappa_t, kappa_q, alpha_t, alpha_q, g, h, omega, sigma0, sigma1, t_bottom, t_top,
        q_bottom, q_top,
    )
    .map_err(|e| JsValue::from_str(&e))
}
