//! Discrete differential operators: gradient, divergence, Laplacian and the
//! advection operator.
//!
//! x₁ derivatives are spectral by default (exact for resolved Fourier modes,
//! antisymmetric as a real matrix); a second-order centered variant is
//! available through [`OperatorConfig`]. x₂ derivatives are second-order
//! centered in the interior. The wall rows of the first derivative use the
//! first-order one-sided closure (f₁−f₀)/dx₂ and (f_{n−1}−f_{n−2})/dx₂,
//! which together with the trapezoid row weights gives the exact
//! summation-by-parts identity
//!
//! ```text
//! ⟨D₂a, b⟩ + ⟨a, D₂b⟩ = a·b |_{wall}   (exactly, in floating point)
//! ```
//!
//! so gradient/divergence duality and the skew advection form cancel to
//! roundoff — not just to truncation — whenever the boundary terms vanish.
//! The energy identities this crate checks are only meaningful with that
//! exact cancellation, which a second-order one-sided closure does not have.
//!
//! The second derivative (Laplacian) uses the compact three-point stencil in
//! the interior; its wall rows use a one-sided stencil but are prescribed,
//! not evolved, wherever Dirichlet data applies.

use crate::fft;
use crate::fields::{Grid, ScalarField};

/// Advection discretization.
///
/// `Skew` is ½[(u·∇)f + ∇·(uf)]: its quadratic form ⟨advect(u,f), f⟩ cancels
/// discretely for wall-vanishing fields, mirroring the integration-by-parts
/// cancellation that removes advection from the continuous energy balance.
/// `Advective` is the plain (u·∇)f.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvectionForm {
    #[default]
    Skew,
    Advective,
}

/// x₁ differentiation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum X1Method {
    #[default]
    FourierSpectral,
    Centered2,
}

/// Discretization choices; the defaults (skew advection, spectral x₁) are
/// what the energy-identity acceptance checks assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OperatorConfig {
    pub advection_form: AdvectionForm,
    pub x1_method: X1Method,
}

fn assert_same_grid(a: Grid, b: Grid) {
    assert!(a == b, "operator inputs live on different grids");
}

/// ∂f/∂x₁ on the periodic direction.
pub fn ddx1(cfg: &OperatorConfig, f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n1 = grid.n1();
    let values = match cfg.x1_method {
        X1Method::FourierSpectral => fft::differentiate_rows(f.values(), n1),
        X1Method::Centered2 => {
            let two_dx = 2.0 * grid.dx1();
            let mut out = vec![0.0; grid.len()];
            for j in 0..grid.n2() {
                let row = f.row(j);
                let base = j * n1;
                for i in 0..n1 {
                    let ip = (i + 1) % n1;
                    let im = (i + n1 - 1) % n1;
                    out[base + i] = (row[ip] - row[im]) / two_dx;
                }
            }
            out
        }
    };
    ScalarField::from_values(grid, false, values).expect("derivative buffer matches grid")
}

/// ∂f/∂x₂: centered in the interior, first-order one-sided at the walls
/// (the summation-by-parts closure; see the module docs).
pub fn ddx2(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n1 = grid.n1();
    let n2 = grid.n2();
    let dx2 = grid.dx2();
    let mut out = vec![0.0; grid.len()];
    for i in 0..n1 {
        out[i] = (f.get(i, 1) - f.get(i, 0)) / dx2;
        out[(n2 - 1) * n1 + i] = (f.get(i, n2 - 1) - f.get(i, n2 - 2)) / dx2;
    }
    for j in 1..n2 - 1 {
        let above = f.row(j + 1);
        let below = f.row(j - 1);
        let base = j * n1;
        for i in 0..n1 {
            out[base + i] = (above[i] - below[i]) / (2.0 * dx2);
        }
    }
    ScalarField::from_values(grid, false, out).expect("derivative buffer matches grid")
}

/// (∂f/∂x₁, ∂f/∂x₂).
pub fn gradient(cfg: &OperatorConfig, f: &ScalarField) -> (ScalarField, ScalarField) {
    (ddx1(cfg, f), ddx2(f))
}

/// ∂u₁/∂x₁ + ∂u₂/∂x₂, with the same stencils as [`gradient`].
pub fn divergence(cfg: &OperatorConfig, u1: &ScalarField, u2: &ScalarField) -> ScalarField {
    assert_same_grid(u1.grid(), u2.grid());
    let mut div = ddx1(cfg, u1);
    let d2 = ddx2(u2);
    div.axpy(1.0, &d2).expect("same grid");
    div
}

/// ∂²f/∂x₂² with the compact three-point interior stencil and a one-sided
/// second-order stencil on the wall rows (first-order for n2 = 3).
pub fn d2dx2(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n1 = grid.n1();
    let n2 = grid.n2();
    let inv_h2 = 1.0 / (grid.dx2() * grid.dx2());
    let mut out = vec![0.0; grid.len()];
    for j in 1..n2 - 1 {
        let above = f.row(j + 1);
        let here = f.row(j);
        let below = f.row(j - 1);
        let base = j * n1;
        for i in 0..n1 {
            out[base + i] = (above[i] - 2.0 * here[i] + below[i]) * inv_h2;
        }
    }
    for i in 0..n1 {
        if n2 >= 4 {
            out[i] = (2.0 * f.get(i, 0) - 5.0 * f.get(i, 1) + 4.0 * f.get(i, 2) - f.get(i, 3))
                * inv_h2;
            out[(n2 - 1) * n1 + i] = (2.0 * f.get(i, n2 - 1) - 5.0 * f.get(i, n2 - 2)
                + 4.0 * f.get(i, n2 - 3)
                - f.get(i, n2 - 4))
                * inv_h2;
        } else {
            out[i] = (f.get(i, 0) - 2.0 * f.get(i, 1) + f.get(i, 2)) * inv_h2;
            out[(n2 - 1) * n1 + i] = out[i];
        }
    }
    ScalarField::from_values(grid, false, out).expect("derivative buffer matches grid")
}

/// ∂²f/∂x₁² (spectral symbol −k², sawtooth mode projected out, matching the
/// first-derivative convention; or the centered three-point stencil).
pub fn d2dx1(cfg: &OperatorConfig, f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n1 = grid.n1();
    let values = match cfg.x1_method {
        X1Method::FourierSpectral => fft::second_derivative_rows(f.values(), n1),
        X1Method::Centered2 => {
            let inv_h2 = 1.0 / (grid.dx1() * grid.dx1());
            let mut out = vec![0.0; grid.len()];
            for j in 0..grid.n2() {
                let row = f.row(j);
                let base = j * n1;
                for i in 0..n1 {
                    let ip = (i + 1) % n1;
                    let im = (i + n1 - 1) % n1;
                    out[base + i] = (row[ip] - 2.0 * row[i] + row[im]) * inv_h2;
                }
            }
            out
        }
    };
    ScalarField::from_values(grid, false, values).expect("derivative buffer matches grid")
}

/// Δf = ∂²f/∂x₁² + ∂²f/∂x₂².
pub fn laplacian(cfg: &OperatorConfig, f: &ScalarField) -> ScalarField {
    let mut lap = d2dx1(cfg, f);
    let d2 = d2dx2(f);
    lap.axpy(1.0, &d2).expect("same grid");
    lap
}

fn pointwise_product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    assert_same_grid(a.grid(), b.grid());
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x * y)
        .collect();
    ScalarField::from_values(a.grid(), false, values).expect("same grid")
}

/// Transport of f by (u₁, u₂).
///
/// The skew form ½[(u·∇)f + ∇·(uf)] conserves ⟨f, f⟩ to roundoff for fields
/// vanishing on the walls; the advective form (u·∇)f does so only up to the
/// discrete divergence of u.
pub fn advect(
    cfg: &OperatorConfig,
    u1: &ScalarField,
    u2: &ScalarField,
    f: &ScalarField,
) -> ScalarField {
    assert_same_grid(u1.grid(), f.grid());
    assert_same_grid(u2.grid(), f.grid());
    let grid = f.grid();
    let df1 = ddx1(cfg, f);
    let df2 = ddx2(f);
    let mut out = ScalarField::zeros(grid, false);
    {
        let o = out.values_mut();
        let transport = u1
            .values()
            .iter()
            .zip(df1.values())
            .zip(u2.values().iter().zip(df2.values()));
        for (slot, ((v1, d1), (v2, d2))) in o.iter_mut().zip(transport) {
            *slot = v1 * d1 + v2 * d2;
        }
    }
    match cfg.advection_form {
        AdvectionForm::Advective => out,
        AdvectionForm::Skew => {
            let flux1 = ddx1(cfg, &pointwise_product(u1, f));
            let flux2 = ddx2(&pointwise_product(u2, f));
            let o = out.values_mut();
            for ((o, f1), f2) in o.iter_mut().zip(flux1.values()).zip(flux2.values()) {
                *o = 0.5 * (*o + f1 + f2);
            }
            out
        }
    }
}
