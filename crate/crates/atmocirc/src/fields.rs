//! Grid, scalar fields, boundary handling and quadratures on
//! Ω = (0, 2π) × (0, 1).
//!
//! The layout is collocated: every unknown lives at the nodes
//! (x₁ᵢ, x₂ⱼ) = (i·dx₁, j·dx₂) with i = 0..n1−1 (the node at x₁ = 2π is
//! identified with x₁ = 0) and j = 0..n2−1, where j = 0 and j = n2−1 are the
//! walls. Wall rows of Dirichlet fields store exact zeros rather than being
//! implicit, so the boundary invariants are directly testable.
//!
//! Quadrature convention: rectangle rule in the periodic x₁ direction
//! (spectrally accurate there) and trapezoid in x₂ (wall weights ½·dx₂).

use crate::operators;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}×{1} vs {2}×{3}")]
    GridMismatch(usize, usize, usize, usize),
    #[error("field contains a non-finite value at node ({0}, {1})")]
    NotFinite(usize, usize),
}

/// Discretization of the channel Ω = (0, 2π) × (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n1: usize,
    n2: usize,
}

impl Grid {
    /// Channel length in x₁, fixed by the periodicity of the domain.
    pub const L1: f64 = TAU;

    /// `n1` x₁ nodes (even, ≥ 4, for the real Fourier layout) and `n2` x₂
    /// nodes including both walls (≥ 3).
    pub fn new(n1: usize, n2: usize) -> Result<Self, FieldError> {
        if n1 < 4 || !n1.is_multiple_of(2) {
            return Err(FieldError::InvalidGrid(format!(
                "n1 must be even and at least 4, got {n1}"
            )));
        }
        if n2 < 3 {
            return Err(FieldError::InvalidGrid(format!(
                "n2 must be at least 3, got {n2}"
            )));
        }
        Ok(Grid { n1, n2 })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx1(&self) -> f64 {
        Self::L1 / self.n1 as f64
    }

    pub fn dx2(&self) -> f64 {
        1.0 / (self.n2 - 1) as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        i as f64 * self.dx1()
    }

    pub fn x2(&self, j: usize) -> f64 {
        j as f64 * self.dx2()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    /// Trapezoid weight of row j (½·dx₂ on the walls, dx₂ inside).
    #[inline]
    pub fn row_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n2 - 1 {
            0.5 * self.dx2()
        } else {
            self.dx2()
        }
    }
}

/// A real scalar field collocated on a [`Grid`].
///
/// `dirichlet_zero` marks fields whose wall rows are pinned to exactly zero
/// (the velocity components, temperature and humidity); the pressure is not.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    dirichlet_zero: bool,
}

impl ScalarField {
    pub fn zeros(grid: Grid, dirichlet_zero: bool) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
            dirichlet_zero,
        }
    }

    /// Sample an analytic function at the nodes. Dirichlet fields get their
    /// wall rows pinned to exact zeros afterwards.
    pub fn from_fn(grid: Grid, dirichlet_zero: bool, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n2() {
            for i in 0..grid.n1() {
                values.push(f(grid.x1(i), grid.x2(j)));
            }
        }
        let mut field = ScalarField {
            grid,
            values,
            dirichlet_zero,
        };
        if dirichlet_zero {
            field.zero_walls();
        }
        field
    }

    pub fn from_values(
        grid: Grid,
        dirichlet_zero: bool,
        values: Vec<f64>,
    ) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::InvalidGrid(format!(
                "value buffer has {} entries, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        let mut field = ScalarField {
            grid,
            values,
            dirichlet_zero,
        };
        if dirichlet_zero {
            field.zero_walls();
        }
        Ok(field)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn is_dirichlet_zero(&self) -> bool {
        self.dirichlet_zero
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.grid.idx(i, j);
        self.values[idx] = v;
    }

    /// Contiguous x₂ row j.
    pub fn row(&self, j: usize) -> &[f64] {
        let n1 = self.grid.n1();
        &self.values[j * n1..(j + 1) * n1]
    }

    pub fn zero_walls(&mut self) {
        let n1 = self.grid.n1();
        let n2 = self.grid.n2();
        self.values[..n1].fill(0.0);
        self.values[(n2 - 1) * n1..].fill(0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Max-norm over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadrature of the field over Ω.
    pub fn integral(&self) -> f64 {
        let dx1 = self.grid.dx1();
        let mut total = 0.0;
        for j in 0..self.grid.n2() {
            let w = self.grid.row_weight(j) * dx1;
            let mut row_sum = 0.0;
            for &v in self.row(j) {
                row_sum += v;
            }
            total += w * row_sum;
        }
        total
    }

    /// Quadrature of the pointwise product with another field.
    pub fn inner(&self, other: &ScalarField) -> Result<f64, FieldError> {
        check_same_grid(self.grid, other.grid)?;
        let dx1 = self.grid.dx1();
        let n1 = self.grid.n1();
        let mut total = 0.0;
        for j in 0..self.grid.n2() {
            let w = self.grid.row_weight(j) * dx1;
            let a = self.row(j);
            let b = &other.values[j * n1..(j + 1) * n1];
            let mut row_sum = 0.0;
            for (x, y) in a.iter().zip(b) {
                row_sum += x * y;
            }
            total += w * row_sum;
        }
        Ok(total)
    }

    /// Subtract the quadrature mean so the field integrates to zero.
    pub fn remove_mean(&mut self) {
        let area = TAU; // |Ω| = 2π · 1
        let mean = self.integral() / area;
        for v in &mut self.values {
            *v -= mean;
        }
    }

    /// self += scale · other (grids must match).
    pub fn axpy(&mut self, scale: f64, other: &ScalarField) -> Result<(), FieldError> {
        check_same_grid(self.grid, other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

pub fn check_same_grid(a: Grid, b: Grid) -> Result<(), FieldError> {
    if a != b {
        return Err(FieldError::GridMismatch(a.n1(), a.n2(), b.n1(), b.n2()));
    }
    Ok(())
}

/// Set the wall rows of a field to exactly zero, leaving the interior alone.
/// Idempotent; returns the field with the `dirichlet_zero` flag set.
pub fn apply_dirichlet(mut f: ScalarField) -> ScalarField {
    f.zero_walls();
    f.dirichlet_zero = true;
    f
}

/// The full set of prognostic fields plus pressure at one instant.
///
/// Invariants maintained by the stepper: velocity, temperature and humidity
/// have exact-zero wall rows, the discrete divergence of (u₁, u₂) stays at
/// the projection tolerance, and the pressure has zero quadrature mean.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub temperature: ScalarField,
    pub humidity: ScalarField,
    pub pressure: ScalarField,
    pub time: f64,
}

impl State {
    pub fn zeros(grid: Grid) -> Self {
        State {
            u1: ScalarField::zeros(grid, true),
            u2: ScalarField::zeros(grid, true),
            temperature: ScalarField::zeros(grid, true),
            humidity: ScalarField::zeros(grid, true),
            pressure: ScalarField::zeros(grid, false),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> Grid {
        self.u1.grid()
    }

    /// The four prognostic components (pressure excluded), in the order
    /// u₁, u₂, T, q used throughout the diagnostics.
    pub fn components(&self) -> [&ScalarField; 4] {
        [&self.u1, &self.u2, &self.temperature, &self.humidity]
    }

    pub fn all_finite(&self) -> bool {
        self.components().iter().all(|f| f.all_finite()) && self.pressure.all_finite()
    }
}

/// L² inner product over the four prognostic components (pressure excluded):
/// ∫_Ω (a·b) with a, b ∈ {(u₁, u₂, T, q)}.
pub fn inner_product_h(a: &State, b: &State) -> Result<f64, FieldError> {
    check_same_grid(a.grid(), b.grid())?;
    let mut total = 0.0;
    for (fa, fb) in a.components().iter().zip(b.components()) {
        total += fa.inner(fb)?;
    }
    Ok(total)
}

/// Squared H¹ seminorm ∫ |∇u₁|² + |∇u₂|² + |∇T|² + |∇q|², quadratured with
/// the node-centered gradient of the operators module.
pub fn h1_seminorm_sq(s: &State) -> Result<f64, FieldError> {
    let cfg = operators::OperatorConfig::default();
    let mut total = 0.0;
    for f in s.components() {
        let (g1, g2) = operators::gradient(&cfg, f);
        total += g1.inner(&g1)? + g2.inner(&g2)?;
    }
    Ok(total)
}
