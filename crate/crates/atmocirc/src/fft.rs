//! Row-wise Fourier transforms in the periodic x₁ direction.
//!
//! Fields are stored row-major (x₂ row index slow, x₁ fast), so each x₂ row
//! is a contiguous slice of n1 real samples on [0, 2π). Wavenumbers are
//! integers k = 0, ±1, …, ±(n1/2 − 1) plus the sawtooth mode n1/2.
//!
//! The first-derivative symbol is ik with the sawtooth mode zeroed, which
//! keeps the operator real and antisymmetric; the second-derivative symbol
//! used throughout is the square of that, so the sawtooth mode is projected
//! out of every spectral derivative consistently.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// Signed integer wavenumber for bin `idx` of an n-point transform on [0, 2π).
pub fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// First-derivative spectral symbol: ik, with the sawtooth mode zeroed.
pub fn d1_symbol(idx: usize, n: usize) -> Complex64 {
    if idx == n / 2 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(0.0, wavenumber(idx, n) as f64)
    }
}

/// Second-derivative spectral symbol: (ik)² = −k², sawtooth mode zeroed.
pub fn d2_symbol(idx: usize, n: usize) -> f64 {
    if idx == n / 2 {
        0.0
    } else {
        let k = wavenumber(idx, n) as f64;
        -k * k
    }
}

/// Forward transform of each length-`n1` row of `values` (unnormalized).
pub fn forward_rows(values: &[f64], n1: usize) -> Vec<Complex64> {
    let fft = plan(n1, false);
    let mut spec: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for row in spec.chunks_exact_mut(n1) {
        fft.process(row);
    }
    spec
}

/// Inverse transform back to real rows, dividing by n1.
///
/// The caller is responsible for the spectrum being conjugate-symmetric;
/// [`enforce_real_symmetry`] restores that exactly after symbol multiplies.
pub fn inverse_rows(mut spec: Vec<Complex64>, n1: usize) -> Vec<f64> {
    let fft = plan(n1, true);
    for row in spec.chunks_exact_mut(n1) {
        fft.process(row);
    }
    let scale = 1.0 / n1 as f64;
    spec.iter().map(|c| c.re * scale).collect()
}

/// Overwrite bins above n1/2 with the conjugate of their mirror bins so the
/// inverse transform of a processed spectrum is exactly real.
pub fn enforce_real_symmetry(spec: &mut [Complex64], n1: usize) {
    for row in spec.chunks_exact_mut(n1) {
        row[n1 / 2].im = 0.0;
        row[0].im = 0.0;
        for k in 1..n1 / 2 {
            row[n1 - k] = row[k].conj();
        }
    }
}

/// Apply a per-wavenumber complex symbol to every row of a spectrum.
pub fn apply_symbol(spec: &mut [Complex64], n1: usize, symbol: impl Fn(usize) -> Complex64) {
    let factors: Vec<Complex64> = (0..n1).map(symbol).collect();
    for row in spec.chunks_exact_mut(n1) {
        for (c, f) in row.iter_mut().zip(&factors) {
            *c *= f;
        }
    }
}

/// Spectral derivative of each row: real input, real output.
pub fn differentiate_rows(values: &[f64], n1: usize) -> Vec<f64> {
    let mut spec = forward_rows(values, n1);
    apply_symbol(&mut spec, n1, |k| d1_symbol(k, n1));
    enforce_real_symmetry(&mut spec, n1);
    inverse_rows(spec, n1)
}

/// Spectral second derivative of each row (sawtooth mode projected out).
pub fn second_derivative_rows(values: &[f64], n1: usize) -> Vec<f64> {
    let mut spec = forward_rows(values, n1);
    apply_symbol(&mut spec, n1, |k| Complex64::new(d2_symbol(k, n1), 0.0));
    enforce_real_symmetry(&mut spec, n1);
    inverse_rows(spec, n1)
}
