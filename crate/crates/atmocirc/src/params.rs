//! Dimensional constants and the dimensionless groups that govern the
//! nondimensional system.
//!
//! The dimensional model is posed on a layer of height `h` with kinematic
//! viscosity `nu`, thermal and humidity diffusivities `kappa_T`, `kappa_q`,
//! buoyancy coefficients `alpha_T`, `alpha_q`, rotation rate `Omega` and
//! turbulent friction coefficients `sigma0`, `sigma1`. Lengths are scaled by
//! `h`, times by `h²/κ_T`, velocities by `κ_T/h`; temperature and humidity are
//! measured as departures from the linear wall-to-wall profile, scaled by the
//! respective wall differences. Pressure absorbs the hydrostatic background.
//!
//! Note on naming: the wall values are called `t_bottom`/`t_top` and
//! `q_bottom`/`q_top` here. The initial-condition fields are unrelated to
//! these constants even though both are traditionally written T₀, q₀.
//!
//! The constants ρ₀, c_v, R₀ and μ of the compressible model do not appear:
//! the Boussinesq reduction eliminates them before nondimensionalization
//! (μ only via ν = μ/ρ₀), so they are not inputs here.

use thiserror::Error;

/// Parameter validation failure, naming the offending field.
#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("parameter `{field}` must be finite, got {value}")]
    NotFinite { field: &'static str, value: f64 },
    #[error("parameter `{field}` must be strictly positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("wall values `{0}` must differ (the scaling divides by their difference)")]
    DegenerateWallDifference(&'static str),
}

/// Dimensional constants of the layer model (SI units in the doc comments,
/// but any coherent unit system works).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Kinematic viscosity ν, m²/s.
    pub nu: f64,
    /// Thermal diffusivity κ_T, m²/s.
    pub kappa_t: f64,
    /// Humidity diffusivity κ_q, m²/s.
    pub kappa_q: f64,
    /// Thermal expansion coefficient α_T, 1/K.
    pub alpha_t: f64,
    /// Humidity contraction coefficient α_q, per humidity unit.
    pub alpha_q: f64,
    /// Gravitational acceleration g, m/s².
    pub g: f64,
    /// Layer (troposphere) height h, m.
    pub h: f64,
    /// Rotation rate Ω, 1/s.
    pub omega: f64,
    /// Turbulent friction on the horizontal velocity, 1/s.
    pub sigma0: f64,
    /// Turbulent friction on the vertical velocity, 1/s.
    pub sigma1: f64,
    /// Temperature held at the bottom wall, K.
    pub t_bottom: f64,
    /// Temperature held at the top wall, K.
    pub t_top: f64,
    /// Humidity held at the bottom wall.
    pub q_bottom: f64,
    /// Humidity held at the top wall.
    pub q_top: f64,
}

/// How the humidity source is scaled to nondimensional form.
///
/// The reference scaling divides both sources by the temperature difference;
/// `Symmetric` instead divides the humidity source by the humidity difference.
/// The default is `Paper` (the scaling as written in the model derivation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HumiditySourceScaling {
    #[default]
    Paper,
    Symmetric,
}

/// The dimensionless groups of the nondimensional system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessParams {
    /// Prandtl number ν/κ_T.
    pub pr: f64,
    /// Lewis number κ_q/κ_T.
    pub le: f64,
    /// Thermal Rayleigh-type number gα_T(T_bottom−T_top)h³/(κ_Tν).
    pub r: f64,
    /// Humidity Rayleigh-type number gα_q(q_bottom−q_top)h³/(κ_Tν).
    pub r_tilde: f64,
    /// Nondimensional friction σ₀h²/ν on u₁.
    pub sigma0p: f64,
    /// Nondimensional friction σ₁h²/ν on u₂.
    pub sigma1p: f64,
    /// Nondimensional rotation 2Ωh²/ν.
    pub omega: f64,
}

impl DimensionlessParams {
    /// Parameters with every coupling switched off (Pr = Le = 1, all else 0).
    pub fn uncoupled() -> Self {
        DimensionlessParams {
            pr: 1.0,
            le: 1.0,
            r: 0.0,
            r_tilde: 0.0,
            sigma0p: 0.0,
            sigma1p: 0.0,
            omega: 0.0,
        }
    }

    /// The friction/rotation matrix σ = [[σ₀′, ω], [ω, σ₁′]], symmetric by
    /// construction.
    pub fn sigma_matrix(&self) -> [[f64; 2]; 2] {
        [[self.sigma0p, self.omega], [self.omega, self.sigma1p]]
    }

    /// Spectral norm of the symmetric σ matrix (largest |eigenvalue|).
    pub fn sigma_norm(&self) -> f64 {
        let half_tr = 0.5 * (self.sigma0p + self.sigma1p);
        let disc = (0.5 * (self.sigma0p - self.sigma1p)).hypot(self.omega);
        (half_tr + disc).abs().max((half_tr - disc).abs())
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        for (field, value) in [
            ("Pr", self.pr),
            ("Le", self.le),
            ("R", self.r),
            ("R_tilde", self.r_tilde),
            ("sigma0p", self.sigma0p),
            ("sigma1p", self.sigma1p),
            ("omega", self.omega),
        ] {
            if !value.is_finite() {
                return Err(ParamsError::NotFinite { field, value });
            }
        }
        require_positive("Pr", self.pr)?;
        require_positive("Le", self.le)?;
        Ok(())
    }
}

fn require_finite(field: &'static str, value: f64) -> Result<(), ParamsError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamsError::NotFinite { field, value })
    }
}

fn require_positive(field: &'static str, value: f64) -> Result<(), ParamsError> {
    require_finite(field, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ParamsError::NotPositive { field, value })
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        require_positive("nu", self.nu)?;
        require_positive("kappa_T", self.kappa_t)?;
        require_positive("kappa_q", self.kappa_q)?;
        require_positive("h", self.h)?;
        for (field, value) in [
            ("alpha_T", self.alpha_t),
            ("alpha_q", self.alpha_q),
            ("g", self.g),
            ("Omega", self.omega),
            ("sigma0", self.sigma0),
            ("sigma1", self.sigma1),
            ("T_bottom", self.t_bottom),
            ("T_top", self.t_top),
            ("q_bottom", self.q_bottom),
            ("q_top", self.q_top),
        ] {
            require_finite(field, value)?;
        }
        if self.t_bottom == self.t_top {
            return Err(ParamsError::DegenerateWallDifference("T_bottom/T_top"));
        }
        Ok(())
    }
}

/// Convert physical constants into the dimensionless groups:
/// Pr = ν/κ_T, Le = κ_q/κ_T, R = gα_T(T_bottom−T_top)h³/(κ_Tν),
/// R̃ = gα_q(q_bottom−q_top)h³/(κ_Tν), σᵢ′ = σᵢh²/ν, ω = 2Ωh²/ν.
pub fn nondimensionalize(p: &PhysicalParams) -> Result<DimensionlessParams, ParamsError> {
    p.validate()?;
    let h3 = p.h * p.h * p.h;
    let h2 = p.h * p.h;
    let d = DimensionlessParams {
        pr: p.nu / p.kappa_t,
        le: p.kappa_q / p.kappa_t,
        r: p.g * p.alpha_t * (p.t_bottom - p.t_top) * h3 / (p.kappa_t * p.nu),
        r_tilde: p.g * p.alpha_q * (p.q_bottom - p.q_top) * h3 / (p.kappa_t * p.nu),
        sigma0p: p.sigma0 * h2 / p.nu,
        sigma1p: p.sigma1 * h2 / p.nu,
        omega: 2.0 * p.omega * h2 / p.nu,
    };
    d.validate()?;
    Ok(d)
}

/// Dimensional seconds to dimensionless time: t · κ_T / h².
pub fn scale_time(p: &PhysicalParams, t_dimensional: f64) -> Result<f64, ParamsError> {
    p.validate()?;
    require_finite("t", t_dimensional)?;
    Ok(t_dimensional * p.kappa_t / (p.h * p.h))
}

/// Scale factor applied to the dimensional heat source Q:
/// h² / ((T_bottom − T_top) κ_T).
pub fn heat_source_scale(p: &PhysicalParams) -> Result<f64, ParamsError> {
    p.validate()?;
    Ok(p.h * p.h / ((p.t_bottom - p.t_top) * p.kappa_t))
}

/// Scale factor applied to the dimensional humidity source G.
///
/// With [`HumiditySourceScaling::Paper`] this is the same factor as for Q
/// (division by the temperature difference); with `Symmetric` the humidity
/// difference is used instead.
pub fn humidity_source_scale(
    p: &PhysicalParams,
    scaling: HumiditySourceScaling,
) -> Result<f64, ParamsError> {
    p.validate()?;
    match scaling {
        HumiditySourceScaling::Paper => Ok(p.h * p.h / ((p.t_bottom - p.t_top) * p.kappa_t)),
        HumiditySourceScaling::Symmetric => {
            if p.q_bottom == p.q_top {
                return Err(ParamsError::DegenerateWallDifference("q_bottom/q_top"));
            }
            Ok(p.h * p.h / ((p.q_bottom - p.q_top) * p.kappa_t))
        }
    }
}

/// Scale dimensional source amplitudes (Q, G) to their nondimensional form.
pub fn scale_forcing(
    p: &PhysicalParams,
    q_dim: f64,
    g_dim: f64,
    scaling: HumiditySourceScaling,
) -> Result<(f64, f64), ParamsError> {
    Ok((
        q_dim * heat_source_scale(p)?,
        g_dim * humidity_source_scale(p, scaling)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> PhysicalParams {
        PhysicalParams {
            nu: 1e-2,
            kappa_t: 1e-2,
            kappa_q: 5e-3,
            alpha_t: 1e-3,
            alpha_q: 2e-4,
            g: 10.0,
            h: 1.0,
            omega: 0.5,
            sigma0: 0.1,
            sigma1: 0.2,
            t_bottom: 300.0,
            t_top: 290.0,
            q_bottom: 0.02,
            q_top: 0.01,
        }
    }

    #[test]
    fn equal_diffusivities_give_unit_prandtl() {
        let d = nondimensionalize(&base()).unwrap();
        assert_relative_eq!(d.pr, 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.le, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rayleigh_number_reference_case() {
        // g = 10, α_T = 1e-3, ΔT = 10, h = 1, κ_T = ν = 1e-2:
        // R = 10 · 1e-3 · 10 · 1 / (1e-2 · 1e-2) = 1000.
        let d = nondimensionalize(&base()).unwrap();
        assert_relative_eq!(d.r, 1000.0, epsilon = 1e-13 * 1000.0);
    }

    #[test]
    fn zero_rotation_and_friction_give_zero_matrix() {
        let p = PhysicalParams {
            omega: 0.0,
            sigma0: 0.0,
            sigma1: 0.0,
            ..base()
        };
        let d = nondimensionalize(&p).unwrap();
        assert_eq!(d.omega, 0.0);
        assert_eq!(d.sigma0p, 0.0);
        assert_eq!(d.sigma1p, 0.0);
        assert_eq!(d.sigma_matrix(), [[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(d.sigma_norm(), 0.0);
    }

    #[test]
    fn scale_time_unit_factors() {
        let p = PhysicalParams {
            h: 1.0,
            kappa_t: 1.0,
            ..base()
        };
        assert_eq!(scale_time(&p, 5.0).unwrap(), 5.0);
        assert_eq!(scale_time(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn scale_time_reference_case() {
        // h = 2, κ_T = 0.5, t = 8 → 8 · 0.5 / 4 = 1.
        let p = PhysicalParams {
            h: 2.0,
            kappa_t: 0.5,
            ..base()
        };
        assert_relative_eq!(scale_time(&p, 8.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn scale_forcing_cases() {
        // Unit factor: h = 1, κ_T = 1, ΔT = 1.
        let p = PhysicalParams {
            h: 1.0,
            kappa_t: 1.0,
            t_bottom: 291.0,
            t_top: 290.0,
            ..base()
        };
        let (q, g) = scale_forcing(&p, 3.0, 0.0, HumiditySourceScaling::Paper).unwrap();
        assert_relative_eq!(q, 3.0, epsilon = 1e-15);
        assert_eq!(g, 0.0);

        // h = 2, κ_T = 0.5, ΔT = 4, Q = 1 → 4 / (4 · 0.5) = 2.
        let p = PhysicalParams {
            h: 2.0,
            kappa_t: 0.5,
            t_bottom: 294.0,
            t_top: 290.0,
            ..base()
        };
        let (q, _) = scale_forcing(&p, 1.0, 0.0, HumiditySourceScaling::Paper).unwrap();
        assert_relative_eq!(q, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_humidity_scaling_divides_by_humidity_difference() {
        let p = PhysicalParams {
            h: 1.0,
            kappa_t: 1.0,
            q_bottom: 0.5,
            q_top: 0.25,
            ..base()
        };
        let s = humidity_source_scale(&p, HumiditySourceScaling::Symmetric).unwrap();
        assert_relative_eq!(s, 4.0, epsilon = 1e-12);
        // Paper scaling keeps the temperature difference.
        let s = humidity_source_scale(&p, HumiditySourceScaling::Paper).unwrap();
        assert_relative_eq!(s, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_scaling_rejects_equal_humidity_walls() {
        let p = PhysicalParams {
            q_bottom: 0.01,
            q_top: 0.01,
            ..base()
        };
        assert_eq!(
            humidity_source_scale(&p, HumiditySourceScaling::Symmetric),
            Err(ParamsError::DegenerateWallDifference("q_bottom/q_top"))
        );
    }

    #[test]
    fn homogeneity_in_rotation_and_height() {
        let p = base();
        let d = nondimensionalize(&p).unwrap();
        let doubled_rotation = nondimensionalize(&PhysicalParams {
            omega: 2.0 * p.omega,
            ..p
        })
        .unwrap();
        assert_relative_eq!(doubled_rotation.omega, 2.0 * d.omega, max_relative = 1e-14);

        let doubled_height = nondimensionalize(&PhysicalParams { h: 2.0 * p.h, ..p }).unwrap();
        assert_relative_eq!(doubled_height.r, 8.0 * d.r, max_relative = 1e-14);
        assert_relative_eq!(doubled_height.omega, 4.0 * d.omega, max_relative = 1e-14);
    }

    #[test]
    fn swapping_walls_negates_rayleigh_numbers_only() {
        let p = base();
        let d = nondimensionalize(&p).unwrap();
        let swapped = nondimensionalize(&PhysicalParams {
            t_bottom: p.t_top,
            t_top: p.t_bottom,
            ..p
        })
        .unwrap();
        assert_relative_eq!(swapped.r, -d.r, max_relative = 1e-14);
        assert_eq!(swapped.pr, d.pr);
        assert_eq!(swapped.le, d.le);
        assert_eq!(swapped.omega, d.omega);
    }

    #[test]
    fn rejects_nonpositive_and_nonfinite_inputs() {
        let p = PhysicalParams { nu: 0.0, ..base() };
        assert_eq!(
            nondimensionalize(&p),
            Err(ParamsError::NotPositive {
                field: "nu",
                value: 0.0
            })
        );
        let p = PhysicalParams {
            kappa_t: f64::NAN,
            ..base()
        };
        assert!(matches!(
            nondimensionalize(&p),
            Err(ParamsError::NotFinite { field: "kappa_T", .. })
        ));
        let p = PhysicalParams {
            t_bottom: 290.0,
            t_top: 290.0,
            ..base()
        };
        assert_eq!(
            nondimensionalize(&p),
            Err(ParamsError::DegenerateWallDifference("T_bottom/T_top"))
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn valid_params() -> impl Strategy<Value = PhysicalParams> {
            (
                1e-6..1e2f64,
                1e-6..1e2f64,
                1e-6..1e2f64,
                (-1e3..1e3f64, -1e3..1e3f64, -1e3..1e3f64),
                1e-3..1e4f64,
                (-1e2..1e2f64, 0.0..1e2f64, 0.0..1e2f64),
                (-1e3..1e3f64, -1e3..1e3f64),
            )
                .prop_filter_map(
                    "wall temperatures must differ",
                    |(nu, kt, kq, (at, aq, g), h, (om, s0, s1), (tb, dt))| {
                        if dt.abs() < 1e-9 {
                            return None;
                        }
                        Some(PhysicalParams {
                            nu,
                            kappa_t: kt,
                            kappa_q: kq,
                            alpha_t: at,
                            alpha_q: aq,
                            g,
                            h,
                            omega: om,
                            sigma0: s0,
                            sigma1: s1,
                            t_bottom: tb,
                            t_top: tb - dt,
                            q_bottom: 0.0,
                            q_top: 1.0,
                        })
                    },
                )
        }

        proptest! {
            #[test]
            fn outputs_finite_for_valid_inputs(p in valid_params()) {
                let d = nondimensionalize(&p).unwrap();
                prop_assert!(d.pr.is_finite() && d.pr > 0.0);
                prop_assert!(d.le.is_finite() && d.le > 0.0);
                prop_assert!(d.r.is_finite());
                prop_assert!(d.r_tilde.is_finite());
                prop_assert!(d.sigma0p.is_finite());
                prop_assert!(d.sigma1p.is_finite());
                prop_assert!(d.omega.is_finite());
                prop_assert!(scale_time(&p, 12.5).unwrap().is_finite());
            }
        }
    }
}
