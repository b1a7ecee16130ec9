//! Run configuration: a plain `key = value` format with `[section]` headers
//! and `#` comments.
//!
//! Exactly one of `[physical]` (dimensional constants, nondimensionalized at
//! load) or `[dimensionless]` may be present. Unknown sections or keys are
//! hard errors with line numbers — a typo never silently falls back to a
//! default. Missing keys with a physically meaningful zero (couplings,
//! amplitudes) default to zero; everything else is required.
//!
//! ```text
//! [dimensionless]
//! Pr = 1.0
//! Le = 0.5
//! R = 50.0
//! R_tilde = 10.0
//!
//! [grid]
//! n1 = 32
//! n2 = 33
//!
//! [stepping]
//! dt = 2e-3
//! t_end = 2.0
//!
//! [initial]
//! kind = single_mode
//! kx = 1
//! m = 1
//! amp_T = 0.1
//!
//! [forcing]
//! kind = constant
//! Q0 = 0.1
//! G0 = 0.1
//! ```

use crate::fields::Grid;
use crate::params::{
    nondimensionalize, DimensionlessParams, HumiditySourceScaling, ParamsError, PhysicalParams,
};
use crate::stepper::{CoriolisSign, DiffusionScheme, ExplicitScheme, StepConfig};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

fn validation(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// Which parameter block the configuration carries.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSpec {
    Physical {
        params: PhysicalParams,
        humidity_scaling: HumiditySourceScaling,
    },
    Dimensionless(DimensionlessParams),
}

/// Initial-condition specification.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Zero,
    /// T += amp_T·cos(kx·x₁)sin(mπx₂), q += amp_q·cos(kx·x₁)sin(mπx₂),
    /// u from the streamfunction amp_u·cos(kx·x₁)sin²(mπx₂).
    SingleMode {
        kx: u32,
        m: u32,
        amp_t: f64,
        amp_q: f64,
        amp_u: f64,
    },
    /// Snapshot CSV to load as the initial state.
    File(PathBuf),
}

/// Forcing specification for the heat/moisture sources.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    Constant {
        q0: f64,
        g0: f64,
    },
    /// Q = Q0·cos(kx·x₁)sin(mπx₂) and likewise for G.
    SingleMode {
        kx: u32,
        m: u32,
        q0: f64,
        g0: f64,
    },
    /// CSV with columns x1,x2,Q,G on the run grid.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub param_spec: ParamSpec,
    pub n1: usize,
    pub n2: usize,
    pub step: StepConfig,
    pub initial: InitialSpec,
    pub forcing: ForcingSpec,
    /// Output directory; the CLI `--out` flag overrides it.
    pub out_dir: Option<PathBuf>,
    /// Seed reserved for randomized diagnostic probes; echoed to the
    /// manifest so such runs stay reproducible.
    pub seed: u64,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.n1, self.n2)
            .map_err(|e| validation("grid", e.to_string()))
    }

    /// The dimensionless groups this run solves with (converting the
    /// physical block if that is what was given).
    pub fn dimensionless(&self) -> Result<DimensionlessParams, ConfigError> {
        match &self.param_spec {
            ParamSpec::Dimensionless(d) => {
                d.validate()?;
                Ok(*d)
            }
            ParamSpec::Physical { params, .. } => Ok(nondimensionalize(params)?),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid()?;
        self.dimensionless()?;
        self.step
            .validate()
            .map_err(|e| validation("stepping", e.to_string()))?;
        let check_mode = |what: &str, kx: u32, m: u32| -> Result<(), ConfigError> {
            if m == 0 {
                return Err(validation(what, "vertical mode m must be at least 1"));
            }
            if kx as usize >= grid.n1() / 2 {
                return Err(validation(
                    what,
                    format!("kx = {kx} is not resolvable on n1 = {}", grid.n1()),
                ));
            }
            Ok(())
        };
        if let InitialSpec::SingleMode { kx, m, .. } = self.initial {
            check_mode("initial", kx, m)?;
        }
        if let ForcingSpec::SingleMode { kx, m, .. } = self.forcing {
            check_mode("forcing", kx, m)?;
        }
        Ok(())
    }

    /// Canonical text form; `parse_config(render(c))` reproduces `c`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        match &self.param_spec {
            ParamSpec::Dimensionless(d) => {
                out.push_str("[dimensionless]\n");
                let _ = writeln!(out, "Pr = {}", d.pr);
                let _ = writeln!(out, "Le = {}", d.le);
                let _ = writeln!(out, "R = {}", d.r);
                let _ = writeln!(out, "R_tilde = {}", d.r_tilde);
                let _ = writeln!(out, "sigma0p = {}", d.sigma0p);
                let _ = writeln!(out, "sigma1p = {}", d.sigma1p);
                let _ = writeln!(out, "omega = {}", d.omega);
            }
            ParamSpec::Physical {
                params: p,
                humidity_scaling,
            } => {
                out.push_str("[physical]\n");
                let _ = writeln!(out, "nu = {}", p.nu);
                let _ = writeln!(out, "kappa_T = {}", p.kappa_t);
                let _ = writeln!(out, "kappa_q = {}", p.kappa_q);
                let _ = writeln!(out, "alpha_T = {}", p.alpha_t);
                let _ = writeln!(out, "alpha_q = {}", p.alpha_q);
                let _ = writeln!(out, "g = {}", p.g);
                let _ = writeln!(out, "h = {}", p.h);
                let _ = writeln!(out, "Omega = {}", p.omega);
                let _ = writeln!(out, "sigma0 = {}", p.sigma0);
                let _ = writeln!(out, "sigma1 = {}", p.sigma1);
                let _ = writeln!(out, "T_bottom = {}", p.t_bottom);
                let _ = writeln!(out, "T_top = {}", p.t_top);
                let _ = writeln!(out, "q_bottom = {}", p.q_bottom);
                let _ = writeln!(out, "q_top = {}", p.q_top);
                let scaling = match humidity_scaling {
                    HumiditySourceScaling::Paper => "paper",
                    HumiditySourceScaling::Symmetric => "symmetric",
                };
                let _ = writeln!(out, "humidity_source_scaling = {scaling}");
            }
        }
        out.push_str("\n[grid]\n");
        let _ = writeln!(out, "n1 = {}", self.n1);
        let _ = writeln!(out, "n2 = {}", self.n2);
        out.push_str("\n[stepping]\n");
        let _ = writeln!(out, "dt = {}", self.step.dt);
        let _ = writeln!(out, "t_end = {}", self.step.t_end);
        let scheme = match self.step.diffusion_scheme {
            DiffusionScheme::BackwardEuler => "backward_euler",
            DiffusionScheme::CrankNicolson => "crank_nicolson",
        };
        let _ = writeln!(out, "diffusion_scheme = {scheme}");
        let explicit = match self.step.explicit_scheme {
            ExplicitScheme::Euler => "euler",
            ExplicitScheme::Ab2 => "ab2",
        };
        let _ = writeln!(out, "explicit_scheme = {explicit}");
        let coriolis = match self.step.coriolis_sign {
            CoriolisSign::Paper => "paper",
            CoriolisSign::Antisymmetric => "antisymmetric",
        };
        let _ = writeln!(out, "coriolis_sign = {coriolis}");
        let _ = writeln!(out, "snapshot_interval = {}", self.step.snapshot_interval);
        out.push_str("\n[initial]\n");
        match &self.initial {
            InitialSpec::Zero => out.push_str("kind = zero\n"),
            InitialSpec::SingleMode {
                kx,
                m,
                amp_t,
                amp_q,
                amp_u,
            } => {
                out.push_str("kind = single_mode\n");
                let _ = writeln!(out, "kx = {kx}");
                let _ = writeln!(out, "m = {m}");
                let _ = writeln!(out, "amp_T = {amp_t}");
                let _ = writeln!(out, "amp_q = {amp_q}");
                let _ = writeln!(out, "amp_u = {amp_u}");
            }
            InitialSpec::File(path) => {
                out.push_str("kind = file\n");
                let _ = writeln!(out, "path = {}", path.display());
            }
        }
        out.push_str("\n[forcing]\n");
        match &self.forcing {
            ForcingSpec::Zero => out.push_str("kind = zero\n"),
            ForcingSpec::Constant { q0, g0 } => {
                out.push_str("kind = constant\n");
                let _ = writeln!(out, "Q0 = {q0}");
                let _ = writeln!(out, "G0 = {g0}");
            }
            ForcingSpec::SingleMode { kx, m, q0, g0 } => {
                out.push_str("kind = single_mode\n");
                let _ = writeln!(out, "kx = {kx}");
                let _ = writeln!(out, "m = {m}");
                let _ = writeln!(out, "Q0 = {q0}");
                let _ = writeln!(out, "G0 = {g0}");
            }
            ForcingSpec::File(path) => {
                out.push_str("kind = file\n");
                let _ = writeln!(out, "path = {}", path.display());
            }
        }
        out.push_str("\n[output]\n");
        if let Some(dir) = &self.out_dir {
            let _ = writeln!(out, "dir = {}", dir.display());
        }
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }
}

/// Raw `section.key = value` entries with their line numbers.
struct RawConfig {
    entries: BTreeMap<(String, String), (usize, String)>,
    sections: Vec<String>,
}

fn tokenize(text: &str) -> Result<RawConfig, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut sections = Vec::new();
    let mut section: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: "empty section name".into(),
                });
            }
            if !sections.contains(&name) {
                sections.push(name.clone());
            }
            section = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                message: "empty key or value".into(),
            });
        }
        let section = section.clone().ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: format!("key `{key}` appears before any [section] header"),
        })?;
        if entries
            .insert((section.clone(), key.clone()), (line_no, value))
            .is_some()
        {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key `{key}` in section [{section}]"),
            });
        }
    }
    Ok(RawConfig { entries, sections })
}

impl RawConfig {
    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    fn take_f64(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(section, key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<f64>().map(Some).map_err(|_| {
                ConfigError::Parse {
                    line,
                    message: format!("`{key}` must be a number, got `{value}`"),
                }
            }),
        }
    }

    fn take_int(&mut self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.take(section, key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<u64>().map(Some).map_err(|_| {
                ConfigError::Parse {
                    line,
                    message: format!("`{key}` must be a nonnegative integer, got `{value}`"),
                }
            }),
        }
    }

    fn require_f64(&mut self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.take_f64(section, key)?.ok_or_else(|| {
            validation(
                &format!("{section}.{key}"),
                "required key is missing".to_string(),
            )
        })
    }

    fn reject_leftovers(&self) -> Result<(), ConfigError> {
        if let Some(((section, key), (line, _))) = self.entries.iter().next() {
            return Err(ConfigError::Parse {
                line: *line,
                message: format!("unknown key `{key}` in section [{section}]"),
            });
        }
        Ok(())
    }
}

const KNOWN_SECTIONS: &[&str] = &[
    "physical",
    "dimensionless",
    "grid",
    "stepping",
    "initial",
    "forcing",
    "output",
];

/// Parse and fully validate a configuration. Unknown sections or keys are
/// rejected with their line number.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut raw = tokenize(text)?;
    for section in &raw.sections {
        if !KNOWN_SECTIONS.contains(&section.as_str()) {
            let line = raw
                .entries
                .iter()
                .find(|((s, _), _)| s == section)
                .map(|(_, (line, _))| *line)
                .unwrap_or(1);
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown section [{section}]"),
            });
        }
    }

    let has_physical = raw.sections.iter().any(|s| s == "physical");
    let has_dimensionless = raw.sections.iter().any(|s| s == "dimensionless");
    let param_spec = match (has_physical, has_dimensionless) {
        (true, true) | (false, false) => {
            return Err(validation(
                "parameters",
                "exactly one of [physical] or [dimensionless] must be present",
            ))
        }
        (false, true) => {
            let pr = raw.require_f64("dimensionless", "Pr")?;
            let le = raw.require_f64("dimensionless", "Le")?;
            let r = raw.take_f64("dimensionless", "R")?.unwrap_or(0.0);
            let r_tilde = raw.take_f64("dimensionless", "R_tilde")?.unwrap_or(0.0);
            let sigma0p = raw.take_f64("dimensionless", "sigma0p")?.unwrap_or(0.0);
            let sigma1p = raw.take_f64("dimensionless", "sigma1p")?.unwrap_or(0.0);
            let omega = raw.take_f64("dimensionless", "omega")?.unwrap_or(0.0);
            ParamSpec::Dimensionless(DimensionlessParams {
                pr,
                le,
                r,
                r_tilde,
                sigma0p,
                sigma1p,
                omega,
            })
        }
        (true, false) => {
            let params = PhysicalParams {
                nu: raw.require_f64("physical", "nu")?,
                kappa_t: raw.require_f64("physical", "kappa_T")?,
                kappa_q: raw.require_f64("physical", "kappa_q")?,
                alpha_t: raw.require_f64("physical", "alpha_T")?,
                alpha_q: raw.require_f64("physical", "alpha_q")?,
                g: raw.require_f64("physical", "g")?,
                h: raw.require_f64("physical", "h")?,
                omega: raw.take_f64("physical", "Omega")?.unwrap_or(0.0),
                sigma0: raw.take_f64("physical", "sigma0")?.unwrap_or(0.0),
                sigma1: raw.take_f64("physical", "sigma1")?.unwrap_or(0.0),
                t_bottom: raw.require_f64("physical", "T_bottom")?,
                t_top: raw.require_f64("physical", "T_top")?,
                q_bottom: raw.require_f64("physical", "q_bottom")?,
                q_top: raw.require_f64("physical", "q_top")?,
            };
            let humidity_scaling = match raw.take("physical", "humidity_source_scaling") {
                None => HumiditySourceScaling::Paper,
                Some((line, value)) => match value.as_str() {
                    "paper" => HumiditySourceScaling::Paper,
                    "symmetric" => HumiditySourceScaling::Symmetric,
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!(
                                "humidity_source_scaling must be `paper` or `symmetric`, got `{other}`"
                            ),
                        })
                    }
                },
            };
            ParamSpec::Physical {
                params,
                humidity_scaling,
            }
        }
    };

    let n1 = raw
        .take_int("grid", "n1")?
        .ok_or_else(|| validation("grid.n1", "required key is missing"))? as usize;
    let n2 = raw
        .take_int("grid", "n2")?
        .ok_or_else(|| validation("grid.n2", "required key is missing"))? as usize;

    let dt = raw.require_f64("stepping", "dt")?;
    let t_end = raw.require_f64("stepping", "t_end")?;
    let diffusion_scheme = match raw.take("stepping", "diffusion_scheme") {
        None => DiffusionScheme::default(),
        Some((line, value)) => match value.as_str() {
            "crank_nicolson" => DiffusionScheme::CrankNicolson,
            "backward_euler" => DiffusionScheme::BackwardEuler,
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!(
                        "diffusion_scheme must be `crank_nicolson` or `backward_euler`, got `{other}`"
                    ),
                })
            }
        },
    };
    let explicit_scheme = match raw.take("stepping", "explicit_scheme") {
        None => ExplicitScheme::default(),
        Some((line, value)) => match value.as_str() {
            "ab2" => ExplicitScheme::Ab2,
            "euler" => ExplicitScheme::Euler,
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("explicit_scheme must be `ab2` or `euler`, got `{other}`"),
                })
            }
        },
    };
    let coriolis_sign = match raw.take("stepping", "coriolis_sign") {
        None => CoriolisSign::default(),
        Some((line, value)) => match value.as_str() {
            "paper" => CoriolisSign::Paper,
            "antisymmetric" => CoriolisSign::Antisymmetric,
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!(
                        "coriolis_sign must be `paper` or `antisymmetric`, got `{other}`"
                    ),
                })
            }
        },
    };
    let snapshot_interval = raw.take_int("stepping", "snapshot_interval")?.unwrap_or(10) as usize;
    let step = StepConfig {
        dt,
        t_end,
        diffusion_scheme,
        explicit_scheme,
        snapshot_interval,
        coriolis_sign,
    };

    let initial = match raw.take("initial", "kind") {
        None => InitialSpec::Zero,
        Some((line, value)) => match value.as_str() {
            "zero" => InitialSpec::Zero,
            "single_mode" => InitialSpec::SingleMode {
                kx: raw.take_int("initial", "kx")?.unwrap_or(1) as u32,
                m: raw.take_int("initial", "m")?.unwrap_or(1) as u32,
                amp_t: raw.take_f64("initial", "amp_T")?.unwrap_or(0.0),
                amp_q: raw.take_f64("initial", "amp_q")?.unwrap_or(0.0),
                amp_u: raw.take_f64("initial", "amp_u")?.unwrap_or(0.0),
            },
            "file" => {
                let (_, path) = raw.take("initial", "path").ok_or_else(|| {
                    validation("initial.path", "file initial condition needs a path")
                })?;
                InitialSpec::File(PathBuf::from(path))
            }
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!(
                        "initial kind must be `zero`, `single_mode` or `file`, got `{other}`"
                    ),
                })
            }
        },
    };

    let forcing = match raw.take("forcing", "kind") {
        None => ForcingSpec::Zero,
        Some((line, value)) => match value.as_str() {
            "zero" => ForcingSpec::Zero,
            "constant" => ForcingSpec::Constant {
                q0: raw.take_f64("forcing", "Q0")?.unwrap_or(0.0),
                g0: raw.take_f64("forcing", "G0")?.unwrap_or(0.0),
            },
            "single_mode" => ForcingSpec::SingleMode {
                kx: raw.take_int("forcing", "kx")?.unwrap_or(0) as u32,
                m: raw.take_int("forcing", "m")?.unwrap_or(1) as u32,
                q0: raw.take_f64("forcing", "Q0")?.unwrap_or(0.0),
                g0: raw.take_f64("forcing", "G0")?.unwrap_or(0.0),
            },
            "file" => {
                let (_, path) = raw
                    .take("forcing", "path")
                    .ok_or_else(|| validation("forcing.path", "file forcing needs a path"))?;
                ForcingSpec::File(PathBuf::from(path))
            }
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!(
                        "forcing kind must be `zero`, `constant`, `single_mode` or `file`, got `{other}`"
                    ),
                })
            }
        },
    };

    let out_dir = raw.take("output", "dir").map(|(_, v)| PathBuf::from(v));
    let seed = raw.take_int("output", "seed")?.unwrap_or(0);

    raw.reject_leftovers()?;

    let config = RunConfig {
        param_spec,
        n1,
        n2,
        step,
        initial,
        forcing,
        out_dir,
        seed,
    };
    config.validate()?;
    Ok(config)
}
