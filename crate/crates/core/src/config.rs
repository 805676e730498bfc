//! Scenario files: raw JSON as written by users or presets, and the validated
//! dimensionless configuration the simulation runs on.

use std::f64::consts::{LN_2, PI};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Axis, ObservableFrame};
use crate::error::{Error, Result};
use crate::kinetic::{Coupling, GrowthParams, GrowthRate, ResponseParams, DEFAULT_CONCENTRATION_FLOOR};
use crate::mesh::{build_space_mesh, build_velocity_grid, Bounds, SpaceMesh, VelocityGrid};
use crate::reaction_diffusion::ScalarCoefficients;
use crate::Point;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub geometry: GeometrySpec,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub coupling: Coupling,
    pub parameters: RawParameters,
    pub initial: InitialSpec,
    pub run: RawRun,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observe: Option<RawObserve>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: String,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// `[x_min, x_max, y_min, y_max]`
    pub bounds: [f64; 4],
    pub n_x: usize,
    pub n_y: usize,
    pub n_v: usize,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// table units (micrometres per second, per second, cm^2/s, hours) converted with `x_bar`, `t_bar`
    #[default]
    Physical,
    /// values are used as given
    Dimensionless,
}

/// Model parameters as written in the file. Which ones are required depends
/// on the units and the growth model.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawParameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_0: Option<f64>,
    #[serde(rename = "chi_N", skip_serializing_if = "Option::is_none")]
    pub chi_n: Option<f64>,
    #[serde(rename = "chi_S", skip_serializing_if = "Option::is_none")]
    pub chi_s: Option<f64>,
    #[serde(rename = "delta_N", skip_serializing_if = "Option::is_none")]
    pub delta_n: Option<f64>,
    #[serde(rename = "delta_S", skip_serializing_if = "Option::is_none")]
    pub delta_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "D_N", skip_serializing_if = "Option::is_none")]
    pub d_n: Option<f64>,
    #[serde(rename = "D_S", skip_serializing_if = "Option::is_none")]
    pub d_s: Option<f64>,
    #[serde(rename = "G_0", skip_serializing_if = "Option::is_none")]
    pub g_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_inf: Option<f64>,
    /// cells represented by one unit of dimensionless density; scales the
    /// per-cell rates `b` and `c` in physical units
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells_per_unit_density: Option<f64>,
}

/// Initial cell density `f_0(x)`, isotropic in velocity.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `(k m / pi) exp(-k |x - center|^2)`, so `int f dx = m` per direction
    Gaussian { center: [f64; 2], sharpness: f64, m: f64 },
    /// `value` on the closed disc
    Disc { center: [f64; 2], radius: f64, value: f64 },
    /// `value` on the closed rectangle
    Rectangle { min: [f64; 2], max: [f64; 2], value: f64 },
    Uniform { value: f64 },
}

impl DensitySpec {
    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            DensitySpec::Gaussian { center, sharpness, m } => {
                let d = p - Point::from(center);
                sharpness * m / PI * (-sharpness * d.norm_squared()).exp()
            }
            DensitySpec::Disc { center, radius, value } => {
                if (p - Point::from(center)).norm() <= radius {
                    value
                } else {
                    0.0
                }
            }
            DensitySpec::Rectangle { min, max, value } => {
                if p.x >= min[0] && p.x <= max[0] && p.y >= min[1] && p.y <= max[1] {
                    value
                } else {
                    0.0
                }
            }
            DensitySpec::Uniform { value } => value,
        }
    }
}

/// Multiplicative noise `1 + amplitude U(-1, 1)` per grid point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: f64,
    pub seed: u64,
}

impl Perturbation {
    /// One factor per mesh node in row-major order.
    pub fn factors(&self, count: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count)
            .map(|_| 1.0 + self.amplitude * rng.random_range(-1.0..=1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub density: DensitySpec,
    #[serde(rename = "N")]
    pub nutrient: f64,
    #[serde(rename = "S")]
    pub attractant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    /// final time in units of `t_bar`
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_every: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limiter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict_positivity: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawObserve {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_window: Option<[f64; 2]>,
}

/// Length and time scales turning table units into model units.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Nondimensionalization {
    /// millimetres
    pub x_bar: f64,
    /// seconds
    pub t_bar: f64,
}

impl Nondimensionalization {
    /// from micrometres per second
    pub fn speed(&self, um_per_s: f64) -> f64 {
        um_per_s * 1e-3 * self.t_bar / self.x_bar
    }

    /// from events per second
    pub fn rate(&self, per_s: f64) -> f64 {
        per_s * self.t_bar
    }

    /// from cm^2 per second
    pub fn diffusivity(&self, cm2_per_s: f64) -> f64 {
        cm2_per_s * 100.0 * self.t_bar / (self.x_bar * self.x_bar)
    }

    /// growth rate from a doubling time in hours
    pub fn doubling_rate(&self, hours: f64) -> f64 {
        LN_2 * self.t_bar / (hours * 3600.0)
    }
}

/// Dimensionless model parameters.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ModelParams {
    pub v0: f64,
    pub response: ResponseParams,
    pub growth: GrowthParams,
    pub nutrient: ScalarCoefficients,
    pub attractant: ScalarCoefficients,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunControls {
    pub t_end: f64,
    pub output_every: f64,
    pub cfl: f64,
    pub limiter: String,
    pub solver: String,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub strict_positivity: bool,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub raw: RawConfig,
    pub mesh: SpaceMesh,
    pub vgrid: VelocityGrid,
    pub scales: Option<Nondimensionalization>,
    pub params: ModelParams,
    pub run: RunControls,
    pub observe: ObservableFrame,
}

pub const DEFAULT_OUTPUT_EVERY: f64 = 0.1;
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

fn require(value: Option<f64>, key: &str) -> Result<f64> {
    let v = value.ok_or_else(|| Error::config(format!("parameters.{key}"), "missing required parameter"))?;
    if !v.is_finite() {
        return Err(Error::config(format!("parameters.{key}"), "must be finite"));
    }
    Ok(v)
}

fn nonnegative(v: f64, key: &str) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::config(key, format!("must be nonnegative, got {v}")));
    }
    Ok(v)
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::config(key, format!("must be positive, got {v}")));
    }
    Ok(v)
}

pub fn parse_config(text: &str) -> Result<RawConfig> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    validate_config(parse_config(&text)?)
}

/// Fill defaults, convert units once, and run the cross-field checks.
pub fn validate_config(raw: RawConfig) -> Result<ScenarioConfig> {
    let [x_min, x_max, y_min, y_max] = raw.mesh.bounds;
    let mesh = build_space_mesh(Bounds::new(x_min, x_max, y_min, y_max), raw.mesh.n_x, raw.mesh.n_y)?;
    let p = &raw.parameters;

    let scales = match raw.units {
        Units::Physical => Some(Nondimensionalization {
            x_bar: positive(require(p.x_bar, "x_bar")?, "parameters.x_bar")?,
            t_bar: positive(require(p.t_bar, "t_bar")?, "parameters.t_bar")?,
        }),
        Units::Dimensionless => None,
    };
    let speed = |v: f64| scales.map_or(v, |s| s.speed(v));
    let rate = |v: f64| scales.map_or(v, |s| s.rate(v));
    let diffusivity = |v: f64| scales.map_or(v, |s| s.diffusivity(v));

    let v0 = positive(speed(require(p.v0, "v0")?), "parameters.v0")?;
    let vgrid = build_velocity_grid(v0, raw.mesh.n_v)?;

    let psi_0 = positive(rate(require(p.psi_0, "psi_0")?), "parameters.psi_0")?;
    let mut chi = [0.0; 2];
    for (slot, (value, key)) in chi.iter_mut().zip([(p.chi_n, "chi_N"), (p.chi_s, "chi_S")]) {
        let v = require(value, key)?;
        if !(0.0..1.0).contains(&v) {
            return Err(Error::config(format!("parameters.{key}"), format!("must lie in [0, 1), got {v}")));
        }
        *slot = v;
    }
    let delta_n = positive(rate(require(p.delta_n, "delta_N")?), "parameters.delta_N")?;
    let delta_s = positive(rate(require(p.delta_s, "delta_S")?), "parameters.delta_S")?;

    let kappa = match raw.units {
        Units::Physical => positive(
            require(p.cells_per_unit_density, "cells_per_unit_density")?,
            "parameters.cells_per_unit_density",
        )?,
        Units::Dimensionless => {
            if p.cells_per_unit_density.is_some() {
                return Err(Error::config(
                    "parameters.cells_per_unit_density",
                    "only meaningful with physical units",
                ));
            }
            1.0
        }
    };
    let a = rate(nonnegative(require(p.a, "a")?, "parameters.a")?);
    let b = rate(nonnegative(require(p.b, "b")?, "parameters.b")?) * kappa;
    let c = rate(nonnegative(require(p.c, "c")?, "parameters.c")?) * kappa;
    let d_n = diffusivity(nonnegative(require(p.d_n, "D_N")?, "parameters.D_N")?);
    let d_s = diffusivity(nonnegative(require(p.d_s, "D_S")?, "parameters.D_S")?);

    let growth_rate = match (p.g_0, p.tau_2, p.r) {
        (Some(g_0), None, None) => {
            let sigma = positive(require(p.sigma, "sigma")?, "parameters.sigma")?;
            GrowthRate::Monod {
                g_0: rate(nonnegative(g_0, "parameters.G_0")?),
                sigma,
            }
        }
        (None, Some(tau), None) => {
            let tau = positive(tau, "parameters.tau_2")?;
            GrowthRate::Constant {
                r: scales.map_or(LN_2 / tau, |s| s.doubling_rate(tau)),
            }
        }
        (None, None, Some(r)) => GrowthRate::Constant {
            r: rate(nonnegative(r, "parameters.r")?),
        },
        (None, None, None) => {
            return Err(Error::config("parameters.tau_2", "give one of tau_2, r, or G_0 with sigma"));
        }
        _ => {
            return Err(Error::config("parameters.tau_2", "tau_2, r and G_0 are mutually exclusive"));
        }
    };
    if p.sigma.is_some() && p.g_0.is_none() {
        return Err(Error::config("parameters.sigma", "only used with G_0"));
    }
    let gamma = rate(nonnegative(p.gamma.unwrap_or(0.0), "parameters.gamma")?);
    let rho_inf = nonnegative(p.rho_inf.unwrap_or(0.0), "parameters.rho_inf")?;
    if gamma > 0.0 && p.rho_inf.is_none() {
        return Err(Error::config("parameters.rho_inf", "required when gamma > 0"));
    }

    let eps_c = raw.run.eps_c.unwrap_or(DEFAULT_CONCENTRATION_FLOOR);
    positive(eps_c, "run.eps_c")?;
    let params = ModelParams {
        v0,
        response: ResponseParams {
            psi_0,
            chi_n: chi[0],
            chi_s: chi[1],
            delta_n,
            delta_s,
            eps_c,
            coupling: raw.coupling,
        },
        growth: GrowthParams {
            rate: growth_rate,
            gamma,
            rho_inf,
        },
        nutrient: ScalarCoefficients {
            diffusion: d_n,
            decay: 0.0,
            production: 0.0,
            consumption: c,
        },
        attractant: ScalarCoefficients {
            diffusion: d_s,
            decay: a,
            production: b,
            consumption: 0.0,
        },
    };

    let r = &raw.run;
    let run = RunControls {
        t_end: positive(r.t_end, "run.t_end")?,
        output_every: positive(r.output_every.unwrap_or(DEFAULT_OUTPUT_EVERY), "run.output_every")?,
        cfl: r.cfl.unwrap_or(crate::kinetic::CFL),
        limiter: r.limiter.clone().unwrap_or_else(|| "van_leer".into()),
        solver: r.solver.clone().unwrap_or_else(|| "bicgstab".into()),
        solver_tol: positive(r.solver_tol.unwrap_or(DEFAULT_SOLVER_TOL), "run.solver_tol")?,
        solver_max_iter: r.solver_max_iter.unwrap_or(5000),
        strict_positivity: r.strict_positivity.unwrap_or(false),
    };
    if !(run.cfl > 0.0 && run.cfl <= 1.0) {
        return Err(Error::config("run.cfl", format!("must lie in (0, 1], got {}", run.cfl)));
    }
    crate::limiter::LimiterRegistry::default().get(&run.limiter)?;
    crate::linsolve::SolverRegistry::default().get(&run.solver)?;

    validate_initial(&raw.initial)?;

    let observe = {
        let o = raw.observe.clone().unwrap_or(RawObserve {
            center: None,
            section_axis: None,
            tail_window: None,
        });
        let window = o.tail_window.unwrap_or([0.3, 0.8]);
        if !(window[0] >= 0.0 && window[1] > window[0]) {
            return Err(Error::config("observe.tail_window", "need 0 <= lo < hi"));
        }
        ObservableFrame {
            center: o.center.map(Point::from).unwrap_or_else(|| mesh.bounds.center()),
            section_axis: o.section_axis.unwrap_or(Axis::X),
            tail_window: (window[0], window[1]),
        }
    };

    // the geometry must exist and accept its parameters
    crate::geometry::GeometryRegistry::default().build(&raw.geometry.kind, &raw.geometry.params, &mesh)?;

    Ok(ScenarioConfig {
        raw,
        mesh,
        vgrid,
        scales,
        params,
        run,
        observe,
    })
}

fn validate_initial(init: &InitialSpec) -> Result<()> {
    nonnegative(init.nutrient, "initial.N")?;
    nonnegative(init.attractant, "initial.S")?;
    match &init.density {
        DensitySpec::Gaussian { sharpness, m, .. } => {
            positive(*sharpness, "initial.density.sharpness")?;
            nonnegative(*m, "initial.density.m")?;
        }
        DensitySpec::Disc { radius, value, .. } => {
            positive(*radius, "initial.density.radius")?;
            nonnegative(*value, "initial.density.value")?;
        }
        DensitySpec::Rectangle { value, .. } | DensitySpec::Uniform { value } => {
            nonnegative(*value, "initial.density.value")?;
        }
    }
    if let Some(p) = init.perturbation {
        if !(0.0..1.0).contains(&p.amplitude) {
            return Err(Error::config("initial.perturbation.amplitude", "must lie in [0, 1)"));
        }
    }
    Ok(())
}
