//! Explicit step of the kinetic equation: limited upwind transport in flux
//! form, the velocity-jump tumbling operator with log-sensing rates, growth
//! and the optional quiescence sink.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::GridClassification;
use crate::error::{Error, Result};
use crate::limiter::SlopeLimiter;
use crate::mesh::{SpaceMesh, VelocityGrid};
use crate::Point;

pub const CFL: f64 = 0.45;
/// Upper bound on `dt * (largest tumbling rate)`.
pub const TUMBLING_CAP: f64 = 0.9;
pub const DEFAULT_CONCENTRATION_FLOOR: f64 = 1e-10;

/// Cell density on the padded grid, velocity index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    pub mesh: SpaceMesh,
    pub n_v: usize,
    pub dv: f64,
    pub values: Vec<f64>,
}

impl KineticField {
    pub fn zeros(mesh: &SpaceMesh, vgrid: &VelocityGrid) -> Self {
        Self {
            mesh: mesh.clone(),
            n_v: vgrid.n_v,
            dv: vgrid.dv,
            values: vec![0.0; mesh.padded_len() * vgrid.n_v],
        }
    }

    /// Field with `f(x, v)` at interior points and zero elsewhere.
    pub fn from_fn(
        class: &GridClassification,
        vgrid: &VelocityGrid,
        f: impl Fn(Point, Point) -> f64,
    ) -> Self {
        let mut field = Self::zeros(&class.mesh, vgrid);
        let velocities = vgrid.velocities();
        for &(ix, iy) in &class.interior {
            let p = class.mesh.point(ix, iy);
            let k = class.mesh.flat(ix, iy);
            for (j, v) in velocities.iter().enumerate() {
                field.values[k * field.n_v + j] = f(p, *v);
            }
        }
        field
    }

    #[inline]
    pub fn at(&self, ix: isize, iy: isize, j: usize) -> f64 {
        self.values[self.mesh.flat(ix, iy) * self.n_v + j]
    }

    pub fn point_slice(&self, ix: isize, iy: isize) -> &[f64] {
        let k = self.mesh.flat(ix, iy);
        &self.values[k * self.n_v..(k + 1) * self.n_v]
    }
}

/// Which chemical signals modulate the tumbling rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `lambda = (psi_N + psi_S) / 2`
    #[default]
    Both,
    /// `lambda = psi_S`
    ChemoattractantOnly,
    /// `lambda = psi_N`
    NutrientOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseParams {
    pub psi_0: f64,
    pub chi_n: f64,
    pub chi_s: f64,
    pub delta_n: f64,
    pub delta_s: f64,
    pub eps_c: f64,
    pub coupling: Coupling,
}

impl ResponseParams {
    pub fn max_rate(&self) -> f64 {
        let chi = match self.coupling {
            Coupling::Both => self.chi_n.max(self.chi_s),
            Coupling::ChemoattractantOnly => self.chi_s,
            Coupling::NutrientOnly => self.chi_n,
        };
        self.psi_0 * (1.0 + chi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GrowthRate {
    Constant { r: f64 },
    Monod { g_0: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub rate: GrowthRate,
    /// quiescence sink strength; zero disables it
    pub gamma: f64,
    pub rho_inf: f64,
}

impl GrowthParams {
    pub fn none() -> Self {
        Self {
            rate: GrowthRate::Constant { r: 0.0 },
            gamma: 0.0,
            rho_inf: 0.0,
        }
    }

    #[inline]
    pub fn rate(&self, nutrient: f64) -> f64 {
        match self.rate {
            GrowthRate::Constant { r } => r,
            GrowthRate::Monod { g_0, sigma } => g_0 * nutrient / (sigma + nutrient),
        }
    }
}

#[inline]
pub fn response(x: f64, psi_0: f64, chi: f64, delta: f64) -> f64 {
    psi_0 * (1.0 - chi * (x / delta).tanh())
}

/// Material derivative of `log C` along `v`, with a floor on `C`.
#[inline]
pub fn log_sensing_argument(c_half: f64, dc_dt: f64, grad: Point, v: Point, eps_c: f64) -> f64 {
    let num = dc_dt + v.dot(&grad);
    if c_half < eps_c && num.abs() < eps_c {
        return 0.0;
    }
    num / c_half.max(eps_c)
}

/// Centred-difference gradient of a padded scalar field.
#[inline]
pub fn centered_gradient(u: &[f64], mesh: &SpaceMesh, ix: isize, iy: isize) -> Point {
    Point::new(
        (u[mesh.flat(ix + 1, iy)] - u[mesh.flat(ix - 1, iy)]) / (2.0 * mesh.dx),
        (u[mesh.flat(ix, iy + 1)] - u[mesh.flat(ix, iy - 1)]) / (2.0 * mesh.dy),
    )
}

/// Concentrations at the two half steps around the kinetic time level.
#[derive(Debug, Clone, Copy)]
pub struct SignalPair<'a> {
    pub half: &'a [f64],
    pub prev: &'a [f64],
}

/// Tumbling rates `lambda[point][velocity]` at interior points (padded
/// layout, zero elsewhere).
pub fn tumbling_rates(
    params: &ResponseParams,
    nutrient: SignalPair<'_>,
    attractant: SignalPair<'_>,
    dt: f64,
    class: &GridClassification,
    vgrid: &VelocityGrid,
) -> Vec<f64> {
    let mesh = &class.mesh;
    let n_v = vgrid.n_v;
    let velocities = vgrid.velocities();
    let mut lambda = vec![0.0; mesh.padded_len() * n_v];
    let row = mesh.padded_nx() * n_v;
    lambda
        .par_chunks_mut(row)
        .enumerate()
        .for_each(|(r, chunk)| {
            let iy = r as isize - crate::mesh::GHOST_LAYERS as isize;
            for ix in 0..=mesh.n_x as isize {
                if !class.is_interior(ix, iy) {
                    continue;
                }
                let k = mesh.flat(ix, iy);
                let local = (ix + crate::mesh::GHOST_LAYERS as isize) as usize * n_v;
                let sensed = |s: SignalPair<'_>| {
                    (
                        s.half[k],
                        (s.half[k] - s.prev[k]) / dt,
                        centered_gradient(s.half, mesh, ix, iy),
                    )
                };
                let (n_c, n_t, n_g) = sensed(nutrient);
                let (s_c, s_t, s_g) = sensed(attractant);
                for (j, v) in velocities.iter().enumerate() {
                    let psi_n = || {
                        let x = log_sensing_argument(n_c, n_t, n_g, *v, params.eps_c);
                        response(x, params.psi_0, params.chi_n, params.delta_n)
                    };
                    let psi_s = || {
                        let x = log_sensing_argument(s_c, s_t, s_g, *v, params.eps_c);
                        response(x, params.psi_0, params.chi_s, params.delta_s)
                    };
                    chunk[local + j] = match params.coupling {
                        Coupling::Both => 0.5 * (psi_n() + psi_s()),
                        Coupling::ChemoattractantOnly => psi_s(),
                        Coupling::NutrientOnly => psi_n(),
                    };
                }
            }
        });
    lambda
}

/// `Q_j = (dv / 2 pi) sum_l lambda_l f_l - lambda_j f_j` at one point.
#[inline]
pub fn tumbling_operator(f: &[f64], lambda: &[f64], dv: f64, out: &mut [f64]) {
    let gain = dv / (2.0 * std::f64::consts::PI) * f.iter().zip(lambda).map(|(a, b)| a * b).sum::<f64>();
    for ((q, fj), lj) in out.iter_mut().zip(f).zip(lambda) {
        *q = gain - lj * fj;
    }
}

#[inline]
fn face_state(limiter: &dyn SlopeLimiter, vel: f64, fm1: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    if vel > 0.0 {
        f0 + 0.5 * limiter.limit(f0 - fm1, f1 - f0)
    } else {
        f1 - 0.5 * limiter.limit(f1 - f0, f2 - f1)
    }
}

/// Flux difference `div(v f)` at interior points for every velocity (padded
/// layout, zero elsewhere). Ghost layers must be filled.
pub fn transport_term(
    f: &KineticField,
    vgrid: &VelocityGrid,
    class: &GridClassification,
    limiter: &dyn SlopeLimiter,
) -> Vec<f64> {
    let mesh = &class.mesh;
    let n_v = vgrid.n_v;
    let velocities = vgrid.velocities();
    let mut out = vec![0.0; mesh.padded_len() * n_v];
    let row = mesh.padded_nx() * n_v;
    let g = crate::mesh::GHOST_LAYERS as isize;
    out.par_chunks_mut(row).enumerate().for_each(|(r, chunk)| {
        let iy = r as isize - g;
        for ix in 0..=mesh.n_x as isize {
            if !class.is_interior(ix, iy) {
                continue;
            }
            let local = (ix + g) as usize * n_v;
            for (j, v) in velocities.iter().enumerate() {
                let at = |dx: isize, dy: isize| f.at(ix + dx, iy + dy, j);
                let mut t = 0.0;
                if v.x != 0.0 {
                    let right = face_state(limiter, v.x, at(-1, 0), at(0, 0), at(1, 0), at(2, 0));
                    let left = face_state(limiter, v.x, at(-2, 0), at(-1, 0), at(0, 0), at(1, 0));
                    t += v.x * (right - left) / mesh.dx;
                }
                if v.y != 0.0 {
                    let top = face_state(limiter, v.y, at(0, -1), at(0, 0), at(0, 1), at(0, 2));
                    let bottom = face_state(limiter, v.y, at(0, -2), at(0, -1), at(0, 0), at(0, 1));
                    t += v.y * (top - bottom) / mesh.dy;
                }
                chunk[local + j] = t;
            }
        }
    });
    out
}

/// Largest stable time step: CFL on transport and a cap on the explicit
/// tumbling loss.
pub fn stable_time_step(mesh: &SpaceMesh, vgrid: &VelocityGrid, response: &ResponseParams) -> f64 {
    time_step_with_cfl(mesh, vgrid, response, CFL)
}

pub fn time_step_with_cfl(mesh: &SpaceMesh, vgrid: &VelocityGrid, response: &ResponseParams, cfl: f64) -> f64 {
    let transport = cfl * mesh.h_min() / vgrid.v0;
    let tumbling = TUMBLING_CAP / response.max_rate();
    transport.min(tumbling)
}

/// Outcome of one kinetic step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    /// interior values clamped from below at zero
    pub clamped: usize,
    /// most negative value before clamping
    pub min_value: f64,
}

/// Inputs of one explicit step besides the field itself.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    /// tumbling rates at the half step
    pub lambda: &'a [f64],
    /// density moment at the current step
    pub rho: &'a [f64],
    /// nutrient at the half step (for Monod growth)
    pub nutrient: &'a [f64],
    pub growth: &'a GrowthParams,
    pub dt: f64,
    /// treat any negative value as an error instead of clamping it
    pub strict_positivity: bool,
}

/// Advance interior values of `f` by one step. Ghost layers of `f` must hold
/// the specular fill for the current time level.
pub fn step_kinetic(
    f: &mut KineticField,
    inputs: StepInputs<'_>,
    class: &GridClassification,
    vgrid: &VelocityGrid,
    limiter: &dyn SlopeLimiter,
) -> Result<StepReport> {
    let transport = transport_term(f, vgrid, class, limiter);
    let mesh = &class.mesh;
    let n_v = f.n_v;
    let dv = f.dv;
    let dt = inputs.dt;
    let growth = inputs.growth;
    let row = mesh.padded_nx() * n_v;
    let g = crate::mesh::GHOST_LAYERS as isize;
    let old = f.values.clone();
    let reports: Vec<StepReport> = f
        .values
        .par_chunks_mut(row)
        .enumerate()
        .map(|(r, chunk)| {
            let iy = r as isize - g;
            let mut report = StepReport::default();
            let mut q = vec![0.0; n_v];
            for ix in 0..=mesh.n_x as isize {
                if !class.is_interior(ix, iy) {
                    continue;
                }
                let k = mesh.flat(ix, iy);
                let span = k * n_v..(k + 1) * n_v;
                tumbling_operator(&old[span.clone()], &inputs.lambda[span.clone()], dv, &mut q);
                let rate = growth.rate(inputs.nutrient[k]);
                let rho = inputs.rho[k];
                let sink = if growth.gamma > 0.0 && rho > growth.rho_inf && rho > 0.0 {
                    growth.gamma / rho
                } else {
                    0.0
                };
                let local = (ix + g) as usize * n_v;
                for j in 0..n_v {
                    let fj = old[k * n_v + j];
                    let mut v = fj + dt * (q[j] - transport[k * n_v + j] + (rate - sink) * fj);
                    if v < 0.0 {
                        report.min_value = report.min_value.min(v);
                        report.clamped += 1;
                        v = 0.0;
                    }
                    chunk[local + j] = v;
                }
            }
            report
        })
        .collect();
    let mut total = StepReport::default();
    for r in reports {
        total.clamped += r.clamped;
        total.min_value = total.min_value.min(r.min_value);
    }
    if inputs.strict_positivity && total.clamped > 0 {
        return Err(Error::Numerical(format!(
            "negative kinetic density {:e} at {} points",
            total.min_value, total.clamped
        )));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify_points;
    use crate::geometry::mesh_frame;
    use crate::limiter::{LimiterRegistry, VanLeer};
    use crate::mesh::{build_space_mesh, build_velocity_grid, Bounds};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn response_values() {
        assert_eq!(response(0.0, 3.0, 0.6, 0.05), 3.0);
        assert_relative_eq!(response(1e3, 3.0, 0.6, 0.05), 3.0 * 0.4);
        // tanh(1) from its exponential definition
        let e2 = (2.0f64).exp();
        let tanh1 = (e2 - 1.0) / (e2 + 1.0);
        let expect = 3.0 * (1.0 - 0.6 * tanh1);
        assert_relative_eq!(response(0.05, 3.0, 0.6, 0.05), expect, max_relative = 1e-15);
        // the rounded reference value 1.6289 is only good to about 2e-4
        assert!((expect - 1.6289).abs() < 5e-4);
    }

    #[test]
    fn log_sensing_floor() {
        let v = Point::new(1.0, 0.0);
        assert_eq!(log_sensing_argument(0.0, 0.0, Point::zeros(), v, 1e-10), 0.0);
        assert_eq!(log_sensing_argument(2.0, 0.0, Point::zeros(), v, 1e-10), 0.0);
        assert_relative_eq!(log_sensing_argument(2.0, 1.0, Point::new(3.0, 9.0), v, 1e-10), 2.0);
    }

    #[test]
    fn log_sensing_of_exponential_profile() {
        let mesh = build_space_mesh(Bounds::square(1.0), 64, 64).unwrap();
        let k = Point::new(1.5, -0.7);
        let mut u = vec![0.0; mesh.padded_len()];
        for iy in -2..=66 {
            for ix in -2..=66 {
                u[mesh.flat(ix, iy)] = k.dot(&mesh.point(ix, iy)).exp();
            }
        }
        let v = Point::new(1.0, 0.0);
        for (ix, iy) in [(10, 10), (32, 40), (60, 3)] {
            let x = log_sensing_argument(u[mesh.flat(ix, iy)], 0.0, centered_gradient(&u, &mesh, ix, iy), v, 1e-10);
            // centred difference of e^{kx}: k * sinh(k h)/(k h) exactly
            let exact = k.x * (k.x * mesh.dx).sinh() / (k.x * mesh.dx);
            assert_relative_eq!(x, exact, max_relative = 1e-12);
            assert!((x - k.x).abs() <= k.x.abs().powi(3) * mesh.dx * mesh.dx);
        }
    }

    #[test]
    fn two_velocity_hand_computation() {
        let mut q = [0.0; 2];
        tumbling_operator(&[4.0, 2.0], &[1.0, 3.0], std::f64::consts::PI, &mut q);
        assert_relative_eq!(q[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(q[1], -1.0, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn tumbling_null_sum(
            n_v in prop_oneof![Just(2usize), Just(8), Just(64)],
            seed in proptest::collection::vec(0.0f64..1.0, 128),
        ) {
            let vgrid = build_velocity_grid(1.0, n_v).unwrap();
            let f: Vec<f64> = seed[..n_v].iter().map(|s| 5.0 * s).collect();
            let lambda: Vec<f64> = seed[64..64 + n_v].iter().map(|s| 0.1 + 3.0 * s).collect();
            let mut q = vec![0.0; n_v];
            tumbling_operator(&f, &lambda, vgrid.dv, &mut q);
            let total = vgrid.dv * q.iter().sum::<f64>();
            let scale = lambda.iter().cloned().fold(0.0, f64::max) * f.iter().cloned().fold(0.0, f64::max);
            prop_assert!(total.abs() <= 1e-13 * scale * 2.0 * std::f64::consts::PI);
        }
    }

    fn box_class(n: usize) -> GridClassification {
        let mesh = build_space_mesh(Bounds::square(0.25), n, n).unwrap();
        classify_points(&mesh_frame(&mesh), &mesh).unwrap()
    }

    #[test]
    fn constant_and_linear_transport() {
        let class = box_class(20);
        let mesh = &class.mesh;
        let vgrid = build_velocity_grid(1.0, 8).unwrap();
        let mut f = KineticField::zeros(mesh, &vgrid);
        for k in 0..mesh.padded_len() {
            let (ix, iy) = mesh.unflat(k);
            for j in 0..8 {
                f.values[k * 8 + j] = 2.0 + 0.3 * mesh.x(ix) - 0.1 * mesh.y(iy);
            }
        }
        let t = transport_term(&f, &vgrid, &class, &VanLeer);
        for &(ix, iy) in &class.interior {
            for j in 0..8 {
                let v = vgrid.velocity(j);
                let expect = 0.3 * v.x - 0.1 * v.y;
                assert!((t[mesh.flat(ix, iy) * 8 + j] - expect).abs() < 1e-12);
            }
        }
        f.values.iter_mut().for_each(|v| *v = 1.5);
        let t = transport_term(&f, &vgrid, &class, &VanLeer);
        assert!(t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_growth_and_sink() {
        let class = box_class(4);
        let mesh = &class.mesh;
        let vgrid = build_velocity_grid(1.0, 4).unwrap();
        let mut f = KineticField::zeros(mesh, &vgrid);
        f.values.iter_mut().for_each(|v| *v = 1.0);
        let lambda = vec![2.0; f.values.len()];
        let rho = vec![4.0 * vgrid.dv; mesh.padded_len()];
        let nutrient = vec![0.0; mesh.padded_len()];
        let growth = GrowthParams {
            rate: GrowthRate::Constant { r: 0.5 },
            gamma: 0.0,
            rho_inf: 0.0,
        };
        let inputs = StepInputs {
            lambda: &lambda,
            rho: &rho,
            nutrient: &nutrient,
            growth: &growth,
            dt: 0.1,
            strict_positivity: true,
        };
        step_kinetic(&mut f, inputs, &class, &vgrid, &VanLeer).unwrap();
        assert_relative_eq!(f.at(2, 2, 1), 1.05, max_relative = 1e-15);

        // sink: density 2 pi above threshold 1 loses gamma dt per unit time
        let sink = GrowthParams {
            rate: GrowthRate::Constant { r: 0.0 },
            gamma: 0.5,
            rho_inf: 1.0,
        };
        f.values.iter_mut().for_each(|v| *v = 1.0);
        let rho = vec![2.0 * std::f64::consts::PI; mesh.padded_len()];
        step_kinetic(
            &mut f,
            StepInputs { growth: &sink, rho: &rho, ..inputs },
            &class,
            &vgrid,
            &VanLeer,
        )
        .unwrap();
        let rho_new: f64 = vgrid.dv * f.point_slice(2, 2).iter().sum::<f64>();
        assert_relative_eq!(rho_new, 2.0 * std::f64::consts::PI - 0.5 * 0.1, max_relative = 1e-14);
    }

    #[test]
    fn sink_heaviside_is_strict() {
        let g = GrowthParams {
            rate: GrowthRate::Monod { g_0: 2.0, sigma: 1.0 },
            gamma: 1.0,
            rho_inf: 3.0,
        };
        assert_relative_eq!(g.rate(1.0), 1.0);
        let class = box_class(4);
        let vgrid = build_velocity_grid(1.0, 4).unwrap();
        let mut f = KineticField::zeros(&class.mesh, &vgrid);
        f.values.iter_mut().for_each(|v| *v = 3.0 / (4.0 * vgrid.dv));
        let rho = vec![3.0; class.mesh.padded_len()];
        let nutrient = vec![0.0; class.mesh.padded_len()];
        let lambda = vec![1.0; f.values.len()];
        let before = f.at(1, 1, 0);
        step_kinetic(
            &mut f,
            StepInputs {
                lambda: &lambda,
                rho: &rho,
                nutrient: &nutrient,
                growth: &g,
                dt: 0.1,
                strict_positivity: true,
            },
            &class,
            &vgrid,
            &VanLeer,
        )
        .unwrap();
        // rho == rho_inf: no sink, zero nutrient: no growth
        assert_eq!(f.at(1, 1, 0), before);
    }

    #[test]
    fn time_step_rule() {
        let mesh = build_space_mesh(Bounds::square(0.25), 20, 20).unwrap();
        let vgrid = build_velocity_grid(1.0, 16).unwrap();
        let mut p = ResponseParams {
            psi_0: 120.0,
            chi_n: 0.0,
            chi_s: 0.5,
            delta_n: 2.0,
            delta_s: 2.0,
            eps_c: 1e-10,
            coupling: Coupling::Both,
        };
        assert_relative_eq!(stable_time_step(&mesh, &vgrid, &p), 0.9 / 180.0);
        p.psi_0 = 1.0;
        assert_relative_eq!(stable_time_step(&mesh, &vgrid, &p), 0.45 / 40.0);
    }

    #[test]
    fn every_registered_limiter_is_exact_on_linears() {
        let class = box_class(12);
        let vgrid = build_velocity_grid(1.0, 4).unwrap();
        let mut f = KineticField::zeros(&class.mesh, &vgrid);
        for k in 0..class.mesh.padded_len() {
            let (ix, _) = class.mesh.unflat(k);
            for j in 0..4 {
                f.values[k * 4 + j] = 1.0 + class.mesh.x(ix);
            }
        }
        let reg = LimiterRegistry::default();
        for name in ["van_leer", "minmod", "mc"] {
            let t = transport_term(&f, &vgrid, &class, reg.get(name).unwrap().as_ref());
            let k = class.mesh.flat(6, 6);
            for j in 0..4 {
                assert!((t[k * 4 + j] - vgrid.velocity(j).x).abs() < 1e-12);
            }
        }
    }
}
