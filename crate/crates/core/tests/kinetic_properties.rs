use chemotaxis_core::boundary::BoundaryOperator;
use chemotaxis_core::classify::{classify_points, GridClassification};
use chemotaxis_core::diagnostics::total_mass;
use chemotaxis_core::geometry::mesh_frame;
use chemotaxis_core::kinetic::{
    stable_time_step, step_kinetic, tumbling_rates, Coupling, GrowthParams, KineticField, ResponseParams, SignalPair,
    StepInputs,
};
use chemotaxis_core::limiter::{LimiterRegistry, SlopeLimiter, VanLeer};
use chemotaxis_core::mesh::{build_space_mesh, build_velocity_grid, Bounds, SpaceMesh, VelocityGrid};
use chemotaxis_core::reaction_diffusion::density_moment;
use chemotaxis_core::Point;
use proptest::prelude::*;

fn unit_box(n: usize) -> GridClassification {
    let mesh = build_space_mesh(Bounds::square(1.0), n, n).unwrap();
    classify_points(&mesh_frame(&mesh), &mesh).unwrap()
}

fn response() -> ResponseParams {
    ResponseParams {
        psi_0: 3.0,
        chi_n: 0.6,
        chi_s: 0.2,
        delta_n: 0.05,
        delta_s: 0.05,
        eps_c: 1e-10,
        coupling: Coupling::Both,
    }
}

fn padded(mesh: &SpaceMesh, u: impl Fn(Point) -> f64) -> Vec<f64> {
    (0..mesh.padded_len())
        .map(|k| {
            let (ix, iy) = mesh.unflat(k);
            u(mesh.point(ix, iy))
        })
        .collect()
}

/// One explicit step with the specular ghost fill, as in the driver.
fn step(
    f: &mut KineticField,
    class: &GridClassification,
    vgrid: &VelocityGrid,
    boundary: &BoundaryOperator,
    lambda: &[f64],
    dt: f64,
) -> chemotaxis_core::Result<usize> {
    boundary.fill_kinetic_ghosts(&mut f.values);
    let rho = density_moment(f, class);
    let zeros = vec![0.0; class.mesh.padded_len()];
    let growth = GrowthParams::none();
    let inputs = StepInputs {
        lambda,
        rho: &rho,
        nutrient: &zeros,
        growth: &growth,
        dt,
        strict_positivity: true,
    };
    step_kinetic(f, inputs, class, vgrid, &VanLeer).map(|r| r.clamped)
}

#[derive(Debug, Clone)]
struct Bump {
    center: (f64, f64),
    width: f64,
    amplitude: f64,
    tilt: f64,
    heading: f64,
}

fn bump() -> impl Strategy<Value = Bump> {
    (-0.8f64..0.8, -0.8f64..0.8, 0.15f64..0.6, 0.0f64..2.0, 0.0f64..1.0, 0.0f64..6.3).prop_map(
        |(x, y, width, amplitude, tilt, heading)| Bump {
            center: (x, y),
            width,
            amplitude,
            tilt,
            heading,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn smooth_fields_stay_nonnegative(
        bumps in proptest::collection::vec(bump(), 1..4),
        signal in (-3.0f64..3.0, -3.0f64..3.0, 0.0f64..0.5),
    ) {
        let class = unit_box(24);
        let mesh = &class.mesh;
        let vgrid = build_velocity_grid(1.0, 16).unwrap();
        let boundary = BoundaryOperator::new(&class, &vgrid).unwrap();
        let params = response();
        let dt = stable_time_step(mesh, &vgrid, &params);
        let mut f = KineticField::from_fn(&class, &vgrid, |p, v| {
            let th = v.y.atan2(v.x);
            bumps
                .iter()
                .map(|b| {
                    let d2 = (p.x - b.center.0).powi(2) + (p.y - b.center.1).powi(2);
                    b.amplitude * (-d2 / (b.width * b.width)).exp() * (1.0 + b.tilt * (th - b.heading).cos())
                })
                .sum()
        });
        // smooth static signals give tumbling rates spread over their full range
        let (gx, gy, wave) = signal;
        let n = padded(mesh, |p| (gx * p.x + wave * (3.0 * p.y).sin()).exp());
        let s = padded(mesh, |p| (gy * p.y - wave * (2.0 * p.x).cos()).exp());
        let lambda = tumbling_rates(
            &params,
            SignalPair { half: &n, prev: &n },
            SignalPair { half: &s, prev: &s },
            dt,
            &class,
            &vgrid,
        );
        for _ in 0..3 {
            let clamped = step(&mut f, &class, &vgrid, &boundary, &lambda, dt);
            prop_assert_eq!(clamped.ok(), Some(0));
        }
    }
}

#[test]
fn mass_budget_on_the_square() {
    let class = unit_box(40);
    let mesh = &class.mesh;
    let vgrid = build_velocity_grid(1.0, 16).unwrap();
    let boundary = BoundaryOperator::new(&class, &vgrid).unwrap();
    let params = response();
    let dt = stable_time_step(mesh, &vgrid, &params);
    let mut f = KineticField::from_fn(&class, &vgrid, |p, v| {
        (-8.0 * ((p.x - 0.3).powi(2) + p.y * p.y)).exp() * (1.0 + 0.8 * v.x)
    });
    let n = padded(mesh, |p| 1.0 + 0.5 * p.x);
    let s = padded(mesh, |p| (2.0 * p.y).exp());
    let lambda = tumbling_rates(
        &params,
        SignalPair { half: &n, prev: &n },
        SignalPair { half: &s, prev: &s },
        dt,
        &class,
        &vgrid,
    );
    let m0 = total_mass(&f, &class);
    for _ in 0..100 {
        assert_eq!(step(&mut f, &class, &vgrid, &boundary, &lambda, dt).unwrap(), 0);
    }
    let m1 = total_mass(&f, &class);
    assert!(((m1 - m0) / m0).abs() <= 1e-10, "drift {:e}", (m1 - m0) / m0);
}

#[test]
fn uniform_isotropic_field_stays_uniform() {
    let class = unit_box(20);
    let mesh = &class.mesh;
    let vgrid = build_velocity_grid(1.0, 16).unwrap();
    let boundary = BoundaryOperator::new(&class, &vgrid).unwrap();
    let params = response();
    let dt = stable_time_step(mesh, &vgrid, &params);
    let n = vec![0.7; mesh.padded_len()];
    let s = vec![0.2; mesh.padded_len()];
    let lambda = tumbling_rates(
        &params,
        SignalPair { half: &n, prev: &n },
        SignalPair { half: &s, prev: &s },
        dt,
        &class,
        &vgrid,
    );
    let mut f = KineticField::from_fn(&class, &vgrid, |_, _| 0.37);
    for _ in 0..20 {
        step(&mut f, &class, &vgrid, &boundary, &lambda, dt).unwrap();
    }
    let first = f.at(0, 0, 0);
    for &(ix, iy) in &class.interior {
        assert!(f.point_slice(ix, iy).iter().all(|&v| v == first));
    }
}

/// Standalone periodic 1D MUSCL step, the reference for the 2D scheme.
fn step_1d(u: &[f64], speed: f64, dt: f64, dx: f64, limiter: &dyn SlopeLimiter) -> Vec<f64> {
    let n = u.len() as isize;
    let at = |i: isize| u[i.rem_euclid(n) as usize];
    let face = |i: isize| {
        // state on the face between i and i + 1
        if speed > 0.0 {
            at(i) + 0.5 * limiter.limit(at(i) - at(i - 1), at(i + 1) - at(i))
        } else {
            at(i + 1) - 0.5 * limiter.limit(at(i + 1) - at(i), at(i + 2) - at(i + 1))
        }
    };
    (0..n)
        .map(|i| u[i as usize] - dt * speed * (face(i) - face(i - 1)) / dx)
        .collect()
}

#[test]
fn free_transport_reduces_to_1d_scheme() {
    let registry = LimiterRegistry::default();
    let profiles: [(&str, usize, fn(f64) -> f64); 3] = [
        ("van_leer", 0, |x| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin()),
        ("minmod", 9, |x| if (0.3..0.6).contains(&x) { 2.0 } else { 0.5 }),
        ("mc", 12, |x| (-((x - 0.4) / 0.08f64).powi(2)).exp()),
    ];
    for (name, j, profile) in profiles {
        let limiter = registry.get(name).unwrap();
        let n = 50usize;
        let h = 1.0 / n as f64;
        let mesh = build_space_mesh(Bounds::new(0.0, 1.0, 0.0, 2.0 * h), n, 2).unwrap();
        let class = classify_points(&mesh_frame(&mesh), &mesh).unwrap();
        let vgrid = build_velocity_grid(1.0, 16).unwrap();
        let n_v = vgrid.n_v;
        let speed = vgrid.velocity(j).x;
        let dt = 0.4 * h;
        let mut f = KineticField::zeros(&mesh, &vgrid);
        let mut u: Vec<f64> = (0..n).map(|i| profile(i as f64 * h)).collect();
        for ix in 0..n as isize {
            f.values[mesh.flat(ix, 1) * n_v + j] = u[ix as usize];
        }
        let lambda = vec![0.0; f.values.len()];
        let zeros = vec![0.0; mesh.padded_len()];
        let growth = GrowthParams::none();
        for _ in 0..40 {
            for k in 0..mesh.padded_len() {
                let (ix, _) = mesh.unflat(k);
                let src = mesh.flat(ix.rem_euclid(n as isize), 1);
                f.values[k * n_v + j] = f.values[src * n_v + j];
            }
            let inputs = StepInputs {
                lambda: &lambda,
                rho: &zeros,
                nutrient: &zeros,
                growth: &growth,
                dt,
                strict_positivity: false,
            };
            step_kinetic(&mut f, inputs, &class, &vgrid, limiter.as_ref()).unwrap();
            u = step_1d(&u, speed, dt, mesh.dx, limiter.as_ref());
        }
        for ix in 0..n as isize {
            let v = f.values[mesh.flat(ix, 1) * n_v + j];
            assert!((v - u[ix as usize]).abs() <= 1e-14, "{name}: node {ix}: {v} vs {}", u[ix as usize]);
        }
    }
}
