//! The staggered time loop: densities at integer levels, scalars at half
//! levels.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::boundary::BoundaryOperator;
use crate::classify::{classify_points, GridClassification};
use crate::config::ScenarioConfig;
use crate::diagnostics::{ObservableRow, ObservableSeries};
use crate::error::{Error, Result};
use crate::geometry::{GeometryRegistry, SharedShape};
use crate::kinetic::{step_kinetic, time_step_with_cfl, tumbling_rates, KineticField, SignalPair, StepInputs};
use crate::limiter::{LimiterRegistry, SlopeLimiter};
use crate::linsolve::{LinearSolver, SolverRegistry};
use crate::reaction_diffusion::{
    assemble_and_solve, density_moment, DiffusionOperator, ScalarField, ScalarKind, SolveControls,
};

/// Counters accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct RunStats {
    pub steps: u64,
    pub kinetic_clamped: u64,
    /// most negative interior value seen before clamping
    pub most_negative: f64,
    pub scalar_clipped: u64,
    pub max_solver_iterations: u64,
    pub max_solver_residual: f64,
}

/// What an observer sees at each output time.
pub struct Snapshot<'a> {
    pub index: usize,
    pub step: u64,
    pub t: f64,
    pub f: &'a KineticField,
    pub rho: &'a [f64],
    /// scalars lag the density by half a step
    pub nutrient: &'a [f64],
    pub attractant: &'a [f64],
    pub class: &'a GridClassification,
    pub row: ObservableRow,
    pub write_frame: bool,
}

pub trait RunObserver {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()>;
}

/// Observer that only keeps the observable series.
#[derive(Debug, Default)]
pub struct SeriesRecorder {
    pub series: ObservableSeries,
}

impl RunObserver for SeriesRecorder {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        self.series.push(snap.row)
    }
}

pub struct Simulation {
    pub config: ScenarioConfig,
    pub shape: SharedShape,
    pub class: GridClassification,
    pub boundary: BoundaryOperator,
    pub diffusion: DiffusionOperator,
    limiter: Arc<dyn SlopeLimiter>,
    solver: Arc<dyn LinearSolver>,
    pub dt: f64,
    pub steps_per_output: u64,
    pub total_steps: u64,
    pub step: u64,
    pub f: KineticField,
    pub nutrient: ScalarField,
    pub attractant: ScalarField,
    pub stats: RunStats,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let shape = GeometryRegistry::default().build(&config.raw.geometry.kind, &config.raw.geometry.params, &config.mesh)?;
        let class = classify_points(shape.as_ref(), &config.mesh)?;
        if class.interior_count() == 0 {
            return Err(Error::config("geometry", "no mesh node lies inside the domain"));
        }
        let boundary = BoundaryOperator::new(&class, &config.vgrid)?;
        let diffusion = DiffusionOperator::new(&class, &boundary);
        let limiter = LimiterRegistry::default().get(&config.run.limiter)?;
        let solver = SolverRegistry::default().get(&config.run.solver)?;

        // shrink the stable step so that outputs land exactly on steps
        let dt_max = time_step_with_cfl(&config.mesh, &config.vgrid, &config.params.response, config.run.cfl);
        let every = config.run.output_every;
        let steps_per_output = (every / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as u64;
        let dt = every / steps_per_output as f64;
        let total_steps = (config.run.t_end / dt * (1.0 - 1e-12)).ceil() as u64;

        let init = &config.raw.initial;
        let mesh = &config.mesh;
        let factors = init.perturbation.map(|p| p.factors((mesh.n_x + 1) * (mesh.n_y + 1)));
        let mut f = KineticField::from_fn(&class, &config.vgrid, |p, _| init.density.eval(p));
        if let Some(factors) = factors {
            for &(ix, iy) in &class.interior {
                let k = mesh.flat(ix, iy);
                let scale = factors[iy as usize * (mesh.n_x + 1) + ix as usize];
                f.values[k * f.n_v..(k + 1) * f.n_v].iter_mut().for_each(|v| *v *= scale);
            }
        }
        let nutrient = ScalarField::uniform(ScalarKind::Nutrient, &class, init.nutrient);
        let attractant = ScalarField::uniform(ScalarKind::Chemoattractant, &class, init.attractant);
        log::info!(
            "{}: {} interior, {} ghosts, dt = {dt:.3e}, {total_steps} steps",
            config.raw.name,
            class.interior_count(),
            boundary.ghost_count()
        );
        Ok(Self {
            config,
            shape,
            class,
            boundary,
            diffusion,
            limiter,
            solver,
            dt,
            steps_per_output,
            total_steps,
            step: 0,
            f,
            nutrient,
            attractant,
            stats: RunStats::default(),
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn density(&self) -> Vec<f64> {
        density_moment(&self.f, &self.class)
    }

    /// One full step `n -> n + 1`.
    pub fn advance(&mut self) -> Result<()> {
        let n = self.step as i64;
        debug_assert_eq!(self.nutrient.level, n - 1);
        debug_assert_eq!(self.attractant.level, n - 1);
        let dt = self.dt;
        let rho = density_moment(&self.f, &self.class);
        let controls = SolveControls {
            solver: self.solver.as_ref(),
            tol: self.config.run.solver_tol,
            max_iter: self.config.run.solver_max_iter,
        };
        let p = &self.config.params;
        let (nutrient, rn) =
            assemble_and_solve(&self.diffusion, &self.boundary, &self.nutrient, &rho, &p.nutrient, dt, &controls)?;
        let (attractant, ra) = assemble_and_solve(
            &self.diffusion,
            &self.boundary,
            &self.attractant,
            &rho,
            &p.attractant,
            dt,
            &controls,
        )?;
        for r in [rn, ra] {
            self.stats.scalar_clipped += r.clipped as u64;
            self.stats.max_solver_iterations = self.stats.max_solver_iterations.max(r.stats.iterations as u64);
            self.stats.max_solver_residual = self.stats.max_solver_residual.max(r.stats.relative_residual);
        }
        let lambda = tumbling_rates(
            &p.response,
            SignalPair {
                half: &nutrient.values,
                prev: &self.nutrient.values,
            },
            SignalPair {
                half: &attractant.values,
                prev: &self.attractant.values,
            },
            dt,
            &self.class,
            &self.config.vgrid,
        );
        self.boundary.fill_kinetic_ghosts(&mut self.f.values);
        let report = step_kinetic(
            &mut self.f,
            StepInputs {
                lambda: &lambda,
                rho: &rho,
                nutrient: &nutrient.values,
                growth: &p.growth,
                dt,
                strict_positivity: self.config.run.strict_positivity,
            },
            &self.class,
            &self.config.vgrid,
            self.limiter.as_ref(),
        )?;
        self.stats.kinetic_clamped += report.clamped as u64;
        self.stats.most_negative = self.stats.most_negative.min(report.min_value);
        self.nutrient = nutrient;
        self.attractant = attractant;
        self.step += 1;
        self.stats.steps = self.step;
        Ok(())
    }

    fn snapshot_row(&self, rho: &[f64]) -> Result<ObservableRow> {
        let row = ObservableRow::measure(self.time(), &self.f, rho, &self.class, &self.config.observe);
        if !row.mass.is_finite() || !row.max_density.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite density at t = {} (step {})",
                self.time(),
                self.step
            )));
        }
        Ok(row)
    }

    fn emit(&self, observer: &mut dyn RunObserver, frame_stride: u64) -> Result<()> {
        let index = self.step / self.steps_per_output;
        let rho = self.density();
        let row = self.snapshot_row(&rho)?;
        observer.observe(&Snapshot {
            index: index as usize,
            step: self.step,
            t: self.time(),
            f: &self.f,
            rho: &rho,
            nutrient: &self.nutrient.values,
            attractant: &self.attractant.values,
            class: &self.class,
            row,
            write_frame: index % frame_stride.max(1) == 0,
        })
    }

    /// Run to the end time, reporting at every output time (including the
    /// current one when it is on the cadence). Frames are flagged at every
    /// `frame_stride`-th output.
    pub fn run(&mut self, observer: &mut dyn RunObserver, frame_stride: u64) -> Result<()> {
        self.run_until(self.total_steps, observer, frame_stride)
    }

    pub fn run_until(&mut self, last_step: u64, observer: &mut dyn RunObserver, frame_stride: u64) -> Result<()> {
        if self.step % self.steps_per_output == 0 && self.step <= last_step {
            self.emit(observer, frame_stride)?;
        }
        while self.step < last_step {
            self.advance()?;
            if self.step % self.steps_per_output == 0 || self.step == self.total_steps {
                self.emit(observer, frame_stride)?;
            }
        }
        Ok(())
    }

    /// Number of output times over the whole run.
    pub fn output_count(&self) -> u64 {
        self.total_steps / self.steps_per_output + 1 + u64::from(self.total_steps % self.steps_per_output != 0)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            step: self.step,
            dt: self.dt,
            f: self.f.values.clone(),
            nutrient_level: self.nutrient.level,
            nutrient: self.nutrient.values.clone(),
            attractant_level: self.attractant.level,
            attractant: self.attractant.values.clone(),
            stats: self.stats,
        }
    }

    /// Restore a checkpoint taken from a run of the same configuration.
    pub fn resume(config: ScenarioConfig, checkpoint: Checkpoint) -> Result<Self> {
        let mut sim = Self::new(config)?;
        if checkpoint.dt.to_bits() != sim.dt.to_bits()
            || checkpoint.f.len() != sim.f.values.len()
            || checkpoint.nutrient.len() != sim.nutrient.values.len()
            || checkpoint.attractant.len() != sim.attractant.values.len()
        {
            return Err(Error::config("checkpoint", "does not match the configuration"));
        }
        sim.step = checkpoint.step;
        sim.f.values = checkpoint.f;
        sim.nutrient.level = checkpoint.nutrient_level;
        sim.nutrient.values = checkpoint.nutrient;
        sim.attractant.level = checkpoint.attractant_level;
        sim.attractant.values = checkpoint.attractant;
        sim.stats = checkpoint.stats;
        Ok(sim)
    }
}

/// Complete state of a run between two steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub dt: f64,
    pub f: Vec<f64>,
    pub nutrient_level: i64,
    pub nutrient: Vec<f64>,
    pub attractant_level: i64,
    pub attractant: Vec<f64>,
    pub stats: RunStats,
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CHMTXCK1";

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.bytes.get(self.at..self.at + n)?;
        self.at += n;
        Some(s)
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn f64(&mut self) -> Option<f64> {
        self.u64().map(f64::from_bits)
    }
    fn f64s(&mut self) -> Option<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > (self.bytes.len() - self.at) / 8 {
            return None;
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    /// Little-endian binary encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        put_f64s(&mut out, &self.f);
        out.extend_from_slice(&self.nutrient_level.to_le_bytes());
        put_f64s(&mut out, &self.nutrient);
        out.extend_from_slice(&self.attractant_level.to_le_bytes());
        put_f64s(&mut out, &self.attractant);
        let s = &self.stats;
        for v in [s.steps, s.kinetic_clamped, s.scalar_clipped, s.max_solver_iterations] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.most_negative.to_le_bytes());
        out.extend_from_slice(&s.max_solver_residual.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.get(..8)? != CHECKPOINT_MAGIC {
            return None;
        }
        let mut c = Cursor { bytes, at: 8 };
        let step = c.u64()?;
        let dt = c.f64()?;
        let f = c.f64s()?;
        let nutrient_level = c.u64()? as i64;
        let nutrient = c.f64s()?;
        let attractant_level = c.u64()? as i64;
        let attractant = c.f64s()?;
        let stats = RunStats {
            steps: c.u64()?,
            kinetic_clamped: c.u64()?,
            scalar_clipped: c.u64()?,
            max_solver_iterations: c.u64()?,
            most_negative: c.f64()?,
            max_solver_residual: c.f64()?,
        };
        (c.at == bytes.len()).then_some(Self {
            step,
            dt,
            f,
            nutrient_level,
            nutrient,
            attractant_level,
            attractant,
            stats,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            reason: "not a checkpoint file".into(),
        })
    }
}
