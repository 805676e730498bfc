//! On-disk run layout: manifest, observables, frames and optional dumps.
//!
//! ```text
//! DIR/manifest.json
//! DIR/observables.csv
//! DIR/frames/t_<index>_{rho,N,S}.csv   (and _f.csv with --dump-f)
//! DIR/classification.csv, DIR/ghost_weights.csv   (with --dump-classification)
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::boundary::BoundaryOperator;
use crate::classify::{GridClassification, Tag};
use crate::config::ScenarioConfig;
use crate::diagnostics::ObservableRow;
use crate::error::{Error, Result};
use crate::kinetic::KineticField;
use crate::simulation::{RunObserver, RunStats, Simulation, Snapshot};

pub const GIT_DESCRIBE: &str = env!("CHEMOTAXIS_GIT_DESCRIBE");

pub const SCALAR_LAG_NOTE: &str =
    "N and S frames hold the scalars at the half level just below the frame time (t - dt/2)";
pub const EXTERIOR_NOTE: &str = "frame values at ghost and exterior nodes are written as 0";

#[derive(Debug, Clone, Default)]
pub struct OutputOptions {
    pub out_dir: PathBuf,
    /// cap on the number of frame sets written; every output when `None`
    pub frames: Option<u64>,
    pub dump_f: bool,
    pub dump_classification: bool,
}

/// Stride between written frame sets so that at most `frames` are written.
pub fn frame_stride(outputs: u64, frames: Option<u64>) -> u64 {
    match frames {
        None => 1,
        Some(0) => u64::MAX,
        Some(n) => outputs.div_ceil(n).max(1),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.into(),
        reason: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub i_x: isize,
    pub i_y: isize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Write one nodal field over the `(n_x+1)(n_y+1)` mesh nodes, `i_x` fastest.
pub fn write_frame(path: &Path, class: &GridClassification, values: &[f64]) -> Result<()> {
    let mesh = &class.mesh;
    let mut w = csv_writer(path)?;
    for (i_x, i_y) in mesh.nodes() {
        let value = if class.is_interior(i_x, i_y) {
            values[mesh.flat(i_x, i_y)]
        } else {
            0.0
        };
        let p = mesh.point(i_x, i_y);
        w.serialize(FrameRow {
            i_x,
            i_y,
            x: p.x,
            y: p.y,
            value,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: &Path) -> Result<Vec<FrameRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

/// Kinetic density at interior nodes, one row per direction.
pub fn write_kinetic(path: &Path, class: &GridClassification, f: &KineticField) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        i_x: isize,
        i_y: isize,
        j: usize,
        value: f64,
    }
    let mut w = csv_writer(path)?;
    for &(i_x, i_y) in &class.interior {
        for j in 0..f.n_v {
            w.serialize(Row {
                i_x,
                i_y,
                j,
                value: f.at(i_x, i_y, j),
            })
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
struct ClassRow {
    i_x: isize,
    i_y: isize,
    tag: Tag,
    x_p: Option<f64>,
    y_p: Option<f64>,
    n_x: Option<f64>,
    n_y: Option<f64>,
    x_m: Option<f64>,
    y_m: Option<f64>,
    stencil_degree: Option<usize>,
}

/// Tag of every stored point, with projection data on ghost rows.
pub fn write_classification(path: &Path, class: &GridClassification) -> Result<()> {
    let mesh = &class.mesh;
    let mut ghost_at = vec![None; mesh.padded_len()];
    for (g, gp) in class.ghosts.iter().enumerate() {
        ghost_at[mesh.flat(gp.index.0, gp.index.1)] = Some(g);
    }
    let mut w = csv_writer(path)?;
    for k in 0..mesh.padded_len() {
        let (i_x, i_y) = mesh.unflat(k);
        let gp = ghost_at[k].map(|g| &class.ghosts[g]);
        w.serialize(ClassRow {
            i_x,
            i_y,
            tag: class.tags[k],
            x_p: gp.map(|g| g.x_p.x),
            y_p: gp.map(|g| g.x_p.y),
            n_x: gp.map(|g| g.normal.x),
            n_y: gp.map(|g| g.normal.y),
            x_m: gp.map(|g| g.x_m.x),
            y_m: gp.map(|g| g.x_m.y),
            stencil_degree: gp.map(|g| g.stencil.degree),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ghost_weights(path: &Path, class: &GridClassification, boundary: &BoundaryOperator) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in boundary.weight_rows(class) {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_observables(path: &Path) -> Result<Vec<ObservableRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FrameEntry {
    pub index: usize,
    pub step: u64,
    pub t: f64,
    pub files: Vec<String>,
}

/// Observer that streams observables and frames into the run directory.
pub struct OutputWriter {
    dir: PathBuf,
    observables: csv::Writer<BufWriter<File>>,
    dump_f: bool,
    pub frames: Vec<FrameEntry>,
    pub rows: Vec<ObservableRow>,
}

impl OutputWriter {
    pub fn create(dir: &Path, dump_f: bool) -> Result<Self> {
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
        Ok(Self {
            dir: dir.into(),
            observables: csv_writer(&dir.join("observables.csv"))?,
            dump_f,
            frames: Vec::new(),
            rows: Vec::new(),
        })
    }
}

impl RunObserver for OutputWriter {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        let obs_path = self.dir.join("observables.csv");
        self.observables.serialize(snap.row).map_err(|e| csv_err(&obs_path, e))?;
        self.observables.flush().map_err(|e| Error::io(&obs_path, e))?;
        self.rows.push(snap.row);
        if !snap.write_frame {
            return Ok(());
        }
        let mut files = Vec::new();
        for (suffix, values) in [("rho", snap.rho), ("N", snap.nutrient), ("S", snap.attractant)] {
            let name = format!("frames/t_{:05}_{suffix}.csv", snap.index);
            write_frame(&self.dir.join(&name), snap.class, values)?;
            files.push(name);
        }
        if self.dump_f {
            let name = format!("frames/t_{:05}_f.csv", snap.index);
            write_kinetic(&self.dir.join(&name), snap.class, snap.f)?;
            files.push(name);
        }
        self.frames.push(FrameEntry {
            index: snap.index,
            step: snap.step,
            t: snap.t,
            files,
        });
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: u64,
    pub dt: f64,
    pub frames: Vec<FrameEntry>,
    pub rows: Vec<ObservableRow>,
    pub stats: RunStats,
}

fn manifest(
    config: &ScenarioConfig,
    sim: Option<&Simulation>,
    writer: Option<&OutputWriter>,
    error: Option<&Error>,
) -> serde_json::Value {
    let mut notes = config.raw.notes.clone();
    notes.push(SCALAR_LAG_NOTE.into());
    notes.push(EXTERIOR_NOTE.into());
    json!({
        "name": config.raw.name,
        "git_describe": GIT_DESCRIBE,
        "status": if error.is_some() { "failed" } else { "ok" },
        "error": error.map(|e| e.to_string()),
        "notes": notes,
        "mesh": {
            "bounds": config.mesh.bounds,
            "n_x": config.mesh.n_x,
            "n_y": config.mesh.n_y,
            "n_v": config.vgrid.n_v,
            "dx": config.mesh.dx,
            "dy": config.mesh.dy,
        },
        "dt": sim.map(|s| s.dt),
        "steps": sim.map(|s| s.step),
        "steps_per_output": sim.map(|s| s.steps_per_output),
        "output_every": config.run.output_every,
        "run": config.run,
        "params": config.params,
        "scales": config.scales,
        "ghosts": sim.map(|s| json!({
            "count": s.class.ghosts.len(),
            "degree_fallbacks": s.class.degree_fallbacks,
            "lagrange_fallbacks": s.boundary.lagrange_fallbacks,
        })),
        "stats": sim.map(|s| s.stats),
        "frames": writer.map(|w| &w.frames),
        "config": config.raw,
    })
}

fn write_manifest(dir: &Path, value: &serde_json::Value) -> Result<()> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(value)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Run a validated scenario into `opts.out_dir`. A manifest is written even
/// when the run fails, with `status = "failed"` and the error message.
pub fn run_scenario(config: ScenarioConfig, opts: &OutputOptions) -> Result<RunSummary> {
    let dir = &opts.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sim = match Simulation::new(config.clone()) {
        Ok(s) => s,
        Err(e) => {
            write_manifest(dir, &manifest(&config, None, None, Some(&e)))?;
            return Err(e);
        }
    };
    log::info!(
        "{}: dt = {:.4e}, {} steps, {} ghosts",
        config.raw.name,
        sim.dt,
        sim.total_steps,
        sim.class.ghosts.len()
    );
    let mut writer = OutputWriter::create(dir, opts.dump_f)?;
    let result = (|| {
        if opts.dump_classification {
            write_classification(&dir.join("classification.csv"), &sim.class)?;
            write_ghost_weights(&dir.join("ghost_weights.csv"), &sim.class, &sim.boundary)?;
        }
        let stride = frame_stride(sim.output_count(), opts.frames);
        sim.run(&mut writer, stride)
    })();
    write_manifest(dir, &manifest(&config, Some(&sim), Some(&writer), result.as_ref().err()))?;
    result?;
    Ok(RunSummary {
        steps: sim.step,
        dt: sim.dt,
        frames: writer.frames,
        rows: writer.rows,
        stats: sim.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_caps_frame_count() {
        assert_eq!(frame_stride(101, None), 1);
        assert_eq!(frame_stride(101, Some(10)), 11);
        assert_eq!(frame_stride(101, Some(200)), 1);
        assert!(101u64.div_ceil(frame_stride(101, Some(10))) <= 10);
    }
}
