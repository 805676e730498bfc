//! Nutrient and chemoattractant on staggered half steps: implicit Euler with
//! the five-point Laplacian, reaction terms treated implicitly, ghost
//! unknowns eliminated through the Neumann closure.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryOperator;
use crate::classify::GridClassification;
use crate::error::Result;
use crate::kinetic::KineticField;
use crate::linsolve::{CsrMatrix, LinearSolver, SolveStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    Nutrient,
    Chemoattractant,
}

/// A scalar on the padded grid living at time `(level + 1/2) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub kind: ScalarKind,
    pub level: i64,
    pub values: Vec<f64>,
}

impl ScalarField {
    /// Uniform field at interior and ghost points, at level `-1`.
    pub fn uniform(kind: ScalarKind, class: &GridClassification, value: f64) -> Self {
        let mut values = vec![0.0; class.mesh.padded_len()];
        for (k, tag) in class.tags.iter().enumerate() {
            if *tag != crate::classify::Tag::Exterior {
                values[k] = value;
            }
        }
        Self {
            kind,
            level: -1,
            values,
        }
    }
}

/// Reaction-diffusion coefficients of one scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarCoefficients {
    pub diffusion: f64,
    /// linear decay `a` (chemoattractant)
    pub decay: f64,
    /// production per unit density `b` (chemoattractant)
    pub production: f64,
    /// consumption per unit density `c` (nutrient)
    pub consumption: f64,
}

/// `rho = dv sum_j f_j` at interior points, zero elsewhere.
pub fn density_moment(f: &KineticField, class: &GridClassification) -> Vec<f64> {
    let mut rho = vec![0.0; class.mesh.padded_len()];
    for &(ix, iy) in &class.interior {
        let k = class.mesh.flat(ix, iy);
        rho[k] = f.dv * f.values[k * f.n_v..(k + 1) * f.n_v].iter().sum::<f64>();
    }
    rho
}

pub fn time_derivative(half: &[f64], prev: &[f64], dt: f64) -> Vec<f64> {
    half.iter().zip(prev).map(|(a, b)| (a - b) / dt).collect()
}

/// The negative five-point Laplacian over interior unknowns with the
/// ghost closure folded in. Built once per classification.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    /// padded index of each unknown
    pub unknowns: Vec<usize>,
    row_of: Vec<usize>,
    pub laplacian: CsrMatrix,
    diagonal_slot: Vec<usize>,
}

const NOT_UNKNOWN: usize = usize::MAX;

impl DiffusionOperator {
    pub fn new(class: &GridClassification, boundary: &BoundaryOperator) -> Self {
        let mesh = &class.mesh;
        let mut row_of = vec![NOT_UNKNOWN; mesh.padded_len()];
        let unknowns: Vec<usize> = class.interior.iter().map(|&(ix, iy)| mesh.flat(ix, iy)).collect();
        for (r, &k) in unknowns.iter().enumerate() {
            row_of[k] = r;
        }
        let cx = 1.0 / (mesh.dx * mesh.dx);
        let cy = 1.0 / (mesh.dy * mesh.dy);
        let rows = class
            .interior
            .iter()
            .enumerate()
            .map(|(r, &(ix, iy))| {
                let mut row = vec![(r, 2.0 * cx + 2.0 * cy)];
                for (jx, jy, c) in [(ix - 1, iy, cx), (ix + 1, iy, cx), (ix, iy - 1, cy), (ix, iy + 1, cy)] {
                    let k = mesh.flat(jx, jy);
                    if row_of[k] != NOT_UNKNOWN {
                        row.push((row_of[k], -c));
                    } else if let Some(weights) = boundary.closure_weights(k) {
                        for (src, w) in weights {
                            row.push((row_of[src], -c * w));
                        }
                    } else {
                        unreachable!("five-point neighbour of an interior point outside the ghost band");
                    }
                }
                row
            })
            .collect();
        let laplacian = CsrMatrix::from_rows(rows);
        let diagonal_slot = (0..laplacian.n)
            .map(|r| {
                (laplacian.row_ptr[r]..laplacian.row_ptr[r + 1])
                    .find(|&s| laplacian.cols[s] == r)
                    .expect("diagonal entry")
            })
            .collect();
        Self {
            unknowns,
            row_of,
            laplacian,
            diagonal_slot,
        }
    }

    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }
}

/// Assembled implicit system `A u = b` (rows scaled by `dt`).
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

/// Solver controls for the implicit steps.
#[derive(Debug, Clone, Copy)]
pub struct SolveControls<'a> {
    pub solver: &'a dyn LinearSolver,
    pub tol: f64,
    pub max_iter: usize,
}

pub fn assemble(
    op: &DiffusionOperator,
    prev: &ScalarField,
    rho: &[f64],
    coeffs: &ScalarCoefficients,
    dt: f64,
    controls: &SolveControls<'_>,
) -> LinearSystem {
    let mut matrix = op.laplacian.clone();
    let scale = dt * coeffs.diffusion;
    matrix.vals.iter_mut().for_each(|v| *v *= scale);
    let mut rhs = Vec::with_capacity(op.len());
    for (r, &k) in op.unknowns.iter().enumerate() {
        let (implicit, source) = match prev.kind {
            ScalarKind::Chemoattractant => (coeffs.decay, coeffs.production * rho[k]),
            ScalarKind::Nutrient => (coeffs.consumption * rho[k], 0.0),
        };
        matrix.vals[op.diagonal_slot[r]] += 1.0 + dt * implicit;
        rhs.push(prev.values[k] + dt * source);
    }
    LinearSystem {
        matrix,
        rhs,
        tol: controls.tol,
        max_iter: controls.max_iter,
    }
}

/// Result of one implicit half step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfStepReport {
    pub stats: SolveStats,
    /// negative values clipped to zero after the solve
    pub clipped: usize,
}

/// Advance `u^{n-1/2}` to `u^{n+1/2}` given `rho^n`; ghosts of the result hold
/// the Neumann closure.
pub fn assemble_and_solve(
    op: &DiffusionOperator,
    boundary: &BoundaryOperator,
    prev: &ScalarField,
    rho: &[f64],
    coeffs: &ScalarCoefficients,
    dt: f64,
    controls: &SolveControls<'_>,
) -> Result<(ScalarField, HalfStepReport)> {
    let system = assemble(op, prev, rho, coeffs, dt, controls);
    let mut x: Vec<f64> = op.unknowns.iter().map(|&k| prev.values[k]).collect();
    let stats = controls
        .solver
        .solve(&system.matrix, &system.rhs, &mut x, system.tol, system.max_iter)?;
    let mut values = vec![0.0; prev.values.len()];
    let mut clipped = 0;
    for (&k, v) in op.unknowns.iter().zip(x) {
        values[k] = if v < 0.0 {
            clipped += 1;
            0.0
        } else {
            v
        };
    }
    boundary.neumann_ghost_closure(&mut values);
    Ok((
        ScalarField {
            kind: prev.kind,
            level: prev.level + 1,
            values,
        },
        HalfStepReport { stats, clipped },
    ))
}

impl DiffusionOperator {
    /// Row of a padded index, if it is an unknown.
    pub fn row(&self, flat: usize) -> Option<usize> {
        self.row_of.get(flat).copied().filter(|&r| r != NOT_UNKNOWN)
    }
}
