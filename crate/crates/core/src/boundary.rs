//! Ghost values: specular mirror fill for the kinetic field and the Neumann
//! closure for scalar fields, both reconstructing at the mirror point with
//! the stencil polynomial (inside the stencil) or a WENO-type extrapolation.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{ExtrapolationMode, GhostPoint, GridClassification};
use crate::error::{Error, Result};
use crate::mesh::{SpaceMesh, VelocityGrid};
use crate::stencil::{Poly2, Stencil, StencilLine};
use crate::Point;

pub const WENO_EPSILON: f64 = 1e-6;

/// Specular reflection `v - 2 (v.n) n`.
#[inline]
pub fn reflect(v: Point, n: Point) -> Point {
    v - n * (2.0 * v.dot(&n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WenoWeights {
    pub d: [f64; 3],
    pub beta: [f64; 3],
    pub w: [f64; 3],
    pub eps: f64,
}

/// Linear weights `d_r` for a substencil family of the given top degree.
pub fn linear_weights(mesh: &SpaceMesh, degree: usize) -> Result<[f64; 3]> {
    let d0 = mesh.dx * mesh.dx + mesh.dy * mesh.dy;
    let d1 = d0.sqrt();
    match degree {
        0 => Ok([1.0, 0.0, 0.0]),
        1 => {
            if d0 >= 1.0 {
                return Err(Error::Mesh(format!("mesh too coarse for WENO weights: dx^2 + dy^2 = {d0}")));
            }
            Ok([d0, 1.0 - d0, 0.0])
        }
        _ => {
            let d2 = 1.0 - d0 - d1;
            if d2 <= 0.0 {
                return Err(Error::Mesh(format!(
                    "mesh too coarse for WENO weights: dx^2 + dy^2 + sqrt(dx^2 + dy^2) = {} >= 1",
                    d0 + d1
                )));
            }
            Ok([d0, d1, d2])
        }
    }
}

fn nonlinear_weights(d: [f64; 3], beta: [f64; 3], family: usize) -> [f64; 3] {
    let mut alpha = [0.0; 3];
    for r in 0..family {
        alpha[r] = d[r] / (WENO_EPSILON + beta[r]).powi(2);
    }
    let s: f64 = alpha.iter().sum();
    alpha.map(|a| a / s)
}

/// Nested substencils of a reconstruction stencil, lowest degree first, with
/// the positions of their nodes in the parent's `points()` order.
///
/// For a nine-point parent: the two lines nearest the boundary with the two
/// nodes closest to each crossing point, then the one of those four nearest
/// `x_p`, then the parent itself.
pub fn weno_substencils(stencil: &Stencil, mesh: &SpaceMesh, x_p: Point) -> Vec<(Stencil, Vec<usize>)> {
    let all: Vec<usize> = (0..stencil.len()).collect();
    let mut family = Vec::new();
    if stencil.degree == 0 {
        family.push((stencil.clone(), all));
        return family;
    }

    let (s1, idx1) = if stencil.degree == 1 {
        (stencil.clone(), all.clone())
    } else {
        let mut lines = Vec::with_capacity(2);
        let mut idx = Vec::with_capacity(4);
        let mut offset = 0;
        for (l, line) in stencil.lines.iter().enumerate() {
            if l < 2 {
                let anchor = along(stencil, stencil.anchors[l]);
                let coord = |k: isize| along_node(stencil, mesh, k);
                let n = line.nodes.len();
                let mut best = 0;
                let mut best_cost = f64::INFINITY;
                for s in 0..n.saturating_sub(1) {
                    let cost = (coord(line.nodes[s]) - anchor).abs() + (coord(line.nodes[s + 1]) - anchor).abs();
                    if cost < best_cost - 1e-12 * mesh.h_max() {
                        best = s;
                        best_cost = cost;
                    }
                }
                lines.push(StencilLine {
                    line: line.line,
                    nodes: line.nodes[best..best + 2].to_vec(),
                });
                idx.extend([offset + best, offset + best + 1]);
            }
            offset += line.nodes.len();
        }
        (
            Stencil {
                degree: 1,
                crossing: stencil.crossing,
                lines,
                anchors: stencil.anchors[..2].to_vec(),
            },
            idx,
        )
    };

    let pts = s1.points();
    let mut nearest = 0;
    let mut best = f64::INFINITY;
    for (k, &(ix, iy)) in pts.iter().enumerate() {
        let dist = (mesh.point(ix, iy) - x_p).norm();
        if dist < best - 1e-12 * mesh.h_max() {
            best = dist;
            nearest = k;
        }
    }
    let (ix, iy) = pts[nearest];
    family.push((Stencil::single(ix, iy, s1.anchors[0]), vec![idx1[nearest]]));
    family.push((s1, idx1));
    if stencil.degree == 2 {
        family.push((stencil.clone(), all));
    }
    family
}

fn along(stencil: &Stencil, p: Point) -> f64 {
    match stencil.crossing {
        crate::stencil::Crossing::YLines => p.x,
        crate::stencil::Crossing::XLines => p.y,
    }
}

fn along_node(stencil: &Stencil, mesh: &SpaceMesh, k: isize) -> f64 {
    match stencil.crossing {
        crate::stencil::Crossing::YLines => mesh.x(k),
        crate::stencil::Crossing::XLines => mesh.y(k),
    }
}

/// `int_{-h/2}^{h/2} t^n dt`.
fn moment(n: usize, h: f64) -> f64 {
    if n % 2 == 1 {
        0.0
    } else {
        2.0 * (h / 2.0).powi(n as i32 + 1) / (n as f64 + 1.0)
    }
}

/// Derivative multi-indices entering the smoothness indicator of degree `r`.
fn derivative_orders(r: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for total in 1..=r {
        for i in (0..=total).rev() {
            out.push((i, total - i));
        }
    }
    out
}

fn differentiate(poly: &Poly2, (sx, sy): (usize, usize)) -> Poly2 {
    let mut out = [[0.0; 3]; 3];
    for p in sx..3 {
        for q in sy..3 {
            let fx: f64 = ((p - sx + 1)..=p).map(|k| k as f64).product();
            let fy: f64 = ((q - sy + 1)..=q).map(|k| k as f64).product();
            out[p - sx][q - sy] = poly[p][q] * fx * fy;
        }
    }
    out
}

/// `int_K a b` for polynomials in coordinates centred on the cell `K`.
fn inner_product(a: &Poly2, b: &Poly2, dx: f64, dy: f64) -> f64 {
    let mut s = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            if a[p][q] == 0.0 {
                continue;
            }
            for u in 0..3 {
                for v in 0..3 {
                    s += a[p][q] * b[u][v] * moment(p + u, dx) * moment(q + v, dy);
                }
            }
        }
    }
    s
}

fn sum_squares(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum()
}

/// Smoothness indicator of one polynomial (local to `x_p`) fitted to `values`.
pub fn smoothness_indicator(poly: &Poly2, degree: usize, values: &[f64], mesh: &SpaceMesh) -> f64 {
    let norm = sum_squares(values);
    if degree == 0 {
        return mesh.dx * mesh.dx + mesh.dy * mesh.dy;
    }
    if norm == 0.0 {
        return 0.0;
    }
    let area = mesh.dx * mesh.dy;
    let mut s = 0.0;
    for sigma in derivative_orders(degree) {
        let d = differentiate(poly, sigma);
        s += area.powi((sigma.0 + sigma.1) as i32 - 1) * inner_product(&d, &d, mesh.dx, mesh.dy);
    }
    s / norm
}

/// WENO-type reconstruction at `target` from the stencil data, computed
/// directly from the fitted polynomials.
pub fn weno_extrapolate(
    stencil: &Stencil,
    values: &[f64],
    target: Point,
    mesh: &SpaceMesh,
    x_p: Point,
) -> Result<(f64, WenoWeights)> {
    let family = weno_substencils(stencil, mesh, x_p);
    let d = linear_weights(mesh, stencil.degree)?;
    let mut beta = [0.0; 3];
    let mut q = [0.0; 3];
    for (r, (sub, idx)) in family.iter().enumerate() {
        let data: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
        let basis = sub.basis_polynomials(mesh, x_p);
        let mut poly = [[0.0; 3]; 3];
        for (b, v) in basis.iter().zip(&data) {
            for p in 0..3 {
                for s in 0..3 {
                    poly[p][s] += v * b[p][s];
                }
            }
        }
        beta[r] = smoothness_indicator(&poly, sub.degree, &data, mesh);
        q[r] = sub.evaluate(mesh, &data, target);
    }
    let w = nonlinear_weights(d, beta, family.len());
    let value = (0..family.len()).map(|r| w[r] * q[r]).sum();
    Ok((
        value,
        WenoWeights {
            d,
            beta,
            w,
            eps: WENO_EPSILON,
        },
    ))
}

/// Precomputed WENO reconstruction for a fixed stencil and target: per
/// substencil the evaluation weights at the target and the quadratic form
/// `B_r` with `beta_r = f^T B_r f / |f|^2`.
#[derive(Debug, Clone)]
pub struct WenoPlan {
    pub subsets: Vec<Vec<usize>>,
    pub eval: Vec<Vec<f64>>,
    pub forms: Vec<Vec<f64>>,
    pub d: [f64; 3],
    beta0: f64,
}

impl WenoPlan {
    pub fn new(stencil: &Stencil, mesh: &SpaceMesh, x_p: Point, target: Point) -> Result<Self> {
        let family = weno_substencils(stencil, mesh, x_p);
        let d = linear_weights(mesh, stencil.degree)?;
        let area = mesh.dx * mesh.dy;
        let mut subsets = Vec::new();
        let mut eval = Vec::new();
        let mut forms = Vec::new();
        for (sub, idx) in family {
            let m = idx.len();
            let mut form = vec![0.0; if sub.degree == 0 { 0 } else { m * m }];
            if sub.degree > 0 {
                let basis = sub.basis_polynomials(mesh, x_p);
                for sigma in derivative_orders(sub.degree) {
                    let wgt = area.powi((sigma.0 + sigma.1) as i32 - 1);
                    let db: Vec<Poly2> = basis.iter().map(|b| differentiate(b, sigma)).collect();
                    for k in 0..m {
                        for l in k..m {
                            let v = wgt * inner_product(&db[k], &db[l], mesh.dx, mesh.dy);
                            form[k * m + l] += v;
                            if l != k {
                                form[l * m + k] += v;
                            }
                        }
                    }
                }
            }
            eval.push(sub.lagrange_weights(mesh, target));
            forms.push(form);
            subsets.push(idx);
        }
        Ok(Self {
            subsets,
            eval,
            forms,
            d,
            beta0: mesh.dx * mesh.dx + mesh.dy * mesh.dy,
        })
    }

    pub fn weights(&self, values: &[f64]) -> WenoWeights {
        let mut beta = [0.0; 3];
        for (r, idx) in self.subsets.iter().enumerate() {
            if r == 0 && self.forms[r].is_empty() {
                beta[r] = self.beta0;
                continue;
            }
            let m = idx.len();
            let form = &self.forms[r];
            let mut norm = 0.0;
            let mut quad = 0.0;
            for k in 0..m {
                let fk = values[idx[k]];
                norm += fk * fk;
                let mut row = 0.0;
                for l in 0..m {
                    row += form[k * m + l] * values[idx[l]];
                }
                quad += fk * row;
            }
            beta[r] = if norm == 0.0 { 0.0 } else { (quad / norm).max(0.0) };
        }
        WenoWeights {
            d: self.d,
            beta,
            w: nonlinear_weights(self.d, beta, self.subsets.len()),
            eps: WENO_EPSILON,
        }
    }

    fn candidate(&self, r: usize, values: &[f64]) -> f64 {
        self.subsets[r]
            .iter()
            .zip(&self.eval[r])
            .map(|(&k, w)| w * values[k])
            .sum()
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        let w = self.weights(values).w;
        (0..self.subsets.len()).map(|r| w[r] * self.candidate(r, values)).sum()
    }

    /// Weights over the parent stencil that copy the nearest node (the
    /// degree-0 substencil).
    pub fn nearest_node(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (&k, w) in self.subsets[0].iter().zip(&self.eval[0]) {
            out[k] += w;
        }
        out
    }
}

/// Tensor Lagrange evaluation; drops one degree (to the nested substencil)
/// while the node arrangement is degenerate. Returns the value and whether a
/// fallback happened.
pub fn evaluate_lagrange(stencil: &Stencil, mesh: &SpaceMesh, values: &[f64], target: Point) -> (f64, bool) {
    let weights = lagrange_weights_with_fallback(stencil, mesh, target);
    let v = weights.0.iter().zip(values).map(|(w, v)| w * v).sum();
    (v, weights.1)
}

fn lagrange_weights_with_fallback(stencil: &Stencil, mesh: &SpaceMesh, target: Point) -> (Vec<f64>, bool) {
    if stencil.degree == 0 || stencil.min_separation(mesh) > 1e-12 {
        return (stencil.lagrange_weights(mesh, target), false);
    }
    let anchor = stencil.anchors[0];
    let family = weno_substencils(stencil, mesh, anchor);
    let (sub, idx) = &family[family.len() - 2];
    let (w_sub, _) = lagrange_weights_with_fallback(sub, mesh, target);
    let mut w = vec![0.0; stencil.len()];
    for (&k, v) in idx.iter().zip(w_sub) {
        w[k] = v;
    }
    (w, true)
}

#[derive(Debug, Clone)]
enum Spatial {
    Lagrange(Vec<f64>),
    Weno(WenoPlan),
}

#[derive(Debug, Clone)]
struct GhostRecipe {
    target: usize,
    points: Vec<usize>,
    spatial: Spatial,
    /// linear weights over `points` used when folding the closure into a matrix
    closure: Vec<f64>,
    /// per velocity: angular bracket `(j0, j1, t)` of the reflected direction
    reflection: Vec<(u32, u32, f64)>,
}

impl GhostRecipe {
    fn reconstruct(&self, values: &[f64]) -> f64 {
        match &self.spatial {
            Spatial::Lagrange(w) => w.iter().zip(values).map(|(w, v)| w * v).sum(),
            Spatial::Weno(plan) => plan.apply(values),
        }
    }
}

/// One row of the per-ghost weight dump.
#[derive(Debug, Clone, Serialize)]
pub struct GhostWeightRow {
    pub i_x: isize,
    pub i_y: isize,
    pub mode: ExtrapolationMode,
    pub degree: usize,
    pub s_x: isize,
    pub s_y: isize,
    pub weight: f64,
}

/// Ghost fill for a fixed classification and velocity grid.
#[derive(Debug)]
pub struct BoundaryOperator {
    recipes: Vec<GhostRecipe>,
    ghost_of: Vec<u32>,
    n_v: usize,
    pub lagrange_fallbacks: usize,
    clamped: AtomicUsize,
}

const NO_GHOST: u32 = u32::MAX;

impl BoundaryOperator {
    pub fn new(class: &GridClassification, vgrid: &VelocityGrid) -> Result<Self> {
        let mesh = &class.mesh;
        let mut ghost_of = vec![NO_GHOST; mesh.padded_len()];
        let mut fallbacks = 0;
        let mut recipes = Vec::with_capacity(class.ghosts.len());
        for (g, gp) in class.ghosts.iter().enumerate() {
            let (recipe, fell_back) = Self::recipe(gp, mesh, vgrid)?;
            fallbacks += usize::from(fell_back);
            ghost_of[recipe.target] = g as u32;
            recipes.push(recipe);
        }
        Ok(Self {
            recipes,
            ghost_of,
            n_v: vgrid.n_v,
            lagrange_fallbacks: fallbacks,
            clamped: AtomicUsize::new(0),
        })
    }

    fn recipe(gp: &GhostPoint, mesh: &SpaceMesh, vgrid: &VelocityGrid) -> Result<(GhostRecipe, bool)> {
        let points = gp
            .stencil
            .points()
            .into_iter()
            .map(|(ix, iy)| mesh.flat(ix, iy))
            .collect::<Vec<_>>();
        let (spatial, closure, fell_back) = match gp.mode {
            ExtrapolationMode::Interpolate => {
                let (w, fb) = lagrange_weights_with_fallback(&gp.stencil, mesh, gp.x_m);
                (Spatial::Lagrange(w.clone()), w, fb)
            }
            ExtrapolationMode::WenoExtrapolate => {
                let plan = WenoPlan::new(&gp.stencil, mesh, gp.x_p, gp.x_m)?;
                // Extrapolated blends can carry weights far above 1 (a ghost
                // on the wall of a disc reaches an L1 norm of 35) and make the
                // implicit matrix unstable; the matrix copies the nearest node.
                let nearest = plan.nearest_node(points.len());
                (Spatial::Weno(plan), nearest, false)
            }
        };
        let reflection = (0..vgrid.n_v)
            .map(|j| {
                let v = reflect(vgrid.velocity(j), gp.normal);
                let (j0, j1, t) = vgrid.bracket(v.y.atan2(v.x));
                (j0 as u32, j1 as u32, t)
            })
            .collect();
        Ok((
            GhostRecipe {
                target: mesh.flat(gp.index.0, gp.index.1),
                points,
                spatial,
                closure,
                reflection,
            },
            fell_back,
        ))
    }

    pub fn ghost_count(&self) -> usize {
        self.recipes.len()
    }

    /// Ghost values clamped at zero since construction.
    pub fn clamped(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Set every ghost entry of a kinetic field (`[point][velocity]` layout)
    /// from the interior values.
    pub fn fill_kinetic_ghosts(&self, f: &mut [f64]) {
        let n_v = self.n_v;
        let src: &[f64] = f;
        let values: Vec<Vec<f64>> = self
            .recipes
            .par_iter()
            .map(|rec| {
                let mut g = vec![0.0; n_v];
                let mut data = vec![0.0; rec.points.len()];
                for (j, gj) in g.iter_mut().enumerate() {
                    for (d, &k) in data.iter_mut().zip(&rec.points) {
                        *d = src[k * n_v + j];
                    }
                    *gj = rec.reconstruct(&data);
                }
                let mut clamped = 0;
                let out = rec
                    .reflection
                    .iter()
                    .map(|&(j0, j1, t)| {
                        let v = if t == 0.0 {
                            g[j0 as usize]
                        } else {
                            (1.0 - t) * g[j0 as usize] + t * g[j1 as usize]
                        };
                        if v < 0.0 {
                            clamped += 1;
                            0.0
                        } else {
                            v
                        }
                    })
                    .collect();
                if clamped > 0 {
                    self.clamped.fetch_add(clamped, Ordering::Relaxed);
                }
                out
            })
            .collect();
        for (rec, vals) in self.recipes.iter().zip(values) {
            f[rec.target * n_v..(rec.target + 1) * n_v].copy_from_slice(&vals);
        }
    }

    /// Neumann closure: each ghost takes the reconstructed value at its mirror.
    pub fn neumann_ghost_closure(&self, u: &mut [f64]) {
        let values: Vec<f64> = self
            .recipes
            .iter()
            .map(|rec| {
                let data: Vec<f64> = rec.points.iter().map(|&k| u[k]).collect();
                rec.reconstruct(&data)
            })
            .collect();
        for (rec, v) in self.recipes.iter().zip(values) {
            u[rec.target] = v;
        }
    }

    /// Affine closure `u(ghost) = sum w_k u(point_k)` at a padded index, if it
    /// is a ghost.
    pub fn closure_weights(&self, flat: usize) -> Option<impl Iterator<Item = (usize, f64)> + '_> {
        let g = *self.ghost_of.get(flat)?;
        if g == NO_GHOST {
            return None;
        }
        let rec = &self.recipes[g as usize];
        Some(rec.points.iter().copied().zip(rec.closure.iter().copied()))
    }

    /// Closure weights per ghost for inspection. WENO ghosts report the
    /// nearest-node copy folded into the implicit matrix.
    pub fn weight_rows(&self, class: &GridClassification) -> Vec<GhostWeightRow> {
        let mesh = &class.mesh;
        let mut rows = Vec::new();
        for (gp, rec) in class.ghosts.iter().zip(&self.recipes) {
            for (&k, &w) in rec.points.iter().zip(&rec.closure) {
                let (s_x, s_y) = mesh.unflat(k);
                rows.push(GhostWeightRow {
                    i_x: gp.index.0,
                    i_y: gp.index.1,
                    mode: gp.mode,
                    degree: gp.stencil.degree,
                    s_x,
                    s_y,
                    weight: w,
                });
            }
        }
        rows
    }
}
