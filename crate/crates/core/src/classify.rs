//! Interior / ghost / exterior tagging of the padded grid and per-ghost
//! boundary metadata (projection, mirror point, reconstruction stencil).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{mesh_frame, project_to_boundary, Clipped, Shape};
use crate::mesh::{SpaceMesh, GHOST_LAYERS};
use crate::stencil::{Crossing, Stencil, StencilLine};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tag {
    Interior,
    Ghost,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtrapolationMode {
    Interpolate,
    WenoExtrapolate,
}

#[derive(Debug, Clone)]
pub struct GhostPoint {
    pub index: (isize, isize),
    pub x_g: Point,
    pub x_p: Point,
    pub normal: Point,
    pub x_m: Point,
    pub stencil: Stencil,
    pub mode: ExtrapolationMode,
}

#[derive(Debug, Clone)]
pub struct GridClassification {
    pub mesh: SpaceMesh,
    /// one tag per padded grid point
    pub tags: Vec<Tag>,
    pub ghosts: Vec<GhostPoint>,
    /// interior points in row-major order
    pub interior: Vec<(isize, isize)>,
    /// ghosts whose stencil fell back below degree 2
    pub degree_fallbacks: usize,
}

impl GridClassification {
    pub fn tag(&self, ix: isize, iy: isize) -> Tag {
        if self.mesh.in_padded(ix, iy) {
            self.tags[self.mesh.flat(ix, iy)]
        } else {
            Tag::Exterior
        }
    }

    pub fn is_interior(&self, ix: isize, iy: isize) -> bool {
        self.tag(ix, iy) == Tag::Interior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }
}

/// Tag every point of the padded grid by the sign of the level set and
/// attach boundary metadata to the ghost band. The domain is closed off by
/// the mesh frame where it reaches past the mesh.
pub fn classify_points(shape: &dyn Shape, mesh: &SpaceMesh) -> Result<GridClassification> {
    let clipped = Clipped {
        shape,
        frame: mesh_frame(mesh),
    };
    let shape: &dyn Shape = &clipped;
    let mut tags = vec![Tag::Exterior; mesh.padded_len()];
    let mut interior = Vec::new();
    for (ix, iy) in mesh.nodes() {
        if shape.phi(mesh.point(ix, iy)) < 0.0 {
            tags[mesh.flat(ix, iy)] = Tag::Interior;
            interior.push((ix, iy));
        }
    }
    if interior.is_empty() {
        return Err(Error::Geometry("no mesh node lies inside the domain".into()));
    }

    let g = GHOST_LAYERS as isize;
    let mut ghost_idx = Vec::new();
    for &(ix, iy) in &interior {
        for dy in -g..=g {
            for dx in -g..=g {
                let (jx, jy) = (ix + dx, iy + dy);
                let k = mesh.flat(jx, jy);
                if tags[k] == Tag::Exterior {
                    tags[k] = Tag::Ghost;
                    ghost_idx.push((jx, jy));
                }
            }
        }
    }
    ghost_idx.sort_by_key(|&(x, y)| (y, x));

    warn_if_underresolved(&tags, mesh, &interior);

    let is_interior = |ix: isize, iy: isize| {
        mesh.in_padded(ix, iy) && tags[mesh.flat(ix, iy)] == Tag::Interior
    };
    let ghosts = ghost_idx
        .par_iter()
        .map(|&(ix, iy)| build_ghost(shape, mesh, &is_interior, ix, iy))
        .collect::<Result<Vec<_>>>()?;
    let degree_fallbacks = ghosts.iter().filter(|gp| gp.stencil.degree < 2).count();

    Ok(GridClassification {
        mesh: mesh.clone(),
        tags,
        ghosts,
        interior,
        degree_fallbacks,
    })
}

fn warn_if_underresolved(tags: &[Tag], mesh: &SpaceMesh, interior: &[(isize, isize)]) {
    let inside = |ix: isize, iy: isize| mesh.in_padded(ix, iy) && tags[mesh.flat(ix, iy)] == Tag::Interior;
    let thin = interior
        .iter()
        .filter(|&&(ix, iy)| {
            (!inside(ix - 1, iy) && !inside(ix + 1, iy)) || (!inside(ix, iy - 1) && !inside(ix, iy + 1))
        })
        .count();
    if thin > 0 {
        log::warn!(
            "{thin} interior points have no interior neighbour on either side along an axis; \
             the mesh does not resolve the geometry (fewer than 3 points across)"
        );
    }
}

fn build_ghost(
    shape: &dyn Shape,
    mesh: &SpaceMesh,
    is_interior: &(dyn Fn(isize, isize) -> bool + Sync),
    ix: isize,
    iy: isize,
) -> Result<GhostPoint> {
    let x_g = mesh.point(ix, iy);
    let proj = project_to_boundary(shape, x_g, mesh.h_max())?;
    let x_m = snap_to_node(mesh, proj.point * 2.0 - x_g);
    let stencil = build_stencil(is_interior, mesh, proj.point, proj.normal)?;
    let mode = extrapolation_mode(&stencil, mesh, x_m);
    Ok(GhostPoint {
        index: (ix, iy),
        x_g,
        x_p: proj.point,
        normal: proj.normal,
        x_m,
        stencil,
        mode,
    })
}

fn snap_to_node(mesh: &SpaceMesh, p: Point) -> Point {
    let (i, j) = mesh.nearest_node(p);
    let node = mesh.point(i, j);
    if (p.x - node.x).abs() < 1e-9 * mesh.dx && (p.y - node.y).abs() < 1e-9 * mesh.dy {
        node
    } else {
        p
    }
}

pub fn extrapolation_mode(stencil: &Stencil, mesh: &SpaceMesh, x_m: Point) -> ExtrapolationMode {
    if stencil.bounding_box_contains(mesh, x_m) {
        ExtrapolationMode::Interpolate
    } else {
        ExtrapolationMode::WenoExtrapolate
    }
}

/// Stencil for reconstructing at the mirror point of a ghost.
///
/// Crosses the grid lines of the dominant normal direction (`y = const` when
/// `|n_y| >= |n_x|`) at three consecutive lines, starting with the first line
/// strictly on the interior side of `x_p`, and takes the three consecutive
/// interior nodes nearest each crossing point. Falls back to two lines of two
/// nodes, then to the single interior node nearest `x_p`.
pub fn build_stencil(
    is_interior: &(dyn Fn(isize, isize) -> bool + Sync),
    mesh: &SpaceMesh,
    x_p: Point,
    n: Point,
) -> Result<Stencil> {
    let crossing = if n.y.abs() >= n.x.abs() - 1e-12 {
        Crossing::YLines
    } else {
        Crossing::XLines
    };
    let (a_p, c_p, n_a, n_c, a_min, c_min, h_a, h_c) = match crossing {
        Crossing::YLines => (x_p.x, x_p.y, n.x, n.y, mesh.bounds.x_min, mesh.bounds.y_min, mesh.dx, mesh.dy),
        Crossing::XLines => (x_p.y, x_p.x, n.y, n.x, mesh.bounds.y_min, mesh.bounds.x_min, mesh.dy, mesh.dx),
    };
    let node_interior = |line: isize, k: isize| match crossing {
        Crossing::YLines => is_interior(k, line),
        Crossing::XLines => is_interior(line, k),
    };

    let u = (c_p - c_min) / h_c;
    let step: isize = if n_c > 0.0 { 1 } else { -1 };
    let first = if step > 0 {
        (u + 1e-9).floor() as isize + 1
    } else {
        (u - 1e-9).ceil() as isize - 1
    };

    let crossing_line = |l: usize| {
        let line = first + step * l as isize;
        let t = (c_min + line as f64 * h_c - c_p) / n_c;
        let a_star = a_p + t * n_a;
        let anchor = match crossing {
            Crossing::YLines => Point::new(a_star, c_min + line as f64 * h_c),
            Crossing::XLines => Point::new(c_min + line as f64 * h_c, a_star),
        };
        (line, a_star, anchor)
    };

    for degree in [2usize, 1] {
        let m = degree + 1;
        let mut lines = Vec::with_capacity(m);
        let mut anchors = Vec::with_capacity(m);
        for l in 0..m {
            let (line, a_star, anchor) = crossing_line(l);
            match nearest_window(&|k| node_interior(line, k), a_star, a_min, h_a, m, n_a) {
                Some(nodes) => {
                    lines.push(StencilLine { line, nodes });
                    anchors.push(anchor);
                }
                None => break,
            }
        }
        if lines.len() == m {
            let stencil = Stencil {
                degree,
                crossing,
                lines,
                anchors,
            };
            if stencil.min_separation(mesh) > 1e-9 {
                return Ok(stencil);
            }
        }
    }

    // degree 0: nearest interior node to the boundary point
    let (cx, cy) = mesh.nearest_node(x_p);
    let mut best: Option<((isize, isize), f64)> = None;
    for jy in cy - 3..=cy + 3 {
        for jx in cx - 3..=cx + 3 {
            if is_interior(jx, jy) {
                let d = (mesh.point(jx, jy) - x_p).norm();
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some(((jx, jy), d));
                }
            }
        }
    }
    match best {
        Some(((jx, jy), _)) => Ok(Stencil::single(jx, jy, mesh.point(jx, jy))),
        None => Err(Error::EmptyStencil { x: x_p.x, y: x_p.y }),
    }
}

/// `m` consecutive interior nodes on a line minimising the summed distance
/// to the crossing coordinate `a_star`. Ties go to the window lying further
/// along `lean` (the normal component along the line), which keeps the choice
/// mirror-symmetric.
fn nearest_window(
    interior: &dyn Fn(isize) -> bool,
    a_star: f64,
    a_min: f64,
    h: f64,
    m: usize,
    lean: f64,
) -> Option<Vec<isize>> {
    let m = m as isize;
    let centre = ((a_star - a_min) / h).round() as isize;
    let mut best: Option<(isize, f64)> = None;
    for start in centre - 2 * m..=centre + m {
        if (start..start + m).all(interior) {
            let cost: f64 = (start..start + m)
                .map(|k| (a_min + k as f64 * h - a_star).abs())
                .sum();
            let better = match best {
                None => true,
                Some((_, c)) if cost < c - 1e-12 * h => true,
                Some((_, c)) => cost <= c + 1e-12 * h && lean > 0.0,
            };
            if better {
                best = Some((start, cost));
            }
        }
    }
    best.map(|(s, _)| (s..s + m).collect())
}
