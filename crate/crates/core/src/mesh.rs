//! Cartesian space mesh and discrete velocity circle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Number of ghost layers stored around the mesh on every side.
pub const GHOST_LAYERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn square(half_width: f64) -> Self {
        Self::new(-half_width, half_width, -half_width, half_width)
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }
}

/// Uniform grid of `(n_x + 1) x (n_y + 1)` nodes. Node `(i_x, i_y)` sits at
/// `(x_min + i_x dx, y_min + i_y dy)`. Signed indices reach into the ghost
/// band, `-2 ..= n + 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceMesh {
    pub bounds: Bounds,
    pub n_x: usize,
    pub n_y: usize,
    pub dx: f64,
    pub dy: f64,
}

pub fn build_space_mesh(bounds: Bounds, n_x: usize, n_y: usize) -> Result<SpaceMesh> {
    if n_x == 0 || n_y == 0 {
        return Err(Error::Mesh(format!(
            "cell counts must be positive, got n_x={n_x}, n_y={n_y}"
        )));
    }
    let all_finite = [bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max]
        .iter()
        .all(|v| v.is_finite());
    if !all_finite || bounds.x_max <= bounds.x_min || bounds.y_max <= bounds.y_min {
        return Err(Error::Mesh(format!("inverted or non-finite bounds {bounds:?}")));
    }
    Ok(SpaceMesh {
        bounds,
        n_x,
        n_y,
        dx: (bounds.x_max - bounds.x_min) / n_x as f64,
        dy: (bounds.y_max - bounds.y_min) / n_y as f64,
    })
}

impl SpaceMesh {
    pub fn x(&self, i_x: isize) -> f64 {
        self.bounds.x_min + i_x as f64 * self.dx
    }

    pub fn y(&self, i_y: isize) -> f64 {
        self.bounds.y_min + i_y as f64 * self.dy
    }

    pub fn point(&self, i_x: isize, i_y: isize) -> Point {
        Point::new(self.x(i_x), self.y(i_y))
    }

    pub fn h_max(&self) -> f64 {
        self.dx.max(self.dy)
    }

    pub fn h_min(&self) -> f64 {
        self.dx.min(self.dy)
    }

    /// Padded storage width along x (mesh nodes plus both ghost bands).
    pub fn padded_nx(&self) -> usize {
        self.n_x + 1 + 2 * GHOST_LAYERS
    }

    pub fn padded_ny(&self) -> usize {
        self.n_y + 1 + 2 * GHOST_LAYERS
    }

    pub fn padded_len(&self) -> usize {
        self.padded_nx() * self.padded_ny()
    }

    /// Flat index into padded storage, row-major in y.
    #[inline]
    pub fn flat(&self, i_x: isize, i_y: isize) -> usize {
        let g = GHOST_LAYERS as isize;
        debug_assert!(self.in_padded(i_x, i_y), "({i_x}, {i_y}) outside padded grid");
        ((i_y + g) as usize) * self.padded_nx() + (i_x + g) as usize
    }

    #[inline]
    pub fn unflat(&self, k: usize) -> (isize, isize) {
        let g = GHOST_LAYERS as isize;
        let w = self.padded_nx();
        ((k % w) as isize - g, (k / w) as isize - g)
    }

    pub fn in_padded(&self, i_x: isize, i_y: isize) -> bool {
        let g = GHOST_LAYERS as isize;
        i_x >= -g && i_y >= -g && i_x <= self.n_x as isize + g && i_y <= self.n_y as isize + g
    }

    pub fn in_mesh(&self, i_x: isize, i_y: isize) -> bool {
        i_x >= 0 && i_y >= 0 && i_x <= self.n_x as isize && i_y <= self.n_y as isize
    }

    /// Iterator over all mesh nodes (no ghost band), x fastest.
    pub fn nodes(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        (0..=self.n_y as isize).flat_map(move |iy| (0..=self.n_x as isize).map(move |ix| (ix, iy)))
    }

    /// Nearest node indices to `p` (may fall outside the mesh).
    pub fn nearest_node(&self, p: Point) -> (isize, isize) {
        (
            ((p.x - self.bounds.x_min) / self.dx).round() as isize,
            ((p.y - self.bounds.y_min) / self.dy).round() as isize,
        )
    }
}

/// `n_v` directions on the circle of radius `v0`, `theta_j = (j + 1/2) dv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub v0: f64,
    pub n_v: usize,
    pub dv: f64,
    pub angles: Vec<f64>,
}

pub fn build_velocity_grid(v0: f64, n_v: usize) -> Result<VelocityGrid> {
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(Error::Mesh(format!("speed v0 must be positive, got {v0}")));
    }
    if n_v < 2 || n_v % 2 != 0 {
        return Err(Error::Mesh(format!(
            "n_v must be even and >= 2 so that every discrete velocity has its exact \
             opposite on the grid (specular reflection symmetry), got {n_v}"
        )));
    }
    let dv = 2.0 * PI / n_v as f64;
    let angles = (0..n_v).map(|j| (j as f64 + 0.5) * dv).collect();
    Ok(VelocityGrid { v0, n_v, dv, angles })
}

impl VelocityGrid {
    pub fn velocity(&self, j: usize) -> Point {
        let th = self.angles[j];
        Point::new(self.v0 * th.cos(), self.v0 * th.sin())
    }

    pub fn velocities(&self) -> Vec<Point> {
        (0..self.n_v).map(|j| self.velocity(j)).collect()
    }

    /// Locate an arbitrary direction on the angular grid: returns `(j0, j1, t)`
    /// with the value at `angle` given by `(1 - t) g[j0] + t g[j1]`, periodic.
    /// Directions within `1e-9` of a grid angle snap to it with `t = 0`.
    pub fn bracket(&self, angle: f64) -> (usize, usize, f64) {
        let n = self.n_v as f64;
        let mut s = angle.rem_euclid(2.0 * PI) / self.dv - 0.5;
        let nearest = s.round();
        if (s - nearest).abs() < 1e-9 {
            let j = (nearest as i64).rem_euclid(self.n_v as i64) as usize;
            return (j, j, 0.0);
        }
        if s < 0.0 {
            s += n;
        }
        let j0 = s.floor();
        let t = s - j0;
        let j0 = (j0 as i64).rem_euclid(self.n_v as i64) as usize;
        (j0, (j0 + 1) % self.n_v, t)
    }
}
