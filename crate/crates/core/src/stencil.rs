//! Interpolation/extrapolation stencils built on grid lines crossed by the
//! boundary normal, and the tensor-product Lagrange polynomials on them.
//!
//! A stencil of degree `r` holds `r + 1` grid lines (all `y = const` or all
//! `x = const`) with `r + 1` consecutive nodes on each. The polynomial is
//! built line by line: 1D Lagrange along each line, then 1D Lagrange across
//! the lines. The result lies in `Q_r` and interpolates every node, so it is
//! the unique `Q_r` interpolant whenever that exists.

use crate::mesh::SpaceMesh;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// lines of constant y; nodes vary in x along each line
    YLines,
    /// lines of constant x; nodes vary in y along each line
    XLines,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StencilLine {
    /// grid index across the lines (i_y for `YLines`, i_x for `XLines`)
    pub line: isize,
    /// grid indices along the line
    pub nodes: Vec<isize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub degree: usize,
    pub crossing: Crossing,
    pub lines: Vec<StencilLine>,
    /// points where the boundary normal crosses each line
    pub anchors: Vec<Point>,
}

/// Coefficients `c[p][q]` of `sum c[p][q] x^p y^q` in coordinates local to
/// some origin. Degree at most 2 in each variable.
pub type Poly2 = [[f64; 3]; 3];

impl Stencil {
    pub fn single(ix: isize, iy: isize, anchor: Point) -> Self {
        Stencil {
            degree: 0,
            crossing: Crossing::YLines,
            lines: vec![StencilLine {
                line: iy,
                nodes: vec![ix],
            }],
            anchors: vec![anchor],
        }
    }

    pub fn len(&self) -> usize {
        self.lines.iter().map(|l| l.nodes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn grid_index(&self, line: isize, node: isize) -> (isize, isize) {
        match self.crossing {
            Crossing::YLines => (node, line),
            Crossing::XLines => (line, node),
        }
    }

    /// Grid indices of all stencil nodes, line by line.
    pub fn points(&self) -> Vec<(isize, isize)> {
        self.lines
            .iter()
            .flat_map(|l| l.nodes.iter().map(move |&k| self.grid_index(l.line, k)))
            .collect()
    }

    /// (along, across) coordinate of a point for this stencil's orientation.
    fn split(&self, p: Point) -> (f64, f64) {
        match self.crossing {
            Crossing::YLines => (p.x, p.y),
            Crossing::XLines => (p.y, p.x),
        }
    }

    fn along_coord(&self, mesh: &SpaceMesh, k: isize) -> f64 {
        match self.crossing {
            Crossing::YLines => mesh.x(k),
            Crossing::XLines => mesh.y(k),
        }
    }

    fn across_coord(&self, mesh: &SpaceMesh, k: isize) -> f64 {
        match self.crossing {
            Crossing::YLines => mesh.y(k),
            Crossing::XLines => mesh.x(k),
        }
    }

    /// Axis-aligned bounding box of the stencil nodes.
    pub fn bounding_box(&self, mesh: &SpaceMesh) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (ix, iy) in self.points() {
            let p = mesh.point(ix, iy);
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        (lo, hi)
    }

    pub fn bounding_box_contains(&self, mesh: &SpaceMesh, p: Point) -> bool {
        let (lo, hi) = self.bounding_box(mesh);
        let tol = 1e-12 * mesh.h_max();
        p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol
    }

    /// Smallest node separation relative to the mesh size; zero means the
    /// tensor fit is singular.
    pub fn min_separation(&self, mesh: &SpaceMesh) -> f64 {
        let mut sep = f64::INFINITY;
        let across: Vec<f64> = self.lines.iter().map(|l| self.across_coord(mesh, l.line)).collect();
        for (i, a) in across.iter().enumerate() {
            for b in &across[i + 1..] {
                sep = sep.min((a - b).abs());
            }
        }
        for l in &self.lines {
            for (i, &a) in l.nodes.iter().enumerate() {
                for &b in &l.nodes[i + 1..] {
                    sep = sep.min((self.along_coord(mesh, a) - self.along_coord(mesh, b)).abs());
                }
            }
        }
        sep / mesh.h_max()
    }

    /// Linear weights `w` with `q(target) = sum w_k f_k`, ordered as `points()`.
    pub fn lagrange_weights(&self, mesh: &SpaceMesh, target: Point) -> Vec<f64> {
        let (ta, tc) = self.split(target);
        let across: Vec<f64> = self.lines.iter().map(|l| self.across_coord(mesh, l.line)).collect();
        let across_w = lagrange_values(&across, tc);
        let mut out = Vec::with_capacity(self.len());
        for (l, line) in self.lines.iter().enumerate() {
            let along: Vec<f64> = line.nodes.iter().map(|&k| self.along_coord(mesh, k)).collect();
            out.extend(lagrange_values(&along, ta).into_iter().map(|w| w * across_w[l]));
        }
        out
    }

    /// Evaluate the stencil polynomial through `values` (ordered as `points()`).
    pub fn evaluate(&self, mesh: &SpaceMesh, values: &[f64], target: Point) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.lagrange_weights(mesh, target)
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Monomial coefficients (in x, y relative to `origin`) of the Lagrange
    /// basis polynomial attached to each node.
    pub fn basis_polynomials(&self, mesh: &SpaceMesh, origin: Point) -> Vec<Poly2> {
        let (oa, oc) = self.split(origin);
        let across: Vec<f64> = self
            .lines
            .iter()
            .map(|l| self.across_coord(mesh, l.line) - oc)
            .collect();
        let across_c = lagrange_coefficients(&across);
        let mut out = Vec::with_capacity(self.len());
        for (l, line) in self.lines.iter().enumerate() {
            let along: Vec<f64> = line.nodes.iter().map(|&k| self.along_coord(mesh, k) - oa).collect();
            for along_c in lagrange_coefficients(&along) {
                let mut poly = [[0.0; 3]; 3];
                for (p, a) in along_c.iter().enumerate() {
                    for (q, c) in across_c[l].iter().enumerate() {
                        match self.crossing {
                            Crossing::YLines => poly[p][q] += a * c,
                            Crossing::XLines => poly[q][p] += a * c,
                        }
                    }
                }
                out.push(poly);
            }
        }
        out
    }
}

/// Values at `t` of the 1D Lagrange basis on `nodes`.
pub fn lagrange_values(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|k| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != k)
                .map(|(_, &s)| (t - s) / (nodes[k] - s))
                .product()
        })
        .collect()
}

/// Monomial coefficients of the 1D Lagrange basis on up to three nodes.
pub fn lagrange_coefficients(nodes: &[f64]) -> Vec<[f64; 3]> {
    assert!(nodes.len() <= 3, "at most quadratic bases are supported");
    (0..nodes.len())
        .map(|k| {
            let mut c = [0.0; 3];
            c[0] = 1.0;
            let mut denom = 1.0;
            let mut deg = 0;
            for (m, &s) in nodes.iter().enumerate() {
                if m == k {
                    continue;
                }
                // multiply by (t - s)
                for p in (0..=deg).rev() {
                    c[p + 1] += c[p];
                    c[p] *= -s;
                }
                deg += 1;
                denom *= nodes[k] - s;
            }
            c.map(|v| v / denom)
        })
        .collect()
}

pub fn eval_poly2(poly: &Poly2, x: f64, y: f64) -> f64 {
    let xs = [1.0, x, x * x];
    let ys = [1.0, y, y * y];
    let mut s = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            s += poly[p][q] * xs[p] * ys[q];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_space_mesh, Bounds};
    use approx::assert_abs_diff_eq;

    fn mesh() -> SpaceMesh {
        build_space_mesh(Bounds::new(0.0, 1.0, 0.0, 1.0), 20, 20).unwrap()
    }

    fn skewed_q2() -> Stencil {
        Stencil {
            degree: 2,
            crossing: Crossing::YLines,
            lines: vec![
                StencilLine { line: 5, nodes: vec![4, 5, 6] },
                StencilLine { line: 6, nodes: vec![5, 6, 7] },
                StencilLine { line: 7, nodes: vec![6, 7, 8] },
            ],
            anchors: vec![],
        }
    }

    #[test]
    fn basis_sums_to_one() {
        let w = lagrange_values(&[0.0, 1.0, 3.0], 7.3);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coefficient_form_matches_values() {
        let nodes = [0.1, -0.2, 0.45];
        let c = lagrange_coefficients(&nodes);
        for t in [-1.0, 0.0, 0.3, 2.0] {
            let v = lagrange_values(&nodes, t);
            for k in 0..3 {
                let from_c = c[k][0] + c[k][1] * t + c[k][2] * t * t;
                assert_abs_diff_eq!(from_c, v[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn q2_reproduces_bilinear_and_biquadratic() {
        let m = mesh();
        let s = skewed_q2();
        let f = |p: Point| p.x * p.y + 0.5 * p.x * p.x * p.y * p.y - p.y * p.y + 2.0;
        let values: Vec<f64> = s.points().iter().map(|&(i, j)| f(m.point(i, j))).collect();
        for target in [Point::new(0.2, 0.1), Point::new(0.37, 0.61), Point::new(-0.1, 0.9)] {
            assert_abs_diff_eq!(s.evaluate(&m, &values, target), f(target), epsilon = 1e-11);
        }
    }

    #[test]
    fn x_lines_basis_polynomials_reproduce_weights() {
        let m = mesh();
        let s = Stencil {
            degree: 2,
            crossing: Crossing::XLines,
            lines: vec![
                StencilLine { line: 3, nodes: vec![9, 10, 11] },
                StencilLine { line: 4, nodes: vec![9, 10, 11] },
                StencilLine { line: 5, nodes: vec![10, 11, 12] },
            ],
            anchors: vec![],
        };
        let origin = Point::new(0.11, 0.52);
        let polys = s.basis_polynomials(&m, origin);
        let target = Point::new(0.07, 0.49);
        let w = s.lagrange_weights(&m, target);
        for (poly, wk) in polys.iter().zip(&w) {
            let d = target - origin;
            assert_abs_diff_eq!(eval_poly2(poly, d.x, d.y), *wk, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_at_a_node_is_exact() {
        let m = mesh();
        let s = skewed_q2();
        let values: Vec<f64> = (0..9).map(|k| (k as f64).sin() + 3.0).collect();
        let pts = s.points();
        for (k, &(i, j)) in pts.iter().enumerate() {
            assert_eq!(s.evaluate(&m, &values, m.point(i, j)), values[k]);
        }
    }

    #[test]
    fn bounding_box_membership() {
        let m = mesh();
        let s = skewed_q2();
        assert!(s.bounding_box_contains(&m, m.point(6, 6)));
        assert!(!s.bounding_box_contains(&m, m.point(6, 4)));
        assert!(s.min_separation(&m) > 0.99);
    }
}
