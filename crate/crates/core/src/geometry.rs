//! Level-set description of the physical domain.
//!
//! Every shape reports `phi < 0` strictly inside, `phi > 0` outside. Shapes
//! with a closed-form closest point (rectangle, disc, half plane, U channel)
//! use it for projection; composed shapes fall back to damped Newton on `phi`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mesh::SpaceMesh;
use crate::Point;

pub trait Shape: Send + Sync + fmt::Debug {
    fn phi(&self, p: Point) -> f64;

    /// Exact closest point on the boundary, when known in closed form.
    fn closest_boundary_point(&self, _p: Point) -> Option<Point> {
        None
    }

    /// Analytic unit inward normal at a boundary point, when known.
    fn inward_normal(&self, _p: Point) -> Option<Point> {
        None
    }
}

pub type SharedShape = Arc<dyn Shape>;

/// Inward unit normal from the central-difference gradient of `phi`.
pub fn numerical_normal(shape: &dyn Shape, p: Point, h: f64) -> Option<Point> {
    let e = 1e-6 * h;
    let gx = (shape.phi(p + Point::new(e, 0.0)) - shape.phi(p - Point::new(e, 0.0))) / (2.0 * e);
    let gy = (shape.phi(p + Point::new(0.0, e)) - shape.phi(p - Point::new(0.0, e))) / (2.0 * e);
    let g = Point::new(gx, gy);
    let norm = g.norm();
    (norm > 0.0 && norm.is_finite()).then(|| -g / norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: Point,
    pub normal: Point,
}

const NEWTON_MAX_ITERATIONS: usize = 50;

/// Project a point of the ghost band onto the zero level set and return the
/// unit inward normal there. `h` is the mesh length scale.
pub fn project_to_boundary(shape: &dyn Shape, x_g: Point, h: f64) -> Result<Projection> {
    let point = match shape.closest_boundary_point(x_g) {
        Some(p) => p,
        None => newton_project(shape, x_g, h)?,
    };
    let offset = point - x_g;
    let dist = offset.norm();
    let normal = if let Some(n) = shape.inward_normal(point) {
        n
    } else if dist > 1e-9 * h && shape.closest_boundary_point(x_g).is_some() {
        // exact closest point: the offset is normal to the boundary
        offset / dist
    } else {
        numerical_normal(shape, point, h)
            .or_else(|| numerical_normal(shape, x_g, h))
            .ok_or_else(|| {
                Error::Geometry(format!(
                    "degenerate level-set gradient at ({}, {})",
                    point.x, point.y
                ))
            })?
    };
    // At a kink the level-set gradient can disagree with the side the ghost
    // sits on; the ghost-to-boundary direction is the only safe normal there.
    let normal = if dist > 1e-9 * h && offset.dot(&normal) < 0.0 {
        offset / dist
    } else {
        normal
    };
    Ok(Projection { point, normal })
}

fn newton_project(shape: &dyn Shape, x_g: Point, h: f64) -> Result<Point> {
    let tol = 1e-12 * h;
    let mut x = x_g;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let value = shape.phi(x);
        if value.abs() <= tol {
            return Ok(x);
        }
        let e = 1e-6 * h;
        let g = Point::new(
            (shape.phi(x + Point::new(e, 0.0)) - shape.phi(x - Point::new(e, 0.0))) / (2.0 * e),
            (shape.phi(x + Point::new(0.0, e)) - shape.phi(x - Point::new(0.0, e))) / (2.0 * e),
        );
        let g2 = g.norm_squared();
        if !(g2 > 0.0) || !g2.is_finite() {
            break;
        }
        let mut step = g * (value / g2);
        // damping: never move more than two cells in one iteration
        let len = step.norm();
        if len > 2.0 * h {
            step *= 2.0 * h / len;
        }
        x -= step;
    }
    Err(Error::Projection {
        x: x_g.x,
        y: x_g.y,
        iterations: NEWTON_MAX_ITERATIONS,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct HalfPlane {
    pub origin: Point,
    /// unit normal pointing into the domain
    pub normal: Point,
}

impl HalfPlane {
    pub fn new(origin: Point, inward: Point) -> Self {
        Self {
            origin,
            normal: inward.normalize(),
        }
    }
}

impl Shape for HalfPlane {
    fn phi(&self, p: Point) -> f64 {
        -(p - self.origin).dot(&self.normal)
    }

    fn closest_boundary_point(&self, p: Point) -> Option<Point> {
        Some(p + self.normal * self.phi(p))
    }

    fn inward_normal(&self, _p: Point) -> Option<Point> {
        Some(self.normal)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Rectangle {
    pub min: Point,
    pub max: Point,
}

impl Rectangle {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }
}

impl Shape for Rectangle {
    fn phi(&self, p: Point) -> f64 {
        let c = (self.min + self.max) * 0.5;
        let half = (self.max - self.min) * 0.5;
        let q = Point::new((p.x - c.x).abs() - half.x, (p.y - c.y).abs() - half.y);
        let outside = Point::new(q.x.max(0.0), q.y.max(0.0)).norm();
        outside + q.x.max(q.y).min(0.0)
    }

    fn closest_boundary_point(&self, p: Point) -> Option<Point> {
        let inside = p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y;
        if !inside {
            return Some(Point::new(
                p.x.clamp(self.min.x, self.max.x),
                p.y.clamp(self.min.y, self.max.y),
            ));
        }
        let candidates = [
            (p.x - self.min.x, Point::new(self.min.x, p.y)),
            (self.max.x - p.x, Point::new(self.max.x, p.y)),
            (p.y - self.min.y, Point::new(p.x, self.min.y)),
            (self.max.y - p.y, Point::new(p.x, self.max.y)),
        ];
        candidates
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, q)| q)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }
}

impl Shape for Disc {
    fn phi(&self, p: Point) -> f64 {
        (p - self.center).norm() - self.radius
    }

    fn closest_boundary_point(&self, p: Point) -> Option<Point> {
        let d = p - self.center;
        let r = d.norm();
        let dir = if r > 0.0 { d / r } else { Point::new(1.0, 0.0) };
        Some(self.center + dir * self.radius)
    }

    fn inward_normal(&self, p: Point) -> Option<Point> {
        let d = p - self.center;
        let r = d.norm();
        (r > 0.0).then(|| -d / r)
    }
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Segment(Point, Point),
    /// counter-clockwise arc from `start` to `end` angle
    Arc {
        center: Point,
        radius: f64,
        start: f64,
        end: f64,
    },
}

impl Piece {
    fn closest(&self, p: Point) -> Point {
        match *self {
            Piece::Segment(a, b) => {
                let ab = b - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                a + ab * t
            }
            Piece::Arc {
                center,
                radius,
                start,
                end,
            } => {
                let d = p - center;
                let at = |th: f64| center + Point::new(th.cos(), th.sin()) * radius;
                if d.norm() > 0.0 {
                    let th = d.y.atan2(d.x);
                    let rel = (th - start).rem_euclid(2.0 * PI);
                    if rel <= end - start {
                        return center + d.normalize() * radius;
                    }
                }
                let (a, b) = (at(start), at(end));
                if (p - a).norm() <= (p - b).norm() {
                    a
                } else {
                    b
                }
            }
        }
    }
}

/// Which way the open ends of a U channel point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Down,
    Up,
    Left,
    Right,
}

/// U-shaped channel: two straight legs of equal length joined by a
/// half-annulus bend. Membership is the union of the three closed parts;
/// `phi` is the exact signed distance to the outer outline, so the internal
/// seams between legs and bend are not boundaries.
#[derive(Debug, Clone)]
pub struct UChannel {
    pub center: Point,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub leg_length: f64,
    pub orientation: Orientation,
    pieces: Vec<Piece>,
}

impl UChannel {
    pub fn new(
        center: Point,
        inner_radius: f64,
        outer_radius: f64,
        leg_length: f64,
        orientation: Orientation,
    ) -> Result<Self> {
        if !(inner_radius > 0.0 && outer_radius > inner_radius && leg_length >= 0.0) {
            return Err(Error::Geometry(format!(
                "u_channel needs 0 < inner_radius < outer_radius and leg_length >= 0, got \
                 {inner_radius}, {outer_radius}, {leg_length}"
            )));
        }
        let (ri, ro, l) = (inner_radius, outer_radius, leg_length);
        let o = Point::zeros();
        let mut pieces = vec![
            Piece::Arc {
                center: o,
                radius: ro,
                start: 0.0,
                end: PI,
            },
            Piece::Arc {
                center: o,
                radius: ri,
                start: 0.0,
                end: PI,
            },
        ];
        for s in [-1.0, 1.0] {
            let p = |x: f64, y: f64| Point::new(s * x, y);
            pieces.push(Piece::Segment(p(ro, 0.0), p(ro, -l)));
            pieces.push(Piece::Segment(p(ri, 0.0), p(ri, -l)));
            pieces.push(Piece::Segment(p(ri, -l), p(ro, -l)));
        }
        Ok(Self {
            center,
            inner_radius,
            outer_radius,
            leg_length,
            orientation,
            pieces,
        })
    }

    /// Channel width (outer minus inner radius).
    pub fn width(&self) -> f64 {
        self.outer_radius - self.inner_radius
    }

    /// The legs and the bend, as separate shapes (local frame rotated back).
    pub fn leg_rectangles(&self) -> [Rectangle; 2] {
        let (ri, ro, l) = (self.inner_radius, self.outer_radius, self.leg_length);
        let corners = |x0: f64, x1: f64| {
            let a = self.to_global(Point::new(x0, -l));
            let b = self.to_global(Point::new(x1, 0.0));
            Rectangle::new(
                Point::new(a.x.min(b.x), a.y.min(b.y)),
                Point::new(a.x.max(b.x), a.y.max(b.y)),
            )
        };
        [corners(-ro, -ri), corners(ri, ro)]
    }

    /// Centre of the open end of each leg (left leg first in the local frame).
    pub fn leg_ends(&self) -> [Point; 2] {
        let mid = 0.5 * (self.inner_radius + self.outer_radius);
        [
            self.to_global(Point::new(-mid, -self.leg_length)),
            self.to_global(Point::new(mid, -self.leg_length)),
        ]
    }

    fn rotation(&self) -> (f64, f64) {
        // (cos, sin) of the rotation taking the local "down" frame to global
        match self.orientation {
            Orientation::Down => (1.0, 0.0),
            Orientation::Up => (-1.0, 0.0),
            Orientation::Left => (0.0, -1.0),
            Orientation::Right => (0.0, 1.0),
        }
    }

    pub fn to_local(&self, p: Point) -> Point {
        let (c, s) = self.rotation();
        let d = p - self.center;
        Point::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    pub fn to_global(&self, q: Point) -> Point {
        let (c, s) = self.rotation();
        self.center + Point::new(c * q.x - s * q.y, s * q.x + c * q.y)
    }

    fn contains_closed_local(&self, q: Point) -> bool {
        let (ri, ro, l) = (self.inner_radius, self.outer_radius, self.leg_length);
        let r = q.norm();
        (q.y >= 0.0 && r >= ri && r <= ro) || (q.y <= 0.0 && q.y >= -l && q.x.abs() >= ri && q.x.abs() <= ro)
    }

    fn closest_local(&self, q: Point) -> Point {
        self.pieces
            .iter()
            .map(|piece| piece.closest(q))
            .min_by(|a, b| (a - q).norm().total_cmp(&(b - q).norm()))
            .expect("outline has pieces")
    }
}

impl Shape for UChannel {
    fn phi(&self, p: Point) -> f64 {
        let q = self.to_local(p);
        let d = (self.closest_local(q) - q).norm();
        if self.contains_closed_local(q) {
            -d
        } else {
            d
        }
    }

    fn closest_boundary_point(&self, p: Point) -> Option<Point> {
        let q = self.to_local(p);
        Some(self.to_global(self.closest_local(q)))
    }
}

#[derive(Debug)]
pub struct Union(pub Vec<SharedShape>);

impl Shape for Union {
    fn phi(&self, p: Point) -> f64 {
        self.0.iter().map(|s| s.phi(p)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug)]
pub struct Intersection(pub Vec<SharedShape>);

impl Shape for Intersection {
    fn phi(&self, p: Point) -> f64 {
        self.0.iter().map(|s| s.phi(p)).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug)]
pub struct Complement(pub SharedShape);

impl Shape for Complement {
    fn phi(&self, p: Point) -> f64 {
        -self.0.phi(p)
    }

    fn closest_boundary_point(&self, p: Point) -> Option<Point> {
        self.0.closest_boundary_point(p)
    }

    fn inward_normal(&self, p: Point) -> Option<Point> {
        self.0.inward_normal(p).map(|n| -n)
    }
}

/// The mesh box with walls on the outer cell faces.
pub fn mesh_frame(mesh: &SpaceMesh) -> Rectangle {
    let b = &mesh.bounds;
    Rectangle::new(
        Point::new(b.x_min - 0.5 * mesh.dx, b.y_min - 0.5 * mesh.dy),
        Point::new(b.x_max + 0.5 * mesh.dx, b.y_max + 0.5 * mesh.dy),
    )
}

/// A shape cut down to the mesh frame, so that a domain reaching past the
/// mesh is closed by walls on the outer cell faces.
#[derive(Debug)]
pub struct Clipped<'a> {
    pub shape: &'a dyn Shape,
    pub frame: Rectangle,
}

impl Shape for Clipped<'_> {
    fn phi(&self, p: Point) -> f64 {
        self.shape.phi(p).max(self.frame.phi(p))
    }

    fn closest_boundary_point(&self, p: Point) -> Option<Point> {
        let a = self.shape.closest_boundary_point(p)?;
        let b = self.frame.closest_boundary_point(p)?;
        let tol = 1e-12 * (self.frame.max - self.frame.min).norm();
        // a corner where the shape meets the frame
        let on_both = |q: Point| self.shape.phi(q).abs() <= tol && self.frame.phi(q).abs() <= tol;
        let corners = [
            self.shape.closest_boundary_point(b).filter(|&q| on_both(q)),
            self.frame.closest_boundary_point(a).filter(|&q| on_both(q)),
        ];
        let candidates = [
            (self.frame.phi(a) <= tol).then_some(a),
            (self.shape.phi(b) <= tol).then_some(b),
            corners[0],
            corners[1],
        ];
        candidates
            .into_iter()
            .flatten()
            .min_by(|u, v| (u - p).norm().total_cmp(&(v - p).norm()))
    }

    fn inward_normal(&self, p: Point) -> Option<Point> {
        if self.shape.phi(p).abs() <= self.frame.phi(p).abs() {
            self.shape.inward_normal(p)
        } else {
            None
        }
    }
}

/// Builds a shape from named JSON parameters. Implementations are looked up
/// by name from [`GeometryRegistry`].
pub trait GeometryBuilder: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, params: &serde_json::Value, mesh: &SpaceMesh) -> Result<SharedShape>;
}

fn params<T: serde::de::DeserializeOwned>(kind: &str, value: &serde_json::Value) -> Result<T> {
    serde_json::from_value(value.clone())
        .map_err(|e| Error::config(format!("geometry.{kind}"), e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

/// The whole computational box, with walls on the outer cell faces
/// (half a cell beyond the outermost nodes) so that every mesh node is
/// interior and the wall-normal mirror of each ghost lands on a node.
struct BoxBuilder;

impl GeometryBuilder for BoxBuilder {
    fn name(&self) -> &'static str {
        "box"
    }

    fn build(&self, value: &serde_json::Value, mesh: &SpaceMesh) -> Result<SharedShape> {
        let _: NoParams = params("box", value)?;
        Ok(Arc::new(mesh_frame(mesh)))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RectangleParams {
    min: [f64; 2],
    max: [f64; 2],
}

struct RectangleBuilder;

impl GeometryBuilder for RectangleBuilder {
    fn name(&self) -> &'static str {
        "rectangle"
    }

    fn build(&self, value: &serde_json::Value, _mesh: &SpaceMesh) -> Result<SharedShape> {
        let p: RectangleParams = params("rectangle", value)?;
        if p.max[0] <= p.min[0] || p.max[1] <= p.min[1] {
            return Err(Error::Geometry("rectangle max must exceed min".into()));
        }
        Ok(Arc::new(Rectangle::new(p.min.into(), p.max.into())))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscParams {
    center: [f64; 2],
    radius: f64,
}

struct DiscBuilder;

impl GeometryBuilder for DiscBuilder {
    fn name(&self) -> &'static str {
        "disc"
    }

    fn build(&self, value: &serde_json::Value, _mesh: &SpaceMesh) -> Result<SharedShape> {
        let p: DiscParams = params("disc", value)?;
        if !(p.radius > 0.0) {
            return Err(Error::Geometry("disc radius must be positive".into()));
        }
        Ok(Arc::new(Disc::new(p.center.into(), p.radius)))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UChannelParams {
    center: [f64; 2],
    inner_radius: f64,
    outer_radius: f64,
    leg_length: f64,
    orientation: Orientation,
}

struct UChannelBuilder;

impl GeometryBuilder for UChannelBuilder {
    fn name(&self) -> &'static str {
        "u_channel"
    }

    fn build(&self, value: &serde_json::Value, _mesh: &SpaceMesh) -> Result<SharedShape> {
        let p: UChannelParams = params("u_channel", value)?;
        Ok(Arc::new(UChannel::new(
            p.center.into(),
            p.inner_radius,
            p.outer_radius,
            p.leg_length,
            p.orientation,
        )?))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfPlaneParams {
    origin: [f64; 2],
    inward_normal: [f64; 2],
}

struct HalfPlaneBuilder;

impl GeometryBuilder for HalfPlaneBuilder {
    fn name(&self) -> &'static str {
        "half_plane"
    }

    fn build(&self, value: &serde_json::Value, _mesh: &SpaceMesh) -> Result<SharedShape> {
        let p: HalfPlaneParams = params("half_plane", value)?;
        let n = Point::from(p.inward_normal);
        if !(n.norm() > 0.0) {
            return Err(Error::Geometry("half_plane normal must be nonzero".into()));
        }
        Ok(Arc::new(HalfPlane::new(p.origin.into(), n)))
    }
}

pub struct GeometryRegistry {
    builders: BTreeMap<&'static str, Box<dyn GeometryBuilder>>,
}

impl Default for GeometryRegistry {
    fn default() -> Self {
        let mut r = Self {
            builders: BTreeMap::new(),
        };
        r.register(Box::new(BoxBuilder));
        r.register(Box::new(RectangleBuilder));
        r.register(Box::new(DiscBuilder));
        r.register(Box::new(UChannelBuilder));
        r.register(Box::new(HalfPlaneBuilder));
        r
    }
}

impl GeometryRegistry {
    pub fn register(&mut self, builder: Box<dyn GeometryBuilder>) {
        self.builders.insert(builder.name(), builder);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn build(&self, kind: &str, params: &serde_json::Value, mesh: &SpaceMesh) -> Result<SharedShape> {
        let builder = self.builders.get(kind).ok_or_else(|| Error::UnknownStrategy {
            kind: "geometry",
            name: kind.to_string(),
            available: self.names().join(", "),
        })?;
        builder.build(params, mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_space_mesh, Bounds};
    use approx::assert_abs_diff_eq;

    #[test]
    fn disc_radial_projection() {
        let disc = Disc::new(Point::zeros(), 3.0);
        let pr = project_to_boundary(&disc, Point::new(3.3, 0.0), 0.075).unwrap();
        assert_abs_diff_eq!(pr.point.x, 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pr.point.y, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pr.normal.x, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pr.normal.y, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn half_plane_projection() {
        let plane = HalfPlane::new(Point::zeros(), Point::new(0.0, -1.0));
        assert!(plane.phi(Point::new(0.0, -1.0)) < 0.0);
        let pr = project_to_boundary(&plane, Point::new(0.2, 0.1), 0.05).unwrap();
        assert_abs_diff_eq!(pr.point.x, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(pr.point.y, 0.0, epsilon = 1e-15);
        assert_eq!(pr.normal, Point::new(0.0, -1.0));
    }

    #[test]
    fn rectangle_sdf_and_corner_projection() {
        let r = Rectangle::new(Point::new(0.0, 0.0), Point::new(2.0, 1.0));
        assert_abs_diff_eq!(r.phi(Point::new(1.0, 0.5)), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.phi(Point::new(3.0, 2.0)), 2f64.sqrt(), epsilon = 1e-15);
        let pr = project_to_boundary(&r, Point::new(-0.1, -0.1), 0.1).unwrap();
        assert_eq!(pr.point, Point::new(0.0, 0.0));
        assert_abs_diff_eq!(pr.normal.x, 0.5f64.sqrt(), epsilon = 1e-14);
        let pr = project_to_boundary(&r, Point::new(-0.1, 0.4), 0.1).unwrap();
        assert_eq!(pr.point, Point::new(0.0, 0.4));
        assert_abs_diff_eq!(pr.normal.x, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn u_channel_outer_arc_projection() {
        let u = UChannel::new(Point::new(4.0, 2.0), 2.5, 3.5, 1.5, Orientation::Down).unwrap();
        let x_g = Point::new(4.0 + 2.6, 2.0 + 2.6);
        assert!(u.phi(x_g) > 0.0);
        let pr = project_to_boundary(&u, x_g, 0.1).unwrap();
        assert!(u.phi(pr.point).abs() < 1e-12);
        assert_abs_diff_eq!((pr.point - u.center).norm(), 3.5, epsilon = 1e-12);
        let grad = Point::new(
            (u.phi(pr.point + Point::new(1e-7, 0.0)) - u.phi(pr.point - Point::new(1e-7, 0.0))) / 2e-7,
            (u.phi(pr.point + Point::new(0.0, 1e-7)) - u.phi(pr.point - Point::new(0.0, 1e-7))) / 2e-7,
        );
        // gradient taken from outside the channel where phi is a distance
        let outward = (x_g - pr.point).normalize();
        assert!(pr.normal.dot(&outward) < -0.999);
        assert!(pr.normal.dot(&grad) < 0.0 || grad.norm() < 1e-3);
    }

    #[test]
    fn u_channel_seams_are_interior() {
        let u = UChannel::new(Point::new(4.0, 2.0), 2.5, 3.5, 1.5, Orientation::Down).unwrap();
        // on the line where legs meet the bend
        assert!(u.phi(Point::new(1.0, 2.0)) < 0.0);
        assert!(u.phi(Point::new(7.0, 2.0)) < 0.0);
        // between the legs, below the bend
        assert!(u.phi(Point::new(4.0, 1.0)) > 0.0);
        assert!(u.phi(Point::new(4.0, 5.0)) < 0.0);
        let ends = u.leg_ends();
        assert_abs_diff_eq!(ends[0].x, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ends[1].y, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn rotated_u_channel_matches_rotated_membership() {
        let down = UChannel::new(Point::zeros(), 1.0, 2.0, 1.0, Orientation::Down).unwrap();
        let left = UChannel::new(Point::zeros(), 1.0, 2.0, 1.0, Orientation::Left).unwrap();
        for &(x, y) in &[(0.5, 1.5), (1.5, -0.5), (-1.5, -0.9), (0.0, 1.2), (0.3, -0.3)] {
            // rotating a point by -90 degrees maps the "down" channel to "left"
            let p = Point::new(x, y);
            let q = Point::new(y, -x);
            assert_abs_diff_eq!(down.phi(p), left.phi(q), epsilon = 1e-12);
        }
    }

    #[test]
    fn union_newton_projection_lands_on_zero_set() {
        let a: SharedShape = Arc::new(Disc::new(Point::new(-0.5, 0.0), 1.0));
        let b: SharedShape = Arc::new(Disc::new(Point::new(0.5, 0.0), 1.0));
        let u = Union(vec![a, b]);
        let pr = project_to_boundary(&u, Point::new(0.1, 1.05), 0.05).unwrap();
        assert!(u.phi(pr.point).abs() <= 1e-12 * 0.05);
        assert!(pr.normal.y < 0.0);
        assert_abs_diff_eq!(pr.normal.norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn complement_flips_sign_and_normal() {
        let d: SharedShape = Arc::new(Disc::new(Point::zeros(), 1.0));
        let c = Complement(d);
        assert!(c.phi(Point::new(2.0, 0.0)) < 0.0);
        let pr = project_to_boundary(&c, Point::new(0.9, 0.0), 0.05).unwrap();
        assert_abs_diff_eq!(pr.normal.x, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn intersection_of_discs() {
        let a: SharedShape = Arc::new(Disc::new(Point::new(-0.5, 0.0), 1.0));
        let b: SharedShape = Arc::new(Disc::new(Point::new(0.5, 0.0), 1.0));
        let lens = Intersection(vec![a, b]);
        assert!(lens.phi(Point::zeros()) < 0.0);
        assert!(lens.phi(Point::new(1.2, 0.0)) > 0.0);
        let pr = project_to_boundary(&lens, Point::new(0.0, 0.95), 0.05).unwrap();
        assert!(lens.phi(pr.point).abs() < 1e-12);
    }

    #[test]
    fn registry_builds_by_name_and_rejects_unknown() {
        let mesh = build_space_mesh(Bounds::square(3.0), 20, 20).unwrap();
        let reg = GeometryRegistry::default();
        let disc = reg
            .build("disc", &serde_json::json!({"center": [0.0, 0.0], "radius": 3.0}), &mesh)
            .unwrap();
        assert!(disc.phi(Point::zeros()) < 0.0);
        assert!(reg.build("hexagon", &serde_json::json!({}), &mesh).is_err());
        assert!(reg
            .build("disc", &serde_json::json!({"center": [0.0, 0.0], "radius": 3.0, "radus": 1}), &mesh)
            .is_err());
        let boxed = reg.build("box", &serde_json::json!({}), &mesh).unwrap();
        assert!(boxed.phi(mesh.point(0, 0)) < 0.0);
        assert!(boxed.phi(mesh.point(-1, 5)) > 0.0);
    }
}
