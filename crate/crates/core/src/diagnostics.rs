//! Observables computed from the density and kinetic fields. All functions
//! are pure and sum in a fixed order.

use serde::{Deserialize, Serialize};

use crate::classify::GridClassification;
use crate::error::{Error, Result};
use crate::kinetic::KineticField;
use crate::Point;

/// `dx dy dv sum f` over interior points.
pub fn total_mass(f: &KineticField, class: &GridClassification) -> f64 {
    let mesh = &class.mesh;
    let mut s = 0.0;
    for &(ix, iy) in &class.interior {
        s += f.point_slice(ix, iy).iter().sum::<f64>();
    }
    s * mesh.dx * mesh.dy * f.dv
}

/// `dx dy sum rho` over interior points.
pub fn density_integral(rho: &[f64], class: &GridClassification) -> f64 {
    let mesh = &class.mesh;
    class
        .interior
        .iter()
        .map(|&(ix, iy)| rho[mesh.flat(ix, iy)])
        .sum::<f64>()
        * mesh.dx
        * mesh.dy
}

pub fn max_density(rho: &[f64], class: &GridClassification) -> f64 {
    class
        .interior
        .iter()
        .map(|&(ix, iy)| rho[class.mesh.flat(ix, iy)])
        .fold(0.0, f64::max)
}

/// Density-weighted mean distance from `center`.
pub fn mean_radius(rho: &[f64], class: &GridClassification, center: Point) -> Result<f64> {
    let mesh = &class.mesh;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(ix, iy) in &class.interior {
        let r = rho[mesh.flat(ix, iy)];
        num += (mesh.point(ix, iy) - center).norm() * r;
        den += r;
    }
    if den <= 0.0 {
        return Err(Error::Numerical("mean radius of a vanishing density".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// along x, at fixed y
    X,
    /// along y, at fixed x
    Y,
}

/// Interior values on the grid line nearest `offset` (a y value for
/// `Axis::X`, an x value for `Axis::Y`), as `(coordinate along the line, value)`.
pub fn section_profile(rho: &[f64], class: &GridClassification, axis: Axis, offset: f64) -> Result<Vec<(f64, f64)>> {
    let mesh = &class.mesh;
    let b = &mesh.bounds;
    let (lo, hi, h) = match axis {
        Axis::X => (b.y_min, b.y_max, mesh.dy),
        Axis::Y => (b.x_min, b.x_max, mesh.dx),
    };
    if !(offset >= lo - 0.5 * h && offset <= hi + 0.5 * h) {
        return Err(Error::Numerical(format!("section offset {offset} outside [{lo}, {hi}]")));
    }
    let line = ((offset - lo) / h).round() as isize;
    let mut out = Vec::new();
    match axis {
        Axis::X => {
            for ix in 0..=mesh.n_x as isize {
                if class.is_interior(ix, line) {
                    out.push((mesh.x(ix), rho[mesh.flat(ix, line)]));
                }
            }
        }
        Axis::Y => {
            for iy in 0..=mesh.n_y as isize {
                if class.is_interior(line, iy) {
                    out.push((mesh.y(iy), rho[mesh.flat(line, iy)]));
                }
            }
        }
    }
    Ok(out)
}

/// Least-squares fit of `log rho` against `|s - center|` for section samples
/// with distance in `[r_lo, r_hi]`. Returns the decay rate (slope magnitude)
/// and the coefficient of determination.
pub fn tail_slope(section: &[(f64, f64)], center: f64, r_lo: f64, r_hi: f64) -> Result<(f64, f64)> {
    let mut pts = Vec::new();
    for &(s, v) in section {
        let r = (s - center).abs();
        if r >= r_lo && r <= r_hi {
            if !(v > 0.0) {
                return Err(Error::Numerical(format!("non-positive density {v} in the tail window")));
            }
            pts.push((r, v.ln()));
        }
    }
    if pts.len() < 4 {
        return Err(Error::Numerical(format!("tail window holds {} points, need 4", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate tail window".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope.abs(), r2))
}

/// Angularly averaged radial profile with bins of width `w` centred at `k w`:
/// `(mean radius, mean value)` per bin, `None` for empty bins.
pub fn radial_profile(rho: &[f64], class: &GridClassification, center: Point, w: f64) -> Vec<Option<(f64, f64)>> {
    let mesh = &class.mesh;
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    for &(ix, iy) in &class.interior {
        let r = (mesh.point(ix, iy) - center).norm();
        let k = (r / w).round() as usize;
        if sums.len() <= k {
            sums.resize(k + 1, (0.0, 0.0, 0));
        }
        sums[k].0 += r;
        sums[k].1 += rho[mesh.flat(ix, iy)];
        sums[k].2 += 1;
    }
    sums.into_iter()
        .map(|(r, v, n)| (n > 0).then(|| (r / n as f64, v / n as f64)))
        .collect()
}

/// Radius of the maximum of the angularly averaged profile, refined by a
/// parabola through the neighbouring bins.
pub fn front_radius(rho: &[f64], class: &GridClassification, center: Point) -> f64 {
    let w = class.mesh.h_max();
    let prof: Vec<f64> = radial_profile(rho, class, center, w)
        .into_iter()
        .map(|b| b.map_or(f64::NAN, |(_, v)| v))
        .collect();
    let mut best = 0;
    for (k, &v) in prof.iter().enumerate() {
        if v > prof[best] || prof[best].is_nan() {
            best = k;
        }
    }
    if best == 0 || best + 1 >= prof.len() {
        return best as f64 * w;
    }
    let (a, b, c) = (prof[best - 1], prof[best], prof[best + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 && a.is_finite() && c.is_finite() {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    (best as f64 + shift) * w
}

/// Relative L2 deviation of `rho` from its angular average (the radial
/// profile interpolated linearly in radius).
pub fn radial_asymmetry(rho: &[f64], class: &GridClassification, center: Point) -> f64 {
    let mesh = &class.mesh;
    let prof: Vec<(f64, f64)> = radial_profile(rho, class, center, mesh.h_max())
        .into_iter()
        .flatten()
        .collect();
    let average = |r: f64| -> f64 {
        if r <= prof[0].0 {
            return prof[0].1;
        }
        for w in prof.windows(2) {
            if r <= w[1].0 {
                let t = (r - w[0].0) / (w[1].0 - w[0].0);
                return (1.0 - t) * w[0].1 + t * w[1].1;
            }
        }
        prof[prof.len() - 1].1
    };
    let mut dev = 0.0;
    let mut norm = 0.0;
    for &(ix, iy) in &class.interior {
        let v = rho[mesh.flat(ix, iy)];
        let r = (mesh.point(ix, iy) - center).norm();
        dev += (v - average(r)).powi(2);
        norm += v * v;
    }
    if norm == 0.0 {
        0.0
    } else {
        (dev / norm).sqrt()
    }
}

/// Positions and values of the local maxima of a section profile on each side
/// of `center` that rise above the value nearest the centre.
pub fn off_center_maxima(section: &[(f64, f64)], center: f64) -> (Option<(f64, f64)>, Option<(f64, f64)>) {
    if section.len() < 3 {
        return (None, None);
    }
    let mid = section
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - center).abs().total_cmp(&(b.1 .0 - center).abs()))
        .map(|(k, _)| k)
        .unwrap();
    let centre_value = section[mid].1;
    let mut left: Option<(f64, f64)> = None;
    let mut right: Option<(f64, f64)> = None;
    for k in 1..section.len() - 1 {
        let (s, v) = section[k];
        if v > section[k - 1].1 && v >= section[k + 1].1 && v > centre_value {
            let slot = if k < mid {
                &mut left
            } else if k > mid {
                &mut right
            } else {
                continue;
            };
            if slot.map_or(true, |(_, bv)| v > bv) {
                *slot = Some((s, v));
            }
        }
    }
    (left, right)
}

/// The two largest local maxima of the density (8-neighbour test over interior
/// points, plateaus counted once) whose value is at least `rel` times the
/// global maximum.
pub fn largest_maxima(rho: &[f64], class: &GridClassification, rel: f64) -> Vec<(Point, f64)> {
    let mesh = &class.mesh;
    let top = max_density(rho, class);
    let mut found = Vec::new();
    for &(ix, iy) in &class.interior {
        let v = rho[mesh.flat(ix, iy)];
        if v < rel * top || v <= 0.0 {
            continue;
        }
        let mut is_max = true;
        'n: for dy in -1..=1isize {
            for dx in -1..=1isize {
                if (dx, dy) == (0, 0) || !class.is_interior(ix + dx, iy + dy) {
                    continue;
                }
                let u = rho[mesh.flat(ix + dx, iy + dy)];
                // earlier neighbours in row-major order win ties
                let earlier = (dy, dx) < (0, 0);
                if u > v || (earlier && u == v) {
                    is_max = false;
                    break 'n;
                }
            }
        }
        if is_max {
            found.push((mesh.point(ix, iy), v));
        }
    }
    found.sort_by(|a, b| b.1.total_cmp(&a.1));
    found.truncate(2);
    found
}

/// Location of each of the two largest maxima refined to the density-weighted
/// centroid of its 8-connected plateau `rho >= (1 - tol) peak`. Maxima whose
/// plateaus touch are reported once.
pub fn refined_maxima(rho: &[f64], class: &GridClassification, rel: f64, tol: f64) -> Vec<(Point, f64)> {
    let mesh = &class.mesh;
    let mut claimed = vec![false; rho.len()];
    let mut out = Vec::new();
    for (p, peak) in largest_maxima(rho, class, rel) {
        let (ix, iy) = mesh.nearest_node(p);
        let start = mesh.flat(ix, iy);
        if claimed[start] {
            continue;
        }
        let level = (1.0 - tol) * peak;
        let mut stack = vec![(ix, iy)];
        claimed[start] = true;
        let (mut sum, mut moment) = (0.0, Point::zeros());
        while let Some((jx, jy)) = stack.pop() {
            let v = rho[mesh.flat(jx, jy)];
            sum += v;
            moment += mesh.point(jx, jy) * v;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (kx, ky) = (jx + dx, jy + dy);
                    if !class.is_interior(kx, ky) {
                        continue;
                    }
                    let k = mesh.flat(kx, ky);
                    if !claimed[k] && rho[k] >= level {
                        claimed[k] = true;
                        stack.push((kx, ky));
                    }
                }
            }
        }
        out.push((moment / sum, peak));
    }
    out
}

/// Time series of the per-frame observables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub rows: Vec<ObservableRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub t: f64,
    pub mass: f64,
    pub max_density: f64,
    pub mean_radius: f64,
    pub front_radius: f64,
    pub tail_slope: f64,
    pub tail_r2: f64,
}

/// Where the observables are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableFrame {
    pub center: Point,
    pub section_axis: Axis,
    /// tail window as fractions of the section half-width
    pub tail_window: (f64, f64),
}

impl ObservableRow {
    pub fn measure(
        t: f64,
        f: &KineticField,
        rho: &[f64],
        class: &GridClassification,
        frame: &ObservableFrame,
    ) -> Self {
        let mesh = &class.mesh;
        let b = &mesh.bounds;
        let (offset, along_center, half) = match frame.section_axis {
            Axis::X => (frame.center.y, frame.center.x, 0.5 * (b.x_max - b.x_min)),
            Axis::Y => (frame.center.x, frame.center.y, 0.5 * (b.y_max - b.y_min)),
        };
        let (tail_slope, tail_r2) = section_profile(rho, class, frame.section_axis, offset)
            .and_then(|s| {
                tail_slope(
                    &s,
                    along_center,
                    frame.tail_window.0 * half,
                    frame.tail_window.1 * half,
                )
            })
            .unwrap_or((f64::NAN, f64::NAN));
        Self {
            t,
            mass: total_mass(f, class),
            max_density: max_density(rho, class),
            mean_radius: mean_radius(rho, class, frame.center).unwrap_or(f64::NAN),
            front_radius: front_radius(rho, class, frame.center),
            tail_slope,
            tail_r2,
        }
    }
}

impl ObservableSeries {
    pub fn push(&mut self, row: ObservableRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(row.t > last.t) {
                return Err(Error::Numerical(format!(
                    "observable times must increase: {} after {}",
                    row.t, last.t
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, pick: impl Fn(&ObservableRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(pick).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::classify_points;
    use crate::geometry::{mesh_frame, Disc};
    use crate::mesh::{build_space_mesh, build_velocity_grid, Bounds};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn square(n: usize, half: f64) -> GridClassification {
        let mesh = build_space_mesh(Bounds::square(half), n, n).unwrap();
        classify_points(&mesh_frame(&mesh), &mesh).unwrap()
    }

    fn field(class: &GridClassification, f: impl Fn(Point) -> f64) -> Vec<f64> {
        let mut rho = vec![0.0; class.mesh.padded_len()];
        for &(ix, iy) in &class.interior {
            rho[class.mesh.flat(ix, iy)] = f(class.mesh.point(ix, iy));
        }
        rho
    }

    #[test]
    fn mass_of_simple_fields() {
        let mesh = build_space_mesh(Bounds::new(0.0, 1.0, 0.0, 1.0), 10, 10).unwrap();
        let class = classify_points(&mesh_frame(&mesh), &mesh).unwrap();
        let vgrid = build_velocity_grid(1.0, 8).unwrap();
        assert_eq!(total_mass(&KineticField::zeros(&mesh, &vgrid), &class), 0.0);
        let ones = KineticField::from_fn(&class, &vgrid, |_, _| 1.0);
        // node quadrature over the cells around 11 x 11 nodes
        assert_relative_eq!(total_mass(&ones, &class), 2.0 * std::f64::consts::PI * 1.21, max_relative = 1e-13);
    }

    #[test]
    fn mean_radius_of_exponential() {
        // oracle: the same sum evaluated by a fine radial quadrature
        let lam = 20.0;
        let class = square(400, 0.25);
        let rho = field(&class, |p| (-lam * p.norm()).exp());
        let got = mean_radius(&rho, &class, Point::zeros()).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        let n = 4000;
        for i in 0..n {
            for k in 0..n {
                let x = -0.25 + 0.5 * (i as f64 + 0.5) / n as f64;
                let y = -0.25 + 0.5 * (k as f64 + 0.5) / n as f64;
                let r = (x * x + y * y).sqrt();
                num += r * (-lam * r).exp();
                den += (-lam * r).exp();
            }
        }
        assert_relative_eq!(got, num / den, max_relative = 5e-3);
        // on a domain wide enough to make truncation negligible the 2D radial
        // convention gives 2 / lambda, the 1D section convention 1 / lambda
        let wide = square(400, 1.0);
        let rho_w = field(&wide, |p| (-lam * p.norm()).exp());
        let m2 = mean_radius(&rho_w, &wide, Point::zeros()).unwrap();
        assert!((m2 - 2.0 / lam).abs() < 0.05 * 2.0 / lam, "{m2}");
        let sec = section_profile(&rho_w, &wide, Axis::X, 0.0).unwrap();
        let m1 = sec.iter().map(|(x, v)| x.abs() * v).sum::<f64>() / sec.iter().map(|(_, v)| v).sum::<f64>();
        assert!((m1 - 1.0 / lam).abs() < 0.05 / lam, "{m1}");
        let point = field(&class, |p| if p.norm() < 1e-12 { 1.0 } else { 0.0 });
        assert_eq!(mean_radius(&point, &class, Point::zeros()).unwrap(), 0.0);
        assert!(mean_radius(&vec![0.0; rho.len()], &class, Point::zeros()).is_err());
    }

    #[test]
    fn tail_fit_distinguishes_exponential_from_gaussian() {
        let exp: Vec<(f64, f64)> = (-50..=50).map(|i| i as f64 * 0.01).map(|x| (x, 3.0 * (-7.0 * x.abs()).exp())).collect();
        let (lam, r2) = tail_slope(&exp, 0.0, 0.1, 0.4).unwrap();
        assert_relative_eq!(lam, 7.0, max_relative = 1e-10);
        assert_relative_eq!(r2, 1.0, max_relative = 1e-12);
        let gauss: Vec<(f64, f64)> = exp.iter().map(|&(x, _)| (x, (-40.0 * x * x).exp())).collect();
        let (_, r2) = tail_slope(&gauss, 0.0, 0.0, 0.5).unwrap();
        assert!(r2 < 0.97, "{r2}");
        assert!(tail_slope(&exp[..3], 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn front_of_gaussian_and_ring() {
        let class = square(80, 3.0);
        let g = field(&class, |p| (-p.norm_squared()).exp());
        assert_eq!(front_radius(&g, &class, Point::zeros()), 0.0);
        let ring = field(&class, |p| (-8.0 * (p.norm() - 2.0).powi(2)).exp());
        let r = front_radius(&ring, &class, Point::zeros());
        assert!((r - 2.0).abs() <= class.mesh.h_max(), "{r}");
        // quarter-turn rotation of the grid data keeps the front within one bin
        let rot = field(&class, |p| (-8.0 * (Point::new(-p.y, p.x).norm() - 2.0).powi(2)).exp() * (1.0 + 0.1 * p.x));
        let unrot = field(&class, |p| (-8.0 * (p.norm() - 2.0).powi(2)).exp() * (1.0 - 0.1 * p.y));
        let a = front_radius(&rot, &class, Point::zeros());
        let b = front_radius(&unrot, &class, Point::zeros());
        assert!((a - b).abs() <= class.mesh.h_max());
    }

    #[test]
    fn sections() {
        let class = square(40, 1.0);
        let rho = field(&class, |p| (-(p.x * p.x) - 2.0 * p.y * p.y).exp());
        let s = section_profile(&rho, &class, Axis::X, 0.0).unwrap();
        assert_eq!(s.len(), 41);
        for k in 0..s.len() {
            assert!((s[k].1 - s[s.len() - 1 - k].1).abs() <= 1e-12);
        }
        assert!(section_profile(&rho, &class, Axis::Y, 7.0).is_err());
        let vgrid = build_velocity_grid(1.0, 16).unwrap();
        let ones = KineticField::from_fn(&class, &vgrid, |_, _| 1.0);
        let rho1 = crate::reaction_diffusion::density_moment(&ones, &class);
        for (_, v) in section_profile(&rho1, &class, Axis::Y, 0.3).unwrap() {
            assert_relative_eq!(v, 2.0 * std::f64::consts::PI, max_relative = 1e-14);
        }
    }

    #[test]
    fn volcano_detection() {
        let volcano: Vec<(f64, f64)> = (-20..=20).map(|i| i as f64 * 0.05).map(|x| (x, x * x * (-4.0 * x * x).exp() + 0.01)).collect();
        let (l, r) = off_center_maxima(&volcano, 0.0);
        assert!(l.unwrap().0 < 0.0 && r.unwrap().0 > 0.0);
        let bump: Vec<(f64, f64)> = volcano.iter().map(|&(x, _)| (x, (-x * x).exp())).collect();
        assert_eq!(off_center_maxima(&bump, 0.0), (None, None));
    }

    #[test]
    fn asymmetry_and_maxima() {
        let mesh = build_space_mesh(Bounds::square(3.0), 80, 80).unwrap();
        let class = classify_points(&Disc::new(Point::zeros(), 3.0), &mesh).unwrap();
        let sym = field(&class, |p| (-(p.norm() - 1.5).powi(2)).exp());
        assert!(radial_asymmetry(&sym, &class, Point::zeros()) < 0.01);
        let skew = field(&class, |p| (-(p.norm() - 1.5).powi(2)).exp() * (1.0 + 0.3 * p.x / 3.0));
        assert!(radial_asymmetry(&skew, &class, Point::zeros()) > 0.05);
        let two = field(&class, |p| {
            2.0 * (-4.0 * (p - Point::new(-1.0, 0.0)).norm_squared()).exp()
                + (-4.0 * (p - Point::new(1.2, 0.5)).norm_squared()).exp()
        });
        let m = largest_maxima(&two, &class, 0.1);
        assert_eq!(m.len(), 2);
        assert!((m[0].0 - Point::new(-1.0, 0.0)).norm() < 0.1);
        assert!((m[1].0 - Point::new(1.2, 0.5)).norm() < 0.1);
    }

    proptest! {
        #[test]
        fn ratios_are_scale_invariant(c in 1e-6f64..1e6, lam in 2.0f64..12.0) {
            let class = square(30, 1.0);
            let rho = field(&class, |p| (-lam * p.norm()).exp());
            let scaled: Vec<f64> = rho.iter().map(|v| c * v).collect();
            let a = mean_radius(&rho, &class, Point::zeros()).unwrap();
            let b = mean_radius(&scaled, &class, Point::zeros()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
            let s1 = section_profile(&rho, &class, Axis::X, 0.0).unwrap();
            let s2 = section_profile(&scaled, &class, Axis::X, 0.0).unwrap();
            let t1 = tail_slope(&s1, 0.0, 0.3, 0.8).unwrap();
            let t2 = tail_slope(&s2, 0.0, 0.3, 0.8).unwrap();
            prop_assert!((t1.0 - t2.0).abs() <= 1e-9 * t1.0);
        }
    }

    #[test]
    fn series_rejects_non_increasing_time() {
        let row = ObservableRow {
            t: 1.0,
            mass: 1.0,
            max_density: 1.0,
            mean_radius: 0.0,
            front_radius: 0.0,
            tail_slope: f64::NAN,
            tail_r2: f64::NAN,
        };
        let mut s = ObservableSeries::default();
        s.push(row).unwrap();
        assert!(s.push(row).is_err());
    }
}
