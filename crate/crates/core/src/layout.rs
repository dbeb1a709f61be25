//! Hexagonal cell layout and Poisson placement of user equipment.
//!
//! Cells are flat-top regular hexagons (vertices at 0°, 60°, …) of
//! circumradius `r_out` tiling the plane on a triangular grid of base
//! stations. The region of interest is the center cell plus `ring_count`
//! rings of neighbors; `ring_count = 1` gives the 7-cell flower.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// Apothem (center-to-edge distance) of a hexagon with circumradius `r_out`.
pub fn apothem(r_out: f64) -> f64 {
    r_out * (PI / 3.0).sin()
}

pub fn hexagon_area(r_out: f64) -> f64 {
    1.5 * SQRT_3 * r_out * r_out
}

/// Closed flat-top hexagon membership.
pub fn point_in_hexagon(point: Point, center: Point, r_out: f64) -> bool {
    // Relative slack so that vertices and edges computed in floating point count as inside.
    const SLACK: f64 = 1.0 + 1e-12;
    let dx = (point.x - center.x).abs();
    let dy = (point.y - center.y).abs();
    dy <= apothem(r_out) * SLACK && SQRT_3 * dx + dy <= SQRT_3 * r_out * SLACK
}

/// Uniform point in a hexagon by rejection from its bounding box.
pub fn sample_in_hexagon<R: Rng + ?Sized>(rng: &mut R, center: Point, r_out: f64) -> Point {
    let a = apothem(r_out);
    loop {
        let p = Point::new(
            center.x + r_out * (2.0 * rng.random::<f64>() - 1.0),
            center.y + a * (2.0 * rng.random::<f64>() - 1.0),
        );
        if point_in_hexagon(p, center, r_out) {
            return p;
        }
    }
}

/// Cell geometry and UE density of the region of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    cell_circumradius_m: f64,
    ue_density: f64,
    ring_count: u32,
    // Base-station positions in lexicographic axial order; index 0 is not
    // necessarily the center cell.
    cell_centers: Vec<Point>,
    center_cell: usize,
}

impl NetworkLayout {
    pub fn new(cell_circumradius_m: f64, ue_density: f64, ring_count: u32) -> Result<Self> {
        if !(cell_circumradius_m > 0.0 && cell_circumradius_m.is_finite()) {
            return Err(Error::Domain(format!(
                "cell circumradius must be positive, got {cell_circumradius_m}"
            )));
        }
        if !(ue_density >= 0.0 && ue_density.is_finite()) {
            return Err(Error::Domain(format!("UE density must be nonnegative, got {ue_density}")));
        }
        let n = ring_count as i64;
        let mut axial = Vec::new();
        for q in -n..=n {
            for r in -n..=n {
                if (q + r).abs() <= n {
                    axial.push((q, r));
                }
            }
        }
        let center_cell = axial
            .iter()
            .position(|&c| c == (0, 0))
            .expect("origin is always part of the layout");
        let cell_centers = axial
            .iter()
            .map(|&(q, r)| {
                Point::new(
                    cell_circumradius_m * 1.5 * q as f64,
                    cell_circumradius_m * SQRT_3 * (r as f64 + 0.5 * q as f64),
                )
            })
            .collect();
        Ok(Self {
            cell_circumradius_m,
            ue_density,
            ring_count,
            cell_centers,
            center_cell,
        })
    }

    /// Layout from the inner radius (apothem) of a cell.
    pub fn from_inner_radius(inner_radius_m: f64, ue_density: f64, ring_count: u32) -> Result<Self> {
        Self::new(inner_radius_m / (PI / 3.0).sin(), ue_density, ring_count)
    }

    pub fn cell_circumradius_m(&self) -> f64 {
        self.cell_circumradius_m
    }

    pub fn apothem_m(&self) -> f64 {
        apothem(self.cell_circumradius_m)
    }

    pub fn ue_density(&self) -> f64 {
        self.ue_density
    }

    pub fn ring_count(&self) -> u32 {
        self.ring_count
    }

    pub fn with_ue_density(&self, ue_density: f64) -> Result<Self> {
        Self::new(self.cell_circumradius_m, ue_density, self.ring_count)
    }

    pub fn cell_centers(&self) -> &[Point] {
        &self.cell_centers
    }

    pub fn center_cell(&self) -> usize {
        self.center_cell
    }

    pub fn cell_area(&self) -> f64 {
        hexagon_area(self.cell_circumradius_m)
    }

    pub fn roi_area(&self) -> f64 {
        self.cell_area() * self.cell_centers.len() as f64
    }

    /// First cell (in axial lexicographic order) containing `p`.
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        self.cell_centers
            .iter()
            .position(|&c| point_in_hexagon(p, c, self.cell_circumradius_m))
    }

    fn bounding_box(&self) -> (Point, Point) {
        let a = self.apothem_m();
        let r = self.cell_circumradius_m;
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &self.cell_centers {
            lo.x = lo.x.min(c.x - r);
            lo.y = lo.y.min(c.y - a);
            hi.x = hi.x.max(c.x + r);
            hi.y = hi.y.max(c.y + a);
        }
        (lo, hi)
    }
}

/// UE positions of one layout realization.
#[derive(Debug, Clone, PartialEq)]
pub struct UEField {
    positions: Vec<Point>,
    cells: Vec<usize>,
    central: Vec<bool>,
}

impl UEField {
    /// Builds a field from explicit positions; points outside the ROI are rejected.
    pub fn from_positions(layout: &NetworkLayout, positions: Vec<Point>) -> Result<Self> {
        let mut cells = Vec::with_capacity(positions.len());
        for (i, p) in positions.iter().enumerate() {
            let cell = layout.cell_of(*p).ok_or_else(|| {
                Error::Domain(format!("UE {i} at ({}, {}) lies outside the ROI", p.x, p.y))
            })?;
            cells.push(cell);
        }
        let central = cells.iter().map(|&c| c == layout.center_cell()).collect();
        Ok(Self {
            positions,
            cells,
            central,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Index of the serving cell of each UE.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn central_cell_mask(&self) -> &[bool] {
        &self.central
    }
}

/// Draws a homogeneous Poisson field over the ROI.
pub fn generate_ue_field<R: Rng + ?Sized>(layout: &NetworkLayout, rng: &mut R) -> UEField {
    let mean = layout.ue_density() * layout.roi_area();
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    } else {
        0
    };
    let (lo, hi) = layout.bounding_box();
    let mut positions = Vec::with_capacity(count);
    let mut cells = Vec::with_capacity(count);
    while positions.len() < count {
        let p = Point::new(
            lo.x + (hi.x - lo.x) * rng.random::<f64>(),
            lo.y + (hi.y - lo.y) * rng.random::<f64>(),
        );
        if let Some(cell) = layout.cell_of(p) {
            positions.push(p);
            cells.push(cell);
        }
    }
    let central = cells.iter().map(|&c| c == layout.center_cell()).collect();
    UEField {
        positions,
        cells,
        central,
    }
}

/// Maps `φ ∈ [π/3, π/2]` to `r = a/sin φ ∈ [a, r_out]`, returning `(r, |dr/dφ|)`.
///
/// The distance density has a square-root kink at the apothem; in `φ` the
/// integrand over the outer ring is smooth.
pub fn outer_ring_substitution(phi: f64, apothem_m: f64) -> (f64, f64) {
    let s = phi.sin();
    (apothem_m / s, apothem_m * phi.cos() / (s * s))
}

/// Density of the distance from the center of a uniformly distributed point
/// in one hexagonal cell.
///
/// With apothem `a` and area `A`, a circle of radius `r ≤ a` lies entirely in
/// the cell; for `a < r ≤ r_out` the circle leaves through all six edges,
/// each cutting an arc of angular half-width `arccos(a/r)`.
pub fn i2d_distance_pdf(r: f64, layout: &NetworkLayout) -> f64 {
    let r_out = layout.cell_circumradius_m();
    let a = layout.apothem_m();
    let area = layout.cell_area();
    if r < 0.0 || r > r_out {
        0.0
    } else if r <= a {
        2.0 * PI * r / area
    } else {
        let arc = ((a / r).min(1.0).asin() - PI / 3.0).max(0.0);
        12.0 * r / area * arc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_converged;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_layout() -> NetworkLayout {
        NetworkLayout::from_inner_radius(300.0, 1.1e-3, 1).unwrap()
    }

    #[test]
    fn inner_radius_maps_to_circumradius() {
        let l = default_layout();
        assert!((l.cell_circumradius_m() - 346.410_161_513_775_4).abs() < 1e-9);
        assert!((l.apothem_m() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn flower_has_seven_cells_at_two_apothems() {
        let l = default_layout();
        assert_eq!(l.cell_centers().len(), 7);
        let c = l.cell_centers()[l.center_cell()];
        assert_eq!(c, Point::ORIGIN);
        for (i, p) in l.cell_centers().iter().enumerate() {
            if i != l.center_cell() {
                assert!((p.distance(&c) - 600.0).abs() < 1e-9);
            }
        }
        assert_eq!(NetworkLayout::new(1.0, 0.0, 2).unwrap().cell_centers().len(), 19);
        assert_eq!(NetworkLayout::new(1.0, 0.0, 0).unwrap().cell_centers().len(), 1);
    }

    #[test]
    fn hexagon_membership_boundaries() {
        let r = 346.41;
        let c = Point::new(10.0, -5.0);
        assert!(point_in_hexagon(c, c, r));
        for k in 0..6 {
            let th = k as f64 * PI / 3.0;
            let on = Point::new(c.x + r * th.cos(), c.y + r * th.sin());
            let off = Point::new(c.x + r * (1.0 + 1e-6) * th.cos(), c.y + r * (1.0 + 1e-6) * th.sin());
            assert!(point_in_hexagon(on, c, r), "vertex {k}");
            assert!(!point_in_hexagon(off, c, r), "beyond vertex {k}");
            let thn = th + PI / 6.0;
            let a = apothem(r);
            let edge = Point::new(c.x + a * thn.cos(), c.y + a * thn.sin());
            assert!(point_in_hexagon(edge, c, r), "edge {k}");
        }
    }

    #[test]
    fn flower_tiles_without_gaps_or_overlap() {
        // Area by Monte Carlo over the bounding box, counting containing cells.
        let l = NetworkLayout::new(1.0, 0.0, 1).unwrap();
        let (lo, hi) = l.bounding_box();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let mut inside = 0usize;
        for _ in 0..n {
            let p = Point::new(
                lo.x + (hi.x - lo.x) * rng.random::<f64>(),
                lo.y + (hi.y - lo.y) * rng.random::<f64>(),
            );
            let hits = l
                .cell_centers()
                .iter()
                .filter(|&&c| point_in_hexagon(p, c, 1.0))
                .count();
            assert!(hits <= 1);
            if hits > 0 {
                inside += 1;
            }
        }
        let box_area = (hi.x - lo.x) * (hi.y - lo.y);
        let est = box_area * inside as f64 / n as f64;
        let p = inside as f64 / n as f64;
        let se = box_area * (p * (1.0 - p) / n as f64).sqrt();
        assert!((est - l.roi_area()).abs() < 4.0 * se, "{est} vs {}", l.roi_area());
        assert!((l.roi_area() - 7.0 * hexagon_area(1.0)).abs() < 1e-9 * l.roi_area());
    }

    #[test]
    fn shared_edges_go_to_the_first_cell() {
        let l = default_layout();
        // Midpoint between the center and a neighbor lies on their shared edge.
        assert_ne!(l.center_cell(), 0);
        let n = l.cell_centers()[0];
        let mid = Point::new(0.5 * n.x, 0.5 * n.y);
        assert_eq!(l.cell_of(mid), Some(0));
    }

    #[test]
    fn zero_density_gives_empty_field() {
        let l = default_layout().with_ue_density(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(generate_ue_field(&l, &mut rng).is_empty());
    }

    #[test]
    fn field_points_lie_in_roi_and_mask_matches_center_cell() {
        let l = default_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = generate_ue_field(&l, &mut rng);
        assert!(!f.is_empty());
        let center = l.cell_centers()[l.center_cell()];
        for (i, p) in f.positions().iter().enumerate() {
            assert!(l.cell_of(*p).is_some());
            assert_eq!(
                f.central_cell_mask()[i],
                point_in_hexagon(*p, center, l.cell_circumradius_m()) && f.cells()[i] == l.center_cell()
            );
        }
    }

    #[test]
    fn field_is_deterministic_per_seed() {
        let l = default_layout();
        let a = generate_ue_field(&l, &mut ChaCha8Rng::seed_from_u64(5));
        let b = generate_ue_field(&l, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn mean_point_count_matches_poisson_mean() {
        let l = default_layout();
        let expected = 1.1e-3 * 7.0 * 1.5 * SQRT_3 * l.cell_circumradius_m().powi(2);
        assert!((expected - 2400.0).abs() < 5.0);
        let n = 200;
        let total: usize = (0..n)
            .map(|s| generate_ue_field(&l, &mut ChaCha8Rng::seed_from_u64(s)).len())
            .sum();
        let mean = total as f64 / n as f64;
        let se = (expected / n as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn distance_pdf_normalizes_and_vanishes_at_vertex() {
        let l = default_layout();
        let a = l.apothem_m();
        let r_out = l.cell_circumradius_m();
        let inner = integrate_converged(|r| Ok(i2d_distance_pdf(r, &l)), 0.0, a, 16, 1e-13, 4096)
            .unwrap();
        let outer = integrate_converged(
            |phi| {
                let (r, jac) = outer_ring_substitution(phi, a);
                Ok(i2d_distance_pdf(r, &l) * jac)
            },
            PI / 3.0,
            PI / 2.0,
            16,
            1e-13,
            4096,
        )
        .unwrap();
        assert!((inner + outer - 1.0).abs() < 1e-9, "{}", inner + outer);
        assert!(i2d_distance_pdf(r_out, &l).abs() < 1e-12);
        assert_eq!(i2d_distance_pdf(r_out * 1.01, &l), 0.0);
        // Continuous at the apothem; the right side has a square-root kink.
        let left = i2d_distance_pdf(a, &l);
        let right = i2d_distance_pdf(a * (1.0 + 1e-12), &l);
        assert!((left - right).abs() < 1e-5 * left);
    }
}
