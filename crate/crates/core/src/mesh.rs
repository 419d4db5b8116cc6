//! Structured triangulation of the square computational domain.
//!
//! The global frame is `[0, L + 2w]²`; the physical region (without the
//! absorbing layer) is `[w, w + L]²`. User-facing coordinates such as the
//! lens center or the nanojet target live in the physical frame `[0, L]²`
//! and are shifted by `(w, w)` internally.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D point.
pub type Point = [f64; 2];

const LOCATE_TOL: f64 = 1e-12;

/// Subdomain label of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Lens,
    Background,
    Pml,
}

impl fmt::Display for Subdomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subdomain::Lens => "LENS",
            Subdomain::Background => "BACKGROUND",
            Subdomain::Pml => "PML",
        })
    }
}

/// Geometry of the lens problem and the requested resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Side length `L` of the physical square.
    pub side: f64,
    /// Width `w` of the absorbing layer on each side.
    pub pml_width: f64,
    /// Lens center in the physical frame.
    pub lens_center: Point,
    pub lens_radius: f64,
    /// Elements per free-space wavelength.
    pub points_per_wavelength: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            side: 10.0,
            pml_width: 1.0,
            lens_center: [5.0, 5.0],
            lens_radius: 3.0,
            points_per_wavelength: 20.0,
        }
    }
}

impl DomainSpec {
    /// Lists every violated invariant (empty when valid).
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.side) {
            errs.push(format!("domain.side must be > 0 (got {})", self.side));
        }
        if !positive(self.pml_width) {
            errs.push(format!("domain.pml_width must be > 0 (got {})", self.pml_width));
        }
        if !positive(self.lens_radius) {
            errs.push(format!("domain.lens_radius must be > 0 (got {})", self.lens_radius));
        }
        let [cx, cy] = self.lens_center;
        let r = self.lens_radius;
        if !(cx - r > 0.0 && cx + r < self.side && cy - r > 0.0 && cy + r < self.side) {
            errs.push(format!(
                "domain.lens_center {:?} with radius {} is not strictly inside [0, {}]^2",
                self.lens_center, r, self.side
            ));
        }
        if !(self.points_per_wavelength.is_finite() && self.points_per_wavelength >= 10.0) {
            errs.push(format!(
                "domain.points_per_wavelength must be >= 10 (got {})",
                self.points_per_wavelength
            ));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDomain(errs.join("; ")))
        }
    }

    /// Side of the full meshed square, `L + 2w`.
    pub fn total_side(&self) -> f64 {
        self.side + 2.0 * self.pml_width
    }
}

/// Containing triangle and barycentric weights of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub weights: [f64; 3],
}

/// Immutable triangulated domain with subdomain tags.
#[derive(Debug, Clone)]
pub struct Mesh {
    spec: DomainSpec,
    cells: usize,
    h: f64,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<Subdomain>,
    boundary: Vec<bool>,
    lens_vertex: Vec<bool>,
}

impl Mesh {
    /// Builds a uniform grid of `N × N` squares covering `[0, L + 2w]²`, each
    /// split into two triangles with alternating diagonals, and tags each
    /// triangle by the location of its centroid.
    pub fn build(spec: &DomainSpec, wavelength: f64) -> Result<Self> {
        spec.validate()?;
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidDomain(format!("wavelength must be > 0 (got {wavelength})")));
        }
        let total = spec.total_side();
        let mut cells = (total * spec.points_per_wavelength / wavelength).ceil() as usize;
        // even cell count keeps the mesh mirror-symmetric about the mid-lines
        cells += cells % 2;
        cells = cells.max(2);
        let h = total / cells as f64;
        let stride = cells + 1;

        let mut vertices = Vec::with_capacity(stride * stride);
        let mut boundary = Vec::with_capacity(stride * stride);
        for j in 0..stride {
            for i in 0..stride {
                vertices.push([i as f64 * h, j as f64 * h]);
                boundary.push(i == 0 || j == 0 || i == cells || j == cells);
            }
        }

        let mut triangles = Vec::with_capacity(2 * cells * cells);
        for j in 0..cells {
            for i in 0..cells {
                let v00 = j * stride + i;
                let v10 = v00 + 1;
                let v01 = v00 + stride;
                let v11 = v01 + 1;
                if (i + j) % 2 == 0 {
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                } else {
                    triangles.push([v00, v10, v01]);
                    triangles.push([v10, v11, v01]);
                }
            }
        }

        let w = spec.pml_width;
        let center = [spec.lens_center[0] + w, spec.lens_center[1] + w];
        let r2 = spec.lens_radius * spec.lens_radius;
        let tags: Vec<Subdomain> = triangles
            .iter()
            .map(|t| {
                let c = centroid_of(&vertices, t);
                let d2 = (c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2);
                let inner = |x: f64| x > w && x < w + spec.side;
                if d2 < r2 {
                    Subdomain::Lens
                } else if !(inner(c[0]) && inner(c[1])) {
                    Subdomain::Pml
                } else {
                    Subdomain::Background
                }
            })
            .collect();

        let mut lens_vertex = vec![false; vertices.len()];
        for (t, tag) in triangles.iter().zip(&tags) {
            if *tag == Subdomain::Lens {
                for &v in t {
                    lens_vertex[v] = true;
                }
            }
        }
        if !lens_vertex.iter().any(|&b| b) {
            return Err(Error::EmptyLens { radius: spec.lens_radius, h });
        }

        Ok(Self { spec: *spec, cells, h, vertices, triangles, tags, boundary, lens_vertex })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    /// Characteristic mesh size (grid spacing).
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of grid cells per side.
    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn tags(&self) -> &[Subdomain] {
        &self.tags
    }

    pub fn tag(&self, t: usize) -> Subdomain {
        self.tags[t]
    }

    /// Whether the vertex lies on the outer boundary of the meshed square.
    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Whether the vertex belongs to at least one lens triangle.
    pub fn is_lens_vertex(&self, v: usize) -> bool {
        self.lens_vertex[v]
    }

    pub fn lens_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.lens_vertex.iter().enumerate().filter(|(_, &b)| b).map(|(v, _)| v)
    }

    /// Whether the vertex lies in the closed physical square (not inside the PML).
    pub fn is_physical_vertex(&self, v: usize) -> bool {
        let w = self.spec.pml_width;
        let lo = w - 1e-9 * self.h;
        let hi = w + self.spec.side + 1e-9 * self.h;
        let [x, y] = self.vertices[v];
        x >= lo && x <= hi && y >= lo && y <= hi
    }

    /// Physical-frame point to global frame.
    pub fn to_global(&self, p: Point) -> Point {
        [p[0] + self.spec.pml_width, p[1] + self.spec.pml_width]
    }

    /// Global-frame point to physical frame.
    pub fn to_physical(&self, p: Point) -> Point {
        [p[0] - self.spec.pml_width, p[1] - self.spec.pml_width]
    }

    /// Lens center in the global frame.
    pub fn lens_center(&self) -> Point {
        self.to_global(self.spec.lens_center)
    }

    /// Whether a global-frame point lies inside the (closed) lens disk.
    pub fn in_lens_disk(&self, p: Point) -> bool {
        let c = self.lens_center();
        let r = self.spec.lens_radius;
        (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) <= r * r
    }

    pub fn centroid(&self, t: usize) -> Point {
        centroid_of(&self.vertices, &self.triangles[t])
    }

    /// Signed area (positive for counter-clockwise triangles).
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Summed area of the lens-tagged triangles.
    pub fn lens_area(&self) -> f64 {
        (0..self.num_triangles())
            .filter(|&t| self.tags[t] == Subdomain::Lens)
            .map(|t| self.area(t))
            .sum()
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Finds the triangle containing the global-frame point `p`. Points on
    /// shared edges or vertices resolve to the lowest-index triangle.
    pub fn locate(&self, p: Point) -> Result<Location> {
        let total = self.spec.total_side();
        let tol = LOCATE_TOL * total.max(1.0);
        let out = || Error::OutOfDomain { x: p[0], y: p[1] };
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(out());
        }
        if p[0] < -tol || p[1] < -tol || p[0] > total + tol || p[1] > total + tol {
            return Err(out());
        }
        let n = self.cells as isize;
        let ci = ((p[0] / self.h).floor() as isize).clamp(0, n - 1);
        let cj = ((p[1] / self.h).floor() as isize).clamp(0, n - 1);
        let mut best: Option<Location> = None;
        for j in (cj - 1)..=(cj + 1) {
            for i in (ci - 1)..=(ci + 1) {
                if i < 0 || j < 0 || i >= n || j >= n {
                    continue;
                }
                let cell = (j * n + i) as usize;
                for t in [2 * cell, 2 * cell + 1] {
                    if best.is_some_and(|b| b.triangle < t) {
                        continue;
                    }
                    let w = self.barycentric(t, p);
                    if w.iter().all(|&x| x >= -LOCATE_TOL) {
                        best = Some(Location { triangle: t, weights: w });
                    }
                }
            }
        }
        best.ok_or_else(out)
    }

    /// Locates a point given in the physical frame.
    pub fn locate_physical(&self, p: Point) -> Result<Location> {
        self.locate(self.to_global(p))
    }

    /// Writes the vertex and triangle tables (physical-frame coordinates).
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# vertices {}", self.num_vertices())?;
        writeln!(out, "# index x y")?;
        for (v, p) in self.vertices.iter().enumerate() {
            let q = self.to_physical(*p);
            writeln!(out, "{v} {:.12e} {:.12e}", q[0], q[1])?;
        }
        writeln!(out, "# triangles {}", self.num_triangles())?;
        writeln!(out, "# index v0 v1 v2 tag")?;
        for (t, tri) in self.triangles.iter().enumerate() {
            writeln!(out, "{t} {} {} {} {}", tri[0], tri[1], tri[2], self.tags[t])?;
        }
        Ok(())
    }
}

impl Location {
    /// P1 interpolation of nodal values at the located point.
    pub fn interpolate<T>(&self, mesh: &Mesh, values: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let [a, b, c] = mesh.triangle(self.triangle);
        values[a] * self.weights[0] + values[b] * self.weights[1] + values[c] * self.weights[2]
    }
}

fn centroid_of(vertices: &[Point], t: &[usize; 3]) -> Point {
    let [a, b, c] = t.map(|v| vertices[v]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_mesh(ppw: f64) -> Mesh {
        let spec = DomainSpec { points_per_wavelength: ppw, ..DomainSpec::default() };
        Mesh::build(&spec, 1.0).unwrap()
    }

    #[test]
    fn covers_the_full_square() {
        let mesh = default_mesh(10.0);
        let total: f64 = (0..mesh.num_triangles()).map(|t| mesh.area(t)).sum();
        assert!((total - 144.0).abs() / 144.0 < 1e-10);
        assert!((0..mesh.num_triangles()).all(|t| mesh.area(t) > 0.0));
        let max = mesh.vertices().iter().fold(0.0f64, |m, p| m.max(p[0]).max(p[1]));
        assert!((max - 12.0).abs() < 1e-12);
        assert!(mesh.h() <= 0.1 + 1e-12);
    }

    #[test]
    fn tags_follow_centroids() {
        let mesh = default_mesh(10.0);
        let c = mesh.lens_center();
        assert_eq!(c, [6.0, 6.0]);
        for t in 0..mesh.num_triangles() {
            let p = mesh.centroid(t);
            let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
            match mesh.tag(t) {
                Subdomain::Lens => assert!(d < 3.0),
                Subdomain::Pml => {
                    assert!(p[0] < 1.0 || p[0] > 11.0 || p[1] < 1.0 || p[1] > 11.0)
                }
                Subdomain::Background => {
                    assert!(d >= 3.0);
                    assert!(p[0] > 1.0 && p[0] < 11.0 && p[1] > 1.0 && p[1] < 11.0);
                }
            }
        }
    }

    #[test]
    fn lens_area_approximates_disk() {
        let mesh = default_mesh(20.0);
        let exact = std::f64::consts::PI * 9.0;
        assert!((mesh.lens_area() - exact).abs() / exact <= 0.05);
    }

    #[test]
    fn degenerate_lens_is_rejected() {
        let mut spec = DomainSpec { points_per_wavelength: 10.0, ..DomainSpec::default() };
        // h = 0.1; a lens of radius 0.001 centered on a vertex holds no centroid
        spec.lens_radius = 0.001;
        assert!(matches!(Mesh::build(&spec, 1.0), Err(Error::EmptyLens { .. })));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let spec = DomainSpec { points_per_wavelength: 5.0, ..DomainSpec::default() };
        assert!(Mesh::build(&spec, 1.0).is_err());
        let spec = DomainSpec { lens_radius: 6.0, ..DomainSpec::default() };
        assert!(Mesh::build(&spec, 1.0).is_err());
        assert!(Mesh::build(&DomainSpec::default(), 0.0).is_err());
    }

    #[test]
    fn locate_vertex_and_centroid() {
        let mesh = default_mesh(10.0);
        let v = 137;
        let loc = mesh.locate(mesh.vertex(v)).unwrap();
        let tri = mesh.triangle(loc.triangle);
        let k = tri.iter().position(|&x| x == v).unwrap();
        assert!((loc.weights[k] - 1.0).abs() < 1e-12);

        let t = 4242;
        let loc = mesh.locate(mesh.centroid(t)).unwrap();
        assert_eq!(loc.triangle, t);
        for w in loc.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_points_resolve_to_lowest_index() {
        let mesh = default_mesh(10.0);
        // midpoint of a vertical grid line shared by two cells
        let h = mesh.h();
        let p = [5.0 * h, 3.5 * h];
        let loc = mesh.locate(p).unwrap();
        let all: Vec<usize> = (0..mesh.num_triangles())
            .filter(|&t| mesh.barycentric(t, p).iter().all(|&w| w >= -1e-12))
            .collect();
        assert!(all.len() >= 2);
        assert_eq!(loc.triangle, all[0]);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let mesh = default_mesh(10.0);
        assert!(matches!(mesh.locate([-0.5, 3.0]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(mesh.locate([3.0, 12.5]), Err(Error::OutOfDomain { .. })));
        assert!(mesh.locate([12.0, 12.0]).is_ok());
    }

    #[test]
    fn export_lists_every_vertex_and_triangle() {
        let spec = DomainSpec { side: 4.0, lens_center: [2.0, 2.0], lens_radius: 1.0, ..DomainSpec::default() };
        let mesh = Mesh::build(&spec, 2.0).unwrap();
        let mut buf = Vec::new();
        mesh.write_table(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_lines = text.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(data_lines, mesh.num_vertices() + mesh.num_triangles());
        assert!(text.contains("LENS") && text.contains("PML") && text.contains("BACKGROUND"));
    }
}
