//! P1 finite elements for the scattered-field Helmholtz problem
//!
//! ```text
//! Δu_sca + k² u_sca = (k0² − k²) exp(i k0 x·b̂)
//! ```
//!
//! truncated by a complex-coordinate-stretching PML and closed by a
//! homogeneous Dirichlet condition on the outer boundary. The wavenumber is
//! `k = k0 + exp(τ + ζ)` on lens elements and `k0` elsewhere.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::LuError;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::SparseColMat;
use faer::{Conj, MatMut};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, Subdomain};
use crate::sparse::{mat_t_vec, mat_vec, Pattern};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Largest admissible `|τ + ζ|` before `exp` is considered to overflow.
pub const MAX_EXPONENT: f64 = 700.0;

/// Residual above which a direct solve is reported as numerically singular.
const SINGULAR_RESIDUAL: f64 = 1e-6;

/// Free-space illumination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveConfig {
    pub wavelength: f64,
    /// Unit propagation direction `b̂`.
    pub direction: Point,
}

impl WaveConfig {
    pub fn new(wavelength: f64) -> Self {
        Self { wavelength, direction: [1.0, 0.0] }
    }

    pub fn k0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// `exp(i k0 x·b̂)` at a physical-frame point.
    pub fn incident(&self, x: Point) -> C64 {
        let phase = self.k0() * (x[0] * self.direction[0] + x[1] * self.direction[1]);
        C64::from_polar(1.0, phase)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            errs.push(format!("wave.wavelength must be > 0 (got {})", self.wavelength));
        }
        let norm = self.direction[0].hypot(self.direction[1]);
        if !((norm - 1.0).abs() <= 1e-12) {
            errs.push(format!("wave.direction must be a unit vector (|b| = {norm})"));
        }
        errs
    }
}

/// Polynomial absorption profile of the PML.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmlConfig {
    pub order: f64,
    /// Theoretical normal-incidence round-trip reflection coefficient.
    pub reflection: f64,
}

impl Default for PmlConfig {
    fn default() -> Self {
        Self { order: 2.0, reflection: 1e-6 }
    }
}

impl PmlConfig {
    /// `σ_max` such that `exp(−2 ∫₀ʷ σ) = R` for `σ(d) = σ_max (d/w)^p`.
    pub fn sigma_max(&self, width: f64) -> f64 {
        -(self.order + 1.0) * self.reflection.ln() / (2.0 * width)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.order.is_finite() && self.order >= 1.0) {
            errs.push(format!("pml.order must be >= 1 (got {})", self.order));
        }
        if !(self.reflection > 0.0 && self.reflection < 1.0) {
            errs.push(format!("pml.reflection must lie in (0, 1) (got {})", self.reflection));
        }
        errs
    }
}

/// Nodal complex P1 coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField(pub Vec<C64>);

/// Nodal design variable `τ`. Only values at lens vertices influence the model.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignField(pub Vec<f64>);

/// One nodal manufacturing-error realization `ζ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization(pub Vec<f64>);

impl ComplexField {
    pub fn zeros(n: usize) -> Self {
        Self(vec![ZERO; n])
    }

    pub fn values(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Nodal `|u|²`.
    pub fn intensity(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

impl DesignField {
    /// Uniform `τ = ln(k0 (n0 − 1))`, i.e. a homogeneous lens of index `n0 > 1`.
    pub fn homogeneous(mesh: &Mesh, wave: &WaveConfig, index: f64) -> Result<Self> {
        if !(index > 1.0 && index.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "homogeneous lens index must exceed 1 (got {index})"
            )));
        }
        let tau = (wave.k0() * (index - 1.0)).ln();
        Ok(Self(vec![tau; mesh.num_vertices()]))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_real(&self.0, mesh, "design field")
    }
}

impl NoiseRealization {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        check_real(&self.0, mesh, "noise realization")
    }
}

fn check_real(values: &[f64], mesh: &Mesh, what: &'static str) -> Result<()> {
    if values.len() != mesh.num_vertices() {
        return Err(Error::LengthMismatch { expected: mesh.num_vertices(), got: values.len() });
    }
    if let Some(v) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what, vertex: v });
    }
    Ok(())
}

/// Nodal wavenumber on lens-supported vertices.
///
/// `nodal[v] = k0 + exp(τ_v + ζ_v)` at lens vertices and `k0` elsewhere;
/// non-lens elements always see `k0`, even at vertices shared with the lens.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberField {
    pub k0: f64,
    pub nodal: Vec<f64>,
    /// `exp(τ + ζ)` at lens vertices, zero elsewhere (`∂k/∂τ`).
    pub growth: Vec<f64>,
}

impl WavenumberField {
    /// `k ≡ k0`: no scatterer.
    pub fn free_space(mesh: &Mesh, wave: &WaveConfig) -> Self {
        let n = mesh.num_vertices();
        Self { k0: wave.k0(), nodal: vec![wave.k0(); n], growth: vec![0.0; n] }
    }

    /// Element-local wavenumbers of triangle `t`.
    pub fn element_values(&self, mesh: &Mesh, t: usize) -> [f64; 3] {
        if mesh.tag(t) == Subdomain::Lens {
            mesh.triangle(t).map(|v| self.nodal[v])
        } else {
            [self.k0; 3]
        }
    }
}

/// `k = k0 + exp(τ + ζ) χ_D` at the vertices of lens elements.
pub fn wavenumber_field(
    tau: &DesignField,
    zeta: Option<&NoiseRealization>,
    wave: &WaveConfig,
    mesh: &Mesh,
) -> Result<WavenumberField> {
    tau.check(mesh)?;
    if let Some(z) = zeta {
        z.check(mesh)?;
    }
    let k0 = wave.k0();
    let mut field = WavenumberField::free_space(mesh, wave);
    for v in mesh.lens_vertices() {
        let exponent = tau.0[v] + zeta.map_or(0.0, |z| z.0[v]);
        if exponent.abs() > MAX_EXPONENT {
            return Err(Error::WavenumberOverflow { vertex: v, exponent });
        }
        let g = exponent.exp();
        field.growth[v] = g;
        field.nodal[v] = k0 + g;
    }
    Ok(field)
}

/// Assembled linear system `A u_sca = b`.
#[derive(Debug, Clone)]
pub struct HelmholtzSystem {
    pub matrix: SparseColMat<usize, C64>,
    pub rhs: Vec<C64>,
}

impl HelmholtzSystem {
    /// `‖A u − b‖ / ‖b‖` (absolute residual when `b = 0`).
    pub fn relative_residual(&self, u: &[C64]) -> f64 {
        residual(&self.matrix, u, &self.rhs)
    }
}

fn residual(a: &SparseColMat<usize, C64>, u: &[C64], b: &[C64]) -> f64 {
    residual_of(&mat_vec(a, u, ZERO), b)
}

fn residual_of(au: &[C64], b: &[C64]) -> f64 {
    let num: f64 = au.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

#[derive(Debug, Clone, Copy)]
struct ElementData {
    area: f64,
    /// `∇φ_i · 2A = (b_i, c_i)`.
    grad: [[f64; 2]; 3],
    /// Stretching weights `(s_y/s_x, s_x/s_y, s_x s_y)`.
    pml: [C64; 3],
}

/// Mesh-bound discretization data shared by every system on one mesh:
/// element geometry, PML weights, the sparsity pattern and the symbolic LU.
///
/// Immutable after construction apart from the lazily computed symbolic
/// factorization and the solve counters; safe to share across threads.
#[derive(Debug)]
pub struct Discretization {
    wave: WaveConfig,
    pml: PmlConfig,
    elements: Vec<ElementData>,
    incident: Vec<C64>,
    pattern: Pattern,
    symbolic_lu: OnceLock<SymbolicLu<usize>>,
    factorizations: AtomicUsize,
    solves: AtomicUsize,
    transpose_solves: AtomicUsize,
}

impl Discretization {
    pub fn new(mesh: &Mesh, wave: &WaveConfig, pml: &PmlConfig) -> Self {
        let spec = mesh.spec();
        let (w, side) = (spec.pml_width, spec.side);
        let k0 = wave.k0();
        let sigma_max = pml.sigma_max(w);
        let sigma = |x: f64| {
            let depth = (w - x).max(x - (w + side)).max(0.0);
            sigma_max * (depth / w).powf(pml.order)
        };
        let elements = (0..mesh.num_triangles())
            .map(|t| {
                let [p1, p2, p3] = mesh.triangle(t).map(|v| mesh.vertex(v));
                let grad = [
                    [p2[1] - p3[1], p3[0] - p2[0]],
                    [p3[1] - p1[1], p1[0] - p3[0]],
                    [p1[1] - p2[1], p2[0] - p1[0]],
                ];
                let c = mesh.centroid(t);
                let sx = C64::new(1.0, sigma(c[0]) / k0);
                let sy = C64::new(1.0, sigma(c[1]) / k0);
                ElementData { area: mesh.area(t), grad, pml: [sy / sx, sx / sy, sx * sy] }
            })
            .collect();
        let incident =
            mesh.vertices().iter().map(|&p| wave.incident(mesh.to_physical(p))).collect();
        let fixed: Vec<bool> = (0..mesh.num_vertices()).map(|v| mesh.is_boundary(v)).collect();
        let pattern = Pattern::new(mesh.num_vertices(), mesh.triangles(), &fixed);
        Self {
            wave: *wave,
            pml: *pml,
            elements,
            incident,
            pattern,
            symbolic_lu: OnceLock::new(),
            factorizations: AtomicUsize::new(0),
            solves: AtomicUsize::new(0),
            transpose_solves: AtomicUsize::new(0),
        }
    }

    pub fn wave(&self) -> &WaveConfig {
        &self.wave
    }

    pub fn pml(&self) -> &PmlConfig {
        &self.pml
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    /// Nodal incident field `exp(i k0 x·b̂)`.
    pub fn incident(&self) -> &[C64] {
        &self.incident
    }

    /// Assembles `A = −K_s + M_s(k²)` and the load `b`.
    pub fn assemble(&self, mesh: &Mesh, k: &WavenumberField) -> HelmholtzSystem {
        let k0 = k.k0;
        let mut values = vec![ZERO; self.pattern.nnz()];
        let mut rhs = vec![ZERO; self.dim()];
        for (t, e) in self.elements.iter().enumerate() {
            let kv = k.element_values(mesh, t);
            let k2 = kv.map(|x| x * x);
            let mut local = [[ZERO; 3]; 3];
            let inv4a = 1.0 / (4.0 * e.area);
            for a in 0..3 {
                for b in 0..3 {
                    let stiff = e.pml[0] * (e.grad[a][0] * e.grad[b][0] * inv4a)
                        + e.pml[1] * (e.grad[a][1] * e.grad[b][1] * inv4a);
                    let mass: f64 = (0..3).map(|l| k2[l] * triple(e.area, a, b, l)).sum();
                    local[a][b] = e.pml[2] * mass - stiff;
                }
            }
            self.pattern.scatter(t, &local, &mut values);

            if mesh.tag(t) == Subdomain::Lens {
                let tri = mesh.triangle(t);
                let f: [C64; 3] =
                    std::array::from_fn(|l| self.incident[tri[l]] * (k0 * k0 - k2[l]));
                for a in 0..3 {
                    if self.pattern.is_fixed(tri[a]) {
                        continue;
                    }
                    let load: C64 = (0..3).map(|l| f[l] * pair(e.area, a, l)).sum();
                    rhs[tri[a]] += e.pml[2] * load;
                }
            }
        }
        HelmholtzSystem { matrix: self.pattern.finish(values, ONE), rhs }
    }

    /// Sparse LU of a matrix assembled on this discretization. The symbolic
    /// analysis is computed once and reused.
    pub fn factorize(&self, matrix: &SparseColMat<usize, C64>) -> Result<Factorization<'_>> {
        let symbolic = match self.symbolic_lu.get() {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(matrix.symbolic()).map_err(|e| {
                    Error::Factorization(format!("symbolic analysis failed: {e:?}"))
                })?;
                self.symbolic_lu.get_or_init(|| s).clone()
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, matrix.as_ref()).map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::Factorization(format!(
                "structurally singular matrix: no pivot at elimination step {index}"
            )),
            LuError::Generic(g) => Error::Factorization(format!("{g:?}")),
        })?;
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        Ok(Factorization { lu, matrix: matrix.clone(), owner: self })
    }

    /// Assembles, factorizes and solves for the scattered field.
    pub fn solve(&self, mesh: &Mesh, k: &WavenumberField) -> Result<ForwardSolution<'_>> {
        let system = self.assemble(mesh, k);
        let factorization = self.factorize(&system.matrix)?;
        let u_sca = factorization.solve(&system.rhs)?;
        let u_tot = ComplexField(
            self.incident.iter().zip(&u_sca.0).map(|(a, b)| a + b).collect(),
        );
        Ok(ForwardSolution { u_sca, u_tot, factorization })
    }

    /// Solve counters `(factorizations, solves, transpose solves)`.
    pub fn counters(&self) -> SolveCounters {
        SolveCounters {
            factorizations: self.factorizations.load(Ordering::Relaxed),
            solves: self.solves.load(Ordering::Relaxed),
            transpose_solves: self.transpose_solves.load(Ordering::Relaxed),
        }
    }

    /// Element-level data needed by the adjoint: area and the lens flag.
    pub(crate) fn element_area(&self, t: usize) -> f64 {
        self.elements[t].area
    }

    pub(crate) fn element_volume_weight(&self, t: usize) -> C64 {
        self.elements[t].pml[2]
    }
}

/// Number of factorizations and solves performed on a discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveCounters {
    pub factorizations: usize,
    pub solves: usize,
    pub transpose_solves: usize,
}

/// `∫ φ_a φ_b φ_l` over a triangle of the given area.
#[inline]
pub(crate) fn triple(area: f64, a: usize, b: usize, l: usize) -> f64 {
    let equal = (a == b) as u8 + (b == l) as u8 + (a == l) as u8;
    area / 60.0
        * match equal {
            3 => 6.0,
            1 => 2.0,
            _ => 1.0,
        }
}

/// `∫ φ_a φ_b` over a triangle of the given area.
#[inline]
pub(crate) fn pair(area: f64, a: usize, b: usize) -> f64 {
    if a == b {
        area / 6.0
    } else {
        area / 12.0
    }
}

/// LU factors of one assembled Helmholtz matrix.
pub struct Factorization<'a> {
    lu: Lu<usize, C64>,
    matrix: SparseColMat<usize, C64>,
    owner: &'a Discretization,
}

impl std::fmt::Debug for Factorization<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization").field("dim", &self.matrix.nrows()).finish()
    }
}

impl Factorization<'_> {
    pub fn matrix(&self) -> &SparseColMat<usize, C64> {
        &self.matrix
    }

    /// Solves `A x = b`.
    pub fn solve(&self, rhs: &[C64]) -> Result<ComplexField> {
        self.owner.solves.fetch_add(1, Ordering::Relaxed);
        self.solve_with(rhs, false)
    }

    /// Solves `Aᵀ x = b` with the same factors.
    pub fn solve_transpose(&self, rhs: &[C64]) -> Result<ComplexField> {
        self.owner.transpose_solves.fetch_add(1, Ordering::Relaxed);
        self.solve_with(rhs, true)
    }

    fn solve_with(&self, rhs: &[C64], transpose: bool) -> Result<ComplexField> {
        let n = self.matrix.nrows();
        if rhs.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: rhs.len() });
        }
        if rhs.iter().all(|z| *z == ZERO) {
            return Ok(ComplexField::zeros(n));
        }
        let mut x = rhs.to_vec();
        let view = MatMut::from_column_major_slice_mut(&mut x, n, 1);
        if transpose {
            self.lu.solve_transpose_in_place_with_conj(Conj::No, view);
        } else {
            self.lu.solve_in_place_with_conj(Conj::No, view);
        }
        if let Some(v) = x.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Factorization(format!(
                "numerically singular matrix: non-finite solution entry at row {v}"
            )));
        }
        let res = if transpose {
            residual_of(&mat_t_vec(&self.matrix, &x, ZERO), rhs)
        } else {
            residual(&self.matrix, &x, rhs)
        };
        if !(res <= SINGULAR_RESIDUAL) {
            return Err(Error::Factorization(format!(
                "numerically singular matrix: relative residual {res:.3e}"
            )));
        }
        Ok(ComplexField(x))
    }
}

/// Forward solution for one wavenumber field; keeps the factors for the adjoint.
#[derive(Debug)]
pub struct ForwardSolution<'a> {
    pub u_sca: ComplexField,
    pub u_tot: ComplexField,
    pub factorization: Factorization<'a>,
}

/// Assembles the Helmholtz system for one wavenumber field.
pub fn assemble_system(
    mesh: &Mesh,
    k: &WavenumberField,
    wave: &WaveConfig,
    pml: &PmlConfig,
) -> HelmholtzSystem {
    Discretization::new(mesh, wave, pml).assemble(mesh, k)
}

/// Direct sparse solve of an assembled system.
pub fn solve_scattered(system: &HelmholtzSystem) -> Result<ComplexField> {
    let n = system.matrix.nrows();
    if system.rhs.iter().all(|z| *z == ZERO) {
        return Ok(ComplexField::zeros(n));
    }
    let lu = system.matrix.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let mut x = system.rhs.clone();
    lu.solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(&mut x, n, 1));
    if let Some(v) = x.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Factorization(format!(
            "numerically singular matrix: non-finite solution entry at row {v}"
        )));
    }
    Ok(ComplexField(x))
}

/// `u_tot = exp(i k0 x·b̂) + u_sca` at every vertex.
pub fn total_field(u_sca: &ComplexField, wave: &WaveConfig, mesh: &Mesh) -> ComplexField {
    ComplexField(
        mesh.vertices()
            .iter()
            .zip(&u_sca.0)
            .map(|(&p, u)| wave.incident(mesh.to_physical(p)) + u)
            .collect(),
    )
}
