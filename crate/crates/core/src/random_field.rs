//! Matérn-type manufacturing error on the lens via the elliptic SPDE
//! `(δ − γΔ) ζ = w` with natural (homogeneous Neumann) boundary conditions.
//!
//! With P1 elements on the lens triangles a sample is
//! `ζ = (δM + γK)⁻¹ H ξ`, where `ξ` is standard normal and
//! `H = diag(√(row sums of M))` is the lumped-mass square root.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::SparseColMat;
use faer::{Conj, MatMut, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helmholtz::NoiseRealization;
use crate::mesh::{Mesh, Subdomain};
use crate::sparse::Pattern;

/// Parameters of the error field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternSpec {
    pub delta: f64,
    pub gamma: f64,
    /// Smoothness exponent; only `α = 2` (one elliptic solve per sample) is supported.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MaternSpec {
    fn default() -> Self {
        Self { delta: 25.0, gamma: 2.5, alpha: 2.0, seed: 0 }
    }
}

impl MaternSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.delta.is_finite() && self.delta > 0.0) {
            errs.push(format!("noise.delta must be > 0 (got {})", self.delta));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            errs.push(format!("noise.gamma must be > 0 (got {})", self.gamma));
        }
        if self.alpha != 2.0 {
            errs.push(format!("noise.alpha must be 2 (got {})", self.alpha));
        }
        errs
    }
}

/// Seed of realization `index` derived from a master seed (SplitMix64 mixing).
pub fn realization_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SPDE operators on the lens vertex set, with the factorized `S = δM + γK`.
pub struct SpdeOperators {
    spec: MaternSpec,
    num_vertices: usize,
    /// Global vertex index of each lens DOF.
    dofs: Vec<usize>,
    system: SparseColMat<usize, f64>,
    mass: SparseColMat<usize, f64>,
    stiffness: SparseColMat<usize, f64>,
    lumped_sqrt: Vec<f64>,
    cholesky: Llt<usize, f64>,
}

impl std::fmt::Debug for SpdeOperators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdeOperators")
            .field("spec", &self.spec)
            .field("dofs", &self.dofs.len())
            .finish()
    }
}

/// Assembles `S = δM + γK` and `M` over the lens triangles and factorizes `S`.
pub fn assemble_spde_operators(mesh: &Mesh, spec: &MaternSpec) -> Result<SpdeOperators> {
    let errs = spec.violations();
    if !errs.is_empty() {
        return Err(Error::InvalidParameter(errs.join("; ")));
    }
    let dofs: Vec<usize> = mesh.lens_vertices().collect();
    if dofs.is_empty() {
        return Err(Error::EmptyLens { radius: mesh.spec().lens_radius, h: mesh.h() });
    }
    let mut local = vec![usize::MAX; mesh.num_vertices()];
    for (i, &v) in dofs.iter().enumerate() {
        local[v] = i;
    }
    let lens: Vec<usize> =
        (0..mesh.num_triangles()).filter(|&t| mesh.tag(t) == Subdomain::Lens).collect();
    let elements: Vec<[usize; 3]> = lens.iter().map(|&t| mesh.triangle(t).map(|v| local[v])).collect();
    let n = dofs.len();
    let pattern = Pattern::new(n, &elements, &vec![false; n]);

    let mut mass = vec![0.0; pattern.nnz()];
    let mut stiff = vec![0.0; pattern.nnz()];
    let mut lumped = vec![0.0; n];
    for (e, &t) in lens.iter().enumerate() {
        let area = mesh.area(t);
        let p = mesh.triangle(t).map(|v| mesh.vertex(v));
        let g = [
            [p[1][1] - p[2][1], p[2][0] - p[1][0]],
            [p[2][1] - p[0][1], p[0][0] - p[2][0]],
            [p[0][1] - p[1][1], p[1][0] - p[0][0]],
        ];
        let mut me = [[0.0; 3]; 3];
        let mut ke = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                me[a][b] = if a == b { area / 6.0 } else { area / 12.0 };
                ke[a][b] = (g[a][0] * g[b][0] + g[a][1] * g[b][1]) / (4.0 * area);
            }
            lumped[elements[e][a]] += area / 3.0;
        }
        pattern.scatter(e, &me, &mut mass);
        pattern.scatter(e, &ke, &mut stiff);
    }
    let system: Vec<f64> =
        mass.iter().zip(&stiff).map(|(m, k)| spec.delta * m + spec.gamma * k).collect();
    let system = pattern.finish(system, 1.0);
    let cholesky = system
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("SPDE operator is not positive definite: {e:?}")))?;
    Ok(SpdeOperators {
        spec: *spec,
        num_vertices: mesh.num_vertices(),
        dofs,
        system,
        mass: pattern.finish(mass, 1.0),
        stiffness: pattern.finish(stiff, 1.0),
        lumped_sqrt: lumped.iter().map(|m| m.sqrt()).collect(),
        cholesky,
    })
}

impl SpdeOperators {
    pub fn spec(&self) -> &MaternSpec {
        &self.spec
    }

    /// Global vertex indices of the lens DOFs, in DOF order.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    /// `S = δM + γK` on the lens DOFs.
    pub fn system(&self) -> &SparseColMat<usize, f64> {
        &self.system
    }

    pub fn mass(&self) -> &SparseColMat<usize, f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseColMat<usize, f64> {
        &self.stiffness
    }

    /// Maps a white-noise vector `ξ` (one entry per lens DOF) to a nodal
    /// realization, extended by zero outside the lens.
    pub fn sample_from_white_noise(&self, xi: &[f64]) -> Result<NoiseRealization> {
        let n = self.dofs.len();
        if xi.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: xi.len() });
        }
        let mut x: Vec<f64> = xi.iter().zip(&self.lumped_sqrt).map(|(a, b)| a * b).collect();
        self.cholesky
            .solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(&mut x, n, 1));
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "SPDE solution", vertex: self.dofs[i] });
        }
        let mut zeta = vec![0.0; self.num_vertices];
        for (i, &v) in self.dofs.iter().enumerate() {
            zeta[v] = x[i];
        }
        Ok(NoiseRealization(zeta))
    }

    /// Realization `index` of the stream seeded by `spec.seed`.
    pub fn sample(&self, index: usize) -> Result<NoiseRealization> {
        let mut rng = ChaCha8Rng::seed_from_u64(realization_seed(self.spec.seed, index));
        let xi: Vec<f64> = (0..self.dofs.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.sample_from_white_noise(&xi)
    }

    /// Realizations `0..count`.
    pub fn samples(&self, count: usize) -> Result<Vec<NoiseRealization>> {
        (0..count).map(|i| self.sample(i)).collect()
    }
}

/// Draws realization `index` for `spec`'s seed.
pub fn sample_zeta(ops: &SpdeOperators, index: usize) -> Result<NoiseRealization> {
    ops.sample(index)
}
