//! Discrete adjoint gradient of the sample-average objective.
//!
//! For each realization the forward system `A_m u_m = b_m` is factorized once;
//! the adjoint `A_mᵀ v_m = −∂Q/∂u` reuses the factors through a transpose
//! solve. Since `J` couples the samples only through scalar weights
//!
//! ```text
//! w_m = 1/M + β_V (2 Q_m − 2 Q̄) / M
//! ```
//!
//! each sample computes its unit-weight adjoint and τ-sensitivity right after
//! its forward solve, and the weighted sum is formed at the end. This keeps
//! one factorization alive per worker and costs exactly `M` forward and `M`
//! adjoint solves per gradient.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::helmholtz::{
    pair, triple, wavenumber_field, ComplexField, DesignField, Factorization, NoiseRealization,
    WavenumberField, C64,
};
use crate::mesh::{Location, Mesh, Subdomain};
use crate::objective::{eval_penalty, penalty_gradient, DesignProblem, JEvaluation};

/// Nodal gradient of `J` with optional per-sample adjoint fields.
#[derive(Debug, Clone)]
pub struct GradientResult {
    pub gradient: Vec<f64>,
    pub evaluation: JEvaluation,
    /// Weighted adjoint fields `v_m`, when requested.
    pub adjoints: Option<Vec<ComplexField>>,
}

impl GradientResult {
    pub fn norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Adjoint field for one sample: solves `Aᵀ v = −weight · 2 (|u_p|² − A²) conj(u_p) φ(x_PNJ)`,
/// where `u_p = u_tot(x_PNJ)` and `φ(x_PNJ)` are the barycentric weights.
pub fn adjoint_solve(
    factorization: &Factorization<'_>,
    u_tot: &ComplexField,
    target: &Location,
    mesh: &Mesh,
    amplitude: f64,
    weight: f64,
) -> Result<ComplexField> {
    let u_p = target.interpolate(mesh, u_tot.values());
    let scale = weight * 2.0 * (u_p.norm_sqr() - amplitude * amplitude);
    let mut rhs = vec![C64::new(0.0, 0.0); mesh.num_vertices()];
    for (&v, &w) in mesh.triangle(target.triangle).iter().zip(&target.weights) {
        if !mesh.is_boundary(v) {
            rhs[v] -= u_p.conj() * (scale * w);
        }
    }
    factorization.solve_transpose(&rhs)
}

/// `Re(vᵀ ∂(A u_sca − b)/∂τ_j)` for every vertex `j`.
fn sensitivity(
    mesh: &Mesh,
    problem: &DesignProblem<'_>,
    k: &WavenumberField,
    u_sca: &[C64],
    v: &[C64],
) -> Vec<f64> {
    let incident = problem.disc.incident();
    let mut g = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        if mesh.tag(t) != Subdomain::Lens {
            continue;
        }
        let tri = mesh.triangle(t);
        let area = problem.disc.element_area(t);
        let weight = problem.disc.element_volume_weight(t);
        for l in 0..3 {
            let j = tri[l];
            let dk2 = 2.0 * k.nodal[j] * k.growth[j];
            if dk2 == 0.0 {
                continue;
            }
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..3 {
                if mesh.is_boundary(tri[a]) {
                    continue;
                }
                let mut row = C64::new(0.0, 0.0);
                for b in 0..3 {
                    row += u_sca[tri[b]] * triple(area, a, b, l);
                }
                // ∂b_a/∂τ_l = −dk2 · u_inc,l ∫φ_a φ_l
                row += incident[j] * pair(area, a, l);
                acc += v[tri[a]] * row;
            }
            g[j] += (weight * acc * dk2).re;
        }
    }
    g
}

struct SampleGradient {
    q: f64,
    field_gradient: Vec<f64>,
    adjoint: Option<ComplexField>,
}

impl DesignProblem<'_> {
    /// `J(τ)` and its nodal gradient; `2M` PDE solves on `M` factorizations.
    pub fn gradient(
        &self,
        tau: &DesignField,
        samples: &[NoiseRealization],
        keep_adjoints: bool,
    ) -> Result<GradientResult> {
        self.check_samples(samples)?;
        let mesh = self.mesh;
        let amplitude = self.spec.amplitude;
        let per_sample = samples
            .par_iter()
            .enumerate()
            .map(|(m, zeta)| {
                let run = || -> Result<SampleGradient> {
                    let k = wavenumber_field(tau, Some(zeta), self.disc.wave(), mesh)?;
                    let fwd = self.disc.solve(mesh, &k)?;
                    let q = crate::objective::eval_q(&fwd.u_tot, &self.target, mesh, amplitude);
                    let v = adjoint_solve(&fwd.factorization, &fwd.u_tot, &self.target, mesh, amplitude, 1.0)?;
                    let field_gradient = sensitivity(mesh, self, &k, &fwd.u_sca.0, &v.0);
                    Ok(SampleGradient { q, field_gradient, adjoint: keep_adjoints.then_some(v) })
                };
                run().map_err(|e| Error::Sample { sample: m, source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()?;

        let q: Vec<f64> = per_sample.iter().map(|s| s.q).collect();
        let penalty = eval_penalty(tau, mesh, self.spec.epsilon);
        let evaluation = JEvaluation::from_parts(&self.spec, q, penalty)?;
        let weights = sample_weights(&evaluation.q, self.spec.beta_v);

        let mut gradient = penalty_gradient(tau, mesh, self.spec.epsilon);
        for g in gradient.iter_mut() {
            *g *= self.spec.beta_p;
        }
        for (s, w) in per_sample.iter().zip(&weights) {
            for (g, d) in gradient.iter_mut().zip(&s.field_gradient) {
                *g += w * d;
            }
        }
        let adjoints = keep_adjoints.then(|| {
            per_sample
                .into_iter()
                .zip(&weights)
                .map(|(s, &w)| {
                    let v = s.adjoint.expect("adjoint kept");
                    ComplexField(v.0.into_iter().map(|z| z * w).collect())
                })
                .collect()
        });
        Ok(GradientResult { gradient, evaluation, adjoints })
    }
}

/// `∂J/∂Q_m = 1/M + β_V (2 Q_m − 2 Q̄) / M`.
pub fn sample_weights(q: &[f64], beta_v: f64) -> Vec<f64> {
    let m = q.len() as f64;
    let mean = q.iter().sum::<f64>() / m;
    q.iter().map(|&qm| 1.0 / m + beta_v * (2.0 * qm - 2.0 * mean) / m).collect()
}
