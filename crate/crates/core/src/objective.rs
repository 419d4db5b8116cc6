//! Nanojet objective, smoothed total-variation penalty and the sample-average
//! mean-variance functional
//!
//! ```text
//! J(τ) = mean_m Q_m + β_V var_m Q_m + β_P P(τ),   Q_m = ½ (|u_tot,m(x_PNJ)|² − A²)²
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helmholtz::{
    wavenumber_field, ComplexField, DesignField, Discretization, NoiseRealization, PmlConfig,
    WaveConfig,
};
use crate::mesh::{DomainSpec, Location, Mesh, Point, Subdomain};

/// Target and weights of the design objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    /// Desired nanojet location `x_PNJ` (physical frame).
    pub target: Point,
    /// Desired amplitude `A_PNJ`.
    pub amplitude: f64,
    pub beta_v: f64,
    pub beta_p: f64,
    /// Smoothing `ε` of the absolute value in the penalty.
    pub epsilon: f64,
    /// Sample count `M` of the sample average.
    pub samples: usize,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self {
            target: [8.5, 5.0],
            amplitude: 20.0,
            beta_v: 1e-6,
            beta_p: 1e-2,
            epsilon: 1e-3,
            samples: 1,
        }
    }
}

impl ObjectiveSpec {
    pub fn violations(&self, domain: &DomainSpec) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            errs.push(format!("objective.amplitude must be > 0 (got {})", self.amplitude));
        }
        if !(self.beta_v.is_finite() && self.beta_v >= 0.0) {
            errs.push(format!("objective.beta_v must be >= 0 (got {})", self.beta_v));
        }
        if !(self.beta_p.is_finite() && self.beta_p >= 0.0) {
            errs.push(format!("objective.beta_p must be >= 0 (got {})", self.beta_p));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            errs.push(format!("objective.epsilon must be > 0 (got {})", self.epsilon));
        }
        if self.samples < 1 {
            errs.push("objective.samples must be >= 1 (got 0)".to_string());
        }
        let [x, y] = self.target;
        let inside = |v: f64| v.is_finite() && v > 0.0 && v < domain.side;
        if !(inside(x) && inside(y)) {
            errs.push(format!(
                "objective.target {:?} must lie inside the physical region (0, {})^2",
                self.target, domain.side
            ));
        }
        errs
    }
}

/// `Q = ½ (|u_tot(x)|² − A²)²` with `u_tot(x)` interpolated at a located point.
pub fn eval_q(u_tot: &ComplexField, target: &Location, mesh: &Mesh, amplitude: f64) -> f64 {
    let u = target.interpolate(mesh, u_tot.values());
    0.5 * (u.norm_sqr() - amplitude * amplitude).powi(2)
}

/// `Q` at `spec.target`.
pub fn eval_q_at(u_tot: &ComplexField, spec: &ObjectiveSpec, mesh: &Mesh) -> Result<f64> {
    let loc = mesh.locate_physical(spec.target)?;
    Ok(eval_q(u_tot, &loc, mesh, spec.amplitude))
}

/// `P(τ) = ∫_D I_h[(τ² + ε)^½]`: the nodal interpolant of the smoothed absolute
/// value integrated exactly (mid-edge rule) over the lens triangles.
pub fn eval_penalty(tau: &DesignField, mesh: &Mesh, epsilon: f64) -> f64 {
    let smooth = |t: f64| (t * t + epsilon).sqrt();
    (0..mesh.num_triangles())
        .filter(|&t| mesh.tag(t) == Subdomain::Lens)
        .map(|t| {
            let s: f64 = mesh.triangle(t).iter().map(|&v| smooth(tau.0[v])).sum();
            mesh.area(t) * s / 3.0
        })
        .sum()
}

/// Nodal gradient of [`eval_penalty`].
pub fn penalty_gradient(tau: &DesignField, mesh: &Mesh, epsilon: f64) -> Vec<f64> {
    let mut g = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        if mesh.tag(t) != Subdomain::Lens {
            continue;
        }
        let w = mesh.area(t) / 3.0;
        for v in mesh.triangle(t) {
            let x = tau.0[v];
            g[v] += w * x / (x * x + epsilon).sqrt();
        }
    }
    g
}

/// Sample mean `(1/M) Σ Q_m`.
pub fn saa_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Plug-in variance `(1/M) Σ Q_m² − Q̄²`, clamped at zero against round-off.
pub fn saa_variance(values: &[f64]) -> Result<f64> {
    let mean = saa_mean(values)?;
    let second = values.iter().map(|q| q * q).sum::<f64>() / values.len() as f64;
    Ok((second - mean * mean).max(0.0))
}

/// Value of `J` with its three terms and the per-sample objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct JEvaluation {
    pub value: f64,
    pub mean: f64,
    pub variance: f64,
    pub penalty: f64,
    pub q: Vec<f64>,
}

impl JEvaluation {
    pub(crate) fn from_parts(spec: &ObjectiveSpec, q: Vec<f64>, penalty: f64) -> Result<Self> {
        let mean = saa_mean(&q)?;
        let variance = saa_variance(&q)?;
        let value = mean + spec.beta_v * variance + spec.beta_p * penalty;
        Ok(Self { value, mean, variance, penalty, q })
    }
}

/// Solver context for evaluating `J` and its gradient on one mesh.
///
/// Holds the shared discretization (with its cached symbolic factorization);
/// per-sample solves are independent and run on the rayon pool.
#[derive(Debug)]
pub struct DesignProblem<'m> {
    pub(crate) mesh: &'m Mesh,
    pub(crate) disc: Discretization,
    pub(crate) spec: ObjectiveSpec,
    pub(crate) target: Location,
}

impl<'m> DesignProblem<'m> {
    pub fn new(
        mesh: &'m Mesh,
        wave: &WaveConfig,
        pml: &PmlConfig,
        spec: &ObjectiveSpec,
    ) -> Result<Self> {
        let errs = spec.violations(mesh.spec());
        if !errs.is_empty() {
            return Err(Error::InvalidParameter(errs.join("; ")));
        }
        let target = mesh.locate_physical(spec.target)?;
        Ok(Self { mesh, disc: Discretization::new(mesh, wave, pml), spec: *spec, target })
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    pub fn target(&self) -> &Location {
        &self.target
    }

    /// `M = 1, ζ = 0`: the deterministic problem.
    pub fn deterministic_samples(&self) -> Vec<NoiseRealization> {
        vec![NoiseRealization::zeros(self.mesh.num_vertices())]
    }

    pub(crate) fn check_samples(&self, samples: &[NoiseRealization]) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if samples.len() != self.spec.samples {
            return Err(Error::InvalidParameter(format!(
                "got {} noise realizations but objective.samples = {}",
                samples.len(),
                self.spec.samples
            )));
        }
        Ok(())
    }

    /// Total field for one realization.
    pub fn total_field(
        &self,
        tau: &DesignField,
        zeta: Option<&NoiseRealization>,
    ) -> Result<ComplexField> {
        let k = wavenumber_field(tau, zeta, self.disc.wave(), self.mesh)?;
        Ok(self.disc.solve(self.mesh, &k)?.u_tot)
    }

    /// `J(τ)` over the given realizations (one forward solve each).
    pub fn eval_j(&self, tau: &DesignField, samples: &[NoiseRealization]) -> Result<JEvaluation> {
        self.check_samples(samples)?;
        let q = samples
            .par_iter()
            .enumerate()
            .map(|(m, zeta)| {
                self.total_field(tau, Some(zeta))
                    .map(|u| eval_q(&u, &self.target, self.mesh, self.spec.amplitude))
                    .map_err(|e| Error::Sample { sample: m, source: Box::new(e) })
            })
            .collect::<Result<Vec<f64>>>()?;
        JEvaluation::from_parts(&self.spec, q, eval_penalty(tau, self.mesh, self.spec.epsilon))
    }
}
