//! Test-only reference solutions.

#![allow(dead_code)]

use std::f64::consts::PI;

use nanojet::objective::{DesignProblem, ObjectiveSpec};
use nanojet::random_field::{assemble_spde_operators, MaternSpec};
use nanojet::{DesignField, DomainSpec, Mesh, NoiseRealization, PmlConfig, WaveConfig};
use num_complex::Complex64;

/// Bessel function of the first kind from the periodic integral
/// `J_m(x) = (1/2π) ∫_0^{2π} cos(mt − x sin t) dt`, trapezoid rule
/// (spectrally accurate for a periodic integrand).
pub fn bessel_j(m: i32, x: f64) -> f64 {
    let n = 256 + 4 * (x.abs() as usize + m.unsigned_abs() as usize);
    let h = 2.0 * PI / n as f64;
    (0..n).map(|i| (m as f64 * i as f64 * h - x * (i as f64 * h).sin()).cos()).sum::<f64>() / n as f64
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `Y_n(x)` for `n ∈ {0, 1}` from
/// `Y_n(x) = (1/π)∫_0^π sin(x sin θ − nθ) dθ − (1/π)∫_0^∞ (e^{nt} + (−1)^n e^{−nt}) e^{−x sinh t} dt`.
fn bessel_y01(n: i32, x: f64) -> f64 {
    let nf = n as f64;
    let first = simpson(|t| (x * t.sin() - nf * t).sin(), 0.0, PI, 20_000);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let tmax = (60.0 / x).asinh() + 1.0;
    let second = simpson(|t| ((nf * t).exp() + sign * (-nf * t).exp()) * (-x * t.sinh()).exp(), 0.0, tmax, 20_000);
    (first - second) / PI
}

/// `Y_m(x)` for `m = 0..=max` by upward recurrence (stable for `Y`).
pub fn bessel_y_all(max: usize, x: f64) -> Vec<f64> {
    let mut y = vec![bessel_y01(0, x), bessel_y01(1, x)];
    for m in 1..max {
        let next = 2.0 * m as f64 / x * y[m] - y[m - 1];
        y.push(next);
    }
    y.truncate(max + 1);
    y
}

pub fn bessel_j_all(max: usize, x: f64) -> Vec<f64> {
    (0..=max + 1).map(|m| bessel_j(m as i32, x)).collect()
}

/// Plane wave `exp(i k0 x)` scattered by a homogeneous disk of index `n`,
/// radius `r0`; separable series truncated at `|m| ≤ ⌈n k0 r0⌉ + 15`.
pub struct CylinderSeries {
    k0: f64,
    radius: f64,
    center: [f64; 2],
    coeffs: Vec<Complex64>,
}

impl CylinderSeries {
    pub fn new(k0: f64, index: f64, radius: f64, center: [f64; 2]) -> Self {
        let x = k0 * radius;
        let mmax = (index * x).ceil() as usize + 15;
        let jx = bessel_j_all(mmax + 1, x);
        let yx = bessel_y_all(mmax + 2, x);
        let jn = bessel_j_all(mmax + 1, index * x);
        let d = |v: &[f64], m: usize| {
            if m == 0 {
                -v[1]
            } else {
                0.5 * (v[m - 1] - v[m + 1])
            }
        };
        let coeffs = (0..=mmax)
            .map(|m| {
                let h = Complex64::new(jx[m], yx[m]);
                let dh = Complex64::new(d(&jx, m), d(&yx, m));
                let num = index * d(&jn, m) * jx[m] - d(&jx, m) * jn[m];
                let den = dh * jn[m] - h * (index * d(&jn, m));
                Complex64::new(num, 0.0) / den
            })
            .collect();
        Self { k0, radius, center, coeffs }
    }

    /// Total field at a point outside the disk.
    pub fn total(&self, p: [f64; 2]) -> Complex64 {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        let r = dx.hypot(dy);
        assert!(r > self.radius, "series evaluated inside the disk");
        let theta = dy.atan2(dx);
        let x = self.k0 * r;
        let mmax = self.coeffs.len() - 1;
        let j = bessel_j_all(mmax, x);
        let y = bessel_y_all(mmax, x);
        let mut sca = Complex64::new(0.0, 0.0);
        for (m, a) in self.coeffs.iter().enumerate() {
            let eps = if m == 0 { 1.0 } else { 2.0 };
            let im = Complex64::i().powu(m as u32);
            sca += eps * im * a * Complex64::new(j[m], y[m]) * (m as f64 * theta).cos();
        }
        // the expansion is about the disk center, where the incident phase is k0 c_x
        Complex64::from_polar(1.0, self.k0 * p[0]) + Complex64::from_polar(1.0, self.k0 * self.center[0]) * sca
    }
}

/// Deterministic pseudo-random directions in `[-1, 1]`, for tests that must
/// not depend on an RNG crate's stream.
pub fn lcg_vector(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

pub struct Check {
    pub worst: f64,
    pub errors: Vec<f64>,
}

/// Central differences of `J` along random lens-supported directions against `∇J · d`.
pub fn directional_check(samples: usize, beta_v: f64, beta_p: f64, directions: usize) -> Check {
    let domain = DomainSpec { points_per_wavelength: 10.0, ..DomainSpec::default() };
    let wave = WaveConfig::new(2.0);
    let mesh = Mesh::build(&domain, wave.wavelength).unwrap();
    let spec = ObjectiveSpec { beta_v, beta_p, samples, ..ObjectiveSpec::default() };
    let problem = DesignProblem::new(&mesh, &wave, &PmlConfig::default(), &spec).unwrap();
    let zetas: Vec<NoiseRealization> = if samples == 1 {
        problem.deterministic_samples()
    } else {
        let ops = assemble_spde_operators(&mesh, &MaternSpec { seed: 11, ..MaternSpec::default() }).unwrap();
        ops.samples(samples).unwrap()
    };
    // a heterogeneous design so the check does not sit on a symmetric point
    let base = DesignField::homogeneous(&mesh, &wave, 1.5).unwrap();
    let bump = lcg_vector(3, mesh.num_vertices());
    let tau = DesignField(base.0.iter().zip(&bump).map(|(t, b)| t + 0.2 * b).collect());

    let grad = problem.gradient(&tau, &zetas, false).unwrap();
    let lens: Vec<bool> = (0..mesh.num_vertices()).map(|v| mesh.is_lens_vertex(v)).collect();
    let h = 1e-5;
    let mut errors = Vec::new();
    for k in 0..directions {
        let d: Vec<f64> = lcg_vector(100 + k as u64, mesh.num_vertices())
            .into_iter()
            .zip(&lens)
            .map(|(x, &l)| if l { x } else { 0.0 })
            .collect();
        let shifted = |s: f64| DesignField(tau.0.iter().zip(&d).map(|(t, dv)| t + s * dv).collect());
        let jp = problem.eval_j(&shifted(h), &zetas).unwrap().value;
        let jm = problem.eval_j(&shifted(-h), &zetas).unwrap().value;
        let fd = (jp - jm) / (2.0 * h);
        let ad: f64 = grad.gradient.iter().zip(&d).map(|(g, dv)| g * dv).sum();
        errors.push((fd - ad).abs() / ad.abs());
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    Check { worst, errors }
}
