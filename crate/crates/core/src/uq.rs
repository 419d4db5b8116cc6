//! Forward uncertainty quantification: nanojet features of polluted designs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helmholtz::{wavenumber_field, ComplexField, DesignField, Discretization, NoiseRealization};
use crate::mesh::{Mesh, Point};
use crate::objective::{saa_mean, saa_variance};

/// Where to look for the peak and how to measure its width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Skip vertices inside the lens disk when searching for the peak.
    pub exclude_lens: bool,
    /// Physical x of the vertical FWHM transect; `None` runs it through the peak.
    pub transect_x: Option<f64>,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { exclude_lens: true, transect_x: None }
    }
}

/// Peak of `|u_tot|²` and its full width at half maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnjFeatures {
    pub vertex: usize,
    /// Peak vertex, physical frame.
    pub location: Point,
    pub peak: f64,
    /// `None` when the half level is not crossed on both sides.
    pub fwhm: Option<f64>,
}

/// Features of one realization together with its stream index and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationFeatures {
    pub index: usize,
    pub seed: u64,
    pub features: PnjFeatures,
}

/// Per-realization features and plug-in moments of peak x, peak y and peak value.
#[derive(Debug, Clone, PartialEq)]
pub struct UqSummary {
    pub realizations: Vec<RealizationFeatures>,
    pub mean: [f64; 3],
    pub variance: [f64; 3],
}

impl UqSummary {
    pub fn from_realizations(realizations: Vec<RealizationFeatures>) -> Result<Self> {
        let columns = [
            realizations.iter().map(|r| r.features.location[0]).collect::<Vec<_>>(),
            realizations.iter().map(|r| r.features.location[1]).collect(),
            realizations.iter().map(|r| r.features.peak).collect(),
        ];
        let mut mean = [0.0; 3];
        let mut variance = [0.0; 3];
        for (i, c) in columns.iter().enumerate() {
            mean[i] = saa_mean(c)?;
            variance[i] = saa_variance(c)?;
        }
        Ok(Self { realizations, mean, variance })
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    /// Number of distinct peak vertices.
    pub fn distinct_locations(&self) -> usize {
        location_histogram(self).len()
    }
}

/// Peak search plus FWHM along a vertical transect.
pub fn extract_features(u_tot: &ComplexField, mesh: &Mesh, opts: &FeatureOptions) -> Result<PnjFeatures> {
    if u_tot.len() != mesh.num_vertices() {
        return Err(Error::LengthMismatch { expected: mesh.num_vertices(), got: u_tot.len() });
    }
    let intensity = u_tot.intensity();
    let (vertex, peak) = peak_vertex(&intensity, mesh, opts.exclude_lens)?;
    let location = mesh.to_physical(mesh.vertex(vertex));
    let x = opts.transect_x.unwrap_or(location[0]);
    let fwhm = transect_fwhm(&intensity, mesh, x)?;
    Ok(PnjFeatures { vertex, location, peak, fwhm })
}

/// Argmax of `values` over physical-region vertices; ties go to the lowest index.
pub fn peak_vertex(values: &[f64], mesh: &Mesh, exclude_lens: bool) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (v, &val) in values.iter().enumerate() {
        if !mesh.is_physical_vertex(v) || (exclude_lens && mesh.in_lens_disk(mesh.vertex(v))) {
            continue;
        }
        if best.is_none_or(|(_, b)| val > b) {
            best = Some((v, val));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("no vertex eligible for the peak search".into()))
}

/// Samples the P1 interpolant of `values` on the vertical line at physical `x`,
/// spacing `h/2`, across the physical region.
pub fn vertical_transect(values: &[f64], mesh: &Mesh, x: f64) -> Result<Vec<(f64, f64)>> {
    let side = mesh.spec().side;
    let n = (2.0 * side / mesh.h()).round() as usize;
    (0..=n)
        .map(|i| {
            let y = side * i as f64 / n as f64;
            let loc = mesh.locate_physical([x, y])?;
            Ok((y, loc.interpolate(mesh, values)))
        })
        .collect()
}

/// Width at half the transect maximum, `None` if not bracketed on both sides.
pub fn transect_fwhm(values: &[f64], mesh: &Mesh, x: f64) -> Result<Option<f64>> {
    Ok(fwhm(&vertical_transect(values, mesh, x)?))
}

/// FWHM of sampled `(s, f(s))` pairs with linear crossing interpolation.
pub fn fwhm(samples: &[(f64, f64)]) -> Option<f64> {
    let (imax, &(_, fmax)) = samples
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &(f64, f64))>, (i, s)| match acc {
            Some((_, b)) if b.1 >= s.1 => acc,
            _ => Some((i, s)),
        })?;
    if !(fmax > 0.0) {
        return None;
    }
    let half = 0.5 * fmax;
    let cross = |a: (f64, f64), b: (f64, f64)| a.0 + (half - a.1) * (b.0 - a.0) / (b.1 - a.1);
    let left = (1..=imax)
        .rev()
        .find(|&i| samples[i - 1].1 < half)
        .map(|i| cross(samples[i - 1], samples[i]))?;
    let right = (imax..samples.len() - 1)
        .find(|&i| samples[i + 1].1 < half)
        .map(|i| cross(samples[i], samples[i + 1]))?;
    Some(right - left)
}

/// Solves every realization against `tau` and extracts features.
///
/// `seeds[m]` is recorded alongside realization `m`; the same realizations can
/// be replayed against another design.
pub fn forward_uq(
    mesh: &Mesh,
    disc: &Discretization,
    tau: &DesignField,
    samples: &[NoiseRealization],
    seeds: &[u64],
    opts: &FeatureOptions,
) -> Result<UqSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if seeds.len() != samples.len() {
        return Err(Error::LengthMismatch { expected: samples.len(), got: seeds.len() });
    }
    let realizations = samples
        .par_iter()
        .enumerate()
        .map(|(m, zeta)| {
            let run = || -> Result<PnjFeatures> {
                let k = wavenumber_field(tau, Some(zeta), disc.wave(), mesh)?;
                let u = disc.solve(mesh, &k)?.u_tot;
                extract_features(&u, mesh, opts)
            };
            run()
                .map(|features| RealizationFeatures { index: m, seed: seeds[m], features })
                .map_err(|e| Error::Sample { sample: m, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    UqSummary::from_realizations(realizations)
}

/// Counts per attained peak vertex, sorted by vertex index.
pub fn location_histogram(summary: &UqSummary) -> Vec<(usize, Point, usize)> {
    let mut bins: Vec<(usize, Point, usize)> = Vec::new();
    for r in &summary.realizations {
        let f = r.features;
        match bins.binary_search_by_key(&f.vertex, |b| b.0) {
            Ok(i) => bins[i].2 += 1,
            Err(i) => bins.insert(i, (f.vertex, f.location, 1)),
        }
    }
    bins
}

/// One bin `[lo, hi)` of a peak-value histogram; the last bin is closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram of peak values over their observed range.
pub fn peak_histogram(summary: &UqSummary, bins: usize) -> Vec<Bin> {
    let values: Vec<f64> = summary.realizations.iter().map(|r| r.features.peak).collect();
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![Bin { lo, hi, count: values.len() }];
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|i| Bin { lo: lo + i as f64 * width, hi: lo + (i + 1) as f64 * width, count: 0 })
        .collect();
    for v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}
