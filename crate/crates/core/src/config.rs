//! TOML run configuration.
//!
//! Every key is optional except `wave.wavelength`, which has no default.
//! Validation reports all violations at once. The resolved configuration is
//! written back as a manifest that is itself a valid config file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::helmholtz::{PmlConfig, WaveConfig};
use crate::mesh::{DomainSpec, Point};
use crate::objective::ObjectiveSpec;
use crate::optimizer::OptConfig;
use crate::random_field::MaternSpec;
use crate::uq::FeatureOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    DesignDet,
    DesignOuu,
    ForwardUq,
    ForwardSolve,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::DesignDet => "design-det",
            Mode::DesignOuu => "design-ouu",
            Mode::ForwardUq => "forward-uq",
            Mode::ForwardSolve => "forward-solve",
        })
    }
}

macro_rules! section {
    ($(#[$m:meta])* $name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

section!(DomainSection {
    side: f64,
    pml_width: f64,
    lens_center: Point,
    lens_radius: f64,
    points_per_wavelength: f64,
});

section!(WaveSection { wavelength: f64, direction: Point });

section!(PmlSection { order: f64, reflection: f64 });

section!(ObjectiveSection {
    target: Point,
    amplitude: f64,
    beta_v: f64,
    beta_p: f64,
    epsilon: f64,
    samples: usize,
});

section!(NoiseSection { delta: f64, gamma: f64, alpha: f64 });

section!(OptimizerSection {
    memory: usize,
    g_tol: f64,
    max_iterations: usize,
    max_backtracking: usize,
    c1: f64,
    initial_step: f64,
    initial_index: f64,
});

section!(
    /// `transect_x` absent means the transect runs through the peak.
    UqSection {
        realizations: usize,
        exclude_lens: bool,
        transect_x: f64,
        histogram_bins: usize,
    }
);

section!(
    /// Homogeneous lens index for `forward-solve` without an input design; 1 removes the lens.
    ForwardSection { index: f64 }
);

/// The config file as written; all keys optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_design: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub wave: WaveSection,
    #[serde(default)]
    pub pml: PmlSection,
    #[serde(default)]
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub uq: UqSection,
    #[serde(default)]
    pub forward: ForwardSection,
}

/// Forward-UQ settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UqSettings {
    pub realizations: usize,
    pub features: FeatureOptions,
    pub histogram_bins: usize,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub output: PathBuf,
    pub input_design: Option<PathBuf>,
    pub threads: usize,
    pub domain: DomainSpec,
    pub wave: WaveConfig,
    pub pml: PmlConfig,
    pub objective: ObjectiveSpec,
    /// Its `seed` equals the master seed.
    pub noise: MaternSpec,
    pub optimizer: OptConfig,
    pub uq: UqSettings,
    pub forward_index: f64,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Parses and validates config text, applying `overrides`.
pub fn validate_config(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text)
        .map_err(|e| Error::Parse { path: "config".into(), message: e.to_string() })?;
    resolve(file, overrides)
}

/// Fills defaults and collects every violation.
pub fn resolve(file: ConfigFile, overrides: &Overrides) -> Result<RunConfig> {
    let mut errs = Vec::new();
    let mode = overrides.mode.or(file.mode);
    if mode.is_none() {
        errs.push("mode is required (design-det, design-ouu, forward-uq or forward-solve)".into());
    }
    let wavelength = file.wave.wavelength;
    if wavelength.is_none() {
        errs.push("wave.wavelength is required and has no default".into());
    }

    let d = DomainSpec::default();
    let domain = DomainSpec {
        side: file.domain.side.unwrap_or(d.side),
        pml_width: file.domain.pml_width.unwrap_or(d.pml_width),
        lens_center: file.domain.lens_center.unwrap_or(d.lens_center),
        lens_radius: file.domain.lens_radius.unwrap_or(d.lens_radius),
        points_per_wavelength: file.domain.points_per_wavelength.unwrap_or(d.points_per_wavelength),
    };
    errs.extend(domain.violations());

    let mut wave = WaveConfig::new(wavelength.unwrap_or(1.0));
    if let Some(b) = file.wave.direction {
        wave.direction = b;
    }
    if wavelength.is_some() {
        errs.extend(wave.violations());
    }

    let p = PmlConfig::default();
    let pml = PmlConfig {
        order: file.pml.order.unwrap_or(p.order),
        reflection: file.pml.reflection.unwrap_or(p.reflection),
    };
    errs.extend(pml.violations());

    let o = ObjectiveSpec::default();
    let default_samples = if mode == Some(Mode::DesignOuu) { 15 } else { 1 };
    let objective = ObjectiveSpec {
        target: file.objective.target.unwrap_or(o.target),
        amplitude: file.objective.amplitude.unwrap_or(o.amplitude),
        beta_v: file.objective.beta_v.unwrap_or(o.beta_v),
        beta_p: file.objective.beta_p.unwrap_or(o.beta_p),
        epsilon: file.objective.epsilon.unwrap_or(o.epsilon),
        samples: file.objective.samples.unwrap_or(default_samples),
    };
    errs.extend(objective.violations(&domain));
    if mode == Some(Mode::DesignDet) && objective.samples > 1 {
        errs.push(format!(
            "objective.samples must be 1 for design-det (got {}); use design-ouu",
            objective.samples
        ));
    }

    let seed = overrides.seed.or(file.seed).unwrap_or(0);
    let n = MaternSpec::default();
    let noise = MaternSpec {
        delta: file.noise.delta.unwrap_or(n.delta),
        gamma: file.noise.gamma.unwrap_or(n.gamma),
        alpha: file.noise.alpha.unwrap_or(n.alpha),
        seed,
    };
    errs.extend(noise.violations());

    let c = OptConfig::default();
    let s = &file.optimizer;
    let optimizer = OptConfig {
        memory: s.memory.unwrap_or(c.memory),
        g_tol: s.g_tol.unwrap_or(c.g_tol),
        max_iterations: s.max_iterations.unwrap_or(c.max_iterations),
        max_backtracking: s.max_backtracking.unwrap_or(c.max_backtracking),
        c1: s.c1.unwrap_or(c.c1),
        initial_step: s.initial_step.unwrap_or(c.initial_step),
        initial_index: s.initial_index.unwrap_or(c.initial_index),
    };
    errs.extend(optimizer.violations());
    if optimizer.initial_index <= 1.0 && matches!(mode, Some(Mode::DesignDet | Mode::DesignOuu)) {
        errs.push("optimizer.initial_index must be > 1 to start from a lens".into());
    }

    let f = FeatureOptions::default();
    let uq = UqSettings {
        realizations: file.uq.realizations.unwrap_or(15),
        features: FeatureOptions {
            exclude_lens: file.uq.exclude_lens.unwrap_or(f.exclude_lens),
            transect_x: file.uq.transect_x.or(f.transect_x),
        },
        histogram_bins: file.uq.histogram_bins.unwrap_or(10),
    };
    if uq.realizations < 1 {
        errs.push("uq.realizations must be >= 1 (got 0)".into());
    }
    if uq.histogram_bins < 1 {
        errs.push("uq.histogram_bins must be >= 1 (got 0)".into());
    }
    if let Some(x) = uq.features.transect_x {
        if !(x.is_finite() && x >= 0.0 && x <= domain.side) {
            errs.push(format!("uq.transect_x must lie in [0, {}] (got {x})", domain.side));
        }
    }

    let forward_index = file.forward.index.unwrap_or(1.5);
    if !(forward_index.is_finite() && forward_index >= 1.0) {
        errs.push(format!("forward.index must be >= 1 (got {forward_index})"));
    }
    if mode == Some(Mode::ForwardUq) && file.input_design.is_none() {
        errs.push("input_design is required for forward-uq".into());
    }

    let threads = match overrides.threads.or(file.threads).unwrap_or(0) {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    };

    match mode {
        Some(mode) if errs.is_empty() => Ok(RunConfig {
            mode,
            seed,
            output: overrides.output.clone().or(file.output).unwrap_or_else(|| "output".into()),
            input_design: file.input_design,
            threads,
            domain,
            wave,
            pml,
            objective,
            noise,
            optimizer,
            uq,
            forward_index,
        }),
        _ => Err(Error::Config(errs)),
    }
}

impl RunConfig {
    /// The resolved configuration with every key present.
    pub fn to_file(&self) -> ConfigFile {
        let o = &self.optimizer;
        ConfigFile {
            mode: Some(self.mode),
            seed: Some(self.seed),
            output: Some(self.output.clone()),
            input_design: self.input_design.clone(),
            threads: Some(self.threads),
            domain: DomainSection {
                side: Some(self.domain.side),
                pml_width: Some(self.domain.pml_width),
                lens_center: Some(self.domain.lens_center),
                lens_radius: Some(self.domain.lens_radius),
                points_per_wavelength: Some(self.domain.points_per_wavelength),
            },
            wave: WaveSection {
                wavelength: Some(self.wave.wavelength),
                direction: Some(self.wave.direction),
            },
            pml: PmlSection { order: Some(self.pml.order), reflection: Some(self.pml.reflection) },
            objective: ObjectiveSection {
                target: Some(self.objective.target),
                amplitude: Some(self.objective.amplitude),
                beta_v: Some(self.objective.beta_v),
                beta_p: Some(self.objective.beta_p),
                epsilon: Some(self.objective.epsilon),
                samples: Some(self.objective.samples),
            },
            noise: NoiseSection {
                delta: Some(self.noise.delta),
                gamma: Some(self.noise.gamma),
                alpha: Some(self.noise.alpha),
            },
            optimizer: OptimizerSection {
                memory: Some(o.memory),
                g_tol: Some(o.g_tol),
                max_iterations: Some(o.max_iterations),
                max_backtracking: Some(o.max_backtracking),
                c1: Some(o.c1),
                initial_step: Some(o.initial_step),
                initial_index: Some(o.initial_index),
            },
            uq: UqSection {
                realizations: Some(self.uq.realizations),
                exclude_lens: Some(self.uq.features.exclude_lens),
                transect_x: self.uq.features.transect_x,
                histogram_bins: Some(self.uq.histogram_bins),
            },
            forward: ForwardSection { index: Some(self.forward_index) },
        }
    }

    /// TOML text of [`RunConfig::to_file`].
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("config serializes")
    }
}
