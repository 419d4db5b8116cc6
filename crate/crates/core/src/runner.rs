//! Configuration-driven pipelines.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::helmholtz::{wavenumber_field, DesignField, Discretization, NoiseRealization, WavenumberField};
use crate::io::{
    read_real_field_file, write_complex_field, write_file, write_location_histogram,
    write_peak_histogram, write_real_field, write_uq_report, write_uq_summary, TraceWriter,
};
use crate::mesh::Mesh;
use crate::objective::{eval_q, DesignProblem};
use crate::optimizer::{minimize_with, Evaluation, Termination};
use crate::random_field::{assemble_spde_operators, realization_seed};
use crate::uq::{extract_features, forward_uq, PnjFeatures, UqSummary};

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: PathBuf,
    pub files: Vec<PathBuf>,
    pub termination: Option<Termination>,
    pub uq: Option<UqSummary>,
}

/// Executes the configured pipeline on a pool of `config.threads` workers.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

fn run_in_pool(config: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    fs::create_dir_all(&config.output)?;
    let mut out = Outputs { dir: config.output.clone(), files: Vec::new() };

    let seeds = realization_seeds(config);
    write_manifest(&out.path("manifest.toml"), config, &seeds)?;

    let mesh = Mesh::build(&config.domain, config.wave.wavelength)?;
    log::info!(
        "mesh: {} vertices, {} triangles, h = {:.4}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.h()
    );
    write_file(&out.path("mesh.txt"), |w| Ok(mesh.write_table(w)?))?;

    let mut report = RunReport {
        output: config.output.clone(),
        files: Vec::new(),
        termination: None,
        uq: None,
    };
    match config.mode {
        Mode::DesignDet | Mode::DesignOuu => {
            report.termination = Some(design(config, &mesh, &seeds, &mut out)?);
        }
        Mode::ForwardUq => report.uq = Some(uncertainty(config, &mesh, &seeds, &mut out)?),
        Mode::ForwardSolve => forward_solve(config, &mesh, &mut out)?,
    }
    log::info!("{} finished in {:.1} s", config.mode, start.elapsed().as_secs_f64());
    report.files = out.files;
    Ok(report)
}

/// Seeds of the noise realizations the run draws (none for noise-free modes).
fn realization_seeds(config: &RunConfig) -> Vec<u64> {
    let count = match config.mode {
        Mode::DesignOuu => config.objective.samples,
        Mode::ForwardUq => config.uq.realizations,
        Mode::DesignDet | Mode::ForwardSolve => 0,
    };
    (0..count).map(|i| realization_seed(config.seed, i)).collect()
}

fn write_manifest(path: &Path, config: &RunConfig, seeds: &[u64]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "# resolved configuration; rerun with --config <this file>")?;
        for (i, s) in seeds.iter().enumerate() {
            writeln!(w, "# realization {i} seed {s}")?;
        }
        w.write_all(config.to_toml().as_bytes())?;
        Ok(())
    })
}

fn draw(config: &RunConfig, mesh: &Mesh, count: usize) -> Result<Vec<NoiseRealization>> {
    let ops = assemble_spde_operators(mesh, &config.noise)?;
    ops.samples(count)
}

fn load_design(config: &RunConfig, mesh: &Mesh) -> Result<Option<DesignField>> {
    let Some(path) = &config.input_design else { return Ok(None) };
    let tau = DesignField(read_real_field_file(path, mesh.num_vertices())?);
    tau.check(mesh)?;
    Ok(Some(tau))
}

fn write_features<W: Write>(mut w: W, label: &str, f: &PnjFeatures) -> Result<()> {
    let fwhm = f.fwhm.map(|x| format!("{x:e}")).unwrap_or_default();
    writeln!(w, "{label}_peak_x,{:e}", f.location[0])?;
    writeln!(w, "{label}_peak_y,{:e}", f.location[1])?;
    writeln!(w, "{label}_peak_value,{:e}", f.peak)?;
    writeln!(w, "{label}_fwhm,{fwhm}")?;
    Ok(())
}

fn design(config: &RunConfig, mesh: &Mesh, seeds: &[u64], out: &mut Outputs) -> Result<Termination> {
    let problem = DesignProblem::new(mesh, &config.wave, &config.pml, &config.objective)?;
    let samples = match config.mode {
        Mode::DesignOuu => draw(config, mesh, seeds.len())?,
        _ => problem.deterministic_samples(),
    };
    let tau0 = DesignField::homogeneous(mesh, &config.wave, config.optimizer.initial_index)?;
    let features = config.uq.features;

    let u0 = problem.total_field(&tau0, None)?;
    let f0 = extract_features(&u0, mesh, &features)?;
    let target0 = eval_q_intensity(&problem, &u0);
    write_file(&out.path("design_initial.txt"), |w| write_real_field(w, mesh, "tau", &tau0.0))?;
    write_file(&out.path("field_initial.txt"), |w| write_complex_field(w, mesh, &u0))?;

    let mut trace = TraceWriter::new(std::io::BufWriter::new(fs::File::create(out.path("trace.csv"))?))?;
    let mut trace_err = None;
    let mut objective = |x: &[f64]| -> Result<Evaluation> {
        let g = problem.gradient(&DesignField(x.to_vec()), &samples, false)?;
        let e = &g.evaluation;
        Ok(Evaluation { value: e.value, gradient: g.gradient, terms: Some([e.mean, e.variance, e.penalty]) })
    };
    let result = minimize_with(&tau0.0, &mut objective, &config.optimizer, |r, _| {
        if trace_err.is_none() {
            trace_err = trace.record(r).err();
        }
    })?;
    if let Some(e) = trace_err {
        return Err(e);
    }
    log::info!("optimizer stopped: {} after {} iterations", result.termination, result.trace.records.len() - 1);

    let tau = DesignField(result.x);
    let u = problem.total_field(&tau, None)?;
    let f = extract_features(&u, mesh, &features)?;
    write_file(&out.path("design_final.txt"), |w| write_real_field(w, mesh, "tau", &tau.0))?;
    write_file(&out.path("field_final.txt"), |w| write_complex_field(w, mesh, &u))?;
    write_file(&out.path("gradient_final.txt"), |w| write_real_field(w, mesh, "gradient", &result.gradient))?;

    let first = &result.trace.records[0];
    let last = result.trace.records.last().expect("trace has the initial record");
    write_file(&out.path("design_summary.csv"), |w| {
        writeln!(w, "quantity,value")?;
        writeln!(w, "termination,{}", result.termination)?;
        writeln!(w, "iterations,{}", last.iteration)?;
        writeln!(w, "initial_J,{:e}", first.value)?;
        writeln!(w, "final_J,{:e}", last.value)?;
        writeln!(w, "initial_grad_norm,{:e}", first.grad_norm)?;
        writeln!(w, "final_grad_norm,{:e}", last.grad_norm)?;
        writeln!(w, "initial_target_intensity,{target0:e}")?;
        writeln!(w, "final_target_intensity,{:e}", eval_q_intensity(&problem, &u))?;
        write_features(&mut *w, "initial", &f0)?;
        write_features(&mut *w, "final", &f)?;
        Ok(())
    })?;
    Ok(result.termination)
}

/// `|u_tot(x_PNJ)|²`.
fn eval_q_intensity(problem: &DesignProblem<'_>, u: &crate::ComplexField) -> f64 {
    problem.target().interpolate(problem.mesh(), u.values()).norm_sqr()
}

fn uncertainty(config: &RunConfig, mesh: &Mesh, seeds: &[u64], out: &mut Outputs) -> Result<UqSummary> {
    let tau = load_design(config, mesh)?
        .ok_or_else(|| Error::InvalidParameter("forward-uq needs input_design".into()))?;
    let disc = Discretization::new(mesh, &config.wave, &config.pml);
    let samples = draw(config, mesh, seeds.len())?;
    let summary = forward_uq(mesh, &disc, &tau, &samples, seeds, &config.uq.features)?;
    write_file(&out.path("uq_report.csv"), |w| write_uq_report(w, &summary))?;
    write_file(&out.path("uq_summary.csv"), |w| write_uq_summary(w, &summary))?;
    write_file(&out.path("uq_locations.csv"), |w| write_location_histogram(w, &summary))?;
    write_file(&out.path("uq_peaks.csv"), |w| write_peak_histogram(w, &summary, config.uq.histogram_bins))?;
    Ok(summary)
}

fn forward_solve(config: &RunConfig, mesh: &Mesh, out: &mut Outputs) -> Result<()> {
    let tau = match load_design(config, mesh)? {
        Some(tau) => Some(tau),
        None if config.forward_index > 1.0 => {
            Some(DesignField::homogeneous(mesh, &config.wave, config.forward_index)?)
        }
        None => None,
    };
    let k = match &tau {
        Some(tau) => wavenumber_field(tau, None, &config.wave, mesh)?,
        None => WavenumberField::free_space(mesh, &config.wave),
    };
    let disc = Discretization::new(mesh, &config.wave, &config.pml);
    let u = disc.solve(mesh, &k)?.u_tot;
    if let Some(tau) = &tau {
        write_file(&out.path("design.txt"), |w| write_real_field(w, mesh, "tau", &tau.0))?;
    }
    write_file(&out.path("field.txt"), |w| write_complex_field(w, mesh, &u))?;
    let f = extract_features(&u, mesh, &config.uq.features)?;
    let target = mesh.locate_physical(config.objective.target)?;
    write_file(&out.path("features.csv"), |w| {
        writeln!(w, "quantity,value")?;
        writeln!(w, "target_intensity,{:e}", target.interpolate(mesh, u.values()).norm_sqr())?;
        writeln!(w, "target_q,{:e}", eval_q(&u, &target, mesh, config.objective.amplitude))?;
        write_features(&mut *w, "field", &f)
    })
}
