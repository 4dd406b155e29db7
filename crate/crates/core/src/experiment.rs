//! Experiment orchestration: problem setup from a configuration, searches,
//! single-design evaluation and the artifact files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::bayes::{GaussianModel, NoiseCovariance, PriorCovariance, WeightMatrix};
use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{Error, Result};
use crate::fem::{FeSpace, LameBackground};
use crate::geometry::{ActivationShape, BoundaryGeometry};
use crate::linmap::ForwardModel;
use crate::mesh::{build_mesh, build_subdomains, roi_mask, Mesh};
use crate::objective::DesignObjective;
use crate::optim::{
    enhanced_sequential, equidistant_design, exhaustive_search, gradient_descent, greedy_sequential,
    GradientDescentConfig, Objective, OptimizationTrace, Phase, SearchOutcome,
};

/// Number of points in the exported boundary outline.
pub const OUTLINE_POINTS: usize = 2000;

/// Builds the mesh, factorizes the background operator, solves the sensor
/// problems and assembles the Gaussian model for `config`.
pub fn build_objective(config: &ExperimentConfig) -> Result<DesignObjective> {
    config.validate()?;
    let geom = BoundaryGeometry::new(config.corner_radius)?;
    let mesh = build_mesh(&geom, config.mesh_target)?;
    let partition = build_subdomains(&mesh, config.subdomains)?;
    let roi = roi_mask(&partition, &mesh);
    let (lambda, mu) = config.scaled_lame();
    let space = FeSpace::new(mesh, geom);
    let stiffness = space.assemble_stiffness(&LameBackground::new(lambda, mu)?)?;
    let prior = PriorCovariance::new(
        partition.midpoints(),
        config.prior_length,
        config.prior_gamma_lambda,
        config.prior_gamma_mu,
    )?;
    let gaussian =
        GaussianModel::new(prior, NoiseCovariance::new(config.noise_variance)?, WeightMatrix::from_roi(&roi))?;
    let shape = ActivationShape::new(config.activation_sigma)?;
    let amplitude = config.pressure_amplitude / config.stress_unit;
    let model = ForwardModel::new(space, stiffness, partition, shape, amplitude, config.sensors)?;
    DesignObjective::new(model, gaussian)
}

/// Runs the configured search on a prepared objective.
pub fn search(config: &ExperimentConfig, objective: &mut DesignObjective) -> Result<SearchOutcome> {
    let k = config.activations;
    let j = config.grid_points;
    let gd = GradientDescentConfig::default();
    if config.algorithm != Algorithm::Gradient {
        objective.cache_grid(j);
    }
    match config.algorithm {
        Algorithm::Exhaustive => exhaustive_search(k, j, objective),
        Algorithm::Greedy => greedy_sequential(k, j, objective),
        Algorithm::Enhanced => enhanced_sequential(k, j, &gd, objective),
        Algorithm::Gradient => {
            let p0 = config.initial_design.clone().unwrap_or_else(|| equidistant_design(k, objective.length()));
            gradient_descent(&p0, &gd, objective)
        }
    }
}

/// Paths of the files written by [`run`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: PathBuf,
    pub trace: PathBuf,
    pub design: PathBuf,
    pub outline: PathBuf,
    pub mesh: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: SearchOutcome,
    pub artifacts: RunArtifacts,
    pub elapsed: Duration,
}

/// Full experiment: setup, search, and artifact export into `output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    config.validate()?;
    let mut objective = build_objective(config)?;
    let outcome = search(config, &mut objective)?;

    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let artifacts = RunArtifacts {
        config: dir.join("config.txt"),
        trace: dir.join("trace.txt"),
        design: dir.join("design.txt"),
        outline: dir.join("outline.txt"),
        mesh: dir.join("mesh.txt"),
    };
    fs::write(&artifacts.config, config.to_text())?;
    fs::write(&artifacts.trace, trace_text(&outcome.trace, config.activations))?;
    fs::write(&artifacts.design, design_text(&outcome.design, outcome.phi))?;
    fs::write(&artifacts.outline, outline_text(objective.model().space().geometry(), OUTLINE_POINTS))?;
    write_mesh(objective.model().space().mesh(), &artifacts.mesh)?;
    Ok(RunReport { outcome, artifacts, elapsed: start.elapsed() })
}

/// A single `Φ_A` evaluation with the parameters it depends on.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub config: ExperimentConfig,
    pub design: Vec<f64>,
    pub phi: f64,
}

impl EvaluationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for line in
            self.config.to_text().lines().filter(|l| !l.starts_with("initial_design") && !l.starts_with("output_dir"))
        {
            let _ = writeln!(s, "# {line}");
        }
        s.push_str(&design_text(&self.design, self.phi));
        s
    }
}

/// Evaluates `Φ_A` at `design` without searching.
pub fn evaluate(config: &ExperimentConfig, design: &[f64]) -> Result<EvaluationReport> {
    if design.len() != config.activations {
        return Err(Error::Config(format!(
            "design has {} entries, activations = {}",
            design.len(),
            config.activations
        )));
    }
    if design.iter().any(|p| !p.is_finite()) {
        return Err(Error::Config("design entries must be finite".into()));
    }
    let objective = build_objective(config)?;
    let phi = objective.value(design)?;
    Ok(EvaluationReport { config: config.clone(), design: design.to_vec(), phi })
}

fn header(k: usize) -> String {
    (1..=k).map(|i| format!("p_{i}")).collect::<Vec<_>>().join(" ")
}

/// Trace records as `iteration phase p_1 … p_K phi_A`; positions not yet
/// placed are written as `nan`.
pub fn trace_text(trace: &OptimizationTrace, k: usize) -> String {
    let mut s = format!("iteration phase {} phi_A\n", header(k));
    for r in trace.records() {
        let _ = write!(s, "{} {}", r.iteration, r.phase);
        for i in 0..k {
            match r.design.get(i) {
                Some(p) => {
                    let _ = write!(s, " {p}");
                }
                None => s.push_str(" nan"),
            }
        }
        let _ = writeln!(s, " {}", r.phi);
    }
    s
}

/// Parses the output of [`trace_text`].
pub fn parse_trace(text: &str) -> Result<OptimizationTrace> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or(Error::Parse { line: 1, message: "empty trace".into() })?;
    let columns: Vec<&str> = head.split_whitespace().collect();
    if columns.len() < 4 || columns[0] != "iteration" || columns[1] != "phase" || columns.last() != Some(&"phi_A") {
        return Err(Error::Parse { line: 1, message: format!("unexpected header '{head}'") });
    }
    let k = columns.len() - 3;
    let mut trace = OptimizationTrace::new();
    for (i, line) in lines {
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != k + 3 {
            return Err(bad(format!("expected {} columns, found {}", k + 3, fields.len())));
        }
        let iteration: usize = fields[0].parse().map_err(|_| bad(format!("bad iteration '{}'", fields[0])))?;
        if iteration != trace.len() {
            return Err(bad(format!("iteration {iteration} out of sequence")));
        }
        let phase: Phase = fields[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let mut design = Vec::with_capacity(k);
        for f in &fields[2..2 + k] {
            let v: f64 = f.parse().map_err(|_| bad(format!("bad position '{f}'")))?;
            if !v.is_nan() {
                design.push(v);
            }
        }
        let phi: f64 = fields[k + 2].parse().map_err(|_| bad(format!("bad value '{}'", fields[k + 2])))?;
        trace.push(phase, &design, phi);
    }
    Ok(trace)
}

/// Final design as a header `p_1 … p_K phi_A` and one record.
pub fn design_text(design: &[f64], phi: f64) -> String {
    let values: Vec<String> = design.iter().map(f64::to_string).collect();
    format!("{} phi_A\n{} {}\n", header(design.len()), values.join(" "), phi)
}

/// Closed boundary polyline `x y` sampled uniformly in arclength.
pub fn outline_text(geom: &BoundaryGeometry, points: usize) -> String {
    let mut s = String::from("x y\n");
    for i in 0..points {
        let [x, y] = geom.gamma(i as f64 * geom.length() / points as f64);
        let _ = writeln!(s, "{x} {y}");
    }
    s
}

/// Writes `mesh.txt` and `outline.txt` without assembling anything; returns
/// the node and element counts.
pub fn export_mesh(config: &ExperimentConfig) -> Result<(usize, usize)> {
    config.validate()?;
    let geom = BoundaryGeometry::new(config.corner_radius)?;
    let mesh = build_mesh(&geom, config.mesh_target)?;
    fs::create_dir_all(&config.output_dir)?;
    write_mesh(&mesh, &config.output_dir.join("mesh.txt"))?;
    fs::write(config.output_dir.join("outline.txt"), outline_text(&geom, OUTLINE_POINTS))?;
    Ok((mesh.num_nodes(), mesh.triangles().len()))
}

/// Writes the mesh text export to `path`.
pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    mesh.write_text(&mut file)?;
    file.flush()?;
    Ok(())
}
