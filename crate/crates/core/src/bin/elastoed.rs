use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use elastoed::config::{parse_design, ExperimentConfig};
use elastoed::experiment;
use elastoed::{Error, Result};

#[derive(Parser)]
#[command(name = "elastoed", version, about = "A-optimal boundary activation placement for 2D elasticity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a design search and write config, trace, design, outline and mesh files.
    Run(Settings),
    /// Evaluate the criterion at a given design.
    Evaluate {
        #[command(flatten)]
        settings: Settings,
        /// Comma separated activation positions.
        #[arg(long)]
        design: String,
    },
    /// Write the mesh and boundary outline without solving.
    ExportMesh(Settings),
}

#[derive(Args)]
struct Settings {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Additional `key=value` overrides, applied after the named flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    material: Option<String>,
    #[arg(long)]
    lambda0: Option<String>,
    #[arg(long)]
    mu0: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    activations: Option<String>,
    #[arg(long)]
    sensors: Option<String>,
    #[arg(long)]
    subdomains: Option<String>,
    #[arg(long)]
    grid_points: Option<String>,
    #[arg(long)]
    mesh_target: Option<String>,
    #[arg(long)]
    noise_variance: Option<String>,
    #[arg(long)]
    pressure_amplitude: Option<String>,
    #[arg(long)]
    initial_design: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
}

impl Settings {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        let named = [
            ("material", &self.material),
            ("lambda0", &self.lambda0),
            ("mu0", &self.mu0),
            ("algorithm", &self.algorithm),
            ("activations", &self.activations),
            ("sensors", &self.sensors),
            ("subdomains", &self.subdomains),
            ("grid_points", &self.grid_points),
            ("mesh_target", &self.mesh_target),
            ("noise_variance", &self.noise_variance),
            ("pressure_amplitude", &self.pressure_amplitude),
            ("initial_design", &self.initial_design),
            ("seed", &self.seed),
            ("output_dir", &self.output_dir),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        for item in &self.overrides {
            let (key, value) =
                item.split_once('=').ok_or_else(|| Error::Config(format!("override '{item}' is not KEY=VALUE")))?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(settings) => {
            let config = settings.resolve()?;
            let report = experiment::run(&config)?;
            println!("{}", experiment::design_text(&report.outcome.design, report.outcome.phi).trim_end());
            eprintln!(
                "{}: {} evaluations, {} gradient evaluations, {:.3} s, output in {}",
                config.algorithm,
                report.outcome.evaluations,
                report.outcome.gradient_evaluations,
                report.elapsed.as_secs_f64(),
                config.output_dir.display()
            );
        }
        Command::Evaluate { settings, design } => {
            let config = settings.resolve()?;
            let design = parse_design(&design)?;
            let report = experiment::evaluate(&config, &design)?;
            print!("{}", report.to_text());
        }
        Command::ExportMesh(settings) => {
            let config = settings.resolve()?;
            let (nodes, elements) = experiment::export_mesh(&config)?;
            eprintln!("{nodes} nodes, {elements} elements, output in {}", config.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code() as u8)
        }
    }
}
