//! Experiment configuration in a flat `key = value` text format.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Background material, either a named preset or explicit Lamé parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    Acryl,
    Iron,
    Rubber,
    Custom { lambda: f64, mu: f64 },
}

impl Material {
    /// `(λ₀, μ₀)` in pascals.
    pub fn lame(&self) -> (f64, f64) {
        match *self {
            Material::Acryl => (2.7654e9, 1.1852e9),
            Material::Iron => (3.9188e10, 5.3675e10),
            Material::Rubber => (8.1081e8, 3.3784e7),
            Material::Custom { lambda, mu } => (lambda, mu),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Material::Acryl => "acryl",
            Material::Iron => "iron",
            Material::Rubber => "rubber",
            Material::Custom { .. } => "custom",
        }
    }
}

impl FromStr for Material {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acryl" => Ok(Material::Acryl),
            "iron" => Ok(Material::Iron),
            "rubber" => Ok(Material::Rubber),
            other => Err(Error::Config(format!("unknown material '{other}' (acryl, iron, rubber)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Exhaustive,
    Greedy,
    Enhanced,
    Gradient,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Exhaustive => "exhaustive",
            Algorithm::Greedy => "greedy",
            Algorithm::Enhanced => "enhanced",
            Algorithm::Gradient => "gradient",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Algorithm::Exhaustive),
            "greedy" => Ok(Algorithm::Greedy),
            "enhanced" => Ok(Algorithm::Enhanced),
            "gradient" => Ok(Algorithm::Gradient),
            other => {
                Err(Error::Config(format!("unknown algorithm '{other}' (exhaustive, greedy, enhanced, gradient)")))
            }
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// All parameters of one experiment. Stresses are given in pascals.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub material: Material,
    /// Pascals per internal stress unit.
    pub stress_unit: f64,
    /// Peak pressure of every activation and sensor function, in pascals.
    pub pressure_amplitude: f64,
    pub activations: usize,
    pub sensors: usize,
    pub subdomains: usize,
    pub activation_sigma: f64,
    pub noise_variance: f64,
    pub prior_length: f64,
    pub prior_gamma_lambda: f64,
    pub prior_gamma_mu: f64,
    pub algorithm: Algorithm,
    pub grid_points: usize,
    pub mesh_target: usize,
    pub corner_radius: f64,
    pub seed: u64,
    /// Starting design for `gradient`; the equidistant design when absent.
    pub initial_design: Option<Vec<f64>>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            material: Material::Acryl,
            stress_unit: 1e9,
            pressure_amplitude: 3.5e11,
            activations: 3,
            sensors: 20,
            subdomains: 50,
            activation_sigma: 0.01,
            noise_variance: 1e-3,
            prior_length: 0.1,
            prior_gamma_lambda: 1.0,
            prior_gamma_mu: 1.0,
            algorithm: Algorithm::Exhaustive,
            grid_points: 40,
            mesh_target: 1632,
            corner_radius: 1e-3,
            seed: 0,
            initial_design: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

/// Parses a comma-separated list of positions.
pub fn parse_design(value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|s| parse_num("design", s.trim())).collect()
}

impl ExperimentConfig {
    /// Sets one field from its textual key and value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "material" => {
                self.material = match v {
                    "custom" => {
                        let (lambda, mu) = self.material.lame();
                        Material::Custom { lambda, mu }
                    }
                    _ => v.parse()?,
                }
            }
            "lambda0" => {
                let (lambda, mu) = self.material.lame();
                let value = parse_num(key, v)?;
                if value != lambda {
                    self.material = Material::Custom { lambda: value, mu };
                }
            }
            "mu0" => {
                let (lambda, mu) = self.material.lame();
                let value = parse_num(key, v)?;
                if value != mu {
                    self.material = Material::Custom { lambda, mu: value };
                }
            }
            "stress_unit" => self.stress_unit = parse_num(key, v)?,
            "pressure_amplitude" => self.pressure_amplitude = parse_num(key, v)?,
            "activations" => self.activations = parse_num(key, v)?,
            "sensors" => self.sensors = parse_num(key, v)?,
            "subdomains" => self.subdomains = parse_num(key, v)?,
            "activation_sigma" => self.activation_sigma = parse_num(key, v)?,
            "noise_variance" => self.noise_variance = parse_num(key, v)?,
            "prior_length" => self.prior_length = parse_num(key, v)?,
            "prior_gamma_lambda" => self.prior_gamma_lambda = parse_num(key, v)?,
            "prior_gamma_mu" => self.prior_gamma_mu = parse_num(key, v)?,
            "algorithm" => self.algorithm = v.parse()?,
            "grid_points" => self.grid_points = parse_num(key, v)?,
            "mesh_target" => self.mesh_target = parse_num(key, v)?,
            "corner_radius" => self.corner_radius = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "initial_design" => {
                self.initial_design = if v.is_empty() || v == "none" { None } else { Some(parse_design(v)?) }
            }
            "output_dir" => self.output_dir = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            config.set(key, value).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(config)
    }

    /// Fully resolved parameter set, readable by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let (lambda, mu) = self.material.lame();
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("material", self.material.name().to_string());
        line("lambda0", lambda.to_string());
        line("mu0", mu.to_string());
        line("stress_unit", self.stress_unit.to_string());
        line("pressure_amplitude", self.pressure_amplitude.to_string());
        line("activations", self.activations.to_string());
        line("sensors", self.sensors.to_string());
        line("subdomains", self.subdomains.to_string());
        line("activation_sigma", self.activation_sigma.to_string());
        line("noise_variance", self.noise_variance.to_string());
        line("prior_length", self.prior_length.to_string());
        line("prior_gamma_lambda", self.prior_gamma_lambda.to_string());
        line("prior_gamma_mu", self.prior_gamma_mu.to_string());
        line("algorithm", self.algorithm.to_string());
        line("grid_points", self.grid_points.to_string());
        line("mesh_target", self.mesh_target.to_string());
        line("corner_radius", self.corner_radius.to_string());
        line("seed", self.seed.to_string());
        let design = match &self.initial_design {
            Some(d) => d.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            None => "none".into(),
        };
        line("initial_design", design);
        line("output_dir", self.output_dir.display().to_string());
        s
    }

    /// Rejects non-physical or inconsistent settings.
    pub fn validate(&self) -> Result<()> {
        let (lambda, mu) = self.material.lame();
        let positive = [
            ("lambda0", lambda),
            ("mu0", mu),
            ("stress_unit", self.stress_unit),
            ("pressure_amplitude", self.pressure_amplitude),
            ("activation_sigma", self.activation_sigma),
            ("noise_variance", self.noise_variance),
            ("prior_length", self.prior_length),
            ("prior_gamma_lambda", self.prior_gamma_lambda),
            ("prior_gamma_mu", self.prior_gamma_mu),
            ("corner_radius", self.corner_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.corner_radius >= 0.5 {
            return Err(Error::Config(format!("corner_radius must be below 0.5, got {}", self.corner_radius)));
        }
        if self.activations == 0 || self.sensors == 0 {
            return Err(Error::Config("activations and sensors must be at least 1".into()));
        }
        let k = ((self.subdomains / 2) as f64).sqrt().round() as usize;
        if self.subdomains == 0 || 2 * k * k != self.subdomains {
            return Err(Error::Config(format!(
                "subdomains must be 2k² (2, 8, 18, 32, 50, ...), got {}",
                self.subdomains
            )));
        }
        if self.mesh_target < 50 {
            return Err(Error::Config(format!("mesh_target must be at least 50, got {}", self.mesh_target)));
        }
        if self.algorithm != Algorithm::Gradient && self.grid_points < 2 {
            return Err(Error::Config(format!("grid_points must be at least 2 for {}", self.algorithm)));
        }
        if let Some(d) = &self.initial_design {
            if d.len() != self.activations {
                return Err(Error::Config(format!(
                    "initial_design has {} entries, activations = {}",
                    d.len(),
                    self.activations
                )));
            }
            if d.iter().any(|p| !p.is_finite()) {
                return Err(Error::Config("initial_design entries must be finite".into()));
            }
        }
        Ok(())
    }

    /// `(λ₀, μ₀)` in internal stress units.
    pub fn scaled_lame(&self) -> (f64, f64) {
        let (lambda, mu) = self.material.lame();
        (lambda / self.stress_unit, mu / self.stress_unit)
    }
}
