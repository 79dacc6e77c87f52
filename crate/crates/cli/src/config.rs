//! TOML experiment configs. Every key is optional unless noted; the resolved
//! values, defaults included, are what the manifest records.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Reads and parses a config file, checking the optional `experiment` tag.
pub fn load<T: DeserializeOwned + Tagged>(path: &Path, experiment: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: T = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(tag) = cfg.tag() {
        if tag != experiment {
            return Err(CliError::Config(format!(
                "key `experiment`: config is for `{tag}` but `{experiment}` was requested"
            )));
        }
    }
    Ok(cfg)
}

pub trait Tagged {
    fn tag(&self) -> Option<&str>;
}

macro_rules! tagged {
    ($($t:ty),*) => {
        $(impl Tagged for $t {
            fn tag(&self) -> Option<&str> {
                self.experiment.as_deref()
            }
        })*
    };
}

/// Resolves a config-relative path and checks that it exists.
pub fn existing_file(base: &Path, file: &Path, key: &str) -> Result<PathBuf, CliError> {
    let full = if file.is_absolute() {
        file.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(file)
    };
    if !full.is_file() {
        return Err(CliError::Config(format!(
            "key `{key}`: file {} does not exist",
            full.display()
        )));
    }
    Ok(full)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub alpha: Option<f64>,
    pub k: Option<f64>,
    pub n0: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Packet {
    pub alpha: f64,
    pub k: f64,
    pub n0: f64,
}

impl PacketConfig {
    pub fn resolve(&self, alpha: f64, n0: f64) -> Packet {
        Packet {
            alpha: self.alpha.unwrap_or(alpha),
            k: self.k.unwrap_or(FRAC_PI_2),
            n0: self.n0.unwrap_or(n0),
        }
    }
}

/// `points` evenly spaced values from `min` to `max` inclusive.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points }
    }

    pub fn values(&self, key: &str) -> Result<Vec<f64>, CliError> {
        if self.points == 0 {
            return Err(CliError::Config(format!("key `{key}.points`: grid must be non-empty")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max >= self.min) {
            return Err(CliError::Config(format!(
                "key `{key}`: need finite min <= max, got {} and {}",
                self.min, self.max
            )));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.min + i as f64 * step).collect())
    }
}

fn non_empty(values: &[f64], key: &str) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config(format!("key `{key}`: list must be non-empty")));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarConfig {
    pub experiment: Option<String>,
    pub m: Option<usize>,
    pub input: Option<usize>,
    pub arm: Option<usize>,
    #[serde(default)]
    pub packet: PacketConfig,
    pub t_end: Option<f64>,
    pub time_step: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Star {
    pub m: usize,
    pub input: usize,
    pub arm: usize,
    pub coupling: f64,
    pub packet: Packet,
    /// `None` means the ballistic time to the arm ends.
    pub t_end: Option<f64>,
    pub time_step: f64,
}

impl StarConfig {
    pub fn resolve(self) -> Result<Star, CliError> {
        let m = self.m.unwrap_or(3);
        if m < 2 {
            return Err(CliError::Config(format!("key `m`: need at least 2 arms, got {m}")));
        }
        let input = self.input.unwrap_or(50);
        Ok(Star {
            m,
            input,
            arm: self.arm.unwrap_or(50),
            coupling: 1.0 / (m as f64).sqrt(),
            packet: self.packet.resolve(0.3, (input / 2) as f64),
            t_end: self.t_end,
            time_step: self.time_step.unwrap_or(blochnet::observe::TIME_STEP),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YConfig {
    pub experiment: Option<String>,
    pub input: Option<usize>,
    pub arm_b: Option<usize>,
    pub arm_c: Option<usize>,
    #[serde(default)]
    pub packet: PacketConfig,
    pub t_nb: Option<Grid>,
    pub t_nc: Option<Grid>,
    /// Detection time (ybeam) or end of the time window (entangler).
    pub tau: Option<f64>,
    pub time_step: Option<f64>,
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct YScan {
    pub input: usize,
    pub arm_b: usize,
    pub arm_c: usize,
    pub packet: Packet,
    pub t_nb: Grid,
    pub t_nc: Grid,
    /// `None` means the ballistic default for the experiment.
    pub tau: Option<f64>,
    pub time_step: f64,
    pub gnuplot: bool,
}

impl YConfig {
    pub fn resolve(self) -> YScan {
        let input = self.input.unwrap_or(50);
        YScan {
            input,
            arm_b: self.arm_b.unwrap_or(50),
            arm_c: self.arm_c.unwrap_or(50),
            packet: self.packet.resolve(0.3, (input / 2) as f64),
            t_nb: self.t_nb.unwrap_or(Grid::new(0.0, 2.0, 21)),
            t_nc: self.t_nc.unwrap_or(Grid::new(0.0, 2.0, 21)),
            tau: self.tau,
            time_step: self.time_step.unwrap_or(blochnet::observe::TIME_STEP),
            gnuplot: self.gnuplot.unwrap_or(false),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerConfig {
    pub experiment: Option<String>,
    pub input: Option<usize>,
    pub arm: Option<usize>,
    pub output: Option<usize>,
    pub coupling: Option<f64>,
    pub delta_min: Option<i64>,
    pub delta_max: Option<i64>,
    pub r0: Option<usize>,
    pub tau0: Option<f64>,
    #[serde(default)]
    pub packet: PacketConfig,
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct Interferometer {
    pub input: usize,
    pub arm: usize,
    pub output: usize,
    pub coupling: f64,
    pub delta_min: i64,
    pub delta_max: i64,
    pub r0: usize,
    pub tau0: f64,
    pub packet: Packet,
    pub gnuplot: bool,
}

impl InterferometerConfig {
    pub fn resolve(self) -> Result<Interferometer, CliError> {
        let input = self.input.unwrap_or(50);
        let output = self.output.unwrap_or(50);
        let (delta_min, delta_max) = (self.delta_min.unwrap_or(-25), self.delta_max.unwrap_or(25));
        if delta_max < delta_min {
            return Err(CliError::Config(format!(
                "key `delta_max`: {delta_max} is below delta_min {delta_min}"
            )));
        }
        Ok(Interferometer {
            input,
            arm: self.arm.unwrap_or(50),
            output,
            coupling: self.coupling.unwrap_or(FRAC_1_SQRT_2),
            delta_min,
            delta_max,
            r0: self.r0.unwrap_or(output),
            tau0: self.tau0.unwrap_or(100.0),
            packet: self.packet.resolve(0.3, (input / 2) as f64),
            gnuplot: self.gnuplot.unwrap_or(false),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QringConfig {
    pub experiment: Option<String>,
    /// Network description file; replaces the built-in ring when given.
    pub network: Option<PathBuf>,
    pub input: Option<usize>,
    pub arm: Option<usize>,
    pub t_nb: Option<f64>,
    pub t_nc: Option<f64>,
    pub phi: Option<f64>,
    pub input_chain: Option<String>,
    #[serde(default)]
    pub packet: PacketConfig,
    pub t_end: Option<f64>,
    pub time_step: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Qring {
    pub network: Option<PathBuf>,
    pub input: usize,
    pub arm: usize,
    pub t_nb: f64,
    pub t_nc: f64,
    pub phi: f64,
    pub input_chain: String,
    pub packet: Packet,
    pub t_end: f64,
    pub time_step: f64,
}

impl QringConfig {
    pub fn resolve(self, config_path: &Path) -> Result<Qring, CliError> {
        let network = self
            .network
            .map(|p| existing_file(config_path, &p, "network"))
            .transpose()?;
        let input = self.input.unwrap_or(50);
        Ok(Qring {
            network,
            input,
            arm: self.arm.unwrap_or(50),
            t_nb: self.t_nb.unwrap_or(FRAC_1_SQRT_2),
            t_nc: self.t_nc.unwrap_or(FRAC_1_SQRT_2),
            phi: self.phi.unwrap_or(0.25),
            input_chain: self.input_chain.unwrap_or_else(|| "A".into()),
            packet: self.packet.resolve(0.3, (input / 2) as f64),
            t_end: self.t_end.unwrap_or(100.0),
            time_step: self.time_step.unwrap_or(blochnet::observe::TIME_STEP),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmConfig {
    pub experiment: Option<String>,
    pub sites: Option<usize>,
    /// Film angles in radians.
    pub phi: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct Film {
    pub sites: usize,
    pub phi: Vec<f64>,
    pub alpha: f64,
    pub gnuplot: bool,
    /// Detection instant, filled in by the run.
    pub tau: Option<f64>,
}

impl FilmConfig {
    pub fn resolve(self) -> Result<Film, CliError> {
        let phi = self
            .phi
            .unwrap_or_else(|| (0..=8).map(|i| i as f64 * PI / 8.0).collect());
        non_empty(&phi, "phi")?;
        Ok(Film {
            sites: self.sites.unwrap_or(200),
            phi,
            alpha: self.alpha.unwrap_or(0.1),
            gnuplot: self.gnuplot.unwrap_or(false),
            tau: None,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbConfig {
    pub experiment: Option<String>,
    pub input: Option<usize>,
    pub arm: Option<usize>,
    pub output: Option<usize>,
    pub coupling: Option<f64>,
    pub n0: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    /// Path lengths from the input site to the detectors.
    pub path: Option<Vec<usize>>,
    pub phi: Option<Grid>,
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct Ab {
    pub input: usize,
    pub arm: usize,
    pub output: usize,
    pub coupling: f64,
    pub n0: f64,
    pub alpha: Vec<f64>,
    pub path: Vec<usize>,
    pub phi: Grid,
    pub gnuplot: bool,
}

impl AbConfig {
    pub fn resolve(self) -> Result<Ab, CliError> {
        let alpha = self.alpha.unwrap_or_else(|| vec![0.1, 0.3]);
        non_empty(&alpha, "alpha")?;
        let path = self.path.unwrap_or_else(|| vec![200, 400]);
        if path.is_empty() {
            return Err(CliError::Config("key `path`: list must be non-empty".into()));
        }
        Ok(Ab {
            input: self.input.unwrap_or(100),
            arm: self.arm.unwrap_or(50),
            output: self.output.unwrap_or(400),
            coupling: self.coupling.unwrap_or(FRAC_1_SQRT_2),
            n0: self.n0.unwrap_or(50.0),
            alpha,
            path,
            phi: self.phi.unwrap_or(Grid::new(-2.0, 2.0, 81)),
            gnuplot: self.gnuplot.unwrap_or(false),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Option<String>,
    /// Network description file (required).
    pub network: PathBuf,
    /// Index of the `[flux]` section whose flux is swept.
    pub flux: Option<usize>,
    pub input_chain: String,
    pub detector: String,
    #[serde(default)]
    pub packet: PacketConfig,
    pub phi: Option<Grid>,
    pub window: Option<f64>,
    pub gnuplot: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub network: PathBuf,
    pub flux: usize,
    pub input_chain: String,
    pub detector: String,
    pub packet: Packet,
    pub phi: Grid,
    /// `None` means the shortest admissible window for the detector.
    pub window: Option<f64>,
    pub gnuplot: bool,
}

impl SweepConfig {
    pub fn resolve(self, config_path: &Path) -> Result<Sweep, CliError> {
        let network = existing_file(config_path, &self.network, "network")?;
        if self.packet.n0.is_none() {
            return Err(CliError::Config("key `packet.n0` is required for sweep".into()));
        }
        Ok(Sweep {
            network,
            flux: self.flux.unwrap_or(0),
            input_chain: self.input_chain,
            detector: self.detector,
            packet: self.packet.resolve(0.1, 0.0),
            phi: self.phi.unwrap_or(Grid::new(-2.0, 2.0, 81)),
            window: self.window,
            gnuplot: self.gnuplot.unwrap_or(false),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceConfig {
    pub experiment: Option<String>,
    /// Scheme name as printed by the report, e.g. `q-quarter-flux`.
    pub scheme: String,
    /// Network description file; defaults to the scheme's matched network.
    pub network: Option<PathBuf>,
    pub m: Option<usize>,
    pub n: Option<i64>,
    pub theta: Option<f64>,
    pub phi_total: Option<f64>,
    pub input: Option<usize>,
    pub arm: Option<usize>,
    pub output: Option<usize>,
    pub sites: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Reduce {
    pub scheme: String,
    pub network: Option<PathBuf>,
    pub m: usize,
    pub n: i64,
    pub theta: f64,
    pub phi_total: f64,
    pub input: usize,
    pub arm: usize,
    pub output: usize,
    pub sites: usize,
}

impl ReduceConfig {
    pub fn resolve(self, config_path: &Path) -> Result<Reduce, CliError> {
        let network = self
            .network
            .map(|p| existing_file(config_path, &p, "network"))
            .transpose()?;
        Ok(Reduce {
            scheme: self.scheme,
            network,
            m: self.m.unwrap_or(2),
            n: self.n.unwrap_or(0),
            theta: self.theta.unwrap_or(std::f64::consts::FRAC_PI_4),
            phi_total: self.phi_total.unwrap_or(0.0),
            input: self.input.unwrap_or(3),
            arm: self.arm.unwrap_or(4),
            output: self.output.unwrap_or(3),
            sites: self.sites.unwrap_or(4),
        })
    }
}

impl Reduce {
    pub fn scheme(&self) -> Result<blochnet::ReductionScheme, CliError> {
        use blochnet::ReductionScheme as S;
        let (input, arm, output) = (self.input, self.arm, self.output);
        Ok(match self.scheme.as_str() {
            "star" => S::Star { m: self.m, input, arm },
            "y" => S::Y { theta: self.theta, input, arm },
            "q-half-flux" => S::QHalfFlux { n: self.n, input, arm },
            "q-quarter-flux" => S::QQuarterFlux { n: self.n, theta: self.theta, input, arm },
            "q-film" => S::QFilm { phi_total: self.phi_total, input, arm },
            "film" => S::Film { phi_total: self.phi_total, sites: self.sites },
            "iferom-half" => S::IferomHalf { theta: self.theta, input, arm, output },
            "iferom-int" => S::IferomInt { theta: self.theta, input, arm, output },
            "iferom-equal" => S::IferomEqual { phi_total: self.phi_total, input, arm, output },
            "y-complex" => S::YComplex { phi_total: self.phi_total, input, arm },
            other => {
                return Err(CliError::Config(format!(
                    "key `scheme`: unknown scheme `{other}` (expected star, y, q-half-flux, q-quarter-flux, q-film, film, iferom-half, iferom-int, iferom-equal or y-complex)"
                )))
            }
        })
    }
}

tagged!(StarConfig, YConfig, InterferometerConfig, QringConfig, FilmConfig, AbConfig, SweepConfig, ReduceConfig);
