//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments, lists are comma separated and an
//! unknown key is an error. Command-line flags go through [`ExperimentConfig::set`]
//! so a flag and a config line behave identically.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use netweave_core::model::{CommRange, NetworkSpec, Region};
use netweave_core::power::dbm_to_mw;
use netweave_core::{IoTNTopOptions, PowerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algorithm {
    IoTNTop,
    BruteForce,
    Lmst,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::IoTNTop => "iotntop",
            Algorithm::BruteForce => "bruteforce",
            Algorithm::Lmst => "lmst",
        }
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iotntop" => Ok(Algorithm::IoTNTop),
            "bruteforce" => Ok(Algorithm::BruteForce),
            "lmst" => Ok(Algorithm::Lmst),
            _ => bail!("unknown algorithm `{s}` (expected iotntop, bruteforce or lmst)"),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which coordinates the topology algorithms see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frames {
    Truth,
    Estimated,
}

impl Frames {
    pub fn name(self) -> &'static str {
        match self {
            Frames::Truth => "truth",
            Frames::Estimated => "estimated",
        }
    }
}

impl FromStr for Frames {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truth" => Ok(Frames::Truth),
            "estimated" => Ok(Frames::Estimated),
            _ => bail!("unknown frames `{s}` (expected truth or estimated)"),
        }
    }
}

/// Power levels searched by brute force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteLevels {
    /// Levels where some link first becomes feasible.
    Candidate,
    /// This many evenly spaced levels per node.
    Uniform(usize),
}

impl FromStr for BruteLevels {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "candidate" {
            return Ok(BruteLevels::Candidate);
        }
        let n: usize = s
            .parse()
            .map_err(|_| anyhow!("brute force levels must be `candidate` or a count, got `{s}`"))?;
        if n == 0 {
            bail!("brute force level count must be positive");
        }
        Ok(BruteLevels::Uniform(n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub nodes: Vec<usize>,
    pub gateways: usize,
    /// Side of the square deployment area, meters.
    pub area_m: f64,
    /// `(inner, outer)` radii; replaces the square when set.
    pub annulus: Option<(f64, f64)>,
    pub degree_min: f64,
    pub degree_max: f64,
    /// Fixed end-node range; overrides the degree band.
    pub comm_range_m: Option<f64>,
    pub gateway_range_m: Option<f64>,
    pub etas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub power: PowerConfig,
    /// Unset means derived from `rho_rmin_dbm` and `noise_dbm`.
    pub zeta: Option<f64>,
    /// Unset means `rho_rmin_dbm`.
    pub p_tmin_dbm: Option<f64>,
    pub iotntop: IoTNTopOptions,
    pub algorithms: Vec<Algorithm>,
    pub frames: Frames,
    pub out: PathBuf,
    pub brute_force_budget: u64,
    pub brute_force_levels: BruteLevels,
    /// Bin width for received-power axes, dB.
    pub received_bin_db: f64,
    /// Bin width for transmit-power axes, dB.
    pub power_bin_db: f64,
    pub initial_energy_mj: f64,
    /// Transmission time charged per node, seconds.
    pub frame_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            nodes: vec![100],
            gateways: 6,
            area_m: 4000.0,
            annulus: None,
            degree_min: 14.0,
            degree_max: 20.0,
            comm_range_m: None,
            gateway_range_m: None,
            etas: vec![0.0],
            seeds: vec![42],
            power: PowerConfig::default(),
            zeta: None,
            p_tmin_dbm: None,
            iotntop: IoTNTopOptions::default(),
            algorithms: vec![Algorithm::IoTNTop],
            frames: Frames::Estimated,
            out: PathBuf::from("out"),
            brute_force_budget: 1_000_000,
            brute_force_levels: BruteLevels::Candidate,
            received_bin_db: 5.0,
            power_bin_db: 5.0,
            initial_energy_mj: 1000.0,
            frame_s: 1.0,
        }
    }
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("`{s}`: {e}")))
        .collect()
}

fn one<T: FromStr>(value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| anyhow!("`{value}`: {e}"))
}

fn optional(value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => one(v).map(Some),
    }
}

fn boolean(value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => bail!("`{v}` is not a boolean"),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", no + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", no + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.apply(key, value).with_context(|| format!("setting `{key}`"))
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.power;
        let t = &mut self.iotntop;
        match key {
            "scenario" => self.scenario = value.to_string(),
            "nodes" => self.nodes = list(value)?,
            "gateways" => self.gateways = one(value)?,
            "area_m" => self.area_m = one(value)?,
            "annulus" => {
                self.annulus = match list::<f64>(value)?.as_slice() {
                    [] => None,
                    &[inner, outer] => Some((inner, outer)),
                    _ => bail!("annulus takes `inner, outer`"),
                }
            }
            "degree_min" => self.degree_min = one(value)?,
            "degree_max" => self.degree_max = one(value)?,
            "comm_range_m" => self.comm_range_m = optional(value)?,
            "gateway_range_m" => self.gateway_range_m = optional(value)?,
            "etas" | "eta" => self.etas = list(value)?,
            "seeds" | "seed" => self.seeds = list(value)?,
            "nu" => p.nu = one(value)?,
            "kappa1" => p.kappa1 = one(value)?,
            "kappa2" => p.kappa2 = one(value)?,
            "rho_tmax_dbm" => p.rho_tmax_dbm = one(value)?,
            "rho_rmin_dbm" => p.rho_rmin_dbm = one(value)?,
            "noise_dbm" => p.noise_dbm = one(value)?,
            "zeta" => self.zeta = optional(value)?,
            "beta" => p.beta = one(value)?,
            "gamma_db" => p.gamma_db = one(value)?,
            "p_tmin_dbm" => self.p_tmin_dbm = optional(value)?,
            "r_max_m" => p.r_max_m = optional(value)?.unwrap_or(f64::INFINITY),
            "gain" => p.gain = one(value)?,
            "step_db" => t.step_db = one(value)?,
            "epsilon" => t.epsilon = one(value)?,
            "code_rate" => t.code_rate = one(value)?,
            "proxy_c" => t.proxy_c = one(value)?,
            "max_rounds" => t.max_rounds = one(value)?,
            "reextract" => t.reextract = boolean(value)?,
            "augment_fraction" => t.augment_fraction = one(value)?,
            "algorithms" | "algo" => self.algorithms = list(value)?,
            "frames" => self.frames = one(value)?,
            "out" => self.out = PathBuf::from(value),
            "brute_force_budget" => self.brute_force_budget = one(value)?,
            "brute_force_levels" => self.brute_force_levels = one(value)?,
            "received_bin_db" => self.received_bin_db = one(value)?,
            "power_bin_db" => self.power_bin_db = one(value)?,
            "initial_energy_mj" => self.initial_energy_mj = one(value)?,
            "frame_s" => self.frame_s = one(value)?,
            _ => bail!("unknown key"),
        }
        Ok(())
    }

    /// Power model with derived defaults filled in.
    pub fn power_config(&self) -> PowerConfig {
        PowerConfig {
            zeta: self
                .zeta
                .unwrap_or_else(|| dbm_to_mw(self.power.rho_rmin_dbm - self.power.noise_dbm)),
            p_tmin_dbm: self.p_tmin_dbm.unwrap_or(self.power.rho_rmin_dbm),
            ..self.power
        }
    }

    pub fn network_spec(&self, nodes: usize, seed: u64) -> NetworkSpec {
        NetworkSpec {
            num_end_nodes: nodes,
            num_gateways: self.gateways,
            region: match self.annulus {
                Some((inner, outer)) => Region::Annulus { inner, outer },
                None => Region::square(self.area_m),
            },
            comm_range: match self.comm_range_m {
                Some(r) => CommRange::Fixed(r),
                None => CommRange::MeanDegree {
                    min: self.degree_min,
                    max: self.degree_max,
                },
            },
            gateway_range: self.gateway_range_m,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seeds must be non-empty");
        }
        if self.nodes.is_empty() {
            bail!("nodes must be non-empty");
        }
        if self.etas.is_empty() {
            bail!("etas must be non-empty");
        }
        if self.algorithms.is_empty() {
            bail!("algorithms must be non-empty");
        }
        if let Some(eta) = self.etas.iter().find(|e| !(0.0..1.0).contains(*e)) {
            bail!("noise factor {eta} must lie in [0, 1)");
        }
        if self.scenario.is_empty() || self.scenario.contains(['/', '\\']) {
            bail!("scenario `{}` must be a plain directory name", self.scenario);
        }
        for (name, v) in [
            ("received_bin_db", self.received_bin_db),
            ("power_bin_db", self.power_bin_db),
            ("frame_s", self.frame_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive, got {v}");
            }
        }
        if !self.initial_energy_mj.is_finite() {
            bail!("initial_energy_mj must be finite");
        }
        for &n in &self.nodes {
            self.network_spec(n, 0).validate()?;
        }
        self.power_config().validate()?;
        self.iotntop.validate()?;
        Ok(())
    }

    /// Scenario output directory.
    pub fn scenario_dir(&self) -> PathBuf {
        self.out.join(&self.scenario)
    }
}
