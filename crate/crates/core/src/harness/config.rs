//! Simulation configuration: presets, `key = value` files and overrides.

use std::fs;
use std::path::Path;

use crate::channel::{ChannelModel, Scattering, UraSpec};
use crate::propagation::{direct_gain, GeometryConfig, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// How the SNR axis maps to transmit power (noise variance fixed).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrReference {
    /// SNR is the per-subcarrier received SNR of the direct path in LOS:
    /// `P_t = K 10^{snr/10} sigma^2 / rho_direct(LOS)`.
    DirectLos,
    /// `P_t = K 10^{snr/10} sigma^2`, no pathloss reference.
    Transmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Full system parameter table.
    Paper,
    /// Small arrays for quick runs and CI.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!("unknown preset `{other}` (expected paper or desk)"))),
        }
    }
}

/// Array size as rows x cols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayShape {
    pub rows: usize,
    pub cols: usize,
}

impl ArrayShape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        ArrayShape { rows, cols }
    }

    pub fn count(&self) -> usize {
        self.rows * self.cols
    }

    /// Most nearly square factorization of `n`.
    pub fn near_square(n: usize) -> Self {
        let mut rows = (n as f64).sqrt().floor() as usize;
        while rows > 1 && !n.is_multiple_of(rows) {
            rows -= 1;
        }
        let rows = rows.max(1);
        ArrayShape { rows, cols: n / rows }
    }

    pub fn ura(&self, spacing: f64) -> Result<UraSpec> {
        UraSpec::new(self.rows, self.cols, spacing)
    }
}

impl std::fmt::Display for ArrayShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

fn parse_shape(s: &str) -> std::result::Result<ArrayShape, String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let rows: usize = r.trim().parse().map_err(|_| format!("bad row count `{r}`"))?;
    let cols: usize = c.trim().parse().map_err(|_| format!("bad column count `{c}`"))?;
    if rows == 0 || cols == 0 {
        return Err(format!("array `{s}` has no elements"));
    }
    Ok(ArrayShape { rows, cols })
}

fn parse_num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse().map_err(|_| format!("invalid number `{}`", s.trim()))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_num)
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

/// Fixed settings of each experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSettings {
    pub se_bs_height: f64,
    pub se_ris_offset: f64,
    /// RIS sizes compared in the SNR sweep.
    pub se_ris_arrays: Vec<ArrayShape>,
    pub plos_distance: f64,
    pub plos_bs_height: f64,
    pub plos_ris_offset: f64,
    pub plos_grid: Vec<f64>,
    pub plos_snr_db: Vec<f64>,
    pub distance_bs_height: f64,
    pub distance_ris_offset: f64,
    pub distance_grid: Vec<f64>,
    pub distance_snr_db: f64,
    pub complexity_n_ris: Vec<usize>,
    pub complexity_snr_db: f64,
    pub complexity_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub bs_array: ArrayShape,
    pub ue_array: ArrayShape,
    pub ris_array: ArrayShape,
    /// Element pitch of every array in wavelengths.
    pub element_spacing: f64,
    /// Stream count; `None` means `min(N_t, N_r)`.
    pub streams: Option<usize>,
    pub subcarriers: usize,
    pub taps: [usize; 3],
    pub rician_factor: f64,
    pub snr_db: Vec<f64>,
    pub snr_reference: SnrReference,
    pub noise_variance: f64,
    pub ris_scattering: Scattering,
    pub direct_los_scattering: Scattering,
    pub direct_nlos_scattering: Scattering,
    pub angular_spread_deg: f64,
    pub trials: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub bandwidth_hz: f64,
    pub scenarios: ScenarioSettings,
}

/// System parameters plus geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub system: SystemConfig,
    pub geometry: GeometryConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::preset(Preset::Paper)
    }
}

impl SimConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut system = SystemConfig {
            bs_array: ArrayShape::new(8, 8),
            ue_array: ArrayShape::new(2, 2),
            ris_array: ArrayShape::new(8, 8),
            element_spacing: 0.5,
            streams: None,
            subcarriers: 24,
            taps: [3, 4, 5],
            rician_factor: 10.0,
            snr_db: vec![-5.0, 10.0],
            snr_reference: SnrReference::DirectLos,
            noise_variance: 1.0,
            ris_scattering: Scattering { clusters: 8, rays: 10 },
            direct_los_scattering: Scattering { clusters: 1, rays: 1 },
            direct_nlos_scattering: Scattering { clusters: 5, rays: 10 },
            angular_spread_deg: 10.0,
            trials: 500,
            seed: 1,
            learning_rate: 0.1,
            epsilon: 1e-3,
            max_iterations: 200,
            bandwidth_hz: 850e6,
            scenarios: ScenarioSettings {
                se_bs_height: 10.0,
                se_ris_offset: 2.2,
                se_ris_arrays: vec![ArrayShape::new(8, 8), ArrayShape::new(16, 16)],
                plos_distance: 200.0,
                plos_bs_height: 5.0,
                plos_ris_offset: 2.2,
                plos_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
                plos_snr_db: vec![-5.0, 10.0],
                distance_bs_height: 20.0,
                distance_ris_offset: 30.0,
                distance_grid: (0..=6).map(|i| 100.0 + 25.0 * i as f64).collect(),
                distance_snr_db: 5.0,
                complexity_n_ris: vec![4, 16, 36, 144, 196, 324, 400],
                complexity_snr_db: -5.0,
                complexity_trials: 5,
            },
        };
        if preset == Preset::Desk {
            system.bs_array = ArrayShape::new(4, 4);
            system.ue_array = ArrayShape::new(2, 2);
            system.ris_array = ArrayShape::new(4, 4);
            system.subcarriers = 8;
            system.trials = 50;
            system.snr_db = vec![-10.0, -5.0, 0.0, 5.0, 10.0];
            system.scenarios.se_ris_arrays = vec![ArrayShape::new(4, 4), ArrayShape::new(8, 8)];
            system.scenarios.complexity_n_ris = vec![4, 16, 36, 64];
        }
        SimConfig { system, geometry: GeometryConfig::default() }
    }

    /// Preset, then the optional config file, then `overrides` (`key=value`).
    pub fn load(preset: Preset, path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = SimConfig::preset(preset);
        if let Some(path) = path {
            let text = fs::read_to_string(path)?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        for (k, v) in overrides {
            cfg.set(k, v).map_err(|msg| Error::Config(format!("--{k}: {msg}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { path: origin.to_string(), line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            self.set(key.trim(), value.trim()).map_err(parse_err)?;
        }
        Ok(())
    }

    /// Set one configuration key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let s = &mut self.system;
        let sc = &mut s.scenarios;
        let g = &mut self.geometry;
        match key {
            "bs_array" => s.bs_array = parse_shape(value)?,
            "ue_array" => s.ue_array = parse_shape(value)?,
            "ris_array" => s.ris_array = parse_shape(value)?,
            "element_spacing" => s.element_spacing = parse_num(value)?,
            "streams" => {
                s.streams = match value {
                    "auto" => None,
                    v => Some(parse_num(v)?),
                }
            }
            "subcarriers" => s.subcarriers = parse_num(value)?,
            "taps" => {
                let t: Vec<usize> = parse_list(value)?;
                s.taps = t.try_into().map_err(|_| "taps needs three counts".to_string())?;
            }
            "rician_factor" => s.rician_factor = parse_num(value)?,
            "snr_db" => s.snr_db = parse_list(value)?,
            "snr_reference" => {
                s.snr_reference = match value {
                    "direct_los" => SnrReference::DirectLos,
                    "transmit" => SnrReference::Transmit,
                    v => return Err(format!("unknown SNR reference `{v}` (direct_los or transmit)")),
                }
            }
            "noise_variance" => s.noise_variance = parse_num(value)?,
            "ris_clusters" => s.ris_scattering.clusters = parse_num(value)?,
            "ris_rays" => s.ris_scattering.rays = parse_num(value)?,
            "los_clusters" => s.direct_los_scattering.clusters = parse_num(value)?,
            "los_rays" => s.direct_los_scattering.rays = parse_num(value)?,
            "nlos_clusters" => s.direct_nlos_scattering.clusters = parse_num(value)?,
            "nlos_rays" => s.direct_nlos_scattering.rays = parse_num(value)?,
            "angular_spread_deg" => s.angular_spread_deg = parse_num(value)?,
            "trials" => s.trials = parse_num(value)?,
            "seed" => s.seed = parse_num(value)?,
            "learning_rate" => s.learning_rate = parse_num(value)?,
            "epsilon" => s.epsilon = parse_num(value)?,
            "max_iterations" => s.max_iterations = parse_num(value)?,
            "bandwidth_mhz" => s.bandwidth_hz = parse_num::<f64>(value)? * 1e6,
            "se_bs_height_m" => sc.se_bs_height = parse_num(value)?,
            "se_ris_offset_m" => sc.se_ris_offset = parse_num(value)?,
            "se_ris_arrays" => {
                sc.se_ris_arrays = value.split(',').map(|v| parse_shape(v.trim())).collect::<std::result::Result<_, _>>()?
            }
            "plos_distance_m" => sc.plos_distance = parse_num(value)?,
            "plos_bs_height_m" => sc.plos_bs_height = parse_num(value)?,
            "plos_ris_offset_m" => sc.plos_ris_offset = parse_num(value)?,
            "plos_grid" => sc.plos_grid = parse_list(value)?,
            "plos_snr_db" => sc.plos_snr_db = parse_list(value)?,
            "distance_bs_height_m" => sc.distance_bs_height = parse_num(value)?,
            "distance_ris_offset_m" => sc.distance_ris_offset = parse_num(value)?,
            "distance_grid_m" => sc.distance_grid = parse_list(value)?,
            "distance_snr_db" => sc.distance_snr_db = parse_num(value)?,
            "complexity_n_ris" => sc.complexity_n_ris = parse_list(value)?,
            "complexity_snr_db" => sc.complexity_snr_db = parse_num(value)?,
            "complexity_trials" => sc.complexity_trials = parse_num(value)?,
            "distance_m" => g.distance = parse_num(value)?,
            "bs_height_m" => g.bs_height = parse_num(value)?,
            "ue_height_m" => g.ue_height = parse_num(value)?,
            "ris_offset_m" => g.ris_offset = parse_num(value)?,
            "carrier_ghz" => g.wavelength = SPEED_OF_LIGHT / (parse_num::<f64>(value)? * 1e9),
            "antenna_gain_db" => {
                g.tx_gain = 10f64.powf(parse_num::<f64>(value)? / 10.0);
                g.rx_gain = 1.0;
            }
            "tx_gain_db" => g.tx_gain = 10f64.powf(parse_num::<f64>(value)? / 10.0),
            "rx_gain_db" => g.rx_gain = 10f64.powf(parse_num::<f64>(value)? / 10.0),
            "reference_distance_m" => g.reference_distance = parse_num(value)?,
            "los_exponent" => g.los_exponent = parse_num(value)?,
            "nlos_exponent" => g.nlos_exponent = parse_num(value)?,
            "p_los_override" => {
                g.p_los_override = match value {
                    "none" | "" => None,
                    v => Some(parse_num(v)?),
                }
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        let bad = |m: String| Err(Error::Config(m));
        let counts = [
            ("subcarriers", s.subcarriers),
            ("trials", s.trials),
            ("max_iterations", s.max_iterations),
            ("ris_clusters", s.ris_scattering.clusters),
            ("ris_rays", s.ris_scattering.rays),
            ("los_clusters", s.direct_los_scattering.clusters),
            ("los_rays", s.direct_los_scattering.rays),
            ("nlos_clusters", s.direct_nlos_scattering.clusters),
            ("nlos_rays", s.direct_nlos_scattering.rays),
            ("complexity_trials", s.scenarios.complexity_trials),
        ];
        for (name, v) in counts {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if let Some(&t) = s.taps.iter().find(|&&t| t == 0 || t > s.subcarriers) {
            return bad(format!("tap count {t} must lie in 1..={}", s.subcarriers));
        }
        if s.streams == Some(0) {
            return bad("streams must be at least 1".into());
        }
        if !(s.rician_factor >= 0.0) {
            return bad(format!("rician_factor must be nonnegative, got {}", s.rician_factor));
        }
        if !(s.element_spacing > 0.0) || !(s.noise_variance > 0.0) || !(s.angular_spread_deg >= 0.0) {
            return bad("element_spacing and noise_variance must be positive, angular_spread_deg nonnegative".into());
        }
        if !(s.learning_rate > 0.0) || !(s.epsilon > 0.0) {
            return bad("learning_rate and epsilon must be positive".into());
        }
        if s.scenarios.plos_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("plos_grid values must lie in [0, 1]".into());
        }
        if s.scenarios.complexity_n_ris.contains(&0) {
            return bad("complexity_n_ris entries must be positive".into());
        }
        self.geometry.validate()
    }

    pub fn streams(&self) -> usize {
        let s = &self.system;
        s.streams.unwrap_or_else(|| s.bs_array.count().min(s.ue_array.count()))
    }

    pub fn channel_model(&self, ris: ArrayShape) -> Result<ChannelModel> {
        let s = &self.system;
        Ok(ChannelModel {
            bs: s.bs_array.ura(s.element_spacing)?,
            ue: s.ue_array.ura(s.element_spacing)?,
            ris: ris.ura(s.element_spacing)?,
            taps: s.taps,
            rician_factor: s.rician_factor,
            angular_spread: s.angular_spread_deg.to_radians(),
            ris_scattering: s.ris_scattering,
            direct_los_scattering: s.direct_los_scattering,
            direct_nlos_scattering: s.direct_nlos_scattering,
            subcarriers: s.subcarriers,
        })
    }

    /// Total transmit power for an SNR point at the given geometry.
    pub fn total_power(&self, snr_db: f64, geometry: &GeometryConfig) -> f64 {
        let s = &self.system;
        let per_subcarrier = 10f64.powf(snr_db / 10.0) * s.noise_variance;
        let reference = match s.snr_reference {
            SnrReference::DirectLos => direct_gain(geometry, true),
            SnrReference::Transmit => 1.0,
        };
        s.subcarriers as f64 * per_subcarrier / reference
    }
}
