//! Monte-Carlo experiment runner: trials, arms, sweeps and CSV output.
//!
//! Every trial draws its blockage state, channels and the random RIS
//! phases from a substream keyed by `(seed, scenario, sweep index, trial)`,
//! so all arms at one sweep point see the same realization and results do
//! not depend on thread count.

mod config;

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ArrayShape, Preset, ScenarioSettings, SimConfig, SnrReference, SystemConfig};

use crate::channel::{synthesize_channels, FreqChannelSet};
use crate::flops::{report, FlopMeter, FlopReport};
use crate::pga::{pga_optimize, PgaConfig};
use crate::power::allocate;
use crate::propagation::{link_distances, sample_blockage, GeometryConfig, LinkGains};
use crate::rate::{equivalent_channel_folded, spectral_efficiency, RisPhases};
use crate::rng::{labels, StreamKey};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// SE against SNR for several RIS sizes.
    SeVsSnr,
    /// SE against a forced LOS probability.
    PlosVsSe,
    /// SE against BS-UE distance.
    DistanceVsSe,
    /// Iterations, FLOPs and runtime of the optimizer against RIS size.
    ComplexityTable,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::SeVsSnr, Scenario::PlosVsSe, Scenario::DistanceVsSe, Scenario::ComplexityTable];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::SeVsSnr => "se_vs_snr",
            Scenario::PlosVsSe => "plos_vs_se",
            Scenario::DistanceVsSe => "distance_vs_se",
            Scenario::ComplexityTable => "complexity_table",
        }
    }

    fn label(self) -> u64 {
        match self {
            Scenario::SeVsSnr => 1,
            Scenario::PlosVsSe => 2,
            Scenario::DistanceVsSe => 3,
            Scenario::ComplexityTable => 4,
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.id() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// RIS configuration strategy compared at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    /// Gradient-optimized phases with waterfilling.
    Pga,
    /// The random initial phases with waterfilling.
    RandomPhases,
    /// Direct link only, waterfilling.
    NoRis,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Pga, Arm::RandomPhases, Arm::NoRis];

    pub fn id(self) -> &'static str {
        match self {
            Arm::Pga => "pga",
            Arm::RandomPhases => "random_phases",
            Arm::NoRis => "no_ris",
        }
    }
}

/// One row of a scenario CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub sweep_name: String,
    pub sweep_value: f64,
    pub arm: String,
    pub mean_se: f64,
    pub stderr_se: f64,
    pub trials: usize,
    pub seed: u64,
    pub n_ris: usize,
    pub snr_db: f64,
    /// Horizontal BS-UE distance D.
    pub d_bs_ue_m: f64,
    /// RIS-UE distance.
    pub d2_m: f64,
    pub p_los: f64,
    pub mean_iterations: f64,
}

/// Everything fixed at one sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub sweep_name: &'static str,
    pub sweep_value: f64,
    /// Index that keys the random substreams; shared by all series at
    /// the same x position.
    pub sweep_index: u64,
    pub ris: ArrayShape,
    pub snr_db: f64,
    pub geometry: GeometryConfig,
}

/// A realization shared by every arm.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub channels: FreqChannelSet,
    pub gains: LinkGains,
    pub initial_phases: RisPhases,
}

/// Outcome of one arm on one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmOutcome {
    pub se: f64,
    pub iterations: usize,
}

pub fn trial_key(seed: u64, scenario: Scenario, sweep_index: u64, trial: u64) -> StreamKey {
    StreamKey::root(seed).path(&[scenario.label(), sweep_index, trial])
}

pub fn draw_trial(cfg: &SimConfig, point: &SweepPoint, key: StreamKey) -> Result<TrialDraw> {
    let los = sample_blockage(point.geometry.los_probability(), &mut key.child(labels::BLOCKAGE).rng());
    let model = cfg.channel_model(point.ris)?;
    let channels = synthesize_channels(&model, los, key.child(labels::LINK))?;
    let gains = LinkGains::for_state(&point.geometry, los);
    let initial_phases = RisPhases::random(point.ris.count(), &mut key.child(labels::PHASES).rng());
    Ok(TrialDraw { channels, gains, initial_phases })
}

pub fn pga_config(cfg: &SimConfig, point: &SweepPoint) -> PgaConfig {
    let s = &cfg.system;
    let mut pc = PgaConfig::new(cfg.total_power(point.snr_db, &point.geometry), cfg.streams());
    pc.learning_rate = s.learning_rate;
    pc.epsilon = s.epsilon;
    pc.max_iterations = s.max_iterations;
    pc.noise_variance = s.noise_variance;
    pc
}

/// A channel with no usable eigenmode carries zero rate.
fn zero_if_dead(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::NoActiveStream) => Ok(0.0),
        other => other,
    }
}

pub fn evaluate_arm(draw: &TrialDraw, arm: Arm, pc: &PgaConfig, meter: &mut FlopMeter) -> Result<ArmOutcome> {
    let rho_i = if arm == Arm::NoRis { 0.0 } else { draw.gains.rho_indirect };
    let folded = draw.channels.clone().fold_gains(draw.gains.rho_direct, rho_i);
    match arm {
        Arm::Pga => match pga_optimize(&folded, pc, draw.initial_phases.clone(), meter) {
            Ok(out) => Ok(ArmOutcome { se: out.rate, iterations: out.iterations }),
            Err(Error::NoActiveStream) => Ok(ArmOutcome { se: 0.0, iterations: 0 }),
            Err(e) => Err(e),
        },
        Arm::RandomPhases | Arm::NoRis => {
            let eq = equivalent_channel_folded(&folded, &draw.initial_phases)?;
            let se = zero_if_dead(
                allocate(&eq, pc.noise_variance, pc.total_power, pc.streams)
                    .and_then(|alloc| spectral_efficiency(&eq, &alloc.q, pc.noise_variance)),
            )?;
            Ok(ArmOutcome { se, iterations: 0 })
        }
    }
}

/// Spectral efficiency of one arm on one trial.
pub fn run_trial(cfg: &SimConfig, point: &SweepPoint, arm: Arm, key: StreamKey) -> Result<f64> {
    let draw = draw_trial(cfg, point, key)?;
    Ok(evaluate_arm(&draw, arm, &pga_config(cfg, point), &mut FlopMeter::new())?.se)
}

/// Per-trial outcomes of all arms at one point, in trial order.
pub fn run_point(cfg: &SimConfig, scenario: Scenario, point: &SweepPoint, trials: usize) -> Result<Vec<[ArmOutcome; 3]>> {
    let pc = pga_config(cfg, point);
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let draw = draw_trial(cfg, point, trial_key(cfg.system.seed, scenario, point.sweep_index, t))?;
            let mut meter = FlopMeter::new();
            let mut out = [ArmOutcome { se: 0.0, iterations: 0 }; 3];
            for (slot, arm) in out.iter_mut().zip(Arm::ALL) {
                *slot = evaluate_arm(&draw, arm, &pc, &mut meter)?;
            }
            Ok(out)
        })
        .collect()
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn with_geometry(base: &GeometryConfig, distance: f64, bs_height: f64, ris_offset: f64) -> GeometryConfig {
    GeometryConfig { distance, bs_height, ris_offset, ..base.clone() }
}

/// Sweep points of an SE scenario, series-major.
pub fn sweep_points(cfg: &SimConfig, scenario: Scenario) -> Vec<SweepPoint> {
    let sc = &cfg.system.scenarios;
    let base = &cfg.geometry;
    let mut points = Vec::new();
    match scenario {
        Scenario::SeVsSnr => {
            let geometry = with_geometry(base, base.distance, sc.se_bs_height, sc.se_ris_offset);
            for &ris in &sc.se_ris_arrays {
                for (i, &snr) in cfg.system.snr_db.iter().enumerate() {
                    points.push(SweepPoint {
                        sweep_name: "snr_db",
                        sweep_value: snr,
                        sweep_index: i as u64,
                        ris,
                        snr_db: snr,
                        geometry: geometry.clone(),
                    });
                }
            }
        }
        Scenario::PlosVsSe => {
            let geometry = with_geometry(base, sc.plos_distance, sc.plos_bs_height, sc.plos_ris_offset);
            for &snr in &sc.plos_snr_db {
                for (i, &p) in sc.plos_grid.iter().enumerate() {
                    points.push(SweepPoint {
                        sweep_name: "p_los",
                        sweep_value: p,
                        sweep_index: i as u64,
                        ris: cfg.system.ris_array,
                        snr_db: snr,
                        geometry: GeometryConfig { p_los_override: Some(p), ..geometry.clone() },
                    });
                }
            }
        }
        Scenario::DistanceVsSe => {
            for (i, &d) in sc.distance_grid.iter().enumerate() {
                points.push(SweepPoint {
                    sweep_name: "distance_m",
                    sweep_value: d,
                    sweep_index: i as u64,
                    ris: cfg.system.ris_array,
                    snr_db: sc.distance_snr_db,
                    geometry: with_geometry(base, d, sc.distance_bs_height, sc.distance_ris_offset),
                });
            }
        }
        Scenario::ComplexityTable => {
            let geometry = with_geometry(base, base.distance, sc.se_bs_height, sc.se_ris_offset);
            for &n in &sc.complexity_n_ris {
                points.push(SweepPoint {
                    sweep_name: "n_ris",
                    sweep_value: n as f64,
                    sweep_index: 0,
                    ris: ArrayShape::near_square(n),
                    snr_db: sc.complexity_snr_db,
                    geometry: geometry.clone(),
                });
            }
        }
    }
    points
}

/// Mean SE (with standard error) for every sweep point and arm.
pub fn run_scenario(cfg: &SimConfig, scenario: Scenario) -> Result<Vec<ScenarioResult>> {
    cfg.validate()?;
    let trials = match scenario {
        Scenario::ComplexityTable => cfg.system.scenarios.complexity_trials,
        _ => cfg.system.trials,
    };
    let mut rows = Vec::new();
    for point in sweep_points(cfg, scenario) {
        let outcomes = run_point(cfg, scenario, &point, trials)?;
        for (a, arm) in Arm::ALL.into_iter().enumerate() {
            let se: Vec<f64> = outcomes.iter().map(|o| o[a].se).collect();
            let iters = outcomes.iter().map(|o| o[a].iterations as f64).sum::<f64>() / trials as f64;
            let (mean_se, stderr_se) = mean_stderr(&se);
            rows.push(ScenarioResult {
                scenario: scenario.id().to_string(),
                sweep_name: point.sweep_name.to_string(),
                sweep_value: point.sweep_value,
                arm: arm.id().to_string(),
                mean_se,
                stderr_se,
                trials,
                seed: cfg.system.seed,
                n_ris: point.ris.count(),
                snr_db: point.snr_db,
                d_bs_ue_m: point.geometry.distance,
                d2_m: link_distances(&point.geometry).ris_ue,
                p_los: point.geometry.los_probability(),
                mean_iterations: iters,
            });
        }
    }
    Ok(rows)
}

/// Optimizer cost per RIS size, averaged over `complexity_trials` trials.
pub fn run_complexity(cfg: &SimConfig) -> Result<Vec<FlopReport>> {
    cfg.validate()?;
    let trials = cfg.system.scenarios.complexity_trials;
    sweep_points(cfg, Scenario::ComplexityTable)
        .iter()
        .map(|point| {
            let pc = pga_config(cfg, point);
            let runs = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let key = trial_key(cfg.system.seed, Scenario::ComplexityTable, point.sweep_index, t);
                    let draw = draw_trial(cfg, point, key)?;
                    let mut meter = FlopMeter::new();
                    evaluate_arm(&draw, Arm::Pga, &pc, &mut meter)?;
                    Ok(report(&meter, point.ris.count()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(FlopReport::mean(point.ris.count(), &runs))
        })
        .collect()
}

pub fn write_results<W: Write>(out: W, rows: &[ScenarioResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
