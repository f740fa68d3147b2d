//! Well-mixed parameter sweep: random rate levels, one Exo-SIR run per grid
//! point, and a regression of the scaled log endogenous peak on the rates.

use std::io::Write;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{integrate, Compartment, CompartmentState, ExoSir, ModelParams, OdeError};
use crate::ols::{fit_ols, OlsError, RegressionReport};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("grid needs at least 2 levels per rate, got {0}")]
    GridTooSmall(usize),
    #[error("invalid initial population: {0}")]
    InvalidInitial(String),
    #[error("endogenous peak of triple #{index} {params:?} not reached within {steps} steps")]
    Horizon {
        index: usize,
        params: ModelParams,
        steps: usize,
    },
    #[error("triple #{index} {params:?}: {source}")]
    Integration {
        index: usize,
        params: ModelParams,
        source: OdeError,
    },
    #[error("sample #{index} has non-positive peak {value}")]
    NonPositivePeak { index: usize, value: f64 },
    #[error("sample #{0} has no scaled log peak")]
    Unscaled(usize),
    #[error(transparent)]
    Regression(#[from] OlsError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Draws `k` independent uniform levels in (0, 1) for each rate and returns
/// their full Cartesian product, `beta_x` outermost and `gamma` innermost.
pub fn sample_grid(k: usize, seed: u64) -> Result<Vec<ModelParams>, SweepError> {
    if k < 2 {
        return Err(SweepError::GridTooSmall(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = || -> Vec<f64> { (0..k).map(|_| rng.sample(Open01)).collect() };
    let (bx, be, g) = (levels(), levels(), levels());
    let mut out = Vec::with_capacity(k * k * k);
    for &beta_x in &bx {
        for &beta_e in &be {
            for &gamma in &g {
                out.push(ModelParams {
                    beta_x,
                    beta_e,
                    gamma,
                });
            }
        }
    }
    Ok(out)
}

/// Initial head counts; normalised by `population` before integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCounts {
    pub population: f64,
    pub susceptible: f64,
    pub exogenous: f64,
    pub endogenous: f64,
    pub recovered: f64,
}

impl Default for InitialCounts {
    fn default() -> Self {
        Self {
            population: 1_000_000.0,
            susceptible: 999_996.0,
            exogenous: 3.0,
            endogenous: 1.0,
            recovered: 0.0,
        }
    }
}

impl InitialCounts {
    pub fn fractions(&self) -> Result<CompartmentState, SweepError> {
        if !(self.population.is_finite() && self.population > 0.0) {
            return Err(SweepError::InvalidInitial(format!("population {}", self.population)));
        }
        let n = self.population;
        CompartmentState::new(
            self.susceptible / n,
            self.endogenous / n,
            self.exogenous / n,
            self.recovered / n,
        )
        .map_err(|e| SweepError::InvalidInitial(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub initial: InitialCounts,
    pub dt: f64,
    /// Steps of the first attempt; doubled while `i_e` is still rising.
    pub horizon_steps: usize,
    pub max_doublings: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            initial: InitialCounts::default(),
            dt: 0.1,
            horizon_steps: 2000,
            max_doublings: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub beta_x: f64,
    pub beta_e: f64,
    pub gamma: f64,
    pub ie_peak_value: f64,
    pub ie_peak_tick: usize,
    pub log_peak_scaled: Option<f64>,
}

fn peak_run(
    index: usize,
    params: ModelParams,
    init: CompartmentState,
    config: &SweepConfig,
) -> Result<SweepSample, SweepError> {
    let mut steps = config.horizon_steps.max(1);
    for attempt in 0..=config.max_doublings {
        let traj = integrate(&ExoSir(params), init, config.dt, steps).map_err(|source| {
            SweepError::Integration {
                index,
                params,
                source,
            }
        })?;
        let ie = traj.series(Compartment::Endogenous);
        let rising = ie.len() >= 2 && ie[ie.len() - 1] > ie[ie.len() - 2];
        if !rising {
            let peak = traj.peak(Compartment::Endogenous);
            return Ok(SweepSample {
                beta_x: params.beta_x,
                beta_e: params.beta_e,
                gamma: params.gamma,
                ie_peak_value: peak.peak_value,
                ie_peak_tick: peak.peak_tick,
                log_peak_scaled: None,
            });
        }
        if attempt < config.max_doublings {
            steps *= 2;
        }
    }
    Err(SweepError::Horizon {
        index,
        params,
        steps,
    })
}

/// Integrates every triple and records its endogenous peak. Output order
/// follows `triples` regardless of scheduling.
pub fn run_sweep(triples: &[ModelParams], config: &SweepConfig) -> Result<Vec<SweepSample>, SweepError> {
    let init = config.initial.fractions()?;
    triples
        .par_iter()
        .enumerate()
        .map(|(index, &params)| peak_run(index, params, init, config))
        .collect()
}

/// Min-max scales `ln(ie_peak_value)` over the sample set into [0, 1]; a
/// degenerate range maps every sample to 0.
pub fn scale_log_peaks(samples: &mut [SweepSample]) -> Result<(), SweepError> {
    let mut logs = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        if !(s.ie_peak_value > 0.0) {
            return Err(SweepError::NonPositivePeak {
                index,
                value: s.ie_peak_value,
            });
        }
        logs.push(s.ie_peak_value.ln());
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for (s, l) in samples.iter_mut().zip(logs) {
        s.log_peak_scaled = Some(if range > 0.0 { (l - lo) / range } else { 0.0 });
    }
    Ok(())
}

/// Regresses the scaled log peak on `(beta_e, beta_x, gamma)`.
pub fn fit_log_peak(samples: &[SweepSample]) -> Result<RegressionReport, SweepError> {
    let response = samples
        .iter()
        .enumerate()
        .map(|(i, s)| s.log_peak_scaled.ok_or(SweepError::Unscaled(i)))
        .collect::<Result<Vec<f64>, _>>()?;
    fit_rates(samples, &response)
}

/// Regresses the endogenous peak tick on the rates.
pub fn fit_peak_tick(samples: &[SweepSample]) -> Result<RegressionReport, SweepError> {
    let response: Vec<f64> = samples.iter().map(|s| s.ie_peak_tick as f64).collect();
    fit_rates(samples, &response)
}

fn fit_rates(samples: &[SweepSample], response: &[f64]) -> Result<RegressionReport, SweepError> {
    let be: Vec<f64> = samples.iter().map(|s| s.beta_e).collect();
    let bx: Vec<f64> = samples.iter().map(|s| s.beta_x).collect();
    let g: Vec<f64> = samples.iter().map(|s| s.gamma).collect();
    Ok(fit_ols(&[("beta_e", &be), ("beta_x", &bx), ("gamma", &g)], response)?)
}

pub const SAMPLES_HEADER: [&str; 6] = [
    "beta_x",
    "beta_e",
    "gamma",
    "ie_peak_value",
    "ie_peak_tick",
    "log_peak_scaled",
];

pub fn write_samples_csv<W: Write>(out: W, samples: &[SweepSample]) -> Result<(), SweepError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SAMPLES_HEADER)?;
    for s in samples {
        w.write_record([
            s.beta_x.to_string(),
            s.beta_e.to_string(),
            s.gamma.to_string(),
            s.ie_peak_value.to_string(),
            s.ie_peak_tick.to_string(),
            s.log_peak_scaled.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
