//! Rate estimation from observed daily counts and the with/without
//! exogenous-infection counterfactual.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{DailyCounts, IngestError, ObservedSeries};
use crate::ode::{integrate, Compartment, CompartmentState, ExoSir, ModelParams, OdeError, PeakStats, Trajectory};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("cumulative {compartment} reaches {value} on day {day}, outside [0, 1]; population_n is probably too small")]
    Scale {
        day: usize,
        compartment: &'static str,
        value: f64,
    },
    #[error("need at least {needed} days, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("{parameter} cannot be identified: its regressor is zero on every day")]
    Unidentifiable { parameter: &'static str },
    #[error("i_e peak not reached within {days} days")]
    Horizon { days: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub const MIN_DAYS: usize = 3;

/// Daily increments and running totals as fractions of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    pub di_e: Vec<f64>,
    pub di_x: Vec<f64>,
    pub dr: Vec<f64>,
    pub s: Vec<f64>,
    pub i_e: Vec<f64>,
    pub i_x: Vec<f64>,
    pub r: Vec<f64>,
}

impl NormalizedSeries {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn infected(&self) -> Vec<f64> {
        self.i_e.iter().zip(&self.i_x).map(|(a, b)| a + b).collect()
    }

    /// Index of the first day with a cumulative endogenous case, or 0 when
    /// there is none.
    pub fn first_endogenous_day(&self) -> usize {
        self.i_e.iter().position(|&v| v > 0.0).unwrap_or(0)
    }

    /// Cumulative state at the end of day `k`.
    pub fn state_at(&self, k: usize) -> Result<CompartmentState, FitError> {
        Ok(CompartmentState::new(self.s[k], self.i_e[k], self.i_x[k], self.r[k])?)
    }
}

fn running_sum(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Divides counts by `population_n` and accumulates them. Confirmed cases
/// feed i_e, imported plus event-linked cases feed i_x, recovered plus
/// deceased feed r.
pub fn normalize(series: &ObservedSeries) -> Result<NormalizedSeries, FitError> {
    let n = series.population_n() as f64;
    let frac = |f: fn(&DailyCounts) -> u64| -> Vec<f64> { series.days().iter().map(|d| f(d) as f64 / n).collect() };
    let di_e = frac(|d| d.confirmed);
    let di_x = frac(|d| d.imported + d.event_linked);
    let dr = frac(|d| d.recovered + d.deceased);
    let i_e = running_sum(&di_e);
    let i_x = running_sum(&di_x);
    let r = running_sum(&dr);
    let s: Vec<f64> = (0..i_e.len()).map(|k| 1.0 - i_e[k] - i_x[k] - r[k]).collect();

    for (name, values) in [("i_e", &i_e), ("i_x", &i_x), ("r", &r), ("s", &s)] {
        if let Some((day, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(FitError::Scale {
                day,
                compartment: name,
                value,
            });
        }
    }
    Ok(NormalizedSeries {
        di_e,
        di_x,
        dr,
        s,
        i_e,
        i_x,
        r,
    })
}

/// Which state values a day's increment is regressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Average of the end-of-day values for the day and the day before, with
    /// the day before the series taken as fully susceptible. This is the
    /// trapezoid rule for the integral of the rate over the day.
    #[default]
    Midpoint,
    /// End-of-day values of the same day.
    EndOfDay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EstimateOptions {
    pub alignment: Alignment,
    /// Report beta_x = 0 (flagged) instead of failing when no exogenous case
    /// is ever observed.
    pub allow_absent_exogenous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateDiagnostic {
    pub parameter: &'static str,
    /// Through-origin slope before clamping.
    pub raw_estimate: f64,
    pub clamped: bool,
    /// Set when the rate was fixed rather than estimated.
    pub assumed: bool,
    pub residual_sum_squares: f64,
    pub n_days: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedParams {
    pub params: ModelParams,
    /// Starting state of the counterfactual runs: the cumulative state on
    /// the first day with an endogenous case. Without one, the run lacking
    /// exogenous infection would stay at i_e = 0.
    pub initial: CompartmentState,
    /// Series index of `initial`.
    pub initial_day: usize,
    pub diagnostics: Vec<RateDiagnostic>,
}

fn through_origin(parameter: &'static str, x: &[f64], y: &[f64]) -> Result<(f64, RateDiagnostic), FitError> {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(FitError::Unidentifiable { parameter });
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let raw = sxy / sxx;
    if !raw.is_finite() {
        return Err(FitError::NonFinite(parameter));
    }
    let rss = x.iter().zip(y).map(|(a, b)| (b - raw * a).powi(2)).sum();
    let estimate = raw.max(0.0);
    Ok((
        estimate,
        RateDiagnostic {
            parameter,
            raw_estimate: raw,
            clamped: raw < 0.0,
            assumed: false,
            residual_sum_squares: rss,
            n_days: x.len(),
        },
    ))
}

/// Estimates gamma, then beta_x and beta_e, each by a one-dimensional
/// least-squares fit through the origin of its own model equation.
pub fn estimate_params(norm: &NormalizedSeries, options: EstimateOptions) -> Result<FittedParams, FitError> {
    if norm.len() < MIN_DAYS {
        return Err(FitError::TooShort {
            needed: MIN_DAYS,
            got: norm.len(),
        });
    }
    let i = norm.infected();
    let si: Vec<f64> = norm.s.iter().zip(&i).map(|(a, b)| a * b).collect();
    let aligned = |v: &[f64], before: f64| -> Vec<f64> {
        match options.alignment {
            Alignment::EndOfDay => v.to_vec(),
            Alignment::Midpoint => (0..v.len())
                .map(|k| 0.5 * (v[k] + if k == 0 { before } else { v[k - 1] }))
                .collect(),
        }
    };
    let i_a = aligned(&i, 0.0);
    let ie_a = aligned(&norm.i_e, 0.0);
    let ix_a = aligned(&norm.i_x, 0.0);
    let s_a = aligned(&norm.s, 1.0);
    let si_a = aligned(&si, 0.0);

    let (gamma, gamma_diag) = through_origin("gamma", &i_a, &norm.dr)?;

    let (beta_x, beta_x_diag) = if norm.di_x.iter().all(|&v| v == 0.0) {
        if !options.allow_absent_exogenous {
            return Err(FitError::Unidentifiable { parameter: "beta_x" });
        }
        let diag = RateDiagnostic {
            parameter: "beta_x",
            raw_estimate: 0.0,
            clamped: false,
            assumed: true,
            residual_sum_squares: 0.0,
            n_days: norm.len(),
        };
        (0.0, diag)
    } else {
        let y: Vec<f64> = norm.di_x.iter().zip(&ix_a).map(|(d, v)| d + gamma * v).collect();
        through_origin("beta_x", &s_a, &y)?
    };

    let y: Vec<f64> = norm.di_e.iter().zip(&ie_a).map(|(d, v)| d + gamma * v).collect();
    let (beta_e, beta_e_diag) = through_origin("beta_e", &si_a, &y)?;

    Ok(FittedParams {
        params: ModelParams::new(beta_x, beta_e, gamma)?,
        initial: norm.state_at(norm.first_endogenous_day())?,
        initial_day: norm.first_endogenous_day(),
        diagnostics: vec![gamma_diag, beta_x_diag, beta_e_diag],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterfactualConfig {
    pub horizon_days: usize,
    pub max_horizon_days: usize,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self {
            horizon_days: 512,
            max_horizon_days: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakComparison {
    pub with_ix: PeakStats,
    pub without_ix: PeakStats,
    /// with_ix peak value over without_ix peak value.
    pub peak_value_ratio: f64,
    /// Days by which the with_ix peak comes earlier.
    pub peak_advance_days: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    pub comparison: PeakComparison,
    pub with_ix: Trajectory,
    pub without_ix: Trajectory,
}

/// Initial state and rates of the run without exogenous infection.
pub fn without_exogenous(fitted: &FittedParams) -> (CompartmentState, ModelParams) {
    (fitted.initial.fold_exogenous(), fitted.params.without_exogenous())
}

fn bracketed(peak: &PeakStats, len: usize) -> bool {
    peak.peak_tick + 1 < len
}

/// Integrates both scenarios at one-day steps over a common horizon,
/// doubling it until both i_e peaks fall strictly inside.
pub fn counterfactual(fitted: &FittedParams, config: &CounterfactualConfig) -> Result<Counterfactual, FitError> {
    let (init_b, params_b) = without_exogenous(fitted);
    let mut days = config.horizon_days.max(1);
    loop {
        let (a, b) = rayon::join(
            || integrate(&ExoSir(fitted.params), fitted.initial, 1.0, days),
            || integrate(&ExoSir(params_b), init_b, 1.0, days),
        );
        let (a, b) = (a?, b?);
        let peak_a = a.peak(Compartment::Endogenous);
        let peak_b = b.peak(Compartment::Endogenous);
        if bracketed(&peak_a, a.len()) && bracketed(&peak_b, b.len()) {
            let ratio = if peak_a.peak_value == peak_b.peak_value {
                1.0
            } else {
                peak_a.peak_value / peak_b.peak_value
            };
            if !ratio.is_finite() {
                return Err(FitError::NonFinite("peak value ratio"));
            }
            return Ok(Counterfactual {
                comparison: PeakComparison {
                    with_ix: peak_a,
                    without_ix: peak_b,
                    peak_value_ratio: ratio,
                    peak_advance_days: peak_b.peak_tick as i64 - peak_a.peak_tick as i64,
                },
                with_ix: a,
                without_ix: b,
            });
        }
        if days >= config.max_horizon_days {
            return Err(FitError::Horizon { days });
        }
        days = (days * 2).min(config.max_horizon_days);
    }
}

#[derive(Serialize)]
struct RatesJson {
    beta_x: f64,
    beta_e: f64,
    gamma: f64,
}

#[derive(Serialize)]
struct PeakJson {
    peak_value: f64,
    peak_tick: usize,
}

impl From<&PeakStats> for PeakJson {
    fn from(p: &PeakStats) -> Self {
        Self {
            peak_value: p.peak_value,
            peak_tick: p.peak_tick,
        }
    }
}

#[derive(Serialize)]
struct ComparisonJson<'a> {
    state: &'a str,
    fitted: RatesJson,
    with_ix: PeakJson,
    without_ix: PeakJson,
    peak_value_ratio: f64,
    peak_advance_days: i64,
    population_n: u64,
    initial_date: String,
    initial: CompartmentState,
    diagnostics: &'a [RateDiagnostic],
}

pub fn comparison_json(series: &ObservedSeries, fitted: &FittedParams, cmp: &PeakComparison) -> serde_json::Value {
    let json = ComparisonJson {
        state: series.state(),
        fitted: RatesJson {
            beta_x: fitted.params.beta_x,
            beta_e: fitted.params.beta_e,
            gamma: fitted.params.gamma,
        },
        with_ix: (&cmp.with_ix).into(),
        without_ix: (&cmp.without_ix).into(),
        peak_value_ratio: cmp.peak_value_ratio,
        peak_advance_days: cmp.peak_advance_days,
        population_n: series.population_n(),
        initial_date: series.date_at(fitted.initial_day).to_string(),
        initial: fitted.initial,
        diagnostics: &fitted.diagnostics,
    };
    serde_json::to_value(json).expect("comparison serialises")
}

pub const TRAJECTORY_HEADER: [&str; 3] = ["day", "i_e_with_ix", "i_e_without_ix"];

pub fn write_ie_trajectories<W: Write>(out: W, cf: &Counterfactual) -> Result<(), FitError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for (k, (a, b)) in cf.with_ix.states().iter().zip(cf.without_ix.states()).enumerate() {
        w.write_record([k.to_string(), a.i_e.to_string(), b.i_e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Simulates Exo-SIR at one-day steps from a fully susceptible population
/// on the day before `start` and exports rounded daily increments as counts
/// (i_e as confirmed, i_x as imported, r as recovered). Stops before the
/// first day on which an infected compartment shrinks, since such a day has
/// no count representation.
pub fn simulate_observed(
    params: ModelParams,
    state: &str,
    start: chrono::NaiveDate,
    max_days: usize,
    population_n: u64,
) -> Result<ObservedSeries, FitError> {
    let traj = integrate(&ExoSir(params), CompartmentState::fully_susceptible(), 1.0, max_days)?;
    let n = population_n as f64;
    let count = |delta: f64| (delta * n).round() as u64;
    let days: Vec<DailyCounts> = traj
        .states()
        .windows(2)
        .map(|w| (w[1].i_e - w[0].i_e, w[1].i_x - w[0].i_x, w[1].r - w[0].r))
        .take_while(|(de, dx, _)| *de >= 0.0 && *dx >= 0.0)
        .map(|(de, dx, dr)| DailyCounts {
            confirmed: count(de),
            recovered: count(dr),
            imported: count(dx),
            ..DailyCounts::default()
        })
        .collect();
    if days.len() < MIN_DAYS {
        return Err(FitError::TooShort {
            needed: MIN_DAYS,
            got: days.len(),
        });
    }
    Ok(ObservedSeries::new(state, start, days, population_n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
    }

    fn series(days: Vec<DailyCounts>, n: u64) -> ObservedSeries {
        ObservedSeries::new("xx", start(), days, n).unwrap()
    }

    fn confirmed(c: u64) -> DailyCounts {
        DailyCounts {
            confirmed: c,
            ..DailyCounts::default()
        }
    }

    #[test]
    fn all_zero_series() {
        let norm = normalize(&series(vec![DailyCounts::default(); 4], 100)).unwrap();
        assert!(norm.s.iter().all(|&v| v == 1.0));
        assert!(norm.i_e.iter().chain(&norm.i_x).chain(&norm.r).all(|&v| v == 0.0));
    }

    #[test]
    fn single_day_division() {
        let norm = normalize(&series(vec![confirmed(10)], 1000)).unwrap();
        assert_eq!(norm.di_e[0], 0.01);
        assert_eq!(norm.s[0], 0.99);
    }

    #[test]
    fn scale_error_when_population_too_small() {
        let err = normalize(&series(vec![confirmed(60), confirmed(60)], 100)).unwrap_err();
        assert!(matches!(err, FitError::Scale { day: 1, .. }), "{err}");
    }

    #[test]
    fn exact_proportional_recovery() {
        let i_e = vec![0.01, 0.02, 0.03, 0.05, 0.04];
        let i_x = vec![0.001, 0.002, 0.002, 0.003, 0.003];
        let r = vec![0.0, 0.001, 0.002, 0.004, 0.006];
        let s: Vec<f64> = (0..5).map(|k| 1.0 - i_e[k] - i_x[k] - r[k]).collect();
        let dr = i_e.iter().zip(&i_x).map(|(a, b)| 0.2 * (a + b)).collect();
        let norm = NormalizedSeries {
            di_e: vec![0.01; 5],
            di_x: vec![0.001; 5],
            dr,
            s,
            i_e,
            i_x,
            r,
        };
        let options = EstimateOptions {
            alignment: Alignment::EndOfDay,
            ..EstimateOptions::default()
        };
        let fit = estimate_params(&norm, options).unwrap();
        assert!((fit.params.gamma - 0.2).abs() < 1e-15, "{}", fit.params.gamma);
    }

    #[test]
    fn gamma_unidentifiable_without_infection() {
        let norm = normalize(&series(vec![DailyCounts::default(); 4], 100)).unwrap();
        match estimate_params(&norm, EstimateOptions::default()) {
            Err(FitError::Unidentifiable { parameter }) => assert_eq!(parameter, "gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn beta_x_needs_exogenous_mass() {
        let days = vec![confirmed(1), confirmed(2), confirmed(4), confirmed(8)];
        let norm = normalize(&series(days, 1000)).unwrap();
        match estimate_params(&norm, EstimateOptions::default()) {
            Err(FitError::Unidentifiable { parameter }) => assert_eq!(parameter, "beta_x"),
            other => panic!("{other:?}"),
        }
        let options = EstimateOptions {
            allow_absent_exogenous: true,
            ..EstimateOptions::default()
        };
        let fit = estimate_params(&norm, options).unwrap();
        assert_eq!(fit.params.beta_x, 0.0);
        assert!(fit.diagnostics[1].assumed);
    }

    #[test]
    fn negative_slope_clamped() {
        // recoveries only on days where nobody is infected yet
        let days = vec![
            DailyCounts {
                recovered: 0,
                imported: 1,
                ..DailyCounts::default()
            },
            DailyCounts {
                confirmed: 5,
                imported: 1,
                ..DailyCounts::default()
            },
            confirmed(30),
            confirmed(10),
        ];
        let mut norm = normalize(&series(days, 10_000)).unwrap();
        norm.dr = vec![0.01, 0.0, -0.01, -0.01];
        let fit = estimate_params(&norm, EstimateOptions::default()).unwrap();
        assert_eq!(fit.params.gamma, 0.0);
        assert!(fit.diagnostics[0].clamped && fit.diagnostics[0].raw_estimate < 0.0);
    }

    #[test]
    fn too_short() {
        let norm = normalize(&series(vec![confirmed(1), confirmed(1)], 100)).unwrap();
        assert!(matches!(
            estimate_params(&norm, EstimateOptions::default()),
            Err(FitError::TooShort { .. })
        ));
    }

    #[test]
    fn identical_runs_without_exogenous_channel() {
        let fitted = FittedParams {
            params: ModelParams::new(0.0, 0.3, 0.1).unwrap(),
            initial: CompartmentState::new(0.999, 0.001, 0.0, 0.0).unwrap(),
            initial_day: 0,
            diagnostics: Vec::new(),
        };
        let cf = counterfactual(&fitted, &CounterfactualConfig::default()).unwrap();
        assert_eq!(cf.comparison.peak_value_ratio, 1.0);
        assert_eq!(cf.comparison.peak_advance_days, 0);
        assert_eq!(cf.with_ix, cf.without_ix);
    }

    #[test]
    fn folded_initial_mass_accounting() {
        let fitted = FittedParams {
            params: ModelParams::new(0.01, 0.3, 0.1).unwrap(),
            initial: CompartmentState::new(0.99, 0.004, 0.005, 0.001).unwrap(),
            initial_day: 0,
            diagnostics: Vec::new(),
        };
        let (b, params) = without_exogenous(&fitted);
        assert_eq!(b.i_x, 0.0);
        assert_eq!(params.beta_x, 0.0);
        assert_eq!(b.s + b.i_e + b.r, 1.0);
    }

    #[test]
    fn horizon_extends_then_fails() {
        let fitted = FittedParams {
            params: ModelParams::new(0.0, 0.12, 0.1).unwrap(),
            initial: CompartmentState::new(1.0 - 1e-6, 1e-6, 0.0, 0.0).unwrap(),
            initial_day: 0,
            diagnostics: Vec::new(),
        };
        let short = CounterfactualConfig {
            horizon_days: 16,
            max_horizon_days: 64,
        };
        assert!(matches!(counterfactual(&fitted, &short), Err(FitError::Horizon { days: 64 })));
        let cf = counterfactual(&fitted, &CounterfactualConfig::default()).unwrap();
        assert!(cf.with_ix.len() > 513);
    }

    #[test]
    fn closed_loop_single_case() {
        let truth = ModelParams::new(0.05, 0.3, 0.1).unwrap();
        let obs = simulate_observed(truth, "xx", start(), 365, 10_000_000).unwrap();
        let fit = estimate_params(&normalize(&obs).unwrap(), EstimateOptions::default()).unwrap();
        for (got, want) in [
            (fit.params.gamma, truth.gamma),
            (fit.params.beta_e, truth.beta_e),
            (fit.params.beta_x, truth.beta_x),
        ] {
            assert!(((got - want) / want).abs() < 0.05, "{got} vs {want}");
        }
    }

    #[test]
    fn comparison_json_layout() {
        let obs = simulate_observed(ModelParams::new(0.01, 0.4, 0.1).unwrap(), "kl", start(), 200, 1_000_000).unwrap();
        let fit = estimate_params(&normalize(&obs).unwrap(), EstimateOptions::default()).unwrap();
        let cf = counterfactual(&fit, &CounterfactualConfig::default()).unwrap();
        let json = comparison_json(&obs, &fit, &cf.comparison);
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(&keys[..4], ["state", "fitted", "with_ix", "without_ix"]);
        assert_eq!(json["state"], "kl");
        assert!(json["with_ix"]["peak_tick"].is_u64());
        let mut buf = Vec::new();
        write_ie_trajectories(&mut buf, &cf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("day,i_e_with_ix,i_e_without_ix\n0,"));
    }
}
