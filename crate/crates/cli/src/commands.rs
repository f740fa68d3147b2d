use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use exosir_core::fit::{
    comparison_json, counterfactual, estimate_params, normalize, write_ie_trajectories, Alignment,
    CounterfactualConfig, EstimateOptions,
};
use exosir_core::ingest::{
    build_observed, parse_event_counts, parse_raw_cases, parse_states_daily, DateFormats, ObservedSeries,
    PopulationConfig, Reject, StateRef,
};
use exosir_core::network::{run_experiment, write_summary_csv, ExogenousChannel, ExperimentConfig};
use exosir_core::ode::{integrate, Compartment, CompartmentState, ExoSir, ModelParams, Sir, SirParams};
use exosir_core::sweep::{
    fit_log_peak, fit_peak_tick, run_sweep, sample_grid, scale_log_peaks, write_samples_csv, InitialCounts,
    SweepConfig,
};
use serde_json::json;

use crate::args::{Channel, FitArgs, Model, NetworkArgs, SimulateArgs, SweepArgs};
use crate::error::CliError;
use crate::output::OutDir;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn report_rejects(source: &Path, rejects: &[Reject], warnings: &[String]) {
    for r in rejects {
        eprintln!("{}: row {} rejected: {}", source.display(), r.row, r.reason);
    }
    for w in warnings {
        eprintln!("{}: warning: {w}", source.display());
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let initial = match &args.initial {
        Some(v) if v.len() == 4 => CompartmentState::new(v[0], v[1], v[2], v[3])?,
        Some(v) => return Err(CliError::Usage(format!("--initial needs 4 values, got {}", v.len()))),
        None => InitialCounts::default().fractions()?,
    };
    let traj = match args.model {
        Model::ExoSir => {
            let beta_x = args
                .beta_x
                .ok_or_else(|| CliError::Usage("--beta-x is required for the exo-sir model".into()))?;
            let params = ModelParams::new(beta_x, args.beta_e, args.gamma)?;
            integrate(&ExoSir(params), initial, args.dt, args.steps)?
        }
        Model::Sir => {
            if args.beta_x.is_some_and(|b| b != 0.0) {
                return Err(CliError::Usage("the sir model has no exogenous channel; drop --beta-x".into()));
            }
            if initial.i_x != 0.0 {
                return Err(CliError::Usage("the sir model needs i_x = 0 in --initial".into()));
            }
            ModelParams::new(0.0, args.beta_e, args.gamma)?;
            let params = SirParams {
                beta: args.beta_e,
                gamma: args.gamma,
            };
            integrate(&Sir(params), initial, args.dt, args.steps)?
        }
    };

    let out = OutDir::create(&args.out.out)?;
    out.write("trajectory.csv", |w| traj.write_csv(w).map_err(|e| CliError::Data(e.to_string())))?;
    let peak = |c| {
        let p = traj.peak(c);
        json!({ "peak_value": p.peak_value, "peak_tick": p.peak_tick, "peak_time": p.peak_time })
    };
    let peaks = json!({
        "model": match args.model { Model::ExoSir => "exo-sir", Model::Sir => "sir" },
        "dt": args.dt,
        "steps": args.steps,
        "i_e": peak(Compartment::Endogenous),
        "i_x": peak(Compartment::Exogenous),
        "i": peak(Compartment::Infected),
    });
    out.write_json("peaks.json", &peaks)?;
    Ok(())
}

pub fn network(args: &NetworkArgs) -> Result<(), CliError> {
    let config = ExperimentConfig {
        levels: args.levels.clone(),
        reps: args.reps,
        n: args.nodes,
        m: args.m,
        max_ticks: args.max_ticks,
        base_seed: args.seed,
        channel: match args.exo_channel {
            Channel::PerNode => ExogenousChannel::PerNode,
            Channel::SingleSource => ExogenousChannel::SingleSource,
        },
    };
    let summaries = run_experiment(&config)?;
    let out = OutDir::create(&args.out.out)?;
    out.write("network_summary.csv", |w| write_summary_csv(w, &summaries))?;
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let config = SweepConfig {
        dt: args.dt,
        horizon_steps: args.steps,
        ..SweepConfig::default()
    };
    let grid = sample_grid(args.k, args.seed)?;
    let mut samples = run_sweep(&grid, &config)?;
    scale_log_peaks(&mut samples)?;
    let log_peak = fit_log_peak(&samples)?;
    let peak_tick = fit_peak_tick(&samples)?;

    let out = OutDir::create(&args.out.out)?;
    out.write("sweep_samples.csv", |w| write_samples_csv(w, &samples))?;
    out.write_json("regression.json", &log_peak.to_json())?;
    out.write_json("regression_peak_tick.json", &peak_tick.to_json())?;
    Ok(())
}

fn population(args: &FitArgs, state: &StateRef) -> Result<u64, CliError> {
    if let Some(n) = args.population {
        if n == 0 {
            return Err(CliError::Usage("--population must be positive".into()));
        }
        return Ok(n);
    }
    let path = args
        .pop_config
        .as_ref()
        .ok_or_else(|| CliError::Usage("give --pop-config or --population".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(PopulationConfig::parse(&text)?.get(&state.code)?)
}

fn load_series(args: &FitArgs, state: &StateRef, n: u64) -> Result<ObservedSeries, CliError> {
    if let Some(path) = &args.series {
        return Ok(ObservedSeries::read_csv(open(path)?, &state.code, n)?);
    }
    let (Some(raw_path), Some(daily_path)) = (&args.raw, &args.states_daily) else {
        return Err(CliError::Usage("give --series, or --raw and --states-daily".into()));
    };
    let formats = DateFormats::default();
    let raw = parse_raw_cases(open(raw_path)?, &formats)?;
    report_rejects(raw_path, &raw.rejects, &raw.warnings);
    let daily = parse_states_daily(open(daily_path)?, &[state.code.as_str()], &formats)?;
    report_rejects(daily_path, &daily.rejects, &daily.warnings);
    let events = match &args.events {
        Some(path) => {
            let events = parse_event_counts(open(path)?, &formats)?;
            report_rejects(path, &events.rejects, &events.warnings);
            events.value
        }
        None => Vec::new(),
    };
    let built = build_observed(&raw.value, &daily.value, &events, state, n)?;
    for w in &built.warnings {
        eprintln!("warning: {w}");
    }
    Ok(built.value)
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let state = StateRef::from_code(&args.state).ok_or_else(|| CliError::Usage(format!("unknown state code '{}'", args.state)))?;
    let n = population(args, &state)?;
    let series = load_series(args, &state, n)?;
    let options = EstimateOptions {
        alignment: if args.end_of_day {
            Alignment::EndOfDay
        } else {
            Alignment::Midpoint
        },
        allow_absent_exogenous: true,
    };
    let fitted = estimate_params(&normalize(&series)?, options)?;
    for d in &fitted.diagnostics {
        if d.clamped {
            eprintln!("warning: {} estimate {} clamped to 0", d.parameter, d.raw_estimate);
        }
        if d.assumed {
            eprintln!("warning: no exogenous cases observed; {} set to 0", d.parameter);
        }
    }
    let config = CounterfactualConfig {
        horizon_days: args.horizon,
        ..CounterfactualConfig::default()
    };
    let cf = counterfactual(&fitted, &config)?;

    let out = OutDir::create(&args.out.out)?;
    out.write("observed.csv", |w| series.write_csv(w))?;
    out.write_json("comparison.json", &comparison_json(&series, &fitted, &cf.comparison))?;
    out.write("ie_trajectories.csv", |w| write_ie_trajectories(w, &cf))?;
    Ok(())
}
