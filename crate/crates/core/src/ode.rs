//! Exo-SIR and classic SIR vector fields, a fixed-step RK4 integrator, and
//! peak statistics over integrated trajectories.
//!
//! All state is expressed as population fractions. The Exo-SIR model splits
//! the infected fraction `i` into an endogenous part `i_e` (infected from
//! within the population) and an exogenous part `i_x` (infected by an outside
//! source), with `i = i_e + i_x` and `s + i + r = 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest tolerated drift of `s + i_e + i_x + r` away from 1.
pub const CONSERVATION_TOL: f64 = 1e-9;

/// Largest undershoot below 0 (or overshoot above 1) that is clamped instead
/// of being reported as an integration failure.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid step configuration: {0}")]
    InvalidStep(String),
    #[error("integration failed at step {step}: {reason}")]
    IntegrationFailure { step: usize, reason: String },
}

/// Rates of the Exo-SIR model, all per unit time (days).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Rate at which the exogenous source infects susceptibles.
    pub beta_x: f64,
    /// Rate at which infected nodes infect susceptibles.
    pub beta_e: f64,
    /// Recovery rate.
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(beta_x: f64, beta_e: f64, gamma: f64) -> Result<Self, OdeError> {
        let params = Self {
            beta_x,
            beta_e,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn zero() -> Self {
        Self {
            beta_x: 0.0,
            beta_e: 0.0,
            gamma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        for (name, v) in [
            ("beta_x", self.beta_x),
            ("beta_e", self.beta_e),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(OdeError::InvalidParams(format!("{name} is not finite")));
            }
            if v < 0.0 {
                return Err(OdeError::InvalidParams(format!("{name} = {v} is negative")));
            }
        }
        Ok(())
    }

    /// Same rates with the exogenous channel switched off.
    pub fn without_exogenous(&self) -> Self {
        Self {
            beta_x: 0.0,
            ..*self
        }
    }
}

/// One time slice of the four compartment fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentState {
    pub s: f64,
    pub i_e: f64,
    pub i_x: f64,
    pub r: f64,
}

impl CompartmentState {
    pub fn new(s: f64, i_e: f64, i_x: f64, r: f64) -> Result<Self, OdeError> {
        let state = Self { s, i_e, i_x, r };
        state.validate()?;
        Ok(state)
    }

    /// Everybody susceptible.
    pub fn fully_susceptible() -> Self {
        Self {
            s: 1.0,
            i_e: 0.0,
            i_x: 0.0,
            r: 0.0,
        }
    }

    pub fn infected(&self) -> f64 {
        self.i_e + self.i_x
    }

    pub fn total(&self) -> f64 {
        self.s + self.i_e + self.i_x + self.r
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        for (name, v) in self.named() {
            if !v.is_finite() {
                return Err(OdeError::InvalidState(format!("{name} is not finite")));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(OdeError::InvalidState(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let drift = (self.total() - 1.0).abs();
        if drift > CONSERVATION_TOL {
            return Err(OdeError::InvalidState(format!(
                "compartments sum to {} (drift {drift:e})",
                self.total()
            )));
        }
        Ok(())
    }

    /// The state with all exogenous infection returned to the susceptible pool.
    pub fn fold_exogenous(&self) -> Self {
        Self {
            s: self.s + self.i_x,
            i_x: 0.0,
            ..*self
        }
    }

    pub fn get(&self, compartment: Compartment) -> f64 {
        match compartment {
            Compartment::Susceptible => self.s,
            Compartment::Endogenous => self.i_e,
            Compartment::Exogenous => self.i_x,
            Compartment::Infected => self.infected(),
            Compartment::Recovered => self.r,
        }
    }

    fn named(&self) -> [(&'static str, f64); 4] {
        [("s", self.s), ("i_e", self.i_e), ("i_x", self.i_x), ("r", self.r)]
    }

    fn as_array(&self) -> [f64; 4] {
        [self.s, self.i_e, self.i_x, self.r]
    }

    fn from_array([s, i_e, i_x, r]: [f64; 4]) -> Self {
        Self { s, i_e, i_x, r }
    }
}

/// Time derivatives of the four compartments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub ds: f64,
    pub di_x: f64,
    pub di_e: f64,
    pub dr: f64,
}

impl Derivative {
    pub fn sum(&self) -> f64 {
        self.ds + self.di_x + self.di_e + self.dr
    }

    /// Rate of change of the total infected fraction.
    pub fn di(&self) -> f64 {
        self.di_e + self.di_x
    }

    fn as_array(&self) -> [f64; 4] {
        [self.ds, self.di_e, self.di_x, self.dr]
    }
}

fn require_finite(values: &[(&str, f64)]) -> Result<(), OdeError> {
    match values.iter().find(|(_, v)| !v.is_finite()) {
        Some((name, _)) => Err(OdeError::InvalidState(format!("{name} is not finite"))),
        None => Ok(()),
    }
}

/// Exo-SIR right-hand side.
///
/// ```text
/// ds/dt   = -beta_x s - beta_e s i
/// di_x/dt =  beta_x s - gamma i_x
/// di_e/dt =  beta_e s i - gamma i_e
/// dr/dt   =  gamma i
/// ```
pub fn exo_sir_rhs(state: &CompartmentState, params: &ModelParams) -> Result<Derivative, OdeError> {
    require_finite(&state.named())?;
    require_finite(&[
        ("beta_x", params.beta_x),
        ("beta_e", params.beta_e),
        ("gamma", params.gamma),
    ])?;
    let &CompartmentState { s, i_e, i_x, .. } = state;
    let i = i_e + i_x;
    let exogenous = params.beta_x * s;
    let endogenous = params.beta_e * s * i;
    Ok(Derivative {
        ds: -exogenous - endogenous,
        di_x: exogenous - params.gamma * i_x,
        di_e: endogenous - params.gamma * i_e,
        dr: params.gamma * i,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirState {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl SirState {
    /// Places the SIR infected fraction in the endogenous compartment.
    pub fn embed(&self) -> CompartmentState {
        CompartmentState {
            s: self.s,
            i_e: self.i,
            i_x: 0.0,
            r: self.r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirDerivative {
    pub ds: f64,
    pub di: f64,
    pub dr: f64,
}

/// Classic SIR right-hand side: `ds = -beta s i`, `di = beta s i - gamma i`,
/// `dr = gamma i`.
pub fn sir_rhs(state: &SirState, params: &SirParams) -> Result<SirDerivative, OdeError> {
    require_finite(&[
        ("s", state.s),
        ("i", state.i),
        ("r", state.r),
        ("beta", params.beta),
        ("gamma", params.gamma),
    ])?;
    let infection = params.beta * state.s * state.i;
    let recovery = params.gamma * state.i;
    Ok(SirDerivative {
        ds: -infection,
        di: infection - recovery,
        dr: recovery,
    })
}

/// A right-hand side that can be integrated over [`CompartmentState`].
pub trait VectorField {
    fn derivative(&self, state: &CompartmentState) -> Result<Derivative, OdeError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExoSir(pub ModelParams);

impl VectorField for ExoSir {
    fn derivative(&self, state: &CompartmentState) -> Result<Derivative, OdeError> {
        exo_sir_rhs(state, &self.0)
    }
}

/// Classic SIR acting on the embedded state (`i` lives in `i_e`, `i_x` is
/// held constant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sir(pub SirParams);

impl VectorField for Sir {
    fn derivative(&self, state: &CompartmentState) -> Result<Derivative, OdeError> {
        let d = sir_rhs(
            &SirState {
                s: state.s,
                i: state.i_e,
                r: state.r,
            },
            &self.0,
        )?;
        Ok(Derivative {
            ds: d.ds,
            di_x: 0.0,
            di_e: d.di,
            dr: d.dr,
        })
    }
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn derivative(&self, state: &CompartmentState) -> Result<Derivative, OdeError> {
        (**self).derivative(state)
    }
}

fn axpy(base: [f64; 4], h: f64, d: [f64; 4]) -> [f64; 4] {
    std::array::from_fn(|k| base[k] + h * d[k])
}

/// One classical Runge-Kutta step, without clamping or validation.
pub fn rk4_step<F: VectorField + ?Sized>(
    field: &F,
    state: &CompartmentState,
    dt: f64,
) -> Result<CompartmentState, OdeError> {
    let y = state.as_array();
    let k1 = field.derivative(state)?.as_array();
    let k2 = field
        .derivative(&CompartmentState::from_array(axpy(y, dt / 2.0, k1)))?
        .as_array();
    let k3 = field
        .derivative(&CompartmentState::from_array(axpy(y, dt / 2.0, k2)))?
        .as_array();
    let k4 = field
        .derivative(&CompartmentState::from_array(axpy(y, dt, k3)))?
        .as_array();
    let next = std::array::from_fn(|k| y[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]));
    Ok(CompartmentState::from_array(next))
}

/// Clamps rounding-level excursions outside [0, 1] and rejects anything larger.
fn settle(state: CompartmentState, step: usize) -> Result<CompartmentState, OdeError> {
    let fail = |reason: String| OdeError::IntegrationFailure { step, reason };
    let mut values = state.as_array();
    for (v, (name, _)) in values.iter_mut().zip(state.named()) {
        if !v.is_finite() {
            return Err(fail(format!("{name} is not finite")));
        }
        if *v < 0.0 {
            if *v < -CLAMP_TOL {
                return Err(fail(format!("{name} = {v:e} below zero")));
            }
            *v = 0.0;
        } else if *v > 1.0 {
            if *v > 1.0 + CLAMP_TOL {
                return Err(fail(format!("{name} = {v} above one")));
            }
            *v = 1.0;
        }
    }
    let settled = CompartmentState::from_array(values);
    let drift = (settled.total() - 1.0).abs();
    if drift > CONSERVATION_TOL {
        return Err(fail(format!("conservation drift {drift:e}")));
    }
    Ok(settled)
}

/// Integrates `field` from `initial` with `n_steps` fixed RK4 steps of size
/// `dt`, producing `n_steps + 1` states starting at t = 0.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    initial: CompartmentState,
    dt: f64,
    n_steps: usize,
) -> Result<Trajectory, OdeError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(OdeError::InvalidStep(format!("dt = {dt} must be positive")));
    }
    if n_steps == 0 {
        return Err(OdeError::InvalidStep("n_steps must be at least 1".into()));
    }
    initial.validate()?;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(initial);
    let mut current = initial;
    for step in 1..=n_steps {
        let next = rk4_step(field, &current, dt).map_err(|e| match e {
            OdeError::IntegrationFailure { .. } => e,
            other => OdeError::IntegrationFailure {
                step,
                reason: other.to_string(),
            },
        })?;
        current = settle(next, step)?;
        states.push(current);
    }
    Ok(Trajectory {
        t0: 0.0,
        dt,
        states,
    })
}

/// Selects which series a peak is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compartment {
    Susceptible,
    Endogenous,
    Exogenous,
    Infected,
    Recovered,
}

/// An ordered sequence of states on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    states: Vec<CompartmentState>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, states: Vec<CompartmentState>) -> Result<Self, OdeError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(OdeError::InvalidStep(format!("dt = {dt} must be positive")));
        }
        if !t0.is_finite() {
            return Err(OdeError::InvalidStep("t0 is not finite".into()));
        }
        if states.is_empty() {
            return Err(OdeError::InvalidState("trajectory has no states".into()));
        }
        for state in &states {
            state.validate()?;
        }
        Ok(Self { t0, dt, states })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[CompartmentState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &CompartmentState {
        self.states.last().expect("trajectory is non-empty")
    }

    pub fn time_at(&self, tick: usize) -> f64 {
        self.t0 + tick as f64 * self.dt
    }

    pub fn series(&self, compartment: Compartment) -> Vec<f64> {
        self.states.iter().map(|s| s.get(compartment)).collect()
    }

    pub fn peak(&self, compartment: Compartment) -> PeakStats {
        peak_of(self, compartment)
    }

    /// Writes `t,s,i_e,i_x,r` rows, one per state.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["t", "s", "i_e", "i_x", "r"])?;
        for (k, st) in self.states.iter().enumerate() {
            w.write_record([
                self.time_at(k).to_string(),
                st.s.to_string(),
                st.i_e.to_string(),
                st.i_x.to_string(),
                st.r.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakStats {
    pub peak_value: f64,
    pub peak_tick: usize,
    pub peak_time: f64,
}

/// Index and value of the first maximum of `values`.
pub fn series_peak(values: &[f64]) -> Option<(usize, f64)> {
    let mut iter = values.iter().copied().enumerate();
    let first = iter.next()?;
    Some(iter.fold(first, |best, (k, v)| if v > best.1 { (k, v) } else { best }))
}

pub fn peak_of(traj: &Trajectory, compartment: Compartment) -> PeakStats {
    let (peak_tick, peak_value) =
        series_peak(&traj.series(compartment)).expect("trajectory is non-empty");
    PeakStats {
        peak_value,
        peak_tick,
        peak_time: traj.time_at(peak_tick),
    }
}

/// True when the present exogenous fraction strictly raises `di_e/dt` over
/// its value with `i_x = 0` and `(s, i_e)` held fixed.
pub fn endogenous_boost_check(state: &CompartmentState, params: &ModelParams) -> bool {
    let without = CompartmentState { i_x: 0.0, ..*state };
    match (exo_sir_rhs(state, params), exo_sir_rhs(&without, params)) {
        (Ok(with), Ok(base)) => with.di_e > base.di_e,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(s: f64, i_e: f64, i_x: f64, r: f64) -> CompartmentState {
        CompartmentState { s, i_e, i_x, r }
    }

    fn params(beta_x: f64, beta_e: f64, gamma: f64) -> ModelParams {
        ModelParams { beta_x, beta_e, gamma }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn rhs_exogenous_only_channel() {
        let d = exo_sir_rhs(&state(1.0, 0.0, 0.0, 0.0), &params(0.5, 0.9, 0.1)).unwrap();
        assert_eq!((d.ds, d.di_x, d.di_e, d.dr), (-0.5, 0.5, 0.0, 0.0));
    }

    #[test]
    fn rhs_zero_rates_is_fixed_point() {
        let d = exo_sir_rhs(&state(0.3, 0.2, 0.1, 0.4), &ModelParams::zero()).unwrap();
        assert_eq!(d.as_array(), [0.0; 4]);
    }

    #[test]
    fn rhs_hand_evaluated() {
        // i = 0.3: ds = -0.05 - 0.06, di_x = 0.05 - 0.02, di_e = 0.06 - 0.04, dr = 0.06
        let d = exo_sir_rhs(&state(0.5, 0.2, 0.1, 0.2), &params(0.1, 0.4, 0.2)).unwrap();
        assert!(close(d.ds, -0.11));
        assert!(close(d.di_x, 0.03));
        assert!(close(d.di_e, 0.02));
        assert!(close(d.dr, 0.06));
        assert!(d.sum().abs() < 1e-16);
    }

    #[test]
    fn rhs_rejects_non_finite() {
        let err = exo_sir_rhs(&state(f64::NAN, 0.0, 0.0, 0.0), &params(0.1, 0.1, 0.1));
        assert!(matches!(err, Err(OdeError::InvalidState(_))));
        let err = exo_sir_rhs(&state(1.0, 0.0, 0.0, 0.0), &params(f64::INFINITY, 0.1, 0.1));
        assert!(matches!(err, Err(OdeError::InvalidState(_))));
        let err = sir_rhs(&SirState { s: 1.0, i: f64::NAN, r: 0.0 }, &SirParams { beta: 1.0, gamma: 1.0 });
        assert!(matches!(err, Err(OdeError::InvalidState(_))));
    }

    #[test]
    fn sir_examples() {
        let p = SirParams { beta: 0.9, gamma: 0.1 };
        let d = sir_rhs(&SirState { s: 1.0, i: 0.0, r: 0.0 }, &p).unwrap();
        assert_eq!((d.ds, d.di, d.dr), (0.0, 0.0, 0.0));

        // beta s i = 0.09, gamma i = 0.05
        let d = sir_rhs(&SirState { s: 0.9, i: 0.1, r: 0.0 }, &SirParams { beta: 1.0, gamma: 0.5 }).unwrap();
        assert!(close(d.ds, -0.09) && close(d.di, 0.04) && close(d.dr, 0.05));

        let d = sir_rhs(&SirState { s: 0.0, i: 0.5, r: 0.5 }, &SirParams { beta: 2.0, gamma: 1.0 }).unwrap();
        assert_eq!((d.ds, d.di, d.dr), (0.0, -0.5, 0.5));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.1, 0.2, 0.3).is_ok());
        assert!(ModelParams::new(-0.1, 0.2, 0.3).is_err());
        assert!(ModelParams::new(0.1, f64::NAN, 0.3).is_err());
    }

    #[test]
    fn state_validation() {
        assert!(CompartmentState::new(0.5, 0.2, 0.1, 0.2).is_ok());
        assert!(CompartmentState::new(0.5, 0.2, 0.1, 0.3).is_err());
        assert!(CompartmentState::new(1.1, -0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn integrate_zero_rates_constant() {
        let init = state(0.4, 0.3, 0.2, 0.1);
        let traj = integrate(&ExoSir(ModelParams::zero()), init, 0.7, 25).unwrap();
        assert_eq!(traj.len(), 26);
        assert!(traj.states().iter().all(|s| *s == init));
    }

    #[test]
    fn integrate_rejects_bad_steps() {
        let init = CompartmentState::fully_susceptible();
        let field = ExoSir(params(0.1, 0.1, 0.1));
        assert!(matches!(integrate(&field, init, 0.0, 5), Err(OdeError::InvalidStep(_))));
        assert!(matches!(integrate(&field, init, 0.1, 0), Err(OdeError::InvalidStep(_))));
        assert!(matches!(
            integrate(&field, state(0.5, 0.0, 0.0, 0.0), 0.1, 3),
            Err(OdeError::InvalidState(_))
        ));
    }

    #[test]
    fn integrate_reports_unstable_step() {
        // a recovery rate this large overshoots i_e far below zero in one step
        let field = ExoSir(params(0.0, 0.0, 50.0));
        let err = integrate(&field, state(0.5, 0.5, 0.0, 0.0), 1.0, 10).unwrap_err();
        assert!(matches!(err, OdeError::IntegrationFailure { step: 1, .. }), "{err}");
    }

    #[test]
    fn peak_first_maximum() {
        assert_eq!(series_peak(&[0.0, 1.0, 3.0, 2.0]), Some((2, 3.0)));
        assert_eq!(series_peak(&[0.2, 0.2, 0.2]), Some((0, 0.2)));
        assert_eq!(series_peak(&[]), None);
    }

    #[test]
    fn peak_of_trajectory_matches_linear_scan() {
        let traj = integrate(
            &ExoSir(params(0.5, 0.9, 0.1)),
            CompartmentState::fully_susceptible(),
            0.01,
            10,
        )
        .unwrap();
        let ix = traj.series(Compartment::Exogenous);
        let mut best = 0;
        for k in 0..ix.len() {
            if ix[k] > ix[best] {
                best = k;
            }
        }
        let peak = traj.peak(Compartment::Exogenous);
        assert_eq!(peak.peak_tick, best);
        assert_eq!(peak.peak_value, ix[best]);
        assert!((peak.peak_time - 0.01 * best as f64).abs() < 1e-15);
    }

    #[test]
    fn peak_of_constant_trajectory() {
        let traj = Trajectory::new(2.0, 0.5, vec![state(0.8, 0.2, 0.0, 0.0); 3]).unwrap();
        let p = traj.peak(Compartment::Endogenous);
        assert_eq!((p.peak_value, p.peak_tick, p.peak_time), (0.2, 0, 2.0));
    }

    #[test]
    fn boost_check_examples() {
        let p = params(0.0, 0.4, 0.2);
        assert!(endogenous_boost_check(&state(0.5, 0.1, 0.05, 0.35), &p));
        assert!(!endogenous_boost_check(&state(0.5, 0.1, 0.0, 0.4), &p));
        assert!(!endogenous_boost_check(&state(0.0, 0.1, 0.05, 0.85), &p));
    }

    #[test]
    fn fold_exogenous_conserves_mass() {
        let s = state(0.7, 0.1, 0.15, 0.05).fold_exogenous();
        assert_eq!(s.i_x, 0.0);
        assert!((s.total() - 1.0).abs() < 1e-15);
    }
}
