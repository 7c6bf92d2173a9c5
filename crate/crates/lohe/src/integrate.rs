//! Fixed-step fourth-order Runge-Kutta integration of any model flow with
//! periodic retraction back to the state manifold and dense diagnostic
//! sampling. A single trajectory advances sequentially; independent
//! trajectories can run concurrently.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsFrame, MonitorKind, MonitorParams, MonitorSeries};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    dsom_rhs_raw, dum_rhs_raw, lt_rhs, mm_rhs, mum_rhs_raw, sds_rhs, sms_rhs, CouplingSpec,
    Ensemble, Manifold,
};
use crate::tensor::{C64, DenseTensor};

/// One coupled system state: the list of ensembles a model evolves together.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub parts: Vec<Ensemble>,
}

impl CoupledState {
    pub fn new(parts: Vec<Ensemble>) -> Self {
        Self { parts }
    }

    fn axpy(&self, coeff: f64, derivs: &[Vec<DenseTensor>]) -> Self {
        let alpha = C64::new(coeff, 0.0);
        let parts = self
            .parts
            .iter()
            .zip(derivs)
            .map(|(ens, d)| {
                let states = ens
                    .states()
                    .iter()
                    .zip(d)
                    .map(|(s, ds)| {
                        let mut out = s.clone();
                        out.axpy(alpha, ds);
                        out
                    })
                    .collect();
                ens.replace_states(states)
            })
            .collect();
        Self { parts }
    }

    pub fn max_feasibility_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in &self.parts {
            worst = worst.max(p.feasibility_defect()?);
        }
        Ok(worst)
    }
}

/// Everything except the states: which reduction is flowing, its frequency
/// data, and its coupling strengths.
#[derive(Debug, Clone)]
pub enum FlowModel {
    Lt { coupling: CouplingSpec, freq: Option<Vec<DenseTensor>> },
    Sds { kappa: f64, omega: Option<Vec<DenseTensor>>, lambda: Option<Vec<DenseTensor>> },
    Sms { kappa: f64 },
    Dm { kappa1: f64, kappa2: f64, b: Option<Vec<DenseTensor>>, c: Option<Vec<DenseTensor>> },
    Dum { kappa: f64, h: Option<Vec<DenseTensor>>, g: Option<Vec<DenseTensor>> },
    Dsom { kappa: f64, omega: Option<Vec<DenseTensor>>, psi: Option<Vec<DenseTensor>> },
    Mm { kappa1: f64, kappa2: f64, b: Option<Vec<Vec<DenseTensor>>> },
    Mum { kappa: f64, h: Option<Vec<Vec<DenseTensor>>> },
}

impl FlowModel {
    /// Raw tangent vectors at the given states. No feasibility checks: the
    /// integrator calls this on Runge-Kutta stage values, which sit slightly
    /// off the manifold by construction.
    pub fn derivatives(&self, parts: &[Ensemble]) -> Result<Vec<Vec<DenseTensor>>> {
        match self {
            FlowModel::Lt { coupling, freq } => {
                Ok(vec![lt_rhs(&parts[0], freq.as_deref(), coupling)?])
            }
            FlowModel::Sds { kappa, omega, lambda } => {
                let (du, dv) =
                    sds_rhs(&parts[0], &parts[1], omega.as_deref(), lambda.as_deref(), *kappa)?;
                Ok(vec![du, dv])
            }
            FlowModel::Sms { kappa } => sms_rhs(parts, *kappa),
            FlowModel::Dm { kappa1, kappa2, b, c } => {
                let (du, dv) =
                    crate::model::dm_rhs(&parts[0], &parts[1], b.as_deref(), c.as_deref(), *kappa1, *kappa2)?;
                Ok(vec![du, dv])
            }
            FlowModel::Dum { kappa, h, g } => {
                let (du, dv) =
                    dum_rhs_raw(&parts[0], &parts[1], h.as_deref(), g.as_deref(), *kappa)?;
                Ok(vec![du, dv])
            }
            FlowModel::Dsom { kappa, omega, psi } => {
                let (du, dv) =
                    dsom_rhs_raw(&parts[0], &parts[1], omega.as_deref(), psi.as_deref(), *kappa)?;
                Ok(vec![du, dv])
            }
            FlowModel::Mm { kappa1, kappa2, b } => mm_rhs(parts, b.as_deref(), *kappa1, *kappa2),
            FlowModel::Mum { kappa, h } => mum_rhs_raw(parts, h.as_deref(), *kappa),
        }
    }

    /// Coupling scale entering the stiffness heuristic.
    pub fn kappa_scale(&self) -> f64 {
        match self {
            FlowModel::Lt { coupling, .. } => {
                coupling.nonzero().map(|(_, k)| k).fold(0.0, f64::max)
            }
            FlowModel::Sds { kappa, .. }
            | FlowModel::Sms { kappa }
            | FlowModel::Dum { kappa, .. }
            | FlowModel::Dsom { kappa, .. }
            | FlowModel::Mum { kappa, .. } => *kappa,
            FlowModel::Dm { kappa1, kappa2, .. } | FlowModel::Mm { kappa1, kappa2, .. } => {
                kappa1 + kappa2
            }
        }
    }

    pub fn is_lt(&self) -> bool {
        matches!(self, FlowModel::Lt { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetractionKind {
    Polar,
    Normalize,
    None,
}

/// Integration controls. `retract_every` and `sample_every` count steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub retraction: RetractionKind,
    pub retract_every: usize,
    pub sample_every: usize,
    pub store_snapshots: bool,
    /// Abort when a state drifts this far from its manifold.
    pub defect_guard: f64,
    /// Subdivide dt when dt * max-derivative-norm exceeds 0.1.
    pub stiffness_guard: bool,
    /// Wall-clock abort, seconds.
    pub wall_budget_sec: f64,
    /// Turn a monitor violation into a hard error naming the offending frame
    /// instead of a failed verdict.
    pub hard_monitors: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            retraction: RetractionKind::Polar,
            retract_every: 1,
            sample_every: 10,
            store_snapshots: false,
            defect_guard: 0.5,
            stiffness_guard: true,
            wall_budget_sec: 300.0,
            hard_monitors: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.dt > 0.0) {
            errs.push(format!("dt must be positive, got {}", self.dt));
        }
        if self.t_end < self.dt {
            errs.push(format!("t_end {} must be at least dt {}", self.t_end, self.dt));
        }
        if self.retract_every == 0 {
            errs.push("retract_every must be >= 1".into());
        }
        if self.sample_every == 0 {
            errs.push("sample_every must be >= 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Check the retraction tag against each part's manifold.
    pub fn check_retraction(&self, parts: &[Ensemble]) -> Result<()> {
        for p in parts {
            let ok = match (self.retraction, p.manifold()) {
                (RetractionKind::None, _) => true,
                (RetractionKind::Polar, Manifold::Unitary | Manifold::SpecialOrthogonal) => true,
                (
                    RetractionKind::Normalize,
                    Manifold::Sphere | Manifold::UnitNormTensor | Manifold::RectUnitNorm,
                ) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::Validation(vec![format!(
                    "retraction {:?} is not valid for manifold {:?}",
                    self.retraction,
                    p.manifold()
                )]));
            }
        }
        Ok(())
    }
}

/// Sampled run: times, diagnostics frames, optional stored states, and the
/// evaluated monitor series.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub frames: Vec<DiagnosticsFrame>,
    pub snapshots: Option<Vec<CoupledState>>,
    pub monitors: Vec<MonitorSeries>,
    pub effective_dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// One classical four-stage Runge-Kutta update applied to all coupled
/// ensembles simultaneously.
pub fn rk4_step(model: &FlowModel, state: &CoupledState, dt: f64) -> Result<CoupledState> {
    rk4_step_at(model, state, dt, f64::NAN)
}

fn rk4_step_at(model: &FlowModel, state: &CoupledState, dt: f64, t: f64) -> Result<CoupledState> {
    if !(dt > 0.0) {
        return Err(Error::Validation(vec![format!("dt must be positive, got {dt}")]));
    }
    let k1 = model.derivatives(&state.parts)?;
    let s2 = state.axpy(dt / 2.0, &k1);
    let k2 = model.derivatives(&s2.parts)?;
    let s3 = state.axpy(dt / 2.0, &k2);
    let k3 = model.derivatives(&s3.parts)?;
    let s4 = state.axpy(dt, &k3);
    let k4 = model.derivatives(&s4.parts)?;
    for stage in [&k1, &k2, &k3, &k4] {
        for part in stage {
            for d in part {
                if !d.is_finite() {
                    return Err(Error::NonFiniteDerivative { t });
                }
            }
        }
    }
    let mut next = state.axpy(dt / 6.0, &k1);
    next = next.axpy(dt / 3.0, &k2);
    next = next.axpy(dt / 3.0, &k3);
    next = next.axpy(dt / 6.0, &k4);
    Ok(next)
}

/// Project every state of an ensemble back onto its manifold: the polar
/// factor for the matrix groups, normalization for the norm manifolds.
pub fn retract(ens: &Ensemble) -> Result<Ensemble> {
    retract_guarded(ens, f64::INFINITY, f64::NAN)
}

fn retract_guarded(ens: &Ensemble, guard: f64, t: f64) -> Result<Ensemble> {
    let states = ens
        .states()
        .iter()
        .map(|s| match ens.manifold() {
            Manifold::Sphere | Manifold::UnitNormTensor | Manifold::RectUnitNorm => {
                let norm = s.frob_norm();
                if norm == 0.0 {
                    return Err(Error::SingularMatrix);
                }
                if (norm - 1.0).abs() > guard {
                    return Err(Error::DefectGuard { defect: (norm - 1.0).abs(), guard, t });
                }
                Ok(s.scale(C64::new(1.0 / norm, 0.0)))
            }
            Manifold::Unitary => {
                if guard.is_finite() {
                    let defect = linalg::gram_defect(s)?;
                    if defect > guard {
                        return Err(Error::DefectGuard { defect, guard, t });
                    }
                }
                linalg::polar_factor(s)
            }
            Manifold::SpecialOrthogonal => {
                if guard.is_finite() {
                    let defect = linalg::gram_defect(s)?;
                    if defect > guard {
                        return Err(Error::DefectGuard { defect, guard, t });
                    }
                }
                let mut q = linalg::polar_factor(s)?;
                // Small drift cannot flip orientation; guard it anyway.
                if linalg::determinant(&q)?.re < 0.0 {
                    let (_r, c) = linalg::mat_dims(&q)?;
                    let n = q.shape()[0];
                    for i in 0..n {
                        let v = q.data()[i * c + (c - 1)];
                        q.data_mut()[i * c + (c - 1)] = -v;
                    }
                }
                Ok(q)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ens.replace_states(states))
}

/// Max over the ensemble of ‖I − U_jU_j†‖_F.
pub fn unitarity_defect(ens: &Ensemble) -> Result<f64> {
    let shape = ens.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::NotSquare(format!("{shape:?}")));
    }
    let mut worst: f64 = 0.0;
    for s in ens.states() {
        worst = worst.max(linalg::gram_defect(s)?);
    }
    Ok(worst)
}

/// Low-level stepping handle used by [`integrate`] and by harness runs that
/// advance several systems in lockstep (time-shift comparisons, twin runs,
/// co-integrated reductions).
pub struct Stepper<'a> {
    model: &'a FlowModel,
    state: CoupledState,
    cfg: &'a IntegratorConfig,
    substeps: usize,
    dt_micro: f64,
    macro_index: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a FlowModel, init: CoupledState, cfg: &'a IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        cfg.check_retraction(&init.parts)?;
        let mut substeps = 1usize;
        if cfg.stiffness_guard {
            let k1 = model.derivatives(&init.parts)?;
            let maxnorm = k1
                .iter()
                .flatten()
                .map(|d| d.frob_norm())
                .fold(0.0_f64, f64::max);
            let limit = 0.1;
            if cfg.dt * maxnorm > limit {
                substeps = (cfg.dt * maxnorm / limit).ceil() as usize;
            }
        }
        let dt_micro = cfg.dt / substeps as f64;
        Ok(Self { model, state: init, cfg, substeps, dt_micro, macro_index: 0 })
    }

    pub fn state(&self) -> &CoupledState {
        &self.state
    }

    pub fn into_state(self) -> CoupledState {
        self.state
    }

    pub fn t(&self) -> f64 {
        self.macro_index as f64 * self.cfg.dt
    }

    pub fn effective_dt(&self) -> f64 {
        self.dt_micro
    }

    /// Advance one macro step of cfg.dt (possibly several micro steps),
    /// retracting according to the configuration.
    pub fn advance(&mut self) -> Result<()> {
        for sub in 0..self.substeps {
            let t = self.t() + sub as f64 * self.dt_micro;
            self.state = rk4_step_at(self.model, &self.state, self.dt_micro, t)?;
        }
        self.macro_index += 1;
        if self.cfg.retraction != RetractionKind::None
            && self.macro_index % self.cfg.retract_every == 0
        {
            let t = self.t();
            let parts = self
                .state
                .parts
                .iter()
                .map(|p| retract_guarded(p, self.cfg.defect_guard, t))
                .collect::<Result<Vec<_>>>()?;
            self.state = CoupledState::new(parts);
        }
        Ok(())
    }
}

/// Advance the flow to t_end, sampling a diagnostics frame every
/// `sample_every` steps and evaluating the requested inequality monitors on
/// the sampled series. Deterministic for identical inputs.
pub fn integrate(
    model: &FlowModel,
    init: CoupledState,
    cfg: &IntegratorConfig,
    monitors: &[MonitorKind],
    params: Option<MonitorParams>,
) -> Result<Trajectory> {
    let started = Instant::now();
    let n_steps = steps_for(cfg.t_end, cfg.dt)?;
    let mut stepper = Stepper::new(model, init, cfg)?;

    let mut times = Vec::new();
    let mut frames = Vec::new();
    let mut snapshots = if cfg.store_snapshots { Some(Vec::new()) } else { None };

    let mut record = |st: &CoupledState, t: f64| -> Result<()> {
        times.push(t);
        frames.push(diagnostics::frame_for(model, &st.parts, t)?);
        if let Some(snaps) = snapshots.as_mut() {
            snaps.push(st.clone());
        }
        Ok(())
    };

    record(stepper.state(), 0.0)?;
    for step in 1..=n_steps {
        stepper.advance()?;
        if step % cfg.sample_every == 0 || step == n_steps {
            record(stepper.state(), stepper.t())?;
        }
        if step % 512 == 0 && started.elapsed().as_secs_f64() > cfg.wall_budget_sec {
            return Err(Error::BudgetExceeded { budget: cfg.wall_budget_sec, t: stepper.t() });
        }
    }

    let mut monitor_series = Vec::new();
    if !monitors.is_empty() {
        let p = params.unwrap_or_else(|| MonitorParams::infer(model, &stepper.state().parts));
        for kind in monitors {
            let series = diagnostics::inequality_monitor(*kind, &frames, None, &p)?;
            for (i, frame) in frames.iter_mut().enumerate() {
                frame.monitor_slack.insert(kind.name().to_string(), series.slack[i]);
            }
            if cfg.hard_monitors && series.violated {
                let (idx, worst) = series
                    .slack
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, s)| (i, *s))
                    .unwrap_or((0, f64::NAN));
                return Err(Error::MonitorViolation {
                    name: kind.name().to_string(),
                    t: times[idx],
                    slack: worst,
                });
            }
            monitor_series.push(series);
        }
    }

    Ok(Trajectory {
        times,
        frames,
        snapshots,
        monitors: monitor_series,
        effective_dt: stepper.effective_dt(),
        steps: n_steps,
    })
}

pub(crate) fn steps_for(t_end: f64, dt: f64) -> Result<usize> {
    let raw = t_end / dt;
    let n = raw.round();
    if (raw - n).abs() > 1e-6 {
        return Err(Error::Validation(vec![format!(
            "t_end {t_end} is not an integer multiple of dt {dt}"
        )]));
    }
    Ok(n as usize)
}
