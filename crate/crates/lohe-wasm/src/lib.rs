//! Single-page browser demo. Three interactive entry points, each returning
//! a JSON payload the page plots on plain canvases:
//!
//! * [`unitary_aggregation`] — a unitary-pair run with adjustable size,
//!   coupling, generator spread, and initial spread; emits the aggregation
//!   functionals over time.
//! * [`sphere_swarm`] — a double-sphere run; emits diameters plus the first
//!   component's unit vectors at sample times for a point-cloud view.
//! * [`threshold_report`] — the emergence thresholds and the cubic decay
//!   polynomial curve for given sizes and generator spread.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lohe::diagnostics::{self, GroupKind};
use lohe::integrate::{integrate, CoupledState, FlowModel, IntegratorConfig, RetractionKind};
use lohe::scenario::gen;

fn err_json(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

#[derive(Serialize)]
struct Series {
    t: Vec<f64>,
    l: Vec<f64>,
    d_u: Vec<f64>,
    d_v: Vec<f64>,
    e: Vec<f64>,
    defect_max: f64,
}

/// Unitary-pair aggregation run. `spread` is the initial total functional,
/// `d_h` the generator diameter (0 gives the homogeneous flow). Returns the
/// sampled functional series as JSON.
#[wasm_bindgen]
pub fn unitary_aggregation(
    n: u32,
    oscillators: u32,
    kappa: f64,
    d_h: f64,
    spread: f64,
    seed: u32,
    t_end: f64,
) -> String {
    let n = (n.clamp(2, 8)) as usize;
    let count = (oscillators.clamp(2, 16)) as usize;
    let seed = seed as u64;
    let build = || -> lohe::Result<Series> {
        let u = gen::gen_near_identity_ensemble(n, count, spread / 2.0, seed, GroupKind::Unitary)?;
        let v = gen::gen_near_identity_ensemble(
            n,
            count,
            spread / 2.0,
            seed ^ 0x5eed,
            GroupKind::Unitary,
        )?;
        let (h, g) = if d_h > 0.0 {
            (
                Some(gen::gen_frequencies(gen::FreqKind::Hermitian, n, count, d_h, seed ^ 1)?),
                Some(gen::gen_frequencies(gen::FreqKind::Hermitian, n, count, d_h, seed ^ 2)?),
            )
        } else {
            (None, None)
        };
        let model = FlowModel::Dum { kappa, h, g };
        // keep the fourth-order steps inside the stability region
        let stiff = 2.0 * kappa * (2 * n) as f64 + 1.0;
        let mut dt = (1.0 / stiff).min(5e-3);
        let steps_target = 400.0;
        dt = dt.min(t_end / steps_target);
        let steps = (t_end / dt).ceil() as usize;
        let dt = t_end / steps as f64;
        let cfg = IntegratorConfig {
            dt,
            t_end,
            retraction: RetractionKind::Polar,
            sample_every: (steps / 400).max(1),
            wall_budget_sec: 20.0,
            ..IntegratorConfig::default()
        };
        let traj = integrate(&model, CoupledState::new(vec![u, v]), &cfg, &[], None)?;
        Ok(Series {
            t: traj.frames.iter().map(|f| f.t).collect(),
            l: traj.frames.iter().map(|f| f.l).collect(),
            d_u: traj.frames.iter().map(|f| f.d_u).collect(),
            d_v: traj.frames.iter().map(|f| f.d_v).collect(),
            e: traj.frames.iter().map(|f| f.e).collect(),
            defect_max: traj.frames.iter().map(|f| f.defect).fold(0.0, f64::max),
        })
    };
    match build() {
        Ok(series) => serde_json::to_string(&series).unwrap_or_else(err_json),
        Err(e) => err_json(e),
    }
}

#[derive(Serialize)]
struct SwarmSeries {
    t: Vec<f64>,
    d_u: Vec<f64>,
    d_v: Vec<f64>,
    e: Vec<f64>,
    /// First-component unit vectors at each sample, flattened [x, y, z] per
    /// oscillator (3-sphere component only).
    points: Vec<Vec<f64>>,
}

/// Double-sphere swarm on S² × S². `min_ip` sets how spread the initial data
/// is (minimum pairwise inner product).
#[wasm_bindgen]
pub fn sphere_swarm(oscillators: u32, kappa: f64, min_ip: f64, seed: u32, t_end: f64) -> String {
    let count = (oscillators.clamp(2, 24)) as usize;
    let build = || -> lohe::Result<SwarmSeries> {
        let u = gen::gen_sphere_ensemble(3, count, min_ip.clamp(0.02, 0.95), seed as u64)?;
        let v = gen::gen_sphere_ensemble(3, count, min_ip.clamp(0.02, 0.95), seed as u64 ^ 0x77)?;
        let model = FlowModel::Sds { kappa, omega: None, lambda: None };
        let steps = 600usize;
        let dt = t_end / steps as f64;
        let cfg = IntegratorConfig {
            dt,
            t_end,
            retraction: RetractionKind::Normalize,
            sample_every: (steps / 120).max(1),
            store_snapshots: true,
            wall_budget_sec: 20.0,
            ..IntegratorConfig::default()
        };
        let traj = integrate(&model, CoupledState::new(vec![u, v]), &cfg, &[], None)?;
        let points = traj
            .snapshots
            .as_ref()
            .map(|snaps| {
                snaps
                    .iter()
                    .map(|st| {
                        st.parts[0]
                            .states()
                            .iter()
                            .flat_map(|s| s.data().iter().map(|z| z.re))
                            .collect()
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(SwarmSeries {
            t: traj.frames.iter().map(|f| f.t).collect(),
            d_u: traj.frames.iter().map(|f| f.d_u).collect(),
            d_v: traj.frames.iter().map(|f| f.d_v).collect(),
            e: traj.frames.iter().map(|f| f.e).collect(),
            points,
        })
    };
    match build() {
        Ok(series) => serde_json::to_string(&series).unwrap_or_else(err_json),
        Err(e) => err_json(e),
    }
}

#[derive(Serialize)]
struct Thresholds {
    alpha: f64,
    kappa_c: f64,
    s_star: f64,
    kappa: f64,
    nu: Option<(f64, f64, f64)>,
    level: f64,
    g_s: Vec<f64>,
    g_v: Vec<f64>,
}

/// Emergence thresholds for the unitary pair of sizes (n, m) with generator
/// diameter `d_h`, evaluated at `multiple` × the critical coupling, plus a
/// sampled curve of the cubic decay polynomial for plotting.
#[wasm_bindgen]
pub fn threshold_report(n: u32, m: u32, d_h: f64, multiple: f64) -> String {
    let (n, m) = (n as usize, m as usize);
    let build = || -> lohe::Result<Thresholds> {
        let probe = diagnostics::locking_constants(n, m, d_h, d_h, 1.0, GroupKind::Unitary)?;
        let kappa = if probe.kappa_c > 0.0 { multiple.max(1.01) * probe.kappa_c } else { 1.0 };
        let report = diagnostics::locking_constants(n, m, d_h, d_h, kappa, GroupKind::Unitary)?;
        let (nf, mf) = (n as f64, m as f64);
        let margin = mf - 4.0 * nf.sqrt();
        let level = if kappa > 0.0 { 2.0 * (1.0 + 3.0 * nf.sqrt()) * d_h / kappa } else { 0.0 };
        let mut g_s = Vec::new();
        let mut g_v = Vec::new();
        let span = 1.2 * report.alpha;
        for i in 0..=200 {
            let s = span * i as f64 / 200.0;
            g_s.push(s);
            g_v.push(2.0 * margin * s - (4.0 * nf + 9.0) * s * s - (2.0 * nf + 8.0 / 3.0) * s * s * s);
        }
        Ok(Thresholds {
            alpha: report.alpha,
            kappa_c: report.kappa_c,
            s_star: report.s_star,
            kappa,
            nu: report.nu,
            level,
            g_s,
            g_v,
        })
    };
    match build() {
        Ok(t) => serde_json::to_string(&t).unwrap_or_else(err_json),
        Err(e) => err_json(e),
    }
}
