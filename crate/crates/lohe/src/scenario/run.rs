//! Scenario execution: build seeded systems from a configuration, validate
//! every stated hypothesis before integrating, drive the run (with optional
//! companion runs for time-shift comparison, separability co-integration,
//! splitting/gauge twins, and the scalar-oscillator cross-check), evaluate
//! monitors and checks, and emit frames CSV plus a summary JSON.

use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{
    self, DiagnosticsFrame, GroupKind, MonitorKind, MonitorParams,
    ThresholdReport, TwoSolutionSeries,
};
use crate::error::{Error, Result};
use crate::integrate::{steps_for, CoupledState, FlowModel, Stepper};
use crate::linalg;
use crate::model::{
    build_kappa, build_lt_freq_from_dm, build_lt_freq_from_mm, CouplingPattern, CouplingSpec,
    Ensemble, Manifold, ModelKind, Strengths,
};
use crate::scenario::config::{
    CheckSpec, CompareMode, FrequencyChoice, InitCfg, ScenarioConfig,
};
use crate::scenario::emit;
use crate::scenario::gen::{self, Stream};
use crate::scenario::kuramoto;
use crate::tensor::{frobenius_inner, C64, DenseTensor, IndexVector};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorOutcome {
    pub name: String,
    pub passed: bool,
    pub worst_slack: f64,
    pub tol_rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayOutcome {
    pub rate: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub preset: Option<String>,
    pub verdict: String,
    pub checks: Vec<CheckOutcome>,
    pub monitors: Vec<MonitorOutcome>,
    pub thresholds: Option<ThresholdReport>,
    /// Reference evaluation of the alternative closed-form estimate of the
    /// special-orthogonal basin radius.
    pub so_alpha_displayed: Option<f64>,
    pub decay: Option<DecayOutcome>,
    pub kappa: f64,
    pub initial_l: f64,
    pub final_frame: DiagnosticsFrame,
    pub component_finals: Vec<(f64, f64)>,
    pub frames_written: usize,
    pub steps: usize,
    pub effective_dt: f64,
    pub integrate_sec: f64,
    pub elapsed_sec: f64,
    pub frames_csv: String,
    pub summary_json: String,
    pub config: ScenarioConfig,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

struct Built {
    model: FlowModel,
    init: CoupledState,
    group: Option<GroupKind>,
    kappa: f64,
    thresholds: Option<ThresholdReport>,
    dim_n: usize,
    dim_m: usize,
    d_h: f64,
    d_g: f64,
    /// Common first/second-component generators when the diameters are zero.
    h0: Option<DenseTensor>,
    g0: Option<DenseTensor>,
}

struct CompareData {
    parts: TwoSolutionSeries,
    velocity_sync: Vec<f64>,
    product_drift: Vec<f64>,
    l_at_shift: f64,
}

#[derive(Default)]
struct RunData {
    times: Vec<f64>,
    frames: Vec<DiagnosticsFrame>,
    compare: Option<CompareData>,
    separability: Option<Vec<f64>>,
    dissipation: Option<Vec<f64>>,
    kuramoto_dev: Option<f64>,
    splitting_dev: Option<f64>,
    splitting_diam_dev: Option<f64>,
    gauge_series_dev: Option<f64>,
    gauge_f: Option<f64>,
    final_parts: Vec<Ensemble>,
    steps: usize,
    effective_dt: f64,
    integrate_sec: f64,
}

/// Run one scenario end to end. Validation failures surface as
/// [`Error::Validation`] listing every violated constraint; check and monitor
/// failures yield a "fail" verdict in the summary.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let built = build_system(cfg)?;
    validate_with_data(cfg, &built)?;

    let mut rd = drive(cfg, &built)?;

    // monitors over the sampled series
    let mut monitor_outcomes = Vec::new();
    let params =
        MonitorParams::new(built.kappa, built.dim_n, built.dim_m, built.d_h, built.d_g);
    for kind in &cfg.monitors {
        let (frames_slice, two) = if kind.needs_two_solutions() {
            let cmp = rd.compare.as_ref().expect("validated");
            (&rd.frames[..cmp.parts.f.len()], Some(&cmp.parts))
        } else {
            (&rd.frames[..], None)
        };
        let series = diagnostics::inequality_monitor(*kind, frames_slice, two, &params)?;
        for (i, s) in series.slack.iter().enumerate() {
            rd.frames[i].monitor_slack.insert(kind.name().to_string(), *s);
        }
        if cfg.integrator.hard_monitors && series.violated {
            let (idx, worst) = series
                .slack
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, s)| (i, *s))
                .unwrap_or((0, f64::NAN));
            return Err(Error::MonitorViolation {
                name: kind.name().to_string(),
                t: rd.times[idx],
                slack: worst,
            });
        }
        monitor_outcomes.push(MonitorOutcome {
            name: kind.name().to_string(),
            passed: !series.violated,
            worst_slack: series.worst,
            tol_rel: series.tol_rel,
        });
    }
    // auxiliary series go into the frame slack map so they land in the CSV
    if let Some(sep) = &rd.separability {
        for (i, v) in sep.iter().enumerate() {
            rd.frames[i].monitor_slack.insert("separability".into(), *v);
        }
    }
    if let Some(diss) = &rd.dissipation {
        for (i, v) in diss.iter().enumerate() {
            rd.frames[i].monitor_slack.insert("dissipation".into(), *v);
        }
    }
    if let Some(cmp) = &rd.compare {
        for (i, v) in cmp.parts.f.iter().enumerate() {
            rd.frames[i].f = Some(*v);
        }
    }

    let checks = evaluate_checks(cfg, &built, &rd)?;

    let decay = cfg
        .checks
        .iter()
        .find_map(|c| match c {
            CheckSpec::DecayRateNegative { floor, .. } => Some(*floor),
            _ => None,
        })
        .and_then(|floor| {
            let l: Vec<f64> = rd.frames.iter().map(|f| f.l).collect();
            diagnostics::fit_decay_rate(
                &rd.times,
                &l,
                diagnostics::FitWindow { trailing_fraction: 0.5, floor },
            )
            .ok()
            .map(|(rate, r2)| DecayOutcome { rate, r2 })
        });

    let component_finals = rd
        .final_parts
        .iter()
        .map(diagnostics::diameters)
        .collect::<Result<Vec<_>>>()?;

    let all_checks = checks.iter().all(|c| c.passed);
    let all_monitors = monitor_outcomes.iter().all(|m| m.passed);
    let verdict = if all_checks && all_monitors { "pass" } else { "fail" };

    let stem = cfg.stem();
    let frames_csv = cfg.outputs.frames_path(&stem);
    let summary_json = cfg.outputs.summary_path(&stem);
    let monitor_names: Vec<String> = {
        let mut names: Vec<String> =
            cfg.monitors.iter().map(|k| k.name().to_string()).collect();
        if rd.separability.is_some() {
            names.push("separability".into());
        }
        if rd.dissipation.is_some() {
            names.push("dissipation".into());
        }
        names
    };
    emit::write_frames_csv(&frames_csv, &rd.frames, &monitor_names)?;

    let summary = RunSummary {
        preset: cfg.preset.clone(),
        verdict: verdict.to_string(),
        checks,
        monitors: monitor_outcomes,
        thresholds: built.thresholds.clone(),
        so_alpha_displayed: match built.group {
            Some(GroupKind::SpecialOrthogonal) => {
                Some(diagnostics::so_alpha_displayed(built.dim_n, built.dim_m))
            }
            _ => None,
        },
        decay,
        kappa: built.kappa,
        initial_l: rd.frames.first().map(|f| f.l).unwrap_or(0.0),
        final_frame: rd.frames.last().cloned().expect("at least one frame"),
        component_finals,
        frames_written: rd.frames.len(),
        steps: rd.steps,
        effective_dt: rd.effective_dt,
        integrate_sec: rd.integrate_sec,
        elapsed_sec: started.elapsed().as_secs_f64(),
        frames_csv: frames_csv.display().to_string(),
        summary_json: summary_json.display().to_string(),
        config: cfg.clone(),
    };
    emit::write_json(&summary_json, &summary)?;
    Ok(summary)
}

fn seed_offset(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(tag)
}

fn build_system(cfg: &ScenarioConfig) -> Result<Built> {
    let mut errs = Vec::new();
    if cfg.oscillators < 1 {
        errs.push("oscillators must be at least 1".into());
    }
    if let Err(e) = cfg.integrator.validate() {
        if let Error::Validation(mut v) = e {
            errs.append(&mut v);
        }
    }
    let n_osc = cfg.oscillators;
    let seed = cfg.seed;

    let group = match cfg.model {
        ModelKind::Dum | ModelKind::Mum => Some(GroupKind::Unitary),
        ModelKind::Dsom => Some(GroupKind::SpecialOrthogonal),
        _ => None,
    };

    // dimension parsing
    let dims_ok: bool = match cfg.model {
        ModelKind::Lt => !cfg.dims.is_empty(),
        ModelKind::Sds | ModelKind::Dum | ModelKind::Dsom => cfg.dims.len() == 2,
        ModelKind::Sms | ModelKind::Mum => cfg.dims.len() >= 2,
        ModelKind::Dm => cfg.dims.len() == 4,
        ModelKind::Mm => cfg.dims.len() >= 4 && cfg.dims.len() % 2 == 0,
    };
    if !dims_ok || cfg.dims.iter().any(|&d| d == 0) {
        errs.push(format!("dims {:?} invalid for model {}", cfg.dims, cfg.model));
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }

    let (dim_n, dim_m) = match cfg.model {
        ModelKind::Sds | ModelKind::Dum | ModelKind::Dsom => (cfg.dims[0], cfg.dims[1]),
        ModelKind::Dm => (cfg.dims[0], cfg.dims[2]),
        _ => (cfg.dims[0], *cfg.dims.get(1).unwrap_or(&cfg.dims[0])),
    };

    // frequencies
    let (d_h, d_g) = (cfg.frequency.d_h, cfg.frequency.d_g);
    let mut h0 = None;
    let mut g0 = None;
    let freq_first: Option<Vec<DenseTensor>>;
    let freq_second: Option<Vec<DenseTensor>>;
    let mut freq_list: Option<Vec<Vec<DenseTensor>>> = None;
    match cfg.frequency.kind {
        FrequencyChoice::None => {
            if d_h != 0.0 || d_g != 0.0 {
                return Err(Error::Validation(vec![
                    "frequency diameters require a frequency kind".into(),
                ]));
            }
            freq_first = None;
            freq_second = None;
        }
        FrequencyChoice::Hermitian | FrequencyChoice::Skew => {
            let kind = cfg.frequency.kind.as_freq_kind().expect("checked");
            match cfg.model {
                ModelKind::Mum => {
                    let mut lists = Vec::new();
                    for (p, &d) in cfg.dims.iter().enumerate() {
                        lists.push(gen::gen_frequencies(
                            kind,
                            d,
                            n_osc,
                            d_h,
                            seed_offset(seed, 100 + p as u64),
                        )?);
                    }
                    freq_list = Some(lists);
                    freq_first = None;
                    freq_second = None;
                }
                _ => {
                    let h =
                        gen::gen_frequencies(kind, dim_n, n_osc, d_h, seed_offset(seed, 101))?;
                    let g =
                        gen::gen_frequencies(kind, dim_m, n_osc, d_g, seed_offset(seed, 102))?;
                    if d_h == 0.0 {
                        h0 = Some(h[0].clone());
                    }
                    if d_g == 0.0 {
                        g0 = Some(g[0].clone());
                    }
                    freq_first = Some(h);
                    freq_second = Some(g);
                }
            }
        }
        FrequencyChoice::Rank4 => {
            let mut rng = Stream::new(seed_offset(seed, 103));
            match cfg.model {
                ModelKind::Dm => {
                    let scale = |t: DenseTensor, s: f64| {
                        let norm = t.frob_norm().max(1e-300);
                        t.scale(C64::new(s / norm, 0.0))
                    };
                    let b: Vec<_> = (0..n_osc)
                        .map(|_| {
                            scale(
                                gen::random_skew_rank4(cfg.dims[0], cfg.dims[1], &mut rng, false),
                                d_h,
                            )
                        })
                        .collect();
                    let c: Vec<_> = (0..n_osc)
                        .map(|_| {
                            scale(
                                gen::random_skew_rank4(cfg.dims[2], cfg.dims[3], &mut rng, false),
                                d_g,
                            )
                        })
                        .collect();
                    freq_first = Some(b);
                    freq_second = Some(c);
                }
                ModelKind::Mm => {
                    let m = cfg.dims.len() / 2;
                    let mut lists = Vec::new();
                    for p in 0..m {
                        let (r, c) = (cfg.dims[2 * p], cfg.dims[2 * p + 1]);
                        let list: Vec<_> = (0..n_osc)
                            .map(|_| {
                                let t = gen::random_skew_rank4(r, c, &mut rng, false);
                                let norm = t.frob_norm().max(1e-300);
                                t.scale(C64::new(d_h / norm, 0.0))
                            })
                            .collect();
                        lists.push(list);
                    }
                    freq_list = Some(lists);
                    freq_first = None;
                    freq_second = None;
                }
                _ => {
                    return Err(Error::Validation(vec![
                        "rank4 frequencies apply to the dm and mm models only".into(),
                    ]))
                }
            }
        }
    }

    // coupling
    let c = &cfg.coupling;
    let mut thresholds = None;
    let forms = [c.kappa.is_some(), c.kappa1.is_some() || c.kappa2.is_some(),
        c.kappa_c_multiple.is_some(), c.map.is_some()];
    if forms.iter().filter(|&&b| b).count() != 1 {
        return Err(Error::Validation(vec![
            "exactly one coupling form (kappa | kappa1+kappa2 | kappa_c_multiple | map) required"
                .into(),
        ]));
    }
    let (kappa, kappa_pair) = if let Some(mult) = c.kappa_c_multiple {
        let g = group.ok_or_else(|| {
            Error::Validation(vec!["kappa_c_multiple needs a group model (dum/dsom)".into()])
        })?;
        if mult <= 1.0 {
            return Err(Error::Validation(vec![format!(
                "kappa_c_multiple must exceed 1, got {mult}"
            )]));
        }
        let probe = diagnostics::locking_constants(dim_n, dim_m, d_h, d_g, 1.0, g)
            .map_err(|e| Error::Validation(vec![e.to_string()]))?;
        if probe.kappa_c == 0.0 {
            return Err(Error::Validation(vec![
                "kappa_c_multiple needs positive frequency diameters".into(),
            ]));
        }
        let k = mult * probe.kappa_c;
        thresholds = Some(
            diagnostics::locking_constants(dim_n, dim_m, d_h, d_g, k, g)
                .map_err(|e| Error::Validation(vec![e.to_string()]))?,
        );
        (k, (k, 0.0))
    } else if let Some(k) = c.kappa {
        if k < 0.0 {
            return Err(Error::Validation(vec![format!("kappa must be nonnegative, got {k}")]));
        }
        (k, (k, 0.0))
    } else if c.kappa1.is_some() || c.kappa2.is_some() {
        let k1 = c.kappa1.unwrap_or(0.0);
        let k2 = c.kappa2.unwrap_or(0.0);
        if k1 < 0.0 || k2 < 0.0 {
            return Err(Error::Validation(vec!["kappa1/kappa2 must be nonnegative".into()]));
        }
        (k1 + k2, (k1, k2))
    } else {
        (0.0, (0.0, 0.0)) // map form, tensor model only
    };

    // thresholds for group models without the multiple form (basin data)
    if thresholds.is_none() {
        if let Some(g) = group {
            if !matches!(cfg.model, ModelKind::Mum) {
                thresholds =
                    diagnostics::locking_constants(dim_n, dim_m, d_h, d_g.min(d_h), kappa, g).ok();
            }
        }
    }

    // initial data
    let seed_a = seed_offset(seed, 1);
    let seed_b = seed_offset(seed, 2);
    let init: Vec<Ensemble> = match (&cfg.init, cfg.model) {
        (InitCfg::NearIdentity { l_target }, ModelKind::Dum) => vec![
            gen::gen_near_identity_ensemble(dim_n, n_osc, l_target / 2.0, seed_a, GroupKind::Unitary)?,
            gen::gen_near_identity_ensemble(dim_m, n_osc, l_target / 2.0, seed_b, GroupKind::Unitary)?,
        ],
        (InitCfg::NearIdentity { l_target }, ModelKind::Dsom) => vec![
            gen::gen_near_identity_ensemble(
                dim_n,
                n_osc,
                l_target / 2.0,
                seed_a,
                GroupKind::SpecialOrthogonal,
            )?,
            gen::gen_near_identity_ensemble(
                dim_m,
                n_osc,
                l_target / 2.0,
                seed_b,
                GroupKind::SpecialOrthogonal,
            )?,
        ],
        (InitCfg::NearIdentity { .. }, other) => {
            return Err(Error::Validation(vec![format!(
                "near-identity init applies to group models, not {other}"
            )]))
        }
        (InitCfg::Random { min_inner_product }, ModelKind::Sds) => {
            let ip = min_inner_product.unwrap_or(0.3);
            vec![
                gen::gen_sphere_ensemble(cfg.dims[0], n_osc, ip, seed_a)?,
                gen::gen_sphere_ensemble(cfg.dims[1], n_osc, ip, seed_b)?,
            ]
        }
        (InitCfg::Random { min_inner_product }, ModelKind::Sms) => {
            let ip = min_inner_product.unwrap_or(0.3);
            cfg.dims
                .iter()
                .enumerate()
                .map(|(k, &d)| {
                    gen::gen_sphere_ensemble(d, n_osc, ip, seed_offset(seed, 10 + k as u64))
                })
                .collect::<Result<Vec<_>>>()?
        }
        (InitCfg::Random { .. }, ModelKind::Dum) => {
            if dim_n == 1 && dim_m == 1 {
                vec![
                    gen::gen_phase_ensemble(n_osc, seed_a)?,
                    gen::gen_phase_ensemble(n_osc, seed_b)?,
                ]
            } else {
                vec![
                    gen::gen_unitary_ensemble(dim_n, n_osc, seed_a)?,
                    gen::gen_unitary_ensemble(dim_m, n_osc, seed_b)?,
                ]
            }
        }
        (InitCfg::Random { .. }, ModelKind::Dsom) => vec![
            gen::gen_so_ensemble(dim_n, n_osc, seed_a)?,
            gen::gen_so_ensemble(dim_m, n_osc, seed_b)?,
        ],
        (InitCfg::Random { .. }, ModelKind::Dm) => vec![
            gen::gen_unit_norm_ensemble(
                &cfg.dims[0..2],
                n_osc,
                seed_a,
                ModelKind::Dm,
                Manifold::RectUnitNorm,
            )?,
            gen::gen_unit_norm_ensemble(
                &cfg.dims[2..4],
                n_osc,
                seed_b,
                ModelKind::Dm,
                Manifold::RectUnitNorm,
            )?,
        ],
        (InitCfg::Random { .. }, ModelKind::Mm) => (0..cfg.dims.len() / 2)
            .map(|p| {
                gen::gen_unit_norm_ensemble(
                    &cfg.dims[2 * p..2 * p + 2],
                    n_osc,
                    seed_offset(seed, 10 + p as u64),
                    ModelKind::Mm,
                    Manifold::RectUnitNorm,
                )
            })
            .collect::<Result<Vec<_>>>()?,
        (InitCfg::Random { .. }, ModelKind::Mum) => cfg
            .dims
            .iter()
            .enumerate()
            .map(|(p, &d)| gen::gen_unitary_ensemble(d, n_osc, seed_offset(seed, 10 + p as u64)))
            .collect::<Result<Vec<_>>>()?,
        (InitCfg::Random { .. }, ModelKind::Lt) => vec![gen::gen_unit_norm_ensemble(
            &cfg.dims,
            n_osc,
            seed_a,
            ModelKind::Lt,
            Manifold::UnitNormTensor,
        )?],
        (InitCfg::File { path }, _) => {
            // JSON layout: one list of states per component
            let text = std::fs::read_to_string(path)?;
            let components: Vec<Vec<DenseTensor>> = serde_json::from_str(&text)?;
            let (model, manifold, expected) = match cfg.model {
                ModelKind::Lt => (ModelKind::Lt, Manifold::UnitNormTensor, 1),
                ModelKind::Dum => (ModelKind::Dum, Manifold::Unitary, 2),
                ModelKind::Dsom => (ModelKind::Dsom, Manifold::SpecialOrthogonal, 2),
                other => {
                    return Err(Error::Validation(vec![format!(
                        "file init supports the lt, dum, and dsom layouts, not {other}"
                    )]))
                }
            };
            if components.len() != expected {
                return Err(Error::Validation(vec![format!(
                    "file init for {} needs {expected} component lists, found {}",
                    cfg.model,
                    components.len()
                )]));
            }
            components
                .into_iter()
                .map(|states| Ensemble::new(states, model, manifold))
                .collect::<Result<Vec<_>>>()?
        }
    };
    gen::ensure_generated_feasible(&init)?;

    // model assembly
    let model = match cfg.model {
        ModelKind::Lt => {
            let map = c.map.as_ref().ok_or_else(|| {
                Error::Validation(vec!["tensor-model runs take coupling.map".into()])
            })?;
            let mut parsed = std::collections::BTreeMap::new();
            for (k, &v) in map {
                parsed.insert(IndexVector::parse(k)?, v);
            }
            FlowModel::Lt { coupling: CouplingSpec::from_map(parsed)?, freq: None }
        }
        ModelKind::Sds => FlowModel::Sds { kappa, omega: freq_first, lambda: freq_second },
        ModelKind::Sms => FlowModel::Sms { kappa },
        ModelKind::Dm => FlowModel::Dm {
            kappa1: kappa_pair.0,
            kappa2: kappa_pair.1,
            b: freq_first,
            c: freq_second,
        },
        ModelKind::Dum => FlowModel::Dum { kappa, h: freq_first, g: freq_second },
        ModelKind::Dsom => FlowModel::Dsom { kappa, omega: freq_first, psi: freq_second },
        ModelKind::Mm => {
            FlowModel::Mm { kappa1: kappa_pair.0, kappa2: kappa_pair.1, b: freq_list }
        }
        ModelKind::Mum => FlowModel::Mum { kappa, h: freq_list },
    };

    Ok(Built {
        model,
        init: CoupledState::new(init),
        group,
        kappa,
        thresholds,
        dim_n,
        dim_m,
        d_h,
        d_g,
        h0,
        g0,
    })
}

/// Hypothesis validation that needs the generated data. Collects every
/// violated constraint instead of stopping at the first.
fn validate_with_data(cfg: &ScenarioConfig, built: &Built) -> Result<()> {
    let mut errs: Vec<String> = Vec::new();

    if let Err(e) = cfg.integrator.check_retraction(&built.init.parts) {
        if let Error::Validation(mut v) = e {
            errs.append(&mut v);
        }
    }

    let l0 = diagnostics::l_total(&built.init.parts).unwrap_or(f64::NAN);

    // monitor hypotheses
    for m in &cfg.monitors {
        match m {
            MonitorKind::LTotal | MonitorKind::DComponents | MonitorKind::SComponents => {
                if cfg.model != ModelKind::Dum {
                    errs.push(format!("monitor {} applies to the dum model", m.name()));
                } else {
                    if built.d_h != 0.0 || built.d_g != 0.0 {
                        errs.push(format!(
                            "monitor {} needs a homogeneous run (zero frequency diameters)",
                            m.name()
                        ));
                    }
                    match diagnostics::alpha_threshold(built.dim_n, built.dim_m, GroupKind::Unitary)
                    {
                        Err(e) => errs.push(e.to_string()),
                        Ok(alpha) => {
                            if *m == MonitorKind::LTotal && l0 >= alpha {
                                errs.push(format!(
                                    "initial total functional {l0:.6} is outside the basin (alpha = {alpha:.6})"
                                ));
                            }
                        }
                    }
                }
            }
            MonitorKind::SoTotal => {
                if cfg.model != ModelKind::Dsom {
                    errs.push("monitor so-total applies to the dsom model".into());
                }
            }
            MonitorKind::FTotal | MonitorKind::DDissimilarity | MonitorKind::SDissimilarity => {
                if cfg.compare.is_none() {
                    errs.push(format!("monitor {} needs a compare section", m.name()));
                }
                if cfg.model != ModelKind::Dum {
                    errs.push(format!("monitor {} applies to the dum model", m.name()));
                }
            }
        }
    }

    // compare alignment
    if let Some(cmp) = &cfg.compare {
        let interval = cfg.integrator.dt * cfg.integrator.sample_every as f64;
        if cmp.mode == CompareMode::TimeShift {
            let ratio = cmp.shift / interval;
            if (ratio - ratio.round()).abs() > 1e-9 || cmp.shift <= 0.0 {
                errs.push(format!(
                    "time shift {} must be a positive multiple of the sample interval {}",
                    cmp.shift, interval
                ));
            }
        }
        if !matches!(cfg.model, ModelKind::Dum | ModelKind::Dsom) {
            errs.push("compare runs apply to the dum and dsom models".into());
        }
        if let Some(h) = cmp.horizon {
            if h > cfg.integrator.t_end {
                errs.push("compare horizon exceeds t_end".into());
            }
        }
    }

    // basin hypothesis against nu2 when the critical-coupling form is used
    if cfg.coupling.kappa_c_multiple.is_some() {
        if let Some(report) = &built.thresholds {
            if let Some((_, _, nu2)) = report.nu {
                if l0 >= nu2 {
                    errs.push(format!(
                        "initial total functional {l0:.6} is not below nu2 = {nu2:.6}"
                    ));
                }
            } else {
                errs.push("coupling did not clear the critical threshold".into());
            }
        }
    }

    if cfg.separability && !matches!(cfg.model, ModelKind::Dm | ModelKind::Mm) {
        errs.push("separability co-integration applies to the dm and mm models".into());
    }

    // check-specific hypotheses
    for check in &cfg.checks {
        match check {
            CheckSpec::KuramotoMatch { .. } => {
                if cfg.model != ModelKind::Dum || built.dim_n != 1 || built.dim_m != 1 {
                    errs.push("kuramoto-match needs the 1x1 dum model".into());
                }
                if built.d_h != 0.0 || built.d_g != 0.0 || cfg.frequency.kind != FrequencyChoice::None
                {
                    errs.push("kuramoto-match needs zero generators".into());
                }
            }
            CheckSpec::SplittingMatch { .. } => {
                if cfg.model != ModelKind::Dum {
                    errs.push("splitting-match applies to the dum model".into());
                }
                if built.h0.is_none() || built.g0.is_none() {
                    errs.push(
                        "splitting-match needs common generators (hermitian kind, zero diameters)"
                            .into(),
                    );
                }
            }
            CheckSpec::GaugeInvariance { .. } => {
                if !matches!(cfg.model, ModelKind::Dum | ModelKind::Dsom) {
                    errs.push("gauge-invariance applies to the group models".into());
                }
            }
            CheckSpec::DissipationMatches { .. } => {
                if cfg.model != ModelKind::Dm || cfg.frequency.kind != FrequencyChoice::None {
                    errs.push("dissipation-matches needs the dm model with zero generators".into());
                }
            }
            CheckSpec::FMonotoneBelow { .. }
            | CheckSpec::ProductDriftBelow { .. }
            | CheckSpec::VelocityBound {}
            | CheckSpec::ShiftWithinBasin {} => {
                if cfg.compare.is_none() {
                    errs.push(format!("{} needs a compare section", check.name()));
                }
            }
            CheckSpec::SeparabilityBelow { .. } => {
                if !cfg.separability {
                    errs.push("separability-below needs separability = true".into());
                }
            }
            _ => {}
        }
    }

    // sphere hypotheses
    if matches!(cfg.model, ModelKind::Sds | ModelKind::Sms) {
        for (k, part) in built.init.parts.iter().enumerate() {
            let mut min_ip = f64::INFINITY;
            for i in 0..part.len() {
                for j in i + 1..part.len() {
                    min_ip = min_ip.min(
                        frobenius_inner(&part.states()[i], &part.states()[j])
                            .map(|z| z.re)
                            .unwrap_or(f64::NEG_INFINITY),
                    );
                }
            }
            if part.len() > 1 && min_ip <= 0.0 {
                errs.push(format!(
                    "component {k}: minimum pairwise inner product {min_ip:.4} must be positive"
                ));
            }
        }
    }

    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errs))
    }
}

fn sampled_steps(cfg: &ScenarioConfig) -> Result<usize> {
    steps_for(cfg.integrator.t_end, cfg.integrator.dt)
}

fn drive(cfg: &ScenarioConfig, built: &Built) -> Result<RunData> {
    let t0 = Instant::now();
    let mut rd = match (&cfg.compare, cfg.separability) {
        (Some(cmp), false) => match cmp.mode {
            CompareMode::TimeShift => drive_time_shift(cfg, built, cmp.shift)?,
            CompareMode::Independent => drive_independent(cfg, built, cmp.seed2)?,
        },
        (None, true) => drive_separability(cfg, built)?,
        (None, false) => drive_plain(cfg, built)?,
        (Some(_), true) => {
            return Err(Error::Validation(vec![
                "compare and separability cannot be combined".into(),
            ]))
        }
    };
    rd.integrate_sec = t0.elapsed().as_secs_f64();
    Ok(rd)
}

/// Single-system run, with optional lockstep twins for the splitting, gauge,
/// and scalar-oscillator checks.
fn drive_plain(cfg: &ScenarioConfig, built: &Built) -> Result<RunData> {
    let wants = |f: fn(&CheckSpec) -> bool| cfg.checks.iter().any(f);
    let want_kuramoto = wants(|c| matches!(c, CheckSpec::KuramotoMatch { .. }));
    let want_splitting = wants(|c| matches!(c, CheckSpec::SplittingMatch { .. }));
    let want_gauge = wants(|c| matches!(c, CheckSpec::GaugeInvariance { .. }));
    let is_dm_energy = wants(|c| matches!(c, CheckSpec::DissipationMatches { .. }));

    let n_steps = sampled_steps(cfg)?;
    let mut main = Stepper::new(&built.model, built.init.clone(), &cfg.integrator)?;

    // splitting twin: same initial data under zero generators
    let zero_model = FlowModel::Dum { kappa: built.kappa, h: None, g: None };
    let mut split_twin = if want_splitting {
        Some(Stepper::new(&zero_model, built.init.clone(), &cfg.integrator)?)
    } else {
        None
    };

    // gauge twin: right-translated initial data under the same flow
    let mut gauge_rng = Stream::new(seed_offset(cfg.seed, 77));
    let translators: Vec<DenseTensor> = built
        .init
        .parts
        .iter()
        .map(|p| match p.manifold() {
            Manifold::SpecialOrthogonal => {
                gen::random_special_orthogonal(p.shape()[0], &mut gauge_rng)
            }
            _ => gen::random_unitary(p.shape()[0], &mut gauge_rng),
        })
        .collect();
    let mut gauge_twin = if want_gauge {
        let parts = built
            .init
            .parts
            .iter()
            .zip(&translators)
            .map(|(p, r)| gen::right_translate(p, r))
            .collect::<Result<Vec<_>>>()?;
        Some(Stepper::new(&built.model, CoupledState::new(parts), &cfg.integrator)?)
    } else {
        None
    };

    // scalar-oscillator reference samples
    let kuramoto_samples = if want_kuramoto {
        let phases: Vec<f64> = built
            .init
            .parts
            .iter()
            .map(|p| p.states().iter().map(|s| s.data()[0].arg()).collect::<Vec<f64>>())
            .fold(vec![0.0; cfg.oscillators], |acc, part| {
                acc.iter().zip(&part).map(|(a, b)| a + b).collect()
            });
        Some(kuramoto::integrate_phases(
            &phases,
            4.0 * built.kappa,
            cfg.integrator.dt,
            n_steps,
            cfg.integrator.sample_every,
        ))
    } else {
        None
    };

    let mut rd = RunData::default();
    let mut kuramoto_dev: f64 = 0.0;
    let mut splitting_dev: f64 = 0.0;
    let mut splitting_diam_dev: f64 = 0.0;
    let mut gauge_series_dev: f64 = 0.0;
    let mut gauge_f: f64 = 0.0;
    let mut diss = Vec::new();
    let mut sample_index = 0usize;

    let mut sample = |st: &CoupledState,
                      t: f64,
                      split: Option<&CoupledState>,
                      gauge: Option<&CoupledState>|
     -> Result<()> {
        let frame = diagnostics::frame_for(&built.model, &st.parts, t)?;
        if is_dm_energy {
            if let FlowModel::Dm { kappa1, kappa2, .. } = &built.model {
                diss.push(diagnostics::dissipation_sum(
                    &st.parts[0],
                    &st.parts[1],
                    *kappa1,
                    *kappa2,
                )?);
            }
        }
        if let (Some(samples), Some(_)) = (&kuramoto_samples, Some(())) {
            let ref_phases = &samples[sample_index.min(samples.len() - 1)];
            for (j, &psi) in ref_phases.iter().enumerate() {
                let z = st.parts[0].states()[j].data()[0] * st.parts[1].states()[j].data()[0];
                let want = C64::new(psi.cos(), psi.sin());
                kuramoto_dev = kuramoto_dev.max((z - want).norm());
            }
        }
        if let Some(tw) = split {
            let (h0, g0) = (built.h0.as_ref().unwrap(), built.g0.as_ref().unwrap());
            for (idx, gen0) in [(0usize, h0), (1usize, g0)] {
                let rot = linalg::matrix_exp(&gen0.scale(C64::new(0.0, -t)))?;
                for (u, u0) in st.parts[idx].states().iter().zip(tw.parts[idx].states()) {
                    let want = linalg::matmul(&rot, u0)?;
                    splitting_dev = splitting_dev.max(u.sub(&want)?.frob_norm());
                }
            }
            let f_tw = diagnostics::frame_for(&zero_model, &tw.parts, t)?;
            for (a, b) in [
                (frame.d_u, f_tw.d_u),
                (frame.d_v, f_tw.d_v),
                (frame.s_u, f_tw.s_u),
                (frame.s_v, f_tw.s_v),
            ] {
                splitting_diam_dev = splitting_diam_dev.max((a - b).abs());
            }
        }
        if let Some(tw) = gauge {
            let f_tw = diagnostics::frame_for(&built.model, &tw.parts, t)?;
            for (a, b) in [
                (frame.d_u, f_tw.d_u),
                (frame.d_v, f_tw.d_v),
                (frame.s_u, f_tw.s_u),
                (frame.s_v, f_tw.s_v),
                (frame.l, f_tw.l),
            ] {
                gauge_series_dev = gauge_series_dev.max((a - b).abs());
            }
            if st.parts.len() == 2 {
                let f = diagnostics::dissimilarity_functional(
                    (&st.parts[0], &st.parts[1]),
                    (&tw.parts[0], &tw.parts[1]),
                )?;
                gauge_f = gauge_f.max(f);
            }
        }
        rd.times.push(t);
        rd.frames.push(frame);
        sample_index += 1;
        Ok(())
    };

    sample(
        main.state(),
        0.0,
        split_twin.as_ref().map(|s| s.state()),
        gauge_twin.as_ref().map(|s| s.state()),
    )?;
    let budget = cfg.integrator.wall_budget_sec;
    let wall = Instant::now();
    for step in 1..=n_steps {
        main.advance()?;
        if let Some(tw) = split_twin.as_mut() {
            tw.advance()?;
        }
        if let Some(tw) = gauge_twin.as_mut() {
            tw.advance()?;
        }
        if step % cfg.integrator.sample_every == 0 || step == n_steps {
            let t = main.t();
            sample(
                main.state(),
                t,
                split_twin.as_ref().map(|s| s.state()),
                gauge_twin.as_ref().map(|s| s.state()),
            )?;
        }
        if step % 512 == 0 && wall.elapsed().as_secs_f64() > budget {
            return Err(Error::BudgetExceeded { budget, t: main.t() });
        }
    }

    rd.effective_dt = main.effective_dt();
    rd.steps = n_steps;
    rd.kuramoto_dev = want_kuramoto.then_some(kuramoto_dev);
    rd.splitting_dev = want_splitting.then_some(splitting_dev);
    rd.splitting_diam_dev = want_splitting.then_some(splitting_diam_dev);
    rd.gauge_series_dev = want_gauge.then_some(gauge_series_dev);
    rd.gauge_f = want_gauge.then_some(gauge_f);
    rd.dissipation = is_dm_energy.then_some(diss);
    rd.final_parts = main.into_state().parts;
    Ok(rd)
}

/// Time-shift comparison: run [0, shift] alone, then advance the tail
/// [shift, shift + horizon] in lockstep with a replay of [0, horizon] from
/// the initial state. The replay reproduces the stored prefix bit for bit, so
/// comparing (replay at τ, main at shift + τ) is exactly the pair
/// (U(τ), U(τ + T)).
fn drive_time_shift(cfg: &ScenarioConfig, built: &Built, shift: f64) -> Result<RunData> {
    let cmp = cfg.compare.as_ref().expect("caller");
    let horizon = cmp.horizon.unwrap_or(cfg.integrator.t_end);
    let shift_steps = steps_for(shift, cfg.integrator.dt)?;
    let horizon_steps = steps_for(horizon, cfg.integrator.dt)?;
    let every = cfg.integrator.sample_every;

    let mut rd = RunData::default();
    let mut main = Stepper::new(&built.model, built.init.clone(), &cfg.integrator)?;
    let budget = cfg.integrator.wall_budget_sec;
    let wall = Instant::now();

    // phase A: [0, shift]
    rd.times.push(0.0);
    rd.frames.push(diagnostics::frame_for(&built.model, &built.init.parts, 0.0)?);
    for step in 1..=shift_steps {
        main.advance()?;
        if step % every == 0 {
            rd.times.push(main.t());
            rd.frames.push(diagnostics::frame_for(&built.model, main.state().parts.as_slice(), main.t())?);
        }
        if step % 512 == 0 && wall.elapsed().as_secs_f64() > budget {
            return Err(Error::BudgetExceeded { budget, t: main.t() });
        }
    }
    let l_at_shift = rd.frames.last().expect("frames").l;

    // phase B: lockstep tail + replay
    let mut replay = Stepper::new(&built.model, built.init.clone(), &cfg.integrator)?;
    let mut series = TwoSolutionSeries::default();
    let mut velocity_sync = Vec::new();
    let mut product_drift = Vec::new();

    let mut compare_sample = |base: &CoupledState, ahead: &CoupledState| -> Result<()> {
        let parts = diagnostics::dissimilarity_components(
            (&base.parts[0], &base.parts[1]),
            (&ahead.parts[0], &ahead.parts[1]),
        )?;
        series.d_u.push(parts.d_u);
        series.d_v.push(parts.d_v);
        series.s_u.push(parts.s_u);
        series.s_v.push(parts.s_v);
        series.f.push(parts.total());
        series.l_tilde.push(diagnostics::l_total(&ahead.parts)?);
        let lm = diagnostics::locking_metrics(&built.model, &base.parts, Some(&ahead.parts))?;
        velocity_sync.push(lm.velocity_sync.unwrap_or(0.0));
        product_drift.push(lm.product_drift);
        Ok(())
    };

    compare_sample(replay.state(), main.state())?;
    for step in 1..=horizon_steps {
        main.advance()?;
        replay.advance()?;
        if step % every == 0 || step == horizon_steps {
            rd.times.push(main.t());
            rd.frames.push(diagnostics::frame_for(
                &built.model,
                main.state().parts.as_slice(),
                main.t(),
            )?);
            compare_sample(replay.state(), main.state())?;
        }
        if step % 512 == 0 && wall.elapsed().as_secs_f64() > budget {
            return Err(Error::BudgetExceeded { budget, t: main.t() });
        }
    }

    rd.effective_dt = main.effective_dt();
    rd.steps = shift_steps + horizon_steps;
    rd.compare = Some(CompareData { parts: series, velocity_sync, product_drift, l_at_shift });
    rd.final_parts = replay.into_state().parts;
    Ok(rd)
}

/// Two seeded runs advanced in lockstep over [0, t_end].
fn drive_independent(cfg: &ScenarioConfig, built: &Built, seed2: Option<u64>) -> Result<RunData> {
    let mut cfg2 = cfg.clone();
    cfg2.seed = seed2.unwrap_or(cfg.seed.wrapping_add(1));
    cfg2.compare = None;
    let built2 = build_system(&cfg2)?;
    let n_steps = sampled_steps(cfg)?;
    let every = cfg.integrator.sample_every;

    let mut rd = RunData::default();
    let mut a = Stepper::new(&built.model, built.init.clone(), &cfg.integrator)?;
    let mut b = Stepper::new(&built2.model, built2.init.clone(), &cfg.integrator)?;
    let mut series = TwoSolutionSeries::default();
    let mut velocity_sync = Vec::new();
    let mut product_drift = Vec::new();

    let sample = |a: &Stepper, b: &Stepper, t: f64,
                      rd: &mut RunData,
                      series: &mut TwoSolutionSeries,
                      velocity_sync: &mut Vec<f64>,
                      product_drift: &mut Vec<f64>|
     -> Result<()> {
        rd.times.push(t);
        rd.frames.push(diagnostics::frame_for(&built.model, &a.state().parts, t)?);
        let parts = diagnostics::dissimilarity_components(
            (&a.state().parts[0], &a.state().parts[1]),
            (&b.state().parts[0], &b.state().parts[1]),
        )?;
        series.d_u.push(parts.d_u);
        series.d_v.push(parts.d_v);
        series.s_u.push(parts.s_u);
        series.s_v.push(parts.s_v);
        series.f.push(parts.total());
        series.l_tilde.push(diagnostics::l_total(&b.state().parts)?);
        let lm =
            diagnostics::locking_metrics(&built.model, &a.state().parts, Some(&b.state().parts))?;
        velocity_sync.push(lm.velocity_sync.unwrap_or(0.0));
        product_drift.push(lm.product_drift);
        Ok(())
    };

    sample(&a, &b, 0.0, &mut rd, &mut series, &mut velocity_sync, &mut product_drift)?;
    for step in 1..=n_steps {
        a.advance()?;
        b.advance()?;
        if step % every == 0 || step == n_steps {
            let t = a.t();
            sample(&a, &b, t, &mut rd, &mut series, &mut velocity_sync, &mut product_drift)?;
        }
    }
    let l_at_shift = series.l_tilde.first().copied().unwrap_or(0.0);
    rd.effective_dt = a.effective_dt();
    rd.steps = n_steps;
    rd.compare = Some(CompareData { parts: series, velocity_sync, product_drift, l_at_shift });
    rd.final_parts = a.into_state().parts;
    Ok(rd)
}

/// Component run in lockstep with the full tensor flow built from the same
/// data, recording the factorization residual at every sample.
fn drive_separability(cfg: &ScenarioConfig, built: &Built) -> Result<RunData> {
    let n_steps = sampled_steps(cfg)?;
    let every = cfg.integrator.sample_every;

    // tensor twin: product states, matching coupling pattern, embedded freq
    let parts = &built.init.parts;
    let m = parts.len();
    let products: Vec<DenseTensor> = (0..cfg.oscillators)
        .map(|j| {
            let mut t = parts[0].states()[j].clone();
            for p in &parts[1..] {
                t = crate::tensor::tensor_product(&t, &p.states()[j]);
            }
            t
        })
        .collect();
    let t_ens = Ensemble::new(products, ModelKind::Lt, Manifold::UnitNormTensor)?;

    let (pattern, k1, k2, freq) = match &built.model {
        FlowModel::Dm { kappa1, kappa2, b, c } => {
            let freq = match (b, c) {
                (Some(b), Some(c)) => Some(
                    b.iter()
                        .zip(c)
                        .map(|(bj, cj)| build_lt_freq_from_dm(bj, cj))
                        .collect::<Result<Vec<_>>>()?,
                ),
                _ => None,
            };
            (CouplingPattern::Dm, *kappa1, *kappa2, freq)
        }
        FlowModel::Mm { kappa1, kappa2, b } => {
            let freq = match b {
                Some(b) => Some(
                    (0..cfg.oscillators)
                        .map(|j| {
                            let per_osc: Vec<DenseTensor> =
                                b.iter().map(|list| list[j].clone()).collect();
                            build_lt_freq_from_mm(&per_osc)
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            (CouplingPattern::Mm, *kappa1, *kappa2, freq)
        }
        _ => unreachable!("validated"),
    };
    let coupling = build_kappa(pattern, m, Strengths::Pair(k1, k2))?;
    let lt_model = FlowModel::Lt { coupling, freq };

    let mut rd = RunData::default();
    let mut main = Stepper::new(&built.model, built.init.clone(), &cfg.integrator)?;
    let mut twin =
        Stepper::new(&lt_model, CoupledState::new(vec![t_ens]), &cfg.integrator)?;
    let mut residuals = Vec::new();

    let mut sample = |main_st: &CoupledState, twin_st: &CoupledState, t: f64| -> Result<()> {
        rd.times.push(t);
        let mut frame = diagnostics::frame_for(&built.model, &main_st.parts, t)?;
        frame.v_lt = Some(diagnostics::potential_lt(&twin_st.parts[0])?);
        rd.frames.push(frame);
        residuals.push(diagnostics::separability_residual(&twin_st.parts[0], &main_st.parts)?);
        Ok(())
    };

    sample(main.state(), twin.state(), 0.0)?;
    let budget = cfg.integrator.wall_budget_sec;
    let wall = Instant::now();
    for step in 1..=n_steps {
        main.advance()?;
        twin.advance()?;
        if step % every == 0 || step == n_steps {
            sample(main.state(), twin.state(), main.t())?;
        }
        if step % 512 == 0 && wall.elapsed().as_secs_f64() > budget {
            return Err(Error::BudgetExceeded { budget, t: main.t() });
        }
    }
    rd.effective_dt = main.effective_dt();
    rd.steps = n_steps;
    rd.separability = Some(residuals);
    rd.final_parts = main.into_state().parts;
    Ok(rd)
}

fn evaluate_checks(cfg: &ScenarioConfig, built: &Built, rd: &RunData) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, observed: f64, limit: f64, detail: String| {
        out.push(CheckOutcome { name: name.into(), passed, observed, limit, detail });
    };
    let l: Vec<f64> = rd.frames.iter().map(|f| f.l).collect();

    for check in &cfg.checks {
        match check {
            CheckSpec::DefectBelow { tol } => {
                let worst = rd.frames.iter().map(|f| f.defect).fold(0.0_f64, f64::max);
                push(check.name(), worst < *tol, worst, *tol, "max feasibility defect".into());
            }
            CheckSpec::EnergyNonincreasing { tol } => {
                let mut worst = f64::NEG_INFINITY;
                for w in rd.frames.windows(2) {
                    worst = worst.max(w[1].e - w[0].e);
                }
                push(
                    check.name(),
                    worst <= *tol,
                    worst,
                    *tol,
                    "max frame-to-frame potential increase".into(),
                );
            }
            CheckSpec::DissipationMatches { rel_tol } => {
                let diss = rd.dissipation.as_ref().expect("validated");
                let e: Vec<f64> = rd.frames.iter().map(|f| f.e).collect();
                let h = rd.times[1] - rd.times[0];
                let dmax = diss.iter().copied().fold(0.0_f64, f64::max);
                let floor = 1e-10 * dmax.max(1.0);
                let mut worst: f64 = 0.0;
                for i in 1..e.len() - 1 {
                    let cdiff = (e[i + 1] - e[i - 1]) / (2.0 * h);
                    let rel = (cdiff + diss[i]).abs() / diss[i].abs().max(floor);
                    worst = worst.max(rel);
                }
                push(
                    check.name(),
                    worst < *rel_tol,
                    worst,
                    *rel_tol,
                    "worst relative mismatch of -dE/dt vs dissipation sum".into(),
                );
            }
            CheckSpec::LFinalBelow { abs, rel_to_initial } => {
                let lf = *l.last().unwrap_or(&f64::NAN);
                let limit = match (abs, rel_to_initial) {
                    (Some(a), _) => *a,
                    (None, Some(r)) => r * l[0],
                    (None, None) => f64::NAN,
                };
                push(check.name(), lf < limit, lf, limit, format!("L(0) = {:.6e}", l[0]));
            }
            CheckSpec::LMonotoneAfter { t0, tol } => {
                let mut worst = f64::NEG_INFINITY;
                for i in 0..l.len() - 1 {
                    if rd.times[i] >= *t0 {
                        worst = worst.max(l[i + 1] - l[i]);
                    }
                }
                push(
                    check.name(),
                    worst <= *tol,
                    worst,
                    *tol,
                    format!("max increase after t = {t0}"),
                );
            }
            CheckSpec::DecayRateNegative { min_r2, floor } => {
                match diagnostics::fit_decay_rate(
                    &rd.times,
                    &l,
                    diagnostics::FitWindow { trailing_fraction: 0.5, floor: *floor },
                ) {
                    Ok((rate, r2)) => push(
                        check.name(),
                        rate < 0.0 && r2 > *min_r2,
                        rate,
                        *min_r2,
                        format!("r2 = {r2:.6}"),
                    ),
                    Err(e) => push(check.name(), false, f64::NAN, *min_r2, e.to_string()),
                }
            }
            CheckSpec::FMonotoneBelow { threshold } => {
                let cmp = rd.compare.as_ref().expect("validated");
                let f = &cmp.parts.f;
                let peak = f
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                let cross = f.iter().skip(peak).position(|&v| v <= *threshold);
                let last = *f.last().unwrap_or(&f64::NAN);
                let (passed, detail) = match cross {
                    None => (false, "never crossed the threshold".to_string()),
                    Some(off) => {
                        let cross = peak + off;
                        let mut monotone = true;
                        for i in peak..cross {
                            if f[i + 1] > f[i] * (1.0 + 1e-12) + 1e-15 {
                                monotone = false;
                            }
                        }
                        (
                            monotone && last <= *threshold,
                            format!("peak sample {peak}, crossing sample {cross}"),
                        )
                    }
                };
                push(check.name(), passed, last, *threshold, detail);
            }
            CheckSpec::ProductDriftBelow { tol } => {
                let cmp = rd.compare.as_ref().expect("validated");
                let last = *cmp.product_drift.last().unwrap_or(&f64::NAN);
                push(check.name(), last < *tol, last, *tol, "relative-product drift at t_end".into());
            }
            CheckSpec::VelocityBound {} => {
                let cmp = rd.compare.as_ref().expect("validated");
                let scale = 2.0 * built.kappa * (built.dim_n + built.dim_m) as f64;
                let mut worst = f64::NEG_INFINITY;
                for (v, f) in cmp.velocity_sync.iter().zip(&cmp.parts.f) {
                    // rounding guard: both sides live at the noise floor late
                    let bound = scale * (f * (1.0 + 1e-6) + 1e-14);
                    worst = worst.max(v - bound);
                }
                push(
                    check.name(),
                    worst <= 0.0,
                    worst,
                    0.0,
                    format!("max velocity_sync excess over {scale:.3e} * F"),
                );
            }
            CheckSpec::ComponentDiametersBelow { tol } => {
                let mut worst: f64 = 0.0;
                for part in &rd.final_parts {
                    let (d, _s) = diagnostics::diameters(part)?;
                    worst = worst.max(d);
                }
                push(check.name(), worst < *tol, worst, *tol, "max component diameter at t_end".into());
            }
            CheckSpec::KuramotoMatch { tol } => {
                let dev = rd.kuramoto_dev.expect("validated");
                push(check.name(), dev < *tol, dev, *tol, "max deviation from scalar phases".into());
            }
            CheckSpec::SplittingMatch { tol } => {
                let dev = rd.splitting_dev.expect("validated");
                let diam = rd.splitting_diam_dev.expect("validated");
                push(
                    check.name(),
                    dev < *tol && diam < *tol,
                    dev.max(diam),
                    *tol,
                    format!("state dev {dev:.3e}, diameter dev {diam:.3e}"),
                );
            }
            CheckSpec::GaugeInvariance { tol } => {
                let dev = rd.gauge_series_dev.expect("validated");
                let f = rd.gauge_f.expect("validated");
                push(
                    check.name(),
                    dev < *tol && f < *tol,
                    dev.max(f),
                    *tol,
                    format!("series dev {dev:.3e}, dissimilarity {f:.3e}"),
                );
            }
            CheckSpec::RuntimeBelow { seconds } => {
                push(
                    check.name(),
                    rd.integrate_sec < *seconds,
                    rd.integrate_sec,
                    *seconds,
                    "integration wall time".into(),
                );
            }
            CheckSpec::SeparabilityBelow { tol } => {
                let worst =
                    rd.separability.as_ref().expect("validated").iter().fold(0.0_f64, |a, &b| a.max(b));
                push(check.name(), worst < *tol, worst, *tol, "max factorization residual".into());
            }
            CheckSpec::ShiftWithinBasin {} => {
                let cmp = rd.compare.as_ref().expect("validated");
                let nu2 = built
                    .thresholds
                    .as_ref()
                    .and_then(|t| t.nu.map(|(_, _, n2)| n2))
                    .unwrap_or(f64::NAN);
                push(
                    check.name(),
                    cmp.l_at_shift <= nu2,
                    cmp.l_at_shift,
                    nu2,
                    "L at the comparison shift".into(),
                );
            }
        }
    }
    Ok(out)
}
