//! Aggregation functionals, emergence thresholds, and runtime inequality
//! monitors: diameters D and S, the total functional L, the two-solution
//! dissimilarity F, the product and tensor potentials, the threshold
//! constants (alpha, kappa_c, s_*, nu roots), and finite-difference slack
//! series for the differential inequalities the flows are expected to obey.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::FlowModel;
use crate::linalg;
use crate::model::Ensemble;
use crate::tensor::{frobenius_inner, tensor_product, C64, DenseTensor};

/// One sampled time point of a run.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsFrame {
    pub t: f64,
    pub d_u: f64,
    pub d_v: f64,
    pub s_u: f64,
    pub s_v: f64,
    /// Total aggregation functional, summed over all components.
    pub l: f64,
    /// Two-solution dissimilarity, present on comparison runs.
    pub f: Option<f64>,
    /// Product potential over the components.
    pub e: f64,
    /// Tensor potential, present on full-tensor runs.
    pub v_lt: Option<f64>,
    /// Worst feasibility defect across components.
    pub defect: f64,
    pub monitor_slack: BTreeMap<String, f64>,
}

/// (D, S): max pairwise Frobenius distance and max inner-product defect
/// against the manifold's reference norm (n for the n×n groups, 1 for
/// unit-norm states).
pub fn diameters(ens: &Ensemble) -> Result<(f64, f64)> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let reference = ens.reference_norm();
    let states = ens.states();
    let mut d: f64 = 0.0;
    let mut s: f64 = 0.0;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let diff = states[i].sub(&states[j])?.frob_norm();
            let inner = frobenius_inner(&states[i], &states[j])?;
            let defect = (C64::new(reference, 0.0) - inner).norm();
            d = d.max(diff);
            s = s.max(defect);
        }
    }
    Ok((d, s))
}

/// L = D(U) + D(V) + S(U) + S(V).
pub fn total_functional(u: &Ensemble, v: &Ensemble) -> Result<f64> {
    let (du, su) = diameters(u)?;
    let (dv, sv) = diameters(v)?;
    Ok(du + dv + su + sv)
}

/// Total aggregation functional over any number of components.
pub fn l_total(parts: &[Ensemble]) -> Result<f64> {
    let mut acc = 0.0;
    for p in parts {
        let (d, s) = diameters(p)?;
        acc += d + s;
    }
    Ok(acc)
}

/// The four summands of the two-solution dissimilarity.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct DissimilarityParts {
    pub d_u: f64,
    pub d_v: f64,
    pub s_u: f64,
    pub s_v: f64,
}

impl DissimilarityParts {
    pub fn total(&self) -> f64 {
        self.d_u + self.d_v + self.s_u + self.s_v
    }
}

/// d(U,Ũ) = max ‖U_iU_j† − Ũ_iŨ_j†‖_F and S(U,Ũ) = max |⟨U_i,U_j⟩ − ⟨Ũ_i,Ũ_j⟩|
/// for both components.
pub fn dissimilarity_components(
    sol: (&Ensemble, &Ensemble),
    other: (&Ensemble, &Ensemble),
) -> Result<DissimilarityParts> {
    let d_u = pair_product_distance(sol.0, other.0)?;
    let d_v = pair_product_distance(sol.1, other.1)?;
    let s_u = pair_inner_distance(sol.0, other.0)?;
    let s_v = pair_inner_distance(sol.1, other.1)?;
    Ok(DissimilarityParts { d_u, d_v, s_u, s_v })
}

/// F = d(U,Ũ) + d(V,Ṽ) + S(U,Ũ) + S(V,Ṽ).
pub fn dissimilarity_functional(
    sol: (&Ensemble, &Ensemble),
    other: (&Ensemble, &Ensemble),
) -> Result<f64> {
    Ok(dissimilarity_components(sol, other)?.total())
}

fn pair_product_distance(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} oscillators", a.len()),
            found: format!("{} oscillators", b.len()),
        });
    }
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            let p = linalg::matmul_adjoint(&a.states()[i], &a.states()[j])?;
            let q = linalg::matmul_adjoint(&b.states()[i], &b.states()[j])?;
            worst = worst.max(p.sub(&q)?.frob_norm());
        }
    }
    Ok(worst)
}

fn pair_inner_distance(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            let p = frobenius_inner(&a.states()[i], &a.states()[j])?;
            let q = frobenius_inner(&b.states()[i], &b.states()[j])?;
            worst = worst.max((p - q).norm());
        }
    }
    Ok(worst)
}

const HERMITIAN_RESIDUAL_TOL: f64 = 1e-12;

/// Product potential 1 − (1/N²) Σ_{i,j} ∏_k ⟨U_i^k, U_j^k⟩. The double sum is
/// Hermitian-symmetric, so its imaginary part must vanish; the residual is
/// asserted below 1e−12.
pub fn potential_product(components: &[Ensemble]) -> Result<f64> {
    if components.len() < 2 {
        return Err(Error::ComponentCount { needed: 2, got: components.len() });
    }
    potential_over(components)
}

/// Tensor potential 1 − (1/N²) Σ_{i,j} ⟨T_i, T_j⟩.
pub fn potential_lt(ens: &Ensemble) -> Result<f64> {
    potential_over(std::slice::from_ref(ens))
}

fn potential_over(components: &[Ensemble]) -> Result<f64> {
    let n = components[0].len();
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let mut prod = C64::new(1.0, 0.0);
            for c in components {
                prod *= frobenius_inner(&c.states()[i], &c.states()[j])?;
            }
            acc += prod;
        }
    }
    let val = acc / C64::new((n * n) as f64, 0.0);
    debug_assert!(
        val.im.abs() < HERMITIAN_RESIDUAL_TOL,
        "Hermitian symmetry violated: imaginary residual {}",
        val.im
    );
    if val.im.abs() >= HERMITIAN_RESIDUAL_TOL {
        return Err(Error::FrequencyStructure(format!(
            "potential has imaginary residual {:.3e}",
            val.im
        )));
    }
    Ok(1.0 - val.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    Unitary,
    SpecialOrthogonal,
}

/// Linear coefficient of the decay polynomials: m − 4√n on the unitary
/// groups, plain m on the special orthogonal groups.
fn decay_margin(n: f64, m: f64, group: GroupKind) -> Result<f64> {
    match group {
        GroupKind::Unitary => {
            let margin = m - 4.0 * n.sqrt();
            if margin <= 0.0 {
                return Err(Error::DimensionCondition(format!(
                    "unitary sizes must satisfy n >= m > 4*sqrt(n); got n = {n}, m = {m}, 4*sqrt(n) = {}",
                    4.0 * n.sqrt()
                )));
            }
            Ok(margin)
        }
        GroupKind::SpecialOrthogonal => Ok(m),
    }
}

/// Unique positive root of f(s) = (2n + 8/3)s² + (4n + 9)s − 2·margin, the
/// basin radius of the complete-aggregation theorems.
pub fn alpha_threshold(n: usize, m: usize, group: GroupKind) -> Result<f64> {
    if m > n || m == 0 {
        return Err(Error::DimensionCondition(format!(
            "sizes must satisfy n >= m >= 1, got n = {n}, m = {m}"
        )));
    }
    let (nf, mf) = (n as f64, m as f64);
    let margin = decay_margin(nf, mf, group)?;
    let a = 2.0 * nf + 8.0 / 3.0;
    let b = 4.0 * nf + 9.0;
    let c = 2.0 * margin;
    // stable positive quadratic root
    Ok(2.0 * c / (b + (b * b + 4.0 * a * c).sqrt()))
}

/// Alternative closed-form estimate of the special-orthogonal basin radius;
/// reported alongside the rooted value, which is what the library uses.
pub fn so_alpha_displayed(n: usize, m: usize) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let t = 12.0 * nf + 27.0;
    (-t + (t * t + 24.0 * mf * (3.0 * nf + 4.0)).sqrt()) / (4.0 * (4.0 * nf + 3.0))
}

/// Threshold constants of the phase-locking analysis.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub alpha: f64,
    pub kappa_c: f64,
    pub s_star: f64,
    /// (ν₀, ν₁, ν₂) roots of g(s) = 2(1+3√n)·D_H/κ, absent when κ ≤ κ_c.
    pub nu: Option<(f64, f64, f64)>,
    pub group: GroupKind,
}

/// Cubic g(s) = 2·margin·s − (4n+9)s² − (2n+8/3)s³.
fn g_poly(s: f64, n: f64, margin: f64) -> f64 {
    2.0 * margin * s - (4.0 * n + 9.0) * s * s - (2.0 * n + 8.0 / 3.0) * s * s * s
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // invariant: f(lo) and f(hi) have opposite signs
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-15 * (1.0 + mid.abs()) {
            return mid;
        }
        let fm = f(mid);
        if (fm >= 0.0) == (flo >= 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// s_*, κ_c, and when κ > κ_c the three roots ν₀ < 0 < ν₁ < ν₂ of
/// g(s) = 2(1+3√n)·D_H/κ, found by bracketed bisection to 1e−12.
pub fn locking_constants(
    n: usize,
    m: usize,
    d_h: f64,
    d_g: f64,
    kappa: f64,
    group: GroupKind,
) -> Result<ThresholdReport> {
    if m > n {
        return Err(Error::DimensionCondition(format!(
            "normalization requires n >= m, got n = {n}, m = {m}"
        )));
    }
    if d_g > d_h {
        return Err(Error::DimensionCondition(format!(
            "normalization requires D_H >= D_G, got D_H = {d_h}, D_G = {d_g}"
        )));
    }
    let (nf, mf) = (n as f64, m as f64);
    let margin = decay_margin(nf, mf, group)?;
    let alpha = alpha_threshold(n, m, group)?;
    // s_* is the positive critical point of g: (6n+8)s² + 2(4n+9)s − 2·margin = 0
    let b = 4.0 * nf + 9.0;
    let s_star = 2.0 * margin / (b + (b * b + 2.0 * (6.0 * nf + 8.0) * margin).sqrt());
    let g_max = g_poly(s_star, nf, margin);
    let drive = 2.0 * (1.0 + 3.0 * nf.sqrt());
    let kappa_c = if d_h == 0.0 { 0.0 } else { drive * d_h / g_max };

    let nu = if d_h == 0.0 {
        // g(s) = -s f(s): roots are 0, alpha, and the negative root of f.
        let a2 = 2.0 * nf + 8.0 / 3.0;
        let neg = (-b - (b * b + 8.0 * a2 * margin).sqrt()) / (2.0 * a2);
        Some((neg, 0.0, alpha))
    } else if kappa > kappa_c {
        let level = drive * d_h / kappa;
        let p = |s: f64| g_poly(s, nf, margin) - level;
        let nu1 = bisect(0.0, s_star, &p);
        let nu2 = bisect(s_star, alpha, &p);
        let mut lo = -1.0;
        while p(lo) < 0.0 {
            lo *= 2.0;
            if lo < -1e9 {
                return Err(Error::UnreachableTarget("negative root bracket failed".into()));
            }
        }
        let nu0 = bisect(lo, 0.0, &p);
        Some((nu0, nu1, nu2))
    } else {
        None
    };

    Ok(ThresholdReport { alpha, kappa_c, s_star, nu, group })
}

/// Differential-inequality monitors, named for the series they bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonitorKind {
    /// Total functional decay on the unitary pair flow (homogeneous case).
    #[serde(rename = "l-total", alias = "Z-9")]
    LTotal,
    /// Two-solution dissimilarity decay on the unitary pair flow.
    #[serde(rename = "f-total", alias = "Z-55")]
    FTotal,
    /// Per-component diameter inequalities.
    #[serde(rename = "d-components", alias = "AA-2")]
    DComponents,
    /// Per-component inner-product inequalities.
    #[serde(rename = "s-components", alias = "AA-12")]
    SComponents,
    /// Relative-product dissimilarity inequalities (two solutions).
    #[serde(rename = "d-dissimilarity", alias = "BB-0")]
    DDissimilarity,
    /// Gram dissimilarity inequalities (two solutions).
    #[serde(rename = "s-dissimilarity", alias = "BB-14")]
    SDissimilarity,
    /// Special-orthogonal totals (L, and F when a companion run exists).
    #[serde(rename = "so-total", alias = "Y-15")]
    SoTotal,
}

impl MonitorKind {
    pub fn name(&self) -> &'static str {
        match self {
            MonitorKind::LTotal => "l-total",
            MonitorKind::FTotal => "f-total",
            MonitorKind::DComponents => "d-components",
            MonitorKind::SComponents => "s-components",
            MonitorKind::DDissimilarity => "d-dissimilarity",
            MonitorKind::SDissimilarity => "s-dissimilarity",
            MonitorKind::SoTotal => "so-total",
        }
    }

    /// Monitors that only make sense with a companion (second solution).
    pub fn needs_two_solutions(&self) -> bool {
        matches!(
            self,
            MonitorKind::FTotal | MonitorKind::DDissimilarity | MonitorKind::SDissimilarity
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonitorParams {
    pub kappa: f64,
    pub dim_n: f64,
    pub dim_m: f64,
    pub d_h: f64,
    pub d_g: f64,
    /// Relative tolerance: violated when slack < −tol·max(1, |bound|).
    pub tol_rel: f64,
}

impl MonitorParams {
    pub fn new(kappa: f64, dim_n: usize, dim_m: usize, d_h: f64, d_g: f64) -> Self {
        Self { kappa, dim_n: dim_n as f64, dim_m: dim_m as f64, d_h, d_g, tol_rel: 1e-3 }
    }

    /// Derive dimensions and strengths from a flow and its state parts.
    pub fn infer(model: &FlowModel, parts: &[Ensemble]) -> Self {
        let kappa = model.kappa_scale();
        let dim_n = parts.first().map(|p| p.shape()[0]).unwrap_or(1);
        let dim_m = parts.get(1).map(|p| p.shape()[0]).unwrap_or(dim_n);
        let (d_h, d_g) = match model {
            FlowModel::Dum { h, g, .. } => (freq_diameter(h.as_deref()), freq_diameter(g.as_deref())),
            FlowModel::Dsom { omega, psi, .. } => {
                (freq_diameter(omega.as_deref()), freq_diameter(psi.as_deref()))
            }
            _ => (0.0, 0.0),
        };
        Self::new(kappa, dim_n, dim_m, d_h, d_g)
    }
}

/// max_ij ‖H_i − H_j‖_∞ over an oscillator family of generators.
pub fn freq_diameter(freq: Option<&[DenseTensor]>) -> f64 {
    let Some(freq) = freq else { return 0.0 };
    let mut worst: f64 = 0.0;
    for i in 0..freq.len() {
        for j in i + 1..freq.len() {
            if let Ok(diff) = freq[i].sub(&freq[j]) {
                worst = worst.max(linalg::op_inf_norm(&diff));
            }
        }
    }
    worst
}

/// Companion series for two-solution monitors.
#[derive(Debug, Clone, Default)]
pub struct TwoSolutionSeries {
    pub d_u: Vec<f64>,
    pub d_v: Vec<f64>,
    pub s_u: Vec<f64>,
    pub s_v: Vec<f64>,
    pub f: Vec<f64>,
    /// L of the companion solution at the same sample times.
    pub l_tilde: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MonitorSeries {
    pub kind: MonitorKind,
    pub slack: Vec<f64>,
    pub worst: f64,
    pub violated: bool,
    pub tol_rel: f64,
}

fn finite_difference(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    d[0] = (values[1] - values[0]) / h;
    d[n - 1] = (values[n - 1] - values[n - 2]) / h;
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    d
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    let h = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1e-30) {
            return Err(Error::NonUniformSampling);
        }
    }
    Ok(h)
}

/// Slack series bound(t) − d/dt(series)(t) for one differential inequality,
/// with the derivative taken by central differences on the sampled values
/// (one-sided at the ends). Negative slack beyond −tol·max(1, |bound|) flags
/// a violation.
pub fn inequality_monitor(
    kind: MonitorKind,
    frames: &[DiagnosticsFrame],
    two: Option<&TwoSolutionSeries>,
    params: &MonitorParams,
) -> Result<MonitorSeries> {
    if frames.len() < 3 {
        return Err(Error::InsufficientFrames(frames.len()));
    }
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let h = uniform_step(&times)?;
    let k = params.kappa;
    let n = params.dim_n;
    let m = params.dim_m;
    let rn = n.sqrt();
    let rm = m.sqrt();

    let l: Vec<f64> = frames.iter().map(|f| f.l).collect();
    let d_u: Vec<f64> = frames.iter().map(|f| f.d_u).collect();
    let d_v: Vec<f64> = frames.iter().map(|f| f.d_v).collect();
    let s_u: Vec<f64> = frames.iter().map(|f| f.s_u).collect();
    let s_v: Vec<f64> = frames.iter().map(|f| f.s_v).collect();

    // L̄ = max(L, L̃) for the two-solution bounds.
    let l_bar = |i: usize| -> f64 {
        match two {
            Some(t) if !t.l_tilde.is_empty() => l[i].max(t.l_tilde[i]),
            _ => l[i],
        }
    };

    let mut sub: Vec<(Vec<f64>, Box<dyn Fn(usize) -> f64>)> = Vec::new();
    match kind {
        MonitorKind::LTotal => {
            let bound = move |lv: f64| {
                k * (-2.0 * (m - 4.0 * rn) * lv + (4.0 * n + 9.0) * lv * lv
                    + (2.0 * n + 8.0 / 3.0) * lv * lv * lv)
            };
            let lc = l.clone();
            sub.push((l.clone(), Box::new(move |i| bound(lc[i]))));
        }
        MonitorKind::SoTotal => {
            let d_om = params.d_h;
            let bound = move |lv: f64| {
                2.0 * (1.0 + 3.0 * rn) * d_om
                    + k * (-2.0 * m * lv + (4.0 * n + 9.0) * lv * lv
                        + (2.0 * n + 8.0 / 3.0) * lv * lv * lv)
            };
            let lc = l.clone();
            sub.push((l.clone(), Box::new(move |i| bound(lc[i]))));
            if let Some(t) = two {
                let f = t.f.clone();
                let lb: Vec<f64> = (0..frames.len()).map(l_bar).collect();
                let dmax = params.d_h.max(params.d_g);
                sub.push((
                    t.f.clone(),
                    Box::new(move |i| {
                        -k * (2.0 * m - dmax / k) * f[i]
                            + k * (4.0 * n + 22.0) * lb[i] * f[i]
                            + 20.0 * k * lb[i] * lb[i] * f[i]
                    }),
                ));
            }
        }
        MonitorKind::FTotal => {
            let t = two.ok_or_else(|| {
                Error::FrequencyStructure("monitor needs a companion solution".into())
            })?;
            let f = t.f.clone();
            let lb: Vec<f64> = (0..frames.len()).map(l_bar).collect();
            let dmax = params.d_h.max(params.d_g);
            sub.push((
                t.f.clone(),
                Box::new(move |i| {
                    -k * (2.0 * m - 8.0 * rn - dmax / k) * f[i]
                        + k * (4.0 * n + 22.0) * lb[i] * f[i]
                        + 20.0 * k * lb[i] * lb[i] * f[i]
                }),
            ));
        }
        MonitorKind::DComponents => {
            let (duc, svc) = (d_u.clone(), s_v.clone());
            sub.push((
                d_u.clone(),
                Box::new(move |i| {
                    k * (-2.0 * m * duc[i]
                        + m * duc[i].powi(3)
                        + 6.0 * svc[i] * duc[i]
                        + 2.0 * svc[i] * duc[i] * duc[i]
                        + 4.0 * rn * svc[i])
                }),
            ));
            let (dvc, suc) = (d_v.clone(), s_u.clone());
            sub.push((
                d_v.clone(),
                Box::new(move |i| {
                    k * (-2.0 * n * dvc[i]
                        + n * dvc[i].powi(3)
                        + 6.0 * suc[i] * dvc[i]
                        + 2.0 * suc[i] * dvc[i] * dvc[i]
                        + 4.0 * rm * suc[i])
                }),
            ));
        }
        MonitorKind::SComponents => {
            let (duc, suc, svc) = (d_u.clone(), s_u.clone(), s_v.clone());
            sub.push((
                s_u.clone(),
                Box::new(move |i| {
                    k * (-2.0 * m * suc[i]
                        + 2.0 * m * duc[i] * duc[i]
                        + 6.0 * suc[i] * svc[i]
                        + 2.0 * svc[i] * duc[i] * duc[i]
                        + 4.0 * rn * svc[i])
                }),
            ));
            let (dvc, suc, svc) = (d_v.clone(), s_u.clone(), s_v.clone());
            sub.push((
                s_v.clone(),
                Box::new(move |i| {
                    k * (-2.0 * n * svc[i]
                        + 2.0 * n * dvc[i] * dvc[i]
                        + 6.0 * suc[i] * svc[i]
                        + 2.0 * suc[i] * dvc[i] * dvc[i]
                        + 4.0 * rm * suc[i])
                }),
            ));
        }
        MonitorKind::DDissimilarity => {
            let t = two.ok_or_else(|| {
                Error::FrequencyStructure("monitor needs a companion solution".into())
            })?;
            let lb: Vec<f64> = (0..frames.len()).map(l_bar).collect();
            let (duc, svc, lbc) = (t.d_u.clone(), t.s_v.clone(), lb.clone());
            sub.push((
                t.d_u.clone(),
                Box::new(move |i| {
                    k * (-2.0 * m * duc[i]
                        + 4.0 * m * lbc[i] * duc[i]
                        + 6.0 * lbc[i] * (duc[i] + svc[i])
                        + 2.0 * lbc[i] * lbc[i] * (4.0 * duc[i] + svc[i])
                        + 4.0 * rn * svc[i])
                }),
            ));
            let (dvc, suc, lbc) = (t.d_v.clone(), t.s_u.clone(), lb);
            sub.push((
                t.d_v.clone(),
                Box::new(move |i| {
                    k * (-2.0 * n * dvc[i]
                        + 4.0 * n * lbc[i] * dvc[i]
                        + 6.0 * lbc[i] * (dvc[i] + suc[i])
                        + 2.0 * lbc[i] * lbc[i] * (4.0 * dvc[i] + suc[i])
                        + 4.0 * rm * suc[i])
                }),
            ));
        }
        MonitorKind::SDissimilarity => {
            let t = two.ok_or_else(|| {
                Error::FrequencyStructure("monitor needs a companion solution".into())
            })?;
            let lb: Vec<f64> = (0..frames.len()).map(l_bar).collect();
            let (duc, suc, svc, lbc) =
                (t.d_u.clone(), t.s_u.clone(), t.s_v.clone(), lb.clone());
            let dh = params.d_h;
            sub.push((
                t.s_u.clone(),
                Box::new(move |i| {
                    -2.0 * m * k * suc[i]
                        + 4.0 * k * lbc[i] * duc[i]
                        + dh * duc[i]
                        + 6.0 * k * lbc[i] * (suc[i] + svc[i])
                        + 8.0 * k * lbc[i] * lbc[i] * duc[i]
                        + 2.0 * k * lbc[i] * lbc[i] * svc[i]
                        + 4.0 * k * rn * svc[i]
                }),
            ));
            let (dvc, suc, svc, lbc) = (t.d_v.clone(), t.s_u.clone(), t.s_v.clone(), lb);
            let dg = params.d_g;
            sub.push((
                t.s_v.clone(),
                Box::new(move |i| {
                    -2.0 * n * k * svc[i]
                        + 4.0 * k * lbc[i] * dvc[i]
                        + dg * dvc[i]
                        + 6.0 * k * lbc[i] * (svc[i] + suc[i])
                        + 8.0 * k * lbc[i] * lbc[i] * dvc[i]
                        + 2.0 * k * lbc[i] * lbc[i] * suc[i]
                        + 4.0 * k * rm * suc[i]
                }),
            ));
        }
    }

    let len = frames.len();
    let mut slack = vec![f64::INFINITY; len];
    let mut worst = f64::INFINITY;
    let mut violated = false;
    for (series, bound) in &sub {
        if series.len() != len {
            return Err(Error::NonUniformSampling);
        }
        let deriv = finite_difference(series, h);
        for i in 0..len {
            let b = bound(i);
            let s = b - deriv[i];
            if s < slack[i] {
                slack[i] = s;
            }
            worst = worst.min(s);
            // One-sided endpoint differences carry O(h) bias; only interior
            // samples count toward the verdict.
            if i > 0 && i + 1 < len && s < -params.tol_rel * b.abs().max(1.0) {
                violated = true;
            }
        }
    }
    Ok(MonitorSeries { kind, slack, worst, violated, tol_rel: params.tol_rel })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LockingMetrics {
    /// max_j ‖i U̇_j U_j† − i Ũ̇_j Ũ_j†‖_F over all square components; needs a
    /// companion solution.
    pub velocity_sync: Option<f64>,
    /// max_ij ‖d/dt (U_i U_j†)‖_F over all square components.
    pub product_drift: f64,
}

/// Velocity synchronization and relative-product drift, both evaluated from
/// the model right-hand side at the given states.
pub fn locking_metrics(
    model: &FlowModel,
    parts: &[Ensemble],
    tilde: Option<&[Ensemble]>,
) -> Result<LockingMetrics> {
    let derivs = model.derivatives(parts)?;
    let mut product_drift: f64 = 0.0;
    for (ens, d) in parts.iter().zip(&derivs) {
        let states = ens.states();
        for i in 0..states.len() {
            for j in 0..states.len() {
                let a = linalg::matmul_adjoint(&d[i], &states[j])?;
                let b = linalg::matmul_adjoint(&states[i], &d[j])?;
                product_drift = product_drift.max(a.add(&b)?.frob_norm());
            }
        }
    }
    let velocity_sync = match tilde {
        None => None,
        Some(other) => {
            let derivs2 = model.derivatives(other)?;
            let mut worst: f64 = 0.0;
            for ((ens, d), (ens2, d2)) in
                parts.iter().zip(&derivs).zip(other.iter().zip(&derivs2))
            {
                for j in 0..ens.len() {
                    let a = linalg::matmul_adjoint(&d[j], &ens.states()[j])?;
                    let b = linalg::matmul_adjoint(&d2[j], &ens2.states()[j])?;
                    worst = worst.max(a.sub(&b)?.frob_norm());
                }
            }
            Some(worst)
        }
    };
    Ok(LockingMetrics { velocity_sync, product_drift })
}

/// max_j ‖T_j − U_j¹ ⊗ ⋯ ⊗ U_j^m‖_F.
pub fn separability_residual(t_ens: &Ensemble, components: &[Ensemble]) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = t_ens.len();
    for c in components {
        if c.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} oscillators"),
                found: format!("{} oscillators", c.len()),
            });
        }
    }
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut prod = components[0].states()[j].clone();
        for c in &components[1..] {
            prod = tensor_product(&prod, &c.states()[j]);
        }
        worst = worst.max(t_ens.states()[j].sub(&prod)?.frob_norm());
    }
    Ok(worst)
}

/// Decay-fit window: the trailing fraction of the samples that sit above the
/// resolvable floor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitWindow {
    pub trailing_fraction: f64,
    /// Samples at or below this value are dropped before windowing (the
    /// series has hit the double-precision floor there).
    pub floor: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { trailing_fraction: 0.5, floor: 0.0 }
    }
}

/// Least-squares slope and r² of log(values) against time on the window.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: FitWindow) -> Result<(f64, f64)> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::InsufficientFrames(times.len()));
    }
    let cut = values.iter().position(|&v| v <= window.floor).unwrap_or(values.len());
    if cut < 2 {
        return Err(Error::NonpositiveValues);
    }
    let start = ((cut as f64) * (1.0 - window.trailing_fraction)).floor() as usize;
    let (ts, vs) = (&times[start..cut], &values[start..cut]);
    if vs.len() < 2 {
        return Err(Error::NonpositiveValues);
    }
    if vs.iter().any(|&v| v <= 0.0) {
        return Err(Error::NonpositiveValues);
    }
    let logs: Vec<f64> = vs.iter().map(|&v| v.ln()).collect();
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, l) in ts.iter().zip(&logs) {
        sxx += (t - tm) * (t - tm);
        sxy += (t - tm) * (l - lm);
    }
    if sxx == 0.0 {
        return Err(Error::NonpositiveValues);
    }
    let slope = sxy / sxx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, l) in ts.iter().zip(&logs) {
        let fitted = lm + slope * (t - tm);
        ss_res += (l - fitted) * (l - fitted);
        ss_tot += (l - lm) * (l - lm);
    }
    let r2 = if ss_tot < 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, r2))
}

/// Dissipation rate of the product potential for the homogeneous two-matrix
/// flow: the four squared-norm sums that equal −dE/dt along the flow.
pub fn dissipation_sum(u: &Ensemble, v: &Ensemble, kappa1: f64, kappa2: f64) -> Result<f64> {
    let n = u.len() as f64;
    let mut total = 0.0;
    for (a, b, k) in [(u, v, kappa1), (u, v, kappa2)] {
        let _ = (a, b, k);
    }
    let cu = inner_mat(u)?;
    let cv = inner_mat(v)?;
    for (ens, weights) in [(u, &cv), (v, &cu)] {
        for j in 0..ens.len() {
            let m_j = weighted_mean_pub(ens, &weights[j]);
            let w = linalg::matmul_adjoint(&m_j, &ens.states()[j])?;
            let y = linalg::adjoint_matmul(&ens.states()[j], &m_j)?;
            let w_skew = w.sub(&linalg::adjoint(&w)?)?;
            let y_skew = y.sub(&linalg::adjoint(&y)?)?;
            total += kappa1 / n * w_skew.frob_norm().powi(2);
            total += kappa2 / n * y_skew.frob_norm().powi(2);
        }
    }
    Ok(total)
}

fn inner_mat(ens: &Ensemble) -> Result<Vec<Vec<C64>>> {
    let n = ens.len();
    let mut c = vec![vec![C64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for k in 0..n {
            c[j][k] = frobenius_inner(&ens.states()[j], &ens.states()[k])?;
        }
    }
    Ok(c)
}

fn weighted_mean_pub(ens: &Ensemble, weights: &[C64]) -> DenseTensor {
    let n = ens.len() as f64;
    let mut acc = DenseTensor::zeros(ens.shape().to_vec());
    for (s, &w) in ens.states().iter().zip(weights) {
        acc.axpy(w / C64::new(n, 0.0), s);
    }
    acc
}

/// Build the diagnostics frame for a sampled state of any single-system run.
pub fn frame_for(model: &FlowModel, parts: &[Ensemble], t: f64) -> Result<DiagnosticsFrame> {
    let (d_u, s_u) = diameters(&parts[0])?;
    let (d_v, s_v) =
        if parts.len() > 1 { diameters(&parts[1])? } else { (0.0, 0.0) };
    let l = l_total(parts)?;
    let e = if parts.len() >= 2 { potential_product(parts)? } else { potential_lt(&parts[0])? };
    let v_lt = if model.is_lt() { Some(potential_lt(&parts[0])?) } else { None };
    let mut defect: f64 = 0.0;
    for p in parts {
        defect = defect.max(p.feasibility_defect()?);
    }
    Ok(DiagnosticsFrame {
        t,
        d_u,
        d_v,
        s_u,
        s_v,
        l,
        f: None,
        e,
        v_lt,
        defect,
        monitor_slack: BTreeMap::new(),
    })
}
