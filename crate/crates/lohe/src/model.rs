//! Right-hand sides of the tensor aggregation model and its reductions:
//! swarm double/multi sphere, double/multi matrix, and the unitary and
//! special-orthogonal matrix flows, plus the coupling patterns and free-flow
//! tensor constructions that embed each reduction back into the full model.
//!
//! Every rhs is a pure function of (states, frequencies, couplings) returning
//! raw tangent vectors; projection back to the manifold is the integrator's
//! job.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{
    contract_freq, cubic_coupling_term, frobenius_inner, C64, DenseTensor, IndexVector, I, ZERO,
};

/// Default feasibility tolerance for manifold membership checks.
pub const MANIFOLD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lt,
    Sds,
    Sms,
    Dm,
    Dum,
    Dsom,
    Mm,
    Mum,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Lt => "lt",
            ModelKind::Sds => "sds",
            ModelKind::Sms => "sms",
            ModelKind::Dm => "dm",
            ModelKind::Dum => "dum",
            ModelKind::Dsom => "dsom",
            ModelKind::Mm => "mm",
            ModelKind::Mum => "mum",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Manifold {
    UnitNormTensor,
    Sphere,
    Unitary,
    SpecialOrthogonal,
    RectUnitNorm,
}

impl Manifold {
    /// Squared Frobenius norm of a feasible state; the reference value of the
    /// inner-product aggregation functional.
    pub fn reference_norm(&self, shape: &[usize]) -> f64 {
        match self {
            Manifold::Unitary | Manifold::SpecialOrthogonal => shape[0] as f64,
            _ => 1.0,
        }
    }
}

/// Ordered collection of same-shape oscillator states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ensemble {
    states: Vec<DenseTensor>,
    model: ModelKind,
    manifold: Manifold,
}

impl Ensemble {
    pub fn new(states: Vec<DenseTensor>, model: ModelKind, manifold: Manifold) -> Result<Self> {
        Self::with_tolerance(states, model, manifold, MANIFOLD_TOL)
    }

    pub fn with_tolerance(
        states: Vec<DenseTensor>,
        model: ModelKind,
        manifold: Manifold,
        tol: f64,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let shape = states[0].shape().to_vec();
        for s in &states {
            if s.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: format!("{shape:?}"),
                    found: format!("{:?}", s.shape()),
                });
            }
        }
        let ens = Self { states, model, manifold };
        let defect = ens.feasibility_defect()?;
        if defect > tol {
            return Err(Error::OffManifold { defect, tol });
        }
        Ok(ens)
    }

    /// Construction without the feasibility check; used for integrator stage
    /// values, which leave the manifold by design.
    pub(crate) fn unchecked(
        states: Vec<DenseTensor>,
        model: ModelKind,
        manifold: Manifold,
    ) -> Self {
        Self { states, model, manifold }
    }

    pub fn states(&self) -> &[DenseTensor] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        self.states[0].shape()
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn reference_norm(&self) -> f64 {
        self.manifold.reference_norm(self.shape())
    }

    /// Distance of the worst state from the manifold: norm defect for sphere
    /// and unit-norm manifolds, ‖I − UU†‖_F for the matrix groups (plus
    /// imaginary-part and determinant checks for the real orthogonal group).
    pub fn feasibility_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in &self.states {
            let d = match self.manifold {
                Manifold::UnitNormTensor | Manifold::Sphere | Manifold::RectUnitNorm => {
                    (s.frob_norm() - 1.0).abs()
                }
                Manifold::Unitary => linalg::gram_defect(s)?,
                Manifold::SpecialOrthogonal => {
                    let imag: f64 =
                        s.data().iter().map(|z| z.im.abs()).fold(0.0_f64, |a, b| a.max(b));
                    let unit = linalg::gram_defect(s)?;
                    let det = linalg::determinant(s)?;
                    let detdef = if det.re <= 0.0 { 2.0 } else { 0.0 };
                    imag.max(unit).max(detdef)
                }
            };
            worst = worst.max(d);
        }
        Ok(worst)
    }

    pub(crate) fn replace_states(&self, states: Vec<DenseTensor>) -> Self {
        Self { states, model: self.model, manifold: self.manifold }
    }
}

/// Map from index vectors to nonnegative coupling strengths, together with
/// the reduced parameters the pattern was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    full_map: BTreeMap<IndexVector, f64>,
    reduced: Option<(f64, f64)>,
    merged: Option<f64>,
    pattern: Option<(CouplingPattern, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingPattern {
    Dm,
    Mm,
    Sms,
}

/// Reduced coupling strengths accepted by [`build_kappa`].
#[derive(Debug, Clone, Copy)]
pub enum Strengths {
    Single(f64),
    Pair(f64, f64),
}

impl CouplingSpec {
    pub fn from_map(map: BTreeMap<IndexVector, f64>) -> Result<Self> {
        for (&_, &v) in map.iter().map(|(k, v)| (k, v)) {
            if v < 0.0 {
                return Err(Error::NegativeCoupling(v));
            }
        }
        let lens: Vec<usize> = map.keys().map(|k| k.len()).collect();
        if let Some(&first) = lens.first() {
            if lens.iter().any(|&l| l != first) {
                return Err(Error::IndexEntry);
            }
        }
        Ok(Self { full_map: map, reduced: None, merged: None, pattern: None })
    }

    pub fn strength(&self, iv: &IndexVector) -> f64 {
        self.full_map.get(iv).copied().unwrap_or(0.0)
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (&IndexVector, f64)> {
        self.full_map.iter().filter(|(_, &v)| v != 0.0).map(|(k, &v)| (k, v))
    }

    pub fn map(&self) -> &BTreeMap<IndexVector, f64> {
        &self.full_map
    }

    pub fn reduced(&self) -> Option<(f64, f64)> {
        self.reduced
    }

    pub fn merged(&self) -> Option<f64> {
        self.merged
    }

    /// Bit length of the index vectors.
    pub fn index_len(&self) -> Option<usize> {
        self.full_map.keys().next().map(|k| k.len())
    }

    /// Re-derive the map from the stored pattern and confirm agreement.
    pub fn validate_pattern(&self) -> Result<()> {
        if let (Some((pattern, m)), Some((k1, k2))) = (self.pattern, self.reduced) {
            let rebuilt = build_kappa(pattern, m, Strengths::Pair(k1, k2))?;
            if rebuilt.full_map != self.full_map {
                return Err(Error::FrequencyStructure(
                    "coupling map disagrees with its generating pattern".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Coupling patterns of the model reductions.
///
/// * `Dm` (m = 2): κ₁ on (0,1,1,1) and (1,1,0,1); κ₂ on (1,0,1,1) and (1,1,1,0).
/// * `Mm`: κ₁ on every vector of {0,1}^{2m} with a single 0 at an odd
///   position, κ₂ with a single 0 at an even position.
/// * `Sms`: κ on each one-hot vector of {0,1}^m.
pub fn build_kappa(pattern: CouplingPattern, m: usize, strengths: Strengths) -> Result<CouplingSpec> {
    let mut map = BTreeMap::new();
    let (k1, k2) = match strengths {
        Strengths::Single(k) => (k, 0.0),
        Strengths::Pair(a, b) => (a, b),
    };
    if k1 < 0.0 {
        return Err(Error::NegativeCoupling(k1));
    }
    if k2 < 0.0 {
        return Err(Error::NegativeCoupling(k2));
    }
    match pattern {
        CouplingPattern::Dm => {
            if m != 2 {
                return Err(Error::DimensionCondition(format!(
                    "dm coupling pattern is the two-matrix case, got m = {m}"
                )));
            }
            let (k1, k2) = match strengths {
                Strengths::Pair(a, b) => (a, b),
                Strengths::Single(_) => {
                    return Err(Error::FrequencyStructure(
                        "dm pattern takes a (kappa1, kappa2) pair".into(),
                    ))
                }
            };
            map.insert(IndexVector::one_zero_at(4, 0), k1);
            map.insert(IndexVector::one_zero_at(4, 2), k1);
            map.insert(IndexVector::one_zero_at(4, 1), k2);
            map.insert(IndexVector::one_zero_at(4, 3), k2);
        }
        CouplingPattern::Mm => {
            if m < 2 {
                return Err(Error::DimensionCondition(format!(
                    "mm coupling pattern needs m >= 2, got {m}"
                )));
            }
            let (k1, k2) = match strengths {
                Strengths::Pair(a, b) => (a, b),
                Strengths::Single(_) => {
                    return Err(Error::FrequencyStructure(
                        "mm pattern takes a (kappa1, kappa2) pair".into(),
                    ))
                }
            };
            for q in 0..m {
                map.insert(IndexVector::one_zero_at(2 * m, 2 * q), k1);
                map.insert(IndexVector::one_zero_at(2 * m, 2 * q + 1), k2);
            }
        }
        CouplingPattern::Sms => {
            if m < 2 {
                return Err(Error::DimensionCondition(format!(
                    "sms coupling pattern needs m >= 2 spheres, got {m}"
                )));
            }
            let k = match strengths {
                Strengths::Single(k) => k,
                Strengths::Pair(..) => {
                    return Err(Error::FrequencyStructure(
                        "sms pattern takes a single kappa".into(),
                    ))
                }
            };
            // A single 0 at position k couples sphere k, matching the
            // multi-matrix pattern below; the one-zero and one-hot families
            // coincide for m = 2.
            for pos in 0..m {
                map.insert(IndexVector::one_zero_at(m, pos), k);
            }
        }
    }
    Ok(CouplingSpec {
        full_map: map,
        reduced: Some((k1, k2)),
        merged: Some(k1 + k2),
        pattern: Some((pattern, m)),
    })
}

/// Per-oscillator free-flow data.
#[derive(Debug, Clone)]
pub enum FrequencySpec {
    None,
    /// Rank-2m skew tensors A_j for the full tensor model.
    Rank2mSkew(Vec<DenseTensor>),
    /// Hermitian pairs (H_j, G_j) for the unitary flow.
    HermitianPair(Vec<DenseTensor>, Vec<DenseTensor>),
    /// Real skew-symmetric pairs (Ω_j, Λ_j) or (Ω_j, Ψ_j).
    SkewPair(Vec<DenseTensor>, Vec<DenseTensor>),
    /// Rank-4 skew tensor pairs (B_j, C_j) for the two-matrix flow.
    Rank4Pair(Vec<DenseTensor>, Vec<DenseTensor>),
    /// One Hermitian matrix per component per oscillator, `h[p][j]`.
    HermitianList(Vec<Vec<DenseTensor>>),
    /// One rank-4 skew tensor per component per oscillator, `b[p][j]`.
    Rank4List(Vec<Vec<DenseTensor>>),
}

const STRUCT_TOL: f64 = 1e-10;

/// conj[A]_{α*0 α*1} = −[A]_{α*1 α*0}, checked through the half/half
/// matricization of the rank-2m tensor.
pub fn check_rank2m_skew(a: &DenseTensor) -> Result<()> {
    let r = a.rank();
    if r % 2 != 0 {
        return Err(Error::FrequencyStructure(format!("free-flow tensor rank {r} is odd")));
    }
    let half: Vec<usize> = a.shape()[..r / 2].to_vec();
    if a.shape()[r / 2..] != half[..] {
        return Err(Error::FrequencyStructure(
            "free-flow tensor shape is not (state shape) x (state shape)".into(),
        ));
    }
    let n: usize = half.iter().product();
    let d = a.data();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let lhs = d[i * n + j].conj();
            let rhs = -d[j * n + i];
            worst = worst.max((lhs - rhs).norm());
        }
    }
    if worst > STRUCT_TOL {
        return Err(Error::FrequencyStructure(format!(
            "free-flow tensor is not skew (residual {worst:.3e})"
        )));
    }
    Ok(())
}

pub fn check_hermitian(h: &DenseTensor) -> Result<()> {
    let (p, q) = linalg::mat_dims(h)?;
    if p != q {
        return Err(Error::NotSquare(format!("[{p}, {q}]")));
    }
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            worst = worst.max((h.data()[i * p + j] - h.data()[j * p + i].conj()).norm());
        }
    }
    if worst > STRUCT_TOL {
        return Err(Error::FrequencyStructure(format!("matrix not Hermitian ({worst:.3e})")));
    }
    Ok(())
}

pub fn check_real_skew(w: &DenseTensor) -> Result<()> {
    let (p, q) = linalg::mat_dims(w)?;
    if p != q {
        return Err(Error::NotSquare(format!("[{p}, {q}]")));
    }
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let a = w.data()[i * p + j];
            let b = w.data()[j * p + i];
            worst = worst.max((a + b).norm()).max(a.im.abs());
        }
    }
    if worst > STRUCT_TOL {
        return Err(Error::FrequencyStructure(format!(
            "matrix not real skew-symmetric ({worst:.3e})"
        )));
    }
    Ok(())
}

impl FrequencySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FrequencySpec::None => Ok(()),
            FrequencySpec::Rank2mSkew(list) => list.iter().try_for_each(check_rank2m_skew),
            FrequencySpec::HermitianPair(h, g) => {
                h.iter().try_for_each(check_hermitian)?;
                g.iter().try_for_each(check_hermitian)
            }
            FrequencySpec::SkewPair(a, b) => {
                a.iter().try_for_each(check_real_skew)?;
                b.iter().try_for_each(check_real_skew)
            }
            FrequencySpec::Rank4Pair(b, c) => {
                b.iter().try_for_each(check_rank2m_skew)?;
                c.iter().try_for_each(check_rank2m_skew)
            }
            FrequencySpec::HermitianList(list) => {
                list.iter().flatten().try_for_each(check_hermitian)
            }
            FrequencySpec::Rank4List(list) => {
                list.iter().flatten().try_for_each(check_rank2m_skew)
            }
        }
    }
}

fn check_osc_count(n: usize, freq: Option<&[DenseTensor]>, what: &str) -> Result<()> {
    if let Some(f) = freq {
        if f.len() != n {
            return Err(Error::FrequencyStructure(format!(
                "{what}: {} frequency entries for {n} oscillators",
                f.len()
            )));
        }
    }
    Ok(())
}

/// Pairwise Frobenius inner products c[j][k] = ⟨X_j, X_k⟩.
fn inner_matrix(states: &[DenseTensor]) -> Vec<Vec<C64>> {
    let n = states.len();
    let mut c = vec![vec![ZERO; n]; n];
    for j in 0..n {
        for k in j..n {
            let v = frobenius_inner(&states[j], &states[k]).expect("same shapes");
            c[j][k] = v;
            c[k][j] = v.conj();
        }
    }
    c
}

/// Weighted ensemble average (1/N) Σ_k w_k X_k.
fn weighted_mean(states: &[DenseTensor], weights: &[C64]) -> DenseTensor {
    let n = states.len() as f64;
    let mut acc = DenseTensor::zeros(states[0].shape().to_vec());
    for (s, &w) in states.iter().zip(weights) {
        acc.axpy(w / n, s);
    }
    acc
}

/// κ (M_j − U_j M_j† U_j) for square states; the coupling part of the unitary
/// and special-orthogonal flows.
fn unitary_coupling(states: &[DenseTensor], weights: &[Vec<C64>], kappa: f64) -> Vec<DenseTensor> {
    let kap = C64::new(kappa, 0.0);
    states
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let m_j = weighted_mean(states, &weights[j]);
            let inner = linalg::adjoint_matmul(&m_j, u).expect("square");
            let cubic = linalg::matmul(u, &inner).expect("square");
            let mut d = m_j;
            d.axpy(-C64::new(1.0, 0.0), &cubic);
            d.scale(kap)
        })
        .collect()
}

/// κ₁ M_j (U_j†U_j) + κ₂ (U_jU_j†) M_j − (κ₁+κ₂) U_j M_j† U_j for rectangular
/// states; the coupling part of the two- and multi-matrix flows.
fn rect_coupling(
    states: &[DenseTensor],
    weights: &[Vec<C64>],
    kappa1: f64,
    kappa2: f64,
) -> Vec<DenseTensor> {
    states
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let m_j = weighted_mean(states, &weights[j]);
            let gram_r = linalg::adjoint_matmul(u, u).expect("shape");
            let gram_l = linalg::matmul_adjoint(u, u).expect("shape");
            let t1 = linalg::matmul(&m_j, &gram_r).expect("shape");
            let t2 = linalg::matmul(&gram_l, &m_j).expect("shape");
            let t3 = linalg::matmul(u, &linalg::adjoint_matmul(&m_j, u).expect("shape"))
                .expect("shape");
            let mut d = t1.scale(C64::new(kappa1, 0.0));
            d.axpy(C64::new(kappa2, 0.0), &t2);
            d.axpy(C64::new(-(kappa1 + kappa2), 0.0), &t3);
            d
        })
        .collect()
}

/// κ (m_i − ⟨u_i, m_i⟩ u_i), the tangential coupling on a sphere.
fn sphere_coupling(states: &[DenseTensor], weights: &[Vec<C64>], kappa: f64) -> Vec<DenseTensor> {
    let kap = C64::new(kappa, 0.0);
    states
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let m_i = weighted_mean(states, &weights[i]);
            let proj = frobenius_inner(u, &m_i).expect("same shape");
            let mut d = m_i;
            d.axpy(-proj, u);
            d.scale(kap)
        })
        .collect()
}

/// Full tensor model: Ṫ_j = A_j T_j + Σ_{i*} κ_{i*} (cubic(T_c, T_j, T_j) −
/// cubic(T_j, T_c, T_j)) with T_c the ensemble mean.
pub fn lt_rhs(
    ens: &Ensemble,
    freq: Option<&[DenseTensor]>,
    coupling: &CouplingSpec,
) -> Result<Vec<DenseTensor>> {
    let n = ens.len();
    check_osc_count(n, freq, "lt")?;
    if let Some(len) = coupling.index_len() {
        if len != ens.shape().len() {
            return Err(Error::IndexLength { len, rank: ens.shape().len() });
        }
    }
    let nf = C64::new(n as f64, 0.0);
    let mut centroid = DenseTensor::zeros(ens.shape().to_vec());
    for s in ens.states() {
        centroid.axpy(C64::new(1.0, 0.0), s);
    }
    let centroid = centroid.scale(C64::new(1.0, 0.0) / nf);

    let mut out = Vec::with_capacity(n);
    for (j, t_j) in ens.states().iter().enumerate() {
        let mut d = DenseTensor::zeros(ens.shape().to_vec());
        if let Some(a) = freq {
            d = d.add(&contract_freq(&a[j], t_j)?)?;
        }
        for (iv, kappa) in coupling.nonzero() {
            let gain = cubic_coupling_term(iv, &centroid, t_j, t_j)?;
            let loss = cubic_coupling_term(iv, t_j, &centroid, t_j)?;
            d.axpy(C64::new(kappa, 0.0), &gain);
            d.axpy(C64::new(-kappa, 0.0), &loss);
        }
        out.push(d);
    }
    Ok(out)
}

/// Swarm double-sphere flow on S^{d₁−1} × S^{d₂−1}.
pub fn sds_rhs(
    u: &Ensemble,
    v: &Ensemble,
    omega: Option<&[DenseTensor]>,
    lambda: Option<&[DenseTensor]>,
    kappa: f64,
) -> Result<(Vec<DenseTensor>, Vec<DenseTensor>)> {
    ensure_paired(u, v)?;
    check_osc_count(u.len(), omega, "sds omega")?;
    check_osc_count(v.len(), lambda, "sds lambda")?;
    let cu = inner_matrix(u.states());
    let cv = inner_matrix(v.states());
    let mut du = sphere_coupling(u.states(), &cv, kappa);
    let mut dv = sphere_coupling(v.states(), &cu, kappa);
    apply_matrix_freq(&mut du, omega, u.states())?;
    apply_matrix_freq(&mut dv, lambda, v.states())?;
    Ok((du, dv))
}

/// Swarm multi-sphere flow; component k is driven by the product of the other
/// components' inner products.
pub fn sms_rhs(components: &[Ensemble], kappa: f64) -> Result<Vec<Vec<DenseTensor>>> {
    if components.len() < 2 {
        return Err(Error::ComponentCount { needed: 2, got: components.len() });
    }
    ensure_component_counts(components)?;
    let inners: Vec<Vec<Vec<C64>>> = components.iter().map(|c| inner_matrix(c.states())).collect();
    let n = components[0].len();
    let mut out = Vec::with_capacity(components.len());
    for (k, comp) in components.iter().enumerate() {
        let weights = product_weights(&inners, k, n);
        out.push(sphere_coupling(comp.states(), &weights, kappa));
    }
    Ok(out)
}

/// Two-matrix flow on rectangular unit-norm matrices.
pub fn dm_rhs(
    u: &Ensemble,
    v: &Ensemble,
    b: Option<&[DenseTensor]>,
    c: Option<&[DenseTensor]>,
    kappa1: f64,
    kappa2: f64,
) -> Result<(Vec<DenseTensor>, Vec<DenseTensor>)> {
    ensure_paired(u, v)?;
    check_osc_count(u.len(), b, "dm b")?;
    check_osc_count(v.len(), c, "dm c")?;
    let cu = inner_matrix(u.states());
    let cv = inner_matrix(v.states());
    let mut du = rect_coupling(u.states(), &cv, kappa1, kappa2);
    let mut dv = rect_coupling(v.states(), &cu, kappa1, kappa2);
    apply_rank4_freq(&mut du, b, u.states())?;
    apply_rank4_freq(&mut dv, c, v.states())?;
    Ok((du, dv))
}

/// Unitary pair flow; `h` and `g` are Hermitian generators entering as −iH U.
pub fn dum_rhs(
    u: &Ensemble,
    v: &Ensemble,
    h: Option<&[DenseTensor]>,
    g: Option<&[DenseTensor]>,
    kappa: f64,
) -> Result<(Vec<DenseTensor>, Vec<DenseTensor>)> {
    ensure_unitary(u)?;
    ensure_unitary(v)?;
    dum_rhs_raw(u, v, h, g, kappa)
}

pub(crate) fn dum_rhs_raw(
    u: &Ensemble,
    v: &Ensemble,
    h: Option<&[DenseTensor]>,
    g: Option<&[DenseTensor]>,
    kappa: f64,
) -> Result<(Vec<DenseTensor>, Vec<DenseTensor>)> {
    ensure_paired(u, v)?;
    check_osc_count(u.len(), h, "dum h")?;
    check_osc_count(v.len(), g, "dum g")?;
    let cu = inner_matrix(u.states());
    let cv = inner_matrix(v.states());
    let mut du = unitary_coupling(u.states(), &cv, kappa);
    let mut dv = unitary_coupling(v.states(), &cu, kappa);
    apply_hermitian_freq(&mut du, h, u.states())?;
    apply_hermitian_freq(&mut dv, g, v.states())?;
    Ok((du, dv))
}

/// Special-orthogonal pair flow; real states, Ω/Ψ real skew generators.
pub fn dsom_rhs(
    u: &Ensemble,
    v: &Ensemble,
    omega: Option<&[DenseTensor]>,
    psi: Option<&[DenseTensor]>,
    kappa: f64,
) -> Result<(Vec<DenseTensor>, Vec<DenseTensor>)> {
    ensure_orthogonal(u)?;
    ensure_orthogonal(v)?;
    dsom_rhs_raw(u, v, omega, psi, kappa)
}

pub(crate) fn dsom_rhs_raw(
    u: &Ensemble,
    v: &Ensemble,
    omega: Option<&[DenseTensor]>,
    psi: Option<&[DenseTensor]>,
    kappa: f64,
) -> Result<(Vec<DenseTensor>, Vec<DenseTensor>)> {
    ensure_paired(u, v)?;
    check_osc_count(u.len(), omega, "dsom omega")?;
    check_osc_count(v.len(), psi, "dsom psi")?;
    let cu = inner_matrix(u.states());
    let cv = inner_matrix(v.states());
    let mut du = unitary_coupling(u.states(), &cv, kappa);
    let mut dv = unitary_coupling(v.states(), &cu, kappa);
    apply_matrix_freq(&mut du, omega, u.states())?;
    apply_matrix_freq(&mut dv, psi, v.states())?;
    Ok((du, dv))
}

/// Multi-matrix flow; component p is weighted by ∏_{ℓ≠p} ⟨U_j^ℓ, U_k^ℓ⟩.
pub fn mm_rhs(
    components: &[Ensemble],
    b: Option<&[Vec<DenseTensor>]>,
    kappa1: f64,
    kappa2: f64,
) -> Result<Vec<Vec<DenseTensor>>> {
    if components.len() < 2 {
        return Err(Error::ComponentCount { needed: 2, got: components.len() });
    }
    ensure_component_counts(components)?;
    if let Some(b) = b {
        if b.len() != components.len() {
            return Err(Error::FrequencyStructure("one rank-4 list per component required".into()));
        }
    }
    let inners: Vec<Vec<Vec<C64>>> = components.iter().map(|c| inner_matrix(c.states())).collect();
    let n = components[0].len();
    let mut out = Vec::with_capacity(components.len());
    for (p, comp) in components.iter().enumerate() {
        let weights = product_weights(&inners, p, n);
        let mut d = rect_coupling(comp.states(), &weights, kappa1, kappa2);
        apply_rank4_freq(&mut d, b.map(|b| b[p].as_slice()), comp.states())?;
        out.push(d);
    }
    Ok(out)
}

/// Multi-unitary flow.
pub fn mum_rhs(
    components: &[Ensemble],
    h: Option<&[Vec<DenseTensor>]>,
    kappa: f64,
) -> Result<Vec<Vec<DenseTensor>>> {
    if components.len() < 2 {
        return Err(Error::ComponentCount { needed: 2, got: components.len() });
    }
    for c in components {
        ensure_unitary(c)?;
    }
    mum_rhs_raw(components, h, kappa)
}

pub(crate) fn mum_rhs_raw(
    components: &[Ensemble],
    h: Option<&[Vec<DenseTensor>]>,
    kappa: f64,
) -> Result<Vec<Vec<DenseTensor>>> {
    ensure_component_counts(components)?;
    if let Some(h) = h {
        if h.len() != components.len() {
            return Err(Error::FrequencyStructure("one Hermitian list per component".into()));
        }
    }
    let inners: Vec<Vec<Vec<C64>>> = components.iter().map(|c| inner_matrix(c.states())).collect();
    let n = components[0].len();
    let mut out = Vec::with_capacity(components.len());
    for (p, comp) in components.iter().enumerate() {
        let weights = product_weights(&inners, p, n);
        let mut d = unitary_coupling(comp.states(), &weights, kappa);
        apply_hermitian_freq(&mut d, h.map(|h| h[p].as_slice()), comp.states())?;
        out.push(d);
    }
    Ok(out)
}

fn product_weights(inners: &[Vec<Vec<C64>>], skip: usize, n: usize) -> Vec<Vec<C64>> {
    let mut w = vec![vec![C64::new(1.0, 0.0); n]; n];
    for (l, inner) in inners.iter().enumerate() {
        if l == skip {
            continue;
        }
        for j in 0..n {
            for k in 0..n {
                w[j][k] *= inner[j][k];
            }
        }
    }
    w
}

fn apply_hermitian_freq(
    derivs: &mut [DenseTensor],
    h: Option<&[DenseTensor]>,
    states: &[DenseTensor],
) -> Result<()> {
    if let Some(h) = h {
        for ((d, hj), u) in derivs.iter_mut().zip(h).zip(states) {
            let hu = linalg::matmul(hj, u)?;
            d.axpy(-I, &hu);
        }
    }
    Ok(())
}

fn apply_matrix_freq(
    derivs: &mut [DenseTensor],
    w: Option<&[DenseTensor]>,
    states: &[DenseTensor],
) -> Result<()> {
    if let Some(w) = w {
        for ((d, wj), u) in derivs.iter_mut().zip(w).zip(states) {
            let wu = if u.rank() == 1 {
                // skew matrix acting on a vector
                contract_matvec(wj, u)?
            } else {
                linalg::matmul(wj, u)?
            };
            d.axpy(C64::new(1.0, 0.0), &wu);
        }
    }
    Ok(())
}

fn contract_matvec(w: &DenseTensor, u: &DenseTensor) -> Result<DenseTensor> {
    let (p, q) = linalg::mat_dims(w)?;
    if u.len() != q {
        return Err(Error::ShapeMismatch {
            expected: format!("[{q}]"),
            found: format!("{:?}", u.shape()),
        });
    }
    let mut out = DenseTensor::zeros(vec![p]);
    for i in 0..p {
        let mut acc = ZERO;
        for k in 0..q {
            acc += w.data()[i * q + k] * u.data()[k];
        }
        out.data_mut()[i] = acc;
    }
    Ok(out)
}

fn apply_rank4_freq(
    derivs: &mut [DenseTensor],
    b: Option<&[DenseTensor]>,
    states: &[DenseTensor],
) -> Result<()> {
    if let Some(b) = b {
        for ((d, bj), u) in derivs.iter_mut().zip(b).zip(states) {
            let bu = contract_freq(bj, u)?;
            d.axpy(C64::new(1.0, 0.0), &bu);
        }
    }
    Ok(())
}

fn ensure_paired(u: &Ensemble, v: &Ensemble) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} oscillators", u.len()),
            found: format!("{} oscillators", v.len()),
        });
    }
    Ok(())
}

fn ensure_component_counts(components: &[Ensemble]) -> Result<()> {
    let n = components[0].len();
    for c in components {
        if c.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} oscillators"),
                found: format!("{} oscillators", c.len()),
            });
        }
    }
    Ok(())
}

fn ensure_unitary(ens: &Ensemble) -> Result<()> {
    for s in ens.states() {
        let defect = linalg::gram_defect(s)?;
        if defect > MANIFOLD_TOL {
            return Err(Error::OffManifold { defect, tol: MANIFOLD_TOL });
        }
    }
    Ok(())
}

fn ensure_orthogonal(ens: &Ensemble) -> Result<()> {
    for s in ens.states() {
        let imag: f64 = s.data().iter().map(|z| z.im.abs()).fold(0.0_f64, |a, b| a.max(b));
        let defect = linalg::gram_defect(s)?.max(imag);
        if defect > MANIFOLD_TOL {
            return Err(Error::OffManifold { defect, tol: MANIFOLD_TOL });
        }
    }
    Ok(())
}

/// Rank-8 free-flow tensor from a rank-4 pair:
/// [A]_{α₁β₁γ₁δ₁ α₂β₂γ₂δ₂} = [B]_{α₁β₁α₂β₂} δ_{γ₁γ₂} δ_{δ₁δ₂}
///                          + [C]_{γ₁δ₁γ₂δ₂} δ_{α₁α₂} δ_{β₁β₂}.
pub fn build_lt_freq_from_dm(b: &DenseTensor, c: &DenseTensor) -> Result<DenseTensor> {
    check_rank2m_skew(b)?;
    check_rank2m_skew(c)?;
    let (d1, d2) = (b.shape()[0], b.shape()[1]);
    let (d3, d4) = (c.shape()[0], c.shape()[1]);
    let state: Vec<usize> = vec![d1, d2, d3, d4];
    let nu = d1 * d2;
    let nv = d3 * d4;
    let n = nu * nv;
    let mut shape = state.clone();
    shape.extend_from_slice(&state);
    let mut a = DenseTensor::zeros(shape);
    // Work through the (state, state) matricization: row = (u1, v1), col = (u2, v2).
    for u1 in 0..nu {
        for v1 in 0..nv {
            let row = u1 * nv + v1;
            for u2 in 0..nu {
                let bval = b.data()[u1 * nu + u2];
                if bval != ZERO {
                    let col = u2 * nv + v1;
                    a.data_mut()[row * n + col] += bval;
                }
            }
            for v2 in 0..nv {
                let cval = c.data()[v1 * nv + v2];
                if cval != ZERO {
                    let col = u1 * nv + v2;
                    a.data_mut()[row * n + col] += cval;
                }
            }
        }
    }
    Ok(a)
}

/// Rank-4 skew tensor [B]_{α₁β₁α₂β₂} = [−iH]_{α₁α₂} δ_{β₁β₂} from a Hermitian
/// generator, so that the contraction B U equals the matrix product −iH U.
pub fn rank4_from_hermitian(h: &DenseTensor) -> Result<DenseTensor> {
    check_hermitian(h)?;
    let n = h.shape()[0];
    let mut b = DenseTensor::zeros(vec![n, n, n, n]);
    // flat index of (a1, b1, a2, b2) is ((a1*n + b1)*n + a2)*n + b2
    for a1 in 0..n {
        for a2 in 0..n {
            let v = -I * h.data()[a1 * n + a2];
            for b1 in 0..n {
                let flat = ((a1 * n + b1) * n + a2) * n + b1;
                b.data_mut()[flat] = v;
            }
        }
    }
    Ok(b)
}

/// Hermitian-pair variant of [`build_lt_freq_from_dm`].
pub fn build_lt_freq_from_dum(h: &DenseTensor, g: &DenseTensor) -> Result<DenseTensor> {
    let b = rank4_from_hermitian(h)?;
    let c = rank4_from_hermitian(g)?;
    build_lt_freq_from_dm(&b, &c)
}

/// Rank-4m free-flow tensor from one rank-4 tensor per component, each padded
/// with identity factors on the other component slots.
pub fn build_lt_freq_from_mm(b_list: &[DenseTensor]) -> Result<DenseTensor> {
    if b_list.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    for b in b_list {
        check_rank2m_skew(b)?;
    }
    let dims: Vec<(usize, usize)> = b_list.iter().map(|b| (b.shape()[0], b.shape()[1])).collect();
    let sizes: Vec<usize> = dims.iter().map(|&(r, c)| r * c).collect();
    let n: usize = sizes.iter().product();
    let mut state: Vec<usize> = Vec::new();
    for &(r, c) in &dims {
        state.push(r);
        state.push(c);
    }
    let mut shape = state.clone();
    shape.extend_from_slice(&state);
    let mut a = DenseTensor::zeros(shape);
    // Row-major matricized index: row = Σ rows of each component block.
    let m = b_list.len();
    let mut suffix = vec![1usize; m + 1];
    for k in (0..m).rev() {
        suffix[k] = suffix[k + 1] * sizes[k];
    }
    for (k, b) in b_list.iter().enumerate() {
        let nk = sizes[k];
        let outer = n / (nk * suffix[k + 1]);
        for pre in 0..outer {
            for post in 0..suffix[k + 1] {
                for rk in 0..nk {
                    let row = (pre * nk + rk) * suffix[k + 1] + post;
                    for ck in 0..nk {
                        let v = b.data()[rk * nk + ck];
                        if v != ZERO {
                            let col = (pre * nk + ck) * suffix[k + 1] + post;
                            a.data_mut()[row * n + col] += v;
                        }
                    }
                }
            }
        }
    }
    Ok(a)
}

/// Hermitian-list variant of [`build_lt_freq_from_mm`].
pub fn build_lt_freq_from_mum(h_list: &[DenseTensor]) -> Result<DenseTensor> {
    let b: Vec<DenseTensor> =
        h_list.iter().map(rank4_from_hermitian).collect::<Result<Vec<_>>>()?;
    build_lt_freq_from_mm(&b)
}
