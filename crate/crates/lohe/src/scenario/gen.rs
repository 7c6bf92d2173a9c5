//! Seeded generators for initial data and natural frequencies. Every draw is
//! fully determined by the configured 64-bit seed.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::diagnostics::{self, GroupKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Ensemble, Manifold, ModelKind};
use crate::tensor::{frobenius_inner, C64, DenseTensor};

/// Deterministic random stream.
pub struct Stream(ChaCha12Rng);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha12Rng::seed_from_u64(seed))
    }

    /// Substream for an independent purpose, still a pure function of the
    /// parent seed.
    pub fn fork(&mut self, tag: u64) -> Stream {
        let s = self.0.next_u64() ^ tag.wrapping_mul(0x9e3779b97f4a7c15);
        Stream::new(s)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = (1.0 - self.uniform()).max(f64::MIN_POSITIVE);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn complex_gaussian(&mut self) -> C64 {
        C64::new(self.gaussian(), self.gaussian())
    }
}

/// Haar-like random unitary: orthonormalize a complex Gaussian matrix and fix
/// the diagonal phases of the triangular factor so the map is well-defined.
pub fn gen_random_unitary(n: usize, seed: u64) -> Result<DenseTensor> {
    if n < 1 {
        return Err(Error::DimensionCondition("unitary size must be at least 1".into()));
    }
    let mut rng = Stream::new(seed);
    Ok(random_unitary(n, &mut rng))
}

pub(crate) fn random_unitary(n: usize, rng: &mut Stream) -> DenseTensor {
    let data: Vec<C64> = (0..n * n).map(|_| rng.complex_gaussian()).collect();
    let g = DenseTensor::matrix(n, n, data).expect("shape");
    orthonormalize(&g, false)
}

pub(crate) fn random_special_orthogonal(n: usize, rng: &mut Stream) -> DenseTensor {
    let data: Vec<C64> = (0..n * n).map(|_| C64::new(rng.gaussian(), 0.0)).collect();
    let g = DenseTensor::matrix(n, n, data).expect("shape");
    let mut q = orthonormalize(&g, true);
    if linalg::determinant(&q).expect("square").re < 0.0 {
        for i in 0..n {
            let v = q.data()[i * n];
            q.data_mut()[i * n] = -v;
        }
    }
    q
}

/// Modified Gram-Schmidt on columns, run twice, with the R-diagonal phases
/// normalized to make the factor unique.
fn orthonormalize(g: &DenseTensor, real: bool) -> DenseTensor {
    let n = g.shape()[0];
    // column-major working copy
    let mut cols: Vec<Vec<C64>> = (0..n)
        .map(|j| (0..n).map(|i| g.data()[i * n + j]).collect())
        .collect();
    for _pass in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let mut proj = C64::new(0.0, 0.0);
                for i in 0..n {
                    proj += cols[k][i].conj() * cols[j][i];
                }
                for i in 0..n {
                    let v = cols[k][i];
                    cols[j][i] -= proj * v;
                }
            }
            let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for v in cols[j].iter_mut() {
                *v /= C64::new(norm, 0.0);
            }
        }
    }
    // phase fix: make ⟨g_j, q_j⟩ real positive (the R diagonal)
    for j in 0..n {
        let mut r = C64::new(0.0, 0.0);
        for i in 0..n {
            r += cols[j][i].conj() * g.data()[i * n + j];
        }
        let phase = if real {
            if r.re < 0.0 { C64::new(-1.0, 0.0) } else { C64::new(1.0, 0.0) }
        } else {
            let mag = r.norm();
            if mag == 0.0 { C64::new(1.0, 0.0) } else { r / C64::new(mag, 0.0) }
        };
        for v in cols[j].iter_mut() {
            *v *= phase;
        }
    }
    let mut out = DenseTensor::zeros(vec![n, n]);
    for j in 0..n {
        for i in 0..n {
            out.data_mut()[i * n + j] = cols[j][i];
        }
    }
    out
}

pub(crate) fn random_skew_hermitian(n: usize, rng: &mut Stream) -> DenseTensor {
    let mut k = DenseTensor::zeros(vec![n, n]);
    for i in 0..n {
        k.data_mut()[i * n + i] = C64::new(0.0, rng.gaussian());
        for j in i + 1..n {
            let z = rng.complex_gaussian();
            k.data_mut()[i * n + j] = z;
            k.data_mut()[j * n + i] = -z.conj();
        }
    }
    k
}

/// Random traceless Hermitian matrix. The trace component generates a pure
/// per-oscillator phase rotation, a neutral direction of the pair flows that
/// would otherwise drift the relative det-phases forever; the traceless class
/// realizes every generator diameter without exciting it.
pub(crate) fn random_hermitian(n: usize, rng: &mut Stream) -> DenseTensor {
    let mut h = DenseTensor::zeros(vec![n, n]);
    for i in 0..n {
        h.data_mut()[i * n + i] = C64::new(rng.gaussian(), 0.0);
        for j in i + 1..n {
            let z = rng.complex_gaussian().scale(0.5f64.sqrt());
            h.data_mut()[i * n + j] = z;
            h.data_mut()[j * n + i] = z.conj();
        }
    }
    let tr = (0..n).map(|i| h.data()[i * n + i]).sum::<C64>() / C64::new(n as f64, 0.0);
    for i in 0..n {
        let v = h.data()[i * n + i];
        h.data_mut()[i * n + i] = v - tr;
    }
    h
}

pub(crate) fn random_real_skew(n: usize, rng: &mut Stream) -> DenseTensor {
    let mut w = DenseTensor::zeros(vec![n, n]);
    for i in 0..n {
        for j in i + 1..n {
            let x = rng.gaussian();
            w.data_mut()[i * n + j] = C64::new(x, 0.0);
            w.data_mut()[j * n + i] = C64::new(-x, 0.0);
        }
    }
    w
}

/// Random rank-4 tensor with the skew structure of a two-matrix generator:
/// the (pair, pair) matricization is skew-Hermitian.
pub(crate) fn random_skew_rank4(d1: usize, d2: usize, rng: &mut Stream, real: bool) -> DenseTensor {
    let k = d1 * d2;
    let m = if real { random_real_skew(k, rng) } else { random_skew_hermitian(k, rng) };
    DenseTensor::new(vec![d1, d2, d1, d2], m.data().to_vec()).expect("shape")
}

/// Random unit-Frobenius-norm complex tensor.
pub(crate) fn random_unit_tensor(shape: &[usize], rng: &mut Stream) -> DenseTensor {
    let len: usize = shape.iter().product();
    let data: Vec<C64> = (0..len).map(|_| rng.complex_gaussian()).collect();
    let t = DenseTensor::new(shape.to_vec(), data).expect("shape");
    let norm = t.frob_norm();
    t.scale(C64::new(1.0 / norm, 0.0))
}

/// Random real unit vector.
pub(crate) fn random_unit_vector(d: usize, rng: &mut Stream) -> DenseTensor {
    loop {
        let vals: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
        let norm: f64 = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return DenseTensor::from_real(
                vec![d],
                &vals.iter().map(|v| v / norm).collect::<Vec<_>>(),
            )
            .expect("shape");
        }
    }
}

/// Near-identity group ensemble: U_j is the polar factor of I + ε K_j with
/// K_j random skew, ε bisected until the ensemble's contribution D + S to the
/// total functional matches `target` within 1 %.
pub fn gen_near_identity_ensemble(
    n: usize,
    count: usize,
    target: f64,
    seed: u64,
    group: GroupKind,
) -> Result<Ensemble> {
    if target < 0.0 {
        return Err(Error::UnreachableTarget(format!("negative target {target}")));
    }
    let mut rng = Stream::new(seed);
    let (model, manifold) = match group {
        GroupKind::Unitary => (ModelKind::Dum, Manifold::Unitary),
        GroupKind::SpecialOrthogonal => (ModelKind::Dsom, Manifold::SpecialOrthogonal),
    };
    let directions: Vec<DenseTensor> = (0..count)
        .map(|_| {
            let mut k = match group {
                GroupKind::Unitary => random_skew_hermitian(n, &mut rng),
                GroupKind::SpecialOrthogonal => random_real_skew(n, &mut rng),
            };
            // Remove the trace component: the i·θI direction is the frozen
            // relative-phase mode of the pair flow, and perturbing along it
            // parks the ensemble on a stationary family with L > 0.
            let tr = (0..n).map(|i| k.data()[i * n + i]).sum::<C64>() / C64::new(n as f64, 0.0);
            for i in 0..n {
                let v = k.data()[i * n + i];
                k.data_mut()[i * n + i] = v - tr;
            }
            let norm = k.frob_norm();
            k.scale(C64::new(1.0 / norm, 0.0))
        })
        .collect();

    let build = |eps: f64| -> Result<Ensemble> {
        let states = directions
            .iter()
            .map(|k| {
                let mut s = linalg::identity(n);
                s.axpy(C64::new(eps, 0.0), k);
                let q = linalg::polar_factor(&s)?;
                match group {
                    GroupKind::SpecialOrthogonal => Ok(q),
                    GroupKind::Unitary => {
                        // Align det-phases across the ensemble: the invariant
                        // arg det U_j − arg det V_j is conserved by the pair
                        // flow, so any initial spread survives to t = ∞.
                        let det = linalg::determinant(&q)?;
                        let theta = det.arg() / n as f64;
                        Ok(q.scale(C64::new(theta.cos(), -theta.sin())))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble::unchecked(states, model, manifold))
    };
    let measure = |ens: &Ensemble| -> Result<f64> {
        let (d, s) = diagnostics::diameters(ens)?;
        Ok(d + s)
    };

    if target == 0.0 {
        let states = vec![linalg::identity(n); count];
        return Ensemble::new(states, model, manifold);
    }
    if count < 2 {
        return Err(Error::UnreachableTarget(
            "a single-oscillator ensemble has zero diameter".into(),
        ));
    }

    let mut hi = 0.1;
    let mut measured_hi = measure(&build(hi)?)?;
    while measured_hi < target {
        hi *= 2.0;
        if hi > 4.0 {
            return Err(Error::UnreachableTarget(format!(
                "target {target} not reachable (measured {measured_hi} at eps = {hi})"
            )));
        }
        measured_hi = measure(&build(hi)?)?;
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let v = measure(&build(mid)?)?;
        if (v - target).abs() <= 2e-3 * target {
            break;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = 0.5 * (lo + hi);
    let ens = build(eps)?;
    let v = measure(&ens)?;
    if (v - target).abs() > 1e-2 * target {
        return Err(Error::UnreachableTarget(format!(
            "bisection landed at {v}, target {target}"
        )));
    }
    Ensemble::new(ens.states().to_vec(), model, manifold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreqKind {
    Hermitian,
    Skew,
}

/// Per-oscillator generators H_j = H₀ + Δ_j with the Δ's rescaled so the
/// measured diameter max_ij ‖H_i − H_j‖_∞ equals `diameter`. Zero diameter
/// returns identical generators.
pub fn gen_frequencies(
    kind: FreqKind,
    n: usize,
    count: usize,
    diameter: f64,
    seed: u64,
) -> Result<Vec<DenseTensor>> {
    if diameter < 0.0 {
        return Err(Error::UnreachableTarget(format!("negative diameter {diameter}")));
    }
    let mut rng = Stream::new(seed);
    let base = match kind {
        FreqKind::Hermitian => random_hermitian(n, &mut rng),
        FreqKind::Skew => random_real_skew(n, &mut rng),
    };
    if diameter == 0.0 {
        return Ok(vec![base; count]);
    }
    if count < 2 || n < 1 || (n == 1 && kind == FreqKind::Skew) {
        return Err(Error::UnreachableTarget(
            "positive frequency diameter needs at least two oscillators and a nontrivial size"
                .into(),
        ));
    }
    let deltas: Vec<DenseTensor> = (0..count)
        .map(|_| match kind {
            FreqKind::Hermitian => random_hermitian(n, &mut rng),
            FreqKind::Skew => random_real_skew(n, &mut rng),
        })
        .collect();
    let mut measured: f64 = 0.0;
    for i in 0..count {
        for j in i + 1..count {
            measured = measured.max(linalg::op_inf_norm(&deltas[i].sub(&deltas[j])?));
        }
    }
    if measured == 0.0 {
        return Err(Error::UnreachableTarget("degenerate frequency draw".into()));
    }
    let scale = C64::new(diameter / measured, 0.0);
    Ok(deltas
        .iter()
        .map(|d| {
            let mut h = base.clone();
            h.axpy(scale, d);
            h
        })
        .collect())
}

/// Random unit-norm matrix/tensor ensemble.
pub fn gen_unit_norm_ensemble(
    shape: &[usize],
    count: usize,
    seed: u64,
    model: ModelKind,
    manifold: Manifold,
) -> Result<Ensemble> {
    let mut rng = Stream::new(seed);
    let states = (0..count).map(|_| random_unit_tensor(shape, &mut rng)).collect();
    Ensemble::new(states, model, manifold)
}

/// Random unitary ensemble.
pub fn gen_unitary_ensemble(n: usize, count: usize, seed: u64) -> Result<Ensemble> {
    let mut rng = Stream::new(seed);
    let states = (0..count).map(|_| random_unitary(n, &mut rng)).collect();
    Ensemble::new(states, ModelKind::Dum, Manifold::Unitary)
}

/// Sphere ensemble whose minimum pairwise inner product lands on `min_ip`
/// within 2 %: points are normalized perturbations u_j ∝ u₀ + δ g_j with δ
/// bisected against the measured minimum.
pub fn gen_sphere_ensemble(d: usize, count: usize, min_ip: f64, seed: u64) -> Result<Ensemble> {
    if !(0.0 < min_ip && min_ip < 1.0) {
        return Err(Error::UnreachableTarget(format!(
            "minimum inner product target must sit in (0, 1), got {min_ip}"
        )));
    }
    let mut rng = Stream::new(seed);
    let base = random_unit_vector(d, &mut rng);
    let bumps: Vec<DenseTensor> = (0..count).map(|_| random_unit_vector(d, &mut rng)).collect();
    let build = |delta: f64| -> Result<Ensemble> {
        let states = bumps
            .iter()
            .map(|g| {
                let mut v = base.clone();
                v.axpy(C64::new(delta, 0.0), g);
                let norm = v.frob_norm();
                Ok(v.scale(C64::new(1.0 / norm, 0.0)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(states, ModelKind::Sds, Manifold::Sphere)
    };
    let min_inner = |ens: &Ensemble| -> Result<f64> {
        let mut worst = f64::INFINITY;
        for i in 0..count {
            for j in i + 1..count {
                let ip = frobenius_inner(&ens.states()[i], &ens.states()[j])?.re;
                worst = worst.min(ip);
            }
        }
        Ok(worst)
    };
    if count < 2 {
        return build(0.0);
    }
    // measured minimum decreases as delta grows
    let mut lo = 0.0;
    let mut hi = 0.05;
    while min_inner(&build(hi)?)? > min_ip {
        lo = hi;
        hi *= 2.0;
        if hi > 64.0 {
            break;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let v = min_inner(&build(mid)?)?;
        if (v - min_ip).abs() < 5e-3 * min_ip {
            return build(mid);
        }
        if v > min_ip {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build(0.5 * (lo + hi))
}

/// Ensemble of unit-modulus scalars (1×1 unitaries) with uniform phases.
pub fn gen_phase_ensemble(count: usize, seed: u64) -> Result<Ensemble> {
    let mut rng = Stream::new(seed);
    let states = (0..count)
        .map(|_| {
            let theta = rng.uniform() * std::f64::consts::TAU;
            DenseTensor::matrix(1, 1, vec![C64::new(theta.cos(), theta.sin())]).expect("shape")
        })
        .collect();
    Ensemble::new(states, ModelKind::Dum, Manifold::Unitary)
}

/// Special-orthogonal ensemble near a common random rotation.
pub fn gen_so_ensemble(n: usize, count: usize, seed: u64) -> Result<Ensemble> {
    let mut rng = Stream::new(seed);
    let states = (0..count).map(|_| random_special_orthogonal(n, &mut rng)).collect();
    Ensemble::new(states, ModelKind::Dsom, Manifold::SpecialOrthogonal)
}

pub(crate) fn ensure_generated_feasible(parts: &[Ensemble]) -> Result<()> {
    for p in parts {
        let defect = p.feasibility_defect()?;
        if defect > 1e-12 {
            return Err(Error::OffManifold { defect, tol: 1e-12 });
        }
    }
    Ok(())
}

pub(crate) fn right_translate(ens: &Ensemble, r: &DenseTensor) -> Result<Ensemble> {
    let states = ens
        .states()
        .iter()
        .map(|u| linalg::matmul(u, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble::unchecked(states, ens.model(), ens.manifold()))
}
