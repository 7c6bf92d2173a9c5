//! Brute-force oracles written straight from the displayed model equations
//! with naive index loops, plus small helpers. Nothing here reuses the
//! library's contraction or product kernels, so agreement is meaningful.

#![allow(dead_code)]

use lohe::scenario::Stream;
use lohe::tensor::{C64, DenseTensor};

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn get2(m: &DenseTensor, i: usize, j: usize) -> C64 {
    m.data()[i * m.shape()[1] + j]
}

/// ⟨A, B⟩ = Σ conj(a) b by plain loop.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> C64 {
    let mut acc = zero();
    for (x, y) in a.data().iter().zip(b.data()) {
        acc += x.conj() * y;
    }
    acc
}

/// Entrywise matrix product by triple loop.
pub fn mat_mul(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    let (p, q) = (a.shape()[0], a.shape()[1]);
    let r = b.shape()[1];
    assert_eq!(q, b.shape()[0]);
    let mut out = DenseTensor::zeros(vec![p, r]);
    for i in 0..p {
        for j in 0..r {
            let mut acc = zero();
            for k in 0..q {
                acc += get2(a, i, k) * get2(b, k, j);
            }
            out.data_mut()[i * r + j] = acc;
        }
    }
    out
}

/// Conjugate transpose by loop.
pub fn dagger(a: &DenseTensor) -> DenseTensor {
    let (p, q) = (a.shape()[0], a.shape()[1]);
    let mut out = DenseTensor::zeros(vec![q, p]);
    for i in 0..p {
        for j in 0..q {
            out.data_mut()[j * p + i] = get2(a, i, j).conj();
        }
    }
    out
}

pub fn scale(a: &DenseTensor, z: C64) -> DenseTensor {
    let mut out = a.clone();
    for v in out.data_mut() {
        *v *= z;
    }
    out
}

pub fn add(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    let mut out = a.clone();
    for (v, w) in out.data_mut().iter_mut().zip(b.data()) {
        *v += w;
    }
    out
}

pub fn sub(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    add(a, &scale(b, C64::new(-1.0, 0.0)))
}

pub fn norm(a: &DenseTensor) -> f64 {
    a.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Decode a flat row-major index into per-slot digits.
pub fn digits(flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; shape.len()];
    let mut rem = flat;
    for k in (0..shape.len()).rev() {
        out[k] = rem % shape[k];
        rem /= shape[k];
    }
    out
}

pub fn flat_index(idx: &[usize], shape: &[usize]) -> usize {
    let mut acc = 0usize;
    for (i, d) in idx.iter().zip(shape) {
        acc = acc * d + i;
    }
    acc
}

/// One cubic term [x]_{α*i*} conj([y])_{α*1} [z]_{α*(1−i*)} by full index
/// loops over free and contracted multi-indices.
pub fn oracle_cubic(
    bits: &[u8],
    x: &DenseTensor,
    y: &DenseTensor,
    z: &DenseTensor,
) -> DenseTensor {
    let shape = x.shape().to_vec();
    let len = x.len();
    let mut out = DenseTensor::zeros(shape.clone());
    for free in 0..len {
        let f = digits(free, &shape);
        let mut acc = zero();
        for con in 0..len {
            let c = digits(con, &shape);
            let xi: Vec<usize> =
                (0..shape.len()).map(|k| if bits[k] == 0 { f[k] } else { c[k] }).collect();
            let zi: Vec<usize> =
                (0..shape.len()).map(|k| if bits[k] == 0 { c[k] } else { f[k] }).collect();
            acc += x.data()[flat_index(&xi, &shape)]
                * y.data()[flat_index(&c, &shape)].conj()
                * z.data()[flat_index(&zi, &shape)];
        }
        out.data_mut()[free] = acc;
    }
    out
}

/// Full tensor-model right-hand side by loops:
/// Ṫ_j = A_jT_j + Σ_{i*} κ_{i*} ([T_c]..conj[T_j]..[T_j] − [T_j]..conj[T_c]..[T_j]).
pub fn oracle_lt_rhs(
    states: &[DenseTensor],
    freq: Option<&[DenseTensor]>,
    kappa_map: &[(Vec<u8>, f64)],
) -> Vec<DenseTensor> {
    let shape = states[0].shape().to_vec();
    let len = states[0].len();
    let n = states.len();
    let mut centroid = DenseTensor::zeros(shape.clone());
    for s in states {
        for (c, v) in centroid.data_mut().iter_mut().zip(s.data()) {
            *c += v / C64::new(n as f64, 0.0);
        }
    }
    states
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let mut d = DenseTensor::zeros(shape.clone());
            if let Some(a) = freq {
                for row in 0..len {
                    let mut acc = zero();
                    for col in 0..len {
                        acc += a[j].data()[row * len + col] * t.data()[col];
                    }
                    d.data_mut()[row] += acc;
                }
            }
            for (bits, kappa) in kappa_map {
                if *kappa == 0.0 {
                    continue;
                }
                let gain = oracle_cubic(bits, &centroid, t, t);
                let loss = oracle_cubic(bits, t, &centroid, t);
                for ((dv, g), l) in
                    d.data_mut().iter_mut().zip(gain.data()).zip(loss.data())
                {
                    *dv += C64::new(*kappa, 0.0) * (g - l);
                }
            }
            d
        })
        .collect()
}

/// Double-sphere flow by loops: u̇_i = Ω_iu_i + (κ/N)Σ⟨v_i,v_j⟩(u_j − ⟨u_i,u_j⟩u_i).
pub fn oracle_sds_rhs(
    u: &[DenseTensor],
    v: &[DenseTensor],
    omega: Option<&[DenseTensor]>,
    lambda: Option<&[DenseTensor]>,
    kappa: f64,
) -> (Vec<DenseTensor>, Vec<DenseTensor>) {
    let du = oracle_sphere_side(u, v, omega, kappa);
    let dv = oracle_sphere_side(v, u, lambda, kappa);
    (du, dv)
}

fn oracle_sphere_side(
    u: &[DenseTensor],
    v: &[DenseTensor],
    freq: Option<&[DenseTensor]>,
    kappa: f64,
) -> Vec<DenseTensor> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let mut d = DenseTensor::zeros(u[i].shape().to_vec());
            if let Some(w) = freq {
                let dim = u[i].len();
                for r in 0..dim {
                    let mut acc = zero();
                    for c in 0..dim {
                        acc += get2(&w[i], r, c) * u[i].data()[c];
                    }
                    d.data_mut()[r] += acc;
                }
            }
            for j in 0..n {
                let w = inner(&v[i], &v[j]);
                let uij = inner(&u[i], &u[j]);
                for (k, dv) in d.data_mut().iter_mut().enumerate() {
                    *dv += C64::new(kappa / n as f64, 0.0)
                        * w
                        * (u[j].data()[k] - uij * u[i].data()[k]);
                }
            }
            d
        })
        .collect()
}

/// Multi-sphere flow by loops with product weights over the other components.
pub fn oracle_sms_rhs(components: &[Vec<DenseTensor>], kappa: f64) -> Vec<Vec<DenseTensor>> {
    let n = components[0].len();
    let m = components.len();
    (0..m)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let mut d = DenseTensor::zeros(components[k][i].shape().to_vec());
                    for j in 0..n {
                        let mut w = C64::new(1.0, 0.0);
                        for (l, comp) in components.iter().enumerate() {
                            if l != k {
                                w *= inner(&comp[i], &comp[j]);
                            }
                        }
                        let uij = inner(&components[k][i], &components[k][j]);
                        for (a, dv) in d.data_mut().iter_mut().enumerate() {
                            *dv += C64::new(kappa / n as f64, 0.0)
                                * w
                                * (components[k][j].data()[a]
                                    - uij * components[k][i].data()[a]);
                        }
                    }
                    d
                })
                .collect()
        })
        .collect()
}

/// Rank-4 contraction [B U]_{αβ} = [B]_{αβγδ}[U]_{γδ} by loops.
pub fn oracle_rank4_apply(b: &DenseTensor, u: &DenseTensor) -> DenseTensor {
    let (d1, d2) = (u.shape()[0], u.shape()[1]);
    let mut out = DenseTensor::zeros(vec![d1, d2]);
    for a in 0..d1 {
        for bb in 0..d2 {
            let mut acc = zero();
            for g in 0..d1 {
                for dd in 0..d2 {
                    let flat = ((a * d2 + bb) * d1 + g) * d2 + dd;
                    acc += b.data()[flat] * get2(u, g, dd);
                }
            }
            out.data_mut()[a * d2 + bb] = acc;
        }
    }
    out
}

/// Two-matrix flow by loops: the κ₁/κ₂ form on rectangular matrices.
pub fn oracle_dm_rhs(
    u: &[DenseTensor],
    v: &[DenseTensor],
    b: Option<&[DenseTensor]>,
    c: Option<&[DenseTensor]>,
    k1: f64,
    k2: f64,
) -> (Vec<DenseTensor>, Vec<DenseTensor>) {
    (oracle_dm_side(u, v, b, k1, k2), oracle_dm_side(v, u, c, k1, k2))
}

fn oracle_dm_side(
    u: &[DenseTensor],
    v: &[DenseTensor],
    freq: Option<&[DenseTensor]>,
    k1: f64,
    k2: f64,
) -> Vec<DenseTensor> {
    let n = u.len();
    (0..n)
        .map(|j| {
            let mut d = DenseTensor::zeros(u[j].shape().to_vec());
            if let Some(b) = freq {
                d = add(&d, &oracle_rank4_apply(&b[j], &u[j]));
            }
            for k in 0..n {
                let cjk = inner(&v[j], &v[k]);
                let ckj = inner(&v[k], &v[j]);
                let t1 = mat_mul(&mat_mul(&u[k], &dagger(&u[j])), &u[j]);
                let t2 = mat_mul(&mat_mul(&u[j], &dagger(&u[j])), &u[k]);
                let t3 = mat_mul(&mat_mul(&u[j], &dagger(&u[k])), &u[j]);
                let term = add(
                    &add(
                        &scale(&t1, C64::new(k1 / n as f64, 0.0) * cjk),
                        &scale(&t2, C64::new(k2 / n as f64, 0.0) * cjk),
                    ),
                    &scale(&t3, C64::new(-(k1 + k2) / n as f64, 0.0) * ckj),
                );
                d = add(&d, &term);
            }
            d
        })
        .collect()
}

/// Unitary pair flow by loops.
pub fn oracle_dum_rhs(
    u: &[DenseTensor],
    v: &[DenseTensor],
    h: Option<&[DenseTensor]>,
    g: Option<&[DenseTensor]>,
    kappa: f64,
) -> (Vec<DenseTensor>, Vec<DenseTensor>) {
    (oracle_unitary_side(u, v, h, kappa), oracle_unitary_side(v, u, g, kappa))
}

fn oracle_unitary_side(
    u: &[DenseTensor],
    v: &[DenseTensor],
    h: Option<&[DenseTensor]>,
    kappa: f64,
) -> Vec<DenseTensor> {
    let n = u.len();
    (0..n)
        .map(|j| {
            let mut d = DenseTensor::zeros(u[j].shape().to_vec());
            if let Some(h) = h {
                d = add(&d, &scale(&mat_mul(&h[j], &u[j]), C64::new(0.0, -1.0)));
            }
            for k in 0..n {
                let cjk = inner(&v[j], &v[k]);
                let ckj = inner(&v[k], &v[j]);
                let t3 = mat_mul(&mat_mul(&u[j], &dagger(&u[k])), &u[j]);
                let term = add(
                    &scale(&u[k], C64::new(kappa / n as f64, 0.0) * cjk),
                    &scale(&t3, C64::new(-kappa / n as f64, 0.0) * ckj),
                );
                d = add(&d, &term);
            }
            d
        })
        .collect()
}

/// Special-orthogonal pair flow by loops (transpose instead of dagger,
/// single symmetric weight).
pub fn oracle_dsom_rhs(
    u: &[DenseTensor],
    v: &[DenseTensor],
    omega: Option<&[DenseTensor]>,
    psi: Option<&[DenseTensor]>,
    kappa: f64,
) -> (Vec<DenseTensor>, Vec<DenseTensor>) {
    (oracle_so_side(u, v, omega, kappa), oracle_so_side(v, u, psi, kappa))
}

fn oracle_so_side(
    u: &[DenseTensor],
    v: &[DenseTensor],
    omega: Option<&[DenseTensor]>,
    kappa: f64,
) -> Vec<DenseTensor> {
    let n = u.len();
    (0..n)
        .map(|j| {
            let mut d = DenseTensor::zeros(u[j].shape().to_vec());
            if let Some(w) = omega {
                d = add(&d, &mat_mul(&w[j], &u[j]));
            }
            for k in 0..n {
                let cjk = inner(&v[j], &v[k]);
                let t3 = mat_mul(&mat_mul(&u[j], &dagger(&u[k])), &u[j]);
                let term = scale(&sub(&u[k], &t3), C64::new(kappa / n as f64, 0.0) * cjk);
                d = add(&d, &term);
            }
            d
        })
        .collect()
}

/// Multi-matrix flow by loops.
pub fn oracle_mm_rhs(
    components: &[Vec<DenseTensor>],
    b: Option<&[Vec<DenseTensor>]>,
    k1: f64,
    k2: f64,
) -> Vec<Vec<DenseTensor>> {
    let n = components[0].len();
    components
        .iter()
        .enumerate()
        .map(|(p, comp)| {
            (0..n)
                .map(|j| {
                    let mut d = DenseTensor::zeros(comp[j].shape().to_vec());
                    if let Some(b) = b {
                        d = add(&d, &oracle_rank4_apply(&b[p][j], &comp[j]));
                    }
                    for k in 0..n {
                        let mut w = C64::new(1.0, 0.0);
                        for (l, other) in components.iter().enumerate() {
                            if l != p {
                                w *= inner(&other[j], &other[k]);
                            }
                        }
                        let t1 = mat_mul(&mat_mul(&comp[k], &dagger(&comp[j])), &comp[j]);
                        let t2 = mat_mul(&mat_mul(&comp[j], &dagger(&comp[j])), &comp[k]);
                        let t3 = mat_mul(&mat_mul(&comp[j], &dagger(&comp[k])), &comp[j]);
                        let term = add(
                            &add(
                                &scale(&t1, C64::new(k1 / n as f64, 0.0) * w),
                                &scale(&t2, C64::new(k2 / n as f64, 0.0) * w),
                            ),
                            &scale(&t3, C64::new(-(k1 + k2) / n as f64, 0.0) * w.conj()),
                        );
                        d = add(&d, &term);
                    }
                    d
                })
                .collect()
        })
        .collect()
}

/// Multi-unitary flow by loops.
pub fn oracle_mum_rhs(
    components: &[Vec<DenseTensor>],
    h: Option<&[Vec<DenseTensor>]>,
    kappa: f64,
) -> Vec<Vec<DenseTensor>> {
    let n = components[0].len();
    components
        .iter()
        .enumerate()
        .map(|(p, comp)| {
            (0..n)
                .map(|j| {
                    let mut d = DenseTensor::zeros(comp[j].shape().to_vec());
                    if let Some(h) = h {
                        d = add(&d, &scale(&mat_mul(&h[p][j], &comp[j]), C64::new(0.0, -1.0)));
                    }
                    for k in 0..n {
                        let mut w = C64::new(1.0, 0.0);
                        for (l, other) in components.iter().enumerate() {
                            if l != p {
                                w *= inner(&other[j], &other[k]);
                            }
                        }
                        let t3 = mat_mul(&mat_mul(&comp[j], &dagger(&comp[k])), &comp[j]);
                        let term = add(
                            &scale(&comp[k], C64::new(kappa / n as f64, 0.0) * w),
                            &scale(&t3, C64::new(-kappa / n as f64, 0.0) * w.conj()),
                        );
                        d = add(&d, &term);
                    }
                    d
                })
                .collect()
        })
        .collect()
}

// random feasible data helpers

pub fn rand_unit_tensor(shape: &[usize], rng: &mut Stream) -> DenseTensor {
    let len: usize = shape.iter().product();
    let data: Vec<C64> = (0..len).map(|_| rng.complex_gaussian()).collect();
    let t = DenseTensor::new(shape.to_vec(), data).unwrap();
    let n = norm(&t);
    scale(&t, C64::new(1.0 / n, 0.0))
}

pub fn rand_real_unit_vector(d: usize, rng: &mut Stream) -> DenseTensor {
    let data: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
    let n: f64 = data.iter().map(|x| x * x).sum::<f64>().sqrt();
    DenseTensor::from_real(vec![d], &data.iter().map(|x| x / n).collect::<Vec<_>>()).unwrap()
}

/// Max relative deviation between two derivative lists.
pub fn rel_dev(a: &[DenseTensor], b: &[DenseTensor]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff = norm(&sub(x, y));
            diff / norm(y).max(1.0)
        })
        .fold(0.0, f64::max)
}
