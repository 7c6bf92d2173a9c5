//! Cross-checks of every optimized operation against independently written
//! brute-force loop oracles, plus the worked identities connecting the model
//! reductions to the full tensor flow.

mod common;

use common as o;
use lohe::diagnostics;
use lohe::model::{
    build_kappa, build_lt_freq_from_dm, build_lt_freq_from_dum, build_lt_freq_from_mm,
    check_rank2m_skew, dm_rhs, dsom_rhs, dum_rhs, lt_rhs, mm_rhs, mum_rhs, rank4_from_hermitian,
    sds_rhs, sms_rhs, CouplingPattern, CouplingSpec, Ensemble, Manifold, ModelKind, Strengths,
};
use lohe::scenario::{gen_sphere_ensemble, Stream};
use lohe::tensor::{
    cubic_coupling_term, frobenius_inner, matricize, tensor_product, C64, DenseTensor, IndexVector,
};

fn rng(seed: u64) -> Stream {
    Stream::new(seed)
}

fn rand_skew_hermitian(n: usize, r: &mut Stream) -> DenseTensor {
    let mut k = DenseTensor::zeros(vec![n, n]);
    for i in 0..n {
        k.data_mut()[i * n + i] = C64::new(0.0, r.gaussian());
        for j in i + 1..n {
            let z = r.complex_gaussian();
            k.data_mut()[i * n + j] = z;
            k.data_mut()[j * n + i] = -z.conj();
        }
    }
    k
}

fn rand_hermitian(n: usize, r: &mut Stream) -> DenseTensor {
    let k = rand_skew_hermitian(n, r);
    o::scale(&k, C64::new(0.0, 1.0))
}

fn rand_skew_rank4(d1: usize, d2: usize, r: &mut Stream) -> DenseTensor {
    let k = rand_skew_hermitian(d1 * d2, r);
    DenseTensor::new(vec![d1, d2, d1, d2], k.data().to_vec()).unwrap()
}

fn rand_unitary(n: usize, seed: u64) -> DenseTensor {
    lohe::scenario::gen_random_unitary(n, seed).unwrap()
}

fn unit_ensemble(shape: &[usize], count: usize, seed: u64) -> Ensemble {
    let mut r = rng(seed);
    let states = (0..count).map(|_| o::rand_unit_tensor(shape, &mut r)).collect();
    let manifold =
        if shape.len() == 1 { Manifold::Sphere } else { Manifold::RectUnitNorm };
    Ensemble::new(states, ModelKind::Lt, manifold).unwrap()
}

fn unitary_ensemble(n: usize, count: usize, seed: u64) -> Ensemble {
    let states = (0..count).map(|j| rand_unitary(n, seed.wrapping_add(j as u64))).collect();
    Ensemble::new(states, ModelKind::Dum, Manifold::Unitary).unwrap()
}

fn so_ensemble(n: usize, count: usize, seed: u64) -> Ensemble {
    let mut r = rng(seed);
    let states: Vec<DenseTensor> = (0..count)
        .map(|_| {
            // small random rotation via the polar factor of I + skew
            let mut k = DenseTensor::zeros(vec![n, n]);
            for i in 0..n {
                for j in i + 1..n {
                    let x = r.gaussian() * 0.4;
                    k.data_mut()[i * n + j] = C64::new(x, 0.0);
                    k.data_mut()[j * n + i] = C64::new(-x, 0.0);
                }
            }
            let mut s = lohe::linalg::identity(n);
            for (a, b) in s.data_mut().iter_mut().zip(k.data()) {
                *a += b;
            }
            lohe::linalg::polar_factor(&s).unwrap()
        })
        .collect();
    Ensemble::new(states, ModelKind::Dsom, Manifold::SpecialOrthogonal).unwrap()
}

// tensor-core oracles

#[test]
fn tensor_product_matches_nested_loops() {
    let mut r = rng(1);
    for _ in 0..20 {
        let a = o::rand_unit_tensor(&[2, 2], &mut r);
        let b = o::rand_unit_tensor(&[2, 2], &mut r);
        let got = tensor_product(&a, &b);
        for a1 in 0..2 {
            for b1 in 0..2 {
                for a2 in 0..2 {
                    for b2 in 0..2 {
                        let want = o::get2(&a, a1, b1) * o::get2(&b, a2, b2);
                        assert!((got.get(&[a1, b1, a2, b2]) - want).norm() < 1e-15);
                    }
                }
            }
        }
    }
}

#[test]
fn frobenius_inner_conjugate_symmetry() {
    let mut r = rng(2);
    for _ in 0..50 {
        let a = o::rand_unit_tensor(&[3, 2], &mut r);
        let b = o::rand_unit_tensor(&[3, 2], &mut r);
        let ab = frobenius_inner(&a, &b).unwrap();
        let ba = frobenius_inner(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-15);
        assert!((ab - o::inner(&a, &b)).norm() < 1e-15);
    }
}

#[test]
fn contract_freq_matches_index_loops() {
    let mut r = rng(3);
    for _ in 0..20 {
        let t = o::rand_unit_tensor(&[2, 2], &mut r);
        let a4 = rand_skew_rank4(2, 2, &mut r);
        let got = lohe::tensor::contract_freq(&a4, &t).unwrap();
        // independent full loop
        for r1 in 0..2 {
            for c1 in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for r2 in 0..2 {
                    for c2 in 0..2 {
                        acc += a4.get(&[r1, c1, r2, c2]) * t.get(&[r2, c2]);
                    }
                }
                assert!((got.get(&[r1, c1]) - acc).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn cubic_matches_loop_oracle_all_index_vectors() {
    let mut r = rng(4);
    for bits in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
        for _ in 0..10 {
            let x = o::rand_unit_tensor(&[2, 3], &mut r);
            let y = o::rand_unit_tensor(&[2, 3], &mut r);
            let z = o::rand_unit_tensor(&[2, 3], &mut r);
            let iv = IndexVector::new(bits.to_vec()).unwrap();
            let got = cubic_coupling_term(&iv, &x, &y, &z).unwrap();
            let want = o::oracle_cubic(&bits, &x, &y, &z);
            assert!(o::norm(&o::sub(&got, &want)) < 1e-13);
        }
    }
}

#[test]
fn matricize_factorized_product_identity() {
    // row/column grouping of U ⊗ V under (0,1,1,1): M(T_i) M(T_j)† equals
    // ⟨V_j, V_i⟩ · U_i U_j†
    let mut r = rng(5);
    for _ in 0..10 {
        let u_i = o::rand_unit_tensor(&[2, 2], &mut r);
        let v_i = o::rand_unit_tensor(&[2, 2], &mut r);
        let u_j = o::rand_unit_tensor(&[2, 2], &mut r);
        let v_j = o::rand_unit_tensor(&[2, 2], &mut r);
        let t_i = tensor_product(&u_i, &v_i);
        let t_j = tensor_product(&u_j, &v_j);
        let iv = IndexVector::new(vec![0, 1, 1, 1]).unwrap();
        let m_i = matricize(&t_i, &iv).unwrap();
        let m_j = matricize(&t_j, &iv).unwrap();
        let got = o::mat_mul(&m_i, &o::dagger(&m_j));
        let want = o::scale(&o::mat_mul(&u_i, &o::dagger(&u_j)), o::inner(&v_j, &v_i));
        assert!(o::norm(&o::sub(&got, &want)) < 1e-13);
    }
}

#[test]
fn cubic_equals_matricized_triple_product() {
    // cubic(i*, x, y, z) is the unmatricization of M(x) M(y)† M(z)
    let mut r = rng(6);
    let shape = [2usize, 2, 2, 2];
    for bits in [[0u8, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [0, 1, 0, 1]] {
        let x = o::rand_unit_tensor(&shape, &mut r);
        let y = o::rand_unit_tensor(&shape, &mut r);
        let z = o::rand_unit_tensor(&shape, &mut r);
        let iv = IndexVector::new(bits.to_vec()).unwrap();
        let got = cubic_coupling_term(&iv, &x, &y, &z).unwrap();
        let mx = matricize(&x, &iv).unwrap();
        let my = matricize(&y, &iv).unwrap();
        let mz = matricize(&z, &iv).unwrap();
        let triple = o::mat_mul(&o::mat_mul(&mx, &o::dagger(&my)), &mz);
        let back = lohe::tensor::unmatricize(&triple, &shape, &iv).unwrap();
        assert!(o::norm(&o::sub(&got, &back)) < 1e-13);
    }
}

// model oracles: 100 random small instances per model (acceptance运 criterion
// lives in the acceptance suite; these cover targeted shapes and data)

#[test]
fn lt_rhs_matches_oracle() {
    let mut r = rng(7);
    for trial in 0..30 {
        let shape = vec![2, 2];
        let states: Vec<DenseTensor> =
            (0..3).map(|_| o::rand_unit_tensor(&shape, &mut r)).collect();
        let freq: Vec<DenseTensor> = (0..3).map(|_| rand_skew_rank4(2, 2, &mut r)).collect();
        let mut map = std::collections::BTreeMap::new();
        let mut omap = Vec::new();
        for bits in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            let k = r.uniform();
            map.insert(IndexVector::new(bits.to_vec()).unwrap(), k);
            omap.push((bits.to_vec(), k));
        }
        let ens =
            Ensemble::new(states.clone(), ModelKind::Lt, Manifold::UnitNormTensor).unwrap();
        let spec = CouplingSpec::from_map(map).unwrap();
        let got = lt_rhs(&ens, Some(&freq), &spec).unwrap();
        let want = o::oracle_lt_rhs(&states, Some(&freq), &omap);
        assert!(o::rel_dev(&got, &want) < 1e-12, "trial {trial}");
    }
}

#[test]
fn sds_rhs_matches_oracle() {
    let mut r = rng(8);
    for _ in 0..30 {
        let u: Vec<DenseTensor> = (0..3).map(|_| o::rand_real_unit_vector(3, &mut r)).collect();
        let v: Vec<DenseTensor> = (0..3).map(|_| o::rand_real_unit_vector(3, &mut r)).collect();
        let omega: Vec<DenseTensor> = (0..3)
            .map(|_| {
                let mut w = DenseTensor::zeros(vec![3, 3]);
                for i in 0..3 {
                    for j in i + 1..3 {
                        let x = r.gaussian();
                        w.data_mut()[i * 3 + j] = C64::new(x, 0.0);
                        w.data_mut()[j * 3 + i] = C64::new(-x, 0.0);
                    }
                }
                w
            })
            .collect();
        let ue = Ensemble::new(u.clone(), ModelKind::Sds, Manifold::Sphere).unwrap();
        let ve = Ensemble::new(v.clone(), ModelKind::Sds, Manifold::Sphere).unwrap();
        let (du, dv) = sds_rhs(&ue, &ve, Some(&omega), None, 1.3).unwrap();
        let (ou, ov) = o::oracle_sds_rhs(&u, &v, Some(&omega), None, 1.3);
        assert!(o::rel_dev(&du, &ou) < 1e-12);
        assert!(o::rel_dev(&dv, &ov) < 1e-12);
    }
}

#[test]
fn sms_rhs_matches_oracle_and_tensor_flow() {
    let mut r = rng(9);
    for _ in 0..10 {
        let comps: Vec<Vec<DenseTensor>> = (0..3)
            .map(|_| (0..2).map(|_| o::rand_real_unit_vector(2, &mut r)).collect())
            .collect();
        let ens: Vec<Ensemble> = comps
            .iter()
            .map(|c| Ensemble::new(c.clone(), ModelKind::Sms, Manifold::Sphere).unwrap())
            .collect();
        let kappa = 0.9;
        let got = sms_rhs(&ens, kappa).unwrap();
        let want = o::oracle_sms_rhs(&comps, kappa);
        for (g, w) in got.iter().zip(&want) {
            assert!(o::rel_dev(g, w) < 1e-12);
        }

        // the tensor product of the components satisfies the tensor flow with
        // the one-hot coupling pattern: d/dt (⊗ u^k) = Σ_k ⊗ ... u̇^k ...
        let products: Vec<DenseTensor> = (0..2)
            .map(|i| {
                let mut t = comps[0][i].clone();
                for c in &comps[1..] {
                    t = tensor_product(&t, &c[i]);
                }
                t
            })
            .collect();
        let t_ens =
            Ensemble::new(products, ModelKind::Lt, Manifold::UnitNormTensor).unwrap();
        let spec = build_kappa(CouplingPattern::Sms, 3, Strengths::Single(kappa)).unwrap();
        let lt = lt_rhs(&t_ens, None, &spec).unwrap();
        for i in 0..2 {
            // Leibniz combination of the component derivatives
            let mut want_i = DenseTensor::zeros(vec![2, 2, 2]);
            for k in 0..3 {
                let mut factors: Vec<&DenseTensor> =
                    (0..3).map(|l| &comps[l][i]).collect();
                factors[k] = &got[k][i];
                let mut t = factors[0].clone();
                for f in &factors[1..] {
                    t = tensor_product(&t, f);
                }
                for (w, v) in want_i.data_mut().iter_mut().zip(t.data()) {
                    *w += v;
                }
            }
            assert!(o::norm(&o::sub(&lt[i], &want_i)) < 1e-12);
        }
    }
}

#[test]
fn dm_rhs_matches_oracle_rectangular() {
    let mut r = rng(10);
    for _ in 0..30 {
        let u: Vec<DenseTensor> = (0..2).map(|_| o::rand_unit_tensor(&[2, 3], &mut r)).collect();
        let v: Vec<DenseTensor> = (0..2).map(|_| o::rand_unit_tensor(&[3, 2], &mut r)).collect();
        let b: Vec<DenseTensor> = (0..2).map(|_| rand_skew_rank4(2, 3, &mut r)).collect();
        let c: Vec<DenseTensor> = (0..2).map(|_| rand_skew_rank4(3, 2, &mut r)).collect();
        let ue = Ensemble::new(u.clone(), ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
        let ve = Ensemble::new(v.clone(), ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
        let (du, dv) = dm_rhs(&ue, &ve, Some(&b), Some(&c), 1.0, 2.0).unwrap();
        let (ou, ov) = o::oracle_dm_rhs(&u, &v, Some(&b), Some(&c), 1.0, 2.0);
        assert!(o::rel_dev(&du, &ou) < 1e-12);
        assert!(o::rel_dev(&dv, &ov) < 1e-12);
    }
}

#[test]
fn dum_rhs_matches_oracle() {
    let mut seed = 100u64;
    for _ in 0..30 {
        let u = unitary_ensemble(2, 2, seed);
        let v = unitary_ensemble(3, 2, seed + 50);
        seed += 100;
        let mut r = rng(seed);
        let h: Vec<DenseTensor> = (0..2).map(|_| rand_hermitian(2, &mut r)).collect();
        let g: Vec<DenseTensor> = (0..2).map(|_| rand_hermitian(3, &mut r)).collect();
        let (du, dv) = dum_rhs(&u, &v, Some(&h), Some(&g), 0.8).unwrap();
        let (ou, ov) = o::oracle_dum_rhs(u.states(), v.states(), Some(&h), Some(&g), 0.8);
        assert!(o::rel_dev(&du, &ou) < 1e-12);
        assert!(o::rel_dev(&dv, &ov) < 1e-12);
    }
}

#[test]
fn dum_scalar_phase_reduction() {
    // 1×1 states: the combined phase obeys the sine law with gain 4κ/N
    let n = 4usize;
    let mut r = rng(11);
    let theta: Vec<f64> = (0..n).map(|_| r.uniform() * 6.28).collect();
    let phi: Vec<f64> = (0..n).map(|_| r.uniform() * 6.28).collect();
    let scalar = |t: f64| DenseTensor::matrix(1, 1, vec![C64::new(t.cos(), t.sin())]).unwrap();
    let u = Ensemble::new(theta.iter().map(|&t| scalar(t)).collect(), ModelKind::Dum, Manifold::Unitary).unwrap();
    let v = Ensemble::new(phi.iter().map(|&t| scalar(t)).collect(), ModelKind::Dum, Manifold::Unitary).unwrap();
    let kappa = 0.7;
    let (du, dv) = dum_rhs(&u, &v, None, None, kappa).unwrap();
    for j in 0..n {
        let theta_dot = (du[j].data()[0] * u.states()[j].data()[0].conj()).im;
        let phi_dot = (dv[j].data()[0] * v.states()[j].data()[0].conj()).im;
        let psi_dot = theta_dot + phi_dot;
        let want: f64 = (0..n)
            .map(|k| (theta[k] + phi[k] - theta[j] - phi[j]).sin())
            .sum::<f64>()
            * 4.0
            * kappa
            / n as f64;
        assert!((psi_dot - want).abs() < 1e-12, "{psi_dot} vs {want}");
    }
}

#[test]
fn dm_on_unitary_inputs_equals_dum_with_merged_kappa() {
    let u = unitary_ensemble(2, 3, 500);
    let v = unitary_ensemble(2, 3, 600);
    let (k1, k2) = (0.6, 0.9);
    let (dm_u, dm_v) = dm_rhs(&u, &v, None, None, k1, k2).unwrap();
    let (dum_u, dum_v) = dum_rhs(&u, &v, None, None, k1 + k2).unwrap();
    assert!(o::rel_dev(&dm_u, &dum_u) < 1e-12);
    assert!(o::rel_dev(&dm_v, &dum_v) < 1e-12);
}

#[test]
fn dsom_rhs_matches_oracle() {
    for seed in 0..10u64 {
        let u = so_ensemble(3, 3, 20 + seed);
        let v = so_ensemble(3, 3, 40 + seed);
        let mut r = rng(60 + seed);
        let omega: Vec<DenseTensor> = (0..3)
            .map(|_| {
                let mut w = DenseTensor::zeros(vec![3, 3]);
                for i in 0..3 {
                    for j in i + 1..3 {
                        let x = r.gaussian();
                        w.data_mut()[i * 3 + j] = C64::new(x, 0.0);
                        w.data_mut()[j * 3 + i] = C64::new(-x, 0.0);
                    }
                }
                w
            })
            .collect();
        let (du, dv) = dsom_rhs(&u, &v, Some(&omega), None, 1.1).unwrap();
        let (ou, ov) = o::oracle_dsom_rhs(u.states(), v.states(), Some(&omega), None, 1.1);
        assert!(o::rel_dev(&du, &ou) < 1e-12);
        assert!(o::rel_dev(&dv, &ov) < 1e-12);
        // real symmetry of the inner products is exact
        let c01 = frobenius_inner(&u.states()[0], &u.states()[1]).unwrap();
        let c10 = frobenius_inner(&u.states()[1], &u.states()[0]).unwrap();
        assert_eq!(c01.re, c10.re);
        assert_eq!(c01.im, 0.0);
    }
}

#[test]
fn mm_rhs_matches_oracle_and_dm_for_two() {
    let mut r = rng(12);
    for _ in 0..10 {
        let comps: Vec<Vec<DenseTensor>> = (0..3)
            .map(|_| (0..2).map(|_| o::rand_unit_tensor(&[2, 2], &mut r)).collect())
            .collect();
        let b: Vec<Vec<DenseTensor>> = (0..3)
            .map(|_| (0..2).map(|_| rand_skew_rank4(2, 2, &mut r)).collect())
            .collect();
        let ens: Vec<Ensemble> = comps
            .iter()
            .map(|c| Ensemble::new(c.clone(), ModelKind::Mm, Manifold::RectUnitNorm).unwrap())
            .collect();
        let got = mm_rhs(&ens, Some(&b), 0.7, 1.3).unwrap();
        let want = o::oracle_mm_rhs(&comps, Some(&b), 0.7, 1.3);
        for (g, w) in got.iter().zip(&want) {
            assert!(o::rel_dev(g, w) < 1e-12);
        }
    }
    // two components coincide with the two-matrix flow
    let u = unit_ensemble(&[2, 2], 3, 77);
    let v = unit_ensemble(&[2, 2], 3, 78);
    let got = mm_rhs(&[u.clone(), v.clone()], None, 0.5, 0.25).unwrap();
    let (du, dv) = dm_rhs(&u, &v, None, None, 0.5, 0.25).unwrap();
    assert!(o::rel_dev(&got[0], &du) < 1e-13);
    assert!(o::rel_dev(&got[1], &dv) < 1e-13);
}

#[test]
fn mum_rhs_matches_oracle_and_dum_for_two() {
    for seed in 0..10u64 {
        let comps: Vec<Ensemble> = (0..3).map(|p| unitary_ensemble(2, 2, 900 + seed * 10 + p)).collect();
        let mut r = rng(1000 + seed);
        let h: Vec<Vec<DenseTensor>> = (0..3)
            .map(|_| (0..2).map(|_| rand_hermitian(2, &mut r)).collect())
            .collect();
        let got = mum_rhs(&comps, Some(&h), 0.8).unwrap();
        let states: Vec<Vec<DenseTensor>> =
            comps.iter().map(|c| c.states().to_vec()).collect();
        let want = o::oracle_mum_rhs(&states, Some(&h), 0.8);
        for (g, w) in got.iter().zip(&want) {
            assert!(o::rel_dev(g, w) < 1e-12);
        }
    }
    let u = unitary_ensemble(2, 3, 7000);
    let v = unitary_ensemble(2, 3, 7100);
    let got = mum_rhs(&[u.clone(), v.clone()], None, 1.4).unwrap();
    let (du, dv) = dum_rhs(&u, &v, None, None, 1.4).unwrap();
    assert!(o::rel_dev(&got[0], &du) < 1e-13);
    assert!(o::rel_dev(&got[1], &dv) < 1e-13);
}

// free-flow constructions

#[test]
fn dm_freq_embedding_identity() {
    // A (U ⊗ V) = (B U) ⊗ V + U ⊗ (C V) on five random pairs
    let mut r = rng(13);
    let b = rand_skew_rank4(2, 2, &mut r);
    let c = rand_skew_rank4(2, 2, &mut r);
    let a = build_lt_freq_from_dm(&b, &c).unwrap();
    check_rank2m_skew(&a).unwrap();
    for _ in 0..5 {
        let u = o::rand_unit_tensor(&[2, 2], &mut r);
        let v = o::rand_unit_tensor(&[2, 2], &mut r);
        let t = tensor_product(&u, &v);
        let got = lohe::tensor::contract_freq(&a, &t).unwrap();
        let want = o::add(
            &tensor_product(&o::oracle_rank4_apply(&b, &u), &v),
            &tensor_product(&u, &o::oracle_rank4_apply(&c, &v)),
        );
        assert!(o::norm(&o::sub(&got, &want)) < 1e-13);
    }
}

#[test]
fn hermitian_freq_embedding_identity() {
    let mut r = rng(14);
    let h = rand_hermitian(2, &mut r);
    let g = rand_hermitian(2, &mut r);
    let a = build_lt_freq_from_dum(&h, &g).unwrap();
    for _ in 0..5 {
        let u = o::rand_unit_tensor(&[2, 2], &mut r);
        let v = o::rand_unit_tensor(&[2, 2], &mut r);
        let t = tensor_product(&u, &v);
        let got = lohe::tensor::contract_freq(&a, &t).unwrap();
        let mi = C64::new(0.0, -1.0);
        let want = o::add(
            &tensor_product(&o::scale(&o::mat_mul(&h, &u), mi), &v),
            &tensor_product(&u, &o::scale(&o::mat_mul(&g, &v), mi)),
        );
        assert!(o::norm(&o::sub(&got, &want)) < 1e-13);
    }
}

#[test]
fn mm_freq_matches_dm_for_two_and_leibniz_for_three() {
    let mut r = rng(15);
    let b1 = rand_skew_rank4(2, 2, &mut r);
    let b2 = rand_skew_rank4(2, 2, &mut r);
    let from_mm = build_lt_freq_from_mm(&[b1.clone(), b2.clone()]).unwrap();
    let from_dm = build_lt_freq_from_dm(&b1, &b2).unwrap();
    assert!(o::norm(&o::sub(&from_mm, &from_dm)) < 1e-14);

    let b3 = rand_skew_rank4(2, 2, &mut r);
    let a = build_lt_freq_from_mm(&[b1.clone(), b2.clone(), b3.clone()]).unwrap();
    check_rank2m_skew(&a).unwrap();
    for _ in 0..5 {
        let u1 = o::rand_unit_tensor(&[2, 2], &mut r);
        let u2 = o::rand_unit_tensor(&[2, 2], &mut r);
        let u3 = o::rand_unit_tensor(&[2, 2], &mut r);
        let t = tensor_product(&tensor_product(&u1, &u2), &u3);
        let got = lohe::tensor::contract_freq(&a, &t).unwrap();
        let mut want = tensor_product(
            &tensor_product(&o::oracle_rank4_apply(&b1, &u1), &u2),
            &u3,
        );
        want = o::add(
            &want,
            &tensor_product(&tensor_product(&u1, &o::oracle_rank4_apply(&b2, &u2)), &u3),
        );
        want = o::add(
            &want,
            &tensor_product(&tensor_product(&u1, &u2), &o::oracle_rank4_apply(&b3, &u3)),
        );
        assert!(o::norm(&o::sub(&got, &want)) < 1e-13);
    }
}

#[test]
fn rank4_hermitian_variant_matches_mm_builder() {
    let mut r = rng(16);
    let h1 = rand_hermitian(2, &mut r);
    let h2 = rand_hermitian(2, &mut r);
    let direct = lohe::model::build_lt_freq_from_mum(&[h1.clone(), h2.clone()]).unwrap();
    let via_rank4 = build_lt_freq_from_mm(&[
        rank4_from_hermitian(&h1).unwrap(),
        rank4_from_hermitian(&h2).unwrap(),
    ])
    .unwrap();
    assert!(o::norm(&o::sub(&direct, &via_rank4)) < 1e-14);
}

// separability consistency: the embedded tensor flow equals the Leibniz
// combination of the component flows on factorized states

#[test]
fn dm_separability_infinitesimal() {
    let mut r = rng(17);
    for _ in 0..5 {
        let u: Vec<DenseTensor> = (0..3).map(|_| o::rand_unit_tensor(&[2, 2], &mut r)).collect();
        let v: Vec<DenseTensor> = (0..3).map(|_| o::rand_unit_tensor(&[2, 2], &mut r)).collect();
        let b: Vec<DenseTensor> = (0..3).map(|_| rand_skew_rank4(2, 2, &mut r)).collect();
        let c: Vec<DenseTensor> = (0..3).map(|_| rand_skew_rank4(2, 2, &mut r)).collect();
        let (k1, k2) = (0.8, 0.3);
        let ue = Ensemble::new(u.clone(), ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
        let ve = Ensemble::new(v.clone(), ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
        let (du, dv) = dm_rhs(&ue, &ve, Some(&b), Some(&c), k1, k2).unwrap();

        let products: Vec<DenseTensor> =
            (0..3).map(|j| tensor_product(&u[j], &v[j])).collect();
        let t_ens = Ensemble::new(products, ModelKind::Lt, Manifold::UnitNormTensor).unwrap();
        let spec = build_kappa(CouplingPattern::Dm, 2, Strengths::Pair(k1, k2)).unwrap();
        let freq: Vec<DenseTensor> = (0..3)
            .map(|j| build_lt_freq_from_dm(&b[j], &c[j]).unwrap())
            .collect();
        let lt = lt_rhs(&t_ens, Some(&freq), &spec).unwrap();
        for j in 0..3 {
            let want = o::add(
                &tensor_product(&du[j], &v[j]),
                &tensor_product(&u[j], &dv[j]),
            );
            assert!(o::norm(&o::sub(&lt[j], &want)) < 1e-12);
        }
    }
}

// dissipation identity: the tensor potential identity matches the matrix
// dissipation sum on factorized two-matrix data

#[test]
fn dissipation_identity_tensor_vs_matrix_form() {
    let mut r = rng(18);
    let u: Vec<DenseTensor> = (0..4).map(|_| o::rand_unit_tensor(&[2, 2], &mut r)).collect();
    let v: Vec<DenseTensor> = (0..4).map(|_| o::rand_unit_tensor(&[2, 2], &mut r)).collect();
    let ue = Ensemble::new(u.clone(), ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
    let ve = Ensemble::new(v.clone(), ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
    let (k1, k2) = (1.0, 0.6);
    let matrix_form = diagnostics::dissipation_sum(&ue, &ve, k1, k2).unwrap();

    // tensor side: (1/N) Σ_j Σ_{i*} κ_{i*} ‖M(T_c)M(T_j)† − M(T_j)M(T_c)†‖²
    let n = 4usize;
    let products: Vec<DenseTensor> = (0..n).map(|j| tensor_product(&u[j], &v[j])).collect();
    let mut centroid = DenseTensor::zeros(vec![2, 2, 2, 2]);
    for t in &products {
        for (c, x) in centroid.data_mut().iter_mut().zip(t.data()) {
            *c += x / C64::new(n as f64, 0.0);
        }
    }
    let spec = build_kappa(CouplingPattern::Dm, 2, Strengths::Pair(k1, k2)).unwrap();
    let mut tensor_form = 0.0;
    for (iv, kappa) in spec.nonzero() {
        for t_j in &products {
            let mc = matricize(&centroid, iv).unwrap();
            let mj = matricize(t_j, iv).unwrap();
            let prod = o::mat_mul(&mc, &o::dagger(&mj));
            let comm = o::sub(&prod, &o::dagger(&prod));
            tensor_form += kappa / n as f64 * o::norm(&comm).powi(2);
        }
    }
    assert!(
        (matrix_form - tensor_form).abs() < 1e-12 * matrix_form.max(1.0),
        "{matrix_form} vs {tensor_form}"
    );
}

// diagnostics oracles

#[test]
fn dissimilarity_matches_loop_oracle() {
    let a = unitary_ensemble(2, 3, 31);
    let b = unitary_ensemble(2, 3, 32);
    let c = unitary_ensemble(2, 3, 33);
    let d = unitary_ensemble(2, 3, 34);
    let got = diagnostics::dissimilarity_functional((&a, &b), (&c, &d)).unwrap();
    let mut d_u: f64 = 0.0;
    let mut s_u: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let p = o::mat_mul(&a.states()[i], &o::dagger(&a.states()[j]));
            let q = o::mat_mul(&c.states()[i], &o::dagger(&c.states()[j]));
            d_u = d_u.max(o::norm(&o::sub(&p, &q)));
            s_u = s_u.max(
                (o::inner(&a.states()[i], &a.states()[j])
                    - o::inner(&c.states()[i], &c.states()[j]))
                .norm(),
            );
        }
    }
    let mut d_v: f64 = 0.0;
    let mut s_v: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let p = o::mat_mul(&b.states()[i], &o::dagger(&b.states()[j]));
            let q = o::mat_mul(&d.states()[i], &o::dagger(&d.states()[j]));
            d_v = d_v.max(o::norm(&o::sub(&p, &q)));
            s_v = s_v.max(
                (o::inner(&b.states()[i], &b.states()[j])
                    - o::inner(&d.states()[i], &d.states()[j]))
                .norm(),
            );
        }
    }
    assert!((got - (d_u + d_v + s_u + s_v)).abs() < 1e-12);
}

#[test]
fn potential_product_equals_tensor_potential() {
    let u = unit_ensemble(&[2, 2], 4, 41);
    let v = unit_ensemble(&[3, 2], 4, 42);
    let e = diagnostics::potential_product(&[u.clone(), v.clone()]).unwrap();
    let products: Vec<DenseTensor> = (0..4)
        .map(|j| tensor_product(&u.states()[j], &v.states()[j]))
        .collect();
    let t_ens = Ensemble::new(products, ModelKind::Lt, Manifold::UnitNormTensor).unwrap();
    let vt = diagnostics::potential_lt(&t_ens).unwrap();
    assert!((e - vt).abs() < 1e-13);
}

#[test]
fn sphere_oracle_inner_products_positive() {
    let ens = gen_sphere_ensemble(3, 6, 0.35, 99).unwrap();
    for i in 0..6 {
        for j in i + 1..6 {
            let ip = o::inner(&ens.states()[i], &ens.states()[j]).re;
            assert!(ip > 0.1, "inner product {ip}");
        }
    }
}

#[test]
fn separability_residual_tracks_perturbation() {
    let mut r = rng(55);
    let u = o::rand_unit_tensor(&[2, 2], &mut r);
    let v = o::rand_unit_tensor(&[2, 2], &mut r);
    let mut t = tensor_product(&u, &v);
    let eps = 1e-4;
    // perturb along a fixed unit direction
    let bump = o::rand_unit_tensor(&[2, 2, 2, 2], &mut r);
    for (x, b) in t.data_mut().iter_mut().zip(bump.data()) {
        *x += C64::new(eps, 0.0) * b;
    }
    let te = Ensemble::with_tolerance(
        vec![t],
        ModelKind::Lt,
        Manifold::UnitNormTensor,
        1e-2,
    )
    .unwrap();
    let ue = Ensemble::new(vec![u], ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
    let ve = Ensemble::new(vec![v], ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
    let res = diagnostics::separability_residual(&te, &[ue, ve]).unwrap();
    assert!((res - eps).abs() < 0.05 * eps, "residual {res} for eps {eps}");
}

// identical-ensemble stationarity across every model

#[test]
fn identical_ensembles_are_stationary_everywhere() {
    let mut r = rng(60);
    let tiny = 1e-13;

    let t = o::rand_unit_tensor(&[2, 2, 2, 2], &mut r);
    let ens =
        Ensemble::new(vec![t.clone(), t.clone(), t], ModelKind::Lt, Manifold::UnitNormTensor)
            .unwrap();
    let spec = build_kappa(CouplingPattern::Dm, 2, Strengths::Pair(1.0, 0.5)).unwrap();
    for d in lt_rhs(&ens, None, &spec).unwrap() {
        assert!(o::norm(&d) < tiny);
    }

    let u = o::rand_unit_tensor(&[2, 3], &mut r);
    let v = o::rand_unit_tensor(&[3, 2], &mut r);
    let ue = Ensemble::new(vec![u.clone(), u], ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
    let ve = Ensemble::new(vec![v.clone(), v], ModelKind::Dm, Manifold::RectUnitNorm).unwrap();
    let (du, dv) = dm_rhs(&ue, &ve, None, None, 1.0, 2.0).unwrap();
    for d in du.iter().chain(&dv) {
        assert!(o::norm(d) < tiny);
    }

    let uq = rand_unitary(3, 61);
    let vq = rand_unitary(2, 62);
    let ue = Ensemble::new(vec![uq.clone(), uq.clone(), uq], ModelKind::Dum, Manifold::Unitary)
        .unwrap();
    let ve = Ensemble::new(vec![vq.clone(), vq.clone(), vq], ModelKind::Dum, Manifold::Unitary)
        .unwrap();
    let (du, dv) = dum_rhs(&ue, &ve, None, None, 1.5).unwrap();
    for d in du.iter().chain(&dv) {
        assert!(o::norm(d) < tiny);
    }

    let comps: Vec<Ensemble> = (0..3)
        .map(|p| {
            let s = o::rand_unit_tensor(&[2, 2], &mut r);
            let _ = p;
            Ensemble::new(vec![s.clone(), s], ModelKind::Mm, Manifold::RectUnitNorm).unwrap()
        })
        .collect();
    for d in mm_rhs(&comps, None, 0.4, 0.6).unwrap().iter().flatten() {
        assert!(o::norm(d) < tiny);
    }

    let comps: Vec<Ensemble> = (0..3)
        .map(|p| {
            let s = rand_unitary(2, 63 + p);
            Ensemble::new(vec![s.clone(), s], ModelKind::Mum, Manifold::Unitary).unwrap()
        })
        .collect();
    for d in mum_rhs(&comps, None, 0.9).unwrap().iter().flatten() {
        assert!(o::norm(d) < tiny);
    }
}

#[test]
fn locking_metrics_trivial_cases() {
    use lohe::integrate::FlowModel;
    let u = unitary_ensemble(3, 3, 70);
    let v = unitary_ensemble(3, 3, 80);
    let model = FlowModel::Dum { kappa: 1.0, h: None, g: None };
    let parts = vec![u, v];
    // identical solutions synchronize trivially
    let m = diagnostics::locking_metrics(&model, &parts, Some(&parts)).unwrap();
    assert!(m.velocity_sync.unwrap() < 1e-13);
    // a consensus ensemble has zero relative-product drift
    let uq = rand_unitary(3, 90);
    let cons = Ensemble::new(vec![uq.clone(), uq.clone(), uq], ModelKind::Dum, Manifold::Unitary)
        .unwrap();
    let vq = rand_unitary(3, 91);
    let consv = Ensemble::new(vec![vq.clone(), vq.clone(), vq], ModelKind::Dum, Manifold::Unitary)
        .unwrap();
    let m = diagnostics::locking_metrics(&model, &[cons, consv], None).unwrap();
    assert!(m.velocity_sync.is_none());
    assert!(m.product_drift < 1e-13);
}

#[test]
fn frame_identity_for_two_component_runs() {
    use lohe::integrate::FlowModel;
    let u = unitary_ensemble(3, 4, 95);
    let v = unitary_ensemble(2, 4, 96);
    let model = FlowModel::Dum { kappa: 1.0, h: None, g: None };
    let frame = diagnostics::frame_for(&model, &[u, v], 0.0).unwrap();
    let sum = frame.d_u + frame.d_v + frame.s_u + frame.s_v;
    assert!((frame.l - sum).abs() < 1e-14);
}
