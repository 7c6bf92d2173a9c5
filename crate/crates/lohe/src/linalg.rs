//! Matrix kernels for rank-2 tensors: products, adjoint products, polar
//! factors, matrix exponential, determinant. Everything is written against the
//! flat row-major storage of [`DenseTensor`] so the hot loops vectorize.

use crate::error::{Error, Result};
use crate::tensor::{C64, DenseTensor, ONE, ZERO};

pub fn mat_dims(t: &DenseTensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::NotSquare(format!("{other:?}"))),
    }
}

fn square_dim(t: &DenseTensor) -> Result<usize> {
    let (r, c) = mat_dims(t)?;
    if r != c {
        return Err(Error::NotSquare(format!("[{r}, {c}]")));
    }
    Ok(r)
}

pub fn identity(n: usize) -> DenseTensor {
    let mut m = DenseTensor::zeros(vec![n, n]);
    for i in 0..n {
        m.data_mut()[i * n + i] = ONE;
    }
    m
}

#[inline]
fn madd_row(dst: &mut [C64], s: C64, src: &[C64]) {
    let (sre, sim) = (s.re, s.im);
    for (d, b) in dst.iter_mut().zip(src) {
        let re = sre * b.re - sim * b.im;
        let im = sre * b.im + sim * b.re;
        d.re += re;
        d.im += im;
    }
}

/// c = a · b with a: p×q, b: q×r, all row-major slices. The k loop is
/// processed in pairs so each pass over the output row does two updates.
pub(crate) fn mm_into(c: &mut [C64], a: &[C64], b: &[C64], p: usize, q: usize, r: usize) {
    c.fill(ZERO);
    for i in 0..p {
        let crow = &mut c[i * r..(i + 1) * r];
        let arow = &a[i * q..(i + 1) * q];
        let mut k = 0;
        while k + 1 < q {
            let s1 = arow[k];
            let s2 = arow[k + 1];
            let b1 = &b[k * r..(k + 1) * r];
            let b2 = &b[(k + 1) * r..(k + 2) * r];
            for ((d, x), y) in crow.iter_mut().zip(b1).zip(b2) {
                let re = s1.re * x.re - s1.im * x.im + s2.re * y.re - s2.im * y.im;
                let im = s1.re * x.im + s1.im * x.re + s2.re * y.im + s2.im * y.re;
                d.re += re;
                d.im += im;
            }
            k += 2;
        }
        if k < q {
            madd_row(crow, arow[k], &b[k * r..(k + 1) * r]);
        }
    }
}

/// c = a† · b with a: q×p, b: q×r.
pub(crate) fn adj_mm_into(c: &mut [C64], a: &[C64], b: &[C64], q: usize, p: usize, r: usize) {
    c.fill(ZERO);
    let mut k = 0;
    while k + 1 < q {
        let a1 = &a[k * p..(k + 1) * p];
        let a2 = &a[(k + 1) * p..(k + 2) * p];
        let b1 = &b[k * r..(k + 1) * r];
        let b2 = &b[(k + 1) * r..(k + 2) * r];
        for i in 0..p {
            let s1 = a1[i].conj();
            let s2 = a2[i].conj();
            let crow = &mut c[i * r..(i + 1) * r];
            for ((d, x), y) in crow.iter_mut().zip(b1).zip(b2) {
                let re = s1.re * x.re - s1.im * x.im + s2.re * y.re - s2.im * y.im;
                let im = s1.re * x.im + s1.im * x.re + s2.re * y.im + s2.im * y.re;
                d.re += re;
                d.im += im;
            }
        }
        k += 2;
    }
    if k < q {
        let arow = &a[k * p..(k + 1) * p];
        let brow = &b[k * r..(k + 1) * r];
        for (i, &s) in arow.iter().enumerate() {
            madd_row(&mut c[i * r..(i + 1) * r], s.conj(), brow);
        }
    }
}

/// c = a · b† with a: p×q, b: r×q.
pub(crate) fn mm_adj_into(c: &mut [C64], a: &[C64], b: &[C64], p: usize, q: usize, r: usize) {
    for i in 0..p {
        let arow = &a[i * q..(i + 1) * q];
        for j in 0..r {
            let brow = &b[j * q..(j + 1) * q];
            let mut re = 0.0;
            let mut im = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                re += x.re * y.re + x.im * y.im;
                im += x.im * y.re - x.re * y.im;
            }
            c[i * r + j] = C64::new(re, im);
        }
    }
}

pub fn matmul(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let (p, q) = mat_dims(a)?;
    let (q2, r) = mat_dims(b)?;
    if q != q2 {
        return Err(Error::ShapeMismatch {
            expected: format!("[{q}, *]"),
            found: format!("[{q2}, {r}]"),
        });
    }
    let mut c = DenseTensor::zeros(vec![p, r]);
    mm_into(c.data_mut(), a.data(), b.data(), p, q, r);
    Ok(c)
}

/// a† · b.
pub fn adjoint_matmul(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let (q, p) = mat_dims(a)?;
    let (q2, r) = mat_dims(b)?;
    if q != q2 {
        return Err(Error::ShapeMismatch {
            expected: format!("[{q}, *]"),
            found: format!("[{q2}, {r}]"),
        });
    }
    let mut c = DenseTensor::zeros(vec![p, r]);
    adj_mm_into(c.data_mut(), a.data(), b.data(), q, p, r);
    Ok(c)
}

/// a · b†.
pub fn matmul_adjoint(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let (p, q) = mat_dims(a)?;
    let (r, q2) = mat_dims(b)?;
    if q != q2 {
        return Err(Error::ShapeMismatch {
            expected: format!("[*, {q}]"),
            found: format!("[{r}, {q2}]"),
        });
    }
    let mut c = DenseTensor::zeros(vec![p, r]);
    mm_adj_into(c.data_mut(), a.data(), b.data(), p, q, r);
    Ok(c)
}

pub fn adjoint(a: &DenseTensor) -> Result<DenseTensor> {
    let (p, q) = mat_dims(a)?;
    let mut out = DenseTensor::zeros(vec![q, p]);
    for i in 0..p {
        for j in 0..q {
            out.data_mut()[j * p + i] = a.data()[i * q + j].conj();
        }
    }
    Ok(out)
}

/// ‖I − X†X‖_F; the unitarity defect of a single square matrix.
pub fn gram_defect(x: &DenseTensor) -> Result<f64> {
    let n = square_dim(x)?;
    let gram = adjoint_matmul(x, x)?;
    Ok(defect_from_gram(gram.data(), n))
}

fn defect_from_gram(gram: &[C64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g = gram[i * n + j];
            let d = if i == j { C64::new(1.0 - g.re, -g.im) } else { -g };
            acc += d.norm_sqr();
        }
    }
    acc.sqrt()
}

/// Maximum absolute row sum (the matrix ∞-norm).
pub fn op_inf_norm(a: &DenseTensor) -> f64 {
    let (p, q) = match mat_dims(a) {
        Ok(d) => d,
        Err(_) => return a.frob_norm(),
    };
    let mut best: f64 = 0.0;
    for i in 0..p {
        let row: f64 = a.data()[i * q..(i + 1) * q].iter().map(|z| z.norm()).sum();
        best = best.max(row);
    }
    best
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &DenseTensor) -> Result<DenseTensor> {
    let n = square_dim(a)?;
    let mut work = a.data().to_vec();
    let mut inv = identity(n);
    let scale = a.frob_norm().max(1e-300);
    for col in 0..n {
        let mut piv = col;
        let mut best = work[col * n + col].norm();
        for row in col + 1..n {
            let v = work[row * n + col].norm();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-14 * scale {
            return Err(Error::SingularMatrix);
        }
        if piv != col {
            for j in 0..n {
                work.swap(col * n + j, piv * n + j);
                inv.data_mut().swap(col * n + j, piv * n + j);
            }
        }
        let d = work[col * n + col];
        let dinv = ONE / d;
        for j in 0..n {
            work[col * n + j] *= dinv;
            inv.data_mut()[col * n + j] *= dinv;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = work[row * n + col];
            if f == ZERO {
                continue;
            }
            for j in 0..n {
                let w = work[col * n + j];
                work[row * n + j] -= f * w;
                let v = inv.data()[col * n + j];
                inv.data_mut()[row * n + j] -= f * v;
            }
        }
    }
    Ok(inv)
}

pub fn determinant(a: &DenseTensor) -> Result<C64> {
    let n = square_dim(a)?;
    let mut work = a.data().to_vec();
    let mut det = ONE;
    for col in 0..n {
        let mut piv = col;
        let mut best = work[col * n + col].norm();
        for row in col + 1..n {
            let v = work[row * n + col].norm();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return Ok(ZERO);
        }
        if piv != col {
            for j in 0..n {
                work.swap(col * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = work[col * n + col];
        det *= d;
        for row in col + 1..n {
            let f = work[row * n + col] / d;
            if f == ZERO {
                continue;
            }
            for j in col..n {
                let w = work[col * n + j];
                work[row * n + j] -= f * w;
            }
        }
    }
    Ok(det)
}

/// Frobenius-nearest unitary (or orthogonal) factor of a nonsingular square
/// matrix. Far from the group a globally convergent Newton iteration
/// X ← (X + X^{-†})/2 is used; once close, the inverse-free Newton-Schulz
/// update X ← X(3I − X†X)/2 finishes quadratically. Real input stays real.
pub fn polar_factor(a: &DenseTensor) -> Result<DenseTensor> {
    let n = square_dim(a)?;
    if !a.is_finite() {
        return Err(Error::NonFiniteDerivative { t: f64::NAN });
    }
    let mut x = a.clone();
    let mut gram = DenseTensor::zeros(vec![n, n]);
    for _ in 0..200 {
        adj_mm_into(gram.data_mut(), x.data(), x.data(), n, n, n);
        let defect = defect_from_gram(gram.data(), n);
        if defect < 1e-13 {
            return Ok(x);
        }
        if defect < 0.4 {
            // x ← 1.5 x − 0.5 x·gram
            let xg = matmul(&x, &gram)?;
            let mut next = x.scale(C64::new(1.5, 0.0));
            next.axpy(C64::new(-0.5, 0.0), &xg);
            x = next;
        } else {
            let inv = invert(&x)?;
            let invadj = adjoint(&inv)?;
            let mut next = x.scale(C64::new(0.5, 0.0));
            next.axpy(C64::new(0.5, 0.0), &invadj);
            x = next;
        }
    }
    Err(Error::SingularMatrix)
}

/// Matrix exponential by scaling-and-squaring with a truncated Taylor series.
pub fn matrix_exp(a: &DenseTensor) -> Result<DenseTensor> {
    let n = square_dim(a)?;
    let norm = a.frob_norm();
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale(C64::new(1.0 / f64::powi(2.0, s as i32), 0.0));
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=30 {
        term = matmul(&term, &scaled)?;
        term = term.scale(C64::new(1.0 / k as f64, 0.0));
        result = result.add(&term)?;
        if term.frob_norm() < 1e-18 * result.frob_norm().max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result)?;
    }
    Ok(result)
}
