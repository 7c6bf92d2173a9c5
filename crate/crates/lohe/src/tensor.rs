//! Dense complex tensors with row-major storage, index-vector arithmetic,
//! and the contraction primitives every model right-hand side is built from.
//!
//! A rank-m tensor of size d₁ × ⋯ × d_m is a flat `Vec<Complex64>` of length
//! ∏ d_k. Rank 0 is a single scalar. Every operation here is a pure function;
//! values are immutable once constructed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = Complex64::new(0.0, 0.0);
pub const ONE: C64 = Complex64::new(1.0, 0.0);
pub const I: C64 = Complex64::new(0.0, 1.0);

/// Rank-m dense complex tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    strides: Vec<usize>,
    data: Vec<C64>,
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch {
                expected: "positive dimensions".into(),
                found: format!("{shape:?}"),
            });
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::DataLength { len: data.len(), expected: len });
        }
        let strides = row_major_strides(&shape);
        Ok(Self { shape, strides, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        let strides = row_major_strides(&shape);
        Self { shape, strides, data: vec![ZERO; len] }
    }

    pub fn scalar(z: C64) -> Self {
        Self { shape: vec![], strides: vec![], data: vec![z] }
    }

    /// Rank-2 constructor, entries in row-major order.
    pub fn matrix(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_real(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        debug_assert_eq!(idx.len(), self.rank());
        let flat: usize = idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
        self.data[flat]
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            strides: self.strides.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            strides: self.strides.clone(),
            data: self.data.iter().map(|w| w * z).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(Self {
            shape: self.shape.clone(),
            strides: self.strides.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_shape(self, other)?;
        Ok(Self {
            shape: self.shape.clone(),
            strides: self.strides.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// self += alpha * other, shapes must already agree.
    pub(crate) fn axpy(&mut self, alpha: C64, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (y, x) in self.data.iter_mut().zip(&other.data) {
            *y += alpha * x;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Serialize for DenseTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            shape: &'a [usize],
            re: Vec<f64>,
            im: Vec<f64>,
        }
        Repr {
            shape: &self.shape,
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            shape: Vec<usize>,
            re: Vec<f64>,
            im: Vec<f64>,
        }
        let r = Repr::deserialize(d)?;
        if r.re.len() != r.im.len() {
            return Err(serde::de::Error::custom("re/im length mismatch"));
        }
        let data = r.re.iter().zip(&r.im).map(|(&a, &b)| C64::new(a, b)).collect();
        DenseTensor::new(r.shape, data).map_err(serde::de::Error::custom)
    }
}

fn check_same_shape(a: &DenseTensor, b: &DenseTensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", a.shape),
            found: format!("{:?}", b.shape),
        });
    }
    Ok(())
}

/// Bit vector i_* ∈ {0,1}^m selecting free/contracted index placement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexVector(Vec<u8>);

impl IndexVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::IndexEntry);
        }
        Ok(Self(bits))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn ones(m: usize) -> Self {
        Self(vec![1; m])
    }

    /// All entries 1 except a single 0 at `pos`.
    pub fn one_zero_at(m: usize, pos: usize) -> Self {
        let mut bits = vec![1; m];
        bits[pos] = 0;
        Self(bits)
    }

    /// All entries 0 except a single 1 at `pos`.
    pub fn one_hot(m: usize, pos: usize) -> Self {
        let mut bits = vec![0; m];
        bits[pos] = 1;
        Self(bits)
    }

    /// Component-wise flip, the (1 − i_*) of the cubic interaction.
    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|&b| 1 - b).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(Error::IndexEntry),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self(bits))
    }
}

impl std::fmt::Display for IndexVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Tensor product: result shape is the concatenation, [a⊗b]_{αβ} = [a]_α [b]_β.
pub fn tensor_product(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
    let mut shape = a.shape.clone();
    shape.extend_from_slice(&b.shape);
    let bl = b.len();
    let mut data = vec![ZERO; a.len() * bl];
    for (i, &av) in a.data.iter().enumerate() {
        let row = &mut data[i * bl..(i + 1) * bl];
        for (dst, &bv) in row.iter_mut().zip(&b.data) {
            *dst = av * bv;
        }
    }
    let strides = row_major_strides(&shape);
    DenseTensor { shape, strides, data }
}

/// Frobenius inner product Σ conj(a) b, conjugate-linear in the first slot.
pub fn frobenius_inner(a: &DenseTensor, b: &DenseTensor) -> Result<C64> {
    check_same_shape(a, b)?;
    let mut acc = ZERO;
    for (x, y) in a.data.iter().zip(&b.data) {
        acc += x.conj() * y;
    }
    Ok(acc)
}

/// Contraction of a rank-2m free-flow tensor against a rank-m state:
/// [out]_{α*0} = Σ_{α*1} [a]_{α*0 α*1} [t]_{α*1}.
pub fn contract_freq(a: &DenseTensor, t: &DenseTensor) -> Result<DenseTensor> {
    let m = t.rank();
    let expected: Vec<usize> = t.shape.iter().chain(t.shape.iter()).copied().collect();
    if a.shape != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{expected:?}"),
            found: format!("{:?}", a.shape),
        });
    }
    let n = t.len();
    let mut out = DenseTensor::zeros(t.shape.clone());
    // Row-major layout makes this a plain matrix-vector product.
    for i in 0..n {
        let row = &a.data[i * n..(i + 1) * n];
        let mut acc = ZERO;
        for (av, tv) in row.iter().zip(&t.data) {
            acc += av * tv;
        }
        out.data[i] = acc;
    }
    let _ = m;
    Ok(out)
}

/// Decode the digit contributions of every flat index for the slot subsets
/// selected by `pick`: returns per-flat-index partial strided offsets over the
/// slots where pick(bit) is true.
fn offset_table(shape: &[usize], strides: &[usize], bits: &[u8], pick: u8) -> Vec<usize> {
    let len: usize = shape.iter().product();
    let mut table = vec![0usize; len];
    for (flat, entry) in table.iter_mut().enumerate() {
        let mut rem = flat;
        let mut off = 0usize;
        for k in 0..shape.len() {
            let digit = rem / strides[k];
            rem %= strides[k];
            if bits[k] == pick {
                off += digit * strides[k];
            }
        }
        *entry = off;
    }
    table
}

/// One cubic interaction term of the tensor flow:
/// [out]_{α*0} = Σ_{α*1} [x]_{α*i*} · conj([y])_{α*1} · [z]_{α*(1−i*)}.
///
/// Slot k of x takes the free index when i_k = 0 and the contracted index when
/// i_k = 1; z takes the opposite; y is fully contracted. Evaluated by explicit
/// index loops; ranks stay small in every model here.
pub fn cubic_coupling_term(
    i_star: &IndexVector,
    x: &DenseTensor,
    y: &DenseTensor,
    z: &DenseTensor,
) -> Result<DenseTensor> {
    check_same_shape(x, y)?;
    check_same_shape(x, z)?;
    if i_star.len() != x.rank() {
        return Err(Error::IndexLength { len: i_star.len(), rank: x.rank() });
    }
    let bits = i_star.bits();
    let len = x.len();
    // Free-index contribution to x comes from the i=0 slots, to z from the
    // i=1 slots; the contracted index contributes the complements. y's index
    // is the contracted flat index itself.
    let fx = offset_table(&x.shape, &x.strides, bits, 0);
    let fz = offset_table(&x.shape, &x.strides, bits, 1);
    let ix = offset_table(&x.shape, &x.strides, bits, 1);
    let iz = offset_table(&x.shape, &x.strides, bits, 0);

    let mut out = DenseTensor::zeros(x.shape.clone());
    for free in 0..len {
        let xf = fx[free];
        let zf = fz[free];
        let mut acc = ZERO;
        for con in 0..len {
            let xv = x.data[xf + ix[con]];
            let yv = y.data[con].conj();
            let zv = z.data[iz[con] + zf];
            acc += xv * yv * zv;
        }
        out.data[free] = acc;
    }
    Ok(out)
}

/// Reshape a tensor into a matrix: slots with i_* = 0 become rows, slots with
/// i_* = 1 become columns, both flattened row-major in slot order. Entry values
/// are only permuted, so the Frobenius norm is preserved and the map inverts.
pub fn matricize(t: &DenseTensor, i_star: &IndexVector) -> Result<DenseTensor> {
    if i_star.len() != t.rank() {
        return Err(Error::IndexLength { len: i_star.len(), rank: t.rank() });
    }
    let bits = i_star.bits();
    let rows: usize = t.shape.iter().zip(bits).filter(|(_, &b)| b == 0).map(|(&d, _)| d).product();
    let cols: usize = t.shape.iter().zip(bits).filter(|(_, &b)| b == 1).map(|(&d, _)| d).product();
    let mut out = DenseTensor::zeros(vec![rows, cols]);
    for flat in 0..t.len() {
        let (r, c) = split_index(flat, &t.shape, &t.strides, bits);
        out.data[r * cols + c] = t.data[flat];
    }
    Ok(out)
}

/// Inverse of [`matricize`] for a fixed original shape and index vector.
pub fn unmatricize(m: &DenseTensor, shape: &[usize], i_star: &IndexVector) -> Result<DenseTensor> {
    if i_star.len() != shape.len() {
        return Err(Error::IndexLength { len: i_star.len(), rank: shape.len() });
    }
    let bits = i_star.bits();
    let strides = row_major_strides(shape);
    let rows: usize = shape.iter().zip(bits).filter(|(_, &b)| b == 0).map(|(&d, _)| d).product();
    let cols: usize = shape.iter().zip(bits).filter(|(_, &b)| b == 1).map(|(&d, _)| d).product();
    if m.shape != [rows, cols] {
        return Err(Error::ShapeMismatch {
            expected: format!("[{rows}, {cols}]"),
            found: format!("{:?}", m.shape),
        });
    }
    let mut out = DenseTensor::zeros(shape.to_vec());
    for flat in 0..out.len() {
        let (r, c) = split_index(flat, shape, &strides, bits);
        out.data[flat] = m.data[r * cols + c];
    }
    Ok(out)
}

fn split_index(flat: usize, shape: &[usize], strides: &[usize], bits: &[u8]) -> (usize, usize) {
    let mut rem = flat;
    let mut r = 0usize;
    let mut c = 0usize;
    for k in 0..shape.len() {
        let digit = rem / strides[k];
        rem %= strides[k];
        if bits[k] == 0 {
            r = r * shape[k] + digit;
        } else {
            c = c * shape[k] + digit;
        }
    }
    (r, c)
}

/// Identity free-flow tensor δ_{α*0 α*1} of rank 2m for a given state shape.
pub fn identity_freq(state_shape: &[usize]) -> DenseTensor {
    let n: usize = state_shape.iter().product();
    let mut shape = state_shape.to_vec();
    shape.extend_from_slice(state_shape);
    let mut out = DenseTensor::zeros(shape);
    for i in 0..n {
        out.data[i * n + i] = ONE;
    }
    out
}
