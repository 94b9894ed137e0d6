//! Dense tensors over the mode set `D = {1, ..., d}` and their unfoldings.
//!
//! Data is stored row-major in the multi-index `(i_1, ..., i_d)`. Mode
//! labels are 1-based throughout the public API, matching the tree and rank
//! file formats.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, Matrix};

/// A nonempty, strictly increasing set of 1-based mode labels.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ModeSubset(Vec<usize>);

impl ModeSubset {
    /// Builds a subset from arbitrary labels; they are sorted, and duplicates
    /// or zero labels are rejected.
    pub fn new(modes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = modes.into_iter().collect();
        if v.is_empty() {
            return invalid("empty mode subset");
        }
        v.sort_unstable();
        if v[0] == 0 {
            return invalid("mode labels are 1-based");
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return invalid(format!("duplicate mode in {v:?}"));
        }
        Ok(Self(v))
    }

    pub fn singleton(j: usize) -> Self {
        assert!(j >= 1, "mode labels are 1-based");
        Self(vec![j])
    }

    /// `{1, ..., d}`.
    pub fn full(d: usize) -> Self {
        assert!(d >= 1);
        Self((1..=d).collect())
    }

    pub fn modes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_singleton(&self) -> bool {
        self.0.len() == 1
    }

    pub fn first(&self) -> usize {
        self.0[0]
    }

    pub fn last(&self) -> usize {
        *self.0.last().expect("nonempty")
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn is_subset_of(&self, other: &ModeSubset) -> bool {
        self.0.iter().all(|j| other.contains(*j))
    }

    pub fn is_disjoint(&self, other: &ModeSubset) -> bool {
        self.0.iter().all(|j| !other.contains(*j))
    }

    /// `{1..d} \ self`, or `None` when the complement is empty.
    pub fn complement(&self, d: usize) -> Option<ModeSubset> {
        let rest: Vec<usize> = (1..=d).filter(|j| !self.contains(*j)).collect();
        (!rest.is_empty()).then_some(ModeSubset(rest))
    }

    pub fn union(&self, other: &ModeSubset) -> ModeSubset {
        let mut v: Vec<usize> = self.0.iter().chain(&other.0).copied().collect();
        v.sort_unstable();
        v.dedup();
        ModeSubset(v)
    }

    /// Product of mode sizes `Π_{j∈α} n_j`.
    pub fn dim(&self, shape: &[usize]) -> usize {
        self.0.iter().map(|j| shape[j - 1]).product()
    }

    pub fn check_within(&self, d: usize) -> Result<()> {
        if self.last() > d {
            return invalid(format!("mode subset {self} exceeds d = {d}"));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for ModeSubset {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        ModeSubset::new(v)
    }
}

impl From<ModeSubset> for Vec<usize> {
    fn from(m: ModeSubset) -> Self {
        m.0
    }
}

impl fmt::Display for ModeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for ModeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Full multi-way array with row-major storage.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseTensor{:?} {:?}", self.shape, self.data)
    }
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return invalid("tensor needs at least one mode");
        }
        if shape.contains(&0) {
            return invalid(format!("zero-sized mode in shape {shape:?}"));
        }
        let n: usize = shape.iter().product();
        if data.len() != n {
            return invalid(format!(
                "data length {} does not match shape {:?} (expected {n})",
                data.len(),
                shape
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for flat in 0..n {
            unravel(flat, &shape, &mut idx);
            data.push(f(&idx));
        }
        Self::new(shape, data)
    }

    /// Unit vector `e_i` (0-based `i`) of length `n` as an order-1 tensor.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut data = vec![0.0; n];
        data[i] = 1.0;
        Self {
            shape: vec![n],
            data,
        }
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    /// Total number of entries `N = Π n_j`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn mode_set(&self) -> ModeSubset {
        ModeSubset::full(self.order())
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[ravel(idx, &self.shape)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| *x == 0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseTensor) -> Result<Self> {
        if self.shape != other.shape {
            return invalid("tensor shapes differ");
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return invalid("tensor shapes differ");
        }
        Ok(crate::linalg::dot(&self.data, &other.data))
    }

    /// Same data, new shape with the same number of entries.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    /// Mode permutation: mode `i` of the result is mode `perm[i]` (0-based) of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let d = self.order();
        if perm.len() != d {
            return invalid("permutation length mismatch");
        }
        let mut seen = vec![false; d];
        for &p in perm {
            if p >= d || seen[p] {
                return invalid(format!("{perm:?} is not a permutation"));
            }
            seen[p] = true;
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = strides(&self.shape);
        let moved: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut idx = vec![0usize; d];
        let mut data = Vec::with_capacity(self.len());
        for flat in 0..self.len() {
            unravel(flat, &new_shape, &mut idx);
            let src: usize = idx.iter().zip(&moved).map(|(i, s)| i * s).sum();
            data.push(self.data[src]);
        }
        Ok(Self {
            shape: new_shape,
            data,
        })
    }

    fn check_modes(&self, alpha: &ModeSubset) -> Result<()> {
        alpha.check_within(self.order())
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

pub(crate) fn unravel(mut flat: usize, shape: &[usize], idx: &mut [usize]) {
    for k in (0..shape.len()).rev() {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
}

pub(crate) fn ravel(idx: &[usize], shape: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (i, n)| acc * n + i)
}

/// 0-based mode order placing `alpha` first (ascending) and the rest after (ascending).
fn alpha_first_order(alpha: &ModeSubset, d: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = alpha.modes().iter().map(|j| j - 1).collect();
    perm.extend((1..=d).filter(|j| !alpha.contains(*j)).map(|j| j - 1));
    perm
}

fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// The unfolding `M_α(v)`: rows indexed by the α multi-index, columns by
/// the multi-index of the remaining modes, both row-major in ascending mode
/// order. For `α = D` the result is a single column.
pub fn matricize(v: &DenseTensor, alpha: &ModeSubset) -> Result<Matrix> {
    v.check_modes(alpha)?;
    let rows = alpha.dim(v.shape());
    let cols = v.len() / rows;
    let perm = alpha_first_order(alpha, v.order());
    let p = v.permute(&perm)?;
    Matrix::from_vec(rows, cols, p.into_data())
}

/// Inverse of [`matricize`] for a target shape.
pub fn fold(m: &Matrix, alpha: &ModeSubset, shape: &[usize]) -> Result<DenseTensor> {
    alpha.check_within(shape.len())?;
    let n: usize = shape.iter().product();
    if m.rows() != alpha.dim(shape) || m.rows() * m.cols() != n {
        return invalid("matrix does not match unfolding dimensions");
    }
    let perm = alpha_first_order(alpha, shape.len());
    let permuted_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let t = DenseTensor::new(permuted_shape, m.as_slice().to_vec())?;
    t.permute(&inverse_permutation(&perm))
}

/// Checks that `partition` is a partition of `{1..d}`.
pub fn check_partition(partition: &[ModeSubset], d: usize) -> Result<()> {
    let mut count = vec![0usize; d + 1];
    for block in partition {
        block.check_within(d)?;
        for &j in block.modes() {
            count[j] += 1;
        }
    }
    if let Some(j) = (1..=d).find(|&j| count[j] != 1) {
        return invalid(format!(
            "blocks do not partition {{1..{d}}}: mode {j} covered {} times",
            count[j]
        ));
    }
    Ok(())
}

/// Applies `A ⊗ id_[α]`: reshape to `M_α(v)`, left-multiply by `A`, fold back.
///
/// `partition` must be a partition of `D` containing `alpha`. A rectangular
/// `A` is allowed only for a single-mode block, whose size becomes `A.rows`.
pub fn apply_mode_operator(
    a: &Matrix,
    alpha: &ModeSubset,
    partition: &[ModeSubset],
    v: &DenseTensor,
) -> Result<DenseTensor> {
    check_partition(partition, v.order())?;
    if !partition.contains(alpha) {
        return invalid(format!("partition does not contain block {alpha}"));
    }
    mode_multiply(v, alpha, a)
}

/// `(A ⊗ id)(v)` on the modes in `alpha`, without the partition check.
pub(crate) fn mode_multiply(v: &DenseTensor, alpha: &ModeSubset, a: &Matrix) -> Result<DenseTensor> {
    v.check_modes(alpha)?;
    let na = alpha.dim(v.shape());
    if a.cols() != na {
        return invalid(format!(
            "operator has {} columns, block {alpha} has dimension {na}",
            a.cols()
        ));
    }
    if a.rows() != a.cols() && !alpha.is_singleton() {
        return invalid("rectangular operators are only supported on single-mode blocks");
    }
    let m = matricize(v, alpha)?;
    let out = a.matmul(&m)?;
    let mut shape = v.shape().to_vec();
    if alpha.is_singleton() {
        shape[alpha.first() - 1] = a.rows();
    }
    fold(&out, alpha, &shape)
}

/// Outer product of the factors; the output shape concatenates the factor shapes.
pub fn tensor_product(factors: &[DenseTensor]) -> Result<DenseTensor> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("tensor product of an empty list".into()))?;
    let mut acc = first.clone();
    for f in rest {
        let mut data = Vec::with_capacity(acc.len() * f.len());
        for a in &acc.data {
            data.extend(f.data.iter().map(|b| a * b));
        }
        let mut shape = acc.shape.clone();
        shape.extend_from_slice(&f.shape);
        acc = DenseTensor { shape, data };
    }
    Ok(acc)
}

/// Regroups `v` into one mode per block of `blocks` (in the given order),
/// each block's modes flattened row-major in ascending order.
pub fn to_block_tensor(v: &DenseTensor, blocks: &[ModeSubset]) -> Result<DenseTensor> {
    check_partition(blocks, v.order())?;
    let perm: Vec<usize> = blocks
        .iter()
        .flat_map(|b| b.modes().iter().map(|j| j - 1))
        .collect();
    let p = v.permute(&perm)?;
    let shape = blocks.iter().map(|b| b.dim(v.shape())).collect();
    p.reshape(shape)
}

/// Inverse of [`to_block_tensor`] for the original mode shape.
pub fn from_block_tensor(
    b: &DenseTensor,
    blocks: &[ModeSubset],
    shape: &[usize],
) -> Result<DenseTensor> {
    check_partition(blocks, shape.len())?;
    let perm: Vec<usize> = blocks
        .iter()
        .flat_map(|b| b.modes().iter().map(|j| j - 1))
        .collect();
    let permuted_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let t = b.reshape(permuted_shape)?;
    t.permute(&inverse_permutation(&perm))
}

/// Multiplies mode `k` (0-based) of `t` by `a`.
pub(crate) fn mode_k_product(t: &DenseTensor, k: usize, a: &Matrix) -> Result<DenseTensor> {
    mode_multiply(t, &ModeSubset::singleton(k + 1), a)
}

#[derive(Serialize, Deserialize)]
struct TensorFile {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&TensorFile {
            shape: self.shape.clone(),
            data: self.data.clone(),
        })
        .expect("tensor serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: TensorFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("tensor JSON: {e}")))?;
        Self::new(f.shape, f.data).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Binary layout: little-endian `u64` order `d`, `d` little-endian `u64`
    /// dimensions, then the row-major little-endian `f64` entries.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (1 + self.order() + self.len()));
        out.extend_from_slice(&(self.order() as u64).to_le_bytes());
        for n in &self.shape {
            out.extend_from_slice(&(*n as u64).to_le_bytes());
        }
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|s| s.try_into().expect("8 bytes"))
                .ok_or_else(|| Error::Parse("truncated binary tensor".into()))
        };
        let d = u64::from_le_bytes(word(0)?) as usize;
        if d == 0 || d > 64 {
            return Err(Error::Parse(format!("implausible tensor order {d}")));
        }
        let shape: Vec<usize> = (0..d)
            .map(|k| word(1 + k).map(|w| u64::from_le_bytes(w) as usize))
            .collect::<Result<_>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, x| acc.checked_mul(*x))
            .ok_or_else(|| Error::Parse("tensor size overflow".into()))?;
        if bytes.len() != 8 * (1 + d + n) {
            return Err(Error::Parse(format!(
                "binary tensor has {} bytes, expected {}",
                bytes.len(),
                8 * (1 + d + n)
            )));
        }
        let data = (0..n)
            .map(|i| word(1 + d + i).map(f64::from_le_bytes))
            .collect::<Result<_>>()?;
        Self::new(shape, data).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads JSON or the binary layout, chosen by content.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
        if first == Some(&b'{') {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse(e.to_string()))?;
            Self::from_json(text)
        } else {
            Self::from_bytes(&bytes)
        }
    }

    /// Writes the binary layout for a `.bin` extension and JSON otherwise.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "bin") {
            std::fs::write(path, self.to_bytes())?;
        } else {
            std::fs::write(path, self.to_json())?;
        }
        Ok(())
    }
}
