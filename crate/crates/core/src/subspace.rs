//! Minimal subspaces `U_α^min(v)`, tree-based ranks and the nesting checks
//! between them.
//!
//! A minimal subspace is realized as the column space of the unfolding
//! `M_α(v)`: the left singular vectors whose singular values exceed
//! `tol · s_max`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{svd, Matrix};
use crate::tensor::{check_partition, matricize, mode_multiply, DenseTensor, ModeSubset};
use crate::tree::{DimensionTree, Partition};

/// Default relative rank tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Orthonormal basis of a minimal subspace.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub alpha: ModeSubset,
    pub ambient_dim: usize,
    /// `ambient_dim × r`, orthonormal columns.
    pub basis: Matrix,
    pub tol: f64,
    /// Full singular spectrum of the unfolding, nonincreasing.
    pub singular_values: Vec<f64>,
}

impl SubspaceBasis {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// Orthogonal projector `U Uᵗ` onto the subspace.
    pub fn projector(&self) -> Matrix {
        self.basis
            .matmul(&self.basis.transpose())
            .expect("square projector")
    }
}

/// Rank tuple indexed by tree nodes.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TreeRank {
    pub ranks: BTreeMap<ModeSubset, usize>,
}

#[derive(Serialize, Deserialize)]
struct RankEntry {
    block: Vec<usize>,
    r: usize,
}

#[derive(Serialize, Deserialize)]
struct RankFile {
    ranks: Vec<RankEntry>,
}

impl TreeRank {
    pub fn new(ranks: BTreeMap<ModeSubset, usize>) -> Self {
        Self { ranks }
    }

    /// Rank 1 on every node of `tree`.
    pub fn ones(tree: &DimensionTree) -> Self {
        Self::uniform(tree, 1)
    }

    /// Rank `r` on every non-root node and 1 at the root.
    pub fn uniform(tree: &DimensionTree, r: usize) -> Self {
        let mut ranks: BTreeMap<_, _> = tree.nodes().into_iter().map(|a| (a, r)).collect();
        ranks.insert(tree.root(), 1);
        Self { ranks }
    }

    pub fn get(&self, alpha: &ModeSubset) -> Option<usize> {
        self.ranks.get(alpha).copied()
    }

    pub fn set(&mut self, alpha: ModeSubset, r: usize) {
        self.ranks.insert(alpha, r);
    }

    /// Ranks of the blocks of a partition, in block order.
    pub fn restrict(&self, partition: &Partition) -> Result<Vec<usize>> {
        partition
            .blocks()
            .iter()
            .map(|b| {
                self.get(b)
                    .ok_or_else(|| Error::InvalidArgument(format!("rank tuple has no entry for {b}")))
            })
            .collect()
    }

    /// Errors unless every node of `tree` has a positive rank.
    pub fn check_covers(&self, tree: &DimensionTree) -> Result<()> {
        for a in tree.nodes() {
            match self.get(&a) {
                None => return invalid(format!("rank tuple has no entry for node {a}")),
                Some(0) => return invalid(format!("rank of node {a} must be positive")),
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Componentwise `self ≤ other` on the nodes of `self`.
    pub fn le(&self, other: &TreeRank) -> bool {
        self.ranks
            .iter()
            .all(|(a, r)| other.get(a).is_some_and(|o| *r <= o))
    }

    pub fn to_json(&self) -> String {
        let file = RankFile {
            ranks: self
                .ranks
                .iter()
                .map(|(a, r)| RankEntry {
                    block: a.modes().to_vec(),
                    r: *r,
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("rank serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RankFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("rank JSON: {e}")))?;
        let mut ranks = BTreeMap::new();
        for e in file.ranks {
            let a = ModeSubset::new(e.block).map_err(|e| Error::Parse(e.to_string()))?;
            if ranks.insert(a.clone(), e.r).is_some() {
                return Err(Error::Parse(format!("block {a} listed twice")));
            }
        }
        Ok(Self { ranks })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn reject_zero(v: &DenseTensor) -> Result<()> {
    if v.is_zero() {
        return Err(Error::DegenerateInput(
            "the zero tensor has no positive-dimensional minimal subspaces".into(),
        ));
    }
    Ok(())
}

pub fn minimal_subspace(v: &DenseTensor, alpha: &ModeSubset, tol: f64) -> Result<SubspaceBasis> {
    if !(tol > 0.0) {
        return invalid("rank tolerance must be positive");
    }
    reject_zero(v)?;
    let m = matricize(v, alpha)?;
    let dec = svd(&m)?;
    let r = dec.rank(tol);
    Ok(SubspaceBasis {
        alpha: alpha.clone(),
        ambient_dim: m.rows(),
        basis: dec.u.column_range(0, r),
        tol,
        singular_values: dec.s,
    })
}

pub fn tree_rank(v: &DenseTensor, tree: &DimensionTree, tol: f64) -> Result<TreeRank> {
    check_tree_shape(v, tree)?;
    reject_zero(v)?;
    let mut ranks = BTreeMap::new();
    for a in tree.nodes() {
        ranks.insert(a.clone(), minimal_subspace(v, &a, tol)?.rank());
    }
    Ok(TreeRank { ranks })
}

pub(crate) fn check_tree_shape(v: &DenseTensor, tree: &DimensionTree) -> Result<()> {
    if v.order() != tree.d() {
        return invalid(format!(
            "tensor of order {} does not match a tree over {} modes",
            v.order(),
            tree.d()
        ));
    }
    let report = tree.validate();
    if !report.ok {
        return invalid("invalid dimension tree");
    }
    Ok(())
}

/// `(U_α^min(v))_{α ∈ partition}` in block order.
pub fn bundle_projection(
    v: &DenseTensor,
    partition: &Partition,
    tol: f64,
) -> Result<Vec<SubspaceBasis>> {
    partition
        .blocks()
        .iter()
        .map(|a| minimal_subspace(v, a, tol))
        .collect()
}

/// Applies `⊗_β P_β` to a tensor whose modes are the (sorted) modes of
/// `alpha`, where each `P_β` acts on the modes of `β ⊆ α`.
fn project_blockwise(
    t: &DenseTensor,
    alpha: &ModeSubset,
    blocks: &[(ModeSubset, Matrix)],
) -> Result<DenseTensor> {
    let mut out = t.clone();
    for (beta, proj) in blocks {
        let local = ModeSubset::new(
            beta.modes()
                .iter()
                .map(|j| alpha.modes().iter().position(|m| m == j).expect("β ⊆ α") + 1),
        )?;
        out = mode_multiply(&out, &local, proj)?;
    }
    Ok(out)
}

/// `‖(I − P) U_α‖_F` for the orthogonal projector `P` onto `⊗_β U_β^min(v)`.
pub fn check_nestedness(
    v: &DenseTensor,
    alpha: &ModeSubset,
    sub_partition: &[ModeSubset],
    tol: f64,
) -> Result<f64> {
    if sub_partition.iter().any(|b| !b.is_subset_of(alpha)) {
        return invalid(format!("sub-partition blocks are not subsets of {alpha}"));
    }
    let local_blocks: Vec<ModeSubset> = sub_partition
        .iter()
        .map(|b| {
            ModeSubset::new(
                b.modes()
                    .iter()
                    .map(|j| alpha.modes().iter().position(|m| m == j).expect("subset") + 1),
            )
        })
        .collect::<Result<_>>()?;
    check_partition(&local_blocks, alpha.len())
        .map_err(|_| Error::InvalidArgument(format!("blocks do not partition {alpha}")))?;
    let u_alpha = minimal_subspace(v, alpha, tol)?;
    let projectors: Vec<(ModeSubset, Matrix)> = sub_partition
        .iter()
        .map(|b| Ok((b.clone(), minimal_subspace(v, b, tol)?.projector())))
        .collect::<Result<_>>()?;
    let local_shape: Vec<usize> = alpha.modes().iter().map(|j| v.shape()[j - 1]).collect();
    let mut sq = 0.0;
    for col in u_alpha.basis.columns() {
        let t = DenseTensor::new(local_shape.clone(), col)?;
        let p = project_blockwise(&t, alpha, &projectors)?;
        sq += t.sub(&p)?.frobenius_norm().powi(2);
    }
    Ok(sq.sqrt())
}

/// Per-level residuals `‖v − (⊗_{α∈P_k} P_α) v‖` for `k = 1..depth`.
pub fn check_chain(v: &DenseTensor, tree: &DimensionTree, tol: f64) -> Result<Vec<f64>> {
    check_tree_shape(v, tree)?;
    let root = tree.root();
    let mut cache: BTreeMap<ModeSubset, Matrix> = BTreeMap::new();
    let mut out = Vec::new();
    for partition in tree.level_partitions()? {
        let mut blocks = Vec::new();
        for b in partition.blocks() {
            if !cache.contains_key(b) {
                cache.insert(b.clone(), minimal_subspace(v, b, tol)?.projector());
            }
            blocks.push((b.clone(), cache[b].clone()));
        }
        let p = project_blockwise(v, &root, &blocks)?;
        out.push(v.sub(&p)?.frobenius_norm());
    }
    Ok(out)
}

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases. Each angle is `atan2(sin, cos)` so that small angles
/// keep full relative accuracy.
pub fn principal_angles(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    let cos = svd(&a.tr_matmul(b)?)?.s;
    let k = cos.len();
    let resid = b.sub(&a.matmul(&a.tr_matmul(b)?)?)?;
    let mut sin = svd(&resid)?.s;
    sin.resize(b.cols().max(k), 0.0);
    // cos is nonincreasing, so pair it with the sines in nondecreasing order
    let sin_tail = &sin[sin.len() - k..];
    Ok((0..k)
        .map(|i| sin_tail[k - 1 - i].atan2(cos[i]))
        .collect())
}
