//! Tree tensor networks: leaf factors plus one transfer matrix per interior
//! node, contracted bottom-up into a dense tensor.
//!
//! For an interior node `α` with sons `β_1 < ... < β_m` the node basis is
//! `U_α = (U_β1 ⊗ ... ⊗ U_βm) · B_αᵗ`, where `B_α` is `r_α × Π r_β` and the
//! Kronecker factor is reordered so rows follow the sorted modes of `α`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_columns, Matrix};
use crate::subspace::{minimal_subspace, TreeRank};
use crate::tensor::{DenseTensor, ModeSubset};
use crate::tree::DimensionTree;

#[derive(Clone, Debug)]
pub struct TreeNetwork {
    tree: DimensionTree,
    shape: Vec<usize>,
    /// `n_j × r_j` per leaf.
    leaves: BTreeMap<ModeSubset, Matrix>,
    /// `r_α × Π_{β∈S(α)} r_β` per interior node, root included (`r_D = 1`).
    transfers: BTreeMap<ModeSubset, Matrix>,
}

/// Matrix `n^α × Π r_β` whose columns are the products of son basis columns,
/// column index row-major over the sons in order, rows over sorted `α` modes.
pub(crate) fn son_kron(alpha: &ModeSubset, sons: &[(ModeSubset, &Matrix)], shape: &[usize]) -> Matrix {
    let local_shape: Vec<usize> = alpha.modes().iter().map(|j| shape[j - 1]).collect();
    let rows = alpha.dim(shape);
    let son_ranks: Vec<usize> = sons.iter().map(|(_, u)| u.cols()).collect();
    let cols: usize = son_ranks.iter().product();
    let positions: Vec<Vec<usize>> = sons
        .iter()
        .map(|(b, _)| {
            b.modes()
                .iter()
                .map(|j| alpha.modes().iter().position(|m| m == j).expect("son ⊆ node"))
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; local_shape.len()];
    let mut out = Matrix::zeros(rows, cols);
    for row in 0..rows {
        crate::tensor::unravel(row, &local_shape, &mut idx);
        let son_rows: Vec<usize> = positions
            .iter()
            .zip(sons)
            .map(|(pos, (b, _))| {
                let sub: Vec<usize> = pos.iter().map(|p| idx[*p]).collect();
                let sub_shape: Vec<usize> = b.modes().iter().map(|j| shape[j - 1]).collect();
                crate::tensor::ravel(&sub, &sub_shape)
            })
            .collect();
        let mut kidx = vec![0usize; sons.len()];
        for col in 0..cols {
            crate::tensor::unravel(col, &son_ranks, &mut kidx);
            let mut p = 1.0;
            for ((_, u), (sr, k)) in sons.iter().zip(son_rows.iter().zip(&kidx)) {
                p *= u[(*sr, *k)];
            }
            out[(row, col)] = p;
        }
    }
    out
}

impl TreeNetwork {
    pub fn tree(&self) -> &DimensionTree {
        &self.tree
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Random network: orthonormal leaf factors, standard normal transfers.
    pub fn random<R: Rng>(tree: &DimensionTree, r: &TreeRank, shape: &[usize], rng: &mut R) -> Result<Self> {
        r.check_covers(tree)?;
        let mut leaves = BTreeMap::new();
        let mut transfers = BTreeMap::new();
        for a in tree.nodes() {
            let ra = r.get(&a).expect("covered");
            if tree.is_leaf(&a) {
                let n = shape[a.first() - 1];
                if ra > n {
                    return Err(Error::Inadmissible(vec![format!("r{a} = {ra} exceeds n = {n}")]));
                }
                let g = Matrix::from_fn(n, ra, |_, _| rng.sample(StandardNormal));
                leaves.insert(a, orthonormalize_columns(&g));
            } else {
                let k: usize = tree.sons(&a).iter().map(|b| r.get(b).expect("covered")).product();
                transfers.insert(a, Matrix::from_fn(ra, k, |_, _| rng.sample(StandardNormal)));
            }
        }
        Ok(Self {
            tree: tree.clone(),
            shape: shape.to_vec(),
            leaves,
            transfers,
        })
    }

    /// Hierarchical decomposition of `v` through its minimal subspaces:
    /// leaf factors are the leaf bases and each transfer is `U_αᵗ · (⊗ U_β)`.
    pub fn from_tensor(v: &DenseTensor, tree: &DimensionTree, tol: f64) -> Result<Self> {
        let shape = v.shape().to_vec();
        let mut bases = BTreeMap::new();
        for a in tree.non_root_nodes() {
            bases.insert(a.clone(), minimal_subspace(v, &a, tol)?.basis);
        }
        let mut leaves = BTreeMap::new();
        let mut transfers = BTreeMap::new();
        for a in tree.nodes() {
            if tree.is_leaf(&a) {
                leaves.insert(a.clone(), bases[&a].clone());
                continue;
            }
            let sons: Vec<(ModeSubset, &Matrix)> =
                tree.sons(&a).iter().map(|b| (b.clone(), &bases[b])).collect();
            let k = son_kron(&a, &sons, &shape);
            let ua = if a == tree.root() {
                Matrix::column_vector(v.data())
            } else {
                bases[&a].clone()
            };
            transfers.insert(a, ua.tr_matmul(&k)?);
        }
        let net = Self {
            tree: tree.clone(),
            shape,
            leaves,
            transfers,
        };
        let back = net.contract()?;
        let err = back.sub(v)?.frobenius_norm();
        if err > 1e-8 * v.frobenius_norm() {
            return Err(Error::NotOnManifold(format!(
                "hierarchical decomposition does not reproduce the tensor (error {err:.3e})"
            )));
        }
        Ok(net)
    }

    /// Basis matrix `n^α × r_α` of every node, bottom-up.
    pub fn node_bases(&self) -> Result<BTreeMap<ModeSubset, Matrix>> {
        let mut out: BTreeMap<ModeSubset, Matrix> = self.leaves.clone();
        let mut order = self.tree.nodes();
        order.reverse();
        for a in order {
            if self.tree.is_leaf(&a) {
                continue;
            }
            let k = {
                let sons: Vec<(ModeSubset, &Matrix)> =
                    self.tree.sons(&a).iter().map(|b| (b.clone(), &out[b])).collect();
                son_kron(&a, &sons, &self.shape)
            };
            let basis = k.matmul(&self.transfers[&a].transpose())?;
            out.insert(a, basis);
        }
        Ok(out)
    }

    pub fn contract(&self) -> Result<DenseTensor> {
        let root = self.tree.root();
        let bases = self.node_bases()?;
        DenseTensor::new(self.shape.clone(), bases[&root].column(0))
    }

    pub fn num_params(&self) -> usize {
        self.leaves.values().chain(self.transfers.values()).map(|m| m.rows() * m.cols()).sum()
    }

    /// Leaf factors then transfers, each in node order, row-major.
    pub fn params(&self) -> Vec<f64> {
        self.leaves
            .values()
            .chain(self.transfers.values())
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.num_params() {
            return Err(Error::InvalidArgument("parameter vector length mismatch".into()));
        }
        let mut out = self.clone();
        let mut offset = 0;
        for m in out.leaves.values_mut().chain(out.transfers.values_mut()) {
            let n = m.rows() * m.cols();
            *m = Matrix::from_vec(m.rows(), m.cols(), params[offset..offset + n].to_vec())?;
            offset += n;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{tree_rank, DEFAULT_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn son_kron_two_leaves_is_kron() {
        let a = ModeSubset::new(vec![1, 2]).unwrap();
        let u1 = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let u2 = Matrix::from_rows(&[vec![5.0], vec![6.0], vec![7.0]]).unwrap();
        let k = son_kron(
            &a,
            &[(ModeSubset::singleton(1), &u1), (ModeSubset::singleton(2), &u2)],
            &[2, 3],
        );
        assert_eq!(k, u1.kron(&u2));
    }

    #[test]
    fn son_kron_interleaved_modes() {
        // sons {1,3} and {2}: rows follow sorted modes (1,2,3)
        let a = ModeSubset::new(vec![1, 2, 3]).unwrap();
        let u13 = Matrix::from_fn(4, 1, |i, _| i as f64 + 1.0);
        let u2 = Matrix::from_rows(&[vec![1.0], vec![10.0]]).unwrap();
        let shape = [2, 2, 2];
        let k = son_kron(
            &a,
            &[(ModeSubset::new(vec![1, 3]).unwrap(), &u13), (ModeSubset::singleton(2), &u2)],
            &shape,
        );
        for i1 in 0..2 {
            for i2 in 0..2 {
                for i3 in 0..2 {
                    let row = i1 * 4 + i2 * 2 + i3;
                    let expect = u13[(i1 * 2 + i3, 0)] * u2[(i2, 0)];
                    assert_eq!(k[(row, 0)], expect);
                }
            }
        }
    }

    #[test]
    fn decomposition_reproduces_generated_tensor() {
        let tree = DimensionTree::from_json("[[[1],[[2],[3]]],[4]]").unwrap();
        let r = TreeRank::uniform(&tree, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = TreeNetwork::random(&tree, &r, &[2, 2, 2, 2], &mut rng).unwrap();
        let v = net.contract().unwrap();
        assert_eq!(tree_rank(&v, &tree, DEFAULT_TOL).unwrap(), r);
        let rec = TreeNetwork::from_tensor(&v, &tree, DEFAULT_TOL).unwrap();
        let w = rec.contract().unwrap();
        assert!(w.sub(&v).unwrap().frobenius_norm() <= 1e-12 * v.frobenius_norm());
        assert_eq!(rec.num_params(), net.num_params());
    }
}
