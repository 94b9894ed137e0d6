//! Operator spaces `E_k(v)` and `E(v)`, tangent dimension reports and an
//! independent Jacobian-rank oracle.
//!
//! Operators on `V_D` are flattened row-major to vectors of length `N²` and
//! compared with the Frobenius inner product.

use serde::Serialize;

use crate::charts::{ft_chart, split_indices, Splits};
use crate::error::{invalid, Error, Result};
use crate::linalg::{column_space, null_space, svd, Matrix};
use crate::network::TreeNetwork;
use crate::subspace::{tree_rank, TreeRank, DEFAULT_TOL};
use crate::tensor::{DenseTensor, ModeSubset};
use crate::tree::{DimensionTree, Partition};

/// Default finite-difference step of the Jacobian oracle.
pub const DEFAULT_STEP: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct OperatorSpaceBasis {
    pub tag: String,
    /// `N²`-vectors as orthonormal columns.
    pub vectors: Matrix,
}

impl OperatorSpaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Coordinates of the orthogonal projection of `x` onto the space.
    pub fn coordinates(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.vectors.rows() {
            return invalid("operator vector length mismatch");
        }
        Ok((0..self.dim())
            .map(|j| (0..x.len()).map(|i| self.vectors[(i, j)] * x[i]).sum())
            .collect())
    }

    /// `‖x − P x‖` for the orthogonal projector `P` onto the space.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        let c = self.coordinates(x)?;
        let p = self.vectors.matvec(&c)?;
        Ok(x.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }
}

/// `Σ_{α∈P} r_α (n_α − r_α)`.
pub fn ek_dimension(partition: &Partition, splits: &Splits) -> Result<usize> {
    partition
        .blocks()
        .iter()
        .map(|b| splits.get(b).map(|s| s.r() * (s.n() - s.r())))
        .sum()
}

/// Orthonormal basis of `⊕_α L(U_α, W_α) ⊗ id_[α]`.
///
/// Column `(α, i, j)` is `(W e_i)(U e_j)ᵗ ⊗ id_[α]` divided by `√(N/n_α)`.
/// The summands are mutually orthogonal since `tr(W e_i e_jᵗ Uᵗ) = 0`.
pub fn ek_basis(partition: &Partition, splits: &Splits) -> Result<OperatorSpaceBasis> {
    let shape = splits.shape();
    let n = splits.total_dim();
    let mut columns = Vec::new();
    for b in partition.blocks() {
        let s = splits.get(b)?;
        let (ai, ci) = split_indices(b, shape);
        let scale = 1.0 / ((n / s.n()) as f64).sqrt();
        for i in 0..s.n() - s.r() {
            for j in 0..s.r() {
                let mut col = vec![0.0; n * n];
                for p in 0..n {
                    let wp = s.w[(ai[p], i)];
                    if wp == 0.0 {
                        continue;
                    }
                    for q in 0..n {
                        if ci[p] == ci[q] {
                            col[p * n + q] = scale * wp * s.u.basis[(ai[q], j)];
                        }
                    }
                }
                columns.push(col);
            }
        }
    }
    Ok(OperatorSpaceBasis {
        tag: format!("E{partition}"),
        vectors: Matrix::from_columns(n * n, &columns)?,
    })
}

/// Basis of `∩_k span(bases_k)`.
///
/// It is computed inside the first space: `x` is kept when
/// `(I − Q_k Q_kᵗ) Q_1 x = 0` for every other `k`, i.e. the null space of the
/// stacked residual maps with singular values at most `tol`.
pub fn e_intersection(bases: &[OperatorSpaceBasis], tol: f64) -> Result<OperatorSpaceBasis> {
    let (first, rest) = bases
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("intersection of no spaces".into()))?;
    if rest.iter().any(|b| b.vectors.rows() != first.vectors.rows()) {
        return invalid("operator spaces live on different ambient spaces");
    }
    if rest.is_empty() || first.dim() == 0 {
        return Ok(OperatorSpaceBasis {
            tag: "E".into(),
            vectors: first.vectors.clone(),
        });
    }
    let q1 = &first.vectors;
    let stacked: Vec<Matrix> = rest
        .iter()
        .map(|b| {
            let qk = &b.vectors;
            q1.sub(&qk.matmul(&qk.tr_matmul(q1)?)?)
        })
        .collect::<Result<_>>()?;
    let kernel = null_space(&Matrix::vstack(&stacked)?, tol)?;
    Ok(OperatorSpaceBasis {
        tag: "E".into(),
        vectors: q1.matmul(&kernel)?,
    })
}

/// `E(v)` from the level partitions of a tree.
pub fn e_basis_from_splits(levels: &[Partition], splits: &Splits, tol: f64) -> Result<OperatorSpaceBasis> {
    let bases: Vec<OperatorSpaceBasis> = levels.iter().map(|p| ek_basis(p, splits)).collect::<Result<_>>()?;
    e_intersection(&bases, tol)
}

/// Projection residual of every column of `e` with respect to `ek`.
pub fn inclusion_residuals(e: &OperatorSpaceBasis, ek: &OperatorSpaceBasis) -> Result<Vec<f64>> {
    e.vectors.columns().iter().map(|x| ek.residual(x)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TangentReport {
    pub dim_e: usize,
    pub dim_core: usize,
    pub dim_total: usize,
    pub oracle_dim: usize,
    pub formula_dim: usize,
    pub agree: bool,
    /// `dim E_k(v)` for `k = 1..depth`.
    pub dim_ek: Vec<usize>,
}

/// Tree-network parameter count minus the gauge freedom `Σ_{α≠D} r_α²`.
pub fn formula_dim(tree: &DimensionTree, r: &TreeRank, shape: &[usize]) -> Result<usize> {
    r.check_covers(tree)?;
    if shape.len() != tree.d() {
        return invalid("shape does not match the tree");
    }
    let rank = |a: &ModeSubset| r.get(a).expect("covered");
    let mut total = 0usize;
    let mut gauge = 0usize;
    for a in tree.nodes() {
        if tree.is_leaf(&a) {
            total += shape[a.first() - 1] * rank(&a);
        } else {
            let ra = if a == tree.root() { 1 } else { rank(&a) };
            total += ra * tree.sons(&a).iter().map(rank).product::<usize>();
        }
        if a != tree.root() {
            gauge += rank(&a) * rank(&a);
        }
    }
    Ok(total - gauge)
}

/// Central-difference Jacobian (`N × #params`) of the network parametrization.
/// The map is linear in each single parameter, so the differences are exact
/// up to rounding.
pub fn jacobian(net: &TreeNetwork, h: f64) -> Result<Matrix> {
    let p0 = net.params();
    let n: usize = net.shape().iter().product();
    let mut columns = Vec::with_capacity(p0.len());
    for i in 0..p0.len() {
        let mut p = p0.clone();
        p[i] = p0[i] + h;
        let plus = net.with_params(&p)?.contract()?;
        p[i] = p0[i] - h;
        let minus = net.with_params(&p)?.contract()?;
        columns.push(
            plus.data()
                .iter()
                .zip(minus.data())
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect(),
        );
    }
    Matrix::from_columns(n, &columns)
}

fn oracle_network(v: &DenseTensor, tree: &DimensionTree, r: &TreeRank, h: f64) -> Result<TreeNetwork> {
    if !(h > 0.0) {
        return invalid("finite-difference step must be positive");
    }
    if tree_rank(v, tree, DEFAULT_TOL)? != *r {
        return Err(Error::NotOnManifold("tree-based rank differs from the request".into()));
    }
    TreeNetwork::from_tensor(v, tree, DEFAULT_TOL)
}

fn jacobian_rank(j: &Matrix, h: f64) -> Result<usize> {
    Ok(svd(j)?.rank(10.0 * h))
}

/// Jacobian rank at steps `h`, `h/2` and `h/10`; an error unless all agree.
pub fn tangent_dimension_oracle(v: &DenseTensor, tree: &DimensionTree, r: &TreeRank, h: f64) -> Result<usize> {
    let net = oracle_network(v, tree, r, h)?;
    let ranks: Vec<usize> = [h, h / 2.0, h / 10.0]
        .iter()
        .map(|&s| jacobian_rank(&jacobian(&net, s)?, s))
        .collect::<Result<_>>()?;
    if ranks.iter().any(|&k| k != ranks[0]) {
        return Err(Error::OracleUnstable(format!("Jacobian ranks {ranks:?} at h, h/2, h/10")));
    }
    Ok(ranks[0])
}

/// Orthonormal basis (`N × dim`) of the Jacobian column space.
pub fn jacobian_column_basis(v: &DenseTensor, tree: &DimensionTree, r: &TreeRank, h: f64) -> Result<Matrix> {
    let net = oracle_network(v, tree, r, h)?;
    column_space(&jacobian(&net, h)?, 10.0 * h)
}

pub fn tangent_dimension(v: &DenseTensor, tree: &DimensionTree, r: &TreeRank, tol: f64) -> Result<TangentReport> {
    let chart = ft_chart(v, tree, r, tol)?;
    let dim_ek = chart
        .level_partitions
        .iter()
        .map(|p| ek_dimension(p, &chart.splits))
        .collect::<Result<_>>()?;
    let dim_e = chart.e_dim();
    let dim_core = chart.core.len();
    let dim_total = dim_e + dim_core;
    let oracle_dim = tangent_dimension_oracle(v, tree, r, DEFAULT_STEP)?;
    let formula_dim = formula_dim(tree, r, v.shape())?;
    Ok(TangentReport {
        dim_e,
        dim_core,
        dim_total,
        oracle_dim,
        formula_dim,
        agree: dim_total == oracle_dim && oracle_dim == formula_dim,
        dim_ek,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ImmersionReport {
    pub level: usize,
    pub max_inclusion_residual: f64,
    pub inclusion_ok: bool,
    /// Rank and condition number of the coordinates of `E(v)` inside `E_k(v)`.
    pub coordinate_rank: usize,
    pub coordinate_condition: f64,
    pub injective: bool,
    pub dim_tangent: usize,
    pub dim_level_tangent: usize,
    pub dim_ok: bool,
    pub pass: bool,
}

/// Checks `E ⊆ E_k` (within `tol`), injectivity of the coordinate map and
/// `dim E + dim_core ≤ dim E_k + level_core`.
pub fn immersion_report(
    e: &OperatorSpaceBasis,
    ek: &OperatorSpaceBasis,
    dim_core: usize,
    level_core: usize,
    level: usize,
    tol: f64,
) -> Result<ImmersionReport> {
    let max_res = inclusion_residuals(e, ek)?.into_iter().fold(0.0, f64::max);
    let coords = ek.vectors.tr_matmul(&e.vectors)?;
    let (rank, cond) = if e.dim() == 0 {
        (0, 1.0)
    } else {
        let s = svd(&coords)?.s;
        let rank = s.iter().filter(|&&x| x > 0.5).count();
        let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
        let cond = if s.len() < e.dim() || smin == 0.0 {
            f64::INFINITY
        } else {
            s[0] / smin
        };
        (rank, cond)
    };
    let inclusion_ok = max_res <= tol;
    let injective = rank == e.dim();
    let dim_tangent = e.dim() + dim_core;
    let dim_level_tangent = ek.dim() + level_core;
    let dim_ok = dim_tangent <= dim_level_tangent;
    Ok(ImmersionReport {
        level,
        max_inclusion_residual: max_res,
        inclusion_ok,
        coordinate_rank: rank,
        coordinate_condition: cond,
        injective,
        dim_tangent,
        dim_level_tangent,
        dim_ok,
        pass: inclusion_ok && injective && dim_ok,
    })
}

pub fn immersion_check(
    v: &DenseTensor,
    tree: &DimensionTree,
    r: &TreeRank,
    k: usize,
    tol: f64,
) -> Result<ImmersionReport> {
    let chart = ft_chart(v, tree, r, DEFAULT_TOL)?;
    if k == 0 || k > chart.level_partitions.len() {
        return invalid(format!("level {k} is outside 1..={}", chart.level_partitions.len()));
    }
    let pk = &chart.level_partitions[k - 1];
    let ek = ek_basis(pk, &chart.splits)?;
    let level_core: usize = chart.splits.ranks(pk)?.iter().product();
    immersion_report(&chart.e_basis, &ek, chart.core.len(), level_core, k, tol)
}
