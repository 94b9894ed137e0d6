//! Charts of the fixed-rank sets.
//!
//! Every block `α` splits `V_α = U_α ⊕ W_α` with `W_α` the orthogonal
//! complement of the minimal subspace. A Laplacian-like operator is a family
//! of maps `L_α : U_α → W_α`, stored as coordinate matrices `C_α` with
//! `L̂_α = W_α C_α U_αᵗ`. Since `L̂_α² = 0`, its exponential is `I + L̂_α`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::format::is_member;
use crate::linalg::{condition_number, inverse, orthogonal_complement, svd, Matrix};
use crate::subspace::{minimal_subspace, tree_rank, SubspaceBasis, TreeRank};
use crate::tangent::{e_basis_from_splits, OperatorSpaceBasis};
use crate::tensor::{
    check_partition, from_block_tensor, matricize, mode_k_product, mode_multiply, ravel, to_block_tensor, unravel,
    DenseTensor, ModeSubset,
};
use crate::tree::{DimensionTree, Partition};

/// Graph matrices `Uᵗ B` with a larger condition number are rejected.
pub const MAX_GRAPH_CONDITION: f64 = 1e8;

#[derive(Clone, Debug)]
pub struct SplitSpace {
    pub alpha: ModeSubset,
    pub u: SubspaceBasis,
    /// `n_α × (n_α − r_α)`, orthonormal columns spanning `U_α^⊥`.
    pub w: Matrix,
}

impl SplitSpace {
    pub fn n(&self) -> usize {
        self.u.ambient_dim
    }

    pub fn r(&self) -> usize {
        self.u.rank()
    }

    /// `L̂_α = W C Uᵗ` for a `(n_α − r_α) × r_α` coordinate matrix.
    pub fn lhat(&self, c: &Matrix) -> Result<Matrix> {
        if c.shape() != (self.n() - self.r(), self.r()) {
            return invalid(format!(
                "block {} expects a {}x{} coordinate matrix, got {}x{}",
                self.alpha,
                self.n() - self.r(),
                self.r(),
                c.rows(),
                c.cols()
            ));
        }
        self.w.matmul(c)?.matmul(&self.u.basis.transpose())
    }
}

pub fn split(v: &DenseTensor, alpha: &ModeSubset, tol: f64) -> Result<SplitSpace> {
    let u = minimal_subspace(v, alpha, tol)?;
    let w = orthogonal_complement(&u.basis)?;
    Ok(SplitSpace {
        alpha: alpha.clone(),
        u,
        w,
    })
}

/// `(P_{U⊕W}, P_{W⊕U})`; the first is `U Uᵗ` because `W = U^⊥`.
pub fn oblique_projector(s: &SplitSpace) -> (Matrix, Matrix) {
    let p = s.u.projector();
    let q = Matrix::identity(s.n()).sub(&p).expect("square");
    (p, q)
}

/// Split spaces of one anchor tensor for a set of blocks.
#[derive(Clone, Debug)]
pub struct Splits {
    shape: Vec<usize>,
    map: BTreeMap<ModeSubset, SplitSpace>,
}

impl Splits {
    pub fn new(v: &DenseTensor, blocks: &[ModeSubset], tol: f64) -> Result<Self> {
        let mut map = BTreeMap::new();
        for b in blocks {
            map.insert(b.clone(), split(v, b, tol)?);
        }
        Ok(Self {
            shape: v.shape().to_vec(),
            map,
        })
    }

    /// Splits for every non-root node of `tree`.
    pub fn for_tree(v: &DenseTensor, tree: &DimensionTree, tol: f64) -> Result<Self> {
        Self::new(v, &tree.non_root_nodes(), tol)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// `N = Π n_j`.
    pub fn total_dim(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn get(&self, alpha: &ModeSubset) -> Result<&SplitSpace> {
        self.map
            .get(alpha)
            .ok_or_else(|| Error::InvalidArgument(format!("no split for block {alpha}")))
    }

    pub fn blocks(&self) -> impl Iterator<Item = &ModeSubset> {
        self.map.keys()
    }

    pub fn ranks(&self, partition: &Partition) -> Result<Vec<usize>> {
        partition.blocks().iter().map(|b| Ok(self.get(b)?.r())).collect()
    }

    fn check_partition(&self, partition: &Partition) -> Result<()> {
        check_partition(partition.blocks(), self.shape.len())?;
        for b in partition.blocks() {
            self.get(b)?;
        }
        Ok(())
    }
}

/// The coordinate matrices `C_α` of `Σ_α L_α ⊗ id_[α]` over a partition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LaplacianLike {
    pub partition: Partition,
    pub parts: BTreeMap<ModeSubset, Matrix>,
}

impl LaplacianLike {
    pub fn zero(partition: &Partition, splits: &Splits) -> Result<Self> {
        let mut parts = BTreeMap::new();
        for b in partition.blocks() {
            let s = splits.get(b)?;
            parts.insert(b.clone(), Matrix::zeros(s.n() - s.r(), s.r()));
        }
        Ok(Self {
            partition: partition.clone(),
            parts,
        })
    }

    /// Standard normal parts rescaled to `‖C_α‖_F = scale` (empty parts stay empty).
    pub fn random<R: Rng>(partition: &Partition, splits: &Splits, scale: f64, rng: &mut R) -> Result<Self> {
        let mut out = Self::zero(partition, splits)?;
        for c in out.parts.values_mut() {
            let g = Matrix::from_fn(c.rows(), c.cols(), |_, _| rng.sample(StandardNormal));
            let n = g.frobenius_norm();
            *c = if n > 0.0 { g.scale(scale / n) } else { g };
        }
        Ok(out)
    }

    pub fn check(&self, splits: &Splits) -> Result<()> {
        splits.check_partition(&self.partition)?;
        for b in self.partition.blocks() {
            let c = self
                .parts
                .get(b)
                .ok_or_else(|| Error::InvalidArgument(format!("missing part for block {b}")))?;
            let s = splits.get(b)?;
            if c.shape() != (s.n() - s.r(), s.r()) {
                return invalid(format!("part for block {b} has the wrong shape"));
            }
        }
        Ok(())
    }

    /// `(α, L̂_α)` in partition order.
    pub fn lhats(&self, splits: &Splits) -> Result<Vec<(ModeSubset, Matrix)>> {
        self.check(splits)?;
        self.partition
            .blocks()
            .iter()
            .map(|b| Ok((b.clone(), splits.get(b)?.lhat(&self.parts[b])?)))
            .collect()
    }

    /// Euclidean norm of all coordinates.
    pub fn coord_norm(&self) -> f64 {
        self.parts
            .values()
            .map(|c| c.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_part_diff(&self, other: &LaplacianLike) -> f64 {
        self.parts
            .iter()
            .map(|(b, c)| match other.parts.get(b) {
                Some(o) if o.shape() == c.shape() => c.sub(o).expect("same shape").frobenius_norm(),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

/// For each flat index of `V_D`, the flat index of its `α` part and of its
/// complementary part (both row-major in ascending mode order).
pub(crate) fn split_indices(alpha: &ModeSubset, shape: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let d = shape.len();
    let rest: Vec<usize> = (1..=d).filter(|j| !alpha.contains(*j)).collect();
    let a_shape: Vec<usize> = alpha.modes().iter().map(|j| shape[j - 1]).collect();
    let c_shape: Vec<usize> = rest.iter().map(|j| shape[j - 1]).collect();
    let n: usize = shape.iter().product();
    let mut idx = vec![0; d];
    let mut a_idx = Vec::with_capacity(n);
    let mut c_idx = Vec::with_capacity(n);
    for flat in 0..n {
        unravel(flat, shape, &mut idx);
        let a: Vec<usize> = alpha.modes().iter().map(|j| idx[j - 1]).collect();
        let c: Vec<usize> = rest.iter().map(|j| idx[j - 1]).collect();
        a_idx.push(ravel(&a, &a_shape));
        c_idx.push(if c.is_empty() { 0 } else { ravel(&c, &c_shape) });
    }
    (a_idx, c_idx)
}

/// `A ⊗ id_[α]` as a dense `N × N` matrix.
pub fn embed_operator(a: &Matrix, alpha: &ModeSubset, shape: &[usize]) -> Result<Matrix> {
    alpha.check_within(shape.len())?;
    let na = alpha.dim(shape);
    if a.shape() != (na, na) {
        return invalid(format!("operator on block {alpha} must be {na}x{na}"));
    }
    let (ai, ci) = split_indices(alpha, shape);
    let n = ai.len();
    Ok(Matrix::from_fn(n, n, |i, j| if ci[i] == ci[j] { a[(ai[i], ai[j])] } else { 0.0 }))
}

/// `tr_[α] Lop`: the `n_α × n_α` matrix `Σ_c Lop[(a,c),(b,c)]`.
pub fn partial_trace(lop: &Matrix, alpha: &ModeSubset, shape: &[usize]) -> Result<Matrix> {
    let n: usize = shape.iter().product();
    if lop.shape() != (n, n) {
        return invalid(format!("operator must be {n}x{n}"));
    }
    let na = alpha.dim(shape);
    let (ai, ci) = split_indices(alpha, shape);
    let mut out = Matrix::zeros(na, na);
    for i in 0..n {
        for j in 0..n {
            if ci[i] == ci[j] {
                out[(ai[i], ai[j])] += lop[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `Δ(L) = Σ_α L̂_α ⊗ id_[α]` as a dense `N × N` matrix.
pub fn assemble_delta(l: &LaplacianLike, splits: &Splits) -> Result<Matrix> {
    let n = splits.total_dim();
    let mut out = Matrix::zeros(n, n);
    for (b, lh) in l.lhats(splits)? {
        out = out.add(&embed_operator(&lh, &b, splits.shape())?)?;
    }
    Ok(out)
}

/// Unique preimage of `lop` under [`assemble_delta`] for `partition`.
///
/// The summands are mutually orthogonal in the Frobenius inner product, so
/// `C_α = Wᵗ tr_[α](Lop) U / n_[α]`; `lop` is rejected when the reassembled
/// operator misses it by more than `tol·‖lop‖`.
pub fn decompose_delta(lop: &Matrix, partition: &Partition, splits: &Splits, tol: f64) -> Result<LaplacianLike> {
    splits.check_partition(partition)?;
    let n = splits.total_dim();
    let mut parts = BTreeMap::new();
    for b in partition.blocks() {
        let s = splits.get(b)?;
        let pt = partial_trace(lop, b, splits.shape())?;
        let comp = (n / s.n()) as f64;
        let c = s.w.tr_matmul(&pt)?.matmul(&s.u.basis)?.scale(1.0 / comp);
        parts.insert(b.clone(), c);
    }
    let l = LaplacianLike {
        partition: partition.clone(),
        parts,
    };
    let residual = assemble_delta(&l, splits)?.sub(lop)?.frobenius_norm();
    if residual > tol * lop.frobenius_norm() {
        return Err(Error::NotInSpace { residual });
    }
    Ok(l)
}

/// `exp(Δ(L)) = ⊗_α (I + L̂_α)`, evaluated entrywise.
pub fn exp_operator(l: &LaplacianLike, splits: &Splits) -> Result<Matrix> {
    let shape = splits.shape();
    let factors: Vec<(Matrix, Vec<usize>)> = l
        .lhats(splits)?
        .into_iter()
        .map(|(b, lh)| {
            let e = Matrix::identity(lh.rows()).add(&lh).expect("square");
            (e, split_indices(&b, shape).0)
        })
        .collect();
    let n = splits.total_dim();
    Ok(Matrix::from_fn(n, n, |i, j| {
        factors.iter().map(|(e, ai)| e[(ai[i], ai[j])]).product()
    }))
}

/// Product of the embedded `I + L̂_α` taken in `order` (indices into the partition blocks).
pub fn exp_operator_ordered(l: &LaplacianLike, splits: &Splits, order: &[usize]) -> Result<Matrix> {
    let lhats = l.lhats(splits)?;
    let mut seen = vec![false; lhats.len()];
    for &k in order {
        if k >= lhats.len() || std::mem::replace(&mut seen[k], true) {
            return invalid("order must be a permutation of the blocks");
        }
    }
    if seen.iter().any(|s| !s) {
        return invalid("order must be a permutation of the blocks");
    }
    let mut out = Matrix::identity(splits.total_dim());
    for &k in order {
        let (b, lh) = &lhats[k];
        let e = Matrix::identity(lh.rows()).add(lh)?;
        out = out.matmul(&embed_operator(&e, b, splits.shape())?)?;
    }
    Ok(out)
}

/// Applies `⊗_α (I + sign·L̂_α)` to a tensor without forming `N × N` matrices.
fn apply_exp(l: &LaplacianLike, splits: &Splits, t: &DenseTensor, sign: f64) -> Result<DenseTensor> {
    let mut out = t.clone();
    for (b, lh) in l.lhats(splits)? {
        let e = Matrix::identity(lh.rows()).add(&lh.scale(sign))?;
        out = mode_multiply(&out, &b, &e)?;
    }
    Ok(out)
}

/// `(⊗_α U_α) u` for a core with one mode per block.
pub fn lift_core(u: &DenseTensor, partition: &Partition, splits: &Splits) -> Result<DenseTensor> {
    let ranks = splits.ranks(partition)?;
    if u.shape() != ranks.as_slice() {
        return Err(Error::InvalidCore(format!(
            "core shape {:?} does not match block ranks {:?}",
            u.shape(),
            ranks
        )));
    }
    let mut t = u.clone();
    for (k, b) in partition.blocks().iter().enumerate() {
        t = mode_k_product(&t, k, &splits.get(b)?.u.basis)?;
    }
    from_block_tensor(&t, partition.blocks(), splits.shape())
}

/// `(⊗_α U_αᵗ) w`: coordinates of the projection of `w` in the block bases.
pub fn project_core(w: &DenseTensor, partition: &Partition, splits: &Splits) -> Result<DenseTensor> {
    splits.check_partition(partition)?;
    let mut t = to_block_tensor(w, partition.blocks())?;
    for (k, b) in partition.blocks().iter().enumerate() {
        t = mode_k_product(&t, k, &splits.get(b)?.u.basis.transpose())?;
    }
    Ok(t)
}

/// True when every mode unfolding of `u` has full row rank at `tol`.
pub fn core_is_full_rank(u: &DenseTensor, tol: f64) -> Result<bool> {
    if u.is_zero() {
        return Ok(false);
    }
    for k in 0..u.order() {
        let m = matricize(u, &ModeSubset::singleton(k + 1))?;
        if svd(&m)?.rank(tol) != u.shape()[k] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `w = exp(Δ(L)) (⊗ U_α) u`.
pub fn tucker_chart_point(l: &LaplacianLike, u: &DenseTensor, splits: &Splits) -> Result<DenseTensor> {
    l.check(splits)?;
    let w0 = lift_core(u, &l.partition, splits)?;
    if !core_is_full_rank(u, crate::subspace::DEFAULT_TOL)? {
        return Err(Error::InvalidCore("core is not of full multilinear rank".into()));
    }
    apply_exp(l, splits, &w0, 1.0)
}

/// Inverse of [`tucker_chart_point`]: each `U_α^min(w)` is written as the graph of
/// `C_α` over `U_α`, and the core is read off `⊗(I − L̂_α) w`.
pub fn tucker_chart_inverse(
    w: &DenseTensor,
    partition: &Partition,
    splits: &Splits,
    tol: f64,
) -> Result<(LaplacianLike, DenseTensor)> {
    splits.check_partition(partition)?;
    if w.shape() != splits.shape() {
        return invalid("tensor shape differs from the anchor shape");
    }
    let mut parts = BTreeMap::new();
    for b in partition.blocks() {
        let s = splits.get(b)?;
        let mb = minimal_subspace(w, b, tol)?;
        if mb.rank() != s.r() {
            return Err(Error::NotOnManifold(format!(
                "dim U{b}(w) = {} but the chart has rank {}",
                mb.rank(),
                s.r()
            )));
        }
        let a = s.u.basis.tr_matmul(&mb.basis)?;
        let condition = condition_number(&a)?;
        if condition > MAX_GRAPH_CONDITION {
            return Err(Error::OutsideChartDomain {
                alpha: b.clone(),
                condition,
            });
        }
        let g = s.w.tr_matmul(&mb.basis)?;
        parts.insert(b.clone(), g.matmul(&inverse(&a)?)?);
    }
    let l = LaplacianLike {
        partition: partition.clone(),
        parts,
    };
    let back = apply_exp(&l, splits, w, -1.0)?;
    let u = project_core(&back, partition, splits)?;
    Ok((l, u))
}

/// Chart of `FT_r` at an anchor.
#[derive(Clone, Debug)]
pub struct ChartData {
    pub anchor: DenseTensor,
    pub tree: DimensionTree,
    pub ranks: TreeRank,
    pub splits: Splits,
    pub level_partitions: Vec<Partition>,
    pub e_basis: OperatorSpaceBasis,
    /// Coordinates of the anchor in `⊗_{α∈P_1} U_α`.
    pub core: DenseTensor,
    pub tol: f64,
}

impl ChartData {
    pub fn p1(&self) -> &Partition {
        &self.level_partitions[0]
    }

    pub fn leaf_partition(&self) -> &Partition {
        self.level_partitions.last().expect("at least one level")
    }

    pub fn e_dim(&self) -> usize {
        self.e_basis.dim()
    }

    /// The operator `Σ coords_i E_i` as an `N × N` matrix.
    pub fn operator(&self, coords: &[f64]) -> Result<Matrix> {
        if coords.len() != self.e_dim() {
            return invalid(format!("expected {} coordinates, got {}", self.e_dim(), coords.len()));
        }
        let n = self.splits.total_dim();
        Matrix::from_vec(n, n, self.e_basis.vectors.matvec(coords)?)
    }
}

pub fn ft_chart(v: &DenseTensor, tree: &DimensionTree, r: &TreeRank, tol: f64) -> Result<ChartData> {
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let report = is_member(v, tree, r, tol)?;
    if !report.member {
        return Err(Error::NotOnManifold(format!(
            "rank profile differs at levels {:?}",
            report.failing_levels()
        )));
    }
    let splits = Splits::for_tree(v, tree, tol)?;
    let level_partitions = tree.level_partitions()?;
    let e_basis = e_basis_from_splits(&level_partitions, &splits, tol)?;
    let core = project_core(v, &level_partitions[0], &splits)?;
    let back = lift_core(&core, &level_partitions[0], &splits)?;
    let err = back.sub(v)?.frobenius_norm();
    if err > 1e-10 * v.frobenius_norm() {
        return Err(Error::NotOnManifold(format!(
            "anchor is not reproduced by its level-one core (error {err:.3e})"
        )));
    }
    Ok(ChartData {
        anchor: v.clone(),
        tree: tree.clone(),
        ranks: r.clone(),
        splits,
        level_partitions,
        e_basis,
        core,
        tol,
    })
}

/// `ξ_v⁻¹(L, u) = exp(L)(u)` with `L` given by coordinates over the basis of `E(v)`.
pub fn ft_chart_point(chart: &ChartData, coords: &[f64], u: &DenseTensor) -> Result<DenseTensor> {
    let lop = chart.operator(coords)?;
    let l1 = decompose_delta(&lop, chart.p1(), &chart.splits, 1e-8)?;
    let w0 = lift_core(u, chart.p1(), &chart.splits)?;
    if w0.is_zero() || tree_rank(&w0, &chart.tree, chart.tol)? != chart.ranks {
        return Err(Error::InvalidCore(
            "lifted core does not have the chart's tree-based rank".into(),
        ));
    }
    apply_exp(&l1, &chart.splits, &w0, 1.0)
}

/// Assembled operators from [`tucker_chart_inverse`] at every level, level 1 first.
pub fn level_operators(chart: &ChartData, w: &DenseTensor, tol: f64) -> Result<Vec<Matrix>> {
    chart
        .level_partitions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (l, _) = tucker_chart_inverse(w, p, &chart.splits, tol).map_err(|e| match e {
                Error::NotOnManifold(_) => Error::OutsideChartImage {
                    level: i + 1,
                    residual: f64::INFINITY,
                },
                other => other,
            })?;
            assemble_delta(&l, &chart.splits)
        })
        .collect()
}

/// Inverse of [`ft_chart_point`].
///
/// The operator from the leaf level must agree with every other level and
/// lie in `E(v)` up to `tol·(‖L‖ + ‖id‖)`; otherwise the failing level is named.
pub fn ft_chart_inverse(chart: &ChartData, w: &DenseTensor, tol: f64) -> Result<(Vec<f64>, DenseTensor)> {
    let ops = level_operators(chart, w, chart.tol)?;
    let leaf = ops.last().expect("at least one level");
    let n = chart.splits.total_dim();
    let threshold = tol * (leaf.frobenius_norm() + (n as f64).sqrt());
    for (i, op) in ops.iter().enumerate() {
        let residual = op.sub(leaf)?.frobenius_norm();
        if residual > threshold {
            return Err(Error::OutsideChartImage { level: i + 1, residual });
        }
    }
    let flat = leaf.as_slice();
    let coords = chart.e_basis.coordinates(flat)?;
    let proj = chart.e_basis.vectors.matvec(&coords)?;
    let residual = flat
        .iter()
        .zip(&proj)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    if residual > threshold {
        return Err(Error::OutsideChartImage {
            level: chart.level_partitions.len(),
            residual,
        });
    }
    let (_, u) = tucker_chart_inverse(w, chart.p1(), &chart.splits, chart.tol)?;
    Ok((coords, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::random_tree_tensor;
    use crate::linalg::matrix_exp;
    use crate::subspace::DEFAULT_TOL;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &Matrix) -> f64 {
        m.as_slice().iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    fn sample(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape.to_vec(), |_| rng.sample(StandardNormal)).unwrap()
    }

    #[test]
    fn split_resolves_identity() {
        let v = sample(&[2, 3, 4], 1);
        let s = split(&v, &ModeSubset::new(vec![2, 3]).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(s.r() + s.w.cols(), 12);
        let (p, q) = oblique_projector(&s);
        let sum = p.add(&q).unwrap().sub(&Matrix::identity(12)).unwrap();
        assert!(max_abs(&sum) < 1e-12);
        assert!(max_abs(&p.matmul(&p).unwrap().sub(&p).unwrap()) < 1e-12);
    }

    #[test]
    fn lhat_nilpotent_and_exp() {
        let v = sample(&[3, 3], 2);
        let alpha = ModeSubset::singleton(1);
        let s = split(&v, &alpha, DEFAULT_TOL).unwrap();
        // full rank 3x3 has no complement; use a rank-one tensor instead
        assert_eq!(s.w.cols(), 0);
        let e = DenseTensor::new(vec![3, 3], (0..9).map(|i| ((i / 3) + 1) as f64).collect()).unwrap();
        let s = split(&e, &alpha, DEFAULT_TOL).unwrap();
        let c = Matrix::from_rows(&[vec![0.3], vec![-0.7]]).unwrap();
        let lh = s.lhat(&c).unwrap();
        assert!(max_abs(&lh.matmul(&lh).unwrap()) < 1e-14);
        let ex = matrix_exp(&lh).unwrap();
        assert!(max_abs(&ex.sub(&Matrix::identity(3).add(&lh).unwrap()).unwrap()) < 1e-12);
    }

    #[test]
    fn tucker_round_trip() {
        let tree = DimensionTree::tucker(3).unwrap();
        let r = TreeRank::uniform(&tree, 2);
        let v = random_tree_tensor(&tree, &r, &[3, 3, 3], 5).unwrap();
        let p = tree.level_partition(1).unwrap();
        let splits = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = LaplacianLike::random(&p, &splits, 0.1, &mut rng).unwrap();
        let u0 = project_core(&v, &p, &splits).unwrap();
        let w = tucker_chart_point(&l, &u0, &splits).unwrap();
        let (l2, u2) = tucker_chart_inverse(&w, &p, &splits, DEFAULT_TOL).unwrap();
        assert!(l.max_part_diff(&l2) < 1e-8);
        assert!(u2.sub(&u0).unwrap().frobenius_norm() < 1e-8 * u0.frobenius_norm());
    }

    #[test]
    fn identity_not_in_space() {
        let v = DenseTensor::from_fn(vec![2, 2], |i| ((i[0] + 1) * (i[1] + 2)) as f64).unwrap();
        let p = Partition::singletons(2);
        let splits = Splits::new(&v, p.blocks(), DEFAULT_TOL).unwrap();
        let err = decompose_delta(&Matrix::identity(4), &p, &splits, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NotInSpace { .. }));
        let zero = decompose_delta(&Matrix::zeros(4, 4), &p, &splits, 1e-10).unwrap();
        assert_eq!(zero.coord_norm(), 0.0);
    }
}
