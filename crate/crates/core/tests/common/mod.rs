#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treegeom::{DenseTensor, DimensionTree, Matrix, ModeSubset, TreeRank};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn set(modes: &[usize]) -> ModeSubset {
    ModeSubset::new(modes.to_vec()).unwrap()
}

/// `{1,2,3,4} -> {1,2,3}, {4}` with `{1,2,3} -> {1}, {2,3}`.
pub fn nested4() -> DimensionTree {
    DimensionTree::from_json("[[[1],[[2],[3]]],[4]]").unwrap()
}

/// Three sons of the root: `{1,2,3}` (nested as in [`nested4`]), `{4,5}`, `{6}`.
pub fn nested6() -> DimensionTree {
    DimensionTree::from_json("[[[1],[[2],[3]]],[[4],[5]],[6]]").unwrap()
}

/// `{1}` and `{2,...,6}` under the root, the latter split into singletons:
/// the ranks of the two sons are forced equal.
pub fn split6() -> DimensionTree {
    DimensionTree::from_json("[[1],[[2],[3],[4],[5],[6]]]").unwrap()
}

pub fn uniform_tensor(shape: &[usize], r: &mut impl Rng) -> DenseTensor {
    DenseTensor::from_fn(shape.to_vec(), |_| r.random_range(-1.0..1.0)).unwrap()
}

pub fn elementary(shape: &[usize], r: &mut impl Rng) -> DenseTensor {
    let factors: Vec<DenseTensor> = shape
        .iter()
        .map(|&n| DenseTensor::vector((0..n).map(|_| r.random_range(0.5..1.5)).collect()).unwrap())
        .collect();
    treegeom::tensor::tensor_product(&factors).unwrap()
}

/// Rank by Gaussian elimination with partial pivoting; pivots below
/// `rel_tol · max|entry|` count as zero.
pub fn elimination_rank(m: &Matrix, rel_tol: f64) -> usize {
    let (rows, cols) = m.shape();
    let mut a: Vec<Vec<f64>> = (0..rows).map(|i| m.row(i).to_vec()).collect();
    let scale = a.iter().flatten().fold(0.0f64, |x, y| x.max(y.abs()));
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let (p, best) = (rank..rows)
            .map(|i| (i, a[i][c].abs()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= rel_tol * scale {
            continue;
        }
        a.swap(rank, p);
        for i in rank + 1..rows {
            let f = a[i][c] / a[rank][c];
            for j in c..cols {
                a[i][j] -= f * a[rank][j];
            }
        }
        rank += 1;
    }
    rank
}

/// Exact rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn exact_rank(m: &[Vec<i64>]) -> usize {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut rank = 0;
    let mut prev: i128 = 1;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&i| a[i][c] != 0) else { continue };
        a.swap(rank, p);
        for i in rank + 1..rows {
            for j in c + 1..cols {
                a[i][j] = (a[rank][c] * a[i][j] - a[i][c] * a[rank][j]) / prev;
            }
            a[i][c] = 0;
        }
        prev = a[rank][c];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// `M_α(v)` built entry by entry from the index definition.
pub fn unfolding_oracle(v: &DenseTensor, alpha: &ModeSubset) -> Matrix {
    let shape = v.shape();
    let d = shape.len();
    let rest: Vec<usize> = (1..=d).filter(|j| !alpha.contains(*j)).collect();
    let rows: usize = alpha.modes().iter().map(|j| shape[j - 1]).product();
    let cols: usize = rest.iter().map(|j| shape[j - 1]).product();
    let mut out = Matrix::zeros(rows, cols);
    let mut idx = vec![0usize; d];
    for flat in 0..v.len() {
        let mut f = flat;
        for k in (0..d).rev() {
            idx[k] = f % shape[k];
            f /= shape[k];
        }
        let mut row = 0;
        for j in alpha.modes() {
            row = row * shape[j - 1] + idx[j - 1];
        }
        let mut col = 0;
        for j in &rest {
            col = col * shape[j - 1] + idx[j - 1];
        }
        out[(row, col)] = v.data()[flat];
    }
    out
}

/// Oracle tree rank: elimination rank of every unfolding.
pub fn oracle_tree_rank(v: &DenseTensor, tree: &DimensionTree) -> TreeRank {
    let mut r = TreeRank::default();
    for a in tree.nodes() {
        r.set(a.clone(), elimination_rank(&unfolding_oracle(v, &a), 1e-9));
    }
    r
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.as_slice().iter().fold(0.0, |a, b| a.max(b.abs()))
}

pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

/// A rank tuple with entries in `1..=max_r` (root 1) passing the necessary conditions.
pub fn random_ranks(tree: &DimensionTree, shape: &[usize], max_r: usize, r: &mut impl Rng) -> TreeRank {
    loop {
        let mut k = TreeRank::default();
        for a in tree.nodes() {
            let v = if a == tree.root() { 1 } else { r.random_range(1..=max_r) };
            k.set(a, v);
        }
        if treegeom::necessary_conditions(tree, &k, shape).is_empty() {
            return k;
        }
    }
}

pub fn random_shape(d: usize, lo: usize, hi: usize, r: &mut impl Rng) -> Vec<usize> {
    (0..d).map(|_| r.random_range(lo..=hi)).collect()
}

pub fn assert_mat_close(a: &Matrix, b: &Matrix, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    let d = max_abs(&a.sub(b).unwrap());
    assert!(d <= tol, "max entry difference {d:.3e} exceeds {tol:.1e}");
}
