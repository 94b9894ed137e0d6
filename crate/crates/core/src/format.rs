//! Fixed-rank tree-based sets: membership in `FT_r`, `FT_{≤r}` and the
//! level-wise Tucker sets `M_{r_k}`, admissibility and properness verdicts,
//! and generation of tensors with a prescribed tree-based rank.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{orthonormalize_columns, Matrix};
use crate::network::TreeNetwork;
use crate::subspace::{check_tree_shape, minimal_subspace, tree_rank, TreeRank, DEFAULT_TOL};
use crate::tensor::{from_block_tensor, mode_k_product, DenseTensor, ModeSubset};
use crate::tree::{DimensionTree, Partition};

/// Generator retry budget.
pub const MAX_GENERATION_ATTEMPTS: usize = 20;

#[derive(Clone, Debug, Serialize)]
pub struct LevelCheck {
    pub level: usize,
    pub partition: Vec<ModeSubset>,
    pub expected: Vec<usize>,
    pub computed: Vec<usize>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub member: bool,
    pub per_level: Vec<LevelCheck>,
    pub tol: f64,
}

impl MembershipReport {
    pub fn failing_levels(&self) -> Vec<usize> {
        self.per_level.iter().filter(|l| !l.pass).map(|l| l.level).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Admissible,
    Inadmissible,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct AdmissibilityVerdict {
    pub verdict: Verdict,
    pub violated_conditions: Vec<String>,
    pub witness: Option<DenseTensor>,
    pub attempts: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSampling {
    pub level: usize,
    /// Samples that landed in `M_{r_k}`.
    pub samples: usize,
    /// How many of those were also in `FT_r`.
    pub in_tree_set: usize,
    /// Draws rejected for missing `M_{r_k}`.
    pub rejected: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProperVerdict {
    pub proper: bool,
    pub explanation: String,
    /// True when the verdict rests on sampling rather than a structural rule.
    pub sampled: bool,
    pub per_level: Vec<LevelSampling>,
}

/// Generator output with the number of attempts used (1 = first try).
#[derive(Clone, Debug)]
pub struct Generated {
    pub tensor: DenseTensor,
    pub attempts: usize,
}

/// Checks `dim U_α^min(v) = r_α` for every block; returns the verdict and the computed ranks.
pub fn tucker_membership(
    v: &DenseTensor,
    partition: &Partition,
    ranks: &[usize],
    tol: f64,
) -> Result<(bool, Vec<usize>)> {
    if ranks.len() != partition.len() {
        return invalid("one rank per block is required");
    }
    if ranks.contains(&0) {
        return invalid("ranks must be positive");
    }
    let computed: Vec<usize> = partition
        .blocks()
        .iter()
        .map(|b| minimal_subspace(v, b, tol).map(|s| s.rank()))
        .collect::<Result<_>>()?;
    Ok((computed == ranks, computed))
}

pub fn is_member(v: &DenseTensor, tree: &DimensionTree, r: &TreeRank, tol: f64) -> Result<MembershipReport> {
    check_tree_shape(v, tree)?;
    r.check_covers(tree)?;
    if r.get(&tree.root()) != Some(1) {
        return invalid("the root rank of a nonzero tensor is always 1");
    }
    let mut per_level = Vec::new();
    for (i, p) in tree.level_partitions()?.into_iter().enumerate() {
        let expected = r.restrict(&p)?;
        let (pass, computed) = tucker_membership(v, &p, &expected, tol)?;
        per_level.push(LevelCheck {
            level: i + 1,
            partition: p.blocks().to_vec(),
            expected,
            computed,
            pass,
        });
    }
    Ok(MembershipReport {
        member: per_level.iter().all(|l| l.pass),
        per_level,
        tol,
    })
}

/// Direct check `dim U_α^min(v) = r_α` over all nodes.
pub fn all_node_rank_check(v: &DenseTensor, tree: &DimensionTree, r: &TreeRank, tol: f64) -> Result<bool> {
    r.check_covers(tree)?;
    let computed = tree_rank(v, tree, tol)?;
    Ok(tree.nodes().iter().all(|a| computed.get(a) == r.get(a)))
}

/// `dim U_α^min(v) ≤ r_α` for every node.
pub fn bounded_rank_member(v: &DenseTensor, tree: &DimensionTree, r: &TreeRank, tol: f64) -> Result<bool> {
    r.check_covers(tree)?;
    let computed = tree_rank(v, tree, tol)?;
    Ok(tree
        .nodes()
        .iter()
        .all(|a| computed.get(a).expect("computed") <= r.get(a).expect("covered")))
}

/// Necessary conditions on an admissible rank tuple; returns the violated ones.
pub fn necessary_conditions(tree: &DimensionTree, r: &TreeRank, shape: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    if shape.len() != tree.d() {
        out.push(format!("shape has {} modes, tree has {}", shape.len(), tree.d()));
        return out;
    }
    if let Err(e) = r.check_covers(tree) {
        out.push(e.to_string());
        return out;
    }
    let n_total: usize = shape.iter().product();
    let root = tree.root();
    let rank = |a: &ModeSubset| r.get(a).expect("covered");
    if rank(&root) != 1 {
        out.push(format!("root rank r{root} = {} but U_D^min(v) = span{{v}}", rank(&root)));
    }
    for a in tree.nodes() {
        let ra = rank(&a);
        if !tree.is_leaf(&a) {
            let prod: usize = tree.sons(&a).iter().map(rank).product();
            if ra > prod {
                out.push(format!("r{a} = {ra} exceeds the product of son ranks {prod}"));
            }
        }
        if a != root {
            let na = a.dim(shape);
            let bound = na.min(n_total / na);
            if ra > bound {
                out.push(format!("r{a} = {ra} exceeds min(n_α, n_[α]) = {bound}"));
            }
            let parent = tree.parent(&a).expect("non-root node has a parent");
            let comp: usize = rank(parent) * tree.siblings(&a).iter().map(rank).product::<usize>();
            if ra > comp {
                out.push(format!(
                    "r{a} = {ra} exceeds r_parent · Π r_siblings = {comp} (complement bound)"
                ));
            }
        }
    }
    out
}

fn attempt_rng(seed: u64, attempt: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt as u64);
    rng
}

/// Random tensor with tree-based rank exactly `r`, retried with fresh
/// streams up to `max_attempts` times.
pub fn generate_tree_tensor(
    tree: &DimensionTree,
    r: &TreeRank,
    shape: &[usize],
    seed: u64,
    max_attempts: usize,
) -> Result<Generated> {
    let violated = necessary_conditions(tree, r, shape);
    if !violated.is_empty() {
        return Err(Error::Inadmissible(violated));
    }
    for attempt in 0..max_attempts {
        let mut rng = attempt_rng(seed, attempt);
        let net = TreeNetwork::random(tree, r, shape, &mut rng)?;
        let v = net.contract()?;
        if v.is_zero() {
            continue;
        }
        if tree_rank(&v, tree, DEFAULT_TOL)? == *r {
            return Ok(Generated {
                tensor: v,
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::GenerationFailure(format!(
        "requested rank not reached in {max_attempts} attempts (evidence of inadmissibility)"
    )))
}

pub fn random_tree_tensor(tree: &DimensionTree, r: &TreeRank, shape: &[usize], seed: u64) -> Result<DenseTensor> {
    generate_tree_tensor(tree, r, shape, seed, MAX_GENERATION_ATTEMPTS).map(|g| g.tensor)
}

/// Random Tucker tensor for `partition` with blockwise ranks `ranks`:
/// orthonormal block bases and a standard normal core.
pub fn random_tucker_tensor<R: Rng>(
    partition: &Partition,
    ranks: &[usize],
    shape: &[usize],
    rng: &mut R,
) -> Result<DenseTensor> {
    let mut core = DenseTensor::from_fn(ranks.to_vec(), |_| rng.sample(StandardNormal))?;
    for (k, (b, r)) in partition.blocks().iter().zip(ranks).enumerate() {
        let n = b.dim(shape);
        if *r > n {
            return invalid(format!("block {b} rank {r} exceeds dimension {n}"));
        }
        let g = Matrix::from_fn(n, *r, |_, _| rng.sample(StandardNormal));
        core = mode_k_product(&core, k, &orthonormalize_columns(&g))?;
    }
    from_block_tensor(&core, partition.blocks(), shape)
}

pub fn is_admissible(
    tree: &DimensionTree,
    r: &TreeRank,
    shape: &[usize],
    trials: usize,
    seed: u64,
) -> AdmissibilityVerdict {
    let violated = necessary_conditions(tree, r, shape);
    if !violated.is_empty() {
        return AdmissibilityVerdict {
            verdict: Verdict::Inadmissible,
            violated_conditions: violated,
            witness: None,
            attempts: 0,
        };
    }
    match generate_tree_tensor(tree, r, shape, seed, trials.max(1)) {
        Ok(g) => AdmissibilityVerdict {
            verdict: Verdict::Admissible,
            violated_conditions: Vec::new(),
            witness: Some(g.tensor),
            attempts: g.attempts,
        },
        Err(_) => AdmissibilityVerdict {
            verdict: Verdict::Unknown,
            violated_conditions: Vec::new(),
            witness: None,
            attempts: trials.max(1),
        },
    }
}

/// Decides whether `FT_r` differs from every level set `M_{r_k}`.
///
/// Depth-one trees are not proper by convention. A first level consisting
/// of a leaf and its complement only constrains one rank that the deeper
/// levels already fix, so with depth two the set collapses onto `M_{r_2}`.
/// Otherwise each level is sampled with `trials` random Tucker tensors
/// (seed schedule `seed + trial`, stream = level); a level whose samples all
/// land in `FT_r` is reported as collapsed.
pub fn is_proper(
    tree: &DimensionTree,
    r: &TreeRank,
    shape: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ProperVerdict> {
    let violated = necessary_conditions(tree, r, shape);
    if !violated.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "inadmissible rank tuple: {}",
            violated.join("; ")
        )));
    }
    if trials == 0 {
        return invalid("at least one trial is required");
    }
    let depth = tree.depth();
    if depth <= 1 {
        return Ok(ProperVerdict {
            proper: false,
            explanation: "depth-one tree: FT_r equals the single Tucker set M_{r_1}".into(),
            sampled: false,
            per_level: Vec::new(),
        });
    }
    let p1 = tree.level_partition(1)?;
    if p1.len() == 2 && depth == 2 {
        if let Some(leaf) = p1.blocks().iter().find(|b| tree.is_leaf(b)) {
            let other = p1.blocks().iter().find(|b| *b != leaf).expect("two blocks");
            return Ok(ProperVerdict {
                proper: false,
                explanation: format!(
                    "level 1 is {{{leaf}, {other}}}: dim U{leaf} = dim U{other} for every tensor, \
                     and {leaf} is also a block of level 2, so FT_r = M_{{r_2}}"
                ),
                sampled: false,
                per_level: Vec::new(),
            });
        }
    }
    let mut per_level = Vec::new();
    for (i, p) in tree.level_partitions()?.into_iter().enumerate() {
        let level = i + 1;
        let ranks = r.restrict(&p)?;
        let mut stats = LevelSampling {
            level,
            samples: 0,
            in_tree_set: 0,
            rejected: 0,
        };
        for t in 0..trials {
            let mut rng = attempt_rng(seed.wrapping_add(t as u64), level);
            let w = random_tucker_tensor(&p, &ranks, shape, &mut rng)?;
            if w.is_zero() || !tucker_membership(&w, &p, &ranks, DEFAULT_TOL)?.0 {
                stats.rejected += 1;
                continue;
            }
            stats.samples += 1;
            if tree_rank(&w, tree, DEFAULT_TOL)? == *r {
                stats.in_tree_set += 1;
            }
        }
        per_level.push(stats);
    }
    if let Some(l) = per_level.iter().find(|l| l.in_tree_set == l.samples) {
        return Ok(ProperVerdict {
            proper: false,
            explanation: format!(
                "all {} samples of M_{{r_{}}} lie in FT_r ({} rejected draws): level set appears to equal FT_r",
                l.samples, l.level, l.rejected
            ),
            sampled: true,
            per_level,
        });
    }
    let counts: Vec<String> = per_level
        .iter()
        .map(|l| format!("level {}: {}/{} samples outside FT_r", l.level, l.samples - l.in_tree_set, l.samples))
        .collect();
    Ok(ProperVerdict {
        proper: true,
        explanation: format!("every level set contains tensors outside FT_r ({})", counts.join(", ")),
        sampled: true,
        per_level,
    })
}
