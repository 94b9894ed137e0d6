//! Dimension partition trees, their levels and level partitions.
//!
//! Nodes are stored as explicit mode sets. Sons are kept sorted by their
//! smallest mode, which fixes every iteration order in the crate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::tensor::ModeSubset;

/// A rooted partition tree over `D = {1..d}`.
#[derive(Clone, PartialEq, Eq)]
pub struct DimensionTree {
    d: usize,
    sons: BTreeMap<ModeSubset, Vec<ModeSubset>>,
}

/// One violated tree axiom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: ModeSubset,
    /// `a`..`d` for the four axioms, `leaves` for the singleton-leaf property,
    /// `structure` for repeated nodes.
    pub axiom: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelInfo {
    pub level: BTreeMap<ModeSubset, usize>,
    pub depth: usize,
}

/// Pairwise-disjoint blocks covering `D`, in ascending order of smallest mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    blocks: Vec<ModeSubset>,
}

impl Partition {
    pub fn new(mut blocks: Vec<ModeSubset>, d: usize) -> Result<Self> {
        crate::tensor::check_partition(&blocks, d)?;
        blocks.sort();
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[ModeSubset] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, alpha: &ModeSubset) -> bool {
        self.blocks.contains(alpha)
    }

    /// Position of `alpha` in the block order.
    pub fn position(&self, alpha: &ModeSubset) -> Option<usize> {
        self.blocks.iter().position(|b| b == alpha)
    }

    /// Singleton partition `{{1},...,{d}}`.
    pub fn singletons(d: usize) -> Self {
        Self {
            blocks: (1..=d).map(ModeSubset::singleton).collect(),
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for DimensionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DimensionTree({})", self.to_json())
    }
}

impl DimensionTree {
    /// Builds and validates a tree from its son lists.
    pub fn from_sons(d: usize, sons: BTreeMap<ModeSubset, Vec<ModeSubset>>) -> Result<Self> {
        let tree = Self::from_sons_unchecked(d, sons);
        let report = tree.validate();
        if !report.ok {
            let msgs: Vec<String> = report
                .violations
                .iter()
                .map(|v| format!("{} ({}): {}", v.node, v.axiom, v.message))
                .collect();
            return invalid(format!("invalid dimension tree: {}", msgs.join("; ")));
        }
        Ok(tree)
    }

    /// Builds a tree without checking the axioms; see [`DimensionTree::validate`].
    pub fn from_sons_unchecked(d: usize, sons: BTreeMap<ModeSubset, Vec<ModeSubset>>) -> Self {
        let sons = sons
            .into_iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(k, mut s)| {
                s.sort();
                (k, s)
            })
            .collect();
        Self { d, sons }
    }

    /// Depth-one tree whose root has all singletons as sons.
    pub fn tucker(d: usize) -> Result<Self> {
        if d < 2 {
            return invalid("a Tucker tree needs d >= 2");
        }
        let mut sons = BTreeMap::new();
        sons.insert(ModeSubset::full(d), (1..=d).map(ModeSubset::singleton).collect());
        Self::from_sons(d, sons)
    }

    /// Nested tree `{1..d} -> {1}, {2..d} -> {2}, {3..d} -> ...`.
    pub fn linear(d: usize) -> Result<Self> {
        if d < 2 {
            return invalid("a linear tree needs d >= 2");
        }
        let mut sons = BTreeMap::new();
        for start in 1..d {
            let node = ModeSubset::new(start..=d)?;
            let tail = ModeSubset::new(start + 1..=d)?;
            sons.insert(node, vec![ModeSubset::singleton(start), tail]);
        }
        Self::from_sons(d, sons)
    }

    /// Binary tree splitting every block into a first half of `ceil(m/2)` modes and the rest.
    pub fn balanced_binary(d: usize) -> Result<Self> {
        if d < 2 {
            return invalid("a binary tree needs d >= 2");
        }
        let mut sons = BTreeMap::new();
        let mut stack = vec![(1usize, d)];
        while let Some((lo, hi)) = stack.pop() {
            if lo == hi {
                continue;
            }
            let mid = lo + (hi - lo + 1).div_ceil(2) - 1;
            sons.insert(
                ModeSubset::new(lo..=hi)?,
                vec![ModeSubset::new(lo..=mid)?, ModeSubset::new(mid + 1..=hi)?],
            );
            stack.push((lo, mid));
            stack.push((mid + 1, hi));
        }
        Self::from_sons(d, sons)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn root(&self) -> ModeSubset {
        ModeSubset::full(self.d)
    }

    /// Sons of `alpha`, empty for leaves.
    pub fn sons(&self, alpha: &ModeSubset) -> &[ModeSubset] {
        self.sons.get(alpha).map_or(&[], Vec::as_slice)
    }

    pub fn is_leaf(&self, alpha: &ModeSubset) -> bool {
        self.sons(alpha).is_empty()
    }

    /// All nodes in breadth-first order from the root.
    pub fn nodes(&self) -> Vec<ModeSubset> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.root()]);
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n.clone()) {
                continue;
            }
            queue.extend(self.sons(&n).iter().cloned());
            out.push(n);
        }
        out
    }

    /// All nodes except the root.
    pub fn non_root_nodes(&self) -> Vec<ModeSubset> {
        self.nodes().into_iter().skip(1).collect()
    }

    /// Interior nodes other than the root.
    pub fn interior_non_root(&self) -> Vec<ModeSubset> {
        self.non_root_nodes()
            .into_iter()
            .filter(|a| !self.is_leaf(a))
            .collect()
    }

    pub fn leaves(&self) -> Vec<ModeSubset> {
        let mut l: Vec<_> = self.nodes().into_iter().filter(|a| self.is_leaf(a)).collect();
        l.sort();
        l
    }

    pub fn parent(&self, alpha: &ModeSubset) -> Option<&ModeSubset> {
        self.sons
            .iter()
            .find(|(_, s)| s.contains(alpha))
            .map(|(p, _)| p)
    }

    /// Other sons of the parent of `alpha`.
    pub fn siblings(&self, alpha: &ModeSubset) -> Vec<ModeSubset> {
        self.parent(alpha)
            .map(|p| self.sons(p).iter().filter(|s| *s != alpha).cloned().collect())
            .unwrap_or_default()
    }

    /// Checks the four tree axioms and the singleton-leaf property.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut push = |node: &ModeSubset, axiom: &str, message: String| {
            violations.push(Violation {
                node: node.clone(),
                axiom: axiom.into(),
                message,
            })
        };
        let root = self.root();
        for key in self.sons.keys() {
            if key.last() > self.d {
                push(key, "a", format!("node is not a subset of {root}"));
            }
        }
        // Reachable structure from the root.
        let mut seen: BTreeMap<ModeSubset, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([root.clone()]);
        while let Some(n) = queue.pop_front() {
            let count = seen.entry(n.clone()).or_insert(0);
            *count += 1;
            if *count > 1 {
                push(&n, "structure", "node appears more than once".into());
                continue;
            }
            if n.last() > self.d {
                push(&n, "a", format!("node is not a subset of {root}"));
            }
            let sons = self.sons(&n);
            if n.len() >= 2 {
                if sons.len() < 2 {
                    push(
                        &n,
                        "c",
                        format!("node with #α >= 2 needs at least two sons, has {}", sons.len()),
                    );
                }
                let mut covered: Vec<usize> = sons.iter().flat_map(|s| s.modes().to_vec()).collect();
                covered.sort_unstable();
                if covered != n.modes() {
                    push(&n, "c", "sons do not form a partition of the node".into());
                }
            } else if !sons.is_empty() {
                push(&n, "d", "singleton node must be a leaf".into());
            }
            for s in sons {
                if s == &n {
                    continue;
                }
                queue.push_back(s.clone());
            }
        }
        for key in self.sons.keys() {
            if !seen.contains_key(key) {
                push(key, "structure", "node is not reachable from the root".into());
            }
        }
        for j in 1..=self.d {
            let leaf = ModeSubset::singleton(j);
            if !seen.contains_key(&leaf) {
                push(&leaf, "leaves", "singleton leaf missing from the tree".into());
            }
        }
        for n in seen.keys() {
            if self.is_leaf(n) && !n.is_singleton() {
                push(n, "leaves", "leaf is not a singleton".into());
            }
        }
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn levels(&self) -> Result<LevelInfo> {
        let report = self.validate();
        if !report.ok {
            return invalid("levels of an invalid tree");
        }
        let mut level = BTreeMap::new();
        let mut queue = VecDeque::from([(self.root(), 0usize)]);
        while let Some((n, l)) = queue.pop_front() {
            for s in self.sons(&n) {
                queue.push_back((s.clone(), l + 1));
            }
            level.insert(n, l);
        }
        let depth = level.values().copied().max().unwrap_or(0);
        Ok(LevelInfo { level, depth })
    }

    pub fn depth(&self) -> usize {
        self.levels().map(|l| l.depth).unwrap_or(0)
    }

    pub fn level_of(&self, alpha: &ModeSubset) -> Option<usize> {
        self.levels().ok()?.level.get(alpha).copied()
    }

    /// `P_k`: nodes at level `k` together with the leaves of level below `k`.
    pub fn level_partition(&self, k: usize) -> Result<Partition> {
        let info = self.levels()?;
        if k == 0 || k > info.depth {
            return invalid(format!("level {k} outside 1..={}", info.depth));
        }
        let blocks = info
            .level
            .iter()
            .filter(|(a, l)| **l == k || (**l < k && self.is_leaf(a)))
            .map(|(a, _)| a.clone())
            .collect();
        Partition::new(blocks, self.d)
    }

    /// `P_1, ..., P_depth`.
    pub fn level_partitions(&self) -> Result<Vec<Partition>> {
        (1..=self.depth()).map(|k| self.level_partition(k)).collect()
    }

    fn node_json(&self, alpha: &ModeSubset) -> Value {
        if self.is_leaf(alpha) {
            Value::from(alpha.modes().to_vec())
        } else {
            serde_json::json!({
                "block": alpha.modes(),
                "sons": self.sons(alpha).iter().map(|s| self.node_json(s)).collect::<Vec<_>>(),
            })
        }
    }

    pub fn to_json(&self) -> String {
        self.node_json(&self.root()).to_string()
    }

    /// Parses the object form `{"block": [...], "sons": [...]}`, leaves `[j]`,
    /// or the nested-list form where a list of nodes is an interior node.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("tree JSON: {e}")))?;
        let mut sons = BTreeMap::new();
        let root = parse_node(&value, &mut sons)?;
        let d = root.last();
        if root != ModeSubset::full(d) {
            return Err(Error::Parse(format!("root block {root} is not {{1..{d}}}")));
        }
        let tree = Self::from_sons_unchecked(d, sons);
        let report = tree.validate();
        if !report.ok {
            let v = &report.violations[0];
            return Err(Error::Parse(format!(
                "invalid tree: {} ({}): {}",
                v.node, v.axiom, v.message
            )));
        }
        Ok(tree)
    }
}

fn parse_modes(items: &[Value]) -> Result<Vec<usize>> {
    items
        .iter()
        .map(|x| {
            x.as_u64()
                .filter(|j| *j >= 1)
                .map(|j| j as usize)
                .ok_or_else(|| Error::Parse(format!("mode label {x} is not a positive integer")))
        })
        .collect()
}

fn parse_node(value: &Value, sons: &mut BTreeMap<ModeSubset, Vec<ModeSubset>>) -> Result<ModeSubset> {
    let parse_err = |e: Error| Error::Parse(e.to_string());
    match value {
        Value::Array(items) if items.iter().all(Value::is_number) => {
            let modes = parse_modes(items)?;
            if modes.len() != 1 {
                return Err(Error::Parse(format!(
                    "integer list {modes:?} must be a singleton leaf"
                )));
            }
            Ok(ModeSubset::singleton(modes[0]))
        }
        Value::Array(items) => {
            let children: Vec<ModeSubset> = items
                .iter()
                .map(|c| parse_node(c, sons))
                .collect::<Result<_>>()?;
            let block = union_disjoint(&children)?;
            insert_node(sons, block.clone(), children)?;
            Ok(block)
        }
        Value::Object(map) => {
            let block = map
                .get("block")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("node object lacks a \"block\" list".into()))?;
            let block = ModeSubset::new(parse_modes(block)?).map_err(parse_err)?;
            let children: Vec<ModeSubset> = match map.get("sons") {
                None => Vec::new(),
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|c| parse_node(c, sons))
                    .collect::<Result<_>>()?,
                Some(_) => return Err(Error::Parse("\"sons\" must be a list".into())),
            };
            if !children.is_empty() {
                let covered = union_disjoint(&children)?;
                if covered != block {
                    return Err(Error::Parse(format!(
                        "sons of {block} cover {covered} instead"
                    )));
                }
                insert_node(sons, block.clone(), children)?;
            }
            Ok(block)
        }
        other => Err(Error::Parse(format!("unexpected tree node {other}"))),
    }
}

fn insert_node(
    sons: &mut BTreeMap<ModeSubset, Vec<ModeSubset>>,
    block: ModeSubset,
    children: Vec<ModeSubset>,
) -> Result<()> {
    if sons.insert(block.clone(), children).is_some() {
        return Err(Error::Parse(format!("node {block} appears twice")));
    }
    Ok(())
}

fn union_disjoint(children: &[ModeSubset]) -> Result<ModeSubset> {
    let mut all: Vec<usize> = children.iter().flat_map(|c| c.modes().to_vec()).collect();
    if all.is_empty() {
        return Err(Error::Parse("empty node list".into()));
    }
    all.sort_unstable();
    if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Parse(format!("duplicate mode {}", w[0])));
    }
    ModeSubset::new(all).map_err(|e| Error::Parse(e.to_string()))
}
