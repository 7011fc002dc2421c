//! Binary treed partition of the input domain.
//!
//! Internal nodes carry an axis-aligned split rule `(dim, value)`; leaves
//! tile the domain with rectangular sub-regions. A node at depth `u` splits
//! a priori with probability `zeta * (1+u)^(-depth_decay)`, and split rules
//! are drawn uniformly over a finite candidate set: the midpoints of
//! consecutive sorted coordinates of the level-1 complete design inside the
//! node's region. Finite candidates keep the tree prior proper and
//! enumerable, which the sampler's reversible-jump ratios rely on.
//!
//! Region boundaries follow the half-open convention `[l, s) / [s, u]`,
//! with the domain's upper face closed, so every point belongs to exactly
//! one leaf.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::Domain;
use crate::error::{Error, Result};

/// A rectangular sub-region produced by the partition. `upper_closed[j]`
/// marks faces coinciding with the domain's upper face, which stay closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub upper_closed: Vec<bool>,
}

impl Region {
    pub fn from_domain(domain: &Domain) -> Self {
        Region {
            lower: domain.bounds().iter().map(|b| b.0).collect(),
            upper: domain.bounds().iter().map(|b| b.1).collect(),
            upper_closed: vec![true; domain.dim()],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|j| {
            x[j] >= self.lower[j]
                && if self.upper_closed[j] {
                    x[j] <= self.upper[j]
                } else {
                    x[j] < self.upper[j]
                }
        })
    }

    /// Split into `[l, s)` and `[s, u]` halves along `dim`.
    pub fn split(&self, dim: usize, value: f64) -> (Region, Region) {
        let mut left = self.clone();
        left.upper[dim] = value;
        left.upper_closed[dim] = false;
        let mut right = self.clone();
        right.lower[dim] = value;
        (left, right)
    }

    /// Split value strictly inside the extent on `dim`?
    pub fn admits_split(&self, dim: usize, value: f64) -> bool {
        value > self.lower[dim] && value < self.upper[dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf,
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Serialized tree shape: a nested record per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeRecord {
    Split {
        dim: usize,
        value: f64,
        left: Box<TreeRecord>,
        right: Box<TreeRecord>,
    },
    Leaf {
        leaf_id: usize,
    },
}

/// Everything a caller needs to know about one node of the tree.
#[derive(Debug, Clone)]
pub struct NodeInfo {
    /// Path from the root (`false` = left child).
    pub path: Vec<bool>,
    pub depth: usize,
    pub region: Region,
    /// Split rule for internal nodes.
    pub rule: Option<(usize, f64)>,
    /// In-order index for leaves.
    pub leaf_index: Option<usize>,
    /// Half-open range of in-order leaf indices under this node.
    pub leaf_range: (usize, usize),
}

impl NodeInfo {
    pub fn is_leaf(&self) -> bool {
        self.rule.is_none()
    }
}

/// Binary treed partition over a rectangular domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTree {
    root: Node,
    domain: Domain,
}

impl PartitionTree {
    pub fn root_only(domain: Domain) -> Self {
        PartitionTree {
            root: Node::Leaf,
            domain,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n_leaves(&self) -> usize {
        fn count(n: &Node) -> usize {
            match n {
                Node::Leaf => 1,
                Node::Split { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }

    pub fn n_internal(&self) -> usize {
        self.n_leaves() - 1
    }

    pub fn max_depth(&self) -> usize {
        fn depth(n: &Node) -> usize {
            match n {
                Node::Leaf => 0,
                Node::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }

    /// In-order leaf index of the leaf containing `x`.
    pub fn leaf_of(&self, x: &[f64]) -> Result<usize> {
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!(
                "point {x:?} lies outside the domain"
            )));
        }
        let mut node = &self.root;
        let mut offset = 0;
        loop {
            match node {
                Node::Leaf => return Ok(offset),
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    if x[*dim] < *value {
                        node = left;
                    } else {
                        offset += count_leaves(left);
                        node = right;
                    }
                }
            }
        }
    }

    /// Pre-order walk over all nodes with derived geometry.
    pub fn nodes(&self) -> Vec<NodeInfo> {
        let mut out = Vec::new();
        fn walk(
            n: &Node,
            path: Vec<bool>,
            depth: usize,
            region: Region,
            leaf_start: usize,
            out: &mut Vec<NodeInfo>,
        ) -> usize {
            match n {
                Node::Leaf => {
                    out.push(NodeInfo {
                        path,
                        depth,
                        region,
                        rule: None,
                        leaf_index: Some(leaf_start),
                        leaf_range: (leaf_start, leaf_start + 1),
                    });
                    leaf_start + 1
                }
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    let slot = out.len();
                    out.push(NodeInfo {
                        path: path.clone(),
                        depth,
                        region: region.clone(),
                        rule: Some((*dim, *value)),
                        leaf_index: None,
                        leaf_range: (leaf_start, leaf_start),
                    });
                    let (lr, rr) = region.split(*dim, *value);
                    let mut p = path.clone();
                    p.push(false);
                    let mid = walk(left, p, depth + 1, lr, leaf_start, out);
                    let mut p = path;
                    p.push(true);
                    let end = walk(right, p, depth + 1, rr, mid, out);
                    out[slot].leaf_range = (leaf_start, end);
                    end
                }
            }
        }
        walk(
            &self.root,
            Vec::new(),
            0,
            Region::from_domain(&self.domain),
            0,
            &mut out,
        );
        out
    }

    pub fn leaf_regions(&self) -> Vec<Region> {
        self.nodes()
            .into_iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.region)
            .collect()
    }

    fn node_at(&self, path: &[bool]) -> &Node {
        let mut node = &self.root;
        for &side in path {
            match node {
                Node::Split { left, right, .. } => {
                    node = if side { right } else { left };
                }
                Node::Leaf => panic!("path walks past a leaf"),
            }
        }
        node
    }

    fn with_subtree(&self, path: &[bool], subtree: Node) -> PartitionTree {
        fn replace(n: &Node, path: &[bool], subtree: Node) -> Node {
            if path.is_empty() {
                return subtree;
            }
            match n {
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    if path[0] {
                        Node::Split {
                            dim: *dim,
                            value: *value,
                            left: left.clone(),
                            right: Box::new(replace(right, &path[1..], subtree)),
                        }
                    } else {
                        Node::Split {
                            dim: *dim,
                            value: *value,
                            left: Box::new(replace(left, &path[1..], subtree)),
                            right: right.clone(),
                        }
                    }
                }
                Node::Leaf => panic!("path walks past a leaf"),
            }
        }
        PartitionTree {
            root: replace(&self.root, path, subtree),
            domain: self.domain.clone(),
        }
    }

    /// Replace the leaf at `path` by a split with two leaf children.
    pub fn grow_at(&self, path: &[bool], dim: usize, value: f64) -> PartitionTree {
        debug_assert!(matches!(self.node_at(path), Node::Leaf));
        self.with_subtree(
            path,
            Node::Split {
                dim,
                value,
                left: Box::new(Node::Leaf),
                right: Box::new(Node::Leaf),
            },
        )
    }

    /// Collapse the internal node at `path` (both children leaves) into a leaf.
    pub fn prune_at(&self, path: &[bool]) -> PartitionTree {
        debug_assert!(matches!(
            self.node_at(path),
            Node::Split { left, right, .. }
                if matches!(**left, Node::Leaf) && matches!(**right, Node::Leaf)
        ));
        self.with_subtree(path, Node::Leaf)
    }

    /// Rewrite the rule of the internal node at `path`, keeping topology.
    pub fn change_rule_at(&self, path: &[bool], dim: usize, value: f64) -> PartitionTree {
        match self.node_at(path) {
            Node::Split { left, right, .. } => self.with_subtree(
                path,
                Node::Split {
                    dim,
                    value,
                    left: left.clone(),
                    right: right.clone(),
                },
            ),
            Node::Leaf => panic!("change targets an internal node"),
        }
    }

    /// Structural invariants: every split strictly inside its region.
    pub fn is_valid(&self) -> bool {
        self.nodes()
            .iter()
            .all(|n| match n.rule {
                Some((dim, value)) => n.region.admits_split(dim, value),
                None => true,
            })
    }

    pub fn to_record(&self) -> TreeRecord {
        fn conv(n: &Node, next_leaf: &mut usize) -> TreeRecord {
            match n {
                Node::Leaf => {
                    let id = *next_leaf;
                    *next_leaf += 1;
                    TreeRecord::Leaf { leaf_id: id }
                }
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => TreeRecord::Split {
                    dim: *dim,
                    value: *value,
                    left: Box::new(conv(left, next_leaf)),
                    right: Box::new(conv(right, next_leaf)),
                },
            }
        }
        let mut next = 0;
        conv(&self.root, &mut next)
    }

    pub fn from_record(record: &TreeRecord, domain: Domain) -> Result<Self> {
        fn conv(r: &TreeRecord) -> Node {
            match r {
                TreeRecord::Leaf { .. } => Node::Leaf,
                TreeRecord::Split {
                    dim,
                    value,
                    left,
                    right,
                } => Node::Split {
                    dim: *dim,
                    value: *value,
                    left: Box::new(conv(left)),
                    right: Box::new(conv(right)),
                },
            }
        }
        let tree = PartitionTree {
            root: conv(record),
            domain,
        };
        if !tree.is_valid() {
            return Err(Error::Config(
                "deserialized tree has a split outside its region".into(),
            ));
        }
        Ok(tree)
    }
}

fn count_leaves(n: &Node) -> usize {
    match n {
        Node::Leaf => 1,
        Node::Split { left, right, .. } => count_leaves(left) + count_leaves(right),
    }
}

/// Hyper-parameters of the tree process prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePriorConfig {
    /// Split base probability in (0,1).
    pub zeta: f64,
    /// Depth decay exponent (>= 0).
    pub depth_decay: f64,
    /// Minimum complete-design points per leaf, per fidelity level.
    pub min_points: Vec<usize>,
}

impl TreePriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::Config(format!(
                "tree prior zeta = {} must lie in (0,1)",
                self.zeta
            )));
        }
        if !(self.depth_decay >= 0.0 && self.depth_decay.is_finite()) {
            return Err(Error::Config(format!(
                "tree prior depth decay = {} must be finite and >= 0",
                self.depth_decay
            )));
        }
        Ok(())
    }
}

/// Probability that a node at `depth` splits.
pub fn split_prob(depth: usize, cfg: &TreePriorConfig) -> f64 {
    cfg.zeta * (1.0 + depth as f64).powf(-cfg.depth_decay)
}

/// Data context for split candidates and per-leaf point counts.
///
/// Candidates come from the level-1 complete design (the largest point
/// set); min-point checks count every level's complete design.
pub struct SplitContext<'a> {
    pub candidate_points: &'a DMatrix<f64>,
    pub level_points: Vec<&'a DMatrix<f64>>,
}

impl<'a> SplitContext<'a> {
    /// Candidate split values on `dim`: midpoints of consecutive distinct
    /// sorted coordinates of candidate points inside `region`.
    pub fn candidate_values(&self, region: &Region, dim: usize) -> Vec<f64> {
        let mut coords: Vec<f64> = (0..self.candidate_points.nrows())
            .filter(|&i| {
                let row: Vec<f64> = self.candidate_points.row(i).iter().copied().collect();
                region.contains(&row)
            })
            .map(|i| self.candidate_points[(i, dim)])
            .collect();
        coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
        coords.dedup();
        coords.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn dims_with_candidates(&self, region: &Region) -> Vec<usize> {
        (0..region.dim())
            .filter(|&j| !self.candidate_values(region, j).is_empty())
            .collect()
    }

    /// Log-density of the split-rule distribution: dimension uniform over
    /// dimensions with candidates, value uniform over that dimension's
    /// candidates. `-inf` when the rule is not in the candidate set.
    pub fn log_rule_prob(&self, region: &Region, dim: usize, value: f64) -> f64 {
        let dims = self.dims_with_candidates(region);
        if !dims.contains(&dim) {
            return f64::NEG_INFINITY;
        }
        let vals = self.candidate_values(region, dim);
        if !vals.iter().any(|&v| v == value) {
            return f64::NEG_INFINITY;
        }
        -( dims.len() as f64).ln() - (vals.len() as f64).ln()
    }

    /// Draw a rule from the candidate distribution, if any candidate exists.
    pub fn sample_rule<R: Rng>(&self, region: &Region, rng: &mut R) -> Option<(usize, f64)> {
        let dims = self.dims_with_candidates(region);
        if dims.is_empty() {
            return None;
        }
        let dim = dims[rng.random_range(0..dims.len())];
        let vals = self.candidate_values(region, dim);
        let value = vals[rng.random_range(0..vals.len())];
        Some((dim, value))
    }

    fn count_in(&self, level: usize, region: &Region) -> usize {
        let pts = self.level_points[level];
        (0..pts.nrows())
            .filter(|&i| {
                let row: Vec<f64> = pts.row(i).iter().copied().collect();
                region.contains(&row)
            })
            .count()
    }

    /// Does every level keep at least `min_points` complete-design points
    /// in both halves of the proposed split?
    pub fn split_satisfies_min_points(
        &self,
        region: &Region,
        dim: usize,
        value: f64,
        cfg: &TreePriorConfig,
    ) -> bool {
        let (left, right) = region.split(dim, value);
        (0..self.level_points.len()).all(|t| {
            let need = cfg.min_points.get(t).copied().unwrap_or(0);
            self.count_in(t, &left) >= need && self.count_in(t, &right) >= need
        })
    }

    /// Does every leaf region of `tree` satisfy the per-level minimum counts?
    pub fn leaves_satisfy_min_points(&self, tree: &PartitionTree, cfg: &TreePriorConfig) -> bool {
        tree.leaf_regions().iter().all(|region| {
            (0..self.level_points.len()).all(|t| {
                let need = cfg.min_points.get(t).copied().unwrap_or(0);
                self.count_in(t, region) >= need
            })
        })
    }
}

/// Log-density of the tree under the binary tree process prior: split
/// factors at internal nodes, `1 - P_split` at leaves that could still
/// split, and the rule density at every internal node. Leaves without any
/// candidate split cannot split, so they contribute factor one.
pub fn log_tree_prior(tree: &PartitionTree, ctx: &SplitContext, cfg: &TreePriorConfig) -> f64 {
    let mut total = 0.0;
    for node in tree.nodes() {
        match node.rule {
            Some((dim, value)) => {
                total += split_prob(node.depth, cfg).ln();
                total += ctx.log_rule_prob(&node.region, dim, value);
            }
            None => {
                if !ctx.dims_with_candidates(&node.region).is_empty() {
                    total += (1.0 - split_prob(node.depth, cfg)).ln();
                }
            }
        }
    }
    total
}

/// Leaves that admit at least one split satisfying the minimum point
/// counts in both children.
pub fn growable_leaves(
    tree: &PartitionTree,
    ctx: &SplitContext,
    cfg: &TreePriorConfig,
) -> Vec<NodeInfo> {
    tree.nodes()
        .into_iter()
        .filter(|n| {
            n.is_leaf()
                && (0..n.region.dim()).any(|dim| {
                    ctx.candidate_values(&n.region, dim)
                        .into_iter()
                        .any(|v| ctx.split_satisfies_min_points(&n.region, dim, v, cfg))
                })
        })
        .collect()
}

/// Internal nodes whose both children are leaves.
pub fn prunable_nodes(tree: &PartitionTree) -> Vec<NodeInfo> {
    let nodes = tree.nodes();
    nodes
        .iter()
        .filter(|n| {
            n.rule.is_some() && n.leaf_range.1 - n.leaf_range.0 == 2
        })
        .cloned()
        .collect()
}

/// A proposed grow move with the bookkeeping needed by the acceptance ratio.
#[derive(Debug, Clone)]
pub struct GrowProposal {
    pub tree: PartitionTree,
    /// In-order index of the split leaf in the old tree; its children take
    /// indices `leaf` and `leaf + 1` in the new tree.
    pub leaf: usize,
    pub path: Vec<bool>,
    pub depth: usize,
    pub dim: usize,
    pub value: f64,
    pub log_rule_prob: f64,
    pub n_growable: usize,
    pub n_prunable_new: usize,
}

/// A proposed prune move (the exact reverse of a grow).
#[derive(Debug, Clone)]
pub struct PruneProposal {
    pub tree: PartitionTree,
    /// Indices of the two merged leaves in the old tree; the merged leaf
    /// takes index `left_leaf` in the new tree.
    pub left_leaf: usize,
    pub path: Vec<bool>,
    pub depth: usize,
    pub dim: usize,
    pub value: f64,
    /// Rule density of the removed split (for the reverse grow).
    pub log_rule_prob: f64,
    pub n_prunable: usize,
    pub n_growable_new: usize,
}

/// A change/swap/rotate proposal: topology-sized moves evaluated by plain
/// Metropolis-Hastings on the collapsed target.
#[derive(Debug, Clone)]
pub struct StructuralProposal {
    pub tree: PartitionTree,
    /// In-order leaf indices whose data assignment may have changed.
    pub leaf_range: (usize, usize),
    /// `ln q(reverse) - ln q(forward)`.
    pub log_hastings: f64,
}

/// Select a growable leaf uniformly and draw a split from the rule
/// distribution. `None` when no leaf is growable or the drawn rule violates
/// the minimum point counts (the move counts as rejected).
pub fn propose_grow<R: Rng>(
    tree: &PartitionTree,
    ctx: &SplitContext,
    cfg: &TreePriorConfig,
    rng: &mut R,
) -> Option<GrowProposal> {
    let growable = growable_leaves(tree, ctx, cfg);
    if growable.is_empty() {
        return None;
    }
    let node = &growable[rng.random_range(0..growable.len())];
    let (dim, value) = ctx.sample_rule(&node.region, rng)?;
    if !ctx.split_satisfies_min_points(&node.region, dim, value, cfg) {
        return None;
    }
    let new_tree = tree.grow_at(&node.path, dim, value);
    let n_prunable_new = prunable_nodes(&new_tree).len();
    Some(GrowProposal {
        log_rule_prob: ctx.log_rule_prob(&node.region, dim, value),
        tree: new_tree,
        leaf: node.leaf_index.expect("growable node is a leaf"),
        path: node.path.clone(),
        depth: node.depth,
        dim,
        value,
        n_growable: growable.len(),
        n_prunable_new,
    })
}

/// Select a prunable node uniformly and merge its children.
pub fn propose_prune<R: Rng>(
    tree: &PartitionTree,
    ctx: &SplitContext,
    cfg: &TreePriorConfig,
    rng: &mut R,
) -> Option<PruneProposal> {
    let prunable = prunable_nodes(tree);
    if prunable.is_empty() {
        return None;
    }
    let node = &prunable[rng.random_range(0..prunable.len())];
    let (dim, value) = node.rule.expect("prunable node is internal");
    let new_tree = tree.prune_at(&node.path);
    let n_growable_new = growable_leaves(&new_tree, ctx, cfg).len();
    Some(PruneProposal {
        log_rule_prob: ctx.log_rule_prob(&node.region, dim, value),
        tree: new_tree,
        left_leaf: node.leaf_range.0,
        path: node.path.clone(),
        depth: node.depth,
        dim,
        value,
        n_prunable: prunable.len(),
        n_growable_new,
    })
}

/// Redraw the split rule of a uniformly chosen internal node.
pub fn propose_change<R: Rng>(
    tree: &PartitionTree,
    ctx: &SplitContext,
    cfg: &TreePriorConfig,
    rng: &mut R,
) -> Option<StructuralProposal> {
    let internals: Vec<NodeInfo> = tree.nodes().into_iter().filter(|n| !n.is_leaf()).collect();
    if internals.is_empty() {
        return None;
    }
    let node = &internals[rng.random_range(0..internals.len())];
    let (old_dim, old_value) = node.rule.expect("internal");
    let (dim, value) = ctx.sample_rule(&node.region, rng)?;
    let new_tree = tree.change_rule_at(&node.path, dim, value);
    if !new_tree.is_valid() || !ctx.leaves_satisfy_min_points(&new_tree, cfg) {
        return None;
    }
    Some(StructuralProposal {
        leaf_range: node.leaf_range,
        log_hastings: ctx.log_rule_prob(&node.region, old_dim, old_value)
            - ctx.log_rule_prob(&node.region, dim, value),
        tree: new_tree,
    })
}

/// Parent-child internal pairs: `(parent, side of the internal child)`.
fn internal_pairs(tree: &PartitionTree) -> Vec<(NodeInfo, bool)> {
    let nodes = tree.nodes();
    let mut pairs = Vec::new();
    for n in nodes.iter().filter(|n| !n.is_leaf()) {
        for side in [false, true] {
            let mut child_path = n.path.clone();
            child_path.push(side);
            if nodes
                .iter()
                .any(|c| c.path == child_path && !c.is_leaf())
            {
                pairs.push((n.clone(), side));
            }
        }
    }
    pairs
}

/// Swap the split rules of a uniformly chosen parent-child internal pair.
pub fn propose_swap<R: Rng>(
    tree: &PartitionTree,
    ctx: &SplitContext,
    cfg: &TreePriorConfig,
    rng: &mut R,
) -> Option<StructuralProposal> {
    let pairs = internal_pairs(tree);
    if pairs.is_empty() {
        return None;
    }
    let (parent, side) = &pairs[rng.random_range(0..pairs.len())];
    let mut child_path = parent.path.clone();
    child_path.push(*side);
    let child_rule = tree
        .nodes()
        .into_iter()
        .find(|n| n.path == child_path)
        .and_then(|n| n.rule)
        .expect("child is internal");
    let parent_rule = parent.rule.expect("parent is internal");
    let new_tree = tree
        .change_rule_at(&parent.path, child_rule.0, child_rule.1)
        .change_rule_at(&child_path, parent_rule.0, parent_rule.1);
    if !new_tree.is_valid() || !ctx.leaves_satisfy_min_points(&new_tree, cfg) {
        return None;
    }
    // Topology is unchanged, so the pair count is too: symmetric proposal.
    Some(StructuralProposal {
        leaf_range: parent.leaf_range,
        log_hastings: 0.0,
        tree: new_tree,
    })
}

/// Rotate a uniformly chosen eligible (node, direction) pair as in binary
/// search trees. A left rotation promotes the right child; same-dimension
/// rotations preserve the tiling exactly, cross-dimension ones reshape it.
pub fn propose_rotate<R: Rng>(
    tree: &PartitionTree,
    ctx: &SplitContext,
    cfg: &TreePriorConfig,
    rng: &mut R,
) -> Option<StructuralProposal> {
    // Eligible = internal node with an internal child on the promoted side.
    let pairs = internal_pairs(tree);
    if pairs.is_empty() {
        return None;
    }
    let (parent, side) = &pairs[rng.random_range(0..pairs.len())];
    let rotated = rotate_at(tree, &parent.path, *side)?;
    if !rotated.is_valid() || !ctx.leaves_satisfy_min_points(&rotated, cfg) {
        return None;
    }
    let n_new = internal_pairs(&rotated).len();
    if n_new == 0 {
        return None;
    }
    Some(StructuralProposal {
        leaf_range: parent.leaf_range,
        log_hastings: (pairs.len() as f64).ln() - (n_new as f64).ln(),
        tree: rotated,
    })
}

/// Rotation promoting the `promote_right` child of the node at `path`.
pub fn rotate_at(tree: &PartitionTree, path: &[bool], promote_right: bool) -> Option<PartitionTree> {
    let node = tree.node_at(path);
    let Node::Split {
        dim: pd,
        value: pv,
        left,
        right,
    } = node
    else {
        return None;
    };
    let rotated = if promote_right {
        let Node::Split {
            dim: cd,
            value: cv,
            left: c_left,
            right: c_right,
        } = right.as_ref()
        else {
            return None;
        };
        Node::Split {
            dim: *cd,
            value: *cv,
            left: Box::new(Node::Split {
                dim: *pd,
                value: *pv,
                left: left.clone(),
                right: c_left.clone(),
            }),
            right: c_right.clone(),
        }
    } else {
        let Node::Split {
            dim: cd,
            value: cv,
            left: c_left,
            right: c_right,
        } = left.as_ref()
        else {
            return None;
        };
        Node::Split {
            dim: *cd,
            value: *cv,
            left: c_left.clone(),
            right: Box::new(Node::Split {
                dim: *pd,
                value: *pv,
                left: c_right.clone(),
                right: right.clone(),
            }),
        }
    };
    Some(tree.with_subtree(path, rotated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_points(coords: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(coords.len(), 1, |i, _| coords[i])
    }

    fn cfg(zeta: f64, d: f64) -> TreePriorConfig {
        TreePriorConfig {
            zeta,
            depth_decay: d,
            min_points: vec![0],
        }
    }

    #[test]
    fn split_prob_matches_formula() {
        let c = cfg(0.5, 2.0);
        assert_eq!(split_prob(0, &c), 0.5);
        assert_eq!(split_prob(1, &c), 0.125);
        let flat = cfg(0.5, 0.0);
        for u in 0..5 {
            assert_eq!(split_prob(u, &flat), 0.5);
        }
    }

    #[test]
    fn leaf_assignment_half_open() {
        let domain = Domain::unit(2);
        let tree = PartitionTree::root_only(domain).grow_at(&[], 0, 0.5);
        assert_eq!(tree.leaf_of(&[0.4, 0.9]).unwrap(), 0);
        // Boundary point goes right: [l, s) / [s, u].
        assert_eq!(tree.leaf_of(&[0.5, 0.2]).unwrap(), 1);
        assert_eq!(tree.leaf_of(&[1.0, 1.0]).unwrap(), 1);
        assert!(tree.leaf_of(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn root_only_prior_is_one_minus_zeta() {
        let pts = grid_points(&[0.2, 0.4, 0.6, 0.8]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let tree = PartitionTree::root_only(Domain::unit(1));
        let c = cfg(0.5, 2.0);
        assert!((log_tree_prior(&tree, &ctx, &c) - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn one_split_prior_composition() {
        // Points 0.2 0.4 0.6 0.8 give candidates {0.3, 0.5, 0.7}; split at
        // 0.5 leaves both children with one candidate, so both leaf factors
        // are (1 - P_split(1)).
        let pts = grid_points(&[0.2, 0.4, 0.6, 0.8]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let c = cfg(0.5, 2.0);
        let tree = PartitionTree::root_only(Domain::unit(1)).grow_at(&[], 0, 0.5);
        let expect = 0.5f64.ln() + 2.0 * (1.0 - 0.125f64).ln() - (3.0f64).ln();
        assert!((log_tree_prior(&tree, &ctx, &c) - expect).abs() < 1e-12);
    }

    #[test]
    fn prior_mass_sums_to_one_on_enumerable_space() {
        // Large depth decay kills trees deeper than 2; enumerating trees
        // with splits at depth <= 1 captures all but ~1e-12 of the mass.
        let pts = grid_points(&[0.1, 0.3, 0.5, 0.7, 0.9]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let c = cfg(0.5, 25.0);
        let domain = Domain::unit(1);
        let mut total = 0.0;

        let root = PartitionTree::root_only(domain.clone());
        total += log_tree_prior(&root, &ctx, &c).exp();

        let root_region = Region::from_domain(&domain);
        for v0 in ctx.candidate_values(&root_region, 0) {
            let t1 = root.grow_at(&[], 0, v0);
            total += log_tree_prior(&t1, &ctx, &c).exp();
            let (left_region, right_region) = root_region.split(0, v0);
            let left_vals = ctx.candidate_values(&left_region, 0);
            let right_vals = ctx.candidate_values(&right_region, 0);
            for &vl in &left_vals {
                let t2 = t1.grow_at(&[false], 0, vl);
                total += log_tree_prior(&t2, &ctx, &c).exp();
                for &vr in &right_vals {
                    let t3 = t2.grow_at(&[true], 0, vr);
                    total += log_tree_prior(&t3, &ctx, &c).exp();
                }
            }
            for &vr in &right_vals {
                let t2 = t1.grow_at(&[true], 0, vr);
                total += log_tree_prior(&t2, &ctx, &c).exp();
            }
        }
        assert!(
            (total - 1.0).abs() < 1e-10,
            "prior mass {total} should be 1"
        );
    }

    #[test]
    fn grow_then_prune_is_identity() {
        let pts = grid_points(&[0.1, 0.3, 0.5, 0.7, 0.9]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let c = cfg(0.5, 2.0);
        let tree = PartitionTree::root_only(Domain::unit(1));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grow = propose_grow(&tree, &ctx, &c, &mut rng).unwrap();
        assert_eq!(grow.n_growable, 1);
        assert_eq!(grow.n_prunable_new, 1);
        let prune = propose_prune(&grow.tree, &ctx, &c, &mut rng).unwrap();
        assert_eq!(prune.tree, tree);
        assert_eq!(prune.n_prunable, 1);
    }

    #[test]
    fn prune_unavailable_on_root_only() {
        let pts = grid_points(&[0.2, 0.8]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let c = cfg(0.5, 2.0);
        let tree = PartitionTree::root_only(Domain::unit(1));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(propose_prune(&tree, &ctx, &c, &mut rng).is_none());
        assert!(propose_change(&tree, &ctx, &c, &mut rng).is_none());
        assert!(propose_swap(&tree, &ctx, &c, &mut rng).is_none());
        assert!(propose_rotate(&tree, &ctx, &c, &mut rng).is_none());
    }

    #[test]
    fn change_keeps_leaf_count_and_tiling() {
        let pts = grid_points(&[0.1, 0.3, 0.5, 0.7, 0.9]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let c = cfg(0.5, 2.0);
        let tree = PartitionTree::root_only(Domain::unit(1)).grow_at(&[], 0, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            if let Some(p) = propose_change(&tree, &ctx, &c, &mut rng) {
                assert_eq!(p.tree.n_leaves(), 2);
                assert!(p.tree.is_valid());
                // Tiling: every candidate point still lands in exactly one leaf.
                for i in 0..pts.nrows() {
                    p.tree.leaf_of(&[pts[(i, 0)]]).unwrap();
                }
            }
        }
    }

    #[test]
    fn swap_unavailable_on_depth_one_and_restores_on_double_apply() {
        let pts = grid_points(&[0.1, 0.3, 0.5, 0.7, 0.9]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let c = cfg(0.5, 2.0);
        let depth1 = PartitionTree::root_only(Domain::unit(1)).grow_at(&[], 0, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(propose_swap(&depth1, &ctx, &c, &mut rng).is_none());

        let deep = depth1.grow_at(&[true], 0, 0.8);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if let Some(p) = propose_swap(&deep, &ctx, &c, &mut rng) {
                assert_eq!(p.tree.n_leaves(), deep.n_leaves());
                let mut rng2 = ChaCha8Rng::seed_from_u64(seed);
                let back = propose_swap(&p.tree, &ctx, &c, &mut rng2).unwrap();
                assert_eq!(back.tree, deep);
            }
        }
    }

    #[test]
    fn rotate_preserves_leaf_count_and_inverts() {
        let pts = grid_points(&[0.1, 0.25, 0.4, 0.55, 0.7, 0.85]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let c = cfg(0.5, 2.0);
        let depth1 = PartitionTree::root_only(Domain::unit(1)).grow_at(&[], 0, 0.475);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(propose_rotate(&depth1, &ctx, &c, &mut rng).is_none());

        // Same-dimension rotation is an exact topology inverse.
        let deep = depth1.grow_at(&[true], 0, 0.775);
        let rot = rotate_at(&deep, &[], true).unwrap();
        assert_eq!(rot.n_leaves(), 3);
        assert!(rot.is_valid());
        let back = rotate_at(&rot, &[], false).unwrap();
        assert_eq!(back, deep);
    }

    #[test]
    fn serialization_round_trip() {
        let tree = PartitionTree::root_only(Domain::unit(2))
            .grow_at(&[], 0, 0.5)
            .grow_at(&[true], 1, 0.25);
        let record = tree.to_record();
        let json = serde_json::to_string(&record).unwrap();
        let parsed: TreeRecord = serde_json::from_str(&json).unwrap();
        let rebuilt = PartitionTree::from_record(&parsed, Domain::unit(2)).unwrap();
        assert_eq!(rebuilt, tree);
    }

    #[test]
    fn growable_respects_min_points() {
        let pts = grid_points(&[0.1, 0.2, 0.8, 0.9]);
        let ctx = SplitContext {
            candidate_points: &pts,
            level_points: vec![&pts],
        };
        let tree = PartitionTree::root_only(Domain::unit(1));
        // Needing 2 points per child leaves only the middle candidate.
        let c = TreePriorConfig {
            zeta: 0.5,
            depth_decay: 2.0,
            min_points: vec![2],
        };
        assert_eq!(growable_leaves(&tree, &ctx, &c).len(), 1);
        let c3 = TreePriorConfig {
            zeta: 0.5,
            depth_decay: 2.0,
            min_points: vec![3],
        };
        assert!(growable_leaves(&tree, &ctx, &c3).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn random_move_sequences_preserve_invariants(seed in 0u64..50) {
            let pts = grid_points(&[0.05, 0.15, 0.3, 0.45, 0.55, 0.65, 0.8, 0.95]);
            let ctx = SplitContext { candidate_points: &pts, level_points: vec![&pts] };
            let c = TreePriorConfig { zeta: 0.9, depth_decay: 0.5, min_points: vec![1] };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut tree = PartitionTree::root_only(Domain::unit(1));
            for _ in 0..40 {
                let mv = rng.random_range(0..5);
                let next = match mv {
                    0 => propose_grow(&tree, &ctx, &c, &mut rng).map(|p| p.tree),
                    1 => propose_prune(&tree, &ctx, &c, &mut rng).map(|p| p.tree),
                    2 => propose_change(&tree, &ctx, &c, &mut rng).map(|p| p.tree),
                    3 => propose_swap(&tree, &ctx, &c, &mut rng).map(|p| p.tree),
                    _ => propose_rotate(&tree, &ctx, &c, &mut rng).map(|p| p.tree),
                };
                if let Some(t) = next {
                    tree = t;
                }
                proptest::prop_assert!(tree.is_valid());
                // Leaves tile: every point in exactly one leaf, indices partition.
                let mut seen = vec![0usize; tree.n_leaves()];
                for i in 0..pts.nrows() {
                    let leaf = tree.leaf_of(&[pts[(i,0)]]).unwrap();
                    seen[leaf] += 1;
                }
                proptest::prop_assert_eq!(seen.iter().sum::<usize>(), pts.nrows());
                // Prior of the current (reachable) tree is finite.
                proptest::prop_assert!(log_tree_prior(&tree, &ctx, &c).is_finite());
            }
        }
    }
}
