//! Reiter's hitting-set tree as a stateless best-first search over minimal
//! diagnoses, plus the node and queue types shared with the stateful engine.

use std::cmp::Ordering;
use std::collections::{HashSet, VecDeque};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conflict::find_min_conflict;
use crate::dpi::{ComponentId, ComponentSet, Dpi};
use crate::reasoner::{CallCategory, CallStats};

/// A tree node: the branch from the root as edge labels, and the conflict
/// labelling each internal node along that branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    path: Vec<ComponentId>,
    cs: Vec<ComponentSet>,
    set: ComponentSet,
    weight: f64,
}

impl Node {
    pub fn root(dpi: &Dpi) -> Node {
        let set = ComponentSet::empty();
        Node {
            weight: dpi.weight(&set),
            path: Vec::new(),
            cs: Vec::new(),
            set,
        }
    }

    /// Node reached by following edge `e` out of this node labelled with `conflict`.
    pub fn child(&self, e: ComponentId, conflict: &ComponentSet, dpi: &Dpi) -> Node {
        debug_assert!(conflict.contains(e) && !self.set.contains(e));
        let set = self.set.with(e);
        let mut path = self.path.clone();
        path.push(e);
        let mut cs = self.cs.clone();
        cs.push(conflict.clone());
        Node {
            weight: dpi.weight(&set),
            path,
            cs,
            set,
        }
    }

    /// Node from explicit labels; `None` if they do not form a valid branch.
    pub fn from_labels(path: Vec<ComponentId>, cs: Vec<ComponentSet>, dpi: &Dpi) -> Option<Node> {
        if path.len() != cs.len() || path.iter().zip(&cs).any(|(e, c)| !c.contains(*e)) {
            return None;
        }
        let set = ComponentSet::new(path.clone());
        if set.len() != path.len() || set.iter().any(|c| c.0 == 0 || c.0 as usize > dpi.len()) {
            return None;
        }
        Some(Node {
            weight: dpi.weight(&set),
            path,
            cs,
            set,
        })
    }

    pub fn path(&self) -> &[ComponentId] {
        &self.path
    }

    pub fn cs(&self) -> &[ComponentSet] {
        &self.cs
    }

    pub fn cs_mut(&mut self) -> &mut [ComponentSet] {
        &mut self.cs
    }

    pub fn set(&self) -> &ComponentSet {
        &self.set
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    /// Keeps the first `len` labels of `prefix` and the rest of `self`.
    pub(crate) fn splice(&self, prefix: &Node) -> Node {
        let n = prefix.len();
        let mut path = prefix.path.clone();
        path.extend_from_slice(&self.path[n..]);
        let mut cs = prefix.cs.clone();
        cs.extend_from_slice(&self.cs[n..]);
        Node {
            path,
            cs,
            set: self.set.clone(),
            weight: self.weight,
        }
    }
}

/// Best-first order: higher weight, then fewer components, then the
/// lexicographically smaller sorted id list.
pub fn priority_cmp(a: &Node, b: &Node) -> Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then(a.set.len().cmp(&b.set.len()))
        .then_with(|| a.set.cmp(&b.set))
}

/// Same order for bare sets.
pub fn set_priority_cmp(dpi: &Dpi, a: &ComponentSet, b: &ComponentSet) -> Ordering {
    dpi.weight(b)
        .total_cmp(&dpi.weight(a))
        .then(a.len().cmp(&b.len()))
        .then_with(|| a.cmp(b))
}

/// Node queue kept in [`priority_cmp`] order; equal keys keep insertion order.
#[derive(Clone, Debug, Default)]
pub struct NodeQueue {
    nodes: VecDeque<Node>,
}

impl NodeQueue {
    pub fn new() -> NodeQueue {
        NodeQueue::default()
    }

    pub fn insert_sorted(&mut self, node: Node) {
        let pos = self
            .nodes
            .partition_point(|n| priority_cmp(n, &node) != Ordering::Greater);
        self.nodes.insert(pos, node);
    }

    pub fn pop_first(&mut self) -> Option<Node> {
        self.nodes.pop_front()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter()
    }

    pub fn contains_set(&self, set: &ComponentSet) -> bool {
        self.nodes.iter().any(|n| n.set == *set)
    }

    pub(crate) fn take_all(&mut self) -> Vec<Node> {
        self.nodes.drain(..).collect()
    }
}

impl FromIterator<Node> for NodeQueue {
    fn from_iter<T: IntoIterator<Item = Node>>(iter: T) -> Self {
        let mut q = NodeQueue::new();
        for n in iter {
            q.insert_sorted(n);
        }
        q
    }
}

/// Per-call search counters of a diagnosis engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeStats {
    /// Nodes handed to the labelling procedure, plus duplicates recorded at
    /// generation time. Revalidating a known diagnosis does not count.
    pub nodes_generated: u64,
    /// Nodes removed from the queue.
    pub nodes_processed: u64,
    /// Largest number of nodes held at once across all node collections.
    pub max_nodes_stored: u64,
    /// Duplicates held when the call returned.
    pub duplicates_stored: u64,
    pub prune_time_ns: u64,
}

impl TreeStats {
    pub fn absorb(&mut self, other: &TreeStats) {
        self.nodes_generated += other.nodes_generated;
        self.nodes_processed += other.nodes_processed;
        self.max_nodes_stored = self.max_nodes_stored.max(other.max_nodes_stored);
        self.duplicates_stored = other.duplicates_stored;
        self.prune_time_ns += other.prune_time_ns;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Label {
    Valid,
    Closed,
    Conflict(ComponentSet),
}

/// Labelling state of one search run.
#[derive(Debug, Default)]
pub struct HsSearch {
    pub ccalc: Vec<ComponentSet>,
    pub dcalc: Vec<Node>,
    pub labelled: HashSet<ComponentSet>,
}

/// Labels `node`, which has just left the queue. Checks run in the order:
/// non-minimality, duplicate, conflict reuse, fresh conflict search.
pub fn label(node: &Node, search: &mut HsSearch, dpi: &Dpi, stats: &mut CallStats) -> Label {
    if search.dcalc.iter().any(|d| d.set.is_subset(&node.set)) {
        return Label::Closed;
    }
    // A set-equal node was labelled before; the earlier one represents the set.
    if !search.labelled.insert(node.set.clone()) {
        return Label::Closed;
    }
    if let Some(c) = search.ccalc.iter().find(|c| !c.intersects(&node.set)) {
        return Label::Conflict(c.clone());
    }
    let universe: Vec<ComponentId> = dpi.ids().filter(|c| !node.set.contains(*c)).collect();
    let start = Instant::now();
    let result = find_min_conflict(&universe, dpi);
    let category = if result.conflict.is_some() {
        CallCategory::Hard
    } else {
        CallCategory::Medium
    };
    stats.record_call(category, start.elapsed(), result.checks, result.sat_checks);
    match result.conflict {
        Some(c) => {
            search.ccalc.push(c.clone());
            Label::Conflict(c)
        }
        None => Label::Valid,
    }
}

/// The `ld` most probable minimal diagnoses of `dpi`, best first.
pub fn hs_tree(dpi: &Dpi, ld: usize, calls: &mut CallStats, tree: &mut TreeStats) -> Vec<Node> {
    hs_tree_search(dpi, ld, calls, tree).dcalc
}

/// As [`hs_tree`], also returning the conflicts computed on the way.
pub fn hs_tree_search(dpi: &Dpi, ld: usize, calls: &mut CallStats, tree: &mut TreeStats) -> HsSearch {
    let mut queue = NodeQueue::new();
    queue.insert_sorted(Node::root(dpi));
    let mut search = HsSearch::default();
    let mut local = TreeStats::default();
    while search.dcalc.len() < ld {
        let Some(node) = queue.pop_first() else { break };
        local.nodes_processed += 1;
        local.nodes_generated += 1;
        match label(&node, &mut search, dpi, calls) {
            Label::Valid => search.dcalc.push(node),
            Label::Closed => {}
            Label::Conflict(c) => {
                for e in c.iter() {
                    queue.insert_sorted(node.child(e, &c, dpi));
                }
            }
        }
        let stored = (queue.len() + search.dcalc.len()) as u64;
        local.max_nodes_stored = local.max_nodes_stored.max(stored);
    }
    tree.absorb(&local);
    search
}
