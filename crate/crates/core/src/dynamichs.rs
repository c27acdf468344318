//! Stateful hitting-set tree that survives across the iterations of a
//! sequential diagnosis session.
//!
//! After each measurement the tree is adapted rather than rebuilt: branches
//! made obsolete by shrunken conflicts are pruned (possibly rebuilt from stored
//! duplicates), non-minimal diagnoses that may have become minimal return to
//! the queue, and diagnoses that survived the measurement are revalidated
//! without reasoning. Stale conflict labels are tolerated until they matter.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflict::find_min_conflict;
use crate::dpi::{ComponentId, ComponentSet, Dpi};
use crate::hstree::{Node, NodeQueue, TreeStats};
use crate::reasoner::{CallCategory, CallStats};

/// Search state carried from one iteration to the next.
#[derive(Clone, Debug)]
pub struct DhsState {
    q: NodeQueue,
    /// Duplicates, shortest first; equal lengths keep insertion order.
    qdup: Vec<Node>,
    /// Nodes found to be supersets of a computed diagnosis.
    dsupset: Vec<Node>,
    /// Known minimal conflicts in discovery order.
    ccalc: Vec<ComponentSet>,
    started: bool,
    audit: Option<Audit>,
}

/// Invariant checks run after every prune when enabled on a state.
#[derive(Clone, Debug, Default)]
pub struct Audit {
    pub prunes: u64,
    /// Redundancy checks on which the quick check found a witness.
    pub quick_witnesses: u64,
    /// Deleted nodes rebuilt from a stored duplicate.
    pub replacements: u64,
    pub violations: Vec<String>,
    minimal_diagnoses: Vec<ComponentSet>,
}

impl DhsState {
    /// The initial state: a queue holding only the root.
    pub fn new(dpi: &Dpi) -> DhsState {
        let mut q = NodeQueue::new();
        q.insert_sorted(Node::root(dpi));
        DhsState {
            q,
            qdup: Vec::new(),
            dsupset: Vec::new(),
            ccalc: Vec::new(),
            started: false,
            audit: None,
        }
    }

    /// Turns on invariant auditing. Audits use the brute-force oracle and are
    /// meant for small instances in tests.
    pub fn enable_audit(&mut self) {
        self.audit = Some(Audit::default());
    }

    pub fn audit(&self) -> Option<&Audit> {
        self.audit.as_ref()
    }

    pub fn queue(&self) -> &NodeQueue {
        &self.q
    }

    pub fn duplicates(&self) -> &[Node] {
        &self.qdup
    }

    pub fn nonminimal(&self) -> &[Node] {
        &self.dsupset
    }

    pub fn conflicts(&self) -> &[ComponentSet] {
        &self.ccalc
    }

    fn stored(&self) -> usize {
        self.q.len() + self.qdup.len() + self.dsupset.len()
    }

    fn insert_duplicate(&mut self, node: Node) {
        let pos = self.qdup.partition_point(|n| n.len() <= node.len());
        self.qdup.insert(pos, node);
    }

    fn add_conflict(&mut self, x: &ComponentSet) {
        self.ccalc.retain(|c| !x.is_proper_subset(c));
        if !self.ccalc.contains(x) {
            self.ccalc.push(x.clone());
        }
    }
}

/// Outcome of labelling a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DLabel {
    Valid,
    Nonmin,
    Conflict(ComponentSet),
}

/// Largest 1-based position `k` at which `x` witnesses redundancy of `node`:
/// `x ⊂ cs[k]` and `path[k] ∈ cs[k] \ x`.
pub fn witness_index(node: &Node, x: &ComponentSet) -> Option<usize> {
    (0..node.len())
        .rev()
        .find(|&j| x.is_proper_subset(&node.cs()[j]) && !x.contains(node.path()[j]))
        .map(|j| j + 1)
}

fn relabel(node: &mut Node, x: &ComponentSet) {
    for c in node.cs_mut() {
        if x.is_proper_subset(c) {
            *c = x.clone();
        }
    }
}

/// First duplicate usable to rebuild `deleted`: its length lies in
/// `k..=|deleted|` and its set equals that of the same-length prefix of `deleted`.
fn find_modifier(deleted: &Node, k: usize, dups: &[Node]) -> Option<usize> {
    dups.iter().position(|m| {
        m.len() >= k && m.len() <= deleted.len() && *m.set() == ComponentSet::new(deleted.path()[..m.len()].to_vec())
    })
}

fn timed_search(
    universe: &[ComponentId],
    dpi: &Dpi,
    calls: &mut CallStats,
    category: Option<CallCategory>,
) -> Option<ComponentSet> {
    let start = Instant::now();
    let result = find_min_conflict(universe, dpi);
    let category = category.unwrap_or(if result.conflict.is_some() {
        CallCategory::Hard
    } else {
        CallCategory::Medium
    });
    calls.record_call(category, start.elapsed(), result.checks, result.sat_checks);
    result.conflict
}

/// Quick redundancy check: one conflict search over the union of the node's
/// conflict labels minus the node. Sound but incomplete.
pub fn quick_redundancy_check(node: &Node, dpi: &Dpi, calls: &mut CallStats) -> Option<ComponentSet> {
    if node.is_empty() {
        return None;
    }
    let union = node
        .cs()
        .iter()
        .fold(ComponentSet::empty(), |acc, c| acc.union(c))
        .difference(node.set());
    let x = timed_search(union.ids(), dpi, calls, Some(CallCategory::Easy))?;
    node.cs().iter().any(|c| x.is_proper_subset(c)).then_some(x)
}

/// Complete redundancy check: per level `j`, a conflict search over
/// `cs[j] \ {path[j]}`; the first conflict found is the witness.
pub fn complete_redundancy_check(node: &Node, dpi: &Dpi, calls: &mut CallStats) -> Option<ComponentSet> {
    for (e, c) in node.path().iter().zip(node.cs()) {
        let universe = c.without(*e);
        if let Some(x) = timed_search(universe.ids(), dpi, calls, Some(CallCategory::Easy)) {
            return Some(x);
        }
    }
    None
}

/// A witness of redundancy for `node` with respect to `dpi`, if one exists.
pub fn redundant(node: &Node, dpi: &Dpi, calls: &mut CallStats) -> Option<ComponentSet> {
    quick_redundancy_check(node, dpi, calls).or_else(|| complete_redundancy_check(node, dpi, calls))
}

struct Run<'a> {
    dpi: &'a Dpi,
    state: &'a mut DhsState,
    calls: &'a mut CallStats,
    tree: TreeStats,
}

impl Run<'_> {
    /// Prunes every node collection with the new minimal conflict `x`.
    /// `diagnoses` are the diagnosis collections taking part besides the state.
    fn prune(&mut self, x: &ComponentSet, diagnoses: &mut [&mut Vec<Node>], in_flight: Option<&Node>) {
        let start = Instant::now();
        debug_assert!(self.dpi.is_conflict(x), "prune with a non-conflict {x}");

        let dups = std::mem::take(&mut self.state.qdup);
        let mut kept: Vec<Node> = Vec::with_capacity(dups.len());
        for mut node in dups {
            let k = witness_index(&node, x);
            relabel(&mut node, x);
            match k {
                None => kept.push(node),
                Some(k) => {
                    if let Some(i) = find_modifier(&node, k, &kept) {
                        if kept[i].len() < node.len() {
                            let rebuilt = node.splice(&kept[i]);
                            kept.push(rebuilt);
                            self.count_replacement();
                        }
                    }
                }
            }
        }
        self.state.qdup = kept;

        let queued = self.state.q.take_all();
        let queued = self.prune_collection(queued, x);
        for node in queued {
            if self.state.q.contains_set(node.set()) {
                self.state.insert_duplicate(node);
            } else {
                self.state.q.insert_sorted(node);
            }
        }
        let nonmin = std::mem::take(&mut self.state.dsupset);
        self.state.dsupset = self.prune_list(nonmin, x);
        for collection in diagnoses.iter_mut() {
            let nodes = std::mem::take(&mut **collection);
            **collection = self.prune_list(nodes, x);
        }
        self.state.add_conflict(x);
        self.tree.prune_time_ns += start.elapsed().as_nanos() as u64;

        if self.state.audit.is_some() {
            self.audit_after_prune(diagnoses, in_flight);
        }
    }

    fn count_replacement(&mut self) {
        if let Some(audit) = self.state.audit.as_mut() {
            audit.replacements += 1;
        }
    }

    /// Relabels, deletes and rebuilds nodes; rebuilt nodes are returned in place.
    fn prune_collection(&mut self, nodes: Vec<Node>, x: &ComponentSet) -> Vec<Node> {
        let mut out = Vec::with_capacity(nodes.len());
        for mut node in nodes {
            let k = witness_index(&node, x);
            relabel(&mut node, x);
            let Some(k) = k else {
                out.push(node);
                continue;
            };
            if let Some(i) = find_modifier(&node, k, &self.state.qdup) {
                self.count_replacement();
                if self.state.qdup[i].len() == node.len() {
                    out.push(self.state.qdup.remove(i));
                } else {
                    out.push(node.splice(&self.state.qdup[i]));
                }
            }
        }
        out
    }

    /// As [`Run::prune_collection`], demoting rebuilt nodes that clash with a set already present.
    fn prune_list(&mut self, nodes: Vec<Node>, x: &ComponentSet) -> Vec<Node> {
        let pruned = self.prune_collection(nodes, x);
        let mut out: Vec<Node> = Vec::with_capacity(pruned.len());
        for node in pruned {
            if out.iter().any(|n| n.set() == node.set()) {
                self.state.insert_duplicate(node);
            } else {
                out.push(node);
            }
        }
        out
    }

    fn audit_after_prune(&mut self, diagnoses: &[&mut Vec<Node>], in_flight: Option<&Node>) {
        let dpi = self.dpi;
        let state = &*self.state;
        let mut found = Vec::new();
        for (i, c) in state.ccalc.iter().enumerate() {
            if !dpi.is_conflict(c) {
                found.push(format!("stored conflict {c} is no conflict"));
            }
            if state
                .ccalc
                .iter()
                .enumerate()
                .any(|(j, d)| i != j && d.is_proper_subset(c))
            {
                found.push(format!("stored conflicts are no antichain at {c}"));
            }
        }
        let audit = self.state.audit.as_ref().expect("audit enabled");
        for md in &audit.minimal_diagnoses {
            let covered = state
                .q
                .iter()
                .chain(&state.dsupset)
                .chain(diagnoses.iter().flat_map(|c| c.iter()))
                .chain(in_flight)
                .any(|n| n.set().is_subset(md));
            if !covered {
                found.push(format!("minimal diagnosis {md} lost its last subset node"));
            }
        }
        let audit = self.state.audit.as_mut().expect("audit enabled");
        audit.prunes += 1;
        audit.violations.extend(found);
    }

    fn redundant(&mut self, node: &Node) -> Option<ComponentSet> {
        let quick = quick_redundancy_check(node, self.dpi, self.calls);
        if let Some(x) = quick {
            if let Some(audit) = self.state.audit.as_mut() {
                audit.quick_witnesses += 1;
                let mut scratch = CallStats::default();
                if complete_redundancy_check(node, self.dpi, &mut scratch).is_none() {
                    audit.violations.push(format!(
                        "quick check found {x} for {:?} but the complete check found none",
                        node.path()
                    ));
                }
            }
            return Some(x);
        }
        complete_redundancy_check(node, self.dpi, self.calls)
    }

    /// Adapts the tree to the measurement added since the previous call and
    /// returns the surviving diagnoses after pruning.
    fn update_tree(&mut self, mut dok: Vec<Node>, mut dnok: Vec<Node>) -> Vec<Node> {
        let mut tested: HashSet<Vec<ComponentId>> = HashSet::new();
        while let Some(node) = dnok.iter().find(|n| !tested.contains(n.path())).cloned() {
            tested.insert(node.path().to_vec());
            if let Some(x) = self.redundant(&node) {
                self.prune(&x, &mut [&mut dok, &mut dnok], None);
            }
        }
        for node in dnok {
            self.state.q.insert_sorted(node);
        }
        let (back, stay): (Vec<Node>, Vec<Node>) = std::mem::take(&mut self.state.dsupset)
            .into_iter()
            .partition(|n| !dok.iter().any(|d| d.set().is_proper_subset(n.set())));
        self.state.dsupset = stay;
        for node in back {
            self.state.q.insert_sorted(node);
        }
        for node in &dok {
            self.state.q.insert_sorted(node.clone());
        }
        dok
    }

    fn d_label(&mut self, node: &Node, dcalc: &mut Vec<Node>) -> DLabel {
        if dcalc.iter().any(|d| d.set().is_proper_subset(node.set())) {
            return DLabel::Nonmin;
        }
        debug_assert!(dcalc.iter().all(|d| d.set() != node.set()));
        let mut i = 0;
        while i < self.state.ccalc.len() {
            let c = self.state.ccalc[i].clone();
            if c.intersects(node.set()) {
                i += 1;
                continue;
            }
            match timed_search(c.ids(), self.dpi, self.calls, Some(CallCategory::Easy)) {
                Some(x) if x == c => return DLabel::Conflict(c),
                Some(x) => {
                    self.prune(&x, &mut [dcalc], Some(node));
                    return DLabel::Conflict(x);
                }
                // conflicts stay conflicts as measurements accrue
                None => {
                    debug_assert!(false, "stored conflict {c} is no longer a conflict");
                    self.state.ccalc.remove(i);
                }
            }
        }
        let universe: Vec<ComponentId> = self.dpi.ids().filter(|c| !node.set().contains(*c)).collect();
        match timed_search(&universe, self.dpi, self.calls, None) {
            Some(c) => {
                self.state.add_conflict(&c);
                DLabel::Conflict(c)
            }
            None => DLabel::Valid,
        }
    }
}

/// The `ld` most probable minimal diagnoses of `dpi` (the initial instance plus
/// all measurements so far), best first.
///
/// `dok` and `dnok` split the previous call's output into diagnoses that
/// survived the newest measurement and those it invalidated; both are empty
/// on the first call.
pub fn dynamic_hs(
    dpi: &Dpi,
    ld: usize,
    dok: Vec<Node>,
    dnok: Vec<Node>,
    state: &mut DhsState,
    calls: &mut CallStats,
    tree: &mut TreeStats,
) -> Vec<Node> {
    if let Some(audit) = state.audit.as_mut() {
        audit.minimal_diagnoses = dpi.brute_force_min_diagnoses().unwrap_or_default();
    }
    let mut run = Run {
        dpi,
        state,
        calls,
        tree: TreeStats::default(),
    };
    let dok = if run.state.started {
        run.update_tree(dok, dnok)
    } else {
        debug_assert!(dok.is_empty() && dnok.is_empty());
        Vec::new()
    };
    run.state.started = true;
    let revalidated: HashSet<ComponentSet> = dok.iter().map(|n| n.set().clone()).collect();

    let mut dcalc: Vec<Node> = Vec::new();
    while dcalc.len() < ld {
        let Some(node) = run.state.q.pop_first() else { break };
        run.tree.nodes_processed += 1;
        if revalidated.contains(node.set()) {
            dcalc.push(node);
            continue;
        }
        run.tree.nodes_generated += 1;
        match run.d_label(&node, &mut dcalc) {
            DLabel::Valid => dcalc.push(node),
            DLabel::Nonmin => run.state.dsupset.push(node),
            DLabel::Conflict(c) => {
                if let Some(audit) = run.state.audit.as_mut() {
                    if !dpi.is_conflict(&c) || c.iter().any(|x| dpi.is_conflict(&c.without(x))) {
                        audit
                            .violations
                            .push(format!("label {c} of {:?} is no minimal conflict", node.path()));
                    }
                }
                for e in c.iter() {
                    let child = node.child(e, &c, dpi);
                    let duplicate = run.state.q.contains_set(child.set())
                        || run.state.dsupset.iter().any(|n| n.set() == child.set());
                    if duplicate {
                        run.tree.nodes_generated += 1;
                        run.state.insert_duplicate(child);
                    } else {
                        run.state.q.insert_sorted(child);
                    }
                }
            }
        }
        let stored = (run.state.stored() + dcalc.len()) as u64;
        run.tree.max_nodes_stored = run.tree.max_nodes_stored.max(stored);
    }
    run.tree.duplicates_stored = run.state.qdup.len() as u64;
    let local = run.tree;
    tree.absorb(&local);
    dcalc
}

// ---------------------------------------------------------------------------
// Snapshots

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSnapshot {
    pub path: Vec<String>,
    pub cs: Vec<Vec<String>>,
}

/// Serializable form of a [`DhsState`], naming components by id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DhsSnapshot {
    pub queue: Vec<NodeSnapshot>,
    pub duplicates: Vec<NodeSnapshot>,
    pub nonminimal: Vec<NodeSnapshot>,
    pub conflicts: Vec<Vec<String>>,
    pub started: bool,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("unknown component '{0}' in snapshot")]
    UnknownComponent(String),
    #[error("snapshot node {0:?} is not a valid branch")]
    InvalidNode(Vec<String>),
}

impl DhsState {
    pub fn snapshot(&self, dpi: &Dpi) -> DhsSnapshot {
        let node = |n: &Node| NodeSnapshot {
            path: n.path().iter().map(|c| dpi.component(*c).name.clone()).collect(),
            cs: n.cs().iter().map(|c| dpi.names(c)).collect(),
        };
        DhsSnapshot {
            queue: self.q.iter().map(node).collect(),
            duplicates: self.qdup.iter().map(node).collect(),
            nonminimal: self.dsupset.iter().map(node).collect(),
            conflicts: self.ccalc.iter().map(|c| dpi.names(c)).collect(),
            started: self.started,
        }
    }

    pub fn from_snapshot(snapshot: &DhsSnapshot, dpi: &Dpi) -> Result<DhsState, SnapshotError> {
        let id = |name: &String| {
            dpi.id_of(name)
                .ok_or_else(|| SnapshotError::UnknownComponent(name.clone()))
        };
        let set = |names: &Vec<String>| names.iter().map(id).collect::<Result<ComponentSet, _>>();
        let node = |n: &NodeSnapshot| -> Result<Node, SnapshotError> {
            let path = n.path.iter().map(id).collect::<Result<Vec<_>, _>>()?;
            let cs = n.cs.iter().map(set).collect::<Result<Vec<_>, _>>()?;
            Node::from_labels(path, cs, dpi).ok_or_else(|| SnapshotError::InvalidNode(n.path.clone()))
        };
        let mut q = NodeQueue::new();
        for n in &snapshot.queue {
            q.insert_sorted(node(n)?);
        }
        Ok(DhsState {
            q,
            qdup: snapshot.duplicates.iter().map(node).collect::<Result<_, _>>()?,
            dsupset: snapshot.nonminimal.iter().map(node).collect::<Result<_, _>>()?,
            ccalc: snapshot.conflicts.iter().map(set).collect::<Result<_, _>>()?,
            started: snapshot.started,
            audit: None,
        })
    }
}
