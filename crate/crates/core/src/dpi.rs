//! Diagnosis problem instances ⟨K, B, P, N⟩ with per-component fault
//! probabilities, the diagnosis and conflict predicates, and brute-force
//! enumerators used as ground truth.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{is_valid_atom_name, Formula, ParseError};
use crate::reasoner::{check_compiled, solve, AtomTable, CompiledFormula, ReasonerVerdict};

/// Fault probability assumed for components that do not state one.
pub const DEFAULT_FAULT_PROBABILITY: f64 = 0.25;

/// Largest |K| the brute-force enumerators accept unless told otherwise.
pub const DEFAULT_ORACLE_BOUND: usize = 16;

/// Position of a component in K, counted from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComponentId(pub u32);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sorted, duplicate-free set of component ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentSet(Vec<ComponentId>);

impl ComponentSet {
    pub fn new(mut ids: Vec<ComponentId>) -> ComponentSet {
        ids.sort_unstable();
        ids.dedup();
        ComponentSet(ids)
    }

    pub fn empty() -> ComponentSet {
        ComponentSet(Vec::new())
    }

    pub fn from_indices(indices: &[u32]) -> ComponentSet {
        ComponentSet::new(indices.iter().map(|&i| ComponentId(i)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[ComponentId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.0.iter().copied()
    }

    pub fn indices(&self) -> Vec<u32> {
        self.0.iter().map(|c| c.0).collect()
    }

    pub fn contains(&self, id: ComponentId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn is_subset(&self, other: &ComponentSet) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut j = 0;
        for &x in &self.0 {
            while j < other.0.len() && other.0[j] < x {
                j += 1;
            }
            if j == other.0.len() || other.0[j] != x {
                return false;
            }
            j += 1;
        }
        true
    }

    pub fn is_proper_subset(&self, other: &ComponentSet) -> bool {
        self.len() < other.len() && self.is_subset(other)
    }

    pub fn intersects(&self, other: &ComponentSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn union(&self, other: &ComponentSet) -> ComponentSet {
        let mut ids = self.0.clone();
        ids.extend_from_slice(&other.0);
        ComponentSet::new(ids)
    }

    pub fn difference(&self, other: &ComponentSet) -> ComponentSet {
        ComponentSet(self.0.iter().copied().filter(|c| !other.contains(*c)).collect())
    }

    pub fn with(&self, id: ComponentId) -> ComponentSet {
        let mut ids = self.0.clone();
        if let Err(pos) = ids.binary_search(&id) {
            ids.insert(pos, id);
        }
        ComponentSet(ids)
    }

    pub fn without(&self, id: ComponentId) -> ComponentSet {
        ComponentSet(self.0.iter().copied().filter(|&c| c != id).collect())
    }
}

impl fmt::Display for ComponentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<ComponentId> for ComponentSet {
    fn from_iter<T: IntoIterator<Item = ComponentId>>(iter: T) -> Self {
        ComponentSet::new(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug)]
pub struct Component {
    pub id: ComponentId,
    pub name: String,
    pub formula: Formula,
    pub prob: f64,
}

#[derive(Debug, Error)]
pub enum DpiError {
    #[error("malformed DPI document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{context}: {source}")]
    Formula {
        context: String,
        #[source]
        source: ParseError,
    },
    #[error("a DPI needs at least one component")]
    NoComponents,
    #[error("invalid component id '{0}'")]
    InvalidId(String),
    #[error("duplicate component id '{0}'")]
    DuplicateId(String),
    #[error("fault probability of '{id}' must lie in (0,1), got {prob}")]
    InvalidProbability { id: String, prob: f64 },
    #[error("unknown component '{0}'")]
    UnknownComponent(String),
    #[error("brute-force enumeration limited to {bound} components, instance has {size}")]
    OracleBoundExceeded { size: usize, bound: usize },
}

/// File and wire representation of a DPI.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DpiDocument {
    pub components: Vec<ComponentDocument>,
    #[serde(default)]
    pub background: Vec<String>,
    #[serde(default)]
    pub positive_tests: Vec<String>,
    #[serde(default)]
    pub negative_tests: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDocument {
    pub id: String,
    pub formula: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

#[derive(Clone, Debug)]
struct Compiled {
    table: AtomTable,
    components: Vec<Arc<CompiledFormula>>,
    /// Background followed by positive tests.
    fixed: Vec<Arc<CompiledFormula>>,
    /// Negations of the negative tests, in order.
    negated_tests: Vec<Arc<CompiledFormula>>,
    /// Whether B ∪ P alone violates a requirement, i.e. ∅ is a conflict.
    empty_conflict: bool,
}

/// A formula compiled against a DPI's atom table without extending the DPI.
#[derive(Clone, Debug)]
pub struct PreparedSentence {
    positive: CompiledFormula,
    negated: CompiledFormula,
    num_vars: u32,
}

/// Immutable diagnosis problem instance. Adding a measurement yields a new value.
#[derive(Clone, Debug)]
pub struct Dpi {
    components: Vec<Component>,
    background: Vec<Formula>,
    positive_tests: Vec<Formula>,
    negative_tests: Vec<Formula>,
    compiled: Compiled,
}

impl Dpi {
    /// Builds a DPI from `(name, formula, probability)` triples; missing
    /// probabilities default to [`DEFAULT_FAULT_PROBABILITY`].
    pub fn new(
        components: Vec<(String, Formula, Option<f64>)>,
        background: Vec<Formula>,
        positive_tests: Vec<Formula>,
        negative_tests: Vec<Formula>,
    ) -> Result<Dpi, DpiError> {
        if components.is_empty() {
            return Err(DpiError::NoComponents);
        }
        let mut comps = Vec::with_capacity(components.len());
        for (i, (name, formula, prob)) in components.into_iter().enumerate() {
            if !is_valid_atom_name(&name) {
                return Err(DpiError::InvalidId(name));
            }
            if comps.iter().any(|c: &Component| c.name == name) {
                return Err(DpiError::DuplicateId(name));
            }
            let prob = prob.unwrap_or(DEFAULT_FAULT_PROBABILITY);
            if !(prob > 0.0 && prob < 1.0) {
                return Err(DpiError::InvalidProbability { id: name, prob });
            }
            comps.push(Component {
                id: ComponentId(i as u32 + 1),
                name,
                formula,
                prob,
            });
        }
        let mut table = AtomTable::new();
        let compiled_components = comps.iter().map(|c| Arc::new(table.compile(&c.formula))).collect();
        let fixed = background
            .iter()
            .chain(&positive_tests)
            .map(|f| Arc::new(table.compile(f)))
            .collect();
        let negated_tests = negative_tests
            .iter()
            .map(|f| Arc::new(table.compile(&Formula::not(f.clone()))))
            .collect();
        let mut dpi = Dpi {
            components: comps,
            background,
            positive_tests,
            negative_tests,
            compiled: Compiled {
                table,
                components: compiled_components,
                fixed,
                negated_tests,
                empty_conflict: false,
            },
        };
        dpi.refresh_empty_conflict();
        Ok(dpi)
    }

    pub fn from_document(doc: &DpiDocument) -> Result<Dpi, DpiError> {
        let parse =
            |context: String, text: &str| Formula::parse(text).map_err(|source| DpiError::Formula { context, source });
        let mut components = Vec::with_capacity(doc.components.len());
        for c in &doc.components {
            let f = parse(format!("component '{}'", c.id), &c.formula)?;
            components.push((c.id.clone(), f, c.prob));
        }
        let list = |label: &str, texts: &[String]| -> Result<Vec<Formula>, DpiError> {
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| parse(format!("{label} #{}", i + 1), t))
                .collect()
        };
        Dpi::new(
            components,
            list("background formula", &doc.background)?,
            list("positive test", &doc.positive_tests)?,
            list("negative test", &doc.negative_tests)?,
        )
    }

    pub fn from_json(text: &str) -> Result<Dpi, DpiError> {
        let doc: DpiDocument = serde_json::from_str(text)?;
        Dpi::from_document(&doc)
    }

    pub fn to_document(&self) -> DpiDocument {
        DpiDocument {
            components: self
                .components
                .iter()
                .map(|c| ComponentDocument {
                    id: c.name.clone(),
                    formula: c.formula.render(),
                    prob: Some(c.prob),
                })
                .collect(),
            background: self.background.iter().map(Formula::render).collect(),
            positive_tests: self.positive_tests.iter().map(Formula::render).collect(),
            negative_tests: self.negative_tests.iter().map(Formula::render).collect(),
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, id: ComponentId) -> &Component {
        &self.components[id.0 as usize - 1]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn background(&self) -> &[Formula] {
        &self.background
    }

    pub fn positive_tests(&self) -> &[Formula] {
        &self.positive_tests
    }

    pub fn negative_tests(&self) -> &[Formula] {
        &self.negative_tests
    }

    pub fn ids(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.components.iter().map(|c| c.id)
    }

    pub fn all(&self) -> ComponentSet {
        ComponentSet(self.ids().collect())
    }

    pub fn complement(&self, set: &ComponentSet) -> ComponentSet {
        ComponentSet(self.ids().filter(|c| !set.contains(*c)).collect())
    }

    pub fn id_of(&self, name: &str) -> Option<ComponentId> {
        self.components.iter().find(|c| c.name == name).map(|c| c.id)
    }

    /// Parses a comma-separated list of component names.
    pub fn parse_set(&self, names: &str) -> Result<ComponentSet, DpiError> {
        names
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|n| self.id_of(n).ok_or_else(|| DpiError::UnknownComponent(n.to_string())))
            .collect()
    }

    pub fn names(&self, set: &ComponentSet) -> Vec<String> {
        set.iter().map(|c| self.component(c).name.clone()).collect()
    }

    /// Atoms of the component formulas in order of first occurrence.
    pub fn component_atoms(&self) -> Vec<String> {
        let mut atoms: Vec<String> = Vec::new();
        for c in &self.components {
            for a in c.formula.atoms() {
                if !atoms.contains(&a) {
                    atoms.push(a);
                }
            }
        }
        atoms
    }

    pub fn with_positive_test(&self, f: Formula) -> Dpi {
        let mut next = self.clone();
        let compiled = next.compiled.table.compile(&f);
        next.compiled.fixed.push(Arc::new(compiled));
        next.positive_tests.push(f);
        next.refresh_empty_conflict();
        next
    }

    pub fn with_negative_test(&self, f: Formula) -> Dpi {
        let mut next = self.clone();
        let compiled = next.compiled.table.compile(&Formula::not(f.clone()));
        next.compiled.negated_tests.push(Arc::new(compiled));
        next.negative_tests.push(f);
        next.refresh_empty_conflict();
        next
    }

    fn refresh_empty_conflict(&mut self) {
        self.compiled.empty_conflict = !self.check_ids(&[]).is_ok();
    }

    /// Whether background and positive tests alone already violate a requirement.
    pub fn has_empty_conflict(&self) -> bool {
        self.compiled.empty_conflict
    }

    /// Same instance with probabilities scaled below 0.5 when needed.
    pub fn adjust_probabilities(&self) -> Dpi {
        let max = self.components.iter().map(|c| c.prob).fold(0.0, f64::max);
        let mut next = self.clone();
        if max >= 0.5 {
            let c = 0.49 / max;
            for comp in &mut next.components {
                comp.prob *= c;
            }
        }
        next
    }

    pub fn with_probabilities(&self, probs: &[f64]) -> Dpi {
        assert_eq!(probs.len(), self.components.len());
        let mut next = self.clone();
        for (comp, &p) in next.components.iter_mut().zip(probs) {
            comp.prob = p;
        }
        next
    }

    /// ∏_{c∈set} p(c) · ∏_{c∉set} (1 − p(c)).
    pub fn weight(&self, set: &ComponentSet) -> f64 {
        self.components
            .iter()
            .map(|c| if set.contains(c.id) { c.prob } else { 1.0 - c.prob })
            .product()
    }

    fn check_parts(&self, set: &[ComponentId], extra: Option<&CompiledFormula>, num_vars: u32) -> ReasonerVerdict {
        let mut base: Vec<&CompiledFormula> = set
            .iter()
            .map(|c| self.compiled.components[c.0 as usize - 1].as_ref())
            .collect();
        base.extend(self.compiled.fixed.iter().map(Arc::as_ref));
        base.extend(extra);
        let negs: Vec<&CompiledFormula> = self.compiled.negated_tests.iter().map(Arc::as_ref).collect();
        check_compiled(&base, &negs, num_vars)
    }

    /// One reasoner call on the components `set` (any order) plus B and P.
    pub fn check_ids(&self, set: &[ComponentId]) -> ReasonerVerdict {
        self.check_parts(set, None, self.compiled.table.var_count())
    }

    pub fn check_requirements(&self, set: &ComponentSet) -> ReasonerVerdict {
        self.check_ids(set.ids())
    }

    pub fn is_conflict(&self, set: &ComponentSet) -> bool {
        !self.check_requirements(set).is_ok()
    }

    pub fn is_diagnosis(&self, set: &ComponentSet) -> bool {
        self.check_requirements(&self.complement(set)).is_ok()
    }

    /// Compiles `sentence` for use with [`Dpi::entails`] and [`Dpi::check_with`].
    pub fn prepare(&self, sentence: &Formula) -> PreparedSentence {
        let mut table = self.compiled.table.clone();
        let positive = table.compile(sentence);
        let negated = table.compile(&Formula::not(sentence.clone()));
        PreparedSentence {
            positive,
            negated,
            num_vars: table.var_count(),
        }
    }

    /// Whether `set ∪ B ∪ P` entails the prepared sentence. Returns the
    /// verdict and the number of SAT checks used.
    pub fn entails(&self, set: &ComponentSet, sentence: &PreparedSentence) -> (bool, u32) {
        let mut parts: Vec<&CompiledFormula> = set
            .iter()
            .map(|c| self.compiled.components[c.0 as usize - 1].as_ref())
            .collect();
        parts.extend(self.compiled.fixed.iter().map(Arc::as_ref));
        parts.push(&sentence.negated);
        (!solve(&parts, sentence.num_vars).0, 1)
    }

    /// Requirement check of `set ∪ {sentence}`.
    pub fn check_with(&self, set: &ComponentSet, sentence: &PreparedSentence) -> ReasonerVerdict {
        self.check_parts(set.ids(), Some(&sentence.positive), sentence.num_vars)
    }

    fn check_bound(&self, bound: usize) -> Result<(), DpiError> {
        if self.len() > bound {
            return Err(DpiError::OracleBoundExceeded {
                size: self.len(),
                bound,
            });
        }
        Ok(())
    }

    /// All subset-minimal diagnoses, by ascending cardinality then lexicographically.
    pub fn brute_force_min_diagnoses(&self) -> Result<Vec<ComponentSet>, DpiError> {
        self.brute_force_min_diagnoses_bounded(DEFAULT_ORACLE_BOUND)
    }

    pub fn brute_force_min_diagnoses_bounded(&self, bound: usize) -> Result<Vec<ComponentSet>, DpiError> {
        self.check_bound(bound)?;
        Ok(minimal_sets(self.len(), |s| self.is_diagnosis(s)))
    }

    /// All subset-minimal conflicts, by ascending cardinality then lexicographically.
    pub fn brute_force_min_conflicts(&self) -> Result<Vec<ComponentSet>, DpiError> {
        self.brute_force_min_conflicts_bounded(DEFAULT_ORACLE_BOUND)
    }

    pub fn brute_force_min_conflicts_bounded(&self, bound: usize) -> Result<Vec<ComponentSet>, DpiError> {
        self.check_bound(bound)?;
        Ok(minimal_sets(self.len(), |s| self.is_conflict(s)))
    }
}

/// Minimal members of an upward-closed family over {1..n}.
fn minimal_sets(n: usize, mut member: impl FnMut(&ComponentSet) -> bool) -> Vec<ComponentSet> {
    let mut found: Vec<ComponentSet> = Vec::new();
    for k in 0..=n {
        for_each_combination(n, k, |set| {
            if !found.iter().any(|m| m.is_subset(set)) && member(set) {
                found.push(set.clone());
            }
        });
    }
    found
}

/// Calls `f` on every k-subset of {1..n} in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&ComponentSet)) {
    if k > n {
        return;
    }
    let mut idx: Vec<u32> = (1..=k as u32).collect();
    loop {
        f(&ComponentSet::from_indices(&idx));
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < (n - k + i + 1) as u32 {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}
