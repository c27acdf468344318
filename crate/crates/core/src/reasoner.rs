//! Deterministic DPLL kernel and the requirement check that every conflict and
//! diagnosis test reduces to.
//!
//! Formulas are compiled once against an [`AtomTable`] into integer clauses;
//! each compiled formula owns a private range of auxiliary variables so any
//! selection of compiled formulas can be conjoined without renaming.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::formula::{clausify, ClauseSet, Formula, Var};

/// Maps user atoms to dense variable indices (1-based, DIMACS style).
#[derive(Clone, Debug, Default)]
pub struct AtomTable {
    index: HashMap<String, u32>,
    names: Vec<String>,
    next_var: u32,
}

impl AtomTable {
    pub fn new() -> AtomTable {
        AtomTable {
            index: HashMap::new(),
            names: Vec::new(),
            next_var: 1,
        }
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    /// User atom names in the order they were first compiled.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Highest variable index handed out so far.
    pub fn var_count(&self) -> u32 {
        self.next_var - 1
    }

    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = self.fresh();
        self.index.insert(name.to_string(), v);
        self.names.push(name.to_string());
        v
    }

    fn fresh(&mut self) -> u32 {
        let v = self.next_var;
        self.next_var += 1;
        v
    }

    /// Compiles `f`, interning new atoms and reserving fresh auxiliaries.
    pub fn compile(&mut self, f: &Formula) -> CompiledFormula {
        let raw = clausify(f);
        let mut aux: HashMap<u32, u32> = HashMap::new();
        let mut clauses = Vec::with_capacity(raw.clauses.len());
        for clause in raw.clauses {
            let mut out = Vec::with_capacity(clause.len());
            for (var, positive) in clause {
                let v = match var {
                    Var::Named(a) => self.intern(a),
                    Var::Aux(n) => match aux.get(&n) {
                        Some(&v) => v,
                        None => {
                            let v = self.fresh();
                            aux.insert(n, v);
                            v
                        }
                    },
                } as i32;
                out.push(if positive { v } else { -v });
            }
            clauses.push(out);
        }
        CompiledFormula { clauses }
    }
}

/// Clauses over [`AtomTable`] variables; literal `v` is positive, `-v` negative.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompiledFormula {
    pub clauses: Vec<Vec<i32>>,
}

/// Counters describing the search effort of one SAT call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SatTrace {
    pub decisions: u64,
    pub propagations: u64,
}

/// Satisfiability of the conjunction of `parts`, whose variables are all `<= num_vars`.
pub fn solve(parts: &[&CompiledFormula], num_vars: u32) -> (bool, SatTrace) {
    let clauses: Vec<&[i32]> = parts
        .iter()
        .flat_map(|p| p.clauses.iter().map(|c| c.as_slice()))
        .collect();
    let mut solver = Dpll {
        clauses,
        value: vec![0; num_vars as usize + 1],
        trail: Vec::new(),
        trace: SatTrace::default(),
    };
    let sat = solver.search();
    (sat, solver.trace)
}

struct Dpll<'a> {
    clauses: Vec<&'a [i32]>,
    /// 0 unassigned, 1 true, -1 false.
    value: Vec<i8>,
    trail: Vec<u32>,
    trace: SatTrace,
}

impl Dpll<'_> {
    fn lit_value(&self, lit: i32) -> i8 {
        let v = self.value[lit.unsigned_abs() as usize];
        if lit > 0 {
            v
        } else {
            -v
        }
    }

    fn assign(&mut self, lit: i32) {
        let var = lit.unsigned_abs();
        self.value[var as usize] = if lit > 0 { 1 } else { -1 };
        self.trail.push(var);
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let var = self.trail.pop().unwrap();
            self.value[var as usize] = 0;
        }
    }

    /// Unit propagation to fixpoint; false on a falsified clause.
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            for i in 0..self.clauses.len() {
                let clause = self.clauses[i];
                let mut unassigned = None;
                let mut open = 0;
                let mut satisfied = false;
                for &lit in clause {
                    match self.lit_value(lit) {
                        1 => {
                            satisfied = true;
                            break;
                        }
                        0 => {
                            open += 1;
                            unassigned = Some(lit);
                        }
                        _ => {}
                    }
                }
                if satisfied {
                    continue;
                }
                match open {
                    0 => return false,
                    1 => {
                        self.assign(unassigned.unwrap());
                        self.trace.propagations += 1;
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// Lowest variable occurring in a clause that is not yet satisfied.
    fn branch_var(&self) -> Option<u32> {
        let mut best: Option<u32> = None;
        for clause in &self.clauses {
            if clause.iter().any(|&l| self.lit_value(l) == 1) {
                continue;
            }
            for &lit in clause.iter() {
                let var = lit.unsigned_abs();
                if self.value[var as usize] == 0 && best.is_none_or(|b| var < b) {
                    best = Some(var);
                }
            }
        }
        best
    }

    fn search(&mut self) -> bool {
        if !self.propagate() {
            return false;
        }
        let Some(var) = self.branch_var() else {
            return true;
        };
        for lit in [var as i32, -(var as i32)] {
            let mark = self.trail.len();
            self.trace.decisions += 1;
            self.assign(lit);
            if self.search() {
                return true;
            }
            self.undo_to(mark);
        }
        false
    }
}

/// Satisfiability of a named clause set; atoms are indexed by first occurrence.
pub fn is_satisfiable(cs: &ClauseSet) -> bool {
    is_satisfiable_traced(cs).0
}

pub fn is_satisfiable_traced(cs: &ClauseSet) -> (bool, SatTrace) {
    let mut index: HashMap<&str, i32> = HashMap::new();
    let mut clauses = Vec::with_capacity(cs.clauses.len());
    for clause in &cs.clauses {
        let mut out = Vec::with_capacity(clause.len());
        for lit in clause {
            let next = index.len() as i32 + 1;
            let v = *index.entry(lit.atom.as_str()).or_insert(next);
            out.push(if lit.positive { v } else { -v });
        }
        clauses.push(out);
    }
    let compiled = CompiledFormula { clauses };
    solve(&[&compiled], index.len() as u32)
}

/// Which requirement a checked set violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// The set together with background and positive tests is inconsistent.
    Inconsistent,
    /// The set entails the negative test with this position.
    NegativeTest(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReasonerVerdict {
    pub violation: Option<Violation>,
    pub sat_checks: u32,
}

impl ReasonerVerdict {
    pub fn is_ok(&self) -> bool {
        self.violation.is_none()
    }
}

/// One reasoner call: consistency of `base`, then entailment of each negative
/// test in order, stopping at the first violation. `negated_tests[i]` holds the
/// clauses of the negation of the i-th negative test.
pub fn check_compiled(base: &[&CompiledFormula], negated_tests: &[&CompiledFormula], num_vars: u32) -> ReasonerVerdict {
    let mut sat_checks = 1;
    if !solve(base, num_vars).0 {
        return ReasonerVerdict {
            violation: Some(Violation::Inconsistent),
            sat_checks,
        };
    }
    let mut parts: Vec<&CompiledFormula> = base.to_vec();
    for (i, neg) in negated_tests.iter().enumerate() {
        parts.push(neg);
        sat_checks += 1;
        let consistent = solve(&parts, num_vars).0;
        parts.pop();
        if !consistent {
            return ReasonerVerdict {
                violation: Some(Violation::NegativeTest(i)),
                sat_checks,
            };
        }
    }
    ReasonerVerdict {
        violation: None,
        sat_checks,
    }
}

/// Requirement check over plain formulas: `s ∪ b ∪ p` must be consistent and
/// entail no member of `n`.
pub fn check_requirements(s: &[Formula], b: &[Formula], p: &[Formula], n: &[Formula]) -> ReasonerVerdict {
    let mut table = AtomTable::new();
    let base: Vec<CompiledFormula> = s.iter().chain(b).chain(p).map(|f| table.compile(f)).collect();
    let negs: Vec<CompiledFormula> = n.iter().map(|f| table.compile(&Formula::not(f.clone()))).collect();
    let base_refs: Vec<&CompiledFormula> = base.iter().collect();
    let neg_refs: Vec<&CompiledFormula> = negs.iter().collect();
    check_compiled(&base_refs, &neg_refs, table.var_count())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallCategory {
    /// Conflict search over roughly all components that found a conflict.
    Hard,
    /// Conflict search over roughly all components that found none.
    Medium,
    /// Conflict search over a small universe (reuse check, redundancy check).
    Easy,
}

/// Conflict-search ledger of a diagnosis engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CallStats {
    pub hard_calls: u64,
    pub medium_calls: u64,
    pub easy_calls: u64,
    /// Requirement checks issued by the conflict searches above.
    pub requirement_checks: u64,
    pub sat_checks: u64,
    pub hard_time_ns: u64,
    pub medium_time_ns: u64,
    pub easy_time_ns: u64,
}

impl CallStats {
    pub fn record_call(
        &mut self,
        category: CallCategory,
        duration: Duration,
        requirement_checks: u32,
        sat_checks: u32,
    ) {
        let ns = duration.as_nanos() as u64;
        match category {
            CallCategory::Hard => {
                self.hard_calls += 1;
                self.hard_time_ns += ns;
            }
            CallCategory::Medium => {
                self.medium_calls += 1;
                self.medium_time_ns += ns;
            }
            CallCategory::Easy => {
                self.easy_calls += 1;
                self.easy_time_ns += ns;
            }
        }
        self.requirement_checks += requirement_checks as u64;
        self.sat_checks += sat_checks as u64;
    }

    pub fn total_calls(&self) -> u64 {
        self.hard_calls + self.medium_calls + self.easy_calls
    }

    /// Counter-wise difference `self - earlier`.
    pub fn since(&self, earlier: &CallStats) -> CallStats {
        CallStats {
            hard_calls: self.hard_calls - earlier.hard_calls,
            medium_calls: self.medium_calls - earlier.medium_calls,
            easy_calls: self.easy_calls - earlier.easy_calls,
            requirement_checks: self.requirement_checks - earlier.requirement_checks,
            sat_checks: self.sat_checks - earlier.sat_checks,
            hard_time_ns: self.hard_time_ns - earlier.hard_time_ns,
            medium_time_ns: self.medium_time_ns - earlier.medium_time_ns,
            easy_time_ns: self.easy_time_ns - earlier.easy_time_ns,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{to_clauses, Clause, Literal};

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn running_example() -> Vec<Formula> {
        ["A -> !B", "A -> B", "A -> !C", "B -> C", "A -> B | C"]
            .iter()
            .map(|s| f(s))
            .collect()
    }

    #[test]
    fn trivial_clause_sets() {
        assert!(is_satisfiable(&ClauseSet::default()));
        let contradiction = ClauseSet {
            clauses: vec![Clause::from([Literal::pos("A")]), Clause::from([Literal::neg("A")])],
        };
        assert!(!is_satisfiable(&contradiction));
        assert!(!is_satisfiable(&ClauseSet {
            clauses: vec![Clause::new()]
        }));
    }

    #[test]
    fn running_example_entails_not_a() {
        let mut cs = ClauseSet::default();
        for axiom in running_example() {
            cs.extend(to_clauses(&axiom));
        }
        assert!(is_satisfiable(&cs));
        cs.extend(to_clauses(&f("A")));
        assert!(!is_satisfiable(&cs));
    }

    #[test]
    fn requirement_check_examples() {
        let k = running_example();
        let n = vec![f("!A")];
        let v = check_requirements(&[k[1].clone(), k[3].clone(), k[4].clone()], &[], &[], &n);
        assert!(v.is_ok());
        assert_eq!(v.sat_checks, 2);
        let v = check_requirements(&[k[2].clone(), k[3].clone(), k[4].clone()], &[], &[], &n);
        assert_eq!(v.violation, Some(Violation::NegativeTest(0)));
        assert!(check_requirements(&[], &[], &[], &n).is_ok());
        let v = check_requirements(&[f("A"), f("!A")], &[], &[], &n);
        assert_eq!(v.violation, Some(Violation::Inconsistent));
        assert_eq!(v.sat_checks, 1);
    }

    #[test]
    fn first_violated_negative_test_is_reported() {
        let n = vec![f("C"), f("B"), f("A")];
        let v = check_requirements(&[f("A"), f("A -> B")], &[], &[], &n);
        assert_eq!(v.violation, Some(Violation::NegativeTest(1)));
        assert_eq!(v.sat_checks, 3);
    }

    #[test]
    fn solver_is_deterministic() {
        let mut cs = ClauseSet::default();
        for axiom in ["(A | B) & (C | D)", "A <-> !C", "B -> D & !A", "E | F | !A"] {
            cs.extend(to_clauses(&f(axiom)));
        }
        let first = is_satisfiable_traced(&cs);
        let second = is_satisfiable_traced(&cs);
        assert_eq!(first, second);
        assert!(first.0);
        assert!(first.1.decisions > 0);
    }

    #[test]
    fn compiled_formulas_get_disjoint_auxiliaries() {
        let mut table = AtomTable::new();
        let a = table.compile(&f("(A & B) | C"));
        let b = table.compile(&f("(A & !B) | !C"));
        let named: Vec<u32> = ["A", "B", "C"].iter().map(|n| table.get(n).unwrap()).collect();
        let aux = |c: &CompiledFormula| -> Vec<u32> {
            c.clauses
                .iter()
                .flatten()
                .map(|l| l.unsigned_abs())
                .filter(|v| !named.contains(v))
                .collect()
        };
        assert!(!aux(&a).is_empty());
        assert!(aux(&a).iter().all(|v| !aux(&b).contains(v)));
        assert_eq!(table.names(), &["A", "B", "C"]);
        // (A & B | C) & (A & !B | !C) & !A is unsatisfiable
        let not_a = table.compile(&f("!A"));
        assert!(!solve(&[&a, &b, &not_a], table.var_count()).0);
        assert!(solve(&[&a, &b], table.var_count()).0);
    }

    #[test]
    fn stats_accumulate_per_category() {
        let mut stats = CallStats::default();
        stats.record_call(CallCategory::Hard, Duration::from_nanos(10), 3, 6);
        stats.record_call(CallCategory::Easy, Duration::from_nanos(5), 1, 2);
        stats.record_call(CallCategory::Easy, Duration::from_nanos(5), 1, 2);
        assert_eq!((stats.hard_calls, stats.medium_calls, stats.easy_calls), (1, 0, 2));
        assert_eq!(stats.sat_checks, 10);
        assert_eq!(stats.easy_time_ns, 10);
        let later = {
            let mut s = stats;
            s.record_call(CallCategory::Medium, Duration::ZERO, 1, 1);
            s
        };
        assert_eq!(later.since(&stats).medium_calls, 1);
        assert_eq!(later.since(&stats).hard_calls, 0);
    }
}
