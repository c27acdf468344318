//! Measurement selection: q-partitions of the leading diagnoses and the
//! ENT, SPL and MPS heuristics.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpi::{ComponentSet, Dpi};
use crate::formula::Formula;

/// Scores within this distance count as tied.
const SCORE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Smallest `|p(D+) − p(D−)| + p(D0)`.
    #[default]
    Ent,
    /// Smallest `||D+| − |D−|| + |D0|`.
    Spl,
    /// Most diagnoses eliminated by the better outcome, then that outcome's probability.
    Mps,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [Heuristic::Ent, Heuristic::Spl, Heuristic::Mps];

    pub fn as_str(&self) -> &'static str {
        match self {
            Heuristic::Ent => "ent",
            Heuristic::Spl => "spl",
            Heuristic::Mps => "mps",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ent" => Ok(Heuristic::Ent),
            "spl" => Ok(Heuristic::Spl),
            "mps" => Ok(Heuristic::Mps),
            other => Err(format!("unknown heuristic '{other}' (expected ent, spl or mps)")),
        }
    }
}

/// Which sentences are considered as measurement points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidatePool {
    /// Also offer `l1 -> l2` for literals over distinct atoms.
    pub implications: bool,
}

impl Default for CandidatePool {
    fn default() -> Self {
        CandidatePool { implications: true }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query selection needs at least two leading diagnoses, got {0}")]
    TooFewDiagnoses(usize),
    #[error("no candidate sentence discriminates the leading diagnoses")]
    NoDiscriminatingQuery,
}

/// Split of the leading diagnoses by how they react to a sentence. Entries
/// are indices into the leading list.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QPartition {
    pub d_plus: Vec<usize>,
    pub d_minus: Vec<usize>,
    pub d_zero: Vec<usize>,
}

impl QPartition {
    pub fn is_discriminating(&self) -> bool {
        !self.d_plus.is_empty() && !self.d_minus.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub sentence: Formula,
    /// Canonical text of `sentence`, also the tie-break key.
    pub text: String,
    pub partition: QPartition,
    pub p_pos: f64,
    pub p_neg: f64,
}

impl Query {
    pub fn new(sentence: Formula, partition: QPartition, weights: &[f64]) -> Query {
        let mass = |idx: &[usize]| idx.iter().map(|&i| weights[i]).sum::<f64>();
        let p_pos = (mass(&partition.d_plus) + 0.5 * mass(&partition.d_zero)).clamp(0.0, 1.0);
        Query {
            text: sentence.render(),
            sentence,
            partition,
            p_pos,
            p_neg: 1.0 - p_pos,
        }
    }

    fn mass(&self, idx: &[usize], weights: &[f64]) -> f64 {
        idx.iter().map(|&i| weights[i]).sum()
    }
}

/// Normalized weights of the leading diagnoses.
pub fn diagnosis_probabilities(diagnoses: &[ComponentSet], dpi: &Dpi) -> Vec<f64> {
    let raw: Vec<f64> = diagnoses.iter().map(|d| dpi.weight(d)).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / diagnoses.len() as f64; diagnoses.len()]
    }
}

/// Number of reasoner calls spent on query generation. Kept apart from the
/// diagnosis engine's ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryStats {
    pub candidates: u64,
    pub checks: u64,
}

pub fn q_partition(sentence: &Formula, diagnoses: &[ComponentSet], dpi: &Dpi, stats: &mut QueryStats) -> QPartition {
    let prepared = dpi.prepare(sentence);
    let mut part = QPartition::default();
    for (i, d) in diagnoses.iter().enumerate() {
        let remainder = dpi.complement(d);
        stats.checks += 1;
        if dpi.entails(&remainder, &prepared).0 {
            part.d_plus.push(i);
            continue;
        }
        stats.checks += 1;
        if dpi.check_with(&remainder, &prepared).is_ok() {
            part.d_zero.push(i);
        } else {
            part.d_minus.push(i);
        }
    }
    part
}

/// All pool sentences in generation order.
pub fn candidate_sentences(dpi: &Dpi, pool: CandidatePool) -> Vec<Formula> {
    let atoms = dpi.component_atoms();
    let literal = |a: &str, positive: bool| {
        let atom = Formula::atom(a);
        if positive {
            atom
        } else {
            Formula::not(atom)
        }
    };
    let mut out = Vec::new();
    for a in &atoms {
        for positive in [true, false] {
            out.push(literal(a, positive));
        }
    }
    if pool.implications {
        for a in &atoms {
            for b in atoms.iter().filter(|b| *b != a) {
                for pa in [true, false] {
                    for pb in [true, false] {
                        out.push(Formula::implies(literal(a, pa), literal(b, pb)));
                    }
                }
            }
        }
    }
    out
}

/// Discriminating candidates for the leading diagnoses, with outcome probabilities.
pub fn generate_candidates(
    diagnoses: &[ComponentSet],
    dpi: &Dpi,
    pool: CandidatePool,
    stats: &mut QueryStats,
) -> Result<Vec<Query>, QueryError> {
    if diagnoses.len() < 2 {
        return Err(QueryError::TooFewDiagnoses(diagnoses.len()));
    }
    let weights = diagnosis_probabilities(diagnoses, dpi);
    let mut out = Vec::new();
    for sentence in candidate_sentences(dpi, pool) {
        stats.candidates += 1;
        let part = q_partition(&sentence, diagnoses, dpi, stats);
        if part.is_discriminating() {
            out.push(Query::new(sentence, part, &weights));
        }
    }
    if out.is_empty() {
        return Err(QueryError::NoDiscriminatingQuery);
    }
    Ok(out)
}

/// Heuristic score of a candidate; smaller is better under [`compare_scores`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Score {
    Ent(f64),
    Spl(usize),
    /// Eliminated count and probability of the better outcome.
    Mps(usize, f64),
}

pub fn score(query: &Query, heuristic: Heuristic, weights: &[f64]) -> Score {
    let p = &query.partition;
    match heuristic {
        Heuristic::Ent => {
            let plus = query.mass(&p.d_plus, weights);
            let minus = query.mass(&p.d_minus, weights);
            let zero = query.mass(&p.d_zero, weights);
            Score::Ent((plus - minus).abs() + zero)
        }
        Heuristic::Spl => Score::Spl(p.d_plus.len().abs_diff(p.d_minus.len()) + p.d_zero.len()),
        Heuristic::Mps => {
            let positive = (p.d_minus.len(), query.p_pos);
            let negative = (p.d_plus.len(), query.p_neg);
            let better = if cmp_mps(positive, negative) == Ordering::Less {
                negative
            } else {
                positive
            };
            Score::Mps(better.0, better.1)
        }
    }
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= SCORE_EPS {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

fn cmp_mps(a: (usize, f64), b: (usize, f64)) -> Ordering {
    a.0.cmp(&b.0).then_with(|| cmp_f64(a.1, b.1))
}

/// `Less` when `a` is preferable to `b`.
pub fn compare_scores(a: Score, b: Score) -> Ordering {
    match (a, b) {
        (Score::Ent(x), Score::Ent(y)) => cmp_f64(x, y),
        (Score::Spl(x), Score::Spl(y)) => x.cmp(&y),
        (Score::Mps(n, p), Score::Mps(m, q)) => cmp_mps((m, q), (n, p)),
        _ => panic!("scores of different heuristics are incomparable"),
    }
}

/// The best candidate under `heuristic`; ties go to the smaller canonical text.
pub fn select_best<'a>(candidates: &'a [Query], heuristic: Heuristic, weights: &[f64]) -> Option<&'a Query> {
    candidates.iter().min_by(|a, b| {
        compare_scores(score(a, heuristic, weights), score(b, heuristic, weights)).then_with(|| a.text.cmp(&b.text))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        Formula::parse(s).unwrap()
    }

    fn running_example() -> Dpi {
        let axioms = ["A -> !B", "A -> B", "A -> !C", "B -> C", "A -> B | C"];
        Dpi::new(
            axioms
                .iter()
                .enumerate()
                .map(|(i, a)| (format!("ax{}", i + 1), f(a), None))
                .collect(),
            vec![],
            vec![],
            vec![f("!A")],
        )
        .unwrap()
    }

    fn leading() -> Vec<ComponentSet> {
        [[1, 3], [1, 4], [2, 3], [2, 5]]
            .iter()
            .map(|d| ComponentSet::from_indices(d))
            .collect()
    }

    fn query(plus: &[usize], minus: &[usize], zero: &[usize], weights: &[f64], text: &str) -> Query {
        Query::new(
            f(text),
            QPartition {
                d_plus: plus.to_vec(),
                d_minus: minus.to_vec(),
                d_zero: zero.to_vec(),
            },
            weights,
        )
    }

    #[test]
    fn diagnosis_weights() {
        let dpi = Dpi::new(
            vec![
                ("t1".into(), Formula::atom("A"), Some(0.4)),
                ("t2".into(), Formula::atom("B"), Some(0.1)),
            ],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        let w = diagnosis_probabilities(
            &[ComponentSet::from_indices(&[1]), ComponentSet::from_indices(&[2])],
            &dpi,
        );
        assert!((w[0] - 0.36 / 0.42).abs() < 1e-12);
        assert!((w[1] - 0.06 / 0.42).abs() < 1e-12);
        let w = diagnosis_probabilities(&leading()[..2], &running_example());
        assert_eq!(w, vec![0.5, 0.5]);
        assert_eq!(diagnosis_probabilities(&leading()[..1], &running_example()), vec![1.0]);
    }

    #[test]
    fn partition_of_the_first_measurement() {
        let dpi = running_example();
        let mut stats = QueryStats::default();
        let p = q_partition(&f("A -> C"), &leading(), &dpi, &mut stats);
        assert_eq!(p.d_plus, vec![0, 2]);
        assert_eq!(p.d_minus, vec![1, 3]);
        assert!(p.d_zero.is_empty());
        assert!(stats.checks >= 4);

        let p = q_partition(&Formula::True, &leading(), &dpi, &mut stats);
        assert_eq!(p.d_plus, vec![0, 1, 2, 3]);
        assert!(!p.is_discriminating());
    }

    #[test]
    fn pool_contains_the_first_measurement() {
        let dpi = running_example();
        let mut stats = QueryStats::default();
        let cands = generate_candidates(&leading(), &dpi, CandidatePool::default(), &mut stats).unwrap();
        assert!(cands.iter().all(|q| q.partition.is_discriminating()));
        assert!(cands.iter().all(|q| (q.p_pos + q.p_neg - 1.0).abs() < 1e-9));
        let ac = cands
            .iter()
            .find(|q| q.text == "A -> C")
            .expect("A -> C is discriminating");
        assert_eq!(ac.partition.d_minus, vec![1, 3]);
        assert_eq!(
            stats.candidates as usize,
            candidate_sentences(&dpi, CandidatePool::default()).len()
        );

        assert_eq!(
            generate_candidates(&leading()[..1], &dpi, CandidatePool::default(), &mut stats),
            Err(QueryError::TooFewDiagnoses(1))
        );
    }

    #[test]
    fn literal_pool_can_be_too_weak() {
        // remainders differ only in A -> B versus A -> C; no literal is decided by either
        let dpi = Dpi::new(
            vec![("c1".into(), f("A -> B"), None), ("c2".into(), f("A -> C"), None)],
            vec![],
            vec![],
            vec![f("A -> B & C")],
        )
        .unwrap();
        let diags = dpi.brute_force_min_diagnoses().unwrap();
        assert_eq!(diags.len(), 2);
        let mut stats = QueryStats::default();
        let literals = CandidatePool { implications: false };
        assert_eq!(
            generate_candidates(&diags, &dpi, literals, &mut stats),
            Err(QueryError::NoDiscriminatingQuery)
        );
        assert!(generate_candidates(&diags, &dpi, CandidatePool::default(), &mut stats).is_ok());
    }

    #[test]
    fn heuristic_picks() {
        let w = [0.25; 4];
        let even = query(&[0, 1], &[2, 3], &[], &w, "X");
        let skewed = query(&[0, 1, 2], &[3], &[], &w, "Y");
        assert_eq!(score(&even, Heuristic::Ent, &w), Score::Ent(0.0));
        let both = [skewed.clone(), even.clone()];
        assert_eq!(select_best(&both, Heuristic::Spl, &w).unwrap().text, "X");
        assert_eq!(select_best(&both, Heuristic::Ent, &w).unwrap().text, "X");

        // MPS: three eliminated at 0.4 beats two eliminated at 0.9
        let w = [0.1; 10];
        let mut a = query(&[0], &[1, 2, 3], &[], &w, "P");
        a.p_pos = 0.4;
        a.p_neg = 0.6;
        let mut b = query(&[0], &[1, 2], &[], &w, "Q");
        b.p_pos = 0.9;
        b.p_neg = 0.1;
        assert_eq!(score(&a, Heuristic::Mps, &w), Score::Mps(3, 0.4));
        assert_eq!(select_best(&[b, a], Heuristic::Mps, &w).unwrap().text, "P");
    }

    #[test]
    fn ties_go_to_the_smaller_text() {
        let w = [0.5, 0.5];
        let qs = [query(&[0], &[1], &[], &w, "B"), query(&[1], &[0], &[], &w, "A")];
        for h in Heuristic::ALL {
            assert_eq!(select_best(&qs, h, &w).unwrap().text, "A");
        }
    }

    #[test]
    fn heuristic_names() {
        assert_eq!("MPS".parse::<Heuristic>(), Ok(Heuristic::Mps));
        assert!("foo".parse::<Heuristic>().is_err());
        assert_eq!(serde_json::to_string(&Heuristic::Spl).unwrap(), "\"spl\"");
    }
}
