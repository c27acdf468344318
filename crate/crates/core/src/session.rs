//! The sequential diagnosis loop: compute leading diagnoses, pick a
//! measurement, ask the oracle, add the answer, repeat until one diagnosis is left.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpi::{ComponentSet, Dpi};
use crate::dynamichs::{dynamic_hs, DhsState};
use crate::formula::Formula;
use crate::hstree::{hs_tree, Node, TreeStats};
use crate::query::{
    diagnosis_probabilities, generate_candidates, q_partition, select_best, CandidatePool, Heuristic, Query,
    QueryError, QueryStats,
};
use crate::reasoner::CallStats;

pub const DEFAULT_MAX_ITERATIONS: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    HsTree,
    #[default]
    DynamicHs,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::HsTree => "hstree",
            Engine::DynamicHs => "dynamichs",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hstree" => Ok(Engine::HsTree),
            "dynamichs" => Ok(Engine::DynamicHs),
            other => Err(format!("unknown engine '{other}' (expected hstree or dynamichs)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Positive,
    Negative,
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "pos" | "y" | "yes" => Ok(Outcome::Positive),
            "negative" | "neg" | "n" | "no" => Ok(Outcome::Negative),
            other => Err(format!("unknown outcome '{other}'")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub dpi: Dpi,
    pub ld: usize,
    pub heuristic: Heuristic,
    pub engine: Engine,
    pub seed: u64,
    pub pool: CandidatePool,
    pub max_iterations: usize,
    /// Fixed measurement sentences asked in order instead of selected ones.
    pub script: Option<Vec<Formula>>,
}

impl SessionConfig {
    pub fn new(dpi: Dpi, ld: usize, heuristic: Heuristic, engine: Engine) -> SessionConfig {
        SessionConfig {
            dpi,
            ld,
            heuristic,
            engine,
            seed: 0,
            pool: CandidatePool::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            script: None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("the instance is fault-free: all components together meet every requirement")]
    FaultFreeDpi,
    #[error("ld must be at least 2, got {0}")]
    InvalidLd(usize),
    #[error("the session is not awaiting an answer")]
    NotAwaitingAnswer,
}

/// Where a session stands after its latest iteration.
#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    AwaitingAnswer(Query),
    /// Exactly one minimal diagnosis is left.
    Final(ComponentSet),
    /// No candidate discriminates the remaining leading diagnoses.
    NoDiscriminatingQuery,
    /// The answers given so far admit no diagnosis at all.
    NoDiagnosis,
    MaxIterationsExceeded,
    /// The oracle declined to answer.
    Stopped,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::AwaitingAnswer(_) => "awaitingAnswer",
            Status::Final(_) => "final",
            Status::NoDiscriminatingQuery => "noDiscriminatingQuery",
            Status::NoDiagnosis => "noDiagnosis",
            Status::MaxIterationsExceeded => "maxIterationsExceeded",
            Status::Stopped => "stopped",
        }
    }
}

/// One iteration of the report document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationRecord {
    pub iteration: usize,
    pub leading_diagnoses: Vec<Vec<String>>,
    pub weights: Vec<f64>,
    pub query: Option<String>,
    pub outcome: Option<Outcome>,
    pub hard_calls: u64,
    pub medium_calls: u64,
    pub easy_calls: u64,
    pub sat_checks: u64,
    pub nodes_generated: u64,
    pub nodes_processed: u64,
    pub max_nodes_stored: u64,
    pub duplicates_stored: u64,
    pub prune_time_ns: u64,
    pub iter_time_ns: u64,
}

/// Partition of a previous leading list by the current instance.
pub fn assign_diags_ok_nok(leading: Vec<Node>, dpi: &Dpi) -> (Vec<Node>, Vec<Node>) {
    leading.into_iter().partition(|n| dpi.is_diagnosis(n.set()))
}

/// Appends the answered sentence to the positive or negative measurements.
pub fn add_meas(sentence: &Formula, outcome: Outcome, pacc: &mut Vec<Formula>, nacc: &mut Vec<Formula>) {
    match outcome {
        Outcome::Positive => pacc.push(sentence.clone()),
        Outcome::Negative => nacc.push(sentence.clone()),
    }
}

/// Answer a target diagnosis implies: positive iff the target's remainder,
/// with background and positive measurements, entails `sentence`.
pub fn simulated_answer(sentence: &Formula, target: &ComponentSet, dpi: &Dpi) -> Outcome {
    let prepared = dpi.prepare(sentence);
    if dpi.entails(&dpi.complement(target), &prepared).0 {
        Outcome::Positive
    } else {
        Outcome::Negative
    }
}

/// Source of measurement outcomes. `None` stops the session.
pub trait Oracle {
    fn answer(&mut self, query: &Query, dpi: &Dpi) -> Option<Outcome>;
}

/// Answers consistently with a fixed target diagnosis.
#[derive(Clone, Debug)]
pub struct SimulatedOracle {
    pub target: ComponentSet,
}

impl Oracle for SimulatedOracle {
    fn answer(&mut self, query: &Query, dpi: &Dpi) -> Option<Outcome> {
        Some(simulated_answer(&query.sentence, &self.target, dpi))
    }
}

/// Replays a fixed list of answers.
#[derive(Clone, Debug)]
pub struct ScriptedOracle {
    answers: std::vec::IntoIter<Outcome>,
}

impl ScriptedOracle {
    pub fn new(answers: Vec<Outcome>) -> ScriptedOracle {
        ScriptedOracle {
            answers: answers.into_iter(),
        }
    }
}

impl Oracle for ScriptedOracle {
    fn answer(&mut self, _query: &Query, _dpi: &Dpi) -> Option<Outcome> {
        self.answers.next()
    }
}

/// A running session, advanced one answer at a time.
#[derive(Clone, Debug)]
pub struct Session {
    config: SessionConfig,
    dpi: Dpi,
    pacc: Vec<Formula>,
    nacc: Vec<Formula>,
    dhs: Option<DhsState>,
    leading: Vec<Node>,
    status: Status,
    history: Vec<IterationRecord>,
    calls: CallStats,
    tree: TreeStats,
    query_stats: QueryStats,
    duplicate_measurements: u64,
}

impl Session {
    /// Validates the configuration and runs the first iteration.
    pub fn start(config: SessionConfig) -> Result<Session, SessionError> {
        if config.ld < 2 {
            return Err(SessionError::InvalidLd(config.ld));
        }
        let dpi = config.dpi.adjust_probabilities();
        if dpi.is_diagnosis(&ComponentSet::empty()) {
            return Err(SessionError::FaultFreeDpi);
        }
        let dhs = (config.engine == Engine::DynamicHs).then(|| DhsState::new(&dpi));
        let mut session = Session {
            config,
            dpi,
            pacc: Vec::new(),
            nacc: Vec::new(),
            dhs,
            leading: Vec::new(),
            status: Status::Stopped,
            history: Vec::new(),
            calls: CallStats::default(),
            tree: TreeStats::default(),
            query_stats: QueryStats::default(),
            duplicate_measurements: 0,
        };
        session.iterate(Vec::new(), Vec::new());
        Ok(session)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    /// The instance including all measurements so far.
    pub fn dpi(&self) -> &Dpi {
        &self.dpi
    }

    pub fn leading(&self) -> Vec<ComponentSet> {
        self.leading.iter().map(|n| n.set().clone()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        match self.leading.len() {
            0 => Vec::new(),
            _ => diagnosis_probabilities(&self.leading(), &self.dpi),
        }
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    pub fn positive_measurements(&self) -> &[Formula] {
        &self.pacc
    }

    pub fn negative_measurements(&self) -> &[Formula] {
        &self.nacc
    }

    pub fn calls(&self) -> &CallStats {
        &self.calls
    }

    pub fn tree_stats(&self) -> &TreeStats {
        &self.tree
    }

    pub fn query_stats(&self) -> &QueryStats {
        &self.query_stats
    }

    pub fn duplicate_measurements(&self) -> u64 {
        self.duplicate_measurements
    }

    pub fn engine_state(&self) -> Option<&DhsState> {
        self.dhs.as_ref()
    }

    pub fn is_awaiting_answer(&self) -> bool {
        matches!(self.status, Status::AwaitingAnswer(_))
    }

    /// Adds the answer to the pending query and runs the next iteration.
    pub fn answer(&mut self, outcome: Outcome) -> Result<(), SessionError> {
        let Status::AwaitingAnswer(query) = &self.status else {
            return Err(SessionError::NotAwaitingAnswer);
        };
        let sentence = query.sentence.clone();
        if self.pacc.contains(&sentence) || self.nacc.contains(&sentence) {
            self.duplicate_measurements += 1;
        }
        add_meas(&sentence, outcome, &mut self.pacc, &mut self.nacc);
        self.dpi = match outcome {
            Outcome::Positive => self.dpi.with_positive_test(sentence),
            Outcome::Negative => self.dpi.with_negative_test(sentence),
        };
        if let Some(last) = self.history.last_mut() {
            last.outcome = Some(outcome);
        }
        let previous = std::mem::take(&mut self.leading);
        let (ok, nok) = match self.config.engine {
            Engine::DynamicHs => assign_diags_ok_nok(previous, &self.dpi),
            Engine::HsTree => (Vec::new(), Vec::new()),
        };
        self.iterate(ok, nok);
        Ok(())
    }

    /// Ends the session without further answers.
    pub fn stop(&mut self) {
        if self.is_awaiting_answer() {
            self.status = Status::Stopped;
        }
    }

    fn iterate(&mut self, ok: Vec<Node>, nok: Vec<Node>) {
        let start = Instant::now();
        let calls_before = self.calls;
        let mut tree = TreeStats::default();
        self.leading = match self.dhs.as_mut() {
            Some(state) => dynamic_hs(&self.dpi, self.config.ld, ok, nok, state, &mut self.calls, &mut tree),
            None => hs_tree(&self.dpi, self.config.ld, &mut self.calls, &mut tree),
        };
        self.tree.absorb(&tree);
        let iteration = self.history.len() + 1;
        let leading = self.leading();

        self.status = if leading.is_empty() {
            Status::NoDiagnosis
        } else if leading.len() == 1 {
            Status::Final(leading[0].clone())
        } else if iteration > self.config.max_iterations {
            Status::MaxIterationsExceeded
        } else {
            self.next_query(&leading, iteration)
        };

        let delta = self.calls.since(&calls_before);
        self.history.push(IterationRecord {
            iteration,
            leading_diagnoses: leading.iter().map(|d| self.dpi.names(d)).collect(),
            weights: self.weights(),
            query: match &self.status {
                Status::AwaitingAnswer(q) => Some(q.text.clone()),
                _ => None,
            },
            outcome: None,
            hard_calls: delta.hard_calls,
            medium_calls: delta.medium_calls,
            easy_calls: delta.easy_calls,
            sat_checks: delta.sat_checks,
            nodes_generated: tree.nodes_generated,
            nodes_processed: tree.nodes_processed,
            max_nodes_stored: tree.max_nodes_stored,
            duplicates_stored: tree.duplicates_stored,
            prune_time_ns: tree.prune_time_ns,
            iter_time_ns: start.elapsed().as_nanos() as u64,
        });
    }

    fn next_query(&mut self, leading: &[ComponentSet], iteration: usize) -> Status {
        if let Some(script) = &self.config.script {
            return match script.get(iteration - 1) {
                Some(sentence) => {
                    let part = q_partition(sentence, leading, &self.dpi, &mut self.query_stats);
                    let weights = diagnosis_probabilities(leading, &self.dpi);
                    Status::AwaitingAnswer(Query::new(sentence.clone(), part, &weights))
                }
                None => Status::Stopped,
            };
        }
        match generate_candidates(leading, &self.dpi, self.config.pool, &mut self.query_stats) {
            Ok(candidates) => {
                let weights = diagnosis_probabilities(leading, &self.dpi);
                let best = select_best(&candidates, self.config.heuristic, &weights).expect("non-empty candidates");
                Status::AwaitingAnswer(best.clone())
            }
            Err(QueryError::NoDiscriminatingQuery) | Err(QueryError::TooFewDiagnoses(_)) => {
                Status::NoDiscriminatingQuery
            }
        }
    }

    pub fn result(&self) -> SessionResult {
        SessionResult {
            status: self.status.name().to_string(),
            final_diagnosis: match &self.status {
                Status::Final(d) => Some(self.dpi.names(d)),
                _ => None,
            },
            leading_diagnoses: self.leading().iter().map(|d| self.dpi.names(d)).collect(),
            iterations: self.history.len(),
            positive_measurements: self.pacc.iter().map(Formula::render).collect(),
            negative_measurements: self.nacc.iter().map(Formula::render).collect(),
            calls: self.calls,
            tree: self.tree,
            query_stats: self.query_stats,
            history: self.history.clone(),
        }
    }
}

/// Summary and report document of a finished session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionResult {
    pub status: String,
    pub final_diagnosis: Option<Vec<String>>,
    pub leading_diagnoses: Vec<Vec<String>>,
    pub iterations: usize,
    pub positive_measurements: Vec<String>,
    pub negative_measurements: Vec<String>,
    pub calls: CallStats,
    pub tree: TreeStats,
    pub query_stats: QueryStats,
    pub history: Vec<IterationRecord>,
}

/// Runs a session to completion against `oracle`.
pub fn run_session(config: SessionConfig, oracle: &mut dyn Oracle) -> Result<Session, SessionError> {
    let mut session = Session::start(config)?;
    while let Status::AwaitingAnswer(query) = session.status().clone() {
        match oracle.answer(&query, session.dpi()) {
            Some(outcome) => session.answer(outcome)?,
            None => session.stop(),
        }
    }
    Ok(session)
}
