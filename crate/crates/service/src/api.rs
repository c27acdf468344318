//! Request and response documents.

use serde::{Deserialize, Serialize};

use seqdiag_core::dpi::DpiDocument;
use seqdiag_core::hstree::TreeStats;
use seqdiag_core::query::{Heuristic, QPartition, QueryStats};
use seqdiag_core::reasoner::CallStats;
use seqdiag_core::session::{Engine, IterationRecord, Outcome, Session, Status};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSession {
    pub dpi: DpiDocument,
    pub ld: usize,
    #[serde(default)]
    pub heuristic: Heuristic,
    #[serde(default)]
    pub engine: Engine,
    /// Fixed measurement sentences to ask instead of selected ones.
    #[serde(default)]
    pub script: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Answer {
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryDetails {
    #[serde(flatten)]
    pub partition: QPartition,
    pub p_pos: f64,
    pub p_neg: f64,
}

/// Session state after the latest iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionState {
    pub session_id: String,
    pub status: String,
    pub iteration: usize,
    pub leading_diagnoses: Vec<Vec<String>>,
    pub weights: Vec<f64>,
    /// Canonical text of the pending measurement.
    pub query: Option<String>,
    pub query_details: Option<QueryDetails>,
    #[serde(rename = "final")]
    pub final_diagnosis: Option<Vec<String>>,
}

impl SessionState {
    pub fn of(id: &str, session: &Session) -> SessionState {
        let dpi = session.dpi();
        let (query, query_details) = match session.status() {
            Status::AwaitingAnswer(q) => (
                Some(q.text.clone()),
                Some(QueryDetails {
                    partition: q.partition.clone(),
                    p_pos: q.p_pos,
                    p_neg: q.p_neg,
                }),
            ),
            _ => (None, None),
        };
        SessionState {
            session_id: id.to_string(),
            status: session.status().name().to_string(),
            iteration: session.history().len(),
            leading_diagnoses: session.leading().iter().map(|d| dpi.names(d)).collect(),
            weights: session.weights(),
            query,
            query_details,
            final_diagnosis: match session.status() {
                Status::Final(d) => Some(dpi.names(d)),
                _ => None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionStats {
    pub session_id: String,
    pub engine: Engine,
    pub heuristic: Heuristic,
    pub ld: usize,
    pub status: String,
    pub measurements: usize,
    pub positive_measurements: Vec<String>,
    pub negative_measurements: Vec<String>,
    pub calls: CallStats,
    pub tree: TreeStats,
    pub query_stats: QueryStats,
    pub history: Vec<IterationRecord>,
}

impl SessionStats {
    pub fn of(id: &str, session: &Session) -> SessionStats {
        let result = session.result();
        let config = session.config();
        SessionStats {
            session_id: id.to_string(),
            engine: config.engine,
            heuristic: config.heuristic,
            ld: config.ld,
            status: result.status,
            measurements: result.positive_measurements.len() + result.negative_measurements.len(),
            positive_measurements: result.positive_measurements,
            negative_measurements: result.negative_measurements,
            calls: result.calls,
            tree: result.tree,
            query_stats: result.query_stats,
            history: result.history,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
