//! Paired benchmark of the stateless and the stateful engine over simulated
//! sessions with random targets.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpi::{ComponentSet, Dpi, DpiError};
use crate::generate::{random_dpi, GeneratorConfig};
use crate::query::Heuristic;
use crate::session::{run_session, Engine, Session, SessionConfig, SessionError, SimulatedOracle};

/// Random instances drawn for a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RandomDpis {
    pub count: usize,
    #[serde(default)]
    pub generator: GeneratorConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Suite {
    /// DPI documents, resolved relative to the suite file.
    #[serde(default)]
    pub dpis: Vec<PathBuf>,
    #[serde(default)]
    pub random: Option<RandomDpis>,
    pub ld_values: Vec<usize>,
    pub heuristics: Vec<Heuristic>,
    pub targets_per_scenario: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("malformed suite: {0}")]
    Suite(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Dpi { path: PathBuf, source: DpiError },
    #[error("no random instance found within the attempt budget for instance {0}")]
    Generator(usize),
    #[error("{dpi}: {source}")]
    Session { dpi: String, source: SessionError },
    #[error("engines disagree on {dpi} (ld {ld}, {heuristic}, target {target}) at iteration {iteration}:\n  hstree:    {hstree:?}\n  dynamichs: {dynamichs:?}")]
    Mismatch {
        dpi: String,
        ld: usize,
        heuristic: Heuristic,
        target: String,
        iteration: usize,
        hstree: Vec<Vec<String>>,
        dynamichs: Vec<Vec<String>>,
    },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Suite {
    pub fn from_file(path: &Path) -> Result<Suite, BenchError> {
        let text = fs::read_to_string(path).map_err(|source| BenchError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut suite: Suite = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut suite.dpis {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(suite)
    }
}

/// A named instance with its minimal diagnoses.
#[derive(Clone, Debug)]
pub struct BenchDpi {
    pub name: String,
    pub dpi: Dpi,
    pub diagnoses: Vec<ComponentSet>,
}

/// Loads the listed documents and draws the random instances.
pub fn load_instances(suite: &Suite) -> Result<Vec<BenchDpi>, BenchError> {
    let mut out = Vec::new();
    for path in &suite.dpis {
        let text = fs::read_to_string(path).map_err(|source| BenchError::Read {
            path: path.clone(),
            source,
        })?;
        let wrap = |source| BenchError::Dpi {
            path: path.clone(),
            source,
        };
        let dpi = Dpi::from_json(&text).map_err(wrap)?;
        let diagnoses = dpi.brute_force_min_diagnoses().map_err(wrap)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push(BenchDpi { name, dpi, diagnoses });
    }
    if let Some(random) = &suite.random {
        let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
        for i in 0..random.count {
            let (dpi, diagnoses) = random_dpi(&mut rng, &random.generator).ok_or(BenchError::Generator(i))?;
            out.push(BenchDpi {
                name: format!("random-{:02}", i + 1),
                dpi,
                diagnoses,
            });
        }
    }
    Ok(out)
}

/// One engine's run on one scenario and target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub dpi: String,
    pub ld: usize,
    pub heuristic: Heuristic,
    pub engine: Engine,
    pub target: String,
    pub iterations: usize,
    pub hard_calls: u64,
    pub medium_calls: u64,
    pub easy_calls: u64,
    pub sat_checks: u64,
    pub nodes_generated: u64,
    pub nodes_processed: u64,
    pub max_nodes_stored: u64,
    pub duplicates_stored: u64,
    pub prune_time_ns: u64,
    pub total_time_ns: u64,
}

impl BenchRow {
    /// The row without its timing columns.
    pub fn counts(&self) -> BenchRow {
        BenchRow {
            prune_time_ns: 0,
            total_time_ns: 0,
            ..self.clone()
        }
    }
}

/// Differences within one pair of runs, positive when the stateful engine saves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairDelta {
    pub hard_call_savings: f64,
    pub node_savings: f64,
    pub time_savings: f64,
    /// Stateful over stateless peak node storage.
    pub memory_factor: f64,
    pub duplicate_fraction: f64,
    pub prune_time_fraction: f64,
    pub fewer_hard_calls: bool,
    pub fewer_nodes: bool,
}

fn savings(base: u64, new: u64) -> f64 {
    if base == 0 {
        0.0
    } else {
        (base as f64 - new as f64) / base as f64
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl PairDelta {
    pub fn new(hstree: &BenchRow, dynamichs: &BenchRow) -> PairDelta {
        PairDelta {
            hard_call_savings: savings(hstree.hard_calls, dynamichs.hard_calls),
            node_savings: savings(hstree.nodes_processed, dynamichs.nodes_processed),
            time_savings: savings(hstree.total_time_ns, dynamichs.total_time_ns),
            memory_factor: ratio(dynamichs.max_nodes_stored, hstree.max_nodes_stored),
            duplicate_fraction: ratio(dynamichs.duplicates_stored, dynamichs.max_nodes_stored),
            prune_time_fraction: ratio(dynamichs.prune_time_ns, dynamichs.total_time_ns),
            fewer_hard_calls: dynamichs.hard_calls < hstree.hard_calls,
            fewer_nodes: dynamichs.nodes_processed < hstree.nodes_processed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Aggregate {
    pub runs: usize,
    pub median_hard_call_savings: f64,
    pub median_node_savings: f64,
    pub median_time_savings: f64,
    pub median_memory_factor: f64,
    pub median_duplicate_fraction: f64,
    pub median_prune_time_fraction: f64,
    /// Fraction of pairs where the stateful engine needs strictly fewer hard calls.
    pub hard_call_win_fraction: f64,
    pub node_win_fraction: f64,
    /// Hard-call savings on the pair where the stateless engine needed the most hard calls.
    pub hardest_case_hard_call_savings: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl Aggregate {
    /// Aggregates consecutive (hstree, dynamichs) row pairs.
    pub fn from_rows(rows: &[BenchRow]) -> Aggregate {
        let pairs: Vec<(&BenchRow, PairDelta)> = rows
            .chunks_exact(2)
            .map(|p| (&p[0], PairDelta::new(&p[0], &p[1])))
            .collect();
        if pairs.is_empty() {
            return Aggregate::default();
        }
        let n = pairs.len() as f64;
        let col = |f: fn(&PairDelta) -> f64| median(&pairs.iter().map(|(_, d)| f(d)).collect::<Vec<_>>());
        let hardest = pairs
            .iter()
            .max_by_key(|(h, _)| h.hard_calls)
            .map(|(_, d)| d.hard_call_savings)
            .unwrap_or(0.0);
        Aggregate {
            runs: pairs.len(),
            median_hard_call_savings: col(|d| d.hard_call_savings),
            median_node_savings: col(|d| d.node_savings),
            median_time_savings: col(|d| d.time_savings),
            median_memory_factor: col(|d| d.memory_factor),
            median_duplicate_fraction: col(|d| d.duplicate_fraction),
            median_prune_time_fraction: col(|d| d.prune_time_fraction),
            hard_call_win_fraction: pairs.iter().filter(|(_, d)| d.fewer_hard_calls).count() as f64 / n,
            node_win_fraction: pairs.iter().filter(|(_, d)| d.fewer_nodes).count() as f64 / n,
            hardest_case_hard_call_savings: hardest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioAggregate {
    pub dpi: String,
    pub ld: usize,
    pub heuristic: Heuristic,
    #[serde(flatten)]
    pub stats: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AggregateReport {
    pub overall: Aggregate,
    pub scenarios: Vec<ScenarioAggregate>,
}

/// Rows come in pairs: the stateless engine's run, then the stateful one's.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<BenchRow>,
}

impl Report {
    pub fn pairs(&self) -> impl Iterator<Item = (&BenchRow, &BenchRow)> {
        self.rows.chunks_exact(2).map(|p| (&p[0], &p[1]))
    }

    pub fn aggregate(&self) -> AggregateReport {
        let mut scenarios: Vec<ScenarioAggregate> = Vec::new();
        let mut start = 0;
        while start < self.rows.len() {
            let key = |r: &BenchRow| (r.dpi.clone(), r.ld, r.heuristic);
            let k = key(&self.rows[start]);
            let mut end = start;
            while end < self.rows.len() && key(&self.rows[end]) == k {
                end += 1;
            }
            scenarios.push(ScenarioAggregate {
                dpi: k.0,
                ld: k.1,
                heuristic: k.2,
                stats: Aggregate::from_rows(&self.rows[start..end]),
            });
            start = end;
        }
        AggregateReport {
            overall: Aggregate::from_rows(&self.rows),
            scenarios,
        }
    }
}

fn row(dpi: &str, ld: usize, heuristic: Heuristic, target: &str, session: &Session, time_ns: u64) -> BenchRow {
    let calls = session.calls();
    let tree = session.tree_stats();
    BenchRow {
        dpi: dpi.to_string(),
        ld,
        heuristic,
        engine: session.config().engine,
        target: target.to_string(),
        iterations: session.history().len(),
        hard_calls: calls.hard_calls,
        medium_calls: calls.medium_calls,
        easy_calls: calls.easy_calls,
        sat_checks: calls.sat_checks,
        nodes_generated: tree.nodes_generated,
        nodes_processed: tree.nodes_processed,
        max_nodes_stored: tree.max_nodes_stored,
        duplicates_stored: tree.duplicates_stored,
        prune_time_ns: tree.prune_time_ns,
        total_time_ns: time_ns,
    }
}

/// Runs both engines on one scenario and target and audits that every
/// iteration produced the same ordered diagnosis list.
pub fn run_pair(
    instance: &BenchDpi,
    ld: usize,
    heuristic: Heuristic,
    target: &ComponentSet,
    seed: u64,
) -> Result<(BenchRow, BenchRow), BenchError> {
    let target_text = instance.dpi.names(target).join(",");
    let mut sessions = Vec::with_capacity(2);
    for engine in [Engine::HsTree, Engine::DynamicHs] {
        let mut config = SessionConfig::new(instance.dpi.clone(), ld, heuristic, engine);
        config.seed = seed;
        let mut oracle = SimulatedOracle { target: target.clone() };
        let start = Instant::now();
        let session = run_session(config, &mut oracle).map_err(|source| BenchError::Session {
            dpi: instance.name.clone(),
            source,
        })?;
        let elapsed = start.elapsed().as_nanos() as u64;
        sessions.push((session, elapsed));
    }
    let (hst, dhs) = (&sessions[0].0, &sessions[1].0);
    let iterations = hst.history().len().max(dhs.history().len());
    for i in 0..iterations {
        let a = hst
            .history()
            .get(i)
            .map(|r| r.leading_diagnoses.clone())
            .unwrap_or_default();
        let b = dhs
            .history()
            .get(i)
            .map(|r| r.leading_diagnoses.clone())
            .unwrap_or_default();
        if a != b {
            return Err(BenchError::Mismatch {
                dpi: instance.name.clone(),
                ld,
                heuristic,
                target: target_text,
                iteration: i + 1,
                hstree: a,
                dynamichs: b,
            });
        }
    }
    Ok((
        row(&instance.name, ld, heuristic, &target_text, hst, sessions[0].1),
        row(&instance.name, ld, heuristic, &target_text, dhs, sessions[1].1),
    ))
}

/// Targets for one scenario: distinct minimal diagnoses while they last.
fn sample_targets(diagnoses: &[ComponentSet], n: usize, rng: &mut ChaCha8Rng) -> Vec<ComponentSet> {
    let mut out: Vec<ComponentSet> = diagnoses
        .choose_multiple(rng, n.min(diagnoses.len()))
        .cloned()
        .collect();
    while out.len() < n && !diagnoses.is_empty() {
        out.push(diagnoses.choose(rng).expect("non-empty").clone());
    }
    out
}

pub fn run_benchmark(suite: &Suite) -> Result<Report, BenchError> {
    let instances = load_instances(suite)?;
    run_instances(suite, &instances)
}

pub fn run_instances(suite: &Suite, instances: &[BenchDpi]) -> Result<Report, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed.wrapping_add(1));
    let mut report = Report::default();
    for instance in instances {
        for &ld in &suite.ld_values {
            for &heuristic in &suite.heuristics {
                for target in sample_targets(&instance.diagnoses, suite.targets_per_scenario, &mut rng) {
                    let (h, d) = run_pair(instance, ld, heuristic, &target, suite.seed)?;
                    report.rows.push(h);
                    report.rows.push(d);
                }
            }
        }
    }
    Ok(report)
}

pub const CSV_HEADER: [&str; 16] = [
    "dpi",
    "ld",
    "heuristic",
    "engine",
    "target",
    "iterations",
    "hardCalls",
    "mediumCalls",
    "easyCalls",
    "satChecks",
    "nodesGenerated",
    "nodesProcessed",
    "maxNodesStored",
    "duplicatesStored",
    "pruneTimeNs",
    "totalTimeNs",
];

pub fn write_rows(rows: &[BenchRow], path: &Path) -> Result<(), BenchError> {
    let file = fs::File::create(path).map_err(|source| BenchError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| BenchError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<BenchRow>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Writes `rows.csv` and `aggregate.json` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<(), BenchError> {
    let wrap = |source| BenchError::Write {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(wrap)?;
    write_rows(&report.rows, &dir.join("rows.csv"))?;
    let json = serde_json::to_string_pretty(&report.aggregate())?;
    fs::write(dir.join("aggregate.json"), json).map_err(wrap)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Formula;

    fn running_example() -> BenchDpi {
        let axioms = ["A -> !B", "A -> B", "A -> !C", "B -> C", "A -> B | C"];
        let dpi = Dpi::new(
            axioms
                .iter()
                .enumerate()
                .map(|(i, a)| (format!("ax{}", i + 1), Formula::parse(a).unwrap(), None))
                .collect(),
            vec![],
            vec![],
            vec![Formula::parse("!A").unwrap()],
        )
        .unwrap();
        let diagnoses = dpi.brute_force_min_diagnoses().unwrap();
        BenchDpi {
            name: "example".into(),
            dpi,
            diagnoses,
        }
    }

    fn suite(targets: usize) -> Suite {
        Suite {
            dpis: vec![],
            random: None,
            ld_values: vec![5],
            heuristics: vec![Heuristic::Ent],
            targets_per_scenario: targets,
            seed: 1,
        }
    }

    #[test]
    fn one_scenario_one_target_gives_one_pair() {
        let report = run_instances(&suite(1), &[running_example()]).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].engine, Engine::HsTree);
        assert_eq!(report.rows[1].engine, Engine::DynamicHs);
        assert_eq!(report.rows[0].iterations, report.rows[1].iterations);
        assert_eq!(report.aggregate().overall.runs, 1);
    }

    #[test]
    fn empty_suite_writes_a_header_only_file() {
        let dir = std::env::temp_dir().join(format!("seqdiag-bench-empty-{}", std::process::id()));
        let report = run_instances(&suite(1), &[]).unwrap();
        write_report(&report, &dir).unwrap();
        let text = fs::read_to_string(dir.join("rows.csv")).unwrap();
        assert_eq!(text.trim_end(), CSV_HEADER.join(","));
        assert!(read_rows(&dir.join("rows.csv")).unwrap().is_empty());
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let dir = std::env::temp_dir().join(format!("seqdiag-bench-rt-{}", std::process::id()));
        let report = run_instances(&suite(1), &[running_example()]).unwrap();
        write_report(&report, &dir).unwrap();
        assert_eq!(read_rows(&dir.join("rows.csv")).unwrap(), report.rows);
        let agg: AggregateReport =
            serde_json::from_str(&fs::read_to_string(dir.join("aggregate.json")).unwrap()).unwrap();
        assert_eq!(agg.overall.runs, 1);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn repeated_suites_agree_on_counts() {
        let a = run_instances(&suite(3), &[running_example()]).unwrap();
        let b = run_instances(&suite(3), &[running_example()]).unwrap();
        let counts = |r: &Report| r.rows.iter().map(BenchRow::counts).collect::<Vec<_>>();
        assert_eq!(counts(&a), counts(&b));
    }
}
