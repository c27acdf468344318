//! Random sequential sessions: at every iteration the stateful engine's
//! output must equal a fresh stateless search and the brute-force ranking.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqdiag_core::dpi::{ComponentSet, Dpi};
use seqdiag_core::dynamichs::{dynamic_hs, DhsState};
use seqdiag_core::generate::{random_dpi, GeneratorConfig};
use seqdiag_core::hstree::{hs_tree, set_priority_cmp, Node, TreeStats};
use seqdiag_core::query::{diagnosis_probabilities, generate_candidates, select_best, CandidatePool, Heuristic};
use seqdiag_core::reasoner::CallStats;
use seqdiag_core::session::{assign_diags_ok_nok, simulated_answer, Outcome};

const SESSIONS: usize = 100;

fn top_ld(dpi: &Dpi, ld: usize) -> Vec<ComponentSet> {
    let mut all = dpi.brute_force_min_diagnoses().unwrap();
    all.sort_by(|a, b| set_priority_cmp(dpi, a, b));
    all.truncate(ld);
    all
}

fn sets(nodes: &[Node]) -> Vec<ComponentSet> {
    nodes.iter().map(|n| n.set().clone()).collect()
}

struct Tally {
    iterations: usize,
    prunes: u64,
    quick_witnesses: u64,
    replacements: u64,
}

fn run(seed: u64, heuristic: Heuristic, tally: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dpi0, diagnoses) = random_dpi(&mut rng, &GeneratorConfig::default()).expect("instance");
    let target = diagnoses.choose(&mut rng).unwrap().clone();
    let ld = rng.gen_range(2..=6);

    let mut dpi = dpi0.adjust_probabilities();
    let mut state = DhsState::new(&dpi);
    state.enable_audit();
    let (mut ok, mut nok) = (Vec::new(), Vec::new());
    for iteration in 1..=50 {
        let ctx = format!("seed {seed}, ld {ld}, {heuristic}, target {target}, iteration {iteration}");
        let dhs = dynamic_hs(
            &dpi,
            ld,
            ok,
            nok,
            &mut state,
            &mut CallStats::default(),
            &mut TreeStats::default(),
        );
        let fresh = hs_tree(&dpi, ld, &mut CallStats::default(), &mut TreeStats::default());
        assert_eq!(sets(&dhs), sets(&fresh), "engines disagree: {ctx}");
        assert_eq!(sets(&dhs), top_ld(&dpi, ld), "brute force disagrees: {ctx}");
        assert!(
            dpi.brute_force_min_diagnoses().unwrap().contains(&target),
            "target lost: {ctx}"
        );
        let audit = state.audit().unwrap();
        assert!(audit.violations.is_empty(), "{ctx}: {:?}", audit.violations);
        tally.iterations += 1;

        let leading = sets(&dhs);
        if leading.len() <= 1 {
            assert_eq!(leading, vec![target.clone()], "{ctx}");
            break;
        }
        let mut qs = Default::default();
        let candidates = generate_candidates(&leading, &dpi, CandidatePool::default(), &mut qs).expect(&ctx);
        let weights = diagnosis_probabilities(&leading, &dpi);
        let query = select_best(&candidates, heuristic, &weights).unwrap();
        let outcome = simulated_answer(&query.sentence, &target, &dpi);
        dpi = match outcome {
            Outcome::Positive => dpi.with_positive_test(query.sentence.clone()),
            Outcome::Negative => dpi.with_negative_test(query.sentence.clone()),
        };
        let (o, n) = assign_diags_ok_nok(dhs, &dpi);
        assert!(!o.is_empty() && !n.is_empty(), "query was not discriminating: {ctx}");
        (ok, nok) = (o, n);
    }
    let audit = state.audit().unwrap();
    tally.prunes += audit.prunes;
    tally.quick_witnesses += audit.quick_witnesses;
    tally.replacements += audit.replacements;
}

#[test]
fn stateful_engine_matches_fresh_search_on_random_sessions() {
    let mut tally = Tally {
        iterations: 0,
        prunes: 0,
        quick_witnesses: 0,
        replacements: 0,
    };
    for i in 0..SESSIONS {
        run(1000 + i as u64, Heuristic::ALL[i % 3], &mut tally);
    }
    assert!(tally.iterations >= 2 * SESSIONS);
    // the suite must actually exercise pruning and the quick check
    assert!(tally.prunes > 0 && tally.quick_witnesses > 0 && tally.replacements > 0);
    eprintln!(
        "{SESSIONS} sessions, {} iterations, {} prunes, {} quick witnesses, {} replacements",
        tally.iterations, tally.prunes, tally.quick_witnesses, tally.replacements
    );
}
