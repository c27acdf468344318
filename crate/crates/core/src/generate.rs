//! Random faulty DPIs for property suites and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpi::{ComponentSet, Dpi};
use crate::formula::Formula;

const ATOM_NAMES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GeneratorConfig {
    pub min_components: usize,
    pub max_components: usize,
    /// Number of atoms to draw from, at most 8.
    pub atoms: usize,
    /// Rejects instances with fewer minimal diagnoses.
    pub min_diagnoses: usize,
    pub min_prob: f64,
    pub max_prob: f64,
    pub max_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            min_components: 6,
            max_components: 10,
            atoms: 6,
            min_diagnoses: 3,
            min_prob: 0.01,
            max_prob: 0.3,
            max_attempts: 10_000,
        }
    }
}

fn literal(rng: &mut impl Rng, atoms: &[&str]) -> Formula {
    let a = Formula::atom(*atoms.choose(rng).expect("at least one atom"));
    if rng.gen_bool(0.5) {
        a
    } else {
        Formula::not(a)
    }
}

fn distinct_literals(rng: &mut impl Rng, atoms: &[&str], n: usize) -> Vec<Formula> {
    let picked: Vec<&&str> = atoms.choose_multiple(rng, n.min(atoms.len())).collect();
    picked
        .into_iter()
        .map(|a| {
            let a = Formula::atom(*a);
            if rng.gen_bool(0.5) {
                a
            } else {
                Formula::not(a)
            }
        })
        .collect()
}

fn component_formula(rng: &mut impl Rng, atoms: &[&str]) -> Formula {
    match rng.gen_range(0..10) {
        0..=3 => {
            let l = distinct_literals(rng, atoms, 2);
            Formula::implies(l[0].clone(), l[1].clone())
        }
        4..=5 => {
            let l = distinct_literals(rng, atoms, 3);
            Formula::implies(Formula::and(l[0].clone(), l[1].clone()), l[2].clone())
        }
        6..=7 => {
            let l = distinct_literals(rng, atoms, 3);
            Formula::implies(l[0].clone(), Formula::or(l[1].clone(), l[2].clone()))
        }
        8 => {
            let l = distinct_literals(rng, atoms, 2);
            Formula::or(l[0].clone(), l[1].clone())
        }
        _ => literal(rng, atoms),
    }
}

/// One random instance, not necessarily faulty.
pub fn random_candidate(rng: &mut impl Rng, config: &GeneratorConfig) -> Dpi {
    let atoms = &ATOM_NAMES[..config.atoms.clamp(2, ATOM_NAMES.len())];
    let n = rng.gen_range(config.min_components..=config.max_components.max(config.min_components));
    let components = (1..=n)
        .map(|i| {
            let p = rng.gen_range(config.min_prob..=config.max_prob);
            (format!("c{i}"), component_formula(rng, atoms), Some(p))
        })
        .collect();
    let background = if rng.gen_bool(0.5) {
        vec![literal(rng, atoms)]
    } else {
        vec![]
    };
    let negative = (0..rng.gen_range(1..=2)).map(|_| literal(rng, atoms)).collect();
    Dpi::new(components, background, vec![], negative).expect("generated instance is well-formed")
}

/// A faulty instance whose background alone meets all requirements and which
/// has at least `min_diagnoses` minimal diagnoses. Returns the instance and
/// its minimal diagnoses.
pub fn random_dpi(rng: &mut impl Rng, config: &GeneratorConfig) -> Option<(Dpi, Vec<ComponentSet>)> {
    for _ in 0..config.max_attempts {
        let dpi = random_candidate(rng, config);
        if dpi.has_empty_conflict() || dpi.is_diagnosis(&ComponentSet::empty()) {
            continue;
        }
        let diagnoses = dpi.brute_force_min_diagnoses().ok()?;
        if diagnoses.len() >= config.min_diagnoses {
            return Some((dpi, diagnoses));
        }
    }
    None
}
