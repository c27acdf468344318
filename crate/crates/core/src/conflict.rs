//! Minimal conflict search by recursive bisection (QuickXPlain).
//!
//! For a given universe order the search returns the preferred conflict: the
//! one whose last element comes earliest, and so on recursively. Splits put
//! the first ⌈n/2⌉ elements left and recurse right-half first.

use crate::dpi::{ComponentId, ComponentSet, Dpi};

/// Result of one conflict search together with the reasoning effort it took.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictSearch {
    pub conflict: Option<ComponentSet>,
    /// Requirement checks (reasoner calls) issued.
    pub checks: u32,
    pub sat_checks: u32,
}

struct Search<'a> {
    dpi: &'a Dpi,
    checks: u32,
    sat_checks: u32,
}

impl Search<'_> {
    fn is_conflict(&mut self, set: &[ComponentId]) -> bool {
        let verdict = self.dpi.check_ids(set);
        self.checks += 1;
        self.sat_checks += verdict.sat_checks;
        !verdict.is_ok()
    }

    fn quick_xplain(
        &mut self,
        background: &[ComponentId],
        delta_nonempty: bool,
        candidates: &[ComponentId],
    ) -> Vec<ComponentId> {
        if delta_nonempty && self.is_conflict(background) {
            return Vec::new();
        }
        if candidates.len() == 1 {
            return candidates.to_vec();
        }
        let k = candidates.len().div_ceil(2);
        let (left, right) = candidates.split_at(k);
        let mut with_left = background.to_vec();
        with_left.extend_from_slice(left);
        let right_part = self.quick_xplain(&with_left, !left.is_empty(), right);
        let mut with_right = background.to_vec();
        with_right.extend_from_slice(&right_part);
        let mut left_part = self.quick_xplain(&with_right, !right_part.is_empty(), left);
        left_part.extend(right_part);
        left_part
    }
}

/// A minimal conflict within `universe`, or `None` if `universe` is no conflict.
pub fn find_min_conflict(universe: &[ComponentId], dpi: &Dpi) -> ConflictSearch {
    let mut search = Search {
        dpi,
        checks: 0,
        sat_checks: 0,
    };
    let conflict = if !search.is_conflict(universe) {
        None
    } else if universe.is_empty() || dpi.has_empty_conflict() {
        Some(ComponentSet::empty())
    } else {
        Some(ComponentSet::new(search.quick_xplain(&[], false, universe)))
    };
    ConflictSearch {
        conflict,
        checks: search.checks,
        sat_checks: search.sat_checks,
    }
}

/// Upper bound on requirement checks for a search over `universe_len` elements
/// that returned a conflict of size `conflict_len`.
pub fn check_budget(universe_len: usize, conflict_len: usize) -> f64 {
    if conflict_len == 0 {
        return 2.0;
    }
    let (n, k) = (universe_len as f64, conflict_len as f64);
    2.0 * k * (1.0 + (n / k).log2()) + 2.0
}
