//! Label-set pruning for Pruned Sets.

use std::collections::BTreeMap;

use crate::labels::LabelSet;

/// Class id of a label set: its taxonomy-ordered bit string.
pub fn class_id(s: LabelSet) -> String {
    s.bit_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneResult {
    /// Distinct label sets occurring more than `p` times, ordered by class id.
    pub frequent: Vec<LabelSet>,
    /// Each infrequent set mapped to its maximal frequent proper subsets,
    /// ordered by class id; empty when it has none.
    pub reassignment: BTreeMap<LabelSet, Vec<LabelSet>>,
}

impl PruneResult {
    /// The training classes that replace one row labelled `s`.
    pub fn classes_for(&self, s: LabelSet) -> &[LabelSet] {
        match self.reassignment.get(&s) {
            Some(subsets) => subsets,
            None => std::slice::from_ref(
                self.frequent
                    .iter()
                    .find(|f| **f == s)
                    .expect("every label set is either frequent or reassigned"),
            ),
        }
    }
}

pub fn prune_label_sets(rows: &[LabelSet], p: usize) -> PruneResult {
    let mut counts: BTreeMap<LabelSet, usize> = BTreeMap::new();
    for s in rows {
        *counts.entry(*s).or_default() += 1;
    }
    let mut frequent: Vec<LabelSet> = counts
        .iter()
        .filter(|(_, c)| **c > p)
        .map(|(s, _)| *s)
        .collect();
    frequent.sort_by_key(|s| class_id(*s));
    let mut reassignment = BTreeMap::new();
    for (s, c) in &counts {
        if *c > p {
            continue;
        }
        let below: Vec<LabelSet> = frequent
            .iter()
            .copied()
            .filter(|f| f.is_proper_subset(*s))
            .collect();
        let maximal: Vec<LabelSet> = below
            .iter()
            .copied()
            .filter(|f| !below.iter().any(|g| f.is_proper_subset(*g)))
            .collect();
        reassignment.insert(*s, maximal);
    }
    PruneResult {
        frequent,
        reassignment,
    }
}
