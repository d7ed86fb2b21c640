//! P-value vectors, their stable ordering, truth labels and rejection sets,
//! plus the two error metrics every procedure is judged by.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One hypothesis: an opaque identifier and its p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub p: f64,
}

/// A validated, nonempty list of p-values with unique identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
}

impl PValueVector {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let entries: Vec<Entry> = entries
            .into_iter()
            .map(|(id, p)| Entry { id: id.into(), p })
            .collect();
        if entries.is_empty() {
            return Err(Error::NoHypotheses);
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.id.is_empty() {
                return Err(Error::EmptyId);
            }
            if !(e.p.is_finite() && (0.0..=1.0).contains(&e.p)) {
                return Err(Error::InvalidPValue { id: e.id.clone(), value: e.p });
            }
            if index.insert(e.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self { entries, index })
    }

    /// Builds a vector with generated ids `H1`, `H2`, ...
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().enumerate().map(|(i, &p)| (format!("H{}", i + 1), p)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Always false: construction rejects empty input.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.p).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }
}

/// Permutation of input positions sorting `values` into nondecreasing order.
/// Equal values keep their input order.
pub fn stable_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // `sort_by` is stable
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Stable nondecreasing ordering of a [`PValueVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedPValues {
    source: PValueVector,
    /// `order[r]` is the input position of the hypothesis at 0-based rank `r`.
    order: Vec<usize>,
    /// 1-based rank by input position.
    rank_by_position: Vec<usize>,
    tie_groups: Vec<Range<usize>>,
}

impl OrderedPValues {
    pub fn source(&self) -> &PValueVector {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Entries in rank order.
    pub fn sorted(&self) -> impl Iterator<Item = &Entry> + '_ {
        self.order.iter().map(move |&i| &self.source.entries[i])
    }

    /// Sorted p-values, `p_(1) <= ... <= p_(s)`.
    pub fn sorted_values(&self) -> Vec<f64> {
        self.sorted().map(|e| e.p).collect()
    }

    /// Entry at 1-based rank.
    pub fn at_rank(&self, rank: usize) -> &Entry {
        &self.source.entries[self.order[rank - 1]]
    }

    /// 1-based rank of `id`.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.source.position(id).map(|i| self.rank_by_position[i])
    }

    /// 1-based rank of the entry at input position `pos`.
    pub fn rank_of_position(&self, pos: usize) -> usize {
        self.rank_by_position[pos]
    }

    /// Maximal runs of equal p-values as 0-based rank ranges, singletons included.
    pub fn tie_groups(&self) -> &[Range<usize>] {
        &self.tie_groups
    }

    /// The hypotheses at ranks `1..=count`.
    pub fn first(&self, count: usize) -> RejectionSet {
        RejectionSet::from_ids(self.order[..count].iter().map(|&i| self.source.entries[i].id.clone()))
    }
}

pub fn order_pvalues(pv: &PValueVector) -> OrderedPValues {
    let values = pv.values();
    let order = stable_order(&values);
    let mut rank_by_position = vec![0; order.len()];
    for (r, &i) in order.iter().enumerate() {
        rank_by_position[i] = r + 1;
    }
    let mut tie_groups = Vec::new();
    let mut start = 0;
    for r in 1..=order.len() {
        if r == order.len() || values[order[r]] != values[order[start]] {
            tie_groups.push(start..r);
            start = r;
        }
    }
    OrderedPValues { source: pv.clone(), order, rank_by_position, tie_groups }
}

/// Which hypotheses are true nulls. Known only in simulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthAssignment {
    true_nulls: BTreeSet<String>,
    false_nulls: BTreeSet<String>,
}

impl TruthAssignment {
    /// Labels every id in `all` as a true null unless it appears in `false_nulls`.
    pub fn from_false_nulls<'a>(
        all: impl IntoIterator<Item = &'a str>,
        false_nulls: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let all: BTreeSet<String> = all.into_iter().map(str::to_owned).collect();
        let mut f = BTreeSet::new();
        for id in false_nulls {
            if !all.contains(id) {
                return Err(Error::IdentifierMismatch(id.to_owned()));
            }
            f.insert(id.to_owned());
        }
        let true_nulls = all.difference(&f).cloned().collect();
        Ok(Self { true_nulls, false_nulls: f })
    }

    /// Labels by a per-position flag (`true` = true null).
    pub fn from_flags(pv: &PValueVector, is_null: &[bool]) -> Result<Self> {
        if is_null.len() != pv.len() {
            return Err(Error::DimensionMismatch { expected: pv.len(), found: is_null.len() });
        }
        let false_nulls = pv.ids().zip(is_null).filter(|(_, &n)| !n).map(|(id, _)| id);
        Self::from_false_nulls(pv.ids(), false_nulls)
    }

    pub fn true_nulls(&self) -> &BTreeSet<String> {
        &self.true_nulls
    }

    pub fn false_nulls(&self) -> &BTreeSet<String> {
        &self.false_nulls
    }

    pub fn is_true_null(&self, id: &str) -> Option<bool> {
        if self.true_nulls.contains(id) {
            Some(true)
        } else if self.false_nulls.contains(id) {
            Some(false)
        } else {
            None
        }
    }
}

/// The hypotheses a procedure rejects.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionSet {
    rejected: BTreeSet<String>,
}

impl RejectionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_ids<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        Self { rejected: ids.into_iter().map(Into::into).collect() }
    }

    pub fn count(&self) -> usize {
        self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejected.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.rejected.contains(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rejected.iter().map(String::as_str)
    }

    pub fn union(&self, other: &RejectionSet) -> RejectionSet {
        Self { rejected: self.rejected.union(&other.rejected).cloned().collect() }
    }

    pub fn is_subset(&self, other: &RejectionSet) -> bool {
        self.rejected.is_subset(&other.rejected)
    }
}

/// Number of rejected true nulls.
pub fn false_rejection_count(rej: &RejectionSet, truth: &TruthAssignment) -> Result<usize> {
    let mut count = 0;
    for id in rej.ids() {
        match truth.is_true_null(id) {
            Some(true) => count += 1,
            Some(false) => {}
            None => return Err(Error::IdentifierMismatch(id.to_owned())),
        }
    }
    Ok(count)
}

/// False discovery proportion; zero when nothing is rejected.
pub fn fdp(rej: &RejectionSet, truth: &TruthAssignment) -> Result<f64> {
    let false_rej = false_rejection_count(rej, truth)?;
    Ok(fdp_from_counts(false_rej, rej.count()))
}

pub(crate) fn fdp_from_counts(false_rejections: usize, rejections: usize) -> f64 {
    if rejections == 0 {
        0.0
    } else {
        false_rejections as f64 / rejections as f64
    }
}

/// Checks that every id of `rej` exists in `pv`.
pub fn check_subset(rej: &RejectionSet, pv: &PValueVector) -> Result<()> {
    let known: HashSet<&str> = pv.ids().collect();
    match rej.ids().find(|id| !known.contains(id)) {
        Some(id) => Err(Error::IdentifierMismatch(id.to_owned())),
        None => Ok(()),
    }
}
