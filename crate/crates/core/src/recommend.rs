//! Interval-based candidate selection.
//!
//! Candidates are ranked by predicted probability. On the labelled training
//! pool we find the contiguous rank range with the best empirical response
//! rate, then carry it over to the candidate pool by percentile.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::model::TrainedModel;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub id: String,
    pub probability: f64,
    pub label: Option<bool>,
}

/// Entries by descending probability; equal probabilities by ascending id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedList {
    entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn new(mut entries: Vec<RankedEntry>) -> Result<Self> {
        if entries.iter().any(|e| e.probability.is_nan()) {
            return Err(Error::Contract("NaN probability in ranking".into()));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Contract(format!("duplicate candidate id {:?}", e.id)));
            }
        }
        entries.sort_by(|a, b| b.probability.total_cmp(&a.probability).then_with(|| a.id.cmp(&b.id)));
        Ok(RankedList { entries })
    }

    pub fn from_scores(ids: &[String], probabilities: &[f64], labels: Option<&[bool]>) -> Result<Self> {
        if ids.len() != probabilities.len() || labels.is_some_and(|l| l.len() != ids.len()) {
            return Err(Error::Contract("ranking inputs differ in length".into()));
        }
        Self::new(
            ids.iter()
                .zip(probabilities)
                .enumerate()
                .map(|(i, (id, &p))| RankedEntry {
                    id: id.clone(),
                    probability: p,
                    label: labels.map(|l| l[i]),
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    /// Labels in rank order; errors if any entry is unlabelled.
    pub fn labels(&self) -> Result<Vec<bool>> {
        self.entries
            .iter()
            .map(|e| e.label.ok_or_else(|| Error::Contract(format!("candidate {} has no label", e.id))))
            .collect()
    }

    /// 1-indexed inclusive slice.
    pub fn slice_ids(&self, i: usize, j: usize) -> Vec<String> {
        self.entries[i - 1..j].iter().map(|e| e.id.clone()).collect()
    }
}

pub fn rank_candidates(model: &TrainedModel, table: &FeatureTable) -> Result<RankedList> {
    let probs = model.predict_table(table)?;
    let ids: Vec<String> = table.rows.iter().map(|r| r.user_id.clone()).collect();
    let labels: Option<Vec<bool>> = table.rows.iter().map(|r| r.label).collect();
    RankedList::from_scores(&ids, &probs, labels.as_deref())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub min_fraction: f64,
    pub min_length: usize,
    pub top_exclusion_fraction: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            min_fraction: 0.05,
            min_length: 1,
            top_exclusion_fraction: 0.05,
        }
    }
}

/// `ceil(f * n)` with a little slack for values like `0.07 * 100`.
fn ceil_fraction(f: f64, n: usize) -> usize {
    (f * n as f64 - 1e-9).ceil().max(0.0) as usize
}

impl Constraints {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_fraction) || !(0.0..=1.0).contains(&self.top_exclusion_fraction) {
            return Err(Error::Constraint("fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Effective minimum interval length for a list of `n`.
    pub fn min_len(&self, n: usize) -> usize {
        ceil_fraction(self.min_fraction, n).max(self.min_length).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainInterval {
    pub i: usize,
    pub j: usize,
    pub positives: usize,
}

impl TrainInterval {
    pub fn len(&self) -> usize {
        self.j + 1 - self.i
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rate(&self) -> f64 {
        self.positives as f64 / self.len() as f64
    }

    /// Total order used for selection: higher rate, then smaller `i`, then
    /// longer. `Greater` means preferred.
    pub fn preference(&self, other: &TrainInterval) -> Ordering {
        let lhs = self.positives as u128 * other.len() as u128;
        let rhs = other.positives as u128 * self.len() as u128;
        lhs.cmp(&rhs)
            .then_with(|| other.i.cmp(&self.i))
            .then_with(|| self.len().cmp(&other.len()))
    }
}

const CHUNK: usize = 64;

/// Exhaustive search over rank intervals of length at least the effective
/// minimum, using prefix sums and exact integer rate comparison.
pub fn select_interval(labels: &[bool], constraints: &Constraints) -> Result<TrainInterval> {
    constraints.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::Constraint("cannot select from an empty list".into()));
    }
    let l = constraints.min_len(n);
    if l > n {
        return Err(Error::Constraint(format!("minimum interval length {l} exceeds list size {n}")));
    }
    let top = ceil_fraction(constraints.top_exclusion_fraction, n);
    let mut prefix = vec![0usize; n + 1];
    for (k, &y) in labels.iter().enumerate() {
        prefix[k + 1] = prefix[k] + y as usize;
    }
    let starts = n - l + 1;
    let chunks = starts.div_ceil(CHUNK);
    let best = par::map_range(chunks, |c| {
        let mut best: Option<TrainInterval> = None;
        for i in (c * CHUNK + 1)..=((c + 1) * CHUNK).min(starts) {
            for j in (i + l - 1)..=n {
                if j <= top && j + 1 - i < l {
                    continue;
                }
                let cand = TrainInterval {
                    i,
                    j,
                    positives: prefix[j] - prefix[i - 1],
                };
                if best.is_none_or(|b| cand.preference(&b) == Ordering::Greater) {
                    best = Some(cand);
                }
            }
        }
        best
    });
    best.into_iter()
        .flatten()
        .reduce(|a, b| if b.preference(&a) == Ordering::Greater { b } else { a })
        .ok_or_else(|| Error::Constraint("no admissible interval".into()))
}

pub fn select_interval_train(ranked: &RankedList, constraints: &Constraints) -> Result<TrainInterval> {
    select_interval(&ranked.labels()?, constraints)
}

fn round_half_up_ratio(num: usize, den: usize) -> usize {
    (2 * num + den) / (2 * den)
}

/// Percentile mapping of a 1-indexed interval on `n` onto a list of `m`.
pub fn map_interval(i_r: usize, j_r: usize, n: usize, m: usize) -> (usize, usize) {
    let i_s = round_half_up_ratio(i_r * m, n).clamp(1, m);
    let j_s = round_half_up_ratio(j_r * m, n).clamp(1, m);
    (i_s.min(j_s), j_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSelection {
    pub train_interval: [usize; 2],
    pub train_rate: f64,
    pub test_interval: [usize; 2],
    pub selected_ids: Vec<String>,
    pub constraints: Constraints,
    pub train_size: usize,
    pub candidate_size: usize,
}

impl IntervalSelection {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Mapped interval on `m` candidates, grown if rounding left it shorter than
/// `ceil(min_fraction * m)`: first downward, then upward once the bottom is
/// reached.
pub fn mapped_with_floor(t: &TrainInterval, n: usize, m: usize, constraints: &Constraints) -> (usize, usize) {
    let (mut i_s, mut j_s) = map_interval(t.i, t.j, n, m);
    let need = ceil_fraction(constraints.min_fraction, m).clamp(1, m);
    if j_s + 1 - i_s < need {
        j_s = (i_s + need - 1).min(m);
        i_s = j_s + 1 - need;
    }
    (i_s, j_s)
}

pub fn recommend_ranked(
    train: &RankedList,
    candidates: &RankedList,
    constraints: &Constraints,
) -> Result<IntervalSelection> {
    if train.is_empty() || candidates.is_empty() {
        return Err(Error::Constraint("training and candidate sets must be non-empty".into()));
    }
    let t = select_interval_train(train, constraints)?;
    let (n, m) = (train.len(), candidates.len());
    let (i_s, j_s) = mapped_with_floor(&t, n, m, constraints);
    Ok(IntervalSelection {
        train_interval: [t.i, t.j],
        train_rate: t.rate(),
        test_interval: [i_s, j_s],
        selected_ids: candidates.slice_ids(i_s, j_s),
        constraints: *constraints,
        train_size: n,
        candidate_size: m,
    })
}

pub fn recommend(
    model: &TrainedModel,
    train: &FeatureTable,
    candidates: &FeatureTable,
    constraints: &Constraints,
) -> Result<IntervalSelection> {
    recommend_ranked(&rank_candidates(model, train)?, &rank_candidates(model, candidates)?, constraints)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySelection {
    pub selected_ids: Vec<String>,
    pub empty: bool,
}

pub const BINARY_THRESHOLD: f64 = 0.5;

pub fn baseline_binary(ranked: &RankedList) -> BinarySelection {
    let selected_ids: Vec<String> = ranked
        .entries()
        .iter()
        .filter(|e| e.probability >= BINARY_THRESHOLD)
        .map(|e| e.id.clone())
        .collect();
    BinarySelection {
        empty: selected_ids.is_empty(),
        selected_ids,
    }
}

pub fn baseline_topk(ranked: &RankedList, k: usize) -> Result<Vec<String>> {
    if k < 1 || k > ranked.len() {
        return Err(Error::Contract(format!("k = {k} outside 1..={}", ranked.len())));
    }
    Ok(ranked.slice_ids(1, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionEvaluation {
    pub rate: f64,
    pub recall: f64,
    pub selected: usize,
    pub responders_selected: usize,
    pub total_responders: usize,
    pub empty_selection: bool,
}

pub fn evaluate_selection(selected: &[String], labels: &HashMap<String, bool>) -> Result<SelectionEvaluation> {
    let mut hits = 0;
    for id in selected {
        match labels.get(id) {
            Some(&l) => hits += l as usize,
            None => return Err(Error::Contract(format!("unknown candidate {id:?}"))),
        }
    }
    let total = labels.values().filter(|&&l| l).count();
    Ok(SelectionEvaluation {
        rate: if selected.is_empty() { 0.0 } else { hits as f64 / selected.len() as f64 },
        recall: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
        selected: selected.len(),
        responders_selected: hits,
        total_responders: total,
        empty_selection: selected.is_empty(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: f64,
    pub interval: [usize; 2],
    pub rate: f64,
    pub recall: f64,
}

/// For each size fraction, the best interval covering at least that share of
/// the ranked labels, with its rate and recall.
pub fn interval_sweep(labels: &[bool], sizes: &[f64]) -> Result<Vec<SweepRow>> {
    let total = labels.iter().filter(|&&l| l).count();
    sizes
        .iter()
        .map(|&size| {
            let c = Constraints {
                min_fraction: size,
                min_length: 1,
                top_exclusion_fraction: 0.0,
            };
            let t = select_interval(labels, &c)?;
            Ok(SweepRow {
                size,
                interval: [t.i, t.j],
                rate: t.rate(),
                recall: if total == 0 { 0.0 } else { t.positives as f64 / total as f64 },
            })
        })
        .collect()
}
