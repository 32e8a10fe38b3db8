//! Constraint auditing and repair over a set of predictions.
//!
//! A *violation* is an unordered prediction pair whose active gate finds
//! no matching rule: for `ts`/`to` the predicted pair is outside the set
//! (the conventional diagonal means same-relation pairs never violate),
//! for `tso` neither orientation is in the set, and for `cs`/`co` the two
//! predictions are the same relation but that relation is not in the set
//! (unequal predictions never violate a cardinality set). Pairs where
//! either side predicts the no-relation label are exempt, as is anything
//! gated off by the gold triples.
//!
//! Repair reassigns predicted relations to remove violations while giving
//! up as little log-probability as possible. Instances are grouped into
//! connected components by shared entities; small groups get an exact
//! branch-and-bound search (maximize Σ log p subject to zero violations),
//! larger ones a greedy pass that repeatedly fixes the cheapest violating
//! instance. Groups admitting no clean assignment fall back to argmax and
//! are flagged.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::indicators::{indicators_with, CoReading, IndicatorFlags};
use crate::kb::Triple;
use crate::loss::ProbVec;
use crate::mining::{ConstraintSets, SetKind};

/// One prediction: gold triple (entities; the relation slot is whatever
/// label information is available), output distribution, and the predicted
/// relation — argmax unless repaired.
#[derive(Debug, Clone)]
pub struct PredItem {
    pub id: String,
    pub gold: Triple,
    pub probs: ProbVec,
    pub predicted: usize,
}

#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub items: Vec<PredItem>,
}

impl PredictionSet {
    /// Builds items with argmax predictions.
    pub fn from_probs(entries: Vec<(String, Triple, ProbVec)>) -> Self {
        let items = entries
            .into_iter()
            .map(|(id, gold, probs)| {
                let predicted = probs.argmax();
                PredItem {
                    id,
                    gold,
                    probs,
                    predicted,
                }
            })
            .collect();
        PredictionSet { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Per-set counts of violating pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationReport {
    pub per_set: BTreeMap<SetKind, usize>,
    pub total: usize,
}

/// Which sets the pair `(pred_m, pred_n)` violates under `flags`. The
/// caller has already excluded no-relation predictions.
pub(crate) fn violated_kinds(
    sets: &ConstraintSets,
    flags: IndicatorFlags,
    pred_m: usize,
    pred_n: usize,
) -> [bool; 5] {
    [
        flags.ts && !sets.contains_ts(pred_m, pred_n),
        flags.to && !sets.contains_to(pred_m, pred_n),
        flags.tso && !sets.contains_tso(pred_m, pred_n) && !sets.contains_tso(pred_n, pred_m),
        flags.cs && pred_m == pred_n && !sets.contains_cs(pred_m),
        flags.co && pred_m == pred_n && !sets.contains_co(pred_m),
    ]
}

fn is_na(sets: &ConstraintSets, rel: usize) -> bool {
    sets.na_index() == Some(rel)
}

/// Counts violating unordered pairs per set under the default symmetric
/// `co` gate reading.
pub fn count_violations(preds: &PredictionSet, sets: &ConstraintSets) -> ViolationReport {
    count_violations_with(preds, sets, CoReading::Symmetric)
}

pub fn count_violations_with(
    preds: &PredictionSet,
    sets: &ConstraintSets,
    co_reading: CoReading,
) -> ViolationReport {
    let mut counts = [0usize; 5];
    let items = &preds.items;
    for m in 0..items.len() {
        if is_na(sets, items[m].predicted) {
            continue;
        }
        for n in (m + 1)..items.len() {
            if is_na(sets, items[n].predicted) {
                continue;
            }
            let flags = indicators_with(&items[m].gold, &items[n].gold, sets.na_index(), co_reading);
            if !flags.any() {
                continue;
            }
            let v = violated_kinds(sets, flags, items[m].predicted, items[n].predicted);
            for (slot, &hit) in v.iter().enumerate() {
                counts[slot] += usize::from(hit);
            }
        }
    }
    let mut per_set = BTreeMap::new();
    let mut total = 0;
    for (slot, kind) in SetKind::ALL.into_iter().enumerate() {
        per_set.insert(kind, counts[slot]);
        total += counts[slot];
    }
    ViolationReport { per_set, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairMethod {
    Exact,
    Greedy,
}

/// Outcome for one connected group of instances.
#[derive(Debug, Clone)]
pub struct GroupReport {
    /// Indices into the prediction set, ascending.
    pub members: Vec<usize>,
    pub method: RepairMethod,
    /// False when no zero-violation assignment exists (exact groups fall
    /// back to argmax) or greedy got stuck with violations left.
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub predictions: PredictionSet,
    pub groups: Vec<GroupReport>,
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components of the entity-sharing graph, each ascending,
/// ordered by first member.
fn entity_groups(items: &[PredItem]) -> Vec<Vec<usize>> {
    let mut dsu = Dsu::new(items.len());
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        for ent in [item.gold.subj.as_str(), item.gold.obj.as_str()] {
            match seen.get(ent) {
                Some(&first) => dsu.union(first, i),
                None => {
                    seen.insert(ent, i);
                }
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..items.len() {
        let root = dsu.find(i);
        by_root.entry(root).or_default().push(i);
    }
    by_root.into_values().collect()
}

struct GroupProblem<'a> {
    items: Vec<&'a PredItem>,
    /// Gate flags per unordered member pair `(a, b)`, `a < b`.
    flags: Vec<Vec<IndicatorFlags>>,
    /// `log_p[i][r]`, `-inf` where the model gave exactly zero mass.
    log_p: Vec<Vec<f64>>,
    na: Option<usize>,
}

impl<'a> GroupProblem<'a> {
    fn new(items: Vec<&'a PredItem>, sets: &ConstraintSets, co_reading: CoReading) -> Self {
        let k = items.len();
        let mut flags = vec![vec![IndicatorFlags::default(); k]; k];
        for a in 0..k {
            for b in (a + 1)..k {
                flags[a][b] =
                    indicators_with(&items[a].gold, &items[b].gold, sets.na_index(), co_reading);
            }
        }
        let log_p = items
            .iter()
            .map(|item| {
                item.probs
                    .iter()
                    .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                    .collect()
            })
            .collect();
        GroupProblem {
            items,
            flags,
            log_p,
            na: sets.na_index(),
        }
    }

    /// Whether assigning `rel_a`/`rel_b` to members `a < b` violates any set.
    fn pair_clean(&self, sets: &ConstraintSets, a: usize, b: usize, rel_a: usize, rel_b: usize) -> bool {
        if self.na == Some(rel_a) || self.na == Some(rel_b) {
            return true;
        }
        let flags = self.flags[a][b];
        if !flags.any() {
            return true;
        }
        !violated_kinds(sets, flags, rel_a, rel_b).iter().any(|&v| v)
    }

    fn violations_of(&self, sets: &ConstraintSets, assignment: &[usize]) -> usize {
        let k = assignment.len();
        let mut count = 0;
        for a in 0..k {
            for b in (a + 1)..k {
                if !self.pair_clean(sets, a, b, assignment[a], assignment[b]) {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Depth-first branch and bound: maximize Σ log p over assignments with no
/// violated pair. Candidates are tried in descending probability (ties to
/// the lower index), so the first completed leaf is already a good bound.
fn exact_search(problem: &GroupProblem, sets: &ConstraintSets) -> Option<Vec<usize>> {
    let k = problem.items.len();
    let n_rel = problem.log_p[0].len();
    let candidates: Vec<Vec<usize>> = (0..k)
        .map(|i| {
            let mut order: Vec<usize> = (0..n_rel).collect();
            order.sort_by(|&a, &b| {
                problem.log_p[i][b]
                    .partial_cmp(&problem.log_p[i][a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            order
        })
        .collect();
    // Optimistic completion bound from each depth.
    let mut suffix_best = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix_best[i] = suffix_best[i + 1] + problem.log_p[i][candidates[i][0]];
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut assignment = vec![0usize; k];
    fn dfs(
        depth: usize,
        score: f64,
        problem: &GroupProblem,
        sets: &ConstraintSets,
        candidates: &[Vec<usize>],
        suffix_best: &[f64],
        assignment: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if depth == assignment.len() {
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                *best = Some((score, assignment.clone()));
            }
            return;
        }
        for &rel in &candidates[depth] {
            let next = score + problem.log_p[depth][rel];
            if let Some((bound, _)) = best {
                // Candidates are sorted, so once the optimistic bound falls
                // below the incumbent nothing later at this depth can win.
                if next + suffix_best[depth + 1] <= *bound {
                    break;
                }
            }
            if (0..depth).all(|prev| problem.pair_clean(sets, prev, depth, assignment[prev], rel)) {
                assignment[depth] = rel;
                dfs(
                    depth + 1,
                    next,
                    problem,
                    sets,
                    candidates,
                    suffix_best,
                    assignment,
                    best,
                );
            }
        }
    }
    dfs(
        0,
        0.0,
        problem,
        sets,
        &candidates,
        &suffix_best,
        &mut assignment,
        &mut best,
    );
    best.map(|(_, a)| a)
}

/// Iteratively reassign the violating instance whose cheapest clean
/// alternative costs the least log-probability. Stops when clean or stuck;
/// the violation total never increases.
fn greedy_repair(problem: &GroupProblem, sets: &ConstraintSets) -> (Vec<usize>, bool) {
    let k = problem.items.len();
    let n_rel = problem.log_p[0].len();
    let mut assignment: Vec<usize> = problem.items.iter().map(|it| it.predicted).collect();
    loop {
        let mut involved = vec![false; k];
        let mut any = false;
        for a in 0..k {
            for b in (a + 1)..k {
                if !problem.pair_clean(sets, a, b, assignment[a], assignment[b]) {
                    involved[a] = true;
                    involved[b] = true;
                    any = true;
                }
            }
        }
        if !any {
            return (assignment, true);
        }
        // (cost, id, rel, member): pick the cheapest clean switch.
        let mut choice: Option<(f64, &str, usize, usize)> = None;
        for i in 0..k {
            if !involved[i] {
                continue;
            }
            for rel in 0..n_rel {
                if rel == assignment[i] {
                    continue;
                }
                let clean = (0..k).filter(|&j| j != i).all(|j| {
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    let (ra, rb) = if i < j { (rel, assignment[j]) } else { (assignment[j], rel) };
                    problem.pair_clean(sets, a, b, ra, rb)
                });
                if !clean {
                    continue;
                }
                let cost = problem.log_p[i][assignment[i]] - problem.log_p[i][rel];
                let id = problem.items[i].id.as_str();
                let better = match &choice {
                    None => true,
                    Some((c, cid, crel, _)) => {
                        (cost, id, rel) < (*c, *cid, *crel)
                    }
                };
                if better {
                    choice = Some((cost, id, rel, i));
                }
            }
        }
        match choice {
            Some((_, _, rel, i)) => assignment[i] = rel,
            // No instance has a clean alternative; leave the rest standing.
            None => return (assignment, false),
        }
    }
}

/// Repairs predictions group by group. Groups of at most `group_limit`
/// instances are solved exactly; larger groups greedily. Returns the
/// repaired set plus what happened to each group.
pub fn repair_predictions(
    preds: &PredictionSet,
    sets: &ConstraintSets,
    group_limit: usize,
) -> RepairOutcome {
    repair_predictions_with(preds, sets, group_limit, CoReading::Symmetric)
}

pub fn repair_predictions_with(
    preds: &PredictionSet,
    sets: &ConstraintSets,
    group_limit: usize,
    co_reading: CoReading,
) -> RepairOutcome {
    let groups = entity_groups(&preds.items);
    let solved: Vec<(Vec<usize>, RepairMethod, bool, Vec<usize>)> = groups
        .into_par_iter()
        .map(|members| {
            let items: Vec<&PredItem> = members.iter().map(|&i| &preds.items[i]).collect();
            if members.len() == 1 {
                let current = vec![items[0].predicted];
                return (members, RepairMethod::Exact, true, current);
            }
            let problem = GroupProblem::new(items, sets, co_reading);
            if members.len() <= group_limit {
                match exact_search(&problem, sets) {
                    Some(assignment) => (members, RepairMethod::Exact, true, assignment),
                    None => {
                        let fallback = problem.items.iter().map(|it| it.predicted).collect();
                        (members, RepairMethod::Exact, false, fallback)
                    }
                }
            } else {
                let before = problem.violations_of(
                    sets,
                    &problem.items.iter().map(|it| it.predicted).collect::<Vec<_>>(),
                );
                let (assignment, clean) = greedy_repair(&problem, sets);
                debug_assert!(problem.violations_of(sets, &assignment) <= before);
                (members, RepairMethod::Greedy, clean, assignment)
            }
        })
        .collect();

    let mut predictions = preds.clone();
    let mut reports = Vec::with_capacity(solved.len());
    for (members, method, feasible, assignment) in solved {
        for (slot, &item_idx) in members.iter().enumerate() {
            predictions.items[item_idx].predicted = assignment[slot];
        }
        reports.push(GroupReport {
            members,
            method,
            feasible,
        });
    }
    RepairOutcome {
        predictions,
        groups: reports,
    }
}

/// Σ log p of the currently predicted relations (−inf if any has zero mass).
pub fn log_prob_sum(preds: &PredictionSet) -> f64 {
    preds
        .items
        .iter()
        .map(|it| {
            let p = it.probs[it.predicted];
            if p > 0.0 {
                p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}
