//! Assignment solvers: an optimal rectangular assignment (for OSPA) and a
//! best-first enumeration of constrained per-slot choices (for the GLMB
//! prediction and association steps).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Minimum-cost assignment of every row of an `n × m` cost matrix to a
/// distinct column, `n ≤ m`. Returns the total cost and the column of each
/// row. Shortest augmenting path with potentials, `O(n² m)`.
pub fn solve_rectangular(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    // 1-based arrays; index 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (total, assignment)
}

/// One option for a slot: its log-weight and, optionally, an exclusive
/// resource it consumes (e.g. a measurement index).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice {
    pub log_weight: f64,
    pub resource: Option<usize>,
}

impl Choice {
    pub fn free(log_weight: f64) -> Self {
        Self { log_weight, resource: None }
    }

    pub fn using(log_weight: f64, resource: usize) -> Self {
        Self { log_weight, resource: Some(resource) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub log_weight: f64,
    /// Index into each slot's choice list.
    pub choices: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct Enumeration {
    /// Sorted by descending weight; ties keep discovery order.
    pub selections: Vec<Selection>,
    /// True when the node budget ran out before the search finished.
    pub exhausted: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct EnumerationLimits {
    pub max_results: usize,
    /// Selections lighter than `upper bound + min_log_ratio` are dropped.
    pub min_log_ratio: f64,
    pub max_nodes: usize,
}

impl EnumerationLimits {
    pub fn exhaustive() -> Self {
        Self { max_results: usize::MAX, min_log_ratio: f64::NEG_INFINITY, max_nodes: usize::MAX }
    }
}

struct Ranked {
    log_weight: f64,
    seq: usize,
    choices: Vec<usize>,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    // "Greater" means worse, so the max-heap top is the current worst kept.
    fn cmp(&self, other: &Self) -> Ordering {
        other.log_weight.total_cmp(&self.log_weight).then(self.seq.cmp(&other.seq))
    }
}

struct Search<'a> {
    slots: &'a [Vec<Choice>],
    order: Vec<Vec<usize>>,
    suffix_bound: Vec<f64>,
    floor: f64,
    limits: EnumerationLimits,
    used: Vec<bool>,
    current: Vec<usize>,
    heap: BinaryHeap<Ranked>,
    seq: usize,
    nodes: usize,
    exhausted: bool,
}

impl Search<'_> {
    fn threshold(&self) -> f64 {
        if self.heap.len() >= self.limits.max_results {
            self.heap.peek().map_or(self.floor, |w| w.log_weight.max(self.floor))
        } else {
            self.floor
        }
    }

    fn descend(&mut self, slot: usize, acc: f64) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            self.exhausted = true;
            return;
        }
        if slot == self.slots.len() {
            let full = self.heap.len() >= self.limits.max_results;
            if acc < self.floor || (full && acc <= self.threshold()) {
                return;
            }
            self.heap.push(Ranked { log_weight: acc, seq: self.seq, choices: self.current.clone() });
            self.seq += 1;
            if self.heap.len() > self.limits.max_results {
                self.heap.pop();
            }
            return;
        }
        for k in 0..self.order[slot].len() {
            let idx = self.order[slot][k];
            let choice = self.slots[slot][idx];
            if let Some(r) = choice.resource {
                if self.used[r] {
                    continue;
                }
            }
            let next = acc + choice.log_weight;
            let bound = next + self.suffix_bound[slot + 1];
            let full = self.heap.len() >= self.limits.max_results;
            if bound < self.floor || (full && bound <= self.threshold()) {
                // Choices are sorted, so later ones cannot do better except
                // through freed resources, which the bound already ignores.
                break;
            }
            if let Some(r) = choice.resource {
                self.used[r] = true;
            }
            self.current[slot] = idx;
            self.descend(slot + 1, next);
            if let Some(r) = choice.resource {
                self.used[r] = false;
            }
        }
    }
}

/// Best-first enumeration of one choice per slot with exclusive resources.
///
/// Depth-first branch and bound: each partial selection is bounded by adding
/// the best remaining choice of every later slot (ignoring exclusivity).
/// Choices with non-finite log-weight are never selected.
pub fn best_selections(slots: &[Vec<Choice>], limits: EnumerationLimits) -> Enumeration {
    if limits.max_results == 0 {
        return Enumeration::default();
    }
    let order: Vec<Vec<usize>> = slots
        .iter()
        .map(|choices| {
            let mut idx: Vec<usize> = (0..choices.len()).filter(|&i| choices[i].log_weight.is_finite()).collect();
            idx.sort_by(|&a, &b| choices[b].log_weight.total_cmp(&choices[a].log_weight).then(a.cmp(&b)));
            idx
        })
        .collect();
    if order.iter().any(Vec::is_empty) {
        return Enumeration::default();
    }
    let mut suffix_bound = vec![0.0; slots.len() + 1];
    for s in (0..slots.len()).rev() {
        suffix_bound[s] = suffix_bound[s + 1] + slots[s][order[s][0]].log_weight;
    }
    let max_resource = slots
        .iter()
        .flat_map(|c| c.iter().filter_map(|c| c.resource))
        .max()
        .map_or(0, |r| r + 1);
    // The ratio cutoff is relative to the best selection that respects
    // exclusivity, which the relaxed bound can overshoot by a lot, so find
    // that one first.
    let mut search = Search {
        slots,
        floor: f64::NEG_INFINITY,
        suffix_bound,
        order,
        limits: EnumerationLimits { max_results: 1, ..limits },
        used: vec![false; max_resource],
        current: vec![0; slots.len()],
        heap: BinaryHeap::new(),
        seq: 0,
        nodes: 0,
        exhausted: false,
    };
    search.descend(0, 0.0);
    let Some(best) = search.heap.pop() else {
        return Enumeration { selections: Vec::new(), exhausted: search.exhausted };
    };
    if search.exhausted {
        return Enumeration {
            selections: vec![Selection { log_weight: best.log_weight, choices: best.choices }],
            exhausted: true,
        };
    }
    search.floor = best.log_weight + limits.min_log_ratio;
    search.limits = limits;
    search.exhausted = false;
    search.descend(0, 0.0);
    let mut ranked = search.heap.into_vec();
    ranked.sort();
    Enumeration {
        selections: ranked
            .into_iter()
            .map(|r| Selection { log_weight: r.log_weight, choices: r.choices })
            .collect(),
        exhausted: search.exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost[0].len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + rec(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost[0].len()])
    }

    #[test]
    fn hungarian_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::rng::stream(3, &[]);
        for n in 1..=5 {
            for m in n..=6 {
                let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random::<f64>() * 10.0).collect()).collect();
                let (total, assign) = solve_rectangular(&cost);
                assert!((total - brute_force_min(&cost)).abs() < 1e-12);
                let mut cols = assign.clone();
                cols.sort();
                cols.dedup();
                assert_eq!(cols.len(), n);
            }
        }
    }

    #[test]
    fn ratio_cutoff_is_relative_to_best_feasible() {
        // Both slots want resource 0 with huge weight; the relaxed bound is
        // far above anything feasible.
        let slots = vec![
            vec![Choice { log_weight: -2.5, resource: None }, Choice { log_weight: 650.0, resource: Some(0) }],
            vec![Choice { log_weight: -2.1, resource: None }, Choice { log_weight: 580.0, resource: Some(0) }],
        ];
        let limits = EnumerationLimits { max_results: 10, min_log_ratio: -100.0, max_nodes: usize::MAX };
        let found = best_selections(&slots, limits);
        let w: Vec<f64> = found.selections.iter().map(|s| s.log_weight).collect();
        assert_eq!(w, vec![647.9, 577.5]);
    }

    #[test]
    fn enumeration_is_exhaustive_and_sorted() {
        // Two slots competing for resource 0.
        let slots = vec![
            vec![Choice::free(0.1f64.ln()), Choice::using(0.9f64.ln(), 0)],
            vec![Choice::free(0.2f64.ln()), Choice::using(0.8f64.ln(), 0), Choice::using(0.5f64.ln(), 1)],
        ];
        let e = best_selections(&slots, EnumerationLimits::exhaustive());
        // 2*3 combos minus the one where both take resource 0.
        assert_eq!(e.selections.len(), 5);
        for w in e.selections.windows(2) {
            assert!(w[0].log_weight >= w[1].log_weight);
        }
        assert_eq!(e.selections[0].choices, vec![1, 2]);
        assert!((e.selections[0].log_weight - (0.45f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn enumeration_top_k_matches_exhaustive_prefix() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, &[]);
        for _ in 0..50 {
            let slots: Vec<Vec<Choice>> = (0..4)
                .map(|_| {
                    let mut c = vec![Choice::free(rng.random::<f64>().ln())];
                    for r in 0..3 {
                        if rng.random::<f64>() < 0.7 {
                            c.push(Choice::using(rng.random::<f64>().ln(), r));
                        }
                    }
                    c
                })
                .collect();
            let all = best_selections(&slots, EnumerationLimits::exhaustive());
            let top = best_selections(
                &slots,
                EnumerationLimits { max_results: 5, min_log_ratio: f64::NEG_INFINITY, max_nodes: usize::MAX },
            );
            let k = 5.min(all.selections.len());
            for i in 0..k {
                assert!((all.selections[i].log_weight - top.selections[i].log_weight).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn infeasible_slot_gives_nothing() {
        let slots = vec![vec![Choice::free(f64::NEG_INFINITY)]];
        assert!(best_selections(&slots, EnumerationLimits::exhaustive()).selections.is_empty());
    }
}
