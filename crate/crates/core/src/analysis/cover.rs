//! Exact covering and packing numbers on small expert sets.
//!
//! Both searches work on `u64` bitsets over experts, so at most 64 experts
//! are supported; callers pass a smaller budget (24 by default) because the
//! worst case is exponential.

use crate::analysis::distance_table;
use crate::environments::LossMatrix;
use crate::game::ExpertId;

/// Largest expert count the bitset searches can represent.
pub const MAX_EXACT_EXPERTS: usize = 64;

/// Default expert budget for exact searches.
pub const DEFAULT_BUDGET: usize = 24;

fn members(mask: u64) -> Vec<ExpertId> {
    (0..64)
        .filter(|i| mask >> i & 1 == 1)
        .map(ExpertId)
        .collect()
}

fn full_mask(k: usize) -> u64 {
    if k == 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// Smallest `epsilon`-cover, or `None` when `K` exceeds `budget`.
///
/// Coverage is `d(i, j) <= epsilon`; a non-positive `epsilon` means exact
/// equality of loss columns.
pub fn minimum_cover(losses: &LossMatrix, epsilon: f64, budget: usize) -> Option<Vec<ExpertId>> {
    let k = losses.experts();
    if k > budget.min(MAX_EXACT_EXPERTS) {
        return None;
    }
    if k == 0 {
        return Some(Vec::new());
    }
    let eps = epsilon.max(0.0);
    let dist = distance_table(losses);
    let coverage: Vec<u64> = (0..k)
        .map(|j| {
            (0..k)
                .filter(|&i| dist[i][j] <= eps)
                .fold(0, |m, i| m | 1 << i)
        })
        .collect();

    // drop candidates whose coverage is contained in another's
    let candidates: Vec<usize> = (0..k)
        .filter(|&j| {
            !(0..k).any(|o| {
                o != j && coverage[j] & !coverage[o] == 0 && (coverage[j] != coverage[o] || o < j)
            })
        })
        .collect();

    let mut search = CoverSearch {
        coverage: &coverage,
        candidates: &candidates,
        best: greedy_cover(&coverage, &candidates, full_mask(k)),
        current: Vec::new(),
    };
    search.run(full_mask(k));
    let mut best: Vec<ExpertId> = search.best.into_iter().map(ExpertId).collect();
    best.sort();
    Some(best)
}

/// Size of the smallest `epsilon`-cover, or `None` past the budget.
pub fn covering_number_exact(losses: &LossMatrix, epsilon: f64, budget: usize) -> Option<usize> {
    minimum_cover(losses, epsilon, budget).map(|c| c.len())
}

fn greedy_cover(coverage: &[u64], candidates: &[usize], all: u64) -> Vec<usize> {
    let mut uncovered = all;
    let mut chosen = Vec::new();
    while uncovered != 0 {
        let &j = candidates
            .iter()
            .max_by_key(|&&j| ((coverage[j] & uncovered).count_ones(), std::cmp::Reverse(j)))
            .expect("every expert covers itself");
        chosen.push(j);
        uncovered &= !coverage[j];
    }
    chosen
}

struct CoverSearch<'a> {
    coverage: &'a [u64],
    candidates: &'a [usize],
    best: Vec<usize>,
    current: Vec<usize>,
}

impl CoverSearch<'_> {
    fn lower_bound(&self, uncovered: u64) -> usize {
        let widest = self
            .candidates
            .iter()
            .map(|&j| (self.coverage[j] & uncovered).count_ones())
            .max()
            .unwrap_or(1)
            .max(1);
        uncovered.count_ones().div_ceil(widest) as usize
    }

    fn run(&mut self, uncovered: u64) {
        if uncovered == 0 {
            if self.current.len() < self.best.len() {
                self.best = self.current.clone();
            }
            return;
        }
        if self.current.len() + self.lower_bound(uncovered) >= self.best.len() {
            return;
        }
        // some chosen expert must cover the lowest uncovered one
        let target = uncovered.trailing_zeros();
        let mut branches: Vec<usize> = self
            .candidates
            .iter()
            .copied()
            .filter(|&j| self.coverage[j] >> target & 1 == 1)
            .collect();
        branches.sort_by_key(|&j| std::cmp::Reverse((self.coverage[j] & uncovered).count_ones()));
        for j in branches {
            self.current.push(j);
            self.run(uncovered & !self.coverage[j]);
            self.current.pop();
        }
    }
}

/// Largest `epsilon`-packing (pairs separated by strictly more than
/// `epsilon` at some round), found as a maximum clique of the separation
/// graph. `None` when `K` exceeds `budget`.
pub fn maximum_packing(losses: &LossMatrix, epsilon: f64, budget: usize) -> Option<Vec<ExpertId>> {
    let k = losses.experts();
    if k > budget.min(MAX_EXACT_EXPERTS) {
        return None;
    }
    let dist = distance_table(losses);
    let separated: Vec<u64> = (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i && dist[i][j] > epsilon)
                .fold(0, |m, j| m | 1 << j)
        })
        .collect();
    let mut search = CliqueSearch {
        adjacency: &separated,
        best: 0,
        best_size: 0,
    };
    search.expand(0, 0, full_mask(k));
    Some(members(search.best))
}

pub fn packing_number_exact(losses: &LossMatrix, epsilon: f64, budget: usize) -> Option<usize> {
    maximum_packing(losses, epsilon, budget).map(|p| p.len())
}

struct CliqueSearch<'a> {
    adjacency: &'a [u64],
    best: u64,
    best_size: u32,
}

impl CliqueSearch<'_> {
    fn expand(&mut self, clique: u64, size: u32, mut candidates: u64) {
        if candidates == 0 {
            if size > self.best_size {
                self.best = clique;
                self.best_size = size;
            }
            return;
        }
        while candidates != 0 {
            if size + candidates.count_ones() <= self.best_size {
                return;
            }
            let v = candidates.trailing_zeros();
            candidates &= !(1 << v);
            self.expand(
                clique | 1 << v,
                size + 1,
                candidates & self.adjacency[v as usize],
            );
        }
    }
}
