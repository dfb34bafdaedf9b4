//! Cardinality and weighted-sum bounds as clauses.
//!
//! The counter is a weighted sequential counter with saturating registers:
//! register `r[i][j]` is forced true whenever the weighted sum of the first
//! `i + 1` inputs reaches `j + 1`. Only the upward direction is encoded, which
//! suffices for upper bounds, and a bound `sum <= k` is a single unit `¬r[n-1][k]`.
//! An existing counter can therefore be tightened incrementally with units.

use crate::sat::{Lit, Var};

/// Incremental upper-bound counter over weighted literals.
#[derive(Clone, Debug)]
pub struct WeightedCounter {
    /// Final register row; `outputs[j]` is implied by `sum >= j + 1`.
    outputs: Vec<Lit>,
    cap: u64,
}

impl WeightedCounter {
    /// Builds registers for sums up to `cap + 1` (saturating), appending clauses to `clauses`.
    pub fn build(
        inputs: &[(Lit, u64)],
        cap: u64,
        fresh: &mut dyn FnMut() -> Var,
        clauses: &mut Vec<Vec<Lit>>,
    ) -> Self {
        let width = (cap + 1) as usize;
        let mut prev: Vec<Lit> = Vec::new();
        for (i, &(x, w)) in inputs.iter().enumerate() {
            assert!(w >= 1, "weights must be positive");
            let row: Vec<Lit> = (0..width).map(|_| fresh().pos()).collect();
            let w = w.min(cap + 1) as usize;
            for r in row.iter().take(w) {
                clauses.push(vec![!x, *r]);
            }
            if i > 0 {
                for j in 0..width {
                    clauses.push(vec![!prev[j], row[j]]);
                    let target = (j + w).min(width - 1);
                    clauses.push(vec![!x, !prev[j], row[target]]);
                }
            }
            prev = row;
        }
        WeightedCounter { outputs: prev, cap }
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// Unit literal enforcing `sum <= k`. `None` when `k` is beyond the counter's
    /// range (no restriction needed or representable) or there are no inputs.
    pub fn at_most(&self, k: u64) -> Option<Lit> {
        if k > self.cap || self.outputs.is_empty() {
            return None;
        }
        Some(!self.outputs[k as usize])
    }
}

/// Clauses over `lits` plus fresh auxiliaries whose models, projected on
/// `lits`, are exactly the assignments with at most `k` true literals.
pub fn encode_at_most_k(lits: &[Lit], k: usize, fresh: &mut dyn FnMut() -> Var) -> Vec<Vec<Lit>> {
    if k >= lits.len() {
        return Vec::new();
    }
    let mut clauses = Vec::new();
    if k == 0 {
        for &l in lits {
            clauses.push(vec![!l]);
        }
        return clauses;
    }
    if k == 1 && lits.len() <= 6 {
        return pairwise_at_most_one(lits);
    }
    let inputs: Vec<(Lit, u64)> = lits.iter().map(|&l| (l, 1)).collect();
    let counter = WeightedCounter::build(&inputs, k as u64, fresh, &mut clauses);
    if let Some(unit) = counter.at_most(k as u64) {
        clauses.push(vec![unit]);
    }
    clauses
}

pub fn pairwise_at_most_one(lits: &[Lit]) -> Vec<Vec<Lit>> {
    let mut out = Vec::with_capacity(lits.len() * lits.len().saturating_sub(1) / 2);
    for i in 0..lits.len() {
        for j in i + 1..lits.len() {
            out.push(vec![!lits[i], !lits[j]]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts input assignments (over the first `n` variables) extendable to a
    /// model of `clauses` by exhaustive search over the auxiliaries.
    fn projected_models(n: usize, total_vars: usize, clauses: &[Vec<Lit>]) -> usize {
        let aux = total_vars - n;
        let mut count = 0;
        for inputs in 0u64..(1 << n) {
            let mut found = false;
            for extra in 0u64..(1 << aux) {
                let assignment: Vec<bool> = (0..total_vars)
                    .map(|v| if v < n { inputs >> v & 1 == 1 } else { extra >> (v - n) & 1 == 1 })
                    .collect();
                if clauses.iter().all(|c| c.iter().any(|l| l.eval(&assignment))) {
                    found = true;
                    break;
                }
            }
            if found {
                count += 1;
            }
        }
        count
    }

    fn run(n: usize, k: usize) -> (usize, Vec<Vec<Lit>>) {
        let lits: Vec<Lit> = (0..n as u32).map(|v| Var::new(v).pos()).collect();
        let mut next = n as u32;
        let mut fresh = || {
            let v = Var::new(next);
            next += 1;
            v
        };
        let clauses = encode_at_most_k(&lits, k, &mut fresh);
        (next as usize, clauses)
    }

    fn binomial_prefix(n: usize, k: usize) -> usize {
        let mut total = 0;
        let mut c = 1usize;
        for i in 0..=k.min(n) {
            if i > 0 {
                c = c * (n - i + 1) / i;
            }
            total += c;
        }
        total
    }

    #[test]
    fn zero_bound_forces_all_false() {
        let (vars, clauses) = run(3, 0);
        assert_eq!(projected_models(3, vars, &clauses), 1);
    }

    #[test]
    fn pairwise_excludes_only_both_true() {
        let (vars, clauses) = run(2, 1);
        assert_eq!(clauses, vec![vec![Var::new(0).neg(), Var::new(1).neg()]]);
        assert_eq!(projected_models(2, vars, &clauses), 3);
    }

    #[test]
    fn five_choose_at_most_two() {
        let (vars, clauses) = run(5, 2);
        assert!(vars > 5, "sequential counter introduces auxiliaries");
        // C(5,0)+C(5,1)+C(5,2)
        assert_eq!(projected_models(5, vars, &clauses), 16);
    }

    #[test]
    fn counter_matches_binomials_for_small_cases() {
        for n in 1..=5 {
            for k in 0..=n {
                let (vars, clauses) = run(n, k);
                if vars - n > 16 {
                    continue;
                }
                assert_eq!(projected_models(n, vars, &clauses), binomial_prefix(n, k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn weighted_counter_tightening() {
        // weights 3, 1, 2 over x0..x2; bound the sum by each k in turn.
        let lits: Vec<Lit> = (0..3).map(|v| Var::new(v).pos()).collect();
        let weights = [3u64, 1, 2];
        let inputs: Vec<(Lit, u64)> = lits.iter().copied().zip(weights).collect();
        let mut next = 3u32;
        let mut fresh = || {
            let v = Var::new(next);
            next += 1;
            v
        };
        let mut clauses = Vec::new();
        let counter = WeightedCounter::build(&inputs, 4, &mut fresh, &mut clauses);
        let vars = next as usize;
        for k in 0..=4u64 {
            let mut cs = clauses.clone();
            cs.push(vec![counter.at_most(k).unwrap()]);
            let expected = (0u64..8)
                .filter(|m| (0..3).map(|i| if m >> i & 1 == 1 { weights[i] } else { 0 }).sum::<u64>() <= k)
                .count();
            assert_eq!(projected_models(3, vars, &cs), expected, "k={k}");
        }
        assert!(counter.at_most(5).is_none());
    }
}
