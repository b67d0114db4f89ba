//! Broker revenue maximization: choose which pending requests to accommodate.
//!
//! Each request `j` demands `demands[j][i]` units of resource type `i` and
//! yields revenue `revenues[j]` (the sum of its per-type prices). A request
//! is admitted all-or-nothing, capacities bind per type, and the objective is
//! total admitted revenue — a multidimensional 0/1 knapsack. The per-request
//! assignment matrix is fully determined by the accept vector (a request
//! either takes all of its typed demands or none), so the solvers search over
//! the accept vector and expand the matrix on output.
//!
//! Three solvers are provided: an exact branch-and-bound with a fractional
//! relaxation bound, a density-greedy baseline, and an exhaustive oracle for
//! verification.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Density tie-breaker guard: zero-demand requests sort first instead of
/// dividing by zero.
const DENSITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdmissionError {
    #[error("instance is malformed: {0}")]
    Malformed(String),
    #[error("exhaustive oracle refuses {requests} requests (limit {limit})")]
    OracleTooLarge { requests: usize, limit: usize },
}

/// Problem data: `requests x types` demand and price matrices plus per-type
/// capacity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionInstance {
    /// `demands[j][i]`: units of type `i` demanded by request `j`.
    pub demands: Vec<Vec<u64>>,
    /// `prices[j][i]`: price offered for type `i` by request `j`.
    pub prices: Vec<Vec<u64>>,
    /// `capacity[i]`: available units of type `i`.
    pub capacity: Vec<u64>,
    /// `revenues[j]`: total revenue of request `j`; always the row sum of
    /// `prices`.
    pub revenues: Vec<u64>,
}

impl AdmissionInstance {
    pub fn new(
        demands: Vec<Vec<u64>>,
        prices: Vec<Vec<u64>>,
        capacity: Vec<u64>,
    ) -> Result<Self, AdmissionError> {
        if capacity.is_empty() {
            return Err(AdmissionError::Malformed("no resource types".into()));
        }
        if demands.len() != prices.len() {
            return Err(AdmissionError::Malformed(
                "demand and price row counts differ".into(),
            ));
        }
        let types = capacity.len();
        for (j, row) in demands.iter().enumerate() {
            if row.len() != types {
                return Err(AdmissionError::Malformed(format!(
                    "demand row {j} has {} entries, expected {types}",
                    row.len()
                )));
            }
        }
        for (j, row) in prices.iter().enumerate() {
            if row.len() != types {
                return Err(AdmissionError::Malformed(format!(
                    "price row {j} has {} entries, expected {types}",
                    row.len()
                )));
            }
        }
        let revenues = prices.iter().map(|row| row.iter().sum()).collect();
        Ok(AdmissionInstance {
            demands,
            prices,
            capacity,
            revenues,
        })
    }

    pub fn requests(&self) -> usize {
        self.demands.len()
    }

    pub fn types(&self) -> usize {
        self.capacity.len()
    }

    fn fits(&self, used: &[u64], j: usize) -> bool {
        (0..self.types()).all(|i| used[i] + self.demands[j][i] <= self.capacity[i])
    }
}

/// A feasible admission decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionDecision {
    /// `assigned[j][i]`: whether type `i` of request `j` is assigned. Always
    /// the accept vector expanded across types.
    pub assigned: Vec<Vec<u8>>,
    /// `accepted[j]`: whether request `j` is accommodated.
    pub accepted: Vec<u8>,
    /// Total revenue of accepted requests.
    pub objective: u64,
}

impl AdmissionDecision {
    fn from_accept(inst: &AdmissionInstance, accepted: Vec<u8>) -> Self {
        let types = inst.types();
        let objective = accepted
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == 1)
            .map(|(j, _)| inst.revenues[j])
            .sum();
        let assigned = accepted.iter().map(|&a| vec![a; types]).collect();
        AdmissionDecision {
            assigned,
            accepted,
            objective,
        }
    }

    /// Checks the coupling and capacity constraints against `inst`.
    pub fn is_feasible(&self, inst: &AdmissionInstance) -> bool {
        let types = inst.types();
        if self.accepted.len() != inst.requests() || self.assigned.len() != inst.requests() {
            return false;
        }
        for (j, row) in self.assigned.iter().enumerate() {
            let total: u32 = row.iter().map(|&x| x as u32).sum();
            // All-or-nothing coupling between the matrix and the accept bit.
            if total != self.accepted[j] as u32 * types as u32 {
                return false;
            }
        }
        for i in 0..types {
            let used: u64 = (0..inst.requests())
                .filter(|&j| self.assigned[j][i] == 1)
                .map(|j| inst.demands[j][i])
                .sum();
            if used > inst.capacity[i] {
                return false;
            }
        }
        let objective: u64 = self
            .accepted
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == 1)
            .map(|(j, _)| inst.revenues[j])
            .sum();
        objective == self.objective
    }
}

fn density(inst: &AdmissionInstance, j: usize) -> f64 {
    let normalized_load: f64 = (0..inst.types())
        .map(|i| {
            if inst.capacity[i] == 0 {
                if inst.demands[j][i] == 0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                inst.demands[j][i] as f64 / inst.capacity[i] as f64
            }
        })
        .sum();
    inst.revenues[j] as f64 / (normalized_load + DENSITY_EPSILON)
}

/// Request order used by both the greedy baseline and the branch-and-bound:
/// revenue density descending, id ascending on ties.
fn density_order(inst: &AdmissionInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..inst.requests()).collect();
    order.sort_by(|&a, &b| {
        density(inst, b)
            .partial_cmp(&density(inst, a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Upper bound on the revenue attainable from `order[from..]` given the
/// remaining capacity: for each resource type, the fractional knapsack
/// optimum of that single constraint; the minimum over types bounds the true
/// optimum because every relaxation does.
fn fractional_bound(inst: &AdmissionInstance, order: &[usize], from: usize, used: &[u64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, (&capacity, &taken)) in inst.capacity.iter().zip(used).enumerate() {
        let remaining = (capacity - taken) as f64;
        // Sort the open requests by value per unit of this dimension.
        let mut items: Vec<(f64, f64)> = order[from..]
            .iter()
            .map(|&j| (inst.demands[j][i] as f64, inst.revenues[j] as f64))
            .collect();
        items.sort_by(|a, b| {
            let da = if a.0 == 0.0 { f64::INFINITY } else { a.1 / a.0 };
            let db = if b.0 == 0.0 { f64::INFINITY } else { b.1 / b.0 };
            db.partial_cmp(&da).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut cap = remaining;
        let mut value = 0.0;
        for (demand, revenue) in items {
            if demand <= cap {
                cap -= demand;
                value += revenue;
            } else {
                if cap > 0.0 && demand > 0.0 {
                    value += revenue * (cap / demand);
                }
                break;
            }
        }
        best = best.min(value);
    }
    best
}

struct BranchAndBound<'a> {
    inst: &'a AdmissionInstance,
    order: Vec<usize>,
    best_value: u64,
    best_accept: Vec<u8>,
}

impl<'a> BranchAndBound<'a> {
    fn search(&mut self, depth: usize, used: &mut Vec<u64>, value: u64, accept: &mut Vec<u8>) {
        if value > self.best_value {
            self.best_value = value;
            self.best_accept = accept.clone();
        }
        if depth == self.order.len() {
            return;
        }
        // Prune when even the relaxation cannot beat the incumbent. Revenues
        // are integral, so an improvement needs at least best + 1; the small
        // slack covers float rounding in the bound.
        let bound = value as f64 + fractional_bound(self.inst, &self.order, depth, used);
        if bound < self.best_value as f64 + 1.0 - 1e-6 {
            return;
        }
        let j = self.order[depth];
        if self.inst.fits(used, j) {
            for (taken, &demand) in used.iter_mut().zip(&self.inst.demands[j]) {
                *taken += demand;
            }
            accept[j] = 1;
            self.search(depth + 1, used, value + self.inst.revenues[j], accept);
            accept[j] = 0;
            for (taken, &demand) in used.iter_mut().zip(&self.inst.demands[j]) {
                *taken -= demand;
            }
        }
        self.search(depth + 1, used, value, accept);
    }
}

/// Exact solver: depth-first branch-and-bound over the accept vector with a
/// per-type fractional relaxation bound. Optimal; intended for desk-scale
/// instances (about 25 requests and below).
pub fn solve_exact(inst: &AdmissionInstance) -> AdmissionDecision {
    let order = density_order(inst);
    let mut bb = BranchAndBound {
        inst,
        order,
        best_value: 0,
        best_accept: vec![0; inst.requests()],
    };
    let mut used = vec![0u64; inst.types()];
    let mut accept = vec![0u8; inst.requests()];
    bb.search(0, &mut used, 0, &mut accept);
    AdmissionDecision::from_accept(inst, bb.best_accept)
}

/// Greedy baseline: admit in revenue-density order while feasible. Always
/// feasible, possibly suboptimal.
pub fn solve_greedy(inst: &AdmissionInstance) -> AdmissionDecision {
    let mut used = vec![0u64; inst.types()];
    let mut accepted = vec![0u8; inst.requests()];
    for j in density_order(inst) {
        if inst.fits(&used, j) {
            for (taken, &demand) in used.iter_mut().zip(&inst.demands[j]) {
                *taken += demand;
            }
            accepted[j] = 1;
        }
    }
    AdmissionDecision::from_accept(inst, accepted)
}

/// Largest request count the exhaustive oracle will enumerate.
pub const ORACLE_LIMIT: usize = 20;

/// Exhaustive verification oracle: enumerates every subset and returns the
/// maximum feasible objective.
pub fn brute_force_oracle(inst: &AdmissionInstance) -> Result<u64, AdmissionError> {
    let n = inst.requests();
    if n > ORACLE_LIMIT {
        return Err(AdmissionError::OracleTooLarge {
            requests: n,
            limit: ORACLE_LIMIT,
        });
    }
    let mut best = 0u64;
    for mask in 0u32..(1u32 << n) {
        let mut value = 0u64;
        let mut feasible = true;
        let mut used = vec![0u64; inst.types()];
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            for ((taken, &demand), &cap) in
                used.iter_mut().zip(&inst.demands[j]).zip(&inst.capacity)
            {
                *taken += demand;
                if *taken > cap {
                    feasible = false;
                }
            }
            value += inst.revenues[j];
        }
        if feasible && value > best {
            best = value;
        }
    }
    Ok(best)
}

// -- text import/export -----------------------------------------------------

/// Serializes an instance to the standalone-solver text format:
///
/// ```text
/// <types> <requests>
/// <capacity: types numbers>
/// <requests demand rows of types numbers>
/// <requests price rows of types numbers>
/// ```
///
/// Blank lines and `#` comments are ignored on input.
pub fn export_instance(inst: &AdmissionInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", inst.types(), inst.requests());
    let caps: Vec<String> = inst.capacity.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "{}", caps.join(" "));
    for row in &inst.demands {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    for row in &inst.prices {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    out
}

/// Parses the text format written by [`export_instance`].
pub fn import_instance(text: &str) -> Result<AdmissionInstance, AdmissionError> {
    let mut numbers = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            let n: u64 = token
                .parse()
                .map_err(|e| AdmissionError::Malformed(format!("bad number {token:?}: {e}")))?;
            numbers.push(n);
        }
    }
    let mut it = numbers.into_iter();
    let types = it
        .next()
        .ok_or_else(|| AdmissionError::Malformed("missing type count".into()))?
        as usize;
    let requests = it
        .next()
        .ok_or_else(|| AdmissionError::Malformed("missing request count".into()))?
        as usize;
    if types == 0 {
        return Err(AdmissionError::Malformed(
            "type count must be positive".into(),
        ));
    }
    let mut take_row = |what: &str| -> Result<Vec<u64>, AdmissionError> {
        let row: Vec<u64> = it.by_ref().take(types).collect();
        if row.len() != types {
            return Err(AdmissionError::Malformed(format!("truncated {what} row")));
        }
        Ok(row)
    };
    let capacity = take_row("capacity")?;
    let mut demands = Vec::with_capacity(requests);
    for _ in 0..requests {
        demands.push(take_row("demand")?);
    }
    let mut prices = Vec::with_capacity(requests);
    for _ in 0..requests {
        prices.push(take_row("price")?);
    }
    if it.next().is_some() {
        return Err(AdmissionError::Malformed("trailing numbers".into()));
    }
    AdmissionInstance::new(demands, prices, capacity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn instance(
        demands: Vec<Vec<u64>>,
        prices: Vec<Vec<u64>>,
        capacity: Vec<u64>,
    ) -> AdmissionInstance {
        AdmissionInstance::new(demands, prices, capacity).unwrap()
    }

    fn random_instance(
        rng: &mut ChaCha20Rng,
        max_requests: usize,
        max_types: usize,
    ) -> AdmissionInstance {
        let requests = rng.gen_range(0..=max_requests);
        let types = rng.gen_range(1..=max_types);
        let capacity: Vec<u64> = (0..types).map(|_| rng.gen_range(0..100)).collect();
        let demands = (0..requests)
            .map(|_| (0..types).map(|_| rng.gen_range(0..60)).collect())
            .collect();
        let prices = (0..requests)
            .map(|_| (0..types).map(|_| rng.gen_range(0..50)).collect())
            .collect();
        instance(demands, prices, capacity)
    }

    #[test]
    fn single_fitting_request_is_accepted() {
        let inst = instance(vec![vec![5, 5]], vec![vec![4, 6]], vec![10, 10]);
        let d = solve_exact(&inst);
        assert_eq!(d.accepted, vec![1]);
        assert_eq!(d.objective, 10);
        assert!(d.is_feasible(&inst));
    }

    #[test]
    fn mutually_exclusive_requests_pick_the_richer() {
        // Each fits alone, both together exceed capacity. The exhaustive
        // oracle fixes the expected objective.
        let inst = instance(vec![vec![7], vec![6]], vec![vec![10], vec![7]], vec![10]);
        assert_eq!(brute_force_oracle(&inst).unwrap(), 10);
        let d = solve_exact(&inst);
        assert_eq!(d.objective, 10);
        assert_eq!(d.accepted, vec![1, 0]);
    }

    #[test]
    fn oversized_demand_forces_rejection() {
        // Type 1 demand exceeds its capacity outright, so the request cannot
        // be accepted even though type 0 fits.
        let inst = instance(vec![vec![1, 50]], vec![vec![9, 9]], vec![10, 10]);
        let d = solve_exact(&inst);
        assert_eq!(d.accepted, vec![0]);
        assert_eq!(d.objective, 0);
    }

    #[test]
    fn empty_instance_yields_zero() {
        let inst = instance(vec![], vec![], vec![5]);
        assert_eq!(solve_exact(&inst).objective, 0);
        assert_eq!(solve_greedy(&inst).objective, 0);
        assert_eq!(brute_force_oracle(&inst).unwrap(), 0);
    }

    #[test]
    fn zero_capacity_admits_only_zero_demand() {
        let inst = instance(vec![vec![0], vec![3]], vec![vec![5], vec![9]], vec![0]);
        assert_eq!(brute_force_oracle(&inst).unwrap(), 5);
        assert_eq!(solve_exact(&inst).objective, 5);
    }

    #[test]
    fn oracle_refuses_oversized_enumeration() {
        let n = ORACLE_LIMIT + 1;
        let inst = instance(vec![vec![1]; n], vec![vec![1]; n], vec![100]);
        assert!(matches!(
            brute_force_oracle(&inst),
            Err(AdmissionError::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn exact_matches_oracle_on_random_instances() {
        let mut rng = ChaCha20Rng::seed_from_u64(0xad31);
        for _ in 0..150 {
            let inst = random_instance(&mut rng, 12, 4);
            let exact = solve_exact(&inst);
            assert!(exact.is_feasible(&inst));
            assert_eq!(exact.objective, brute_force_oracle(&inst).unwrap());
        }
    }

    #[test]
    fn greedy_is_feasible_and_never_beats_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(0xad32);
        for _ in 0..150 {
            let inst = random_instance(&mut rng, 12, 4);
            let greedy = solve_greedy(&inst);
            assert!(greedy.is_feasible(&inst));
            assert!(greedy.objective <= solve_exact(&inst).objective);
        }
    }

    #[test]
    fn greedy_matches_exact_on_equal_single_type_demands() {
        let mut rng = ChaCha20Rng::seed_from_u64(0xad33);
        for _ in 0..100 {
            let requests = rng.gen_range(1..10);
            let demand = rng.gen_range(1..10u64);
            let capacity = rng.gen_range(0..40u64);
            let prices: Vec<Vec<u64>> = (0..requests)
                .map(|_| vec![rng.gen_range(0..30u64)])
                .collect();
            let inst = instance(vec![vec![demand]; requests], prices, vec![capacity]);
            // With identical demands, density order is revenue order, which
            // is optimal for a uniform knapsack.
            assert_eq!(solve_greedy(&inst).objective, solve_exact(&inst).objective);
        }
    }

    #[test]
    fn greedy_loses_on_adversarial_instance() {
        // One dense small item edges out the single large item under greedy's
        // density order, but the large item alone is optimal.
        let inst = instance(vec![vec![4], vec![7]], vec![vec![6], vec![10]], vec![10]);
        let greedy = solve_greedy(&inst);
        let exact = solve_exact(&inst);
        assert!(greedy.objective <= exact.objective);
        assert_eq!(exact.objective, 10);
        assert_eq!(greedy.objective, 6);
    }

    #[test]
    fn capacity_monotonicity() {
        let mut rng = ChaCha20Rng::seed_from_u64(0xad34);
        for _ in 0..60 {
            let inst = random_instance(&mut rng, 10, 3);
            let base = solve_exact(&inst).objective;
            let mut bigger = inst.clone();
            let i = rng.gen_range(0..bigger.capacity.len());
            bigger.capacity[i] += rng.gen_range(1..20);
            assert!(solve_exact(&bigger).objective >= base);
        }
    }

    #[test]
    fn all_or_nothing_expansion() {
        let mut rng = ChaCha20Rng::seed_from_u64(0xad35);
        for _ in 0..40 {
            let inst = random_instance(&mut rng, 10, 3);
            for d in [solve_exact(&inst), solve_greedy(&inst)] {
                for row in &d.assigned {
                    let total: usize = row.iter().map(|&x| x as usize).sum();
                    assert!(total == 0 || total == inst.types());
                }
            }
        }
    }

    #[test]
    fn text_format_round_trip() {
        let inst = instance(
            vec![vec![3, 1], vec![2, 8]],
            vec![vec![5, 5], vec![1, 2]],
            vec![10, 12],
        );
        let text = export_instance(&inst);
        let back = import_instance(&text).unwrap();
        assert_eq!(back, inst);
        assert!(import_instance("2 1\n10 10\n1 1\n").is_err()); // truncated
    }
}
