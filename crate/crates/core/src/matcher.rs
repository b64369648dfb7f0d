//! Deadline-aware interface-to-server matching.
//!
//! Each robot interface is assigned to exactly one server, each server takes
//! at most `capacity` interfaces, and the chosen pairs minimize the summed
//! deadline-miss probability (or, in log-product mode, the joint miss
//! probability of the replicated request).
//!
//! The solver is an exact depth-first branch-and-bound over rows. Columns
//! are tried in descending order so the first optimum reached is the one
//! whose row-major flattened 0/1 matrix is lexicographically smallest; later
//! optima only replace it on a strict improvement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `ln(0)` guard for log-product mode.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatcherError {
    #[error("infeasible: {interfaces} interfaces but total server capacity {capacity}")]
    Infeasible { interfaces: usize, capacity: u64 },
    #[error("invalid cost at ({row}, {col}): {value} is outside [0, 1]")]
    InvalidCost { row: usize, col: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no samples for {0}")]
    EmptySamples(String),
    #[error("invalid sample set: {0}")]
    InvalidSamples(String),
}

pub type Result<T> = std::result::Result<T, MatcherError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `sum(eps_ij * x_ij)`.
    #[default]
    Sum,
    /// `sum(ln(max(eps_ij, LOG_FLOOR)) * x_ij)`, i.e. the product of the
    /// selected miss probabilities.
    LogProduct,
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sum" => Ok(Self::Sum),
            "log-product" | "log_product" => Ok(Self::LogProduct),
            other => Err(format!("unknown objective mode `{other}` (expected sum or log-product)")),
        }
    }
}

/// `m x n` deadline-miss probabilities plus per-server capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    eps: Vec<Vec<f64>>,
    capacities: Vec<u32>,
}

impl CostMatrix {
    /// `capacities` defaults to one interface per server.
    pub fn new(eps: Vec<Vec<f64>>, capacities: Option<Vec<u32>>) -> Result<Self> {
        let m = eps.len();
        if m == 0 {
            return Err(MatcherError::DimensionMismatch("cost matrix has no rows".into()));
        }
        let n = eps[0].len();
        if n == 0 {
            return Err(MatcherError::DimensionMismatch("cost matrix has no columns".into()));
        }
        for (i, row) in eps.iter().enumerate() {
            if row.len() != n {
                return Err(MatcherError::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {n}",
                    row.len()
                )));
            }
            for (j, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(MatcherError::InvalidCost { row: i, col: j, value });
                }
            }
        }
        let capacities = capacities.unwrap_or_else(|| vec![1; n]);
        if capacities.len() != n {
            return Err(MatcherError::DimensionMismatch(format!(
                "{} capacities for {n} servers",
                capacities.len()
            )));
        }
        Ok(Self { eps, capacities })
    }

    pub fn interfaces(&self) -> usize {
        self.eps.len()
    }

    pub fn servers(&self) -> usize {
        self.eps[0].len()
    }

    pub fn eps(&self) -> &[Vec<f64>] {
        &self.eps
    }

    pub fn get(&self, interface: usize, server: usize) -> f64 {
        self.eps[interface][server]
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    fn check_feasible(&self) -> Result<()> {
        let capacity: u64 = self.capacities.iter().map(|&c| u64::from(c)).sum();
        if self.interfaces() as u64 > capacity {
            return Err(MatcherError::Infeasible {
                interfaces: self.interfaces(),
                capacity,
            });
        }
        Ok(())
    }

    fn transformed(&self, objective: Objective) -> Vec<Vec<f64>> {
        match objective {
            Objective::Sum => self.eps.clone(),
            Objective::LogProduct => self
                .eps
                .iter()
                .map(|row| row.iter().map(|&e| e.max(LOG_FLOOR).ln()).collect())
                .collect(),
        }
    }
}

/// Server chosen for each interface. Equivalent to the binary `x_ij`
/// matrix with exactly one 1 per row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    servers: usize,
    columns: Vec<usize>,
}

impl Assignment {
    pub fn new(columns: Vec<usize>, servers: usize) -> Result<Self> {
        if let Some(bad) = columns.iter().find(|&&c| c >= servers) {
            return Err(MatcherError::DimensionMismatch(format!(
                "column {bad} out of range for {servers} servers"
            )));
        }
        Ok(Self { servers, columns })
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn server_for(&self, interface: usize) -> usize {
        self.columns[interface]
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        self.columns
            .iter()
            .map(|&c| (0..self.servers).map(|j| u8::from(j == c)).collect())
            .collect()
    }

    /// Whether this assignment satisfies both constraint families for
    /// `costs`.
    pub fn is_feasible_for(&self, costs: &CostMatrix) -> bool {
        if self.columns.len() != costs.interfaces() || self.servers != costs.servers() {
            return false;
        }
        let mut used = vec![0u32; self.servers];
        for &c in &self.columns {
            used[c] += 1;
        }
        used.iter().zip(costs.capacities()).all(|(u, cap)| u <= cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub assignment: Assignment,
    pub objective: f64,
}

/// Objective value of `assignment`, accumulated in row order.
pub fn objective_value(costs: &CostMatrix, assignment: &Assignment, objective: Objective) -> Result<f64> {
    if !assignment.is_feasible_for(costs) {
        return Err(MatcherError::DimensionMismatch("assignment does not fit the cost matrix".into()));
    }
    let value = assignment
        .columns
        .iter()
        .enumerate()
        .fold(0.0, |acc, (i, &j)| acc + row_cost(costs.get(i, j), objective));
    Ok(value)
}

fn row_cost(eps: f64, objective: Objective) -> f64 {
    match objective {
        Objective::Sum => eps,
        Objective::LogProduct => eps.max(LOG_FLOOR).ln(),
    }
}

/// Joint deadline-miss probability of the selected pairs.
pub fn joint_miss(costs: &CostMatrix, assignment: &Assignment) -> f64 {
    assignment.columns.iter().enumerate().map(|(i, &j)| costs.get(i, j)).product()
}

struct Search<'a> {
    cost: &'a [Vec<f64>],
    remaining: Vec<u32>,
    current: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn lower_bound(&self, from_row: usize) -> f64 {
        self.cost[from_row..]
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.remaining)
                    .filter(|(_, &cap)| cap > 0)
                    .map(|(&c, _)| c)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    fn prune(&self, partial: f64, row: usize) -> bool {
        match &self.best {
            None => false,
            Some((best, _)) => {
                let slack = 1e-9 * (1.0 + best.abs());
                partial + self.lower_bound(row) > best + slack
            }
        }
    }

    fn descend(&mut self, row: usize, partial: f64) {
        if row == self.cost.len() {
            let improves = self.best.as_ref().is_none_or(|(best, _)| partial < *best);
            if improves {
                self.best = Some((partial, self.current.clone()));
            }
            return;
        }
        if self.prune(partial, row) {
            return;
        }
        for col in (0..self.remaining.len()).rev() {
            if self.remaining[col] == 0 {
                continue;
            }
            self.remaining[col] -= 1;
            self.current.push(col);
            self.descend(row + 1, partial + self.cost[row][col]);
            self.current.pop();
            self.remaining[col] += 1;
        }
    }
}

/// Exact optimum of the assignment program.
pub fn solve(costs: &CostMatrix, objective: Objective) -> Result<Solution> {
    costs.check_feasible()?;
    let transformed = costs.transformed(objective);
    let mut search = Search {
        cost: &transformed,
        remaining: costs.capacities.clone(),
        current: Vec::with_capacity(costs.interfaces()),
        best: None,
    };
    search.descend(0, 0.0);
    let (objective, columns) = search.best.expect("a feasible instance has at least one assignment");
    Ok(Solution {
        assignment: Assignment {
            servers: costs.servers(),
            columns,
        },
        objective,
    })
}

/// Re-solves against fresh costs, keeping `previous` unless the fresh
/// optimum beats it by at least `hysteresis`.
pub fn rematch(previous: &Assignment, fresh: &CostMatrix, hysteresis: f64, objective: Objective) -> Result<Solution> {
    if previous.columns.len() != fresh.interfaces() || previous.servers != fresh.servers() {
        return Err(MatcherError::DimensionMismatch(format!(
            "previous assignment is {}x{}, fresh costs are {}x{}",
            previous.columns.len(),
            previous.servers,
            fresh.interfaces(),
            fresh.servers()
        )));
    }
    let candidate = solve(fresh, objective)?;
    if !previous.is_feasible_for(fresh) {
        return Ok(candidate);
    }
    let kept = objective_value(fresh, previous, objective)?;
    if kept - candidate.objective < hysteresis {
        Ok(Solution {
            assignment: previous.clone(),
            objective: kept,
        })
    } else {
        Ok(candidate)
    }
}

/// Holds the live mapping and applies hysteresis on every update. Updates
/// take `&mut self`, so a shared matcher needs a single writer.
#[derive(Debug, Clone)]
pub struct Matcher {
    objective: Objective,
    hysteresis: f64,
    current: Option<Solution>,
}

impl Matcher {
    pub fn new(objective: Objective, hysteresis: f64) -> Self {
        Self {
            objective,
            hysteresis: hysteresis.max(0.0),
            current: None,
        }
    }

    pub fn current(&self) -> Option<&Solution> {
        self.current.as_ref()
    }

    pub fn update(&mut self, fresh: &CostMatrix) -> Result<&Solution> {
        let next = match &self.current {
            Some(prev) if prev.assignment.columns.len() == fresh.interfaces() && prev.assignment.servers == fresh.servers() => {
                rematch(&prev.assignment, fresh, self.hysteresis, self.objective)?
            }
            _ => solve(fresh, self.objective)?,
        };
        Ok(self.current.insert(next))
    }
}

/// Network round-trip samples per (interface, server) and compute samples
/// per server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSampleSet {
    /// `network_samples[i][j]`: interface `i` to server `j`, milliseconds.
    pub network_samples: Vec<Vec<Vec<f64>>>,
    /// `compute_samples[j]`: processing time on server `j`, milliseconds.
    pub compute_samples: Vec<Vec<f64>>,
    pub deadline_ms: f64,
    #[serde(default)]
    pub capacities: Option<Vec<u32>>,
}

/// Empirical miss probability per pair over the full cross product of the
/// pair's network samples and the server's compute samples.
pub fn estimate_costs(samples: &PathSampleSet) -> Result<CostMatrix> {
    if !(samples.deadline_ms > 0.0) {
        return Err(MatcherError::InvalidSamples(format!(
            "deadline must be positive, got {}",
            samples.deadline_ms
        )));
    }
    let n = samples.compute_samples.len();
    if samples.network_samples.is_empty() || n == 0 {
        return Err(MatcherError::DimensionMismatch("need at least one interface and one server".into()));
    }
    let mut compute = Vec::with_capacity(n);
    for (j, list) in samples.compute_samples.iter().enumerate() {
        if list.is_empty() {
            return Err(MatcherError::EmptySamples(format!("server {j} compute")));
        }
        check_non_negative(list, || format!("server {j} compute"))?;
        let mut sorted = list.clone();
        sorted.sort_by(f64::total_cmp);
        compute.push(sorted);
    }
    let mut eps = Vec::with_capacity(samples.network_samples.len());
    for (i, row) in samples.network_samples.iter().enumerate() {
        if row.len() != n {
            return Err(MatcherError::DimensionMismatch(format!(
                "interface {i} has network samples for {} servers, expected {n}",
                row.len()
            )));
        }
        let mut eps_row = Vec::with_capacity(n);
        for (j, network) in row.iter().enumerate() {
            if network.is_empty() {
                return Err(MatcherError::EmptySamples(format!("pair ({i}, {j}) network")));
            }
            check_non_negative(network, || format!("pair ({i}, {j}) network"))?;
            let comp = &compute[j];
            let misses: usize = network
                .iter()
                .map(|net| {
                    let budget = samples.deadline_ms - net;
                    comp.len() - comp.partition_point(|c| *c <= budget)
                })
                .sum();
            eps_row.push(misses as f64 / (network.len() * comp.len()) as f64);
        }
        eps.push(eps_row);
    }
    CostMatrix::new(eps, samples.capacities.clone())
}

fn check_non_negative(list: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    if list.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(MatcherError::InvalidSamples(format!(
            "{} has negative or non-finite samples",
            what()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Enumerates every feasible assignment, keeping the smallest objective
    /// and, among equal objectives, the lexicographically smallest flattened
    /// 0/1 matrix.
    fn brute_force(costs: &CostMatrix, objective: Objective) -> Option<(f64, Vec<u8>)> {
        let (m, n) = (costs.interfaces(), costs.servers());
        let mut best: Option<(f64, Vec<u8>)> = None;
        let mut cols = vec![0usize; m];
        loop {
            let mut used = vec![0u32; n];
            cols.iter().for_each(|&c| used[c] += 1);
            if used.iter().zip(costs.capacities()).all(|(u, c)| u <= c) {
                let value = cols
                    .iter()
                    .enumerate()
                    .fold(0.0, |acc, (i, &j)| acc + row_cost(costs.get(i, j), objective));
                let flat: Vec<u8> = cols.iter().flat_map(|&c| (0..n).map(move |j| u8::from(j == c))).collect();
                let better = match &best {
                    None => true,
                    Some((bv, bx)) => value < *bv || (value == *bv && flat < *bx),
                };
                if better {
                    best = Some((value, flat));
                }
            }
            // Odometer increment.
            let mut k = m;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                cols[k] += 1;
                if cols[k] < n {
                    break;
                }
                cols[k] = 0;
            }
        }
    }

    fn flat(a: &Assignment) -> Vec<u8> {
        a.matrix().concat()
    }

    #[test]
    fn forced_single_pair() {
        let c = CostMatrix::new(vec![vec![0.3]], None).unwrap();
        let s = solve(&c, Objective::Sum).unwrap();
        assert_eq!(s.assignment.matrix(), vec![vec![1]]);
        assert_eq!(s.objective, 0.3);
    }

    #[test]
    fn two_by_two_picks_diagonal() {
        let c = CostMatrix::new(vec![vec![0.1, 0.9], vec![0.9, 0.1]], Some(vec![1, 1])).unwrap();
        let s = solve(&c, Objective::Sum).unwrap();
        assert_eq!(s.assignment.columns(), &[0, 1]);
        assert!((s.objective - 0.2).abs() < 1e-15);
        assert_eq!(brute_force(&c, Objective::Sum).unwrap().1, flat(&s.assignment));
    }

    #[test]
    fn two_by_three_example() {
        let c = CostMatrix::new(vec![vec![0.5, 0.2, 0.9], vec![0.4, 0.3, 0.8]], Some(vec![1, 1, 1])).unwrap();
        let s = solve(&c, Objective::Sum).unwrap();
        assert_eq!(s.assignment.columns(), &[1, 0]);
        assert!((s.objective - 0.6).abs() < 1e-15);
        let (bv, bx) = brute_force(&c, Objective::Sum).unwrap();
        assert_eq!(bv, s.objective);
        assert_eq!(bx, flat(&s.assignment));
    }

    #[test]
    fn ties_break_to_lexicographically_smallest_matrix() {
        // All-equal costs: the smallest flattened x puts row 0 in the last
        // column, row 1 in the next free one from the right.
        let c = CostMatrix::new(vec![vec![0.5; 3]; 2], None).unwrap();
        let s = solve(&c, Objective::Sum).unwrap();
        assert_eq!(s.assignment.matrix(), vec![vec![0, 0, 1], vec![0, 1, 0]]);
        assert_eq!(brute_force(&c, Objective::Sum).unwrap().1, flat(&s.assignment));
    }

    #[test]
    fn infeasible_and_invalid_inputs() {
        let c = CostMatrix::new(vec![vec![0.1], vec![0.2]], None).unwrap();
        assert_eq!(
            solve(&c, Objective::Sum),
            Err(MatcherError::Infeasible {
                interfaces: 2,
                capacity: 1
            })
        );
        let c = CostMatrix::new(vec![vec![0.1], vec![0.2]], Some(vec![2])).unwrap();
        assert_eq!(solve(&c, Objective::Sum).unwrap().assignment.columns(), &[0, 0]);
        assert!(matches!(
            CostMatrix::new(vec![vec![1.2]], None),
            Err(MatcherError::InvalidCost { row: 0, col: 0, .. })
        ));
        assert!(CostMatrix::new(vec![vec![0.1, 0.2], vec![0.1]], None).is_err());
        assert!(CostMatrix::new(vec![], None).is_err());
    }

    #[test]
    fn log_product_prefers_smaller_joint_miss() {
        // Sum objective: 0.0+0.5 = 0.5 vs 0.2+0.2 = 0.4. Product: 0 vs 0.04.
        let c = CostMatrix::new(vec![vec![0.0, 0.2], vec![0.2, 0.5]], None).unwrap();
        let sum = solve(&c, Objective::Sum).unwrap();
        assert_eq!(sum.assignment.columns(), &[1, 0]);
        let prod = solve(&c, Objective::LogProduct).unwrap();
        assert_eq!(prod.assignment.columns(), &[0, 1]);
        assert_eq!(joint_miss(&c, &prod.assignment), 0.0);
    }

    #[test]
    fn solver_matches_brute_force_on_random_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA551);
        for case in 0..300 {
            let m = rng.random_range(1..=6);
            let n = rng.random_range(m..=6);
            // Every third case uses coarse values so exact ties are common.
            let eps: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if case % 3 == 0 {
                                f64::from(rng.random_range(0..8u8)) / 8.0
                            } else {
                                rng.random()
                            }
                        })
                        .collect()
                })
                .collect();
            let c = CostMatrix::new(eps, None).unwrap();
            for objective in [Objective::Sum, Objective::LogProduct] {
                let s = solve(&c, objective).unwrap();
                let (bv, bx) = brute_force(&c, objective).unwrap();
                assert_eq!(s.objective, bv, "case {case}");
                assert_eq!(flat(&s.assignment), bx, "case {case}");
            }
        }
    }

    #[test]
    fn capacities_above_one_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(1..=3);
            let caps: Vec<u32> = (0..n).map(|_| rng.random_range(0..=3)).collect();
            let total: u32 = caps.iter().sum();
            if total == 0 {
                continue;
            }
            let m = rng.random_range(1..=total.min(5)) as usize;
            let eps = (0..m)
                .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..4u8)) / 4.0).collect())
                .collect();
            let c = CostMatrix::new(eps, Some(caps)).unwrap();
            let s = solve(&c, Objective::Sum).unwrap();
            assert!(s.assignment.is_feasible_for(&c));
            let (bv, bx) = brute_force(&c, Objective::Sum).unwrap();
            assert_eq!((s.objective, flat(&s.assignment)), (bv, bx));
        }
    }

    #[test]
    fn rematch_examples() {
        let prev_costs = CostMatrix::new(vec![vec![0.5, 0.2, 0.9], vec![0.4, 0.3, 0.8]], None).unwrap();
        let prev = solve(&prev_costs, Objective::Sum).unwrap().assignment;

        // Identical costs, previous optimal: kept under any positive hysteresis.
        let kept = rematch(&prev, &prev_costs, 0.05, Objective::Sum).unwrap();
        assert_eq!(kept.assignment, prev);

        // Previous scores 0.6 under fresh costs, fresh optimum 0.3.
        let fresh = CostMatrix::new(vec![vec![0.1, 0.2, 0.9], vec![0.4, 0.3, 0.2]], None).unwrap();
        assert!((objective_value(&fresh, &prev, Objective::Sum).unwrap() - 0.6).abs() < 1e-12);
        let moved = rematch(&prev, &fresh, 0.1, Objective::Sum).unwrap();
        assert_eq!(moved.assignment.columns(), &[0, 2]);
        assert!((moved.objective - 0.3).abs() < 1e-12);

        // Large hysteresis keeps the old mapping.
        let sticky = rematch(&prev, &fresh, 0.5, Objective::Sum).unwrap();
        assert_eq!(sticky.assignment, prev);

        // Zero hysteresis always takes the fresh optimum.
        assert_eq!(rematch(&prev, &fresh, 0.0, Objective::Sum).unwrap().assignment.columns(), &[0, 2]);

        let wrong = CostMatrix::new(vec![vec![0.1, 0.2]], None).unwrap();
        assert!(matches!(
            rematch(&prev, &wrong, 0.0, Objective::Sum),
            Err(MatcherError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn matcher_tracks_current_solution() {
        let mut matcher = Matcher::new(Objective::Sum, 0.1);
        let a = CostMatrix::new(vec![vec![0.1, 0.9], vec![0.9, 0.1]], None).unwrap();
        assert_eq!(matcher.update(&a).unwrap().assignment.columns(), &[0, 1]);
        // Slightly better alternative, below hysteresis.
        let b = CostMatrix::new(vec![vec![0.1, 0.08], vec![0.1, 0.1]], None).unwrap();
        assert_eq!(matcher.update(&b).unwrap().assignment.columns(), &[0, 1]);
        assert_eq!(matcher.current().unwrap().assignment.columns(), &[0, 1]);
    }

    fn sample_set(network: Vec<f64>, compute: Vec<f64>, deadline: f64) -> PathSampleSet {
        PathSampleSet {
            network_samples: vec![vec![network]],
            compute_samples: vec![compute],
            deadline_ms: deadline,
            capacities: None,
        }
    }

    #[test]
    fn estimate_costs_examples() {
        assert_eq!(estimate_costs(&sample_set(vec![5.0], vec![10.0], 20.0)).unwrap().get(0, 0), 0.0);
        assert_eq!(estimate_costs(&sample_set(vec![5.0], vec![30.0], 20.0)).unwrap().get(0, 0), 1.0);
        // Sums: 15, 25, 25, 35; only 35 exceeds 25.
        assert_eq!(
            estimate_costs(&sample_set(vec![5.0, 15.0], vec![10.0, 20.0], 25.0))
                .unwrap()
                .get(0, 0),
            0.25
        );
    }

    #[test]
    fn estimate_costs_errors() {
        assert!(matches!(
            estimate_costs(&sample_set(vec![], vec![1.0], 5.0)),
            Err(MatcherError::EmptySamples(_))
        ));
        assert!(matches!(
            estimate_costs(&sample_set(vec![1.0], vec![], 5.0)),
            Err(MatcherError::EmptySamples(_))
        ));
        assert!(matches!(
            estimate_costs(&sample_set(vec![1.0], vec![1.0], 0.0)),
            Err(MatcherError::InvalidSamples(_))
        ));
        assert!(matches!(
            estimate_costs(&sample_set(vec![-1.0], vec![1.0], 5.0)),
            Err(MatcherError::InvalidSamples(_))
        ));
    }

    proptest! {
        #[test]
        fn estimate_matches_enumeration_and_ignores_order(
            mut net in proptest::collection::vec(0.0f64..50.0, 1..12),
            mut comp in proptest::collection::vec(0.0f64..50.0, 1..12),
            deadline in 1.0f64..100.0,
        ) {
            let total = net.len() * comp.len();
            let misses = net.iter().flat_map(|a| comp.iter().map(move |b| a + b)).filter(|s| *s > deadline).count();
            let expected = misses as f64 / total as f64;
            let got = estimate_costs(&sample_set(net.clone(), comp.clone(), deadline)).unwrap().get(0, 0);
            prop_assert_eq!(got, expected);
            net.reverse();
            comp.rotate_left(1);
            prop_assert_eq!(estimate_costs(&sample_set(net, comp, deadline)).unwrap().get(0, 0), expected);
        }

        #[test]
        fn solution_is_feasible_and_scale_invariant(
            eps in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 5), 1..5),
            scale in 0.01f64..1.0,
        ) {
            let c = CostMatrix::new(eps.clone(), None).unwrap();
            let s = solve(&c, Objective::Sum).unwrap();
            prop_assert!(s.assignment.is_feasible_for(&c));
            let mut sums = [0u32; 5];
            s.assignment.columns().iter().for_each(|&j| sums[j] += 1);
            prop_assert!(sums.iter().all(|&u| u <= 1));
            let scaled = CostMatrix::new(eps.iter().map(|r| r.iter().map(|e| e * scale).collect()).collect(), None).unwrap();
            let s2 = solve(&scaled, Objective::Sum).unwrap();
            // Scaling can only reorder objectives that were within rounding.
            let a = objective_value(&c, &s2.assignment, Objective::Sum).unwrap();
            prop_assert!((a - s.objective).abs() < 1e-12);
        }
    }
}
