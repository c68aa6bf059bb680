//! Base-d block re-batching on top of Permutation.
//!
//! On the t-th arrival the latest d^i(t) clients are un-matched (i(t) the
//! largest exponent with d^i | t) and reintroduced as a single batch, so the
//! maintained matching always equals Permutation fed the base-d block
//! decomposition of t.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::matching::{min_cost_matching, AssignmentProblem, IncrementalSolver, Matching, SolveError};
use crate::metric::Metric;
use crate::PointId;

#[derive(Debug, Error)]
pub enum BatchPermError {
    #[error("block exponent undefined for t = 0")]
    ZeroTime,
    #[error("batch base must be at least 2, got {0}")]
    BadBase(u32),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Largest `i` such that `d^i` divides `t`.
pub fn block_exponent(t: u64, d: u32) -> Result<u32, BatchPermError> {
    if t == 0 {
        return Err(BatchPermError::ZeroTime);
    }
    if d < 2 {
        return Err(BatchPermError::BadBase(d));
    }
    let d = d as u64;
    let mut i = 0;
    let mut t = t;
    while t % d == 0 {
        t /= d;
        i += 1;
    }
    Ok(i)
}

/// Batch sizes of the base-d block decomposition of `t`, most significant
/// first: digit `k_j` contributes `k_j` batches of size `d^j`.
pub fn block_decomposition(t: u64, d: u32) -> Vec<u64> {
    let d = d as u64;
    let mut digits = Vec::new();
    let mut rest = t;
    while rest > 0 {
        digits.push(rest % d);
        rest /= d;
    }
    let mut out = Vec::new();
    for (j, &kj) in digits.iter().enumerate().rev() {
        let size = d.pow(j as u32);
        for _ in 0..kj {
            out.push(size);
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Checkpoint {
    online: BTreeMap<PointId, PointId>,
    used_slots: BTreeSet<usize>,
}

/// Per-arrival report.
#[derive(Debug, Clone)]
pub struct BatchPermStep {
    /// Clients whose server changed this step, plus the new client.
    pub recourse: usize,
    /// Previously matched clients whose server changed.
    pub rematched: Vec<PointId>,
}

pub struct BatchPermState<'a, M: Metric> {
    solver: IncrementalSolver<'a, M>,
    metric: &'a M,
    d: u32,
    t: u64,
    arrivals: Vec<PointId>,
    online: BTreeMap<PointId, PointId>,
    checkpoints: BTreeMap<u64, Checkpoint>,
    rematch_counts: BTreeMap<PointId, u64>,
    total_recourse: u64,
}

impl<'a, M: Metric> BatchPermState<'a, M> {
    pub fn new(metric: &'a M, servers: Vec<PointId>, d: u32) -> Result<Self, BatchPermError> {
        if d < 2 {
            return Err(BatchPermError::BadBase(d));
        }
        let mut checkpoints = BTreeMap::new();
        checkpoints.insert(0, Checkpoint { online: BTreeMap::new(), used_slots: BTreeSet::new() });
        Ok(BatchPermState {
            solver: IncrementalSolver::new(metric, servers)?,
            metric,
            d,
            t: 0,
            arrivals: Vec::new(),
            online: BTreeMap::new(),
            checkpoints,
            rematch_counts: BTreeMap::new(),
            total_recourse: 0,
        })
    }

    pub fn arrive(&mut self, c: PointId) -> Result<BatchPermStep, BatchPermError> {
        if self.online.contains_key(&c) {
            return Err(BatchPermError::Solve(SolveError::DuplicateClient(c)));
        }
        self.t += 1;
        self.arrivals.push(c);
        let i = block_exponent(self.t, self.d)?;
        let block_len = (self.d as u64).pow(i);
        let t0 = self.t - block_len;

        self.solver.add_client(c)?;
        let cp = self.checkpoints.get(&t0).expect("checkpoint for block start is retained").clone();
        let new_slots: Vec<usize> = self
            .solver
            .used_slots()
            .into_iter()
            .filter(|slot| !cp.used_slots.contains(slot))
            .collect();
        let block: Vec<PointId> = self.arrivals[t0 as usize..].to_vec();
        debug_assert_eq!(new_slots.len(), block.len());

        let local = if block.len() == 1 {
            Matching::new(vec![(block[0], self.solver.server_point(new_slots[0]))], self.metric)
        } else {
            let servers: Vec<PointId> = new_slots.iter().map(|&j| self.solver.server_point(j)).collect();
            let p = AssignmentProblem::new(block.clone(), servers, self.metric);
            min_cost_matching(&p)?.matching
        };

        let mut next = cp.online.clone();
        for &(cl, sv) in local.pairs() {
            next.insert(cl, sv);
        }

        let mut rematched = Vec::new();
        for &cl in &block {
            let before = self.online.get(&cl);
            let after = next.get(&cl);
            if before.is_some() && before != after {
                rematched.push(cl);
                *self.rematch_counts.entry(cl).or_insert(0) += 1;
            }
        }
        let recourse = rematched.len() + 1;
        self.total_recourse += recourse as u64;
        self.online = next;

        let used: BTreeSet<usize> = self.solver.used_slots().into_iter().collect();
        self.checkpoints.insert(self.t, Checkpoint { online: self.online.clone(), used_slots: used });
        self.prune_checkpoints();
        Ok(BatchPermStep { recourse, rematched })
    }

    /// Only block-boundary checkpoints can be reverted to later: the base-d
    /// prefix truncations of the current time.
    fn prune_checkpoints(&mut self) {
        let mut keep = BTreeSet::new();
        keep.insert(0u64);
        let mut p = 1u64;
        loop {
            keep.insert(self.t / p * p);
            match p.checked_mul(self.d as u64) {
                Some(next) if next <= self.t => p = next,
                _ => break,
            }
        }
        self.checkpoints.retain(|k, _| keep.contains(k));
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn online_matching(&self) -> Matching<M::C> {
        let pairs: Vec<(PointId, PointId)> = self.online.iter().map(|(&c, &s)| (c, s)).collect();
        Matching::new(pairs, self.metric)
    }

    pub fn online_pairs(&self) -> &BTreeMap<PointId, PointId> {
        &self.online
    }

    pub fn opt_cost(&self) -> M::C {
        self.solver.opt_cost()
    }

    pub fn total_recourse(&self) -> u64 {
        self.total_recourse
    }

    /// Rematch count per client, excluding the initial match.
    pub fn rematch_counts(&self) -> &BTreeMap<PointId, u64> {
        &self.rematch_counts
    }

    pub fn max_client_rematches(&self) -> u64 {
        self.rematch_counts.values().copied().max().unwrap_or(0)
    }

    pub fn live_checkpoints(&self) -> usize {
        self.checkpoints.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::LineMetric;
    use crate::permutation::PermutationState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_exponents() {
        assert_eq!(block_exponent(12, 2).unwrap(), 2);
        assert_eq!(block_exponent(11, 2).unwrap(), 0);
        assert_eq!(block_exponent(27, 3).unwrap(), 3);
        assert!(matches!(block_exponent(0, 2), Err(BatchPermError::ZeroTime)));
    }

    #[test]
    fn decomposition_of_eleven_is_8_2_1() {
        assert_eq!(block_decomposition(11, 2), vec![8, 2, 1]);
        assert_eq!(block_decomposition(1, 2), vec![1]);
        assert_eq!(block_decomposition(6, 3), vec![3, 3]);
    }

    fn random_line(rng: &mut ChaCha8Rng, n: usize) -> LineMetric {
        let mut coords = std::collections::BTreeSet::new();
        while coords.len() < n {
            coords.insert(rng.gen_range(-100_000i64..100_000));
        }
        let mut v: Vec<i64> = coords.into_iter().collect();
        for i in (1..v.len()).rev() {
            v.swap(i, rng.gen_range(0..=i));
        }
        LineMetric::new(v).unwrap()
    }

    /// The maintained matching equals a fresh Permutation run fed the block
    /// decomposition, pair for pair.
    #[test]
    fn equivalent_to_block_fed_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &d in &[2u32, 3] {
            let k = 20;
            let m = random_line(&mut rng, 2 * k);
            let servers: Vec<PointId> = (k as u32..2 * k as u32).map(PointId).collect();
            let clients: Vec<PointId> = (0..k as u32).map(PointId).collect();
            let mut bp = BatchPermState::new(&m, servers.clone(), d).unwrap();
            for (idx, &c) in clients.iter().enumerate() {
                bp.arrive(c).unwrap();
                let t = idx as u64 + 1;
                let mut fresh = PermutationState::new(&m, servers.clone()).unwrap();
                let mut fed = 0usize;
                for size in block_decomposition(t, d) {
                    let batch = &clients[fed..fed + size as usize];
                    fresh.arrive_batch(batch).unwrap();
                    fed += size as usize;
                }
                assert_eq!(bp.online_matching().pairs(), fresh.online_matching().pairs(), "t={t} d={d}");
            }
        }
    }

    #[test]
    fn t_equals_one_matches_plain_permutation() {
        let m = LineMetric::new(vec![0, 7, -3]).unwrap();
        let servers = vec![PointId(1), PointId(2)];
        let mut bp = BatchPermState::new(&m, servers.clone(), 2).unwrap();
        let step = bp.arrive(PointId(0)).unwrap();
        assert_eq!(step.recourse, 1);
        let mut perm = PermutationState::new(&m, servers).unwrap();
        perm.arrive_one(PointId(0)).unwrap();
        assert_eq!(bp.online_matching().pairs(), perm.online_matching().pairs());
    }

    #[test]
    fn recourse_accounting_and_checkpoint_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let k = 32u64;
        let m = random_line(&mut rng, 2 * k as usize);
        let servers: Vec<PointId> = (k as u32..2 * k as u32).map(PointId).collect();
        let mut bp = BatchPermState::new(&m, servers, 2).unwrap();
        for c in 0..k as u32 {
            bp.arrive(PointId(c)).unwrap();
            // block boundaries alive at once stay logarithmic
            assert!(bp.live_checkpoints() <= (k as f64).log2() as usize + 3);
        }
        let bound = k as f64 * (1.0 + (k as f64).log2());
        assert!(bp.total_recourse() as f64 <= bound);
        assert!(bp.max_client_rematches() <= (k as f64).log2().ceil() as u64);
    }
}
