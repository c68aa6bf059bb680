//! The Permutation online algorithm with batch arrivals.
//!
//! The state keeps the incremental solver (whose maintained matching is the
//! offline optimum M*_t) and a separate online matching M_t that is only
//! ever extended: each batch is matched, as a block, to the servers the
//! optimal solution newly brought in. Existing pairs are never changed.

use std::collections::BTreeMap;

use crate::matching::{min_cost_matching, AssignmentProblem, IncrementalSolver, Matching, SolveError};
use crate::metric::Metric;
use crate::{Cost, PointId};

/// Outcome of one batch arrival.
#[derive(Debug, Clone)]
pub struct BatchArrival<C: Cost> {
    /// Servers newly added to the optimal server set, one per batch client,
    /// in insertion order.
    pub new_servers: Vec<PointId>,
    /// Min-cost matching of the batch onto `new_servers`.
    pub local_matching: Matching<C>,
    /// Newly matched clients; Permutation never re-matches.
    pub recourse: usize,
}

pub struct PermutationState<'a, M: Metric> {
    solver: IncrementalSolver<'a, M>,
    metric: &'a M,
    online: BTreeMap<PointId, PointId>,
    batches: usize,
}

impl<'a, M: Metric> PermutationState<'a, M> {
    pub fn new(metric: &'a M, servers: Vec<PointId>) -> Result<Self, SolveError> {
        Ok(PermutationState {
            solver: IncrementalSolver::new(metric, servers)?,
            metric,
            online: BTreeMap::new(),
            batches: 0,
        })
    }

    /// Arrive a nonempty batch of clients. The batch is matched optimally to
    /// the servers the nested offline optimum brings in for it.
    pub fn arrive_batch(&mut self, batch: &[PointId]) -> Result<BatchArrival<M::C>, SolveError> {
        for &c in batch {
            if self.online.contains_key(&c) {
                return Err(SolveError::DuplicateClient(c));
            }
        }
        let mut new_servers = Vec::with_capacity(batch.len());
        for &c in batch {
            new_servers.push(self.solver.add_client(c)?);
        }
        let local = if batch.len() == 1 {
            Matching::new(vec![(batch[0], new_servers[0])], self.metric)
        } else {
            let p = AssignmentProblem::new(batch.to_vec(), new_servers.clone(), self.metric);
            min_cost_matching(&p)?.matching
        };
        for &(c, s) in local.pairs() {
            self.online.insert(c, s);
        }
        self.batches += 1;
        Ok(BatchArrival { new_servers, local_matching: local, recourse: batch.len() })
    }

    /// Single-client arrival: the client is matched to the augmenting path's
    /// terminal server.
    pub fn arrive_one(&mut self, c: PointId) -> Result<(PointId, usize), SolveError> {
        let out = self.arrive_batch(&[c])?;
        Ok((out.new_servers[0], 1))
    }

    pub fn num_clients(&self) -> usize {
        self.solver.num_clients()
    }

    pub fn num_batches(&self) -> usize {
        self.batches
    }

    /// The online matching M_t.
    pub fn online_matching(&self) -> Matching<M::C> {
        let pairs: Vec<(PointId, PointId)> = self.online.iter().map(|(&c, &s)| (c, s)).collect();
        Matching::new(pairs, self.metric)
    }

    pub fn online_pairs(&self) -> &BTreeMap<PointId, PointId> {
        &self.online
    }

    /// Cost of the offline optimum OPT_t, maintained incrementally.
    pub fn opt_cost(&self) -> M::C {
        self.solver.opt_cost()
    }

    /// The offline optimal matching M*_t.
    pub fn offline_matching(&self) -> Matching<M::C> {
        self.solver.optimal_matching()
    }

    /// Used server set S*_t, sorted by id.
    pub fn used_servers(&self) -> Vec<PointId> {
        self.solver.used_servers()
    }

    pub fn metric(&self) -> &'a M {
        self.metric
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::is_server_optimal;
    use crate::metric::LineMetric;

    #[test]
    fn single_client_single_server() {
        let m = LineMetric::new(vec![0, 5]).unwrap();
        let mut st = PermutationState::new(&m, vec![PointId(1)]).unwrap();
        let (s, rec) = st.arrive_one(PointId(0)).unwrap();
        assert_eq!(s, PointId(1));
        assert_eq!(rec, 1);
        assert_eq!(st.online_matching().cost(), 5);
    }

    #[test]
    fn two_arrivals_nest() {
        // clients at 0 and 1, servers at 2 and 3
        let m = LineMetric::new(vec![0, 1, 2, 3]).unwrap();
        let mut st = PermutationState::new(&m, vec![PointId(2), PointId(3)]).unwrap();
        let (s1, _) = st.arrive_one(PointId(0)).unwrap();
        assert_eq!(s1, PointId(2));
        let used_before = st.used_servers();
        let (s2, _) = st.arrive_one(PointId(1)).unwrap();
        assert_eq!(s2, PointId(3));
        let used_after = st.used_servers();
        assert!(used_before.iter().all(|s| used_after.contains(s)));

        let p = AssignmentProblem::new(vec![PointId(0), PointId(1)], vec![PointId(2), PointId(3)], &m);
        assert!(is_server_optimal(&st.online_matching(), &p).unwrap());
    }

    #[test]
    fn duplicate_arrival_rejected() {
        let m = LineMetric::new(vec![0, 2, 3]).unwrap();
        let mut st = PermutationState::new(&m, vec![PointId(1), PointId(2)]).unwrap();
        st.arrive_one(PointId(0)).unwrap();
        assert!(matches!(st.arrive_one(PointId(0)), Err(SolveError::DuplicateClient(_))));
    }

    #[test]
    fn batch_cost_bound_holds() {
        // per-batch local matching costs at most 2 * OPT after the batch
        let m = LineMetric::new(vec![3, -4, 10, -11, 0, 6, -6, 14]).unwrap();
        let servers: Vec<PointId> = (4..8).map(PointId).collect();
        let mut st = PermutationState::new(&m, servers).unwrap();
        let out = st.arrive_batch(&[PointId(0), PointId(1)]).unwrap();
        let two_opt = st.opt_cost() + st.opt_cost();
        assert!(out.local_matching.cost() <= two_opt);
        let out = st.arrive_batch(&[PointId(2), PointId(3)]).unwrap();
        let two_opt = st.opt_cost() + st.opt_cost();
        assert!(out.local_matching.cost() <= two_opt);
    }
}
