//! Matching representation, the exact offline min-cost matching solver and
//! the brute-force oracle used to validate it.
//!
//! The solver inserts clients one at a time via shortest augmenting paths
//! with node potentials. Each prefix of insertions yields an optimal
//! matching whose used-server set extends the previous one by exactly the
//! augmenting path's terminal server, which is what the online algorithms
//! build on.

use thiserror::Error;

use crate::metric::Metric;
use crate::{Cost, PointId};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("infeasible: {clients} clients but only {servers} servers")]
    Infeasible { clients: usize, servers: usize },
    #[error("instance too large for brute force: {clients} clients (max {max})")]
    TooLarge { clients: usize, max: usize },
    #[error("point {0} is out of range (metric has {1} points)")]
    InvalidPoint(PointId, usize),
    #[error("client {0} arrived twice")]
    DuplicateClient(PointId),
}

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("client {0} appears in more than one pair")]
    DuplicateClient(PointId),
    #[error("server {0} appears in more than one pair")]
    DuplicateServer(PointId),
    #[error("cached cost {cached} differs from recomputed cost {actual}")]
    CostMismatch { cached: String, actual: String },
}

/// A partial injective map clients -> servers with its cached total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching<C: Cost> {
    pairs: Vec<(PointId, PointId)>,
    cost: C,
}

impl<C: Cost> Matching<C> {
    pub fn empty() -> Self {
        Matching { pairs: Vec::new(), cost: C::ZERO }
    }

    /// Builds a matching from pairs, computing the cost; pairs are kept
    /// sorted by client id.
    pub fn new<M: Metric<C = C>>(mut pairs: Vec<(PointId, PointId)>, metric: &M) -> Self {
        pairs.sort();
        let mut cost = C::ZERO;
        for &(c, s) in &pairs {
            cost = cost + metric.dist(c, s);
        }
        Matching { pairs, cost }
    }

    pub fn pairs(&self) -> &[(PointId, PointId)] {
        &self.pairs
    }

    pub fn cost(&self) -> C {
        self.cost
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn server_of(&self, c: PointId) -> Option<PointId> {
        self.pairs
            .binary_search_by_key(&c, |&(cl, _)| cl)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    /// Server set, sorted by id.
    pub fn servers(&self) -> Vec<PointId> {
        let mut s: Vec<PointId> = self.pairs.iter().map(|&(_, sv)| sv).collect();
        s.sort();
        s
    }

    /// Client set, sorted by id.
    pub fn clients(&self) -> Vec<PointId> {
        self.pairs.iter().map(|&(c, _)| c).collect()
    }

    /// Checks injectivity on both sides and that the cached cost matches a
    /// recomputation.
    pub fn validate<M: Metric<C = C>>(&self, metric: &M) -> Result<(), MatchingError> {
        for w in self.pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(MatchingError::DuplicateClient(w[0].0));
            }
        }
        let mut servers = self.servers();
        servers.dedup();
        if servers.len() != self.pairs.len() {
            let mut s = self.servers();
            for w in s.windows(2) {
                if w[0] == w[1] {
                    return Err(MatchingError::DuplicateServer(w[0]));
                }
            }
            s.clear();
        }
        let recomputed = matching_cost(self, metric);
        if !recomputed.approx_eq(self.cost) {
            return Err(MatchingError::CostMismatch {
                cached: format!("{}", self.cost),
                actual: format!("{recomputed}"),
            });
        }
        Ok(())
    }
}

/// Exact total distance of a matching under `metric`.
pub fn matching_cost<M: Metric>(m: &Matching<M::C>, metric: &M) -> M::C {
    let mut cost = M::C::ZERO;
    for &(c, s) in m.pairs() {
        cost = cost + metric.dist(c, s);
    }
    cost
}

/// An offline instance: clients to be matched into a (larger) server set.
#[derive(Debug, Clone)]
pub struct AssignmentProblem<'a, M: Metric> {
    pub clients: Vec<PointId>,
    pub servers: Vec<PointId>,
    pub metric: &'a M,
}

impl<'a, M: Metric> AssignmentProblem<'a, M> {
    pub fn new(clients: Vec<PointId>, servers: Vec<PointId>, metric: &'a M) -> Self {
        AssignmentProblem { clients, servers, metric }
    }
}

/// Result of an offline solve: a matching perfect on the clients.
#[derive(Debug, Clone)]
pub struct OptResult<C: Cost> {
    pub matching: Matching<C>,
    pub cost: C,
    /// Servers used by the optimal matching, sorted by id.
    pub used_servers: Vec<PointId>,
}

/// Incremental assignment solver: clients are inserted one at a time and the
/// maintained matching is optimal after every insertion.
///
/// Ties between equal-cost augmenting paths are broken toward the smallest
/// server id at every frontier selection, which makes the whole run
/// deterministic.
pub struct IncrementalSolver<'a, M: Metric> {
    metric: &'a M,
    servers: Vec<PointId>, // sorted ascending by id
    clients: Vec<PointId>, // arrival order
    u: Vec<M::C>,
    v: Vec<M::C>,
    server_match: Vec<Option<usize>>, // server slot -> client index
    client_match: Vec<usize>,         // client index -> server slot
    opt_cost: M::C,
}

impl<'a, M: Metric> IncrementalSolver<'a, M> {
    pub fn new(metric: &'a M, mut servers: Vec<PointId>) -> Result<Self, SolveError> {
        for &s in &servers {
            if s.idx() >= metric.num_points() {
                return Err(SolveError::InvalidPoint(s, metric.num_points()));
            }
        }
        servers.sort();
        let m = servers.len();
        Ok(IncrementalSolver {
            metric,
            servers,
            clients: Vec::new(),
            u: Vec::new(),
            v: vec![M::C::ZERO; m],
            server_match: vec![None; m],
            client_match: Vec::new(),
            opt_cost: M::C::ZERO,
        })
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn clients(&self) -> &[PointId] {
        &self.clients
    }

    pub fn opt_cost(&self) -> M::C {
        self.opt_cost
    }

    /// Inserts a client and reoptimizes along one augmenting path.
    /// Returns the newly used server (the path's terminal).
    pub fn add_client(&mut self, c: PointId) -> Result<PointId, SolveError> {
        if c.idx() >= self.metric.num_points() {
            return Err(SolveError::InvalidPoint(c, self.metric.num_points()));
        }
        let m = self.servers.len();
        if self.clients.len() >= m {
            return Err(SolveError::Infeasible { clients: self.clients.len() + 1, servers: m });
        }
        self.clients.push(c);
        self.u.push(M::C::ZERO);
        self.client_match.push(usize::MAX);
        let row = self.clients.len() - 1;

        // Dijkstra over server slots with reduced costs; slot `m` is the
        // virtual start column carrying the new row.
        let mut minv = vec![M::C::INF; m];
        let mut way = vec![m; m];
        let mut used = vec![false; m + 1];
        let mut j0 = m;
        loop {
            used[j0] = true;
            let i0 = if j0 == m { row } else { self.server_match[j0].expect("used column has a row") };
            let mut delta = M::C::INF;
            let mut j1 = usize::MAX;
            for j in 0..m {
                if used[j] {
                    continue;
                }
                let cur = self.metric.dist(self.clients[i0], self.servers[j]) - self.u[i0] - self.v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert!(j1 != usize::MAX, "some free server is always reachable");
            for j in 0..m {
                if used[j] {
                    let i = self.server_match[j].expect("used column has a row");
                    self.u[i] = self.u[i] + delta;
                    self.v[j] = self.v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            self.u[row] = self.u[row] + delta;
            j0 = j1;
            if self.server_match[j0].is_none() {
                break;
            }
        }

        let new_slot = j0;
        let mut j = j0;
        loop {
            let pj = way[j];
            let i = if pj == m { row } else { self.server_match[pj].expect("path column has a row") };
            self.server_match[j] = Some(i);
            self.client_match[i] = j;
            if pj == m {
                break;
            }
            j = pj;
        }

        let mut cost = M::C::ZERO;
        for (i, &slot) in self.client_match.iter().enumerate() {
            cost = cost + self.metric.dist(self.clients[i], self.servers[slot]);
        }
        self.opt_cost = cost;
        Ok(self.servers[new_slot])
    }

    /// Used server slots in ascending slot order.
    pub fn used_slots(&self) -> Vec<usize> {
        let mut slots: Vec<usize> = self.client_match.iter().copied().collect();
        slots.sort_unstable();
        slots
    }

    /// Used servers, sorted by id.
    pub fn used_servers(&self) -> Vec<PointId> {
        self.used_slots().iter().map(|&j| self.servers[j]).collect()
    }

    pub fn server_point(&self, slot: usize) -> PointId {
        self.servers[slot]
    }

    /// The maintained optimal matching M*_t.
    pub fn optimal_matching(&self) -> Matching<M::C> {
        let pairs: Vec<(PointId, PointId)> = self
            .client_match
            .iter()
            .enumerate()
            .map(|(i, &slot)| (self.clients[i], self.servers[slot]))
            .collect();
        Matching::new(pairs, self.metric)
    }
}

/// Exact offline minimum-cost matching of all clients into the server set.
pub fn min_cost_matching<M: Metric>(p: &AssignmentProblem<M>) -> Result<OptResult<M::C>, SolveError> {
    if p.servers.len() < p.clients.len() {
        return Err(SolveError::Infeasible { clients: p.clients.len(), servers: p.servers.len() });
    }
    let mut solver = IncrementalSolver::new(p.metric, p.servers.clone())?;
    for &c in &p.clients {
        solver.add_client(c)?;
    }
    let matching = solver.optimal_matching();
    Ok(OptResult { cost: matching.cost(), used_servers: matching.servers(), matching })
}

pub const BRUTE_FORCE_MAX_CLIENTS: usize = 9;

/// Exhaustive enumeration over all injections clients -> servers. Independent
/// of the augmenting-path solver; used as its oracle on small instances.
pub fn brute_force_matching<M: Metric>(p: &AssignmentProblem<M>) -> Result<OptResult<M::C>, SolveError> {
    let k = p.clients.len();
    if k > BRUTE_FORCE_MAX_CLIENTS {
        return Err(SolveError::TooLarge { clients: k, max: BRUTE_FORCE_MAX_CLIENTS });
    }
    if p.servers.len() < k {
        return Err(SolveError::Infeasible { clients: k, servers: p.servers.len() });
    }
    for &pt in p.clients.iter().chain(p.servers.iter()) {
        if pt.idx() >= p.metric.num_points() {
            return Err(SolveError::InvalidPoint(pt, p.metric.num_points()));
        }
    }

    struct Search<'s, M: Metric> {
        p: &'s AssignmentProblem<'s, M>,
        taken: Vec<bool>,
        assign: Vec<usize>,
        best_cost: M::C,
        best_assign: Vec<usize>,
    }

    impl<M: Metric> Search<'_, M> {
        fn rec(&mut self, i: usize, cost_so_far: M::C) {
            if !(cost_so_far < self.best_cost) {
                return;
            }
            if i == self.p.clients.len() {
                self.best_cost = cost_so_far;
                self.best_assign = self.assign.clone();
                return;
            }
            for j in 0..self.p.servers.len() {
                if self.taken[j] {
                    continue;
                }
                self.taken[j] = true;
                self.assign[i] = j;
                let d = self.p.metric.dist(self.p.clients[i], self.p.servers[j]);
                self.rec(i + 1, cost_so_far + d);
                self.taken[j] = false;
            }
        }
    }

    let mut search = Search {
        p,
        taken: vec![false; p.servers.len()],
        assign: vec![usize::MAX; k],
        best_cost: M::C::INF,
        best_assign: Vec::new(),
    };
    search.rec(0, M::C::ZERO);
    if k == 0 {
        return Ok(OptResult { matching: Matching::empty(), cost: M::C::ZERO, used_servers: Vec::new() });
    }
    let pairs: Vec<(PointId, PointId)> = search
        .best_assign
        .iter()
        .enumerate()
        .map(|(i, &j)| (p.clients[i], p.servers[j]))
        .collect();
    let matching = Matching::new(pairs, p.metric);
    Ok(OptResult { cost: matching.cost(), used_servers: matching.servers(), matching })
}

/// True iff `m` (a matching of exactly the problem's clients) uses a server
/// set on which the restricted optimum equals the unrestricted optimum.
pub fn is_server_optimal<M: Metric>(m: &Matching<M::C>, p: &AssignmentProblem<M>) -> Result<bool, SolveError> {
    let mut matched = m.clients();
    matched.sort();
    let mut expected = p.clients.clone();
    expected.sort();
    if matched != expected || m.len() != p.clients.len() {
        return Ok(false);
    }
    let unrestricted = min_cost_matching(p)?;
    let restricted_problem = AssignmentProblem::new(p.clients.clone(), m.servers(), p.metric);
    let restricted = min_cost_matching(&restricted_problem)?;
    Ok(restricted.cost.approx_eq(unrestricted.cost))
}
