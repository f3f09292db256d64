//! History-indexed search tree.
//!
//! Each node is one simulated history ending in a state. Edges are joint
//! (query, action) choices. A query edge branches on the observed reward and
//! the successor; a silent edge branches on the successor only, since the
//! null reward carries no information.

use rand::Rng;

use crate::env::{ActionPair, MdpLayout};

pub type NodeId = u32;
pub type EdgeId = u32;

/// Visit count and sum of backed-up returns.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EdgeStats {
    pub visits: u32,
    pub sum: f64,
}

impl EdgeStats {
    #[inline]
    pub fn record(&mut self, ret: f64) {
        self.visits += 1;
        self.sum += ret;
    }

    /// Mean backed-up return; 0 before the first visit.
    #[inline]
    pub fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.sum / f64::from(self.visits)
        }
    }

    /// Combines statistics gathered separately.
    pub fn merge(&mut self, other: EdgeStats) {
        self.visits += other.visits;
        self.sum += other.sum;
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub pair: ActionPair,
    pub stats: EdgeStats,
    children: Vec<(u32, NodeId)>,
}

impl Edge {
    pub fn new(pair: ActionPair, stats: EdgeStats) -> Self {
        Edge {
            pair,
            stats,
            children: Vec::new(),
        }
    }

    /// Child keys paired with their nodes.
    pub fn children(&self) -> &[(u32, NodeId)] {
        &self.children
    }
}

/// Key of the child reached through `pair`: (success, successor) for queries,
/// successor alone otherwise.
#[inline]
pub fn child_key(pair: ActionPair, success: bool, raw_next: usize) -> u32 {
    let next = raw_next as u32;
    if pair.query {
        next * 2 + u32::from(success)
    } else {
        next
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub state: usize,
    pub episode_step: usize,
    pub depth: usize,
    /// Number of edge selections made here; equals the sum of edge visits.
    pub visits: u32,
    pending_sum: f64,
    pending_count: u32,
    /// Mean of the rollouts accumulated before expansion.
    pub value: f64,
    expanded: bool,
    first_edge: EdgeId,
    num_edges: u32,
}

impl Node {
    pub fn is_expanded(&self) -> bool {
        self.expanded
    }

    pub fn pending_rollouts(&self) -> u32 {
        self.pending_count
    }
}

#[derive(Clone, Debug, Default)]
pub struct SearchTree {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl SearchTree {
    pub fn new() -> Self {
        SearchTree::default()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.edges.clear();
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id as usize]
    }

    pub fn edge_ids(&self, id: NodeId) -> std::ops::Range<EdgeId> {
        let n = &self.nodes[id as usize];
        n.first_edge..n.first_edge + n.num_edges
    }

    pub fn edges_of(&self, id: NodeId) -> &[Edge] {
        let r = self.edge_ids(id);
        &self.edges[r.start as usize..r.end as usize]
    }

    pub fn add_node(&mut self, state: usize, episode_step: usize, depth: usize) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node {
            state,
            episode_step,
            depth,
            visits: 0,
            pending_sum: 0.0,
            pending_count: 0,
            value: 0.0,
            expanded: false,
            first_edge: 0,
            num_edges: 0,
        });
        id
    }

    /// Creates the edges of `id`: a silent edge per available action and,
    /// when queries are allowed, a query edge per action.
    pub fn expand(&mut self, id: NodeId, layout: &MdpLayout, allow_queries: bool) {
        let first = self.edges.len() as EdgeId;
        let state = self.nodes[id as usize].state;
        for &a in layout.actions(state) {
            self.edges.push(Edge {
                pair: ActionPair::silent(a),
                stats: EdgeStats::default(),
                children: Vec::new(),
            });
            if allow_queries {
                self.edges.push(Edge {
                    pair: ActionPair::queried(a),
                    stats: EdgeStats::default(),
                    children: Vec::new(),
                });
            }
        }
        let node = &mut self.nodes[id as usize];
        node.first_edge = first;
        node.num_edges = self.edges.len() as u32 - first;
        node.expanded = true;
    }

    /// Adds one rollout return to an unexpanded leaf. Once `threshold`
    /// returns have accumulated the leaf is expanded and its value is their
    /// mean. Returns whether the leaf expanded.
    pub fn record_rollout(
        &mut self,
        id: NodeId,
        ret: f64,
        threshold: u32,
        layout: &MdpLayout,
        allow_queries: bool,
    ) -> bool {
        let node = &mut self.nodes[id as usize];
        debug_assert!(!node.expanded);
        node.pending_sum += ret;
        node.pending_count += 1;
        if node.pending_count >= threshold {
            node.value = node.pending_sum / f64::from(node.pending_count);
            self.expand(id, layout, allow_queries);
            true
        } else {
            false
        }
    }

    pub fn child(&self, edge: EdgeId, key: u32) -> Option<NodeId> {
        self.edges[edge as usize]
            .children
            .iter()
            .find(|(k, _)| *k == key)
            .map(|&(_, n)| n)
    }

    pub fn child_or_insert(
        &mut self,
        edge: EdgeId,
        key: u32,
        state: usize,
        episode_step: usize,
        depth: usize,
    ) -> NodeId {
        if let Some(n) = self.child(edge, key) {
            return n;
        }
        let n = self.add_node(state, episode_step, depth);
        self.edges[edge as usize].children.push((key, n));
        n
    }

    pub(crate) fn note_selection(&mut self, id: NodeId) {
        self.nodes[id as usize].visits += 1;
    }

    /// Propagates a simulation's return along `path`. Each entry holds the
    /// edge taken and the immediate net reward (reward minus any query cost)
    /// of that step; every edge receives the return from its step onward.
    pub fn backup(&mut self, path: &[(EdgeId, f64)], leaf_return: f64) {
        let mut ret = leaf_return;
        for &(edge, reward) in path.iter().rev() {
            ret += reward;
            self.edges[edge as usize].stats.record(ret);
        }
    }
}

/// UCB score. Unvisited edges score +inf.
#[inline]
pub fn ucb_score(stats: EdgeStats, parent_visits: u32, exploration: f64) -> f64 {
    if stats.visits == 0 {
        f64::INFINITY
    } else {
        stats.mean()
            + exploration * (f64::from(parent_visits).ln() / f64::from(stats.visits)).sqrt()
    }
}

/// Index of the UCB-maximizing edge; ties are broken uniformly at random.
pub fn ucb_select<R: Rng + ?Sized>(
    edges: &[Edge],
    parent_visits: u32,
    exploration: f64,
    rng: &mut R,
) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut chosen = 0;
    let mut ties = 0u32;
    for (i, e) in edges.iter().enumerate() {
        let score = ucb_score(e.stats, parent_visits, exploration);
        if score > best {
            best = score;
            chosen = i;
            ties = 1;
        } else if score == best {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                chosen = i;
            }
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_bandit;
    use crate::rng::seeded;

    fn edge(pair: ActionPair, visits: u32, mean: f64) -> Edge {
        Edge {
            pair,
            stats: EdgeStats {
                visits,
                sum: mean * f64::from(visits),
            },
            children: Vec::new(),
        }
    }

    #[test]
    fn ucb_hand_example() {
        let arms = [
            edge(ActionPair::silent(0), 10, 1.0),
            edge(ActionPair::silent(1), 1, 0.0),
        ];
        let ln11 = 11f64.ln();
        let s0 = ucb_score(arms[0].stats, 11, 3.0);
        let s1 = ucb_score(arms[1].stats, 11, 3.0);
        assert!((s0 - (1.0 + 3.0 * (ln11 / 10.0).sqrt())).abs() < 1e-9);
        assert!((s1 - 3.0 * ln11.sqrt()).abs() < 1e-9);
        assert!((s1 - 4.6455).abs() < 1e-3 && (s0 - 2.4690).abs() < 1e-3);
        assert_eq!(ucb_select(&arms, 11, 3.0, &mut seeded(0)), 1);
    }

    #[test]
    fn ucb_greedy_without_exploration() {
        let arms = [
            edge(ActionPair::silent(0), 3, 0.2),
            edge(ActionPair::queried(0), 50, 0.7),
            edge(ActionPair::silent(1), 9, 0.4),
        ];
        assert_eq!(ucb_select(&arms, 62, 0.0, &mut seeded(0)), 1);
    }

    #[test]
    fn ucb_unvisited_ties_are_uniform() {
        let arms: Vec<Edge> = (0..4)
            .map(|a| edge(ActionPair::silent(a), 0, 0.0))
            .collect();
        let mut counts = [0usize; 4];
        let mut rng = seeded(3);
        for _ in 0..8000 {
            counts[ucb_select(&arms, 0, 1.0, &mut rng)] += 1;
        }
        assert!(
            counts.iter().all(|&c| (1800..2200).contains(&c)),
            "{counts:?}"
        );
    }

    #[test]
    fn thousand_backups_average_exactly() {
        use rand::Rng;
        let mut rng = seeded(8);
        let returns: Vec<f64> = (0..1000).map(|_| rng.random_range(-3.0..10.0)).collect();
        let mut s = EdgeStats::default();
        for &r in &returns {
            s.record(r);
        }
        let mut total = 0.0;
        for r in &returns {
            total += r;
        }
        assert_eq!(s.visits, 1000);
        assert_eq!(s.mean(), total / 1000.0);
    }

    #[test]
    fn merged_stats_match_sequential() {
        let mut a = EdgeStats::default();
        let mut b = EdgeStats::default();
        let mut all = EdgeStats::default();
        for (i, r) in [1.0, 0.5, 2.0, 0.0, 1.5].into_iter().enumerate() {
            all.record(r);
            if i < 2 {
                a.record(r)
            } else {
                b.record(r)
            }
        }
        a.merge(b);
        assert_eq!(a, all);
    }

    #[test]
    fn running_mean_backup() {
        let mut s = EdgeStats::default();
        s.record(2.0);
        assert_eq!((s.visits, s.mean()), (1, 2.0));
        s.record(4.0);
        assert_eq!((s.visits, s.mean()), (2, 3.0));
    }

    #[test]
    fn backup_passes_suffix_returns() {
        let problem = make_bandit(&[0.5], 3, 0.5).unwrap();
        let mut tree = SearchTree::new();
        let root = tree.add_node(0, 0, 0);
        tree.expand(root, problem.layout(), true);
        let child = tree.child_or_insert(1, child_key(ActionPair::queried(0), true, 0), 0, 0, 1);
        tree.expand(child, problem.layout(), true);
        let child_edges = tree.edge_ids(child);
        // root takes the query edge (reward 1 - 0.5), child the silent edge
        // (reward 1), leaf rollout returns 2.
        tree.backup(&[(1, 0.5), (child_edges.start, 1.0)], 2.0);
        assert_eq!(tree.edge(child_edges.start).stats.mean(), 3.0);
        assert_eq!(tree.edge(1).stats.mean(), 3.5);
    }

    #[test]
    fn delayed_expansion_counter() {
        let problem = make_bandit(&[0.5, 0.5], 3, 0.5).unwrap();
        let mut tree = SearchTree::new();
        let leaf = tree.add_node(0, 0, 1);
        for i in 0..7 {
            assert!(!tree.record_rollout(leaf, f64::from(i), 8, problem.layout(), true));
        }
        assert!(tree.record_rollout(leaf, 7.0, 8, problem.layout(), true));
        assert!(tree.node(leaf).is_expanded());
        assert_eq!(tree.node(leaf).value, 3.5);
        assert_eq!(tree.edges_of(leaf).len(), 4);

        let first = tree.add_node(0, 0, 1);
        assert!(tree.record_rollout(first, 1.25, 1, problem.layout(), false));
        assert_eq!(tree.edges_of(first).len(), 2);
    }

    #[test]
    fn child_keys_separate_reward_outcomes() {
        let q = ActionPair::queried(0);
        let s = ActionPair::silent(0);
        assert_ne!(child_key(q, true, 3), child_key(q, false, 3));
        assert_eq!(child_key(s, true, 3), child_key(s, false, 3));
    }
}
