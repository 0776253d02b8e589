//! Tree search over the simulated MDP.
//!
//! The tree lives in an arena. Each simulation selects a path with
//! `argmax Q̄(s,a) + α·√N(s)/(1+N(s,a))`, expands the leaf with one child per
//! action, and backs up discounted returns along the path. `Q̄` is `Q`
//! min-max normalized over every edge in the tree. Edge values are running
//! means whose first sample is the immediate reward the edge was
//! initialized with.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, PlannerError};
use crate::forecast::NrvForecast;
use crate::system::{MarketModel, RewardConfig, SystemState};

/// A deterministic MDP the planner can search.
///
/// `actions` must return actions in canonical order (ascending price);
/// ties in selection and in the final choice go to the earliest action.
pub trait SimEnv {
    type State: Clone;

    fn actions(&self, state: &Self::State) -> Vec<f64>;
    fn is_terminal(&self, state: &Self::State) -> bool;
    /// Next state and immediate reward.
    fn step(&self, state: &Self::State, action: f64) -> Result<(Self::State, f64), ModelError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub simulations: usize,
    /// Exploration weight α.
    pub exploration: f64,
    /// Discount γ.
    pub discount: f64,
    /// Action discretization width.
    pub k_neighbors: usize,
    /// Recorded with results; the search itself draws no random numbers.
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            simulations: 200,
            exploration: 1.0,
            discount: 0.99,
            k_neighbors: 2,
            seed: 0,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.simulations == 0 {
            return Err(PlannerError::Params("simulations must be at least 1".into()));
        }
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return Err(PlannerError::Params("exploration must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(PlannerError::Params("discount must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub action: f64,
    pub child: usize,
    pub visits: u64,
    /// Immediate reward ρ(s,a).
    pub reward: f64,
    value_sum: f64,
}

impl Edge {
    /// Running mean of backed-up returns, or ρ(s,a) before the first visit.
    pub fn q(&self) -> f64 {
        if self.visits == 0 {
            self.reward
        } else {
            self.value_sum / self.visits as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node<S> {
    pub state: S,
    pub visits: u64,
    /// `None` until expanded.
    pub edges: Option<Vec<Edge>>,
    pub terminal: bool,
}

/// One selected `(node, edge index)` step.
pub type PathStep = (usize, usize);

#[derive(Debug, Clone)]
pub struct SearchTree<S> {
    nodes: Vec<Node<S>>,
    q_min: f64,
    q_max: f64,
}

pub const ROOT: usize = 0;

impl<S: Clone> SearchTree<S> {
    pub fn new<E: SimEnv<State = S>>(env: &E, root: S) -> Self {
        let terminal = env.is_terminal(&root);
        Self {
            nodes: vec![Node {
                state: root,
                visits: 0,
                edges: None,
                terminal,
            }],
            q_min: f64::INFINITY,
            q_max: f64::NEG_INFINITY,
        }
    }

    pub fn node(&self, id: usize) -> Result<&Node<S>, PlannerError> {
        self.nodes.get(id).ok_or(PlannerError::NoSuchNode(id))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_edges(&self) -> &[Edge] {
        self.nodes[ROOT].edges.as_deref().unwrap_or(&[])
    }

    /// Min-max normalized Q over the whole tree.
    pub fn normalized_q(&self, q: f64) -> f64 {
        if self.q_max > self.q_min {
            (q - self.q_min) / (self.q_max - self.q_min)
        } else {
            0.5
        }
    }

    fn refresh_bounds(&mut self) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for e in self.nodes.iter().filter_map(|n| n.edges.as_ref()).flatten() {
            let q = e.q();
            lo = lo.min(q);
            hi = hi.max(q);
        }
        self.q_min = lo;
        self.q_max = hi;
    }

    /// Descends from the root by the selection score until reaching a node
    /// that is unexpanded or terminal.
    pub fn select_path(&self, exploration: f64) -> Vec<PathStep> {
        let mut path = Vec::new();
        let mut id = ROOT;
        loop {
            let node = &self.nodes[id];
            let edges = match &node.edges {
                Some(e) if !node.terminal && !e.is_empty() => e,
                _ => return path,
            };
            let sqrt_n = (node.visits as f64).sqrt();
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, e) in edges.iter().enumerate() {
                let score =
                    self.normalized_q(e.q()) + exploration * sqrt_n / (1.0 + e.visits as f64);
                if score > best_score {
                    best = i;
                    best_score = score;
                }
            }
            path.push((id, best));
            id = edges[best].child;
        }
    }

    /// Node reached by following `path` from the root.
    pub fn leaf_of(&self, path: &[PathStep]) -> usize {
        match path.last() {
            Some(&(node, edge)) => self.nodes[node].edges.as_ref().expect("path edge exists")[edge].child,
            None => ROOT,
        }
    }

    /// Adds one child per action. Terminal nodes are left without children.
    pub fn expand<E: SimEnv<State = S>>(&mut self, env: &E, id: usize) -> Result<(), PlannerError> {
        let node = self.nodes.get(id).ok_or(PlannerError::NoSuchNode(id))?;
        if node.edges.is_some() {
            return Err(PlannerError::AlreadyExpanded(id));
        }
        if node.terminal {
            self.nodes[id].edges = Some(Vec::new());
            return Ok(());
        }
        let state = node.state.clone();
        let actions = env.actions(&state);
        let mut edges = Vec::with_capacity(actions.len());
        for action in actions {
            let (next, reward) = env.step(&state, action)?;
            let terminal = env.is_terminal(&next);
            let child = self.nodes.len();
            self.nodes.push(Node {
                state: next,
                visits: 0,
                edges: None,
                terminal,
            });
            self.q_min = self.q_min.min(reward);
            self.q_max = self.q_max.max(reward);
            edges.push(Edge {
                action,
                child,
                visits: 0,
                reward,
                value_sum: 0.0,
            });
        }
        self.nodes[id].edges = Some(edges);
        Ok(())
    }

    /// Backs up `ρ_k + γ·G_{k+1}` into every edge of `path`, deepest first.
    pub fn backpropagate(&mut self, path: &[PathStep], discount: f64) {
        let leaf = self.leaf_of(path);
        self.nodes[leaf].visits += 1;
        let mut ret = 0.0;
        for &(id, ei) in path.iter().rev() {
            let node = &mut self.nodes[id];
            node.visits += 1;
            let edge = &mut node.edges.as_mut().expect("path edge exists")[ei];
            let sample = edge.reward + discount * ret;
            edge.value_sum += sample;
            edge.visits += 1;
            ret = sample;
        }
        self.refresh_bounds();
    }

    /// Root action with the highest raw Q; ties go to the earliest action.
    pub fn best_action(&self) -> Option<f64> {
        let mut best: Option<&Edge> = None;
        for e in self.root_edges() {
            if best.is_none_or(|b| e.q() > b.q()) {
                best = Some(e);
            }
        }
        best.map(|e| e.action)
    }

    /// Runs one select/expand/backpropagate iteration and returns the path.
    pub fn simulate<E: SimEnv<State = S>>(
        &mut self,
        env: &E,
        params: &SearchParams,
    ) -> Result<Vec<PathStep>, PlannerError> {
        let path = self.select_path(params.exploration);
        let leaf = self.leaf_of(&path);
        if self.nodes[leaf].edges.is_none() {
            self.expand(env, leaf)?;
        }
        self.backpropagate(&path, params.discount);
        Ok(path)
    }
}

/// Result of one planning call.
#[derive(Debug, Clone)]
pub struct PlanOutcome<S> {
    pub action: f64,
    pub tree: SearchTree<S>,
    /// Selected path of every simulation, in order.
    pub paths: Vec<Vec<PathStep>>,
}

/// Builds a fresh tree at `root`, expands it, runs `params.simulations`
/// iterations and returns the outcome including the tree.
pub fn search<E: SimEnv>(
    env: &E,
    root: E::State,
    params: &SearchParams,
) -> Result<PlanOutcome<E::State>, PlannerError> {
    params.validate()?;
    let mut tree = SearchTree::new(env, root);
    if tree.nodes[ROOT].terminal {
        return Err(PlannerError::Model(ModelError::Closed(0)));
    }
    tree.expand(env, ROOT)?;
    let mut paths = Vec::with_capacity(params.simulations);
    for _ in 0..params.simulations {
        paths.push(tree.simulate(env, params)?);
    }
    let action = tree
        .best_action()
        .ok_or_else(|| PlannerError::Params("root has no actions".into()))?;
    Ok(PlanOutcome { action, tree, paths })
}

/// Price to publish at `root`, planning on `env`.
pub fn plan<E: SimEnv>(env: &E, root: E::State, params: &SearchParams) -> Result<f64, PlannerError> {
    search(env, root, params).map(|o| o.action)
}

/// The simulated market MDP seen by the planner at one decision minute.
#[derive(Debug, Clone)]
pub struct SimulatedMarket<'a> {
    pub model: &'a MarketModel,
    pub forecast: &'a NrvForecast,
    pub gamma_resp: f64,
    pub reward: &'a RewardConfig,
    pub k_neighbors: usize,
}

impl SimEnv for SimulatedMarket<'_> {
    type State = SystemState;

    fn actions(&self, state: &SystemState) -> Vec<f64> {
        self.model.discretize_actions(state, self.k_neighbors).prices
    }

    fn is_terminal(&self, state: &SystemState) -> bool {
        state.closed
    }

    fn step(&self, state: &SystemState, action: f64) -> Result<(SystemState, f64), ModelError> {
        let t = self
            .model
            .transition_sim(state, action, self.forecast, self.gamma_resp)?;
        let r = self.model.step_reward(self.reward, state, action, &t);
        Ok((t.next, r))
    }
}
