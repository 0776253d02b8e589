//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;

use imbalance_core::error::ModelError;
use imbalance_core::market::{Bid, BidLadder, Side};
use imbalance_core::mcts::{PlanOutcome, SimEnv, ROOT};
use rand::Rng;

/// Volume grid for random ladders; every sum below stays exact.
pub const SLICE: f64 = 0.25;

pub fn random_ladder<R: Rng>(rng: &mut R, id: u64) -> BidLadder {
    let mut side = |dir: f64| {
        let n = rng.random_range(1..=8);
        let mut price = 100.0 + dir * rng.random_range(0..40) as f64 * 0.5;
        (0..n)
            .map(|_| {
                let b = Bid::new(price, rng.random_range(1..=400) as f64 * 0.5);
                price += dir * rng.random_range(0..60) as f64 * 0.5;
                b
            })
            .collect::<Vec<_>>()
    };
    let inc = side(1.0);
    let dec = side(-1.0);
    BidLadder::new(inc, dec, id).unwrap()
}

/// Random NRV on the slice grid, sometimes past the side capacity.
pub fn random_nrv<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-6000..=6000) as f64 * SLICE
}

/// Owner bid of every `SLICE`-sized piece of a side, in activation order.
fn slices(bids: &[Bid]) -> Vec<usize> {
    bids.iter()
        .enumerate()
        .flat_map(|(i, b)| std::iter::repeat_n(i, (b.volume / SLICE) as usize))
        .collect()
}

/// Marginal bid by slicing the side into unit pieces. Returns
/// `(price, index, saturated)`.
pub fn oracle_marginal(bids: &[Bid], volume: f64) -> (f64, usize, bool) {
    let s = slices(bids);
    let k = ((volume / SLICE).ceil() as usize).max(1);
    if k > s.len() {
        let last = bids.len() - 1;
        (bids[last].price, last, true)
    } else {
        let i = s[k - 1];
        (bids[i].price, i, false)
    }
}

pub fn oracle_activated(ladder: &BidLadder, nrv: f64) -> Vec<Bid> {
    let side = if nrv < 0.0 { Side::Decremental } else { Side::Incremental };
    let bids = ladder.side(side);
    let s = slices(bids);
    let k = ((nrv.abs() / SLICE) as usize).min(s.len());
    let mut vol = vec![0usize; bids.len()];
    for &i in &s[..k] {
        vol[i] += 1;
    }
    vol.iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(i, &n)| Bid::new(bids[i].price, n as f64 * SLICE))
        .collect()
}

pub fn oracle_cost(ladder: &BidLadder, nrv: f64) -> f64 {
    oracle_activated(ladder, nrv)
        .iter()
        .map(|b| b.price * b.volume / 60.0)
        .sum()
}

pub fn oracle_price(avg_si: f64, inst_nrv: f64, ladder: &BidLadder, alpha: f64) -> f64 {
    let mip = oracle_marginal(ladder.incremental(), inst_nrv.max(0.0)).0;
    let mdp = oracle_marginal(ladder.decremental(), (-inst_nrv).max(0.0)).0;
    if avg_si > 0.0 {
        mdp - alpha
    } else if avg_si < 0.0 {
        mip + alpha
    } else {
        ((mdp - alpha) + (mip + alpha)) / 2.0
    }
}

/// Tiny deterministic MDP: state is the action-index history, rewards are a
/// table keyed by the history after the action.
pub struct TableMdp {
    pub depth: usize,
    pub actions: usize,
    pub rewards: HashMap<Vec<usize>, f64>,
}

impl TableMdp {
    /// Rewards on a dyadic grid in `[-1, 0]`.
    pub fn random<R: Rng>(rng: &mut R, depth: usize, actions: usize) -> Self {
        let mut rewards = HashMap::new();
        let mut stack = vec![Vec::new()];
        while let Some(p) = stack.pop() {
            if p.len() == depth {
                continue;
            }
            for a in 0..actions {
                let mut q: Vec<usize> = p.clone();
                q.push(a);
                rewards.insert(q.clone(), -(rng.random_range(0..=16) as f64) / 16.0);
                stack.push(q);
            }
        }
        Self {
            depth,
            actions,
            rewards,
        }
    }
}

impl SimEnv for TableMdp {
    type State = Vec<usize>;

    fn actions(&self, _: &Vec<usize>) -> Vec<f64> {
        (0..self.actions).map(|a| a as f64).collect()
    }

    fn is_terminal(&self, s: &Vec<usize>) -> bool {
        s.len() >= self.depth
    }

    fn step(&self, s: &Vec<usize>, a: f64) -> Result<(Vec<usize>, f64), ModelError> {
        let mut n = s.clone();
        n.push(a as usize);
        let r = self.rewards[&n];
        Ok((n, r))
    }
}

/// Optimal discounted return from `s` and the number of leaves below it.
pub fn enumerate<E: SimEnv>(env: &E, s: &E::State, gamma: f64) -> (f64, usize) {
    if env.is_terminal(s) {
        return (0.0, 1);
    }
    let mut best = f64::NEG_INFINITY;
    let mut leaves = 0;
    for a in env.actions(s) {
        let (next, r) = env.step(s, a).unwrap();
        let (v, l) = enumerate(env, &next, gamma);
        best = best.max(r + gamma * v);
        leaves += l;
    }
    (best, leaves)
}

/// Exhaustive value of each root action, in canonical order.
pub fn root_action_values<E: SimEnv>(env: &E, root: &E::State, gamma: f64) -> Vec<(f64, f64)> {
    env.actions(root)
        .into_iter()
        .map(|a| {
            let (next, r) = env.step(root, a).unwrap();
            (a, r + gamma * enumerate(env, &next, gamma).0)
        })
        .collect()
}

/// Replays the recorded simulation paths by re-stepping the environment
/// from the root and averages the return samples per action prefix.
/// Returns `prefix -> (sample sum, sample count)`.
pub fn replay_q<E: SimEnv>(
    env: &E,
    root: &E::State,
    out: &PlanOutcome<E::State>,
    gamma: f64,
) -> HashMap<Vec<u64>, (f64, u64)> {
    let mut acc: HashMap<Vec<u64>, (f64, u64)> = HashMap::new();
    for path in &out.paths {
        // recover actions of the path, then recompute rewards independently
        let actions: Vec<f64> = path
            .iter()
            .map(|&(node, edge)| out.tree.node(node).unwrap().edges.as_ref().unwrap()[edge].action)
            .collect();
        let mut state = root.clone();
        let mut rewards = Vec::new();
        for &a in &actions {
            let (n, r) = env.step(&state, a).unwrap();
            rewards.push(r);
            state = n;
        }
        let mut g = 0.0;
        for k in (0..actions.len()).rev() {
            let sample = rewards[k] + gamma * g;
            let key: Vec<u64> = actions[..=k].iter().map(|a| a.to_bits()).collect();
            let e = acc.entry(key).or_insert((0.0, 0));
            e.0 += sample;
            e.1 += 1;
            g = sample;
        }
    }
    acc
}

/// Compares every visited edge's Q with the replay oracle. Unvisited edges
/// must still hold their immediate reward. Returns the number of edges
/// checked, or a description of the first mismatch.
pub fn check_against_replay<E: SimEnv>(
    env: &E,
    root: &E::State,
    out: &PlanOutcome<E::State>,
    gamma: f64,
) -> Result<usize, String> {
    let oracle = replay_q(env, root, out, gamma);
    let mut checked = 0;
    let mut stack = vec![(ROOT, Vec::<u64>::new(), root.clone())];
    while let Some((id, prefix, state)) = stack.pop() {
        let node = out.tree.node(id).unwrap();
        let Some(edges) = &node.edges else { continue };
        for e in edges {
            let mut key = prefix.clone();
            key.push(e.action.to_bits());
            let (next, r) = env.step(&state, e.action).unwrap();
            let expected = match oracle.get(&key) {
                Some(&(sum, n)) => {
                    if n != e.visits {
                        return Err(format!("visits {:?}: tree {} oracle {n}", key, e.visits));
                    }
                    sum / n as f64
                }
                None => r,
            };
            if e.q() != expected {
                return Err(format!("Q {:?}: tree {} oracle {expected}", key, e.q()));
            }
            checked += 1;
            stack.push((e.child, key, next));
        }
    }
    Ok(checked)
}
