//! AlphaZero-style tree search over the exact environment model.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::approx::{critic_forward, policy_forward, Bins, Mlp, ParamVector};
use crate::env::MdpSpec;
use crate::error::{Error, Result};

/// Supplies priors and a value estimate for a state.
pub trait Oracle {
    fn evaluate(&mut self, state: usize) -> Result<(Vec<f64>, f64)>;
}

/// Uniform priors and zero value everywhere: pure model-based search.
#[derive(Debug, Clone, Copy)]
pub struct UniformOracle {
    pub num_actions: usize,
}

impl Oracle for UniformOracle {
    fn evaluate(&mut self, _state: usize) -> Result<(Vec<f64>, f64)> {
        Ok((vec![1.0 / self.num_actions as f64; self.num_actions], 0.0))
    }
}

/// The agent's actor and critic as search oracle. Results are memoized, so
/// build a fresh one whenever the parameters change.
pub struct NetworkOracle<'a> {
    pub policy: &'a Mlp,
    pub policy_params: &'a ParamVector,
    pub critic: &'a Mlp,
    pub critic_params: &'a ParamVector,
    pub bins: &'a Bins,
    cache: HashMap<usize, (Vec<f64>, f64)>,
}

impl<'a> NetworkOracle<'a> {
    pub fn new(
        policy: &'a Mlp,
        policy_params: &'a ParamVector,
        critic: &'a Mlp,
        critic_params: &'a ParamVector,
        bins: &'a Bins,
    ) -> Self {
        Self {
            policy,
            policy_params,
            critic,
            critic_params,
            bins,
            cache: HashMap::new(),
        }
    }
}

impl Oracle for NetworkOracle<'_> {
    fn evaluate(&mut self, state: usize) -> Result<(Vec<f64>, f64)> {
        if let Some(hit) = self.cache.get(&state) {
            return Ok(hit.clone());
        }
        let obs = crate::env::one_hot(state, self.policy.spec().input_dim);
        let pi = policy_forward(self.policy, self.policy_params, &obs)?.probs;
        let v = critic_forward(self.critic, self.critic_params, &obs, self.bins)?
            .dist
            .expected_value();
        self.cache.insert(state, (pi.clone(), v));
        Ok((pi, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub budget: usize,
    pub c1: f64,
    pub c2: f64,
    pub dirichlet_alpha: f64,
    /// Weight ρ of the Dirichlet sample in the root priors.
    pub dirichlet_mix: f64,
    pub temperature: f64,
    /// λ of the backed-up returns. The discount comes from the MDP.
    pub lambda: f64,
    /// Minimum range of the min-max normalization.
    pub norm_eps: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget: 50,
            c1: 1.25,
            c2: 19652.0,
            dirichlet_alpha: 0.3,
            dirichlet_mix: 0.25,
            temperature: 1.0,
            lambda: 0.95,
            norm_eps: 0.01,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("search budget must be at least 1"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("search temperature must be positive"));
        }
        if !(0.0..=1.0).contains(&self.dirichlet_mix) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid("dirichlet_mix and lambda must lie in [0, 1]"));
        }
        if !(self.norm_eps > 0.0) || !(self.c2 > 0.0) {
            return Err(Error::invalid("norm_eps and c2 must be positive"));
        }
        Ok(())
    }
}

/// Visit-count temperature for a given training progress in [0, 1].
pub fn temperature_schedule(progress: f64) -> f64 {
    if progress >= 0.75 {
        0.25
    } else if progress >= 0.5 {
        0.5
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStats {
    pub visits: u32,
    pub q: f64,
    pub prior: f64,
    pub reward: f64,
    pub continues: bool,
    pub child: Option<usize>,
}

impl EdgeStats {
    pub fn new(prior: f64) -> Self {
        Self {
            visits: 0,
            q: 0.0,
            prior,
            reward: 0.0,
            continues: true,
            child: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub state: usize,
    /// Oracle value at expansion, 0 for terminal states.
    pub value: f64,
    pub terminal: bool,
    /// Empty for terminal nodes.
    pub edges: Vec<EdgeStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxBounds {
    pub min: f64,
    pub max: f64,
    pub eps: f64,
}

impl MinMaxBounds {
    pub fn new(eps: f64) -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            eps,
        }
    }

    pub fn update(&mut self, q: f64) {
        self.min = self.min.min(q);
        self.max = self.max.max(q);
    }

    pub fn is_empty(&self) -> bool {
        self.min > self.max
    }

    /// Maps `q` into [0, 1]; 0 before any value has been observed.
    pub fn normalize(&self, q: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        ((q - self.min) / (self.max - self.min).max(self.eps)).clamp(0.0, 1.0)
    }
}

/// Value used for unvisited edges: the mean of the parent's fill and the Q
/// of every visited edge.
pub fn mean_q_fill(edges: &[EdgeStats], parent_fill: f64) -> f64 {
    let (sum, k) = edges
        .iter()
        .filter(|e| e.visits > 0)
        .fold((parent_fill, 1.0), |(s, k), e| (s + e.q, k + 1.0));
    sum / k
}

/// PUCT exploration multiplier `c1 + ln((N + c2 + 1) / c2)`.
pub fn puct_multiplier(parent_visits: f64, c1: f64, c2: f64) -> f64 {
    c1 + ((parent_visits + c2 + 1.0) / c2).ln()
}

/// PUCT selection. Returns the chosen action and this node's fill, which
/// becomes the parent fill one level down.
pub fn select_child(edges: &[EdgeStats], parent_fill: f64, bounds: &MinMaxBounds, c1: f64, c2: f64) -> (usize, f64) {
    let fill = mean_q_fill(edges, parent_fill);
    let n: f64 = edges.iter().map(|e| f64::from(e.visits)).sum();
    let explore = n.sqrt() * puct_multiplier(n, c1, c2);
    let mut best = (0, f64::NEG_INFINITY);
    for (a, e) in edges.iter().enumerate() {
        let q = if e.visits > 0 { e.q } else { fill };
        let score = bounds.normalize(q) + e.prior * explore / (1.0 + f64::from(e.visits));
        if score > best.1 {
            best = (a, score);
        }
    }
    (best.0, fill)
}

/// `π(a) ∝ N(a)^(1/T)`, evaluated relative to the largest count.
pub fn extract_policy(counts: &[u32], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::Search("all visit counts are zero".into()));
    }
    let w: Vec<f64> = counts
        .iter()
        .map(|&c| (f64::from(c) / f64::from(max)).powf(1.0 / temperature))
        .collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Symmetric Dirichlet sample built from Gamma draws.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: f64, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid(format!("dirichlet alpha {alpha}: {e}")))?;
    loop {
        let draw: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draw.iter().sum();
        // Tiny alphas can underflow every component; redraw.
        if total > 0.0 && total.is_finite() {
            return Ok(draw.into_iter().map(|x| x / total).collect());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub pi_az: Vec<f64>,
    pub v_az: f64,
    pub root_q: Vec<f64>,
    pub visit_counts: Vec<u32>,
}

/// A search tree; nodes live in an arena, node 0 is the root.
#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
    pub bounds: MinMaxBounds,
    root_targets: Vec<f64>,
}

impl SearchTree {
    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    fn make_node<O: Oracle + ?Sized>(mdp: &MdpSpec, state: usize, oracle: &mut O) -> Result<SearchNode> {
        if mdp.is_terminal(state) {
            return Ok(SearchNode {
                state,
                value: 0.0,
                terminal: true,
                edges: Vec::new(),
            });
        }
        let (priors, value) = oracle.evaluate(state)?;
        if priors.len() != mdp.num_actions() {
            return Err(Error::Shape {
                context: "oracle priors",
                expected: mdp.num_actions(),
                actual: priors.len(),
            });
        }
        if !value.is_finite() || priors.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("oracle output at state {state}")));
        }
        Ok(SearchNode {
            state,
            value,
            terminal: false,
            edges: priors.into_iter().map(EdgeStats::new).collect(),
        })
    }

    /// Expands the root, mixing Dirichlet noise into its priors.
    pub fn new<O: Oracle + ?Sized, R: Rng + ?Sized>(
        mdp: &MdpSpec,
        root_state: usize,
        oracle: &mut O,
        cfg: &SearchConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if root_state >= mdp.num_states() {
            return Err(Error::invalid(format!("root state {root_state} out of range")));
        }
        if mdp.is_terminal(root_state) {
            return Err(Error::Search(format!("root state {root_state} is terminal")));
        }
        let mut root = Self::make_node(mdp, root_state, oracle)?;
        if cfg.dirichlet_mix > 0.0 {
            let noise = sample_dirichlet(cfg.dirichlet_alpha, root.edges.len(), rng)?;
            for (e, d) in root.edges.iter_mut().zip(noise) {
                e.prior = (1.0 - cfg.dirichlet_mix) * e.prior + cfg.dirichlet_mix * d;
            }
        }
        Ok(Self {
            nodes: vec![root],
            bounds: MinMaxBounds::new(cfg.norm_eps),
            root_targets: Vec::new(),
        })
    }

    /// One selection, expansion and backup pass.
    pub fn simulate<O: Oracle + ?Sized, R: Rng + ?Sized>(
        &mut self,
        mdp: &MdpSpec,
        oracle: &mut O,
        cfg: &SearchConfig,
        rng: &mut R,
    ) -> Result<()> {
        let mut path = Vec::new();
        let mut node = 0;
        let mut fill = 0.0;
        let leaf_value = loop {
            let (a, node_fill) = select_child(&self.nodes[node].edges, fill, &self.bounds, cfg.c1, cfg.c2);
            fill = node_fill;
            path.push((node, a));
            match self.nodes[node].edges[a].child {
                Some(child) => {
                    if self.nodes[child].terminal {
                        break 0.0;
                    }
                    node = child;
                }
                None => {
                    let step = mdp.step(self.nodes[node].state, a, rng)?;
                    let child = Self::make_node(mdp, step.next_state, oracle)?;
                    let value = child.value;
                    self.nodes.push(child);
                    let id = self.nodes.len() - 1;
                    let edge = &mut self.nodes[node].edges[a];
                    edge.reward = step.reward;
                    edge.continues = step.continues;
                    edge.child = Some(id);
                    break value;
                }
            }
        };
        self.backup(&path, leaf_value, mdp.gamma(), cfg.lambda);
        Ok(())
    }

    /// λ-return backup from the leaf to the root along `path`.
    pub fn backup(&mut self, path: &[(usize, usize)], leaf_value: f64, gamma: f64, lambda: f64) {
        let mut g = leaf_value;
        for &(node, a) in path.iter().rev() {
            let child = self.nodes[node].edges[a].child.expect("backed-up edge was expanded");
            let child_value = self.nodes[child].value;
            let e = &mut self.nodes[node].edges[a];
            let c = if e.continues { 1.0 } else { 0.0 };
            g = e.reward + gamma * c * ((1.0 - lambda) * child_value + lambda * g);
            e.q = (f64::from(e.visits) * e.q + g) / f64::from(e.visits + 1);
            e.visits += 1;
            let q = e.q;
            self.bounds.update(q);
        }
        self.root_targets.push(g);
    }

    pub fn result(&self, temperature: f64) -> Result<SearchResult> {
        let root = self.root();
        let visit_counts: Vec<u32> = root.edges.iter().map(|e| e.visits).collect();
        let pi_az = extract_policy(&visit_counts, temperature)?;
        let v_az = self.root_targets.iter().sum::<f64>() / self.root_targets.len() as f64;
        Ok(SearchResult {
            pi_az,
            v_az,
            root_q: root.edges.iter().map(|e| e.q).collect(),
            visit_counts,
        })
    }
}

/// Runs `cfg.budget` simulations from `root_state`.
pub fn run_search<O: Oracle + ?Sized, R: Rng + ?Sized>(
    mdp: &MdpSpec,
    root_state: usize,
    oracle: &mut O,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult> {
    cfg.validate()?;
    let mut tree = SearchTree::new(mdp, root_state, oracle, cfg, rng)?;
    for _ in 0..cfg.budget {
        tree.simulate(mdp, oracle, cfg, rng)?;
    }
    tree.result(cfg.temperature)
}
