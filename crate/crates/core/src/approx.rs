//! Pruned approximation graphs and exact dynamic programming over tree
//! decompositions.
//!
//! Dropping every coupling of magnitude `|J|` changes `H(σ)` by at most
//! `|J|` per dropped pair, so a graph whose pruned weight is at most `nε/2`
//! approximates the full Hamiltonian within `nε/2` on every state. The
//! minimizer of the pruned Hamiltonian is then within `nε` of the true
//! ground energy. In 1D, pruning by distance leaves a graph of bounded
//! bandwidth, which a path decomposition of fixed width solves exactly.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Coupling, Edge, IsingModel, ModelError, SpinState};

/// Largest bag the DP tabulates (`2^MAX_BAG` entries per bag).
pub const MAX_BAG: usize = 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("explicit models need positions on every spin to prune by distance")]
    MissingPositions,
    #[error("explicit models need a declared decay exponent")]
    MissingDecay,
    #[error("edge ({u}, {v}) violates the declared decay bound |J| <= d^-{alpha}")]
    DecayViolated { u: usize, v: usize, alpha: f64 },
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(Violation),
    #[error("bag {bag} has {size} vertices; at most {MAX_BAG} are supported")]
    BagTooLarge { bag: usize, size: usize },
    #[error("the 1D scheme needs spins on a line at integer, strictly increasing coordinates")]
    NotOneDimensional,
    #[error("the 1D scheme needs a long-range model")]
    NotLongRange,
    #[error("malformed decomposition document: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The pruned Hamiltonian `H_G̃`: kept couplings plus every field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxGraph {
    pub n: usize,
    /// Kept couplings in `(u < v)` lexicographic order.
    pub kept_edges: Vec<Edge>,
    pub fields: Vec<f64>,
    /// Σ|J| over pruned pairs.
    pub pruned_weight: f64,
    pub epsilon: f64,
    pub initial_cutoff: f64,
    /// Final distance cutoff; pairs farther apart were pruned.
    pub cutoff: f64,
    /// `pruned_weight <= n·ε/2`.
    pub certified: bool,
    /// Set when the decay is too slow for the cutoff formula and nothing
    /// could be pruned.
    pub degenerate: bool,
}

impl ApproxGraph {
    /// Same summation order as [`IsingModel::energy`]: with nothing pruned
    /// the two agree bit for bit.
    pub fn energy(&self, state: &SpinState) -> Result<f64, ModelError> {
        if state.len() != self.n {
            return Err(ModelError::LengthMismatch { expected: self.n, found: state.len() });
        }
        let s = state.values();
        let mut interaction = 0.0;
        for e in &self.kept_edges {
            interaction += -e.j * f64::from(s[e.u] * s[e.v]);
        }
        let mut field = 0.0;
        for (h, &v) in self.fields.iter().zip(s) {
            field += -h * f64::from(v);
        }
        Ok(interaction + field)
    }

    /// Guaranteed bound on `|H(σ) − H_G̃(σ)|`.
    pub fn deviation_bound(&self) -> f64 {
        self.pruned_weight
    }

    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.kept_edges.iter().map(|e| (e.u, e.v)).collect()
    }
}

/// `(ε(α−1))^(1/(1−α))`, the distance beyond which the 1D tail of `r^(−α)`
/// drops below `ε`. Undefined for `α <= 1`.
pub fn cutoff_formula(epsilon: f64, alpha: f64) -> Option<f64> {
    (alpha > 1.0).then(|| (epsilon * (alpha - 1.0)).powf(1.0 / (1.0 - alpha)))
}

/// Prunes couplings by distance and certifies the pruned weight, doubling
/// the cutoff until `Σ_pruned |J| <= nε/2`.
///
/// `decay_alpha` is required for explicit models, whose couplings must obey
/// `|J| <= d^(−α)`; it is ignored for long-range models.
pub fn build_approx_graph(model: &IsingModel, epsilon: f64, decay_alpha: Option<f64>) -> Result<ApproxGraph, ApproxError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ApproxError::InvalidEpsilon(epsilon));
    }
    let n = model.len();
    let alpha = match model.coupling_kind() {
        Coupling::LongRange { alpha, .. } => *alpha,
        Coupling::Explicit(_) => decay_alpha.ok_or(ApproxError::MissingDecay)?,
    };
    let mut pairs: Vec<(Edge, f64)> = Vec::new();
    let mut missing = false;
    model.for_each_pair(|u, v, j| match model.distance(u, v) {
        Some(d) => pairs.push((Edge { u, v, j }, d)),
        None => missing = true,
    });
    if missing {
        return Err(ApproxError::MissingPositions);
    }
    if !model.is_long_range() {
        for (e, d) in &pairs {
            if e.j.abs() > d.powf(-alpha) * (1.0 + 1e-12) {
                return Err(ApproxError::DecayViolated { u: e.u, v: e.v, alpha });
            }
        }
    }

    let budget = n as f64 * epsilon / 2.0;
    let max_d = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let initial_cutoff = cutoff_formula(epsilon, alpha)
        .unwrap_or_else(|| model.min_distance().unwrap_or(1.0));
    let pruned_weight_at = |cutoff: f64| -> f64 {
        pairs.iter().filter(|p| p.1 > cutoff).map(|p| p.0.j.abs()).sum()
    };

    let mut cutoff = initial_cutoff;
    let mut pruned_weight = pruned_weight_at(cutoff);
    while pruned_weight > budget && cutoff < max_d {
        cutoff *= 2.0;
        pruned_weight = pruned_weight_at(cutoff);
    }
    let kept_edges: Vec<Edge> = pairs.iter().filter(|p| p.1 <= cutoff).map(|p| p.0).collect();
    let degenerate = alpha <= 1.0 && kept_edges.len() == pairs.len() && !pairs.is_empty();
    if degenerate {
        log::warn!("decay exponent {alpha} <= 1: no coupling could be pruned, the approximation is the full graph");
    }
    Ok(ApproxGraph {
        n,
        kept_edges,
        fields: model.fields(),
        pruned_weight,
        epsilon,
        initial_cutoff,
        cutoff,
        certified: pruned_weight <= budget,
        degenerate,
    })
}

/// The full Hamiltonian as an approximation graph with nothing pruned.
pub fn full_graph(model: &IsingModel) -> ApproxGraph {
    let mut kept_edges = Vec::new();
    model.for_each_pair(|u, v, j| kept_edges.push(Edge { u, v, j }));
    ApproxGraph {
        n: model.len(),
        kept_edges,
        fields: model.fields(),
        pruned_weight: 0.0,
        epsilon: 0.0,
        initial_cutoff: f64::INFINITY,
        cutoff: f64::INFINITY,
        certified: true,
        degenerate: false,
    }
}

/// Bags over vertex ids and tree edges over bag indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDecomposition {
    pub bags: Vec<Vec<usize>>,
    pub tree: Vec<[usize; 2]>,
}

impl TreeDecomposition {
    /// Largest bag size minus one; `0` for an empty decomposition.
    pub fn width(&self) -> usize {
        self.bags.iter().map(Vec::len).max().unwrap_or(1).saturating_sub(1)
    }

    /// One bag holding every vertex.
    pub fn single_bag(n: usize) -> Self {
        Self { bags: vec![(0..n).collect()], tree: Vec::new() }
    }

    pub fn from_json(text: &str) -> Result<Self, ApproxError> {
        serde_json::from_str(text).map_err(|e| ApproxError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("decompositions always serialize")
    }
}

/// The first defect found by [`validate_decomposition`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    #[error("decomposition has no bags")]
    NoBags,
    #[error("bag {bag} names vertex {vertex}, outside 0..{n}")]
    VertexOutOfRange { bag: usize, vertex: usize, n: usize },
    #[error("bag {bag} repeats vertex {vertex}")]
    RepeatedVertex { bag: usize, vertex: usize },
    #[error("tree edge {edge} names bag {bag}, which does not exist")]
    BagOutOfRange { edge: usize, bag: usize },
    #[error("bag tree is not a tree: {reason}")]
    NotATree { reason: String },
    #[error("vertex {vertex} is in no bag")]
    UncoveredVertex { vertex: usize },
    #[error("edge ({u}, {v}) is in no bag")]
    UncoveredEdge { u: usize, v: usize },
    #[error("bags {first} and {second} both hold vertex {vertex} but are not connected through bags that do")]
    DisconnectedVertex { vertex: usize, first: usize, second: usize },
}

fn tree_adjacency(d: &TreeDecomposition) -> Result<Vec<Vec<usize>>, Violation> {
    let b = d.bags.len();
    let mut adj = vec![Vec::new(); b];
    for (k, &[x, y]) in d.tree.iter().enumerate() {
        for bag in [x, y] {
            if bag >= b {
                return Err(Violation::BagOutOfRange { edge: k, bag });
            }
        }
        if x == y {
            return Err(Violation::NotATree { reason: format!("tree edge {k} is a loop on bag {x}") });
        }
        adj[x].push(y);
        adj[y].push(x);
    }
    if d.tree.len() + 1 != b {
        return Err(Violation::NotATree {
            reason: format!("{} bags need {} tree edges, found {}", b, b - 1, d.tree.len()),
        });
    }
    let seen = reachable(&adj, 0, |_| true);
    if let Some(lost) = seen.iter().position(|&s| !s) {
        return Err(Violation::NotATree { reason: format!("bag {lost} is not connected to bag 0") });
    }
    Ok(adj)
}

fn reachable(adj: &[Vec<usize>], start: usize, allowed: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if !seen[y] && allowed(y) {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    seen
}

/// Checks the tree shape and the three decomposition axioms over vertices
/// `0..n` and `edges`, in that order.
pub fn validate_decomposition(n: usize, edges: &[(usize, usize)], d: &TreeDecomposition) -> Result<(), Violation> {
    if d.bags.is_empty() {
        return Err(Violation::NoBags);
    }
    let mut member: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (bag, vs) in d.bags.iter().enumerate() {
        for &vertex in vs {
            if vertex >= n {
                return Err(Violation::VertexOutOfRange { bag, vertex, n });
            }
            if member[vertex].last() == Some(&bag) {
                return Err(Violation::RepeatedVertex { bag, vertex });
            }
            member[vertex].push(bag);
        }
    }
    let adj = tree_adjacency(d)?;

    if let Some(vertex) = member.iter().position(Vec::is_empty) {
        return Err(Violation::UncoveredVertex { vertex });
    }
    for &(u, v) in edges {
        let (a, b) = (&member[u], &member[v]);
        if !a.iter().any(|x| b.binary_search(x).is_ok()) {
            return Err(Violation::UncoveredEdge { u: u.min(v), v: u.max(v) });
        }
    }
    let mut holds = vec![false; d.bags.len()];
    for (vertex, bags) in member.iter().enumerate() {
        for &b in bags {
            holds[b] = true;
        }
        let seen = reachable(&adj, bags[0], |b| holds[b]);
        if let Some(&second) = bags.iter().find(|&&b| !seen[b]) {
            return Err(Violation::DisconnectedVertex { vertex, first: bags[0], second });
        }
        for &b in bags {
            holds[b] = false;
        }
    }
    Ok(())
}

/// Sliding-window path decomposition `X_i = {i, …, i+R}` of `0..n`.
pub fn path_decomposition_1d(n: usize, window: usize) -> TreeDecomposition {
    if window >= n {
        return TreeDecomposition::single_bag(n);
    }
    let count = n - window;
    TreeDecomposition {
        bags: (0..count).map(|i| (i..=i + window).collect()).collect(),
        tree: (1..count).map(|i| [i - 1, i]).collect(),
    }
}

/// Min-degree elimination ordering, ties to the smaller id. Exact width for
/// trees and bands; a heuristic in general.
pub fn greedy_decomposition(n: usize, edges: &[(usize, usize)]) -> TreeDecomposition {
    if n == 0 {
        return TreeDecomposition::single_bag(0);
    }
    let mut adj = vec![BTreeSet::new(); n];
    for &(u, v) in edges {
        if u != v {
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    let mut step_of = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut bags = Vec::with_capacity(n);
    for step in 0..n {
        let v = (0..n)
            .filter(|&v| step_of[v] == usize::MAX)
            .min_by_key(|&v| (adj[v].len(), v))
            .expect("a vertex remains");
        step_of[v] = step;
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &nbrs {
            adj[a].remove(&v);
            for &b in &nbrs {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        let mut bag = nbrs;
        bag.push(v);
        bag.sort_unstable();
        bags.push(bag);
        order.push(v);
    }
    // Each bag hangs off the bag of its earliest-eliminated neighbour.
    let tree = (0..n.saturating_sub(1))
        .map(|step| {
            let v = order[step];
            let parent = bags[step]
                .iter()
                .filter(|&&u| u != v)
                .map(|&u| step_of[u])
                .min()
                .unwrap_or(step + 1);
            [step, parent]
        })
        .collect();
    TreeDecomposition { bags, tree }
}

/// Canonical bag assignment index: the bag's vertices in ascending order,
/// first vertex in the most significant bit, `+1` as `1`. Smaller indices
/// are lexicographically smaller assignments.
struct Bag {
    vertices: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
    fields: Vec<(usize, f64)>,
}

impl Bag {
    fn bit(&self, slot: usize) -> u32 {
        (self.vertices.len() - 1 - slot) as u32
    }

    /// Energies of all assignments, walking them in Gray-code order with a
    /// single-spin update per step.
    fn local_costs(&self) -> Vec<f64> {
        let b = self.vertices.len();
        let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); b];
        for &(x, y, j) in &self.edges {
            nbrs[x].push((y, j));
            nbrs[y].push((x, j));
        }
        let mut h = vec![0.0; b];
        for &(x, field) in &self.fields {
            h[x] += field;
        }
        // Assignment 0 is all spins down.
        let mut spins = vec![-1.0f64; b];
        let mut e: f64 = self.edges.iter().map(|&(_, _, j)| -j).sum::<f64>() + h.iter().sum::<f64>();
        let mut costs = vec![0.0; 1 << b];
        let mut assign = 0usize;
        costs[0] = e;
        for step in 1..1usize << b {
            let bit = step.trailing_zeros();
            let k = b - 1 - bit as usize;
            let local: f64 = h[k] + nbrs[k].iter().map(|&(y, j)| j * spins[y]).sum::<f64>();
            e += 2.0 * spins[k] * local;
            spins[k] = -spins[k];
            assign ^= 1 << bit;
            costs[assign] = e;
        }
        costs
    }
}

/// Exact minimizer of `H_G̃` by dynamic programming over a validated
/// decomposition. Each kept edge is charged to the lowest-index bag holding
/// both endpoints and each field to the lowest-index bag holding its
/// vertex; ties prefer the lexicographically smaller assignment.
///
/// Returns the state and `H_G̃` re-evaluated on it.
pub fn dp_ground_state(graph: &ApproxGraph, d: &TreeDecomposition) -> Result<(SpinState, f64), ApproxError> {
    validate_decomposition(graph.n, &graph.edge_pairs(), d).map_err(ApproxError::InvalidDecomposition)?;
    if let Some((bag, vs)) = d.bags.iter().enumerate().find(|(_, vs)| vs.len() > MAX_BAG) {
        return Err(ApproxError::BagTooLarge { bag, size: vs.len() });
    }

    let mut bags: Vec<Bag> = d
        .bags
        .iter()
        .map(|vs| {
            let mut vertices = vs.clone();
            vertices.sort_unstable();
            Bag { vertices, edges: Vec::new(), fields: Vec::new() }
        })
        .collect();
    let slot = |bag: &Bag, v: usize| bag.vertices.binary_search(&v).ok();
    let mut field_done = vec![false; graph.n];
    for bag in &mut bags {
        for (k, &v) in bag.vertices.iter().enumerate() {
            if !field_done[v] {
                field_done[v] = true;
                bag.fields.push((k, graph.fields[v]));
            }
        }
    }
    for e in &graph.kept_edges {
        let b = (0..bags.len())
            .find(|&b| slot(&bags[b], e.u).is_some() && slot(&bags[b], e.v).is_some())
            .expect("validated decompositions cover every edge");
        let (x, y) = (slot(&bags[b], e.u).unwrap(), slot(&bags[b], e.v).unwrap());
        bags[b].edges.push((x, y, e.j));
    }

    // Root at bag 0; BFS order puts parents before children.
    let adj = tree_adjacency(d).expect("validated");
    let mut parent = vec![usize::MAX; bags.len()];
    let mut order = vec![0usize];
    parent[0] = 0;
    let mut head = 0;
    while head < order.len() {
        let x = order[head];
        head += 1;
        for &y in &adj[x] {
            if parent[y] == usize::MAX {
                parent[y] = x;
                order.push(y);
            }
        }
    }

    // For child c of p: separator slots in c and in p, in ascending vertex order.
    let separator = |c: usize| -> (Vec<usize>, Vec<usize>) {
        let (cb, pb) = (&bags[c], &bags[parent[c]]);
        cb.vertices
            .iter()
            .enumerate()
            .filter_map(|(k, &v)| slot(pb, v).map(|pk| (k, pk)))
            .unzip()
    };
    let project = |bag: &Bag, assign: usize, slots: &[usize]| -> usize {
        slots.iter().fold(0, |acc, &k| acc << 1 | (assign >> bag.bit(k) & 1))
    };

    let mut tables: Vec<Vec<f64>> = bags.iter().map(Bag::local_costs).collect();
    let mut back: Vec<Vec<usize>> = vec![Vec::new(); bags.len()];
    for &c in order.iter().skip(1).rev() {
        let p = parent[c];
        let (c_slots, p_slots) = separator(c);
        let mut best = vec![(f64::INFINITY, 0usize); 1 << c_slots.len()];
        for (a, &cost) in tables[c].iter().enumerate() {
            let key = project(&bags[c], a, &c_slots);
            if cost < best[key].0 {
                best[key] = (cost, a);
            }
        }
        let child_back: Vec<usize> = best.iter().map(|b| b.1).collect();
        let pt = std::mem::take(&mut tables[p]);
        tables[p] = pt
            .into_iter()
            .enumerate()
            .map(|(a, cost)| cost + best[project(&bags[p], a, &p_slots)].0)
            .collect();
        back[c] = child_back;
    }

    let mut chosen = vec![0usize; bags.len()];
    chosen[0] = tables[0]
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |acc, (a, &e)| if e < acc.0 { (e, a) } else { acc })
        .1;
    let mut values = vec![-1i8; graph.n];
    for &c in &order {
        if c != 0 {
            let (_, p_slots) = separator(c);
            chosen[c] = back[c][project(&bags[parent[c]], chosen[parent[c]], &p_slots)];
        }
        for (k, &v) in bags[c].vertices.iter().enumerate() {
            values[v] = if chosen[c] >> bags[c].bit(k) & 1 == 1 { 1 } else { -1 };
        }
    }
    let state = SpinState::new(values)?;
    let energy = graph.energy(&state)?;
    Ok((state, energy))
}

/// Certificate and result of the 1D approximation scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtasReport {
    pub epsilon: f64,
    pub initial_cutoff: f64,
    pub cutoff: f64,
    pub window: usize,
    pub width: usize,
    pub certified: bool,
    pub degenerate: bool,
    pub pruned_weight: f64,
    /// `H_G̃` of the returned state.
    pub approx_energy: f64,
    /// Full `H` of the returned state.
    pub energy: f64,
    /// `2·pruned_weight`: the returned energy exceeds the ground energy by
    /// at most this much.
    pub gap_bound: f64,
    /// `n·ε`.
    pub target_bound: f64,
    pub state: SpinState,
}

/// Spins sorted by id must sit at strictly increasing integer coordinates
/// on one horizontal line.
fn line_coordinates(model: &IsingModel) -> Option<Vec<i64>> {
    let pos = model.integer_positions()?;
    let y = pos.first().map_or(0, |p| p[1]);
    let ok = pos.iter().all(|p| p[1] == y) && pos.windows(2).all(|w| w[0][0] < w[1][0]);
    ok.then(|| pos.iter().map(|p| p[0]).collect())
}

/// Prune, decompose along the line, and solve the pruned model exactly.
pub fn ptas_solve(model: &IsingModel, epsilon: f64) -> Result<PtasReport, ApproxError> {
    if !model.is_long_range() {
        return Err(ApproxError::NotLongRange);
    }
    line_coordinates(model).ok_or(ApproxError::NotOneDimensional)?;
    let graph = build_approx_graph(model, epsilon, None)?;
    let window = graph.kept_edges.iter().map(|e| e.v - e.u).max().unwrap_or(0);
    let decomp = path_decomposition_1d(model.len(), window);
    let (state, approx_energy) = dp_ground_state(&graph, &decomp)?;
    let energy = model.energy(&state)?.total;
    Ok(PtasReport {
        epsilon,
        initial_cutoff: graph.initial_cutoff,
        cutoff: graph.cutoff,
        window,
        width: decomp.width(),
        certified: graph.certified,
        degenerate: graph.degenerate,
        pruned_weight: graph.pruned_weight,
        approx_energy,
        energy,
        gap_bound: 2.0 * graph.pruned_weight,
        target_bound: model.len() as f64 * epsilon,
        state,
    })
}
