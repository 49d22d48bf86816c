//! Exhaustive ground-state enumeration for small instances.
//!
//! The state space is split by the values of the highest-index spins into
//! fixed-size chunks. Each chunk is walked in reflected-binary (Gray) order
//! with O(n) single-flip updates, starting from a fresh full evaluation so
//! floating-point drift stays bounded. Collectors keep every state that could
//! matter within a drift slack, and the survivors are re-evaluated with
//! [`IsingModel::energy`] before anything is reported. Results therefore do
//! not depend on the number of workers.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{IsingModel, ModelError, SpinState};

/// Hard ceiling imposed by the `u64` state encoding.
pub const MAX_ENUMERABLE: usize = 62;
pub const DEFAULT_LIMIT_N: usize = 30;
const CHUNK_BITS: usize = 16;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{n} spins exceeds the exhaustive-search guard of {limit}; use the approximation scheme for larger instances")]
    GuardExceeded { n: usize, limit: usize },
    #[error("k = {k} is outside 1..=2^{n}")]
    InvalidK { k: u64, n: usize },
    #[error("not a low-energy set: an outside state has energy {outer} below inside energy {inner}")]
    NotLowEnergySet { inner: f64, outer: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub limit_n: usize,
    /// Worker threads; 0 or 1 runs on the calling thread.
    pub workers: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            limit_n: DEFAULT_LIMIT_N,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl SolverOptions {
    pub fn single_threaded() -> Self {
        Self { workers: 1, ..Self::default() }
    }

    pub fn with_workers(workers: usize) -> Self {
        Self { workers, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStates {
    pub energy: f64,
    /// Every state within the model tolerance of the minimum, sorted
    /// lexicographically.
    pub states: Vec<SpinState>,
}

impl GroundStates {
    /// Lexicographically smallest ground state.
    pub fn representative(&self) -> &SpinState {
        &self.states[0]
    }
}

/// A set of states no outside state undercuts.
#[derive(Debug, Clone, PartialEq)]
pub struct LowEnergySet {
    pub states: Vec<SpinState>,
    pub max_inner_energy: f64,
    /// `+inf` when the set holds every state.
    pub min_outer_energy: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumLevel {
    pub energy: f64,
    pub multiplicity: u64,
}

/// Extremes of the energy inside and outside a set of states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetSplit {
    pub max_inner_energy: f64,
    pub min_outer_energy: f64,
    pub inner_count: u64,
}

impl SetSplit {
    pub fn gap(&self) -> f64 {
        self.min_outer_energy - self.max_inner_energy
    }
}

fn check_guard(model: &IsingModel, opts: &SolverOptions) -> Result<(), SolveError> {
    let limit = opts.limit_n.min(MAX_ENUMERABLE);
    if model.len() > limit {
        return Err(SolveError::GuardExceeded { n: model.len(), limit });
    }
    Ok(())
}

/// Receives `(bits, energy)` for every visited state.
trait Collector: Send + Sized {
    fn visit(&mut self, bits: u64, energy: f64);
    fn merge(&mut self, other: Self);
}

struct Enumerator<'a> {
    model: &'a IsingModel,
    n: usize,
    couplings: Vec<f64>,
    fields: Vec<f64>,
}

impl<'a> Enumerator<'a> {
    fn new(model: &'a IsingModel) -> Self {
        Self {
            model,
            n: model.len(),
            couplings: model.dense_couplings(),
            fields: model.fields(),
        }
    }

    /// Energy drift bound for one chunk of incremental updates, plus the
    /// model tolerance.
    fn slack(&self) -> f64 {
        self.model.tolerance() + 1e-10 * self.model.energy_scale()
    }

    fn walk_chunk<C: Collector>(&self, prefix: u64, low_bits: usize, sink: &mut C) {
        let n = self.n;
        let mut bits = prefix << low_bits;
        let mut s: Vec<f64> = (0..n).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let mut local: Vec<f64> = (0..n)
            .map(|i| {
                let row = &self.couplings[i * n..(i + 1) * n];
                self.fields[i] + row.iter().zip(&s).map(|(j, sj)| j * sj).sum::<f64>()
            })
            .collect();
        let mut energy = (0..n)
            .map(|i| -0.5 * s[i] * (local[i] - self.fields[i]) - self.fields[i] * s[i])
            .sum::<f64>();
        sink.visit(bits, energy);
        for step in 1u64..(1u64 << low_bits) {
            let k = step.trailing_zeros() as usize;
            energy += 2.0 * s[k] * local[k];
            s[k] = -s[k];
            bits ^= 1 << k;
            let twice = 2.0 * s[k];
            let row = &self.couplings[k * n..(k + 1) * n];
            for (l, j) in local.iter_mut().zip(row) {
                *l += twice * j;
            }
            sink.visit(bits, energy);
        }
    }

    fn run<C: Collector>(&self, opts: &SolverOptions, make: impl Fn() -> C + Sync + Send) -> C {
        let low_bits = self.n.min(CHUNK_BITS);
        let chunks = 1u64 << (self.n - low_bits);
        if opts.workers <= 1 || chunks == 1 {
            let mut sink = make();
            for p in 0..chunks {
                self.walk_chunk(p, low_bits, &mut sink);
            }
            return sink;
        }
        let body = || {
            (0..chunks)
                .into_par_iter()
                .fold(&make, |mut sink, p| {
                    self.walk_chunk(p, low_bits, &mut sink);
                    sink
                })
                .reduce(&make, |mut a, b| {
                    a.merge(b);
                    a
                })
        };
        match rayon::ThreadPoolBuilder::new().num_threads(opts.workers).build() {
            Ok(pool) => pool.install(body),
            Err(e) => {
                log::warn!("could not build worker pool ({e}); using the global pool");
                body()
            }
        }
    }

    /// Exact re-evaluation of candidate states, sorted by energy then state.
    fn exact(&self, bits: impl IntoIterator<Item = u64>) -> Vec<(f64, SpinState)> {
        let mut out: Vec<(f64, SpinState)> = bits
            .into_iter()
            .map(|b| {
                let s = SpinState::from_bits(b, self.n);
                let e = self.model.energy(&s).expect("length matches").total;
                (e, s)
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        out
    }
}

#[derive(Clone, Copy)]
enum Retain {
    /// The lowest `k` states and everything tied with the k-th.
    Count(u64),
    /// Every state in the lowest `L` tolerance-grouped levels.
    Levels(usize),
}

/// Keeps a superset of the states selected by a [`Retain`] rule, plus the
/// band just beyond it so the lowest outside energy is also recoverable.
struct Lowest {
    rule: Retain,
    tolerance: f64,
    slack: f64,
    buf: Vec<(f64, u64)>,
    cap: usize,
}

impl Lowest {
    fn new(rule: Retain, tolerance: f64, slack: f64) -> Self {
        let base = match rule {
            Retain::Count(k) => k.min(1 << 20) as usize,
            Retain::Levels(l) => l,
        };
        Self { rule, tolerance, slack, buf: Vec::new(), cap: (4 * base).max(4096) }
    }

    fn prune(&mut self) {
        self.buf.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let cut = match self.rule {
            Retain::Count(k) => {
                let idx = (k as usize).min(self.buf.len()) - 1;
                self.buf[idx].0
            }
            Retain::Levels(levels) => {
                // Widened grouping can only merge levels, which moves the cut
                // outward and keeps more.
                let width = self.tolerance + self.slack;
                let mut count = 1;
                let mut start = self.buf[0].0;
                let mut cut = self.buf[self.buf.len() - 1].0;
                for &(e, _) in &self.buf {
                    if e > start + width {
                        if count == levels {
                            break;
                        }
                        count += 1;
                        start = e;
                    }
                    cut = e;
                }
                cut
            }
        };
        let limit = cut + self.tolerance + self.slack;
        let keep = match self.buf.iter().position(|&(e, _)| e > limit) {
            None => self.buf.len(),
            Some(first_out) => {
                let beyond = self.buf[first_out].0 + self.slack;
                self.buf.iter().position(|&(e, _)| e > beyond).unwrap_or(self.buf.len())
            }
        };
        self.buf.truncate(keep);
        self.cap = self.cap.max(2 * self.buf.len());
    }
}

impl Collector for Lowest {
    fn visit(&mut self, bits: u64, energy: f64) {
        self.buf.push((energy, bits));
        if self.buf.len() >= self.cap {
            self.prune();
        }
    }

    fn merge(&mut self, other: Self) {
        self.buf.extend(other.buf);
        if !self.buf.is_empty() {
            self.prune();
        }
    }
}

fn lowest(model: &IsingModel, rule: Retain, opts: &SolverOptions) -> Vec<(f64, SpinState)> {
    let en = Enumerator::new(model);
    let slack = en.slack();
    let tol = model.tolerance();
    let mut sink = en.run(opts, || Lowest::new(rule, tol, slack));
    sink.prune();
    en.exact(sink.buf.into_iter().map(|(_, b)| b))
}

/// Groups exactly evaluated, sorted energies into tolerance levels anchored
/// at each level's lowest member.
fn group_levels(sorted: &[(f64, SpinState)], tolerance: f64) -> Vec<std::ops::Range<usize>> {
    let mut levels = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i].0 > sorted[start].0 + tolerance {
            levels.push(start..i);
            start = i;
        }
    }
    levels
}

pub fn ground_states(model: &IsingModel, opts: &SolverOptions) -> Result<GroundStates, SolveError> {
    check_guard(model, opts)?;
    let sorted = lowest(model, Retain::Levels(1), opts);
    let first = group_levels(&sorted, model.tolerance())
        .into_iter()
        .next()
        .expect("at least one state");
    let energy = sorted[first.start].0;
    let mut states: Vec<SpinState> = sorted[first].iter().map(|(_, s)| s.clone()).collect();
    states.sort();
    Ok(GroundStates { energy, states })
}

/// The `k` lowest states, with boundary ties (within tolerance) included.
pub fn low_energy_set(model: &IsingModel, k: u64, opts: &SolverOptions) -> Result<LowEnergySet, SolveError> {
    check_guard(model, opts)?;
    let n = model.len();
    let total = 1u64 << n;
    if k == 0 || k > total {
        return Err(SolveError::InvalidK { k, n });
    }
    let sorted = lowest(model, Retain::Count(k), opts);
    let kth = sorted[k as usize - 1].0;
    let inside = sorted
        .iter()
        .position(|(e, _)| *e > kth + model.tolerance())
        .unwrap_or(sorted.len());
    let max_inner_energy = sorted[inside - 1].0;
    let min_outer_energy = sorted.get(inside).map_or(f64::INFINITY, |(e, _)| *e);
    let mut states: Vec<SpinState> = sorted[..inside].iter().map(|(_, s)| s.clone()).collect();
    states.sort();
    Ok(LowEnergySet {
        states,
        max_inner_energy,
        min_outer_energy,
        gap: min_outer_energy - max_inner_energy,
    })
}

/// Lowest `top` energy levels with their multiplicities, ascending.
pub fn energy_spectrum(model: &IsingModel, top: usize, opts: &SolverOptions) -> Result<Vec<SpectrumLevel>, SolveError> {
    check_guard(model, opts)?;
    if top == 0 {
        return Ok(Vec::new());
    }
    let sorted = lowest(model, Retain::Levels(top), opts);
    Ok(group_levels(&sorted, model.tolerance())
        .into_iter()
        .take(top)
        .map(|r| SpectrumLevel {
            energy: sorted[r.start].0,
            multiplicity: r.len() as u64,
        })
        .collect())
}

/// Tracks the highest-energy members and lowest-energy non-members.
struct Split<'m> {
    members: &'m HashSet<u64>,
    slack: f64,
    inner: Vec<(f64, u64)>,
    outer: Vec<(f64, u64)>,
    inner_count: u64,
}

impl Split<'_> {
    fn compact(&mut self) {
        let slack = self.slack;
        if let Some(max) = self.inner.iter().map(|p| p.0).max_by(f64::total_cmp) {
            self.inner.retain(|p| p.0 >= max - slack);
        }
        if let Some(min) = self.outer.iter().map(|p| p.0).min_by(f64::total_cmp) {
            self.outer.retain(|p| p.0 <= min + slack);
        }
    }
}

impl Collector for Split<'_> {
    fn visit(&mut self, bits: u64, energy: f64) {
        if self.members.contains(&bits) {
            self.inner_count += 1;
            self.inner.push((energy, bits));
        } else {
            self.outer.push((energy, bits));
        }
        if self.inner.len() + self.outer.len() > 8192 {
            self.compact();
        }
    }

    fn merge(&mut self, other: Self) {
        self.inner.extend(other.inner);
        self.outer.extend(other.outer);
        self.inner_count += other.inner_count;
        self.compact();
    }
}

/// Highest energy inside `members` and lowest energy outside, by exhaustive
/// enumeration.
pub fn set_split(model: &IsingModel, members: &[SpinState], opts: &SolverOptions) -> Result<SetSplit, SolveError> {
    check_guard(model, opts)?;
    for s in members {
        if s.len() != model.len() {
            return Err(ModelError::LengthMismatch { expected: model.len(), found: s.len() }.into());
        }
    }
    let set: HashSet<u64> = members.iter().map(SpinState::to_bits).collect();
    let en = Enumerator::new(model);
    let slack = en.slack();
    let mut sink = en.run(opts, || Split {
        members: &set,
        slack,
        inner: Vec::new(),
        outer: Vec::new(),
        inner_count: 0,
    });
    sink.compact();
    let max_inner_energy = en
        .exact(sink.inner.iter().map(|p| p.1))
        .last()
        .map_or(f64::NEG_INFINITY, |p| p.0);
    let min_outer_energy = en
        .exact(sink.outer.iter().map(|p| p.1))
        .first()
        .map_or(f64::INFINITY, |p| p.0);
    Ok(SetSplit { max_inner_energy, min_outer_energy, inner_count: sink.inner_count })
}

impl LowEnergySet {
    /// Checks the defining property by enumeration: no outside state may lie
    /// below an inside state by more than the model tolerance.
    pub fn from_members(model: &IsingModel, members: Vec<SpinState>, opts: &SolverOptions) -> Result<Self, SolveError> {
        let split = set_split(model, &members, opts)?;
        if split.min_outer_energy + model.tolerance() < split.max_inner_energy {
            return Err(SolveError::NotLowEnergySet {
                inner: split.max_inner_energy,
                outer: split.min_outer_energy,
            });
        }
        let mut states = members;
        states.sort();
        states.dedup();
        Ok(Self {
            states,
            max_inner_energy: split.max_inner_energy,
            min_outer_energy: split.min_outer_energy,
            gap: split.gap(),
        })
    }
}

/// Every state with its exactly evaluated energy, in bit order. For tests
/// and tiny diagnostics only.
pub fn all_energies(model: &IsingModel, opts: &SolverOptions) -> Result<Vec<f64>, SolveError> {
    check_guard(model, opts)?;
    let n = model.len();
    (0..1u64 << n)
        .map(|b| Ok(model.energy(&SpinState::from_bits(b, n))?.total))
        .collect()
}
