//! Random-field Ising model instances and their Hamiltonian.
//!
//! Energies follow `H = −Σ_{i<j} J_ij σ_i σ_j − Σ_k h_k σ_k`; a negative
//! coupling is antiferromagnetic. Long-range models couple every pair with
//! `J_ij = c · d(i, j)^(−alpha)`, explicit models carry an edge list.

mod json;
mod state;

use serde::Serialize;
use thiserror::Error;

pub use json::{ModelDocument, SpinDocument, EdgeDocument};
pub use state::SpinState;

use crate::sum::CompensatedSum;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("self coupling undefined for spin {0}")]
    SelfCoupling(usize),
    #[error("spin id {id} out of range for {n} spins")]
    InvalidSpin { id: usize, n: usize },
    #[error("spin {0} has no position")]
    MissingPosition(usize),
    #[error("coincident spins {0} and {1}")]
    CoincidentSpins(usize, usize),
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("{path}: value must be finite")]
    NonFinite { path: String },
    #[error("{path}: self-loop on spin {id}")]
    SelfLoop { path: String, id: usize },
    #[error("{path}: duplicate edge ({u}, {v})")]
    DuplicateEdge { path: String, u: usize, v: usize },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("state has {found} spins, model has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("spin value at index {index} must be ±1, got {value}")]
    InvalidSpinValue { index: usize, value: i8 },
    #[error("invalid state character {found:?} at index {index}")]
    InvalidStateChar { index: usize, found: char },
    #[error("malformed model document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spin {
    pub position: Option<[f64; 2]>,
    pub field: f64,
}

impl Spin {
    pub fn at(position: [f64; 2], field: f64) -> Self {
        Self { position: Some(position), field }
    }

    pub fn unplaced(field: f64) -> Self {
        Self { position: None, field }
    }
}

/// Stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    #[serde(rename = "J")]
    pub j: f64,
}

impl Edge {
    pub fn new(u: usize, v: usize, j: f64) -> Self {
        if u <= v {
            Self { u, v, j }
        } else {
            Self { u: v, v: u, j }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    LongRange { alpha: f64, c: f64 },
    Explicit(Vec<Edge>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub interaction_term: f64,
    pub field_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct IsingModel {
    spins: Vec<Spin>,
    coupling: Coupling,
    min_distance: Option<f64>,
    tolerance: f64,
    // Sorted neighbour lists, explicit models only.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for IsingModel {
    fn eq(&self, other: &Self) -> bool {
        self.spins == other.spins
            && self.coupling == other.coupling
            && self.tolerance == other.tolerance
    }
}

fn check_finite(x: f64, path: impl FnOnce() -> String) -> Result<(), ModelError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite { path: path() })
    }
}

impl IsingModel {
    /// Validates every invariant and caches the minimum pairwise distance.
    pub fn new(spins: Vec<Spin>, coupling: Coupling) -> Result<Self, ModelError> {
        let n = spins.len();
        for (i, s) in spins.iter().enumerate() {
            check_finite(s.field, || format!("spins[{i}].field"))?;
            if let Some([x, y]) = s.position {
                check_finite(x, || format!("spins[{i}].pos[0]"))?;
                check_finite(y, || format!("spins[{i}].pos[1]"))?;
            }
        }

        let mut adjacency = Vec::new();
        let coupling = match coupling {
            Coupling::LongRange { alpha, c } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(ModelError::InvalidAlpha(alpha));
                }
                check_finite(c, || "c".to_string())?;
                if let Some(i) = spins.iter().position(|s| s.position.is_none()) {
                    return Err(ModelError::MissingPosition(i));
                }
                Coupling::LongRange { alpha, c }
            }
            Coupling::Explicit(edges) => {
                let mut canon = Vec::with_capacity(edges.len());
                for (k, e) in edges.iter().enumerate() {
                    for id in [e.u, e.v] {
                        if id >= n {
                            return Err(ModelError::Invalid {
                                path: format!("edges[{k}]"),
                                message: format!("endpoint {id} out of range for {n} spins"),
                            });
                        }
                    }
                    if e.u == e.v {
                        return Err(ModelError::SelfLoop { path: format!("edges[{k}]"), id: e.u });
                    }
                    check_finite(e.j, || format!("edges[{k}].J"))?;
                    canon.push((k, Edge::new(e.u, e.v, e.j)));
                }
                canon.sort_by_key(|(_, e)| (e.u, e.v));
                for w in canon.windows(2) {
                    if (w[0].1.u, w[0].1.v) == (w[1].1.u, w[1].1.v) {
                        return Err(ModelError::DuplicateEdge {
                            path: format!("edges[{}]", w[0].0.max(w[1].0)),
                            u: w[1].1.u,
                            v: w[1].1.v,
                        });
                    }
                }
                let edges: Vec<Edge> = canon.into_iter().map(|(_, e)| e).collect();
                adjacency = vec![Vec::new(); n];
                for e in &edges {
                    adjacency[e.u].push((e.v, e.j));
                    adjacency[e.v].push((e.u, e.j));
                }
                for list in &mut adjacency {
                    list.sort_by_key(|&(j, _)| j);
                }
                Coupling::Explicit(edges)
            }
        };

        let min_distance = if n >= 2 && spins.iter().all(|s| s.position.is_some()) {
            let mut best = f64::INFINITY;
            let mut best_pair = (0, 1);
            for i in 0..n {
                for j in i + 1..n {
                    let d = euclid(spins[i].position.unwrap(), spins[j].position.unwrap());
                    if d < best {
                        best = d;
                        best_pair = (i, j);
                    }
                }
            }
            if best <= 0.0 && matches!(coupling, Coupling::LongRange { .. }) {
                return Err(ModelError::CoincidentSpins(best_pair.0, best_pair.1));
            }
            Some(best)
        } else {
            None
        };

        Ok(Self {
            spins,
            coupling,
            min_distance,
            tolerance: DEFAULT_TOLERANCE,
            adjacency,
        })
    }

    pub fn long_range(
        alpha: f64,
        c: f64,
        positions: &[[f64; 2]],
        fields: &[f64],
    ) -> Result<Self, ModelError> {
        if positions.len() != fields.len() {
            return Err(ModelError::LengthMismatch {
                expected: positions.len(),
                found: fields.len(),
            });
        }
        let spins = positions
            .iter()
            .zip(fields)
            .map(|(&p, &h)| Spin::at(p, h))
            .collect();
        Self::new(spins, Coupling::LongRange { alpha, c })
    }

    pub fn explicit(spins: Vec<Spin>, edges: Vec<Edge>) -> Result<Self, ModelError> {
        Self::new(spins, Coupling::Explicit(edges))
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        assert!(tolerance >= 0.0 && tolerance.is_finite(), "tolerance must be finite and non-negative");
        self.tolerance = tolerance;
        self
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn coupling_kind(&self) -> &Coupling {
        &self.coupling
    }

    pub fn is_long_range(&self) -> bool {
        matches!(self.coupling, Coupling::LongRange { .. })
    }

    /// Decay exponent of a long-range model.
    pub fn alpha(&self) -> Option<f64> {
        match self.coupling {
            Coupling::LongRange { alpha, .. } => Some(alpha),
            Coupling::Explicit(_) => None,
        }
    }

    pub fn edges(&self) -> Option<&[Edge]> {
        match &self.coupling {
            Coupling::Explicit(edges) => Some(edges),
            Coupling::LongRange { .. } => None,
        }
    }

    pub fn field(&self, i: usize) -> f64 {
        self.spins[i].field
    }

    pub fn fields(&self) -> Vec<f64> {
        self.spins.iter().map(|s| s.field).collect()
    }

    pub fn position(&self, i: usize) -> Option<[f64; 2]> {
        self.spins[i].position
    }

    pub fn min_distance(&self) -> Option<f64> {
        self.min_distance
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn distance(&self, i: usize, j: usize) -> Option<f64> {
        Some(euclid(self.spins[i].position?, self.spins[j].position?))
    }

    /// Exact integer coordinates when every position is integral and within
    /// the range where `f64` represents integers exactly.
    pub fn integer_positions(&self) -> Option<Vec<[i64; 2]>> {
        const EXACT: f64 = 9_007_199_254_740_992.0;
        self.spins
            .iter()
            .map(|s| {
                let [x, y] = s.position?;
                let ok = |v: f64| v.fract() == 0.0 && v.abs() <= EXACT;
                (ok(x) && ok(y)).then_some([x as i64, y as i64])
            })
            .collect()
    }

    fn check_id(&self, i: usize) -> Result<(), ModelError> {
        if i < self.spins.len() {
            Ok(())
        } else {
            Err(ModelError::InvalidSpin { id: i, n: self.spins.len() })
        }
    }

    // Callers guarantee i != j and valid ids.
    #[inline]
    fn pair_coupling(&self, i: usize, j: usize) -> f64 {
        match &self.coupling {
            Coupling::LongRange { alpha, c } => {
                let d = euclid(self.spins[i].position.unwrap(), self.spins[j].position.unwrap());
                c * d.powf(-alpha)
            }
            Coupling::Explicit(_) => {
                let list = &self.adjacency[i];
                match list.binary_search_by_key(&j, |&(k, _)| k) {
                    Ok(pos) => list[pos].1,
                    Err(_) => 0.0,
                }
            }
        }
    }

    pub fn coupling(&self, i: usize, j: usize) -> Result<f64, ModelError> {
        self.check_id(i)?;
        self.check_id(j)?;
        if i == j {
            return Err(ModelError::SelfCoupling(i));
        }
        Ok(self.pair_coupling(i, j))
    }

    /// Visits every interacting pair `(i, j, J_ij)` with `i < j` in
    /// lexicographic order. Long-range models visit all pairs.
    pub fn for_each_pair(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.coupling {
            Coupling::LongRange { .. } => {
                let n = self.spins.len();
                for i in 0..n {
                    for j in i + 1..n {
                        f(i, j, self.pair_coupling(i, j));
                    }
                }
            }
            Coupling::Explicit(edges) => {
                for e in edges {
                    f(e.u, e.v, e.j);
                }
            }
        }
    }

    /// Row-major symmetric coupling matrix with a zero diagonal.
    pub fn dense_couplings(&self) -> Vec<f64> {
        let n = self.spins.len();
        let mut m = vec![0.0; n * n];
        self.for_each_pair(|i, j, jij| {
            m[i * n + j] = jij;
            m[j * n + i] = jij;
        });
        m
    }

    /// Σ|J| + Σ|h|, an upper bound on |H(σ)| for every state.
    pub fn energy_scale(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_pair(|_, _, j| s += j.abs());
        s + self.spins.iter().map(|sp| sp.field.abs()).sum::<f64>()
    }

    fn check_state(&self, state: &SpinState) -> Result<(), ModelError> {
        if state.len() == self.spins.len() {
            Ok(())
        } else {
            Err(ModelError::LengthMismatch {
                expected: self.spins.len(),
                found: state.len(),
            })
        }
    }

    /// Evaluates the Hamiltonian: pairs in `(i < j)` lexicographic order,
    /// then fields by id, so repeated calls are bit-identical.
    pub fn energy(&self, state: &SpinState) -> Result<EnergyBreakdown, ModelError> {
        self.check_state(state)?;
        let s = state.values();
        let mut interaction_term = 0.0;
        self.for_each_pair(|i, j, jij| {
            interaction_term += -jij * f64::from(s[i] * s[j]);
        });
        let mut field_term = 0.0;
        for (sp, &v) in self.spins.iter().zip(s) {
            field_term += -sp.field * f64::from(v);
        }
        Ok(EnergyBreakdown {
            interaction_term,
            field_term,
            total: interaction_term + field_term,
        })
    }

    /// Same terms as [`IsingModel::energy`], accumulated with compensation.
    pub fn energy_compensated(&self, state: &SpinState) -> Result<CompensatedSum, ModelError> {
        self.check_state(state)?;
        let s = state.values();
        let mut acc = CompensatedSum::new();
        self.for_each_pair(|i, j, jij| acc.add(-jij * f64::from(s[i] * s[j])));
        for (sp, &v) in self.spins.iter().zip(s) {
            acc.add(-sp.field * f64::from(v));
        }
        Ok(acc)
    }

    /// `energy(flip(state, k)) − energy(state)` in O(n).
    pub fn delta_energy_flip(&self, state: &SpinState, k: usize) -> Result<f64, ModelError> {
        self.check_state(state)?;
        self.check_id(k)?;
        let s = state.values();
        let mut local = self.spins[k].field;
        match &self.coupling {
            Coupling::LongRange { .. } => {
                for j in (0..s.len()).filter(|&j| j != k) {
                    local += self.pair_coupling(k, j) * f64::from(s[j]);
                }
            }
            Coupling::Explicit(_) => {
                for &(j, jkj) in &self.adjacency[k] {
                    local += jkj * f64::from(s[j]);
                }
            }
        }
        Ok(2.0 * f64::from(s[k]) * local)
    }

    /// Same model with every field replaced.
    pub fn with_fields(&self, fields: &[f64]) -> Result<Self, ModelError> {
        if fields.len() != self.spins.len() {
            return Err(ModelError::LengthMismatch {
                expected: self.spins.len(),
                found: fields.len(),
            });
        }
        let spins = self
            .spins
            .iter()
            .zip(fields)
            .map(|(s, &h)| Spin { position: s.position, field: h })
            .collect();
        Ok(Self::new(spins, self.coupling.clone())?.with_tolerance(self.tolerance))
    }
}

pub(crate) fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
