//! Unit-distance maximum-independent-set instances and their
//! nearest-neighbour Ising encoding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{euclid, Edge, IsingModel, ModelError, Spin, SpinState};

/// Two vertices are adjacent when their distance is within this of 1.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MisError {
    #[error("vertices[{index}].id: {message}")]
    BadId { index: usize, message: String },
    #[error("vertices[{0}].pos: coordinates must be finite")]
    NonFinite(usize),
    #[error("vertices {0} and {1} share a position")]
    Coincident(usize, usize),
    #[error("malformed instance document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexDocument {
    id: usize,
    pos: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisDocument {
    vertices: Vec<VertexDocument>,
}

/// Vertices in the plane; edges join pairs at unit distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MisDocument", into = "MisDocument")]
pub struct MisInstance {
    positions: Vec<[f64; 2]>,
    edges: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
}

impl MisInstance {
    pub fn new(positions: Vec<[f64; 2]>) -> Result<Self, MisError> {
        let n = positions.len();
        if let Some(k) = positions.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(MisError::NonFinite(k));
        }
        let mut edges = Vec::new();
        let mut neighbours = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                let d = euclid(positions[i], positions[j]);
                if d == 0.0 {
                    return Err(MisError::Coincident(i, j));
                }
                if (d - 1.0).abs() <= UNIT_TOLERANCE {
                    edges.push((i, j));
                    neighbours[i].push(j);
                    neighbours[j].push(i);
                }
            }
        }
        Ok(Self { positions, edges, neighbours })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.neighbours[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbours[v].len()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mut member = vec![false; self.len()];
        for &v in set {
            member[v] = true;
        }
        self.edges.iter().all(|&(u, v)| !(member[u] && member[v]))
    }

    pub fn from_json(text: &str) -> Result<Self, MisError> {
        let doc: MisDocument = serde_json::from_str(text).map_err(|e| MisError::Malformed(e.to_string()))?;
        doc.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MisDocument::from(self.clone())).expect("instances always serialize")
    }
}

impl TryFrom<MisDocument> for MisInstance {
    type Error = MisError;

    fn try_from(doc: MisDocument) -> Result<Self, MisError> {
        let n = doc.vertices.len();
        let mut slots = vec![None; n];
        for (index, v) in doc.vertices.iter().enumerate() {
            if v.id >= n {
                return Err(MisError::BadId { index, message: format!("ids must be 0..{n}, got {}", v.id) });
            }
            if slots[v.id].replace(v.pos).is_some() {
                return Err(MisError::BadId { index, message: format!("duplicate id {}", v.id) });
            }
        }
        Self::new(slots.into_iter().map(Option::unwrap).collect())
    }
}

impl From<MisInstance> for MisDocument {
    fn from(inst: MisInstance) -> Self {
        Self {
            vertices: inst
                .positions
                .into_iter()
                .enumerate()
                .map(|(id, pos)| VertexDocument { id, pos })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum MisViolation {
    DegreeTooHigh { vertex: usize, degree: usize },
    TooClose { u: usize, v: usize, distance: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MisValidation {
    pub violations: Vec<MisViolation>,
    /// Non-adjacent pairs at exactly √2: allowed, but the strict separation
    /// the construction assumes does not hold.
    pub sqrt2_pairs: Vec<(usize, usize)>,
}

impl MisValidation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Degree at most 3, non-adjacent pairs at distance `>= √2`.
pub fn validate_mis_instance(inst: &MisInstance) -> MisValidation {
    let mut report = MisValidation::default();
    for v in 0..inst.len() {
        if inst.degree(v) > 3 {
            report.violations.push(MisViolation::DegreeTooHigh { vertex: v, degree: inst.degree(v) });
        }
    }
    let root2 = std::f64::consts::SQRT_2;
    for u in 0..inst.len() {
        for v in u + 1..inst.len() {
            if inst.neighbours[u].contains(&v) {
                continue;
            }
            let distance = euclid(inst.positions[u], inst.positions[v]);
            if distance < root2 - UNIT_TOLERANCE {
                report.violations.push(MisViolation::TooClose { u, v, distance });
            } else if distance <= root2 + UNIT_TOLERANCE {
                report.sqrt2_pairs.push((u, v));
            }
        }
    }
    if !report.sqrt2_pairs.is_empty() {
        log::warn!("{} non-adjacent pairs sit at exactly sqrt(2)", report.sqrt2_pairs.len());
    }
    report
}

/// `H = Σ_edges σ_u σ_v + Σ_w σ_w`, i.e. `J_uv = −1` and `h_w = −1`.
/// Positions are carried along for reference.
pub fn encode_nn(inst: &MisInstance) -> Result<IsingModel, ModelError> {
    let spins = inst.positions.iter().map(|&p| Spin::at(p, -1.0)).collect();
    let edges = inst.edges.iter().map(|&(u, v)| Edge::new(u, v, -1.0)).collect();
    IsingModel::explicit(spins, edges)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodedSet {
    pub independent_set: Vec<usize>,
    pub repaired: bool,
}

/// `{w : σ_w = −1}`, repaired if needed: for each edge with both ends in
/// the set (lexicographic edge order), the endpoint of larger degree is
/// dropped, the smaller id on ties.
pub fn decode_independent_set(state: &SpinState, inst: &MisInstance) -> DecodedSet {
    let mut member: Vec<bool> = state.values().iter().map(|&s| s == -1).collect();
    let mut repaired = false;
    for &(u, v) in &inst.edges {
        if member[u] && member[v] {
            let drop = match inst.degree(u).cmp(&inst.degree(v)) {
                std::cmp::Ordering::Greater => u,
                std::cmp::Ordering::Less => v,
                std::cmp::Ordering::Equal => u,
            };
            member[drop] = false;
            repaired = true;
        }
    }
    DecodedSet {
        independent_set: (0..member.len()).filter(|&v| member[v]).collect(),
        repaired,
    }
}

/// Size of a maximum independent set, by exhaustive branching.
pub fn maximum_independent_set_size(inst: &MisInstance) -> usize {
    assert!(inst.len() <= 64, "exhaustive search is limited to 64 vertices");
    let masks: Vec<u64> = inst
        .neighbours
        .iter()
        .map(|ns| ns.iter().fold(0u64, |m, &v| m | 1 << v))
        .collect();
    fn best(candidates: u64, masks: &[u64]) -> usize {
        if candidates == 0 {
            return 0;
        }
        let v = candidates.trailing_zeros() as usize;
        let rest = candidates & !(1 << v);
        let with = 1 + best(rest & !masks[v], masks);
        if masks[v] & rest == 0 {
            return with;
        }
        with.max(best(rest, masks))
    }
    let all = if inst.len() == 64 { u64::MAX } else { (1u64 << inst.len()) - 1 };
    best(all, &masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{ground_states, SolverOptions};

    pub(crate) fn path3() -> MisInstance {
        MisInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(validate_mis_instance(&path3()).is_ok());
        let close = MisInstance::new(vec![[0.0, 0.0], [1.2, 0.0]]).unwrap();
        assert!(matches!(
            validate_mis_instance(&close).violations[..],
            [MisViolation::TooClose { u: 0, v: 1, .. }]
        ));
        let star = MisInstance::new(vec![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let report = validate_mis_instance(&star);
        assert!(report.violations.contains(&MisViolation::DegreeTooHigh { vertex: 0, degree: 4 }));
        assert!(!report.sqrt2_pairs.is_empty());
    }

    #[test]
    fn nn_encoding_examples() {
        let opts = SolverOptions::single_threaded();
        let single = MisInstance::new(vec![[0.0, 0.0]]).unwrap();
        let g = ground_states(&encode_nn(&single).unwrap(), &opts).unwrap();
        assert_eq!((g.energy, g.states[0].to_string()), (-1.0, "-".to_string()));

        let g = ground_states(&encode_nn(&path3()).unwrap(), &opts).unwrap();
        assert_eq!(g.energy, -3.0);
        assert_eq!(g.states.len(), 1);
        assert_eq!(g.states[0].to_string(), "-+-");
        assert_eq!(decode_independent_set(&g.states[0], &path3()).independent_set, vec![0, 2]);

        let empty = MisInstance::new(vec![[0.0, 0.0], [3.0, 0.0], [0.0, 3.0], [3.0, 3.0]]).unwrap();
        let g = ground_states(&encode_nn(&empty).unwrap(), &opts).unwrap();
        assert_eq!(g.energy, -4.0);
        assert_eq!(decode_independent_set(&g.states[0], &empty).independent_set, vec![0, 1, 2, 3]);
    }

    #[test]
    fn encoding_matches_formula_on_every_state() {
        let inst = path3();
        let m = encode_nn(&inst).unwrap();
        for bits in 0..8 {
            let s = SpinState::from_bits(bits, 3);
            let v: Vec<f64> = s.values().iter().map(|&x| f64::from(x)).collect();
            let h = v[0] * v[1] + v[1] * v[2] + v.iter().sum::<f64>();
            assert_eq!(m.energy(&s).unwrap().total, h);
        }
    }

    #[test]
    fn decoding_and_repair() {
        let inst = path3();
        let d = decode_independent_set(&"-+-".parse().unwrap(), &inst);
        assert_eq!(d, DecodedSet { independent_set: vec![0, 2], repaired: false });
        assert!(decode_independent_set(&"+++".parse().unwrap(), &inst).independent_set.is_empty());
        let pair = MisInstance::new(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let d = decode_independent_set(&"--".parse().unwrap(), &pair);
        assert_eq!(d, DecodedSet { independent_set: vec![1], repaired: true });
        // The middle vertex has the larger degree and goes first.
        let d = decode_independent_set(&"---".parse().unwrap(), &inst);
        assert_eq!(d, DecodedSet { independent_set: vec![0, 2], repaired: true });
    }

    #[test]
    fn exhaustive_mis_sizes() {
        assert_eq!(maximum_independent_set_size(&path3()), 2);
        let hexagon: Vec<[f64; 2]> = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        assert_eq!(maximum_independent_set_size(&MisInstance::new(hexagon).unwrap()), 3);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"vertices":[{"id":1,"pos":[1,0]},{"id":0,"pos":[0,0]}]}"#;
        let inst = MisInstance::from_json(text).unwrap();
        assert_eq!(inst.edges(), &[(0, 1)]);
        assert_eq!(MisInstance::from_json(&inst.to_json()).unwrap(), inst);
        assert!(MisInstance::from_json(r#"{"vertices":[{"id":2,"pos":[0,0]}]}"#).is_err());
    }
}
