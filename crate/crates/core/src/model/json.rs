use serde::{Deserialize, Serialize};

use super::{Coupling, Edge, IsingModel, ModelError, Spin, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LongRange,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinDocument {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<[f64; 2]>,
    #[serde(default)]
    pub field: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub u: usize,
    pub v: usize,
    #[serde(rename = "J")]
    pub j: f64,
}

/// On-disk form of an [`IsingModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub spins: Vec<SpinDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeDocument>>,
    /// Energy-comparison tolerance; omitted when it equals the default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invalid { path: path.into(), message: message.into() }
}

impl TryFrom<ModelDocument> for IsingModel {
    type Error = ModelError;

    fn try_from(doc: ModelDocument) -> Result<Self, Self::Error> {
        let n = doc.spins.len();
        let mut slots: Vec<Option<Spin>> = vec![None; n];
        for (k, s) in doc.spins.iter().enumerate() {
            if s.id >= n {
                return Err(invalid(
                    format!("spins[{k}].id"),
                    format!("id {} leaves a gap; ids must be 0..{}", s.id, n),
                ));
            }
            if slots[s.id].is_some() {
                return Err(invalid(format!("spins[{k}].id"), format!("duplicate id {}", s.id)));
            }
            slots[s.id] = Some(Spin { position: s.pos, field: s.field });
        }
        let spins: Vec<Spin> = slots.into_iter().map(Option::unwrap).collect();

        let coupling = match doc.kind {
            ModelKind::LongRange => {
                if doc.edges.is_some() {
                    return Err(invalid("edges", "not allowed for kind long_range"));
                }
                let alpha = doc.alpha.ok_or_else(|| invalid("alpha", "required for kind long_range"))?;
                let c = doc.c.ok_or_else(|| invalid("c", "required for kind long_range"))?;
                if !(alpha > 0.0) {
                    return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
                }
                if let Some(k) = doc.spins.iter().position(|s| s.pos.is_none()) {
                    return Err(invalid(format!("spins[{k}].pos"), "required for kind long_range"));
                }
                Coupling::LongRange { alpha, c }
            }
            ModelKind::Explicit => {
                if doc.alpha.is_some() || doc.c.is_some() {
                    return Err(invalid("alpha", "alpha/c not allowed for kind explicit"));
                }
                let edges = doc.edges.ok_or_else(|| invalid("edges", "required for kind explicit"))?;
                Coupling::Explicit(edges.iter().map(|e| Edge::new(e.u, e.v, e.j)).collect())
            }
        };

        let model = IsingModel::new(spins, coupling).map_err(|e| match e {
            ModelError::CoincidentSpins(i, j) => invalid(
                format!("spins[{j}].pos"),
                format!("coincident spins {i} and {j}"),
            ),
            other => other,
        })?;
        match doc.tolerance {
            Some(t) if !(t >= 0.0 && t.is_finite()) => {
                Err(invalid("tolerance", "must be finite and non-negative"))
            }
            Some(t) => Ok(model.with_tolerance(t)),
            None => Ok(model),
        }
    }
}

impl From<&IsingModel> for ModelDocument {
    fn from(m: &IsingModel) -> Self {
        let spins = m
            .spins()
            .iter()
            .enumerate()
            .map(|(id, s)| SpinDocument { id, pos: s.position, field: s.field })
            .collect();
        let (kind, alpha, c, edges) = match m.coupling_kind() {
            Coupling::LongRange { alpha, c } => (ModelKind::LongRange, Some(*alpha), Some(*c), None),
            Coupling::Explicit(edges) => (
                ModelKind::Explicit,
                None,
                None,
                Some(edges.iter().map(|e| EdgeDocument { u: e.u, v: e.v, j: e.j }).collect()),
            ),
        };
        let tolerance = (m.tolerance() != DEFAULT_TOLERANCE).then_some(m.tolerance());
        Self { kind, alpha, c, spins, edges, tolerance }
    }
}

impl IsingModel {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
        doc.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from(self)).expect("model documents always serialize")
    }
}
