//! Compiling maximum-independent-set instances into square-grid
//! antiferromagnetic long-range models.
//!
//! The chain of models is `[M_NN, M_t, …, M_0, M_Grid]`: the
//! nearest-neighbour encoding, its long-range lift at exponent `α + 4t`,
//! `t` logical-spin layers each lowering the exponent by four, and a final
//! snap to integer coordinates. Between consecutive models sits an
//! `(a, δ)`-map, recorded as a [`MapRecord`]; a lower-model state `σ'`
//! satisfies `|E'(σ') − offset − a·E(g(σ'))| <= a·δ` on the map's domain.

mod mis;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{self, GadgetError, GadgetSpec, BLOCK};
use crate::model::{Coupling, IsingModel, ModelError, SpinState};
use crate::sum::CompensatedSum;

pub use mis::{
    decode_independent_set, encode_nn, maximum_independent_set_size, validate_mis_instance, DecodedSet,
    MisDocument, MisError, MisInstance, MisValidation, MisViolation, UNIT_TOLERANCE,
};

/// Composed maps must keep `Δ` below this for ground states to survive.
pub const MAX_COMPOSED_DELTA: f64 = 5.0 / 12.0;
/// Residual bound of the long-range lift.
pub const LIFT_DELTA: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("alpha {alpha} must exceed the threshold {threshold}")]
    BelowThreshold { alpha: f64, threshold: f64 },
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("model must be long-range")]
    NotLongRange,
    #[error("logical layers need coupling constant c = -1, got {0}")]
    NotAntiferromagnetic(f64),
    #[error("exponent {0} leaves no positive exponent after lowering by four")]
    ExponentTooSmall(f64),
    #[error("spin {spin} has field {field}; logical layers need |h| <= 1")]
    FieldTooLarge { spin: usize, field: f64 },
    #[error("epsilon {epsilon} is not below the bound {bound}")]
    EpsilonTooLarge { epsilon: f64, bound: f64 },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("gadget separation {separation} is below the required {required}")]
    SeparationTooSmall { separation: f64, required: f64 },
    #[error("spins {0} and {1} snap to the same grid point")]
    Collision(usize, usize),
    #[error("layer {layer}: gadget {gadget} is in invalid pattern {pattern}")]
    InvalidGadget { layer: usize, gadget: usize, pattern: String },
    #[error("state has {found} spins, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("cannot compose an empty list of maps")]
    EmptyComposition,
    #[error("{layer}: {quantity} underflows double precision")]
    Underflow { layer: String, quantity: String },
    #[error("composed delta {delta} is not below 5/12")]
    DeltaTooLarge { delta: f64 },
    #[error("{t} logical layers requested, at most {max} allowed")]
    TooDeep { t: usize, max: usize },
    #[error("{layer}: {source}")]
    Layer { layer: String, source: Box<ReductionError> },
    #[error("bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Mis(#[from] MisError),
}

impl ReductionError {
    fn in_layer(self, layer: impl Into<String>) -> Self {
        ReductionError::Layer { layer: layer.into(), source: Box::new(self) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Identity,
    Lift,
    Logical,
    Grid,
}

/// How a lower-model state is read back as an upper-model state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeRule {
    /// Spin `i` maps to spin `i`.
    Identity,
    /// Block `k` of eight spins maps to spin `k`: σ+ to `+1`, σ− to `−1`.
    Gadget,
}

/// One `(a, δ)`-map. `a` is kept as `ln a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRecord {
    pub kind: LayerKind,
    pub log_scale: f64,
    /// Linear `a`, exactly as used by the construction; zero if it
    /// underflows.
    pub scale: f64,
    pub delta: f64,
    /// Additive constant `hi + lo` between `E'` and `a·E`. Zero except for
    /// logical layers, where it is the intra-gadget energy of valid states.
    #[serde(default)]
    pub offset: [f64; 2],
    pub decode: DecodeRule,
    pub upper_spins: usize,
    pub lower_spins: usize,
    /// Construction parameter, when the layer has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl MapRecord {
    pub fn identity(n: usize) -> Self {
        Self {
            kind: LayerKind::Identity,
            log_scale: 0.0,
            scale: 1.0,
            delta: 0.0,
            offset: [0.0; 2],
            decode: DecodeRule::Identity,
            upper_spins: n,
            lower_spins: n,
            epsilon: None,
        }
    }

    /// `a`, falling back to `exp(ln a)` when the linear value underflowed.
    pub fn a(&self) -> f64 {
        if self.scale > 0.0 {
            self.scale
        } else {
            self.log_scale.exp()
        }
    }

    pub fn offset(&self) -> CompensatedSum {
        CompensatedSum::from_parts(self.offset[0], self.offset[1])
    }

    /// Lower-model state to upper-model state. Gadget layers report the
    /// first block not in a valid pattern as `InvalidGadget` with layer 0;
    /// pipeline decoding fills in the layer.
    pub fn decode(&self, lower: &SpinState) -> Result<SpinState, ReductionError> {
        if lower.len() != self.lower_spins {
            return Err(ReductionError::LengthMismatch { expected: self.lower_spins, found: lower.len() });
        }
        match self.decode {
            DecodeRule::Identity => Ok(lower.clone()),
            DecodeRule::Gadget => {
                let logical = lower
                    .values()
                    .chunks(BLOCK)
                    .enumerate()
                    .map(|(gadget, block)| {
                        gadget::decode_pattern(block).ok_or_else(|| ReductionError::InvalidGadget {
                            layer: 0,
                            gadget,
                            pattern: SpinState::new(block.to_vec()).map(|s| s.to_string()).unwrap_or_default(),
                        })
                    })
                    .collect::<Result<Vec<i8>, _>>()?;
                Ok(SpinState::new(logical)?)
            }
        }
    }

    /// The lower-model state decoding to `upper`; for gadget layers, the
    /// valid state with each block in σ±.
    pub fn encode(&self, upper: &SpinState) -> Result<SpinState, ReductionError> {
        if upper.len() != self.upper_spins {
            return Err(ReductionError::LengthMismatch { expected: self.upper_spins, found: upper.len() });
        }
        match self.decode {
            DecodeRule::Identity => Ok(upper.clone()),
            DecodeRule::Gadget => Ok(SpinState::new(
                upper.values().iter().flat_map(|&v| gadget::pattern(v)).collect(),
            )?),
        }
    }
}

/// Composed `(A, Δ)` of a chain of maps, `A` as `ln A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub log_scale: f64,
    pub delta: f64,
}

/// Folds `(ln a, δ)` pairs ordered outer to inner: composing an accumulated
/// `(A, Δ)` with an inner `(a', δ')` gives `(A·a', Δ + δ'/A)`.
pub fn compose_pairs(pairs: &[(f64, f64)]) -> Result<Composition, ReductionError> {
    let (&(log_a, delta), rest) = pairs.split_first().ok_or(ReductionError::EmptyComposition)?;
    Ok(rest.iter().fold(Composition { log_scale: log_a, delta }, |acc, &(la, d)| Composition {
        log_scale: acc.log_scale + la,
        delta: acc.delta + d * (-acc.log_scale).exp(),
    }))
}

pub fn compose_maps(records: &[MapRecord]) -> Result<Composition, ReductionError> {
    let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.log_scale, r.delta)).collect();
    compose_pairs(&pairs)
}

/// Exponent above which the long-range lift is a `(1, 1/4)`-map:
/// `(2/ln 2)·ln(|V|(|V|+1)) + 2`.
pub fn alpha_threshold(v_count: usize) -> f64 {
    let v = v_count as f64;
    2.0 / std::f64::consts::LN_2 * (v * (v + 1.0)).ln() + 2.0
}

/// Smallest `t >= 0` with `alpha_target + 4t` above the threshold.
pub fn choose_layers(v_count: usize, alpha_target: f64) -> usize {
    let threshold = alpha_threshold(v_count);
    let mut t = 0;
    while alpha_target + 4.0 * t as f64 <= threshold {
        t += 1;
    }
    t
}

fn check_instance(inst: &MisInstance) -> Result<(), ReductionError> {
    let report = validate_mis_instance(inst);
    if report.is_ok() {
        Ok(())
    } else {
        Err(ReductionError::InvalidInstance(
            serde_json::to_string(&report.violations).expect("violations serialize"),
        ))
    }
}

/// Antiferromagnetic long-range model (`c = −1`) with `h = −1` on a spin at
/// every vertex, and the identity `(1, 1/4)`-map back to [`encode_nn`].
pub fn lift_long_range(inst: &MisInstance, alpha: f64) -> Result<(IsingModel, MapRecord), ReductionError> {
    check_instance(inst)?;
    let threshold = alpha_threshold(inst.len());
    if !(alpha > threshold) {
        return Err(ReductionError::BelowThreshold { alpha, threshold });
    }
    let n = inst.len();
    let model = IsingModel::long_range(alpha, -1.0, inst.positions(), &vec![-1.0; n])?;
    let record = MapRecord {
        kind: LayerKind::Lift,
        delta: LIFT_DELTA,
        ..MapRecord::identity(n)
    };
    Ok((model, record))
}

fn long_range_params(model: &IsingModel) -> Result<(f64, f64), ReductionError> {
    match model.coupling_kind() {
        Coupling::LongRange { alpha, c } => Ok((*alpha, *c)),
        Coupling::Explicit(_) => Err(ReductionError::NotLongRange),
    }
}

/// `ln(β²(β+2)²ε^(β+4))`, the scale of a logical layer with lower exponent `β`.
pub fn logical_log_scale(beta: f64, epsilon: f64) -> f64 {
    2.0 * beta.ln() + 2.0 * (beta + 2.0).ln() + (beta + 4.0) * epsilon.ln()
}

/// Largest admissible `ε` for a logical layer over `n` upper spins with
/// minimum distance `d_min`:
/// `δ·2β²(β+2)²·min(1, d_min)^(β+5) / (n(n+1)·f)`.
pub fn logical_epsilon_bound(n: usize, beta: f64, f: f64, delta: f64, d_min: Option<f64>) -> f64 {
    let n = n as f64;
    let d = d_min.unwrap_or(1.0).min(1.0);
    delta * 2.0 * beta.powi(2) * (beta + 2.0).powi(2) * d.powf(beta + 5.0) / (n * (n + 1.0) * f)
}

/// Centre-to-centre distance that keeps every block's internal minimum at
/// σ± with the other `8(n−1)` spins frozen: the radius of
/// [`gadget::min_separation`] measured from the far block's outermost spin.
pub fn required_gadget_separation(beta: f64, h_abs: f64, n: usize) -> Result<f64, ReductionError> {
    if n < 2 {
        return Ok(0.0);
    }
    Ok(gadget::min_separation(beta, h_abs, BLOCK * (n - 1))? + std::f64::consts::SQRT_2)
}

/// Intra-gadget energy shared by every valid state of `model`.
fn intra_gadget_offset(model: &IsingModel) -> Result<CompensatedSum, ReductionError> {
    let mut acc = CompensatedSum::new();
    for start in (0..model.len()).step_by(BLOCK) {
        for a in 0..BLOCK {
            for b in a + 1..BLOCK {
                let j = model.coupling(start + a, start + b)?;
                let p = f64::from(gadget::PLUS_PATTERN[a] * gadget::PLUS_PATTERN[b]);
                acc.add(-j * p);
            }
        }
    }
    Ok(acc)
}

/// Replaces every spin of an exponent-`(β+4)` antiferromagnetic model by a
/// logical spin at `position/ε` carrying logical field `h·a`, with
/// `a = β²(β+2)²ε^(β+4)`.
pub fn reduce_exponent(model: &IsingModel, epsilon: f64, delta: f64) -> Result<(IsingModel, MapRecord), ReductionError> {
    let (alpha_up, c) = long_range_params(model)?;
    if c != -1.0 {
        return Err(ReductionError::NotAntiferromagnetic(c));
    }
    let beta = alpha_up - 4.0;
    if !(beta > 0.0) {
        return Err(ReductionError::ExponentTooSmall(alpha_up));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ReductionError::InvalidEpsilon(epsilon));
    }
    let n = model.len();
    let fields = model.fields();
    if let Some(spin) = fields.iter().position(|h| h.abs() > 1.0) {
        return Err(ReductionError::FieldTooLarge { spin, field: fields[spin] });
    }
    let f = gadget::residual_constant(beta)?;
    let bound = logical_epsilon_bound(n, beta, f, delta, model.min_distance());
    if !(epsilon < bound) {
        return Err(ReductionError::EpsilonTooLarge { epsilon, bound });
    }
    let log_scale = logical_log_scale(beta, epsilon);
    let a = log_scale.exp();
    let h_max = fields.iter().fold(0.0f64, |m, h| m.max(h.abs()));
    if h_max > 0.0 && !(h_max * a / BLOCK as f64).is_normal() {
        return Err(ReductionError::Underflow {
            layer: format!("logical layer at exponent {beta}"),
            quantity: "logical field".into(),
        });
    }
    if let Some(d_min) = model.min_distance() {
        let required = required_gadget_separation(beta, h_max * a, n)?;
        let separation = d_min / epsilon;
        if separation < required {
            return Err(ReductionError::SeparationTooSmall { separation, required });
        }
    }

    let mut spins = Vec::with_capacity(BLOCK * n);
    for (v, &h) in fields.iter().enumerate() {
        let [x, y] = model.position(v).expect("long-range spins are placed");
        let spec = GadgetSpec::new([x / epsilon, y / epsilon], beta, h * a);
        spins.extend(gadget::make_logical_spin(&spec)?);
    }
    let lower = IsingModel::new(spins, Coupling::LongRange { alpha: beta, c: -1.0 })?
        .with_tolerance(model.tolerance() * a);
    let (hi, lo) = intra_gadget_offset(&lower)?.parts();
    let record = MapRecord {
        kind: LayerKind::Logical,
        log_scale,
        scale: a,
        delta,
        offset: [hi, lo],
        decode: DecodeRule::Gadget,
        upper_spins: n,
        lower_spins: BLOCK * n,
        epsilon: Some(epsilon),
    };
    Ok((lower, record))
}

/// Largest admissible grid spacing: `d^(α+1)·δ / (2(α+1)·n(n+1))`, infinite
/// for a single spin.
pub fn snap_epsilon_bound(model: &IsingModel, delta: f64) -> Result<f64, ReductionError> {
    let (alpha, _) = long_range_params(model)?;
    let Some(d) = model.min_distance() else {
        return Ok(f64::INFINITY);
    };
    let n = model.len() as f64;
    Ok(d.powf(alpha + 1.0) * delta / (2.0 * (alpha + 1.0) * n * (n + 1.0)))
}

/// The largest power of two at most half of `bound`, capped at 1.
///
/// A power-of-two spacing divides binary coordinates exactly, so `x/ε` is
/// computed without rounding and the snap moves spins by the floor alone.
pub fn grid_epsilon(bound: f64) -> f64 {
    let half = bound / 2.0;
    if half >= 1.0 {
        return 1.0;
    }
    let mut eps = half.log2().floor().exp2();
    while eps > half {
        eps /= 2.0;
    }
    while eps * 2.0 <= half {
        eps *= 2.0;
    }
    eps
}

/// Moves spin `i` to `(⌊x_i/ε⌋, ⌊y_i/ε⌋)` and scales fields by `ε^α`.
///
/// The spacing precondition is not enforced here (see
/// [`snap_epsilon_bound`]); only collisions are rejected.
pub fn snap_to_grid(model: &IsingModel, epsilon: f64, delta: f64) -> Result<(IsingModel, MapRecord), ReductionError> {
    let (alpha, c) = long_range_params(model)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ReductionError::InvalidEpsilon(epsilon));
    }
    let bound = snap_epsilon_bound(model, delta)?;
    if !(epsilon < bound) {
        log::warn!("grid spacing {epsilon} is not below the bound {bound}; the map bound may fail");
    }
    let log_scale = alpha * epsilon.ln();
    // Exact for a power-of-two spacing and an integral exponent.
    let a = epsilon.powf(alpha);
    let fields = model.fields();
    if fields.iter().any(|&h| h != 0.0 && !(h * a).is_normal()) {
        return Err(ReductionError::Underflow { layer: "grid layer".into(), quantity: "field".into() });
    }
    let positions: Vec<[f64; 2]> = (0..model.len())
        .map(|i| {
            let [x, y] = model.position(i).expect("long-range spins are placed");
            [(x / epsilon).floor(), (y / epsilon).floor()]
        })
        .collect();
    let scaled: Vec<f64> = fields.iter().map(|h| h * a).collect();
    let grid = IsingModel::long_range(alpha, c, &positions, &scaled)
        .map_err(|e| match e {
            ModelError::CoincidentSpins(i, j) => ReductionError::Collision(i, j),
            other => other.into(),
        })?
        .with_tolerance(model.tolerance() * a);
    let record = MapRecord {
        kind: LayerKind::Grid,
        log_scale,
        scale: a,
        delta,
        epsilon: Some(epsilon),
        ..MapRecord::identity(model.len())
    };
    Ok((grid, record))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    pub t_override: Option<usize>,
    pub max_depth: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { t_override: None, max_depth: 2 }
    }
}

/// Models `[M_NN, M_t, …, M_0, M_Grid]` and the maps between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineBundle {
    pub instance: MisInstance,
    pub alpha_target: f64,
    pub t: usize,
    #[serde(skip)]
    pub models: Vec<IsingModel>,
    /// `maps[k]` sends states of `models[k + 1]` to states of `models[k]`.
    pub maps: Vec<MapRecord>,
    pub composed: Composition,
}

impl PipelineBundle {
    pub fn grid(&self) -> &IsingModel {
        self.models.last().expect("bundles hold at least three models")
    }

    pub fn nn(&self) -> &IsingModel {
        &self.models[0]
    }
}

/// Spacing used by [`compile_pipeline`] for a logical layer: half the
/// admissible bound, shrunk until blocks sit at twice the required
/// separation.
pub fn logical_epsilon(model: &IsingModel, beta: f64, delta: f64) -> Result<f64, ReductionError> {
    let f = gadget::residual_constant(beta)?;
    let n = model.len();
    let mut eps = logical_epsilon_bound(n, beta, f, delta, model.min_distance()) / 2.0;
    let h_max = model.fields().iter().fold(0.0f64, |m, h| m.max(h.abs()));
    if let Some(d_min) = model.min_distance() {
        for _ in 0..64 {
            let a = logical_log_scale(beta, eps).exp();
            let required = required_gadget_separation(beta, h_max * a, n)?;
            if d_min / eps >= 2.0 * required {
                break;
            }
            eps = eps.min(d_min / (2.0 * required));
        }
    }
    Ok(eps)
}

/// Builds the whole chain. Layer `i` (from `t` down to 1) uses
/// `δ_i = ½·Π_{j>i} F_j / (12t)` and the grid uses `δ = ½·Π F_j / 12`, so
/// each contributes less than `1/12t` resp. `1/12` to the composed `Δ`.
pub fn compile_pipeline(inst: &MisInstance, alpha_target: f64, opts: &CompileOptions) -> Result<PipelineBundle, ReductionError> {
    check_instance(inst)?;
    if !(alpha_target > 0.0 && alpha_target.is_finite()) {
        return Err(ReductionError::InvalidAlpha(alpha_target));
    }
    let t = opts.t_override.unwrap_or_else(|| choose_layers(inst.len(), alpha_target));
    if t > opts.max_depth {
        return Err(ReductionError::TooDeep { t, max: opts.max_depth });
    }
    let nn = encode_nn(inst)?;
    let (lifted, lift) = lift_long_range(inst, alpha_target + 4.0 * t as f64).map_err(|e| e.in_layer("lift"))?;
    let mut models = vec![nn, lifted];
    let mut maps = vec![lift];

    let mut log_prod_f = 0.0f64;
    for i in (1..=t).rev() {
        let layer = format!("logical layer {i}");
        let delta = 0.5 * log_prod_f.exp() / (12.0 * t as f64);
        if !delta.is_normal() {
            return Err(ReductionError::Underflow { layer, quantity: "delta".into() });
        }
        let upper = models.last().expect("nonempty");
        let beta = alpha_target + 4.0 * (i - 1) as f64;
        let eps = logical_epsilon(upper, beta, delta).map_err(|e| e.in_layer(layer.clone()))?;
        let (lower, record) = reduce_exponent(upper, eps, delta).map_err(|e| e.in_layer(layer.clone()))?;
        log::info!("{layer}: epsilon {eps:e}, ln a {}, delta {delta:e}, {} spins", record.log_scale, lower.len());
        log_prod_f += record.log_scale;
        models.push(lower);
        maps.push(record);
    }

    let delta = 0.5 * log_prod_f.exp() / 12.0;
    if !delta.is_normal() {
        return Err(ReductionError::Underflow { layer: "grid layer".into(), quantity: "delta".into() });
    }
    let top = models.last().expect("nonempty");
    let eps = grid_epsilon(snap_epsilon_bound(top, delta)?);
    let (grid, record) = snap_to_grid(top, eps, delta).map_err(|e| e.in_layer("grid layer"))?;
    log::info!("grid layer: epsilon {eps:e}, delta {delta:e}");
    models.push(grid);
    maps.push(record);

    let composed = compose_maps(&maps)?;
    if !(composed.delta < MAX_COMPOSED_DELTA) {
        return Err(ReductionError::DeltaTooLarge { delta: composed.delta });
    }
    let bundle = PipelineBundle { instance: inst.clone(), alpha_target, t, models, maps, composed };
    debug_assert_eq!(bundle.grid().len(), inst.len() * BLOCK.pow(t as u32));
    Ok(bundle)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineDecoding {
    pub independent_set: Vec<usize>,
    pub repaired: bool,
    /// The decoded state of `M_NN`.
    pub nn_state: SpinState,
}

/// Applies the decode rules from the grid outwards, then reads the
/// independent set off the nearest-neighbour state.
pub fn decode_pipeline(bundle: &PipelineBundle, grid_state: &SpinState) -> Result<PipelineDecoding, ReductionError> {
    let mut state = grid_state.clone();
    for (k, record) in bundle.maps.iter().enumerate().rev() {
        state = record.decode(&state).map_err(|e| match e {
            ReductionError::InvalidGadget { gadget, pattern, .. } => {
                ReductionError::InvalidGadget { layer: k + 1, gadget, pattern }
            }
            other => other,
        })?;
    }
    let decoded = decode_independent_set(&state, &bundle.instance);
    Ok(PipelineDecoding { independent_set: decoded.independent_set, repaired: decoded.repaired, nn_state: state })
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> ReductionError {
    ReductionError::Bundle(format!("{}: {e}", path.display()))
}

/// Writes `layer_<k>.json` for every model and `maps.json` with the rest.
pub fn write_bundle(bundle: &PipelineBundle, dir: &Path) -> Result<(), ReductionError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    for (k, model) in bundle.models.iter().enumerate() {
        let path = dir.join(format!("layer_{k}.json"));
        std::fs::write(&path, model.to_json()).map_err(|e| io_error(&path, e))?;
    }
    let path = dir.join("maps.json");
    let text = serde_json::to_string_pretty(bundle).map_err(|e| io_error(&path, e))?;
    std::fs::write(&path, text).map_err(|e| io_error(&path, e))
}

pub fn read_bundle(dir: &Path) -> Result<PipelineBundle, ReductionError> {
    let path = dir.join("maps.json");
    let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    let mut bundle: PipelineBundle = serde_json::from_str(&text).map_err(|e| io_error(&path, e))?;
    for k in 0..=bundle.maps.len() {
        let path = dir.join(format!("layer_{k}.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        bundle.models.push(IsingModel::from_json(&text).map_err(|e| io_error(&path, e))?);
    }
    for (k, m) in bundle.maps.iter().enumerate() {
        if m.upper_spins != bundle.models[k].len() || m.lower_spins != bundle.models[k + 1].len() {
            return Err(ReductionError::Bundle(format!("map {k} does not match the sizes of layers {k} and {}", k + 1)));
        }
    }
    Ok(bundle)
}
