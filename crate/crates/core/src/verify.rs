//! Brute-force checks of the quantitative map bounds.
//!
//! Exhaustive domains are used whenever they fit in [`ENUMERATION_LIMIT`]
//! spins; larger domains fall back to seeded sampling, and the report says
//! so. Residuals are accumulated with compensation because logical layers
//! place the relevant energy differences far below the intra-gadget energy.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exact::{self, LowEnergySet, SolveError, SolverOptions};
use crate::gadget::{self, CouplingSample, GadgetError, BLOCK, MINUS_PATTERN, PLUS_PATTERN};
use crate::model::{Coupling, IsingModel, ModelError, SpinState};
use crate::reduction::{
    self, Composition, DecodeRule, LayerKind, MapRecord, MisInstance, PipelineBundle, ReductionError,
};
use crate::sum::CompensatedSum;

/// "RF1M" in ASCII.
pub const DEFAULT_SEED: u64 = 0x5246_314D;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const ENUMERATION_LIMIT: usize = 24;
/// Allowed deviation of the fitted coupling-law slope from `−(α+4)`.
pub const SLOPE_TOLERANCE: f64 = 0.15;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("{what} has {n} spins; exhaustive checks stop at {limit}")]
    TooLarge { what: &'static str, n: usize, limit: usize },
    #[error("map expects {expected} spins on the {side} side, model has {found}")]
    SizeMismatch { side: &'static str, expected: usize, found: usize },
    #[error("valid-state domains exist only for gadget layers")]
    NoValidDomain,
    #[error("map scale is not a positive finite number")]
    ScaleUnderflow,
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Valid states for gadget layers, all states otherwise; sampled with
    /// the given parameters when too large to enumerate.
    Auto { seed: u64, count: usize },
    All,
    Valid,
    Sampled { seed: u64, count: usize },
}

impl Domain {
    pub fn sampled_default() -> Self {
        Domain::Sampled { seed: DEFAULT_SEED, count: DEFAULT_SAMPLES }
    }

    pub fn auto() -> Self {
        Domain::Auto { seed: DEFAULT_SEED, count: DEFAULT_SAMPLES }
    }

    fn label(&self) -> String {
        match self {
            Domain::Auto { .. } => "auto".into(),
            Domain::All => "all states".into(),
            Domain::Valid => "valid states".into(),
            Domain::Sampled { seed, count } => format!("sampled:<{seed:#x},{count}>"),
        }
    }
}

/// Dense evaluator whose terms and order match
/// [`IsingModel::energy_compensated`].
struct Dense {
    n: usize,
    j: Vec<f64>,
    h: Vec<f64>,
}

impl Dense {
    fn new(model: &IsingModel) -> Self {
        Self { n: model.len(), j: model.dense_couplings(), h: model.fields() }
    }

    fn energy(&self, s: &[i8]) -> CompensatedSum {
        let mut acc = CompensatedSum::new();
        for i in 0..self.n {
            let row = &self.j[i * self.n..(i + 1) * self.n];
            for j in i + 1..self.n {
                if row[j] != 0.0 {
                    acc.add(-row[j] * f64::from(s[i] * s[j]));
                }
            }
        }
        for (h, &v) in self.h.iter().zip(s) {
            acc.add(-h * f64::from(v));
        }
        acc
    }
}

/// `E'/a − E` of a grid layer as a sum of per-term differences.
///
/// Each coupling difference `c·((d'ε)^(−α) − d^(−α))` is evaluated through
/// `expm1`/`ln1p` against the exact scale `ε^α`, so rounding is relative
/// to the difference rather than to the energies, which may be many orders
/// of magnitude larger than the claimed `δ`.
struct GridDifferences {
    n: usize,
    pair: Vec<f64>,
    field: Vec<f64>,
}

impl GridDifferences {
    fn new(lower: &IsingModel, upper: &IsingModel, record: &MapRecord) -> Option<Self> {
        let (Coupling::LongRange { alpha, c }, Coupling::LongRange { alpha: la, c: lc }) =
            (upper.coupling_kind(), lower.coupling_kind())
        else {
            return None;
        };
        let eps = record.epsilon?;
        if record.kind != LayerKind::Grid || alpha != la || c != lc || lower.len() != upper.len() {
            return None;
        }
        let n = upper.len();
        let mut pair = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = upper.distance(i, j)?;
                let snapped = lower.distance(i, j)? * eps;
                let rel = (-alpha * ((snapped - d) / d).ln_1p()).exp_m1();
                pair[i * n + j] = c * d.powf(-alpha) * rel;
            }
        }
        let a = record.a();
        let field = (0..n).map(|i| lower.field(i) / a - upper.field(i)).collect();
        Some(Self { n, pair, field })
    }

    fn residual(&self, s: &[i8]) -> f64 {
        let mut acc = CompensatedSum::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                acc.add(-self.pair[i * self.n + j] * f64::from(s[i] * s[j]));
            }
        }
        for (d, &v) in self.field.iter().zip(s) {
            acc.add(-d * f64::from(v));
        }
        acc.value().abs()
    }
}

/// `max |E'(σ') − offset − a·E(g(σ'))| / a` over a domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapVerificationReport {
    pub layer: LayerKind,
    pub domain: String,
    pub states_checked: u64,
    pub a: f64,
    pub log_a: f64,
    pub delta: f64,
    pub max_residual: f64,
    /// `"energies"`, or `"term differences"` for grid layers.
    pub evaluation: &'static str,
    /// Lower-model state attaining the maximum.
    pub worst_state: String,
    pub passed: bool,
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> SpinState {
    SpinState::new((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
        .expect("±1 by construction")
}

/// Keeps the largest residual, the smallest index on ties.
fn worst(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => if a.1 <= b.1 { a } else { b },
    }
}

pub fn verify_map(lower: &IsingModel, upper: &IsingModel, record: &MapRecord, domain: Domain) -> Result<MapVerificationReport, VerifyError> {
    if lower.len() != record.lower_spins {
        return Err(VerifyError::SizeMismatch { side: "lower", expected: record.lower_spins, found: lower.len() });
    }
    if upper.len() != record.upper_spins {
        return Err(VerifyError::SizeMismatch { side: "upper", expected: record.upper_spins, found: upper.len() });
    }
    let a = record.a();
    if !(a > 0.0 && a.is_finite()) {
        return Err(VerifyError::ScaleUnderflow);
    }
    let gadget_layer = record.decode == DecodeRule::Gadget;
    let domain = match domain {
        Domain::Auto { .. } if gadget_layer && record.upper_spins <= ENUMERATION_LIMIT => Domain::Valid,
        Domain::Auto { .. } if !gadget_layer && record.lower_spins <= ENUMERATION_LIMIT => Domain::All,
        Domain::Auto { seed, count } => Domain::Sampled { seed, count },
        Domain::Valid if !gadget_layer => return Err(VerifyError::NoValidDomain),
        other => other,
    };
    let (lo, up) = (Dense::new(lower), Dense::new(upper));
    let offset = record.offset();
    let differences = GridDifferences::new(lower, upper, record);
    let residual = |lower_state: &SpinState, upper_state: &SpinState| -> f64 {
        if let Some(d) = &differences {
            return d.residual(lower_state.values());
        }
        let mut e = lo.energy(lower_state.values());
        e.sub_sum(&offset);
        (e.value() / a - up.energy(upper_state.values()).value()).abs()
    };

    let (states_checked, (max_residual, worst_state)) = match domain {
        Domain::All => {
            let n = lower.len();
            if n > ENUMERATION_LIMIT {
                return Err(VerifyError::TooLarge { what: "lower model", n, limit: ENUMERATION_LIMIT });
            }
            let best = (0..1u64 << n)
                .into_par_iter()
                .map(|bits| {
                    let s = SpinState::from_bits(bits, n);
                    Ok((residual(&s, &record.decode(&s)?), bits))
                })
                .try_reduce(|| (f64::NEG_INFINITY, u64::MAX), |x, y| Ok(worst(x, y)))
                .map_err(VerifyError::Reduction)?;
            (1u64 << n, (best.0, SpinState::from_bits(best.1, n)))
        }
        Domain::Valid => {
            let n = upper.len();
            if n > ENUMERATION_LIMIT {
                return Err(VerifyError::TooLarge { what: "upper model", n, limit: ENUMERATION_LIMIT });
            }
            let best = (0..1u64 << n)
                .into_par_iter()
                .map(|bits| {
                    let s = SpinState::from_bits(bits, n);
                    Ok((residual(&record.encode(&s)?, &s), bits))
                })
                .try_reduce(|| (f64::NEG_INFINITY, u64::MAX), |x, y| Ok(worst(x, y)))
                .map_err(VerifyError::Reduction)?;
            (1u64 << n, (best.0, record.encode(&SpinState::from_bits(best.1, n))?))
        }
        Domain::Sampled { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pairs: Vec<(SpinState, SpinState)> = (0..count)
                .map(|_| {
                    if gadget_layer {
                        let s = random_state(&mut rng, upper.len());
                        Ok((record.encode(&s)?, s))
                    } else {
                        let s = random_state(&mut rng, lower.len());
                        let g = record.decode(&s)?;
                        Ok((s, g))
                    }
                })
                .collect::<Result<_, ReductionError>>()?;
            let best = pairs
                .par_iter()
                .enumerate()
                .map(|(k, (l, u))| (residual(l, u), k as u64))
                .reduce(|| (f64::NEG_INFINITY, u64::MAX), worst);
            let state = pairs.get(best.1 as usize).map(|p| p.0.clone()).unwrap_or(SpinState::uniform(0, 1));
            (count as u64, (best.0.max(0.0), state))
        }
        Domain::Auto { .. } => unreachable!("resolved above"),
    };
    Ok(MapVerificationReport {
        layer: record.kind,
        domain: domain.label(),
        states_checked,
        a,
        log_a: record.log_scale,
        delta: record.delta,
        max_residual,
        evaluation: if differences.is_some() { "term differences" } else { "energies" },
        worst_state: worst_state.to_string(),
        passed: max_residual <= record.delta,
    })
}

/// Whether the preimage of a low-energy set stays one, with the predicted
/// gap `a(Δ_G − 2δ)` as a lower bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub a: f64,
    pub delta: f64,
    pub upper_gap: f64,
    pub predicted_gap: f64,
    pub lower_gap: f64,
    pub preimage_size: usize,
    pub is_low_energy_set: bool,
    pub passed: bool,
}

pub fn verify_gap_preservation(
    lower: &IsingModel,
    upper: &IsingModel,
    record: &MapRecord,
    set: &LowEnergySet,
    opts: &SolverOptions,
) -> Result<GapReport, VerifyError> {
    if upper.len() != record.upper_spins {
        return Err(VerifyError::SizeMismatch { side: "upper", expected: record.upper_spins, found: upper.len() });
    }
    if !(record.delta < set.gap / 2.0) {
        return Err(VerifyError::Hypothesis(format!(
            "delta {} must be below half the gap {} of the upper set",
            record.delta, set.gap
        )));
    }
    let preimage: Vec<SpinState> = set.states.iter().map(|s| record.encode(s)).collect::<Result<_, _>>()?;
    let split = exact::set_split(lower, &preimage, opts)?;
    let a = record.a();
    let predicted_gap = a * (set.gap - 2.0 * record.delta);
    let lower_gap = split.gap();
    let is_low_energy_set = split.min_outer_energy + lower.tolerance() >= split.max_inner_energy;
    Ok(GapReport {
        a,
        delta: record.delta,
        upper_gap: set.gap,
        predicted_gap,
        lower_gap,
        preimage_size: preimage.len(),
        is_low_energy_set,
        passed: is_low_energy_set && lower_gap >= predicted_gap - lower.tolerance(),
    })
}

/// One row of the nearest-neighbour threshold table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub k: usize,
    /// Lowest energy over states whose `−1` spins form an independent set
    /// of size exactly `k`.
    pub min_energy: f64,
    /// `½|V| − 4k`.
    pub bound: f64,
    /// `min_energy <= bound`.
    pub attained: bool,
    /// Some state of any kind reaches the bound.
    pub any_state_at_or_below: bool,
    /// "A state at or below the bound implies an independent set of size
    /// at least k."
    pub implication_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NnThresholdReport {
    pub vertices: usize,
    pub mis_size: usize,
    pub ground_energy: f64,
    pub ground_states: Vec<String>,
    pub rows: Vec<ThresholdRow>,
    /// Some `k <= mis_size` whose bound is not attained.
    pub bound_discrepancy: bool,
    pub all_ground_states_decode_to_mis: bool,
    pub some_ground_state_decodes_to_mis: bool,
    pub representative_decodes_to_mis: bool,
}

pub const NN_LIMIT: usize = 20;

pub fn check_nn_threshold(inst: &MisInstance, opts: &SolverOptions) -> Result<NnThresholdReport, VerifyError> {
    let n = inst.len();
    if n > NN_LIMIT {
        return Err(VerifyError::TooLarge { what: "instance", n, limit: NN_LIMIT });
    }
    let model = reduction::encode_nn(inst)?;
    let mis_size = reduction::maximum_independent_set_size(inst);
    let energies = exact::all_energies(&model, &SolverOptions { limit_n: NN_LIMIT, ..*opts })?;
    let mut best_k = vec![f64::INFINITY; n + 1];
    for (bits, &e) in energies.iter().enumerate() {
        let s = SpinState::from_bits(bits as u64, n);
        let set: Vec<usize> = (0..n).filter(|&v| s.values()[v] == -1).collect();
        if inst.is_independent(&set) {
            best_k[set.len()] = best_k[set.len()].min(e);
        }
    }
    let half = n as f64 / 2.0;
    let rows = (0..=mis_size)
        .map(|k| {
            let bound = half - 4.0 * k as f64;
            let any_state_at_or_below = energies.iter().any(|&e| e <= bound);
            ThresholdRow {
                k,
                min_energy: best_k[k],
                bound,
                attained: best_k[k] <= bound,
                any_state_at_or_below,
                implication_holds: !any_state_at_or_below || k <= mis_size,
            }
        })
        .collect::<Vec<_>>();
    let ground = exact::ground_states(&model, opts)?;
    let decodes = |s: &SpinState| reduction::decode_independent_set(s, inst).independent_set.len() == mis_size;
    Ok(NnThresholdReport {
        vertices: n,
        mis_size,
        ground_energy: ground.energy,
        ground_states: ground.states.iter().map(ToString::to_string).collect(),
        bound_discrepancy: rows.iter().any(|r| !r.attained),
        rows,
        all_ground_states_decode_to_mis: ground.states.iter().all(decodes),
        some_ground_state_decodes_to_mis: ground.states.iter().any(decodes),
        representative_decodes_to_mis: decodes(ground.representative()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionLawReport {
    pub alpha: f64,
    pub samples: Vec<CouplingSample>,
    /// Least-squares slope of `ln|I₁₂|` against `ln r`.
    pub slope: f64,
    pub expected_slope: f64,
    pub slope_ok: bool,
    /// Residual constant the pipeline relies on.
    pub f_bound: f64,
    /// Every scaled residual is at most `f_bound`.
    pub bounded: bool,
    /// The scaled residual at the largest `r` does not exceed the maximum
    /// over the smaller separations.
    pub non_growing: bool,
    pub passed: bool,
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn verify_interaction_law(alpha: f64, rs: &[f64]) -> Result<InteractionLawReport, VerifyError> {
    if rs.len() < 2 {
        return Err(VerifyError::Hypothesis("the sweep needs at least two separations".into()));
    }
    let mut sorted = rs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let samples = gadget::coupling_law(alpha, &sorted)?;
    let xs: Vec<f64> = samples.iter().map(|s| s.r.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.i12.abs().ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let expected_slope = -(alpha + 4.0);
    let f_bound = gadget::residual_constant(alpha)?;
    let slope_ok = (slope - expected_slope).abs() <= SLOPE_TOLERANCE;
    let bounded = samples.iter().all(|s| s.residual_scaled <= f_bound);
    let (last, earlier) = samples.split_last().expect("at least two samples");
    let non_growing = earlier.iter().any(|s| last.residual_scaled <= s.residual_scaled);
    Ok(InteractionLawReport {
        alpha,
        samples,
        slope,
        expected_slope,
        slope_ok,
        f_bound,
        bounded,
        non_growing,
        passed: slope_ok && bounded && non_growing,
    })
}

/// Whether σ± stay the two lowest internal states of one block for every
/// (or every sampled) assignment of the remaining spins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub block: usize,
    pub domain: String,
    pub configurations: u64,
    /// Smallest `min(others) − max(E(σ+), E(σ−))` seen.
    pub min_gap: f64,
    pub worst_frozen: String,
    pub failures: u64,
    pub passed: bool,
}

pub fn verify_validity(model: &IsingModel, block: usize, domain: Domain) -> Result<ValidityReport, VerifyError> {
    let n = model.len();
    let start = block * BLOCK;
    if start + BLOCK > n {
        return Err(ModelError::InvalidSpin { id: start + BLOCK - 1, n }.into());
    }
    let others: Vec<usize> = (0..n).filter(|&i| i < start || i >= start + BLOCK).collect();
    let m = others.len();
    let domain = match domain {
        Domain::Auto { .. } | Domain::Valid if m <= ENUMERATION_LIMIT => Domain::All,
        Domain::Auto { seed, count } => Domain::Sampled { seed, count },
        Domain::Valid => Domain::sampled_default(),
        d => d,
    };
    let dense = model.dense_couplings();
    let fields = model.fields();
    let patterns: Vec<[f64; BLOCK]> = (0..256u32)
        .map(|p| std::array::from_fn(|k| if p >> k & 1 == 1 { 1.0 } else { -1.0 }))
        .collect();
    let intra: Vec<f64> = patterns
        .iter()
        .map(|p| {
            let mut e = 0.0;
            for x in 0..BLOCK {
                for y in x + 1..BLOCK {
                    e += -dense[(start + x) * n + start + y] * p[x] * p[y];
                }
            }
            e
        })
        .collect();
    let index = |pat: &[i8; BLOCK]| -> usize {
        pat.iter().enumerate().fold(0, |acc, (k, &v)| acc | usize::from(v == 1) << k)
    };
    let (plus, minus) = (index(&PLUS_PATTERN), index(&MINUS_PATTERN));
    let gap_for = |frozen: &[i8]| -> f64 {
        let local: [f64; BLOCK] = std::array::from_fn(|x| {
            let row = &dense[(start + x) * n..(start + x + 1) * n];
            fields[start + x] + others.iter().zip(frozen).map(|(&o, &s)| row[o] * f64::from(s)).sum::<f64>()
        });
        let energy = |p: usize| intra[p] - (0..BLOCK).map(|x| local[x] * patterns[p][x]).sum::<f64>();
        let top_valid = energy(plus).max(energy(minus));
        let lowest_other = (0..256).filter(|&p| p != plus && p != minus).map(energy).fold(f64::INFINITY, f64::min);
        lowest_other - top_valid
    };

    let (configurations, frozen_states): (u64, Box<dyn Fn(u64) -> Vec<i8> + Sync>) = match domain {
        Domain::All => {
            if m > ENUMERATION_LIMIT {
                return Err(VerifyError::TooLarge { what: "frozen spins", n: m, limit: ENUMERATION_LIMIT });
            }
            (1u64 << m, Box::new(move |bits| SpinState::from_bits(bits, m).into_inner()))
        }
        Domain::Sampled { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws: Vec<Vec<i8>> = (0..count).map(|_| random_state(&mut rng, m).into_inner()).collect();
            (count as u64, Box::new(move |k| draws[k as usize].clone()))
        }
        Domain::Auto { .. } | Domain::Valid => unreachable!("resolved above"),
    };
    let (min_gap, worst_index, failures) = (0..configurations)
        .into_par_iter()
        .map(|k| {
            let g = gap_for(&frozen_states(k));
            (g, k, u64::from(!(g > 0.0)))
        })
        .reduce(
            || (f64::INFINITY, u64::MAX, 0),
            |x, y| {
                let (g, k) = if x.0 < y.0 || (x.0 == y.0 && x.1 <= y.1) { (x.0, x.1) } else { (y.0, y.1) };
                (g, k, x.2 + y.2)
            },
        );
    let worst_frozen = if configurations == 0 {
        String::new()
    } else {
        SpinState::new(frozen_states(worst_index))?.to_string()
    };
    Ok(ValidityReport {
        block,
        domain: domain.label(),
        configurations,
        min_gap,
        worst_frozen,
        failures,
        passed: failures == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleReport {
    pub layers: Vec<MapVerificationReport>,
    pub composed: Composition,
    pub composed_delta_ok: bool,
    pub grid_spins: usize,
    pub expected_grid_spins: usize,
    pub passed: bool,
}

/// Checks every map of a bundle on its natural domain.
pub fn verify_bundle(bundle: &PipelineBundle, domain: Domain) -> Result<BundleReport, VerifyError> {
    let layers = bundle
        .maps
        .iter()
        .enumerate()
        .map(|(k, rec)| verify_map(&bundle.models[k + 1], &bundle.models[k], rec, domain))
        .collect::<Result<Vec<_>, _>>()?;
    let composed = reduction::compose_maps(&bundle.maps)?;
    let composed_delta_ok = composed.delta < reduction::MAX_COMPOSED_DELTA;
    let expected_grid_spins = bundle.instance.len() * BLOCK.pow(bundle.t as u32);
    let grid_spins = bundle.grid().len();
    Ok(BundleReport {
        passed: composed_delta_ok && grid_spins == expected_grid_spins && layers.iter().all(|l| l.passed),
        layers,
        composed,
        composed_delta_ok,
        grid_spins,
        expected_grid_spins,
    })
}
