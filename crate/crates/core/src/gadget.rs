//! The eight-spin logical spin.
//!
//! Four corner spins sit at `center + s·(±1, ±1)` and four edge spins at
//! `center + s·(0, ±1)` and `center + s·(±1, 0)`, all coupled
//! antiferromagnetically with the long-range law. With no field the block has
//! two ground states: corners +1 / edges −1 (σ+) and its global flip (σ−).
//! A logical field `h` puts `+h/8` on corners and `−h/8` on edges, which
//! splits the pair by exactly `2h`.
//!
//! Spin order inside a block is fixed: the four corners
//! `(1,1), (1,−1), (−1,1), (−1,−1)` then the four edges
//! `(0,1), (0,−1), (1,0), (−1,0)`.

use serde::Serialize;
use thiserror::Error;

use crate::exact::{self, SolverOptions};
use crate::model::{euclid, Coupling, IsingModel, ModelError, Spin, SpinState};
use crate::sum::CompensatedSum;

pub const BLOCK: usize = 8;

pub const OFFSETS: [[f64; 2]; BLOCK] = [
    [1.0, 1.0],
    [1.0, -1.0],
    [-1.0, 1.0],
    [-1.0, -1.0],
    [0.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [-1.0, 0.0],
];

/// Corners +1, edges −1.
pub const PLUS_PATTERN: [i8; BLOCK] = [1, 1, 1, 1, -1, -1, -1, -1];
pub const MINUS_PATTERN: [i8; BLOCK] = [-1, -1, -1, -1, 1, 1, 1, 1];

/// Corner field sign; edges carry the opposite sign.
const FIELD_SIGN: [f64; BLOCK] = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GadgetError {
    #[error("gadget scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("gadget spin {index} at {position:?} collides with host spin {host}")]
    Overlap { index: usize, host: usize, position: [f64; 2] },
    #[error("logical field {h_abs} exceeds half gap {half_gap}")]
    FieldExceedsHalfGap { h_abs: f64, half_gap: f64 },
    #[error("gadgets at separation {r} overlap (need r > 2√2·s = {min})")]
    Overlapping { r: f64, min: f64 },
    #[error("sampling range [{r_min}, {r_max}] with {samples} samples is invalid")]
    InvalidSweep { r_min: f64, r_max: f64, samples: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GadgetSpec {
    pub center: [f64; 2],
    pub scale: f64,
    pub alpha: f64,
    pub field: f64,
}

impl GadgetSpec {
    pub fn new(center: [f64; 2], alpha: f64, field: f64) -> Self {
        Self { center, scale: 1.0, alpha, field }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn positions(&self) -> [[f64; 2]; BLOCK] {
        OFFSETS.map(|[dx, dy]| [self.center[0] + self.scale * dx, self.center[1] + self.scale * dy])
    }
}

/// The two valid configurations of a logical spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidStatePattern {
    pub plus: [i8; BLOCK],
    pub minus: [i8; BLOCK],
}

impl Default for ValidStatePattern {
    fn default() -> Self {
        Self { plus: PLUS_PATTERN, minus: MINUS_PATTERN }
    }
}

/// Logical value of a block: `Some(1)` for σ+, `Some(-1)` for σ−.
pub fn decode_pattern(block: &[i8]) -> Option<i8> {
    if block == PLUS_PATTERN {
        Some(1)
    } else if block == MINUS_PATTERN {
        Some(-1)
    } else {
        None
    }
}

pub fn pattern(logical: i8) -> [i8; BLOCK] {
    if logical >= 0 {
        PLUS_PATTERN
    } else {
        MINUS_PATTERN
    }
}

/// The eight spins of one logical spin, with positions and logical field.
pub fn make_logical_spin(spec: &GadgetSpec) -> Result<Vec<Spin>, GadgetError> {
    if !(spec.scale > 0.0 && spec.scale.is_finite()) {
        return Err(GadgetError::NonPositiveScale(spec.scale));
    }
    let h = spec.field / BLOCK as f64;
    Ok(spec
        .positions()
        .iter()
        .zip(FIELD_SIGN)
        .map(|(&p, sign)| Spin::at(p, sign * h))
        .collect())
}

/// Like [`make_logical_spin`], but rejects spins that collide with `host`.
pub fn place_logical_spin(host: &[Spin], spec: &GadgetSpec) -> Result<Vec<Spin>, GadgetError> {
    let fragment = make_logical_spin(spec)?;
    let tol = 1e-12 * spec.scale;
    for (index, s) in fragment.iter().enumerate() {
        let p = s.position.expect("gadget spins are placed");
        if let Some(h) = host
            .iter()
            .position(|o| o.position.is_some_and(|q| euclid(p, q) <= tol))
        {
            return Err(GadgetError::Overlap { index, host: h, position: p });
        }
    }
    Ok(fragment)
}

/// A lone antiferromagnetic logical spin (`c = −1`).
pub fn gadget_model(spec: &GadgetSpec) -> Result<IsingModel, GadgetError> {
    check_alpha(spec.alpha)?;
    Ok(IsingModel::new(
        make_logical_spin(spec)?,
        Coupling::LongRange { alpha: spec.alpha, c: -1.0 },
    )?)
}

fn check_alpha(alpha: f64) -> Result<(), GadgetError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(GadgetError::InvalidAlpha(alpha))
    }
}

/// Closed-form gap `4 − 4·2^(−α/2) − 6·4^(−α/2) + 8·5^(−α/2) + 2·8^(−α/2)`.
///
/// This expression does not agree with the enumerated gap of the block (see
/// [`exact_gadget_gap`]); it is kept for comparison. Separation radii use the
/// enumerated value.
pub fn gadget_gap(alpha: f64) -> f64 {
    let p = |base: f64| base.powf(-alpha / 2.0);
    4.0 - 4.0 * p(2.0) - 6.0 * p(4.0) + 8.0 * p(5.0) + 2.0 * p(8.0)
}

/// Gap between {σ+, σ−} and the rest of the spectrum of the isolated,
/// field-free block at unit scale, by enumerating all 256 states.
pub fn exact_gadget_gap(alpha: f64) -> Result<f64, GadgetError> {
    let model = gadget_model(&GadgetSpec::new([0.0, 0.0], alpha, 0.0))?;
    let les = exact::low_energy_set(&model, 2, &SolverOptions::single_threaded())
        .map_err(|e| match e {
            exact::SolveError::Model(m) => GadgetError::Model(m),
            other => unreachable!("eight spins are always enumerable: {other}"),
        })?;
    Ok(les.gap)
}

/// `E(σ−) − E(σ+)` of an isolated block carrying logical field `h`.
pub fn logical_energy_split(alpha: f64, h: f64) -> Result<f64, GadgetError> {
    let model = gadget_model(&GadgetSpec::new([0.0, 0.0], alpha, h))?;
    let plus = SpinState::new(PLUS_PATTERN.to_vec())?;
    let minus = SpinState::new(MINUS_PATTERN.to_vec())?;
    Ok(model.energy(&minus)?.total - model.energy(&plus)?.total)
}

/// Distance beyond which `other_spins` frozen spins cannot displace σ± as
/// the two lowest internal states of a block with logical field of
/// magnitude `h_abs`:
/// `R = ((Δ/2 − |h|) / (8n))^(−1/α) + √2`, with `Δ` the enumerated gap.
pub fn min_separation(alpha: f64, h_abs: f64, other_spins: usize) -> Result<f64, GadgetError> {
    let gap = exact_gadget_gap(alpha)?;
    min_separation_with_gap(alpha, gap, h_abs, other_spins)
}

pub fn min_separation_with_gap(alpha: f64, gap: f64, h_abs: f64, other_spins: usize) -> Result<f64, GadgetError> {
    check_alpha(alpha)?;
    let half_gap = gap / 2.0;
    let h_abs = h_abs.abs();
    if h_abs >= half_gap {
        return Err(GadgetError::FieldExceedsHalfGap { h_abs, half_gap });
    }
    if other_spins == 0 {
        return Ok(std::f64::consts::SQRT_2);
    }
    let margin = (half_gap - h_abs) / (8.0 * other_spins as f64);
    Ok(margin.powf(-1.0 / alpha) + std::f64::consts::SQRT_2)
}

/// Leading-order coupling between two logical spins: `−α²(α+2)² r^(−(α+4))`.
pub fn coupling_theory(alpha: f64, r: f64) -> f64 {
    -(alpha * alpha) * (alpha + 2.0).powi(2) * r.powf(-(alpha + 4.0))
}

/// Effective coupling `I₁₂ = (E(+−) + E(−+) − E(++) − E(−−)) / 4` between two
/// field-free antiferromagnetic blocks of scale `s` whose centers are `r`
/// apart along the x axis.
///
/// Intra-block energies are identical in all four valid configurations and
/// cancel in the combination, so only the 64 cross pairs are summed; this
/// keeps the result accurate far below the intra-block energy scale.
pub fn effective_coupling(alpha: f64, r: f64, s: f64) -> Result<f64, GadgetError> {
    check_alpha(alpha)?;
    if !(s > 0.0) {
        return Err(GadgetError::NonPositiveScale(s));
    }
    let min = 2.0 * std::f64::consts::SQRT_2 * s;
    if !(r > min) {
        return Err(GadgetError::Overlapping { r, min });
    }
    let a = GadgetSpec::new([0.0, 0.0], alpha, 0.0).with_scale(s).positions();
    let b = GadgetSpec::new([r, 0.0], alpha, 0.0).with_scale(s).positions();
    let cross = |p: f64, q: f64| {
        let mut acc = CompensatedSum::new();
        for (pa, sa) in a.iter().zip(PLUS_PATTERN) {
            for (pb, sb) in b.iter().zip(PLUS_PATTERN) {
                let j = -euclid(*pa, *pb).powf(-alpha);
                acc.add(-j * p * f64::from(sa) * q * f64::from(sb));
            }
        }
        acc
    };
    let mut acc = CompensatedSum::new();
    acc.add_sum(&cross(1.0, -1.0));
    acc.add_sum(&cross(-1.0, 1.0));
    acc.sub_sum(&cross(1.0, 1.0));
    acc.sub_sum(&cross(-1.0, -1.0));
    Ok(acc.value() / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingSample {
    pub alpha: f64,
    pub r: f64,
    pub i12: f64,
    pub theory: f64,
    /// `|I₁₂ − theory| · r^(α+5)`.
    pub residual_scaled: f64,
}

pub fn coupling_sample(alpha: f64, r: f64) -> Result<CouplingSample, GadgetError> {
    let i12 = effective_coupling(alpha, r, 1.0)?;
    let theory = coupling_theory(alpha, r);
    Ok(CouplingSample {
        alpha,
        r,
        i12,
        theory,
        residual_scaled: (i12 - theory).abs() * r.powf(alpha + 5.0),
    })
}

pub fn coupling_law(alpha: f64, rs: &[f64]) -> Result<Vec<CouplingSample>, GadgetError> {
    rs.iter().map(|&r| coupling_sample(alpha, r)).collect()
}

pub fn write_coupling_csv<W: std::io::Write>(out: &mut W, samples: &[CouplingSample]) -> std::io::Result<()> {
    writeln!(out, "alpha,r,I12,theory,residual_scaled")?;
    for s in samples {
        writeln!(out, "{},{},{:e},{:e},{:e}", s.alpha, s.r, s.i12, s.theory, s.residual_scaled)?;
    }
    Ok(())
}

/// Empirical residual constant: the largest `|I₁₂ − theory|·r^(α+5)` over
/// `samples` evenly spaced separations in `[r_min, r_max]`.
pub fn estimate_f(alpha: f64, r_min: f64, r_max: f64, samples: usize) -> Result<f64, GadgetError> {
    let bad = || GadgetError::InvalidSweep { r_min, r_max, samples };
    if samples < 2 || !(r_max > r_min) || !(r_min > 2.0 * std::f64::consts::SQRT_2) {
        return Err(bad());
    }
    let step = (r_max - r_min) / (samples - 1) as f64;
    let mut best = 0.0f64;
    for k in 0..samples {
        let r = if k + 1 == samples { r_max } else { r_min + step * k as f64 };
        best = best.max(coupling_sample(alpha, r)?.residual_scaled);
    }
    Ok(best)
}

/// Range and density used when the reduction pipeline measures the residual
/// constant for a layer.
pub const F_SWEEP: (f64, f64, usize) = (8.0, 100.0, 185);

/// Residual constant with the 2× safety margin applied by the pipeline.
pub fn residual_constant(alpha: f64) -> Result<f64, GadgetError> {
    let (lo, hi, n) = F_SWEEP;
    Ok(2.0 * estimate_f(alpha, lo, hi, n)?)
}

/// Outcome of enumerating one block's 256 internal states with every other
/// spin frozen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InternalSpectrum {
    pub block: usize,
    /// The two lowest internal configurations, lowest first.
    pub lowest: [SpinState; 2],
    /// Lowest energy among the remaining 254 configurations minus the higher
    /// of the two lowest.
    pub gap: f64,
    /// Whether the two lowest are exactly σ+ and σ−.
    pub valid_pair: bool,
}

/// Enumerates the internal states of block `block` (spins `8·block ..
/// 8·block + 8`) with all other spins held at their values in `frozen`.
pub fn internal_spectrum(model: &IsingModel, block: usize, frozen: &SpinState) -> Result<InternalSpectrum, GadgetError> {
    let start = block * BLOCK;
    if start + BLOCK > model.len() {
        return Err(ModelError::InvalidSpin { id: start + BLOCK - 1, n: model.len() }.into());
    }
    let mut scratch = frozen.clone().into_inner();
    let mut levels: Vec<(f64, [i8; BLOCK])> = (0..256u32)
        .map(|bits| {
            let mut local = [0i8; BLOCK];
            for (k, v) in local.iter_mut().enumerate() {
                *v = if bits >> k & 1 == 1 { 1 } else { -1 };
            }
            scratch[start..start + BLOCK].copy_from_slice(&local);
            let s = SpinState::new(scratch.clone())?;
            Ok((model.energy_compensated(&s)?.value(), local))
        })
        .collect::<Result<_, ModelError>>()?;
    levels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let lowest = [
        SpinState::new(levels[0].1.to_vec())?,
        SpinState::new(levels[1].1.to_vec())?,
    ];
    let mut pair = [levels[0].1, levels[1].1];
    pair.sort();
    Ok(InternalSpectrum {
        block,
        lowest,
        gap: levels[2].0 - levels[1].0,
        valid_pair: pair == [MINUS_PATTERN, PLUS_PATTERN],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{ground_states, energy_spectrum};

    #[test]
    fn geometry_and_fields() {
        let spins = make_logical_spin(&GadgetSpec::new([0.0, 0.0], 2.0, 0.8)).unwrap();
        assert_eq!(spins.len(), 8);
        for (k, s) in spins.iter().enumerate() {
            let r = euclid(s.position.unwrap(), [0.0, 0.0]);
            let expected = if k < 4 { std::f64::consts::SQRT_2 } else { 1.0 };
            assert!((r - expected).abs() < 1e-15);
            let h = if k < 4 { 0.1 } else { -0.1 };
            assert!((s.field - h).abs() < 1e-15);
        }
        assert!(make_logical_spin(&GadgetSpec::new([0.0, 0.0], 2.0, 0.0).with_scale(0.0)).is_err());
    }

    #[test]
    fn separated_fragments_do_not_collide() {
        let a = make_logical_spin(&GadgetSpec::new([0.0, 0.0], 2.0, 0.0)).unwrap();
        let b = place_logical_spin(&a, &GadgetSpec::new([3.0, 0.0], 2.0, 0.0)).unwrap();
        let mut all = a.clone();
        all.extend(b);
        let model = IsingModel::new(all, Coupling::LongRange { alpha: 2.0, c: -1.0 }).unwrap();
        assert_eq!(model.len(), 16);
        assert!(matches!(
            place_logical_spin(&a, &GadgetSpec::new([2.0, 0.0], 2.0, 0.0)),
            Err(GadgetError::Overlap { .. })
        ));
    }

    #[test]
    fn isolated_block_has_two_valid_ground_states() {
        for alpha in [0.5, 1.0, 2.0, 3.0, 6.0] {
            let m = gadget_model(&GadgetSpec::new([0.0, 0.0], alpha, 0.0)).unwrap();
            let g = ground_states(&m, &SolverOptions::single_threaded()).unwrap();
            let expected: Vec<SpinState> = vec![
                SpinState::new(MINUS_PATTERN.to_vec()).unwrap(),
                SpinState::new(PLUS_PATTERN.to_vec()).unwrap(),
            ];
            assert_eq!(g.states, expected, "alpha {alpha}");
            let spec = energy_spectrum(&m, 1, &SolverOptions::single_threaded()).unwrap();
            assert_eq!(spec[0].multiplicity, 2);
        }
    }

    #[test]
    fn closed_form_gap_limits() {
        assert_eq!(gadget_gap(2.0), 2.35);
        assert!((gadget_gap(200.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn enumerated_gap_differs_from_closed_form() {
        // Frozen from a 256-state enumeration at alpha = 2: the first excited
        // level sits 1.85 above the ground pair (16-fold degenerate).
        let exact = exact_gadget_gap(2.0).unwrap();
        assert!((exact - 1.85).abs() < 1e-12);
        assert!((gadget_gap(2.0) - exact - 0.5).abs() < 1e-12);
    }

    #[test]
    fn logical_field_splits_by_twice_h() {
        assert_eq!(logical_energy_split(2.0, 0.0).unwrap(), 0.0);
        assert!((logical_energy_split(2.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((logical_energy_split(2.0, -0.5).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_separation_behaviour() {
        let gap = exact_gadget_gap(2.0).unwrap();
        let r = min_separation(2.0, 0.0, 1).unwrap();
        assert!((r - ((gap / 16.0).powf(-0.5) + std::f64::consts::SQRT_2)).abs() < 1e-12);
        assert!(min_separation(2.0, 0.0, 2).unwrap() > r);
        let near = min_separation(2.0, gap / 2.0 - 1e-9, 1).unwrap();
        assert!(near > 1e4);
        assert!(matches!(
            min_separation(2.0, gap / 2.0, 1),
            Err(GadgetError::FieldExceedsHalfGap { .. })
        ));
    }

    #[test]
    fn effective_coupling_properties() {
        // Full physical energies of the joint 16-spin model: E(+−) == E(−+).
        let mut spins = make_logical_spin(&GadgetSpec::new([0.0, 0.0], 1.0, 0.0)).unwrap();
        spins.extend(make_logical_spin(&GadgetSpec::new([20.0, 0.0], 1.0, 0.0)).unwrap());
        let m = IsingModel::new(spins, Coupling::LongRange { alpha: 1.0, c: -1.0 }).unwrap();
        let joint = |p: i8, q: i8| {
            let mut v = pattern(p).to_vec();
            v.extend(pattern(q));
            m.energy(&SpinState::new(v).unwrap()).unwrap().total
        };
        assert_eq!(joint(1, -1), joint(-1, 1));
        let direct = (joint(1, -1) + joint(-1, 1) - joint(1, 1) - joint(-1, -1)) / 4.0;
        let i12 = effective_coupling(1.0, 20.0, 1.0).unwrap();
        assert!((direct - i12).abs() < 1e-12);
        assert!(i12 < 0.0);
        assert!(matches!(effective_coupling(1.0, 2.0, 1.0), Err(GadgetError::Overlapping { .. })));
    }

    #[test]
    fn coupling_is_homogeneous_in_scale() {
        for &(alpha, r, s) in &[(1.0, 12.0, 2.0), (2.0, 30.0, 0.5), (3.0, 15.0, 3.0)] {
            let base = effective_coupling(alpha, r, 1.0).unwrap();
            let scaled = effective_coupling(alpha, s * r, s).unwrap();
            assert!((scaled / (base * s.powf(-alpha)) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_constant_is_finite_and_stable() {
        for alpha in [1.0, 2.0, 3.0] {
            let f = estimate_f(alpha, 10.0, 100.0, 46).unwrap();
            let f2 = estimate_f(alpha, 10.0, 100.0, 91).unwrap();
            assert!(f.is_finite() && f > 0.0);
            assert!((f2 - f).abs() <= 0.2 * f, "alpha {alpha}: {f} vs {f2}");
        }
        assert!(estimate_f(1.0, 2.0, 10.0, 5).is_err());
    }

    #[test]
    fn internal_spectrum_of_isolated_block() {
        let m = gadget_model(&GadgetSpec::new([0.0, 0.0], 2.0, 0.0)).unwrap();
        let rep = internal_spectrum(&m, 0, &SpinState::uniform(8, 1)).unwrap();
        assert!(rep.valid_pair);
        assert!((rep.gap - 1.85).abs() < 1e-12);
    }
}
