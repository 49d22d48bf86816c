use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lrfim::approx::{self, TreeDecomposition};
use lrfim::exact::{self, SolverOptions};
use lrfim::gadget::{self, GadgetSpec, MINUS_PATTERN, PLUS_PATTERN};
use lrfim::instances;
use lrfim::reduction::{self, CompileOptions, Composition, LayerKind, MisInstance};
use lrfim::verify::{self, Domain};
use lrfim::{IsingModel, SpinState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

/// Document for stdout and whether every checked bound held.
pub struct Output {
    pub body: String,
    pub passed: bool,
}

impl Output {
    fn json(value: &impl Serialize, passed: bool) -> Result<Self, CliError> {
        Ok(Self { body: serde_json::to_string(value)?, passed })
    }
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Globals {
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub solver: SolverOptions,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::bad(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path, g: &Globals) -> Result<IsingModel, CliError> {
    let model = IsingModel::from_json(&read(path)?).map_err(|e| CliError::bad(format!("{}: {e}", path.display())))?;
    Ok(match g.tolerance {
        Some(t) if t.is_finite() && t >= 0.0 => model.with_tolerance(t),
        Some(t) => return Err(CliError::bad(format!("tolerance must be finite and non-negative, got {t}"))),
        None => model,
    })
}

fn load_mis(path: &Path) -> Result<MisInstance, CliError> {
    MisInstance::from_json(&read(path)?).map_err(|e| CliError::bad(format!("{}: {e}", path.display())))
}

/// Accepts a bare `+-+…` string, the output of `solve` (first state) or of
/// `approx` (its `state`), from a file or literally.
pub fn load_state(arg: &str) -> Result<SpinState, CliError> {
    let path = Path::new(arg);
    let text = if path.is_file() { read(path)? } else { arg.to_owned() };
    let text = text.trim();
    if !text.starts_with('{') {
        return text.parse().map_err(|e| CliError::bad(format!("state: {e}")));
    }
    let doc: serde_json::Value = serde_json::from_str(text)?;
    let state = doc
        .get("states")
        .and_then(|s| s.get(0))
        .or_else(|| doc.get("state"))
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| CliError::bad("state document needs a \"states\" array or a \"state\" string"))?;
    state.parse().map_err(|e| CliError::bad(format!("state: {e}")))
}

#[derive(Serialize)]
struct SolveOutput {
    energy: f64,
    states: Vec<SpinState>,
    /// `null` when the complement is empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
}

pub fn solve(model: &Path, k: Option<u64>, spectrum: Option<usize>, g: &Globals) -> Result<Output, CliError> {
    let model = load_model(model, g)?;
    if let Some(top) = spectrum {
        #[derive(Serialize)]
        struct Spectrum {
            spectrum: Vec<exact::SpectrumLevel>,
        }
        return Output::json(&Spectrum { spectrum: exact::energy_spectrum(&model, top, &g.solver)? }, true);
    }
    let out = match k {
        None => {
            let ground = exact::ground_states(&model, &g.solver)?;
            SolveOutput { energy: ground.energy, states: ground.states, gap: None }
        }
        Some(k) => {
            let set = exact::low_energy_set(&model, k, &g.solver)?;
            let energy = set.states.iter().map(|s| model.energy(s).map(|e| e.total)).try_fold(f64::INFINITY, |m, e| e.map(|e| m.min(e)))?;
            SolveOutput { energy, states: set.states, gap: Some(set.gap) }
        }
    };
    Output::json(&out, true)
}

#[derive(Serialize)]
struct ApproxOutput {
    method: &'static str,
    epsilon: f64,
    initial_cutoff: f64,
    cutoff: f64,
    width: usize,
    certified: bool,
    degenerate: bool,
    pruned_weight: f64,
    approx_energy: f64,
    energy: f64,
    gap_bound: f64,
    target_bound: f64,
    state: SpinState,
}

pub fn approx(model: &Path, epsilon: f64, decomp: Option<&Path>, decay_alpha: Option<f64>, g: &Globals) -> Result<Output, CliError> {
    let model = load_model(model, g)?;
    if decomp.is_none() && model.is_long_range() {
        if let Ok(r) = approx::ptas_solve(&model, epsilon) {
            let out = ApproxOutput {
                method: "path",
                epsilon,
                initial_cutoff: r.initial_cutoff,
                cutoff: r.cutoff,
                width: r.width,
                certified: r.certified,
                degenerate: r.degenerate,
                pruned_weight: r.pruned_weight,
                approx_energy: r.approx_energy,
                energy: r.energy,
                gap_bound: r.gap_bound,
                target_bound: r.target_bound,
                state: r.state,
            };
            return Output::json(&out, out.certified);
        }
    }
    let graph = if model.is_long_range() || decay_alpha.is_some() {
        approx::build_approx_graph(&model, epsilon, decay_alpha)?
    } else {
        log::warn!("explicit model without a decay exponent: solving the unpruned graph");
        approx::full_graph(&model)
    };
    let (method, d) = match decomp {
        Some(path) => ("supplied", TreeDecomposition::from_json(&read(path)?)?),
        None => ("greedy", approx::greedy_decomposition(model.len(), &graph.edge_pairs())),
    };
    let (state, approx_energy) = approx::dp_ground_state(&graph, &d)?;
    let out = ApproxOutput {
        method,
        epsilon,
        initial_cutoff: graph.initial_cutoff,
        cutoff: graph.cutoff,
        width: d.width(),
        certified: graph.certified,
        degenerate: graph.degenerate,
        pruned_weight: graph.pruned_weight,
        approx_energy,
        energy: model.energy(&state)?.total,
        gap_bound: 2.0 * graph.pruned_weight,
        target_bound: model.len() as f64 * epsilon,
        state,
    };
    Output::json(&out, out.certified)
}

#[derive(Serialize)]
struct LayerSummary {
    index: usize,
    kind: LayerKind,
    upper_spins: usize,
    lower_spins: usize,
    log_a: f64,
    delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

#[derive(Serialize)]
struct CompileOutput {
    out: PathBuf,
    alpha_target: f64,
    threshold: f64,
    t: usize,
    layers: Vec<LayerSummary>,
    composed: Composition,
    grid_spins: usize,
}

pub fn compile(mis: &Path, alpha: f64, t: Option<usize>, max_depth: usize, out: &Path) -> Result<Output, CliError> {
    let inst = load_mis(mis)?;
    let bundle = reduction::compile_pipeline(&inst, alpha, &CompileOptions { t_override: t, max_depth })?;
    reduction::write_bundle(&bundle, out)?;
    let layers = bundle
        .maps
        .iter()
        .enumerate()
        .map(|(index, m)| LayerSummary {
            index,
            kind: m.kind,
            upper_spins: m.upper_spins,
            lower_spins: m.lower_spins,
            log_a: m.log_scale,
            delta: m.delta,
            epsilon: m.epsilon,
        })
        .collect();
    let summary = CompileOutput {
        out: out.to_path_buf(),
        alpha_target: alpha,
        threshold: reduction::alpha_threshold(inst.len()),
        t: bundle.t,
        layers,
        composed: bundle.composed,
        grid_spins: bundle.grid().len(),
    };
    Output::json(&summary, true)
}

pub fn decode(bundle: &Path, state: &str) -> Result<Output, CliError> {
    let bundle = reduction::read_bundle(bundle)?;
    let state = load_state(state)?;
    Output::json(&reduction::decode_pipeline(&bundle, &state)?, true)
}

/// `count` separations spaced geometrically over `[r_min, r_max]`.
fn geometric(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![r_min];
    }
    let step = (r_max / r_min).ln() / (count - 1) as f64;
    (0..count).map(|k| r_min * (step * k as f64).exp()).collect()
}

pub fn separations(r: &[f64], r_min: f64, r_max: f64, samples: usize) -> Vec<f64> {
    if r.is_empty() { geometric(r_min, r_max, samples) } else { r.to_vec() }
}

pub fn gadget_csv(alpha: f64, rs: &[f64]) -> Result<Output, CliError> {
    let samples = gadget::coupling_law(alpha, rs)?;
    let mut buf = Vec::new();
    gadget::write_coupling_csv(&mut buf, &samples).map_err(|e| CliError::bad(e.to_string()))?;
    Ok(Output { body: String::from_utf8(buf).expect("CSV is ASCII"), passed: true })
}

pub fn verify_bundle(dir: &Path, samples: usize, g: &Globals) -> Result<Output, CliError> {
    let bundle = reduction::read_bundle(dir)?;
    let report = verify::verify_bundle(&bundle, Domain::Auto { seed: g.seed, count: samples })?;
    for (k, l) in report.layers.iter().enumerate() {
        eprintln!(
            "{} layer {k} ({:?}): max residual {:e} vs delta {:e} over {} ({} states)",
            verdict(l.passed),
            l.layer,
            l.max_residual,
            l.delta,
            l.domain,
            l.states_checked
        );
    }
    eprintln!(
        "{} composed delta {} < 5/12, grid spins {} of {}",
        verdict(report.composed_delta_ok),
        report.composed.delta,
        report.grid_spins,
        report.expected_grid_spins
    );
    Output::json(&report, report.passed)
}

pub fn verify_law(alpha: f64, rs: &[f64]) -> Result<Output, CliError> {
    let report = verify::verify_interaction_law(alpha, rs)?;
    eprintln!(
        "{} slope {:.4} vs {} (tolerance {}), bounded by f = {:.4}: {}, non-growing: {}",
        verdict(report.passed),
        report.slope,
        report.expected_slope,
        verify::SLOPE_TOLERANCE,
        report.f_bound,
        report.bounded,
        report.non_growing
    );
    Output::json(&report, report.passed)
}

pub fn verify_nn(mis: &Path, g: &Globals) -> Result<Output, CliError> {
    let report = verify::check_nn_threshold(&load_mis(mis)?, &g.solver)?;
    for row in &report.rows {
        eprintln!(
            "k={}: best independent-set energy {} vs bound {} ({})",
            row.k,
            row.min_energy,
            row.bound,
            if row.attained { "attained" } else { "not attained" }
        );
    }
    eprintln!(
        "{} ground energy {}, MIS size {}, all ground states decode to a maximum set: {}",
        verdict(report.all_ground_states_decode_to_mis),
        report.ground_energy,
        report.mis_size,
        report.all_ground_states_decode_to_mis
    );
    Output::json(&report, report.all_ground_states_decode_to_mis)
}

#[derive(Serialize)]
struct GadgetReport {
    alpha: f64,
    ground_states: Vec<SpinState>,
    degenerate_pair: bool,
    enumerated_gap: f64,
    closed_form_gap: f64,
    gap_matches: bool,
    passed: bool,
}

pub fn verify_gadget(alpha: f64, g: &Globals) -> Result<Output, CliError> {
    let model = gadget::gadget_model(&GadgetSpec::new([0.0, 0.0], alpha, 0.0))?;
    let ground = exact::ground_states(&model, &g.solver)?;
    let plus = SpinState::new(PLUS_PATTERN.to_vec())?;
    let minus = SpinState::new(MINUS_PATTERN.to_vec())?;
    let degenerate_pair = ground.states == [minus, plus];
    let enumerated_gap = gadget::exact_gadget_gap(alpha)?;
    let closed_form_gap = gadget::gadget_gap(alpha);
    let gap_matches = (enumerated_gap - closed_form_gap).abs() <= 1e-9;
    let report = GadgetReport {
        alpha,
        ground_states: ground.states,
        degenerate_pair,
        enumerated_gap,
        closed_form_gap,
        gap_matches,
        passed: degenerate_pair && gap_matches,
    };
    eprintln!(
        "{} two ground states σ±: {degenerate_pair}; gap {enumerated_gap} vs closed form {closed_form_gap}",
        verdict(report.passed)
    );
    Output::json(&report, report.passed)
}

pub fn verify_validity(model: &Path, block: usize, samples: usize, g: &Globals) -> Result<Output, CliError> {
    let model = load_model(model, g)?;
    let report = verify::verify_validity(&model, block, Domain::Auto { seed: g.seed, count: samples })?;
    eprintln!(
        "{} block {block}: minimum internal gap {:e} over {} ({} configurations)",
        verdict(report.passed),
        report.min_gap,
        report.domain,
        report.configurations
    );
    Output::json(&report, report.passed)
}

fn verdict(ok: bool) -> &'static str {
    if ok { "PASS" } else { "FAIL" }
}

/// Times the 1D scheme on seeded chains; the exact gap is left empty above
/// the guard.
pub fn bench(ns: &[usize], epsilon: f64, alpha: f64, c: f64, g: &Globals) -> Result<Output, CliError> {
    let mut body = String::from("n,epsilon,width,wall_ms,energy_gap_to_exact\n");
    let mut passed = true;
    for &n in ns {
        let mut rng = ChaCha8Rng::seed_from_u64(g.seed ^ n as u64);
        let model = instances::random_chain(&mut rng, n, alpha, c);
        let start = Instant::now();
        let report = approx::ptas_solve(&model, epsilon)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let gap = if n <= g.solver.limit_n {
            let gap = report.energy - exact::ground_states(&model, &g.solver)?.energy;
            passed &= gap <= report.target_bound;
            gap.to_string()
        } else {
            String::new()
        };
        body.push_str(&format!("{n},{epsilon},{},{wall_ms:.3},{gap}\n", report.width));
    }
    Ok(Output { body, passed })
}
