//! The bound / verify / demo / fixture commands.

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use corrset_core::moment::{
    gns_reconstruct, maximize_over_aqc, maximize_over_level, membership_test,
    moment_matrix_from_model, MomentError, RelaxationLevel,
};
use corrset_core::quantum::{
    behavior_from_model, seesaw_maximize, validate_assembly, QuantumModel,
};
use corrset_core::random::{random_hermitian, rng_from_seed};
use corrset_core::scenario::{
    canonical_functional, classical_bound, evaluate_functional, i3322_functional, pr_box,
    BellFunctional,
};
use corrset_core::symmetry::{invariance_check, SymmetryAction, SymmetryGenerator};
use corrset_core::tensor::{one_param_unitary, ComplexMatrix, PartyDims};
use corrset_core::theorem::{
    commutator_audit, extend_inputs, first_order_check, mixed_permutation_residual,
    permutation_residual_max, signaling_probe, unitary_commutation_reduction, GeneralizedModel,
};
use corrset_sdp::{SdpStatus, SolveOptions};

use crate::formats;
use crate::report::{fnv1a64, CheckLine, RunReport};

/// Failure modes mapped to exit codes by `main`: input errors exit 2,
/// solver failures exit 3; check failures leave through the report verdict
/// with exit 1.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Solver(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

fn moment_err(e: MomentError) -> CliError {
    match e {
        MomentError::Sdp(inner) => CliError::Solver(inner.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

/// Common command-line knobs with their defaults.
#[derive(Debug, Clone)]
pub struct Flags {
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
    pub restarts: usize,
    pub level: RelaxationLevel,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            seed: 1,
            samples: 50,
            restarts: 20,
            level: RelaxationLevel::AlmostQuantum,
        }
    }
}

fn solve_options(flags: &Flags) -> SolveOptions {
    SolveOptions {
        tol: flags.tol,
        max_iterations: 200,
    }
}

fn read_input(path: &Path, report: &mut RunReport) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    report
        .inputs
        .push((path.display().to_string(), fnv1a64(text.as_bytes())));
    Ok(text)
}

fn load_functional(path: &Path, report: &mut RunReport) -> Result<BellFunctional, CliError> {
    let text = read_input(path, report)?;
    formats::parse_functional(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// `bound <classical|quantum-seesaw|npa1|npa2|aqc> <file.fn>`
pub fn cmd_bound(level: &str, path: &Path, flags: &Flags) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut report = RunReport::new(format!("bound {level} {}", path.display()));
    let f = load_functional(path, &mut report)?;
    match level {
        "classical" => {
            let v = classical_bound(&f).map_err(|e| CliError::Input(e.to_string()))?;
            report.result("method", "deterministic-strategy enumeration");
            report.result_f64("bound", v);
        }
        "quantum-seesaw" => {
            let dims = PartyDims::new(f.scenario.outputs().to_vec())
                .map_err(|e| CliError::Input(e.to_string()))?;
            let (v, _) = seesaw_maximize(&f, &dims, flags.restarts, flags.seed)
                .map_err(|e| CliError::Input(e.to_string()))?;
            report.result(
                "method",
                "see-saw alternating ascent (certified lower bound)",
            );
            report.result("restarts", flags.restarts);
            report.result("seed", flags.seed);
            report.result_f64("bound", v);
        }
        "npa1" | "npa2" | "aqc" => {
            let lv = RelaxationLevel::parse(level).expect("matched above");
            let bound = maximize_over_level(&f, lv, &solve_options(flags)).map_err(moment_err)?;
            if bound.status != SdpStatus::Optimal {
                return Err(CliError::Solver(format!(
                    "relaxation solve ended with status {:?} (gap {:.3e})",
                    bound.status, bound.duality_gap
                )));
            }
            report.result(
                "method",
                format!("moment relaxation ({level}, upper bound)"),
            );
            report.result("words", bound.moment_matrix.words.len());
            report.result("iterations", bound.iterations);
            report.result("duality_gap", format!("{:.3e}", bound.duality_gap));
            report.result_f64("bound", bound.value);
        }
        other => {
            return Err(CliError::Input(format!(
            "unknown bound level `{other}` (expected classical, quantum-seesaw, npa1, npa2 or aqc)"
        )))
        }
    }
    report.duration = start.elapsed();
    Ok(report)
}

/// Model wrapper that remembers whether tensor structure is available.
enum LoadedModel {
    Quantum(Box<QuantumModel>, Box<GeneralizedModel>),
    Generalized(Box<GeneralizedModel>),
}

impl LoadedModel {
    fn generalized(&self) -> &GeneralizedModel {
        match self {
            LoadedModel::Quantum(_, g) => g,
            LoadedModel::Generalized(g) => g,
        }
    }
}

fn load_model(path: &Path, report: &mut RunReport) -> Result<LoadedModel, CliError> {
    let text = read_input(path, report)?;
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("");
    match ext {
        "qm" => {
            let qm = formats::parse_quantum_model(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let g =
                GeneralizedModel::from_quantum(&qm).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(LoadedModel::Quantum(Box::new(qm), Box::new(g)))
        }
        "gm" => {
            let g = formats::parse_generalized_model(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok(LoadedModel::Generalized(Box::new(g)))
        }
        other => Err(CliError::Input(format!(
            "unknown model extension `.{other}` (expected .qm or .gm)"
        ))),
    }
}

pub const ALL_CHECKS: [&str; 8] = [
    "assembly",
    "invariance",
    "permutation",
    "mixed",
    "extend",
    "commutators",
    "signaling",
    "first-order",
];

/// Hermitian generator spanning one party's full projector family: a frame
/// rotation of that party's measurement directions. For tensor models the
/// generator is local; for monolithic models it acts on the whole space.
fn sampled_generator(
    model: &LoadedModel,
    party: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<SymmetryGenerator, CliError> {
    match model {
        LoadedModel::Quantum(qm, _) => {
            let d = qm.state.dims.dim(party);
            SymmetryGenerator::generic(party, "sampled", random_hermitian(d, rng))
                .map_err(|e| CliError::Input(e.to_string()))
        }
        LoadedModel::Generalized(g) => {
            let mut m = ComplexMatrix::zeros(g.dim, g.dim);
            for x in 0..g.scenario.inputs()[party] {
                for a in 0..g.scenario.outputs()[party] {
                    let c: f64 = rng.gen_range(-1.5..1.5);
                    m = m.add(&g.operator(party, x, a).scale(Complex64::new(c, 0.0)));
                }
            }
            let m = m
                .hermitian_part(f64::INFINITY)
                .map_err(|e| CliError::Input(e.to_string()))?;
            SymmetryGenerator::generic(party, "sampled", m)
                .map_err(|e| CliError::Input(e.to_string()))
        }
    }
}

fn sampled_action(
    model: &LoadedModel,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<SymmetryAction, CliError> {
    let n = model.generalized().scenario.parties();
    let mut action = SymmetryAction::new();
    for p in 0..n {
        let theta: f64 = rng.gen_range(-2.5..2.5);
        action.set(theta, sampled_generator(model, p, rng)?);
    }
    Ok(action)
}

/// `verify <file.qm|file.gm> --checks ...`
pub fn cmd_verify(path: &Path, checks: &[String], flags: &Flags) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut report = RunReport::new(format!(
        "verify {} --checks {} --samples {} --seed {}",
        path.display(),
        checks.join(","),
        flags.samples,
        flags.seed
    ));
    let model = load_model(path, &mut report)?;
    for name in checks {
        if !ALL_CHECKS.contains(&name.as_str()) {
            return Err(CliError::Input(format!(
                "unknown check `{name}` (expected one of {})",
                ALL_CHECKS.join(", ")
            )));
        }
    }
    let g = model.generalized();
    let n = g.scenario.parties();
    let mut rng = rng_from_seed(flags.seed);
    for name in checks {
        match name.as_str() {
            "assembly" => match &model {
                LoadedModel::Quantum(qm, _) => {
                    let r = validate_assembly(&qm.assembly);
                    report.check(CheckLine::at_most(
                        "assembly.violations",
                        r.violations.len() as f64,
                        0.0,
                    ));
                    for v in r.violations {
                        report.notes.push(v);
                    }
                }
                LoadedModel::Generalized(g) => {
                    let r = g.residuals;
                    report.check(CheckLine::at_most(
                        "assembly.hermiticity",
                        r.hermiticity,
                        1e-9,
                    ));
                    report.check(CheckLine::at_most(
                        "assembly.idempotence",
                        r.idempotence,
                        1e-9,
                    ));
                    report.check(CheckLine::at_most(
                        "assembly.orthogonality",
                        r.orthogonality,
                        1e-9,
                    ));
                    report.check(CheckLine::at_most(
                        "assembly.completeness",
                        r.completeness,
                        1e-9,
                    ));
                    if r.idempotence > 1e-9 || r.orthogonality > 1e-9 {
                        for p in 0..n {
                            for x in 0..g.scenario.inputs()[p] {
                                for a in 0..g.scenario.outputs()[p] {
                                    let e = g.operator(p, x, a);
                                    let dev = e.mul(e).max_abs_diff(e);
                                    if dev > 1e-9 {
                                        report.notes.push(format!(
                                            "idempotence violated at (party {}, input {}, outcome {}): {dev:.3e}",
                                            p + 1, x + 1, a + 1
                                        ));
                                    }
                                }
                            }
                        }
                    }
                }
            },
            "invariance" => {
                let mut worst = 0.0f64;
                match &model {
                    LoadedModel::Quantum(qm, _) => {
                        for _ in 0..flags.samples {
                            let action = sampled_action(&model, &mut rng)?;
                            let dev = invariance_check(qm, &action)
                                .map_err(|e| CliError::Input(e.to_string()))?;
                            worst = worst.max(dev);
                        }
                    }
                    LoadedModel::Generalized(g) => {
                        // Unitary-permutation form of the invariance content:
                        // all parties act, no projectors.
                        let all: Vec<usize> = (0..n).collect();
                        for _ in 0..flags.samples {
                            let action = sampled_action(&model, &mut rng)?;
                            let dev = mixed_permutation_residual(g, &action, &all, &[])
                                .map_err(|e| CliError::Input(e.to_string()))?;
                            worst = worst.max(dev);
                        }
                    }
                }
                report.check(CheckLine::at_most("invariance.max_deviation", worst, 1e-9));
            }
            "permutation" => {
                let r = permutation_residual_max(g).map_err(|e| CliError::Input(e.to_string()))?;
                report.check(CheckLine::at_most("permutation.max_residual", r, 1e-10));
            }
            "mixed" => {
                let mut worst = 0.0f64;
                for _ in 0..flags.samples {
                    let action = sampled_action(&model, &mut rng)?;
                    for mask in 0..(1u32 << n) {
                        let set_i: Vec<usize> = (0..n).filter(|p| mask & (1 << p) != 0).collect();
                        let set_j: Vec<usize> = (0..n).filter(|p| mask & (1 << p) == 0).collect();
                        let r = mixed_permutation_residual(g, &action, &set_i, &set_j)
                            .map_err(|e| CliError::Input(e.to_string()))?;
                        worst = worst.max(r);
                    }
                }
                report.check(CheckLine::at_most("mixed.max_residual", worst, 1e-10));
            }
            "extend" => {
                let mut worst = 0.0f64;
                let rounds = flags.samples.clamp(1, 10);
                for _ in 0..rounds {
                    let action = sampled_action(&model, &mut rng)?;
                    let rep =
                        extend_inputs(g, &action).map_err(|e| CliError::Input(e.to_string()))?;
                    worst = worst.max(rep.max_residual);
                    for p in rep.degenerate_parties {
                        report.notes.push(format!(
                            "degenerate spectrum collapsed outcomes for party {}",
                            p + 1
                        ));
                    }
                }
                report.check(CheckLine::at_most("extend.max_residual", worst, 1e-9));
            }
            "commutators" => {
                let r = commutator_audit(g);
                report.check(CheckLine::at_most("commutators.max_norm", r, 1e-9));
            }
            "signaling" => {
                let mut worst = 0.0f64;
                if n >= 2 {
                    for _ in 0..flags.samples {
                        let pi = rng.gen_range(0..n);
                        let mut pj = rng.gen_range(0..n);
                        while pj == pi {
                            pj = rng.gen_range(0..n);
                        }
                        let gi = sampled_generator(&model, pi, &mut rng)?;
                        let gj = sampled_generator(&model, pj, &mut rng)?;
                        let make = |party: usize,
                                    gen: &SymmetryGenerator|
                         -> Result<ComplexMatrix, CliError> {
                            let u = one_param_unitary(&gen.matrix, 1.0)
                                .map_err(|e| CliError::Input(e.to_string()))?;
                            if u.rows == g.dim {
                                Ok(u)
                            } else {
                                let dims = match &model {
                                    LoadedModel::Quantum(qm, _) => qm.state.dims.clone(),
                                    _ => unreachable!("local generators only for tensor models"),
                                };
                                corrset_core::tensor::embed_local(&u, party, &dims)
                                    .map_err(|e| CliError::Input(e.to_string()))
                            }
                        };
                        let ui = make(pi, &gi)?;
                        let uj = make(pj, &gj)?;
                        let tv = signaling_probe(g, pi, &ui, pj, &uj)
                            .map_err(|e| CliError::Input(e.to_string()))?;
                        worst = worst.max(tv);
                    }
                }
                report.check(CheckLine::at_most("signaling.max_tv", worst, 1e-12));
            }
            "first-order" => {
                let gen = sampled_generator(&model, 0, &mut rng)?;
                let inputs = vec![0usize; n];
                let outcomes = vec![0usize; n];
                let rep = first_order_check(g, &gen, &inputs, &outcomes)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                report.check(CheckLine::at_most(
                    "first-order.four_term",
                    rep.four_term,
                    1e-8,
                ));
                report.check(CheckLine::at_least("first-order.slope", rep.slope, 1.9));
            }
            _ => unreachable!("validated above"),
        }
    }
    report.duration = start.elapsed();
    Ok(report)
}

/// `demo <tsirelson|prbox|mermin|aqc-gap|reconstruct-roundtrip>`
pub fn cmd_demo(name: &str, flags: &Flags) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut report = RunReport::new(format!("demo {name} --seed {}", flags.seed));
    let opts = solve_options(flags);
    match name {
        "tsirelson" => {
            let f = canonical_functional("chsh").map_err(|e| CliError::Input(e.to_string()))?;
            let dims = PartyDims::new(vec![2, 2]).map_err(|e| CliError::Input(e.to_string()))?;
            let (lower, _) = seesaw_maximize(&f, &dims, flags.restarts, flags.seed)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let upper = maximize_over_level(&f, RelaxationLevel::Npa1, &opts).map_err(moment_err)?;
            report.result_f64("seesaw_lower", lower);
            report.result_f64("npa1_upper", upper.value);
            report.check(CheckLine::at_least("tsirelson.seesaw", lower, 2.828426));
            report.check(CheckLine::at_most("tsirelson.npa1", upper.value, 2.828428));
        }
        "prbox" => {
            let f = canonical_functional("chsh").map_err(|e| CliError::Input(e.to_string()))?;
            let pr = pr_box();
            let v = evaluate_functional(&f, &pr).map_err(|e| CliError::Input(e.to_string()))?;
            report.result_f64("chsh_value", v);
            report.check(CheckLine::exactly("prbox.chsh_algebraic_maximum", v, 4.0));
            let member = membership_test(&pr, flags.level, &opts).map_err(moment_err)?;
            report.result_f64("membership_slack", member.slack);
            report.check(CheckLine::at_least(
                "prbox.membership_violation",
                member.max_violation,
                1e-3,
            ));
        }
        "mermin" => {
            let f = canonical_functional("mermin").map_err(|e| CliError::Input(e.to_string()))?;
            let cb = classical_bound(&f).map_err(|e| CliError::Input(e.to_string()))?;
            report.result_f64("classical_bound", cb);
            report.check(CheckLine::exactly("mermin.classical", cb, 2.0));
            let ghz = corrset_core::quantum::ghz_mermin_model();
            let b = behavior_from_model(&ghz).map_err(|e| CliError::Input(e.to_string()))?;
            let v = evaluate_functional(&f, &b).map_err(|e| CliError::Input(e.to_string()))?;
            report.result_f64("ghz_value", v);
            report.check(CheckLine::at_most("mermin.ghz_gap", (v - 4.0).abs(), 1e-9));
            let aqc = maximize_over_aqc(&f, &opts).map_err(moment_err)?;
            report.result_f64("aqc_bound", aqc.value);
            report.check(CheckLine::at_most("mermin.aqc_gap", (aqc.value - 4.0).abs(), 1e-5));
        }
        "aqc-gap" => {
            let f = i3322_functional();
            let aqc = maximize_over_aqc(&f, &opts).map_err(moment_err)?;
            let npa2 = maximize_over_level(&f, RelaxationLevel::Npa2, &opts).map_err(moment_err)?;
            report.result_f64("aqc_value", aqc.value);
            report.result_f64("npa2_value", npa2.value);
            report.result_f64("gap", aqc.value - npa2.value);
            report.check(CheckLine::at_least(
                "aqc-gap.strict_separation",
                aqc.value - npa2.value,
                1e-5,
            ));
        }
        "reconstruct-roundtrip" => {
            let model = corrset_core::quantum::chsh_optimal_model();
            let mm = moment_matrix_from_model(&model, RelaxationLevel::AlmostQuantum)
                .map_err(moment_err)?;
            let rec = gns_reconstruct(&mm).map_err(moment_err)?;
            report.result("gns_rank", rec.dim);
            report.result_f64("gram_residual", rec.gram_residual);
            report.check(CheckLine::at_most(
                "roundtrip.gram_residual",
                rec.gram_residual,
                1e-6,
            ));
            let original = behavior_from_model(&model).map_err(|e| CliError::Input(e.to_string()))?;
            let mut worst = 0.0f64;
            for x in model.scenario().input_tuples() {
                for a in model.scenario().outcome_tuples() {
                    let mut v = rec.state.clone();
                    for party in (0..rec.scenario.parties()).rev() {
                        v = rec.operator(party, x[party], a[party]).matvec(&v);
                    }
                    let p = corrset_core::tensor::vec_inner(&rec.state, &v).re;
                    worst = worst.max((p - original.prob(&a, &x)).abs());
                }
            }
            report.check(CheckLine::at_most("roundtrip.behavior_deviation", worst, 1e-8));
        }
        other => {
            return Err(CliError::Input(format!(
                "unknown demo `{other}` (expected tsirelson, prbox, mermin, aqc-gap or reconstruct-roundtrip)"
            )))
        }
    }
    report.duration = start.elapsed();
    Ok(report)
}

/// `fixture <name> --out <path>`: emit reproducible input files.
pub fn cmd_fixture(name: &str, out: &Path, flags: &Flags) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut report = RunReport::new(format!("fixture {name} --out {}", out.display()));
    let text = match name {
        "chsh-fn" => formats::write_functional(
            &canonical_functional("chsh").map_err(|e| CliError::Input(e.to_string()))?,
        ),
        "mermin-fn" => formats::write_functional(
            &canonical_functional("mermin").map_err(|e| CliError::Input(e.to_string()))?,
        ),
        "i3322-fn" => formats::write_functional(&i3322_functional()),
        "chsh-optimal-qm" => {
            formats::write_quantum_model(&corrset_core::quantum::chsh_optimal_model())
        }
        "ghz-mermin-qm" => formats::write_quantum_model(&corrset_core::quantum::ghz_mermin_model()),
        "aqc-gns-gm" => {
            let f = i3322_functional();
            let bound = maximize_over_aqc(&f, &solve_options(flags)).map_err(moment_err)?;
            let rec = gns_reconstruct(&bound.moment_matrix).map_err(moment_err)?;
            let g = GeneralizedModel::from_reconstruction(&rec)
                .map_err(|e| CliError::Input(e.to_string()))?;
            report.result_f64("aqc_value", bound.value);
            report.result("gns_rank", rec.dim);
            formats::write_generalized_model(&g)
        }
        "aqc-chsh-mm" => {
            let f = canonical_functional("chsh").map_err(|e| CliError::Input(e.to_string()))?;
            let bound = maximize_over_aqc(&f, &solve_options(flags)).map_err(moment_err)?;
            report.result_f64("aqc_value", bound.value);
            formats::write_moment_matrix(&bound.moment_matrix)
        }
        other => {
            return Err(CliError::Input(format!(
                "unknown fixture `{other}` (expected chsh-fn, mermin-fn, i3322-fn, chsh-optimal-qm, ghz-mermin-qm, aqc-gns-gm or aqc-chsh-mm)"
            )))
        }
    };
    std::fs::write(out, text).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
    report.result("written", out.display().to_string());
    report.duration = start.elapsed();
    Ok(report)
}

/// Exercise the App. E reduction as a verify-style helper used by tests.
pub fn reduction_consistency(g: &GeneralizedModel, thetas: &[f64]) -> Result<f64, CliError> {
    let red =
        unitary_commutation_reduction(g, thetas).map_err(|e| CliError::Input(e.to_string()))?;
    let mut worst = 0.0f64;
    for pair in &red.pairs {
        let direct = corrset_core::theorem::direct_commutator_grid(g, pair.parties, pair.inputs);
        for (a, row) in pair.inferred.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                worst = worst.max((v - direct[a][b]).abs());
            }
        }
    }
    Ok(worst)
}
