//! Standard quantum kinematics: normalized state vectors, complete projector
//! assemblies, the Born rule, behavior extraction and see-saw maximization of
//! Bell functionals.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::random::{haar_unitary, random_state, rng_from_seed};
use crate::scenario::{Behavior, BellFunctional, Scenario, ValidationReport};
use crate::tensor::{
    apply_local, hermitian_eig, vec_inner, vec_norm, ComplexMatrix, PartyDims, TensorError,
};

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("state norm is {norm}, should be 1 within 1e-10")]
    NotNormalized { norm: f64 },
    #[error("state has {got} amplitudes but the party dims give {want}")]
    StateDims { got: usize, want: usize },
    #[error("assembly shape does not match the scenario at party {party}")]
    AssemblyShape { party: usize },
    #[error("state and assembly dims differ")]
    DimsMismatch,
    #[error("input or outcome index out of range: ({outcomes:?}|{inputs:?})")]
    BadIndices {
        inputs: Vec<usize>,
        outcomes: Vec<usize>,
    },
    #[error(
        "see-saw needs d_i <= dims[i]; party {party} has {outputs} outputs on a dim-{dim} factor"
    )]
    SeesawDims {
        party: usize,
        outputs: usize,
        dim: usize,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("functional scenario does not match the model scenario")]
    ScenarioMismatch,
}

/// Normalized state vector on a tensor-product space.
#[derive(Debug, Clone)]
pub struct QuantumState {
    pub dims: PartyDims,
    pub amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn new(dims: PartyDims, amplitudes: Vec<Complex64>) -> Result<Self, QuantumError> {
        if amplitudes.len() != dims.total() {
            return Err(QuantumError::StateDims {
                got: amplitudes.len(),
                want: dims.total(),
            });
        }
        let norm = vec_norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QuantumError::NotNormalized { norm });
        }
        Ok(Self { dims, amplitudes })
    }
}

/// Complete orthogonal projector sets, one per (party, input, outcome).
#[derive(Debug, Clone)]
pub struct ProjectorAssembly {
    pub scenario: Scenario,
    pub dims: PartyDims,
    /// `projectors[party][input][outcome]`, each `dims[party]`-square.
    pub projectors: Vec<Vec<Vec<ComplexMatrix>>>,
}

impl ProjectorAssembly {
    pub fn new(
        scenario: Scenario,
        dims: PartyDims,
        projectors: Vec<Vec<Vec<ComplexMatrix>>>,
    ) -> Result<Self, QuantumError> {
        if dims.party_count() != scenario.parties() || projectors.len() != scenario.parties() {
            return Err(QuantumError::AssemblyShape {
                party: projectors.len().min(scenario.parties()),
            });
        }
        for (p, per_input) in projectors.iter().enumerate() {
            if per_input.len() != scenario.inputs()[p] {
                return Err(QuantumError::AssemblyShape { party: p });
            }
            for per_outcome in per_input {
                if per_outcome.len() != scenario.outputs()[p] {
                    return Err(QuantumError::AssemblyShape { party: p });
                }
                for e in per_outcome {
                    if e.rows != dims.dim(p) || e.cols != dims.dim(p) {
                        return Err(QuantumError::AssemblyShape { party: p });
                    }
                }
            }
        }
        Ok(Self {
            scenario,
            dims,
            projectors,
        })
    }

    pub fn projector(&self, party: usize, input: usize, outcome: usize) -> &ComplexMatrix {
        &self.projectors[party][input][outcome]
    }
}

/// Orthogonality, idempotence and completeness checks with locations.
pub fn validate_assembly(a: &ProjectorAssembly) -> ValidationReport {
    let mut report = ValidationReport::default();
    for p in 0..a.scenario.parties() {
        let d = a.dims.dim(p);
        let id = ComplexMatrix::identity(d);
        for x in 0..a.scenario.inputs()[p] {
            let set = &a.projectors[p][x];
            let mut sum = ComplexMatrix::zeros(d, d);
            for (o, e) in set.iter().enumerate() {
                if e.hermiticity_deviation() > 1e-10 {
                    report.violations.push(format!(
                        "projector (party {p}, input {x}, outcome {o}) is not Hermitian"
                    ));
                }
                let dev = e.mul(e).max_abs_diff(e);
                if dev > 1e-10 {
                    report.violations.push(format!(
                        "idempotence violated at (party {p}, input {x}, outcome {o}): |E^2 - E| = {dev:.3e}"
                    ));
                }
                for (o2, e2) in set.iter().enumerate().skip(o + 1) {
                    let cross = e.mul(e2).max_abs();
                    if cross > 1e-10 {
                        report.violations.push(format!(
                            "orthogonality violated at (party {p}, input {x}, outcomes {o},{o2}): |E E'| = {cross:.3e}"
                        ));
                    }
                }
                sum = sum.add(e);
            }
            let comp = sum.max_abs_diff(&id);
            if comp > 1e-10 {
                report.violations.push(format!(
                    "completeness violated at (party {p}, input {x}): |sum E - I| = {comp:.3e}"
                ));
            }
        }
    }
    report
}

/// A state plus an assembly on the same tensor-product space.
#[derive(Debug, Clone)]
pub struct QuantumModel {
    pub state: QuantumState,
    pub assembly: ProjectorAssembly,
}

impl QuantumModel {
    pub fn new(state: QuantumState, assembly: ProjectorAssembly) -> Result<Self, QuantumError> {
        if state.dims != assembly.dims {
            return Err(QuantumError::DimsMismatch);
        }
        Ok(Self { state, assembly })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.assembly.scenario
    }
}

/// Born rule: <psi| prod_i E_i^{a_i, x_i} |psi>.
pub fn born_probability(
    m: &QuantumModel,
    inputs: &[usize],
    outcomes: &[usize],
) -> Result<f64, QuantumError> {
    let s = &m.assembly.scenario;
    if !s.contains_cell(outcomes, inputs) {
        return Err(QuantumError::BadIndices {
            inputs: inputs.to_vec(),
            outcomes: outcomes.to_vec(),
        });
    }
    let mut phi = m.state.amplitudes.clone();
    for p in 0..s.parties() {
        let e = m.assembly.projector(p, inputs[p], outcomes[p]);
        phi = apply_local(e, p, &m.state.dims, &phi);
    }
    let z = vec_inner(&m.state.amplitudes, &phi);
    debug_assert!(z.im.abs() < 1e-9, "Born value has imaginary part {}", z.im);
    Ok(z.re)
}

/// Evaluate the Born rule over every cell of the scenario.
pub fn behavior_from_model(m: &QuantumModel) -> Result<Behavior, QuantumError> {
    let s = m.assembly.scenario.clone();
    let oc = s.outcome_count();
    let mut table = vec![0.0; s.input_count() * oc];
    for (xf, x) in s.input_tuples().iter().enumerate() {
        for (af, a) in s.outcome_tuples().iter().enumerate() {
            table[xf * oc + af] = born_probability(m, x, a)?;
        }
    }
    Behavior::new(s, table).map_err(|_| QuantumError::DimsMismatch)
}

/// Bell operator sum_{a,x} f(a,x) prod_i E_i^{a_i,x_i} as a dense matrix.
pub fn bell_operator(f: &BellFunctional, m: &QuantumModel) -> Result<ComplexMatrix, QuantumError> {
    if f.scenario != *m.scenario() {
        return Err(QuantumError::ScenarioMismatch);
    }
    let total = m.state.dims.total();
    let mut op = ComplexMatrix::zeros(total, total);
    for (x, a, c) in f.terms() {
        // Build the product by applying locals to each basis column.
        let mut cols = ComplexMatrix::identity(total);
        for p in 0..f.scenario.parties() {
            let e = m.assembly.projector(p, x[p], a[p]);
            // Apply to every column.
            let mut next = ComplexMatrix::zeros(total, total);
            for col in 0..total {
                let v: Vec<Complex64> = (0..total).map(|r| cols.get(r, col)).collect();
                let w = apply_local(e, p, &m.state.dims, &v);
                for r in 0..total {
                    next.set(r, col, w[r]);
                }
            }
            cols = next;
        }
        op = op.add(&cols.scale(Complex64::new(c, 0.0)));
    }
    Ok(op)
}

/// Partial contraction: the party-local operator A with
/// A[r][s] = sum_rest chi[(r,rest)] conj(psi[(s,rest)]), so that
/// tr(E A) = <psi| E_party |chi>.
fn effective_local_operator(
    chi: &[Complex64],
    psi: &[Complex64],
    party: usize,
    dims: &PartyDims,
) -> ComplexMatrix {
    let d = dims.dim(party);
    let stride = dims.stride(party);
    let total = dims.total();
    let block = d * stride;
    let mut a = ComplexMatrix::zeros(d, d);
    for base in (0..total).step_by(block) {
        for inner in 0..stride {
            for r in 0..d {
                let cr = chi[base + r * stride + inner];
                if cr == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for s in 0..d {
                    let v = cr * psi[base + s * stride + inner].conj();
                    a.data[r * d + s] += v;
                }
            }
        }
    }
    a
}

fn projectors_from_columns(
    vectors: &[(usize, Vec<Complex64>)],
    d: usize,
    outcomes: usize,
) -> Vec<ComplexMatrix> {
    let mut out = vec![ComplexMatrix::zeros(d, d); outcomes];
    for (outcome, v) in vectors {
        for r in 0..d {
            for c in 0..d {
                out[*outcome].data[r * d + c] += v[r] * v[c].conj();
            }
        }
    }
    out
}

/// Optimal single-(party,input) update given effective operators R^a:
/// maximize sum_a tr(E^a R^a) over complete orthogonal projector sets.
fn update_projectors(effective: &[ComplexMatrix], d: usize) -> Vec<ComplexMatrix> {
    let outcomes = effective.len();
    if outcomes == 2 {
        // Binary outputs: project onto the nonnegative / negative eigenspaces
        // of R^0 - R^1.
        let diff = effective[0].sub(&effective[1]);
        let h = diff.hermitian_part(f64::INFINITY).expect("square");
        let (w, v) = hermitian_eig(&h).expect("hermitian by construction");
        let mut vectors: Vec<(usize, Vec<Complex64>)> = Vec::with_capacity(d);
        for (k, &lam) in w.iter().enumerate() {
            let col: Vec<Complex64> = (0..d).map(|r| v.get(r, k)).collect();
            vectors.push((if lam >= 0.0 { 0 } else { 1 }, col));
        }
        projectors_from_columns(&vectors, d, outcomes)
    } else {
        // Greedy per-outcome eigenvector assignment: rank all (eigenvalue,
        // outcome, vector) candidates by eigenvalue descending, tie-break on
        // lowest outcome then lowest eigenvector index, and keep the component
        // orthogonal to everything already assigned.
        let mut candidates: Vec<(f64, usize, usize, Vec<Complex64>)> = Vec::new();
        for (o, r) in effective.iter().enumerate() {
            let h = r.hermitian_part(f64::INFINITY).expect("square");
            let (w, v) = hermitian_eig(&h).expect("hermitian by construction");
            for k in 0..d {
                let col: Vec<Complex64> = (0..d).map(|row| v.get(row, k)).collect();
                candidates.push((w[k], o, k, col));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut assigned: Vec<(usize, Vec<Complex64>)> = Vec::new();
        for (_, outcome, _, mut vec) in candidates {
            if assigned.len() == d {
                break;
            }
            for (_, u) in &assigned {
                let proj = vec_inner(u, &vec);
                for (vi, ui) in vec.iter_mut().zip(u.iter()) {
                    *vi -= proj * ui;
                }
            }
            let norm = vec_norm(&vec);
            if norm > 1e-8 {
                for z in vec.iter_mut() {
                    *z /= norm;
                }
                assigned.push((outcome, vec));
            }
        }
        // Any numerically unreachable remainder of the space goes to the
        // last outcome so completeness holds.
        if assigned.len() < d {
            let have: Vec<Vec<Complex64>> = assigned.iter().map(|(_, v)| v.clone()).collect();
            for basis in 0..d {
                if assigned.len() == d {
                    break;
                }
                let mut e = vec![Complex64::new(0.0, 0.0); d];
                e[basis] = Complex64::new(1.0, 0.0);
                for u in have
                    .iter()
                    .chain(assigned.iter().skip(have.len()).map(|(_, v)| v))
                {
                    let proj = vec_inner(u, &e);
                    for (vi, ui) in e.iter_mut().zip(u.iter()) {
                        *vi -= proj * ui;
                    }
                }
                let norm = vec_norm(&e);
                if norm > 1e-8 {
                    for z in e.iter_mut() {
                        *z /= norm;
                    }
                    assigned.push((outcomes - 1, e));
                }
            }
        }
        projectors_from_columns(&assigned, d, outcomes)
    }
}

/// Random complete rank-balanced projector assembly.
pub fn random_assembly(
    scenario: &Scenario,
    dims: &PartyDims,
    rng: &mut ChaCha8Rng,
) -> ProjectorAssembly {
    let mut projectors = Vec::with_capacity(scenario.parties());
    for p in 0..scenario.parties() {
        let d = dims.dim(p);
        let outs = scenario.outputs()[p];
        let mut per_input = Vec::with_capacity(scenario.inputs()[p]);
        for _x in 0..scenario.inputs()[p] {
            let u = haar_unitary(d, rng);
            // Split the orthonormal columns into `outs` groups with ranks as
            // balanced as possible; outcomes past the space dimension get
            // zero projectors.
            let base = d / outs;
            let extra = d % outs;
            let mut vectors: Vec<(usize, Vec<Complex64>)> = Vec::new();
            let mut col = 0;
            for o in 0..outs {
                let rank = base + usize::from(o < extra);
                for _ in 0..rank {
                    vectors.push((o, (0..d).map(|r| u.get(r, col)).collect()));
                    col += 1;
                }
            }
            per_input.push(projectors_from_columns(&vectors, d, outs));
        }
        projectors.push(per_input);
    }
    ProjectorAssembly::new(scenario.clone(), dims.clone(), projectors).expect("shapes consistent")
}

/// Random quantum model (Haar state, random balanced assemblies).
pub fn random_model(scenario: &Scenario, dims: &PartyDims, rng: &mut ChaCha8Rng) -> QuantumModel {
    let state =
        QuantumState::new(dims.clone(), random_state(dims.total(), rng)).expect("normalized");
    let assembly = random_assembly(scenario, dims, rng);
    QuantumModel::new(state, assembly).expect("dims agree")
}

/// See-saw maximization of a Bell functional over quantum models with the
/// given local dimensions. Alternates a state update (top eigenvector of the
/// Bell operator) with per-(party, input) projector updates until a full
/// sweep improves the objective by less than 1e-10, or 500 sweeps elapse.
/// Restarts from seeded Haar-random models; the best model wins, earlier
/// restarts winning ties. The returned value is recomputed from the explicit
/// model, so it is a certified quantum lower bound.
pub fn seesaw_maximize(
    f: &BellFunctional,
    dims: &PartyDims,
    restarts: usize,
    seed: u64,
) -> Result<(f64, QuantumModel), QuantumError> {
    let s = &f.scenario;
    if dims.party_count() != s.parties() {
        return Err(QuantumError::DimsMismatch);
    }
    for p in 0..s.parties() {
        if s.outputs()[p] > dims.dim(p) {
            return Err(QuantumError::SeesawDims {
                party: p,
                outputs: s.outputs()[p],
                dim: dims.dim(p),
            });
        }
    }
    let mut best: Option<(f64, QuantumModel)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = rng_from_seed(seed.wrapping_add(restart as u64));
        let mut model = random_model(s, dims, &mut rng);
        let mut last = f64::NEG_INFINITY;
        for _sweep in 0..500 {
            // State update: top eigenvector of the Bell operator.
            let op = bell_operator(f, &model)?;
            let h = op.hermitian_part(1e-8)?;
            let (w, v) = hermitian_eig(&h)?;
            let top = w.len() - 1;
            let amplitudes: Vec<Complex64> = (0..dims.total()).map(|r| v.get(r, top)).collect();
            model.state = QuantumState::new(dims.clone(), amplitudes)?;

            // Projector updates, one party and input at a time.
            for party in 0..s.parties() {
                let d = dims.dim(party);
                let inputs = s.inputs()[party];
                let outs = s.outputs()[party];
                let mut effective: Vec<Vec<ComplexMatrix>> =
                    vec![vec![ComplexMatrix::zeros(d, d); outs]; inputs];
                for (x, a, c) in f.terms() {
                    let mut chi = model.state.amplitudes.clone();
                    for q in 0..s.parties() {
                        if q == party {
                            continue;
                        }
                        let e = model.assembly.projector(q, x[q], a[q]);
                        chi = apply_local(e, q, dims, &chi);
                    }
                    let contraction =
                        effective_local_operator(&chi, &model.state.amplitudes, party, dims);
                    effective[x[party]][a[party]] = effective[x[party]][a[party]]
                        .add(&contraction.scale(Complex64::new(c, 0.0)));
                }
                for x in 0..inputs {
                    model.assembly.projectors[party][x] = update_projectors(&effective[x], d);
                }
            }

            let value = f
                .terms()
                .map(|(x, a, c)| c * born_probability(&model, &x, &a).unwrap_or(0.0))
                .sum::<f64>();
            if value - last < 1e-10 {
                break;
            }
            last = value;
        }
        // Certify through the behavior path.
        let behavior = behavior_from_model(&model)?;
        let value = crate::scenario::evaluate_functional(f, &behavior)
            .map_err(|_| QuantumError::ScenarioMismatch)?;
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, model));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// CHSH-optimal fixture: singlet state and in-plane qubit measurements at
/// the Tsirelson angles; evaluates CHSH to 2*sqrt(2).
pub fn chsh_optimal_model() -> QuantumModel {
    let dims = PartyDims::new(vec![2, 2]).unwrap();
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let state = QuantumState::new(
        dims.clone(),
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(inv, 0.0),
            Complex64::new(-inv, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    )
    .unwrap();
    // Observable O(theta) = cos(theta) sigma_z + sin(theta) sigma_x; Bob's
    // observables are negated so the singlet correlator becomes +cos(a-b).
    let obs = |theta: f64, flip: bool| -> Vec<ComplexMatrix> {
        let sign = if flip { -1.0 } else { 1.0 };
        let o = ComplexMatrix::from_real(vec![
            vec![sign * theta.cos(), sign * theta.sin()],
            vec![sign * theta.sin(), -sign * theta.cos()],
        ]);
        let id = ComplexMatrix::identity(2);
        vec![
            id.add(&o).scale(Complex64::new(0.5, 0.0)),
            id.sub(&o).scale(Complex64::new(0.5, 0.0)),
        ]
    };
    let pi = std::f64::consts::PI;
    let assembly = ProjectorAssembly::new(
        Scenario::symmetric(2, 2, 2).unwrap(),
        dims,
        vec![
            vec![obs(0.0, false), obs(pi / 2.0, false)],
            vec![obs(pi / 4.0, true), obs(-pi / 4.0, true)],
        ],
    )
    .unwrap();
    QuantumModel::new(state, assembly).unwrap()
}

/// GHZ fixture attaining the Mermin functional's algebraic maximum 4 with
/// X/Y-plane measurements.
pub fn ghz_mermin_model() -> QuantumModel {
    let dims = PartyDims::new(vec![2, 2, 2]).unwrap();
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut amp = vec![Complex64::new(0.0, 0.0); 8];
    amp[0] = Complex64::new(inv, 0.0);
    amp[7] = Complex64::new(inv, 0.0);
    let state = QuantumState::new(dims.clone(), amp).unwrap();
    // O(phi) = cos(phi) X + sin(phi) Y, projectors (I +- O)/2.
    let obs = |phi: f64| -> Vec<ComplexMatrix> {
        let o = ComplexMatrix::from_rows(vec![
            vec![Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, -phi)],
            vec![Complex64::from_polar(1.0, phi), Complex64::new(0.0, 0.0)],
        ]);
        let id = ComplexMatrix::identity(2);
        vec![
            id.add(&o).scale(Complex64::new(0.5, 0.0)),
            id.sub(&o).scale(Complex64::new(0.5, 0.0)),
        ]
    };
    let pi2 = std::f64::consts::FRAC_PI_2;
    let assembly = ProjectorAssembly::new(
        Scenario::symmetric(3, 2, 2).unwrap(),
        dims,
        vec![
            vec![obs(0.0), obs(pi2)],
            vec![obs(0.0), obs(pi2)],
            vec![obs(-pi2), obs(0.0)],
        ],
    )
    .unwrap();
    QuantumModel::new(state, assembly).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        canonical_functional, check_no_signaling, evaluate_functional, validate_behavior,
    };

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn computational_basis_assembly_is_valid() {
        let model = chsh_optimal_model();
        assert!(validate_assembly(&model.assembly).is_valid());
    }

    #[test]
    fn corrupted_assembly_is_flagged() {
        let mut model = chsh_optimal_model();
        model.assembly.projectors[0][0][0] =
            ComplexMatrix::from_real(vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        let report = validate_assembly(&model.assembly);
        assert!(!report.is_valid());
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("idempotence") && v.contains("party 0")));
    }

    #[test]
    fn missing_outcome_breaks_completeness() {
        let mut model = chsh_optimal_model();
        model.assembly.projectors[1][0][1] = ComplexMatrix::zeros(2, 2);
        let report = validate_assembly(&model.assembly);
        assert!(report.violations.iter().any(|v| v.contains("completeness")));
    }

    #[test]
    fn trivial_single_outcome_probability_is_one() {
        let dims = PartyDims::new(vec![2, 3]).unwrap();
        let scenario = Scenario::new(vec![1, 1], vec![1, 1]).unwrap();
        let projectors = vec![
            vec![vec![ComplexMatrix::identity(2)]],
            vec![vec![ComplexMatrix::identity(3)]],
        ];
        let assembly = ProjectorAssembly::new(scenario, dims.clone(), projectors).unwrap();
        let mut rng = rng_from_seed(3);
        let state = QuantumState::new(dims.clone(), random_state(dims.total(), &mut rng)).unwrap();
        let m = QuantumModel::new(state, assembly).unwrap();
        let p = born_probability(&m, &[0, 0], &[0, 0]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singlet_z_measurements_anticorrelate() {
        // Singlet with both parties measuring the computational basis:
        // equal outcomes never occur, opposite outcomes carry 1/2 each.
        let dims = PartyDims::new(vec![2, 2]).unwrap();
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let state = QuantumState::new(
            dims.clone(),
            vec![c(0.0, 0.0), c(inv, 0.0), c(-inv, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let zbasis = || {
            vec![
                ComplexMatrix::from_real(vec![vec![1.0, 0.0], vec![0.0, 0.0]]),
                ComplexMatrix::from_real(vec![vec![0.0, 0.0], vec![0.0, 1.0]]),
            ]
        };
        let assembly = ProjectorAssembly::new(
            Scenario::symmetric(2, 1, 2).unwrap(),
            dims,
            vec![vec![zbasis()], vec![zbasis()]],
        )
        .unwrap();
        let model = QuantumModel::new(state, assembly).unwrap();
        assert_eq!(born_probability(&model, &[0, 0], &[0, 0]).unwrap(), 0.0);
        assert_eq!(born_probability(&model, &[0, 0], &[1, 1]).unwrap(), 0.0);
        assert!((born_probability(&model, &[0, 0], &[0, 1]).unwrap() - 0.5).abs() < 1e-12);
        assert!((born_probability(&model, &[0, 0], &[1, 0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn born_rejects_out_of_range_indices() {
        let model = chsh_optimal_model();
        assert!(matches!(
            born_probability(&model, &[0, 2], &[0, 0]),
            Err(QuantumError::BadIndices { .. })
        ));
        assert!(matches!(
            born_probability(&model, &[0, 0], &[2, 0]),
            Err(QuantumError::BadIndices { .. })
        ));
    }

    #[test]
    fn born_outcomes_sum_to_one() {
        let mut rng = rng_from_seed(11);
        let s = Scenario::symmetric(2, 2, 2).unwrap();
        let dims = PartyDims::new(vec![2, 2]).unwrap();
        let m = random_model(&s, &dims, &mut rng);
        for x in s.input_tuples() {
            let total: f64 = s
                .outcome_tuples()
                .iter()
                .map(|a| born_probability(&m, &x, a).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn born_invariant_under_global_phase() {
        let model = chsh_optimal_model();
        let phase = Complex64::from_polar(1.0, 1.234);
        let mut rotated = model.clone();
        for z in rotated.state.amplitudes.iter_mut() {
            *z *= phase;
        }
        for x in model.scenario().input_tuples() {
            for a in model.scenario().outcome_tuples() {
                let p = born_probability(&model, &x, &a).unwrap();
                let q = born_probability(&rotated, &x, &a).unwrap();
                assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn chsh_optimal_model_hits_tsirelson() {
        let model = chsh_optimal_model();
        let b = behavior_from_model(&model).unwrap();
        assert!(validate_behavior(&b).is_valid());
        assert!(check_no_signaling(&b) <= 1e-10);
        let chsh = canonical_functional("chsh").unwrap();
        let v = evaluate_functional(&chsh, &b).unwrap();
        assert!(
            (v - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9,
            "CHSH value {v}"
        );
    }

    #[test]
    fn ghz_model_attains_mermin_maximum() {
        let model = ghz_mermin_model();
        let b = behavior_from_model(&model).unwrap();
        assert!(validate_behavior(&b).is_valid());
        let mermin = canonical_functional("mermin").unwrap();
        let v = evaluate_functional(&mermin, &b).unwrap();
        assert!((v - 4.0).abs() < 1e-9, "Mermin value {v}");
    }

    #[test]
    fn product_state_behavior_factorizes() {
        let dims = PartyDims::new(vec![2, 2]).unwrap();
        let mut rng = rng_from_seed(5);
        let s = Scenario::symmetric(2, 2, 2).unwrap();
        let assembly = random_assembly(&s, &dims, &mut rng);
        let a_local = random_state(2, &mut rng);
        let b_local = random_state(2, &mut rng);
        let mut amp = vec![c(0.0, 0.0); 4];
        for i in 0..2 {
            for j in 0..2 {
                amp[i * 2 + j] = a_local[i] * b_local[j];
            }
        }
        let m = QuantumModel::new(QuantumState::new(dims, amp).unwrap(), assembly).unwrap();
        let b = behavior_from_model(&m).unwrap();
        let ma = marginal_of(&b, 0);
        let mb = marginal_of(&b, 1);
        for x in 0..2 {
            for y in 0..2 {
                for ai in 0..2 {
                    for bi in 0..2 {
                        let joint = b.prob(&[ai, bi], &[x, y]);
                        let product = ma[x][ai] * mb[y][bi];
                        assert!((joint - product).abs() < 1e-10);
                    }
                }
            }
        }
    }

    fn marginal_of(b: &Behavior, party: usize) -> Vec<Vec<f64>> {
        let m = crate::scenario::marginal(b, &[party], &[0, 0]).unwrap();
        (0..2)
            .map(|x| (0..2).map(|a| m.prob(&[a], &[x])).collect())
            .collect()
    }

    #[test]
    fn behavior_from_random_models_passes_no_signaling() {
        for seed in 0..20u64 {
            let mut rng = rng_from_seed(seed);
            let s = Scenario::symmetric(2, 2, 2).unwrap();
            let dims = PartyDims::new(vec![2, 2]).unwrap();
            let m = random_model(&s, &dims, &mut rng);
            let b = behavior_from_model(&m).unwrap();
            let report = validate_behavior(&b);
            assert!(report.is_valid(), "{:?}", report.violations);
            assert!(check_no_signaling(&b) <= 1e-10);
        }
    }

    #[test]
    fn seesaw_reaches_tsirelson_for_chsh() {
        let f = canonical_functional("chsh").unwrap();
        let dims = PartyDims::new(vec![2, 2]).unwrap();
        let (v, model) = seesaw_maximize(&f, &dims, 8, 7).unwrap();
        assert!(v >= 2.828426, "see-saw reached only {v}");
        assert!(validate_assembly(&model.assembly).is_valid());
        let b = behavior_from_model(&model).unwrap();
        assert!(check_no_signaling(&b) <= 1e-10);
    }

    #[test]
    fn seesaw_reaches_mermin_maximum() {
        let f = canonical_functional("mermin").unwrap();
        let dims = PartyDims::new(vec![2, 2, 2]).unwrap();
        let (v, _) = seesaw_maximize(&f, &dims, 8, 11).unwrap();
        assert!(v >= 3.999999, "see-saw reached only {v}");
    }

    #[test]
    fn seesaw_zero_functional_returns_zero() {
        let s = Scenario::symmetric(2, 2, 2).unwrap();
        let f = BellFunctional::new(s);
        let dims = PartyDims::new(vec![2, 2]).unwrap();
        let (v, _) = seesaw_maximize(&f, &dims, 2, 1).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn seesaw_rejects_small_local_dims() {
        let f = canonical_functional("chsh").unwrap();
        let dims = PartyDims::new(vec![1, 2]).unwrap();
        assert!(matches!(
            seesaw_maximize(&f, &dims, 1, 0),
            Err(QuantumError::SeesawDims { party: 0, .. })
        ));
    }

    #[test]
    fn seesaw_with_three_outcomes_runs() {
        // d = 3 exercises the greedy eigenvector assignment path. The cells
        // reward answering input x with outcome x at three distinct input
        // pairs, so the deterministic (and quantum) optimum is 3.
        let s = Scenario::symmetric(2, 3, 3).unwrap();
        let mut f = BellFunctional::new(s.clone());
        f.add_coefficient(&[0, 0], &[0, 0], 1.0).unwrap();
        f.add_coefficient(&[1, 1], &[1, 1], 1.0).unwrap();
        f.add_coefficient(&[2, 2], &[2, 2], 1.0).unwrap();
        assert_eq!(crate::scenario::classical_bound(&f).unwrap(), 3.0);
        let dims = PartyDims::new(vec![3, 3]).unwrap();
        let (v, model) = seesaw_maximize(&f, &dims, 6, 2).unwrap();
        assert!(validate_assembly(&model.assembly).is_valid());
        assert!(v > 2.999999, "got {v}");
    }
}
