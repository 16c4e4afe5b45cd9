//! Numerical theorem pipelines: permutation residuals of projector products
//! on the state, mixed unitary/projector permutation residuals, input
//! extension through spectral decomposition, commutator audits, the
//! reduction from unitary commutation to projector commutation, first-order
//! invariance expansion, and the two-party signaling probe.
//!
//! All operations act on a `GeneralizedModel`: a state and per-(party,
//! input, outcome) operators on one common space. Tensor-product quantum
//! models embed into this form with exact algebra; GNS reconstructions
//! arrive with recorded (not assumed) algebra residuals.

use num_complex::Complex64;
use thiserror::Error;

use crate::moment::ReconstructedModel;
use crate::quantum::{QuantumError, QuantumModel};
use crate::random::rng_from_seed;
use crate::scenario::{multi_indices, Scenario};
use crate::symmetry::{spectral_decompose, SymmetryAction, SymmetryError, SymmetryGenerator};
use crate::tensor::{
    embed_local, hermitian_eig, one_param_unitary, vec_inner, vec_norm, ComplexMatrix, PartyDims,
    TensorError,
};
use rand::Rng;

#[derive(Debug, Error)]
pub enum TheoremError {
    #[error("party sets overlap: {0:?} and {1:?}")]
    OverlappingSets(Vec<usize>, Vec<usize>),
    #[error("party index {0} out of range")]
    BadParty(usize),
    #[error("state norm {0} is not 1 within 1e-9")]
    BadState(f64),
    #[error("operator shapes do not match the model dimension")]
    BadShape,
    #[error("matrix for party {party} is not unitary: deviation {deviation:.3e}")]
    NotUnitary { party: usize, deviation: f64 },
    #[error("{got} sample angles cannot resolve {need} commutator unknowns")]
    UnderDetermined { got: usize, need: usize },
    #[error("phase-coefficient system is ill-conditioned: condition number {0:.3e}")]
    IllConditioned(f64),
    #[error(
        "generalized model has no tensor structure; the action must carry full-space generators"
    )]
    NeedsFullSpaceGenerator,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
}

/// Permutation of the party labels 0..n-1 (Cauchy two-line convention,
/// stored as the image row).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Option<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &im in &images {
            if im >= n || seen[im] {
                return None;
            }
            seen[im] = true;
        }
        Some(Self { images })
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }
}

/// Every ordering of 0..n-1 for n <= 5; beyond that, 100 seeded samples
/// (the factorial blowup is past the 2-3 party scales this targets).
pub fn party_orderings(n: usize, seed: u64) -> Vec<Vec<usize>> {
    if n <= 5 {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..n).collect();
        heap_permutations(&mut cur, n, &mut out);
        out
    } else {
        let mut rng = rng_from_seed(seed);
        let mut out = Vec::with_capacity(100);
        for _ in 0..100 {
            let mut cur: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                cur.swap(i, j);
            }
            out.push(cur);
        }
        out
    }
}

fn heap_permutations(cur: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(cur.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(cur, k - 1, out);
        if k.is_multiple_of(2) {
            cur.swap(i, k - 1);
        } else {
            cur.swap(0, k - 1);
        }
    }
}

/// Recorded residuals of the projector algebra, measured at construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlgebraResiduals {
    pub hermiticity: f64,
    pub idempotence: f64,
    pub orthogonality: f64,
    pub completeness: f64,
}

/// A state and full-space operators per (party, input, outcome), not
/// necessarily tensor-factored.
#[derive(Debug, Clone)]
pub struct GeneralizedModel {
    pub scenario: Scenario,
    pub dim: usize,
    pub state: Vec<Complex64>,
    pub operators: Vec<Vec<Vec<ComplexMatrix>>>,
    /// Tensor factorization, when the model came from a quantum model.
    pub dims: Option<PartyDims>,
    pub residuals: AlgebraResiduals,
}

impl GeneralizedModel {
    pub fn new(
        scenario: Scenario,
        dim: usize,
        state: Vec<Complex64>,
        operators: Vec<Vec<Vec<ComplexMatrix>>>,
        dims: Option<PartyDims>,
    ) -> Result<Self, TheoremError> {
        let norm = vec_norm(&state);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(TheoremError::BadState(norm));
        }
        if state.len() != dim || operators.len() != scenario.parties() {
            return Err(TheoremError::BadShape);
        }
        for (p, per_input) in operators.iter().enumerate() {
            if per_input.len() != scenario.inputs()[p] {
                return Err(TheoremError::BadShape);
            }
            for per_outcome in per_input {
                if per_outcome.len() != scenario.outputs()[p]
                    || per_outcome.iter().any(|e| e.rows != dim || e.cols != dim)
                {
                    return Err(TheoremError::BadShape);
                }
            }
        }
        let mut model = Self {
            scenario,
            dim,
            state,
            operators,
            dims,
            residuals: AlgebraResiduals::default(),
        };
        model.residuals = model.measure_residuals();
        Ok(model)
    }

    /// Embed a tensor-product quantum model (exact algebra).
    pub fn from_quantum(m: &QuantumModel) -> Result<Self, TheoremError> {
        let dims = m.state.dims.clone();
        let dim = dims.total();
        let mut operators = Vec::with_capacity(m.scenario().parties());
        for p in 0..m.scenario().parties() {
            let mut per_input = Vec::new();
            for x in 0..m.scenario().inputs()[p] {
                let mut per_outcome = Vec::new();
                for a in 0..m.scenario().outputs()[p] {
                    per_outcome.push(embed_local(m.assembly.projector(p, x, a), p, &dims)?);
                }
                per_input.push(per_outcome);
            }
            operators.push(per_input);
        }
        Self::new(
            m.scenario().clone(),
            dim,
            m.state.amplitudes.clone(),
            operators,
            Some(dims),
        )
    }

    /// Wrap a GNS reconstruction.
    pub fn from_reconstruction(rec: &ReconstructedModel) -> Result<Self, TheoremError> {
        let mut state = rec.state.clone();
        let norm = vec_norm(&state);
        for z in state.iter_mut() {
            *z /= norm;
        }
        Self::new(
            rec.scenario.clone(),
            rec.dim,
            state,
            rec.operators.clone(),
            None,
        )
    }

    pub fn operator(&self, party: usize, input: usize, outcome: usize) -> &ComplexMatrix {
        &self.operators[party][input][outcome]
    }

    fn measure_residuals(&self) -> AlgebraResiduals {
        let mut r = AlgebraResiduals::default();
        let id = ComplexMatrix::identity(self.dim);
        for p in 0..self.scenario.parties() {
            for x in 0..self.scenario.inputs()[p] {
                let set = &self.operators[p][x];
                let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
                for (o, e) in set.iter().enumerate() {
                    r.hermiticity = r.hermiticity.max(e.hermiticity_deviation());
                    r.idempotence = r.idempotence.max(e.mul(e).max_abs_diff(e));
                    for e2 in set.iter().skip(o + 1) {
                        r.orthogonality = r.orthogonality.max(e.mul(e2).max_abs());
                    }
                    sum = sum.add(e);
                }
                r.completeness = r.completeness.max(sum.max_abs_diff(&id));
            }
        }
        r
    }

    /// Full-space unitary for one party of an action: local generators are
    /// embedded through the tensor structure, full-space generators are used
    /// as-is; parties absent from the action give the identity.
    pub fn party_unitary(
        &self,
        action: &SymmetryAction,
        party: usize,
    ) -> Result<ComplexMatrix, TheoremError> {
        if party >= self.scenario.parties() {
            return Err(TheoremError::BadParty(party));
        }
        match action.entry(party) {
            None => Ok(ComplexMatrix::identity(self.dim)),
            Some((theta, g)) => {
                if g.matrix.rows == self.dim {
                    Ok(one_param_unitary(&g.matrix, *theta)?)
                } else if let Some(dims) = &self.dims {
                    let local = one_param_unitary(&g.matrix, *theta)?;
                    Ok(embed_local(&local, party, dims)?)
                } else {
                    Err(TheoremError::NeedsFullSpaceGenerator)
                }
            }
        }
    }
}

/// Build a unitary out of a party's own projector family:
/// U = exp(-i M) with `M = sum_a phases[a] E^{a,input}` (Hermitized). In exact
/// quantum models this is exactly `sum_a e^{-i phases[a]} E^a`; for GNS models
/// it stays exactly unitary while being generated by the party's operators.
pub fn projector_phase_unitary(
    m: &GeneralizedModel,
    party: usize,
    input: usize,
    phases: &[f64],
) -> Result<ComplexMatrix, TheoremError> {
    let mut gen = ComplexMatrix::zeros(m.dim, m.dim);
    for (a, &phi) in phases.iter().enumerate() {
        gen = gen.add(&m.operator(party, input, a).scale(Complex64::new(phi, 0.0)));
    }
    let herm = gen.hermitian_part(f64::INFINITY)?;
    Ok(one_param_unitary(&herm, 1.0)?)
}

fn apply_ordered_product(
    m: &GeneralizedModel,
    order: &[usize],
    matrices: &[ComplexMatrix],
) -> Vec<Complex64> {
    // Product M_{order[0]} M_{order[1]} ... applied to the state; computed
    // as a full matrix product so that commuting embedded factors cancel
    // exactly rather than to rounding.
    let mut prod: Option<ComplexMatrix> = None;
    for &slot in order {
        prod = Some(match prod {
            None => matrices[slot].clone(),
            Some(p) => p.mul(&matrices[slot]),
        });
    }
    match prod {
        None => m.state.clone(),
        Some(p) => p.matvec(&m.state),
    }
}

/// Max over party orderings of |(prod E - pi(prod E)) psi| for one cell.
pub fn permutation_residual(
    m: &GeneralizedModel,
    inputs: &[usize],
    outcomes: &[usize],
) -> Result<f64, TheoremError> {
    let n = m.scenario.parties();
    if inputs.len() != n || outcomes.len() != n {
        return Err(TheoremError::BadShape);
    }
    let matrices: Vec<ComplexMatrix> = (0..n)
        .map(|p| m.operator(p, inputs[p], outcomes[p]).clone())
        .collect();
    let identity_order: Vec<usize> = (0..n).collect();
    let reference = apply_ordered_product(m, &identity_order, &matrices);
    let mut worst = 0.0f64;
    for order in party_orderings(n, 0x9e3779b9) {
        if order == identity_order {
            continue;
        }
        let v = apply_ordered_product(m, &order, &matrices);
        let diff: f64 = v
            .iter()
            .zip(reference.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff);
    }
    Ok(worst)
}

/// Max permutation residual over every (input, outcome) cell.
pub fn permutation_residual_max(m: &GeneralizedModel) -> Result<f64, TheoremError> {
    let mut worst = 0.0f64;
    for x in m.scenario.input_tuples() {
        for a in m.scenario.outcome_tuples() {
            worst = worst.max(permutation_residual(m, &x, &a)?);
        }
    }
    Ok(worst)
}

/// Mixed unitary/projector permutation residual: parties in `set_i`
/// contribute their action unitaries, parties in `set_j` contribute
/// projectors (maximized over that party's inputs and outcomes), and the
/// residual is the worst interleaving difference on the state.
pub fn mixed_permutation_residual(
    m: &GeneralizedModel,
    action: &SymmetryAction,
    set_i: &[usize],
    set_j: &[usize],
) -> Result<f64, TheoremError> {
    if set_i.iter().any(|p| set_j.contains(p)) {
        return Err(TheoremError::OverlappingSets(
            set_i.to_vec(),
            set_j.to_vec(),
        ));
    }
    for &p in set_i.iter().chain(set_j.iter()) {
        if p >= m.scenario.parties() {
            return Err(TheoremError::BadParty(p));
        }
    }
    let unitaries: Vec<(usize, ComplexMatrix)> = set_i
        .iter()
        .map(|&p| Ok((p, m.party_unitary(action, p)?)))
        .collect::<Result<_, TheoremError>>()?;
    // All (input, outcome) choices for the projector parties.
    let j_inputs: Vec<usize> = set_j.iter().map(|&p| m.scenario.inputs()[p]).collect();
    let j_outputs: Vec<usize> = set_j.iter().map(|&p| m.scenario.outputs()[p]).collect();
    let mut worst = 0.0f64;
    for xs in multi_indices(&j_inputs) {
        for aa in multi_indices(&j_outputs) {
            let mut matrices: Vec<ComplexMatrix> = Vec::new();
            for (_, u) in &unitaries {
                matrices.push(u.clone());
            }
            for (slot, &p) in set_j.iter().enumerate() {
                matrices.push(m.operator(p, xs[slot], aa[slot]).clone());
            }
            let k = matrices.len();
            let base: Vec<usize> = (0..k).collect();
            let reference = apply_ordered_product(m, &base, &matrices);
            for order in party_orderings(k, 0x51u64) {
                if order == base {
                    continue;
                }
                let v = apply_ordered_product(m, &order, &matrices);
                let diff: f64 = v
                    .iter()
                    .zip(reference.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(diff);
            }
        }
    }
    Ok(worst)
}

/// Residuals found when extending the input sets by spectral projectors of
/// the action's unitaries.
#[derive(Debug, Clone)]
pub struct ExtendInputsReport {
    /// (party, number of spectral outcomes) for each extended party.
    pub new_inputs: Vec<(usize, usize)>,
    /// Worst permutation residual over tuples using at least one new input.
    pub max_residual: f64,
    /// Degenerate spectra collapse outcomes; counts below the party's
    /// output cardinality are reported here.
    pub degenerate_parties: Vec<usize>,
}

/// Theorem-2 construction: spectrally decompose each acting party's unitary,
/// harvest the eigenprojectors as a new measurement input for that party,
/// and measure the permutation residuals of the extended input set.
pub fn extend_inputs(
    m: &GeneralizedModel,
    action: &SymmetryAction,
) -> Result<ExtendInputsReport, TheoremError> {
    let n = m.scenario.parties();
    // Extended operator table: original inputs plus one spectral input per
    // acting party.
    let mut table: Vec<Vec<Vec<ComplexMatrix>>> = m.operators.clone();
    let mut new_inputs = Vec::new();
    let mut degenerate = Vec::new();
    for party in action.parties() {
        if party >= n {
            return Err(TheoremError::BadParty(party));
        }
        let u = m.party_unitary(action, party)?;
        let terms = spectral_decompose(&u)?;
        let count = terms.len();
        if count < m.scenario.outputs()[party] {
            degenerate.push(party);
        }
        table[party].push(terms.into_iter().map(|t| t.projector).collect());
        new_inputs.push((party, count));
    }
    // Residuals over all tuples that touch at least one new input.
    let input_counts: Vec<usize> = table.iter().map(|per| per.len()).collect();
    let mut worst = 0.0f64;
    for xs in multi_indices(&input_counts) {
        let touches_new = xs
            .iter()
            .enumerate()
            .any(|(p, &x)| x >= m.scenario.inputs()[p]);
        if !touches_new {
            continue;
        }
        let outcome_counts: Vec<usize> = (0..n).map(|p| table[p][xs[p]].len()).collect();
        for aa in multi_indices(&outcome_counts) {
            let matrices: Vec<ComplexMatrix> =
                (0..n).map(|p| table[p][xs[p]][aa[p]].clone()).collect();
            let base: Vec<usize> = (0..n).collect();
            let reference = apply_ordered_product(m, &base, &matrices);
            for order in party_orderings(n, 0x7eeb) {
                if order == base {
                    continue;
                }
                let v = apply_ordered_product(m, &order, &matrices);
                let diff: f64 = v
                    .iter()
                    .zip(reference.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(diff);
            }
        }
    }
    Ok(ExtendInputsReport {
        new_inputs,
        max_residual: worst,
        degenerate_parties: degenerate,
    })
}

/// Max operator-norm commutator |[E_i, E_j]| over distinct parties, inputs
/// and outcomes. Zero (exactly, for tensor models) identifies standard
/// quantum kinematics.
pub fn commutator_audit(m: &GeneralizedModel) -> f64 {
    let n = m.scenario.parties();
    let mut worst = 0.0f64;
    for p in 0..n {
        for q in (p + 1)..n {
            for xp in 0..m.scenario.inputs()[p] {
                for xq in 0..m.scenario.inputs()[q] {
                    for ap in 0..m.scenario.outputs()[p] {
                        for aq in 0..m.scenario.outputs()[q] {
                            let comm = m.operator(p, xp, ap).commutator(m.operator(q, xq, aq));
                            worst = worst.max(comm.spectral_norm());
                        }
                    }
                }
            }
        }
    }
    worst
}

/// Round every operator to a diagonal 0/1 matrix in one common eigenbasis
/// (each basis vector goes to the outcome with the largest diagonal weight),
/// producing an exactly commuting model with generally changed behavior.
pub fn commuting_round(m: &GeneralizedModel) -> Result<GeneralizedModel, TheoremError> {
    // Reference basis: eigenbasis of a weighted sum of all operators.
    let mut h = ComplexMatrix::zeros(m.dim, m.dim);
    let mut w = 1.0;
    for per_input in &m.operators {
        for per_outcome in per_input {
            for e in per_outcome {
                h = h.add(&e.scale(Complex64::new(w, 0.0)));
                w *= 0.61803398875;
            }
        }
    }
    let (_, basis) = hermitian_eig(&h.hermitian_part(f64::INFINITY)?)?;
    let mut operators = m.operators.clone();
    for p in 0..m.scenario.parties() {
        for x in 0..m.scenario.inputs()[p] {
            let d = m.scenario.outputs()[p];
            // Pick, per basis vector, the dominant outcome.
            let mut assign = vec![0usize; m.dim];
            for k in 0..m.dim {
                let col: Vec<Complex64> = (0..m.dim).map(|r| basis.get(r, k)).collect();
                let mut best = f64::NEG_INFINITY;
                for a in 0..d {
                    let ev = m.operator(p, x, a).matvec(&col);
                    let weight = vec_inner(&col, &ev).re;
                    if weight > best {
                        best = weight;
                        assign[k] = a;
                    }
                }
            }
            for a in 0..d {
                let mut e = ComplexMatrix::zeros(m.dim, m.dim);
                for k in 0..m.dim {
                    if assign[k] == a {
                        let col: Vec<Complex64> = (0..m.dim).map(|r| basis.get(r, k)).collect();
                        for r in 0..m.dim {
                            for c in 0..m.dim {
                                let add = col[r] * col[c].conj();
                                let cur = e.get(r, c);
                                e.set(r, c, cur + add);
                            }
                        }
                    }
                }
                operators[p][x][a] = e;
            }
        }
    }
    GeneralizedModel::new(
        m.scenario.clone(),
        m.dim,
        m.state.clone(),
        operators,
        m.dims.clone(),
    )
}

/// Inferred pairwise projector commutator norms from sampled unitary
/// commutators, per the expansion
/// [U_i(s), U_j(t)] = sum_{a,b} c_a(s) c_b(t) [E_i^a, E_j^b]
/// with c_a(theta) = exp(-i a theta).
#[derive(Debug, Clone)]
pub struct CommutationReduction {
    /// (party_i, party_j, input_i, input_j) -> inferred |[E^a, E^b]| grid.
    pub pairs: Vec<ReducedPair>,
    pub max_inferred: f64,
    pub condition_number: f64,
}

#[derive(Debug, Clone)]
pub struct ReducedPair {
    pub parties: (usize, usize),
    pub inputs: (usize, usize),
    /// `inferred[a][b]` = operator norm of the inferred `[E_i^a, E_j^b]`.
    pub inferred: Vec<Vec<f64>>,
}

pub fn unitary_commutation_reduction(
    m: &GeneralizedModel,
    thetas: &[f64],
) -> Result<CommutationReduction, TheoremError> {
    let n = m.scenario.parties();
    let mut pairs = Vec::new();
    let mut max_inferred = 0.0f64;
    let mut worst_cond = 1.0f64;
    for pi in 0..n {
        for pj in (pi + 1)..n {
            let di = m.scenario.outputs()[pi];
            let dj = m.scenario.outputs()[pj];
            let need = di * dj;
            let got = thetas.len() * thetas.len();
            if got < need || thetas.len() < di.max(dj) {
                return Err(TheoremError::UnderDetermined { got, need });
            }
            for xi in 0..m.scenario.inputs()[pi] {
                for xj in 0..m.scenario.inputs()[pj] {
                    let (grid, cond) = reduce_pair(m, (pi, xi, di), (pj, xj, dj), thetas)?;
                    worst_cond = worst_cond.max(cond);
                    for row in &grid {
                        for &v in row {
                            max_inferred = max_inferred.max(v);
                        }
                    }
                    pairs.push(ReducedPair {
                        parties: (pi, pj),
                        inputs: (xi, xj),
                        inferred: grid,
                    });
                }
            }
        }
    }
    Ok(CommutationReduction {
        pairs,
        max_inferred,
        condition_number: worst_cond,
    })
}

fn reduce_pair(
    m: &GeneralizedModel,
    (pi, xi, di): (usize, usize, usize),
    (pj, xj, dj): (usize, usize, usize),
    thetas: &[f64],
) -> Result<(Vec<Vec<f64>>, f64), TheoremError> {
    let s = thetas.len();
    let dim = m.dim;
    // U(theta) = sum_a e^{-i a theta} E^a from the party's own projectors.
    let unitary = |party: usize, input: usize, d: usize, theta: f64| -> ComplexMatrix {
        let mut u = ComplexMatrix::zeros(dim, dim);
        for a in 0..d {
            let phase = Complex64::from_polar(1.0, -(a as f64) * theta);
            u = u.add(&m.operator(party, input, a).scale(phase));
        }
        u
    };
    // Measured commutators on the angle grid.
    let mut measured: Vec<ComplexMatrix> = Vec::with_capacity(s * s);
    for &ti in thetas {
        let ui = unitary(pi, xi, di, ti);
        for &tj in thetas {
            let uj = unitary(pj, xj, dj, tj);
            measured.push(ui.commutator(&uj));
        }
    }
    // Coefficient matrix K[(s,t)][(a,b)] = e^{-i a theta_s} e^{-i b theta_t}.
    let rows = s * s;
    let cols = di * dj;
    let mut k = ComplexMatrix::zeros(rows, cols);
    for (si, &ti) in thetas.iter().enumerate() {
        for (tj, &tjv) in thetas.iter().enumerate() {
            let row = si * s + tj;
            for a in 0..di {
                for b in 0..dj {
                    let c = Complex64::from_polar(1.0, -(a as f64) * ti)
                        * Complex64::from_polar(1.0, -(b as f64) * tjv);
                    k.set(row, a * dj + b, c);
                }
            }
        }
    }
    // Least squares through the normal equations K^dag K X = K^dag M.
    let ktk = k.dagger().mul(&k);
    let (w, q) = hermitian_eig(&ktk.hermitian_part(1e-8)?)?;
    let lam_max = w.last().copied().unwrap_or(0.0);
    let lam_min = w.first().copied().unwrap_or(0.0);
    let cond = if lam_min <= 0.0 {
        f64::INFINITY
    } else {
        (lam_max / lam_min).sqrt()
    };
    if cond >= 1e8 || cond.is_nan() {
        return Err(TheoremError::IllConditioned(cond));
    }
    // pinv(K^dag K) = Q diag(1/w) Q^dag.
    let mut pinv = ComplexMatrix::zeros(cols, cols);
    for t in 0..cols {
        let inv = 1.0 / w[t];
        for r in 0..cols {
            for c in 0..cols {
                let add = q.get(r, t) * q.get(c, t).conj() * inv;
                let cur = pinv.get(r, c);
                pinv.set(r, c, cur + add);
            }
        }
    }
    // For every matrix entry (u,v) solve for the cols unknowns at once.
    let mut unknown_entries: Vec<Vec<Complex64>> =
        vec![vec![Complex64::new(0.0, 0.0); dim * dim]; cols];
    for uvi in 0..dim * dim {
        // rhs_k = K^dag m over rows.
        let mut rhs = vec![Complex64::new(0.0, 0.0); cols];
        for row in 0..rows {
            let mv = measured[row].data[uvi];
            if mv == Complex64::new(0.0, 0.0) {
                continue;
            }
            for cidx in 0..cols {
                rhs[cidx] += k.get(row, cidx).conj() * mv;
            }
        }
        for cidx in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..cols {
                acc += pinv.get(cidx, t) * rhs[t];
            }
            unknown_entries[cidx][uvi] = acc;
        }
    }
    let mut grid = vec![vec![0.0f64; dj]; di];
    for a in 0..di {
        for b in 0..dj {
            let mat = ComplexMatrix {
                rows: dim,
                cols: dim,
                data: unknown_entries[a * dj + b].clone(),
            };
            grid[a][b] = mat.spectral_norm();
        }
    }
    Ok((grid, cond))
}

/// Directly computed pairwise commutator norms on the same (input, input)
/// grid, the oracle against which the reduction is checked.
pub fn direct_commutator_grid(
    m: &GeneralizedModel,
    parties: (usize, usize),
    inputs: (usize, usize),
) -> Vec<Vec<f64>> {
    let (pi, pj) = parties;
    let (xi, xj) = inputs;
    let di = m.scenario.outputs()[pi];
    let dj = m.scenario.outputs()[pj];
    let mut grid = vec![vec![0.0f64; dj]; di];
    for a in 0..di {
        for b in 0..dj {
            grid[a][b] = m
                .operator(pi, xi, a)
                .commutator(m.operator(pj, xj, b))
                .spectral_norm();
        }
    }
    grid
}

/// First-order expansion report for a single-party action.
#[derive(Debug, Clone)]
pub struct FirstOrderReport {
    /// The four-term first-order combination; cancels (<= 1e-8) for
    /// commuting models.
    pub four_term: f64,
    /// (theta, |P(theta) - P|) under the truncated transformation
    /// U = 1 - i theta M.
    pub residuals: Vec<(f64, f64)>,
    /// Log-log slope of the residuals; ~2 when first-order terms cancel.
    pub slope: f64,
}

pub fn first_order_check(
    m: &GeneralizedModel,
    generator: &SymmetryGenerator,
    inputs: &[usize],
    outcomes: &[usize],
) -> Result<FirstOrderReport, TheoremError> {
    let n = m.scenario.parties();
    let party = generator.party;
    if party >= n {
        return Err(TheoremError::BadParty(party));
    }
    let gen_full = if generator.matrix.rows == m.dim {
        generator.matrix.clone()
    } else if let Some(dims) = &m.dims {
        embed_local(&generator.matrix, party, dims)?
    } else {
        return Err(TheoremError::NeedsFullSpaceGenerator);
    };
    let matrices: Vec<ComplexMatrix> = (0..n)
        .map(|p| m.operator(p, inputs[p], outcomes[p]).clone())
        .collect();

    // Four first-order terms; the permutation instances place M against the
    // reversed product and inside the ascending product.
    let prod_asc = {
        let order: Vec<usize> = (0..n).collect();
        product_of(&matrices, &order)
    };
    let prod_desc = {
        let order: Vec<usize> = (0..n).rev().collect();
        product_of(&matrices, &order)
    };
    let others_then_p = {
        let mut order: Vec<usize> = (0..n).filter(|&p| p != party).collect();
        order.push(party);
        product_of(&matrices, &order)
    };
    let mut others_m_p = ComplexMatrix::identity(m.dim);
    for p in (0..n).filter(|&p| p != party) {
        others_m_p = others_m_p.mul(&matrices[p]);
    }
    let t1 = expectation(&m.state, &gen_full.mul(&prod_desc));
    let t2 = expectation(&m.state, &others_m_p.mul(&gen_full).mul(&matrices[party]));
    let t3 = expectation(&m.state, &others_then_p.mul(&gen_full));
    let t4 = expectation(&m.state, &prod_desc.mul(&gen_full));
    let four_term = (t1 - t2 + t3 - t4).norm();

    // Truncated-transformation residuals r(theta).
    let p0 = expectation(&m.state, &prod_asc).re;
    let id = ComplexMatrix::identity(m.dim);
    let mut residuals = Vec::new();
    for &theta in &[1e-2, 1e-3, 1e-4] {
        let u = id.sub(&gen_full.scale(Complex64::new(0.0, theta)));
        let udag = u.dagger();
        let mut mats = matrices.clone();
        mats[party] = u.mul(&matrices[party]).mul(&udag);
        let order: Vec<usize> = (0..n).collect();
        let middle = product_of(&mats, &order);
        let op = udag.mul(&middle).mul(&u);
        let p_theta = expectation(&m.state, &op).re;
        residuals.push((theta, (p_theta - p0).abs()));
    }
    // Least-squares slope in log-log coordinates.
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .filter(|(_, r)| *r > 1e-300)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        num / den
    } else {
        // All residuals at rounding level: treat as perfectly second order.
        2.0
    };
    Ok(FirstOrderReport {
        four_term,
        residuals,
        slope,
    })
}

fn product_of(matrices: &[ComplexMatrix], order: &[usize]) -> ComplexMatrix {
    let mut prod: Option<ComplexMatrix> = None;
    for &i in order {
        prod = Some(match prod {
            None => matrices[i].clone(),
            Some(p) => p.mul(&matrices[i]),
        });
    }
    prod.expect("nonempty order")
}

fn expectation(state: &[Complex64], op: &ComplexMatrix) -> Complex64 {
    vec_inner(state, &op.matvec(state))
}

/// Remark-2 sandwich probe: compare party-j outcome statistics on U_j |psi>
/// against U_i U_j U_i^dag |psi>; the result is the maximum over party-j
/// inputs of the total-variation distance. Zero for tensor models.
pub fn signaling_probe(
    m: &GeneralizedModel,
    party_i: usize,
    u_i: &ComplexMatrix,
    party_j: usize,
    u_j: &ComplexMatrix,
) -> Result<f64, TheoremError> {
    if party_i == party_j {
        return Err(TheoremError::OverlappingSets(vec![party_i], vec![party_j]));
    }
    for (party, u) in [(party_i, u_i), (party_j, u_j)] {
        if party >= m.scenario.parties() {
            return Err(TheoremError::BadParty(party));
        }
        let dev = u.unitarity_deviation();
        if dev > 1e-8 {
            return Err(TheoremError::NotUnitary {
                party,
                deviation: dev,
            });
        }
        if u.rows != m.dim {
            return Err(TheoremError::BadShape);
        }
    }
    let phi1 = u_j.matvec(&m.state);
    let phi2 = u_i.matvec(&u_j.matvec(&u_i.dagger().matvec(&m.state)));
    let mut worst = 0.0f64;
    for x in 0..m.scenario.inputs()[party_j] {
        let d = m.scenario.outputs()[party_j];
        let mut tv = 0.0;
        for a in 0..d {
            let e = m.operator(party_j, x, a);
            let p = stat(&phi1, e);
            let q = stat(&phi2, e);
            tv += (p - q).abs();
        }
        worst = worst.max(0.5 * tv);
    }
    Ok(worst)
}

fn stat(phi: &[Complex64], e: &ComplexMatrix) -> f64 {
    let norm2: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    vec_inner(phi, &e.matvec(phi)).re / norm2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{chsh_optimal_model, ghz_mermin_model, random_model};
    use crate::random::{random_hermitian, random_state, rng_from_seed};
    use crate::tensor::PartyDims;

    fn chsh_generalized() -> GeneralizedModel {
        GeneralizedModel::from_quantum(&chsh_optimal_model()).unwrap()
    }

    #[test]
    fn orderings_enumerate_small_factorials() {
        assert_eq!(party_orderings(2, 0).len(), 2);
        assert_eq!(party_orderings(3, 0).len(), 6);
        assert_eq!(party_orderings(5, 0).len(), 120);
        assert_eq!(party_orderings(6, 0).len(), 100);
    }

    #[test]
    fn permutation_invalid_images_rejected() {
        assert!(Permutation::from_images(vec![0, 0]).is_none());
        assert!(Permutation::from_images(vec![0, 2]).is_none());
        assert!(Permutation::from_images(vec![1, 0, 2]).is_some());
    }

    #[test]
    fn tensor_models_have_exactly_zero_permutation_residual() {
        // Two parties: exact for any model (each product entry is the same
        // single rounded multiplication in either order).
        let g = chsh_generalized();
        assert_eq!(permutation_residual_max(&g).unwrap(), 0.0);
        // Random two-party models.
        for seed in 0..5u64 {
            let mut rng = rng_from_seed(seed);
            let s = Scenario::symmetric(2, 2, 2).unwrap();
            let dims = PartyDims::new(vec![2, 2]).unwrap();
            let m = random_model(&s, &dims, &mut rng);
            let g = GeneralizedModel::from_quantum(&m).unwrap();
            assert_eq!(permutation_residual_max(&g).unwrap(), 0.0, "seed {seed}");
        }
        // Three parties with dyadic projector entries (GHZ fixture).
        let g3 = GeneralizedModel::from_quantum(&ghz_mermin_model()).unwrap();
        assert_eq!(permutation_residual_max(&g3).unwrap(), 0.0);
    }

    #[test]
    fn random_three_party_residual_is_rounding_level() {
        let mut rng = rng_from_seed(3);
        let s = Scenario::symmetric(3, 2, 2).unwrap();
        let dims = PartyDims::new(vec![2, 2, 2]).unwrap();
        let m = random_model(&s, &dims, &mut rng);
        let g = GeneralizedModel::from_quantum(&m).unwrap();
        assert!(permutation_residual_max(&g).unwrap() <= 1e-14);
    }

    #[test]
    fn noncommuting_operators_have_positive_residual() {
        // Two parties sharing one qubit: z-basis vs x-basis projectors.
        let s = Scenario::new(vec![1, 1], vec![2, 2]).unwrap();
        let z0 = ComplexMatrix::from_real(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        let z1 = ComplexMatrix::from_real(vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
        let x0 = ComplexMatrix::from_real(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let x1 = ComplexMatrix::from_real(vec![vec![0.5, -0.5], vec![-0.5, 0.5]]);
        let state = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let m = GeneralizedModel::new(
            s,
            2,
            state,
            vec![vec![vec![z0, z1]], vec![vec![x0, x1]]],
            None,
        )
        .unwrap();
        let r = permutation_residual(&m, &[0, 0], &[0, 0]).unwrap();
        assert!(r > 0.01, "residual {r}");
        assert!(commutator_audit(&m) > 0.1);
    }

    #[test]
    fn mixed_residual_vanishes_for_tensor_models() {
        let g = chsh_generalized();
        let mut rng = rng_from_seed(17);
        let action = SymmetryAction::new()
            .with(
                0.8,
                SymmetryGenerator::generic(0, "a", random_hermitian(2, &mut rng)).unwrap(),
            )
            .with(
                -1.2,
                SymmetryGenerator::generic(1, "b", random_hermitian(2, &mut rng)).unwrap(),
            );
        for (set_i, set_j) in [
            (vec![0usize], vec![1usize]),
            (vec![1], vec![0]),
            (vec![0, 1], vec![]),
            (vec![], vec![0, 1]),
        ] {
            let r = mixed_permutation_residual(&g, &action, &set_i, &set_j).unwrap();
            assert!(r <= 1e-10, "sets {set_i:?}/{set_j:?}: {r:.3e}");
        }
    }

    #[test]
    fn mixed_residual_rejects_overlap() {
        let g = chsh_generalized();
        let action = SymmetryAction::new();
        assert!(matches!(
            mixed_permutation_residual(&g, &action, &[0], &[0]),
            Err(TheoremError::OverlappingSets(..))
        ));
    }

    #[test]
    fn extend_inputs_quantum_residuals_small() {
        let g = chsh_generalized();
        let mut rng = rng_from_seed(23);
        let action = SymmetryAction::new()
            .with(
                0.9,
                SymmetryGenerator::rotation(0, [0.2, -0.7, 0.4], 2).unwrap(),
            )
            .with(
                1.7,
                SymmetryGenerator::generic(1, "g", random_hermitian(2, &mut rng)).unwrap(),
            );
        let report = extend_inputs(&g, &action).unwrap();
        assert_eq!(report.new_inputs.len(), 2);
        assert!(report.max_residual <= 1e-9, "{:.3e}", report.max_residual);
    }

    #[test]
    fn extend_inputs_identity_action_gives_trivial_projector() {
        let g = chsh_generalized();
        let action = SymmetryAction::new().with(
            0.0,
            SymmetryGenerator::rotation(0, [0.0, 0.0, 1.0], 2).unwrap(),
        );
        let report = extend_inputs(&g, &action).unwrap();
        // exp(0) = identity: a single spectral outcome, and the residuals
        // stay at zero.
        assert_eq!(report.new_inputs, vec![(0, 1)]);
        assert!(report.degenerate_parties.contains(&0));
        assert!(report.max_residual <= 1e-12);
    }

    #[test]
    fn commutator_audit_zero_for_tensor_and_positive_after_overlap() {
        let g = chsh_generalized();
        assert_eq!(commutator_audit(&g), 0.0);
        let g3 = GeneralizedModel::from_quantum(&ghz_mermin_model()).unwrap();
        assert_eq!(commutator_audit(&g3), 0.0);
    }

    #[test]
    fn commuting_round_repairs_audit_and_changes_behavior() {
        let s = Scenario::new(vec![1, 1], vec![2, 2]).unwrap();
        let z0 = ComplexMatrix::from_real(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        let z1 = ComplexMatrix::from_real(vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
        let x0 = ComplexMatrix::from_real(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let x1 = ComplexMatrix::from_real(vec![vec![0.5, -0.5], vec![-0.5, 0.5]]);
        let state = random_state(2, &mut rng_from_seed(4));
        let m = GeneralizedModel::new(
            s,
            2,
            state,
            vec![vec![vec![z0, z1]], vec![vec![x0, x1]]],
            None,
        )
        .unwrap();
        assert!(commutator_audit(&m) > 0.1);
        let before = stat(&m.state, m.operator(1, 0, 0));
        let fixed = commuting_round(&m).unwrap();
        assert!(commutator_audit(&fixed) <= 1e-9);
        assert!(fixed.residuals.idempotence <= 1e-9);
        assert!(fixed.residuals.completeness <= 1e-9);
        let after = stat(&fixed.state, fixed.operator(1, 0, 0));
        assert!((before - after).abs() > 1e-3, "behavior should change");
    }

    #[test]
    fn reduction_infers_zero_for_commuting_models() {
        let g = chsh_generalized();
        let thetas = [0.4, 1.1, 2.6];
        let red = unitary_commutation_reduction(&g, &thetas).unwrap();
        assert!(red.max_inferred <= 1e-8, "max {:.3e}", red.max_inferred);
    }

    #[test]
    fn reduction_matches_direct_commutators() {
        // Non-tensor model with genuinely noncommuting parties.
        let s = Scenario::new(vec![1, 1], vec![2, 2]).unwrap();
        let mut rng = rng_from_seed(8);
        let dim = 4;
        let mk_pair = |rng: &mut rand_chacha::ChaCha8Rng| {
            let h = random_hermitian(dim, rng);
            let (_, v) = hermitian_eig(&h).unwrap();
            // Rank-2 projector from two eigenvector columns.
            let mut e = ComplexMatrix::zeros(dim, dim);
            for k in 0..2 {
                for r in 0..dim {
                    for c in 0..dim {
                        let add = v.get(r, k) * v.get(c, k).conj();
                        let cur = e.get(r, c);
                        e.set(r, c, cur + add);
                    }
                }
            }
            let comp = ComplexMatrix::identity(dim).sub(&e);
            (e, comp)
        };
        let (a0, a1) = mk_pair(&mut rng);
        let (b0, b1) = mk_pair(&mut rng);
        let state = random_state(dim, &mut rng);
        let m = GeneralizedModel::new(
            s,
            dim,
            state,
            vec![vec![vec![a0, a1]], vec![vec![b0, b1]]],
            None,
        )
        .unwrap();
        let thetas = [0.3, 1.0, 2.2];
        let red = unitary_commutation_reduction(&m, &thetas).unwrap();
        assert!(red.condition_number < 1e4);
        for pair in &red.pairs {
            let direct = direct_commutator_grid(&m, pair.parties, pair.inputs);
            for a in 0..2 {
                for b in 0..2 {
                    assert!(
                        (pair.inferred[a][b] - direct[a][b]).abs() <= 1e-6,
                        "pair {:?} ({a},{b}): inferred {} direct {}",
                        pair.parties,
                        pair.inferred[a][b],
                        direct[a][b]
                    );
                }
            }
        }
        assert!(red.max_inferred > 0.01);
    }

    #[test]
    fn reduction_rejects_underdetermined_grids() {
        let g = chsh_generalized();
        assert!(matches!(
            unitary_commutation_reduction(&g, &[0.5]),
            Err(TheoremError::UnderDetermined { .. })
        ));
    }

    #[test]
    fn first_order_cancellation_and_quadratic_scaling() {
        let g = chsh_generalized();
        let gen = SymmetryGenerator::rotation(0, [0.0, 1.0, 0.0], 2).unwrap();
        let report = first_order_check(&g, &gen, &[0, 0], &[0, 0]).unwrap();
        assert!(
            report.four_term <= 1e-9,
            "four-term {:.3e}",
            report.four_term
        );
        assert!(report.slope >= 1.9, "slope {}", report.slope);
        // theta = 0 gives an exactly unchanged probability.
        let id = ComplexMatrix::identity(4);
        let u0 = id.sub(
            &embed_local(&gen.matrix, 0, g.dims.as_ref().unwrap())
                .unwrap()
                .scale(Complex64::new(0.0, 0.0)),
        );
        assert!(u0.max_abs_diff(&id) == 0.0);
    }

    #[test]
    fn first_order_zero_generator_is_inert() {
        let g = chsh_generalized();
        let gen = SymmetryGenerator::generic(0, "zero", ComplexMatrix::zeros(2, 2)).unwrap();
        let report = first_order_check(&g, &gen, &[0, 0], &[0, 0]).unwrap();
        assert_eq!(report.four_term, 0.0);
        for (_, r) in &report.residuals {
            assert_eq!(*r, 0.0);
        }
        assert_eq!(report.slope, 2.0);
    }

    #[test]
    fn signaling_probe_zero_for_tensor_models() {
        let g = chsh_generalized();
        let dims = g.dims.clone().unwrap();
        let mut rng = rng_from_seed(31);
        let ui = embed_local(
            &one_param_unitary(&random_hermitian(2, &mut rng), 0.9).unwrap(),
            0,
            &dims,
        )
        .unwrap();
        let uj = embed_local(
            &one_param_unitary(&random_hermitian(2, &mut rng), -1.3).unwrap(),
            1,
            &dims,
        )
        .unwrap();
        let tv = signaling_probe(&g, 0, &ui, 1, &uj).unwrap();
        assert!(tv <= 1e-12, "tv {tv:.3e}");
    }

    #[test]
    fn signaling_probe_detects_shared_factor_overlap() {
        let s = Scenario::new(vec![1, 1], vec![2, 2]).unwrap();
        let z0 = ComplexMatrix::from_real(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        let z1 = ComplexMatrix::from_real(vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
        let x0 = ComplexMatrix::from_real(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let x1 = ComplexMatrix::from_real(vec![vec![0.5, -0.5], vec![-0.5, 0.5]]);
        let state = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let m = GeneralizedModel::new(
            s,
            2,
            state,
            vec![vec![vec![z0, z1]], vec![vec![x0, x1]]],
            None,
        )
        .unwrap();
        // Party 0 rotates about z, party 1 about y: the sandwich changes
        // party 1's x-basis statistics on the shared qubit.
        let sz = ComplexMatrix::from_real(vec![vec![0.5, 0.0], vec![0.0, -0.5]]);
        let sy = ComplexMatrix::from_rows(vec![
            vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, -0.5)],
            vec![Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.0)],
        ]);
        let ui = one_param_unitary(&sz, 1.2).unwrap();
        let uj = one_param_unitary(&sy, 0.8).unwrap();
        let tv = signaling_probe(&m, 0, &ui, 1, &uj).unwrap();
        assert!(tv > 0.05, "tv {tv}");
    }

    #[test]
    fn signaling_probe_rejects_same_party_and_nonunitary() {
        let g = chsh_generalized();
        let id = ComplexMatrix::identity(4);
        assert!(signaling_probe(&g, 0, &id, 0, &id).is_err());
        let bad = ComplexMatrix::from_real(vec![
            vec![2.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        assert!(signaling_probe(&g, 0, &bad, 1, &id).is_err());
    }
}
