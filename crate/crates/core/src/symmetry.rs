//! Isotropy/homogeneity actions: per-party one-parameter unitary groups,
//! group-axiom verification, model transformation and Born-rule invariance
//! checks, plus spectral decomposition of unitaries into phase/projector
//! pairs.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::quantum::{
    behavior_from_model, ProjectorAssembly, QuantumError, QuantumModel, QuantumState,
};
use crate::scenario::{marginal, multi_indices, Behavior};
use crate::tensor::{
    apply_local, hermitian_eig, one_param_unitary, ComplexMatrix, PartyDims, TensorError,
};

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error("generator for party {party} is {got}-dimensional, the party factor is {want}")]
    GeneratorDims {
        party: usize,
        want: usize,
        got: usize,
    },
    #[error("rotation axis must be a nonzero 3-vector")]
    ZeroAxis,
    #[error("matrix is not unitary: deviation {0:.3e}")]
    NotUnitary(f64),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// How a generator was built; rotation generators remember their axis.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    /// Spin-(d-1)/2 rotation generator about the stored unit axis.
    Rotation { axis: [f64; 3] },
    /// Arbitrary user-supplied Hermitian generator (covers translation
    /// actions, which have no faithful finite-dimensional linear momentum
    /// representation).
    Generic { label: String },
}

/// Hermitian generator attached to one party.
#[derive(Debug, Clone)]
pub struct SymmetryGenerator {
    pub party: usize,
    pub kind: GeneratorKind,
    pub matrix: ComplexMatrix,
}

impl SymmetryGenerator {
    /// Wrap an arbitrary Hermitian matrix as a generator.
    pub fn generic(
        party: usize,
        label: impl Into<String>,
        matrix: ComplexMatrix,
    ) -> Result<Self, SymmetryError> {
        let matrix = matrix.hermitian_part(crate::tensor::HERMITICITY_TOL)?;
        Ok(Self {
            party,
            kind: GeneratorKind::Generic {
                label: label.into(),
            },
            matrix,
        })
    }

    /// Rotation generator k . (J_x, J_y, J_z) in the spin-(d-1)/2
    /// representation, J_z = diag(j, j-1, ..., -j).
    pub fn rotation(party: usize, axis: [f64; 3], dim: usize) -> Result<Self, SymmetryError> {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if norm < 1e-14 {
            return Err(SymmetryError::ZeroAxis);
        }
        let k = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        let (jx, jy, jz) = spin_operators(dim);
        let matrix = jx
            .scale(Complex64::new(k[0], 0.0))
            .add(&jy.scale(Complex64::new(k[1], 0.0)))
            .add(&jz.scale(Complex64::new(k[2], 0.0)));
        Ok(Self {
            party,
            kind: GeneratorKind::Rotation { axis: k },
            matrix,
        })
    }
}

/// Angular momentum operators for the spin-(d-1)/2 representation, built from
/// the standard ladder construction.
pub fn spin_operators(dim: usize) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let j = (dim as f64 - 1.0) / 2.0;
    let mut jz = ComplexMatrix::zeros(dim, dim);
    let mut jplus = ComplexMatrix::zeros(dim, dim);
    for idx in 0..dim {
        let m = j - idx as f64;
        jz.set(idx, idx, Complex64::new(m, 0.0));
        if idx > 0 {
            // <m+1 | J+ | m> with m = j - idx.
            let amp = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
            jplus.set(idx - 1, idx, Complex64::new(amp, 0.0));
        }
    }
    let jminus = jplus.dagger();
    let jx = jplus.add(&jminus).scale(Complex64::new(0.5, 0.0));
    let jy = jplus.sub(&jminus).scale(Complex64::new(0.0, -0.5));
    (jx, jy, jz)
}

/// Per-party one-parameter unitary assignment; absent parties act as the
/// identity. Theta carries radians for rotations and a dimensionless
/// displacement for translation-flavored generators.
#[derive(Debug, Clone, Default)]
pub struct SymmetryAction {
    entries: BTreeMap<usize, (f64, SymmetryGenerator)>,
}

impl SymmetryAction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, theta: f64, generator: SymmetryGenerator) -> Self {
        self.set(theta, generator);
        self
    }

    pub fn set(&mut self, theta: f64, generator: SymmetryGenerator) {
        self.entries.insert(generator.party, (theta, generator));
    }

    pub fn parties(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn entry(&self, party: usize) -> Option<&(f64, SymmetryGenerator)> {
        self.entries.get(&party)
    }

    /// The action with every angle negated (the group inverse).
    pub fn inverse(&self) -> Self {
        let mut out = Self::new();
        for (theta, g) in self.entries.values() {
            out.set(-theta, g.clone());
        }
        out
    }
}

/// exp(-i theta_i M_i) for the party's entry, or the identity when the party
/// is absent from the action.
pub fn unitary_of_action(
    action: &SymmetryAction,
    party: usize,
    dims: &PartyDims,
) -> Result<ComplexMatrix, SymmetryError> {
    let d = dims.dim(party);
    match action.entry(party) {
        None => Ok(ComplexMatrix::identity(d)),
        Some((theta, g)) => {
            if g.matrix.rows != d {
                return Err(SymmetryError::GeneratorDims {
                    party,
                    want: d,
                    got: g.matrix.rows,
                });
            }
            Ok(one_param_unitary(&g.matrix, *theta)?)
        }
    }
}

/// Transform state and projectors: |psi'> = prod U_i |psi>, E' = U E U^dag.
pub fn transform_model(
    m: &QuantumModel,
    action: &SymmetryAction,
) -> Result<QuantumModel, SymmetryError> {
    let dims = &m.state.dims;
    let mut amplitudes = m.state.amplitudes.clone();
    let mut projectors = m.assembly.projectors.clone();
    for party in 0..dims.party_count() {
        let u = unitary_of_action(action, party, dims)?;
        amplitudes = apply_local(&u, party, dims, &amplitudes);
        let udag = u.dagger();
        for per_input in &mut projectors[party] {
            for e in per_input.iter_mut() {
                *e = u.mul(e).mul(&udag);
            }
        }
    }
    // Renormalize away the 1e-16-level drift of the numeric unitaries.
    let norm = crate::tensor::vec_norm(&amplitudes);
    for z in amplitudes.iter_mut() {
        *z /= norm;
    }
    let state = QuantumState::new(dims.clone(), amplitudes)?;
    let assembly = ProjectorAssembly::new(m.assembly.scenario.clone(), dims.clone(), projectors)?;
    Ok(QuantumModel::new(state, assembly)?)
}

/// Largest deviation between two behaviors over the joint table and every
/// marginal subset at every dropped-input assignment.
pub fn behavior_deviation(b1: &Behavior, b2: &Behavior) -> f64 {
    let mut worst = b1
        .table()
        .iter()
        .zip(b2.table().iter())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    let n = b1.scenario.parties();
    for mask in 1..(1u32 << n) - 1 {
        let kept: Vec<usize> = (0..n).filter(|p| mask & (1 << p) != 0).collect();
        let dropped: Vec<usize> = (0..n).filter(|p| mask & (1 << p) == 0).collect();
        let dropped_dims: Vec<usize> = dropped.iter().map(|&p| b1.scenario.inputs()[p]).collect();
        for assign in multi_indices(&dropped_dims) {
            let mut pin = vec![0usize; n];
            for (slot, &p) in dropped.iter().enumerate() {
                pin[p] = assign[slot];
            }
            let m1 = marginal(b1, &kept, &pin).expect("valid subset");
            let m2 = marginal(b2, &kept, &pin).expect("valid subset");
            for (p, q) in m1.table().iter().zip(m2.table().iter()) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    worst
}

/// Max over all cells and marginal subsets of |P_before - P_after| under the
/// jointly transformed model. For valid quantum models this is the numerical
/// content of the invariance requirement and stays at the 1e-9 level.
pub fn invariance_check(m: &QuantumModel, action: &SymmetryAction) -> Result<f64, SymmetryError> {
    let before = behavior_from_model(m)?;
    let transformed = transform_model(m, action)?;
    let after = behavior_from_model(&transformed)?;
    Ok(behavior_deviation(&before, &after))
}

/// Result of checking the one-parameter group axioms on a sampled family.
#[derive(Debug, Clone)]
pub struct GroupAxiomReport {
    pub closure: f64,
    pub identity: f64,
    pub inverse: f64,
    pub associativity: f64,
}

impl GroupAxiomReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.closure <= tol
            && self.identity <= tol
            && self.inverse <= tol
            && self.associativity <= tol
    }
}

/// Verify closure under same-axis composition, the identity element,
/// inverses and associativity on the sampled angles.
pub fn group_axiom_check(
    family: &SymmetryGenerator,
    thetas: &[f64],
) -> Result<GroupAxiomReport, SymmetryError> {
    let n = family.matrix.rows;
    let id = ComplexMatrix::identity(n);
    let us: Vec<ComplexMatrix> = thetas
        .iter()
        .map(|&t| one_param_unitary(&family.matrix, t))
        .collect::<Result<_, _>>()?;
    let mut closure = 0.0f64;
    let mut inverse = 0.0f64;
    let mut associativity = 0.0f64;
    let identity = one_param_unitary(&family.matrix, 0.0)?.max_abs_diff(&id);
    for (i, &ti) in thetas.iter().enumerate() {
        let u_inv = one_param_unitary(&family.matrix, -ti)?;
        inverse = inverse.max(us[i].mul(&u_inv).max_abs_diff(&id));
        for (j, &tj) in thetas.iter().enumerate() {
            let composed = one_param_unitary(&family.matrix, ti + tj)?;
            closure = closure.max(us[i].mul(&us[j]).max_abs_diff(&composed));
            for uk in &us {
                let left = us[i].mul(&us[j]).mul(uk);
                let right = us[i].mul(&us[j].mul(uk));
                associativity = associativity.max(left.max_abs_diff(&right));
            }
        }
    }
    Ok(GroupAxiomReport {
        closure,
        identity,
        inverse,
        associativity,
    })
}

/// One spectral term of a unitary: u = sum over terms of e^{i phase} E.
#[derive(Debug, Clone)]
pub struct SpectralTerm {
    /// Phase in (-pi, pi].
    pub phase: f64,
    pub projector: ComplexMatrix,
}

/// Spectral decomposition of a unitary into phases and orthogonal, complete
/// projectors; eigenvalues whose phases agree within 1e-8 are merged into a
/// single projector.
pub fn spectral_decompose(u: &ComplexMatrix) -> Result<Vec<SpectralTerm>, SymmetryError> {
    let dev = u.unitarity_deviation();
    if dev > 1e-10 {
        return Err(SymmetryError::NotUnitary(dev));
    }
    let n = u.rows;
    let udag = u.dagger();
    let a = u.add(&udag).scale(Complex64::new(0.5, 0.0));
    let b = u.sub(&udag).scale(Complex64::new(0.0, -0.5));
    // A and B are commuting Hermitian parts of a normal matrix; jointly
    // diagonalize by refining A's near-degenerate clusters with B.
    let (wa, va) = hermitian_eig(&a)?;
    let mut vectors: Vec<(f64, Vec<Complex64>)> = Vec::new(); // (phase, eigenvector)
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (wa[end] - wa[start]).abs() <= 1e-9 {
            end += 1;
        }
        let k = end - start;
        // Columns of the cluster.
        let cols: Vec<Vec<Complex64>> = (start..end)
            .map(|c| (0..n).map(|r| va.get(r, c)).collect())
            .collect();
        if k == 1 {
            let v = &cols[0];
            let bv = b.matvec(v);
            let sin_phi = crate::tensor::vec_inner(v, &bv).re;
            let phase = sin_phi.atan2(wa[start]);
            vectors.push((phase, v.clone()));
        } else {
            // B restricted to the cluster.
            let mut bsub = ComplexMatrix::zeros(k, k);
            for (ci, vi) in cols.iter().enumerate() {
                let bvj: Vec<Vec<Complex64>> = cols.iter().map(|vj| b.matvec(vj)).collect();
                for (cj, bv) in bvj.iter().enumerate() {
                    bsub.set(ci, cj, crate::tensor::vec_inner(vi, bv));
                }
            }
            let (wb, vb) = hermitian_eig(&bsub)?;
            for t in 0..k {
                let mut v = vec![Complex64::new(0.0, 0.0); n];
                for (ci, col) in cols.iter().enumerate() {
                    let coeff = vb.get(ci, t);
                    for r in 0..n {
                        v[r] += coeff * col[r];
                    }
                }
                let phase = wb[t].atan2(wa[start]);
                vectors.push((phase, v));
            }
        }
        start = end;
    }
    // Canonicalize phases into (-pi, pi] and merge within 1e-8.
    for (phase, _) in vectors.iter_mut() {
        if *phase <= -std::f64::consts::PI + 1e-8 {
            *phase += 2.0 * std::f64::consts::PI;
        }
    }
    vectors.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut terms: Vec<SpectralTerm> = Vec::new();
    for (phase, v) in vectors {
        let mergeable = terms
            .last()
            .map(|t| (phase - t.phase).abs() <= 1e-8)
            .unwrap_or(false);
        if !mergeable {
            terms.push(SpectralTerm {
                phase,
                projector: ComplexMatrix::zeros(n, n),
            });
        }
        let term = terms.last_mut().expect("pushed above");
        for r in 0..n {
            for c in 0..n {
                let add = v[r] * v[c].conj();
                let cur = term.projector.get(r, c);
                term.projector.set(r, c, cur + add);
            }
        }
    }
    Ok(terms)
}

/// Rebuild sum e^{i phase} E from spectral terms (used by checks and tests).
pub fn spectral_reconstruct(terms: &[SpectralTerm], n: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(n, n);
    for t in terms {
        out = out.add(&t.projector.scale(Complex64::from_polar(1.0, t.phase)));
    }
    out
}

/// Orthogonality/completeness residual of spectral projectors.
pub fn spectral_projector_residual(terms: &[SpectralTerm], n: usize) -> f64 {
    let mut worst = 0.0f64;
    let mut sum = ComplexMatrix::zeros(n, n);
    for (i, t) in terms.iter().enumerate() {
        worst = worst.max(t.projector.mul(&t.projector).max_abs_diff(&t.projector));
        for t2 in terms.iter().skip(i + 1) {
            worst = worst.max(t.projector.mul(&t2.projector).max_abs());
        }
        sum = sum.add(&t.projector);
    }
    worst.max(sum.max_abs_diff(&ComplexMatrix::identity(n)))
}
