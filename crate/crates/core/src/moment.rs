//! The almost-quantum correlation set as a moment-matrix semidefinite
//! program, together with the level-1 and level-2 relaxations used to
//! certify gaps, set membership testing, and GNS-style reconstruction of
//! explicit (state, operator) realizations from feasible moment matrices.
//!
//! Words are products of projector letters with the last outcome of every
//! (party, input) eliminated through completeness, which removes the exact
//! linear dependences among moments; the remaining structure is encoded as
//! entry identifications: entries whose reduced words agree after cross-party
//! reordering are equal, same-party clashes collapse to zero, and words fixed
//! by taking adjoints carry real moments.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use corrset_sdp::{solve, LinearFunctional, SdpError, SdpProblem, SdpStatus, SolveOptions};

use crate::quantum::{QuantumError, QuantumModel};
use crate::scenario::{
    marginal, Behavior, BellFunctional, Scenario, ScenarioError, ValidationReport,
};
use crate::tensor::{apply_local, hermitian_eig, vec_inner, ComplexMatrix, TensorError};

#[derive(Debug, Error)]
pub enum MomentError {
    #[error("word count {0} exceeds the supported maximum of 200")]
    TooManyWords(usize),
    #[error("functional needs the moment of {0:?}, which level {1:?} cannot represent")]
    Unrepresentable(Vec<Letter>, RelaxationLevel),
    #[error("moment matrix has {got} words but gamma is {rows}x{cols}")]
    ShapeMismatch {
        got: usize,
        rows: usize,
        cols: usize,
    },
    #[error("moment matrix violates its invariants: {0}")]
    InvalidMomentMatrix(String),
    #[error("solver failure: {0}")]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// One projector letter E_party^{outcome, input}, with `outcome` ranging over
/// the non-eliminated outcomes `0..d_party - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub party: usize,
    pub input: usize,
    pub outcome: usize,
}

/// An operator word: ordered product of letters. The empty word is the
/// identity. Canonical basis words keep party indices strictly increasing.
pub type Word = Vec<Letter>;

/// Which monomial family indexes the moment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxationLevel {
    /// Words of length <= 1.
    Npa1,
    /// Words of length <= 2, including same-party different-input products.
    Npa2,
    /// All products with at most one letter per party (the almost-quantum
    /// family).
    AlmostQuantum,
}

impl RelaxationLevel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "npa1" => Some(Self::Npa1),
            "npa2" => Some(Self::Npa2),
            "aqc" => Some(Self::AlmostQuantum),
            _ => None,
        }
    }
}

fn letters_of(scenario: &Scenario) -> Vec<Letter> {
    let mut out = Vec::new();
    for party in 0..scenario.parties() {
        for input in 0..scenario.inputs()[party] {
            for outcome in 0..scenario.outputs()[party].saturating_sub(1) {
                out.push(Letter {
                    party,
                    input,
                    outcome,
                });
            }
        }
    }
    out
}

/// Canonical word list for a relaxation level, grouped by word length, then
/// lexicographic in (party, input, outcome).
pub fn build_word_list(scenario: &Scenario, level: RelaxationLevel) -> Vec<Word> {
    let letters = letters_of(scenario);
    let mut words: Vec<Word> = vec![Vec::new()];
    words.extend(letters.iter().map(|&l| vec![l]));
    match level {
        RelaxationLevel::Npa1 => {}
        RelaxationLevel::Npa2 => {
            // Same-party ordered input pairs.
            let mut two: Vec<Word> = Vec::new();
            for &a in &letters {
                for &b in &letters {
                    if a.party == b.party && a.input != b.input {
                        two.push(vec![a, b]);
                    }
                }
            }
            // Cross-party unordered pairs in canonical party order.
            for &a in &letters {
                for &b in &letters {
                    if a.party < b.party {
                        two.push(vec![a, b]);
                    }
                }
            }
            two.sort();
            words.extend(two);
        }
        RelaxationLevel::AlmostQuantum => {
            // All products with <= 1 letter per party, length >= 2.
            let n = scenario.parties();
            let mut by_party: Vec<Vec<Letter>> = vec![Vec::new(); n];
            for &l in &letters {
                by_party[l.party].push(l);
            }
            let mut longer: Vec<Word> = Vec::new();
            for mask in 1u32..(1 << n) {
                if mask.count_ones() < 2 {
                    continue;
                }
                let parties: Vec<usize> = (0..n).filter(|p| mask & (1 << p) != 0).collect();
                if parties.iter().any(|&p| by_party[p].is_empty()) {
                    continue;
                }
                let mut combos: Vec<Word> = vec![Vec::new()];
                for &p in &parties {
                    let mut next = Vec::new();
                    for w in &combos {
                        for &l in &by_party[p] {
                            let mut w2 = w.clone();
                            w2.push(l);
                            next.push(w2);
                        }
                    }
                    combos = next;
                }
                longer.extend(combos);
            }
            longer.sort_by_key(|w| (w.len(), w.clone()));
            words.extend(longer);
        }
    }
    words
}

/// Reduce a letter sequence to its canonical form: letters of different
/// parties commute (stable bucketing by party), adjacent same-party letters
/// collapse by the projector algebra. `None` encodes the zero operator.
pub fn canonicalize(letters: &[Letter]) -> Option<Word> {
    let max_party = letters.iter().map(|l| l.party).max().map_or(0, |p| p + 1);
    let mut buckets: Vec<Vec<Letter>> = vec![Vec::new(); max_party];
    for &l in letters {
        buckets[l.party].push(l);
    }
    let mut out = Vec::new();
    for bucket in buckets {
        let mut reduced: Vec<Letter> = Vec::new();
        for l in bucket {
            if let Some(&last) = reduced.last() {
                if last.input == l.input {
                    if last.outcome == l.outcome {
                        continue; // idempotent
                    }
                    return None; // orthogonal outcomes annihilate
                }
            }
            reduced.push(l);
        }
        out.extend(reduced);
    }
    Some(out)
}

/// Adjoint of a canonical word: reverse the letter order (projectors are
/// Hermitian), then re-canonicalize.
fn word_dagger(w: &Word) -> Word {
    let rev: Vec<Letter> = w.iter().rev().copied().collect();
    canonicalize(&rev).expect("adjoint of a nonzero canonical word is nonzero")
}

/// Where a Gamma entry's moment lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryMoment {
    /// Same-party orthogonality clash: the entry is exactly zero.
    Zero,
    /// Moment of class `id`; `conjugated` says the entry equals the
    /// conjugate of the class moment rather than the moment itself.
    Class { id: usize, conjugated: bool },
}

/// Entry identification structure of a word family.
#[derive(Debug, Clone)]
pub struct MomentStructure {
    pub scenario: Scenario,
    pub level: RelaxationLevel,
    pub words: Vec<Word>,
    /// Upper-triangle entry map, indexed by i * n + j for i <= j.
    entries: Vec<EntryMoment>,
    /// Canonical word and one witness entry (i, j, conjugated) per class.
    classes: Vec<(Word, (usize, usize, bool))>,
    /// Classes fixed by the adjoint carry real moments.
    self_adjoint: Vec<bool>,
    class_of_word: HashMap<Word, (usize, bool)>,
}

impl MomentStructure {
    pub fn build(scenario: &Scenario, level: RelaxationLevel) -> Result<Self, MomentError> {
        let words = build_word_list(scenario, level);
        let n = words.len();
        if n > 200 {
            return Err(MomentError::TooManyWords(n));
        }
        let mut entries = vec![EntryMoment::Zero; n * n];
        let mut classes: Vec<(Word, (usize, usize, bool))> = Vec::new();
        let mut self_adjoint: Vec<bool> = Vec::new();
        let mut class_of_word: HashMap<Word, (usize, bool)> = HashMap::new();
        for i in 0..n {
            for j in i..n {
                let mut seq: Vec<Letter> = words[i].iter().rev().copied().collect();
                seq.extend(words[j].iter().copied());
                let entry = match canonicalize(&seq) {
                    None => EntryMoment::Zero,
                    Some(c) => {
                        if let Some(&(id, conj)) = class_of_word.get(&c) {
                            EntryMoment::Class {
                                id,
                                conjugated: conj,
                            }
                        } else {
                            let id = classes.len();
                            let dag = word_dagger(&c);
                            let sa = dag == c;
                            class_of_word.insert(c.clone(), (id, false));
                            if !sa {
                                class_of_word.insert(dag, (id, true));
                            }
                            classes.push((c, (i, j, false)));
                            self_adjoint.push(sa);
                            EntryMoment::Class {
                                id,
                                conjugated: false,
                            }
                        }
                    }
                };
                entries[i * n + j] = entry;
            }
        }
        Ok(Self {
            scenario: scenario.clone(),
            level,
            words,
            entries,
            classes,
            self_adjoint,
            class_of_word,
        })
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> EntryMoment {
        let n = self.words.len();
        if i <= j {
            self.entries[i * n + j]
        } else {
            match self.entries[j * n + i] {
                EntryMoment::Zero => EntryMoment::Zero,
                EntryMoment::Class { id, conjugated } => EntryMoment::Class {
                    id,
                    conjugated: !conjugated,
                },
            }
        }
    }

    /// Entry holding the moment of a canonical word, if the family carries it.
    pub fn witness_of_word(&self, word: &Word) -> Option<(usize, usize, bool)> {
        let &(id, conj) = self.class_of_word.get(word)?;
        let (_, (i, j, wconj)) = &self.classes[id];
        Some((*i, *j, *wconj != conj))
    }

    /// Emitted equality constraints over Gamma entries. Beyond these, Gamma
    /// is Hermitian with `Gamma[0][0] = 1` and positive semidefinite.
    pub fn constraints(&self) -> Vec<MomentConstraint> {
        let n = self.words.len();
        let mut witness: Vec<Option<(usize, usize)>> = vec![None; self.classes.len()];
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                match self.entries[i * n + j] {
                    EntryMoment::Zero => out.push(MomentConstraint::ZeroEntry { i, j }),
                    EntryMoment::Class { id, conjugated } => match witness[id] {
                        None => {
                            witness[id] = Some((i, j));
                            if self.self_adjoint[id] && i != j {
                                out.push(MomentConstraint::RealEntry { i, j });
                            }
                        }
                        Some((wi, wj)) => out.push(MomentConstraint::EqualEntries {
                            i,
                            j,
                            wi,
                            wj,
                            conjugated,
                        }),
                    },
                }
            }
        }
        out
    }
}

/// Equality constraints of the almost-quantum family for a scenario.
pub fn aqc_constraints(scenario: &Scenario) -> Result<Vec<MomentConstraint>, MomentError> {
    Ok(MomentStructure::build(scenario, RelaxationLevel::AlmostQuantum)?.constraints())
}

/// One equality constraint among Gamma entries (always on the upper
/// triangle; Hermitian symmetry of Gamma itself is structural).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentConstraint {
    /// `Gamma[i][j] = 0` (orthogonality collapse).
    ZeroEntry { i: usize, j: usize },
    /// `Gamma[i][j]` equals `Gamma[wi][wj]` (or its conjugate).
    EqualEntries {
        i: usize,
        j: usize,
        wi: usize,
        wj: usize,
        conjugated: bool,
    },
    /// `Gamma[i][j]` is real (word classes fixed by the adjoint).
    RealEntry { i: usize, j: usize },
}

/// Hermitian matrix of word moments realizing the relaxation constraints.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    pub scenario: Scenario,
    pub level: RelaxationLevel,
    pub words: Vec<Word>,
    pub gamma: ComplexMatrix,
}

/// Check PSD-ness, normalization and the entry identifications.
pub fn validate_moment_matrix(mm: &MomentMatrix) -> Result<ValidationReport, MomentError> {
    let n = mm.words.len();
    if mm.gamma.rows != n || mm.gamma.cols != n {
        return Err(MomentError::ShapeMismatch {
            got: n,
            rows: mm.gamma.rows,
            cols: mm.gamma.cols,
        });
    }
    let structure = MomentStructure::build(&mm.scenario, mm.level)?;
    let mut report = ValidationReport::default();
    if mm.gamma.hermiticity_deviation() > 1e-9 {
        report.violations.push(format!(
            "gamma is not Hermitian: deviation {:.3e}",
            mm.gamma.hermiticity_deviation()
        ));
    }
    let (w, _) = hermitian_eig(&mm.gamma.hermitian_part(f64::INFINITY)?)?;
    if w[0] < -1e-8 {
        report
            .violations
            .push(format!("gamma has eigenvalue {:.3e} below -1e-8", w[0]));
    }
    let norm = mm.gamma.get(0, 0);
    if (norm.re - 1.0).abs() > 1e-9 || norm.im.abs() > 1e-9 {
        report
            .violations
            .push(format!("normalization <1> = {norm} differs from 1"));
    }
    for c in structure.constraints() {
        match c {
            MomentConstraint::ZeroEntry { i, j } => {
                let v = mm.gamma.get(i, j).norm();
                if v > 1e-9 {
                    report.violations.push(format!(
                        "entry ({i},{j}) should vanish, has modulus {v:.3e}"
                    ));
                }
            }
            MomentConstraint::RealEntry { i, j } => {
                let v = mm.gamma.get(i, j).im.abs();
                if v > 1e-9 {
                    report
                        .violations
                        .push(format!("entry ({i},{j}) should be real, Im = {v:.3e}"));
                }
            }
            MomentConstraint::EqualEntries {
                i,
                j,
                wi,
                wj,
                conjugated,
            } => {
                let lhs = mm.gamma.get(i, j);
                let rhs = if conjugated {
                    mm.gamma.get(wi, wj).conj()
                } else {
                    mm.gamma.get(wi, wj)
                };
                if (lhs - rhs).norm() > 1e-9 {
                    report.violations.push(format!(
                        "entries ({i},{j}) and ({wi},{wj}) differ by {:.3e}",
                        (lhs - rhs).norm()
                    ));
                }
            }
        }
    }
    Ok(report)
}

/// Expansion of a probability cell into signed word moments via completeness
/// (the eliminated last outcome is one minus the kept ones).
fn cell_expansion(scenario: &Scenario, a: &[usize], x: &[usize]) -> Vec<(f64, Word)> {
    let mut acc: Vec<(f64, Word)> = vec![(1.0, Vec::new())];
    for party in 0..scenario.parties() {
        let d = scenario.outputs()[party];
        let mut options: Vec<(f64, Option<Letter>)> = Vec::new();
        if a[party] + 1 < d {
            options.push((
                1.0,
                Some(Letter {
                    party,
                    input: x[party],
                    outcome: a[party],
                }),
            ));
        } else {
            options.push((1.0, None));
            for b in 0..d - 1 {
                options.push((
                    -1.0,
                    Some(Letter {
                        party,
                        input: x[party],
                        outcome: b,
                    }),
                ));
            }
        }
        let mut next = Vec::with_capacity(acc.len() * options.len());
        for (sign, word) in &acc {
            for (s2, letter) in &options {
                let mut w = word.clone();
                if let Some(l) = letter {
                    w.push(*l);
                }
                next.push((sign * s2, w));
            }
        }
        acc = next;
    }
    acc
}

/// Build the SDP objective terms for a Bell functional over the structure's
/// witness entries; the constant term of the expansion is returned as the
/// offset.
fn functional_objective(
    structure: &MomentStructure,
    f: &BellFunctional,
) -> Result<(LinearFunctional, f64), MomentError> {
    let mut obj = LinearFunctional::new();
    let mut offset = 0.0;
    for (x, a, coeff) in f.terms() {
        for (sign, word) in cell_expansion(&structure.scenario, &a, &x) {
            if word.is_empty() {
                offset += coeff * sign;
                continue;
            }
            let (i, j, conj) = structure
                .witness_of_word(&word)
                .ok_or_else(|| MomentError::Unrepresentable(word.clone(), structure.level))?;
            // Probability words are fixed by the adjoint, so the moment is
            // real and conjugation is immaterial.
            let _ = conj;
            obj.real_term(0, i, j, coeff * sign);
        }
    }
    Ok((obj, offset))
}

/// Translate the entry identifications into engine constraints on block 0.
fn structure_constraints(structure: &MomentStructure) -> Vec<(LinearFunctional, f64)> {
    let mut out = Vec::new();
    let mut norm = LinearFunctional::new();
    norm.real_term(0, 0, 0, 1.0);
    out.push((norm, 1.0));
    for c in structure.constraints() {
        match c {
            MomentConstraint::ZeroEntry { i, j } => {
                let mut re = LinearFunctional::new();
                re.real_term(0, i, j, 1.0);
                out.push((re, 0.0));
                if i != j {
                    let mut im = LinearFunctional::new();
                    im.term(0, i, j, Complex64::new(0.0, -1.0));
                    out.push((im, 0.0));
                }
            }
            MomentConstraint::RealEntry { i, j } => {
                let mut im = LinearFunctional::new();
                im.term(0, i, j, Complex64::new(0.0, -1.0));
                out.push((im, 0.0));
            }
            MomentConstraint::EqualEntries {
                i,
                j,
                wi,
                wj,
                conjugated,
            } => {
                let mut re = LinearFunctional::new();
                re.real_term(0, i, j, 1.0);
                re.real_term(0, wi, wj, -1.0);
                out.push((re, 0.0));
                let mut im = LinearFunctional::new();
                im.term(0, i, j, Complex64::new(0.0, -1.0));
                im.term(
                    0,
                    wi,
                    wj,
                    Complex64::new(0.0, if conjugated { -1.0 } else { 1.0 }),
                );
                out.push((im, 0.0));
            }
        }
    }
    out
}

/// Result of a moment-relaxation maximization.
#[derive(Debug, Clone)]
pub struct MomentBound {
    pub value: f64,
    pub moment_matrix: MomentMatrix,
    pub behavior: Behavior,
    pub status: SdpStatus,
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Maximize a Bell functional over the chosen relaxation level.
pub fn maximize_over_level(
    f: &BellFunctional,
    level: RelaxationLevel,
    options: &SolveOptions,
) -> Result<MomentBound, MomentError> {
    let structure = MomentStructure::build(&f.scenario, level)?;
    let n = structure.word_count();
    let mut problem = SdpProblem::new(vec![n])?;
    let (obj, offset) = functional_objective(&structure, f)?;
    problem.set_objective(obj, offset)?;
    for (c, rhs) in structure_constraints(&structure) {
        problem.add_constraint(c, rhs)?;
    }
    let sol = solve(&problem, options)?;
    let gamma = project_onto_structure(
        &structure,
        &ComplexMatrix {
            rows: n,
            cols: n,
            data: sol.primal[0].clone(),
        },
    );
    let mm = MomentMatrix {
        scenario: f.scenario.clone(),
        level,
        words: structure.words.clone(),
        gamma,
    };
    let behavior = behavior_from_moments(&structure, &mm)?;
    Ok(MomentBound {
        value: sol.objective,
        moment_matrix: mm,
        behavior,
        status: sol.status,
        duality_gap: sol.achieved.duality_gap,
        iterations: sol.iterations,
    })
}

/// Maximize over the almost-quantum family.
pub fn maximize_over_aqc(
    f: &BellFunctional,
    options: &SolveOptions,
) -> Result<MomentBound, MomentError> {
    maximize_over_level(f, RelaxationLevel::AlmostQuantum, options)
}

/// Orthogonal projection of a numerically solved Gamma onto the exact
/// identification subspace: class members are replaced by their mean,
/// orthogonality-collapsed entries by zero, self-adjoint moments by their
/// real part, and the normalization is pinned. Solver output satisfies the
/// identifications only to its own gate (~1e-8); the projection moves
/// entries by that much and makes the invariants exact.
pub fn project_onto_structure(structure: &MomentStructure, gamma: &ComplexMatrix) -> ComplexMatrix {
    let n = structure.word_count();
    let mut sums = vec![Complex64::new(0.0, 0.0); structure.class_count()];
    let mut counts = vec![0usize; structure.class_count()];
    for i in 0..n {
        for j in i..n {
            if let EntryMoment::Class { id, conjugated } = structure.entry(i, j) {
                let v = gamma.get(i, j);
                sums[id] += if conjugated { v.conj() } else { v };
                counts[id] += 1;
            }
        }
    }
    let means: Vec<Complex64> = sums
        .iter()
        .zip(counts.iter())
        .zip(structure.self_adjoint.iter())
        .map(|((s, &c), &sa)| {
            let mut m = if c > 0 {
                s / c as f64
            } else {
                Complex64::new(0.0, 0.0)
            };
            if sa {
                m = Complex64::new(m.re, 0.0);
            }
            m
        })
        .collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = match structure.entry(i, j) {
                EntryMoment::Zero => Complex64::new(0.0, 0.0),
                EntryMoment::Class { id, conjugated } => {
                    if conjugated {
                        means[id].conj()
                    } else {
                        means[id]
                    }
                }
            };
            out.set(i, j, v);
            out.set(j, i, v.conj());
        }
    }
    out.set(0, 0, Complex64::new(1.0, 0.0));
    out
}

/// Read the behavior off a moment matrix through the same completeness
/// expansion used for objectives.
pub fn behavior_from_moments(
    structure: &MomentStructure,
    mm: &MomentMatrix,
) -> Result<Behavior, MomentError> {
    let s = &structure.scenario;
    let oc = s.outcome_count();
    let mut table = vec![0.0; s.input_count() * oc];
    for (xf, x) in s.input_tuples().iter().enumerate() {
        for (af, a) in s.outcome_tuples().iter().enumerate() {
            let mut p = 0.0;
            for (sign, word) in cell_expansion(s, a, x) {
                if word.is_empty() {
                    p += sign;
                    continue;
                }
                let (i, j, conj) = structure
                    .witness_of_word(&word)
                    .ok_or_else(|| MomentError::Unrepresentable(word.clone(), structure.level))?;
                let v = mm.gamma.get(i, j);
                p += sign * if conj { v.conj().re } else { v.re };
            }
            table[xf * oc + af] = p;
        }
    }
    Ok(Behavior::new(s.clone(), table)?)
}

/// Outcome of a membership test.
#[derive(Debug, Clone)]
pub struct Membership {
    pub feasible: bool,
    /// Optimal slack: the largest t with Gamma - t I still PSD under all
    /// moment constraints. Nonnegative (up to 1e-7) means membership.
    pub slack: f64,
    /// max(0, -slack): how far Gamma is from PSD at best.
    pub max_violation: f64,
    pub status: SdpStatus,
}

/// SDP membership test: does a moment matrix exist whose low-order entries
/// reproduce the behavior? Posed as maximizing the smallest eigenvalue slack
/// t in Gamma = X + t I, which keeps the problem strictly feasible on both
/// sides of the boundary. Marginal moments are taken with dropped parties
/// pinned to input 0 (immaterial for no-signaling behaviors).
pub fn membership_test(
    b: &Behavior,
    level: RelaxationLevel,
    options: &SolveOptions,
) -> Result<Membership, MomentError> {
    let structure = MomentStructure::build(&b.scenario, level)?;
    let n = structure.word_count();
    // Blocks: X (n), u (1), v (1) with t = u - v.
    let mut problem = SdpProblem::new(vec![n, 1, 1])?;
    let mut obj = LinearFunctional::new();
    obj.real_term(1, 0, 0, 1.0);
    obj.real_term(2, 0, 0, -1.0);
    problem.set_objective(obj, 0.0)?;
    // Gamma = X + (u - v) I: rewrite every structural constraint g(Gamma)=r
    // as g(X) + (u-v) g(I) = r.
    let base = structure_constraints(&structure);
    for (mut f, rhs) in base {
        let g_of_identity: f64 = f
            .terms
            .iter()
            .map(|t| if t.row == t.col { t.coeff.re } else { 0.0 })
            .sum();
        if g_of_identity != 0.0 {
            f.real_term(1, 0, 0, g_of_identity);
            f.real_term(2, 0, 0, -g_of_identity);
        }
        problem.add_constraint(f, rhs)?;
    }
    // Pin every probability-word moment the level can represent to the
    // behavior's value, through the word's witness entry. Levels that carry
    // no entry for a word (npa1 has no joint two-party entries listed, but
    // its (A, B) cells witness them) simply see fewer pins.
    let parties = b.scenario.parties();
    for mask in 1u32..(1 << parties) {
        let members: Vec<usize> = (0..parties).filter(|p| mask & (1 << p) != 0).collect();
        let mut choices: Vec<Word> = vec![Vec::new()];
        for &p in &members {
            let mut next = Vec::new();
            for x in 0..b.scenario.inputs()[p] {
                for a in 0..b.scenario.outputs()[p].saturating_sub(1) {
                    for w in &choices {
                        let mut w2 = w.clone();
                        w2.push(Letter {
                            party: p,
                            input: x,
                            outcome: a,
                        });
                        next.push(w2);
                    }
                }
            }
            choices = next;
        }
        for word in choices {
            let Some((i, j, _)) = structure.witness_of_word(&word) else {
                continue;
            };
            let p = behavior_word_moment(b, &word)?;
            let mut f = LinearFunctional::new();
            f.real_term(0, i, j, 1.0);
            if i == j {
                f.real_term(1, 0, 0, 1.0);
                f.real_term(2, 0, 0, -1.0);
            }
            problem.add_constraint(f, p)?;
            if i != j {
                let mut im = LinearFunctional::new();
                im.term(0, i, j, Complex64::new(0.0, -1.0));
                problem.add_constraint(im, 0.0)?;
            }
        }
    }
    let sol = solve(&problem, options)?;
    let slack = sol.objective;
    let feasible = slack >= -1e-7;
    Ok(Membership {
        feasible,
        slack,
        max_violation: (-slack).max(0.0),
        status: sol.status,
    })
}

/// Marginal moment <prod E> of a probability word, read from a behavior.
fn behavior_word_moment(b: &Behavior, word: &Word) -> Result<f64, MomentError> {
    let kept: Vec<usize> = word.iter().map(|l| l.party).collect();
    let pin = vec![0usize; b.scenario.parties()];
    let m = marginal(b, &kept, &pin)?;
    let x: Vec<usize> = word.iter().map(|l| l.input).collect();
    let a: Vec<usize> = word.iter().map(|l| l.outcome).collect();
    Ok(m.prob(&a, &x))
}

/// Moment matrix of an explicit quantum model: `Gamma[i][j] = <w_i psi, w_j psi>`.
/// This is the independent oracle used to check the relaxations against
/// explicit realizations.
pub fn moment_matrix_from_model(
    m: &QuantumModel,
    level: RelaxationLevel,
) -> Result<MomentMatrix, MomentError> {
    let structure = MomentStructure::build(m.scenario(), level)?;
    let dims = &m.state.dims;
    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(structure.word_count());
    for word in &structure.words {
        let mut v = m.state.amplitudes.clone();
        for l in word.iter().rev() {
            let e = m.assembly.projector(l.party, l.input, l.outcome);
            v = apply_local(e, l.party, dims, &v);
        }
        vectors.push(v);
    }
    let n = structure.word_count();
    let mut gamma = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gamma.set(i, j, vec_inner(&vectors[i], &vectors[j]));
        }
    }
    Ok(MomentMatrix {
        scenario: m.scenario().clone(),
        level,
        words: structure.words,
        gamma,
    })
}

/// Explicit realization recovered from a feasible moment matrix.
#[derive(Debug, Clone)]
pub struct ReconstructedModel {
    pub scenario: Scenario,
    /// Dimension of the reconstructed space (word count after pruning).
    pub dim: usize,
    /// Unit state vector (the image of the empty word).
    pub state: Vec<Complex64>,
    /// One matrix per (party, input, outcome), the last outcome completed
    /// through the identity on the span.
    pub operators: Vec<Vec<Vec<ComplexMatrix>>>,
    /// max |V^dag V - Gamma| over entries: how faithfully the factorization
    /// reproduces the input moments.
    pub gram_residual: f64,
}

impl ReconstructedModel {
    pub fn operator(&self, party: usize, input: usize, outcome: usize) -> &ComplexMatrix {
        &self.operators[party][input][outcome]
    }
}

/// Factor Gamma = V^dag V (eigenvalue clipping at 1e-9), take the columns of
/// V as word vectors, and define each letter operator by its action
/// E v_w = v_{reduce(E w)} wherever the reduced word stays in the family,
/// extended least-squares on the reachable span and zero on its orthogonal
/// complement.
pub fn gns_reconstruct(mm: &MomentMatrix) -> Result<ReconstructedModel, MomentError> {
    let report = validate_moment_matrix(mm)?;
    if !report.is_valid() {
        return Err(MomentError::InvalidMomentMatrix(
            report.violations.join("; "),
        ));
    }
    let structure = MomentStructure::build(&mm.scenario, mm.level)?;
    let n = structure.word_count();
    let gamma = mm.gamma.hermitian_part(1e-8)?;
    let (w, q) = hermitian_eig(&gamma)?;
    let keep: Vec<usize> = (0..n).filter(|&k| w[k] > 1e-9).collect();
    let r = keep.len();
    // v_w[k] = sqrt(lambda_k) conj(Q[w][k]) for kept k.
    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for word_idx in 0..n {
        let v: Vec<Complex64> = keep
            .iter()
            .map(|&k| w[k].sqrt() * q.get(word_idx, k).conj())
            .collect();
        vectors.push(v);
    }
    let mut gram_residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let g = vec_inner(&vectors[i], &vectors[j]);
            gram_residual = gram_residual.max((g - mm.gamma.get(i, j)).norm());
        }
    }
    let state = vectors[0].clone();

    let word_index: HashMap<Word, usize> = structure
        .words
        .iter()
        .enumerate()
        .map(|(k, wd)| (wd.clone(), k))
        .collect();

    let s = &structure.scenario;
    let mut operators: Vec<Vec<Vec<ComplexMatrix>>> = Vec::with_capacity(s.parties());
    for party in 0..s.parties() {
        let mut per_input = Vec::with_capacity(s.inputs()[party]);
        for input in 0..s.inputs()[party] {
            let d = s.outputs()[party];
            let mut per_outcome: Vec<ComplexMatrix> = Vec::with_capacity(d);
            let mut sum = ComplexMatrix::zeros(r, r);
            for outcome in 0..d.saturating_sub(1) {
                let letter = Letter {
                    party,
                    input,
                    outcome,
                };
                // Known actions: E v_w -> v_target (or zero).
                let mut sources: Vec<&[Complex64]> = Vec::new();
                let mut targets: Vec<Vec<Complex64>> = Vec::new();
                for (widx, word) in structure.words.iter().enumerate() {
                    let mut seq = vec![letter];
                    seq.extend(word.iter().copied());
                    match canonicalize(&seq) {
                        None => {
                            sources.push(&vectors[widx]);
                            targets.push(vec![Complex64::new(0.0, 0.0); r]);
                        }
                        Some(c) => {
                            if let Some(&t) = word_index.get(&c) {
                                sources.push(&vectors[widx]);
                                targets.push(vectors[t].clone());
                            }
                        }
                    }
                }
                per_outcome.push(least_squares_operator(&sources, &targets, r)?);
                sum = sum.add(per_outcome.last().expect("just pushed"));
            }
            if d >= 1 {
                let last = ComplexMatrix::identity(r).sub(&sum);
                per_outcome.push(last);
            }
            per_input.push(per_outcome);
        }
        operators.push(per_input);
    }
    Ok(ReconstructedModel {
        scenario: s.clone(),
        dim: r,
        state,
        operators,
        gram_residual,
    })
}

/// Minimum-norm solution of E * [sources] = [targets] on the span of the
/// sources, zero on the orthogonal complement.
fn least_squares_operator(
    sources: &[&[Complex64]],
    targets: &[Vec<Complex64>],
    r: usize,
) -> Result<ComplexMatrix, MomentError> {
    // Normal equations: E (S S^dag) = T S^dag with S the r x K source matrix.
    let k = sources.len();
    let mut ssd = ComplexMatrix::zeros(r, r);
    let mut tsd = ComplexMatrix::zeros(r, r);
    for col in 0..k {
        for a in 0..r {
            for b in 0..r {
                let add_s = sources[col][a] * sources[col][b].conj();
                let cur_s = ssd.get(a, b);
                ssd.set(a, b, cur_s + add_s);
                let add_t = targets[col][a] * sources[col][b].conj();
                let cur_t = tsd.get(a, b);
                tsd.set(a, b, cur_t + add_t);
            }
        }
    }
    // Pseudo-inverse of the Hermitian PSD Gram via eigendecomposition.
    let (w, q) = hermitian_eig(&ssd.hermitian_part(1e-6)?)?;
    let scale = w.last().copied().unwrap_or(0.0).max(1e-30);
    let mut pinv = ComplexMatrix::zeros(r, r);
    for t in 0..r {
        if w[t] > 1e-12 * scale {
            let inv = 1.0 / w[t];
            for a in 0..r {
                for b in 0..r {
                    let add = q.get(a, t) * q.get(b, t).conj() * inv;
                    let cur = pinv.get(a, b);
                    pinv.set(a, b, cur + add);
                }
            }
        }
    }
    Ok(tsd.mul(&pinv))
}
