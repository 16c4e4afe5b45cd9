//! Device-independent layer: scenarios, behaviors (conditional probability
//! tables), no-signaling checks, Bell functionals and exact classical bounds
//! by enumeration of deterministic strategies.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("inputs/outputs lists must have one entry per party")]
    LengthMismatch,
    #[error("party count and cardinalities must be >= 1")]
    Degenerate,
    #[error("cell ({0:?}|{1:?}) is outside the scenario")]
    BadCell(Vec<usize>, Vec<usize>),
    #[error("behavior table has {got} entries, scenario needs {want}")]
    BadTable { got: usize, want: usize },
    #[error("functional and behavior scenarios differ")]
    ScenarioMismatch,
    #[error("kept-party subset is empty or out of range")]
    BadSubset,
    #[error("deterministic enumeration would visit ~{estimate:.3e} strategies (limit 1e7)")]
    EnumerationTooLarge { estimate: f64 },
    #[error("unknown canonical functional `{0}` (expected chsh or mermin)")]
    UnknownFunctional(String),
}

/// Iterate all tuples over mixed-radix digit bounds, most significant first.
pub fn multi_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; dims.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for pos in (0..dims.len()).rev() {
            cur[pos] += 1;
            if cur[pos] < dims[pos] {
                break;
            }
            cur[pos] = 0;
        }
    }
    out
}

/// A Bell scenario: `n` parties, per-party input and output cardinalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    parties: usize,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
}

impl Scenario {
    pub fn new(inputs: Vec<usize>, outputs: Vec<usize>) -> Result<Self, ScenarioError> {
        if inputs.len() != outputs.len() {
            return Err(ScenarioError::LengthMismatch);
        }
        if inputs.is_empty() || inputs.contains(&0) || outputs.contains(&0) {
            return Err(ScenarioError::Degenerate);
        }
        Ok(Self {
            parties: inputs.len(),
            inputs,
            outputs,
        })
    }

    /// Scenario with the same input/output cardinality for every party.
    pub fn symmetric(parties: usize, inputs: usize, outputs: usize) -> Result<Self, ScenarioError> {
        Self::new(vec![inputs; parties], vec![outputs; parties])
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn input_tuples(&self) -> Vec<Vec<usize>> {
        multi_indices(&self.inputs)
    }

    pub fn outcome_tuples(&self) -> Vec<Vec<usize>> {
        multi_indices(&self.outputs)
    }

    pub fn input_count(&self) -> usize {
        self.inputs.iter().product()
    }

    pub fn outcome_count(&self) -> usize {
        self.outputs.iter().product()
    }

    pub fn input_flat(&self, x: &[usize]) -> usize {
        debug_assert_eq!(x.len(), self.parties);
        x.iter()
            .zip(self.inputs.iter())
            .fold(0, |acc, (&xi, &mi)| acc * mi + xi)
    }

    pub fn outcome_flat(&self, a: &[usize]) -> usize {
        debug_assert_eq!(a.len(), self.parties);
        a.iter()
            .zip(self.outputs.iter())
            .fold(0, |acc, (&ai, &di)| acc * di + ai)
    }

    pub fn contains_cell(&self, a: &[usize], x: &[usize]) -> bool {
        a.len() == self.parties
            && x.len() == self.parties
            && a.iter().zip(self.outputs.iter()).all(|(&ai, &di)| ai < di)
            && x.iter().zip(self.inputs.iter()).all(|(&xi, &mi)| xi < mi)
    }
}

/// Full conditional probability table P(a1..an | x1..xn).
///
/// Storage is dense, outcome-major within input-major blocks: the entry for
/// `(a, x)` lives at `input_flat(x) * outcome_count() + outcome_flat(a)`,
/// party 0 being the most significant digit of both flattenings.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    pub scenario: Scenario,
    table: Vec<f64>,
}

/// Per-check findings of `validate_behavior`; empty iff valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Behavior {
    pub fn new(scenario: Scenario, table: Vec<f64>) -> Result<Self, ScenarioError> {
        let want = scenario.input_count() * scenario.outcome_count();
        if table.len() != want {
            return Err(ScenarioError::BadTable {
                got: table.len(),
                want,
            });
        }
        Ok(Self { scenario, table })
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let per_input = scenario.outcome_count();
        let table = vec![1.0 / per_input as f64; scenario.input_count() * per_input];
        Self { scenario, table }
    }

    pub fn prob(&self, a: &[usize], x: &[usize]) -> f64 {
        self.table[self.scenario.input_flat(x) * self.scenario.outcome_count()
            + self.scenario.outcome_flat(a)]
    }

    pub fn set_prob(&mut self, a: &[usize], x: &[usize], p: f64) {
        let idx = self.scenario.input_flat(x) * self.scenario.outcome_count()
            + self.scenario.outcome_flat(a);
        self.table[idx] = p;
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// Check nonnegativity and per-input normalization.
pub fn validate_behavior(b: &Behavior) -> ValidationReport {
    let mut report = ValidationReport::default();
    let outs = b.scenario.outcome_tuples();
    for x in b.scenario.input_tuples() {
        let mut sum = 0.0;
        for a in &outs {
            let p = b.prob(a, &x);
            if p < -1e-12 {
                report
                    .violations
                    .push(format!("negative entry P({a:?}|{x:?}) = {p:.3e}"));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            report
                .violations
                .push(format!("input {x:?} sums to {sum:.12} (expected 1)"));
        }
    }
    report
}

/// Marginal behavior over `kept` parties, with the inputs of the dropped
/// parties pinned to `inputs_of_dropped` (indexed like the full party list).
pub fn marginal(
    b: &Behavior,
    kept: &[usize],
    inputs_of_dropped: &[usize],
) -> Result<Behavior, ScenarioError> {
    let n = b.scenario.parties();
    if kept.is_empty() || kept.iter().any(|&p| p >= n) {
        return Err(ScenarioError::BadSubset);
    }
    let mut sorted = kept.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != kept.len() {
        return Err(ScenarioError::BadSubset);
    }
    if inputs_of_dropped.len() != n {
        return Err(ScenarioError::BadSubset);
    }
    let kept = sorted;
    let sub = Scenario::new(
        kept.iter().map(|&p| b.scenario.inputs()[p]).collect(),
        kept.iter().map(|&p| b.scenario.outputs()[p]).collect(),
    )?;
    let dropped: Vec<usize> = (0..n).filter(|p| !kept.contains(p)).collect();
    let mut table = vec![0.0; sub.input_count() * sub.outcome_count()];
    let dropped_outs: Vec<Vec<usize>> = multi_indices(
        &dropped
            .iter()
            .map(|&p| b.scenario.outputs()[p])
            .collect::<Vec<_>>(),
    );
    for (xi, xs) in sub.input_tuples().iter().enumerate() {
        let mut full_x = vec![0usize; n];
        for (slot, &p) in kept.iter().enumerate() {
            full_x[p] = xs[slot];
        }
        for &p in &dropped {
            full_x[p] = inputs_of_dropped[p];
        }
        for (ai, asub) in sub.outcome_tuples().iter().enumerate() {
            let mut acc = 0.0;
            for dout in &dropped_outs {
                let mut full_a = vec![0usize; n];
                for (slot, &p) in kept.iter().enumerate() {
                    full_a[p] = asub[slot];
                }
                for (slot, &p) in dropped.iter().enumerate() {
                    full_a[p] = dout[slot];
                }
                acc += b.prob(&full_a, &full_x);
            }
            table[xi * sub.outcome_count() + ai] = acc;
        }
    }
    Behavior::new(sub, table)
}

/// Maximum deviation of any marginal from input-independence: the largest
/// spread, over kept subsets and cells, of the marginal across all dropped
/// input assignments. At or below ~1e-9 the behavior is no-signaling.
pub fn check_no_signaling(b: &Behavior) -> f64 {
    let n = b.scenario.parties();
    if n == 1 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    // All nonempty proper subsets of parties.
    for mask in 1..(1u32 << n) - 1 {
        let kept: Vec<usize> = (0..n).filter(|p| mask & (1 << p) != 0).collect();
        let dropped: Vec<usize> = (0..n).filter(|p| mask & (1 << p) == 0).collect();
        let dropped_dims: Vec<usize> = dropped.iter().map(|&p| b.scenario.inputs()[p]).collect();
        let assignments = multi_indices(&dropped_dims);
        let mut lo: Vec<f64> = Vec::new();
        let mut hi: Vec<f64> = Vec::new();
        for assign in &assignments {
            let mut pin = vec![0usize; n];
            for (slot, &p) in dropped.iter().enumerate() {
                pin[p] = assign[slot];
            }
            let m = marginal(b, &kept, &pin).expect("subset is valid");
            if lo.is_empty() {
                lo = m.table().to_vec();
                hi = m.table().to_vec();
            } else {
                for (idx, &v) in m.table().iter().enumerate() {
                    lo[idx] = lo[idx].min(v);
                    hi[idx] = hi[idx].max(v);
                }
            }
        }
        for (l, h) in lo.iter().zip(hi.iter()) {
            worst = worst.max(h - l);
        }
    }
    worst
}

/// Sparse linear functional over behavior cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    pub scenario: Scenario,
    coefficients: BTreeMap<(usize, usize), f64>,
}

impl BellFunctional {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn add_coefficient(
        &mut self,
        a: &[usize],
        x: &[usize],
        coeff: f64,
    ) -> Result<(), ScenarioError> {
        if !self.scenario.contains_cell(a, x) {
            return Err(ScenarioError::BadCell(a.to_vec(), x.to_vec()));
        }
        let key = (self.scenario.input_flat(x), self.scenario.outcome_flat(a));
        let entry = self.coefficients.entry(key).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.coefficients.remove(&key);
        }
        Ok(())
    }

    /// Iterate (input tuple, outcome tuple, coefficient) in a fixed order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>, f64)> + '_ {
        let ins = self.scenario.input_tuples();
        let outs = self.scenario.outcome_tuples();
        self.coefficients
            .iter()
            .map(move |(&(xf, af), &c)| (ins[xf].clone(), outs[af].clone(), c))
    }

    pub fn coefficient_count(&self) -> usize {
        self.coefficients.len()
    }
}

/// Sum of coefficient * table entry over the functional's support.
pub fn evaluate_functional(f: &BellFunctional, b: &Behavior) -> Result<f64, ScenarioError> {
    if f.scenario != b.scenario {
        return Err(ScenarioError::ScenarioMismatch);
    }
    let oc = f.scenario.outcome_count();
    Ok(f.coefficients
        .iter()
        .map(|(&(xf, af), &c)| c * b.table()[xf * oc + af])
        .sum())
}

/// Exact maximum of the functional over deterministic local strategies.
///
/// Each party's strategy is a response function from inputs to outcomes;
/// the product of `d_i^{m_i}` strategy counts is capped at 1e7.
pub fn classical_bound(f: &BellFunctional) -> Result<f64, ScenarioError> {
    let s = &f.scenario;
    let n = s.parties();
    let mut per_party: Vec<usize> = Vec::with_capacity(n);
    let mut estimate = 1.0f64;
    for p in 0..n {
        let count = (s.outputs()[p] as f64).powi(s.inputs()[p] as i32);
        estimate *= count;
        per_party.push(count as usize);
    }
    if estimate > 1e7 {
        return Err(ScenarioError::EnumerationTooLarge { estimate });
    }
    let input_tuples = s.input_tuples();
    let mut best = f64::NEG_INFINITY;
    for strat in multi_indices(&per_party) {
        let mut value = 0.0;
        for x in &input_tuples {
            // Response of party p to input x[p] under strategy strat[p],
            // little-endian digit extraction in base d_p.
            let mut a = vec![0usize; n];
            for p in 0..n {
                let d = s.outputs()[p];
                a[p] = (strat[p] / d.pow(x[p] as u32)) % d;
            }
            if let Some(&c) = f.coefficients.get(&(s.input_flat(x), s.outcome_flat(&a))) {
                value += c;
            }
        }
        if value > best {
            best = value;
        }
    }
    Ok(best)
}

/// Correlator-form functionals, expanded to probability coefficients with the
/// binary outcome encoding `outcome j -> (-1)^j` (0-based).
///
/// chsh:   `<A1B1> + <A1B2> + <A2B1> - <A2B2>`
/// mermin: `<A1B1C2> + <A1B2C1> + <A2B1C1> - <A2B2C2>`
pub fn canonical_functional(name: &str) -> Result<BellFunctional, ScenarioError> {
    match name {
        "chsh" => {
            let s = Scenario::symmetric(2, 2, 2)?;
            let mut f = BellFunctional::new(s);
            for (x, y, sign) in [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0f64)] {
                for a in 0..2usize {
                    for b in 0..2usize {
                        let v = sign * if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                        f.add_coefficient(&[a, b], &[x, y], v)?;
                    }
                }
            }
            Ok(f)
        }
        "mermin" => {
            let s = Scenario::symmetric(3, 2, 2)?;
            let mut f = BellFunctional::new(s);
            for (x, y, z, sign) in [
                (0, 0, 1, 1.0),
                (0, 1, 0, 1.0),
                (1, 0, 0, 1.0),
                (1, 1, 1, -1.0f64),
            ] {
                for a in 0..2usize {
                    for b in 0..2usize {
                        for c in 0..2usize {
                            let v = sign * if (a + b + c) % 2 == 0 { 1.0 } else { -1.0 };
                            f.add_coefficient(&[a, b, c], &[x, y, z], v)?;
                        }
                    }
                }
            }
            Ok(f)
        }
        other => Err(ScenarioError::UnknownFunctional(other.to_string())),
    }
}

/// The I3322 functional in Collins-Gisin form, classical bound 0:
///
/// P(00|11)+P(00|12)+P(00|13)+P(00|21)+P(00|22)-P(00|23)+P(00|31)-P(00|32)
///   - P_A(0|1) - 2 P_B(0|1) - P_B(0|2)
///
/// Marginal terms are anchored at the other party's first input, which is
/// immaterial on no-signaling behaviors.
pub fn i3322_functional() -> BellFunctional {
    let s = Scenario::symmetric(2, 3, 2).expect("static scenario");
    let mut f = BellFunctional::new(s);
    let joint = [
        (0, 0, 1.0),
        (0, 1, 1.0),
        (0, 2, 1.0),
        (1, 0, 1.0),
        (1, 1, 1.0),
        (1, 2, -1.0),
        (2, 0, 1.0),
        (2, 1, -1.0f64),
    ];
    for (x, y, c) in joint {
        f.add_coefficient(&[0, 0], &[x, y], c).expect("valid cell");
    }
    // -P_A(0|1): sum over Bob's outcomes at y = 0.
    for b in 0..2 {
        f.add_coefficient(&[0, b], &[0, 0], -1.0)
            .expect("valid cell");
    }
    // -2 P_B(0|1) and -P_B(0|2): sums over Alice's outcomes at x = 0.
    for a in 0..2 {
        f.add_coefficient(&[a, 0], &[0, 0], -2.0)
            .expect("valid cell");
        f.add_coefficient(&[a, 0], &[0, 1], -1.0)
            .expect("valid cell");
    }
    f
}

/// The PR box: P(ab|xy) = 1/2 when a xor b = x and y, else 0.
pub fn pr_box() -> Behavior {
    let s = Scenario::symmetric(2, 2, 2).expect("static scenario");
    let mut b = Behavior::new(s.clone(), vec![0.0; 16]).expect("sized table");
    for x in 0..2usize {
        for y in 0..2usize {
            for a in 0..2usize {
                for o in 0..2usize {
                    if a ^ o == x & y {
                        b.set_prob(&[a, o], &[x, y], 0.5);
                    }
                }
            }
        }
    }
    b
}
