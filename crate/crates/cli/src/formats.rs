//! Text file formats: Bell functionals (.fn), quantum models (.qm),
//! generalized models (.gm) and moment matrices (.mm).
//!
//! All formats are whitespace-separated with `#` line comments and 1-based
//! party/input/outcome indices. Complex data is interleaved re/im pairs.

use std::fmt::Write as _;

use num_complex::Complex64;

use corrset_core::moment::{Letter, MomentMatrix, RelaxationLevel};
use corrset_core::quantum::{ProjectorAssembly, QuantumModel, QuantumState};
use corrset_core::scenario::{BellFunctional, Scenario};
use corrset_core::tensor::{ComplexMatrix, PartyDims};
use corrset_core::theorem::GeneralizedModel;

/// Parse failure with position information.
#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

/// Tokenize into (line_number, tokens) with comments stripped.
fn tokenize(text: &str) -> Vec<(usize, Vec<String>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            let body = l.split('#').next().unwrap_or("");
            (
                i + 1,
                body.split_whitespace().map(|s| s.to_string()).collect(),
            )
        })
        .filter(|(_, t): &(usize, Vec<String>)| !t.is_empty())
        .collect()
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, ParseError> {
    tok.parse()
        .map_err(|_| err(line, format!("expected {what}, found `{tok}`")))
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64, ParseError> {
    tok.parse()
        .map_err(|_| err(line, format!("expected {what}, found `{tok}`")))
}

/// Streaming reader over tokenized numeric payloads that may span lines.
struct NumberStream<'a> {
    rows: &'a [(usize, Vec<String>)],
    row: usize,
    col: usize,
}

impl<'a> NumberStream<'a> {
    fn new(rows: &'a [(usize, Vec<String>)]) -> Self {
        Self {
            rows,
            row: 0,
            col: 0,
        }
    }

    fn line(&self) -> usize {
        self.rows
            .get(self.row.min(self.rows.len().saturating_sub(1)))
            .map(|r| r.0)
            .unwrap_or(0)
    }

    fn peek_word(&self) -> Option<&str> {
        self.rows
            .get(self.row)
            .and_then(|r| r.1.get(self.col))
            .map(|s| s.as_str())
    }

    fn next_token(&mut self) -> Option<(usize, String)> {
        while self.row < self.rows.len() {
            if self.col < self.rows[self.row].1.len() {
                let tok = self.rows[self.row].1[self.col].clone();
                let line = self.rows[self.row].0;
                self.col += 1;
                return Some((line, tok));
            }
            self.row += 1;
            self.col = 0;
        }
        None
    }

    fn next_f64(&mut self, what: &str) -> Result<f64, ParseError> {
        match self.next_token() {
            Some((line, tok)) => parse_f64(&tok, line, what),
            None => Err(err(
                self.line(),
                format!("unexpected end of file, expected {what}"),
            )),
        }
    }

    fn next_usize(&mut self, what: &str) -> Result<usize, ParseError> {
        match self.next_token() {
            Some((line, tok)) => parse_usize(&tok, line, what),
            None => Err(err(
                self.line(),
                format!("unexpected end of file, expected {what}"),
            )),
        }
    }

    fn complex_vec(&mut self, count: usize, what: &str) -> Result<Vec<Complex64>, ParseError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let re = self.next_f64(what)?;
            let im = self.next_f64(what)?;
            out.push(Complex64::new(re, im));
        }
        Ok(out)
    }
}

/// `scenario n m1..mn d1..dn`, then `a1..an x1..xn coeff` rows.
pub fn parse_functional(text: &str) -> Result<BellFunctional, ParseError> {
    let rows = tokenize(text);
    let mut stream = NumberStream::new(&rows);
    match stream.next_token() {
        Some((_, ref tok)) if tok == "scenario" => {}
        Some((line, tok)) => return Err(err(line, format!("expected `scenario`, found `{tok}`"))),
        None => return Err(err(0, "empty functional file")),
    }
    let n = stream.next_usize("party count")?;
    if n == 0 || n > 16 {
        return Err(err(stream.line(), "party count must be in 1..=16"));
    }
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for _ in 0..n {
        inputs.push(stream.next_usize("input cardinality")?);
    }
    for _ in 0..n {
        outputs.push(stream.next_usize("output cardinality")?);
    }
    let scenario = Scenario::new(inputs, outputs)
        .map_err(|e| err(stream.line(), format!("bad scenario: {e}")))?;
    let mut f = BellFunctional::new(scenario);
    loop {
        let first = match stream.next_token() {
            None => break,
            Some(t) => t,
        };
        let line = first.0;
        let mut a = vec![parse_usize(&first.1, line, "outcome index")?];
        for _ in 1..n {
            a.push(stream.next_usize("outcome index")?);
        }
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            x.push(stream.next_usize("input index")?);
        }
        let coeff = stream.next_f64("coefficient")?;
        let a0: Vec<usize> = a
            .iter()
            .map(|&v| {
                v.checked_sub(1)
                    .ok_or_else(|| err(line, "indices are 1-based"))
            })
            .collect::<Result<_, _>>()?;
        let x0: Vec<usize> = x
            .iter()
            .map(|&v| {
                v.checked_sub(1)
                    .ok_or_else(|| err(line, "indices are 1-based"))
            })
            .collect::<Result<_, _>>()?;
        f.add_coefficient(&a0, &x0, coeff)
            .map_err(|e| err(line, format!("{e}")))?;
    }
    Ok(f)
}

pub fn write_functional(f: &BellFunctional) -> String {
    let mut out = String::new();
    let s = &f.scenario;
    write!(out, "scenario {}", s.parties()).unwrap();
    for m in s.inputs() {
        write!(out, " {m}").unwrap();
    }
    for d in s.outputs() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    for (x, a, c) in f.terms() {
        for ai in &a {
            write!(out, "{} ", ai + 1).unwrap();
        }
        for xi in &x {
            write!(out, "{} ", xi + 1).unwrap();
        }
        writeln!(out, "{c}").unwrap();
    }
    out
}

fn fmt_complex_row(out: &mut String, row: &[Complex64]) {
    let mut first = true;
    for z in row {
        if !first {
            out.push(' ');
        }
        write!(out, "{} {}", z.re, z.im).unwrap();
        first = false;
    }
    out.push('\n');
}

/// `dims d1..dn`, `state` + amplitudes, then `proj i x a` + matrix blocks.
/// The scenario's input/output cardinalities are inferred from the proj
/// headers, which must cover a full grid per party.
pub fn parse_quantum_model(text: &str) -> Result<QuantumModel, ParseError> {
    let rows = tokenize(text);
    let mut stream = NumberStream::new(&rows);
    match stream.next_token() {
        Some((_, ref tok)) if tok == "dims" => {}
        Some((line, tok)) => return Err(err(line, format!("expected `dims`, found `{tok}`"))),
        None => return Err(err(0, "empty model file")),
    }
    let mut dims_list = Vec::new();
    while let Some(tok) = stream.peek_word() {
        if tok == "state" {
            break;
        }
        dims_list.push(stream.next_usize("local dimension")?);
    }
    if dims_list.is_empty() {
        return Err(err(stream.line(), "dims needs at least one entry"));
    }
    let dims = PartyDims::new(dims_list.clone()).map_err(|e| err(stream.line(), format!("{e}")))?;
    match stream.next_token() {
        Some((_, ref tok)) if tok == "state" => {}
        other => {
            return Err(err(
                stream.line(),
                format!("expected `state`, found {other:?}"),
            ))
        }
    }
    let amplitudes = stream.complex_vec(dims.total(), "state amplitude")?;
    // proj blocks.
    let n = dims.party_count();
    let mut blocks: Vec<((usize, usize, usize), ComplexMatrix)> = Vec::new();
    loop {
        match stream.next_token() {
            None => break,
            Some((line, ref tok)) if tok == "proj" => {
                let party = stream.next_usize("party index")?;
                let input = stream.next_usize("input index")?;
                let outcome = stream.next_usize("outcome index")?;
                if party == 0 || party > n {
                    return Err(err(line, format!("party {party} out of range 1..={n}")));
                }
                let d = dims.dim(party - 1);
                let data = stream.complex_vec(d * d, "projector entry")?;
                blocks.push((
                    (party - 1, input - 1, outcome - 1),
                    ComplexMatrix {
                        rows: d,
                        cols: d,
                        data,
                    },
                ));
                if input == 0 || outcome == 0 {
                    return Err(err(line, "proj indices are 1-based"));
                }
            }
            Some((line, tok)) => return Err(err(line, format!("expected `proj`, found `{tok}`"))),
        }
    }
    // Infer per-party input/output counts and check the grid is complete.
    let mut inputs = vec![0usize; n];
    let mut outputs = vec![0usize; n];
    for ((p, x, a), _) in &blocks {
        inputs[*p] = inputs[*p].max(x + 1);
        outputs[*p] = outputs[*p].max(a + 1);
    }
    if inputs.contains(&0) {
        return Err(err(0, "every party needs at least one proj block"));
    }
    let scenario =
        Scenario::new(inputs.clone(), outputs.clone()).map_err(|e| err(0, format!("{e}")))?;
    let mut projectors: Vec<Vec<Vec<Option<ComplexMatrix>>>> = (0..n)
        .map(|p| vec![vec![None; outputs[p]]; inputs[p]])
        .collect();
    for ((p, x, a), m) in blocks {
        if projectors[p][x][a].is_some() {
            return Err(err(
                0,
                format!("duplicate proj {} {} {}", p + 1, x + 1, a + 1),
            ));
        }
        projectors[p][x][a] = Some(m);
    }
    let mut full = Vec::with_capacity(n);
    for (p, per_input) in projectors.into_iter().enumerate() {
        let mut fi = Vec::with_capacity(per_input.len());
        for (x, per_outcome) in per_input.into_iter().enumerate() {
            let mut fo = Vec::with_capacity(per_outcome.len());
            for (a, m) in per_outcome.into_iter().enumerate() {
                match m {
                    Some(m) => fo.push(m),
                    None => {
                        return Err(err(
                            0,
                            format!("missing proj {} {} {}", p + 1, x + 1, a + 1),
                        ))
                    }
                }
            }
            fi.push(fo);
        }
        full.push(fi);
    }
    let state = QuantumState::new(dims.clone(), amplitudes).map_err(|e| err(0, format!("{e}")))?;
    let assembly =
        ProjectorAssembly::new(scenario, dims, full).map_err(|e| err(0, format!("{e}")))?;
    QuantumModel::new(state, assembly).map_err(|e| err(0, format!("{e}")))
}

pub fn write_quantum_model(m: &QuantumModel) -> String {
    let mut out = String::new();
    write!(out, "dims").unwrap();
    for d in m.state.dims.dims() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    out.push_str("state\n");
    fmt_complex_row(&mut out, &m.state.amplitudes);
    let s = m.scenario();
    for p in 0..s.parties() {
        for x in 0..s.inputs()[p] {
            for a in 0..s.outputs()[p] {
                writeln!(out, "proj {} {} {}", p + 1, x + 1, a + 1).unwrap();
                let e = m.assembly.projector(p, x, a);
                for r in 0..e.rows {
                    fmt_complex_row(&mut out, &e.data[r * e.cols..(r + 1) * e.cols]);
                }
            }
        }
    }
    out
}

/// `dim D`, `state` + amplitudes, then `op i x a` + D x D blocks; scenario
/// inferred from the op headers.
pub fn parse_generalized_model(text: &str) -> Result<GeneralizedModel, ParseError> {
    let rows = tokenize(text);
    let mut stream = NumberStream::new(&rows);
    match stream.next_token() {
        Some((_, ref tok)) if tok == "dim" => {}
        Some((line, tok)) => return Err(err(line, format!("expected `dim`, found `{tok}`"))),
        None => return Err(err(0, "empty model file")),
    }
    let dim = stream.next_usize("space dimension")?;
    if dim == 0 || dim > 512 {
        return Err(err(stream.line(), "dim must be in 1..=512"));
    }
    match stream.next_token() {
        Some((_, ref tok)) if tok == "state" => {}
        other => {
            return Err(err(
                stream.line(),
                format!("expected `state`, found {other:?}"),
            ))
        }
    }
    let state = stream.complex_vec(dim, "state amplitude")?;
    let mut blocks: Vec<((usize, usize, usize), ComplexMatrix)> = Vec::new();
    loop {
        match stream.next_token() {
            None => break,
            Some((line, ref tok)) if tok == "op" => {
                let party = stream.next_usize("party index")?;
                let input = stream.next_usize("input index")?;
                let outcome = stream.next_usize("outcome index")?;
                if party == 0 || input == 0 || outcome == 0 {
                    return Err(err(line, "op indices are 1-based"));
                }
                let data = stream.complex_vec(dim * dim, "operator entry")?;
                blocks.push((
                    (party - 1, input - 1, outcome - 1),
                    ComplexMatrix {
                        rows: dim,
                        cols: dim,
                        data,
                    },
                ));
            }
            Some((line, tok)) => return Err(err(line, format!("expected `op`, found `{tok}`"))),
        }
    }
    let n = blocks.iter().map(|((p, _, _), _)| p + 1).max().unwrap_or(0);
    if n == 0 {
        return Err(err(0, "model needs at least one op block"));
    }
    let mut inputs = vec![0usize; n];
    let mut outputs = vec![0usize; n];
    for ((p, x, a), _) in &blocks {
        inputs[*p] = inputs[*p].max(x + 1);
        outputs[*p] = outputs[*p].max(a + 1);
    }
    let scenario =
        Scenario::new(inputs.clone(), outputs.clone()).map_err(|e| err(0, format!("{e}")))?;
    let mut table: Vec<Vec<Vec<Option<ComplexMatrix>>>> = (0..n)
        .map(|p| vec![vec![None; outputs[p]]; inputs[p]])
        .collect();
    for ((p, x, a), m) in blocks {
        if table[p][x][a].is_some() {
            return Err(err(
                0,
                format!("duplicate op {} {} {}", p + 1, x + 1, a + 1),
            ));
        }
        table[p][x][a] = Some(m);
    }
    let mut operators = Vec::with_capacity(n);
    for (p, per_input) in table.into_iter().enumerate() {
        let mut fi = Vec::with_capacity(per_input.len());
        for (x, per_outcome) in per_input.into_iter().enumerate() {
            let mut fo = Vec::with_capacity(per_outcome.len());
            for (a, m) in per_outcome.into_iter().enumerate() {
                match m {
                    Some(m) => fo.push(m),
                    None => {
                        return Err(err(0, format!("missing op {} {} {}", p + 1, x + 1, a + 1)))
                    }
                }
            }
            fi.push(fo);
        }
        operators.push(fi);
    }
    GeneralizedModel::new(scenario, dim, state, operators, None).map_err(|e| err(0, format!("{e}")))
}

pub fn write_generalized_model(m: &GeneralizedModel) -> String {
    let mut out = String::new();
    writeln!(out, "dim {}", m.dim).unwrap();
    out.push_str("state\n");
    fmt_complex_row(&mut out, &m.state);
    for p in 0..m.scenario.parties() {
        for x in 0..m.scenario.inputs()[p] {
            for a in 0..m.scenario.outputs()[p] {
                writeln!(out, "op {} {} {}", p + 1, x + 1, a + 1).unwrap();
                let e = m.operator(p, x, a);
                for r in 0..e.rows {
                    fmt_complex_row(&mut out, &e.data[r * e.cols..(r + 1) * e.cols]);
                }
            }
        }
    }
    out
}

fn word_text(w: &[Letter]) -> String {
    if w.is_empty() {
        "1".to_string()
    } else {
        w.iter()
            .map(|l| format!("{}:{}:{}", l.party + 1, l.input + 1, l.outcome + 1))
            .collect::<Vec<_>>()
            .join(".")
    }
}

fn parse_word(tok: &str, line: usize) -> Result<Vec<Letter>, ParseError> {
    if tok == "1" {
        return Ok(Vec::new());
    }
    tok.split('.')
        .map(|piece| {
            let parts: Vec<&str> = piece.split(':').collect();
            if parts.len() != 3 {
                return Err(err(line, format!("bad letter `{piece}` (want p:x:a)")));
            }
            let p = parse_usize(parts[0], line, "party")?;
            let x = parse_usize(parts[1], line, "input")?;
            let a = parse_usize(parts[2], line, "outcome")?;
            if p == 0 || x == 0 || a == 0 {
                return Err(err(line, "letter indices are 1-based"));
            }
            Ok(Letter {
                party: p - 1,
                input: x - 1,
                outcome: a - 1,
            })
        })
        .collect()
}

/// `scenario ...`, `level ...`, `words N` + N word lines, `gamma` + N rows.
pub fn parse_moment_matrix(text: &str) -> Result<MomentMatrix, ParseError> {
    let rows = tokenize(text);
    let mut stream = NumberStream::new(&rows);
    match stream.next_token() {
        Some((_, ref tok)) if tok == "scenario" => {}
        Some((line, tok)) => return Err(err(line, format!("expected `scenario`, found `{tok}`"))),
        None => return Err(err(0, "empty moment matrix file")),
    }
    let n_parties = stream.next_usize("party count")?;
    let mut inputs = Vec::with_capacity(n_parties);
    let mut outputs = Vec::with_capacity(n_parties);
    for _ in 0..n_parties {
        inputs.push(stream.next_usize("input cardinality")?);
    }
    for _ in 0..n_parties {
        outputs.push(stream.next_usize("output cardinality")?);
    }
    let scenario =
        Scenario::new(inputs, outputs).map_err(|e| err(stream.line(), format!("{e}")))?;
    match stream.next_token() {
        Some((_, ref tok)) if tok == "level" => {}
        other => {
            return Err(err(
                stream.line(),
                format!("expected `level`, found {other:?}"),
            ))
        }
    }
    let (line, level_tok) = stream
        .next_token()
        .ok_or_else(|| err(0, "missing level name"))?;
    let level = RelaxationLevel::parse(&level_tok)
        .ok_or_else(|| err(line, format!("unknown level `{level_tok}`")))?;
    match stream.next_token() {
        Some((_, ref tok)) if tok == "words" => {}
        other => {
            return Err(err(
                stream.line(),
                format!("expected `words`, found {other:?}"),
            ))
        }
    }
    let count = stream.next_usize("word count")?;
    let mut words = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, tok) = stream.next_token().ok_or_else(|| err(0, "missing word"))?;
        words.push(parse_word(&tok, line)?);
    }
    match stream.next_token() {
        Some((_, ref tok)) if tok == "gamma" => {}
        other => {
            return Err(err(
                stream.line(),
                format!("expected `gamma`, found {other:?}"),
            ))
        }
    }
    let data = stream.complex_vec(count * count, "gamma entry")?;
    Ok(MomentMatrix {
        scenario,
        level,
        words,
        gamma: ComplexMatrix {
            rows: count,
            cols: count,
            data,
        },
    })
}

pub fn write_moment_matrix(mm: &MomentMatrix) -> String {
    let mut out = String::new();
    let s = &mm.scenario;
    write!(out, "scenario {}", s.parties()).unwrap();
    for m in s.inputs() {
        write!(out, " {m}").unwrap();
    }
    for d in s.outputs() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    let level = match mm.level {
        RelaxationLevel::Npa1 => "npa1",
        RelaxationLevel::Npa2 => "npa2",
        RelaxationLevel::AlmostQuantum => "aqc",
    };
    writeln!(out, "level {level}").unwrap();
    writeln!(out, "words {}", mm.words.len()).unwrap();
    for w in &mm.words {
        writeln!(out, "{}", word_text(w)).unwrap();
    }
    out.push_str("gamma\n");
    for r in 0..mm.gamma.rows {
        fmt_complex_row(
            &mut out,
            &mm.gamma.data[r * mm.gamma.cols..(r + 1) * mm.gamma.cols],
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use corrset_core::quantum::chsh_optimal_model;
    use corrset_core::scenario::canonical_functional;

    #[test]
    fn functional_roundtrip() {
        let f = canonical_functional("chsh").unwrap();
        let text = write_functional(&f);
        let back = parse_functional(&text).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn functional_parse_error_carries_line() {
        let text = "scenario 2 2 2 2 2\n1 1 1 1 bogus\n";
        let e = parse_functional(text).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("bogus"));
    }

    #[test]
    fn quantum_model_roundtrip() {
        let m = chsh_optimal_model();
        let text = write_quantum_model(&m);
        let back = parse_quantum_model(&text).unwrap();
        assert_eq!(back.state.amplitudes, m.state.amplitudes);
        for p in 0..2 {
            for x in 0..2 {
                for a in 0..2 {
                    assert_eq!(
                        back.assembly.projector(p, x, a).data,
                        m.assembly.projector(p, x, a).data
                    );
                }
            }
        }
    }

    #[test]
    fn generalized_model_roundtrip() {
        let g =
            corrset_core::theorem::GeneralizedModel::from_quantum(&chsh_optimal_model()).unwrap();
        let text = write_generalized_model(&g);
        let back = parse_generalized_model(&text).unwrap();
        assert_eq!(back.dim, g.dim);
        assert_eq!(back.state, g.state);
        assert_eq!(back.operator(1, 1, 0).data, g.operator(1, 1, 0).data);
    }

    #[test]
    fn moment_matrix_roundtrip() {
        use corrset_core::moment::{maximize_over_aqc, validate_moment_matrix};
        use corrset_sdp::SolveOptions;
        let f = canonical_functional("chsh").unwrap();
        let bound = maximize_over_aqc(&f, &SolveOptions::default()).unwrap();
        let text = write_moment_matrix(&bound.moment_matrix);
        let back = parse_moment_matrix(&text).unwrap();
        assert_eq!(back.words, bound.moment_matrix.words);
        assert_eq!(back.gamma.data, bound.moment_matrix.gamma.data);
        assert!(validate_moment_matrix(&back).unwrap().is_valid());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = "dims 2 2\nstate\n1 0 0 0";
        assert!(parse_quantum_model(text).is_err());
    }
}
