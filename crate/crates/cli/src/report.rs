//! Run reports: a command echo, input digests, a numeric results table and
//! per-check pass/fail lines where every asserted number carries its
//! tolerance. The machine-readable form (`--out`) excludes wall-clock time
//! so reports reproduce bit-identically for a fixed seed.

use std::fmt::Write as _;
use std::time::Duration;

/// Direction of a check comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// measured <= tolerance
    AtMost,
    /// measured >= tolerance
    AtLeast,
    /// measured == tolerance exactly (bitwise on the printed value)
    Exactly,
}

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub kind: CheckKind,
    pub pass: bool,
}

impl CheckLine {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            kind: CheckKind::AtMost,
            pass: measured <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            kind: CheckKind::AtLeast,
            pass: measured >= tolerance,
        }
    }

    pub fn exactly(name: impl Into<String>, measured: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance: expected,
            kind: CheckKind::Exactly,
            pass: measured == expected,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub command: String,
    /// (label, fnv1a-64 digest) per input file.
    pub inputs: Vec<(String, String)>,
    /// Free-form numeric results (key, value).
    pub results: Vec<(String, String)>,
    pub checks: Vec<CheckLine>,
    pub duration: Duration,
    /// Extra notes surfaced verbatim (for example validation violations).
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn result(&mut self, key: impl Into<String>, value: impl std::fmt::Display) {
        self.results.push((key.into(), value.to_string()));
    }

    pub fn result_f64(&mut self, key: impl Into<String>, value: f64) {
        self.results.push((key.into(), format!("{value:.12e}")));
    }

    pub fn check(&mut self, line: CheckLine) {
        self.checks.push(line);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render_human(&self) -> String {
        let mut out = String::new();
        writeln!(out, "command: {}", self.command).unwrap();
        for (label, digest) in &self.inputs {
            writeln!(out, "input: {label} fnv1a64={digest}").unwrap();
        }
        for (k, v) in &self.results {
            writeln!(out, "{k} = {v}").unwrap();
        }
        for c in &self.checks {
            let rel = match c.kind {
                CheckKind::AtMost => "<=",
                CheckKind::AtLeast => ">=",
                CheckKind::Exactly => "==",
            };
            writeln!(
                out,
                "[{}] {}: measured {:.12e} {} {:.12e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                rel,
                c.tolerance
            )
            .unwrap();
        }
        for n in &self.notes {
            writeln!(out, "note: {n}").unwrap();
        }
        writeln!(out, "elapsed: {:.3}s", self.duration.as_secs_f64()).unwrap();
        writeln!(
            out,
            "verdict: {}",
            if self.all_pass() { "PASS" } else { "FAIL" }
        )
        .unwrap();
        out
    }

    /// key=value lines, deterministic for a fixed seed (no wall clock).
    pub fn render_machine(&self) -> String {
        let mut out = String::new();
        writeln!(out, "command={}", self.command).unwrap();
        for (label, digest) in &self.inputs {
            writeln!(out, "input.{label}={digest}").unwrap();
        }
        for (k, v) in &self.results {
            writeln!(out, "{k}={v}").unwrap();
        }
        for c in &self.checks {
            let rel = match c.kind {
                CheckKind::AtMost => "le",
                CheckKind::AtLeast => "ge",
                CheckKind::Exactly => "eq",
            };
            writeln!(
                out,
                "check.{}={} measured={:.17e} {rel} tol={:.17e}",
                c.name,
                if c.pass { "pass" } else { "fail" },
                c.measured,
                c.tolerance
            )
            .unwrap();
        }
        for (i, n) in self.notes.iter().enumerate() {
            writeln!(out, "note.{i}={n}").unwrap();
        }
        writeln!(
            out,
            "verdict={}",
            if self.all_pass() { "pass" } else { "fail" }
        )
        .unwrap();
        out
    }
}

/// FNV-1a 64-bit digest, hex-encoded.
pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(fnv1a64(b""), "cbf29ce484222325");
        assert_eq!(fnv1a64(b"corrset"), fnv1a64(b"corrset"));
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
    }

    #[test]
    fn machine_render_excludes_duration() {
        let mut r = RunReport::new("demo tsirelson");
        r.duration = Duration::from_millis(123);
        r.result_f64("value", 2.828);
        r.check(CheckLine::at_least("lower", 2.828, 2.0));
        let text = r.render_machine();
        assert!(!text.contains("elapsed"));
        assert!(text.contains("check.lower=pass"));
    }
}
