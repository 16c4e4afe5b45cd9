//! corrset: correlation-set bounds and symmetry verification.
//!
//! Exit codes: 0 all checks pass, 1 a check or reproduction failed,
//! 2 input/usage error, 3 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use corrset_cli::commands::{self, CliError, Flags, ALL_CHECKS};
use corrset_core::moment::RelaxationLevel;

const USAGE: &str = "\
corrset — correlation-set bounds and symmetry verification

USAGE:
  corrset bound <classical|quantum-seesaw|npa1|npa2|aqc> <file.fn> [flags]
  corrset verify <file.qm|file.gm> [--checks a,b,...] [flags]
  corrset demo <tsirelson|prbox|mermin|aqc-gap|reconstruct-roundtrip> [flags]
  corrset fixture <name> --out <path>

FLAGS:
  --tol <t>        solver tolerance (default 1e-9)
  --seed <s>       random seed (default 1)
  --samples <n>    sampled actions per check (default 50)
  --restarts <n>   see-saw restarts (default 20)
  --level <l>      relaxation level for membership: npa1|npa2|aqc (default aqc)
  --checks <list>  comma-separated subset of: assembly, invariance,
                   permutation, mixed, extend, commutators, signaling,
                   first-order (default: all)
  --out <path>     write a machine-readable key=value report (bound, verify,
                   demo) or the fixture file (fixture)

FIXTURES:
  chsh-fn mermin-fn i3322-fn chsh-optimal-qm ghz-mermin-qm aqc-gns-gm
  aqc-chsh-mm
";

struct Parsed {
    positionals: Vec<String>,
    flags: Flags,
    out: Option<PathBuf>,
    checks: Vec<String>,
}

fn parse_args(args: &[String]) -> Result<Parsed, String> {
    let mut positionals = Vec::new();
    let mut flags = Flags::default();
    let mut out = None;
    let mut checks: Vec<String> = ALL_CHECKS.iter().map(|s| s.to_string()).collect();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        if let Some(name) = arg.strip_prefix("--") {
            let value = args
                .get(i + 1)
                .ok_or_else(|| format!("flag --{name} needs a value"))?;
            match name {
                "tol" => {
                    flags.tol = value
                        .parse()
                        .map_err(|_| format!("--tol wants a number, got `{value}`"))?
                }
                "seed" => {
                    flags.seed = value
                        .parse()
                        .map_err(|_| format!("--seed wants an integer, got `{value}`"))?
                }
                "samples" => {
                    flags.samples = value
                        .parse()
                        .map_err(|_| format!("--samples wants an integer, got `{value}`"))?
                }
                "restarts" => {
                    flags.restarts = value
                        .parse()
                        .map_err(|_| format!("--restarts wants an integer, got `{value}`"))?
                }
                "level" => {
                    flags.level = RelaxationLevel::parse(value)
                        .ok_or_else(|| format!("--level wants npa1, npa2 or aqc, got `{value}`"))?
                }
                "out" => out = Some(PathBuf::from(value)),
                "checks" => {
                    checks = value.split(',').map(|s| s.trim().to_string()).collect();
                }
                other => return Err(format!("unknown flag --{other}")),
            }
            i += 2;
        } else {
            positionals.push(arg.clone());
            i += 1;
        }
    }
    Ok(Parsed {
        positionals,
        flags,
        out,
        checks,
    })
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        return ExitCode::from(if args.is_empty() { 2 } else { 0 });
    }
    let parsed = match parse_args(&args[1..]) {
        Ok(p) => p,
        Err(m) => {
            eprintln!("error: {m}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let command = args[0].as_str();
    let result = match (command, parsed.positionals.as_slice()) {
        ("bound", [level, path]) => commands::cmd_bound(level, &PathBuf::from(path), &parsed.flags),
        ("verify", [path]) => {
            commands::cmd_verify(&PathBuf::from(path), &parsed.checks, &parsed.flags)
        }
        ("demo", [name]) => commands::cmd_demo(name, &parsed.flags),
        ("fixture", [name]) => match &parsed.out {
            Some(out) => commands::cmd_fixture(name, out, &parsed.flags),
            None => {
                eprintln!("error: fixture needs --out <path>\n\n{USAGE}");
                return ExitCode::from(2);
            }
        },
        _ => {
            eprintln!("error: bad arguments for `{command}`\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(report) => {
            print!("{}", report.render_human());
            if command != "fixture" {
                if let Some(out) = &parsed.out {
                    if let Err(e) = std::fs::write(out, report.render_machine()) {
                        eprintln!("error: cannot write {}: {e}", out.display());
                        return ExitCode::from(2);
                    }
                }
            }
            ExitCode::from(if report.all_pass() { 0 } else { 1 })
        }
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
