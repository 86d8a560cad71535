//! Shorthand specs for groups, rules and subshifts, and file loading.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use surjunct::format::{parse_group, parse_rule};
use surjunct::{CellularAutomaton, FixSubshift, FullShift, MarkedGroup, Subshift};

use crate::Failure;

pub fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn number<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, Failure> {
    s.parse().map_err(|_| Failure::Input(format!("bad {what} `{s}`")))
}

/// `cyclic:n`, `zd:d`, `free:k`, `symmetric:n` or `finite:<path>`.
pub fn group(spec: &str) -> Result<Arc<MarkedGroup>, Failure> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Failure::Input(format!("group spec `{spec}` needs the form kind:value")))?;
    let g = match kind {
        "cyclic" => MarkedGroup::cyclic(1, number("modulus", arg)?)?,
        "zd" => MarkedGroup::zd(number("dimension", arg)?)?,
        "free" => MarkedGroup::free(number("rank", arg)?)?,
        "symmetric" => MarkedGroup::symmetric(number("degree", arg)?)?,
        "finite" => parse_group(&read(Path::new(arg))?)?,
        _ => return Err(Failure::Input(format!("unknown group kind `{kind}`"))),
    };
    Ok(Arc::new(g))
}

/// `eca:<n>` or `file:<path>`.
pub fn rule(spec: &str) -> Result<CellularAutomaton, Failure> {
    match spec.split_once(':') {
        Some(("eca", n)) => Ok(CellularAutomaton::elementary(number("rule number", n)?)),
        Some(("file", path)) => Ok(parse_rule(&read(Path::new(path))?)?),
        _ => Err(Failure::Input(format!("rule spec `{spec}` must be eca:<n> or file:<path>"))),
    }
}

/// `full` or `fix:<group spec>`.
pub fn subshift(spec: &str, rank: usize, alphabet: usize) -> Result<Box<dyn Subshift>, Failure> {
    if spec == "full" {
        return Ok(Box::new(FullShift { rank, alphabet }));
    }
    match spec.split_once(':') {
        Some(("fix", g)) => Ok(Box::new(FixSubshift::new((*group(g)?).clone(), alphabet))),
        _ => Err(Failure::Input(format!("subshift spec `{spec}` must be full or fix:<group>"))),
    }
}
