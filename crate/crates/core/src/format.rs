//! Line-oriented text formats for groups, rules, linear kernels and
//! group-algebra matrices. Blank lines and `#` comments are ignored on
//! input; the writers emit the canonical form, which re-parses to an equal
//! value.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::ca::{CellularAutomaton, LocalRule};
use crate::error::{Error, Result};
use crate::group::{Backend, MarkedGroup};
use crate::linear::{FpMatrix, GroupAlgebraMatrix, LinearKernel};
use crate::window::for_each_labeling;
use crate::word::FreeWord;

/// Non-empty lines with comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::parse(line, format!("expected a number, got `{s}`")))
}

fn keyed<'a>(next: Option<(usize, &'a str)>, key: &str) -> Result<(usize, &'a str)> {
    let (line, text) = next.ok_or_else(|| Error::parse(0, format!("missing `{key}` line")))?;
    match text.split_once(char::is_whitespace) {
        Some((k, rest)) if k == key => Ok((line, rest.trim())),
        None if text == key => Ok((line, "")),
        _ => Err(Error::parse(line, format!("expected `{key} ...`, got `{text}`"))),
    }
}

fn eof(next: Option<(usize, &str)>) -> Result<()> {
    match next {
        Some((line, text)) => Err(Error::parse(line, format!("unexpected trailing line `{text}`"))),
        None => Ok(()),
    }
}

fn word(line: usize, s: &str) -> Result<FreeWord> {
    s.parse().map_err(|e: Error| Error::parse(line, e.to_string()))
}

/// ```text
/// rank 2
/// finite 6
/// gens 1 2
/// 0 1 2 3 4 5      (one multiplication-table row per element)
/// ...
/// ```
/// Other backends: `cyclic n`, `zd d`, `free`.
pub fn write_group(g: &MarkedGroup) -> String {
    let mut out = format!("rank {}\n", g.rank());
    match g.backend() {
        Backend::Cyclic(n) => writeln!(out, "cyclic {n}"),
        Backend::Zd(d) => writeln!(out, "zd {d}"),
        Backend::Free => writeln!(out, "free"),
        Backend::Finite(t) => {
            let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "finite {}", t.order());
            let _ = writeln!(out, "gens {}", join(t.generators()));
            for a in 0..t.order() {
                let _ = writeln!(out, "{}", join(t.row(a)));
            }
            Ok(())
        }
    }
    .expect("writing to a string");
    out
}

pub fn parse_group(text: &str) -> Result<MarkedGroup> {
    let mut lines = content_lines(text);
    let (l, rank) = keyed(lines.next(), "rank")?;
    let rank: usize = num(l, rank)?;
    let (l, backend) = lines.next().ok_or_else(|| Error::parse(l, "missing backend line"))?;
    let mut parts = backend.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let arg = parts.next();
    let at = |r: Result<MarkedGroup>| r.map_err(|e| Error::parse(l, e.to_string()));
    let g = match (kind, arg) {
        ("cyclic", Some(n)) => at(MarkedGroup::cyclic(rank, num(l, n)?))?,
        ("zd", Some(d)) => {
            let d: usize = num(l, d)?;
            if d != rank {
                return Err(Error::parse(l, format!("zd {d} needs rank {d}")));
            }
            at(MarkedGroup::zd(d))?
        }
        ("free", None) => at(MarkedGroup::free(rank))?,
        ("finite", Some(n)) => {
            let n: usize = num(l, n)?;
            let (gl, gens) = keyed(lines.next(), "gens")?;
            let gens: Vec<usize> = gens.split_whitespace().map(|s| num(gl, s)).collect::<Result<_>>()?;
            let mut table = Vec::with_capacity(n * n);
            for i in 0..n {
                let (rl, row) = lines
                    .next()
                    .ok_or_else(|| Error::parse(gl + i + 1, format!("missing table row {i}")))?;
                let row: Vec<usize> = row.split_whitespace().map(|s| num(rl, s)).collect::<Result<_>>()?;
                if row.len() != n {
                    return Err(Error::parse(rl, format!("row has {} entries, expected {n}", row.len())));
                }
                table.extend(row);
            }
            MarkedGroup::from_table(rank, n, gens, table).map_err(|e| Error::parse(l, e.to_string()))?
        }
        _ => return Err(Error::parse(l, format!("unknown backend `{backend}`"))),
    };
    eof(lines.next())?;
    Ok(g)
}

/// ```text
/// rank 1
/// alphabet 2
/// memory A 1 a
/// 0,0,0 -> 0
/// ...
/// ```
/// One line per tuple in lexicographic order. The whole file may instead
/// be `eca <n>`.
pub fn write_rule(ca: &CellularAutomaton) -> String {
    let mut out = format!("rank {}\nalphabet {}\nmemory", ca.rank(), ca.alphabet());
    for w in ca.memory() {
        let _ = write!(out, " {w}");
    }
    out.push('\n');
    let table = ca.rule().table();
    let mut i = 0;
    for_each_labeling(ca.memory().len(), ca.alphabet(), |t| {
        let tuple: Vec<String> = t.iter().map(u8::to_string).collect();
        let _ = writeln!(out, "{} -> {}", tuple.join(","), table[i]);
        i += 1;
    });
    out
}

pub fn parse_rule(text: &str) -> Result<CellularAutomaton> {
    let mut lines = content_lines(text).peekable();
    if let Some((l, first)) = lines.peek().copied() {
        if let Some(n) = first.strip_prefix("eca") {
            let n: u8 = num(l, n)?;
            lines.next();
            eof(lines.next())?;
            return Ok(CellularAutomaton::elementary(n));
        }
    }
    let (l, rank) = keyed(lines.next(), "rank")?;
    let rank: usize = num(l, rank)?;
    let (l, q) = keyed(lines.next(), "alphabet")?;
    let q: usize = num(l, q)?;
    if q == 0 || q > 256 {
        return Err(Error::parse(l, format!("alphabet size {q} out of range")));
    }
    let (ml, mem) = keyed(lines.next(), "memory")?;
    let memory: Vec<FreeWord> = mem.split_whitespace().map(|s| word(ml, s)).collect::<Result<_>>()?;
    let d = memory.len();
    let size = crate::limits::pow_sat(q as u128, d);
    crate::limits::check("rule table", size)?;
    let mut table: Vec<Option<u8>> = vec![None; size as usize];
    for (l, entry) in lines {
        let (tuple, out) = entry
            .split_once("->")
            .ok_or_else(|| Error::parse(l, "expected `tuple -> symbol`"))?;
        let tuple: Vec<usize> = if tuple.trim().is_empty() {
            vec![]
        } else {
            tuple.split(',').map(|s| num(l, s)).collect::<Result<_>>()?
        };
        if tuple.len() != d || tuple.iter().any(|&x| x >= q) {
            return Err(Error::parse(l, format!("bad tuple for arity {d} over {q} symbols")));
        }
        let idx = tuple.iter().fold(0, |acc, &x| acc * q + x);
        let out: u8 = num(l, out)?;
        if table[idx].replace(out).is_some() {
            return Err(Error::parse(l, "tuple listed twice"));
        }
    }
    let table: Vec<u8> = table
        .into_iter()
        .collect::<Option<_>>()
        .ok_or_else(|| Error::parse(ml, "rule table is incomplete"))?;
    let rule = LocalRule::new(q, d, table).map_err(|e| Error::parse(ml, e.to_string()))?;
    CellularAutomaton::new(rank, memory, rule).map_err(|e| Error::parse(ml, e.to_string()))
}

/// ```text
/// prime 2
/// dim 2
/// 1: 1 1 0 1
/// a: 0 1 1 0
/// ```
/// Each matrix row-major.
pub fn write_kernel(k: &LinearKernel) -> String {
    let mut out = format!("prime {}\ndim {}\n", k.prime(), k.dim());
    for (w, m) in k.terms() {
        let entries: Vec<String> = m.to_rows().concat().iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{w}: {}", entries.join(" "));
    }
    out
}

pub fn parse_kernel(text: &str) -> Result<LinearKernel> {
    let mut lines = content_lines(text);
    let (l, p) = keyed(lines.next(), "prime")?;
    let p: u32 = num(l, p)?;
    let (l, n) = keyed(lines.next(), "dim")?;
    let n: usize = num(l, n)?;
    let mut terms = Vec::new();
    for (l, entry) in lines {
        let (w, entries) = entry.split_once(':').ok_or_else(|| Error::parse(l, "expected `word: entries`"))?;
        let values: Vec<i64> = entries.split_whitespace().map(|s| num(l, s)).collect::<Result<_>>()?;
        if values.len() != n * n {
            return Err(Error::parse(l, format!("{} entries, expected {}", values.len(), n * n)));
        }
        let rows: Vec<Vec<i64>> = values.chunks(n).map(<[i64]>::to_vec).collect();
        let m = FpMatrix::from_rows(p, &rows).map_err(|e| Error::parse(l, e.to_string()))?;
        terms.push((word(l, w)?, m));
    }
    LinearKernel::new(p, n, terms).map_err(|e| Error::parse(l, e.to_string()))
}

/// ```text
/// prime 2
/// size 2
/// 0 0: 1*e0;1*e3
/// 1 1: 1*e0
/// ```
/// Zero entries are omitted. Elements are `e<index>` or words evaluated in
/// the group.
pub fn write_group_algebra_matrix(m: &GroupAlgebraMatrix) -> String {
    let mut out = format!("prime {}\nsize {}\n", m.prime(), m.size());
    for i in 0..m.size() {
        for j in 0..m.size() {
            let terms: Vec<String> = m
                .entry(i, j)
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(g, c)| format!("{c}*e{g}"))
                .collect();
            if !terms.is_empty() {
                let _ = writeln!(out, "{i} {j}: {}", terms.join(";"));
            }
        }
    }
    out
}

pub fn parse_group_algebra_matrix(text: &str, group: &Arc<MarkedGroup>) -> Result<GroupAlgebraMatrix> {
    let mut lines = content_lines(text);
    let (l, p) = keyed(lines.next(), "prime")?;
    let p: u32 = num(l, p)?;
    let (l, size) = keyed(lines.next(), "size")?;
    let size: usize = num(l, size)?;
    let n = group.finite_order()?;
    let mut m = GroupAlgebraMatrix::zero(group.clone(), p, size).map_err(|e| Error::parse(l, e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    for (l, entry) in lines {
        let (pos, terms) = entry.split_once(':').ok_or_else(|| Error::parse(l, "expected `i j: terms`"))?;
        let ij: Vec<usize> = pos.split_whitespace().map(|s| num(l, s)).collect::<Result<_>>()?;
        let [i, j] = ij[..] else {
            return Err(Error::parse(l, "expected two indices"));
        };
        if i >= size || j >= size || !seen.insert((i, j)) {
            return Err(Error::parse(l, format!("bad or repeated position ({i}, {j})")));
        }
        let mut coeffs = vec![0u32; n];
        for term in terms.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let (c, e) = term.split_once('*').ok_or_else(|| Error::parse(l, format!("bad term `{term}`")))?;
            let c: i64 = num(l, c)?;
            let e = e.trim();
            let g = match e.strip_prefix('e').filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit())) {
                Some(d) => num(l, d)?,
                None => group.eval_index(&word(l, e)?).map_err(|err| Error::parse(l, err.to_string()))?,
            };
            if g >= n {
                return Err(Error::parse(l, format!("element {g} out of range")));
            }
            coeffs[g] = ((coeffs[g] as i64 + c).rem_euclid(p as i64)) as u32;
        }
        m.set(i, j, &coeffs)?;
    }
    Ok(m)
}
