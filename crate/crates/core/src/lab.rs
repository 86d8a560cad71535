//! Decision procedures and experiments: exact injectivity and surjectivity
//! over `Z` via de Bruijn graphs, a brute-force periodic oracle, the radius
//! calculus of the injectivity transfer lemma, and the convergence pipeline
//! along a sequence of finite quotients.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::ca::{pullback_ca, CellularAutomaton};
use crate::error::{Error, Result};
use crate::group::{marked_distance, AgreementRadius, Backend, MarkedGroup};
use crate::limits;
use crate::linear::{lin_decide, LinearKernel};
use crate::shift::{all_configurations, fix_window, FixSubshift, PeriodicConfiguration};
use crate::window::{for_each_labeling, hb_agreement_radius, Subshift};

/// A rank-1 CA read as a sliding block code `f: A^w → A` with
/// `τ(x)(i) = f(x[i + lo .. i + lo + w])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlidingBlockCode {
    pub alphabet: usize,
    pub lo: i64,
    pub width: usize,
    /// Indexed by the window read base `q`, leftmost symbol most significant.
    pub table: Vec<u8>,
}

impl SlidingBlockCode {
    /// Uses the tightest window `[min offset, max offset]` of the memory.
    pub fn from_ca(ca: &CellularAutomaton) -> Result<Self> {
        if ca.rank() != 1 {
            return Err(Error::RankMismatch(1, ca.rank()));
        }
        let q = ca.alphabet();
        let offsets: Vec<i64> = ca.memory().iter().map(|s| s.exponent_sum(0)).collect();
        let lo = offsets.iter().copied().min().unwrap_or(0);
        let hi = offsets.iter().copied().max().unwrap_or(0);
        let width = (hi - lo + 1) as usize;
        limits::check("block code table", limits::pow_sat(q as u128, width))?;
        let rel: Vec<usize> = offsets.iter().map(|o| (o - lo) as usize).collect();
        let mut table = Vec::with_capacity(q.pow(width as u32));
        for_each_labeling(width, q, |u| table.push(ca.rule().eval_by(|i| u[rel[i]])));
        Ok(SlidingBlockCode {
            alphabet: q,
            lo,
            width,
            table,
        })
    }

    /// Image of one period.
    pub fn apply_periodic(&self, x: &[u8]) -> Vec<u8> {
        let n = x.len() as i64;
        (0..n)
            .map(|i| {
                let idx = (0..self.width as i64)
                    .fold(0usize, |acc, k| acc * self.alphabet + x[(i + self.lo + k).rem_euclid(n) as usize] as usize);
                self.table[idx]
            })
            .collect()
    }
}

/// Overlap graph of a block code: nodes are words of length `w - 1`, one
/// edge per word of length `w`, labeled with its output symbol.
#[derive(Debug, Clone)]
pub struct DeBruijnGraph {
    alphabet: usize,
    nodes: usize,
    labels: Vec<u8>,
}

impl DeBruijnGraph {
    pub fn new(code: &SlidingBlockCode) -> Self {
        DeBruijnGraph {
            alphabet: code.alphabet,
            nodes: code.alphabet.pow(code.width as u32 - 1),
            labels: code.table.clone(),
        }
    }

    pub fn from_ca(ca: &CellularAutomaton) -> Result<Self> {
        Ok(Self::new(&SlidingBlockCode::from_ca(ca)?))
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Target and label of the edge leaving `u` by appending `s`.
    #[inline]
    pub fn edge(&self, u: usize, s: usize) -> (usize, u8) {
        let word = u * self.alphabet + s;
        (word % self.nodes, self.labels[word])
    }

    /// Ordered pair graph: `(u, v) → (u', v')` whenever both edges carry the
    /// same label. Returned as adjacency lists over `u·N + v`.
    fn pair_graph(&self) -> Result<Vec<Vec<usize>>> {
        let n = self.nodes;
        limits::check("pair graph", (n as u128).pow(2) * self.alphabet as u128)?;
        let q = self.alphabet;
        Ok((0..n * n)
            .map(|uv| {
                let (u, v) = (uv / n, uv % n);
                let mut out = Vec::new();
                for s in 0..q {
                    let (u2, a) = self.edge(u, s);
                    for t in 0..q {
                        let (v2, b) = self.edge(v, t);
                        if a == b {
                            out.push(u2 * n + v2);
                        }
                    }
                }
                out
            })
            .collect())
    }
}

/// Subset construction from the set of all nodes: the image is the full
/// shift iff no word leads to the empty set.
pub fn is_surjective_1d(ca: &CellularAutomaton) -> Result<bool> {
    let g = DeBruijnGraph::from_ca(ca)?;
    let (n, q) = (g.nodes, g.alphabet);
    let words = n.div_ceil(64);
    let full: Vec<u64> = (0..n).fold(vec![0u64; words], |mut b, i| {
        b[i / 64] |= 1 << (i % 64);
        b
    });
    let mut seen: HashSet<Vec<u64>> = HashSet::from([full.clone()]);
    let mut queue = VecDeque::from([full]);
    while let Some(set) = queue.pop_front() {
        let mut next = vec![vec![0u64; words]; q];
        for u in (0..n).filter(|&u| set[u / 64] >> (u % 64) & 1 == 1) {
            for s in 0..q {
                let (v, b) = g.edge(u, s);
                next[b as usize][v / 64] |= 1 << (v % 64);
            }
        }
        for t in next {
            if t.iter().all(|&w| w == 0) {
                return Ok(false);
            }
            if seen.insert(t.clone()) {
                limits::check("subset construction", seen.len() as u128)?;
                queue.push_back(t);
            }
        }
    }
    Ok(true)
}

/// Nodes of the pair graph lying on some bi-infinite path: iteratively
/// drops nodes with no predecessor or no successor left.
fn bi_infinite_core(adj: &[Vec<usize>]) -> Vec<bool> {
    let n = adj.len();
    let mut indeg = vec![0usize; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, out) in adj.iter().enumerate() {
        for &v in out {
            indeg[v] += 1;
            preds[v].push(u);
        }
    }
    let mut outdeg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut alive = vec![true; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&u| indeg[u] == 0 || outdeg[u] == 0).collect();
    while let Some(u) = queue.pop_front() {
        if !alive[u] {
            continue;
        }
        alive[u] = false;
        for &v in &adj[u] {
            if alive[v] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        for &p in &preds[u] {
            if alive[p] {
                outdeg[p] -= 1;
                if outdeg[p] == 0 {
                    queue.push_back(p);
                }
            }
        }
    }
    alive
}

/// Injective iff no off-diagonal node of the pair graph lies on a
/// bi-infinite path, i.e. on a cycle or between two cycles.
pub fn is_injective_1d(ca: &CellularAutomaton) -> Result<bool> {
    let g = DeBruijnGraph::from_ca(ca)?;
    let n = g.nodes;
    let core = bi_infinite_core(&g.pair_graph()?);
    Ok((0..n * n).all(|uv| !core[uv] || uv / n == uv % n))
}

/// Pre-injective iff no path leaves the diagonal and returns to it (a
/// "diamond": two configurations differing at finitely many cells with the
/// same image).
pub fn is_preinjective_1d(ca: &CellularAutomaton) -> Result<bool> {
    let g = DeBruijnGraph::from_ca(ca)?;
    let n = g.nodes;
    let adj = g.pair_graph()?;
    let diag = |uv: usize| uv / n == uv % n;
    let mut seen = vec![false; n * n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for u in 0..n {
        for &v in &adj[u * n + u] {
            if !diag(v) && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if diag(y) {
                return Ok(false);
            }
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    Ok(true)
}

/// Whether some closed walk of length `n` in the pair graph passes through
/// an off-diagonal node, i.e. `τ` is not injective on `Fix(nZ)`.
pub fn has_periodic_collision(ca: &CellularAutomaton, n: usize) -> Result<bool> {
    let g = DeBruijnGraph::from_ca(ca)?;
    let adj = g.pair_graph()?;
    let size = adj.len();
    limits::check("boolean matrix", (size as u128).pow(3) / 64)?;
    let words = size.div_ceil(64);
    type Bits = Vec<Vec<u64>>;
    let mul = |a: &Bits, b: &Bits| -> Bits {
        a.iter()
            .map(|row| {
                let mut out = vec![0u64; words];
                for k in (0..size).filter(|&k| row[k / 64] >> (k % 64) & 1 == 1) {
                    for (o, x) in out.iter_mut().zip(&b[k]) {
                        *o |= x;
                    }
                }
                out
            })
            .collect()
    };
    let mut base: Bits = adj
        .iter()
        .map(|out| {
            let mut r = vec![0u64; words];
            for &v in out {
                r[v / 64] |= 1 << (v % 64);
            }
            r
        })
        .collect();
    let mut acc: Bits = (0..size)
        .map(|i| {
            let mut r = vec![0u64; words];
            r[i / 64] |= 1 << (i % 64);
            r
        })
        .collect();
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(&acc, &base);
        }
        e >>= 1;
        if e > 0 {
            base = mul(&base, &base);
        }
    }
    let m = g.nodes;
    Ok((0..size).any(|x| x / m != x % m && acc[x][x / 64] >> (x % 64) & 1 == 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Injective,
    Surjective,
}

/// Brute force over periodic points of every period `n <= max_period`.
///
/// `Injective`: no two distinct points of period `n` share an image; a
/// `false` answer is a genuine collision. `Surjective`: every point of
/// period `n` lies in `τ(A^Z)`; a `false` answer exhibits a point outside
/// the image. Membership of a periodic `y` is decided by reading `y`
/// repeatedly through the subset automaton of the local rule until the
/// state set stabilizes or empties.
pub fn periodic_oracle(ca: &CellularAutomaton, property: Property, max_period: usize) -> Result<bool> {
    Ok(periodic_witness(ca, property, max_period)?.is_none())
}

/// Like [`periodic_oracle`], returning the first witness of failure:
/// a colliding pair or a point outside the image.
pub fn periodic_witness(
    ca: &CellularAutomaton,
    property: Property,
    max_period: usize,
) -> Result<Option<Vec<PeriodicConfiguration>>> {
    let code = SlidingBlockCode::from_ca(ca)?;
    let q = code.alphabet;
    limits::check("periodic points", limits::pow_sat(q as u128, max_period))?;
    for n in 1..=max_period {
        let mut points = Vec::new();
        for_each_labeling(n, q, |x| points.push(x.to_vec()));
        let found = match property {
            Property::Injective => {
                let mut images: HashMap<Vec<u8>, Vec<u8>> = HashMap::new();
                points.into_iter().find_map(|x| {
                    let y = code.apply_periodic(&x);
                    match images.get(&y) {
                        Some(prev) => Some(vec![prev.clone(), x]),
                        None => {
                            images.insert(y, x);
                            None
                        }
                    }
                })
            }
            Property::Surjective => points.into_iter().find(|y| !periodic_in_image(&code, y)).map(|y| vec![y]),
        };
        if let Some(w) = found {
            return Ok(Some(w.into_iter().map(|v| PeriodicConfiguration::new(v).expect("nonempty")).collect()));
        }
    }
    Ok(None)
}

fn periodic_in_image(code: &SlidingBlockCode, y: &[u8]) -> bool {
    let q = code.alphabet;
    let nodes = q.pow(code.width as u32 - 1);
    let mut set = vec![true; nodes];
    loop {
        let start = set.clone();
        for &b in y {
            let mut next = vec![false; nodes];
            for u in (0..nodes).filter(|&u| set[u]) {
                for s in 0..q {
                    let word = u * q + s;
                    if code.table[word] == b {
                        next[word % nodes] = true;
                    }
                }
            }
            set = next;
        }
        if !set.iter().any(|&x| x) {
            return false;
        }
        // The sets after whole periods form a decreasing chain.
        if set == start {
            return true;
        }
    }
}

/// One row of the elementary-CA sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EcaVerdict {
    pub rule: u8,
    pub injective: bool,
    pub surjective: bool,
    pub preinjective: bool,
    pub oracle_injective: bool,
    pub oracle_surjective: bool,
}

impl EcaVerdict {
    /// Conclusive oracle answers (the negative ones) contradicting the graph.
    pub fn disagrees(&self) -> bool {
        (self.injective && !self.oracle_injective) || (self.surjective && !self.oracle_surjective)
    }
}

/// All 256 elementary CA, in rule order.
pub fn eca_sweep(max_period: usize) -> Result<Vec<EcaVerdict>> {
    (0..=255u8)
        .into_par_iter()
        .map(|rule| {
            let ca = CellularAutomaton::elementary(rule);
            Ok(EcaVerdict {
                rule,
                injective: is_injective_1d(&ca)?,
                surjective: is_surjective_1d(&ca)?,
                preinjective: is_preinjective_1d(&ca)?,
                oracle_injective: periodic_oracle(&ca, Property::Injective, max_period)?,
                oracle_surjective: periodic_oracle(&ca, Property::Surjective, max_period)?,
            })
        })
        .collect()
}

/// Radii of the transfer lemma specialized to the prodiscrete ultrametric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModulusProfile {
    /// Memory radius `m`: `B_{t+m}`-agreement gives image `B_t`-agreement.
    pub memory_radius: usize,
    /// `ω₀`: image agreement on `B_{ω₀}` between points of `Y` forces
    /// agreement at the identity.
    pub embedding_radius: usize,
    pub expansivity_radius: usize,
}

/// Largest `w` tried when searching for `ω₀`.
pub const MAX_EMBEDDING_RADIUS: usize = 8;

/// Searches the least `ω₀ <= 8` by grouping the patterns of `π_{w+m}(Y)` by
/// their image on `B_w`. Fails if `τ` is not injective on `Y` within the
/// search range.
pub fn compute_profile(ca: &CellularAutomaton, y: &dyn Subshift) -> Result<ModulusProfile> {
    if y.rank() != ca.rank() {
        return Err(Error::RankMismatch(ca.rank(), y.rank()));
    }
    if y.alphabet() != ca.alphabet() {
        return Err(Error::AlphabetMismatch(ca.alphabet(), y.alphabet()));
    }
    let m = ca.memory_radius();
    for w in 0..=MAX_EMBEDDING_RADIUS {
        let mut center: HashMap<Vec<u8>, u8> = HashMap::new();
        let mut ok = true;
        for p in y.window(w + m)?.iter() {
            let image = ca.apply_window_to(&p, w)?.into_labels();
            let c = p.labels()[0];
            if *center.entry(image).or_insert(c) != c {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(ModulusProfile {
                memory_radius: m,
                embedding_radius: w,
                expansivity_radius: 0,
            });
        }
    }
    Err(Error::Invalid(format!(
        "no embedding radius up to {MAX_EMBEDDING_RADIUS}; the automaton may not be injective on Y"
    )))
}

/// `v = ω₀ + m`. With `V_r ∘ V_r = V_r` the chain of entourages collapses:
/// `S = V_0`, `T = U = V_{ω₀}`, `E = V_{ω₀+m}` and `V = S ∩ E = E`.
pub fn gromov_radius(profile: &ModulusProfile) -> usize {
    profile.embedding_radius + profile.memory_radius
}

/// One shift-invariant test set `Z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferEntry {
    pub family: String,
    pub points: usize,
    pub contained: bool,
    /// `None` when skipped because `π_v(Z) ⊄ π_v(Y)`.
    pub injective: Option<bool>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferReport {
    pub radius: usize,
    pub max_period: usize,
    pub entries: Vec<TransferEntry>,
    pub contained: usize,
    pub skipped: usize,
    pub counterexamples: usize,
}

impl TransferReport {
    pub fn passed(&self) -> bool {
        self.counterexamples == 0
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }
}

impl fmt::Display for TransferReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "radius: {}", self.radius)?;
        writeln!(f, "{:<28} {:>6} {:>9} {:>9}", "family", "points", "contained", "injective")?;
        for e in &self.entries {
            let inj = match e.injective {
                Some(true) => "yes",
                Some(false) => "NO",
                None => "skipped",
            };
            writeln!(
                f,
                "{:<28} {:>6} {:>9} {:>9}",
                e.family,
                e.points,
                if e.contained { "yes" } else { "no" },
                inj
            )?;
        }
        write!(
            f,
            "contained: {}  skipped: {}  counterexamples: {}",
            self.contained, self.skipped, self.counterexamples
        )
    }
}

/// Representatives of the orbits of exact period `n`: the least rotation.
fn necklaces(q: usize, n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for_each_labeling(n, q, |x| {
        let is_min = (1..n).all(|k| {
            let rot: Vec<u8> = (0..n).map(|i| x[(i + k) % n]).collect();
            x <= &rot[..]
        });
        let p = PeriodicConfiguration::new(x.to_vec()).expect("nonempty");
        if is_min && p.minimal_period() == n {
            out.push(x.to_vec());
        }
    });
    out
}

/// Checks the conclusion of the transfer lemma on periodic test families:
/// every single orbit of period `<= max_period`, every `Fix(nZ)`, and the
/// union of all orbits. A family is tested only if all its radius-`v`
/// windows are windows of `Y`; `τ` restricted to it must then be injective.
pub fn injectivity_transfer_check(
    ca: &CellularAutomaton,
    y: &dyn Subshift,
    v: usize,
    max_period: usize,
) -> Result<TransferReport> {
    if ca.rank() != 1 || y.rank() != 1 {
        return Err(Error::RankMismatch(1, ca.rank().max(y.rank())));
    }
    let q = ca.alphabet();
    limits::check("periodic points", limits::pow_sat(q as u128, max_period))?;
    let code = SlidingBlockCode::from_ca(ca)?;
    let allowed = y.window(v)?;
    struct Orbit {
        period: usize,
        rep: Vec<u8>,
        contained: bool,
    }
    let mut orbits = Vec::new();
    for n in 1..=max_period {
        for rep in necklaces(q, n) {
            let x = PeriodicConfiguration::new(rep.clone())?;
            let mut contained = true;
            for k in 0..n as i64 {
                if !allowed.contains(&x.shift(k).window(v)?) {
                    contained = false;
                    break;
                }
            }
            orbits.push(Orbit {
                period: n,
                rep,
                contained,
            });
        }
    }
    // Points are keyed by one minimal period starting at 0.
    let key = |x: &[u8]| PeriodicConfiguration::new(x.to_vec()).expect("nonempty").canonical();
    let injective_on = |members: &[&Orbit]| -> bool {
        let mut images: HashMap<PeriodicConfiguration, PeriodicConfiguration> = HashMap::new();
        for o in members {
            let n = o.period;
            for k in 0..n {
                let point: Vec<u8> = (0..n).map(|i| o.rep[(i + k) % n]).collect();
                let image = key(&code.apply_periodic(&point));
                let p = key(&point);
                if let Some(prev) = images.insert(image, p.clone()) {
                    if prev != p {
                        return false;
                    }
                }
            }
        }
        true
    };
    let mut entries = Vec::new();
    let mut push = |family: String, members: Vec<&Orbit>| {
        let points = members.iter().map(|o| o.period).sum();
        let contained = members.iter().all(|o| o.contained);
        let (injective, reason) = if contained {
            (Some(injective_on(&members)), None)
        } else {
            (None, Some(format!("some radius-{v} window lies outside Y")))
        };
        entries.push(TransferEntry {
            family,
            points,
            contained,
            injective,
            reason,
        });
    };
    for o in &orbits {
        let s: Vec<String> = o.rep.iter().map(u8::to_string).collect();
        push(format!("orbit [{}]", s.join(",")), vec![o]);
    }
    for n in 1..=max_period {
        push(format!("Fix({n}Z)"), orbits.iter().filter(|o| n % o.period == 0).collect());
    }
    push(
        format!("contained orbits, period <= {max_period}"),
        orbits.iter().filter(|o| o.contained).collect(),
    );
    let contained = entries.iter().filter(|e| e.contained).count();
    let counterexamples = entries.iter().filter(|e| e.injective == Some(false)).count();
    Ok(TransferReport {
        radius: v,
        max_period,
        skipped: entries.len() - contained,
        entries,
        contained,
        counterexamples,
    })
}

/// How stage 4 decided a restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionMethod {
    Enumeration,
    LinearRank,
    PairGraphWalks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RestrictionVerdict {
    pub method: RestrictionMethod,
    pub injective: bool,
    pub surjective: bool,
}

impl RestrictionVerdict {
    pub fn surjunctive(&self) -> bool {
        self.surjective || !self.injective
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// `τ` is injective on `A^G`; the full chain is checked.
    Full,
    /// `τ` is not injective; only surjunctivity of each stage is observed.
    SurjectivityOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvergenceEntry {
    pub group: String,
    pub marked_radius: AgreementRadius,
    pub hb_radius: AgreementRadius,
    pub hb_lower_bound: usize,
    pub invariant_windows: usize,
    pub restriction: RestrictionVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvergenceReport {
    pub limit: String,
    pub rmax: usize,
    pub mode: ExperimentMode,
    pub limit_injective: bool,
    pub limit_surjective: bool,
    pub entries: Vec<ConvergenceEntry>,
    pub verdict: String,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "limit: {}  rmax: {}  mode: {:?}", self.limit, self.rmax, self.mode)?;
        writeln!(
            f,
            "{:<14} {:>8} {:>8} {:>6} {:>9} {:>16} {:>9} {:>10}",
            "group", "marked", "hb", "bound", "windows", "method", "injective", "surjective"
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<14} {:>8} {:>8} {:>6} {:>9} {:>16} {:>9} {:>10}",
                e.group,
                e.marked_radius.to_string(),
                e.hb_radius.to_string(),
                e.hb_lower_bound,
                e.invariant_windows,
                format!("{:?}", e.restriction.method),
                e.restriction.injective,
                e.restriction.surjective
            )?;
        }
        write!(f, "verdict: {}", self.verdict)
    }
}

const ENUMERATION_LIMIT: u128 = 1 << 16;

/// Injectivity and surjectivity of `τ` on `A^G` for finite `G`.
fn decide_finite(ca: &CellularAutomaton, g: &Arc<MarkedGroup>) -> Result<RestrictionVerdict> {
    let q = ca.alphabet();
    let n = g.finite_order()?;
    if limits::pow_sat(q as u128, n) <= ENUMERATION_LIMIT {
        let configs = all_configurations(g, q)?;
        let images: HashSet<Vec<u8>> = configs
            .iter()
            .map(|x| Ok(ca.apply_finite(x)?.values().to_vec()))
            .collect::<Result<_>>()?;
        return Ok(RestrictionVerdict {
            method: RestrictionMethod::Enumeration,
            injective: images.len() == configs.len(),
            surjective: images.len() == configs.len(),
        });
    }
    if let Some((linear, _)) = LinearKernel::from_affine_ca(ca) {
        // A translate of a linear map is bijective iff the linear part is.
        let d = lin_decide(&linear, g)?;
        return Ok(RestrictionVerdict {
            method: RestrictionMethod::LinearRank,
            injective: d.injective,
            surjective: d.surjective,
        });
    }
    if let (1, Backend::Cyclic(n)) = (g.rank(), g.backend()) {
        // Finite set: injective iff surjective.
        let injective = !has_periodic_collision(ca, *n)?;
        return Ok(RestrictionVerdict {
            method: RestrictionMethod::PairGraphWalks,
            injective,
            surjective: injective,
        });
    }
    Err(Error::ResourceCap {
        what: "restriction decision",
        needed: limits::pow_sat(q as u128, n),
        cap: ENUMERATION_LIMIT as usize,
    })
}

fn stage(stage: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::StageFailed {
        stage,
        detail: e.to_string(),
    }
}

fn fail(stage: &'static str, detail: String) -> Error {
    Error::StageFailed { stage, detail }
}

/// Runs the pipeline along `G_i → G` for a CA `τ` over the limit group,
/// given by a CA over the free group of the same rank:
///
/// 1. marked distances to `G` are non-decreasing in `i`;
/// 2. `Fix(N_i)` and `Fix(N)` agree on windows of radius at least
///    `⌊marked radius / 2⌋`;
/// 3. the pullback `τ̃` maps every `π_{r+m}(Fix(N_i))` window into
///    `π_r(Fix(N_i))`, `r = rmax`;
/// 4. each restriction `τ̃|Fix(N_i) ≅ τ_i` is surjunctive;
/// 5. surjectivity of `τ` on `A^G`, decided independently.
pub fn convergence_experiment(
    groups: &[Arc<MarkedGroup>],
    limit: &Arc<MarkedGroup>,
    ca: &CellularAutomaton,
    rmax: usize,
) -> Result<ConvergenceReport> {
    let q = ca.alphabet();
    if ca.rank() != limit.rank() {
        return Err(Error::RankMismatch(limit.rank(), ca.rank()));
    }
    if let Some(g) = groups.iter().find(|g| g.rank() != limit.rank()) {
        return Err(Error::RankMismatch(limit.rank(), g.rank()));
    }
    if let Some(g) = groups.iter().find(|g| !g.is_finite()) {
        return Err(Error::Invalid(format!("{} is not finite", g.describe())));
    }
    let limit_is_z = limit.rank() == 1 && matches!(limit.backend(), Backend::Zd(1) | Backend::Free);
    let decide_limit = || -> Result<(bool, bool)> {
        if limit_is_z {
            Ok((is_injective_1d(ca)?, is_surjective_1d(ca)?))
        } else if limit.is_finite() {
            let v = decide_finite(ca, limit)?;
            Ok((v.injective, v.surjective))
        } else {
            Err(Error::Invalid(format!(
                "no decision procedure for {}; use Z or a finite group",
                limit.describe()
            )))
        }
    };
    let (limit_injective, limit_surjective) = decide_limit().map_err(stage("limit"))?;
    let mode = if limit_injective {
        ExperimentMode::Full
    } else {
        ExperimentMode::SurjectivityOnly
    };

    let tilde = pullback_ca(&ca.descend(limit.clone())?).map_err(stage("pullback"))?;
    let m = tilde.memory_radius();
    let limit_fix = FixSubshift::new((**limit).clone(), q);

    let entries: Vec<ConvergenceEntry> = groups
        .par_iter()
        .map(|g| -> Result<ConvergenceEntry> {
            let marked = marked_distance(g, limit, rmax).map_err(stage("marked distance"))?;
            let fix = FixSubshift::new((**g).clone(), q);
            let hb = hb_agreement_radius(&fix, &limit_fix, rmax).map_err(stage("hausdorff-bourbaki"))?;
            let bound = marked.value().unwrap_or(0) / 2;
            if hb.value().is_none_or(|h| h < bound) {
                return Err(fail(
                    "hausdorff-bourbaki",
                    format!("{}: window radius {hb} below {bound}", g.describe()),
                ));
            }
            let target = fix_window(g, q, rmax).map_err(stage("invariance"))?;
            let source = fix_window(g, q, rmax + m).map_err(stage("invariance"))?;
            for p in source.iter() {
                let image = tilde.apply_window_to(&p, rmax).map_err(stage("invariance"))?;
                if !target.contains(&image) {
                    return Err(fail("invariance", format!("{}: image window leaves Fix", g.describe())));
                }
            }
            let restriction = decide_finite(&tilde, g).map_err(stage("restriction"))?;
            if !restriction.surjunctive() {
                return Err(fail(
                    "restriction",
                    format!("{}: injective but not surjective", g.describe()),
                ));
            }
            Ok(ConvergenceEntry {
                group: g.describe(),
                marked_radius: marked,
                hb_radius: hb,
                hb_lower_bound: bound,
                invariant_windows: source.len(),
                restriction,
            })
        })
        .collect::<Result<_>>()?;

    if let Some(w) = entries.windows(2).find(|w| w[1].marked_radius < w[0].marked_radius) {
        return Err(fail(
            "marked distance",
            format!("radius drops from {} to {}", w[0].marked_radius, w[1].marked_radius),
        ));
    }
    let verdict = match (mode, limit_surjective) {
        (ExperimentMode::Full, true) => "surjective, consistent with the limit theorem".to_string(),
        (ExperimentMode::Full, false) => {
            return Err(fail("limit", "injective but not surjective on the limit".into()));
        }
        (ExperimentMode::SurjectivityOnly, s) => {
            format!("not injective on the limit; surjectivity-only observation (surjective: {s})")
        }
    };
    Ok(ConvergenceReport {
        limit: limit.describe(),
        rmax,
        mode,
        limit_injective,
        limit_surjective,
        entries,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ca::LocalRule;
    use crate::shift::FullShift;
    use crate::word::FreeWord;

    fn eca(n: u8) -> CellularAutomaton {
        CellularAutomaton::elementary(n)
    }

    fn factorial_groups() -> Vec<Arc<MarkedGroup>> {
        [6, 24, 120, 720]
            .into_iter()
            .map(|n| Arc::new(MarkedGroup::cyclic(1, n).unwrap()))
            .collect()
    }

    #[test]
    fn decision_examples() {
        assert!(is_surjective_1d(&eca(204)).unwrap());
        assert!(!is_surjective_1d(&eca(0)).unwrap());
        assert!(is_surjective_1d(&eca(90)).unwrap());
        assert!(is_injective_1d(&eca(204)).unwrap());
        assert!(!is_injective_1d(&eca(90)).unwrap());
        assert!(is_injective_1d(&eca(15)).unwrap());
        assert!(!is_surjective_1d(&eca(110)).unwrap());
    }

    #[test]
    fn oracle_examples() {
        assert!(periodic_oracle(&eca(90), Property::Surjective, 3).unwrap());
        assert!(!periodic_oracle(&eca(90), Property::Injective, 2).unwrap());
        let w = periodic_witness(&eca(90), Property::Injective, 2).unwrap().unwrap();
        assert_eq!(w[0].values(), &[0]);
        assert_eq!(w[1].values(), &[1]);
        let id = CellularAutomaton::identity(1, 3).unwrap();
        for prop in [Property::Injective, Property::Surjective] {
            assert!(periodic_oracle(&id, prop, 6).unwrap());
        }
        assert!(!periodic_oracle(&eca(0), Property::Surjective, 1).unwrap());
    }

    #[test]
    fn injective_elementary_rules() {
        let inj: Vec<u8> = (0..=255u8).filter(|&n| is_injective_1d(&eca(n)).unwrap()).collect();
        assert_eq!(inj, [15, 51, 85, 170, 204, 240]);
    }

    #[test]
    fn moore_myhill_and_surjunctivity_over_elementary_rules() {
        for n in 0..=255u8 {
            let ca = eca(n);
            let (inj, surj, pre) = (
                is_injective_1d(&ca).unwrap(),
                is_surjective_1d(&ca).unwrap(),
                is_preinjective_1d(&ca).unwrap(),
            );
            assert_eq!(surj, pre, "rule {n}");
            assert!(!inj || surj, "rule {n}");
        }
    }

    #[test]
    fn wider_rules_against_oracle() {
        // Radius-2 binary and radius-1 ternary rules from a fixed family.
        let mut rules = Vec::new();
        for seed in 0..40u64 {
            let m5 = vec![FreeWord::power(0, -2), FreeWord::power(0, -1), FreeWord::identity(), FreeWord::power(0, 1), FreeWord::power(0, 2)];
            let r = LocalRule::from_fn(2, 5, |t| {
                let idx = t.iter().fold(0usize, |a, &b| a * 2 + b as usize);
                ((seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> (idx % 64)) & 1) as u8
            })
            .unwrap();
            rules.push(CellularAutomaton::new(1, m5, r).unwrap());
            let m3 = vec![FreeWord::power(0, -1), FreeWord::identity(), FreeWord::power(0, 1)];
            let r = LocalRule::from_fn(3, 3, |t| ((t[0] as u64 * 7 + t[1] as u64 * seed + t[2] as u64 * (seed / 3)) % 3) as u8).unwrap();
            rules.push(CellularAutomaton::new(1, m3, r).unwrap());
        }
        // Permutive rules are surjective; x ↦ x(i-1) + x(i+1) mod 3 is not injective.
        for ca in &rules {
            let inj = is_injective_1d(ca).unwrap();
            let surj = is_surjective_1d(ca).unwrap();
            assert_eq!(surj, is_preinjective_1d(ca).unwrap());
            assert!(!inj || surj);
            if inj {
                assert!(periodic_oracle(ca, Property::Injective, 6).unwrap());
            }
            if surj {
                assert!(periodic_oracle(ca, Property::Surjective, 5).unwrap());
            }
        }
    }

    #[test]
    fn periodic_collisions_match_enumeration() {
        for n in [0u8, 15, 30, 90, 105, 110, 150, 204] {
            for p in 1..=9 {
                let by_walks = has_periodic_collision(&eca(n), p).unwrap();
                let g = Arc::new(MarkedGroup::cyclic(1, p).unwrap());
                let enumerated = decide_finite(&eca(n), &g).unwrap();
                assert_eq!(by_walks, !enumerated.injective, "rule {n} period {p}");
            }
        }
    }

    #[test]
    fn profile_examples() {
        let full = FullShift { rank: 1, alphabet: 2 };
        let id = CellularAutomaton::identity(1, 2).unwrap();
        let p = compute_profile(&id, &full).unwrap();
        assert_eq!((p.memory_radius, p.embedding_radius, gromov_radius(&p)), (0, 0, 0));
        let p = compute_profile(&eca(15), &full).unwrap();
        assert_eq!((p.memory_radius, p.embedding_radius, gromov_radius(&p)), (1, 1, 2));
        let shift = CellularAutomaton::shift(1, 2, FreeWord::generator(0)).unwrap();
        let p = compute_profile(&shift, &full).unwrap();
        assert_eq!((p.memory_radius, p.embedding_radius, gromov_radius(&p)), (1, 1, 2));
        assert!(compute_profile(&eca(90), &full).is_err());
        // Rule 150 is injective on Fix(4Z) (3 does not divide 4) but not on Fix(3Z).
        let fix4 = FixSubshift::new(MarkedGroup::cyclic(1, 4).unwrap(), 2);
        assert!(compute_profile(&eca(150), &fix4).is_ok());
        let fix3 = FixSubshift::new(MarkedGroup::cyclic(1, 3).unwrap(), 2);
        assert!(compute_profile(&eca(150), &fix3).is_err());
    }

    #[test]
    fn transfer_examples() {
        let full = FullShift { rank: 1, alphabet: 2 };
        let r = injectivity_transfer_check(&eca(15), &full, 2, 6).unwrap();
        assert!(r.passed());
        assert_eq!(r.skipped, 0);
        let fix4 = FixSubshift::new(MarkedGroup::cyclic(1, 4).unwrap(), 2);
        let r = injectivity_transfer_check(&eca(15), &fix4, 2, 8).unwrap();
        assert!(r.passed());
        assert!(r.skipped > 0);
        assert!(r.entries.iter().any(|e| e.family == "Fix(4Z)" && e.contained));
        assert!(r.entries.iter().any(|e| e.family == "Fix(3Z)" && !e.contained && e.reason.is_some()));
        // Rule 150 on Y = Fix(4Z): every contained family must stay injective.
        let v = gromov_radius(&compute_profile(&eca(150), &fix4).unwrap());
        assert!(injectivity_transfer_check(&eca(150), &fix4, v, 8).unwrap().passed());
        // Below the radius the conclusion fails: every word of length 3 occurs in
        // Fix(4Z), so v = 1 admits Fix(3Z), where rule 150 collides.
        let weak = injectivity_transfer_check(&eca(150), &fix4, 1, 8).unwrap();
        assert!(!weak.passed());
    }

    #[test]
    fn necklace_counts() {
        // Binary necklaces of exact period n: 2, 1, 2, 3, 6, 9, 18, 30.
        let counts: Vec<usize> = (1..=8).map(|n| necklaces(2, n).len()).collect();
        assert_eq!(counts, [2, 1, 2, 3, 6, 9, 18, 30]);
    }

    #[test]
    fn convergence_examples() {
        let z = Arc::new(MarkedGroup::zd(1).unwrap());
        let r = convergence_experiment(&factorial_groups(), &z, &eca(15), 8).unwrap();
        assert_eq!(r.mode, ExperimentMode::Full);
        assert!(r.limit_surjective);
        assert_eq!(r.entries.len(), 4);
        assert_eq!(r.entries[0].marked_radius, AgreementRadius::Exactly(5));
        assert_eq!(r.entries[0].hb_radius, AgreementRadius::Exactly(2));
        assert!(r.entries.iter().all(|e| e.restriction.injective && e.restriction.surjective));

        let r = convergence_experiment(&factorial_groups(), &z, &eca(90), 4).unwrap();
        assert_eq!(r.mode, ExperimentMode::SurjectivityOnly);

        let z5 = Arc::new(MarkedGroup::cyclic(1, 5).unwrap());
        let r = convergence_experiment(&[z5.clone(), z5.clone()], &z5, &eca(150), 6).unwrap();
        assert_eq!(r.mode, ExperimentMode::Full);
        assert!(r.entries.iter().all(|e| e.hb_radius == AgreementRadius::AtLeast(6)));
    }

    #[test]
    fn convergence_rejects_bad_input() {
        let z = Arc::new(MarkedGroup::zd(1).unwrap());
        let z2 = Arc::new(MarkedGroup::zd(2).unwrap());
        assert!(convergence_experiment(std::slice::from_ref(&z), &z, &eca(15), 2).is_err());
        assert!(convergence_experiment(&factorial_groups(), &z2, &eca(15), 2).is_err());
    }

    #[test]
    fn sweep_has_no_disagreements() {
        let rows = eca_sweep(8).unwrap();
        assert!(rows.iter().all(|r| !r.disagrees()));
    }
}
