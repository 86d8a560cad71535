//! Cellular automata `τ(x)(g) = μ((x(g·s))_{s ∈ S})` with an ordered memory
//! set `S` and a total local rule `μ`.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{Element, MarkedGroup};
use crate::limits;
use crate::shift::{all_configurations, FiniteConfiguration, PeriodicConfiguration};
use crate::window::{ball, for_each_labeling, WindowMap, WindowPattern};
use crate::word::{FreeWord, Letter};

/// A total table from `q^d` symbol tuples to a symbol. Tuples are indexed in
/// lexicographic order, the first coordinate most significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalRule {
    alphabet: usize,
    arity: usize,
    table: Vec<u8>,
}

impl LocalRule {
    pub fn new(alphabet: usize, arity: usize, table: Vec<u8>) -> Result<Self> {
        if alphabet == 0 || alphabet > 256 {
            return Err(Error::InvalidAutomaton(format!("alphabet size {alphabet} out of range")));
        }
        let size = limits::pow_sat(alphabet as u128, arity);
        limits::check("rule table", size)?;
        if table.len() as u128 != size {
            return Err(Error::InvalidAutomaton(format!(
                "rule has {} entries, expected {size}",
                table.len()
            )));
        }
        if let Some(&x) = table.iter().find(|&&x| x as usize >= alphabet) {
            return Err(Error::InvalidAutomaton(format!("rule output {x} outside the alphabet")));
        }
        Ok(LocalRule { alphabet, arity, table })
    }

    pub fn from_fn(alphabet: usize, arity: usize, mut f: impl FnMut(&[u8]) -> u8) -> Result<Self> {
        limits::check("rule table", limits::pow_sat(alphabet as u128, arity))?;
        let mut table = Vec::new();
        for_each_labeling(arity, alphabet, |t| table.push(f(t)));
        Self::new(alphabet, arity, table)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }

    /// Output for the tuple whose `i`-th coordinate is `value(i)`.
    #[inline]
    pub fn eval_by(&self, mut value: impl FnMut(usize) -> u8) -> u8 {
        let mut idx = 0usize;
        for i in 0..self.arity {
            idx = idx * self.alphabet + value(i) as usize;
        }
        self.table[idx]
    }

    pub fn eval(&self, tuple: &[u8]) -> u8 {
        self.eval_by(|i| tuple[i])
    }
}

/// A cellular automaton over the free group `F_k` (and, through the word
/// oracle, over any of its quotients).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellularAutomaton {
    rank: usize,
    memory: Vec<FreeWord>,
    rule: LocalRule,
}

impl CellularAutomaton {
    pub fn new(rank: usize, memory: Vec<FreeWord>, rule: LocalRule) -> Result<Self> {
        if rank == 0 || rank > crate::word::MAX_RANK {
            return Err(Error::InvalidAutomaton(format!("rank {rank} out of range")));
        }
        if memory.len() != rule.arity {
            return Err(Error::InvalidAutomaton(format!(
                "{} memory words for a rule of arity {}",
                memory.len(),
                rule.arity
            )));
        }
        let distinct: BTreeSet<&FreeWord> = memory.iter().collect();
        if distinct.len() != memory.len() {
            return Err(Error::InvalidAutomaton("memory words must be distinct".into()));
        }
        if let Some(w) = memory.iter().find(|w| w.min_rank() > rank) {
            return Err(Error::InvalidAutomaton(format!("memory word {w} exceeds rank {rank}")));
        }
        Ok(CellularAutomaton { rank, memory, rule })
    }

    pub fn identity(rank: usize, alphabet: usize) -> Result<Self> {
        Self::new(
            rank,
            vec![FreeWord::identity()],
            LocalRule::from_fn(alphabet, 1, |t| t[0])?,
        )
    }

    pub fn constant(rank: usize, alphabet: usize, symbol: u8) -> Result<Self> {
        Self::new(rank, vec![], LocalRule::new(alphabet, 0, vec![symbol])?)
    }

    /// `x ↦ (g ↦ x(g·s))`.
    pub fn shift(rank: usize, alphabet: usize, s: FreeWord) -> Result<Self> {
        Self::new(rank, vec![s], LocalRule::from_fn(alphabet, 1, |t| t[0])?)
    }

    /// Elementary CA number `n`: rank 1, two symbols, memory `(a⁻¹, 1, a)`.
    pub fn elementary(n: u8) -> Self {
        let memory = vec![FreeWord::power(0, -1), FreeWord::identity(), FreeWord::power(0, 1)];
        let table = (0..8).map(|i| (n >> i) & 1).collect();
        CellularAutomaton {
            rank: 1,
            memory,
            rule: LocalRule {
                alphabet: 2,
                arity: 3,
                table,
            },
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn alphabet(&self) -> usize {
        self.rule.alphabet
    }

    pub fn memory(&self) -> &[FreeWord] {
        &self.memory
    }

    pub fn rule(&self) -> &LocalRule {
        &self.rule
    }

    /// Largest memory word length; the continuity modulus of the CA.
    pub fn memory_radius(&self) -> usize {
        self.memory.iter().map(FreeWord::len).max().unwrap_or(0)
    }

    fn check_symbols(&self, values: &[u8]) -> Result<()> {
        match values.iter().max() {
            Some(&m) if m as usize >= self.alphabet() => Err(Error::AlphabetMismatch(self.alphabet(), m as usize + 1)),
            _ => Ok(()),
        }
    }

    /// `τ(x)(g) = μ((x(g·s_i))_i)` over a finite quotient.
    pub fn apply_finite(&self, x: &FiniteConfiguration) -> Result<FiniteConfiguration> {
        let g = x.group();
        if g.rank() != self.rank {
            return Err(Error::RankMismatch(self.rank, g.rank()));
        }
        self.check_symbols(x.values())?;
        let offsets: Vec<usize> = self.memory.iter().map(|s| g.eval_index(s)).collect::<Result<_>>()?;
        let n = g.finite_order()?;
        let values = (0..n)
            .map(|h| self.rule.eval_by(|i| x.get(g.mul_index(h, offsets[i]))))
            .collect();
        FiniteConfiguration::new(g.clone(), values)
    }

    pub fn apply_periodic(&self, x: &PeriodicConfiguration) -> Result<PeriodicConfiguration> {
        if self.rank != 1 {
            return Err(Error::RankMismatch(1, self.rank));
        }
        self.check_symbols(x.values())?;
        let offsets: Vec<i64> = self.memory.iter().map(|s| s.exponent_sum(0)).collect();
        let n = x.period() as i64;
        PeriodicConfiguration::new((0..n).map(|i| self.rule.eval_by(|k| x.get(i + offsets[k]))).collect())
    }

    /// Image window of radius `r` from a pattern of radius `>= r + m`.
    pub fn apply_window_to(&self, p: &WindowPattern, r: usize) -> Result<WindowPattern> {
        if p.rank() != self.rank {
            return Err(Error::RankMismatch(self.rank, p.rank()));
        }
        let needed = r + self.memory_radius();
        if p.radius() < needed {
            return Err(Error::InsufficientRadius {
                needed,
                actual: p.radius(),
            });
        }
        self.check_symbols(p.labels())?;
        let big = ball(self.rank, p.radius())?;
        let small = ball(self.rank, r)?;
        let labels = small
            .words()
            .iter()
            .map(|w| {
                self.rule.eval_by(|i| {
                    let j = big.index_of(&w.mul(&self.memory[i])).expect("inside the ball");
                    p.labels()[j]
                })
            })
            .collect();
        WindowPattern::new(self.rank, r, labels)
    }

    /// `self ∘ other`: apply `other` first. Memory is the shortlex-sorted set
    /// `{s·t : s ∈ S_self, t ∈ S_other}`.
    pub fn compose(&self, other: &CellularAutomaton) -> Result<CellularAutomaton> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch(self.rank, other.rank));
        }
        if self.alphabet() != other.alphabet() {
            return Err(Error::AlphabetMismatch(self.alphabet(), other.alphabet()));
        }
        let memory: Vec<FreeWord> = self
            .memory
            .iter()
            .flat_map(|s| other.memory.iter().map(move |t| s.mul(t)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pos = |w: &FreeWord| memory.binary_search(w).expect("product is in the memory");
        let inner: Vec<Vec<usize>> = self
            .memory
            .iter()
            .map(|s| other.memory.iter().map(|t| pos(&s.mul(t))).collect())
            .collect();
        let rule = LocalRule::from_fn(self.alphabet(), memory.len(), |tuple| {
            self.rule
                .eval_by(|i| other.rule.eval_by(|j| tuple[inner[i][j]]))
        })?;
        CellularAutomaton::new(self.rank, memory, rule)
    }

    /// Drops memory positions the rule does not depend on.
    pub fn trim(&self) -> CellularAutomaton {
        let q = self.alphabet();
        let d = self.rule.arity;
        let stride = |i: usize| q.pow((d - 1 - i) as u32);
        let essential: Vec<usize> = (0..d)
            .filter(|&i| {
                let s = stride(i);
                (0..self.rule.table.len()).any(|idx| {
                    let digit = (idx / s) % q;
                    let base = idx - digit * s;
                    (0..q).any(|v| self.rule.table[base + v * s] != self.rule.table[idx])
                })
            })
            .collect();
        let memory = essential.iter().map(|&i| self.memory[i].clone()).collect();
        let table = {
            let mut t = Vec::new();
            for_each_labeling(essential.len(), q, |sub| {
                let mut idx = 0;
                for (k, &i) in essential.iter().enumerate() {
                    idx += sub[k] as usize * stride(i);
                }
                t.push(self.rule.table[idx]);
            });
            t
        };
        CellularAutomaton {
            rank: self.rank,
            memory,
            rule: LocalRule {
                alphabet: q,
                arity: essential.len(),
                table,
            },
        }
    }

    /// Equality as maps `A^Γ → A^Γ`. By equivariance it suffices to compare
    /// the outputs at the identity over every labeling of the union of the
    /// two memory sets.
    pub fn extensionally_equal(&self, other: &CellularAutomaton) -> Result<bool> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch(self.rank, other.rank));
        }
        if self.alphabet() != other.alphabet() {
            return Ok(false);
        }
        let union: Vec<&FreeWord> = self
            .memory
            .iter()
            .chain(&other.memory)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pa: Vec<usize> = self.memory.iter().map(|w| union.binary_search(&w).unwrap()).collect();
        let pb: Vec<usize> = other.memory.iter().map(|w| union.binary_search(&w).unwrap()).collect();
        limits::check("labelings", limits::pow_sat(self.alphabet() as u128, union.len()))?;
        let mut equal = true;
        for_each_labeling(union.len(), self.alphabet(), |t| {
            if equal && self.rule.eval_by(|i| t[pa[i]]) != other.rule.eval_by(|i| t[pb[i]]) {
                equal = false;
            }
        });
        Ok(equal)
    }

    /// The induced automaton on `A^G` for a quotient `G`, merging memory
    /// words that evaluate to the same element.
    pub fn descend(&self, group: Arc<MarkedGroup>) -> Result<QuotientAutomaton> {
        if group.rank() != self.rank {
            return Err(Error::RankMismatch(self.rank, group.rank()));
        }
        let elems: Vec<Element> = self.memory.iter().map(|s| group.evaluate(s)).collect();
        let mut distinct: Vec<Element> = Vec::new();
        let pos: Vec<usize> = elems
            .iter()
            .map(|e| match distinct.iter().position(|d| d == e) {
                Some(p) => p,
                None => {
                    distinct.push(e.clone());
                    distinct.len() - 1
                }
            })
            .collect();
        let rule = LocalRule::from_fn(self.alphabet(), distinct.len(), |t| self.rule.eval_by(|i| t[pos[i]]))?;
        QuotientAutomaton::new(group, distinct, rule)
    }
}

/// Lets a CA act on windows: radius `r + m` in, radius `r` out.
impl WindowMap for CellularAutomaton {
    fn rank(&self) -> usize {
        self.rank
    }

    fn modulus(&self) -> usize {
        self.memory_radius()
    }

    fn apply_window(&self, p: &WindowPattern) -> Result<WindowPattern> {
        let r = p.radius().checked_sub(self.memory_radius()).ok_or(Error::InsufficientRadius {
            needed: self.memory_radius(),
            actual: p.radius(),
        })?;
        self.apply_window_to(p, r)
    }
}

/// A cellular automaton over a quotient `G = Γ/N`, memory given by group
/// elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientAutomaton {
    group: Arc<MarkedGroup>,
    memory: Vec<Element>,
    rule: LocalRule,
}

impl QuotientAutomaton {
    pub fn new(group: Arc<MarkedGroup>, memory: Vec<Element>, rule: LocalRule) -> Result<Self> {
        if memory.len() != rule.arity {
            return Err(Error::InvalidAutomaton("memory size does not match rule arity".into()));
        }
        for e in &memory {
            group.validate(e)?;
        }
        if memory.iter().collect::<BTreeSet<_>>().len() != memory.len() {
            return Err(Error::InvalidAutomaton("memory elements must be distinct".into()));
        }
        Ok(QuotientAutomaton { group, memory, rule })
    }

    pub fn group(&self) -> &Arc<MarkedGroup> {
        &self.group
    }

    pub fn memory(&self) -> &[Element] {
        &self.memory
    }

    pub fn rule(&self) -> &LocalRule {
        &self.rule
    }

    pub fn alphabet(&self) -> usize {
        self.rule.alphabet
    }

    pub fn apply(&self, x: &FiniteConfiguration) -> Result<FiniteConfiguration> {
        if x.group() != &self.group && **x.group() != *self.group {
            return Err(Error::Invalid("configuration lives over a different group".into()));
        }
        if let Some(&m) = x.values().iter().max() {
            if m as usize >= self.alphabet() {
                return Err(Error::AlphabetMismatch(self.alphabet(), m as usize + 1));
            }
        }
        let offsets: Vec<usize> = self
            .memory
            .iter()
            .map(|e| match e {
                Element::Index(i) => Ok(*i),
                _ => Err(Error::NotFinite),
            })
            .collect::<Result<_>>()?;
        let n = self.group.finite_order()?;
        let values = (0..n)
            .map(|h| self.rule.eval_by(|i| x.get(self.group.mul_index(h, offsets[i]))))
            .collect();
        FiniteConfiguration::new(self.group.clone(), values)
    }

    /// Equality as maps `A^G → A^G`, checked at the identity over every
    /// labeling of the union of the memory sets.
    pub fn extensionally_equal(&self, other: &QuotientAutomaton) -> Result<bool> {
        if *self.group != *other.group {
            return Err(Error::Invalid("automata live over different groups".into()));
        }
        if self.alphabet() != other.alphabet() {
            return Ok(false);
        }
        let union: Vec<&Element> = self.memory.iter().chain(&other.memory).collect::<BTreeSet<_>>().into_iter().collect();
        let pa: Vec<usize> = self.memory.iter().map(|e| union.binary_search(&e).unwrap()).collect();
        let pb: Vec<usize> = other.memory.iter().map(|e| union.binary_search(&e).unwrap()).collect();
        limits::check("labelings", limits::pow_sat(self.alphabet() as u128, union.len()))?;
        let mut equal = true;
        for_each_labeling(union.len(), self.alphabet(), |t| {
            if equal && self.rule.eval_by(|i| t[pa[i]]) != other.rule.eval_by(|i| t[pb[i]]) {
                equal = false;
            }
        });
        Ok(equal)
    }

    /// `self ∘ other` over the same quotient.
    pub fn compose(&self, other: &QuotientAutomaton) -> Result<QuotientAutomaton> {
        if *self.group != *other.group {
            return Err(Error::Invalid("automata live over different groups".into()));
        }
        if self.alphabet() != other.alphabet() {
            return Err(Error::AlphabetMismatch(self.alphabet(), other.alphabet()));
        }
        let g = &self.group;
        let memory: Vec<Element> = self
            .memory
            .iter()
            .flat_map(|s| other.memory.iter().map(move |t| g.mul(s, t)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let inner: Vec<Vec<usize>> = self
            .memory
            .iter()
            .map(|s| {
                other
                    .memory
                    .iter()
                    .map(|t| memory.binary_search(&g.mul(s, t)).expect("product in memory"))
                    .collect()
            })
            .collect();
        let rule = LocalRule::from_fn(self.alphabet(), memory.len(), |tuple| {
            self.rule.eval_by(|i| other.rule.eval_by(|j| tuple[inner[i][j]]))
        })?;
        QuotientAutomaton::new(self.group.clone(), memory, rule)
    }
}

/// `Θ(τ) = τ*`: the automaton over `Γ` with the same rule and memory
/// elements lifted to their shortlex-least words. It agrees with
/// `ρ* ∘ τ ∘ (ρ*)⁻¹` on `Fix(N)`.
pub fn pullback_ca(tau: &QuotientAutomaton) -> Result<CellularAutomaton> {
    let g = &tau.group;
    let memory = if g.is_finite() {
        let lifts = g.transversal()?;
        tau.memory
            .iter()
            .map(|e| match e {
                Element::Index(i) => Ok(lifts[*i].clone()),
                _ => Err(Error::NotFinite),
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        tau.memory
            .iter()
            .map(|e| g.shortlex_lift(e, 0))
            .collect::<Result<Vec<_>>>()?
    };
    CellularAutomaton::new(g.rank(), memory, tau.rule.clone())
}

/// A black-box map to recover a CA from.
pub enum BlackBox<'a> {
    /// A configuration map over a finite quotient.
    Configurations {
        group: Arc<MarkedGroup>,
        alphabet: usize,
        map: &'a dyn Fn(&FiniteConfiguration) -> FiniteConfiguration,
    },
    /// The output at the identity as a function of a radius-`radius` window.
    Window {
        rank: usize,
        alphabet: usize,
        radius: usize,
        map: &'a dyn Fn(&WindowPattern) -> u8,
    },
}

/// Recovers a CA with memory `B_m` for the least `m <= max_radius`
/// reproducing `f`. Table entries never witnessed are set to `fill`.
pub fn synthesize_ca(f: &BlackBox<'_>, max_radius: usize, fill: u8) -> Result<CellularAutomaton> {
    match f {
        BlackBox::Configurations { group, alphabet, map } => {
            synthesize_from_configurations(group, *alphabet, map, max_radius, fill)
        }
        BlackBox::Window {
            rank,
            alphabet,
            radius,
            map,
        } => synthesize_from_window(*rank, *alphabet, *radius, map, max_radius, fill),
    }
}

fn synthesize_from_configurations(
    group: &Arc<MarkedGroup>,
    q: usize,
    map: &dyn Fn(&FiniteConfiguration) -> FiniteConfiguration,
    max_radius: usize,
    fill: u8,
) -> Result<CellularAutomaton> {
    let inputs = all_configurations(group, q)?;
    let outputs: Vec<FiniteConfiguration> = inputs.iter().map(map).collect();
    // Equivariance spot check: every input against every generator.
    let gens: Vec<usize> = Letter::all(group.rank())
        .map(|l| group.eval_index(&FreeWord::from_letters([l])))
        .collect::<Result<_>>()?;
    for (x, y) in inputs.iter().zip(&outputs) {
        if y.values().len() != x.values().len() || y.values().iter().any(|&v| v as usize >= q) {
            return Err(Error::Invalid("black box output is not a configuration over the group".into()));
        }
        for &g in &gens {
            if map(&x.shift(g)?) != y.shift(g)? {
                return Err(Error::NotEquivariant);
            }
        }
    }
    let n = group.finite_order()?;
    'radius: for m in 0..=max_radius {
        let words = ball(group.rank(), m)?.words().to_vec();
        let offsets: Vec<usize> = words.iter().map(|w| group.eval_index(w)).collect::<Result<_>>()?;
        limits::check("rule table", limits::pow_sat(q as u128, words.len()))?;
        let mut table: Vec<Option<u8>> = vec![None; q.pow(words.len() as u32)];
        for (x, y) in inputs.iter().zip(&outputs) {
            for h in 0..n {
                let mut idx = 0;
                for &o in &offsets {
                    idx = idx * q + x.get(group.mul_index(h, o)) as usize;
                }
                match table[idx] {
                    Some(v) if v != y.get(h) => continue 'radius,
                    _ => table[idx] = Some(y.get(h)),
                }
            }
        }
        let rule = LocalRule::new(q, words.len(), table.into_iter().map(|v| v.unwrap_or(fill)).collect())?;
        return CellularAutomaton::new(group.rank(), words, rule);
    }
    Err(Error::NotLocal(max_radius))
}

fn synthesize_from_window(
    rank: usize,
    q: usize,
    radius: usize,
    map: &dyn Fn(&WindowPattern) -> u8,
    max_radius: usize,
    fill: u8,
) -> Result<CellularAutomaton> {
    let b = ball(rank, radius)?;
    limits::check("window set", limits::pow_sat(q as u128, b.len()))?;
    let mut samples: Vec<(Vec<u8>, u8)> = Vec::new();
    let mut bad = None;
    for_each_labeling(b.len(), q, |l| {
        if bad.is_some() {
            return;
        }
        let p = WindowPattern::new(rank, radius, l.to_vec()).expect("shape matches the ball");
        let v = map(&p);
        if v as usize >= q {
            bad = Some(v);
        }
        samples.push((l.to_vec(), v));
    });
    if let Some(v) = bad {
        return Err(Error::AlphabetMismatch(q, v as usize + 1));
    }
    'radius: for m in 0..=max_radius.min(radius) {
        let k = b.prefix_len(m);
        let mut table: Vec<Option<u8>> = vec![None; q.pow(k as u32)];
        for (l, v) in &samples {
            let idx = l[..k].iter().fold(0, |acc, &x| acc * q + x as usize);
            match table[idx] {
                Some(w) if w != *v => continue 'radius,
                _ => table[idx] = Some(*v),
            }
        }
        let rule = LocalRule::new(q, k, table.into_iter().map(|v| v.unwrap_or(fill)).collect())?;
        return CellularAutomaton::new(rank, b.words()[..k].to_vec(), rule);
    }
    Err(Error::NotLocal(max_radius))
}
