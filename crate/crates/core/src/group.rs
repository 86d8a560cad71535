//! Marked groups: quotients of a free group `F_k` given by a word-problem
//! oracle, and the agreement-radius metric on their kernels.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::limits;
use crate::word::{Ball, FreeWord, Letter, MAX_RANK};

/// Canonical identifier of an element of a marked group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum Element {
    /// Index into a finite group (table or cyclic backend).
    Index(usize),
    /// Integer vector in `Z^d`.
    Vector(Vec<i64>),
    /// Reduced word in the free group itself.
    Word(FreeWord),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Index(i) => write!(f, "e{i}"),
            Element::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            Element::Word(w) => write!(f, "{w}"),
        }
    }
}

/// Explicit finite group: multiplication table plus images of the free
/// generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteTable {
    order: usize,
    identity: usize,
    generators: Vec<usize>,
    table: Vec<usize>,
    inverses: Vec<usize>,
}

impl FiniteTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    pub fn row(&self, a: usize) -> &[usize] {
        &self.table[a * self.order..(a + 1) * self.order]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Finite(FiniteTable),
    /// `Z/n`, every generator mapped to `1`.
    Cyclic(usize),
    /// `Z^d` with generator `i` mapped to the `i`-th basis vector.
    Zd(usize),
    /// Trivial kernel: the free group itself.
    Free,
}

/// A quotient `G = F_k / N` of the free group of rank `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedGroup {
    rank: usize,
    backend: Backend,
}

fn check_rank(rank: usize) -> Result<()> {
    if rank == 0 || rank > MAX_RANK {
        Err(Error::InvalidGroup(format!("rank must be in 1..={MAX_RANK}, got {rank}")))
    } else {
        Ok(())
    }
}

impl MarkedGroup {
    pub fn cyclic(rank: usize, n: usize) -> Result<Self> {
        check_rank(rank)?;
        if n == 0 {
            return Err(Error::InvalidGroup("cyclic modulus must be positive".into()));
        }
        Ok(MarkedGroup {
            rank,
            backend: Backend::Cyclic(n),
        })
    }

    /// `Z^d` marked by the standard basis, rank `d`.
    pub fn zd(d: usize) -> Result<Self> {
        check_rank(d)?;
        Ok(MarkedGroup {
            rank: d,
            backend: Backend::Zd(d),
        })
    }

    pub fn free(rank: usize) -> Result<Self> {
        check_rank(rank)?;
        Ok(MarkedGroup {
            rank,
            backend: Backend::Free,
        })
    }

    /// The one-element quotient, `N = F_k`.
    pub fn trivial(rank: usize) -> Result<Self> {
        Self::cyclic(rank, 1)
    }

    /// Validates a multiplication table (row-major, `order x order`) and the
    /// generator images. The generators must generate the group.
    pub fn from_table(rank: usize, order: usize, generators: Vec<usize>, table: Vec<usize>) -> Result<Self> {
        check_rank(rank)?;
        let bad = |m: String| Err(Error::InvalidGroup(m));
        if order == 0 {
            return bad("empty group".into());
        }
        if generators.len() != rank {
            return bad(format!("{} generator images for rank {rank}", generators.len()));
        }
        if table.len() != order * order {
            return bad(format!("table has {} entries, expected {}", table.len(), order * order));
        }
        if let Some(&x) = table.iter().chain(&generators).find(|&&x| x >= order) {
            return bad(format!("element {x} out of range"));
        }
        let mul = |a: usize, b: usize| table[a * order + b];
        let Some(identity) = (0..order).find(|&e| (0..order).all(|x| mul(e, x) == x && mul(x, e) == x)) else {
            return bad("no identity element".into());
        };
        let mut inverses = vec![usize::MAX; order];
        for a in 0..order {
            match (0..order).find(|&b| mul(a, b) == identity && mul(b, a) == identity) {
                Some(b) => inverses[a] = b,
                None => return bad(format!("element {a} has no inverse")),
            }
        }
        // Associativity is O(n^3); checked in full up to this order.
        if order <= 128 {
            for a in 0..order {
                for b in 0..order {
                    let ab = mul(a, b);
                    for c in 0..order {
                        if mul(ab, c) != mul(a, mul(b, c)) {
                            return bad(format!("not associative at ({a},{b},{c})"));
                        }
                    }
                }
            }
        }
        let ft = FiniteTable {
            order,
            identity,
            generators,
            table,
            inverses,
        };
        let mut seen = vec![false; order];
        seen[identity] = true;
        let mut stack = vec![identity];
        while let Some(x) = stack.pop() {
            for &g in &ft.generators {
                for y in [ft.mul(x, g), ft.mul(x, ft.inverses[g])] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("generator images do not generate the group".into());
        }
        Ok(MarkedGroup {
            rank,
            backend: Backend::Finite(ft),
        })
    }

    /// The group generated by the given permutations of `0..degree`, with
    /// generator `i` marked by the `i`-th permutation. Elements are indexed
    /// in order of discovery, the identity first. Composition is
    /// `(pq)(x) = p(q(x))`.
    pub fn from_permutations(gens: &[Vec<usize>]) -> Result<Self> {
        check_rank(gens.len())?;
        let degree = gens[0].len();
        for p in gens {
            let mut sorted = p.clone();
            sorted.sort_unstable();
            if p.len() != degree || sorted != (0..degree).collect::<Vec<_>>() {
                return Err(Error::InvalidGroup("not a permutation of a common degree".into()));
            }
        }
        let compose = |p: &[usize], q: &[usize]| -> Vec<usize> { q.iter().map(|&x| p[x]).collect() };
        let mut elems: Vec<Vec<usize>> = vec![(0..degree).collect()];
        let mut index: HashMap<Vec<usize>, usize> = HashMap::from([(elems[0].clone(), 0)]);
        let mut i = 0;
        while i < elems.len() {
            for g in gens {
                let next = compose(&elems[i], g);
                if !index.contains_key(&next) {
                    limits::check("permutation group", elems.len() as u128 + 1)?;
                    index.insert(next.clone(), elems.len());
                    elems.push(next);
                }
            }
            i += 1;
        }
        let n = elems.len();
        let mut table = Vec::with_capacity(n * n);
        for a in &elems {
            for b in &elems {
                table.push(index[&compose(a, b)]);
            }
        }
        let generators = gens.iter().map(|g| index[g]).collect();
        Self::from_table(gens.len(), n, generators, table)
    }

    /// `S_n` marked by the transposition `(0 1)` and the cycle `(0 1 ... n-1)`.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGroup("symmetric group needs degree >= 2".into()));
        }
        let mut t: Vec<usize> = (0..n).collect();
        t.swap(0, 1);
        let c: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        Self::from_permutations(&[t, c])
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn order(&self) -> Option<usize> {
        match &self.backend {
            Backend::Finite(t) => Some(t.order),
            Backend::Cyclic(n) => Some(*n),
            Backend::Zd(_) | Backend::Free => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.order().is_some()
    }

    pub fn finite_order(&self) -> Result<usize> {
        self.order().ok_or(Error::NotFinite)
    }

    pub fn identity(&self) -> Element {
        match &self.backend {
            Backend::Finite(t) => Element::Index(t.identity),
            Backend::Cyclic(_) => Element::Index(0),
            Backend::Zd(d) => Element::Vector(vec![0; *d]),
            Backend::Free => Element::Word(FreeWord::identity()),
        }
    }

    /// Index of the identity in a finite group.
    pub fn identity_index(&self) -> Result<usize> {
        match &self.backend {
            Backend::Finite(t) => Ok(t.identity),
            Backend::Cyclic(_) => Ok(0),
            _ => Err(Error::NotFinite),
        }
    }

    /// Word-problem oracle: the canonical element represented by `w`.
    pub fn evaluate(&self, w: &FreeWord) -> Element {
        match &self.backend {
            Backend::Finite(_) | Backend::Cyclic(_) => Element::Index(self.eval_index(w).expect("finite backend")),
            Backend::Zd(d) => Element::Vector((0..*d as u8).map(|g| w.exponent_sum(g)).collect()),
            Backend::Free => Element::Word(w.clone()),
        }
    }

    /// Word-problem oracle for finite groups, returning the element index.
    pub fn eval_index(&self, w: &FreeWord) -> Result<usize> {
        match &self.backend {
            Backend::Finite(t) => Ok(w.letters().iter().fold(t.identity, |acc, l| {
                let g = t.generators[l.generator as usize];
                t.mul(acc, if l.inverse { t.inverses[g] } else { g })
            })),
            Backend::Cyclic(n) => {
                let s: i64 = w.letters().iter().map(|l| if l.inverse { -1 } else { 1 }).sum();
                Ok(s.rem_euclid(*n as i64) as usize)
            }
            _ => Err(Error::NotFinite),
        }
    }

    pub fn is_trivial_word(&self, w: &FreeWord) -> bool {
        self.evaluate(w) == self.identity()
    }

    pub fn mul(&self, a: &Element, b: &Element) -> Element {
        match (&self.backend, a, b) {
            (Backend::Finite(t), Element::Index(x), Element::Index(y)) => Element::Index(t.mul(*x, *y)),
            (Backend::Cyclic(n), Element::Index(x), Element::Index(y)) => Element::Index((x + y) % n),
            (Backend::Zd(_), Element::Vector(x), Element::Vector(y)) => {
                Element::Vector(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (Backend::Free, Element::Word(x), Element::Word(y)) => Element::Word(x.mul(y)),
            _ => panic!("element kind does not match the group backend"),
        }
    }

    pub fn inverse(&self, a: &Element) -> Element {
        match (&self.backend, a) {
            (Backend::Finite(t), Element::Index(x)) => Element::Index(t.inverses[*x]),
            (Backend::Cyclic(n), Element::Index(x)) => Element::Index((n - x % n) % n),
            (Backend::Zd(_), Element::Vector(x)) => Element::Vector(x.iter().map(|v| -v).collect()),
            (Backend::Free, Element::Word(x)) => Element::Word(x.inverse()),
            _ => panic!("element kind does not match the group backend"),
        }
    }

    /// Product of element indices in a finite group.
    pub fn mul_index(&self, a: usize, b: usize) -> usize {
        match &self.backend {
            Backend::Finite(t) => t.mul(a, b),
            Backend::Cyclic(n) => (a + b) % n,
            _ => panic!("mul_index on an infinite group"),
        }
    }

    pub fn inv_index(&self, a: usize) -> usize {
        match &self.backend {
            Backend::Finite(t) => t.inverses[a],
            Backend::Cyclic(n) => (n - a % n) % n,
            _ => panic!("inv_index on an infinite group"),
        }
    }

    /// Checks that `e` is a valid element of this group.
    pub fn validate(&self, e: &Element) -> Result<()> {
        let ok = match (&self.backend, e) {
            (Backend::Finite(t), Element::Index(x)) => *x < t.order,
            (Backend::Cyclic(n), Element::Index(x)) => x < n,
            (Backend::Zd(d), Element::Vector(v)) => v.len() == *d,
            (Backend::Free, Element::Word(w)) => w.min_rank() <= self.rank,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("{e} is not an element of this group")))
        }
    }

    /// Shortlex-least word representing each element of a finite group,
    /// indexed by element. Geodesic shortlex-least words are prefix-closed,
    /// so a breadth-first search in letter order finds them.
    pub fn transversal(&self) -> Result<Vec<FreeWord>> {
        let order = self.finite_order()?;
        let mut lift: Vec<Option<FreeWord>> = vec![None; order];
        let id = self.identity_index()?;
        lift[id] = Some(FreeWord::identity());
        let mut frontier = vec![(id, FreeWord::identity())];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (x, w) in &frontier {
                for l in Letter::all(self.rank) {
                    let step = FreeWord::from_letters([l]);
                    let y = self.mul_index(*x, self.eval_index(&step)?);
                    if lift[y].is_none() {
                        let wy = w.mul(&step);
                        lift[y] = Some(wy.clone());
                        next.push((y, wy));
                    }
                }
            }
            frontier = next;
        }
        lift.into_iter()
            .map(|w| w.ok_or_else(|| Error::InvalidGroup("generators do not generate".into())))
            .collect()
    }

    /// Shortlex-least word evaluating to `e`, searching balls up to
    /// `max_radius`.
    pub fn shortlex_lift(&self, e: &Element, max_radius: usize) -> Result<FreeWord> {
        self.validate(e)?;
        match (&self.backend, e) {
            (Backend::Free, Element::Word(w)) => return Ok(w.clone()),
            (Backend::Finite(_) | Backend::Cyclic(_), Element::Index(i)) => {
                return Ok(self.transversal()?[*i].clone());
            }
            // Geodesics have length |v|_1; the least arrangement is sorted.
            (Backend::Zd(_), Element::Vector(v)) => {
                return Ok(FreeWord::from_letters(
                    v.iter()
                        .enumerate()
                        .flat_map(|(g, &e)| std::iter::repeat_n(Letter::new(g as u8, e < 0), e.unsigned_abs() as usize)),
                ));
            }
            _ => {}
        }
        let ball = Ball::new(self.rank, max_radius)?;
        ball.words()
            .iter()
            .find(|w| &self.evaluate(w) == e)
            .cloned()
            .ok_or_else(|| Error::Invalid(format!("no lift of {e} within radius {max_radius}")))
    }

    /// Short human-readable name (`cyclic:4`, `zd:2`, `free:2`, `finite:6`).
    pub fn describe(&self) -> String {
        match &self.backend {
            Backend::Finite(t) => format!("finite:{}(rank {})", t.order, self.rank),
            Backend::Cyclic(n) if self.rank == 1 => format!("cyclic:{n}"),
            Backend::Cyclic(n) => format!("cyclic:{n}(rank {})", self.rank),
            Backend::Zd(d) => format!("zd:{d}"),
            Backend::Free => format!("free:{}", self.rank),
        }
    }
}

/// Exact surrogate for the ultrametric distance `2^-r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "radius", rename_all = "snake_case")]
pub enum AgreementRadius {
    /// Agree on all radii `<= r`, disagree at `r + 1`.
    Exactly(usize),
    /// Agree at every radius checked, up to the search bound.
    AtLeast(usize),
    /// Already disagree on `B_0`. Never produced for marked groups, whose
    /// kernels always share the identity.
    Apart,
}

impl AgreementRadius {
    /// The agreement radius, `None` for [`AgreementRadius::Apart`].
    pub fn value(self) -> Option<usize> {
        match self {
            AgreementRadius::Exactly(r) | AgreementRadius::AtLeast(r) => Some(r),
            AgreementRadius::Apart => None,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, AgreementRadius::Exactly(_))
    }

    /// Closeness order: larger agreement radius means closer. `AtLeast(r)`
    /// ranks above `Exactly(r)`.
    fn key(self) -> (i64, bool) {
        match self {
            AgreementRadius::Exactly(r) => (r as i64, false),
            AgreementRadius::AtLeast(r) => (r as i64, true),
            AgreementRadius::Apart => (-1, false),
        }
    }

    /// Real-valued rendering `2^-r`, display only.
    pub fn distance(self) -> f64 {
        match self.value() {
            Some(r) => 0.5f64.powi(r.min(1 << 20) as i32),
            None => 1.0,
        }
    }
}

impl Ord for AgreementRadius {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for AgreementRadius {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AgreementRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgreementRadius::Exactly(r) => write!(f, "{r}"),
            AgreementRadius::AtLeast(r) => write!(f, ">= {r}"),
            AgreementRadius::Apart => f.write_str("apart"),
        }
    }
}

/// `N ∩ B_r`: the ball words that evaluate to the identity, shortlex order.
pub fn membership_window(g: &MarkedGroup, r: usize) -> Result<Vec<FreeWord>> {
    let ball = Ball::new(g.rank, r)?;
    let id = g.identity();
    Ok(ball.words().iter().filter(|w| g.evaluate(w) == id).cloned().collect())
}

/// Largest `r <= rmax` such that the kernels agree on every ball `B_t`,
/// `t <= r`.
pub fn marked_distance(g1: &MarkedGroup, g2: &MarkedGroup, rmax: usize) -> Result<AgreementRadius> {
    if g1.rank != g2.rank {
        return Err(Error::RankMismatch(g1.rank, g2.rank));
    }
    let ball = Ball::new(g1.rank, rmax)?;
    for w in ball.words() {
        if g1.is_trivial_word(w) != g2.is_trivial_word(w) {
            // B_0 = {1} always agrees, so w is not the identity.
            return Ok(AgreementRadius::Exactly(w.len() - 1));
        }
    }
    Ok(AgreementRadius::AtLeast(rmax))
}
