//! Window-level calculus for the prodiscrete uniform structure on `A^Γ`
//! and the induced Hausdorff-Bourbaki structure on sets of configurations.
//!
//! The base entourage `V_r` relates two configurations that agree on the
//! ball `B_r`. For sets `Y, Z`, the condition `Z ⊂ V_r[Y]` and `Y ⊂ V_r[Z]`
//! holds exactly when `π_r(Y) = π_r(Z)`, so every comparison here reduces to
//! equality of finite pattern sets.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::group::AgreementRadius;
use crate::word::{Ball, FreeWord};

type BallCache = Mutex<HashMap<(usize, usize), Arc<Ball>>>;

/// Shared, lazily built balls keyed by `(rank, radius)`.
pub fn ball(rank: usize, radius: usize) -> Result<Arc<Ball>> {
    static CACHE: OnceLock<BallCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(b) = cache.lock().unwrap().get(&(rank, radius)) {
        return Ok(b.clone());
    }
    let b = Arc::new(Ball::new(rank, radius)?);
    cache.lock().unwrap().insert((rank, radius), b.clone());
    Ok(b)
}

/// A labeling of the free ball `B_r` by symbols `0..q`, stored in shortlex
/// order of the ball words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowPattern {
    rank: usize,
    radius: usize,
    labels: Vec<u8>,
}

impl WindowPattern {
    pub fn new(rank: usize, radius: usize, labels: Vec<u8>) -> Result<Self> {
        let b = ball(rank, radius)?;
        if labels.len() != b.len() {
            return Err(Error::Invalid(format!(
                "pattern has {} labels, ball of radius {radius} has {} words",
                labels.len(),
                b.len()
            )));
        }
        Ok(WindowPattern { rank, radius, labels })
    }

    /// Builds a pattern from a labeling function on ball words.
    pub fn from_fn(rank: usize, radius: usize, mut f: impl FnMut(&FreeWord) -> u8) -> Result<Self> {
        let b = ball(rank, radius)?;
        let labels = b.words().iter().map(&mut f).collect();
        Ok(WindowPattern { rank, radius, labels })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    /// Label at a ball word; `None` outside the ball.
    pub fn get(&self, w: &FreeWord) -> Option<u8> {
        if w.len() > self.radius {
            return None;
        }
        let b = ball(self.rank, self.radius).ok()?;
        b.index_of(w).map(|i| self.labels[i])
    }

    pub fn restrict(&self, radius: usize) -> Result<Self> {
        if radius > self.radius {
            return Err(Error::InsufficientRadius {
                needed: radius,
                actual: self.radius,
            });
        }
        let n = ball(self.rank, self.radius)?.prefix_len(radius);
        Ok(WindowPattern {
            rank: self.rank,
            radius,
            labels: self.labels[..n].to_vec(),
        })
    }
}

/// A finite set of patterns sharing rank and radius, e.g. `π_r(Y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSet {
    rank: usize,
    radius: usize,
    patterns: BTreeSet<Vec<u8>>,
}

impl WindowSet {
    pub fn empty(rank: usize, radius: usize) -> Self {
        WindowSet {
            rank,
            radius,
            patterns: BTreeSet::new(),
        }
    }

    /// Every labeling of `B_r` by `q` symbols.
    pub fn full(rank: usize, q: usize, radius: usize) -> Result<Self> {
        let n = ball(rank, radius)?.len();
        crate::limits::check("window set", crate::limits::pow_sat(q as u128, n))?;
        let mut set = WindowSet::empty(rank, radius);
        for_each_labeling(n, q, |l| {
            set.patterns.insert(l.to_vec());
        });
        Ok(set)
    }

    pub fn from_patterns<I: IntoIterator<Item = WindowPattern>>(rank: usize, radius: usize, it: I) -> Result<Self> {
        let mut set = WindowSet::empty(rank, radius);
        for p in it {
            set.insert(p)?;
        }
        Ok(set)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn insert(&mut self, p: WindowPattern) -> Result<bool> {
        self.check_shape(&p)?;
        Ok(self.patterns.insert(p.labels))
    }

    pub(crate) fn insert_labels(&mut self, labels: Vec<u8>) {
        self.patterns.insert(labels);
    }

    pub fn contains(&self, p: &WindowPattern) -> bool {
        p.rank == self.rank && p.radius == self.radius && self.patterns.contains(&p.labels)
    }

    pub fn contains_labels(&self, labels: &[u8]) -> bool {
        self.patterns.contains(labels)
    }

    fn check_shape(&self, p: &WindowPattern) -> Result<()> {
        if p.rank != self.rank {
            return Err(Error::RankMismatch(self.rank, p.rank));
        }
        if p.radius != self.radius {
            return Err(Error::RadiusMismatch(self.radius, p.radius));
        }
        Ok(())
    }

    /// Patterns in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = WindowPattern> + '_ {
        self.patterns.iter().map(|l| WindowPattern {
            rank: self.rank,
            radius: self.radius,
            labels: l.clone(),
        })
    }

    pub fn label_vectors(&self) -> impl Iterator<Item = &[u8]> {
        self.patterns.iter().map(|l| l.as_slice())
    }

    pub fn restrict(&self, radius: usize) -> Result<Self> {
        if radius > self.radius {
            return Err(Error::InsufficientRadius {
                needed: radius,
                actual: self.radius,
            });
        }
        let n = ball(self.rank, self.radius)?.prefix_len(radius);
        Ok(WindowSet {
            rank: self.rank,
            radius,
            patterns: self.patterns.iter().map(|l| l[..n].to_vec()).collect(),
        })
    }

    fn check_compatible(&self, other: &WindowSet) -> Result<()> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch(self.rank, other.rank));
        }
        if self.radius != other.radius {
            return Err(Error::RadiusMismatch(self.radius, other.radius));
        }
        Ok(())
    }

    pub fn union(&self, other: &WindowSet) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(WindowSet {
            rank: self.rank,
            radius: self.radius,
            patterns: self.patterns.union(&other.patterns).cloned().collect(),
        })
    }

    pub fn is_subset(&self, other: &WindowSet) -> Result<bool> {
        self.check_compatible(other)?;
        Ok(self.patterns.is_subset(&other.patterns))
    }

    /// CSV dump: a header row of ball words in shortlex order, then one
    /// pattern per row.
    pub fn to_csv(&self) -> String {
        let b = ball(self.rank, self.radius).expect("ball exists for a constructed set");
        let mut out = String::new();
        let header: Vec<String> = b.words().iter().map(|w| w.to_string()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for l in &self.patterns {
            let row: Vec<String> = l.iter().map(|x| x.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses [`WindowSet::to_csv`] output. The rank cannot be recovered from
    /// a radius-0 header, so it is passed in.
    pub fn from_csv(text: &str, rank: usize) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let words: Vec<FreeWord> = header
            .split(',')
            .map(|s| s.parse())
            .collect::<Result<_>>()
            .map_err(|e| Error::parse(1, e.to_string()))?;
        let radius = words.iter().map(|w| w.len()).max().unwrap_or(0);
        let b = ball(rank, radius)?;
        if b.words() != words.as_slice() {
            return Err(Error::parse(1, "header is not a shortlex ball"));
        }
        let mut set = WindowSet::empty(rank, radius);
        for (i, line) in lines {
            let labels: Vec<u8> = line
                .split(',')
                .map(|s| s.trim().parse::<u8>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if labels.len() != b.len() {
                return Err(Error::parse(i + 1, format!("expected {} columns", b.len())));
            }
            set.patterns.insert(labels);
        }
        Ok(set)
    }

    /// Fixed-width table rendering for the CLI.
    pub fn to_table(&self) -> String {
        let b = ball(self.rank, self.radius).expect("ball exists for a constructed set");
        let width = b.words().iter().map(|w| w.to_string().len()).max().unwrap_or(1);
        let mut out = String::new();
        for w in b.words() {
            let _ = write!(out, "{:>width$} ", w.to_string());
        }
        out.push('\n');
        for l in &self.patterns {
            for x in l {
                let _ = write!(out, "{x:>width$} ");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "({} patterns)", self.patterns.len());
        out
    }
}

/// Calls `f` on every labeling of `n` sites by `q` symbols in
/// lexicographic order.
pub(crate) fn for_each_labeling(n: usize, q: usize, mut f: impl FnMut(&[u8])) {
    if q == 0 {
        if n == 0 {
            f(&[]);
        }
        return;
    }
    let mut cur = vec![0u8; n];
    loop {
        f(&cur);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if (cur[i] as usize) + 1 < q {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
        }
    }
}

/// `(Y, Z) ∈ V̂_r`, i.e. equality of the radius-`r` projections.
pub fn window_entourage_check(p: &WindowSet, q: &WindowSet) -> Result<bool> {
    p.check_compatible(q)?;
    Ok(p.patterns == q.patterns)
}

/// A shift-space-like object that exposes its projections `π_r` on demand.
pub trait Subshift: Sync {
    fn rank(&self) -> usize;

    fn alphabet(&self) -> usize;

    /// `π_r` of the underlying set.
    fn window(&self, radius: usize) -> Result<WindowSet>;

    fn contains_pattern(&self, p: &WindowPattern) -> Result<bool> {
        Ok(self.window(p.radius())?.contains(p))
    }
}

/// A family of projections given explicitly, one set per radius `0..=rmax`.
#[derive(Debug, Clone)]
pub struct ExplicitFamily {
    alphabet: usize,
    sets: Vec<WindowSet>,
}

impl ExplicitFamily {
    pub fn new(alphabet: usize, sets: Vec<WindowSet>) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::Invalid("empty family".into()));
        };
        for (r, s) in sets.iter().enumerate() {
            if s.radius != r {
                return Err(Error::RadiusMismatch(r, s.radius));
            }
            if s.rank != first.rank {
                return Err(Error::RankMismatch(first.rank, s.rank));
            }
        }
        Ok(ExplicitFamily { alphabet, sets })
    }

    /// Family of restrictions of a single top-radius set.
    pub fn from_top(alphabet: usize, top: &WindowSet) -> Result<Self> {
        let sets = (0..=top.radius).map(|r| top.restrict(r)).collect::<Result<_>>()?;
        Self::new(alphabet, sets)
    }
}

impl Subshift for ExplicitFamily {
    fn rank(&self) -> usize {
        self.sets[0].rank
    }

    fn alphabet(&self) -> usize {
        self.alphabet
    }

    fn window(&self, radius: usize) -> Result<WindowSet> {
        self.sets.get(radius).cloned().ok_or(Error::InsufficientRadius {
            needed: radius,
            actual: self.sets.len() - 1,
        })
    }
}

/// Largest `r <= rmax` such that the projections agree at every radius
/// `t <= r`.
pub fn hb_agreement_radius(y: &dyn Subshift, z: &dyn Subshift, rmax: usize) -> Result<AgreementRadius> {
    if y.rank() != z.rank() {
        return Err(Error::RankMismatch(y.rank(), z.rank()));
    }
    for r in 0..=rmax {
        if !window_entourage_check(&y.window(r)?, &z.window(r)?)? {
            return Ok(match r {
                0 => AgreementRadius::Apart,
                _ => AgreementRadius::Exactly(r - 1),
            });
        }
    }
    Ok(AgreementRadius::AtLeast(rmax))
}

/// The union map preserves the entourage: if `(Y1, Y2)` and `(Z1, Z2)` are
/// `V̂_r`-close then so are `(Y1 ∪ Z1, Y2 ∪ Z2)`. Returns whether the
/// implication holds on this input.
pub fn hb_union_property_check(y1: &WindowSet, y2: &WindowSet, z1: &WindowSet, z2: &WindowSet) -> Result<bool> {
    let premise = window_entourage_check(y1, y2)? && window_entourage_check(z1, z2)?;
    let conclusion = window_entourage_check(&y1.union(z1)?, &y2.union(z2)?)?;
    Ok(!premise || conclusion)
}

/// A map on windows with continuity modulus `m`: a pattern of radius
/// `r + m` determines the image pattern of radius `r`.
pub trait WindowMap {
    fn rank(&self) -> usize;

    fn modulus(&self) -> usize;

    fn apply_window(&self, p: &WindowPattern) -> Result<WindowPattern>;
}

/// Restriction by `m` radii, the identity map with modulus `m`.
#[derive(Debug, Clone, Copy)]
pub struct Restriction {
    pub rank: usize,
    pub by: usize,
}

impl WindowMap for Restriction {
    fn rank(&self) -> usize {
        self.rank
    }

    fn modulus(&self) -> usize {
        self.by
    }

    fn apply_window(&self, p: &WindowPattern) -> Result<WindowPattern> {
        let r = p.radius.checked_sub(self.by).ok_or(Error::InsufficientRadius {
            needed: self.by,
            actual: p.radius,
        })?;
        p.restrict(r)
    }
}

/// `{ f(p) : p ∈ P }`, of radius `P.radius - m`.
pub fn pushforward_window(p: &WindowSet, f: &dyn WindowMap) -> Result<WindowSet> {
    if f.rank() != p.rank {
        return Err(Error::RankMismatch(f.rank(), p.rank));
    }
    let r = p.radius.checked_sub(f.modulus()).ok_or(Error::ModulusMismatch {
        expected: f.modulus(),
        actual: p.radius,
    })?;
    let mut out = WindowSet::empty(p.rank, r);
    for pat in p.iter() {
        out.insert(f.apply_window(&pat)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_set(rank: usize, radius: usize, mask: &[bool]) -> WindowSet {
        let full = WindowSet::full(rank, 2, radius).unwrap();
        let mut s = WindowSet::empty(rank, radius);
        for (p, &keep) in full.iter().zip(mask.iter().cycle()) {
            if keep {
                s.insert(p).unwrap();
            }
        }
        s
    }

    #[test]
    fn full_window_sizes() {
        assert_eq!(WindowSet::full(1, 2, 1).unwrap().len(), 8);
        assert_eq!(WindowSet::full(2, 2, 1).unwrap().len(), 32);
        assert_eq!(WindowSet::full(1, 3, 0).unwrap().len(), 3);
    }

    #[test]
    fn restriction_is_prefix() {
        let p = WindowPattern::from_fn(1, 2, |w| w.exponent_sum(0).rem_euclid(3) as u8).unwrap();
        // shortlex: 1, a, A, aa, AA
        assert_eq!(p.labels(), &[0, 1, 2, 2, 1]);
        assert_eq!(p.restrict(1).unwrap().labels(), &[0, 1, 2]);
        assert_eq!(p.get(&"AA".parse().unwrap()), Some(1));
        assert_eq!(p.get(&"aaa".parse().unwrap()), None);
        assert!(p.restrict(3).is_err());
    }

    #[test]
    fn entourage_check_errors_on_mismatch() {
        let a = WindowSet::full(1, 2, 1).unwrap();
        let b = WindowSet::full(1, 2, 2).unwrap();
        assert!(matches!(window_entourage_check(&a, &b), Err(Error::RadiusMismatch(1, 2))));
        assert!(window_entourage_check(&a, &a).unwrap());
    }

    #[test]
    fn pushforward_basics() {
        let full2 = WindowSet::full(1, 2, 2).unwrap();
        let f = Restriction { rank: 1, by: 1 };
        assert_eq!(pushforward_window(&full2, &f).unwrap(), WindowSet::full(1, 2, 1).unwrap());
        let empty = WindowSet::empty(1, 2);
        assert!(pushforward_window(&empty, &f).unwrap().is_empty());
        let small = WindowSet::full(1, 2, 0).unwrap();
        assert!(matches!(
            pushforward_window(&small, &f),
            Err(Error::ModulusMismatch { expected: 1, actual: 0 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let s = random_set(2, 1, &[true, false, false, true, true]);
        let csv = s.to_csv();
        assert!(csv.starts_with("1,a,A,b,B\n"));
        assert_eq!(WindowSet::from_csv(&csv, 2).unwrap(), s);
        let s0 = WindowSet::full(3, 2, 0).unwrap();
        assert_eq!(WindowSet::from_csv(&s0.to_csv(), 3).unwrap(), s0);
    }

    #[test]
    fn ultrametric_entourages_compose_trivially() {
        // V_r ∘ V_r = V_r, checked with radius-(r+1) patterns standing in for
        // configurations.
        for r in 0..=2 {
            let top = r + 1;
            let full = WindowSet::full(1, 2, top).unwrap();
            let pats: Vec<WindowPattern> = full.iter().collect();
            let close = |x: &WindowPattern, y: &WindowPattern| x.restrict(r).unwrap() == y.restrict(r).unwrap();
            for x in &pats {
                for z in &pats {
                    let composed = pats.iter().any(|y| close(x, y) && close(y, z));
                    assert_eq!(composed, close(x, z));
                }
            }
        }
    }

    #[test]
    fn hb_radius_uniqueness_of_limits() {
        let top = random_set(1, 3, &[true, true, false]);
        let h = ExplicitFamily::from_top(2, &top).unwrap();
        let f = h.clone();
        assert_eq!(hb_agreement_radius(&f, &h, 3).unwrap(), AgreementRadius::AtLeast(3));
    }

    proptest! {
        #[test]
        fn union_map_preserves_entourage(m1 in proptest::collection::vec(any::<bool>(), 7),
                                         m2 in proptest::collection::vec(any::<bool>(), 5),
                                         same_y in any::<bool>(), same_z in any::<bool>()) {
            let y1 = random_set(1, 1, &m1);
            let y2 = if same_y { y1.clone() } else { random_set(1, 1, &m2) };
            let z1 = random_set(1, 1, &m2);
            let z2 = if same_z { z1.clone() } else { random_set(1, 1, &m1) };
            prop_assert!(hb_union_property_check(&y1, &y2, &z1, &z2).unwrap());
        }

        #[test]
        fn projection_monotonicity(m1 in proptest::collection::vec(any::<bool>(), 11), r in 0usize..3) {
            let p = random_set(1, 2, &m1);
            let q = p.clone();
            prop_assert!(window_entourage_check(&p, &q).unwrap());
            if window_entourage_check(&p, &q).unwrap() {
                prop_assert!(window_entourage_check(&p.restrict(r).unwrap(), &q.restrict(r).unwrap()).unwrap());
            }
        }

        #[test]
        fn containment_passes_to_limits(m1 in proptest::collection::vec(any::<bool>(), 9),
                                        m2 in proptest::collection::vec(any::<bool>(), 9)) {
            // Y_i ⊂ Z_i at the top radius implies containment at every radius.
            let y = random_set(1, 2, &m1);
            let z = y.union(&random_set(1, 2, &m2)).unwrap();
            for r in 0..=2 {
                prop_assert!(y.restrict(r).unwrap().is_subset(&z.restrict(r).unwrap()).unwrap());
            }
        }
    }
}
