//! Configurations, the shift action, `Fix(N)` and its window projections,
//! and the pullback `ρ*: A^G → Fix(N)`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{Element, MarkedGroup};
use crate::limits;
use crate::window::{ball, for_each_labeling, Subshift, WindowPattern, WindowSet};
use crate::word::FreeWord;

/// A configuration `x ∈ A^G` over a finite marked group, indexed by element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteConfiguration {
    group: Arc<MarkedGroup>,
    values: Vec<u8>,
}

impl FiniteConfiguration {
    pub fn new(group: Arc<MarkedGroup>, values: Vec<u8>) -> Result<Self> {
        let n = group.finite_order()?;
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {} values, group has {n} elements",
                values.len()
            )));
        }
        Ok(FiniteConfiguration { group, values })
    }

    pub fn group(&self) -> &Arc<MarkedGroup> {
        &self.group
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, g: usize) -> u8 {
        self.values[g]
    }

    /// `(g x)(h) = x(g⁻¹ h)`.
    pub fn shift(&self, g: usize) -> Result<Self> {
        let n = self.values.len();
        if g >= n {
            return Err(Error::OutOfRange(g));
        }
        let gi = self.group.inv_index(g);
        let values = (0..n).map(|h| self.values[self.group.mul_index(gi, h)]).collect();
        Ok(FiniteConfiguration {
            group: self.group.clone(),
            values,
        })
    }

    /// Shift by the image of a free word.
    pub fn shift_by_word(&self, w: &FreeWord) -> Result<Self> {
        self.shift(self.group.eval_index(w)?)
    }
}

/// A configuration in `A^Z` fixed by `nZ`, given by one period.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeriodicConfiguration {
    values: Vec<u8>,
}

impl PeriodicConfiguration {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("period must be at least 1".into()));
        }
        Ok(PeriodicConfiguration { values })
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, i: i64) -> u8 {
        self.values[i.rem_euclid(self.values.len() as i64) as usize]
    }

    /// `(k x)(i) = x(i - k)`.
    pub fn shift(&self, k: i64) -> Self {
        let n = self.values.len() as i64;
        PeriodicConfiguration {
            values: (0..n).map(|i| self.get(i - k)).collect(),
        }
    }

    /// Shift by a word of the rank-1 free group.
    pub fn shift_by_word(&self, w: &FreeWord) -> Result<Self> {
        if w.min_rank() > 1 {
            return Err(Error::RankMismatch(1, w.min_rank()));
        }
        Ok(self.shift(w.exponent_sum(0)))
    }

    /// The same configuration seen over the finite quotient `Z/n`.
    pub fn to_finite(&self) -> FiniteConfiguration {
        FiniteConfiguration {
            group: Arc::new(MarkedGroup::cyclic(1, self.values.len()).expect("positive period")),
            values: self.values.clone(),
        }
    }

    pub fn from_finite(x: &FiniteConfiguration) -> Result<Self> {
        match (x.group.rank(), x.group.backend()) {
            (1, crate::group::Backend::Cyclic(_)) => Self::new(x.values.clone()),
            _ => Err(Error::Invalid("not a configuration over a cyclic quotient of Z".into())),
        }
    }

    /// Smallest period `p` dividing the stored length with `x(i + p) = x(i)`.
    pub fn minimal_period(&self) -> usize {
        let n = self.values.len();
        (1..=n)
            .find(|&p| n.is_multiple_of(p) && (0..n).all(|i| self.values[i] == self.values[(i + p) % n]))
            .unwrap_or(n)
    }

    /// The point in canonical form: one minimal period starting at 0.
    pub fn canonical(&self) -> PeriodicConfiguration {
        PeriodicConfiguration {
            values: self.values[..self.minimal_period()].to_vec(),
        }
    }

    /// Pattern of radius `r` centered at 0.
    pub fn window(&self, r: usize) -> Result<WindowPattern> {
        WindowPattern::from_fn(1, r, |w| self.get(w.exponent_sum(0)))
    }
}

impl fmt::Display for PeriodicConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses the comma-separated literal `0,0,0,1`.
impl FromStr for PeriodicConfiguration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(parse_symbols(s)?)
    }
}

pub fn parse_symbols(s: &str) -> Result<Vec<u8>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u8>()
                .map_err(|_| Error::parse(1, format!("bad symbol `{}` in configuration", t.trim())))
        })
        .collect()
}

/// Shifts a window pattern by a word `s`: `(s p)(w) = p(s⁻¹ w)`. The result
/// has radius `p.radius - |s|`.
pub fn shift_window(p: &WindowPattern, s: &FreeWord) -> Result<WindowPattern> {
    let r = p.radius().checked_sub(s.len()).ok_or(Error::InsufficientRadius {
        needed: s.len(),
        actual: p.radius(),
    })?;
    let big = ball(p.rank(), p.radius())?;
    let si = s.inverse();
    WindowPattern::from_fn(p.rank(), r, |w| {
        p.labels()[big.index_of(&si.mul(w)).expect("inside the ball")]
    })
}

/// Class id of each ball word of radius `r` under equality in `G`, classes
/// numbered by first appearance in shortlex order.
pub fn coset_classes(g: &MarkedGroup, r: usize) -> Result<(Vec<usize>, usize)> {
    let b = ball(g.rank(), r)?;
    let mut ids: HashMap<Element, usize> = HashMap::new();
    let classes = b
        .words()
        .iter()
        .map(|w| {
            let n = ids.len();
            *ids.entry(g.evaluate(w)).or_insert(n)
        })
        .collect();
    Ok((classes, ids.len()))
}

/// `π_r(Fix(N))`: every labeling of `B_r` constant on the classes of
/// ball words modulo `N`. Has `q^(#classes)` patterns.
pub fn fix_window(g: &MarkedGroup, q: usize, r: usize) -> Result<WindowSet> {
    let (classes, count) = coset_classes(g, r)?;
    limits::check("window set", limits::pow_sat(q as u128, count))?;
    let mut set = WindowSet::empty(g.rank(), r);
    for_each_labeling(count, q, |lab| {
        set.insert_labels(classes.iter().map(|&c| lab[c]).collect());
    });
    Ok(set)
}

/// `Fix(N) ⊂ A^Γ` as a lazily projected subshift.
#[derive(Debug, Clone)]
pub struct FixSubshift {
    group: MarkedGroup,
    alphabet: usize,
}

impl FixSubshift {
    pub fn new(group: MarkedGroup, alphabet: usize) -> Self {
        FixSubshift { group, alphabet }
    }

    pub fn group(&self) -> &MarkedGroup {
        &self.group
    }
}

impl Subshift for FixSubshift {
    fn rank(&self) -> usize {
        self.group.rank()
    }

    fn alphabet(&self) -> usize {
        self.alphabet
    }

    fn window(&self, radius: usize) -> Result<WindowSet> {
        fix_window(&self.group, self.alphabet, radius)
    }

    fn contains_pattern(&self, p: &WindowPattern) -> Result<bool> {
        if p.rank() != self.rank() || p.labels().iter().any(|&x| x as usize >= self.alphabet) {
            return Ok(false);
        }
        let (classes, count) = coset_classes(&self.group, p.radius())?;
        let mut seen: Vec<Option<u8>> = vec![None; count];
        for (&c, &x) in classes.iter().zip(p.labels()) {
            match seen[c] {
                Some(y) if y != x => return Ok(false),
                _ => seen[c] = Some(x),
            }
        }
        Ok(true)
    }
}

/// The full shift `A^Γ`.
#[derive(Debug, Clone, Copy)]
pub struct FullShift {
    pub rank: usize,
    pub alphabet: usize,
}

impl Subshift for FullShift {
    fn rank(&self) -> usize {
        self.rank
    }

    fn alphabet(&self) -> usize {
        self.alphabet
    }

    fn window(&self, radius: usize) -> Result<WindowSet> {
        WindowSet::full(self.rank, self.alphabet, radius)
    }

    fn contains_pattern(&self, p: &WindowPattern) -> Result<bool> {
        Ok(p.rank() == self.rank && p.labels().iter().all(|&x| (x as usize) < self.alphabet))
    }
}

/// `ρ*(y) = y ∘ ρ`, a configuration on `Γ` constant on cosets of `N`.
#[derive(Debug, Clone)]
pub struct Pullback {
    y: FiniteConfiguration,
}

impl Pullback {
    pub fn label(&self, w: &FreeWord) -> u8 {
        self.y.values[self.y.group.eval_index(w).expect("finite group")]
    }

    pub fn window(&self, r: usize) -> Result<WindowPattern> {
        WindowPattern::from_fn(self.y.group.rank(), r, |w| self.label(w))
    }

    pub fn source(&self) -> &FiniteConfiguration {
        &self.y
    }
}

pub fn rho_star(y: &FiniteConfiguration) -> Pullback {
    Pullback { y: y.clone() }
}

/// `(ρ*)⁻¹` on a window: reads one value per coset. Fails if the window is
/// not coset-constant or misses a coset.
pub fn rho_star_inverse(group: &Arc<MarkedGroup>, p: &WindowPattern) -> Result<FiniteConfiguration> {
    if p.rank() != group.rank() {
        return Err(Error::RankMismatch(group.rank(), p.rank()));
    }
    let n = group.finite_order()?;
    let b = ball(p.rank(), p.radius())?;
    let mut values: Vec<Option<u8>> = vec![None; n];
    for (w, &x) in b.words().iter().zip(p.labels()) {
        let e = group.eval_index(w)?;
        match values[e] {
            Some(y) if y != x => {
                return Err(Error::IncompleteWindow(format!("labels differ on the coset of {w}")));
            }
            _ => values[e] = Some(x),
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::IncompleteWindow(format!("element e{i} not covered"))))
        .collect::<Result<_>>()?;
    FiniteConfiguration::new(group.clone(), values)
}

/// Every configuration in `A^G` for a finite `G`, lexicographic order.
pub fn all_configurations(group: &Arc<MarkedGroup>, q: usize) -> Result<Vec<FiniteConfiguration>> {
    let n = group.finite_order()?;
    limits::check("configurations", limits::pow_sat(q as u128, n))?;
    let mut out = Vec::new();
    for_each_labeling(n, q, |v| {
        out.push(FiniteConfiguration {
            group: group.clone(),
            values: v.to_vec(),
        })
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::hb_agreement_radius;
    use crate::AgreementRadius;

    fn cyc(n: usize) -> Arc<MarkedGroup> {
        Arc::new(MarkedGroup::cyclic(1, n).unwrap())
    }

    fn w(s: &str) -> FreeWord {
        s.parse().unwrap()
    }

    #[test]
    fn shift_examples() {
        let x = FiniteConfiguration::new(cyc(4), vec![0, 0, 0, 1]).unwrap();
        assert_eq!(x.shift(0).unwrap(), x);
        assert_eq!(x.shift(1).unwrap().values(), &[1, 0, 0, 0]);
        assert_eq!(x.shift(1).unwrap().shift(3).unwrap(), x);
        assert!(matches!(x.shift(4), Err(Error::OutOfRange(4))));
        let p: PeriodicConfiguration = "0,0,0,1".parse().unwrap();
        assert_eq!(p.shift(1).values(), &[1, 0, 0, 0]);
        assert_eq!(p.shift_by_word(&w("A")).unwrap().shift(-1), p.shift(-2));
    }

    #[test]
    fn action_law_on_s3() {
        let s3 = Arc::new(MarkedGroup::symmetric(3).unwrap());
        for x in all_configurations(&s3, 2).unwrap() {
            for g in 0..6 {
                for h in 0..6 {
                    let gh = s3.mul_index(g, h);
                    assert_eq!(x.shift(gh).unwrap(), x.shift(h).unwrap().shift(g).unwrap());
                }
            }
        }
    }

    #[test]
    fn fix_window_examples() {
        assert_eq!(fix_window(&cyc(2), 2, 2).unwrap().len(), 4);
        assert_eq!(fix_window(&MarkedGroup::trivial(2).unwrap(), 2, 3).unwrap().len(), 2);
        assert_eq!(fix_window(&MarkedGroup::free(1).unwrap(), 2, 2).unwrap().len(), 32);
        let (classes, count) = coset_classes(&cyc(2), 2).unwrap();
        // 1, a, A, aa, AA
        assert_eq!(classes, vec![0, 1, 1, 0, 0]);
        assert_eq!(count, 2);
    }

    #[test]
    fn fix_window_cardinality_formula() {
        let groups = [
            MarkedGroup::cyclic(1, 3).unwrap(),
            MarkedGroup::cyclic(2, 4).unwrap(),
            MarkedGroup::zd(2).unwrap(),
            MarkedGroup::free(2).unwrap(),
            MarkedGroup::symmetric(3).unwrap(),
        ];
        for g in &groups {
            for r in 0..=2 {
                let (_, count) = coset_classes(g, r).unwrap();
                for q in 1..=2usize {
                    assert_eq!(fix_window(g, q, r).unwrap().len(), q.pow(count as u32));
                }
            }
        }
        // Direct enumeration: windows of pullbacks of every y ∈ A^G.
        for g in [cyc(3), Arc::new(MarkedGroup::symmetric(3).unwrap())] {
            for r in 0..=2 {
                let direct = WindowSet::from_patterns(
                    g.rank(),
                    r,
                    all_configurations(&g, 2).unwrap().iter().map(|y| rho_star(y).window(r).unwrap()),
                )
                .unwrap();
                assert_eq!(direct, fix_window(&g, 2, r).unwrap());
            }
        }
    }

    #[test]
    fn fix_windows_for_distinct_kernels() {
        let f4 = fix_window(&cyc(4), 2, 1).unwrap();
        let f6 = fix_window(&cyc(6), 2, 1).unwrap();
        assert_eq!(f4.len(), 8);
        assert_eq!(f4, f6);
        let f4 = fix_window(&cyc(4), 2, 2).unwrap();
        let f6 = fix_window(&cyc(6), 2, 2).unwrap();
        assert_eq!((f4.len(), f6.len()), (16, 32));
    }

    #[test]
    fn hb_radius_fix_examples() {
        let fix = |n| FixSubshift::new(MarkedGroup::cyclic(1, n).unwrap(), 2);
        assert_eq!(hb_agreement_radius(&fix(4), &fix(6), 4).unwrap(), AgreementRadius::Exactly(1));
        let full = FullShift { rank: 1, alphabet: 2 };
        for n in 2..=9usize {
            let expected = n.div_ceil(2) - 1;
            assert_eq!(hb_agreement_radius(&fix(n), &full, 8).unwrap(), AgreementRadius::Exactly(expected));
        }
        assert_eq!(hb_agreement_radius(&fix(5), &fix(5), 6).unwrap(), AgreementRadius::AtLeast(6));
        let zeros = FixSubshift::new(MarkedGroup::trivial(1).unwrap(), 1);
        assert_eq!(hb_agreement_radius(&zeros, &full, 3).unwrap(), AgreementRadius::Apart);
    }

    #[test]
    fn rho_star_examples() {
        let y = FiniteConfiguration::new(cyc(2), vec![5, 7]).unwrap();
        let p = rho_star(&y);
        assert_eq!(p.label(&w("aaaa")), 5);
        assert_eq!(p.label(&w("AAA")), 7);

        let y = FiniteConfiguration::new(cyc(4), vec![0, 0, 0, 1]).unwrap();
        let win = rho_star(&y).window(4).unwrap();
        let ones: Vec<String> = ball(1, 4)
            .unwrap()
            .words()
            .iter()
            .zip(win.labels())
            .filter(|(_, &x)| x == 1)
            .map(|(w, _)| w.to_string())
            .collect();
        assert_eq!(ones, ["A", "aaa"]);
        assert!(FixSubshift::new(MarkedGroup::cyclic(1, 4).unwrap(), 2).contains_pattern(&win).unwrap());

        let triv = Arc::new(MarkedGroup::trivial(2).unwrap());
        let c = FiniteConfiguration::new(triv, vec![1]).unwrap();
        assert!(rho_star(&c).window(2).unwrap().labels().iter().all(|&x| x == 1));
    }

    #[test]
    fn rho_star_inverse_round_trip_and_errors() {
        let g = cyc(4);
        for y in all_configurations(&g, 2).unwrap() {
            let win = rho_star(&y).window(2).unwrap();
            assert_eq!(rho_star_inverse(&g, &win).unwrap(), y);
        }
        let short = rho_star(&FiniteConfiguration::new(g.clone(), vec![0, 1, 0, 1]).unwrap()).window(1).unwrap();
        assert!(matches!(rho_star_inverse(&g, &short), Err(Error::IncompleteWindow(_))));
        let bad = WindowPattern::new(1, 2, vec![0, 0, 0, 1, 0]).unwrap();
        assert!(matches!(rho_star_inverse(&g, &bad), Err(Error::IncompleteWindow(_))));
    }

    #[test]
    fn rho_star_is_injective_and_equivariant() {
        let groups = [cyc(5), cyc(8), Arc::new(MarkedGroup::symmetric(3).unwrap()), Arc::new(MarkedGroup::cyclic(2, 6).unwrap())];
        for g in groups {
            let lifts = g.transversal().unwrap();
            let ys = all_configurations(&g, 2).unwrap();
            let r = lifts.iter().map(FreeWord::len).max().unwrap();
            let mut seen = std::collections::HashSet::new();
            for y in &ys {
                assert!(seen.insert(rho_star(y).window(r).unwrap()));
                for (gi, lift) in lifts.iter().enumerate() {
                    let left = rho_star(&y.shift(gi).unwrap());
                    let right = rho_star(y);
                    for word in ball(g.rank(), r).unwrap().words() {
                        assert_eq!(left.label(word), right.label(&lift.inverse().mul(word)));
                    }
                }
            }
        }
    }

    #[test]
    fn fix_windows_are_shift_invariant() {
        for g in [MarkedGroup::cyclic(1, 3).unwrap(), MarkedGroup::symmetric(3).unwrap(), MarkedGroup::zd(2).unwrap()] {
            let fix = FixSubshift::new(g.clone(), 2);
            let r = 1;
            for p in fix_window(&g, 2, r + 1).unwrap().iter() {
                for s in crate::word::Letter::all(g.rank()) {
                    let shifted = shift_window(&p, &FreeWord::from_letters([s])).unwrap();
                    assert!(fix.contains_pattern(&shifted).unwrap());
                    assert!(fix.window(r).unwrap().contains(&shifted));
                }
            }
        }
    }

    #[test]
    fn periodic_canonical_form() {
        let p: PeriodicConfiguration = "0,1,0,1,0,1".parse().unwrap();
        assert_eq!(p.minimal_period(), 2);
        assert_eq!(p.canonical().values(), &[0, 1]);
        assert!("0,x".parse::<PeriodicConfiguration>().is_err());
    }
}
