//! Freely reduced words over a finite set of free generators and balls of
//! such words in shortlex order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::limits;

/// Maximum rank; generators are written `a..z`, inverses `A..Z`.
pub const MAX_RANK: usize = 26;

/// A generator or its inverse. Ordered `a < A < b < B < ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub generator: u8,
    pub inverse: bool,
}

impl Letter {
    pub const fn new(generator: u8, inverse: bool) -> Self {
        Letter { generator, inverse }
    }

    pub const fn gen(generator: u8) -> Self {
        Letter::new(generator, false)
    }

    pub const fn inv(self) -> Self {
        Letter::new(self.generator, !self.inverse)
    }

    /// Letters of a rank-`k` free group in shortlex order.
    pub fn all(rank: usize) -> impl Iterator<Item = Letter> + Clone {
        (0..rank as u8).flat_map(|g| [Letter::new(g, false), Letter::new(g, true)])
    }

    fn to_char(self) -> char {
        let c = (b'a' + self.generator) as char;
        if self.inverse {
            c.to_ascii_uppercase()
        } else {
            c
        }
    }
}

/// A freely reduced word. Ordering is shortlex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FreeWord {
    letters: Vec<Letter>,
}

impl FreeWord {
    pub fn identity() -> Self {
        FreeWord::default()
    }

    /// Builds a word from letters, freely reducing it.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut w = FreeWord::identity();
        for l in letters {
            w.push(l);
        }
        w
    }

    pub fn generator(g: u8) -> Self {
        FreeWord {
            letters: vec![Letter::gen(g)],
        }
    }

    /// `a^e` for the generator `g`; negative exponents use the inverse.
    pub fn power(g: u8, e: i64) -> Self {
        let l = Letter::new(g, e < 0);
        FreeWord {
            letters: vec![l; e.unsigned_abs() as usize],
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// Smallest rank in which this word lives.
    pub fn min_rank(&self) -> usize {
        self.letters
            .iter()
            .map(|l| l.generator as usize + 1)
            .max()
            .unwrap_or(0)
    }

    fn push(&mut self, l: Letter) {
        if self.letters.last() == Some(&l.inv()) {
            self.letters.pop();
        } else {
            self.letters.push(l);
        }
    }

    /// Reduced product `self · other`.
    pub fn mul(&self, other: &FreeWord) -> FreeWord {
        let mut w = self.clone();
        for &l in &other.letters {
            w.push(l);
        }
        w
    }

    pub fn inverse(&self) -> FreeWord {
        FreeWord {
            letters: self.letters.iter().rev().map(|l| l.inv()).collect(),
        }
    }

    /// Exponent sum of generator `g`.
    pub fn exponent_sum(&self, g: u8) -> i64 {
        self.letters
            .iter()
            .filter(|l| l.generator == g)
            .map(|l| if l.inverse { -1 } else { 1 })
            .sum()
    }
}

impl Ord for FreeWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for FreeWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl Serialize for FreeWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Parses `1` (identity) or a string of letters `a`/`A`, `b`/`B`, ...
/// The input need not be reduced.
impl FromStr for FreeWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(FreeWord::identity());
        }
        if s.is_empty() {
            return Err(Error::Invalid("empty word".into()));
        }
        let mut letters = Vec::with_capacity(s.len());
        for c in s.chars() {
            let l = match c {
                'a'..='z' => Letter::new(c as u8 - b'a', false),
                'A'..='Z' => Letter::new(c as u8 - b'A', true),
                _ => return Err(Error::Invalid(format!("bad letter `{c}` in word `{s}`"))),
            };
            letters.push(l);
        }
        Ok(FreeWord::from_letters(letters))
    }
}

/// Number of reduced words of length `<= r` in a free group of rank `k`:
/// `1 + sum_{i=1..r} 2k (2k-1)^(i-1)`.
pub fn ball_size(rank: usize, radius: usize) -> u128 {
    let mut total: u128 = 1;
    let mut sphere: u128 = 0;
    for i in 1..=radius {
        sphere = if i == 1 {
            2 * rank as u128
        } else {
            sphere.saturating_mul(2 * rank as u128 - 1)
        };
        total = total.saturating_add(sphere);
        if rank == 0 {
            break;
        }
    }
    total
}

/// All reduced words of length `<= radius` in shortlex order, with an index.
///
/// Since shortlex sorts by length first, the ball of radius `r'` is a prefix
/// of the ball of radius `r >= r'`; window restriction is truncation.
#[derive(Debug, Clone)]
pub struct Ball {
    rank: usize,
    radius: usize,
    words: Vec<FreeWord>,
    index: HashMap<FreeWord, usize>,
}

impl Ball {
    pub fn new(rank: usize, radius: usize) -> Result<Self> {
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Invalid(format!("rank must be in 1..={MAX_RANK}, got {rank}")));
        }
        limits::check("free ball", ball_size(rank, radius))?;
        let mut words = vec![FreeWord::identity()];
        let mut start = 0;
        for _ in 0..radius {
            let end = words.len();
            for i in start..end {
                let last = words[i].letters.last().copied();
                for l in Letter::all(rank) {
                    if Some(l.inv()) == last {
                        continue;
                    }
                    let mut letters = words[i].letters.clone();
                    letters.push(l);
                    words.push(FreeWord { letters });
                }
            }
            start = end;
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(Ball {
            rank,
            radius,
            words,
            index,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn words(&self) -> &[FreeWord] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, w: &FreeWord) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Number of words of length `<= r` (the prefix forming the smaller ball).
    pub fn prefix_len(&self, r: usize) -> usize {
        self.words.partition_point(|w| w.len() <= r)
    }
}

/// Shortlex-ordered free ball of radius `r`; fails past the resource cap.
pub fn free_ball(rank: usize, radius: usize) -> Result<Vec<FreeWord>> {
    Ok(Ball::new(rank, radius)?.words)
}
