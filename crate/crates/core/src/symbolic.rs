//! Finite words over the alphabet `{1..N}` and composed maps.
//!
//! Words are stored in reading order `i_1 i_2 ... i_n`. The forward
//! composition is `f_{i_1} ∘ ... ∘ f_{i_n}`; the reversed one is
//! `f_{i_n} ∘ ... ∘ f_{i_1}`, which applies `i_1` first.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, EvalError};
use crate::ifs::System;
use crate::jet::Jet;
use crate::scalar::Scalar;

pub const DEFAULT_WORD_CAP: u128 = 10_000_000;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn new(letters: Vec<u32>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<u32> {
        self.0.first().copied()
    }

    pub fn reverse(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// The first `n` letters (the whole word if shorter).
    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    /// `w` repeated `times` times.
    pub fn repeat(&self, times: usize) -> Word {
        Word(self.0.repeat(times))
    }

    pub fn check(&self, arity: usize) -> Result<(), Error> {
        match self.0.iter().find(|&&l| l == 0 || l as usize > arity) {
            Some(&letter) => Err(Error::LetterOutOfRange { letter, arity }),
            None => Ok(()),
        }
    }
}

impl From<&[u32]> for Word {
    fn from(v: &[u32]) -> Self {
        Word(v.to_vec())
    }
}

impl<const N: usize> From<[u32; N]> for Word {
    fn from(v: [u32; N]) -> Self {
        Word(v.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::empty());
        }
        s.split(',')
            .map(|t| {
                t.trim().parse::<u32>().map_err(|_| {
                    Error::InvalidArgument(alloc::format!("bad letter `{}` in word", t.trim()))
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::string::String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Longest common prefix.
pub fn common_prefix(a: &Word, b: &Word) -> Word {
    let n = a.0.iter().zip(&b.0).take_while(|(x, y)| x == y).count();
    a.prefix(n)
}

/// Eventually periodic infinite word `preperiod period period ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicWord {
    pub preperiod: Word,
    pub period: Word,
}

impl PeriodicWord {
    pub fn new(preperiod: Word, period: Word) -> Result<Self, Error> {
        if period.is_empty() {
            return Err(Error::InvalidArgument(alloc::string::String::from(
                "period must be nonempty",
            )));
        }
        Ok(PeriodicWord { preperiod, period })
    }

    /// `(period)^∞`.
    pub fn pure(period: Word) -> Result<Self, Error> {
        Self::new(Word::empty(), period)
    }

    /// The first `n` letters.
    pub fn truncate(&self, n: usize) -> Word {
        let mut v: Vec<u32> = self.preperiod.0.iter().copied().take(n).collect();
        let p = &self.period.0;
        while v.len() < n {
            v.push(p[(v.len() - self.preperiod.len()) % p.len()]);
        }
        Word(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "lowercase")
)]
pub enum Orientation {
    /// `f_{i_1} ∘ ... ∘ f_{i_n}`
    Forward,
    /// `f_{i_n} ∘ ... ∘ f_{i_1}`
    Reversed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComposedJet {
    pub word: Word,
    pub orientation: Orientation,
    pub jet: Jet<f64>,
}

/// Compose jets letter by letter with a user-supplied map jet.
pub fn compose_with<T: Scalar>(
    word: &Word,
    orientation: Orientation,
    inner: Jet<T>,
    mut map_jet: impl FnMut(usize, &Jet<T>) -> Result<Jet<T>, EvalError>,
) -> Result<Jet<T>, EvalError> {
    let mut j = inner;
    match orientation {
        Orientation::Forward => {
            for &l in word.0.iter().rev() {
                j = map_jet(l as usize - 1, &j)?;
            }
        }
        Orientation::Reversed => {
            for &l in word.0.iter() {
                j = map_jet(l as usize - 1, &j)?;
            }
        }
    }
    Ok(j)
}

pub fn compose_eval<S: System + ?Sized>(
    sys: &S,
    word: &Word,
    orientation: Orientation,
    x: f64,
    order: usize,
) -> Result<ComposedJet, Error> {
    word.check(sys.arity())?;
    let jet = compose_with(word, orientation, Jet::variable(x, order)?, |i, j| {
        sys.map_jet(i, j)
    })?;
    Ok(ComposedJet {
        word: word.clone(),
        orientation,
        jet,
    })
}

/// Value of the composition only.
pub fn compose_value<S: System + ?Sized>(
    sys: &S,
    word: &Word,
    orientation: Orientation,
    x: f64,
) -> Result<f64, EvalError> {
    let mut v = x;
    let mut step = |l: u32| -> Result<(), EvalError> {
        v = sys.map_value(l as usize - 1, v)?;
        Ok(())
    };
    match orientation {
        Orientation::Forward => word.0.iter().rev().try_for_each(|&l| step(l))?,
        Orientation::Reversed => word.0.iter().try_for_each(|&l| step(l))?,
    }
    Ok(v)
}

/// Lexicographic enumeration of all words of a fixed length.
#[derive(Clone, Debug)]
pub struct Words {
    arity: u32,
    current: Option<Vec<u32>>,
}

impl Iterator for Words {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let cur = self.current.as_mut()?;
        let out = Word(cur.clone());
        let mut k = cur.len();
        loop {
            if k == 0 {
                self.current = None;
                break;
            }
            k -= 1;
            if cur[k] < self.arity {
                cur[k] += 1;
                for l in cur.iter_mut().skip(k + 1) {
                    *l = 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Number of words of length `n` over `arity` letters, saturating.
pub fn word_count(arity: usize, n: usize) -> u128 {
    let mut c: u128 = 1;
    for _ in 0..n {
        c = c.saturating_mul(arity as u128);
    }
    c
}

pub fn enumerate_words(arity: usize, n: usize) -> Result<Words, Error> {
    enumerate_words_capped(arity, n, DEFAULT_WORD_CAP)
}

pub fn enumerate_words_capped(arity: usize, n: usize, cap: u128) -> Result<Words, Error> {
    if arity == 0 {
        return Err(Error::InvalidArgument(alloc::string::String::from(
            "arity must be at least 1",
        )));
    }
    let count = word_count(arity, n);
    if count > cap {
        return Err(Error::SizeLimit { count, cap });
    }
    Ok(Words {
        arity: arity as u32,
        current: Some(alloc::vec![1; n]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Projection {
    pub value: f64,
    /// `|π(w) - value| <= error_bound`.
    pub error_bound: f64,
}

/// `f_{i_1 ... i_n}(0)` with the tail bound `c_max^n`.
pub fn natural_projection<S: System + ?Sized>(
    sys: &S,
    word: &Word,
    depth: usize,
) -> Result<Projection, Error> {
    if word.len() < depth {
        return Err(Error::InvalidArgument(alloc::format!(
            "word of length {} is shorter than the depth {depth}",
            word.len()
        )));
    }
    let w = word.prefix(depth);
    w.check(sys.arity())?;
    let value = compose_value(sys, &w, Orientation::Forward, 0.0)?;
    let c = sys.contraction_bound();
    Ok(Projection {
        value,
        error_bound: libm::pow(c, depth as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::Ifs;
    use alloc::string::ToString;

    fn three_maps() -> Ifs {
        Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap()
    }

    #[test]
    fn empty_word_is_identity() {
        let s = three_maps();
        let c = compose_eval(&s, &Word::empty(), Orientation::Forward, 0.3, 2).unwrap();
        assert_eq!(c.jet.derivatives(), &[0.3, 1.0, 0.0]);
    }

    #[test]
    fn linear_composition() {
        let s = three_maps();
        let c = compose_eval(&s, &Word::from([1, 1]), Orientation::Forward, 1.0, 1).unwrap();
        assert_eq!(c.jet.derivatives(), &[1.0 / 64.0, 1.0 / 64.0]);
    }

    #[test]
    fn reversed_chain_rule() {
        let s = three_maps();
        let c = compose_eval(&s, &Word::from([2, 3]), Orientation::Reversed, 0.0, 1).unwrap();
        assert_eq!(c.jet.value(), 29.0 / 32.0);
        assert_eq!(c.jet.derivative(1), 1.0 / 128.0);
        let f = compose_eval(&s, &Word::from([3, 2]), Orientation::Forward, 0.0, 1).unwrap();
        assert_eq!(c.jet, f.jet);
    }

    #[test]
    fn bad_letter() {
        let s = three_maps();
        let e = compose_eval(&s, &Word::from([4]), Orientation::Forward, 0.0, 0).unwrap_err();
        assert_eq!(
            e,
            Error::LetterOutOfRange {
                letter: 4,
                arity: 3
            }
        );
    }

    #[test]
    fn prefixes() {
        let a = Word::from([1, 2, 3]);
        assert_eq!(
            common_prefix(&a, &Word::from([1, 2, 1])),
            Word::from([1, 2])
        );
        assert_eq!(common_prefix(&a, &Word::from([2, 2, 3])), Word::empty());
        assert_eq!(common_prefix(&a, &a), a);
    }

    #[test]
    fn enumeration() {
        let w: Vec<Word> = enumerate_words(2, 2).unwrap().collect();
        assert_eq!(w, [[1, 1], [1, 2], [2, 1], [2, 2]].map(Word::from).to_vec());
        assert_eq!(
            enumerate_words(3, 0).unwrap().collect::<Vec<_>>(),
            alloc::vec![Word::empty()]
        );
        assert_eq!(enumerate_words(3, 6).unwrap().count(), 729);
        assert!(matches!(
            enumerate_words(10, 8),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn projections() {
        let s = three_maps();
        let ones = PeriodicWord::pure(Word::from([1])).unwrap();
        assert_eq!(
            natural_projection(&s, &ones.truncate(10), 10)
                .unwrap()
                .value,
            0.0
        );
        let threes = PeriodicWord::pure(Word::from([3])).unwrap();
        let p = natural_projection(&s, &threes.truncate(30), 30).unwrap();
        assert!((p.value - 1.0).abs() <= p.error_bound);
        assert!(p.error_bound < 1e-20);
    }

    #[test]
    fn periodic_truncation_and_text() {
        let w = PeriodicWord::new(Word::from([3]), Word::from([1, 2])).unwrap();
        assert_eq!(w.truncate(6), Word::from([3, 1, 2, 1, 2, 1]));
        let t = Word::from([1, 2, 3]);
        assert_eq!(t.to_string(), "1,2,3");
        assert_eq!("1, 2,3".parse::<Word>().unwrap(), t);
    }
}
