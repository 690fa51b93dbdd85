//! Finite words, the weighted metric, quantization, and symbol streams.
//!
//! Positions are 0-based throughout the code; operator documentation and
//! reports that speak of "the i-th coordinate" use 1-based indices, matching
//! the usual convention for one-sided sequences, and each public function
//! states which indexing it exposes.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::dyadic::{Dyadic, DyadicError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("cannot shift a word of length {len} by {k}")]
    ShiftPastEnd { len: usize, k: usize },
    #[error("expected words of equal length, got {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("quantization step must satisfy 0 < eps <= 1, got {0}")]
    BadQuantizationStep(String),
    #[error("expected a nonnegative symbol, got {0}")]
    NegativeSymbol(String),
    #[error("symbol {index}: {source}")]
    BadSymbol {
        index: usize,
        #[source]
        source: DyadicError,
    },
    #[error("word is empty")]
    Empty,
    #[error("stream cannot serve a prefix of length {requested}: {reason}")]
    StreamRange { requested: u128, reason: String },
}

/// A word over real symbols; the working type of the real-valued pipeline.
pub type RealWord = Vec<Dyadic>;

/// A symbol of a general (possibly product) alphabet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Discrete symbol, rendered bare (`0`, `a`).
    Label(String),
    /// Real symbol, rendered as an exact dyadic literal.
    Real(Dyadic),
    /// Product symbol, rendered `left:right`.
    Pair(Box<Symbol>, Box<Symbol>),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Label(s) => write!(f, "{s}"),
            Symbol::Real(d) => write!(f, "{d}"),
            Symbol::Pair(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

/// A finite word over [`Symbol`]s.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub Vec<Symbol>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_labels<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Word(labels.into_iter().map(|s| Symbol::Label(s.into())).collect())
    }

    pub fn from_reals(reals: impl IntoIterator<Item = Dyadic>) -> Self {
        Word(reals.into_iter().map(Symbol::Real).collect())
    }
}

impl fmt::Display for Word {
    /// Space-separated symbol tokens; the line format of word dumps.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Drops the first `k` symbols (the `k`-fold shift restricted to a word).
pub fn shift<T: Clone>(w: &[T], k: usize) -> Result<Vec<T>, WordError> {
    if k > w.len() {
        return Err(WordError::ShiftPastEnd { len: w.len(), k });
    }
    Ok(w[k..].to_vec())
}

/// The weighted norm `sum_i |w(i)| 2^{-i}` (1-based `i`), computed exactly.
pub fn weighted_norm(w: &[Dyadic]) -> Dyadic {
    let mut acc = Dyadic::zero();
    for (i, x) in w.iter().enumerate() {
        acc = &acc + &x.abs().div_pow2(i as u32 + 1);
    }
    acc
}

/// Double-precision version of [`weighted_norm`] for streamed statistics.
pub fn weighted_norm_f64(w: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut scale = 0.5;
    for x in w {
        acc += x.abs() * scale;
        scale *= 0.5;
    }
    acc
}

/// The weighted distance `sum_i |a(i) - b(i)| 2^{-i}` on equal-length words.
pub fn weighted_distance(a: &[Dyadic], b: &[Dyadic]) -> Result<Dyadic, WordError> {
    if a.len() != b.len() {
        return Err(WordError::LengthMismatch(a.len(), b.len()));
    }
    let mut acc = Dyadic::zero();
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        acc = &acc + &(x - y).abs().div_pow2(i as u32 + 1);
    }
    Ok(acc)
}

/// `max_i |a(i) - b(i)|` on equal-length words.
pub fn sup_distance(a: &[Dyadic], b: &[Dyadic]) -> Result<Dyadic, WordError> {
    if a.len() != b.len() {
        return Err(WordError::LengthMismatch(a.len(), b.len()));
    }
    let mut best = Dyadic::zero();
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

/// Snaps each symbol of a nonnegative word to the grid `{0, eps, 2 eps, ...}`
/// by exact floor division: `floor(w(i)/eps) * eps`.
pub fn quantize(w: &[Dyadic], eps: &Dyadic) -> Result<RealWord, WordError> {
    if !eps.is_positive() || eps > &Dyadic::one() {
        return Err(WordError::BadQuantizationStep(eps.to_string()));
    }
    w.iter()
        .map(|x| {
            if x.is_negative() {
                return Err(WordError::NegativeSymbol(x.to_string()));
            }
            let steps = x.floor_div(eps);
            Ok(&Dyadic::new(steps, 0) * eps)
        })
        .collect()
}

/// Double-precision quantization for streamed statistics. Exactness of the
/// grid is not guaranteed here; the exact pipeline uses [`quantize`].
pub fn quantize_f64(w: &[f64], eps: f64) -> Vec<f64> {
    w.iter().map(|x| (x / eps).floor() * eps).collect()
}

/// A deterministic source of real symbols indexed from position 1.
///
/// `prefix(n)` must be consistent across calls: the result for a shorter
/// prefix is always an initial segment of the result for a longer one.
pub trait SymbolStream {
    /// The first `n` symbols, exactly.
    fn prefix(&self, n: u64) -> Result<RealWord, WordError>;

    /// The first `n` symbols at double precision.
    fn prefix_f64(&self, n: u64) -> Result<Vec<f64>, WordError> {
        Ok(self.prefix(n)?.iter().map(Dyadic::to_f64).collect())
    }
}

/// The periodic stream `w w w ...`.
pub struct PeriodicStream(pub RealWord);

impl SymbolStream for PeriodicStream {
    fn prefix(&self, n: u64) -> Result<RealWord, WordError> {
        if self.0.is_empty() {
            return Err(WordError::Empty);
        }
        let p = self.0.len();
        Ok((0..n as usize).map(|i| self.0[i % p].clone()).collect())
    }
}

/// The `k`-fold shift of a stream (drops the first `k` symbols).
pub struct ShiftedStream<'a, S: SymbolStream + ?Sized> {
    pub inner: &'a S,
    pub k: u64,
}

impl<S: SymbolStream + ?Sized> SymbolStream for ShiftedStream<'_, S> {
    fn prefix(&self, n: u64) -> Result<RealWord, WordError> {
        let mut w = self.inner.prefix(n + self.k)?;
        Ok(w.split_off(self.k as usize))
    }
}

/// Parses a whitespace-separated line of real symbols.
pub fn parse_real_word(line: &str) -> Result<RealWord, WordError> {
    line.split_whitespace()
        .enumerate()
        .map(|(index, tok)| tok.parse().map_err(|source| WordError::BadSymbol { index, source }))
        .collect()
}

/// Parses a whitespace-separated line of discrete symbols.
pub fn parse_labeled_word(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

/// Renders a real word in the word-file line format (exact dyadic tokens).
pub fn fmt_real_word(w: &[Dyadic]) -> String {
    w.iter().map(Dyadic::to_string).collect::<Vec<_>>().join(" ")
}

/// Sorted, deduplicated view of a word set, for deterministic dumps.
pub fn sorted_words(words: impl IntoIterator<Item = Word>) -> Vec<Word> {
    let set: BTreeSet<Word> = words.into_iter().collect();
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    fn rw(s: &str) -> RealWord {
        parse_real_word(s).unwrap()
    }

    #[test]
    fn shift_drops_front() {
        assert_eq!(shift(&[1, 2, 3], 0).unwrap(), vec![1, 2, 3]);
        assert_eq!(shift(&[1, 2, 3], 2).unwrap(), vec![3]);
        assert_eq!(shift(&[1, 2, 3], 3).unwrap(), Vec::<i32>::new());
        assert_eq!(
            shift(&[1, 2, 3], 4),
            Err(WordError::ShiftPastEnd { len: 3, k: 4 })
        );
    }

    #[test]
    fn weighted_norm_examples() {
        // ||(1, 1)|| = 1/2 + 1/4
        assert_eq!(weighted_norm(&rw("1 1")), d("3/2^2"));
        // ||(1/2, 1)|| = 1/4 + 1/4
        assert_eq!(weighted_norm(&rw("1/2 1")), d("1/2"));
        assert_eq!(weighted_norm(&rw("-1 1")), d("3/2^2"));
        assert_eq!(weighted_norm(&[]), Dyadic::zero());
        assert_eq!(weighted_norm_f64(&[1.0, 1.0]), 0.75);
    }

    #[test]
    fn distances() {
        assert_eq!(weighted_distance(&rw("1 0"), &rw("0 1")).unwrap(), d("3/2^2"));
        assert_eq!(sup_distance(&rw("1 0"), &rw("0 1")).unwrap(), d("1"));
        assert_eq!(sup_distance(&rw("1/2 1"), &rw("1/2 1")).unwrap(), Dyadic::zero());
        assert!(weighted_distance(&rw("1"), &rw("1 0")).is_err());
    }

    #[test]
    fn quantization_examples() {
        // (0.3, 0.9) on the 0.25 grid -> (0.25, 0.75)
        assert_eq!(quantize(&rw("0.3 0.9"), &d("0.25")).unwrap(), rw("0.25 0.75"));
        // grid points are fixed points of quantization
        let grid = rw("0 0.25 0.5 0.75 1");
        assert_eq!(quantize(&grid, &d("0.25")).unwrap(), grid);
        assert!(quantize(&rw("0.3"), &d("0")).is_err());
        assert!(quantize(&rw("0.3"), &d("2")).is_err());
        assert!(quantize(&rw("-0.3"), &d("0.25")).is_err());
    }

    #[test]
    fn quantized_symbols_agree_iff_within_step() {
        // the separation property behind counting distinct quantized windows:
        // symbols mapping to the same grid point differ by less than eps
        let eps = d("1/2^3");
        for a in 0..64 {
            for b in 0..64 {
                let x = Dyadic::ratio(a, 6);
                let y = Dyadic::ratio(b, 6);
                let qx = quantize(&[x.clone()], &eps).unwrap();
                let qy = quantize(&[y.clone()], &eps).unwrap();
                if qx == qy {
                    assert!((&x - &y).abs() < eps);
                }
            }
        }
    }

    #[test]
    fn streams() {
        let s = PeriodicStream(rw("0.9 0.1"));
        assert_eq!(s.prefix(5).unwrap(), rw("0.9 0.1 0.9 0.1 0.9"));
        assert_eq!(s.prefix(0).unwrap(), rw(""));
        let shifted = ShiftedStream { inner: &s, k: 1 };
        assert_eq!(shifted.prefix(3).unwrap(), rw("0.1 0.9 0.1"));
        assert_eq!(s.prefix_f64(2).unwrap(), vec![0.9, 0.1]);
    }

    #[test]
    fn word_rendering() {
        let w = Word(vec![
            Symbol::Label("0".into()),
            Symbol::Real(d("1/2")),
            Symbol::Pair(Box::new(Symbol::Label("a".into())), Box::new(Symbol::Label("b".into()))),
        ]);
        assert_eq!(w.to_string(), "0 1/2^1 a:b");
        assert_eq!(fmt_real_word(&rw("1/2 1")), "1/2^1 1");
        assert_eq!(parse_labeled_word(" a  b c "), vec!["a", "b", "c"]);
        assert!(parse_real_word("1 x").is_err());
    }
}
