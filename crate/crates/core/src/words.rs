//! Reduced words in a free group on `g` generators.
//!
//! Letter `j + 1` is generator `j`, letter `-(j + 1)` its inverse.

use std::fmt;

use serde::{Deserialize, Serialize};

pub type Letter = i32;

pub fn letter(generator: usize, inverse: bool) -> Letter {
    let l = generator as i32 + 1;
    if inverse {
        -l
    } else {
        l
    }
}

pub fn generator_of(l: Letter) -> usize {
    (l.unsigned_abs() - 1) as usize
}

pub fn is_inverse(l: Letter) -> bool {
    l < 0
}

/// Position of a letter in the order `γ₀, γ₀⁻¹, γ₁, γ₁⁻¹, …`.
pub fn letter_index(l: Letter) -> usize {
    2 * generator_of(l) + usize::from(is_inverse(l))
}

pub fn letter_from_index(i: usize) -> Letter {
    letter(i / 2, i % 2 == 1)
}

/// All `2g` letters in index order.
pub fn all_letters(rank: usize) -> Vec<Letter> {
    (0..2 * rank).map(letter_from_index).collect()
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreeWord {
    letters: Vec<Letter>,
}

impl FreeWord {
    pub fn identity() -> Self {
        FreeWord { letters: Vec::new() }
    }

    /// Freely reduces the given letter sequence.
    pub fn new(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            assert!(l != 0, "letter 0 is not a generator");
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        FreeWord { letters: out }
    }

    pub fn single(l: Letter) -> Self {
        FreeWord { letters: vec![l] }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn first(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    pub fn inverse(&self) -> Self {
        FreeWord { letters: self.letters.iter().rev().map(|l| -l).collect() }
    }

    pub fn mul(&self, other: &FreeWord) -> Self {
        FreeWord::new(self.letters.iter().chain(other.letters.iter()).copied())
    }

    pub fn push(&self, l: Letter) -> Self {
        self.mul(&FreeWord::single(l))
    }

    pub fn pow(&self, e: i64) -> Self {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut out = FreeWord::identity();
        for _ in 0..e.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    /// Prefix without the last letter.
    pub fn parent(&self) -> Self {
        let mut l = self.letters.clone();
        l.pop();
        FreeWord { letters: l }
    }

    /// Exponent sums per generator (the image in Z^g).
    pub fn abelianization(&self, rank: usize) -> Vec<i64> {
        let mut v = vec![0; rank];
        for &l in &self.letters {
            v[generator_of(l)] += if is_inverse(l) { -1 } else { 1 };
        }
        v
    }

    /// Parses `"a B a"`-style strings: lowercase letters are generators,
    /// uppercase their inverses; `1` or the empty string is the identity.
    pub fn parse(s: &str) -> Option<Self> {
        let mut out = Vec::new();
        for ch in s.chars() {
            if ch.is_whitespace() || ch == '1' || ch == '·' || ch == '*' {
                continue;
            }
            if ch.is_ascii_lowercase() {
                out.push(letter((ch as u8 - b'a') as usize, false));
            } else if ch.is_ascii_uppercase() {
                out.push(letter((ch as u8 - b'A') as usize, true));
            } else {
                return None;
            }
        }
        Some(FreeWord::new(out))
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for &l in &self.letters {
            let c = (b'a' + generator_of(l) as u8) as char;
            let c = if is_inverse(l) { c.to_ascii_uppercase() } else { c };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// All reduced words of length ≤ `max_len`, by length then letter index.
pub fn reduced_words(rank: usize, max_len: usize) -> Vec<FreeWord> {
    let mut out = vec![FreeWord::identity()];
    let mut layer = vec![FreeWord::identity()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for l in all_letters(rank) {
                if w.last() != Some(-l) {
                    let mut letters = w.letters.clone();
                    letters.push(l);
                    next.push(FreeWord { letters });
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// `1 + Σ_{k=1..L} 2g(2g−1)^{k−1}`.
pub fn reduced_word_count(rank: usize, max_len: usize) -> usize {
    let mut total = 1;
    let mut layer = 1;
    for k in 0..max_len {
        layer = if k == 0 { 2 * rank } else { layer * (2 * rank - 1) };
        total += layer;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(reduced_words(2, 1).len(), 5);
        assert_eq!(reduced_words(2, 2).len(), 17);
        assert_eq!(reduced_word_count(2, 3), reduced_words(2, 3).len());
        assert_eq!(reduced_words(1, 4).len(), 9);
    }

    #[test]
    fn reduction_and_inverse() {
        let w = FreeWord::new([1, 2, -2, -1, 1]);
        assert_eq!(w, FreeWord::single(1));
        let u = FreeWord::parse("abA").unwrap();
        assert_eq!(u.mul(&u.inverse()), FreeWord::identity());
        assert_eq!(u.to_string(), "abA");
        assert_eq!(u.abelianization(2), vec![0, 1]);
    }
}
