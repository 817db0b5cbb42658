use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Multi-index `(i_1, …, i_k)` over driver coordinates, letters 1-based.
///
/// Labels both an iterated integral `∫ dB^{i_1} ⋯ dB^{i_k}` and the
/// differential operator `V_{i_1} ⋯ V_{i_k}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Result<Self> {
        if letters.iter().any(|&l| l == 0) {
            return Err(domain("word letters are 1-based"));
        }
        Ok(Word(letters))
    }

    /// The empty word, acting as the identity operator.
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest letter, i.e. the minimal driver dimension the word needs.
    pub fn max_letter(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Checks every letter lies in `1..=d`.
    pub fn check_alphabet(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&l| l > d) {
            Some(l) => Err(domain(format!("letter {l} out of range 1..={d}"))),
            None => Ok(()),
        }
    }

    /// All words of length `len` over `1..=d`, in lexicographic order.
    pub fn all(d: usize, len: usize) -> Vec<Word> {
        let mut out = vec![Vec::with_capacity(len)];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|w| {
                    (1..=d).map(move |l| {
                        let mut w = w.clone();
                        w.push(l);
                        w
                    })
                })
                .collect();
        }
        out.into_iter().map(Word).collect()
    }
}

impl From<&[usize]> for Word {
    fn from(s: &[usize]) -> Self {
        Word::new(s.to_vec()).expect("1-based letters")
    }
}

impl<const N: usize> From<[usize; N]> for Word {
    fn from(s: [usize; N]) -> Self {
        Word::new(s.to_vec()).expect("1-based letters")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Accepts `1,2,3`, `1-2-3` or `1 2 3`.
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .split(|c: char| c == ',' || c == '-' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| domain(format!("bad word letter {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(domain("empty word"));
        }
        Word::new(letters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let w: Word = "1,1,2,2".parse().unwrap();
        assert_eq!(w.letters(), &[1, 1, 2, 2]);
        assert_eq!(w.to_string(), "1-1-2-2");
        assert_eq!("1-1-2-2".parse::<Word>().unwrap(), w);
        assert!("0,1".parse::<Word>().is_err());
        assert!("".parse::<Word>().is_err());
    }

    #[test]
    fn enumerates_all_words() {
        let ws = Word::all(2, 3);
        assert_eq!(ws.len(), 8);
        assert_eq!(ws[0].letters(), &[1, 1, 1]);
        assert_eq!(ws[7].letters(), &[2, 2, 2]);
        assert_eq!(Word::all(3, 0), vec![Word::empty()]);
    }

    #[test]
    fn alphabet_check() {
        let w = Word::from([1, 3]);
        assert!(w.check_alphabet(3).is_ok());
        assert!(w.check_alphabet(2).is_err());
    }
}
