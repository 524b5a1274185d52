//! Fixed-length one-hot encoding of SMILES text.

use std::collections::BTreeSet;

use crate::error::{ChemError, Result};

/// Padding symbol, reserved at index 0. Never a valid SMILES character.
pub const PAD: char = '_';
pub const DEFAULT_LENGTH: usize = 250;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<char>,
}

impl Vocab {
    /// Characters of the corpus sorted by code point, with PAD prepended.
    pub fn build<S: AsRef<str>>(corpus: &[S]) -> Result<Vocab> {
        if corpus.is_empty() {
            return Err(ChemError::Empty("vocabulary corpus"));
        }
        let mut chars = BTreeSet::new();
        for s in corpus {
            chars.extend(s.as_ref().chars());
        }
        if chars.contains(&PAD) {
            return Err(ChemError::Format(format!("corpus contains the pad symbol {PAD:?}")));
        }
        let mut symbols = vec![PAD];
        symbols.extend(chars);
        Ok(Vocab { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        if c == PAD {
            return Some(0);
        }
        self.symbols[1..].binary_search(&c).ok().map(|i| i + 1)
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    /// One symbol per line; the line number is the index.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.symbols.len() * 2);
        for c in &self.symbols {
            s.push(*c);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Vocab> {
        let mut symbols = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut chars = line.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => symbols.push(c),
                _ => return Err(ChemError::Format(format!("vocab line {}: {line:?}", i + 1))),
            }
        }
        if symbols.first() != Some(&PAD) {
            return Err(ChemError::Format("vocab must start with the pad symbol".into()));
        }
        if symbols[1..].windows(2).any(|w| w[0] >= w[1]) {
            return Err(ChemError::Format("vocab symbols must be unique and sorted".into()));
        }
        Ok(Vocab { symbols })
    }
}

/// Row-major L×V matrix of 0/1 values.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotSequence {
    pub length: usize,
    pub vocab_size: usize,
    pub indices: Vec<usize>,
}

impl OneHotSequence {
    pub fn to_dense(&self) -> Vec<f32> {
        let mut out = vec![0.0; self.length * self.vocab_size];
        for (row, &k) in self.indices.iter().enumerate() {
            out[row * self.vocab_size + k] = 1.0;
        }
        out
    }

    /// Argmax inverse of [`encode`], PAD rows dropped.
    pub fn decode(&self, vocab: &Vocab) -> String {
        self.indices
            .iter()
            .filter(|&&k| k != 0)
            .filter_map(|&k| vocab.symbol(k))
            .collect()
    }
}

/// Centers `smiles` in `length` rows, padding floor((L-n)/2) on the left
/// and the remainder on the right.
pub fn encode(smiles: &str, vocab: &Vocab, length: usize) -> Result<OneHotSequence> {
    let chars: Vec<char> = smiles.chars().collect();
    if chars.len() > length {
        return Err(ChemError::TooLong {
            length: chars.len(),
            capacity: length,
        });
    }
    let left = (length - chars.len()) / 2;
    let mut indices = vec![0; length];
    for (k, &c) in chars.iter().enumerate() {
        if c == PAD {
            return Err(ChemError::UnknownCharacter(c));
        }
        indices[left + k] = vocab.index_of(c).ok_or(ChemError::UnknownCharacter(c))?;
    }
    Ok(OneHotSequence {
        length,
        vocab_size: vocab.len(),
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vocab_examples() {
        let v = Vocab::build(&["CCO", "C=O"]).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.symbol(0), Some(PAD));
        assert_eq!(v.symbol(1), Some('='));
        assert_eq!(Vocab::build(&["C"]).unwrap().len(), 2);
        assert_eq!(Vocab::build(&["C=O", "CCO"]).unwrap(), v);
        assert!(Vocab::build::<&str>(&[]).is_err());
    }

    #[test]
    fn centered_padding() {
        let v = Vocab::build(&["CCO"]).unwrap();
        let e = encode("CCO", &v, 5).unwrap();
        let c = v.index_of('C').unwrap();
        let o = v.index_of('O').unwrap();
        assert_eq!(e.indices, vec![0, c, c, o, 0]);
        let full = encode("CCO", &v, 3).unwrap();
        assert_eq!(full.indices, vec![c, c, o]);
        let e = encode("CC", &v, 5).unwrap();
        assert_eq!(e.indices, vec![0, c, c, 0, 0]);
    }

    #[test]
    fn errors() {
        let v = Vocab::build(&["CCO"]).unwrap();
        assert_eq!(encode("CCCC", &v, 3).unwrap_err().kind(), "TooLong");
        assert_eq!(encode("CN", &v, 5).unwrap_err().kind(), "UnknownCharacter");
    }

    #[test]
    fn vocab_text_round_trip() {
        let v = Vocab::build(&["CC(=O)[O-]", "c1ccccc1Cl"]).unwrap();
        assert_eq!(Vocab::from_text(&v.to_text()).unwrap(), v);
        assert!(Vocab::from_text("C\n_\n").is_err());
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(s in "[CNOc1=()#\\[\\]+-]{0,40}") {
            let v = Vocab::build(&[s.as_str(), "C"]).unwrap();
            let e = encode(&s, &v, 50).unwrap();
            prop_assert_eq!(e.decode(&v), s.clone());
            let dense = e.to_dense();
            for row in dense.chunks(v.len()) {
                prop_assert_eq!(row.iter().sum::<f32>(), 1.0);
            }
            // column sums are character counts plus padding
            let pad_rows = 50 - s.chars().count();
            let col0: f32 = dense.chunks(v.len()).map(|r| r[0]).sum();
            prop_assert_eq!(col0 as usize, pad_rows);
            for c in s.chars() {
                let k = v.index_of(c).unwrap();
                let col: f32 = dense.chunks(v.len()).map(|r| r[k]).sum();
                prop_assert_eq!(col as usize, s.chars().filter(|&x| x == c).count());
            }
        }
    }
}
