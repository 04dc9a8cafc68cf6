//! Guessing random additive noise decoding.
//!
//! A [`PatternSource`] enumerates candidate error patterns, most likely first;
//! [`SyndromeDecoder`] tests them against the code-book until `y ^ e` has a
//! zero syndrome or the source is exhausted.
//!
//! * [`BitLevelPatterns`]: all patterns of Hamming weight `0..=w_th`, by
//!   increasing weight, colexicographic order of the support within a weight.
//! * [`SymbolLevelPatterns`]: the zero pattern, then for each structure
//!   `[L1 L2]` of a table row every pattern with `L1` strings drawn from the
//!   E1 sets and `L2` strings from the E2 sets of the received labels.
//!   Within a structure: string positions in colex order, then the choice of
//!   which chosen positions carry E1 strings in colex order, then the strings
//!   themselves (ascending value, first position varying fastest).
//!
//! Patterns are passed to visitors as ascending lists of flipped bit
//! positions, which lets the decoder compose syndromes from column sums of
//! `H` without materializing the pattern.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::gf2::{BitWord, LinearCode};
use crate::likelihood::ErrorStructure;
use crate::modem::Constellation;

pub trait PatternSource {
    /// Pattern length in bits.
    fn n(&self) -> usize;

    /// Feed every pattern in order to `visit` until it breaks.
    fn visit(&self, visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>) -> ControlFlow<()>;

    /// Total number of patterns the source emits.
    fn count(&self) -> u128;

    fn first_patterns(&self, limit: usize) -> Vec<BitWord> {
        let mut out = Vec::new();
        if limit == 0 {
            return out;
        }
        let n = self.n();
        let _ = self.visit(&mut |support| {
            out.push(BitWord::from_support(n, support));
            if out.len() >= limit {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        out
    }

    fn patterns(&self) -> Vec<BitWord> {
        self.first_patterns(usize::MAX)
    }
}

/// Calls `f` on each `size`-subset of `0..n` in colexicographic order.
fn for_each_colex_subset(
    n: usize,
    size: usize,
    f: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
) -> ControlFlow<()> {
    if size > n {
        return ControlFlow::Continue(());
    }
    let mut c: Vec<usize> = (0..size).collect();
    loop {
        f(&c)?;
        // advance: lowest index that can move up without colliding
        let mut j = 0;
        while j < size {
            let limit = if j + 1 < size { c[j + 1] } else { n };
            if c[j] + 1 < limit {
                break;
            }
            j += 1;
        }
        if j == size {
            return ControlFlow::Continue(());
        }
        c[j] += 1;
        for (i, slot) in c.iter_mut().enumerate().take(j) {
            *slot = i;
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[derive(Clone, Copy, Debug)]
pub struct BitLevelPatterns {
    pub n: usize,
    pub w_th: usize,
}

impl BitLevelPatterns {
    pub fn new(n: usize, w_th: usize) -> Result<Self> {
        if w_th > n {
            return Err(Error::Config(format!("w_th={w_th} exceeds n={n}")));
        }
        Ok(BitLevelPatterns { n, w_th })
    }
}

impl PatternSource for BitLevelPatterns {
    fn n(&self) -> usize {
        self.n
    }

    fn visit(&self, visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>) -> ControlFlow<()> {
        for w in 0..=self.w_th {
            for_each_colex_subset(self.n, w, visit)?;
        }
        ControlFlow::Continue(())
    }

    fn count(&self) -> u128 {
        (0..=self.w_th).map(|w| binomial(self.n, w)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct SymbolLevelPatterns<'a> {
    constellation: &'a Constellation,
    labels: Vec<u32>,
    structures: Vec<(usize, usize)>,
}

impl<'a> SymbolLevelPatterns<'a> {
    pub fn new(
        y: &BitWord,
        structures: &[ErrorStructure],
        constellation: &'a Constellation,
    ) -> Result<Self> {
        Self::from_labels(
            constellation.labels_of(y)?,
            structures.iter().map(|s| (s.l1, s.l2)).collect(),
            constellation,
        )
    }

    pub fn from_labels(
        labels: Vec<u32>,
        structures: Vec<(usize, usize)>,
        constellation: &'a Constellation,
    ) -> Result<Self> {
        let l = labels.len();
        if let Some(&(l1, l2)) = structures.iter().find(|&&(a, b)| a + b > l || a + b == 0) {
            return Err(Error::InvalidStructure { l1, l2, l });
        }
        if labels.iter().any(|&v| v as usize >= constellation.order()) {
            return Err(Error::Config("label out of range for constellation".into()));
        }
        Ok(SymbolLevelPatterns {
            constellation,
            labels,
            structures,
        })
    }

    pub fn structures(&self) -> &[(usize, usize)] {
        &self.structures
    }

    /// Patterns generated by one structure.
    pub fn structure_count(&self, l1: usize, l2: usize) -> u128 {
        // ways[a][b]: choices of a E1 strings and b E2 strings over a prefix
        let mut ways = vec![vec![0u128; l2 + 1]; l1 + 1];
        ways[0][0] = 1;
        for &label in &self.labels {
            let n1 = self.constellation.e1_values(label).len() as u128;
            let n2 = self.constellation.e2_values(label).len() as u128;
            for a in (0..=l1).rev() {
                for b in (0..=l2).rev() {
                    let mut v = ways[a][b];
                    if a > 0 {
                        v += ways[a - 1][b] * n1;
                    }
                    if b > 0 {
                        v += ways[a][b - 1] * n2;
                    }
                    ways[a][b] = v;
                }
            }
        }
        ways[l1][l2]
    }

    fn visit_structure(
        &self,
        l1: usize,
        l2: usize,
        visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let m = self.constellation.bits_per_symbol();
        let t = l1 + l2;
        let mut support = Vec::with_capacity(t * m);
        let mut options: Vec<&[u32]> = vec![&[]; t];
        let mut digit = vec![0usize; t];
        for_each_colex_subset(self.labels.len(), t, &mut |positions| {
            for_each_colex_subset(t, l1, &mut |e1_slots| {
                let mut next_e1 = 0;
                for (slot, &pos) in positions.iter().enumerate() {
                    let label = self.labels[pos];
                    options[slot] = if next_e1 < e1_slots.len() && e1_slots[next_e1] == slot {
                        next_e1 += 1;
                        self.constellation.e1_values(label)
                    } else {
                        self.constellation.e2_values(label)
                    };
                }
                digit.iter_mut().for_each(|d| *d = 0);
                loop {
                    support.clear();
                    for (slot, &pos) in positions.iter().enumerate() {
                        let mut v = options[slot][digit[slot]];
                        while v != 0 {
                            support.push(pos * m + v.trailing_zeros() as usize);
                            v &= v - 1;
                        }
                    }
                    visit(&support)?;
                    // odometer, slot 0 fastest
                    let mut s = 0;
                    while s < t {
                        digit[s] += 1;
                        if digit[s] < options[s].len() {
                            break;
                        }
                        digit[s] = 0;
                        s += 1;
                    }
                    if s == t {
                        return ControlFlow::Continue(());
                    }
                }
            })
        })
    }
}

impl PatternSource for SymbolLevelPatterns<'_> {
    fn n(&self) -> usize {
        self.labels.len() * self.constellation.bits_per_symbol()
    }

    fn visit(&self, visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>) -> ControlFlow<()> {
        visit(&[])?;
        for &(l1, l2) in &self.structures {
            self.visit_structure(l1, l2, visit)?;
        }
        ControlFlow::Continue(())
    }

    fn count(&self) -> u128 {
        1 + self
            .structures
            .iter()
            .map(|&(a, b)| self.structure_count(a, b))
            .sum::<u128>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeStatus {
    Decoded,
    Abandoned,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub status: DecodeStatus,
    pub codeword: Option<BitWord>,
    pub error_pattern: Option<BitWord>,
    /// Membership tests performed, the check of `y` itself included.
    pub tests: u64,
}

impl DecodeOutcome {
    pub fn is_decoded(&self) -> bool {
        self.status == DecodeStatus::Decoded
    }
}

/// Membership tester with the columns of `H` packed into 128-bit words.
#[derive(Clone, Debug)]
pub struct SyndromeDecoder {
    n: usize,
    columns: Vec<u128>,
}

impl SyndromeDecoder {
    pub fn new(code: &LinearCode) -> Result<Self> {
        let r = code.redundancy();
        if r > 128 {
            return Err(Error::RedundancyTooLarge(r));
        }
        let columns = (0..code.n())
            .map(|j| {
                code.parity_column(j)
                    .ones()
                    .fold(0u128, |acc, i| acc | (1u128 << i))
            })
            .collect();
        Ok(SyndromeDecoder {
            n: code.n(),
            columns,
        })
    }

    pub fn syndrome_of(&self, y: &BitWord) -> u128 {
        y.ones().fold(0, |acc, j| acc ^ self.columns[j])
    }

    pub fn decode(&self, y: &BitWord, source: &dyn PatternSource) -> Result<DecodeOutcome> {
        if y.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: y.len(),
            });
        }
        if source.n() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: source.n(),
            });
        }
        let base = self.syndrome_of(y);
        let mut tests = 0u64;
        let mut found: Option<Vec<usize>> = None;
        let _ = source.visit(&mut |support| {
            tests += 1;
            let s = support.iter().fold(base, |acc, &j| acc ^ self.columns[j]);
            if s == 0 {
                found = Some(support.to_vec());
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        Ok(match found {
            Some(support) => {
                let e = BitWord::from_support(self.n, &support);
                DecodeOutcome {
                    status: DecodeStatus::Decoded,
                    codeword: Some(y.xor(&e)?),
                    error_pattern: Some(e),
                    tests,
                }
            }
            None => DecodeOutcome {
                status: DecodeStatus::Abandoned,
                codeword: None,
                error_pattern: None,
                tests,
            },
        })
    }
}

/// One-shot decode; build a [`SyndromeDecoder`] once when decoding many words.
pub fn decode(y: &BitWord, code: &LinearCode, source: &dyn PatternSource) -> Result<DecodeOutcome> {
    SyndromeDecoder::new(code)?.decode(y, source)
}
