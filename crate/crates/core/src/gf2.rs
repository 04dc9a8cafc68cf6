//! Bit vectors and matrices over GF(2), systematic random linear codes,
//! encoding and syndrome computation.
//!
//! Bits are indexed in transmission order: bit 0 is the first bit sent. In the
//! packed representation bit `i` lives in word `i / 64` at position `i % 64`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitWord {
    len: usize,
    words: Vec<u64>,
}

impl BitWord {
    pub fn zeros(len: usize) -> Self {
        BitWord {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut w = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                w.set(i, true);
            }
        }
        w
    }

    /// Word with ones at the given positions.
    pub fn from_support(len: usize, support: &[usize]) -> Self {
        let mut w = Self::zeros(len);
        for &i in support {
            w.flip(i);
        }
        w
    }

    /// Build a `width`-bit word from an integer whose bit `j` is word bit `j`.
    pub fn from_value(value: u64, width: usize) -> Self {
        debug_assert!(width <= 64);
        let mut w = Self::zeros(width);
        if width > 0 {
            let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            w.words[0] = value & mask;
        }
        w
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn xor(&self, other: &BitWord) -> Result<BitWord> {
        let mut out = self.clone();
        out.xor_assign(other)?;
        Ok(out)
    }

    pub fn xor_assign(&mut self, other: &BitWord) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitWord) -> Result<bool> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        Ok(ones % 2 == 1)
    }

    /// Positions of the set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// Bits `[start, start + width)` as an integer, bit `start` in the LSB.
    pub fn slice_value(&self, start: usize, width: usize) -> u64 {
        debug_assert!(width <= 64 && start + width <= self.len);
        let mut v = 0u64;
        for j in 0..width {
            if self.get(start + j) {
                v |= 1 << j;
            }
        }
        v
    }

    /// Overwrite bits `[start, start + width)` from the low bits of `value`.
    pub fn set_slice_value(&mut self, start: usize, width: usize, value: u64) {
        for j in 0..width {
            self.set(start + j, (value >> j) & 1 == 1);
        }
    }

    pub fn concat(parts: &[BitWord]) -> BitWord {
        let len = parts.iter().map(BitWord::len).sum();
        let mut out = BitWord::zeros(len);
        let mut pos = 0;
        for p in parts {
            for i in p.ones() {
                out.set(pos + i, true);
            }
            pos += p.len();
        }
        out
    }

    /// Hex rendering of the bit string read left to right: bit 0 is the most
    /// significant bit of the first digit, trailing bits are zero padded.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.len.div_ceil(4));
        for start in (0..self.len).step_by(4) {
            let mut nibble = 0u32;
            for j in 0..4 {
                nibble <<= 1;
                if start + j < self.len && self.get(start + j) {
                    nibble |= 1;
                }
            }
            s.push(char::from_digit(nibble, 16).unwrap());
        }
        s
    }
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitWord({self})")
    }
}

impl FromStr for BitWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !matches!(c, '|' | '_' | ' '))
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(BitWord::from_bits(&bits))
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    cols: usize,
    rows: Vec<BitWord>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Gf2Matrix {
            cols,
            rows: vec![BitWord::zeros(cols); rows],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.rows[i].set(i, true);
        }
        m
    }

    pub fn from_rows(rows: Vec<BitWord>) -> Result<Self> {
        let cols = rows.first().map(BitWord::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                expected: cols,
                actual: bad.len(),
            });
        }
        Ok(Gf2Matrix { cols, rows })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &BitWord {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[BitWord] {
        &self.rows
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.rows[r].set(c, value)
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut t = Gf2Matrix::zeros(self.cols, self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            for c in row.ones() {
                t.rows[c].set(r, true);
            }
        }
        t
    }

    /// Row vector times matrix: the XOR of the rows selected by `v`.
    pub fn left_mul(&self, v: &BitWord) -> Result<BitWord> {
        if v.len() != self.rows.len() {
            return Err(Error::LengthMismatch {
                expected: self.rows.len(),
                actual: v.len(),
            });
        }
        let mut out = BitWord::zeros(self.cols);
        for i in v.ones() {
            out.xor_assign(&self.rows[i])?;
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Gf2Matrix) -> Result<Gf2Matrix> {
        let rows = self
            .rows
            .iter()
            .map(|r| other.left_mul(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Gf2Matrix {
            cols: other.cols,
            rows,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(BitWord::is_zero)
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.cols {
            let Some(pivot) = (rank..rows.len()).find(|&r| rows[r].get(col)) else {
                continue;
            };
            rows.swap(rank, pivot);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row.get(col) {
                    row.xor_assign(&pivot_row).expect("equal row lengths");
                }
            }
            rank += 1;
        }
        rank
    }

    /// Plain-text form: one row of '0'/'1' characters per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(BitWord::from_str)
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Parse("empty matrix".into()));
        }
        Self::from_rows(rows)
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows.len(), self.cols)?;
        for r in &self.rows {
            writeln!(f, "  {r}")?;
        }
        Ok(())
    }
}

/// An `[n, k]` binary linear block code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearCode {
    n: usize,
    k: usize,
    generator: Gf2Matrix,
    parity_check: Gf2Matrix,
    // Columns of H, each n-k bits long; syndrome(y) is the XOR of the columns
    // selected by the ones of y.
    h_columns: Vec<BitWord>,
}

impl LinearCode {
    /// Systematic random linear code `G = [I_k | P]`, `H = [P^T | I_{n-k}]`.
    ///
    /// Rows of `P` are drawn uniformly from the seeded generator; an all-zero
    /// row is redrawn because it would leave a zero column in `H`.
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::InvalidDimensions { n, k });
        }
        let r = n - k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parity_rows = Vec::with_capacity(k);
        while parity_rows.len() < k {
            let bits: Vec<bool> = (0..r).map(|_| rng.random::<bool>()).collect();
            let row = BitWord::from_bits(&bits);
            if !row.is_zero() {
                parity_rows.push(row);
            }
        }

        let mut generator = Gf2Matrix::zeros(k, n);
        for (i, p) in parity_rows.iter().enumerate() {
            generator.set(i, i, true);
            for j in p.ones() {
                generator.set(i, k + j, true);
            }
        }
        let mut parity_check = Gf2Matrix::zeros(r, n);
        for (i, p) in parity_rows.iter().enumerate() {
            for j in p.ones() {
                parity_check.set(j, i, true);
            }
        }
        for j in 0..r {
            parity_check.set(j, k + j, true);
        }
        Self::from_matrices(generator, parity_check)
    }

    /// Build a code from explicit matrices, checking every code invariant.
    pub fn from_matrices(generator: Gf2Matrix, parity_check: Gf2Matrix) -> Result<Self> {
        let n = generator.num_cols();
        let k = generator.num_rows();
        if k == 0 || k >= n {
            return Err(Error::InvalidDimensions { n, k });
        }
        if parity_check.num_cols() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: parity_check.num_cols(),
            });
        }
        if parity_check.num_rows() != n - k {
            return Err(Error::Config(format!(
                "parity-check matrix has {} rows, expected {}",
                parity_check.num_rows(),
                n - k
            )));
        }
        if generator.rank() != k {
            return Err(Error::Config("generator matrix is rank deficient".into()));
        }
        if !generator.mul(&parity_check.transpose())?.is_zero() {
            return Err(Error::Config("G H^T is not zero".into()));
        }
        let h_columns = parity_check.transpose().rows;
        if h_columns.iter().any(BitWord::is_zero) {
            return Err(Error::Config("parity-check matrix has a zero column".into()));
        }
        Ok(LinearCode {
            n,
            k,
            generator,
            parity_check,
            h_columns,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn redundancy(&self) -> usize {
        self.n - self.k
    }

    pub fn generator(&self) -> &Gf2Matrix {
        &self.generator
    }

    pub fn parity_check(&self) -> &Gf2Matrix {
        &self.parity_check
    }

    /// Column `j` of `H`, i.e. the syndrome of a single error at bit `j`.
    pub fn parity_column(&self, j: usize) -> &BitWord {
        &self.h_columns[j]
    }

    pub fn encode(&self, u: &BitWord) -> Result<BitWord> {
        if u.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                actual: u.len(),
            });
        }
        self.generator.left_mul(u)
    }

    pub fn syndrome(&self, y: &BitWord) -> Result<BitWord> {
        if y.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: y.len(),
            });
        }
        let mut s = BitWord::zeros(self.n - self.k);
        for j in y.ones() {
            s.xor_assign(&self.h_columns[j])?;
        }
        Ok(s)
    }

    pub fn is_codeword(&self, y: &BitWord) -> Result<bool> {
        Ok(self.syndrome(y)?.is_zero())
    }
}

/// Random `[n, k]` systematic code; see [`LinearCode::random`].
pub fn generate_rlc(n: usize, k: usize, seed: u64) -> Result<LinearCode> {
    LinearCode::random(n, k, seed)
}
