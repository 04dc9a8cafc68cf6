//! Gray-coded square M-QAM: geometry, modulation, hard detection and the
//! nearest/next-nearest neighbour error-string sets of every label.
//!
//! Labels are `log2 M` bits in transmission order. Even label positions
//! (0, 2, 4, ...) carry the in-phase axis code and odd positions the
//! quadrature axis code, bit `2t + axis` being bit `t` of that axis code.
//! Along each axis, level `i` (coordinate `(2i - (sqrt(M) - 1)) d`) has code
//! `gray(i) ^ 1`, so the least significant axis bit marks the outer levels.
//! For 16-QAM this places 1101 at the corner (-3d, 3d) with nearest
//! neighbours 0101 and 1001 and diagonal neighbour 0001, and 0010 at the
//! inner point (d, -d).

use std::fmt;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gf2::BitWord;

pub type SymbolSequence = Vec<Complex64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointClass {
    Corner,
    Side,
    Inner,
}

impl PointClass {
    pub const ALL: [PointClass; 3] = [PointClass::Corner, PointClass::Side, PointClass::Inner];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointClass::Corner => "corner",
            PointClass::Side => "side",
            PointClass::Inner => "inner",
        })
    }
}

/// Class and neighbourhood error strings of one label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub class: PointClass,
    pub e1: Vec<BitWord>,
    pub e2: Vec<BitWord>,
}

#[derive(Clone, Debug)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    side: usize,
    d: f64,
    energy_per_symbol: f64,
    axis_code: Vec<u32>,
    axis_level: Vec<usize>,
    points: Vec<Complex64>,
    classes: Vec<PointClass>,
    // Error strings as integers (bit j = string bit j), ascending.
    e1: Vec<Vec<u32>>,
    e2: Vec<Vec<u32>>,
}

fn gray(i: usize) -> u32 {
    (i ^ (i >> 1)) as u32
}

impl Constellation {
    pub fn new(order: usize, energy_per_symbol: f64) -> Result<Self> {
        if order < 16 || !order.is_power_of_two() || !order.trailing_zeros().is_multiple_of(2) {
            return Err(Error::InvalidOrder(order));
        }
        if !(energy_per_symbol > 0.0 && energy_per_symbol.is_finite()) {
            return Err(Error::Config(format!(
                "energy per symbol must be positive, got {energy_per_symbol}"
            )));
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        let axis_bits = bits_per_symbol / 2;
        let side = 1usize << axis_bits;
        let d = (3.0 * energy_per_symbol / (2.0 * (order as f64 - 1.0))).sqrt();

        let axis_code: Vec<u32> = (0..side).map(|i| gray(i) ^ 1).collect();
        let mut axis_level = vec![0; side];
        for (i, &c) in axis_code.iter().enumerate() {
            axis_level[c as usize] = i;
        }

        let mut c = Constellation {
            order,
            bits_per_symbol,
            side,
            d,
            energy_per_symbol,
            axis_code,
            axis_level,
            points: Vec::with_capacity(order),
            classes: Vec::with_capacity(order),
            e1: Vec::with_capacity(order),
            e2: Vec::with_capacity(order),
        };

        for label in 0..order as u32 {
            let (li, lq) = c.levels_of(label);
            c.points
                .push(Complex64::new(c.level_coordinate(li), c.level_coordinate(lq)));
            let edge = |l: usize| l == 0 || l == side - 1;
            c.classes.push(match (edge(li), edge(lq)) {
                (true, true) => PointClass::Corner,
                (false, false) => PointClass::Inner,
                _ => PointClass::Side,
            });

            let steps = |l: usize| -> Vec<usize> {
                let mut v = Vec::with_capacity(2);
                if l > 0 {
                    v.push(l - 1);
                }
                if l + 1 < side {
                    v.push(l + 1);
                }
                v
            };
            let mut e1: Vec<u32> = steps(li)
                .into_iter()
                .map(|ni| c.label_at(ni, lq))
                .chain(steps(lq).into_iter().map(|nq| c.label_at(li, nq)))
                .map(|n| n ^ label)
                .collect();
            let mut e2: Vec<u32> = steps(li)
                .into_iter()
                .flat_map(|ni| steps(lq).into_iter().map(move |nq| (ni, nq)))
                .map(|(ni, nq)| c.label_at(ni, nq) ^ label)
                .collect();
            e1.sort_unstable();
            e2.sort_unstable();
            c.e1.push(e1);
            c.e2.push(e2);
        }
        Ok(c)
    }

    fn levels_of(&self, label: u32) -> (usize, usize) {
        let axis_bits = self.bits_per_symbol / 2;
        let (mut ci, mut cq) = (0usize, 0usize);
        for t in 0..axis_bits {
            ci |= (((label >> (2 * t)) & 1) as usize) << t;
            cq |= (((label >> (2 * t + 1)) & 1) as usize) << t;
        }
        (self.axis_level[ci], self.axis_level[cq])
    }

    fn label_at(&self, level_i: usize, level_q: usize) -> u32 {
        let axis_bits = self.bits_per_symbol / 2;
        let (ci, cq) = (self.axis_code[level_i], self.axis_code[level_q]);
        let mut label = 0u32;
        for t in 0..axis_bits {
            label |= ((ci >> t) & 1) << (2 * t);
            label |= ((cq >> t) & 1) << (2 * t + 1);
        }
        label
    }

    fn level_coordinate(&self, level: usize) -> f64 {
        (2.0 * level as f64 - (self.side as f64 - 1.0)) * self.d
    }

    /// Nearest level along one axis; ties go to the smaller coordinate.
    fn quantize_axis(&self, v: f64) -> usize {
        let t = (v / self.d + (self.side as f64 - 1.0)) / 2.0;
        let level = (t - 0.5).ceil();
        if level <= 0.0 || level.is_nan() {
            0
        } else {
            (level as usize).min(self.side - 1)
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Points per axis, `sqrt(M)`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Half the minimum distance between adjacent points.
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn energy_per_symbol(&self) -> f64 {
        self.energy_per_symbol
    }

    pub fn point(&self, label: u32) -> Complex64 {
        self.points[label as usize]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn class_of(&self, label: u32) -> PointClass {
        self.classes[label as usize]
    }

    pub fn e1_values(&self, label: u32) -> &[u32] {
        &self.e1[label as usize]
    }

    pub fn e2_values(&self, label: u32) -> &[u32] {
        &self.e2[label as usize]
    }

    pub fn class_count(&self, class: PointClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    fn label_value(&self, label: &BitWord) -> Result<u32> {
        if label.len() != self.bits_per_symbol {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        Ok(label.slice_value(0, self.bits_per_symbol) as u32)
    }

    pub fn classify_and_neighbors(&self, label: &BitWord) -> Result<Neighborhood> {
        let v = self.label_value(label)?;
        let to_words = |vals: &[u32]| {
            vals.iter()
                .map(|&e| BitWord::from_value(e as u64, self.bits_per_symbol))
                .collect()
        };
        Ok(Neighborhood {
            class: self.class_of(v),
            e1: to_words(self.e1_values(v)),
            e2: to_words(self.e2_values(v)),
        })
    }

    /// Split `x` into `log2 M`-bit strings in transmission order.
    pub fn labels_of(&self, x: &BitWord) -> Result<Vec<u32>> {
        let m = self.bits_per_symbol;
        if !x.len().is_multiple_of(m) {
            return Err(Error::NotSymbolAligned {
                len: x.len(),
                bits_per_symbol: m,
            });
        }
        Ok((0..x.len() / m)
            .map(|i| x.slice_value(i * m, m) as u32)
            .collect())
    }

    pub fn word_from_labels(&self, labels: &[u32]) -> BitWord {
        let m = self.bits_per_symbol;
        let mut w = BitWord::zeros(labels.len() * m);
        for (i, &l) in labels.iter().enumerate() {
            w.set_slice_value(i * m, m, l as u64);
        }
        w
    }

    pub fn modulate(&self, x: &BitWord) -> Result<SymbolSequence> {
        Ok(self
            .labels_of(x)?
            .into_iter()
            .map(|l| self.point(l))
            .collect())
    }

    pub fn detect_label(&self, r: Complex64) -> u32 {
        self.label_at(self.quantize_axis(r.re), self.quantize_axis(r.im))
    }

    pub fn hard_detect_labels(&self, r: &[Complex64]) -> Vec<u32> {
        r.iter().map(|&s| self.detect_label(s)).collect()
    }

    pub fn hard_detect(&self, r: &[Complex64]) -> BitWord {
        self.word_from_labels(&self.hard_detect_labels(r))
    }

    /// Text table of label, I, Q, class, E1 and E2 members.
    pub fn dump(&self) -> String {
        let m = self.bits_per_symbol;
        let fmt_set = |vals: &[u32]| {
            vals.iter()
                .map(|&e| BitWord::from_value(e as u64, m).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        writeln!(s, "# M={} d={} Es={}", self.order, self.d, self.energy_per_symbol).unwrap();
        writeln!(s, "label\tI\tQ\tclass\tE1\tE2").unwrap();
        for label in 0..self.order as u32 {
            let p = self.point(label);
            writeln!(
                s,
                "{}\t{:.6}\t{:.6}\t{}\t{}\t{}",
                BitWord::from_value(label as u64, m),
                p.re,
                p.im,
                self.class_of(label),
                fmt_set(self.e1_values(label)),
                fmt_set(self.e2_values(label)),
            )
            .unwrap();
        }
        s
    }
}

pub fn build_constellation(order: usize, energy_per_symbol: f64) -> Result<Constellation> {
    Constellation::new(order, energy_per_symbol)
}
