//! Error-structure probabilities for hard-detected square M-QAM.
//!
//! Per constellation point class, the probabilities that a symbol is received
//! correctly, as a nearest neighbour (type E1 error string) or as a diagonal
//! neighbour (type E2) are evaluated over extended decision regions. From them
//! [`structure_prob`] gives `P(L1, L2)`, the probability that a block of `L`
//! symbols carries exactly `L1` type-E1 and `L2` type-E2 error strings, and
//! [`build_structure_table`] orders the structures per SNR for the
//! symbol-level decoder.
//!
//! Two independent routes evaluate `P(L1, L2)`:
//! * [`structure_prob`] sums over the class composition of the block, the
//!   per-class error counts and the per-class E1/E2 split;
//! * [`structure_prob_closed_form`] uses the class-averaged probabilities in a
//!   single trinomial term, which holds because symbols are i.i.d. uniform.
//!
//! Both are computed in the log domain so that high-SNR tails do not underflow.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modem::PointClass;

/// Gaussian tail `Q(z) = P(N(0,1) > z)`.
pub fn q_func(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// `ln Q(z)`, accurate where `Q(z)` itself underflows.
pub fn ln_q_func(z: f64) -> f64 {
    if z <= 25.0 {
        return q_func(z).ln();
    }
    // asymptotic expansion of the Mills ratio
    let inv = 1.0 / (z * z);
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..=6 {
        term *= -((2 * k - 1) as f64) * inv;
        series += term;
    }
    -0.5 * z * z - (z * (2.0 * std::f64::consts::PI).sqrt()).ln() + series.ln()
}

/// Normalized half-distance `d |h| / sqrt(N0 / 2)`.
pub fn d_prime(d: f64, h_abs: f64, n0: f64) -> Result<f64> {
    if !(n0 > 0.0) {
        return Err(Error::InvalidNoise(n0));
    }
    Ok(d * h_abs / (n0 / 2.0).sqrt())
}

/// `d'` for an effective SNR `|h|^2 Es / N0` (linear) on M-QAM.
pub fn d_prime_from_snr(order: usize, snr: f64) -> f64 {
    (3.0 * snr / (order as f64 - 1.0)).sqrt()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Correct / E1 / E2 probabilities per point class, indexed by
/// [`PointClass::index`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeProbabilities {
    pub d_prime: f64,
    pub correct: [f64; 3],
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

impl TypeProbabilities {
    pub fn new(d_prime: f64) -> Self {
        let q = q_func(d_prime);
        let (a, b) = (1.0 - q, 1.0 - 2.0 * q);
        TypeProbabilities {
            d_prime,
            correct: [a * a, a * b, b * b],
            e1: [2.0 * a * q, 2.0 * a * q + b * q, 4.0 * b * q],
            e2: [q * q, 2.0 * q * q, 4.0 * q * q],
        }
    }

    pub fn correct(&self, class: PointClass) -> f64 {
        self.correct[class.index()]
    }

    pub fn e1(&self, class: PointClass) -> f64 {
        self.e1[class.index()]
    }

    pub fn e2(&self, class: PointClass) -> f64 {
        self.e2[class.index()]
    }
}

pub fn type_probs(d_prime: f64) -> TypeProbabilities {
    TypeProbabilities::new(d_prime)
}

/// Number of corner, side and inner points of square M-QAM.
pub fn class_counts(order: usize) -> [f64; 3] {
    let s = (order as f64).sqrt();
    [4.0, 4.0 * (s - 2.0), (s - 2.0) * (s - 2.0)]
}

fn check_order(order: usize) -> Result<()> {
    if order < 16 || !order.is_power_of_two() || !order.trailing_zeros().is_multiple_of(2) {
        return Err(Error::InvalidOrder(order));
    }
    Ok(())
}

fn check_structure(l1: usize, l2: usize, l: usize) -> Result<()> {
    if l1 + l2 > l {
        return Err(Error::InvalidStructure { l1, l2, l });
    }
    Ok(())
}

struct LnFactorials(Vec<f64>);

impl LnFactorials {
    fn new(max: usize) -> Self {
        let mut t = vec![0.0; max + 1];
        for i in 1..=max {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        LnFactorials(t)
    }

    fn choose(&self, n: usize, k: usize) -> f64 {
        self.0[n] - self.0[k] - self.0[n - k]
    }

    fn multinomial(&self, n: usize, parts: [usize; 3]) -> f64 {
        self.0[n] - parts.iter().map(|&p| self.0[p]).sum::<f64>()
    }
}

/// `count * ln p` with `0 * ln 0 = 0`.
fn ln_pow(ln_p: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * ln_p
    }
}

/// Streaming log-sum-exp.
#[derive(Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum {
        max: f64::NEG_INFINITY,
        scaled: 0.0,
    };

    #[inline]
    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

struct LnClassProbs {
    correct: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
}

impl LnClassProbs {
    /// Log of every class probability, built from `ln Q` so that the E1 and
    /// E2 terms survive when `Q(d')^2` underflows.
    fn new(d_prime: f64) -> Self {
        let q = q_func(d_prime);
        let ln_q = ln_q_func(d_prime);
        let ln_a = (-q).ln_1p();
        let ln_b = (-2.0 * q).ln_1p();
        let (ln2, ln4) = (2f64.ln(), 4f64.ln());
        LnClassProbs {
            correct: [2.0 * ln_a, ln_a + ln_b, 2.0 * ln_b],
            e1: [ln2 + ln_a + ln_q, ln_q + (3.0 - 4.0 * q).ln(), ln4 + ln_b + ln_q],
            e2: [2.0 * ln_q, ln2 + 2.0 * ln_q, ln4 + 2.0 * ln_q],
        }
    }
}

/// Log of the weight `4^(Lc+Ls) (sqrt(M)-2)^(Ls+2Li) / M^L` times the
/// multinomial coefficient of a class composition.
fn ln_composition_weight(lf: &LnFactorials, order: usize, counts: [usize; 3]) -> f64 {
    let l: usize = counts.iter().sum();
    let s2 = ((order as f64).sqrt() - 2.0).ln();
    lf.multinomial(l, counts)
        + ((counts[0] + counts[1]) as f64) * 4f64.ln()
        + ((counts[1] + 2 * counts[2]) as f64) * s2
        - (l as f64) * (order as f64).ln()
}

/// Compositions `(a0, a1, a2)` with `a0 + a1 + a2 = total` and `a_i <= cap_i`.
fn bounded_compositions(total: usize, cap: [usize; 3]) -> impl Iterator<Item = [usize; 3]> {
    (0..=cap[0].min(total)).flat_map(move |a0| {
        (0..=cap[1].min(total - a0)).filter_map(move |a1| {
            let a2 = total - a0 - a1;
            (a2 <= cap[2]).then_some([a0, a1, a2])
        })
    })
}

/// `ln P(L1, L2)` by direct summation over class compositions, per-class
/// error counts and per-class E1/E2 splits.
pub fn ln_structure_prob(l1: usize, l2: usize, l: usize, order: usize, d_prime: f64) -> Result<f64> {
    check_order(order)?;
    check_structure(l1, l2, l)?;
    let lf = LnFactorials::new(l);
    let lp = LnClassProbs::new(d_prime);
    let errors = l1 + l2;
    let mut acc = LogSum::EMPTY;
    for counts in bounded_compositions(l, [l; 3]) {
        let outer = ln_composition_weight(&lf, order, counts);
        for errs in bounded_compositions(errors, counts) {
            let mid: f64 = (0..3)
                .map(|c| lf.choose(counts[c], errs[c]) + ln_pow(lp.correct[c], counts[c] - errs[c]))
                .sum();
            for e1s in bounded_compositions(l1, errs) {
                let inner: f64 = (0..3)
                    .map(|c| {
                        lf.choose(errs[c], e1s[c])
                            + ln_pow(lp.e1[c], e1s[c])
                            + ln_pow(lp.e2[c], errs[c] - e1s[c])
                    })
                    .sum();
                acc.add(outer + mid + inner);
            }
        }
    }
    Ok(acc.ln())
}

/// `P(L1, L2)` by direct summation; see [`ln_structure_prob`].
pub fn structure_prob(l1: usize, l2: usize, l: usize, order: usize, d_prime: f64) -> Result<f64> {
    Ok(ln_structure_prob(l1, l2, l, order, d_prime)?.exp())
}

/// Direct summation for every structure at once; entry `[l1][l2]` holds
/// `ln P(l1, l2)` for `l1 + l2 <= l`.
pub fn ln_structure_probs_direct(l: usize, order: usize, d_prime: f64) -> Result<Vec<Vec<f64>>> {
    check_order(order)?;
    let lf = LnFactorials::new(l);
    let lp = LnClassProbs::new(d_prime);
    let compositions: Vec<[usize; 3]> = bounded_compositions(l, [l; 3]).collect();
    let partial: Vec<Vec<Vec<LogSum>>> = compositions
        .par_iter()
        .map(|&counts| {
            let mut acc = vec![vec![LogSum::EMPTY; l + 1]; l + 1];
            let outer = ln_composition_weight(&lf, order, counts);
            for errors in 0..=l {
                for errs in bounded_compositions(errors, counts) {
                    let mid: f64 = (0..3)
                        .map(|c| {
                            lf.choose(counts[c], errs[c])
                                + ln_pow(lp.correct[c], counts[c] - errs[c])
                        })
                        .sum();
                    for l1 in 0..=errors {
                        for e1s in bounded_compositions(l1, errs) {
                            let inner: f64 = (0..3)
                                .map(|c| {
                                    lf.choose(errs[c], e1s[c])
                                        + ln_pow(lp.e1[c], e1s[c])
                                        + ln_pow(lp.e2[c], errs[c] - e1s[c])
                                })
                                .sum();
                            acc[l1][errors - l1].add(outer + mid + inner);
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut out = vec![vec![f64::NEG_INFINITY; l + 1]; l + 1];
    for l1 in 0..=l {
        for l2 in 0..=(l - l1) {
            let mut total = LogSum::EMPTY;
            for p in &partial {
                total.add(p[l1][l2].ln());
            }
            out[l1][l2] = total.ln();
        }
    }
    Ok(out)
}

/// Class-averaged correct / E1 / E2 probabilities of a uniformly drawn symbol.
pub fn averaged_probs(order: usize, probs: &TypeProbabilities) -> (f64, f64, f64) {
    let w = class_counts(order).map(|c| c / order as f64);
    let avg = |v: [f64; 3]| w[0] * v[0] + w[1] * v[1] + w[2] * v[2];
    (avg(probs.correct), avg(probs.e1), avg(probs.e2))
}

/// `ln P(L1, L2)` as `ln[L!/(L1! L2! L0!) pe1^L1 pe2^L2 pc^L0]` with
/// class-averaged probabilities.
pub fn ln_structure_prob_closed_form(
    l1: usize,
    l2: usize,
    l: usize,
    order: usize,
    d_prime: f64,
) -> Result<f64> {
    check_order(order)?;
    check_structure(l1, l2, l)?;
    let lf = LnFactorials::new(l);
    let lp = LnClassProbs::new(d_prime);
    let ln_w = class_counts(order).map(|c| (c / order as f64).ln());
    let average = |ln_p: [f64; 3]| {
        let mut acc = LogSum::EMPTY;
        for c in 0..3 {
            acc.add(ln_w[c] + ln_p[c]);
        }
        acc.ln()
    };
    let l0 = l - l1 - l2;
    Ok(lf.multinomial(l, [l1, l2, l0])
        + ln_pow(average(lp.e1), l1)
        + ln_pow(average(lp.e2), l2)
        + ln_pow(average(lp.correct), l0))
}

pub fn structure_prob_closed_form(
    l1: usize,
    l2: usize,
    l: usize,
    order: usize,
    d_prime: f64,
) -> Result<f64> {
    Ok(ln_structure_prob_closed_form(l1, l2, l, order, d_prime)?.exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorStructure {
    pub l1: usize,
    pub l2: usize,
    pub probability: f64,
}

impl ErrorStructure {
    /// Hamming weight of every pattern with this structure under Gray coding.
    pub fn weight(&self) -> usize {
        self.l1 + 2 * self.l2
    }
}

/// Ordered structure lists over an ascending grid of effective SNR values
/// (`10 log10(|h|^2 Es/N0)` in dB).
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTable {
    pub l: usize,
    pub order: usize,
    pub w_th: Option<usize>,
    pub top_v: Option<usize>,
    pub snr_grid_db: Vec<f64>,
    pub rows: Vec<Vec<ErrorStructure>>,
}

const TABLE_MAGIC: &str = "STRUCTURE_TABLE v1";

/// 133 evenly spaced points over 0..=33 dB.
pub fn default_snr_grid() -> Vec<f64> {
    (0..133).map(|i| i as f64 * 33.0 / 132.0).collect()
}

/// Ordered structures for one effective SNR.
pub fn ordered_structures(
    l: usize,
    order: usize,
    snr_db: f64,
    w_th: Option<usize>,
    top_v: Option<usize>,
) -> Result<Vec<ErrorStructure>> {
    check_order(order)?;
    let dp = d_prime_from_snr(order, db_to_linear(snr_db));
    let mut scored = Vec::new();
    for l1 in 0..=l {
        for l2 in 0..=(l - l1) {
            let weight = l1 + 2 * l2;
            if weight == 0 || w_th.is_some_and(|w| weight > w) {
                continue;
            }
            let lnp = ln_structure_prob_closed_form(l1, l2, l, order, dp)?;
            scored.push((lnp, l1, l2));
        }
    }
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then((a.1 + 2 * a.2).cmp(&(b.1 + 2 * b.2)))
            .then(a.2.cmp(&b.2))
    });
    if let Some(v) = top_v {
        scored.truncate(v);
    }
    Ok(scored
        .into_iter()
        .map(|(lnp, l1, l2)| ErrorStructure {
            l1,
            l2,
            probability: lnp.exp(),
        })
        .collect())
}

pub fn build_structure_table(
    l: usize,
    order: usize,
    snr_grid_db: &[f64],
    w_th: Option<usize>,
    top_v: Option<usize>,
) -> Result<StructureTable> {
    if snr_grid_db.is_empty() || snr_grid_db.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidGrid);
    }
    check_order(order)?;
    let rows = snr_grid_db
        .par_iter()
        .map(|&snr| ordered_structures(l, order, snr, w_th, top_v))
        .collect::<Result<Vec<_>>>()?;
    Ok(StructureTable {
        l,
        order,
        w_th,
        top_v,
        snr_grid_db: snr_grid_db.to_vec(),
        rows,
    })
}

impl StructureTable {
    /// Index of the grid point nearest to `snr_db`, clamped to the grid;
    /// midpoints resolve to the lower point.
    pub fn row_index(&self, snr_db: f64) -> usize {
        let g = &self.snr_grid_db;
        if !(snr_db > g[0]) {
            return 0;
        }
        let last = g.len() - 1;
        if snr_db >= g[last] {
            return last;
        }
        let upper = g.partition_point(|&v| v < snr_db);
        let lower = upper - 1;
        if snr_db - g[lower] <= g[upper] - snr_db {
            lower
        } else {
            upper
        }
    }

    pub fn row_for_snr(&self, snr_db: f64) -> &[ErrorStructure] {
        &self.rows[self.row_index(snr_db)]
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        let mut s = String::new();
        writeln!(
            s,
            "{TABLE_MAGIC} L={} M={} wth={} top={} points={}",
            self.l,
            self.order,
            opt(self.w_th),
            opt(self.top_v),
            self.snr_grid_db.len()
        )
        .unwrap();
        for (snr, row) in self.snr_grid_db.iter().zip(&self.rows) {
            s.push_str(&snr.to_string());
            for e in row {
                write!(s, "; {},{}:{:e}", e.l1, e.l2, e.probability).unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty structure table".into()))?;
        let fields = header
            .strip_prefix(TABLE_MAGIC)
            .ok_or_else(|| Error::Parse(format!("bad table header {header:?}")))?;
        let mut l = None;
        let mut order = None;
        let mut w_th = None;
        let mut top_v = None;
        let mut points = None;
        for kv in fields.split_whitespace() {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {kv:?}")))?;
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad number {v:?} for {key}")))
            };
            let opt_num = |v: &str| if v == "none" { Ok(None) } else { num(v).map(Some) };
            match key {
                "L" => l = Some(num(value)?),
                "M" => order = Some(num(value)?),
                "wth" => w_th = Some(opt_num(value)?),
                "top" => top_v = Some(opt_num(value)?),
                "points" => points = Some(num(value)?),
                _ => return Err(Error::Parse(format!("unknown header field {key:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("missing header field {k}"));
        let l = l.ok_or_else(|| missing("L"))?;
        let order = order.ok_or_else(|| missing("M"))?;
        let points = points.ok_or_else(|| missing("points"))?;

        let mut snr_grid_db = Vec::new();
        let mut rows = Vec::new();
        for line in lines {
            let mut parts = line.split(';').map(str::trim);
            let snr = parts
                .next()
                .unwrap()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad snr in {line:?}: {e}")))?;
            let row = parts
                .map(|entry| {
                    let bad = || Error::Parse(format!("bad structure entry {entry:?}"));
                    let (pair, prob) = entry.split_once(':').ok_or_else(bad)?;
                    let (a, b) = pair.split_once(',').ok_or_else(bad)?;
                    Ok(ErrorStructure {
                        l1: a.parse().map_err(|_| bad())?,
                        l2: b.parse().map_err(|_| bad())?,
                        probability: prob.parse().map_err(|_| bad())?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            snr_grid_db.push(snr);
            rows.push(row);
        }
        if rows.len() != points || rows.is_empty() {
            return Err(Error::Parse(format!(
                "table declares {points} grid points but has {} rows",
                rows.len()
            )));
        }
        Ok(StructureTable {
            l,
            order,
            w_th: w_th.flatten(),
            top_v: top_v.flatten(),
            snr_grid_db,
            rows,
        })
    }
}

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// Bits needed to store one structure `[L1 L2]` with `L1 + 2 L2 <= w_th`.
pub fn bits_per_structure(w_th: usize) -> usize {
    ceil_log2(w_th + 1) + ceil_log2(w_th / 2 + 1)
}

/// Memory of a table keeping `top_v` structures at each of `grid_size` points.
pub fn table_memory_bits(w_th: usize, top_v: usize, grid_size: usize) -> usize {
    bits_per_structure(w_th) * top_v * grid_size
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Simpson integration of the standard normal density from z to z + 12.
    fn q_by_quadrature(z: f64) -> f64 {
        let n = 200_000;
        let (a, b) = (z, z + 12.0);
        let h = (b - a) / n as f64;
        let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_func(0.0), 0.5);
        assert!((q_func(1.281552) - q_by_quadrature(1.281552)).abs() < 1e-12);
        assert!((q_func(1.281552) - 0.1).abs() < 1e-6);
        assert!((q_func(2.0) - q_by_quadrature(2.0)).abs() < 1e-12);
        assert!((q_func(2.0) - 0.0227501).abs() < 1e-7);
        for z in [0.3, 1.0, 2.7, 5.0] {
            assert!((q_func(-z) - (1.0 - q_func(z))).abs() < 1e-15);
            assert!(q_func(z) < q_func(z - 0.1));
        }
    }

    #[test]
    fn ln_q_tail() {
        for z in [0.5, 3.0, 10.0, 24.9, 25.0, 25.1, 30.0, 37.0] {
            assert!((ln_q_func(z) - q_func(z).ln()).abs() < 1e-10 * q_func(z).ln().abs());
        }
        let a = ln_q_func(60.0);
        assert!(a.is_finite() && a < -1800.0);
        assert!(ln_q_func(61.0) < a);
    }

    #[test]
    fn d_prime_cases() {
        assert_eq!(d_prime(1.0, 1.0, 2.0).unwrap(), 1.0);
        assert!((d_prime(0.1f64.sqrt(), 1.0, 0.1).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-12);
        let a = d_prime(0.4, 0.7, 0.2).unwrap();
        let b = d_prime(0.4, 1.4, 0.2).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-15);
        assert!(d_prime(1.0, 1.0, 0.0).is_err());
        assert!(d_prime(1.0, 1.0, -1.0).is_err());
        // Es = 1, N0 = 0.1 on 16-QAM: effective SNR 10
        assert!((d_prime_from_snr(16, 10.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn type_probability_rows() {
        let hi = type_probs(40.0);
        for c in PointClass::ALL {
            assert_eq!(hi.correct(c), 1.0);
            assert_eq!(hi.e1(c), 0.0);
            assert_eq!(hi.e2(c), 0.0);
        }
        let p = type_probs(2.0);
        assert!((p.correct(PointClass::Corner) - 0.955017).abs() < 1e-6);
        for dp in [0.0, 0.1, 1.0, 3.3] {
            let p = type_probs(dp);
            for c in PointClass::ALL {
                let s = p.correct(c) + p.e1(c) + p.e2(c);
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_errors_is_correct_power() {
        for dp in [0.7, 2.2] {
            let p = type_probs(dp);
            let (pc, _, _) = averaged_probs(16, &p);
            let direct = structure_prob(0, 0, 32, 16, dp).unwrap();
            assert!((direct - pc.powi(32)).abs() / direct < 1e-12);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn single_and_all_direct_agree() {
        let all = ln_structure_probs_direct(6, 64, 1.1).unwrap();
        for l1 in 0..=6 {
            for l2 in 0..=(6 - l1) {
                let one = ln_structure_prob(l1, l2, 6, 64, 1.1).unwrap();
                assert!((one - all[l1][l2]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn direct_matches_closed_form_small() {
        for order in [16, 64, 256] {
            for dp in [0.4, 1.7, 5.0] {
                for l1 in 0..=5 {
                    for l2 in 0..=(5 - l1) {
                        let a = ln_structure_prob(l1, l2, 5, order, dp).unwrap();
                        let b = ln_structure_prob_closed_form(l1, l2, 5, order, dp).unwrap();
                        assert!((a - b).abs() < 1e-11, "{order} {dp} [{l1} {l2}]");
                    }
                }
            }
        }
    }

    #[test]
    fn high_snr_underflow_is_handled() {
        let ln = ln_structure_prob(20, 10, 32, 16, 30.0).unwrap();
        assert!(ln.is_finite() && ln < -1000.0);
        let cf = ln_structure_prob_closed_form(20, 10, 32, 16, 30.0).unwrap();
        assert!((ln - cf).abs() / ln.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(structure_prob(20, 13, 32, 16, 1.0).is_err());
        assert!(structure_prob(1, 0, 32, 32, 1.0).is_err());
        assert!(build_structure_table(32, 16, &[], None, None).is_err());
        assert!(build_structure_table(32, 16, &[3.0, 1.0], None, None).is_err());
    }

    #[test]
    fn table_shape_and_ordering() {
        let t = build_structure_table(32, 16, &[0.0, 10.0, 33.0], None, None).unwrap();
        for row in &t.rows {
            assert_eq!(row.len(), 32 * 35 / 2);
            assert!(row.windows(2).all(|w| w[0].probability >= w[1].probability));
        }
        assert_eq!((t.rows[2][0].l1, t.rows[2][0].l2), (1, 0));
    }

    #[test]
    fn capped_table() {
        let t = build_structure_table(32, 16, &default_snr_grid(), Some(3), Some(5)).unwrap();
        assert_eq!(t.rows.len(), 133);
        for row in &t.rows {
            assert_eq!(row.len(), 5);
            assert!(row.iter().all(|e| e.weight() <= 3 && e.weight() > 0));
        }
        let t2 = build_structure_table(32, 16, &default_snr_grid(), Some(2), None).unwrap();
        assert!(t2.rows.iter().all(|r| r.len() == 3));
    }

    #[test]
    fn ties_break_toward_lower_weight() {
        // d' = 40 makes every nonzero structure probability exactly zero
        let t = ordered_structures(4, 16, 200.0, None, None).unwrap();
        assert!(t.iter().all(|e| e.probability == 0.0));
        let keys: Vec<(usize, usize)> = t.iter().map(|e| (e.weight(), e.l2)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn nearest_row_lookup() {
        let t = build_structure_table(4, 16, &[0.0, 1.0, 2.0], Some(2), None).unwrap();
        assert_eq!(t.row_index(-5.0), 0);
        assert_eq!(t.row_index(0.4), 0);
        assert_eq!(t.row_index(0.5), 0);
        assert_eq!(t.row_index(0.6), 1);
        assert_eq!(t.row_index(1.9), 2);
        assert_eq!(t.row_index(50.0), 2);
        assert_eq!(t.row_index(f64::NEG_INFINITY), 0);
    }

    #[test]
    fn table_text_round_trip() {
        let t = build_structure_table(32, 16, &default_snr_grid(), Some(3), Some(5)).unwrap();
        let text = t.to_text();
        assert!(text.starts_with("STRUCTURE_TABLE v1 L=32 M=16 wth=3 top=5 points=133\n"));
        assert_eq!(StructureTable::from_text(&text).unwrap(), t);
        let u = build_structure_table(8, 64, &[-3.5, 0.0, 61.25], None, None).unwrap();
        assert_eq!(StructureTable::from_text(&u.to_text()).unwrap(), u);
        assert!(StructureTable::from_text("garbage").is_err());
    }

    #[test]
    fn memory_accounting() {
        assert_eq!(bits_per_structure(3), 3);
        assert_eq!(table_memory_bits(3, 5, 133), 1995);
        assert_eq!(bits_per_structure(2), 3);
        assert_eq!(table_memory_bits(2, 5, 133), 1995);
        assert_eq!(table_memory_bits(1, 1, 1), 1);
        assert_eq!(bits_per_structure(4), 3 + 2);
        assert_eq!(bits_per_structure(7), 3 + 2);
    }
}
