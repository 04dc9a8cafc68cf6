//! Monte Carlo driver: encode, modulate, fade, equalize, detect, decode.
//!
//! Every block draws its randomness from its own generator seeded by
//! `(seed, snr_index, block_index)`. Blocks are simulated in parallel batches
//! and folded in block order, so the stop rule and every statistic are
//! independent of the number of workers.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{equalize, sample_fading, transmit, FadingModel};
use crate::error::{Error, Result};
use crate::gf2::{generate_rlc, BitWord, LinearCode};
use crate::grand::{BitLevelPatterns, DecodeOutcome, SymbolLevelPatterns, SyndromeDecoder};
use crate::likelihood::{
    build_structure_table, d_prime_from_snr, db_to_linear, ln_structure_prob_closed_form,
    StructureTable,
};
use crate::modem::Constellation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderChoice {
    Bit,
    Symbol,
    Both,
}

impl DecoderChoice {
    pub fn kinds(self) -> &'static [DecoderKind] {
        match self {
            DecoderChoice::Bit => &[DecoderKind::BitLevel],
            DecoderChoice::Symbol => &[DecoderKind::SymbolLevel],
            DecoderChoice::Both => &[DecoderKind::BitLevel, DecoderKind::SymbolLevel],
        }
    }
}

impl FromStr for DecoderChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bit" => Ok(DecoderChoice::Bit),
            "symbol" => Ok(DecoderChoice::Symbol),
            "both" => Ok(DecoderChoice::Both),
            other => Err(Error::Parse(format!("unknown decoder {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecoderKind {
    #[serde(rename = "bit")]
    BitLevel,
    #[serde(rename = "symbol")]
    SymbolLevel,
    #[serde(rename = "uncoded")]
    /// Uncoded transmission: a block error is any detection error.
    Uncoded,
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::BitLevel => "bit",
            DecoderKind::SymbolLevel => "symbol",
            DecoderKind::Uncoded => "uncoded",
        })
    }
}

/// Evenly spaced values `start, start + step, ..., stop`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || self.stop < self.start {
            return Err(Error::InvalidGrid);
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            start: 0.0,
            step: 0.25,
            stop: 33.0,
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad range {s:?}")))
            })
            .collect::<Result<_>>()?;
        match parts[..] {
            [start, step, stop] => Ok(GridSpec { start, step, stop }),
            _ => Err(Error::Parse(format!("expected start:step:stop, got {s:?}"))),
        }
    }
}

/// Parse `start:step:stop` or a comma separated list of values.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    if s.contains(':') {
        s.parse::<GridSpec>()?.values()
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad value list {s:?}")))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub order: usize,
    pub channel: FadingModel,
    pub decoder: DecoderChoice,
    pub w_th: usize,
    pub ebn0_db: Vec<f64>,
    pub seed: u64,
    /// Seed of the random linear code.
    pub code_seed: u64,
    pub min_block_errors: u64,
    /// Zero means no block limit.
    pub max_blocks: u64,
    /// Effective-SNR grid of the symbol-level lookup table, in dB.
    pub table_grid: GridSpec,
    pub top_v: Option<usize>,
    pub uncoded: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 128,
            k: 103,
            order: 16,
            channel: FadingModel::Awgn,
            decoder: DecoderChoice::Both,
            w_th: 2,
            ebn0_db: vec![10.0],
            seed: 1,
            code_seed: 1,
            min_block_errors: 100,
            max_blocks: 1_000_000,
            table_grid: GridSpec::default(),
            top_v: Some(5),
            uncoded: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let c = Constellation::new(self.order, 1.0)?;
        if !self.n.is_multiple_of(c.bits_per_symbol()) {
            return Err(Error::NotSymbolAligned {
                len: self.n,
                bits_per_symbol: c.bits_per_symbol(),
            });
        }
        if self.uncoded {
            if self.k != self.n {
                return Err(Error::Config("uncoded mode requires k = n".into()));
            }
        } else if self.k == 0 || self.k >= self.n {
            return Err(Error::InvalidDimensions {
                n: self.n,
                k: self.k,
            });
        }
        if self.min_block_errors == 0 && self.max_blocks == 0 {
            return Err(Error::Config(
                "need min_block_errors >= 1 or max_blocks >= 1".into(),
            ));
        }
        if self.w_th > self.n {
            return Err(Error::Config(format!("w_th={} exceeds n={}", self.w_th, self.n)));
        }
        if self.ebn0_db.is_empty() {
            return Err(Error::Config("no Eb/N0 points".into()));
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn symbols_per_block(&self) -> usize {
        self.n / self.order.trailing_zeros() as usize
    }

    /// Average SNR `gamma = Es/N0 = (log2 M)(k/n)(Eb/N0)`.
    pub fn average_snr(&self, ebn0_db: f64) -> f64 {
        self.order.trailing_zeros() as f64 * self.rate() * db_to_linear(ebn0_db)
    }

    /// Noise density for unit symbol energy, `N0 = 1 / gamma`.
    pub fn noise_density(&self, ebn0_db: f64) -> f64 {
        1.0 / self.average_snr(ebn0_db)
    }

    pub fn decoder_kinds(&self) -> &'static [DecoderKind] {
        if self.uncoded {
            &[DecoderKind::Uncoded]
        } else {
            self.decoder.kinds()
        }
    }
}

/// Immutable state shared by every block of a run.
#[derive(Clone, Debug)]
pub struct SimContext {
    pub config: SimConfig,
    pub constellation: Constellation,
    pub code: Option<LinearCode>,
    pub decoder: Option<SyndromeDecoder>,
    pub table: Option<StructureTable>,
}

impl SimContext {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let constellation = Constellation::new(config.order, 1.0)?;
        let (code, decoder) = if config.uncoded {
            (None, None)
        } else {
            let code = generate_rlc(config.n, config.k, config.code_seed)?;
            let dec = SyndromeDecoder::new(&code)?;
            (Some(code), Some(dec))
        };
        let table = if !config.uncoded && config.decoder != DecoderChoice::Bit {
            Some(build_structure_table(
                config.symbols_per_block(),
                config.order,
                &config.table_grid.values()?,
                Some(config.w_th),
                config.top_v,
            )?)
        } else {
            None
        };
        Ok(SimContext {
            config,
            constellation,
            code,
            decoder,
            table,
        })
    }
}

/// Structure of a realized error vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RealizedStructure {
    Structure { l1: usize, l2: usize },
    /// Some string is outside `{0} u E1 u E2` of its transmitted label.
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderRecord {
    pub kind: DecoderKind,
    pub block_error: bool,
    pub abandoned: bool,
    pub tests: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockRecord {
    pub h: Complex64,
    pub transmitted: BitWord,
    pub received: BitWord,
    pub decoders: Vec<DecoderRecord>,
    pub structure: RealizedStructure,
}

impl BlockRecord {
    pub fn record(&self, kind: DecoderKind) -> Option<&DecoderRecord> {
        self.decoders.iter().find(|r| r.kind == kind)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one block, a pure function of its coordinates.
pub fn block_rng(seed: u64, snr_index: usize, block_index: u64) -> ChaCha8Rng {
    let s = mix64(mix64(mix64(seed) ^ snr_index as u64) ^ block_index);
    ChaCha8Rng::seed_from_u64(s)
}

pub fn realized_structure(c: &Constellation, x_labels: &[u32], y_labels: &[u32]) -> RealizedStructure {
    let (mut l1, mut l2) = (0, 0);
    for (&x, &y) in x_labels.iter().zip(y_labels) {
        let e = x ^ y;
        if e == 0 {
            continue;
        }
        if c.e1_values(x).contains(&e) {
            l1 += 1;
        } else if c.e2_values(x).contains(&e) {
            l2 += 1;
        } else {
            return RealizedStructure::Other;
        }
    }
    RealizedStructure::Structure { l1, l2 }
}

fn decoder_record(kind: DecoderKind, x: &BitWord, out: &DecodeOutcome) -> DecoderRecord {
    DecoderRecord {
        kind,
        block_error: out.codeword.as_ref() != Some(x),
        abandoned: !out.is_decoded(),
        tests: out.tests,
    }
}

/// Simulate one block at `ebn0_db`. An infinite Eb/N0 gives a noiseless block.
pub fn run_block<R: Rng + ?Sized>(ctx: &SimContext, ebn0_db: f64, rng: &mut R) -> Result<BlockRecord> {
    let cfg = &ctx.config;
    let c = &ctx.constellation;
    let x = match &ctx.code {
        Some(code) => {
            let bits: Vec<bool> = (0..cfg.k).map(|_| rng.random()).collect();
            code.encode(&BitWord::from_bits(&bits))?
        }
        None => {
            let bits: Vec<bool> = (0..cfg.n).map(|_| rng.random()).collect();
            BitWord::from_bits(&bits)
        }
    };
    let s = c.modulate(&x)?;
    let h = sample_fading(cfg.channel, rng);
    let n0 = cfg.noise_density(ebn0_db);
    let r = transmit(&s, h, n0, rng);
    let r_eq = equalize(&r, h)?;
    let y_labels = c.hard_detect_labels(&r_eq);
    let y = c.word_from_labels(&y_labels);
    let x_labels = c.labels_of(&x)?;
    let structure = realized_structure(c, &x_labels, &y_labels);

    let mut decoders = Vec::new();
    for &kind in cfg.decoder_kinds() {
        let rec = match kind {
            DecoderKind::Uncoded => DecoderRecord {
                kind,
                block_error: y != x,
                abandoned: false,
                tests: 0,
            },
            DecoderKind::BitLevel => {
                let dec = ctx.decoder.as_ref().expect("coded run has a decoder");
                let src = BitLevelPatterns::new(cfg.n, cfg.w_th)?;
                decoder_record(kind, &x, &dec.decode(&y, &src)?)
            }
            DecoderKind::SymbolLevel => {
                let dec = ctx.decoder.as_ref().expect("coded run has a decoder");
                let table = ctx.table.as_ref().expect("symbol-level run has a table");
                let gamma = 1.0 / n0;
                let snr_db = 10.0 * (h.norm_sqr() * gamma).log10();
                let row = table.row_for_snr(snr_db);
                let src = SymbolLevelPatterns::from_labels(
                    y_labels.clone(),
                    row.iter().map(|e| (e.l1, e.l2)).collect(),
                    c,
                )?;
                decoder_record(kind, &x, &dec.decode(&y, &src)?)
            }
        };
        decoders.push(rec);
    }
    Ok(BlockRecord {
        h,
        transmitted: x,
        received: y,
        decoders,
        structure,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub ebn0_db: f64,
    pub decoder: DecoderKind,
    pub blocks: u64,
    pub block_errors: u64,
    pub bler: f64,
    pub total_tests: u64,
    pub avg_tests: f64,
    pub abandonments: u64,
    pub wall_time_s: f64,
}

impl PointResult {
    /// Normal-approximation 95% confidence interval of the BLER.
    pub fn bler_ci95(&self) -> (f64, f64) {
        let p = self.bler;
        let half = 1.96 * (p * (1.0 - p) / self.blocks as f64).sqrt();
        ((p - half).max(0.0), (p + half).min(1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResults {
    pub config: SimConfig,
    pub points: Vec<PointResult>,
}

impl SimResults {
    pub fn point(&self, ebn0_db: f64, kind: DecoderKind) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.ebn0_db == ebn0_db && p.decoder == kind)
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    block_errors: u64,
    tests: u64,
    abandonments: u64,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

const FIRST_BATCH: u64 = 1024;
const MAX_BATCH: u64 = 1 << 16;

/// Run every Eb/N0 point of `config` on `workers` threads (0 = all cores).
pub fn run_simulation(config: &SimConfig, workers: usize) -> Result<SimResults> {
    let ctx = SimContext::new(config.clone())?;
    let pool = build_pool(workers)?;
    let kinds = config.decoder_kinds();
    let mut points = Vec::new();

    for (snr_index, &ebn0) in config.ebn0_db.iter().enumerate() {
        let started = Instant::now();
        let mut tallies = vec![Tally::default(); kinds.len()];
        let mut blocks = 0u64;
        let mut batch = FIRST_BATCH;
        let done = |blocks: u64, tallies: &[Tally]| {
            let errors_met = config.min_block_errors > 0
                && tallies.iter().all(|t| t.block_errors >= config.min_block_errors);
            let blocks_met = config.max_blocks > 0 && blocks >= config.max_blocks;
            errors_met || blocks_met
        };
        'point: while !done(blocks, &tallies) {
            let mut end = blocks + batch;
            if config.max_blocks > 0 {
                end = end.min(config.max_blocks);
            }
            let records = pool.install(|| {
                (blocks..end)
                    .into_par_iter()
                    .map(|b| {
                        let mut rng = block_rng(config.seed, snr_index, b);
                        run_block(&ctx, ebn0, &mut rng).map(|r| r.decoders)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            for recs in records {
                blocks += 1;
                for (t, r) in tallies.iter_mut().zip(&recs) {
                    t.block_errors += r.block_error as u64;
                    t.tests += r.tests;
                    t.abandonments += r.abandoned as u64;
                }
                if done(blocks, &tallies) {
                    break 'point;
                }
            }
            batch = (batch * 2).min(MAX_BATCH);
        }
        let wall = started.elapsed().as_secs_f64();
        for (&kind, t) in kinds.iter().zip(&tallies) {
            points.push(PointResult {
                ebn0_db: ebn0,
                decoder: kind,
                blocks,
                block_errors: t.block_errors,
                bler: t.block_errors as f64 / blocks as f64,
                total_tests: t.tests,
                avg_tests: t.tests as f64 / blocks as f64,
                abandonments: t.abandonments,
                wall_time_s: wall,
            });
        }
    }
    Ok(SimResults {
        config: config.clone(),
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

fn config_comment_lines(config: &SimConfig) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let mut s = String::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            s.push_str(&format!("# {k}={v}\n"));
        }
    }
    Ok(s)
}

/// CSV with the configuration echoed as leading `#` comment lines.
pub fn results_csv(results: &SimResults) -> Result<String> {
    let mut out = config_comment_lines(&results.config)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "ebn0_db",
        "decoder",
        "channel",
        "w_th",
        "blocks",
        "block_errors",
        "bler",
        "avg_tests",
        "abandonments",
    ])?;
    for p in &results.points {
        w.write_record([
            p.ebn0_db.to_string(),
            p.decoder.to_string(),
            results.config.channel.to_string(),
            results.config.w_th.to_string(),
            p.blocks.to_string(),
            p.block_errors.to_string(),
            p.bler.to_string(),
            p.avg_tests.to_string(),
            p.abandonments.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn results_json(results: &SimResults) -> Result<String> {
    Ok(serde_json::to_string_pretty(results)?)
}

pub fn emit_results(results: &SimResults, format: OutputFormat, path: &Path) -> Result<()> {
    if results.points.is_empty() {
        return Err(Error::Config("no results to emit".into()));
    }
    let text = match format {
        OutputFormat::Csv => results_csv(results)?,
        OutputFormat::Json => results_json(results)?,
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub order: usize,
    /// Symbols per block.
    pub l: usize,
    pub ebn0_db: Vec<f64>,
    pub blocks: u64,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            order: 16,
            l: 32,
            ebn0_db: vec![6.0, 8.0, 10.0, 12.0],
            blocks: 1_000_000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureRow {
    pub l1: usize,
    pub l2: usize,
    pub theory: f64,
    pub count: u64,
    pub empirical: f64,
    /// `sqrt(theory (1 - theory) / blocks)`; zero without blocks.
    pub std_err: f64,
    /// 1-based rank among nonzero structures by theoretical probability.
    pub theory_rank: Option<usize>,
    /// 1-based rank among nonzero structures by empirical frequency.
    pub empirical_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub ebn0_db: f64,
    pub d_prime: f64,
    pub blocks: u64,
    /// Blocks whose error vector had a string outside the neighbourhoods.
    pub other_count: u64,
    pub rows: Vec<StructureRow>,
}

impl ValidationPoint {
    /// Rows of the `top` most likely nonzero structures, most likely first.
    pub fn top_theory(&self, top: usize) -> Vec<&StructureRow> {
        let mut rows: Vec<&StructureRow> = self.rows.iter().filter(|r| r.theory_rank.is_some()).collect();
        rows.sort_by_key(|r| r.theory_rank);
        rows.truncate(top);
        rows
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub points: Vec<ValidationPoint>,
}

/// Number of theoretically most likely structures always listed in a report.
const REPORT_TOP: usize = 10;

/// Tally realized error structures of uncoded AWGN blocks against the
/// predicted structure probabilities.
pub fn validate_structures(config: &ValidationConfig, workers: usize) -> Result<ValidationReport> {
    let bits_per_symbol = Constellation::new(config.order, 1.0)?.bits_per_symbol();
    let n = config.l * bits_per_symbol;
    let sim = SimConfig {
        n,
        k: n,
        order: config.order,
        channel: FadingModel::Awgn,
        decoder: DecoderChoice::Bit,
        w_th: 0,
        ebn0_db: config.ebn0_db.clone(),
        seed: config.seed,
        code_seed: 0,
        min_block_errors: 0,
        max_blocks: config.blocks.max(1),
        table_grid: GridSpec::default(),
        top_v: None,
        uncoded: true,
    };
    let ctx = SimContext::new(sim.clone())?;
    let pool = build_pool(workers)?;
    let l = config.l;
    let cells = (l + 1) * (l + 1) + 1;
    let other = cells - 1;

    let mut points = Vec::new();
    for (snr_index, &ebn0) in config.ebn0_db.iter().enumerate() {
        let counts: Vec<u64> = pool.install(|| {
            (0..config.blocks)
                .into_par_iter()
                .fold(
                    || Ok(vec![0u64; cells]),
                    |acc: Result<Vec<u64>>, b| {
                        let mut acc = acc?;
                        let mut rng = block_rng(config.seed, snr_index, b);
                        let rec = run_block(&ctx, ebn0, &mut rng)?;
                        match rec.structure {
                            RealizedStructure::Structure { l1, l2 } => acc[l1 * (l + 1) + l2] += 1,
                            RealizedStructure::Other => acc[other] += 1,
                        }
                        Ok(acc)
                    },
                )
                .reduce(
                    || Ok(vec![0u64; cells]),
                    |a, b| {
                        let (mut a, b) = (a?, b?);
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        Ok(a)
                    },
                )
        })?;

        let dp = d_prime_from_snr(config.order, sim.average_snr(ebn0));
        let mut theory = Vec::new();
        for l1 in 0..=l {
            for l2 in 0..=(l - l1) {
                let p = ln_structure_prob_closed_form(l1, l2, l, config.order, dp)?.exp();
                theory.push((l1, l2, p));
            }
        }
        let rank_by = |values: &[(usize, usize, f64)]| -> Vec<(usize, usize)> {
            let mut v: Vec<&(usize, usize, f64)> =
                values.iter().filter(|(a, b, _)| a + b > 0).collect();
            v.sort_by(|x, y| {
                y.2.total_cmp(&x.2)
                    .then((x.0 + 2 * x.1).cmp(&(y.0 + 2 * y.1)))
                    .then(x.1.cmp(&y.1))
            });
            v.into_iter().map(|&(a, b, _)| (a, b)).collect()
        };
        let theory_order = rank_by(&theory);
        let empirical: Vec<(usize, usize, f64)> = theory
            .iter()
            .map(|&(a, b, _)| (a, b, counts[a * (l + 1) + b] as f64))
            .collect();
        let empirical_order = rank_by(&empirical);

        let blocks = config.blocks;
        let mut rows = Vec::new();
        for &(l1, l2, p) in &theory {
            let count = counts[l1 * (l + 1) + l2];
            let theory_rank = theory_order.iter().position(|&s| s == (l1, l2));
            let listed = count > 0 || l1 + l2 == 0 || theory_rank.is_some_and(|r| r < REPORT_TOP);
            if !listed {
                continue;
            }
            let (empirical, std_err) = if blocks > 0 {
                (
                    count as f64 / blocks as f64,
                    (p * (1.0 - p) / blocks as f64).sqrt(),
                )
            } else {
                (0.0, 0.0)
            };
            rows.push(StructureRow {
                l1,
                l2,
                theory: p,
                count,
                empirical,
                std_err,
                theory_rank: theory_rank.map(|r| r + 1),
                empirical_rank: if count > 0 {
                    empirical_order.iter().position(|&s| s == (l1, l2)).map(|r| r + 1)
                } else {
                    None
                },
            });
        }
        rows.sort_by_key(|r| (r.theory_rank.unwrap_or(0), r.l1, r.l2));
        points.push(ValidationPoint {
            ebn0_db: ebn0,
            d_prime: dp,
            blocks,
            other_count: counts[other],
            rows,
        });
    }
    Ok(ValidationReport {
        config: config.clone(),
        points,
    })
}

pub fn validation_json(report: &ValidationReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn validation_csv(report: &ValidationReport) -> Result<String> {
    let mut out = String::new();
    if let serde_json::Value::Object(map) = serde_json::to_value(&report.config)? {
        for (k, v) in map {
            out.push_str(&format!("# {k}={v}\n"));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "ebn0_db",
        "l1",
        "l2",
        "weight",
        "theory",
        "empirical",
        "count",
        "std_err",
        "z",
        "theory_rank",
        "empirical_rank",
    ])?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in &report.points {
        for r in &p.rows {
            let z = if r.std_err > 0.0 {
                ((r.empirical - r.theory) / r.std_err).to_string()
            } else {
                String::new()
            };
            w.write_record([
                p.ebn0_db.to_string(),
                r.l1.to_string(),
                r.l2.to_string(),
                (r.l1 + 2 * r.l2).to_string(),
                format!("{:e}", r.theory),
                r.empirical.to_string(),
                r.count.to_string(),
                r.std_err.to_string(),
                z,
                opt(r.theory_rank),
                opt(r.empirical_rank),
            ])?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    for p in &report.points {
        out.push_str(&format!(
            "# ebn0_db={} blocks={} other={}\n",
            p.ebn0_db, p.blocks, p.other_count
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::default_snr_grid;

    fn small_config() -> SimConfig {
        SimConfig {
            n: 32,
            k: 24,
            order: 16,
            ebn0_db: vec![6.0, 9.0],
            min_block_errors: 20,
            max_blocks: 4000,
            ..SimConfig::default()
        }
    }

    #[test]
    fn grid_parsing() {
        let g: GridSpec = "0:0.25:33".parse().unwrap();
        let v = g.values().unwrap();
        assert_eq!(v.len(), 133);
        assert_eq!(v, default_snr_grid());
        assert_eq!(parse_values("6,8, 10").unwrap(), vec![6.0, 8.0, 10.0]);
        assert_eq!(parse_values("8:1:12").unwrap(), vec![8.0, 9.0, 10.0, 11.0, 12.0]);
        assert!(parse_values("1:2").is_err());
        assert!(parse_values("1:0:3").is_err());
        assert!(parse_values("a,b").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(small_config().validate().is_ok());
        let bad = |f: fn(&mut SimConfig)| {
            let mut c = small_config();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.n = 30));
        assert!(bad(|c| c.k = 32));
        assert!(bad(|c| c.uncoded = true));
        assert!(bad(|c| {
            c.min_block_errors = 0;
            c.max_blocks = 0
        }));
        assert!(bad(|c| c.order = 8));
        assert!(bad(|c| c.ebn0_db.clear()));
    }

    #[test]
    fn noise_mapping() {
        let c = SimConfig::default();
        let n0 = c.noise_density(10.0);
        assert!((n0 - 1.0 / (4.0 * 103.0 / 128.0 * 10.0)).abs() < 1e-15);
        assert!((c.average_snr(10.0) * n0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clean_channel_needs_one_test() {
        for channel in [FadingModel::Awgn, FadingModel::Rayleigh] {
            let ctx = SimContext::new(SimConfig {
                channel,
                ..small_config()
            })
            .unwrap();
            for b in 0..20 {
                let mut rng = block_rng(3, 0, b);
                let rec = run_block(&ctx, f64::INFINITY, &mut rng).unwrap();
                assert_eq!(rec.received, rec.transmitted);
                assert_eq!(rec.decoders.len(), 2);
                for d in &rec.decoders {
                    assert_eq!(d.tests, 1);
                    assert!(!d.block_error);
                }
            }
        }
    }

    #[test]
    fn decoders_share_the_received_word() {
        let ctx = SimContext::new(small_config()).unwrap();
        let code = ctx.code.as_ref().unwrap();
        for b in 0..200 {
            let mut rng = block_rng(5, 1, b);
            let rec = run_block(&ctx, 5.0, &mut rng).unwrap();
            // rerun each decoder alone on the recorded y
            let dec = ctx.decoder.as_ref().unwrap();
            let bit = dec
                .decode(&rec.received, &BitLevelPatterns::new(32, 2).unwrap())
                .unwrap();
            assert_eq!(bit.tests, rec.record(DecoderKind::BitLevel).unwrap().tests);
            assert!(code.is_codeword(&rec.transmitted).unwrap());
        }
    }

    #[test]
    fn uncoded_records_structure() {
        let ctx = SimContext::new(SimConfig {
            n: 128,
            k: 128,
            uncoded: true,
            ..SimConfig::default()
        })
        .unwrap();
        assert!(ctx.code.is_none());
        let mut rng = block_rng(1, 0, 0);
        let rec = run_block(&ctx, 4.0, &mut rng).unwrap();
        assert_eq!(rec.decoders[0].kind, DecoderKind::Uncoded);
        assert_eq!(rec.decoders[0].tests, 0);
        let c = &ctx.constellation;
        let expected = realized_structure(
            c,
            &c.labels_of(&rec.transmitted).unwrap(),
            &c.labels_of(&rec.received).unwrap(),
        );
        assert_eq!(rec.structure, expected);
    }

    #[test]
    fn realized_structure_classification() {
        let c = Constellation::new(16, 1.0).unwrap();
        let x = 0b1011u32; // bits 1101
        let x_labels = [x, x, x];
        assert_eq!(
            realized_structure(&c, &x_labels, &[x ^ 1, x, x ^ 3]),
            RealizedStructure::Structure { l1: 1, l2: 1 }
        );
        assert_eq!(
            realized_structure(&c, &x_labels, &[x ^ 0b1111, x, x]),
            RealizedStructure::Other
        );
    }

    #[test]
    fn simulation_is_deterministic_across_workers() {
        let cfg = small_config();
        let a = run_simulation(&cfg, 1).unwrap();
        let b = run_simulation(&cfg, 4).unwrap();
        assert_eq!(results_csv(&a).unwrap(), results_csv(&b).unwrap());
        for p in &a.points {
            assert!(p.blocks >= 1);
            assert!((0.0..=1.0).contains(&p.bler));
            assert_eq!(p.bler, p.block_errors as f64 / p.blocks as f64);
            assert_eq!(p.avg_tests, p.total_tests as f64 / p.blocks as f64);
        }
    }

    #[test]
    fn stop_rule() {
        let cfg = small_config();
        let res = run_simulation(&cfg, 2).unwrap();
        for ebn0 in &cfg.ebn0_db {
            let bit = res.point(*ebn0, DecoderKind::BitLevel).unwrap();
            let sym = res.point(*ebn0, DecoderKind::SymbolLevel).unwrap();
            assert_eq!(bit.blocks, sym.blocks);
            let reached = bit.block_errors.min(sym.block_errors) >= cfg.min_block_errors;
            assert!(reached || bit.blocks == cfg.max_blocks);
            if reached && bit.blocks < cfg.max_blocks {
                // the run stops on the block that completes the target
                assert!(
                    bit.block_errors == cfg.min_block_errors || sym.block_errors == cfg.min_block_errors
                );
            }
        }
        let capped = run_simulation(
            &SimConfig {
                min_block_errors: 0,
                max_blocks: 77,
                ..small_config()
            },
            3,
        )
        .unwrap();
        assert!(capped.points.iter().all(|p| p.blocks == 77));
    }

    #[test]
    fn csv_and_json_emission() {
        let cfg = SimConfig {
            ebn0_db: vec![7.0],
            decoder: DecoderChoice::Symbol,
            ..small_config()
        };
        let res = run_simulation(&cfg, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("r.csv");
        emit_results(&res, OutputFormat::Csv, &csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 1);
        for idx in [0, 3, 4, 5, 6, 7, 8] {
            assert!(rows[0][idx].parse::<f64>().unwrap().is_finite());
        }
        assert_eq!(&rows[0][1], "symbol");

        let json_path = dir.path().join("r.json");
        emit_results(&res, OutputFormat::Json, &json_path).unwrap();
        let back: SimResults =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(back, res);

        assert!(emit_results(&res, OutputFormat::Csv, &dir.path().join("no/such/dir.csv")).is_err());
    }

    #[test]
    fn validation_with_zero_blocks() {
        let report = validate_structures(
            &ValidationConfig {
                blocks: 0,
                ebn0_db: vec![8.0],
                ..ValidationConfig::default()
            },
            1,
        )
        .unwrap();
        let p = &report.points[0];
        assert_eq!(p.blocks, 0);
        assert!(p.rows.iter().all(|r| r.count == 0 && r.empirical_rank.is_none()));
        assert_eq!(p.top_theory(5).len(), 5);
        assert!(validation_csv(&report).unwrap().contains("ebn0_db,l1,l2"));
    }

    #[test]
    fn validation_high_snr_top_structure() {
        let report = validate_structures(
            &ValidationConfig {
                blocks: 20_000,
                ebn0_db: vec![14.0],
                ..ValidationConfig::default()
            },
            2,
        )
        .unwrap();
        let p = &report.points[0];
        let top = p.top_theory(1)[0];
        assert_eq!((top.l1, top.l2), (1, 0));
        assert_eq!(top.empirical_rank, Some(1));
    }
}
