//! Guessing random additive noise decoding (GRAND) of binary linear codes
//! transmitted with Gray-coded square M-QAM over AWGN and flat Rayleigh
//! fading.
//!
//! Two decoders share one syndrome-based membership test:
//! bit-level GRAND tries error patterns by increasing Hamming weight, while
//! symbol-level GRAND only tries patterns whose per-symbol error strings map
//! each detected point onto a nearest or diagonal neighbour, ordered by the
//! predicted probability of their structure at the current SNR.

// NaN must fail the parameter checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod gf2;
pub mod grand;
pub mod harness;
pub mod likelihood;
pub mod modem;

pub use channel::{equalize, sample_fading, transmit, ChannelState, FadingModel};
pub use error::{Error, Result};
pub use gf2::{generate_rlc, BitWord, Gf2Matrix, LinearCode};
pub use grand::{
    decode, BitLevelPatterns, DecodeOutcome, DecodeStatus, PatternSource, SymbolLevelPatterns,
    SyndromeDecoder,
};
pub use harness::{
    run_block, run_simulation, validate_structures, DecoderChoice, DecoderKind, SimConfig,
    SimResults, ValidationConfig, ValidationReport,
};
pub use likelihood::{
    build_structure_table, q_func, structure_prob, table_memory_bits, type_probs,
    ErrorStructure, StructureTable, TypeProbabilities,
};
pub use modem::{build_constellation, Constellation, Neighborhood, PointClass, SymbolSequence};
