use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symgrand::grand::{BitLevelPatterns, PatternSource, SymbolLevelPatterns, SyndromeDecoder};
use symgrand::harness::{block_rng, run_block, run_simulation, DecoderKind, SimContext};
use symgrand::likelihood::ordered_structures;
use symgrand::{BitWord, Constellation, FadingModel, LinearCode, SimConfig};

fn word(bits: &[bool]) -> BitWord {
    BitWord::from_bits(bits)
}

proptest! {
    #[test]
    fn syndrome_is_linear(
        seed in 0u64..1000,
        a in prop::collection::vec(any::<bool>(), 40),
        b in prop::collection::vec(any::<bool>(), 40),
    ) {
        let code = LinearCode::random(40, 22, seed).unwrap();
        let (a, b) = (word(&a), word(&b));
        let lhs = code.syndrome(&a.xor(&b).unwrap()).unwrap();
        let rhs = code.syndrome(&a).unwrap().xor(&code.syndrome(&b).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn small_codebooks_have_full_size(seed in 0u64..500, n in 4usize..=12, kfrac in 0.2f64..0.9) {
        let k = ((n as f64 * kfrac) as usize).clamp(1, n - 1);
        let code = LinearCode::random(n, k, seed).unwrap();
        let mut words = HashSet::new();
        for m in 0..(1u64 << k) {
            let c = code.encode(&BitWord::from_value(m, k)).unwrap();
            prop_assert!(code.is_codeword(&c).unwrap());
            words.insert(c);
        }
        prop_assert_eq!(words.len(), 1usize << k);
    }

    #[test]
    fn symbol_patterns_respect_neighbourhoods(
        labels in prop::collection::vec(0u32..16, 2..6),
        snr in 5.0f64..25.0,
    ) {
        let c = Constellation::new(16, 1.0).unwrap();
        let l = labels.len();
        let row = ordered_structures(l, 16, snr, Some(3), None).unwrap();
        let y = c.word_from_labels(&labels);
        let src = SymbolLevelPatterns::new(&y, &row, &c).unwrap();
        let patterns = src.patterns();
        prop_assert_eq!(patterns.len() as u128, src.count());
        prop_assert!(patterns[0].is_zero());
        let distinct: HashSet<_> = patterns.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), patterns.len());
        for e in &patterns[1..] {
            let strings = c.labels_of(e).unwrap();
            let (mut l1, mut l2) = (0, 0);
            for (&g, &x) in strings.iter().zip(&labels) {
                if g == 0 { continue; }
                if c.e1_values(x).contains(&g) { l1 += 1 }
                else if c.e2_values(x).contains(&g) { l2 += 1 }
                else { prop_assert!(false, "string {g:04b} outside neighbourhood of {x:04b}") }
            }
            prop_assert!(row.iter().any(|s| (s.l1, s.l2) == (l1, l2)));
            prop_assert!(l1 + 2 * l2 <= 3);
        }
    }
}

#[test]
fn bit_level_decoding_corrects_every_single_error() {
    let code = LinearCode::random(64, 45, 3).unwrap();
    let dec = SyndromeDecoder::new(&code).unwrap();
    let src = BitLevelPatterns::new(64, 1).unwrap();
    let x = code.encode(&BitWord::from_value(0x1234_5678_9abc, 45)).unwrap();
    for i in 0..64 {
        let mut y = x.clone();
        y.flip(i);
        let out = dec.decode(&y, &src).unwrap();
        assert_eq!(out.codeword.as_ref(), Some(&x));
        assert_eq!(out.tests, 2 + i as u64);
    }
}

#[test]
fn noiseless_blocks_decode_in_one_test() {
    for channel in [FadingModel::Awgn, FadingModel::Rayleigh] {
        let config = SimConfig {
            channel,
            ebn0_db: vec![f64::INFINITY],
            ..SimConfig::default()
        };
        let ctx = SimContext::new(config).unwrap();
        for b in 0..20 {
            let rec = run_block(&ctx, f64::INFINITY, &mut block_rng(9, 0, b)).unwrap();
            assert_eq!(rec.received, rec.transmitted);
            for d in &rec.decoders {
                assert_eq!((d.tests, d.block_error), (1, false));
            }
        }
    }
}

#[test]
fn paired_decoders_share_the_received_word() {
    let ctx = SimContext::new(SimConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut differing = 0;
    for _ in 0..200 {
        let rec = run_block(&ctx, 8.0, &mut rng).unwrap();
        let bit = rec.record(DecoderKind::BitLevel).unwrap();
        let sym = rec.record(DecoderKind::SymbolLevel).unwrap();
        // both decoders see the same y, so a clean block is clean for both
        if rec.received == rec.transmitted {
            assert_eq!((bit.tests, sym.tests), (1, 1));
        }
        differing += (bit.tests != sym.tests) as usize;
    }
    assert!(differing > 0);
}

#[test]
fn bler_is_nonincreasing_over_a_sweep() {
    let config = SimConfig {
        decoder: symgrand::DecoderChoice::Bit,
        ebn0_db: vec![7.0, 8.0, 9.0, 10.0],
        min_block_errors: 200,
        max_blocks: 200_000,
        ..SimConfig::default()
    };
    let res = run_simulation(&config, 1).unwrap();
    for w in res.points.windows(2) {
        let (lo, _) = w[0].bler_ci95();
        let (_, hi) = w[1].bler_ci95();
        assert!(w[1].bler <= w[0].bler || hi >= lo, "{w:?}");
    }
}
