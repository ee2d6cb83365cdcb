use pcdc_core::baseline;
use pcdc_core::codecs::{ac_decode, ac_encode, ideal_bits, trc_decode, trc_encode, ttc_decode, ttc_encode, StepCodebook};
use pcdc_core::coder::{entropy, Decoder, Distribution, Encoder, FLUSH_BYTES, RANGE_FLOOR, TOTAL};
use pcdc_core::huffman::CanonicalCode;
use pcdc_core::ngram::NGramModel;
use pcdc_core::predictor::{quantize_probabilities, ContextModel, ContextModelConfig, PredictError, Predictor};
use pcdc_core::tokenizers::{
    byte_token_name, detokenize_as_byte_tokens, detokenize_as_int, detokenize_as_text, tokenize_as_byte_tokens,
    tokenize_as_int, tokenize_as_text, ByteMapping, Vocabulary,
};
use pcdc_core::CompressionReport;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pseudo-random but history-determined distributions.
struct HashPredictor {
    alphabet: usize,
    seed: u64,
}

impl Predictor for HashPredictor {
    fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    fn next_distribution(&mut self, context: &[u32]) -> Result<Distribution, PredictError> {
        let last = context.last().copied().unwrap_or(u32::MAX) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (last << 20) ^ (context.len() as u64 % 7));
        let skew: f64 = rng.gen_range(0.5..6.0);
        let w: Vec<f64> = (0..self.alphabet).map(|_| rng.gen::<f64>().powf(skew)).collect();
        let sum: f64 = w.iter().sum();
        quantize_probabilities(&w.iter().map(|x| x / sum).collect::<Vec<_>>())
    }

    fn update(&mut self, _: &[u32], _: u32) -> Result<(), PredictError> {
        Ok(())
    }

    fn model_size_bytes(&self) -> u64 {
        0
    }
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(3)).collect();
    let sum: f64 = w.iter().sum();
    quantize_probabilities(&w.iter().map(|x| x / sum).collect::<Vec<_>>()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn coder_roundtrip_and_bound(seed in any::<u64>(), n in 1usize..40, len in 0usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dists: Vec<Distribution> = (0..len).map(|_| random_dist(&mut rng, n)).collect();
        let msg: Vec<usize> = dists.iter().map(|d| {
            // Sample from the distribution itself so costs stay realistic.
            let u = rng.gen_range(0..TOTAL);
            (0..d.len()).find(|&s| d.cum(s + 1) > u).unwrap()
        }).collect();
        let mut enc = Encoder::new();
        let mut ideal = 0.0;
        for (d, &s) in dists.iter().zip(&msg) {
            enc.encode(d, s).unwrap();
            prop_assert!(enc.range() >= RANGE_FLOOR);
            ideal += d.cost_bits(s);
        }
        let bytes = enc.finish();
        prop_assert!((bytes.len() * 8) as f64 <= ideal + 32.0 + 8.0 * FLUSH_BYTES as f64);
        let mut dec = Decoder::new(&bytes).unwrap();
        for (d, &s) in dists.iter().zip(&msg) {
            prop_assert_eq!(dec.decode(d).unwrap(), s);
        }
        prop_assert!(dec.finish().is_ok());
    }

    #[test]
    fn quantization_error_is_bounded(seed in any::<u64>(), n in 1usize..600) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().ln()).collect();
        let sum: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / sum).collect();
        let d = quantize_probabilities(&p).unwrap();
        prop_assert_eq!(d.cum(n), TOTAL);
        for (i, &pi) in p.iter().enumerate() {
            prop_assert!(d.freq(i) >= 1);
            let q = d.freq(i) as f64 / TOTAL as f64;
            prop_assert!((q - pi).abs() <= (n as f64 + 1.0) / TOTAL as f64);
        }
        prop_assert_eq!(quantize_probabilities(&p).unwrap(), d);
    }

    #[test]
    fn huffman_is_near_entropy(weights in prop::collection::vec(1u64..10_000, 1..300)) {
        let pairs: Vec<(u32, u64)> = weights.iter().enumerate().map(|(i, &w)| (i as u32 * 3, w)).collect();
        let code = CanonicalCode::from_weights(&pairs).unwrap();
        prop_assert!(code.is_prefix_free());
        let (num, den) = code.kraft_sum();
        prop_assert!(num <= den);
        let total: u64 = weights.iter().sum();
        let mut h = 0.0;
        let mut expected = 0.0;
        for (&(_, w), (_, l)) in pairs.iter().zip(code.lengths()) {
            let p = w as f64 / total as f64;
            h -= p * p.log2();
            expected += p * l as f64;
        }
        prop_assert!(expected <= h + 1.0 + 1e-9);
    }

    #[test]
    fn baseline_roundtrip(data in prop::collection::vec(any::<u8>(), 0..2000)) {
        let c = baseline::compress(&data);
        prop_assert_eq!(baseline::decompress(&c, data.len()).unwrap(), data);
    }

    #[test]
    fn report_rates_are_consistent(orig in 1u64..1 << 40, comp in 0u64..1 << 40, model in 0u64..1 << 40) {
        let r = CompressionReport::new("c", "m", orig, comp, model).unwrap();
        prop_assert!(r.gamma_a >= r.gamma_r);
        prop_assert_eq!(r.gamma_a == r.gamma_r, model == 0);
        prop_assert!(r.rate_drift() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn token_codecs_roundtrip(seed in any::<u64>(), alphabet in 1usize..300, len in 0usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens: Vec<u32> = (0..len).map(|_| rng.gen_range(0..alphabet as u32)).collect();
        let pred = || HashPredictor { alphabet, seed };
        let ac = ac_encode(pred(), &tokens).unwrap();
        prop_assert_eq!(ac_decode(pred(), &ac, len).unwrap(), tokens.clone());
        let trc = trc_encode(pred(), &tokens).unwrap();
        prop_assert_eq!(trc_decode(pred(), &trc, len).unwrap(), tokens.clone());
        let ttc = ttc_encode(pred(), &tokens).unwrap();
        prop_assert_eq!(ttc_decode(pred(), &ttc.bytes, len).unwrap(), tokens);
    }

    #[test]
    fn ttc_steps_are_shannon_codes(seed in any::<u64>(), alphabet in 1usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_dist(&mut rng, alphabet);
        let book = StepCodebook::new(&d);
        let (num, den) = book.kraft_sum();
        prop_assert!(num <= den);
        let mut expected = 0.0;
        for t in 0..alphabet as u32 {
            let q = d.probability(t as usize);
            let (_, l) = book.codeword(t);
            // Smallest l with q * 2^l >= 1, using exact integer arithmetic.
            let mut want = 0u8;
            while (d.freq(t as usize) as u64) << want < TOTAL as u64 {
                want += 1;
            }
            prop_assert_eq!(l, want);
            prop_assert!((l as f64 - (1.0 / q).log2()).abs() < 1.0 + 1e-9);
            expected += q * l as f64;
        }
        prop_assert!(expected < entropy(&d) + 1.0);
    }

    #[test]
    fn byte_strategies_are_bijective(data in prop::collection::vec(any::<u8>(), 0..600)) {
        let mut entries: Vec<(String, u32)> = (0..=255u8).map(|b| (byte_token_name(b), b as u32 + 200)).collect();
        for (i, s) in ["e", "th", "the", "\u{e9}", "\u{c3}", "ab", "obj"].iter().enumerate() {
            entries.push((s.to_string(), i as u32 + 1));
        }
        let vocab = Vocabulary::from_entries(entries).unwrap();
        let map = ByteMapping::build(&vocab).unwrap();
        prop_assert!(map.is_injective());
        prop_assert_eq!(detokenize_as_int(&tokenize_as_int(&data)).unwrap(), data.clone());
        prop_assert_eq!(detokenize_as_byte_tokens(&tokenize_as_byte_tokens(&data, &map), &map).unwrap(), data.clone());
        prop_assert_eq!(detokenize_as_text(&tokenize_as_text(&data, &vocab).unwrap(), &vocab).unwrap(), data);
    }

    #[test]
    fn ngram_roundtrip(train in "[a-d ]{0,200}", text in "[a-f \\t\\n]{0,200}", raw in prop::collection::vec(any::<u8>(), 0..100)) {
        let model = NGramModel::build(train.as_bytes());
        for t in [text.as_bytes(), &raw[..]] {
            let bits = model.compress(t);
            prop_assert_eq!(model.decompress(&bits.bytes, t.len()).unwrap(), t);
        }
        prop_assert!(model.trees().all(|c| c.is_prefix_free()));
        let bytes = model.serialize();
        prop_assert_eq!(NGramModel::deserialize(&bytes).unwrap().serialize(), bytes);
    }
}

#[test]
fn iid_source_within_entropy_plus_32_bits() {
    let d = quantize_probabilities(&[0.9, 0.1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let msg: Vec<usize> = (0..10_000).map(|_| usize::from(rng.gen::<f64>() >= 0.9)).collect();
    let mut enc = Encoder::new();
    let mut ideal = 0.0;
    for &s in &msg {
        enc.encode(&d, s).unwrap();
        ideal += d.cost_bits(s);
    }
    let bytes = enc.finish();
    let payload_bits = ((bytes.len() - FLUSH_BYTES) * 8) as f64;
    assert!(payload_bits <= ideal + 32.0, "{payload_bits} vs {ideal}");
}

/// Per-step model for the three-letter alphabet {X, I, A}; the probabilities
/// depend on the previous letter.
fn aixi_step(prev: Option<usize>) -> Distribution {
    let freqs: [u32; 3] = match prev {
        None => [16384, 16384, 32768],
        Some(2) => [8192, 40960, 16384],
        Some(1) => [49152, 8192, 8192],
        _ => [8192, 49152, 8192],
    };
    Distribution::from_frequencies(&freqs).unwrap()
}

#[test]
fn aixi_lands_in_the_nested_interval() {
    // X = 0, I = 1, A = 2; the message is "AIXI".
    let msg = [2usize, 1, 0, 1];
    let mut enc = Encoder::new();
    // Exact interval [low / den, (low + width) / den) with den = TOTAL^k.
    let (mut low, mut width, mut den) = (0u128, 1u128, 1u128);
    let mut prev = None;
    for &s in &msg {
        let d = aixi_step(prev);
        enc.encode(&d, s).unwrap();
        low = low * TOTAL as u128 + width * d.cum(s) as u128;
        width *= d.freq(s) as u128;
        den *= TOTAL as u128;
        prev = Some(s);
    }
    let bytes = enc.finish();
    // The stream read as a binary fraction v = num / 256^len.
    let num = bytes.iter().fold(0u128, |acc, &b| acc * 256 + b as u128);
    let scale = 1u128 << (8 * bytes.len());
    assert!(low * scale <= num * den, "below the interval");
    assert!(num * den < (low + width) * scale, "above the interval");

    let mut dec = Decoder::new(&bytes).unwrap();
    let mut prev = None;
    let mut out = Vec::new();
    for _ in 0..msg.len() {
        let s = dec.decode(&aixi_step(prev)).unwrap();
        out.push(s);
        prev = Some(s);
    }
    let letters: String = out.iter().map(|&s| ['X', 'I', 'A'][s]).collect();
    assert_eq!(letters, "AIXI");
}

#[test]
fn adaptive_model_roundtrips_random_4k_strings() {
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u32> = (0..4096).map(|_| rng.gen::<u8>() as u32).collect();
        let model = || ContextModel::new(ContextModelConfig::new(2, 256).with_capacity(1 << 12)).unwrap();
        let c = ac_encode(model(), &data).unwrap();
        assert_eq!(ac_decode(model(), &c, data.len()).unwrap(), data, "seed {seed}");
    }
}

#[test]
fn encoders_are_deterministic() {
    let data: Vec<u32> = b"determinism is required for decoding".iter().map(|&b| b as u32).collect();
    let model = || ContextModel::new(ContextModelConfig::new(3, 256).with_capacity(1 << 10)).unwrap();
    assert_eq!(ac_encode(model(), &data).unwrap(), ac_encode(model(), &data).unwrap());
}

#[test]
fn predictor_symmetry_dual_run() {
    // Distributions seen while encoding equal those seen while decoding.
    let data: Vec<u32> = b"abracadabra abracadabra".iter().map(|&b| b as u32).collect();
    let mut a = ContextModel::new(ContextModelConfig::new(2, 256).with_capacity(1 << 10)).unwrap();
    let mut enc_dists = Vec::new();
    for i in 0..data.len() {
        enc_dists.push(a.next_distribution(&data[..i]).unwrap());
        a.update(&data[..i], data[i]).unwrap();
    }
    let c = ac_encode(ContextModel::new(*a.config()).unwrap(), &data).unwrap();
    let mut b = ContextModel::new(*a.config()).unwrap();
    let mut dec = Decoder::new(&c).unwrap();
    let mut out: Vec<u32> = Vec::new();
    for d in &enc_dists {
        let got = b.next_distribution(&out).unwrap();
        assert_eq!(&got, d);
        let s = dec.decode(&got).unwrap() as u32;
        b.update(&out, s).unwrap();
        out.push(s);
    }
    assert_eq!(out, data);
    assert!(ideal_bits(ContextModel::new(*a.config()).unwrap(), &data).unwrap() > 0.0);
}
