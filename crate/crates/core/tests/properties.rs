//! Property tests over the public API, one block per module.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use ris_dcc::baseline::{Conv213Code, Hamming74Code};
use ris_dcc::codec_block::{distance_spectrum, encode_block, enumerate_codebook};
use ris_dcc::codec_trellis::{encode_sequence, TrellisGenerator, TrellisSpec, TrellisVariant};
use ris_dcc::detect::{Detector, MlDetector, ReducerDetector};
use ris_dcc::diffraction::{build_generator, rs_coefficient, GeneratorMatrix, Normalization};
use ris_dcc::geometry::{
    preset_repetition_42, preset_systematic_42, validate_stack, CarrierSpec, MetaAtomLayer, Point3, RisStack,
};
use ris_dcc::modem::{modulate, Dataword, ModulationScheme, UncodedSignal};
use ris_dcc::optimizer::{optimize, Method, SearchSpace};

fn carrier() -> CarrierSpec {
    CarrierSpec::new(25e9).unwrap()
}

fn lambda() -> f64 {
    carrier().wavelength_m()
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    proptest::collection::vec(complex(), rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn scheme() -> impl Strategy<Value = ModulationScheme> {
    prop_oneof![
        Just(ModulationScheme::Bpsk),
        Just(ModulationScheme::Qpsk),
        Just(ModulationScheme::Qam16)
    ]
}

/// Random in-plane layer on a grid of pitch `pitch`, jittered by up to 5%.
fn jittered_row(n: usize, pitch: f64, z: f64, jitter: &[f64]) -> MetaAtomLayer {
    let xy: Vec<(f64, f64)> = (0..n)
        .map(|i| ((i as f64 - (n as f64 - 1.0) / 2.0) * pitch + 0.05 * pitch * jitter[i], 0.0))
        .collect();
    MetaAtomLayer::row(&xy, z).unwrap()
}

fn sorted_entries(g: &GeneratorMatrix) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = g.entries().iter().map(|w| (w.re, w.im)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn repetition_has_two_distances(a in 0.1f64..0.5, h in 0.05f64..0.25, dz in 10.0f64..30.0) {
        let l = lambda();
        let stack = preset_repetition_42(carrier(), a * l, h * l, dz * l).unwrap();
        let mut d = stack.cross_layer_distances();
        prop_assert_eq!(d.len(), 8);
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut distinct = vec![d[0]];
        for &x in &d[1..] {
            if x - distinct.last().unwrap() > 1e-12 {
                distinct.push(x);
            }
        }
        prop_assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn validation_is_repeatable(pitch in 0.05f64..0.7, dz in 2.0f64..20.0, jitter in proptest::collection::vec(-1.0f64..1.0, 6)) {
        let l = lambda();
        let stack = RisStack::new(carrier(), jittered_row(2, pitch * l, 0.0, &jitter), jittered_row(4, pitch * l, dz * l, &jitter[2..]))
            .unwrap();
        let before = stack.clone();
        let a = validate_stack(&stack);
        let b = validate_stack(&stack);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(before, stack);
    }

    #[test]
    fn generator_is_the_per_atom_sum(d in 0.1f64..0.5, dz in 10.0f64..20.0, s in proptest::collection::vec(complex(), 2)) {
        let l = lambda();
        let stack = preset_systematic_42(carrier(), d * l, dz * l).unwrap();
        let g = build_generator(&stack, Normalization::Raw, 0.0).unwrap();
        let y = encode_block(&g, &UncodedSignal(s.clone())).unwrap();
        for (i, q) in stack.layer2().positions().iter().enumerate() {
            let mut want = Complex64::new(0.0, 0.0);
            for (j, p) in stack.layer1().positions().iter().enumerate() {
                want += rs_coefficient(p, q, l).unwrap() * s[j];
            }
            prop_assert!((y.0[i] - want).norm() <= 1e-12 * want.norm().max(1e-300));
        }
    }

    #[test]
    fn mirror_permutes_entries(d in 0.1f64..0.5, dz in 10.0f64..20.0, shift in -0.3f64..0.3) {
        let l = lambda();
        let stack = preset_systematic_42(carrier(), d * l, dz * l)
            .unwrap()
            .map_positions(|layer, _, p| if layer == 1 { Point3::new(p.x + shift * l, p.y, p.z) } else { p })
            .unwrap();
        let mirrored = stack.map_positions(|_, _, p| Point3::new(-p.x, p.y, p.z)).unwrap();
        let a = sorted_entries(&build_generator(&stack, Normalization::UnitFrobenius, 0.0).unwrap());
        let b = sorted_entries(&build_generator(&mirrored, Normalization::UnitFrobenius, 0.0).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn encoding_is_linear(g in matrix(5, 3), s1 in proptest::collection::vec(complex(), 3), s2 in proptest::collection::vec(complex(), 3)) {
        let g = GeneratorMatrix::from_entries(g, Normalization::Raw).unwrap();
        let sum: Vec<Complex64> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
        let lhs = encode_block(&g, &UncodedSignal(sum)).unwrap();
        let a = encode_block(&g, &UncodedSignal(s1)).unwrap();
        let b = encode_block(&g, &UncodedSignal(s2)).unwrap();
        for i in 0..5 {
            let want = a.0[i] + b.0[i];
            prop_assert!((lhs.0[i] - want).norm() <= 1e-12 * want.norm().max(1.0));
        }
    }

    #[test]
    fn argmin_pair_survives_scaling(g in matrix(4, 2), m in scheme(), c in 0.01f64..100.0) {
        let g = GeneratorMatrix::from_entries(g, Normalization::Raw).unwrap();
        let a = distance_spectrum(&enumerate_codebook(&g, m).unwrap()).unwrap();
        let b = distance_spectrum(&enumerate_codebook(&g.scaled(c), m).unwrap()).unwrap();
        // Near-ties may legitimately reorder under rounding.
        let second = a.pairs.iter().map(|p| p.2).filter(|&d| d > a.d_min * (1.0 + 1e-9)).fold(f64::INFINITY, f64::min);
        prop_assume!(second > a.d_min * (1.0 + 1e-6));
        prop_assert_eq!(a.argmin, b.argmin);
    }

    #[test]
    fn ml_ignores_common_scaling(g in matrix(4, 2), y in proptest::collection::vec(complex(), 4), c in 0.01f64..100.0) {
        let g = GeneratorMatrix::from_entries(g, Normalization::Raw).unwrap();
        let y2: Vec<Complex64> = y.iter().map(|v| v * c).collect();
        let a = MlDetector::new(&g, ModulationScheme::Qpsk).unwrap();
        let b = MlDetector::new(&g.scaled(c), ModulationScheme::Qpsk).unwrap();
        let da = a.distances(&y);
        let mut sorted = da.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        prop_assume!(sorted[1] - sorted[0] > 1e-9 * sorted[1]);
        prop_assert_eq!(a.detect(&y), b.detect(&y2));
    }

    #[test]
    fn reducer_inverts_noiseless_codewords(g in matrix(5, 2), m in scheme()) {
        let g = GeneratorMatrix::from_entries(g, Normalization::UnitFrobenius).unwrap();
        let sv = g.entries().clone().svd(false, false).singular_values;
        prop_assume!(sv.min() > 1e-3 * sv.max());
        let r = ReducerDetector::new(&g, m).unwrap();
        for (d, c) in enumerate_codebook(&g, m).unwrap() {
            prop_assert_eq!(r.detect(&c.0), d);
        }
    }

    #[test]
    fn hamming_is_linear(a in 0u8..16, b in 0u8..16) {
        let code = Hamming74Code::new();
        let bits = |x: u8| -> Vec<u8> { (0..4).map(|i| (x >> (3 - i)) & 1).collect() };
        let ea = code.encode(&bits(a)).unwrap();
        let eb = code.encode(&bits(b)).unwrap();
        let es = code.encode(&bits(a ^ b)).unwrap();
        for i in 0..7 {
            prop_assert_eq!(es[i], ea[i] ^ eb[i]);
        }
    }

    #[test]
    fn conv_is_linear(pair in proptest::collection::vec((0u8..2, 0u8..2), 1..64)) {
        let (a, b): (Vec<u8>, Vec<u8>) = pair.into_iter().unzip();
        let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
        let ea = Conv213Code.encode(&a).unwrap();
        let eb = Conv213Code.encode(&b).unwrap();
        let ex = Conv213Code.encode(&x).unwrap();
        let xor: Vec<u8> = ea.iter().zip(&eb).map(|(p, q)| p ^ q).collect();
        prop_assert_eq!(ex, xor);
    }

    #[test]
    fn memoryless_trellis_is_block(g in matrix(3, 2), m in scheme(), raw in proptest::collection::vec(0u32..16, 2..12)) {
        let g = GeneratorMatrix::from_entries(g, Normalization::UnitFrobenius).unwrap();
        let spec = TrellisSpec::new(TrellisVariant::ExtraAtoms, 2, 3, 0, m).unwrap();
        let parts = TrellisGenerator::new(g.clone(), None);
        let order = m.order() as u32;
        let data: Vec<Dataword> = raw.chunks_exact(2).map(|c| Dataword(c.iter().map(|s| s % order).collect())).collect();
        let coded = encode_sequence(&spec, &parts, &data).unwrap();
        prop_assert_eq!(coded.len(), data.len());
        for (d, c) in data.iter().zip(&coded) {
            let want = encode_block(&g, &modulate(d, m).unwrap()).unwrap();
            prop_assert_eq!(c, &want);
        }
    }

    #[test]
    fn trellis_is_causal(g in matrix(2, 4), bits in proptest::collection::vec(0u32..2, 8..16), flip in 0usize..4) {
        // (2,1,3): outputs at step t depend on frames t-3..=t only.
        let g = GeneratorMatrix::from_entries(g, Normalization::UnitFrobenius).unwrap();
        let spec = TrellisSpec::conv_213(ModulationScheme::Bpsk);
        let parts = TrellisGenerator::new(g, None);
        let data: Vec<Dataword> = bits.iter().map(|&b| Dataword(vec![b])).collect();
        let mut changed = data.clone();
        changed[flip].0[0] ^= 1;
        let a = encode_sequence(&spec, &parts, &data).unwrap();
        let b = encode_sequence(&spec, &parts, &changed).unwrap();
        for t in (flip + spec.mu + 1)..a.len() {
            prop_assert_eq!(&a[t], &b[t]);
        }
        for t in 0..flip {
            prop_assert_eq!(&a[t], &b[t]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn optimizer_trace_climbs(seed in 0u64..1000, budget in 5usize..40) {
        let l = lambda();
        let base = preset_systematic_42(carrier(), 0.4 * l, 12.0 * l).unwrap();
        let space = SearchSpace::atom_offsets(base, &[2], 0.05 * l, Some((10.0 * l, 20.0 * l))).unwrap();
        let r = optimize(&space, ModulationScheme::Bpsk, budget, seed, Method::multistart()).unwrap();
        prop_assert!(validate_stack(&r.best).is_empty());
        prop_assert!(r.trace.windows(2).all(|w| w[0].1 <= w[1].1));
        prop_assert_eq!(r.trace.last().unwrap().1, r.best_d_min);
        prop_assert!(r.evaluations <= budget);
    }
}
