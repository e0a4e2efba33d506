//! Ready-made [`Link`]s for every scheme the BER engine compares.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::baseline::{bpsk_bits, ConcatCode, ConcatDecoder, Conv213Code, DecisionMode, Hamming74Code};
use crate::channel::{awgn_in_place, FrameOutcome, FrameSimulator, Link};
use crate::codec_block::encode_block;
use crate::codec_trellis::{encode_sequence, viterbi_with_table, BranchTable, TrellisGenerator, TrellisSpec};
use crate::detect::{make_detector, Detector, DetectorConfig, DetectorKind, MlDetector, ReducerDetector};
use crate::diffraction::GeneratorMatrix;
use crate::modem::{modulate, slice, Dataword, ModulationScheme};

fn random_word<R: Rng>(rng: &mut R, len: usize, scheme: ModulationScheme) -> Dataword {
    Dataword((0..len).map(|_| rng.random_range(0..scheme.order() as u32)).collect())
}

fn random_bits<R: Rng>(rng: &mut R, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random_range(0..2u8)).collect()
}

fn symbol_bit_errors(a: &Dataword, b: &Dataword) -> u64 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x ^ y).count_ones() as u64).sum()
}

fn bit_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Unit-energy symbols straight onto the channel.
pub struct UncodedLink {
    pub scheme: ModulationScheme,
    pub symbols_per_frame: usize,
}

impl UncodedLink {
    pub fn new(scheme: ModulationScheme) -> Self {
        Self {
            scheme,
            symbols_per_frame: 64,
        }
    }
}

struct UncodedSim<'a> {
    link: &'a UncodedLink,
    n0: f64,
}

impl FrameSimulator for UncodedSim<'_> {
    fn run_frame(&self, rng: &mut ChaCha8Rng) -> FrameOutcome {
        let d = random_word(rng, self.link.symbols_per_frame, self.link.scheme);
        let mut y = modulate(&d, self.link.scheme).expect("symbols in range").0;
        let e = energy(&y);
        awgn_in_place(&mut y, self.n0, rng);
        FrameOutcome {
            bit_errors: symbol_bit_errors(&d, &slice(&y, self.link.scheme)),
            energy: e,
        }
    }
}

impl Link for UncodedLink {
    fn scheme(&self) -> String {
        "uncoded".into()
    }
    fn detector(&self) -> String {
        "slicer".into()
    }
    fn modulation(&self) -> String {
        self.scheme.name().into()
    }
    fn geometry_digest(&self) -> String {
        "-".into()
    }
    fn info_bits_per_frame(&self) -> usize {
        self.symbols_per_frame * self.scheme.bits_per_symbol()
    }
    fn nominal_frame_energy(&self) -> f64 {
        self.symbols_per_frame as f64
    }
    fn simulator(&self, n0: f64) -> Result<Box<dyn FrameSimulator + '_>, String> {
        Ok(Box::new(UncodedSim { link: self, n0 }))
    }
}

/// Block DCC: one dataword per frame through `G`.
pub struct BlockDccLink {
    pub g: GeneratorMatrix,
    pub scheme: ModulationScheme,
    pub detector: DetectorKind,
    pub label: String,
    pub digest: String,
}

impl BlockDccLink {
    pub fn new(g: GeneratorMatrix, scheme: ModulationScheme, detector: DetectorKind) -> Self {
        let digest = if g.source_stack_digest().is_empty() {
            "-".to_string()
        } else {
            g.source_stack_digest().to_string()
        };
        Self {
            g,
            scheme,
            detector,
            label: "dcc".into(),
            digest,
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }
}

struct BlockSim<'a> {
    link: &'a BlockDccLink,
    detector: Box<dyn Detector>,
    n0: f64,
}

impl FrameSimulator for BlockSim<'_> {
    fn run_frame(&self, rng: &mut ChaCha8Rng) -> FrameOutcome {
        let d = random_word(rng, self.link.g.cols(), self.link.scheme);
        let s = modulate(&d, self.link.scheme).expect("symbols in range");
        let mut y = encode_block(&self.link.g, &s).expect("dimensions fixed at construction").0;
        let e = energy(&y);
        awgn_in_place(&mut y, self.n0, rng);
        FrameOutcome {
            bit_errors: symbol_bit_errors(&d, &self.detector.detect(&y)),
            energy: e,
        }
    }
}

impl Link for BlockDccLink {
    fn scheme(&self) -> String {
        self.label.clone()
    }
    fn detector(&self) -> String {
        self.detector.name().into()
    }
    fn modulation(&self) -> String {
        self.scheme.name().into()
    }
    fn geometry_digest(&self) -> String {
        self.digest.clone()
    }
    fn info_bits_per_frame(&self) -> usize {
        self.g.cols() * self.scheme.bits_per_symbol()
    }
    fn nominal_frame_energy(&self) -> f64 {
        self.g.frobenius_norm_sq()
    }
    fn simulator(&self, n0: f64) -> Result<Box<dyn FrameSimulator + '_>, String> {
        let config = DetectorConfig {
            kind: self.detector,
            noise_variance: n0,
        };
        let detector = make_detector(&self.g, self.scheme, config).map_err(|e| e.to_string())?;
        Ok(Box::new(BlockSim { link: self, detector, n0 }))
    }
}

/// Hamming(7,4) over BPSK.
pub struct HammingLink {
    pub mode: DecisionMode,
    pub codewords_per_frame: usize,
    code: Hamming74Code,
}

impl HammingLink {
    pub fn new(mode: DecisionMode) -> Self {
        Self {
            mode,
            codewords_per_frame: 16,
            code: Hamming74Code::new(),
        }
    }
}

struct HammingSim<'a> {
    link: &'a HammingLink,
    n0: f64,
}

impl FrameSimulator for HammingSim<'_> {
    fn run_frame(&self, rng: &mut ChaCha8Rng) -> FrameOutcome {
        let mut out = FrameOutcome::default();
        for _ in 0..self.link.codewords_per_frame {
            let d = random_bits(rng, 4);
            let mut y = bpsk_bits(&self.link.code.encode(&d).expect("four bits"));
            out.energy += energy(&y);
            awgn_in_place(&mut y, self.n0, rng);
            let got = match self.link.mode {
                DecisionMode::Hard => self.link.code.decode_hard(&crate::baseline::hard_bits(&y)),
                DecisionMode::Soft => self.link.code.decode_soft(&y),
            }
            .expect("seven observations");
            out.bit_errors += bit_errors(&d, &got);
        }
        out
    }
}

impl Link for HammingLink {
    fn scheme(&self) -> String {
        "hamming74".into()
    }
    fn detector(&self) -> String {
        self.mode.name().into()
    }
    fn modulation(&self) -> String {
        "bpsk".into()
    }
    fn geometry_digest(&self) -> String {
        "-".into()
    }
    fn info_bits_per_frame(&self) -> usize {
        4 * self.codewords_per_frame
    }
    fn nominal_frame_energy(&self) -> f64 {
        7.0 * self.codewords_per_frame as f64
    }
    fn simulator(&self, n0: f64) -> Result<Box<dyn FrameSimulator + '_>, String> {
        Ok(Box::new(HammingSim { link: self, n0 }))
    }
}

/// (2,1,3) convolutional code over BPSK, one terminated block per frame.
pub struct ConvLink {
    pub mode: DecisionMode,
    pub message_bits: usize,
}

impl ConvLink {
    pub fn new(mode: DecisionMode) -> Self {
        Self { mode, message_bits: 200 }
    }
}

struct ConvSim<'a> {
    link: &'a ConvLink,
    n0: f64,
}

impl FrameSimulator for ConvSim<'_> {
    fn run_frame(&self, rng: &mut ChaCha8Rng) -> FrameOutcome {
        let m = random_bits(rng, self.link.message_bits);
        let mut y = bpsk_bits(&Conv213Code.encode(&m).expect("bits"));
        let e = energy(&y);
        awgn_in_place(&mut y, self.n0, rng);
        let got = Conv213Code.decode(&y, self.link.mode).expect("terminated block");
        FrameOutcome {
            bit_errors: bit_errors(&m, &got),
            energy: e,
        }
    }
}

impl Link for ConvLink {
    fn scheme(&self) -> String {
        "conv213".into()
    }
    fn detector(&self) -> String {
        self.mode.name().into()
    }
    fn modulation(&self) -> String {
        "bpsk".into()
    }
    fn geometry_digest(&self) -> String {
        "-".into()
    }
    fn info_bits_per_frame(&self) -> usize {
        self.message_bits
    }
    fn nominal_frame_energy(&self) -> f64 {
        2.0 * (self.message_bits + Conv213Code::MEMORY) as f64
    }
    fn simulator(&self, n0: f64) -> Result<Box<dyn FrameSimulator + '_>, String> {
        Ok(Box::new(ConvSim { link: self, n0 }))
    }
}

/// Hamming(7,4) followed by block DCC, one pad-free frame per run.
pub struct ConcatLink {
    pub code: ConcatCode,
    pub decoder: ConcatDecoder,
    pub digest: String,
}

impl ConcatLink {
    pub fn new(g: GeneratorMatrix, scheme: ModulationScheme, decoder: ConcatDecoder) -> Self {
        let digest = if g.source_stack_digest().is_empty() {
            "-".to_string()
        } else {
            g.source_stack_digest().to_string()
        };
        Self {
            code: ConcatCode::new(g, scheme),
            decoder,
            digest,
        }
    }
}

enum ConcatFront {
    Ml(MlDetector),
    Reducer(ReducerDetector),
}

struct ConcatSim<'a> {
    link: &'a ConcatLink,
    front: ConcatFront,
    n0: f64,
}

impl FrameSimulator for ConcatSim<'_> {
    fn run_frame(&self, rng: &mut ChaCha8Rng) -> FrameOutcome {
        let code = &self.link.code;
        let m = random_bits(rng, 4 * code.codewords_per_frame());
        let frames = code.encode(&m).expect("bits");
        let mut e = 0.0;
        let y: Vec<Vec<Complex64>> = frames
            .blocks
            .iter()
            .map(|c| {
                let mut v = c.0.clone();
                e += energy(&v);
                awgn_in_place(&mut v, self.n0, rng);
                v
            })
            .collect();
        let got = match &self.front {
            ConcatFront::Ml(d) if self.link.decoder == ConcatDecoder::MlSoft => {
                code.decode_ml_soft(d, &y, frames.message_bits, frames.coded_pad)
            }
            ConcatFront::Ml(d) => code.decode_ml(d, &y, frames.message_bits, frames.coded_pad),
            ConcatFront::Reducer(d) => code.decode_reducer_soft(d, &y, frames.message_bits, frames.coded_pad),
        }
        .expect("whole Hamming codewords per frame");
        FrameOutcome {
            bit_errors: bit_errors(&m, &got),
            energy: e,
        }
    }
}

impl Link for ConcatLink {
    fn scheme(&self) -> String {
        "hamming74+dcc".into()
    }
    fn detector(&self) -> String {
        self.decoder.name().into()
    }
    fn modulation(&self) -> String {
        self.code.scheme().name().into()
    }
    fn geometry_digest(&self) -> String {
        self.digest.clone()
    }
    fn info_bits_per_frame(&self) -> usize {
        4 * self.code.codewords_per_frame()
    }
    fn nominal_frame_energy(&self) -> f64 {
        self.code.blocks_per_frame() as f64 * self.code.generator().frobenius_norm_sq()
    }
    fn simulator(&self, n0: f64) -> Result<Box<dyn FrameSimulator + '_>, String> {
        let g = self.code.generator();
        let m = self.code.scheme();
        let front = match self.decoder {
            ConcatDecoder::MlHard | ConcatDecoder::MlSoft => ConcatFront::Ml(MlDetector::new(g, m).map_err(|e| e.to_string())?),
            ConcatDecoder::ReducerSoft => ConcatFront::Reducer(ReducerDetector::new(g, m).map_err(|e| e.to_string())?),
        };
        Ok(Box::new(ConcatSim { link: self, front, n0 }))
    }
}

/// Trellis DCC with Viterbi detection; a frame is `data_frames` trellis
/// steps plus `mu` flush steps.
pub struct TrellisLink {
    pub spec: TrellisSpec,
    pub parts: TrellisGenerator,
    pub data_frames: usize,
    pub digest: String,
    table: BranchTable,
}

impl TrellisLink {
    pub fn new(spec: TrellisSpec, parts: TrellisGenerator, data_frames: usize) -> Self {
        let digest = if parts.encoder.source_stack_digest().is_empty() {
            "-".to_string()
        } else {
            parts.encoder.source_stack_digest().to_string()
        };
        let table = BranchTable::new(&spec, &parts);
        Self {
            spec,
            parts,
            data_frames,
            digest,
            table,
        }
    }
}

struct TrellisSim<'a> {
    link: &'a TrellisLink,
    n0: f64,
}

impl FrameSimulator for TrellisSim<'_> {
    fn run_frame(&self, rng: &mut ChaCha8Rng) -> FrameOutcome {
        let spec = &self.link.spec;
        let data: Vec<Dataword> = (0..self.link.data_frames)
            .map(|_| random_word(rng, spec.k, spec.scheme))
            .collect();
        let mut e = 0.0;
        let y: Vec<Vec<Complex64>> = encode_sequence(spec, &self.link.parts, &data)
            .expect("dimensions fixed at construction")
            .into_iter()
            .map(|c| {
                let mut v = c.0;
                e += energy(&v);
                awgn_in_place(&mut v, self.n0, rng);
                v
            })
            .collect();
        let got = viterbi_with_table(spec, &self.link.table, &y);
        FrameOutcome {
            bit_errors: data.iter().zip(&got).map(|(a, b)| symbol_bit_errors(a, b)).sum(),
            energy: e,
        }
    }
}

impl Link for TrellisLink {
    fn scheme(&self) -> String {
        format!("trellis_{}", self.spec.variant)
    }
    fn detector(&self) -> String {
        "viterbi".into()
    }
    fn modulation(&self) -> String {
        self.spec.scheme.name().into()
    }
    fn geometry_digest(&self) -> String {
        self.digest.clone()
    }
    fn info_bits_per_frame(&self) -> usize {
        self.data_frames * self.spec.bits_per_frame()
    }
    /// Mean branch energy times the number of transmitted steps.
    fn nominal_frame_energy(&self) -> f64 {
        (self.data_frames + self.spec.mu) as f64 * self.table.mean_energy()
    }
    fn simulator(&self, n0: f64) -> Result<Box<dyn FrameSimulator + '_>, String> {
        if self.spec.log2_states() > 16 {
            return Err(format!("2^{} trellis states", self.spec.log2_states()));
        }
        Ok(Box::new(TrellisSim { link: self, n0 }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{run_ber, BerConfig};
    use crate::codec_trellis::build_trellis_generator;
    use crate::diffraction::{build_generator, Normalization};
    use crate::geometry::{preset_74, preset_trellis_213, CarrierSpec, Preset74};

    fn g74() -> GeneratorMatrix {
        let c = CarrierSpec::new(25e9).unwrap();
        let l = c.wavelength_m();
        let stack = preset_74(c, &Preset74::EvenlySpaced { pitch: 0.4 * l, dz: 10.0 * l }).unwrap();
        build_generator(&stack, Normalization::UnitFrobenius, 0.0).unwrap()
    }

    fn noiseless(link: &dyn Link) -> u64 {
        let mut cfg = BerConfig::new(vec![f64::INFINITY], 1);
        cfg.max_bits = 5_000;
        run_ber(link, &cfg).unwrap().points[0].bit_errors
    }

    #[test]
    fn noiseless_links_are_error_free() {
        for m in ModulationScheme::ALL {
            assert_eq!(noiseless(&UncodedLink::new(m)), 0);
            assert_eq!(noiseless(&BlockDccLink::new(g74(), m, DetectorKind::Ml)), 0);
            assert_eq!(noiseless(&BlockDccLink::new(g74(), m, DetectorKind::Reducer)), 0);
        }
        for mode in [DecisionMode::Hard, DecisionMode::Soft] {
            assert_eq!(noiseless(&HammingLink::new(mode)), 0);
            assert_eq!(noiseless(&ConvLink::new(mode)), 0);
        }
        for d in ConcatDecoder::ALL {
            assert_eq!(noiseless(&ConcatLink::new(g74(), ModulationScheme::Bpsk, d)), 0);
        }
        let c = CarrierSpec::new(25e9).unwrap();
        let l = c.wavelength_m();
        let stack = preset_trellis_213(c, 0.4 * l, 10.0 * l).unwrap();
        let spec = TrellisSpec::conv_213(ModulationScheme::Bpsk);
        let parts = build_trellis_generator(&stack, &spec).unwrap();
        assert_eq!(noiseless(&TrellisLink::new(spec, parts, 50)), 0);
    }

    #[test]
    fn mmse_rejects_noiseless_channel() {
        let link = BlockDccLink::new(g74(), ModulationScheme::Bpsk, DetectorKind::Mmse);
        let cfg = BerConfig::new(vec![f64::INFINITY], 1);
        assert!(run_ber(&link, &cfg).is_err());
    }

    #[test]
    fn labels() {
        let link = BlockDccLink::new(g74(), ModulationScheme::Qpsk, DetectorKind::Mmse);
        assert_eq!((link.scheme(), link.detector(), link.modulation()), ("dcc".into(), "mmse".into(), "qpsk".into()));
        assert_eq!(link.geometry_digest().len(), 64);
        assert_eq!(link.info_bits_per_frame(), 8);
        assert!((link.nominal_frame_energy() - 7.0).abs() < 1e-9);
    }
}
