//! Classical reference codes and the Hamming + DCC concatenation.
//!
//! Bits are `u8` values 0/1. Binary codewords go over the air as BPSK
//! (0 → +1, 1 → −1).

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::codec_block::{encode_block, CodecError, Codeword};
use crate::codec_trellis::viterbi_search;
use crate::detect::{Detector, MlDetector, ReducerDetector};
use crate::diffraction::GeneratorMatrix;
use crate::modem::{bits_to_datawords, datawords_to_bits, modulate, Dataword, ModulationScheme};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("expected {expected} values, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("bit value {0} is not 0 or 1")]
    NotABit(u8),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

fn check_bits(bits: &[u8]) -> Result<(), BaselineError> {
    match bits.iter().find(|&&b| b > 1) {
        Some(&b) => Err(BaselineError::NotABit(b)),
        None => Ok(()),
    }
}

fn check_len(len: usize, expected: usize) -> Result<(), BaselineError> {
    if len == expected {
        Ok(())
    } else {
        Err(BaselineError::Length { expected, actual: len })
    }
}

pub fn bpsk_bits(bits: &[u8]) -> Vec<Complex64> {
    bits.iter().map(|&b| Complex64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0)).collect()
}

pub fn hard_bits(y: &[Complex64]) -> Vec<u8> {
    y.iter().map(|v| u8::from(v.re < 0.0)).collect()
}

/// Systematic Hamming(7,4): `c = (d1, d2, d3, d4, p1, p2, p3)` with
/// `p1 = d1⊕d2⊕d4`, `p2 = d1⊕d3⊕d4`, `p3 = d2⊕d3⊕d4`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hamming74Code {
    pub generator: [[u8; 7]; 4],
    pub parity_check: [[u8; 7]; 3],
    /// Error position for each syndrome value, `None` for syndrome 0.
    syndrome_table: [Option<usize>; 8],
}

impl Default for Hamming74Code {
    fn default() -> Self {
        Self::new()
    }
}

impl Hamming74Code {
    pub fn new() -> Self {
        let parity = [[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]];
        let mut generator = [[0u8; 7]; 4];
        let mut parity_check = [[0u8; 7]; 3];
        for i in 0..4 {
            generator[i][i] = 1;
            for j in 0..3 {
                generator[i][4 + j] = parity[i][j];
                parity_check[j][i] = parity[i][j];
            }
        }
        for j in 0..3 {
            parity_check[j][4 + j] = 1;
        }
        let mut syndrome_table = [None; 8];
        for pos in 0..7 {
            let s = (0..3).fold(0usize, |acc, j| (acc << 1) | parity_check[j][pos] as usize);
            syndrome_table[s] = Some(pos);
        }
        Self {
            generator,
            parity_check,
            syndrome_table,
        }
    }

    pub fn encode(&self, d: &[u8]) -> Result<[u8; 7], BaselineError> {
        check_len(d.len(), 4)?;
        check_bits(d)?;
        let mut c = [0u8; 7];
        for (i, &bit) in d.iter().enumerate() {
            if bit == 1 {
                for (cj, gj) in c.iter_mut().zip(&self.generator[i]) {
                    *cj ^= gj;
                }
            }
        }
        Ok(c)
    }

    /// `H·rᵀ` packed with the first check in the most significant bit.
    pub fn syndrome(&self, r: &[u8]) -> u8 {
        self.parity_check
            .iter()
            .fold(0u8, |acc, h| (acc << 1) | h.iter().zip(r).fold(0, |p, (a, b)| p ^ (a & b)))
    }

    /// Syndrome decoding; corrects any single bit error.
    pub fn decode_hard(&self, r: &[u8]) -> Result<[u8; 4], BaselineError> {
        check_len(r.len(), 7)?;
        check_bits(r)?;
        let mut c = [0u8; 7];
        c.copy_from_slice(r);
        if let Some(pos) = self.syndrome_table[self.syndrome(r) as usize] {
            c[pos] ^= 1;
        }
        Ok([c[0], c[1], c[2], c[3]])
    }

    /// Minimum-Euclidean-distance decoding over the 16 BPSK codewords;
    /// ties go to the lower dataword index.
    pub fn decode_soft(&self, y: &[Complex64]) -> Result<[u8; 4], BaselineError> {
        check_len(y.len(), 7)?;
        let mut best = (f64::INFINITY, [0u8; 4]);
        for idx in 0..16u8 {
            let d = [(idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1];
            let c = self.encode(&d)?;
            let dist: f64 = y.iter().zip(bpsk_bits(&c)).map(|(a, b)| (a - b).norm_sqr()).sum();
            if dist < best.0 {
                best = (dist, d);
            }
        }
        Ok(best.1)
    }

    /// All 16 codewords, datawords in ascending binary order.
    pub fn codewords(&self) -> Vec<([u8; 4], [u8; 7])> {
        (0..16u8)
            .map(|idx| {
                let d = [(idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1];
                (d, self.encode(&d).expect("valid dataword"))
            })
            .collect()
    }
}

/// Whether the decoder works on sliced bits or on channel observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionMode {
    Hard,
    Soft,
}

impl DecisionMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Hard => "hard",
            Self::Soft => "soft",
        }
    }
}

/// Rate-1/2 feedforward code with generators (13, 17) in octal:
/// `g1 = 1 + D² + D³`, `g2 = 1 + D + D² + D³`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Conv213Code;

impl Conv213Code {
    pub const MEMORY: usize = 3;
    /// Tap masks over `(u_t, u_{t−1}, u_{t−2}, u_{t−3})`, `u_t` in the top bit.
    pub const G1: u8 = 0o13;
    pub const G2: u8 = 0o17;
    const STATES: usize = 8;

    fn outputs(state: usize, input: usize) -> (u8, u8) {
        let reg = ((input << 3) | state) as u8;
        ((reg & Self::G1).count_ones() as u8 & 1, (reg & Self::G2).count_ones() as u8 & 1)
    }

    fn next_state(state: usize, input: usize) -> usize {
        (input << 2) | (state >> 1)
    }

    /// Encode `bits` followed by three zero flush bits.
    pub fn encode(&self, bits: &[u8]) -> Result<Vec<u8>, BaselineError> {
        check_bits(bits)?;
        let mut state = 0usize;
        let mut out = Vec::with_capacity(2 * (bits.len() + Self::MEMORY));
        for &u in bits.iter().chain(&[0, 0, 0]) {
            let (a, b) = Self::outputs(state, u as usize);
            out.extend([a, b]);
            state = Self::next_state(state, u as usize);
        }
        Ok(out)
    }

    /// ML decoding of a zero-terminated stream of `2·(len + 3)` coded
    /// symbols. Hard mode slices `y` and uses Hamming distance; soft mode
    /// uses squared Euclidean distance to the BPSK images. Ties resolve
    /// toward the zero branch.
    pub fn decode(&self, y: &[Complex64], mode: DecisionMode) -> Result<Vec<u8>, BaselineError> {
        match mode {
            DecisionMode::Hard => self.decode_hard(&hard_bits(y)),
            DecisionMode::Soft => {
                let steps = self.steps(y.len())?;
                let metric = |t: usize, s: usize, u: usize| {
                    let (a, b) = Self::outputs(s, u);
                    let ea = if a == 0 { 1.0 } else { -1.0 };
                    let eb = if b == 0 { 1.0 } else { -1.0 };
                    (y[2 * t] - ea).norm_sqr() + (y[2 * t + 1] - eb).norm_sqr()
                };
                Ok(self.search(steps, metric))
            }
        }
    }

    pub fn decode_hard(&self, r: &[u8]) -> Result<Vec<u8>, BaselineError> {
        check_bits(r)?;
        let steps = self.steps(r.len())?;
        let metric = |t: usize, s: usize, u: usize| {
            let (a, b) = Self::outputs(s, u);
            f64::from((a ^ r[2 * t]) + (b ^ r[2 * t + 1]))
        };
        Ok(self.search(steps, metric))
    }

    fn steps(&self, len: usize) -> Result<usize, BaselineError> {
        if len % 2 != 0 || len < 2 * Self::MEMORY {
            return Err(BaselineError::Length {
                expected: 2 * Self::MEMORY.max(len.div_ceil(2)),
                actual: len,
            });
        }
        Ok(len / 2)
    }

    fn search(&self, steps: usize, metric: impl Fn(usize, usize, usize) -> f64) -> Vec<u8> {
        let data = steps - Self::MEMORY;
        let (path, _) = viterbi_search(
            Self::STATES,
            steps,
            |t| if t < data { 0..2 } else { 0..1 },
            Self::next_state,
            metric,
        )
        .expect("flush bits return to state 0");
        path[..data].iter().map(|&u| u as u8).collect()
    }

    /// Smallest output weight of a path that leaves state 0 and first
    /// returns to it within `max_depth` steps.
    pub fn free_distance(&self, max_depth: usize) -> Option<u32> {
        // Paths are enumerated exhaustively: the first step is forced to 1,
        // later steps branch freely until the register empties.
        fn walk(state: usize, depth: usize, weight: u32, left: usize, best: &mut Option<u32>) {
            if state == 0 && depth > 0 {
                *best = Some(best.map_or(weight, |b| b.min(weight)));
                return;
            }
            if left == 0 {
                return;
            }
            for u in 0..2 {
                if depth == 0 && u == 0 {
                    continue;
                }
                let (a, b) = Conv213Code::outputs(state, u);
                walk(Conv213Code::next_state(state, u), depth + 1, weight + (a + b) as u32, left - 1, best);
            }
        }
        let mut best = None;
        walk(0, 0, 0, max_depth, &mut best);
        best
    }
}

fn bit_string(bits: &[u8]) -> String {
    bits.iter().map(|b| char::from(b'0' + b)).collect()
}

/// Conformance vectors `input_bits output_bits`, one per dataword.
pub fn write_hamming_vectors<W: Write>(code: &Hamming74Code, mut out: W) -> std::io::Result<()> {
    for (d, c) in code.codewords() {
        writeln!(out, "{} {}", bit_string(&d), bit_string(&c))?;
    }
    Ok(())
}

pub fn write_conv_vectors<W: Write>(code: &Conv213Code, messages: &[Vec<u8>], mut out: W) -> std::io::Result<()> {
    for m in messages {
        let c = code.encode(m).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
        writeln!(out, "{} {}", bit_string(m), bit_string(&c))?;
    }
    Ok(())
}

/// How the concatenated receiver decodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConcatDecoder {
    /// DCC ML detection, demodulation, Hamming syndrome decoding.
    MlHard,
    /// Max-log bit metrics from the DCC ML distances, Hamming
    /// minimum-distance decoding on those metrics.
    MlSoft,
    /// Reducer front end, BPSK-like soft values per coded bit, Hamming
    /// minimum-distance decoding.
    ReducerSoft,
}

impl ConcatDecoder {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MlHard => "ml_hard",
            Self::MlSoft => "ml_soft",
            Self::ReducerSoft => "reducer_soft",
        }
    }

    pub const ALL: [ConcatDecoder; 3] = [Self::MlHard, Self::MlSoft, Self::ReducerSoft];
}

impl std::str::FromStr for ConcatDecoder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown concatenated decoder {s:?}"))
    }
}

/// DCC blocks carrying a Hamming-coded message.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatFrames {
    pub datawords: Vec<Dataword>,
    pub blocks: Vec<Codeword>,
    pub message_bits: usize,
    /// Zero bits appended to the coded stream to fill the last block.
    pub coded_pad: usize,
}

/// Hamming(7,4) outer code, DCC inner code. Hamming codewords are laid out
/// back to back across DCC blocks without interleaving.
#[derive(Debug, Clone)]
pub struct ConcatCode {
    hamming: Hamming74Code,
    g: GeneratorMatrix,
    scheme: ModulationScheme,
}

impl ConcatCode {
    pub fn new(g: GeneratorMatrix, scheme: ModulationScheme) -> Self {
        Self {
            hamming: Hamming74Code::new(),
            g,
            scheme,
        }
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.g
    }

    pub fn scheme(&self) -> ModulationScheme {
        self.scheme
    }

    pub fn rate(&self) -> f64 {
        4.0 / 7.0 * self.g.code_rate()
    }

    fn block_bits(&self) -> usize {
        self.g.cols() * self.scheme.bits_per_symbol()
    }

    /// Hamming codewords per pad-free frame: `lcm(7, K·L·b) / 7`.
    pub fn codewords_per_frame(&self) -> usize {
        let b = self.block_bits();
        let gcd = num_gcd(7, b);
        b / gcd
    }

    pub fn blocks_per_frame(&self) -> usize {
        7 * self.codewords_per_frame() / self.block_bits()
    }

    pub fn encode(&self, bits: &[u8]) -> Result<ConcatFrames, BaselineError> {
        check_bits(bits)?;
        let mut coded = Vec::with_capacity(bits.len().div_ceil(4) * 7);
        for chunk in bits.chunks(4) {
            let mut d = [0u8; 4];
            d[..chunk.len()].copy_from_slice(chunk);
            coded.extend(self.hamming.encode(&d)?);
        }
        let packed = bits_to_datawords(&coded, self.scheme, self.g.cols());
        let blocks = packed
            .blocks
            .iter()
            .map(|d| Ok(encode_block(&self.g, &modulate(d, self.scheme).map_err(CodecError::from)?)?))
            .collect::<Result<Vec<_>, BaselineError>>()?;
        Ok(ConcatFrames {
            datawords: packed.blocks,
            blocks,
            message_bits: bits.len(),
            coded_pad: packed.pad_bits,
        })
    }

    pub fn decode_ml(
        &self,
        detector: &MlDetector,
        y: &[Vec<Complex64>],
        message_bits: usize,
        coded_pad: usize,
    ) -> Result<Vec<u8>, BaselineError> {
        let words: Vec<Dataword> = y.iter().map(|v| detector.detect(v)).collect();
        let coded = datawords_to_bits(&words, self.scheme, coded_pad);
        let mut out = Vec::with_capacity(coded.len() / 7 * 4);
        for c in coded.chunks(7) {
            check_len(c.len(), 7)?;
            out.extend(self.hamming.decode_hard(c)?);
        }
        out.truncate(message_bits);
        Ok(out)
    }

    /// For coded bit `j` of a block the metric is
    /// `min_{c: bit_j = 1} ‖y − c‖² − min_{c: bit_j = 0} ‖y − c‖²`, positive
    /// when 0 is more likely; it scales with the noise level but the
    /// Hamming decision does not.
    pub fn decode_ml_soft(
        &self,
        detector: &MlDetector,
        y: &[Vec<Complex64>],
        message_bits: usize,
        coded_pad: usize,
    ) -> Result<Vec<u8>, BaselineError> {
        let labels: Vec<Vec<u8>> = detector.datawords().iter().map(|d| d.to_bits(self.scheme)).collect();
        let width = self.block_bits();
        let mut soft = Vec::with_capacity(y.len() * width);
        for v in y {
            let dist = detector.distances(v);
            let mut best = vec![[f64::INFINITY; 2]; width];
            for (d, bits) in dist.iter().zip(&labels) {
                for (slot, &b) in best.iter_mut().zip(bits) {
                    slot[b as usize] = slot[b as usize].min(*d);
                }
            }
            soft.extend(best.iter().map(|[zero, one]| Complex64::new(one - zero, 0.0)));
        }
        self.hamming_soft(soft, message_bits, coded_pad)
    }

    fn hamming_soft(&self, mut soft: Vec<Complex64>, message_bits: usize, coded_pad: usize) -> Result<Vec<u8>, BaselineError> {
        soft.truncate(soft.len() - coded_pad);
        let mut out = Vec::with_capacity(soft.len() / 7 * 4);
        for c in soft.chunks(7) {
            check_len(c.len(), 7)?;
            out.extend(self.hamming.decode_soft(c)?);
        }
        out.truncate(message_bits);
        Ok(out)
    }

    pub fn decode_reducer_soft(
        &self,
        reducer: &ReducerDetector,
        y: &[Vec<Complex64>],
        message_bits: usize,
        coded_pad: usize,
    ) -> Result<Vec<u8>, BaselineError> {
        let mut soft = Vec::with_capacity(y.len() * self.block_bits());
        for v in y {
            for s in reducer.estimate(v) {
                soft.extend(soft_bits(s, self.scheme));
            }
        }
        self.hamming_soft(soft, message_bits, coded_pad)
    }
}

fn num_gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Per-bit observations on the BPSK scale (positive favors 0). QAM16 has
/// no single-axis image per bit, so its bits are sliced to ±1.
fn soft_bits(s: Complex64, scheme: ModulationScheme) -> Vec<Complex64> {
    match scheme {
        ModulationScheme::Bpsk => vec![Complex64::new(s.re, 0.0)],
        ModulationScheme::Qpsk => {
            let k = std::f64::consts::SQRT_2;
            vec![Complex64::new(k * s.re, 0.0), Complex64::new(k * s.im, 0.0)]
        }
        ModulationScheme::Qam16 => {
            let symbol = crate::modem::slice_one(s, scheme);
            bpsk_bits(&Dataword(vec![symbol]).to_bits(scheme))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{preset_74, CarrierSpec, Preset74};
    use crate::diffraction::{build_generator, Normalization};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weight(bits: &[u8]) -> u32 {
        bits.iter().map(|&b| b as u32).sum()
    }

    #[test]
    fn hamming_vectors() {
        let h = Hamming74Code::new();
        assert_eq!(h.encode(&[0, 0, 0, 0]).unwrap(), [0; 7]);
        assert_eq!(h.encode(&[1, 1, 1, 1]).unwrap(), [1; 7]);
        // Oracle: parity equations written out directly.
        for (d, c) in h.codewords() {
            assert_eq!(&c[..4], &d);
            assert_eq!(c[4], d[0] ^ d[1] ^ d[3]);
            assert_eq!(c[5], d[0] ^ d[2] ^ d[3]);
            assert_eq!(c[6], d[1] ^ d[2] ^ d[3]);
            assert_eq!(h.syndrome(&c), 0);
        }
    }

    #[test]
    fn generator_orthogonal_to_parity_check() {
        let h = Hamming74Code::new();
        for g in &h.generator {
            for p in &h.parity_check {
                assert_eq!(g.iter().zip(p).fold(0, |a, (x, y)| a ^ (x & y)), 0);
            }
        }
    }

    #[test]
    fn hamming_minimum_distance_is_three() {
        let cw = Hamming74Code::new().codewords();
        let mut d_min = u32::MAX;
        for i in 0..16 {
            for j in i + 1..16 {
                let d = cw[i].1.iter().zip(&cw[j].1).filter(|(a, b)| a != b).count() as u32;
                d_min = d_min.min(d);
            }
        }
        assert_eq!(d_min, 3);
    }

    #[test]
    fn hamming_corrects_every_single_error() {
        let h = Hamming74Code::new();
        for (d, c) in h.codewords() {
            for pos in 0..7 {
                let mut r = c;
                r[pos] ^= 1;
                assert_eq!(h.decode_hard(&r).unwrap(), d);
            }
        }
    }

    #[test]
    fn two_errors_can_miscorrect() {
        let h = Hamming74Code::new();
        let mut miscorrected = false;
        for (d, c) in h.codewords() {
            for a in 0..7 {
                for b in a + 1..7 {
                    let mut r = c;
                    r[a] ^= 1;
                    r[b] ^= 1;
                    let out = h.decode_hard(&r).unwrap();
                    assert!(h.codewords().iter().any(|(dd, _)| *dd == out));
                    miscorrected |= out != d;
                }
            }
        }
        assert!(miscorrected);
    }

    #[test]
    fn hamming_soft_noiseless() {
        let h = Hamming74Code::new();
        for (d, c) in h.codewords() {
            assert_eq!(h.decode_soft(&bpsk_bits(&c)).unwrap(), d);
        }
        assert!(matches!(h.decode_soft(&[Complex64::new(1.0, 0.0); 6]), Err(BaselineError::Length { .. })));
    }

    #[test]
    fn conv_impulse_response() {
        let c = Conv213Code;
        assert_eq!(c.encode(&[0; 5]).unwrap(), vec![0; 16]);
        let out = c.encode(&[1]).unwrap();
        assert_eq!(out, vec![1, 1, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn conv_free_distance() {
        assert_eq!(Conv213Code.free_distance(12), Some(6));
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = Hamming74Code::new();
        for _ in 0..100 {
            let a: Vec<u8> = (0..4).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<u8> = (0..4).map(|_| rng.random_range(0..2)).collect();
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let (ea, eb, eab) = (h.encode(&a).unwrap(), h.encode(&b).unwrap(), h.encode(&ab).unwrap());
            assert!(ea.iter().zip(&eb).map(|(x, y)| x ^ y).eq(eab.iter().copied()));

            let a: Vec<u8> = (0..15).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<u8> = (0..15).map(|_| rng.random_range(0..2)).collect();
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let (ea, eb, eab) = (Conv213Code.encode(&a).unwrap(), Conv213Code.encode(&b).unwrap(), Conv213Code.encode(&ab).unwrap());
            assert!(ea.iter().zip(&eb).map(|(x, y)| x ^ y).eq(eab.iter().copied()));
        }
    }

    #[test]
    fn conv_corrects_separated_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let msg: Vec<u8> = (0..20).map(|_| rng.random_range(0..2)).collect();
        let coded = Conv213Code.encode(&msg).unwrap();
        for (a, b) in [(3, 30), (0, 45), (10, 22)] {
            let mut r = coded.clone();
            r[a] ^= 1;
            r[b] ^= 1;
            assert_eq!(Conv213Code.decode_hard(&r).unwrap(), msg);
        }
    }

    #[test]
    fn conv_viterbi_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for len in 1..=8 {
            for _ in 0..10 {
                let r: Vec<u8> = (0..2 * (len + 3)).map(|_| rng.random_range(0..2)).collect();
                let mut best: Option<(u32, Vec<u8>)> = None;
                for idx in 0..(1usize << len) {
                    let m: Vec<u8> = (0..len).map(|i| ((idx >> (len - 1 - i)) & 1) as u8).collect();
                    let c = Conv213Code.encode(&m).unwrap();
                    let d = weight(&c.iter().zip(&r).map(|(a, b)| a ^ b).collect::<Vec<_>>());
                    if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        best = Some((d, m));
                    }
                }
                assert_eq!(Conv213Code.decode_hard(&r).unwrap(), best.unwrap().1);
            }
        }
    }

    #[test]
    fn soft_decoding_noiseless() {
        let msg = vec![1, 0, 1, 1, 0, 0, 1];
        let y = bpsk_bits(&Conv213Code.encode(&msg).unwrap());
        assert_eq!(Conv213Code.decode(&y, DecisionMode::Soft).unwrap(), msg);
        assert_eq!(Conv213Code.decode(&y, DecisionMode::Hard).unwrap(), msg);
    }

    #[test]
    fn conformance_files() {
        let mut buf = Vec::new();
        write_hamming_vectors(&Hamming74Code::new(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 16);
        assert!(text.contains("1111 1111111\n"));
        let mut buf = Vec::new();
        write_conv_vectors(&Conv213Code, &[vec![1]], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1 11011111\n");
    }

    fn concat_74(scheme: ModulationScheme) -> ConcatCode {
        let c = CarrierSpec::new(25e9).unwrap();
        let l = c.wavelength_m();
        let stack = preset_74(c, &Preset74::EvenlySpaced { pitch: 0.4 * l, dz: 10.0 * l }).unwrap();
        ConcatCode::new(build_generator(&stack, Normalization::UnitFrobenius, 0.0).unwrap(), scheme)
    }

    #[test]
    fn concat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bits: Vec<u8> = (0..1000).map(|_| rng.random_range(0..2)).collect();
        for scheme in [ModulationScheme::Bpsk, ModulationScheme::Qpsk] {
            let code = concat_74(scheme);
            let frames = code.encode(&bits).unwrap();
            let y: Vec<Vec<Complex64>> = frames.blocks.iter().map(|c| c.0.clone()).collect();
            let ml = MlDetector::new(code.generator(), scheme).unwrap();
            let reducer = ReducerDetector::new(code.generator(), scheme).unwrap();
            assert_eq!(code.decode_ml(&ml, &y, frames.message_bits, frames.coded_pad).unwrap(), bits);
            assert_eq!(code.decode_ml_soft(&ml, &y, frames.message_bits, frames.coded_pad).unwrap(), bits);
            assert_eq!(code.decode_reducer_soft(&reducer, &y, frames.message_bits, frames.coded_pad).unwrap(), bits);
        }
    }

    #[test]
    fn concat_rate_and_framing() {
        let code = concat_74(ModulationScheme::Bpsk);
        assert!((code.rate() - 4.0 / 7.0 * 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(code.codewords_per_frame(), 4);
        assert_eq!(code.blocks_per_frame(), 7);
        let qpsk = concat_74(ModulationScheme::Qpsk);
        assert_eq!((qpsk.codewords_per_frame(), qpsk.blocks_per_frame()), (8, 7));
        let frames = code.encode(&[1; 16]).unwrap();
        assert_eq!((frames.blocks.len(), frames.coded_pad), (7, 0));
    }
}
