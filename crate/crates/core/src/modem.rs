//! Gray-labeled BPSK / QPSK / 16-QAM with unit average energy.
//!
//! The symbol value *is* the bit label: symbol `s` carries the bits of `s`
//! written big-endian over `b` bits.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModemError {
    #[error("symbol {symbol} at position {position} exceeds {scheme} alphabet")]
    SymbolOutOfRange {
        symbol: u32,
        position: usize,
        scheme: ModulationScheme,
    },
    #[error("unknown modulation {0:?}")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModulationScheme {
    Bpsk,
    Qpsk,
    Qam16,
}

// Per-axis Gray levels for 16-QAM, indexed by the two axis bits.
const QAM16_LEVELS: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 3] = [Self::Bpsk, Self::Qpsk, Self::Qam16];

    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Self::Bpsk => 1,
            Self::Qpsk => 2,
            Self::Qam16 => 4,
        }
    }

    pub fn order(&self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bpsk => "bpsk",
            Self::Qpsk => "qpsk",
            Self::Qam16 => "qam16",
        }
    }

    /// Constellation point for `symbol`. Caller guarantees the range.
    pub fn point(&self, symbol: u32) -> Complex64 {
        match self {
            Self::Bpsk => Complex64::new(if symbol & 1 == 0 { 1.0 } else { -1.0 }, 0.0),
            Self::Qpsk => {
                let i = if symbol & 0b10 == 0 { 1.0 } else { -1.0 };
                let q = if symbol & 0b01 == 0 { 1.0 } else { -1.0 };
                Complex64::new(i * FRAC_1_SQRT_2, q * FRAC_1_SQRT_2)
            }
            Self::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                let i = QAM16_LEVELS[((symbol >> 2) & 0b11) as usize];
                let q = QAM16_LEVELS[(symbol & 0b11) as usize];
                Complex64::new(i * scale, q * scale)
            }
        }
    }

    pub fn constellation(&self) -> Vec<Complex64> {
        (0..self.order() as u32).map(|s| self.point(s)).collect()
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Self::Bpsk),
            "qpsk" => Ok(Self::Qpsk),
            "qam16" | "16qam" => Ok(Self::Qam16),
            _ => Err(ModemError::UnknownScheme(s.to_string())),
        }
    }
}

/// A block of data symbols, each in `[0, 2^b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Dataword(pub Vec<u32>);

impl Dataword {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u32] {
        &self.0
    }

    /// The `index`-th dataword of length `len` in lexicographic order
    /// (first symbol most significant).
    pub fn from_index(index: usize, len: usize, scheme: ModulationScheme) -> Self {
        let b = scheme.bits_per_symbol();
        let mask = (1usize << b) - 1;
        Self(
            (0..len)
                .map(|pos| ((index >> ((len - 1 - pos) * b)) & mask) as u32)
                .collect(),
        )
    }

    /// Big-endian bits, `b` per symbol.
    pub fn to_bits(&self, scheme: ModulationScheme) -> Vec<u8> {
        let b = scheme.bits_per_symbol();
        self.0
            .iter()
            .flat_map(|&s| (0..b).rev().map(move |k| ((s >> k) & 1) as u8))
            .collect()
    }

    /// Elementwise XOR of the bit labels.
    pub fn xor(&self, other: &Dataword) -> Dataword {
        Dataword(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }

    /// Symbols as hex digits (every alphabet here has at most 16 symbols).
    pub fn label(&self) -> String {
        self.0.iter().map(|s| format!("{s:x}")).collect()
    }
}

/// A modulated, not yet diffracted, signal.
#[derive(Debug, Clone, PartialEq)]
pub struct UncodedSignal(pub Vec<Complex64>);

impl UncodedSignal {
    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn modulate(d: &Dataword, scheme: ModulationScheme) -> Result<UncodedSignal, ModemError> {
    let order = scheme.order() as u32;
    d.0.iter()
        .enumerate()
        .map(|(position, &symbol)| {
            if symbol < order {
                Ok(scheme.point(symbol))
            } else {
                Err(ModemError::SymbolOutOfRange { symbol, position, scheme })
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(UncodedSignal)
}

/// Nearest constellation point per value; ties go to the smaller symbol.
pub fn slice(y: &[Complex64], scheme: ModulationScheme) -> Dataword {
    Dataword(y.iter().map(|&v| slice_one(v, scheme)).collect())
}

pub fn slice_one(v: Complex64, scheme: ModulationScheme) -> u32 {
    let mut best = 0u32;
    let mut best_d = f64::INFINITY;
    for s in 0..scheme.order() as u32 {
        let d = (v - scheme.point(s)).norm_sqr();
        if d < best_d {
            best = s;
            best_d = d;
        }
    }
    best
}

/// A bitstream cut into datawords, with the zero padding added to the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedBits {
    pub blocks: Vec<Dataword>,
    pub pad_bits: usize,
}

/// Group a bitstream into `block_len`-symbol datawords, big-endian `b` bits
/// per symbol. The last block is zero-padded.
pub fn bits_to_datawords(bits: &[u8], scheme: ModulationScheme, block_len: usize) -> PackedBits {
    assert!(block_len > 0, "block length must be positive");
    let b = scheme.bits_per_symbol();
    let per_block = b * block_len;
    let pad_bits = (per_block - bits.len() % per_block) % per_block;
    let mut padded = bits.to_vec();
    padded.resize(bits.len() + pad_bits, 0);
    let blocks = padded
        .chunks(per_block)
        .map(|chunk| {
            Dataword(
                chunk
                    .chunks(b)
                    .map(|sym| sym.iter().fold(0u32, |acc, &bit| (acc << 1) | u32::from(bit & 1)))
                    .collect(),
            )
        })
        .collect();
    PackedBits { blocks, pad_bits }
}

/// Inverse of [`bits_to_datawords`], dropping the recorded padding.
pub fn datawords_to_bits(blocks: &[Dataword], scheme: ModulationScheme, pad_bits: usize) -> Vec<u8> {
    let mut bits: Vec<u8> = blocks.iter().flat_map(|d| d.to_bits(scheme)).collect();
    bits.truncate(bits.len().saturating_sub(pad_bits));
    bits
}

/// CSV `symbol,re,im,bit_label`.
pub fn write_constellation_csv<W: Write>(scheme: ModulationScheme, mut out: W) -> std::io::Result<()> {
    writeln!(out, "symbol,re,im,bit_label")?;
    let b = scheme.bits_per_symbol();
    for s in 0..scheme.order() as u32 {
        let p = scheme.point(s);
        writeln!(out, "{s},{:.16e},{:.16e},{:0width$b}", p.re, p.im, s, width = b)?;
    }
    Ok(())
}
