//! Block DCC: `v = G·s`, codebook enumeration and Euclidean distance analysis.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::diffraction::GeneratorMatrix;
use crate::modem::{modulate, Dataword, ModemError, ModulationScheme, UncodedSignal};

/// Largest `(K·L)·b` for which codebooks are enumerated exhaustively.
pub const MAX_EXHAUSTIVE_BITS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("search space of 2^{bits} datawords exceeds the 2^{MAX_EXHAUSTIVE_BITS} limit")]
    SearchSpaceTooLarge { bits: usize },
    #[error("codebook needs at least two entries")]
    CodebookTooSmall,
    #[error("two codewords coincide; the code is not injective")]
    ZeroDistance,
    #[error(transparent)]
    Modem(#[from] ModemError),
}

/// A diffracted code vector of length `M·N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword(pub Vec<Complex64>);

impl Codeword {
    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn distance(&self, other: &Codeword) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &Codeword) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm_sqr()).sum()
    }
}

/// `y = M·x` for a dense complex matrix, written out so the summation order
/// is fixed (column index ascending).
pub(crate) fn mat_vec(m: &nalgebra::DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                acc += m[(i, j)] * xj;
            }
            acc
        })
        .collect()
}

pub fn encode_block(g: &GeneratorMatrix, s: &UncodedSignal) -> Result<Codeword, CodecError> {
    if s.len() != g.cols() {
        return Err(CodecError::DimensionMismatch {
            expected: g.cols(),
            actual: s.len(),
        });
    }
    Ok(Codeword(mat_vec(g.entries(), s.values())))
}

fn check_search_space(g: &GeneratorMatrix, m: ModulationScheme) -> Result<usize, CodecError> {
    let bits = g.cols() * m.bits_per_symbol();
    if bits > MAX_EXHAUSTIVE_BITS {
        return Err(CodecError::SearchSpaceTooLarge { bits });
    }
    Ok(1usize << bits)
}

/// Every `(dataword, codeword)` pair, datawords in lexicographic order.
pub fn enumerate_codebook(g: &GeneratorMatrix, m: ModulationScheme) -> Result<Vec<(Dataword, Codeword)>, CodecError> {
    let size = check_search_space(g, m)?;
    (0..size)
        .map(|index| {
            let d = Dataword::from_index(index, g.cols(), m);
            let v = encode_block(g, &modulate(&d, m)?)?;
            Ok((d, v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSpectrum {
    /// `(a, b, ‖v_a − v_b‖)` over codebook indices `a < b`, row-major.
    pub pairs: Vec<(usize, usize, f64)>,
    pub d_min: f64,
    pub argmin: (usize, usize),
    pub datawords: Vec<Dataword>,
}

impl DistanceSpectrum {
    pub fn max_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).fold(0.0, f64::max)
    }

    pub fn argmin_datawords(&self) -> (&Dataword, &Dataword) {
        (&self.datawords[self.argmin.0], &self.datawords[self.argmin.1])
    }

    /// CSV `dataword_a,dataword_b,distance` followed by a `# d_min=` summary line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "dataword_a,dataword_b,distance")?;
        for &(a, b, d) in &self.pairs {
            writeln!(out, "{},{},{:.16e}", self.datawords[a].label(), self.datawords[b].label(), d)?;
        }
        let (a, b) = self.argmin_datawords();
        writeln!(out, "# d_min={:.16e} pair={},{}", self.d_min, a.label(), b.label())
    }
}

const TIE_RTOL: f64 = 1e-12;

/// All pairwise distances. Ties on the minimum go to the lexicographically
/// smallest index pair.
pub fn distance_spectrum(codebook: &[(Dataword, Codeword)]) -> Result<DistanceSpectrum, CodecError> {
    if codebook.len() < 2 {
        return Err(CodecError::CodebookTooSmall);
    }
    let n = codebook.len();
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| (a + 1..n).map(move |b| (a, b, codebook[a].1.distance(&codebook[b].1))))
        .collect();
    let d_min = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    // Pairs equal to the minimum up to rounding count as tied.
    let tie = d_min + TIE_RTOL * d_min.max(f64::MIN_POSITIVE);
    let argmin = pairs
        .iter()
        .find(|p| p.2 <= tie)
        .map(|p| (p.0, p.1))
        .expect("non-empty pair list");
    Ok(DistanceSpectrum {
        pairs,
        d_min,
        argmin,
        datawords: codebook.iter().map(|(d, _)| d.clone()).collect(),
    })
}

/// Minimum distance only, without materializing the pair list.
pub fn min_distance(codebook: &[Codeword]) -> f64 {
    let n = codebook.len();
    let mut best = f64::INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            best = best.min(codebook[a].distance_sq(&codebook[b]));
        }
    }
    best.sqrt()
}

/// Codewords below this distance (relative to the largest pair distance)
/// count as coincident.
pub const ZERO_DISTANCE_RTOL: f64 = 1e-12;

pub fn decoding_radius(spec: &DistanceSpectrum) -> Result<f64, CodecError> {
    if !(spec.d_min > ZERO_DISTANCE_RTOL * spec.max_distance()) {
        return Err(CodecError::ZeroDistance);
    }
    Ok(spec.d_min / 2.0)
}

/// Monte-Carlo estimate of `d_min` for codes too large to enumerate.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    /// Smallest distance among the sampled pairs; an upper bound on `d_min`.
    pub estimate: f64,
    pub pairs_sampled: usize,
}

/// Samples random dataword pairs, half of them differing in a single symbol
/// (where the minimum usually sits).
pub fn sampled_min_distance(
    g: &GeneratorMatrix,
    m: ModulationScheme,
    pairs: usize,
    seed: u64,
) -> Result<DistanceEstimate, CodecError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = m.order() as u32;
    let k = g.cols();
    let mut best = f64::INFINITY;
    let mut sampled = 0;
    while sampled < pairs {
        let a = Dataword((0..k).map(|_| rng.random_range(0..order)).collect());
        let mut b = a.clone();
        if sampled % 2 == 0 {
            let pos = rng.random_range(0..k);
            b.0[pos] = (b.0[pos] + rng.random_range(1..order)) % order;
        } else {
            b = Dataword((0..k).map(|_| rng.random_range(0..order)).collect());
            if a == b {
                continue;
            }
        }
        let va = encode_block(g, &modulate(&a, m)?)?;
        let vb = encode_block(g, &modulate(&b, m)?)?;
        best = best.min(va.distance(&vb));
        sampled += 1;
    }
    Ok(DistanceEstimate {
        estimate: best,
        pairs_sampled: sampled,
    })
}
