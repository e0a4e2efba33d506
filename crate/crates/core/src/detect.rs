//! Receiver-side detectors for block DCC.
//!
//! * [`MlDetector`]: exhaustive search over the codebook.
//! * [`MmseDetector`]: linear MMSE estimate of the uncoded signal, sliced
//!   per symbol.
//! * [`ReducerDetector`]: the second receiver type, a diffractive network
//!   that reduces `M·N` outputs to `K·L` streams, idealized here as the
//!   exact left pseudo-inverse of `G` followed by slicing.
//!
//! Linear receivers build their weight matrix once with a factorization
//! solve; conditioning beyond [`CONDITION_LIMIT`] is refused.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::codec_block::{enumerate_codebook, mat_vec, CodecError, Codeword};
use crate::diffraction::GeneratorMatrix;
use crate::modem::{slice, Dataword, ModulationScheme};

pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("MMSE needs a positive noise variance, got {0}")]
    InvalidNoiseVariance(f64),
    #[error("regularized system condition number {0:e} exceeds limit")]
    NumericalSingularity(f64),
    #[error("generator is rank deficient (condition number {0:e})")]
    RankDeficient(f64),
    #[error("received vector has length {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown detector {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Ml,
    Mmse,
    Reducer,
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ml => "ml",
            Self::Mmse => "mmse",
            Self::Reducer => "reducer",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ml" => Ok(Self::Ml),
            "mmse" => Ok(Self::Mmse),
            "reducer" => Ok(Self::Reducer),
            _ => Err(DetectError::UnknownKind(s.to_string())),
        }
    }
}

/// Detector kind plus the noise variance per complex dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub noise_variance: f64,
}

pub trait Detector: Send + Sync {
    fn detect(&self, y: &[Complex64]) -> Dataword;
}

/// Build the detector described by `config`.
pub fn make_detector(
    g: &GeneratorMatrix,
    m: ModulationScheme,
    config: DetectorConfig,
) -> Result<Box<dyn Detector>, DetectError> {
    Ok(match config.kind {
        DetectorKind::Ml => Box::new(MlDetector::new(g, m)?),
        DetectorKind::Mmse => Box::new(MmseDetector::new(g, m, config.noise_variance)?),
        DetectorKind::Reducer => Box::new(ReducerDetector::new(g, m)?),
    })
}

/// Exhaustive ML over a cached codebook.
pub struct MlDetector {
    datawords: Vec<Dataword>,
    codewords: Vec<Codeword>,
}

impl MlDetector {
    pub fn new(g: &GeneratorMatrix, m: ModulationScheme) -> Result<Self, DetectError> {
        let (datawords, codewords) = enumerate_codebook(g, m)?.into_iter().unzip();
        Ok(Self { datawords, codewords })
    }

    pub fn hypotheses(&self) -> usize {
        self.codewords.len()
    }

    pub fn datawords(&self) -> &[Dataword] {
        &self.datawords
    }

    /// Squared distance from `y` to every codeword, in codebook order.
    pub fn distances(&self, y: &[Complex64]) -> Vec<f64> {
        self.codewords
            .iter()
            .map(|v| v.0.iter().zip(y).map(|(a, b)| (b - a).norm_sqr()).sum())
            .collect()
    }

    /// Index of the closest codeword; ties go to the lower index.
    pub fn detect_index(&self, y: &[Complex64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, v) in self.codewords.iter().enumerate() {
            let d: f64 = v.0.iter().zip(y).map(|(a, b)| (b - a).norm_sqr()).sum();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

impl Detector for MlDetector {
    fn detect(&self, y: &[Complex64]) -> Dataword {
        self.datawords[self.detect_index(y)].clone()
    }
}

/// A fixed linear front end `z = W·y` followed by per-symbol slicing.
struct LinearFrontEnd {
    weights: DMatrix<Complex64>,
    scheme: ModulationScheme,
}

impl LinearFrontEnd {
    fn estimate(&self, y: &[Complex64]) -> Vec<Complex64> {
        mat_vec(&self.weights, y)
    }

    fn detect(&self, y: &[Complex64]) -> Dataword {
        slice(&self.estimate(y), self.scheme)
    }
}

fn singular_values(g: &GeneratorMatrix) -> Vec<f64> {
    g.entries().clone().svd(false, false).singular_values.iter().copied().collect()
}

pub struct MmseDetector(LinearFrontEnd);

impl MmseDetector {
    /// `W = (GᴴG + N0·I)⁻¹ Gᴴ`, the same estimator as `Gᴴ(GGᴴ + N0·I)⁻¹`
    /// solved in the smaller `K·L` dimension.
    pub fn new(g: &GeneratorMatrix, m: ModulationScheme, noise_variance: f64) -> Result<Self, DetectError> {
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(DetectError::InvalidNoiseVariance(noise_variance));
        }
        let sv = singular_values(g);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = if g.cols() > g.rows() {
            0.0
        } else {
            sv.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let cond = (smax * smax + noise_variance) / (smin * smin + noise_variance);
        if !(cond <= CONDITION_LIMIT) {
            return Err(DetectError::NumericalSingularity(cond));
        }
        let gh = g.entries().adjoint();
        let mut gram = &gh * g.entries();
        for i in 0..gram.nrows() {
            gram[(i, i)] += Complex64::new(noise_variance, 0.0);
        }
        let chol = gram.cholesky().ok_or(DetectError::NumericalSingularity(cond))?;
        Ok(Self(LinearFrontEnd {
            weights: chol.solve(&gh),
            scheme: m,
        }))
    }

    pub fn weights(&self) -> &DMatrix<Complex64> {
        &self.0.weights
    }

    /// Unsliced estimate `W·y` of the uncoded signal.
    pub fn estimate(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.0.estimate(y)
    }
}

impl Detector for MmseDetector {
    fn detect(&self, y: &[Complex64]) -> Dataword {
        self.0.detect(y)
    }
}

pub struct ReducerDetector(LinearFrontEnd);

impl ReducerDetector {
    /// `W = (GᴴG)⁻¹Gᴴ` via the SVD of `G`.
    pub fn new(g: &GeneratorMatrix, m: ModulationScheme) -> Result<Self, DetectError> {
        if g.cols() > g.rows() {
            return Err(DetectError::RankDeficient(f64::INFINITY));
        }
        let svd = g.entries().clone().svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
        let cond = smax / smin;
        if !(cond <= CONDITION_LIMIT) {
            return Err(DetectError::RankDeficient(cond));
        }
        let weights = svd
            .pseudo_inverse(0.0)
            .map_err(|_| DetectError::RankDeficient(cond))?;
        Ok(Self(LinearFrontEnd { weights, scheme: m }))
    }

    pub fn weights(&self) -> &DMatrix<Complex64> {
        &self.0.weights
    }

    /// Unsliced estimate `W·y` of the uncoded signal.
    pub fn estimate(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.0.estimate(y)
    }
}

impl Detector for ReducerDetector {
    fn detect(&self, y: &[Complex64]) -> Dataword {
        self.0.detect(y)
    }
}

fn check_len(g: &GeneratorMatrix, y: &[Complex64]) -> Result<(), DetectError> {
    if y.len() != g.rows() {
        return Err(DetectError::DimensionMismatch {
            expected: g.rows(),
            actual: y.len(),
        });
    }
    Ok(())
}

pub fn detect_ml(g: &GeneratorMatrix, m: ModulationScheme, y: &[Complex64]) -> Result<Dataword, DetectError> {
    check_len(g, y)?;
    Ok(MlDetector::new(g, m)?.detect(y))
}

pub fn detect_mmse(
    g: &GeneratorMatrix,
    m: ModulationScheme,
    y: &[Complex64],
    noise_variance: f64,
) -> Result<Dataword, DetectError> {
    check_len(g, y)?;
    Ok(MmseDetector::new(g, m, noise_variance)?.detect(y))
}

pub fn detect_reducer(g: &GeneratorMatrix, m: ModulationScheme, y: &[Complex64]) -> Result<Dataword, DetectError> {
    check_len(g, y)?;
    Ok(ReducerDetector::new(g, m)?.detect(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec_block::{distance_spectrum, encode_block};
    use crate::diffraction::{build_generator, Normalization};
    use crate::geometry::{preset_repetition_42, preset_systematic_42, CarrierSpec};
    use crate::modem::modulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn systematic() -> GeneratorMatrix {
        let c = CarrierSpec::new(25e9).unwrap();
        let l = c.wavelength_m();
        build_generator(&preset_systematic_42(c, 0.5 * l, 10.0 * l).unwrap(), Normalization::UnitFrobenius, 0.0)
            .unwrap()
    }

    fn random_g(rows: usize, cols: usize, seed: u64) -> GeneratorMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        GeneratorMatrix::from_entries(m, Normalization::UnitFrobenius).unwrap()
    }

    #[test]
    fn ml_recovers_clean_codewords() {
        for m in ModulationScheme::ALL {
            let g = systematic();
            for (d, v) in enumerate_codebook(&g, m).unwrap() {
                assert_eq!(detect_ml(&g, m, &v.0).unwrap(), d);
            }
        }
    }

    #[test]
    fn ml_inside_decoding_sphere() {
        let g = random_g(7, 4, 11);
        let m = ModulationScheme::Bpsk;
        let cb = enumerate_codebook(&g, m).unwrap();
        let radius = distance_spectrum(&cb).unwrap().d_min / 2.0;
        let det = MlDetector::new(&g, m).unwrap();
        assert_eq!(det.hypotheses(), 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (d, v) in &cb {
            for _ in 0..50 {
                let mut e: Vec<Complex64> =
                    (0..7).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                let norm = e.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                let target = rng.random_range(0.0..0.999) * radius;
                e.iter_mut().for_each(|x| *x *= target / norm);
                let y: Vec<Complex64> = v.0.iter().zip(&e).map(|(a, b)| a + b).collect();
                // Triangle inequality: every other codeword is farther than d_min − |e| > |e|.
                for (_, other) in &cb {
                    let dist: f64 = other.0.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                    assert!(dist >= target - 1e-12);
                }
                assert_eq!(&det.detect(&y), d);
            }
        }
    }

    #[test]
    fn ml_scale_invariance() {
        let g = random_g(7, 4, 3);
        let m = ModulationScheme::Qpsk;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let y: Vec<Complex64> = (0..7).map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let ys: Vec<Complex64> = y.iter().map(|v| v * 3.5).collect();
            assert_eq!(detect_ml(&g, m, &y).unwrap(), detect_ml(&g.scaled(3.5), m, &ys).unwrap());
        }
    }

    #[test]
    fn mmse_near_zero_noise_on_unitary() {
        let q = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(1.0, 0.0),
            ],
        )
        .map(|w| w / 2f64.sqrt());
        let g = GeneratorMatrix::from_entries(q, Normalization::Raw).unwrap();
        for m in ModulationScheme::ALL {
            for (d, v) in enumerate_codebook(&g, m).unwrap() {
                assert_eq!(detect_mmse(&g, m, &v.0, 1e-12).unwrap(), d);
            }
        }
        assert_eq!(
            detect_mmse(&g, ModulationScheme::Bpsk, &[Complex64::new(0.0, 0.0); 2], 0.0),
            Err(DetectError::InvalidNoiseVariance(0.0))
        );
    }

    #[test]
    fn mmse_matches_ml_on_identity_stack() {
        let g = GeneratorMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let m = ModulationScheme::Bpsk;
        // Eb/N0 = 8 dB with Eb = 4 / 2 per coded frame.
        let n0 = 2.0 / 10f64.powf(0.8);
        let ml = MlDetector::new(&g, m).unwrap();
        let mmse = MmseDetector::new(&g, m, n0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut agree = 0;
        for _ in 0..1000 {
            let d = Dataword(vec![rng.random_range(0..2), rng.random_range(0..2)]);
            let mut y = encode_block(&g, &modulate(&d, m).unwrap()).unwrap().0;
            crate::channel::awgn_in_place(&mut y, n0, &mut rng);
            agree += usize::from(ml.detect(&y) == mmse.detect(&y));
        }
        assert!(agree >= 990, "{agree}");
    }

    #[test]
    fn reducer_inverts_full_rank_codes() {
        for seed in 0..5 {
            let g = random_g(7, 4, seed);
            for m in ModulationScheme::ALL {
                let det = ReducerDetector::new(&g, m).unwrap();
                for (d, v) in enumerate_codebook(&g, m).unwrap() {
                    assert_eq!(det.detect(&v.0), d);
                }
            }
        }
    }

    #[test]
    fn reducer_rejects_duplicate_columns() {
        let g = GeneratorMatrix::from_real_rows(&[&[1.0, 1.0], &[0.5, 0.5], &[2.0, 2.0]]).unwrap();
        assert!(matches!(ReducerDetector::new(&g, ModulationScheme::Bpsk), Err(DetectError::RankDeficient(_))));
    }

    #[test]
    fn repetition_reducer_is_consistent() {
        let c = CarrierSpec::new(25e9).unwrap();
        let l = c.wavelength_m();
        let g = build_generator(&preset_repetition_42(c, 0.5 * l, 0.5 * l, 10.0 * l).unwrap(), Normalization::UnitFrobenius, 0.0)
            .unwrap();
        let det = ReducerDetector::new(&g, ModulationScheme::Bpsk).unwrap();
        let wg = det.weights() * g.entries();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((wg[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-9);
            }
        }
    }
}
