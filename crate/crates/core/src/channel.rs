//! AWGN channel and the Monte-Carlo BER engine.
//!
//! Each SNR point is simulated in batches of frames. Batch `i` of point `p`
//! draws all its randomness from its own ChaCha8 stream derived from
//! `(master_seed, p, i)`, so tallies do not depend on how many worker
//! threads ran the batches. Batches are dispatched in waves and folded in
//! index order; the point stops at the first batch after which either the
//! error target or the bit budget is met, and later batches are discarded.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_TARGET_ERRORS: u64 = 100;
pub const DEFAULT_MAX_BITS: u64 = 10_000_000;
pub const DEFAULT_BATCH_BITS: u64 = 20_000;
const MAX_WAVE: usize = 64;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid channel configuration: {0}")]
    Config(String),
    #[error("link setup failed at Eb/N0 = {eb_n0_db} dB: {message}")]
    Link { eb_n0_db: f64, message: String },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// Add circular complex Gaussian noise with `E|n|² = n0`.
pub fn awgn_in_place<R: Rng + ?Sized>(y: &mut [Complex64], n0: f64, rng: &mut R) {
    if n0 == 0.0 {
        return;
    }
    let sigma = (n0 / 2.0).sqrt();
    for v in y {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v += Complex64::new(sigma * re, sigma * im);
    }
}

pub fn awgn<R: Rng + ?Sized>(x: &[Complex64], n0: f64, rng: &mut R) -> Vec<Complex64> {
    let mut y = x.to_vec();
    awgn_in_place(&mut y, n0, rng);
    y
}

/// Independent generator for one `(snr_index, batch_index)` pair.
pub fn rng_substream(master_seed: u64, snr_index: u32, batch_index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((snr_index as u64) << 32) | batch_index as u64);
    rng
}

/// Noise density for a given Eb/N0, with `Eb` the nominal transmitted
/// energy per information bit. `+∞` dB gives a noiseless channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub eb_n0_db: f64,
    pub eb: f64,
    pub n0: f64,
}

impl ChannelSpec {
    pub fn new(eb_n0_db: f64, energy_per_frame: f64, info_bits_per_frame: usize) -> Result<Self, ChannelError> {
        if eb_n0_db.is_nan() || eb_n0_db == f64::NEG_INFINITY {
            return Err(ChannelError::Config(format!("Eb/N0 {eb_n0_db} dB")));
        }
        if !(energy_per_frame > 0.0 && energy_per_frame.is_finite()) || info_bits_per_frame == 0 {
            return Err(ChannelError::Config("frame energy and bit count must be positive".into()));
        }
        let eb = energy_per_frame / info_bits_per_frame as f64;
        let n0 = eb / 10f64.powf(eb_n0_db / 10.0);
        Ok(Self { eb_n0_db, eb, n0 })
    }
}

/// Outcome of one simulated frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameOutcome {
    pub bit_errors: u64,
    pub energy: f64,
}

/// A simulator bound to one noise level.
pub trait FrameSimulator: Send + Sync {
    /// Draw data and noise from `rng`, transmit, detect and count bit errors.
    fn run_frame(&self, rng: &mut ChaCha8Rng) -> FrameOutcome;
}

/// A complete transmit/receive chain under test.
pub trait Link: Sync {
    fn scheme(&self) -> String;
    fn detector(&self) -> String;
    fn modulation(&self) -> String;
    /// Digest of the geometry behind the link, `-` if there is none.
    fn geometry_digest(&self) -> String;
    fn info_bits_per_frame(&self) -> usize;
    /// Expected transmitted energy of one frame, used for Eb accounting.
    fn nominal_frame_energy(&self) -> f64;
    fn simulator(&self, n0: f64) -> Result<Box<dyn FrameSimulator + '_>, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerConfig {
    pub eb_n0_db: Vec<f64>,
    pub seed: u64,
    pub target_errors: u64,
    pub max_bits: u64,
    /// Information bits per batch (rounded up to whole frames).
    pub batch_bits: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl BerConfig {
    pub fn new(eb_n0_db: Vec<f64>, seed: u64) -> Self {
        Self {
            eb_n0_db,
            seed,
            target_errors: DEFAULT_TARGET_ERRORS,
            max_bits: DEFAULT_MAX_BITS,
            batch_bits: DEFAULT_BATCH_BITS,
            workers: None,
        }
    }

    fn check(&self) -> Result<(), ChannelError> {
        if self.target_errors == 0 || self.max_bits == 0 || self.batch_bits == 0 {
            return Err(ChannelError::Config("error target, bit budget and batch size must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(ChannelError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub eb_n0_db: f64,
    pub n0: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Half-width of the normal-approximation 95 % interval.
    pub ci95: f64,
    pub mean_frame_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub scheme: String,
    pub detector: String,
    pub modulation: String,
    pub geometry_digest: String,
    pub seed: u64,
    pub info_bits_per_frame: usize,
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    pub const CSV_HEADER: &'static str =
        "scheme,detector,modulation,geometry_digest,seed,eb_n0_db,frames,bit_errors,ber,ci95";

    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "{}", Self::CSV_HEADER)?;
        }
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:.6e},{:.6e}",
                self.scheme,
                self.detector,
                self.modulation,
                self.geometry_digest,
                self.seed,
                p.eb_n0_db,
                p.frames,
                p.bit_errors,
                p.ber,
                p.ci95
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    frames: u64,
    bit_errors: u64,
    energy: f64,
}

fn run_batch(sim: &dyn FrameSimulator, frames: u64, seed: u64, snr_index: u32, batch: u32) -> Tally {
    let mut rng = rng_substream(seed, snr_index, batch);
    let mut t = Tally::default();
    for _ in 0..frames {
        let o = sim.run_frame(&mut rng);
        t.frames += 1;
        t.bit_errors += o.bit_errors;
        t.energy += o.energy;
    }
    t
}

/// Simulate one SNR point. `snr_index` selects the random substreams, so a
/// point re-run on its own with the same index reproduces its tallies.
pub fn run_ber_point(link: &dyn Link, config: &BerConfig, snr_index: u32, eb_n0_db: f64) -> Result<BerPoint, ChannelError> {
    config.check()?;
    match config.workers {
        None => ber_point(link, config, snr_index, eb_n0_db),
        Some(w) => pool(w)?.install(|| ber_point(link, config, snr_index, eb_n0_db)),
    }
}

/// Simulate every SNR point of `config` in order.
pub fn run_ber(link: &dyn Link, config: &BerConfig) -> Result<BerCurve, ChannelError> {
    config.check()?;
    let run = || -> Result<Vec<BerPoint>, ChannelError> {
        config
            .eb_n0_db
            .iter()
            .enumerate()
            .map(|(i, &snr)| ber_point(link, config, i as u32, snr))
            .collect()
    };
    let points = match config.workers {
        None => run()?,
        Some(w) => pool(w)?.install(run)?,
    };
    Ok(BerCurve {
        scheme: link.scheme(),
        detector: link.detector(),
        modulation: link.modulation(),
        geometry_digest: link.geometry_digest(),
        seed: config.seed,
        info_bits_per_frame: link.info_bits_per_frame(),
        points,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, ChannelError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ChannelError::Pool(e.to_string()))
}

fn ber_point(link: &dyn Link, config: &BerConfig, snr_index: u32, eb_n0_db: f64) -> Result<BerPoint, ChannelError> {
    let bits_per_frame = link.info_bits_per_frame() as u64;
    let channel = ChannelSpec::new(eb_n0_db, link.nominal_frame_energy(), link.info_bits_per_frame())?;
    let sim = link.simulator(channel.n0).map_err(|message| ChannelError::Link { eb_n0_db, message })?;
    let sim = sim.as_ref();

    let frame_cap = config.max_bits.div_ceil(bits_per_frame);
    let batch_frames = config.batch_bits.div_ceil(bits_per_frame);
    let batch_count = frame_cap.div_ceil(batch_frames);
    let frames_in = |b: u64| batch_frames.min(frame_cap - b * batch_frames);

    let mut total = Tally::default();
    let mut next = 0u64;
    let mut wave = 1usize;
    'outer: while next < batch_count {
        let end = (next + wave as u64).min(batch_count);
        let tallies: Vec<Tally> = (next..end)
            .into_par_iter()
            .map(|b| run_batch(sim, frames_in(b), config.seed, snr_index, b as u32))
            .collect();
        for t in tallies {
            total.frames += t.frames;
            total.bit_errors += t.bit_errors;
            total.energy += t.energy;
            if total.bit_errors >= config.target_errors || total.frames * bits_per_frame >= config.max_bits {
                break 'outer;
            }
        }
        next = end;
        wave = (wave * 2).min(MAX_WAVE);
    }

    let bits = total.frames * bits_per_frame;
    let ber = total.bit_errors as f64 / bits as f64;
    Ok(BerPoint {
        eb_n0_db,
        n0: channel.n0,
        frames: total.frames,
        bits,
        bit_errors: total.bit_errors,
        ber,
        ci95: 1.96 * (ber * (1.0 - ber) / bits as f64).sqrt(),
        mean_frame_energy: total.energy / total.frames as f64,
    })
}
