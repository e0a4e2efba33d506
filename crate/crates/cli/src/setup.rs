//! Turning config sections into geometries, generators and links.
//!
//! Preset lengths are given in wavelengths of `geometry.frequency_hz`.

use std::io::BufReader;

use ris_dcc::baseline::{ConcatDecoder, DecisionMode};
use ris_dcc::channel::{BerConfig, Link};
use ris_dcc::codec_trellis::{build_trellis_generator, TrellisGenerator, TrellisSpec, TrellisVariant};
use ris_dcc::detect::DetectorKind;
use ris_dcc::diffraction::{build_generator, read_generator_csv, GeneratorMatrix, Normalization};
use ris_dcc::geometry::{
    preset_74, preset_repetition_42, preset_systematic_42, preset_trellis_213, read_geometry, validate_stack,
    CarrierSpec, GeometryError, Preset74, RisStack,
};
use ris_dcc::links::{BlockDccLink, ConcatLink, ConvLink, HammingLink, TrellisLink, UncodedLink};
use ris_dcc::modem::ModulationScheme;

use crate::config::{snr_sweep, Config};
use crate::error::CliError;

pub const DEFAULT_FREQUENCY_HZ: f64 = 25e9;
pub const PRESETS: [&str; 5] = ["repetition_42", "systematic_42", "evenly_74", "clustered_74", "trellis_213"];

fn geometry_err(key: &str, e: GeometryError) -> CliError {
    match e {
        GeometryError::ConstraintViolation(report) => CliError::Constraint(report),
        other => CliError::Config(format!("key `{key}`: {other}")),
    }
}

pub fn modulation(cfg: &Config) -> Result<ModulationScheme, CliError> {
    cfg.parsed_or("modulation", ModulationScheme::Bpsk)
}

pub fn carrier(cfg: &Config) -> Result<CarrierSpec, CliError> {
    let f = cfg.f64_or("geometry.frequency_hz", DEFAULT_FREQUENCY_HZ)?;
    CarrierSpec::new(f).map_err(|e| CliError::Config(format!("key `geometry.frequency_hz`: {e}")))
}

/// The stack described by `geometry.preset` or `geometry.file`, without
/// constraint checks beyond those the presets apply themselves.
pub fn stack_unchecked(cfg: &Config) -> Result<RisStack, CliError> {
    if cfg.has("geometry.file") {
        let path = cfg.path("geometry.file")?;
        let file = std::fs::File::open(&path)
            .map_err(|e| CliError::Config(format!("key `geometry.file`: cannot open {}: {e}", path.display())))?;
        return read_geometry(BufReader::new(file)).map_err(|e| geometry_err("geometry.file", e));
    }
    if cfg.has("geometry.matrix") {
        return Err(CliError::Config(
            "key `geometry.matrix`: an abstract matrix has no geometry; use geometry.preset or geometry.file".into(),
        ));
    }
    let preset = cfg.str("geometry.preset")?;
    let c = carrier(cfg)?;
    let l = c.wavelength_m();
    let len = |key: &str| -> Result<f64, CliError> { Ok(cfg.f64(&format!("geometry.{key}"))? * l) };
    let stack = match preset.as_str() {
        "repetition_42" => preset_repetition_42(c, len("a")?, len("h")?, len("dz")?),
        "systematic_42" => preset_systematic_42(c, len("d")?, len("dz")?),
        "evenly_74" => preset_74(c, &Preset74::EvenlySpaced { pitch: len("pitch")?, dz: len("dz")? }),
        "clustered_74" => preset_74(
            c,
            &Preset74::Clustered {
                pitch: len("pitch")?,
                spread: len("spread")?,
                dz: len("dz")?,
            },
        ),
        "trellis_213" => preset_trellis_213(c, len("pitch")?, len("dz")?),
        other => {
            return Err(CliError::Config(format!(
                "key `geometry.preset`: unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    stack.map_err(|e| geometry_err("geometry.preset", e))
}

/// [`stack_unchecked`] followed by `validate_stack`.
pub fn stack(cfg: &Config) -> Result<RisStack, CliError> {
    let s = stack_unchecked(cfg)?;
    let report = validate_stack(&s);
    if report.is_empty() {
        Ok(s)
    } else {
        Err(CliError::Constraint(report))
    }
}

fn normalization(cfg: &Config) -> Result<Normalization, CliError> {
    match cfg.opt_str("geometry.normalization")?.as_deref() {
        None | Some("unit_frobenius") => Ok(Normalization::UnitFrobenius),
        Some("raw") => Ok(Normalization::Raw),
        Some(other) => Err(CliError::Config(format!(
            "key `geometry.normalization`: unknown `{other}` (expected unit_frobenius or raw)"
        ))),
    }
}

/// Generator from the geometry, or read from `geometry.matrix` (a
/// `row,col,re,im` CSV) when no geometry is given.
pub fn generator(cfg: &Config) -> Result<GeneratorMatrix, CliError> {
    let norm = normalization(cfg)?;
    if cfg.has("geometry.matrix") && !cfg.has("geometry.file") && !cfg.has("geometry.preset") {
        let path = cfg.path("geometry.matrix")?;
        let file = std::fs::File::open(&path)
            .map_err(|e| CliError::Config(format!("key `geometry.matrix`: cannot open {}: {e}", path.display())))?;
        let raw = read_generator_csv(BufReader::new(file))
            .map_err(|e| CliError::Config(format!("key `geometry.matrix`: {e}")))?;
        return GeneratorMatrix::from_entries(raw.entries().clone(), norm)
            .map_err(|e| CliError::Config(format!("key `geometry.matrix`: {e}")));
    }
    let s = stack(cfg)?;
    let loss = cfg.f64_or("geometry.insertion_loss_db", 0.0)?;
    build_generator(&s, norm, loss).map_err(|e| CliError::Config(format!("geometry: {e}")))
}

pub fn detector(cfg: &Config) -> Result<DetectorKind, CliError> {
    cfg.parsed_or("detector", DetectorKind::Ml)
}

fn decision(cfg: &Config) -> Result<DecisionMode, CliError> {
    match cfg.opt_str("code.decision")?.as_deref() {
        None | Some("hard") => Ok(DecisionMode::Hard),
        Some("soft") => Ok(DecisionMode::Soft),
        Some(other) => Err(CliError::Config(format!("key `code.decision`: unknown `{other}` (expected hard or soft)"))),
    }
}

/// Trellis spec and generator from `code.variant`, `code.k`, `code.n` and
/// `code.mu` (the last three default to what the geometry provides).
pub fn trellis(cfg: &Config) -> Result<(TrellisSpec, TrellisGenerator), CliError> {
    let s = stack(cfg)?;
    let variant: TrellisVariant = cfg.parsed("code.variant")?;
    let mu = cfg.usize_or("code.mu", s.memory_frames().max(usize::from(variant != TrellisVariant::ExtraAtoms)))?;
    let k = cfg.usize_or("code.k", s.input_dimension())?;
    let n = cfg.usize_or("code.n", s.output_dimension())?;
    let spec = TrellisSpec::new(variant, k, n, mu, modulation(cfg)?)
        .map_err(|e| CliError::Config(format!("key `code`: {e}")))?;
    let parts = build_trellis_generator(&s, &spec).map_err(|e| CliError::Config(format!("key `code`: {e}")))?;
    Ok((spec, parts))
}

pub const CODE_KINDS: [&str; 6] = ["uncoded", "block", "trellis", "hamming74", "conv213", "concat"];

pub fn link(cfg: &Config) -> Result<Box<dyn Link>, CliError> {
    let kind = cfg.str("code.kind")?;
    let m = modulation(cfg)?;
    let bpsk_only = |name: &str| -> Result<(), CliError> {
        if m == ModulationScheme::Bpsk {
            Ok(())
        } else {
            Err(CliError::Config(format!("key `modulation`: {name} runs over BPSK only")))
        }
    };
    Ok(match kind.as_str() {
        "uncoded" => Box::new(UncodedLink::new(m)),
        "block" => Box::new(BlockDccLink::new(generator(cfg)?, m, detector(cfg)?)),
        "trellis" => {
            let (spec, parts) = trellis(cfg)?;
            let frames = cfg.usize_or("code.data_frames", 64)?;
            if frames == 0 {
                return Err(CliError::Config("key `code.data_frames`: must be positive".into()));
            }
            Box::new(TrellisLink::new(spec, parts, frames))
        }
        "hamming74" => {
            bpsk_only("hamming74")?;
            Box::new(HammingLink::new(decision(cfg)?))
        }
        "conv213" => {
            bpsk_only("conv213")?;
            Box::new(ConvLink::new(decision(cfg)?))
        }
        "concat" => {
            let decoder: ConcatDecoder = cfg.parsed_or("code.decoder", ConcatDecoder::MlSoft)?;
            Box::new(ConcatLink::new(generator(cfg)?, m, decoder))
        }
        other => {
            return Err(CliError::Config(format!(
                "key `code.kind`: unknown `{other}` (expected one of {})",
                CODE_KINDS.join(", ")
            )))
        }
    })
}

pub fn seed(cfg: &Config) -> Result<u64, CliError> {
    cfg.u64("seed")
}

pub fn ber_config(cfg: &Config) -> Result<BerConfig, CliError> {
    let mut b = BerConfig::new(snr_sweep(cfg)?, seed(cfg)?);
    b.target_errors = cfg.u64_or("stopping.target_errors", b.target_errors)?;
    b.max_bits = cfg.u64_or("stopping.max_bits", b.max_bits)?;
    b.batch_bits = cfg.u64_or("stopping.batch_bits", b.batch_bits)?;
    b.workers = cfg.opt_usize("stopping.workers")?;
    if b.target_errors == 0 || b.max_bits == 0 || b.batch_bits == 0 {
        return Err(CliError::Config("key `stopping`: target_errors, max_bits and batch_bits must be positive".into()));
    }
    Ok(b)
}
