use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ris_dcc::baseline::{write_conv_vectors, Conv213Code, Hamming74Code};
use ris_dcc::channel::{run_ber, BerCurve};
use ris_dcc::codec_block::{distance_spectrum, encode_block, enumerate_codebook};
use ris_dcc::codec_trellis::encode_sequence;
use ris_dcc::diffraction::write_generator_csv;
use ris_dcc::geometry::{validate_stack, write_geometry, CLUSTERS_74};
use ris_dcc::modem::{modulate, Dataword, ModulationScheme};
use ris_dcc::optimizer::{optimize, Method, OptimizerError, SearchSpace};

use crate::config::Config;
use crate::error::CliError;
use crate::setup;

/// Where a command writes its main artifact.
pub enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    pub fn open(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match self {
            Sink::Stdout => Box::new(BufWriter::new(std::io::stdout().lock())),
            Sink::File(p) => Box::new(BufWriter::new(create(p)?)),
        })
    }
}

fn create(p: &Path) -> Result<File, CliError> {
    File::create(p).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))
}

pub fn validate(cfg: &Config, sink: &Sink) -> Result<(), CliError> {
    let stack = setup::stack_unchecked(cfg)?;
    let report = validate_stack(&stack);
    let mut out = sink.open()?;
    if report.is_empty() {
        writeln!(
            out,
            "ok: {} + {} atoms, separation {:.6e} m",
            stack.layer1().len(),
            stack.layer2().len(),
            stack.separation_m()
        )?;
        out.flush()?;
        Ok(())
    } else {
        write!(out, "{report}")?;
        out.flush()?;
        Err(CliError::Constraint(report))
    }
}

pub fn gen_matrix(cfg: &Config, sink: &Sink) -> Result<(), CliError> {
    let g = setup::generator(cfg)?;
    let mut out = sink.open()?;
    write_generator_csv(&g, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn distance(cfg: &Config, sink: &Sink) -> Result<(), CliError> {
    let g = setup::generator(cfg)?;
    let m = setup::modulation(cfg)?;
    let book = enumerate_codebook(&g, m).map_err(|e| CliError::Config(format!("geometry: {e}")))?;
    let spectrum = distance_spectrum(&book).map_err(|e| CliError::Config(format!("geometry: {e}")))?;
    let mut out = sink.open()?;
    spectrum.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Parse a hex-digit dataword label such as `0110` (one digit per symbol).
fn parse_dataword(key: &str, label: &str, m: ModulationScheme) -> Result<Dataword, CliError> {
    label
        .chars()
        .map(|c| match c.to_digit(16) {
            Some(d) if (d as usize) < m.order() => Ok(d),
            _ => Err(CliError::Config(format!(
                "key `{key}`: `{label}` is not a {} dataword",
                m.name()
            ))),
        })
        .collect::<Result<Vec<u32>, _>>()
        .map(Dataword)
}

fn parse_bits(key: &str, label: &str) -> Result<Vec<u8>, CliError> {
    label
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(CliError::Config(format!("key `{key}`: `{label}` is not a bit string"))),
        })
        .collect()
}

/// Encode `encode.datawords` with the configured code. Block and trellis
/// codes emit `index,output,re,im` rows (one index per dataword or per
/// trellis step, flush steps included); the classical codes emit
/// `input output` bit strings; `uncoded` emits the modulated symbols.
pub fn encode(cfg: &Config, sink: &Sink) -> Result<(), CliError> {
    let key = "encode.datawords";
    let words = cfg.str_list(key)?;
    let kind = cfg.opt_str("code.kind")?.unwrap_or_else(|| "block".into());
    let m = setup::modulation(cfg)?;
    let mut out = sink.open()?;
    match kind.as_str() {
        "block" | "uncoded" => {
            let g = if kind == "block" { Some(setup::generator(cfg)?) } else { None };
            writeln!(out, "index,output,re,im")?;
            for (i, w) in words.iter().enumerate() {
                let d = parse_dataword(key, w, m)?;
                let s = modulate(&d, m).map_err(|e| CliError::Config(format!("key `{key}`: {e}")))?;
                let values = match &g {
                    Some(g) => encode_block(g, &s)
                        .map_err(|e| CliError::Config(format!("key `{key}`: {e}")))?
                        .0,
                    None => s.0,
                };
                for (j, v) in values.iter().enumerate() {
                    writeln!(out, "{i},{j},{:.16e},{:.16e}", v.re, v.im)?;
                }
            }
        }
        "trellis" => {
            let (spec, parts) = setup::trellis(cfg)?;
            let data = words
                .iter()
                .map(|w| parse_dataword(key, w, m))
                .collect::<Result<Vec<_>, _>>()?;
            let coded = encode_sequence(&spec, &parts, &data).map_err(|e| CliError::Config(format!("key `{key}`: {e}")))?;
            writeln!(out, "index,output,re,im")?;
            for (t, c) in coded.iter().enumerate() {
                for (j, v) in c.0.iter().enumerate() {
                    writeln!(out, "{t},{j},{:.16e},{:.16e}", v.re, v.im)?;
                }
            }
        }
        "hamming74" => {
            let code = Hamming74Code::new();
            for w in &words {
                let bits = parse_bits(key, w)?;
                let c = code.encode(&bits).map_err(|e| CliError::Config(format!("key `{key}`: {e}")))?;
                writeln!(out, "{w} {}", c.iter().map(|b| b.to_string()).collect::<String>())?;
            }
        }
        "conv213" => {
            let messages = words.iter().map(|w| parse_bits(key, w)).collect::<Result<Vec<_>, _>>()?;
            write_conv_vectors(&Conv213Code, &messages, &mut out)?;
        }
        other => {
            return Err(CliError::Config(format!(
                "key `code.kind`: `{other}` cannot be used with encode (expected block, trellis, uncoded, hamming74 or conv213)"
            )))
        }
    }
    out.flush()?;
    Ok(())
}

fn optimizer_err(e: OptimizerError) -> CliError {
    match e {
        OptimizerError::InfeasibleSpace(msg) => CliError::Infeasible(msg),
        OptimizerError::ZeroBudget => CliError::Config("key `optimize.budget`: must be positive".into()),
        OptimizerError::InvalidSpace(msg) => CliError::Config(format!("key `optimize`: {msg}")),
        other => CliError::Runtime(other.to_string()),
    }
}

fn search_space(cfg: &Config) -> Result<SearchSpace, CliError> {
    let base = setup::stack_unchecked(cfg)?;
    let l = base.carrier().wavelength_m();
    let separation = if cfg.has("optimize.separation_min") || cfg.has("optimize.separation_max") {
        Some((cfg.f64("optimize.separation_min")? * l, cfg.f64("optimize.separation_max")? * l))
    } else {
        None
    };
    let space = cfg.str("optimize.space")?;
    let bad = optimizer_err;
    match space.as_str() {
        "separation" => {
            let (lo, hi) = separation.ok_or_else(|| CliError::Config("missing required key `optimize.separation_min`".into()))?;
            SearchSpace::separation_sweep(base, lo, hi).map_err(bad)
        }
        "atoms" => {
            let layers = if cfg.has("optimize.layers") { cfg.u8_list("optimize.layers")? } else { vec![1, 2] };
            let half = cfg.f64("optimize.half_width")? * l;
            SearchSpace::atom_offsets(base, &layers, half, separation).map_err(bad)
        }
        "clusters" => {
            if base.layer1().len() != 4 || base.layer2().len() != 7 {
                return Err(CliError::Config("key `optimize.space`: clusters needs a (7,4) geometry".into()));
            }
            let half = cfg.f64("optimize.half_width")? * l;
            SearchSpace::cluster_offsets(base, &CLUSTERS_74, half, separation).map_err(bad)
        }
        other => Err(CliError::Config(format!(
            "key `optimize.space`: unknown `{other}` (expected separation, atoms or clusters)"
        ))),
    }
}

/// Writes the best geometry to the sink and the trace CSV to
/// `optimize.trace` (default: `<output>.trace.csv`, none on stdout).
pub fn optimize_cmd(cfg: &Config, sink: &Sink) -> Result<(), CliError> {
    let space = search_space(cfg)?;
    let m = setup::modulation(cfg)?;
    let budget = cfg.usize_or("optimize.budget", 200)?;
    let method = match cfg.opt_str("optimize.method")?.as_deref() {
        None | Some("multistart") => Method::MultistartDirectSearch {
            restarts: cfg.usize_or("optimize.restarts", 8)?,
        },
        Some("grid") => Method::Grid {
            points_per_axis: cfg.usize_or("optimize.points_per_axis", 11)?,
        },
        Some(other) => {
            return Err(CliError::Config(format!(
                "key `optimize.method`: unknown `{other}` (expected multistart or grid)"
            )))
        }
    };
    let result = optimize(&space, m, budget, setup::seed(cfg)?, method).map_err(optimizer_err)?;
    let trace = match (cfg.opt_str("optimize.trace")?, sink) {
        (Some(t), _) => Some(cfg.resolve(&t)),
        (None, Sink::File(p)) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".trace.csv");
            Some(PathBuf::from(name))
        }
        (None, Sink::Stdout) => None,
    };
    let mut out = sink.open()?;
    write_geometry(&result.best, &mut out)?;
    out.flush()?;
    if let Some(t) = trace {
        let mut w = BufWriter::new(create(&t)?);
        result.write_trace_csv(&mut w)?;
        w.flush()?;
    }
    eprintln!("best d_min {:.9} after {} evaluations", result.best_d_min, result.evaluations);
    Ok(())
}

fn curve(cfg: &Config) -> Result<BerCurve, CliError> {
    let link = setup::link(cfg)?;
    let ber = setup::ber_config(cfg)?;
    let mut c = run_ber(link.as_ref(), &ber).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(label) = cfg.opt_str("code.label")? {
        c.scheme = label;
    }
    Ok(c)
}

pub fn ber(cfg: &Config, sink: &Sink) -> Result<(), CliError> {
    let c = curve(cfg)?;
    let mut out = sink.open()?;
    c.write_csv(&mut out, true)?;
    out.flush()?;
    Ok(())
}

/// One CSV for several configs, rows in ascending SNR and config order
/// within an SNR. Scheme labels (after `code.label`) must be distinct.
pub fn compare(cfgs: &[Config], sink: &Sink) -> Result<(), CliError> {
    let mut curves: Vec<BerCurve> = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let c = curve(cfg)?;
        if curves.iter().any(|o| o.scheme == c.scheme) {
            return Err(CliError::Config(format!(
                "key `code.label`: scheme label `{}` appears twice; set distinct labels",
                c.scheme
            )));
        }
        curves.push(c);
    }
    let mut rows: Vec<(f64, usize, usize)> = curves
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.points.iter().enumerate().map(move |(pi, p)| (p.eb_n0_db, ci, pi)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = sink.open()?;
    writeln!(out, "{}", BerCurve::CSV_HEADER)?;
    for (_, ci, pi) in rows {
        let c = &curves[ci];
        let one = BerCurve {
            points: vec![c.points[pi].clone()],
            ..c.clone()
        };
        one.write_csv(&mut out, false)?;
    }
    out.flush()?;
    Ok(())
}
