//! Geometry search for a large minimum code distance.
//!
//! The objective is `d_min` of the unit-Frobenius code built from a stack,
//! so growing the aperture cannot improve it. Candidates are clamped to the
//! parameter box and rejected without evaluation when the clamped stack
//! still breaks a physical constraint; every evaluated geometry is valid.
//!
//! The multistart method screens a Latin-hypercube design, then polishes
//! the best screened points with compass search (poll ± step on each axis,
//! halve the step when no poll point improves). Restarts run in parallel;
//! their evaluations enter the trace in restart order.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec_block::{enumerate_codebook, min_distance, CodecError};
use crate::diffraction::{build_generator, DiffractionError, Normalization};
use crate::geometry::{validate_stack, Point3, RisStack, MIN_SEPARATION_WAVELENGTHS};
use crate::modem::ModulationScheme;

pub const DEFAULT_RESTARTS: usize = 8;
/// Compass search stops once every step is below this fraction of its range.
const STEP_FLOOR: f64 = 1e-7;
/// Screening stops looking for a feasible start after this many draws.
const FEASIBILITY_DRAWS: usize = 256;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("no valid geometry in the search space: {0}")]
    InfeasibleSpace(String),
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Diffraction(#[from] DiffractionError),
}

/// `d_min` of the unit-Frobenius code of `stack` under modulation `m`.
pub fn objective(stack: &RisStack, m: ModulationScheme) -> Result<f64, OptimizerError> {
    let g = build_generator(stack, Normalization::UnitFrobenius, 0.0)?;
    let codewords: Vec<_> = enumerate_codebook(&g, m)?.into_iter().map(|(_, c)| c).collect();
    Ok(min_distance(&codewords))
}

/// A free coordinate of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    /// In-plane `x` of atom `atom` on layer `layer` (1 or 2).
    X { layer: u8, atom: usize },
    Y { layer: u8, atom: usize },
    /// Rigid in-plane shift of atoms `start..end` on `layer`; the value is
    /// the `x` (or `y`) of atom `start`.
    GroupX { layer: u8, start: usize, end: usize },
    GroupY { layer: u8, start: usize, end: usize },
    /// Distance between the layer planes; layer 2 moves.
    Separation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameter {
    pub coordinate: Coordinate,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    base: RisStack,
    params: Vec<Parameter>,
}

impl SearchSpace {
    pub fn new(base: RisStack, params: Vec<Parameter>) -> Result<Self, OptimizerError> {
        for p in &params {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo <= p.hi) {
                return Err(OptimizerError::InvalidSpace(format!("bounds [{}, {}] for {:?}", p.lo, p.hi, p.coordinate)));
            }
            match p.coordinate {
                Coordinate::X { layer, atom } | Coordinate::Y { layer, atom } => {
                    let len = layer_len(&base, layer)?;
                    if atom >= len {
                        return Err(OptimizerError::InvalidSpace(format!("atom {atom} on layer {layer} of {len}")));
                    }
                }
                Coordinate::GroupX { layer, start, end } | Coordinate::GroupY { layer, start, end } => {
                    let len = layer_len(&base, layer)?;
                    if start >= end || end > len {
                        return Err(OptimizerError::InvalidSpace(format!("atoms {start}..{end} on layer {layer} of {len}")));
                    }
                }
                Coordinate::Separation => {
                    let min = MIN_SEPARATION_WAVELENGTHS * base.carrier().wavelength_m();
                    if !base.allow_near_field() && p.hi < min * (1.0 - 1e-9) {
                        return Err(OptimizerError::InfeasibleSpace(format!(
                            "separation range ends at {} m, below {min} m",
                            p.hi
                        )));
                    }
                    if p.lo <= 0.0 {
                        return Err(OptimizerError::InvalidSpace("separation must stay positive".into()));
                    }
                }
            }
        }
        if params.iter().enumerate().any(|(i, p)| params[..i].iter().any(|q| q.coordinate == p.coordinate)) {
            return Err(OptimizerError::InvalidSpace("coordinate listed twice".into()));
        }
        Ok(Self { base, params })
    }

    /// The interlayer distance as the only free parameter.
    pub fn separation_sweep(base: RisStack, lo: f64, hi: f64) -> Result<Self, OptimizerError> {
        Self::new(
            base,
            vec![Parameter {
                coordinate: Coordinate::Separation,
                lo,
                hi,
            }],
        )
    }

    /// Every atom of the listed layers free to move by up to `half_width`
    /// in `x` and `y` around its base position, optionally with a free
    /// separation range.
    pub fn atom_offsets(
        base: RisStack,
        layers: &[u8],
        half_width: f64,
        separation: Option<(f64, f64)>,
    ) -> Result<Self, OptimizerError> {
        let mut params = Vec::new();
        for &layer in layers {
            let positions = match layer {
                1 => base.layer1().positions(),
                2 => base.layer2().positions(),
                _ => return Err(OptimizerError::InvalidSpace(format!("layer {layer}"))),
            };
            for (atom, p) in positions.iter().enumerate() {
                params.push(Parameter {
                    coordinate: Coordinate::X { layer, atom },
                    lo: p.x - half_width,
                    hi: p.x + half_width,
                });
                params.push(Parameter {
                    coordinate: Coordinate::Y { layer, atom },
                    lo: p.y - half_width,
                    hi: p.y + half_width,
                });
            }
        }
        if let Some((lo, hi)) = separation {
            params.push(Parameter {
                coordinate: Coordinate::Separation,
                lo,
                hi,
            });
        }
        Self::new(base, params)
    }

    /// Rigid clusters `(layer, start..end)` free to shift by up to
    /// `half_width` in `x` and `y`, optionally with a free separation range.
    pub fn cluster_offsets(
        base: RisStack,
        clusters: &[(u8, std::ops::Range<usize>)],
        half_width: f64,
        separation: Option<(f64, f64)>,
    ) -> Result<Self, OptimizerError> {
        let mut params = Vec::new();
        for (layer, atoms) in clusters {
            let (layer, start, end) = (*layer, atoms.start, atoms.end);
            let len = layer_len(&base, layer)?;
            if start >= len {
                return Err(OptimizerError::InvalidSpace(format!("atom {start} on layer {layer} of {len}")));
            }
            let p = if layer == 1 { base.layer1() } else { base.layer2() }.positions()[start];
            params.push(Parameter {
                coordinate: Coordinate::GroupX { layer, start, end },
                lo: p.x - half_width,
                hi: p.x + half_width,
            });
            params.push(Parameter {
                coordinate: Coordinate::GroupY { layer, start, end },
                lo: p.y - half_width,
                hi: p.y + half_width,
            });
        }
        if let Some((lo, hi)) = separation {
            params.push(Parameter {
                coordinate: Coordinate::Separation,
                lo,
                hi,
            });
        }
        Self::new(base, params)
    }

    pub fn base(&self) -> &RisStack {
        &self.base
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    /// Base-geometry values of the free coordinates.
    pub fn base_point(&self) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| match p.coordinate {
                Coordinate::X { layer, atom } | Coordinate::GroupX { layer, start: atom, .. } => {
                    self.position(layer, atom).x
                }
                Coordinate::Y { layer, atom } | Coordinate::GroupY { layer, start: atom, .. } => {
                    self.position(layer, atom).y
                }
                Coordinate::Separation => self.base.separation_m(),
            })
            .collect()
    }

    fn position(&self, layer: u8, atom: usize) -> Point3 {
        match layer {
            1 => self.base.layer1().positions()[atom],
            _ => self.base.layer2().positions()[atom],
        }
    }

    fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.params).map(|(v, p)| v.clamp(p.lo, p.hi)).collect()
    }

    /// The stack at parameter values `x` (no clamping, no validation).
    pub fn stack_at(&self, x: &[f64]) -> Option<RisStack> {
        #[derive(Clone, Copy, Default)]
        struct Move {
            x: Option<f64>,
            y: Option<f64>,
            dx: f64,
            dy: f64,
        }
        let z1 = self.base.layer1().plane_z();
        let mut moves = [
            vec![Move::default(); self.base.layer1().len()],
            vec![Move::default(); self.base.layer2().len()],
        ];
        let mut dz = self.base.separation_m();
        for (&v, p) in x.iter().zip(&self.params) {
            match p.coordinate {
                Coordinate::X { layer, atom } => moves[layer as usize - 1][atom].x = Some(v),
                Coordinate::Y { layer, atom } => moves[layer as usize - 1][atom].y = Some(v),
                Coordinate::GroupX { layer, start, end } => {
                    let shift = v - self.position(layer, start).x;
                    moves[layer as usize - 1][start..end].iter_mut().for_each(|m| m.dx += shift);
                }
                Coordinate::GroupY { layer, start, end } => {
                    let shift = v - self.position(layer, start).y;
                    moves[layer as usize - 1][start..end].iter_mut().for_each(|m| m.dy += shift);
                }
                Coordinate::Separation => dz = v,
            }
        }
        self.base
            .map_positions(|layer, i, q| {
                let m = moves[layer][i];
                let z = if layer == 0 { q.z } else { z1 + dz };
                Point3::new(m.x.unwrap_or(q.x) + m.dx, m.y.unwrap_or(q.y) + m.dy, z)
            })
            .ok()
    }

    /// Clamp `x` into the box; `None` if the resulting stack is invalid.
    pub fn project(&self, x: &[f64]) -> Option<(Vec<f64>, RisStack)> {
        let x = self.clamp(x);
        let stack = self.stack_at(&x)?;
        validate_stack(&stack).is_empty().then_some((x, stack))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.params.iter().map(|p| if p.hi > p.lo { rng.random_range(p.lo..=p.hi) } else { p.lo }).collect()
    }

    /// `count` points, one per stratum on every axis, strata matched by
    /// independent random permutations.
    fn latin_hypercube(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(self.params.len());
        for p in &self.params {
            let mut strata: Vec<usize> = (0..count).collect();
            strata.shuffle(rng);
            columns.push(
                strata
                    .into_iter()
                    .map(|s| p.lo + (p.hi - p.lo) * (s as f64 + rng.random::<f64>()) / count as f64)
                    .collect(),
            );
        }
        (0..count).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
    }
}

fn layer_len(stack: &RisStack, layer: u8) -> Result<usize, OptimizerError> {
    match layer {
        1 => Ok(stack.layer1().len()),
        2 => Ok(stack.layer2().len()),
        _ => Err(OptimizerError::InvalidSpace(format!("layer {layer}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MultistartDirectSearch { restarts: usize },
    /// Full tensor grid with `points_per_axis` values per axis, endpoints
    /// included, visited in row-major order until the budget runs out.
    Grid { points_per_axis: usize },
}

impl Method {
    pub fn multistart() -> Self {
        Self::MultistartDirectSearch {
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub best: RisStack,
    pub best_point: Vec<f64>,
    pub best_d_min: f64,
    pub evaluations: usize,
    pub seed: u64,
    /// `(iteration, best d_min so far)` per evaluation.
    pub trace: Vec<(usize, f64)>,
}

impl OptimizerResult {
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,d_min")?;
        for (i, d) in &self.trace {
            writeln!(out, "{i},{d:.16e}")?;
        }
        Ok(())
    }
}

struct Evaluated {
    x: Vec<f64>,
    stack: RisStack,
    value: f64,
}

/// Best-first log of one search thread.
struct Log {
    values: Vec<f64>,
    best: Option<Evaluated>,
}

impl Log {
    fn new() -> Self {
        Self { values: Vec::new(), best: None }
    }

    fn record(&mut self, e: Evaluated) {
        self.values.push(e.value);
        if self.best.as_ref().is_none_or(|b| e.value > b.value) {
            self.best = Some(e);
        }
    }
}

fn evaluate(space: &SearchSpace, m: ModulationScheme, x: &[f64]) -> Result<Option<Evaluated>, OptimizerError> {
    let Some((x, stack)) = space.project(x) else {
        return Ok(None);
    };
    let value = objective(&stack, m)?;
    Ok(Some(Evaluated { x, stack, value }))
}

/// Deterministic search for the geometry with the largest `d_min`.
pub fn optimize(
    space: &SearchSpace,
    m: ModulationScheme,
    budget: usize,
    seed: u64,
    method: Method,
) -> Result<OptimizerResult, OptimizerError> {
    if budget == 0 {
        return Err(OptimizerError::ZeroBudget);
    }
    let logs = match method {
        Method::Grid { points_per_axis } => vec![grid(space, m, budget, points_per_axis)?],
        Method::MultistartDirectSearch { restarts } => multistart(space, m, budget, seed, restarts.max(1))?,
    };

    let mut trace = Vec::new();
    let mut running = f64::NEG_INFINITY;
    let mut best: Option<Evaluated> = None;
    for log in logs {
        for v in &log.values {
            running = running.max(*v);
            trace.push((trace.len(), running));
        }
        if let Some(b) = log.best {
            if best.as_ref().is_none_or(|cur| b.value > cur.value) {
                best = Some(b);
            }
        }
    }
    let best = best.ok_or_else(|| OptimizerError::InfeasibleSpace("no candidate passed validation".into()))?;
    Ok(OptimizerResult {
        best: best.stack,
        best_point: best.x,
        best_d_min: best.value,
        evaluations: trace.len(),
        seed,
        trace,
    })
}

fn grid(space: &SearchSpace, m: ModulationScheme, budget: usize, per_axis: usize) -> Result<Log, OptimizerError> {
    let per_axis = per_axis.max(1);
    let dims = space.dimension();
    let total = per_axis.checked_pow(dims as u32).unwrap_or(usize::MAX);
    let mut log = Log::new();
    for flat in 0..total.min(budget) {
        let mut rest = flat;
        let mut x = vec![0.0; dims];
        for (d, p) in space.params.iter().enumerate().rev() {
            let i = rest % per_axis;
            rest /= per_axis;
            x[d] = if per_axis == 1 {
                0.5 * (p.lo + p.hi)
            } else {
                p.lo + (p.hi - p.lo) * i as f64 / (per_axis - 1) as f64
            };
        }
        if let Some(e) = evaluate(space, m, &x)? {
            log.record(e);
        }
    }
    Ok(log)
}

fn feasible_start(space: &SearchSpace, seed: u64) -> Result<Vec<f64>, OptimizerError> {
    if let Some((x, _)) = space.project(&space.base_point()) {
        return Ok(x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    for _ in 0..FEASIBILITY_DRAWS {
        if let Some((x, _)) = space.project(&space.sample(&mut rng)) {
            return Ok(x);
        }
    }
    Err(OptimizerError::InfeasibleSpace(format!(
        "base geometry and {FEASIBILITY_DRAWS} random draws all violate constraints"
    )))
}

fn multistart(
    space: &SearchSpace,
    m: ModulationScheme,
    budget: usize,
    seed: u64,
    restarts: usize,
) -> Result<Vec<Log>, OptimizerError> {
    let start = feasible_start(space, seed)?;
    let screen_count = if budget == 1 { 1 } else { budget / 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = vec![start];
    candidates.extend(space.latin_hypercube(screen_count - 1, &mut rng));

    let mut screen = Log::new();
    let mut screened: Vec<Evaluated> = Vec::new();
    for x in candidates {
        if let Some(e) = evaluate(space, m, &x)? {
            screen.values.push(e.value);
            screened.push(e);
        }
    }
    // Stable sort keeps screening order among equal values.
    let mut order: Vec<usize> = (0..screened.len()).collect();
    order.sort_by(|&a, &b| screened[b].value.total_cmp(&screened[a].value));
    for &i in order.iter().take(1) {
        screen.best = Some(Evaluated {
            x: screened[i].x.clone(),
            stack: screened[i].stack.clone(),
            value: screened[i].value,
        });
    }

    let remaining = budget - screen.values.len().min(budget);
    let starts: Vec<&Evaluated> = order.iter().take(restarts).map(|&i| &screened[i]).collect();
    let mut logs = vec![screen];
    if remaining == 0 || starts.is_empty() {
        return Ok(logs);
    }
    let share = remaining / starts.len();
    let extra = remaining % starts.len();
    let polished: Vec<Result<Log, OptimizerError>> = starts
        .par_iter()
        .enumerate()
        .map(|(r, s)| compass(space, m, s, share + usize::from(r < extra)))
        .collect();
    for log in polished {
        logs.push(log?);
    }
    Ok(logs)
}

fn compass(space: &SearchSpace, m: ModulationScheme, start: &Evaluated, budget: usize) -> Result<Log, OptimizerError> {
    let mut log = Log::new();
    let mut x = start.x.clone();
    let mut fx = start.value;
    let mut steps: Vec<f64> = space.params.iter().map(|p| 0.25 * (p.hi - p.lo)).collect();
    let floors: Vec<f64> = space.params.iter().map(|p| STEP_FLOOR * (p.hi - p.lo)).collect();
    let mut spent = 0;
    // Rejected proposals are capped too, so a tight box cannot stall the loop.
    let mut proposals = 0;
    while spent < budget && proposals < 20 * budget {
        if steps.iter().zip(&floors).all(|(s, f)| s <= f) {
            break;
        }
        let mut improved = false;
        'poll: for d in 0..x.len() {
            if steps[d] <= floors[d] {
                continue;
            }
            for sign in [1.0, -1.0] {
                if spent >= budget {
                    break 'poll;
                }
                let mut y = x.clone();
                y[d] += sign * steps[d];
                let y = space.clamp(&y);
                if y == x {
                    continue;
                }
                proposals += 1;
                let Some(e) = evaluate(space, m, &y)? else { continue };
                spent += 1;
                let better = e.value > fx;
                let (ex, ev) = (e.x.clone(), e.value);
                log.record(e);
                if better {
                    x = ex;
                    fx = ev;
                    improved = true;
                    break 'poll;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    Ok(log)
}
