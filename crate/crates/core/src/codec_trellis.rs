//! Trellis DCC and Viterbi sequence detection over complex branch metrics.
//!
//! Three ways to give the diffracted code memory:
//!
//! * `ExtraAtoms`: layer 1 carries the current frame and `mu` delayed
//!   frames side by side, so `v_t = G·[s(d_t); s(d_{t−1}); …; s(d_{t−mu})]`.
//! * `AfterMemory`: a memory surface after the encoding hop applies
//!   `{0, π}` phases chosen by the previous frame's bits:
//!   `v_t = Φ(d_{t−1})·G·s(d_t)`.
//! * `AheadMemory`: a memory surface ahead of the data surface radiates
//!   `s(d_t ⊕ d_{t−1})`, the data surface applies the phases of `s(d_t)`
//!   and the result is diffracted: `v_t = G·Φ_data(d_t)·D·s_mem`.
//!
//! Every run starts in the all-zero state and ends with `mu` all-zero
//! flush frames.

use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::codec_block::{mat_vec, Codeword};
use crate::diffraction::{build_generator, propagation_matrix, DiffractionError, GeneratorMatrix, Normalization};
use crate::geometry::{Point3, RisStack};
use crate::modem::{Dataword, ModulationScheme};

/// Largest trellis (in states) the Viterbi decoder accepts.
pub const MAX_STATES: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum TrellisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown trellis variant {0:?}")]
    UnknownVariant(String),
    #[error("invalid trellis spec: {0}")]
    InvalidSpec(String),
    #[error("trellis has 2^{log2_states} states, limit is 2^16")]
    StateSpaceTooLarge { log2_states: usize },
    #[error("received sequence of {got} frames is shorter than the {mu} flush frames")]
    SequenceTooShort { got: usize, mu: usize },
    #[error(transparent)]
    Diffraction(#[from] DiffractionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrellisVariant {
    AfterMemory,
    AheadMemory,
    ExtraAtoms,
}

impl TrellisVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::AfterMemory => "after_memory",
            Self::AheadMemory => "ahead_memory",
            Self::ExtraAtoms => "extra_atoms",
        }
    }
}

impl fmt::Display for TrellisVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrellisVariant {
    type Err = TrellisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "after_memory" => Ok(Self::AfterMemory),
            "ahead_memory" => Ok(Self::AheadMemory),
            "extra_atoms" => Ok(Self::ExtraAtoms),
            _ => Err(TrellisError::UnknownVariant(s.to_string())),
        }
    }
}

/// `k` data atoms per frame, `n` outputs per frame, memory `mu` frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrellisSpec {
    pub variant: TrellisVariant,
    pub k: usize,
    pub n: usize,
    pub mu: usize,
    pub scheme: ModulationScheme,
}

impl TrellisSpec {
    pub fn new(
        variant: TrellisVariant,
        k: usize,
        n: usize,
        mu: usize,
        scheme: ModulationScheme,
    ) -> Result<Self, TrellisError> {
        if k == 0 || n == 0 {
            return Err(TrellisError::InvalidSpec("k and n must be positive".into()));
        }
        match variant {
            // mu = 0 is the memoryless degenerate case, kept for comparison
            // with block encoding.
            TrellisVariant::ExtraAtoms => {}
            TrellisVariant::AfterMemory | TrellisVariant::AheadMemory if mu != 1 => {
                return Err(TrellisError::InvalidSpec(format!("{variant} remembers exactly one frame, got mu = {mu}")));
            }
            _ => {}
        }
        Ok(Self { variant, k, n, mu, scheme })
    }

    /// The (2,1,3) configuration: one data atom, two outputs, three frames of memory.
    pub fn conv_213(scheme: ModulationScheme) -> Self {
        Self {
            variant: TrellisVariant::ExtraAtoms,
            k: 1,
            n: 2,
            mu: 3,
            scheme,
        }
    }

    pub fn bits_per_frame(&self) -> usize {
        self.k * self.scheme.bits_per_symbol()
    }

    pub fn log2_states(&self) -> usize {
        self.bits_per_frame() * self.mu
    }

    pub fn state_count(&self) -> usize {
        1usize << self.log2_states()
    }

    pub fn input_count(&self) -> usize {
        1usize << self.bits_per_frame()
    }

    pub fn frame_index(&self, d: &Dataword) -> usize {
        let b = self.scheme.bits_per_symbol();
        d.0.iter().fold(0usize, |acc, &s| (acc << b) | s as usize)
    }

    pub fn frame(&self, index: usize) -> Dataword {
        Dataword::from_index(index, self.k, self.scheme)
    }

    /// State index with the most recent frame in the most significant bits.
    pub fn state_index(&self, state: &TrellisState) -> usize {
        let kb = self.bits_per_frame();
        state.frames.iter().fold(0usize, |acc, f| (acc << kb) | self.frame_index(f))
    }

    pub fn state(&self, index: usize) -> TrellisState {
        let kb = self.bits_per_frame();
        let mask = (1usize << kb) - 1;
        TrellisState {
            frames: (0..self.mu)
                .map(|age| self.frame((index >> ((self.mu - 1 - age) * kb)) & mask))
                .collect(),
        }
    }

    pub fn next_state(&self, state: usize, input: usize) -> usize {
        if self.mu == 0 {
            return 0;
        }
        let kb = self.bits_per_frame();
        (input << (kb * (self.mu - 1))) | (state >> kb)
    }
}

/// The last `mu` frames, most recent first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrellisState {
    pub frames: Vec<Dataword>,
}

impl TrellisState {
    pub fn zero(spec: &TrellisSpec) -> Self {
        Self {
            frames: vec![Dataword::zeros(spec.k); spec.mu],
        }
    }

    /// Shift `d_t` in, dropping the oldest frame.
    pub fn push(&mut self, d: Dataword) {
        if self.frames.is_empty() {
            return;
        }
        self.frames.pop();
        self.frames.insert(0, d);
    }
}

/// Diffraction matrices of a trellis code.
#[derive(Debug, Clone, PartialEq)]
pub struct TrellisGenerator {
    /// `n × k·(mu+1)` for `ExtraAtoms`, `n × k` otherwise.
    pub encoder: GeneratorMatrix,
    /// `k × k` memory-to-data hop, `AheadMemory` only.
    pub memory_hop: Option<DMatrix<Complex64>>,
}

impl TrellisGenerator {
    pub fn new(encoder: GeneratorMatrix, memory_hop: Option<DMatrix<Complex64>>) -> Self {
        Self { encoder, memory_hop }
    }
}

fn mismatch(msg: String) -> TrellisError {
    TrellisError::DimensionMismatch(msg)
}

fn check_parts(spec: &TrellisSpec, parts: &TrellisGenerator) -> Result<(), TrellisError> {
    let cols = match spec.variant {
        TrellisVariant::ExtraAtoms => spec.k * (spec.mu + 1),
        _ => spec.k,
    };
    if parts.encoder.rows() != spec.n || parts.encoder.cols() != cols {
        return Err(mismatch(format!(
            "encoder is {}x{}, spec needs {}x{cols}",
            parts.encoder.rows(),
            parts.encoder.cols(),
            spec.n
        )));
    }
    if spec.variant == TrellisVariant::AheadMemory {
        match &parts.memory_hop {
            Some(d) if d.nrows() == spec.k && d.ncols() == spec.k => {}
            _ => return Err(mismatch(format!("ahead_memory needs a {0}x{0} memory hop", spec.k))),
        }
    }
    Ok(())
}

fn check_frame(spec: &TrellisSpec, d: &Dataword) -> Result<(), TrellisError> {
    if d.len() != spec.k {
        return Err(mismatch(format!("frame has {} symbols, spec k = {}", d.len(), spec.k)));
    }
    if let Some(&s) = d.0.iter().find(|&&s| s as usize >= spec.scheme.order()) {
        return Err(mismatch(format!("symbol {s} outside {} alphabet", spec.scheme)));
    }
    Ok(())
}

fn modulated(spec: &TrellisSpec, d: &Dataword) -> std::vec::IntoIter<Complex64> {
    d.0.iter().map(|&s| spec.scheme.point(s)).collect::<Vec<_>>().into_iter()
}

/// One branch of the trellis: the `n` outputs for input `d_t` from `state`.
pub fn trellis_output(
    spec: &TrellisSpec,
    parts: &TrellisGenerator,
    state: &TrellisState,
    d_t: &Dataword,
) -> Result<Codeword, TrellisError> {
    check_parts(spec, parts)?;
    check_frame(spec, d_t)?;
    if state.frames.len() != spec.mu {
        return Err(mismatch(format!("state holds {} frames, mu = {}", state.frames.len(), spec.mu)));
    }
    for f in &state.frames {
        check_frame(spec, f)?;
    }
    Ok(branch_output(spec, parts, state, d_t))
}

fn branch_output(spec: &TrellisSpec, parts: &TrellisGenerator, state: &TrellisState, d_t: &Dataword) -> Codeword {
    let g = parts.encoder.entries();
    match spec.variant {
        TrellisVariant::ExtraAtoms => {
            let mut u: Vec<Complex64> = modulated(spec, d_t).collect();
            for f in &state.frames {
                u.extend(modulated(spec, f));
            }
            Codeword(mat_vec(g, &u))
        }
        TrellisVariant::AfterMemory => {
            let s: Vec<Complex64> = modulated(spec, d_t).collect();
            let phases = state.frames[0].to_bits(spec.scheme);
            let v = mat_vec(g, &s)
                .into_iter()
                .enumerate()
                .map(|(i, x)| if phases[i % phases.len()] == 0 { x } else { -x })
                .collect();
            Codeword(v)
        }
        TrellisVariant::AheadMemory => {
            let memory_hop = parts.memory_hop.as_ref().expect("checked by check_parts");
            let s_mem: Vec<Complex64> = modulated(spec, &d_t.xor(&state.frames[0])).collect();
            let at_data = mat_vec(memory_hop, &s_mem);
            let shaped: Vec<Complex64> = at_data
                .into_iter()
                .zip(modulated(spec, d_t))
                .map(|(x, p)| x * (p / p.norm()))
                .collect();
            Codeword(mat_vec(g, &shaped))
        }
    }
}

/// Encode a data sequence followed by `mu` all-zero flush frames.
pub fn encode_sequence(
    spec: &TrellisSpec,
    parts: &TrellisGenerator,
    data: &[Dataword],
) -> Result<Vec<Codeword>, TrellisError> {
    check_parts(spec, parts)?;
    let mut state = TrellisState::zero(spec);
    let flush = std::iter::repeat_n(Dataword::zeros(spec.k), spec.mu);
    let mut out = Vec::with_capacity(data.len() + spec.mu);
    for d in data.iter().cloned().chain(flush) {
        check_frame(spec, &d)?;
        out.push(branch_output(spec, parts, &state, &d));
        state.push(d);
    }
    Ok(out)
}

/// Minimum-metric path search with lexicographic tie-breaking.
///
/// Starts in state 0 and returns the input sequence (and its metric) of the
/// best path that ends in state 0 after `steps` steps. When several paths
/// share the minimum metric the lexicographically smallest input sequence
/// wins. Survivors are kept as traceback pointers; an exact metric tie is
/// settled by walking both histories back to the state where they merge.
pub(crate) fn viterbi_search(
    num_states: usize,
    steps: usize,
    inputs: impl Fn(usize) -> Range<usize>,
    next_state: impl Fn(usize, usize) -> usize,
    branch_metric: impl Fn(usize, usize, usize) -> f64,
) -> Option<(Vec<usize>, f64)> {
    const NONE: u32 = u32::MAX;
    // back[t·S + s] = (previous state, input) of the survivor in state s
    // after step t.
    let mut back: Vec<(u32, u32)> = vec![(NONE, NONE); steps * num_states];
    let mut metric = vec![f64::INFINITY; num_states];
    metric[0] = 0.0;
    let mut next = vec![f64::INFINITY; num_states];
    for t in 0..steps {
        next.fill(f64::INFINITY);
        let row = t * num_states;
        for s in 0..num_states {
            if metric[s] == f64::INFINITY {
                continue;
            }
            for u in inputs(t) {
                let ns = next_state(s, u);
                let candidate = metric[s] + branch_metric(t, s, u);
                let current = back[row + ns];
                let better = candidate < next[ns]
                    || (candidate == next[ns]
                        && current.0 != NONE
                        && lex_less(&back, num_states, t, (s, u), (current.0 as usize, current.1 as usize)));
                if better {
                    next[ns] = candidate;
                    back[row + ns] = (s as u32, u as u32);
                }
            }
        }
        std::mem::swap(&mut metric, &mut next);
    }
    if metric[0] == f64::INFINITY {
        return None;
    }
    let mut path = vec![0usize; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        let (prev, u) = back[t * num_states + state];
        path[t] = u as usize;
        state = prev as usize;
    }
    Some((path, metric[0]))
}

/// Is the history ending in `(a_state, a_input)` at step `t` smaller than
/// the one ending in `(b_state, b_input)`? Both prefixes are survivors at
/// step `t − 1`.
fn lex_less(back: &[(u32, u32)], num_states: usize, t: usize, a: (usize, usize), b: (usize, usize)) -> bool {
    let (mut sa, mut sb) = (a.0, b.0);
    // Inputs seen while walking back, latest first; the last pair where
    // the inputs differ is the first divergence reading forward.
    let mut first_diff = (a.1 != b.1).then_some((a.1, b.1));
    let mut step = t;
    while sa != sb {
        step -= 1;
        let (pa, ua) = back[step * num_states + sa];
        let (pb, ub) = back[step * num_states + sb];
        if ua != ub {
            first_diff = Some((ua as usize, ub as usize));
        }
        sa = pa as usize;
        sb = pb as usize;
    }
    matches!(first_diff, Some((x, y)) if x < y)
}

/// ML sequence detection: the data frames minimizing
/// `Σ_t ‖y_t − out(state_t, d_t)‖²` over terminated paths.
///
/// `y` includes the `mu` flush frames; only the data frames are returned.
/// The squared-distance metric is proportional to the log-likelihood for
/// any noise variance, so `noise_var` only has to be non-negative.
pub fn viterbi_dcc(
    spec: &TrellisSpec,
    parts: &TrellisGenerator,
    y: &[Vec<Complex64>],
    noise_var: f64,
) -> Result<Vec<Dataword>, TrellisError> {
    if spec.log2_states() > 16 {
        return Err(TrellisError::StateSpaceTooLarge {
            log2_states: spec.log2_states(),
        });
    }
    if spec.bits_per_frame() > 16 {
        return Err(TrellisError::InvalidSpec("more than 2^16 branches per state".into()));
    }
    if !(noise_var >= 0.0) {
        return Err(TrellisError::InvalidSpec(format!("noise variance {noise_var}")));
    }
    check_parts(spec, parts)?;
    if y.len() < spec.mu {
        return Err(TrellisError::SequenceTooShort { got: y.len(), mu: spec.mu });
    }
    if let Some(bad) = y.iter().find(|v| v.len() != spec.n) {
        return Err(mismatch(format!("received frame of length {}, n = {}", bad.len(), spec.n)));
    }

    Ok(viterbi_with_table(spec, &BranchTable::new(spec, parts), y))
}

/// [`viterbi_dcc`] against a prebuilt branch table; `y` must already be
/// validated (`mu` flush frames, `n` entries each).
pub fn viterbi_with_table(spec: &TrellisSpec, table: &BranchTable, y: &[Vec<Complex64>]) -> Vec<Dataword> {
    let data_frames = y.len() - spec.mu;
    let (path, _) = viterbi_search(
        spec.state_count(),
        y.len(),
        |t| if t < data_frames { 0..spec.input_count() } else { 0..1 },
        |s, u| spec.next_state(s, u),
        |t, s, u| table.distance_sq(s, u, &y[t]),
    )
    .expect("state 0 is reachable through the flush frames");
    path[..data_frames].iter().map(|&u| spec.frame(u)).collect()
}

/// Precomputed outputs for every `(state, input)` pair.
pub struct BranchTable {
    inputs: usize,
    n: usize,
    outputs: Vec<Complex64>,
}

impl BranchTable {
    pub fn new(spec: &TrellisSpec, parts: &TrellisGenerator) -> Self {
        let inputs = spec.input_count();
        let mut outputs = Vec::with_capacity(spec.state_count() * inputs * spec.n);
        for s in 0..spec.state_count() {
            let state = spec.state(s);
            for u in 0..inputs {
                outputs.extend(branch_output(spec, parts, &state, &spec.frame(u)).0);
            }
        }
        Self {
            inputs,
            n: spec.n,
            outputs,
        }
    }

    pub fn output(&self, state: usize, input: usize) -> &[Complex64] {
        let at = (state * self.inputs + input) * self.n;
        &self.outputs[at..at + self.n]
    }

    fn distance_sq(&self, state: usize, input: usize, y: &[Complex64]) -> f64 {
        self.output(state, input).iter().zip(y).map(|(a, b)| (b - a).norm_sqr()).sum()
    }

    /// Mean branch energy over uniformly distributed states and inputs.
    pub fn mean_energy(&self) -> f64 {
        let branches = self.outputs.len() / self.n;
        self.outputs.iter().map(|v| v.norm_sqr()).sum::<f64>() / branches as f64
    }
}

/// Assemble the diffraction matrices of a trellis code from geometry.
///
/// `ExtraAtoms` needs `k·(mu+1)` layer-1 atoms (current frame first) and
/// `n` layer-2 atoms; one normalization constant is applied to the whole
/// matrix. The other variants need `k` and `n` atoms. For `AheadMemory`
/// the memory surface is layer 1 mirrored one interlayer distance behind
/// it, and the memory hop is normalized to `‖D‖_F² = k`.
pub fn build_trellis_generator(stack: &RisStack, spec: &TrellisSpec) -> Result<TrellisGenerator, TrellisError> {
    let l1 = stack.layer1().len();
    let l2 = stack.layer2().len();
    let need_l1 = match spec.variant {
        TrellisVariant::ExtraAtoms => spec.k * (spec.mu + 1),
        _ => spec.k,
    };
    if l1 != need_l1 || l2 != spec.n {
        return Err(mismatch(format!(
            "{} trellis needs {need_l1} and {} atoms, stack has {l1} and {l2}",
            spec.variant, spec.n
        )));
    }
    let encoder = build_generator(stack, Normalization::UnitFrobenius, 0.0)?;
    let memory_hop = match spec.variant {
        TrellisVariant::AheadMemory => {
            let dz = stack.separation_m();
            let memory: Vec<Point3> = stack
                .layer1()
                .positions()
                .iter()
                .map(|p| Point3::new(p.x, p.y, p.z - dz))
                .collect();
            let raw = propagation_matrix(&memory, stack.layer1().positions(), stack.carrier().wavelength_m())?;
            let d = GeneratorMatrix::from_entries(raw, Normalization::UnitFrobenius)?;
            Some(d.entries().clone())
        }
        _ => None,
    };
    Ok(TrellisGenerator { encoder, memory_hop })
}

/// CSV dump `state,input,next_state,output_index,re,im` of every branch.
pub fn write_trellis_csv<W: Write>(spec: &TrellisSpec, parts: &TrellisGenerator, mut out: W) -> std::io::Result<()> {
    writeln!(out, "state,input,next_state,output_index,re,im")?;
    let table = BranchTable::new(spec, parts);
    for s in 0..spec.state_count() {
        for u in 0..spec.input_count() {
            for (i, v) in table.output(s, u).iter().enumerate() {
                writeln!(out, "{s},{u},{},{i},{:.16e},{:.16e}", spec.next_state(s, u), v.re, v.im)?;
            }
        }
    }
    Ok(())
}
