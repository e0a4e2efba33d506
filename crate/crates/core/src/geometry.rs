//! Carrier, meta-atom layers and two-layer RIS stacks.
//!
//! A [`RisStack`] is the physical object that defines a diffractional code:
//! a first layer of `K·L` atoms feeding a second, parallel layer of `M·N`
//! atoms. All coordinates are absolute positions in meters and every layer
//! is strictly planar.
//!
//! Physical constraints are checked by [`validate_stack`], which returns the
//! violations as data rather than failing. Presets run the same check and
//! refuse to build a stack that breaks them.

use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Smallest allowed nearest-neighbor pitch inside a layer, in wavelengths.
pub const MIN_SPACING_WAVELENGTHS: f64 = 0.1;
/// Largest allowed nearest-neighbor pitch inside a layer, in wavelengths.
pub const MAX_SPACING_WAVELENGTHS: f64 = 0.5;
/// Interlayer distance below which the Rayleigh–Sommerfeld model is not trusted.
pub const MIN_SEPARATION_WAVELENGTHS: f64 = 10.0;

// Relative slack on the spacing and separation bounds so that presets placed
// exactly on a bound (e.g. pitch λ/2) are not rejected by rounding.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid carrier frequency {0} Hz")]
    InvalidFrequency(f64),
    #[error("malformed layer: {0}")]
    MalformedLayer(String),
    #[error("malformed stack: {0}")]
    MalformedStack(String),
    #[error("constraint violation:\n{0}")]
    ConstraintViolation(ValidationReport),
    #[error("geometry file line {line}: {message}")]
    FileFormat { line: usize, message: String },
    #[error("geometry file i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A 3-D coordinate in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let dz = other.z - self.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    fn in_plane_distance(&self, other: &Point3) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

/// Carrier frequency and the derived free-space wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierSpec {
    frequency_hz: f64,
    wavelength_m: f64,
}

impl CarrierSpec {
    pub fn new(frequency_hz: f64) -> Result<Self, GeometryError> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(GeometryError::InvalidFrequency(frequency_hz));
        }
        Ok(Self {
            frequency_hz,
            wavelength_m: SPEED_OF_LIGHT / frequency_hz,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }
}

/// One planar layer of meta-atoms, stored row-major (`rows × cols`).
#[derive(Debug, Clone, PartialEq)]
pub struct MetaAtomLayer {
    positions: Vec<Point3>,
    rows: usize,
    cols: usize,
    plane_z: f64,
}

impl MetaAtomLayer {
    pub fn new(positions: Vec<Point3>, rows: usize, cols: usize) -> Result<Self, GeometryError> {
        if positions.is_empty() {
            return Err(GeometryError::MalformedLayer("layer has no atoms".into()));
        }
        if rows == 0 || cols == 0 || rows * cols != positions.len() {
            return Err(GeometryError::MalformedLayer(format!(
                "{rows}x{cols} shape does not match {} atoms",
                positions.len()
            )));
        }
        let plane_z = positions[0].z;
        for (i, p) in positions.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(GeometryError::MalformedLayer(format!("atom {i} has a non-finite coordinate")));
            }
            if p.z != plane_z {
                return Err(GeometryError::MalformedLayer(format!(
                    "atom {i} at z={} is off the layer plane z={plane_z}",
                    p.z
                )));
            }
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if positions[i] == positions[j] {
                    return Err(GeometryError::MalformedLayer(format!("atoms {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            positions,
            rows,
            cols,
            plane_z,
        })
    }

    /// A single row of atoms at the given `(x, y)` offsets on plane `z`.
    pub fn row(xy: &[(f64, f64)], z: f64) -> Result<Self, GeometryError> {
        let positions = xy.iter().map(|&(x, y)| Point3::new(x, y, z)).collect::<Vec<_>>();
        let n = positions.len();
        Self::new(positions, 1, n)
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn plane_z(&self) -> f64 {
        self.plane_z
    }

    /// Unordered nearest-neighbor pairs `(i, j, distance)` with `i < j`.
    ///
    /// Every atom contributes the pair to its closest neighbor; pairs found
    /// from both ends are reported once. Ties pick the smaller index.
    fn nearest_neighbor_pairs(&self) -> Vec<(usize, usize, f64)> {
        let n = self.positions.len();
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = self.positions[i].in_plane_distance(&self.positions[j]);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            if let Some((j, d)) = best {
                let key = (i.min(j), i.max(j));
                if !pairs.iter().any(|&(a, b, _)| (a, b) == key) {
                    pairs.push((key.0, key.1, d));
                }
            }
        }
        pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        pairs
    }
}

/// Two parallel layers plus the carrier they operate at.
///
/// `memory_frames` is zero for block codes. A trellis stack built with
/// extra first-layer atoms carries `k·(memory_frames + 1)` atoms on layer 1,
/// of which only `k` take a new symbol each frame; the dimension-expansion
/// rule is applied to those `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RisStack {
    carrier: CarrierSpec,
    layer1: MetaAtomLayer,
    layer2: MetaAtomLayer,
    separation_m: f64,
    allow_near_field: bool,
    memory_frames: usize,
}

impl RisStack {
    pub fn new(carrier: CarrierSpec, layer1: MetaAtomLayer, layer2: MetaAtomLayer) -> Result<Self, GeometryError> {
        Self::build(carrier, layer1, layer2, 0)
    }

    /// A trellis stack whose first layer holds the current frame followed by
    /// `memory_frames` delayed frames.
    pub fn with_memory_frames(
        carrier: CarrierSpec,
        layer1: MetaAtomLayer,
        layer2: MetaAtomLayer,
        memory_frames: usize,
    ) -> Result<Self, GeometryError> {
        Self::build(carrier, layer1, layer2, memory_frames)
    }

    fn build(
        carrier: CarrierSpec,
        layer1: MetaAtomLayer,
        layer2: MetaAtomLayer,
        memory_frames: usize,
    ) -> Result<Self, GeometryError> {
        let separation_m = layer2.plane_z - layer1.plane_z;
        if !(separation_m > 0.0) {
            return Err(GeometryError::MalformedStack(format!(
                "layer 2 must sit above layer 1 (separation {separation_m} m)"
            )));
        }
        if layer1.len() % (memory_frames + 1) != 0 {
            return Err(GeometryError::MalformedStack(format!(
                "{} layer-1 atoms cannot be split into {} frames",
                layer1.len(),
                memory_frames + 1
            )));
        }
        Ok(Self {
            carrier,
            layer1,
            layer2,
            separation_m,
            allow_near_field: false,
            memory_frames,
        })
    }

    /// Accept interlayer distances below 10λ during validation.
    pub fn allowing_near_field(mut self, allow: bool) -> Self {
        self.allow_near_field = allow;
        self
    }

    pub fn carrier(&self) -> &CarrierSpec {
        &self.carrier
    }

    pub fn layer1(&self) -> &MetaAtomLayer {
        &self.layer1
    }

    pub fn layer2(&self) -> &MetaAtomLayer {
        &self.layer2
    }

    pub fn separation_m(&self) -> f64 {
        self.separation_m
    }

    pub fn allow_near_field(&self) -> bool {
        self.allow_near_field
    }

    pub fn memory_frames(&self) -> usize {
        self.memory_frames
    }

    /// Number of fresh input symbols per frame.
    pub fn input_dimension(&self) -> usize {
        self.layer1.len() / (self.memory_frames + 1)
    }

    pub fn output_dimension(&self) -> usize {
        self.layer2.len()
    }

    /// All `layer1 × layer2` atom-pair distances, layer-2 index major.
    pub fn cross_layer_distances(&self) -> Vec<f64> {
        self.layer2
            .positions
            .iter()
            .flat_map(|q| self.layer1.positions.iter().map(move |p| p.distance(q)))
            .collect()
    }

    /// Rebuild the stack with every atom passed through `f`, keeping the
    /// layer shapes, override flag and memory depth.
    pub fn map_positions(
        &self,
        mut f: impl FnMut(usize, usize, Point3) -> Point3,
    ) -> Result<Self, GeometryError> {
        let l1 = self
            .layer1
            .positions
            .iter()
            .enumerate()
            .map(|(i, &p)| f(0, i, p))
            .collect();
        let l2 = self
            .layer2
            .positions
            .iter()
            .enumerate()
            .map(|(i, &p)| f(1, i, p))
            .collect();
        let layer1 = MetaAtomLayer::new(l1, self.layer1.rows, self.layer1.cols)?;
        let layer2 = MetaAtomLayer::new(l2, self.layer2.rows, self.layer2.cols)?;
        Ok(Self::build(self.carrier, layer1, layer2, self.memory_frames)?.allowing_near_field(self.allow_near_field))
    }
}

/// Machine-readable constraint identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    SpacingBelowMin,
    SpacingAboveMax,
    SeparationBelowRsValidity,
    DimensionNotExpanding,
}

impl Constraint {
    pub fn id(&self) -> &'static str {
        match self {
            Constraint::SpacingBelowMin => "spacing_below_min",
            Constraint::SpacingAboveMax => "spacing_above_max",
            Constraint::SeparationBelowRsValidity => "separation_below_rs_validity",
            Constraint::DimensionNotExpanding => "dimension_not_expanding",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Atoms involved in a violation, as `(layer, index)` with layers numbered 1 and 2.
pub type AtomRef = (u8, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub atoms: Vec<AtomRef>,
    /// The offending quantity in meters (or a count for dimension checks).
    pub measured: f64,
    /// The bound that was broken, same units as `measured`.
    pub bound: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: measured={} bound={}", self.constraint, self.measured, self.bound)?;
        if !self.atoms.is_empty() {
            f.write_str(" atoms=")?;
            for (n, (layer, idx)) in self.atoms.iter().enumerate() {
                if n > 0 {
                    f.write_str(",")?;
                }
                write!(f, "L{layer}[{idx}]")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, constraint: Constraint) -> bool {
        self.violations.iter().any(|v| v.constraint == constraint)
    }
}

/// One `constraint_id: detail` line per violation.
impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check a stack against the in-plane pitch bounds, the interlayer distance
/// and the dimension-expansion rule.
pub fn validate_stack(stack: &RisStack) -> ValidationReport {
    let lambda = stack.carrier.wavelength_m;
    let min_pitch = MIN_SPACING_WAVELENGTHS * lambda;
    let max_pitch = MAX_SPACING_WAVELENGTHS * lambda;
    let mut violations = Vec::new();

    for (layer_no, layer) in [(1u8, &stack.layer1), (2u8, &stack.layer2)] {
        for (i, j, d) in layer.nearest_neighbor_pairs() {
            let atoms = vec![(layer_no, i), (layer_no, j)];
            if d < min_pitch * (1.0 - BOUND_SLACK) {
                violations.push(Violation {
                    constraint: Constraint::SpacingBelowMin,
                    atoms,
                    measured: d,
                    bound: min_pitch,
                });
            } else if d > max_pitch * (1.0 + BOUND_SLACK) {
                violations.push(Violation {
                    constraint: Constraint::SpacingAboveMax,
                    atoms,
                    measured: d,
                    bound: max_pitch,
                });
            }
        }
    }

    let min_sep = MIN_SEPARATION_WAVELENGTHS * lambda;
    if !stack.allow_near_field && stack.separation_m < min_sep * (1.0 - BOUND_SLACK) {
        violations.push(Violation {
            constraint: Constraint::SeparationBelowRsValidity,
            atoms: Vec::new(),
            measured: stack.separation_m,
            bound: min_sep,
        });
    }

    let k = stack.input_dimension();
    let n = stack.output_dimension();
    if k >= n {
        violations.push(Violation {
            constraint: Constraint::DimensionNotExpanding,
            atoms: Vec::new(),
            measured: k as f64,
            bound: n as f64,
        });
    }

    ValidationReport { violations }
}

fn checked(stack: RisStack) -> Result<RisStack, GeometryError> {
    let report = validate_stack(&stack);
    if report.is_empty() {
        Ok(stack)
    } else {
        Err(GeometryError::ConstraintViolation(report))
    }
}

/// (4,2) repetition block code: two atoms at `x = ±a/2` feeding four atoms
/// at `(±a/2, ±h)`, separated by `dz`.
///
/// Layer-2 rows are ordered `(−a/2, h), (a/2, h), (−a/2, −h), (a/2, −h)` so
/// that outputs 3 and 4 repeat outputs 1 and 2.
pub fn preset_repetition_42(carrier: CarrierSpec, a: f64, h: f64, dz: f64) -> Result<RisStack, GeometryError> {
    let layer1 = MetaAtomLayer::row(&[(-a / 2.0, 0.0), (a / 2.0, 0.0)], 0.0)?;
    let layer2 = MetaAtomLayer::new(
        vec![
            Point3::new(-a / 2.0, h, dz),
            Point3::new(a / 2.0, h, dz),
            Point3::new(-a / 2.0, -h, dz),
            Point3::new(a / 2.0, -h, dz),
        ],
        2,
        2,
    )?;
    checked(RisStack::new(carrier, layer1, layer2)?)
}

/// (4,2) systematic block code: four atoms on a line with pitch `d`, the two
/// first-layer atoms aligned with the inner pair.
///
/// Layer-2 rows are ordered inner pair first (`−d/2, d/2`), then the outer
/// pair (`−3d/2, 3d/2`).
pub fn preset_systematic_42(carrier: CarrierSpec, d: f64, dz: f64) -> Result<RisStack, GeometryError> {
    let layer1 = MetaAtomLayer::row(&[(-0.5 * d, 0.0), (0.5 * d, 0.0)], 0.0)?;
    let layer2 = MetaAtomLayer::row(&[(-0.5 * d, 0.0), (0.5 * d, 0.0), (-1.5 * d, 0.0), (1.5 * d, 0.0)], dz)?;
    checked(RisStack::new(carrier, layer1, layer2)?)
}

/// Parameters for the (7,4) stand-in layouts.
#[derive(Debug, Clone)]
pub enum Preset74 {
    /// Four and seven atoms on centered lines with a common pitch.
    EvenlySpaced { pitch: f64, dz: f64 },
    /// Atoms `pitch` apart in small clusters spread over the aperture:
    /// two layer-1 pairs at `x = ±spread/2`, and layer-2 clusters of 2, 2
    /// and 3 atoms centered `spread/2` from the axis at 90°, 210° and 330°.
    /// Cluster members are contiguous in atom order (see [`CLUSTERS_74`]).
    Clustered { pitch: f64, spread: f64, dz: f64 },
    /// Geometry loaded from a file in the [`write_geometry`] format.
    FromFile(std::path::PathBuf),
}

/// `(layer, atoms)` of each cluster in [`Preset74::Clustered`].
pub const CLUSTERS_74: [(u8, std::ops::Range<usize>); 5] = [(1, 0..2), (1, 2..4), (2, 0..2), (2, 2..4), (2, 4..7)];

pub fn preset_74(carrier: CarrierSpec, variant: &Preset74) -> Result<RisStack, GeometryError> {
    let stack = match variant {
        Preset74::EvenlySpaced { pitch, dz } => {
            let line = |n: usize| -> Vec<(f64, f64)> {
                (0..n)
                    .map(|i| ((i as f64 - (n as f64 - 1.0) / 2.0) * pitch, 0.0))
                    .collect()
            };
            let layer1 = MetaAtomLayer::row(&line(4), 0.0)?;
            let layer2 = MetaAtomLayer::row(&line(7), *dz)?;
            RisStack::new(carrier, layer1, layer2)?
        }
        Preset74::Clustered { pitch, spread, dz } => {
            let cluster = |cx: f64, cy: f64, n: usize| -> Vec<(f64, f64)> {
                (0..n)
                    .map(|i| (cx + (i as f64 - (n as f64 - 1.0) / 2.0) * pitch, cy))
                    .collect()
            };
            let mut l1 = cluster(-spread / 2.0, 0.0, 2);
            l1.extend(cluster(spread / 2.0, 0.0, 2));
            let mut l2 = Vec::new();
            for (deg, n) in [(90.0f64, 2), (210.0, 2), (330.0, 3)] {
                let (sin, cos) = deg.to_radians().sin_cos();
                l2.extend(cluster(spread / 2.0 * cos, spread / 2.0 * sin, n));
            }
            let layer1 = MetaAtomLayer::row(&l1, 0.0)?;
            let layer2 = MetaAtomLayer::row(&l2, *dz)?;
            RisStack::new(carrier, layer1, layer2)?
        }
        Preset74::FromFile(path) => {
            let file = std::fs::File::open(path)?;
            let stack = read_geometry(std::io::BufReader::new(file))?;
            if carrier.frequency_hz() != stack.carrier().frequency_hz() {
                return Err(GeometryError::MalformedStack(format!(
                    "file carrier {} Hz differs from requested {} Hz",
                    stack.carrier().frequency_hz(),
                    carrier.frequency_hz()
                )));
            }
            stack
        }
    };
    if stack.layer1().len() != 4 || stack.layer2().len() != 7 {
        let report = validate_stack(&stack);
        if !report.is_empty() {
            return Err(GeometryError::ConstraintViolation(report));
        }
        return Err(GeometryError::MalformedStack(format!(
            "(7,4) layout needs 4 and 7 atoms, got {} and {}",
            stack.layer1().len(),
            stack.layer2().len()
        )));
    }
    checked(stack)
}

/// (2,1,3) trellis stand-in with extra first-layer atoms: four atoms on a
/// line of pitch `pitch` (current frame first, then three delayed frames)
/// feeding two output atoms placed off-axis so the four columns differ.
pub fn preset_trellis_213(carrier: CarrierSpec, pitch: f64, dz: f64) -> Result<RisStack, GeometryError> {
    let layer1 = MetaAtomLayer::row(
        &[(-1.5 * pitch, 0.0), (-0.5 * pitch, 0.0), (0.5 * pitch, 0.0), (1.5 * pitch, 0.0)],
        0.0,
    )?;
    let layer2 = MetaAtomLayer::row(&[(-0.45 * pitch, 0.2 * pitch), (0.35 * pitch, -0.2 * pitch)], dz)?;
    checked(RisStack::with_memory_frames(carrier, layer1, layer2, 3)?)
}

/// Write a stack in the plain-text geometry format.
///
/// ```text
/// frequency_hz 25000000000
/// shape 1 1 2
/// shape 2 2 2
/// memory_frames 0
/// allow_near_field 0
/// 1 -0.003 0 0
/// ...
/// ```
///
/// Atom lines are `layer_index x y z` in meters, printed with the shortest
/// representation that parses back to the identical `f64`.
pub fn write_geometry<W: Write>(stack: &RisStack, mut out: W) -> std::io::Result<()> {
    writeln!(out, "frequency_hz {}", stack.carrier.frequency_hz)?;
    writeln!(out, "shape 1 {} {}", stack.layer1.rows, stack.layer1.cols)?;
    writeln!(out, "shape 2 {} {}", stack.layer2.rows, stack.layer2.cols)?;
    writeln!(out, "memory_frames {}", stack.memory_frames)?;
    writeln!(out, "allow_near_field {}", u8::from(stack.allow_near_field))?;
    for (layer_no, layer) in [(1, &stack.layer1), (2, &stack.layer2)] {
        for p in &layer.positions {
            writeln!(out, "{layer_no} {:?} {:?} {:?}", p.x, p.y, p.z)?;
        }
    }
    Ok(())
}

pub fn geometry_to_string(stack: &RisStack) -> String {
    let mut buf = Vec::new();
    write_geometry(stack, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("geometry text is ASCII")
}

/// Parse the format produced by [`write_geometry`]. Blank lines and lines
/// starting with `#` are ignored; `shape`, `memory_frames` and
/// `allow_near_field` are optional and default to a single row, zero and off.
pub fn read_geometry<R: BufRead>(input: R) -> Result<RisStack, GeometryError> {
    let mut frequency: Option<f64> = None;
    let mut shapes: [Option<(usize, usize)>; 2] = [None, None];
    let mut memory_frames = 0usize;
    let mut allow_near_field = false;
    let mut atoms: [Vec<Point3>; 2] = [Vec::new(), Vec::new()];

    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| GeometryError::FileFormat { line: line_no, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<f64, GeometryError> {
            s.parse::<f64>().map_err(|e| err(format!("bad number {s:?}: {e}")))
        };
        let int = |s: &str| -> Result<usize, GeometryError> {
            s.parse::<usize>().map_err(|e| err(format!("bad integer {s:?}: {e}")))
        };
        match fields[0] {
            "frequency_hz" if fields.len() == 2 => frequency = Some(num(fields[1])?),
            "shape" if fields.len() == 4 => {
                let layer = int(fields[1])?;
                if !(1..=2).contains(&layer) {
                    return Err(err(format!("layer index {layer} out of range")));
                }
                shapes[layer - 1] = Some((int(fields[2])?, int(fields[3])?));
            }
            "memory_frames" if fields.len() == 2 => memory_frames = int(fields[1])?,
            "allow_near_field" if fields.len() == 2 => allow_near_field = int(fields[1])? != 0,
            "1" | "2" if fields.len() == 4 => {
                let layer = int(fields[0])?;
                atoms[layer - 1].push(Point3::new(num(fields[1])?, num(fields[2])?, num(fields[3])?));
            }
            _ => return Err(err(format!("unrecognized line {line:?}"))),
        }
    }

    let frequency = frequency.ok_or(GeometryError::FileFormat {
        line: 0,
        message: "missing frequency_hz header".into(),
    })?;
    let carrier = CarrierSpec::new(frequency)?;
    let [a1, a2] = atoms;
    let layer = |pos: Vec<Point3>, shape: Option<(usize, usize)>| {
        let (r, c) = shape.unwrap_or((1, pos.len()));
        MetaAtomLayer::new(pos, r, c)
    };
    let layer1 = layer(a1, shapes[0])?;
    let layer2 = layer(a2, shapes[1])?;
    Ok(RisStack::with_memory_frames(carrier, layer1, layer2, memory_frames)?.allowing_near_field(allow_near_field))
}
