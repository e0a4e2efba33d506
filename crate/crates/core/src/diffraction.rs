//! Rayleigh–Sommerfeld propagation between meta-atoms and generator-matrix
//! assembly.
//!
//! The propagation factor from a first-layer atom at `p` to a second-layer
//! atom at `q` is
//!
//! ```text
//! w = (Δz / r²) · (1 / (2πr) + 1 / (jλ)) · exp(j·2πr/λ)
//! ```
//!
//! with `r = |q − p|` and `Δz = q_z − p_z`. Entry `(i, j)` of the generator
//! matrix is the factor from layer-1 atom `j` to layer-2 atom `i`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{geometry_to_string, Point3, RisStack};

#[derive(Debug, Error)]
pub enum DiffractionError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("non-finite generator entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("invalid insertion loss {0} dB")]
    InvalidInsertionLoss(f64),
    #[error("matrix csv line {line}: {message}")]
    CsvFormat { line: usize, message: String },
    #[error("matrix csv i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Complex propagation factor from `p` (source layer) to `q` (destination layer).
pub fn rs_coefficient(p: &Point3, q: &Point3, wavelength: f64) -> Result<Complex64, DiffractionError> {
    if !(wavelength > 0.0) {
        return Err(DiffractionError::DegenerateGeometry(format!("wavelength {wavelength}")));
    }
    let r = p.distance(q);
    let dz = q.z - p.z;
    if r == 0.0 || !(dz > 0.0) {
        return Err(DiffractionError::DegenerateGeometry(format!("r = {r}, dz = {dz}")));
    }
    let amplitude = Complex64::new(1.0 / (2.0 * PI * r), -1.0 / wavelength);
    let phase = Complex64::from_polar(1.0, 2.0 * PI * r / wavelength);
    Ok(amplitude * phase * (dz / (r * r)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    /// Scale so that `‖G‖_F² = rows`.
    UnitFrobenius,
}

/// Complex `(M·N) × (K·L)` generator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    entries: DMatrix<Complex64>,
    normalization: Normalization,
    source_stack_digest: String,
    insertion_loss_db: f64,
}

impl GeneratorMatrix {
    /// Wrap an abstract matrix (no geometry behind it). `UnitFrobenius`
    /// rescales the given entries.
    pub fn from_entries(entries: DMatrix<Complex64>, normalization: Normalization) -> Result<Self, DiffractionError> {
        if let Some((row, col)) = find_non_finite(&entries) {
            return Err(DiffractionError::NonFinite { row, col });
        }
        let entries = match normalization {
            Normalization::Raw => entries,
            Normalization::UnitFrobenius => unit_frobenius(entries)?,
        };
        Ok(Self {
            entries,
            normalization,
            source_stack_digest: "abstract".into(),
            insertion_loss_db: 0.0,
        })
    }

    /// Real-valued convenience constructor, row-major.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, DiffractionError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let m = DMatrix::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0));
        Self::from_entries(m, Normalization::Raw)
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn source_stack_digest(&self) -> &str {
        &self.source_stack_digest
    }

    pub fn insertion_loss_db(&self) -> f64 {
        self.insertion_loss_db
    }

    /// `(K·L) / (M·N)`.
    pub fn code_rate(&self) -> f64 {
        self.cols() as f64 / self.rows() as f64
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.entries.iter().map(|w| w.norm_sqr()).sum()
    }

    /// Same code with every entry multiplied by `factor` (metadata kept).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.map(|w| w * factor),
            ..self.clone()
        }
    }

    /// Sub-matrix of columns `start..start + count`.
    pub fn column_block(&self, start: usize, count: usize) -> DMatrix<Complex64> {
        self.entries.columns(start, count).into_owned()
    }
}

fn find_non_finite(m: &DMatrix<Complex64>) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let w = m[(i, j)];
            if !(w.re.is_finite() && w.im.is_finite()) {
                return Some((i, j));
            }
        }
    }
    None
}

fn unit_frobenius(m: DMatrix<Complex64>) -> Result<DMatrix<Complex64>, DiffractionError> {
    let norm_sq: f64 = m.iter().map(|w| w.norm_sqr()).sum();
    if !(norm_sq > 0.0) {
        return Err(DiffractionError::DegenerateGeometry("all-zero generator".into()));
    }
    let gamma = (m.nrows() as f64 / norm_sq).sqrt();
    Ok(m.map(|w| w * gamma))
}

/// Raw propagation matrix from every atom of `sources` to every atom of
/// `destinations`.
pub fn propagation_matrix(
    sources: &[Point3],
    destinations: &[Point3],
    wavelength: f64,
) -> Result<DMatrix<Complex64>, DiffractionError> {
    let mut m = DMatrix::zeros(destinations.len(), sources.len());
    for (i, q) in destinations.iter().enumerate() {
        for (j, p) in sources.iter().enumerate() {
            m[(i, j)] = rs_coefficient(p, q, wavelength)?;
        }
    }
    Ok(m)
}

/// Assemble the generator matrix of a stack.
///
/// Normalization is applied first, then the insertion-loss amplitude factor
/// `10^(−loss/20)`.
pub fn build_generator(
    stack: &RisStack,
    normalization: Normalization,
    insertion_loss_db: f64,
) -> Result<GeneratorMatrix, DiffractionError> {
    if !(insertion_loss_db.is_finite() && insertion_loss_db >= 0.0) {
        return Err(DiffractionError::InvalidInsertionLoss(insertion_loss_db));
    }
    let raw = propagation_matrix(
        stack.layer1().positions(),
        stack.layer2().positions(),
        stack.carrier().wavelength_m(),
    )?;
    if let Some((row, col)) = find_non_finite(&raw) {
        return Err(DiffractionError::NonFinite { row, col });
    }
    let mut entries = match normalization {
        Normalization::Raw => raw,
        Normalization::UnitFrobenius => unit_frobenius(raw)?,
    };
    if insertion_loss_db > 0.0 {
        let amplitude = 10f64.powf(-insertion_loss_db / 20.0);
        entries.iter_mut().for_each(|w| *w *= amplitude);
    }
    Ok(GeneratorMatrix {
        entries,
        normalization,
        source_stack_digest: stack_digest(stack),
        insertion_loss_db,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the stack's geometry-file serialization.
pub fn stack_digest(stack: &RisStack) -> String {
    hex(&Sha256::digest(geometry_to_string(stack).as_bytes()))
}

/// SHA-256 over the shape and the bit patterns of every entry (column-major).
pub fn generator_digest(g: &GeneratorMatrix) -> String {
    let mut hasher = Sha256::new();
    hasher.update((g.rows() as u64).to_le_bytes());
    hasher.update((g.cols() as u64).to_le_bytes());
    for w in g.entries.iter() {
        hasher.update(w.re.to_bits().to_le_bytes());
        hasher.update(w.im.to_bits().to_le_bytes());
    }
    hex(&hasher.finalize())
}

/// CSV dump `row,col,re,im` with 17 significant digits.
pub fn write_generator_csv<W: Write>(g: &GeneratorMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "row,col,re,im")?;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let w = g.entries[(i, j)];
            writeln!(out, "{i},{j},{:.16e},{:.16e}", w.re, w.im)?;
        }
    }
    Ok(())
}

/// Parse a CSV dump back into a raw-normalization matrix.
pub fn read_generator_csv<R: BufRead>(input: R) -> Result<GeneratorMatrix, DiffractionError> {
    let mut cells: Vec<(usize, usize, Complex64)> = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if n == 0 || line.is_empty() {
            continue;
        }
        let err = |message: String| DiffractionError::CsvFormat { line: n + 1, message };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, got {}", f.len())));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|e| err(e.to_string()));
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(e.to_string()));
        cells.push((idx(f[0])?, idx(f[1])?, Complex64::new(num(f[2])?, num(f[3])?)));
    }
    let rows = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let cols = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.len() != rows * cols {
        return Err(DiffractionError::CsvFormat {
            line: 0,
            message: format!("{} cells do not fill a {rows}x{cols} matrix", cells.len()),
        });
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, j, w) in cells {
        m[(i, j)] = w;
    }
    GeneratorMatrix::from_entries(m, Normalization::Raw)
}
