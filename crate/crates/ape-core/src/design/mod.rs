//! Space-filling designs on the unit hypercube, and the axis-aligned boxes
//! the partitioning layer carves it into.

pub mod lhd;
pub mod sparse_grid;

pub use lhd::{lhd, lhd_in_box};
pub use sparse_grid::{component_design, full_grid, full_grid_kronecker_check, sparse_grid};

use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned sub-box of the unit hypercube.
///
/// Membership is half-open — a point belongs to `[lo_j, hi_j)` in every
/// dimension — except that a face lying on the domain boundary `hi_j = 1`
/// is closed, so boxes that tile the cube classify every point exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid(
                "box bounds must be non-empty and equal-length",
            ));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite()) || *l < 0.0 || *h > 1.0 || l >= h {
                return Err(Error::invalid(format!(
                    "box side [{l}, {h}] must satisfy 0 ≤ lo < hi ≤ 1"
                )));
            }
        }
        Ok(BoundingBox { lo, hi })
    }

    /// The whole domain `[0, 1]^d`.
    pub fn unit(d: usize) -> Self {
        BoundingBox {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        0.5 * (self.lo[j] + self.hi[j])
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    /// Half-open membership (closed on domain-boundary faces).
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        x.iter().enumerate().all(|(j, v)| {
            let upper_ok = if self.hi[j] == 1.0 {
                *v <= 1.0
            } else {
                *v < self.hi[j]
            };
            *v >= self.lo[j] && upper_ok
        })
    }

    /// Split into (lower, upper) halves at `value` along dimension `j`.
    /// `value` must lie strictly inside the side.
    pub fn split_at(&self, j: usize, value: f64) -> Result<(BoundingBox, BoundingBox)> {
        if j >= self.dim() {
            return Err(Error::invalid(format!(
                "split dimension {j} out of range for a {}-d box",
                self.dim()
            )));
        }
        if !(value > self.lo[j] && value < self.hi[j]) {
            return Err(Error::invalid(format!(
                "split value {value} not strictly inside [{}, {}]",
                self.lo[j], self.hi[j]
            )));
        }
        let mut lower = self.clone();
        let mut upper = self.clone();
        lower.hi[j] = value;
        upper.lo[j] = value;
        Ok((lower, upper))
    }

    /// Affine map of a contained point onto `[0, 1]^d` (clamped against
    /// round-off at the faces).
    pub fn to_local(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| ((v - self.lo[j]) / self.width(j)).clamp(0.0, 1.0))
            .collect()
    }

    /// Inverse of [`BoundingBox::to_local`].
    pub fn from_local(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(j, v)| self.lo[j] + v * self.width(j))
            .collect()
    }
}

/// Where a design came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Lhd,
    SparseGrid { eta: usize },
    /// Accumulated by an APE run over this many split iterations.
    Ape { iterations: usize },
}

/// An ordered list of points in the unit hypercube plus how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    points: DMatrix<f64>,
    provenance: Provenance,
    seed: u64,
}

/// Sidecar metadata serialized next to a design CSV.
#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    provenance: Provenance,
    seed: u64,
    n: usize,
    d: usize,
}

impl Design {
    /// Seed value recorded for deterministic (non-random) generators.
    pub const NO_SEED: u64 = 0;

    pub fn new(points: DMatrix<f64>, provenance: Provenance, seed: u64) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::invalid("design must have at least one point and one dimension"));
        }
        if let Some(bad) = points.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::invalid(format!(
                "design coordinate {bad} outside the unit hypercube"
            )));
        }
        Ok(Design {
            points,
            provenance,
            seed,
        })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn into_points(self) -> DMatrix<f64> {
        self.points
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Write the point matrix as CSV (`x1,...,xd` header, 17 significant
    /// digits — enough to round-trip f64 exactly) and a JSON sidecar with
    /// provenance and seed at [`sidecar_path`].
    pub fn write(&self, path: &Path) -> Result<()> {
        write_points_csv(path, &self.points)?;
        let sidecar = Sidecar {
            provenance: self.provenance.clone(),
            seed: self.seed,
            n: self.len(),
            d: self.dim(),
        };
        let mut file = std::fs::File::create(sidecar_path(path))?;
        serde_json::to_writer_pretty(&mut file, &sidecar)?;
        file.write_all(b"\n")?;
        Ok(())
    }

    /// Read a design written by [`Design::write`] (CSV + sidecar).
    pub fn read(path: &Path) -> Result<Self> {
        let points = read_points_csv(path)?;
        let raw = std::fs::read_to_string(sidecar_path(path))?;
        let sidecar: Sidecar = serde_json::from_str(&raw)?;
        if sidecar.n != points.nrows() || sidecar.d != points.ncols() {
            return Err(Error::Malformed(format!(
                "sidecar says {}x{} but CSV holds {}x{}",
                sidecar.n,
                sidecar.d,
                points.nrows(),
                points.ncols()
            )));
        }
        Design::new(points, sidecar.provenance, sidecar.seed)
    }
}

/// Sidecar file for a design CSV: same stem, `.meta.json` extension.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("meta.json")
}

/// Bare point matrix as CSV with an `x1,...,xd` header.
pub fn write_points_csv(path: &Path, points: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = points.ncols();
    w.write_record((1..=d).map(|j| format!("x{j}")))?;
    for i in 0..points.nrows() {
        w.write_record((0..d).map(|j| format!("{:.16e}", points[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a point matrix from CSV (header required, numeric columns only).
pub fn read_points_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let d = r.headers()?.len();
    if d == 0 {
        return Err(Error::Malformed("design CSV has no columns".into()));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for record in r.records() {
        let record = record?;
        if record.len() != d {
            return Err(Error::Malformed(format!(
                "row {} has {} fields, expected {d}",
                n + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Malformed(format!("non-numeric design entry {field:?}"))
            })?;
            rows.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Malformed("design CSV has no rows".into()));
    }
    Ok(DMatrix::from_row_slice(n, d, &rows))
}
