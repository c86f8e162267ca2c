//! Benchmark target functions and a name-addressable registry.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// The fixed 10-dimensional corner-peak steepness parameters used by the
/// benchmarks (descending; they sum to 1.85). Callers may substitute their
/// own positive vector via [`corner_peak`].
pub const CORNER_PEAK_A10: [f64; 10] = [
    0.4761, 0.4500, 0.3297, 0.2553, 0.0963, 0.0764, 0.0714, 0.0648, 0.0286, 0.0014,
];

/// Corner-peak function on `[0,1]^d`:
///
/// f(x) = (1 + Σ_j a_j x_j)^{−(d+1)},  a_j > 0.
///
/// Flat over most of the domain with a sharp peak at the origin; larger
/// `a_j` steepen the rise along dimension j.
pub fn corner_peak(x: &[f64], a: &[f64]) -> Result<f64> {
    if x.len() != a.len() || x.is_empty() {
        return Err(Error::invalid(format!(
            "corner peak needs matching non-empty x and a, got {} and {}",
            x.len(),
            a.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::invalid("corner peak parameters must be positive"));
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(Error::invalid("corner peak input must lie in [0,1]^d"));
    }
    let s: f64 = x.iter().zip(a).map(|(xi, ai)| ai * xi).sum();
    let d = x.len() as i32;
    Ok((1.0 + s).powi(-(d + 1)))
}

/// Bivariate Franke function: two Gaussian peaks of different heights and
/// a smaller dip, smooth on `[0,1]²`.
pub fn franke2d(x1: f64, x2: f64) -> f64 {
    0.75 * (-(9.0 * x1 - 2.0).powi(2) / 4.0 - (9.0 * x2 - 2.0).powi(2) / 4.0).exp()
        + 0.75 * (-(9.0 * x1 + 1.0).powi(2) / 49.0 - (9.0 * x2 + 1.0).powi(2) / 10.0).exp()
        + 0.5 * (-(9.0 * x1 - 7.0).powi(2) / 4.0 - (9.0 * x2 - 3.0).powi(2) / 4.0).exp()
        - 0.2 * (-(9.0 * x1 - 4.0).powi(2) - (9.0 * x2 - 7.0).powi(2)).exp()
}

/// Four-dimensional Franke function: the sum of two marginal bivariate
/// Franke functions, g(x1,x2) + g(x3,x4).
pub fn franke4d(x: &[f64]) -> Result<f64> {
    if x.len() != 4 {
        return Err(Error::invalid(format!(
            "franke4d takes a 4-vector, got {} coordinates",
            x.len()
        )));
    }
    Ok(franke2d(x[0], x[1]) + franke2d(x[2], x[3]))
}

#[derive(Debug, Clone)]
enum FnKind {
    CornerPeak(Vec<f64>),
    Franke2d,
    Franke4d,
}

/// A named benchmark target: deterministic, finite on `[0,1]^d`.
#[derive(Debug, Clone)]
pub struct TargetFunction {
    name: String,
    dim: usize,
    params: Vec<(String, f64)>,
    kind: FnKind,
}

impl TargetFunction {
    /// Corner peak with caller-chosen parameters.
    pub fn corner_peak(a: Vec<f64>) -> Result<Self> {
        // Validate once up front so eval can stay cheap.
        corner_peak(&vec![0.0; a.len()], &a)?;
        Ok(TargetFunction {
            name: format!("corner-peak-{}d", a.len()),
            dim: a.len(),
            params: a
                .iter()
                .enumerate()
                .map(|(j, v)| (format!("a{}", j + 1), *v))
                .collect(),
            kind: FnKind::CornerPeak(a),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Named parameters (empty for the Franke functions).
    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "{} takes {} coordinates, got {}",
                self.name,
                self.dim,
                x.len()
            )));
        }
        match &self.kind {
            FnKind::CornerPeak(a) => corner_peak(x, a),
            FnKind::Franke2d => Ok(franke2d(x[0], x[1])),
            FnKind::Franke4d => franke4d(x),
        }
    }
}

/// Anything a sequential design can evaluate on demand: a deterministic
/// function on `[0,1]^dim`.
pub trait Target {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;
}

impl Target for TargetFunction {
    fn dim(&self) -> usize {
        TargetFunction::dim(self)
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        TargetFunction::eval(self, x)
    }
}

/// Registry names accepted by [`by_name`].
pub const REGISTRY: [&str; 3] = ["corner-peak-10d", "franke-2d", "franke-4d"];

/// Look up a benchmark function by its registry name.
pub fn by_name(name: &str) -> Option<TargetFunction> {
    match name {
        "corner-peak-10d" => {
            Some(TargetFunction::corner_peak(CORNER_PEAK_A10.to_vec()).expect("valid constants"))
        }
        "franke-2d" => Some(TargetFunction {
            name: "franke-2d".into(),
            dim: 2,
            params: Vec::new(),
            kind: FnKind::Franke2d,
        }),
        "franke-4d" => Some(TargetFunction {
            name: "franke-4d".into(),
            dim: 4,
            params: Vec::new(),
            kind: FnKind::Franke4d,
        }),
        _ => None,
    }
}

/// A target known only through sampled data: points with their responses,
/// for emulation-only workflows where no closed form exists.
#[derive(Debug, Clone)]
pub struct Tabulated {
    pub points: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl Tabulated {
    /// Read `x1,...,xd,y` CSV (header required, `y` last).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let cols = headers.len();
        if cols < 2 || headers.iter().last() != Some("y") {
            return Err(Error::Malformed(
                "tabulated CSV needs columns x1,...,xd,y with y last".into(),
            ));
        }
        let d = cols - 1;
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != cols {
                return Err(Error::Malformed(format!(
                    "row {} has {} fields, expected {cols}",
                    line + 1,
                    record.len()
                )));
            }
            for (k, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Malformed(format!("non-numeric entry {field:?} on row {}", line + 1))
                })?;
                if k < d {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
        }
        if ys.is_empty() {
            return Err(Error::Malformed("tabulated CSV has no data rows".into()));
        }
        Ok(Tabulated {
            points: DMatrix::from_row_slice(ys.len(), d, &xs),
            values: DVector::from_vec(ys),
        })
    }

    /// Write in the same `x1,...,xd,y` layout read by [`Tabulated::read_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = self.points.ncols();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for i in 0..self.points.nrows() {
            let mut row: Vec<String> = (0..d)
                .map(|j| format!("{:.16e}", self.points[(i, j)]))
                .collect();
            row.push(format!("{:.16e}", self.values[i]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn corner_peak_parameters_sum_to_target() {
        let sum: f64 = CORNER_PEAK_A10.iter().sum();
        assert_relative_eq!(sum, 1.85, max_relative = 1e-12);
        assert!(CORNER_PEAK_A10.iter().all(|a| *a > 0.0));
        assert!(CORNER_PEAK_A10.windows(2).all(|w| w[0] >= w[1]), "sorted descending");
    }

    #[test]
    fn corner_peak_frozen_values() {
        // Exactly 1 at the origin (the sum vanishes).
        assert_eq!(corner_peak(&[0.0; 10], &CORNER_PEAK_A10).unwrap(), 1.0);
        // (1 + 1.85)^{-11} at the all-ones corner, frozen from a
        // high-precision evaluation.
        assert_relative_eq!(
            corner_peak(&[1.0; 10], &CORNER_PEAK_A10).unwrap(),
            9.924452098599605e-6,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            corner_peak(&[0.5; 10], &CORNER_PEAK_A10).unwrap(),
            7.434673959550056e-4,
            max_relative = 1e-13
        );
    }

    #[test]
    fn corner_peak_strictly_decreasing_along_each_axis() {
        let a = CORNER_PEAK_A10;
        for j in 0..10 {
            let mut prev = f64::INFINITY;
            for step in 0..=10 {
                let mut x = [0.3; 10];
                x[j] = step as f64 / 10.0;
                let v = corner_peak(&x, &a).unwrap();
                assert!(v < prev, "not decreasing along axis {j}");
                assert!(v > 0.0 && v <= 1.0);
                prev = v;
            }
        }
    }

    #[test]
    fn corner_peak_rejects_bad_inputs() {
        assert!(corner_peak(&[0.5], &[0.5, 0.5]).is_err());
        assert!(corner_peak(&[0.5], &[0.0]).is_err());
        assert!(corner_peak(&[0.5], &[-1.0]).is_err());
        assert!(corner_peak(&[1.5], &[0.5]).is_err());
        assert!(corner_peak(&[], &[]).is_err());
    }

    #[test]
    fn franke2d_frozen_values() {
        // Frozen from a high-precision evaluation of the four-term form.
        assert_relative_eq!(
            franke2d(0.5, 0.5),
            0.11201159918660236,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            franke2d(0.8, 0.1),
            0.2975430760811603,
            max_relative = 1e-12
        );
        // At (2/9, 2/9) the first exponent vanishes: the first term is 0.75.
        assert_relative_eq!(
            franke2d(2.0 / 9.0, 2.0 / 9.0),
            1.0045144598883606,
            max_relative = 1e-12
        );
        // At (4/9, 7/9) the dip term's exponent vanishes: it contributes
        // exactly −0.2 and dominates.
        assert_relative_eq!(
            franke2d(4.0 / 9.0, 7.0 / 9.0),
            -0.19775397649533866,
            max_relative = 1e-12
        );
    }

    #[test]
    fn franke4d_is_additive() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
            let direct = franke4d(&x).unwrap();
            let parts = franke2d(x[0], x[1]) + franke2d(x[2], x[3]);
            assert!((direct - parts).abs() <= 1e-15);
        }
        // Symmetric arguments double the marginal value.
        let v = franke4d(&[0.3, 0.6, 0.3, 0.6]).unwrap();
        assert_relative_eq!(v, 2.0 * franke2d(0.3, 0.6), max_relative = 1e-15);
        assert!(franke4d(&[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn functions_finite_on_random_points() {
        let mut rng = StdRng::seed_from_u64(17);
        let cp = by_name("corner-peak-10d").unwrap();
        let f4 = by_name("franke-4d").unwrap();
        for _ in 0..10_000 {
            let x10: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
            assert!(cp.eval(&x10).unwrap().is_finite());
            let x4: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
            assert!(f4.eval(&x4).unwrap().is_finite());
        }
    }

    #[test]
    fn registry_resolves_names() {
        for name in REGISTRY {
            let f = by_name(name).unwrap();
            assert_eq!(f.name(), name);
        }
        assert_eq!(by_name("corner-peak-10d").unwrap().dim(), 10);
        assert_eq!(by_name("franke-2d").unwrap().dim(), 2);
        assert_eq!(by_name("franke-4d").unwrap().dim(), 4);
        assert!(by_name("nonexistent").is_none());

        let cp = by_name("corner-peak-10d").unwrap();
        assert_eq!(cp.params().len(), 10);
        assert_eq!(cp.params()[0], ("a1".to_string(), 0.4761));
        assert_relative_eq!(
            cp.eval(&[0.5; 10]).unwrap(),
            corner_peak(&[0.5; 10], &CORNER_PEAK_A10).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn registry_eval_checks_dimensions() {
        let f = by_name("franke-2d").unwrap();
        assert!(f.eval(&[0.5]).is_err());
        assert_relative_eq!(f.eval(&[0.5, 0.5]).unwrap(), franke2d(0.5, 0.5));
    }

    #[test]
    fn tabulated_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let tab = Tabulated {
            points: DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
            values: DVector::from_vec(vec![1.5, -2.25, 0.125]),
        };
        tab.write_csv(&path).unwrap();
        let back = Tabulated::read_csv(&path).unwrap();
        assert_eq!(back.points, tab.points);
        assert_eq!(back.values, tab.values);
        assert_eq!(back.dim(), 2);
    }

    #[test]
    fn tabulated_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x1,x2\n0.1,0.2\n").unwrap();
        assert!(Tabulated::read_csv(&path).is_err(), "missing y column");
        std::fs::write(&path, "x1,y\n0.1\n").unwrap();
        assert!(Tabulated::read_csv(&path).is_err(), "short row");
        std::fs::write(&path, "x1,y\n").unwrap();
        assert!(Tabulated::read_csv(&path).is_err(), "no rows");
    }
}
