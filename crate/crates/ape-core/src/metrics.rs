//! Accuracy metrics, held-out test sets, and the benchmark record format.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testfns::TargetFunction;

/// Held-out evaluation points with their true responses.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub points: DMatrix<f64>,
    pub truth: DVector<f64>,
    pub seed: u64,
}

impl TestSet {
    /// Draw `n` uniform points on `[0,1]^d` (row-major draw order, so the
    /// same seed gives the same set regardless of how rows are consumed)
    /// and evaluate `f` at each.
    pub fn uniform(f: &TargetFunction, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("test set needs at least one point"));
        }
        let d = f.dim();
        let mut rng = StdRng::seed_from_u64(seed);
        let mut points = DMatrix::zeros(n, d);
        let mut truth = DVector::zeros(n);
        for i in 0..n {
            for j in 0..d {
                points[(i, j)] = rng.gen::<f64>();
            }
        }
        for i in 0..n {
            let row: Vec<f64> = points.row(i).iter().copied().collect();
            truth[i] = f.eval(&row)?;
        }
        Ok(TestSet { points, truth, seed })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_pair(truth: &DVector<f64>, pred: &DVector<f64>) -> Result<()> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::invalid(format!(
            "metric needs matching non-empty vectors, got {} and {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.iter().chain(pred.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("metric inputs must be finite"));
    }
    Ok(())
}

/// Root mean squared prediction error: sqrt(mean((t_i − p_i)²)).
pub fn rmspe(truth: &DVector<f64>, pred: &DVector<f64>) -> Result<f64> {
    check_pair(truth, pred)?;
    let n = truth.len() as f64;
    Ok(((truth - pred).norm_squared() / n).sqrt())
}

/// Maximum absolute prediction error: max_i |t_i − p_i|.
pub fn mape(truth: &DVector<f64>, pred: &DVector<f64>) -> Result<f64> {
    check_pair(truth, pred)?;
    Ok((truth - pred).abs().max())
}

/// Scaled accuracy pair: RMSPE divided by the population standard deviation
/// of the truth, and MAPE divided by the maximum absolute deviation of the
/// truth from its mean. Both are unitless; a predictor that always returns
/// the truth's mean scores exactly 1 on each.
pub fn scale_metrics(truth: &DVector<f64>, pred: &DVector<f64>) -> Result<(f64, f64)> {
    check_pair(truth, pred)?;
    let n = truth.len() as f64;
    let mean = truth.mean();
    let centered = truth.map(|t| t - mean);
    let sd = (centered.norm_squared() / n).sqrt();
    let maxad = centered.abs().max();
    if sd == 0.0 || maxad == 0.0 {
        return Err(Error::invalid(
            "test responses are constant; scaled metrics are undefined",
        ));
    }
    Ok((rmspe(truth, pred)? / sd, mape(truth, pred)? / maxad))
}

/// One benchmark measurement: a method applied to a function at a given
/// design size, with scaled accuracy and wall-clock fit+predict time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub function: String,
    pub n: usize,
    pub rmspe_scaled: f64,
    pub mape_scaled: f64,
    pub time_minutes: f64,
    pub seed: u64,
}

impl BenchRecord {
    /// Append to a records CSV, writing the header only when the file is
    /// new or empty.
    pub fn append_csv(&self, path: &Path) -> Result<()> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        let mut w = csv::WriterBuilder::new()
            .has_headers(fresh)
            .from_writer(file);
        w.serialize(self)?;
        w.flush()?;
        Ok(())
    }

    /// Read every record from a CSV produced by [`BenchRecord::append_csv`].
    pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>> {
        let mut r = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for record in r.deserialize() {
            out.push(record?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfns::by_name;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn frozen_five_point_example() {
        let truth = v(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let pred = v(&[1.1, 1.8, 3.2, 4.4, 5.1]);
        // sqrt((0.01+0.04+0.04+0.16+0.01)/5) and max 0.4, frozen from a
        // high-precision evaluation.
        assert_relative_eq!(
            rmspe(&truth, &pred).unwrap(),
            0.22803508501982758,
            max_relative = 1e-14
        );
        assert_relative_eq!(mape(&truth, &pred).unwrap(), 0.4, max_relative = 1e-14);
        let (r, m) = scale_metrics(&truth, &pred).unwrap();
        // Population sd = sqrt(2); maximum deviation from the mean = 2.
        assert_relative_eq!(r, 0.161245154965971, max_relative = 1e-14);
        assert_relative_eq!(m, 0.2, max_relative = 1e-14);
    }

    #[test]
    fn mean_predictor_scores_exactly_one() {
        let truth = v(&[-1.0, 0.5, 2.0, 7.25, -3.75]);
        let mean = truth.mean();
        let pred = DVector::from_element(truth.len(), mean);
        let (r, m) = scale_metrics(&truth, &pred).unwrap();
        assert_relative_eq!(r, 1.0, max_relative = 1e-14);
        assert_relative_eq!(m, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn scaled_metrics_are_affine_invariant() {
        let truth = v(&[0.3, -1.2, 2.4, 0.8, 1.1, -0.6]);
        let pred = v(&[0.2, -1.0, 2.5, 1.0, 0.9, -0.4]);
        let (r0, m0) = scale_metrics(&truth, &pred).unwrap();
        for (a, b) in [(3.5, -2.0), (-0.25, 10.0), (1e6, 1e3)] {
            let t2 = truth.map(|t| a * t + b);
            let p2 = pred.map(|p| a * p + b);
            let (r, m) = scale_metrics(&t2, &p2).unwrap();
            assert_relative_eq!(r, r0, max_relative = 1e-12);
            assert_relative_eq!(m, m0, max_relative = 1e-12);
        }
    }

    #[test]
    fn constant_truth_is_rejected() {
        let truth = v(&[2.0, 2.0, 2.0]);
        let pred = v(&[1.9, 2.0, 2.1]);
        assert!(scale_metrics(&truth, &pred).is_err());
        // Unscaled metrics still work.
        assert!(rmspe(&truth, &pred).is_ok());
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(rmspe(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
        assert!(rmspe(&v(&[]), &v(&[])).is_err());
        assert!(mape(&v(&[f64::NAN]), &v(&[0.0])).is_err());
        assert!(scale_metrics(&v(&[1.0, f64::INFINITY]), &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn test_set_is_deterministic_and_in_cube() {
        let f = by_name("franke-4d").unwrap();
        let a = TestSet::uniform(&f, 50, 99).unwrap();
        let b = TestSet::uniform(&f, 50, 99).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.len(), 50);
        assert_eq!(a.seed, 99);
        assert!(a.points.iter().all(|x| (0.0..1.0).contains(x)));
        let c = TestSet::uniform(&f, 50, 100).unwrap();
        assert_ne!(a.points, c.points);
        // Truth matches direct evaluation row by row.
        for i in 0..a.len() {
            let row: Vec<f64> = a.points.row(i).iter().copied().collect();
            assert_eq!(a.truth[i], f.eval(&row).unwrap());
        }
        assert!(TestSet::uniform(&f, 0, 1).is_err());
    }

    #[test]
    fn bench_records_round_trip_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let rec1 = BenchRecord {
            method: "standard-gp".into(),
            function: "franke-2d".into(),
            n: 129,
            rmspe_scaled: 0.21,
            mape_scaled: 0.35,
            time_minutes: 0.004,
            seed: 7,
        };
        let rec2 = BenchRecord {
            method: "ape".into(),
            function: "corner-peak-10d".into(),
            n: 501,
            rmspe_scaled: 0.33,
            mape_scaled: 0.6,
            time_minutes: 1.25,
            seed: 11,
        };
        rec1.append_csv(&path).unwrap();
        rec2.append_csv(&path).unwrap();
        let back = BenchRecord::read_csv(&path).unwrap();
        assert_eq!(back, vec![rec1, rec2]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "method,function,n,rmspe_scaled,mape_scaled,time_minutes,seed\n"
        ));
        assert_eq!(text.matches("method,function").count(), 1, "single header");
    }

    proptest! {
        // RMSPE is an average of squared errors under a square root; it can
        // never exceed the worst single error.
        #[test]
        fn rmspe_never_exceeds_mape(
            pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..60)
        ) {
            let truth = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.0));
            let pred = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.1));
            let r = rmspe(&truth, &pred).unwrap();
            let m = mape(&truth, &pred).unwrap();
            prop_assert!(r <= m * (1.0 + 1e-12));
        }
    }
}
