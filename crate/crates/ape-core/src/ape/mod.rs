//! The adaptive partitioning emulator.
//!
//! One region covering `[0,1]^d` holds an initial Latin-hypercube design.
//! Each iteration selects the region with the worst cross-validated error,
//! tops it up to `2·n0` points with a region-constrained LHD, splits it at
//! the midpoint of the dimension where the response separates best, and
//! fits an independent GP (in region-local coordinates) to each child.
//! Prediction delegates to the region containing the query point.

mod cv;
mod split;

pub use cv::{apply_measure, loo_cv_error, loo_residuals};
pub use split::{choose_split_dimension, split_region};

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{lhd, lhd_in_box, BoundingBox, Design, Provenance};
use crate::error::{Error, Result};
use crate::gp::{fit, FitConfig, TrainedGP, TrendBasis};
use crate::seed::{child_seed, stream};
use crate::testfns::Target;

/// Fewest points a region needs before a leave-one-out score is meaningful.
pub(crate) const MIN_CV_POINTS: usize = 3;

/// How leave-one-out residuals are folded into one region score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMeasure {
    /// Mean of the squared residuals.
    Mse,
    /// Largest absolute residual.
    MaxAbs,
}

/// How each leave-one-out prediction is computed. Both modes hold the
/// correlation parameters and trend coefficients at their full-data
/// estimates; `FullRefit` re-solves the kriging system without the held-out
/// row, `ClosedForm` recovers the same residuals from one factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LooMode {
    ClosedForm,
    FullRefit,
}

/// Settings for one emulator run.
#[derive(Debug, Clone)]
pub struct ApeConfig {
    /// Initial design size; regions are topped up to `2 * n0` before a split.
    pub n0: usize,
    /// Stop once the total design reaches this size.
    pub target_n: usize,
    pub error_measure: ErrorMeasure,
    /// Master seed; the initial design and every top-up draw from
    /// deterministic child streams of it.
    pub seed: u64,
    pub fit: FitConfig,
    pub loo_mode: LooMode,
}

impl Default for ApeConfig {
    fn default() -> Self {
        ApeConfig {
            n0: 100,
            target_n: 1000,
            error_measure: ErrorMeasure::Mse,
            seed: 0,
            fit: FitConfig::default(),
            loo_mode: LooMode::ClosedForm,
        }
    }
}

impl ApeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 < MIN_CV_POINTS {
            return Err(Error::invalid(format!(
                "n0 must be at least {MIN_CV_POINTS} (trend coefficients plus a holdout), got {}",
                self.n0
            )));
        }
        if self.target_n < self.n0 {
            return Err(Error::invalid(format!(
                "target size {} is below the initial size {}",
                self.target_n, self.n0
            )));
        }
        self.fit.validate()
    }
}

/// One cell of the partition: a box, the global indices of the points it
/// owns, and (once fitted) a GP over those points in box-local coordinates.
#[derive(Debug, Clone)]
pub struct Region {
    id: usize,
    bounds: BoundingBox,
    point_indices: Vec<usize>,
    cv_error: Option<f64>,
    model: Option<TrainedGP>,
    /// A split was attempted with the region already at full size and no
    /// dimension was valid; it can never become splittable again.
    dead: bool,
}

impl Region {
    /// A fresh, unfitted region. The caller is responsible for only listing
    /// points that lie inside `bounds`; [`Partition::validate`] audits this.
    pub fn new(id: usize, bounds: BoundingBox, point_indices: Vec<usize>) -> Self {
        Region {
            id,
            bounds,
            point_indices,
            cv_error: None,
            model: None,
            dead: false,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn bounds(&self) -> &BoundingBox {
        &self.bounds
    }

    /// Indices into the global design owned by this region.
    pub fn point_indices(&self) -> &[usize] {
        &self.point_indices
    }

    /// Cross-validated prediction error, unset until first scored. Unset
    /// scores are treated as worst-possible by region selection.
    pub fn cv_error(&self) -> Option<f64> {
        self.cv_error
    }

    pub fn model(&self) -> Option<&TrainedGP> {
        self.model.as_ref()
    }

    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }

    /// Rows of the global design owned by this region, mapped to box-local
    /// coordinates, in `point_indices` order.
    fn local_design(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.bounds.dim();
        let mut local = DMatrix::zeros(self.point_indices.len(), d);
        for (row, &i) in self.point_indices.iter().enumerate() {
            let x: Vec<f64> = points.row(i).iter().copied().collect();
            let u = self.bounds.to_local(&x);
            for j in 0..d {
                local[(row, j)] = u[j];
            }
        }
        local
    }

    fn gather_responses(&self, responses: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.point_indices.len(),
            self.point_indices.iter().map(|&i| responses[i]),
        )
    }

    /// Selection priority: unscored regions outrank every scored one.
    fn priority(&self) -> f64 {
        self.cv_error.unwrap_or(f64::INFINITY)
    }
}

/// Where a region boundary came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub iteration: usize,
    /// Id of the region that was split (its lower child keeps this id).
    pub region: usize,
    /// Zero-based split dimension.
    pub dim: usize,
    /// Global coordinate of the splitting plane.
    pub value: f64,
}

/// Disjoint boxes exactly covering `[0,1]^d`, each owning its points.
#[derive(Debug, Clone)]
pub struct Partition {
    regions: Vec<Region>,
    split_log: Vec<SplitRecord>,
}

/// Mean, standard error, and the region that produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionedPrediction {
    pub mean: f64,
    pub se: f64,
    pub region: usize,
}

/// Serializable snapshot of one region's box and fitted surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionExport {
    pub id: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub theta: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
    pub cv_error: Option<f64>,
    pub point_indices: Vec<usize>,
}

impl Partition {
    /// The trivial partition: one region covering the whole cube.
    pub fn single(d: usize, point_indices: Vec<usize>) -> Self {
        Partition {
            regions: vec![Region::new(0, BoundingBox::unit(d), point_indices)],
            split_log: Vec::new(),
        }
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn split_log(&self) -> &[SplitRecord] {
        &self.split_log
    }

    /// Number of regions (K).
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.regions[0].bounds.dim()
    }

    /// Id of the unique region containing `x0` (boxes are half-open, with
    /// the upper domain boundary closed).
    pub fn locate(&self, x0: &[f64]) -> Result<usize> {
        if x0.len() != self.dim() || x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfDomain { point: x0.to_vec() });
        }
        self.regions
            .iter()
            .find(|r| r.bounds.contains(x0))
            .map(|r| r.id)
            .ok_or_else(|| Error::invalid("partition does not cover the query point"))
    }

    /// Predict at `x0` with the model of the region that owns it.
    pub fn predict(&self, x0: &[f64]) -> Result<PartitionedPrediction> {
        let rid = self.locate(x0)?;
        let region = &self.regions[rid];
        let model = region.model.as_ref().ok_or_else(|| {
            Error::invalid(format!("region {rid} has no fitted model"))
        })?;
        let p = model.predict(&region.bounds.to_local(x0))?;
        Ok(PartitionedPrediction {
            mean: p.mean,
            se: p.se,
            region: rid,
        })
    }

    /// Check the structural invariants against the global design: ids match
    /// slots, boxes tile the cube (volumes sum to 1), every design point is
    /// owned by exactly one region, and ownership matches geometry.
    pub fn validate(&self, points: &DMatrix<f64>) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::invalid("partition has no regions"));
        }
        for (slot, region) in self.regions.iter().enumerate() {
            if region.id != slot {
                return Err(Error::invalid(format!(
                    "region id {} stored in slot {slot}",
                    region.id
                )));
            }
        }
        let volume: f64 = self.regions.iter().map(|r| r.bounds.volume()).sum();
        if (volume - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "region volumes sum to {volume}, expected 1"
            )));
        }
        let mut owner = vec![usize::MAX; points.nrows()];
        for region in &self.regions {
            for &i in &region.point_indices {
                if i >= points.nrows() {
                    return Err(Error::invalid(format!(
                        "region {} lists out-of-range point {i}",
                        region.id
                    )));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::invalid(format!(
                        "point {i} owned by regions {} and {}",
                        owner[i], region.id
                    )));
                }
                owner[i] = region.id;
                let x: Vec<f64> = points.row(i).iter().copied().collect();
                if !region.bounds.contains(&x) {
                    return Err(Error::invalid(format!(
                        "point {i} lies outside its region {}",
                        region.id
                    )));
                }
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::invalid(format!("point {i} is owned by no region")));
        }
        Ok(())
    }

    /// Snapshot every region for serialization.
    pub fn export(&self) -> Vec<RegionExport> {
        self.regions
            .iter()
            .map(|r| RegionExport {
                id: r.id,
                lo: r.bounds.lo().to_vec(),
                hi: r.bounds.hi().to_vec(),
                theta: r.model.as_ref().map(|m| m.theta().theta().to_vec()),
                beta: r.model.as_ref().map(|m| m.beta().iter().copied().collect()),
                sigma2: r.model.as_ref().map(|m| m.sigma2()),
                cv_error: r.cv_error,
                point_indices: r.point_indices.clone(),
            })
            .collect()
    }
}

/// One completed loop iteration, as written to the trace. `dim` is
/// zero-based; `n` and `K` are the totals after the iteration finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub n: usize,
    #[serde(rename = "K")]
    pub regions: usize,
    pub region_id: usize,
    pub dim: usize,
    pub split_value: f64,
    /// Fresh CV scores of the lower and upper child (unset when a child is
    /// too small to score).
    pub child_errors: [Option<f64>; 2],
    pub elapsed_s: f64,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct ApeRun {
    pub partition: Partition,
    pub design: Design,
    pub responses: DVector<f64>,
    pub trace: Vec<IterationRecord>,
}

/// Progress callback payloads for [`run_ape_observed`]. Observers see the
/// live state after the initial fit and after every completed iteration, so
/// callers can checkpoint accuracy or stream the trace while the run is
/// still growing.
#[derive(Debug)]
pub enum ApeEvent<'a> {
    Initialized {
        n: usize,
        partition: &'a Partition,
        points: &'a DMatrix<f64>,
        responses: &'a DVector<f64>,
    },
    Iteration {
        record: &'a IterationRecord,
        partition: &'a Partition,
        points: &'a DMatrix<f64>,
        responses: &'a DVector<f64>,
    },
}

/// Fit (or refit) a region's GP in local coordinates and refresh its CV
/// score. Regions too small to cross-validate keep an unset score, which
/// makes them top selection priority until they are topped up.
fn refit_region(
    region: &mut Region,
    points: &DMatrix<f64>,
    responses: &DVector<f64>,
    config: &ApeConfig,
) -> Result<()> {
    let local = region.local_design(points);
    let y = region.gather_responses(responses);
    let model = fit(local, y, TrendBasis::Constant, &config.fit)?;
    region.cv_error = if region.len() >= MIN_CV_POINTS {
        let residuals = loo_residuals(&model, config.loo_mode)?;
        let score = apply_measure(&residuals, config.error_measure);
        if !score.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite CV score in region {}",
                region.id
            )));
        }
        Some(score)
    } else {
        None
    };
    region.model = Some(model);
    Ok(())
}

/// Evaluate `f` at each new row, extending `responses`.
fn evaluate_rows<T: Target + ?Sized>(
    f: &T,
    points: &DMatrix<f64>,
    responses: &mut DVector<f64>,
    from_row: usize,
) -> Result<()> {
    let n = points.nrows();
    let mut extended = responses.clone().resize_vertically(n, 0.0);
    for i in from_row..n {
        let x: Vec<f64> = points.row(i).iter().copied().collect();
        let y = f.eval(&x)?;
        if !y.is_finite() {
            return Err(Error::EvaluationFailed { point: x });
        }
        extended[i] = y;
    }
    *responses = extended;
    Ok(())
}

/// Run the emulator to `config.target_n` points. Equivalent to
/// [`run_ape_observed`] with a no-op observer.
pub fn run_ape<T: Target + ?Sized>(f: &T, config: &ApeConfig) -> Result<ApeRun> {
    run_ape_observed(f, config, |_| Ok(()))
}

/// Run the emulator, invoking `observer` after the initial fit and after
/// every completed iteration.
///
/// Iterations select the region with the largest CV error (unscored regions
/// first; ties to the lowest id), add `max(0, 2·n0 − n*)` fresh LHD points
/// inside it, split it at the midpoint of the chosen dimension, and fit the
/// two children. A region in which no dimension admits a valid split is
/// retried after its top-up refreshed the score, or retired for good if it
/// was already at full size. The run stops when the design reaches
/// `target_n` points or every region is retired.
///
/// On error the run's internal state is dropped; observers have already
/// seen every completed iteration, so externally streamed traces survive.
pub fn run_ape_observed<T, F>(f: &T, config: &ApeConfig, mut observer: F) -> Result<ApeRun>
where
    T: Target + ?Sized,
    F: FnMut(ApeEvent<'_>) -> Result<()>,
{
    config.validate()?;
    let d = f.dim();
    let ape_seed = child_seed(config.seed, stream::APE);

    // Initial design: one region holding an n0-point LHD over the cube.
    let mut points = lhd(config.n0, d, child_seed(ape_seed, 0))?.into_points();
    let mut responses = DVector::zeros(0);
    evaluate_rows(f, &points, &mut responses, 0)?;
    let mut partition = Partition::single(d, (0..config.n0).collect());
    refit_region(&mut partition.regions[0], &points, &responses, config)?;

    let mut trace: Vec<IterationRecord> = Vec::new();
    observer(ApeEvent::Initialized {
        n: points.nrows(),
        partition: &partition,
        points: &points,
        responses: &responses,
    })?;

    // `pass` numbers every trip through the loop (it seeds top-up draws);
    // trace records are numbered by completed splits only.
    let mut pass: u64 = 0;
    while points.nrows() < config.target_n {
        // Strict comparison keeps the earliest maximum, so ties (including
        // several unscored regions) go to the lowest id.
        let mut selected: Option<(usize, f64)> = None;
        for region in partition.regions.iter().filter(|r| !r.dead) {
            let p = region.priority();
            if selected.is_none_or(|(_, best)| p > best) {
                selected = Some((region.id, p));
            }
        }
        let Some((k_star, _)) = selected else {
            break; // every region retired; budget unreachable
        };
        pass += 1;
        let started = Instant::now();

        // Top the region up to 2·n0 points (it may already be there).
        let n_star = partition.regions[k_star].len();
        let top_up = (2 * config.n0).saturating_sub(n_star);
        if top_up > 0 {
            let fresh = lhd_in_box(
                top_up,
                &partition.regions[k_star].bounds,
                child_seed(ape_seed, pass),
            )?
            .into_points();
            let old_n = points.nrows();
            points = points.resize_vertically(old_n + top_up, 0.0);
            for r in 0..top_up {
                for j in 0..d {
                    points[(old_n + r, j)] = fresh[(r, j)];
                }
                partition.regions[k_star].point_indices.push(old_n + r);
            }
            evaluate_rows(f, &points, &mut responses, old_n)?;
        }

        let j_star =
            match choose_split_dimension(&partition.regions[k_star], &points, &responses) {
                Ok(j) => j,
                Err(Error::NoValidSplit { .. }) => {
                    if top_up == 0 {
                        // Already at full size and still unsplittable:
                        // nothing will ever change here.
                        partition.regions[k_star].dead = true;
                    } else {
                        // The top-up changed the region; rescore it and let
                        // selection reconsider.
                        refit_region(&mut partition.regions[k_star], &points, &responses, config)?;
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };

        let split_value = partition.regions[k_star].bounds.midpoint(j_star);
        let iteration = trace.len() + 1;
        let (lower_id, upper_id) =
            split_region(&mut partition, k_star, j_star, iteration, &points)?;
        refit_region(&mut partition.regions[lower_id], &points, &responses, config)?;
        refit_region(&mut partition.regions[upper_id], &points, &responses, config)?;

        trace.push(IterationRecord {
            iter: iteration,
            n: points.nrows(),
            regions: partition.regions.len(),
            region_id: k_star,
            dim: j_star,
            split_value,
            child_errors: [
                partition.regions[lower_id].cv_error,
                partition.regions[upper_id].cv_error,
            ],
            elapsed_s: started.elapsed().as_secs_f64(),
        });
        observer(ApeEvent::Iteration {
            record: trace.last().expect("just pushed"),
            partition: &partition,
            points: &points,
            responses: &responses,
        })?;
    }

    let design = Design::new(
        points,
        Provenance::Ape {
            iterations: trace.len(),
        },
        config.seed,
    )?;
    Ok(ApeRun {
        partition,
        design,
        responses,
        trace,
    })
}
