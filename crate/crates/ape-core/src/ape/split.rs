//! Split-dimension selection and the split itself.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{Partition, Region, SplitRecord};

/// Mean and sample variance (n−1 denominator) of a response group.
fn group_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Pick the dimension whose midpoint split best separates the responses:
/// the j minimizing V_within / V_between, where a hypothetical split at the
/// region's j-midpoint yields group means m^(1), m^(2) and variances v^(1),
/// v^(2), V_between = Σ_ℓ (m^(ℓ) − m̄)² and V_within = (v^(1) + v^(2)) / 2.
///
/// Dimensions whose split would leave fewer than two points on a side are
/// skipped. If every candidate has V_between = 0 (the ratio is undefined),
/// the widest valid dimension wins, ties to the lowest index. With no valid
/// dimension at all the region is unsplittable this round.
pub fn choose_split_dimension(
    region: &Region,
    design: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<usize> {
    let indices = region.point_indices();
    if indices.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: indices.len(),
        });
    }
    let bounds = region.bounds();
    let mut best: Option<(usize, f64)> = None;
    let mut widest_valid: Option<(usize, f64)> = None;
    for j in 0..bounds.dim() {
        let mid = bounds.midpoint(j);
        if !(mid > bounds.lo()[j] && mid < bounds.hi()[j]) {
            continue; // width has collapsed at f64 resolution
        }
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for &i in indices {
            if design[(i, j)] < mid {
                lower.push(y[i]);
            } else {
                upper.push(y[i]);
            }
        }
        if lower.len() < 2 || upper.len() < 2 {
            continue; // a side would lack a variance
        }
        if widest_valid.is_none_or(|(_, w)| bounds.width(j) > w) {
            widest_valid = Some((j, bounds.width(j)));
        }
        let (m1, v1) = group_stats(&lower);
        let (m2, v2) = group_stats(&upper);
        let grand = (m1 + m2) / 2.0;
        let v_between = (m1 - grand).powi(2) + (m2 - grand).powi(2);
        let v_within = (v1 + v2) / 2.0;
        if v_between == 0.0 {
            continue; // ratio undefined; only reachable via the fallback
        }
        let ratio = v_within / v_between;
        if best.is_none_or(|(_, r)| ratio < r) {
            best = Some((j, ratio));
        }
    }
    best.or(widest_valid)
        .map(|(j, _)| j)
        .ok_or(Error::NoValidSplit { region: region.id() })
}

/// Split the region in slot `region_id` at the midpoint of dimension `dim`.
/// Points move to the children by the half-open rule; the lower child keeps
/// the slot and id, the upper child is appended as a new region. Returns
/// the two child ids. Children are unfitted; the caller rescores them.
pub fn split_region(
    partition: &mut Partition,
    region_id: usize,
    dim: usize,
    iteration: usize,
    design: &DMatrix<f64>,
) -> Result<(usize, usize)> {
    let upper_id = partition.regions.len();
    let region = partition
        .regions
        .get(region_id)
        .ok_or_else(|| Error::invalid(format!("no region with id {region_id}")))?;
    let value = region.bounds().midpoint(dim);
    let (lower_box, upper_box) = region.bounds().split_at(dim, value)?;

    let mut lower_points = Vec::new();
    let mut upper_points = Vec::new();
    for &i in region.point_indices() {
        if design[(i, dim)] < value {
            lower_points.push(i);
        } else {
            upper_points.push(i);
        }
    }

    partition.regions[region_id] = Region::new(region_id, lower_box, lower_points);
    partition
        .regions
        .push(Region::new(upper_id, upper_box, upper_points));
    partition.split_log.push(SplitRecord {
        iteration,
        region: region_id,
        dim,
        value,
    });
    Ok((region_id, upper_id))
}
