//! Latin hypercube designs.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::design::{BoundingBox, Design, Provenance};
use crate::error::{Error, Result};

/// Random Latin hypercube of `n` points in `[0, 1)^d`.
///
/// Each dimension is cut into `n` equal strata; a shuffled assignment puts
/// exactly one point in every stratum, jittered uniformly within it. The
/// half-open strata keep every coordinate strictly below 1, so the points
/// also satisfy half-open box membership after rescaling.
pub fn lhd(n: usize, d: usize, seed: u64) -> Result<Design> {
    lhd_in_box(n, &BoundingBox::unit(d), seed)
}

/// Latin hypercube restricted to a sub-box: a unit LHD mapped affinely
/// into `box_`.
pub fn lhd_in_box(n: usize, box_: &BoundingBox, seed: u64) -> Result<Design> {
    if n == 0 {
        return Err(Error::invalid("LHD size must be ≥ 1"));
    }
    let d = box_.dim();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut points = DMatrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(&mut rng);
        for i in 0..n {
            let u = (perm[i] as f64 + rng.gen::<f64>()) / n as f64;
            points[(i, j)] = box_.lo()[j] + u * box_.width(j);
        }
    }
    Design::new(points, Provenance::Lhd, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stratum(v: f64, lo: f64, width: f64, n: usize) -> usize {
        (((v - lo) / width) * n as f64).floor() as usize
    }

    #[test]
    fn every_stratum_holds_exactly_one_point() {
        let design = lhd(23, 4, 99).unwrap();
        for j in 0..4 {
            let mut counts = vec![0usize; 23];
            for i in 0..23 {
                counts[stratum(design.points()[(i, j)], 0.0, 1.0, 23)] += 1;
            }
            assert!(counts.iter().all(|c| *c == 1), "dim {j}: {counts:?}");
        }
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let a = lhd(50, 3, 7).unwrap();
        let b = lhd(50, 3, 7).unwrap();
        assert_eq!(a.points(), b.points());
        assert_eq!(a.seed(), 7);
        assert_eq!(a.provenance(), &Provenance::Lhd);
    }

    #[test]
    fn different_seeds_differ() {
        let a = lhd(50, 3, 7).unwrap();
        let b = lhd(50, 3, 8).unwrap();
        assert_ne!(a.points(), b.points());
    }

    #[test]
    fn box_restricted_points_satisfy_half_open_membership() {
        let box_ = BoundingBox::new(vec![0.25, 0.5], vec![0.5, 1.0]).unwrap();
        let design = lhd_in_box(40, &box_, 3).unwrap();
        for i in 0..40 {
            let p = design.point(i);
            assert!(box_.contains(&p), "point {p:?} escaped the box");
            // Strictly below the upper face even where it is the domain edge.
            assert!(p[0] < 0.5 && p[1] < 1.0);
        }
    }

    #[test]
    fn unit_box_matches_plain_lhd() {
        let a = lhd(17, 2, 11).unwrap();
        let b = lhd_in_box(17, &BoundingBox::unit(2), 11).unwrap();
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn zero_points_rejected() {
        assert!(lhd(0, 2, 1).is_err());
    }

    proptest! {
        #[test]
        fn stratification_holds_in_any_box(
            n in 1usize..40,
            seed in any::<u64>(),
            lo in 0.0f64..0.5,
            width in 0.1f64..0.5,
        ) {
            let box_ = BoundingBox::new(vec![lo], vec![lo + width]).unwrap();
            let design = lhd_in_box(n, &box_, seed).unwrap();
            let mut counts = vec![0usize; n];
            for i in 0..n {
                let s = stratum(design.points()[(i, 0)], lo, width, n).min(n - 1);
                counts[s] += 1;
            }
            prop_assert!(counts.iter().all(|c| *c == 1));
        }
    }
}
