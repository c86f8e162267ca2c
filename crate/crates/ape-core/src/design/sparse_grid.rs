//! Smolyak-style sparse grid designs.
//!
//! The grid of level η in d dimensions is the union of tensor products of
//! nested one-dimensional component designs over all level compositions
//! k₁ + ... + k_d = η (each k_j ≥ 1). Because the component designs are
//! nested, the union automatically contains the products for every smaller
//! total level as well.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::design::{Design, Provenance};
use crate::error::{Error, Result};
use crate::gp::kernel::{matern52, CorrelationParams};

/// Nested one-dimensional component design of the given level, sorted
/// ascending. Sizes grow as 2·level − 1:
///
/// * level 1: {1/2}
/// * level 2: adds {0, 1}
/// * level ≥ 3: adds one symmetric pair of dyadic fractions per level,
///   working through denominators 4, 8, 16, ... with odd numerators in
///   increasing order ({1/4, 3/4}, then {1/8, 7/8}, {3/8, 5/8}, then
///   {1/16, 15/16}, ...).
pub fn component_design(level: usize) -> Result<Vec<f64>> {
    if level == 0 {
        return Err(Error::invalid("component design level must be ≥ 1"));
    }
    let mut pts = vec![0.5];
    if level >= 2 {
        pts.push(0.0);
        pts.push(1.0);
    }
    let mut k = 3;
    let mut ring = 1u32;
    while k <= level {
        let denom = (1u64 << (ring + 1)) as f64;
        let mut num = 1u64;
        while num < (1u64 << ring) && k <= level {
            let v = num as f64 / denom;
            pts.push(v);
            pts.push(1.0 - v);
            k += 1;
            num += 2;
        }
        ring += 1;
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(pts)
}

/// Visit every composition of `total` into `parts` strictly positive parts.
fn for_each_composition(total: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(remaining: usize, idx: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        let parts = buf.len();
        if idx == parts - 1 {
            buf[idx] = remaining;
            f(buf);
            return;
        }
        // Leave at least 1 for each of the remaining slots.
        for v in 1..=(remaining - (parts - 1 - idx)) {
            buf[idx] = v;
            rec(remaining - v, idx + 1, buf, f);
        }
    }
    if parts == 0 || total < parts {
        return;
    }
    let mut buf = vec![0usize; parts];
    rec(total, 0, &mut buf, f);
}

/// Sparse grid of level `eta` in `d` dimensions.
///
/// Deterministic: points come out deduplicated in lexicographic order.
pub fn sparse_grid(d: usize, eta: usize) -> Result<Design> {
    if d == 0 {
        return Err(Error::invalid("sparse grid dimension must be ≥ 1"));
    }
    if eta < d {
        return Err(Error::invalid(format!(
            "sparse grid level {eta} must be ≥ dimension {d} (every component level is ≥ 1)"
        )));
    }
    // Component designs for levels 1..=eta−d+1 (the largest any slot can take).
    let max_level = eta - d + 1;
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(max_level);
    for level in 1..=max_level {
        components.push(component_design(level)?);
    }

    // Dedup on exact bit patterns: dyadic coordinates are exact in f64, and
    // for non-negative floats the bit order is the numeric order, so the
    // BTreeSet yields lexicographically sorted points.
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    for_each_composition(eta, d, &mut |levels| {
        let sizes: Vec<usize> = levels.iter().map(|k| components[k - 1].len()).collect();
        let mut idx = vec![0usize; d];
        loop {
            let key: Vec<u64> = (0..d)
                .map(|j| components[levels[j] - 1][idx[j]].to_bits())
                .collect();
            seen.insert(key);
            // Odometer, last dimension fastest.
            let mut j = d;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < sizes[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
    });

    let n = seen.len();
    let mut points = DMatrix::zeros(n, d);
    for (i, key) in seen.iter().enumerate() {
        for (j, bits) in key.iter().enumerate() {
            points[(i, j)] = f64::from_bits(*bits);
        }
    }
    Design::new(points, Provenance::SparseGrid { eta }, Design::NO_SEED)
}

/// Full tensor-product grid of the given component designs, first dimension
/// varying slowest — the ordering under which the grid's correlation matrix
/// is the Kronecker product of the per-dimension ones.
pub fn full_grid(components: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if components.is_empty() || components.iter().any(|c| c.is_empty()) {
        return Err(Error::invalid("full grid needs at least one point per dimension"));
    }
    let d = components.len();
    let n: usize = components.iter().map(|c| c.len()).product();
    let mut points = DMatrix::zeros(n, d);
    for i in 0..n {
        let mut rem = i;
        for j in (0..d).rev() {
            let size = components[j].len();
            points[(i, j)] = components[j][rem % size];
            rem /= size;
        }
    }
    Ok(points)
}

/// Verify the separability identities on a full grid:
///
/// * R = R₁ ⊗ R₂ ⊗ ... ⊗ R_d (elementwise, tolerance 1e-12), and
/// * R · (R₁⁻¹ ⊗ ... ⊗ R_d⁻¹) = I (tolerance 1e-8),
///
/// where R is the directly assembled correlation matrix of the tensor grid
/// (first dimension slowest) and R_j the one-dimensional ones. A test
/// oracle for small grids, not a fast-path solver.
pub fn full_grid_kronecker_check(
    components: &[Vec<f64>],
    params: &CorrelationParams,
) -> Result<bool> {
    let grid = full_grid(components)?;
    grid_kronecker_check(&grid, components, params)
}

/// [`full_grid_kronecker_check`] against a caller-supplied point matrix,
/// which must hold exactly the tensor grid of `components` — the identity
/// is ordering-sensitive, so a permuted grid makes the check return false.
pub fn grid_kronecker_check(
    grid: &DMatrix<f64>,
    components: &[Vec<f64>],
    params: &CorrelationParams,
) -> Result<bool> {
    if components.len() != params.dim() || grid.ncols() != params.dim() {
        return Err(Error::invalid(format!(
            "{} component designs, {}-column grid, {} length-scales",
            components.len(),
            grid.ncols(),
            params.dim()
        )));
    }
    let n: usize = components.iter().map(|c| c.len()).product();
    if n == 0 || grid.nrows() != n {
        return Err(Error::invalid(format!(
            "grid has {} rows but the component designs span {n} points",
            grid.nrows()
        )));
    }
    if n > 200 {
        return Err(Error::invalid(format!(
            "Kronecker check is a small-grid oracle (≤ 200 points), got {n}"
        )));
    }
    let d = grid.ncols();

    let mut direct = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            direct[(a, b)] = (0..d)
                .map(|j| {
                    matern52((grid[(a, j)] - grid[(b, j)]).abs(), params.theta()[j])
                })
                .product();
        }
    }

    let mut kron = DMatrix::from_element(1, 1, 1.0);
    let mut kron_inv = DMatrix::from_element(1, 1, 1.0);
    for (j, comp) in components.iter().enumerate() {
        let m = comp.len();
        let rj = DMatrix::from_fn(m, m, |a, b| {
            matern52((comp[a] - comp[b]).abs(), params.theta()[j])
        });
        let rj_inv = rj.clone().try_inverse().ok_or_else(|| {
            Error::invalid(format!("component correlation matrix {j} is singular"))
        })?;
        kron = kron.kronecker(&rj);
        kron_inv = kron_inv.kronecker(&rj_inv);
    }

    let product_dev = (&direct - &kron).abs().max();
    let inverse_dev = (direct * kron_inv - DMatrix::identity(n, n)).abs().max();
    Ok(product_dev <= 1e-12 && inverse_dev <= 1e-8)
}
