//! Bounded Nelder–Mead search, used on the concentrated likelihood in
//! log length-scale space.
//!
//! The simplex is clamped to the search box componentwise, which keeps the
//! method derivative-free and deterministic: no RNG, no restarts, stable
//! tie-breaking, so a given start always yields the same minimizer.

/// Standard simplex coefficients (reflection, expansion, contraction,
/// shrink).
const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct NmOptions {
    /// Objective evaluation budget.
    pub max_evals: usize,
    /// Stop when the simplex objective spread falls below this.
    pub ftol: f64,
    /// ... and the coordinate spread below this.
    pub xtol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_evals: 500,
            ftol: 1e-8,
            xtol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub fval: f64,
    pub evals: usize,
}

fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Minimize `f` over the box `[lo, hi]`, starting at `x0` (assumed inside).
///
/// Non-finite objective values are allowed: +∞ acts as an ordinary "very
/// bad" value, −∞ as "unbeatable", and NaN is treated as +∞.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &NmOptions,
) -> NmResult {
    let d = x0.len();
    assert!(d > 0 && lo.len() == d && hi.len() == d);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus a 5%-of-box step along each axis, stepping
    // inward when the boundary is in the way.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut start = x0.to_vec();
    clamp_into(&mut start, lo, hi);
    simplex.push(start.clone());
    for j in 0..d {
        let mut v = start.clone();
        let step = 0.05 * (hi[j] - lo[j]).max(f64::MIN_POSITIVE);
        v[j] = if v[j] + step <= hi[j] {
            v[j] + step
        } else {
            v[j] - step
        };
        clamp_into(&mut v, lo, hi);
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    loop {
        // Order the simplex best-first; stable sort keeps ties deterministic.
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap());
        let simplex_sorted: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let fvals_sorted: Vec<f64> = order.iter().map(|&i| fvals[i]).collect();
        simplex = simplex_sorted;
        fvals = fvals_sorted;

        let f_best = fvals[0];
        let f_worst = fvals[d];
        let spread_ok = f_best == f_worst || (f_worst - f_best).abs() <= opts.ftol;
        let coord_spread = (0..d)
            .map(|j| {
                (1..=d)
                    .map(|i| (simplex[i][j] - simplex[0][j]).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if (spread_ok && coord_spread <= opts.xtol) || evals >= opts.max_evals {
            return NmResult {
                x: simplex[0].clone(),
                fval: fvals[0],
                evals,
            };
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; d];
        for v in simplex.iter().take(d) {
            for j in 0..d {
                centroid[j] += v[j] / d as f64;
            }
        }

        let mut reflected: Vec<f64> = (0..d)
            .map(|j| centroid[j] + ALPHA * (centroid[j] - simplex[d][j]))
            .collect();
        clamp_into(&mut reflected, lo, hi);
        let f_r = eval(&reflected, &mut evals);

        if f_r < fvals[0] {
            let mut expanded: Vec<f64> = (0..d)
                .map(|j| centroid[j] + GAMMA * (reflected[j] - centroid[j]))
                .collect();
            clamp_into(&mut expanded, lo, hi);
            let f_e = eval(&expanded, &mut evals);
            if f_e < f_r {
                simplex[d] = expanded;
                fvals[d] = f_e;
            } else {
                simplex[d] = reflected;
                fvals[d] = f_r;
            }
        } else if f_r < fvals[d - 1] {
            simplex[d] = reflected;
            fvals[d] = f_r;
        } else {
            // Contract toward the better of worst/reflected.
            let (base, f_base) = if f_r < fvals[d] {
                (&reflected, f_r)
            } else {
                (&simplex[d], fvals[d])
            };
            let mut contracted: Vec<f64> = (0..d)
                .map(|j| centroid[j] + RHO * (base[j] - centroid[j]))
                .collect();
            clamp_into(&mut contracted, lo, hi);
            let f_c = eval(&contracted, &mut evals);
            if f_c < f_base {
                simplex[d] = contracted;
                fvals[d] = f_c;
            } else {
                // Shrink everything toward the best vertex.
                for i in 1..=d {
                    let v: Vec<f64> = (0..d)
                        .map(|j| simplex[0][j] + SIGMA * (simplex[i][j] - simplex[0][j]))
                        .collect();
                    fvals[i] = eval(&v, &mut evals);
                    simplex[i] = v;
                }
            }
        }
    }
}

/// Van der Corput radical inverse of `i` in the given base — digit-reversed
/// fraction, the 1-d building block of a Halton sequence.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    debug_assert!(base >= 2);
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= b;
    }
    out
}

/// First `d` primes, the per-dimension Halton bases.
pub fn first_primes(d: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(d);
    let mut candidate = 2u64;
    while primes.len() < d {
        if primes.iter().all(|p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}
